use solab::{
    attractor_set, is_fixed_point, modular_from_spec, relax, run_so_with, BiasVector, Engine, ModularSpec,
    RngStream, SoConfig, Stage, StateVector,
};

fn w0(n: usize, k: usize, seed: u64) -> solab::WeightMatrix {
    modular_from_spec(&ModularSpec { n, k, p: 0.1, seed }).unwrap()
}

#[test]
fn fast_engine_matches_reference_with_states() {
    let w = w0(30, 5, 2);
    for alpha in [0.0, 2e-4, 5e-3] {
        let config = SoConfig {
            record_states: true,
            ..SoConfig::three_stage(alpha, 300, 40)
        };
        let stream = |s: Stage| RngStream::derive(17, 0, 0, s.code());
        let fast = run_so_with(&w, &config, 17, Engine::Fast, stream).unwrap();
        let slow = run_so_with(&w, &config, 17, Engine::Reference, stream).unwrap();
        assert_eq!(fast.records, slow.records, "alpha={alpha}");
        assert_eq!(fast.learned.as_slice(), slow.learned.as_slice());
    }
}

#[test]
fn bl_attractors_are_fixed_points_from_enumeration() {
    let n = 20;
    let w = w0(n, 5, 6);
    let b = BiasVector::zeros(n);
    let mut minima = std::collections::BTreeSet::new();
    let mut bits = vec![0u8; n];
    for code in 0u32..(1 << n) {
        for (i, bit) in bits.iter_mut().enumerate() {
            *bit = (code >> i & 1) as u8;
        }
        let s = StateVector::from_binary(&bits).unwrap();
        if is_fixed_point(&s, &w, &b).unwrap() {
            minima.insert(s.fingerprint());
        }
    }
    let config = SoConfig {
        stages: vec![Stage::BeforeLearning],
        ..SoConfig::three_stage(0.0, 20 * n, 400)
    };
    let res = run_so_with(&w, &config, 4, Engine::Fast, |s| RngStream::derive(4, 0, 0, s.code())).unwrap();
    let found = attractor_set(&res.records, Stage::BeforeLearning);
    assert!(!found.is_empty());
    assert!(found.is_subset(&minima), "BL visited a non-minimum");
}

fn ks_statistic(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn before_learning_matches_plain_relaxation() {
    let n = 60;
    let w = w0(n, 5, 8);
    let b = BiasVector::zeros(n);
    let resets = 1500;
    let config = SoConfig {
        stages: vec![Stage::BeforeLearning],
        ..SoConfig::three_stage(0.0, 10 * n, resets)
    };
    let res = run_so_with(&w, &config, 1, Engine::Fast, |s| RngStream::derive(1, 0, 0, s.code())).unwrap();
    let mut so: Vec<f64> = res.stage_energies(Stage::BeforeLearning);
    let mut rng = RngStream::new(99);
    let mut plain: Vec<f64> = (0..resets)
        .map(|_| {
            let s0 = StateVector::random(n, &mut rng);
            let out = relax(s0, &w, &b, 10 * n, &mut rng, false).unwrap();
            solab::energy(&out.state, &w, &b).unwrap()
        })
        .collect();
    let d = ks_statistic(&mut so, &mut plain);
    // two-sample critical value at the 1% level
    let crit = 1.63 * (2.0 / resets as f64).sqrt();
    assert!(d < crit, "KS distance {d} exceeds {crit}");
}
