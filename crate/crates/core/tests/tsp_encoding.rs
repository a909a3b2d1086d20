use solab::{
    decode_tour, energy, shortest_tour_exhaustive, tour_length, tsp_weights, RngStream, StateVector, Tour,
    TspCoefficients, TspInstance,
};

/// The four-term penalty energy written directly over the 0/1 grid.
fn direct_energy(v: &[u8], inst: &TspInstance) -> f64 {
    let n = inst.cities();
    let TspCoefficients { a, b, c, d } = TspCoefficients::default();
    let at = |x: usize, i: usize| f64::from(v[x * n + i]);
    let mut rows = 0.0;
    for x in 0..n {
        for i in 0..n {
            for j in 0..n {
                if j != i {
                    rows += at(x, i) * at(x, j);
                }
            }
        }
    }
    let mut cols = 0.0;
    for i in 0..n {
        for x in 0..n {
            for y in 0..n {
                if y != x {
                    cols += at(x, i) * at(y, i);
                }
            }
        }
    }
    let total: f64 = v.iter().map(|&b| f64::from(b)).sum();
    let count = (total - n as f64).powi(2);
    let mut dist = 0.0;
    for x in 0..n {
        for y in 0..n {
            if y == x {
                continue;
            }
            for i in 0..n {
                dist += inst.distance(x, y) * at(x, i) * (at(y, (i + 1) % n) + at(y, (i + n - 1) % n));
            }
        }
    }
    a / 2.0 * rows + b / 2.0 * cols + c / 2.0 * count + d / 2.0 * dist
}

#[test]
fn encoding_matches_direct_energy() {
    let mut rng = RngStream::new(21);
    for n in 2..=5 {
        let inst = TspInstance::random_euclidean(n, 1.0, TspCoefficients::default(), &mut rng).unwrap();
        let enc = tsp_weights(&inst).unwrap();
        for _ in 0..200 {
            let s = StateVector::random(n * n, &mut rng);
            let want = direct_energy(&s.to_binary(), &inst);
            let got = energy(&s, &enc.weights, &enc.bias).unwrap() + enc.offset;
            assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "n={n}: {got} vs {want}");
        }
    }
}

#[test]
fn valid_tours_score_by_length() {
    let mut rng = RngStream::new(5);
    let inst = TspInstance::random_euclidean(5, 1.0, TspCoefficients::default(), &mut rng).unwrap();
    let enc = tsp_weights(&inst).unwrap();
    let d = TspCoefficients::default().d;
    for order in [vec![0, 1, 2, 3, 4], vec![4, 2, 0, 3, 1], vec![1, 0, 3, 2, 4]] {
        let tour = Tour::new(order).unwrap();
        let e = energy(&tour.to_state(), &enc.weights, &enc.bias).unwrap() + enc.offset;
        assert!((e - d * tour_length(&tour, &inst)).abs() < 1e-9);
    }
}

#[test]
fn worked_example_decodes() {
    let bits: Vec<u8> = "0010100000010100".bytes().map(|b| b - b'0').collect();
    let s = StateVector::from_binary(&bits).unwrap();
    let tour = decode_tour(&s, 4).unwrap().unwrap();
    assert_eq!(tour.to_string(), "B->D->A->C");
}

#[test]
fn exhaustive_optimum_is_shortest() {
    let mut rng = RngStream::new(8);
    let inst = TspInstance::random_euclidean(5, 1.0, TspCoefficients::default(), &mut rng).unwrap();
    let (best, len) = shortest_tour_exhaustive(&inst);
    assert!((tour_length(&best, &inst) - len).abs() < 1e-12);
    for order in [vec![0, 2, 4, 1, 3], vec![0, 1, 2, 3, 4], vec![0, 3, 1, 4, 2]] {
        assert!(tour_length(&Tour::new(order).unwrap(), &inst) >= len - 1e-12);
    }
}
