use std::fs;
use std::path::Path;

use solab::{export, load_sweep, run_sweep, Artifact, ModularSpec, SweepPlan, ValueConvention};

fn plan() -> SweepPlan {
    SweepPlan {
        alphas: vec![1e-5, 1e-4, 1e-3],
        seeds: 3,
        resets: 30,
        steps: 300,
        network: ModularSpec {
            n: 30,
            k: 5,
            p: 0.1,
            seed: 2,
        },
        keep_learned: Some(1),
        ..SweepPlan::desk_scale(77)
    }
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    for sub in [dir.to_path_buf(), dir.join("cells")] {
        let mut names: Vec<_> = fs::read_dir(&sub)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.is_file())
            .collect();
        names.sort();
        for p in names {
            let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
            files.push((rel, fs::read(&p).unwrap()));
        }
    }
    files
}

#[test]
fn resumed_sweep_is_byte_identical() {
    let full = tempfile::tempdir().unwrap();
    run_sweep(&plan(), Some(full.path())).unwrap();
    let reference = snapshot(full.path());

    let partial = tempfile::tempdir().unwrap();
    run_sweep(&plan(), Some(partial.path())).unwrap();
    // drop half of the cells and every summary file, as if killed midway
    let cells = partial.path().join("cells");
    let mut names: Vec<_> = fs::read_dir(&cells).unwrap().map(|e| e.unwrap().path()).collect();
    names.sort();
    for p in names.iter().skip(names.len() / 2) {
        fs::remove_file(p).unwrap();
    }
    for f in ["runs.csv", "scores.csv", "baseline.json", "manifest.json"] {
        fs::remove_file(partial.path().join(f)).unwrap();
    }
    run_sweep(&SweepPlan { jobs: 2, ..plan() }, Some(partial.path())).unwrap();
    assert_eq!(snapshot(partial.path()), reference);
}

#[test]
fn exports_write_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let ds = run_sweep(&plan(), Some(dir.path())).unwrap();
    let out = dir.path().join("figures");
    for artifact in Artifact::ALL {
        let paths = export(&ds, artifact, &out).unwrap();
        assert!(!paths.is_empty());
        for p in paths {
            assert!(fs::metadata(&p).unwrap().len() > 0, "{}", p.display());
        }
    }
    let header = fs::read_to_string(out.join("scores.csv")).unwrap();
    assert!(header.starts_with("alpha,novelty,value,convergence,appropriateness,p_1sigma,p_2sigma,p_3sigma,regime\n"));
    let w = fs::read_to_string(out.join("weights_learned.csv")).unwrap();
    assert_eq!(w.lines().count(), 30);
    assert!(w.lines().all(|l| l.split(',').count() == 30));
    let runs = fs::read_to_string(dir.path().join("runs.csv")).unwrap();
    assert_eq!(runs.lines().next(), Some("stage,alpha,seed,reset,final_energy,fixed_point"));
    assert_eq!(runs.lines().count(), 1 + 3 * 30 + 3 * 3 * 2 * 30);

    let mut without = ds.clone();
    without.learned_weights = None;
    let err = export(&without, Artifact::WeightsHeatmap, &out).unwrap_err();
    assert!(err.to_string().contains("learned weights"));
}

#[test]
fn finished_sweep_reloads_and_rescores() {
    let dir = tempfile::tempdir().unwrap();
    let ds = run_sweep(&plan(), Some(dir.path())).unwrap();
    let again = load_sweep(dir.path(), None).unwrap();
    assert_eq!(again.scores, ds.scores);
    assert_eq!(again.baseline, ds.baseline);
    assert!(again.learned_weights.is_some());

    let strict = SweepPlan {
        value_convention: ValueConvention::StrictlyBetter,
        ..plan()
    };
    let rescored = load_sweep(dir.path(), Some(&strict)).unwrap();
    assert_eq!(rescored.plan.value_convention, ValueConvention::StrictlyBetter);
    assert!(rescored.scores.iter().zip(&ds.scores).all(|(a, b)| a.value <= b.value));

    std::fs::remove_file(dir.path().join("cells").join("a001_s00002.csv")).unwrap();
    let err = load_sweep(dir.path(), None).unwrap_err();
    assert!(err.to_string().contains("a001_s00002"));
}
