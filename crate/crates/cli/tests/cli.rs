use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn solab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_solab"))
        .args(args)
        .env_remove("SO_LAB_MASTER_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn help_matches_snapshot() {
    let o = solab(&["--help"]);
    assert_eq!(code(&o), 0);
    let snap = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/snapshots/help.txt");
    if std::env::var_os("UPDATE_SNAPSHOTS").is_some() {
        fs::write(&snap, stdout(&o)).unwrap();
    }
    assert_eq!(stdout(&o), fs::read_to_string(&snap).unwrap());
}

#[test]
fn exit_codes() {
    assert_eq!(code(&solab(&["--version"])), 0);
    assert_eq!(code(&solab(&["no-such-command"])), 1);
    assert_eq!(code(&solab(&["run-so", "--alpha", "abc"])), 1);
    // N not divisible by k is a configuration error
    assert_eq!(code(&solab(&["gen-weights", "--n", "31", "--out", "/dev/null"])), 1);
    let missing = tempfile::tempdir().unwrap();
    let o = solab(&["export", "--dir", missing.path().join("absent").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("manifest.json"));
}

#[test]
fn worked_tsp_example() {
    let o = solab(&["tsp-demo", "--preset", "eq4"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("tour B->D->A->C"));
}

#[test]
fn recall_demo_recovers_patterns() {
    let o = solab(&["recall-demo", "--n", "100", "--patterns", "5", "--trials", "50"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("= 1.000"), "{}", stdout(&o));
}

#[test]
fn run_so_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = solab(&[
            "run-so", "--n", "30", "--alpha", "1e-4", "--steps", "300", "--resets", "20", "--seed", "5", "--out",
            out.to_str().unwrap(), "-q",
        ]);
        assert_eq!(code(&o), 0);
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert!(text.starts_with("stage,alpha,seed,reset,final_energy,fixed_point\n"));
    assert_eq!(text.lines().count(), 1 + 3 * 20);
}

#[test]
fn config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = solab(&["run-so", "--alpha", "2e-6", "--order", "uniform", "--print-config"]);
    assert_eq!(code(&o), 0);
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, stdout(&o)).unwrap();
    let again = solab(&["run-so", "--config", cfg.to_str().unwrap(), "--print-config"]);
    assert_eq!(stdout(&again), stdout(&o));

    fs::write(&cfg, r#"{"alpha": 3e-7, "resets": 7}"#).unwrap();
    let merged = stdout(&solab(&["run-so", "--config", cfg.to_str().unwrap(), "--print-config"]));
    assert!(merged.contains("\"alpha\": 3e-7") && merged.contains("\"resets\": 7"), "{merged}");

    fs::write(&cfg, r#"{"alhpa": 1.0}"#).unwrap();
    assert_eq!(code(&solab(&["run-so", "--config", cfg.to_str().unwrap()])), 1);
}

#[test]
fn master_seed_from_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_solab"))
        .args(["sweep", "--out", "x", "--print-config"])
        .env("SO_LAB_MASTER_SEED", "91")
        .output()
        .unwrap();
    assert!(stdout(&o).contains("\"seed\": 91"));
}

#[test]
fn sweep_then_metrics_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let out_s = out.to_str().unwrap();
    let o = solab(&[
        "sweep", "--alphas", "1e-5,1e-4", "--seeds", "2", "--resets", "20", "--steps", "300", "--n", "30",
        "--keep-learned", "0", "--out", out_s, "-q",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["runs.csv", "scores.csv", "baseline.json", "manifest.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let m = solab(&["metrics", "--dir", out_s, "--value", "strictly-better"]);
    assert_eq!(code(&m), 0);
    assert!(stdout(&m).contains("baseline: mu"));

    let e = solab(&["export", "--dir", out_s, "-q"]);
    assert_eq!(code(&e), 0);
    for f in ["distributions.csv", "pareto.csv", "scores.csv", "weights_learned.csv", "energy_scatter_a001.csv"] {
        assert!(out.join("figures").join(f).is_file(), "{f}");
    }
}
