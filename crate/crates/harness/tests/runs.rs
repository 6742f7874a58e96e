use std::path::Path;

use psro_harness::compare::{compare_runs, RunSet};
use psro_harness::config::ExperimentConfig;
use psro_harness::run::{read_trace, run_experiment, run_seed, trace_file_name};
use psro_core::meta::Algorithm;

fn config(json: serde_json::Value) -> ExperimentConfig {
    ExperimentConfig::from_json(&json.to_string()).unwrap()
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap()
}

#[test]
fn fig1_ado_matches_golden_trace() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(serde_json::json!({ "game": { "kind": "fig1" }, "algorithm": "ado", "seeds": [0], "outer_iterations": 10 }));
    run_experiment(&c, dir.path()).unwrap();
    let path = dir.path().join("ado_seed0.csv");
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/fig1_ado.csv");
    assert_eq!(String::from_utf8(read(&path)).unwrap(), std::fs::read_to_string(golden).unwrap());
    let e: Vec<f64> = read_trace(&path).unwrap().iter().map(|r| r.exploitability).collect();
    assert_eq!(e.len(), 3);
    for (got, want) in e.iter().zip([2.0, 4.0 / 3.0, 0.0]) {
        assert!((got - want).abs() < 1e-9, "{e:?}");
    }
}

#[test]
fn bad_case_do_trace_rises_until_the_last_row() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(serde_json::json!({
        "game": { "kind": "bad_case", "n": 9 }, "algorithm": "do", "seeds": [0], "outer_iterations": 50
    }));
    run_experiment(&c, dir.path()).unwrap();
    let e: Vec<f64> = read_trace(&dir.path().join("do_seed0.csv")).unwrap().iter().map(|r| r.exploitability).collect();
    assert!(e.len() >= 3);
    assert!(e[..e.len() - 1].windows(2).all(|w| w[1] > w[0]), "{e:?}");
    assert!(e[e.len() - 1] < e[e.len() - 2]);
}

#[test]
fn reruns_are_byte_identical() {
    let c = config(serde_json::json!({
        "game": { "kind": "kuhn" }, "algorithm": "apsro", "seeds": [3, 4], "outer_iterations": 4,
        "budgets": { "regret_updates": 2000, "q_episodes": 20000 },
        "regret": { "rule": "mwu" }
    }));
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&c, a.path()).unwrap();
    run_experiment(&c, b.path()).unwrap();
    for seed in [3, 4] {
        let name = trace_file_name(Algorithm::Apsro, seed);
        assert_eq!(read(&a.path().join(&name)), read(&b.path().join(&name)));
    }
    assert_eq!(read(&a.path().join("summary.json")), read(&b.path().join("summary.json")));
}

#[test]
fn checkpointed_runs_resume_to_the_same_trace() {
    let json = serde_json::json!({
        "game": { "kind": "kuhn" }, "algorithm": "psro_tabular", "seeds": [1], "outer_iterations": 4,
        "budgets": { "q_episodes": 20000 }, "payoff_mode": { "mode": "simulated", "episodes": 50 }, "warm_start": true
    });
    let plain = tempfile::tempdir().unwrap();
    run_experiment(&config(json.clone()), plain.path()).unwrap();

    let mut short = json.clone();
    short["outer_iterations"] = 2.into();
    short["checkpoint"] = true.into();
    let resumed = tempfile::tempdir().unwrap();
    // The checkpoint hash covers outer_iterations, so a shorter run cannot be
    // extended; a full run resumed from its own checkpoint must reproduce.
    let mut full = json.clone();
    full["checkpoint"] = true.into();
    let full = config(full);
    run_seed(&full, 1, resumed.path()).unwrap();
    run_seed(&full, 1, resumed.path()).unwrap();
    let name = trace_file_name(Algorithm::PsroTabular, 1);
    assert_eq!(read(&plain.path().join(&name)), read(&resumed.path().join(&name)));

    let c = config(short);
    run_seed(&c, 1, resumed.path()).unwrap_err();
}

#[test]
fn random_games_differ_per_seed_unless_pinned() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(serde_json::json!({
        "game": { "kind": "random_nfg", "rows": 30, "cols": 30 }, "algorithm": "ado", "seeds": [0, 1], "outer_iterations": 100
    }));
    run_experiment(&c, dir.path()).unwrap();
    let set = RunSet::load(dir.path()).unwrap();
    assert_ne!(set.curves[&0], set.curves[&1]);

    let pinned = tempfile::tempdir().unwrap();
    let c = config(serde_json::json!({
        "game": { "kind": "random_nfg", "rows": 30, "cols": 30, "seed": 9 }, "algorithm": "ado", "seeds": [0, 1], "outer_iterations": 100
    }));
    run_experiment(&c, pinned.path()).unwrap();
    let set = RunSet::load(pinned.path()).unwrap();
    assert_eq!(set.curves[&0], set.curves[&1]);
}

#[test]
fn ado_beats_do_on_random_games() {
    let (d, a) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let seeds: Vec<u64> = (0..20).collect();
    for (alg, dir) in [("do", &d), ("ado", &a)] {
        let c = config(serde_json::json!({
            "game": { "kind": "random_nfg", "rows": 50, "cols": 50 }, "algorithm": alg, "seeds": seeds, "outer_iterations": 100
        }));
        run_experiment(&c, dir.path()).unwrap();
    }
    let report = compare_runs(d.path(), a.path(), 0.05).unwrap();
    assert!(report.candidate_never_worse(), "{:?}", report.curve);
    let same = compare_runs(a.path(), a.path(), 0.05).unwrap();
    assert!(same.curve.iter().all(|p| p.difference == 0.0));
}

#[test]
fn exact_learner_apsro_counts_best_responses() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(serde_json::json!({
        "game": { "kind": "kuhn" }, "algorithm": "apsro", "seeds": [0], "outer_iterations": 30, "learner": "exact",
        "budgets": { "regret_updates": 20000 }, "regret": { "rule": "mwu" }
    }));
    run_experiment(&c, dir.path()).unwrap();
    let rows = read_trace(&dir.path().join("apsro_seed0.csv")).unwrap();
    assert!(rows.iter().all(|r| r.q_episodes == 0));
    assert!(rows.windows(2).all(|w| w[1].br_calls > w[0].br_calls && w[1].regret_updates == w[0].regret_updates + 2 * 2000));
    assert!(rows[rows.len() - 1].exploitability < rows[0].exploitability);
}

#[test]
fn leduc_is_refused_for_normal_form_oracles() {
    let err = ExperimentConfig::from_json(r#"{"game":{"kind":"leduc"},"algorithm":"do","seeds":[0],"outer_iterations":5}"#).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert!(n >= 5);
}
