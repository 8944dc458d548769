mod common;

use std::fs;

use common::{configs_dir, load_config};
use mixspec2d::experiments::{
    aggregate_csv, run_cells, run_experiment, run_trial, ExperimentConfig, SizeAggregate,
    AGGREGATE_CSV, MANIFEST_JSON, TRIALS_CSV,
};
use mixspec2d::Error;

fn small() -> ExperimentConfig {
    let mut c = load_config("default");
    c.sizes = vec![(24, 24), (32, 32)];
    c.trials = 3;
    c.q_max = 4;
    c.checks = serde_json::from_str(
        r#"["selection", {"under_est": 1}, "over_est", "sup_decay", "loss_limits"]"#,
    )
    .unwrap();
    c
}

#[test]
fn every_shipped_config_is_valid() {
    let mut n = 0;
    for entry in fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 7);
}

#[test]
fn trial_reproducible_from_indices() {
    let c = small();
    let a = run_trial(&c, 1, 2).unwrap();
    let b = run_trial(&c, 1, 2).unwrap();
    let strip = |t: &mixspec2d::experiments::TrialResult| {
        let mut t = t.clone();
        t.wall_time_s = 0.0;
        serde_json::to_string(&t).unwrap()
    };
    assert_eq!(strip(&a), strip(&b));
    assert_ne!(a.seed, run_trial(&c, 1, 1).unwrap().seed);
    assert!(run_trial(&c, 2, 0).is_err());
    assert!(run_trial(&c, 0, 3).is_err());
}

#[test]
fn full_runs_are_byte_identical() {
    let c = small();
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&c, d1.path()).unwrap();
    run_experiment(&c, d2.path()).unwrap();
    for f in [TRIALS_CSV, AGGREGATE_CSV, MANIFEST_JSON] {
        let a = fs::read(d1.path().join(f)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, fs::read(d2.path().join(f)).unwrap(), "{f} differs");
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(d1.path().join(MANIFEST_JSON)).unwrap()).unwrap();
    assert_eq!(manifest["config_hash"], c.hash());
}

#[test]
fn aggregates_ignore_trial_order() {
    let c = small();
    let s = run_cells(&c).unwrap();
    let forward: Vec<_> = s.trials.iter().filter(|t| t.size_index == 0).collect();
    let mut reversed = forward.clone();
    reversed.reverse();
    let a = SizeAggregate::from_trials(&c, 0, &forward).unwrap();
    let b = SizeAggregate::from_trials(&c, 0, &reversed).unwrap();
    assert_eq!(aggregate_csv(&c, &[a]), aggregate_csv(&c, &[b]));
}

#[test]
fn csv_columns_are_stable() {
    let c = small();
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&c, dir.path()).unwrap();
    let agg = fs::read_to_string(dir.path().join(AGGREGATE_CSV)).unwrap();
    let head = agg.lines().next().unwrap();
    assert_eq!(
        head,
        "size_index,rows,cols,trials,trials_with_errors,selected_k0,selected_k1,selected_k2,\
         selected_k3,frac_selected_p,frac_chi_decreasing,freq_rmse,amp_rmse,under1_hit_frac,\
         under1_freq_rmse,over_dist_frac,over_rho2_frac,median_sup_stat,median_loss_k0,\
         median_loss_k1,median_loss_k2,median_loss_k3,loss_limit_k0,loss_limit_k1,loss_limit_k2"
    );
    assert_eq!(agg.lines().count(), 3);
    let trials = fs::read_to_string(dir.path().join(TRIALS_CSV)).unwrap();
    assert_eq!(trials.lines().count(), 1 + 6);
    let cols = trials.lines().next().unwrap().split(',').count();
    assert!(trials.lines().all(|l| l.split(',').count() == cols));
}

#[test]
fn unwritable_output_fails_before_compute() {
    let mut c = small();
    c.sizes = vec![(4096, 4096)];
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, b"x").unwrap();
    let start = std::time::Instant::now();
    let err = run_experiment(&c, &blocker.join("out")).unwrap_err();
    assert!(matches!(err, Error::Io(_)));
    assert!(start.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn pure_noise_mostly_selects_zero() {
    let mut c = load_config("over_estimation");
    c.sizes = vec![(32, 32)];
    c.trials = 10;
    c.q_max = 3;
    c.checks = vec![mixspec2d::experiments::Check::Selection];
    let s = run_cells(&c).unwrap();
    assert!(
        s.aggregates[0].histogram[0] >= 9,
        "{:?}",
        s.aggregates[0].histogram
    );
}
