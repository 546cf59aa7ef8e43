use std::fs;
use std::path::{Path, PathBuf};

use iwes::env::evaluate_policy_median;
use iwes::persist::{load_params, read_log, LOG_COLUMNS, WALL_COLUMN};
use iwes::runner::{eval_seed_base, sweep_with, train_with, Resources, RunConfig, SweepAxis};

fn config(dir: &Path, extra: &[&str]) -> RunConfig {
    let mut o: Vec<String> = [
        "objective=sphere",
        "dim=8",
        "iterations=6",
        "seeds=[0,1]",
        "batch_pairs=8",
        "n_eval=3",
        "noise_table_len=20000",
        "learning_rate=0.05",
        "sigma=0.1",
        "workers=1",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    o.push(format!("out_dir={}", dir.display()));
    o.extend(extra.iter().map(|s| s.to_string()));
    RunConfig::load(None, &o).unwrap()
}

fn res() -> Resources {
    Resources::new(1).unwrap()
}

/// CSV lines with the wall-clock column removed.
fn without_wall(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| {
            l.split(',')
                .enumerate()
                .filter(|&(i, _)| i != WALL_COLUMN)
                .map(|(_, f)| f)
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect()
}

#[test]
fn zero_iterations_write_header_and_initial_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &["iterations=0"]);
    train_with(&cfg, &res()).unwrap();
    let text = fs::read_to_string(dir.path().join("run_0.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], LOG_COLUMNS.join(","));
    let rows = read_log(&dir.path().join("run_0.csv")).unwrap();
    assert_eq!((rows[0].iteration, rows[0].update_index), (0, 0));
    assert_eq!(rows[0].train_env_steps_cum, 0);
    assert_eq!(rows[0].eval_env_steps_cum, 3);
    for f in ["config.echo.json", "run_1.csv", "params_final.bin", "params_final_0.bin", "params_final_1.bin", "aggregate.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn k_zero_matches_plain_es_loop() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    train_with(&config(a.path(), &["K=0"]), &res()).unwrap();
    train_with(&config(b.path(), &["K=0", "iw_enabled=false"]), &res()).unwrap();
    for seed in [0, 1] {
        let f = format!("run_{seed}.csv");
        assert_eq!(without_wall(&a.path().join(&f)), without_wall(&b.path().join(&f)));
        let p = format!("params_final_{seed}.bin");
        assert_eq!(fs::read(a.path().join(&p)).unwrap(), fs::read(b.path().join(&p)).unwrap());
    }
}

#[test]
fn log_rows_and_step_accounting() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &["K=2", "log_every=2", "iterations=5", "horizon=50"]);
    let out = train_with(&cfg, &res()).unwrap();
    let rows = read_log(&dir.path().join("run_0.csv")).unwrap();
    // iterations 0, 2, 4, 5; three update rows for each after the first
    assert_eq!(rows.len(), 1 + 3 * 3);
    let iters: Vec<u64> = rows.iter().map(|r| r.iteration).collect();
    assert_eq!(iters, vec![0, 2, 2, 2, 4, 4, 4, 5, 5, 5]);
    for r in &rows[1..] {
        // sphere episodes take one step
        assert_eq!(r.train_env_steps_cum, r.iteration * 16);
        assert!(r.update_index <= 2);
    }
    for w in rows.windows(2) {
        assert!(w[1].wall_ms_cum >= w[0].wall_ms_cum);
        assert!(w[1].eval_env_steps_cum >= w[0].eval_env_steps_cum);
    }
    assert_eq!(out.runs[0].rows, rows);
}

#[test]
fn aggregate_is_mean_over_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &["seeds=[3,4,5]", "K=1"]);
    let out = train_with(&cfg, &res()).unwrap();
    let runs: Vec<_> = [3, 4, 5]
        .iter()
        .map(|s| read_log(&dir.path().join(format!("run_{s}.csv"))).unwrap())
        .collect();
    assert_eq!(out.aggregate.len(), runs[0].len());
    for (i, a) in out.aggregate.iter().enumerate() {
        let mean = runs.iter().map(|r| r[i].median_eval_return).sum::<f64>() / 3.0;
        assert!((a.median_eval_return - mean).abs() <= 1e-12 * mean.abs().max(1.0));
        let ess = runs.iter().map(|r| r[i].ess).sum::<f64>() / 3.0;
        assert!((a.ess - ess).abs() <= 1e-12 * ess);
        assert_eq!(a.iteration, runs[0][i].iteration);
    }
    let agg = fs::read_to_string(dir.path().join("aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), out.aggregate.len() + 1);
}

#[test]
fn reruns_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    train_with(&config(a.path(), &["K=3"]), &res()).unwrap();
    train_with(&config(b.path(), &["K=3"]), &Resources::new(3).unwrap()).unwrap();
    for f in ["run_0.csv", "run_1.csv", "aggregate.csv"] {
        assert_eq!(without_wall(&a.path().join(f)), without_wall(&b.path().join(f)), "{f}");
    }
    assert_eq!(
        load_params(&a.path().join("params_final.bin")).unwrap(),
        load_params(&b.path().join("params_final.bin")).unwrap()
    );
}

#[test]
fn parallel_seeds_give_the_same_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    train_with(&config(a.path(), &["K=1", "seeds=[0,1,2]"]), &res()).unwrap();
    train_with(&config(b.path(), &["K=1", "seeds=[0,1,2]", "parallel_seeds=true"]), &res()).unwrap();
    for f in ["run_0.csv", "run_2.csv", "aggregate.csv"] {
        assert_eq!(without_wall(&a.path().join(f)), without_wall(&b.path().join(f)), "{f}");
    }
}

#[test]
fn config_echo_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &["K=2", "optimizer={\"kind\":\"sgd\"}"]);
    train_with(&cfg, &res()).unwrap();
    let echoed = RunConfig::from_json_str(&fs::read_to_string(dir.path().join("config.echo.json")).unwrap()).unwrap();
    assert_eq!(echoed, cfg);
}

#[test]
fn unknown_keys_and_bad_values_are_config_errors() {
    assert!(RunConfig::load(None, &["no_such_key=1".into()]).unwrap_err().is_config());
    assert!(RunConfig::load(None, &["sigma=0".into()]).unwrap_err().is_config());
    assert!(RunConfig::load(None, &["batch_pairs=0".into()]).unwrap_err().is_config());
    assert!(RunConfig::load(None, &["ess_min_fraction=1.5".into()]).unwrap_err().is_config());
}

#[test]
fn single_value_sweep_equals_plain_training() {
    let sweep_dir = tempfile::tempdir().unwrap();
    let base = config(sweep_dir.path(), &[]);
    let out = sweep_with(&base, SweepAxis::K, &[0.0], &res()).unwrap();
    assert_eq!(out.summary.len(), 1);
    let train_dir = tempfile::tempdir().unwrap();
    let plain = config(train_dir.path(), &["K=0"]);
    train_with(&plain, &res()).unwrap();
    let point: PathBuf = sweep_dir.path().join("K_0");
    for f in ["run_0.csv", "run_1.csv", "aggregate.csv"] {
        assert_eq!(without_wall(&point.join(f)), without_wall(&train_dir.path().join(f)), "{f}");
    }
    assert!(sweep_dir.path().join("summary.csv").exists());
}

#[test]
fn learning_rate_sweep_layout() {
    let dir = tempfile::tempdir().unwrap();
    let base = config(dir.path(), &["K=1"]);
    let out = sweep_with(&base, SweepAxis::LearningRate, &[0.01, 0.1], &res()).unwrap();
    assert_eq!(out.aggregates[0].len(), out.aggregates[1].len());
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(dir.path().join("learning_rate_0.01").join("aggregate.csv").exists());
    assert!(dir.path().join("learning_rate_0.1").join("aggregate.csv").exists());
}

/// A short point-mass run must beat the policy that never moves.
#[test]
fn pointmass_policy_learns() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(
        dir.path(),
        &["objective=pointmass", "batch_pairs=32", "n_eval=10", "iterations=200", "learning_rate=1e-4", "sigma=0.02", "K=1", "log_every=50"],
    );
    cfg.seeds = (0..5).collect();
    cfg.noise_table_len = 2_000_000;
    let out = train_with(&cfg, &res()).unwrap();
    let task = cfg.build_objective();
    let zeros = vec![0.0; task.dim()];
    for run in &out.runs {
        let still = evaluate_policy_median(task.as_ref(), &zeros, cfg.n_eval, eval_seed_base(run.seed)).unwrap();
        let last = run.rows.last().unwrap().median_eval_return;
        assert!(last > still.median_return, "seed {}: {last} vs stand-still {}", run.seed, still.median_return);
        assert!(last > run.rows[0].median_eval_return, "seed {} did not improve", run.seed);
    }
}
