//! End-to-end checks of the `tiltlab` binary: exit-code conventions, run
//! directory layout, byte-exact rerun determinism, aggregation consistency,
//! and the behaviour of the numerical subcommands. Everything runs on a
//! deliberately tiny single-station world so the whole file stays fast.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tiltlab_cli::run::mean_and_ci_half_width;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tiltlab"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    if dir.exists() {
        fs::remove_dir_all(&dir).unwrap();
    }
    fs::create_dir_all(&dir).unwrap();
    dir
}

/// `--set` overrides for a world small enough to train in milliseconds.
fn tiny_env_args(out_dir: &Path) -> Vec<String> {
    [
        "env.n_rings=0",
        "env.n_users=50",
        "env.calibration_samples=100",
        "env.episode_length=50",
        "env.building_count=12",
        "train.total_steps=150",
        "train.learning_starts=30",
        "train.batch_size=32",
        "train.rollout_horizon=3",
        "train.sac.hidden=[16,16]",
        "train.model_hidden=[16,16]",
        "train.epoch_length=75",
        "eval_episodes=4",
    ]
    .iter()
    .flat_map(|s| ["--set".to_string(), s.to_string()])
    .chain([
        "--set".to_string(),
        format!("out_dir=\"{}\"", out_dir.display()),
    ])
    .collect()
}

fn run_ok(args: &[String]) -> Output {
    let out = bin().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "command failed: {:?}\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn pretrain_tiny(dir: &Path) -> PathBuf {
    let mut args = vec!["pretrain-baseline".to_string()];
    args.extend(tiny_env_args(dir));
    args.extend(["--set".into(), "seeds=[0]".into()]);
    run_ok(&args);
    dir.join("baseline.actor.ck")
}

#[test]
fn config_errors_exit_with_code_two() {
    // Unknown key.
    let out = bin()
        .args(["train", "--set", "env.n_userz=5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("config error"), "stderr: {msg}");
    assert!(msg.contains("n_userz"), "stderr: {msg}");

    // Residual method without a baseline (the default method needs one).
    let out = bin().args(["train"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("baseline_checkpoint"));

    // Baseline given for a method that never uses one.
    let out = bin()
        .args([
            "train",
            "--set",
            "train.method=sac",
            "--set",
            "baseline_checkpoint=\"/nonexistent.ck\"",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Malformed usage is also a configuration problem.
    let out = bin().args(["no-such-subcommand"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Empty seed list.
    let out = bin()
        .args(["train", "--set", "train.method=sac", "--set", "seeds=[]"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_layout_and_rerun_determinism() {
    let root = tmp("cli_train");
    let baseline = pretrain_tiny(&root.join("baseline"));

    let run_dir = root.join("run");
    let mut args = vec!["train".to_string()];
    args.extend(tiny_env_args(&run_dir));
    args.extend([
        "--set".into(),
        "seeds=[3,5]".into(),
        "--set".into(),
        format!("baseline_checkpoint=\"{}\"", baseline.display()),
    ]);
    run_ok(&args);

    for seed in [3u64, 5] {
        let sd = run_dir.join(format!("seed_{seed:04}"));
        assert!(sd.join("steps.csv").is_file());
        assert!(sd.join("episodes.csv").is_file());
        let header = fs::read_to_string(sd.join("steps.csv")).unwrap();
        assert!(header
            .starts_with("step,env_reward_running_avg,model_loss,critic_loss,actor_loss,alpha"));
    }
    let agg = fs::read_to_string(run_dir.join("aggregate.csv")).unwrap();
    assert!(agg.starts_with("step,mean,ci_low,ci_high"));
    // Two seeds → every row carries a finite interval.
    for line in agg.lines().skip(1).take(5) {
        let fields: Vec<_> = line.split(',').collect();
        assert_eq!(fields.len(), 4);
        assert!(!fields[2].is_empty() && !fields[3].is_empty(), "row: {line}");
    }
    let manifest = fs::read_to_string(run_dir.join("manifest.json")).unwrap();
    let manifest: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    assert_eq!(manifest["completed_seeds"], serde_json::json!([3, 5]));
    assert_eq!(manifest["failed_seeds"], serde_json::json!([]));
    assert!(manifest["content_hash"].as_str().unwrap().len() == 64);

    // Identical config + seeds → byte-identical per-seed outputs.
    let first_steps = fs::read(run_dir.join("seed_0003/steps.csv")).unwrap();
    let first_episodes = fs::read(run_dir.join("seed_0003/episodes.csv")).unwrap();
    run_ok(&args);
    assert_eq!(first_steps, fs::read(run_dir.join("seed_0003/steps.csv")).unwrap());
    assert_eq!(
        first_episodes,
        fs::read(run_dir.join("seed_0003/episodes.csv")).unwrap()
    );
}

#[test]
fn single_seed_aggregate_has_empty_interval_columns() {
    let root = tmp("cli_single_seed");
    let run_dir = root.join("run");
    let mut args = vec!["train".to_string()];
    args.extend(tiny_env_args(&run_dir));
    args.extend([
        "--set".into(),
        "train.method=sac".into(),
        "--set".into(),
        "seeds=[11]".into(),
    ]);
    run_ok(&args);
    let agg = fs::read_to_string(run_dir.join("aggregate.csv")).unwrap();
    let row = agg.lines().nth(1).unwrap();
    assert!(row.ends_with(",,"), "row: {row}");
}

#[test]
fn aggregate_command_reproduces_run_aggregates() {
    let root = tmp("cli_aggregate");
    let a = root.join("sac");
    let mut args = vec!["train".to_string()];
    args.extend(tiny_env_args(&a));
    args.extend([
        "--set".into(),
        "train.method=sac".into(),
        "--set".into(),
        "seeds=[0,1]".into(),
    ]);
    run_ok(&args);

    // A second run with a different env fingerprint → warning, not an error.
    let b = root.join("sac_big");
    let mut args = vec!["train".to_string()];
    args.extend(tiny_env_args(&b));
    args.extend([
        "--set".into(),
        "train.method=sac".into(),
        "--set".into(),
        "seeds=[0,1]".into(),
        "--set".into(),
        "env.n_users=60".into(),
    ]);
    run_ok(&args);

    let out_dir = root.join("agg");
    let out = run_ok(&[
        "aggregate".into(),
        a.display().to_string(),
        b.display().to_string(),
        "--out".into(),
        out_dir.display().to_string(),
    ]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("differ"));

    // The comparison rows for run `sac` must match its own aggregate.csv.
    let own: Vec<String> = fs::read_to_string(a.join("aggregate.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(str::to_string)
        .collect();
    let comparison = fs::read_to_string(out_dir.join("comparison.csv")).unwrap();
    let from_comparison: Vec<String> = comparison
        .lines()
        .skip(1)
        .filter(|l| l.split(',').nth(1) == Some("sac"))
        .map(|l| {
            let f: Vec<_> = l.split(',').collect();
            format!("{},{},{},{}", f[0], f[3], f[4], f[5])
        })
        .collect();
    assert_eq!(own, from_comparison);

    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert!(summary.starts_with("run,method,seeds,final_mean,convergence_step"));
    assert_eq!(summary.lines().count(), 3);
}

#[test]
fn interval_width_shrinks_with_seed_count() {
    // Synthetic per-seed values injected straight into the estimator: i.i.d.
    // draws from one distribution, so the t-interval half-width should
    // shrink like t(n−1)/√n — a factor ≈ 2.99 from 4 to 16 seeds.
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(42);
    let mut draw = |n: usize| -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    };
    let mut ratios = Vec::new();
    for _ in 0..64 {
        let (_, w4) = mean_and_ci_half_width(&draw(4));
        let (_, w16) = mean_and_ci_half_width(&draw(16));
        ratios.push(w4.unwrap() / w16.unwrap());
    }
    let mean_ratio = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!(
        (2.2..=3.8).contains(&mean_ratio),
        "mean width ratio {mean_ratio}"
    );
}

#[test]
fn crashed_seed_is_recorded_and_others_continue() {
    // learning_starts=1 with batch_size larger than the buffer can ever be
    // after one step still works (sampling waits for batch_size), so force a
    // failure differently: a baseline checkpoint that vanishes between
    // validation and the run is hard to stage; instead corrupt the
    // checkpoint so actor loading fails per-seed.
    let root = tmp("cli_crash");
    let baseline = pretrain_tiny(&root.join("baseline"));

    // Truncate the checkpoint: validation only checks existence, loading
    // parses and fails → every seed fails, command exits 1, manifest lists
    // the failures.
    let text = fs::read_to_string(&baseline).unwrap();
    fs::write(&baseline, &text[..text.len() / 2]).unwrap();

    let run_dir = root.join("run");
    let mut args = vec!["train".to_string()];
    args.extend(tiny_env_args(&run_dir));
    args.extend([
        "--set".into(),
        "seeds=[0,1]".into(),
        "--set".into(),
        format!("baseline_checkpoint=\"{}\"", baseline.display()),
    ]);
    let out = bin().args(&args).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["completed_seeds"], serde_json::json!([]));
    assert_eq!(manifest["failed_seeds"].as_array().unwrap().len(), 2);
}

#[test]
fn bounds_check_passes_and_writes_tightness_csvs() {
    let root = tmp("cli_bounds");
    let out = run_ok(&[
        "bounds-check".into(),
        "--instances".into(),
        "80".into(),
        "--seed".into(),
        "7".into(),
        "--out".into(),
        root.display().to_string(),
    ]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("all bounds hold"));
    for family in ["value_gap", "transfer_bound"] {
        let text = fs::read_to_string(root.join(format!("{family}_tightness.csv"))).unwrap();
        assert!(text.starts_with("epsilon,lhs,bound,slack"));
        assert!(text.lines().count() > 1);
    }
}

#[test]
fn gradcheck_prints_one_line_per_path() {
    let out = run_ok(&["gradcheck".into(), "--seed".into(), "3".into()]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.contains("ok")).count(), 4);
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn burn_in_sweep_rows_match_requested_values() {
    let root = tmp("cli_sweep");
    let baseline = pretrain_tiny(&root.join("baseline"));
    let sweep_dir = root.join("sweep");
    let mut args = vec!["burn-in-sweep".to_string(), "--cbi".into(), "0,20".into()];
    args.extend(tiny_env_args(&sweep_dir));
    args.extend([
        "--set".into(),
        "seeds=[0]".into(),
        "--set".into(),
        format!("baseline_checkpoint=\"{}\"", baseline.display()),
    ]);
    run_ok(&args);

    let sweep = fs::read_to_string(sweep_dir.join("sweep.csv")).unwrap();
    assert!(sweep.starts_with("cbi,median_dip,mean_dip,final_running_avg_mean"));
    let cbis: Vec<&str> = sweep
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(cbis, ["0", "20"]);
    assert!(sweep_dir.join("cbi_0/manifest.json").is_file());
    assert!(sweep_dir.join("cbi_20/manifest.json").is_file());

    let per_seed = fs::read_to_string(sweep_dir.join("sweep_seeds.csv")).unwrap();
    assert!(per_seed.starts_with("cbi,seed,baseline_eval,min_early_running_avg,dip"));
    assert_eq!(per_seed.lines().count(), 3);

    // The sweep rejects methods that never consult a baseline.
    let out = bin()
        .args([
            "burn-in-sweep",
            "--cbi",
            "0",
            "--set",
            "train.method=sac",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eval_reports_policy_and_random_levels() {
    let root = tmp("cli_eval");
    let baseline = pretrain_tiny(&root.join("baseline"));
    let mut args = vec![
        "eval".to_string(),
        "--checkpoint".into(),
        baseline.display().to_string(),
    ];
    args.extend(tiny_env_args(&root.join("unused")));
    args.extend([
        "--set".into(),
        "train.method=sac".into(),
        "--set".into(),
        "seeds=[0]".into(),
    ]);
    let out = run_ok(&args);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("policy"), "stdout: {stdout}");
    assert!(stdout.contains("random"), "stdout: {stdout}");
}
