use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use aesam_core::harness::{
    diagnose, emit_diag, emit_reports, lambda_grid, load_checkpoint, noise_robustness_suite,
    prepare_data, random_bound_cases, rho_alpha_grid, run_experiment_with_params, run_stem,
    save_checkpoint, sweep, write_csv_rows, write_json, BoundRow, EmitOutcome, ExperimentConfig,
    RunRecord, SweepCell, LAMBDA_VALUES, NOISE_LEVELS,
};
use aesam_core::models::Mlp;
use aesam_core::optim::Algorithm;

/// Adaptive sharpness-aware minimization experiments.
///
/// Any config key can also be given as a flag, e.g. `--eta 0.05` or `--seeds=0,1,2`;
/// these are applied after the config file and after `--set`.
#[derive(Parser)]
#[command(name = "aesam", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed of one config, write reports and checkpoints.
    Run(Common),
    /// Run an ablation grid.
    Sweep(SweepArgs),
    /// Label-noise robustness suite.
    Noise(NoiseArgs),
    /// Gradient-norm distribution, Q-Q points and variance check at one parameter point.
    Diag(DiagArgs),
    /// Randomized check of the full-batch convergence bound on analytic landscapes.
    CheckBound(BoundArgs),
}

#[derive(Args)]
struct Common {
    /// `key = value` config file; missing keys keep their defaults.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override one key, `key=value`; repeatable.
    #[arg(long = "set", short = 's', value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        for o in &self.overrides {
            c.apply_override(o)?;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Grid {
    /// lambda1 <= lambda2 over `--values`.
    Lambda,
    /// `--rhos` x `--alphas`.
    RhoAlpha,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "lambda")]
    grid: Grid,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = LAMBDA_VALUES)]
    values: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5])]
    rhos: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.3, 0.5, 0.7, 0.9])]
    alphas: Vec<f64>,
}

#[derive(Args)]
struct NoiseArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',', default_values_t = NOISE_LEVELS)]
    levels: Vec<f64>,
    /// Comma-separated algorithm names; defaults to all six.
    #[arg(long, value_delimiter = ',')]
    algorithms: Vec<String>,
}

#[derive(Args)]
struct DiagArgs {
    #[command(flatten)]
    common: Common,
    /// Checkpoint stem (`<stem>.bin` + `<stem>.json`); without it the config is trained first.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Number of sampled batches; the batch size is the config's `batch_size`.
    #[arg(long, default_value_t = 400)]
    batches: usize,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long, default_value_t = 100)]
    cases: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out/bound")]
    out_dir: PathBuf,
}

/// Rewrites `--<config key> value` and `--<config key>=value` into `--set key=value`.
/// Dashes in the key are read as underscores.
fn expand_key_flags(args: Vec<OsString>) -> Vec<OsString> {
    let is_bound = args.get(1).is_some_and(|a| a == "check-bound");
    let mut out = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let text = arg.to_string_lossy().into_owned();
        let Some(flag) = text.strip_prefix("--").filter(|_| !is_bound) else {
            out.push(arg);
            continue;
        };
        let (name, inline) = match flag.split_once('=') {
            Some((n, v)) => (n.replace('-', "_"), Some(v.to_string())),
            None => (flag.replace('-', "_"), None),
        };
        if !ExperimentConfig::KEYS.contains(&name.as_str()) {
            out.push(arg);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => match it.next() {
                Some(v) => v.to_string_lossy().into_owned(),
                None => {
                    // Leave it for clap to report.
                    out.push(arg);
                    continue;
                }
            },
        };
        out.push("--set".into());
        out.push(format!("{name}={value}").into());
    }
    out
}

fn report_emit(out: &EmitOutcome) -> bool {
    for (path, e) in &out.failures {
        eprintln!("failed to write {}: {e}", path.display());
    }
    out.is_ok()
}

fn push_outcome(out: &mut EmitOutcome, path: PathBuf, r: aesam_core::Result<()>) {
    match r {
        Ok(()) => out.written.push(path),
        Err(e) => out.failures.push((path, e.to_string())),
    }
}

fn print_record(r: &RunRecord) {
    match &r.error {
        Some(e) => println!("{} seed {}: DIVERGED after {} steps: {e}", r.config.algorithm, r.seed, r.completed_steps),
        None => println!(
            "{} seed {}: %SAM {:.2}, train {:.4}, test {:.4}, {:.1}s",
            r.config.algorithm,
            r.seed,
            r.percent_sam,
            r.final_train_accuracy(),
            r.final_test_accuracy(),
            r.wall_clock_secs
        ),
    }
}

fn cmd_run(args: &Common) -> Result<bool> {
    let c = args.load()?;
    let dir = c.out_dir.clone();
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut ok = true;
    let mut records = Vec::new();
    let mut emitted = EmitOutcome::default();
    for (i, &seed) in c.seeds.iter().enumerate() {
        let (record, params, _) = run_experiment_with_params(&c, seed)?;
        print_record(&record);
        ok &= !record.diverged;
        let stem = dir.join(format!("{}_weights", run_stem(i, &record)));
        push_outcome(&mut emitted, stem.with_extension("bin"), save_checkpoint(&stem, &params));
        records.push(record);
    }
    let out = emit_reports(&records, &dir);
    ok &= report_emit(&emitted) && report_emit(&out);
    println!("reports in {}", dir.display());
    Ok(ok)
}

fn cell_row(c: &SweepCell) -> (f64, f64, f64, f64, f64, f64, f64, f64, f64, f64, usize) {
    (
        c.config.lambda1,
        c.config.lambda2,
        c.config.rho,
        c.config.alpha,
        c.percent_sam.mean,
        c.percent_sam.std,
        c.test_accuracy.mean,
        c.test_accuracy.std,
        c.train_accuracy.mean,
        c.validation_accuracy.mean,
        c.failures.len(),
    )
}

const CELL_HEADER: [&str; 11] = [
    "lambda1",
    "lambda2",
    "rho",
    "alpha",
    "percent_sam_mean",
    "percent_sam_std",
    "test_accuracy_mean",
    "test_accuracy_std",
    "train_accuracy_mean",
    "validation_accuracy_mean",
    "failures",
];

fn write_cells(dir: &Path, cells: &[SweepCell], out: &mut EmitOutcome) {
    let rows: Vec<_> = cells.iter().map(cell_row).collect();
    let path = dir.join("cells.csv");
    push_outcome(out, path.clone(), write_csv_rows(&path, &rows, &CELL_HEADER));
    let path = dir.join("cells.json");
    push_outcome(out, path.clone(), write_json(&path, cells.iter().map(cell_summary).collect::<Vec<_>>().as_slice()));
}

fn cell_summary(c: &SweepCell) -> serde_json::Value {
    json!({
        "algorithm": c.config.algorithm.as_str(),
        "lambda1": c.config.lambda1,
        "lambda2": c.config.lambda2,
        "rho": c.config.rho,
        "alpha": c.config.alpha,
        "label_noise": c.config.label_noise,
        "percent_sam": c.percent_sam,
        "test_accuracy": c.test_accuracy,
        "train_accuracy": c.train_accuracy,
        "validation_accuracy": c.validation_accuracy,
        "failures": c.failures,
    })
}

fn finish_cells(dir: &Path, cells: &[SweepCell], mut out: EmitOutcome) -> bool {
    let records: Vec<RunRecord> = cells.iter().flat_map(|c| c.records.clone()).collect();
    let runs = emit_reports(&records, dir.join("runs"));
    out.written.extend(runs.written);
    out.failures.extend(runs.failures);
    let mut ok = report_emit(&out);
    for c in cells {
        for f in &c.failures {
            eprintln!("{} seed {} failed: {}", c.config.algorithm, f.seed, f.message);
            ok = false;
        }
    }
    println!("reports in {}", dir.display());
    ok
}

fn cmd_sweep(args: &SweepArgs) -> Result<bool> {
    let c = args.common.load()?;
    let configs = match args.grid {
        Grid::Lambda => lambda_grid(&c, &args.values),
        Grid::RhoAlpha => rho_alpha_grid(&c, &args.rhos, &args.alphas),
    };
    if configs.is_empty() {
        bail!("the grid is empty");
    }
    let cells = sweep(&configs, None)?;
    for cell in &cells {
        let (l1, l2, rho, alpha, sam, _, test, ..) = cell_row(cell);
        println!("lambda1 {l1:>5} lambda2 {l2:>5} rho {rho:<5} alpha {alpha:<4} %SAM {sam:6.2} test {test:.4}");
    }
    let dir = c.out_dir.clone();
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut out = EmitOutcome::default();
    write_cells(&dir, &cells, &mut out);
    Ok(finish_cells(&dir, &cells, out))
}

fn cmd_noise(args: &NoiseArgs) -> Result<bool> {
    let c = args.common.load()?;
    let algorithms: Vec<Algorithm> = if args.algorithms.is_empty() {
        Algorithm::ALL.to_vec()
    } else {
        args.algorithms.iter().map(|a| a.trim().parse()).collect::<aesam_core::Result<_>>()?
    };
    let cells = noise_robustness_suite(&c, &args.levels, &algorithms)?;
    let rows: Vec<_> = cells
        .iter()
        .map(|n| {
            println!(
                "{:<10} noise {:.1}: median test {:.4}, median train {:.4}",
                n.algorithm.as_str(),
                n.noise,
                n.median_test_accuracy,
                n.median_train_accuracy
            );
            (
                n.algorithm.as_str(),
                n.noise,
                n.median_test_accuracy,
                n.median_train_accuracy,
                n.cell.test_accuracy.mean,
                n.cell.test_accuracy.std,
                n.cell.percent_sam.mean,
                n.cell.failures.len(),
            )
        })
        .collect();
    let dir = c.out_dir.clone();
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut out = EmitOutcome::default();
    let path = dir.join("noise.csv");
    let header = [
        "algorithm",
        "label_noise",
        "median_test_accuracy",
        "median_train_accuracy",
        "test_accuracy_mean",
        "test_accuracy_std",
        "percent_sam_mean",
        "failures",
    ];
    push_outcome(&mut out, path.clone(), write_csv_rows(&path, &rows, &header));
    let summary: Vec<_> = cells
        .iter()
        .map(|n| {
            let mut v = cell_summary(&n.cell);
            v["median_test_accuracy"] = json!(n.median_test_accuracy);
            v["median_train_accuracy"] = json!(n.median_train_accuracy);
            v
        })
        .collect();
    let path = dir.join("noise.json");
    push_outcome(&mut out, path.clone(), write_json(&path, &summary));
    let plain: Vec<SweepCell> = cells.into_iter().map(|n| n.cell).collect();
    Ok(finish_cells(&dir, &plain, out))
}

fn cmd_diag(args: &DiagArgs) -> Result<bool> {
    let c = args.common.load()?;
    let seed = c.seeds[0];
    let data = prepare_data(&c, seed)?;
    let train = &data.splits.train;
    let (mlp, params) = match &args.checkpoint {
        Some(stem) => {
            let mlp = Mlp::new(c.mlp_spec(train.dim(), train.classes()))?;
            let params = load_checkpoint(stem)?;
            if params.shapes() != mlp.init(0).shapes() {
                bail!(
                    "checkpoint shapes {:?} do not match the configured network",
                    params.shapes()
                );
            }
            (mlp, params)
        }
        None => {
            let (record, params, mlp) = run_experiment_with_params(&c, seed)?;
            print_record(&record);
            if record.diverged {
                return Ok(false);
            }
            (mlp, params)
        }
    };
    let report = diagnose(&mlp, &params, train, c.batch_size, args.batches, seed)?;
    let v = &report.variance;
    println!(
        "Q-Q correlation {:.4}; variance {:.6e} vs direct {:.6e} ({:.2} combined SE)",
        report.qq.correlation,
        v.variance,
        v.direct_variance,
        v.gap_in_std_errors()
    );
    let out = emit_diag(&report, &c.out_dir);
    println!("diagnostics in {}", c.out_dir.display());
    Ok(report_emit(&out))
}

fn cmd_check_bound(args: &BoundArgs) -> Result<bool> {
    let cases = random_bound_cases(args.cases, args.seed)?;
    let rows: Vec<BoundRow> = cases.iter().map(BoundRow::from).collect();
    let held = rows.iter().filter(|r| r.satisfied).count();
    for r in rows.iter().filter(|r| !r.satisfied) {
        eprintln!("case {} violated: {:.6e} > {:.6e}", r.case, r.left, r.right);
    }
    println!("{held}/{} cases satisfy the bound", rows.len());
    std::fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    let mut out = EmitOutcome::default();
    let path = args.out_dir.join("bound.csv");
    let header = ["case", "landscape", "dim", "beta", "eta", "rho", "zeta", "steps", "left", "right", "satisfied"];
    push_outcome(&mut out, path.clone(), write_csv_rows(&path, &rows, &header));
    let path = args.out_dir.join("bound.json");
    let summary = json!({ "cases": rows.len(), "satisfied": held, "seed": args.seed });
    push_outcome(&mut out, path.clone(), write_json(&path, &summary));
    Ok(report_emit(&out) && held == rows.len())
}

fn main() -> ExitCode {
    let cli = Cli::parse_from(expand_key_flags(std::env::args_os().collect()));
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Noise(a) => cmd_noise(a),
        Command::Diag(a) => cmd_diag(a),
        Command::CheckBound(a) => cmd_check_bound(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn expand(args: &[&str]) -> Vec<String> {
        expand_key_flags(args.iter().map(OsString::from).collect())
            .into_iter()
            .map(|a| a.into_string().unwrap())
            .collect()
    }

    #[test]
    fn key_flags_become_overrides() {
        assert_eq!(
            expand(&["aesam", "run", "--eta", "0.05", "--batch-size=64", "--config", "x.cfg"]),
            ["aesam", "run", "--set", "eta=0.05", "--set", "batch_size=64", "--config", "x.cfg"]
        );
    }

    #[test]
    fn check_bound_flags_are_left_alone() {
        assert_eq!(
            expand(&["aesam", "check-bound", "--seed", "3", "--out-dir", "o"]),
            ["aesam", "check-bound", "--seed", "3", "--out-dir", "o"]
        );
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
