//! `msstarch`: simulate, build weights, fit, smooth and run Monte Carlo studies.
//!
//! Exit codes: 0 on success, 1 for usage and validation errors, 2 for
//! numerical failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use msstarch::estimation::{fit_one_regime, fit_two_regime, FitOptions};
use msstarch::filter::{hamilton_filter, kim_smooth};
use msstarch::io;
use msstarch::logarch::{fit_log_arch, piccolo_matrix};
use msstarch::model::{
    log_square, stationary_dist, LogSquaredPanel, ModelParams, RegimeParams, RegimePath, ZeroPolicy,
};
use msstarch::montecarlo::{self, StudyConfig};
use msstarch::simulate::{simulate, DEFAULT_BURN_IN};
use msstarch::weights::{build_queen_grid, knn_weights, row_normalize, Construction, WeightMatrix};
use msstarch::{EstimationResult, Error};

#[derive(Parser)]
#[command(name = "msstarch", version, about = "Markov-switching spatio-temporal log-ARCH toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Directory for output files (created if missing).
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Overwrite existing output files.
    #[arg(long)]
    force: bool,
    /// JSON file with option values; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a panel from the two-regime model.
    Simulate(SimulateCmd),
    /// Build a k-nearest-neighbour weight matrix from univariate log-ARCH fits.
    BuildWeights(BuildWeightsCmd),
    /// Estimate the one-regime and/or two-regime model.
    Fit(FitCmd),
    /// Filtered and smoothed regime probabilities for a fitted model.
    Smooth(SmoothCmd),
    /// Run a Monte Carlo study.
    McStudy(McStudyCmd),
}

#[derive(Args)]
struct SimulateCmd {
    #[command(flatten)]
    opts: SimulateOpts,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SimulateOpts {
    /// Queen grid rows.
    #[arg(long)]
    rows: Option<usize>,
    /// Queen grid columns.
    #[arg(long)]
    cols: Option<usize>,
    /// Weight CSV to use instead of a grid.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Number of retained periods.
    #[arg(long = "t")]
    t: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// ModelParams JSON (intercepts on the simulation scale).
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    rho1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    gamma1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    delta1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    mu1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    rho2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    gamma2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    delta2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    mu2: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    /// Also write the grid weights (with metadata) to the output directory.
    #[arg(long)]
    #[serde(skip)]
    write_weights: bool,
}

#[derive(Args)]
struct BuildWeightsCmd {
    #[command(flatten)]
    opts: BuildWeightsOpts,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct BuildWeightsOpts {
    /// Returns panel CSV (or prices with --prices).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Treat the input as prices and convert to log-returns.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    prices: Option<bool>,
    /// Number of neighbours.
    #[arg(long)]
    k: Option<usize>,
    /// Order of the univariate log-ARCH fits.
    #[arg(long)]
    order: Option<usize>,
    /// Also write the Piccolo distance matrix.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    write_distances: Option<bool>,
    /// Output weight file name inside the output directory.
    #[arg(long)]
    output: Option<String>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Mode {
    One,
    Two,
    Both,
}

#[derive(Args)]
struct FitCmd {
    #[command(flatten)]
    opts: FitOpts,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FitOpts {
    /// Panel CSV of observations.
    #[arg(long)]
    panel: Option<PathBuf>,
    /// Weight CSV.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// The panel holds prices; convert to log-returns first.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    prices: Option<bool>,
    /// The panel already holds log-squared values.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    log_squared: Option<bool>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_starts: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Skip standard errors.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    no_std_errors: Option<bool>,
}

#[derive(Args)]
struct SmoothCmd {
    #[command(flatten)]
    opts: SmoothOpts,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SmoothOpts {
    /// Panel CSV of observations.
    #[arg(long)]
    panel: Option<PathBuf>,
    /// Weight CSV.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// The panel holds prices; convert to log-returns first.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    prices: Option<bool>,
    /// The panel already holds log-squared values.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    log_squared: Option<bool>,
    /// EstimationResult JSON written by `fit`.
    #[arg(long)]
    estimate: Option<PathBuf>,
}

#[derive(Args)]
struct McStudyCmd {
    /// Use the desk-scale preset (30 replications per cell).
    #[arg(long)]
    desk: bool,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    common: Common,
}

/// Error with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { code: if e.is_numerical() { 2 } else { 1 }, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 1, message: message.into() }
}

type CmdResult = std::result::Result<(), Failure>;

/// Overlays explicitly given flags onto the config file, then deserializes.
///
/// The config may hold the options at its top level or under a key named
/// after the subcommand.
fn merge<T: Serialize + DeserializeOwned>(flags: &T, config: Option<&Path>, section: &str) -> std::result::Result<T, Failure> {
    let Some(path) = config else {
        return Ok(serde_json::from_value(serde_json::to_value(flags).map_err(Error::from)?).map_err(Error::from)?);
    };
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let mut base: Value =
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    if let Some(sec) = base.get(section).cloned() {
        base = sec;
    }
    let Value::Object(mut map) = base else {
        return Err(usage(format!("{}: expected a JSON object", path.display())));
    };
    if let Value::Object(over) = serde_json::to_value(flags).map_err(Error::from)? {
        for (k, v) in over {
            if !v.is_null() {
                map.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(map)).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Creates the output directory and refuses to clobber files without `--force`.
fn prepare_outputs(common: &Common, names: &[&str]) -> std::result::Result<Vec<PathBuf>, Failure> {
    std::fs::create_dir_all(&common.out_dir)
        .map_err(|e| usage(format!("cannot create {}: {e}", common.out_dir.display())))?;
    let paths: Vec<PathBuf> = names.iter().map(|n| common.out_dir.join(n)).collect();
    if !common.force {
        if let Some(p) = paths.iter().find(|p| p.exists()) {
            return Err(usage(format!("{} exists; pass --force to overwrite", p.display())));
        }
    }
    Ok(paths)
}

fn required<T>(v: Option<T>, flag: &str) -> std::result::Result<T, Failure> {
    v.ok_or_else(|| usage(format!("missing required option --{flag}")))
}

fn cmd_simulate(cmd: SimulateCmd) -> CmdResult {
    let o: SimulateOpts = merge(&cmd.opts, cmd.common.config.as_deref(), "simulate")?;
    let t = required(o.t, "t")?;
    let seed = o.seed.unwrap_or(0);
    let burn_in = o.burn_in.unwrap_or(DEFAULT_BURN_IN);

    let mut params = match &o.params {
        Some(p) => io::read_json::<ModelParams>(p)?,
        None => ModelParams::reference_dgp(),
    };
    let slot = |r: &mut RegimeParams, rho: Option<f64>, gamma: Option<f64>, delta: Option<f64>, mu: Option<f64>| {
        r.rho = rho.unwrap_or(r.rho);
        r.gamma = gamma.unwrap_or(r.gamma);
        r.delta = delta.unwrap_or(r.delta);
        r.phi = mu.unwrap_or(r.phi);
    };
    slot(&mut params.regimes[0], o.rho1, o.gamma1, o.delta1, o.mu1);
    slot(&mut params.regimes[1], o.rho2, o.gamma2, o.delta2, o.mu2);
    params.transition.p = o.p.unwrap_or(params.transition.p);
    params.transition.q = o.q.unwrap_or(params.transition.q);
    params.validate()?;

    let (w, construction) = match (&o.weights, o.rows, o.cols) {
        (Some(path), None, None) => (io::read_weights(path)?, None),
        (None, Some(r), Some(c)) => (
            row_normalize(&build_queen_grid(r, c)?).matrix,
            Some(Construction::QueenGrid { rows: r, cols: c }),
        ),
        _ => return Err(usage("give either --rows and --cols, or --weights")),
    };
    let mut names = vec!["panel.csv", "log_squared.csv", "regimes.csv"];
    if cmd.opts.write_weights {
        names.extend(["weights.csv", "weights.meta.json"]);
    }
    let paths = prepare_outputs(&cmd.common, &names)?;

    let sim = simulate(&params, &w, t, burn_in, seed)?;
    io::write_panel_csv(&paths[0], &sim.panel)?;
    io::write_log_squared_csv(&paths[1], &sim.log_squared)?;
    io::write_regime_path(&paths[2], sim.panel.time_ids(), &sim.regimes)?;
    if cmd.opts.write_weights {
        let c = construction.unwrap_or(Construction::External);
        io::write_weights(&paths[3], &w, c)?;
    }
    println!("simulated n={} T={t} seed={seed} -> {}", w.n(), cmd.common.out_dir.display());
    Ok(())
}

fn cmd_build_weights(cmd: BuildWeightsCmd) -> CmdResult {
    let o: BuildWeightsOpts = merge(&cmd.opts, cmd.common.config.as_deref(), "build_weights")?;
    let input = required(o.input, "input")?;
    let k = required(o.k, "k")?;
    let order = o.order.unwrap_or(1);
    let file = o.output.unwrap_or_else(|| "weights.csv".to_string());
    let meta = io::meta_path(Path::new(&file)).to_string_lossy().into_owned();
    let mut names = vec![file.as_str(), meta.as_str(), "logarch_fits.json"];
    if o.write_distances.unwrap_or(false) {
        names.push("distances.csv");
    }
    let paths = prepare_outputs(&cmd.common, &names)?;

    let mut panel = io::read_panel_csv(&input)?;
    if o.prices.unwrap_or(false) {
        panel = panel.log_returns()?;
    }
    let n = panel.n();
    if k == 0 || k >= n {
        return Err(usage(format!("--k must be in 1..={} for {n} series, got {k}", n.saturating_sub(1))));
    }
    let policy = ZeroPolicy::default();
    let zeros: Vec<usize> = (0..n).map(|i| policy.log_square_series(&panel.series(i)).1).collect();
    let total_zeros: usize = zeros.iter().sum();
    if total_zeros == 0 {
        println!("zero policy: not engaged");
    } else {
        println!("zero policy: {total_zeros} zero observations floored");
        for (id, z) in panel.location_ids().iter().zip(&zeros).filter(|(_, &z)| z > 0) {
            println!("  {id}: {z} of {}", panel.t());
        }
    }
    let fits = (0..n)
        .map(|i| fit_log_arch(panel.location_ids()[i].clone(), &panel.series(i), order, policy))
        .collect::<msstarch::Result<Vec<_>>>()?;
    let d = piccolo_matrix(&fits)?;
    let w = knn_weights(&d, k)?;
    io::write_weights(&paths[0], &w, Construction::KNearest { k, order: Some(order) })?;
    io::write_json(&paths[2], &fits)?;
    if o.write_distances.unwrap_or(false) {
        io::write_distances(&paths[3], &d)?;
    }
    println!("weights: n={n} k={k} order={order} -> {}", paths[0].display());
    Ok(())
}

fn load_data(
    panel: &Option<PathBuf>,
    weights: &Option<PathBuf>,
    prices: Option<bool>,
    log_squared: Option<bool>,
) -> std::result::Result<(LogSquaredPanel, WeightMatrix), Failure> {
    let panel_path = required(panel.clone(), "panel")?;
    let w = io::read_weights(required(weights.clone(), "weights")?)?;
    let y = if log_squared.unwrap_or(false) {
        io::read_log_squared_csv(&panel_path)?
    } else {
        let mut p = io::read_panel_csv(&panel_path)?;
        if prices.unwrap_or(false) {
            p = p.log_returns()?;
        }
        let y = log_square(&p, ZeroPolicy::default());
        if y.zero_replacements() > 0 {
            println!("zero policy: {} zero observations floored", y.zero_replacements());
        }
        y
    };
    if y.n() != w.n() {
        return Err(usage(format!(
            "panel has {} locations but weights are {}x{}",
            y.n(),
            w.n(),
            w.n()
        )));
    }
    Ok((y, w))
}

fn cmd_fit(cmd: FitCmd) -> CmdResult {
    let o: FitOpts = merge(&cmd.opts, cmd.common.config.as_deref(), "fit")?;
    let mode = o.mode.unwrap_or(Mode::Two);
    let (y, w) = load_data(&o.panel, &o.weights, o.prices, o.log_squared)?;
    let mut options = FitOptions::default();
    options.seed = o.seed.unwrap_or(options.seed);
    options.n_starts = o.n_starts.unwrap_or(options.n_starts);
    options.max_iter = o.max_iter.unwrap_or(options.max_iter);
    options.compute_std_errors = !o.no_std_errors.unwrap_or(false);
    options.validate()?;

    let names: &[&str] = match mode {
        Mode::One => &["fit_one_regime.json"],
        Mode::Two => &["fit_two_regime.json"],
        Mode::Both => &["fit_one_regime.json", "fit_two_regime.json"],
    };
    let paths = prepare_outputs(&cmd.common, names)?;
    let mut results: Vec<EstimationResult> = Vec::new();
    if mode != Mode::Two {
        results.push(fit_one_regime(&y, &w, &options)?);
    }
    if mode != Mode::One {
        results.push(fit_two_regime(&y, &w, &options)?);
    }
    for (r, path) in results.iter().zip(&paths) {
        io::write_json(path, r)?;
        println!(
            "{:?}: loglik={:.4} bic={:.4} converged={} -> {}",
            r.kind,
            r.loglik,
            r.bic,
            r.converged,
            path.display()
        );
    }
    if let [one, two] = results.as_slice() {
        let preferred = if two.bic < one.bic { "two-regime" } else { "one-regime" };
        println!("BIC one-regime={:.4} two-regime={:.4} preferred={preferred}", one.bic, two.bic);
    }
    if results.iter().any(|r| !r.converged) {
        return Err(Failure { code: 2, message: "optimizer did not converge".into() });
    }
    Ok(())
}

fn cmd_smooth(cmd: SmoothCmd) -> CmdResult {
    let o: SmoothOpts = merge(&cmd.opts, cmd.common.config.as_deref(), "smooth")?;
    let est_path = required(o.estimate.clone(), "estimate")?;
    if !est_path.exists() {
        return Err(usage(format!("estimate file {} not found", est_path.display())));
    }
    let est: EstimationResult = io::read_json(&est_path)?;
    let (y, w) = load_data(&o.panel, &o.weights, o.prices, o.log_squared)?;
    let paths = prepare_outputs(&cmd.common, &["smoothed.csv", "smoothed_regimes.csv"])?;
    let init = stationary_dist(&est.params.transition).unwrap_or([0.5, 0.5]);
    let f = hamilton_filter(&y, &est.params, &w, init)?;
    let s = kim_smooth(&f, &est.params.transition)?;
    io::write_smoothing_csv(&paths[0], y.time_ids(), &f, &s)?;
    io::write_regime_path(&paths[1], y.time_ids(), &s.most_likely)?;
    let share = regime_share(&s.most_likely);
    println!(
        "smoothed T={} loglik={:.4} share in regime 2={share:.3} -> {}",
        y.t(),
        f.loglik,
        paths[0].display()
    );
    Ok(())
}

fn regime_share(path: &RegimePath) -> f64 {
    path.states().iter().filter(|&&s| s == 1).count() as f64 / path.len().max(1) as f64
}

fn cmd_mc_study(cmd: McStudyCmd) -> CmdResult {
    let mut config = match (&cmd.common.config, cmd.desk) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            let mut c: StudyConfig =
                serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            if cmd.desk {
                c.replications = 30;
            }
            c
        }
        (None, true) => StudyConfig::desk(),
        (None, false) => StudyConfig::default(),
    };
    config.replications = cmd.replications.unwrap_or(config.replications);
    config.master_seed = cmd.seed.unwrap_or(config.master_seed);
    config.workers = cmd.workers.or(config.workers);
    config.validate()?;
    let paths = prepare_outputs(&cmd.common, &["study_wide.csv", "study_tidy.csv", "study_records.csv"])?;
    let report = montecarlo::run_study(&config)?;
    montecarlo::write_wide_csv(&paths[0], &report)?;
    montecarlo::write_tidy_csv(&paths[1], &report)?;
    montecarlo::write_records_csv(&paths[2], &report.records)?;
    let failures: usize = report.cells.iter().map(|c| c.failures).sum();
    println!(
        "study: {} cells x {} replications, {failures} failures -> {}",
        report.cells.len(),
        config.replications,
        cmd.common.out_dir.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Simulate(c) => cmd_simulate(c),
        Command::BuildWeights(c) => cmd_build_weights(c),
        Command::Fit(c) => cmd_fit(c),
        Command::Smooth(c) => cmd_smooth(c),
        Command::McStudy(c) => cmd_mc_study(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
