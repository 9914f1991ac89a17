//! Replicate-simulate-estimate studies.
//!
//! Every `(grid, T)` pair is a cell. Replication `r` of cell `c` simulates
//! with key `derive_seed(master_seed, [c, r, 0])` and fits with start-point
//! key `derive_seed(master_seed, [c, r, 1])`, so any replication can be
//! re-run on its own. Replications may run concurrently; records are kept
//! in index order and reduced sequentially.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{fit_two_regime, flatten, FitOptions, ModelKind};
use crate::model::{ModelParams, MU_EPSILON};
use crate::rng::derive_seed;
use crate::simulate::{simulate, DEFAULT_BURN_IN};
use crate::weights::{build_queen_grid, row_normalize};

/// Reported parameters: the estimated vector on the intercept scale of the
/// fitted model, followed by the two intercepts on the simulation scale.
pub const REPORT_NAMES: [&str; 13] = [
    "rho1", "gamma1", "delta1", "phi1", "rho2", "gamma2", "delta2", "phi2", "p", "q", "sigma2",
    "mu1", "mu2",
];

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

fn default_replications() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    /// Queen grids as `(rows, cols)`.
    pub grid_dims: Vec<(usize, usize)>,
    pub horizons: Vec<usize>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    /// Intercepts on the simulation (`mu`) scale.
    #[serde(default = "ModelParams::reference_dgp")]
    pub true_params: ModelParams,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub fit_options: FitOptions,
    /// Worker threads; `None` uses the global pool.
    #[serde(default)]
    pub workers: Option<usize>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            grid_dims: vec![(6, 6), (7, 7), (10, 10)],
            horizons: vec![200, 300, 500],
            replications: default_replications(),
            true_params: ModelParams::reference_dgp(),
            burn_in: DEFAULT_BURN_IN,
            master_seed: 0,
            fit_options: FitOptions { compute_std_errors: false, ..FitOptions::default() },
            workers: None,
        }
    }
}

impl StudyConfig {
    /// The default study with 30 replications per cell.
    pub fn desk() -> Self {
        Self { replications: 30, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::param("replications", "must be at least 1"));
        }
        if self.grid_dims.is_empty() {
            return Err(Error::param("grid_dims", "must list at least one grid"));
        }
        if self.horizons.is_empty() {
            return Err(Error::param("horizons", "must list at least one T"));
        }
        for &(r, c) in &self.grid_dims {
            if r == 0 || c == 0 || r * c < 2 {
                return Err(Error::param("grid_dims", format!("grid {r}x{c} needs at least 2 cells")));
            }
        }
        if let Some(&t) = self.horizons.iter().find(|&&t| t < 2) {
            return Err(Error::param("horizons", format!("T = {t} is below 2")));
        }
        if self.workers == Some(0) {
            return Err(Error::param("workers", "must be at least 1"));
        }
        self.true_params.validate()?;
        self.fit_options.validate()
    }

    /// Cells in report order: grids outer, horizons inner.
    pub fn cells(&self) -> Vec<Cell> {
        self.grid_dims
            .iter()
            .flat_map(|&(rows, cols)| self.horizons.iter().map(move |&t| Cell { rows, cols, t }))
            .collect()
    }

    /// Truth in [`REPORT_NAMES`] order.
    pub fn truth(&self) -> Vec<f64> {
        report_vector(&self.true_params.to_phi_scale())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub rows: usize,
    pub cols: usize,
    pub t: usize,
}

impl Cell {
    pub fn n(&self) -> usize {
        self.rows * self.cols
    }

    pub fn label(&self) -> String {
        format!("n={} T={}", self.n(), self.t)
    }
}

/// Parameters on the fitted intercept scale, extended by the `mu` intercepts.
fn report_vector(phi_scale: &ModelParams) -> Vec<f64> {
    let mut v = flatten(phi_scale, ModelKind::TwoRegime);
    v.push(phi_scale.regimes[0].phi - MU_EPSILON);
    v.push(phi_scale.regimes[1].phi - MU_EPSILON);
    v
}

/// Puts the regime labels of `estimate` in the orientation closest to `truth`.
///
/// The distance is the sum of squared deviations over `(rho, gamma, delta,
/// phi)` of both regimes. Swapping also exchanges `p` and `q`; ties keep the
/// estimate as it is.
pub fn align_regimes(estimate: &ModelParams, truth: &ModelParams) -> ModelParams {
    let cost = |e: &ModelParams| -> f64 {
        e.regimes
            .iter()
            .zip(&truth.regimes)
            .map(|(a, b)| {
                (a.rho - b.rho).powi(2)
                    + (a.gamma - b.gamma).powi(2)
                    + (a.delta - b.delta).powi(2)
                    + (a.phi - b.phi).powi(2)
            })
            .sum()
    };
    let swapped = estimate.swapped();
    if cost(&swapped) < cost(estimate) {
        swapped
    } else {
        *estimate
    }
}

/// Outcome of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub cell: usize,
    pub replication: usize,
    pub n: usize,
    pub t: usize,
    pub seed: u64,
    pub converged: bool,
    /// Aligned estimates in [`REPORT_NAMES`] order; empty if the fit failed.
    pub estimates: Vec<f64>,
    pub error: Option<String>,
}

impl ReplicationRecord {
    fn usable(&self) -> bool {
        self.converged && self.estimates.len() == REPORT_NAMES.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub truth: f64,
    /// NaN when no replication of the cell converged.
    pub mean: f64,
    pub rmse: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub cell: Cell,
    pub replications: usize,
    pub failures: usize,
    pub params: Vec<ParamSummary>,
}

impl CellReport {
    pub fn param(&self, name: &str) -> Option<&ParamSummary> {
        self.params.iter().find(|p| p.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub cells: Vec<CellReport>,
    pub records: Vec<ReplicationRecord>,
}

impl StudyReport {
    pub fn cell(&self, n: usize, t: usize) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.cell.n() == n && c.cell.t == t)
    }
}

fn run_replication(config: &StudyConfig, cell_index: usize, cell: Cell, rep: usize) -> ReplicationRecord {
    let seed = derive_seed(config.master_seed, &[cell_index as u64, rep as u64, 0]);
    let fit_seed = derive_seed(config.master_seed, &[cell_index as u64, rep as u64, 1]);
    let mut record = ReplicationRecord {
        cell: cell_index,
        replication: rep,
        n: cell.n(),
        t: cell.t,
        seed,
        converged: false,
        estimates: Vec::new(),
        error: None,
    };
    let outcome = (|| -> Result<(bool, ModelParams)> {
        let w = row_normalize(&build_queen_grid(cell.rows, cell.cols)?).matrix;
        let sim = simulate(&config.true_params, &w, cell.t, config.burn_in, seed)?;
        let options = FitOptions { seed: fit_seed, ..config.fit_options };
        let fit = fit_two_regime(&sim.log_squared, &w, &options)?;
        Ok((fit.converged, fit.params))
    })();
    match outcome {
        Ok((converged, params)) => {
            let aligned = align_regimes(&params, &config.true_params.to_phi_scale());
            record.converged = converged;
            record.estimates = report_vector(&aligned);
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record
}

/// Reduces the records of one cell, in the order given.
pub fn summarize(cell: Cell, truth: &[f64], records: &[&ReplicationRecord]) -> CellReport {
    let usable: Vec<&&ReplicationRecord> = records.iter().filter(|r| r.usable()).collect();
    let count = usable.len();
    let params = REPORT_NAMES
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let (mean, rmse) = if count == 0 {
                (f64::NAN, f64::NAN)
            } else {
                let mut sum = 0.0;
                let mut sq = 0.0;
                for r in &usable {
                    sum += r.estimates[k];
                    sq += (r.estimates[k] - truth[k]).powi(2);
                }
                (sum / count as f64, (sq / count as f64).sqrt())
            };
            ParamSummary { name: name.to_string(), truth: truth[k], mean, rmse, count }
        })
        .collect();
    CellReport { cell, replications: records.len(), failures: records.len() - count, params }
}

/// Reduces a full set of records in cell and replication order.
pub fn summarize_records(config: &StudyConfig, records: &[ReplicationRecord]) -> Vec<CellReport> {
    let truth = config.truth();
    config
        .cells()
        .into_iter()
        .enumerate()
        .map(|(c, cell)| {
            let mut mine: Vec<&ReplicationRecord> = records.iter().filter(|r| r.cell == c).collect();
            mine.sort_by_key(|r| r.replication);
            summarize(cell, &truth, &mine)
        })
        .collect()
}

pub fn run_study(config: &StudyConfig) -> Result<StudyReport> {
    use rayon::prelude::*;
    config.validate()?;
    let cells = config.cells();
    let jobs: Vec<(usize, Cell, usize)> = cells
        .iter()
        .enumerate()
        .flat_map(|(c, &cell)| (0..config.replications).map(move |r| (c, cell, r)))
        .collect();
    let work = || -> Vec<ReplicationRecord> {
        jobs.par_iter().map(|&(c, cell, r)| run_replication(config, c, cell, r)).collect()
    };
    let records = match config.workers {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::param("workers", e.to_string()))?
            .install(work),
        None => work(),
    };
    Ok(StudyReport { cells: summarize_records(config, &records), records })
}

fn fmt3(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.3}")
    } else {
        "NA".to_string()
    }
}

/// Rows are parameters, columns are cells, entries read `mean(rmse)`.
pub fn write_wide_csv(path: impl AsRef<Path>, report: &StudyReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    let mut header = vec!["parameter".to_string(), "true".to_string()];
    header.extend(report.cells.iter().map(|c| c.cell.label()));
    w.write_record(&header)?;
    for (k, name) in REPORT_NAMES.iter().enumerate() {
        let truth = report.cells.first().map_or(f64::NAN, |c| c.params[k].truth);
        let mut rec = vec![name.to_string(), fmt3(truth)];
        for c in &report.cells {
            let p = &c.params[k];
            rec.push(format!("{}({})", fmt3(p.mean), fmt3(p.rmse)));
        }
        w.write_record(&rec)?;
    }
    let mut fails = vec!["failures".to_string(), String::new()];
    fails.extend(report.cells.iter().map(|c| format!("{}/{}", c.failures, c.replications)));
    w.write_record(&fails)?;
    w.flush()?;
    Ok(())
}

/// One row per parameter and cell.
pub fn write_tidy_csv(path: impl AsRef<Path>, report: &StudyReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record([
        "rows", "cols", "n", "T", "parameter", "truth", "mean", "rmse", "count", "failures",
    ])?;
    for c in &report.cells {
        for p in &c.params {
            w.write_record([
                c.cell.rows.to_string(),
                c.cell.cols.to_string(),
                c.cell.n().to_string(),
                c.cell.t.to_string(),
                p.name.clone(),
                format!("{:?}", p.truth),
                format!("{:?}", p.mean),
                format!("{:?}", p.rmse),
                p.count.to_string(),
                c.failures.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Per-replication estimates, enough to recompute every moment.
pub fn write_records_csv(path: impl AsRef<Path>, records: &[ReplicationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    let mut header: Vec<String> =
        ["cell", "replication", "n", "T", "seed", "converged", "error"].map(String::from).to_vec();
    header.extend(REPORT_NAMES.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for r in records {
        let mut rec = vec![
            r.cell.to_string(),
            r.replication.to_string(),
            r.n.to_string(),
            r.t.to_string(),
            r.seed.to_string(),
            r.converged.to_string(),
            r.error.clone().unwrap_or_default(),
        ];
        if r.estimates.is_empty() {
            rec.extend(std::iter::repeat_n(String::new(), REPORT_NAMES.len()));
        } else {
            rec.extend(r.estimates.iter().map(|v| format!("{v:?}")));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv(path: impl AsRef<Path>) -> Result<Vec<ReplicationRecord>> {
    let mut r = csv::Reader::from_path(path.as_ref())?;
    let bad = |what: &str, s: &str| Error::Parse(format!("records: bad {what} `{s}`"));
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let int = |k: usize, what: &str| rec[k].parse::<u64>().map_err(|_| bad(what, &rec[k]));
        let estimates = if rec[7].is_empty() {
            Vec::new()
        } else {
            (7..7 + REPORT_NAMES.len())
                .map(|k| rec[k].parse::<f64>().map_err(|_| bad(REPORT_NAMES[k - 7], &rec[k])))
                .collect::<Result<Vec<f64>>>()?
        };
        out.push(ReplicationRecord {
            cell: int(0, "cell")? as usize,
            replication: int(1, "replication")? as usize,
            n: int(2, "n")? as usize,
            t: int(3, "T")? as usize,
            seed: int(4, "seed")?,
            converged: rec[5].parse().map_err(|_| bad("converged", &rec[5]))?,
            error: (!rec[6].is_empty()).then(|| rec[6].to_string()),
            estimates,
        });
    }
    Ok(out)
}
