//! Quasi-maximum-likelihood estimation.
//!
//! The likelihood is maximized over an unconstrained vector. Effects map to
//! `(-1, 1)` and transition probabilities to `(0, 1)` through the bounded
//! logistic `x = a + (b - a) / (1 + exp(-x'))`, the variance through
//! `x = exp(x')`, and intercepts are left free. `rho + delta < 1` is enforced
//! by a penalty on the objective.
//!
//! Each start point runs Nelder-Mead followed by BFGS; the best converged
//! optimum wins, ties going to the lower start index.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::LikelihoodEvaluator;
use crate::model::{LogSquaredPanel, ModelParams, RegimeParams, TransitionMatrix, LOG_CHI2_VARIANCE};
use crate::optim::{self, BfgsOptions, NelderMeadOptions};
use crate::rng::{derive_seed, rng_from_seed};
use crate::weights::WeightMatrix;
use rand::Rng;

/// Parameter names of the two-regime model in vector order.
pub const TWO_REGIME_NAMES: [&str; 11] = [
    "rho1", "gamma1", "delta1", "phi1", "rho2", "gamma2", "delta2", "phi2", "p", "q", "sigma2",
];

/// Parameter names of the one-regime model in vector order.
pub const ONE_REGIME_NAMES: [&str; 5] = ["rho", "gamma", "delta", "phi", "sigma2"];

/// `rho + delta` must stay below `1 - PENALTY_MARGIN`.
const PENALTY_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    OneRegime,
    TwoRegime,
}

impl ModelKind {
    pub fn n_params(self) -> usize {
        self.names().len()
    }

    pub fn names(self) -> &'static [&'static str] {
        match self {
            ModelKind::OneRegime => &ONE_REGIME_NAMES,
            ModelKind::TwoRegime => &TWO_REGIME_NAMES,
        }
    }
}

fn logistic(x: f64, a: f64, b: f64) -> f64 {
    a + (b - a) / (1.0 + (-x).exp())
}

fn logit(v: f64, a: f64, b: f64) -> f64 {
    ((v - a) / (b - v)).ln()
}

/// Parameters on the unconstrained optimization scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub kind: ModelKind,
    pub values: Vec<f64>,
}

fn regime_to_unconstrained(r: &RegimeParams) -> [f64; 4] {
    [
        logit(r.rho, -1.0, 1.0),
        logit(r.gamma, -1.0, 1.0),
        logit(r.delta, -1.0, 1.0),
        r.phi,
    ]
}

fn regime_from_unconstrained(v: &[f64]) -> RegimeParams {
    RegimeParams {
        rho: logistic(v[0], -1.0, 1.0),
        gamma: logistic(v[1], -1.0, 1.0),
        delta: logistic(v[2], -1.0, 1.0),
        phi: v[3],
    }
}

impl ParamVector {
    /// Maps constrained parameters to the optimization scale. One-regime
    /// vectors take regime 1 and ignore the transition.
    pub fn to_unconstrained(m: &ModelParams, kind: ModelKind) -> Result<Self> {
        m.regimes[0].validate("1")?;
        if !(m.sigma2 > 0.0) {
            return Err(Error::param("sigma2", "must be positive"));
        }
        let mut values = regime_to_unconstrained(&m.regimes[0]).to_vec();
        if kind == ModelKind::TwoRegime {
            m.regimes[1].validate("2")?;
            for (name, v) in [("p", m.transition.p), ("q", m.transition.q)] {
                if !(v > 0.0 && v < 1.0) {
                    return Err(Error::param(name, format!("must lie in (0, 1), got {v}")));
                }
            }
            values.extend(regime_to_unconstrained(&m.regimes[1]));
            values.push(logit(m.transition.p, 0.0, 1.0));
            values.push(logit(m.transition.q, 0.0, 1.0));
        }
        values.push(m.sigma2.ln());
        Ok(Self { kind, values })
    }

    /// Inverse of [`ParamVector::to_unconstrained`]. Total on all finite
    /// inputs; one-regime vectors yield tied regimes with `p = q = 0.5`.
    pub fn to_constrained(&self) -> ModelParams {
        let v = &self.values;
        match self.kind {
            ModelKind::OneRegime => ModelParams::tied(regime_from_unconstrained(&v[0..4]), v[4].exp()),
            ModelKind::TwoRegime => ModelParams {
                regimes: [regime_from_unconstrained(&v[0..4]), regime_from_unconstrained(&v[4..8])],
                transition: TransitionMatrix {
                    p: logistic(v[8], 0.0, 1.0),
                    q: logistic(v[9], 0.0, 1.0),
                },
                sigma2: v[10].exp(),
            },
        }
    }
}

/// Constrained parameters in name order.
pub fn flatten(m: &ModelParams, kind: ModelKind) -> Vec<f64> {
    let r = &m.regimes;
    match kind {
        ModelKind::OneRegime => vec![r[0].rho, r[0].gamma, r[0].delta, r[0].phi, m.sigma2],
        ModelKind::TwoRegime => vec![
            r[0].rho, r[0].gamma, r[0].delta, r[0].phi, r[1].rho, r[1].gamma, r[1].delta, r[1].phi,
            m.transition.p, m.transition.q, m.sigma2,
        ],
    }
}

/// Inverse of [`flatten`]; no validation.
pub fn unflatten(v: &[f64], kind: ModelKind) -> ModelParams {
    match kind {
        ModelKind::OneRegime => ModelParams::tied(RegimeParams::new(v[0], v[1], v[2], v[3]), v[4]),
        ModelKind::TwoRegime => ModelParams {
            regimes: [
                RegimeParams::new(v[0], v[1], v[2], v[3]),
                RegimeParams::new(v[4], v[5], v[6], v[7]),
            ],
            transition: TransitionMatrix { p: v[8], q: v[9] },
            sigma2: v[10],
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub n_starts: usize,
    pub seed: u64,
    /// Iteration cap per start, shared between the two stages.
    pub max_iter: usize,
    pub nelder_mead_iter: usize,
    /// Relative objective change regarded as converged.
    pub f_tol: f64,
    pub penalty_weight: f64,
    pub compute_std_errors: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            n_starts: 5,
            seed: 0,
            max_iter: 2000,
            nelder_mead_iter: 600,
            f_tol: 1e-8,
            penalty_weight: 1e8,
            compute_std_errors: true,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if self.n_starts == 0 {
            return Err(Error::param("n_starts", "must be at least 1"));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter", "must be at least 1"));
        }
        if !(self.f_tol > 0.0) {
            return Err(Error::param("f_tol", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub kind: ModelKind,
    /// Constrained estimates. One-regime fits carry tied regimes and
    /// `p = q = 0.5`.
    pub params: ModelParams,
    pub names: Vec<String>,
    pub estimates: Vec<f64>,
    /// `None` when the Hessian at the optimum is not positive definite.
    pub std_errors: Option<Vec<f64>>,
    /// Two-sided normal p-values of `estimate / std_error`.
    pub p_values: Option<Vec<f64>>,
    pub loglik: f64,
    pub bic: f64,
    pub n_params: usize,
    pub n_obs: usize,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub start_points_tried: usize,
    pub options: FitOptions,
}

impl EstimationResult {
    /// Significance marker as printed in estimate tables.
    pub fn stars(&self) -> Option<Vec<&'static str>> {
        self.p_values.as_ref().map(|ps| ps.iter().map(|&p| significance_stars(p)).collect())
    }
}

pub fn significance_stars(p: f64) -> &'static str {
    match p {
        p if p < 0.001 => "***",
        p if p < 0.01 => "**",
        p if p < 0.05 => "*",
        p if p < 0.1 => ".",
        _ => "",
    }
}

/// `n_params ln(n_obs) - 2 loglik`.
pub fn bic(loglik: f64, n_params: usize, n_obs: usize) -> f64 {
    bic_real(loglik, n_params, n_obs.max(1) as f64)
}

fn bic_real(loglik: f64, n_params: usize, n_obs: f64) -> f64 {
    n_params as f64 * n_obs.ln() - 2.0 * loglik
}

struct Objective<'a> {
    eval: &'a LikelihoodEvaluator,
    kind: ModelKind,
    penalty_weight: f64,
}

impl Objective<'_> {
    fn penalty(&self, m: &ModelParams) -> f64 {
        let regimes = match self.kind {
            ModelKind::OneRegime => &m.regimes[..1],
            ModelKind::TwoRegime => &m.regimes[..],
        };
        regimes
            .iter()
            .map(|r| {
                let excess = r.rho + r.delta - (1.0 - PENALTY_MARGIN);
                if excess > 0.0 {
                    self.penalty_weight * excess * excess
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// Negative penalized log-likelihood on the unconstrained scale.
    fn value(&self, x: &[f64]) -> f64 {
        if x.iter().any(|v| !v.is_finite()) {
            return f64::INFINITY;
        }
        let m = ParamVector {
            kind: self.kind,
            values: x.to_vec(),
        }
        .to_constrained();
        match self.eval.loglik(&m) {
            Ok(ll) if ll.is_finite() => -ll + self.penalty(&m),
            _ => f64::INFINITY,
        }
    }
}

fn data_mean(panel: &LogSquaredPanel) -> f64 {
    let total: f64 = panel.rows().iter().flatten().sum();
    total / (panel.n() * panel.t()) as f64
}

/// Start points on the constrained scale: one neutral, the rest jittered.
fn start_points(panel: &LogSquaredPanel, kind: ModelKind, opts: &FitOptions) -> Vec<ModelParams> {
    let mean = data_mean(panel);
    let neutral_regime = RegimeParams::new(0.1, 0.1, 0.1, mean * 0.7);
    let neutral = ModelParams {
        regimes: [neutral_regime, neutral_regime],
        transition: TransitionMatrix { p: 0.9, q: 0.9 },
        sigma2: LOG_CHI2_VARIANCE,
    };
    let mut starts = vec![neutral];
    for k in 1..opts.n_starts {
        let mut rng = rng_from_seed(derive_seed(opts.seed, &[k as u64]));
        let mut regime = || loop {
            let rho = rng.random_range(-0.9..0.9);
            let gamma = rng.random_range(-0.9..0.9);
            let delta = rng.random_range(-0.9..0.9);
            if rho + delta < 0.9 {
                let phi = mean * (1.0 - rho - gamma - delta) + rng.random_range(-1.0..1.0);
                break RegimeParams::new(rho, gamma, delta, phi);
            }
        };
        let r1 = regime();
        let r2 = regime();
        let p = rng.random_range(0.5..0.99);
        let q = rng.random_range(0.5..0.99);
        let sigma2 = LOG_CHI2_VARIANCE * rng.random_range(0.5..2.0);
        starts.push(ModelParams {
            regimes: [r1, r2],
            transition: TransitionMatrix { p, q },
            sigma2,
        });
    }
    if kind == ModelKind::OneRegime {
        for s in &mut starts {
            s.transition = TransitionMatrix { p: 0.5, q: 0.5 };
        }
    }
    starts
}

struct StartOutcome {
    x: Vec<f64>,
    f: f64,
    converged: bool,
    iterations: usize,
    evaluations: usize,
}

fn run_start(obj: &Objective<'_>, start: &ModelParams, opts: &FitOptions) -> Result<StartOutcome> {
    let x0 = ParamVector::to_unconstrained(start, obj.kind)?.values;
    let nm_iter = opts.nelder_mead_iter.min(opts.max_iter);
    let nm = optim::nelder_mead(
        |x| obj.value(x),
        &x0,
        &NelderMeadOptions {
            max_iter: nm_iter,
            f_tol: 1e-10,
            x_tol: 1e-8,
            initial_step: 0.5,
        },
    );
    let bfgs = optim::bfgs(
        |x| obj.value(x),
        &nm.x,
        &BfgsOptions {
            max_iter: opts.max_iter.saturating_sub(nm.iterations).max(1),
            f_tol: opts.f_tol,
            g_tol: 1e-4,
            fd_rel_step: 1e-5,
        },
    );
    let (x, f) = if bfgs.f <= nm.f { (bfgs.x, bfgs.f) } else { (nm.x, nm.f) };
    Ok(StartOutcome {
        x,
        f,
        converged: bfgs.converged,
        iterations: nm.iterations + bfgs.iterations,
        evaluations: nm.evaluations + bfgs.evaluations,
    })
}

fn check_inputs(panel: &LogSquaredPanel, w: &WeightMatrix, opts: &FitOptions) -> Result<()> {
    opts.validate()?;
    if !w.is_row_normalized() {
        return Err(Error::param("w", "weight matrix must be row-normalized"));
    }
    if panel.n() != w.n() {
        return Err(Error::DimensionMismatch(format!(
            "panel has {} locations but weights are {}x{}",
            panel.n(),
            w.n(),
            w.n()
        )));
    }
    Ok(())
}

fn fit(panel: &LogSquaredPanel, w: &WeightMatrix, opts: &FitOptions, kind: ModelKind) -> Result<EstimationResult> {
    check_inputs(panel, w, opts)?;
    let eval = LikelihoodEvaluator::new(panel, w)?;
    let obj = Objective {
        eval: &eval,
        kind,
        penalty_weight: opts.penalty_weight,
    };
    let starts = start_points(panel, kind, opts);
    let outcomes: Vec<Result<StartOutcome>> = starts.par_iter().map(|s| run_start(&obj, s, opts)).collect();

    let mut best: Option<StartOutcome> = None;
    let mut iterations = 0;
    let mut evaluations = 0;
    for outcome in outcomes {
        let outcome = outcome?;
        iterations += outcome.iterations;
        evaluations += outcome.evaluations;
        if !outcome.f.is_finite() {
            continue;
        }
        let better = match &best {
            None => true,
            // A converged optimum always beats an unconverged one.
            Some(b) => match (outcome.converged, b.converged) {
                (true, false) => true,
                (false, true) => false,
                _ => outcome.f < b.f,
            },
        };
        if better {
            best = Some(outcome);
        }
    }
    let best = best.ok_or_else(|| Error::Optimization("objective is non-finite at every start point".into()))?;

    let mut params = ParamVector {
        kind,
        values: best.x,
    }
    .to_constrained();
    if kind == ModelKind::TwoRegime && params.regimes[0].gamma > params.regimes[1].gamma {
        params = params.swapped();
    }
    let loglik = eval.loglik(&params)?;
    let n_params = kind.n_params();
    let n_obs = panel.n_obs();
    let mut result = EstimationResult {
        kind,
        params,
        names: kind.names().iter().map(|s| s.to_string()).collect(),
        estimates: flatten(&params, kind),
        std_errors: None,
        p_values: None,
        loglik,
        bic: bic(loglik, n_params, n_obs),
        n_params,
        n_obs,
        converged: best.converged,
        iterations,
        evaluations,
        start_points_tried: starts.len(),
        options: *opts,
    };
    if opts.compute_std_errors && result.converged {
        let se = std_errors_with(&eval, &result);
        result.std_errors = se.std_errors;
        result.p_values = se.p_values;
    }
    Ok(result)
}

/// Fits the two-regime model; regimes are labelled so that
/// `gamma1 <= gamma2`.
pub fn fit_two_regime(panel: &LogSquaredPanel, w: &WeightMatrix, options: &FitOptions) -> Result<EstimationResult> {
    fit(panel, w, options, ModelKind::TwoRegime)
}

/// Fits the single-regime model `(rho, gamma, delta, phi, sigma2)`.
pub fn fit_one_regime(panel: &LogSquaredPanel, w: &WeightMatrix, options: &FitOptions) -> Result<EstimationResult> {
    fit(panel, w, options, ModelKind::OneRegime)
}

/// Standard errors and p-values; both `None` when unreliable.
#[derive(Debug, Clone, PartialEq)]
pub struct StdErrors {
    pub std_errors: Option<Vec<f64>>,
    pub p_values: Option<Vec<f64>>,
}

/// Finite-difference steps on the constrained scale that stay inside the
/// parameter space.
fn hessian_steps(theta: &[f64], kind: ModelKind) -> Vec<f64> {
    theta
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let base = 1e-4 * v.abs().max(1.0);
            let name = kind.names()[i];
            let room = match name {
                "p" | "q" => v.min(1.0 - v),
                "sigma2" => v,
                n if n.starts_with("phi") => f64::INFINITY,
                _ => (1.0 - v.abs()).max(0.0),
            };
            base.min(0.5 * room)
        })
        .collect()
}

/// Square roots of the diagonal of the inverse Hessian of `-loglik` at
/// `theta`, using central differences with `steps`. `None` when that Hessian
/// is not positive definite.
pub fn hessian_std_errors<F>(mut loglik: F, theta: &[f64], steps: &[f64]) -> Option<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut neg = |x: &[f64]| -loglik(x);
    let h = optim::hessian(&mut neg, theta, steps)?;
    let dim = theta.len();
    let m = nalgebra::DMatrix::from_fn(dim, dim, |i, j| h[i][j]);
    let chol = m.cholesky()?;
    let inv = chol.inverse();
    (0..dim)
        .map(|i| {
            let v = inv[(i, i)];
            (v > 0.0 && v.is_finite()).then(|| v.sqrt())
        })
        .collect()
}

fn std_errors_with(eval: &LikelihoodEvaluator, result: &EstimationResult) -> StdErrors {
    let kind = result.kind;
    let theta = flatten(&result.params, kind);
    let steps = hessian_steps(&theta, kind);
    if steps.iter().any(|&s| !(s > 0.0)) {
        return StdErrors {
            std_errors: None,
            p_values: None,
        };
    }
    let se = hessian_std_errors(
        |x| eval.loglik(&unflatten(x, kind)).unwrap_or(f64::NEG_INFINITY),
        &theta,
        &steps,
    );
    let p_values = se.as_ref().map(|se| {
        theta
            .iter()
            .zip(se)
            .map(|(est, s)| statrs::function::erf::erfc((est / s).abs() / std::f64::consts::SQRT_2))
            .collect()
    });
    StdErrors {
        std_errors: se,
        p_values,
    }
}

/// Standard errors of a fitted result on the panel it was fitted to.
pub fn std_errors(result: &EstimationResult, panel: &LogSquaredPanel, w: &WeightMatrix) -> Result<StdErrors> {
    if !result.converged {
        return Err(Error::Optimization("standard errors need a converged fit".into()));
    }
    let eval = LikelihoodEvaluator::new(panel, w)?;
    Ok(std_errors_with(&eval, result))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn logistic_midpoints_and_limits() {
        assert_eq!(logistic(0.0, -1.0, 1.0), 0.0);
        assert_eq!(logistic(0.0, 0.0, 1.0), 0.5);
        assert_eq!(logistic(-1e3, 0.2, 0.7), 0.2);
        assert_eq!(logistic(1e3, 0.2, 0.7), 0.7);
    }

    #[test]
    fn reference_round_trip() {
        let m = ModelParams {
            regimes: [RegimeParams::new(0.2, 0.2, -0.2, 0.1), RegimeParams::new(0.2, 0.8, -0.2, 0.1)],
            transition: TransitionMatrix { p: 0.97, q: 0.93 },
            sigma2: 4.93,
        };
        let v = ParamVector::to_unconstrained(&m, ModelKind::TwoRegime).unwrap();
        assert_eq!(v.values.len(), 11);
        let back = flatten(&v.to_constrained(), ModelKind::TwoRegime);
        for (a, b) in back.iter().zip(flatten(&m, ModelKind::TwoRegime)) {
            assert!((a - b).abs() < 1e-10);
        }
        let one = ParamVector::to_unconstrained(&m, ModelKind::OneRegime).unwrap();
        assert_eq!(one.values.len(), 5);
    }

    #[test]
    fn bic_examples() {
        assert_eq!(bic(0.0, 0, 10), 0.0);
        assert!((bic_real(-3.0, 10, std::f64::consts::E) - 16.0).abs() < 1e-12);
        assert!((bic(-3.0, 11, 36 * 199) - (11.0 * 7164f64.ln() + 6.0)).abs() < 1e-12);
        assert!(bic(-100.0, 5, 1000) < bic(-101.0, 5, 1000));
    }

    #[test]
    fn objective_gradient_is_smooth() {
        use crate::optim::gradient;
        use crate::simulate::simulate;
        use rand::Rng as _;
        use crate::weights::{build_queen_grid, row_normalize};
        let w = row_normalize(&build_queen_grid(4, 4).unwrap()).matrix;
        let sim = simulate(&ModelParams::reference_dgp(), &w, 120, 50, 8).unwrap();
        let eval = LikelihoodEvaluator::new(&sim.log_squared, &w).unwrap();
        let obj = Objective { eval: &eval, kind: ModelKind::TwoRegime, penalty_weight: 1e8 };
        let mut rng = crate::rng::rng_from_seed(4);
        for _ in 0..5 {
            let mut m = ModelParams::reference_dgp().to_phi_scale();
            for r in &mut m.regimes {
                r.rho += rng.random_range(-0.1..0.1);
                r.gamma += rng.random_range(-0.1..0.1);
                r.phi += rng.random_range(-0.5..0.5);
            }
            m.sigma2 = rng.random_range(3.0..7.0);
            let x = ParamVector::to_unconstrained(&m, ModelKind::TwoRegime).unwrap().values;
            let mut f = |v: &[f64]| obj.value(v);
            let g1 = gradient(&mut f, &x, 1e-5).unwrap();
            let g2 = gradient(&mut f, &x, 5e-6).unwrap();
            let scale = g1.iter().fold(1.0f64, |a, v| a.max(v.abs()));
            for (a, b) in g1.iter().zip(&g2) {
                assert!((a - b).abs() <= 1e-3 * scale, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn quadratic_objective_standard_errors() {
        let c = [0.5, 2.0, 3.0];
        let loglik = |x: &[f64]| -0.5 * x.iter().zip(&c).map(|(v, c)| (v / c).powi(2)).sum::<f64>();
        let se = hessian_std_errors(loglik, &[0.1, -0.3, 0.2], &[1e-3, 1e-3, 1e-3]).unwrap();
        for (s, c) in se.iter().zip(&c) {
            assert!((s - c).abs() < 1e-6, "{s} vs {c}");
        }
    }

    #[test]
    fn indefinite_hessian_is_flagged() {
        let saddle = |x: &[f64]| -(x[0] * x[0] - x[1] * x[1]);
        assert!(hessian_std_errors(saddle, &[0.0, 0.0], &[1e-3, 1e-3]).is_none());
    }

    #[test]
    fn stars() {
        assert_eq!(significance_stars(0.0005), "***");
        assert_eq!(significance_stars(0.005), "**");
        assert_eq!(significance_stars(0.03), "*");
        assert_eq!(significance_stars(0.07), ".");
        assert_eq!(significance_stars(0.5), "");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn transform_round_trip(rho in -0.99f64..0.99, gamma in -0.99f64..0.99, delta in -0.99f64..0.99,
                                phi in -10.0f64..10.0, rho2 in -0.99f64..0.99, gamma2 in -0.99f64..0.99,
                                delta2 in -0.99f64..0.99, phi2 in -10.0f64..10.0, p in 0.01f64..0.99,
                                q in 0.01f64..0.99, sigma2 in 0.01f64..50.0) {
            prop_assume!(rho + delta < 1.0 && rho2 + delta2 < 1.0);
            let m = ModelParams {
                regimes: [RegimeParams::new(rho, gamma, delta, phi), RegimeParams::new(rho2, gamma2, delta2, phi2)],
                transition: TransitionMatrix { p, q },
                sigma2,
            };
            let back = ParamVector::to_unconstrained(&m, ModelKind::TwoRegime).unwrap().to_constrained();
            for (a, b) in flatten(&back, ModelKind::TwoRegime).iter().zip(flatten(&m, ModelKind::TwoRegime)) {
                prop_assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
            }
        }
    }
}
