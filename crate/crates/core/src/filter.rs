//! Regime-conditional densities, the Hamilton filter and Kim's smoother.
//!
//! Conditional on `s_t` and `Y*_{t-1}`, the Gaussian quasi-density of `Y*_t`
//! is
//!
//! ```text
//! log f = log |I - rho W| - n/2 log(2 pi sigma2) - U'U / (2 sigma2)
//! U     = (I - rho W) Y*_t - gamma Y*_{t-1} - delta W Y*_{t-1} - phi 1
//! ```
//!
//! The first period only conditions the recursion: the likelihood sums
//! `T - 1` one-step contributions. All recursions run on log probabilities
//! with a log-sum-exp normalizer at every step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{log_det_lu, LogDet};
use crate::model::{stationary_dist, LogSquaredPanel, ModelParams, RegimeParams, RegimePath, TransitionMatrix};
use crate::weights::WeightMatrix;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Tolerance on probability vectors supplied by callers.
pub const PROB_SUM_TOL: f64 = 1e-10;

/// Output of [`hamilton_filter`]. Every matrix has one row per period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterOutput {
    /// `xi_{t|t}`. Row 0 is the initial distribution.
    pub filtered: Vec<[f64; 2]>,
    /// `xi_{t+1|t} = P xi_{t|t}`: row `t` predicts period `t + 1`.
    pub predicted: Vec<[f64; 2]>,
    /// Regime-conditional log densities `log eta_t`. Row 0 holds zeros
    /// because the first period has no lag.
    pub log_densities: Vec<[f64; 2]>,
    /// Per-period log normalizers `log(xi_{t|t-1} . eta_t)`; zero at row 0.
    pub log_normalizers: Vec<f64>,
    pub loglik: f64,
}

impl FilterOutput {
    pub fn len(&self) -> usize {
        self.filtered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filtered.is_empty()
    }
}

/// Output of [`kim_smooth`].
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedPath {
    /// `xi_{t|T}`.
    pub smoothed: Vec<[f64; 2]>,
    /// Per-period argmax of `smoothed`; ties go to regime 1.
    pub most_likely: RegimePath,
}

#[inline]
pub(crate) fn log_sum_exp2(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Residual sum of squares `U'U` for one period and regime.
fn residual_ss(
    y: &[f64],
    wy: &[f64],
    lag: &[f64],
    wlag: &[f64],
    r: &RegimeParams,
) -> f64 {
    y.iter()
        .zip(wy)
        .zip(lag.iter().zip(wlag))
        .map(|((y, wy), (l, wl))| {
            let u = y - r.rho * wy - r.gamma * l - r.delta * wl - r.phi;
            u * u
        })
        .sum()
}

fn gaussian_log_density(log_det: f64, n: usize, sigma2: f64, ss: f64) -> f64 {
    log_det - 0.5 * n as f64 * (LN_2PI + sigma2.ln()) - ss / (2.0 * sigma2)
}

/// `log f(Y*_t | s_t, Y*_{t-1})` for one regime.
pub fn log_cond_density(
    yt: &[f64],
    ytm1: &[f64],
    regime: &RegimeParams,
    sigma2: f64,
    w: &WeightMatrix,
) -> Result<f64> {
    let n = w.n();
    if yt.len() != n || ytm1.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "observation vectors have lengths {} and {}, weights are {n}x{n}",
            yt.len(),
            ytm1.len()
        )));
    }
    if yt.iter().chain(ytm1).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("observation vector".into()));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::param("sigma2", format!("must be positive, got {sigma2}")));
    }
    let (sign, log_det) = log_det_lu(regime.rho, w)?;
    if sign <= 0.0 {
        return Err(Error::SingularSystem { rho: regime.rho });
    }
    let ss = residual_ss(yt, &w.apply(yt), ytm1, &w.apply(ytm1), regime);
    Ok(gaussian_log_density(log_det, n, sigma2, ss))
}

/// Forward recursion over log probabilities.
struct LogRecursion {
    /// `log P[to][from]`.
    log_trans: [[f64; 2]; 2],
    log_pred: [f64; 2],
}

impl LogRecursion {
    fn new(transition: &TransitionMatrix, init: [f64; 2]) -> Self {
        let m = transition.matrix();
        let log_trans = [
            [m[0][0].ln(), m[0][1].ln()],
            [m[1][0].ln(), m[1][1].ln()],
        ];
        let mut rec = Self {
            log_trans,
            log_pred: [0.0; 2],
        };
        rec.log_pred = rec.predict([init[0].ln(), init[1].ln()]);
        rec
    }

    #[inline]
    fn predict(&self, lf: [f64; 2]) -> [f64; 2] {
        let lt = &self.log_trans;
        [
            log_sum_exp2(lt[0][0] + lf[0], lt[0][1] + lf[1]),
            log_sum_exp2(lt[1][0] + lf[0], lt[1][1] + lf[1]),
        ]
    }

    /// Conditions on `eta_t`; returns the log normalizer and log `xi_{t|t}`.
    /// `t` is 0-based and only used in errors.
    #[inline]
    fn step(&mut self, log_eta: [f64; 2], t: usize) -> Result<(f64, [f64; 2])> {
        let a = [self.log_pred[0] + log_eta[0], self.log_pred[1] + log_eta[1]];
        let norm = log_sum_exp2(a[0], a[1]);
        if !norm.is_finite() {
            return Err(Error::DensityUnderflow { t: t + 1 });
        }
        let lf = [a[0] - norm, a[1] - norm];
        self.log_pred = self.predict(lf);
        Ok((norm, lf))
    }
}

fn check_init(init: [f64; 2]) -> Result<()> {
    if init.iter().any(|p| !(0.0..=1.0).contains(p)) || (init[0] + init[1] - 1.0).abs() > PROB_SUM_TOL {
        return Err(Error::param(
            "init",
            format!("must be a probability pair, got ({}, {})", init[0], init[1]),
        ));
    }
    Ok(())
}

fn check_shapes(panel: &LogSquaredPanel, w: &WeightMatrix) -> Result<()> {
    if panel.n() != w.n() {
        return Err(Error::DimensionMismatch(format!(
            "panel has {} locations but weights are {}x{}",
            panel.n(),
            w.n(),
            w.n()
        )));
    }
    if panel.t() < 2 {
        return Err(Error::param("T", format!("at least 2 periods required, got {}", panel.t())));
    }
    Ok(())
}

/// Runs the filter over precomputed log densities (row 0 ignored).
fn filter_from_log_densities(
    log_densities: Vec<[f64; 2]>,
    transition: &TransitionMatrix,
    init: [f64; 2],
) -> Result<FilterOutput> {
    let t_len = log_densities.len();
    let mut rec = LogRecursion::new(transition, init);
    let mut filtered = Vec::with_capacity(t_len);
    let mut predicted = Vec::with_capacity(t_len);
    let mut log_normalizers = Vec::with_capacity(t_len);
    filtered.push(init);
    predicted.push(transition.predict(init));
    log_normalizers.push(0.0);
    let mut loglik = 0.0;
    for (t, &eta) in log_densities.iter().enumerate().skip(1) {
        let (norm, lf) = rec.step(eta, t)?;
        loglik += norm;
        log_normalizers.push(norm);
        let xi = normalized_exp(lf);
        filtered.push(xi);
        predicted.push(transition.predict(xi));
    }
    Ok(FilterOutput {
        filtered,
        predicted,
        log_densities,
        log_normalizers,
        loglik,
    })
}

fn normalized_exp(lf: [f64; 2]) -> [f64; 2] {
    let a = lf[0].exp();
    let b = lf[1].exp();
    let s = a + b;
    [a / s, b / s]
}

/// Hamilton filter from an explicit initial distribution `xi_{1|1}`.
pub fn hamilton_filter(
    panel: &LogSquaredPanel,
    params: &ModelParams,
    w: &WeightMatrix,
    init: [f64; 2],
) -> Result<FilterOutput> {
    check_shapes(panel, w)?;
    check_init(init)?;
    params.validate()?;
    let log_dets = params
        .regimes
        .iter()
        .map(|r| match log_det_lu(r.rho, w)? {
            (s, v) if s > 0.0 => Ok(v),
            _ => Err(Error::SingularSystem { rho: r.rho }),
        })
        .collect::<Result<Vec<f64>>>()?;

    let rows = panel.rows();
    let wy: Vec<Vec<f64>> = rows.iter().map(|r| w.apply(r)).collect();
    let n = panel.n();
    let mut log_densities = vec![[0.0; 2]; panel.t()];
    for t in 1..panel.t() {
        for s in 0..2 {
            let ss = residual_ss(&rows[t], &wy[t], &rows[t - 1], &wy[t - 1], &params.regimes[s]);
            log_densities[t][s] = gaussian_log_density(log_dets[s], n, params.sigma2, ss);
        }
    }
    filter_from_log_densities(log_densities, &params.transition, init)
}

/// Log-likelihood with the chain started from its stationary distribution.
pub fn loglik(params: &ModelParams, panel: &LogSquaredPanel, w: &WeightMatrix) -> Result<f64> {
    let init = stationary_dist(&params.transition)?;
    Ok(hamilton_filter(panel, params, w, init)?.loglik)
}

/// Kim's backward recursion
/// `xi_{t|T} = xi_{t|t} * P' (xi_{t+1|T} / xi_{t+1|t})`.
pub fn kim_smooth(filter_out: &FilterOutput, transition: &TransitionMatrix) -> Result<SmoothedPath> {
    let t_len = filter_out.filtered.len();
    if t_len == 0 || filter_out.predicted.len() != t_len {
        return Err(Error::DimensionMismatch(format!(
            "filter output has {} filtered and {} predicted rows",
            t_len,
            filter_out.predicted.len()
        )));
    }
    let mut smoothed = vec![[0.0; 2]; t_len];
    smoothed[t_len - 1] = filter_out.filtered[t_len - 1];
    for t in (0..t_len - 1).rev() {
        let mut ratio = [0.0; 2];
        for j in 0..2 {
            let pred = filter_out.predicted[t][j];
            let next = smoothed[t + 1][j];
            ratio[j] = if pred > 0.0 {
                next / pred
            } else if next > 0.0 {
                return Err(Error::ImpossibleTransition { t: t + 2 });
            } else {
                0.0
            };
        }
        for i in 0..2 {
            let back: f64 = (0..2).map(|j| transition.prob(i, j) * ratio[j]).sum();
            smoothed[t][i] = filter_out.filtered[t][i] * back;
        }
    }
    let states = smoothed.iter().map(|r| u8::from(r[1] > r[0])).collect();
    Ok(SmoothedPath {
        smoothed,
        most_likely: RegimePath::new(states)?,
    })
}

/// Likelihood evaluator for repeated calls at different parameters on one
/// panel.
///
/// Per period it stores the Gram matrix of `(Y*_t, W Y*_t, Y*_{t-1},
/// W Y*_{t-1}, 1)`, so `U'U` is a 5x5 quadratic form and an evaluation costs
/// `O(T)` regardless of `n`. Log-determinants come from [`LogDet`].
#[derive(Debug, Clone)]
pub struct LikelihoodEvaluator {
    n: usize,
    t: usize,
    grams: Vec<[f64; 15]>,
    log_det: LogDet,
}

/// Index of `(k, l)` with `k <= l` in the packed upper triangle of a 5x5 matrix.
const fn packed(k: usize, l: usize) -> usize {
    k * 5 - k * (k + 1) / 2 + l
}

impl LikelihoodEvaluator {
    pub fn new(panel: &LogSquaredPanel, w: &WeightMatrix) -> Result<Self> {
        check_shapes(panel, w)?;
        let rows = panel.rows();
        let wy: Vec<Vec<f64>> = rows.iter().map(|r| w.apply(r)).collect();
        let n = panel.n();
        let ones = vec![1.0; n];
        let grams = (1..panel.t())
            .map(|t| {
                let v: [&[f64]; 5] = [&rows[t], &wy[t], &rows[t - 1], &wy[t - 1], &ones];
                let mut g = [0.0; 15];
                for k in 0..5 {
                    for l in k..5 {
                        g[packed(k, l)] = v[k].iter().zip(v[l]).map(|(a, b)| a * b).sum();
                    }
                }
                g
            })
            .collect();
        Ok(Self {
            n,
            t: panel.t(),
            grams,
            log_det: LogDet::new(w),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> usize {
        self.t
    }

    #[inline]
    fn quad(g: &[f64; 15], c: &[f64; 5]) -> f64 {
        let mut s = 0.0;
        for k in 0..5 {
            s += g[packed(k, k)] * c[k] * c[k];
            for l in (k + 1)..5 {
                s += 2.0 * g[packed(k, l)] * c[k] * c[l];
            }
        }
        s.max(0.0)
    }

    /// Log-likelihood from the stationary initial distribution.
    pub fn loglik(&self, params: &ModelParams) -> Result<f64> {
        let init = stationary_dist(&params.transition)?;
        self.loglik_from(params, init)
    }

    pub fn loglik_from(&self, params: &ModelParams, init: [f64; 2]) -> Result<f64> {
        if !(params.sigma2 > 0.0) {
            return Err(Error::param("sigma2", "must be positive"));
        }
        let consts: Vec<(f64, [f64; 5])> = params
            .regimes
            .iter()
            .map(|r| {
                let ld = self.log_det.eval(r.rho)?;
                let c0 = ld - 0.5 * self.n as f64 * (LN_2PI + params.sigma2.ln());
                Ok((c0, [1.0, -r.rho, -r.gamma, -r.delta, -r.phi]))
            })
            .collect::<Result<_>>()?;
        let half_inv = 0.5 / params.sigma2;
        let mut rec = LogRecursion::new(&params.transition, init);
        let mut total = 0.0;
        for (k, g) in self.grams.iter().enumerate() {
            let eta = [
                consts[0].0 - Self::quad(g, &consts[0].1) * half_inv,
                consts[1].0 - Self::quad(g, &consts[1].1) * half_inv,
            ];
            total += rec.step(eta, k + 1)?.0;
        }
        Ok(total)
    }
}
