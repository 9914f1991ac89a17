//! Parameter and panel types of the two-regime model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `E[log eps^2]` for standard normal `eps`: `psi(1/2) + ln 2 = -gamma_E - ln 2`.
///
/// The estimated intercept `phi` equals the structural intercept `mu` plus this
/// constant.
pub const MU_EPSILON: f64 = -0.577_215_664_901_532_9 - std::f64::consts::LN_2;

/// Variance of `log chi^2_1`, `pi^2 / 2`.
pub const LOG_CHI2_VARIANCE: f64 = std::f64::consts::PI * std::f64::consts::PI / 2.0;

/// Parameters of one regime.
///
/// `phi` is the intercept of the centred model the estimator works with. The
/// simulator interprets the same slot as the structural intercept `mu`; see
/// [`RegimeParams::to_phi_scale`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeParams {
    pub rho: f64,
    pub gamma: f64,
    pub delta: f64,
    pub phi: f64,
}

impl RegimeParams {
    pub fn new(rho: f64, gamma: f64, delta: f64, phi: f64) -> Self {
        Self {
            rho,
            gamma,
            delta,
            phi,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.validate("").is_ok()
    }

    /// Checks `|rho|, |gamma|, |delta| < 1` and `rho + delta < 1`.
    pub fn validate(&self, suffix: &str) -> Result<()> {
        for (name, v) in [("rho", self.rho), ("gamma", self.gamma), ("delta", self.delta)] {
            if !v.is_finite() || v.abs() >= 1.0 {
                return Err(Error::param(
                    format!("{name}{suffix}"),
                    format!("must lie in (-1, 1), got {v}"),
                ));
            }
        }
        if !self.phi.is_finite() {
            return Err(Error::param(format!("phi{suffix}"), "must be finite"));
        }
        if self.rho + self.delta >= 1.0 {
            return Err(Error::param(
                format!("rho{suffix}+delta{suffix}"),
                format!("must be < 1, got {}", self.rho + self.delta),
            ));
        }
        Ok(())
    }

    /// Shifts a structural intercept `mu` to `phi = mu + MU_EPSILON`.
    pub fn to_phi_scale(self) -> Self {
        Self {
            phi: self.phi + MU_EPSILON,
            ..self
        }
    }

    /// Inverse of [`RegimeParams::to_phi_scale`].
    pub fn to_mu_scale(self) -> Self {
        Self {
            phi: self.phi - MU_EPSILON,
            ..self
        }
    }
}

/// Two-state transition matrix
///
/// ```text
/// P = | p      1 - q |
///     | 1 - p  q     |
/// ```
///
/// Column `j` holds the distribution of `s_{t+1}` given `s_t = j`, so
/// predicted probabilities are `P xi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub p: f64,
    pub q: f64,
}

impl TransitionMatrix {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        let t = Self { p, q };
        t.validate()?;
        Ok(t)
    }

    /// Stay probabilities must lie in `(0, 1]`; 1 marks an absorbing regime.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("p", self.p), ("q", self.q)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::param(name, format!("must lie in (0, 1], got {v}")));
            }
        }
        Ok(())
    }

    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [[self.p, 1.0 - self.q], [1.0 - self.p, self.q]]
    }

    /// `P xi`.
    pub fn predict(&self, xi: [f64; 2]) -> [f64; 2] {
        [
            self.p * xi[0] + (1.0 - self.q) * xi[1],
            (1.0 - self.p) * xi[0] + self.q * xi[1],
        ]
    }

    /// Probability of moving from regime `from` to regime `to` (0-based).
    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.matrix()[to][from]
    }

    pub fn swapped(&self) -> Self {
        Self {
            p: self.q,
            q: self.p,
        }
    }
}

/// Stationary distribution of the chain, `pi_1 = (1 - q) / (2 - p - q)`.
///
/// With one absorbing regime all mass goes there; with both absorbing the
/// chain is reducible and the caller must supply an initial distribution.
pub fn stationary_dist(transition: &TransitionMatrix) -> Result<[f64; 2]> {
    transition.validate()?;
    let TransitionMatrix { p, q } = *transition;
    if p == 1.0 && q == 1.0 {
        return Err(Error::param(
            "p,q",
            "reducible chain (p = q = 1): an explicit initial distribution is required",
        ));
    }
    let pi1 = (1.0 - q) / (2.0 - p - q);
    Ok([pi1, 1.0 - pi1])
}

/// Full two-regime parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub regimes: [RegimeParams; 2],
    pub transition: TransitionMatrix,
    pub sigma2: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        self.regimes[0].validate("1")?;
        self.regimes[1].validate("2")?;
        self.transition.validate()?;
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::param(
                "sigma2",
                format!("must be positive, got {}", self.sigma2),
            ));
        }
        Ok(())
    }

    /// Model with the same parameters in both regimes.
    pub fn tied(regime: RegimeParams, sigma2: f64) -> Self {
        Self {
            regimes: [regime, regime],
            transition: TransitionMatrix { p: 0.5, q: 0.5 },
            sigma2,
        }
    }

    /// Exchanges regime labels together with `p` and `q`.
    pub fn swapped(&self) -> Self {
        Self {
            regimes: [self.regimes[1], self.regimes[0]],
            transition: self.transition.swapped(),
            sigma2: self.sigma2,
        }
    }

    /// Simulation parameters from the Monte Carlo study: a weakly dependent
    /// regime `(0.2, 0.2, -0.2, 0.1)` with `p = 0.97` and a persistent regime
    /// `(0.2, 0.8, -0.2, 0.1)` with `q = 0.93`. Intercepts are on the
    /// structural (`mu`) scale.
    pub fn reference_dgp() -> Self {
        Self {
            regimes: [
                RegimeParams::new(0.2, 0.2, -0.2, 0.1),
                RegimeParams::new(0.2, 0.8, -0.2, 0.1),
            ],
            transition: TransitionMatrix { p: 0.97, q: 0.93 },
            sigma2: LOG_CHI2_VARIANCE,
        }
    }

    /// Intercepts shifted from the `mu` scale to the `phi` scale.
    pub fn to_phi_scale(&self) -> Self {
        Self {
            regimes: [self.regimes[0].to_phi_scale(), self.regimes[1].to_phi_scale()],
            ..*self
        }
    }

    pub fn to_mu_scale(&self) -> Self {
        Self {
            regimes: [self.regimes[0].to_mu_scale(), self.regimes[1].to_mu_scale()],
            ..*self
        }
    }
}

/// Handling of zero observations before taking `log y^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum ZeroPolicy {
    /// Replace `y = 0` by `factor * sd(series)`. A series whose standard
    /// deviation is zero uses `factor` itself.
    RelativeFloor { factor: f64 },
    /// Replace `y = 0` by a fixed value.
    Floor { value: f64 },
}

impl Default for ZeroPolicy {
    fn default() -> Self {
        ZeroPolicy::RelativeFloor { factor: 1e-3 }
    }
}

impl ZeroPolicy {
    /// Floor value used for zeros of `series`.
    pub fn floor_for(&self, series: &[f64]) -> f64 {
        match *self {
            ZeroPolicy::Floor { value } => value.abs(),
            ZeroPolicy::RelativeFloor { factor } => {
                let sd = sample_sd(series);
                if sd > 0.0 && sd.is_finite() {
                    factor.abs() * sd
                } else {
                    factor.abs()
                }
            }
        }
    }

    /// `log y^2` of every element with zeros floored; returns the number of
    /// replacements.
    pub fn log_square_series(&self, series: &[f64]) -> (Vec<f64>, usize) {
        let mut floor = None;
        let mut replaced = 0;
        let out = series
            .iter()
            .map(|&y| {
                if y == 0.0 {
                    replaced += 1;
                    let f = *floor.get_or_insert_with(|| self.floor_for(series));
                    (f * f).ln()
                } else {
                    (y * y).ln()
                }
            })
            .collect();
        (out, replaced)
    }
}

pub(crate) fn sample_sd(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let ss: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (x.len() - 1) as f64).sqrt()
}

fn check_labels(labels: &[String], what: &str) -> Result<()> {
    let mut seen = std::collections::HashSet::with_capacity(labels.len());
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(Error::Parse(format!("duplicate {what} label `{l}`")));
        }
    }
    Ok(())
}

/// Raw observations `y_it`, stored time-major: `values[t][i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    location_ids: Vec<String>,
    time_ids: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl Panel {
    pub fn new(location_ids: Vec<String>, time_ids: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != time_ids.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} time labels for {} rows",
                time_ids.len(),
                values.len()
            )));
        }
        if let Some(t) = values.iter().position(|r| r.len() != location_ids.len()) {
            return Err(Error::DimensionMismatch(format!(
                "row {t} has {} values, expected {}",
                values[t].len(),
                location_ids.len()
            )));
        }
        check_labels(&location_ids, "location")?;
        check_labels(&time_ids, "time")?;
        Ok(Self {
            location_ids,
            time_ids,
            values,
        })
    }

    /// Panel with labels `1..=n` for locations and `1..=T` for times.
    pub fn with_default_labels(values: Vec<Vec<f64>>) -> Result<Self> {
        let n = values.first().map_or(0, Vec::len);
        let t = values.len();
        Self::new(default_labels(n), default_labels(t), values)
    }

    pub fn n(&self) -> usize {
        self.location_ids.len()
    }

    pub fn t(&self) -> usize {
        self.time_ids.len()
    }

    pub fn location_ids(&self) -> &[String] {
        &self.location_ids
    }

    pub fn time_ids(&self) -> &[String] {
        &self.time_ids
    }

    /// Row `t`: all locations at one time.
    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn series(&self, i: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[i]).collect()
    }

    /// Log returns `ln(P_t / P_{t-1})` of a price panel; drops the first time.
    pub fn log_returns(&self) -> Result<Panel> {
        if self.t() < 2 {
            return Err(Error::DegenerateInput(
                "at least two prices are needed for returns".into(),
            ));
        }
        for (t, row) in self.values.iter().enumerate() {
            if let Some(i) = row.iter().position(|&p| !(p > 0.0 && p.is_finite())) {
                return Err(Error::param(
                    format!("price[{},{}]", self.time_ids[t], self.location_ids[i]),
                    "prices must be positive and finite",
                ));
            }
        }
        let values = self
            .values
            .windows(2)
            .map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| (a / b).ln()).collect())
            .collect();
        Panel::new(self.location_ids.clone(), self.time_ids[1..].to_vec(), values)
    }
}

pub(crate) fn default_labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| i.to_string()).collect()
}

/// Log-squared observations `Y*_t`, time-major like [`Panel`].
#[derive(Debug, Clone, PartialEq)]
pub struct LogSquaredPanel {
    location_ids: Vec<String>,
    time_ids: Vec<String>,
    values: Vec<Vec<f64>>,
    zero_replacements: usize,
}

impl LogSquaredPanel {
    /// Wraps already-transformed values; all entries must be finite.
    pub fn new(
        location_ids: Vec<String>,
        time_ids: Vec<String>,
        values: Vec<Vec<f64>>,
        zero_replacements: usize,
    ) -> Result<Self> {
        let shape = Panel::new(location_ids, time_ids, values)?;
        for (t, row) in shape.values.iter().enumerate() {
            if let Some(i) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "Y* at time {} location {}",
                    shape.time_ids[t], shape.location_ids[i]
                )));
            }
        }
        Ok(Self {
            location_ids: shape.location_ids,
            time_ids: shape.time_ids,
            values: shape.values,
            zero_replacements,
        })
    }

    pub fn from_values(values: Vec<Vec<f64>>) -> Result<Self> {
        let n = values.first().map_or(0, Vec::len);
        let t = values.len();
        Self::new(default_labels(n), default_labels(t), values, 0)
    }

    pub fn n(&self) -> usize {
        self.location_ids.len()
    }

    pub fn t(&self) -> usize {
        self.time_ids.len()
    }

    pub fn location_ids(&self) -> &[String] {
        &self.location_ids
    }

    pub fn time_ids(&self) -> &[String] {
        &self.time_ids
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn zero_replacements(&self) -> usize {
        self.zero_replacements
    }

    /// Number of observations entering the likelihood, `n (T - 1)`.
    pub fn n_obs(&self) -> usize {
        self.n() * self.t().saturating_sub(1)
    }
}

/// Element-wise `log y^2`, with zeros floored per location.
pub fn log_square(panel: &Panel, zero_policy: ZeroPolicy) -> LogSquaredPanel {
    let (n, t) = (panel.n(), panel.t());
    let mut values = vec![vec![0.0; n]; t];
    let mut replaced = 0;
    for i in 0..n {
        let (col, r) = zero_policy.log_square_series(&panel.series(i));
        replaced += r;
        for (row, v) in values.iter_mut().zip(col) {
            row[i] = v;
        }
    }
    LogSquaredPanel {
        location_ids: panel.location_ids.clone(),
        time_ids: panel.time_ids.clone(),
        values,
        zero_replacements: replaced,
    }
}

/// Regime labels per time, stored 0-based (`0` is regime 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegimePath {
    states: Vec<u8>,
}

impl RegimePath {
    pub fn new(states: Vec<u8>) -> Result<Self> {
        if let Some(s) = states.iter().find(|&&s| s > 1) {
            return Err(Error::param("state", format!("regime index {s} out of range")));
        }
        Ok(Self { states })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// 0-based regime indices.
    pub fn states(&self) -> &[u8] {
        &self.states
    }

    /// 1-based regime labels as written to CSV.
    pub fn labels(&self) -> impl Iterator<Item = u8> + '_ {
        self.states.iter().map(|s| s + 1)
    }

    /// Share of periods on which two paths agree.
    pub fn agreement(&self, other: &RegimePath) -> f64 {
        let n = self.len().min(other.len());
        if n == 0 {
            return 0.0;
        }
        let same = self
            .states
            .iter()
            .zip(&other.states)
            .filter(|(a, b)| a == b)
            .count();
        same as f64 / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mu_epsilon_value() {
        assert!((MU_EPSILON + 1.270_362_845_461_478).abs() < 1e-14);
    }

    #[test]
    fn stationary_examples() {
        let pi = stationary_dist(&TransitionMatrix { p: 0.5, q: 0.5 }).unwrap();
        assert_eq!(pi, [0.5, 0.5]);

        let pi = stationary_dist(&TransitionMatrix { p: 0.97, q: 0.93 }).unwrap();
        assert!((pi[0] - 0.7).abs() < 1e-12 && (pi[1] - 0.3).abs() < 1e-12);

        let pi = stationary_dist(&TransitionMatrix { p: 1.0, q: 0.5 }).unwrap();
        assert_eq!(pi, [1.0, 0.0]);

        assert!(stationary_dist(&TransitionMatrix { p: 1.0, q: 1.0 }).is_err());
    }

    #[test]
    fn stationary_is_fixed_point() {
        for &(p, q) in &[(0.1, 0.9), (0.97, 0.93), (0.6, 0.2), (0.999, 0.5)] {
            let t = TransitionMatrix { p, q };
            let pi = stationary_dist(&t).unwrap();
            let next = t.predict(pi);
            assert!((next[0] - pi[0]).abs() < 1e-14 && (next[1] - pi[1]).abs() < 1e-14);
            let m = t.matrix();
            assert_eq!(m[0][0] + m[1][0], 1.0);
            assert_eq!(m[0][1] + m[1][1], 1.0);
        }
    }

    #[test]
    fn regime_validity() {
        assert!(RegimeParams::new(0.2, 0.8, -0.2, 0.1).is_valid());
        assert!(!RegimeParams::new(1.0, 0.0, 0.0, 0.0).is_valid());
        assert!(!RegimeParams::new(0.6, 0.0, 0.5, 0.0).is_valid());
        let err = RegimeParams::new(1.5, 0.0, 0.0, 0.0).validate("1").unwrap_err();
        assert!(err.to_string().contains("rho1"));
    }

    #[test]
    fn log_square_values() {
        let panel = Panel::with_default_labels(vec![vec![1.0, -2.0, 0.0], vec![3.0, 1.0, 0.5]]).unwrap();
        let ls = log_square(&panel, ZeroPolicy::Floor { value: 0.01 });
        assert_eq!(ls.row(0)[0], 0.0);
        assert!((ls.row(0)[1] - 4f64.ln()).abs() < 1e-15);
        assert_eq!(ls.row(0)[2], (0.01f64 * 0.01).ln());
        assert_eq!(ls.zero_replacements(), 1);
    }

    #[test]
    fn relative_floor_uses_series_sd() {
        let series = [0.0, 2.0, -2.0, 0.0];
        let sd = sample_sd(&series);
        let (out, n) = ZeroPolicy::default().log_square_series(&series);
        assert_eq!(n, 2);
        assert_eq!(out[0], ((1e-3 * sd) * (1e-3 * sd)).ln());
    }

    #[test]
    fn panel_rejects_bad_shapes() {
        assert!(Panel::with_default_labels(vec![vec![1.0, 2.0], vec![1.0]]).is_err());
        let dup = Panel::new(vec!["a".into(), "a".into()], vec!["1".into()], vec![vec![1.0, 2.0]]);
        assert!(dup.is_err());
    }

    #[test]
    fn log_returns_from_prices() {
        let prices = Panel::with_default_labels(vec![vec![100.0, 5.0], vec![110.0, 5.0]]).unwrap();
        let r = prices.log_returns().unwrap();
        assert_eq!(r.t(), 1);
        assert!((r.row(0)[0] - 1.1f64.ln()).abs() < 1e-15);
        assert_eq!(r.row(0)[1], 0.0);
    }
}
