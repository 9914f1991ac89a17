//! Univariate log-ARCH(P) fits and the Piccolo distance between them.
//!
//! Taking `log y^2` turns a log-ARCH(P) model into an AR(P) regression for
//! the log-squared series with a zero-mean error, so the coefficients are
//! fitted by ordinary least squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ZeroPolicy;
use crate::weights::DistanceMatrix;

/// Extra observations required beyond the model order.
pub const MIN_EXTRA_OBS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnivariateLogArchFit {
    pub series_id: String,
    pub order: usize,
    /// Intercept of the log-squared regression.
    pub constant: f64,
    /// Lag coefficients `gamma_1 .. gamma_P`.
    pub coefficients: Vec<f64>,
    pub residual_variance: f64,
    /// Zeros replaced before the transform.
    pub zero_replacements: usize,
}

/// Fits `log y_t^2 = c + sum_p gamma_p log y_{t-p}^2 + u_t` by OLS.
pub fn fit_log_arch(
    series_id: impl Into<String>,
    series: &[f64],
    order: usize,
    zero_policy: ZeroPolicy,
) -> Result<UnivariateLogArchFit> {
    let series_id = series_id.into();
    if order == 0 {
        return Err(Error::param("order", "must be at least 1"));
    }
    if series.len() <= order + MIN_EXTRA_OBS {
        return Err(Error::DegenerateInput(format!(
            "series `{series_id}` has {} observations; order {order} needs more than {}",
            series.len(),
            order + MIN_EXTRA_OBS
        )));
    }
    if let Some(t) = series.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("series `{series_id}` at index {t}")));
    }
    let (z, zero_replacements) = zero_policy.log_square_series(series);
    let rows = z.len() - order;
    let x = DMatrix::from_fn(rows, order + 1, |r, c| {
        if c == 0 {
            1.0
        } else {
            z[order + r - c]
        }
    });
    let y = DVector::from_iterator(rows, z[order..].iter().copied());

    let xtx = x.transpose() * &x;
    let xty = x.transpose() * &y;
    let chol = xtx.clone().cholesky().ok_or_else(|| {
        Error::DegenerateInput(format!("series `{series_id}`: singular design matrix (constant series?)"))
    })?;
    // Cholesky succeeds on nearly singular Gram matrices; reject those too.
    let diag_max = (0..=order).map(|i| xtx[(i, i)]).fold(0.0, f64::max);
    let diag_min = (0..=order)
        .map(|i| chol.l()[(i, i)].powi(2))
        .fold(f64::INFINITY, f64::min);
    if diag_min <= 1e-12 * diag_max {
        return Err(Error::DegenerateInput(format!(
            "series `{series_id}`: singular design matrix (constant series?)"
        )));
    }
    let beta = chol.solve(&xty);
    let resid = &y - &x * &beta;
    let dof = rows.saturating_sub(order + 1).max(1);
    let residual_variance = (resid.norm_squared() / dof as f64).max(0.0);

    Ok(UnivariateLogArchFit {
        series_id,
        order,
        constant: beta[0],
        coefficients: beta.iter().skip(1).copied().collect(),
        residual_variance,
        zero_replacements,
    })
}

/// Euclidean distance between lag-coefficient vectors; constants are ignored.
pub fn piccolo_distance(a: &UnivariateLogArchFit, b: &UnivariateLogArchFit) -> Result<f64> {
    if a.order != b.order || a.coefficients.len() != b.coefficients.len() {
        return Err(Error::DimensionMismatch(format!(
            "log-ARCH orders differ: `{}` has {}, `{}` has {}",
            a.series_id, a.order, b.series_id, b.order
        )));
    }
    Ok(a.coefficients
        .iter()
        .zip(&b.coefficients)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// All pairwise Piccolo distances.
pub fn piccolo_matrix(fits: &[UnivariateLogArchFit]) -> Result<DistanceMatrix> {
    let n = fits.len();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = piccolo_distance(&fits[i], &fits[j])?;
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    DistanceMatrix::new(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn fit(coefs: &[f64]) -> UnivariateLogArchFit {
        UnivariateLogArchFit {
            series_id: "s".into(),
            order: coefs.len(),
            constant: 1.0,
            coefficients: coefs.to_vec(),
            residual_variance: 0.0,
            zero_replacements: 0,
        }
    }

    /// log-ARCH(1) draws: `log h_t = omega + gamma log y_{t-1}^2`.
    fn simulate_log_arch(gamma: f64, omega: f64, len: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        let mut prev: f64 = 0.0;
        let mut out = Vec::with_capacity(len);
        for t in 0..len + 200 {
            let eps: f64 = rng.sample(StandardNormal);
            let log_h = omega + gamma * prev;
            let y = (0.5 * log_h).exp() * eps;
            prev = (y * y).ln();
            if t >= 200 {
                out.push(y);
            }
        }
        out
    }

    #[test]
    fn exact_ar_relation() {
        // log y_t^2 = 0.5 log y_{t-1}^2 exactly.
        let mut z = 3.0f64;
        let series: Vec<f64> = (0..40)
            .map(|_| {
                let y = (0.5 * z).exp();
                z *= 0.5;
                y
            })
            .collect();
        let f = fit_log_arch("det", &series, 1, ZeroPolicy::default()).unwrap();
        assert!((f.coefficients[0] - 0.5).abs() < 1e-10);
        assert!(f.constant.abs() < 1e-10);
        assert!(f.residual_variance < 1e-20);
    }

    #[test]
    fn recovers_log_arch_coefficient() {
        let y = simulate_log_arch(0.5, -1.0, 10_000, 7);
        let f = fit_log_arch("arch", &y, 1, ZeroPolicy::default()).unwrap();
        assert!((f.coefficients[0] - 0.5).abs() < 0.05, "{:?}", f.coefficients);
    }

    #[test]
    fn white_noise_has_no_dependence() {
        let mut rng = rng_from_seed(11);
        let y: Vec<f64> = (0..10_000).map(|_| rng.sample(StandardNormal)).collect();
        let f = fit_log_arch("wn", &y, 1, ZeroPolicy::default()).unwrap();
        assert!(f.coefficients[0].abs() < 0.05, "{:?}", f.coefficients);
    }

    #[test]
    fn mse_decreases_with_length() {
        let mse = |len: usize| {
            (0..20)
                .map(|s| {
                    let y = simulate_log_arch(0.4, -0.5, len, 100 + s);
                    let g = fit_log_arch("x", &y, 1, ZeroPolicy::default()).unwrap().coefficients[0];
                    (g - 0.4) * (g - 0.4)
                })
                .sum::<f64>()
                / 20.0
        };
        assert!(mse(5_000) < mse(500));
    }

    #[test]
    fn degenerate_inputs() {
        let constant = vec![0.01; 50];
        assert!(matches!(
            fit_log_arch("c", &constant, 1, ZeroPolicy::default()),
            Err(Error::DegenerateInput(_))
        ));
        assert!(fit_log_arch("short", &[1.0; 11], 1, ZeroPolicy::default()).is_err());
        assert!(fit_log_arch("zero-order", &[1.0; 50], 0, ZeroPolicy::default()).is_err());
    }

    #[test]
    fn zeros_are_floored_and_counted() {
        let mut y = simulate_log_arch(0.3, 0.0, 300, 3);
        y[10] = 0.0;
        y[20] = 0.0;
        let f = fit_log_arch("z", &y, 2, ZeroPolicy::default()).unwrap();
        assert_eq!(f.zero_replacements, 2);
        assert_eq!(f.coefficients.len(), 2);
    }

    #[test]
    fn piccolo_examples() {
        assert_eq!(piccolo_distance(&fit(&[0.5]), &fit(&[0.5])).unwrap(), 0.0);
        assert!((piccolo_distance(&fit(&[0.5]), &fit(&[0.2])).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(piccolo_distance(&fit(&[0.3, 0.4]), &fit(&[0.0, 0.0])).unwrap(), 0.5);
        assert!(piccolo_distance(&fit(&[0.3, 0.4]), &fit(&[0.0])).is_err());
    }

    proptest! {
        #[test]
        fn piccolo_is_a_metric(a in proptest::collection::vec(-1.0f64..1.0, 3),
                               b in proptest::collection::vec(-1.0f64..1.0, 3),
                               c in proptest::collection::vec(-1.0f64..1.0, 3)) {
            let (fa, fb, fc) = (fit(&a), fit(&b), fit(&c));
            let ab = piccolo_distance(&fa, &fb).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, piccolo_distance(&fb, &fa).unwrap());
            prop_assert_eq!(piccolo_distance(&fa, &fa).unwrap(), 0.0);
            let ac = piccolo_distance(&fa, &fc).unwrap();
            let cb = piccolo_distance(&fc, &fb).unwrap();
            prop_assert!(ab <= ac + cb + 1e-12);
            let d = piccolo_matrix(&[fa, fb, fc]).unwrap();
            prop_assert_eq!(d.get(0, 1), ab);
        }
    }
}
