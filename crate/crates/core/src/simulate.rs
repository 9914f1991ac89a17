//! Data-generating process of the two-regime model.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::spatial_filter_matrix;
use crate::model::{
    default_labels, log_square, stationary_dist, LogSquaredPanel, ModelParams, Panel, RegimePath,
    ZeroPolicy,
};
use crate::rng::rng_from_seed;
use crate::weights::WeightMatrix;

/// Default number of discarded initial periods.
pub const DEFAULT_BURN_IN: usize = 100;

/// Output of [`simulate`].
#[derive(Debug, Clone)]
pub struct Simulation {
    pub panel: Panel,
    pub log_squared: LogSquaredPanel,
    pub regimes: RegimePath,
    /// `E*_t = (log eps_it^2)_i`, time-major.
    pub shocks: Vec<Vec<f64>>,
    /// `Y*_0`: the lag feeding the first retained period.
    pub initial_lag: Vec<f64>,
}

/// Simulates `T` periods after `burn_in` discarded ones.
///
/// The intercept slot of `params` is read as the structural `mu`, so the
/// estimator will recover `mu + MU_EPSILON`. The chain starts from its
/// stationary distribution and `Y*` starts at zero before the burn-in.
/// `sigma2` plays no role: shocks are `log eps^2` with `eps ~ N(0, 1)`.
pub fn simulate(
    params: &ModelParams,
    w: &WeightMatrix,
    t_len: usize,
    burn_in: usize,
    seed: u64,
) -> Result<Simulation> {
    params.validate()?;
    if !w.is_row_normalized() {
        return Err(Error::param("w", "weight matrix must be row-normalized"));
    }
    if t_len < 2 {
        return Err(Error::param("T", format!("must be at least 2, got {t_len}")));
    }
    let n = w.n();
    let pi = stationary_dist(&params.transition)?;

    // One factorization per regime.
    let lus: Vec<_> = params
        .regimes
        .iter()
        .map(|r| {
            let lu = spatial_filter_matrix(r.rho, w).lu();
            let u = lu.u();
            let scale = (0..n).map(|i| u[(i, i)].abs()).fold(0.0, f64::max);
            if (0..n).any(|i| u[(i, i)].abs() <= 1e-12 * scale.max(1.0)) {
                Err(Error::SingularSystem { rho: r.rho })
            } else {
                Ok(lu)
            }
        })
        .collect::<Result<_>>()?;
    let w_dense: &DMatrix<f64> = w.values();

    let mut rng = rng_from_seed(seed);
    let total = burn_in + t_len;
    let mut state: usize = if rng.random::<f64>() < pi[0] { 0 } else { 1 };
    let mut prev = DVector::<f64>::zeros(n);

    let mut raw = Vec::with_capacity(t_len);
    let mut shocks = Vec::with_capacity(t_len);
    let mut states = Vec::with_capacity(t_len);
    let mut initial_lag = vec![0.0; n];

    for step in 0..total {
        if step > 0 {
            let stay = if state == 0 { params.transition.p } else { params.transition.q };
            if rng.random::<f64>() >= stay {
                state = 1 - state;
            }
        }
        let regime = &params.regimes[state];
        let eps: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let e_star = DVector::from_iterator(n, eps.iter().map(|e| (e * e).ln()));

        let w_prev = w_dense * &prev;
        let rhs = &prev * regime.gamma + &w_prev * regime.delta + &e_star
            + DVector::from_element(n, regime.phi);
        let y_star = lus[state]
            .solve(&rhs)
            .ok_or(Error::SingularSystem { rho: regime.rho })?;

        let y: Vec<f64> = y_star
            .iter()
            .zip(&eps)
            .map(|(ys, e)| e.signum() * (0.5 * ys).exp())
            .collect();
        // Carry the value implied by the stored observation so that the
        // returned log-squared panel and the recursion agree bit for bit.
        let next = DVector::from_iterator(n, y.iter().map(|v| (v * v).ln()));

        if step + 1 == burn_in {
            initial_lag = next.iter().copied().collect();
        }
        if step >= burn_in {
            raw.push(y);
            shocks.push(e_star.iter().copied().collect());
            states.push(state as u8);
        }
        prev = next;
    }

    let panel = Panel::new(default_labels(n), default_labels(t_len), raw)?;
    let log_squared = log_square(&panel, ZeroPolicy::default());
    Ok(Simulation {
        panel,
        log_squared,
        regimes: RegimePath::new(states)?,
        shocks,
        initial_lag,
    })
}
