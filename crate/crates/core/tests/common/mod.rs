//! Brute-force references shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use msstarch::model::{LogSquaredPanel, ModelParams, RegimeParams, TransitionMatrix};
use msstarch::weights::WeightMatrix;

/// A small random problem.
pub struct Instance {
    pub w: WeightMatrix,
    pub w_dense: DMatrix<f64>,
    pub panel: LogSquaredPanel,
    pub params: ModelParams,
}

fn regime(rng: &mut ChaCha8Rng) -> RegimeParams {
    loop {
        let rho = rng.random_range(-0.9..0.9);
        let delta = rng.random_range(-0.9..0.9);
        if rho + delta < 0.95 {
            return RegimeParams::new(rho, rng.random_range(-0.9..0.9), delta, rng.random_range(-2.0..2.0));
        }
    }
}

/// Random row-normalized W with `n` in 2..=4, `T` in 2..=6, valid parameters
/// and Gaussian data.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=4usize);
    let t = rng.random_range(2..=6usize);
    let mut rows = vec![vec![0.0; n]; n];
    for (i, row) in rows.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            if i != j {
                *v = rng.random_range(0.05..1.0);
            }
        }
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
    let w = WeightMatrix::from_rows(&rows).unwrap();
    let w_dense = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    let values = (0..t)
        .map(|_| (0..n).map(|_| rng.random_range(-4.0..2.0)).collect())
        .collect();
    let params = ModelParams {
        regimes: [regime(&mut rng), regime(&mut rng)],
        transition: TransitionMatrix { p: rng.random_range(0.05..0.99), q: rng.random_range(0.05..0.99) },
        sigma2: rng.random_range(0.5..3.0),
    };
    Instance { w, w_dense, panel: LogSquaredPanel::from_values(values).unwrap(), params }
}

/// Gaussian density of `Y_t` given `Y_{t-1}` for one regime, from the
/// determinant of `I - rho W` and the residual vector.
pub fn density(w: &DMatrix<f64>, y: &[f64], lag: &[f64], r: &RegimeParams, sigma2: f64) -> f64 {
    let n = y.len();
    let a = DMatrix::identity(n, n) - w * r.rho;
    let y = DVector::from_column_slice(y);
    let lag = DVector::from_column_slice(lag);
    let u = &a * &y - &lag * r.gamma - (w * &lag) * r.delta - DVector::from_element(n, r.phi);
    let det = a.determinant().abs();
    det * (2.0 * std::f64::consts::PI * sigma2).powf(-(n as f64) / 2.0)
        * (-u.dot(&u) / (2.0 * sigma2)).exp()
}

/// Likelihood and state posteriors by summing over every path
/// `(s_1, ..., s_{T-1})`; the pre-sample state `s_0` is drawn from the
/// stationary distribution and integrated out analytically.
pub struct Enumeration {
    pub loglik: f64,
    /// `P(s_t = j | Y)` for `t = 0..T`.
    pub posterior: Vec<[f64; 2]>,
}

pub fn enumerate(inst: &Instance) -> Enumeration {
    let m = &inst.params;
    let (p, q) = (m.transition.p, m.transition.q);
    let trans = |from: usize, to: usize| match (from, to) {
        (0, 0) => p,
        (0, 1) => 1.0 - p,
        (1, 0) => 1.0 - q,
        _ => q,
    };
    let pi1 = (1.0 - q) / (2.0 - p - q);
    let pi = [pi1, 1.0 - pi1];
    let rows = inst.panel.rows();
    let t_len = rows.len();
    let dens: Vec<[f64; 2]> = (0..t_len)
        .map(|t| {
            if t == 0 {
                [1.0, 1.0]
            } else {
                [0, 1].map(|s| density(&inst.w_dense, &rows[t], &rows[t - 1], &m.regimes[s], m.sigma2))
            }
        })
        .collect();

    let steps = t_len - 1;
    let mut total = 0.0;
    let mut post = vec![[0.0; 2]; t_len];
    for code in 0..(1usize << steps) {
        let s: Vec<usize> = (0..steps).map(|k| (code >> k) & 1).collect();
        // Joint weight of (s_0, path) for each s_0.
        for s0 in 0..2 {
            let mut wgt = pi[s0] * trans(s0, s[0]);
            let mut prev = s[0];
            wgt *= dens[1][prev];
            for k in 1..steps {
                wgt *= trans(prev, s[k]) * dens[k + 1][s[k]];
                prev = s[k];
            }
            total += wgt;
            post[0][s0] += wgt;
            for k in 0..steps {
                post[k + 1][s[k]] += wgt;
            }
        }
    }
    for row in &mut post {
        row[0] /= total;
        row[1] /= total;
    }
    Enumeration { loglik: total.ln(), posterior: post }
}
