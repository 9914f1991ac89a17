use msstarch::estimation::{fit_one_regime, fit_two_regime, flatten, unflatten, FitOptions, ModelKind};
use msstarch::filter::loglik;
use msstarch::model::{ModelParams, RegimeParams, TransitionMatrix, LOG_CHI2_VARIANCE};
use msstarch::rng::rng_from_seed;
use msstarch::simulate::simulate;
use msstarch::weights::{build_queen_grid, row_normalize, WeightMatrix};
use rand::Rng;

fn grid(r: usize, c: usize) -> WeightMatrix {
    row_normalize(&build_queen_grid(r, c).unwrap()).matrix
}

fn quick() -> FitOptions {
    FitOptions { compute_std_errors: false, ..FitOptions::default() }
}

/// Shifts every slot by 0.5 in a random direction, taking the other
/// direction when the first leaves the parameter space.
fn perturb(m: &ModelParams, seed: u64) -> ModelParams {
    let mut rng = rng_from_seed(seed);
    let mut v = flatten(m, ModelKind::TwoRegime);
    for k in 0..v.len() {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let orig = v[k];
        v[k] = orig + 0.5 * sign;
        if unflatten(&v, ModelKind::TwoRegime).validate().is_err() {
            v[k] = orig - 0.5 * sign;
        }
    }
    unflatten(&v, ModelKind::TwoRegime)
}

#[test]
fn truth_beats_perturbed_parameters() {
    let w = grid(6, 6);
    let truth = ModelParams::reference_dgp();
    let fitted_scale = truth.to_phi_scale();
    let mut wins = 0;
    for seed in 0..50 {
        let sim = simulate(&truth, &w, 200, 100, seed).unwrap();
        let other = perturb(&fitted_scale, 500 + seed);
        other.validate().unwrap();
        let a = loglik(&fitted_scale, &sim.log_squared, &w).unwrap();
        let b = loglik(&other, &sim.log_squared, &w).unwrap();
        wins += usize::from(a > b);
    }
    assert!(wins >= 48, "truth preferred in {wins}/50");
}

#[test]
fn fits_are_canonical_and_respect_the_constraint() {
    let w = grid(6, 6);
    for seed in 0..4 {
        let sim = simulate(&ModelParams::reference_dgp(), &w, 200, 100, 40 + seed).unwrap();
        let fit = fit_two_regime(&sim.log_squared, &w, &quick()).unwrap();
        assert!(fit.converged);
        assert!(fit.params.regimes[0].gamma <= fit.params.regimes[1].gamma);
        for r in &fit.params.regimes {
            assert!(r.rho + r.delta < 1.0);
        }
        let swapped = fit.params.swapped();
        let a = loglik(&fit.params, &sim.log_squared, &w).unwrap();
        let b = loglik(&swapped, &sim.log_squared, &w).unwrap();
        assert!((a - b).abs() <= 1e-9 * a.abs());
        assert!((a - fit.loglik).abs() <= 1e-8 * a.abs());
    }
}

#[test]
fn start_seeds_agree() {
    let w = grid(6, 6);
    let trials = 10;
    let mut agree = 0;
    for seed in 0..trials {
        let sim = simulate(&ModelParams::reference_dgp(), &w, 300, 100, 900 + seed).unwrap();
        let a = fit_two_regime(&sim.log_squared, &w, &FitOptions { seed: 1, ..quick() }).unwrap();
        let b = fit_two_regime(&sim.log_squared, &w, &FitOptions { seed: 2, ..quick() }).unwrap();
        let close = a.estimates.iter().zip(&b.estimates).all(|(x, y)| (x - y).abs() <= 1e-3);
        agree += usize::from(close);
    }
    assert!(agree * 10 >= trials as usize * 9, "{agree}/{trials} agree");
}

#[test]
fn one_regime_fit_recovers_tied_model() {
    let w = grid(6, 6);
    let truth = ModelParams::tied(RegimeParams::new(0.3, 0.4, -0.1, 0.2), 1.0);
    let sim = simulate(&truth, &w, 400, 100, 5).unwrap();
    let fit = fit_one_regime(&sim.log_squared, &w, &FitOptions::default()).unwrap();
    assert!(fit.converged);
    assert_eq!(fit.estimates.len(), 5);
    let expected = truth.to_phi_scale().regimes[0];
    let got = fit.params.regimes[0];
    assert!((got.rho - expected.rho).abs() < 0.05, "{got:?}");
    assert!((got.gamma - expected.gamma).abs() < 0.03, "{got:?}");
    assert!((got.delta - expected.delta).abs() < 0.06, "{got:?}");
    assert!((got.phi - expected.phi).abs() < 0.15, "{got:?}");
    assert!((fit.params.sigma2 - LOG_CHI2_VARIANCE).abs() < 0.2);
    assert_eq!(fit.params.transition, TransitionMatrix { p: 0.5, q: 0.5 });
    let se = fit.std_errors.as_ref().unwrap();
    assert!(se.iter().all(|s| s.is_finite() && *s > 0.0));
    let p = fit.p_values.as_ref().unwrap();
    assert!(p[1] < 1e-6);
}
