//! Hyperparameter-grid orchestration and model averaging.
//!
//! Every grid point gets its own coordinate ascent run; the runs are
//! embarrassingly parallel and are reduced in a fixed order so results do
//! not depend on scheduling. Fitting happens in two stages: stage one starts
//! every grid point from a neutral state, stage two restarts every grid
//! point from the best stage-one fit, which in practice lands marginal grid
//! points in better basins of the nonconvex objective.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::dataset::{Dataset, Family};
use crate::error::{Error, Result};
use crate::grid::{HyperGrid, HyperSetting};
use crate::linear::{self, LinearStats};
use crate::logistic;
use crate::math::{log_sum_exp, prob_from_log10_odds, variance_n};
use crate::model::{default_names, FitSettings, GridFit, InnerFit, ModelFit, VariationalState};

/// User-facing fitting options. The three update flags default to whatever
/// the grid implies: hyperparameters declared `Estimate` are updated, fixed
/// ones are not, and the bound parameters are optimized exactly when the
/// family is binomial.
#[derive(Clone, Copy, Debug)]
pub struct FitOptions {
    /// Convergence threshold on the largest change in any inclusion
    /// probability across one sweep.
    pub tol: f64,
    /// Sweep cap per grid point.
    pub maxiter: usize,
    pub update_sigma: Option<bool>,
    pub update_sa: Option<bool>,
    pub optimize_eta: Option<bool>,
    /// Run the second stage (restart all grid points from the best
    /// stage-one fit).
    pub initialize_params: bool,
    /// Pseudo-observation count shrinking the estimated prior effect scale
    /// toward `sa0`.
    pub n0: f64,
    pub sa0: f64,
    /// Number of posterior draws for the model-level variance-explained
    /// estimate.
    pub nr: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: 1e-4,
            maxiter: 10000,
            update_sigma: None,
            update_sa: None,
            optimize_eta: None,
            initialize_params: true,
            n0: 10.0,
            sa0: 1.0,
            nr: 1000,
            seed: 1,
        }
    }
}

fn resolve_settings(family: Family, grid: &HyperGrid, opts: &FitOptions) -> Result<FitSettings> {
    if !(opts.tol > 0.0) {
        return Err(Error::Usage(format!("tol must be positive, got {}", opts.tol)));
    }
    if opts.maxiter == 0 {
        return Err(Error::Usage("maxiter must be at least 1".into()));
    }
    if opts.nr == 0 {
        return Err(Error::Usage("nr must be at least 1".into()));
    }
    if !(opts.n0 >= 0.0) {
        return Err(Error::Usage(format!("n0 must be nonnegative, got {}", opts.n0)));
    }
    if !(opts.sa0 > 0.0) {
        return Err(Error::Usage(format!("sa0 must be positive, got {}", opts.sa0)));
    }

    let sigma_estimated = matches!(grid.sigma, HyperSetting::Estimate);
    let sa_estimated = matches!(grid.sa, HyperSetting::Estimate);
    let update_sigma = match family {
        Family::Gaussian => {
            let flag = opts.update_sigma.unwrap_or(sigma_estimated);
            if sigma_estimated && !flag {
                return Err(Error::Usage(
                    "sigma has no fixed values to use when update_sigma is disabled".into(),
                ));
            }
            flag
        }
        Family::Binomial => {
            if opts.update_sigma == Some(true) {
                return Err(Error::Usage(
                    "binomial models fix the residual variance at 1; update_sigma does not apply"
                        .into(),
                ));
            }
            false
        }
    };
    let update_sa = {
        let flag = opts.update_sa.unwrap_or(sa_estimated);
        if sa_estimated && !flag {
            return Err(Error::Usage(
                "sa has no fixed values to use when update_sa is disabled".into(),
            ));
        }
        flag
    };
    let optimize_eta = match family {
        Family::Gaussian => {
            if opts.optimize_eta == Some(true) {
                return Err(Error::Usage(
                    "optimize_eta applies only to binomial models".into(),
                ));
            }
            false
        }
        Family::Binomial => opts.optimize_eta.unwrap_or(true),
    };
    Ok(FitSettings {
        tol: opts.tol,
        maxiter: opts.maxiter,
        update_sigma,
        update_sa,
        optimize_eta,
        initialize_params: opts.initialize_params,
        n0: opts.n0,
        sa0: opts.sa0,
        nr: opts.nr,
        seed: opts.seed,
    })
}

/// Fits the spike-and-slab model at every grid point and averages the
/// results by normalized evidence. Deterministic given the data, grid,
/// options and seed.
pub fn fit(ds: &Dataset, grid: &HyperGrid, opts: &FitOptions) -> Result<ModelFit> {
    grid.validate(ds.p(), ds.family())?;
    let settings = resolve_settings(ds.family(), grid, opts)?;
    let n_s = grid.n_points();
    let p = ds.p();

    let lin_stats = match ds.family() {
        Family::Gaussian => Some(LinearStats::new(ds)?),
        Family::Binomial => None,
    };

    let sigma_init: Vec<f64> = match (&grid.sigma, ds.family()) {
        (_, Family::Binomial) => vec![1.0; n_s],
        (HyperSetting::Fixed(v), _) => v.clone(),
        (HyperSetting::Estimate, Family::Gaussian) => {
            let var = variance_n(lin_stats.as_ref().unwrap().yhat());
            if var <= 0.0 {
                return Err(Error::Data(
                    "outcome is constant after covariate adjustment; the residual variance cannot be initialized".into(),
                ));
            }
            vec![var; n_s]
        }
    };
    let sa_init: Vec<f64> = match &grid.sa {
        HyperSetting::Fixed(v) => v.clone(),
        HyperSetting::Estimate => vec![settings.sa0; n_s],
    };
    let logodds_cols: Vec<Vec<f64>> = (0..n_s).map(|j| grid.logodds_column(j, p)).collect();

    let fit_point = |j: usize, init: &VariationalState, sigma2: f64, sa2: f64| -> Result<InnerFit> {
        match ds.family() {
            Family::Gaussian => {
                let inner_opts = linear::InnerOptions {
                    tol: settings.tol,
                    maxiter: settings.maxiter,
                    update_sigma: settings.update_sigma,
                    update_sa: settings.update_sa,
                    n0: settings.n0,
                    sa0: settings.sa0,
                };
                Ok(linear::fit_inner_linear(
                    lin_stats.as_ref().unwrap(),
                    &logodds_cols[j],
                    sigma2,
                    sa2,
                    init,
                    &inner_opts,
                ))
            }
            Family::Binomial => {
                let inner_opts = logistic::InnerOptions {
                    tol: settings.tol,
                    maxiter: settings.maxiter,
                    update_sa: settings.update_sa,
                    optimize_eta: settings.optimize_eta,
                    n0: settings.n0,
                    sa0: settings.sa0,
                };
                logistic::fit_inner_logistic(ds, &logodds_cols[j], sa2, init, &inner_opts)
            }
        }
    };

    // Stage 1: every grid point starts from a neutral state consistent with
    // its own prior.
    let stage1: Vec<InnerFit> = (0..n_s)
        .into_par_iter()
        .map(|j| {
            let prior: Vec<f64> = logodds_cols[j]
                .iter()
                .map(|&lo| prob_from_log10_odds(lo))
                .collect();
            let s2_init = sa_init[j] * sigma_init[j];
            let eta = match ds.family() {
                Family::Binomial => Some(vec![1.0; ds.n()]),
                Family::Gaussian => None,
            };
            let init = VariationalState::initial(&prior, s2_init, eta);
            fit_point(j, &init, sigma_init[j], sa_init[j])
        })
        .collect::<Result<Vec<_>>>()?;

    // Stage 2: restart every grid point from the stage-1 fit with the best
    // evidence, carrying over its hyperparameter estimates where those are
    // being estimated.
    let final_fits: Vec<InnerFit> = if settings.initialize_params {
        let winner = argmax(&stage1.iter().map(|f| f.logw).collect::<Vec<_>>());
        let best = &stage1[winner];
        (0..n_s)
            .into_par_iter()
            .map(|j| {
                let sigma2 = if settings.update_sigma { best.sigma2 } else { sigma_init[j] };
                let sa2 = if settings.update_sa { best.sa2 } else { sa_init[j] };
                fit_point(j, &best.state, sigma2, sa2)
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        stage1
    };

    let logw: Vec<f64> = final_fits.iter().map(|f| f.logw).collect();
    let w = normalize_weights(&logw)?;
    let states: Vec<VariationalState> = final_fits.iter().map(|f| f.state.clone()).collect();
    let pip = average_pips(&states, &w);
    let beta_mean = posterior_mean_coefficients(&states, &w);
    let mu_cov = DMatrix::from_fn(ds.m(), n_s, |a, j| final_fits[j].mu_cov[a]);
    let fits = GridFit {
        states,
        logw,
        sigma: final_fits.iter().map(|f| f.sigma2).collect(),
        sa: final_fits.iter().map(|f| f.sa2).collect(),
        mu_cov,
        converged: final_fits.iter().map(|f| f.converged).collect(),
        n_iter: final_fits.iter().map(|f| f.n_iter).collect(),
    };

    let (pve, model_pve) = match ds.family() {
        Family::Binomial => (None, None),
        Family::Gaussian => {
            let stats = lin_stats.as_ref().unwrap();
            let col_var: Vec<f64> = (0..p)
                .map(|i| {
                    let col: Vec<f64> = stats.xhat().column(i).iter().copied().collect();
                    variance_n(&col)
                })
                .collect();
            let pve = DMatrix::from_fn(p, n_s, |i, j| {
                single_effect_pve(col_var[i], &fits.states[j], i, fits.sigma[j])
            });
            let draws = sample_model_pve(
                &fits,
                &w,
                stats.xhat(),
                settings.nr,
                settings.seed,
            );
            (Some(pve), Some(draws))
        }
    };

    let result = ModelFit {
        family: ds.family(),
        n: ds.n(),
        p,
        m: ds.m(),
        dataset_digest: ds.digest(),
        x_digest: ds.x_digest(),
        settings,
        grid: grid.clone(),
        fits,
        w,
        pip,
        beta_mean,
        pve,
        model_pve,
        names: default_names(p),
    };
    Ok(result)
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate() {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

/// Normalizes evidence bounds into grid-point weights, shifting by the
/// maximum so the exponentials cannot overflow.
pub fn normalize_weights(logw: &[f64]) -> Result<Vec<f64>> {
    if logw.is_empty() {
        return Err(Error::Usage("cannot normalize an empty set of weights".into()));
    }
    if let Some(bad) = logw.iter().find(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!(
            "cannot normalize weights containing the non-finite bound {bad}"
        )));
    }
    let total = log_sum_exp(logw);
    Ok(logw.iter().map(|&l| (l - total).exp()).collect())
}

/// Grid-averaged posterior inclusion probabilities.
pub fn average_pips(states: &[VariationalState], w: &[f64]) -> Vec<f64> {
    let p = states.first().map_or(0, |s| s.p());
    let mut pip = vec![0.0; p];
    for (st, &wj) in states.iter().zip(w) {
        for i in 0..p {
            pip[i] += wj * st.alpha[i];
        }
    }
    pip
}

/// Grid-averaged posterior mean coefficients.
pub fn posterior_mean_coefficients(states: &[VariationalState], w: &[f64]) -> Vec<f64> {
    let p = states.first().map_or(0, |s| s.p());
    let mut beta = vec![0.0; p];
    for (st, &wj) in states.iter().zip(w) {
        for i in 0..p {
            beta[i] += wj * st.alpha[i] * st.mu[i];
        }
    }
    beta
}

/// Grid-averaged probability that at least one variable is included.
pub fn prob_at_least_one(states: &[VariationalState], w: &[f64]) -> f64 {
    states
        .iter()
        .zip(w)
        .map(|(st, &wj)| {
            let none: f64 = st.alpha.iter().map(|a| 1.0 - a).product();
            wj * (1.0 - none)
        })
        .sum()
}

/// Bayes factor comparing two fits of different grids on the same dataset,
/// with a uniform prior over each fit's own grid points.
pub fn bayes_factor(fit_null: &ModelFit, fit_alt: &ModelFit) -> Result<f64> {
    if fit_null.dataset_digest != fit_alt.dataset_digest {
        return Err(Error::Data(
            "the two fits were produced from different datasets; a Bayes factor would be meaningless".into(),
        ));
    }
    // Grouped so that comparing a fit against itself gives exactly zero and
    // swapping the arguments gives the exact negation.
    let log_bf = (log_sum_exp(&fit_alt.fits.logw) - log_sum_exp(&fit_null.fits.logw))
        + ((fit_null.fits.logw.len() as f64).ln() - (fit_alt.fits.logw.len() as f64).ln());
    Ok(log_bf.exp())
}

/// Proportion of outcome variance a single variable explains, conditioned on
/// inclusion, under one grid point's fit.
fn single_effect_pve(col_var: f64, state: &VariationalState, i: usize, sigma2: f64) -> f64 {
    let second_moment = state.mu[i] * state.mu[i] + state.s2[i];
    let explained = col_var * second_moment;
    if explained <= 0.0 {
        return 0.0;
    }
    explained / (explained + sigma2)
}

/// 95% credible interval of variable `i`'s effect conditional on inclusion,
/// from Monte Carlo draws of the grid-averaged mixture: a grid point is
/// sampled with probability proportional to `w_j * alpha_ij`, then the
/// effect from that point's slab posterior. Returns `None` when the
/// variable has no inclusion mass anywhere on the grid.
pub fn conditional_effect_interval(
    fits: &GridFit,
    w: &[f64],
    i: usize,
    n_draws: usize,
    seed: u64,
) -> Option<(f64, f64)> {
    let mix: Vec<f64> = fits
        .states
        .iter()
        .zip(w)
        .map(|(st, &wj)| wj * st.alpha[i])
        .collect();
    let total: f64 = mix.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let mut draws = Vec::with_capacity(n_draws);
    for _ in 0..n_draws {
        let u: f64 = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = mix.len() - 1;
        for (j, &mj) in mix.iter().enumerate() {
            acc += mj;
            if u < acc {
                pick = j;
                break;
            }
        }
        let st = &fits.states[pick];
        let z: f64 = rng.sample(StandardNormal);
        draws.push(st.mu[i] + st.s2[i].sqrt() * z);
    }
    draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Some((
        crate::math::quantile_sorted(&draws, 0.025),
        crate::math::quantile_sorted(&draws, 0.975),
    ))
}

/// Posterior draws of the model-level proportion of variance explained:
/// sample a grid point from the weights, then inclusion indicators and
/// effects from its factorized posterior, and return the explained-variance
/// share of the resulting fitted values.
pub fn sample_model_pve(
    fits: &GridFit,
    w: &[f64],
    xhat: &DMatrix<f64>,
    nr: usize,
    seed: u64,
) -> Vec<f64> {
    let n = xhat.nrows();
    let p = xhat.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = Vec::with_capacity(nr);
    let mut fitted = vec![0.0; n];
    for _ in 0..nr {
        let j = {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = w.len() - 1;
            for (idx, &wj) in w.iter().enumerate() {
                acc += wj;
                if u < acc {
                    pick = idx;
                    break;
                }
            }
            pick
        };
        let st = &fits.states[j];
        fitted.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..p {
            if rng.random::<f64>() < st.alpha[i] {
                let z: f64 = rng.sample(StandardNormal);
                let beta = st.mu[i] + st.s2[i].sqrt() * z;
                let col = xhat.column(i);
                for k in 0..n {
                    fitted[k] += col[k] * beta;
                }
            }
        }
        let var = variance_n(&fitted);
        draws.push(var / (var + fits.sigma[j]));
    }
    draws
}
