//! Coordinate ascent for the logistic-model variational approximation.
//!
//! The Bernoulli likelihood is replaced by a quadratic lower bound that is
//! tight at free parameters eta, one per sample. Conditional on eta the
//! problem looks like a weighted linear regression with weights d(eta), the
//! covariate coefficients integrate out analytically under a flat prior, and
//! the spike-and-slab coordinate updates mirror the linear engine with the
//! residual variance fixed at 1. An outer M-step re-tightens eta.

use nalgebra::DMatrix;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_inverse, cholesky_named, forward_solve, logdet_from_cholesky};
use crate::math::{log_sigmoid, selection_kl, sigmoid, LN_10};
use crate::model::{InnerFit, VariationalState};

/// Slope of the quadratic bound at `eta`: (sigmoid(eta) - 1/2) / eta,
/// continued through the removable singularity at zero with its series
/// value 1/4.
pub fn sigmoid_slope(eta: f64) -> f64 {
    if eta.abs() < 1e-8 {
        0.25
    } else {
        (sigmoid(eta) - 0.5) / eta
    }
}

/// Quadratic lower bound on log(sigmoid(x)) that is exact at x = eta and
/// x = -eta.
pub fn sigmoid_bound(x: f64, eta: f64) -> f64 {
    let d = sigmoid_slope(eta);
    log_sigmoid(eta) + 0.5 * (x - eta) - 0.5 * d * (x * x - eta * eta)
}

/// Order of operations for the bound-weighted Gram diagonal. The covariate
/// projection makes each entry a small difference of large terms; `Stable`
/// scales by the weight mass inside the square (and clamps the provably
/// nonnegative result at zero), `Naive` squares first and divides after,
/// losing half the significant digits. `Naive` exists for diagnostics and
/// tests only.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum XdxFormula {
    Stable,
    Naive,
}

/// Bound-dependent sufficient statistics, recomputed whenever eta changes.
///
/// Everything is read-only during a sweep; the running fitted values and
/// their covariate cross-products are owned by the fit.
pub struct LogisticStats {
    n: usize,
    p: usize,
    m: usize,
    /// Bound slopes d(eta), one per sample.
    d: Vec<f64>,
    /// (Z'DZ)^-1.
    sigma_hat: DMatrix<f64>,
    /// Sigma_hat Z'(y - 1/2).
    u_hat: Vec<f64>,
    /// (y - 1/2) - DZ u_hat: the outcome with the covariate part removed.
    yhat: Vec<f64>,
    /// Diagonal of X' Dhat X where Dhat = D - DZ Sigma_hat Z'D.
    xdx: Vec<f64>,
    /// X' yhat.
    xdy: Vec<f64>,
    /// Z'DX.
    v: DMatrix<f64>,
    /// Sigma_hat Z'DX.
    sv: DMatrix<f64>,
    logdet_sigma_hat: f64,
    /// Z'(y - 1/2).
    zty_half: Vec<f64>,
}

impl LogisticStats {
    /// Builds the statistics with the stable Gram-diagonal ordering.
    pub fn new(ds: &Dataset, eta: &[f64]) -> Result<Self> {
        Self::with_xdx_formula(ds, eta, XdxFormula::Stable)
    }

    pub fn with_xdx_formula(ds: &Dataset, eta: &[f64], formula: XdxFormula) -> Result<Self> {
        let (n, p, m) = (ds.n(), ds.p(), ds.m());
        assert_eq!(eta.len(), n, "one bound parameter per sample");
        let d: Vec<f64> = eta.iter().map(|&e| sigmoid_slope(e)).collect();
        let z = ds.z();
        let x = ds.x();

        let mut ztdz = DMatrix::zeros(m, m);
        for a in 0..m {
            for b in a..m {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += z[(i, a)] * d[i] * z[(i, b)];
                }
                ztdz[(a, b)] = acc;
                ztdz[(b, a)] = acc;
            }
        }
        let chol = cholesky_named(&ztdz).map_err(|k| {
            Error::Numerical(format!(
                "bound-weighted covariate cross-product is singular at column {k}"
            ))
        })?;
        let logdet_sigma_hat = -logdet_from_cholesky(&chol);
        let sigma_hat = cholesky_inverse(&chol);

        let mut zty_half = vec![0.0; m];
        for (a, acc) in zty_half.iter_mut().enumerate() {
            for i in 0..n {
                *acc += z[(i, a)] * (ds.y()[i] - 0.5);
            }
        }
        let u_hat: Vec<f64> = (0..m)
            .map(|a| (0..m).map(|b| sigma_hat[(a, b)] * zty_half[b]).sum())
            .collect();
        let mut yhat = vec![0.0; n];
        for i in 0..n {
            let zu: f64 = (0..m).map(|a| z[(i, a)] * u_hat[a]).sum();
            yhat[i] = (ds.y()[i] - 0.5) - d[i] * zu;
        }

        let mut v = DMatrix::zeros(m, p);
        for j in 0..p {
            let col = x.column(j);
            for a in 0..m {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += z[(i, a)] * d[i] * col[i];
                }
                v[(a, j)] = acc;
            }
        }
        let sv = &sigma_hat * &v;

        let mut xdy = vec![0.0; p];
        for (j, acc) in xdy.iter_mut().enumerate() {
            let col = x.column(j);
            *acc = col.iter().zip(&yhat).map(|(xi, yi)| xi * yi).sum();
        }

        let xdx = match (formula, m) {
            (XdxFormula::Stable, 1) => {
                // Intercept-only: scale by 1/sqrt(sum d) inside the square so
                // the subtraction cancels information, not precision.
                let sd: f64 = d.iter().sum();
                let inv_root = 1.0 / sd.sqrt();
                let dw: Vec<f64> = d.iter().map(|&di| di * inv_root).collect();
                (0..p)
                    .map(|j| {
                        let col = x.column(j);
                        let mut s1 = 0.0;
                        let mut s2 = 0.0;
                        for i in 0..n {
                            s1 += d[i] * col[i] * col[i];
                            s2 += dw[i] * col[i];
                        }
                        (s1 - s2 * s2).max(0.0)
                    })
                    .collect()
            }
            (XdxFormula::Stable, _) => {
                // General covariates: whiten V with the Cholesky factor of
                // Z'DZ so the subtracted term is a sum of squares.
                let mut w = v.clone();
                for j in 0..p {
                    let mut col: Vec<f64> = w.column(j).iter().copied().collect();
                    forward_solve(&chol, &mut col);
                    for a in 0..m {
                        w[(a, j)] = col[a];
                    }
                }
                (0..p)
                    .map(|j| {
                        let col = x.column(j);
                        let s1: f64 = col.iter().zip(&d).map(|(xi, di)| di * xi * xi).sum();
                        let s2: f64 = w.column(j).iter().map(|wi| wi * wi).sum();
                        (s1 - s2).max(0.0)
                    })
                    .collect()
            }
            (XdxFormula::Naive, 1) => {
                let sd: f64 = d.iter().sum();
                (0..p)
                    .map(|j| {
                        let col = x.column(j);
                        let mut s1 = 0.0;
                        let mut s2 = 0.0;
                        for i in 0..n {
                            s1 += d[i] * col[i] * col[i];
                            s2 += d[i] * col[i];
                        }
                        s1 - s2 * s2 / sd
                    })
                    .collect()
            }
            (XdxFormula::Naive, _) => (0..p)
                .map(|j| {
                    let col = x.column(j);
                    let s1: f64 = col.iter().zip(&d).map(|(xi, di)| di * xi * xi).sum();
                    let s2: f64 = v.column(j).dot(&sv.column(j));
                    s1 - s2
                })
                .collect(),
        };

        Ok(LogisticStats {
            n,
            p,
            m,
            d,
            sigma_hat,
            u_hat,
            yhat,
            xdx,
            xdy,
            v,
            sv,
            logdet_sigma_hat,
            zty_half,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn xdx(&self) -> &[f64] {
        &self.xdx
    }

    pub fn xdy(&self) -> &[f64] {
        &self.xdy
    }

    pub fn u_hat(&self) -> &[f64] {
        &self.u_hat
    }

    pub fn sigma_hat(&self) -> &DMatrix<f64> {
        &self.sigma_hat
    }

    /// Posterior mean of the covariate coefficients given the fitted
    /// variable effects r.
    pub fn covariate_coef(&self, zdxr: &[f64]) -> Vec<f64> {
        let m = self.m;
        (0..m)
            .map(|a| {
                self.u_hat[a]
                    - (0..m)
                        .map(|b| self.sigma_hat[(a, b)] * zdxr[b])
                        .sum::<f64>()
            })
            .collect()
    }
}

/// Running fitted values owned by one grid-point fit: Xr itself and its
/// bound-weighted covariate cross-product Z'D(Xr).
pub struct RunningFit {
    pub xr: Vec<f64>,
    pub zdxr: Vec<f64>,
}

/// Rebuilds the running fitted values from scratch.
pub fn refresh_running(ds: &Dataset, stats: &LogisticStats, state: &VariationalState) -> RunningFit {
    let (n, m) = (stats.n, stats.m);
    let mut xr = vec![0.0; n];
    for j in 0..stats.p {
        let r = state.alpha[j] * state.mu[j];
        if r != 0.0 {
            let col = ds.x().column(j);
            for i in 0..n {
                xr[i] += col[i] * r;
            }
        }
    }
    let mut zdxr = vec![0.0; m];
    for (a, acc) in zdxr.iter_mut().enumerate() {
        for i in 0..n {
            *acc += ds.z()[(i, a)] * stats.d[i] * xr[i];
        }
    }
    RunningFit { xr, zdxr }
}

/// Evidence lower bound at one grid point with the residual variance fixed
/// at 1. The flat-prior covariate constants that are shared by every grid
/// point (and cancel in weights and Bayes factors) are dropped, and the
/// covariate determinant correction is built in, so values are directly
/// comparable across grid points.
pub fn elbo_logistic(
    stats: &LogisticStats,
    state: &VariationalState,
    run: &RunningFit,
    sa2: f64,
    logodds: &[f64],
) -> f64 {
    let eta = state
        .eta
        .as_ref()
        .expect("logistic state carries bound parameters");
    let mut f = 0.5 * stats.logdet_sigma_hat;
    f += 0.5
        * stats
            .u_hat
            .iter()
            .zip(&stats.zty_half)
            .map(|(u, z)| u * z)
            .sum::<f64>();
    for (ei, di) in eta.iter().zip(&stats.d) {
        f += log_sigmoid(*ei) + 0.5 * ei * (di * ei - 1.0);
    }
    f += stats
        .yhat
        .iter()
        .zip(&run.xr)
        .map(|(yi, xi)| yi * xi)
        .sum::<f64>();
    let xr_d_xr: f64 = run
        .xr
        .iter()
        .zip(&stats.d)
        .map(|(xi, di)| di * xi * xi)
        .sum();
    let mut zdxr_s_zdxr = 0.0;
    for a in 0..stats.m {
        for b in 0..stats.m {
            zdxr_s_zdxr += run.zdxr[a] * stats.sigma_hat[(a, b)] * run.zdxr[b];
        }
    }
    f -= 0.5 * (xr_d_xr - zdxr_s_zdxr);
    for i in 0..stats.p {
        let (a, m, s2) = (state.alpha[i], state.mu[i], state.s2[i]);
        f -= 0.5 * stats.xdx[i] * state.effect_variance(i);
        f -= selection_kl(a, LN_10 * logodds[i]);
        f += 0.5 * a * (1.0 + (s2 / sa2).ln() - (s2 + m * m) / sa2);
    }
    f
}

/// One coordinate update of (alpha_i, mu_i, s2_i), keeping the running
/// fitted values current. A variable whose bound-weighted projected variance
/// is zero carries no information at this bound, so it is pinned at the
/// prior with zero mean.
pub fn update_coordinate_logistic(
    i: usize,
    state: &mut VariationalState,
    ds: &Dataset,
    stats: &LogisticStats,
    run: &mut RunningFit,
    sa2: f64,
    logodds_i: f64,
) {
    let r_old = state.alpha[i] * state.mu[i];
    let s2 = 1.0 / (stats.xdx[i] + 1.0 / sa2);
    state.s2[i] = s2;
    if stats.xdx[i] <= 0.0 {
        state.alpha[i] = sigmoid(LN_10 * logodds_i);
        state.mu[i] = 0.0;
    } else {
        let col = ds.x().column(i);
        let mut xd_xr = 0.0;
        for k in 0..stats.n {
            xd_xr += col[k] * stats.d[k] * run.xr[k];
        }
        let mut sv_zdxr = 0.0;
        for a in 0..stats.m {
            sv_zdxr += stats.sv[(a, i)] * run.zdxr[a];
        }
        let cross = xd_xr - sv_zdxr - stats.xdx[i] * r_old;
        let mu = s2 * (stats.xdy[i] - cross);
        let nat = LN_10 * logodds_i + 0.5 * (s2 / sa2).ln() + 0.5 * mu * mu / s2;
        state.mu[i] = mu;
        state.alpha[i] = sigmoid(nat);
    }
    let r_new = state.alpha[i] * state.mu[i];
    if r_new != r_old {
        let delta = r_new - r_old;
        let col = ds.x().column(i);
        for k in 0..stats.n {
            run.xr[k] += col[k] * delta;
        }
        for a in 0..stats.m {
            run.zdxr[a] += stats.v[(a, i)] * delta;
        }
    }
}

/// One full pass of coordinate updates in the given variable order.
pub fn sweep_logistic(
    state: &mut VariationalState,
    ds: &Dataset,
    stats: &LogisticStats,
    run: &mut RunningFit,
    sa2: f64,
    logodds: &[f64],
    order: &[usize],
) {
    for &i in order {
        update_coordinate_logistic(i, state, ds, stats, run, sa2, logodds[i]);
    }
}

/// M-step for the bound parameters: eta_i^2 is the posterior second moment
/// of sample i's linear predictor, assembled as a sum of squares so the
/// radicand cannot go negative except through accumulated rounding, which is
/// clamped; a materially negative value means the state and statistics are
/// inconsistent and is reported as an error.
pub fn update_eta(
    state: &VariationalState,
    ds: &Dataset,
    stats: &LogisticStats,
    run: &RunningFit,
) -> Result<Vec<f64>> {
    let (n, p, m) = (stats.n, stats.p, stats.m);
    let z = ds.z();
    let e_u = stats.covariate_coef(&run.zdxr);

    // Quadratic spread: z_i' Sigma_hat z_i plus the variable-effect variance
    // term sum_j Var_j (x_ij - (Z Sigma_hat V)_ij)^2.
    let mut spread = vec![0.0; n];
    for i in 0..n {
        let mut acc = 0.0;
        for a in 0..m {
            for b in 0..m {
                acc += z[(i, a)] * stats.sigma_hat[(a, b)] * z[(i, b)];
            }
        }
        spread[i] = acc;
    }
    let mut tcol = vec![0.0; n];
    for j in 0..p {
        let var_j = state.effect_variance(j);
        if var_j == 0.0 {
            continue;
        }
        for (i, t) in tcol.iter_mut().enumerate() {
            let mut acc = 0.0;
            for a in 0..m {
                acc += z[(i, a)] * stats.sv[(a, j)];
            }
            *t = acc;
        }
        let col = ds.x().column(j);
        for i in 0..n {
            let dev = col[i] - tcol[i];
            spread[i] += var_j * dev * dev;
        }
    }

    let mut eta = vec![0.0; n];
    for i in 0..n {
        let mut mean = run.xr[i];
        for a in 0..m {
            mean += z[(i, a)] * e_u[a];
        }
        let radicand = mean * mean + spread[i];
        if radicand < -1e-12 {
            return Err(Error::Numerical(format!(
                "negative second moment {radicand} for sample {} in the bound update",
                i + 1
            )));
        }
        eta[i] = radicand.max(0.0).sqrt();
    }
    Ok(eta)
}

/// M-step update of the prior effect scale; the logistic bound fixes the
/// residual variance at 1.
pub fn em_update_sa_logistic(state: &VariationalState, n0: f64, sa0: f64, current: f64) -> f64 {
    crate::linear::em_update_sa(state, 1.0, n0, sa0, current)
}

/// Knobs of a single logistic grid-point fit.
#[derive(Clone, Copy, Debug)]
pub struct InnerOptions {
    pub tol: f64,
    pub maxiter: usize,
    pub update_sa: bool,
    pub optimize_eta: bool,
    pub n0: f64,
    pub sa0: f64,
}

/// Runs the logistic coordinate ascent at one grid point: recompute the
/// bound statistics, sweep all coordinates, re-tighten the bound parameters,
/// update the prior scale, and repeat until the largest change in any
/// inclusion probability falls below `tol`. Sweeps alternate ascending and
/// descending order. Hitting `maxiter` is reported via the `converged` flag.
pub fn fit_inner_logistic(
    ds: &Dataset,
    logodds: &[f64],
    sa2_init: f64,
    init: &VariationalState,
    opts: &InnerOptions,
) -> Result<InnerFit> {
    let p = ds.p();
    let mut state = init.clone();
    if state.eta.is_none() {
        state.eta = Some(vec![1.0; ds.n()]);
    }
    let mut sa2 = sa2_init;
    let ascending: Vec<usize> = (0..p).collect();
    let descending: Vec<usize> = (0..p).rev().collect();

    let mut n_iter = 0;
    let mut converged = false;
    let mut alpha_prev = state.alpha.clone();
    for it in 0..opts.maxiter {
        let stats = LogisticStats::new(ds, state.eta.as_ref().unwrap())?;
        let mut run = refresh_running(ds, &stats, &state);
        let order = if it % 2 == 0 { &ascending } else { &descending };
        sweep_logistic(&mut state, ds, &stats, &mut run, sa2, logodds, order);
        if opts.optimize_eta {
            state.eta = Some(update_eta(&state, ds, &stats, &run)?);
        }
        if opts.update_sa {
            sa2 = em_update_sa_logistic(&state, opts.n0, opts.sa0, sa2);
        }
        n_iter = it + 1;
        let delta = state
            .alpha
            .iter()
            .zip(&alpha_prev)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        if delta < opts.tol {
            converged = true;
            break;
        }
        alpha_prev.copy_from_slice(&state.alpha);
    }

    let stats = LogisticStats::new(ds, state.eta.as_ref().unwrap())?;
    let run = refresh_running(ds, &stats, &state);
    let logw = elbo_logistic(&stats, &state, &run, sa2, logodds);
    let mu_cov = stats.covariate_coef(&run.zdxr);
    Ok(InnerFit {
        state,
        logw,
        sigma2: 1.0,
        sa2,
        mu_cov,
        n_iter,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Family;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn binomial_dataset(n: usize, p: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(n, |i, _| {
            let mut lin = -0.3;
            if p > 0 {
                lin += 1.1 * x[(i, 0)];
            }
            if p > 2 {
                lin -= 0.8 * x[(i, 2)];
            }
            if rng.random::<f64>() < sigmoid(lin) {
                1.0
            } else {
                0.0
            }
        });
        Dataset::new(x, None, y, Family::Binomial).unwrap()
    }

    #[test]
    fn slope_limit_and_frozen_value() {
        assert_abs_diff_eq!(sigmoid_slope(0.0), 0.25, epsilon = 0.0);
        assert_abs_diff_eq!(sigmoid_slope(2.0), 0.1903985389889412, epsilon = 1e-15);
        // Continuous across the series switch: the true curve is within
        // eta/8 of the limit there.
        assert_abs_diff_eq!(sigmoid_slope(1e-8), 0.25, epsilon = 1e-8);
        assert_abs_diff_eq!(sigmoid_slope(2e-8), 0.25, epsilon = 1e-8);
    }

    #[test]
    fn slope_decreases_toward_zero() {
        let mut prev = sigmoid_slope(1e-6);
        for k in 1..200 {
            let eta = 0.1 * k as f64;
            let d = sigmoid_slope(eta);
            assert!(d > 0.0 && d < prev);
            prev = d;
        }
        assert!(sigmoid_slope(1e6) < 1e-6);
    }

    #[test]
    fn bound_is_tight_at_plus_minus_eta() {
        for &eta in &[0.3, 1.3, 4.0] {
            assert_abs_diff_eq!(sigmoid_bound(eta, eta), log_sigmoid(eta), epsilon = 1e-14);
            assert_abs_diff_eq!(sigmoid_bound(-eta, eta), log_sigmoid(-eta), epsilon = 1e-14);
        }
    }

    #[test]
    fn bound_never_exceeds_log_sigmoid() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let x = rng.random::<f64>() * 20.0 - 10.0;
            let eta = rng.random::<f64>() * 20.0 - 10.0;
            assert!(sigmoid_bound(x, eta) <= log_sigmoid(x) + 1e-12);
        }
    }

    #[test]
    fn stats_gram_diagonal_on_centered_column() {
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let y = DVector::from_column_slice(&[1.0, 0.0, 1.0]);
        let ds = Dataset::new(x, None, y, Family::Binomial).unwrap();
        let stats = LogisticStats::new(&ds, &[0.0, 0.0, 0.0]).unwrap();
        // Constant d = 1/4: d*(14 - 36/3) = 2d = 0.5.
        assert_abs_diff_eq!(stats.xdx()[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn balanced_outcome_zeroes_the_covariate_mean() {
        let x = DMatrix::from_column_slice(2, 1, &[0.7, -0.2]);
        let y = DVector::from_column_slice(&[1.0, 0.0]);
        let ds = Dataset::new(x, None, y, Family::Binomial).unwrap();
        let stats = LogisticStats::new(&ds, &[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(stats.u_hat()[0], 0.0, epsilon = 1e-14);
    }

    /// The stable Gram diagonal must agree with an explicit dense build of
    /// X' (D - DZ Sigma_hat Z'D) X.
    #[test]
    fn stable_gram_diagonal_matches_dense_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let n = 50;
        let x = DMatrix::from_fn(n, 8, |_, _| rng.sample::<f64, _>(StandardNormal));
        let z = DMatrix::from_fn(n, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(n, |_, _| if rng.random::<f64>() < 0.5 { 1.0 } else { 0.0 });
        let eta: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 3.0).collect();
        for zopt in [None, Some(z)] {
            let ds = Dataset::new(x.clone(), zopt, y.clone(), Family::Binomial).unwrap();
            let stats = LogisticStats::new(&ds, &eta).unwrap();
            let dmat = DMatrix::from_fn(n, n, |i, j| if i == j { stats.d()[i] } else { 0.0 });
            let zz = ds.z();
            let ztdz = zz.transpose() * &dmat * zz;
            let dhat = &dmat - &dmat * zz * ztdz.try_inverse().unwrap() * zz.transpose() * &dmat;
            let dense = ds.x().transpose() * dhat * ds.x();
            for j in 0..8 {
                let scale = dense[(j, j)].abs().max(1.0);
                assert!(
                    (stats.xdx()[j] - dense[(j, j)]).abs() < 1e-9 * scale,
                    "column {j}: {} vs dense {}",
                    stats.xdx()[j],
                    dense[(j, j)]
                );
            }
        }
    }

    /// With no included variables and the bound parameters chosen optimally,
    /// the bound sits just below the exact intercept-model log evidence.
    #[test]
    fn intercept_model_bound_approaches_exact_evidence() {
        let ds = binomial_dataset(30, 1, 31);
        let logodds = [-40.0];
        let prior = crate::math::prob_from_log10_odds(-40.0);
        let init = VariationalState::initial(&[prior], 1.0, Some(vec![1.0; 30]));
        let opts = InnerOptions {
            tol: 1e-10,
            maxiter: 200,
            update_sa: false,
            optimize_eta: true,
            n0: 0.0,
            sa0: 1.0,
        };
        let fit = fit_inner_logistic(&ds, &logodds, 1.0, &init, &opts).unwrap();

        // Exact: log integral over the intercept of the Bernoulli likelihood
        // under a flat prior, by trapezoid on a wide fine grid. The fitted
        // bound drops the constant (m/2) ln(2 pi) that the flat-prior limit
        // leaves behind (it cancels in every weight and Bayes factor), so the
        // comparator drops it too.
        let sgn: Vec<f64> = ds.y().iter().map(|&v| 2.0 * v - 1.0).collect();
        let loglik = |u: f64| -> f64 { sgn.iter().map(|&s| log_sigmoid(s * u)).sum() };
        let (lo, hi, k) = (-20.0, 20.0, 400_000);
        let h = (hi - lo) / k as f64;
        let mut acc = 0.0;
        for i in 0..=k {
            let w = if i == 0 || i == k { 0.5 } else { 1.0 };
            acc += w * loglik(lo + h * i as f64).exp();
        }
        let exact = acc.ln() + h.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!(fit.logw <= exact + 1e-9, "bound {} above exact {exact}", fit.logw);
        assert!(
            exact - fit.logw < 0.05,
            "bound gap {} unexpectedly large",
            exact - fit.logw
        );
    }

    #[test]
    fn elbo_empty_model_kl_vanishes() {
        let ds = binomial_dataset(20, 3, 37);
        let eta = vec![1.0; 20];
        let stats = LogisticStats::new(&ds, &eta).unwrap();
        let state = VariationalState {
            alpha: vec![0.0; 3],
            mu: vec![0.0; 3],
            s2: vec![1.0; 3],
            eta: Some(eta),
        };
        let run = refresh_running(&ds, &stats, &state);
        let with_tiny_prior = elbo_logistic(&stats, &state, &run, 1.0, &[-300.0; 3]);
        let mut ref_state = state.clone();
        ref_state.s2 = vec![1.0; 3];
        // Selection KL at alpha = 0 under a vanishing prior tends to zero, so
        // the bound equals the no-variables expression.
        let no_vars = {
            let mut f = 0.5 * stats.logdet_sigma_hat;
            f += 0.5
                * stats
                    .u_hat()
                    .iter()
                    .zip(&stats.zty_half)
                    .map(|(u, z)| u * z)
                    .sum::<f64>();
            for (ei, di) in state.eta.as_ref().unwrap().iter().zip(stats.d()) {
                f += log_sigmoid(*ei) + 0.5 * ei * (di * ei - 1.0);
            }
            f
        };
        assert_abs_diff_eq!(with_tiny_prior, no_vars, epsilon = 1e-9);
    }

    #[test]
    fn coordinate_update_examples() {
        let ds = binomial_dataset(10, 1, 41);
        let eta = vec![1.0; 10];
        let mut stats = LogisticStats::new(&ds, &eta).unwrap();
        stats.xdx[0] = 3.0;
        let mut state = VariationalState::initial(&[0.5], 1.0, Some(eta));
        let mut run = refresh_running(&ds, &stats, &state);
        update_coordinate_logistic(0, &mut state, &ds, &stats, &mut run, 0.5, 0.0);
        assert_abs_diff_eq!(state.s2[0], 0.2, epsilon = 1e-15);

        // Degenerate variable: pinned at the prior with zero mean.
        stats.xdx[0] = 0.0;
        update_coordinate_logistic(0, &mut state, &ds, &stats, &mut run, 0.5, 0.3);
        assert_abs_diff_eq!(state.alpha[0], sigmoid(LN_10 * 0.3), epsilon = 1e-15);
        assert_abs_diff_eq!(state.mu[0], 0.0, epsilon = 0.0);
    }

    #[test]
    fn coordinate_updates_never_decrease_the_bound() {
        let ds = binomial_dataset(20, 4, 43);
        let eta = vec![1.0; 20];
        let stats = LogisticStats::new(&ds, &eta).unwrap();
        let logodds = vec![-0.2; 4];
        let prior: Vec<f64> = logodds
            .iter()
            .map(|&l| crate::math::prob_from_log10_odds(l))
            .collect();
        let mut state = VariationalState::initial(&prior, 1.0, Some(eta));
        let mut run = refresh_running(&ds, &stats, &state);
        let sa2 = 1.2;
        let mut f = elbo_logistic(&stats, &state, &run, sa2, &logodds);
        for sweep in 0..4 {
            for i in 0..4 {
                let i = if sweep % 2 == 0 { i } else { 3 - i };
                update_coordinate_logistic(i, &mut state, &ds, &stats, &mut run, sa2, logodds[i]);
                let f2 = elbo_logistic(&stats, &state, &run, sa2, &logodds);
                assert!(
                    f2 >= f - 1e-10,
                    "bound decreased from {f} to {f2} at coordinate {i}"
                );
                f = f2;
            }
        }
    }

    #[test]
    fn eta_update_examples() {
        // Variables carry no posterior mass, so eta reduces to the intercept
        // posterior moments: eta^2 = E[u]^2 + Sigma_hat, identical per row.
        let x = DMatrix::from_fn(6, 1, |i, _| i as f64 - 2.5);
        let y = DVector::from_column_slice(&[1.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
        let ds = Dataset::new(x.clone(), None, y, Family::Binomial).unwrap();
        let eta0 = vec![0.9; 6];
        let stats = LogisticStats::new(&ds, &eta0).unwrap();
        let state = VariationalState {
            alpha: vec![0.0],
            mu: vec![0.0],
            s2: vec![1.0],
            eta: Some(eta0.clone()),
        };
        let run = refresh_running(&ds, &stats, &state);
        let eta = update_eta(&state, &ds, &stats, &run).unwrap();
        let sh = stats.sigma_hat()[(0, 0)];
        let eu = stats.u_hat()[0];
        for e in &eta {
            assert_abs_diff_eq!(*e, (eu * eu + sh).sqrt(), epsilon = 1e-12);
        }

        // Balanced outcome: E[u] = 0 and eta_i = sqrt(z_i' Sigma_hat z_i).
        let yb = DVector::from_column_slice(&[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let dsb = Dataset::new(x, None, yb, Family::Binomial).unwrap();
        let statsb = LogisticStats::new(&dsb, &eta0).unwrap();
        let runb = refresh_running(&dsb, &statsb, &state);
        let etab = update_eta(&state, &dsb, &statsb, &runb).unwrap();
        let shb = statsb.sigma_hat()[(0, 0)];
        for e in &etab {
            assert_abs_diff_eq!(*e, shb.sqrt(), epsilon = 1e-12);
        }
    }

    #[test]
    fn eta_update_never_decreases_the_bound() {
        let ds = binomial_dataset(25, 3, 47);
        let logodds = vec![-0.1; 3];
        let prior: Vec<f64> = logodds
            .iter()
            .map(|&l| crate::math::prob_from_log10_odds(l))
            .collect();
        let mut state = VariationalState::initial(&prior, 1.0, Some(vec![1.0; 25]));
        let sa2 = 0.8;
        for _ in 0..5 {
            let stats = LogisticStats::new(&ds, state.eta.as_ref().unwrap()).unwrap();
            let mut run = refresh_running(&ds, &stats, &state);
            let order: Vec<usize> = (0..3).collect();
            sweep_logistic(&mut state, &ds, &stats, &mut run, sa2, &logodds, &order);
            let before = elbo_logistic(&stats, &state, &run, sa2, &logodds);
            let eta = update_eta(&state, &ds, &stats, &run).unwrap();
            state.eta = Some(eta);
            let stats2 = LogisticStats::new(&ds, state.eta.as_ref().unwrap()).unwrap();
            let run2 = refresh_running(&ds, &stats2, &state);
            let after = elbo_logistic(&stats2, &state, &run2, sa2, &logodds);
            assert!(
                after >= before - 1e-10,
                "bound decreased from {before} to {after} across the eta step"
            );
        }
    }

    #[test]
    fn prior_scale_update_matches_linear_rule() {
        let one = VariationalState {
            alpha: vec![1.0],
            mu: vec![0.4f64.sqrt()],
            s2: vec![0.1],
            eta: None,
        };
        assert_abs_diff_eq!(em_update_sa_logistic(&one, 0.0, 1.0, 7.0), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(
            em_update_sa_logistic(&one, 1e12, 0.3, 7.0),
            0.3,
            epsilon = 1e-9
        );
        let empty = VariationalState {
            alpha: vec![0.0],
            mu: vec![0.0],
            s2: vec![0.1],
            eta: None,
        };
        assert_abs_diff_eq!(em_update_sa_logistic(&empty, 0.0, 1.0, 7.0), 7.0, epsilon = 0.0);
    }

    fn default_inner_opts() -> InnerOptions {
        InnerOptions {
            tol: 1e-8,
            maxiter: 500,
            update_sa: false,
            optimize_eta: true,
            n0: 0.0,
            sa0: 1.0,
        }
    }

    #[test]
    fn inner_fit_converges_and_restarts_at_fixed_point() {
        let ds = binomial_dataset(20, 2, 53);
        let init = VariationalState::initial(&[0.5, 0.5], 1.0, Some(vec![1.0; 20]));
        let fit = fit_inner_logistic(&ds, &[0.0, 0.0], 1.0, &init, &default_inner_opts()).unwrap();
        assert!(fit.converged);
        let again =
            fit_inner_logistic(&ds, &[0.0, 0.0], fit.sa2, &fit.state, &default_inner_opts())
                .unwrap();
        for i in 0..2 {
            assert!((again.state.alpha[i] - fit.state.alpha[i]).abs() < 1e-8);
        }
        assert!(again.n_iter <= 2);
    }

    #[test]
    fn fixed_eta_is_left_alone() {
        let ds = binomial_dataset(15, 2, 59);
        let eta0: Vec<f64> = (0..15).map(|i| 0.5 + 0.1 * i as f64).collect();
        let init = VariationalState::initial(&[0.5, 0.5], 1.0, Some(eta0.clone()));
        let mut opts = default_inner_opts();
        opts.optimize_eta = false;
        let fit = fit_inner_logistic(&ds, &[0.0, 0.0], 1.0, &init, &opts).unwrap();
        assert_eq!(fit.state.eta.as_ref().unwrap(), &eta0);
    }

    #[test]
    fn maxiter_cap_reports_not_converged() {
        let ds = binomial_dataset(30, 5, 61);
        let init = VariationalState::initial(&[0.5; 5], 1.0, None);
        let mut opts = default_inner_opts();
        opts.tol = 1e-14;
        opts.maxiter = 1;
        let fit = fit_inner_logistic(&ds, &[0.0; 5], 1.0, &init, &opts).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.n_iter, 1);
    }

    #[test]
    fn converged_fit_is_stationary_in_the_means() {
        let ds = binomial_dataset(25, 3, 67);
        let logodds = [-0.3, 0.0, 0.2];
        let init = VariationalState::initial(&[0.5; 3], 1.0, None);
        let fit = fit_inner_logistic(&ds, &logodds, 1.3, &init, &default_inner_opts()).unwrap();
        let stats = LogisticStats::new(&ds, fit.state.eta.as_ref().unwrap()).unwrap();
        let h = 1e-5;
        for i in 0..3 {
            let eval = |mu_i: f64| -> f64 {
                let mut st = fit.state.clone();
                st.mu[i] = mu_i;
                let run = refresh_running(&ds, &stats, &st);
                elbo_logistic(&stats, &st, &run, fit.sa2, &logodds)
            };
            let grad = (eval(fit.state.mu[i] + h) - eval(fit.state.mu[i] - h)) / (2.0 * h);
            assert!(grad.abs() < 1e-5, "bound gradient {grad} in mu[{i}]");
        }
    }
}
