//! Containers for fitted models.

use nalgebra::DMatrix;

use crate::dataset::Family;
use crate::error::{Error, Result};
use crate::grid::HyperGrid;

/// Variational parameters of one grid-point fit.
///
/// `alpha[i]` is the posterior inclusion probability of variable i, and
/// `mu[i]`/`s2[i]` are the mean and variance of its effect conditional on
/// inclusion. Binomial fits also carry the per-sample approximation factors
/// `eta` that shape the quadratic bound on the logistic likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalState {
    pub alpha: Vec<f64>,
    pub mu: Vec<f64>,
    pub s2: Vec<f64>,
    pub eta: Option<Vec<f64>>,
}

impl VariationalState {
    /// Fresh state used at the start of coordinate ascent: inclusion
    /// probabilities at the prior, zero means, prior-scale variances.
    pub fn initial(prior_prob: &[f64], s2_init: f64, eta: Option<Vec<f64>>) -> Self {
        VariationalState {
            alpha: prior_prob.to_vec(),
            mu: vec![0.0; prior_prob.len()],
            s2: vec![s2_init; prior_prob.len()],
            eta,
        }
    }

    pub fn p(&self) -> usize {
        self.alpha.len()
    }

    /// Posterior mean effects alpha[i] * mu[i].
    pub fn posterior_mean(&self) -> Vec<f64> {
        self.alpha
            .iter()
            .zip(&self.mu)
            .map(|(a, m)| a * m)
            .collect()
    }

    /// Posterior variance of each effect under the spike-and-slab mixture.
    pub fn effect_variance(&self, i: usize) -> f64 {
        let a = self.alpha[i];
        let m = self.mu[i];
        a * (self.s2[i] + m * m) - (a * m) * (a * m)
    }

    /// Checks the representation invariants.
    pub fn validate(&self) -> Result<()> {
        let p = self.alpha.len();
        if self.mu.len() != p || self.s2.len() != p {
            return Err(Error::Data("variational state arrays disagree in length".into()));
        }
        for i in 0..p {
            if !(self.alpha[i] >= 0.0 && self.alpha[i] <= 1.0) {
                return Err(Error::Numerical(format!(
                    "inclusion probability {} out of [0,1] at variable {}",
                    self.alpha[i],
                    i + 1
                )));
            }
            if !(self.s2[i] > 0.0 && self.s2[i].is_finite()) || !self.mu[i].is_finite() {
                return Err(Error::Numerical(format!(
                    "degenerate effect distribution at variable {}",
                    i + 1
                )));
            }
        }
        if let Some(eta) = &self.eta {
            if eta.iter().any(|e| !e.is_finite()) {
                return Err(Error::Numerical("non-finite approximation factor".into()));
            }
        }
        Ok(())
    }
}

/// Result of one grid-point coordinate ascent run, produced by the family
/// engines and assembled into a [`GridFit`] by the driver.
#[derive(Debug, Clone)]
pub struct InnerFit {
    pub state: VariationalState,
    /// Log evidence contribution of the grid point, including the covariate
    /// correction, directly comparable across grid points.
    pub logw: f64,
    /// Residual variance (always 1 for binomial fits).
    pub sigma2: f64,
    pub sa2: f64,
    /// Posterior mean of the covariate coefficients.
    pub mu_cov: Vec<f64>,
    pub n_iter: usize,
    pub converged: bool,
}

/// Per-grid-point results of the coordinate ascent runs.
#[derive(Debug, Clone)]
pub struct GridFit {
    pub states: Vec<VariationalState>,
    /// Evidence lower bound of each grid point (the quantity the weights
    /// normalize).
    pub logw: Vec<f64>,
    /// Residual variance per grid point (1.0 throughout for binomial).
    pub sigma: Vec<f64>,
    /// Prior effect-scale per grid point.
    pub sa: Vec<f64>,
    /// Covariate coefficient means, one column per grid point.
    pub mu_cov: DMatrix<f64>,
    pub converged: Vec<bool>,
    pub n_iter: Vec<usize>,
}

impl GridFit {
    pub fn n_points(&self) -> usize {
        self.logw.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.logw.len();
        if self.states.len() != k
            || self.sigma.len() != k
            || self.sa.len() != k
            || self.mu_cov.ncols() != k
            || self.converged.len() != k
            || self.n_iter.len() != k
        {
            return Err(Error::Data("grid fit arrays disagree in length".into()));
        }
        if let Some(bad) = self.logw.iter().find(|w| !w.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite evidence bound {bad} in grid fit"
            )));
        }
        for st in &self.states {
            st.validate()?;
        }
        Ok(())
    }
}

/// Fully resolved fitting settings, echoed into the fitted model so archives
/// and summaries can report exactly what was run.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSettings {
    pub tol: f64,
    pub maxiter: usize,
    pub update_sigma: bool,
    pub update_sa: bool,
    pub optimize_eta: bool,
    pub initialize_params: bool,
    pub n0: f64,
    pub sa0: f64,
    pub nr: usize,
    pub seed: u64,
}

/// A complete fitted model: the grid of variational fits plus everything
/// aggregated across the grid.
#[derive(Debug, Clone)]
pub struct ModelFit {
    pub family: Family,
    pub n: usize,
    pub p: usize,
    pub m: usize,
    pub dataset_digest: [u8; 32],
    pub x_digest: [u8; 32],
    pub settings: FitSettings,
    pub grid: HyperGrid,
    pub fits: GridFit,
    /// Normalized grid-point weights.
    pub w: Vec<f64>,
    /// Weighted posterior inclusion probability per variable.
    pub pip: Vec<f64>,
    /// Weighted posterior mean effect per variable.
    pub beta_mean: Vec<f64>,
    /// Per-variable, per-grid-point proportion of outcome variance explained
    /// conditional on inclusion (linear models only).
    pub pve: Option<DMatrix<f64>>,
    /// Monte Carlo draws of the whole-model proportion of variance explained
    /// (linear models only).
    pub model_pve: Option<Vec<f64>>,
    /// Variable names for reporting; defaults to X1..Xp.
    pub names: Vec<String>,
}

/// Default variable names X1..Xp used when the data came without a header.
pub fn default_names(p: usize) -> Vec<String> {
    (1..=p).map(|i| format!("X{i}")).collect()
}

impl ModelFit {
    pub fn n_grid_points(&self) -> usize {
        self.fits.n_points()
    }

    /// Evidence bound of the best grid point.
    pub fn max_logw(&self) -> f64 {
        self.fits.logw.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_validation_catches_degenerate_entries() {
        let mut st = VariationalState::initial(&[0.5, 0.5], 1.0, None);
        assert!(st.validate().is_ok());
        st.alpha[1] = 1.5;
        assert!(st.validate().is_err());
        st.alpha[1] = 0.5;
        st.s2[0] = 0.0;
        assert!(st.validate().is_err());
    }

    #[test]
    fn effect_variance_matches_mixture_moments() {
        let st = VariationalState {
            alpha: vec![0.25],
            mu: vec![2.0],
            s2: vec![3.0],
            eta: None,
        };
        // E[b^2] - E[b]^2 with E[b^2] = a(s2 + mu^2), E[b] = a mu.
        let want = 0.25 * (3.0 + 4.0) - (0.25 * 2.0) * (0.25 * 2.0);
        assert!((st.effect_variance(0) - want).abs() < 1e-15);
        assert_eq!(st.posterior_mean(), vec![0.5]);
    }

    #[test]
    fn default_names_are_one_based() {
        assert_eq!(default_names(3), vec!["X1", "X2", "X3"]);
    }
}
