//! Out-of-sample prediction from a fitted model.
//!
//! Predictions average the per-grid-point fitted values by the grid weights.
//! For the linear family that collapses to a single linear predictor; for
//! the binomial family each grid point's success probability is averaged,
//! which is not the same as squashing the averaged linear predictor.

use nalgebra::{DMatrix, DVector};

use crate::dataset::Family;
use crate::error::{Error, Result};
use crate::math::sigmoid;
use crate::model::ModelFit;

/// Class probabilities and hard labels for binomial predictions.
pub struct LogisticPrediction {
    /// Grid-averaged probability of class 1 per sample.
    pub prob: Vec<f64>,
    /// 1 where `prob` exceeds one half, 0 otherwise (a tie is labeled 0).
    pub label: Vec<u8>,
}

/// Checks the prediction inputs against the fitted dimensions and returns
/// the covariate matrix with the intercept column prepended.
fn prepare_inputs(
    fit: &ModelFit,
    x: &DMatrix<f64>,
    z_user: Option<&DMatrix<f64>>,
) -> Result<DMatrix<f64>> {
    if x.ncols() != fit.p {
        return Err(Error::Data(format!(
            "the model was fit with {} variables but the prediction input has {} columns",
            fit.p,
            x.ncols()
        )));
    }
    let user_cols = z_user.map_or(0, |z| z.ncols());
    if user_cols != fit.m - 1 {
        return Err(Error::Data(format!(
            "the model was fit with {} covariates beyond the intercept but {} were supplied",
            fit.m - 1,
            user_cols
        )));
    }
    if let Some(z) = z_user {
        if z.nrows() != x.nrows() {
            return Err(Error::Data(format!(
                "variable rows ({}) and covariate rows ({}) disagree",
                x.nrows(),
                z.nrows()
            )));
        }
        if let Some(pos) = z.iter().position(|v| !v.is_finite()) {
            let (i, j) = (pos % z.nrows() + 1, pos / z.nrows() + 1);
            return Err(Error::Data(format!(
                "covariate entry at row {i}, column {j} is not finite"
            )));
        }
    }
    if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
        let (i, j) = (pos % x.nrows() + 1, pos / x.nrows() + 1);
        return Err(Error::Data(format!(
            "variable entry at row {i}, column {j} is not finite"
        )));
    }
    let mut z = DMatrix::from_element(x.nrows(), fit.m, 1.0);
    if let Some(zu) = z_user {
        for j in 0..zu.ncols() {
            z.set_column(j + 1, &zu.column(j));
        }
    }
    Ok(z)
}

/// Predicted outcomes under a linear-family fit: the weighted average over
/// grid points of `Z mu_cov + X (alpha .* mu)`. Pass covariates beyond the
/// intercept in `z_user`; the intercept itself is added here.
pub fn predict_linear(
    fit: &ModelFit,
    x: &DMatrix<f64>,
    z_user: Option<&DMatrix<f64>>,
) -> Result<Vec<f64>> {
    if fit.family != Family::Gaussian {
        return Err(Error::Usage(
            "predict_linear needs a gaussian-family fit".into(),
        ));
    }
    let z = prepare_inputs(fit, x, z_user)?;
    // The average of per-point linear predictors is the linear predictor of
    // the averaged coefficients.
    let mut cov_bar = DVector::zeros(fit.m);
    for (j, &wj) in fit.w.iter().enumerate() {
        cov_bar += wj * fit.fits.mu_cov.column(j);
    }
    let beta = DVector::from_column_slice(&fit.beta_mean);
    let yhat = z * cov_bar + x * beta;
    Ok(yhat.iter().copied().collect())
}

/// Predicted class-1 probabilities and labels under a binomial-family fit.
pub fn predict_logistic(
    fit: &ModelFit,
    x: &DMatrix<f64>,
    z_user: Option<&DMatrix<f64>>,
) -> Result<LogisticPrediction> {
    if fit.family != Family::Binomial {
        return Err(Error::Usage(
            "predict_logistic needs a binomial-family fit".into(),
        ));
    }
    let z = prepare_inputs(fit, x, z_user)?;
    let n = x.nrows();
    let mut prob = vec![0.0f64; n];
    for (j, &wj) in fit.w.iter().enumerate() {
        let st = &fit.fits.states[j];
        let r = DVector::from_fn(fit.p, |i, _| st.alpha[i] * st.mu[i]);
        let lin = &z * fit.fits.mu_cov.column(j) + x * r;
        for (acc, l) in prob.iter_mut().zip(lin.iter()) {
            *acc += wj * sigmoid(*l);
        }
    }
    let label = prob.iter().map(|&pr| u8::from(pr > 0.5)).collect();
    Ok(LogisticPrediction { prob, label })
}
