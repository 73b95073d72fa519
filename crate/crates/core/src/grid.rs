//! Hyperparameter grids and prior log-odds specifications.

use nalgebra::DMatrix;

use crate::dataset::Family;
use crate::error::{Error, Result};

/// A hyperparameter that is either pinned to one value per grid point or
/// estimated at every grid point.
#[derive(Debug, Clone, PartialEq)]
pub enum HyperSetting {
    Fixed(Vec<f64>),
    Estimate,
}

/// Prior inclusion log-odds (base 10), either one value per grid point shared
/// by all variables, or a full variables-by-grid-points matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum LogOddsGrid {
    Shared(Vec<f64>),
    PerVariable(DMatrix<f64>),
}

/// The grid of hyperparameter settings that the model average runs over.
///
/// Every grid point j pairs `logodds` column j with `sigma[j]`/`sa[j]` (when
/// fixed); `Estimate` marks a hyperparameter that is refined by closed-form
/// updates independently at each grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperGrid {
    pub sigma: HyperSetting,
    pub sa: HyperSetting,
    pub logodds: LogOddsGrid,
}

impl HyperGrid {
    /// Grid with `sigma` and `sa` estimated and the default log-odds ladder.
    pub fn default_for(p: usize) -> Self {
        HyperGrid {
            sigma: HyperSetting::Estimate,
            sa: HyperSetting::Estimate,
            logodds: LogOddsGrid::Shared(default_logodds(p)),
        }
    }

    /// Number of grid points.
    pub fn n_points(&self) -> usize {
        match &self.logodds {
            LogOddsGrid::Shared(v) => v.len(),
            LogOddsGrid::PerVariable(m) => m.ncols(),
        }
    }

    /// The base-10 log-odds of every variable at grid point `j`.
    pub fn logodds_column(&self, j: usize, p: usize) -> Vec<f64> {
        match &self.logodds {
            LogOddsGrid::Shared(v) => vec![v[j]; p],
            LogOddsGrid::PerVariable(m) => m.column(j).iter().copied().collect(),
        }
    }

    /// Checks internal consistency against the dataset dimensions.
    pub fn validate(&self, p: usize, family: Family) -> Result<()> {
        let n_s = self.n_points();
        if n_s == 0 {
            return Err(Error::Usage("hyperparameter grid is empty".into()));
        }
        match &self.logodds {
            LogOddsGrid::Shared(v) => {
                if let Some(bad) = v.iter().find(|lo| !lo.is_finite()) {
                    return Err(Error::Usage(format!("log-odds value {bad} is not finite")));
                }
            }
            LogOddsGrid::PerVariable(m) => {
                if m.nrows() != p {
                    return Err(Error::Usage(format!(
                        "per-variable log-odds has {} rows but the data has {p} variables",
                        m.nrows()
                    )));
                }
                if let Some(bad) = m.iter().find(|lo| !lo.is_finite()) {
                    return Err(Error::Usage(format!("log-odds value {bad} is not finite")));
                }
            }
        }
        for (name, setting) in [("sigma", &self.sigma), ("sa", &self.sa)] {
            if let HyperSetting::Fixed(vals) = setting {
                if vals.len() != n_s {
                    return Err(Error::Usage(format!(
                        "{name} has {} values but the grid has {n_s} points",
                        vals.len()
                    )));
                }
                if let Some(bad) = vals.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                    return Err(Error::Usage(format!(
                        "{name} values must be positive and finite, got {bad}"
                    )));
                }
            }
        }
        if family == Family::Binomial {
            if let HyperSetting::Fixed(vals) = &self.sigma {
                if vals.iter().any(|&v| v != 1.0) {
                    return Err(Error::Usage(
                        "the residual variance is fixed at 1 for binomial models".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Default ladder of 20 equally spaced base-10 prior log-odds running from
/// -log10(p) (about one variable expected a priori) up to -1. For p <= 10 the
/// lower endpoint would exceed -1, so every point collapses to -1.
pub fn default_logodds(p: usize) -> Vec<f64> {
    let hi = -1.0;
    let lo = (-(p as f64).log10()).min(hi);
    let k = 20;
    (0..k)
        .map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64)
        .collect()
}

/// Expands an inclusive arithmetic grid `lo, lo+step, ..., hi`.
///
/// The span must be an integer multiple of the step (to within a 1e-9
/// relative rounding allowance); otherwise the specification is rejected
/// rather than silently truncated.
pub fn parse_grid_spec(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite() && step.is_finite()) {
        return Err(Error::Usage("grid bounds and step must be finite".into()));
    }
    if step <= 0.0 {
        return Err(Error::Usage(format!("grid step must be positive, got {step}")));
    }
    if hi < lo {
        return Err(Error::Usage(format!(
            "grid upper bound {hi} is below lower bound {lo}"
        )));
    }
    let span = hi - lo;
    let k = (span / step).round();
    if (k * step - span).abs() > 1e-9 * step.max(span) {
        return Err(Error::Usage(format!(
            "grid span {span} is not a whole number of steps of {step}"
        )));
    }
    let k = k as usize;
    let mut out: Vec<f64> = (0..=k).map(|i| lo + step * i as f64).collect();
    // Pin the final point to the requested bound exactly.
    out[k] = hi;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn default_ladder_has_twenty_nondecreasing_points() {
        for &p in &[1usize, 3, 10, 100, 3571, 100_000] {
            let v = default_logodds(p);
            assert_eq!(v.len(), 20);
            assert!(v.windows(2).all(|w| w[0] <= w[1]));
            assert_abs_diff_eq!(v[19], -1.0, epsilon = 1e-12);
        }
        let v = default_logodds(3571);
        assert_abs_diff_eq!(v[0], -3.5528, epsilon = 1e-4);
        assert!(default_logodds(10).iter().all(|&x| x == -1.0));
    }

    #[test]
    fn grid_spec_counts_and_endpoints() {
        let g = parse_grid_spec(-6.0, -3.0, 0.25).unwrap();
        assert_eq!(g.len(), 13);
        assert_eq!(g[0], -6.0);
        assert_eq!(g[12], -3.0);
        let g = parse_grid_spec(-5.0, -3.0, 0.25).unwrap();
        assert_eq!(g.len(), 9);
        let g = parse_grid_spec(2.0, 2.0, 0.5).unwrap();
        assert_eq!(g, vec![2.0]);
    }

    #[test]
    fn grid_spec_rejects_bad_inputs() {
        assert!(parse_grid_spec(-6.0, -3.0, 0.0).is_err());
        assert!(parse_grid_spec(-6.0, -3.0, -0.25).is_err());
        assert!(parse_grid_spec(-3.0, -6.0, 0.25).is_err());
        assert!(parse_grid_spec(0.0, 1.0, 0.3).is_err());
    }

    #[test]
    fn validate_checks_lengths_and_positivity() {
        let grid = HyperGrid {
            sigma: HyperSetting::Fixed(vec![1.0, 2.0]),
            sa: HyperSetting::Estimate,
            logodds: LogOddsGrid::Shared(vec![-2.0, -1.0]),
        };
        assert!(grid.validate(5, Family::Gaussian).is_ok());

        let bad_len = HyperGrid {
            sigma: HyperSetting::Fixed(vec![1.0]),
            ..grid.clone()
        };
        assert!(bad_len.validate(5, Family::Gaussian).is_err());

        let bad_sign = HyperGrid {
            sigma: HyperSetting::Fixed(vec![1.0, -2.0]),
            ..grid.clone()
        };
        assert!(bad_sign.validate(5, Family::Gaussian).is_err());

        assert!(grid.validate(5, Family::Binomial).is_err());

        let pervar = HyperGrid {
            sigma: HyperSetting::Estimate,
            sa: HyperSetting::Estimate,
            logodds: LogOddsGrid::PerVariable(DMatrix::from_element(4, 3, -1.0)),
        };
        assert!(pervar.validate(4, Family::Gaussian).is_ok());
        assert!(pervar.validate(5, Family::Gaussian).is_err());
    }
}
