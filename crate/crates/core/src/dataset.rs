//! Input validation and the canonical dataset representation.

use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Outcome model family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Gaussian,
    Binomial,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Binomial => "binomial",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Family::Gaussian),
            "binomial" => Ok(Family::Binomial),
            other => Err(Error::Usage(format!(
                "unknown family '{other}' (expected 'gaussian' or 'binomial')"
            ))),
        }
    }
}

/// Validated regression inputs.
///
/// `x` holds the candidate variables that are subject to selection. `z` holds
/// the covariates that are always included; its first column is an intercept
/// of ones inserted by the constructor and never supplied by the caller.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: DMatrix<f64>,
    z: DMatrix<f64>,
    y: DVector<f64>,
    family: Family,
}

fn check_finite(name: &str, data: &DMatrix<f64>) -> Result<()> {
    for j in 0..data.ncols() {
        for i in 0..data.nrows() {
            if !data[(i, j)].is_finite() {
                return Err(Error::Data(format!(
                    "{name}[{}, {}] is not finite",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    Ok(())
}

impl Dataset {
    /// Validates shapes and values and assembles the dataset. The intercept
    /// column is inserted here; a constant column in `z_user` is rejected
    /// because it would duplicate it.
    pub fn new(
        x: DMatrix<f64>,
        z_user: Option<DMatrix<f64>>,
        y: DVector<f64>,
        family: Family,
    ) -> Result<Self> {
        let n = x.nrows();
        let p = x.ncols();
        if n < 2 {
            return Err(Error::Data(format!("need at least 2 samples, got {n}")));
        }
        if p < 1 {
            return Err(Error::Data("X has no columns".into()));
        }
        if y.len() != n {
            return Err(Error::Data(format!(
                "X has {n} rows but y has {} entries",
                y.len()
            )));
        }
        check_finite("X", &x)?;
        for i in 0..n {
            if !y[i].is_finite() {
                return Err(Error::Data(format!("y[{}] is not finite", i + 1)));
            }
        }
        if family == Family::Binomial {
            for i in 0..n {
                if y[i] != 0.0 && y[i] != 1.0 {
                    return Err(Error::Data(format!(
                        "binomial outcome y[{}] = {} is not 0 or 1",
                        i + 1,
                        y[i]
                    )));
                }
            }
        }
        let z = match z_user {
            None => DMatrix::from_element(n, 1, 1.0),
            Some(zu) => {
                if zu.nrows() != n {
                    return Err(Error::Data(format!(
                        "X has {n} rows but Z has {}",
                        zu.nrows()
                    )));
                }
                check_finite("Z", &zu)?;
                for j in 0..zu.ncols() {
                    let col = zu.column(j);
                    if col.iter().all(|&v| v == col[0]) {
                        return Err(Error::Data(format!(
                            "covariate column {} is constant; the intercept is added \
                             automatically and must not be supplied",
                            j + 1
                        )));
                    }
                }
                let mut z = DMatrix::zeros(n, zu.ncols() + 1);
                z.column_mut(0).fill(1.0);
                z.view_mut((0, 1), (n, zu.ncols())).copy_from(&zu);
                z
            }
        };
        Ok(Dataset { x, z, y, family })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Number of candidate variables.
    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Number of covariate columns including the intercept.
    pub fn m(&self) -> usize {
        self.z.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// SHA-256 digest of the full dataset (shapes, family and raw values).
    /// Persisted in archives so that fits can be checked to come from the
    /// same data before they are compared.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update([match self.family {
            Family::Gaussian => 0u8,
            Family::Binomial => 1u8,
        }]);
        for dim in [self.n(), self.p(), self.m()] {
            h.update((dim as u64).to_le_bytes());
        }
        for v in self.x.iter().chain(self.z.iter()).chain(self.y.iter()) {
            h.update(v.to_le_bytes());
        }
        h.finalize().into()
    }

    /// Digest of the X matrix alone, used to recognize a training matrix when
    /// it is later passed to prediction.
    pub fn x_digest(&self) -> [u8; 32] {
        matrix_digest(&self.x)
    }
}

/// SHA-256 digest of a matrix (shape plus raw values).
pub fn matrix_digest(x: &DMatrix<f64>) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((x.nrows() as u64).to_le_bytes());
    h.update((x.ncols() as u64).to_le_bytes());
    for v in x.iter() {
        h.update(v.to_le_bytes());
    }
    h.finalize().into()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xy(n: usize, p: usize) -> (DMatrix<f64>, DVector<f64>) {
        let x = DMatrix::from_fn(n, p, |i, j| (i * p + j) as f64 * 0.1 - 1.0);
        let y = DVector::from_fn(n, |i, _| if i % 2 == 0 { 1.0 } else { 0.0 });
        (x, y)
    }

    #[test]
    fn inserts_intercept_and_keeps_user_covariates() {
        let (x, y) = xy(5, 3);
        let zu = DMatrix::from_fn(5, 2, |i, j| (i + j) as f64 + 0.5 * j as f64);
        let ds = Dataset::new(x, Some(zu.clone()), y, Family::Gaussian).unwrap();
        assert_eq!(ds.m(), 3);
        assert!(ds.z().column(0).iter().all(|&v| v == 1.0));
        assert_eq!(ds.z()[(2, 1)], zu[(2, 0)]);
    }

    #[test]
    fn rejects_constant_user_covariate() {
        let (x, y) = xy(4, 2);
        let zu = DMatrix::from_element(4, 1, 3.0);
        let err = Dataset::new(x, Some(zu), y, Family::Gaussian).unwrap_err();
        assert!(err.to_string().contains("column 1 is constant"));
    }

    #[test]
    fn names_nonfinite_coordinates() {
        let (mut x, y) = xy(4, 2);
        x[(2, 1)] = f64::NAN;
        let err = Dataset::new(x, None, y, Family::Gaussian).unwrap_err();
        assert!(err.to_string().contains("X[3, 2]"));
    }

    #[test]
    fn binomial_outcome_must_be_binary() {
        let (x, mut y) = xy(4, 2);
        y[1] = 0.5;
        let err = Dataset::new(x, None, y, Family::Binomial).unwrap_err();
        assert!(err.to_string().contains("y[2]"));
        let (x, y) = xy(4, 2);
        assert!(Dataset::new(x, None, y, Family::Binomial).is_ok());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let (x, _) = xy(4, 2);
        let y = DVector::from_element(3, 0.0);
        assert!(Dataset::new(x, None, y, Family::Gaussian).is_err());
    }

    #[test]
    fn digest_tracks_content() {
        let (x, y) = xy(5, 2);
        let a = Dataset::new(x.clone(), None, y.clone(), Family::Gaussian).unwrap();
        let b = Dataset::new(x.clone(), None, y.clone(), Family::Gaussian).unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_ne!(
            a.digest(),
            Dataset::new(x.clone(), None, y.clone(), Family::Binomial)
                .unwrap()
                .digest()
        );
        let mut x2 = x;
        x2[(0, 0)] += 1e-9;
        assert_ne!(
            a.digest(),
            Dataset::new(x2, None, y, Family::Gaussian).unwrap().digest()
        );
    }
}
