//! Synthetic dataset generation for benchmarks and end-to-end checks.
//!
//! Designs are standard normal, optionally with equicorrelated blocks. A
//! requested number of causal variables get random-sign effects, scaled so
//! the generative proportion of variance explained hits the target exactly
//! in the realized design (for the binomial family the target applies on
//! the latent logistic scale, where the noise variance is pi^2 / 3).

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::Family;
use crate::error::{Error, Result};
use crate::math::{sigmoid, variance_n};

use super::table::write_text;

/// What to simulate.
#[derive(Clone, Copy, Debug)]
pub struct SimulateSpec {
    pub n: usize,
    pub p: usize,
    pub n_causal: usize,
    /// Target proportion of variance explained, strictly inside (0, 1).
    pub pve: f64,
    pub family: Family,
    pub seed: u64,
    /// Pairwise correlation within consecutive blocks of columns; 0 gives
    /// an independent design.
    pub corr: f64,
    pub block_size: usize,
}

/// A simulated dataset with its generating truth.
pub struct Simulated {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    /// Causal variables as (zero-based index, effect) in index order.
    pub causal: Vec<(usize, f64)>,
}

/// Draws a dataset. Deterministic given the spec.
pub fn simulate(spec: &SimulateSpec) -> Result<Simulated> {
    if spec.n < 2 || spec.p == 0 {
        return Err(Error::Usage(format!(
            "need at least 2 samples and 1 variable, got n = {}, p = {}",
            spec.n, spec.p
        )));
    }
    if spec.n_causal > spec.p {
        return Err(Error::Usage(format!(
            "cannot place {} causal variables among {}",
            spec.n_causal, spec.p
        )));
    }
    if !(spec.pve > 0.0 && spec.pve < 1.0) {
        return Err(Error::Usage(format!(
            "pve target must be strictly between 0 and 1, got {}",
            spec.pve
        )));
    }
    if !(0.0..1.0).contains(&spec.corr) {
        return Err(Error::Usage(format!(
            "block correlation must be in [0, 1), got {}",
            spec.corr
        )));
    }
    if spec.corr > 0.0 && spec.block_size == 0 {
        return Err(Error::Usage("block size must be positive".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (n, p) = (spec.n, spec.p);
    let x = if spec.corr > 0.0 {
        let bs = spec.block_size;
        let n_blocks = p.div_ceil(bs);
        let factors = DMatrix::from_fn(n, n_blocks, |_, _| rng.sample::<f64, _>(StandardNormal));
        let shared = spec.corr.sqrt();
        let own = (1.0 - spec.corr).sqrt();
        DMatrix::from_fn(n, p, |i, j| {
            shared * factors[(i, j / bs)] + own * rng.sample::<f64, _>(StandardNormal)
        })
    } else {
        DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal))
    };

    // Partial Fisher-Yates draw of the causal set.
    let mut pool: Vec<usize> = (0..p).collect();
    for i in 0..spec.n_causal {
        let k = rng.random_range(i..p);
        pool.swap(i, k);
    }
    let mut chosen = pool[..spec.n_causal].to_vec();
    chosen.sort_unstable();

    let mut beta = vec![0.0f64; p];
    for &i in &chosen {
        beta[i] = if rng.random::<f64>() < 0.5 { -1.0 } else { 1.0 };
    }
    let signal = &x * DVector::from_column_slice(&beta);
    let noise_var = match spec.family {
        Family::Gaussian => 1.0,
        Family::Binomial => PI * PI / 3.0,
    };
    if spec.n_causal > 0 {
        let realized = variance_n(signal.as_slice());
        if realized <= 0.0 {
            return Err(Error::Numerical(
                "the simulated signal is degenerate; try another seed".into(),
            ));
        }
        // Scale the effects so var(X beta) / (var(X beta) + noise) is the
        // target exactly in this realized design.
        let scale = (spec.pve / (1.0 - spec.pve) * noise_var / realized).sqrt();
        for b in beta.iter_mut() {
            *b *= scale;
        }
    }
    let signal = &x * DVector::from_column_slice(&beta);

    let y = match spec.family {
        Family::Gaussian => {
            DVector::from_fn(n, |i, _| signal[i] + rng.sample::<f64, _>(StandardNormal))
        }
        Family::Binomial => DVector::from_fn(n, |i, _| {
            f64::from(rng.random::<f64>() < sigmoid(signal[i]))
        }),
    };

    let causal = chosen.into_iter().map(|i| (i, beta[i])).collect();
    Ok(Simulated { x, y, causal })
}

/// Writes `<prefix>.x.csv`, `<prefix>.y.csv` and `<prefix>.truth.csv` and
/// returns their paths.
pub fn write_simulated(prefix: &Path, sim: &Simulated) -> Result<(PathBuf, PathBuf, PathBuf)> {
    let with_suffix = |suffix: &str| -> PathBuf {
        let mut name = prefix.as_os_str().to_os_string();
        name.push(suffix);
        PathBuf::from(name)
    };
    let x_path = with_suffix(".x.csv");
    let y_path = with_suffix(".y.csv");
    let truth_path = with_suffix(".truth.csv");

    let p = sim.x.ncols();
    let mut x_text = (1..=p)
        .map(|j| format!("X{j}"))
        .collect::<Vec<_>>()
        .join(",");
    x_text.push('\n');
    for i in 0..sim.x.nrows() {
        let row = (0..p)
            .map(|j| sim.x[(i, j)].to_string())
            .collect::<Vec<_>>()
            .join(",");
        x_text.push_str(&row);
        x_text.push('\n');
    }
    write_text(&x_path, &x_text)?;

    let mut y_text = String::from("y\n");
    for v in sim.y.iter() {
        y_text.push_str(&v.to_string());
        y_text.push('\n');
    }
    write_text(&y_path, &y_text)?;

    let mut truth = String::from("index,name,effect\n");
    for &(i, b) in &sim.causal {
        truth.push_str(&format!("{},X{},{b}\n", i + 1, i + 1));
    }
    write_text(&truth_path, &truth)?;

    Ok((x_path, y_path, truth_path))
}
