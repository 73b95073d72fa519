//! Binary persistence of fitted models.
//!
//! A fit archive is a single self-describing container: leading magic, a
//! format version, fixed-width little-endian integers and 64-bit floats,
//! then trailing magic. Numeric payloads round-trip bitwise, so a reloaded
//! fit predicts and summarizes exactly like the original. Text reports are
//! derived views of this container, never the source of truth.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::dataset::Family;
use crate::error::{Error, Result};
use crate::grid::{HyperGrid, HyperSetting, LogOddsGrid};
use crate::model::{FitSettings, GridFit, ModelFit, VariationalState};

const MAGIC: &[u8; 8] = b"VSELFIT\0";
const END_MAGIC: &[u8; 8] = b"VSELEND\0";
const FORMAT_VERSION: u32 = 1;

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Self {
        Writer { buf: Vec::new() }
    }
    fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn flag(&mut self, v: bool) {
        self.u8(u8::from(v));
    }
    fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.bytes(&v.to_le_bytes());
    }
    fn f64s(&mut self, vs: &[f64]) {
        self.u64(vs.len() as u64);
        for &v in vs {
            self.f64(v);
        }
    }
    fn matrix(&mut self, m: &DMatrix<f64>) {
        self.u64(m.nrows() as u64);
        self.u64(m.ncols() as u64);
        for v in m.iter() {
            self.f64(*v);
        }
    }
    fn string(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.bytes(s.as_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: String,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8], path: String) -> Self {
        Reader { buf, pos: 0, path }
    }
    fn truncated(&self) -> Error {
        Error::Data(format!("{}: archive is truncated", self.path))
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(self.truncated());
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn flag(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(Error::Data(format!(
                "{}: invalid flag byte {v} in archive",
                self.path
            ))),
        }
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v)
            .map_err(|_| Error::Data(format!("{}: size field {v} is out of range", self.path)))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.usize()?;
        self.f64_block(n)
    }
    fn f64_block(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| self.truncated())?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
    fn matrix(&mut self) -> Result<DMatrix<f64>> {
        let nrows = self.usize()?;
        let ncols = self.usize()?;
        let vals = self.f64_block(nrows.checked_mul(ncols).ok_or_else(|| self.truncated())?)?;
        Ok(DMatrix::from_column_slice(nrows, ncols, &vals))
    }
    fn string(&mut self) -> Result<String> {
        let n = self.usize()?;
        let raw = self.take(n)?;
        String::from_utf8(raw.to_vec())
            .map_err(|_| Error::Data(format!("{}: archive contains invalid text", self.path)))
    }
}

fn write_setting(w: &mut Writer, s: &HyperSetting) {
    match s {
        HyperSetting::Fixed(vals) => {
            w.u8(0);
            w.f64s(vals);
        }
        HyperSetting::Estimate => w.u8(1),
    }
}

fn read_setting(r: &mut Reader) -> Result<HyperSetting> {
    match r.u8()? {
        0 => Ok(HyperSetting::Fixed(r.f64s()?)),
        1 => Ok(HyperSetting::Estimate),
        v => Err(Error::Data(format!(
            "{}: unknown hyperparameter tag {v}",
            r.path
        ))),
    }
}

/// Writes a fitted model to `path`.
pub fn save_fit(path: &Path, fit: &ModelFit) -> Result<()> {
    let mut w = Writer::new();
    w.bytes(MAGIC);
    w.u32(FORMAT_VERSION);
    w.u8(match fit.family {
        Family::Gaussian => 0,
        Family::Binomial => 1,
    });
    w.u64(fit.n as u64);
    w.u64(fit.p as u64);
    w.u64(fit.m as u64);
    let n_s = fit.n_grid_points();
    w.u64(n_s as u64);
    w.bytes(&fit.dataset_digest);
    w.bytes(&fit.x_digest);

    let s = &fit.settings;
    w.f64(s.tol);
    w.u64(s.maxiter as u64);
    w.flag(s.update_sigma);
    w.flag(s.update_sa);
    w.flag(s.optimize_eta);
    w.flag(s.initialize_params);
    w.f64(s.n0);
    w.f64(s.sa0);
    w.u64(s.nr as u64);
    w.u64(s.seed);

    write_setting(&mut w, &fit.grid.sigma);
    write_setting(&mut w, &fit.grid.sa);
    match &fit.grid.logodds {
        LogOddsGrid::Shared(vals) => {
            w.u8(0);
            w.f64s(vals);
        }
        LogOddsGrid::PerVariable(m) => {
            w.u8(1);
            w.matrix(m);
        }
    }

    w.u64(fit.names.len() as u64);
    for name in &fit.names {
        w.string(name);
    }

    w.f64s(&fit.fits.logw);
    w.f64s(&fit.fits.sigma);
    w.f64s(&fit.fits.sa);
    for &c in &fit.fits.converged {
        w.flag(c);
    }
    for &it in &fit.fits.n_iter {
        w.u64(it as u64);
    }

    let has_eta = fit.fits.states.first().is_some_and(|st| st.eta.is_some());
    w.flag(has_eta);
    for st in &fit.fits.states {
        for &v in &st.alpha {
            w.f64(v);
        }
        for &v in &st.mu {
            w.f64(v);
        }
        for &v in &st.s2 {
            w.f64(v);
        }
        if has_eta {
            for &v in st.eta.as_ref().expect("all states carry eta together") {
                w.f64(v);
            }
        }
    }
    w.matrix(&fit.fits.mu_cov);

    w.f64s(&fit.w);
    w.f64s(&fit.pip);
    w.f64s(&fit.beta_mean);
    match &fit.pve {
        Some(m) => {
            w.u8(1);
            w.matrix(m);
        }
        None => w.u8(0),
    }
    match &fit.model_pve {
        Some(vs) => {
            w.u8(1);
            w.f64s(vs);
        }
        None => w.u8(0),
    }
    w.bytes(END_MAGIC);

    fs::write(path, &w.buf).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads a fitted model back from `path`.
pub fn load_fit(path: &Path) -> Result<ModelFit> {
    let buf = fs::read(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let shown = path.display().to_string();
    let mut r = Reader::new(&buf, shown.clone());

    if r.take(8)? != MAGIC {
        return Err(Error::Data(format!("{shown}: not a fit archive (bad magic)")));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Data(format!(
            "{shown}: unsupported archive version {version} (this build reads version {FORMAT_VERSION})"
        )));
    }
    let family = match r.u8()? {
        0 => Family::Gaussian,
        1 => Family::Binomial,
        v => return Err(Error::Data(format!("{shown}: unknown family tag {v}"))),
    };
    let n = r.usize()?;
    let p = r.usize()?;
    let m = r.usize()?;
    let n_s = r.usize()?;
    let dataset_digest: [u8; 32] = r.take(32)?.try_into().unwrap();
    let x_digest: [u8; 32] = r.take(32)?.try_into().unwrap();

    let settings = FitSettings {
        tol: r.f64()?,
        maxiter: r.usize()?,
        update_sigma: r.flag()?,
        update_sa: r.flag()?,
        optimize_eta: r.flag()?,
        initialize_params: r.flag()?,
        n0: r.f64()?,
        sa0: r.f64()?,
        nr: r.usize()?,
        seed: r.u64()?,
    };

    let sigma_setting = read_setting(&mut r)?;
    let sa_setting = read_setting(&mut r)?;
    let logodds = match r.u8()? {
        0 => LogOddsGrid::Shared(r.f64s()?),
        1 => LogOddsGrid::PerVariable(r.matrix()?),
        v => return Err(Error::Data(format!("{shown}: unknown log-odds tag {v}"))),
    };
    let grid = HyperGrid {
        sigma: sigma_setting,
        sa: sa_setting,
        logodds,
    };

    let n_names = r.usize()?;
    if n_names != p {
        return Err(Error::Data(format!(
            "{shown}: archive names {n_names} variables but declares p = {p}"
        )));
    }
    let mut names = Vec::with_capacity(p);
    for _ in 0..p {
        names.push(r.string()?);
    }

    let logw = r.f64s()?;
    let sigma = r.f64s()?;
    let sa = r.f64s()?;
    if logw.len() != n_s || sigma.len() != n_s || sa.len() != n_s {
        return Err(Error::Data(format!(
            "{shown}: per-grid-point blocks disagree with the declared grid size {n_s}"
        )));
    }
    let mut converged = Vec::with_capacity(n_s);
    for _ in 0..n_s {
        converged.push(r.flag()?);
    }
    let mut n_iter = Vec::with_capacity(n_s);
    for _ in 0..n_s {
        n_iter.push(r.usize()?);
    }

    let has_eta = r.flag()?;
    let mut states = Vec::with_capacity(n_s);
    for _ in 0..n_s {
        let alpha = r.f64_block(p)?;
        let mu = r.f64_block(p)?;
        let s2 = r.f64_block(p)?;
        let eta = if has_eta { Some(r.f64_block(n)?) } else { None };
        states.push(VariationalState { alpha, mu, s2, eta });
    }
    let mu_cov = r.matrix()?;
    if mu_cov.nrows() != m || mu_cov.ncols() != n_s {
        return Err(Error::Data(format!(
            "{shown}: covariate coefficient block has the wrong shape"
        )));
    }

    let w = r.f64s()?;
    let pip = r.f64s()?;
    let beta_mean = r.f64s()?;
    if w.len() != n_s || pip.len() != p || beta_mean.len() != p {
        return Err(Error::Data(format!(
            "{shown}: aggregate blocks disagree with the declared dimensions"
        )));
    }
    let pve = if r.flag()? { Some(r.matrix()?) } else { None };
    let model_pve = if r.flag()? { Some(r.f64s()?) } else { None };

    if r.take(8)? != END_MAGIC {
        return Err(Error::Data(format!("{shown}: archive end marker is missing")));
    }
    if r.pos != buf.len() {
        return Err(Error::Data(format!(
            "{shown}: {} unexpected trailing bytes",
            buf.len() - r.pos
        )));
    }

    Ok(ModelFit {
        family,
        n,
        p,
        m,
        dataset_digest,
        x_digest,
        settings,
        grid,
        fits: GridFit {
            states,
            logw,
            sigma,
            sa,
            mu_cov,
            converged,
            n_iter,
        },
        w,
        pip,
        beta_mean,
        pve,
        model_pve,
        names,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;
    use crate::fit::{fit, FitOptions};
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use tempfile::tempdir;

    fn fitted_model(family: Family, seed: u64) -> ModelFit {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 30;
        let x = DMatrix::from_fn(n, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
        let z = DMatrix::from_fn(n, 1, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(n, |i, _| {
            let lin = 1.2 * x[(i, 0)] + 0.3 * z[(i, 0)];
            match family {
                Family::Gaussian => lin + 0.5 * rng.sample::<f64, _>(StandardNormal),
                Family::Binomial => {
                    if rng.random::<f64>() < crate::math::sigmoid(lin) {
                        1.0
                    } else {
                        0.0
                    }
                }
            }
        });
        let ds = Dataset::new(x, Some(z), y, family).unwrap();
        let grid = HyperGrid {
            sigma: HyperSetting::Estimate,
            sa: HyperSetting::Estimate,
            logodds: LogOddsGrid::Shared(vec![-1.0, 0.0]),
        };
        fit(&ds, &grid, &FitOptions::default()).unwrap()
    }

    fn bits(v: &[f64]) -> Vec<u64> {
        v.iter().map(|x| x.to_bits()).collect()
    }

    fn assert_bitwise_equal(a: &ModelFit, b: &ModelFit) {
        assert_eq!(a.family, b.family);
        assert_eq!((a.n, a.p, a.m), (b.n, b.p, b.m));
        assert_eq!(a.dataset_digest, b.dataset_digest);
        assert_eq!(a.x_digest, b.x_digest);
        assert_eq!(a.names, b.names);
        assert_eq!(bits(&a.fits.logw), bits(&b.fits.logw));
        assert_eq!(bits(&a.fits.sigma), bits(&b.fits.sigma));
        assert_eq!(bits(&a.fits.sa), bits(&b.fits.sa));
        assert_eq!(a.fits.converged, b.fits.converged);
        assert_eq!(a.fits.n_iter, b.fits.n_iter);
        for (sa_state, sb_state) in a.fits.states.iter().zip(&b.fits.states) {
            assert_eq!(bits(&sa_state.alpha), bits(&sb_state.alpha));
            assert_eq!(bits(&sa_state.mu), bits(&sb_state.mu));
            assert_eq!(bits(&sa_state.s2), bits(&sb_state.s2));
            match (&sa_state.eta, &sb_state.eta) {
                (None, None) => {}
                (Some(ea), Some(eb)) => assert_eq!(bits(ea), bits(eb)),
                _ => panic!("eta presence differs"),
            }
        }
        assert_eq!(
            bits(a.fits.mu_cov.as_slice()),
            bits(b.fits.mu_cov.as_slice())
        );
        assert_eq!(bits(&a.w), bits(&b.w));
        assert_eq!(bits(&a.pip), bits(&b.pip));
        assert_eq!(bits(&a.beta_mean), bits(&b.beta_mean));
        match (&a.pve, &b.pve) {
            (None, None) => {}
            (Some(ma), Some(mb)) => assert_eq!(bits(ma.as_slice()), bits(mb.as_slice())),
            _ => panic!("pve presence differs"),
        }
        match (&a.model_pve, &b.model_pve) {
            (None, None) => {}
            (Some(va), Some(vb)) => assert_eq!(bits(va), bits(vb)),
            _ => panic!("model_pve presence differs"),
        }
    }

    #[test]
    fn round_trip_is_bitwise_for_both_families() {
        let dir = tempdir().unwrap();
        for (family, name) in [(Family::Gaussian, "g.fit"), (Family::Binomial, "b.fit")] {
            let fit = fitted_model(family, 7);
            let path = dir.path().join(name);
            save_fit(&path, &fit).unwrap();
            let loaded = load_fit(&path).unwrap();
            assert_bitwise_equal(&fit, &loaded);
        }
    }

    #[test]
    fn corrupted_archives_are_rejected() {
        let dir = tempdir().unwrap();
        let fit = fitted_model(Family::Gaussian, 8);
        let path = dir.path().join("m.fit");
        save_fit(&path, &fit).unwrap();
        let full = fs::read(&path).unwrap();

        let truncated = &full[..full.len() / 2];
        let tpath = dir.path().join("t.fit");
        fs::write(&tpath, truncated).unwrap();
        let msg = load_fit(&tpath).unwrap_err().to_string();
        assert!(msg.contains("truncated"), "got: {msg}");

        let mut wrong_magic = full.clone();
        wrong_magic[0] = b'X';
        fs::write(&tpath, &wrong_magic).unwrap();
        assert!(load_fit(&tpath).unwrap_err().to_string().contains("magic"));

        let mut wrong_version = full.clone();
        wrong_version[8] = 99;
        fs::write(&tpath, &wrong_version).unwrap();
        assert!(load_fit(&tpath)
            .unwrap_err()
            .to_string()
            .contains("version"));

        let mut trailing = full.clone();
        trailing.push(0);
        fs::write(&tpath, &trailing).unwrap();
        assert!(load_fit(&tpath)
            .unwrap_err()
            .to_string()
            .contains("trailing"));
    }
}
