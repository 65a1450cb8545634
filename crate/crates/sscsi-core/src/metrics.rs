//! Recovery quality metrics and the results table format.

use std::path::Path;

use crate::cube::Datacube;
use crate::error::{Error, Result};
use crate::geometry::SystemGeometry;

/// Peak signal-to-noise ratio in dB: `20 log10(peak / rmse)` with the peak
/// taken from the reference cube (not a fixed dynamic range — documented
/// choice, since the synthetic scenes are not 8-bit).  Identical inputs give
/// `+inf`, which the CSV layer writes as the sentinel `inf`.
pub fn psnr(reference: &Datacube, test: &Datacube) -> Result<f64> {
    if reference.dims() != test.dims() {
        return Err(Error::DimensionMismatch {
            expected: reference.len(),
            got: test.len(),
        });
    }
    let peak = reference.max_value();
    if !(peak > 0.0) {
        return Err(Error::Numerical(format!(
            "reference peak must be positive (got {peak})"
        )));
    }
    Ok(psnr_slices(reference.values(), test.values(), peak))
}

/// PSNR of each band separately, against the global reference peak.
pub fn psnr_per_band(reference: &Datacube, test: &Datacube) -> Result<Vec<f64>> {
    if reference.dims() != test.dims() {
        return Err(Error::DimensionMismatch {
            expected: reference.len(),
            got: test.len(),
        });
    }
    let peak = reference.max_value();
    if !(peak > 0.0) {
        return Err(Error::Numerical(format!(
            "reference peak must be positive (got {peak})"
        )));
    }
    Ok((0..reference.bands())
        .map(|k| psnr_slices(reference.band(k), test.band(k), peak))
        .collect())
}

fn psnr_slices(reference: &[f64], test: &[f64], peak: f64) -> f64 {
    let mse: f64 = reference
        .iter()
        .zip(test)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / reference.len() as f64;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        20.0 * (peak / mse.sqrt()).log10()
    }
}

/// Magnitude of the Pearson correlation between two spectral signatures.
/// Affine changes of either argument leave it unchanged; a constant
/// signature has no defined correlation and is rejected.
pub fn signature_correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::Numerical(
            "correlation needs at least two samples".into(),
        ));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::Numerical(
            "correlation undefined for zero-variance signature".into(),
        ));
    }
    Ok((cov / (va.sqrt() * vb.sqrt())).abs().min(1.0))
}

/// Measurements captured over recoverable unknowns:
/// `CR = Q * N_d^2 / (N_x * N_y * L)`.
pub fn compression_ratio(q: u32, g: &SystemGeometry) -> f64 {
    let (n_x, n_y, l) = g.recovered_dims();
    let unknowns = n_x as f64 * n_y as f64 * l as f64;
    q as f64 * (g.n_d() as f64).powi(2) / unknowns
}

/// Smallest shot count whose compression ratio reaches `cr` (rounded to the
/// nearest integer) — the harness picks Q from a CR target this way.
pub fn shots_for_compression_ratio(cr: f64, g: &SystemGeometry) -> u32 {
    let (n_x, n_y, l) = g.recovered_dims();
    let unknowns = n_x as f64 * n_y as f64 * l as f64;
    (cr * unknowns / (g.n_d() as f64).powi(2)).round().max(1.0) as u32
}

/// One evaluated reconstruction; a row of the results table.
#[derive(Debug, Clone)]
pub struct EvalResult {
    pub run_id: String,
    pub s: f64,
    pub q: u32,
    pub cr: f64,
    pub psnr_db: f64,
    /// Per-band PSNR, same reference peak.
    pub psnr_bands: Vec<f64>,
    /// `(x, y, |r|)` at each probed pixel.
    pub correlations: Vec<(u32, u32, f64)>,
    /// Sensing-matrix coherence, when the run computed it.
    pub mu: Option<f64>,
    pub seed: u64,
}

/// dB value for CSV cells: `inf` sentinel for the identical-cube case.
pub fn format_db(v: f64) -> String {
    if v.is_infinite() && v > 0.0 {
        "inf".to_string()
    } else {
        format!("{v}")
    }
}

/// Fixed-header results table.
pub fn write_results_csv(path: &Path, rows: &[EvalResult]) -> Result<()> {
    let mut out = String::from("run_id,s,q,cr,psnr_db,mu,seed\n");
    for r in rows {
        let mu = r.mu.map(|m| format!("{m}")).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.run_id,
            r.s,
            r.q,
            r.cr,
            format_db(r.psnr_db),
            mu,
            r.seed
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Per-probe signature correlations: one row per probed pixel.
pub fn write_signatures_csv(path: &Path, rows: &[(String, f64, u32, u32, f64)]) -> Result<()> {
    let mut out = String::from("run_id,s,probe_x,probe_y,abs_r\n");
    for (run_id, s, x, y, r) in rows {
        out.push_str(&format!("{run_id},{s},{x},{y},{r}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}
