//! Forward sensing models.
//!
//! [`SensingPlan`] precomputes, per spectral band and detector column, which
//! code cells a pixel reads and with what fractional weight.  [`sense`] then
//! reduces a datacube to detector frames with one fixed summation order, so
//! results are bit-reproducible.  Two slower reference models exist purely
//! to audit the discrete one: [`sense_exact_shear`] averages the continuously
//! sheared code over each band instead of freezing it at the band-start
//! wavelength, and [`sense_continuous`] integrates the underlying continuous
//! imaging equation by midpoint quadrature.  [`sense_cassi_baseline`]
//! implements the classic coded-aperture-then-disperser camera for
//! side-by-side comparisons.

use std::io::Write as _;
use std::path::Path;

use crate::coding::{column_weights, effective_fraction, row_band, CodedApertureSet};
use crate::cube::Datacube;
use crate::error::{Error, Result};
use crate::geometry::{Regime, SystemGeometry};
use crate::rational::Rational;

/// Detector frames for `Q` shots; each frame is `rows x cols` with the
/// dispersion axis first (`frame[m * cols + n]`).
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    rows: u32,
    cols: u32,
    frames: Vec<Vec<f64>>,
}

impl MeasurementSet {
    pub fn new(rows: u32, cols: u32, frames: Vec<Vec<f64>>) -> Result<Self> {
        let expected = rows as usize * cols as usize;
        for f in &frames {
            if f.len() != expected {
                return Err(Error::DimensionMismatch {
                    expected,
                    got: f.len(),
                });
            }
        }
        Ok(MeasurementSet { rows, cols, frames })
    }

    pub fn zeros(rows: u32, cols: u32, shots: u32) -> Self {
        MeasurementSet {
            rows,
            cols,
            frames: vec![vec![0.0; rows as usize * cols as usize]; shots as usize],
        }
    }

    pub fn shots(&self) -> u32 {
        self.frames.len() as u32
    }

    pub fn frame_dims(&self) -> (u32, u32) {
        (self.rows, self.cols)
    }

    pub fn frame(&self, q: usize) -> &[f64] {
        &self.frames[q]
    }

    pub fn frame_mut(&mut self, q: usize) -> &mut [f64] {
        &mut self.frames[q]
    }

    #[inline]
    pub fn at(&self, q: usize, m: u32, n: u32) -> f64 {
        self.frames[q][m as usize * self.cols as usize + n as usize]
    }

    /// Stacked measurement vector: shots outermost, then `(m, n)` in frame
    /// order — the row order of the assembled sensing matrix.
    pub fn vectorize(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.frames.len() * self.frames[0].len());
        for f in &self.frames {
            out.extend_from_slice(f);
        }
        out
    }

    pub fn from_vector(rows: u32, cols: u32, shots: u32, data: &[f64]) -> Result<Self> {
        let per = rows as usize * cols as usize;
        if data.len() != per * shots as usize {
            return Err(Error::DimensionMismatch {
                expected: per * shots as usize,
                got: data.len(),
            });
        }
        Ok(MeasurementSet {
            rows,
            cols,
            frames: data.chunks(per).map(|c| c.to_vec()).collect(),
        })
    }

    pub fn max_value(&self) -> f64 {
        self.frames
            .iter()
            .flat_map(|f| f.iter().copied())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Stores the set in the cube container with the shot index on the
    /// spectral axis (frames are just planes).
    pub fn write_ssc(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(b"SSC1")?;
        for d in [self.rows, self.cols, self.shots()] {
            f.write_all(&d.to_le_bytes())?;
        }
        for frame in &self.frames {
            for &v in frame {
                f.write_all(&(v as f32).to_le_bytes())?;
            }
        }
        f.flush()?;
        Ok(())
    }

    pub fn read_ssc(path: &Path) -> Result<Self> {
        let cube = Datacube::read_ssc(path)?;
        let (rows, cols, shots) = cube.dims();
        MeasurementSet::from_vector(rows, cols, shots, cube.values())
    }
}

/// How the spectral axis is discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum BandPlan {
    /// The model's own grid: band width `delta_c / (s alpha)`, so each band
    /// shifts the projected code by exactly one column.  Band count comes
    /// from the geometry.
    Native,
    /// A fixed number of equal bands spanning the wavelength range, with the
    /// code shift of each band computed from its physical start wavelength.
    /// Used by sweeps that compare one cube across several mask positions.
    /// Only regimes whose cube lives on a fixed grid support this — the
    /// coarse-projection regimes, or the fine regime with zero dispersion
    /// shift (`s * alpha = 0`), where the recovered grid does not move with
    /// wavelength.
    Pinned(u32),
}

/// One detector column's read pattern in the fine-projection regime.
#[derive(Debug, Clone)]
struct FineEntry {
    /// First code column read for this band.
    mask_first: i64,
    /// Cube x-slot of the first weight; entries outside `[0, n_x)` are
    /// partial edge cells not represented in the cube and are skipped by
    /// every consumer.
    cube_first: i64,
    weights: Vec<f64>,
}

#[derive(Debug, Clone)]
enum Tables {
    /// `[band][detector column]` overlap windows.
    Fine(Vec<Vec<FineEntry>>),
    /// `[band][detector column]` boundary cell/fraction pairs `(m', p)`;
    /// the pixel reads code columns `m' - 1` (weight `p`) and `m'`
    /// (weight `1 - p`).
    Split(Vec<Vec<(i64, f64)>>),
}

/// Precomputed per-band read geometry plus the cube shape it senses.
#[derive(Debug, Clone)]
pub struct SensingPlan {
    g: SystemGeometry,
    bands: u32,
    dims: (u32, u32, u32),
    tables: Tables,
}

impl SensingPlan {
    /// Plan on the native spectral grid.  With zero dispersion shift the
    /// grid degenerates to a single band covering the whole range.
    pub fn native(g: &SystemGeometry) -> Result<Self> {
        let bands = g.band_count_clamped();
        let offsets: Vec<Rational> = match g.spectral_resolution_nm() {
            Ok(dl) => (0..bands)
                .map(|k| g.lambda_min() + Rational::from(k) * dl)
                .collect(),
            // Degenerate dispersion: single band at the range start.
            Err(_) => vec![g.lambda_min()],
        };
        Self::build(g, &offsets, g.recovered_dims())
    }

    /// Plan with `l` equal bands over the wavelength range.
    pub fn pinned(g: &SystemGeometry, l: u32) -> Result<Self> {
        if l == 0 {
            return Err(Error::geometry("a plan needs at least one band"));
        }
        if g.classify_regime() == Regime::MagnifiedLe
            && !(g.s() * g.alpha()).is_zero()
            && !(g.lambda_max() - g.lambda_min()).is_zero()
        {
            return Err(Error::WrongRegime(
                "pinned band plans need a wavelength-independent recovery grid; \
                 the fine-projection regime with nonzero dispersion shift moves \
                 the projected cell grid between bands"
                    .into(),
            ));
        }
        let range = g.lambda_max() - g.lambda_min();
        let step = range / Rational::from(l);
        let offsets: Vec<Rational> = (0..l)
            .map(|k| g.lambda_min() + Rational::from(k) * step)
            .collect();
        let (n_x, n_y, _) = g.recovered_dims();
        Self::build(g, &offsets, (n_x, n_y, l))
    }

    fn build(g: &SystemGeometry, offsets: &[Rational], dims: (u32, u32, u32)) -> Result<Self> {
        let bands = offsets.len() as u32;
        let tables = match g.classify_regime() {
            Regime::MagnifiedLe => {
                // Cube x-grid: the projected window at the range start.
                let m0 = (g.dispersion_shift(g.lambda_min()) / g.delta_c()).floor_int();
                let mut per_band = Vec::with_capacity(offsets.len());
                for &lambda_o in offsets {
                    let mut row = Vec::with_capacity(g.n_d() as usize);
                    for m in 0..g.n_d() {
                        let w = column_weights(m, lambda_o, g)?;
                        // The code column and the cube slot of a voxel differ
                        // by the whole-column dispersion shift accumulated
                        // since the range start.
                        let shift_cols = ((g.dispersion_shift(lambda_o)
                            - g.dispersion_shift(g.lambda_min()))
                            / g.delta_c())
                        .floor_int() as i64;
                        row.push(FineEntry {
                            mask_first: w.first_column,
                            cube_first: w.first_column - shift_cols - m0 as i64,
                            weights: w.weights,
                        });
                    }
                    per_band.push(row);
                }
                Tables::Fine(per_band)
            }
            Regime::MagnifiedGt | Regime::CoarseMask => {
                let mut per_band = Vec::with_capacity(offsets.len());
                for &lambda_o in offsets {
                    let mut row = Vec::with_capacity(g.n_d() as usize);
                    for m in 0..g.n_d() {
                        row.push(effective_fraction(m, lambda_o, g)?);
                    }
                    per_band.push(row);
                }
                Tables::Split(per_band)
            }
        };
        Ok(SensingPlan {
            g: g.clone(),
            bands,
            dims,
            tables,
        })
    }

    pub fn bands(&self) -> u32 {
        self.bands
    }

    /// Dimensions of the cube this plan senses and recovery reconstructs.
    pub fn cube_dims(&self) -> (u32, u32, u32) {
        self.dims
    }

    pub fn geometry(&self) -> &SystemGeometry {
        &self.g
    }

    #[cfg(test)]
    pub(crate) fn split_pair(&self, k: u32, m: u32) -> Option<(i64, f64)> {
        match &self.tables {
            Tables::Split(t) => Some(t[k as usize][m as usize]),
            Tables::Fine(_) => None,
        }
    }

    fn check_inputs(&self, cube: &Datacube, codes: &CodedApertureSet) -> Result<()> {
        if cube.dims() != self.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims.0 as usize * self.dims.1 as usize * self.dims.2 as usize,
                got: cube.len(),
            });
        }
        if codes.n_c() != self.g.n_c() {
            return Err(Error::InvalidCodes(format!(
                "code grid {} does not match geometry n_c {}",
                codes.n_c(),
                self.g.n_c()
            )));
        }
        Ok(())
    }

    /// First-order measurement of `cube` under every shot of `codes`.
    pub fn sense(&self, cube: &Datacube, codes: &CodedApertureSet) -> Result<MeasurementSet> {
        self.check_inputs(cube, codes)?;
        let n_d = self.g.n_d();
        let mut out = MeasurementSet::zeros(n_d, n_d, codes.shots());
        for q in 0..codes.shots() as usize {
            for m in 0..n_d {
                for n in 0..n_d {
                    let v = self.sense_pixel(cube, codes, q, m, n)?;
                    out.frames[q][(m * n_d + n) as usize] = v;
                }
            }
        }
        Ok(out)
    }

    /// One detector pixel; fixed inner summation order (band, column, row).
    fn sense_pixel(
        &self,
        cube: &Datacube,
        codes: &CodedApertureSet,
        q: usize,
        m: u32,
        n: u32,
    ) -> Result<f64> {
        let n_x = self.dims.0 as i64;
        let mut acc = 0.0;
        match &self.tables {
            Tables::Fine(bands) => {
                let (r0, r1) = row_band(n, &self.g)?;
                for (k, table) in bands.iter().enumerate() {
                    let e = &table[m as usize];
                    for (j, &w) in e.weights.iter().enumerate() {
                        let cube_x = e.cube_first + j as i64;
                        if cube_x < 0 || cube_x >= n_x {
                            continue; // partial edge cell, not in the cube
                        }
                        let mask_col = e.mask_first + j as i64;
                        for np in r0..=r1 {
                            let t = codes.value(q, mask_col, np as i64);
                            if t != 0.0 {
                                acc += w * t * cube.get(cube_x as u32, np, k as u32);
                            }
                        }
                    }
                }
            }
            Tables::Split(bands) => match self.g.classify_regime() {
                Regime::MagnifiedGt => {
                    let (r0, r1) = row_band(n, &self.g)?;
                    for (k, table) in bands.iter().enumerate() {
                        let (mp, p) = table[m as usize];
                        for np in r0..=r1 {
                            let coeff = p * codes.value(q, mp - 1, np as i64)
                                + (1.0 - p) * codes.value(q, mp, np as i64);
                            if coeff != 0.0 {
                                acc += coeff * cube.get(m, np, k as u32);
                            }
                        }
                    }
                }
                Regime::CoarseMask => {
                    let c2 = self.g.pixels_per_cell()?;
                    let row = (n / c2) as i64;
                    for (k, table) in bands.iter().enumerate() {
                        let (mp, p) = table[m as usize];
                        let coeff = p * codes.value(q, mp - 1, row)
                            + (1.0 - p) * codes.value(q, mp, row);
                        if coeff != 0.0 {
                            acc += coeff * cube.get(m, n, k as u32);
                        }
                    }
                }
                Regime::MagnifiedLe => unreachable!("split tables imply a coarse regime"),
            },
        }
        Ok(acc)
    }

    /// Calls `visit(row_in_frame_offset=(m,n), band, cube voxel, mask cell,
    /// geometric weight)` for every model entry of detector pixel `(m, n)`,
    /// in the same order `sense` sums them.  Matrix assembly walks this.
    pub(crate) fn visit_pixel(
        &self,
        m: u32,
        n: u32,
        visit: &mut dyn FnMut(u32, u32, u32, i64, i64, f64),
    ) -> Result<()> {
        let n_x = self.dims.0 as i64;
        match &self.tables {
            Tables::Fine(bands) => {
                let (r0, r1) = row_band(n, &self.g)?;
                for (k, table) in bands.iter().enumerate() {
                    let e = &table[m as usize];
                    for (j, &w) in e.weights.iter().enumerate() {
                        let cube_x = e.cube_first + j as i64;
                        if cube_x < 0 || cube_x >= n_x {
                            continue;
                        }
                        let mask_col = e.mask_first + j as i64;
                        for np in r0..=r1 {
                            visit(k as u32, cube_x as u32, np, mask_col, np as i64, w);
                        }
                    }
                }
            }
            Tables::Split(bands) => match self.g.classify_regime() {
                Regime::MagnifiedGt => {
                    let (r0, r1) = row_band(n, &self.g)?;
                    for (k, table) in bands.iter().enumerate() {
                        let (mp, p) = table[m as usize];
                        for np in r0..=r1 {
                            if p != 0.0 {
                                visit(k as u32, m, np, mp - 1, np as i64, p);
                            }
                            if p != 1.0 {
                                visit(k as u32, m, np, mp, np as i64, 1.0 - p);
                            }
                        }
                    }
                }
                Regime::CoarseMask => {
                    let c2 = self.g.pixels_per_cell()?;
                    let row = (n / c2) as i64;
                    for (k, table) in bands.iter().enumerate() {
                        let (mp, p) = table[m as usize];
                        if p != 0.0 {
                            visit(k as u32, m, n, mp - 1, row, p);
                        }
                        if p != 1.0 {
                            visit(k as u32, m, n, mp, row, 1.0 - p);
                        }
                    }
                }
                Regime::MagnifiedLe => unreachable!("split tables imply a coarse regime"),
            },
        }
        Ok(())
    }
}

/// [`SensingPlan::native`] + [`SensingPlan::sense`] in one call.
pub fn sense(
    cube: &Datacube,
    codes: &CodedApertureSet,
    g: &SystemGeometry,
) -> Result<MeasurementSet> {
    SensingPlan::native(g)?.sense(cube, codes)
}

/// Measurement with the code shear resolved exactly: within each band the
/// projected code keeps sliding with wavelength, and this model averages the
/// instantaneous read coefficients over the band's wavelength support (the
/// last band is averaged over its truncated physical extent).  The first-
/// order model instead freezes the coefficients at each band's start
/// wavelength, so the difference between the two is exactly the first-order
/// approximation error.
///
/// Supported where the recovered cube lives on the detector grid (the two
/// coarse-projection regimes); with zero dispersion shift the models
/// coincide and either regime passes through.  The fine-projection regime
/// has no canonical sub-band voxel assignment (the cube grid itself is tied
/// to the projected mask) and is rejected.
pub fn sense_exact_shear(
    cube: &Datacube,
    codes: &CodedApertureSet,
    g: &SystemGeometry,
) -> Result<MeasurementSet> {
    let plan = SensingPlan::native(g)?;
    let range = g.lambda_max() - g.lambda_min();
    if (g.s() * g.alpha() * range).is_zero() {
        // No within-band shear at all: the models agree identically.
        return plan.sense(cube, codes);
    }
    if g.classify_regime() == Regime::MagnifiedLe {
        return Err(Error::WrongRegime(
            "exact-shear audit needs a wavelength-independent cube grid \
             (coarse-projection regimes only)"
                .into(),
        ));
    }
    plan.check_inputs(cube, codes)?;

    let n_d = g.n_d();
    let bands = plan.bands;
    let dl = g.spectral_resolution_nm()?;
    let s_alpha = g.s() * g.alpha();
    let one_minus_s = Rational::ONE - g.s();
    let coarse = g.classify_regime() == Regime::CoarseMask;
    let c2 = if coarse { g.pixels_per_cell()? } else { 1 };

    let mut out = MeasurementSet::zeros(n_d, n_d, codes.shots());
    for q in 0..codes.shots() as usize {
        for m in 0..n_d {
            // Band-mean read coefficients for the two straddled columns,
            // per band: (first column, averaged p weights over segments).
            let a = Rational::from(m) * g.delta_d() * one_minus_s;
            let pixel_end = Rational::from(m + 1) * g.delta_d();
            for k in 0..bands {
                let band_lo = g.lambda_min() + Rational::from(k) * dl;
                let band_hi = (band_lo + dl).min(g.lambda_max());
                let width = band_hi - band_lo;
                if width.is_zero() || width.is_negative() {
                    continue;
                }
                // Breakpoints: code-cell crossings of the pixel's left edge,
                // plus the wavelength where each active cell's p saturates
                // at 1 (the cell boundary passes the pixel's right edge at
                // lambda* = (j delta_c - (1-s)(m+1) delta_d) / (s alpha)).
                // The boundary cell index over the band runs through
                // j = floor(v_lo)+1 ..= floor(v_hi)+1.
                let mut cuts: Vec<Rational> = vec![band_lo, band_hi];
                let v_lo = (a + s_alpha * band_lo) / g.delta_c();
                let v_hi = (a + s_alpha * band_hi) / g.delta_c();
                for j in (v_lo.floor_int() + 1)..=(v_hi.floor_int() + 1) {
                    let col = Rational::from_int(j) * g.delta_c();
                    let lambda = (col - a) / s_alpha;
                    if band_lo < lambda && lambda < band_hi {
                        cuts.push(lambda);
                    }
                    if !one_minus_s.is_zero() {
                        let lambda_p = (col - one_minus_s * pixel_end) / s_alpha;
                        if band_lo < lambda_p && lambda_p < band_hi {
                            cuts.push(lambda_p);
                        }
                    }
                }
                cuts.sort();
                cuts.dedup();

                for seg in cuts.windows(2) {
                    let seg_w = seg[1] - seg[0];
                    if seg_w.is_zero() {
                        continue;
                    }
                    // The read coefficients are linear in lambda here, so
                    // the midpoint value is the exact segment mean.
                    let mid = (seg[0] + seg[1]) / Rational::from(2u32);
                    let (mp, p) = effective_fraction(m, mid, g)?;
                    let frac = (seg_w / width).to_f64();
                    for n in 0..n_d {
                        let idx = (m * n_d + n) as usize;
                        if coarse {
                            let row = (n / c2) as i64;
                            let coeff = p * codes.value(q, mp - 1, row)
                                + (1.0 - p) * codes.value(q, mp, row);
                            out.frames[q][idx] += frac * coeff * cube.get(m, n, k);
                        } else {
                            let (r0, r1) = row_band(n, g)?;
                            for np in r0..=r1 {
                                let coeff = p * codes.value(q, mp - 1, np as i64)
                                    + (1.0 - p) * codes.value(q, mp, np as i64);
                                out.frames[q][idx] += frac * coeff * cube.get(m, np, k);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Midpoint-rule integration of the continuous imaging model.  `scene` is
/// called as `scene(x_um, y_um, lambda_nm)`; the result carries the physical
/// measure (pixel area in um^2 times wavelength extent in nm), unlike the
/// dimensionless discrete models.  `spatial_div` subdivides each pixel per
/// axis, `spectral_div` the full wavelength range.
pub fn sense_continuous(
    scene: &dyn Fn(f64, f64, f64) -> f64,
    codes: &CodedApertureSet,
    g: &SystemGeometry,
    spatial_div: u32,
    spectral_div: u32,
) -> MeasurementSet {
    let n_d = g.n_d();
    let dd = g.delta_d().to_f64();
    let dc = g.delta_c().to_f64();
    let s = g.s().to_f64();
    let alpha = g.alpha().to_f64();
    let lambda_min = g.lambda_min().to_f64();
    let range = (g.lambda_max() - g.lambda_min()).to_f64();
    let dx = dd / spatial_div as f64;
    let dl = range / spectral_div as f64;
    let volume = dx * dx * dl;

    let mut out = MeasurementSet::zeros(n_d, n_d, codes.shots());
    for q in 0..codes.shots() as usize {
        for m in 0..n_d {
            for n in 0..n_d {
                let mut acc = 0.0;
                for i in 0..spatial_div {
                    let x = (m as f64 + (i as f64 + 0.5) / spatial_div as f64) * dd;
                    for jy in 0..spatial_div {
                        let y = (n as f64 + (jy as f64 + 0.5) / spatial_div as f64) * dd;
                        let row = (y / dc).floor() as i64;
                        for w in 0..spectral_div {
                            let lambda = lambda_min + (w as f64 + 0.5) * dl;
                            let col = ((x * (1.0 - s) + s * alpha * lambda) / dc).floor() as i64;
                            let t = codes.value(q, col, row);
                            if t != 0.0 {
                                acc += t * scene(x, y, lambda);
                            }
                        }
                    }
                }
                out.frames[q][(m * n_d + n) as usize] = acc * volume;
            }
        }
    }
    out
}

/// Classic coded-aperture camera baseline: the code modulates the in-focus
/// image and the disperser then shifts band `k` by `k` whole pixels along
/// the second axis, so `g[m][n] = sum_k t[m][n-k] f[m][n-k][k]` on a
/// detector widened to `N + L - 1` columns.
pub fn sense_cassi_baseline(
    cube: &Datacube,
    codes: &CodedApertureSet,
    g: &SystemGeometry,
) -> Result<MeasurementSet> {
    if g.delta_c() != g.delta_d() {
        return Err(Error::WrongRegime(
            "the comparison baseline assumes code cells equal to detector pixels".into(),
        ));
    }
    let (n_x, n_y, l) = cube.dims();
    if n_x != n_y {
        return Err(Error::geometry("baseline expects a square cube"));
    }
    if codes.n_c() != n_x {
        return Err(Error::InvalidCodes(format!(
            "code grid {} does not match cube side {}",
            codes.n_c(),
            n_x
        )));
    }
    let cols = n_y + l - 1;
    let mut out = MeasurementSet::zeros(n_x, cols, codes.shots());
    for q in 0..codes.shots() as usize {
        for m in 0..n_x {
            for n in 0..cols {
                let mut acc = 0.0;
                for k in 0..l {
                    if n < k || n - k >= n_y {
                        continue;
                    }
                    let t = codes.value(q, m as i64, (n - k) as i64);
                    if t != 0.0 {
                        acc += t * cube.get(m, n - k, k);
                    }
                }
                out.frames[q][(m * cols + n) as usize] = acc;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Dispersion, GeometryConfig};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn r(text: &str) -> Rational {
        Rational::parse(text).unwrap()
    }

    fn geometry(n_d: u32, dc: &str, dd: &str, s: &str, beta: &str) -> SystemGeometry {
        let dc = r(dc);
        let dd = r(dd);
        let n_c = (Rational::from(n_d) * dd / dc).numer() as u32;
        SystemGeometry::from_config(&GeometryConfig {
            s: r(s),
            delta_c_um: dc,
            delta_d_um: dd,
            n_d,
            n_c,
            lambda_min_nm: r("0"),
            lambda_max_nm: r("140"),
            dispersion: Dispersion::Beta(r(beta)),
        })
        .unwrap()
    }

    fn random_cube(dims: (u32, u32, u32), seed: u64) -> Datacube {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data = (0..dims.0 as usize * dims.1 as usize * dims.2 as usize)
            .map(|_| rng.random_range(0.0..1.0))
            .collect();
        Datacube::from_vec(dims.0, dims.1, dims.2, data).unwrap()
    }

    #[test]
    fn aligned_open_mask_is_identity() {
        // s = 0, equal pitches, one all-open shot, single band: every pixel
        // reads exactly its own voxel.
        let g = geometry(8, "1", "1", "0", "1");
        let plan = SensingPlan::native(&g).unwrap();
        assert_eq!(plan.cube_dims(), (8, 8, 1));
        let cube = random_cube((8, 8, 1), 1);
        let codes = CodedApertureSet::generate_boolean(8, 1, 0).unwrap();
        let meas = plan.sense(&cube, &codes).unwrap();
        assert_eq!(meas.frame(0), cube.band(0));
    }

    #[test]
    fn zero_cube_gives_zero_measurements() {
        for (dc, dd, s) in [("1", "1", "0.25"), ("0.5", "1", "0.1"), ("2", "1", "0.3")] {
            let g = geometry(8, dc, dd, s, "1");
            let plan = SensingPlan::native(&g).unwrap();
            let cube = Datacube::zeros(plan.cube_dims().0, plan.cube_dims().1, plan.cube_dims().2);
            let codes = CodedApertureSet::generate_boolean(g.n_c(), 2, 3).unwrap();
            let meas = plan.sense(&cube, &codes).unwrap();
            for q in 0..2 {
                assert!(meas.frame(q).iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn sensing_is_linear() {
        let g = geometry(8, "1", "1", "0.3", "1");
        let plan = SensingPlan::native(&g).unwrap();
        let dims = plan.cube_dims();
        let codes = CodedApertureSet::generate_boolean(8, 2, 9).unwrap();
        let a = random_cube(dims, 2);
        let b = random_cube(dims, 3);
        let mut combo = Datacube::zeros(dims.0, dims.1, dims.2);
        for i in 0..combo.len() {
            combo.values_mut()[i] = 2.0 * a.values()[i] + 3.0 * b.values()[i];
        }
        let ma = plan.sense(&a, &codes).unwrap();
        let mb = plan.sense(&b, &codes).unwrap();
        let mc = plan.sense(&combo, &codes).unwrap();
        for q in 0..2 {
            for (i, &v) in mc.frame(q).iter().enumerate() {
                assert_relative_eq!(
                    v,
                    2.0 * ma.frame(q)[i] + 3.0 * mb.frame(q)[i],
                    max_relative = 1e-12,
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn complementary_shots_sum_to_open_mask() {
        for (dc, dd, s) in [("0.5", "1", "0.2"), ("1", "1", "0.18")] {
            let g = geometry(8, dc, dd, s, "1");
            let plan = SensingPlan::native(&g).unwrap();
            let cube = random_cube(plan.cube_dims(), 4);
            let codes = CodedApertureSet::generate_boolean(g.n_c(), 4, 5).unwrap();
            let open = CodedApertureSet::generate_boolean(g.n_c(), 1, 0).unwrap();
            let multi = plan.sense(&cube, &codes).unwrap();
            let full = plan.sense(&cube, &open).unwrap();
            for i in 0..full.frame(0).len() {
                let total: f64 = (0..4).map(|q| multi.frame(q)[i]).sum();
                assert_relative_eq!(total, full.frame(0)[i], max_relative = 1e-12, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn native_bands_shift_the_boundary_cell_by_one_column() {
        // The dispersion between adjacent native bands is exactly one code
        // column: the (m', p) tables repeat with m' incremented.
        let g = geometry(8, "1", "1", "0.18", "1");
        let plan = SensingPlan::native(&g).unwrap();
        assert!(plan.bands() >= 2);
        for k in 1..plan.bands() {
            for m in 0..8 {
                let (m0, p0) = plan.split_pair(0, m).unwrap();
                let (mk, pk) = plan.split_pair(k, m).unwrap();
                assert_eq!(mk, m0 + k as i64);
                assert_relative_eq!(pk, p0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn pinned_plan_matches_native_at_the_matched_position() {
        // Equal pitches, beta = 1, N = 16: the native grid has L = 4 bands
        // exactly when s = 4/16, and there the pinned 4-band plan is the
        // same plan.
        let g = geometry(16, "1", "1", "0.25", "1");
        let native = SensingPlan::native(&g).unwrap();
        assert_eq!(native.bands(), 4);
        let pinned = SensingPlan::pinned(&g, 4).unwrap();
        assert_eq!(native.cube_dims(), pinned.cube_dims());
        let cube = random_cube(native.cube_dims(), 6);
        let codes = CodedApertureSet::generate_boolean(16, 3, 2).unwrap();
        let a = native.sense(&cube, &codes).unwrap();
        let b = pinned.sense(&cube, &codes).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pinned_plan_rejects_moving_fine_grid() {
        // Fine regime with real dispersion: the recovered grid would move
        // between bands.
        let g = geometry(16, "0.5", "1", "0.1", "1");
        assert!(matches!(
            SensingPlan::pinned(&g, 4),
            Err(Error::WrongRegime(_))
        ));
        // Zero shift: allowed even in the fine regime.
        let g0 = geometry(16, "0.5", "1", "0", "1");
        assert!(SensingPlan::pinned(&g0, 4).is_ok());
    }

    #[test]
    fn exact_shear_equals_first_order_without_dispersion() {
        let g = geometry(8, "1", "1", "0", "1");
        let plan = SensingPlan::native(&g).unwrap();
        let cube = random_cube(plan.cube_dims(), 7);
        let codes = CodedApertureSet::generate_boolean(8, 2, 11).unwrap();
        let exact = sense_exact_shear(&cube, &codes, &g).unwrap();
        let first = plan.sense(&cube, &codes).unwrap();
        assert_eq!(exact, first);
    }

    #[test]
    fn exact_shear_equals_first_order_on_open_mask_flat_scene() {
        // All-open mask: the instantaneous read coefficient is 1 at every
        // wavelength wherever the projection stays on the mask, so the band
        // mean equals the band-start value.
        let g = geometry(8, "1", "1", "1/8", "1/8");
        let plan = SensingPlan::native(&g).unwrap();
        assert_eq!(plan.bands(), 1);
        let mut cube = Datacube::zeros(plan.cube_dims().0, plan.cube_dims().1, 1);
        cube.values_mut().fill(0.7);
        let codes = CodedApertureSet::generate_boolean(8, 1, 0).unwrap();
        let exact = sense_exact_shear(&cube, &codes, &g).unwrap();
        let first = plan.sense(&cube, &codes).unwrap();
        // Interior pixels (projection fully on the mask) agree exactly.
        for m in 0..7 {
            for n in 0..8 {
                assert_relative_eq!(
                    exact.at(0, m, n),
                    first.at(0, m, n),
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn exact_shear_deviation_is_small_but_nonzero_under_real_shear() {
        let g = geometry(8, "1", "1", "0.25", "1");
        let plan = SensingPlan::native(&g).unwrap();
        assert_eq!(plan.bands(), 2);
        let mut cube = random_cube(plan.cube_dims(), 8);
        // Keep values away from zero so relative deviations are meaningful.
        for v in cube.values_mut() {
            *v += 0.5;
        }
        let codes = CodedApertureSet::generate_boolean(8, 2, 13).unwrap();
        let exact = sense_exact_shear(&cube, &codes, &g).unwrap();
        let first = plan.sense(&cube, &codes).unwrap();
        let mut rel_sum = 0.0;
        let mut count = 0;
        let mut any_diff = false;
        for q in 0..2 {
            for i in 0..exact.frame(q).len() {
                let e = exact.frame(q)[i];
                let f = first.frame(q)[i];
                if e.abs() > 1e-12 {
                    rel_sum += (e - f).abs() / e.abs();
                    count += 1;
                }
                if (e - f).abs() > 1e-9 {
                    any_diff = true;
                }
            }
        }
        assert!(any_diff, "models should differ under real shear");
        let mean_rel = rel_sum / count as f64;
        assert!(mean_rel > 0.0);
        assert!(mean_rel < 0.5, "mean rel dev {mean_rel}");
    }

    #[test]
    fn exact_shear_rejects_fine_regime_with_shear() {
        let g = geometry(8, "0.5", "1", "0.2", "1");
        let plan = SensingPlan::native(&g).unwrap();
        let cube = Datacube::zeros(plan.cube_dims().0, plan.cube_dims().1, plan.cube_dims().2);
        let codes = CodedApertureSet::generate_boolean(16, 1, 0).unwrap();
        assert!(matches!(
            sense_exact_shear(&cube, &codes, &g),
            Err(Error::WrongRegime(_))
        ));
    }

    #[test]
    fn continuous_model_integrates_constant_scene_to_pixel_volume() {
        // All projections stay on the mask at beta = 1, lambda from 0:
        // every pixel integrates T = 1 over its area and the full range.
        let g = geometry(8, "1", "1", "0.1", "1");
        let codes = CodedApertureSet::generate_boolean(8, 1, 0).unwrap();
        let meas = sense_continuous(&|_, _, _| 2.0, &codes, &g, 4, 8);
        let want = 1.0 * 1.0 * 140.0 * 2.0; // delta_d^2 * |range| * value
        for m in 0..8 {
            for n in 0..8 {
                assert_relative_eq!(meas.at(0, m, n), want, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn continuous_model_of_zero_scene_is_zero() {
        let g = geometry(4, "1", "1", "0.5", "1");
        let codes = CodedApertureSet::generate_boolean(4, 2, 1).unwrap();
        let meas = sense_continuous(&|_, _, _| 0.0, &codes, &g, 2, 2);
        for q in 0..2 {
            assert!(meas.frame(q).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn continuous_model_converges_to_exact_shear_for_piecewise_scenes() {
        // A scene that is constant on the model's voxel grid makes the
        // continuous integral equal the exact-shear sum, scaled by the
        // voxel measure.  Midpoint quadrature should approach it.
        let g = geometry(4, "1", "1", "0.5", "1");
        let plan = SensingPlan::native(&g).unwrap();
        assert_eq!(plan.bands(), 2);
        let cube = random_cube(plan.cube_dims(), 10);
        let codes = CodedApertureSet::generate_boolean(4, 2, 1).unwrap();
        let exact = sense_exact_shear(&cube, &codes, &g).unwrap();
        let dl = (g.lambda_max() - g.lambda_min()).to_f64() / 2.0;
        let cube_ref = &cube;
        let scene = move |x: f64, y: f64, lambda: f64| {
            let m = (x / 1.0).floor().min(3.0) as u32;
            let n = (y / 1.0).floor().min(3.0) as u32;
            let k = ((lambda / dl).floor() as u32).min(1);
            cube_ref.get(m, n, k)
        };
        let meas = sense_continuous(&scene, &codes, &g, 64, 128);
        let scale = 1.0 * 1.0 * dl;
        let mut peak = 0.0f64;
        for q in 0..2 {
            for &e in exact.frame(q) {
                peak = peak.max(e.abs());
            }
        }
        let mut worst = 0.0f64;
        for q in 0..2 {
            for m in 0..4 {
                for n in 0..4 {
                    let c = meas.at(q, m, n) / scale;
                    let e = exact.at(q, m, n);
                    worst = worst.max((c - e).abs() / peak);
                }
            }
        }
        assert!(worst < 0.03, "quadrature deviation {worst}");
    }

    #[test]
    fn cassi_baseline_shifts_one_hot_voxels() {
        let g = geometry(4, "1", "1", "0.5", "1");
        let codes = CodedApertureSet::generate_boolean(4, 1, 0).unwrap();
        let mut cube = Datacube::zeros(4, 4, 2);
        cube.set(2, 1, 1, 3.0);
        let meas = sense_cassi_baseline(&cube, &codes, &g).unwrap();
        assert_eq!(meas.frame_dims(), (4, 5));
        for m in 0..4 {
            for n in 0..5 {
                let want = if (m, n) == (2, 2) { 3.0 } else { 0.0 };
                assert_eq!(meas.at(0, m, n), want, "at ({m},{n})");
            }
        }
    }

    #[test]
    fn cassi_baseline_single_band_is_coded_image() {
        let g = geometry(4, "1", "1", "0", "1");
        let codes = CodedApertureSet::generate_boolean(4, 2, 5).unwrap();
        let cube = random_cube((4, 4, 1), 11);
        let meas = sense_cassi_baseline(&cube, &codes, &g).unwrap();
        assert_eq!(meas.frame_dims(), (4, 4));
        for q in 0..2 {
            for m in 0..4 {
                for n in 0..4 {
                    let want = codes.value(q, m as i64, n as i64) * cube.get(m, n, 0);
                    assert_eq!(meas.at(q, m, n), want);
                }
            }
        }
    }

    #[test]
    fn cassi_baseline_rejects_unequal_pitches() {
        let g = geometry(4, "0.5", "1", "0.1", "1");
        let codes = CodedApertureSet::generate_boolean(8, 1, 0).unwrap();
        let cube = Datacube::zeros(4, 4, 2);
        assert!(sense_cassi_baseline(&cube, &codes, &g).is_err());
    }

    #[test]
    fn measurement_set_round_trips_through_ssc() {
        let dir = tempfile::tempdir().unwrap();
        let mut meas = MeasurementSet::zeros(3, 5, 2);
        // Values exactly representable in f32.
        let mut x = 0.0f32;
        for q in 0..2 {
            for v in meas.frame_mut(q) {
                *v = x as f64;
                x += 0.25;
            }
        }
        let path = dir.path().join("meas.ssc");
        meas.write_ssc(&path).unwrap();
        let back = MeasurementSet::read_ssc(&path).unwrap();
        assert_eq!(meas, back);
    }

    #[test]
    fn vectorize_orders_shots_then_frame() {
        let mut meas = MeasurementSet::zeros(2, 2, 2);
        meas.frame_mut(0).copy_from_slice(&[1.0, 2.0, 3.0, 4.0]);
        meas.frame_mut(1).copy_from_slice(&[5.0, 6.0, 7.0, 8.0]);
        assert_eq!(meas.vectorize(), (1..=8).map(f64::from).collect::<Vec<_>>());
        let back = MeasurementSet::from_vector(2, 2, 2, &meas.vectorize()).unwrap();
        assert_eq!(back, meas);
    }
}
