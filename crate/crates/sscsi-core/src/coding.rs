//! Coded apertures and pixel/cell overlap weights.
//!
//! The mask is a square grid of `n_c x n_c` binary cells of pitch `delta_c`.
//! Light of wavelength `lambda` projects the mask onto the detector shifted
//! by `s * alpha * lambda` and magnified by `1 / (1 - s)`, so a detector
//! pixel generally straddles several (or a fraction of) projected cells.
//! This module computes those overlaps exactly — the fractions are rational
//! in the geometry parameters — and generates the complementary boolean mask
//! sets used for multi-shot capture.
//!
//! Index convention: `t[(m', n')]` is the cell in column `m'` (the dispersion
//! direction, x) and row `n'` (y).  Reads outside the physical mask return 0,
//! which is how both band shifts past the mask edge and partially covered
//! edge pixels are handled.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{Regime, SystemGeometry};
use crate::rational::Rational;

/// A set of `Q` binary masks with the complementarity property
/// `sum_q t^q[(m', n')] == 1` for every cell: each cell is open in exactly
/// one shot.
#[derive(Debug, Clone, PartialEq)]
pub struct CodedApertureSet {
    n_c: u32,
    masks: Vec<Vec<u8>>,
    seed: Option<u64>,
}

impl CodedApertureSet {
    /// Draws a complementary boolean set: every cell is assigned to one of
    /// the `q` shots uniformly at random.  The same `(n_c, q, seed)` always
    /// produces the same set.  `q = 1` therefore yields the all-ones mask.
    pub fn generate_boolean(n_c: u32, q: u32, seed: u64) -> Result<Self> {
        if q == 0 || n_c == 0 {
            return Err(Error::InvalidCodes(
                "need at least one shot and one cell".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cells = (n_c as usize) * (n_c as usize);
        let mut masks = vec![vec![0u8; cells]; q as usize];
        // Fixed traversal order (column-major to match cube layout) keeps the
        // draw sequence, and thus the masks, reproducible.
        for cell in 0..cells {
            let shot = rng.random_range(0..q) as usize;
            masks[shot][cell] = 1;
        }
        Ok(CodedApertureSet {
            n_c,
            masks,
            seed: Some(seed),
        })
    }

    /// Builds a set from explicit binary masks (column-major cell order);
    /// validates shape, binarity and complementarity.
    pub fn from_masks(n_c: u32, masks: Vec<Vec<u8>>, seed: Option<u64>) -> Result<Self> {
        if masks.is_empty() {
            return Err(Error::InvalidCodes("empty mask set".into()));
        }
        let cells = (n_c as usize) * (n_c as usize);
        for (i, m) in masks.iter().enumerate() {
            if m.len() != cells {
                return Err(Error::InvalidCodes(format!(
                    "mask {i} has {} cells, expected {cells}",
                    m.len()
                )));
            }
            if m.iter().any(|&v| v > 1) {
                return Err(Error::InvalidCodes(format!("mask {i} is not binary")));
            }
        }
        for cell in 0..cells {
            let total: u32 = masks.iter().map(|m| m[cell] as u32).sum();
            if total != 1 {
                return Err(Error::InvalidCodes(format!(
                    "cell {cell} is open in {total} shots, expected exactly 1"
                )));
            }
        }
        Ok(CodedApertureSet { n_c, masks, seed })
    }

    pub fn shots(&self) -> u32 {
        self.masks.len() as u32
    }

    pub fn n_c(&self) -> u32 {
        self.n_c
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Raw cells of one shot in internal (column-major) layout.
    pub fn mask(&self, shot: usize) -> &[u8] {
        &self.masks[shot]
    }

    /// One shot of the set as its own single-shot set.  The result is a
    /// valid binary code but no longer complementary; it exists so matrix
    /// blocks and frames of individual shots can be reasoned about in
    /// isolation.
    pub fn shot_subset(&self, shot: usize) -> CodedApertureSet {
        CodedApertureSet {
            n_c: self.n_c,
            masks: vec![self.masks[shot].clone()],
            seed: None,
        }
    }

    /// Transmission of shot `shot` at cell `(col, row)`; 0 outside the mask.
    #[inline]
    pub fn value(&self, shot: usize, col: i64, row: i64) -> f64 {
        if col < 0 || row < 0 || col >= self.n_c as i64 || row >= self.n_c as i64 {
            return 0.0;
        }
        self.masks[shot][(col as usize) * (self.n_c as usize) + row as usize] as f64
    }

    /// Mean effective transmittance that detector pixel `(m, n)` sees in
    /// spectral band `k` of shot `shot`: the band-0 overlap weights evaluated
    /// at `lambda_min`, with the code column index shifted by `+k` (adjacent
    /// bands are coded by the same pattern moved one column), averaged over
    /// the overlapped area.  An all-open mask gives exactly 1 wherever the
    /// shifted columns stay on the mask.
    pub fn effective_pattern_for_band(
        &self,
        shot: usize,
        k: u32,
        g: &SystemGeometry,
        n: u32,
        m: u32,
    ) -> Result<f64> {
        let lambda_o = g.lambda_min();
        match g.classify_regime() {
            Regime::MagnifiedLe => {
                let w = column_weights(m, lambda_o, g)?;
                let (r0, r1) = row_band(n, g)?;
                let mut num = 0.0;
                let mut den = 0.0;
                for (j, &wj) in w.weights.iter().enumerate() {
                    let col = w.first_column + j as i64 + k as i64;
                    for row in r0..=r1 {
                        num += wj * self.value(shot, col, row as i64);
                        den += wj;
                    }
                }
                Ok(if den == 0.0 { 0.0 } else { num / den })
            }
            Regime::MagnifiedGt => {
                let (m_prime, p) = effective_fraction(m, lambda_o, g)?;
                let (r0, r1) = row_band(n, g)?;
                let mut num = 0.0;
                for row in r0..=r1 {
                    num += p * self.value(shot, m_prime + k as i64 - 1, row as i64)
                        + (1.0 - p) * self.value(shot, m_prime + k as i64, row as i64);
                }
                Ok(num / (r1 - r0 + 1) as f64)
            }
            Regime::CoarseMask => {
                let (m_prime, p) = effective_fraction(m, lambda_o, g)?;
                let c2 = g.pixels_per_cell()?;
                let row = (n / c2) as i64;
                Ok(p * self.value(shot, m_prime + k as i64 - 1, row)
                    + (1.0 - p) * self.value(shot, m_prime + k as i64, row))
            }
        }
    }

    /// Writes the set as one 8-bit PGM per mask (open cell -> 255) plus a
    /// `manifest.txt` sidecar recording shot count, size and seed.
    pub fn write_pgm_set(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (i, _) in self.masks.iter().enumerate() {
            let mut data = Vec::with_capacity((self.n_c as usize).pow(2));
            for row in 0..self.n_c {
                for col in 0..self.n_c {
                    data.push(if self.value(i, col as i64, row as i64) > 0.0 {
                        255u8
                    } else {
                        0u8
                    });
                }
            }
            crate::harness::pgm::write_pgm8(&dir.join(format!("mask_{i:03}.pgm")), self.n_c, self.n_c, &data)?;
        }
        let mut manifest = String::new();
        let _ = writeln!(manifest, "q = {}", self.shots());
        let _ = writeln!(manifest, "n_c = {}", self.n_c);
        match self.seed {
            Some(s) => {
                let _ = writeln!(manifest, "seed = {s}");
            }
            None => {
                let _ = writeln!(manifest, "seed = none");
            }
        }
        std::fs::write(dir.join("manifest.txt"), manifest)?;
        Ok(())
    }

    /// Reads a set written by [`write_pgm_set`](Self::write_pgm_set),
    /// revalidating every invariant.
    pub fn read_pgm_set(dir: &Path) -> Result<Self> {
        let manifest = std::fs::read_to_string(dir.join("manifest.txt"))?;
        let mut q = None;
        let mut n_c = None;
        let mut seed = None;
        for line in manifest.lines() {
            let Some((key, value)) = line.split_once('=') else {
                continue;
            };
            let value = value.trim();
            match key.trim() {
                "q" => q = Some(value.parse::<u32>().map_err(|_| Error::Format("bad q".into()))?),
                "n_c" => {
                    n_c = Some(
                        value
                            .parse::<u32>()
                            .map_err(|_| Error::Format("bad n_c".into()))?,
                    )
                }
                "seed" => seed = value.parse::<u64>().ok(),
                _ => {}
            }
        }
        let q = q.ok_or_else(|| Error::Format("manifest missing q".into()))?;
        let n_c = n_c.ok_or_else(|| Error::Format("manifest missing n_c".into()))?;
        let mut masks = Vec::with_capacity(q as usize);
        for i in 0..q {
            let (w, h, data) = crate::harness::pgm::read_pgm8(&dir.join(format!("mask_{i:03}.pgm")))?;
            if w != n_c || h != n_c {
                return Err(Error::Format(format!(
                    "mask {i}: size {w}x{h} does not match n_c = {n_c}"
                )));
            }
            let mut cells = vec![0u8; (n_c as usize).pow(2)];
            for row in 0..n_c as usize {
                for col in 0..n_c as usize {
                    cells[col * n_c as usize + row] =
                        (data[row * n_c as usize + col] >= 128) as u8;
                }
            }
            masks.push(cells);
        }
        CodedApertureSet::from_masks(n_c, masks, seed)
    }
}

/// Inclusive range of mask rows `n'` that detector row `n` integrates:
/// `n * C <= n' <= (n + 1) * C - 1` with `C = delta_d / delta_c`.
/// Rows align exactly because the ratio is an integer, so row overlaps are
/// always whole cells — only columns have fractional weights.
pub fn row_band(n: u32, g: &SystemGeometry) -> Result<(u32, u32)> {
    let c = g.cells_per_pixel()?;
    Ok((n * c, (n + 1) * c - 1))
}

/// Fractional column overlaps of one detector pixel in the fine-projection
/// regime, at a single wavelength.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapWeights {
    /// Code column covering the left edge of the pixel.
    pub first_column: i64,
    /// Overlap fraction per column, starting at `first_column`; interior
    /// entries are exactly 1, the two ends are the fractional covers.
    pub weights: Vec<f64>,
}

impl OverlapWeights {
    pub fn last_column(&self) -> i64 {
        self.first_column + self.weights.len() as i64 - 1
    }
}

/// Overlap weights `W[m, m']` of detector pixel `m` against the projected
/// code grid at wavelength `lambda_o`, in the [`Regime::MagnifiedLe`] regime.
///
/// In code-grid units the pixel `[m * delta_d, (m+1) * delta_d)` becomes
/// `[a, b) = [(m * delta_d) * (1-s) + shift, ((m+1) * delta_d) * (1-s) + shift)`
/// with `shift = s * alpha * lambda_o`, and the weight of column `m'` is the
/// overlap of `[a, b)` with `[m' * delta_c, (m'+1) * delta_c)` divided by the
/// cell width.  End columns whose overlap is exactly zero (grid-aligned
/// edges) are trimmed, so `weights` never carries zeros.
///
/// The returned range covers the *grid*, not the physical mask — columns may
/// lie outside `[0, n_c)`, where mask reads are zero.  The weights therefore
/// always satisfy the partition property
/// `sum w * delta_c / (1-s) == delta_d` exactly.
pub fn column_weights(m: u32, lambda_o: Rational, g: &SystemGeometry) -> Result<OverlapWeights> {
    if g.classify_regime() != Regime::MagnifiedLe {
        return Err(Error::WrongRegime(
            "column_weights applies when the projected cell is at most one pixel".into(),
        ));
    }
    let one_minus_s = Rational::ONE - g.s();
    let shift = g.dispersion_shift(lambda_o);
    let dc = g.delta_c();
    let a = Rational::from(m) * g.delta_d() * one_minus_s + shift;
    let b = Rational::from(m + 1) * g.delta_d() * one_minus_s + shift;
    let m_l = (a / dc).floor_int();
    // Right edge exactly on a cell boundary: that cell has zero overlap.
    let m_r = (b / dc).ceil_int() - 1;
    debug_assert!(m_r >= m_l);
    let mut weights = Vec::with_capacity((m_r - m_l + 1) as usize);
    if m_l == m_r {
        weights.push((g.delta_d() * one_minus_s / dc).to_f64());
    } else {
        for col in m_l..=m_r {
            let w = if col == m_l {
                (Rational::from_int(m_l + 1) * dc - a) / dc
            } else if col == m_r {
                (b - Rational::from_int(m_r) * dc) / dc
            } else {
                Rational::ONE
            };
            weights.push(w.to_f64());
        }
    }
    Ok(OverlapWeights {
        first_column: m_l as i64,
        weights,
    })
}

/// Coverage split in the coarse-projection regimes
/// ([`Regime::MagnifiedGt`] / [`Regime::CoarseMask`]): detector pixel `m`
/// straddles at most the boundary between projected cells `m' - 1` and `m'`,
/// with fraction `p` of the pixel under cell `m' - 1`.
///
/// `m' = floor((m * delta_d * (1-s) + shift) / delta_c) + 1`, and `p = 1`
/// when the pixel ends before the projected boundary of cell `m' - 1`
/// (including `s = 1`, where one cell covers the whole detector).
pub fn effective_fraction(m: u32, lambda_o: Rational, g: &SystemGeometry) -> Result<(i64, f64)> {
    if g.classify_regime() == Regime::MagnifiedLe {
        return Err(Error::WrongRegime(
            "effective_fraction applies when the projected cell exceeds one pixel".into(),
        ));
    }
    let one_minus_s = Rational::ONE - g.s();
    let shift = g.dispersion_shift(lambda_o);
    let a = Rational::from(m) * g.delta_d() * one_minus_s + shift;
    let m_prime = (a / g.delta_c()).floor_int() + 1;
    if one_minus_s.is_zero() {
        // Mask at the spectral plane: the projection is unbounded, the pixel
        // sits entirely under cell m' - 1.
        return Ok((m_prime as i64, 1.0));
    }
    // Detector-coordinate boundary of projected cell m' - 1.
    let boundary = (Rational::from_int(m_prime) * g.delta_c() - shift) / one_minus_s;
    let pixel_end = Rational::from(m + 1) * g.delta_d();
    let p = if pixel_end <= boundary {
        1.0
    } else {
        ((boundary - Rational::from(m) * g.delta_d()) / g.delta_d()).to_f64()
    };
    Ok((m_prime as i64, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Dispersion, GeometryConfig};
    use approx::assert_relative_eq;

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

    #[test]
    fn boolean_codes_are_complementary_and_deterministic() {
        let a = CodedApertureSet::generate_boolean(16, 4, 7).unwrap();
        let b = CodedApertureSet::generate_boolean(16, 4, 7).unwrap();
        assert_eq!(a, b);
        let c = CodedApertureSet::generate_boolean(16, 4, 8).unwrap();
        assert_ne!(a, c);
        for col in 0..16 {
            for row in 0..16 {
                let total: f64 = (0..4).map(|q| a.value(q, col, row)).sum();
                assert_eq!(total, 1.0);
            }
        }
    }

    #[test]
    fn single_shot_code_is_all_open() {
        let set = CodedApertureSet::generate_boolean(8, 1, 3).unwrap();
        for col in 0..8 {
            for row in 0..8 {
                assert_eq!(set.value(0, col, row), 1.0);
            }
        }
    }

    #[test]
    fn mask_reads_are_zero_outside() {
        let set = CodedApertureSet::generate_boolean(4, 1, 0).unwrap();
        assert_eq!(set.value(0, -1, 0), 0.0);
        assert_eq!(set.value(0, 4, 0), 0.0);
        assert_eq!(set.value(0, 0, 4), 0.0);
    }

    #[test]
    fn row_band_examples() {
        let g = geometry(32, "0.5", "1", "0.05", "1");
        assert_eq!(row_band(3, &g).unwrap(), (6, 7));
        let g = geometry(16, "0.25", "1", "0.05", "1");
        assert_eq!(row_band(0, &g).unwrap(), (0, 3));
        let coarse = geometry(32, "2", "1", "0.05", "1");
        assert!(row_band(0, &coarse).is_err());
    }

    #[test]
    fn column_weights_frozen_example() {
        // delta_c = 1, delta_d = 2, s = 0.2, no shift, m = 0: the pixel
        // [0, 2) spans projected cells of width 1.25 -> full cell 0 plus
        // 60 percent of cell 1.
        let g = geometry(32, "1", "2", "0.2", "1");
        let w = column_weights(0, Rational::ZERO, &g).unwrap();
        assert_eq!(w.first_column, 0);
        assert_eq!(w.weights, vec![1.0, 0.6]);
    }

    #[test]
    fn column_weights_aligned_single_cell() {
        // s = 0 and equal pitches: pixel == projected cell, weight exactly 1.
        let g = geometry(32, "1", "1", "0", "1");
        for m in [0, 5, 31] {
            let w = column_weights(m, Rational::ZERO, &g).unwrap();
            assert_eq!(w.first_column, m as i64);
            assert_eq!(w.weights, vec![1.0]);
        }
    }

    #[test]
    fn column_weights_partition_property() {
        // sum w * delta_c / (1 - s) == delta_d for every pixel, since the
        // grid partitions the pixel. Checked over an uneven geometry.
        let g = geometry(48, "0.5", "2", "3/7", "2");
        let cell = g.delta_c().to_f64() / (1.0 - g.s().to_f64());
        for m in 0..48 {
            let w = column_weights(m, r("37"), &g).unwrap();
            let total: f64 = w.weights.iter().sum();
            assert_relative_eq!(total * cell, 2.0, max_relative = 1e-12);
            for &v in &w.weights {
                assert!(v > 0.0 && v <= 1.0);
            }
            for &v in &w.weights[1..w.weights.len() - 1] {
                assert_eq!(v, 1.0);
            }
        }
    }

    #[test]
    fn effective_fraction_frozen_examples() {
        // Coarse mask delta_c = 2, s = 0: pixel 0 sits fully under cell 0.
        let g = geometry(32, "2", "1", "0", "1");
        assert_eq!(effective_fraction(0, Rational::ZERO, &g).unwrap(), (1, 1.0));

        // Equal pitches, s = 0.18, m = 1: boundary of cell 0 projects to
        // 1/0.82, leaving p = 9/41 of the pixel under it.
        let g = geometry(32, "1", "1", "0.18", "1");
        let (m_prime, p) = effective_fraction(1, Rational::ZERO, &g).unwrap();
        assert_eq!(m_prime, 1);
        assert_relative_eq!(p, 9.0 / 41.0, max_relative = 1e-15);
    }

    #[test]
    fn effective_fraction_at_spectral_plane() {
        let g = geometry(32, "1", "1", "1", "1");
        for m in 0..32 {
            let (m_prime, p) = effective_fraction(m, Rational::ZERO, &g).unwrap();
            assert_eq!((m_prime, p), (1, 1.0));
        }
    }

    #[test]
    fn effective_pattern_all_open_mask_is_one() {
        let g = geometry(16, "1", "1", "0.25", "1");
        let set = CodedApertureSet::generate_boolean(16, 1, 0).unwrap();
        let l = g.band_count().unwrap();
        // Columns stay on the mask for every pixel/band at beta = 1.
        for m in 0..16 {
            for k in 0..l {
                let v = set.effective_pattern_for_band(0, k, &g, 3, m).unwrap();
                assert_relative_eq!(v, 1.0, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn effective_pattern_band_shift_matches_shifted_mask() {
        // Band k of the original mask equals band 0 of the mask shifted left
        // by k columns.
        let g = geometry(16, "1", "1", "0.25", "1");
        let set = CodedApertureSet::generate_boolean(16, 3, 11).unwrap();
        let k = 2u32;
        let mut shifted = vec![vec![0u8; 16 * 16]; 3];
        for q in 0..3 {
            for col in 0..16i64 {
                for row in 0..16i64 {
                    shifted[q][(col as usize) * 16 + row as usize] =
                        set.value(q, col + k as i64, row) as u8;
                }
            }
        }
        // The shifted set loses complementarity at the wrapped edge, so
        // build it without validation through the generate path: compare
        // reads directly instead.
        for q in 0..3 {
            for m in 0..14 {
                let a = set.effective_pattern_for_band(q, k, &g, 5, m).unwrap();
                // Band-0 evaluation against the shifted values.
                let w = column_weights(m, g.lambda_min(), &g);
                assert!(w.is_err(), "geometry should be coarse-projection");
                let (m_prime, p) = effective_fraction(m, g.lambda_min(), &g).unwrap();
                let read = |col: i64, row: i64| -> f64 {
                    if !(0..16).contains(&col) || !(0..16).contains(&row) {
                        0.0
                    } else {
                        shifted[q as usize][(col as usize) * 16 + row as usize] as f64
                    }
                };
                let b: f64 = p * read(m_prime - 1, 5) + (1.0 - p) * read(m_prime, 5);
                assert_relative_eq!(a, b, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn effective_pattern_checkerboard_swaps_between_adjacent_bands() {
        // Equal pitches with s chosen so each band shifts by one whole
        // column: a checkerboard mask alternates its effective value.
        let g = geometry(16, "1", "1", "0.25", "1");
        let mut cells = vec![0u8; 16 * 16];
        let mut complement = vec![0u8; 16 * 16];
        for col in 0..16usize {
            for row in 0..16usize {
                let v = ((col + row) % 2) as u8;
                cells[col * 16 + row] = v;
                complement[col * 16 + row] = 1 - v;
            }
        }
        let set = CodedApertureSet::from_masks(16, vec![cells, complement], None).unwrap();
        // This geometry natively shifts one column per band only at the
        // matched position s = L / n_c; s = 0.25, n_c = 16 -> L = 4 matches.
        assert_eq!(g.band_count().unwrap(), 4);
        for m in 2..14 {
            let v0 = set.effective_pattern_for_band(0, 0, &g, 4, m).unwrap();
            let v1 = set.effective_pattern_for_band(0, 1, &g, 4, m).unwrap();
            let v2 = set.effective_pattern_for_band(0, 2, &g, 4, m).unwrap();
            assert_relative_eq!(v0, v2, max_relative = 1e-12);
            assert_relative_eq!(v0 + v1, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn pgm_round_trip_preserves_masks() {
        let dir = tempfile::tempdir().unwrap();
        let set = CodedApertureSet::generate_boolean(12, 3, 42).unwrap();
        set.write_pgm_set(dir.path()).unwrap();
        let back = CodedApertureSet::read_pgm_set(dir.path()).unwrap();
        assert_eq!(set, back);
    }
}
