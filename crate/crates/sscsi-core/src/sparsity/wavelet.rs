//! Periodized orthonormal 2-D wavelet transform (Symlet-8).
//!
//! Analysis convention: `a[i] = sum_t h[t] x[(2i + t) mod n]`, detail filter
//! `g[t] = (-1)^t h[15 - t]`, synthesis is the adjoint — which equals the
//! inverse exactly because the filter pair is orthonormal.  Circular
//! extension keeps the transform square and orthonormal at every dyadic
//! size, so Parseval holds to roundoff and the solver can treat analysis
//! and synthesis as a transposed pair.
//!
//! Planes are `n_x x n_y` row-major (`plane[x * n_y + y]`); a level filters
//! along y per row, then along x per column, and recurses on the low-low
//! quadrant.

use crate::error::{Error, Result};

/// Symlet-8 scaling (low-pass decomposition) filter.  The digits are frozen
/// here and revalidated against the orthonormality conditions on every
/// construction, so a corrupted constant fails fast rather than producing a
/// subtly non-orthogonal transform.
pub const SYM8_DEC_LO: [f64; 16] = [
    -0.0033824159510061256,
    -0.0005421323317911481,
    0.03169508781149298,
    0.007607487324917605,
    -0.1432942383508097,
    -0.061273359067658524,
    0.4813596512583722,
    0.7771857517005235,
    0.3644418948353314,
    -0.051945838107709037,
    -0.027219029917056003,
    0.049137179673607506,
    0.003808752013890615,
    -0.01495225833704823,
    -0.0003029205147213668,
    0.0018899503327594609,
];

const TAPS: usize = 16;

/// Orthonormality residuals of a candidate scaling filter: DC gain against
/// `sqrt(2)`, unit energy, and all even-shift self-correlations.
pub fn qmf_residuals(h: &[f64; TAPS]) -> (f64, f64, f64) {
    let dc: f64 = h.iter().sum::<f64>() - std::f64::consts::SQRT_2;
    let energy: f64 = h.iter().map(|v| v * v).sum::<f64>() - 1.0;
    let mut shift = 0.0f64;
    for k in 1..TAPS / 2 {
        let corr: f64 = (0..TAPS - 2 * k).map(|t| h[t] * h[t + 2 * k]).sum();
        shift = shift.max(corr.abs());
    }
    (dc.abs(), energy.abs(), shift)
}

#[derive(Debug, Clone)]
pub struct Wavelet2d {
    n_x: usize,
    n_y: usize,
    levels: u32,
    h: [f64; TAPS],
    g: [f64; TAPS],
}

impl Wavelet2d {
    /// `levels` decomposition steps on an `n_x x n_y` plane.  Both sizes
    /// must be divisible by `2^levels` so every quadrant split is exact.
    pub fn new(n_x: usize, n_y: usize, levels: u32) -> Result<Self> {
        if levels == 0 {
            return Err(Error::InvalidGeometry("wavelet depth must be >= 1".into()));
        }
        let block = 1usize << levels;
        if n_x == 0 || n_y == 0 || n_x % block != 0 || n_y % block != 0 {
            return Err(Error::InvalidGeometry(format!(
                "plane {n_x}x{n_y} is not divisible by 2^{levels}"
            )));
        }
        let h = SYM8_DEC_LO;
        let (dc, energy, shift) = qmf_residuals(&h);
        if dc > 1e-10 || energy > 1e-10 || shift > 1e-10 {
            return Err(Error::Numerical(format!(
                "scaling filter fails orthonormality: dc {dc:.2e}, energy {energy:.2e}, shift {shift:.2e}"
            )));
        }
        let mut g = [0.0; TAPS];
        for (t, out) in g.iter_mut().enumerate() {
            let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
            *out = sign * h[TAPS - 1 - t];
        }
        Ok(Wavelet2d {
            n_x,
            n_y,
            levels,
            h,
            g,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n_x, self.n_y)
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    /// In-place multilevel analysis; `plane.len() == n_x * n_y`.
    pub fn analyze_plane(&self, plane: &mut [f64]) {
        debug_assert_eq!(plane.len(), self.n_x * self.n_y);
        let mut sx = self.n_x;
        let mut sy = self.n_y;
        let mut line = vec![0.0; self.n_x.max(self.n_y)];
        let mut halves = vec![0.0; self.n_x.max(self.n_y)];
        for _ in 0..self.levels {
            // Along y: each of the sx active rows.
            for x in 0..sx {
                let row = &mut plane[x * self.n_y..x * self.n_y + sy];
                line[..sy].copy_from_slice(row);
                self.step_1d(&line[..sy], &mut halves[..sy]);
                row.copy_from_slice(&halves[..sy]);
            }
            // Along x: each of the sy active columns.
            for y in 0..sy {
                for x in 0..sx {
                    line[x] = plane[x * self.n_y + y];
                }
                self.step_1d(&line[..sx], &mut halves[..sx]);
                for x in 0..sx {
                    plane[x * self.n_y + y] = halves[x];
                }
            }
            sx /= 2;
            sy /= 2;
        }
    }

    /// In-place multilevel synthesis; exact inverse of
    /// [`analyze_plane`](Self::analyze_plane).
    pub fn synthesize_plane(&self, plane: &mut [f64]) {
        debug_assert_eq!(plane.len(), self.n_x * self.n_y);
        let mut line = vec![0.0; self.n_x.max(self.n_y)];
        let mut halves = vec![0.0; self.n_x.max(self.n_y)];
        for level in (0..self.levels).rev() {
            let sx = self.n_x >> level;
            let sy = self.n_y >> level;
            for y in 0..sy {
                for x in 0..sx {
                    halves[x] = plane[x * self.n_y + y];
                }
                self.step_1d_adjoint(&halves[..sx], &mut line[..sx]);
                for x in 0..sx {
                    plane[x * self.n_y + y] = line[x];
                }
            }
            for x in 0..sx {
                let row = &mut plane[x * self.n_y..x * self.n_y + sy];
                halves[..sy].copy_from_slice(row);
                self.step_1d_adjoint(&halves[..sy], &mut line[..sy]);
                row.copy_from_slice(&line[..sy]);
            }
        }
    }

    /// One periodized analysis step: `x` (length n, even) -> `[a | d]`.
    fn step_1d(&self, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        let half = n / 2;
        for i in 0..half {
            let mut a = 0.0;
            let mut d = 0.0;
            for t in 0..TAPS {
                let v = x[(2 * i + t) % n];
                a += self.h[t] * v;
                d += self.g[t] * v;
            }
            out[i] = a;
            out[half + i] = d;
        }
    }

    /// Adjoint of [`step_1d`](Self::step_1d): `[a | d]` -> `x`.
    fn step_1d_adjoint(&self, coeffs: &[f64], out: &mut [f64]) {
        let n = coeffs.len();
        let half = n / 2;
        out[..n].fill(0.0);
        for i in 0..half {
            let a = coeffs[i];
            let d = coeffs[half + i];
            for t in 0..TAPS {
                out[(2 * i + t) % n] += self.h[t] * a + self.g[t] * d;
            }
        }
    }
}
