//! Sparsifying basis for spectral datacubes.
//!
//! Separable product: a 2-D wavelet basis over each band's spatial plane,
//! tensored with a cosine basis along the spectral axis.  Both factors are
//! orthonormal, so the whole basis is orthonormal and analysis is exactly
//! the transpose of synthesis — the recovery operator can use `rmatvec`
//! without keeping a second code path.
//!
//! Vectors use cube layout (`(band, x, y)` flattened); coefficient vectors
//! use the same shape, with index `(j, u, v)` meaning spectral atom `j` and
//! spatial wavelet atom `(u, v)`.

mod dct;
mod wavelet;

pub use dct::SpectralDct;
pub use wavelet::{qmf_residuals, Wavelet2d, SYM8_DEC_LO};

use crate::error::Result;
use crate::operator::LinearOperator;

pub struct SparsityBasis {
    wavelet: Wavelet2d,
    dct: SpectralDct,
    n_x: usize,
    n_y: usize,
    l: usize,
}

impl SparsityBasis {
    pub fn new(n_x: usize, n_y: usize, l: usize, levels: u32) -> Result<Self> {
        let wavelet = Wavelet2d::new(n_x, n_y, levels)?;
        let dct = SpectralDct::new(l);
        Ok(SparsityBasis {
            wavelet,
            dct,
            n_x,
            n_y,
            l,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n_x, self.n_y, self.l)
    }

    fn plane(&self) -> usize {
        self.n_x * self.n_y
    }

    /// Nonzero samples of one spatial synthesis atom: the plane produced by
    /// a unit coefficient at flat index `idx`.  Wavelet atoms have compact
    /// support, so this is sparse at fine scales; coherence scans exploit
    /// that to apply the sensing matrix to single atoms cheaply.
    pub fn spatial_atom(&self, idx: usize) -> Vec<(u32, f64)> {
        let mut plane = vec![0.0; self.plane()];
        plane[idx] = 1.0;
        self.wavelet.synthesize_plane(&mut plane);
        plane
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, &v)| (i as u32, v))
            .collect()
    }

    /// Band profile of spectral synthesis atom `j` (one cosine line).
    pub fn spectral_atom(&self, j: usize) -> Vec<f64> {
        if self.l == 1 {
            return vec![1.0];
        }
        (0..self.l).map(|k| self.dct.coefficient(j, k)).collect()
    }

    /// Spectral mix along the band axis at every pixel.  `forward` picks
    /// DCT-II (analysis), otherwise DCT-III (synthesis).
    fn spectral_pass(&self, buf: &mut [f64], forward: bool) {
        if self.l == 1 {
            return; // one band: the spectral factor is the identity
        }
        let stride = self.plane();
        let mut line = vec![0.0; self.l];
        let mut mixed = vec![0.0; self.l];
        for p in 0..stride {
            for k in 0..self.l {
                line[k] = buf[k * stride + p];
            }
            if forward {
                self.dct.forward(&line, &mut mixed);
            } else {
                self.dct.inverse(&line, &mut mixed);
            }
            for k in 0..self.l {
                buf[k * stride + p] = mixed[k];
            }
        }
    }
}

impl LinearOperator for SparsityBasis {
    fn rows(&self) -> usize {
        self.plane() * self.l
    }

    fn cols(&self) -> usize {
        self.plane() * self.l
    }

    /// Synthesis: coefficients -> cube.
    fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
        self.spectral_pass(y, false);
        let stride = self.plane();
        for k in 0..self.l {
            self.wavelet
                .synthesize_plane(&mut y[k * stride..(k + 1) * stride]);
        }
    }

    /// Analysis: cube -> coefficients (transpose of synthesis).
    fn rmatvec(&self, y: &[f64], x: &mut [f64]) {
        x.copy_from_slice(y);
        let stride = self.plane();
        for k in 0..self.l {
            self.wavelet
                .analyze_plane(&mut x[k * stride..(k + 1) * stride]);
        }
        self.spectral_pass(x, true);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::adjoint_gap;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    #[test]
    fn synthesis_and_analysis_invert_each_other() {
        let b = SparsityBasis::new(16, 16, 4, 2).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let cube: Vec<f64> = (0..b.rows()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let coeffs = b.apply_transpose(&cube);
        let back = b.apply(&coeffs);
        for (a, c) in cube.iter().zip(&back) {
            assert_relative_eq!(a, c, epsilon = 1e-10);
        }
        // Orthonormal: energies agree.
        let e0: f64 = cube.iter().map(|v| v * v).sum();
        let e1: f64 = coeffs.iter().map(|v| v * v).sum();
        assert_relative_eq!(e0, e1, max_relative = 1e-12);
    }

    #[test]
    fn analysis_is_the_exact_adjoint() {
        let b = SparsityBasis::new(8, 16, 3, 2).unwrap();
        assert!(adjoint_gap(&b, 6, 17) < 1e-13);
    }

    #[test]
    fn constant_cube_concentrates_in_spectral_dc_low_low() {
        let (nx, ny, l, levels) = (16usize, 16usize, 4usize, 2u32);
        let b = SparsityBasis::new(nx, ny, l, levels).unwrap();
        let cube = vec![2.0; nx * ny * l];
        let coeffs = b.apply_transpose(&cube);
        // Nonzeros only at spectral atom 0, spatial LL quadrant (4x4), all
        // equal 2 * 2^levels * sqrt(l).
        let want = 2.0 * 4.0 * (l as f64).sqrt();
        for j in 0..l {
            for u in 0..nx {
                for v in 0..ny {
                    let c = coeffs[(j * nx + u) * ny + v];
                    if j == 0 && u < 4 && v < 4 {
                        assert_relative_eq!(c, want, max_relative = 1e-10);
                    } else {
                        assert!(c.abs() < 1e-9, "unexpected energy at ({j},{u},{v}): {c}");
                    }
                }
            }
        }
    }

    #[test]
    fn atom_is_separable_product() {
        // Synthesizing a single coefficient must give (spectral profile) x
        // (spatial atom): every band is the same plane scaled by the DCT
        // column.
        let (nx, ny, l) = (8usize, 8usize, 3usize);
        let b = SparsityBasis::new(nx, ny, l, 1).unwrap();
        let mut e = vec![0.0; b.cols()];
        let (j, u, v) = (2usize, 1usize, 5usize);
        e[(j * nx + u) * ny + v] = 1.0;
        let cube = b.apply(&e);
        let plane0: Vec<f64> = cube[..nx * ny].to_vec();
        let dct = SpectralDct::new(l);
        for k in 0..l {
            let scale = dct.coefficient(j, k) / dct.coefficient(j, 0);
            for p in 0..nx * ny {
                assert_relative_eq!(
                    cube[k * nx * ny + p],
                    plane0[p] * scale,
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn single_band_skips_spectral_mixing() {
        let b = SparsityBasis::new(8, 8, 1, 2).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let cube: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let coeffs = b.apply_transpose(&cube);
        let w = Wavelet2d::new(8, 8, 2).unwrap();
        let mut direct = cube.clone();
        w.analyze_plane(&mut direct);
        assert_eq!(coeffs, direct);
    }
}
