//! Orthonormal cosine transform along the spectral axis.
//!
//! Band counts are tiny (a handful to a few dozen), so the transform is a
//! direct dense multiply by the orthonormal DCT-II matrix; the inverse is
//! its transpose.  No FFT needed at these sizes.

use crate::operator::DenseMatrix;

#[derive(Debug, Clone)]
pub struct SpectralDct {
    n: usize,
    /// Orthonormal DCT-II matrix: `basis[k][t] = c_k cos(pi (2t+1) k / 2n)`.
    basis: DenseMatrix,
}

impl SpectralDct {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "empty spectral axis");
        let mut basis = DenseMatrix::zeros(n, n);
        for k in 0..n {
            let c = if k == 0 {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            };
            for t in 0..n {
                let angle = std::f64::consts::PI * (2 * t + 1) as f64 * k as f64 / (2 * n) as f64;
                basis.set(k, t, c * angle.cos());
            }
        }
        SpectralDct { n, basis }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Coefficients `a = C x` (DCT-II).
    pub fn forward(&self, x: &[f64], a: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for (k, out) in a.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (t, &v) in x.iter().enumerate() {
                acc += self.basis.at(k, t) * v;
            }
            *out = acc;
        }
    }

    /// Signal `x = C^T a` (DCT-III); exact inverse of [`forward`](Self::forward)
    /// because the matrix is orthonormal.
    pub fn inverse(&self, a: &[f64], x: &mut [f64]) {
        debug_assert_eq!(a.len(), self.n);
        x.fill(0.0);
        for (k, &v) in a.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            for (t, out) in x.iter_mut().enumerate() {
                *out += self.basis.at(k, t) * v;
            }
        }
    }

    #[inline]
    pub fn coefficient(&self, k: usize, t: usize) -> f64 {
        self.basis.at(k, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn two_point_transform_matches_closed_form() {
        let d = SpectralDct::new(2);
        let r = 0.5f64.sqrt();
        assert_relative_eq!(d.coefficient(0, 0), r, max_relative = 1e-15);
        assert_relative_eq!(d.coefficient(0, 1), r, max_relative = 1e-15);
        assert_relative_eq!(d.coefficient(1, 0), r, max_relative = 1e-15);
        assert_relative_eq!(d.coefficient(1, 1), -r, max_relative = 1e-15);
    }

    #[test]
    fn rows_are_orthonormal() {
        for n in 1..=9 {
            let d = SpectralDct::new(n);
            for i in 0..n {
                for j in 0..n {
                    let dot: f64 = (0..n).map(|t| d.coefficient(i, t) * d.coefficient(j, t)).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert_relative_eq!(dot, want, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn constant_signal_concentrates_in_dc() {
        let n = 7;
        let d = SpectralDct::new(n);
        let x = vec![3.0; n];
        let mut a = vec![0.0; n];
        d.forward(&x, &mut a);
        assert_relative_eq!(a[0], 3.0 * (n as f64).sqrt(), max_relative = 1e-13);
        for &v in &a[1..] {
            assert!(v.abs() < 1e-13);
        }
    }

    #[test]
    fn forward_then_inverse_is_identity() {
        let n = 8;
        let d = SpectralDct::new(n);
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin() + 0.3).collect();
        let mut a = vec![0.0; n];
        let mut back = vec![0.0; n];
        d.forward(&x, &mut a);
        d.inverse(&a, &mut back);
        for (u, v) in x.iter().zip(&back) {
            assert_relative_eq!(u, v, epsilon = 1e-13);
        }
        // Parseval.
        let ex: f64 = x.iter().map(|v| v * v).sum();
        let ea: f64 = a.iter().map(|v| v * v).sum();
        assert_relative_eq!(ex, ea, max_relative = 1e-13);
    }
}
