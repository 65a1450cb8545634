//! Matrix-free linear operators.
//!
//! Recovery never materializes `A = H * Psi` densely — at the scales the
//! experiments run (tens of thousands of unknowns) that would be gigabytes.
//! Everything downstream (the solver, coherence scans, adjoint checks) works
//! through this trait instead, and compositions stay lazy.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `y = A x` / `x = A^T y` pair.  Implementations must be deterministic and
/// thread-safe; the solver calls both directions thousands of times.
pub trait LinearOperator: Send + Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;

    /// `y = A x`.  `x.len() == cols()`, `y.len() == rows()`.
    fn matvec(&self, x: &[f64], y: &mut [f64]);

    /// `x = A^T y`.  `y.len() == rows()`, `x.len() == cols()`.
    fn rmatvec(&self, y: &[f64], x: &mut [f64]);

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols(), "matvec input length");
        let mut y = vec![0.0; self.rows()];
        self.matvec(x, &mut y);
        y
    }

    fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows(), "rmatvec input length");
        let mut x = vec![0.0; self.cols()];
        self.rmatvec(y, &mut x);
        x
    }
}

/// `A = outer * inner` (apply `inner` first).
pub struct Composed<O, I> {
    outer: O,
    inner: I,
}

impl<O: LinearOperator, I: LinearOperator> Composed<O, I> {
    pub fn new(outer: O, inner: I) -> Self {
        assert_eq!(
            outer.cols(),
            inner.rows(),
            "composition dimension mismatch"
        );
        Composed { outer, inner }
    }
}

impl<O: LinearOperator, I: LinearOperator> LinearOperator for Composed<O, I> {
    fn rows(&self) -> usize {
        self.outer.rows()
    }

    fn cols(&self) -> usize {
        self.inner.cols()
    }

    fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let mid = self.inner.apply(x);
        self.outer.matvec(&mid, y);
    }

    fn rmatvec(&self, y: &[f64], x: &mut [f64]) {
        let mid = self.outer.apply_transpose(y);
        self.inner.rmatvec(&mid, x);
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn rows(&self) -> usize {
        (**self).rows()
    }
    fn cols(&self) -> usize {
        (**self).cols()
    }
    fn matvec(&self, x: &[f64], y: &mut [f64]) {
        (**self).matvec(x, y)
    }
    fn rmatvec(&self, y: &[f64], x: &mut [f64]) {
        (**self).rmatvec(y, x)
    }
}

impl LinearOperator for Box<dyn LinearOperator> {
    fn rows(&self) -> usize {
        (**self).rows()
    }
    fn cols(&self) -> usize {
        (**self).cols()
    }
    fn matvec(&self, x: &[f64], y: &mut [f64]) {
        (**self).matvec(x, y)
    }
    fn rmatvec(&self, y: &[f64], x: &mut [f64]) {
        (**self).rmatvec(y, x)
    }
}

pub struct Identity(pub usize);

impl LinearOperator for Identity {
    fn rows(&self) -> usize {
        self.0
    }
    fn cols(&self) -> usize {
        self.0
    }
    fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }
    fn rmatvec(&self, y: &[f64], x: &mut [f64]) {
        x.copy_from_slice(y);
    }
}

/// Row-major dense matrix; for tests, small oracles and the spectral
/// transform, not for the sensing matrix.
#[derive(Debug, Clone)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        DenseMatrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    /// Materializes any operator column by column — strictly a test/oracle
    /// device, cost `cols` matvecs.
    pub fn from_operator<A: LinearOperator + ?Sized>(a: &A) -> Self {
        let mut m = DenseMatrix::zeros(a.rows(), a.cols());
        let mut e = vec![0.0; a.cols()];
        let mut col = vec![0.0; a.rows()];
        for j in 0..a.cols() {
            e[j] = 1.0;
            a.matvec(&e, &mut col);
            e[j] = 0.0;
            for (i, &v) in col.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }
}

impl LinearOperator for DenseMatrix {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            *out = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    fn rmatvec(&self, y: &[f64], x: &mut [f64]) {
        x.fill(0.0);
        for (r, &v) in y.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            for (o, &a) in x.iter_mut().zip(row) {
                *o += v * a;
            }
        }
    }
}

/// Keeps the first `keep_x` of `from_x` x-planes of a cube laid out as
/// `(band, x, y)`; the adjoint zero-pads them back.  Used when a transform
/// needs a larger (e.g. dyadic) spatial grid than the cube being recovered:
/// the recovery operator becomes `H * CropX * Psi`.
pub struct CropX {
    n_y: usize,
    bands: usize,
    from_x: usize,
    keep_x: usize,
}

impl CropX {
    pub fn new(from_x: usize, keep_x: usize, n_y: usize, bands: usize) -> Self {
        assert!(keep_x <= from_x, "crop cannot grow the grid");
        CropX {
            n_y,
            bands,
            from_x,
            keep_x,
        }
    }
}

impl LinearOperator for CropX {
    fn rows(&self) -> usize {
        self.bands * self.keep_x * self.n_y
    }

    fn cols(&self) -> usize {
        self.bands * self.from_x * self.n_y
    }

    fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let src_stride = self.from_x * self.n_y;
        let dst_stride = self.keep_x * self.n_y;
        for k in 0..self.bands {
            let src = &x[k * src_stride..k * src_stride + dst_stride];
            y[k * dst_stride..(k + 1) * dst_stride].copy_from_slice(src);
        }
    }

    fn rmatvec(&self, y: &[f64], x: &mut [f64]) {
        x.fill(0.0);
        let src_stride = self.from_x * self.n_y;
        let dst_stride = self.keep_x * self.n_y;
        for k in 0..self.bands {
            let src = &y[k * dst_stride..(k + 1) * dst_stride];
            x[k * src_stride..k * src_stride + dst_stride].copy_from_slice(src);
        }
    }
}

/// Box resampling between two cube grids as a linear map on vectorized
/// cubes.  matvec reproduces [`crate::cube::Datacube::box_resample`] exactly
/// (same projection weights, same pass order y/x/λ, same accumulation
/// order), so composing this with a sensing matrix models measuring a cube
/// that was stored on a different grid: each output cell is the mean of the
/// input over its box.
pub struct BoxResample {
    from: (usize, usize, usize),
    to: (usize, usize, usize),
    proj_y: Vec<(usize, usize, f64)>,
    proj_x: Vec<(usize, usize, f64)>,
    proj_k: Vec<(usize, usize, f64)>,
}

impl BoxResample {
    pub fn new(from: (u32, u32, u32), to: (u32, u32, u32)) -> Self {
        assert!(
            from.0 > 0 && from.1 > 0 && from.2 > 0 && to.0 > 0 && to.1 > 0 && to.2 > 0,
            "resample grids must be non-empty"
        );
        BoxResample {
            from: (from.0 as usize, from.1 as usize, from.2 as usize),
            to: (to.0 as usize, to.1 as usize, to.2 as usize),
            proj_y: crate::cube::box_project_1d(from.1 as usize, to.1 as usize),
            proj_x: crate::cube::box_project_1d(from.0 as usize, to.0 as usize),
            proj_k: crate::cube::box_project_1d(from.2 as usize, to.2 as usize),
        }
    }
}

impl LinearOperator for BoxResample {
    fn rows(&self) -> usize {
        self.to.0 * self.to.1 * self.to.2
    }

    fn cols(&self) -> usize {
        self.from.0 * self.from.1 * self.from.2
    }

    fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let (fx, fy, fl) = self.from;
        let (tx, ty, _) = self.to;
        // Same pass order as the cube method: y, then x, then λ.
        let mut a = vec![0.0; fl * fx * ty];
        for k in 0..fl {
            for xi in 0..fx {
                let src = &x[(k * fx + xi) * fy..(k * fx + xi + 1) * fy];
                let dst = &mut a[(k * fx + xi) * ty..(k * fx + xi + 1) * ty];
                for &(d, s, w) in &self.proj_y {
                    dst[d] += w * src[s];
                }
            }
        }
        let mut b = vec![0.0; fl * tx * ty];
        for k in 0..fl {
            for &(d, s, w) in &self.proj_x {
                let src = &a[(k * fx + s) * ty..(k * fx + s + 1) * ty];
                let dst = &mut b[(k * tx + d) * ty..(k * tx + d + 1) * ty];
                for (o, v) in dst.iter_mut().zip(src) {
                    *o += w * v;
                }
            }
        }
        y.fill(0.0);
        let sites = tx * ty;
        for &(d, s, w) in &self.proj_k {
            let src = &b[s * sites..(s + 1) * sites];
            let dst = &mut y[d * sites..(d + 1) * sites];
            for (o, v) in dst.iter_mut().zip(src) {
                *o += w * v;
            }
        }
    }

    fn rmatvec(&self, y: &[f64], x: &mut [f64]) {
        let (fx, fy, fl) = self.from;
        let (tx, ty, _) = self.to;
        // Transposed passes in reverse order: λ, then x, then y.
        let sites = tx * ty;
        let mut b = vec![0.0; fl * tx * ty];
        for &(d, s, w) in &self.proj_k {
            let src = &y[d * sites..(d + 1) * sites];
            let dst = &mut b[s * sites..(s + 1) * sites];
            for (o, v) in dst.iter_mut().zip(src) {
                *o += w * v;
            }
        }
        let mut a = vec![0.0; fl * fx * ty];
        for k in 0..fl {
            for &(d, s, w) in &self.proj_x {
                let src = &b[(k * tx + d) * ty..(k * tx + d + 1) * ty];
                let dst = &mut a[(k * fx + s) * ty..(k * fx + s + 1) * ty];
                for (o, v) in dst.iter_mut().zip(src) {
                    *o += w * v;
                }
            }
        }
        x.fill(0.0);
        for k in 0..fl {
            for xi in 0..fx {
                let src = &a[(k * fx + xi) * ty..(k * fx + xi + 1) * ty];
                let dst = &mut x[(k * fx + xi) * fy..(k * fx + xi + 1) * fy];
                for &(d, s, w) in &self.proj_y {
                    dst[s] += w * src[d];
                }
            }
        }
    }
}

/// Power-method estimate of the spectral norm `||A||_2`, used to scale
/// solver starting points.  Fixed internal seed: the estimate is part of the
/// deterministic pipeline.
pub fn operator_norm_est<A: LinearOperator + ?Sized>(a: &A, iters: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5350454354524d);
    let mut x: Vec<f64> = (0..a.cols()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut y = vec![0.0; a.rows()];
    let mut norm = 0.0;
    for _ in 0..iters {
        let nx = l2(&x);
        if nx == 0.0 {
            return 0.0;
        }
        x.iter_mut().for_each(|v| *v /= nx);
        a.matvec(&x, &mut y);
        a.rmatvec(&y, &mut x);
        // After normalization, |A^T A x| estimates the top eigenvalue.
        norm = l2(&x).sqrt();
    }
    norm
}

/// Largest relative defect of `<Ax, y> == <x, A^T y>` over a few random
/// probes — a cheap smoke test that an implementation's two directions agree.
pub fn adjoint_gap<A: LinearOperator + ?Sized>(a: &A, probes: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..probes {
        let x: Vec<f64> = (0..a.cols()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..a.rows()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ax = a.apply(&x);
        let aty = a.apply_transpose(&y);
        let lhs: f64 = ax.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&aty).map(|(a, b)| a * b).sum();
        let scale = l2(&ax) * l2(&y) + l2(&x) * l2(&aty) + 1e-300;
        worst = worst.max((lhs - rhs).abs() / scale);
    }
    worst
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small() -> DenseMatrix {
        DenseMatrix::new(2, 3, vec![1.0, -2.0, 0.5, 0.0, 3.0, 1.0])
    }

    #[test]
    fn dense_matvec_and_adjoint() {
        let m = small();
        assert_eq!(m.apply(&[1.0, 1.0, 2.0]), vec![0.0, 5.0]);
        assert_eq!(m.apply_transpose(&[1.0, 2.0]), vec![1.0, 4.0, 2.5]);
        assert!(adjoint_gap(&m, 5, 1) < 1e-15);
    }

    #[test]
    fn composition_matches_manual_product() {
        let a = small(); // 2x3
        let b = DenseMatrix::new(3, 2, vec![1.0, 0.0, 2.0, 1.0, -1.0, 0.5]); // 3x2
        let ab = Composed::new(a, b);
        assert_eq!(ab.rows(), 2);
        assert_eq!(ab.cols(), 2);
        let x = [3.0, -1.0];
        let manual = small().apply(&DenseMatrix::new(3, 2, vec![1.0, 0.0, 2.0, 1.0, -1.0, 0.5]).apply(&x));
        assert_eq!(ab.apply(&x), manual);
        assert!(adjoint_gap(&ab, 5, 2) < 1e-15);
    }

    #[test]
    fn crop_and_pad_are_adjoint() {
        let crop = CropX::new(8, 5, 3, 2);
        assert_eq!(crop.cols(), 48);
        assert_eq!(crop.rows(), 30);
        assert!(adjoint_gap(&crop, 8, 3) < 1e-15);
        // Crop then pad is identity on the kept region.
        let x: Vec<f64> = (0..48).map(|i| i as f64).collect();
        let y = crop.apply(&x);
        let back = crop.apply_transpose(&y);
        assert_eq!(crop.apply(&back), y);
    }

    #[test]
    fn norm_estimate_close_to_exact() {
        // Diagonal matrix: exact spectral norm is the largest |entry|.
        let mut d = DenseMatrix::zeros(6, 6);
        for (i, v) in [0.5, -3.0, 1.0, 2.0, 0.1, 2.9].iter().enumerate() {
            d.set(i, i, *v);
        }
        let est = operator_norm_est(&d, 50);
        assert_relative_eq!(est, 3.0, max_relative = 1e-3);
    }

    #[test]
    fn materialized_operator_round_trips() {
        let m = small();
        let d = DenseMatrix::from_operator(&m);
        assert_eq!(d.apply(&[1.0, 2.0, 3.0]), m.apply(&[1.0, 2.0, 3.0]));
    }

    #[test]
    fn box_resample_operator_matches_cube_resample_bitwise() {
        use crate::cube::Datacube;
        let mut cube = Datacube::zeros(5, 4, 8);
        for (i, v) in cube.values_mut().iter_mut().enumerate() {
            *v = (i as f64 * 0.37).sin();
        }
        // Spectral-only, spatial-only, mixed, fractional and upsampling targets.
        for to in [(5u32, 4u32, 1u32), (5, 4, 3), (5, 4, 11), (3, 7, 8), (2, 2, 2), (5, 4, 8)] {
            let r = BoxResample::new((5, 4, 8), to);
            let via_op = r.apply(cube.values());
            let via_cube = cube.box_resample(to.0, to.1, to.2).unwrap();
            assert_eq!(via_op, via_cube.values(), "target {to:?}");
        }
    }

    #[test]
    fn box_resample_directions_are_adjoint() {
        for (from, to) in [
            ((3u32, 3u32, 8u32), (3u32, 3u32, 3u32)),
            ((3, 3, 3), (3, 3, 8)),
            ((4, 6, 2), (7, 3, 5)),
            ((2, 2, 2), (2, 2, 2)),
        ] {
            let r = BoxResample::new(from, to);
            assert!(adjoint_gap(&r, 10, 7) < 1e-15, "{from:?} -> {to:?}");
        }
    }
}
