//! Spectral datacubes and their on-disk format.
//!
//! A cube holds `l` spectral bands of an `n_x x n_y` spatial image.  Storage
//! is a flat `Vec<f64>` with the spectral index outermost —
//! `data[k * n_x * n_y + x * n_y + y]` — so each band is one contiguous
//! slice, which is the access pattern of the forward model (it walks a band
//! at a fixed spectral shift).
//!
//! The `.ssc` file format is deliberately dumb: magic `SSC1`, three
//! little-endian `u32` dimensions, then the values as little-endian `f32`
//! in storage order.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Datacube {
    n_x: u32,
    n_y: u32,
    l: u32,
    data: Vec<f64>,
}

impl Datacube {
    pub fn zeros(n_x: u32, n_y: u32, l: u32) -> Self {
        Datacube {
            n_x,
            n_y,
            l,
            data: vec![0.0; n_x as usize * n_y as usize * l as usize],
        }
    }

    pub fn from_vec(n_x: u32, n_y: u32, l: u32, data: Vec<f64>) -> Result<Self> {
        let expected = n_x as usize * n_y as usize * l as usize;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: data.len(),
            });
        }
        Ok(Datacube { n_x, n_y, l, data })
    }

    pub fn dims(&self) -> (u32, u32, u32) {
        (self.n_x, self.n_y, self.l)
    }

    pub fn n_x(&self) -> u32 {
        self.n_x
    }

    pub fn n_y(&self) -> u32 {
        self.n_y
    }

    pub fn bands(&self) -> u32 {
        self.l
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, x: u32, y: u32, k: u32) -> usize {
        (k as usize * self.n_x as usize + x as usize) * self.n_y as usize + y as usize
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32, k: u32) -> f64 {
        self.data[self.index(x, y, k)]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, k: u32, value: f64) {
        let i = self.index(x, y, k);
        self.data[i] = value;
    }

    /// Band `k` as a contiguous `n_x * n_y` slice.
    pub fn band(&self, k: u32) -> &[f64] {
        let stride = self.n_x as usize * self.n_y as usize;
        &self.data[k as usize * stride..(k as usize + 1) * stride]
    }

    pub fn band_mut(&mut self, k: u32) -> &mut [f64] {
        let stride = self.n_x as usize * self.n_y as usize;
        &mut self.data[k as usize * stride..(k as usize + 1) * stride]
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Mean-preserving box resample to new dimensions: every target voxel is
    /// the average of the source voxels it covers, weighted by geometric
    /// overlap.  Constant cubes stay constant and the cube integral
    /// (sum / voxel count scaling aside) is conserved exactly up to
    /// floating-point roundoff, which is what the shear studies need when
    /// they re-grid one scene onto different band counts.
    pub fn box_resample(&self, n_x: u32, n_y: u32, l: u32) -> Result<Self> {
        if n_x == 0 || n_y == 0 || l == 0 {
            return Err(Error::InvalidGeometry(
                "resample target must be non-empty".into(),
            ));
        }
        let mut out = self.clone();
        out = out.resample_axis_y(n_y);
        out = out.resample_axis_x(n_x);
        out = out.resample_axis_k(l);
        Ok(out)
    }

    fn resample_axis_y(&self, new: u32) -> Self {
        let proj = box_project_1d(self.n_y as usize, new as usize);
        let mut out = Datacube::zeros(self.n_x, new, self.l);
        for k in 0..self.l {
            for x in 0..self.n_x {
                for &(dst, src, w) in &proj {
                    let v = self.get(x, src as u32, k);
                    let i = out.index(x, dst as u32, k);
                    out.data[i] += w * v;
                }
            }
        }
        out
    }

    fn resample_axis_x(&self, new: u32) -> Self {
        let proj = box_project_1d(self.n_x as usize, new as usize);
        let mut out = Datacube::zeros(new, self.n_y, self.l);
        for k in 0..self.l {
            for &(dst, src, w) in &proj {
                for y in 0..self.n_y {
                    let v = self.get(src as u32, y, k);
                    let i = out.index(dst as u32, y, k);
                    out.data[i] += w * v;
                }
            }
        }
        out
    }

    fn resample_axis_k(&self, new: u32) -> Self {
        let proj = box_project_1d(self.l as usize, new as usize);
        let mut out = Datacube::zeros(self.n_x, self.n_y, new);
        let stride = self.n_x as usize * self.n_y as usize;
        for &(dst, src, w) in &proj {
            let src_band = &self.data[src * stride..(src + 1) * stride];
            let dst_band = &mut out.data[dst * stride..(dst + 1) * stride];
            for (o, v) in dst_band.iter_mut().zip(src_band) {
                *o += w * v;
            }
        }
        out
    }

    pub fn write_ssc(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(b"SSC1")?;
        for d in [self.n_x, self.n_y, self.l] {
            f.write_all(&d.to_le_bytes())?;
        }
        for &v in &self.data {
            f.write_all(&(v as f32).to_le_bytes())?;
        }
        f.flush()?;
        Ok(())
    }

    pub fn read_ssc(path: &Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 4];
        f.read_exact(&mut magic)?;
        if &magic != b"SSC1" {
            return Err(Error::Format(format!(
                "{}: not a cube file (bad magic)",
                path.display()
            )));
        }
        let mut dim = [0u8; 4];
        let mut dims = [0u32; 3];
        for d in &mut dims {
            f.read_exact(&mut dim)?;
            *d = u32::from_le_bytes(dim);
        }
        let [n_x, n_y, l] = dims;
        let count = (n_x as usize)
            .checked_mul(n_y as usize)
            .and_then(|v| v.checked_mul(l as usize))
            .ok_or_else(|| Error::Format("cube dimensions overflow".into()))?;
        let mut data = Vec::with_capacity(count);
        let mut buf = [0u8; 4];
        for _ in 0..count {
            f.read_exact(&mut buf)?;
            data.push(f32::from_le_bytes(buf) as f64);
        }
        // Trailing bytes mean the header lied about the shape.
        if f.read(&mut buf)? != 0 {
            return Err(Error::Format(format!(
                "{}: trailing data after {} values",
                path.display(),
                count
            )));
        }
        Datacube::from_vec(n_x, n_y, l, data)
    }
}

/// 1-D mean-preserving box projection from `src` cells to `dst` cells over a
/// common interval.  Returns `(dst_index, src_index, weight)` triplets where
/// the weights into each target cell sum to 1.  Cell boundaries are compared
/// on the common integer grid of `src * dst` subunits, so the overlaps are
/// exact.
pub(crate) fn box_project_1d(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for j in 0..dst {
        // Target cell j covers [j * src, (j + 1) * src) in subunits.
        let a = j * src;
        let b = (j + 1) * src;
        let i0 = a / dst;
        let i1 = (b - 1) / dst;
        for i in i0..=i1 {
            let lo = a.max(i * dst);
            let hi = b.min((i + 1) * dst);
            if hi > lo {
                out.push((j, i, (hi - lo) as f64 / src as f64));
            }
        }
    }
    out
}
