//! Sparse sensing matrices and mutual coherence.
//!
//! [`assemble`] materializes the forward model as compressed sparse rows:
//! row `(q, m, n)` holds exactly the weighted code reads that
//! `SensingPlan::sense` would sum for that detector pixel, merged per voxel.
//! The matrix therefore reproduces `sense` up to floating-point reassociation
//! — an equivalence the tests lean on heavily, since the two code paths are
//! written independently.
//!
//! Coherence comes in two flavors: [`coherence`] treats any
//! [`LinearOperator`] as a black box (quadratic, fine for small systems),
//! while [`coherence_factored`] exploits the compact support of wavelet
//! atoms to scan `H · Psi` at full experiment size.

use std::io::{Read as _, Write as _};
use std::path::Path;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::coding::CodedApertureSet;
use crate::error::{Error, Result};
use crate::forward::{BandPlan, SensingPlan};
use crate::geometry::SystemGeometry;
use crate::operator::LinearOperator;
use crate::sparsity::SparsityBasis;

const SSM_MAGIC: &[u8; 4] = b"SSM1";

/// Row-compressed sensing matrix.  Rows are ordered shot-major, then
/// detector row, then detector column; within a row, columns are strictly
/// increasing.  All stored values are in `(0, 1]`: fractional cell overlaps
/// masked by a binary code.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
    shots: u32,
    geometry_digest: u64,
}

impl SensingMatrix {
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn shots(&self) -> u32 {
        self.shots
    }

    /// Digest binding the matrix to the geometry and band plan it was
    /// assembled from; files refuse to load against a different one.
    pub fn geometry_digest(&self) -> u64 {
        self.geometry_digest
    }

    pub fn row(&self, r: usize) -> (&[u32], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    fn from_triplet_rows(
        rows: usize,
        cols: usize,
        shots: u32,
        geometry_digest: u64,
        row_entries: Vec<Vec<(u32, f64)>>,
    ) -> Self {
        debug_assert_eq!(row_entries.len(), rows);
        let nnz = row_entries.iter().map(Vec::len).sum();
        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for entries in row_entries {
            for (c, v) in entries {
                debug_assert!(v > 0.0 && v <= 1.0 + 1e-12, "weight {v} outside (0, 1]");
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        SensingMatrix {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
            shots,
            geometry_digest,
        }
    }

    pub fn write_ssm(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(SSM_MAGIC)?;
        for v in [self.rows as u64, self.cols as u64, self.nnz() as u64] {
            f.write_all(&v.to_le_bytes())?;
        }
        f.write_all(&self.shots.to_le_bytes())?;
        f.write_all(&self.geometry_digest.to_le_bytes())?;
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                f.write_all(&(r as u32).to_le_bytes())?;
                f.write_all(&c.to_le_bytes())?;
                f.write_all(&v.to_le_bytes())?;
            }
        }
        f.flush()?;
        Ok(())
    }

    pub fn read_ssm(path: &Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 4];
        f.read_exact(&mut magic)?;
        if &magic != SSM_MAGIC {
            return Err(Error::Format(format!(
                "{}: not a sensing-matrix file",
                path.display()
            )));
        }
        let mut u64buf = [0u8; 8];
        let mut u32buf = [0u8; 4];
        f.read_exact(&mut u64buf)?;
        let rows = u64::from_le_bytes(u64buf) as usize;
        f.read_exact(&mut u64buf)?;
        let cols = u64::from_le_bytes(u64buf) as usize;
        f.read_exact(&mut u64buf)?;
        let nnz = u64::from_le_bytes(u64buf) as usize;
        f.read_exact(&mut u32buf)?;
        let shots = u32::from_le_bytes(u32buf);
        f.read_exact(&mut u64buf)?;
        let geometry_digest = u64::from_le_bytes(u64buf);

        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        let mut prev: Option<(u32, u32)> = None;
        for _ in 0..nnz {
            f.read_exact(&mut u32buf)?;
            let r = u32::from_le_bytes(u32buf);
            f.read_exact(&mut u32buf)?;
            let c = u32::from_le_bytes(u32buf);
            f.read_exact(&mut u64buf)?;
            let v = f64::from_le_bytes(u64buf);
            if r as usize >= rows || c as usize >= cols {
                return Err(Error::Format(format!(
                    "{}: entry ({r}, {c}) outside {rows} x {cols}",
                    path.display()
                )));
            }
            if let Some(p) = prev {
                if (r, c) <= p {
                    return Err(Error::Format(format!(
                        "{}: entries out of row-major order at ({r}, {c})",
                        path.display()
                    )));
                }
            }
            prev = Some((r, c));
            row_ptr[r as usize + 1] += 1;
            col_idx.push(c);
            values.push(v);
        }
        let mut trailing = [0u8; 1];
        if f.read(&mut trailing)? != 0 {
            return Err(Error::Format(format!(
                "{}: trailing bytes after {nnz} entries",
                path.display()
            )));
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(SensingMatrix {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
            shots,
            geometry_digest,
        })
    }
}

impl LinearOperator for SensingMatrix {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    /// Rows are independent, so parallel scheduling cannot change results.
    fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        y.par_iter_mut().enumerate().for_each(|(r, out)| {
            let mut acc = 0.0;
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[i] * x[self.col_idx[i] as usize];
            }
            *out = acc;
        });
    }

    /// Serial scatter in row order: deterministic whatever the thread pool.
    fn rmatvec(&self, y: &[f64], x: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(x.len(), self.cols);
        x.fill(0.0);
        for r in 0..self.rows {
            let w = y[r];
            if w == 0.0 {
                continue;
            }
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                x[self.col_idx[i] as usize] += self.values[i] * w;
            }
        }
    }
}

fn digest_string(text: &str) -> u64 {
    let d = Sha256::digest(text.as_bytes());
    u64::from_le_bytes(d[..8].try_into().expect("digest is 32 bytes"))
}

/// Builds the sparse matrix for an already-constructed plan.  Rows mirror
/// `plan.sense` exactly: row `q * n_d^2 + m * n_d + n` contains the merged
/// per-voxel weights of detector pixel `(m, n)` under shot `q`.
pub fn assemble_plan(plan: &SensingPlan, codes: &CodedApertureSet) -> Result<SensingMatrix> {
    let g = plan.geometry();
    if codes.n_c() != g.n_c() {
        return Err(Error::InvalidCodes(format!(
            "code grid {} does not match geometry n_c {}",
            codes.n_c(),
            g.n_c()
        )));
    }
    let n_d = g.n_d();
    let (n_x, n_y, l) = plan.cube_dims();
    let cols = n_x as usize * n_y as usize * l as usize;
    let frame = n_d as usize * n_d as usize;
    let rows = frame * codes.shots() as usize;
    let plane = n_x * n_y;

    let mut row_entries: Vec<Vec<(u32, f64)>> = Vec::with_capacity(rows);
    let mut scratch: Vec<(u32, f64)> = Vec::new();
    for q in 0..codes.shots() as usize {
        for m in 0..n_d {
            for n in 0..n_d {
                scratch.clear();
                plan.visit_pixel(m, n, &mut |k, cx, cy, mask_col, mask_row, w| {
                    let t = codes.value(q, mask_col, mask_row);
                    if t != 0.0 && w != 0.0 {
                        let col = k * plane + cx * n_y + cy;
                        scratch.push((col, w * t));
                    }
                })?;
                scratch.sort_by_key(|&(c, _)| c);
                // A pixel can read one voxel through both straddled code
                // cells; those entries share a column and merge by summing.
                let mut merged: Vec<(u32, f64)> = Vec::with_capacity(scratch.len());
                for &(c, v) in &scratch {
                    match merged.last_mut() {
                        Some(last) if last.0 == c => last.1 += v,
                        _ => merged.push((c, v)),
                    }
                }
                row_entries.push(merged);
            }
        }
    }
    let digest = digest_string(&format!(
        "{}|bands={}|dims={}x{}x{}",
        g.canonical_string(),
        plan.bands(),
        n_x,
        n_y,
        l
    ));
    Ok(SensingMatrix::from_triplet_rows(
        rows,
        cols,
        codes.shots(),
        digest,
        row_entries,
    ))
}

/// Assembles the sensing matrix for `codes` under `g` with the given band
/// plan.
pub fn assemble(
    codes: &CodedApertureSet,
    g: &SystemGeometry,
    plan: BandPlan,
) -> Result<SensingMatrix> {
    let plan = match plan {
        BandPlan::Native => SensingPlan::native(g)?,
        BandPlan::Pinned(l) => SensingPlan::pinned(g, l)?,
    };
    assemble_plan(&plan, codes)
}

/// Matrix form of the dispersion-after-mask baseline: row `(q, m, n)` of a
/// detector widened to `n + l - 1` columns reads voxel `(m, n - k, k)`
/// through code cell `(m, n - k)`.
pub fn assemble_cassi(codes: &CodedApertureSet, n: u32, l: u32) -> Result<SensingMatrix> {
    if codes.n_c() != n {
        return Err(Error::InvalidCodes(format!(
            "code grid {} does not match cube side {n}",
            codes.n_c()
        )));
    }
    let det_cols = n + l - 1;
    let frame = n as usize * det_cols as usize;
    let rows = frame * codes.shots() as usize;
    let cols = n as usize * n as usize * l as usize;
    let plane = n * n;

    let mut row_entries: Vec<Vec<(u32, f64)>> = Vec::with_capacity(rows);
    for q in 0..codes.shots() as usize {
        for m in 0..n {
            for nd in 0..det_cols {
                let mut entries = Vec::new();
                for k in 0..l {
                    if nd < k || nd - k >= n {
                        continue;
                    }
                    let y = nd - k;
                    let t = codes.value(q, m as i64, y as i64);
                    if t != 0.0 {
                        entries.push((k * plane + m * n + y, t));
                    }
                }
                entries.sort_by_key(|&(c, _)| c);
                row_entries.push(entries);
            }
        }
    }
    let digest = digest_string(&format!("cassi|n={n}|l={l}"));
    Ok(SensingMatrix::from_triplet_rows(
        rows,
        cols,
        codes.shots(),
        digest,
        row_entries,
    ))
}

/// Largest normalized inner product between distinct columns, the pair that
/// attains it, and how many columns were numerically zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceReport {
    pub mu: f64,
    /// Column pair attaining `mu`, ascending.
    pub pair: (usize, usize),
    /// Columns with norm below `1e-12` of the largest; these are excluded
    /// from the maximum (their normalized products are undefined).
    pub zero_columns: usize,
}

const ZERO_COLUMN_REL: f64 = 1e-12;

fn coherence_from_norms<F>(norms: &[f64], mut gram_column: F) -> Result<CoherenceReport>
where
    F: FnMut(usize, &mut [f64]),
{
    let n = norms.len();
    let max_norm = norms.iter().fold(0.0f64, |a, &b| a.max(b));
    let threshold = max_norm * ZERO_COLUMN_REL;
    let live: Vec<bool> = norms.iter().map(|&v| v > threshold).collect();
    let live_count = live.iter().filter(|&&b| b).count();
    if live_count < 2 {
        return Err(Error::Numerical(format!(
            "coherence needs at least two nonzero columns, found {live_count}"
        )));
    }
    let mut mu = -1.0;
    let mut pair = (0usize, 0usize);
    let mut gram = vec![0.0; n];
    for j in 0..n {
        if !live[j] {
            continue;
        }
        gram_column(j, &mut gram);
        for i in 0..n {
            if i == j || !live[i] {
                continue;
            }
            let cand = (gram[i].abs() / (norms[i] * norms[j])).min(1.0);
            let (lo, hi) = if i < j { (i, j) } else { (j, i) };
            if cand > mu || (cand == mu && (lo, hi) < pair) {
                mu = cand;
                pair = (lo, hi);
            }
        }
    }
    Ok(CoherenceReport {
        mu,
        pair,
        zero_columns: n - live_count,
    })
}

/// Mutual coherence of an arbitrary operator's columns, by applying it (and
/// its adjoint) once per column.  Cost grows with `cols^2`; reserve it for
/// small systems and use [`coherence_factored`] for full-size dictionaries.
pub fn coherence(a: &dyn LinearOperator) -> Result<CoherenceReport> {
    let (rows, cols) = (a.rows(), a.cols());
    let mut unit = vec![0.0; cols];
    let mut image = vec![0.0; rows];
    let mut norms = vec![0.0; cols];
    let mut images: Vec<Vec<f64>> = Vec::with_capacity(cols);
    for j in 0..cols {
        unit[j] = 1.0;
        a.matvec(&unit, &mut image);
        unit[j] = 0.0;
        norms[j] = image.iter().map(|v| v * v).sum::<f64>().sqrt();
        images.push(image.clone());
    }
    coherence_from_norms(&norms, |j, gram| {
        a.rmatvec(&images[j], gram);
    })
}

/// Mutual coherence of `h` composed with a sparsity basis, exploiting the
/// compact support of spatial wavelet atoms.
///
/// Column `(j, u)` of `H Psi` is `sum_k c_j[k] * H(e_k (x) w_u)` with `c_j`
/// a cosine line and `w_u` a sparse spatial atom, so applying `H` column by
/// column over the atom's support gives each image in time proportional to
/// the atom size rather than the cube size.  The Gram pass still needs one
/// adjoint-plus-analysis per surviving column, which dominates; columns
/// whose image is numerically zero are skipped entirely.
pub fn coherence_factored(
    h: &SensingMatrix,
    basis: &SparsityBasis,
) -> Result<CoherenceReport> {
    let (n_x, n_y, l) = basis.dims();
    let plane = n_x * n_y;
    let cube_len = plane * l;
    if h.cols() != cube_len {
        return Err(Error::DimensionMismatch {
            expected: cube_len,
            got: h.cols(),
        });
    }
    // Column-compressed copy of h, to apply it to sparse cubes.
    let mut col_counts = vec![0usize; h.cols()];
    for &c in &h.col_idx {
        col_counts[c as usize] += 1;
    }
    let mut col_ptr = vec![0usize; h.cols() + 1];
    for c in 0..h.cols() {
        col_ptr[c + 1] = col_ptr[c] + col_counts[c];
    }
    let mut fill = col_ptr.clone();
    let mut row_of = vec![0u32; h.nnz()];
    let mut val_of = vec![0.0f64; h.nnz()];
    for r in 0..h.rows {
        for i in h.row_ptr[r]..h.row_ptr[r + 1] {
            let c = h.col_idx[i] as usize;
            row_of[fill[c]] = r as u32;
            val_of[fill[c]] = h.values[i];
            fill[c] += 1;
        }
    }

    let spectral: Vec<Vec<f64>> = (0..l).map(|j| basis.spectral_atom(j)).collect();
    let mut norms = vec![0.0; cube_len];
    let mut image = vec![0.0; h.rows()];
    let apply_column = |atom: &[(u32, f64)], j: usize, image: &mut [f64]| {
        image.fill(0.0);
        for k in 0..l {
            let ck = spectral[j][k];
            if ck == 0.0 {
                continue;
            }
            for &(p, w) in atom {
                let col = k * plane + p as usize;
                let coeff = ck * w;
                for i in col_ptr[col]..col_ptr[col + 1] {
                    image[row_of[i] as usize] += val_of[i] * coeff;
                }
            }
        }
    };

    // Pass 1: column norms via the sparse forward path.
    let mut atoms: Vec<Vec<(u32, f64)>> = Vec::with_capacity(plane);
    for u in 0..plane {
        atoms.push(basis.spatial_atom(u));
    }
    for j in 0..l {
        for u in 0..plane {
            apply_column(&atoms[u], j, &mut image);
            norms[j * plane + u] = image.iter().map(|v| v * v).sum::<f64>().sqrt();
        }
    }

    // Pass 2: one Gram column per surviving dictionary column.
    let mut cube = vec![0.0; cube_len];
    let mut img = vec![0.0; h.rows()];
    coherence_from_norms(&norms, |col, gram| {
        let (j, u) = (col / plane, col % plane);
        apply_column(&atoms[u], j, &mut img);
        h.rmatvec(&img, &mut cube);
        basis.rmatvec(&cube, gram);
    })
}
