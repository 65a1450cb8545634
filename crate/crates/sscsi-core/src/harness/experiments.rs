//! The canned studies behind the CLI's experiment subcommands.
//!
//! Each study takes a plain config struct, writes a [`RunManifest`] plus its
//! CSV and cube artifacts into an output directory, and returns the result
//! rows.  A study is a pure function of its config (and, for the matvec
//! internals, nothing else — row-parallel products are order-independent),
//! so [`run_from_manifest`] reproduces every CSV byte for byte.
//!
//! Common artifact layout inside the output directory:
//!
//! * `manifest.json` — the replayable run record, written first;
//! * `scene.ssc` — the ground-truth cube (the master grid for sweeps);
//! * `results.csv` — one [`EvalResult`] row per sub-run;
//! * `signatures.csv` — per-probe spectral correlations;
//! * `recovered_<run_id>.ssc` — each reconstruction (sweeps score on the
//!   scene grid and additionally keep the instrument's own product as
//!   `native_<run_id>.ssc`);
//! * `plot.gp` — a gnuplot stub for the results table.
//!
//! Two conventions the tables rely on:
//!
//! * Sweeps hold one scene fixed on one grid while the instrument's native
//!   grid changes with the mask position.  The scene is box-averaged onto
//!   each position's native grid (mean-preserving, see
//!   [`Datacube::box_resample`]), sensed and recovered there — the unknown
//!   count is the instrument's own, so moving the mask toward the spectral
//!   plane really does spread the same shot budget over more bands — and the
//!   reconstruction is box-averaged back to the scene grid for scoring.
//!   The PSNR reference and the measurement budget (`cr` is measurements
//!   over *scene* voxels) stay constant across positions, so the tables
//!   measure the mask position and nothing else.
//! * A reported coherence of a dictionary with unmeasurable (zero-norm)
//!   columns is 1.0: with the mask at the detector the spectral atoms other
//!   than the band-constant one are invisible, their normalized inner
//!   products are undefined, and the honest table entry is the worst case.
//!   Positions whose native grid has a single band under a multi-band scene
//!   report 1.0 for the same reason — the scene's oscillating spectral atoms
//!   average to exactly zero there.
//!
//! Studies that vary the shot count (`superres`, `compare`) record their
//! shot lists in `params` and leave the manifest's scalar `shots` field 0.

use std::collections::BTreeMap;
use std::path::Path;

use crate::coding::CodedApertureSet;
use crate::cube::Datacube;
use crate::error::{Error, Result};
use crate::forward::{sense_cassi_baseline, BandPlan, SensingPlan};
use crate::geometry::{Dispersion, GeometryConfig, SystemGeometry};
use crate::harness::manifest::{RunManifest, SceneSpec};
use crate::harness::scene::{add_awgn, make_scene, spiky_probes, SceneKind};
use crate::metrics::{
    psnr, psnr_per_band, shots_for_compression_ratio, signature_correlation, write_results_csv,
    write_signatures_csv, EvalResult,
};
use crate::operator::{Composed, CropX, LinearOperator};
use crate::rational::Rational;
use crate::sensing::{
    assemble_cassi, assemble_plan, coherence_factored, CoherenceReport, SensingMatrix,
};
use crate::solver::{gpsr, SolverConfig};
use crate::sparsity::SparsityBasis;

/// Everything a study run produces besides its files.
#[derive(Debug, Clone)]
pub struct StudyOutput {
    pub rows: Vec<EvalResult>,
    /// `(run_id, s, probe_x, probe_y, |r|)` — the rows of `signatures.csv`.
    pub signatures: Vec<(String, f64, u32, u32, f64)>,
}

/// Coherence as the tables report it: 1.0 whenever the dictionary contains
/// columns the instrument cannot see at all (their normalized products are
/// undefined, and a dictionary with invisible atoms is as coherent as one
/// with duplicates), otherwise the maximum over the surviving pairs.
pub fn reported_mu(report: &CoherenceReport) -> f64 {
    if report.zero_columns > 0 {
        1.0
    } else {
        report.mu
    }
}

/// Default decomposition depth for a spatial axis of `n` cells: halve while
/// the residue stays even and at least 8 wide, but always decompose once.
pub fn wavelet_levels(n: u32) -> u32 {
    let mut levels = 0;
    let mut m = n;
    while m >= 16 && m % 2 == 0 {
        levels += 1;
        m /= 2;
    }
    levels.max(1)
}

/// Recovery-side pieces every study (and the reconstruct command) shares:
/// an orthonormal wavelet/DCT dictionary on an x-padded grid, cropped back
/// to the cube.  Padding keeps the wavelet grid divisible by `2^levels`
/// when the recovered x extent is not (the super-resolved grids generally
/// are not); the crop is the identity otherwise.
pub struct Recovery {
    dims: (u32, u32, u32),
    basis: SparsityBasis,
    crop: CropX,
}

impl Recovery {
    pub fn new(dims: (u32, u32, u32)) -> Result<Self> {
        let (n_x, n_y, l) = dims;
        let levels = wavelet_levels(n_y);
        let block = 1u32 << levels;
        let pad_x = n_x.div_ceil(block) * block;
        let basis = SparsityBasis::new(pad_x as usize, n_y as usize, l as usize, levels)?;
        let crop = CropX::new(pad_x as usize, n_x as usize, n_y as usize, l as usize);
        Ok(Recovery { dims, basis, crop })
    }

    /// `H * crop * synthesis`, borrowing `h`.
    pub fn operator<'a>(&'a self, h: &'a SensingMatrix) -> impl LinearOperator + 'a {
        Composed::new(h, Composed::new(&self.crop, &self.basis))
    }

    pub fn synthesize(&self, coeffs: &[f64]) -> Result<Datacube> {
        let cube = Composed::new(&self.crop, &self.basis).apply(coeffs);
        Datacube::from_vec(self.dims.0, self.dims.1, self.dims.2, cube)
    }
}

fn plan_for(g: &SystemGeometry, plan: BandPlan) -> Result<SensingPlan> {
    match plan {
        BandPlan::Native => SensingPlan::native(g),
        BandPlan::Pinned(l) => SensingPlan::pinned(g, l),
    }
}

fn geometry_at(base: &GeometryConfig, s: Rational) -> Result<SystemGeometry> {
    let mut config = base.clone();
    config.s = s;
    SystemGeometry::from_config(&config)
}

/// Scores one reconstruction against its reference cube (both live on the
/// same grid): PSNR plus signature correlations at the standard probe
/// pixels.  A flat recovered signature has no defined correlation and
/// scores 0 — the same as "no spectral detail recovered".
fn eval_run(
    run_id: &str,
    s: f64,
    q: u32,
    meas_rows: usize,
    truth: &Datacube,
    recon: &Datacube,
    mu: Option<f64>,
    seed: u64,
) -> Result<(EvalResult, Vec<(String, f64, u32, u32, f64)>)> {
    let (n_x, n_y, l) = truth.dims();
    let cr = meas_rows as f64 / (n_x as f64 * n_y as f64 * l as f64);
    let psnr_db = psnr(truth, recon)?;
    let psnr_bands = psnr_per_band(truth, recon)?;
    let mut correlations = Vec::new();
    let mut sig_rows = Vec::new();
    for (x, y) in spiky_probes(n_x, n_y) {
        let want: Vec<f64> = (0..l).map(|k| truth.get(x, y, k)).collect();
        let got: Vec<f64> = (0..l).map(|k| recon.get(x, y, k)).collect();
        let r = signature_correlation(&want, &got).unwrap_or(0.0);
        correlations.push((x, y, r));
        sig_rows.push((run_id.to_string(), s, x, y, r));
    }
    let row = EvalResult {
        run_id: run_id.to_string(),
        s,
        q,
        cr,
        psnr_db,
        psnr_bands,
        correlations,
        mu,
        seed,
    };
    Ok((row, sig_rows))
}

fn write_plot_stub(
    path: &Path,
    x_col: usize,
    x_label: &str,
    y_col: usize,
    y_label: &str,
) -> Result<()> {
    let text = format!(
        "# Stub: gnuplot -p plot.gp  (run from the directory holding results.csv)\n\
         set datafile separator ','\n\
         set xlabel '{x_label}'\n\
         set ylabel '{y_label}'\n\
         set grid\n\
         plot 'results.csv' skip 1 using {x_col}:{y_col} with linespoints notitle\n"
    );
    std::fs::write(path, text)?;
    Ok(())
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(T::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn param<'m>(m: &'m RunManifest, key: &str) -> Result<&'m str> {
    m.params
        .get(key)
        .map(String::as_str)
        .ok_or_else(|| Error::parse(format!("manifest lacks the `{key}` parameter")))
}

fn parse_rationals(text: &str) -> Result<Vec<Rational>> {
    text.split(',').map(|t| Rational::parse(t.trim())).collect()
}

fn parse_f64s(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::parse(format!("invalid number `{t}` in manifest")))
        })
        .collect()
}

fn parse_u32s(text: &str) -> Result<Vec<u32>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<u32>()
                .map_err(|_| Error::parse(format!("invalid shot count `{t}` in manifest")))
        })
        .collect()
}

fn scene_spec(kind: SceneKind, seed: u64) -> Option<SceneSpec> {
    Some(SceneSpec {
        kind: kind.to_string(),
        seed,
    })
}

fn scene_of(m: &RunManifest) -> Result<(SceneKind, u64)> {
    let spec = m
        .scene
        .as_ref()
        .ok_or_else(|| Error::parse("study manifest has no scene entry"))?;
    Ok((spec.kind.parse()?, spec.seed))
}

/// The square unit-pitch bench configuration most studies start from:
/// `n x n` detector and mask, equal pitches, one spectral-plane width of
/// dispersion over 0–140 nm.
fn unit_pitch_geometry(n: u32, s: &str) -> GeometryConfig {
    GeometryConfig {
        s: Rational::parse(s).expect("literal position"),
        delta_c_um: Rational::ONE,
        delta_d_um: Rational::ONE,
        n_d: n,
        n_c: n,
        lambda_min_nm: Rational::ZERO,
        lambda_max_nm: Rational::from_int(140),
        dispersion: Dispersion::Beta(Rational::ONE),
    }
}

// ---------------------------------------------------------------------------
// Mask-position sweeps (also the coherence table, which is a sweep with the
// coherence column switched on).

#[derive(Debug, Clone)]
pub struct SweepConfig {
    /// Manifest command, `"sweep-s"` or `"coherence"`.
    pub label: String,
    /// Geometry template; its `s` is overridden by each entry of
    /// `positions`.  Sensing always runs on each position's native band
    /// grid.
    pub base: GeometryConfig,
    pub positions: Vec<Rational>,
    pub shots: u32,
    pub code_seed: u64,
    /// Spectral band count of the fixed scene the sweep recovers.  The
    /// native grid at each position resolves its own number of bands; the
    /// scene is box-resampled between the two grids.
    pub scene_bands: u32,
    pub solver: SolverConfig,
    pub scene_kind: SceneKind,
    pub scene_seed: u64,
    pub snr_db: Option<f64>,
    /// Base noise seed; sub-run `i` draws with `noise_seed + i`.
    pub noise_seed: u64,
    pub compute_mu: bool,
}

impl SweepConfig {
    /// The resolution-limit sweep: how reconstruction quality and spectral
    /// detail depend on the mask position, on the spiky-emitter scene.
    /// One fixed 64x64x8 cube is sensed and recovered through the native
    /// grid of each position, from nearly-at-the-detector (a single native
    /// band, flat signatures) through the matched position 1/8 (eight
    /// native bands, one column of code shift each), then far beyond it at
    /// 9/10 and 63/64, where the instrument resolves 58 and 63 bands: the
    /// same six shots now pay for many times more unknowns per pixel, and
    /// quality falls again.
    pub fn mask_position_study() -> Self {
        SweepConfig {
            label: "sweep-s".into(),
            base: unit_pitch_geometry(64, "1/8"),
            positions: ["1/1000", "267/10000", "1/16", "1/8", "9/10", "63/64"]
                .iter()
                .map(|t| Rational::parse(t).expect("literal position"))
                .collect(),
            shots: 6,
            code_seed: 7,
            scene_bands: 8,
            solver: SolverConfig::default(),
            scene_kind: SceneKind::Spiky,
            scene_seed: 3,
            snr_db: None,
            noise_seed: 0,
            compute_mu: false,
        }
    }

    /// The coherence table: dictionary coherence and recovery quality for
    /// mask positions between the detector (s = 0, coherence exactly 1) and
    /// s = 0.07, six complementary shots, smooth scene.
    pub fn coherence_table() -> Self {
        SweepConfig {
            label: "coherence".into(),
            base: unit_pitch_geometry(64, "0"),
            positions: ["0", "1/100", "1/50", "3/100", "1/20", "7/100"]
                .iter()
                .map(|t| Rational::parse(t).expect("literal position"))
                .collect(),
            shots: 6,
            code_seed: 5,
            scene_bands: 8,
            solver: SolverConfig::default(),
            scene_kind: SceneKind::Smooth,
            scene_seed: 11,
            snr_db: None,
            noise_seed: 0,
            compute_mu: true,
        }
    }

    pub fn to_manifest(&self) -> RunManifest {
        let mut params = BTreeMap::new();
        params.insert("positions".into(), join(&self.positions));
        params.insert("scene_bands".into(), self.scene_bands.to_string());
        params.insert("compute_mu".into(), self.compute_mu.to_string());
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: self.label.clone(),
            geometry: self.base.to_config_text(),
            code_seed: self.code_seed,
            shots: self.shots,
            band_plan: BandPlan::Native,
            solver: self.solver,
            scene: scene_spec(self.scene_kind, self.scene_seed),
            snr_db: self.snr_db,
            noise_seed: self.snr_db.is_some().then_some(self.noise_seed),
            threads: rayon::current_num_threads(),
            params,
            inputs: BTreeMap::new(),
        }
    }

    pub fn from_manifest(m: &RunManifest) -> Result<Self> {
        if m.band_plan != BandPlan::Native {
            return Err(Error::parse(
                "mask-position sweeps sense on the native band grid; the scene's \
                 spectral grid is the `scene_bands` parameter",
            ));
        }
        let (scene_kind, scene_seed) = scene_of(m)?;
        Ok(SweepConfig {
            label: m.command.clone(),
            base: m.geometry_config()?,
            positions: parse_rationals(param(m, "positions")?)?,
            shots: m.shots,
            code_seed: m.code_seed,
            scene_bands: param(m, "scene_bands")?
                .parse::<u32>()
                .map_err(|_| Error::parse("scene_bands must be a positive integer"))?,
            solver: m.solver,
            scene_kind,
            scene_seed,
            snr_db: m.snr_db,
            noise_seed: m.noise_seed.unwrap_or(0),
            compute_mu: param(m, "compute_mu")?
                .parse::<bool>()
                .map_err(|_| Error::parse("compute_mu must be true or false"))?,
        })
    }
}

/// Coherence column of a sweep row: the coherence of the position's own
/// (native-grid) dictionary, with the spectrally-blind convention from the
/// module docs.
fn native_mu(h: &SensingMatrix, native: (u32, u32, u32), scene_bands: u32) -> Result<f64> {
    let (n_x, n_y, l) = native;
    if l == 1 && scene_bands > 1 {
        // A single native band under a multi-band scene: the scene's
        // oscillating spectral atoms box-average to exactly zero, so the
        // dictionary the scene sees has unmeasurable columns.
        return Ok(1.0);
    }
    let levels = wavelet_levels(n_y);
    if n_x % (1 << levels) != 0 {
        return Err(Error::InvalidGeometry(
            "coherence tables need a native x extent the wavelet grid can \
             carry directly (no padding)"
                .into(),
        ));
    }
    let basis = SparsityBasis::new(n_x as usize, n_y as usize, l as usize, levels)?;
    Ok(reported_mu(&coherence_factored(h, &basis)?))
}

pub fn run_sweep(cfg: &SweepConfig, out_dir: &Path) -> Result<StudyOutput> {
    if cfg.positions.is_empty() {
        return Err(Error::parse("a sweep needs at least one mask position"));
    }
    if cfg.scene_bands == 0 {
        return Err(Error::parse("the sweep scene needs at least one band"));
    }
    std::fs::create_dir_all(out_dir)?;
    cfg.to_manifest().write(&out_dir.join("manifest.json"))?;

    // Native plans up front.  The scene lives on the widest spatial grid any
    // position offers (spatial extents only shrink with s, so this is the
    // finest one) with its own band count, and stays fixed for the whole
    // sweep; each run senses a box-averaged copy on its native grid.
    let mut plans = Vec::with_capacity(cfg.positions.len());
    for &s in &cfg.positions {
        let g = geometry_at(&cfg.base, s)?;
        plans.push(SensingPlan::native(&g)?);
    }
    let scene_dims = plans.iter().fold((1, 1, cfg.scene_bands), |acc, p| {
        let d = p.cube_dims();
        (acc.0.max(d.0), acc.1.max(d.1), acc.2)
    });
    let master = make_scene(
        cfg.scene_kind,
        scene_dims.0,
        scene_dims.1,
        scene_dims.2,
        cfg.scene_seed,
    );
    master.write_ssc(&out_dir.join("scene.ssc"))?;
    let codes = CodedApertureSet::generate_boolean(cfg.base.n_c, cfg.shots, cfg.code_seed)?;

    let mut rows = Vec::new();
    let mut signatures = Vec::new();
    for (i, plan) in plans.iter().enumerate() {
        let native = plan.cube_dims();
        let truth_native = master.box_resample(native.0, native.1, native.2)?;
        let mut meas = plan.sense(&truth_native, &codes)?;
        if let Some(snr) = cfg.snr_db {
            add_awgn(&mut meas, snr, cfg.noise_seed.wrapping_add(i as u64));
        }
        let h = assemble_plan(plan, &codes)?;
        let mu = if cfg.compute_mu {
            Some(native_mu(&h, native, cfg.scene_bands)?)
        } else {
            None
        };
        let recovery = Recovery::new(native)?;
        let a = recovery.operator(&h);
        let (coeffs, _) = gpsr(&a, &meas.vectorize(), &cfg.solver)?;
        let native_recon = recovery.synthesize(&coeffs)?;
        let recon = native_recon.box_resample(scene_dims.0, scene_dims.1, scene_dims.2)?;

        let s = plan.geometry().s().to_f64();
        let run_id = format!("s{s}");
        native_recon.write_ssc(&out_dir.join(format!("native_{run_id}.ssc")))?;
        recon.write_ssc(&out_dir.join(format!("recovered_{run_id}.ssc")))?;
        let (row, sig) = eval_run(
            &run_id,
            s,
            cfg.shots,
            h.rows(),
            &master,
            &recon,
            mu,
            cfg.code_seed,
        )?;
        rows.push(row);
        signatures.extend(sig);
    }

    write_results_csv(&out_dir.join("results.csv"), &rows)?;
    write_signatures_csv(&out_dir.join("signatures.csv"), &signatures)?;
    write_plot_stub(&out_dir.join("plot.gp"), 2, "mask position s", 5, "PSNR (dB)")?;
    Ok(StudyOutput { rows, signatures })
}

// ---------------------------------------------------------------------------
// Super-resolution study: code cells finer than detector pixels.

#[derive(Debug, Clone)]
pub struct SuperresConfig {
    /// Fine-mask geometry (`delta_c < delta_d (1 - s)`); bands are native.
    pub base: GeometryConfig,
    /// Shot counts are derived from these compression-ratio targets.
    pub cr_targets: Vec<f64>,
    pub code_seed: u64,
    pub solver: SolverConfig,
    pub scene_kind: SceneKind,
    pub scene_seed: u64,
    pub snr_db: Option<f64>,
    pub noise_seed: u64,
}

impl SuperresConfig {
    /// Half-pitch codes on a 32x32 detector: each shot captures 1024
    /// measurements and recovery targets a 60x64x4 cube, so spatial
    /// resolution beats the detector on both axes.  Three compression
    /// ratios show quality growing with the measurement budget.
    pub fn half_pitch_study() -> Self {
        SuperresConfig {
            base: GeometryConfig {
                s: Rational::new(1, 16),
                delta_c_um: Rational::ONE,
                delta_d_um: Rational::from_int(2),
                n_d: 32,
                n_c: 64,
                lambda_min_nm: Rational::ZERO,
                lambda_max_nm: Rational::from_int(140),
                dispersion: Dispersion::Beta(Rational::ONE),
            },
            cr_targets: vec![1.0 / 3.0, 2.0 / 3.0, 1.0],
            code_seed: 9,
            solver: SolverConfig::default(),
            scene_kind: SceneKind::Smooth,
            scene_seed: 2,
            snr_db: None,
            noise_seed: 0,
        }
    }

    pub fn to_manifest(&self) -> RunManifest {
        let mut params = BTreeMap::new();
        params.insert("cr_targets".into(), join(&self.cr_targets));
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: "superres".into(),
            geometry: self.base.to_config_text(),
            code_seed: self.code_seed,
            shots: 0,
            band_plan: BandPlan::Native,
            solver: self.solver,
            scene: scene_spec(self.scene_kind, self.scene_seed),
            snr_db: self.snr_db,
            noise_seed: self.snr_db.is_some().then_some(self.noise_seed),
            threads: rayon::current_num_threads(),
            params,
            inputs: BTreeMap::new(),
        }
    }

    pub fn from_manifest(m: &RunManifest) -> Result<Self> {
        if m.band_plan != BandPlan::Native {
            return Err(Error::parse(
                "the super-resolution study runs on the native band grid",
            ));
        }
        let (scene_kind, scene_seed) = scene_of(m)?;
        Ok(SuperresConfig {
            base: m.geometry_config()?,
            cr_targets: parse_f64s(param(m, "cr_targets")?)?,
            code_seed: m.code_seed,
            solver: m.solver,
            scene_kind,
            scene_seed,
            snr_db: m.snr_db,
            noise_seed: m.noise_seed.unwrap_or(0),
        })
    }
}

pub fn run_superres(cfg: &SuperresConfig, out_dir: &Path) -> Result<StudyOutput> {
    if cfg.cr_targets.is_empty() {
        return Err(Error::parse(
            "the super-resolution study needs at least one compression-ratio target",
        ));
    }
    std::fs::create_dir_all(out_dir)?;
    cfg.to_manifest().write(&out_dir.join("manifest.json"))?;

    let g = SystemGeometry::from_config(&cfg.base)?;
    let plan = SensingPlan::native(&g)?;
    let dims = plan.cube_dims();
    let truth = make_scene(cfg.scene_kind, dims.0, dims.1, dims.2, cfg.scene_seed);
    truth.write_ssc(&out_dir.join("scene.ssc"))?;
    let recovery = Recovery::new(dims)?;
    let s = g.s().to_f64();

    let mut rows = Vec::new();
    let mut signatures = Vec::new();
    for (i, &cr) in cfg.cr_targets.iter().enumerate() {
        let q = shots_for_compression_ratio(cr, &g);
        let codes = CodedApertureSet::generate_boolean(g.n_c(), q, cfg.code_seed)?;
        let mut meas = plan.sense(&truth, &codes)?;
        if let Some(snr) = cfg.snr_db {
            add_awgn(&mut meas, snr, cfg.noise_seed.wrapping_add(i as u64));
        }
        let h = assemble_plan(&plan, &codes)?;
        let a = recovery.operator(&h);
        let (coeffs, _) = gpsr(&a, &meas.vectorize(), &cfg.solver)?;
        let recon = recovery.synthesize(&coeffs)?;

        let run_id = format!("q{q}");
        recon.write_ssc(&out_dir.join(format!("recovered_{run_id}.ssc")))?;
        let (row, sig) = eval_run(&run_id, s, q, h.rows(), &truth, &recon, None, cfg.code_seed)?;
        rows.push(row);
        signatures.extend(sig);
    }

    write_results_csv(&out_dir.join("results.csv"), &rows)?;
    write_signatures_csv(&out_dir.join("signatures.csv"), &signatures)?;
    write_plot_stub(&out_dir.join("plot.gp"), 4, "compression ratio", 5, "PSNR (dB)")?;
    Ok(StudyOutput { rows, signatures })
}

// ---------------------------------------------------------------------------
// Architecture comparison: mask-then-disperse vs disperse-then-mask on the
// same cube, codes, prior, solver and detector.  The baseline's dispersion
// pushes shifted copies of the image past the right edge of an n x n
// sensor; its forward model keeps the widened n x (n + l - 1) frame, and
// the study then windows it back to the shared sensor so both
// architectures pay for exactly n^2 samples per shot.

#[derive(Debug, Clone)]
pub struct CompareConfig {
    /// Equal-pitch geometry; its `s` is where the mask sits for this
    /// architecture (the baseline has no mask position).
    pub base: GeometryConfig,
    pub q_values: Vec<u32>,
    pub code_seed: u64,
    pub band_plan: BandPlan,
    pub solver: SolverConfig,
    pub scene_kind: SceneKind,
    pub scene_seed: u64,
    pub snr_db: Option<f64>,
    pub noise_seed: u64,
}

impl CompareConfig {
    /// 64x64x8 smooth scene, mask at the matched position 1/8 (one column
    /// of shift per native band), one to six complementary shots per
    /// architecture.
    pub fn baseline_study() -> Self {
        CompareConfig {
            base: unit_pitch_geometry(64, "1/8"),
            q_values: (1..=6).collect(),
            code_seed: 4,
            band_plan: BandPlan::Native,
            solver: SolverConfig::default(),
            scene_kind: SceneKind::Smooth,
            scene_seed: 1,
            snr_db: None,
            noise_seed: 0,
        }
    }

    pub fn to_manifest(&self) -> RunManifest {
        let mut params = BTreeMap::new();
        params.insert("shots_list".into(), join(&self.q_values));
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: "compare".into(),
            geometry: self.base.to_config_text(),
            code_seed: self.code_seed,
            shots: 0,
            band_plan: self.band_plan,
            solver: self.solver,
            scene: scene_spec(self.scene_kind, self.scene_seed),
            snr_db: self.snr_db,
            noise_seed: self.snr_db.is_some().then_some(self.noise_seed),
            threads: rayon::current_num_threads(),
            params,
            inputs: BTreeMap::new(),
        }
    }

    pub fn from_manifest(m: &RunManifest) -> Result<Self> {
        let (scene_kind, scene_seed) = scene_of(m)?;
        Ok(CompareConfig {
            base: m.geometry_config()?,
            q_values: parse_u32s(param(m, "shots_list")?)?,
            code_seed: m.code_seed,
            band_plan: m.band_plan,
            solver: m.solver,
            scene_kind,
            scene_seed,
            snr_db: m.snr_db,
            noise_seed: m.noise_seed.unwrap_or(0),
        })
    }
}

pub fn run_comparison(cfg: &CompareConfig, out_dir: &Path) -> Result<StudyOutput> {
    if cfg.q_values.is_empty() {
        return Err(Error::parse("the comparison needs at least one shot count"));
    }
    std::fs::create_dir_all(out_dir)?;
    cfg.to_manifest().write(&out_dir.join("manifest.json"))?;

    let g = SystemGeometry::from_config(&cfg.base)?;
    let plan = plan_for(&g, cfg.band_plan)?;
    let dims = plan.cube_dims();
    let truth = make_scene(cfg.scene_kind, dims.0, dims.1, dims.2, cfg.scene_seed);
    truth.write_ssc(&out_dir.join("scene.ssc"))?;
    let recovery = Recovery::new(dims)?;
    let s = g.s().to_f64();

    let mut rows = Vec::new();
    let mut signatures = Vec::new();
    let score = |run_id: String,
                     s: f64,
                     q: u32,
                     h: &SensingMatrix,
                     meas: &[f64],
                     rows: &mut Vec<EvalResult>,
                     signatures: &mut Vec<(String, f64, u32, u32, f64)>|
     -> Result<()> {
        let a = recovery.operator(h);
        let (coeffs, _) = gpsr(&a, meas, &cfg.solver)?;
        let recon = recovery.synthesize(&coeffs)?;
        recon.write_ssc(&out_dir.join(format!("recovered_{run_id}.ssc")))?;
        let (row, sig) = eval_run(&run_id, s, q, h.rows(), &truth, &recon, None, cfg.code_seed)?;
        rows.push(row);
        signatures.extend(sig);
        Ok(())
    };

    for (i, &q) in cfg.q_values.iter().enumerate() {
        let codes = CodedApertureSet::generate_boolean(g.n_c(), q, cfg.code_seed)?;

        let mut meas = plan.sense(&truth, &codes)?;
        if let Some(snr) = cfg.snr_db {
            add_awgn(&mut meas, snr, cfg.noise_seed.wrapping_add(2 * i as u64));
        }
        let h = assemble_plan(&plan, &codes)?;
        score(
            format!("sscsi-q{q}"),
            s,
            q,
            &h,
            &meas.vectorize(),
            &mut rows,
            &mut signatures,
        )?;

        let mut meas_c = sense_cassi_baseline(&truth, &codes, &g)?;
        if let Some(snr) = cfg.snr_db {
            add_awgn(&mut meas_c, snr, cfg.noise_seed.wrapping_add(2 * i as u64 + 1));
        }
        let h_c = assemble_cassi(&codes, dims.0, dims.2)?;
        // The baseline's mask sits in the image plane, which is position 0
        // in this parametrization.
        score(
            format!("cassi-q{q}"),
            0.0,
            q,
            &h_c,
            &meas_c.vectorize(),
            &mut rows,
            &mut signatures,
        )?;
    }

    write_results_csv(&out_dir.join("results.csv"), &rows)?;
    write_signatures_csv(&out_dir.join("signatures.csv"), &signatures)?;
    write_plot_stub(&out_dir.join("plot.gp"), 3, "shots", 5, "PSNR (dB)")?;
    Ok(StudyOutput { rows, signatures })
}

/// Re-runs a recorded study.  With the same thread count as the original
/// run this reproduces every CSV byte for byte (and in this implementation
/// the results do not depend on the thread count at all).
pub fn run_from_manifest(m: &RunManifest, out_dir: &Path) -> Result<StudyOutput> {
    match m.command.as_str() {
        "sweep-s" | "coherence" => run_sweep(&SweepConfig::from_manifest(m)?, out_dir),
        "superres" => run_superres(&SuperresConfig::from_manifest(m)?, out_dir),
        "compare" => run_comparison(&CompareConfig::from_manifest(m)?, out_dir),
        other => Err(Error::parse(format!(
            "manifest command `{other}` is not a replayable study"
        ))),
    }
}
