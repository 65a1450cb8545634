//! `sscsi` — command-line front end for the spatial-spectral imaging
//! simulator in `sscsi-core`.
//!
//! One-shot commands (`scene`, `codes`, `assemble`, `sense`, `reconstruct`)
//! expose the pipeline piecewise so artifacts can be inspected or swapped
//! out between stages; the study commands (`sweep-s`, `coherence`,
//! `superres`, `compare`) run the canned experiments with optional
//! overrides.  Every study writes a `manifest.json`, and
//! `sscsi --manifest <path>` re-runs it into a fresh directory,
//! reproducing the CSV tables byte for byte.
//!
//! Exit codes: 0 on success, 3 when an iterative routine failed
//! numerically, 2 for every other error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use sscsi_core::coding::CodedApertureSet;
use sscsi_core::cube::Datacube;
use sscsi_core::forward::{sense_exact_shear, BandPlan, MeasurementSet, SensingPlan};
use sscsi_core::geometry::{Dispersion, GeometryConfig, SystemGeometry};
use sscsi_core::harness::experiments::{
    run_comparison, run_from_manifest, run_superres, run_sweep, CompareConfig, Recovery,
    SuperresConfig, SweepConfig,
};
use sscsi_core::harness::manifest::{file_digest, RunManifest, SceneSpec};
use sscsi_core::harness::pgm::write_pgm16;
use sscsi_core::harness::scene::{add_awgn, make_scene, SceneKind};
use sscsi_core::metrics::psnr;
use sscsi_core::operator::LinearOperator;
use sscsi_core::sensing::assemble_plan;
use sscsi_core::solver::{gpsr, SolverConfig, StepRule, TauRule};
use sscsi_core::{Error, Rational, Result};

#[derive(Parser)]
#[command(
    name = "sscsi",
    version,
    about = "Coded-aperture spectral imaging simulator",
    arg_required_else_help = true
)]
struct Cli {
    /// Replay a recorded study from its manifest.json instead of running a
    /// subcommand (threads default to the recorded count)
    #[arg(long, value_name = "MANIFEST")]
    manifest: Option<PathBuf>,

    /// Directory for output artifacts (created if missing)
    #[arg(long, global = true, default_value = "sscsi-out", value_name = "DIR")]
    out_dir: PathBuf,

    /// Worker thread count (default: one per logical CPU)
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic scene cube plus per-band PGM previews
    Scene(SceneCmd),
    /// Draw a complementary boolean coded-aperture set as PGM files
    Codes(CodesCmd),
    /// Assemble the sparse sensing matrix and report its shape
    Assemble(AssembleCmd),
    /// Simulate detector frames for a scene
    Sense(SenseCmd),
    /// Recover a cube from measurements by l1-regularized least squares
    Reconstruct(ReconstructCmd),
    /// Reconstruction quality across mask positions, fixed scene
    SweepS(SweepCmd),
    /// Dictionary coherence and recovery quality near the detector
    Coherence(SweepCmd),
    /// Super-resolved recovery with a fine mask, quality vs compression
    Superres(SuperresCmd),
    /// This architecture against the classic mask-then-disperse baseline
    Compare(CompareCmd),
}

/// Where a command gets its optical geometry.  `--config` replaces the
/// default (or a study's canned geometry) wholesale; `--set` then tweaks
/// individual keys, so `--set s=1/4` on its own changes only the mask
/// position.
#[derive(Args)]
struct GeometryArgs {
    /// Geometry file in `key = value` syntax
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override one geometry key, e.g. --set s=1/4 (repeatable)
    #[arg(long, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl GeometryArgs {
    fn apply_to(&self, mut base: GeometryConfig) -> Result<GeometryConfig> {
        if let Some(path) = &self.config {
            base = GeometryConfig::parse(&std::fs::read_to_string(path)?)?;
        }
        for pair in &self.set {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| Error::parse(format!("--set takes KEY=VALUE, got `{pair}`")))?;
            base.set(key.trim(), value.trim())?;
        }
        Ok(base)
    }

    fn resolve(&self) -> Result<GeometryConfig> {
        self.apply_to(default_geometry())
    }
}

/// The out-of-the-box bench: 64x64 detector and mask at equal pitch, mask
/// at s = 1/8 (one column of code shift per native band, eight bands), one
/// spectral-plane width of dispersion over 0-140 nm.
fn default_geometry() -> GeometryConfig {
    GeometryConfig {
        s: Rational::new(1, 8),
        delta_c_um: Rational::ONE,
        delta_d_um: Rational::ONE,
        n_d: 64,
        n_c: 64,
        lambda_min_nm: Rational::ZERO,
        lambda_max_nm: Rational::from_int(140),
        dispersion: Dispersion::Beta(Rational::ONE),
    }
}

/// Codes are either loaded from a directory written by `sscsi codes`
/// (or any PGM set with the same sidecar) or drawn fresh from a seed.
#[derive(Args)]
struct CodesArgs {
    /// Directory holding a coded-aperture PGM set with its manifest.txt
    #[arg(long, value_name = "DIR")]
    codes: Option<PathBuf>,

    /// Shots to draw when no --codes directory is given
    #[arg(long, default_value_t = 2)]
    shots: u32,

    /// Seed for drawn codes
    #[arg(long, default_value_t = 0)]
    code_seed: u64,
}

impl CodesArgs {
    fn resolve(&self, n_c: u32) -> Result<CodedApertureSet> {
        match &self.codes {
            Some(dir) => {
                let set = CodedApertureSet::read_pgm_set(dir)?;
                if set.n_c() != n_c {
                    return Err(Error::InvalidCodes(format!(
                        "code set in {} is {} cells wide, the geometry wants {n_c}",
                        dir.display(),
                        set.n_c()
                    )));
                }
                Ok(set)
            }
            None => CodedApertureSet::generate_boolean(n_c, self.shots, self.code_seed),
        }
    }
}

#[derive(Args)]
struct SolverArgs {
    /// Regularization weight as a fraction of the back-projection's peak
    #[arg(long, default_value_t = 5e-5, value_name = "FRAC")]
    tau_rel: f64,

    /// Absolute regularization weight (overrides --tau-rel)
    #[arg(long, value_name = "TAU")]
    tau_abs: Option<f64>,

    #[arg(long, default_value_t = 2000)]
    max_iters: usize,

    /// Stop when the relative objective decrease falls below this
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,

    /// Constant gradient step instead of the Barzilai-Borwein seed
    #[arg(long, value_name = "STEP")]
    fixed_step: Option<f64>,
}

impl SolverArgs {
    fn resolve(&self) -> SolverConfig {
        SolverConfig {
            tau: match self.tau_abs {
                Some(t) => TauRule::Absolute(t),
                None => TauRule::RelativeToGradient(self.tau_rel),
            },
            max_iters: self.max_iters,
            tol: self.tol,
            step: match self.fixed_step {
                Some(a) => StepRule::Fixed(a),
                None => StepRule::BbMonotone,
            },
        }
    }
}

#[derive(Args)]
struct SceneCmd {
    /// smooth | spiky | checker | target
    #[arg(long, default_value = "smooth")]
    kind: String,

    /// Cube dimensions as XxYxBANDS
    #[arg(long, default_value = "64x64x8")]
    dims: String,

    #[arg(long, default_value_t = 0)]
    scene_seed: u64,
}

#[derive(Args)]
struct CodesCmd {
    /// Mask side length in cells
    #[arg(long, default_value_t = 64)]
    cells: u32,

    #[arg(long, default_value_t = 2)]
    shots: u32,

    #[arg(long, default_value_t = 0)]
    code_seed: u64,
}

#[derive(Args)]
struct AssembleCmd {
    #[command(flatten)]
    geometry: GeometryArgs,

    #[command(flatten)]
    codes: CodesArgs,

    /// `native` or an explicit band count
    #[arg(long, default_value = "native")]
    bands: String,
}

#[derive(Args)]
struct SenseCmd {
    #[command(flatten)]
    geometry: GeometryArgs,

    #[command(flatten)]
    codes: CodesArgs,

    /// Scene cube to image; synthesized on the plan's grid when omitted
    #[arg(long, value_name = "SSC")]
    cube: Option<PathBuf>,

    /// Scene to synthesize without --cube: smooth | spiky | checker | target
    #[arg(long, default_value = "smooth")]
    kind: String,

    #[arg(long, default_value_t = 0)]
    scene_seed: u64,

    /// `native` or an explicit band count
    #[arg(long, default_value = "native")]
    bands: String,

    /// Average the code shear within each band instead of freezing it at
    /// the band start (native bands only)
    #[arg(long)]
    exact_shear: bool,

    /// Add white Gaussian noise at this measurement SNR (dB)
    #[arg(long, value_name = "DB")]
    snr_db: Option<f64>,

    #[arg(long, default_value_t = 0)]
    noise_seed: u64,
}

#[derive(Args)]
struct ReconstructCmd {
    #[command(flatten)]
    geometry: GeometryArgs,

    #[command(flatten)]
    codes: CodesArgs,

    #[command(flatten)]
    solver: SolverArgs,

    /// Measurement set written by `sense`
    #[arg(long, value_name = "SSC")]
    meas: PathBuf,

    /// `native` or an explicit band count
    #[arg(long, default_value = "native")]
    bands: String,

    /// Reference cube; prints PSNR against it
    #[arg(long, value_name = "SSC")]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct SweepCmd {
    #[command(flatten)]
    geometry: GeometryArgs,

    #[command(flatten)]
    solver: SolverArgs,

    /// Comma-separated mask positions (rationals like 1/8 or 0.02)
    #[arg(long, value_name = "LIST")]
    positions: Option<String>,

    #[arg(long)]
    shots: Option<u32>,

    #[arg(long)]
    code_seed: Option<u64>,

    /// Band count of the fixed scene the sweep scores against
    #[arg(long)]
    scene_bands: Option<u32>,

    /// smooth | spiky | checker | target
    #[arg(long, value_name = "KIND")]
    scene: Option<String>,

    #[arg(long)]
    scene_seed: Option<u64>,

    /// Measurement SNR in dB (noiseless when omitted)
    #[arg(long, value_name = "DB")]
    snr_db: Option<f64>,

    #[arg(long)]
    noise_seed: Option<u64>,

    /// Also compute the coherence column (`coherence` always does)
    #[arg(long)]
    mu: bool,
}

#[derive(Args)]
struct SuperresCmd {
    #[command(flatten)]
    geometry: GeometryArgs,

    #[command(flatten)]
    solver: SolverArgs,

    /// Comma-separated compression-ratio targets in (0, 1]
    #[arg(long, value_name = "LIST")]
    cr_targets: Option<String>,

    #[arg(long)]
    code_seed: Option<u64>,

    /// smooth | spiky | checker | target
    #[arg(long, value_name = "KIND")]
    scene: Option<String>,

    #[arg(long)]
    scene_seed: Option<u64>,

    /// Measurement SNR in dB (noiseless when omitted)
    #[arg(long, value_name = "DB")]
    snr_db: Option<f64>,

    #[arg(long)]
    noise_seed: Option<u64>,
}

#[derive(Args)]
struct CompareCmd {
    #[command(flatten)]
    geometry: GeometryArgs,

    #[command(flatten)]
    solver: SolverArgs,

    /// Comma-separated shot counts to compare at
    #[arg(long, value_name = "LIST")]
    shots_list: Option<String>,

    #[arg(long)]
    code_seed: Option<u64>,

    /// `native` or an explicit band count
    #[arg(long, default_value = "native")]
    bands: String,

    /// smooth | spiky | checker | target
    #[arg(long, value_name = "KIND")]
    scene: Option<String>,

    #[arg(long)]
    scene_seed: Option<u64>,

    /// Measurement SNR in dB (noiseless when omitted)
    #[arg(long, value_name = "DB")]
    snr_db: Option<f64>,

    #[arg(long)]
    noise_seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Numerical(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    // Read the manifest before touching the thread pool so a replay can
    // default to the recorded worker count.
    let manifest = match &cli.manifest {
        Some(path) => Some(RunManifest::read(path)?),
        None => None,
    };
    if let Some(n) = cli.threads.or(manifest.as_ref().map(|m| m.threads)) {
        if n == 0 {
            return Err(Error::parse("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::parse(format!("thread pool: {e}")))?;
    }

    let out = cli.out_dir;
    match (manifest, cli.command) {
        (Some(m), None) => {
            let t = Instant::now();
            run_from_manifest(&m, &out)?;
            println!("replayed `{}` in {:.1?}", m.command, t.elapsed());
            print_results(&out)
        }
        (Some(_), Some(_)) => Err(Error::parse(
            "--manifest replays a recorded study on its own; drop the subcommand",
        )),
        (None, Some(command)) => match command {
            Command::Scene(c) => cmd_scene(&out, &c),
            Command::Codes(c) => cmd_codes(&out, &c),
            Command::Assemble(c) => cmd_assemble(&out, &c),
            Command::Sense(c) => cmd_sense(&out, &c),
            Command::Reconstruct(c) => cmd_reconstruct(&out, &c),
            Command::SweepS(c) => cmd_sweep(&out, &c, false),
            Command::Coherence(c) => cmd_sweep(&out, &c, true),
            Command::Superres(c) => cmd_superres(&out, &c),
            Command::Compare(c) => cmd_compare(&out, &c),
        },
        (None, None) => Err(Error::parse(
            "nothing to do: give a subcommand or --manifest (try --help)",
        )),
    }
}

fn cmd_scene(out: &Path, cmd: &SceneCmd) -> Result<()> {
    let kind: SceneKind = cmd.kind.parse()?;
    let (n_x, n_y, l) = parse_dims(&cmd.dims)?;
    let cube = make_scene(kind, n_x, n_y, l, cmd.scene_seed);
    std::fs::create_dir_all(out)?;
    let path = out.join("scene.ssc");
    cube.write_ssc(&path)?;
    write_cube_previews(&cube, out, "scene")?;
    println!(
        "scene: {kind}, {n_x}x{n_y}x{l}, seed {}, peak {:.4}",
        cmd.scene_seed,
        cube.max_value()
    );
    println!("wrote {} and {l} band previews", path.display());
    Ok(())
}

fn cmd_codes(out: &Path, cmd: &CodesCmd) -> Result<()> {
    let set = CodedApertureSet::generate_boolean(cmd.cells, cmd.shots, cmd.code_seed)?;
    set.write_pgm_set(out)?;
    println!(
        "codes: {} complementary masks of {x}x{x} cells, seed {}",
        set.shots(),
        cmd.code_seed,
        x = set.n_c()
    );
    println!("wrote mask_*.pgm and manifest.txt in {}", out.display());
    Ok(())
}

fn cmd_assemble(out: &Path, cmd: &AssembleCmd) -> Result<()> {
    let g = SystemGeometry::from_config(&cmd.geometry.resolve()?)?;
    let plan = make_plan(&g, parse_band_plan(&cmd.bands)?)?;
    let codes = cmd.codes.resolve(g.n_c())?;
    let h = assemble_plan(&plan, &codes)?;
    std::fs::create_dir_all(out)?;
    let path = out.join("system.ssm");
    h.write_ssm(&path)?;
    let (n_x, n_y, l) = plan.cube_dims();
    println!("geometry: {}", g.canonical_string());
    println!(
        "H: {} x {} for a {n_x}x{n_y}x{l} cube, {} nonzeros (fill {:.2e})",
        h.rows(),
        h.cols(),
        h.nnz(),
        h.nnz() as f64 / (h.rows() as f64 * h.cols() as f64)
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_sense(out: &Path, cmd: &SenseCmd) -> Result<()> {
    let config = cmd.geometry.resolve()?;
    let g = SystemGeometry::from_config(&config)?;
    let band_plan = parse_band_plan(&cmd.bands)?;
    let plan = make_plan(&g, band_plan)?;
    let codes = cmd.codes.resolve(g.n_c())?;
    let dims = plan.cube_dims();

    let mut inputs = BTreeMap::new();
    let (cube, scene) = match &cmd.cube {
        Some(path) => {
            let cube = Datacube::read_ssc(path)?;
            if cube.dims() != dims {
                let (cx, cy, cl) = cube.dims();
                let (px, py, pl) = dims;
                return Err(Error::InvalidGeometry(format!(
                    "cube is {cx}x{cy}x{cl} but this plan images {px}x{py}x{pl}; \
                     resample the scene or change the geometry"
                )));
            }
            inputs.insert("cube".into(), file_digest(path)?);
            (cube, None)
        }
        None => {
            let kind: SceneKind = cmd.kind.parse()?;
            let cube = make_scene(kind, dims.0, dims.1, dims.2, cmd.scene_seed);
            (
                cube,
                Some(SceneSpec {
                    kind: kind.to_string(),
                    seed: cmd.scene_seed,
                }),
            )
        }
    };

    let mut meas = if cmd.exact_shear {
        if band_plan != BandPlan::Native {
            return Err(Error::WrongRegime(
                "--exact-shear is only defined on the native band grid".into(),
            ));
        }
        sense_exact_shear(&cube, &codes, &g)?
    } else {
        plan.sense(&cube, &codes)?
    };
    if let Some(snr) = cmd.snr_db {
        add_awgn(&mut meas, snr, cmd.noise_seed);
    }

    std::fs::create_dir_all(out)?;
    if scene.is_some() {
        cube.write_ssc(&out.join("scene.ssc"))?;
    }
    let path = out.join("meas.ssc");
    meas.write_ssc(&path)?;
    write_frame_previews(&meas, out)?;

    let mut params = BTreeMap::new();
    params.insert("exact_shear".into(), cmd.exact_shear.to_string());
    RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command: "sense".into(),
        geometry: config.to_config_text(),
        code_seed: codes.seed().unwrap_or(0),
        shots: codes.shots(),
        band_plan,
        solver: SolverConfig::default(),
        scene,
        snr_db: cmd.snr_db,
        noise_seed: cmd.snr_db.is_some().then_some(cmd.noise_seed),
        threads: rayon::current_num_threads(),
        params,
        inputs,
    }
    .write(&out.join("manifest.json"))?;

    let (rows, cols) = meas.frame_dims();
    let noise = match cmd.snr_db {
        Some(db) => format!(", noise at {db} dB SNR"),
        None => String::new(),
    };
    println!(
        "sensed {} frames of {rows}x{cols}, peak {:.4}{noise}",
        meas.shots(),
        meas.max_value()
    );
    println!("wrote {} and per-shot previews", path.display());
    Ok(())
}

fn cmd_reconstruct(out: &Path, cmd: &ReconstructCmd) -> Result<()> {
    let config = cmd.geometry.resolve()?;
    let g = SystemGeometry::from_config(&config)?;
    let band_plan = parse_band_plan(&cmd.bands)?;
    let plan = make_plan(&g, band_plan)?;
    let codes = cmd.codes.resolve(g.n_c())?;
    let meas = MeasurementSet::read_ssc(&cmd.meas)?;
    if meas.shots() != codes.shots() {
        return Err(Error::InvalidCodes(format!(
            "measurement set holds {} shots, the code set has {}",
            meas.shots(),
            codes.shots()
        )));
    }

    let h = assemble_plan(&plan, &codes)?;
    let recovery = Recovery::new(plan.cube_dims())?;
    let a = recovery.operator(&h);
    let solver = cmd.solver.resolve();
    let (coeffs, report) = gpsr(&a, &meas.vectorize(), &solver)?;
    let recon = recovery.synthesize(&coeffs)?;

    std::fs::create_dir_all(out)?;
    let path = out.join("recovered.ssc");
    recon.write_ssc(&path)?;
    report.write_csv(&out.join("trace.csv"))?;

    let mut inputs = BTreeMap::new();
    inputs.insert("meas".into(), file_digest(&cmd.meas)?);
    let mut params = BTreeMap::new();
    params.insert("iterations".into(), report.iterations.to_string());
    params.insert("converged".into(), report.converged.to_string());
    params.insert("tau".into(), format!("{:e}", report.tau));
    RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command: "reconstruct".into(),
        geometry: config.to_config_text(),
        code_seed: codes.seed().unwrap_or(0),
        shots: codes.shots(),
        band_plan,
        solver,
        scene: None,
        snr_db: None,
        noise_seed: None,
        threads: rayon::current_num_threads(),
        params,
        inputs,
    }
    .write(&out.join("manifest.json"))?;

    let (n_x, n_y, l) = recon.dims();
    println!(
        "recovered {n_x}x{n_y}x{l} in {} iterations (converged: {}), tau {:.3e}, objective {:.6e}",
        report.iterations,
        report.converged,
        report.tau,
        report.final_objective()
    );
    if let Some(truth_path) = &cmd.truth {
        let truth = Datacube::read_ssc(truth_path)?;
        if truth.dims() != recon.dims() {
            let (tx, ty, tl) = truth.dims();
            return Err(Error::InvalidGeometry(format!(
                "truth cube is {tx}x{ty}x{tl}, reconstruction is {n_x}x{n_y}x{l}"
            )));
        }
        println!("psnr: {:.2} dB vs {}", psnr(&truth, &recon)?, truth_path.display());
    }
    println!("wrote {}, trace.csv, manifest.json", path.display());
    Ok(())
}

fn cmd_sweep(out: &Path, cmd: &SweepCmd, coherence: bool) -> Result<()> {
    let mut cfg = if coherence {
        SweepConfig::coherence_table()
    } else {
        SweepConfig::mask_position_study()
    };
    cfg.base = cmd.geometry.apply_to(cfg.base)?;
    cfg.solver = cmd.solver.resolve();
    if let Some(list) = &cmd.positions {
        cfg.positions = parse_positions(list)?;
    }
    if let Some(q) = cmd.shots {
        cfg.shots = q;
    }
    if let Some(seed) = cmd.code_seed {
        cfg.code_seed = seed;
    }
    if let Some(bands) = cmd.scene_bands {
        cfg.scene_bands = bands;
    }
    if let Some(kind) = &cmd.scene {
        cfg.scene_kind = kind.parse()?;
    }
    if let Some(seed) = cmd.scene_seed {
        cfg.scene_seed = seed;
    }
    cfg.snr_db = cmd.snr_db.or(cfg.snr_db);
    if let Some(seed) = cmd.noise_seed {
        cfg.noise_seed = seed;
    }
    cfg.compute_mu |= cmd.mu;

    let t = Instant::now();
    run_sweep(&cfg, out)?;
    println!("{} over {} positions in {:.1?}", cfg.label, cfg.positions.len(), t.elapsed());
    print_results(out)
}

fn cmd_superres(out: &Path, cmd: &SuperresCmd) -> Result<()> {
    let mut cfg = SuperresConfig::half_pitch_study();
    cfg.base = cmd.geometry.apply_to(cfg.base)?;
    cfg.solver = cmd.solver.resolve();
    if let Some(list) = &cmd.cr_targets {
        cfg.cr_targets = parse_f64_list(list, "--cr-targets")?;
    }
    if let Some(seed) = cmd.code_seed {
        cfg.code_seed = seed;
    }
    if let Some(kind) = &cmd.scene {
        cfg.scene_kind = kind.parse()?;
    }
    if let Some(seed) = cmd.scene_seed {
        cfg.scene_seed = seed;
    }
    cfg.snr_db = cmd.snr_db.or(cfg.snr_db);
    if let Some(seed) = cmd.noise_seed {
        cfg.noise_seed = seed;
    }

    let t = Instant::now();
    run_superres(&cfg, out)?;
    println!("superres over {} budgets in {:.1?}", cfg.cr_targets.len(), t.elapsed());
    print_results(out)
}

fn cmd_compare(out: &Path, cmd: &CompareCmd) -> Result<()> {
    let mut cfg = CompareConfig::baseline_study();
    cfg.base = cmd.geometry.apply_to(cfg.base)?;
    cfg.solver = cmd.solver.resolve();
    cfg.band_plan = parse_band_plan(&cmd.bands)?;
    if let Some(list) = &cmd.shots_list {
        cfg.q_values = parse_u32_list(list, "--shots-list")?;
    }
    if let Some(seed) = cmd.code_seed {
        cfg.code_seed = seed;
    }
    if let Some(kind) = &cmd.scene {
        cfg.scene_kind = kind.parse()?;
    }
    if let Some(seed) = cmd.scene_seed {
        cfg.scene_seed = seed;
    }
    cfg.snr_db = cmd.snr_db.or(cfg.snr_db);
    if let Some(seed) = cmd.noise_seed {
        cfg.noise_seed = seed;
    }

    let t = Instant::now();
    run_comparison(&cfg, out)?;
    println!("compare over {} shot counts in {:.1?}", cfg.q_values.len(), t.elapsed());
    print_results(out)
}

// --------------------------------------------------------------------------
// Small shared pieces.

fn make_plan(g: &SystemGeometry, plan: BandPlan) -> Result<SensingPlan> {
    match plan {
        BandPlan::Native => SensingPlan::native(g),
        BandPlan::Pinned(l) => SensingPlan::pinned(g, l),
    }
}

fn parse_band_plan(text: &str) -> Result<BandPlan> {
    if text.eq_ignore_ascii_case("native") {
        return Ok(BandPlan::Native);
    }
    match text.parse::<u32>() {
        Ok(l) if l > 0 => Ok(BandPlan::Pinned(l)),
        _ => Err(Error::parse(format!(
            "--bands takes `native` or a positive band count, got `{text}`"
        ))),
    }
}

fn parse_dims(text: &str) -> Result<(u32, u32, u32)> {
    let parts: Vec<u32> = text
        .split(['x', 'X'])
        .map(|p| p.trim().parse::<u32>().ok())
        .collect::<Option<_>>()
        .ok_or_else(|| Error::parse(format!("--dims takes XxYxBANDS, got `{text}`")))?;
    match parts[..] {
        [x, y, l] if x > 0 && y > 0 && l > 0 => Ok((x, y, l)),
        _ => Err(Error::parse(format!(
            "--dims takes three positive extents, got `{text}`"
        ))),
    }
}

fn parse_positions(text: &str) -> Result<Vec<Rational>> {
    text.split(',').map(|t| Rational::parse(t.trim())).collect()
}

fn parse_f64_list(text: &str, flag: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::parse(format!("{flag}: invalid number `{t}`")))
        })
        .collect()
}

fn parse_u32_list(text: &str, flag: &str) -> Result<Vec<u32>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<u32>()
                .map_err(|_| Error::parse(format!("{flag}: invalid count `{t}`")))
        })
        .collect()
}

fn to_u16(v: f64, max: f64) -> u16 {
    if max <= 0.0 {
        return 0;
    }
    ((v / max).clamp(0.0, 1.0) * 65535.0).round() as u16
}

/// One 16-bit PGM per band, all on the cube's shared intensity scale.
fn write_cube_previews(cube: &Datacube, dir: &Path, stem: &str) -> Result<()> {
    let (n_x, n_y, l) = cube.dims();
    let max = cube.max_value();
    for k in 0..l {
        let mut data = Vec::with_capacity(n_x as usize * n_y as usize);
        for x in 0..n_x {
            for y in 0..n_y {
                data.push(to_u16(cube.get(x, y, k), max));
            }
        }
        write_pgm16(&dir.join(format!("{stem}_band{k:02}.pgm")), n_y, n_x, &data)?;
    }
    Ok(())
}

/// One 16-bit PGM per shot, all on the set's shared intensity scale.
fn write_frame_previews(meas: &MeasurementSet, dir: &Path) -> Result<()> {
    let (rows, cols) = meas.frame_dims();
    let max = meas.max_value();
    for q in 0..meas.shots() as usize {
        let data: Vec<u16> = meas.frame(q).iter().map(|&v| to_u16(v, max)).collect();
        write_pgm16(&dir.join(format!("meas_q{q:02}.pgm")), cols, rows, &data)?;
    }
    Ok(())
}

fn print_results(dir: &Path) -> Result<()> {
    print!("{}", std::fs::read_to_string(dir.join("results.csv"))?);
    println!("artifacts in {}", dir.display());
    Ok(())
}
