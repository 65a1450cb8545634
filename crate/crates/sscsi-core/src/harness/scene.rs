//! Deterministic synthetic scenes and measurement noise.
//!
//! Four scene families cover the studies: `smooth` (compressible blobs with
//! slowly varying spectra), `spiky` (localized emitters on a smooth
//! background, each carrying a three-peak spectral signature probed by the
//! signature-correlation sweeps),
//! `checker` (high spatial frequency content for resolution studies) and
//! `target` (bar groups of decreasing pitch for the super-resolution study).
//! Every scene is a pure function of its dimensions and seed.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cube::Datacube;
use crate::error::Error;
use crate::forward::MeasurementSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    Smooth,
    Spiky,
    Checker,
    Target,
}

impl FromStr for SceneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "smooth" => Ok(SceneKind::Smooth),
            "spiky" => Ok(SceneKind::Spiky),
            "checker" => Ok(SceneKind::Checker),
            "target" => Ok(SceneKind::Target),
            other => Err(Error::parse(format!(
                "unknown scene kind `{other}` (smooth, spiky, checker, target)"
            ))),
        }
    }
}

impl std::fmt::Display for SceneKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SceneKind::Smooth => "smooth",
            SceneKind::Spiky => "spiky",
            SceneKind::Checker => "checker",
            SceneKind::Target => "target",
        })
    }
}

/// Pixels the signature-correlation sweeps probe: the three emitters of the
/// `spiky` scene sit exactly here.
pub fn spiky_probes(n_x: u32, n_y: u32) -> [(u32, u32); 3] {
    [
        (n_x / 4, n_y / 4),
        (n_x / 2, n_y / 2),
        (3 * n_x / 4, 3 * n_y / 4),
    ]
}

pub fn make_scene(kind: SceneKind, n_x: u32, n_y: u32, l: u32, seed: u64) -> Datacube {
    match kind {
        SceneKind::Smooth => smooth(n_x, n_y, l, seed),
        SceneKind::Spiky => spiky(n_x, n_y, l, seed),
        SceneKind::Checker => checker(n_x, n_y, l),
        SceneKind::Target => target(n_x, n_y, l),
    }
}

fn normalize_peak(cube: &mut Datacube) {
    let peak = cube.max_value();
    if peak > 0.0 {
        for v in cube.values_mut() {
            *v /= peak;
        }
    }
}

fn smooth(n_x: u32, n_y: u32, l: u32, seed: u64) -> Datacube {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = n_x.min(n_y) as f64;
    struct Blob {
        cx: f64,
        cy: f64,
        inv_two_sigma2: f64,
        amp: f64,
        freq: f64,
        phase: f64,
    }
    let blobs: Vec<Blob> = (0..10)
        .map(|_| {
            let sigma = rng.random_range(0.05..0.18) * scale;
            Blob {
                cx: rng.random_range(0.12..0.88) * n_x as f64,
                cy: rng.random_range(0.12..0.88) * n_y as f64,
                inv_two_sigma2: 1.0 / (2.0 * sigma * sigma),
                amp: rng.random_range(0.35..1.0),
                freq: rng.random_range(0.5..2.0),
                phase: rng.random_range(0.0..std::f64::consts::TAU),
            }
        })
        .collect();
    let mut cube = Datacube::zeros(n_x, n_y, l);
    for k in 0..l {
        for x in 0..n_x {
            for y in 0..n_y {
                let mut v = 0.0;
                for b in &blobs {
                    let dx = x as f64 + 0.5 - b.cx;
                    let dy = y as f64 + 0.5 - b.cy;
                    let env = 0.55
                        + 0.45
                            * (std::f64::consts::TAU * b.freq * (k as f64 + 0.5) / l as f64
                                + b.phase)
                                .cos();
                    v += b.amp * (-(dx * dx + dy * dy) * b.inv_two_sigma2).exp() * env;
                }
                cube.set(x, y, k, v);
            }
        }
    }
    normalize_peak(&mut cube);
    cube
}

fn spiky(n_x: u32, n_y: u32, l: u32, seed: u64) -> Datacube {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cube = Datacube::zeros(n_x, n_y, l);
    // Smooth background under the emitters: wide blobs with gentle spectral
    // slopes, plus a small pedestal so nothing in the scene is exactly dark.
    // Scaled well below the emitter peaks so the probe signatures stay
    // three-peaked.
    struct Blob {
        cx: f64,
        cy: f64,
        inv_two_sigma2: f64,
        amp: f64,
        freq: f64,
        phase: f64,
    }
    let scale = n_x.min(n_y) as f64;
    let blobs: Vec<Blob> = (0..6)
        .map(|_| {
            let sigma = rng.random_range(0.12..0.3) * scale;
            Blob {
                cx: rng.random_range(0.1..0.9) * n_x as f64,
                cy: rng.random_range(0.1..0.9) * n_y as f64,
                inv_two_sigma2: 1.0 / (2.0 * sigma * sigma),
                amp: rng.random_range(0.4..1.0),
                freq: rng.random_range(0.3..0.8),
                phase: rng.random_range(0.0..std::f64::consts::TAU),
            }
        })
        .collect();
    for k in 0..l {
        for x in 0..n_x {
            for y in 0..n_y {
                let mut v = 0.12;
                for b in &blobs {
                    let dx = x as f64 + 0.5 - b.cx;
                    let dy = y as f64 + 0.5 - b.cy;
                    let env = 0.6
                        + 0.4
                            * (std::f64::consts::TAU * b.freq * (k as f64 + 0.5) / l as f64
                                + b.phase)
                                .cos();
                    v += b.amp * (-(dx * dx + dy * dy) * b.inv_two_sigma2).exp() * env;
                }
                cube.set(x, y, k, v);
            }
        }
    }
    let bg_peak = cube.max_value();
    for v in cube.values_mut() {
        *v *= 0.35 / bg_peak;
    }
    let sigma_k = (0.06 * l as f64).max(0.45);
    for &(px, py) in spiky_probes(n_x, n_y).iter() {
        // Three spectral peaks on a jittered grid, so they stay separated.
        let centers: Vec<f64> = (0..3)
            .map(|j| (j as f64 + 0.5) * l as f64 / 3.0 + rng.random_range(-0.5..0.5) - 0.5)
            .collect();
        let amps: Vec<f64> = (0..3).map(|_| rng.random_range(0.6..1.0)).collect();
        for k in 0..l {
            let mut sig = 0.0;
            for (c, a) in centers.iter().zip(&amps) {
                let d = k as f64 - c;
                sig += a * (-d * d / (2.0 * sigma_k * sigma_k)).exp();
            }
            // Compact emitter: a 3x3 spatial bump around the probe.
            for dx in -1i64..=1 {
                for dy in -1i64..=1 {
                    let x = px as i64 + dx;
                    let y = py as i64 + dy;
                    if x < 0 || y < 0 || x >= n_x as i64 || y >= n_y as i64 {
                        continue;
                    }
                    let w = if dx == 0 && dy == 0 { 1.0 } else { 0.35 };
                    let old = cube.get(x as u32, y as u32, k);
                    cube.set(x as u32, y as u32, k, old + w * sig);
                }
            }
        }
    }
    normalize_peak(&mut cube);
    cube
}

fn checker(n_x: u32, n_y: u32, l: u32) -> Datacube {
    let block = (n_x.min(n_y) / 8).max(1);
    let mut cube = Datacube::zeros(n_x, n_y, l);
    for k in 0..l {
        let env = 0.3 + 0.7 * (k as f64 + 1.0) / l as f64;
        for x in 0..n_x {
            for y in 0..n_y {
                if (x / block + y / block) % 2 == 0 {
                    cube.set(x, y, k, env);
                }
            }
        }
    }
    cube
}

fn target(n_x: u32, n_y: u32, l: u32) -> Datacube {
    // Vertical bar groups of decreasing pitch from left to right, down to
    // single-cell bars in the last group.
    const PITCHES: [u32; 6] = [16, 12, 8, 6, 4, 2];
    let half = (l as f64 - 1.0) / 2.0;
    let width_k = (l as f64 / 4.0).max(0.75);
    let mut cube = Datacube::zeros(n_x, n_y, l);
    for k in 0..l {
        let d = k as f64 - half;
        let env = 0.2 + 0.8 * (-d * d / (2.0 * width_k * width_k)).exp();
        for x in 0..n_x {
            let group = ((x as u64 * PITCHES.len() as u64) / n_x as u64) as usize;
            let pitch = PITCHES[group].max(1);
            for y in 0..n_y {
                if (y / pitch) % 2 == 0 {
                    cube.set(x, y, k, env);
                }
            }
        }
    }
    cube
}

/// Adds white Gaussian noise scaled for the requested signal-to-noise ratio
/// (signal power = mean squared measurement).  A zero measurement set stays
/// exactly zero.
pub fn add_awgn(meas: &mut MeasurementSet, snr_db: f64, seed: u64) {
    let mut count = 0usize;
    let mut power = 0.0;
    for q in 0..meas.shots() as usize {
        for &v in meas.frame(q) {
            power += v * v;
            count += 1;
        }
    }
    if count == 0 || power == 0.0 {
        return;
    }
    power /= count as f64;
    let sigma = (power * 10f64.powf(-snr_db / 10.0)).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for q in 0..meas.shots() as usize {
        for v in meas.frame_mut(q) {
            let z: f64 = rng.sample(StandardNormal);
            *v += sigma * z;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenes_are_deterministic_and_bounded() {
        for kind in [
            SceneKind::Smooth,
            SceneKind::Spiky,
            SceneKind::Checker,
            SceneKind::Target,
        ] {
            let a = make_scene(kind, 32, 32, 8, 7);
            let b = make_scene(kind, 32, 32, 8, 7);
            assert_eq!(a.values(), b.values(), "{kind}");
            assert!(a.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
            assert!(a.max_value() > 0.5, "{kind} should have real content");
        }
        let a = make_scene(SceneKind::Smooth, 32, 32, 8, 7);
        let c = make_scene(SceneKind::Smooth, 32, 32, 8, 8);
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn spiky_probe_spectra_have_three_peaks() {
        for seed in [0, 3] {
            let cube = make_scene(SceneKind::Spiky, 64, 64, 8, seed);
            for (px, py) in spiky_probes(64, 64) {
                let sig: Vec<f64> = (0..8).map(|k| cube.get(px, py, k)).collect();
                let peaks = sig
                    .windows(3)
                    .filter(|w| w[1] > w[0] && w[1] > w[2])
                    .count()
                    + usize::from(sig[0] > sig[1])
                    + usize::from(sig[7] > sig[6]);
                assert_eq!(peaks, 3, "seed {seed}, probe ({px},{py}): {sig:?}");
            }
        }
    }

    #[test]
    fn checker_alternates_blocks() {
        let cube = make_scene(SceneKind::Checker, 16, 16, 2, 0);
        // Block size 2: (0,0) on, (0,2) off, (2,2) on.
        assert!(cube.get(0, 0, 1) > 0.0);
        assert_eq!(cube.get(0, 2, 1), 0.0);
        assert!(cube.get(2, 2, 1) > 0.0);
    }

    #[test]
    fn target_last_group_has_single_cell_bars() {
        let cube = make_scene(SceneKind::Target, 60, 64, 4, 0);
        // Last sixth of x: pitch 2 bars => on/off alternates every 2 cells.
        let x = 55;
        let k = 2;
        assert!(cube.get(x, 0, k) > 0.0);
        assert!(cube.get(x, 1, k) > 0.0);
        assert_eq!(cube.get(x, 2, k), 0.0);
        assert_eq!(cube.get(x, 3, k), 0.0);
        assert!(cube.get(x, 4, k) > 0.0);
    }

    #[test]
    fn awgn_hits_requested_snr() {
        let mut meas = MeasurementSet::zeros(64, 64, 4);
        for q in 0..4 {
            for (i, v) in meas.frame_mut(q).iter_mut().enumerate() {
                *v = 1.0 + (i % 7) as f64 * 0.25;
            }
        }
        let clean = meas.clone();
        add_awgn(&mut meas, 20.0, 99);
        let mut signal = 0.0;
        let mut noise = 0.0;
        for q in 0..4 {
            for (a, b) in clean.frame(q).iter().zip(meas.frame(q)) {
                signal += a * a;
                noise += (a - b) * (a - b);
            }
        }
        let snr = 10.0 * (signal / noise).log10();
        assert!((snr - 20.0).abs() < 0.5, "measured snr {snr}");
        // Same seed, same noise.
        let mut again = clean.clone();
        add_awgn(&mut again, 20.0, 99);
        assert_eq!(again, meas);
    }

    #[test]
    fn awgn_leaves_zero_measurements_untouched() {
        let mut meas = MeasurementSet::zeros(8, 8, 1);
        add_awgn(&mut meas, 10.0, 1);
        assert!(meas.frame(0).iter().all(|&v| v == 0.0));
    }
}
