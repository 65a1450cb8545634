//! Run manifests.
//!
//! A manifest records everything that determines an experiment's output —
//! resolved geometry, seeds, band plan, solver settings, noise level,
//! thread count and digests of any external inputs — as stable JSON.
//! Re-running from a manifest must reproduce every output file bit for bit,
//! which is why no timestamps or host details are recorded.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::forward::BandPlan;
use crate::geometry::{GeometryConfig, SystemGeometry};
use crate::solver::SolverConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub kind: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Version of the library that produced the run.
    pub tool_version: String,
    /// Subcommand or experiment name.
    pub command: String,
    /// Fully resolved geometry in config-file syntax (overrides applied).
    pub geometry: String,
    pub code_seed: u64,
    pub shots: u32,
    pub band_plan: BandPlan,
    pub solver: SolverConfig,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scene: Option<SceneSpec>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub snr_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub noise_seed: Option<u64>,
    pub threads: usize,
    /// Experiment-specific knobs, keyed alphabetically.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, String>,
    /// SHA-256 digests of external input files, keyed by role.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub inputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn geometry_config(&self) -> Result<GeometryConfig> {
        GeometryConfig::parse(&self.geometry)
    }

    pub fn system_geometry(&self) -> Result<SystemGeometry> {
        SystemGeometry::from_config(&self.geometry_config()?)
    }

    /// Serializes to the canonical JSON form (pretty, fixed field order,
    /// sorted maps, trailing newline).
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest is serializable");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| crate::error::Error::Format(format!("{}: {e}", path.display())))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

pub fn file_digest(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::SolverConfig;

    fn sample() -> RunManifest {
        RunManifest {
            tool_version: "0.1.0".into(),
            command: "sweep-s".into(),
            geometry: "s = 1/8\ndelta_c_um = 1\ndelta_d_um = 1\nn_d = 64\nn_c = 64\n\
                       lambda_min_nm = 0\nlambda_max_nm = 140\nbeta = 1\n"
                .into(),
            code_seed: 7,
            shots: 6,
            band_plan: BandPlan::Pinned(8),
            solver: SolverConfig::default(),
            scene: Some(SceneSpec {
                kind: "spiky".into(),
                seed: 3,
            }),
            snr_db: None,
            noise_seed: None,
            threads: 1,
            params: BTreeMap::from([("positions".to_string(), "0.125".to_string())]),
            inputs: BTreeMap::new(),
        }
    }

    #[test]
    fn json_round_trip_preserves_everything() {
        let m = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        m.write(&path).unwrap();
        let back = RunManifest::read(&path).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn serialization_is_byte_stable() {
        assert_eq!(sample().to_json(), sample().to_json());
    }

    #[test]
    fn geometry_text_resolves() {
        let g = sample().system_geometry().unwrap();
        assert_eq!(g.n_d(), 64);
        assert_eq!(g.band_count_clamped(), 8);
    }

    #[test]
    fn digest_matches_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
