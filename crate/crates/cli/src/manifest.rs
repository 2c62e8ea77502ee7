//! Run manifest: grid definition, per-point status, and resume support.
//! A completed point is never recomputed; resuming against a different
//! configuration is refused via the fingerprint.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Pending,
    Done,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridPoint {
    pub delta: f64,
    pub alpha: f64,
    /// Seed handed to the solver for this point.
    pub seed: u64,
    pub status: PointStatus,
    /// Record file relative to the run directory.
    pub record: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub run_id: String,
    pub command: String,
    /// Fingerprint of the resolved configuration and grid; resume aborts on
    /// mismatch.
    pub fingerprint: String,
    /// Resolved flat configuration for reference.
    pub config_text: String,
    pub points: Vec<GridPoint>,
}

impl RunManifest {
    pub fn path_in(dir: &Path) -> PathBuf {
        dir.join("manifest.json")
    }

    pub fn save(&self, dir: &Path) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(Self::path_in(dir), text + "\n")?;
        Ok(())
    }

    pub fn load(dir: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(Self::path_in(dir))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn any_failed(&self) -> bool {
        self.points.iter().any(|p| p.status == PointStatus::Failed)
    }
}

/// Fingerprint of a grid run: configuration text plus the exact point list.
pub fn grid_fingerprint(config_text: &str, points: &[(f64, f64)]) -> String {
    let mut text = config_text.to_string();
    for (delta, alpha) in points {
        text.push_str(&format!(";{delta:.17e},{alpha:.17e}"));
    }
    format!("{:016x}", asbm_fnv(&text))
}

fn asbm_fnv(text: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in text.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
