//! Machine-readable run reports: command echo, config and mesh hashes,
//! module results, timing, and a pass/fail summary. Reports are
//! deterministic given config + seed, up to the timing field.

use crate::mesh::Immersion;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub config_hash: String,
    pub mesh_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub results: Value,
    pub timing_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pass: Option<bool>,
}

/// FNV-1a over a canonical byte stream.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

pub fn hash_hex(bytes: &[u8]) -> String {
    format!("{:016x}", fnv1a(bytes))
}

pub fn config_hash(config: &impl Serialize) -> String {
    let text = serde_json::to_string(config).unwrap_or_default();
    hash_hex(text.as_bytes())
}

pub fn mesh_hash(im: &Immersion) -> String {
    format!("{:016x}", crate::mesh::content_hash(im))
}

/// Provenance-carrying wrapper around an energy breakdown.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyReport {
    pub mesh_hash: String,
    pub sigma: f64,
    pub gauge_hash: String,
    #[serde(flatten)]
    pub breakdown: crate::energy::EnergyBreakdown,
}

pub fn gauge_hash(g: &crate::gauge::GaugeState) -> String {
    let mut bytes = Vec::with_capacity(8 * (g.alpha.len() + 12));
    for &a in &g.alpha {
        bytes.extend_from_slice(&a.to_bits().to_le_bytes());
    }
    bytes.extend_from_slice(&g.mobius.a.x.to_bits().to_le_bytes());
    bytes.extend_from_slice(&g.mobius.a.y.to_bits().to_le_bytes());
    bytes.extend_from_slice(&g.mobius.a.z.to_bits().to_le_bytes());
    for v in g.mobius.rot.to_row_major() {
        bytes.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    hash_hex(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable() {
        assert_eq!(fnv1a(b"willmore"), fnv1a(b"willmore"));
        assert_ne!(fnv1a(b"willmore"), fnv1a(b"willmor"));
    }
}
