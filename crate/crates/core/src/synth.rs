//! Synthetic LoRaWAN-like fingerprint datasets.
//!
//! Gateways are scattered around a city centre; each message is sent from a
//! random point and heard by a gateway when its log-distance path-loss RSSI
//! (with Gaussian shadowing) clears the receiver sensitivity. Unheard
//! gateways get the sentinel value. Used for tests, demos and smoke runs.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::eval::{haversine, Coord};
use crate::ingest::{Dataset, Fingerprint, GATEWAY_COUNT, SENTINEL_RSSI};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub samples: usize,
    pub seed: u64,
    pub center: (f64, f64),
    /// Half-width of the square area in degrees of latitude.
    pub extent_deg: f64,
    /// RSSI at one metre.
    pub tx_rssi: f64,
    pub path_loss_exponent: f64,
    pub shadowing_db: f64,
    /// Weakest RSSI that is still received.
    pub sensitivity: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            samples: 2000,
            seed: 7,
            center: (51.21, 4.41),
            extent_deg: 0.06,
            tx_rssi: -20.0,
            path_loss_exponent: 3.2,
            shadowing_db: 6.0,
            sensitivity: -118.0,
        }
    }
}

/// Gateway positions for `cfg`, one per RSSI column.
pub fn gateways(cfg: &SynthConfig) -> Vec<Coord> {
    let mut r = rng::stream(cfg.seed, 100);
    (0..GATEWAY_COUNT)
        .map(|_| point_in_area(&mut r, cfg, 1.6))
        .collect()
}

fn point_in_area(
    r: &mut impl rand_chacha::rand_core::RngCore,
    cfg: &SynthConfig,
    spread: f64,
) -> Coord {
    let dlat = (2.0 * rng::unit(r) - 1.0) * cfg.extent_deg * spread;
    let dlon =
        (2.0 * rng::unit(r) - 1.0) * cfg.extent_deg * spread / cfg.center.0.to_radians().cos();
    Coord::new(cfg.center.0 + dlat, cfg.center.1 + dlon)
}

/// Generates `cfg.samples` fingerprints. Every message is heard by at least
/// one gateway.
pub fn generate(cfg: &SynthConfig) -> Result<Dataset> {
    let gws = gateways(cfg);
    let mut r = rng::stream(cfg.seed, 101);
    let mut records = Vec::with_capacity(cfg.samples);
    while records.len() < cfg.samples {
        let pos = point_in_area(&mut r, cfg, 1.0);
        let sf = 7 + rng::below(&mut r, 6) as u8;
        // higher spreading factors reach further
        let gain = 2.5 * (sf - 7) as f64;
        let mut rssi = [SENTINEL_RSSI; GATEWAY_COUNT];
        let mut heard = 0;
        for (slot, gw) in rssi.iter_mut().zip(&gws) {
            let d = haversine(pos, *gw).max(1.0);
            let level = cfg.tx_rssi - 10.0 * cfg.path_loss_exponent * d.log10()
                + cfg.shadowing_db * rng::normal(&mut r);
            if level + gain >= cfg.sensitivity && level < 0.0 {
                *slot = level.round().max(SENTINEL_RSSI + 1.0);
                heard += 1;
            }
        }
        if heard == 0 {
            continue;
        }
        let hdop = 0.5 + 2.0 * rng::unit(&mut r);
        records.push(Fingerprint::new(rssi, sf, hdop, pos.lat, pos.lon)?);
    }
    Ok(Dataset::new(records, format!("synthetic-seed{}", cfg.seed)))
}
