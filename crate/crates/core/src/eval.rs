//! Great-circle error measurement and summary statistics.

use serde::{Deserialize, Serialize};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// A WGS84 position in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Coord {
    pub lat: f64,
    pub lon: f64,
}

impl Coord {
    pub const fn new(lat: f64, lon: f64) -> Self {
        Coord { lat, lon }
    }
}

impl From<(f64, f64)> for Coord {
    fn from((lat, lon): (f64, f64)) -> Self {
        Coord { lat, lon }
    }
}

/// Great-circle distance in meters between two points, haversine form.
pub fn haversine(a: Coord, b: Coord) -> f64 {
    let lat1 = a.lat.to_radians();
    let lat2 = b.lat.to_radians();
    let dlat = (b.lat - a.lat).to_radians();
    let dlon = (b.lon - a.lon).to_radians();

    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    // h can creep past 1 by an ulp for antipodal points
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Summary of a set of localization errors, all in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub p50: f64,
    pub p75: f64,
    pub p90: f64,
    pub p95: f64,
}

impl ErrorStats {
    /// Summarizes raw error values. Percentiles interpolate linearly between
    /// order statistics, so `p50` is the midpoint of the central pair for an
    /// even count and always equals `median`.
    ///
    /// Panics on an empty slice.
    pub fn from_errors(errors: &[f64]) -> Self {
        assert!(
            !errors.is_empty(),
            "error statistics need at least one value"
        );
        let mut sorted = errors.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
        let p50 = percentile_sorted(&sorted, 0.50);
        ErrorStats {
            count: sorted.len(),
            mean,
            median: p50,
            p50,
            p75: percentile_sorted(&sorted, 0.75),
            p90: percentile_sorted(&sorted, 0.90),
            p95: percentile_sorted(&sorted, 0.95),
        }
    }
}

fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let w = pos - lo as f64;
        // midpoint form keeps the even-count median exact
        if w == 0.5 {
            (sorted[lo] + sorted[hi]) / 2.0
        } else {
            sorted[lo] + (sorted[hi] - sorted[lo]) * w
        }
    }
}

/// Per-pair haversine errors.
///
/// Panics if the slices differ in length.
pub fn errors(predictions: &[Coord], truths: &[Coord]) -> Vec<f64> {
    assert_eq!(
        predictions.len(),
        truths.len(),
        "predictions and truths must have equal length"
    );
    predictions
        .iter()
        .zip(truths)
        .map(|(&p, &t)| haversine(p, t))
        .collect()
}

/// Haversine error statistics of `predictions` against `truths`.
///
/// Panics if the slices differ in length or are empty.
pub fn error_stats(predictions: &[Coord], truths: &[Coord]) -> ErrorStats {
    ErrorStats::from_errors(&errors(predictions, truths))
}
