//! Browser playground: representation curves, metric comparison and a
//! synthetic kNN locator. Each export returns a JSON string; the plain
//! functions behind them are usable (and tested) natively.

use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

use lorafp::harness::{self, KnnSpec, MethodSpec, Part, PreparedData, DEFAULT_FRACTIONS};
use lorafp::metrics::{self, MetricKind};
use lorafp::represent::{RepresentationConfig, RepresentationKind, RepresentationParams};
use lorafp::synth::{self, SynthConfig};
use lorafp::{ingest, Coord};

/// Largest number of test points returned by [`knn_playground_json`].
pub const MAX_PLOTTED: usize = 400;

/// Representation output for every integer RSSI in `train_min..=train_max`.
pub fn representation_curve_json(
    kind: &str,
    alpha: f64,
    beta: f64,
    train_min: f64,
    train_max: f64,
) -> Result<String, String> {
    let kind: RepresentationKind = kind.parse().map_err(|e: lorafp::Error| e.to_string())?;
    let params = RepresentationParams::new(kind)
        .with_alpha(alpha)
        .with_beta(beta);
    let rep = RepresentationConfig::from_range(params, train_min, train_max)
        .map_err(|e| e.to_string())?;
    let points: Vec<[f64; 2]> = (train_min.ceil() as i64..=train_max.floor() as i64)
        .map(|r| [r as f64, rep.apply(r as f64)])
        .collect();
    Ok(
        json!({ "kind": kind.name(), "sentinel": rep.sentinel_value(), "points": points })
            .to_string(),
    )
}

fn parse_vector(text: &str) -> Result<Vec<f64>, String> {
    text.split([',', ' ', '\t', '\n'])
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| format!("`{t}` is not a number"))
        })
        .collect()
}

#[derive(Serialize)]
struct MetricRow {
    metric: &'static str,
    boolean: bool,
    distance: f64,
}

/// Every metric between two vectors given as comma or space separated lists.
pub fn metric_distances_json(x: &str, y: &str) -> Result<String, String> {
    let (x, y) = (parse_vector(x)?, parse_vector(y)?);
    if x.is_empty() || x.len() != y.len() {
        return Err(format!(
            "vectors need the same non-zero length, got {} and {}",
            x.len(),
            y.len()
        ));
    }
    let rows: Vec<MetricRow> = MetricKind::ALL
        .into_iter()
        .map(|m| MetricRow {
            metric: m.name(),
            boolean: m.is_boolean(),
            distance: metrics::distance(m, &x, &y),
        })
        .collect();
    serde_json::to_string(&rows).map_err(|e| e.to_string())
}

/// Generates a synthetic deployment, fits kNN on its training split and
/// reports validation and test errors with a sample of test predictions.
pub fn knn_playground_json(
    samples: usize,
    seed: u32,
    representation: &str,
    metric: &str,
    k: usize,
) -> Result<String, String> {
    let run = || -> lorafp::Result<String> {
        let kind: RepresentationKind = representation.parse()?;
        let metric: MetricKind = metric.parse()?;
        let cfg = SynthConfig {
            samples,
            seed: seed as u64,
            ..SynthConfig::default()
        };
        let ds = synth::generate(&cfg)?;
        let split = ingest::split_dataset(&ds, seed as u64, DEFAULT_FRACTIONS)?;
        let data = PreparedData::new(&ds, split)?;
        let params = RepresentationParams::new(kind)
            .with_alpha(60.0)
            .with_beta(1.1);
        let outcome =
            harness::run_experiment(&data, params, &MethodSpec::Knn(KnnSpec { metric, k }))?;
        let truths = data.coords(Part::Test);
        let pairs: Vec<[f64; 4]> = truths
            .iter()
            .zip(outcome.predictions(Part::Test))
            .take(MAX_PLOTTED)
            .map(|(t, p)| [t.lat, t.lon, p.lat, p.lon])
            .collect();
        let gateways: Vec<[f64; 2]> = synth::gateways(&cfg)
            .iter()
            .map(|g: &Coord| [g.lat, g.lon])
            .collect();
        let s = &outcome.summary;
        Ok(json!({
            "train": { "mean": s.train.mean, "median": s.train.median },
            "val": { "mean": s.val.mean, "median": s.val.median },
            "test": { "mean": s.test.mean, "median": s.test.median, "p90": s.test.p90 },
            "gateways": gateways,
            "test_points": pairs,
        })
        .to_string())
    };
    run().map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn representation_curve(
    kind: &str,
    alpha: f64,
    beta: f64,
    train_min: f64,
    train_max: f64,
) -> Result<String, JsError> {
    representation_curve_json(kind, alpha, beta, train_min, train_max).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn metric_distances(x: &str, y: &str) -> Result<String, JsError> {
    metric_distances_json(x, y).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn knn_playground(
    samples: usize,
    seed: u32,
    representation: &str,
    metric: &str,
    k: usize,
) -> Result<String, JsError> {
    knn_playground_json(samples, seed, representation, metric, k).map_err(|e| JsError::new(&e))
}
