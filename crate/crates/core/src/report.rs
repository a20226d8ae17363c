//! Delimited-text tables and plot-data series.
//!
//! Every number is written with Rust's shortest round-trip `f64` formatting,
//! so identical results always produce byte-identical files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::{haversine, Coord};
use crate::harness::{GridCell, RunSummary, SweepResult};
use crate::neural::TrainingHistory;
use crate::represent::RepresentationKind;

fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Messages per number of receiving gateways.
pub fn write_gateway_table(
    path: impl AsRef<Path>,
    histogram: &BTreeMap<usize, usize>,
) -> Result<()> {
    let rows: Vec<Vec<String>> = histogram
        .iter()
        .map(|(g, n)| vec![g.to_string(), n.to_string()])
        .collect();
    write_rows(path.as_ref(), &strings(&["gateways", "messages"]), &rows)
}

/// RSSI histogram bins as (lower edge, count).
pub fn write_rssi_histogram(path: impl AsRef<Path>, bins: &[(f64, usize)]) -> Result<()> {
    let rows: Vec<Vec<String>> = bins
        .iter()
        .map(|(lo, n)| vec![lo.to_string(), n.to_string()])
        .collect();
    write_rows(path.as_ref(), &strings(&["rssi_bin_start", "count"]), &rows)
}

/// One row per swept value with its validation mean and median.
pub fn write_sweep(path: impl AsRef<Path>, sweep: &SweepResult) -> Result<()> {
    let rows: Vec<Vec<String>> = sweep
        .points
        .iter()
        .map(|p| {
            vec![
                p.value.to_string(),
                p.val.mean.to_string(),
                p.val.median.to_string(),
            ]
        })
        .collect();
    let header = vec![sweep.axis.clone(), "val_mean".into(), "val_median".into()];
    write_rows(path.as_ref(), &header, &rows)
}

/// Metric rows by representation columns, each a (k, mean, median) triple.
/// Missing cells stay empty; no cells gives a header-only file.
pub fn write_grid(path: impl AsRef<Path>, cells: &[GridCell]) -> Result<()> {
    let mut header = vec!["metric".to_string()];
    for kind in RepresentationKind::ALL {
        for field in ["k", "mean", "median"] {
            header.push(format!("{kind}_{field}"));
        }
    }
    let mut metrics = Vec::new();
    for c in cells {
        if !metrics.contains(&c.metric) {
            metrics.push(c.metric);
        }
    }
    let rows: Vec<Vec<String>> = metrics
        .iter()
        .map(|&m| {
            let mut row = vec![m.name().to_string()];
            for kind in RepresentationKind::ALL {
                match cells
                    .iter()
                    .find(|c| c.metric == m && c.representation == kind)
                {
                    Some(c) => row.extend([
                        c.best_k.to_string(),
                        c.val.mean.to_string(),
                        c.val.median.to_string(),
                    ]),
                    None => row.extend(std::iter::repeat_n(String::new(), 3)),
                }
            }
            row
        })
        .collect();
    write_rows(path.as_ref(), &header, &rows)
}

/// Mean and median error of each method on the three splits.
pub fn write_summary_table(path: impl AsRef<Path>, runs: &[RunSummary]) -> Result<()> {
    let header = strings(&[
        "method",
        "representation",
        "train_mean",
        "train_median",
        "val_mean",
        "val_median",
        "test_mean",
        "test_median",
    ]);
    let rows: Vec<Vec<String>> = runs
        .iter()
        .map(|r| {
            vec![
                r.method.clone(),
                r.representation.kind.to_string(),
                r.train.mean.to_string(),
                r.train.median.to_string(),
                r.val.mean.to_string(),
                r.val.median.to_string(),
                r.test.mean.to_string(),
                r.test.median.to_string(),
            ]
        })
        .collect();
    write_rows(path.as_ref(), &header, &rows)
}

/// Per-epoch training and validation loss.
pub fn write_loss_curve(path: impl AsRef<Path>, history: &TrainingHistory) -> Result<()> {
    let rows: Vec<Vec<String>> = history
        .epochs
        .iter()
        .map(|e| vec![e.epoch.to_string(), e.train.to_string(), e.val.to_string()])
        .collect();
    write_rows(
        path.as_ref(),
        &strings(&["epoch", "train_loss", "val_loss"]),
        &rows,
    )
}

/// Predicted and true positions of one split with the error in metres.
pub fn write_predictions(
    path: impl AsRef<Path>,
    indices: &[usize],
    truths: &[Coord],
    preds: &[Coord],
) -> Result<()> {
    assert!(
        indices.len() == truths.len() && truths.len() == preds.len(),
        "prediction columns differ in length"
    );
    let rows: Vec<Vec<String>> = indices
        .iter()
        .zip(truths)
        .zip(preds)
        .map(|((i, t), p)| {
            vec![
                i.to_string(),
                t.lat.to_string(),
                t.lon.to_string(),
                p.lat.to_string(),
                p.lon.to_string(),
                haversine(*p, *t).to_string(),
            ]
        })
        .collect();
    let header = strings(&[
        "index", "true_lat", "true_lon", "pred_lat", "pred_lon", "error_m",
    ]);
    write_rows(path.as_ref(), &header, &rows)
}
