//! Loading, validating, splitting and persisting fingerprint datasets.
//!
//! A dataset file is a delimited text table with a header row. Which columns
//! hold the 68 gateway readings, the spreading factor, the HDOP and the
//! ground-truth position is described by a [`ColumnMapping`], normally read
//! from a small TOML file next to the data.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Coord;
use crate::rng;

/// Number of gateways (basestations) per fingerprint.
pub const GATEWAY_COUNT: usize = 68;

/// RSSI value recorded for a gateway that did not receive the message.
pub const SENTINEL_RSSI: f64 = -200.0;

pub fn is_sentinel(rssi: f64) -> bool {
    rssi == SENTINEL_RSSI
}

/// One uplink message: per-gateway RSSI plus its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Fingerprint {
    /// dBm per gateway; [`SENTINEL_RSSI`] where not received.
    pub rssi: [f64; GATEWAY_COUNT],
    pub sf: u8,
    pub hdop: f64,
    pub lat: f64,
    pub lon: f64,
}

impl Fingerprint {
    pub fn new(rssi: [f64; GATEWAY_COUNT], sf: u8, hdop: f64, lat: f64, lon: f64) -> Result<Self> {
        let fp = Fingerprint {
            rssi,
            sf,
            hdop,
            lat,
            lon,
        };
        fp.validate().map_err(Error::Validation)?;
        Ok(fp)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if let Some((i, v)) = self
            .rssi
            .iter()
            .enumerate()
            .find(|(_, &v)| !(is_sentinel(v) || (v > SENTINEL_RSSI && v < 0.0)))
        {
            return Err(format!(
                "rssi[{i}] = {v} is neither the sentinel nor in (-200, 0) dBm"
            ));
        }
        if self.hdop.is_nan() || self.hdop < 0.0 {
            return Err(format!("hdop {} is negative or not a number", self.hdop));
        }
        if !(-90.0..=90.0).contains(&self.lat) {
            return Err(format!("latitude {} outside [-90, 90]", self.lat));
        }
        if !(-180.0..=180.0).contains(&self.lon) {
            return Err(format!("longitude {} outside [-180, 180]", self.lon));
        }
        Ok(())
    }

    pub fn coord(&self) -> Coord {
        Coord::new(self.lat, self.lon)
    }

    /// Number of gateways that received the message.
    pub fn gateways_received(&self) -> usize {
        self.rssi.iter().filter(|&&v| !is_sentinel(v)).count()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub records: Vec<Fingerprint>,
    pub source_id: String,
}

impl Dataset {
    pub fn new(records: Vec<Fingerprint>, source_id: impl Into<String>) -> Self {
        Dataset {
            records,
            source_id: source_id.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Clones the records at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Vec<Fingerprint> {
        indices.iter().map(|&i| self.records[i].clone()).collect()
    }
}

/// Which header names hold which fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnMapping {
    pub rssi_columns: Vec<String>,
    pub sf_column: String,
    pub hdop_column: String,
    pub lat_column: String,
    pub lon_column: String,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
}

fn default_delimiter() -> char {
    ','
}

/// Mapping file form; `rssi_prefix` expands to `<prefix>1 .. <prefix>68`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MappingFile {
    rssi_columns: Option<Vec<String>>,
    rssi_prefix: Option<String>,
    sf_column: String,
    hdop_column: String,
    lat_column: String,
    lon_column: String,
    #[serde(default = "default_delimiter")]
    delimiter: char,
}

impl Default for ColumnMapping {
    /// Header names of the public Antwerp LoRaWAN CSV export
    /// (`BS 1` .. `BS 68`, `SF`, `HDOP`, `Latitude`, `Longitude`).
    fn default() -> Self {
        ColumnMapping::with_prefix("BS ", "SF", "HDOP", "Latitude", "Longitude")
    }
}

impl ColumnMapping {
    pub fn with_prefix(prefix: &str, sf: &str, hdop: &str, lat: &str, lon: &str) -> Self {
        ColumnMapping {
            rssi_columns: (1..=GATEWAY_COUNT)
                .map(|i| format!("{prefix}{i}"))
                .collect(),
            sf_column: sf.into(),
            hdop_column: hdop.into(),
            lat_column: lat.into(),
            lon_column: lon.into(),
            delimiter: ',',
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rssi_columns.len() != GATEWAY_COUNT {
            return Err(Error::Config(format!(
                "column mapping lists {} rssi columns, expected {GATEWAY_COUNT}",
                self.rssi_columns.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in self.all_columns() {
            if !seen.insert(name) {
                return Err(Error::Config(format!("column `{name}` is mapped twice")));
            }
        }
        if !self.delimiter.is_ascii() {
            return Err(Error::Config(
                "delimiter must be a single ASCII character".into(),
            ));
        }
        Ok(())
    }

    fn all_columns(&self) -> impl Iterator<Item = &str> {
        self.rssi_columns.iter().map(String::as_str).chain([
            self.sf_column.as_str(),
            self.hdop_column.as_str(),
            self.lat_column.as_str(),
            self.lon_column.as_str(),
        ])
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: MappingFile =
            toml::from_str(text).map_err(|e| Error::Config(format!("column mapping: {e}")))?;
        let rssi_columns = match (raw.rssi_columns, raw.rssi_prefix) {
            (Some(cols), None) => cols,
            (None, Some(prefix)) => (1..=GATEWAY_COUNT)
                .map(|i| format!("{prefix}{i}"))
                .collect(),
            _ => {
                return Err(Error::Config(
                    "column mapping needs exactly one of `rssi_columns` or `rssi_prefix`".into(),
                ))
            }
        };
        let mapping = ColumnMapping {
            rssi_columns,
            sf_column: raw.sf_column,
            hdop_column: raw.hdop_column,
            lat_column: raw.lat_column,
            lon_column: raw.lon_column,
            delimiter: raw.delimiter,
        };
        mapping.validate()?;
        Ok(mapping)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }
}

struct ColumnIndex {
    rssi: Vec<usize>,
    sf: usize,
    hdop: usize,
    lat: usize,
    lon: usize,
}

fn resolve_columns(headers: &csv::StringRecord, mapping: &ColumnMapping) -> Result<ColumnIndex> {
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Config(format!("column `{name}` not found in header")))
    };
    Ok(ColumnIndex {
        rssi: mapping
            .rssi_columns
            .iter()
            .map(|c| find(c))
            .collect::<Result<_>>()?,
        sf: find(&mapping.sf_column)?,
        hdop: find(&mapping.hdop_column)?,
        lat: find(&mapping.lat_column)?,
        lon: find(&mapping.lon_column)?,
    })
}

fn parse_cell<T: std::str::FromStr>(
    record: &csv::StringRecord,
    col: usize,
    name: &str,
    row: usize,
) -> Result<T> {
    let raw = record.get(col).unwrap_or("").trim();
    if raw.is_empty() {
        return Err(Error::Parse {
            row,
            column: name.into(),
            message: "missing value".into(),
        });
    }
    raw.parse().map_err(|_| Error::Parse {
        row,
        column: name.into(),
        message: format!("cannot parse `{raw}`"),
    })
}

fn parse_sf(record: &csv::StringRecord, col: usize, name: &str, row: usize) -> Result<u8> {
    let raw = record.get(col).unwrap_or("").trim();
    // some exports write the spreading factor as "SF7"
    let digits = raw
        .strip_prefix("SF")
        .or_else(|| raw.strip_prefix("sf"))
        .unwrap_or(raw);
    digits.parse().map_err(|_| Error::Parse {
        row,
        column: name.into(),
        message: format!("cannot parse spreading factor `{raw}`"),
    })
}

/// Reads every data row of a delimited file into a [`Dataset`], in file order.
///
/// Rows are numbered from 1 (the first row after the header) in errors.
/// Rows with out-of-range RSSI or coordinates are rejected rather than
/// skipped, so a successful load always yields exactly one record per row.
pub fn load_dataset(path: impl AsRef<Path>, mapping: &ColumnMapping) -> Result<Dataset> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut ds = read_dataset(file, mapping)?;
    ds.source_id = path.display().to_string();
    Ok(ds)
}

/// [`load_dataset`] over any reader.
pub fn read_dataset(reader: impl std::io::Read, mapping: &ColumnMapping) -> Result<Dataset> {
    mapping.validate()?;
    let mut csv = csv::ReaderBuilder::new()
        .delimiter(mapping.delimiter as u8)
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = csv.headers()?.clone();
    let cols = resolve_columns(&headers, mapping)?;

    let mut records = Vec::new();
    for (i, rec) in csv.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        if rec.len() != headers.len() {
            return Err(Error::Schema {
                row,
                message: format!("{} fields, header has {}", rec.len(), headers.len()),
            });
        }
        let mut rssi = [SENTINEL_RSSI; GATEWAY_COUNT];
        for (slot, (&col, name)) in rssi
            .iter_mut()
            .zip(cols.rssi.iter().zip(&mapping.rssi_columns))
        {
            *slot = parse_cell(&rec, col, name, row)?;
        }
        let fp = Fingerprint {
            rssi,
            sf: parse_sf(&rec, cols.sf, &mapping.sf_column, row)?,
            hdop: parse_cell(&rec, cols.hdop, &mapping.hdop_column, row)?,
            lat: parse_cell(&rec, cols.lat, &mapping.lat_column, row)?,
            lon: parse_cell(&rec, cols.lon, &mapping.lon_column, row)?,
        };
        fp.validate().map_err(|message| Error::Parse {
            row,
            column: "*".into(),
            message,
        })?;
        records.push(fp);
    }
    Ok(Dataset::new(records, ""))
}

/// Writes a dataset with the given mapping's header names.
pub fn write_dataset(
    path: impl AsRef<Path>,
    dataset: &Dataset,
    mapping: &ColumnMapping,
) -> Result<()> {
    let path = path.as_ref();
    mapping.validate()?;
    let mut w = csv::WriterBuilder::new()
        .delimiter(mapping.delimiter as u8)
        .from_path(path)?;
    w.write_record(mapping.all_columns())?;
    for fp in &dataset.records {
        let mut row: Vec<String> = fp.rssi.iter().map(|v| v.to_string()).collect();
        row.push(fp.sf.to_string());
        row.push(fp.hdop.to_string());
        row.push(fp.lat.to_string());
        row.push(fp.lon.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Count of messages keyed by how many gateways received them.
pub fn gateway_histogram(dataset: &Dataset) -> BTreeMap<usize, usize> {
    let mut hist = BTreeMap::new();
    for fp in &dataset.records {
        *hist.entry(fp.gateways_received()).or_insert(0) += 1;
    }
    hist
}

/// Histogram of every received RSSI value (sentinels excluded).
///
/// Bins are `[start, start + bin_width)` with `start` a multiple of
/// `bin_width`; only non-empty bins are returned, in ascending order.
pub fn rssi_histogram(dataset: &Dataset, bin_width: f64) -> Result<Vec<(f64, usize)>> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::Config(format!(
            "bin width must be positive, got {bin_width}"
        )));
    }
    let mut bins: BTreeMap<i64, usize> = BTreeMap::new();
    for v in dataset.records.iter().flat_map(|fp| fp.rssi.iter()) {
        if !is_sentinel(*v) {
            *bins.entry((v / bin_width).floor() as i64).or_insert(0) += 1;
        }
    }
    Ok(bins
        .into_iter()
        .map(|(b, c)| (b as f64 * bin_width, c))
        .collect())
}

/// A train/validation/test partition of a dataset's row indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitManifest {
    pub seed: u64,
    pub fractions: [f64; 3],
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Train/validation/test sizes for `n` records: floor for the first two,
/// the remainder for test.
pub fn split_sizes(n: usize, fractions: [f64; 3]) -> (usize, usize, usize) {
    // the epsilon absorbs products like 3 * (1/3) landing one ulp low
    let take = |f: f64| ((n as f64 * f) + 1e-9).floor() as usize;
    let train = take(fractions[0]).min(n);
    let val = take(fractions[1]).min(n - train);
    (train, val, n - train - val)
}

fn check_fractions(fractions: [f64; 3]) -> Result<()> {
    if fractions.iter().any(|f| !f.is_finite() || *f <= 0.0) {
        return Err(Error::Config(format!(
            "split fractions must be positive, got {fractions:?}"
        )));
    }
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split fractions sum to {sum}, expected 1"
        )));
    }
    Ok(())
}

/// Random split of `n` row indices: a seeded Fisher-Yates permutation cut
/// into contiguous train, validation and test slices.
pub fn split_indices(n: usize, seed: u64, fractions: [f64; 3]) -> Result<SplitManifest> {
    check_fractions(fractions)?;
    let perm = rng::permutation(&mut rng::stream(seed, 0), n);
    let (n_train, n_val, _) = split_sizes(n, fractions);
    Ok(SplitManifest {
        seed,
        fractions,
        train: perm[..n_train].to_vec(),
        val: perm[n_train..n_train + n_val].to_vec(),
        test: perm[n_train + n_val..].to_vec(),
    })
}

pub fn split_dataset(dataset: &Dataset, seed: u64, fractions: [f64; 3]) -> Result<SplitManifest> {
    split_indices(dataset.len(), seed, fractions)
}

const MANIFEST_MAGIC: &str = "# lorafp split manifest v1";

impl SplitManifest {
    pub fn total(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    /// Checks that the three lists are disjoint and together cover `0..total`.
    pub fn validate(&self) -> Result<()> {
        let total = self.total();
        let mut seen = vec![false; total];
        for (name, list) in [
            ("train", &self.train),
            ("val", &self.val),
            ("test", &self.test),
        ] {
            for &i in list {
                if i >= total {
                    return Err(Error::Validation(format!(
                        "{name} index {i} out of range for {total} records"
                    )));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::Validation(format!(
                        "index {i} appears more than once"
                    )));
                }
            }
        }
        Ok(())
    }

    /// [`validate`](Self::validate) plus a record-count check against `dataset`.
    pub fn validate_for(&self, dataset: &Dataset) -> Result<()> {
        self.validate()?;
        if self.total() != dataset.len() {
            return Err(Error::Validation(format!(
                "manifest covers {} records but dataset `{}` has {}",
                self.total(),
                dataset.source_id,
                dataset.len()
            )));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let list = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
        // {:?} on f64 prints the shortest string that parses back to the same bits
        let _ = writeln!(out, "{MANIFEST_MAGIC}");
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(
            out,
            "fractions = {:?} {:?} {:?}",
            self.fractions[0], self.fractions[1], self.fractions[2]
        );
        let _ = writeln!(out, "train = {}", list(&self.train));
        let _ = writeln!(out, "val = {}", list(&self.val));
        let _ = writeln!(out, "test = {}", list(&self.test));
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// Loads a manifest written by [`save`](Self::save), or a plain
    /// assignment list with one `index,set` pair per line (`set` one of
    /// `train`, `val`/`validation`, `test`; an optional header is skipped).
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest = if text.starts_with(MANIFEST_MAGIC) {
            parse_native(&text).map_err(|m| Error::format(path, m))?
        } else {
            parse_assignment_list(&text).map_err(|m| Error::format(path, m))?
        };
        manifest.validate()?;
        Ok(manifest)
    }
}

fn parse_native(text: &str) -> std::result::Result<SplitManifest, String> {
    let mut seed = None;
    let mut fractions = None;
    let mut lists: [Option<Vec<usize>>; 3] = [None, None, None];
    for (lineno, line) in text.lines().enumerate().skip(1) {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected `key = value`", lineno + 1))?;
        let value = value.trim();
        let bad = |what: &str| format!("line {}: bad {what}", lineno + 1);
        match key.trim() {
            "seed" => seed = Some(value.parse::<u64>().map_err(|_| bad("seed"))?),
            "fractions" => {
                let f: Vec<f64> = value
                    .split_whitespace()
                    .map(str::parse)
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad("fractions"))?;
                let f: [f64; 3] = f.try_into().map_err(|_| bad("fractions (need three)"))?;
                fractions = Some(f);
            }
            k @ ("train" | "val" | "test") => {
                let slot = match k {
                    "train" => 0,
                    "val" => 1,
                    _ => 2,
                };
                let idx = value
                    .split_whitespace()
                    .map(str::parse)
                    .collect::<std::result::Result<Vec<usize>, _>>()
                    .map_err(|_| bad(k))?;
                lists[slot] = Some(idx);
            }
            other => return Err(format!("line {}: unknown key `{other}`", lineno + 1)),
        }
    }
    let [train, val, test] = lists;
    let manifest = SplitManifest {
        seed: seed.ok_or("missing seed")?,
        fractions: fractions.ok_or("missing fractions")?,
        train: train.ok_or("missing train list")?,
        val: val.ok_or("missing val list")?,
        test: test.ok_or("missing test list")?,
    };
    check_fractions(manifest.fractions).map_err(|e| e.to_string())?;
    let expected = split_sizes(manifest.total(), manifest.fractions);
    let actual = (
        manifest.train.len(),
        manifest.val.len(),
        manifest.test.len(),
    );
    if expected != actual {
        return Err(format!(
            "list sizes {actual:?} do not match fractions (expected {expected:?})"
        ));
    }
    Ok(manifest)
}

fn parse_assignment_list(text: &str) -> std::result::Result<SplitManifest, String> {
    let mut lists: [Vec<usize>; 3] = Default::default();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split([',', ';', '\t', ' ']).filter(|s| !s.is_empty());
        let (Some(idx), Some(set), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(format!("line {}: expected `index,set`", lineno + 1));
        };
        let Ok(idx) = idx.parse::<usize>() else {
            if lineno == 0 {
                continue; // header
            }
            return Err(format!("line {}: bad index `{idx}`", lineno + 1));
        };
        let slot = match set.to_ascii_lowercase().as_str() {
            "train" => 0,
            "val" | "validation" => 1,
            "test" => 2,
            other => return Err(format!("line {}: unknown set `{other}`", lineno + 1)),
        };
        lists[slot].push(idx);
    }
    let [train, val, test] = lists;
    let total = (train.len() + val.len() + test.len()).max(1) as f64;
    Ok(SplitManifest {
        seed: 0,
        fractions: [
            train.len() as f64 / total,
            val.len() as f64 / total,
            test.len() as f64 / total,
        ],
        train,
        val,
        test,
    })
}
