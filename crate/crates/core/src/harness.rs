//! Experiment orchestration: loading a configured dataset and split, the
//! representation sweeps, the metric-by-representation kNN grid, and single
//! method runs evaluated on all three splits.
//!
//! Model selection only ever looks at the validation split. The test split
//! is evaluated once per reported configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::etrees::{ExtraTreesConfig, Forest};
use crate::eval::{error_stats, Coord, ErrorStats};
use crate::ingest::{self, ColumnMapping, Dataset, Fingerprint, SplitManifest};
use crate::knn::KnnModel;
use crate::metrics::MetricKind;
use crate::neural::{self, MlpConfig, TrainingHistory};
use crate::par_map;
use crate::represent::{RepresentationConfig, RepresentationKind, RepresentationParams};

pub const DEFAULT_FRACTIONS: [f64; 3] = [0.7, 0.15, 0.15];

/// A whole experiment config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub split: SplitSpec,
    pub representation: RepresentationParams,
    pub method: MethodSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub path: PathBuf,
    /// Column mapping file; the built-in default mapping when absent.
    #[serde(default)]
    pub columns: Option<PathBuf>,
    /// Overrides the mapping's delimiter.
    #[serde(default)]
    pub delimiter: Option<char>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSpec {
    pub seed: u64,
    pub fractions: [f64; 3],
    /// A saved manifest; takes precedence over `seed` and `fractions`.
    pub manifest: Option<PathBuf>,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            seed: 0,
            fractions: DEFAULT_FRACTIONS,
            manifest: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MethodSpec {
    Knn(KnnSpec),
    Etrees(ExtraTreesConfig),
    Mlp(MlpConfig),
}

impl MethodSpec {
    pub fn name(&self) -> &'static str {
        match self {
            MethodSpec::Knn(_) => "knn",
            MethodSpec::Etrees(_) => "etrees",
            MethodSpec::Mlp(_) => "mlp",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MethodSpec::Knn(s) if s.k == 0 => Err(Error::Config("k must be at least 1".into())),
            MethodSpec::Knn(_) => Ok(()),
            MethodSpec::Etrees(c) => c.validate(),
            MethodSpec::Mlp(c) => {
                c.validate()?;
                if c.input_width != FEATURES_WITH_SF {
                    return Err(Error::Config(format!(
                        "mlp input_width must be {FEATURES_WITH_SF} (68 RSSI features and the spreading factor)"
                    )));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnnSpec {
    pub metric: MetricKind,
    pub k: usize,
}

/// Grids for the sweep subcommands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    /// Metric and k held fixed during the alpha and beta sweeps.
    pub metric: MetricKind,
    pub k: usize,
    /// Largest k tried by the metric grid.
    pub k_max: usize,
    pub metrics: Vec<MetricKind>,
    pub representations: Vec<RepresentationKind>,
    /// Alpha and beta used by the exponential and powed grid columns.
    pub grid_alpha: f64,
    pub grid_beta: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            alphas: (1..=18).map(|i| (i * 5) as f64).collect(),
            betas: (7..=17).map(|i| i as f64 / 10.0).collect(),
            metric: MetricKind::Braycurtis,
            k: 11,
            k_max: 30,
            metrics: MetricKind::TABLE.to_vec(),
            representations: RepresentationKind::ALL.to_vec(),
            grid_alpha: 60.0,
            grid_beta: 1.1,
        }
    }
}

impl SweepSpec {
    /// Representation parameters of one grid column.
    pub fn grid_params(&self, kind: RepresentationKind) -> RepresentationParams {
        RepresentationParams::new(kind)
            .with_alpha(self.grid_alpha)
            .with_beta(self.grid_beta)
    }
}

impl ExperimentSpec {
    /// Parses a TOML experiment file; relative paths are resolved against
    /// `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut spec: ExperimentSpec =
            toml::from_str(text).map_err(|e| Error::Config(format!("experiment config: {e}")))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        };
        resolve(&mut spec.dataset.path);
        spec.dataset.columns.as_mut().map(resolve);
        spec.split.manifest.as_mut().map(resolve);
        spec.output.as_mut().map(resolve);
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
    }

    pub fn validate(&self) -> Result<()> {
        self.representation.validate()?;
        self.method.validate()?;
        if self.sweep.k == 0 || self.sweep.k_max == 0 {
            return Err(Error::Config("sweep k and k_max must be at least 1".into()));
        }
        Ok(())
    }

    pub fn column_mapping(&self) -> Result<ColumnMapping> {
        let mut mapping = match &self.dataset.columns {
            Some(p) => ColumnMapping::load(p)?,
            None => ColumnMapping::default(),
        };
        if let Some(d) = self.dataset.delimiter {
            mapping.delimiter = d;
            mapping.validate()?;
        }
        Ok(mapping)
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        ingest::load_dataset(&self.dataset.path, &self.column_mapping()?)
    }

    pub fn prepare(&self) -> Result<PreparedData> {
        let dataset = self.load_dataset()?;
        let (manifest, from_file) = match &self.split.manifest {
            Some(p) => (SplitManifest::load(p)?, true),
            None => (
                ingest::split_dataset(&dataset, self.split.seed, self.split.fractions)?,
                false,
            ),
        };
        let mut data = PreparedData::new(&dataset, manifest)?;
        data.manifest_from_file = from_file;
        Ok(data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Train,
    Val,
    Test,
}

impl Part {
    pub const ALL: [Part; 3] = [Part::Train, Part::Val, Part::Test];

    pub fn name(self) -> &'static str {
        match self {
            Part::Train => "train",
            Part::Val => "val",
            Part::Test => "test",
        }
    }
}

/// A dataset cut into its three splits.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub source_id: String,
    pub manifest: SplitManifest,
    /// Whether the split came from a saved manifest rather than a fresh draw.
    pub manifest_from_file: bool,
    train: Vec<Fingerprint>,
    val: Vec<Fingerprint>,
    test: Vec<Fingerprint>,
}

impl PreparedData {
    pub fn new(dataset: &Dataset, manifest: SplitManifest) -> Result<Self> {
        manifest.validate_for(dataset)?;
        if manifest.train.is_empty() || manifest.val.is_empty() || manifest.test.is_empty() {
            return Err(Error::Validation(
                "every split must hold at least one record".into(),
            ));
        }
        Ok(PreparedData {
            source_id: dataset.source_id.clone(),
            train: dataset.select(&manifest.train),
            val: dataset.select(&manifest.val),
            test: dataset.select(&manifest.test),
            manifest,
            manifest_from_file: false,
        })
    }

    pub fn records(&self, part: Part) -> &[Fingerprint] {
        match part {
            Part::Train => &self.train,
            Part::Val => &self.val,
            Part::Test => &self.test,
        }
    }

    /// Dataset row index of each record of `part`.
    pub fn indices(&self, part: Part) -> &[usize] {
        match part {
            Part::Train => &self.manifest.train,
            Part::Val => &self.manifest.val,
            Part::Test => &self.manifest.test,
        }
    }

    pub fn coords(&self, part: Part) -> Vec<Coord> {
        self.records(part).iter().map(Fingerprint::coord).collect()
    }

    pub fn fit_representation(&self, params: RepresentationParams) -> Result<RepresentationConfig> {
        params.fit(&self.train)
    }
}

/// Width of the tree and network feature vectors.
pub const FEATURES_WITH_SF: usize = ingest::GATEWAY_COUNT + 1;

/// The 68 transformed RSSI values (the kNN feature set).
pub fn rssi_features(rep: &RepresentationConfig, records: &[Fingerprint]) -> Vec<Vec<f64>> {
    records.iter().map(|r| rep.transform(r).to_vec()).collect()
}

/// The transformed RSSI values followed by the raw spreading factor.
pub fn rssi_sf_features(rep: &RepresentationConfig, records: &[Fingerprint]) -> Vec<Vec<f64>> {
    records
        .iter()
        .map(|r| {
            let mut v = rep.transform(r).to_vec();
            v.push(r.sf as f64);
            v
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub val: ErrorStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: String,
    pub points: Vec<SweepPoint>,
    pub best_index: usize,
    /// Test-split statistics at the best value.
    pub test: ErrorStats,
}

impl SweepResult {
    pub fn best(&self) -> &SweepPoint {
        &self.points[self.best_index]
    }
}

/// Index of the smallest mean; ties go to the earliest candidate.
fn argmin_mean<'a>(means: impl IntoIterator<Item = (f64, f64)> + 'a) -> Option<usize> {
    let mut best: Option<(usize, f64, f64)> = None;
    for (i, (key, mean)) in means.into_iter().enumerate() {
        let better = match best {
            None => true,
            Some((_, bk, bm)) => mean < bm || (mean == bm && key < bk),
        };
        if better {
            best = Some((i, key, mean));
        }
    }
    best.map(|b| b.0)
}

/// kNN predictions for one split with a fitted representation.
pub fn knn_predict(
    data: &PreparedData,
    rep: &RepresentationConfig,
    metric: MetricKind,
    k: usize,
    part: Part,
) -> Result<Vec<Coord>> {
    let train = rssi_features(rep, data.records(Part::Train));
    let model = KnnModel::fit(&train, &data.coords(Part::Train), metric, k)?;
    Ok(model.predict_batch(&rssi_features(rep, data.records(part))))
}

pub fn knn_stats(
    data: &PreparedData,
    params: RepresentationParams,
    metric: MetricKind,
    k: usize,
    part: Part,
) -> Result<ErrorStats> {
    let rep = data.fit_representation(params)?;
    let preds = knn_predict(data, &rep, metric, k, part)?;
    Ok(error_stats(&preds, &data.coords(part)))
}

/// Evaluates kNN on the validation split for every value of one
/// representation parameter, then the best value once on the test split.
pub fn sweep_representation(
    data: &PreparedData,
    axis: &str,
    values: &[f64],
    params_for: impl Fn(f64) -> RepresentationParams + Sync + Send,
    metric: MetricKind,
    k: usize,
) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(Error::Config(format!("empty {axis} grid")));
    }
    let cells = par_map(values, |&v| {
        knn_stats(data, params_for(v), metric, k, Part::Val)
    });
    let mut points = Vec::with_capacity(values.len());
    for (&value, stats) in values.iter().zip(cells) {
        points.push(SweepPoint { value, val: stats? });
    }
    let best_index =
        argmin_mean(points.iter().map(|p| (p.value, p.val.mean))).expect("non-empty grid");
    let test = knn_stats(
        data,
        params_for(points[best_index].value),
        metric,
        k,
        Part::Test,
    )?;
    Ok(SweepResult {
        axis: axis.to_string(),
        points,
        best_index,
        test,
    })
}

/// Exponential-representation sweep over `alphas`.
pub fn sweep_alpha(
    data: &PreparedData,
    base: RepresentationParams,
    alphas: &[f64],
    metric: MetricKind,
    k: usize,
) -> Result<SweepResult> {
    let base = RepresentationParams {
        kind: RepresentationKind::Exponential,
        ..base
    };
    sweep_representation(data, "alpha", alphas, |a| base.with_alpha(a), metric, k)
}

/// Powed-representation sweep over `betas`.
pub fn sweep_beta(
    data: &PreparedData,
    base: RepresentationParams,
    betas: &[f64],
    metric: MetricKind,
    k: usize,
) -> Result<SweepResult> {
    let base = RepresentationParams {
        kind: RepresentationKind::Powed,
        ..base
    };
    sweep_representation(data, "beta", betas, |b| base.with_beta(b), metric, k)
}

/// One cell of the metric by representation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub metric: MetricKind,
    pub representation: RepresentationKind,
    pub best_k: usize,
    pub val: ErrorStats,
    /// Validation mean error for k = 1..=k_max.
    pub mean_by_k: Vec<f64>,
}

/// Validation statistics for every k in `1..=k_max` from a single
/// neighbour search per query.
pub fn k_curve(
    data: &PreparedData,
    params: RepresentationParams,
    metric: MetricKind,
    k_max: usize,
) -> Result<Vec<ErrorStats>> {
    let rep = data.fit_representation(params)?;
    let train = rssi_features(&rep, data.records(Part::Train));
    let model = KnnModel::fit(&train, &data.coords(Part::Train), metric, k_max)?;
    let neighbors = model.predict_topk_batch(&rssi_features(&rep, data.records(Part::Val)), k_max);
    let truths = data.coords(Part::Val);
    Ok((1..=k_max)
        .map(|k| {
            let preds: Vec<Coord> = neighbors.iter().map(|n| model.mean_of(n, k)).collect();
            error_stats(&preds, &truths)
        })
        .collect())
}

pub fn grid_cell(
    data: &PreparedData,
    params: RepresentationParams,
    metric: MetricKind,
    k_max: usize,
) -> Result<GridCell> {
    let curve = k_curve(data, params, metric, k_max)?;
    let best =
        argmin_mean(curve.iter().enumerate().map(|(i, s)| (i as f64, s.mean))).expect("k_max >= 1");
    Ok(GridCell {
        metric,
        representation: params.kind,
        best_k: best + 1,
        val: curve[best],
        mean_by_k: curve.iter().map(|s| s.mean).collect(),
    })
}

/// Best k and its validation statistics for every (metric, representation)
/// pair, metric-major.
pub fn sweep_metric_k(
    data: &PreparedData,
    metrics: &[MetricKind],
    representations: &[RepresentationParams],
    k_max: usize,
) -> Result<Vec<GridCell>> {
    let jobs: Vec<(MetricKind, RepresentationParams)> = metrics
        .iter()
        .flat_map(|&m| representations.iter().map(move |&r| (m, r)))
        .collect();
    par_map(&jobs, |&(m, r)| grid_cell(data, r, m, k_max))
        .into_iter()
        .collect()
}

/// Best-k validation results of the boolean metrics. They only see which
/// gateways received a message, so they run on the positive representation
/// whose zero is exactly the out-of-range sentinel.
pub fn run_boolean_family(data: &PreparedData, k_max: usize) -> Result<Vec<GridCell>> {
    sweep_metric_k(
        data,
        &MetricKind::BOOLEAN,
        &[RepresentationParams::new(RepresentationKind::Positive)],
        k_max,
    )
}

/// Statistics of one method on the three splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: String,
    pub representation: RepresentationParams,
    pub train: ErrorStats,
    pub val: ErrorStats,
    pub test: ErrorStats,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub summary: RunSummary,
    /// Predictions of the train, val and test splits, in split order.
    pub predictions: [Vec<Coord>; 3],
    pub history: Option<TrainingHistory>,
}

impl ExperimentOutcome {
    pub fn predictions(&self, part: Part) -> &[Coord] {
        &self.predictions[part as usize]
    }
}

/// Fits `method` on the training split and evaluates all three splits.
pub fn run_experiment(
    data: &PreparedData,
    params: RepresentationParams,
    method: &MethodSpec,
) -> Result<ExperimentOutcome> {
    method.validate()?;
    let rep = data.fit_representation(params)?;
    let train_y = data.coords(Part::Train);
    let (predictions, history) = match method {
        MethodSpec::Knn(s) => {
            let feats = Part::ALL.map(|p| rssi_features(&rep, data.records(p)));
            let model = KnnModel::fit(&feats[0], &train_y, s.metric, s.k)?;
            (feats.map(|f| model.predict_batch(&f)), None)
        }
        MethodSpec::Etrees(cfg) => {
            let feats = Part::ALL.map(|p| rssi_sf_features(&rep, data.records(p)));
            let forest = Forest::fit(&feats[0], &train_y, cfg)?;
            (feats.map(|f| forest.predict_batch(&f)), None)
        }
        MethodSpec::Mlp(cfg) => {
            let feats = Part::ALL.map(|p| rssi_sf_features(&rep, data.records(p)));
            let (model, history) = neural::train(
                cfg.clone(),
                &feats[0],
                &train_y,
                &feats[1],
                &data.coords(Part::Val),
            )?;
            (feats.map(|f| model.predict_batch(&f)), Some(history))
        }
    };
    let stats = Part::ALL.map(|p| error_stats(&predictions[p as usize], &data.coords(p)));
    Ok(ExperimentOutcome {
        summary: RunSummary {
            method: method.name().to_string(),
            representation: params,
            train: stats[0],
            val: stats[1],
            test: stats[2],
        },
        predictions,
        history,
    })
}
