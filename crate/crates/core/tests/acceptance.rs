//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria 1-6 need the public Antwerp LoRaWAN fingerprint CSV:
//!
//! - `LORAFP_DATASET`: path of the CSV (required for 1-6),
//! - `LORAFP_COLUMNS`: column mapping TOML (default header names otherwise),
//! - `LORAFP_SPLIT`: the original split manifest; with it the tight
//!   tolerances apply, without it a fresh seeded 70/15/15 split and the
//!   loose ones.
//!
//! Without the dataset those criteria print NOT RUN. Criterion 7 needs no
//! data and always runs.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use lorafp::etrees::{ExtraTreesConfig, Forest, TreeNode};
use lorafp::harness::{self, KnnSpec, MethodSpec, PreparedData, DEFAULT_FRACTIONS};
use lorafp::ingest::{self, ColumnMapping, Dataset};
use lorafp::knn::KnnModel;
use lorafp::metrics::{self, MetricKind};
use lorafp::neural::{self, EarlyStopping, MlpConfig, MlpModel, StopDecision};
use lorafp::represent::{RepresentationConfig, RepresentationKind, RepresentationParams};
use lorafp::{haversine, rng, Coord};
use rand_chacha::rand_core::RngCore;
use rand_chacha::ChaCha8Rng;

// ---- pinned tolerances ----
const DATASET_RECORDS: usize = 123_528;
const DATASET_HISTOGRAM: [(usize, usize); 6] =
    [(1, 93), (2, 9424), (3, 113_972), (4, 2), (5, 16), (6, 21)];
const INGEST_BUDGET: Duration = Duration::from_secs(30);
const CELL_BUDGET: Duration = Duration::from_secs(600);
const TIGHT: f64 = 0.02;
const LOOSE: f64 = 0.05;
const BRAYCURTIS_POWED_MEAN: f64 = 388.0;
const BRAYCURTIS_POWED_K: (usize, usize) = (11, 17);
const EUCLIDEAN_POSITIVE_MEAN: f64 = 391.0;
const GRID_K_MAX: usize = 30;
const ALPHA_BEST_RANGE: (f64, f64) = (50.0, 90.0);
const ALPHA_PLATEAU_SPREAD_M: f64 = 2.0;
const BETA_BEST_RANGE: (f64, f64) = (1.0, 1.3);
const BETA_BEST_MEAN: f64 = 389.0;
const BOOLEAN_BAND: (f64, f64) = (480.0, 545.0);
const MLP_TEST_MEAN: f64 = 358.0;
const MLP_TEST_MEAN_TOL: f64 = 0.07;
const MLP_TEST_MEDIAN: f64 = 204.0;
const MLP_TEST_MEDIAN_TOL: f64 = 0.10;
const TREES_TEST_MEAN: f64 = 380.0;
const TREES_TEST_MEAN_TOL: f64 = 0.05;
const KNN_INSTANCES: usize = 200;
const REPRESENTATION_DRAWS: usize = 100_000;
const METRIC_PAIRS: usize = 100_000;
const TREE_INSTANCES: usize = 100;
const GRADIENT_NETWORKS: usize = 20;
const GRADIENT_TOL: f64 = 1e-4;
const OVERFIT_LOSS: f64 = 1e-3;
const MERIDIAN_M: f64 = 111_194.93;
const MERIDIAN_TOL_M: f64 = 0.01;
const PROPERTY_BUDGET: Duration = Duration::from_secs(300);

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

#[derive(Default)]
struct Tally {
    passed: usize,
    failed: usize,
    not_run: usize,
}

impl Tally {
    fn record(&mut self, id: &str, title: &str, o: Outcome, elapsed: Duration) {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        if o.pass {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        println!(
            "{tag:<7} {id:<4} {title}: {} [{:.1}s]",
            o.detail,
            elapsed.as_secs_f64()
        );
    }

    fn run(&mut self, id: &str, title: &str, f: impl FnOnce() -> Outcome) {
        let t = Instant::now();
        let o = f();
        self.record(id, title, o, t.elapsed());
    }

    fn not_run(&mut self, id: &str, title: &str, why: &str) {
        self.not_run += 1;
        println!("{:<7} {id:<4} {title}: {why}", "NOT RUN");
    }
}

fn within(value: f64, target: f64, rel: f64) -> bool {
    (value - target).abs() <= rel * target
}

// ---------------------------------------------------------------- dataset

struct Antwerp {
    dataset: Dataset,
    data: PreparedData,
    tolerance: f64,
    split_label: &'static str,
}

fn load_antwerp(path: &str) -> Result<(Antwerp, Duration), String> {
    let mapping = match std::env::var("LORAFP_COLUMNS") {
        Ok(p) => ColumnMapping::load(&p).map_err(|e| e.to_string())?,
        Err(_) => ColumnMapping::default(),
    };
    let t = Instant::now();
    let dataset = ingest::load_dataset(path, &mapping).map_err(|e| e.to_string())?;
    let load_time = t.elapsed();
    let (manifest, tolerance, split_label) = match std::env::var("LORAFP_SPLIT") {
        Ok(p) => (
            ingest::SplitManifest::load(&p).map_err(|e| e.to_string())?,
            TIGHT,
            "original split",
        ),
        Err(_) => (
            ingest::split_dataset(&dataset, 0, DEFAULT_FRACTIONS).map_err(|e| e.to_string())?,
            LOOSE,
            "fresh seeded split",
        ),
    };
    let data = PreparedData::new(&dataset, manifest).map_err(|e| e.to_string())?;
    Ok((
        Antwerp {
            dataset,
            data,
            tolerance,
            split_label,
        },
        load_time,
    ))
}

fn dataset_criteria(tally: &mut Tally, a: &Antwerp, load_time: Duration) {
    let tol = a.tolerance;
    let pct = tol * 100.0;
    tally.run("1", "dataset record count and gateway histogram", || {
        let hist = ingest::gateway_histogram(&a.dataset);
        let expected: BTreeMap<usize, usize> = DATASET_HISTOGRAM.into_iter().collect();
        check(
            a.dataset.len() == DATASET_RECORDS && hist == expected && load_time < INGEST_BUDGET,
            format!(
                "{} records, histogram {hist:?}, loaded in {:.1}s",
                a.dataset.len(),
                load_time.as_secs_f64()
            ),
        )
    });

    let powed = RepresentationParams::new(RepresentationKind::Powed).with_beta(1.1);
    let positive = RepresentationParams::new(RepresentationKind::Positive);
    tally.run("2", "kNN grid spot checks", || {
        let t = Instant::now();
        let bc = harness::grid_cell(&a.data, powed, MetricKind::Braycurtis, GRID_K_MAX);
        let cell_time = t.elapsed();
        let eu = harness::grid_cell(&a.data, positive, MetricKind::Euclidean, GRID_K_MAX);
        match (bc, eu) {
            (Ok(bc), Ok(eu)) => check(
                (BRAYCURTIS_POWED_K.0..=BRAYCURTIS_POWED_K.1).contains(&bc.best_k)
                    && within(bc.val.mean, BRAYCURTIS_POWED_MEAN, tol)
                    && within(eu.val.mean, EUCLIDEAN_POSITIVE_MEAN, tol)
                    && cell_time < CELL_BUDGET,
                format!(
                    "braycurtis/powed k={} val mean {:.1} m (target {BRAYCURTIS_POWED_MEAN} +/-{pct}%), euclidean/positive val mean {:.1} m (target {EUCLIDEAN_POSITIVE_MEAN}), one cell {:.0}s, {}",
                    bc.best_k, bc.val.mean, eu.val.mean, cell_time.as_secs_f64(), a.split_label
                ),
            ),
            (Err(e), _) | (_, Err(e)) => check(false, e.to_string()),
        }
    });

    tally.run("3", "alpha sweep", || {
        let base = RepresentationParams::new(RepresentationKind::Exponential);
        let alphas: Vec<f64> = (1..=18).map(|i| (5 * i) as f64).collect();
        match harness::sweep_alpha(&a.data, base, &alphas, MetricKind::Braycurtis, 11) {
            Ok(r) => {
                let plateau: Vec<f64> = r.points.iter().filter(|p| p.value >= 60.0).map(|p| p.val.mean).collect();
                let spread = plateau.iter().cloned().fold(f64::MIN, f64::max) - plateau.iter().cloned().fold(f64::MAX, f64::min);
                let best = r.best().value;
                check(
                    best >= ALPHA_BEST_RANGE.0 && best <= ALPHA_BEST_RANGE.1 && spread < ALPHA_PLATEAU_SPREAD_M,
                    format!("best alpha {best}, val mean spread over 60..90 {spread:.2} m, test mean at best {:.1} m", r.test.mean),
                )
            }
            Err(e) => check(false, e.to_string()),
        }
    });

    tally.run("4", "beta sweep", || {
        let base = RepresentationParams::new(RepresentationKind::Powed);
        let betas: Vec<f64> = (7..=17).map(|i| i as f64 / 10.0).collect();
        match harness::sweep_beta(&a.data, base, &betas, MetricKind::Braycurtis, 11) {
            Ok(r) => {
                let best = r.best();
                check(
                    best.value >= BETA_BEST_RANGE.0 - 1e-9
                        && best.value <= BETA_BEST_RANGE.1 + 1e-9
                        && within(best.val.mean, BETA_BEST_MEAN, tol),
                    format!(
                        "best beta {} val mean {:.1} m (target {BETA_BEST_MEAN} +/-{pct}%)",
                        best.value, best.val.mean
                    ),
                )
            }
            Err(e) => check(false, e.to_string()),
        }
    });

    tally.run(
        "5",
        "boolean metric family band",
        || match harness::run_boolean_family(&a.data, GRID_K_MAX) {
            Ok(cells) => {
                let means: Vec<String> = cells
                    .iter()
                    .map(|c| format!("{} {:.1}", c.metric, c.val.mean))
                    .collect();
                check(
                    cells
                        .iter()
                        .all(|c| c.val.mean >= BOOLEAN_BAND.0 && c.val.mean <= BOOLEAN_BAND.1),
                    format!(
                        "val means [{}] (band {:?} m)",
                        means.join(", "),
                        BOOLEAN_BAND
                    ),
                )
            }
            Err(e) => check(false, e.to_string()),
        },
    );

    tally.run("6", "method ordering on the test split", || {
        let knn = harness::run_experiment(
            &a.data,
            powed,
            &MethodSpec::Knn(KnnSpec {
                metric: MetricKind::Braycurtis,
                k: 14,
            }),
        );
        let trees = harness::run_experiment(
            &a.data,
            powed,
            &MethodSpec::Etrees(ExtraTreesConfig::tuned()),
        );
        let mlp = harness::run_experiment(&a.data, powed, &MethodSpec::Mlp(MlpConfig::default()));
        match (knn, trees, mlp) {
            (Ok(k), Ok(t), Ok(m)) => {
                let (k, t, m) = (k.summary.test, t.summary.test, m.summary.test);
                check(
                    m.mean < t.mean
                        && t.mean < k.mean
                        && within(m.mean, MLP_TEST_MEAN, MLP_TEST_MEAN_TOL)
                        && within(m.median, MLP_TEST_MEDIAN, MLP_TEST_MEDIAN_TOL)
                        && within(t.mean, TREES_TEST_MEAN, TREES_TEST_MEAN_TOL),
                    format!(
                        "test means mlp {:.1} / trees {:.1} / knn {:.1} m, mlp median {:.1} m",
                        m.mean, t.mean, k.mean, m.median
                    ),
                )
            }
            (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => check(false, e.to_string()),
        }
    });
}

// ---------------------------------------------------------------- properties

fn uniform(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng::unit(r)
}

fn below(r: &mut ChaCha8Rng, n: usize) -> usize {
    rng::below(r, n as u64) as usize
}

/// Sparse non-negative vector drawn like transformed fingerprints: mostly a
/// background value, a few readings from a small set (to force ties) or
/// continuous.
fn fingerprint_like(r: &mut ChaCha8Rng, dim: usize, background: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| match below(r, 10) {
            0..=5 => background,
            6 | 7 => below(r, 4) as f64 + 1.0,
            _ => uniform(r, 0.0, 5.0),
        })
        .collect()
}

/// Straightforward distance definitions, written independently of the
/// library kernels.
fn oracle_distance(kind: MetricKind, x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut acc = 0.0;
    match kind {
        MetricKind::Euclidean => {
            for i in 0..n {
                acc += (x[i] - y[i]) * (x[i] - y[i]);
            }
            acc.sqrt()
        }
        MetricKind::Manhattan => {
            for i in 0..n {
                acc += (x[i] - y[i]).abs();
            }
            acc
        }
        MetricKind::Chebyshev => {
            for i in 0..n {
                acc = f64::max(acc, (x[i] - y[i]).abs());
            }
            acc
        }
        MetricKind::Hamming => (0..n).filter(|&i| x[i] != y[i]).count() as f64 / n as f64,
        MetricKind::Canberra => {
            for i in 0..n {
                let den = x[i].abs() + y[i].abs();
                if den != 0.0 {
                    acc += (x[i] - y[i]).abs() / den;
                }
            }
            acc
        }
        MetricKind::Braycurtis => {
            let (mut sx, mut sy) = (0.0, 0.0);
            for i in 0..n {
                acc += (x[i] - y[i]).abs();
                sx += x[i];
                sy += y[i];
            }
            let den = (sx + sy).abs();
            if den == 0.0 {
                0.0
            } else {
                acc / den
            }
        }
        _ => {
            let tt = (0..n).filter(|&i| x[i] != 0.0 && y[i] != 0.0).count() as f64;
            let ne = (0..n).filter(|&i| (x[i] != 0.0) != (y[i] != 0.0)).count() as f64;
            let nf = n as f64;
            let frac = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
            match kind {
                MetricKind::Jaccard => frac(ne, ne + tt),
                MetricKind::Matching => ne / nf,
                MetricKind::Dice => frac(ne, 2.0 * tt + ne),
                MetricKind::Kulsinski => (ne - tt + nf) / (ne + nf),
                _ => unreachable!(),
            }
        }
    }
}

fn knn_oracle() -> Outcome {
    let mut r = rng::stream(2024, 1);
    let mut queries = 0;
    for inst in 0..KNN_INSTANCES {
        let metric = MetricKind::ALL[inst % MetricKind::ALL.len()];
        let n = 1 + below(&mut r, 200);
        let dim = 1 + below(&mut r, 12);
        let k = 1 + below(&mut r, n.min(10));
        let background = if inst % 3 == 0 { 0.25 } else { 0.0 };
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| fingerprint_like(&mut r, dim, background))
            .collect();
        let coords: Vec<Coord> = (0..n)
            .map(|_| Coord::new(uniform(&mut r, 51.1, 51.3), uniform(&mut r, 4.3, 4.5)))
            .collect();
        let model = match KnnModel::fit(&rows, &coords, metric, k) {
            Ok(m) => m,
            Err(e) => return check(false, format!("instance {inst}: {e}")),
        };
        for _ in 0..5 {
            let q = fingerprint_like(&mut r, dim, background);
            let mut order: Vec<(f64, usize)> = rows
                .iter()
                .enumerate()
                .map(|(i, x)| (oracle_distance(metric, &q, x), i))
                .collect();
            order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let (mut lat, mut lon) = (0.0, 0.0);
            for &(_, i) in &order[..k] {
                lat += coords[i].lat;
                lon += coords[i].lon;
            }
            let expected = Coord::new(lat / k as f64, lon / k as f64);
            let got_idx: Vec<usize> = model
                .predict_topk(&q, k)
                .iter()
                .map(|nb| nb.index)
                .collect();
            let want_idx: Vec<usize> = order[..k].iter().map(|p| p.1).collect();
            let got = model.predict(&q);
            if got_idx != want_idx || got != expected {
                return check(false, format!("instance {inst} ({metric}, n={n}, k={k}): neighbours {got_idx:?} vs {want_idx:?}"));
            }
            queries += 1;
        }
    }
    check(
        true,
        format!(
            "{KNN_INSTANCES} instances, {queries} queries, exact neighbour lists and estimates"
        ),
    )
}

fn representation_invariants() -> Outcome {
    let mut r = rng::stream(2024, 2);
    for draw in 0..REPRESENTATION_DRAWS {
        let train_min = uniform(&mut r, -199.0, -2.0);
        let train_max = uniform(&mut r, train_min, -1.0);
        let alpha = uniform(&mut r, 1.0, 100.0);
        let beta = uniform(&mut r, 0.5, 3.0);
        let kind = RepresentationKind::ALL[draw % 4];
        let params = RepresentationParams::new(kind)
            .with_alpha(alpha)
            .with_beta(beta);
        let rep = match RepresentationConfig::from_range(params, train_min, train_max) {
            Ok(rep) => rep,
            Err(e) => return check(false, format!("draw {draw}: {e}")),
        };
        let v = uniform(&mut r, train_min, train_max);
        let w = uniform(&mut r, -199.9, -0.1);
        let (lo, hi) = if v <= w { (v, w) } else { (w, v) };
        let (fv, flo, fhi, fs) = (
            rep.apply(v),
            rep.apply(lo),
            rep.apply(hi),
            rep.sentinel_value(),
        );
        let in_range = match kind {
            RepresentationKind::Positive => fv >= 1.0 && fv <= train_max - train_min + 1.0,
            RepresentationKind::Normalized => fv > 0.0 && fv <= 1.0,
            RepresentationKind::Exponential => fv > 0.0 && fv <= 1.0,
            RepresentationKind::Powed => fv > 0.0 && fv <= 1.0,
        };
        let sentinel_ok = match kind {
            RepresentationKind::Exponential => fs == (train_min / alpha).exp(),
            _ => fs == 0.0,
        };
        if !(in_range && sentinel_ok && flo <= fhi && fs < fv && fv.is_finite()) {
            return check(
                false,
                format!("{kind} min {train_min} max {train_max} alpha {alpha} beta {beta}: f({v}) = {fv}, f({lo}) = {flo}, f({hi}) = {fhi}"),
            );
        }
    }
    check(true, format!("{REPRESENTATION_DRAWS} draws: order kept, training range maps into bounds, sentinel lowest"))
}

fn metric_axioms() -> Outcome {
    let mut r = rng::stream(2024, 3);
    for pair in 0..METRIC_PAIRS {
        let kind = MetricKind::ALL[pair % MetricKind::ALL.len()];
        let dim = 1 + below(&mut r, 68);
        let x = fingerprint_like(&mut r, dim, 0.0);
        let y = fingerprint_like(&mut r, dim, 0.0);
        let dxy = metrics::distance(kind, &x, &y);
        let dyx = metrics::distance(kind, &y, &x);
        let dxx = metrics::distance(kind, &x, &x);
        let identity = if kind == MetricKind::Kulsinski {
            dxx <= dxy
        } else {
            dxx == 0.0
        };
        let mut ok = identity && dxy == dyx && dxy >= 0.0 && dxy == oracle_distance(kind, &x, &y);
        if kind.is_boolean() {
            ok &= dxy == metrics::distance(kind, &metrics::binarize(&x), &metrics::binarize(&y));
        }
        // scale behaviour
        let c = uniform(&mut r, 0.1, 10.0);
        let (cx, cy): (Vec<f64>, Vec<f64>) = (
            x.iter().map(|v| v * c).collect(),
            y.iter().map(|v| v * c).collect(),
        );
        let scaled = metrics::distance(kind, &cx, &cy);
        ok &= match kind {
            MetricKind::Euclidean | MetricKind::Manhattan | MetricKind::Chebyshev => {
                (scaled - c * dxy).abs() <= 1e-9 * (1.0 + c * dxy)
            }
            _ => (scaled - dxy).abs() <= 1e-12 * (1.0 + dxy),
        };
        if !ok {
            return check(
                false,
                format!("{kind} on {x:?} / {y:?}: d(x,y) {dxy}, d(y,x) {dyx}, d(x,x) {dxx}"),
            );
        }
    }
    check(true, format!("{METRIC_PAIRS} pairs: identity, symmetry, non-negativity, oracle equality, binarization, scaling"))
}

fn subtree_samples(nodes: &[TreeNode], at: usize) -> usize {
    match nodes[at] {
        TreeNode::Leaf { samples, .. } => samples,
        TreeNode::Split { left, right, .. } => {
            subtree_samples(nodes, left) + subtree_samples(nodes, right)
        }
    }
}

fn extra_trees_properties() -> Outcome {
    let mut r = rng::stream(2024, 4);
    for inst in 0..TREE_INSTANCES {
        let n = 2 + below(&mut r, 80);
        let dim = 1 + below(&mut r, 6);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| uniform(&mut r, -5.0, 5.0)).collect())
            .collect();
        let targets: Vec<Coord> = (0..n)
            .map(|_| Coord::new(uniform(&mut r, 51.1, 51.3), uniform(&mut r, 4.3, 4.5)))
            .collect();
        let seed = r.next_u64();

        // memorization: distinct inputs, no limits
        let free = ExtraTreesConfig {
            n_estimators: 1 + below(&mut r, 4),
            seed,
            ..ExtraTreesConfig::default()
        };
        let forest = match Forest::fit(&rows, &targets, &free) {
            Ok(f) => f,
            Err(e) => return check(false, format!("instance {inst}: {e}")),
        };
        if forest.predict_batch(&rows) != targets {
            return check(
                false,
                format!("instance {inst}: unlimited trees do not reproduce the training targets"),
            );
        }

        // determinism
        if Forest::fit(&rows, &targets, &free).ok().as_ref() != Some(&forest) {
            return check(false, format!("instance {inst}: refit differs"));
        }

        // limits
        let leaf = 1 + below(&mut r, 5);
        let limited = ExtraTreesConfig {
            n_estimators: 3,
            min_samples_split: leaf + below(&mut r, 8).max(1),
            min_samples_leaf: leaf,
            max_depth: Some(1 + below(&mut r, 6)),
            seed,
        };
        let forest = match Forest::fit(&rows, &targets, &limited) {
            Ok(f) => f,
            Err(e) => return check(false, format!("instance {inst}: {e}")),
        };
        for tree in &forest.trees {
            let splits_ok = tree.nodes.iter().enumerate().all(|(i, node)| match node {
                TreeNode::Split { .. } => {
                    subtree_samples(&tree.nodes, i) >= limited.min_samples_split
                }
                TreeNode::Leaf { .. } => true,
            });
            if tree.depth() > limited.max_depth.unwrap()
                // a lone root leaf may hold fewer rows than the leaf minimum
                || (tree.nodes.len() > 1 && tree.leaves().any(|(_, s)| s < limited.min_samples_leaf))
                || subtree_samples(&tree.nodes, 0) != n
                || !splits_ok
            {
                return check(false, format!("instance {inst}: tree violates {limited:?}"));
            }
        }
    }
    check(
        true,
        format!("{TREE_INSTANCES} instances: memorization, determinism, depth/leaf/split limits"),
    )
}

fn mlp_gradients() -> Outcome {
    let mut r = rng::stream(2024, 5);
    let mut worst: f64 = 0.0;
    for net in 0..GRADIENT_NETWORKS {
        let hidden = below(&mut r, 3);
        let mut widths: Vec<usize> = (0..hidden).map(|_| 2 + below(&mut r, 6)).collect();
        widths.push(2);
        let cfg = MlpConfig {
            layer_widths: widths,
            dropout_rate: 0.0,
            l2_lambda: if net % 2 == 0 { 0.0 } else { 0.01 },
            seed: net as u64,
            ..MlpConfig::default()
        };
        let model = match MlpModel::build(cfg) {
            Ok(m) => m,
            Err(e) => return check(false, e.to_string()),
        };
        let batch = 2 + below(&mut r, 6);
        let x: Vec<Vec<f64>> = (0..batch)
            .map(|_| {
                let mut v: Vec<f64> = (0..68)
                    .map(|_| {
                        if below(&mut r, 4) == 0 {
                            uniform(&mut r, 0.0, 1.0)
                        } else {
                            0.0
                        }
                    })
                    .collect();
                v.push((7 + below(&mut r, 6)) as f64);
                v
            })
            .collect();
        let y: Vec<Coord> = (0..batch)
            .map(|_| Coord::new(rng::normal(&mut r), rng::normal(&mut r)))
            .collect();
        worst = worst.max(model.gradient_check(&x, &y));
    }
    check(
        worst < GRADIENT_TOL,
        format!(
            "{GRADIENT_NETWORKS} networks, max relative error {worst:.2e} (< {GRADIENT_TOL:e})"
        ),
    )
}

fn mlp_overfit() -> Outcome {
    let mut r = rng::stream(2024, 6);
    let x: Vec<Vec<f64>> = (0..10)
        .map(|_| (0..69).map(|_| rng::normal(&mut r)).collect())
        .collect();
    let y: Vec<Coord> = (0..10)
        .map(|_| {
            Coord::new(
                51.2 + 0.02 * rng::normal(&mut r),
                4.4 + 0.03 * rng::normal(&mut r),
            )
        })
        .collect();
    let cfg = MlpConfig {
        layer_widths: vec![32, 32, 2],
        dropout_rate: 0.0,
        sf_feature: None,
        learning_rate: 1e-2,
        batch_size: 16,
        max_epochs: 1500,
        patience: 1500,
        seed: 1,
        ..MlpConfig::default()
    };
    match neural::train(cfg, &x, &y, &x, &y) {
        Ok((_, h)) => {
            let last = h.epochs.last().map_or(f64::NAN, |e| e.train);
            check(
                last < OVERFIT_LOSS,
                format!(
                    "standardized training loss {last:.2e} after {} epochs",
                    h.epochs.len()
                ),
            )
        }
        Err(e) => check(false, e.to_string()),
    }
}

/// Stop epoch and best epoch by direct scan: stop at the first epoch more
/// than `patience` epochs after the running best.
fn stopping_oracle(losses: &[f64], patience: usize) -> (Option<usize>, usize) {
    let mut best = 0;
    for (i, &l) in losses.iter().enumerate() {
        if l < losses[best] {
            best = i;
        }
        if i - best > patience {
            return (Some(i + 1), best + 1);
        }
    }
    (None, best + 1)
}

fn early_stopping_contract() -> Outcome {
    // worked sequence
    let mut s = EarlyStopping::new(1);
    let seq: Vec<StopDecision> = [5.0, 4.0, 6.0, 7.0].iter().map(|&l| s.observe(l)).collect();
    if seq.last() != Some(&StopDecision::Stop) || s.best_epoch() != 2 {
        return check(
            false,
            format!(
                "(5, 4, 6, 7) with patience 1 gave {seq:?}, best {}",
                s.best_epoch()
            ),
        );
    }
    let mut r = rng::stream(2024, 7);
    for case in 0..2000 {
        let len = 1 + below(&mut r, 60);
        let patience = 1 + below(&mut r, 8);
        let losses: Vec<f64> = (0..len).map(|_| (below(&mut r, 20) as f64) / 4.0).collect();
        let mut s = EarlyStopping::new(patience);
        let mut stop = None;
        for (i, &l) in losses.iter().enumerate() {
            if s.observe(l) == StopDecision::Stop {
                stop = Some(i + 1);
                break;
            }
        }
        if (stop, s.best_epoch()) != stopping_oracle(&losses, patience) {
            return check(
                false,
                format!("case {case}: {losses:?} patience {patience}"),
            );
        }
    }
    // restored weights reproduce the recorded best validation loss
    let x: Vec<Vec<f64>> = (0..60)
        .map(|_| (0..69).map(|_| rng::normal(&mut r)).collect())
        .collect();
    let y: Vec<Coord> = (0..60)
        .map(|_| Coord::new(rng::normal(&mut r), rng::normal(&mut r)))
        .collect();
    let cfg = MlpConfig {
        layer_widths: vec![16, 2],
        sf_feature: None,
        max_epochs: 40,
        patience: 3,
        ..MlpConfig::default()
    };
    match neural::train(cfg, &x[..40], &y[..40], &x[40..], &y[40..]) {
        Ok((m, h)) => {
            let best = h.best().map_or(f64::NAN, |e| e.val);
            let again = m.loss(&x[40..], &y[40..]);
            check(again == best, format!("2000 synthetic sequences match the scan oracle; restored epoch {} val loss {again} == {best}", h.best_epoch))
        }
        Err(e) => check(false, e.to_string()),
    }
}

fn meridian() -> Outcome {
    let d = haversine(Coord::new(0.0, 0.0), Coord::new(1.0, 0.0));
    check(
        (d - MERIDIAN_M).abs() <= MERIDIAN_TOL_M,
        format!("(0,0) -> (1,0) = {d:.4} m"),
    )
}

fn main() -> ExitCode {
    let mut tally = Tally::default();
    println!("acceptance suite");

    match std::env::var("LORAFP_DATASET") {
        Ok(path) => match load_antwerp(&path) {
            Ok((a, load_time)) => dataset_criteria(&mut tally, &a, load_time),
            Err(e) => {
                for id in ["1", "2", "3", "4", "5", "6"] {
                    tally.record(
                        id,
                        "dataset criterion",
                        check(false, format!("could not load {path}: {e}")),
                        Duration::ZERO,
                    );
                }
            }
        },
        Err(_) => {
            let why = "dataset unavailable (set LORAFP_DATASET to the Antwerp LoRaWAN CSV)";
            tally.not_run("1", "dataset record count and gateway histogram", why);
            tally.not_run("2", "kNN grid spot checks", why);
            tally.not_run("3", "alpha sweep", why);
            tally.not_run("4", "beta sweep", why);
            tally.not_run("5", "boolean metric family band", why);
            tally.not_run("6", "method ordering on the test split", why);
        }
    }

    let start = Instant::now();
    tally.run("7a", "kNN equals brute-force oracle", knn_oracle);
    tally.run(
        "7b",
        "representation order and range",
        representation_invariants,
    );
    tally.run("7c", "metric axioms", metric_axioms);
    tally.run("7d", "extra trees properties", extra_trees_properties);
    tally.run("7e", "MLP gradient check", mlp_gradients);
    tally.run("7f", "MLP 10-sample overfit", mlp_overfit);
    tally.run(
        "7g",
        "early stopping restore contract",
        early_stopping_contract,
    );
    tally.run("7h", "haversine meridian arc", meridian);
    let total = start.elapsed();
    tally.record(
        "7",
        "property suite runtime",
        check(
            total < PROPERTY_BUDGET,
            format!(
                "{:.1}s (budget {}s)",
                total.as_secs_f64(),
                PROPERTY_BUDGET.as_secs()
            ),
        ),
        total,
    );

    println!(
        "summary: {} passed, {} failed, {} not run",
        tally.passed, tally.failed, tally.not_run
    );
    if tally.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
