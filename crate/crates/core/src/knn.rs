//! k-nearest-neighbour position regression.
//!
//! The search is an exact linear scan. Training rows are kept both densely
//! and as [`SparseRow`]s against the matrix's most common value, so on
//! fingerprint data (a few received gateways out of 68) each distance costs a
//! merge of two short lists. Neighbours are ordered by distance, then by
//! training index, and the estimate is the plain mean of their coordinates.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use crate::error::{Error, Result};
use crate::eval::Coord;
use crate::metrics::{sparse_distance, MetricKind, SparseRow};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

impl Neighbor {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.index.cmp(&other.index))
    }
}

// heap order: largest (distance, index) on top
struct HeapEntry(Neighbor);

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.0.key_cmp(&other.0) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.key_cmp(&other.0)
    }
}

/// A fitted (memorized) kNN regressor.
#[derive(Debug, Clone)]
pub struct KnnModel {
    dim: usize,
    features: Vec<f64>,
    rows: Vec<SparseRow>,
    background: f64,
    coords: Vec<Coord>,
    metric: MetricKind,
    k: usize,
}

/// Most frequent value (by bit pattern) over the first rows of a matrix.
fn dominant_value(features: &[f64]) -> f64 {
    let mut counts: HashMap<u64, usize> = HashMap::new();
    for v in features.iter().take(1 << 16) {
        *counts.entry(v.to_bits()).or_insert(0) += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map_or(0.0, |(bits, _)| f64::from_bits(bits))
}

impl KnnModel {
    /// Stores the training set. `features` rows must all have the same length.
    pub fn fit<R: AsRef<[f64]>>(
        features: &[R],
        coords: &[Coord],
        metric: MetricKind,
        k: usize,
    ) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Config("kNN needs at least one training row".into()));
        }
        if features.len() != coords.len() {
            return Err(Error::Config(format!(
                "{} feature rows but {} coordinates",
                features.len(),
                coords.len()
            )));
        }
        if k == 0 || k > features.len() {
            return Err(Error::Config(format!(
                "k = {k} must be between 1 and the number of training rows ({})",
                features.len()
            )));
        }
        let dim = features[0].as_ref().len();
        if dim == 0 || features.iter().any(|r| r.as_ref().len() != dim) {
            return Err(Error::Config(
                "feature rows must share one non-zero length".into(),
            ));
        }
        let flat: Vec<f64> = features
            .iter()
            .flat_map(|r| r.as_ref().iter().copied())
            .collect();
        let background = dominant_value(&flat);
        let rows = flat
            .chunks(dim)
            .map(|r| SparseRow::from_dense(r, background))
            .collect();
        Ok(KnnModel {
            dim,
            features: flat,
            rows,
            background,
            coords: coords.to_vec(),
            metric,
            k,
        })
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn metric(&self) -> MetricKind {
        self.metric
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[Coord] {
        &self.coords
    }

    /// Same training data, different `k`.
    pub fn with_k(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.len() {
            return Err(Error::Config(format!(
                "k = {k} out of range 1..={}",
                self.len()
            )));
        }
        Ok(KnnModel { k, ..self.clone() })
    }

    /// The `k_max` nearest training rows, closest first, lower index first on ties.
    ///
    /// Panics if the query length differs from the training dimension or
    /// `k_max` exceeds the training size.
    pub fn predict_topk(&self, query: &[f64], k_max: usize) -> Vec<Neighbor> {
        assert_eq!(
            query.len(),
            self.dim,
            "query has {} features, model expects {}",
            query.len(),
            self.dim
        );
        assert!(
            k_max <= self.len(),
            "k_max = {k_max} exceeds {} training rows",
            self.len()
        );
        if k_max == 0 {
            return Vec::new();
        }
        let q = SparseRow::from_dense(query, self.background);
        let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::with_capacity(k_max + 1);
        for (index, row) in self.rows.iter().enumerate() {
            let cand = Neighbor {
                index,
                distance: sparse_distance(self.metric, &q, row, self.background, self.dim),
            };
            if heap.len() < k_max {
                heap.push(HeapEntry(cand));
            } else if cand.key_cmp(&heap.peek().expect("non-empty").0) == Ordering::Less {
                heap.pop();
                heap.push(HeapEntry(cand));
            }
        }
        heap.into_sorted_vec().into_iter().map(|e| e.0).collect()
    }

    /// Mean coordinate of the first `k` neighbours in a [`predict_topk`](Self::predict_topk) list.
    pub fn mean_of(&self, neighbors: &[Neighbor], k: usize) -> Coord {
        assert!(k >= 1 && k <= neighbors.len(), "need at least k neighbours");
        let (lat, lon) = neighbors[..k].iter().fold((0.0, 0.0), |(lat, lon), n| {
            let c = self.coords[n.index];
            (lat + c.lat, lon + c.lon)
        });
        Coord::new(lat / k as f64, lon / k as f64)
    }

    pub fn predict(&self, query: &[f64]) -> Coord {
        self.mean_of(&self.predict_topk(query, self.k), self.k)
    }

    /// [`predict`](Self::predict) over many queries, in parallel when enabled.
    pub fn predict_batch<R: AsRef<[f64]> + Sync>(&self, queries: &[R]) -> Vec<Coord> {
        crate::par_map(queries, |q| self.predict(q.as_ref()))
    }

    pub fn predict_topk_batch<R: AsRef<[f64]> + Sync>(
        &self,
        queries: &[R],
        k_max: usize,
    ) -> Vec<Vec<Neighbor>> {
        crate::par_map(queries, |q| self.predict_topk(q.as_ref(), k_max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::distance;

    fn coords(n: usize) -> Vec<Coord> {
        (0..n)
            .map(|i| Coord::new(51.0 + i as f64 * 0.01, 4.0 + i as f64 * 0.02))
            .collect()
    }

    #[test]
    fn fit_bounds_on_k() {
        let x = vec![vec![1.0, 2.0]; 5];
        assert!(KnnModel::fit(&x, &coords(5), MetricKind::Euclidean, 5).is_ok());
        assert!(matches!(
            KnnModel::fit(&x, &coords(5), MetricKind::Euclidean, 6),
            Err(Error::Config(_))
        ));
        assert!(KnnModel::fit(&x, &coords(5), MetricKind::Euclidean, 0).is_err());
        assert!(KnnModel::fit(&x, &coords(4), MetricKind::Euclidean, 1).is_err());
    }

    #[test]
    fn exact_match_singleton() {
        let x = vec![
            vec![0.0, 3.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 0.0, 7.0],
        ];
        let c = coords(3);
        let m = KnnModel::fit(&x, &c, MetricKind::Braycurtis, 1).unwrap();
        assert_eq!(m.predict(&[1.0, 0.0, 0.0]), c[1]);
    }

    #[test]
    fn midpoint_of_two() {
        let x = vec![vec![0.0, 1.0], vec![0.0, 1.1], vec![9.0, 9.0]];
        let c = vec![
            Coord::new(51.20, 4.40),
            Coord::new(51.22, 4.42),
            Coord::new(50.0, 3.0),
        ];
        let m = KnnModel::fit(&x, &c, MetricKind::Manhattan, 2).unwrap();
        let p = m.predict(&[0.0, 1.05]);
        assert!((p.lat - 51.21).abs() < 1e-12 && (p.lon - 4.41).abs() < 1e-12);
    }

    #[test]
    fn ties_prefer_lower_index() {
        let x = vec![vec![1.0], vec![1.0], vec![1.0]];
        let m = KnnModel::fit(&x, &coords(3), MetricKind::Euclidean, 1).unwrap();
        let nn = m.predict_topk(&[1.0], 3);
        assert_eq!(
            nn.iter().map(|n| n.index).collect::<Vec<_>>(),
            vec![0, 1, 2]
        );
    }

    #[test]
    fn full_topk_is_sorted_permutation() {
        let x: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i * 7 % 11) as f64, 0.0, (i % 3) as f64])
            .collect();
        let m = KnnModel::fit(&x, &coords(30), MetricKind::Canberra, 3).unwrap();
        let nn = m.predict_topk(&[2.0, 0.0, 1.0], 30);
        let mut idx: Vec<usize> = nn.iter().map(|n| n.index).collect();
        assert!(nn.windows(2).all(|w| w[0].key_cmp(&w[1]) == Ordering::Less));
        idx.sort_unstable();
        assert_eq!(idx, (0..30).collect::<Vec<_>>());
        for n in &nn {
            assert_eq!(
                n.distance,
                distance(MetricKind::Canberra, &[2.0, 0.0, 1.0], &x[n.index])
            );
        }
    }

    #[test]
    fn topk_prefix_property() {
        let x: Vec<Vec<f64>> = (0..50)
            .map(|i| vec![(i % 5) as f64, ((i * 3) % 7) as f64])
            .collect();
        let m = KnnModel::fit(&x, &coords(50), MetricKind::Euclidean, 1).unwrap();
        let q = [2.0, 3.0];
        let long = m.predict_topk(&q, 20);
        for k in 1..=20 {
            assert_eq!(&long[..k], &m.predict_topk(&q, k)[..]);
        }
    }

    #[test]
    #[should_panic(expected = "model expects")]
    fn dimension_mismatch_panics() {
        let m = KnnModel::fit(&[vec![1.0, 2.0]], &coords(1), MetricKind::Euclidean, 1).unwrap();
        m.predict(&[1.0]);
    }
}
