//! Multilayer perceptron position regressor.
//!
//! Hidden layers are `affine -> batch norm -> ReLU -> dropout`; the output
//! layer is a plain affine map to two standardized coordinates. The hidden
//! affine maps carry no bias because batch normalization's shift term
//! subsumes it. Training minimizes the mean squared error on coordinates
//! standardized with the training mean and standard deviation (plus an
//! optional L2 penalty on all weight matrices) with Adam over shuffled
//! mini-batches, and keeps the weights of the epoch with the lowest
//! validation loss.
//!
//! Dropout is inverted (survivors are scaled by `1 / (1 - rate)` during
//! training), so inference is a plain forward pass using the batch-norm
//! running statistics.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, Axis, Zip};
use rand_chacha::rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Coord;
use crate::ingest::GATEWAY_COUNT;
use crate::rng;

/// Width of the default input: 68 RSSI features plus the spreading factor.
pub const DEFAULT_INPUT_WIDTH: usize = GATEWAY_COUNT + 1;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPSILON: f64 = 1e-8;

/// Relative-error denominator floor in [`MlpModel::gradient_check`]. Central
/// differences of an O(1) loss carry about `1e-16 / step = 1e-11` of
/// round-off, so gradients below the floor are compared in absolute terms.
pub const GRADIENT_CHECK_FLOOR: f64 = 1e-5;
/// Parameter step of the central differences in [`MlpModel::gradient_check`].
pub const GRADIENT_CHECK_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpConfig {
    pub input_width: usize,
    /// Widths of every layer after the input, the last being the 2 outputs.
    pub layer_widths: Vec<usize>,
    pub dropout_rate: f64,
    pub l2_lambda: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Training stops once this many epochs pass without a new best
    /// validation loss *after* the epoch that would be the last allowed one.
    pub patience: usize,
    pub seed: u64,
    /// Input column holding the raw spreading factor, mapped to `(sf - 7) / 5`.
    pub sf_feature: Option<usize>,
    pub bn_momentum: f64,
    pub bn_epsilon: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            input_width: DEFAULT_INPUT_WIDTH,
            layer_widths: vec![1024, 1024, 1024, 256, 128, 128, 2],
            dropout_rate: 0.15,
            l2_lambda: 0.0,
            learning_rate: 1e-3,
            batch_size: 256,
            max_epochs: 2000,
            patience: 50,
            seed: 0,
            sf_feature: Some(GATEWAY_COUNT),
            bn_momentum: 0.99,
            bn_epsilon: 1e-8,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.input_width == 0 {
            return bad("input_width must be positive".into());
        }
        if self.layer_widths.last() != Some(&2) || self.layer_widths.contains(&0) {
            return bad(format!(
                "layer_widths must be positive and end in 2 outputs, got {:?}",
                self.layer_widths
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate {} outside [0, 1)", self.dropout_rate));
        }
        if !self.l2_lambda.is_finite() || self.l2_lambda < 0.0 {
            return bad(format!("l2_lambda {} must be non-negative", self.l2_lambda));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return bad("learning_rate must be positive".into());
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return bad("batch_size, max_epochs and patience must be positive".into());
        }
        if self.sf_feature.is_some_and(|i| i >= self.input_width) {
            return bad("sf_feature index outside the input".into());
        }
        if !(0.0..1.0).contains(&self.bn_momentum)
            || !self.bn_epsilon.is_finite()
            || self.bn_epsilon <= 0.0
        {
            return bad("bn_momentum must be in [0, 1) and bn_epsilon positive".into());
        }
        Ok(())
    }
}

/// Trainable tensors. Also used for gradients and Adam moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Params {
    /// `in x out`, one per layer.
    weights: Vec<Array2<f64>>,
    /// Batch-norm scale per hidden layer.
    gammas: Vec<Array1<f64>>,
    /// Batch-norm shift per hidden layer.
    shifts: Vec<Array1<f64>>,
    out_bias: Array1<f64>,
}

impl Params {
    fn zeros_like(other: &Params) -> Params {
        Params {
            weights: other
                .weights
                .iter()
                .map(|w| Array2::zeros(w.raw_dim()))
                .collect(),
            gammas: other
                .gammas
                .iter()
                .map(|g| Array1::zeros(g.len()))
                .collect(),
            shifts: other
                .shifts
                .iter()
                .map(|g| Array1::zeros(g.len()))
                .collect(),
            out_bias: Array1::zeros(other.out_bias.len()),
        }
    }

    fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        out.extend(
            self.weights
                .iter()
                .map(|w| w.as_slice().expect("standard layout")),
        );
        out.extend(
            self.gammas
                .iter()
                .map(|g| g.as_slice().expect("standard layout")),
        );
        out.extend(
            self.shifts
                .iter()
                .map(|g| g.as_slice().expect("standard layout")),
        );
        out.push(self.out_bias.as_slice().expect("standard layout"));
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        out.extend(
            self.weights
                .iter_mut()
                .map(|w| w.as_slice_mut().expect("standard layout")),
        );
        out.extend(
            self.gammas
                .iter_mut()
                .map(|g| g.as_slice_mut().expect("standard layout")),
        );
        out.extend(
            self.shifts
                .iter_mut()
                .map(|g| g.as_slice_mut().expect("standard layout")),
        );
        out.push(self.out_bias.as_slice_mut().expect("standard layout"));
        out
    }

    fn l2(&self) -> f64 {
        self.weights
            .iter()
            .map(|w| w.iter().map(|v| v * v).sum::<f64>())
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    /// Batch statistics and dropout.
    Train,
    /// Running statistics and dropout.
    #[cfg_attr(not(test), allow(dead_code))]
    TrainFrozenStats,
    /// Running statistics, no dropout.
    Inference,
}

struct HiddenCache {
    input: Array2<f64>,
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
    pre_relu: Array2<f64>,
    mask: Option<Array2<f64>>,
    batch_mean: Array1<f64>,
    batch_var: Array1<f64>,
}

struct ForwardPass {
    hidden: Vec<HiddenCache>,
    last_hidden: Array2<f64>,
    output: Array2<f64>,
}

/// Per-epoch losses in standardized units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train: f64,
    pub val: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochLoss>,
    /// 1-based epoch whose weights were kept.
    pub best_epoch: usize,
}

impl TrainingHistory {
    pub fn best(&self) -> Option<&EpochLoss> {
        self.epochs.iter().find(|e| e.epoch == self.best_epoch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Wait,
    Stop,
}

/// Patience bookkeeping over a stream of validation losses.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    epoch: usize,
    best_epoch: usize,
    best: f64,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            epoch: 0,
            best_epoch: 0,
            best: f64::INFINITY,
        }
    }

    /// Records the next epoch's loss. Training should stop once more than
    /// `patience` epochs have passed since the best one.
    pub fn observe(&mut self, loss: f64) -> StopDecision {
        self.epoch += 1;
        if loss < self.best {
            self.best = loss;
            self.best_epoch = self.epoch;
            StopDecision::Improved
        } else if self.epoch - self.best_epoch > self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Wait
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }
}

struct Adam {
    m: Params,
    v: Params,
    t: i32,
    lr: f64,
}

impl Adam {
    fn new(like: &Params, lr: f64) -> Self {
        Adam {
            m: Params::zeros_like(like),
            v: Params::zeros_like(like),
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut Params, grads: &Params) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        let lr = self.lr;
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut())
        {
            for i in 0..p.len() {
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                p[i] -= lr * mhat / (vhat.sqrt() + ADAM_EPSILON);
            }
        }
    }
}

/// A (possibly untrained) network plus its input and target scalers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    cfg: MlpConfig,
    params: Params,
    running_mean: Vec<Array1<f64>>,
    running_var: Vec<Array1<f64>>,
    input_shift: Array1<f64>,
    input_scale: Array1<f64>,
    target_mean: [f64; 2],
    target_std: [f64; 2],
}

fn to_matrix<R: AsRef<[f64]>>(rows: &[R], width: usize) -> Array2<f64> {
    let mut m = Array2::zeros((rows.len(), width));
    for (mut dst, src) in m.rows_mut().into_iter().zip(rows) {
        let src = src.as_ref();
        assert_eq!(
            src.len(),
            width,
            "row has {} features, network expects {width}",
            src.len()
        );
        dst.assign(&ndarray::ArrayView1::from(src));
    }
    m
}

impl MlpModel {
    /// Fresh network: He-uniform weights (`U(-sqrt(6/fan_in), sqrt(6/fan_in))`)
    /// drawn from `cfg.seed`, unit batch-norm scale, zero shifts and biases,
    /// identity target scaling.
    pub fn build(cfg: MlpConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = rng::stream(cfg.seed, 0);
        let mut fan_in = cfg.input_width;
        let mut weights = Vec::with_capacity(cfg.layer_widths.len());
        for &width in &cfg.layer_widths {
            let bound = (6.0 / fan_in as f64).sqrt();
            let w = Array2::from_shape_simple_fn((fan_in, width), || {
                (2.0 * rng::unit(&mut rng) - 1.0) * bound
            });
            weights.push(w);
            fan_in = width;
        }
        let hidden: Vec<usize> = cfg.layer_widths[..cfg.layer_widths.len() - 1].to_vec();
        let mut input_shift = Array1::zeros(cfg.input_width);
        let mut input_scale = Array1::ones(cfg.input_width);
        if let Some(i) = cfg.sf_feature {
            input_shift[i] = 7.0;
            input_scale[i] = 5.0;
        }
        Ok(MlpModel {
            params: Params {
                weights,
                gammas: hidden.iter().map(|&w| Array1::ones(w)).collect(),
                shifts: hidden.iter().map(|&w| Array1::zeros(w)).collect(),
                out_bias: Array1::zeros(2),
            },
            running_mean: hidden.iter().map(|&w| Array1::zeros(w)).collect(),
            running_var: hidden.iter().map(|&w| Array1::ones(w)).collect(),
            input_shift,
            input_scale,
            target_mean: [0.0; 2],
            target_std: [1.0; 2],
            cfg,
        })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.cfg
    }

    /// `(in, out)` shape of every weight matrix.
    pub fn weight_shapes(&self) -> Vec<(usize, usize)> {
        self.params.weights.iter().map(|w| w.dim()).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.params.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn running_var(&self) -> &[Array1<f64>] {
        &self.running_var
    }

    fn scale_inputs<R: AsRef<[f64]>>(&self, rows: &[R]) -> Array2<f64> {
        let mut x = to_matrix(rows, self.cfg.input_width);
        Zip::from(x.rows_mut()).for_each(|mut row| {
            Zip::from(&mut row)
                .and(&self.input_shift)
                .and(&self.input_scale)
                .for_each(|v, &s, &k| *v = (*v - s) / k);
        });
        x
    }

    fn standardize(&self, targets: &[Coord]) -> Array2<f64> {
        Array2::from_shape_fn((targets.len(), 2), |(i, d)| {
            let v = if d == 0 {
                targets[i].lat
            } else {
                targets[i].lon
            };
            (v - self.target_mean[d]) / self.target_std[d]
        })
    }

    fn forward(
        &self,
        x: &Array2<f64>,
        mode: Mode,
        dropout: Option<(&mut dyn RngCore, f64)>,
    ) -> ForwardPass {
        let n_hidden = self.params.gammas.len();
        let mut a = x.clone();
        let mut caches = Vec::with_capacity(n_hidden);
        let mut dropout = dropout;
        let eps = self.cfg.bn_epsilon;
        for l in 0..n_hidden {
            let z = a.dot(&self.params.weights[l]);
            let (mean, var) = match mode {
                Mode::Train => {
                    let mean = z.mean_axis(Axis(0)).expect("non-empty batch");
                    let centered = &z - &mean;
                    let var = (&centered * &centered)
                        .mean_axis(Axis(0))
                        .expect("non-empty batch");
                    (mean, var)
                }
                Mode::TrainFrozenStats | Mode::Inference => {
                    (self.running_mean[l].clone(), self.running_var[l].clone())
                }
            };
            let inv_std = var.mapv(|v| 1.0 / (v + eps).sqrt());
            let xhat = (&z - &mean) * &inv_std;
            let pre_relu = &xhat * &self.params.gammas[l] + &self.params.shifts[l];
            let mut h = pre_relu.mapv(|v| v.max(0.0));
            let mut mask = None;
            if mode != Mode::Inference {
                if let Some((rng, rate)) = dropout.as_mut() {
                    if *rate > 0.0 {
                        let keep = 1.0 / (1.0 - *rate);
                        let m = Array2::from_shape_simple_fn(h.raw_dim(), || {
                            if rng::unit(*rng) < *rate {
                                0.0
                            } else {
                                keep
                            }
                        });
                        h *= &m;
                        mask = Some(m);
                    }
                }
            }
            caches.push(HiddenCache {
                input: std::mem::replace(&mut a, h),
                xhat,
                inv_std,
                pre_relu,
                mask,
                batch_mean: mean,
                batch_var: var,
            });
        }
        let output = a.dot(&self.params.weights[n_hidden]) + &self.params.out_bias;
        ForwardPass {
            hidden: caches,
            last_hidden: a,
            output,
        }
    }

    /// Data MSE (over samples and both outputs) plus the L2 penalty.
    fn loss_of(&self, output: &Array2<f64>, target: &Array2<f64>) -> f64 {
        let diff = output - target;
        diff.mapv(|v| v * v).mean().expect("non-empty") + self.cfg.l2_lambda * self.params.l2()
    }

    fn backward(&self, pass: &ForwardPass, target: &Array2<f64>) -> Params {
        let n_hidden = self.params.gammas.len();
        let batch = target.nrows() as f64;
        let lambda = self.cfg.l2_lambda;
        let mut grads = Params::zeros_like(&self.params);

        // d(mean of squares over batch x 2) / d output
        let mut delta = (&pass.output - target) * (2.0 / (batch * 2.0));
        grads.out_bias = delta.sum_axis(Axis(0));
        grads.weights[n_hidden] =
            pass.last_hidden.t().dot(&delta) + &self.params.weights[n_hidden] * (2.0 * lambda);
        let mut upstream = delta.dot(&self.params.weights[n_hidden].t());

        for l in (0..n_hidden).rev() {
            let c = &pass.hidden[l];
            if let Some(m) = &c.mask {
                upstream *= m;
            }
            Zip::from(&mut upstream).and(&c.pre_relu).for_each(|g, &y| {
                if y <= 0.0 {
                    *g = 0.0;
                }
            });
            let dy = upstream;
            grads.gammas[l] = (&dy * &c.xhat).sum_axis(Axis(0));
            grads.shifts[l] = dy.sum_axis(Axis(0));
            let dxhat = &dy * &self.params.gammas[l];
            let sum_dxhat = dxhat.sum_axis(Axis(0));
            let sum_dxhat_xhat = (&dxhat * &c.xhat).sum_axis(Axis(0));
            // batch-norm backward through the batch mean and variance
            delta =
                (&dxhat * batch - &sum_dxhat - &c.xhat * &sum_dxhat_xhat) * &(&c.inv_std / batch);
            grads.weights[l] = c.input.t().dot(&delta) + &self.params.weights[l] * (2.0 * lambda);
            upstream = delta.dot(&self.params.weights[l].t());
        }
        grads
    }

    fn update_running_stats(&mut self, pass: &ForwardPass) {
        let m = self.cfg.bn_momentum;
        for (l, c) in pass.hidden.iter().enumerate() {
            self.running_mean[l] = &self.running_mean[l] * m + &c.batch_mean * (1.0 - m);
            self.running_var[l] = &self.running_var[l] * m + &c.batch_var * (1.0 - m);
        }
    }

    /// Inference-mode loss in standardized units on a labelled set.
    pub fn loss<R: AsRef<[f64]>>(&self, features: &[R], targets: &[Coord]) -> f64 {
        assert_eq!(
            features.len(),
            targets.len(),
            "features and targets differ in length"
        );
        let x = self.scale_inputs(features);
        let y = self.standardize(targets);
        let out = self.forward(&x, Mode::Inference, None).output;
        self.loss_of(&out, &y)
    }

    pub fn predict_batch<R: AsRef<[f64]>>(&self, features: &[R]) -> Vec<Coord> {
        if features.is_empty() {
            return Vec::new();
        }
        let x = self.scale_inputs(features);
        let out = self.forward(&x, Mode::Inference, None).output;
        out.rows()
            .into_iter()
            .map(|r| {
                Coord::new(
                    r[0] * self.target_std[0] + self.target_mean[0],
                    r[1] * self.target_std[1] + self.target_mean[1],
                )
            })
            .collect()
    }

    /// Panics if `features` does not match the input width.
    pub fn predict(&self, features: &[f64]) -> Coord {
        self.predict_batch(&[features])[0]
    }

    fn fit_target_scaler(&mut self, targets: &[Coord]) {
        let n = targets.len() as f64;
        for d in 0..2 {
            let vals = targets.iter().map(|c| if d == 0 { c.lat } else { c.lon });
            let mean = vals.clone().sum::<f64>() / n;
            let std = (vals.map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            self.target_mean[d] = mean;
            self.target_std[d] = if std > 0.0 { std } else { 1.0 };
        }
    }

    /// Trains from the current weights. Returns the model as it was after the
    /// epoch with the lowest validation loss, and the loss history.
    pub fn train<R: AsRef<[f64]>>(
        mut self,
        train_x: &[R],
        train_y: &[Coord],
        val_x: &[R],
        val_y: &[Coord],
    ) -> Result<(MlpModel, TrainingHistory)> {
        if train_x.is_empty() || val_x.is_empty() {
            return Err(Error::Fit(
                "MLP training needs non-empty training and validation sets".into(),
            ));
        }
        if train_x.len() != train_y.len() || val_x.len() != val_y.len() {
            return Err(Error::Fit("feature and target counts differ".into()));
        }
        self.fit_target_scaler(train_y);
        let x = self.scale_inputs(train_x);
        let y = self.standardize(train_y);
        let vx = self.scale_inputs(val_x);
        let vy = self.standardize(val_y);

        let cfg = self.cfg.clone();
        let mut shuffle_rng = rng::stream(cfg.seed, 2);
        let mut dropout_rng = rng::stream(cfg.seed, 1);
        let mut adam = Adam::new(&self.params, cfg.learning_rate);
        let mut stopper = EarlyStopping::new(cfg.patience);
        let mut history = TrainingHistory::default();
        let mut best = self.clone();
        let n = x.nrows();

        for epoch in 1..=cfg.max_epochs {
            let order = rng::permutation(&mut shuffle_rng, n);
            let mut loss_sum = 0.0;
            for chunk in order.chunks(cfg.batch_size) {
                let bx = x.select(Axis(0), chunk);
                let by = y.select(Axis(0), chunk);
                let pass =
                    self.forward(&bx, Mode::Train, Some((&mut dropout_rng, cfg.dropout_rate)));
                let loss = self.loss_of(&pass.output, &by);
                if !loss.is_finite() {
                    return Err(Error::Training {
                        epoch,
                        message: format!("training loss became {loss}"),
                    });
                }
                loss_sum += loss * chunk.len() as f64;
                let grads = self.backward(&pass, &by);
                self.update_running_stats(&pass);
                adam.step(&mut self.params, &grads);
            }
            let train_loss = loss_sum / n as f64;
            let val_out = self.forward(&vx, Mode::Inference, None).output;
            let val_loss = self.loss_of(&val_out, &vy);
            if !val_loss.is_finite() {
                return Err(Error::Training {
                    epoch,
                    message: format!("validation loss became {val_loss}"),
                });
            }
            history.epochs.push(EpochLoss {
                epoch,
                train: train_loss,
                val: val_loss,
            });
            if epoch % 10 == 0 || epoch == 1 {
                log::info!("epoch {epoch}: train {train_loss:.5} val {val_loss:.5}");
            }
            match stopper.observe(val_loss) {
                StopDecision::Improved => best = self.clone(),
                StopDecision::Wait => {}
                StopDecision::Stop => {
                    log::info!("early stop at epoch {epoch}, best {}", stopper.best_epoch());
                    break;
                }
            }
        }
        history.best_epoch = stopper.best_epoch();
        Ok((best, history))
    }

    /// Largest relative difference between backpropagated gradients and
    /// central finite differences over every trainable parameter, for one
    /// batch in training mode (batch statistics, dropout off).
    ///
    /// The relative difference of an analytic `a` and numeric `n` gradient is
    /// `|a - n| / max(|a|, |n|, GRADIENT_CHECK_FLOOR)`.
    pub fn gradient_check<R: AsRef<[f64]>>(&self, features: &[R], targets: &[Coord]) -> f64 {
        let x = self.scale_inputs(features);
        let y = self.standardize(targets);
        let analytic = self.backward(&self.forward(&x, Mode::Train, None), &y);

        let mut probe = self.clone();
        let mut worst: f64 = 0.0;
        let n_tensors = analytic.tensors().len();
        for t in 0..n_tensors {
            let len = analytic.tensors()[t].len();
            for i in 0..len {
                let orig = probe.params.tensors()[t][i];
                probe.params.tensors_mut()[t][i] = orig + GRADIENT_CHECK_STEP;
                let plus = probe.loss_of(&probe.forward(&x, Mode::Train, None).output, &y);
                probe.params.tensors_mut()[t][i] = orig - GRADIENT_CHECK_STEP;
                let minus = probe.loss_of(&probe.forward(&x, Mode::Train, None).output, &y);
                probe.params.tensors_mut()[t][i] = orig;

                let numeric = (plus - minus) / (2.0 * GRADIENT_CHECK_STEP);
                let a = analytic.tensors()[t][i];
                let rel =
                    (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRADIENT_CHECK_FLOOR);
                worst = worst.max(rel);
            }
        }
        worst
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: MlpModel =
            serde_json::from_str(text).map_err(|e| Error::format("<model json>", e.to_string()))?;
        model.cfg.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str::<MlpModel>(&text)
            .map_err(|e| Error::format(path, e.to_string()))
            .and_then(|m| m.cfg.validate().map(|_| m))
    }
}

/// Builds a model from `cfg` and trains it.
pub fn train<R: AsRef<[f64]>>(
    cfg: MlpConfig,
    train_x: &[R],
    train_y: &[Coord],
    val_x: &[R],
    val_y: &[Coord],
) -> Result<(MlpModel, TrainingHistory)> {
    MlpModel::build(cfg)?.train(train_x, train_y, val_x, val_y)
}
