//! RSSI data representations.
//!
//! Raw readings are in dBm with [`SENTINEL_RSSI`] marking gateways that did
//! not hear a message. Each representation is fitted on the training set
//! (its minimum and maximum received RSSI) and then applied element-wise:
//!
//! - **positive**: `rssi - (min - 1)`, sentinels (and readings below the
//!   optional threshold `tau`) to 0, so receptions start at 1;
//! - **normalized**: positive divided by the largest positive value seen in
//!   training, so the training range lands in (0, 1];
//! - **exponential**: `exp(positive / alpha) / exp(-min / alpha)`;
//! - **powed**: `positive^beta / (-min)^beta`.
//!
//! Test readings below the training minimum are not clamped. They map below
//! the training range (positive may go to zero or negative), and powed uses a
//! sign-preserving power there so the mapping stays monotone.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{is_sentinel, Fingerprint, GATEWAY_COUNT, SENTINEL_RSSI};

pub const DEFAULT_ALPHA: f64 = 24.0;
pub const DEFAULT_BETA: f64 = std::f64::consts::E;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RepresentationKind {
    Positive,
    Normalized,
    Exponential,
    Powed,
}

impl RepresentationKind {
    pub const ALL: [RepresentationKind; 4] = [
        RepresentationKind::Positive,
        RepresentationKind::Normalized,
        RepresentationKind::Exponential,
        RepresentationKind::Powed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RepresentationKind::Positive => "positive",
            RepresentationKind::Normalized => "normalized",
            RepresentationKind::Exponential => "exponential",
            RepresentationKind::Powed => "powed",
        }
    }
}

impl fmt::Display for RepresentationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RepresentationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RepresentationKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown representation `{s}`")))
    }
}

/// Unfitted representation parameters, as they appear in experiment configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepresentationParams {
    pub kind: RepresentationKind,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub tau: Option<f64>,
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

fn default_beta() -> f64 {
    DEFAULT_BETA
}

impl RepresentationParams {
    pub fn new(kind: RepresentationKind) -> Self {
        RepresentationParams {
            kind,
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            tau: None,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_tau(mut self, tau: Option<f64>) -> Self {
        self.tau = tau;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        if let Some(tau) = self.tau {
            if !tau.is_finite() {
                return Err(Error::Config(format!("tau must be finite, got {tau}")));
            }
        }
        Ok(())
    }

    /// Fits on the received readings of `train`.
    pub fn fit(self, train: &[Fingerprint]) -> Result<RepresentationConfig> {
        self.fit_values(train.iter().flat_map(|fp| fp.rssi.iter().copied()))
    }

    /// Fits on raw dBm values; sentinels are ignored.
    pub fn fit_values(self, values: impl IntoIterator<Item = f64>) -> Result<RepresentationConfig> {
        self.validate()?;
        let (min, max) = values
            .into_iter()
            .filter(|v| !is_sentinel(*v))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        if !min.is_finite() {
            return Err(Error::Fit("training set has no received RSSI value".into()));
        }
        RepresentationConfig::from_range(self, min, max)
    }
}

/// A fitted representation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepresentationConfig {
    pub kind: RepresentationKind,
    pub alpha: f64,
    pub beta: f64,
    pub tau: Option<f64>,
    /// Smallest received RSSI in the training set (dBm).
    pub train_min: f64,
    /// Largest received RSSI in the training set (dBm).
    pub train_max: f64,
}

impl RepresentationConfig {
    pub fn from_range(
        params: RepresentationParams,
        train_min: f64,
        train_max: f64,
    ) -> Result<Self> {
        params.validate()?;
        if !(train_min < 0.0
            && train_min > SENTINEL_RSSI
            && train_max >= train_min
            && train_max < 0.0)
        {
            return Err(Error::Fit(format!(
                "training RSSI range [{train_min}, {train_max}] is not a valid dBm reception range"
            )));
        }
        Ok(RepresentationConfig {
            kind: params.kind,
            alpha: params.alpha,
            beta: params.beta,
            tau: params.tau,
            train_min,
            train_max,
        })
    }

    pub fn params(&self) -> RepresentationParams {
        RepresentationParams {
            kind: self.kind,
            alpha: self.alpha,
            beta: self.beta,
            tau: self.tau,
        }
    }

    pub fn positive(&self, rssi: f64) -> f64 {
        if is_sentinel(rssi) || self.tau.is_some_and(|tau| rssi < tau) {
            0.0
        } else {
            rssi - (self.train_min - 1.0)
        }
    }

    /// Largest positive value in the training set; the normalized divisor.
    pub fn positive_max(&self) -> f64 {
        self.train_max - (self.train_min - 1.0)
    }

    pub fn normalized(&self, rssi: f64) -> f64 {
        self.positive(rssi) / self.positive_max()
    }

    pub fn exponential(&self, rssi: f64) -> f64 {
        // exp(p/a) / exp(-min/a), folded into one exp so small alphas cannot overflow
        ((self.positive(rssi) + self.train_min) / self.alpha).exp()
    }

    pub fn powed(&self, rssi: f64) -> f64 {
        let p = self.positive(rssi);
        let base = p.abs().powf(self.beta) / (-self.train_min).powf(self.beta);
        if p < 0.0 {
            -base
        } else {
            base
        }
    }

    /// Output of the configured representation for one raw reading.
    pub fn apply(&self, rssi: f64) -> f64 {
        match self.kind {
            RepresentationKind::Positive => self.positive(rssi),
            RepresentationKind::Normalized => self.normalized(rssi),
            RepresentationKind::Exponential => self.exponential(rssi),
            RepresentationKind::Powed => self.powed(rssi),
        }
    }

    /// Value a sentinel maps to.
    pub fn sentinel_value(&self) -> f64 {
        self.apply(SENTINEL_RSSI)
    }

    pub fn transform_values(&self, rssi: &[f64]) -> Vec<f64> {
        rssi.iter().map(|&v| self.apply(v)).collect()
    }

    /// The 68-entry feature vector of a fingerprint.
    pub fn transform(&self, fp: &Fingerprint) -> [f64; GATEWAY_COUNT] {
        fp.rssi.map(|v| self.apply(v))
    }
}
