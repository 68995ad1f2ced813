//! System parameters shared by every stage of the pipeline.
//!
//! All powers are normalized to the receiver noise variance. The noise floor
//! is only used to convert normalized quantities to and from dBm.

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemParams {
    /// AP antenna count `M`.
    #[serde(rename = "M", alias = "antennas")]
    pub antennas: usize,
    /// IRS reflecting-element count `N`.
    #[serde(rename = "N", alias = "elements")]
    pub elements: usize,
    /// Receiver SNR target in dB.
    pub gamma1_db: f64,
    /// Energy harvesting efficiency in (0, 1].
    pub eta: f64,
    /// Per-element power consumption, noise-normalized.
    pub mu: f64,
    /// Uncertainty factor, applied to both the AP-IRS and the cascaded channel.
    pub beta: f64,
    /// Relative convergence threshold on `Tr(W)` between iterations.
    pub epsilon: f64,
    pub trials: usize,
    pub seed: u64,
    /// Noise floor used for dBm reporting.
    pub noise_floor_dbm: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            antennas: 2,
            elements: 20,
            gamma1_db: 30.0,
            eta: 0.8,
            mu: DEFAULT_MU,
            beta: 0.1,
            epsilon: 1e-5,
            trials: 10,
            seed: 2020,
            noise_floor_dbm: -90.0,
        }
    }
}

/// Default per-element consumption: -70 dBm (100 pW) against the -90 dBm
/// noise floor.
pub const DEFAULT_MU: f64 = 100.0;

impl SystemParams {
    pub fn gamma1(&self) -> f64 {
        db_to_linear(self.gamma1_db)
    }

    /// Total IRS consumption `N μ`.
    pub fn budget(&self) -> f64 {
        self.elements as f64 * self.mu
    }

    pub fn to_dbm(&self, normalized_power: f64) -> f64 {
        linear_to_db(normalized_power) + self.noise_floor_dbm
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.antennas == 0 {
            return Err(Error::param("M", "need at least one antenna"));
        }
        if self.elements == 0 {
            return Err(Error::param("N", "need at least one reflecting element"));
        }
        if !self.gamma1_db.is_finite() {
            return Err(Error::param("gamma1_db", "must be finite"));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::param("eta", format!("must lie in (0, 1], got {}", self.eta)));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::param("mu", format!("must be nonnegative, got {}", self.mu)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::param("beta", format!("must be nonnegative, got {}", self.beta)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::param("epsilon", "must be positive"));
        }
        if self.trials == 0 {
            return Err(Error::param("trials", "must be positive"));
        }
        if !self.noise_floor_dbm.is_finite() {
            return Err(Error::param("noise_floor_dbm", "must be finite"));
        }
        Ok(())
    }
}
