//! Output-length prediction and the misprediction monitor.
//!
//! The real system fronts the scheduler with a learned length predictor; here
//! the predictor is a pluggable stand-in so prediction quality becomes an
//! experimental knob. All randomness is seeded per request, so runs replay
//! bit-identically.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Request, RequestId};

/// Strategy for filling in `predicted_output_len`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum Predictor {
    /// Returns the trace's true output length.
    #[default]
    Oracle,
    /// Rounds the true length up to the next bucket boundary.
    Bucketed { bucket_width: u64 },
    /// Bucketed, then displaced by one bucket with probability `error_rate`.
    Noisy { error_rate: f64, bucket_width: u64 },
    /// Ignores the request and predicts a fixed length.
    Constant { value: u64 },
}

impl Predictor {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Predictor::Oracle => Ok(()),
            Predictor::Bucketed { bucket_width } => {
                if bucket_width == 0 {
                    Err(Error::Config("bucket_width must be >= 1".into()))
                } else {
                    Ok(())
                }
            }
            Predictor::Noisy { error_rate, bucket_width } => {
                if bucket_width == 0 {
                    return Err(Error::Config("bucket_width must be >= 1".into()));
                }
                if !(0.0..=1.0).contains(&error_rate) {
                    return Err(Error::Config(format!(
                        "error_rate {error_rate} outside [0, 1]"
                    )));
                }
                Ok(())
            }
            Predictor::Constant { value } => {
                if value == 0 {
                    Err(Error::Config("constant prediction must be >= 1".into()))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Tuning for the misprediction monitor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonitorConfig {
    /// Multiplier applied to the inflation factor on each under-prediction.
    pub gamma: f64,
    /// Upper bound on the inflation factor.
    pub cap: f64,
    pub enabled: bool,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig { gamma: 1.1, cap: 2.0, enabled: true }
    }
}

impl MonitorConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.gamma.is_finite() || self.gamma < 1.0 {
            return Err(Error::Config(format!("monitor gamma must be >= 1, got {}", self.gamma)));
        }
        if !self.cap.is_finite() || self.cap < 1.0 {
            return Err(Error::Config(format!("monitor cap must be >= 1, got {}", self.cap)));
        }
        Ok(())
    }
}

/// Running record of observed under-predictions and the resulting global
/// inflation applied to later predictions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorState {
    corrections: u64,
    inflation_factor: f64,
}

impl Default for MonitorState {
    fn default() -> Self {
        MonitorState::new()
    }
}

impl MonitorState {
    pub fn new() -> Self {
        MonitorState { corrections: 0, inflation_factor: 1.0 }
    }

    pub fn corrections(&self) -> u64 {
        self.corrections
    }

    pub fn inflation_factor(&self) -> f64 {
        self.inflation_factor
    }
}

/// Rounds `len` up to its bucket ceiling (`bucket_width` must be >= 1).
pub fn bucket_ceiling(len: u64, bucket_width: u64) -> u64 {
    bucket_index(len, bucket_width) * bucket_width
}

/// 1-based bucket number that `len` falls in.
pub fn bucket_index(len: u64, bucket_width: u64) -> u64 {
    len.div_ceil(bucket_width).max(1)
}

/// Derives a per-request seed from the run seed, so profiling one request is
/// independent of trace order.
pub fn request_seed(run_seed: u64, id: RequestId) -> u64 {
    splitmix64(run_seed ^ splitmix64(id))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Tags a request with a predicted output length.
///
/// The raw prediction is scaled by the monitor's inflation factor and rounded
/// up; the result is always at least one token. Total over valid requests.
pub fn profile(
    request: &Request,
    predictor: &Predictor,
    monitor: &MonitorState,
    rng_seed: u64,
) -> Request {
    let base = match *predictor {
        Predictor::Oracle => request.true_output_len(),
        Predictor::Bucketed { bucket_width } => {
            bucket_ceiling(request.true_output_len(), bucket_width)
        }
        Predictor::Constant { value } => value.max(1),
        Predictor::Noisy { error_rate, bucket_width } => {
            let bucketed = bucket_ceiling(request.true_output_len(), bucket_width);
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            if rng.gen::<f64>() < error_rate {
                // Displace one bucket; the lowest bucket can only move up.
                let up = bucketed <= bucket_width || rng.gen::<bool>();
                if up {
                    bucketed + bucket_width
                } else {
                    bucketed - bucket_width
                }
            } else {
                bucketed
            }
        }
    };
    let inflated = (base as f64 * monitor.inflation_factor()).ceil().max(1.0) as u64;
    request
        .with_prediction(inflated)
        .expect("inflated prediction is >= 1")
}

/// Feeds one completion back into the monitor. Under-predictions bump the
/// correction count and multiply the inflation factor by gamma, saturating at
/// the cap; over-predictions leave the state unchanged.
pub fn observe_completion(
    state: MonitorState,
    predicted: u64,
    actual: u64,
    cfg: &MonitorConfig,
) -> MonitorState {
    if cfg.enabled && actual > predicted {
        MonitorState {
            corrections: state.corrections + 1,
            inflation_factor: (state.inflation_factor * cfg.gamma).min(cfg.cap),
        }
    } else {
        state
    }
}
