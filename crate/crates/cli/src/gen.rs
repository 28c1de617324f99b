//! Seeded synthetic trace generation.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use servesim_core::{Error, Request, Result};

/// How inter-arrival gaps are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArrivalModel {
    /// Exponential gaps with the given mean rate (arrivals per second).
    Poisson { rate: f64 },
    /// Constant gap in seconds.
    Fixed { gap: f64 },
}

impl FromStr for ArrivalModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("invalid arrival model '{s}' (expected poisson:<rate> or fixed:<gap>)"));
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        let value: f64 = arg.parse().map_err(|_| bad())?;
        match kind {
            "poisson" => {
                if value > 0.0 && value.is_finite() {
                    Ok(ArrivalModel::Poisson { rate: value })
                } else {
                    Err(Error::Config(format!("poisson rate must be > 0, got {value}")))
                }
            }
            "fixed" => {
                if value >= 0.0 && value.is_finite() {
                    Ok(ArrivalModel::Fixed { gap: value })
                } else {
                    Err(Error::Config(format!("fixed gap must be >= 0, got {value}")))
                }
            }
            _ => Err(bad()),
        }
    }
}

/// How token lengths are drawn; used for inputs and outputs independently.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LenDist {
    Uniform { lo: u64, hi: u64 },
    LogNormal { mu: f64, sigma: f64 },
}

impl FromStr for LenDist {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::Config(format!(
                "invalid length distribution '{s}' (expected uniform:<lo>,<hi> or lognormal:<mu>,<sigma>)"
            ))
        };
        let (kind, args) = s.split_once(':').ok_or_else(bad)?;
        let (a, b) = args.split_once(',').ok_or_else(bad)?;
        match kind {
            "uniform" => {
                let lo: u64 = a.parse().map_err(|_| bad())?;
                let hi: u64 = b.parse().map_err(|_| bad())?;
                if lo == 0 || hi < lo {
                    return Err(Error::Config(format!(
                        "uniform bounds must satisfy 1 <= lo <= hi, got {lo},{hi}"
                    )));
                }
                Ok(LenDist::Uniform { lo, hi })
            }
            "lognormal" => {
                let mu: f64 = a.parse().map_err(|_| bad())?;
                let sigma: f64 = b.parse().map_err(|_| bad())?;
                if !mu.is_finite() || !sigma.is_finite() || sigma < 0.0 {
                    return Err(Error::Config(format!(
                        "lognormal parameters must be finite with sigma >= 0, got {mu},{sigma}"
                    )));
                }
                Ok(LenDist::LogNormal { mu, sigma })
            }
            _ => Err(bad()),
        }
    }
}

impl LenDist {
    fn sample(&self, rng: &mut ChaCha8Rng) -> u64 {
        match *self {
            LenDist::Uniform { lo, hi } => rng.gen_range(lo..=hi),
            LenDist::LogNormal { mu, sigma } => {
                let dist = LogNormal::new(mu, sigma).expect("validated parameters");
                (dist.sample(rng).round() as u64).max(1)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            LenDist::Uniform { lo, hi } => (lo + hi) as f64 / 2.0,
            LenDist::LogNormal { mu, sigma } => (mu + sigma * sigma / 2.0).exp(),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            LenDist::Uniform { lo, hi } => {
                let span = (hi - lo + 1) as f64;
                (span * span - 1.0) / 12.0
            }
            LenDist::LogNormal { mu, sigma } => {
                let s2 = sigma * sigma;
                (s2.exp() - 1.0) * (2.0 * mu + s2).exp()
            }
        }
    }
}

/// Generates `n` requests with seeded arrivals, lengths, and SLOs.
///
/// SLOs are drawn uniformly over `slo_range` seconds; the same seed always
/// yields the same trace.
pub fn gen_trace(
    n: usize,
    arrival: &ArrivalModel,
    len_dist: &LenDist,
    slo_range: (f64, f64),
    seed: u64,
) -> Result<Vec<Request>> {
    if n == 0 {
        return Err(Error::Config("trace size must be >= 1".into()));
    }
    let (slo_lo, slo_hi) = slo_range;
    if !(slo_lo.is_finite() && slo_hi.is_finite()) || slo_lo <= 0.0 || slo_hi < slo_lo {
        return Err(Error::Config(format!(
            "slo range must satisfy 0 < lo <= hi, got {slo_lo},{slo_hi}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clock = 0.0f64;
    let mut trace = Vec::with_capacity(n);
    for id in 0..n {
        let gap = match *arrival {
            ArrivalModel::Poisson { rate } => -rng.gen::<f64>().max(f64::MIN_POSITIVE).ln() / rate,
            ArrivalModel::Fixed { gap } => gap,
        };
        clock += gap;
        let input_len = len_dist.sample(&mut rng);
        let output_len = len_dist.sample(&mut rng);
        let slo = rng.gen_range(slo_lo..=slo_hi);
        trace.push(Request::new(id as u64, clock, input_len, output_len, slo)?);
    }
    Ok(trace)
}
