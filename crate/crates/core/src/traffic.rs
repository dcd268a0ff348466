//! Request stream generation.
//!
//! Demand means cycle through a fixed pattern by request index. Sizes are
//! Gaussian around those means with a standard deviation proportional to
//! the mean, inter-arrival times are exponential and the holding time is
//! constant. An optional two-class delay mix tags each request with a
//! short or long permitted delay.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capacity::{Duplex, Request};

/// Redraws allowed before a negative Gaussian draw is clamped to zero.
pub const MAX_REDRAWS: usize = 100;

pub const DEFAULT_SIGMA_RATIO: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrafficError {
    #[error("demand pattern needs at least one entry")]
    EmptyPattern,
    #[error("demand pattern entry {0} has a negative or non-finite mean")]
    BadMean(usize),
    #[error("sigma_ratio must be finite and >= 0, got {0}")]
    BadSigma(f64),
    #[error("mean_interarrival must be finite and > 0, got {0}")]
    BadInterarrival(f64),
    #[error("holding_time must be finite and > 0, got {0}")]
    BadHoldingTime(f64),
    #[error("short_fraction must lie in [0, 1], got {0}")]
    BadFraction(f64),
    #[error("permitted delays must be finite, positive and short <= long, got {short} / {long}")]
    BadPermittedDelays { short: f64, long: f64 },
}

/// Cyclic list of `(B_u, B_d)` means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandPattern {
    entries: Vec<Duplex>,
    sigma_ratio: f64,
}

impl DemandPattern {
    pub fn new(entries: Vec<Duplex>, sigma_ratio: f64) -> Result<Self, TrafficError> {
        if entries.is_empty() {
            return Err(TrafficError::EmptyPattern);
        }
        for (i, e) in entries.iter().enumerate() {
            if !(e.up.is_finite() && e.down.is_finite() && e.up >= 0.0 && e.down >= 0.0) {
                return Err(TrafficError::BadMean(i));
            }
        }
        if !(sigma_ratio.is_finite() && sigma_ratio >= 0.0) {
            return Err(TrafficError::BadSigma(sigma_ratio));
        }
        Ok(Self { entries, sigma_ratio })
    }

    /// `{B_u=x, B_d=x}`.
    pub fn symmetric(x: f64, sigma_ratio: f64) -> Result<Self, TrafficError> {
        Self::new(vec![Duplex::new(x, x)], sigma_ratio)
    }

    /// `{B_u=big, B_d=small; B_u=small, B_d=big}`.
    pub fn anti_phase(big: f64, small: f64, sigma_ratio: f64) -> Result<Self, TrafficError> {
        Self::new(
            vec![Duplex::new(big, small), Duplex::new(small, big)],
            sigma_ratio,
        )
    }

    pub fn entries(&self) -> &[Duplex] {
        &self.entries
    }

    pub fn sigma_ratio(&self) -> f64 {
        self.sigma_ratio
    }

    pub fn period(&self) -> usize {
        self.entries.len()
    }

    pub fn mean_at(&self, index: u64) -> Duplex {
        self.entries[(index % self.entries.len() as u64) as usize]
    }

    /// Average of the entry means over one period.
    pub fn mean_of_means(&self) -> Duplex {
        let k = self.entries.len() as f64;
        let sum = self.entries.iter().fold(Duplex::ZERO, |a, e| a + *e);
        Duplex::new(sum.up / k, sum.down / k)
    }

    pub fn swapped(&self) -> Self {
        Self {
            entries: self.entries.iter().map(Duplex::swapped).collect(),
            sigma_ratio: self.sigma_ratio,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrivalProcess {
    /// Mean of the exponential inter-arrival time `r`, seconds.
    pub mean_interarrival: f64,
    /// Constant holding time `H`, seconds.
    pub holding_time: f64,
}

impl ArrivalProcess {
    pub fn new(mean_interarrival: f64, holding_time: f64) -> Result<Self, TrafficError> {
        let p = Self {
            mean_interarrival,
            holding_time,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), TrafficError> {
        if !(self.mean_interarrival.is_finite() && self.mean_interarrival > 0.0) {
            return Err(TrafficError::BadInterarrival(self.mean_interarrival));
        }
        if !(self.holding_time.is_finite() && self.holding_time > 0.0) {
            return Err(TrafficError::BadHoldingTime(self.holding_time));
        }
        Ok(())
    }

    /// Mean number of requests in progress with no blocking (`H / r`).
    pub fn offered_load(&self) -> f64 {
        self.holding_time / self.mean_interarrival
    }
}

/// Share `short_fraction` of requests tolerate only `short_permitted`; the
/// rest tolerate `long_permitted`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayClassMix {
    pub short_fraction: f64,
    pub short_permitted: f64,
    pub long_permitted: f64,
}

impl DelayClassMix {
    pub fn new(short_fraction: f64, short_permitted: f64, long_permitted: f64) -> Result<Self, TrafficError> {
        let m = Self {
            short_fraction,
            short_permitted,
            long_permitted,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), TrafficError> {
        if !(0.0..=1.0).contains(&self.short_fraction) {
            return Err(TrafficError::BadFraction(self.short_fraction));
        }
        let ok = self.short_permitted.is_finite()
            && self.long_permitted.is_finite()
            && self.short_permitted > 0.0
            && self.short_permitted <= self.long_permitted;
        if !ok {
            return Err(TrafficError::BadPermittedDelays {
                short: self.short_permitted,
                long: self.long_permitted,
            });
        }
        Ok(())
    }
}

fn draw_size<R: Rng + ?Sized>(mean: f64, sigma_ratio: f64, rng: &mut R) -> f64 {
    let sd = sigma_ratio * mean;
    if sd == 0.0 {
        return mean;
    }
    let normal = Normal::new(mean, sd).expect("validated mean and sigma");
    for _ in 0..=MAX_REDRAWS {
        let v = normal.sample(rng);
        if v >= 0.0 {
            return v;
        }
    }
    0.0
}

/// Builds request `index` arriving at `clock`.
///
/// When a delay mix is present one uniform variate decides the class
/// (`u < S` means short), drawn before the sizes. Using a threshold on a
/// shared variate keeps the class assignment nested across values of `S`
/// for a fixed seed.
pub fn generate_request<R: Rng + ?Sized>(
    pattern: &DemandPattern,
    mix: Option<&DelayClassMix>,
    index: u64,
    clock: f64,
    rng: &mut R,
) -> Request {
    let permitted_delay = mix.map(|m| {
        let u: f64 = rng.random();
        if u < m.short_fraction {
            m.short_permitted
        } else {
            m.long_permitted
        }
    });
    let mean = pattern.mean_at(index);
    let need_up = draw_size(mean.up, pattern.sigma_ratio, rng);
    let need_down = draw_size(mean.down, pattern.sigma_ratio, rng);
    Request {
        req_id: index,
        need_up,
        need_down,
        permitted_delay,
        arrival_time: clock,
    }
}

/// Next arrival instant after `clock`.
pub fn next_arrival<R: Rng + ?Sized>(clock: f64, process: &ArrivalProcess, rng: &mut R) -> f64 {
    let exp = Exp::new(1.0 / process.mean_interarrival).expect("validated interarrival");
    loop {
        let t = clock + exp.sample(rng);
        if t > clock {
            return t;
        }
    }
}
