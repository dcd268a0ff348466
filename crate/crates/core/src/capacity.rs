//! Bidirectional LSP pair capacity model.
//!
//! A topology is an ordered list of LSP pairs between the same two edge
//! nodes. Each pair carries an upward and a downward LSP with independent
//! maximum bandwidths and a fixed edge-to-edge delay. Requests take
//! bandwidth in both directions of a single pair at once and give it back
//! when their holding time ends.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack used when comparing accumulated floating point bandwidth.
pub const CAPACITY_EPSILON: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CapacityError {
    #[error("state for pair {state} used with spec of pair {spec}")]
    PairMismatch { state: usize, spec: usize },
    #[error("request {req_id} does not fit on pair {pair_id}")]
    DoesNotFit { req_id: u64, pair_id: usize },
    #[error("allocation {alloc_id} released from pair {pair_id} but belongs to pair {owner}")]
    WrongPair {
        alloc_id: u64,
        pair_id: usize,
        owner: usize,
    },
    #[error("releasing allocation {alloc_id} would drive pair {pair_id} usage negative")]
    Underflow { alloc_id: u64, pair_id: usize },
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
}

/// A bandwidth quantity per direction.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Duplex {
    pub up: f64,
    pub down: f64,
}

impl Duplex {
    pub const ZERO: Duplex = Duplex { up: 0.0, down: 0.0 };

    pub const fn new(up: f64, down: f64) -> Self {
        Self { up, down }
    }

    /// Componentwise `self >= other`, with [`CAPACITY_EPSILON`] slack.
    pub fn covers(&self, other: &Duplex) -> bool {
        self.up + CAPACITY_EPSILON >= other.up && self.down + CAPACITY_EPSILON >= other.down
    }

    pub fn swapped(&self) -> Self {
        Self::new(self.down, self.up)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(self.up * factor, self.down * factor)
    }
}

impl std::ops::Add for Duplex {
    type Output = Duplex;

    fn add(self, rhs: Duplex) -> Duplex {
        Duplex::new(self.up + rhs.up, self.down + rhs.down)
    }
}

impl std::ops::Sub for Duplex {
    type Output = Duplex;

    fn sub(self, rhs: Duplex) -> Duplex {
        Duplex::new(self.up - rhs.up, self.down - rhs.down)
    }
}

impl fmt::Display for Duplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.up, self.down)
    }
}

/// Static description of one LSP pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LspPairSpec {
    pub pair_id: usize,
    pub max_up: f64,
    pub max_down: f64,
    /// Edge-to-edge network delay in seconds.
    pub delay: f64,
}

impl LspPairSpec {
    pub fn capacity(&self) -> Duplex {
        Duplex::new(self.max_up, self.max_down)
    }
}

/// The ordered set of LSP pairs between one edge node pair.
///
/// The order is the pre-defined probe order used by round-robin selection,
/// and `pair_id` always equals the position in that order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pairs: Vec<LspPairSpec>,
}

impl Topology {
    /// Builds a topology from `(max_up, max_down, delay)` triples, numbering
    /// pairs in the given order.
    pub fn new<I>(pairs: I) -> Result<Self, CapacityError>
    where
        I: IntoIterator<Item = (f64, f64, f64)>,
    {
        let pairs = pairs
            .into_iter()
            .enumerate()
            .map(|(pair_id, (max_up, max_down, delay))| LspPairSpec {
                pair_id,
                max_up,
                max_down,
                delay,
            })
            .collect();
        Self::from_specs(pairs)
    }

    /// `n` identical pairs.
    pub fn uniform(n: usize, max_up: f64, max_down: f64, delay: f64) -> Result<Self, CapacityError> {
        Self::new(std::iter::repeat_n((max_up, max_down, delay), n))
    }

    pub fn from_specs(pairs: Vec<LspPairSpec>) -> Result<Self, CapacityError> {
        if pairs.is_empty() {
            return Err(CapacityError::InvalidTopology(
                "at least one LSP pair is required".into(),
            ));
        }
        for (idx, p) in pairs.iter().enumerate() {
            if p.pair_id != idx {
                return Err(CapacityError::InvalidTopology(format!(
                    "pair at position {idx} has pair_id {}",
                    p.pair_id
                )));
            }
            let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
            if !finite_nonneg(p.max_up) || !finite_nonneg(p.max_down) || !finite_nonneg(p.delay) {
                return Err(CapacityError::InvalidTopology(format!(
                    "pair {idx} has negative or non-finite capacity or delay"
                )));
            }
        }
        Ok(Self { pairs })
    }

    pub fn pairs(&self) -> &[LspPairSpec] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pair(&self, pair_id: usize) -> &LspPairSpec {
        &self.pairs[pair_id]
    }

    /// Sum of capacities over all pairs.
    pub fn total_capacity(&self) -> Duplex {
        self.pairs
            .iter()
            .fold(Duplex::ZERO, |acc, p| acc + p.capacity())
    }

    /// Fresh (empty) runtime state for every pair.
    pub fn empty_states(&self) -> Vec<LspPairState> {
        self.pairs.iter().map(|p| LspPairState::empty(p.pair_id)).collect()
    }

    /// Same topology with up and down exchanged on every pair.
    pub fn swapped(&self) -> Self {
        Self {
            pairs: self
                .pairs
                .iter()
                .map(|p| LspPairSpec {
                    max_up: p.max_down,
                    max_down: p.max_up,
                    ..*p
                })
                .collect(),
        }
    }
}

/// Bandwidth currently reserved on one pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LspPairState {
    pub pair_id: usize,
    pub used_up: f64,
    pub used_down: f64,
}

/// One service demand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub req_id: u64,
    pub need_up: f64,
    pub need_down: f64,
    /// Upper bound on pair delay in seconds; `None` means unconstrained.
    pub permitted_delay: Option<f64>,
    pub arrival_time: f64,
}

impl Request {
    pub fn new(req_id: u64, need_up: f64, need_down: f64) -> Self {
        Self {
            req_id,
            need_up,
            need_down,
            permitted_delay: None,
            arrival_time: 0.0,
        }
    }

    pub fn with_permitted_delay(mut self, delay: f64) -> Self {
        self.permitted_delay = Some(delay);
        self
    }

    pub fn at(mut self, arrival_time: f64) -> Self {
        self.arrival_time = arrival_time;
        self
    }

    pub fn need(&self) -> Duplex {
        Duplex::new(self.need_up, self.need_down)
    }

    /// Whether a pair with the given delay satisfies this request's delay
    /// bound. A pair whose delay equals the bound is eligible.
    pub fn delay_allows(&self, pair_delay: f64) -> bool {
        self.permitted_delay.is_none_or(|bound| pair_delay <= bound)
    }
}

/// Bandwidth held by an accepted request until `release_time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub alloc_id: u64,
    pub req_id: u64,
    pub pair_id: usize,
    pub amount_up: f64,
    pub amount_down: f64,
    pub release_time: f64,
}

impl Allocation {
    pub fn amount(&self) -> Duplex {
        Duplex::new(self.amount_up, self.amount_down)
    }
}

impl LspPairState {
    pub fn empty(pair_id: usize) -> Self {
        Self {
            pair_id,
            used_up: 0.0,
            used_down: 0.0,
        }
    }

    pub fn used(&self) -> Duplex {
        Duplex::new(self.used_up, self.used_down)
    }

    /// Remaining bandwidth per direction.
    pub fn available(&self, spec: &LspPairSpec) -> Result<Duplex, CapacityError> {
        self.check_pair(spec)?;
        Ok(Duplex::new(
            spec.max_up - self.used_up,
            spec.max_down - self.used_down,
        ))
    }

    /// True iff both required bandwidths are available on this pair.
    pub fn fits(&self, spec: &LspPairSpec, request: &Request) -> bool {
        debug_assert_eq!(self.pair_id, spec.pair_id);
        let avail = Duplex::new(spec.max_up - self.used_up, spec.max_down - self.used_down);
        avail.covers(&request.need())
    }

    /// Reserves the request's bandwidth on this pair until `now + holding_time`.
    pub fn allocate(
        &mut self,
        spec: &LspPairSpec,
        request: &Request,
        alloc_id: u64,
        now: f64,
        holding_time: f64,
    ) -> Result<Allocation, CapacityError> {
        self.check_pair(spec)?;
        if !self.fits(spec, request) {
            return Err(CapacityError::DoesNotFit {
                req_id: request.req_id,
                pair_id: self.pair_id,
            });
        }
        // Epsilon slack in `fits` may overshoot the maximum by rounding only.
        self.used_up = (self.used_up + request.need_up).min(spec.max_up);
        self.used_down = (self.used_down + request.need_down).min(spec.max_down);
        Ok(Allocation {
            alloc_id,
            req_id: request.req_id,
            pair_id: self.pair_id,
            amount_up: request.need_up,
            amount_down: request.need_down,
            release_time: now + holding_time,
        })
    }

    /// Returns an allocation's bandwidth to this pair.
    pub fn release(&mut self, allocation: &Allocation) -> Result<(), CapacityError> {
        if allocation.pair_id != self.pair_id {
            return Err(CapacityError::WrongPair {
                alloc_id: allocation.alloc_id,
                pair_id: self.pair_id,
                owner: allocation.pair_id,
            });
        }
        let up = self.used_up - allocation.amount_up;
        let down = self.used_down - allocation.amount_down;
        if up < -CAPACITY_EPSILON || down < -CAPACITY_EPSILON {
            return Err(CapacityError::Underflow {
                alloc_id: allocation.alloc_id,
                pair_id: self.pair_id,
            });
        }
        self.used_up = up.max(0.0);
        self.used_down = down.max(0.0);
        Ok(())
    }

    /// Whether usage lies within `[0, max]` in both directions.
    pub fn within_bounds(&self, spec: &LspPairSpec) -> bool {
        self.used_up >= 0.0
            && self.used_down >= 0.0
            && self.used_up <= spec.max_up + CAPACITY_EPSILON
            && self.used_down <= spec.max_down + CAPACITY_EPSILON
    }

    fn check_pair(&self, spec: &LspPairSpec) -> Result<(), CapacityError> {
        if self.pair_id == spec.pair_id {
            Ok(())
        } else {
            Err(CapacityError::PairMismatch {
                state: self.pair_id,
                spec: spec.pair_id,
            })
        }
    }
}
