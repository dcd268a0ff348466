//! LSP pair selection policies.
//!
//! * Method A probes pairs round-robin in the pre-defined order and takes the
//!   first one with room in both directions.
//! * Method B finds the request's key direction (the direction whose demand
//!   is largest relative to the smallest per-pair maximum) and picks the
//!   feasible pair with the least available bandwidth in that direction.
//! * Method C picks the feasible pair with the largest delay that still
//!   meets the request's permitted delay.
//!
//! Every method only considers pairs whose delay satisfies the request's
//! permitted delay, when the request carries one. Ties are broken uniformly
//! at random with the caller's rng; no randomness is consumed when the
//! choice is unique.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capacity::{LspPairState, Request, Topology};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("method B needs positive {direction} capacity on at least one pair")]
    ZeroKeyNormalizer { direction: Direction },
    #[error("unknown policy '{0}' (expected method-a, method-b or method-c)")]
    UnknownPolicy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    MethodA,
    MethodB,
    MethodC,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::MethodA, PolicyKind::MethodB, PolicyKind::MethodC];

    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyKind::MethodA => "method-a",
            PolicyKind::MethodB => "method-b",
            PolicyKind::MethodC => "method-c",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "method-a" | "a" => Ok(PolicyKind::MethodA),
            "method-b" | "b" => Ok(PolicyKind::MethodB),
            "method-c" | "c" => Ok(PolicyKind::MethodC),
            _ => Err(PolicyError::UnknownPolicy(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RejectReason {
    /// Delay-eligible pairs exist but none has room in both directions.
    NoFeasiblePair,
    /// No pair meets the request's permitted delay at all.
    NoDelayFeasiblePair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    Selected(usize),
    Rejected(RejectReason),
}

impl Decision {
    pub fn selected(&self) -> Option<usize> {
        match self {
            Decision::Selected(id) => Some(*id),
            Decision::Rejected(_) => None,
        }
    }
}

/// Where the next round-robin probe starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundRobinCursor {
    next_index: usize,
    n: usize,
}

impl RoundRobinCursor {
    pub fn new(n: usize) -> Self {
        Self::starting_at(0, n)
    }

    pub fn starting_at(next_index: usize, n: usize) -> Self {
        assert!(n > 0, "cursor over an empty topology");
        assert!(next_index < n, "cursor index {next_index} out of range 0..{n}");
        Self { next_index, n }
    }

    pub fn next_index(&self) -> usize {
        self.next_index
    }

    fn advance(&mut self) {
        self.next_index = (self.next_index + 1) % self.n;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Up,
    Down,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Up => "upward",
            Direction::Down => "downward",
        })
    }
}

/// Smallest per-pair maximum in each direction. Pairs with zero capacity in
/// a direction are left out, since they cannot be an LSP of that direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyNormalizer {
    pub min_max_up: f64,
    pub min_max_down: f64,
}

impl KeyNormalizer {
    pub fn for_topology(topology: &Topology) -> Result<Self, PolicyError> {
        let min_positive = |values: &mut dyn Iterator<Item = f64>| {
            values.filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min)
        };
        let min_max_up = min_positive(&mut topology.pairs().iter().map(|p| p.max_up));
        let min_max_down = min_positive(&mut topology.pairs().iter().map(|p| p.max_down));
        if !min_max_up.is_finite() {
            return Err(PolicyError::ZeroKeyNormalizer { direction: Direction::Up });
        }
        if !min_max_down.is_finite() {
            return Err(PolicyError::ZeroKeyNormalizer { direction: Direction::Down });
        }
        Ok(Self {
            min_max_up,
            min_max_down,
        })
    }

    pub fn key_direction(&self, request: &Request) -> KeyDirection {
        let x_up = request.need_up / self.min_max_up;
        let x_down = request.need_down / self.min_max_down;
        KeyDirection {
            direction: if x_up >= x_down { Direction::Up } else { Direction::Down },
            x_up,
            x_down,
            x_up0: self.min_max_up,
            x_down0: self.min_max_down,
        }
    }
}

/// The key direction of a request together with the ratios behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyDirection {
    pub direction: Direction,
    /// Upward demand over `x_up0`.
    pub x_up: f64,
    /// Downward demand over `x_down0`.
    pub x_down: f64,
    pub x_up0: f64,
    pub x_down0: f64,
}

pub fn key_direction(topology: &Topology, request: &Request) -> Result<KeyDirection, PolicyError> {
    Ok(KeyNormalizer::for_topology(topology)?.key_direction(request))
}

fn delay_eligible<'a>(
    topology: &'a Topology,
    request: &'a Request,
) -> impl Iterator<Item = usize> + 'a {
    topology
        .pairs()
        .iter()
        .filter(|p| request.delay_allows(p.delay))
        .map(|p| p.pair_id)
}

fn rejection(topology: &Topology, request: &Request) -> Decision {
    if delay_eligible(topology, request).next().is_none() {
        Decision::Rejected(RejectReason::NoDelayFeasiblePair)
    } else {
        Decision::Rejected(RejectReason::NoFeasiblePair)
    }
}

fn pick<R: Rng + ?Sized>(candidates: &[usize], rng: &mut R) -> usize {
    match candidates {
        [only] => *only,
        _ => candidates[rng.random_range(0..candidates.len())],
    }
}

/// Round-robin probing from the cursor; the cursor moves on by one per call
/// whatever the outcome.
pub fn select_method_a(
    topology: &Topology,
    states: &[LspPairState],
    request: &Request,
    cursor: &mut RoundRobinCursor,
) -> Decision {
    let n = topology.len();
    let start = cursor.next_index();
    cursor.advance();
    for offset in 0..n {
        let id = (start + offset) % n;
        let spec = topology.pair(id);
        if request.delay_allows(spec.delay) && states[id].fits(spec, request) {
            return Decision::Selected(id);
        }
    }
    rejection(topology, request)
}

/// Best fit on the key direction: the feasible pair with the least
/// available bandwidth in the request's key direction.
pub fn select_method_b<R: Rng + ?Sized>(
    topology: &Topology,
    normalizer: &KeyNormalizer,
    states: &[LspPairState],
    request: &Request,
    rng: &mut R,
) -> Decision {
    let key = normalizer.key_direction(request).direction;
    let mut best = f64::INFINITY;
    let mut ties: Vec<usize> = Vec::with_capacity(topology.len());
    for id in delay_eligible(topology, request) {
        let spec = topology.pair(id);
        let state = &states[id];
        if !state.fits(spec, request) {
            continue;
        }
        let avail = match key {
            Direction::Up => spec.max_up - state.used_up,
            Direction::Down => spec.max_down - state.used_down,
        };
        if avail < best {
            best = avail;
            ties.clear();
            ties.push(id);
        } else if avail == best {
            ties.push(id);
        }
    }
    if ties.is_empty() {
        rejection(topology, request)
    } else {
        Decision::Selected(pick(&ties, rng))
    }
}

/// Largest-delay feasible pair within the request's permitted delay.
///
/// Requests without a delay bound treat every pair as eligible; scenario
/// validation keeps those out of Method C runs.
pub fn select_method_c<R: Rng + ?Sized>(
    topology: &Topology,
    states: &[LspPairState],
    request: &Request,
    rng: &mut R,
) -> Decision {
    let mut best = f64::NEG_INFINITY;
    let mut ties: Vec<usize> = Vec::with_capacity(topology.len());
    for id in delay_eligible(topology, request) {
        let spec = topology.pair(id);
        if !states[id].fits(spec, request) {
            continue;
        }
        if spec.delay > best {
            best = spec.delay;
            ties.clear();
            ties.push(id);
        } else if spec.delay == best {
            ties.push(id);
        }
    }
    if ties.is_empty() {
        rejection(topology, request)
    } else {
        Decision::Selected(pick(&ties, rng))
    }
}

/// A configured policy instance owning whatever per-run state it needs.
#[derive(Debug, Clone)]
pub enum Selector {
    MethodA(RoundRobinCursor),
    MethodB(KeyNormalizer),
    MethodC,
}

impl Selector {
    pub fn new(kind: PolicyKind, topology: &Topology) -> Result<Self, PolicyError> {
        Ok(match kind {
            PolicyKind::MethodA => Selector::MethodA(RoundRobinCursor::new(topology.len())),
            PolicyKind::MethodB => Selector::MethodB(KeyNormalizer::for_topology(topology)?),
            PolicyKind::MethodC => Selector::MethodC,
        })
    }

    pub fn kind(&self) -> PolicyKind {
        match self {
            Selector::MethodA(_) => PolicyKind::MethodA,
            Selector::MethodB(_) => PolicyKind::MethodB,
            Selector::MethodC => PolicyKind::MethodC,
        }
    }

    pub fn select<R: Rng + ?Sized>(
        &mut self,
        topology: &Topology,
        states: &[LspPairState],
        request: &Request,
        rng: &mut R,
    ) -> Decision {
        match self {
            Selector::MethodA(cursor) => select_method_a(topology, states, request, cursor),
            Selector::MethodB(norm) => select_method_b(topology, norm, states, request, rng),
            Selector::MethodC => select_method_c(topology, states, request, rng),
        }
    }
}
