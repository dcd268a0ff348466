//! Discrete-event loss simulation.
//!
//! Arrivals and departures are processed in time order, departures first at
//! equal timestamps. Rejected requests leave the system. Counters and
//! occupancy statistics cover arrivals after the warm-up prefix.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capacity::{Allocation, CapacityError, Duplex, LspPairState, Request, Topology, CAPACITY_EPSILON};
use crate::policy::{Decision, PolicyError, PolicyKind, RejectReason, Selector};
use crate::rng::{stream, Seeds, Stream};
use crate::traffic::{generate_request, next_arrival, ArrivalProcess, DelayClassMix, DemandPattern, TrafficError};

pub const DEFAULT_TOTAL_REQUESTS: u64 = 200_000;
pub const DEFAULT_AUDIT_INTERVAL: u64 = 10_000;

/// `max(1000, total / 10)`, kept below `total`.
pub fn default_warmup(total_requests: u64) -> u64 {
    (total_requests / 10)
        .max(1000)
        .min(total_requests.saturating_sub(1))
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("method-c needs a delay mix so that every request carries a permitted delay")]
    MissingDelayMix,
    #[error("warmup_requests ({warmup}) must be smaller than total_requests ({total})")]
    WarmupTooLong { warmup: u64, total: u64 },
    #[error("audit_interval must be positive")]
    ZeroAuditInterval,
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    #[error(transparent)]
    Capacity(#[from] CapacityError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(#[from] ScenarioError),
    #[error("allocation {0} released twice or never registered")]
    UnknownAllocation(u64),
    #[error("capacity invariant violated at t={time}: {detail}")]
    Invariant { time: f64, detail: String },
    #[error(transparent)]
    Capacity(#[from] CapacityError),
}

/// Everything needed to reproduce one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub topology: Topology,
    pub policy: PolicyKind,
    pub pattern: DemandPattern,
    pub arrivals: ArrivalProcess,
    pub delay_mix: Option<DelayClassMix>,
    pub total_requests: u64,
    pub warmup_requests: u64,
    pub seeds: Seeds,
    /// Full allocation audit every this many events.
    pub audit_interval: u64,
    /// Keep at most this many decisions in the run's log (0 disables it).
    pub decision_log_limit: usize,
}

impl Scenario {
    /// Scenario with default run length, warm-up, audit cadence and no
    /// decision log.
    pub fn new(
        topology: Topology,
        policy: PolicyKind,
        pattern: DemandPattern,
        arrivals: ArrivalProcess,
        delay_mix: Option<DelayClassMix>,
    ) -> Self {
        Self {
            topology,
            policy,
            pattern,
            arrivals,
            delay_mix,
            total_requests: DEFAULT_TOTAL_REQUESTS,
            warmup_requests: default_warmup(DEFAULT_TOTAL_REQUESTS),
            seeds: Seeds::new(1, 1),
            audit_interval: DEFAULT_AUDIT_INTERVAL,
            decision_log_limit: 0,
        }
    }

    /// Sets the run length together with the default warm-up for it.
    pub fn with_requests(mut self, total: u64) -> Self {
        self.total_requests = total;
        self.warmup_requests = default_warmup(total);
        self
    }

    pub fn with_policy(mut self, policy: PolicyKind) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_seeds(mut self, seeds: Seeds) -> Self {
        self.seeds = seeds;
        self
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        Topology::from_specs(self.topology.pairs().to_vec())?;
        DemandPattern::new(self.pattern.entries().to_vec(), self.pattern.sigma_ratio())?;
        self.arrivals.validate()?;
        if let Some(mix) = &self.delay_mix {
            mix.validate()?;
        }
        if self.warmup_requests >= self.total_requests {
            return Err(ScenarioError::WarmupTooLong {
                warmup: self.warmup_requests,
                total: self.total_requests,
            });
        }
        if self.audit_interval == 0 {
            return Err(ScenarioError::ZeroAuditInterval);
        }
        match self.policy {
            PolicyKind::MethodC if self.delay_mix.is_none() => {
                return Err(ScenarioError::MissingDelayMix)
            }
            _ => {}
        }
        Selector::new(self.policy, &self.topology)?;
        Ok(())
    }

    /// Mirror image: capacities and demand means with up and down exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            topology: self.topology.swapped(),
            pattern: self.pattern.swapped(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub req_id: u64,
    pub arrival_time: f64,
    pub decision: Decision,
    pub deadlock: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PairOccupancy {
    pub peak: Duplex,
    /// Time average over the measurement window.
    pub mean: Duplex,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunResult {
    pub offered: u64,
    pub accepted: u64,
    pub rejected: u64,
    /// Bandwidth rejections where the eligible pairs together had enough
    /// spare bandwidth in both directions.
    pub deadlock_rejected: u64,
    /// Rejections because no pair met the permitted delay.
    pub delay_rejected: u64,
    pub occupancy: Vec<PairOccupancy>,
    pub decision_log: Vec<DecisionRecord>,
    /// All arrivals, warm-up included.
    pub arrivals_processed: u64,
    pub arrivals_accepted: u64,
    pub departures_processed: u64,
}

impl RunResult {
    pub fn loss(&self) -> Option<f64> {
        (self.offered > 0).then(|| self.rejected as f64 / self.offered as f64)
    }
}

/// Deadlock rejection: no single eligible pair fits, yet the eligible
/// pairs' spare bandwidth adds up to the demand in both directions.
///
/// Eligible pairs are those meeting the request's permitted delay (all
/// pairs for unconstrained requests).
pub fn classify_deadlock(topology: &Topology, states: &[LspPairState], request: &Request) -> bool {
    let mut spare = Duplex::ZERO;
    let mut single_fit = false;
    for spec in topology.pairs().iter().filter(|p| request.delay_allows(p.delay)) {
        let state = &states[spec.pair_id];
        spare = spare + Duplex::new(spec.max_up - state.used_up, spec.max_down - state.used_down);
        single_fit |= state.fits(spec, request);
    }
    debug_assert!(!single_fit, "deadlock check on a request that fits a pair");
    !single_fit && spare.covers(&request.need())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    Departure(u64),
    Arrival,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl Event {
    fn priority(&self) -> u8 {
        match self.kind {
            EventKind::Departure(_) => 0,
            EventKind::Arrival => 1,
        }
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // reversed: BinaryHeap is a max-heap and we want the earliest event first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.priority().cmp(&self.priority()))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Default)]
struct EventQueue {
    heap: BinaryHeap<Event>,
    seq: u64,
    last_time: f64,
}

impl EventQueue {
    fn push(&mut self, time: f64, kind: EventKind) {
        self.seq += 1;
        self.heap.push(Event {
            time,
            seq: self.seq,
            kind,
        });
    }

    fn pop(&mut self) -> Option<Event> {
        let e = self.heap.pop()?;
        debug_assert!(e.time >= self.last_time, "event time went backwards");
        self.last_time = e.time;
        Some(e)
    }
}

struct Occupancy {
    peak: Vec<Duplex>,
    area: Vec<Duplex>,
    since: Option<f64>,
    last: f64,
}

impl Occupancy {
    fn new(n: usize) -> Self {
        Self {
            peak: vec![Duplex::ZERO; n],
            area: vec![Duplex::ZERO; n],
            since: None,
            last: 0.0,
        }
    }

    fn start(&mut self, now: f64) {
        self.since = Some(now);
        self.last = now;
    }

    /// Integrates usage held constant over `[last, now)`.
    fn advance(&mut self, now: f64, states: &[LspPairState]) {
        if self.since.is_none() {
            return;
        }
        let dt = now - self.last;
        for (area, s) in self.area.iter_mut().zip(states) {
            *area = *area + s.used().scaled(dt);
        }
        self.last = now;
    }

    fn observe_peak(&mut self, states: &[LspPairState]) {
        if self.since.is_none() {
            return;
        }
        for (peak, s) in self.peak.iter_mut().zip(states) {
            peak.up = peak.up.max(s.used_up);
            peak.down = peak.down.max(s.used_down);
        }
    }

    fn finish(&self) -> Vec<PairOccupancy> {
        let span = self.since.map(|s| self.last - s).unwrap_or(0.0);
        self.peak
            .iter()
            .zip(&self.area)
            .map(|(peak, area)| PairOccupancy {
                peak: *peak,
                mean: if span > 0.0 { area.scaled(1.0 / span) } else { Duplex::ZERO },
            })
            .collect()
    }
}

struct Simulation<'a> {
    scenario: &'a Scenario,
    states: Vec<LspPairState>,
    live: HashMap<u64, Allocation>,
    next_alloc_id: u64,
    events_since_audit: u64,
}

impl<'a> Simulation<'a> {
    fn check_bounds(&self, time: f64) -> Result<(), EngineError> {
        for (s, spec) in self.states.iter().zip(self.scenario.topology.pairs()) {
            if !s.within_bounds(spec) {
                return Err(EngineError::Invariant {
                    time,
                    detail: format!("pair {} usage {} exceeds {}", s.pair_id, s.used(), spec.capacity()),
                });
            }
        }
        Ok(())
    }

    /// Recomputes per-pair usage from the live allocations.
    fn audit(&self, time: f64) -> Result<(), EngineError> {
        let mut sums = vec![Duplex::ZERO; self.states.len()];
        for a in self.live.values() {
            sums[a.pair_id] = sums[a.pair_id] + a.amount();
        }
        let tol = CAPACITY_EPSILON * (1.0 + self.live.len() as f64);
        for (s, sum) in self.states.iter().zip(&sums) {
            let diff = s.used() - *sum;
            if diff.up.abs() > tol || diff.down.abs() > tol {
                return Err(EngineError::Invariant {
                    time,
                    detail: format!(
                        "pair {} records usage {} but live allocations sum to {}",
                        s.pair_id,
                        s.used(),
                        sum
                    ),
                });
            }
        }
        Ok(())
    }

    fn after_event(&mut self, time: f64) -> Result<(), EngineError> {
        self.check_bounds(time)?;
        self.events_since_audit += 1;
        if self.events_since_audit >= self.scenario.audit_interval {
            self.events_since_audit = 0;
            self.audit(time)?;
        }
        Ok(())
    }
}

/// Runs one replication of `scenario`.
pub fn run(scenario: &Scenario) -> Result<RunResult, EngineError> {
    scenario.validate()?;

    let topology = &scenario.topology;
    let holding = scenario.arrivals.holding_time;
    let mut demand_rng = stream(scenario.seeds.traffic, Stream::Demand);
    let mut arrival_rng = stream(scenario.seeds.traffic, Stream::Arrivals);
    let mut policy_rng = stream(scenario.seeds.policy, Stream::Policy);
    let mut selector = Selector::new(scenario.policy, topology).map_err(ScenarioError::from)?;

    let mut sim = Simulation {
        scenario,
        states: topology.empty_states(),
        live: HashMap::new(),
        next_alloc_id: 0,
        events_since_audit: 0,
    };
    let mut queue = EventQueue::default();
    let mut occupancy = Occupancy::new(topology.len());
    let mut result = RunResult::default();

    let mut next_index: u64 = 0;
    if scenario.total_requests > 0 {
        queue.push(next_arrival(0.0, &scenario.arrivals, &mut arrival_rng), EventKind::Arrival);
    }

    while let Some(event) = queue.pop() {
        let now = event.time;
        let measuring = next_index < scenario.total_requests;
        if measuring {
            occupancy.advance(now, &sim.states);
        }
        match event.kind {
            EventKind::Departure(alloc_id) => {
                let alloc = sim
                    .live
                    .remove(&alloc_id)
                    .ok_or(EngineError::UnknownAllocation(alloc_id))?;
                sim.states[alloc.pair_id].release(&alloc)?;
                result.departures_processed += 1;
            }
            EventKind::Arrival => {
                let index = next_index;
                next_index += 1;
                if index == scenario.warmup_requests {
                    occupancy.start(now);
                }
                let counted = index >= scenario.warmup_requests;
                let request = generate_request(
                    &scenario.pattern,
                    scenario.delay_mix.as_ref(),
                    index,
                    now,
                    &mut demand_rng,
                );
                let decision = selector.select(topology, &sim.states, &request, &mut policy_rng);
                let mut deadlock = false;
                match decision {
                    Decision::Selected(pair_id) => {
                        let alloc = sim.states[pair_id].allocate(
                            topology.pair(pair_id),
                            &request,
                            sim.next_alloc_id,
                            now,
                            holding,
                        )?;
                        sim.next_alloc_id += 1;
                        queue.push(alloc.release_time, EventKind::Departure(alloc.alloc_id));
                        sim.live.insert(alloc.alloc_id, alloc);
                        result.arrivals_accepted += 1;
                        if counted {
                            result.accepted += 1;
                        }
                    }
                    Decision::Rejected(reason) => {
                        if reason == RejectReason::NoFeasiblePair {
                            deadlock = classify_deadlock(topology, &sim.states, &request);
                        }
                        if counted {
                            result.rejected += 1;
                            match reason {
                                RejectReason::NoFeasiblePair if deadlock => result.deadlock_rejected += 1,
                                RejectReason::NoDelayFeasiblePair => result.delay_rejected += 1,
                                _ => {}
                            }
                        }
                    }
                }
                if counted {
                    result.offered += 1;
                    if result.decision_log.len() < scenario.decision_log_limit {
                        result.decision_log.push(DecisionRecord {
                            req_id: request.req_id,
                            arrival_time: now,
                            decision,
                            deadlock,
                        });
                    }
                }
                result.arrivals_processed += 1;
                if next_index < scenario.total_requests {
                    let t = next_arrival(now, &scenario.arrivals, &mut arrival_rng);
                    queue.push(t, EventKind::Arrival);
                }
            }
        }
        if measuring {
            occupancy.observe_peak(&sim.states);
        }
        sim.after_event(now)?;
    }

    sim.audit(queue.last_time)?;
    debug_assert!(sim.live.is_empty());
    result.occupancy = occupancy.finish();
    Ok(result)
}

/// Runs `replications` copies of `scenario` with seeds
/// `master_seed + i`, in parallel on the current rayon pool.
pub fn run_replications(
    scenario: &Scenario,
    replications: u64,
    master_seed: u64,
) -> Result<Vec<RunResult>, EngineError> {
    use rayon::prelude::*;
    scenario.validate()?;
    (0..replications)
        .into_par_iter()
        .map(|i| {
            let s = scenario.clone().with_seeds(Seeds::for_replication(master_seed, i));
            run(&s)
        })
        .collect()
}
