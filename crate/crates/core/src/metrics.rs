//! Loss estimation across replications and equal-loss capacity reduction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capacity::{CapacityError, LspPairSpec, Topology};
use crate::engine::{run_replications, EngineError, RunResult, Scenario};
use crate::policy::PolicyKind;

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no replications to estimate from")]
    NoReplications,
    #[error("replication {0} offered no requests")]
    NothingOffered(usize),
    #[error("scale factor must lie in (0, 1], got {0}")]
    BadScale(f64),
    #[error("bounds [{lower}, {upper}] must satisfy 0 < lower < upper <= 1")]
    BadBounds { lower: f64, upper: f64 },
    #[error(
        "{policy} at alpha={lower} still loses {loss} <= target {target}; widen the lower bound"
    )]
    NotBracketed {
        policy: PolicyKind,
        lower: f64,
        loss: f64,
        target: f64,
    },
    #[error(
        "loss rose with capacity beyond its confidence interval \
         (alpha {alpha_lo} -> {loss_lo}, alpha {alpha_hi} -> {loss_hi}) with {replications} replications; run more replications"
    )]
    NonMonotone {
        alpha_lo: f64,
        loss_lo: f64,
        alpha_hi: f64,
        loss_hi: f64,
        replications: u64,
    },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Capacity(#[from] CapacityError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossEstimate {
    pub mean_loss: f64,
    /// 95% half-width; `None` with a single replication.
    pub ci_halfwidth: Option<f64>,
    pub replications: usize,
    /// Deadlock rejections over all rejections, pooled across replications.
    pub deadlock_fraction: f64,
    /// Requests counted across all replications.
    pub offered: u64,
}

impl LossEstimate {
    pub fn lower(&self) -> f64 {
        self.mean_loss - self.ci_halfwidth.unwrap_or(0.0)
    }

    pub fn upper(&self) -> f64 {
        self.mean_loss + self.ci_halfwidth.unwrap_or(0.0)
    }

    /// Whether the two 95% intervals share any point.
    pub fn overlaps(&self, other: &LossEstimate) -> bool {
        self.lower() <= other.upper() && other.lower() <= self.upper()
    }
}

/// Mean of per-replication loss ratios with a normal-approximation CI.
pub fn loss_probability(results: &[RunResult]) -> Result<LossEstimate, MetricsError> {
    if results.is_empty() {
        return Err(MetricsError::NoReplications);
    }
    let losses = results
        .iter()
        .enumerate()
        .map(|(i, r)| r.loss().ok_or(MetricsError::NothingOffered(i)))
        .collect::<Result<Vec<_>, _>>()?;
    let n = losses.len();
    let mean = losses.iter().sum::<f64>() / n as f64;
    let ci_halfwidth = (n >= 2).then(|| {
        let var = losses.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Z_95 * (var / n as f64).sqrt()
    });
    let rejected: u64 = results.iter().map(|r| r.rejected).sum();
    let deadlock: u64 = results.iter().map(|r| r.deadlock_rejected).sum();
    Ok(LossEstimate {
        mean_loss: mean,
        ci_halfwidth,
        replications: n,
        deadlock_fraction: if rejected == 0 { 0.0 } else { deadlock as f64 / rejected as f64 },
        offered: results.iter().map(|r| r.offered).sum(),
    })
}

/// Every capacity multiplied by `alpha`; delays untouched.
pub fn scale_topology(topology: &Topology, alpha: f64) -> Result<Topology, MetricsError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(MetricsError::BadScale(alpha));
    }
    let pairs = topology
        .pairs()
        .iter()
        .map(|p| LspPairSpec {
            max_up: p.max_up * alpha,
            max_down: p.max_down * alpha,
            ..*p
        })
        .collect();
    Ok(Topology::from_specs(pairs)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReductionOptions {
    pub lower: f64,
    pub upper: f64,
    /// Relative loss-matching tolerance.
    pub tol: f64,
    /// Stop once the alpha bracket is narrower than this.
    pub min_width: f64,
    pub replications: u64,
    /// Replications double on a monotonicity violation, up to this cap.
    pub max_replications: u64,
    pub master_seed: u64,
}

impl Default for ReductionOptions {
    fn default() -> Self {
        Self {
            lower: 0.5,
            upper: 1.0,
            tol: 0.1,
            min_width: 1e-3,
            replications: 10,
            max_replications: 80,
            master_seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionEstimate {
    pub alpha_star: f64,
    /// `1 - alpha_star`.
    pub z_value: f64,
    pub target_loss: f64,
    /// Test policy loss at `alpha_star`.
    pub matched_loss: f64,
    pub reference: LossEstimate,
    pub iterations: u32,
    pub replications: u64,
}

impl ReductionEstimate {
    pub fn z_percent(&self) -> f64 {
        100.0 * self.z_value
    }
}

/// Loss of `policy` on `scenario` with every capacity scaled by `alpha`.
pub fn loss_at_scale(
    scenario: &Scenario,
    policy: PolicyKind,
    alpha: f64,
    replications: u64,
    master_seed: u64,
) -> Result<LossEstimate, MetricsError> {
    let scaled = Scenario {
        topology: scale_topology(&scenario.topology, alpha)?,
        ..scenario.clone().with_policy(policy)
    };
    loss_probability(&run_replications(&scaled, replications, master_seed)?)
}

/// Capacity fraction `1 - alpha` that `test` can give up while matching the
/// loss `reference` achieves at full capacity.
///
/// Bisection over `alpha`, all evaluations sharing the master seed so both
/// policies and every scale see the same traffic.
pub fn equal_loss_reduction(
    scenario: &Scenario,
    reference: PolicyKind,
    test: PolicyKind,
    opts: &ReductionOptions,
) -> Result<ReductionEstimate, MetricsError> {
    if !(opts.lower > 0.0 && opts.lower < opts.upper && opts.upper <= 1.0) {
        return Err(MetricsError::BadBounds {
            lower: opts.lower,
            upper: opts.upper,
        });
    }
    let mut replications = opts.replications.max(2);
    loop {
        match bisect(scenario, reference, test, opts, replications) {
            Err(MetricsError::NonMonotone { .. }) if replications * 2 <= opts.max_replications => {
                replications *= 2;
            }
            other => return other,
        }
    }
}

fn bisect(
    scenario: &Scenario,
    reference: PolicyKind,
    test: PolicyKind,
    opts: &ReductionOptions,
    replications: u64,
) -> Result<ReductionEstimate, MetricsError> {
    let eval = |policy, alpha| loss_at_scale(scenario, policy, alpha, replications, opts.master_seed);
    let ref_est = eval(reference, opts.upper)?;
    let target = ref_est.mean_loss;
    let close = |loss: f64| (loss - target).abs() <= opts.tol * target;

    let mut grid: Vec<(f64, LossEstimate)> = Vec::new();
    let check = |grid: &mut Vec<(f64, LossEstimate)>, alpha: f64, est: LossEstimate| {
        for (a, e) in grid.iter() {
            let (lo, hi) = if *a < alpha { ((*a, e), (alpha, &est)) } else { ((alpha, &est), (*a, e)) };
            let slack = lo.1.ci_halfwidth.unwrap_or(0.0) + hi.1.ci_halfwidth.unwrap_or(0.0);
            if hi.1.mean_loss > lo.1.mean_loss + slack {
                return Err(MetricsError::NonMonotone {
                    alpha_lo: lo.0,
                    loss_lo: lo.1.mean_loss,
                    alpha_hi: hi.0,
                    loss_hi: hi.1.mean_loss,
                    replications,
                });
            }
        }
        grid.push((alpha, est));
        Ok(())
    };

    let at_upper = if test == reference { ref_est } else { eval(test, opts.upper)? };
    check(&mut grid, opts.upper, at_upper)?;
    let done = |alpha: f64, est: LossEstimate, iterations| ReductionEstimate {
        alpha_star: alpha,
        z_value: 1.0 - alpha,
        target_loss: target,
        matched_loss: est.mean_loss,
        reference: ref_est,
        iterations,
        replications,
    };
    if at_upper.mean_loss >= target || target == 0.0 {
        // not better at full capacity: no reduction
        return Ok(done(opts.upper, at_upper, 0));
    }

    let at_lower = eval(test, opts.lower)?;
    check(&mut grid, opts.lower, at_lower)?;
    if at_lower.mean_loss <= target {
        return Err(MetricsError::NotBracketed {
            policy: test,
            lower: opts.lower,
            loss: at_lower.mean_loss,
            target,
        });
    }

    // invariant: loss(lo) > target >= loss(hi)
    let (mut lo, mut hi, mut hi_est) = (opts.lower, opts.upper, at_upper);
    let mut iterations = 0;
    while hi - lo >= opts.min_width {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let est = eval(test, mid)?;
        check(&mut grid, mid, est)?;
        if est.mean_loss <= target {
            hi = mid;
            hi_est = est;
        } else {
            lo = mid;
        }
        if close(est.mean_loss) {
            return Ok(done(mid, est, iterations));
        }
    }
    Ok(done(hi, hi_est, iterations))
}
