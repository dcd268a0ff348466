//! Presets reproducing the evaluation figures.
//!
//! All presets use LSP pairs of 20/20 bandwidth units (unless the figure
//! varies capacity), a holding time of 6 s and Gaussian sizes with
//! `sigma_ratio = 0.1`. The mean inter-arrival time `r` is not given with the
//! figures. Each preset uses the heaviest load on the grid
//! `{0.4, 0.5, 0.6, 0.8, 1.0, 1.2, 1.5, 2.0}` at which the reference policy's
//! loss at the middle sweep point is at most `1e-1` (the two fig3
//! presets share one `r`). `--interarrival` replaces it.

use clap::ValueEnum;
use lsppair_core::engine::DEFAULT_AUDIT_INTERVAL;
use lsppair_core::metrics::loss_at_scale;
use lsppair_core::traffic::DEFAULT_SIGMA_RATIO;
use lsppair_core::{
    equal_loss_reduction, ArrivalProcess, DelayClassMix, DemandPattern, PolicyKind, ReductionOptions, Scenario, Seeds,
    Topology,
};

use crate::error::CliError;
use crate::scenario_file::{DEFAULT_MASTER_SEED, DEFAULT_REPLICATIONS};
use crate::table::{ResultRow, ResultTable};

pub const PAIR_CAPACITY: f64 = 20.0;
pub const HOLDING_TIME: f64 = 6.0;
pub const FIG3_INTERARRIVAL: f64 = 1.0;
pub const FIG3_1_SIZES: [f64; 6] = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
pub const FIG3_2_SIZES: [f64; 8] = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
/// Load grid for Z_b; reference losses run from about 0.13 down to 0.008.
pub const FIG4_INTERARRIVALS: [f64; 5] = [0.5, 0.6, 0.8, 1.0, 1.2];
pub const FIG4_BIG: f64 = 4.0;
pub const FIG5_INTERARRIVAL: f64 = 0.6;
pub const FIG5_TOTAL: f64 = 40.0;
pub const FIG5_SPLITS: [f64; 9] = [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0];
pub const FIG6_INTERARRIVAL: f64 = 0.4;
pub const FIG6_PAIR_COUNTS: [usize; 4] = [2, 3, 4, 5];
pub const FIG7_INTERARRIVAL: f64 = 1.2;
pub const FIG7_DELAYS: (f64, f64) = (0.1, 0.3);
pub const FIG7_PATTERN: (f64, f64) = (4.0, 2.0);
/// Relative loss-matching tolerance used by the reduction presets.
pub const FIGURE_MATCH_TOL: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FigureId {
    #[value(name = "fig3-1")]
    Fig3_1,
    #[value(name = "fig3-2")]
    Fig3_2,
    #[value(name = "fig4")]
    Fig4,
    #[value(name = "fig5")]
    Fig5,
    #[value(name = "fig6")]
    Fig6,
    #[value(name = "fig7-1")]
    Fig7_1,
    #[value(name = "fig7-2")]
    Fig7_2,
}

impl FigureId {
    pub fn name(&self) -> &'static str {
        match self {
            FigureId::Fig3_1 => "fig3-1",
            FigureId::Fig3_2 => "fig3-2",
            FigureId::Fig4 => "fig4",
            FigureId::Fig5 => "fig5",
            FigureId::Fig6 => "fig6",
            FigureId::Fig7_1 => "fig7-1",
            FigureId::Fig7_2 => "fig7-2",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FigureOverrides {
    pub mean_interarrival: Option<f64>,
    pub total_requests: Option<u64>,
    pub replications: Option<u64>,
    pub master_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Comparison {
    Loss(Vec<PolicyKind>),
    Reduction { reference: PolicyKind, test: PolicyKind },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigurePoint {
    pub value: String,
    /// Policy field is overwritten per compared policy.
    pub scenario: Scenario,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigurePlan {
    pub id: FigureId,
    pub sweep_param: &'static str,
    pub points: Vec<FigurePoint>,
    pub comparison: Comparison,
    pub replications: u64,
    pub master_seed: u64,
    pub reduction: ReductionOptions,
}

fn two_pairs(delays: (f64, f64)) -> Topology {
    Topology::new([
        (PAIR_CAPACITY, PAIR_CAPACITY, delays.0),
        (PAIR_CAPACITY, PAIR_CAPACITY, delays.1),
    ])
    .expect("preset topology")
}

fn scenario(
    topology: Topology,
    pattern: DemandPattern,
    r: f64,
    mix: Option<DelayClassMix>,
    ov: &FigureOverrides,
) -> Result<Scenario, CliError> {
    let arrivals =
        ArrivalProcess::new(r, HOLDING_TIME).map_err(|e| CliError::Validation(format!("--interarrival: {e}")))?;
    let mut s = Scenario::new(topology, PolicyKind::MethodA, pattern, arrivals, mix);
    if let Some(total) = ov.total_requests {
        s = s.with_requests(total);
    }
    s.audit_interval = DEFAULT_AUDIT_INTERVAL;
    s.seeds = Seeds::for_replication(ov.master_seed.unwrap_or(DEFAULT_MASTER_SEED), 0);
    Ok(s)
}

fn label(v: f64) -> String {
    v.to_string()
}

fn anti_phase(big: f64, small: f64) -> DemandPattern {
    DemandPattern::anti_phase(big, small, DEFAULT_SIGMA_RATIO).expect("preset pattern")
}

fn fig7_mix(s: f64) -> DelayClassMix {
    DelayClassMix::new(s, FIG7_DELAYS.0, FIG7_DELAYS.1).expect("preset mix")
}

fn short_fractions() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

/// Builds the preset sweep for `id`.
pub fn plan(id: FigureId, ov: &FigureOverrides) -> Result<FigurePlan, CliError> {
    use PolicyKind::*;
    let r_or = |default: f64| ov.mean_interarrival.unwrap_or(default);
    let no_delay = (0.0, 0.0);
    let mut points = Vec::new();
    let (sweep_param, comparison) = match id {
        FigureId::Fig3_1 => {
            for x in FIG3_1_SIZES {
                let pattern = DemandPattern::symmetric(x, DEFAULT_SIGMA_RATIO).expect("preset pattern");
                points.push(FigurePoint {
                    value: label(x),
                    scenario: scenario(two_pairs(no_delay), pattern, r_or(FIG3_INTERARRIVAL), None, ov)?,
                });
            }
            ("traffic.pattern.x", Comparison::Loss(vec![MethodA, MethodB]))
        }
        FigureId::Fig3_2 => {
            for y in FIG3_2_SIZES {
                points.push(FigurePoint {
                    value: label(y),
                    scenario: scenario(two_pairs(no_delay), anti_phase(y, 1.0), r_or(FIG3_INTERARRIVAL), None, ov)?,
                });
            }
            ("traffic.pattern.y", Comparison::Loss(vec![MethodA, MethodB]))
        }
        FigureId::Fig4 => {
            let loads: Vec<f64> = match ov.mean_interarrival {
                Some(r) => vec![r],
                None => FIG4_INTERARRIVALS.to_vec(),
            };
            for r in loads {
                points.push(FigurePoint {
                    value: label(r),
                    scenario: scenario(two_pairs(no_delay), anti_phase(FIG4_BIG, 1.0), r, None, ov)?,
                });
            }
            (
                "traffic.mean_interarrival",
                Comparison::Reduction {
                    reference: MethodA,
                    test: MethodB,
                },
            )
        }
        FigureId::Fig5 => {
            for u1 in FIG5_SPLITS {
                let u2 = FIG5_TOTAL - u1;
                let topology = Topology::new([(u1, u1, 0.0), (u2, u2, 0.0)]).expect("preset topology");
                points.push(FigurePoint {
                    value: label(u1),
                    scenario: scenario(topology, anti_phase(4.0, 1.0), r_or(FIG5_INTERARRIVAL), None, ov)?,
                });
            }
            ("topology.0.max_up", Comparison::Loss(vec![MethodA, MethodB]))
        }
        FigureId::Fig6 => {
            for n in FIG6_PAIR_COUNTS {
                let topology = Topology::uniform(n, PAIR_CAPACITY, PAIR_CAPACITY, 0.0).expect("preset topology");
                points.push(FigurePoint {
                    value: n.to_string(),
                    scenario: scenario(topology, anti_phase(4.0, 1.0), r_or(FIG6_INTERARRIVAL), None, ov)?,
                });
            }
            ("topology.pairs", Comparison::Loss(vec![MethodA, MethodB]))
        }
        FigureId::Fig7_1 | FigureId::Fig7_2 => {
            for s in short_fractions() {
                points.push(FigurePoint {
                    value: label(s),
                    scenario: scenario(
                        two_pairs(FIG7_DELAYS),
                        anti_phase(FIG7_PATTERN.0, FIG7_PATTERN.1),
                        r_or(FIG7_INTERARRIVAL),
                        Some(fig7_mix(s)),
                        ov,
                    )?,
                });
            }
            let cmp = if id == FigureId::Fig7_1 {
                Comparison::Loss(vec![MethodB, MethodC])
            } else {
                Comparison::Reduction {
                    reference: MethodB,
                    test: MethodC,
                }
            };
            ("traffic.delay_mix.short_fraction", cmp)
        }
    };
    let replications = ov.replications.unwrap_or(DEFAULT_REPLICATIONS);
    if replications == 0 {
        return Err(CliError::Validation("--replications must be at least 1".into()));
    }
    let master_seed = ov.master_seed.unwrap_or(DEFAULT_MASTER_SEED);
    Ok(FigurePlan {
        id,
        sweep_param,
        points,
        comparison,
        replications,
        master_seed,
        reduction: ReductionOptions {
            tol: FIGURE_MATCH_TOL,
            replications: replications.max(2),
            max_replications: (replications.max(2) * 8).max(80),
            master_seed,
            ..ReductionOptions::default()
        },
    })
}

/// Executes a plan point by point; replications inside a point run on the
/// current rayon pool.
pub fn run_plan(plan: &FigurePlan) -> Result<ResultTable, CliError> {
    let mut rows = Vec::new();
    for point in &plan.points {
        match &plan.comparison {
            Comparison::Loss(policies) => {
                for &policy in policies {
                    let est = loss_at_scale(&point.scenario, policy, 1.0, plan.replications, plan.master_seed)?;
                    rows.push(ResultRow::loss(plan.sweep_param, &point.value, policy, &est));
                }
            }
            Comparison::Reduction { reference, test } => {
                let est = equal_loss_reduction(&point.scenario, *reference, *test, &plan.reduction)?;
                rows.push(ResultRow::reduction(plan.sweep_param, &point.value, *reference, *test, &est));
            }
        }
    }
    Ok(ResultTable::new(rows))
}

pub fn run_figure(id: FigureId, ov: &FigureOverrides) -> Result<ResultTable, CliError> {
    run_plan(&plan(id, ov)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use lsppair_core::Duplex;

    fn preset(id: FigureId) -> FigurePlan {
        plan(id, &FigureOverrides::default()).unwrap()
    }

    fn assert_two_20_pairs(s: &Scenario) {
        assert_eq!(s.topology.len(), 2);
        for p in s.topology.pairs() {
            assert_eq!((p.max_up, p.max_down), (20.0, 20.0));
        }
        assert_eq!(s.arrivals.holding_time, 6.0);
    }

    #[test]
    fn fig3_presets() {
        let p = preset(FigureId::Fig3_1);
        for pt in &p.points {
            assert_two_20_pairs(&pt.scenario);
            let x: f64 = pt.value.parse().unwrap();
            assert_eq!(pt.scenario.pattern.entries(), &[Duplex::new(x, x)]);
        }
        let p = preset(FigureId::Fig3_2);
        assert_eq!(p.comparison, Comparison::Loss(vec![PolicyKind::MethodA, PolicyKind::MethodB]));
        for pt in &p.points {
            assert_two_20_pairs(&pt.scenario);
            let y: f64 = pt.value.parse().unwrap();
            assert_eq!(pt.scenario.pattern.entries(), &[Duplex::new(y, 1.0), Duplex::new(1.0, y)]);
            assert!(pt.scenario.delay_mix.is_none());
        }
    }

    #[test]
    fn fig4_preset() {
        let p = preset(FigureId::Fig4);
        assert_eq!(p.points.len(), FIG4_INTERARRIVALS.len());
        assert_eq!(
            p.comparison,
            Comparison::Reduction {
                reference: PolicyKind::MethodA,
                test: PolicyKind::MethodB
            }
        );
        for pt in &p.points {
            assert_two_20_pairs(&pt.scenario);
            assert_eq!(pt.scenario.pattern.entries(), &[Duplex::new(4.0, 1.0), Duplex::new(1.0, 4.0)]);
        }
        let one = plan(FigureId::Fig4, &FigureOverrides { mean_interarrival: Some(0.9), ..Default::default() }).unwrap();
        assert_eq!(one.points.len(), 1);
        assert_eq!(one.points[0].scenario.arrivals.mean_interarrival, 0.9);
    }

    #[test]
    fn fig5_preset_keeps_totals_and_corner() {
        let p = preset(FigureId::Fig5);
        for pt in &p.points {
            let total = pt.scenario.topology.total_capacity();
            assert_eq!(total, Duplex::new(40.0, 40.0));
            assert_eq!(pt.scenario.arrivals.holding_time, 6.0);
        }
        let corner = p.points.iter().find(|pt| pt.value == "40").unwrap();
        assert_eq!(corner.scenario.topology.pair(0).capacity(), Duplex::new(40.0, 40.0));
        assert_eq!(corner.scenario.topology.pair(1).capacity(), Duplex::ZERO);
        corner.scenario.clone().with_policy(PolicyKind::MethodB).validate().unwrap();
    }

    #[test]
    fn fig6_preset() {
        let p = preset(FigureId::Fig6);
        let ns: Vec<usize> = p.points.iter().map(|pt| pt.scenario.topology.len()).collect();
        assert_eq!(ns, vec![2, 3, 4, 5]);
        for pt in &p.points {
            for pair in pt.scenario.topology.pairs() {
                assert_eq!(pair.capacity(), Duplex::new(20.0, 20.0));
            }
            assert_eq!(pt.scenario.pattern.entries(), &[Duplex::new(4.0, 1.0), Duplex::new(1.0, 4.0)]);
            assert_eq!(pt.scenario.arrivals.holding_time, 6.0);
        }
    }

    #[test]
    fn fig7_presets() {
        for id in [FigureId::Fig7_1, FigureId::Fig7_2] {
            let p = preset(id);
            assert_eq!(p.points.len(), 11);
            for (i, pt) in p.points.iter().enumerate() {
                let s = &pt.scenario;
                assert_two_20_pairs(s);
                assert_eq!(s.topology.pair(0).delay, 0.1);
                assert_eq!(s.topology.pair(1).delay, 0.3);
                assert_eq!(s.pattern.entries(), &[Duplex::new(4.0, 2.0), Duplex::new(2.0, 4.0)]);
                let mix = s.delay_mix.unwrap();
                assert_eq!((mix.short_permitted, mix.long_permitted), (0.1, 0.3));
                assert_eq!(mix.short_fraction, i as f64 / 10.0);
            }
        }
        assert_eq!(
            preset(FigureId::Fig7_1).comparison,
            Comparison::Loss(vec![PolicyKind::MethodB, PolicyKind::MethodC])
        );
    }

    #[test]
    fn overrides_apply() {
        let ov = FigureOverrides {
            mean_interarrival: Some(2.0),
            total_requests: Some(5000),
            replications: Some(3),
            master_seed: Some(42),
        };
        let p = plan(FigureId::Fig6, &ov).unwrap();
        assert_eq!(p.replications, 3);
        assert_eq!(p.master_seed, 42);
        let s = &p.points[0].scenario;
        assert_eq!(s.arrivals.mean_interarrival, 2.0);
        assert_eq!(s.total_requests, 5000);
        assert_eq!(s.warmup_requests, 1000);
        assert!(plan(FigureId::Fig6, &FigureOverrides { mean_interarrival: Some(-1.0), ..Default::default() }).is_err());
    }
}
