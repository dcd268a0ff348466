//! TOML scenario documents.
//!
//! ```toml
//! [[topology]]
//! max_up = 20
//! max_down = 20
//! delay = 0.1          # optional, seconds
//!
//! [policy]
//! kind = "method-b"    # or a list: ["method-a", "method-b"]
//!
//! [traffic]
//! pattern = [{ up = 4, down = 1 }, { up = 1, down = 4 }]
//! sigma_ratio = 0.1    # optional
//! mean_interarrival = 1.0
//! holding_time = 6
//!
//! [traffic.delay_mix]  # required for method-c
//! short_fraction = 0.7
//! short_permitted = 0.1
//! long_permitted = 0.3
//!
//! [run]                # every key optional
//! total_requests = 200000
//! warmup_requests = 20000
//! replications = 10
//! master_seed = 1
//! ```

use lsppair_core::engine::{default_warmup, DEFAULT_AUDIT_INTERVAL, DEFAULT_TOTAL_REQUESTS};
use lsppair_core::traffic::{TrafficError, DEFAULT_SIGMA_RATIO};
use lsppair_core::{
    ArrivalProcess, DelayClassMix, DemandPattern, Duplex, PolicyKind, Scenario, ScenarioError, Seeds, Topology,
};
use serde::Deserialize;

use crate::error::CliError;

pub const DEFAULT_REPLICATIONS: u64 = 10;
pub const DEFAULT_MASTER_SEED: u64 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub topology: Vec<PairEntry>,
    pub policy: PolicySection,
    pub traffic: TrafficSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairEntry {
    pub max_up: f64,
    pub max_down: f64,
    #[serde(default)]
    pub delay: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(PolicyKind),
    Many(Vec<PolicyKind>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    pub kind: OneOrMany,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficSection {
    pub pattern: Vec<PatternEntry>,
    #[serde(default = "default_sigma")]
    pub sigma_ratio: f64,
    pub mean_interarrival: f64,
    pub holding_time: f64,
    pub delay_mix: Option<DelayMixSection>,
}

fn default_sigma() -> f64 {
    DEFAULT_SIGMA_RATIO
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternEntry {
    pub up: f64,
    pub down: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayMixSection {
    pub short_fraction: f64,
    pub short_permitted: f64,
    pub long_permitted: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub total_requests: Option<u64>,
    pub warmup_requests: Option<u64>,
    pub replications: Option<u64>,
    pub master_seed: Option<u64>,
}

/// A validated scenario document: one [`Scenario`] per listed policy plus
/// replication settings.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedScenario {
    pub scenarios: Vec<Scenario>,
    pub replications: u64,
    pub master_seed: u64,
}

/// Line (1-based) where the dotted `path` is introduced in `source`, falling
/// back to the closest enclosing section.
pub fn locate(source: &str, path: &str) -> Option<usize> {
    let segments: Vec<&str> = path.split('.').filter(|s| s.parse::<usize>().is_err()).collect();
    for depth in (1..=segments.len()).rev() {
        let prefix = segments[..depth].join(".");
        let last = segments[depth - 1];
        let header = |l: &str| l == format!("[{prefix}]") || l == format!("[[{prefix}]]");
        let key = |l: &str| {
            l.strip_prefix(last)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        };
        let section_start = if depth > 1 {
            let parent = segments[..depth - 1].join(".");
            source
                .lines()
                .position(|l| {
                    let l = l.trim();
                    l == format!("[{parent}]") || l == format!("[[{parent}]]")
                })
                .unwrap_or(0)
        } else {
            0
        };
        for (i, line) in source.lines().enumerate() {
            let l = line.trim();
            if header(l) || (i >= section_start && key(l)) {
                return Some(i + 1);
            }
        }
    }
    None
}

fn anchored(origin: &str, source: &str, path: &str, message: impl std::fmt::Display) -> CliError {
    let line = locate(source, path).map(|l| format!(":{l}")).unwrap_or_default();
    CliError::Validation(format!("{origin}{line}: {path}: {message}"))
}

impl ScenarioFile {
    pub fn parse(source: &str, origin: &str) -> Result<Self, CliError> {
        toml::from_str(source).map_err(|e| CliError::Validation(parse_message(origin, source, &e)))
    }

    pub fn from_value(value: toml::Value, origin: &str) -> Result<Self, CliError> {
        value
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Validation(format!("{origin}: {}", e.message())))
    }

    pub fn policies(&self) -> Vec<PolicyKind> {
        match &self.policy.kind {
            OneOrMany::One(k) => vec![*k],
            OneOrMany::Many(ks) => ks.clone(),
        }
    }

    /// Builds and validates the scenarios; `source` is only used to anchor
    /// error messages to lines.
    pub fn into_loaded(self, origin: &str, source: &str) -> Result<LoadedScenario, CliError> {
        let err = |path: &str, msg: &dyn std::fmt::Display| anchored(origin, source, path, msg);

        let topology = Topology::new(self.topology.iter().map(|p| (p.max_up, p.max_down, p.delay)))
            .map_err(|e| err("topology", &e))?;
        let pattern = DemandPattern::new(
            self.traffic.pattern.iter().map(|e| Duplex::new(e.up, e.down)).collect(),
            self.traffic.sigma_ratio,
        )
        .map_err(|e| err("traffic.pattern", &e))?;
        let arrivals = ArrivalProcess::new(self.traffic.mean_interarrival, self.traffic.holding_time)
            .map_err(|e| match e {
                TrafficError::BadHoldingTime(_) => err("traffic.holding_time", &e),
                _ => err("traffic.mean_interarrival", &e),
            })?;
        let delay_mix = self
            .traffic
            .delay_mix
            .as_ref()
            .map(|m| DelayClassMix::new(m.short_fraction, m.short_permitted, m.long_permitted))
            .transpose()
            .map_err(|e| err("traffic.delay_mix", &e))?;

        let total = self.run.total_requests.unwrap_or(DEFAULT_TOTAL_REQUESTS);
        let warmup = self.run.warmup_requests.unwrap_or_else(|| default_warmup(total));
        let replications = self.run.replications.unwrap_or(DEFAULT_REPLICATIONS);
        if replications == 0 {
            return Err(err("run.replications", &"must be at least 1"));
        }
        let master_seed = self.run.master_seed.unwrap_or(DEFAULT_MASTER_SEED);

        let policies = self.policies();
        if policies.is_empty() {
            return Err(err("policy.kind", &"at least one policy is required"));
        }
        let mut scenarios = Vec::with_capacity(policies.len());
        for policy in policies {
            let scenario = Scenario {
                topology: topology.clone(),
                policy,
                pattern: pattern.clone(),
                arrivals,
                delay_mix,
                total_requests: total,
                warmup_requests: warmup,
                seeds: Seeds::for_replication(master_seed, 0),
                audit_interval: DEFAULT_AUDIT_INTERVAL,
                decision_log_limit: 0,
            };
            scenario.validate().map_err(|e| match e {
                ScenarioError::MissingDelayMix => err(
                    "traffic.delay_mix",
                    &format!("missing section [traffic.delay_mix], required by {policy}"),
                ),
                ScenarioError::WarmupTooLong { .. } => err("run.warmup_requests", &e),
                ScenarioError::Policy(_) => err("topology", &e),
                other => err("policy.kind", &other),
            })?;
            scenarios.push(scenario);
        }
        Ok(LoadedScenario {
            scenarios,
            replications,
            master_seed,
        })
    }
}

fn parse_message(origin: &str, source: &str, e: &toml::de::Error) -> String {
    match e.span() {
        Some(span) => {
            let line = source[..span.start.min(source.len())].matches('\n').count() + 1;
            format!("{origin}:{line}: {}", e.message())
        }
        None => format!("{origin}: {}", e.message()),
    }
}

/// Parses and validates a scenario document.
pub fn load_str(source: &str, origin: &str) -> Result<LoadedScenario, CliError> {
    ScenarioFile::parse(source, origin)?.into_loaded(origin, source)
}
