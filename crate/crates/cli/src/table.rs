//! Delimiter-separated result tables.
//!
//! Column order is fixed:
//!
//! | column | meaning |
//! |---|---|
//! | `sweep_param` | swept parameter path, `none` for a single point |
//! | `sweep_value` | value of the swept parameter |
//! | `policy` | policy name, or `<test>-vs-<reference>` for reduction rows |
//! | `mean_loss` | mean request loss over replications (reference loss on reduction rows) |
//! | `ci_halfwidth` | 95% half-width, empty with one replication |
//! | `deadlock_fraction` | deadlock rejections over all rejections |
//! | `offered` | requests counted across replications |
//! | `replications` | replications per estimate |
//! | `alpha_star` | matched capacity scale, reduction rows only |
//! | `z_percent` | capacity reduction `100 (1 - alpha_star)`, reduction rows only |
//!
//! Floats are written in shortest round-trip form, so reading a table back
//! gives the exact values that were written.

use std::io::{Read, Write};

use lsppair_core::{LossEstimate, PolicyKind, ReductionEstimate};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const COLUMNS: [&str; 10] = [
    "sweep_param",
    "sweep_value",
    "policy",
    "mean_loss",
    "ci_halfwidth",
    "deadlock_fraction",
    "offered",
    "replications",
    "alpha_star",
    "z_percent",
];

pub const NO_SWEEP: &str = "none";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep_param: String,
    pub sweep_value: String,
    pub policy: String,
    pub mean_loss: f64,
    pub ci_halfwidth: Option<f64>,
    pub deadlock_fraction: f64,
    pub offered: u64,
    pub replications: u64,
    pub alpha_star: Option<f64>,
    pub z_percent: Option<f64>,
}

impl ResultRow {
    pub fn loss(param: &str, value: &str, policy: PolicyKind, est: &LossEstimate) -> Self {
        Self {
            sweep_param: param.to_string(),
            sweep_value: value.to_string(),
            policy: policy.to_string(),
            mean_loss: est.mean_loss,
            ci_halfwidth: est.ci_halfwidth,
            deadlock_fraction: est.deadlock_fraction,
            offered: est.offered,
            replications: est.replications as u64,
            alpha_star: None,
            z_percent: None,
        }
    }

    pub fn reduction(
        param: &str,
        value: &str,
        reference: PolicyKind,
        test: PolicyKind,
        est: &ReductionEstimate,
    ) -> Self {
        Self {
            sweep_param: param.to_string(),
            sweep_value: value.to_string(),
            policy: format!("{test}-vs-{reference}"),
            mean_loss: est.target_loss,
            ci_halfwidth: est.reference.ci_halfwidth,
            deadlock_fraction: est.reference.deadlock_fraction,
            offered: est.reference.offered,
            replications: est.replications,
            alpha_star: Some(est.alpha_star),
            z_percent: Some(est.z_percent()),
        }
    }

    pub fn is_reduction(&self) -> bool {
        self.z_percent.is_some()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn new(rows: Vec<ResultRow>) -> Self {
        Self { rows }
    }

    pub fn write_to<W: Write>(&self, out: W) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(out);
        if self.rows.is_empty() {
            w.write_record(COLUMNS).map_err(runtime)?;
        }
        for row in &self.rows {
            w.serialize(row).map_err(runtime)?;
        }
        w.flush().map_err(|e| CliError::Runtime(e.to_string()))
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self, CliError> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers().map_err(validation)?;
        if headers.iter().ne(COLUMNS) {
            return Err(CliError::Validation(format!(
                "unexpected table header: {}",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let rows = r
            .deserialize()
            .collect::<Result<Vec<ResultRow>, _>>()
            .map_err(validation)?;
        Ok(Self { rows })
    }

    /// Rows for one policy, in table order.
    pub fn for_policy<'a>(&'a self, policy: &'a str) -> impl Iterator<Item = &'a ResultRow> + 'a {
        self.rows.iter().filter(move |r| r.policy == policy)
    }

    /// Whitespace-separated blocks, one per policy, separated by two blank
    /// lines so gnuplot can address them with `index`.
    pub fn gnuplot(&self) -> String {
        let mut policies: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !policies.contains(&r.policy.as_str()) {
                policies.push(&r.policy);
            }
        }
        let mut out = String::new();
        for (i, p) in policies.iter().enumerate() {
            if i > 0 {
                out.push_str("\n\n");
            }
            out.push_str(&format!("# policy {p}\n# sweep_value mean_loss ci_halfwidth z_percent\n"));
            for r in self.for_policy(p) {
                let opt = |v: Option<f64>| v.map_or("NaN".to_string(), |v| v.to_string());
                out.push_str(&format!(
                    "{} {} {} {}\n",
                    r.sweep_value,
                    r.mean_loss,
                    opt(r.ci_halfwidth),
                    opt(r.z_percent)
                ));
            }
        }
        out
    }

    /// Fixed-width summary for terminals.
    pub fn summary(&self) -> String {
        let mut out = format!(
            "{:<24} {:>10} {:<22} {:>10} {:>10} {:>9} {:>8}\n",
            "param", "value", "policy", "loss", "ci95", "deadlock", "Z%"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:<24} {:>10} {:<22} {:>10.6} {:>10} {:>9.3} {:>8}\n",
                r.sweep_param,
                r.sweep_value,
                r.policy,
                r.mean_loss,
                r.ci_halfwidth.map_or("-".into(), |v| format!("{v:.6}")),
                r.deadlock_fraction,
                r.z_percent.map_or("-".into(), |v| format!("{v:.2}")),
            ));
        }
        out
    }
}

fn runtime(e: csv::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

fn validation(e: csv::Error) -> CliError {
    CliError::Validation(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(policy: &str, loss: f64, ci: Option<f64>, z: Option<f64>) -> ResultRow {
        ResultRow {
            sweep_param: "traffic.mean_interarrival".into(),
            sweep_value: "0.8".into(),
            policy: policy.into(),
            mean_loss: loss,
            ci_halfwidth: ci,
            deadlock_fraction: 0.25,
            offered: 1_800_000,
            replications: 10,
            alpha_star: z.map(|z| 1.0 - z / 100.0),
            z_percent: z,
        }
    }

    #[test]
    fn header_order() {
        let t = ResultTable::new(vec![row("method-a", 0.1, Some(0.01), None)]);
        let csv = t.to_csv_string();
        assert_eq!(csv.lines().next().unwrap(), COLUMNS.join(","));
        assert_eq!(
            ResultTable::default().to_csv_string().trim_end(),
            COLUMNS.join(",")
        );
    }

    #[test]
    fn round_trip_is_exact() {
        let t = ResultTable::new(vec![
            row("method-a", 0.1 + 0.2, Some(1.0 / 3.0), None),
            row("method-b", 1e-17, None, None),
            row("method-b-vs-method-a", 0.034_412_345_678_9, Some(0.0007), Some(7.03125)),
        ]);
        let back = ResultTable::read_from(t.to_csv_string().as_bytes()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn rejects_foreign_header() {
        assert!(ResultTable::read_from("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn gnuplot_blocks_per_policy() {
        let t = ResultTable::new(vec![
            row("method-a", 0.1, Some(0.01), None),
            row("method-b", 0.05, None, None),
        ]);
        let g = t.gnuplot();
        assert_eq!(g.matches("# policy").count(), 2);
        assert!(g.contains("\n\n\n# policy method-b"));
        assert!(g.contains("0.8 0.05 NaN NaN"));
    }
}
