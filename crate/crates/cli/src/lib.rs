//! Scenario files, figure presets and result tables for the `lsppair`
//! command-line tool.

pub mod error;
pub mod figures;
pub mod runner;
pub mod scenario_file;
pub mod table;

pub use error::CliError;
pub use figures::{plan, run_figure, run_plan, FigureId, FigureOverrides};
pub use runner::{run_scenario, sweep, RunOverrides};
pub use table::{ResultRow, ResultTable};
