//! Orchestration shared by `run`, `demo`, and `certify`.

use std::fmt;

use actid_core::identify::{reveal, IdentificationReport, RevealParams};
use actid_core::prox::{run_prox_sequence, MuSchedule, ProxRun, Schedule};
use actid_core::CompositeProblem;

use crate::problemfile::FileError;

#[derive(Debug)]
pub enum CliError {
    /// Bad input: problem files, flags, unknown names. Exit code 2.
    Usage(String),
    /// A numerical routine failed. Exit code 3.
    Numerical(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<FileError> for CliError {
    fn from(e: FileError) -> Self {
        CliError::Usage(e.to_string())
    }
}

pub struct RunOutput {
    pub run: ProxRun,
    pub report: IdentificationReport,
    pub rendered: String,
}

/// Solve the prox sequence, assess it against the canonical decomposition,
/// and render trace plus summary.
pub fn execute_run(
    problem: &CompositeProblem,
    schedule: &Schedule,
    mu: &MuSchedule,
    params: &RevealParams,
    pretty: bool,
) -> Result<RunOutput, CliError> {
    let decomposition = problem
        .outer()
        .decomposition()
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let run = run_prox_sequence(problem, schedule, mu)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let records = actid_core::IterateRecord::from_run(&run);
    let report = reveal(problem, &decomposition, &records, params)
        .map_err(|e| CliError::Numerical(e.to_string()))?;

    let mut rendered = crate::trace::render_trace(&report, pretty);
    rendered.push_str(&crate::trace::render_summary(
        problem,
        &report,
        params,
        run.hypothesis_warning,
    ));
    Ok(RunOutput {
        run,
        report,
        rendered,
    })
}
