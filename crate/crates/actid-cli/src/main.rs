use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use actid_core::identify::{certify_piece, certify_sufficient_index, RevealParams};

use actid_cli::demo::run_demo;
use actid_cli::problemfile::parse_problem_file;
use actid_cli::runner::{execute_run, CliError};
use actid_cli::trace::{format_sci, format_vector, render_certificate};

/// Active-set identification for composite minimization.
#[derive(Parser)]
#[command(name = "actid", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a prox-linear identification sequence from a problem file.
    Run {
        file: PathBuf,
        /// Distance threshold for revealing a piece.
        #[arg(long, default_value_t = 0.05)]
        eps_reveal: f64,
        /// Residual threshold for the first-order gates.
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
        /// Proximal parameter; overrides the problem file.
        #[arg(long)]
        mu: Option<f64>,
        /// Number of schedule steps; overrides the problem file.
        #[arg(long)]
        steps: Option<usize>,
        /// Trailing iterates that must agree for the summary.
        #[arg(long, default_value_t = 5)]
        tail: usize,
        /// Write the trace here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Render aligned columns instead of TSV.
        #[arg(long)]
        pretty: bool,
    },
    /// Run a built-in demonstration (two-circle, abs-1d, l1-2d, eig).
    Demo {
        name: String,
        /// Matrix order for the eig demo.
        k: Option<usize>,
        #[arg(long, default_value_t = 0.05)]
        eps_reveal: f64,
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
        #[arg(long, default_value_t = 5)]
        tail: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        pretty: bool,
    },
    /// Certify an index set or a graph piece at the reference point.
    Certify {
        file: PathBuf,
        /// Comma-separated 1-based inequality indices, e.g. "2" or "1,2";
        /// an empty string is the empty index set.
        #[arg(long = "J")]
        j_set: Option<String>,
        /// A piece id from the canonical decomposition, e.g. G3.
        #[arg(long)]
        piece: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok((text, out)) => {
            let written = match out {
                Some(path) => fs::write(&path, &text)
                    .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display()))),
                None => {
                    print!("{text}");
                    Ok(())
                }
            };
            match written {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(e.exit_code())
                }
            }
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<(String, Option<PathBuf>), CliError> {
    match cmd {
        Cmd::Run {
            file,
            eps_reveal,
            delta,
            mu,
            steps,
            tail,
            out,
            pretty,
        } => {
            let params = reveal_params(eps_reveal, delta, tail)?;
            let text = cmd_run(&file, mu, steps, &params, pretty)?;
            Ok((text, out))
        }
        Cmd::Demo {
            name,
            k,
            eps_reveal,
            delta,
            tail,
            out,
            pretty,
        } => {
            let params = reveal_params(eps_reveal, delta, tail)?;
            let text = run_demo(&name, k, &params, pretty)?;
            Ok((text, out))
        }
        Cmd::Certify { file, j_set, piece } => {
            let text = cmd_certify(&file, j_set, piece)?;
            Ok((text, None))
        }
    }
}

fn reveal_params(eps: f64, delta: f64, tail: usize) -> Result<RevealParams, CliError> {
    RevealParams::new(eps, delta, tail).map_err(|e| CliError::Usage(e.to_string()))
}

fn read_problem(path: &PathBuf) -> Result<actid_cli::problemfile::ProblemFile, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    parse_problem_file(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn cmd_run(
    path: &PathBuf,
    mu: Option<f64>,
    steps: Option<usize>,
    params: &RevealParams,
    pretty: bool,
) -> Result<String, CliError> {
    let mut pf = read_problem(path)?;
    // flag overrides for the schedule
    let mut spec = pf.schedule.clone().unwrap_or_default();
    if let Some(m) = mu {
        spec.mu = m;
    }
    if let Some(s) = steps {
        spec.steps = s;
    }
    pf.schedule = Some(spec);

    let (problem, schedule) = pf.build()?;
    let (schedule, mu_schedule) = schedule.expect("schedule was just set");
    let out = execute_run(&problem, &schedule, &mu_schedule, params, pretty)?;
    Ok(out.rendered)
}

fn cmd_certify(
    path: &PathBuf,
    j_set: Option<String>,
    piece: Option<String>,
) -> Result<String, CliError> {
    let pf = read_problem(path)?;
    let (problem, _) = pf.build()?;
    let x_bar = problem
        .reference()
        .ok_or_else(|| CliError::Usage("certification needs a [reference] section".to_string()))?
        .to_vec();

    match (j_set, piece) {
        (Some(j_text), None) => {
            let j = parse_index_set(&j_text)?;
            let verdict = certify_sufficient_index(&problem, &j, 1e-8)
                .map_err(|e| CliError::Numerical(e.to_string()))?;
            let mut text = String::new();
            let j_fmt: Vec<String> = verdict.j_set.iter().map(|j| j.to_string()).collect();
            text.push_str(&format!("J = {{{}}}\n", j_fmt.join(",")));
            text.push_str(&format!(
                "contained in active set: {}\n",
                verdict.contained_in_active
            ));
            text.push_str(&format!(
                "min-norm stationarity value = {}\n",
                format_sci(verdict.multiplier_value)
            ));
            text.push_str(&format!("sufficient: {}\n", verdict.sufficient));
            if verdict.sufficient {
                text.push_str(&format!(
                    "witness: lambda={} mu={}\n",
                    format_vector(&verdict.lambda),
                    format_vector(&verdict.mu)
                ));
            }
            Ok(text)
        }
        (None, Some(id)) => {
            let decomposition = problem
                .outer()
                .decomposition()
                .map_err(|e| CliError::Numerical(e.to_string()))?;
            let piece = decomposition.piece_by_id(&id).ok_or_else(|| {
                CliError::Usage(format!(
                    "no piece `{id}`; available: {}",
                    decomposition.piece_ids().join(" ")
                ))
            })?;
            let cert = certify_piece(&problem, piece, &x_bar)
                .map_err(|e| CliError::Numerical(e.to_string()))?;
            Ok(format!("{}\n", render_certificate(&cert)))
        }
        _ => Err(CliError::Usage(
            "certify needs exactly one of --J or --piece".to_string(),
        )),
    }
}

fn parse_index_set(text: &str) -> Result<Vec<usize>, CliError> {
    let mut out = Vec::new();
    for tok in text.split(',') {
        let tok = tok.trim();
        if tok.is_empty() {
            continue;
        }
        let j: usize = tok
            .parse()
            .map_err(|_| CliError::Usage(format!("invalid index `{tok}` in --J")))?;
        if j == 0 {
            return Err(CliError::Usage("indices in --J are 1-based".to_string()));
        }
        out.push(j);
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}
