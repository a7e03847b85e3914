//! Built-in demonstrations with fixed, fully deterministic output.

use std::fmt::Write as _;

use actid_core::demos;
use actid_core::identify::{manifold_reveal, multiplier_set_vertices, RevealParams};
use actid_core::linalg::Matrix;
use actid_core::prox::MuSchedule;
use actid_core::spectral::SpectralPoint;

use crate::runner::{execute_run, CliError};
use crate::trace::{format_sci, format_vector};

pub const DEMO_NAMES: &[&str] = &["two-circle", "abs-1d", "l1-2d", "eig"];

pub fn run_demo(name: &str, k: Option<usize>, params: &RevealParams, pretty: bool) -> Result<String, CliError> {
    match name {
        "two-circle" => two_circle(params, pretty),
        "abs-1d" => abs_1d(params, pretty),
        "l1-2d" => l1_2d(params, pretty),
        "eig" => eig(k.unwrap_or(2)),
        other => Err(CliError::Usage(format!(
            "unknown demo `{other}`; available: {}",
            DEMO_NAMES.join(", ")
        ))),
    }
}

fn two_circle(params: &RevealParams, pretty: bool) -> Result<String, CliError> {
    let problem = demos::two_circle();
    let schedule = demos::two_circle_schedule(16);
    let out = execute_run(&problem, &schedule, &MuSchedule::Constant(1.0), params, pretty)?;
    let mut text = out.rendered;

    let vertices = multiplier_set_vertices(&problem, &[1.0, 0.0])
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let rendered: Vec<String> = vertices.iter().map(|v| format_vector(v)).collect();
    let _ = writeln!(text, "# multiplier vertices: {}", rendered.join(" "));
    Ok(text)
}

fn abs_1d(params: &RevealParams, pretty: bool) -> Result<String, CliError> {
    let problem = demos::abs_1d();
    let decomposition = problem
        .outer()
        .decomposition()
        .map_err(|e| CliError::Numerical(e.to_string()))?;

    let mut text = String::new();
    let _ = writeln!(
        text,
        "# decomposition of h=abs: {} pieces",
        decomposition.len()
    );
    for piece in decomposition.pieces() {
        let _ = writeln!(text, "# {}: {}", piece.id(), piece.describe());
    }

    let schedule = demos::abs_1d_schedule(12);
    let out = execute_run(&problem, &schedule, &MuSchedule::Constant(1.0), params, pretty)?;
    text.push_str(&out.rendered);

    let records = actid_core::IterateRecord::from_run(&out.run);
    let manifold = manifold_reveal(&problem, &records, params.tail_window, 1e-8)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let _ = writeln!(
        text,
        "# manifold {{0}} identified on tail: {}",
        manifold.tail_identified
    );
    Ok(text)
}

fn l1_2d(params: &RevealParams, pretty: bool) -> Result<String, CliError> {
    let problem = demos::l1_2d();
    let schedule = demos::l1_2d_schedule(12);
    let out = execute_run(&problem, &schedule, &MuSchedule::Constant(1.0), params, pretty)?;
    Ok(out.rendered)
}

/// The documented spectral-distance example: `X = I_k`, `y = (0.6, 0.4, 0..)`
/// against the piece with full multiplicity and rank one.
fn eig(k: usize) -> Result<String, CliError> {
    if k < 2 {
        return Err(CliError::Usage("eig demo needs k >= 2".to_string()));
    }
    let x_mat = Matrix::identity(k);
    let mut y_mat = Matrix::zeros(k, k);
    y_mat[(0, 0)] = 0.6;
    y_mat[(1, 1)] = 0.4;
    let point = SpectralPoint::try_new(&x_mat, &y_mat)
        .map_err(|e| CliError::Numerical(e.to_string()))?;

    let mut text = String::new();
    let _ = writeln!(
        text,
        "# max-eigenvalue graph point: k={k}, X=I, y=(0.6, 0.4{})",
        ", 0".repeat(k - 2)
    );
    let _ = writeln!(text, "piece\tdistance\tfallback");
    for m in 1..=k {
        for r in 1..=m {
            let proj = point
                .piece_distance(m, r)
                .map_err(|e| CliError::Numerical(e.to_string()))?;
            let _ = writeln!(
                text,
                "Gm{m}r{r}\t{}\t{}",
                format_sci(proj.distance),
                proj.rescale_fallback
            );
        }
    }
    let headline = point
        .piece_distance(k, 1)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let _ = writeln!(
        text,
        "# distance to Gm{k}r1 = {:.6} (exact: sqrt(0.4^2 + 0.4^2))",
        headline.distance
    );
    Ok(text)
}
