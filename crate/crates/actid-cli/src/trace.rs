//! Deterministic TSV traces and `#`-prefixed summary blocks.
//!
//! Trace columns: `r`, `eps_r`, `step_norm`, `stationarity`, `value_gap`,
//! then one distance column per piece id. Missing quantities print as `nan`
//! so every cell parses as `f64`.

use std::fmt::Write as _;

use actid_core::identify::{IdentificationReport, PieceCertificate, RevealParams};
use actid_core::CompositeProblem;

pub fn format_sci(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.9e}")
    }
}

/// Compact float for human-facing vectors: `1`, `0.5`, `0.25`.
pub fn format_compact(x: f64) -> String {
    let rounded = (x * 1e12).round() / 1e12;
    let rounded = if rounded == 0.0 { 0.0 } else { rounded };
    format!("{rounded}")
}

pub fn format_vector(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|&x| format_compact(x)).collect();
    format!("({})", parts.join(", "))
}

pub fn render_trace(report: &IdentificationReport, pretty: bool) -> String {
    let mut header: Vec<String> = ["r", "eps_r", "step_norm", "stationarity", "value_gap"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(report.piece_ids.iter().map(|id| format!("dist_{id}")));

    let mut rows: Vec<Vec<String>> = Vec::with_capacity(report.iterates.len());
    for it in &report.iterates {
        let mut row = vec![
            it.index.to_string(),
            format_sci(it.eps.unwrap_or(f64::NAN)),
            format_sci(it.step_norm.unwrap_or(f64::NAN)),
            format_sci(it.residual.stationarity),
            format_sci(it.residual.value_gap.unwrap_or(f64::NAN)),
        ];
        row.extend(it.distances.iter().map(|&d| format_sci(d)));
        rows.push(row);
    }

    if !pretty {
        let mut out = String::new();
        out.push_str(&header.join("\t"));
        out.push('\n');
        for row in rows {
            out.push_str(&row.join("\t"));
            out.push('\n');
        }
        return out;
    }

    // aligned columns for human reading
    let ncols = header.len();
    let mut widths = vec![0usize; ncols];
    for (i, h) in header.iter().enumerate() {
        widths[i] = h.len();
    }
    for row in &rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let mut out = String::new();
    for (i, h) in header.iter().enumerate() {
        let _ = write!(out, "{:>width$}  ", h, width = widths[i]);
    }
    out.push('\n');
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            let _ = write!(out, "{:>width$}  ", cell, width = widths[i]);
        }
        out.push('\n');
    }
    out
}

pub fn render_certificate(cert: &PieceCertificate) -> String {
    if cert.actively_sufficient {
        match &cert.witness {
            Some(w) => format!("{}=sufficient witness={}", cert.piece_id, format_vector(w)),
            None => format!("{}=sufficient", cert.piece_id),
        }
    } else {
        let mut s = format!("{}=insufficient", cert.piece_id);
        if let Some(m) = cert.margin {
            let _ = write!(s, " margin={}", format_sci(m));
        }
        if cert.best_effort {
            s.push_str(" (best-effort)");
        }
        s
    }
}

pub fn render_summary(
    problem: &CompositeProblem,
    report: &IdentificationReport,
    params: &RevealParams,
    hypothesis_warning: bool,
) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# problem: h={} n={} m={}",
        problem.outer().name(),
        problem.input_dim(),
        problem.output_dim()
    );
    let _ = writeln!(
        out,
        "# params: eps_reveal={} delta={} tail={}",
        format_compact(params.eps_reveal),
        format_compact(params.delta_crit),
        params.tail_window
    );
    let _ = writeln!(
        out,
        "# revealed (tail {}): {}",
        params.tail_window,
        if report.tail_revealed.is_empty() {
            "none".to_string()
        } else {
            report.tail_revealed.join(" ")
        }
    );
    if report.certificates.is_empty() {
        let _ = writeln!(
            out,
            "# note: reference point absent; value gate skipped and certification unavailable (degraded mode)"
        );
    } else {
        let parts: Vec<String> = report
            .certificates
            .iter()
            .map(render_certificate)
            .collect();
        let _ = writeln!(out, "# certified: {}", parts.join("; "));
    }
    if hypothesis_warning {
        let _ = writeln!(
            out,
            "# warning: mu_r * |x_r - reference| is not nonincreasing; identification hypothesis violated"
        );
    }
    out
}
