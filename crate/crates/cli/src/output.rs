//! CSV and JSON rendering.
//!
//! CSV floats use 17 significant digits. JSON floats use the shortest
//! representation that parses back to the same value.

use crate::config::Format;
use crate::error::CliError;
use crate::run::{Outcome, Report};

pub const SWEEP_HEADER: [&str; 8] = ["q", "g", "N", "fidelity", "stderr", "n_samples", "phi_m2", "converged"];
pub const SINGLE_HEADER: [&str; 5] = ["n", "amp_re", "amp_im", "density", "converged"];
pub const VERIFY_HEADER: [&str; 5] = ["suite", "passed", "residual", "tolerance", "detail"];

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn render(report: &Report, format: Format) -> Result<String, CliError> {
    match format {
        Format::Json => serde_json::to_string_pretty(report).map(|s| s + "\n").map_err(|e| CliError::Output(e.to_string())),
        Format::Csv => render_csv(report),
    }
}

fn render_csv(report: &Report) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let out = |e: csv::Error| CliError::Output(e.to_string());
    match &report.result {
        Outcome::Sweep(points) => {
            w.write_record(SWEEP_HEADER).map_err(out)?;
            for p in points {
                w.write_record([
                    float(p.q),
                    float(p.g),
                    p.cutoff.to_string(),
                    float(p.fidelity_mean),
                    float(p.fidelity_stderr),
                    p.n_samples.to_string(),
                    float(p.phi_second_moment),
                    p.converged.to_string(),
                ])
                .map_err(out)?;
            }
        }
        Outcome::Single(s) => {
            w.write_record(SINGLE_HEADER).map_err(out)?;
            for (n, [re, im]) in s.amplitudes.iter().enumerate() {
                w.write_record([n.to_string(), float(*re), float(*im), float(s.density), s.converged.to_string()]).map_err(out)?;
            }
        }
        Outcome::Verify(results) => {
            w.write_record(VERIFY_HEADER).map_err(out)?;
            for r in results {
                w.write_record([r.suite.clone(), r.passed.to_string(), float(r.residual), float(r.tolerance), r.detail.clone()])
                    .map_err(out)?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Output(e.to_string()))
}
