//! Tabulation and plot-ready export of convergence reports.
//!
//! `render` is pure: the same report produces the same bytes. The text
//! table is for humans; the tidy CSV (one row per column and xi) is the
//! machine contract for plotting and regression diffs.

use crate::converge::{ConvergenceReport, StudyStatus};

/// Aligned text table: one sub-table per measured column, with the fit
/// exponent shown when at least three schedule points exist.
pub fn render_table(report: &ConvergenceReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "study: {}   shape: {}   sequence: {}\n",
        report.study, report.shape, report.provenance.sequence
    ));
    out.push_str(&format!(
        "status: {}\n",
        match report.status {
            StudyStatus::Pass => "pass",
            StudyStatus::Fail => "FAIL",
            StudyStatus::HypothesisUnmet => "hypothesis unmet",
        }
    ));
    for note in &report.notes {
        out.push_str(&format!("note: {note}\n"));
    }
    let with_fit = report.schedule.len() >= 3;
    for col in &report.columns {
        out.push('\n');
        out.push_str(&format!("[{}]  target = {:.9e}\n", col.name, col.target));
        if with_fit {
            out.push_str(&format!(
                "{:>12} {:>18} {:>12} {:>8}\n",
                "xi", "value", "rel_err", "p"
            ));
        } else {
            out.push_str(&format!("{:>12} {:>18} {:>12}\n", "xi", "value", "rel_err"));
        }
        for (i, xi) in report.schedule.iter().enumerate() {
            let fit_str = if with_fit && i == report.schedule.len() - 1 {
                col.fit
                    .map(|f| format!("{:8.3}", f.rate))
                    .unwrap_or_else(|| format!("{:>8}", "-"))
            } else if with_fit {
                format!("{:>8}", "")
            } else {
                String::new()
            };
            out.push_str(&format!(
                "{:>12.5e} {:>18.9e} {:>12.3e} {}\n",
                xi, col.values[i], col.rel_errors[i], fit_str
            ));
        }
        if with_fit {
            if let Some(f) = col.fit {
                out.push_str(&format!(
                    "fitted limit = {:.9e} (rate {:.3})\n",
                    f.limit, f.rate
                ));
            }
        }
    }
    out
}

/// Tidy CSV, one row per (column, xi); the trailing fit columns are
/// empty unless the schedule has at least three points and the fit is
/// non-degenerate.
pub fn render_csv(report: &ConvergenceReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("# config_hash={}\n", report.provenance.config_hash));
    out.push_str(&format!("# study={} shape={}\n", report.study, report.shape));
    out.push_str("column,xi,value,target,rel_error,fit_limit,fit_rate\n");
    let with_fit = report.schedule.len() >= 3;
    for col in &report.columns {
        for (i, xi) in report.schedule.iter().enumerate() {
            let (fl, fr) = match (with_fit, col.fit) {
                (true, Some(f)) => (format!("{:.12e}", f.limit), format!("{:.6e}", f.rate)),
                _ => (String::new(), String::new()),
            };
            out.push_str(&format!(
                "{},{:.6e},{:.12e},{:.12e},{:.6e},{},{}\n",
                col.name, xi, col.values[i], col.target, col.rel_errors[i], fl, fr
            ));
        }
    }
    out
}
