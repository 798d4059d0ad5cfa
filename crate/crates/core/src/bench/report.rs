//! CSV and JSON output of sweep reports.

use std::fmt::Write as _;
use std::path::Path;

use super::RunReport;
use crate::error::Result;

pub const CSV_HEADER: &str =
    "test,variant,delta,weight,t,dofs_u,dofs_lambda,dofs_psi,errL2,errH1,err1delta,cond,conservation,status,seconds";

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Renders the report as CSV; missing values are empty fields.
pub fn csv_string(report: &RunReport) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for row in &report.rows {
        let r = row.report.as_ref();
        let [du, dl, dp] = match row.dofs {
            Some(d) => d.map(|x| x.to_string()),
            None => Default::default(),
        };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{du},{dl},{dp},{},{},{},{},{},{},{}",
            row.test,
            row.variant,
            row.delta,
            row.weight,
            row.t,
            opt(r.map(|r| r.err_l2)),
            opt(r.map(|r| r.err_h1)),
            opt(r.map(|r| r.err_1delta)),
            opt(r.and_then(|r| r.cond)),
            opt(r.map(|r| r.conservation)),
            row.status,
            row.seconds,
        );
    }
    s
}

pub fn write_csv(path: &Path, report: &RunReport) -> Result<()> {
    std::fs::write(path, csv_string(report))?;
    Ok(())
}

pub fn write_json(path: &Path, report: &RunReport) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(report)?)?;
    Ok(())
}
