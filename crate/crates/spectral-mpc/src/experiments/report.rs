//! Deterministic CSV emission for logs, sweeps and summaries.
//!
//! Floats print with 17 significant digits so repeated runs are
//! byte-identical; timing columns are the only nondeterministic cells and
//! carry well-known names (`solve_ms`, `mean_solve_ms`) so comparers can
//! exclude them.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::mpc::ClosedLoopLog;

/// 17-significant-digit formatting (round-trippable f64).
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}

/// Column names whose values are wall-clock timings.
pub const TIMING_COLUMNS: [&str; 2] = ["solve_ms", "mean_solve_ms"];

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_to(&self, path: &Path) -> std::io::Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut f = fs::File::create(path)?;
        f.write_all(self.to_csv_string().as_bytes())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

/// Parse a CSV string produced by [`CsvTable::to_csv_string`].
pub fn parse_csv(text: &str) -> Option<CsvTable> {
    let mut lines = text.lines();
    let header: Vec<String> = lines.next()?.split(',').map(|s| s.to_string()).collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(|s| s.to_string()).collect())
        .collect();
    Some(CsvTable { header, rows })
}

/// Closed-loop log as the pinned CSV schema:
/// `t,<states>,<controls>,nlp_status,iterations,solve_ms,track_err_pos,track_err_vel`.
pub fn closed_loop_table(
    log: &ClosedLoopLog,
    state_names: &[&str],
    control_names: &[&str],
) -> CsvTable {
    let mut header: Vec<String> = vec!["t".to_string()];
    header.extend(state_names.iter().map(|s| s.to_string()));
    header.extend(control_names.iter().map(|s| s.to_string()));
    header.extend(
        ["nlp_status", "iterations", "solve_ms", "track_err_pos", "track_err_vel"]
            .iter()
            .map(|s| s.to_string()),
    );
    let mut table = CsvTable {
        header,
        rows: Vec::new(),
    };
    for r in &log.records {
        let mut row = vec![fmt_float(r.t)];
        row.extend(r.plant_state.iter().map(|v| fmt_float(*v)));
        row.extend(r.applied_control.iter().map(|v| fmt_float(*v)));
        let status = if r.degraded {
            format!("{}-degraded", r.status.as_str())
        } else {
            r.status.as_str().to_string()
        };
        row.push(status);
        row.push(r.iterations.to_string());
        row.push(fmt_float(r.solve_time_ms));
        row.push(fmt_float(r.track_err_pos));
        row.push(fmt_float(r.track_err_vel));
        table.rows.push(row);
    }
    table
}

/// Standard deviation of a sample (population form).
pub fn std_dev(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count();
    if n == 0 {
        return 0.0;
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    var.sqrt()
}

/// Root-mean-square of a sample.
pub fn rms(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count();
    if n == 0 {
        return 0.0;
    }
    (values.map(|v| v * v).sum::<f64>() / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_has_17_significant_digits() {
        let s = fmt_float(std::f64::consts::PI);
        assert_eq!(s, "3.1415926535897931e0");
        assert_eq!(fmt_float(0.0), "0.0000000000000000e0");
        let round_trip: f64 = s.parse().unwrap();
        assert_eq!(round_trip, std::f64::consts::PI);
    }

    #[test]
    fn csv_roundtrip() {
        let mut t = CsvTable::new(&["a", "b"]);
        t.push_row(vec![fmt_float(1.5), "x".into()]);
        let parsed = parse_csv(&t.to_csv_string()).unwrap();
        assert_eq!(parsed, t);
        assert_eq!(parsed.column_index("b"), Some(1));
    }

    #[test]
    fn statistics_helpers() {
        let vals = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0];
        let sd = std_dev(vals.iter().copied());
        assert!((sd - 2.0).abs() < 1e-12);
        let r = rms([3.0, 4.0].iter().copied());
        assert!((r - (12.5f64).sqrt()).abs() < 1e-12);
        assert_eq!(std_dev(std::iter::empty()), 0.0);
    }
}
