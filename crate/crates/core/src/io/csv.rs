//! CSV export with 17-significant-digit floats.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::diagnostics::StabilityRow;
use crate::state::DiagnosticsRecord;

use super::{IoError, IoResult};

pub const DIAGNOSTICS_HEADER: &str =
    "time,mass,energy,dissipation_rate,min_density,picard_iters,l2_surface,l2_v";

pub const STABILITY_HEADER: &str = "time,d_surface,d_v_a,d_v_b,d_grad,distance";

/// Formats a float so that parsing it back gives the same bits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_text(path: &Path, text: &str) -> IoResult<()> {
    fs::write(path, text).map_err(|e| IoError::file(path, e))
}

pub fn diagnostics_csv(records: &[DiagnosticsRecord]) -> String {
    let mut s = String::from(DIAGNOSTICS_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            fmt_f64(r.time),
            fmt_f64(r.mass),
            fmt_f64(r.energy),
            fmt_f64(r.dissipation_rate),
            fmt_f64(r.min_density),
            r.picard_iters,
            fmt_f64(r.l2_surface),
            fmt_f64(r.l2_v)
        );
    }
    s
}

pub fn export_diagnostics(records: &[DiagnosticsRecord], path: &Path) -> IoResult<()> {
    write_text(path, &diagnostics_csv(records))
}

/// Parses the output of [`diagnostics_csv`].
pub fn parse_diagnostics(text: &str) -> Result<Vec<DiagnosticsRecord>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == DIAGNOSTICS_HEADER => {}
        other => return Err(format!("unexpected header {other:?}")),
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 8 {
                return Err(format!("row {}: expected 8 columns, got {}", i + 1, cols.len()));
            }
            let f = |j: usize| {
                cols[j]
                    .parse::<f64>()
                    .map_err(|e| format!("row {} column {}: {e}", i + 1, j + 1))
            };
            Ok(DiagnosticsRecord {
                time: f(0)?,
                mass: f(1)?,
                energy: f(2)?,
                dissipation_rate: f(3)?,
                min_density: f(4)?,
                picard_iters: cols[5]
                    .parse()
                    .map_err(|e| format!("row {} column 6: {e}", i + 1))?,
                l2_surface: f(6)?,
                l2_v: f(7)?,
            })
        })
        .collect()
}

pub fn read_diagnostics(path: &Path) -> IoResult<Vec<DiagnosticsRecord>> {
    let text = fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
    parse_diagnostics(&text).map_err(|m| IoError::format(path, m))
}

pub fn stability_csv(rows: &[StabilityRow]) -> String {
    let mut s = String::from(STABILITY_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            fmt_f64(r.time),
            fmt_f64(r.d_surface),
            fmt_f64(r.d_v_a),
            fmt_f64(r.d_v_b),
            fmt_f64(r.d_grad),
            fmt_f64(r.distance)
        );
    }
    s
}

pub fn export_stability(rows: &[StabilityRow], path: &Path) -> IoResult<()> {
    write_text(path, &stability_csv(rows))
}

/// Generic table: header names and rows of floats.
pub fn table_csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|x| fmt_f64(*x)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

pub fn export_table(header: &[&str], rows: &[Vec<f64>], path: &Path) -> IoResult<()> {
    write_text(path, &table_csv(header, rows))
}
