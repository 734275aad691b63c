//! CSV report emission.
//!
//! All outputs are plain comma-separated tables with a header row and '.'
//! decimal marks (Rust's default float formatting). Table writers are
//! deterministic given identical inputs, so reports diff cleanly across
//! runs (timing columns excepted, by nature).

use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::mpc::{LoopFlag, MpcTrace};
use crate::rb::GreedyRecord;

/// An in-memory CSV table.
#[derive(Debug, Clone)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Table {
            headers: headers.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Appends a row; must match the header width.
    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.headers.len(), "CSV row width mismatch");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.headers.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        if let Some(dir) = path.as_ref().parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

/// Canonical float cell: shortest exact decimal representation.
pub fn cell(x: f64) -> String {
    format!("{x}")
}

fn flag_name(f: LoopFlag) -> &'static str {
    match f {
        LoopFlag::Accepted => "accepted",
        LoopFlag::KMaxExceeded => "k_max_exceeded",
        LoopFlag::AtEquilibrium => "at_equilibrium",
    }
}

/// Per-plant-step closed-loop table: t, state norm, output (empty when not
/// configured), applied control components, governing loop and its ω̃/K.
pub fn trace_step_table(trace: &MpcTrace, tau: f64) -> Table {
    let m = trace.controls.first().map_or(0, |u| u.len());
    let mut headers = vec!["t".to_string(), "state_norm".to_string(), "output".to_string()];
    for i in 0..m {
        headers.push(format!("u{}", i + 1));
    }
    headers.extend(["loop".to_string(), "horizon".to_string(), "omega_tilde".to_string()]);
    let mut table = Table {
        headers,
        rows: Vec::new(),
    };
    for (k, u) in trace.controls.iter().enumerate() {
        let li = trace.governing_loop[k];
        let rec = &trace.loops[li];
        let mut row = vec![
            cell((k + 1) as f64 * tau),
            cell(trace.states[k + 1].norm()),
            trace
                .outputs
                .get(k + 1)
                .map(|s| cell(*s))
                .unwrap_or_default(),
        ];
        row.extend(u.iter().map(|x| cell(*x)));
        row.push(li.to_string());
        row.push(rec.horizon.to_string());
        row.push(cell(rec.omega_tilde));
        table.rows.push(row);
    }
    table
}

/// Per-MPC-loop table: accepted horizon, raw ω̃, termination flag, candidate
/// count, and split wall times.
pub fn trace_loop_table(trace: &MpcTrace) -> Table {
    let mut table = Table::new(&[
        "loop",
        "horizon",
        "omega_tilde",
        "flag",
        "candidates",
        "rb_seconds",
        "truth_seconds",
    ]);
    for l in &trace.loops {
        table.push(vec![
            l.index.to_string(),
            l.horizon.to_string(),
            cell(l.omega_tilde),
            flag_name(l.flag).to_string(),
            l.candidates.to_string(),
            cell(l.rb_seconds),
            cell(l.truth_seconds),
        ]);
    }
    table
}

/// Greedy-history table: one row per iteration.
pub fn history_table(history: &[GreedyRecord]) -> Table {
    let p = history.first().map_or(0, |r| r.mu.len());
    let mut headers: Vec<String> = (0..p).map(|i| format!("mu{}", i + 1)).collect();
    headers.extend(["indicator".to_string(), "n_after".to_string(), "flag".to_string()]);
    let mut table = Table {
        headers,
        rows: Vec::new(),
    };
    for r in history {
        let mut row: Vec<String> = r.mu.iter().map(|m| cell(*m)).collect();
        row.push(cell(r.indicator));
        row.push(r.n_after.to_string());
        row.push(r.flag.to_string());
        table.rows.push(row);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_uses_comma_and_dot() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![cell(1.5), cell(-2.25e-3)]);
        let s = t.to_csv();
        assert_eq!(s, "a,b\n1.5,-0.00225\n");
    }

    #[test]
    #[should_panic(expected = "width mismatch")]
    fn row_width_is_enforced() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![cell(1.0)]);
    }

    #[test]
    fn history_table_shapes() {
        let hist = vec![GreedyRecord {
            mu: vec![14.0, 1e-2],
            indicator: 0.25,
            n_after: 2,
            flag: 0,
        }];
        let t = history_table(&hist);
        assert_eq!(t.headers, vec!["mu1", "mu2", "indicator", "n_after", "flag"]);
        assert_eq!(t.rows[0], vec!["14", "0.01", "0.25", "2", "0"]);
    }

    #[test]
    fn table_write_creates_directories() {
        let dir = std::env::temp_dir().join("rbmpc-report-test/sub");
        let path = dir.join("x.csv");
        let mut t = Table::new(&["h"]);
        t.push(vec![cell(3.0)]);
        t.write(&path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "h\n3\n");
    }
}
