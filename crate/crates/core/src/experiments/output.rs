//! CSV, grid and plot-script writers. All numbers use 17 significant digits
//! and LF line endings so output is byte-stable.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Result, SimError};

use super::{RunRecord, Scenario};

pub const CSV_HEADER: &str = "scenario,model,g,q,r_pol,n,F,P,mu,tb_over_td,stderr_F";

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn records_csv(records: &[RunRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.scenario.id(),
            r.model.name(),
            num(r.g),
            r.q,
            num(r.r_pol),
            r.n,
            num(r.fidelity),
            num(r.probability),
            opt(r.mu),
            opt(r.tb_over_td),
            opt(r.stderr_fidelity),
        );
    }
    out
}

/// One row per `(g, r_pol)`, one column per step.
pub fn grid_csv(records: &[RunRecord], n_max: usize, pick: impl Fn(&RunRecord) -> f64) -> String {
    let mut out = String::from("g,r_pol");
    for n in 1..=n_max {
        let _ = write!(out, ",n{n}");
    }
    out.push('\n');
    for row in records.chunks(n_max) {
        let _ = write!(out, "{},{}", num(row[0].g), num(row[0].r_pol));
        for r in row {
            let _ = write!(out, ",{}", num(pick(r)));
        }
        out.push('\n');
    }
    out
}

/// `path` with `suffix` inserted before the extension.
pub fn sibling(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| SimError::io(path, e))
}

/// A gnuplot script for the main CSV.
pub fn plot_script(scenario: Scenario, csv: &Path) -> String {
    let name = csv
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let (x, xlabel, series) = match scenario {
        Scenario::Fig2 | Scenario::Fig3b | Scenario::Sweep => (3, "g", "n"),
        Scenario::Fig4 => (5, "r_pol", "n"),
        Scenario::Fig5 => (10, "tb_over_td", "mu"),
        Scenario::FixedPoint => (3, "g", "n"),
    };
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set key autotitle columnhead");
    let _ = writeln!(s, "set xlabel '{xlabel}'");
    let _ = writeln!(s, "set ylabel 'F'");
    if x == 3 {
        let _ = writeln!(s, "set logscale x");
    }
    let _ = writeln!(s, "set terminal pngcairo size 900,600");
    let _ = writeln!(s, "set output '{}.png'", name.trim_end_matches(".csv"));
    let _ = writeln!(
        s,
        "# one curve per {series}; filter rows with awk if the file holds several models"
    );
    let _ = writeln!(s, "plot '{name}' using {x}:7 with points pt 7 ps 0.6 title 'F', \\");
    let _ = writeln!(s, "     '{name}' using {x}:8 with points pt 6 ps 0.6 title 'P'");
    s
}
