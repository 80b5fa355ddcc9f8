//! CSV time series, per-step field snapshots and verification reports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::energetics::{ConditionReport, VerificationReport};
use crate::fem::{EnergyBreakdown, Model, StateFields};
use crate::solver::{StepRecord, Trajectory};
use crate::tensor::{component_index, n_components, SymTensor2};

pub const TIMESERIES_COLUMNS: [&str; 15] = [
    "step",
    "t",
    "E_total",
    "W_part",
    "J_part",
    "G_part",
    "H_part",
    "diss_increment",
    "diss_cum",
    "power_integral",
    "balance_gap",
    "min_chi",
    "max_normD",
    "sweeps",
    "stationarity_residual",
];

pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const SNAPSHOT_DIR: &str = "snapshots";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: {msg}")]
    Format { path: String, msg: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io { path: path.display().to_string(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> OutputError + '_ {
    move |source| OutputError::Csv { path: path.display().to_string(), source }
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>, OutputError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    csv::Writer::from_path(path).map_err(csv_err(path))
}

/// Writes one row per stored state with 17 significant digits.
pub fn write_timeseries(traj: &Trajectory, path: impl AsRef<Path>) -> Result<(), OutputError> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    w.write_record(TIMESERIES_COLUMNS).map_err(csv_err(path))?;
    let gaps = traj.balance_gaps();
    for (k, (r, gap)) in traj.records.iter().zip(gaps).enumerate() {
        let e = &r.energy;
        let row = [
            k.to_string(),
            fmt_f(r.t),
            fmt_f(e.total),
            fmt_f(e.w_elastic_minus_work),
            fmt_f(e.j_damage),
            fmt_f(e.g_plastic),
            fmt_f(e.h_coupling),
            fmt_f(r.diss_increment),
            fmt_f(r.diss_cum),
            fmt_f(r.power_integral),
            fmt_f(gap),
            fmt_f(r.state.min_chi()),
            fmt_f(r.state.max_norm_d()),
            r.sweeps.to_string(),
            fmt_f(r.stationarity_residual),
        ];
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// One parsed row of a time-series file.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeseriesRow {
    pub step: usize,
    pub t: f64,
    pub energy: EnergyBreakdown,
    pub diss_increment: f64,
    pub diss_cum: f64,
    pub power_integral: f64,
    pub balance_gap: f64,
    pub min_chi: f64,
    pub max_norm_d: f64,
    pub sweeps: usize,
    pub stationarity_residual: f64,
}

pub fn read_timeseries(path: impl AsRef<Path>) -> Result<Vec<TimeseriesRow>, OutputError> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = r.headers().map_err(csv_err(path))?;
    if header.iter().ne(TIMESERIES_COLUMNS) {
        return Err(OutputError::Format { path: path.display().to_string(), msg: format!("unexpected header {header:?}") });
    }
    let bad = |msg: String| OutputError::Format { path: path.display().to_string(), msg };
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        let f = |i: usize| rec[i].parse::<f64>().map_err(|e| bad(format!("column {}: {e}", TIMESERIES_COLUMNS[i])));
        let n = |i: usize| rec[i].parse::<usize>().map_err(|e| bad(format!("column {}: {e}", TIMESERIES_COLUMNS[i])));
        rows.push(TimeseriesRow {
            step: n(0)?,
            t: f(1)?,
            energy: EnergyBreakdown { total: f(2)?, w_elastic_minus_work: f(3)?, j_damage: f(4)?, g_plastic: f(5)?, h_coupling: f(6)? },
            diss_increment: f(7)?,
            diss_cum: f(8)?,
            power_integral: f(9)?,
            balance_gap: f(10)?,
            min_chi: f(11)?,
            max_norm_d: f(12)?,
            sweeps: n(13)?,
            stationarity_residual: f(14)?,
        });
    }
    Ok(rows)
}

fn snapshot_path(dir: &Path, step: usize, field: &str) -> PathBuf {
    dir.join(SNAPSHOT_DIR).join(format!("step_{step:05}_{field}.csv"))
}

fn coord_names(dim: usize) -> Vec<String> {
    ["x", "y"][..dim].iter().map(|s| s.to_string()).collect()
}

fn d_names(dim: usize) -> Vec<String> {
    (0..n_components(dim))
        .map(|c| {
            let (i, j) = component_index(dim, c);
            format!("d{}{}", i + 1, j + 1)
        })
        .collect()
}

/// Writes `u`, `chi` and `d` of one state as three CSV files.
pub fn write_snapshot(model: &Model, step: usize, state: &StateFields, dir: impl AsRef<Path>) -> Result<(), OutputError> {
    let dir = dir.as_ref();
    let mesh = model.mesh();
    let dim = model.dim();
    let fields: [(&str, Vec<String>); 3] =
        [("u", ["u_x", "u_y"][..dim].iter().map(|s| s.to_string()).collect()), ("chi", vec!["chi".to_string()]), ("d", d_names(dim))];
    for (name, cols) in fields {
        let path = snapshot_path(dir, step, name);
        let mut w = writer(&path)?;
        let mut header = vec!["node".to_string()];
        header.extend(coord_names(dim));
        header.extend(cols);
        w.write_record(&header).map_err(csv_err(&path))?;
        for node in 0..mesh.n_nodes() {
            let mut row = vec![node.to_string()];
            row.extend(mesh.coords(node).iter().map(|&x| fmt_f(x)));
            match name {
                "u" => row.extend(state.u[node * dim..(node + 1) * dim].iter().map(|&x| fmt_f(x))),
                "chi" => row.push(fmt_f(state.chi[node])),
                _ => row.extend(state.d[node].components().iter().map(|&x| fmt_f(x))),
            }
            w.write_record(&row).map_err(csv_err(&path))?;
        }
        w.flush().map_err(io_err(&path))?;
    }
    Ok(())
}

fn read_values(path: &Path, n_nodes: usize, skip: usize, width: usize) -> Result<Vec<Vec<f64>>, OutputError> {
    let bad = |msg: String| OutputError::Format { path: path.display().to_string(), msg };
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let mut out = Vec::with_capacity(n_nodes);
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        if rec.len() != skip + width {
            return Err(bad(format!("expected {} columns, found {}", skip + width, rec.len())));
        }
        let node: usize = rec[0].parse().map_err(|e| bad(format!("node id: {e}")))?;
        if node != out.len() {
            return Err(bad(format!("node ids must be consecutive, found {node} at row {}", out.len())));
        }
        let vals = (skip..skip + width)
            .map(|i| rec[i].parse::<f64>().map_err(|e| bad(format!("row {node}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        out.push(vals);
    }
    if out.len() != n_nodes {
        return Err(bad(format!("expected {n_nodes} nodes, found {}", out.len())));
    }
    Ok(out)
}

pub fn read_snapshot(model: &Model, step: usize, dir: impl AsRef<Path>) -> Result<StateFields, OutputError> {
    let dir = dir.as_ref();
    let dim = model.dim();
    let n = model.mesh().n_nodes();
    let skip = 1 + dim;
    let u = read_values(&snapshot_path(dir, step, "u"), n, skip, dim)?.concat();
    let chi = read_values(&snapshot_path(dir, step, "chi"), n, skip, 1)?.concat();
    let d = read_values(&snapshot_path(dir, step, "d"), n, skip, n_components(dim))?
        .iter()
        .map(|c| SymTensor2::from_components(dim, c).expect("component count checked"))
        .collect();
    Ok(StateFields { u, chi, d })
}

/// Time series plus one snapshot per stored state under `dir`.
pub fn write_run(model: &Model, traj: &Trajectory, dir: impl AsRef<Path>) -> Result<(), OutputError> {
    let dir = dir.as_ref();
    write_timeseries(traj, dir.join(TIMESERIES_FILE))?;
    for (k, r) in traj.records.iter().enumerate() {
        write_snapshot(model, k, &r.state, dir)?;
    }
    Ok(())
}

/// Rebuilds a trajectory written by [`write_run`]. Stored states and times
/// come from the files; the remaining diagnostics are taken from the time
/// series as written.
pub fn read_run(model: &Model, dir: impl AsRef<Path>) -> Result<Trajectory, OutputError> {
    let dir = dir.as_ref();
    let rows = read_timeseries(dir.join(TIMESERIES_FILE))?;
    let mut traj = Trajectory::default();
    for row in rows {
        let state = read_snapshot(model, row.step, dir)?;
        traj.records.push(StepRecord {
            t: row.t,
            state,
            energy: row.energy,
            diss_increment: row.diss_increment,
            diss_cum: row.diss_cum,
            power_integral: row.power_integral,
            power_integral_right: f64::NAN,
            sweeps: row.sweeps,
            stationarity_residual: row.stationarity_residual,
        });
    }
    Ok(traj)
}

pub const REPORT_COLUMNS: [&str; 11] = [
    "step",
    "t",
    "energy",
    "min_margin",
    "margin_tolerance",
    "worst_competitor",
    "upper_gap",
    "lower_gap",
    "diss_cum",
    "power_integral",
    "admissibility",
];

pub fn write_report_csv(report: &VerificationReport, path: impl AsRef<Path>) -> Result<(), OutputError> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    w.write_record(REPORT_COLUMNS).map_err(csv_err(path))?;
    for s in &report.steps {
        let worst = s.worst_competitor.map_or(String::new(), |(f, j)| format!("{f}#{j}"));
        let row = [
            s.step.to_string(),
            fmt_f(s.t),
            fmt_f(s.energy),
            fmt_f(s.min_margin),
            fmt_f(s.margin_tolerance),
            worst,
            fmt_f(s.upper_gap),
            fmt_f(s.lower_gap),
            fmt_f(s.diss_cum),
            fmt_f(s.power_integral),
            s.admissibility.join("; "),
        ];
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn format_conditions(c: &ConditionReport) -> String {
    let k = &c.constants;
    let mut s = String::new();
    let _ = writeln!(s, "condition suite over {} samples", c.samples);
    let _ = writeln!(
        s,
        "  constants: K1 = {:.6e}, K2 = {:.6e}, C_F = {:.6e}, C_F' = {:.6e}, E_D = {:.6e}, E_D' = {:.6e}, m = {:.6e}, c0 = {:.6e}, c1 = {:.6e}",
        k.k1, k.k2, k.c_f, k.c_f_rate, k.e_d, k.e_d_rate, k.m, k.c0, k.c1
    );
    let rows = [
        ("stiffness lower bound ratio", c.stiffness_lower_ratio),
        ("stiffness upper bound ratio", c.stiffness_upper_ratio),
        ("power control ratio", c.power_ratio),
        ("energy sublevel ratio", c.sublevel_ratio),
        ("strain bound ratio", c.strain_ratio),
        ("damage gradient ratio", c.gradient_ratio),
        ("time Lipschitz ratio", c.lipschitz_ratio),
        ("inelastic strain continuity ratio", c.xi_continuity_ratio),
        ("inelastic strain sequence tail", c.xi_continuity_tail),
        ("dissipation triangle excess", c.triangle_excess),
        ("dissipation semicontinuity excess", c.lsc_excess),
        ("min H", c.h_min),
    ];
    for (name, v) in rows {
        let _ = writeln!(s, "  {name:<36} {v:.6e}");
    }
    let _ = writeln!(s, "  |Xi| <= |D| failures                 {}", c.xi_bound_failures);
    let _ = writeln!(s, "  identity of indiscernibles failures  {}", c.identity_failures);
    s
}

/// Plain-text summary of a verification report.
pub fn format_report(report: &VerificationReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "verification of {} stored states ({} competitors per state)", report.steps.len(), report.competitors_per_step);
    let _ = writeln!(
        s,
        "{:>5} {:>12} {:>14} {:>12} {:>12} {:>12} {:>12}",
        "step", "t", "energy", "min_margin", "upper_gap", "lower_gap", "diss_cum"
    );
    for st in &report.steps {
        let _ = writeln!(
            s,
            "{:>5} {:>12.5e} {:>14.7e} {:>12.3e} {:>12.3e} {:>12.3e} {:>12.5e}",
            st.step, st.t, st.energy, st.min_margin, st.upper_gap, st.lower_gap, st.diss_cum
        );
    }
    if let Some(c) = &report.conditions {
        s.push_str(&format_conditions(c));
    }
    let v = report.violations();
    if v.is_empty() {
        let _ = writeln!(s, "result: no violations");
    } else {
        let _ = writeln!(s, "result: {} violation(s)", v.len());
        for line in v {
            let _ = writeln!(s, "  {line}");
        }
    }
    s
}
