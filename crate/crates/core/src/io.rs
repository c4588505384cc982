//! CSV and JSON readers and writers.
//!
//! All CSV output is comma separated with a header row, and floats are
//! written with 17 significant digits (`{:.16e}`), so identical data give
//! byte-identical files. Missing optional values are written as empty
//! fields.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::continuum::InitialProfile;
use crate::dynamics::{Diagnostics, TrajectorySeries};
use crate::error::{Error, Result};
use crate::experiments::{ConvergenceReport, MuScalingReport, ProbabilisticReport};
use crate::graphons::GraphonKernel;
use crate::graphs::{CouplingGraph, Provenance};
use crate::model::OscillatorState;
use crate::stability::{ModeSpectrum, SweepPoint};

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn format_opt(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

fn parse_float(field: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse(format!("bad number {field:?}: {e}")))
}

fn parse_opt(field: &str) -> Result<Option<f64>> {
    if field.trim().is_empty() {
        Ok(None)
    } else {
        parse_float(field).map(Some)
    }
}

fn parse_int<T: std::str::FromStr>(field: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    field
        .trim()
        .parse::<T>()
        .map_err(|e| Error::Parse(format!("bad integer {field:?}: {e}")))
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

/// Parsed CSV with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("missing column {name:?}")))
    }

    /// Column as floats; empty fields are `None`.
    pub fn floats(&self, name: &str) -> Result<Vec<Option<f64>>> {
        let c = self.column(name)?;
        self.rows.iter().map(|r| parse_opt(&r[c])).collect()
    }

    fn expect_headers(&self, expected: &[&str]) -> Result<()> {
        if self.headers.iter().map(String::as_str).ne(expected.iter().copied()) {
            return Err(Error::Parse(format!(
                "expected columns {expected:?}, found {:?}",
                self.headers
            )));
        }
        Ok(())
    }
}

/// Reads any CSV written by this module.
pub fn read_table<R: Read>(r: R) -> Result<CsvTable> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let headers = reader.headers()?.iter().map(str::to_owned).collect();
    let rows = reader
        .records()
        .map(|rec| rec.map(|r| r.iter().map(str::to_owned).collect()))
        .collect::<std::result::Result<_, _>>()?;
    Ok(CsvTable { headers, rows })
}

pub const TRAJECTORY_HEADER: [&str; 4] = ["t", "node", "phi", "phidot"];

/// One row per `(t, node)`; nodes are numbered from 1.
pub fn write_trajectory_csv<W: Write>(series: &TrajectorySeries, w: W) -> Result<()> {
    let mut out = writer(w);
    out.write_record(TRAJECTORY_HEADER)?;
    for (t, s) in series.times.iter().zip(&series.states) {
        let t = format_float(*t);
        for (k, (p, v)) in s.phases.iter().zip(&s.velocities).enumerate() {
            out.write_record([t.clone(), (k + 1).to_string(), format_float(*p), format_float(*v)])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_trajectory_csv<R: Read>(r: R) -> Result<Vec<OscillatorState>> {
    let table = read_table(r)?;
    table.expect_headers(&TRAJECTORY_HEADER)?;
    let mut states: Vec<OscillatorState> = Vec::new();
    for row in &table.rows {
        let t = parse_float(&row[0])?;
        let node: usize = parse_int(&row[1])?;
        let (p, v) = (parse_float(&row[2])?, parse_float(&row[3])?);
        match states.last_mut() {
            Some(s) if s.time == t => {
                if node != s.phases.len() + 1 {
                    return Err(Error::Parse(format!("node {node} out of order at t = {t}")));
                }
                s.phases.push(p);
                s.velocities.push(v);
            }
            _ => {
                if node != 1 {
                    return Err(Error::Parse(format!("time {t} does not start at node 1")));
                }
                states.push(OscillatorState {
                    phases: vec![p],
                    velocities: vec![v],
                    time: t,
                });
            }
        }
    }
    Ok(states)
}

pub const DIAGNOSTICS_HEADER: [&str; 4] = ["t", "Q1", "Q2", "mean_phase"];

pub fn write_diagnostics_csv<W: Write>(series: &TrajectorySeries, w: W) -> Result<()> {
    let mut out = writer(w);
    out.write_record(DIAGNOSTICS_HEADER)?;
    for (t, d) in series.times.iter().zip(&series.diagnostics) {
        out.write_record([format_float(*t), format_float(d.q1), format_opt(d.q2), format_float(d.mean_phase)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_diagnostics_csv<R: Read>(r: R) -> Result<Vec<(f64, Diagnostics)>> {
    let table = read_table(r)?;
    table.expect_headers(&DIAGNOSTICS_HEADER)?;
    table
        .rows
        .iter()
        .map(|row| {
            Ok((
                parse_float(&row[0])?,
                Diagnostics {
                    q1: parse_float(&row[1])?,
                    q2: parse_opt(&row[2])?,
                    mean_phase: parse_float(&row[3])?,
                },
            ))
        })
        .collect()
}

pub const SPECTRUM_HEADER: [&str; 5] = ["m", "re_lp", "im_lp", "re_lm", "im_lm"];

pub fn write_spectrum_csv<W: Write>(spectrum: &ModeSpectrum, w: W) -> Result<()> {
    let mut out = writer(w);
    out.write_record(SPECTRUM_HEADER)?;
    for e in &spectrum.modes {
        out.write_record([
            e.m.to_string(),
            format_float(e.lambda_plus.re),
            format_float(e.lambda_plus.im),
            format_float(e.lambda_minus.re),
            format_float(e.lambda_minus.im),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Rows of a spectrum CSV as `(m, λ+, λ−)`.
pub fn read_spectrum_csv<R: Read>(r: R) -> Result<Vec<(i64, num_complex::Complex64, num_complex::Complex64)>> {
    let table = read_table(r)?;
    table.expect_headers(&SPECTRUM_HEADER)?;
    table
        .rows
        .iter()
        .map(|row| {
            let f = |i: usize| parse_float(&row[i]);
            Ok((
                parse_int(&row[0])?,
                num_complex::Complex64::new(f(1)?, f(2)?),
                num_complex::Complex64::new(f(3)?, f(4)?),
            ))
        })
        .collect()
}

pub const SWEEP_HEADER: [&str; 6] = ["p", "r", "alpha", "K", "abscissa", "argmax_m"];

pub fn write_sweep_csv<W: Write>(points: &[SweepPoint], w: W) -> Result<()> {
    let mut out = writer(w);
    out.write_record(SWEEP_HEADER)?;
    for s in points {
        out.write_record([
            format_float(s.p),
            format_float(s.r),
            format_float(s.alpha),
            format_float(s.coupling_gain),
            format_float(s.abscissa),
            s.argmax_m.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_sweep_csv<R: Read>(r: R) -> Result<Vec<SweepPoint>> {
    let table = read_table(r)?;
    table.expect_headers(&SWEEP_HEADER)?;
    table
        .rows
        .iter()
        .map(|row| {
            Ok(SweepPoint {
                p: parse_float(&row[0])?,
                r: parse_float(&row[1])?,
                alpha: parse_float(&row[2])?,
                coupling_gain: parse_float(&row[3])?,
                abscissa: parse_float(&row[4])?,
                argmax_m: parse_int(&row[5])?,
            })
        })
        .collect()
}

pub fn write_convergence_csv<W: Write>(report: &ConvergenceReport, w: W) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["n", "sup_error", "kernel_l2_error", "g_error", "h_error", "envelope"])?;
    for (i, n) in report.n_values.iter().enumerate() {
        let (eg, eh) = report.data_errors[i];
        out.write_record([
            n.to_string(),
            format_float(report.sup_errors[i]),
            format_float(report.kernel_l2_errors[i]),
            format_float(eg),
            format_float(eh),
            format_opt(report.envelope.as_ref().map(|e| e[i])),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Per-`N` quantiles of a random-graph report.
pub fn write_probabilistic_summary_csv<W: Write>(report: &ProbabilisticReport, w: W) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["n", "median", "q90", "averaged_component", "converged", "diverged"])?;
    for s in &report.per_n {
        let converged = s.trials.iter().filter(|t| t.error.is_some()).count();
        out.write_record([
            s.n.to_string(),
            format_opt(s.median),
            format_opt(s.q90),
            format_opt(s.averaged_component),
            converged.to_string(),
            (s.trials.len() - converged).to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// One row per `(N, seed)`.
pub fn write_trials_csv<W: Write>(report: &ProbabilisticReport, w: W) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["n", "seed", "error", "random_component", "diverged_at"])?;
    for s in &report.per_n {
        for t in &s.trials {
            out.write_record([
                s.n.to_string(),
                t.seed.to_string(),
                format_opt(t.error),
                format_opt(t.random_component),
                format_opt(t.diverged_at),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_mu_csv<W: Write>(report: &MuScalingReport, w: W) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["n", "mean", "std_error"])?;
    for ((n, m), se) in report.n_values.iter().zip(&report.means).zip(&report.std_errors) {
        out.write_record([n.to_string(), format_float(*m), format_float(*se)])?;
    }
    out.flush()?;
    Ok(())
}

/// Compact description stored next to an adjacency CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDescriptor {
    pub n: usize,
    pub provenance: Provenance,
    pub seed: Option<u64>,
    pub kernel: Option<GraphonKernel>,
}

impl GraphDescriptor {
    pub fn of(graph: &CouplingGraph, kernel: Option<&GraphonKernel>) -> Self {
        let provenance = graph.provenance();
        let seed = match provenance {
            Provenance::Sampled { seed } => Some(seed),
            _ => None,
        };
        Self {
            n: graph.n(),
            provenance,
            seed,
            kernel: kernel.cloned(),
        }
    }
}

/// Adjacency matrix with header `l1,…,lN`; row `k` holds `K_kℓ`.
pub fn write_graph_csv<W: Write>(graph: &CouplingGraph, w: W) -> Result<()> {
    let mut out = writer(w);
    let n = graph.n();
    out.write_record((1..=n).map(|l| format!("l{l}")))?;
    for k in 0..n {
        out.write_record(graph.row(k).iter().map(|v| format_float(*v)))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_graph_csv<R: Read>(r: R, descriptor: &GraphDescriptor) -> Result<CouplingGraph> {
    let table = read_table(r)?;
    let n = descriptor.n;
    if table.headers.len() != n || table.rows.len() != n {
        return Err(Error::Parse(format!(
            "descriptor says n = {n}, file has {} columns and {} rows",
            table.headers.len(),
            table.rows.len()
        )));
    }
    let weights = table
        .rows
        .iter()
        .flatten()
        .map(|f| parse_float(f))
        .collect::<Result<Vec<f64>>>()?;
    CouplingGraph::from_weights(n, weights, descriptor.provenance)
}

/// Header-free `M × M` matrix of cell values, loaded as a grid kernel.
pub fn read_grid_kernel_csv<R: Read>(r: R) -> Result<GraphonKernel> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(r);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        rows.push(rec.iter().map(parse_float).collect::<Result<_>>()?);
    }
    let m = rows.len();
    if m == 0 {
        return Err(Error::Parse("kernel table is empty".into()));
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != m) {
        return Err(Error::Parse(format!(
            "kernel table must be square: row {} has {} entries, expected {m}",
            bad + 1,
            rows[bad].len()
        )));
    }
    GraphonKernel::grid(m, rows.into_iter().flatten().collect())
}

/// `x,value` table read as a piecewise-linear initial profile.
pub fn read_initial_profile_csv<R: Read>(r: R) -> Result<InitialProfile> {
    let table = read_table(r)?;
    table.expect_headers(&["x", "value"])?;
    let mut x = Vec::with_capacity(table.rows.len());
    let mut values = Vec::with_capacity(table.rows.len());
    for row in &table.rows {
        x.push(parse_float(&row[0])?);
        values.push(parse_float(&row[1])?);
    }
    let profile = InitialProfile::Table { x, values };
    profile.validate()?;
    Ok(profile)
}

pub fn write_initial_profile_csv<W: Write>(x: &[f64], values: &[f64], w: W) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["x", "value"])?;
    for (a, b) in x.iter().zip(values) {
        out.write_record([format_float(*a), format_float(*b)])?;
    }
    out.flush()?;
    Ok(())
}

/// Pretty-printed JSON followed by a newline.
pub fn write_json<W: Write, T: Serialize + ?Sized>(value: &T, mut w: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<R: Read, T: for<'de> Deserialize<'de>>(r: R) -> Result<T> {
    Ok(serde_json::from_reader(r)?)
}
