//! Subcommand implementations and artifact bookkeeping.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use graphon_osc::continuum::average_initial_data;
use graphon_osc::dynamics::{FiniteSystem, TrajectorySeries};
use graphon_osc::experiments::{
    averaged_vs_random, deterministic_convergence, mu_scaling_study, random_convergence, ConvergenceReport,
    MuScalingReport, ProbabilisticReport,
};
use graphon_osc::graphs::{averaged_graph, cell_averaged_graph, sample_k_random_graph};
use graphon_osc::io;
use graphon_osc::model::OscillatorState;
use graphon_osc::stability::{measure_decay_rate, spectral_abscissa, spectrum, sweep, DecayCheck, ModeSpectrum, SweepPoint};
use serde::Serialize;
use serde_json::json;

use crate::config::{Format, GraphKind, KernelVariant, RunConfig};
use crate::error::{config_err, CliError, Result};
use crate::plot::{emit_plot, PlotData, PlotKind, Series};

pub const SUBCOMMANDS: [&str; 8] = [
    "simulate",
    "converge",
    "random-converge",
    "averaged-gap",
    "mu-scaling",
    "spectrum",
    "sweep",
    "decay-check",
];

pub const DEFAULT_OUTPUT_DIR: &str = "graphon-osc-output";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Artifact {
    pub path: String,
    pub kind: String,
    pub format: Format,
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'a str,
    pub seed: u64,
    pub config: &'a RunConfig,
    pub artifacts: Vec<Artifact>,
    pub summary: serde_json::Value,
}

/// Writes files under the output directory and records them.
pub struct Outputs<'a> {
    dir: PathBuf,
    cfg: &'a RunConfig,
    artifacts: Vec<Artifact>,
}

fn output_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Output {
        path: path.to_path_buf(),
        source,
    }
}

impl<'a> Outputs<'a> {
    pub fn create(dir: PathBuf, cfg: &'a RunConfig) -> Result<Self> {
        std::fs::create_dir_all(&dir).map_err(output_err(&dir))?;
        let probe = dir.join(".write-test");
        File::create(&probe).map_err(output_err(&dir))?;
        let _ = std::fs::remove_file(&probe);
        Ok(Self {
            dir,
            cfg,
            artifacts: Vec::new(),
        })
    }

    fn write(
        &mut self,
        name: &str,
        kind: &str,
        format: Format,
        body: impl FnOnce(&mut BufWriter<File>) -> graphon_osc::Result<()>,
    ) -> Result<()> {
        if !self.cfg.wants(format) {
            return Ok(());
        }
        let path = self.dir.join(name);
        let mut file = BufWriter::new(File::create(&path).map_err(output_err(&path))?);
        body(&mut file)?;
        file.flush().map_err(output_err(&path))?;
        self.record(name, kind, format);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, kind: &str, value: &T) -> Result<()> {
        self.write(name, kind, Format::Json, |w| io::write_json(value, w))
    }

    fn plot(&mut self, name: &str, kind: &str, data: &PlotData, plot: PlotKind) -> Result<()> {
        if !self.cfg.wants(Format::Svg) {
            return Ok(());
        }
        emit_plot(data, plot, &self.dir.join(name))?;
        self.record(name, kind, Format::Svg);
        Ok(())
    }

    fn record(&mut self, name: &str, kind: &str, format: Format) {
        self.artifacts.push(Artifact {
            path: name.to_owned(),
            kind: kind.to_owned(),
            format,
        });
    }

    /// Writes `manifest.json` and returns its path.
    pub fn finish(self, subcommand: &str, summary: serde_json::Value) -> Result<PathBuf> {
        let manifest = Manifest {
            tool: "graphon-osc",
            version: env!("CARGO_PKG_VERSION"),
            subcommand,
            seed: self.cfg.experiment.seed,
            config: self.cfg,
            artifacts: self.artifacts,
            summary,
        };
        let path = self.dir.join("manifest.json");
        let file = File::create(&path).map_err(output_err(&path))?;
        io::write_json(&manifest, BufWriter::new(file))?;
        Ok(path)
    }
}

pub fn run(subcommand: &str, cfg: &RunConfig, dir: PathBuf) -> Result<PathBuf> {
    cfg.validate(subcommand)?;
    let mut out = Outputs::create(dir, cfg)?;
    let summary = match subcommand {
        "simulate" => simulate(cfg, &mut out)?,
        "converge" => converge(cfg, &mut out)?,
        "random-converge" => random(cfg, &mut out, false)?,
        "averaged-gap" => random(cfg, &mut out, true)?,
        "mu-scaling" => mu(cfg, &mut out)?,
        "spectrum" => spectrum_cmd(cfg, &mut out)?,
        "sweep" => sweep_cmd(cfg, &mut out)?,
        "decay-check" => decay(cfg, &mut out)?,
        other => return Err(config_err(format!("unknown subcommand {other:?}"))),
    };
    out.finish(subcommand, summary)
}

fn strided(series: &TrajectorySeries, stride: usize) -> TrajectorySeries {
    let last = series.len().saturating_sub(1);
    let keep: Vec<usize> = (0..series.len()).filter(|i| i % stride == 0 || *i == last).collect();
    TrajectorySeries {
        times: keep.iter().map(|&i| series.times[i]).collect(),
        states: keep.iter().map(|&i| series.states[i].clone()).collect(),
        diagnostics: keep.iter().map(|&i| series.diagnostics[i]).collect(),
    }
}

fn simulate(cfg: &RunConfig, out: &mut Outputs) -> Result<serde_json::Value> {
    let n = cfg.simulation.n;
    let kernel = cfg.kernel()?;
    let graph = match cfg.simulation.graph {
        GraphKind::Averaged => averaged_graph(&kernel, n)?,
        GraphKind::CellAveraged => cell_averaged_graph(&kernel, n)?,
        GraphKind::Sampled => sample_k_random_graph(&kernel, n, cfg.experiment.seed)?,
    };
    let system = FiniteSystem::new(graph, cfg.model_params()?, cfg.simulation.scaling)?;
    let init = OscillatorState::new(
        average_initial_data(&cfg.initial_phi()?, n),
        average_initial_data(&cfg.initial_velocity()?, n),
        0.0,
    )?;
    let series = strided(
        &system.integrate(&init, cfg.simulation.t_end, cfg.simulation.dt)?,
        cfg.simulation.output_stride,
    );

    out.write("trajectory.csv", "trajectory", Format::Csv, |w| io::write_trajectory_csv(&series, w))?;
    out.write("diagnostics.csv", "diagnostics", Format::Csv, |w| io::write_diagnostics_csv(&series, w))?;
    out.write("graph.csv", "graph", Format::Csv, |w| io::write_graph_csv(system.graph(), w))?;
    let descriptor = io::GraphDescriptor::of(system.graph(), Some(&kernel));
    out.json("graph.json", "graph_descriptor", &descriptor)?;
    out.json("trajectory.json", "trajectory", &series)?;

    let shown: Vec<usize> = if n <= 8 { (0..n).collect() } else { (0..8).map(|i| i * (n - 1) / 7).collect() };
    let mut plot_series: Vec<Series> = shown
        .iter()
        .map(|&k| {
            Series::new(
                format!("node {}", k + 1),
                series.times.iter().zip(&series.states).map(|(t, s)| (*t, s.phases[k])).collect(),
            )
        })
        .collect();
    plot_series.push(Series::new(
        "mean",
        series.times.iter().zip(&series.diagnostics).map(|(t, d)| (*t, d.mean_phase)).collect(),
    ));
    let data = PlotData {
        title: format!("Phases, N = {n}"),
        x_label: "t".into(),
        y_label: "phase".into(),
        series: plot_series,
    };
    out.plot("trajectory.svg", "trajectory", &data, PlotKind::Trajectory)?;

    let first = series.diagnostics.first().unwrap();
    let last = series.diagnostics.last().unwrap();
    Ok(json!({
        "n": n,
        "samples": series.len(),
        "final_time": series.times.last(),
        "q1_initial": first.q1,
        "q1_final": last.q1,
        "mean_phase_final": last.mean_phase,
    }))
}

fn loglog(title: &str, y_label: &str, n_values: &[usize], columns: Vec<(&str, Vec<Option<f64>>)>) -> PlotData {
    PlotData {
        title: title.into(),
        x_label: "N".into(),
        y_label: y_label.into(),
        series: columns
            .into_iter()
            .map(|(name, ys)| {
                Series::new(
                    name,
                    n_values
                        .iter()
                        .zip(ys)
                        .filter_map(|(n, y)| y.map(|y| (*n as f64, y)))
                        .collect(),
                )
            })
            .collect(),
    }
}

fn converge(cfg: &RunConfig, out: &mut Outputs) -> Result<serde_json::Value> {
    let report: ConvergenceReport = deterministic_convergence(&cfg.convergence_setup()?)?;
    out.write("convergence.csv", "convergence", Format::Csv, |w| io::write_convergence_csv(&report, w))?;
    out.json("convergence.json", "convergence", &report)?;
    let data = loglog(
        "Deterministic convergence",
        "sup-t L2 error",
        &report.n_values,
        vec![
            ("sup error", report.sup_errors.iter().copied().map(Some).collect()),
            ("kernel L2 error", report.kernel_l2_errors.iter().copied().map(Some).collect()),
        ],
    );
    out.plot("convergence.svg", "convergence", &data, PlotKind::ConvergenceLogLog)?;
    let dominated = report
        .envelope
        .as_ref()
        .map(|env| report.sup_errors.iter().zip(env).all(|(e, b)| e <= b));
    Ok(json!({
        "n_values": report.n_values,
        "sup_errors": report.sup_errors,
        "envelope_dominates": dominated,
    }))
}

fn random(cfg: &RunConfig, out: &mut Outputs, gap: bool) -> Result<serde_json::Value> {
    let setup = cfg.convergence_setup()?;
    let (trials, seed) = (cfg.experiment.trials, cfg.experiment.seed);
    let (report, stem, title): (ProbabilisticReport, &str, &str) = if gap {
        (averaged_vs_random(&setup, trials, seed)?, "averaged_gap", "Random vs averaged system")
    } else {
        (random_convergence(&setup, trials, seed)?, "random", "Random-graph convergence")
    };
    out.write(&format!("{stem}_summary.csv"), "summary", Format::Csv, |w| {
        io::write_probabilistic_summary_csv(&report, w)
    })?;
    out.write(&format!("{stem}_trials.csv"), "trials", Format::Csv, |w| io::write_trials_csv(&report, w))?;
    out.json(&format!("{stem}.json"), "report", &report)?;
    let data = loglog(
        title,
        "sup-t L2 error",
        &report.n_values,
        vec![("median", report.medians()), ("0.9-quantile", report.q90s())],
    );
    out.plot(&format!("{stem}.svg"), "quantiles", &data, PlotKind::ConvergenceLogLog)?;
    let diverged: usize = report
        .per_n
        .iter()
        .map(|s| s.trials.iter().filter(|t| t.error.is_none()).count())
        .sum();
    Ok(json!({
        "n_values": report.n_values,
        "medians": report.medians(),
        "q90s": report.q90s(),
        "diverged_trials": diverged,
    }))
}

fn mu(cfg: &RunConfig, out: &mut Outputs) -> Result<serde_json::Value> {
    let report: MuScalingReport = mu_scaling_study(
        &cfg.convergence_setup()?,
        cfg.experiment.mu_source,
        cfg.experiment.trials,
        cfg.experiment.seed,
    )?;
    out.write("mu.csv", "mu", Format::Csv, |w| io::write_mu_csv(&report, w))?;
    out.json("mu.json", "mu", &report)?;
    let data = loglog(
        "Coupling fluctuation",
        "mean of integrated squared norm",
        &report.n_values,
        vec![("mean", report.means.iter().copied().map(Some).collect())],
    );
    out.plot("mu.svg", "mu", &data, PlotKind::ConvergenceLogLog)?;
    Ok(json!({ "means": report.means, "slope": report.slope }))
}

fn spectrum_plot(spec: &ModeSpectrum) -> PlotData {
    let pick = |f: fn(&graphon_osc::stability::ModeEigenvalues) -> f64| {
        spec.modes.iter().map(|e| (e.m as f64, f(e))).collect::<Vec<_>>()
    };
    PlotData {
        title: format!("Spectrum, alpha = {}, K = {}", spec.alpha, spec.coupling_gain),
        x_label: "m".into(),
        y_label: "Re lambda".into(),
        series: vec![
            Series::new("Re lambda+", pick(|e| e.lambda_plus.re)),
            Series::new("Re lambda-", pick(|e| e.lambda_minus.re)),
        ],
    }
}

fn spectrum_cmd(cfg: &RunConfig, out: &mut Outputs) -> Result<serde_json::Value> {
    let kernel = cfg.kernel()?;
    let mut spec = spectrum(&kernel, cfg.model.alpha, cfg.model.coupling_gain, cfg.experiment.m_max)?;
    if matches!(cfg.kernel.variant, KernelVariant::Insertion | KernelVariant::Rewire) {
        spec.kernel_params = Some(cfg.small_world()?);
    }
    let abscissa = spectral_abscissa(&spec)?;
    out.write("spectrum.csv", "spectrum", Format::Csv, |w| io::write_spectrum_csv(&spec, w))?;
    out.json("spectrum.json", "spectrum", &json!({ "spectrum": spec, "abscissa": abscissa }))?;
    out.plot("spectrum.svg", "spectrum", &spectrum_plot(&spec), PlotKind::Spectrum)?;
    Ok(json!({ "abscissa": abscissa.value, "argmax_m": abscissa.argmax_m, "stable": spec.is_stable() }))
}

fn sweep_points(cfg: &RunConfig) -> Result<Vec<(graphon_osc::graphons::SmallWorldParams, f64, f64)>> {
    let s = &cfg.experiment.sweep;
    let variant = cfg.small_world()?.variant;
    let ps = s.p_values.clone().unwrap_or_else(|| vec![0.2, 0.1, 0.05, 0.025]);
    let alphas = s.alpha_values.clone().unwrap_or_else(|| vec![cfg.model.alpha]);
    let ks = s.k_values.clone().unwrap_or_else(|| vec![cfg.model.coupling_gain]);
    let mut points = Vec::new();
    for &p in &ps {
        let rs = s.r_values.clone().unwrap_or_else(|| vec![p]);
        for &r in &rs {
            let params = graphon_osc::graphons::SmallWorldParams::new(p, r, variant)?;
            for &a in &alphas {
                for &k in &ks {
                    points.push((params, a, k));
                }
            }
        }
    }
    if points.is_empty() {
        return Err(config_err("sweep has no points"));
    }
    Ok(points)
}

fn sweep_plot(points: &[SweepPoint]) -> PlotData {
    let varies = |f: fn(&SweepPoint) -> f64| points.iter().any(|q| f(q) != f(&points[0]));
    let (label, x): (&str, fn(&SweepPoint) -> f64) = if varies(|q| q.p) {
        ("p", |q| q.p)
    } else if varies(|q| q.r) {
        ("r", |q| q.r)
    } else if varies(|q| q.coupling_gain) {
        ("K", |q| q.coupling_gain)
    } else {
        ("alpha", |q| q.alpha)
    };
    PlotData {
        title: "Spectral abscissa".into(),
        x_label: label.into(),
        y_label: "max Re lambda+".into(),
        series: vec![Series::new("abscissa", points.iter().map(|q| (x(q), q.abscissa)).collect())],
    }
}

fn sweep_cmd(cfg: &RunConfig, out: &mut Outputs) -> Result<serde_json::Value> {
    let points = sweep(&sweep_points(cfg)?, cfg.experiment.m_max)?;
    out.write("sweep.csv", "sweep", Format::Csv, |w| io::write_sweep_csv(&points, w))?;
    out.json("sweep.json", "sweep", &points)?;
    out.plot("sweep.svg", "sweep", &sweep_plot(&points), PlotKind::Sweep)?;
    Ok(json!({ "points": points.len(), "max_abscissa": points.iter().map(|p| p.abscissa).fold(f64::NEG_INFINITY, f64::max) }))
}

fn decay(cfg: &RunConfig, out: &mut Outputs) -> Result<serde_json::Value> {
    let e = &cfg.experiment;
    let kernel = cfg.kernel()?;
    let check = DecayCheck {
        epsilon: e.epsilon,
        t_end: e.decay_horizon,
        dt: e.decay_dt,
        grid_n: e.decay_grid,
        ..DecayCheck::new(kernel.clone(), cfg.model.alpha, cfg.model.coupling_gain, e.m)
    };
    let spec = spectrum(&kernel, cfg.model.alpha, cfg.model.coupling_gain, e.m.unsigned_abs() as usize)?;
    let predicted = spec.modes.iter().find(|x| x.m == e.m).map(|x| x.lambda_plus.re);
    let measured = measure_decay_rate(&check)?;
    let relative = predicted.map(|p| (measured.rate - p).abs() / p.abs());
    out.write("decay.csv", "mode_amplitude", Format::Csv, |w| {
        let mut csv = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        csv.write_record(["t", "amplitude"])?;
        for (t, a) in measured.times.iter().zip(&measured.amplitudes) {
            csv.write_record([io::format_float(*t), io::format_float(*a)])?;
        }
        csv.flush()?;
        Ok(())
    })?;
    let summary = json!({
        "m": e.m,
        "rate": measured.rate,
        "predicted": predicted,
        "relative_deviation": relative,
        "peaks_used": measured.peaks_used,
        "max_other_mode": measured.max_other_mode,
    });
    out.json("decay.json", "decay", &summary)?;
    let data = PlotData {
        title: format!("Mode {} amplitude", e.m),
        x_label: "t".into(),
        y_label: "log amplitude".into(),
        series: vec![Series::new(
            "log |a_m|",
            measured
                .times
                .iter()
                .zip(&measured.amplitudes)
                .filter(|(_, a)| **a > 0.0)
                .map(|(t, a)| (*t, a.ln()))
                .collect(),
        )],
    };
    out.plot("decay.svg", "mode_amplitude", &data, PlotKind::Trajectory)?;
    Ok(summary)
}
