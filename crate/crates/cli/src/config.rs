//! TOML run configuration with dotted-path overrides.

use std::fs::File;
use std::path::{Path, PathBuf};

use graphon_osc::continuum::InitialProfile;
use graphon_osc::dynamics::CouplingScaling;
use graphon_osc::experiments::{ConvergenceSetup, MuSource};
use graphon_osc::graphons::{small_world_kernel, GraphonKernel, SmallWorldParams, SmallWorldVariant};
use graphon_osc::io::{read_grid_kernel_csv, read_initial_profile_csv};
use graphon_osc::model::{ForcingSpec, ModelParams, NonlinearitySpec};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelSection,
    pub kernel: KernelSection,
    pub initial: InitialSection,
    pub simulation: SimulationSection,
    pub experiment: ExperimentSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub alpha: f64,
    pub coupling_gain: f64,
    pub nonlinearity: NonlinearitySpec,
    pub forcing: ForcingSpec,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            coupling_gain: 1.0,
            nonlinearity: NonlinearitySpec::sine2pi(1.0),
            forcing: ForcingSpec::Zero,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelVariant {
    Insertion,
    Rewire,
    Constant,
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelSection {
    pub variant: KernelVariant,
    pub p: f64,
    pub r: f64,
    /// Value of the `constant` variant.
    pub value: f64,
    /// Header-free square CSV of cell values for the `table` variant.
    pub table_path: Option<PathBuf>,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self {
            variant: KernelVariant::Insertion,
            p: 0.1,
            r: 0.25,
            value: 0.5,
            table_path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    pub phi: InitialProfile,
    pub velocity: InitialProfile,
    /// `x,value` CSV replacing `phi`.
    pub phi_path: Option<PathBuf>,
    /// `x,value` CSV replacing `velocity`.
    pub velocity_path: Option<PathBuf>,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            phi: InitialProfile::sin_k(1),
            velocity: InitialProfile::constant(0.0),
            phi_path: None,
            velocity_path: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    /// Kernel sampled at the grid points.
    Averaged,
    CellAveraged,
    /// Bernoulli realisation seeded by `experiment.seed`.
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    #[serde(rename = "T")]
    pub t_end: f64,
    pub dt: f64,
    pub grid_ref: usize,
    pub n: usize,
    pub graph: GraphKind,
    pub scaling: CouplingScaling,
    /// Keep every `output_stride`-th sample in trajectory files.
    pub output_stride: usize,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            t_end: 2.0,
            dt: 1e-3,
            grid_ref: 1024,
            n: 128,
            graph: GraphKind::Averaged,
            scaling: CouplingScaling::OneOverN,
            output_stride: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub p_values: Option<Vec<f64>>,
    /// Defaults to `r = p` for every point.
    pub r_values: Option<Vec<f64>>,
    pub alpha_values: Option<Vec<f64>>,
    #[serde(rename = "K_values")]
    pub k_values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub kind: Option<String>,
    pub n_values: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub m_max: usize,
    pub epsilon: f64,
    pub m: i64,
    pub mu_source: MuSource,
    pub decay_horizon: f64,
    pub decay_dt: f64,
    pub decay_grid: usize,
    pub sweep: SweepSection,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            kind: None,
            n_values: vec![32, 64, 128, 256],
            trials: 50,
            seed: 0,
            m_max: 64,
            epsilon: 1e-4,
            m: 1,
            mu_source: MuSource::AveragedTrajectory,
            decay_horizon: 40.0,
            decay_dt: 0.01,
            decay_grid: 512,
            sweep: SweepSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: None,
            formats: vec![Format::Csv, Format::Json, Format::Svg],
        }
    }
}

/// One documented configuration key.
pub struct KeyDoc {
    pub key: &'static str,
    pub help: &'static str,
}

const fn key(key: &'static str, help: &'static str) -> KeyDoc {
    KeyDoc { key, help }
}

pub const MODEL_KEYS: &[KeyDoc] = &[
    key("model.alpha", "damping α (default 1)"),
    key("model.coupling_gain", "coupling gain c (default 1)"),
    key("model.nonlinearity", "{ kind = \"sine\" | \"sine2pi\" | \"custom_table\", gain, half_period }"),
    key("model.forcing", "{ kind = \"zero\" | \"uniform_constant\" | \"constant_per_node\", value | values }"),
];

pub const LINEAR_MODEL_KEYS: &[KeyDoc] = &[
    key("model.alpha", "damping α (default 1)"),
    key("model.coupling_gain", "linear coupling coefficient K (default 1)"),
];

pub const KERNEL_KEYS: &[KeyDoc] = &[
    key("kernel.variant", "insertion | rewire | constant | table (default insertion)"),
    key("kernel.p", "long-range probability, 0 < p < 1/2 (default 0.1)"),
    key("kernel.r", "local range, 0 < r < 1/2 (default 0.25)"),
    key("kernel.value", "value of the constant kernel (default 0.5)"),
    key("kernel.table_path", "header-free M×M CSV of cell values (table variant)"),
];

pub const INITIAL_KEYS: &[KeyDoc] = &[
    key("initial.phi", "initial phase profile, e.g. { kind = \"sin_k\", k = 1 }"),
    key("initial.velocity", "initial velocity profile (default { kind = \"constant\", value = 0 })"),
    key("initial.phi_path", "x,value CSV replacing initial.phi"),
    key("initial.velocity_path", "x,value CSV replacing initial.velocity"),
];

pub const OUTPUT_KEYS: &[KeyDoc] = &[
    key("output.dir", "output directory (else --output-dir / GRAPHON_OSC_OUTPUT_DIR / ./graphon-osc-output)"),
    key("output.formats", "subset of [\"csv\", \"json\", \"svg\"] (default all)"),
];

pub const T_KEY: KeyDoc = key("simulation.T", "time horizon (default 2)");
pub const DT_KEY: KeyDoc = key("simulation.dt", "RK4 step (default 1e-3)");
pub const GRID_REF_KEY: KeyDoc = key("simulation.grid_ref", "Nyström grid of the reference solution (default 1024)");
pub const N_KEY: KeyDoc = key("simulation.n", "number of oscillators (default 128)");
pub const GRAPH_KEY: KeyDoc = key("simulation.graph", "averaged | cell_averaged | sampled (default averaged)");
pub const SCALING_KEY: KeyDoc = key("simulation.scaling", "one_over_n | none (default one_over_n)");
pub const STRIDE_KEY: KeyDoc = key("simulation.output_stride", "keep every k-th time sample (default 1)");
pub const KIND_KEY: KeyDoc = key("experiment.kind", "optional; must name the subcommand when set");
pub const N_VALUES_KEY: KeyDoc = key("experiment.n_values", "increasing sizes (default [32, 64, 128, 256])");
pub const TRIALS_KEY: KeyDoc = key("experiment.trials", "sampled graphs per size (default 50)");
pub const SEED_KEY: KeyDoc = key("experiment.seed", "first seed; trial i uses seed + i (default 0)");
pub const M_MAX_KEY: KeyDoc = key("experiment.m_max", "largest Fourier mode (default 64)");
pub const MU_SOURCE_KEY: KeyDoc = key("experiment.mu_source", "unit | averaged_trajectory (default averaged_trajectory)");
pub const SWEEP_KEYS: &[KeyDoc] = &[
    key("experiment.sweep.p_values", "p grid (default [0.2, 0.1, 0.05, 0.025])"),
    key("experiment.sweep.r_values", "r grid (default: r = p)"),
    key("experiment.sweep.alpha_values", "α grid (default [model.alpha])"),
    key("experiment.sweep.K_values", "K grid (default [model.coupling_gain])"),
];
pub const DECAY_KEYS: &[KeyDoc] = &[
    key("experiment.m", "perturbed mode (default 1)"),
    key("experiment.epsilon", "perturbation amplitude (default 1e-4)"),
    key("experiment.decay_horizon", "simulated time (default 40)"),
    key("experiment.decay_dt", "RK4 step (default 0.01)"),
    key("experiment.decay_grid", "Nyström grid (default 512)"),
];

/// Keys consumed by each subcommand, rendered into its `--help`.
pub fn keys_for(subcommand: &str) -> Vec<&'static KeyDoc> {
    let mut keys: Vec<&KeyDoc> = Vec::new();
    match subcommand {
        "simulate" => {
            keys.extend(MODEL_KEYS);
            keys.extend(KERNEL_KEYS);
            keys.extend(INITIAL_KEYS);
            keys.extend([&T_KEY, &DT_KEY, &N_KEY, &GRAPH_KEY, &SCALING_KEY, &STRIDE_KEY, &SEED_KEY]);
        }
        "converge" | "random-converge" | "averaged-gap" | "mu-scaling" => {
            keys.extend(MODEL_KEYS);
            keys.extend(KERNEL_KEYS);
            keys.extend(INITIAL_KEYS);
            keys.extend([&T_KEY, &DT_KEY]);
            if matches!(subcommand, "converge" | "random-converge") {
                keys.push(&GRID_REF_KEY);
            }
            keys.push(&N_VALUES_KEY);
            if subcommand != "converge" {
                keys.extend([&TRIALS_KEY, &SEED_KEY]);
            }
            if subcommand == "mu-scaling" {
                keys.push(&MU_SOURCE_KEY);
            }
        }
        "spectrum" => {
            keys.extend(LINEAR_MODEL_KEYS);
            keys.extend(KERNEL_KEYS);
            keys.push(&M_MAX_KEY);
        }
        "sweep" => {
            keys.extend(LINEAR_MODEL_KEYS);
            keys.push(&KERNEL_KEYS[0]);
            keys.extend(SWEEP_KEYS);
            keys.push(&M_MAX_KEY);
        }
        "decay-check" => {
            keys.extend(LINEAR_MODEL_KEYS);
            keys.extend(KERNEL_KEYS);
            keys.extend(DECAY_KEYS);
        }
        _ => {}
    }
    keys.push(&KIND_KEY);
    keys.extend(OUTPUT_KEYS);
    keys
}

pub fn render_keys(subcommand: &str) -> String {
    let keys = keys_for(subcommand);
    let width = keys.iter().map(|k| k.key.len()).max().unwrap_or(0);
    let mut out = String::from("Config keys:\n");
    for k in keys {
        out.push_str(&format!("  {:width$}  {}\n", k.key, k.help));
    }
    out
}

/// Parses the right-hand side of `--set` as a TOML value, falling back to
/// a bare string.
fn parse_override_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_owned())),
        Err(_) => toml::Value::String(raw.to_owned()),
    }
}

pub fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| config_err(format!("override {assignment:?} is not of the form key=value")))?;
    let parts: Vec<&str> = path.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(config_err(format!("bad override key {path:?}")));
    }
    let mut table = doc;
    for part in &parts[..parts.len() - 1] {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| config_err(format!("override {path:?} descends into a non-table value")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), parse_override_value(raw.trim()));
    Ok(())
}

impl RunConfig {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: toml::Table = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| config_err(e.to_string()))
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| config_err(format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_toml_str(&text, overrides)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Checks ranges and referenced files for the given subcommand.
    pub fn validate(&self, subcommand: &str) -> Result<()> {
        if let Some(kind) = &self.experiment.kind {
            if kind != subcommand {
                return Err(config_err(format!(
                    "experiment.kind = {kind:?} does not match subcommand {subcommand:?}"
                )));
            }
        }
        for (name, path) in [
            ("kernel.table_path", &self.kernel.table_path),
            ("initial.phi_path", &self.initial.phi_path),
            ("initial.velocity_path", &self.initial.velocity_path),
        ] {
            if let Some(p) = path {
                if !p.is_file() {
                    return Err(config_err(format!("{name}: {} does not exist", p.display())));
                }
            }
        }
        if self.kernel.variant == KernelVariant::Table && self.kernel.table_path.is_none() {
            return Err(config_err("kernel.variant = \"table\" needs kernel.table_path"));
        }
        let sim = &self.simulation;
        if !(sim.t_end >= 0.0 && sim.t_end.is_finite()) {
            return Err(config_err("simulation.T must be finite and non-negative"));
        }
        if !(sim.dt > 0.0 && sim.dt.is_finite()) {
            return Err(config_err("simulation.dt must be positive"));
        }
        if sim.n == 0 || sim.grid_ref == 0 || sim.output_stride == 0 {
            return Err(config_err("simulation.n, grid_ref and output_stride must be positive"));
        }
        let exp = &self.experiment;
        if exp.trials == 0 {
            return Err(config_err("experiment.trials must be at least 1"));
        }
        if exp.n_values.is_empty() || exp.n_values.contains(&0) || exp.n_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(config_err("experiment.n_values must be positive and strictly increasing"));
        }
        if exp.m_max == 0 {
            return Err(config_err("experiment.m_max must be at least 1"));
        }
        if self.output.formats.is_empty() {
            return Err(config_err("output.formats must name at least one format"));
        }
        Ok(())
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        let m = &self.model;
        Ok(ModelParams::new(m.alpha, m.coupling_gain, m.nonlinearity.clone(), m.forcing.clone())?)
    }

    pub fn small_world(&self) -> Result<SmallWorldParams> {
        let variant = match self.kernel.variant {
            KernelVariant::Insertion => SmallWorldVariant::Insertion,
            KernelVariant::Rewire => SmallWorldVariant::Rewire,
            other => {
                return Err(config_err(format!(
                    "kernel.variant = {other:?} is not a small-world kernel"
                )))
            }
        };
        Ok(SmallWorldParams::new(self.kernel.p, self.kernel.r, variant)?)
    }

    pub fn kernel(&self) -> Result<GraphonKernel> {
        match self.kernel.variant {
            KernelVariant::Insertion | KernelVariant::Rewire => Ok(small_world_kernel(&self.small_world()?)?),
            KernelVariant::Constant => Ok(GraphonKernel::constant(self.kernel.value)?),
            KernelVariant::Table => {
                let path = self.kernel.table_path.as_ref().expect("validated");
                let file = File::open(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
                Ok(read_grid_kernel_csv(file)?)
            }
        }
    }

    fn profile(inline: &InitialProfile, path: &Option<PathBuf>) -> Result<InitialProfile> {
        let profile = match path {
            Some(p) => {
                let file = File::open(p).map_err(|e| config_err(format!("{}: {e}", p.display())))?;
                read_initial_profile_csv(file)?
            }
            None => inline.clone(),
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn initial_phi(&self) -> Result<InitialProfile> {
        Self::profile(&self.initial.phi, &self.initial.phi_path)
    }

    pub fn initial_velocity(&self) -> Result<InitialProfile> {
        Self::profile(&self.initial.velocity, &self.initial.velocity_path)
    }

    pub fn convergence_setup(&self) -> Result<ConvergenceSetup> {
        Ok(ConvergenceSetup {
            kernel: self.kernel()?,
            params: self.model_params()?,
            g: self.initial_phi()?,
            h: self.initial_velocity()?,
            t_end: self.simulation.t_end,
            dt: self.simulation.dt,
            n_values: self.experiment.n_values.clone(),
            grid_ref: self.simulation.grid_ref,
        })
    }

    pub fn wants(&self, format: Format) -> bool {
        self.output.formats.contains(&format)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = RunConfig::from_toml_str("", &[]).unwrap();
        assert_eq!(cfg, RunConfig::default());
        cfg.validate("simulate").unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml_str("[model]\nbeta = 1.0\n", &[]).is_err());
        assert!(RunConfig::from_toml_str("[nonsense]\n", &[]).is_err());
        assert!(RunConfig::from_toml_str("", &["simulation.steps=3".into()]).is_err());
    }

    #[test]
    fn overrides_take_precedence() {
        let text = "[experiment]\nseed = 3\n[model]\nalpha = 2.0\n";
        let cfg = RunConfig::from_toml_str(
            text,
            &[
                "experiment.seed=7".into(),
                "model.nonlinearity={ kind = \"sine\", gain = 0.5 }".into(),
                "output.formats=[\"csv\"]".into(),
                "kernel.variant=constant".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.experiment.seed, 7);
        assert_eq!(cfg.model.alpha, 2.0);
        assert_eq!(cfg.model.nonlinearity, NonlinearitySpec::sine(0.5));
        assert_eq!(cfg.output.formats, vec![Format::Csv]);
        assert_eq!(cfg.kernel.variant, KernelVariant::Constant);
        assert!(RunConfig::from_toml_str("", &["noequals".into()]).is_err());
        assert!(RunConfig::from_toml_str("", &["model.alpha.x=1".into()]).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.experiment.sweep.p_values = Some(vec![0.2, 0.1]);
        cfg.initial.phi = InitialProfile::Trig {
            offset: 0.1,
            terms: vec![graphon_osc::continuum::TrigTerm {
                k: 2,
                cos_amp: 0.5,
                sin_amp: 0.0,
            }],
        };
        cfg.output.dir = Some("out".into());
        let text = cfg.to_toml_string();
        assert_eq!(RunConfig::from_toml_str(&text, &[]).unwrap(), cfg);
    }

    #[test]
    fn validation() {
        let cfg = RunConfig::from_toml_str("[experiment]\nkind = \"sweep\"\n", &[]).unwrap();
        assert!(cfg.validate("sweep").is_ok());
        assert!(cfg.validate("spectrum").is_err());
        let cfg = RunConfig::from_toml_str("[kernel]\nvariant = \"table\"\ntable_path = \"/nonexistent.csv\"\n", &[]).unwrap();
        assert!(cfg.validate("spectrum").is_err());
        let cfg = RunConfig::from_toml_str("[experiment]\nn_values = [64, 32]\n", &[]).unwrap();
        assert!(cfg.validate("converge").is_err());
        let cfg = RunConfig::from_toml_str("[simulation]\ndt = 0.0\n", &[]).unwrap();
        assert!(cfg.validate("simulate").is_err());
    }

    #[test]
    fn help_lists_consumed_keys() {
        let text = render_keys("random-converge");
        for k in ["experiment.trials", "experiment.seed", "simulation.grid_ref", "kernel.p", "output.dir"] {
            assert!(text.contains(k), "{k}");
        }
        assert!(!render_keys("spectrum").contains("simulation.dt"));
    }
}
