//! Continuum-limit solver.
//!
//! The integral operator `∫_I 𝒦(x, y) D(φ(y) − φ(x)) dy` is discretised by
//! the cell-average Nyström rule on a uniform grid, which turns the
//! continuum equation into a finite system integrated by
//! [`FiniteSystem`]. A Picard iteration of the integral form of the
//! equation provides an independent solver on short horizons.

use serde::{Deserialize, Serialize};

use crate::dynamics::{output_times, CouplingScaling, Diagnostics, FiniteSystem, StepField, TrajectorySeries};
use crate::error::{invalid_param, Error, Result};
use crate::graphons::{cos_2pi, pernorm, sin_2pi, GraphonKernel};
use crate::graphs::cell_averaged_graph;
use crate::model::{ForcingSpec, ModelParams, OscillatorState};
use crate::quadrature::{cumulative_integral, integrate_gauss64};

/// Default Nyström resolution of reference solutions.
pub const DEFAULT_REFERENCE_GRID: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    pub k: i64,
    #[serde(default)]
    pub cos_amp: f64,
    #[serde(default)]
    pub sin_amp: f64,
}

/// Initial-data profiles on `I = [0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialProfile {
    Constant {
        value: f64,
    },
    Linear {
        slope: f64,
        intercept: f64,
    },
    /// `amplitude · sin(2πkx)`.
    SinK {
        k: i64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// `offset + Σ cos_amp · cos(2πkx) + sin_amp · sin(2πkx)`.
    Trig {
        #[serde(default)]
        offset: f64,
        terms: Vec<TrigTerm>,
    },
    /// `amplitude · exp(−pernorm(x − center)² / (2 width²))`.
    GaussianBump {
        center: f64,
        width: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// Linear interpolation of `(x, value)` samples, constant beyond the
    /// first and last abscissa.
    Table { x: Vec<f64>, values: Vec<f64> },
}

fn one() -> f64 {
    1.0
}

impl InitialProfile {
    pub fn constant(value: f64) -> Self {
        Self::Constant { value }
    }

    pub fn sin_k(k: i64) -> Self {
        Self::SinK { k, amplitude: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::GaussianBump { width, .. } if width.is_nan() || *width <= 0.0 => {
                Err(invalid_param("gaussian bump width must be positive"))
            }
            Self::Table { x, values } => {
                if x.is_empty() || x.len() != values.len() {
                    return Err(invalid_param("table needs matching, non-empty x and value columns"));
                }
                if x.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) {
                    return Err(invalid_param("table abscissae must be strictly increasing"));
                }
                if x.iter().chain(values).any(|v| !v.is_finite()) {
                    return Err(invalid_param("table entries must be finite"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Linear { slope, intercept } => slope * x + intercept,
            Self::SinK { k, amplitude } => amplitude * sin_2pi(*k as f64 * x),
            Self::Trig { offset, terms } => {
                offset
                    + terms
                        .iter()
                        .map(|t| t.cos_amp * cos_2pi(t.k as f64 * x) + t.sin_amp * sin_2pi(t.k as f64 * x))
                        .sum::<f64>()
            }
            Self::GaussianBump {
                center,
                width,
                amplitude,
            } => {
                let d = pernorm(x - center);
                amplitude * (-d * d / (2.0 * width * width)).exp()
            }
            Self::Table { x: xs, values } => {
                let j = xs.partition_point(|v| *v <= x);
                if j == 0 {
                    values[0]
                } else if j == xs.len() {
                    values[xs.len() - 1]
                } else {
                    let t = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
                    values[j - 1] + t * (values[j] - values[j - 1])
                }
            }
        }
    }

    /// Points in `(a, b)` where the profile is not smooth.
    fn kinks(&self, a: f64, b: f64) -> Vec<f64> {
        let mut pts = match self {
            Self::Table { x, .. } => x.clone(),
            Self::GaussianBump { center, .. } => {
                let anti = center + 0.5;
                (-2..=2).flat_map(|j| [anti + j as f64, center + j as f64]).collect()
            }
            _ => Vec::new(),
        };
        pts.retain(|p| *p > a && *p < b);
        pts.sort_by(f64::total_cmp);
        pts
    }

    /// `∫_a^b f(g(x)) dx`, splitting at kinks and using Gauss–Legendre.
    fn integrate_composed(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let mut pts = vec![a];
        pts.extend(self.kinks(a, b));
        pts.push(b);
        pts.windows(2)
            .map(|w| integrate_gauss64(w[0], w[1], |x| f(self.eval(x))))
            .sum()
    }

    /// `∫_a^b g(x) dx`, exact for polynomial and trigonometric entries.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        let trig_primitive = |k: i64, c: f64, s: f64, x: f64| {
            if k == 0 {
                c * x
            } else {
                let w = 2.0 * std::f64::consts::PI * k as f64;
                (c * sin_2pi(k as f64 * x) - s * cos_2pi(k as f64 * x)) / w
            }
        };
        match self {
            Self::Constant { value } => value * (b - a),
            Self::Linear { slope, intercept } => 0.5 * slope * (b * b - a * a) + intercept * (b - a),
            Self::SinK { k, amplitude } => trig_primitive(*k, 0.0, *amplitude, b) - trig_primitive(*k, 0.0, *amplitude, a),
            Self::Trig { offset, terms } => {
                offset * (b - a)
                    + terms
                        .iter()
                        .map(|t| trig_primitive(t.k, t.cos_amp, t.sin_amp, b) - trig_primitive(t.k, t.cos_amp, t.sin_amp, a))
                        .sum::<f64>()
            }
            Self::Table { .. } => {
                // trapezoid on each linear piece is exact
                let mut pts = vec![a];
                pts.extend(self.kinks(a, b));
                pts.push(b);
                pts.windows(2)
                    .map(|w| 0.5 * (w[1] - w[0]) * (self.eval(w[0]) + self.eval(w[1])))
                    .sum()
            }
            Self::GaussianBump { .. } => self.integrate_composed(a, b, |v| v),
        }
    }
}

/// `g_k = N ∫_{(k−1)/N}^{k/N} g(x) dx` for `k = 1, …, N`.
pub fn average_initial_data(g: &InitialProfile, n: usize) -> Vec<f64> {
    let h = 1.0 / n as f64;
    (0..n)
        .map(|k| match g {
            InitialProfile::Constant { value } => *value,
            _ => g.integral(k as f64 * h, (k + 1) as f64 * h) / h,
        })
        .collect()
}

/// `‖g^(N) − g‖_{L²(I)}` for cell values `averages` of `g`.
pub fn l2_error_of_average(g: &InitialProfile, averages: &[f64]) -> f64 {
    let h = 1.0 / averages.len() as f64;
    averages
        .iter()
        .enumerate()
        .map(|(k, c)| g.integrate_composed(k as f64 * h, (k + 1) as f64 * h, |v| (v - c) * (v - c)))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone)]
pub struct ContinuumProblem {
    pub kernel: GraphonKernel,
    pub params: ModelParams,
    pub init_phi: InitialProfile,
    pub init_vel: InitialProfile,
    pub grid_n: usize,
}

impl ContinuumProblem {
    pub fn validate(&self) -> Result<()> {
        if self.grid_n == 0 {
            return Err(invalid_param("grid_n must be at least 1"));
        }
        self.init_phi.validate()?;
        self.init_vel.validate()
    }

    /// Nyström system on the grid: cell-averaged kernel, cell-averaged
    /// forcing and `1/N` scaling.
    pub fn nystrom_system(&self) -> Result<FiniteSystem> {
        self.validate()?;
        let n = self.grid_n;
        let forcing = match &self.params.forcing {
            ForcingSpec::ConstantPerNode { .. } => ForcingSpec::ConstantPerNode {
                values: self.params.forcing.cell_averages(n),
            },
            other => other.clone(),
        };
        let params = self.params.with_forcing(forcing)?;
        FiniteSystem::new(cell_averaged_graph(&self.kernel, n)?, params, CouplingScaling::OneOverN)
    }

    /// Cell-averaged initial state on the grid.
    pub fn initial_state(&self) -> Result<OscillatorState> {
        OscillatorState::new(
            average_initial_data(&self.init_phi, self.grid_n),
            average_initial_data(&self.init_vel, self.grid_n),
            0.0,
        )
    }
}

/// Continuum trajectory on the Nyström grid.
#[derive(Debug, Clone)]
pub struct ContinuumSolution {
    pub series: TrajectorySeries,
    pub grid_n: usize,
}

impl ContinuumSolution {
    /// Whether the grid is fine enough to serve as reference for an
    /// `n`-node comparison.
    pub fn is_reference_for(&self, n: usize) -> bool {
        self.grid_n >= 4 * n
    }

    pub fn field(&self) -> StepField {
        crate::dynamics::embed_step_function(&self.series)
    }

    /// `∫_I φ(x, t) dx` at every output time.
    pub fn mean_field(&self) -> Vec<f64> {
        self.series.diagnostics.iter().map(|d| d.mean_phase).collect()
    }
}

pub fn solve_continuum(problem: &ContinuumProblem, t_end: f64, dt: f64) -> Result<ContinuumSolution> {
    let system = problem.nystrom_system()?;
    let series = system.integrate(&problem.initial_state()?, t_end, dt)?;
    Ok(ContinuumSolution {
        series,
        grid_n: problem.grid_n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardOptions {
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PicardSolution {
    pub series: TrajectorySeries,
    pub iterations: usize,
    /// `(L_f + 2 L_D ‖𝒦‖_∞ + 1 + |α|) · T`.
    pub contraction_constant: f64,
    /// Largest ratio of successive updates above round-off level.
    pub empirical_ratio: f64,
    /// Sup-norm update of every iteration.
    pub updates: Vec<f64>,
}

/// Contraction constant of the integral map on `[0, t_horizon]`.
pub fn contraction_constant(params: &ModelParams, kernel: &GraphonKernel, t_horizon: f64) -> f64 {
    (params.lip_f + 2.0 * params.lip_d * kernel.sup_norm() + 1.0 + params.alpha.abs()) * t_horizon
}

/// Fixed point of `φ ↦ g + ∫₀ᵗ ψ`, `ψ ↦ h − ∫₀ᵗ (αψ − F(φ) − f)` on the
/// Nyström grid, with time integrals taken by a fourth-order cumulative
/// rule on the output grid of spacing `dt`.
pub fn picard_solve(
    problem: &ContinuumProblem,
    t_horizon: f64,
    dt: f64,
    options: PicardOptions,
) -> Result<PicardSolution> {
    let constant = contraction_constant(&problem.params, &problem.kernel, t_horizon);
    if constant >= 1.0 {
        return Err(Error::NotContractive {
            constant,
            suggested_horizon: 0.9 * t_horizon / constant,
        });
    }
    let system = problem.nystrom_system()?;
    let init = problem.initial_state()?;
    let times = output_times(0.0, t_horizon, dt)?;
    if times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt) {
        return Err(invalid_param("the Picard horizon must be a multiple of dt"));
    }
    let (n, steps) = (problem.grid_n, times.len());
    let forcing = problem.params.forcing.cell_averages(n);
    let alpha = problem.params.alpha;
    let factor = problem.params.coupling_gain / n as f64;

    // iterates stored node-major: phi[k][i] at node k, time i
    let mut phi: Vec<Vec<f64>> = init.phases.iter().map(|g| vec![*g; steps]).collect();
    let mut psi: Vec<Vec<f64>> = init.velocities.iter().map(|h| vec![*h; steps]).collect();
    let scale = 1.0 + phi.iter().chain(&psi).flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut updates = Vec::new();
    let mut sums = vec![0.0; n];
    let mut snapshot = vec![0.0; n];
    loop {
        // accel[k][i] = −αψ + F(φ) + f
        let mut accel = vec![vec![0.0; steps]; n];
        for i in 0..steps {
            for k in 0..n {
                snapshot[k] = phi[k][i];
            }
            system.coupling_sums(&snapshot, &mut sums);
            for k in 0..n {
                accel[k][i] = -alpha * psi[k][i] + factor * sums[k] + forcing[k];
            }
        }
        let mut update = 0.0f64;
        let new_phi: Vec<Vec<f64>> = (0..n)
            .map(|k| cumulative_integral(&psi[k], dt).into_iter().map(|v| init.phases[k] + v).collect())
            .collect();
        let new_psi: Vec<Vec<f64>> = (0..n)
            .map(|k| cumulative_integral(&accel[k], dt).into_iter().map(|v| init.velocities[k] + v).collect())
            .collect();
        for k in 0..n {
            for i in 0..steps {
                update = update.max((new_phi[k][i] - phi[k][i]).abs());
                update = update.max((new_psi[k][i] - psi[k][i]).abs());
            }
        }
        phi = new_phi;
        psi = new_psi;
        if !update.is_finite() {
            return Err(Error::Divergence { time: t_horizon });
        }
        updates.push(update);
        if update < options.tol {
            break;
        }
        if updates.len() >= options.max_iterations {
            return Err(Error::PicardNotConverged {
                iterations: updates.len(),
                last_update: update,
            });
        }
    }
    let floor = 1e-12 * scale;
    let empirical_ratio = updates
        .windows(2)
        .filter(|w| w[1] > floor)
        .map(|w| w[1] / w[0])
        .fold(0.0, f64::max);

    let mut series = TrajectorySeries::default();
    for (i, t) in times.iter().enumerate() {
        let phases: Vec<f64> = phi.iter().map(|row| row[i]).collect();
        let velocities: Vec<f64> = psi.iter().map(|row| row[i]).collect();
        series.diagnostics.push(Diagnostics::of(alpha, *t, &phases, &velocities));
        series.times.push(*t);
        series.states.push(OscillatorState {
            phases,
            velocities,
            time: *t,
        });
    }
    Ok(PicardSolution {
        series,
        iterations: updates.len(),
        contraction_constant: constant,
        empirical_ratio,
        updates,
    })
}

/// Largest absolute difference between two series on the same grid.
pub fn sup_state_difference(a: &TrajectorySeries, b: &TrajectorySeries) -> Result<f64> {
    if a.times != b.times {
        return Err(Error::InvalidArgument("series are sampled at different times".into()));
    }
    let mut worst = 0.0f64;
    for (x, y) in a.states.iter().zip(&b.states) {
        for (p, q) in x.phases.iter().chain(&x.velocities).zip(y.phases.iter().chain(&y.velocities)) {
            worst = worst.max((p - q).abs());
        }
    }
    Ok(worst)
}
