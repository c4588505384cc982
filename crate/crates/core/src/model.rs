//! Model parameters, the nonlinearity/forcing catalog and the physical to
//! non-dimensional parameter map.
//!
//! The finite system integrated by [`crate::dynamics`] is
//!
//! ```text
//! φ̈_k = -α φ̇_k + (c/N) Σ_ℓ K_kℓ D(φ_ℓ - φ_k) + f_k(t)
//! ```
//!
//! where `c` is [`ModelParams::coupling_gain`] and `D` is a
//! [`NonlinearitySpec`]. The effective coupling function is `c·D`, so all
//! Lipschitz and range bounds below refer to that product.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_param, Error, Result};
use crate::graphs::{CouplingGraph, Provenance};

/// Odd coupling function `D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearitySpec {
    /// `gain · sin(x)`, phases in radians.
    Sine { gain: f64 },
    /// `gain · sin(2πx)`, phases on the unit circle `ℝ/ℤ`.
    #[serde(rename = "sine2pi")]
    Sine2Pi { gain: f64 },
    /// Odd, 1-periodic, piecewise-linear profile. `half_period` holds
    /// `M + 1` samples on the uniform grid `j/(2M)` of `[0, 1/2]`; both end
    /// samples must be zero.
    CustomTable { gain: f64, half_period: Vec<f64> },
}

impl NonlinearitySpec {
    pub fn sine(gain: f64) -> Self {
        Self::Sine { gain }
    }

    pub fn sine2pi(gain: f64) -> Self {
        Self::Sine2Pi { gain }
    }

    pub fn validate(&self) -> Result<()> {
        let gain = self.gain();
        if !gain.is_finite() {
            return Err(invalid_param("nonlinearity gain must be finite"));
        }
        if let Self::CustomTable { half_period, .. } = self {
            if half_period.len() < 2 {
                return Err(invalid_param("custom table needs at least two samples"));
            }
            if half_period.iter().any(|v| !v.is_finite()) {
                return Err(invalid_param("custom table samples must be finite"));
            }
            let last = half_period[half_period.len() - 1];
            if half_period[0] != 0.0 || last != 0.0 {
                return Err(invalid_param(
                    "custom table must vanish at 0 and 1/2 to be odd and 1-periodic",
                ));
            }
        }
        Ok(())
    }

    pub fn gain(&self) -> f64 {
        match self {
            Self::Sine { gain } | Self::Sine2Pi { gain } | Self::CustomTable { gain, .. } => *gain,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Sine { gain } => gain * x.sin(),
            Self::Sine2Pi { gain } => gain * (TAU * x).sin(),
            Self::CustomTable { gain, half_period } => gain * eval_odd_table(half_period, x),
        }
    }

    /// `(amplitude, ω)` when `D(x) = amplitude · sin(ωx)`.
    pub fn harmonic(&self) -> Option<(f64, f64)> {
        match self {
            Self::Sine { gain } => Some((*gain, 1.0)),
            Self::Sine2Pi { gain } => Some((*gain, TAU)),
            Self::CustomTable { .. } => None,
        }
    }

    /// Lipschitz constant of `D`.
    pub fn lipschitz(&self) -> f64 {
        match self {
            Self::Sine { gain } => gain.abs(),
            Self::Sine2Pi { gain } => TAU * gain.abs(),
            Self::CustomTable { gain, half_period } => {
                let m = (half_period.len() - 1) as f64;
                let steepest = half_period
                    .windows(2)
                    .map(|w| (w[1] - w[0]).abs())
                    .fold(0.0, f64::max);
                gain.abs() * steepest * 2.0 * m
            }
        }
    }

    /// `sup |D|`.
    pub fn range_bound(&self) -> f64 {
        match self {
            Self::Sine { gain } | Self::Sine2Pi { gain } => gain.abs(),
            Self::CustomTable { gain, half_period } => {
                gain.abs() * half_period.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
            }
        }
    }

    /// `D'(0)`, the coefficient of the linearisation around a constant state.
    pub fn slope_at_zero(&self) -> f64 {
        match self {
            Self::Sine { gain } => *gain,
            Self::Sine2Pi { gain } => TAU * gain,
            Self::CustomTable { gain, half_period } => {
                let m = (half_period.len() - 1) as f64;
                gain * half_period[1] * 2.0 * m
            }
        }
    }
}

fn eval_odd_table(half_period: &[f64], x: f64) -> f64 {
    // reduce to [-1/2, 1/2]
    let y = x - x.round();
    let (sign, y) = if y < 0.0 { (-1.0, -y) } else { (1.0, y) };
    let segments = half_period.len() - 1;
    let pos = (y * 2.0 * segments as f64).min(segments as f64);
    let j = (pos.floor() as usize).min(segments - 1);
    let frac = pos - j as f64;
    sign * (half_period[j] * (1.0 - frac) + half_period[j + 1] * frac)
}

/// Forcing term `f`. The catalog entries are independent of the phase, so
/// their Lipschitz constant in `φ` is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForcingSpec {
    Zero,
    /// Per-node constants `P_k`. On a grid of a different size they are read
    /// as a piecewise-constant profile `P(x)` on `[0, 1]`.
    ConstantPerNode { values: Vec<f64> },
    UniformConstant { value: f64 },
}

impl ForcingSpec {
    pub fn is_zero(&self) -> bool {
        match self {
            Self::Zero => true,
            Self::ConstantPerNode { values } => values.iter().all(|v| *v == 0.0),
            Self::UniformConstant { value } => *value == 0.0,
        }
    }

    pub fn lipschitz(&self) -> f64 {
        0.0
    }

    fn validate(&self) -> Result<()> {
        let finite = match self {
            Self::Zero => true,
            Self::ConstantPerNode { values } => values.iter().all(|v| v.is_finite()),
            Self::UniformConstant { value } => value.is_finite(),
        };
        if finite {
            Ok(())
        } else {
            Err(invalid_param("forcing values must be finite"))
        }
    }

    /// Node values for a system of exactly `n` nodes.
    pub fn node_values(&self, n: usize) -> Result<Vec<f64>> {
        match self {
            Self::Zero => Ok(vec![0.0; n]),
            Self::UniformConstant { value } => Ok(vec![*value; n]),
            Self::ConstantPerNode { values } => {
                if values.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: values.len(),
                    });
                }
                Ok(values.clone())
            }
        }
    }

    /// Cell averages over `n` uniform cells of the piecewise-constant
    /// profile defined by the forcing.
    pub fn cell_averages(&self, n: usize) -> Vec<f64> {
        match self {
            Self::Zero => vec![0.0; n],
            Self::UniformConstant { value } => vec![*value; n],
            Self::ConstantPerNode { values } => {
                let m = values.len();
                if m == n {
                    return values.clone();
                }
                (0..n)
                    .map(|k| {
                        // overlap of [k/n, (k+1)/n) with [j/m, (j+1)/m), scaled by n
                        let (lo, hi) = (k as f64 / n as f64, (k + 1) as f64 / n as f64);
                        let first = (lo * m as f64).floor() as usize;
                        let last = ((hi * m as f64).ceil() as usize).min(m);
                        (first..last)
                            .map(|j| {
                                let a = (j as f64 / m as f64).max(lo);
                                let b = ((j + 1) as f64 / m as f64).min(hi);
                                values[j] * (b - a).max(0.0)
                            })
                            .sum::<f64>()
                            * n as f64
                    })
                    .collect()
            }
        }
    }
}

/// Non-dimensional model parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub coupling_gain: f64,
    pub nonlinearity: NonlinearitySpec,
    pub forcing: ForcingSpec,
    /// Lipschitz constant of the effective coupling function `coupling_gain · D`.
    pub lip_d: f64,
    pub lip_f: f64,
}

impl ModelParams {
    pub fn new(
        alpha: f64,
        coupling_gain: f64,
        nonlinearity: NonlinearitySpec,
        forcing: ForcingSpec,
    ) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(invalid_param("alpha must be finite"));
        }
        if !(coupling_gain >= 0.0 && coupling_gain.is_finite()) {
            return Err(invalid_param(format!(
                "coupling gain must be finite and non-negative, got {coupling_gain}"
            )));
        }
        nonlinearity.validate()?;
        forcing.validate()?;
        let lip_d = coupling_gain * nonlinearity.lipschitz();
        let lip_f = forcing.lipschitz();
        Ok(Self {
            alpha,
            coupling_gain,
            nonlinearity,
            forcing,
            lip_d,
            lip_f,
        })
    }

    /// The unforced model `D(x) = K sin(2πx)` used for stability questions.
    pub fn sine2pi(alpha: f64, coupling_gain: f64) -> Result<Self> {
        Self::new(
            alpha,
            coupling_gain,
            NonlinearitySpec::sine2pi(1.0),
            ForcingSpec::Zero,
        )
    }

    /// Effective coupling function `coupling_gain · D(x)`.
    pub fn coupling(&self, x: f64) -> f64 {
        self.coupling_gain * self.nonlinearity.eval(x)
    }

    /// Uniform bound `C` on `|coupling_gain · D|`.
    pub fn d_range_bound(&self) -> f64 {
        self.coupling_gain * self.nonlinearity.range_bound()
    }

    /// Linear coefficient `coupling_gain · D'(0)`.
    pub fn linear_gain(&self) -> f64 {
        self.coupling_gain * self.nonlinearity.slope_at_zero()
    }

    pub fn with_forcing(&self, forcing: ForcingSpec) -> Result<Self> {
        Self::new(
            self.alpha,
            self.coupling_gain,
            self.nonlinearity.clone(),
            forcing,
        )
    }
}

/// Phases and phase velocities at one instant. Phases are unwrapped reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillatorState {
    pub phases: Vec<f64>,
    pub velocities: Vec<f64>,
    pub time: f64,
}

impl OscillatorState {
    pub fn new(phases: Vec<f64>, velocities: Vec<f64>, time: f64) -> Result<Self> {
        if phases.is_empty() {
            return Err(invalid_param("state needs at least one node"));
        }
        if phases.len() != velocities.len() {
            return Err(Error::DimensionMismatch {
                expected: phases.len(),
                got: velocities.len(),
            });
        }
        let state = Self {
            phases,
            velocities,
            time,
        };
        if !state.is_finite() {
            return Err(invalid_param("state entries must be finite"));
        }
        Ok(state)
    }

    /// All phases equal to `phase`, all velocities zero.
    pub fn constant(n: usize, phase: f64) -> Result<Self> {
        Self::new(vec![phase; n], vec![0.0; n], 0.0)
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.time.is_finite()
            && self.phases.iter().all(|v| v.is_finite())
            && self.velocities.iter().all(|v| v.is_finite())
    }
}

/// Physical swing-equation parameters with equal inertia and friction on
/// every machine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub inertia: f64,
    pub friction: f64,
    /// Reference angular frequency in rad/s.
    pub ref_frequency: f64,
    pub p_source: Vec<f64>,
    /// Row-major `N × N` line capacities.
    pub p_max: Vec<f64>,
}

impl PhysicalParams {
    fn validate(&self) -> Result<usize> {
        for (name, v) in [
            ("inertia", self.inertia),
            ("friction", self.friction),
            ("reference frequency", self.ref_frequency),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid_param(format!("{name} must be positive, got {v}")));
            }
        }
        let n = self.p_source.len();
        if n == 0 {
            return Err(invalid_param("at least one machine is required"));
        }
        if self.p_max.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: self.p_max.len(),
            });
        }
        for k in 0..n {
            for l in 0..n {
                let v = self.p_max[k * n + l];
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(invalid_param("line capacities must be non-negative"));
                }
                if v != self.p_max[l * n + k] {
                    return Err(invalid_param("line capacity matrix must be symmetric"));
                }
            }
        }
        Ok(n)
    }
}

/// Maps physical parameters onto the non-dimensional model
/// `α = 2κ𝓘`, `P_k = (P_source,k − κ𝔉²)/(𝓘𝔉²)`, `K_kℓ = P_max,ℓk/(𝓘𝔉)`.
///
/// The returned parameters use `D = sin` with unit gain; the coupling
/// strengths live in the graph, which must be integrated without the `1/N`
/// factor to reproduce the swing equation.
pub fn physical_to_nondimensional(phys: &PhysicalParams) -> Result<(ModelParams, CouplingGraph)> {
    let n = phys.validate()?;
    let (inertia, friction, freq) = (phys.inertia, phys.friction, phys.ref_frequency);
    let alpha = 2.0 * friction * inertia;
    let forcing = phys
        .p_source
        .iter()
        .map(|p| (p - friction * freq * freq) / (inertia * freq * freq))
        .collect();
    let mut weights = vec![0.0; n * n];
    for k in 0..n {
        for l in 0..n {
            if k != l {
                weights[k * n + l] = phys.p_max[l * n + k] / (inertia * freq);
            }
        }
    }
    let params = ModelParams::new(
        alpha,
        1.0,
        NonlinearitySpec::sine(1.0),
        ForcingSpec::ConstantPerNode { values: forcing },
    )?;
    let graph = CouplingGraph::from_weights(n, weights, Provenance::Explicit)?;
    Ok((params, graph))
}

/// Phase drift removed by [`rescale_uniform_forcing`]: the original
/// trajectory is `φ_k(t) = ψ_k(t) + rate · t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseShift {
    pub rate: f64,
}

impl PhaseShift {
    /// Maps a state of the rescaled system back to the original one.
    pub fn restore(&self, state: &OscillatorState) -> OscillatorState {
        let shift = self.rate * state.time;
        OscillatorState {
            phases: state.phases.iter().map(|p| p + shift).collect(),
            velocities: state.velocities.iter().map(|v| v + self.rate).collect(),
            time: state.time,
        }
    }
}

/// Removes a uniform constant forcing `P` by moving to the frame rotating
/// with `P/α`.
pub fn rescale_uniform_forcing(params: &ModelParams) -> Result<(ModelParams, PhaseShift)> {
    let value = match &params.forcing {
        ForcingSpec::Zero => 0.0,
        ForcingSpec::UniformConstant { value } => *value,
        ForcingSpec::ConstantPerNode { .. } => {
            return Err(Error::InvalidArgument(
                "rescaling needs uniform constant forcing".into(),
            ))
        }
    };
    if params.alpha == 0.0 {
        return Err(Error::RescalingUndefined);
    }
    let rescaled = params.with_forcing(ForcingSpec::Zero)?;
    Ok((rescaled, PhaseShift { rate: value / params.alpha }))
}

/// Evaluates `D(x)` for a catalog entry.
pub fn evaluate_nonlinearity(spec: &NonlinearitySpec, x: f64) -> f64 {
    spec.eval(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit_phys(p_source: f64, p_max: f64) -> PhysicalParams {
        PhysicalParams {
            inertia: 1.0,
            friction: 0.5,
            ref_frequency: 1.0,
            p_source: vec![p_source; 3],
            p_max: vec![p_max; 9],
        }
    }

    #[test]
    fn unit_physical_parameters_collapse() {
        let (params, graph) = physical_to_nondimensional(&unit_phys(0.5, 1.0)).unwrap();
        assert_eq!(params.alpha, 1.0);
        assert_eq!(
            params.forcing,
            ForcingSpec::ConstantPerNode {
                values: vec![0.0; 3]
            }
        );
        assert_eq!(graph.weight(0, 1), 1.0);
        assert_eq!(graph.weight(1, 1), 0.0);
    }

    #[test]
    fn scaled_physical_parameters() {
        let phys = PhysicalParams {
            inertia: 2.0,
            friction: 0.25,
            ref_frequency: 2.0,
            p_source: vec![3.0, 3.0],
            p_max: vec![4.0; 4],
        };
        let (params, graph) = physical_to_nondimensional(&phys).unwrap();
        assert_relative_eq!(params.alpha, 1.0);
        match params.forcing {
            ForcingSpec::ConstantPerNode { values } => {
                assert_relative_eq!(values[0], 0.25);
                assert_relative_eq!(values[1], 0.25);
            }
            other => panic!("unexpected forcing {other:?}"),
        }
        assert_relative_eq!(graph.weight(0, 1), 1.0);
    }

    #[test]
    fn zero_frequency_rejected() {
        let mut phys = unit_phys(0.5, 1.0);
        phys.ref_frequency = 0.0;
        assert!(matches!(
            physical_to_nondimensional(&phys),
            Err(Error::InvalidParameter(_))
        ));
        let mut phys = unit_phys(0.5, 1.0);
        phys.inertia = -1.0;
        assert!(physical_to_nondimensional(&phys).is_err());
    }

    #[test]
    fn asymmetric_capacity_rejected() {
        let mut phys = unit_phys(0.5, 1.0);
        phys.p_max[1] = 2.0;
        assert!(physical_to_nondimensional(&phys).is_err());
    }

    #[test]
    fn rescaling_examples() {
        let base = ModelParams::new(
            2.0,
            1.0,
            NonlinearitySpec::sine(1.0),
            ForcingSpec::UniformConstant { value: 0.0 },
        )
        .unwrap();
        let (rescaled, shift) = rescale_uniform_forcing(&base).unwrap();
        assert_eq!(shift.rate, 0.0);
        assert!(rescaled.forcing.is_zero());
        assert_eq!(rescaled.alpha, base.alpha);

        let forced = base
            .with_forcing(ForcingSpec::UniformConstant { value: 1.0 })
            .unwrap();
        let (rescaled, shift) = rescale_uniform_forcing(&forced).unwrap();
        assert_eq!(shift.rate, 0.5);
        assert_eq!(rescaled.forcing, ForcingSpec::Zero);

        let undamped = ModelParams::new(
            0.0,
            1.0,
            NonlinearitySpec::sine(1.0),
            ForcingSpec::UniformConstant { value: 1.0 },
        )
        .unwrap();
        assert!(matches!(
            rescale_uniform_forcing(&undamped),
            Err(Error::RescalingUndefined)
        ));
    }

    #[test]
    fn nonlinearity_examples() {
        assert_relative_eq!(NonlinearitySpec::sine2pi(1.0).eval(0.25), 1.0);
        assert_relative_eq!(NonlinearitySpec::sine(2.0).eval(PI / 6.0), 1.0, epsilon = 1e-15);
        assert_eq!(NonlinearitySpec::sine2pi(3.0).eval(0.0), 0.0);
    }

    #[test]
    fn lipschitz_constants_match_catalog() {
        let params = ModelParams::sine2pi(1.0, 3.0).unwrap();
        assert_relative_eq!(params.lip_d, TAU * 3.0);
        assert_eq!(params.lip_f, 0.0);
        assert_relative_eq!(params.d_range_bound(), 3.0);
        assert!(ModelParams::sine2pi(1.0, -1.0).is_err());
    }

    #[test]
    fn custom_table_is_odd_and_periodic() {
        let table = NonlinearitySpec::CustomTable {
            gain: 1.0,
            half_period: vec![0.0, 1.0, 0.5, 0.0],
        };
        table.validate().unwrap();
        assert_relative_eq!(table.eval(1.0 / 6.0), 1.0);
        assert_relative_eq!(table.eval(-1.0 / 6.0), -1.0);
        assert_relative_eq!(table.eval(1.0 / 6.0 + 2.0), 1.0, epsilon = 1e-12);
        assert_relative_eq!(table.eval(1.0 / 12.0), 0.5, epsilon = 1e-12);
        assert_relative_eq!(table.lipschitz(), 6.0);
        assert_relative_eq!(table.slope_at_zero(), 6.0);

        let bad = NonlinearitySpec::CustomTable {
            gain: 1.0,
            half_period: vec![0.0, 1.0, 0.5],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn per_node_forcing_cell_averages() {
        let forcing = ForcingSpec::ConstantPerNode {
            values: vec![1.0, 3.0],
        };
        assert_eq!(forcing.cell_averages(4), vec![1.0, 1.0, 3.0, 3.0]);
        assert_eq!(forcing.cell_averages(1), vec![2.0]);
        assert!(forcing.node_values(3).is_err());
    }

    #[test]
    fn state_validation() {
        assert!(OscillatorState::new(vec![], vec![], 0.0).is_err());
        assert!(OscillatorState::new(vec![0.0], vec![0.0, 1.0], 0.0).is_err());
        assert!(OscillatorState::new(vec![f64::NAN], vec![0.0], 0.0).is_err());
    }

    fn catalog() -> Vec<NonlinearitySpec> {
        vec![
            NonlinearitySpec::sine(1.7),
            NonlinearitySpec::sine2pi(0.8),
            NonlinearitySpec::CustomTable {
                gain: 1.3,
                half_period: vec![0.0, 0.7, 1.0, 0.2, 0.0],
            },
        ]
    }

    proptest! {
        #[test]
        fn catalog_respects_lipschitz_bound(x in -5.0f64..5.0, y in -5.0f64..5.0) {
            for spec in catalog() {
                let lhs = (spec.eval(x) - spec.eval(y)).abs();
                prop_assert!(lhs <= spec.lipschitz() * (x - y).abs() + 1e-12);
            }
        }

        #[test]
        fn sine_kinds_are_exactly_odd(x in -10.0f64..10.0) {
            for spec in [NonlinearitySpec::sine(2.3), NonlinearitySpec::sine2pi(0.4)] {
                prop_assert_eq!(spec.eval(-x), -spec.eval(x));
            }
        }
    }
}
