//! Fixed-step RK4 integration of the finite second-order oscillator system
//!
//! `φ̈_k = −α φ̇_k + (c/N) Σ_ℓ K_kℓ D(φ_ℓ − φ_k) + f_k`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_param, Error, Result};
use crate::graphons::GraphonKernel;
use crate::graphs::{averaged_graph, common_refinement, CouplingGraph};
use crate::model::{ModelParams, OscillatorState};

/// Rows are evaluated in parallel above this size. Each row is summed
/// sequentially, so results do not depend on the thread count.
const PARALLEL_ROWS: usize = 192;

/// Whether the coupling sum carries the `1/N` factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingScaling {
    #[default]
    OneOverN,
    None,
}

#[derive(Debug, Clone)]
pub struct FiniteSystem {
    graph: CouplingGraph,
    params: ModelParams,
    scaling: CouplingScaling,
    forcing: Vec<f64>,
}

impl FiniteSystem {
    pub fn new(graph: CouplingGraph, params: ModelParams, scaling: CouplingScaling) -> Result<Self> {
        let forcing = params.forcing.node_values(graph.n())?;
        Ok(Self {
            graph,
            params,
            scaling,
            forcing,
        })
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn graph(&self) -> &CouplingGraph {
        &self.graph
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn scaling(&self) -> CouplingScaling {
        self.scaling
    }

    fn coupling_factor(&self) -> f64 {
        match self.scaling {
            CouplingScaling::OneOverN => self.params.coupling_gain / self.n() as f64,
            CouplingScaling::None => self.params.coupling_gain,
        }
    }

    /// `Σ_ℓ K_kℓ D(φ_ℓ − φ_k)` for every `k`, written into `out`.
    pub fn coupling_sums(&self, phases: &[f64], out: &mut [f64]) {
        let n = self.n();
        let nl = &self.params.nonlinearity;
        match nl.harmonic() {
            Some((amp, omega)) => {
                // sin(ω(φ_ℓ − φ_k)) = sin ωφ_ℓ cos ωφ_k − cos ωφ_ℓ sin ωφ_k
                let (s, c): (Vec<f64>, Vec<f64>) = phases.iter().map(|p| (omega * p).sin_cos()).unzip();
                // per-term differences vanish exactly for equal phases
                let row = |k: usize| {
                    let w = self.graph.row(k);
                    let (sk, ck) = (s[k], c[k]);
                    let mut acc = 0.0;
                    for l in 0..n {
                        acc += w[l] * (s[l] * ck - c[l] * sk);
                    }
                    amp * acc
                };
                fill_rows(out, row);
            }
            None => {
                let row = |k: usize| {
                    let w = self.graph.row(k);
                    let pk = phases[k];
                    (0..n)
                        .filter(|&l| w[l] != 0.0)
                        .map(|l| w[l] * nl.eval(phases[l] - pk))
                        .sum::<f64>()
                };
                fill_rows(out, row);
            }
        }
    }

    /// Right-hand side written into `dphi` and `dv`.
    pub fn rhs_into(&self, phases: &[f64], velocities: &[f64], dphi: &mut [f64], dv: &mut [f64]) {
        dphi.copy_from_slice(velocities);
        self.coupling_sums(phases, dv);
        let (alpha, c) = (self.params.alpha, self.coupling_factor());
        for k in 0..self.n() {
            dv[k] = -alpha * velocities[k] + c * dv[k] + self.forcing[k];
        }
    }

    /// `(φ̇, φ̈)` at a state.
    pub fn rhs(&self, state: &OscillatorState) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_dimension(state)?;
        let n = self.n();
        let (mut dphi, mut dv) = (vec![0.0; n], vec![0.0; n]);
        self.rhs_into(&state.phases, &state.velocities, &mut dphi, &mut dv);
        Ok((dphi, dv))
    }

    fn check_dimension(&self, state: &OscillatorState) -> Result<()> {
        if state.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: state.len(),
            });
        }
        Ok(())
    }

    /// Runs RK4 from `init` to `t_end`, calling `observe` on the initial
    /// state and after every step. The last step is shortened to land on
    /// `t_end` exactly.
    pub fn integrate_observed(
        &self,
        init: &OscillatorState,
        t_end: f64,
        dt: f64,
        mut observe: impl FnMut(f64, &[f64], &[f64]),
    ) -> Result<()> {
        self.check_dimension(init)?;
        if !init.is_finite() {
            return Err(invalid_param("initial state must be finite"));
        }
        let times = output_times(init.time, t_end, dt)?;
        let n = self.n();
        let mut phi = init.phases.clone();
        let mut v = init.velocities.clone();
        let mut k = [(); 4].map(|_| (vec![0.0; n], vec![0.0; n]));
        let (mut tmp_phi, mut tmp_v) = (vec![0.0; n], vec![0.0; n]);
        observe(times[0], &phi, &v);
        for w in times.windows(2) {
            let h = w[1] - w[0];
            for stage in 0..4 {
                let frac = match stage {
                    0 => 0.0,
                    1 | 2 => 0.5 * h,
                    _ => h,
                };
                if stage == 0 {
                    tmp_phi.copy_from_slice(&phi);
                    tmp_v.copy_from_slice(&v);
                } else {
                    let (pp, pv) = &k[stage - 1];
                    for i in 0..n {
                        tmp_phi[i] = phi[i] + frac * pp[i];
                        tmp_v[i] = v[i] + frac * pv[i];
                    }
                }
                let (dp, dv) = &mut k[stage];
                self.rhs_into(&tmp_phi, &tmp_v, dp, dv);
            }
            let sixth = h / 6.0;
            for i in 0..n {
                phi[i] += sixth * (k[0].0[i] + 2.0 * k[1].0[i] + 2.0 * k[2].0[i] + k[3].0[i]);
                v[i] += sixth * (k[0].1[i] + 2.0 * k[1].1[i] + 2.0 * k[2].1[i] + k[3].1[i]);
            }
            if phi.iter().chain(&v).any(|x| !x.is_finite()) {
                return Err(Error::Divergence { time: w[1] });
            }
            observe(w[1], &phi, &v);
        }
        Ok(())
    }

    /// Full trajectory sampled at every step, with diagnostics.
    pub fn integrate(&self, init: &OscillatorState, t_end: f64, dt: f64) -> Result<TrajectorySeries> {
        let alpha = self.params.alpha;
        let mut series = TrajectorySeries::default();
        self.integrate_observed(init, t_end, dt, |t, phi, v| {
            series.diagnostics.push(Diagnostics::of(alpha, t, phi, v));
            series.times.push(t);
            series.states.push(OscillatorState {
                phases: phi.to_vec(),
                velocities: v.to_vec(),
                time: t,
            });
        })?;
        Ok(series)
    }

    /// State at `t_end` only.
    pub fn integrate_final(&self, init: &OscillatorState, t_end: f64, dt: f64) -> Result<OscillatorState> {
        let mut last = init.clone();
        self.integrate_observed(init, t_end, dt, |t, phi, v| {
            if t == t_end {
                last = OscillatorState {
                    phases: phi.to_vec(),
                    velocities: v.to_vec(),
                    time: t,
                };
            }
        })?;
        Ok(last)
    }
}

fn fill_rows(out: &mut [f64], row: impl Fn(usize) -> f64 + Sync) {
    if out.len() >= PARALLEL_ROWS {
        out.par_iter_mut().enumerate().for_each(|(k, o)| *o = row(k));
    } else {
        out.iter_mut().enumerate().for_each(|(k, o)| *o = row(k));
    }
}

/// Output grid `t0, t0 + dt, …, t_end` used by every integrator.
pub fn output_times(t0: f64, t_end: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid_param(format!("dt must be positive, got {dt}")));
    }
    if !(t_end >= t0 && t_end.is_finite()) {
        return Err(invalid_param(format!("t_end = {t_end} must be finite and not before {t0}")));
    }
    let q = (t_end - t0) / dt;
    let full = if (q - q.round()).abs() <= 1e-9 * q.max(1.0) {
        q.round()
    } else {
        q.floor()
    } as usize;
    let mut times: Vec<f64> = (0..=full).map(|i| t0 + i as f64 * dt).collect();
    if full > 0 && (times[full] - t_end).abs() <= 1e-9 * dt {
        times[full] = t_end;
    } else if times[full] < t_end {
        times.push(t_end);
    }
    Ok(times)
}

/// Conserved-quantity and mean-phase channels at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `mean(φ̇ + αφ)`.
    pub q1: f64,
    /// `−(1/α) mean(φ̇) e^{αt}`; absent when `α = 0`.
    pub q2: Option<f64>,
    pub mean_phase: f64,
}

impl Diagnostics {
    pub fn of(alpha: f64, t: f64, phases: &[f64], velocities: &[f64]) -> Self {
        let n = phases.len() as f64;
        let mean_phase = phases.iter().sum::<f64>() / n;
        let mean_vel = velocities.iter().sum::<f64>() / n;
        Self {
            q1: mean_vel + alpha * mean_phase,
            q2: (alpha != 0.0).then(|| -mean_vel * (alpha * t).exp() / alpha),
            mean_phase,
        }
    }
}

/// States and diagnostics at increasing times.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySeries {
    pub times: Vec<f64>,
    pub states: Vec<OscillatorState>,
    pub diagnostics: Vec<Diagnostics>,
}

impl TrajectorySeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&OscillatorState> {
        self.states.last()
    }

    pub fn node_count(&self) -> usize {
        self.states.first().map_or(0, |s| s.len())
    }
}

/// [`FiniteSystem::integrate`] on the averaged graph with `1/N` scaling.
pub fn integrate_averaged(
    kernel: &GraphonKernel,
    n: usize,
    params: &ModelParams,
    init: &OscillatorState,
    t_end: f64,
    dt: f64,
) -> Result<TrajectorySeries> {
    let system = FiniteSystem::new(averaged_graph(kernel, n)?, params.clone(), CouplingScaling::OneOverN)?;
    system.integrate(init, t_end, dt)
}

/// `(Q1(t), Q2(t))` read off a series.
pub fn conserved_quantities(series: &TrajectorySeries, alpha: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if alpha == 0.0 {
        return Err(Error::ZeroDamping);
    }
    Ok(series
        .times
        .iter()
        .zip(&series.states)
        .map(|(t, s)| {
            let d = Diagnostics::of(alpha, *t, &s.phases, &s.velocities);
            (d.q1, d.q2.unwrap_or(f64::NAN))
        })
        .unzip())
}

/// Exact `‖a − b‖_{L²(I)}` for step functions on uniform partitions of
/// possibly different sizes.
pub fn step_l2_distance(a: &[f64], b: &[f64]) -> f64 {
    common_refinement(a.len(), b.len())
        .iter()
        .map(|&(len, i, j)| {
            let d = a[i] - b[j];
            len * d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// `‖a‖_{L²(I)}` of a step function.
pub fn step_l2_norm(a: &[f64]) -> f64 {
    (a.iter().map(|x| x * x).sum::<f64>() / a.len() as f64).sqrt()
}

/// Piecewise-constant phase field `φ^(N)(x, t) = φ_k(t)` for
/// `x ∈ [(k−1)/N, k/N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepField {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

pub fn embed_step_function(series: &TrajectorySeries) -> StepField {
    StepField {
        times: series.times.clone(),
        values: series.states.iter().map(|s| s.phases.clone()).collect(),
    }
}

impl StepField {
    pub fn eval(&self, x: f64, time_index: usize) -> f64 {
        let row = &self.values[time_index];
        let k = ((x * row.len() as f64).floor().max(0.0) as usize).min(row.len() - 1);
        row[k]
    }

    pub fn l2_distance_at(&self, other: &StepField, time_index: usize) -> f64 {
        step_l2_distance(&self.values[time_index], &other.values[time_index])
    }

    /// `max_t ‖self(·, t) − other(·, t)‖_{L²(I)}` over the shared output
    /// times.
    pub fn sup_l2_distance(&self, other: &StepField) -> Result<f64> {
        if self.times != other.times {
            return Err(Error::InvalidArgument("fields are sampled at different times".into()));
        }
        Ok((0..self.times.len())
            .map(|i| self.l2_distance_at(other, i))
            .fold(0.0, f64::max))
    }
}

/// Empirical order `log₂(e(dt)/e(dt/2))`, with errors measured in the
/// max norm over the coarse output times against a `dt/8` run.
pub fn self_convergence_order(system: &FiniteSystem, init: &OscillatorState, t_end: f64, dt: f64) -> Result<f64> {
    let runs = [1usize, 2, 8]
        .iter()
        .map(|&d| system.integrate(init, t_end, dt / d as f64))
        .collect::<Result<Vec<_>>>()?;
    let coarse = &runs[0];
    let error = |run: &TrajectorySeries, stride: usize| {
        let mut worst = 0.0f64;
        for i in 0..coarse.len() {
            let (a, b) = (&run.states[i * stride], &runs[2].states[i * 8]);
            for (x, y) in a.phases.iter().chain(&a.velocities).zip(b.phases.iter().chain(&b.velocities)) {
                worst = worst.max((x - y).abs());
            }
        }
        worst
    };
    if coarse.times.len() != (runs[2].times.len() - 1) / 8 + 1 {
        return Err(Error::InvalidArgument("t_end must be a multiple of dt".into()));
    }
    Ok((error(coarse, 1) / error(&runs[1], 2)).log2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphons::{small_world_kernel, SmallWorldParams};
    use crate::graphs::{graph_from_graphon, sample_k_random_graph, Provenance};
    use crate::model::{ForcingSpec, NonlinearitySpec};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn ring(n: usize, alpha: f64) -> FiniteSystem {
        let k = small_world_kernel(&SmallWorldParams::insertion(0.1, 0.25).unwrap()).unwrap();
        let params = ModelParams::sine2pi(alpha, 1.0).unwrap();
        FiniteSystem::new(graph_from_graphon(&k, n).unwrap(), params, CouplingScaling::OneOverN).unwrap()
    }

    fn smooth_init(n: usize) -> OscillatorState {
        let x = |k: usize| (k as f64 + 0.5) / n as f64;
        OscillatorState::new(
            (0..n).map(|k| 0.3 * (2.0 * PI * x(k)).sin() + 0.1 * (6.0 * PI * x(k)).cos()).collect(),
            (0..n).map(|k| 0.2 + 0.4 * (4.0 * PI * x(k)).cos()).collect(),
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn output_grid_lands_on_t_end() {
        let t = output_times(0.0, 2.0, 0.001).unwrap();
        assert_eq!(t.len(), 2001);
        assert_eq!(*t.last().unwrap(), 2.0);
        let t = output_times(0.0, 1.0, 0.3).unwrap();
        assert_eq!(t.len(), 5);
        assert_eq!(t[4], 1.0);
        assert_eq!(output_times(1.0, 1.0, 0.1).unwrap(), vec![1.0]);
        assert!(output_times(0.0, 1.0, 0.0).is_err());
        assert!(output_times(1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn rhs_examples() {
        let sys = ring(6, 0.7);
        let state = OscillatorState::new(vec![0.3; 6], vec![1.0, -2.0, 0.5, 0.0, 3.0, 1.0], 0.0).unwrap();
        let (dphi, dv) = sys.rhs(&state).unwrap();
        assert_eq!(dphi, state.velocities);
        for (a, v) in dv.iter().zip(&state.velocities) {
            assert_relative_eq!(*a, -0.7 * v, epsilon = 1e-15);
        }

        let graph = CouplingGraph::from_weights(2, vec![0.0, 1.0, 1.0, 0.0], Provenance::Explicit).unwrap();
        let params = ModelParams::new(0.0, 1.0, NonlinearitySpec::sine(1.0), ForcingSpec::Zero).unwrap();
        let sys = FiniteSystem::new(graph, params, CouplingScaling::OneOverN).unwrap();
        let state = OscillatorState::new(vec![0.0, PI / 2.0], vec![0.0, 0.0], 0.0).unwrap();
        let (_, dv) = sys.rhs(&state).unwrap();
        assert_relative_eq!(dv[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(dv[1], -0.5, epsilon = 1e-15);
    }

    #[test]
    fn total_acceleration_balances_damping() {
        let sys = ring(20, 0.4);
        let state = smooth_init(20);
        let (_, dv) = sys.rhs(&state).unwrap();
        let total: f64 = dv.iter().sum();
        let expected = -0.4 * state.velocities.iter().sum::<f64>();
        assert!((total - expected).abs() < 1e-13);
    }

    #[test]
    fn custom_table_matches_sine2pi_on_its_nodes() {
        // a two-segment table is a hat, not a sine; check the direct path
        let table = NonlinearitySpec::CustomTable {
            gain: 1.0,
            half_period: vec![0.0, 1.0, 0.0],
        };
        let graph = CouplingGraph::from_weights(2, vec![0.0, 2.0, 2.0, 0.0], Provenance::Explicit).unwrap();
        let params = ModelParams::new(1.0, 1.0, table, ForcingSpec::UniformConstant { value: 0.25 }).unwrap();
        let sys = FiniteSystem::new(graph, params, CouplingScaling::None).unwrap();
        let state = OscillatorState::new(vec![0.0, 0.125], vec![0.0, 0.0], 0.0).unwrap();
        let (_, dv) = sys.rhs(&state).unwrap();
        assert_relative_eq!(dv[0], 2.0 * 0.5 + 0.25);
        assert_relative_eq!(dv[1], -2.0 * 0.5 + 0.25);
    }

    #[test]
    fn forcing_dimension_is_checked() {
        let graph = CouplingGraph::from_weights(2, vec![0.0; 4], Provenance::Explicit).unwrap();
        let params = ModelParams::new(
            1.0,
            1.0,
            NonlinearitySpec::sine(1.0),
            ForcingSpec::ConstantPerNode { values: vec![1.0; 3] },
        )
        .unwrap();
        assert!(FiniteSystem::new(graph, params, CouplingScaling::None).is_err());
    }

    #[test]
    fn constant_state_is_stationary() {
        let sys = ring(32, 1.0);
        let init = OscillatorState::constant(32, 0.7).unwrap();
        let series = sys.integrate(&init, 3.0, 0.01).unwrap();
        for s in &series.states {
            assert!(s.phases.iter().all(|p| (p - 0.7).abs() < 1e-14));
            assert!(s.velocities.iter().all(|v| v.abs() < 1e-14));
        }
        let (q1, q2) = conserved_quantities(&series, 1.0).unwrap();
        assert!(q1.iter().all(|q| (q - 0.7).abs() < 1e-14));
        assert!(q2.iter().all(|q| q.abs() < 1e-12));
        assert!(conserved_quantities(&series, 0.0).is_err());
    }

    #[test]
    fn momentum_decays_exponentially() {
        let sys = ring(24, 0.8);
        let init = smooth_init(24);
        let series = sys.integrate(&init, 4.0, 0.01).unwrap();
        let p0: f64 = init.velocities.iter().sum();
        for (t, s) in series.times.iter().zip(&series.states) {
            let p: f64 = s.velocities.iter().sum();
            let expected = p0 * (-0.8 * t).exp();
            assert!((p - expected).abs() < 1e-8 * expected.abs(), "t={t}: {p} vs {expected}");
        }
    }

    #[test]
    fn rk4_is_fourth_order() {
        let sys = ring(16, 1.0);
        let order = self_convergence_order(&sys, &smooth_init(16), 2.0, 0.1).unwrap();
        assert!(order >= 3.8, "order {order}");
    }

    #[test]
    fn permutation_equivariance() {
        let n = 12;
        let sys = ring(n, 0.5);
        let init = smooth_init(n);
        let perm: Vec<usize> = (0..n).map(|i| (5 * i + 3) % n).collect();
        let mut w = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                w[a * n + b] = sys.graph().weight(perm[a], perm[b]);
            }
        }
        let permuted = FiniteSystem::new(
            CouplingGraph::from_weights(n, w, Provenance::Explicit).unwrap(),
            sys.params().clone(),
            CouplingScaling::OneOverN,
        )
        .unwrap();
        let pinit = OscillatorState::new(
            perm.iter().map(|&i| init.phases[i]).collect(),
            perm.iter().map(|&i| init.velocities[i]).collect(),
            0.0,
        )
        .unwrap();
        let a = sys.integrate_final(&init, 1.0, 0.01).unwrap();
        let b = permuted.integrate_final(&pinit, 1.0, 0.01).unwrap();
        for (i, &p) in perm.iter().enumerate() {
            assert!((b.phases[i] - a.phases[p]).abs() < 1e-12);
            assert!((b.velocities[i] - a.velocities[p]).abs() < 1e-12);
        }
    }

    #[test]
    fn averaged_integration_matches_complete_graph() {
        let one = GraphonKernel::constant(1.0).unwrap();
        let params = ModelParams::sine2pi(1.0, 1.0).unwrap();
        let init = smooth_init(10);
        let avg = integrate_averaged(&one, 10, &params, &init, 1.0, 0.05).unwrap();
        let sampled = FiniteSystem::new(
            sample_k_random_graph(&one, 10, 4).unwrap(),
            params,
            CouplingScaling::OneOverN,
        )
        .unwrap()
        .integrate(&init, 1.0, 0.05)
        .unwrap();
        assert_eq!(avg.states, sampled.states);
    }

    #[test]
    fn divergence_is_reported() {
        let graph = CouplingGraph::from_weights(1, vec![0.0], Provenance::Explicit).unwrap();
        let params = ModelParams::new(-800.0, 0.0, NonlinearitySpec::sine(1.0), ForcingSpec::Zero).unwrap();
        let sys = FiniteSystem::new(graph, params, CouplingScaling::None).unwrap();
        let init = OscillatorState::new(vec![0.0], vec![1.0], 0.0).unwrap();
        assert!(matches!(sys.integrate(&init, 10.0, 0.1), Err(Error::Divergence { .. })));
    }

    #[test]
    fn step_embedding_examples() {
        let series = TrajectorySeries {
            times: vec![0.0],
            states: vec![OscillatorState::new(vec![0.0, 1.0], vec![0.0, 0.0], 0.0).unwrap()],
            diagnostics: vec![],
        };
        let field = embed_step_function(&series);
        assert_eq!(field.eval(0.2, 0), 0.0);
        assert_eq!(field.eval(0.7, 0), 1.0);
        assert_relative_eq!(step_l2_norm(&field.values[0]), 0.5f64.sqrt());
        assert_eq!(field.sup_l2_distance(&field).unwrap(), 0.0);
        // refinement: (0, 1) against (0, 0, 1, 1) is the same function
        assert_eq!(step_l2_distance(&[0.0, 1.0], &[0.0, 0.0, 1.0, 1.0]), 0.0);
        assert_relative_eq!(step_l2_distance(&[0.0, 1.0], &[0.0, 0.0, 0.0]), (1.0f64 / 2.0).sqrt(), epsilon = 1e-15);
        let single = OscillatorState::new(vec![2.0], vec![0.0], 0.0).unwrap();
        let f = embed_step_function(&TrajectorySeries {
            times: vec![0.0],
            states: vec![single],
            diagnostics: vec![],
        });
        assert_eq!(f.eval(0.1, 0), f.eval(0.9, 0));
    }
}
