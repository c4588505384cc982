//! Convergence experiments: deterministic and random graph sequences
//! against a continuum reference, the averaged-system gap and the scaling
//! of the random coupling fluctuation `μ`.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuum::{
    average_initial_data, l2_error_of_average, solve_continuum, ContinuumProblem, InitialProfile,
};
use crate::dynamics::{step_l2_distance, CouplingScaling, FiniteSystem, StepField};
use crate::error::{invalid_param, Error, Result};
use crate::graphons::GraphonKernel;
use crate::graphs::{averaged_graph, graph_from_graphon, l2_kernel_distance, sample_k_random_graph, step_kernel};
use crate::model::{ModelParams, OscillatorState};
use crate::quadrature::cumulative_integral;
use crate::stability::least_squares_slope;

/// Shared inputs of the convergence experiments.
#[derive(Debug, Clone)]
pub struct ConvergenceSetup {
    pub kernel: GraphonKernel,
    pub params: ModelParams,
    pub g: InitialProfile,
    pub h: InitialProfile,
    pub t_end: f64,
    pub dt: f64,
    pub n_values: Vec<usize>,
    pub grid_ref: usize,
}

impl ConvergenceSetup {
    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return Err(invalid_param("n_values must be a non-empty list of positive sizes"));
        }
        if self.n_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid_param("n_values must be strictly increasing"));
        }
        let largest = *self.n_values.last().unwrap();
        if self.grid_ref < 4 * largest {
            return Err(invalid_param(format!(
                "grid_ref = {} must be at least 4 × {largest}",
                self.grid_ref
            )));
        }
        self.g.validate()?;
        self.h.validate()
    }

    fn initial_state(&self, n: usize) -> Result<OscillatorState> {
        OscillatorState::new(average_initial_data(&self.g, n), average_initial_data(&self.h, n), 0.0)
    }

    fn system(&self, graph: crate::graphs::CouplingGraph) -> Result<FiniteSystem> {
        FiniteSystem::new(graph, self.params.clone(), CouplingScaling::OneOverN)
    }
}

/// Continuum solution on the `grid_ref` Nyström grid, embedded as a step
/// field.
pub fn continuum_reference(setup: &ConvergenceSetup) -> Result<StepField> {
    setup.validate()?;
    let problem = ContinuumProblem {
        kernel: setup.kernel.clone(),
        params: setup.params.clone(),
        init_phi: setup.g.clone(),
        init_vel: setup.h.clone(),
        grid_n: setup.grid_ref,
    };
    Ok(solve_continuum(&problem, setup.t_end, setup.dt)?.field())
}

/// `max_t ‖φ^(N)(·, t) − ref(·, t)‖_{L²(I)}` for each reference, computed
/// while integrating so the finite trajectory is never stored.
fn sup_distances(
    system: &FiniteSystem,
    init: &OscillatorState,
    setup: &ConvergenceSetup,
    refs: &[&StepField],
) -> Result<Vec<f64>> {
    let mut sups = vec![0.0f64; refs.len()];
    let mut index = 0usize;
    system.integrate_observed(init, setup.t_end, setup.dt, |_, phi, _| {
        for (s, r) in sups.iter_mut().zip(refs) {
            *s = s.max(step_l2_distance(phi, &r.values[index]));
        }
        index += 1;
    })?;
    if refs.iter().any(|r| r.values.len() != index) {
        return Err(Error::InvalidArgument("reference is sampled on a different time grid".into()));
    }
    Ok(sups)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub n_values: Vec<usize>,
    /// Sup over output times of the `L²(I)` distance to the reference.
    pub sup_errors: Vec<f64>,
    /// `‖𝒦^(N) − 𝒦‖_{L²(I×I)}` of the step kernel of each graph.
    pub kernel_l2_errors: Vec<f64>,
    /// `(‖g^(N) − g‖, ‖h^(N) − h‖)` in `L²(I)`.
    pub data_errors: Vec<(f64, f64)>,
    pub envelope: Option<Vec<f64>>,
    /// Wall-clock seconds per `N`; not serialised so reports stay
    /// reproducible.
    #[serde(skip)]
    pub runtime_secs: Vec<f64>,
}

/// `sqrt((e_g² + e_h² + C e_K²) exp(C₂ T))` with `C` the range bound of
/// `c·D` and `C₂ = 2 L_D ‖𝒦‖_∞ + L_f + 1 + 2|α| + C`.
pub fn gronwall_envelope(
    params: &ModelParams,
    kernel_sup: f64,
    data_errors: &[(f64, f64)],
    kernel_l2_errors: &[f64],
    t_end: f64,
) -> Result<Vec<f64>> {
    if data_errors.len() != kernel_l2_errors.len() {
        return Err(Error::DimensionMismatch {
            expected: data_errors.len(),
            got: kernel_l2_errors.len(),
        });
    }
    let c = params.d_range_bound();
    let c2 = 2.0 * params.lip_d * kernel_sup + params.lip_f + 1.0 + 2.0 * params.alpha.abs() + c;
    let growth = (c2 * t_end).exp();
    Ok(data_errors
        .iter()
        .zip(kernel_l2_errors)
        .map(|((eg, eh), ek)| ((eg * eg + eh * eh + c * ek * ek) * growth).sqrt())
        .collect())
}

pub fn deterministic_convergence(setup: &ConvergenceSetup) -> Result<ConvergenceReport> {
    let reference = continuum_reference(setup)?;
    deterministic_convergence_with_reference(setup, &reference)
}

/// [`deterministic_convergence`] against a precomputed reference.
pub fn deterministic_convergence_with_reference(
    setup: &ConvergenceSetup,
    reference: &StepField,
) -> Result<ConvergenceReport> {
    setup.validate()?;
    let rows = setup
        .n_values
        .par_iter()
        .map(|&n| {
            let start = Instant::now();
            let graph = graph_from_graphon(&setup.kernel, n)?;
            let kernel_err = l2_kernel_distance(&step_kernel(&graph), &setup.kernel);
            let init = setup.initial_state(n)?;
            let data = (
                l2_error_of_average(&setup.g, &init.phases),
                l2_error_of_average(&setup.h, &init.velocities),
            );
            let sup = sup_distances(&setup.system(graph)?, &init, setup, &[reference])?[0];
            Ok((sup, kernel_err, data, start.elapsed().as_secs_f64()))
        })
        .collect::<Result<Vec<_>>>()?;
    let data_errors: Vec<(f64, f64)> = rows.iter().map(|r| r.2).collect();
    let kernel_l2_errors: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let envelope = gronwall_envelope(
        &setup.params,
        setup.kernel.sup_norm(),
        &data_errors,
        &kernel_l2_errors,
        setup.t_end,
    )?;
    Ok(ConvergenceReport {
        n_values: setup.n_values.clone(),
        sup_errors: rows.iter().map(|r| r.0).collect(),
        kernel_l2_errors,
        data_errors,
        envelope: Some(envelope),
        runtime_secs: rows.iter().map(|r| r.3).collect(),
    })
}

/// Outcome of one sampled graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    /// Measured error; absent when the trial diverged.
    pub error: Option<f64>,
    /// Distance between the random and the averaged trajectory.
    pub random_component: Option<f64>,
    pub diverged_at: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub n: usize,
    /// Sorted by seed.
    pub trials: Vec<TrialRecord>,
    pub median: Option<f64>,
    pub q90: Option<f64>,
    /// Distance between the averaged system and the reference, shared by
    /// all trials of this `N`.
    pub averaged_component: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilisticReport {
    pub n_values: Vec<usize>,
    pub per_n: Vec<TrialSummary>,
    pub trials: usize,
    pub seeds: Vec<u64>,
    #[serde(skip)]
    pub runtime_secs: f64,
}

impl ProbabilisticReport {
    pub fn medians(&self) -> Vec<Option<f64>> {
        self.per_n.iter().map(|s| s.median).collect()
    }

    pub fn q90s(&self) -> Vec<Option<f64>> {
        self.per_n.iter().map(|s| s.q90).collect()
    }
}

/// Type-7 (linear interpolation) sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

fn summarise(n: usize, mut trials: Vec<TrialRecord>, averaged_component: Option<f64>) -> TrialSummary {
    trials.sort_by_key(|t| t.seed);
    let mut errors: Vec<f64> = trials.iter().filter_map(|t| t.error).collect();
    errors.sort_by(f64::total_cmp);
    TrialSummary {
        n,
        median: quantile_sorted(&errors, 0.5),
        q90: quantile_sorted(&errors, 0.9),
        trials,
        averaged_component,
    }
}

fn seeds(seed0: u64, trials: usize) -> Result<Vec<u64>> {
    if trials == 0 {
        return Err(invalid_param("trials must be at least 1"));
    }
    Ok((0..trials as u64).map(|i| seed0.wrapping_add(i)).collect())
}

fn record(seed: u64, outcome: Result<Vec<f64>>, pick: impl Fn(&[f64]) -> (f64, Option<f64>)) -> Result<TrialRecord> {
    match outcome {
        Ok(d) => {
            let (error, random_component) = pick(&d);
            Ok(TrialRecord {
                seed,
                error: Some(error),
                random_component,
                diverged_at: None,
            })
        }
        Err(Error::Divergence { time }) => Ok(TrialRecord {
            seed,
            error: None,
            random_component: None,
            diverged_at: Some(time),
        }),
        Err(e) => Err(e),
    }
}

pub fn random_convergence(setup: &ConvergenceSetup, trials: usize, seed0: u64) -> Result<ProbabilisticReport> {
    let reference = continuum_reference(setup)?;
    random_convergence_with_reference(setup, &reference, trials, seed0)
}

/// Random-graph convergence against a precomputed reference. Each trial
/// also records its distance to the averaged system, so that
/// `error ≤ averaged_component + random_component`.
pub fn random_convergence_with_reference(
    setup: &ConvergenceSetup,
    reference: &StepField,
    trials: usize,
    seed0: u64,
) -> Result<ProbabilisticReport> {
    setup.validate()?;
    let start = Instant::now();
    let seeds = seeds(seed0, trials)?;
    let per_n = setup
        .n_values
        .iter()
        .map(|&n| {
            let init = setup.initial_state(n)?;
            let averaged = setup.system(averaged_graph(&setup.kernel, n)?)?.integrate(&init, setup.t_end, setup.dt)?;
            let averaged_field = crate::dynamics::embed_step_function(&averaged);
            let averaged_component = averaged_field.sup_l2_distance(reference).ok();
            let records = seeds
                .par_iter()
                .map(|&seed| {
                    let graph = sample_k_random_graph(&setup.kernel, n, seed)?;
                    let outcome = setup
                        .system(graph)
                        .and_then(|sys| sup_distances(&sys, &init, setup, &[reference, &averaged_field]));
                    record(seed, outcome, |d| (d[0], Some(d[1])))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(summarise(n, records, averaged_component))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProbabilisticReport {
        n_values: setup.n_values.clone(),
        per_n,
        trials,
        seeds,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

/// Sup over time of the `L²(I)` distance (equivalently the normalised
/// discrete norm `(N⁻¹ Σ_k x_k²)^{1/2}`) between the random and the averaged
/// system started from the same data. `grid_ref` is not used.
pub fn averaged_vs_random(setup: &ConvergenceSetup, trials: usize, seed0: u64) -> Result<ProbabilisticReport> {
    if setup.n_values.is_empty() || setup.n_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid_param("n_values must be a non-empty increasing list"));
    }
    let start = Instant::now();
    let seeds = seeds(seed0, trials)?;
    let per_n = setup
        .n_values
        .iter()
        .map(|&n| {
            let init = setup.initial_state(n)?;
            let averaged = setup.system(averaged_graph(&setup.kernel, n)?)?.integrate(&init, setup.t_end, setup.dt)?;
            let field = crate::dynamics::embed_step_function(&averaged);
            let records = seeds
                .par_iter()
                .map(|&seed| {
                    let graph = sample_k_random_graph(&setup.kernel, n, seed)?;
                    let outcome = setup
                        .system(graph)
                        .and_then(|sys| sup_distances(&sys, &init, setup, &[&field]));
                    record(seed, outcome, |d| (d[0], None))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(summarise(n, records, None))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProbabilisticReport {
        n_values: setup.n_values.clone(),
        per_n,
        trials,
        seeds,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

/// Coefficients `a_kℓ(t)` multiplying the coupling fluctuation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuSource {
    /// `a ≡ 1`.
    Unit,
    /// `a_kℓ(t) = c·D(φ_ℓ − φ_k)` along the averaged trajectory.
    #[default]
    AveragedTrajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuScalingReport {
    pub n_values: Vec<usize>,
    /// Monte Carlo mean of `∫₀ᵀ ‖μ^(N)(t)‖₂² dt` per `N`.
    pub means: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Least-squares slope of `log(mean)` against `log(N)`; absent with
    /// fewer than two sizes or a zero mean.
    pub slope: Option<f64>,
    pub trials: usize,
    pub seeds: Vec<u64>,
    pub source: MuSource,
}

/// Number of time samples used for `∫‖μ‖² dt` along a trajectory.
const MU_TIME_SAMPLES: usize = 101;

/// Monte Carlo study of `μ_k = N⁻¹ Σ_ℓ a_kℓ (K̄_kℓ − K_kℓ(ω))` with the
/// norm `‖μ‖₂² = N⁻¹ Σ_k μ_k²`.
pub fn mu_scaling_study(
    setup: &ConvergenceSetup,
    source: MuSource,
    trials: usize,
    seed0: u64,
) -> Result<MuScalingReport> {
    if setup.n_values.is_empty() || setup.n_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid_param("n_values must be a non-empty increasing list"));
    }
    let seeds = seeds(seed0, trials)?;
    let mut means = Vec::new();
    let mut std_errors = Vec::new();
    for &n in &setup.n_values {
        let avg = averaged_graph(&setup.kernel, n)?;
        // phases at the sample times, or None for a ≡ 1
        let samples: Option<(Vec<Vec<f64>>, f64)> = match source {
            MuSource::Unit => None,
            MuSource::AveragedTrajectory => {
                let steps = MU_TIME_SAMPLES - 1;
                let coarse_dt = setup.t_end / steps as f64;
                let stride = (coarse_dt / setup.dt).round().max(1.0) as usize;
                let fine_dt = coarse_dt / stride as f64;
                let series = setup.system(avg.clone())?.integrate(&setup.initial_state(n)?, setup.t_end, fine_dt)?;
                let phases = series.states.iter().step_by(stride).map(|s| s.phases.clone()).collect();
                Some((phases, coarse_dt))
            }
        };
        let values = seeds
            .par_iter()
            .map(|&seed| {
                let random = sample_k_random_graph(&setup.kernel, n, seed)?;
                let delta: Vec<f64> = avg.weights().iter().zip(random.weights()).map(|(a, b)| a - b).collect();
                Ok(match &samples {
                    None => setup.t_end * mu_norm_squared_unit(&delta, n),
                    Some((phases, dt)) => {
                        let norms: Vec<f64> = phases
                            .iter()
                            .map(|p| mu_norm_squared_coupled(&delta, n, p, &setup.params))
                            .collect();
                        *cumulative_integral(&norms, *dt).last().unwrap()
                    }
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let m = values.len() as f64;
        let mean = values.iter().sum::<f64>() / m;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0)
        } else {
            0.0
        };
        means.push(mean);
        std_errors.push((var / m).sqrt());
    }
    let slope = (setup.n_values.len() >= 2 && means.iter().all(|m| *m > 0.0)).then(|| {
        let xs: Vec<f64> = setup.n_values.iter().map(|n| (*n as f64).ln()).collect();
        let ys: Vec<f64> = means.iter().map(|m| m.ln()).collect();
        least_squares_slope(&xs, &ys)
    });
    Ok(MuScalingReport {
        n_values: setup.n_values.clone(),
        means,
        std_errors,
        slope,
        trials,
        seeds,
        source,
    })
}

fn mu_norm_squared_unit(delta: &[f64], n: usize) -> f64 {
    let nf = n as f64;
    delta
        .chunks(n)
        .map(|row| {
            let mu = row.iter().sum::<f64>() / nf;
            mu * mu
        })
        .sum::<f64>()
        / nf
}

fn mu_norm_squared_coupled(delta: &[f64], n: usize, phases: &[f64], params: &ModelParams) -> f64 {
    let nf = n as f64;
    let mu_k = |k: usize| -> f64 {
        let row = &delta[k * n..(k + 1) * n];
        row.iter()
            .zip(phases)
            .filter(|(d, _)| **d != 0.0)
            .map(|(d, p)| d * params.coupling(p - phases[k]))
            .sum::<f64>()
            / nf
    };
    (0..n).map(|k| mu_k(k).powi(2)).sum::<f64>() / nf
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphons::{small_world_kernel, SmallWorldParams};
    use approx::assert_relative_eq;

    fn setup(kernel: GraphonKernel, g: InitialProfile, n_values: Vec<usize>) -> ConvergenceSetup {
        ConvergenceSetup {
            kernel,
            params: ModelParams::sine2pi(1.0, 1.0).unwrap(),
            g,
            h: InitialProfile::constant(0.0),
            t_end: 0.5,
            dt: 0.01,
            n_values,
            grid_ref: 64,
        }
    }

    #[test]
    fn quantiles_interpolate() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&xs, 0.5), Some(2.5));
        assert_relative_eq!(quantile_sorted(&xs, 0.9).unwrap(), 3.7);
        assert_eq!(quantile_sorted(&[5.0], 0.9), Some(5.0));
        assert_eq!(quantile_sorted(&[], 0.5), None);
    }

    #[test]
    fn envelope_edge_cases() {
        let params = ModelParams::sine2pi(1.0, 1.0).unwrap();
        assert_eq!(gronwall_envelope(&params, 1.0, &[(0.0, 0.0)], &[0.0], 2.0).unwrap(), vec![0.0]);
        let env = gronwall_envelope(&params, 1.0, &[(0.3, 0.4)], &[0.0], 0.0).unwrap();
        assert_relative_eq!(env[0], 0.5);
        assert!(gronwall_envelope(&params, 1.0, &[(0.3, 0.4)], &[], 0.0).is_err());
    }

    #[test]
    fn setup_validation() {
        let k = GraphonKernel::constant(1.0).unwrap();
        assert!(setup(k.clone(), InitialProfile::sin_k(1), vec![8, 16]).validate().is_ok());
        assert!(setup(k.clone(), InitialProfile::sin_k(1), vec![16, 8]).validate().is_err());
        assert!(setup(k, InitialProfile::sin_k(1), vec![8, 32]).validate().is_err());
    }

    #[test]
    fn constant_data_has_zero_error() {
        let k = small_world_kernel(&SmallWorldParams::insertion(0.1, 0.25).unwrap()).unwrap();
        let report = deterministic_convergence(&setup(k, InitialProfile::constant(0.3), vec![4, 8, 16])).unwrap();
        assert!(report.sup_errors.iter().all(|e| *e == 0.0), "{:?}", report.sup_errors);
    }

    #[test]
    fn complete_kernel_has_no_random_component() {
        let one = GraphonKernel::constant(1.0).unwrap();
        let s = setup(one, InitialProfile::sin_k(1), vec![8, 16]);
        let report = random_convergence(&s, 3, 10).unwrap();
        for summary in &report.per_n {
            assert!(summary.trials.iter().all(|t| t.random_component == Some(0.0)));
        }
        let gap = averaged_vs_random(&s, 3, 10).unwrap();
        assert!(gap.per_n.iter().all(|s| s.median == Some(0.0)));
    }

    #[test]
    fn binary_kernel_has_no_fluctuation() {
        let k = GraphonKernel::mixture(
            0.0,
            vec![crate::graphons::IndicatorTerm { weight: 1.0, width: 0.2 }],
        )
        .unwrap();
        let s = setup(k, InitialProfile::sin_k(1), vec![8, 16]);
        let report = mu_scaling_study(&s, MuSource::AveragedTrajectory, 4, 0).unwrap();
        assert!(report.means.iter().all(|m| *m == 0.0));
        assert_eq!(report.slope, None);
        let gap = averaged_vs_random(&s, 3, 0).unwrap();
        assert!(gap.per_n.iter().all(|s| s.median == Some(0.0)));
    }

    #[test]
    fn reports_are_reproducible() {
        let half = GraphonKernel::constant(0.5).unwrap();
        let s = setup(half, InitialProfile::sin_k(1), vec![8, 16]);
        let a = random_convergence(&s, 4, 99).unwrap();
        let b = random_convergence(&s, 4, 99).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        for summary in &a.per_n {
            for t in &summary.trials {
                let bound = summary.averaged_component.unwrap() + t.random_component.unwrap() + 1e-12;
                assert!(t.error.unwrap() <= bound);
            }
        }
    }
}
