//! Linear stability of constant steady states on difference kernels.
//!
//! Linearising around `φ ≡ Φ` decouples the Fourier modes; mode `m ≠ 0`
//! obeys `ä = −α ȧ + K (𝒦̂(m) − 𝒦̂(0)) a`. The zero mode is solved
//! explicitly by [`zero_mode_mean`].

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::continuum::{ContinuumProblem, InitialProfile, TrigTerm};
use crate::error::{invalid_param, Error, Result};
use crate::graphons::{small_world_kernel, spectral_difference, GraphonKernel, SmallWorldParams};
use crate::model::{ForcingSpec, ModelParams, NonlinearitySpec};

/// Roots `−α/2 ± √((α/2)² + K·sd)` of the mode polynomial, principal branch.
pub fn mode_eigenvalues(alpha: f64, coupling_gain: f64, spectral_diff: f64) -> (Complex64, Complex64) {
    let half = alpha / 2.0;
    let root = Complex64::new(half * half + coupling_gain * spectral_diff, 0.0).sqrt();
    (Complex64::new(-half, 0.0) + root, Complex64::new(-half, 0.0) - root)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeEigenvalues {
    pub m: i64,
    pub lambda_plus: Complex64,
    pub lambda_minus: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSpectrum {
    /// Modes `−m_max, …, −1, 1, …, m_max`.
    pub modes: Vec<ModeEigenvalues>,
    pub alpha: f64,
    pub coupling_gain: f64,
    pub kernel_params: Option<SmallWorldParams>,
}

impl ModeSpectrum {
    /// Whether every stored eigenvalue has negative real part.
    pub fn is_stable(&self) -> bool {
        self.modes
            .iter()
            .all(|e| e.lambda_plus.re < 0.0 && e.lambda_minus.re < 0.0)
    }
}

/// Eigenvalue pairs for `1 ≤ |m| ≤ m_max`.
pub fn spectrum(kernel: &GraphonKernel, alpha: f64, coupling_gain: f64, m_max: usize) -> Result<ModeSpectrum> {
    if m_max == 0 {
        return Err(invalid_param("m_max must be at least 1"));
    }
    let m_max = m_max as i64;
    let modes = (-m_max..=m_max)
        .filter(|m| *m != 0)
        .map(|m| {
            let sd = spectral_difference(kernel, m)?;
            let (lambda_plus, lambda_minus) = mode_eigenvalues(alpha, coupling_gain, sd);
            Ok(ModeEigenvalues {
                m,
                lambda_plus,
                lambda_minus,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ModeSpectrum {
        modes,
        alpha,
        coupling_gain,
        kernel_params: None,
    })
}

/// [`spectrum`] of a small-world kernel, labelled with its parameters.
pub fn small_world_spectrum(params: &SmallWorldParams, alpha: f64, coupling_gain: f64, m_max: usize) -> Result<ModeSpectrum> {
    let mut spec = spectrum(&small_world_kernel(params)?, alpha, coupling_gain, m_max)?;
    spec.kernel_params = Some(*params);
    Ok(spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Abscissa {
    pub value: f64,
    /// Smallest positive mode attaining the maximum.
    pub argmax_m: i64,
}

/// `max_{m ≠ 0} Re λ_+(m)` over the stored modes.
pub fn spectral_abscissa(spec: &ModeSpectrum) -> Result<Abscissa> {
    let mut best: Option<Abscissa> = None;
    for e in &spec.modes {
        let (value, m) = (e.lambda_plus.re, e.m.abs());
        best = match best {
            Some(b) if b.value > value || (b.value == value && b.argmax_m <= m) => Some(b),
            _ => Some(Abscissa { value, argmax_m: m }),
        };
    }
    best.ok_or(Error::EmptySpectrum)
}

/// Initial mean phase and mean velocity of the spatially constant mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroModeSolution {
    pub mean0: f64,
    pub meanvel0: f64,
    pub alpha: f64,
}

/// `mean0 e^{−αt} + (meanvel0 + α mean0)(1 − e^{−αt})/α`.
pub fn zero_mode_mean(sol: &ZeroModeSolution, t: f64) -> Result<f64> {
    if sol.alpha == 0.0 {
        return Err(Error::ZeroDamping);
    }
    let decay = (-sol.alpha * t).exp();
    Ok(sol.mean0 * decay + (sol.meanvel0 + sol.alpha * sol.mean0) * (-(-sol.alpha * t).exp_m1()) / sol.alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub p: f64,
    pub r: f64,
    pub alpha: f64,
    #[serde(rename = "K")]
    pub coupling_gain: f64,
    pub abscissa: f64,
    pub argmax_m: i64,
}

/// Abscissa of every `(kernel, α, K)` combination, evaluated in parallel
/// and returned in input order.
pub fn sweep(points: &[(SmallWorldParams, f64, f64)], m_max: usize) -> Result<Vec<SweepPoint>> {
    points
        .par_iter()
        .map(|(params, alpha, k)| {
            let spec = small_world_spectrum(params, *alpha, *k, m_max)?;
            let a = spectral_abscissa(&spec)?;
            Ok(SweepPoint {
                p: params.p,
                r: params.r,
                alpha: *alpha,
                coupling_gain: *k,
                abscissa: a.value,
                argmax_m: a.argmax_m,
            })
        })
        .collect()
}

/// Setup of a decay-rate measurement on the full nonlinear model.
#[derive(Debug, Clone)]
pub struct DecayCheck {
    pub kernel: GraphonKernel,
    pub alpha: f64,
    pub coupling_gain: f64,
    pub m: i64,
    pub epsilon: f64,
    pub t_end: f64,
    pub dt: f64,
    pub grid_n: usize,
    pub base_phase: f64,
}

impl DecayCheck {
    pub fn new(kernel: GraphonKernel, alpha: f64, coupling_gain: f64, m: i64) -> Self {
        Self {
            kernel,
            alpha,
            coupling_gain,
            m,
            epsilon: 1e-4,
            t_end: 40.0,
            dt: 0.01,
            grid_n: 512,
            base_phase: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayMeasurement {
    pub rate: f64,
    pub times: Vec<f64>,
    /// `|a_m(t)|` of the perturbed mode.
    pub amplitudes: Vec<f64>,
    /// Largest amplitude of modes `1..=8` other than `±m` during the
    /// first quarter of the run.
    pub max_other_mode: f64,
    /// Number of envelope peaks used; zero when the window fit was used.
    pub peaks_used: usize,
}

/// Amplitudes below this value are treated as lost in round-off.
pub const AMPLITUDE_FLOOR: f64 = 1e-13;

/// Simulates the nonlinear continuum model from `Φ + ε cos(2πmx)` with zero
/// velocity and fits the decay rate of the `m`-th Fourier coefficient.
///
/// The nonlinearity is `sin(2πx)/(2π)`, so that the coupling gain is the
/// slope of `c·D` at zero and the linearisation matches [`spectrum`].
pub fn measure_decay_rate(check: &DecayCheck) -> Result<DecayMeasurement> {
    if check.m == 0 {
        return Err(Error::InvalidArgument("the decay check needs a nonzero mode".into()));
    }
    if check.epsilon.is_nan() || check.epsilon <= 0.0 {
        return Err(invalid_param("epsilon must be positive"));
    }
    let params = ModelParams::new(
        check.alpha,
        check.coupling_gain,
        NonlinearitySpec::sine2pi(1.0 / TAU),
        ForcingSpec::Zero,
    )?;
    let problem = ContinuumProblem {
        kernel: check.kernel.clone(),
        params,
        init_phi: InitialProfile::Trig {
            offset: check.base_phase,
            terms: vec![TrigTerm {
                k: check.m,
                cos_amp: check.epsilon,
                sin_amp: 0.0,
            }],
        },
        init_vel: InitialProfile::constant(0.0),
        grid_n: check.grid_n,
    };
    let system = problem.nystrom_system()?;
    let n = check.grid_n;
    let basis = |m: i64| -> Vec<(f64, f64)> {
        (0..n)
            .map(|k| (TAU * m as f64 * (k as f64 + 0.5) / n as f64).sin_cos())
            .collect()
    };
    let coefficient = |phases: &[f64], b: &[(f64, f64)]| {
        let (mut re, mut im) = (0.0, 0.0);
        for (p, (s, c)) in phases.iter().zip(b) {
            re += p * c;
            im -= p * s;
        }
        (re * re + im * im).sqrt() / n as f64
    };
    let target = basis(check.m);
    let others: Vec<Vec<(f64, f64)>> = (1..=8i64)
        .filter(|m| *m != check.m.abs())
        .map(basis)
        .collect();
    let (mut times, mut amplitudes) = (Vec::new(), Vec::new());
    let mut max_other = 0.0f64;
    let early = check.t_end / 4.0;
    system.integrate_observed(&problem.initial_state()?, check.t_end, check.dt, |t, phi, _| {
        times.push(t);
        amplitudes.push(coefficient(phi, &target));
        if t <= early {
            for b in &others {
                max_other = max_other.max(coefficient(phi, b));
            }
        }
    })?;
    let (rate, peaks_used) = fit_decay(&times, &amplitudes, check.t_end)?;
    Ok(DecayMeasurement {
        rate,
        times,
        amplitudes,
        max_other_mode: max_other,
        peaks_used,
    })
}

/// Log-linear slope of a decaying amplitude series. Uses envelope peaks
/// when at least three exist, otherwise the second half of the run.
pub fn fit_decay(times: &[f64], amplitudes: &[f64], t_end: f64) -> Result<(f64, usize)> {
    let cutoff = amplitudes
        .iter()
        .position(|a| *a < AMPLITUDE_FLOOR)
        .unwrap_or(amplitudes.len());
    let peaks: Vec<usize> = (1..cutoff.saturating_sub(1))
        .filter(|&i| amplitudes[i] > amplitudes[i - 1] && amplitudes[i] >= amplitudes[i + 1])
        .collect();
    if peaks.len() >= 3 {
        let xs: Vec<f64> = peaks.iter().map(|&i| times[i]).collect();
        let ys: Vec<f64> = peaks.iter().map(|&i| amplitudes[i].ln()).collect();
        return Ok((least_squares_slope(&xs, &ys), peaks.len()));
    }
    if cutoff < amplitudes.len() {
        return Err(Error::FitFailed(format!(
            "mode amplitude fell below {AMPLITUDE_FLOOR:e} at t = {} with only {} envelope peaks",
            times[cutoff],
            peaks.len()
        )));
    }
    let start = 0.5 * t_end;
    let (xs, ys): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(amplitudes)
        .filter(|(t, _)| **t >= start)
        .map(|(t, a)| (*t, a.ln()))
        .unzip();
    if xs.len() < 2 {
        return Err(Error::FitFailed("too few samples in the fit window".into()));
    }
    Ok((least_squares_slope(&xs, &ys), 0))
}

pub(crate) fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
