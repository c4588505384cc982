mod common;

use graphon_osc::continuum::InitialProfile;
use graphon_osc::experiments::{
    averaged_vs_random, continuum_reference, deterministic_convergence, mu_scaling_study,
    random_convergence_with_reference, ConvergenceSetup, MuSource,
};
use graphon_osc::graphons::{small_world_kernel, GraphonKernel, IndicatorTerm, SmallWorldParams};
use graphon_osc::model::ModelParams;
use graphon_osc::stability::{measure_decay_rate, small_world_spectrum, DecayCheck};

fn insertion(p: f64, r: f64) -> GraphonKernel {
    small_world_kernel(&SmallWorldParams::insertion(p, r).unwrap()).unwrap()
}

fn setup(kernel: GraphonKernel, n_values: Vec<usize>) -> ConvergenceSetup {
    ConvergenceSetup {
        kernel,
        params: ModelParams::sine2pi(1.0, 1.0).unwrap(),
        g: InitialProfile::sin_k(1),
        h: InitialProfile::constant(0.0),
        t_end: 2.0,
        dt: 0.01,
        n_values,
        grid_ref: 512,
    }
}

#[test]
fn decay_fit_is_in_the_linear_regime() {
    let kernel = insertion(0.1, 0.25);
    let mut check = DecayCheck::new(kernel, 1.0, 1.0, 1);
    check.grid_n = 256;
    let full = measure_decay_rate(&check).unwrap();
    check.epsilon *= 0.5;
    let half = measure_decay_rate(&check).unwrap();
    assert!((full.rate - half.rate).abs() < 0.01 * full.rate.abs());
    let eps = 1e-4;
    assert!(full.max_other_mode < 10.0 * eps * eps, "other modes {}", full.max_other_mode);
    let predicted = small_world_spectrum(&SmallWorldParams::insertion(0.1, 0.25).unwrap(), 1.0, 1.0, 1)
        .unwrap()
        .modes[0]
        .lambda_plus
        .re;
    assert!((full.rate - predicted).abs() < 0.05 * predicted.abs());
}

#[test]
fn decay_rate_tracks_other_modes() {
    let kernel = insertion(0.2, 0.1);
    let spectrum = small_world_spectrum(&SmallWorldParams::insertion(0.2, 0.1).unwrap(), 0.5, 2.0, 3).unwrap();
    for m in [2i64, 3] {
        let mut check = DecayCheck::new(kernel.clone(), 0.5, 2.0, m);
        check.grid_n = 128;
        let fit = measure_decay_rate(&check).unwrap();
        let predicted = spectrum.modes.iter().find(|e| e.m == m).unwrap().lambda_plus.re;
        assert!((fit.rate - predicted).abs() < 0.05 * predicted.abs(), "m = {m}: {} vs {predicted}", fit.rate);
    }
}

#[test]
fn random_error_splits_into_components() {
    let s = setup(insertion(0.1, 0.25), vec![16, 32, 64]);
    let reference = continuum_reference(&s).unwrap();
    let report = random_convergence_with_reference(&s, &reference, 8, 40).unwrap();
    for summary in &report.per_n {
        let avg = summary.averaged_component.unwrap();
        for t in &summary.trials {
            assert!(t.error.unwrap() <= avg + t.random_component.unwrap() + 1e-12);
        }
    }
    let again = random_convergence_with_reference(&s, &reference, 8, 40).unwrap();
    assert_eq!(
        serde_json::to_string(&report).unwrap(),
        serde_json::to_string(&again).unwrap()
    );
}

#[test]
fn averaged_gap_shrinks_for_constant_kernel() {
    let s = setup(GraphonKernel::constant(0.5).unwrap(), vec![16, 32, 64, 128]);
    let report = averaged_vs_random(&s, 50, 3).unwrap();
    let medians: Vec<f64> = report.medians().into_iter().map(Option::unwrap).collect();
    assert!(medians.windows(2).all(|w| w[1] < w[0]), "{medians:?}");
}

#[test]
fn averaged_gap_vanishes_for_binary_kernel() {
    let kernel = GraphonKernel::mixture(0.0, vec![IndicatorTerm { weight: 1.0, width: 0.2 }]).unwrap();
    let report = averaged_vs_random(&setup(kernel, vec![8, 16]), 4, 0).unwrap();
    for s in &report.per_n {
        assert!(s.trials.iter().all(|t| t.error == Some(0.0)));
    }
}

#[test]
fn mu_matches_finite_size_expectation() {
    let q = 0.3;
    let mut s = setup(GraphonKernel::constant(q).unwrap(), vec![32, 64, 128]);
    s.t_end = 1.5;
    let report = mu_scaling_study(&s, MuSource::Unit, 200, 11).unwrap();
    for ((n, mean), se) in report.n_values.iter().zip(&report.means).zip(&report.std_errors) {
        let nf = *n as f64;
        let exact = s.t_end * q * (1.0 - q) * (nf - 1.0) / (nf * nf);
        assert!((mean - exact).abs() <= 3.0 * se, "N = {n}: {mean} vs {exact} ± {se}");
    }
    let slope = report.slope.unwrap();
    assert!((-1.3..=-0.7).contains(&slope));
}

#[test]
fn mu_along_trajectory_scales_like_one_over_n() {
    let s = setup(insertion(0.1, 0.25), vec![32, 64, 128, 256]);
    let report = mu_scaling_study(&s, MuSource::AveragedTrajectory, 40, 5).unwrap();
    assert!(report.means.iter().all(|m| *m > 0.0));
    let slope = report.slope.unwrap();
    assert!((-1.3..=-0.7).contains(&slope), "slope {slope}");
}

#[test]
fn envelope_dominates_on_other_kernels() {
    for kernel in [insertion(0.3, 0.05), GraphonKernel::constant(0.8).unwrap()] {
        let mut s = setup(kernel, vec![16, 32, 64]);
        s.g = common::random_smooth_profile(9, 0.1, 0.5);
        let report = deterministic_convergence(&s).unwrap();
        let env = report.envelope.unwrap();
        for (e, b) in report.sup_errors.iter().zip(&env) {
            assert!(e <= b);
        }
    }
}
