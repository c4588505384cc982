mod common;

use graphon_osc::graphons::{
    fourier_coefficient, small_world_kernel, spectral_difference, GraphonKernel, IndicatorTerm, SmallWorldParams,
    SmallWorldVariant,
};
use graphon_osc::graphs::{
    averaged_graph, cell_averaged_graph, graph_from_graphon, l2_kernel_distance, nearest_neighbour_graph,
    sample_k_random_graph, step_kernel, CouplingGraph,
};
use graphon_osc::stability::{small_world_spectrum, spectral_abscissa};
use proptest::prelude::*;

fn insertion(p: f64, r: f64) -> GraphonKernel {
    small_world_kernel(&SmallWorldParams::insertion(p, r).unwrap()).unwrap()
}

fn assert_symmetric(g: &CouplingGraph) {
    let n = g.n();
    for k in 0..n {
        assert_eq!(g.weight(k, k), 0.0);
        for l in 0..n {
            assert_eq!(g.weight(k, l), g.weight(l, k), "asymmetric at ({k}, {l})");
        }
    }
}

#[test]
fn closed_form_fourier_matches_piecewise_oracle() {
    let grid = [0.05, 0.1, 0.2, 0.3, 0.4];
    for &p in &grid {
        for &r in &grid {
            let k = insertion(p, r);
            for m in -64..=64i64 {
                let c = fourier_coefficient(&k, m).unwrap();
                assert!((c.re - common::small_world_cosine_integral(p, r, m)).abs() < 1e-10);
                assert!(c.im.abs() < 1e-14);
            }
        }
    }
}

#[test]
fn alternative_indicator_coefficient_stays_negative() {
    // 1 − p instead of 1 − 2p on the indicator term
    let (p, r, m) = (0.1, 0.25, 1i64);
    let x = std::f64::consts::PI * m as f64;
    let alternative = p * ((x).sin() / x - 1.0) + (1.0 - p) * ((2.0 * x * r).sin() / x - 2.0 * r);
    let ours = spectral_difference(&insertion(p, r), m).unwrap();
    assert!((ours - (-0.1 + 0.8 * (1.0 / std::f64::consts::PI - 0.5))).abs() < 1e-12);
    assert!(alternative < 0.0 && ours < 0.0);
    assert!((alternative - ours).abs() > 1e-3);
}

#[test]
fn sampled_edges_match_kernel_probabilities() {
    let kernel = insertion(0.1, 0.25);
    let n = 16;
    let seeds = 1000u64;
    let pairs = [(0usize, 3usize), (2, 9), (5, 6), (4, 12), (1, 15)];
    let mut counts = [0.0f64; 5];
    for seed in 0..seeds {
        let g = sample_k_random_graph(&kernel, n, seed).unwrap();
        assert_symmetric(&g);
        for (c, &(k, l)) in counts.iter_mut().zip(&pairs) {
            *c += g.weight(k, l);
        }
    }
    for (c, &(k, l)) in counts.iter().zip(&pairs) {
        let q = kernel.value_at_grid(k + 1, l + 1, n);
        let mean = c / seeds as f64;
        let se = (q * (1.0 - q) / seeds as f64).sqrt();
        assert!((mean - q).abs() <= 3.0 * se, "({k}, {l}): mean {mean}, q {q}, se {se}");
    }
}

#[test]
fn constructed_graphs_are_symmetric() {
    let kernels = [
        insertion(0.1, 0.25),
        small_world_kernel(&SmallWorldParams::new(0.2, 0.3, SmallWorldVariant::Rewire).unwrap()).unwrap(),
        GraphonKernel::mixture(0.1, vec![IndicatorTerm { weight: 0.5, width: 0.2 }]).unwrap(),
    ];
    for k in &kernels {
        for n in [1, 7, 32] {
            assert_symmetric(&graph_from_graphon(k, n).unwrap());
            assert_symmetric(&averaged_graph(k, n).unwrap());
            assert_symmetric(&cell_averaged_graph(k, n).unwrap());
            assert_symmetric(&sample_k_random_graph(k, n, 5).unwrap());
        }
    }
    assert_symmetric(&nearest_neighbour_graph(12, 3).unwrap());
}

#[test]
fn step_kernel_error_shrinks_with_n() {
    for r in [0.1, 0.25] {
        let kernel = insertion(0.1, r);
        let errs: Vec<f64> = [16, 32, 64, 128, 256]
            .iter()
            .map(|&n| l2_kernel_distance(&step_kernel(&graph_from_graphon(&kernel, n).unwrap()), &kernel))
            .collect();
        for w in errs.windows(2) {
            assert!(w[1] <= 1.05 * w[0], "r = {r}: {errs:?}");
        }
        assert!(errs[4] < errs[0]);
    }
}

#[test]
fn cell_averaged_graph_converges_faster() {
    let kernel = insertion(0.1, 0.25);
    for n in [16, 64, 256] {
        let sampled = l2_kernel_distance(&step_kernel(&graph_from_graphon(&kernel, n).unwrap()), &kernel);
        let averaged = l2_kernel_distance(&step_kernel(&cell_averaged_graph(&kernel, n).unwrap()), &kernel);
        assert!(averaged <= sampled);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spectral_difference_is_negative(p in 0.001..0.499f64, r in 0.001..0.499f64, m in 1..=64i64) {
        let k = insertion(p, r);
        prop_assert!(spectral_difference(&k, m).unwrap() < 0.0);
        prop_assert!(spectral_difference(&k, -m).unwrap() < 0.0);
        prop_assert!(fourier_coefficient(&k, m).unwrap().im.abs() < 1e-14);
    }

    #[test]
    fn small_world_values_are_probabilities(p in 0.001..0.499f64, r in 0.001..0.499f64, x in 0.0..1.0f64, y in 0.0..1.0f64) {
        for variant in [SmallWorldVariant::Insertion, SmallWorldVariant::Rewire] {
            let k = small_world_kernel(&SmallWorldParams::new(p, r, variant).unwrap()).unwrap();
            let v = k.value(x, y);
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(v, k.value(y, x));
            prop_assert!(v <= k.sup_norm());
        }
    }

    #[test]
    fn eigenvalues_satisfy_vieta(p in 0.01..0.49f64, r in 0.01..0.49f64, alpha in 0.1..3.0f64, gain in 0.0..3.0f64) {
        let sw = SmallWorldParams::insertion(p, r).unwrap();
        let spec = small_world_spectrum(&sw, alpha, gain, 16).unwrap();
        let kernel = insertion(p, r);
        for e in &spec.modes {
            let sd = spectral_difference(&kernel, e.m).unwrap();
            let sum = e.lambda_plus + e.lambda_minus;
            let prod = e.lambda_plus * e.lambda_minus;
            prop_assert!((sum.re + alpha).abs() < 1e-12 && sum.im.abs() < 1e-12);
            prop_assert!((prod.re + gain * sd).abs() < 1e-12 && prod.im.abs() < 1e-12);
            prop_assert!(e.lambda_plus.re < 0.0 || gain == 0.0);
        }
        prop_assert!(spectral_abscissa(&spec).unwrap().value <= 0.0);
    }
}
