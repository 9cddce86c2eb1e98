mod common;

use proptest::prelude::*;
use rhuber_core::linalg::{dot, norm2};
use rhuber_core::spectral::{
    coordwise_median, direction_scores, dual_objective, top_eigenpair, weighted_second_moment,
};
use rhuber_core::{Dataset, Matrix};

fn dataset() -> impl Strategy<Value = Dataset> {
    (4usize..20, 1usize..5).prop_flat_map(|(n, d)| {
        prop::collection::vec(-5.0f64..5.0, n * d).prop_map(move |data| {
            Dataset::new(vec![0.0; n], Matrix::from_vec(n, d, data).unwrap()).unwrap()
        })
    })
}

fn simplex_weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, n).prop_map(|raw| {
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|r| r / s).collect()
    })
}

fn with_weights() -> impl Strategy<Value = (Dataset, Vec<f64>, Vec<f64>)> {
    dataset().prop_flat_map(|ds| {
        let (n, d) = (ds.n(), ds.d());
        (
            Just(ds),
            simplex_weights(n),
            prop::collection::vec(-1.0f64..1.0, d),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn second_moment_matches_naive((ds, w, nu) in with_weights()) {
        let m = weighted_second_moment(&ds, &w, &nu).unwrap().matrix;
        let oracle = common::naive_second_moment(ds.x(), &w, &nu);
        for j in 0..ds.d() {
            for k in 0..ds.d() {
                prop_assert!((m[(j, k)] - oracle[j][k]).abs() <= 1e-10 * (1.0 + oracle[j][k].abs()));
            }
        }
        prop_assert_eq!(m.max_asymmetry(), 0.0);
    }

    #[test]
    fn second_moment_is_linear_in_weights(
        (ds, w, nu) in with_weights(),
        a in 0.0f64..3.0,
        b in 0.0f64..3.0,
    ) {
        let w2: Vec<f64> = w.iter().rev().copied().collect();
        let combo: Vec<f64> = w.iter().zip(&w2).map(|(x, y)| a * x + b * y).collect();
        let m1 = weighted_second_moment(&ds, &w, &nu).unwrap().matrix;
        let m2 = weighted_second_moment(&ds, &w2, &nu).unwrap().matrix;
        let mc = weighted_second_moment(&ds, &combo, &nu).unwrap().matrix;
        for ((x, y), z) in m1.as_slice().iter().zip(m2.as_slice()).zip(mc.as_slice()) {
            prop_assert!((a * x + b * y - z).abs() <= 1e-9 * (1.0 + z.abs()));
        }
    }

    #[test]
    fn top_eigenvalue_matches_jacobi((ds, w, nu) in with_weights(), seed in any::<u64>()) {
        let m = weighted_second_moment(&ds, &w, &nu).unwrap().matrix;
        let (values, _) = common::jacobi_eigen(&m);
        let e = top_eigenpair(&m, 1e-12, 100_000, seed).unwrap();
        let scale = values[0].abs().max(1.0);
        // power iteration needs a gap; a Rayleigh quotient never overshoots
        prop_assert!(e.value <= values[0] + 1e-9 * scale);
        if values.len() == 1 || values[0] - values[1] > 1e-3 * scale {
            prop_assert!(e.converged);
            prop_assert!((e.value - values[0]).abs() <= 1e-8 * scale);
        }
        prop_assert!((norm2(&e.vector) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rayleigh_probes_stay_below_top((ds, w, nu) in with_weights(), probes in prop::collection::vec(-1.0f64..1.0, 40)) {
        let m = weighted_second_moment(&ds, &w, &nu).unwrap().matrix;
        let e = top_eigenpair(&m, 1e-12, 100_000, 7).unwrap();
        for chunk in probes.chunks(ds.d()) {
            if chunk.len() < ds.d() { break; }
            let n2 = dot(chunk, chunk);
            if n2 < 1e-6 { continue; }
            let q = dot(chunk, &m.matvec(chunk)) / n2;
            prop_assert!(q <= e.value + 1e-8 * e.value.max(1.0) + e.residual);
        }
    }

    #[test]
    fn dual_value_lower_bounds_every_member((ds, _w, nu) in with_weights(), seed in any::<u64>(), raw in prop::collection::vec(0.0f64..1.0, 20)) {
        let eps = 0.2;
        let w = rhuber_core::simplex::project(&raw[..ds.n()], eps).unwrap();
        let m = weighted_second_moment(&ds, w.as_slice(), &nu).unwrap().matrix;
        let top = common::jacobi_eigen(&m).0[0];
        let probe = top_eigenpair(&m, 1e-10, 10_000, seed).unwrap().vector;
        let dual = dual_objective(&ds, &nu, &probe, eps).unwrap();
        prop_assert!(dual <= top + 1e-9 * top.max(1.0));
    }
}

#[test]
fn identity_covariance_sample_eigenvalue_near_one() {
    use rhuber_core::dataset::{generate, GeneratorSpec};
    let inst = generate(
        &GeneratorSpec::gaussian(1.0),
        4000,
        4,
        &[1.0, 0.0, 0.0, 0.0],
        11,
    )
    .unwrap();
    let n = inst.n();
    let w = vec![1.0 / n as f64; n];
    let m = weighted_second_moment(&inst.dataset, &w, &[0.0; 4])
        .unwrap()
        .matrix;
    let e = top_eigenpair(&m, 1e-10, 10_000, 1).unwrap();
    let (values, _) = common::jacobi_eigen(&m);
    assert!((e.value - values[0]).abs() < 1e-8);
    // (1 + √(d/n))² ≈ 1.065
    assert!(e.value > 1.0 && e.value < 1.15, "{}", e.value);
}

#[test]
fn coordinate_median_ignores_a_minority() {
    let mut rows: Vec<[f64; 2]> = (0..11).map(|i| [i as f64, -(i as f64)]).collect();
    for r in rows.iter_mut().take(4) {
        *r = [1e9, 1e9];
    }
    let x = Matrix::from_rows(&rows).unwrap();
    let med = coordwise_median(&x).unwrap();
    assert!(med[0] >= 4.0 && med[0] <= 10.0);
    assert!(med[1] >= -10.0 && med[1] <= 0.0);
}

#[test]
fn scores_are_squared_projections() {
    let x = Matrix::from_rows(&[[1.0, 2.0], [-1.0, 0.5]]).unwrap();
    let ds = Dataset::new(vec![0.0; 2], x).unwrap();
    let s = direction_scores(&ds, &[1.0, 0.0], &[0.6, 0.8]);
    assert!((s[0] - 1.6f64.powi(2)).abs() < 1e-12);
    assert!((s[1] - (-1.2f64 + 0.4).powi(2)).abs() < 1e-12);
}
