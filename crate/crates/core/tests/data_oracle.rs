mod common;

use nalgebra::{DMatrix, DVector};
use pep_select::data::{ols_stats, ve_inverse};
use pep_select::rng::stream;
use pep_select::simgen::gen_scenario1;
use pep_select::{centre, load_csv, write_csv, Dataset, Design, ModelId};
use proptest::prelude::*;

#[test]
fn beta_hat_matches_normal_equations() {
    let ds = common::dataset(31, 30, 3, &[1.0, -0.5, 0.25], 1.0);
    let d = Design::intercept_only(&ds).unwrap();
    let st = ols_stats(&d, &ModelId::full(3)).unwrap();
    let x1 = DMatrix::from_fn(30, 4, |i, j| if j == 0 { 1.0 } else { ds.x[(i, j - 1)] });
    let xtx = x1.transpose() * &x1;
    let b = xtx.try_inverse().unwrap() * x1.transpose() * &ds.y;
    for (got, want) in st.beta_hat.iter().zip(b.iter()) {
        assert!(common::rel_err(*got, *want) < 1e-8, "{got} vs {want}");
    }
    let rss = (&ds.y - &x1 * &b).norm_squared();
    assert!(common::rel_err(st.rss, rss) < 1e-10);
}

#[test]
fn residual_precision_matches_dense_projector() {
    let ds = common::dataset(32, 25, 3, &[0.3, 0.3, 0.3], 1.0);
    let d = Design::intercept_only(&ds).unwrap();
    let m = ModelId::from_indices(3, &[0, 2]);
    let got = ve_inverse(&d, &m).unwrap();
    let x0 = DMatrix::from_element(25, 1, 1.0);
    let p0 = DMatrix::identity(25, 25)
        - &x0 * (x0.transpose() * &x0).try_inverse().unwrap() * x0.transpose();
    let xe = ds.x.select_columns(&[0, 2]);
    let want = xe.transpose() * p0 * &xe;
    assert!((got - &want).amax() < 1e-10 * want.amax());
}

#[test]
fn csv_round_trip_is_bit_exact() {
    let ds = gen_scenario1(50, 15, &mut stream(5)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s1.csv");
    write_csv(&ds, &path).unwrap();
    let back = load_csv(&path, "y").unwrap();
    assert_eq!(back.names, ds.names);
    assert_eq!(back.y, ds.y);
    assert_eq!(back.x, ds.x);
}

fn arb_dataset() -> impl Strategy<Value = Dataset> {
    (0u64..10_000, 20usize..60).prop_map(|(seed, n)| {
        common::dataset(seed, n, 4, &[0.7, 0.0, -0.4, 0.2], 1.0)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn permuting_columns_permutes_beta(ds in arb_dataset(), perm in Just(vec![2usize, 0, 3, 1]).prop_shuffle()) {
        let full = ModelId::full(4);
        let a = ols_stats(&Design::intercept_only(&ds).unwrap(), &full).unwrap();
        // Old column j moves to position perm[j].
        let mut order = vec![0; 4];
        for (j, &pj) in perm.iter().enumerate() {
            order[pj] = j;
        }
        let pds = ds.select_columns(&order).unwrap();
        let b = ols_stats(&Design::intercept_only(&pds).unwrap(), &full).unwrap();
        for j in 0..4 {
            prop_assert!((a.beta_hat[1 + j] - b.beta_hat[1 + perm[j]]).abs() < 1e-10);
        }
        prop_assert!(common::rel_err(b.rss, a.rss) < 1e-10);
        prop_assert!((a.r2 - b.r2).abs() < 1e-10);
        prop_assert!((a.r10 - b.r10).abs() < 1e-10);
    }

    #[test]
    fn rescaling_a_column_rescales_its_coefficient(ds in arb_dataset(), j in 0usize..4, c in prop_oneof![-50.0..-0.02f64, 0.02..50.0f64]) {
        let full = ModelId::full(4);
        let a = ols_stats(&Design::intercept_only(&ds).unwrap(), &full).unwrap();
        let mut x = ds.x.clone();
        x.column_mut(j).scale_mut(c);
        let sds = Dataset::new(ds.y.clone(), x, ds.names.clone()).unwrap();
        let b = ols_stats(&Design::intercept_only(&sds).unwrap(), &full).unwrap();
        prop_assert!(common::rel_err(b.beta_hat[1 + j] * c, a.beta_hat[1 + j]) < 1e-8);
        prop_assert!(common::rel_err(b.rss, a.rss) < 1e-8);
        prop_assert!(common::rel_err(b.r10, a.r10) < 1e-8);
        prop_assert!((b.r2 - a.r2).abs() < 1e-8);
    }

    #[test]
    fn rescaling_y_scales_rss(ds in arb_dataset(), c in 0.01..100.0f64) {
        let full = ModelId::full(4);
        let a = ols_stats(&Design::intercept_only(&ds).unwrap(), &full).unwrap();
        let y: DVector<f64> = &ds.y * c;
        let sds = Dataset::new(y, ds.x.clone(), ds.names.clone()).unwrap();
        let b = ols_stats(&Design::intercept_only(&sds).unwrap(), &full).unwrap();
        prop_assert!(common::rel_err(b.rss, a.rss * c * c) < 1e-8);
        prop_assert!(common::rel_err(b.r10, a.r10) < 1e-8);
        prop_assert!((b.r2 - a.r2).abs() < 1e-8);
    }

    #[test]
    fn centring_keeps_fit_and_zeroes_means(ds in arb_dataset()) {
        let c = centre(&ds);
        for j in 0..4 {
            prop_assert!(c.x.column(j).mean().abs() < 1e-12);
        }
        let full = ModelId::full(4);
        let a = ols_stats(&Design::intercept_only(&ds).unwrap(), &full).unwrap();
        let b = ols_stats(&Design::intercept_only(&c).unwrap(), &full).unwrap();
        prop_assert!(common::rel_err(b.rss, a.rss) < 1e-10);
    }
}
