//! Reference values were computed with an independent statistics library
//! before these tests were written and are frozen here.

use conseq_core::stats::mann_whitney::u_z_score;
use conseq_core::stats::special::chi_square_sf;
use conseq_core::stats::*;
use conseq_testkit::oracle::mann_whitney_enumerated;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn shapiro_reference_fixtures() {
    let cases: [(&[f64], f64, f64); 5] = [
        (&[2.1, 3.4, 1.9, 5.6, 4.4, 3.3, 2.8, 7.9, 3.1, 4.0], 0.8851427659855952, 0.14940943134637807),
        (&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 30.0], 0.6698890078433926, 0.0003809682833082067),
        (&[0.5, 1.5, 2.5], 1.0, 1.0),
        (&[3.0, 4.0, 4.0, 5.0, 2.0, 3.0, 4.0, 5.0, 5.0, 1.0, 3.0, 4.0, 4.0, 2.0, 5.0], 0.8958448205936224, 0.082253168823215),
        (&[1.2, 0.8, 3.5, 2.2, 1.9], 0.9532731947270551, 0.760538788778068),
    ];
    for (sample, w, p) in cases {
        let r = shapiro_wilk(sample).unwrap();
        assert!((r.statistic - w).abs() < 1e-3, "{sample:?}: W {} vs {w}", r.statistic);
        assert!((r.p_value - p).abs() < 1e-3, "{sample:?}: p {} vs {p}", r.p_value);
        assert_eq!(r.method, "shapiro-wilk-royston");
    }
}

#[test]
fn shapiro_degenerate_inputs() {
    assert!(matches!(shapiro_wilk(&[1.0, 2.0]), Err(StatsError::SampleTooSmall { .. })));
    assert_eq!(shapiro_wilk(&[2.5; 10]), Err(StatsError::ZeroVariance));
}

#[test]
fn mann_whitney_tied_reference() {
    let a = [3.0, 4.0, 2.0, 5.0, 4.0, 3.0, 4.0, 5.0, 3.0, 2.0, 4.0, 4.0];
    let b = [4.0, 5.0, 5.0, 3.0, 4.0, 5.0, 5.0, 4.0, 3.0, 5.0, 4.0, 5.0];
    let r = mann_whitney_u(&a, &b, MwMode::Auto).unwrap();
    assert!((r.statistic - 41.0).abs() < 1e-6);
    assert!((r.p_value - 0.06374871881966329).abs() < 1e-6, "{}", r.p_value);
    assert!(!r.exact);
}

#[test]
fn mann_whitney_smallest_case_is_two_sixths() {
    let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0], MwMode::Exact).unwrap();
    assert_eq!(r.statistic, 0.0);
    assert_eq!(r.p_value, 2.0 / 6.0);
}

fn distinct_sample(rng: &mut ChaCha8Rng, na: usize, nb: usize) -> (Vec<f64>, Vec<f64>) {
    let mut pool: Vec<f64> = (0..(na + nb) as u32 * 3).map(f64::from).collect();
    pool.shuffle(rng);
    (pool[..na].to_vec(), pool[na..na + nb].to_vec())
}

#[test]
fn exact_mann_whitney_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let (na, nb) = (rng.random_range(1..=8), rng.random_range(1..=8));
        let (a, b) = distinct_sample(&mut rng, na, nb);
        let r = mann_whitney_u(&a, &b, MwMode::Exact).unwrap();
        let (u, p) = mann_whitney_enumerated(&a, &b);
        assert!(r.exact);
        assert_eq!(r.statistic, u);
        assert!((r.p_value - p).abs() < 1e-12, "{a:?} {b:?}: {} vs {p}", r.p_value);
    }
}

#[test]
fn kruskal_hand_fixture() {
    let r = kruskal_wallis(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0], vec![7.0, 8.0, 9.0]]).unwrap();
    assert!((r.statistic - 7.2).abs() < 1e-9);
    assert!((r.p_value - 0.02732372244729252).abs() < 1e-9);
}

#[test]
fn kruskal_tied_references() {
    let cases = [
        (
            vec![vec![1.0, 2.0, 2.0, 3.0, 4.0], vec![2.0, 3.0, 3.0, 4.0, 5.0, 5.0], vec![4.0, 5.0, 5.0, 5.0, 6.0]],
            8.179012345679023,
            0.01674750188815244,
        ),
        (
            vec![vec![2.5, 3.0, 3.0, 4.1], vec![3.0, 4.1, 4.1, 5.2, 6.0], vec![1.0, 2.5, 2.5]],
            7.638442822384428,
            0.02194488028266479,
        ),
    ];
    for (groups, h, p) in cases {
        let r = kruskal_wallis(&groups).unwrap();
        assert!((r.statistic - h).abs() < 1e-6, "{} vs {h}", r.statistic);
        assert!((r.p_value - p).abs() < 1e-6);
    }
}

#[test]
fn bonferroni_exact_division() {
    for n in 1..=100 {
        assert!((bonferroni(0.05, n) - 0.05 / n as f64).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn kruskal_is_order_invariant(groups in proptest::collection::vec(proptest::collection::vec(0u8..6, 1..8), 2..5), seed in any::<u64>()) {
        let groups: Vec<Vec<f64>> = groups.into_iter().map(|g| g.into_iter().map(f64::from).collect()).collect();
        prop_assume!(groups.iter().map(Vec::len).sum::<usize>() >= 3);
        let a = kruskal_wallis(&groups).unwrap();
        let mut shuffled = groups.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        for g in &mut shuffled {
            g.reverse();
        }
        let b = kruskal_wallis(&shuffled).unwrap();
        prop_assert!((a.statistic - b.statistic).abs() < 1e-9);
        prop_assert!((a.p_value - b.p_value).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a.p_value));
    }

    #[test]
    fn mann_whitney_is_symmetric(a in proptest::collection::vec(0u8..10, 1..15), b in proptest::collection::vec(0u8..10, 1..15)) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        for mode in [MwMode::Auto, MwMode::Approx, MwMode::Exact] {
            let x = mann_whitney_u(&a, &b, mode).unwrap();
            let y = mann_whitney_u(&b, &a, mode).unwrap();
            prop_assert_eq!(x.statistic, y.statistic);
            prop_assert!((x.p_value - y.p_value).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&x.p_value));
        }
    }

    /// On two tie-free groups, H equals the squared z of the rank-sum statistic.
    #[test]
    fn two_group_kruskal_agrees_with_rank_sum_z(na in 1usize..12, nb in 1usize..12, seed in any::<u64>()) {
        prop_assume!(na + nb >= 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = distinct_sample(&mut rng, na, nb);
        let h = kruskal_wallis(&[a.clone(), b.clone()]).unwrap();
        let z = u_z_score(&a, &b, false);
        prop_assert!((h.statistic - z * z).abs() < 1e-9, "H {} z² {}", h.statistic, z * z);
        let cutoff = 3.841_458_820_694_124;
        prop_assert_eq!(h.statistic > cutoff, z * z > cutoff);
        prop_assert!((h.p_value - chi_square_sf(z * z, 1.0)).abs() < 1e-9);
    }
}
