use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;

use common::*;
use skyway_core::avoidance::estimate_collision_probability;
use skyway_core::envelope::{
    classify_conflict, closest_approach, time_to_breach, ConflictClass, EnvelopeShape,
};
use skyway_core::evaluation::{ahp_weights, composite_score, ComparisonMatrix, Indicator, IndicatorSet};
use skyway_core::geometry::Vec3;
use skyway_core::link::{default_modes, link_metrics, LinkMode, ModeName};

#[test]
fn closest_approach_matches_dense_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for n in 0..1000 {
        let dp = vec3(&mut rng, 500.0);
        let dv = if n % 50 == 0 { Vec3::zeros() } else { vec3(&mut rng, 30.0) };
        let horizon = rng.random_range(5.0..120.0);
        let cpa = closest_approach(&dp, &dv, horizon);
        let (t, d) = sampled_cpa(&dp, &dv, horizon);
        assert!((0.0..=horizon).contains(&cpa.t_cpa));
        assert!((cpa.d_cpa - d).abs() <= 1e-6 * d.max(1e-3), "encounter {n}: {} vs {d}", cpa.d_cpa);
        // Near the minimum d varies by < 1e-6 relative inside this window.
        let v = dv.norm();
        let window = if v > 0.0 { (2e-6f64).sqrt() * d / v + 1e-6 * horizon } else { horizon };
        assert!((cpa.t_cpa - t).abs() <= window, "encounter {n}: t {} vs {t}", cpa.t_cpa);
    }
}

#[test]
fn sampled_overlap_is_never_classified_clear() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut overlapping = 0;
    for _ in 0..2000 {
        let (sa, sb) = (arb_shape(&mut rng), arb_shape(&mut rng));
        let va = vec3(&mut rng, 10.0);
        let vb = vec3(&mut rng, 10.0);
        let a = aircraft(1, Vec3::zeros(), va, sa, rng.random_range(0.0..5.0));
        let b = aircraft(2, vec3(&mut rng, 6.0), vb, sb, rng.random_range(0.0..5.0));
        let r = sa.bounding_radius();
        let hit = (0..3000).any(|_| {
            let p = a.position + vec3(&mut rng, r);
            a.physical_contains(&p) && b.physical_contains(&p)
        });
        let class = classify_conflict(&a, &b).unwrap();
        if hit {
            overlapping += 1;
            assert_eq!(class, ConflictClass::PhysicalCollision);
        }
        assert_eq!(class, classify_conflict(&b, &a).unwrap());
    }
    assert!(overlapping > 200, "{overlapping}");
}

#[test]
fn shapes_stay_within_bounding_radius() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..10_000 {
        let s = arb_shape(&mut rng);
        let r = s.bounding_radius();
        for _ in 0..20 {
            let p = vec3(&mut rng, r);
            if s.contains_local(&p) {
                assert!(p.norm() <= r * (1.0 + 1e-12));
            }
        }
    }
}

proptest! {
    #[test]
    fn larger_margin_never_clears_a_conflict(
        x in -60.0..60.0f64, y in -60.0..60.0f64, m in 0.0..20.0f64, extra in 0.0..20.0f64, r in 0.5..4.0f64,
    ) {
        let shape = EnvelopeShape::Sphere { radius: r };
        let p = Vec3::new(x, y, 0.0);
        let small = classify_conflict(&aircraft(1, Vec3::zeros(), Vec3::zeros(), shape, m), &aircraft(2, p, Vec3::zeros(), shape, m)).unwrap();
        let large = classify_conflict(
            &aircraft(1, Vec3::zeros(), Vec3::zeros(), shape, m + extra),
            &aircraft(2, p, Vec3::zeros(), shape, m + extra),
        )
        .unwrap();
        if small != ConflictClass::Clear {
            prop_assert_ne!(large, ConflictClass::Clear);
        }
    }

    #[test]
    fn breach_prediction_is_symmetric(
        px in -300.0..300.0f64, py in -300.0..300.0f64, vx in -20.0..20.0f64, vy in -20.0..20.0f64, h in 5.0..60.0f64,
    ) {
        let s = EnvelopeShape::Sphere { radius: 2.0 };
        let a = aircraft(1, Vec3::zeros(), Vec3::new(5.0, 0.0, 0.0), s, 10.0);
        let b = aircraft(2, Vec3::new(px, py, 0.0), Vec3::new(vx, vy, 0.0), s, 10.0);
        let (ab, ba) = (time_to_breach(&a, &b, h), time_to_breach(&b, &a, h));
        prop_assert_eq!(ab.is_some(), ba.is_some());
        if let (Some(x), Some(y)) = (ab, ba) {
            prop_assert!((x.t_breach - y.t_breach).abs() < 1e-9);
            prop_assert!((x.d_cpa - y.d_cpa).abs() < 1e-9);
        }
    }
}

#[test]
fn link_metrics_match_spreadsheet_oracle() {
    let modes = default_modes();
    let rows = link_metrics(&modes).unwrap();
    for (m, r) in modes.iter().zip(&rows) {
        let (range, rate) = spreadsheet(m, if m.name == ModeName::Sat { 600.0 } else { 1.0 });
        assert!(rel_close(r.effective_range_km, range, 1e-6), "{:?}: {} vs {range}", m.name, r.effective_range_km);
        assert!(rel_close(r.data_rate_bps, rate, 1e-6), "{:?}: {} vs {rate}", m.name, r.data_rate_bps);
    }
    let best_rate = rows.iter().max_by(|a, b| a.data_rate_bps.total_cmp(&b.data_rate_bps)).unwrap();
    let best_range = rows.iter().max_by(|a, b| a.effective_range_km.total_cmp(&b.effective_range_km)).unwrap();
    assert_eq!(best_rate.mode, ModeName::FiveGA);
    assert_eq!(best_range.mode, ModeName::Sat);
}

proptest! {
    #[test]
    fn random_modes_match_spreadsheet_oracle(
        f in 100.0..6000.0f64, p in 0.01..5000.0f64, b in 0.1..200.0f64, sens in -120.0..-60.0f64, nf in 0.0..12.0f64,
    ) {
        let mut m = LinkMode::new(ModeName::Rid, f, p, b);
        m.sensitivity_dbm = sens;
        m.noise_figure_db = nf;
        let r = &link_metrics(std::slice::from_ref(&m)).unwrap()[0];
        let (range, rate) = spreadsheet(&m, 1.0);
        prop_assert!(rel_close(r.effective_range_km, range, 1e-6));
        prop_assert!(rel_close(r.data_rate_bps, rate, 1e-6));
    }
}

#[test]
fn collision_probability_matches_quadrature() {
    let (sigma, n) = (5.0, 100_000);
    let p_ref = disc_probability(10.0, 2.0 * sigma * sigma, 4.0);
    let se = (p_ref * (1.0 - p_ref) / n as f64).sqrt();
    let (a, b) = miss_pair(10.0);
    let mut total = 0.0;
    for seed in 0..20 {
        let p = estimate_collision_probability(&a, &b, sigma, n, seed).unwrap();
        assert!((p - p_ref).abs() <= 3.0 * se, "seed {seed}: {p} vs {p_ref} (se {se})");
        total += p;
    }
    let pooled = total / 20.0;
    assert!((pooled - p_ref).abs() <= 3.0 * se / 20f64.sqrt(), "pooled {pooled} vs {p_ref}");
}

#[test]
fn collision_probability_grows_with_sigma_below_half_the_miss() {
    let (a, b) = miss_pair(10.0);
    let n = 40_000;
    let mut last = -1.0;
    for sigma in [0.5, 1.0, 2.0, 3.0, 4.0, 5.0] {
        let p = estimate_collision_probability(&a, &b, sigma, n, 3).unwrap();
        let se = (p * (1.0 - p) / n as f64).sqrt().max(1.0 / n as f64);
        assert!(p >= last - 2.0 * se, "sigma {sigma}: {p} after {last}");
        last = p;
    }
}

fn consistent_matrix(w: &[f64]) -> ComparisonMatrix {
    ComparisonMatrix::Crisp(w.iter().map(|a| w.iter().map(|b| a / b).collect()).collect())
}

proptest! {
    #[test]
    fn consistent_judgments_recover_their_weights(raw in proptest::collection::vec(0.1..10.0f64, 2..=9)) {
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let r = ahp_weights(&consistent_matrix(&w)).unwrap();
        prop_assert!(r.consistency_ratio < 1e-6);
        prop_assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for (got, want) in r.weights.iter().zip(&w) {
            prop_assert!((got - want).abs() < 1e-9);
        }
    }

    #[test]
    fn weights_are_a_distribution_for_any_reciprocal_matrix(
        upper in proptest::collection::vec(proptest::sample::select(vec![1.0/9.0, 1.0/7.0, 1.0/5.0, 1.0/3.0, 1.0, 3.0, 5.0, 7.0, 9.0]), 36),
        n in 2usize..=9,
    ) {
        let mut m = vec![vec![1.0; n]; n];
        let pairs = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)));
        for ((i, j), x) in pairs.zip(&upper) {
            m[i][j] = *x;
            m[j][i] = 1.0 / x;
        }
        let r = ahp_weights(&ComparisonMatrix::Crisp(m)).unwrap();
        prop_assert!(r.weights.iter().all(|w| *w >= 0.0));
        prop_assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(r.lambda_max >= n as f64 - 1e-9);
    }

    #[test]
    fn composite_is_monotone(values in proptest::collection::vec(0.0..1.0f64, 7), bump in 0.0..1.0f64, which in 0usize..7) {
        let set = |v: &[f64]| {
            let ind = |k: usize| Indicator { name: format!("i{k}"), raw: v[k], value: v[k], bounds: [0.0, 1.0], higher_is_better: true };
            IndicatorSet {
                airspace_structure: vec![ind(0), ind(1)],
                aircraft_performance: vec![ind(2), ind(3)],
                operational_safety: vec![ind(4), ind(5), ind(6)],
            }
        };
        let g = [0.2, 0.3, 0.5];
        let leaves = vec![vec![0.4, 0.6], vec![0.5, 0.5], vec![0.5, 0.3, 0.2]];
        let before = composite_score(&set(&values), &g, &leaves).unwrap();
        let mut up = values.clone();
        up[which] = (up[which] + bump).min(1.0);
        let after = composite_score(&set(&up), &g, &leaves).unwrap();
        prop_assert!(after >= before - 1e-15);
        prop_assert!((0.0..=1.0).contains(&after));
    }
}
