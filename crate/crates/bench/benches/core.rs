use std::hint::black_box;
use std::path::Path;

use criterion::{criterion_group, criterion_main, Criterion};

use skyway_core::avoidance::{estimate_collision_probability, predict_conflicts, Trajectory};
use skyway_core::envelope::closest_approach;
use skyway_core::evaluation::{ahp_weights, ComparisonMatrix};
use skyway_core::geometry::Vec3;
use skyway_core::link::{default_modes, link_metrics};
use skyway_core::sim::{run_with, Scenario, TrialOverrides};

fn case_study() -> Scenario {
    Scenario::from_path(Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../config/case_study.toml"))).unwrap()
}

fn geometry(c: &mut Criterion) {
    let dp = Vec3::new(120.0, -40.0, 5.0);
    let dv = Vec3::new(-15.0, 4.0, 0.0);
    c.bench_function("closest_approach", |b| b.iter(|| closest_approach(black_box(&dp), black_box(&dv), 20.0)));

    let a = Trajectory::straight(Vec3::new(-100.0, 0.0, 0.0), Vec3::new(10.0, 0.0, 0.0), 0.0, 0.5, 41, 2.0);
    let o = Trajectory::straight(Vec3::new(100.0, 10.0, 0.0), Vec3::new(-10.0, 0.0, 0.0), 0.0, 0.5, 41, 2.0);
    c.bench_function("collision_probability_1e4", |b| {
        b.iter(|| estimate_collision_probability(&a, &o, 5.0, 10_000, black_box(7)).unwrap())
    });
}

fn conflicts(c: &mut Criterion) {
    let s = case_study();
    let prepared = s.prepare(TrialOverrides { count: Some(8), ..Default::default() }).unwrap();
    let states: Vec<_> = prepared
        .aircraft
        .iter()
        .map(|a| {
            let (p0, _) = a.waypoints[0];
            let (p1, t1) = a.waypoints[1];
            skyway_core::envelope::AircraftState::new(a.id, a.class, p0, (p1 - p0) / t1, a.envelope)
        })
        .collect();
    c.bench_function("predict_conflicts_8", |b| b.iter(|| predict_conflicts(black_box(&states), 20.0, 2.0)));
}

fn simulation(c: &mut Criterion) {
    let s = case_study();
    let mut g = c.benchmark_group("trial");
    g.sample_size(10);
    for count in [2, 8] {
        g.bench_function(format!("case_study_{count}"), |b| {
            b.iter(|| run_with(&s, TrialOverrides { seed: Some(1), count: Some(count), safety_margin_m: Some(10.0) }).unwrap())
        });
    }
    g.finish();
}

fn evaluation(c: &mut Criterion) {
    let modes = default_modes();
    c.bench_function("link_metrics", |b| b.iter(|| link_metrics(black_box(&modes)).unwrap()));
    let m = ComparisonMatrix::Crisp((0..9).map(|i| (0..9).map(|j| 2f64.powi(j - i)).collect()).collect());
    c.bench_function("ahp_weights_9", |b| b.iter(|| ahp_weights(black_box(&m)).unwrap()));
}

criterion_group!(benches, geometry, conflicts, simulation, evaluation);
criterion_main!(benches);
