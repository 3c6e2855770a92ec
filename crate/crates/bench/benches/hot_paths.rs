//! Timings for the numerical kernels the pipeline spends its cycles in:
//! great-circle legs, zone crossing accounting, density clustering and the
//! two model fits.

use std::collections::BTreeMap;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use routecast::{
    dbscan, fit_multinomial, fit_regression_tree, great_circle_km, zone_distance_profile,
    ChargingZone, GeoPoint, RouteOption, Trajectory, TrajectoryPoint, ZoneSet,
};

fn random_points(n: usize, seed: u64) -> Vec<GeoPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| GeoPoint::new(rng.gen_range(-60.0..60.0), rng.gen_range(-180.0..180.0)))
        .collect()
}

fn bench_great_circle(c: &mut Criterion) {
    let pts = random_points(1024, 5);
    c.bench_function("great_circle_km x1024", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for w in pts.windows(2) {
                acc += great_circle_km(std::hint::black_box(w[0]), std::hint::black_box(w[1]));
            }
            acc
        })
    });
}

fn grid_zones() -> ZoneSet {
    let mut zones = Vec::new();
    for i in 0..4 {
        let lon0 = -10.0 + 10.0 * i as f64;
        zones.push(ChargingZone {
            id: format!("Z{i}"),
            rings: vec![vec![
                GeoPoint::new(30.0, lon0),
                GeoPoint::new(30.0, lon0 + 10.0),
                GeoPoint::new(55.0, lon0 + 10.0),
                GeoPoint::new(55.0, lon0),
            ]],
            unit_rates: BTreeMap::from([("1601".to_string(), 60.0)]),
        });
    }
    ZoneSet::new(zones)
}

fn bench_zone_profile(c: &mut Criterion) {
    let zones = grid_zones();
    // a 40-point trajectory crossing all four zones, legs long enough to
    // trigger densification
    let points: Vec<TrajectoryPoint> = (0..40)
        .map(|i| {
            let f = i as f64 / 39.0;
            TrajectoryPoint::new(36.0 + 10.0 * f, -8.0 + 36.0 * f, 35000.0, 600.0 * i as f64)
        })
        .collect();
    let traj = Trajectory::new(points);
    c.bench_function("zone_distance_profile 40pt/4z", |b| {
        b.iter(|| zone_distance_profile(std::hint::black_box(&traj), &zones))
    });
}

fn bench_dbscan(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    // four tight blobs in 3-d feature space, the shape route clustering sees
    let centers = [
        [0.2, 0.2, 0.1],
        [0.8, 0.3, 0.5],
        [0.4, 0.7, 0.9],
        [0.9, 0.9, 0.2],
    ];
    let points: Vec<Vec<f64>> = (0..800)
        .map(|i| {
            let cen = centers[i % 4];
            cen.iter().map(|&v| v + rng.gen_range(-0.05..0.05)).collect()
        })
        .collect();
    c.bench_function("dbscan 800x3", |b| {
        b.iter(|| dbscan(std::hint::black_box(&points), 0.3, 20))
    });
}

fn bench_fit_multinomial(c: &mut Criterion) {
    let options = vec![
        RouteOption {
            route: 0,
            features: [-0.8, -0.6, 0.1],
        },
        RouteOption {
            route: 1,
            features: [0.3, -0.2, 0.4],
        },
        RouteOption {
            route: 2,
            features: [0.8, 0.5, 0.2],
        },
    ];
    let targets = [0.46, 0.27, 0.12, 0.15];
    c.bench_function("fit_multinomial 3 routes", |b| {
        b.iter(|| fit_multinomial(std::hint::black_box(&options), &targets, 7).unwrap())
    });
}

fn bench_fit_tree(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rows: Vec<Vec<f64>> = (0..400)
        .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let targets: Vec<f64> = rows
        .iter()
        .map(|r| if r[0] + 0.5 * r[1] < 0.0 { 1.0 } else { 0.0 })
        .collect();
    c.bench_function("fit_regression_tree 400x3", |b| {
        b.iter(|| fit_regression_tree(std::hint::black_box(&rows), &targets, 11).unwrap())
    });
}

criterion_group!(
    benches,
    bench_great_circle,
    bench_zone_profile,
    bench_dbscan,
    bench_fit_multinomial,
    bench_fit_tree
);
criterion_main!(benches);
