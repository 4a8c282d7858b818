//! Small particle swarms settling into the coherent patterns the continuum
//! solver predicts.

use quasimorse::particles::{default_dt, flock_initial, mill_initial, order_parameters, simulate, ParticleState};
use quasimorse::potential::potential_minimum;
use quasimorse::{MotionParams, PotentialParams};

fn base_2d() -> PotentialParams {
    PotentialParams::new(2, 10.0 / 9.0, 0.75, 0.5, 100.0).unwrap()
}

fn motion() -> MotionParams {
    MotionParams::new(1.0, 5.0).unwrap()
}

fn mean_speed(s: &ParticleState) -> f64 {
    (0..s.len())
        .map(|i| s.vel(i).iter().map(|c| c * c).sum::<f64>().sqrt())
        .sum::<f64>()
        / s.len() as f64
}

fn radius_of_gyration(s: &ParticleState) -> f64 {
    let com = s.center_of_mass();
    let sum: f64 = (0..s.len())
        .map(|i| s.pos(i).iter().zip(&com).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
        .sum();
    (sum / s.len() as f64).sqrt()
}

#[test]
fn flock_aligns_and_stays_together() {
    let p = base_2d();
    let m = motion();
    let rmin = potential_minimum(&p).unwrap();
    let start = flock_initial(2, 200, 2.0 * rmin, &m, 3).unwrap();
    let end = simulate(start, &p, &m, default_dt(&p, &m), 20.0).unwrap();
    let (pol, _) = order_parameters(&end);
    assert!(pol >= 0.95, "polarization {pol}");
    assert!((mean_speed(&end) / m.cruise_speed() - 1.0).abs() < 0.05);
    // a uniform disc of the continuum radius 1.31 has gyration radius 0.93
    let rg = radius_of_gyration(&end);
    assert!(rg < 1.5, "gyration radius {rg}");
}

#[test]
fn mill_velocities_are_tangential() {
    let p = base_2d();
    let m = motion();
    let rmin = potential_minimum(&p).unwrap();
    let start = mill_initial(300, 0.5 * rmin, 1.5 * rmin, &m, 5).unwrap();
    let end = simulate(start, &p, &m, default_dt(&p, &m), 20.0).unwrap();
    let (pol, ang) = order_parameters(&end);
    assert!(ang >= 0.9 && pol <= 0.1, "polarization {pol}, angular {ang}");
    let com = end.center_of_mass();
    let radial: f64 = (0..end.len())
        .map(|i| {
            let x: Vec<f64> = end.pos(i).iter().zip(&com).map(|(a, b)| a - b).collect();
            let v = end.vel(i);
            let (xn, vn) = (x[0].hypot(x[1]), v[0].hypot(v[1]));
            ((x[0] * v[0] + x[1] * v[1]) / (xn * vn)).abs()
        })
        .sum::<f64>()
        / end.len() as f64;
    assert!(radial <= 0.1, "mean |v.x| {radial}");
}

#[test]
fn flock_in_three_dimensions() {
    let p = PotentialParams::new(3, 1.255, 0.8, 0.2, 100.0).unwrap();
    let m = motion();
    let rmin = potential_minimum(&p).unwrap();
    let start = flock_initial(3, 150, 2.0 * rmin, &m, 11).unwrap();
    let end = simulate(start, &p, &m, default_dt(&p, &m), 20.0).unwrap();
    let (pol, _) = order_parameters(&end);
    assert!(pol >= 0.95, "polarization {pol}");
    assert!((mean_speed(&end) / m.cruise_speed() - 1.0).abs() < 0.05);
}
