mod common;

use common::*;
use optoforce_core::constants::HBAR;
use optoforce_core::forces::Order;
use optoforce_quantum::{evolve, init_gaussian_packet, EvolveOptions, SpatialGrid};

#[test]
fn free_packet_follows_analytic_gaussian() {
    let it = desk_interaction(0.0);
    let grid = desk_grid();
    let state = init_gaussian_packet(-START, SPEED, SIGMA, MASS, &grid).unwrap();
    let ev = evolve(state, &grid, &it, &desk_options(30e-9)).unwrap();
    let s = &ev.series;
    for i in 0..s.len() {
        let t = s.times[i];
        let r = -START + SPEED * t;
        let w = SIGMA * (1.0 + (HBAR * t / (2.0 * MASS * SIGMA * SIGMA)).powi(2)).sqrt();
        assert!((s.mean_position[i] - r).abs() < 1e-4 * START, "t={t:e}");
        assert!((s.width[i] / w - 1.0).abs() < 1e-4, "t={t:e}");
        assert_eq!(s.excited_population[i], 0.0);
    }
    assert!(s.max_norm_drift() < 1e-10);
}

#[test]
fn mirrored_start_with_reversed_beam_mirrors_the_trajectory() {
    let it = desk_interaction(0.2);
    let grid = desk_grid();
    let opts = desk_options(12e-9);
    let a = evolve(init_gaussian_packet(-START, SPEED, SIGMA, MASS, &grid).unwrap(), &grid, &it, &opts).unwrap();
    let mirror = EvolveOptions { counter_propagating: true, ..opts };
    let b = evolve(init_gaussian_packet(START, -SPEED, SIGMA, MASS, &grid).unwrap(), &grid, &it, &mirror).unwrap();
    for i in 0..a.series.len() {
        assert!((a.series.mean_position[i] + b.series.mean_position[i]).abs() < 1e-9 * START);
        assert!((a.series.excited_population[i] - b.series.excited_population[i]).abs() < 1e-9);
    }
    // without the reversal the Doppler shift changes sign and so does the
    // excited fraction reached on the way in
    let c = evolve(init_gaussian_packet(START, -SPEED, SIGMA, MASS, &grid).unwrap(), &grid, &it, &opts).unwrap();
    let last = a.series.len() - 1;
    assert!(a.series.excited_population[last] > 1.5 * c.series.excited_population[last]);
}

#[test]
fn grid_rejects_inadequate_steps() {
    let it = desk_interaction(0.2);
    let coarse = SpatialGrid::new(-160e-6, 160e-6, 8192).unwrap();
    let state = init_gaussian_packet(-START, SPEED, SIGMA, MASS, &coarse).unwrap();
    assert!(evolve(state.clone(), &coarse, &it, &EvolveOptions::new(1e-10, 1e-9, 1)).is_err());
    let fine = coarse.refined().refined();
    let state = init_gaussian_packet(-START, SPEED, SIGMA, MASS, &fine).unwrap();
    // the kinetic bound m·dx²/ħ drops below the detuning bound on a finer grid
    assert!(evolve(state, &fine, &it, &desk_options(1e-9)).is_err());
}

/// Full desk-scale passage in both directions: speed preserved, excited
/// fraction near the perturbative estimate, and the smoothed acceleration
/// following the all-orders oscillator force.
#[test]
fn desk_scale_passage() {
    let it = desk_interaction(0.2);
    let grid = desk_grid();
    let runs: Vec<_> = std::thread::scope(|s| {
        [(-START, SPEED), (START, -SPEED)]
            .map(|(r0, v0)| {
                let (it, grid) = (&it, &grid);
                s.spawn(move || {
                    let st = init_gaussian_packet(r0, v0, SIGMA, MASS, grid).unwrap();
                    (v0, evolve(st, grid, it, &desk_options(46e-9)).unwrap())
                })
            })
            .map(|h| h.join().unwrap())
            .into_iter()
            .collect()
    });
    for (v0, ev) in &runs {
        let s = &ev.series;
        assert!(s.max_norm_drift() < 1e-8);
        let (v_in, v_out) = s.matched_speeds(0.8 * START, *v0, 1e-9).unwrap();
        let ratio = v_out / v_in;
        assert!((0.99..=1.001).contains(&ratio), "v0={v0}: {ratio}");

        let peak = s.excited_population.iter().cloned().fold(0.0, f64::max);
        let estimate = it.excited_population(0.0, *v0).unwrap().probability;
        assert!((peak / estimate - 1.0).abs() < 0.25, "v0={v0}: {peak} vs {estimate}");

        let exact = it.analytic_force_breakdown(10e-6, *v0, Order::Exact).unwrap().total / it.rest_force(10e-6);
        let pts = s.filtered_force_comparison(MASS, 0.5e-9);
        let f_peak = pts.iter().fold(0.0f64, |m, p| m.max(p.rest_force.abs()));
        for p in pts.iter().filter(|p| p.excited_population < 0.05 && p.rest_force.abs() >= 0.5 * f_peak) {
            let dev = p.mass_times_acceleration / (exact * p.rest_force) - 1.0;
            assert!(dev.abs() < 0.04, "v0={v0} t={:e}: {dev}", p.t);
        }
    }
}
