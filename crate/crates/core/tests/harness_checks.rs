use std::sync::Arc;

use approx::assert_relative_eq;
use wpme_core::harness::scenario::{barenblatt_field, dirac_field, log_schedule, power_grid};
use wpme_core::harness::*;
use wpme_core::oracle::{blowup_coefficient, BlowupParams};
use wpme_core::solver::evolve;
use wpme_core::{BoundaryCondition, Error, Field, RadialGrid, StepControl, Trajectory};

fn zero_run(grid: &Arc<RadialGrid>, times: &[f64]) -> Trajectory {
    let u0 = Field::zeros(grid.clone(), 0.0).unwrap();
    evolve(&u0, *times.last().unwrap(), &BoundaryCondition::ZeroFlux, &StepControl::default(), times).unwrap()
}

fn barenblatt_run(gamma: f64, cells: usize, t_end: f64) -> Trajectory {
    let g = power_grid(3, 2.0, gamma, 4.0, cells).unwrap();
    let u0 = barenblatt_field(&g, 0.2, 0.1).unwrap();
    let schedule = log_schedule(0.1, t_end, 15).split_off(1);
    evolve(&u0, t_end, &BoundaryCondition::ZeroFlux, &StepControl::default(), &schedule).unwrap()
}

#[test]
fn zero_field_checks_pass_trivially() {
    let g = power_grid(3, 2.0, 0.0, 4.0, 64).unwrap();
    let times = [0.2, 0.5, 1.0, 2.0];
    let traj = zero_run(&g, &times);

    let r = check_global_smoothing(&traj, (0.2, 2.0), 0.02).unwrap();
    assert!(r.pass && r.regression.is_none() && !r.notes.is_empty());

    let cyl = SmoothingCylinder { radius: 1.0, t1: 0.2, t2: 0.5, t_star: 1.0 };
    let r = check_local_smoothing(&traj, &[cyl], 0.1, None).unwrap();
    assert_eq!(r.lhs[0], 0.0);
    assert!(r.rhs[0] > 0.0 && r.pass);

    let ac = [AcSample { radius: 1.0, t: 0.5, eps: 0.5, delta: 0.5 }];
    let r = check_ac(&traj, InitialMeasure::FirstSnapshot, &ac).unwrap();
    assert_eq!(r.lhs[0], 0.0);
    assert!(r.pass);

    let cyl = EnergyCylinders { r1: 1.0, r0: 2.0, t0: 0.2, t1: 0.5, t_star: 1.0 };
    let r = check_energy(&traj, cyl, 2.0).unwrap();
    assert_eq!((r.lhs[0], r.rhs[0]), (0.0, 0.0));
    assert!(r.pass);

    let r = check_contraction_and_comparison(&traj, &traj, 1e-10, 1e-8).unwrap();
    assert!(r.pass && r.lhs.iter().all(|d| *d == 0.0));

    let r = check_dual_monotonicity(&traj, 1e-8).unwrap();
    assert!(r.pass);
    assert_eq!(r.measured["max_relative_increase"], 0.0);
}

#[test]
fn sobolev_constant_profile_matches_closed_form() {
    // f = 1 on B_1, N = 3, gamma = 0: |B_1|^{2/6} / |B_1| = (4 pi / 3)^{-2/3}
    let g = power_grid(3, 2.0, 0.0, 1.0, 256).unwrap();
    let f = vec![1.0; 256];
    assert_relative_eq!(sobolev_ratio(&g, &f), 0.384_834_731_559_127, max_relative = 1e-10);
    assert_eq!(sobolev_ratio(&g, &vec![0.0; 256]), 0.0);
}

#[test]
fn sobolev_family_is_deterministic_and_bounded() {
    let a = sobolev_family(11, 120, 0.02);
    assert_eq!(a, sobolev_family(11, 120, 0.02));
    assert_ne!(a, sobolev_family(12, 120, 0.02));
    let grids = [power_grid(3, 2.0, 1.0, 1.0, 256).unwrap(), power_grid(3, 2.0, 1.0, 3.0, 256).unwrap()];
    let r = check_sobolev(&grids, &a).unwrap();
    assert!(r.pass, "{r:?}");
    let small = check_sobolev(&grids, &a[..50]).unwrap();
    assert!(!small.pass);
    assert!(check_sobolev(&grids, &[]).is_err());
}

#[test]
fn ab_monotonicity_constant_field_and_injected_drop() {
    let g = power_grid(3, 2.0, 0.0, 1.0, 32).unwrap();
    let u0 = Field::constant(g.clone(), 0.7, 0.5).unwrap();
    let traj = evolve(&u0, 2.0, &BoundaryCondition::ZeroFlux, &StepControl::default(), &[1.0, 1.5]).unwrap();
    assert!(check_ab_monotonicity(&traj, 1e-6, 1e-12).unwrap().pass);
    let mut snaps = traj.snapshots().to_vec();
    let last = snaps.pop().unwrap();
    snaps.push(last.scaled(0.5).unwrap());
    let injected = Trajectory::from_snapshots(snaps).unwrap();
    assert!(!check_ab_monotonicity(&injected, 1e-6, 1e-12).unwrap().pass);
}

#[test]
fn ordered_data_stay_ordered() {
    let g = power_grid(3, 2.0, 1.0, 4.0, 128).unwrap();
    let u0 = barenblatt_field(&g, 0.2, 0.1).unwrap();
    let v0 = u0.with_values(u0.values().iter().zip(g.centers()).map(|(u, r)| u + 0.1 * (-r * r).exp()).collect(), 0.1).unwrap();
    let schedule = [0.2, 0.5, 1.0];
    let run = |f: &Field| evolve(f, 1.0, &BoundaryCondition::ZeroFlux, &StepControl::default(), &schedule).unwrap();
    let r = check_contraction_and_comparison(&run(&u0), &run(&v0), 1e-10, 1e-8).unwrap();
    assert!(r.pass, "{r:?}");
    assert_eq!(r.measured["initially_ordered"], 1.0);
    assert!(r.measured["ordering_margin"] >= -1e-10);
}

#[test]
fn mismatched_schedules_are_rejected() {
    let g = power_grid(3, 2.0, 0.0, 1.0, 16).unwrap();
    let a = zero_run(&g, &[0.5, 1.0]);
    let b = zero_run(&g, &[0.4, 1.0]);
    assert!(matches!(check_contraction_and_comparison(&a, &b, 1e-10, 1e-8), Err(Error::Mismatch(_))));
}

#[test]
fn scaling_identity_and_constant_field() {
    let g = power_grid(3, 2.0, 0.0, 2.0, 64).unwrap();
    let levels = [Resolution { grid: g.clone(), dt: 1e-2 }];
    let r = check_scaling(&levels, |_| 0.4, 0.5, 1.3, 1e-12, 1.8).unwrap();
    assert!(r.pass && r.lhs[0] < 1e-13, "{r:?}");
    let r = check_scaling(&levels, |x| (1.0 - x * x).max(0.0), 0.5, 1.0, 0.0, 1.8).unwrap();
    assert_eq!(r.lhs[0], 0.0);
    assert!(check_scaling(&levels, |_| 1.0, 0.5, 2.5, 1.0, 1.8).is_err());
}

#[test]
fn scaling_barenblatt_discrepancy_halves() {
    let p = wpme_core::Params::new(3, 2.0, 0.0).unwrap();
    let bp = wpme_core::oracle::BarenblattParams::new(&p, 0.2).unwrap();
    let profile = |r: f64| wpme_core::oracle::barenblatt_eval(&p, &bp, r, 0.1).unwrap_or(0.0);
    let levels = [
        Resolution { grid: power_grid(3, 2.0, 0.0, 4.0, 512).unwrap(), dt: 2e-3 },
        Resolution { grid: power_grid(3, 2.0, 0.0, 4.0, 1024).unwrap(), dt: 1e-3 },
    ];
    let r = check_scaling(&levels, profile, 0.9, 1.3, 1e-2, 1.8).unwrap();
    assert!(r.pass, "{r:?}");
}

#[test]
fn existence_time_halves_when_kappa_doubles() {
    let g = power_grid(3, 2.0, 0.0, 1.0, 64).unwrap();
    let k = blowup_coefficient(g.params());
    assert_relative_eq!(k, 0.05, max_relative = 1e-14);
    let a = BlowupParams::from_amplitude(g.params(), k).unwrap();
    let b = BlowupParams::from_amplitude(g.params(), 2.0 * k).unwrap();
    assert_relative_eq!(a.t_blowup, 1.0, max_relative = 1e-14);
    assert_relative_eq!(b.t_blowup, 0.5, max_relative = 1e-14);
    let control = StepControl { dt0: 1e-4, dt_max: Some(1e-3), ..StepControl::default() };
    let r = check_existence_time(&g, &[k, 2.0 * k, 1e-3 * k], 4.0, &control, 0.03, 0.05).unwrap();
    assert!(r.pass, "{r:?}");
    assert!(r.lhs[2].is_infinite());
    let narrow = check_existence_time(&g, &[k], 4.0, &control, 0.03, 0.05).unwrap();
    assert!(!narrow.pass);
}

#[test]
fn dual_potential_decreases_on_barenblatt_run() {
    let traj = barenblatt_run(0.0, 256, 2.0);
    let r = check_dual_monotonicity(&traj, 1e-8).unwrap();
    assert!(r.pass, "{r:?}");
    assert!(r.measured["poisson_residual"] < 1e-10);
}

#[test]
fn dirac_trace_recovers_the_mass() {
    let phi = |r: f64| if r < 1.0 { (1.0 - r * r).powi(2) } else { 0.0 };
    let times = [2e-4, 3e-4, 4e-4, 6e-4, 8e-4, 1e-3];
    let mut limits = Vec::new();
    for cells in [256, 512] {
        let g = power_grid(3, 2.0, 0.0, 2.0, cells).unwrap();
        let u0 = dirac_field(&g, 1.0, cells / 128).unwrap();
        let traj = evolve(&u0, 1e-3, &BoundaryCondition::ZeroFlux, &StepControl { dt0: 1e-6, ..StepControl::default() }, &times).unwrap();
        let r = check_initial_trace(&traj, phi, 1.0, &times, 1.0, 0.02).unwrap();
        assert!(r.pass, "{r:?}");
        limits.push(r.measured["limit"]);
    }
    assert!((limits[0] - limits[1]).abs() < 0.02);
}

#[test]
fn flb_sweep_on_barenblatt_run() {
    let traj = barenblatt_run(1.0, 128, 1.0);
    let times = traj.times();
    let triples: Vec<(f64, f64, f64)> = times[1..]
        .iter()
        .flat_map(|&t0| [0.05, 0.3].map(|r| (t0, 1.0, r)))
        .collect();
    let r = check_flb(&traj, &triples).unwrap();
    assert!(r.pass && triples.len() >= 20, "{r:?}");
    assert!(r.measured["max_ratio"] < 1.0);
}

#[test]
fn delta_recovery_check_flags_a_non_decreasing_sequence() {
    let bump = |r: f64| if r < 1.0 { (1.0 - r * r).powi(3) } else { 0.0 };
    assert!(check_delta_recovery(3, bump, 1.0, &[16.0, 64.0, 256.0], 1e-2).unwrap().pass);
    assert!(!check_delta_recovery(3, bump, 1.0, &[256.0, 16.0], 1e-2).unwrap().pass);
}

#[test]
fn local_smoothing_rejects_cylinders_outside_domain() {
    let traj = barenblatt_run(0.0, 64, 1.0);
    let t = traj.times();
    let cyl = SmoothingCylinder { radius: 3.0, t1: t[1], t2: t[3], t_star: t[5] };
    assert!(matches!(check_local_smoothing(&traj, &[cyl], 0.1, None), Err(Error::OutsideGrid { .. })));
}

#[test]
fn energy_constant_bounded_for_shrinking_gap() {
    let traj = barenblatt_run(0.0, 256, 2.0);
    let t = traj.times();
    let mut constants = Vec::new();
    for r0 in [3.0, 2.0, 1.5, 1.2] {
        let cyl = EnergyCylinders { r1: 1.0, r0, t0: t[2], t1: t[5], t_star: t[10] };
        let r = check_energy(&traj, cyl, 2.0).unwrap();
        constants.push(r.fitted_constant.unwrap());
    }
    assert!(constants.iter().all(|c| c.is_finite() && *c < 10.0), "{constants:?}");
}

#[test]
fn ac_ratio_decreases_beyond_the_support() {
    let g = power_grid(3, 2.0, 0.0, 4.0, 256).unwrap();
    let u0 = dirac_field(&g, 1.0, 4).unwrap();
    let traj = evolve(&u0, 1.5, &BoundaryCondition::ZeroFlux, &StepControl::default(), &[0.5, 1.0, 1.5]).unwrap();
    let sweep: Vec<AcSample> = [1.0, 2.0, 4.0].map(|radius| AcSample { radius, t: 0.5, eps: 0.5, delta: 0.5 }).to_vec();
    let r = check_ac(&traj, InitialMeasure::Dirac(1.0), &sweep).unwrap();
    let ratios = r.ratios();
    assert!(ratios.windows(2).all(|w| w[1] < w[0]), "{ratios:?}");
    let double = check_ac(&traj, InitialMeasure::Dirac(2.0), &sweep).unwrap();
    assert_relative_eq!(double.ratios()[2], 2.0 * ratios[2], max_relative = 1e-12);
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn regression_recovers_any_line(slope in -5.0f64..5.0, intercept in -5.0f64..5.0, n in 3usize..30) {
            let x: Vec<f64> = (0..n).map(|i| i as f64 * 0.3).collect();
            let y: Vec<f64> = x.iter().map(|v| intercept + slope * v).collect();
            let r = regress(&x, &y).unwrap();
            prop_assert!((r.slope - slope).abs() < 1e-10);
            prop_assert!((r.intercept - intercept).abs() < 1e-9);
        }

        #[test]
        fn sobolev_ratios_are_finite_and_deterministic(seed in any::<u64>(), radius in 1.0f64..4.0) {
            let g = power_grid(3, 2.0, 0.5, radius, 64).unwrap();
            let family = sobolev_family(seed, 20, 0.05);
            prop_assert_eq!(&family, &sobolev_family(seed, 20, 0.05));
            for prof in &family {
                let f = g.sample(|r| prof.eval(r, radius));
                let q = sobolev_ratio(&g, &f);
                prop_assert!(q.is_finite() && q >= 0.0);
            }
        }

        #[test]
        fn scaling_a_pair_preserves_the_order_verdict(shift in 0.0f64..0.5, factor in 1.0f64..3.0) {
            let g = power_grid(3, 2.0, 0.0, 1.0, 16).unwrap();
            let u0 = Field::from_profile(g.clone(), 0.0, |r| 1.0 - r * r).unwrap();
            let v0 = u0.with_values(u0.values().iter().map(|u| u + shift).collect(), 0.0).unwrap();
            let run = |f: &Field| evolve(f, 0.2, &BoundaryCondition::ZeroFlux, &StepControl::default(), &[0.1]).unwrap();
            let (u, v) = (run(&u0.scaled(factor).unwrap()), run(&v0.scaled(factor).unwrap()));
            let r = check_contraction_and_comparison(&u, &v, 1e-10, 1e-8).unwrap();
            prop_assert!(r.pass);
        }
    }
}
