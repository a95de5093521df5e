mod common;

use std::f64::consts::FRAC_PI_2;

use common::{d1, d2, rel_dev, rel_dev_floor};
use proptest::prelude::*;
use umlm::gripper::*;
use umlm::numerics::{solve_newton, NewtonSettings};

fn closed_cross_section(theta: [f64; 4]) -> (CrossSectionGeometry, CrossSectionState) {
    let mut geom = CrossSectionGeometry::default();
    let probe = CrossSectionState { theta: [theta[0], theta[1], theta[2], theta[3], 0.0], ..Default::default() };
    let [x, y] = cross_section_constraints(&CrossSectionGeometry { l17: 0.0, ..geom }, &probe).position;
    geom.l17 = x.hypot(y);
    let mut state = probe;
    state.theta[4] = (-y).atan2(x);
    (geom, state)
}

fn all_pin_sets() -> Vec<PinSet> {
    let mut sets = Vec::new();
    for a in 0..5 {
        for b in a + 1..5 {
            for c in b + 1..5 {
                sets.push(PinSet::new([a, b, c]).unwrap());
            }
        }
    }
    sets
}

/// Magnitudes in `[0.1 * limit, limit]` with either sign.
fn nonzero(limit: f64) -> impl Strategy<Value = f64> {
    prop_oneof![-limit..-0.1 * limit, 0.1 * limit..limit]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, max_global_rejects: 1 << 16, ..ProptestConfig::default() })]

    #[test]
    fn coupling_closes_and_differentiates(l9 in 38.0f64..52.0, v in nonzero(5.0), a in nonzero(5.0)) {
        let geom = CouplingGeometry::default();
        let s = solve_coupling(&geom, l9, v, a, [2.0, 1.6]).unwrap();
        let r = coupling_residual(&geom, l9, s.theta5, s.theta6);
        prop_assert!(r[0].hypot(r[1]) <= 1e-8);

        // Positions along the path, solved to rounding level directly from
        // the loop residual.
        let tight = NewtonSettings { tolerance: 1e-13, ..Default::default() };
        let path = |t: f64| {
            let l9t = l9 + v * t + 0.5 * a * t * t;
            solve_newton(|x: &[f64]| coupling_residual(&geom, l9t, x[0], x[1]).to_vec(), &[s.theta5, s.theta6], &tight)
                .unwrap()
                .solution
        };
        let (w, b) = (d1(path, 1e-3), d2(path, 1e-3));
        prop_assert!(rel_dev(&[s.omega5, s.omega6], &w) < 1e-5);
        prop_assert!(rel_dev(&[s.beta5, s.beta6], &b) < 1e-5);

        let hpath = |t: f64| {
            let theta6 = path(t)[1];
            vec![gripper_input_height(&geom, &CouplingState { theta6, ..s }).h]
        };
        let hk = gripper_input_height(&geom, &s);
        prop_assert!(rel_dev(&[hk.h_rate], &d1(hpath, 1e-3)) < 1e-5);
        // h_accel is a difference of two terms that can nearly cancel.
        let terms = geom.l13 * (s.omega6 * s.omega6 + s.beta6.abs());
        prop_assert!(rel_dev_floor(&[hk.h_accel], &d2(hpath, 1e-3), terms) < 1e-5);
    }

    #[test]
    fn cross_section_closes_and_differentiates(
        t6 in 0.8f64..1.4, t7 in 0.1f64..0.5, t8 in -0.4f64..0.0, t9 in 0.0f64..0.3,
        pin_index in 0usize..10,
        w in proptest::array::uniform5(nonzero(1.0)),
        b in proptest::array::uniform5(nonzero(1.0)),
    ) {
        let (geom, mut state) = closed_cross_section([t6, t7, t8, t9]);
        let pins = all_pin_sets()[pin_index];
        for k in pins.pinned() {
            state.omega[k] = w[k];
            state.beta[k] = b[k];
        }
        let [fa, fb] = pins.free();
        let jac = cross_section_jacobian(&geom, &state.theta);
        let minor = jac[0][fa] * jac[1][fb] - jac[0][fb] * jac[1][fa];
        let (la, lb) = (jac[0][fa].hypot(jac[1][fa]), jac[0][fb].hypot(jac[1][fb]));
        prop_assume!(geom.l17 > 15.0 && minor.abs() > 0.2 * la * lb);
        let solved = solve_cross_section(&geom, &state, pins).unwrap();
        let r = cross_section_constraints(&geom, &solved);
        prop_assert!(r.position[0].hypot(r.position[1]) <= 1e-8);
        prop_assert!(r.velocity[0].hypot(r.velocity[1]) <= 1e-8);
        prop_assert!(r.accel[0].hypot(r.accel[1]) <= 1e-8);
        prop_assert!((solved.theta[fa] - state.theta[fa]).abs() < 1e-9);
        prop_assert!((solved.theta[fb] - state.theta[fb]).abs() < 1e-9);

        let path = |t: f64| {
            let mut moved = solved;
            for k in pins.pinned() {
                moved.theta[k] = solved.theta[k] + solved.omega[k] * t + 0.5 * solved.beta[k] * t * t;
            }
            let p = solve_cross_section(&geom, &moved, pins).unwrap();
            vec![p.theta[fa], p.theta[fb]]
        };
        // Keep the angular increment per step bounded at high-gain states.
        let speed = solved.omega.iter().fold(1.0f64, |m, w| m.max(w.abs()));
        let (fd_w, fd_b) = (d1(path, 1e-4 / speed), d2(path, 5e-4 / speed));
        prop_assert!(rel_dev(&[solved.omega[fa], solved.omega[fb]], &fd_w) < 1e-5, "{:?} {:?}", solved.omega, fd_w);
        prop_assert!(rel_dev(&[solved.beta[fa], solved.beta[fb]], &fd_b) < 1e-5, "{:?} {:?}", solved.beta, fd_b);
    }

    #[test]
    fn finger_closes_and_differentiates(
        theta11 in 1.3f64..1.8, knuckle in 0.5f64..1.0,
        w9 in nonzero(0.5), w15 in nonzero(1.0), w17 in nonzero(1.0),
    ) {
        let geom = FingerGeometry::default();
        let pose = FingerPose { theta9: 0.0, theta11, knuckle };
        let base = assemble_at_pose(&geom, &pose, 0.0);
        prop_assume!(base.is_ok());
        let base = base.unwrap();
        let drive = FingerDrive { theta9: base.theta9, theta15: base.theta15, theta17: base.theta17, omega9: w9, omega15: w15, omega17: w17 };
        let guess = FingerGuess { theta11: base.theta11, theta14: base.theta14, theta12: base.theta12, theta16: base.theta16 };
        let s = solve_finger(&geom, &drive, &guess).unwrap();
        for r in finger_loop_residuals(&geom, &s).into_iter().chain(finger_velocity_residuals(&geom, &s)) {
            prop_assert!(r[0].hypot(r[1]) <= 1e-8);
        }
        prop_assert!(((s.theta13 + s.theta17).cos() - geom.distal_cosine()).abs() < 1e-12);

        let path = |t: f64| {
            let moved = FingerDrive { theta9: drive.theta9 + w9 * t, theta15: drive.theta15 + w15 * t, theta17: drive.theta17 + w17 * t, ..Default::default() };
            let p = solve_finger(&geom, &moved, &guess).unwrap();
            vec![p.theta11, p.theta12, p.theta13, p.theta14, p.theta16]
        };
        let fd = d1(path, 1e-4);
        let analytic = [s.omega11, s.omega12, s.omega13, s.omega14, s.omega16];
        prop_assert!(rel_dev(&analytic, &fd) < 1e-5, "{:?} vs {:?}", analytic, fd);
    }
}

#[test]
fn coupling_reports_no_root_for_unreachable_slider() {
    let geom = CouplingGeometry::default();
    assert!(solve_coupling(&geom, 500.0, 0.0, 0.0, [2.0, 1.6]).is_err());
}

#[test]
fn every_pin_set_fixes_a_consistent_state() {
    let (geom, state) = closed_cross_section([1.1, 0.3, -0.2, 0.15]);
    for pins in all_pin_sets() {
        let solved = solve_cross_section(&geom, &state, pins).unwrap();
        for k in 0..5 {
            assert!((solved.theta[k] - state.theta[k]).abs() < 1e-9, "{pins:?}");
        }
    }
}

#[test]
fn assembly_gate_is_monotone_in_the_floor() {
    let geom = FingerGeometry::default();
    let state = assemble_at_pose(&geom, &FingerPose::default(), 0.0).unwrap();
    let mu = state.transmission_angle;
    assert!(mu > 10f64.to_radians() && mu <= FRAC_PI_2);
    assert!(assemble_at_pose(&geom, &FingerPose::default(), mu - 1e-9).is_ok());
    assert!(matches!(
        assemble_at_pose(&geom, &FingerPose::default(), mu + 1e-6),
        Err(umlm::Error::PoorTransmission { .. })
    ));
}

#[test]
fn design_box_corners_assemble() {
    // The optimizer's box should be mostly feasible at the default pose.
    let pose = FingerPose::default();
    let mut ok = 0;
    for l16 in [20.0, 25.0, 30.0] {
        for l21 in [10.0, 12.5, 15.0] {
            for l22 in [10.0, 12.5, 15.0] {
                let geom = FingerGeometry { l16, l21, l22, ..Default::default() };
                if assemble_at_pose(&geom, &pose, 10f64.to_radians()).is_ok() {
                    ok += 1;
                }
            }
        }
    }
    assert!(ok >= 14, "{ok} of 27 assemble");
}
