use std::f64::consts::FRAC_PI_4;

use proptest::prelude::*;
use umlm::kinetostatics::*;

fn segments() -> SegmentLengths {
    SegmentLengths::default()
}

prop_compose! {
    fn scenario()(
        alpha1 in 0.0f64..1.2,
        alpha2 in 0.1f64..1.4,
        alpha3 in 0.1f64..1.4,
        u in proptest::array::uniform3(0.0f64..1.0),
        tau1 in -2000.0f64..2000.0,
        k1 in 10.0f64..1000.0,
        k2 in 10.0f64..1000.0,
        s1 in 0.0f64..200.0,
        s2 in 0.0f64..200.0,
    ) -> (JointTorques, KnuckleAngles, ContactDistances) {
        let seg = segments();
        let d = |u: f64, len: f64| 2.0 + u * (len - 2.0);
        let angles = KnuckleAngles { alpha1, alpha2, alpha3 };
        let springs = SpringParams { k1, k2, tau_s1: s1, tau_s2: s2 };
        (
            JointTorques::from_springs(tau1, &springs, &angles),
            angles,
            ContactDistances { d1: d(u[0], seg.l18), d2: d(u[1], seg.l19), d3: d(u[2], seg.l20) },
        )
    }
}

/// Hand-differentiated partials `dP_i / d alpha_j`, as rows `[dx/da1, dx/da2, dx/da3, dy/da1, ...]`.
fn analytic_partials(seg: &SegmentLengths, a: &KnuckleAngles, c: &ContactDistances) -> [[[f64; 3]; 2]; 3] {
    let (s1, c1) = a.alpha1.sin_cos();
    let (s12, c12) = (a.alpha1 + a.alpha2).sin_cos();
    let (s123, c123) = (a.alpha1 + a.alpha2 + a.alpha3).sin_cos();
    let (l18, l19) = (seg.l18, seg.l19);
    [
        [[c.d1 * s1, 0.0, 0.0], [-c.d1 * c1, 0.0, 0.0]],
        [[l18 * s1 + c.d2 * s12, c.d2 * s12, 0.0], [-l18 * c1 - c.d2 * c12, -c.d2 * c12, 0.0]],
        [
            [l18 * s1 + l19 * s12 + c.d3 * s123, l19 * s12 + c.d3 * s123, c.d3 * s123],
            [-l18 * c1 - l19 * c12 - c.d3 * c123, -l19 * c12 - c.d3 * c123, -c.d3 * c123],
        ],
    ]
}

#[test]
fn contact_jacobian_matches_hand_partials_at_group_b_pose() {
    let seg = segments();
    let a = KnuckleAngles { alpha1: 0.4, alpha2: FRAC_PI_4, alpha3: FRAC_PI_4 };
    let c = ContactDistances { d1: 19.15, d2: 15.0, d3: 12.5 };
    let g = contact_jacobian(&seg, &a, &c);
    let n = contact_normals(&a);
    let p = analytic_partials(&seg, &a, &c);
    for i in 0..3 {
        for j in 0..3 {
            let expected = n[i][0] * p[i][0][j] + n[i][1] * p[i][1][j];
            assert!((g[(i, j)] - expected).abs() < 1e-8, "G[{i}][{j}] = {} vs {expected}", g[(i, j)]);
        }
    }
    // Golden values: the diagonal is d_i and the first row has no coupling.
    assert!((g[(0, 0)] - 19.15).abs() < 1e-8);
    assert!(g[(0, 1)].abs() < 1e-9 && g[(0, 2)].abs() < 1e-9);
}

#[test]
fn group_b_forces_agree_with_oracle() {
    let seg = segments();
    let a = KnuckleAngles { alpha1: 0.4, alpha2: FRAC_PI_4, alpha3: FRAC_PI_4 };
    let torques = JointTorques::from_springs(1000.0, &SpringParams::default(), &a);
    let c = ContactDistances { d1: 19.15, d2: 15.0, d3: 12.5 };
    let closed = contact_forces(&torques, &seg, &a, &c).unwrap();
    let oracle = virtual_work_oracle(&torques, &seg, &a, &c).unwrap();
    assert!(closed.relative_deviation(&oracle) <= 1e-8);
    // Regression pins for this configuration.
    assert!((closed.f1 - 89.396_906_475).abs() < 1e-6, "{closed:?}");
    assert!((closed.f2 - -116.996_493_099).abs() < 1e-6, "{closed:?}");
    assert!((closed.f3 - 65.597_974_524).abs() < 1e-6, "{closed:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn closed_form_agrees_with_virtual_work((torques, angles, contacts) in scenario()) {
        let seg = segments();
        let a = contact_forces(&torques, &seg, &angles, &contacts).unwrap();
        let b = virtual_work_oracle(&torques, &seg, &angles, &contacts).unwrap();
        prop_assert!(a.relative_deviation(&b) <= 1e-8, "{:?} vs {:?}", a, b);
    }

    #[test]
    fn distal_force_depends_only_on_distal_inputs(
        (torques, angles, contacts) in scenario(),
        other in scenario(),
    ) {
        let seg = segments();
        let base = contact_forces(&torques, &seg, &angles, &contacts).unwrap();
        let (t2, a2, c2) = other;
        let mixed_torques = JointTorques { tau3: torques.tau3, ..t2 };
        let mixed_contacts = ContactDistances { d3: contacts.d3, ..c2 };
        let moved = contact_forces(&mixed_torques, &SegmentLengths { l18: 50.0, l19: 40.0, l20: 30.0 }, &a2, &mixed_contacts).unwrap();
        prop_assert_eq!(base.f3.to_bits(), moved.f3.to_bits());
    }

    #[test]
    fn forces_are_linear_in_torque((torques, angles, contacts) in scenario(), c in -4.0f64..4.0, k in -3i32..4) {
        let seg = segments();
        let f = contact_forces(&torques, &seg, &angles, &contacts).unwrap();
        let scaled = contact_forces(&torques.scaled(c), &seg, &angles, &contacts).unwrap();
        for (x, y) in f.as_array().iter().zip(scaled.as_array()) {
            prop_assert!((c * x - y).abs() <= 1e-12 * (1.0 + (c * x).abs()));
        }
        // Powers of two scale without rounding.
        let p = 2f64.powi(k);
        let exact = contact_forces(&torques.scaled(p), &seg, &angles, &contacts).unwrap();
        prop_assert_eq!(f.as_array().map(|v| v * p), exact.as_array());
    }

    #[test]
    fn grasp_matrix_is_lower_triangular((_, angles, contacts) in scenario()) {
        let m = grasp_matrix(&segments(), &angles, &contacts);
        prop_assert!(m[(0, 1)].abs() <= 1e-9 && m[(0, 2)].abs() <= 1e-9 && m[(1, 2)].abs() <= 1e-9, "{}", m);
        let g = contact_jacobian(&segments(), &angles, &contacts);
        prop_assert!(g[(0, 1)].abs() <= 1e-9 && g[(0, 2)].abs() <= 1e-9);
    }

    #[test]
    fn consecutive_contacts_are_within_reach((_, angles, contacts) in scenario()) {
        let seg = segments();
        let p = contact_points(&seg, &angles, &contacts);
        let dist = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);
        prop_assert!(dist(p[0], p[1]) <= seg.l18 - contacts.d1 + contacts.d2 + 1e-9);
        prop_assert!(dist(p[1], p[2]) <= seg.l19 - contacts.d2 + contacts.d3 + 1e-9);
        prop_assert!(dist(p[2], p[1]) <= seg.l19 + contacts.d3 + contacts.d2);
        let n = contact_normals(&angles);
        for v in n {
            prop_assert!((v[0].hypot(v[1]) - 1.0).abs() < 1e-15);
        }
    }
}

#[test]
fn zero_torque_through_both_paths() {
    let seg = segments();
    let a = KnuckleAngles { alpha1: 0.3, alpha2: 0.5, alpha3: 0.7 };
    let c = ContactDistances { d1: 10.0, d2: 10.0, d3: 10.0 };
    let f = virtual_work_oracle(&JointTorques::default(), &seg, &a, &c).unwrap();
    assert_eq!(f.as_array().map(f64::abs), [0.0; 3]);
}

#[test]
fn printed_proximal_formula_fails_the_balance() {
    let seg = segments();
    let a = KnuckleAngles { alpha1: 0.4, alpha2: FRAC_PI_4, alpha3: FRAC_PI_4 };
    let torques = JointTorques::from_springs(1000.0, &SpringParams::default(), &a);
    let c = ContactDistances { d1: 19.15, d2: 15.0, d3: 12.5 };
    let printed = contact_forces_as_printed(&torques, &seg, &a, &c).unwrap();
    let oracle = virtual_work_oracle(&torques, &seg, &a, &c).unwrap();
    assert!(printed.relative_deviation(&oracle) > 1e-2);
    assert!((printed.f2 - oracle.f2).abs() < 1e-8 * oracle.f2.abs());
}

#[test]
fn force_surface_trend_report() {
    let seg = segments();
    let a = KnuckleAngles { alpha1: 0.4, alpha2: FRAC_PI_4, alpha3: FRAC_PI_4 };
    let torques = JointTorques::from_springs(1000.0, &SpringParams::default(), &a);
    let s = force_surface(&torques, &seg, &a, 19.15, (5.0, 25.0), (5.0, 25.0), 21, 21).unwrap();
    let t = s.trends();
    // f2 = -(tau2 - tau3 (1 + l19 cos a3 / d3)) / d2: with both spring torques
    // negative it rises with both d2 and d3.
    assert_eq!(t.df2_dd2.positive, 20 * 21);
    assert_eq!(t.df2_dd3.positive, 21 * 20);
    let total = |c: SignCount| c.positive + c.negative + c.zero;
    assert_eq!(total(t.df1_dd2), 20 * 21);
    assert_eq!(total(t.df1_dd3), 21 * 20);
}

#[test]
fn force_surface_propagates_domain_errors() {
    let seg = segments();
    let a = KnuckleAngles { alpha1: 0.4, alpha2: FRAC_PI_4, alpha3: FRAC_PI_4 };
    let torques = JointTorques { tau1: 1.0, tau2: 1.0, tau3: 1.0 };
    let r = force_surface(&torques, &seg, &a, 19.15, (0.0, 10.0), (5.0, 10.0), 3, 3);
    assert_eq!(r.unwrap_err(), umlm::Error::DivisionDomain { index: 2 });
}
