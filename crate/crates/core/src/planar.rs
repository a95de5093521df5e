//! Closed-form two-link closure used by the four-bar style loops.

use std::f64::consts::{PI, TAU};

/// Unit vector at `angle`.
#[inline]
pub fn unit(angle: f64) -> [f64; 2] {
    let (s, c) = angle.sin_cos();
    [c, s]
}

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(TAU);
    if a > PI {
        a -= TAU;
    }
    a
}

/// Absolute angular distance, accounting for wrap-around.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

/// Acute angle between two undirected line directions, in `[0, pi/2]`.
pub fn acute_between(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

/// Both solutions `(phi_a, phi_b)` of `a * unit(phi_a) + b * unit(phi_b) = target`.
///
/// `a` and `b` are signed lengths: a negative length points the link
/// backwards along its angle. Returns `None` when the triangle inequality
/// fails (no real assembly). The first solution places the `a` link
/// counter-clockwise of the target direction.
pub fn two_link_closure(a: f64, b: f64, target: [f64; 2]) -> Option<[[f64; 2]; 2]> {
    let (la, lb) = (a.abs(), b.abs());
    let r = target[0].hypot(target[1]);
    if !(la > 0.0 && lb > 0.0 && r > 0.0) {
        return None;
    }
    let mut cos_g = (la * la + r * r - lb * lb) / (2.0 * la * r);
    // Tolerate rounding at the fully stretched or folded limits.
    if cos_g.abs() > 1.0 {
        if cos_g.abs() > 1.0 + 1e-12 {
            return None;
        }
        cos_g = cos_g.signum();
    }
    let gamma = cos_g.acos();
    let heading = target[1].atan2(target[0]);
    let offset_a = if a < 0.0 { PI } else { 0.0 };
    let offset_b = if b < 0.0 { PI } else { 0.0 };
    let solve = |psi_a: f64| {
        let tip = unit(psi_a);
        let rest = [target[0] - la * tip[0], target[1] - la * tip[1]];
        let psi_b = rest[1].atan2(rest[0]);
        [wrap_angle(psi_a - offset_a), wrap_angle(psi_b - offset_b)]
    };
    Some([solve(heading + gamma), solve(heading - gamma)])
}

/// The closure branch closest to `guess` (sum of angular distances).
pub fn closest_branch(branches: [[f64; 2]; 2], guess: [f64; 2]) -> [f64; 2] {
    let cost = |b: &[f64; 2]| angle_distance(b[0], guess[0]) + angle_distance(b[1], guess[1]);
    if cost(&branches[1]) < cost(&branches[0]) {
        branches[1]
    } else {
        branches[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn acute_limits() {
        assert_eq!(acute_between(0.3, 0.3), 0.0);
        assert_abs_diff_eq!(acute_between(0.0, PI / 2.0), PI / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(acute_between(0.2, 0.2 + PI), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(acute_between(0.0, 2.0), PI - 2.0, epsilon = 1e-15);
    }

    #[test]
    fn unreachable_target() {
        assert!(two_link_closure(1.0, 1.0, [3.0, 0.0]).is_none());
        assert!(two_link_closure(5.0, 1.0, [1.0, 0.0]).is_none());
    }

    proptest! {
        #[test]
        fn closure_solutions_close_the_loop(
            a in prop_oneof![-50.0f64..-1.0, 1.0f64..50.0],
            b in prop_oneof![-50.0f64..-1.0, 1.0f64..50.0],
            pa in -PI..PI,
            pb in -PI..PI,
        ) {
            let ua = unit(pa);
            let ub = unit(pb);
            let target = [a * ua[0] + b * ub[0], a * ua[1] + b * ub[1]];
            prop_assume!(target[0].hypot(target[1]) > 1e-3);
            let branches = two_link_closure(a, b, target).unwrap();
            for [qa, qb] in branches {
                let (va, vb) = (unit(qa), unit(qb));
                prop_assert!((a * va[0] + b * vb[0] - target[0]).abs() < 1e-9);
                prop_assert!((a * va[1] + b * vb[1] - target[1]).abs() < 1e-9);
            }
            let best = closest_branch(branches, [pa, pb]);
            prop_assert!(angle_distance(best[0], pa) < 1e-5 || angle_distance(best[1], pb) < 1e-5
                || (branches[0][0] - branches[1][0]).abs() < 1e-6);
        }
    }
}
