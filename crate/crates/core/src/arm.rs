//! Closed-loop kinematics of the manipulator arm.
//!
//! The arm loop `l2 + l3 + l7 = l1 + l0 + l8` has one actuated angle
//! (`theta1`, joint A) and two metamorphic phases. While the slider is
//! locked (lifting/descending) `theta4` is held and `(theta0, theta2)`
//! follow `theta1`; while it is free (grasping/releasing) `theta0` is held
//! and `(theta2, theta4)` follow. All angles are radians, lengths mm.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{solve2, solve_newton_with_jacobian, NewtonSettings, NumericsError};

/// Determinant magnitude below which the 2x2 rate systems are singular.
pub const MIN_RATE_DETERMINANT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmGeometry {
    pub l0: f64,
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
    pub l5: f64,
    pub l7: f64,
    pub l8: f64,
}

impl Default for ArmGeometry {
    /// Reference values for l0..l5; l7 and l8 have no reference value and default to
    /// 100 mm and 150 mm.
    fn default() -> Self {
        Self { l0: 397.0, l1: 181.0, l2: 130.0, l3: 180.0, l4: 160.0, l5: 58.0, l7: 100.0, l8: 150.0 }
    }
}

impl ArmGeometry {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("l0", self.l0),
            ("l1", self.l1),
            ("l2", self.l2),
            ("l3", self.l3),
            ("l4", self.l4),
            ("l5", self.l5),
            ("l7", self.l7),
            ("l8", self.l8),
        ];
        for (field, value) in fields {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidGeometry { field, reason: "must be a positive length" });
            }
        }
        if !(self.l5 < self.l7 + self.l4) {
            return Err(Error::InvalidGeometry { field: "l5", reason: "must be shorter than l7 + l4" });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Slider locked, `theta4` held.
    Lifting,
    /// Slider free, `theta0` held.
    Grasping,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Lifting => "lifting",
            Phase::Grasping => "grasping",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ArmState {
    pub theta0: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub theta4: f64,
    pub omega0: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub omega4: f64,
    pub beta0: f64,
    pub beta2: f64,
    pub beta4: f64,
    pub l6: f64,
    pub l6_rate: f64,
    pub l6_accel: f64,
}

/// Loop-closure residual `(x, y)` in mm; zero for an assembled arm.
pub fn loop_residual(geom: &ArmGeometry, theta0: f64, theta1: f64, theta2: f64, theta4: f64) -> [f64; 2] {
    let s = theta1 + theta2;
    let d = theta0 - theta4;
    [
        geom.l2 * theta1.cos() - geom.l3 * s.cos() - geom.l7 * d.sin() + geom.l1 - geom.l8 * theta0.sin(),
        geom.l2 * theta1.sin() - geom.l3 * s.sin() + geom.l7 * d.cos() - geom.l0 + geom.l8 * theta0.cos(),
    ]
}

impl ArmState {
    pub fn loop_residual(&self, geom: &ArmGeometry) -> [f64; 2] {
        loop_residual(geom, self.theta0, self.theta1, self.theta2, self.theta4)
    }
}

fn unpack(phase: Phase, theta1: f64, held: f64, free: &[f64]) -> (f64, f64, f64, f64) {
    match phase {
        Phase::Lifting => (free[0], theta1, free[1], held),
        Phase::Grasping => (held, theta1, free[0], free[1]),
    }
}

/// Solve the position loop for the free angle pair of `phase`.
///
/// `held_angle` is `theta4` while lifting and `theta0` while grasping; it is
/// copied into the result unchanged. `guess` is the free pair in the order
/// `(theta0, theta2)` or `(theta2, theta4)` and selects the assembly branch.
pub fn solve_arm_position(
    geom: &ArmGeometry,
    theta1: f64,
    phase: Phase,
    held_angle: f64,
    guess: [f64; 2],
) -> Result<ArmState> {
    solve_arm_position_with(geom, theta1, phase, held_angle, guess, &NewtonSettings::default())
}

pub fn solve_arm_position_with(
    geom: &ArmGeometry,
    theta1: f64,
    phase: Phase,
    held_angle: f64,
    guess: [f64; 2],
    settings: &NewtonSettings,
) -> Result<ArmState> {
    let residual = |free: &[f64]| {
        let (t0, t1, t2, t4) = unpack(phase, theta1, held_angle, free);
        loop_residual(geom, t0, t1, t2, t4).to_vec()
    };
    let jacobian = |free: &[f64]| {
        let (t0, t1, t2, t4) = unpack(phase, theta1, held_angle, free);
        let s = t1 + t2;
        let d = t0 - t4;
        let (l3, l7, l8) = (geom.l3, geom.l7, geom.l8);
        let entries = match phase {
            Phase::Lifting => [
                -l7 * d.cos() - l8 * t0.cos(),
                l3 * s.sin(),
                -l7 * d.sin() - l8 * t0.sin(),
                -l3 * s.cos(),
            ],
            Phase::Grasping => [l3 * s.sin(), l7 * d.cos(), -l3 * s.cos(), l7 * d.sin()],
        };
        DMatrix::from_row_slice(2, 2, &entries)
    };
    let report = solve_newton_with_jacobian(residual, jacobian, &guess, settings)?;
    if !report.converged {
        return Err(NumericsError::NoConvergence { residual_norm: report.residual_norm, iterations: report.iterations }.into());
    }
    let (theta0, theta1, theta2, theta4) = unpack(phase, theta1, held_angle, &report.solution);
    Ok(ArmState { theta0, theta1, theta2, theta4, ..Default::default() })
}

/// Joint rates for a driving rate `omega1`; rates of the held angle are zero.
pub fn arm_rates(geom: &ArmGeometry, state: &ArmState, omega1: f64, phase: Phase) -> Result<ArmState> {
    let (l2, l3, l7, l8) = (geom.l2, geom.l3, geom.l7, geom.l8);
    let (t0, t1) = (state.theta0, state.theta1);
    let s = t1 + state.theta2;
    let d = t0 - state.theta4;
    let rhs = [
        (-l2 * t1.sin() + l3 * s.sin()) * omega1,
        (l2 * t1.cos() - l3 * s.cos()) * omega1,
    ];
    let mut out = *state;
    out.omega1 = omega1;
    match phase {
        Phase::Lifting => {
            let m = [
                [l7 * d.cos() + l8 * t0.cos(), -l3 * s.sin()],
                [l7 * d.sin() + l8 * t0.sin(), l3 * s.cos()],
            ];
            let [w0, w2] = solve2(m, rhs, MIN_RATE_DETERMINANT).ok_or(Error::Singular { determinant: det(m) })?;
            out.omega0 = w0;
            out.omega2 = w2;
            out.omega4 = 0.0;
        }
        Phase::Grasping => {
            let m = grasping_matrix(geom, state);
            let [w2, w4] = solve2(m, rhs, MIN_RATE_DETERMINANT).ok_or(Error::Singular { determinant: det(m) })?;
            out.omega0 = 0.0;
            out.omega2 = w2;
            out.omega4 = w4;
        }
    }
    Ok(out)
}

fn grasping_matrix(geom: &ArmGeometry, state: &ArmState) -> [[f64; 2]; 2] {
    let s = state.theta1 + state.theta2;
    let d = state.theta0 - state.theta4;
    [
        [-geom.l3 * s.sin(), -geom.l7 * d.cos()],
        [geom.l3 * s.cos(), -geom.l7 * d.sin()],
    ]
}

fn det(m: [[f64; 2]; 2]) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// Joint accelerations at constant `omega1`. `state` must carry the rates
/// produced by [`arm_rates`] for the same `omega1` and phase.
pub fn arm_accels(geom: &ArmGeometry, state: &ArmState, omega1: f64, phase: Phase) -> Result<ArmState> {
    let (l2, l3, l7, l8) = (geom.l2, geom.l3, geom.l7, geom.l8);
    let (t0, t1) = (state.theta0, state.theta1);
    let s = t1 + state.theta2;
    let d = t0 - state.theta4;
    let w12 = omega1 + state.omega2;
    // Common part of the time derivative of the driving column and the l3 term.
    let base = [
        -l2 * t1.cos() * omega1 * omega1 + l3 * s.cos() * w12 * w12,
        -l2 * t1.sin() * omega1 * omega1 + l3 * s.sin() * w12 * w12,
    ];
    let mut out = *state;
    out.omega1 = omega1;
    match phase {
        Phase::Lifting => {
            let w0 = state.omega0;
            let m = [
                [l7 * d.cos() + l8 * t0.cos(), -l3 * s.sin()],
                [l7 * d.sin() + l8 * t0.sin(), l3 * s.cos()],
            ];
            let rhs = [
                base[0] + (l7 * d.sin() + l8 * t0.sin()) * w0 * w0,
                base[1] - (l7 * d.cos() + l8 * t0.cos()) * w0 * w0,
            ];
            let [b0, b2] = solve2(m, rhs, MIN_RATE_DETERMINANT).ok_or(Error::Singular { determinant: det(m) })?;
            out.beta0 = b0;
            out.beta2 = b2;
            out.beta4 = 0.0;
        }
        Phase::Grasping => {
            let w4 = state.omega4;
            let m = grasping_matrix(geom, state);
            let rhs = [base[0] + l7 * d.sin() * w4 * w4, base[1] - l7 * d.cos() * w4 * w4];
            let [b2, b4] = solve2(m, rhs, MIN_RATE_DETERMINANT).ok_or(Error::Singular { determinant: det(m) })?;
            out.beta0 = 0.0;
            out.beta2 = b2;
            out.beta4 = b4;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliderKinematics {
    pub l6: f64,
    pub l6_rate: f64,
    pub l6_accel: f64,
}

/// Slider displacement, velocity and acceleration as functions of `theta4`.
pub fn slider_map(geom: &ArmGeometry, theta4: f64, omega4: f64, beta4: f64) -> Result<SliderKinematics> {
    let (l4, l5, l7) = (geom.l4, geom.l5, geom.l7);
    let (sin4, cos4) = theta4.sin_cos();
    let argument = (l7 * sin4 - l5) / l4;
    if !(argument.abs() < 1.0) {
        return Err(Error::Domain { argument });
    }
    let l6 = l7 * cos4 + l4 * argument.acos().sin();

    let c = l5 - l7 * sin4;
    let b = 1.0 - c * c / (l4 * l4);
    let sqrt_b = b.sqrt();
    let a = cos4 * cos4;
    let w2 = omega4 * omega4;

    let l6_rate = -l7 * omega4 * sin4 + (l7 * omega4 * cos4) * c / l4 / sqrt_b;
    let l6_accel = -l7 * (beta4 * sin4 + w2 * cos4) + c / sqrt_b * l7 * (beta4 * cos4 - w2 * sin4) / l4
        - a / sqrt_b * l7 * l7 * w2 / l4 * (1.0 + c * c / (b * l4 * l4));
    Ok(SliderKinematics { l6, l6_rate, l6_accel })
}

/// One breakpoint of a driving profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample {
    pub time: f64,
    pub theta1: f64,
    pub phase: Phase,
}

/// Held angle and free-pair guess for the first profile sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySeed {
    pub held_angle: f64,
    pub guess: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmSample {
    pub time: f64,
    pub phase: Phase,
    pub state: ArmState,
}

/// Solve every profile sample, warm-starting each from the previous one.
///
/// On a phase change the newly held angle takes its value from the previous
/// sample. The sign of the driving rate follows the local slope of the
/// profile, with magnitude `omega1`.
pub fn simulate_trajectory(
    geom: &ArmGeometry,
    profile: &[ProfileSample],
    omega1: f64,
    seed: TrajectorySeed,
) -> Result<Vec<ArmSample>> {
    if profile.windows(2).any(|w| !(w[1].time >= w[0].time)) {
        return Err(Error::InvalidInput("profile times must be nondecreasing".into()));
    }
    let mut samples: Vec<ArmSample> = Vec::with_capacity(profile.len());
    let mut held = seed.held_angle;
    let mut guess = seed.guess;
    let mut phase = profile.first().map_or(Phase::Lifting, |p| p.phase);

    for (index, sample) in profile.iter().enumerate() {
        let wrap = |source: Error| Error::Trajectory { index, source: Box::new(source) };
        if sample.phase != phase {
            let prev = samples.last().map(|s| s.state).ok_or_else(|| wrap(Error::InvalidInput("phase change before first sample".into())))?;
            match sample.phase {
                Phase::Grasping => {
                    held = prev.theta0;
                    guess = [prev.theta2, prev.theta4];
                }
                Phase::Lifting => {
                    held = prev.theta4;
                    guess = [prev.theta0, prev.theta2];
                }
            }
            phase = sample.phase;
        }

        let slope = match (profile.get(index + 1), index.checked_sub(1).and_then(|i| profile.get(i))) {
            (Some(next), _) => next.theta1 - sample.theta1,
            (None, Some(prev)) => sample.theta1 - prev.theta1,
            (None, None) => 0.0,
        };
        let w1 = if slope > 0.0 {
            omega1
        } else if slope < 0.0 {
            -omega1
        } else {
            0.0
        };

        let position = solve_arm_position(geom, sample.theta1, phase, held, guess).map_err(wrap)?;
        let rates = arm_rates(geom, &position, w1, phase).map_err(wrap)?;
        let mut state = arm_accels(geom, &rates, w1, phase).map_err(wrap)?;
        let slider = slider_map(geom, state.theta4, state.omega4, state.beta4).map_err(wrap)?;
        state.l6 = slider.l6;
        state.l6_rate = slider.l6_rate;
        state.l6_accel = slider.l6_accel;

        guess = match phase {
            Phase::Lifting => [state.theta0, state.theta2],
            Phase::Grasping => [state.theta2, state.theta4],
        };
        samples.push(ArmSample { time: sample.time, phase, state });
    }
    Ok(samples)
}

/// Roots of the position loop for a given `theta1`, found by scanning the
/// free angle that does not belong to the `l3` link and solving for the
/// other in closed form, then polishing with Newton. Each entry is a free
/// pair in the order used by [`solve_arm_position`].
pub fn assembly_branches(geom: &ArmGeometry, theta1: f64, phase: Phase, held_angle: f64, scan_points: usize) -> Vec<[f64; 2]> {
    let n = scan_points.max(8);
    // For a trial value of the scanned angle the l3 link must span the gap.
    let gap = |scanned: f64| -> f64 {
        let (t0, t4) = match phase {
            Phase::Lifting => (scanned, held_angle),
            Phase::Grasping => (held_angle, scanned),
        };
        let d = t0 - t4;
        let x = geom.l2 * theta1.cos() + geom.l1 - geom.l7 * d.sin() - geom.l8 * t0.sin();
        let y = geom.l2 * theta1.sin() - geom.l0 + geom.l7 * d.cos() + geom.l8 * t0.cos();
        x.hypot(y) - geom.l3
    };
    let pair_for = |scanned: f64| -> [f64; 2] {
        let (t0, t4) = match phase {
            Phase::Lifting => (scanned, held_angle),
            Phase::Grasping => (held_angle, scanned),
        };
        let d = t0 - t4;
        let x = geom.l2 * theta1.cos() + geom.l1 - geom.l7 * d.sin() - geom.l8 * t0.sin();
        let y = geom.l2 * theta1.sin() - geom.l0 + geom.l7 * d.cos() + geom.l8 * t0.cos();
        let theta2 = y.atan2(x) - theta1;
        match phase {
            Phase::Lifting => [scanned, theta2],
            Phase::Grasping => [theta2, scanned],
        }
    };
    let step = 2.0 * std::f64::consts::PI / n as f64;
    let start = -std::f64::consts::PI;
    let mut branches = Vec::new();
    let mut prev = gap(start);
    for k in 1..=n {
        let angle = start + step * k as f64;
        let value = gap(angle);
        if prev.signum() != value.signum() {
            // Linear interpolation inside the bracket.
            let t = prev / (prev - value);
            let root = angle - step + t * step;
            if let Ok(state) = solve_arm_position(geom, theta1, phase, held_angle, pair_for(root)) {
                branches.push(match phase {
                    Phase::Lifting => [state.theta0, state.theta2],
                    Phase::Grasping => [state.theta2, state.theta4],
                });
            }
        }
        prev = value;
    }
    branches
}

/// Descend, grasp, then lift: `theta1` rises while the slider is locked,
/// then falls through the grasp and continues falling to lift the load.
pub fn loading_cycle_profile(samples_per_segment: usize) -> Vec<ProfileSample> {
    let n = samples_per_segment.max(2);
    let segments = [
        (0.0, 4.0, 0.9, 1.3, Phase::Lifting),
        (4.0, 6.0, 1.3, 1.15, Phase::Grasping),
        (6.0, 10.0, 1.15, 0.85, Phase::Lifting),
    ];
    let mut profile = Vec::with_capacity(3 * n);
    for (seg, (t0, t1, a0, a1, phase)) in segments.into_iter().enumerate() {
        // Skip the shared breakpoint of every segment after the first.
        let first = if seg == 0 { 0 } else { 1 };
        for k in first..n {
            let u = k as f64 / (n - 1) as f64;
            profile.push(ProfileSample { time: t0 + u * (t1 - t0), theta1: a0 + u * (a1 - a0), phase });
        }
    }
    profile
}

/// Seed matching [`loading_cycle_profile`]: slider locked at `theta4 = 0.35`
/// on the branch where `theta0` falls as `theta1` rises.
pub fn loading_cycle_seed(geom: &ArmGeometry) -> Option<TrajectorySeed> {
    let held = 0.35;
    let branches = assembly_branches(geom, 0.9, Phase::Lifting, held, 720);
    branches
        .into_iter()
        .min_by(|a, b| a[0].total_cmp(&b[0]))
        .map(|guess| TrajectorySeed { held_angle: held, guess })
}
