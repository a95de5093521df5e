//! Gripper-side kinematics: the slider coupling that turns slider travel
//! into the gripper input height, the cross-section loop that carries it to
//! the palm, and the two four-bar loops plus fixed three-bar of a finger.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{solve2, solve_newton_with_jacobian, NewtonSettings, NumericsError};
use crate::planar::{acute_between, closest_branch, two_link_closure, unit};

const MIN_DETERMINANT: f64 = 1e-12;

fn check_lengths(fields: &[(&'static str, f64)]) -> Result<()> {
    for &(field, value) in fields {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::InvalidGeometry { field, reason: "must be a positive length" });
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Slider coupling
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingGeometry {
    pub l10: f64,
    pub l11: f64,
    pub l12: f64,
    pub l13: f64,
    /// Fixed offset between link l13 and link l12, rad.
    pub alpha: f64,
}

impl Default for CouplingGeometry {
    fn default() -> Self {
        Self { l10: 40.0, l11: 50.0, l12: 60.0, l13: 45.0, alpha: 0.2 }
    }
}

impl CouplingGeometry {
    pub fn validate(&self) -> Result<()> {
        check_lengths(&[("l10", self.l10), ("l11", self.l11), ("l12", self.l12), ("l13", self.l13)])
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CouplingState {
    pub l9: f64,
    pub l9_rate: f64,
    pub l9_accel: f64,
    pub theta5: f64,
    pub theta6: f64,
    pub omega5: f64,
    pub omega6: f64,
    pub beta5: f64,
    pub beta6: f64,
}

/// Position residual of the coupling loop `l10 + l11 = l9 + l12`, mm.
pub fn coupling_residual(geom: &CouplingGeometry, l9: f64, theta5: f64, theta6: f64) -> [f64; 2] {
    [
        geom.l11 * (theta5 - FRAC_PI_2).cos() - l9 - geom.l12 * (PI - theta6).cos(),
        geom.l10 + geom.l11 * (theta5 - FRAC_PI_2).sin() - geom.l12 * (PI - theta6).sin(),
    ]
}

fn coupling_matrix(geom: &CouplingGeometry, theta5: f64, theta6: f64) -> [[f64; 2]; 2] {
    [
        [geom.l11 * theta5.cos(), -geom.l12 * theta6.sin()],
        [geom.l11 * theta5.sin(), -geom.l12 * theta6.cos()],
    ]
}

/// Solve `(theta5, theta6)` for slider input `l9`, then the rates and
/// accelerations driven by `l9_rate` and `l9_accel`.
pub fn solve_coupling(
    geom: &CouplingGeometry,
    l9: f64,
    l9_rate: f64,
    l9_accel: f64,
    guess: [f64; 2],
) -> Result<CouplingState> {
    let report = solve_newton_with_jacobian(
        |x: &[f64]| coupling_residual(geom, l9, x[0], x[1]).to_vec(),
        |x: &[f64]| {
            let m = coupling_matrix(geom, x[0], x[1]);
            DMatrix::from_row_slice(2, 2, &[m[0][0], m[0][1], m[1][0], m[1][1]])
        },
        &guess,
        &NewtonSettings::default(),
    )?;
    if !report.converged {
        return Err(NumericsError::NoConvergence { residual_norm: report.residual_norm, iterations: report.iterations }.into());
    }
    let (theta5, theta6) = (report.solution[0], report.solution[1]);
    let m = coupling_matrix(geom, theta5, theta6);
    let singular = || Error::Singular { determinant: m[0][0] * m[1][1] - m[0][1] * m[1][0] };
    let [omega5, omega6] = solve2(m, [l9_rate, 0.0], MIN_DETERMINANT).ok_or_else(singular)?;
    let (l11, l12) = (geom.l11, geom.l12);
    let quad = [
        -l11 * omega5 * theta5.sin() * omega5 - l12 * omega6 * theta6.cos() * omega6,
        l11 * omega5 * theta5.cos() * omega5 + l12 * omega6 * theta6.sin() * omega6,
    ];
    let [beta5, beta6] = solve2(m, [l9_accel - quad[0], -quad[1]], MIN_DETERMINANT).ok_or_else(singular)?;
    Ok(CouplingState { l9, l9_rate, l9_accel, theta5, theta6, omega5, omega6, beta5, beta6 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeightKinematics {
    pub h: f64,
    pub h_rate: f64,
    pub h_accel: f64,
}

/// Gripper input height `h = l13 sin(pi - theta6 - alpha)` and its derivatives.
pub fn gripper_input_height(geom: &CouplingGeometry, state: &CouplingState) -> HeightKinematics {
    let (l13, alpha) = (geom.l13, geom.alpha);
    let (t6, w6, b6) = (state.theta6, state.omega6, state.beta6);
    HeightKinematics {
        h: l13 * (PI - t6 - alpha).sin(),
        h_rate: -l13 * w6 * (PI - t6 - alpha).cos(),
        h_accel: -l13 * w6 * w6 * (t6 + alpha).sin() + l13 * b6 * (t6 + alpha).cos(),
    }
}

// ---------------------------------------------------------------------------
// Cross-section loop
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossSectionGeometry {
    pub l13: f64,
    pub l14: f64,
    pub l15: f64,
    pub l16: f64,
    pub l17: f64,
    pub alpha: f64,
}

impl Default for CrossSectionGeometry {
    fn default() -> Self {
        Self { l13: 45.0, l14: 30.0, l15: 25.0, l16: 28.02, l17: 60.0, alpha: 0.2 }
    }
}

impl CrossSectionGeometry {
    pub fn validate(&self) -> Result<()> {
        check_lengths(&[
            ("l13", self.l13),
            ("l14", self.l14),
            ("l15", self.l15),
            ("l16", self.l16),
            ("l17", self.l17),
        ])
    }

    /// Each angle enters the loop as `length * unit(phase - theta)`; returns
    /// `(length, phase)` for angle index `k` (0 is theta6, 4 is theta10).
    fn term(&self, k: usize) -> (f64, f64) {
        match k {
            0 => (self.l13, PI - self.alpha),
            1 => (self.l14, -FRAC_PI_2),
            2 => (self.l15, -FRAC_PI_2),
            3 => (self.l16 / 2.0, 0.0),
            4 => (self.l17, PI),
            _ => unreachable!("cross-section angle index out of range"),
        }
    }
}

/// Angles, rates and accelerations of theta6..theta10, in that order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CrossSectionState {
    pub theta: [f64; 5],
    pub omega: [f64; 5],
    pub beta: [f64; 5],
}

/// The three cross-section angles held fixed by the caller (indices into
/// theta6..theta10).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "[usize; 3]", into = "[usize; 3]")]
pub struct PinSet([usize; 3]);

impl PinSet {
    pub fn new(mut pins: [usize; 3]) -> Result<Self> {
        pins.sort_unstable();
        if pins[2] > 4 || pins[0] == pins[1] || pins[1] == pins[2] {
            return Err(Error::InvalidInput(format!("pin set {pins:?} must name 3 distinct angles among 0..=4")));
        }
        Ok(Self(pins))
    }

    pub fn pinned(&self) -> [usize; 3] {
        self.0
    }

    pub fn free(&self) -> [usize; 2] {
        let mut free = [0; 2];
        let mut n = 0;
        for k in 0..5 {
            if !self.0.contains(&k) {
                free[n] = k;
                n += 1;
            }
        }
        free
    }
}

impl TryFrom<[usize; 3]> for PinSet {
    type Error = Error;
    fn try_from(value: [usize; 3]) -> Result<Self> {
        PinSet::new(value)
    }
}

impl From<PinSet> for [usize; 3] {
    fn from(value: PinSet) -> Self {
        value.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossSectionResiduals {
    pub position: [f64; 2],
    pub velocity: [f64; 2],
    pub accel: [f64; 2],
}

/// Velocity coefficient matrix of the cross-section loop (2 x 5).
pub fn cross_section_jacobian(geom: &CrossSectionGeometry, theta: &[f64; 5]) -> [[f64; 5]; 2] {
    let [t6, t7, t8, t9, t10] = *theta;
    let g = PI - t6 - geom.alpha;
    let h16 = geom.l16 / 2.0;
    [
        [geom.l13 * g.sin(), -geom.l14 * t7.cos(), -geom.l15 * t8.cos(), -h16 * t9.sin(), geom.l17 * t10.sin()],
        [-geom.l13 * g.cos(), geom.l14 * t7.sin(), geom.l15 * t8.sin(), -h16 * t9.cos(), geom.l17 * t10.cos()],
    ]
}

/// Coefficients of the squared rates in the acceleration relation (2 x 5).
fn cross_section_quadratic(geom: &CrossSectionGeometry, theta: &[f64; 5]) -> [[f64; 5]; 2] {
    let [t6, t7, t8, t9, t10] = *theta;
    let g = PI - t6 - geom.alpha;
    let h16 = geom.l16 / 2.0;
    [
        [geom.l13 * g.cos(), -geom.l14 * t7.sin(), -geom.l15 * t8.sin(), h16 * t9.cos(), -geom.l17 * t10.cos()],
        [geom.l13 * g.sin(), -geom.l14 * t7.cos(), -geom.l15 * t8.cos(), -h16 * t9.sin(), geom.l17 * t10.sin()],
    ]
}

/// Raw residuals of the cross-section position, velocity and acceleration
/// relations; all zero exactly when the state is kinematically consistent.
pub fn cross_section_constraints(geom: &CrossSectionGeometry, state: &CrossSectionState) -> CrossSectionResiduals {
    let [t6, t7, t8, t9, t10] = state.theta;
    let g = PI - t6 - geom.alpha;
    let h16 = geom.l16 / 2.0;
    let position = [
        geom.l13 * g.cos() - geom.l14 * t7.sin() - geom.l15 * t8.sin() + h16 * t9.cos() - geom.l17 * t10.cos(),
        geom.l13 * g.sin() - geom.l14 * t7.cos() - geom.l15 * t8.cos() - h16 * t9.sin() + geom.l17 * t10.sin(),
    ];
    let jac = cross_section_jacobian(geom, &state.theta);
    let quad = cross_section_quadratic(geom, &state.theta);
    let mut velocity = [0.0; 2];
    let mut accel = [0.0; 2];
    for i in 0..2 {
        for k in 0..5 {
            velocity[i] += jac[i][k] * state.omega[k];
            accel[i] += jac[i][k] * state.beta[k] - quad[i][k] * state.omega[k] * state.omega[k];
        }
    }
    CrossSectionResiduals { position, velocity, accel }
}

/// Solve the two free cross-section angles given three pinned ones.
///
/// `state` carries the pinned angles, rates and accelerations at the pinned
/// indices and a guess for the free angles (which selects the branch). Free
/// rates and accelerations are solved from the velocity and acceleration
/// relations.
pub fn solve_cross_section(geom: &CrossSectionGeometry, state: &CrossSectionState, pins: PinSet) -> Result<CrossSectionState> {
    let [a, b] = pins.free();
    let mut target = [0.0; 2];
    for k in pins.pinned() {
        let (len, phase) = geom.term(k);
        let u = unit(phase - state.theta[k]);
        target[0] -= len * u[0];
        target[1] -= len * u[1];
    }
    let (la, pa) = geom.term(a);
    let (lb, pb) = geom.term(b);
    let branches = two_link_closure(la, lb, target).ok_or(Error::OverconstrainedPin)?;
    let guess_phi = [pa - state.theta[a], pb - state.theta[b]];
    let [phi_a, phi_b] = closest_branch(branches, guess_phi);

    let mut out = *state;
    out.theta[a] = nearest_equivalent(pa - phi_a, state.theta[a]);
    out.theta[b] = nearest_equivalent(pb - phi_b, state.theta[b]);

    let jac = cross_section_jacobian(geom, &out.theta);
    let quad = cross_section_quadratic(geom, &out.theta);
    let m = [[jac[0][a], jac[0][b]], [jac[1][a], jac[1][b]]];
    let mut rate_rhs = [0.0; 2];
    let mut accel_rhs = [0.0; 2];
    for i in 0..2 {
        for k in pins.pinned() {
            rate_rhs[i] -= jac[i][k] * out.omega[k];
        }
    }
    let singular = || Error::Singular { determinant: m[0][0] * m[1][1] - m[0][1] * m[1][0] };
    let [wa, wb] = solve2(m, rate_rhs, MIN_DETERMINANT).ok_or_else(singular)?;
    out.omega[a] = wa;
    out.omega[b] = wb;
    for i in 0..2 {
        for (q, w) in quad[i].iter().zip(&out.omega) {
            accel_rhs[i] += q * w * w;
        }
        for k in pins.pinned() {
            accel_rhs[i] -= jac[i][k] * out.beta[k];
        }
    }
    let [ba, bb] = solve2(m, accel_rhs, MIN_DETERMINANT).ok_or_else(singular)?;
    out.beta[a] = ba;
    out.beta[b] = bb;
    Ok(out)
}

/// `angle + 2 pi k` closest to `reference`.
fn nearest_equivalent(angle: f64, reference: f64) -> f64 {
    reference + crate::planar::wrap_angle(angle - reference)
}

// ---------------------------------------------------------------------------
// Finger linkage
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FingerGeometry {
    pub l16: f64,
    pub l18: f64,
    pub l19: f64,
    pub l20: f64,
    pub l21: f64,
    pub l22: f64,
    pub l23: f64,
    pub l24: f64,
    pub l25: f64,
}

impl Default for FingerGeometry {
    /// Reference best design for l16, l21, l22 and the fixed l18, l19, l24;
    /// l20, l23 and l25 have no reference value and default to 25, 45 and 30 mm.
    fn default() -> Self {
        Self { l16: 28.02, l18: 38.3, l19: 30.0, l20: 25.0, l21: 15.0, l22: 13.58, l23: 45.0, l24: 20.5, l25: 30.0 }
    }
}

impl FingerGeometry {
    pub fn validate(&self) -> Result<()> {
        check_lengths(&[
            ("l16", self.l16),
            ("l18", self.l18),
            ("l19", self.l19),
            ("l20", self.l20),
            ("l21", self.l21),
            ("l22", self.l22),
            ("l23", self.l23),
            ("l24", self.l24),
            ("l25", self.l25),
        ])?;
        if !((self.l20 - self.l22).abs() < self.l25 && self.l25 < self.l20 + self.l22) {
            return Err(Error::InvalidGeometry { field: "l25", reason: "violates the distal three-bar triangle inequality" });
        }
        Ok(())
    }

    /// `cos(theta13 + theta17)` fixed by the distal three-bar.
    pub fn distal_cosine(&self) -> f64 {
        (self.l20 * self.l20 + self.l22 * self.l22 - self.l25 * self.l25) / (2.0 * self.l20 * self.l22)
    }
}

/// Inputs of the finger loops: palm angle, driving coupler angle and the
/// distal coupler angle, with their rates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FingerDrive {
    pub theta9: f64,
    pub theta15: f64,
    pub theta17: f64,
    pub omega9: f64,
    pub omega15: f64,
    pub omega17: f64,
}

/// Branch-selecting guess for the solved finger angles.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FingerGuess {
    pub theta11: f64,
    pub theta14: f64,
    pub theta12: f64,
    pub theta16: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FingerState {
    pub theta9: f64,
    pub theta11: f64,
    pub theta12: f64,
    pub theta13: f64,
    pub theta14: f64,
    pub theta15: f64,
    pub theta16: f64,
    pub theta17: f64,
    pub omega9: f64,
    pub omega11: f64,
    pub omega12: f64,
    pub omega13: f64,
    pub omega14: f64,
    pub omega15: f64,
    pub omega16: f64,
    pub omega17: f64,
    /// Loop-1 transmission angle, rad in `[0, pi/2]`.
    pub transmission_angle: f64,
}

/// Position residuals of the two finger four-bar loops, mm.
pub fn finger_loop_residuals(geom: &FingerGeometry, s: &FingerState) -> [[f64; 2]; 2] {
    [
        [
            geom.l16 * s.theta9.cos() + geom.l23 * s.theta14.cos() - geom.l21 * s.theta15.cos() - geom.l18 * s.theta11.cos(),
            geom.l16 * s.theta9.sin() + geom.l23 * s.theta14.sin() - geom.l21 * s.theta15.sin() - geom.l18 * s.theta11.sin(),
        ],
        [
            geom.l21 * s.theta15.cos() + geom.l24 * s.theta16.cos() - geom.l22 * s.theta17.cos() - geom.l19 * s.theta12.cos(),
            geom.l21 * s.theta15.sin() + geom.l24 * s.theta16.sin() - geom.l22 * s.theta17.sin() - geom.l19 * s.theta12.sin(),
        ],
    ]
}

/// Velocity residuals of the two finger loops, mm/s.
pub fn finger_velocity_residuals(geom: &FingerGeometry, s: &FingerState) -> [[f64; 2]; 2] {
    [
        [
            -geom.l16 * s.theta9.sin() * s.omega9 - geom.l23 * s.theta14.sin() * s.omega14
                + geom.l21 * s.theta15.sin() * s.omega15
                + geom.l18 * s.theta11.sin() * s.omega11,
            geom.l16 * s.theta9.cos() * s.omega9 + geom.l23 * s.theta14.cos() * s.omega14
                - geom.l21 * s.theta15.cos() * s.omega15
                - geom.l18 * s.theta11.cos() * s.omega11,
        ],
        [
            -geom.l21 * s.theta15.sin() * s.omega15 - geom.l24 * s.theta16.sin() * s.omega16
                + geom.l22 * s.theta17.sin() * s.omega17
                + geom.l19 * s.theta12.sin() * s.omega12,
            geom.l21 * s.theta15.cos() * s.omega15 + geom.l24 * s.theta16.cos() * s.omega16
                - geom.l22 * s.theta17.cos() * s.omega17
                - geom.l19 * s.theta12.cos() * s.omega12,
        ],
    ]
}

/// Solve both finger loops and the distal three-bar for a given drive.
pub fn solve_finger(geom: &FingerGeometry, drive: &FingerDrive, guess: &FingerGuess) -> Result<FingerState> {
    let (l16, l18, l19, l21, l22, l23, l24) = (geom.l16, geom.l18, geom.l19, geom.l21, geom.l22, geom.l23, geom.l24);
    let (u9, u15, u17) = (unit(drive.theta9), unit(drive.theta15), unit(drive.theta17));

    // Loop 1: l23 e(theta14) - l18 e(theta11) = l21 e(theta15) - l16 e(theta9).
    let target1 = [l21 * u15[0] - l16 * u9[0], l21 * u15[1] - l16 * u9[1]];
    let branches1 = two_link_closure(l23, -l18, target1).ok_or(Error::Assembly { loop_name: "first finger joint" })?;
    let [theta14, theta11] = closest_branch(branches1, [guess.theta14, guess.theta11]);

    // Loop 2: l24 e(theta16) - l19 e(theta12) = l22 e(theta17) - l21 e(theta15).
    let target2 = [l22 * u17[0] - l21 * u15[0], l22 * u17[1] - l21 * u15[1]];
    let branches2 = two_link_closure(l24, -l19, target2).ok_or(Error::Assembly { loop_name: "second finger joint" })?;
    let [theta16, theta12] = closest_branch(branches2, [guess.theta16, guess.theta12]);

    let cosine = geom.distal_cosine();
    if !(-1.0..=1.0).contains(&cosine) {
        return Err(Error::Assembly { loop_name: "distal three-bar" });
    }
    let theta13 = cosine.acos() - drive.theta17;

    let (s9, c9) = drive.theta9.sin_cos();
    let (s11, c11) = theta11.sin_cos();
    let (s12, c12) = theta12.sin_cos();
    let (s14, c14) = theta14.sin_cos();
    let (s15, c15) = drive.theta15.sin_cos();
    let (s16, c16) = theta16.sin_cos();
    let (s17, c17) = drive.theta17.sin_cos();
    let (w9, w15, w17) = (drive.omega9, drive.omega15, drive.omega17);

    let m1 = [[l18 * s11, -l23 * s14], [-l18 * c11, l23 * c14]];
    let rhs1 = [l16 * s9 * w9 - l21 * s15 * w15, -l16 * c9 * w9 + l21 * c15 * w15];
    let [omega11, omega14] = solve2(m1, rhs1, MIN_DETERMINANT)
        .ok_or(Error::Singular { determinant: m1[0][0] * m1[1][1] - m1[0][1] * m1[1][0] })?;

    let m2 = [[l19 * s12, -l24 * s16], [-l19 * c12, l24 * c16]];
    let rhs2 = [l21 * s15 * w15 - l22 * s17 * w17, -l21 * c15 * w15 + l22 * c17 * w17];
    let [omega12, omega16] = solve2(m2, rhs2, MIN_DETERMINANT)
        .ok_or(Error::Singular { determinant: m2[0][0] * m2[1][1] - m2[0][1] * m2[1][0] })?;

    let mut state = FingerState {
        theta9: drive.theta9,
        theta11,
        theta12,
        theta13,
        theta14,
        theta15: drive.theta15,
        theta16,
        theta17: drive.theta17,
        omega9: w9,
        omega11,
        omega12,
        omega13: -w17,
        omega14,
        omega15: w15,
        omega16,
        omega17: w17,
        transmission_angle: 0.0,
    };
    state.transmission_angle = transmission_angle(geom, &state);
    Ok(state)
}

/// Transmission angle of the palm-side four-bar: the acute angle between
/// coupler l21 and follower l18.
pub fn transmission_angle(_geom: &FingerGeometry, state: &FingerState) -> f64 {
    acute_between(state.theta15, state.theta11)
}

/// Transmission angles of both loops: `[l21 vs l18, l24 vs l19]`.
pub fn transmission_angles(state: &FingerState) -> [f64; 2] {
    [acute_between(state.theta15, state.theta11), acute_between(state.theta16, state.theta12)]
}

/// Finger pose given by phalanx directions rather than by the drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FingerPose {
    /// Palm link direction, rad.
    pub theta9: f64,
    /// Proximal phalanx (l18) direction, rad.
    pub theta11: f64,
    /// Flexion of the middle phalanx relative to the proximal one, rad;
    /// positive flexion turns it clockwise.
    pub knuckle: f64,
}

impl Default for FingerPose {
    fn default() -> Self {
        Self { theta9: 0.0, theta11: FRAC_PI_2, knuckle: std::f64::consts::FRAC_PI_4 }
    }
}

/// Assemble the finger at a phalanx pose and check its transmission.
///
/// Each loop is closed for its coupler angles on the branch with the larger
/// transmission angle; the drive found this way is then fed back through
/// [`solve_finger`]. Fails with `Assembly` when a loop cannot close and
/// with `PoorTransmission` when the palm-side transmission angle is below
/// `min_transmission`.
pub fn assemble_at_pose(geom: &FingerGeometry, pose: &FingerPose, min_transmission: f64) -> Result<FingerState> {
    let theta12 = pose.theta11 - pose.knuckle;
    let (u9, u11, u12) = (unit(pose.theta9), unit(pose.theta11), unit(theta12));

    // Loop 1 with theta11 known: l23 e(theta14) - l21 e(theta15) = l18 e(theta11) - l16 e(theta9).
    let target1 = [geom.l18 * u11[0] - geom.l16 * u9[0], geom.l18 * u11[1] - geom.l16 * u9[1]];
    let branches1 = two_link_closure(geom.l23, -geom.l21, target1).ok_or(Error::Assembly { loop_name: "first finger joint" })?;
    let [theta14, theta15] = *branches1
        .iter()
        .max_by(|a, b| acute_between(a[1], pose.theta11).total_cmp(&acute_between(b[1], pose.theta11)))
        .expect("two branches");

    // Loop 2 with theta12 known: l24 e(theta16) - l22 e(theta17) = l19 e(theta12) - l21 e(theta15).
    let u15 = unit(theta15);
    let target2 = [geom.l19 * u12[0] - geom.l21 * u15[0], geom.l19 * u12[1] - geom.l21 * u15[1]];
    let branches2 = two_link_closure(geom.l24, -geom.l22, target2).ok_or(Error::Assembly { loop_name: "second finger joint" })?;
    let [theta16, theta17] = *branches2
        .iter()
        .max_by(|a, b| acute_between(a[0], theta12).total_cmp(&acute_between(b[0], theta12)))
        .expect("two branches");

    let drive = FingerDrive { theta9: pose.theta9, theta15, theta17, ..Default::default() };
    let guess = FingerGuess { theta11: pose.theta11, theta14, theta12, theta16 };
    let state = solve_finger(geom, &drive, &guess)?;
    if state.transmission_angle < min_transmission {
        return Err(Error::PoorTransmission { angle: state.transmission_angle });
    }
    Ok(state)
}
