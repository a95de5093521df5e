//! Quasi-static finger-object contact forces.
//!
//! A finger with three phalanges touches the object at one point per
//! phalanx. With gravity and friction neglected, equilibrium under the
//! actuator torque `tau1` and the two spring torques fixes the three
//! normal reactions. [`contact_forces`] is the closed form;
//! [`virtual_work_oracle`] rebuilds the same answer from finite
//! differences of the contact-point map and a linear solve.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{condition_estimate, fd_jacobian, SINGULAR_CONDITION};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnuckleAngles {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
}

impl KnuckleAngles {
    fn as_array(&self) -> [f64; 3] {
        [self.alpha1, self.alpha2, self.alpha3]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactDistances {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl ContactDistances {
    /// Contacts at the middle of each phalanx.
    pub fn midpoints(segments: &SegmentLengths) -> Self {
        Self { d1: segments.l18 / 2.0, d2: segments.l19 / 2.0, d3: segments.l20 / 2.0 }
    }

    pub fn validate(&self, segments: &SegmentLengths) -> Result<()> {
        let pairs = [(self.d1, segments.l18), (self.d2, segments.l19), (self.d3, segments.l20)];
        for (i, (d, len)) in pairs.into_iter().enumerate() {
            if d == 0.0 {
                return Err(Error::DivisionDomain { index: i + 1 });
            }
            if !(d > 0.0 && d <= len) {
                return Err(Error::InvalidInput(format!("d{} = {d} must lie in (0, {len}]", i + 1)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpringParams {
    /// Stiffness of spring s1, Nmm/rad.
    pub k1: f64,
    /// Stiffness of spring s2, Nmm/rad.
    pub k2: f64,
    /// Preload of s1, Nmm.
    pub tau_s1: f64,
    /// Preload of s2, Nmm.
    pub tau_s2: f64,
}

impl Default for SpringParams {
    fn default() -> Self {
        Self { k1: 346.5, k2: 794.1, tau_s1: 184.43, tau_s2: 196.29 }
    }
}

impl SpringParams {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [("k1", self.k1), ("k2", self.k2), ("tau_s1", self.tau_s1), ("tau_s2", self.tau_s2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidGeometry { field, reason: "must be non-negative" });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct JointTorques {
    pub tau1: f64,
    pub tau2: f64,
    pub tau3: f64,
}

impl JointTorques {
    /// Actuator torque plus the spring torques at the given knuckle angles.
    pub fn from_springs(tau1: f64, springs: &SpringParams, angles: &KnuckleAngles) -> Self {
        let (tau2, tau3) = spring_torques(springs, angles.alpha2, angles.alpha3);
        Self { tau1, tau2, tau3 }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { tau1: c * self.tau1, tau2: c * self.tau2, tau3: c * self.tau3 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ContactForces {
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
}

impl ContactForces {
    pub fn as_array(&self) -> [f64; 3] {
        [self.f1, self.f2, self.f3]
    }

    /// Largest componentwise difference, relative to the larger of the two
    /// force vectors' max-norms.
    pub fn relative_deviation(&self, other: &ContactForces) -> f64 {
        let a = self.as_array();
        let b = other.as_array();
        let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let scale = a.iter().chain(&b).map(|x| x.abs()).fold(0.0, f64::max);
        if diff == 0.0 {
            0.0
        } else {
            diff / scale
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentLengths {
    /// Proximal phalanx, mm.
    pub l18: f64,
    /// Middle phalanx, mm.
    pub l19: f64,
    /// Distal phalanx, mm.
    pub l20: f64,
}

impl Default for SegmentLengths {
    fn default() -> Self {
        Self { l18: 38.3, l19: 30.0, l20: 25.0 }
    }
}

impl SegmentLengths {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [("l18", self.l18), ("l19", self.l19), ("l20", self.l20)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidGeometry { field, reason: "must be a positive length" });
            }
        }
        Ok(())
    }
}

/// Spring torques `(tau2, tau3) = (-(k1 alpha2 + tau_s1), -(k2 alpha3 + tau_s2))`
/// with the knuckle angles in radians.
pub fn spring_torques(springs: &SpringParams, alpha2: f64, alpha3: f64) -> (f64, f64) {
    (-(springs.k1 * alpha2 + springs.tau_s1), -(springs.k2 * alpha3 + springs.tau_s2))
}

/// Positions of the three contact points in the finger base frame, mm.
pub fn contact_points(segments: &SegmentLengths, angles: &KnuckleAngles, contacts: &ContactDistances) -> [[f64; 2]; 3] {
    contact_points_at(segments, angles.as_array(), contacts)
}

fn contact_points_at(segments: &SegmentLengths, alpha: [f64; 3], contacts: &ContactDistances) -> [[f64; 2]; 3] {
    let a1 = alpha[0];
    let a12 = alpha[0] + alpha[1];
    let a123 = a12 + alpha[2];
    let (l18, l19) = (segments.l18, segments.l19);
    let (d1, d2, d3) = (contacts.d1, contacts.d2, contacts.d3);
    [
        [-d1 * a1.cos(), -d1 * a1.sin()],
        [-l18 * a1.cos() - d2 * a12.cos(), -l18 * a1.sin() - d2 * a12.sin()],
        [
            -l18 * a1.cos() - l19 * a12.cos() - d3 * a123.cos(),
            -l18 * a1.sin() - l19 * a12.sin() - d3 * a123.sin(),
        ],
    ]
}

/// Unit directions of the three reaction forces.
pub fn contact_normals(angles: &KnuckleAngles) -> [[f64; 2]; 3] {
    let a1 = angles.alpha1;
    let a12 = a1 + angles.alpha2;
    let a123 = a12 + angles.alpha3;
    [[a1.sin(), -a1.cos()], [a12.sin(), -a12.cos()], [a123.sin(), -a123.cos()]]
}

fn check_distances(contacts: &ContactDistances) -> Result<()> {
    for (i, d) in [contacts.d1, contacts.d2, contacts.d3].into_iter().enumerate() {
        if d == 0.0 {
            return Err(Error::DivisionDomain { index: i + 1 });
        }
    }
    Ok(())
}

/// Closed-form contact forces.
///
/// `f3` and `f2` follow from the distal and middle equilibria; `f1` from
/// the proximal one, which includes the middle-phalanx contact lever `d2`.
pub fn contact_forces(
    torques: &JointTorques,
    segments: &SegmentLengths,
    angles: &KnuckleAngles,
    contacts: &ContactDistances,
) -> Result<ContactForces> {
    check_distances(contacts)?;
    let JointTorques { tau1, tau2, tau3 } = *torques;
    let (l18, l19) = (segments.l18, segments.l19);
    let (d1, d2, d3) = (contacts.d1, contacts.d2, contacts.d3);
    let (c2, c3, c23) = (angles.alpha2.cos(), angles.alpha3.cos(), (angles.alpha2 + angles.alpha3).cos());

    let f3 = -tau3 / d3;
    let middle = tau2 - tau3 - tau3 * l19 * c3 / d3;
    let f2 = -middle / d2;
    let f1 = -(tau1 - tau2 - l18 * c2 * middle / d2 - tau3 * l18 * c23 / d3) / d1;
    Ok(ContactForces { f1, f2, f3 })
}

/// The proximal-force expression exactly as it is usually printed, kept for
/// comparison. It omits the `d2` lever of the middle contact, so it does
/// not satisfy the virtual-work balance; `f2` and `f3` match
/// [`contact_forces`].
pub fn contact_forces_as_printed(
    torques: &JointTorques,
    segments: &SegmentLengths,
    angles: &KnuckleAngles,
    contacts: &ContactDistances,
) -> Result<ContactForces> {
    check_distances(contacts)?;
    let JointTorques { tau1, tau2, tau3 } = *torques;
    let (l18, l19) = (segments.l18, segments.l19);
    let (d1, d2, d3) = (contacts.d1, contacts.d2, contacts.d3);
    let (c2, c3, c23) = (angles.alpha2.cos(), angles.alpha3.cos(), (angles.alpha2 + angles.alpha3).cos());
    let f1 = -(1.0 / d1)
        * (tau1 - l18 * c2 * (tau2 / d2 - tau3 * l19 * c3 / (d3 * d2) - tau3 / d2)
            - tau3 * l18 * c23 / d3
            - tau3 * l19 * c3 / d3
            - tau3);
    let f2 = -(1.0 / d2) * (tau2 - tau3 - tau3 * l19 * c3 / d3);
    let f3 = -tau3 / d3;
    Ok(ContactForces { f1, f2, f3 })
}

/// Step used for the finite differences inside the oracle.
pub const ORACLE_FD_STEP: f64 = 1e-5;

/// `G[i][j] = n_i . dP_i/d alpha_j`, assembled by central differences of
/// the contact-point map.
pub fn contact_jacobian(segments: &SegmentLengths, angles: &KnuckleAngles, contacts: &ContactDistances) -> Matrix3<f64> {
    let map = |alpha: &[f64]| -> Vec<f64> {
        let p = contact_points_at(segments, [alpha[0], alpha[1], alpha[2]], contacts);
        vec![p[0][0], p[0][1], p[1][0], p[1][1], p[2][0], p[2][1]]
    };
    let dp = fd_jacobian(map, &angles.as_array(), ORACLE_FD_STEP);
    let normals = contact_normals(angles);
    Matrix3::from_fn(|i, j| normals[i][0] * dp[(2 * i, j)] + normals[i][1] * dp[(2 * i + 1, j)])
}

/// Contact Jacobian in the cumulative rate basis
/// `(a1', a1' + a2', a1' + a2' + a3')`, sign-flipped so the balance reads
/// `M^T f = (tau1 - tau2, tau2 - tau3, tau3)`. Lower triangular:
/// `[-d1 0 0; -l18 cos a2, -d2, 0; -l18 cos(a2 + a3), -l19 cos a3, -d3]`.
pub fn grasp_matrix(segments: &SegmentLengths, angles: &KnuckleAngles, contacts: &ContactDistances) -> Matrix3<f64> {
    // alpha' = T u with T mapping cumulative rates back to relative ones.
    let t = Matrix3::new(1.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0, -1.0, 1.0);
    -contact_jacobian(segments, angles, contacts) * t
}

/// Contact forces from the virtual-work balance: the reactions and joint
/// torques do no net work over any virtual knuckle motion, so
/// `G^T f = -tau`, solved directly.
pub fn virtual_work_oracle(
    torques: &JointTorques,
    segments: &SegmentLengths,
    angles: &KnuckleAngles,
    contacts: &ContactDistances,
) -> Result<ContactForces> {
    check_distances(contacts)?;
    let g = contact_jacobian(segments, angles, contacts);
    let gt = g.transpose();
    let dynamic = nalgebra::DMatrix::from_column_slice(3, 3, gt.as_slice());
    let condition = condition_estimate(&dynamic);
    if condition > SINGULAR_CONDITION {
        return Err(crate::numerics::NumericsError::SingularJacobian { condition }.into());
    }
    let rhs = -Vector3::new(torques.tau1, torques.tau2, torques.tau3);
    let f = gt
        .lu()
        .solve(&rhs)
        .ok_or(crate::numerics::NumericsError::SingularJacobian { condition: f64::INFINITY })?;
    Ok(ContactForces { f1: f[0], f2: f[1], f3: f[2] })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceCell {
    pub d2: f64,
    pub d3: f64,
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignCount {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

impl SignCount {
    fn record(&mut self, v: f64) {
        if v > 0.0 {
            self.positive += 1;
        } else if v < 0.0 {
            self.negative += 1;
        } else {
            self.zero += 1;
        }
    }
}

/// Signs of the grid finite differences of `f1` and `f2` along `d2` and `d3`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrendReport {
    pub df1_dd2: SignCount,
    pub df1_dd3: SignCount,
    pub df2_dd2: SignCount,
    pub df2_dd3: SignCount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceSurface {
    /// Number of `d2` samples (rows).
    pub rows: usize,
    /// Number of `d3` samples (columns).
    pub cols: usize,
    /// Row-major cells; row index follows `d2`, column index `d3`.
    pub cells: Vec<SurfaceCell>,
}

impl ForceSurface {
    pub fn cell(&self, row: usize, col: usize) -> &SurfaceCell {
        &self.cells[row * self.cols + col]
    }

    pub fn trends(&self) -> TrendReport {
        let mut report = TrendReport::default();
        for r in 0..self.rows {
            for c in 0..self.cols {
                let here = self.cell(r, c);
                if r + 1 < self.rows {
                    let next = self.cell(r + 1, c);
                    report.df1_dd2.record(next.f1 - here.f1);
                    report.df2_dd2.record(next.f2 - here.f2);
                }
                if c + 1 < self.cols {
                    let next = self.cell(r, c + 1);
                    report.df1_dd3.record(next.f1 - here.f1);
                    report.df2_dd3.record(next.f2 - here.f2);
                }
            }
        }
        report
    }
}

fn linspace(range: (f64, f64), n: usize, k: usize) -> f64 {
    if n == 1 {
        range.0
    } else {
        range.0 + (range.1 - range.0) * k as f64 / (n - 1) as f64
    }
}

/// Evaluate [`contact_forces`] over a `rows x cols` grid of `(d2, d3)`.
#[allow(clippy::too_many_arguments)]
pub fn force_surface(
    torques: &JointTorques,
    segments: &SegmentLengths,
    angles: &KnuckleAngles,
    d1: f64,
    d2_range: (f64, f64),
    d3_range: (f64, f64),
    rows: usize,
    cols: usize,
) -> Result<ForceSurface> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidInput("force surface needs at least one row and column".into()));
    }
    let mut cells = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let d2 = linspace(d2_range, rows, r);
        for c in 0..cols {
            let d3 = linspace(d3_range, cols, c);
            let f = contact_forces(torques, segments, angles, &ContactDistances { d1, d2, d3 })?;
            cells.push(SurfaceCell { d2, d3, f1: f.f1, f2: f.f2, f3: f.f3 });
        }
    }
    Ok(ForceSurface { rows, cols, cells })
}

/// Outcome of [`equivalence_sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub samples: usize,
    /// Largest closed-form vs oracle relative deviation.
    pub max_deviation: f64,
    /// Sample that produced `max_deviation`.
    pub worst_sample: usize,
    /// Largest above-diagonal entry of the grasp matrix, in magnitude.
    pub max_upper_entry: f64,
}

/// Compare [`contact_forces`] with [`virtual_work_oracle`] at `samples`
/// seeded random configurations: `alpha1` in [0, 1.2], `alpha2` and
/// `alpha3` in [0.1, 1.4] rad, each `d_i` in [2 mm, segment length], a
/// closing drive of up to 2000 Nmm and springs drawn from the design box.
pub fn equivalence_sweep(segments: &SegmentLengths, samples: usize, seed: u64) -> Result<SweepReport> {
    use rand::{Rng, SeedableRng};

    segments.validate()?;
    if segments.l18.min(segments.l19).min(segments.l20) < 2.0 {
        return Err(Error::InvalidInput("sweep needs every segment at least 2 mm long".into()));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut report = SweepReport { samples, max_deviation: 0.0, worst_sample: 0, max_upper_entry: 0.0 };
    for k in 0..samples {
        let angles = KnuckleAngles {
            alpha1: rng.gen_range(0.0..=1.2),
            alpha2: rng.gen_range(0.1..=1.4),
            alpha3: rng.gen_range(0.1..=1.4),
        };
        let contacts = ContactDistances {
            d1: rng.gen_range(2.0..=segments.l18),
            d2: rng.gen_range(2.0..=segments.l19),
            d3: rng.gen_range(2.0..=segments.l20),
        };
        let springs = SpringParams {
            k1: rng.gen_range(10.0..=1000.0),
            k2: rng.gen_range(10.0..=1000.0),
            tau_s1: rng.gen_range(0.0..=200.0),
            tau_s2: rng.gen_range(0.0..=200.0),
        };
        let torques = JointTorques::from_springs(-rng.gen_range(0.0..=2000.0), &springs, &angles);
        let closed = contact_forces(&torques, segments, &angles, &contacts)?;
        let oracle = virtual_work_oracle(&torques, segments, &angles, &contacts)?;
        let dev = closed.relative_deviation(&oracle);
        if dev > report.max_deviation || dev.is_nan() {
            report.max_deviation = dev;
            report.worst_sample = k;
        }
        let m = grasp_matrix(segments, &angles, &contacts);
        let upper = m[(0, 1)].abs().max(m[(0, 2)].abs()).max(m[(1, 2)].abs());
        report.max_upper_entry = report.max_upper_entry.max(upper);
    }
    Ok(report)
}
