//! Coordinating the mobile vehicle with the arm.
//!
//! The end effector moves on a circle of radius `R = l8 + l6 + l9 + l_ofs`
//! about the arm base, so a target height fixes `theta0` and the remaining
//! horizontal error is taken up by driving the vehicle.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoordinationSetup {
    /// Mounting offset of the arm on the vehicle, mm.
    pub x_ofs: f64,
    /// End-effector offset beyond the gripper, mm.
    pub l_ofs: f64,
    /// Height of the arm base, mm.
    pub h_base: f64,
    /// Height of the vehicle, mm.
    pub y_veh: f64,
    pub l8: f64,
    pub l6: f64,
    pub l9: f64,
    pub l0: f64,
    /// `theta0` before the grasp starts, used to report the lift change.
    pub pre_grasp_theta0: f64,
}

impl Default for CoordinationSetup {
    fn default() -> Self {
        Self {
            x_ofs: 120.0,
            l_ofs: 60.0,
            h_base: 450.0,
            y_veh: 300.0,
            l8: 150.0,
            l6: 210.0,
            l9: 45.0,
            l0: 397.0,
            pre_grasp_theta0: FRAC_PI_2,
        }
    }
}

impl CoordinationSetup {
    /// Reach radius `l8 + l6 + l9 + l_ofs`.
    pub fn reach(&self) -> f64 {
        self.l8 + self.l6 + self.l9 + self.l_ofs
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("x_ofs", self.x_ofs),
            ("l_ofs", self.l_ofs),
            ("h_base", self.h_base),
            ("y_veh", self.y_veh),
            ("l8", self.l8),
            ("l6", self.l6),
            ("l9", self.l9),
            ("l0", self.l0),
            ("pre_grasp_theta0", self.pre_grasp_theta0),
        ];
        for (field, v) in fields {
            if !v.is_finite() {
                return Err(Error::InvalidGeometry { field, reason: "must be finite" });
            }
        }
        if !(self.reach() > 0.0) {
            return Err(Error::InvalidGeometry { field: "reach", reason: "l8 + l6 + l9 + l_ofs must be positive" });
        }
        Ok(())
    }

    fn base_height(&self) -> f64 {
        -self.y_veh + self.h_base + self.l0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspPlan {
    pub theta0: f64,
    /// Lift change relative to the pre-grasp pose, mm.
    pub delta_h: f64,
    /// Vehicle horizontal displacement, mm.
    pub x_veh: f64,
}

/// End-effector position for a given `theta0` and vehicle displacement.
pub fn ee_position(setup: &CoordinationSetup, theta0: f64, x_veh: f64) -> (f64, f64) {
    let r = setup.reach();
    let phi = theta0 - FRAC_PI_2;
    (-x_veh - setup.x_ofs + r * phi.cos(), setup.base_height() + r * phi.sin())
}

/// The arcsine argument that fixes `theta0` for a target height.
pub fn reach_argument(setup: &CoordinationSetup, ee_y: f64) -> f64 {
    (ee_y + setup.y_veh - setup.h_base - setup.l0) / setup.reach()
}

/// Solve for `theta0`, the vehicle displacement and the lift change that
/// put the end effector on `target`. Uses the principal arcsine, so
/// `theta0` lies in `[0, pi]`.
pub fn plan_grasp(setup: &CoordinationSetup, target: (f64, f64)) -> Result<GraspPlan> {
    let (ee_x, ee_y) = target;
    let argument = reach_argument(setup, ee_y);
    if !(argument.abs() <= 1.0) {
        return Err(Error::OutOfReach { argument });
    }
    let theta0 = argument.asin() + FRAC_PI_2;
    let x_veh = -ee_x - setup.x_ofs + setup.reach() * (theta0 - FRAC_PI_2).cos();
    let (_, pre_y) = ee_position(setup, setup.pre_grasp_theta0, 0.0);
    Ok(GraspPlan { theta0, delta_h: ee_y - pre_y, x_veh })
}
