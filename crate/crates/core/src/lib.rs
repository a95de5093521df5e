//! Kinematics, kinetostatics and particle-swarm dimensional synthesis for
//! an underactuated metamorphic loading manipulator: a single-motor arm
//! whose slider lock switches it between lifting and grasping, carrying an
//! adaptive three-phalanx gripper driven through torsional springs.

// Guards like `!(x > 0.0)` are written that way so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arm;
pub mod coordination;
pub mod error;
pub mod gripper;
pub mod kinetostatics;
pub mod numerics;
pub mod planar;
pub mod pso;

pub use error::{Error, Result};
