//! TOML configuration. Every section and key is optional; missing values
//! take the documented defaults and unknown keys are rejected. Angles are
//! written in degrees and converted to radians on the way in.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use umlm::arm::{loading_cycle_profile, ArmGeometry, Phase, ProfileSample};
use umlm::coordination::CoordinationSetup;
use umlm::gripper::{CouplingGeometry, CrossSectionGeometry, FingerGeometry, FingerPose};
use umlm::kinetostatics::{KnuckleAngles, SegmentLengths, SpringParams};
use umlm::pso::{Bounds, ContactRule, ObjectiveContext, PsoConfig};

use crate::error::ConfigError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolConfig {
    pub arm: ArmGeometry,
    pub coupling: CouplingSection,
    pub cross_section: CrossSectionSection,
    pub segments: SegmentLengths,
    pub finger: FingerSection,
    pub springs: SpringParams,
    pub objective: ObjectiveSection,
    pub pso: PsoSection,
    pub trajectory: TrajectorySection,
    pub surface: SurfaceSection,
    pub eval: EvalSection,
    pub coordination: CoordinationSection,
    pub check: CheckSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingSection {
    pub l10: f64,
    pub l11: f64,
    pub l12: f64,
    pub l13: f64,
    pub alpha_deg: f64,
}

impl Default for CouplingSection {
    fn default() -> Self {
        let g = CouplingGeometry::default();
        Self { l10: g.l10, l11: g.l11, l12: g.l12, l13: g.l13, alpha_deg: g.alpha.to_degrees() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossSectionSection {
    pub l14: f64,
    pub l15: f64,
    pub l17: f64,
}

impl Default for CrossSectionSection {
    fn default() -> Self {
        let g = CrossSectionGeometry::default();
        Self { l14: g.l14, l15: g.l15, l17: g.l17 }
    }
}

/// Finger links other than the phalanges, which live in `[segments]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FingerSection {
    pub l16: f64,
    pub l21: f64,
    pub l22: f64,
    pub l23: f64,
    pub l24: f64,
    pub l25: f64,
}

impl Default for FingerSection {
    fn default() -> Self {
        let g = FingerGeometry::default();
        Self { l16: g.l16, l21: g.l21, l22: g.l22, l23: g.l23, l24: g.l24, l25: g.l25 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum ContactSection {
    Midpoint {},
    Fixed { d1: f64, d2: f64, d3: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectiveSection {
    /// Closing drive torque magnitude, Nmm.
    pub tau1: f64,
    pub alpha1_deg: f64,
    pub alpha2_deg: f64,
    pub alpha3_deg: f64,
    pub contact: ContactSection,
    pub pose_theta9_deg: f64,
    pub pose_theta11_deg: f64,
    pub pose_knuckle_deg: f64,
    pub min_transmission_deg: f64,
    pub penalty: f64,
}

impl Default for ObjectiveSection {
    fn default() -> Self {
        let ctx = ObjectiveContext::default();
        Self {
            tau1: ctx.tau1,
            alpha1_deg: ctx.angles.alpha1.to_degrees(),
            alpha2_deg: 45.0,
            alpha3_deg: 45.0,
            contact: ContactSection::Midpoint {},
            pose_theta9_deg: 0.0,
            pose_theta11_deg: 90.0,
            pose_knuckle_deg: 45.0,
            min_transmission_deg: 10.0,
            penalty: ctx.penalty,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsoSection {
    pub particles: usize,
    pub iterations: usize,
    pub runs: usize,
    pub seed: u64,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub velocity_clamp: f64,
    /// Search box; defaults to the design bounds.
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
}

impl Default for PsoSection {
    fn default() -> Self {
        let c = PsoConfig::default();
        Self {
            particles: c.swarm_size,
            iterations: c.max_iterations,
            runs: 1,
            seed: c.seed,
            inertia: c.inertia,
            cognitive: c.cognitive,
            social: c.social,
            velocity_clamp: c.velocity_clamp,
            lower: None,
            upper: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSegment {
    pub t_start: f64,
    pub t_end: f64,
    pub theta1_start_deg: f64,
    pub theta1_end_deg: f64,
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectorySection {
    /// Magnitude of the drive rate, rad/s.
    pub omega1: f64,
    pub samples_per_segment: usize,
    /// Angle held during the first segment (theta4 when lifting, theta0
    /// when grasping).
    pub held_deg: f64,
    /// Drive profile; defaults to the built-in loading cycle.
    pub segments: Option<Vec<ProfileSegment>>,
}

impl Default for TrajectorySection {
    fn default() -> Self {
        Self { omega1: 0.1, samples_per_segment: 41, held_deg: 0.35f64.to_degrees(), segments: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceSection {
    /// Proximal contact distance; defaults to the middle of l18.
    pub d1: Option<f64>,
    pub d2_range: [f64; 2],
    pub d3_range: [f64; 2],
    pub rows: usize,
    pub cols: usize,
}

impl Default for SurfaceSection {
    fn default() -> Self {
        Self { d1: None, d2_range: [5.0, 30.0], d3_range: [5.0, 25.0], rows: 26, cols: 21 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Closing drive torque magnitude, Nmm; defaults to `objective.tau1`.
    pub drive_torque: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoordinationSection {
    pub x_ofs: f64,
    pub l_ofs: f64,
    pub h_base: f64,
    pub y_veh: f64,
    pub l6: f64,
    pub l9: f64,
    pub pre_grasp_theta0_deg: f64,
    /// End-effector target `[x, y]`, mm.
    pub target: [f64; 2],
}

impl Default for CoordinationSection {
    fn default() -> Self {
        let s = CoordinationSetup::default();
        Self {
            x_ofs: s.x_ofs,
            l_ofs: s.l_ofs,
            h_base: s.h_base,
            y_veh: s.y_veh,
            l6: s.l6,
            l9: s.l9,
            pre_grasp_theta0_deg: 90.0,
            target: [-500.0, 700.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSection {
    pub samples: usize,
    pub seed: u64,
}

impl Default for CheckSection {
    fn default() -> Self {
        Self { samples: 1000, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

/// Read and validate a config file; `None` gives the defaults.
pub fn load_config(path: Option<&Path>) -> Result<ToolConfig, ConfigError> {
    let config = match path {
        None => ToolConfig::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| ConfigError::Read { path: p.to_path_buf(), message: e.to_string() })?;
            ToolConfig::from_toml(&text)?
        }
    };
    config.validate()?;
    Ok(config)
}

fn invalid(e: umlm::Error) -> ConfigError {
    ConfigError::Validation(e.to_string())
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::Validation(format!("{field} must be positive, got {v}")))
    }
}

impl ToolConfig {
    /// Parse without validating.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.arm.validate().map_err(invalid)?;
        self.coupling().validate().map_err(invalid)?;
        self.cross_section().validate().map_err(invalid)?;
        self.segments.validate().map_err(invalid)?;
        self.finger().validate().map_err(invalid)?;
        self.springs.validate().map_err(invalid)?;
        self.objective_context().validate().map_err(invalid)?;
        self.pso_config(None).validate().map_err(invalid)?;
        self.bounds().map_err(invalid)?;
        if self.pso.runs == 0 {
            return Err(ConfigError::Validation("pso.runs must be at least 1".into()));
        }
        positive("trajectory.omega1", self.trajectory.omega1)?;
        if self.trajectory.samples_per_segment < 2 {
            return Err(ConfigError::Validation("trajectory.samples_per_segment must be at least 2".into()));
        }
        if let Some(segs) = &self.trajectory.segments {
            if segs.is_empty() {
                return Err(ConfigError::Validation("trajectory.segments must not be empty".into()));
            }
        }
        if let Some(d) = self.eval.drive_torque {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(ConfigError::Validation("eval.drive_torque must be non-negative".into()));
            }
        }
        let s = &self.surface;
        if s.rows == 0 || s.cols == 0 {
            return Err(ConfigError::Validation("surface.rows and surface.cols must be at least 1".into()));
        }
        for (field, v) in [("surface.d2_range", s.d2_range), ("surface.d3_range", s.d3_range)] {
            positive(field, v[0])?;
            positive(field, v[1])?;
        }
        if let Some(d1) = s.d1 {
            positive("surface.d1", d1)?;
        }
        self.coordination_setup().validate().map_err(invalid)?;
        if self.check.samples == 0 {
            return Err(ConfigError::Validation("check.samples must be at least 1".into()));
        }
        Ok(())
    }

    pub fn coupling(&self) -> CouplingGeometry {
        let c = &self.coupling;
        CouplingGeometry { l10: c.l10, l11: c.l11, l12: c.l12, l13: c.l13, alpha: c.alpha_deg.to_radians() }
    }

    /// The cross-section shares `l13` and the offset angle with the
    /// coupling and `l16` with the finger.
    pub fn cross_section(&self) -> CrossSectionGeometry {
        let c = &self.cross_section;
        CrossSectionGeometry {
            l13: self.coupling.l13,
            l14: c.l14,
            l15: c.l15,
            l16: self.finger.l16,
            l17: c.l17,
            alpha: self.coupling.alpha_deg.to_radians(),
        }
    }

    pub fn finger(&self) -> FingerGeometry {
        let f = &self.finger;
        FingerGeometry {
            l16: f.l16,
            l18: self.segments.l18,
            l19: self.segments.l19,
            l20: self.segments.l20,
            l21: f.l21,
            l22: f.l22,
            l23: f.l23,
            l24: f.l24,
            l25: f.l25,
        }
    }

    pub fn angles(&self) -> KnuckleAngles {
        let o = &self.objective;
        KnuckleAngles {
            alpha1: o.alpha1_deg.to_radians(),
            alpha2: o.alpha2_deg.to_radians(),
            alpha3: o.alpha3_deg.to_radians(),
        }
    }

    pub fn objective_context(&self) -> ObjectiveContext {
        let o = &self.objective;
        ObjectiveContext {
            tau1: o.tau1,
            segments: self.segments,
            l24: self.finger.l24,
            l23: self.finger.l23,
            l25: self.finger.l25,
            angles: self.angles(),
            contact_rule: match o.contact {
                ContactSection::Midpoint {} => ContactRule::Midpoint,
                ContactSection::Fixed { d1, d2, d3 } => ContactRule::Fixed { d1, d2, d3 },
            },
            pose: FingerPose {
                theta9: o.pose_theta9_deg.to_radians(),
                theta11: o.pose_theta11_deg.to_radians(),
                knuckle: o.pose_knuckle_deg.to_radians(),
            },
            min_transmission: o.min_transmission_deg.to_radians(),
            penalty: o.penalty,
        }
    }

    pub fn pso_config(&self, seed: Option<u64>) -> PsoConfig {
        let p = &self.pso;
        PsoConfig {
            swarm_size: p.particles,
            max_iterations: p.iterations,
            inertia: p.inertia,
            cognitive: p.cognitive,
            social: p.social,
            seed: seed.unwrap_or(p.seed),
            velocity_clamp: p.velocity_clamp,
        }
    }

    pub fn bounds(&self) -> umlm::Result<Bounds> {
        let design = Bounds::design();
        Bounds::new(
            self.pso.lower.clone().unwrap_or(design.lower),
            self.pso.upper.clone().unwrap_or(design.upper),
        )
    }

    pub fn profile(&self) -> Vec<ProfileSample> {
        let t = &self.trajectory;
        let Some(segments) = &t.segments else {
            return loading_cycle_profile(t.samples_per_segment);
        };
        let n = t.samples_per_segment;
        let mut profile = Vec::with_capacity(segments.len() * n);
        for (i, s) in segments.iter().enumerate() {
            let first = if i == 0 { 0 } else { 1 };
            for k in first..n {
                let u = k as f64 / (n - 1) as f64;
                let theta1 = s.theta1_start_deg + u * (s.theta1_end_deg - s.theta1_start_deg);
                profile.push(ProfileSample {
                    time: s.t_start + u * (s.t_end - s.t_start),
                    theta1: theta1.to_radians(),
                    phase: s.phase,
                });
            }
        }
        profile
    }

    pub fn coordination_setup(&self) -> CoordinationSetup {
        let c = &self.coordination;
        CoordinationSetup {
            x_ofs: c.x_ofs,
            l_ofs: c.l_ofs,
            h_base: c.h_base,
            y_veh: c.y_veh,
            l8: self.arm.l8,
            l6: c.l6,
            l9: c.l9,
            l0: self.arm.l0,
            pre_grasp_theta0: c.pre_grasp_theta0_deg.to_radians(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        let c = ToolConfig::from_toml("").unwrap();
        assert_eq!(c, ToolConfig::default());
        c.validate().unwrap();
        assert_eq!(c.arm, ArmGeometry::default());
        assert_eq!(c.finger(), FingerGeometry::default());
        assert_eq!(c.segments.l20, 25.0);
        assert_eq!(c.objective_context().contact_rule, ContactRule::Midpoint);
    }

    #[test]
    fn negative_length_names_the_field() {
        let c = ToolConfig::from_toml("[arm]\nl4 = -1.0\n").unwrap();
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("l4"), "{msg}");
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ToolConfig::from_toml("[arm]\nl44 = 1.0\n").is_err());
        assert!(ToolConfig::from_toml("[armm]\n").is_err());
        assert!(ToolConfig::from_toml("[objective.contact]\nrule = \"midpoint\"\nd1 = 3.0\n").is_err());
    }

    #[test]
    fn degrees_become_radians() {
        let c = ToolConfig::from_toml("[objective]\nalpha2_deg = 90.0\n").unwrap();
        assert_eq!(c.angles().alpha2, std::f64::consts::FRAC_PI_2);
        assert_eq!(c.objective_context().angles.alpha3, std::f64::consts::FRAC_PI_4);
    }

    #[test]
    fn fixed_contacts_parse() {
        let c = ToolConfig::from_toml("[objective.contact]\nrule = \"fixed\"\nd1 = 3.0\nd2 = 4.0\nd3 = 5.0\n").unwrap();
        assert_eq!(c.objective_context().contact_rule, ContactRule::Fixed { d1: 3.0, d2: 4.0, d3: 5.0 });
    }

    #[test]
    fn default_profile_is_the_loading_cycle() {
        let c = ToolConfig::default();
        assert_eq!(c.profile(), loading_cycle_profile(41));
    }
}
