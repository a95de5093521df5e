//! Global-best particle swarm optimization and the force-uniformity
//! objective used to size the gripper.

use std::f64::consts::FRAC_PI_4;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gripper::{assemble_at_pose, FingerGeometry, FingerPose};
use crate::kinetostatics::{
    contact_forces, virtual_work_oracle, ContactDistances, ContactForces, JointTorques, KnuckleAngles,
    SegmentLengths, SpringParams,
};

/// Gripper design variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignVector {
    pub l16: f64,
    pub l21: f64,
    pub l22: f64,
    pub k1: f64,
    pub k2: f64,
    pub tau_s1: f64,
    pub tau_s2: f64,
}

impl DesignVector {
    pub const DIM: usize = 7;
    pub const NAMES: [&'static str; 7] = ["l16", "l21", "l22", "k1", "k2", "tau_s1", "tau_s2"];

    /// Reference worst parameter group.
    pub const GROUP_A: DesignVector =
        DesignVector { l16: 26.78, l21: 15.0, l22: 13.35, k1: 12.1, k2: 525.6, tau_s1: 186.56, tau_s2: 199.43 };
    /// Reference best parameter group.
    pub const GROUP_B: DesignVector =
        DesignVector { l16: 28.02, l21: 15.0, l22: 13.58, k1: 346.5, k2: 794.1, tau_s1: 184.43, tau_s2: 196.29 };

    pub fn to_array(&self) -> [f64; 7] {
        [self.l16, self.l21, self.l22, self.k1, self.k2, self.tau_s1, self.tau_s2]
    }

    pub fn from_slice(x: &[f64]) -> Result<Self> {
        match *x {
            [l16, l21, l22, k1, k2, tau_s1, tau_s2] => Ok(Self { l16, l21, l22, k1, k2, tau_s1, tau_s2 }),
            _ => Err(Error::InvalidInput(format!("design vector needs 7 entries, got {}", x.len()))),
        }
    }

    pub fn springs(&self) -> SpringParams {
        SpringParams { k1: self.k1, k2: self.k2, tau_s1: self.tau_s1, tau_s2: self.tau_s2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let b = Self { lower, upper };
        b.validate()?;
        Ok(b)
    }

    /// Search box for the gripper design vector.
    pub fn design() -> Self {
        Self {
            lower: vec![20.0, 10.0, 10.0, 10.0, 10.0, 0.0, 0.0],
            upper: vec![30.0, 15.0, 15.0, 1000.0, 1000.0, 200.0, 200.0],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.is_empty() || self.lower.len() != self.upper.len() {
            return Err(Error::InvalidInput("bounds must be non-empty and of equal length".into()));
        }
        for (i, (lo, hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidInput(format!("bound {i}: lower {lo} must be below upper {hi}")));
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (lo, hi))| lo <= v && v <= hi)
    }
}

/// Where the object touches each phalanx.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ContactRule {
    /// Middle of each phalanx.
    Midpoint,
    /// Fixed distances, mm.
    Fixed { d1: f64, d2: f64, d3: f64 },
}

impl ContactRule {
    pub fn distances(&self, segments: &SegmentLengths) -> ContactDistances {
        match *self {
            ContactRule::Midpoint => ContactDistances::midpoints(segments),
            ContactRule::Fixed { d1, d2, d3 } => ContactDistances { d1, d2, d3 },
        }
    }
}

/// Everything the objective holds fixed while the design vector varies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveContext {
    /// Magnitude of the closing drive torque, Nmm. In the contact-force
    /// sign convention a torque that presses a phalanx into the object is
    /// negative (as the spring torques are), so the drive enters as `-tau1`.
    pub tau1: f64,
    pub segments: SegmentLengths,
    pub l24: f64,
    /// Finger links outside the design vector, mm.
    pub l23: f64,
    pub l25: f64,
    pub angles: KnuckleAngles,
    pub contact_rule: ContactRule,
    /// Pose at which the linkage must assemble.
    pub pose: FingerPose,
    /// Smallest acceptable transmission angle, rad.
    pub min_transmission: f64,
    /// Objective value returned for designs that cannot assemble.
    pub penalty: f64,
}

impl Default for ObjectiveContext {
    fn default() -> Self {
        let finger = FingerGeometry::default();
        Self {
            tau1: 1000.0,
            segments: SegmentLengths { l18: finger.l18, l19: finger.l19, l20: finger.l20 },
            l24: finger.l24,
            l23: finger.l23,
            l25: finger.l25,
            angles: KnuckleAngles { alpha1: 0.4, alpha2: FRAC_PI_4, alpha3: FRAC_PI_4 },
            contact_rule: ContactRule::Midpoint,
            pose: FingerPose::default(),
            min_transmission: 10f64.to_radians(),
            penalty: 1e6,
        }
    }
}

impl ObjectiveContext {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau1 > 0.0 && self.tau1.is_finite()) {
            return Err(Error::InvalidGeometry { field: "tau1", reason: "drive torque must be positive" });
        }
        self.segments.validate()?;
        self.contact_rule.distances(&self.segments).validate(&self.segments)?;
        if !(self.penalty > 0.0) {
            return Err(Error::InvalidGeometry { field: "penalty", reason: "must be positive" });
        }
        Ok(())
    }

    pub fn finger(&self, x: &DesignVector) -> FingerGeometry {
        FingerGeometry {
            l16: x.l16,
            l18: self.segments.l18,
            l19: self.segments.l19,
            l20: self.segments.l20,
            l21: x.l21,
            l22: x.l22,
            l23: self.l23,
            l24: self.l24,
            l25: self.l25,
        }
    }

    pub fn torques(&self, x: &DesignVector) -> JointTorques {
        JointTorques::from_springs(-self.tau1, &x.springs(), &self.angles)
    }

    /// Whether the finger linkage assembles at the pose with adequate
    /// transmission.
    pub fn feasibility(&self, x: &DesignVector) -> Result<()> {
        let finger = self.finger(x);
        finger.validate()?;
        x.springs().validate()?;
        assemble_at_pose(&finger, &self.pose, self.min_transmission).map(|_| ())
    }

    /// Closed-form contact forces for a design, ignoring feasibility.
    pub fn forces(&self, x: &DesignVector) -> Result<ContactForces> {
        let contacts = self.contact_rule.distances(&self.segments);
        contact_forces(&self.torques(x), &self.segments, &self.angles, &contacts)
    }

    /// The same forces from the virtual-work balance.
    pub fn oracle_forces(&self, x: &DesignVector) -> Result<ContactForces> {
        let contacts = self.contact_rule.distances(&self.segments);
        virtual_work_oracle(&self.torques(x), &self.segments, &self.angles, &contacts)
    }
}

/// Spread `max(f) - min(f)` of the contact forces.
pub fn force_spread(f: &ContactForces) -> f64 {
    let v = f.as_array();
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    (lo - hi).abs()
}

/// Force-uniformity objective. Designs that fail to assemble score
/// `ctx.penalty`.
pub fn objective_phi(x: &DesignVector, ctx: &ObjectiveContext) -> f64 {
    if ctx.feasibility(x).is_err() {
        return ctx.penalty;
    }
    match ctx.forces(x) {
        Ok(f) if f.as_array().iter().all(|v| v.is_finite()) => force_spread(&f),
        _ => ctx.penalty,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsoConfig {
    pub swarm_size: usize,
    pub max_iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub seed: u64,
    /// Velocity limit as a fraction of each bound range.
    pub velocity_clamp: f64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            swarm_size: 1000,
            max_iterations: 300,
            inertia: 0.7298,
            cognitive: 1.49618,
            social: 1.49618,
            seed: 0,
            velocity_clamp: 0.5,
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.swarm_size < 2 {
            return Err(Error::InvalidInput("swarm_size must be at least 2".into()));
        }
        if self.max_iterations < 1 {
            return Err(Error::InvalidInput("max_iterations must be at least 1".into()));
        }
        for (name, v) in [
            ("inertia", self.inertia),
            ("cognitive", self.cognitive),
            ("social", self.social),
            ("velocity_clamp", self.velocity_clamp),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub best_x: Vec<f64>,
    pub best_phi: f64,
    /// Best value after initialization, then after every iteration.
    pub history: Vec<f64>,
    pub evaluations: usize,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for one particle at one iteration.
fn stream(seed: u64, particle: usize, iteration: usize) -> ChaCha8Rng {
    let key = splitmix(splitmix(splitmix(seed) ^ particle as u64) ^ iteration as u64);
    ChaCha8Rng::seed_from_u64(key)
}

/// Index and value of the smallest entry; ties go to the lowest index.
fn argmin(values: &[f64]) -> (usize, f64) {
    let mut best = (0, values[0]);
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < best.1 {
            best = (i, v);
        }
    }
    best
}

/// Minimize `objective` over `bounds`.
///
/// Each particle draws its random numbers from a stream keyed by
/// `(seed, particle, iteration)`, and the swarm best is reduced in particle
/// order, so the result does not depend on how many threads evaluate the
/// objective.
pub fn pso_minimize<F>(objective: F, bounds: &Bounds, config: &PsoConfig) -> Result<RunResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    bounds.validate()?;
    config.validate()?;
    let dim = bounds.dim();
    let n = config.swarm_size;
    let range: Vec<f64> = bounds.lower.iter().zip(&bounds.upper).map(|(lo, hi)| hi - lo).collect();
    let vmax: Vec<f64> = range.iter().map(|r| config.velocity_clamp * r).collect();
    // NaN would poison every comparison; treat it as the worst value.
    let eval = |x: &[f64]| {
        let v = objective(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut positions: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|p| {
            let mut rng = stream(config.seed, p, 0);
            (0..dim).map(|d| bounds.lower[d] + range[d] * rng.gen::<f64>()).collect()
        })
        .collect();
    let mut velocities = vec![vec![0.0; dim]; n];
    let mut values: Vec<f64> = positions.par_iter().map(|x| eval(x)).collect();
    let mut pbest = positions.clone();
    let mut pbest_values = values.clone();
    let (gi, gv) = argmin(&pbest_values);
    let mut gbest = pbest[gi].clone();
    let mut gbest_value = gv;
    let mut history = Vec::with_capacity(config.max_iterations + 1);
    history.push(gbest_value);

    for iteration in 1..=config.max_iterations {
        let g = &gbest;
        positions
            .par_iter_mut()
            .zip(velocities.par_iter_mut())
            .zip(pbest.par_iter())
            .enumerate()
            .for_each(|(p, ((x, v), pb))| {
                let mut rng = stream(config.seed, p, iteration);
                for d in 0..dim {
                    let r1: f64 = rng.gen();
                    let r2: f64 = rng.gen();
                    let vd = config.inertia * v[d]
                        + config.cognitive * r1 * (pb[d] - x[d])
                        + config.social * r2 * (g[d] - x[d]);
                    v[d] = vd.clamp(-vmax[d], vmax[d]);
                    x[d] = (x[d] + v[d]).clamp(bounds.lower[d], bounds.upper[d]);
                }
            });
        values.par_iter_mut().zip(positions.par_iter()).for_each(|(f, x)| *f = eval(x));
        for p in 0..n {
            if values[p] < pbest_values[p] {
                pbest_values[p] = values[p];
                pbest[p].clone_from(&positions[p]);
            }
        }
        let (gi, gv) = argmin(&pbest_values);
        if gv < gbest_value {
            gbest_value = gv;
            gbest.clone_from(&pbest[gi]);
        }
        history.push(gbest_value);
    }

    Ok(RunResult {
        seed: config.seed,
        best_x: gbest,
        best_phi: gbest_value,
        history,
        evaluations: n * (config.max_iterations + 1),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub runs: usize,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

impl RunSummary {
    pub fn of(results: &[RunResult]) -> Option<Self> {
        if results.is_empty() {
            return None;
        }
        let mut v: Vec<f64> = results.iter().map(|r| r.best_phi).collect();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
        Some(Self { runs: n, min: v[0], median, max: v[n - 1] })
    }
}

/// `n_runs` independent runs seeded `seed, seed + 1, ...`.
pub fn multi_run<F>(objective: F, bounds: &Bounds, config: &PsoConfig, n_runs: usize) -> Result<Vec<RunResult>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if n_runs == 0 {
        return Err(Error::InvalidInput("n_runs must be at least 1".into()));
    }
    (0..n_runs)
        .map(|k| {
            let cfg = PsoConfig { seed: config.seed.wrapping_add(k as u64), ..*config };
            pso_minimize(&objective, bounds, &cfg)
        })
        .collect()
}

/// Adapter from a design-vector objective to the slice form the optimizer
/// takes.
pub fn design_objective(ctx: &ObjectiveContext) -> impl Fn(&[f64]) -> f64 + Sync + '_ {
    move |x: &[f64]| match DesignVector::from_slice(x) {
        Ok(d) => objective_phi(&d, ctx),
        Err(_) => ctx.penalty,
    }
}
