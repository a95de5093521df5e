//! Damped Newton root finding and central-difference Jacobians for the
//! small dense systems that appear in the loop-closure solvers.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Step used by [`fd_jacobian`] callers when nothing better is known.
pub const DEFAULT_FD_STEP: f64 = 1e-6;

/// Jacobians whose condition estimate exceeds this are treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

const MAX_HALVINGS: u32 = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("jacobian is singular (condition estimate {condition:e})")]
    SingularJacobian { condition: f64 },
    #[error("newton iteration failed to converge (residual {residual_norm:e} after {iterations} iterations)")]
    NoConvergence { residual_norm: f64, iterations: usize },
    #[error("invalid solver settings: {0}")]
    InvalidSettings(&'static str),
    #[error("residual length {got} does not match unknown count {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonSettings {
    /// Stop once the residual 2-norm drops to this value.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Smallest step-scale factor accepted by the line search, in (0, 1].
    pub damping_floor: f64,
    /// Step for the internal finite-difference Jacobian.
    pub fd_step: f64,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 50,
            damping_floor: 0.5f64.powi(MAX_HALVINGS as i32),
            fd_step: DEFAULT_FD_STEP,
        }
    }
}

impl NewtonSettings {
    pub fn validate(&self) -> Result<(), NumericsError> {
        if !(self.tolerance > 0.0) {
            return Err(NumericsError::InvalidSettings("tolerance must be positive"));
        }
        if self.max_iterations < 1 {
            return Err(NumericsError::InvalidSettings("max_iterations must be at least 1"));
        }
        if !(self.damping_floor > 0.0 && self.damping_floor <= 1.0) {
            return Err(NumericsError::InvalidSettings("damping_floor must lie in (0, 1]"));
        }
        if !(self.fd_step > 0.0) {
            return Err(NumericsError::InvalidSettings("fd_step must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub solution: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Central-difference Jacobian: entry `(i, j)` is
/// `(f_i(x + h e_j) - f_i(x - h e_j)) / 2h`.
pub fn fd_jacobian<F>(f: F, x: &[f64], h: f64) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = x.len();
    let mut probe = x.to_vec();
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(n);
    for j in 0..n {
        probe[j] = x[j] + h;
        let forward = f(&probe);
        probe[j] = x[j] - h;
        let backward = f(&probe);
        probe[j] = x[j];
        columns.push(
            forward
                .iter()
                .zip(&backward)
                .map(|(a, b)| (a - b) / (2.0 * h))
                .collect(),
        );
    }
    let m = columns.first().map_or(0, Vec::len);
    DMatrix::from_fn(m, n, |i, j| columns[j][i])
}

/// Ratio of extreme singular values; infinite when the matrix is rank deficient.
pub fn condition_estimate(matrix: &DMatrix<f64>) -> f64 {
    let sv = matrix.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Damped Newton with a finite-difference Jacobian.
pub fn solve_newton<R>(
    residual: R,
    x0: &[f64],
    settings: &NewtonSettings,
) -> Result<SolveReport, NumericsError>
where
    R: Fn(&[f64]) -> Vec<f64>,
{
    let h = settings.fd_step;
    solve_newton_with_jacobian(&residual, |x: &[f64]| fd_jacobian(&residual, x, h), x0, settings)
}

/// Damped Newton with a caller-supplied Jacobian.
///
/// Each step is halved until the residual norm decreases. If the scale
/// falls below `damping_floor` the solve fails with `NoConvergence`
/// instead of accepting a non-descending step. Running out of iterations
/// returns a report with `converged == false`.
pub fn solve_newton_with_jacobian<R, J>(
    residual: R,
    jacobian: J,
    x0: &[f64],
    settings: &NewtonSettings,
) -> Result<SolveReport, NumericsError>
where
    R: Fn(&[f64]) -> Vec<f64>,
    J: Fn(&[f64]) -> DMatrix<f64>,
{
    settings.validate()?;
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = residual(&x);
    if r.len() != n {
        return Err(NumericsError::DimensionMismatch { expected: n, got: r.len() });
    }
    let mut norm = norm2(&r);

    for iteration in 0..settings.max_iterations {
        if norm <= settings.tolerance {
            return Ok(SolveReport { solution: x, residual_norm: norm, iterations: iteration, converged: true });
        }
        let jac = jacobian(&x);
        let condition = condition_estimate(&jac);
        if condition > SINGULAR_CONDITION {
            return Err(NumericsError::SingularJacobian { condition });
        }
        let rhs = DVector::from_column_slice(&r);
        let step = jac
            .lu()
            .solve(&rhs)
            .ok_or(NumericsError::SingularJacobian { condition: f64::INFINITY })?;

        let mut scale = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(xi, si)| xi - scale * si).collect();
            let trial_r = residual(&trial);
            let trial_norm = norm2(&trial_r);
            if trial_norm < norm {
                x = trial;
                r = trial_r;
                norm = trial_norm;
                break;
            }
            scale *= 0.5;
            if scale < settings.damping_floor {
                return Err(NumericsError::NoConvergence { residual_norm: norm, iterations: iteration + 1 });
            }
        }
    }

    Ok(SolveReport {
        converged: norm <= settings.tolerance,
        solution: x,
        residual_norm: norm,
        iterations: settings.max_iterations,
    })
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solve a 2x2 system `[[a, b], [c, d]] x = rhs` by Cramer's rule.
///
/// Returns `None` when the determinant magnitude is below `min_det`.
pub fn solve2(m: [[f64; 2]; 2], rhs: [f64; 2], min_det: f64) -> Option<[f64; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.abs() < min_det || !det.is_finite() {
        return None;
    }
    Some([
        (rhs[0] * m[1][1] - m[0][1] * rhs[1]) / det,
        (m[0][0] * rhs[1] - rhs[0] * m[1][0]) / det,
    ])
}
