//! Linear stability of the Newmark family on the damped oscillator
//! `ẍ + 2ξωẋ + ω²x = 0`, and the frequency bookkeeping that turns it into a
//! step-size limit for a running simulation.

use crate::error::{Error, Result};
use crate::integrators::{reduced_frequency, NewmarkParams, Trajectory};
use crate::linsolve::{ensure_finite_matrix, max_generalized_frequency, Matrix};
use crate::model::{linearize_equilibrium, MultibodyModel, SystemState};

/// One-step map of `(Δt² ẍ, Δt ẋ, x)`, obtained by solving the two Newmark
/// relations together with the equation of motion at the new time.
pub fn sdof_amplification_matrix(omega: f64, xi: f64, dt: f64, params: NewmarkParams) -> Result<Matrix> {
    if !(omega >= 0.0 && xi >= 0.0 && dt > 0.0) || !(omega.is_finite() && xi.is_finite() && dt.is_finite()) {
        return Err(Error::Validation(format!(
            "need ω ≥ 0, ξ ≥ 0, Δt > 0 (got {omega}, {xi}, {dt})"
        )));
    }
    params.validate()?;
    let (a, b) = (params.alpha, params.beta);
    let w = omega * dt;
    // Unknowns (A₁, V₁, X₁) with A = Δt² ẍ, V = Δt ẋ.
    let lhs = Matrix::from_row_slice(3, 3, &[1.0, 2.0 * xi * w, w * w, -a, 1.0, 0.0, -b, 0.0, 1.0]);
    let rhs = Matrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 1.0 - a, 1.0, 0.0, 0.5 - b, 1.0, 1.0]);
    lhs.lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Validation("amplification system is singular".into()))
}

/// Largest eigenvalue modulus, complex eigenvalues included.
pub fn spectral_radius(a: &Matrix) -> Result<f64> {
    if a.nrows() != a.ncols() {
        return Err(Error::Validation(format!("matrix is {:?}, not square", a.shape())));
    }
    ensure_finite_matrix(a, "matrix")?;
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    Ok(a.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// `(1/ω) √(1/(α/2 − β))`, or `+∞` when the scheme is unconditionally stable
/// or there is nothing to resolve.
pub fn newmark_dt_limit(omega_max: f64, params: NewmarkParams) -> f64 {
    let gap = 0.5 * params.alpha - params.beta;
    if gap <= 0.0 || omega_max <= 0.0 {
        return f64::INFINITY;
    }
    (1.0 / gap).sqrt() / omega_max
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimelinePoint {
    pub t: f64,
    pub omega_max: f64,
    pub dt_limit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub omega_max: f64,
    pub dt_limit: f64,
    pub params: NewmarkParams,
    pub timeline: Vec<TimelinePoint>,
}

impl StabilityReport {
    pub fn new(omega_max: f64, params: NewmarkParams) -> Self {
        Self {
            omega_max,
            dt_limit: newmark_dt_limit(omega_max, params),
            params,
            timeline: Vec::new(),
        }
    }

    /// Peak frequency and tightest limit over a timeline.
    pub fn from_timeline(timeline: Vec<TimelinePoint>, params: NewmarkParams) -> Self {
        let omega_max = timeline.iter().map(|p| p.omega_max).fold(0.0, f64::max);
        Self {
            omega_max,
            dt_limit: newmark_dt_limit(omega_max, params),
            params,
            timeline,
        }
    }
}

/// Largest reduced natural frequency at every record of a constrained-model
/// trajectory.
pub fn trajectory_frequency_timeline(
    model: &MultibodyModel,
    trajectory: &Trajectory,
    rank_tol: f64,
) -> Result<Vec<TimelinePoint>> {
    trajectory
        .records
        .iter()
        .map(|r| {
            let omega_max = match r.omega_max {
                Some(w) => w,
                None => reduced_frequency(model, &r.state, rank_tol)?,
            };
            Ok(TimelinePoint {
                t: r.state.t,
                omega_max,
                dt_limit: newmark_dt_limit(omega_max, trajectory.params),
            })
        })
        .collect()
}

/// Largest natural frequency of the unreduced pencil `(K_L, M)`, with the
/// multiplier stiffness inside `K_L` and the constraints otherwise ignored.
/// A diagnostic only: it is not the frequency of the integrated system and
/// needs a nonsingular mass matrix.
pub fn full_space_frequency(model: &MultibodyModel, state: &SystemState) -> Result<f64> {
    let lin = linearize_equilibrium(model, state);
    max_generalized_frequency(&lin.k, &lin.m)
}
