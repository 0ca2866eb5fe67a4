//! Time stepping: the tangent-space Newmark scheme, the classical index-3
//! Newmark scheme, explicit central differences and Newmark on
//! minimal/unconstrained coordinates, plus the trajectory driver.

mod classical;
mod minimal;
mod tangent;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

pub use classical::step_classical_index3;
pub use minimal::{
    simulate_minimal, step_newmark_minimal, CentralDifference, MinimalMethod, MinimalState,
    PendulumMinimal, SecondOrderSystem, UnconstrainedModel,
};
pub use tangent::{reduced_frequency, step_tangent_newmark, step_tangent_newmark_rotated};

use crate::error::{Error, Result};
use crate::linsolve::{Vector, DEFAULT_RANK_TOL};
use crate::model::{constraint_norms, mechanical_energy, ConstraintNorms, MultibodyModel, SystemState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewmarkParams {
    pub alpha: f64,
    pub beta: f64,
}

impl NewmarkParams {
    pub const FOX_GOODWIN: Self = Self {
        alpha: 0.5,
        beta: 1.0 / 12.0,
    };
    pub const TRAPEZOIDAL: Self = Self {
        alpha: 0.5,
        beta: 0.25,
    };
    pub const TUNED: Self = Self {
        alpha: 0.5001,
        beta: 0.2507,
    };
    /// Explicit member of the family; same stability limit as central differences.
    pub const CENTRAL_DIFFERENCE: Self = Self {
        alpha: 0.5,
        beta: 0.0,
    };

    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let p = Self { alpha, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && self.alpha.is_finite() && self.beta.is_finite()) {
            return Err(Error::Validation(format!(
                "Newmark parameters must be finite and non-negative, got α = {}, β = {}",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }

    /// Looks up a preset by name (`fox-goodwin`, `trapezoidal`, `tuned`, `central-difference`).
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "fox-goodwin" | "fg" => Some(Self::FOX_GOODWIN),
            "trapezoidal" => Some(Self::TRAPEZOIDAL),
            "tuned" => Some(Self::TUNED),
            "central-difference" | "cd" => Some(Self::CENTRAL_DIFFERENCE),
            _ => None,
        }
    }
}

impl fmt::Display for NewmarkParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "α = {}, β = {}", self.alpha, self.beta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub dt: f64,
    /// Relative tolerance on the iteration increments.
    pub tol: f64,
    /// Relative tolerance on the constraint residuals.
    pub tol_c: f64,
    pub max_iters: usize,
    pub rank_tol: f64,
    /// Any state component beyond this magnitude marks the run as diverged.
    pub blowup: f64,
    /// Record the largest natural frequency of the reduced system each step.
    pub record_omega: bool,
}

impl StepConfig {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Validation(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.tol > 0.0 && self.tol_c > 0.0) {
            return Err(Error::Validation("tolerances must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Validation("max_iters must be at least 1".into()));
        }
        if !(self.rank_tol > 0.0 && self.rank_tol < 1.0) {
            return Err(Error::Validation("rank_tol must lie in (0, 1)".into()));
        }
        if !(self.blowup > 0.0) {
            return Err(Error::Validation("blow-up bound must be positive".into()));
        }
        Ok(())
    }
}

impl Default for StepConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            tol: 1e-10,
            tol_c: 1e-10,
            max_iters: 50,
            rank_tol: DEFAULT_RANK_TOL,
            blowup: 1e6,
            record_omega: false,
        }
    }
}

/// Newmark update of position and velocity from the new acceleration.
pub fn newmark_kinematics(
    x: &Vector,
    xdot: &Vector,
    xddot: &Vector,
    xddot_next: &Vector,
    params: NewmarkParams,
    dt: f64,
) -> (Vector, Vector) {
    let (x_pred, xd_pred) = newmark_predictors(x, xdot, xddot, params, dt);
    (
        x_pred + xddot_next * (params.beta * dt * dt),
        xd_pred + xddot_next * (params.alpha * dt),
    )
}

/// The parts of the Newmark update that do not depend on the new acceleration.
pub(crate) fn newmark_predictors(
    x: &Vector,
    xdot: &Vector,
    xddot: &Vector,
    params: NewmarkParams,
    dt: f64,
) -> (Vector, Vector) {
    (
        x + xdot * dt + xddot * ((0.5 - params.beta) * dt * dt),
        xdot + xddot * ((1.0 - params.alpha) * dt),
    )
}

/// Relative change test shared by the implicit schemes.
pub(crate) fn small_change(delta: f64, reference: f64, tol: f64) -> bool {
    delta <= tol * (1.0 + reference)
}

/// Result of one implicit step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: SystemState,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    TangentNewmark,
    ClassicalIndex3,
    CentralDifference,
    NewmarkMinimal,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::TangentNewmark,
        Method::ClassicalIndex3,
        Method::CentralDifference,
        Method::NewmarkMinimal,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::TangentNewmark => "tangent-newmark",
            Method::ClassicalIndex3 => "classical-index3",
            Method::CentralDifference => "central-difference",
            Method::NewmarkMinimal => "newmark-minimal",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub state: SystemState,
    pub iterations: usize,
    pub norms: ConstraintNorms,
    pub energy: f64,
    pub omega_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrajectoryStatus {
    Completed,
    Diverged { t: f64, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub method: Method,
    pub params: NewmarkParams,
    pub dt: f64,
    pub records: Vec<StepRecord>,
    pub status: TrajectoryStatus,
    pub wall_time: Duration,
}

impl Trajectory {
    pub fn is_diverged(&self) -> bool {
        matches!(self.status, TrajectoryStatus::Diverged { .. })
    }

    pub fn last(&self) -> &StepRecord {
        self.records.last().expect("trajectories hold at least the initial record")
    }

    /// Largest `|x_i|` over all records for one coordinate.
    pub fn max_abs_coord(&self, i: usize) -> f64 {
        self.records.iter().map(|r| r.state.x[i].abs()).fold(0.0, f64::max)
    }
}

pub(crate) fn exceeds(state: &SystemState, bound: f64) -> Option<String> {
    if !state.is_finite() {
        return Some("non-finite state".into());
    }
    let worst = [&state.x, &state.xdot, &state.xddot, &state.lambda]
        .iter()
        .map(|v| v.amax())
        .fold(0.0, f64::max);
    (worst > bound).then(|| format!("state magnitude {worst:e} exceeds blow-up bound {bound:e}"))
}

pub(crate) fn step_count(t0: f64, t_end: f64, dt: f64) -> Result<usize> {
    if !(t_end >= t0) || !t_end.is_finite() {
        return Err(Error::Validation(format!("t_end = {t_end} precedes t0 = {t0}")));
    }
    let n = ((t_end - t0) / dt).round();
    if n > 1e9 {
        return Err(Error::Validation("too many steps".into()));
    }
    Ok(n as usize)
}

fn record(
    model: &MultibodyModel,
    state: SystemState,
    iterations: usize,
    cfg: &StepConfig,
) -> StepRecord {
    let norms = constraint_norms(model, &state.x, &state.xdot, &state.xddot);
    let energy = mechanical_energy(model, &state);
    let omega_max = if cfg.record_omega {
        reduced_frequency(model, &state, cfg.rank_tol).ok()
    } else {
        None
    };
    StepRecord {
        state,
        iterations,
        norms,
        energy,
        omega_max,
    }
}

/// Integrates `model` from `initial` to `t_end`. Step failures end the run
/// with a `Diverged` status and keep every record produced so far.
pub fn simulate(
    model: &MultibodyModel,
    method: Method,
    initial: &SystemState,
    params: NewmarkParams,
    cfg: &StepConfig,
    t_end: f64,
) -> Result<Trajectory> {
    params.validate()?;
    cfg.validate()?;
    initial.validate(model)?;
    let n_steps = step_count(initial.t, t_end, cfg.dt)?;

    if matches!(method, Method::CentralDifference | Method::NewmarkMinimal) {
        let system = UnconstrainedModel::new(model)?;
        let start = MinimalState {
            t: initial.t,
            q: initial.x.clone(),
            qd: initial.xdot.clone(),
            qdd: initial.xddot.clone(),
        };
        let minimal = match method {
            Method::CentralDifference => MinimalMethod::CentralDifference,
            _ => MinimalMethod::Newmark,
        };
        return simulate_minimal(&system, minimal, &start, params, cfg, t_end);
    }

    let clock = Instant::now();
    let mut records = vec![record(model, initial.clone(), 0, cfg)];
    let mut status = TrajectoryStatus::Completed;
    let mut current = initial.clone();
    for k in 1..=n_steps {
        let t_next = initial.t + k as f64 * cfg.dt;
        let step = match method {
            Method::TangentNewmark => step_tangent_newmark(model, &current, params, cfg),
            _ => step_classical_index3(model, &current, params, cfg),
        };
        match step {
            Ok(mut out) => {
                out.state.t = t_next;
                if let Some(reason) = exceeds(&out.state, cfg.blowup) {
                    status = TrajectoryStatus::Diverged { t: t_next, reason };
                    break;
                }
                current = out.state.clone();
                records.push(record(model, out.state, out.iterations, cfg));
            }
            Err(e) => {
                status = TrajectoryStatus::Diverged {
                    t: t_next,
                    reason: e.to_string(),
                };
                break;
            }
        }
    }
    Ok(Trajectory {
        method,
        params,
        dt: cfg.dt,
        records,
        status,
        wall_time: clock.elapsed(),
    })
}
