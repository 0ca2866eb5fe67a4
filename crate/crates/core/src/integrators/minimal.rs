use std::time::Instant;

use super::tangent::solve_dense;
use super::{
    exceeds, newmark_predictors, small_change, step_count, Method, NewmarkParams, StepConfig,
    StepRecord, Trajectory, TrajectoryStatus,
};
use crate::error::{Error, Result};
use crate::linsolve::{cholesky_lower, max_generalized_frequency, Matrix, Vector, PIVOT_TOL};
use crate::model::{
    force_jacobians, force_vector, mass_matrix, mechanical_energy, ConstraintNorms, MultibodyModel,
    SystemState, TorqueLaw,
};

/// `M q̈ = f(t, q, q̇)` with a constant mass matrix.
pub trait SecondOrderSystem {
    fn dim(&self) -> usize;
    fn mass(&self) -> Matrix;
    fn force(&self, t: f64, q: &Vector, qd: &Vector) -> Vector;
    /// `−∂f/∂q`.
    fn stiffness(&self, t: f64, q: &Vector, qd: &Vector) -> Matrix;
    /// `−∂f/∂q̇`.
    fn damping(&self, t: f64, q: &Vector, qd: &Vector) -> Matrix;
    fn energy(&self, q: &Vector, qd: &Vector) -> f64;
}

/// Simple pendulum in its rotation angle: `m L² θ̈ = T(t) − m g L sin θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumMinimal {
    pub mass: f64,
    pub length: f64,
    pub g: f64,
    pub torque: TorqueLaw,
}

impl SecondOrderSystem for PendulumMinimal {
    fn dim(&self) -> usize {
        1
    }

    fn mass(&self) -> Matrix {
        Matrix::from_element(1, 1, self.mass * self.length * self.length)
    }

    fn force(&self, t: f64, q: &Vector, _qd: &Vector) -> Vector {
        Vector::from_element(1, self.torque.eval(t) - self.mass * self.g * self.length * q[0].sin())
    }

    fn stiffness(&self, _t: f64, q: &Vector, _qd: &Vector) -> Matrix {
        Matrix::from_element(1, 1, self.mass * self.g * self.length * q[0].cos())
    }

    fn damping(&self, _t: f64, _q: &Vector, _qd: &Vector) -> Matrix {
        Matrix::zeros(1, 1)
    }

    fn energy(&self, q: &Vector, qd: &Vector) -> f64 {
        let ml = self.mass * self.length;
        0.5 * ml * self.length * qd[0] * qd[0] - ml * self.g * q[0].cos()
    }
}

/// A joint-free multibody model seen as an ordinary second-order system.
#[derive(Debug, Clone)]
pub struct UnconstrainedModel<'a> {
    model: &'a MultibodyModel,
    mass: Matrix,
}

impl<'a> UnconstrainedModel<'a> {
    pub fn new(model: &'a MultibodyModel) -> Result<Self> {
        if model.n_constraints() > 0 {
            return Err(Error::Validation(
                "minimal-coordinate integrators need a model without joints".into(),
            ));
        }
        Ok(Self {
            model,
            mass: mass_matrix(model),
        })
    }

    fn state(&self, t: f64, q: &Vector, qd: &Vector) -> SystemState {
        SystemState {
            t,
            x: q.clone(),
            xdot: qd.clone(),
            xddot: Vector::zeros(q.len()),
            lambda: Vector::zeros(0),
        }
    }
}

impl SecondOrderSystem for UnconstrainedModel<'_> {
    fn dim(&self) -> usize {
        self.model.n_coords()
    }

    fn mass(&self) -> Matrix {
        self.mass.clone()
    }

    fn force(&self, t: f64, q: &Vector, qd: &Vector) -> Vector {
        force_vector(self.model, &self.state(t, q, qd))
    }

    fn stiffness(&self, t: f64, q: &Vector, qd: &Vector) -> Matrix {
        -force_jacobians(self.model, &self.state(t, q, qd)).0
    }

    fn damping(&self, t: f64, q: &Vector, qd: &Vector) -> Matrix {
        -force_jacobians(self.model, &self.state(t, q, qd)).1
    }

    fn energy(&self, q: &Vector, qd: &Vector) -> f64 {
        mechanical_energy(self.model, &self.state(0.0, q, qd))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimalState {
    pub t: f64,
    pub q: Vector,
    pub qd: Vector,
    pub qdd: Vector,
}

impl MinimalState {
    /// State with the acceleration taken from the equations of motion.
    pub fn new(sys: &dyn SecondOrderSystem, t: f64, q: Vector, qd: Vector) -> Result<Self> {
        if q.len() != sys.dim() || qd.len() != sys.dim() {
            return Err(Error::Validation(format!(
                "state has length {}/{}, system has {} coordinates",
                q.len(),
                qd.len(),
                sys.dim()
            )));
        }
        let qdd = MassSolver::new(&sys.mass())?.solve(&sys.force(t, &q, &qd));
        Ok(Self { t, q, qd, qdd })
    }

    pub fn into_system_state(self) -> SystemState {
        SystemState {
            t: self.t,
            x: self.q,
            xdot: self.qd,
            xddot: self.qdd,
            lambda: Vector::zeros(0),
        }
    }
}

struct MassSolver {
    l: Matrix,
}

impl MassSolver {
    fn new(m: &Matrix) -> Result<Self> {
        let l = cholesky_lower(m, PIVOT_TOL).map_err(|(pivot, value)| Error::SingularMass { pivot, value })?;
        Ok(Self { l })
    }

    fn solve(&self, b: &Vector) -> Vector {
        let y = self.l.solve_lower_triangular(b).expect("nonsingular factor");
        self.l.tr_solve_lower_triangular(&y).expect("nonsingular factor")
    }
}

/// Explicit central differences, `q_{n+1} = 2q_n − q_{n−1} + Δt² M⁻¹ f_n`,
/// started with `q₁ = q₀ + Δt q̇₀ + ½Δt² q̈₀`.
pub struct CentralDifference<'a> {
    sys: &'a dyn SecondOrderSystem,
    solver: MassSolver,
    dt: f64,
    previous: Option<Vector>,
    current: MinimalState,
}

impl<'a> CentralDifference<'a> {
    pub fn new(sys: &'a dyn SecondOrderSystem, start: &MinimalState, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Validation(format!("dt must be positive, got {dt}")));
        }
        Ok(Self {
            sys,
            solver: MassSolver::new(&sys.mass())?,
            dt,
            previous: None,
            current: start.clone(),
        })
    }

    pub fn state(&self) -> &MinimalState {
        &self.current
    }

    pub fn step(&mut self) -> MinimalState {
        let dt = self.dt;
        let cur = &self.current;
        let q_next = match &self.previous {
            None => &cur.q + &cur.qd * dt + &cur.qdd * (0.5 * dt * dt),
            Some(prev) => &cur.q * 2.0 - prev + &cur.qdd * (dt * dt),
        };
        let t_next = cur.t + dt;
        let slope = (&q_next - &cur.q) / dt;
        // Velocity estimate for the force, then refined with the new acceleration.
        let qd_est = &slope + &cur.qdd * (0.5 * dt);
        let qdd_next = self.solver.solve(&self.sys.force(t_next, &q_next, &qd_est));
        let qd_next = &slope + &qdd_next * (0.5 * dt);
        let next = MinimalState {
            t: t_next,
            q: q_next,
            qd: qd_next,
            qdd: qdd_next,
        };
        self.previous = Some(std::mem::replace(&mut self.current, next.clone()).q);
        next
    }
}

/// One Newton-iterated Newmark step on `M q̈ = f(t, q, q̇)`.
pub fn step_newmark_minimal(
    sys: &dyn SecondOrderSystem,
    state: &MinimalState,
    params: NewmarkParams,
    cfg: &StepConfig,
) -> Result<(MinimalState, usize)> {
    let dt = cfg.dt;
    let t1 = state.t + dt;
    let (ab, aa) = (params.beta * dt * dt, params.alpha * dt);
    let mass = sys.mass();
    let (q_pred, qd_pred) = newmark_predictors(&state.q, &state.qd, &state.qdd, params, dt);

    let mut q0 = &state.q + &state.qd * dt + &state.qdd * (0.5 * dt * dt);
    let mut qd0 = &state.qd + &state.qdd * dt;
    let mut last = f64::NAN;
    for iter in 1..=cfg.max_iters {
        let k = sys.stiffness(t1, &q0, &qd0);
        let c = sys.damping(t1, &q0, &qd0);
        let f = sys.force(t1, &q0, &qd0) + &k * &q0 + &c * &qd0;
        let eff = &mass + &c * aa + &k * ab;
        let rhs = f - &c * &qd_pred - &k * &q_pred;
        let qdd1 = solve_dense(eff, &rhs)?;
        let q1 = &q_pred + &qdd1 * ab;
        let qd1 = &qd_pred + &qdd1 * aa;
        if !q1.iter().chain(qd1.iter()).chain(qdd1.iter()).all(|v| v.is_finite()) {
            break;
        }
        let dq = (&q1 - &q0).amax();
        last = dq;
        if small_change(dq, q1.amax(), cfg.tol) {
            let next = MinimalState {
                t: t1,
                q: q1,
                qd: qd1,
                qdd: qdd1,
            };
            return Ok((next, iter));
        }
        q0 = q1;
        qd0 = qd1;
    }
    Err(Error::StepDivergence {
        t: t1,
        iterations: cfg.max_iters,
        increment: last,
        q_norm: 0.0,
        qd_norm: 0.0,
        qdd_norm: 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinimalMethod {
    CentralDifference,
    Newmark,
}

fn minimal_record(
    sys: &dyn SecondOrderSystem,
    s: MinimalState,
    iterations: usize,
    cfg: &StepConfig,
) -> StepRecord {
    let energy = sys.energy(&s.q, &s.qd);
    let omega_max = if cfg.record_omega {
        max_generalized_frequency(&sys.stiffness(s.t, &s.q, &s.qd), &sys.mass()).ok()
    } else {
        None
    };
    StepRecord {
        state: s.into_system_state(),
        iterations,
        norms: ConstraintNorms::default(),
        energy,
        omega_max,
    }
}

/// Trajectory driver for minimal-coordinate systems. Records carry `q` in
/// the `x` slots and no multipliers.
pub fn simulate_minimal(
    sys: &dyn SecondOrderSystem,
    method: MinimalMethod,
    start: &MinimalState,
    params: NewmarkParams,
    cfg: &StepConfig,
    t_end: f64,
) -> Result<Trajectory> {
    cfg.validate()?;
    params.validate()?;
    let n_steps = step_count(start.t, t_end, cfg.dt)?;
    let clock = Instant::now();
    let (tag, params) = match method {
        MinimalMethod::CentralDifference => (Method::CentralDifference, NewmarkParams::CENTRAL_DIFFERENCE),
        MinimalMethod::Newmark => (Method::NewmarkMinimal, params),
    };
    let mut records = vec![minimal_record(sys, start.clone(), 0, cfg)];
    let mut status = TrajectoryStatus::Completed;

    let mut cd = match method {
        MinimalMethod::CentralDifference => Some(CentralDifference::new(sys, start, cfg.dt)?),
        MinimalMethod::Newmark => None,
    };
    let mut current = start.clone();
    for k in 1..=n_steps {
        let t_next = start.t + k as f64 * cfg.dt;
        let step = match cd.as_mut() {
            Some(cd) => Ok((cd.step(), 0)),
            None => step_newmark_minimal(sys, &current, params, cfg),
        };
        match step {
            Ok((mut next, iters)) => {
                next.t = t_next;
                let probe = next.clone().into_system_state();
                if let Some(reason) = exceeds(&probe, cfg.blowup) {
                    status = TrajectoryStatus::Diverged { t: t_next, reason };
                    break;
                }
                current = next.clone();
                records.push(minimal_record(sys, next, iters, cfg));
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
        method: tag,
        params,
        dt: cfg.dt,
        records,
        status,
        wall_time: clock.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pendulum() -> PendulumMinimal {
        PendulumMinimal {
            mass: 1.0,
            length: 1.0,
            g: 9.8,
            torque: TorqueLaw::Constant(0.0),
        }
    }

    fn free_particle() -> MultibodyModel {
        let mut b = MultibodyModel::builder();
        b.body("p", 2.0, 0.5);
        b.build().unwrap()
    }

    #[test]
    fn pendulum_at_rest_is_in_equilibrium() {
        let p = pendulum();
        let z = Vector::zeros(1);
        assert_eq!(p.force(0.0, &z, &z)[0], 0.0);
        let s = MinimalState::new(&p, 0.0, z.clone(), z).unwrap();
        assert_eq!(s.qdd[0], 0.0);
    }

    #[test]
    fn central_difference_without_force_is_uniform() {
        let m = free_particle();
        let sys = UnconstrainedModel::new(&m).unwrap();
        let q = Vector::from_column_slice(&[0.0, 1.0, 0.0]);
        let qd = Vector::from_column_slice(&[1.0, -2.0, 0.5]);
        let start = MinimalState::new(&sys, 0.0, q.clone(), qd.clone()).unwrap();
        let mut cd = CentralDifference::new(&sys, &start, 0.1).unwrap();
        for _ in 0..10 {
            cd.step();
        }
        let s = cd.state();
        assert_relative_eq!(s.q, &q + &qd * 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.qd, qd, epsilon = 1e-12);
    }

    #[test]
    fn central_difference_rejects_singular_mass() {
        let mut b = MultibodyModel::builder();
        b.body("p", 1.0, 0.0);
        let m = b.build().unwrap();
        let sys = UnconstrainedModel::new(&m).unwrap();
        let z = Vector::zeros(3);
        let start = MinimalState {
            t: 0.0,
            q: z.clone(),
            qd: z.clone(),
            qdd: z,
        };
        assert!(matches!(
            CentralDifference::new(&sys, &start, 0.1),
            Err(Error::SingularMass { pivot: 2, .. })
        ));
    }

    #[test]
    fn joints_are_rejected() {
        let mut b = MultibodyModel::builder();
        let p = b.body("p", 1.0, 0.0);
        b.revolute(
            crate::model::Attachment::body(p, 0.0, 1.0),
            crate::model::Attachment::ground(0.0, 0.0),
        );
        assert!(UnconstrainedModel::new(&b.build().unwrap()).is_err());
    }

    #[test]
    fn newmark_matches_linear_recurrence() {
        // Small-angle pendulum: compare with the closed-form linear Newmark map.
        let p = pendulum();
        let cfg = StepConfig::new(0.05);
        let params = NewmarkParams::FOX_GOODWIN;
        let q0 = 1e-6;
        let mut s = MinimalState::new(&p, 0.0, Vector::from_element(1, q0), Vector::zeros(1)).unwrap();
        let (w2, dt) = (9.8, 0.05);
        let (mut x, mut v, mut a) = (q0, 0.0, -w2 * q0);
        for _ in 0..40 {
            s = step_newmark_minimal(&p, &s, params, &cfg).unwrap().0;
            let xp = x + dt * v + dt * dt * (0.5 - params.beta) * a;
            let vp = v + dt * (1.0 - params.alpha) * a;
            let a1 = -w2 * xp / (1.0 + params.beta * dt * dt * w2);
            x = xp + params.beta * dt * dt * a1;
            v = vp + params.alpha * dt * a1;
            a = a1;
        }
        assert!((s.q[0] - x).abs() < 1e-15);
        assert!((s.qd[0] - v).abs() < 1e-14);
    }

    #[test]
    fn trapezoidal_conserves_pendulum_energy_at_small_steps() {
        let p = pendulum();
        let start = MinimalState::new(&p, 0.0, Vector::from_element(1, 0.5), Vector::zeros(1)).unwrap();
        let cfg = StepConfig::new(1e-3);
        let traj = simulate_minimal(&p, MinimalMethod::Newmark, &start, NewmarkParams::TRAPEZOIDAL, &cfg, 2.0)
            .unwrap();
        assert!(!traj.is_diverged());
        let e0 = traj.records[0].energy;
        let drift = traj.records.iter().map(|r| (r.energy - e0).abs()).fold(0.0, f64::max);
        assert!(drift < 1e-5);
    }
}
