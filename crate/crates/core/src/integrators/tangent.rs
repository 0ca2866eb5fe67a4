use super::{newmark_predictors, small_change, NewmarkParams, StepConfig, StepOutcome};
use crate::error::{Error, Result};
use crate::linsolve::{max_generalized_frequency, Matrix, Vector};
use crate::model::{
    constraint_jacobian, constraints, jacobian_dot, linearize_equilibrium, recover_multipliers,
    recover_with, MultibodyModel, SystemState,
};
use crate::tangent::TangentFrame;

pub(crate) fn solve_dense(a: Matrix, b: &Vector) -> Result<Vector> {
    if a.nrows() == 0 {
        return Ok(Vector::zeros(0));
    }
    a.lu()
        .solve(b)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Model("effective iteration matrix is singular".into()))
}

/// Max-norms of `q`, `q̇ = Hẋ` and `q̈ = Hẍ + Ḣẋ`.
pub(crate) fn residual_maxima(model: &MultibodyModel, s: &SystemState) -> (f64, f64, f64) {
    if model.n_constraints() == 0 {
        return (0.0, 0.0, 0.0);
    }
    let h = constraint_jacobian(model, &s.x);
    let hd = jacobian_dot(model, &s.x, &s.xdot);
    (
        constraints(model, &s.x).amax(),
        (&h * &s.xdot).amax(),
        (&h * &s.xddot + hd * &s.xdot).amax(),
    )
}

/// One step of Newmark integration carried out in the tangent chart of the
/// constraints, re-linearized every iteration.
pub fn step_tangent_newmark(
    model: &MultibodyModel,
    state: &SystemState,
    params: NewmarkParams,
    cfg: &StepConfig,
) -> Result<StepOutcome> {
    tangent_step(model, state, params, cfg, None)
}

/// Same step with every chart basis `N` replaced by `N Q`. The result
/// should not depend on the orthogonal `Q`.
pub fn step_tangent_newmark_rotated(
    model: &MultibodyModel,
    state: &SystemState,
    params: NewmarkParams,
    cfg: &StepConfig,
    q: &Matrix,
) -> Result<StepOutcome> {
    tangent_step(model, state, params, cfg, Some(q))
}

fn tangent_step(
    model: &MultibodyModel,
    state: &SystemState,
    params: NewmarkParams,
    cfg: &StepConfig,
    rotation: Option<&Matrix>,
) -> Result<StepOutcome> {
    let dt = cfg.dt;
    let t1 = state.t + dt;
    let (ab, aa) = (params.beta * dt * dt, params.alpha * dt);

    let mut x0 = &state.x + &state.xdot * dt + &state.xddot * (0.5 * dt * dt);
    let mut xd0 = &state.xdot + &state.xddot * dt;
    let mut xdd0 = state.xddot.clone();
    let mut lambda = state.lambda.clone();
    let mut last = (f64::NAN, f64::NAN, f64::NAN, f64::NAN);

    for iter in 1..=cfg.max_iters {
        let mut frame = TangentFrame::build(model, &x0, &xd0, &xdd0, cfg.rank_tol)?;
        if let Some(q) = rotation {
            frame = frame.with_rotated_basis(q)?;
        }
        let (a, ad, add) = frame.project_state(state);
        let lin = linearize_equilibrium(
            model,
            &SystemState {
                t: t1,
                x: x0.clone(),
                xdot: xd0.clone(),
                xddot: xdd0.clone(),
                lambda: lambda.clone(),
            },
        );
        let red = frame.reduce(&lin)?;
        let (a_pred, ad_pred) = newmark_predictors(&a, &ad, &add, params, dt);
        let eff = &red.m + &red.c * aa + &red.k * ab;
        let rhs = &red.f - &red.c * &ad_pred - &red.k * &a_pred;
        let add1 = solve_dense(eff, &rhs)?;
        let a1 = a_pred + &add1 * ab;
        let ad1 = ad_pred + &add1 * aa;

        let mut next = SystemState {
            t: t1,
            x: frame.reconstruct_position(&a1),
            xdot: frame.reconstruct_velocity(&a1, &ad1),
            xddot: frame.reconstruct_acceleration(&a1, &ad1, &add1),
            lambda: Vector::zeros(0),
        };
        next.lambda = recover_with(model, &next, frame.factorization());
        if !next.is_finite() {
            break;
        }

        let dx = (&next.x - &x0).amax();
        let dxd = (&next.xdot - &xd0).amax();
        let dxdd = (&next.xddot - &xdd0).amax();
        let (q, qd, qdd) = residual_maxima(model, &next);
        last = (dx.max(dxd * dt).max(dxdd * dt * dt), q, qd, qdd);
        let (sx, sv, sa) = (next.x.amax(), next.xdot.amax(), next.xddot.amax());
        // Near singular configurations ẍ carries noise amplified by the
        // conditioning of H, so only the position increment is tested.
        let converged = small_change(dx, sx, cfg.tol)
            && small_change(q, sx, cfg.tol_c)
            && small_change(qd, sv, cfg.tol_c)
            && small_change(qdd, sa, cfg.tol_c);
        if converged {
            next.lambda = recover_multipliers(model, &next)?;
            return Ok(StepOutcome {
                state: next,
                iterations: iter,
            });
        }
        x0 = next.x;
        xd0 = next.xdot;
        xdd0 = next.xddot;
        lambda = next.lambda;
    }
    Err(Error::StepDivergence {
        t: t1,
        iterations: cfg.max_iters,
        increment: last.0,
        q_norm: last.1,
        qd_norm: last.2,
        qdd_norm: last.3,
    })
}

/// Largest natural frequency of the tangent-reduced system at `state`.
pub fn reduced_frequency(model: &MultibodyModel, state: &SystemState, rank_tol: f64) -> Result<f64> {
    let frame = TangentFrame::build(model, &state.x, &state.xdot, &state.xddot, rank_tol)?;
    let red = frame.reduce(&linearize_equilibrium(model, state))?;
    max_generalized_frequency(&red.k, &red.m)
}
