use super::tangent::residual_maxima;
use super::{newmark_predictors, small_change, NewmarkParams, StepConfig, StepOutcome};
use crate::error::{Error, Result};
use crate::linsolve::{Factorization, Matrix, Vector};
use crate::model::{
    constraint_jacobian, constraints, force_vector, linearize_equilibrium, MultibodyModel, SystemState,
};

/// One step of Newmark integration of the index-3 equations: Newton on
/// `(x, λ)` with `ẋ`, `ẍ` eliminated through the Newmark relations. Only the
/// position constraints are imposed.
pub fn step_classical_index3(
    model: &MultibodyModel,
    state: &SystemState,
    params: NewmarkParams,
    cfg: &StepConfig,
) -> Result<StepOutcome> {
    if !(params.beta > 0.0) {
        return Err(Error::Validation(
            "the index-3 scheme needs β > 0 to express ẍ in terms of x".into(),
        ));
    }
    let dt = cfg.dt;
    let t1 = state.t + dt;
    let n = model.n_coords();
    let m = model.n_constraints();
    let ab = params.beta * dt * dt;
    let (x_pred, xd_pred) = newmark_predictors(&state.x, &state.xdot, &state.xddot, params, dt);
    let kinematics = |x: &Vector| {
        let a = (x - &x_pred) / ab;
        let v = &xd_pred + &a * (params.alpha * dt);
        (v, a)
    };

    let mut x = &state.x + &state.xdot * dt + &state.xddot * (0.5 * dt * dt);
    let mut lambda = state.lambda.clone();
    let mut last = (f64::NAN, f64::NAN);

    for iter in 1..=cfg.max_iters {
        let (v, a) = kinematics(&x);
        let s = SystemState {
            t: t1,
            x: x.clone(),
            xdot: v,
            xddot: a,
            lambda: lambda.clone(),
        };
        let lin = linearize_equilibrium(model, &s);
        let h = constraint_jacobian(model, &x);
        let r = &lin.m * &s.xddot - force_vector(model, &s) - h.tr_mul(&lambda);
        let q = constraints(model, &x);

        let mut jac = Matrix::zeros(n + m, n + m);
        let top = &lin.m / ab + &lin.c * (params.alpha / (params.beta * dt)) + &lin.k;
        jac.view_mut((0, 0), (n, n)).copy_from(&top);
        jac.view_mut((0, n), (n, m)).copy_from(&(-h.transpose()));
        jac.view_mut((n, 0), (m, n)).copy_from(&h);
        let mut rhs = Vector::zeros(n + m);
        rhs.rows_mut(0, n).copy_from(&(-r));
        rhs.rows_mut(n, m).copy_from(&(-q));
        let delta = Factorization::new(&jac, cfg.rank_tol)?.solve(&rhs);

        let dx = delta.rows(0, n).into_owned();
        let dl = delta.rows(n, m).into_owned();
        x += &dx;
        lambda += &dl;
        if !(x.iter().chain(lambda.iter()).all(|c| c.is_finite())) {
            break;
        }
        let q_new = if m > 0 { constraints(model, &x).amax() } else { 0.0 };
        last = (dx.amax(), q_new);
        let converged = small_change(dx.amax(), x.amax(), cfg.tol)
            && (m == 0 || small_change(dl.amax(), lambda.amax(), cfg.tol))
            && small_change(q_new, x.amax(), cfg.tol_c);
        if converged {
            let (v, a) = kinematics(&x);
            let next = SystemState {
                t: t1,
                x,
                xdot: v,
                xddot: a,
                lambda,
            };
            return Ok(StepOutcome {
                state: next,
                iterations: iter,
            });
        }
    }
    let (v, a) = kinematics(&x);
    let probe = SystemState {
        t: t1,
        x,
        xdot: v,
        xddot: a,
        lambda,
    };
    let (_, qd, qdd) = if probe.is_finite() {
        residual_maxima(model, &probe)
    } else {
        (f64::NAN, f64::NAN, f64::NAN)
    };
    Err(Error::StepDivergence {
        t: t1,
        iterations: cfg.max_iters,
        increment: last.0,
        q_norm: last.1,
        qd_norm: qd,
        qdd_norm: qdd,
    })
}
