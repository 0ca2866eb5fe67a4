use super::{
    constraint_jacobian, constraints, force_jacobians, force_vector, jacobian_dot, mass_matrix,
    multiplier_stiffness, MultibodyModel, SystemState,
};
use crate::error::{Error, Result};
use crate::linsolve::{
    cholesky_lower, ensure_finite_vector, symmetric_part, Factorization, Matrix, Vector,
    DEFAULT_RANK_TOL, PIVOT_TOL,
};

pub const ASSEMBLY_TOL: f64 = 1e-12;
pub const ASSEMBLY_MAX_ITERS: usize = 100;

/// Residual allowed on `q` before a configuration counts as assembled for
/// [`consistent_initial_state`].
const CONSISTENCY_TOL: f64 = 1e-8;

/// Holds one coordinate at a prescribed value (a driving coordinate).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinatePin {
    pub index: usize,
    pub value: f64,
}

fn check_pins(model: &MultibodyModel, pins: &[CoordinatePin]) -> Result<()> {
    for p in pins {
        if p.index >= model.n_coords() || !p.value.is_finite() {
            return Err(Error::Validation(format!(
                "pin on coordinate {} (value {}) is invalid",
                p.index, p.value
            )));
        }
    }
    Ok(())
}

/// Stacks the pin rows below `h`.
fn pinned(h: &Matrix, pins: &[CoordinatePin]) -> Matrix {
    let (m, n) = h.shape();
    let mut a = Matrix::zeros(m + pins.len(), n);
    a.rows_mut(0, m).copy_from(h);
    for (r, p) in pins.iter().enumerate() {
        a[(m + r, p.index)] = 1.0;
    }
    a
}

/// Newton projection of `x_guess` onto `q(x) = 0` with optional pinned
/// coordinates. Returns the closed configuration and the iterations used.
pub fn assemble_position(
    model: &MultibodyModel,
    x_guess: &Vector,
    pins: &[CoordinatePin],
) -> Result<(Vector, usize)> {
    model.check_len(x_guess, "x_guess")?;
    ensure_finite_vector(x_guess, "x_guess")?;
    check_pins(model, pins)?;

    let m = model.n_constraints();
    let mut x = x_guess.clone();
    for iter in 0..=ASSEMBLY_MAX_ITERS {
        let q = constraints(model, &x);
        let mut r = Vector::zeros(m + pins.len());
        r.rows_mut(0, m).copy_from(&q);
        for (k, p) in pins.iter().enumerate() {
            r[m + k] = x[p.index] - p.value;
        }
        let res = r.amax();
        if !res.is_finite() {
            break;
        }
        if res <= ASSEMBLY_TOL {
            return Ok((x, iter));
        }
        if iter == ASSEMBLY_MAX_ITERS {
            return Err(Error::Assembly {
                iterations: iter,
                residual: res,
            });
        }
        let a = pinned(&constraint_jacobian(model, &x), pins);
        x -= Factorization::new(&a, DEFAULT_RANK_TOL)?.solve(&r);
    }
    Err(Error::Assembly {
        iterations: ASSEMBLY_MAX_ITERS,
        residual: f64::NAN,
    })
}

/// Fails when `NᵀMN` is not positive definite on the null space of `h`.
pub(crate) fn check_reduced_mass(m: &Matrix, n_basis: &Matrix) -> Result<()> {
    if n_basis.ncols() == 0 {
        return Ok(());
    }
    let mr = n_basis.tr_mul(&(m * n_basis));
    cholesky_lower(&symmetric_part(&mr), PIVOT_TOL)
        .map(|_| ())
        .map_err(|(pivot, value)| Error::SingularReducedMass { pivot, value })
}

/// Completes an assembled configuration to a consistent state at time `t`.
///
/// Velocities are the minimal-norm solution of `H ẋ = 0` with the pinned
/// velocity components; `(ẍ, λ)` solve `[M −Hᵀ; H 0](ẍ, λ) = (f, −Ḣẋ)`.
pub fn consistent_initial_state(
    model: &MultibodyModel,
    t: f64,
    x: &Vector,
    velocity_pins: &[CoordinatePin],
) -> Result<SystemState> {
    model.check_len(x, "x")?;
    ensure_finite_vector(x, "x")?;
    check_pins(model, velocity_pins)?;
    if !t.is_finite() {
        return Err(Error::Validation("t must be finite".into()));
    }
    let q = constraints(model, x);
    if !q.is_empty() && q.amax() > CONSISTENCY_TOL {
        return Err(Error::Validation(format!(
            "configuration is not assembled (|q| = {:e})",
            q.amax()
        )));
    }

    let n = model.n_coords();
    let m = model.n_constraints();
    let h = constraint_jacobian(model, x);
    let mass = mass_matrix(model);
    let fact = Factorization::new(&h, DEFAULT_RANK_TOL)?;
    check_reduced_mass(&mass, &fact.null_space())?;

    let a = pinned(&h, velocity_pins);
    let mut rhs = Vector::zeros(m + velocity_pins.len());
    for (k, p) in velocity_pins.iter().enumerate() {
        rhs[m + k] = p.value;
    }
    let xdot = Factorization::new(&a, DEFAULT_RANK_TOL)?.solve(&rhs);

    let mut state = SystemState::at_rest(model, t, x.clone());
    state.xdot = xdot;
    let f = force_vector(model, &state);
    let hd = jacobian_dot(model, x, &state.xdot);

    let mut aug = Matrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&mass);
    aug.view_mut((0, n), (n, m)).copy_from(&(-h.transpose()));
    aug.view_mut((n, 0), (m, n)).copy_from(&h);
    let mut b = Vector::zeros(n + m);
    b.rows_mut(0, n).copy_from(&f);
    b.rows_mut(n, m).copy_from(&(-(&hd * &state.xdot)));
    let sol = Factorization::new(&aug, DEFAULT_RANK_TOL)?.solve(&b);
    state.xddot = sol.rows(0, n).into_owned();
    state.lambda = sol.rows(n, m).into_owned();
    ensure_finite_vector(&state.xddot, "initial acceleration")?;
    Ok(state)
}

/// Constraint reactions `λ` from `Hᵀλ = M ẍ − f`, in the least-squares sense.
pub fn recover_multipliers(model: &MultibodyModel, state: &SystemState) -> Result<Vector> {
    let h = constraint_jacobian(model, &state.x);
    let fact = Factorization::new(&h, DEFAULT_RANK_TOL)?;
    Ok(recover_with(model, state, &fact))
}

/// [`recover_multipliers`] with an existing factorization of `H(x)`.
pub(crate) fn recover_with(model: &MultibodyModel, state: &SystemState, fact: &Factorization) -> Vector {
    let r = mass_matrix(model) * &state.xddot - force_vector(model, state);
    fact.solve_transposed(&r)
}

/// Linear model `M ẍ + C ẋ + K x = f + Hᵀλ` about a state.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumLinearization {
    pub m: Matrix,
    pub c: Matrix,
    pub k: Matrix,
    pub f: Vector,
}

/// Taylor expansion of the equations of motion about `state`, with the
/// geometric stiffness of `Hᵀλ` taken at `state.lambda`.
pub fn linearize_equilibrium(model: &MultibodyModel, state: &SystemState) -> EquilibriumLinearization {
    let (dfdx, dfdv) = force_jacobians(model, state);
    let k = -dfdx - multiplier_stiffness(model, &state.x, &state.lambda);
    let c = -dfdv;
    let f = force_vector(model, state) + &k * &state.x + &c * &state.xdot;
    EquilibriumLinearization {
        m: mass_matrix(model),
        c,
        k,
        f,
    }
}
