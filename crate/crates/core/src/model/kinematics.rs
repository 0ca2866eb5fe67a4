use nalgebra::Vector2;

use super::{add_point_jacobian, attachment_position, rot, rot_d, Attachment, BodyRef, MultibodyModel};
use crate::linsolve::{Matrix, Vector};

/// Anchor coincidence residuals `q = p_a − p_b`, two rows per joint.
pub fn constraints(model: &MultibodyModel, x: &Vector) -> Vector {
    let mut q = Vector::zeros(model.n_constraints());
    for (j, joint) in model.joints().iter().enumerate() {
        let d = attachment_position(x, &joint.a) - attachment_position(x, &joint.b);
        q[2 * j] = d.x;
        q[2 * j + 1] = d.y;
    }
    q
}

/// `H = ∂q/∂x`.
pub fn constraint_jacobian(model: &MultibodyModel, x: &Vector) -> Matrix {
    let mut h = Matrix::zeros(model.n_constraints(), model.n_coords());
    for (j, joint) in model.joints().iter().enumerate() {
        add_point_jacobian(&mut h, 2 * j, x, &joint.a, 1.0);
        add_point_jacobian(&mut h, 2 * j, x, &joint.b, -1.0);
    }
    h
}

fn add_theta_column(
    m: &mut Matrix,
    row: usize,
    att: &Attachment,
    sign: f64,
    column: impl Fn(usize, Vector2<f64>) -> Vector2<f64>,
) {
    if let BodyRef::Body(id) = att.body {
        let c = 3 * id.0 + 2;
        let v = column(c, att.point);
        m[(row, c)] += sign * v.x;
        m[(row + 1, c)] += sign * v.y;
    }
}

/// `Ḣ = dH/dt` along `ẋ`. Only angle columns are nonzero: `−R r̄ θ̇`.
pub fn jacobian_dot(model: &MultibodyModel, x: &Vector, xdot: &Vector) -> Matrix {
    let mut hd = Matrix::zeros(model.n_constraints(), model.n_coords());
    let col = |c: usize, p: Vector2<f64>| -(rot(x[c]) * p) * xdot[c];
    for (j, joint) in model.joints().iter().enumerate() {
        add_theta_column(&mut hd, 2 * j, &joint.a, 1.0, col);
        add_theta_column(&mut hd, 2 * j, &joint.b, -1.0, col);
    }
    hd
}

/// `Ḧ = d²H/dt²`: angle columns `−R′ r̄ θ̇² − R r̄ θ̈`.
pub fn jacobian_ddot(model: &MultibodyModel, x: &Vector, xdot: &Vector, xddot: &Vector) -> Matrix {
    let mut hdd = Matrix::zeros(model.n_constraints(), model.n_coords());
    let col = |c: usize, p: Vector2<f64>| {
        let w = xdot[c];
        -(rot_d(x[c]) * p) * (w * w) - (rot(x[c]) * p) * xddot[c]
    };
    for (j, joint) in model.joints().iter().enumerate() {
        add_theta_column(&mut hdd, 2 * j, &joint.a, 1.0, col);
        add_theta_column(&mut hdd, 2 * j, &joint.b, -1.0, col);
    }
    hdd
}

/// `∂(Hᵀλ)/∂x` at fixed `λ`; diagonal in the angle coordinates.
pub fn multiplier_stiffness(model: &MultibodyModel, x: &Vector, lambda: &Vector) -> Matrix {
    let n = model.n_coords();
    let mut d = Matrix::zeros(n, n);
    for (j, joint) in model.joints().iter().enumerate() {
        let l = Vector2::new(lambda[2 * j], lambda[2 * j + 1]);
        for (att, sign) in [(&joint.a, 1.0), (&joint.b, -1.0)] {
            if let BodyRef::Body(id) = att.body {
                let c = 3 * id.0 + 2;
                // d/dθ (R′ r̄)·λ = R″ r̄ · λ = −(R r̄)·λ
                d[(c, c)] -= sign * (rot(x[c]) * att.point).dot(&l);
            }
        }
    }
    d
}

/// Euclidean norms of the position, velocity and acceleration constraint
/// residuals `q`, `q̇ = H ẋ` and `q̈ = H ẍ + Ḣ ẋ`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConstraintNorms {
    pub position: f64,
    pub velocity: f64,
    pub acceleration: f64,
}

pub fn constraint_norms(model: &MultibodyModel, x: &Vector, xdot: &Vector, xddot: &Vector) -> ConstraintNorms {
    let h = constraint_jacobian(model, x);
    let hd = jacobian_dot(model, x, xdot);
    ConstraintNorms {
        position: constraints(model, x).norm(),
        velocity: (&h * xdot).norm(),
        acceleration: (&h * xddot + &hd * xdot).norm(),
    }
}
