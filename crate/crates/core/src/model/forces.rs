use nalgebra::{Matrix2, Vector2};

use super::{
    add_point_jacobian, attachment_position, attachment_velocity, rot, Attachment, BodyRef,
    ForceElement, MultibodyModel, SystemState,
};
use crate::linsolve::{Matrix, Vector};

/// Spring-damper kinematics shared by the force, its derivatives and the energy.
struct Axial {
    /// Unit vector from `a` to `b`.
    u: Vector2<f64>,
    length: f64,
    /// `∂(p_b − p_a)/∂x`.
    jac: Matrix,
}

fn axial(n: usize, x: &Vector, a: &Attachment, b: &Attachment) -> Option<Axial> {
    let d = attachment_position(x, b) - attachment_position(x, a);
    let length = d.norm();
    if !(length > 0.0) {
        return None;
    }
    let mut jac = Matrix::zeros(2, n);
    add_point_jacobian(&mut jac, 0, x, b, 1.0);
    add_point_jacobian(&mut jac, 0, x, a, -1.0);
    Some(Axial {
        u: d / length,
        length,
        jac,
    })
}

fn joint_angles(model: &MultibodyModel, joint: usize, v: &Vector) -> (Option<usize>, Option<usize>, f64) {
    let j = &model.joints()[joint];
    let idx = |r: BodyRef| match r {
        BodyRef::Ground => None,
        BodyRef::Body(id) => Some(3 * id.0 + 2),
    };
    let ia = idx(j.a.body);
    let ib = idx(j.b.body);
    let rel = ib.map_or(0.0, |i| v[i]) - ia.map_or(0.0, |i| v[i]);
    (ia, ib, rel)
}

/// Constant block-diagonal `diag(mᵢ, mᵢ, Iᵢ)`.
pub fn mass_matrix(model: &MultibodyModel) -> Matrix {
    let mut m = Matrix::zeros(model.n_coords(), model.n_coords());
    for (i, body) in model.bodies().iter().enumerate() {
        m[(3 * i, 3 * i)] = body.mass;
        m[(3 * i + 1, 3 * i + 1)] = body.mass;
        m[(3 * i + 2, 3 * i + 2)] = body.inertia;
    }
    m
}

/// Applied generalized forces at `state` (no constraint reactions).
pub fn force_vector(model: &MultibodyModel, state: &SystemState) -> Vector {
    let n = model.n_coords();
    let x = &state.x;
    let xd = &state.xdot;
    let mut f = Vector::zeros(n);
    for elem in model.forces() {
        match elem {
            ForceElement::Gravity { g, direction } => {
                for (i, body) in model.bodies().iter().enumerate() {
                    f[3 * i] += body.mass * g * direction.x;
                    f[3 * i + 1] += body.mass * g * direction.y;
                }
            }
            ForceElement::LinearSpringDamper {
                a,
                b,
                stiffness,
                damping,
                free_length,
            } => {
                if let Some(ax) = axial(n, x, a, b) {
                    let rate = ax.u.dot(&(attachment_velocity(x, xd, b) - attachment_velocity(x, xd, a)));
                    let tension = stiffness * (ax.length - free_length) + damping * rate;
                    f -= ax.jac.tr_mul(&(ax.u * tension));
                }
            }
            ForceElement::TorsionalSpringDamper {
                joint,
                stiffness,
                damping,
                rest_angle,
            } => {
                let (ia, ib, rel) = joint_angles(model, *joint, x);
                let (_, _, rel_rate) = joint_angles(model, *joint, xd);
                let torque = stiffness * (rel - rest_angle) + damping * rel_rate;
                if let Some(i) = ib {
                    f[i] -= torque;
                }
                if let Some(i) = ia {
                    f[i] += torque;
                }
            }
            ForceElement::AppliedTorque { body, law } => {
                f[3 * body.0 + 2] += law.eval(state.t);
            }
        }
    }
    f
}

/// Analytic `(∂f/∂x, ∂f/∂ẋ)` of [`force_vector`].
pub fn force_jacobians(model: &MultibodyModel, state: &SystemState) -> (Matrix, Matrix) {
    let n = model.n_coords();
    let x = &state.x;
    let xd = &state.xdot;
    let mut dfdx = Matrix::zeros(n, n);
    let mut dfdv = Matrix::zeros(n, n);
    for elem in model.forces() {
        match elem {
            ForceElement::Gravity { .. } | ForceElement::AppliedTorque { .. } => {}
            ForceElement::LinearSpringDamper {
                a,
                b,
                stiffness,
                damping,
                free_length,
            } => {
                let Some(ax) = axial(n, x, a, b) else { continue };
                let w = &ax.jac * xd;
                let w = Vector2::new(w[0], w[1]);
                let rate = ax.u.dot(&w);
                let tension = stiffness * (ax.length - free_length) + damping * rate;
                let force = ax.u * tension;

                // d(Jẋ)/dx: angle columns −R r̄ θ̇ (sign per side).
                let mut jdot = Matrix::zeros(2, n);
                for (att, sign) in [(b, 1.0), (a, -1.0)] {
                    if let BodyRef::Body(id) = att.body {
                        let c = 3 * id.0 + 2;
                        let v = -(rot(x[c]) * att.point) * xd[c] * sign;
                        jdot[(0, c)] += v.x;
                        jdot[(1, c)] += v.y;
                    }
                }

                let proj = Matrix2::identity() - ax.u * ax.u.transpose();
                let proj = Matrix::from_row_slice(2, 2, proj.as_slice()).transpose();
                let u = Matrix::from_column_slice(2, 1, ax.u.as_slice());
                let w_m = Matrix::from_column_slice(2, 1, w.as_slice());
                let du_dx = &proj * &ax.jac / ax.length;
                let dtension_dx = u.tr_mul(&ax.jac) * *stiffness
                    + (w_m.tr_mul(&du_dx) + u.tr_mul(&jdot)) * *damping;

                // f = −Jᵀ (tension · u)
                let mut term = ax.jac.tr_mul(&(&u * &dtension_dx + &du_dx * tension));
                // Derivative of Jᵀ itself: angle diagonal, d/dθ (R′ r̄) = −R r̄.
                for (att, sign) in [(b, 1.0), (a, -1.0)] {
                    if let BodyRef::Body(id) = att.body {
                        let c = 3 * id.0 + 2;
                        term[(c, c)] += sign * (-(rot(x[c]) * att.point)).dot(&force);
                    }
                }
                dfdx -= term;
                dfdv -= ax.jac.tr_mul(&(&u * u.tr_mul(&ax.jac))) * *damping;
            }
            ForceElement::TorsionalSpringDamper {
                joint,
                stiffness,
                damping,
                ..
            } => {
                let (ia, ib, _) = joint_angles(model, *joint, x);
                // torque = k (θ_b − θ_a − θ₀) + c (θ̇_b − θ̇_a); f_b −= torque, f_a += torque
                for (row, rs) in [(ib, -1.0), (ia, 1.0)] {
                    let Some(r) = row else { continue };
                    for (col, cs) in [(ib, 1.0), (ia, -1.0)] {
                        let Some(c) = col else { continue };
                        dfdx[(r, c)] += rs * cs * stiffness;
                        dfdv[(r, c)] += rs * cs * damping;
                    }
                }
            }
        }
    }
    (dfdx, dfdv)
}

/// Kinetic plus potential energy. Gravity potential is measured from the
/// global origin; applied torques are not conservative and do not enter.
pub fn mechanical_energy(model: &MultibodyModel, state: &SystemState) -> f64 {
    let x = &state.x;
    let xd = &state.xdot;
    let mut e = 0.0;
    for (i, body) in model.bodies().iter().enumerate() {
        let c = 3 * i;
        e += 0.5 * body.mass * (xd[c] * xd[c] + xd[c + 1] * xd[c + 1]);
        e += 0.5 * body.inertia * xd[c + 2] * xd[c + 2];
    }
    for elem in model.forces() {
        match elem {
            ForceElement::Gravity { g, direction } => {
                for (i, body) in model.bodies().iter().enumerate() {
                    let r = Vector2::new(x[3 * i], x[3 * i + 1]);
                    e -= body.mass * g * direction.dot(&r);
                }
            }
            ForceElement::LinearSpringDamper {
                a,
                b,
                stiffness,
                free_length,
                ..
            } => {
                let l = (attachment_position(x, b) - attachment_position(x, a)).norm();
                e += 0.5 * stiffness * (l - free_length).powi(2);
            }
            ForceElement::TorsionalSpringDamper {
                joint,
                stiffness,
                rest_angle,
                ..
            } => {
                let (_, _, rel) = joint_angles(model, *joint, x);
                e += 0.5 * stiffness * (rel - rest_angle).powi(2);
            }
            ForceElement::AppliedTorque { .. } => {}
        }
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Attachment, BodyId, TorqueLaw};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn down() -> Vector2<f64> {
        Vector2::new(0.0, -1.0)
    }

    fn state(t: f64, x: &[f64], xd: &[f64]) -> SystemState {
        SystemState {
            t,
            x: Vector::from_column_slice(x),
            xdot: Vector::from_column_slice(xd),
            xddot: Vector::zeros(x.len()),
            lambda: Vector::zeros(0),
        }
    }

    #[test]
    fn mass_matrix_blocks() {
        let mut b = MultibodyModel::builder();
        b.body("a", 1.0, 0.5);
        b.body("b", 2.0, 0.0);
        let m = mass_matrix(&b.build().unwrap());
        assert_eq!(m.shape(), (6, 6));
        let d = [1.0, 1.0, 0.5, 2.0, 2.0, 0.0];
        assert_eq!(m, Matrix::from_diagonal(&Vector::from_column_slice(&d)));
    }

    #[test]
    fn gravity_on_single_body() {
        let mut b = MultibodyModel::builder();
        b.body("b", 2.0, 1.0);
        b.gravity(9.8, down());
        let m = b.build().unwrap();
        let f = force_vector(&m, &state(0.0, &[0.0; 3], &[0.0; 3]));
        assert_relative_eq!(f, Vector::from_column_slice(&[0.0, -9.8 * 2.0, 0.0]));
    }

    #[test]
    fn relaxed_spring_exerts_nothing() {
        let mut b = MultibodyModel::builder();
        let p = b.body("b", 1.0, 1.0);
        b.force(ForceElement::LinearSpringDamper {
            a: Attachment::ground(0.0, 0.0),
            b: Attachment::body(p, 0.0, 0.0),
            stiffness: 100.0,
            damping: 0.0,
            free_length: 2.0,
        });
        let m = b.build().unwrap();
        let f = force_vector(&m, &state(0.0, &[2.0, 0.0, 0.7], &[0.0, 3.0, 1.0]));
        assert!(f.amax() < 1e-12);
    }

    #[test]
    fn harmonic_torque_peak() {
        let mut b = MultibodyModel::builder();
        let p = b.body("b", 1.0, 0.0);
        b.force(ForceElement::AppliedTorque {
            body: p,
            law: TorqueLaw::Harmonic {
                amplitude: 0.1,
                frequency: 0.1,
            },
        });
        let m = b.build().unwrap();
        let t = std::f64::consts::PI / (2.0 * 0.1);
        let f = force_vector(&m, &state(t, &[0.0; 3], &[0.0; 3]));
        assert_relative_eq!(f[2], 0.1, epsilon = 1e-15);
    }

    #[test]
    fn energy_examples() {
        let mut b = MultibodyModel::builder();
        b.body("b", 1.0, 0.0);
        b.gravity(9.8, down());
        let m = b.build().unwrap();
        assert_eq!(mechanical_energy(&m, &state(0.0, &[0.0; 3], &[0.0; 3])), 0.0);
        let e = mechanical_energy(&m, &state(0.0, &[0.0, -0.5, 0.0], &[0.0; 3]));
        assert_relative_eq!(e, -4.9, epsilon = 1e-14);

        let mut b = MultibodyModel::builder();
        b.body("b", 2.0, 3.0);
        let m = b.build().unwrap();
        let e = mechanical_energy(&m, &state(0.0, &[0.0; 3], &[1.0, 0.0, 0.0]));
        assert_relative_eq!(e, 1.0);
    }

    #[test]
    fn parabola_conserves_energy() {
        let mut b = MultibodyModel::builder();
        b.body("b", 1.5, 0.2);
        b.gravity(9.81, down());
        let m = b.build().unwrap();
        let (v0x, v0y, w) = (1.0, 4.0, 0.3);
        let e0 = mechanical_energy(&m, &state(0.0, &[0.0; 3], &[v0x, v0y, w]));
        for k in 1..20 {
            let t = 0.05 * k as f64;
            let x = [v0x * t, v0y * t - 0.5 * 9.81 * t * t, w * t];
            let xd = [v0x, v0y - 9.81 * t, w];
            let e = mechanical_energy(&m, &state(t, &x, &xd));
            assert!((e - e0).abs() < 1e-12);
        }
    }

    fn spring_model(params: &[f64]) -> MultibodyModel {
        let mut b = MultibodyModel::builder();
        let p = b.body("p", 1.0, 0.3);
        let q = b.body("q", 2.0, 0.1);
        let j = b.revolute(Attachment::body(p, 0.1, 0.0), Attachment::body(q, -0.2, 0.1));
        b.gravity(9.81, down());
        b.force(ForceElement::LinearSpringDamper {
            a: Attachment::body(p, params[0], params[1]),
            b: Attachment::body(q, params[2], params[3]),
            stiffness: 50.0,
            damping: 3.0,
            free_length: 0.4,
        });
        b.force(ForceElement::LinearSpringDamper {
            a: Attachment::ground(params[4], params[5]),
            b: Attachment::body(p, params[6], params[7]),
            stiffness: 20.0,
            damping: 1.5,
            free_length: 0.7,
        });
        b.force(ForceElement::TorsionalSpringDamper {
            joint: j,
            stiffness: 4.0,
            damping: 0.5,
            rest_angle: 0.2,
        });
        b.force(ForceElement::AppliedTorque {
            body: BodyId(1),
            law: TorqueLaw::Constant(0.4),
        });
        b.build().unwrap()
    }

    proptest! {
        #[test]
        fn force_jacobians_match_finite_differences(
            params in prop::collection::vec(-1.0f64..1.0, 8),
            xs in prop::collection::vec(-1.0f64..1.0, 6),
            vs in prop::collection::vec(-2.0f64..2.0, 6),
        ) {
            let m = spring_model(&params);
            let mut xv = xs.clone();
            xv[3] += 1.5; // keep the springs away from zero length
            let s = state(0.3, &xv, &vs);
            let (dfdx, dfdv) = force_jacobians(&m, &s);
            let h = 1e-6;
            for k in 0..6 {
                let mut sp = s.clone();
                let mut sm = s.clone();
                sp.x[k] += h;
                sm.x[k] -= h;
                let col = (force_vector(&m, &sp) - force_vector(&m, &sm)) / (2.0 * h);
                prop_assert!((dfdx.column(k) - &col).amax() <= 1e-6 * (1.0 + col.amax()));

                let mut sp = s.clone();
                let mut sm = s.clone();
                sp.xdot[k] += h;
                sm.xdot[k] -= h;
                let col = (force_vector(&m, &sp) - force_vector(&m, &sm)) / (2.0 * h);
                prop_assert!((dfdv.column(k) - &col).amax() <= 1e-6 * (1.0 + col.amax()));
            }
        }

        #[test]
        fn conservative_forces_are_energy_gradients(
            params in prop::collection::vec(-1.0f64..1.0, 8),
            xs in prop::collection::vec(-1.0f64..1.0, 6),
        ) {
            // With zero velocity the non-torque forces equal −∇V.
            let m = spring_model(&params);
            let mut xv = xs.clone();
            xv[3] += 1.5;
            let s = state(0.0, &xv, &[0.0; 6]);
            let mut f = force_vector(&m, &s);
            f[5] -= 0.4;
            let h = 1e-6;
            for k in 0..6 {
                let mut sp = s.clone();
                let mut sm = s.clone();
                sp.x[k] += h;
                sm.x[k] -= h;
                let grad = (mechanical_energy(&m, &sp) - mechanical_energy(&m, &sm)) / (2.0 * h);
                prop_assert!((f[k] + grad).abs() <= 1e-5 * (1.0 + grad.abs()));
            }
        }
    }
}
