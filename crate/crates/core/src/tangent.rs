//! Per-step tangent chart: the affine parametrization of all motions that
//! satisfy the constraints linearized at `(x₀, ẋ₀, ẍ₀)`,
//!
//! ```text
//! x = x_p + N α
//! ẋ = ẋ_p + N α̇ + Ẋ_p α
//! ẍ = ẍ_p + Ẍ_p1 α + X_p2 α̇ + N α̈
//! ```

use crate::error::{Error, Result};
use crate::linsolve::{
    cholesky_lower, ensure_finite_vector, symmetric_part, Factorization, Matrix, Vector, PIVOT_TOL,
};
use crate::model::{
    constraint_jacobian, constraints, jacobian_ddot, jacobian_dot, EquilibriumLinearization,
    MultibodyModel, SystemState,
};

#[derive(Debug, Clone)]
pub struct TangentFrame {
    pub x0: Vector,
    pub xdot0: Vector,
    pub xddot0: Vector,
    pub h: Matrix,
    pub h_dot: Matrix,
    pub h_ddot: Matrix,
    /// Right-hand side of the linearized position constraint `H x = b_L`.
    pub b_l: Vector,
    pub x_p: Vector,
    pub n_h: Matrix,
    pub xdot_p: Vector,
    pub xdot_p_mat: Matrix,
    pub xddot_p: Vector,
    pub xddot_p1: Matrix,
    pub x_p2: Matrix,
    fact: Factorization,
}

/// `Nᵀ`-projected equations `M_R α̈ + C_R α̇ + K_R α = f_R`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSystem {
    pub m: Matrix,
    pub c: Matrix,
    pub k: Matrix,
    pub f: Vector,
}

impl TangentFrame {
    pub fn build(
        model: &MultibodyModel,
        x0: &Vector,
        xdot0: &Vector,
        xddot0: &Vector,
        rank_tol: f64,
    ) -> Result<Self> {
        for (v, what) in [(x0, "x0"), (xdot0, "xdot0"), (xddot0, "xddot0")] {
            model.check_len(v, what)?;
            ensure_finite_vector(v, what)?;
        }
        let h = constraint_jacobian(model, x0);
        let h_dot = jacobian_dot(model, x0, xdot0);
        let h_ddot = jacobian_ddot(model, x0, xdot0, xddot0);
        let fact = Factorization::new(&h, rank_tol)?;

        let b_l = &h * x0 - constraints(model, x0);
        let x_p = fact.solve(&b_l);
        let n_h = fact.null_space();

        let dx = x0 - &x_p;
        let xdot_p = fact.solve(&(&h_dot * &dx));
        let xdot_p_mat = fact.solve_many(&(-(&h_dot * &n_h)));
        let xddot_p = fact.solve(&(&h_dot * xdot0 + &h_ddot * &dx - (&h_dot * &xdot_p) * 2.0));
        let xddot_p1 = fact.solve_many(&(-(&h_dot * &xdot_p_mat) * 2.0 - &h_ddot * &n_h));
        let x_p2 = &xdot_p_mat * 2.0;

        Ok(Self {
            x0: x0.clone(),
            xdot0: xdot0.clone(),
            xddot0: xddot0.clone(),
            h,
            h_dot,
            h_ddot,
            b_l,
            x_p,
            n_h,
            xdot_p,
            xdot_p_mat,
            xddot_p,
            xddot_p1,
            x_p2,
            fact,
        })
    }

    /// Number of chart coordinates.
    pub fn dim(&self) -> usize {
        self.n_h.ncols()
    }

    /// Factorization of `H(x₀)`, reusable for multiplier recovery.
    pub fn factorization(&self) -> &Factorization {
        &self.fact
    }

    pub fn reconstruct_position(&self, alpha: &Vector) -> Vector {
        &self.x_p + &self.n_h * alpha
    }

    pub fn reconstruct_velocity(&self, alpha: &Vector, alpha_dot: &Vector) -> Vector {
        &self.xdot_p + &self.n_h * alpha_dot + &self.xdot_p_mat * alpha
    }

    pub fn reconstruct_acceleration(&self, alpha: &Vector, alpha_dot: &Vector, alpha_ddot: &Vector) -> Vector {
        &self.xddot_p + &self.xddot_p1 * alpha + &self.x_p2 * alpha_dot + &self.n_h * alpha_ddot
    }

    /// Orthogonal projection of a full state onto the chart, level by level.
    pub fn project(&self, x: &Vector, xdot: &Vector, xddot: &Vector) -> (Vector, Vector, Vector) {
        let nt = self.n_h.transpose();
        let a = &nt * (x - &self.x_p);
        let ad = &nt * (xdot - &self.xdot_p - &self.xdot_p_mat * &a);
        let add = &nt * (xddot - &self.xddot_p - &self.xddot_p1 * &a - &self.x_p2 * &ad);
        (a, ad, add)
    }

    pub fn project_state(&self, state: &SystemState) -> (Vector, Vector, Vector) {
        self.project(&state.x, &state.xdot, &state.xddot)
    }

    /// `H x − b_L`.
    pub fn position_residual(&self, x: &Vector) -> Vector {
        &self.h * x - &self.b_l
    }

    /// `H ẋ + Ḣ (x − x₀)`.
    pub fn velocity_residual(&self, x: &Vector, xdot: &Vector) -> Vector {
        &self.h * xdot + &self.h_dot * (x - &self.x0)
    }

    /// `H ẍ + Ḧ (x − x₀) + 2Ḣ ẋ − Ḣ ẋ₀`.
    pub fn acceleration_residual(&self, x: &Vector, xdot: &Vector, xddot: &Vector) -> Vector {
        &self.h * xddot + &self.h_ddot * (x - &self.x0) + &self.h_dot * xdot * 2.0 - &self.h_dot * &self.xdot0
    }

    /// Projects a linearized equilibrium onto the chart.
    pub fn reduce(&self, lin: &EquilibriumLinearization) -> Result<ReducedSystem> {
        let n = &self.n_h;
        let nt = n.transpose();
        let m = &nt * &lin.m * n;
        let c = &nt * (&lin.c * n + &lin.m * &self.xdot_p_mat * 2.0);
        let k = &nt * (&lin.k * n + &lin.c * &self.xdot_p_mat + &lin.m * &self.xddot_p1);
        let f = &nt * (&lin.f - &lin.k * &self.x_p - &lin.c * &self.xdot_p - &lin.m * &self.xddot_p);
        if m.nrows() > 0 {
            cholesky_lower(&symmetric_part(&m), PIVOT_TOL)
                .map_err(|(pivot, value)| Error::SingularReducedMass { pivot, value })?;
        }
        Ok(ReducedSystem { m, c, k, f })
    }

    /// Same chart with the basis replaced by `N Q` for an orthogonal `Q`.
    pub fn with_rotated_basis(&self, q: &Matrix) -> Result<Self> {
        let k = self.dim();
        if q.shape() != (k, k) {
            return Err(Error::Validation(format!(
                "basis rotation must be {k}×{k}, got {:?}",
                q.shape()
            )));
        }
        if (q.transpose() * q - Matrix::identity(k, k)).amax() > 1e-10 {
            return Err(Error::Validation("basis rotation is not orthogonal".into()));
        }
        let mut out = self.clone();
        out.n_h = &self.n_h * q;
        out.xdot_p_mat = &self.xdot_p_mat * q;
        out.xddot_p1 = &self.xddot_p1 * q;
        out.x_p2 = &self.x_p2 * q;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linsolve::{max_generalized_frequency, DEFAULT_RANK_TOL};
    use crate::model::{
        assemble_position, consistent_initial_state, linearize_equilibrium, Attachment, ForceElement,
    };
    use approx::assert_relative_eq;
    use nalgebra::Vector2;
    use proptest::prelude::*;

    fn pendulum() -> MultibodyModel {
        let mut b = MultibodyModel::builder();
        let p = b.body("bob", 1.0, 0.0);
        b.revolute(Attachment::body(p, 0.0, 1.0), Attachment::ground(0.0, 0.0));
        b.gravity(9.8, Vector2::new(0.0, -1.0));
        b.build().unwrap()
    }

    fn double_pendulum() -> MultibodyModel {
        let mut b = MultibodyModel::builder();
        let a = b.body("a", 1.0, 1.0 / 12.0);
        let c = b.body("c", 1.0, 1.0 / 12.0);
        let j = b.revolute(Attachment::ground(0.0, 0.0), Attachment::body(a, -0.5, 0.0));
        b.revolute(Attachment::body(a, 0.5, 0.0), Attachment::body(c, -0.5, 0.0));
        b.gravity(9.81, Vector2::new(0.0, -1.0));
        b.force(ForceElement::TorsionalSpringDamper {
            joint: j,
            stiffness: 2.0,
            damping: 0.1,
            rest_angle: 0.0,
        });
        b.build().unwrap()
    }

    fn vec(v: &[f64]) -> Vector {
        Vector::from_column_slice(v)
    }

    fn frame_at(m: &MultibodyModel, s: &SystemState) -> TangentFrame {
        TangentFrame::build(m, &s.x, &s.xdot, &s.xddot, DEFAULT_RANK_TOL).unwrap()
    }

    #[test]
    fn free_body_chart_is_identity() {
        let mut b = MultibodyModel::builder();
        b.body("p", 2.0, 0.5);
        let m = b.build().unwrap();
        let x = vec(&[0.3, -0.2, 1.0]);
        let f = TangentFrame::build(&m, &x, &vec(&[1.0, 2.0, 3.0]), &vec(&[0.0, -9.8, 0.0]), DEFAULT_RANK_TOL)
            .unwrap();
        assert_eq!(f.dim(), 3);
        assert_eq!(f.x_p, Vector::zeros(3));
        assert_eq!(f.xdot_p_mat.amax(), 0.0);
        assert_eq!(f.xddot_p1.amax(), 0.0);
        let a = vec(&[1.0, 2.0, 3.0]);
        assert_relative_eq!(f.reconstruct_position(&a), a);
        let (p, pd, pdd) = f.project(&x, &vec(&[4.0, 5.0, 6.0]), &vec(&[7.0, 8.0, 9.0]));
        assert_relative_eq!(p, x);
        assert_relative_eq!(pd, vec(&[4.0, 5.0, 6.0]));
        assert_relative_eq!(pdd, vec(&[7.0, 8.0, 9.0]));
    }

    #[test]
    fn pendulum_chart_closes_linear_constraint() {
        let m = pendulum();
        let s = consistent_initial_state(&m, 0.0, &vec(&[0.0, -1.0, 0.0]), &[]).unwrap();
        let f = frame_at(&m, &s);
        assert_eq!(f.dim(), 1);
        for a in [-2.0, 0.0, 0.7] {
            assert!(f.position_residual(&f.reconstruct_position(&vec(&[a]))).amax() < 1e-14);
        }
    }

    #[test]
    fn reduced_pendulum_frequency() {
        let m = pendulum();
        for th in [0.0f64, 0.3, 1.0, -0.8] {
            let x = vec(&[th.sin(), -th.cos(), th]);
            let s = consistent_initial_state(&m, 0.0, &x, &[]).unwrap();
            let f = frame_at(&m, &s);
            let r = f.reduce(&linearize_equilibrium(&m, &s)).unwrap();
            let w = max_generalized_frequency(&r.k, &r.m).unwrap();
            assert_relative_eq!(w, (9.8 * th.cos()).sqrt(), epsilon = 1e-8);
        }
        // Horizontal at rest: no restoring stiffness at all.
        let x = vec(&[1.0, 0.0, std::f64::consts::FRAC_PI_2]);
        let s = consistent_initial_state(&m, 0.0, &x, &[]).unwrap();
        let r = frame_at(&m, &s).reduce(&linearize_equilibrium(&m, &s)).unwrap();
        assert!(r.k.amax() < 1e-12);
    }

    #[test]
    fn reaction_directions_drop_out() {
        let m = double_pendulum();
        let s = consistent_initial_state(&m, 0.0, &vec(&[0.5, 0.0, 0.0, 1.5, 0.0, 0.0]), &[]).unwrap();
        let f = frame_at(&m, &s);
        assert!((f.n_h.transpose() * f.h.transpose()).amax() <= 1e-10);
    }

    #[test]
    fn point_mass_without_constraint_is_singular() {
        let mut b = MultibodyModel::builder();
        b.body("p", 1.0, 0.0);
        let m = b.build().unwrap();
        let s = SystemState::at_rest(&m, 0.0, vec(&[0.0, 0.0, 0.0]));
        let f = frame_at(&m, &s);
        assert!(matches!(
            f.reduce(&linearize_equilibrium(&m, &s)),
            Err(Error::SingularReducedMass { .. })
        ));
    }

    #[test]
    fn projection_error_shrinks_with_step() {
        // Exact pendulum motion θ(t) = 0.4 sin(2t); chart built at t + dt.
        let m = pendulum();
        let state = |t: f64| {
            let (th, w, a) = (0.4 * (2.0 * t).sin(), 0.8 * (2.0 * t).cos(), -1.6 * (2.0 * t).sin());
            let (s, c) = th.sin_cos();
            SystemState {
                t,
                x: vec(&[s, -c, th]),
                xdot: vec(&[c * w, s * w, w]),
                xddot: vec(&[c * a - s * w * w, s * a + c * w * w, a]),
                lambda: Vector::zeros(2),
            }
        };
        let err = |dt: f64| {
            let next = state(0.3 + dt);
            let f = frame_at(&m, &next);
            let now = state(0.3);
            let (a, _, _) = f.project_state(&now);
            (f.reconstruct_position(&a) - &now.x).norm()
        };
        let mut prev = err(0.2);
        for k in 1..6 {
            let e = err(0.2 / 2f64.powi(k));
            assert!(e <= 0.5 * prev, "{e} vs {prev}");
            prev = e;
        }
    }

    #[test]
    fn basis_rotation_rejects_non_orthogonal() {
        let m = double_pendulum();
        let s = consistent_initial_state(&m, 0.0, &vec(&[0.5, 0.0, 0.0, 1.5, 0.0, 0.0]), &[]).unwrap();
        let f = frame_at(&m, &s);
        assert!(f.with_rotated_basis(&Matrix::identity(3, 3)).is_err());
        assert!(f.with_rotated_basis(&(Matrix::identity(2, 2) * 2.0)).is_err());
    }

    fn random_state(m: &MultibodyModel, v: &[f64]) -> SystemState {
        let n = m.n_coords();
        let guess = Vector::from_iterator(n, v.iter().copied().take(n));
        let (x, _) = assemble_position(m, &guess, &[]).unwrap();
        // Linearization points are deliberately off the velocity and
        // acceleration manifolds, as they are between iterations.
        SystemState {
            t: 0.0,
            x: &x + Vector::from_iterator(n, v[6..].iter().map(|c| 1e-3 * c).take(n)),
            xdot: Vector::from_iterator(n, v[12..].iter().copied().take(n)),
            xddot: Vector::from_iterator(n, v[18..].iter().copied().take(n)),
            lambda: Vector::zeros(m.n_constraints()),
        }
    }

    proptest! {
        #[test]
        fn chart_satisfies_linearized_constraints(
            v in prop::collection::vec(-1.5f64..1.5, 24),
            a in prop::collection::vec(-2.0f64..2.0, 6),
        ) {
            let m = double_pendulum();
            let s = random_state(&m, &v);
            let f = frame_at(&m, &s);
            prop_assert_eq!(f.dim(), 2);
            let al = Vector::from_column_slice(&a[0..2]);
            let ad = Vector::from_column_slice(&a[2..4]);
            let add = Vector::from_column_slice(&a[4..6]);
            let x = f.reconstruct_position(&al);
            let xd = f.reconstruct_velocity(&al, &ad);
            let xdd = f.reconstruct_acceleration(&al, &ad, &add);
            prop_assert!(f.position_residual(&x).amax() <= 1e-10);
            prop_assert!(f.velocity_residual(&x, &xd).amax() <= 1e-9);
            prop_assert!(f.acceleration_residual(&x, &xd, &xdd).amax() <= 1e-8);
            prop_assert!((&f.x_p2 - &f.xdot_p_mat * 2.0).amax() == 0.0);
            prop_assert!((&f.h * &f.n_h).amax() <= 1e-10 * (1.0 + f.h.norm()));
            prop_assert!((f.n_h.transpose() * &f.n_h - Matrix::identity(2, 2)).amax() <= 1e-12);
            prop_assert!((&f.h * &f.xdot_p_mat + &f.h_dot * &f.n_h).amax() <= 1e-10);

            // Round trip through the chart.
            let (p, pd, pdd) = f.project(&x, &xd, &xdd);
            prop_assert!((&p - &al).amax() <= 1e-12);
            prop_assert!((&pd - &ad).amax() <= 1e-11);
            prop_assert!((&pdd - &add).amax() <= 1e-10);
        }

        #[test]
        fn projection_is_idempotent(v in prop::collection::vec(-1.5f64..1.5, 24)) {
            let m = double_pendulum();
            let s = random_state(&m, &v);
            let f = frame_at(&m, &s);
            let (a, ad, add) = f.project_state(&s);
            let x = f.reconstruct_position(&a);
            let xd = f.reconstruct_velocity(&a, &ad);
            let xdd = f.reconstruct_acceleration(&a, &ad, &add);
            let (b, bd, bdd) = f.project(&x, &xd, &xdd);
            prop_assert!((&a - &b).amax() <= 1e-12);
            prop_assert!((&ad - &bd).amax() <= 1e-12);
            prop_assert!((&add - &bdd).amax() <= 1e-12 * (1.0 + add.amax()));
        }

        #[test]
        fn rotated_basis_spans_the_same_chart(
            v in prop::collection::vec(-1.5f64..1.5, 24),
            phi in 0.0f64..6.3,
            a in prop::collection::vec(-2.0f64..2.0, 6),
        ) {
            let m = double_pendulum();
            let s = random_state(&m, &v);
            let f = frame_at(&m, &s);
            let q = Matrix::from_row_slice(2, 2, &[phi.cos(), -phi.sin(), phi.sin(), phi.cos()]);
            let g = f.with_rotated_basis(&q).unwrap();
            let al = Vector::from_column_slice(&a[0..2]);
            let ad = Vector::from_column_slice(&a[2..4]);
            let add = Vector::from_column_slice(&a[4..6]);
            let (bl, bd, bdd) = (q.transpose() * &al, q.transpose() * &ad, q.transpose() * &add);
            prop_assert!((f.reconstruct_position(&al) - g.reconstruct_position(&bl)).amax() <= 1e-12);
            prop_assert!((f.reconstruct_velocity(&al, &ad) - g.reconstruct_velocity(&bl, &bd)).amax() <= 1e-12);
            prop_assert!(
                (f.reconstruct_acceleration(&al, &ad, &add) - g.reconstruct_acceleration(&bl, &bd, &bdd)).amax()
                    <= 1e-11
            );
        }
    }
}
