//! Planar rigid-body models in absolute Cartesian coordinates.
//!
//! Each body contributes `(x, y, θ)` of its center of gravity, laid out as
//! `(x₀, y₀, θ₀, x₁, y₁, θ₁, …)`. Every revolute joint contributes two
//! constraint rows, in joint order.

mod assembly;
mod forces;
mod kinematics;

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::linsolve::{Matrix, Vector};

pub use assembly::{
    assemble_position, consistent_initial_state, linearize_equilibrium, recover_multipliers,
    CoordinatePin, EquilibriumLinearization, ASSEMBLY_MAX_ITERS, ASSEMBLY_TOL,
};
pub(crate) use assembly::recover_with;
pub use forces::{force_jacobians, force_vector, mass_matrix, mechanical_energy};
pub use kinematics::{
    constraint_jacobian, constraint_norms, constraints, jacobian_dot, jacobian_ddot,
    multiplier_stiffness, ConstraintNorms,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BodyId(pub usize);

/// One side of a joint or a force element: a body, or the fixed ground.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BodyRef {
    Ground,
    Body(BodyId),
}

impl From<BodyId> for BodyRef {
    fn from(id: BodyId) -> Self {
        BodyRef::Body(id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Body {
    pub name: String,
    pub mass: f64,
    /// Polar moment about the center of gravity.
    pub inertia: f64,
}

/// A point on a body (local coordinates relative to the center of gravity)
/// or on the ground (global coordinates).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Attachment {
    pub body: BodyRef,
    pub point: Vector2<f64>,
}

impl Attachment {
    pub fn ground(x: f64, y: f64) -> Self {
        Self {
            body: BodyRef::Ground,
            point: Vector2::new(x, y),
        }
    }

    pub fn body(id: BodyId, x: f64, y: f64) -> Self {
        Self {
            body: BodyRef::Body(id),
            point: Vector2::new(x, y),
        }
    }
}

/// Pin joint forcing two attachment points to coincide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RevoluteJoint {
    pub a: Attachment,
    pub b: Attachment,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TorqueLaw {
    Constant(f64),
    /// `amplitude · sin(frequency · t)`.
    Harmonic { amplitude: f64, frequency: f64 },
}

impl TorqueLaw {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            TorqueLaw::Constant(v) => v,
            TorqueLaw::Harmonic {
                amplitude,
                frequency,
            } => amplitude * (frequency * t).sin(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ForceElement {
    /// Uniform field acting on every body; `direction` is normalized at build.
    Gravity { g: f64, direction: Vector2<f64> },
    /// Axial spring-damper between two points; positive force is tension.
    LinearSpringDamper {
        a: Attachment,
        b: Attachment,
        stiffness: f64,
        damping: f64,
        free_length: f64,
    },
    /// Rotational spring-damper on the relative angle `θ_b − θ_a` of a joint.
    TorsionalSpringDamper {
        joint: usize,
        stiffness: f64,
        damping: f64,
        rest_angle: f64,
    },
    AppliedTorque { body: BodyId, law: TorqueLaw },
}

/// Immutable description of a planar mechanism.
#[derive(Debug, Clone, PartialEq)]
pub struct MultibodyModel {
    bodies: Vec<Body>,
    joints: Vec<RevoluteJoint>,
    forces: Vec<ForceElement>,
}

impl MultibodyModel {
    pub fn builder() -> ModelBuilder {
        ModelBuilder::default()
    }

    pub fn bodies(&self) -> &[Body] {
        &self.bodies
    }

    pub fn joints(&self) -> &[RevoluteJoint] {
        &self.joints
    }

    pub fn forces(&self) -> &[ForceElement] {
        &self.forces
    }

    pub fn n_coords(&self) -> usize {
        3 * self.bodies.len()
    }

    pub fn n_constraints(&self) -> usize {
        2 * self.joints.len()
    }

    /// Coordinate index of `(x, y, θ)` for a body.
    pub fn coord_index(&self, body: BodyId) -> usize {
        3 * body.0
    }

    pub fn body_id(&self, name: &str) -> Option<BodyId> {
        self.bodies.iter().position(|b| b.name == name).map(BodyId)
    }

    /// Deterministic digest of every parameter of the model.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        let mut put = |v: f64| v.to_bits().hash(&mut h);
        for b in &self.bodies {
            put(b.mass);
            put(b.inertia);
        }
        for j in &self.joints {
            for att in [&j.a, &j.b] {
                put(att_code(att.body));
                put(att.point.x);
                put(att.point.y);
            }
        }
        for f in &self.forces {
            match f {
                ForceElement::Gravity { g, direction } => {
                    put(1.0);
                    put(*g);
                    put(direction.x);
                    put(direction.y);
                }
                ForceElement::LinearSpringDamper {
                    a,
                    b,
                    stiffness,
                    damping,
                    free_length,
                } => {
                    put(2.0);
                    for att in [a, b] {
                        put(att_code(att.body));
                        put(att.point.x);
                        put(att.point.y);
                    }
                    put(*stiffness);
                    put(*damping);
                    put(*free_length);
                }
                ForceElement::TorsionalSpringDamper {
                    joint,
                    stiffness,
                    damping,
                    rest_angle,
                } => {
                    put(3.0);
                    put(*joint as f64);
                    put(*stiffness);
                    put(*damping);
                    put(*rest_angle);
                }
                ForceElement::AppliedTorque { body, law } => {
                    put(4.0);
                    put(body.0 as f64);
                    match law {
                        TorqueLaw::Constant(v) => put(*v),
                        TorqueLaw::Harmonic {
                            amplitude,
                            frequency,
                        } => {
                            put(*amplitude);
                            put(*frequency);
                        }
                    }
                }
            }
        }
        for b in &self.bodies {
            b.name.hash(&mut h);
        }
        h.finish()
    }

    pub(crate) fn check_len(&self, v: &Vector, what: &str) -> Result<()> {
        if v.len() != self.n_coords() {
            return Err(Error::Validation(format!(
                "{what} has length {}, model has {} coordinates",
                v.len(),
                self.n_coords()
            )));
        }
        Ok(())
    }
}

fn att_code(body: BodyRef) -> f64 {
    match body {
        BodyRef::Ground => -1.0,
        BodyRef::Body(id) => id.0 as f64,
    }
}

#[derive(Debug, Default, Clone)]
pub struct ModelBuilder {
    bodies: Vec<Body>,
    joints: Vec<RevoluteJoint>,
    forces: Vec<ForceElement>,
}

impl ModelBuilder {
    pub fn body(&mut self, name: impl Into<String>, mass: f64, inertia: f64) -> BodyId {
        self.bodies.push(Body {
            name: name.into(),
            mass,
            inertia,
        });
        BodyId(self.bodies.len() - 1)
    }

    /// Adds a revolute joint and returns its index.
    pub fn revolute(&mut self, a: Attachment, b: Attachment) -> usize {
        self.joints.push(RevoluteJoint { a, b });
        self.joints.len() - 1
    }

    pub fn force(&mut self, f: ForceElement) -> &mut Self {
        self.forces.push(f);
        self
    }

    pub fn gravity(&mut self, g: f64, direction: Vector2<f64>) -> &mut Self {
        self.force(ForceElement::Gravity { g, direction })
    }

    pub fn build(self) -> Result<MultibodyModel> {
        let n_bodies = self.bodies.len();
        let finite = |v: f64, what: &str| -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::Model(format!("{what} must be finite")))
            }
        };
        let check_ref = |r: BodyRef| -> Result<()> {
            match r {
                BodyRef::Body(id) if id.0 >= n_bodies => {
                    Err(Error::Model(format!("unknown body id {}", id.0)))
                }
                _ => Ok(()),
            }
        };

        for b in &self.bodies {
            finite(b.mass, "body mass")?;
            finite(b.inertia, "body inertia")?;
            if b.mass < 0.0 || b.inertia < 0.0 {
                return Err(Error::Model(format!(
                    "body '{}' has negative mass or inertia",
                    b.name
                )));
            }
        }
        for (i, j) in self.joints.iter().enumerate() {
            check_ref(j.a.body)?;
            check_ref(j.b.body)?;
            if j.a.body == BodyRef::Ground && j.b.body == BodyRef::Ground {
                return Err(Error::Model(format!("joint {i} connects ground to ground")));
            }
            for p in [j.a.point, j.b.point] {
                finite(p.x, "joint anchor")?;
                finite(p.y, "joint anchor")?;
            }
        }

        let mut forces = Vec::with_capacity(self.forces.len());
        for f in self.forces {
            match f {
                ForceElement::Gravity { g, direction } => {
                    finite(g, "gravity")?;
                    let n = direction.norm();
                    if !(n > 0.0 && n.is_finite()) {
                        return Err(Error::Model("gravity direction must be nonzero".into()));
                    }
                    forces.push(ForceElement::Gravity {
                        g,
                        direction: direction / n,
                    });
                }
                ForceElement::LinearSpringDamper {
                    a,
                    b,
                    stiffness,
                    damping,
                    free_length,
                } => {
                    check_ref(a.body)?;
                    check_ref(b.body)?;
                    for v in [stiffness, damping, free_length, a.point.x, a.point.y, b.point.x, b.point.y] {
                        finite(v, "spring-damper parameter")?;
                    }
                    if stiffness < 0.0 || damping < 0.0 {
                        return Err(Error::Model("spring-damper coefficients must be ≥ 0".into()));
                    }
                    if free_length <= 0.0 {
                        return Err(Error::Model("spring free length must be > 0".into()));
                    }
                    forces.push(ForceElement::LinearSpringDamper {
                        a,
                        b,
                        stiffness,
                        damping,
                        free_length,
                    });
                }
                ForceElement::TorsionalSpringDamper {
                    joint,
                    stiffness,
                    damping,
                    rest_angle,
                } => {
                    if joint >= self.joints.len() {
                        return Err(Error::Model(format!("torsional element on unknown joint {joint}")));
                    }
                    for v in [stiffness, damping, rest_angle] {
                        finite(v, "torsional parameter")?;
                    }
                    if stiffness < 0.0 || damping < 0.0 {
                        return Err(Error::Model("torsional coefficients must be ≥ 0".into()));
                    }
                    forces.push(f);
                }
                ForceElement::AppliedTorque { body, law } => {
                    check_ref(BodyRef::Body(body))?;
                    match law {
                        TorqueLaw::Constant(v) => finite(v, "torque")?,
                        TorqueLaw::Harmonic {
                            amplitude,
                            frequency,
                        } => {
                            finite(amplitude, "torque amplitude")?;
                            finite(frequency, "torque frequency")?;
                        }
                    }
                    forces.push(f);
                }
            }
        }

        Ok(MultibodyModel {
            bodies: self.bodies,
            joints: self.joints,
            forces,
        })
    }
}

/// Full-coordinate state of a model at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub t: f64,
    pub x: Vector,
    pub xdot: Vector,
    pub xddot: Vector,
    pub lambda: Vector,
}

impl SystemState {
    pub fn at_rest(model: &MultibodyModel, t: f64, x: Vector) -> Self {
        let n = model.n_coords();
        Self {
            t,
            x,
            xdot: Vector::zeros(n),
            xddot: Vector::zeros(n),
            lambda: Vector::zeros(model.n_constraints()),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && [&self.x, &self.xdot, &self.xddot, &self.lambda]
                .iter()
                .all(|v| v.iter().all(|c| c.is_finite()))
    }

    pub fn validate(&self, model: &MultibodyModel) -> Result<()> {
        model.check_len(&self.x, "x")?;
        model.check_len(&self.xdot, "xdot")?;
        model.check_len(&self.xddot, "xddot")?;
        if self.lambda.len() != model.n_constraints() {
            return Err(Error::Validation(format!(
                "lambda has length {}, model has {} constraints",
                self.lambda.len(),
                model.n_constraints()
            )));
        }
        if !self.is_finite() {
            return Err(Error::Validation("state contains non-finite values".into()));
        }
        Ok(())
    }
}

pub(crate) fn rot(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// `dR/dθ`.
pub(crate) fn rot_d(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(-s, -c, c, -s)
}

pub(crate) fn body_pose(x: &Vector, id: BodyId) -> (Vector2<f64>, f64) {
    let i = 3 * id.0;
    (Vector2::new(x[i], x[i + 1]), x[i + 2])
}

/// Global position of an attachment point.
pub(crate) fn attachment_position(x: &Vector, att: &Attachment) -> Vector2<f64> {
    match att.body {
        BodyRef::Ground => att.point,
        BodyRef::Body(id) => {
            let (r, th) = body_pose(x, id);
            r + rot(th) * att.point
        }
    }
}

/// Global velocity of an attachment point.
pub(crate) fn attachment_velocity(x: &Vector, xdot: &Vector, att: &Attachment) -> Vector2<f64> {
    match att.body {
        BodyRef::Ground => Vector2::zeros(),
        BodyRef::Body(id) => {
            let (_, th) = body_pose(x, id);
            let (v, om) = body_pose(xdot, id);
            v + rot_d(th) * att.point * om
        }
    }
}

/// Adds `sign · ∂p/∂x` of an attachment point to rows `row..row+2` of `j`.
pub(crate) fn add_point_jacobian(
    j: &mut Matrix,
    row: usize,
    x: &Vector,
    att: &Attachment,
    sign: f64,
) {
    if let BodyRef::Body(id) = att.body {
        let c = 3 * id.0;
        let lever = rot_d(x[c + 2]) * att.point;
        j[(row, c)] += sign;
        j[(row + 1, c + 1)] += sign;
        j[(row, c + 2)] += sign * lever.x;
        j[(row + 1, c + 2)] += sign * lever.y;
    }
}
