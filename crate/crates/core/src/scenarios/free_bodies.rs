use nalgebra::Vector2;

use super::{resolve, Dynamics, Overrides, Scenario};
use crate::error::Result;
use crate::integrators::{Method, NewmarkParams};
use crate::linsolve::Vector;
use crate::model::{
    consistent_initial_state, Attachment, CoordinatePin, ForceElement, MultibodyModel, TorqueLaw,
};

const DEFAULTS: [(&str, f64); 5] = [
    ("stiffness", 50.0),
    ("damping", 0.2),
    ("free_length", 0.8),
    ("g", 9.81),
    ("torque", 0.5),
];

/// Two bodies tied by an off-center spring-damper under gravity and a
/// harmonic torque. No joints, so every integrator applies.
pub fn free_bodies(overrides: &Overrides) -> Result<Scenario> {
    let p = resolve("free-bodies", &DEFAULTS, overrides)?;
    let mut b = MultibodyModel::builder();
    let a = b.body("a", 1.0, 0.1);
    let c = b.body("b", 2.0, 0.3);
    b.gravity(p["g"], Vector2::new(0.0, -1.0));
    b.force(ForceElement::LinearSpringDamper {
        a: Attachment::body(a, 0.1, 0.05),
        b: Attachment::body(c, -0.2, 0.0),
        stiffness: p["stiffness"],
        damping: p["damping"],
        free_length: p["free_length"],
    });
    b.force(ForceElement::AppliedTorque {
        body: a,
        law: TorqueLaw::Harmonic {
            amplitude: p["torque"],
            frequency: 2.0,
        },
    });
    let model = b.build()?;
    let x = Vector::from_column_slice(&[0.0, 0.0, 0.1, 1.0, 0.2, -0.3]);
    let v = [0.3, 1.0, 0.5, -0.2, 0.5, 0.0];
    let pins: Vec<CoordinatePin> = v
        .iter()
        .enumerate()
        .map(|(index, &value)| CoordinatePin { index, value })
        .collect();
    let initial = consistent_initial_state(&model, 0.0, &x, &pins)?;
    Ok(Scenario {
        name: "free-bodies",
        dynamics: Dynamics::Multibody { model, initial },
        method: Method::TangentNewmark,
        params: NewmarkParams::FOX_GOODWIN,
        dt: 1e-2,
        t_end: 10.0,
        parameters: p,
    })
}

