use nalgebra::Vector2;

use super::{positive, resolve, Dynamics, Overrides, Scenario};
use crate::error::Result;
use crate::integrators::{Method, MinimalState, NewmarkParams, PendulumMinimal};
use crate::linsolve::Vector;
use crate::model::{
    consistent_initial_state, Attachment, CoordinatePin, ForceElement, MultibodyModel, TorqueLaw,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PendulumVariant {
    /// One angle, `m L² θ̈ + m g L sin θ = T(t)`.
    Minimal,
    /// A point mass on a massless rod, pinned to the ground.
    Constrained,
}

const DEFAULTS: [(&str, f64); 7] = [
    ("mass", 1.0),
    ("length", 1.0),
    ("g", 9.8),
    ("T0", 0.1),
    ("omega_bar", 0.1),
    ("theta0", 0.0),
    ("thetadot0", 0.0),
];

/// Pendulum driven by `T(t) = T0 sin(ω̄ t)`. The angle is measured from the
/// downward vertical; in the constrained variant it is the body's `θ`.
pub fn stiff_pendulum(variant: PendulumVariant, overrides: &Overrides) -> Result<Scenario> {
    let name = match variant {
        PendulumVariant::Minimal => "pendulum-minimal",
        PendulumVariant::Constrained => "pendulum-constrained",
    };
    let p = resolve(name, &DEFAULTS, overrides)?;
    positive(&p, &["mass", "length"])?;
    let (m, l, g) = (p["mass"], p["length"], p["g"]);
    let torque = TorqueLaw::Harmonic {
        amplitude: p["T0"],
        frequency: p["omega_bar"],
    };
    let (th, thd) = (p["theta0"], p["thetadot0"]);

    let (dynamics, method) = match variant {
        PendulumVariant::Minimal => {
            let system = PendulumMinimal {
                mass: m,
                length: l,
                g,
                torque,
            };
            let initial = MinimalState::new(&system, 0.0, Vector::from_element(1, th), Vector::from_element(1, thd))?;
            (Dynamics::Minimal { system, initial }, Method::NewmarkMinimal)
        }
        PendulumVariant::Constrained => {
            let mut b = MultibodyModel::builder();
            let bob = b.body("bob", m, 0.0);
            b.revolute(Attachment::body(bob, 0.0, l), Attachment::ground(0.0, 0.0));
            b.gravity(g, Vector2::new(0.0, -1.0));
            b.force(ForceElement::AppliedTorque { body: bob, law: torque });
            let model = b.build()?;
            let x = Vector::from_column_slice(&[l * th.sin(), -l * th.cos(), th]);
            let initial = consistent_initial_state(&model, 0.0, &x, &[CoordinatePin { index: 2, value: thd }])?;
            (Dynamics::Multibody { model, initial }, Method::TangentNewmark)
        }
    };
    Ok(Scenario {
        name,
        dynamics,
        method,
        params: NewmarkParams::FOX_GOODWIN,
        dt: 0.1,
        t_end: 600.0,
        parameters: p,
    })
}
