use nalgebra::Vector2;

use super::{positive, resolve, Dynamics, Overrides, Scenario};
use crate::error::Result;
use crate::integrators::{Method, NewmarkParams};
use crate::linsolve::Vector;
use crate::model::{consistent_initial_state, Attachment, ForceElement, MultibodyModel};

// The mechanism is only described qualitatively; these are neutral defaults.
const DEFAULTS: [(&str, f64); 10] = [
    ("mass1", 1.0),
    ("mass2", 1.0),
    ("length1", 1.0),
    ("length2", 1.0),
    ("k1", 0.0),
    ("c1", 0.0),
    ("k2", 0.0),
    ("c2", 0.0),
    ("g", 9.81),
    ("theta0", 0.0),
];

/// Two slender rods, pinned to the ground and to each other, with torsional
/// spring-dampers at both joints. Both links start aligned at angle
/// `theta0` from the horizontal, at rest; springs are relaxed there.
pub fn double_pendulum(overrides: &Overrides) -> Result<Scenario> {
    let p = resolve("double-pendulum", &DEFAULTS, overrides)?;
    positive(&p, &["mass1", "mass2", "length1", "length2"])?;
    let (l1, l2, th) = (p["length1"], p["length2"], p["theta0"]);

    let mut b = MultibodyModel::builder();
    let r1 = b.body("link1", p["mass1"], p["mass1"] * l1 * l1 / 12.0);
    let r2 = b.body("link2", p["mass2"], p["mass2"] * l2 * l2 / 12.0);
    let j1 = b.revolute(Attachment::ground(0.0, 0.0), Attachment::body(r1, -0.5 * l1, 0.0));
    let j2 = b.revolute(Attachment::body(r1, 0.5 * l1, 0.0), Attachment::body(r2, -0.5 * l2, 0.0));
    b.gravity(p["g"], Vector2::new(0.0, -1.0));
    for (joint, k, c, rest) in [(j1, "k1", "c1", th), (j2, "k2", "c2", 0.0)] {
        b.force(ForceElement::TorsionalSpringDamper {
            joint,
            stiffness: p[k],
            damping: p[c],
            rest_angle: rest,
        });
    }
    let model = b.build()?;

    let (c, s) = (th.cos(), th.sin());
    let x = Vector::from_column_slice(&[
        0.5 * l1 * c,
        0.5 * l1 * s,
        th,
        (l1 + 0.5 * l2) * c,
        (l1 + 0.5 * l2) * s,
        th,
    ]);
    let initial = consistent_initial_state(&model, 0.0, &x, &[])?;
    Ok(Scenario {
        name: "double-pendulum",
        dynamics: Dynamics::Multibody { model, initial },
        method: Method::TangentNewmark,
        params: NewmarkParams::FOX_GOODWIN,
        dt: 5e-4,
        t_end: 10.0,
        parameters: p,
    })
}
