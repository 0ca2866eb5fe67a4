//! Double four-bar linkage of the public multibody benchmark set.
//!
//! Source: IFTOMM multibody benchmark library, "Double four bar mechanism".
//! Three parallel cranks pinned to the ground at (0,0), (1,0), (2,0) and two
//! couplers joining their tips. Every bar is 1 m long with 1 kg mass and
//! slender-rod inertia m L²/12. Gravity 9.81 m/s² along −y. Initially the
//! cranks are vertical and turn at 1 rad/s. The mechanism crosses singular
//! configurations when the cranks lie horizontal.

use std::f64::consts::FRAC_PI_2;

use nalgebra::Vector2;

use super::{positive, resolve, Dynamics, Overrides, Scenario};
use crate::error::Result;
use crate::integrators::{Method, NewmarkParams};
use crate::linsolve::Vector;
use crate::model::{consistent_initial_state, Attachment, CoordinatePin, MultibodyModel};

const DEFAULTS: [(&str, f64); 4] = [("length", 1.0), ("mass", 1.0), ("g", 9.81), ("omega0", 1.0)];

pub fn double_four_bar(overrides: &Overrides) -> Result<Scenario> {
    let p = resolve("double-four-bar", &DEFAULTS, overrides)?;
    positive(&p, &["length", "mass"])?;
    let (l, m) = (p["length"], p["mass"]);
    let half = 0.5 * l;

    let mut b = MultibodyModel::builder();
    let cranks: Vec<_> = (1..=3).map(|i| b.body(format!("crank{i}"), m, m * l * l / 12.0)).collect();
    let couplers: Vec<_> = (1..=2).map(|i| b.body(format!("coupler{i}"), m, m * l * l / 12.0)).collect();
    for (i, &c) in cranks.iter().enumerate() {
        b.revolute(Attachment::body(c, -half, 0.0), Attachment::ground(i as f64 * l, 0.0));
    }
    for (i, &k) in couplers.iter().enumerate() {
        b.revolute(Attachment::body(cranks[i], half, 0.0), Attachment::body(k, -half, 0.0));
        b.revolute(Attachment::body(cranks[i + 1], half, 0.0), Attachment::body(k, half, 0.0));
    }
    b.gravity(p["g"], Vector2::new(0.0, -1.0));
    let model = b.build()?;

    let mut x = Vec::with_capacity(15);
    for i in 0..3 {
        x.extend([i as f64 * l, half, FRAC_PI_2]);
    }
    for i in 0..2 {
        x.extend([(i as f64 + 0.5) * l, l, 0.0]);
    }
    let pin = CoordinatePin {
        index: 2,
        value: p["omega0"],
    };
    let initial = consistent_initial_state(&model, 0.0, &Vector::from_vec(x), &[pin])?;
    Ok(Scenario {
        name: "double-four-bar",
        dynamics: Dynamics::Multibody { model, initial },
        method: Method::TangentNewmark,
        params: NewmarkParams::TRAPEZOIDAL,
        dt: 1e-2,
        t_end: 10.0,
        parameters: p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{constraint_jacobian, mechanical_energy};

    #[test]
    fn start_turns_all_cranks_together() {
        let sc = double_four_bar(&Overrides::new()).unwrap();
        let s = sc.initial_state();
        for i in 0..3 {
            assert!((s.xdot[3 * i + 2] - 1.0).abs() < 1e-10);
        }
        for i in 3..5 {
            assert!(s.xdot[3 * i + 2].abs() < 1e-10);
            assert!((s.xdot[3 * i] + 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn reactions_do_no_work() {
        let sc = double_four_bar(&Overrides::new()).unwrap();
        let model = sc.model().unwrap();
        let s = sc.initial_state();
        let power = (constraint_jacobian(model, &s.x).transpose() * &s.lambda).dot(&s.xdot);
        assert!(power.abs() <= 1e-8);
        // Three cranks and two couplers: kinetic 5/2·(1/3) + 2·½, potential 3·½ + 2·1 g.
        let e = mechanical_energy(model, &s);
        assert!((e - (0.5 * 3.0 / 3.0 + 1.0 + 3.5 * 9.81)).abs() < 1e-9, "{e}");
    }
}
