//! Andrews' squeezing mechanism.
//!
//! Seven bodies: crank OF driven by a constant torque, link EF, triangle BDE
//! pinned at B and pulled by a spring from C to D, and two dyads meeting at E
//! from the common ground pivot A (AG–GE and AH–HE). E is shared by EF, BDE,
//! GE and HE, giving ten revolute joints and one degree of freedom.
//!
//! Geometry and inertia follow the standard benchmark data set. The printed
//! mass table that often accompanies it misplaces several entries (crank
//! mass off by ten, AG/AH masses swapped with the triangle's), so the
//! defaults below use the benchmark values; every mass and inertia can be
//! overridden.

use super::{positive, resolve, Dynamics, Overrides, Scenario};
use crate::error::Result;
use crate::integrators::{Method, NewmarkParams};
use crate::linsolve::Vector;
use crate::model::{
    assemble_position, consistent_initial_state, Attachment, CoordinatePin, ForceElement, MultibodyModel,
    TorqueLaw,
};

const A: (f64, f64) = (-0.06934, -0.00227);
const B: (f64, f64) = (-0.03635, 0.03273);
const C: (f64, f64) = (0.014, 0.072);

const D_: f64 = 0.028;
const DA: f64 = 0.0115;
const E_: f64 = 0.02;
const EA: f64 = 0.01421;
const RR: f64 = 0.007;
const RA: f64 = 0.00092;
const SS: f64 = 0.035;
const SA: f64 = 0.01874;
const SB: f64 = 0.01043;
const SC: f64 = 0.018;
const SD: f64 = 0.02;
const ZT: f64 = 0.04;
const TA: f64 = 0.02308;
const TB: f64 = 0.00916;
const U: f64 = 0.04;
const UA: f64 = 0.01228;
const UB: f64 = 0.00449;
const ZF: f64 = 0.02;
const FA: f64 = 0.01421;

/// A closed configuration near the start (angles β, Θ, γ, Φ, δ, Ω, ε of the
/// classical formulation), used as the assembly guess.
const GUESS: [f64; 7] = [
    -0.0617138900142764496,
    0.0,
    0.455279819163070380,
    0.222668390165885885,
    0.487364979543842550,
    -0.222668390165885885,
    1.23054744454982119,
];

const DEFAULTS: [(&str, f64); 18] = [
    ("beta0", -0.062),
    ("m_of", 0.04325),
    ("m_ef", 0.00365),
    ("m_bde", 0.02373),
    ("m_ge", 0.00706),
    ("m_ag", 0.07050),
    ("m_he", 0.00706),
    ("m_ah", 0.05498),
    ("i_of", 2.194e-6),
    ("i_ef", 4.410e-7),
    ("i_bde", 5.255e-6),
    ("i_ge", 5.667e-7),
    ("i_ag", 1.169e-5),
    ("i_he", 5.667e-7),
    ("i_ah", 1.912e-5),
    ("spring_k", 4530.0),
    ("spring_l0", 0.07785),
    ("torque", 0.033),
];

fn dir(a: f64) -> (f64, f64) {
    (a.cos(), a.sin())
}

/// Body coordinates from the classical angles, bodies ordered
/// OF, EF, BDE, AG, GE, AH, HE.
fn coordinates(angles: &[f64; 7]) -> Vector {
    use std::f64::consts::{FRAC_PI_2, PI};
    let [be, th, ga, ph, de, om, ep] = *angles;
    let f = (RR * be.cos(), RR * be.sin());
    let g = (A.0 + ZT * de.cos(), A.1 + ZT * de.sin());
    let h = (A.0 + U * ep.sin(), A.1 - U * ep.cos());
    let (cbt, sbt) = dir(be + th);
    let mut x = Vec::with_capacity(21);
    x.extend([RA * be.cos(), RA * be.sin(), be]);
    x.extend([f.0 - DA * cbt, f.1 - DA * sbt, be + th + PI]);
    x.extend([
        B.0 + SA * ga.sin() + SB * ga.cos(),
        B.1 - SA * ga.cos() + SB * ga.sin(),
        ga,
    ]);
    x.extend([
        A.0 + TA * de.cos() - TB * de.sin(),
        A.1 + TA * de.sin() + TB * de.cos(),
        de,
    ]);
    x.extend([
        g.0 + (E_ - EA) * (ph + de).sin(),
        g.1 - (E_ - EA) * (ph + de).cos(),
        ph + de - FRAC_PI_2,
    ]);
    x.extend([
        A.0 + UA * ep.sin() - UB * ep.cos(),
        A.1 - UA * ep.cos() - UB * ep.sin(),
        ep - FRAC_PI_2,
    ]);
    x.extend([
        h.0 + (ZF - FA) * (om + ep).cos(),
        h.1 + (ZF - FA) * (om + ep).sin(),
        om + ep,
    ]);
    Vector::from_vec(x)
}

pub fn andrews_squeezer(overrides: &Overrides) -> Result<Scenario> {
    let p = resolve("andrews-squeezer", &DEFAULTS, overrides)?;
    positive(
        &p,
        &["m_of", "m_ef", "m_bde", "m_ge", "m_ag", "m_he", "m_ah", "spring_l0"],
    )?;

    let mut b = MultibodyModel::builder();
    let of = b.body("OF", p["m_of"], p["i_of"]);
    let ef = b.body("EF", p["m_ef"], p["i_ef"]);
    let bde = b.body("BDE", p["m_bde"], p["i_bde"]);
    let ag = b.body("AG", p["m_ag"], p["i_ag"]);
    let ge = b.body("GE", p["m_ge"], p["i_ge"]);
    let ah = b.body("AH", p["m_ah"], p["i_ah"]);
    let he = b.body("HE", p["m_he"], p["i_he"]);

    let e_on_ef = Attachment::body(ef, D_ - DA, 0.0);
    b.revolute(Attachment::body(of, -RA, 0.0), Attachment::ground(0.0, 0.0));
    b.revolute(Attachment::body(of, RR - RA, 0.0), Attachment::body(ef, -DA, 0.0));
    b.revolute(e_on_ef, Attachment::body(bde, -SB, SA - SS));
    b.revolute(Attachment::body(bde, -SB, SA), Attachment::ground(B.0, B.1));
    b.revolute(e_on_ef, Attachment::body(ge, EA, 0.0));
    b.revolute(Attachment::body(ge, -(E_ - EA), 0.0), Attachment::body(ag, ZT - TA, -TB));
    b.revolute(Attachment::body(ag, -TA, -TB), Attachment::ground(A.0, A.1));
    b.revolute(e_on_ef, Attachment::body(he, FA, 0.0));
    b.revolute(Attachment::body(he, -(ZF - FA), 0.0), Attachment::body(ah, U - UA, UB));
    b.revolute(Attachment::body(ah, -UA, UB), Attachment::ground(A.0, A.1));
    b.force(ForceElement::LinearSpringDamper {
        a: Attachment::ground(C.0, C.1),
        b: Attachment::body(bde, SD - SB, SA - SC),
        stiffness: p["spring_k"],
        damping: 0.0,
        free_length: p["spring_l0"],
    });
    b.force(ForceElement::AppliedTorque {
        body: of,
        law: TorqueLaw::Constant(p["torque"]),
    });
    let model = b.build()?;

    let pin = CoordinatePin {
        index: 2,
        value: p["beta0"],
    };
    let (x, _) = assemble_position(&model, &coordinates(&GUESS), &[pin])?;
    let initial = consistent_initial_state(&model, 0.0, &x, &[CoordinatePin { index: 2, value: 0.0 }])?;
    Ok(Scenario {
        name: "andrews-squeezer",
        dynamics: Dynamics::Multibody { model, initial },
        method: Method::TangentNewmark,
        params: NewmarkParams::FOX_GOODWIN,
        dt: 2e-6,
        t_end: 0.03,
        parameters: p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::constraints;

    fn model() -> MultibodyModel {
        andrews_squeezer(&Overrides::new()).unwrap().model().unwrap().clone()
    }

    #[test]
    fn classical_angles_close_the_loops() {
        let q = constraints(&model(), &coordinates(&GUESS));
        assert!(q.amax() < 1e-14, "{q}");
    }

    #[test]
    fn topology_counts() {
        let m = model();
        assert_eq!(m.n_coords(), 21);
        assert_eq!(m.n_constraints(), 20);
    }

    #[test]
    fn assembled_start_is_closed_and_pinned() {
        let sc = andrews_squeezer(&Overrides::new()).unwrap();
        let s = sc.initial_state();
        assert!(constraints(sc.model().unwrap(), &s.x).amax() <= 1e-12);
        assert_eq!(s.x[2], -0.062);
        assert_eq!(s.xdot.amax(), 0.0);
    }
}
