//! Built-in benchmark mechanisms with tunable parameters.

mod double_pendulum;
mod four_bar;
mod free_bodies;
mod pendulum;
mod squeezer;

use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};

use crate::error::{Error, Result};
use crate::integrators::{
    simulate, simulate_minimal, Method, MinimalMethod, MinimalState, NewmarkParams, PendulumMinimal,
    SecondOrderSystem, StepConfig, Trajectory,
};
use crate::integrators::reduced_frequency;
use crate::linsolve::max_generalized_frequency;
use crate::model::{MultibodyModel, SystemState};

pub use double_pendulum::double_pendulum;
pub use four_bar::double_four_bar;
pub use free_bodies::free_bodies;
pub use pendulum::{stiff_pendulum, PendulumVariant};
pub use squeezer::andrews_squeezer;

/// Named numeric parameter overrides, e.g. `T0 → 9`.
pub type Overrides = BTreeMap<String, f64>;

pub const SCENARIO_NAMES: [&str; 6] = [
    "pendulum-minimal",
    "pendulum-constrained",
    "double-pendulum",
    "andrews-squeezer",
    "double-four-bar",
    "free-bodies",
];

/// What gets integrated: a multibody model in absolute coordinates, or a
/// system already written in minimal coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum Dynamics {
    Multibody {
        model: MultibodyModel,
        initial: SystemState,
    },
    Minimal {
        system: PendulumMinimal,
        initial: MinimalState,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: &'static str,
    pub dynamics: Dynamics,
    pub method: Method,
    pub params: NewmarkParams,
    pub dt: f64,
    pub t_end: f64,
    /// Effective parameter values, defaults merged with overrides.
    pub parameters: BTreeMap<String, f64>,
}

impl Scenario {
    pub fn model(&self) -> Option<&MultibodyModel> {
        match &self.dynamics {
            Dynamics::Multibody { model, .. } => Some(model),
            Dynamics::Minimal { .. } => None,
        }
    }

    pub fn initial_state(&self) -> SystemState {
        match &self.dynamics {
            Dynamics::Multibody { initial, .. } => initial.clone(),
            Dynamics::Minimal { initial, .. } => initial.clone().into_system_state(),
        }
    }

    pub fn parameter(&self, key: &str) -> Option<f64> {
        self.parameters.get(key).copied()
    }

    /// Step configuration with this scenario's default step size.
    pub fn step_config(&self) -> StepConfig {
        StepConfig::new(self.dt)
    }

    /// Hash of the model and initial state; equal for equal overrides.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.name.hash(&mut h);
        for (k, v) in &self.parameters {
            k.hash(&mut h);
            v.to_bits().hash(&mut h);
        }
        if let Some(model) = self.model() {
            model.fingerprint().hash(&mut h);
        }
        let s = self.initial_state();
        for v in [&s.x, &s.xdot, &s.xddot, &s.lambda] {
            for c in v.iter() {
                c.to_bits().hash(&mut h);
            }
        }
        h.finish()
    }

    pub fn check_method(&self, method: Method) -> Result<()> {
        match (&self.dynamics, method) {
            (Dynamics::Minimal { .. }, Method::TangentNewmark | Method::ClassicalIndex3) => {
                Err(Error::Config(format!(
                    "{} is written in minimal coordinates; use {} or {}",
                    self.name,
                    Method::CentralDifference,
                    Method::NewmarkMinimal
                )))
            }
            (Dynamics::Multibody { model, .. }, Method::CentralDifference | Method::NewmarkMinimal)
                if model.n_constraints() > 0 =>
            {
                Err(Error::Config(format!(
                    "{method} needs an unconstrained model; {} has {} constraints",
                    self.name,
                    model.n_constraints()
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn run(&self, method: Method, params: NewmarkParams, cfg: &StepConfig, t_end: f64) -> Result<Trajectory> {
        self.check_method(method)?;
        match &self.dynamics {
            Dynamics::Multibody { model, initial } => simulate(model, method, initial, params, cfg, t_end),
            Dynamics::Minimal { system, initial } => {
                let m = match method {
                    Method::CentralDifference => MinimalMethod::CentralDifference,
                    _ => MinimalMethod::Newmark,
                };
                simulate_minimal(system, m, initial, params, cfg, t_end)
            }
        }
    }

    /// Runs with every default.
    pub fn run_default(&self) -> Result<Trajectory> {
        self.run(self.method, self.params, &self.step_config(), self.t_end)
    }

    /// Largest natural frequency at the initial state.
    pub fn initial_omega_max(&self, rank_tol: f64) -> Result<f64> {
        self.omega_max_at(&self.initial_state(), rank_tol)
    }

    /// Largest natural frequency at `state`: of the tangent-reduced system
    /// for multibody models, of the minimal-coordinate system otherwise.
    pub fn omega_max_at(&self, state: &SystemState, rank_tol: f64) -> Result<f64> {
        match &self.dynamics {
            Dynamics::Multibody { model, .. } => {
                state.validate(model)?;
                reduced_frequency(model, state, rank_tol)
            }
            Dynamics::Minimal { system, initial } => {
                if state.x.len() != initial.q.len() || state.xdot.len() != initial.q.len() {
                    return Err(Error::Validation(format!(
                        "{} has {} coordinates, state has {}",
                        self.name,
                        initial.q.len(),
                        state.x.len()
                    )));
                }
                max_generalized_frequency(&system.stiffness(state.t, &state.x, &state.xdot), &system.mass())
            }
        }
    }
}

/// Builds a scenario by name.
pub fn build(name: &str, overrides: &Overrides) -> Result<Scenario> {
    match name {
        "pendulum-minimal" => stiff_pendulum(PendulumVariant::Minimal, overrides),
        "pendulum-constrained" => stiff_pendulum(PendulumVariant::Constrained, overrides),
        "double-pendulum" => double_pendulum(overrides),
        "andrews-squeezer" => andrews_squeezer(overrides),
        "double-four-bar" => double_four_bar(overrides),
        "free-bodies" => free_bodies(overrides),
        _ => Err(Error::Config(format!(
            "unknown scenario '{name}' (known: {})",
            SCENARIO_NAMES.join(", ")
        ))),
    }
}

/// Largest `|E(t) − E(0)|` over the recorded steps.
pub fn energy_drift(trajectory: &Trajectory) -> f64 {
    let e0 = trajectory.records[0].energy;
    trajectory
        .records
        .iter()
        .map(|r| (r.energy - e0).abs())
        .fold(0.0, f64::max)
}

/// Merges `overrides` into `defaults`, rejecting unknown or non-finite
/// entries.
fn resolve(scenario: &str, defaults: &[(&str, f64)], overrides: &Overrides) -> Result<BTreeMap<String, f64>> {
    let mut out: BTreeMap<String, f64> = defaults.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    for (k, v) in overrides {
        let slot = out.get_mut(k).ok_or_else(|| {
            let known: Vec<&str> = defaults.iter().map(|(k, _)| *k).collect();
            Error::Config(format!(
                "scenario {scenario} has no parameter '{k}' (known: {})",
                known.join(", ")
            ))
        })?;
        if !v.is_finite() {
            return Err(Error::Config(format!("{scenario}.{k} must be finite, got {v}")));
        }
        *slot = *v;
    }
    Ok(out)
}

fn positive(p: &BTreeMap<String, f64>, keys: &[&str]) -> Result<()> {
    for k in keys {
        if !(p[*k] > 0.0) {
            return Err(Error::Config(format!("parameter {k} must be positive, got {}", p[*k])));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrators::TrajectoryStatus;
    use crate::model::{constraint_jacobian, constraints};

    #[test]
    fn every_scenario_starts_consistent() {
        for name in SCENARIO_NAMES {
            let sc = build(name, &Overrides::new()).unwrap();
            if let Some(model) = sc.model() {
                let s = sc.initial_state();
                assert!(constraints(model, &s.x).norm() <= 1e-10, "{name}");
                assert!((constraint_jacobian(model, &s.x) * &s.xdot).norm() <= 1e-10, "{name}");
            }
        }
    }

    #[test]
    fn builds_are_deterministic() {
        let mut o = Overrides::new();
        o.insert("T0".into(), 9.0);
        for name in SCENARIO_NAMES {
            let a = build(name, &Overrides::new()).unwrap();
            assert_eq!(a.fingerprint(), build(name, &Overrides::new()).unwrap().fingerprint());
        }
        let a = build("pendulum-constrained", &o).unwrap();
        let b = build("pendulum-constrained", &o).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_ne!(a.fingerprint(), build("pendulum-constrained", &Overrides::new()).unwrap().fingerprint());
    }

    #[test]
    fn rejects_unknown_names_and_keys() {
        assert!(matches!(build("bricard", &Overrides::new()), Err(Error::Config(_))));
        let mut o = Overrides::new();
        o.insert("nope".into(), 1.0);
        assert!(matches!(build("pendulum-minimal", &o), Err(Error::Config(_))));
        let mut o = Overrides::new();
        o.insert("mass".into(), f64::NAN);
        assert!(build("pendulum-minimal", &o).is_err());
        let mut o = Overrides::new();
        o.insert("length".into(), -1.0);
        assert!(build("pendulum-constrained", &o).is_err());
    }

    #[test]
    fn method_compatibility() {
        let minimal = build("pendulum-minimal", &Overrides::new()).unwrap();
        let constrained = build("pendulum-constrained", &Overrides::new()).unwrap();
        let free = build("free-bodies", &Overrides::new()).unwrap();
        assert!(minimal.check_method(Method::TangentNewmark).is_err());
        assert!(minimal.check_method(Method::CentralDifference).is_ok());
        assert!(constrained.check_method(Method::CentralDifference).is_err());
        assert!(constrained.check_method(Method::ClassicalIndex3).is_ok());
        for m in Method::ALL {
            assert!(free.check_method(m).is_ok());
        }
    }

    #[test]
    fn pendulum_frequency() {
        let sc = build("pendulum-minimal", &Overrides::new()).unwrap();
        assert!((sc.initial_omega_max(1e-10).unwrap() - 3.1304951).abs() < 1e-7);
        let sc = build("pendulum-constrained", &Overrides::new()).unwrap();
        assert!((sc.initial_omega_max(1e-10).unwrap() - 3.1304951).abs() < 1e-7);
    }

    #[test]
    fn drift_of_single_record_is_zero() {
        let sc = build("free-bodies", &Overrides::new()).unwrap();
        let tr = sc.run(Method::TangentNewmark, sc.params, &StepConfig::new(0.1), 0.0).unwrap();
        assert_eq!(tr.records.len(), 1);
        assert_eq!(energy_drift(&tr), 0.0);
        assert_eq!(tr.status, TrajectoryStatus::Completed);
    }
}
