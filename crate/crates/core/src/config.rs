//! Run configuration: a flat text file of `section.key = value` lines merged
//! with command-line settings into a runnable [`ResolvedRun`].
//!
//! ```text
//! # pendulum past the Fox-Goodwin limit
//! run.scenario = pendulum-constrained
//! run.method = tangent-newmark
//! run.preset = fox-goodwin
//! run.dt = 0.79
//! run.t_end = 600
//! scenario.T0 = 0.1
//! ```
//!
//! Keys under `run.` are listed in [`RUN_KEYS`]. Keys under `scenario.` are
//! passed to the scenario builder, which rejects names it does not know.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::integrators::{Method, NewmarkParams, StepConfig};
use crate::scenarios::{build, Overrides, Scenario};

pub const RUN_KEYS: [&str; 14] = [
    "scenario",
    "method",
    "preset",
    "alpha",
    "beta",
    "dt",
    "t_end",
    "tol",
    "tol_c",
    "max_iters",
    "rank_tol",
    "blowup",
    "record_omega",
    "output",
];

/// Parsed `section.key = value` entries in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub run: BTreeMap<String, String>,
    pub scenario: Overrides,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Config(format!("line {}: {msg}", i + 1));
            let (lhs, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected 'section.key = value', got '{line}'")))?;
            let (section, key) = lhs
                .trim()
                .split_once('.')
                .ok_or_else(|| err(format!("key '{}' has no section", lhs.trim())))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(err("empty key or value".into()));
            }
            match section.trim() {
                "run" => {
                    if !RUN_KEYS.contains(&key) {
                        return Err(err(format!("unknown key run.{key} (known: {})", RUN_KEYS.join(", "))));
                    }
                    if out.run.insert(key.to_string(), value.to_string()).is_some() {
                        return Err(err(format!("run.{key} given twice")));
                    }
                }
                "scenario" => {
                    let v = parse_number(value).map_err(|e| err(e.to_string()))?;
                    if out.scenario.insert(key.to_string(), v).is_some() {
                        return Err(err(format!("scenario.{key} given twice")));
                    }
                }
                other => return Err(err(format!("unknown section '{other}' (expected run or scenario)"))),
            }
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

fn parse_number(s: &str) -> Result<f64> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Config(format!("'{s}' is not a finite number"))),
    }
}

fn parse_typed<T: FromStr>(key: &str, s: &str) -> Result<T> {
    s.parse::<T>()
        .map_err(|_| Error::Config(format!("run.{key}: cannot parse '{s}'")))
}

/// Everything a run or stability command needs. Unset fields fall back to
/// the scenario defaults.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSpec {
    pub scenario: Option<String>,
    pub method: Option<Method>,
    pub preset: Option<String>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub tol: Option<f64>,
    pub tol_c: Option<f64>,
    pub max_iters: Option<usize>,
    pub rank_tol: Option<f64>,
    pub blowup: Option<f64>,
    pub record_omega: bool,
    pub output: Option<PathBuf>,
    pub overrides: Overrides,
}

#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub scenario: Scenario,
    pub method: Method,
    pub params: NewmarkParams,
    pub step: StepConfig,
    pub t_end: f64,
}

impl RunSpec {
    /// Spec holding the file's settings.
    pub fn from_config(cfg: &ConfigFile) -> Result<Self> {
        let mut s = Self {
            overrides: cfg.scenario.clone(),
            ..Self::default()
        };
        let num = |k: &str| cfg.run.get(k).map(|v| parse_number(v)).transpose();
        s.scenario = cfg.run.get("scenario").cloned();
        s.method = cfg.run.get("method").map(|v| v.parse()).transpose()?;
        s.preset = cfg.run.get("preset").cloned();
        s.alpha = num("alpha")?;
        s.beta = num("beta")?;
        s.dt = num("dt")?;
        s.t_end = num("t_end")?;
        s.tol = num("tol")?;
        s.tol_c = num("tol_c")?;
        s.rank_tol = num("rank_tol")?;
        s.blowup = num("blowup")?;
        s.max_iters = cfg.run.get("max_iters").map(|v| parse_typed("max_iters", v)).transpose()?;
        s.record_omega = cfg
            .run
            .get("record_omega")
            .map(|v| parse_typed("record_omega", v))
            .transpose()?
            .unwrap_or(false);
        s.output = cfg.run.get("output").map(PathBuf::from);
        Ok(s)
    }

    /// Overlays every field set in `other`.
    pub fn merge(&mut self, other: RunSpec) {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(scenario, method, preset, alpha, beta, dt, t_end, tol, tol_c, max_iters, rank_tol, blowup, output);
        self.record_omega |= other.record_omega;
        self.overrides.extend(other.overrides);
    }

    /// Builds the scenario and fills every unset field from its defaults.
    /// Incompatible method/scenario pairs are rejected here.
    pub fn resolve(&self) -> Result<ResolvedRun> {
        let name = self
            .scenario
            .as_deref()
            .ok_or_else(|| Error::Config("no scenario given".into()))?;
        let scenario = build(name, &self.overrides)?;
        let method = self.method.unwrap_or(scenario.method);
        scenario.check_method(method)?;

        let mut params = match &self.preset {
            Some(p) => NewmarkParams::preset(p).ok_or_else(|| {
                Error::Config(format!(
                    "unknown preset '{p}' (known: fox-goodwin, trapezoidal, tuned, central-difference)"
                ))
            })?,
            None => scenario.params,
        };
        if let Some(a) = self.alpha {
            params.alpha = a;
        }
        if let Some(b) = self.beta {
            params.beta = b;
        }
        params.validate()?;

        let mut step = StepConfig::new(self.dt.unwrap_or(scenario.dt));
        step.tol = self.tol.unwrap_or(step.tol);
        step.tol_c = self.tol_c.unwrap_or(step.tol_c);
        step.max_iters = self.max_iters.unwrap_or(step.max_iters);
        step.rank_tol = self.rank_tol.unwrap_or(step.rank_tol);
        step.blowup = self.blowup.unwrap_or(step.blowup);
        step.record_omega = self.record_omega;
        step.validate()?;

        let t_end = self.t_end.unwrap_or(scenario.t_end);
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(Error::Config(format!("t_end must be a non-negative number, got {t_end}")));
        }
        Ok(ResolvedRun {
            scenario,
            method,
            params,
            step,
            t_end,
        })
    }
}

/// Parses a `key=value` scenario override from the command line.
pub fn parse_override(s: &str) -> Result<(String, f64)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{s}' is not key=value")))?;
    let k = k.trim().trim_start_matches("scenario.");
    Ok((k.to_string(), parse_number(v.trim())?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_comments() {
        let c = ConfigFile::parse(
            "# header\n\nrun.scenario = pendulum-constrained\nrun.dt = 0.6 # inline\nscenario.T0 = 9\n",
        )
        .unwrap();
        assert_eq!(c.run["scenario"], "pendulum-constrained");
        assert_eq!(c.run["dt"], "0.6");
        assert_eq!(c.scenario["T0"], 9.0);
    }

    #[test]
    fn rejects_malformed_lines() {
        for bad in [
            "run.dt",
            "dt = 1",
            "solver.dt = 1",
            "run.speed = 1",
            "scenario.T0 = abc",
            "scenario.T0 = inf",
            "run.dt = 1\nrun.dt = 2",
            "run.dt =",
        ] {
            let e = ConfigFile::parse(bad).unwrap_err();
            assert!(matches!(e, Error::Config(_)), "{bad}: {e}");
        }
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = ConfigFile::parse("run.dt = 1\n\nrun.bogus = 2").unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
    }

    #[test]
    fn resolves_defaults_and_overrides() {
        let c = ConfigFile::parse("run.scenario = pendulum-constrained\nrun.preset = trapezoidal\nrun.beta = 0.3\nscenario.T0 = 9").unwrap();
        let r = RunSpec::from_config(&c).unwrap().resolve().unwrap();
        assert_eq!(r.method, Method::TangentNewmark);
        assert_eq!(r.params, NewmarkParams { alpha: 0.5, beta: 0.3 });
        assert_eq!(r.step.dt, 0.1);
        assert_eq!(r.t_end, 600.0);
        assert_eq!(r.scenario.parameter("T0"), Some(9.0));
    }

    #[test]
    fn command_line_wins_over_file() {
        let c = ConfigFile::parse("run.scenario = pendulum-minimal\nrun.dt = 0.5\nscenario.T0 = 2").unwrap();
        let mut spec = RunSpec::from_config(&c).unwrap();
        let mut cli = RunSpec {
            dt: Some(0.25),
            ..RunSpec::default()
        };
        cli.overrides.insert("T0".into(), 3.0);
        spec.merge(cli);
        let r = spec.resolve().unwrap();
        assert_eq!(r.step.dt, 0.25);
        assert_eq!(r.scenario.parameter("T0"), Some(3.0));
    }

    #[test]
    fn incompatible_method_is_rejected() {
        let spec = RunSpec {
            scenario: Some("pendulum-minimal".into()),
            method: Some(Method::TangentNewmark),
            ..RunSpec::default()
        };
        assert!(matches!(spec.resolve(), Err(Error::Config(_))));
        let spec = RunSpec {
            scenario: Some("double-pendulum".into()),
            method: Some(Method::CentralDifference),
            ..RunSpec::default()
        };
        assert!(matches!(spec.resolve(), Err(Error::Config(_))));
    }

    #[test]
    fn bad_values_are_rejected() {
        let base = RunSpec {
            scenario: Some("pendulum-minimal".into()),
            ..RunSpec::default()
        };
        for spec in [
            RunSpec { dt: Some(0.0), ..base.clone() },
            RunSpec { t_end: Some(-1.0), ..base.clone() },
            RunSpec { preset: Some("rk4".into()), ..base.clone() },
            RunSpec { alpha: Some(-0.5), ..base.clone() },
            RunSpec { scenario: None, ..base.clone() },
        ] {
            assert!(spec.resolve().is_err(), "{spec:?}");
        }
    }

    #[test]
    fn overrides_from_command_line() {
        assert_eq!(parse_override("T0=9").unwrap(), ("T0".to_string(), 9.0));
        assert_eq!(parse_override("scenario.mass = 2").unwrap(), ("mass".to_string(), 2.0));
        assert!(parse_override("T0").is_err());
        assert!(parse_override("T0=x").is_err());
    }
}
