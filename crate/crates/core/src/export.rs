//! CSV output of trajectories and stability timelines, and reading
//! trajectories back for post-processing.
//!
//! Numbers are written as `{:.16e}` (17 significant digits), so a value read
//! back is bit-identical to the one written.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::integrators::Trajectory;
use crate::linsolve::Vector;
use crate::model::SystemState;
use crate::stability::TimelinePoint;

const UNITS: &str = "units: t in s, angles in rad, lengths in m, velocities per s, energy in J";

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

pub fn trajectory_header(n_coords: usize, n_constraints: usize, with_omega: bool) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for prefix in ["x", "xd", "xdd"] {
        h.extend((0..n_coords).map(|i| format!("{prefix}_{i}")));
    }
    h.extend((0..n_constraints).map(|i| format!("lambda_{i}")));
    h.extend(["q_norm", "qd_norm", "qdd_norm", "energy", "iters"].map(String::from));
    if with_omega {
        h.push("omega_max".into());
    }
    h
}

/// One header comment, one column header row, one row per record.
pub fn write_trajectory<W: Write>(mut out: W, scenario: &str, tr: &Trajectory) -> Result<()> {
    let first = &tr.records[0].state;
    let (n, m) = (first.x.len(), first.lambda.len());
    let with_omega = tr.records.iter().any(|r| r.omega_max.is_some());
    writeln!(
        out,
        "# tangent-mbd trajectory: scenario={scenario} method={} alpha={} beta={} dt={}; {UNITS}",
        tr.method, tr.params.alpha, tr.params.beta, tr.dt
    )?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trajectory_header(n, m, with_omega)).map_err(csv_err)?;
    for r in &tr.records {
        let s = &r.state;
        let mut row = Vec::with_capacity(3 * n + m + 7);
        row.push(num(s.t));
        for v in [&s.x, &s.xdot, &s.xddot, &s.lambda] {
            row.extend(v.iter().map(|c| num(*c)));
        }
        row.extend([r.norms.position, r.norms.velocity, r.norms.acceleration, r.energy].map(num));
        row.push(r.iterations.to_string());
        if with_omega {
            row.push(r.omega_max.map_or_else(|| "nan".to_string(), num));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// States recovered from a trajectory CSV, with the recorded frequency
/// where the file has one.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTable {
    pub states: Vec<SystemState>,
    pub omega_max: Vec<Option<f64>>,
}

pub fn read_trajectory<R: Read>(input: R) -> Result<TrajectoryTable> {
    let mut rd = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let header: Vec<String> = rd.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let count = |prefix: &str| header.iter().filter(|h| h.starts_with(prefix)).count();
    let (n, m) = (count("x_"), count("lambda_"));
    let omega_col = header.iter().position(|h| h == "omega_max");
    if header.first().map(String::as_str) != Some("t") || header.len() < 3 * n + m + 6 {
        return Err(Error::Config("not a tangent-mbd trajectory CSV (bad header)".into()));
    }
    let mut table = TrajectoryTable {
        states: Vec::new(),
        omega_max: Vec::new(),
    };
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("row {}: {e}", i + 1)))?;
        let slice = |a: usize, len: usize| Vector::from_column_slice(&vals[a..a + len]);
        table.states.push(SystemState {
            t: vals[0],
            x: slice(1, n),
            xdot: slice(1 + n, n),
            xddot: slice(1 + 2 * n, n),
            lambda: slice(1 + 3 * n, m),
        });
        table.omega_max.push(omega_col.map(|c| vals[c]).filter(|w| !w.is_nan()));
    }
    if table.states.is_empty() {
        return Err(Error::Config("trajectory CSV has no rows".into()));
    }
    Ok(table)
}

pub fn write_timeline<W: Write>(mut out: W, scenario: &str, points: &[TimelinePoint]) -> Result<()> {
    writeln!(
        out,
        "# tangent-mbd stability timeline: scenario={scenario}; t in s, omega_max in rad/s, dt_limit in s"
    )?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "omega_max", "dt_limit"]).map_err(csv_err)?;
    for p in points {
        w.write_record([num(p.t), num(p.omega_max), num(p.dt_limit)]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
