//! JSON encoding of kernels and loop systems.
//!
//! Kernel: `{"domain": D, "codomain": C, "rows": [[C floats] x D]}`.
//! System: `{"world": n, "sensor": n, "actuator": n, "beta": <kernel>,
//! "alpha": <kernel>, "init_world": [...]}`. Floats are written with 17
//! significant digits so that a write/read cycle reproduces every bit.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use super::{SmlSystem, StateSpace, StochasticKernel};
use crate::error::{Error, Result};

/// Row-sum slack accepted when reading kernels from text.
pub const FILE_ROW_TOLERANCE: f64 = 1e-9;

pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub(crate) fn write_f64_array(out: &mut String, xs: &[f64]) {
    out.push('[');
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&fmt_f64(*x));
    }
    out.push(']');
}

pub(crate) fn write_f64_matrix(out: &mut String, rows: impl Iterator<Item = impl AsRef<[f64]>>, indent: &str) {
    out.push('[');
    let mut first = true;
    for r in rows {
        if !first {
            out.push(',');
        }
        first = false;
        out.push('\n');
        out.push_str(indent);
        out.push_str("  ");
        write_f64_array(out, r.as_ref());
    }
    out.push('\n');
    out.push_str(indent);
    out.push(']');
}

fn write_kernel(out: &mut String, k: &StochasticKernel, indent: &str) {
    let _ = write!(out, "{{\"domain\": {}, \"codomain\": {}, \"rows\": ", k.domain(), k.codomain());
    write_f64_matrix(out, k.rows(), indent);
    out.push('}');
}

pub fn kernel_to_json(k: &StochasticKernel) -> String {
    let mut out = String::new();
    write_kernel(&mut out, k, "");
    out.push('\n');
    out
}

#[derive(Deserialize)]
struct RawKernel {
    domain: usize,
    codomain: usize,
    rows: Vec<Vec<f64>>,
}

impl RawKernel {
    fn into_kernel(self) -> Result<StochasticKernel> {
        if self.rows.len() != self.domain {
            return Err(Error::Parse(format!(
                "kernel declares {} rows but has {}",
                self.domain,
                self.rows.len()
            )));
        }
        for (row, r) in self.rows.iter().enumerate() {
            if r.len() != self.codomain {
                return Err(Error::Row {
                    row,
                    msg: format!("expected {} entries, found {}", self.codomain, r.len()),
                });
            }
        }
        StochasticKernel::with_tolerance(self.domain, self.codomain, self.rows.concat(), FILE_ROW_TOLERANCE)
    }
}

pub fn kernel_from_json(text: &str) -> Result<StochasticKernel> {
    let raw: RawKernel = serde_json::from_str(text)?;
    raw.into_kernel()
}

pub fn save_kernel(path: impl AsRef<Path>, k: &StochasticKernel) -> Result<()> {
    std::fs::write(path, kernel_to_json(k))?;
    Ok(())
}

pub fn load_kernel(path: impl AsRef<Path>) -> Result<StochasticKernel> {
    kernel_from_json(&std::fs::read_to_string(path)?)
}

pub fn system_to_json(sys: &SmlSystem) -> String {
    let mut out = String::new();
    let _ = write!(
        out,
        "{{\n  \"world\": {},\n  \"sensor\": {},\n  \"actuator\": {},\n  \"beta\": ",
        sys.n_world(),
        sys.n_sensor(),
        sys.n_actuator()
    );
    write_kernel(&mut out, &sys.beta, "  ");
    out.push_str(",\n  \"alpha\": ");
    write_kernel(&mut out, &sys.alpha, "  ");
    out.push_str(",\n  \"init_world\": ");
    write_f64_array(&mut out, &sys.init_world);
    out.push_str("\n}\n");
    out
}

#[derive(Deserialize)]
struct RawSystem {
    world: usize,
    sensor: usize,
    actuator: usize,
    beta: RawKernel,
    alpha: RawKernel,
    init_world: Vec<f64>,
}

pub fn system_from_json(text: &str) -> Result<SmlSystem> {
    let raw: RawSystem = serde_json::from_str(text)?;
    let init_sum: f64 = raw.init_world.iter().sum();
    if (init_sum - 1.0).abs() > FILE_ROW_TOLERANCE {
        return Err(Error::Parse(format!("init_world sums to {init_sum}")));
    }
    let beta = raw.beta.into_kernel()?;
    let alpha = raw.alpha.into_kernel()?;
    // accept file slack on init_world, then renormalize to the in-memory tolerance
    let init_world: Vec<f64> = if (init_sum - 1.0).abs() > super::ROW_TOLERANCE {
        raw.init_world.iter().map(|p| p / init_sum).collect()
    } else {
        raw.init_world
    };
    SmlSystem::from_parts(
        StateSpace::new("world", raw.world)?,
        StateSpace::new("sensor", raw.sensor)?,
        StateSpace::new("actuator", raw.actuator)?,
        beta,
        alpha,
        init_world,
    )
}

pub fn save_system(path: impl AsRef<Path>, sys: &SmlSystem) -> Result<()> {
    std::fs::write(path, system_to_json(sys))?;
    Ok(())
}

pub fn load_system(path: impl AsRef<Path>) -> Result<SmlSystem> {
    system_from_json(&std::fs::read_to_string(path)?)
}
