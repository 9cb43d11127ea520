//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "q": 2,
//!   "P": [[0.6, 0.4], [0.3, 0.7]],
//!   "A": [[2, 0, 0, 0.5], [[2, 0], [0.3, 0.5]]],
//!   "seed": 7
//! }
//! ```
//!
//! Matrices are given row-major, either flat (`[a, b, c, d]`) or nested
//! (`[[a, b], [c, d]]`). Symbols are numbered from 0.

use std::f64::consts::FRAC_PI_4;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cocycle::{check_invertible, CocycleMap};
use crate::error::{Error, Result};
use crate::lyapunov::{DEFAULT_CHAIN_LENGTH, DEFAULT_REPS};
use crate::markov::StochasticMatrix;
use crate::matrix::Mat2;
use crate::stationary::{ProjectiveGrid, DEFAULT_ATOM_THRESHOLD, DEFAULT_GRID, DEFAULT_MAX_ITERS, DEFAULT_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepFamily {
    /// `A_t = (1 − t) A + t B`, entrywise.
    MatrixBlend,
    /// `A_t(i) = R_t A(i)` with `R_t` the rotation by `t` radians.
    RotationPerturb,
    /// `P_t = (1 − t) P + t Q`.
    MarkovBlend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_atom_threshold")]
    pub atom_threshold: f64,
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}
fn default_max_iters() -> usize {
    DEFAULT_MAX_ITERS
}
fn default_atom_threshold() -> f64 {
    DEFAULT_ATOM_THRESHOLD
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: DEFAULT_TOL,
            max_iters: DEFAULT_MAX_ITERS,
            atom_threshold: DEFAULT_ATOM_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub parameter: String,
    pub family: SweepFamily,
    pub values: Vec<f64>,
    /// Target matrices of `matrix_blend`.
    #[serde(rename = "B", skip_serializing_if = "Option::is_none")]
    pub target_matrices: Option<Vec<Mat2>>,
    /// Target stochastic matrix of `markov_blend`.
    #[serde(rename = "Q", skip_serializing_if = "Option::is_none")]
    pub target_stochastic: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyConfig {
    /// Defaults to the largest admissible `δ` in `{2^-k : k = 1..10}`.
    #[serde(default)]
    pub delta: Option<f64>,
    /// Defaults to the first expanding invariant point.
    #[serde(default)]
    pub u1_center: Option<f64>,
    pub u1_radius: f64,
    /// Defaults to the smallest certifying block length.
    #[serde(default)]
    pub l: Option<usize>,
    #[serde(default = "default_energy_iters")]
    pub iters: usize,
    /// Mass placed next to the reference point in the starting vector.
    #[serde(default = "default_atom_mass")]
    pub atom_mass: f64,
    /// Number of bins nearest the reference point sharing `atom_mass`.
    #[serde(default = "default_atom_width")]
    pub atom_width: usize,
}

fn default_energy_iters() -> usize {
    20
}
fn default_atom_mass() -> f64 {
    0.95
}
fn default_atom_width() -> usize {
    2
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lyapunov: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stationary: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expanding: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_decay: Option<String>,
}

/// A validated configuration with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub q: usize,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    #[serde(rename = "A")]
    pub a: Vec<Mat2>,
    pub grid: usize,
    pub chain_length: usize,
    pub reps: usize,
    pub seed: u64,
    pub solver: SolverConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy: Option<EnergyConfig>,
    pub output: OutputConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    q: usize,
    #[serde(rename = "P")]
    p: Vec<Vec<f64>>,
    #[serde(rename = "A")]
    a: Vec<Value>,
    #[serde(default = "default_grid")]
    grid: usize,
    #[serde(default = "default_chain_length")]
    chain_length: usize,
    #[serde(default = "default_reps")]
    reps: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    solver: SolverConfig,
    #[serde(default)]
    sweep: Option<RawSweep>,
    #[serde(default)]
    energy: Option<EnergyConfig>,
    #[serde(default)]
    output: OutputConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    #[serde(default = "default_parameter")]
    parameter: String,
    family: SweepFamily,
    values: Vec<f64>,
    #[serde(rename = "B", default)]
    target_matrices: Option<Vec<Value>>,
    #[serde(rename = "Q", default)]
    target_stochastic: Option<Vec<Vec<f64>>>,
}

fn default_grid() -> usize {
    DEFAULT_GRID
}
fn default_chain_length() -> usize {
    DEFAULT_CHAIN_LENGTH
}
fn default_reps() -> usize {
    DEFAULT_REPS
}
fn default_parameter() -> String {
    "t".into()
}

fn shape_of(v: &Value) -> String {
    match v {
        Value::Array(rows) if rows.iter().all(Value::is_array) => {
            let cols: Vec<usize> = rows.iter().map(|r| r.as_array().map_or(0, Vec::len)).collect();
            if cols.windows(2).all(|w| w[0] == w[1]) {
                format!("{}×{}", rows.len(), cols.first().copied().unwrap_or(0))
            } else {
                format!("ragged {}-row array", rows.len())
            }
        }
        Value::Array(items) => format!("flat array of {} entries", items.len()),
        other => format!("a JSON {}", json_kind(other)),
    }
}

fn json_kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

fn numbers(items: &[Value]) -> Option<Vec<f64>> {
    items.iter().map(Value::as_f64).collect()
}

/// Reads a 2×2 matrix given flat `[a, b, c, d]` or nested `[[a, b], [c, d]]`.
fn parse_matrix(field: &str, v: &Value) -> Result<Mat2> {
    let bad = || {
        Error::validation(format!(
            "{field}: expected a 2×2 matrix (4 row-major numbers or 2 rows of 2), got {}",
            shape_of(v)
        ))
    };
    let entries = match v {
        Value::Array(items) if items.len() == 4 && items.iter().all(Value::is_number) => numbers(items),
        Value::Array(rows) if rows.len() == 2 => {
            let mut flat = Vec::with_capacity(4);
            for row in rows {
                match row.as_array() {
                    Some(r) if r.len() == 2 => flat.extend(numbers(r).ok_or_else(bad)?),
                    _ => return Err(bad()),
                }
            }
            Some(flat)
        }
        _ => None,
    }
    .ok_or_else(bad)?;
    Ok(Mat2::new(entries[0], entries[1], entries[2], entries[3]))
}

fn parse_matrices(field: &str, values: &[Value], q: usize) -> Result<Vec<Mat2>> {
    if values.len() != q {
        return Err(Error::validation(format!(
            "{field}: expected {q} matrices (one per symbol), got {}",
            values.len()
        )));
    }
    values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let m = parse_matrix(&format!("{field}[{i}]"), v)?;
            check_invertible(&m).map_err(|why| Error::validation(format!("{field}[{i}] {why}")))?;
            Ok(m)
        })
        .collect()
}

fn check_stochastic(field: &str, rows: &[Vec<f64>], q: usize) -> Result<()> {
    if rows.len() != q {
        return Err(Error::validation(format!(
            "{field}: expected {q} rows, got {}",
            rows.len()
        )));
    }
    StochasticMatrix::new(rows.to_vec()).map_err(|e| match e {
        Error::Validation(msg) => Error::validation(format!("{field}: {msg}")),
        other => other,
    })?;
    Ok(())
}

impl ExperimentConfig {
    /// Parses and validates a JSON document.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| Error::validation(format!("config: {e}")))?;
        ExperimentConfig::from_raw(raw)
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let q = raw.q;
        if q < 2 {
            return Err(Error::validation(format!("q: must be at least 2, got {q}")));
        }
        check_stochastic("P", &raw.p, q)?;
        let a = parse_matrices("A", &raw.a, q)?;
        ProjectiveGrid::new(raw.grid).map_err(|e| Error::validation(format!("grid: {e}")))?;
        if raw.chain_length == 0 {
            return Err(Error::validation("chain_length: must be at least 1"));
        }
        if raw.reps < 2 {
            return Err(Error::validation("reps: must be at least 2 for a standard error"));
        }
        let s = &raw.solver;
        if !(s.tol > 0.0 && s.tol.is_finite()) || s.max_iters == 0 {
            return Err(Error::validation(
                "solver: tol must be positive and max_iters at least 1",
            ));
        }
        if !(s.atom_threshold > 0.0 && s.atom_threshold < 1.0) {
            return Err(Error::validation("solver.atom_threshold: must lie in (0, 1)"));
        }
        let sweep = raw.sweep.map(|sw| parse_sweep(sw, q)).transpose()?;
        if let Some(e) = &raw.energy {
            validate_energy(e)?;
        }
        Ok(ExperimentConfig {
            q,
            p: raw.p,
            a,
            grid: raw.grid,
            chain_length: raw.chain_length,
            reps: raw.reps,
            seed: raw.seed,
            solver: raw.solver,
            sweep,
            energy: raw.energy,
            output: raw.output,
        })
    }

    pub fn stochastic(&self) -> Result<StochasticMatrix> {
        StochasticMatrix::new(self.p.clone())
    }

    pub fn cocycle(&self) -> Result<CocycleMap> {
        CocycleMap::new(self.a.clone())
    }

    pub fn projective_grid(&self) -> Result<ProjectiveGrid> {
        ProjectiveGrid::new(self.grid)
    }

    /// Replaces the grid size, re-checking it.
    pub fn with_grid(mut self, n: usize) -> Result<Self> {
        ProjectiveGrid::new(n).map_err(|e| Error::validation(format!("grid: {e}")))?;
        self.grid = n;
        Ok(self)
    }

    /// Pretty JSON echo of the normalized configuration.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }
}

fn parse_sweep(raw: RawSweep, q: usize) -> Result<SweepConfig> {
    if raw.values.is_empty() {
        return Err(Error::validation("sweep.values: must not be empty"));
    }
    if let Some(k) = raw.values.iter().position(|t| !t.is_finite()) {
        return Err(Error::validation(format!("sweep.values[{k}]: not a finite number")));
    }
    let target_matrices = raw
        .target_matrices
        .as_deref()
        .map(|b| {
            if b.len() != q {
                return Err(Error::validation(format!(
                    "sweep.B: expected {q} matrices, got {}",
                    b.len()
                )));
            }
            b.iter()
                .enumerate()
                .map(|(i, v)| parse_matrix(&format!("sweep.B[{i}]"), v))
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?;
    if let Some(rows) = &raw.target_stochastic {
        check_stochastic("sweep.Q", rows, q)?;
    }
    match raw.family {
        SweepFamily::MatrixBlend if target_matrices.is_none() => {
            return Err(Error::validation("sweep.B: required by family matrix_blend"))
        }
        SweepFamily::MarkovBlend if raw.target_stochastic.is_none() => {
            return Err(Error::validation("sweep.Q: required by family markov_blend"))
        }
        _ => {}
    }
    if raw.family == SweepFamily::MarkovBlend {
        if let Some(k) = raw.values.iter().position(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::validation(format!(
                "sweep.values[{k}]: markov_blend needs t in [0, 1], got {}",
                raw.values[k]
            )));
        }
    }
    Ok(SweepConfig {
        parameter: raw.parameter,
        family: raw.family,
        values: raw.values,
        target_matrices,
        target_stochastic: raw.target_stochastic,
    })
}

fn validate_energy(e: &EnergyConfig) -> Result<()> {
    if let Some(d) = e.delta {
        if !(d > 0.0 && d <= 1.0) {
            return Err(Error::validation(format!("energy.delta: must lie in (0, 1], got {d}")));
        }
    }
    if !(e.u1_radius > 0.0 && e.u1_radius < FRAC_PI_4) {
        return Err(Error::validation(format!(
            "energy.u1_radius: must lie in (0, π/4), got {}",
            e.u1_radius
        )));
    }
    if let Some(c) = e.u1_center {
        if !c.is_finite() {
            return Err(Error::validation("energy.u1_center: not a finite number"));
        }
    }
    if e.l == Some(0) {
        return Err(Error::validation("energy.l: must be at least 1"));
    }
    if !(e.atom_mass > 0.0 && e.atom_mass <= 1.0) {
        return Err(Error::validation("energy.atom_mass: must lie in (0, 1]"));
    }
    if e.atom_width == 0 {
        return Err(Error::validation("energy.atom_width: must be at least 1"));
    }
    Ok(())
}

/// Reads and validates a configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path.as_ref())?;
    ExperimentConfig::from_json(&text)
}
