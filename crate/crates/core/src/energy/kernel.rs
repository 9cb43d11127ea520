use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use serde::{Deserialize, Serialize};

use crate::cocycle::angle_gap;
use crate::error::{Error, Result};
use crate::stationary::ProjectiveGrid;

/// Open arc `{θ : gap(θ, center) < radius}` of the projective line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub center: f64,
    pub radius: f64,
}

impl Arc {
    pub fn new(center: f64, radius: f64) -> Result<Self> {
        if !(center.is_finite() && radius.is_finite() && radius > 0.0 && radius < FRAC_PI_2) {
            return Err(Error::validation(format!(
                "arc radius must lie in (0, π/2), got {radius}"
            )));
        }
        Ok(Arc { center, radius })
    }

    pub fn contains(&self, theta: f64) -> bool {
        angle_gap(theta, self.center) < self.radius
    }

    pub fn contains_closed(&self, theta: f64) -> bool {
        angle_gap(theta, self.center) <= self.radius
    }

    /// Concentric arc with radius scaled by `factor`.
    pub fn shrunk(&self, factor: f64) -> Arc {
        Arc {
            center: self.center,
            radius: self.radius * factor,
        }
    }

    pub fn is_within(&self, outer: &Arc) -> bool {
        angle_gap(self.center, outer.center) + self.radius <= outer.radius + 1e-12
    }
}

/// Exponent `δ` and the neighbourhood `U1` of the kernel `Ψ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub delta: f64,
    pub u1: Arc,
    /// Finite stand-in for `+∞` in reports.
    pub cap: f64,
}

pub const DEFAULT_CAP: f64 = 1e300;

impl EnergyParams {
    pub fn new(delta: f64, u1: Arc) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::validation(format!("δ must lie in (0, 1], got {delta}")));
        }
        if u1.radius >= FRAC_PI_4 {
            return Err(Error::validation(format!(
                "U1 radius must be below π/4, got {}",
                u1.radius
            )));
        }
        Ok(EnergyParams {
            delta,
            u1,
            cap: DEFAULT_CAP,
        })
    }

    /// `value`, or the reporting cap when it is infinite.
    pub fn capped(&self, value: f64) -> f64 {
        value.min(self.cap)
    }
}

/// Projective distance normalized to diameter one.
pub fn projective_distance(u: f64, w: f64) -> f64 {
    angle_gap(u, w) / FRAC_PI_2
}

/// `Ψ(u, w) = d(u, w)^{-δ}` when both points lie in `U1`, `1` otherwise.
pub fn energy_kernel(u: f64, w: f64, params: &EnergyParams) -> f64 {
    if params.u1.contains(u) && params.u1.contains(w) {
        let d = projective_distance(u, w);
        if d == 0.0 {
            f64::INFINITY
        } else {
            d.powf(-params.delta)
        }
    } else {
        1.0
    }
}

/// The kernel evaluated at bin centers. A bin belongs to `U1` when its
/// center does; the same bin twice inside `U1` is the grid's diagonal and
/// has infinite cost.
#[derive(Debug, Clone)]
pub struct GridKernel {
    n: usize,
    inside: Vec<usize>,
    in_u1: Vec<bool>,
    /// `values[k * inside.len() + l]` for `inside[k]`, `inside[l]`.
    values: Vec<f64>,
}

impl GridKernel {
    pub fn new(grid: &ProjectiveGrid, params: &EnergyParams) -> Self {
        let n = grid.n();
        let in_u1: Vec<bool> = (0..n).map(|b| params.u1.contains(grid.center(b))).collect();
        let inside: Vec<usize> = (0..n).filter(|&b| in_u1[b]).collect();
        let mut values = Vec::with_capacity(inside.len() * inside.len());
        for &a in &inside {
            for &b in &inside {
                values.push(if a == b {
                    f64::INFINITY
                } else {
                    energy_kernel(grid.center(a), grid.center(b), params)
                });
            }
        }
        GridKernel {
            n,
            inside,
            in_u1,
            values,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn in_u1(&self, b: usize) -> bool {
        self.in_u1[b]
    }

    /// Bins of `U1`, ascending.
    pub fn inside(&self) -> &[usize] {
        &self.inside
    }

    pub fn value(&self, a: usize, b: usize) -> f64 {
        if !(self.in_u1[a] && self.in_u1[b]) {
            return 1.0;
        }
        let k = self.inside.binary_search(&a).expect("bin in U1");
        let l = self.inside.binary_search(&b).expect("bin in U1");
        self.values[k * self.inside.len() + l]
    }

    /// `Σ mass · Ψ` for a dense row-major `N × N` mass table. Cells
    /// outside `U1 × U1` cost one, so only the `U1` block is visited.
    pub fn integrate(&self, mass: &[f64]) -> f64 {
        let n = self.n;
        let total: f64 = mass.iter().sum();
        let k = self.inside.len();
        let mut block_mass = 0.0;
        let mut block_energy = 0.0;
        for (ka, &a) in self.inside.iter().enumerate() {
            for (kb, &b) in self.inside.iter().enumerate() {
                let m = mass[a * n + b];
                if m > 0.0 {
                    let psi = self.values[ka * k + kb];
                    if psi.is_infinite() {
                        return f64::INFINITY;
                    }
                    block_mass += m;
                    block_energy += m * psi;
                }
            }
        }
        total - block_mass + block_energy
    }
}
