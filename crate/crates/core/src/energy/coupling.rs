use rayon::prelude::*;
use serde::Serialize;

use super::kernel::{Arc, EnergyParams, GridKernel};
use super::transport::solve_transport;
use crate::error::{Error, Result};
use crate::markov::StochasticMatrix;
use crate::stationary::{GridMeasure, MeasureVector, ProjectiveGrid, PushPlan, TransferOperator};

/// Largest support (bins with positive mass) the exact solver accepts.
pub const SUPPORT_CAP: usize = 256;
/// Marginal and symmetry checks use this tolerance.
pub const MARGINAL_TOL: f64 = 1e-10;

/// Nonnegative masses on `grid × grid`, stored row-major: `(a, b)` at `a·N + b`.
/// The first marginal sums rows, the second sums columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridCoupling {
    n: usize,
    mass: Vec<f64>,
}

impl GridCoupling {
    pub fn new(n: usize, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != n * n {
            return Err(Error::validation(format!(
                "coupling table has {} cells, expected {}",
                mass.len(),
                n * n
            )));
        }
        if let Some(k) = mass.iter().position(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::validation(format!(
                "coupling cell ({}, {}) has mass {}",
                k / n,
                k % n,
                mass[k]
            )));
        }
        Ok(GridCoupling { n, mass })
    }

    pub fn zeros(n: usize) -> Self {
        GridCoupling {
            n,
            mass: vec![0.0; n * n],
        }
    }

    /// `η1 × η2`.
    pub fn product(eta1: &GridMeasure, eta2: &GridMeasure) -> Self {
        let n = eta1.len();
        let mut mass = Vec::with_capacity(n * n);
        for &x in eta1.masses() {
            mass.extend(eta2.masses().iter().map(|y| x * y));
        }
        GridCoupling { n, mass }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cells(&self) -> &[f64] {
        &self.mass
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.mass[a * self.n + b]
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn first_marginal(&self) -> GridMeasure {
        let masses = self.mass.chunks(self.n).map(|row| row.iter().sum()).collect();
        GridMeasure::new(masses).expect("sums of nonnegative cells")
    }

    pub fn second_marginal(&self) -> GridMeasure {
        let mut masses = vec![0.0; self.n];
        for row in self.mass.chunks(self.n) {
            for (acc, m) in masses.iter_mut().zip(row) {
                *acc += m;
            }
        }
        GridMeasure::new(masses).expect("sums of nonnegative cells")
    }

    /// Largest per-bin deviation of the two marginals from `eta1`, `eta2`.
    pub fn marginal_error(&self, eta1: &GridMeasure, eta2: &GridMeasure) -> f64 {
        let dev = |x: &GridMeasure, y: &GridMeasure| {
            x.masses()
                .iter()
                .zip(y.masses())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        dev(&self.first_marginal(), eta1).max(dev(&self.second_marginal(), eta2))
    }

    /// Image under the coordinate swap `ι`.
    pub fn transpose(&self) -> GridCoupling {
        let n = self.n;
        let mut mass = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                mass[b * n + a] = self.mass[a * n + b];
            }
        }
        GridCoupling { n, mass }
    }

    /// `(ξ + ιξ) / 2`.
    pub fn symmetrized(&self) -> GridCoupling {
        let t = self.transpose();
        GridCoupling {
            n: self.n,
            mass: self.mass.iter().zip(&t.mass).map(|(x, y)| 0.5 * (x + y)).collect(),
        }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let n = self.n;
        (0..n).all(|a| (a + 1..n).all(|b| (self.mass[a * n + b] - self.mass[b * n + a]).abs() <= tol))
    }

    /// Pushforward by `α × α`, splitting each coordinate linearly.
    pub fn pushforward(&self, plan: &PushPlan) -> GridCoupling {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for a in 0..n {
            let (la, wa) = plan.target(a);
            let ha = (la + 1) % n;
            for b in 0..n {
                let m = self.mass[a * n + b];
                if m == 0.0 {
                    continue;
                }
                let (lb, wb) = plan.target(b);
                let hb = (lb + 1) % n;
                let m_lo = wa * m;
                let m_hi = m - m_lo;
                let m_lo_lo = wb * m_lo;
                let m_hi_lo = wb * m_hi;
                out[la * n + lb] += m_lo_lo;
                out[la * n + hb] += m_lo - m_lo_lo;
                out[ha * n + lb] += m_hi_lo;
                out[ha * n + hb] += m_hi - m_hi_lo;
            }
        }
        GridCoupling { n, mass: out }
    }

    fn add_scaled(&mut self, other: &GridCoupling, s: f64) {
        for (x, y) in self.mass.iter_mut().zip(&other.mass) {
            *x += s * y;
        }
    }
}

/// `E_δ(ξ) = Σ ξ(a, b) Ψ(a, b)`; infinite iff a same-bin cell inside
/// `U1 × U1` carries mass.
pub fn coupling_energy(xi: &GridCoupling, grid: &ProjectiveGrid, params: &EnergyParams) -> f64 {
    GridKernel::new(grid, params).integrate(&xi.mass)
}

/// One coupling per symbol on a shared grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingVector {
    grid: ProjectiveGrid,
    components: Vec<GridCoupling>,
}

impl CouplingVector {
    pub fn new(grid: ProjectiveGrid, components: Vec<GridCoupling>) -> Result<Self> {
        if let Some(i) = components.iter().position(|c| c.n != grid.n()) {
            return Err(Error::validation(format!(
                "coupling {i} is on a grid of {} bins, expected {}",
                components[i].n,
                grid.n()
            )));
        }
        Ok(CouplingVector { grid, components })
    }

    /// Product self-couplings `η_i × η_i`.
    pub fn product(eta: &MeasureVector) -> Self {
        CouplingVector {
            grid: *eta.grid(),
            components: eta.components().iter().map(|c| GridCoupling::product(c, c)).collect(),
        }
    }

    pub fn grid(&self) -> &ProjectiveGrid {
        &self.grid
    }

    pub fn q(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, i: usize) -> &GridCoupling {
        &self.components[i]
    }

    pub fn components(&self) -> &[GridCoupling] {
        &self.components
    }

    pub fn first_marginals(&self) -> MeasureVector {
        let comps = self.components.iter().map(|c| c.first_marginal()).collect();
        MeasureVector::new(self.grid, comps).expect("grid sizes agree")
    }

    pub fn second_marginals(&self) -> MeasureVector {
        let comps = self.components.iter().map(|c| c.second_marginal()).collect();
        MeasureVector::new(self.grid, comps).expect("grid sizes agree")
    }

    /// Per-symbol energies `E_δ(ξ_i)`.
    pub fn energies(&self, params: &EnergyParams) -> Vec<f64> {
        let kernel = GridKernel::new(&self.grid, params);
        self.components.par_iter().map(|c| kernel.integrate(&c.mass)).collect()
    }

    /// `Σ p_i E_δ(ξ_i)`.
    pub fn weighted_energy(&self, p: &StochasticMatrix, params: &EnergyParams) -> f64 {
        weighted(&self.energies(params), p.stationary())
    }
}

pub(crate) fn weighted(values: &[f64], p: &[f64]) -> f64 {
    values
        .iter()
        .zip(p)
        .map(|(e, pi)| if *pi > 0.0 { pi * e } else { 0.0 })
        .sum()
}

/// One step of the diagonal action:
/// `(𝔓ξ)_j = Σ_i (p_i P_{ij} / p_j) (A(i) × A(i))_* ξ_i`.
pub fn diagonal_apply(op: &TransferOperator, xi: &CouplingVector) -> Result<CouplingVector> {
    if xi.grid != *op.grid() || xi.q() != op.q() {
        return Err(Error::validation(
            "coupling vector does not match the transfer operator",
        ));
    }
    let pushed: Vec<GridCoupling> = xi
        .components
        .par_iter()
        .enumerate()
        .map(|(i, c)| c.pushforward(op.plan(i)))
        .collect();
    let n = xi.grid.n();
    let components = (0..op.q())
        .into_par_iter()
        .map(|j| {
            let mut out = GridCoupling::zeros(n);
            for (i, push) in pushed.iter().enumerate() {
                let w = op.weight(i, j);
                if w != 0.0 {
                    out.add_scaled(push, w);
                }
            }
            out
        })
        .collect();
    Ok(CouplingVector {
        grid: xi.grid,
        components,
    })
}

/// `𝔓^l ξ`.
pub fn diagonal_transfer(op: &TransferOperator, xi: &CouplingVector, l: usize) -> Result<CouplingVector> {
    let mut out = xi.clone();
    for _ in 0..l {
        out = diagonal_apply(op, &out)?;
    }
    Ok(out)
}

/// Result of [`min_energy_coupling`].
#[derive(Debug, Clone, PartialEq)]
pub struct MinCoupling {
    /// `+∞` when every coupling charges the diagonal of `U1`.
    pub energy: f64,
    pub coupling: Option<GridCoupling>,
}

fn support(eta: &GridMeasure) -> Vec<usize> {
    eta.masses()
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > 0.0)
        .map(|(b, _)| b)
        .collect()
}

/// `e_δ(η1, η2)`: exact minimum of `E_δ` over couplings, with the infinite
/// diagonal cells of `U1` treated as forbidden.
pub fn min_energy_coupling(
    eta1: &GridMeasure,
    eta2: &GridMeasure,
    grid: &ProjectiveGrid,
    params: &EnergyParams,
) -> Result<MinCoupling> {
    let n = grid.n();
    if eta1.len() != n || eta2.len() != n {
        return Err(Error::validation("measures do not match the grid"));
    }
    let (t1, t2) = (eta1.total(), eta2.total());
    if (t1 - t2).abs() > MARGINAL_TOL * t1.max(t2).max(1.0) {
        return Err(Error::validation(format!(
            "measures have different masses {t1} and {t2}"
        )));
    }
    let (s1, s2) = (support(eta1), support(eta2));
    if s1.len() > SUPPORT_CAP || s2.len() > SUPPORT_CAP {
        return Err(Error::Size(format!(
            "supports of {} and {} bins exceed the solver cap of {SUPPORT_CAP}; use a coarser grid",
            s1.len(),
            s2.len()
        )));
    }
    let kernel = GridKernel::new(grid, params);
    let cost: Vec<Vec<f64>> = s1
        .iter()
        .map(|&a| s2.iter().map(|&b| kernel.value(a, b)).collect())
        .collect();
    let supply: Vec<f64> = s1.iter().map(|&a| eta1.masses()[a]).collect();
    let demand: Vec<f64> = s2.iter().map(|&b| eta2.masses()[b]).collect();
    let Some(plan) = solve_transport(&supply, &demand, &cost) else {
        return Ok(MinCoupling {
            energy: f64::INFINITY,
            coupling: None,
        });
    };
    let mut xi = GridCoupling::zeros(n);
    for (k, &a) in s1.iter().enumerate() {
        for (l, &b) in s2.iter().enumerate() {
            xi.mass[a * n + b] = plan.flow[k][l];
        }
    }
    Ok(MinCoupling {
        energy: plan.cost,
        coupling: Some(xi),
    })
}

/// `Σ p_i e_δ(η_i, η_i)`.
pub fn vector_energy(eta: &MeasureVector, p: &StochasticMatrix, params: &EnergyParams) -> Result<f64> {
    if eta.q() != p.q() {
        return Err(Error::validation(
            "measure vector and stochastic matrix have different alphabets",
        ));
    }
    let grid = *eta.grid();
    let energies = eta
        .components()
        .par_iter()
        .map(|c| min_energy_coupling(c, c, &grid, params).map(|m| m.energy))
        .collect::<Result<Vec<_>>>()?;
    Ok(weighted(&energies, p.stationary()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FatAtom {
    /// Some bin of `U1` holds more than half the mass: every self-coupling has infinite energy.
    Infinite,
    /// Every bin of the closure of `U1` holds less than half.
    Finite,
    /// Some bin of the closure of `U1` holds exactly half, a case the dichotomy leaves open.
    Boundary,
}

const HALF_TOL: f64 = 1e-9;

pub fn fat_atom_check(eta: &GridMeasure, grid: &ProjectiveGrid, params: &EnergyParams) -> FatAtom {
    let half = eta.total() / 2.0;
    let mut verdict = FatAtom::Finite;
    for (b, &m) in eta.masses().iter().enumerate() {
        let c = grid.center(b);
        if !params.u1.contains_closed(c) {
            continue;
        }
        if (m - half).abs() <= HALF_TOL {
            verdict = FatAtom::Boundary;
        } else if m > half {
            if params.u1.contains(c) {
                return FatAtom::Infinite;
            }
            verdict = FatAtom::Boundary;
        }
    }
    verdict
}

/// Output of [`surgery_off_diagonal`].
#[derive(Debug, Clone, PartialEq)]
pub struct Surgery {
    pub coupling: GridCoupling,
    /// `‖ζ‖`: mass removed from `U2ᶜ × U2ᶜ`.
    pub zeta_mass: f64,
    /// `‖η³‖`: mass of the coupling on `U3 × U3`.
    pub eta3_mass: f64,
}

/// Moves the mass of `ξ` on `U2ᶜ × U2ᶜ` next to `U3`:
///
/// `ξ' = ξ − ξ|U2ᶜ×U2ᶜ − (‖ζ‖/‖η³‖) ξ|U3×U3 + (ζ₁ × η³₂ + η³₁ × ζ₂) / ‖η³‖`
///
/// where `ζ₁, ζ₂` are the marginals of `ξ|U2ᶜ×U2ᶜ` and `η³₁, η³₂` those of
/// `ξ|U3×U3`. Both marginals of `ξ` are preserved, and symmetric input
/// gives symmetric output. Requires `‖ζ‖ < ‖η³‖`.
pub fn surgery_off_diagonal(xi: &GridCoupling, grid: &ProjectiveGrid, u2: &Arc, u3: &Arc) -> Result<Surgery> {
    let n = grid.n();
    if xi.n != n {
        return Err(Error::validation("coupling does not match the grid"));
    }
    if !u3.is_within(u2) {
        return Err(Error::precondition("U3 must lie inside U2"));
    }
    let in_u2: Vec<bool> = (0..n).map(|b| u2.contains(grid.center(b))).collect();
    let in_u3: Vec<bool> = (0..n).map(|b| u3.contains(grid.center(b))).collect();
    let mut zeta = (vec![0.0; n], vec![0.0; n]);
    let mut eta3 = (vec![0.0; n], vec![0.0; n]);
    for a in 0..n {
        for b in 0..n {
            let m = xi.mass[a * n + b];
            if m == 0.0 {
                continue;
            }
            if !in_u2[a] && !in_u2[b] {
                zeta.0[a] += m;
                zeta.1[b] += m;
            } else if in_u3[a] && in_u3[b] {
                eta3.0[a] += m;
                eta3.1[b] += m;
            }
        }
    }
    let zeta_mass: f64 = zeta.0.iter().sum();
    let eta3_mass: f64 = eta3.0.iter().sum();
    if zeta_mass == 0.0 {
        return Ok(Surgery {
            coupling: xi.clone(),
            zeta_mass,
            eta3_mass,
        });
    }
    if zeta_mass >= eta3_mass {
        return Err(Error::precondition(format!(
            "surgery needs ‖ζ‖ < ‖η³‖, got ‖ζ‖ = {zeta_mass:e}, ‖η³‖ = {eta3_mass:e}"
        )));
    }
    let keep = 1.0 - zeta_mass / eta3_mass;
    let mut mass = xi.mass.clone();
    for a in 0..n {
        for b in 0..n {
            let cell = &mut mass[a * n + b];
            if !in_u2[a] && !in_u2[b] {
                *cell = 0.0;
            } else if in_u3[a] && in_u3[b] {
                *cell *= keep;
            }
        }
    }
    for a in 0..n {
        for b in 0..n {
            let added = (zeta.0[a] * eta3.1[b] + eta3.0[a] * zeta.1[b]) / eta3_mass;
            if added != 0.0 {
                mass[a * n + b] += added;
            }
        }
    }
    Ok(Surgery {
        coupling: GridCoupling { n, mass },
        zeta_mass,
        eta3_mass,
    })
}
