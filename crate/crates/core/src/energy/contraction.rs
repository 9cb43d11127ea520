use serde::Serialize;

use super::coupling::{
    diagonal_transfer, min_energy_coupling, surgery_off_diagonal, weighted, CouplingVector, GridCoupling,
};
use super::kernel::{Arc, EnergyParams, GridKernel};
use crate::cocycle::{
    angle_gap, expansion_profile, fixes, projective_action, word_product, CocycleMap, ProjectivePoint,
};
use crate::error::{Error, Result};
use crate::markov::StochasticMatrix;
use crate::stationary::{MeasureVector, TransferOperator};

/// Parameters of [`contraction_experiment`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionSetup {
    pub params: EnergyParams,
    /// Block length of the diagonal action per round.
    pub l: usize,
    /// Number of surgery + transfer rounds.
    pub iters: usize,
}

impl ContractionSetup {
    /// `U2`, concentric with `U1` at two thirds of its radius.
    pub fn u2(&self) -> Arc {
        self.params.u1.shrunk(2.0 / 3.0)
    }

    /// `U3`, concentric with `U1` at one third of its radius.
    pub fn u3(&self) -> Arc {
        self.params.u1.shrunk(1.0 / 3.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StartCoupling {
    Product,
    /// Symmetrized minimum-energy self-couplings, used when a product
    /// coupling charges the diagonal of `U1`.
    MinEnergy,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Round {
    pub energies: Vec<f64>,
    /// `Σ p_i E_δ(ξ_i)`.
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionTrace {
    pub rounds: Vec<Round>,
    pub l: usize,
    pub delta: f64,
    /// Expansion constant certified at block length `l`.
    pub c: f64,
    /// `1 − cδ`.
    pub factor: f64,
    /// Smallest `C ≥ 0` with `E_{n+1} ≤ C + (1 − cδ) E_n` along the aggregate trace.
    pub c_emp: f64,
    pub c_emp_per_symbol: Vec<f64>,
    pub start: StartCoupling,
    /// Why the run stopped before `iters` rounds, if it did.
    pub truncated: Option<String>,
    /// Largest distance from the reference point to a preimage of the
    /// closure of `U1` under a length-`l` product: any neighbourhood on
    /// which the expansion estimates are used must have at least this radius.
    pub preimage_radius: f64,
}

impl ContractionTrace {
    /// `C_emp + (1 − cδ) E_n` for the aggregate series.
    pub fn bound_rhs(&self, n: usize) -> f64 {
        self.c_emp + self.factor * self.rounds[n].total
    }

    pub fn bound_rhs_symbol(&self, n: usize, i: usize) -> f64 {
        self.c_emp_per_symbol[i] + self.factor * self.rounds[n].energies[i]
    }

    /// `E_{n+1} ≤ C_emp + (1 − cδ) E_n` for every recorded step.
    pub fn recursion_holds(&self) -> bool {
        self.rounds
            .windows(2)
            .enumerate()
            .all(|(n, w)| w[1].total <= self.bound_rhs(n) * (1.0 + 1e-12))
    }

    /// `sup_n E_n ≤ C_emp / (cδ) + E_0`.
    pub fn sup_bound_holds(&self) -> bool {
        let Some(first) = self.rounds.first() else {
            return false;
        };
        let bound = self.c_emp / (1.0 - self.factor) + first.total;
        self.rounds.iter().all(|r| r.total <= bound * (1.0 + 1e-12))
    }
}

/// Projective maps send arcs to arcs, so the preimage of the arc around
/// the fixed point `v` is the arc between the preimages of its endpoints.
fn preimage_radius(a: &CocycleMap, p: &StochasticMatrix, u1: &Arc, l: usize) -> Result<f64> {
    let v = u1.center;
    let mut radius: f64 = 0.0;
    for (word, _) in p.enumerate_cylinders(l)? {
        let inv = word_product(a, &word)?
            .inverse()
            .ok_or_else(|| Error::Numerical("singular word product".into()))?;
        for end in [v - u1.radius, v + u1.radius] {
            let back = projective_action(&inv, ProjectivePoint::new(end)).theta();
            radius = radius.max(angle_gap(back, v));
        }
    }
    Ok(radius)
}

fn smallest_c(series: impl Iterator<Item = (f64, f64)>, factor: f64) -> f64 {
    series.map(|(prev, next)| next - factor * prev).fold(0.0, f64::max)
}

/// Starting from self-couplings of `eta`, alternates the off-diagonal
/// surgery with `l` steps of the diagonal action and records the weighted
/// energy after every round.
///
/// The reference point is the center of `U1`; it must be invariant and
/// expanding at block length `l`. The run stops early, with the reason in
/// [`ContractionTrace::truncated`], when the surgery's mass condition
/// fails or an energy becomes infinite.
pub fn contraction_experiment(
    a: &CocycleMap,
    p: &StochasticMatrix,
    eta: &MeasureVector,
    setup: &ContractionSetup,
) -> Result<ContractionTrace> {
    a.ensure_alphabet(p)?;
    if eta.q() != p.q() {
        return Err(Error::validation(
            "measure vector and stochastic matrix have different alphabets",
        ));
    }
    eta.validate_unit()?;
    if setup.l == 0 {
        return Err(Error::validation("block length l must be at least 1"));
    }
    let params = setup.params;
    let v = ProjectivePoint::new(params.u1.center);
    if let Some(i) = a.matrices().iter().position(|m| !fixes(m, v)) {
        return Err(Error::precondition(format!(
            "the center θ = {} of U1 is not invariant under A({i})",
            v.theta()
        )));
    }
    let (integrals, failing) = expansion_profile(a, p, v, setup.l)?;
    if !failing.is_empty() {
        let detail: Vec<String> = failing
            .iter()
            .map(|&i| format!("symbol {i}: integral {:e} ≤ 0 = 4c·p_{i} at any c > 0", integrals[i]))
            .collect();
        return Err(Error::precondition(format!(
            "θ = {} is not expanding at l = {}: {}",
            v.theta(),
            setup.l,
            detail.join("; ")
        )));
    }
    let c = integrals
        .iter()
        .zip(p.stationary())
        .map(|(x, pi)| x / (4.0 * pi))
        .fold(f64::INFINITY, f64::min);
    let factor = 1.0 - c * params.delta;
    if factor <= 0.0 {
        return Err(Error::precondition(format!(
            "cδ = {} must be below 1",
            c * params.delta
        )));
    }

    let grid = *eta.grid();
    let kernel = GridKernel::new(&grid, &params);
    let mut start = StartCoupling::Product;
    let mut components = Vec::with_capacity(eta.q());
    for (i, c_i) in eta.components().iter().enumerate() {
        let product = GridCoupling::product(c_i, c_i);
        if kernel.integrate(product.cells()).is_finite() {
            components.push(product);
            continue;
        }
        start = StartCoupling::MinEnergy;
        let best = min_energy_coupling(c_i, c_i, &grid, &params)?;
        match best.coupling {
            Some(xi) => components.push(xi.symmetrized()),
            None => {
                return Err(Error::precondition(format!(
                    "component {i} has infinite self-energy (an atom in U1 holds at least half its mass)"
                )))
            }
        }
    }
    // Keep every component on the same footing once any needs the solver.
    if start == StartCoupling::MinEnergy {
        for (i, c_i) in eta.components().iter().enumerate() {
            let product_finite = kernel.integrate(GridCoupling::product(c_i, c_i).cells()).is_finite();
            if product_finite {
                if let Some(xi) = min_energy_coupling(c_i, c_i, &grid, &params)?.coupling {
                    components[i] = xi.symmetrized();
                }
            }
        }
    }
    let mut xi = CouplingVector::new(grid, components)?;
    let op = TransferOperator::new(a, p, grid)?;
    let (u2, u3) = (setup.u2(), setup.u3());

    let record = |xi: &CouplingVector| {
        let energies = xi.energies(&params);
        let total = weighted(&energies, p.stationary());
        Round { energies, total }
    };
    let mut rounds = vec![record(&xi)];
    let mut truncated = None;
    for n in 0..setup.iters {
        let mut operated = Vec::with_capacity(xi.q());
        for (i, comp) in xi.components().iter().enumerate() {
            match surgery_off_diagonal(comp, &grid, &u2, &u3) {
                Ok(s) => operated.push(s.coupling),
                Err(e) => {
                    truncated = Some(format!("round {n}, symbol {i}: {e}"));
                    break;
                }
            }
        }
        if truncated.is_some() {
            break;
        }
        let next = diagonal_transfer(&op, &CouplingVector::new(grid, operated)?, setup.l)?;
        let round = record(&next);
        if !round.total.is_finite() {
            truncated = Some(format!("round {n}: energy became infinite"));
            break;
        }
        rounds.push(round);
        xi = next;
    }

    let c_emp = smallest_c(rounds.windows(2).map(|w| (w[0].total, w[1].total)), factor);
    let c_emp_per_symbol = (0..eta.q())
        .map(|i| smallest_c(rounds.windows(2).map(|w| (w[0].energies[i], w[1].energies[i])), factor))
        .collect();
    Ok(ContractionTrace {
        rounds,
        l: setup.l,
        delta: params.delta,
        c,
        factor,
        c_emp,
        c_emp_per_symbol,
        start,
        truncated,
        preimage_radius: preimage_radius(a, p, &params.u1, setup.l)?,
    })
}
