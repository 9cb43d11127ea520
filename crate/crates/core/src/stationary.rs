//! Measure vectors on a uniform grid of the projective line, the
//! transfer operator `𝒫`, and its stationary vectors.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::cocycle::{angle_gap, eigendirections, normalize_angle, projective_action, CocycleMap, ProjectivePoint};
use crate::error::{Error, Result};
use crate::lyapunov::furstenberg_integral;
use crate::markov::StochasticMatrix;
use crate::matrix::Mat2;

pub const DEFAULT_GRID: usize = 1024;
pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITERS: usize = 5000;
pub const DEFAULT_ATOM_THRESHOLD: f64 = 0.05;
/// Total masses of unit measures must be one within this tolerance.
pub const UNIT_TOL: f64 = 1e-10;
/// Fraction of an atom's mass the refined grid must keep near it.
pub const REFINEMENT_RETENTION: f64 = 0.9;
/// Longest averaging block of the stationary solver.
const MAX_BLOCK: usize = 256;
/// Images this close to a bin center (in bin widths) land on it exactly.
const SNAP: f64 = 1e-10;

/// `N` bins covering `[0, π)`; bin `b` is `[bπ/N, (b+1)π/N)` with center `(b + ½)π/N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ProjectiveGrid {
    n: usize,
}

impl ProjectiveGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::validation(format!(
                "grid size must be a power of two and at least 8, got {n}"
            )));
        }
        Ok(ProjectiveGrid { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> f64 {
        PI / self.n as f64
    }

    pub fn center(&self, b: usize) -> f64 {
        (b as f64 + 0.5) * self.width()
    }

    pub fn point(&self, b: usize) -> ProjectivePoint {
        ProjectivePoint::new(self.center(b))
    }

    pub fn bin_of(&self, theta: f64) -> usize {
        ((normalize_angle(theta) / self.width()) as usize).min(self.n - 1)
    }

    /// The grid with twice as many bins.
    pub fn refined(&self) -> ProjectiveGrid {
        ProjectiveGrid { n: 2 * self.n }
    }

    /// Linear split of a unit mass at `theta` between the two nearest
    /// centers: `(lo, weight on lo)`, the rest going to `lo + 1 (mod N)`.
    pub fn split(&self, theta: f64) -> (usize, f64) {
        let x = normalize_angle(theta) / self.width() - 0.5;
        let mut floor = x.floor();
        let mut frac = x - floor;
        if frac < SNAP {
            frac = 0.0;
        } else if frac > 1.0 - SNAP {
            floor += 1.0;
            frac = 0.0;
        }
        let lo = (floor as i64).rem_euclid(self.n as i64) as usize;
        (lo, 1.0 - frac)
    }
}

/// Nonnegative masses on the bins of a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridMeasure {
    masses: Vec<f64>,
}

impl GridMeasure {
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        if let Some(b) = masses.iter().position(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::validation(format!(
                "bin {b} has mass {}; masses must be finite and nonnegative",
                masses[b]
            )));
        }
        Ok(GridMeasure { masses })
    }

    pub fn zeros(n: usize) -> Self {
        GridMeasure { masses: vec![0.0; n] }
    }

    pub fn uniform(n: usize) -> Self {
        GridMeasure {
            masses: vec![1.0 / n as f64; n],
        }
    }

    pub fn dirac_at_bin(n: usize, b: usize) -> Self {
        let mut m = GridMeasure::zeros(n);
        m.masses[b] = 1.0;
        m
    }

    /// Unit mass at `theta`, split linearly between the two nearest centers.
    pub fn dirac(grid: &ProjectiveGrid, theta: f64) -> Self {
        let mut m = GridMeasure::zeros(grid.n());
        m.deposit(grid, theta, 1.0);
        m
    }

    fn deposit(&mut self, grid: &ProjectiveGrid, theta: f64, mass: f64) {
        let (lo, w) = grid.split(theta);
        let n = self.masses.len();
        self.masses[lo] += w * mass;
        self.masses[(lo + 1) % n] += (1.0 - w) * mass;
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn scaled(&self, s: f64) -> GridMeasure {
        GridMeasure {
            masses: self.masses.iter().map(|m| m * s).collect(),
        }
    }

    /// `a·self + (1 − a)·other`.
    pub fn mix(&self, other: &GridMeasure, a: f64) -> GridMeasure {
        GridMeasure {
            masses: self
                .masses
                .iter()
                .zip(&other.masses)
                .map(|(x, y)| a * x + (1.0 - a) * y)
                .collect(),
        }
    }

    /// `½ Σ |self_b − other_b|`.
    pub fn tv_distance(&self, other: &GridMeasure) -> f64 {
        0.5 * self
            .masses
            .iter()
            .zip(&other.masses)
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>()
    }

    fn add_scaled(&mut self, other: &GridMeasure, s: f64) {
        for (x, y) in self.masses.iter_mut().zip(&other.masses) {
            *x += s * y;
        }
    }
}

/// Image of every bin center under one matrix, as a two-bin split.
#[derive(Debug, Clone)]
pub struct PushPlan {
    targets: Vec<(usize, f64)>,
}

impl PushPlan {
    pub fn new(alpha: &Mat2, grid: &ProjectiveGrid) -> Self {
        let targets = (0..grid.n())
            .map(|b| grid.split(projective_action(alpha, grid.point(b)).theta()))
            .collect();
        PushPlan { targets }
    }

    /// `(lo, weight on lo)` for bin `b`; the rest goes to `lo + 1 (mod N)`.
    pub fn target(&self, b: usize) -> (usize, f64) {
        self.targets[b]
    }

    pub fn apply(&self, nu: &GridMeasure) -> GridMeasure {
        let n = self.targets.len();
        let mut out = vec![0.0; n];
        for (&(lo, w), &m) in self.targets.iter().zip(&nu.masses) {
            if m != 0.0 {
                let to_lo = w * m;
                out[lo] += to_lo;
                out[(lo + 1) % n] += m - to_lo;
            }
        }
        GridMeasure { masses: out }
    }
}

/// Pushforward `α_* ν` on the grid: each bin's mass moves to the image of
/// its center, split linearly between the two nearest centers.
pub fn grid_pushforward(alpha: &Mat2, nu: &GridMeasure, grid: &ProjectiveGrid) -> GridMeasure {
    PushPlan::new(alpha, grid).apply(nu)
}

/// One grid measure per symbol, all on the same grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureVector {
    grid: ProjectiveGrid,
    components: Vec<GridMeasure>,
}

impl MeasureVector {
    pub fn new(grid: ProjectiveGrid, components: Vec<GridMeasure>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::validation("measure vector needs at least one component"));
        }
        if let Some(i) = components.iter().position(|c| c.len() != grid.n()) {
            return Err(Error::validation(format!(
                "component {i} has {} bins, grid has {}",
                components[i].len(),
                grid.n()
            )));
        }
        Ok(MeasureVector { grid, components })
    }

    pub fn uniform(grid: ProjectiveGrid, q: usize) -> Self {
        MeasureVector {
            grid,
            components: vec![GridMeasure::uniform(grid.n()); q],
        }
    }

    /// Every component a unit mass at `theta`.
    pub fn dirac(grid: ProjectiveGrid, q: usize, theta: f64) -> Self {
        MeasureVector {
            grid,
            components: vec![GridMeasure::dirac(&grid, theta); q],
        }
    }

    pub fn dirac_at_bin(grid: ProjectiveGrid, q: usize, b: usize) -> Self {
        MeasureVector {
            grid,
            components: vec![GridMeasure::dirac_at_bin(grid.n(), b); q],
        }
    }

    pub fn grid(&self) -> &ProjectiveGrid {
        &self.grid
    }

    pub fn q(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, i: usize) -> &GridMeasure {
        &self.components[i]
    }

    pub fn components(&self) -> &[GridMeasure] {
        &self.components
    }

    pub fn is_unit(&self) -> bool {
        self.components.iter().all(|c| (c.total() - 1.0).abs() <= UNIT_TOL)
    }

    pub fn validate_unit(&self) -> Result<()> {
        match self.components.iter().position(|c| (c.total() - 1.0).abs() > UNIT_TOL) {
            Some(i) => Err(Error::validation(format!(
                "component {i} has total mass {}, expected 1",
                self.components[i].total()
            ))),
            None => Ok(()),
        }
    }

    /// Componentwise `a·self + (1 − a)·other`.
    pub fn mix(&self, other: &MeasureVector, a: f64) -> Result<MeasureVector> {
        self.ensure_compatible(other)?;
        Ok(MeasureVector {
            grid: self.grid,
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(x, y)| x.mix(y, a))
                .collect(),
        })
    }

    /// Largest componentwise total-variation distance.
    pub fn tv_distance(&self, other: &MeasureVector) -> f64 {
        self.components
            .iter()
            .zip(&other.components)
            .map(|(x, y)| x.tv_distance(y))
            .fold(0.0, f64::max)
    }

    fn ensure_compatible(&self, other: &MeasureVector) -> Result<()> {
        if self.grid != other.grid || self.q() != other.q() {
            return Err(Error::validation(
                "measure vectors live on different grids or alphabets",
            ));
        }
        Ok(())
    }

    /// Rows `(symbol, bin, theta_center, mass)`.
    pub fn rows(&self) -> impl Iterator<Item = (usize, usize, f64, f64)> + '_ {
        self.components.iter().enumerate().flat_map(move |(i, c)| {
            c.masses
                .iter()
                .enumerate()
                .map(move |(b, &m)| (i, b, self.grid.center(b), m))
        })
    }
}

/// `(𝒫η)_j = Σ_i (p_i P_{ij} / p_j) · A(i)_* η_i`, with the pushforwards
/// precomputed for one grid.
#[derive(Debug, Clone)]
pub struct TransferOperator {
    grid: ProjectiveGrid,
    plans: Vec<PushPlan>,
    /// `weights[i][j] = p_i P_{ij} / p_j`.
    weights: Vec<Vec<f64>>,
}

impl TransferOperator {
    pub fn new(a: &CocycleMap, p: &StochasticMatrix, grid: ProjectiveGrid) -> Result<Self> {
        a.ensure_alphabet(p)?;
        let q = p.q();
        let plans = a.matrices().par_iter().map(|m| PushPlan::new(m, &grid)).collect();
        let weights = (0..q)
            .map(|i| (0..q).map(|j| p.backward_weight(i, j)).collect())
            .collect();
        Ok(TransferOperator { grid, plans, weights })
    }

    pub fn grid(&self) -> &ProjectiveGrid {
        &self.grid
    }

    pub fn q(&self) -> usize {
        self.plans.len()
    }

    pub fn plan(&self, i: usize) -> &PushPlan {
        &self.plans[i]
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i][j]
    }

    fn check(&self, eta: &MeasureVector) -> Result<()> {
        if eta.grid != self.grid || eta.q() != self.q() {
            return Err(Error::validation(format!(
                "measure vector (q = {}, N = {}) does not match the operator (q = {}, N = {})",
                eta.q(),
                eta.grid.n(),
                self.q(),
                self.grid.n()
            )));
        }
        Ok(())
    }

    pub fn apply(&self, eta: &MeasureVector) -> Result<MeasureVector> {
        self.check(eta)?;
        Ok(self.apply_unchecked(eta))
    }

    fn apply_unchecked(&self, eta: &MeasureVector) -> MeasureVector {
        let pushed: Vec<GridMeasure> = self
            .plans
            .par_iter()
            .zip(&eta.components)
            .map(|(plan, c)| plan.apply(c))
            .collect();
        let components = (0..self.q())
            .map(|j| {
                let mut out = GridMeasure::zeros(self.grid.n());
                for (i, push) in pushed.iter().enumerate() {
                    let w = self.weights[i][j];
                    if w != 0.0 {
                        out.add_scaled(push, w);
                    }
                }
                out
            })
            .collect();
        MeasureVector {
            grid: self.grid,
            components,
        }
    }

    /// `max_j TV(η_j, (𝒫η)_j)`.
    pub fn residual(&self, eta: &MeasureVector) -> Result<f64> {
        Ok(self.apply(eta)?.tv_distance(eta))
    }

    /// Fixed point by Cesàro averaging of `𝒫`-iterates.
    ///
    /// Averages run over blocks of doubling length (capped at 256); each
    /// block restarts from the image of the previous average, which keeps
    /// the residual of the average from decaying only like `1/n`. Every
    /// application of `𝒫` counts toward `max_iters`. The best average seen
    /// is returned, flagged unconverged if it misses `tol`.
    pub fn cesaro_stationary(&self, init: &MeasureVector, max_iters: usize, tol: f64) -> Result<StationaryResult> {
        self.check(init)?;
        init.validate_unit()?;
        let mut start = self.apply_unchecked(init);
        let mut best = init.clone();
        let mut best_residual = start.tv_distance(init);
        let mut used = 1;
        let mut block = 1;
        while best_residual > tol && used < max_iters {
            let len = block.min(max_iters - used);
            let mut x = start;
            let mut sum = x.clone();
            for _ in 1..len {
                x = self.apply_unchecked(&x);
                for (s, c) in sum.components.iter_mut().zip(&x.components) {
                    s.add_scaled(c, 1.0);
                }
            }
            let avg = MeasureVector {
                grid: self.grid,
                components: sum.components.iter().map(|c| c.scaled(1.0 / len as f64)).collect(),
            };
            let image = self.apply_unchecked(&avg);
            used += len;
            let residual = image.tv_distance(&avg);
            if residual < best_residual {
                best_residual = residual;
                best = avg;
            }
            start = image;
            block = (2 * block).min(MAX_BLOCK);
        }
        Ok(StationaryResult {
            eta: best,
            residual: best_residual,
            iterations: used,
            converged: best_residual <= tol,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryResult {
    pub eta: MeasureVector,
    pub residual: f64,
    /// Applications of the transfer operator spent.
    pub iterations: usize,
    pub converged: bool,
}

pub fn transfer_apply(a: &CocycleMap, p: &StochasticMatrix, eta: &MeasureVector) -> Result<MeasureVector> {
    TransferOperator::new(a, p, eta.grid)?.apply(eta)
}

pub fn invariance_residual(a: &CocycleMap, p: &StochasticMatrix, eta: &MeasureVector) -> Result<f64> {
    TransferOperator::new(a, p, eta.grid)?.residual(eta)
}

pub fn cesaro_stationary(
    a: &CocycleMap,
    p: &StochasticMatrix,
    init: &MeasureVector,
    max_iters: usize,
    tol: f64,
) -> Result<StationaryResult> {
    TransferOperator::new(a, p, init.grid)?.cesaro_stationary(init, max_iters, tol)
}

/// A concentration of mass found by [`detect_atoms`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Atom {
    pub symbol: usize,
    /// Bin containing `theta`.
    pub bin: usize,
    /// Mass-weighted position of the two-bin window, which recovers the
    /// exact location of a point mass deposited by linear splitting.
    pub theta: f64,
    pub mass: f64,
    /// Mass kept by the two bins of the refined grid around `theta`.
    pub refined_mass: Option<f64>,
}

fn window_atoms(grid: &ProjectiveGrid, symbol: usize, nu: &GridMeasure, tau: f64) -> Vec<Atom> {
    let n = grid.n();
    let m = &nu.masses;
    let window = |b: usize| m[b % n] + m[(b + 1) % n];
    let mut out = Vec::new();
    for b in 0..n {
        let w = window(b);
        if w > tau && w >= window(b + n - 1) && w > window(b + 1) {
            let (lo, hi) = (m[b], m[(b + 1) % n]);
            let c_lo = grid.center(b);
            let c_hi = c_lo + grid.width();
            let theta = normalize_angle((lo * c_lo + hi * c_hi) / w);
            out.push(Atom {
                symbol,
                bin: grid.bin_of(theta),
                theta,
                mass: w,
                refined_mass: None,
            });
        }
    }
    out
}

/// Two-bin windows holding more than `tau` that are local maxima of the
/// window mass. With `refined` (the same vector solved on the grid of
/// size `2N`) a candidate is kept only if the two refined bins around it
/// retain at least 90% of its mass.
pub fn detect_atoms(eta: &MeasureVector, refined: Option<&MeasureVector>, tau: f64) -> Result<Vec<Atom>> {
    if let Some(r) = refined {
        if r.grid.n() != 2 * eta.grid.n() || r.q() != eta.q() {
            return Err(Error::validation(format!(
                "refined vector must have the same alphabet on a grid of {} bins",
                2 * eta.grid.n()
            )));
        }
    }
    let mut atoms = Vec::new();
    for (i, c) in eta.components.iter().enumerate() {
        for mut atom in window_atoms(&eta.grid, i, c, tau) {
            if let Some(r) = refined {
                let (lo, w) = r.grid.split(atom.theta);
                let fine = r.component(i).masses();
                let nf = fine.len();
                // An exact hit on a refined center leaves all weight on `lo`.
                let kept = if w == 1.0 {
                    fine[lo] + fine[(lo + 1) % nf].max(fine[(lo + nf - 1) % nf])
                } else {
                    fine[lo] + fine[(lo + 1) % nf]
                };
                atom.refined_mass = Some(kept);
                if kept < REFINEMENT_RETENTION * atom.mass {
                    continue;
                }
            }
            atoms.push(atom);
        }
    }
    Ok(atoms)
}

/// Outcome of [`verify_atomic_invariant_set`]. Violations are data, not
/// errors: small discrepancies are expected from discretization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomReport {
    /// Locations of the maximal-mass atoms.
    pub set: Vec<f64>,
    pub max_mass: f64,
    pub atoms: Vec<Atom>,
    pub closure_violations: Vec<String>,
    pub weight_violations: Vec<String>,
}

impl AtomReport {
    pub fn passed(&self) -> bool {
        !self.set.is_empty() && self.closure_violations.is_empty() && self.weight_violations.is_empty()
    }
}

/// Extracts the set `ℒ` of maximal-mass atoms, checks that every `A(i)`
/// permutes it (to within one bin) and that each atom of `ℒ` carries the
/// same weight in every component (to within `2/N + 1e-3`).
pub fn verify_atomic_invariant_set(
    a: &CocycleMap,
    eta: &MeasureVector,
    refined: Option<&MeasureVector>,
    tau: f64,
) -> Result<AtomReport> {
    if a.q() != eta.q() {
        return Err(Error::validation("cocycle and measure vector have different alphabets"));
    }
    let grid = eta.grid;
    let width = grid.width();
    let weight_tol = 2.0 / grid.n() as f64 + 1e-3;
    let atoms = detect_atoms(eta, refined, tau)?;
    let max_mass = atoms.iter().map(|x| x.mass).fold(0.0, f64::max);
    let mut set: Vec<f64> = Vec::new();
    for atom in atoms.iter().filter(|x| x.mass >= max_mass - weight_tol) {
        if !set.iter().any(|&v| angle_gap(v, atom.theta) <= width) {
            set.push(atom.theta);
        }
    }
    set.sort_by(f64::total_cmp);

    let mut closure_violations = Vec::new();
    let mut weight_violations = Vec::new();
    if set.is_empty() {
        closure_violations.push(format!("no atom exceeds the threshold {tau}"));
    }
    let find = |theta: f64| set.iter().position(|&v| angle_gap(v, theta) <= width);
    for (i, m) in a.matrices().iter().enumerate() {
        let mut hit = vec![false; set.len()];
        for &v in &set {
            let image = projective_action(m, ProjectivePoint::new(v)).theta();
            match find(image) {
                Some(k) => hit[k] = true,
                None => closure_violations.push(format!("A({i}) maps atom at θ = {v} to θ = {image}, outside the set")),
            }
        }
        for (k, h) in hit.iter().enumerate() {
            if !h {
                closure_violations.push(format!(
                    "atom at θ = {} is not the image of any atom under A({i})",
                    set[k]
                ));
            }
        }
    }
    for &v in &set {
        let weights: Vec<f64> = (0..eta.q())
            .map(|j| {
                atoms
                    .iter()
                    .filter(|x| x.symbol == j && angle_gap(x.theta, v) <= width)
                    .map(|x| x.mass)
                    .fold(0.0, f64::max)
            })
            .collect();
        let hi = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = weights.iter().cloned().fold(f64::INFINITY, f64::min);
        if hi - lo > weight_tol {
            weight_violations.push(format!(
                "atom at θ = {v} has weights {weights:?} across symbols, spread {} > {weight_tol}",
                hi - lo
            ));
        }
    }
    Ok(AtomReport {
        set,
        max_mass,
        atoms,
        closure_violations,
        weight_violations,
    })
}

/// A labelled starting vector for [`maximize_furstenberg`].
#[derive(Debug, Clone)]
pub struct Init {
    pub label: String,
    pub eta: MeasureVector,
}

/// Uniform vector, point masses at the eigendirections of `A(0)`, and point
/// masses at `0, π/4, π/2, 3π/4`.
pub fn default_inits(a: &CocycleMap, grid: ProjectiveGrid) -> Vec<Init> {
    let q = a.q();
    let mut inits = vec![Init {
        label: "uniform".into(),
        eta: MeasureVector::uniform(grid, q),
    }];
    if !a.matrix(0).is_scalar(1e-12) {
        for v in eigendirections(a.matrix(0)) {
            inits.push(Init {
                label: format!("eigendirection:{}", v.theta()),
                eta: MeasureVector::dirac(grid, q, v.theta()),
            });
        }
    }
    for k in 0..4 {
        let theta = k as f64 * PI / 4.0;
        inits.push(Init {
            label: format!("quartile:{k}"),
            eta: MeasureVector::dirac(grid, q, theta),
        });
    }
    inits
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub label: String,
    pub value: Option<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FurstenbergMax {
    pub value: f64,
    #[serde(skip)]
    pub eta: MeasureVector,
    pub init: String,
    pub residual: f64,
    pub runs: Vec<RunSummary>,
}

/// Solves for a stationary vector from each init and returns the largest
/// Furstenberg integral among the converged runs.
pub fn maximize_furstenberg(
    a: &CocycleMap,
    p: &StochasticMatrix,
    grid: ProjectiveGrid,
    inits: Option<Vec<Init>>,
    max_iters: usize,
    tol: f64,
) -> Result<FurstenbergMax> {
    let op = TransferOperator::new(a, p, grid)?;
    let inits = inits.unwrap_or_else(|| default_inits(a, grid));
    if inits.is_empty() {
        return Err(Error::validation("no initial vectors supplied"));
    }
    let results: Vec<StationaryResult> = inits
        .par_iter()
        .map(|init| op.cesaro_stationary(&init.eta, max_iters, tol))
        .collect::<Result<_>>()?;
    let mut runs = Vec::with_capacity(results.len());
    let mut best: Option<(f64, usize)> = None;
    for (k, (init, res)) in inits.iter().zip(&results).enumerate() {
        let value = if res.converged {
            Some(furstenberg_integral(a, p, &res.eta)?)
        } else {
            None
        };
        if let Some(v) = value {
            if best.is_none_or(|(b, _)| v > b) {
                best = Some((v, k));
            }
        }
        runs.push(RunSummary {
            label: init.label.clone(),
            value,
            residual: res.residual,
            iterations: res.iterations,
            converged: res.converged,
        });
    }
    match best {
        Some((value, k)) => Ok(FurstenbergMax {
            value,
            eta: results[k].eta.clone(),
            init: inits[k].label.clone(),
            residual: results[k].residual,
            runs,
        }),
        None => {
            let residual = results.iter().map(|r| r.residual).fold(f64::INFINITY, f64::min);
            let detail: Vec<String> = runs.iter().map(|r| format!("{}: {:e}", r.label, r.residual)).collect();
            Err(Error::Convergence {
                context: format!("no stationary-vector run reached tol {tol:e} ({})", detail.join(", ")),
                iterations: max_iters,
                residual,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> ProjectiveGrid {
        ProjectiveGrid::new(n).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(ProjectiveGrid::new(4).is_err());
        assert!(ProjectiveGrid::new(100).is_err());
        assert_eq!(grid(8).bin_of(PI - 1e-15), 7);
    }

    #[test]
    fn identity_and_one_bin_rotation() {
        let g = grid(64);
        let nu = GridMeasure::new((0..64).map(|b| (b * b % 17) as f64).collect()).unwrap();
        assert_eq!(grid_pushforward(&Mat2::IDENTITY, &nu, &g), nu);
        let shifted = grid_pushforward(&Mat2::rotation(g.width()), &nu, &g);
        for b in 0..64 {
            assert!((shifted.masses()[(b + 1) % 64] - nu.masses()[b]).abs() < 1e-12);
        }
    }

    #[test]
    fn dirac_split_recovers_location() {
        let g = grid(32);
        let theta = 0.3;
        let atoms = window_atoms(&g, 0, &GridMeasure::dirac(&g, theta), 0.05);
        assert_eq!(atoms.len(), 1);
        assert!((atoms[0].theta - theta).abs() < 1e-12);
        assert!((atoms[0].mass - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bernoulli_transfer_has_equal_components() {
        let g = grid(32);
        let p = StochasticMatrix::bernoulli(&[0.3, 0.7]).unwrap();
        let a = CocycleMap::new(vec![Mat2::diag(2.0, 0.5), Mat2::rotation(0.4)]).unwrap();
        let eta = MeasureVector::new(g, vec![GridMeasure::uniform(32), GridMeasure::dirac(&g, 1.0)]).unwrap();
        let out = transfer_apply(&a, &p, &eta).unwrap();
        assert!(out.component(0).tv_distance(out.component(1)) < 1e-14);
    }

    #[test]
    fn hyperbolic_solver_concentrates_at_attractor() {
        let g = grid(256);
        let p = StochasticMatrix::bernoulli(&[0.5, 0.5]).unwrap();
        let a = CocycleMap::constant(Mat2::diag(2.0, 0.5), 2).unwrap();
        let res = cesaro_stationary(&a, &p, &MeasureVector::uniform(g, 2), DEFAULT_MAX_ITERS, DEFAULT_TOL).unwrap();
        assert!(res.converged, "residual {}", res.residual);
        for c in res.eta.components() {
            assert!(c.masses()[0] + c.masses()[255] > 1.0 - 1e-5);
        }
    }

    #[test]
    fn periodic_swap_is_averaged_out() {
        let g = grid(64);
        let p = StochasticMatrix::bernoulli(&[0.5, 0.5]).unwrap();
        let swap = Mat2::new(0.0, 1.0, 1.0, 0.0);
        let a = CocycleMap::constant(swap, 2).unwrap();
        let init = MeasureVector::dirac_at_bin(g, 2, 5);
        let res = cesaro_stationary(&a, &p, &init, 100, 1e-12).unwrap();
        assert!(res.converged);
        assert!((res.eta.component(0).masses()[5] - 0.5).abs() < 1e-12);
    }
}
