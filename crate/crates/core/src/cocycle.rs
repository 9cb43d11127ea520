//! `GL(2)` cocycles over a finite alphabet and their action on the
//! projective line `P(R²) ≅ [0, π)`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::markov::{StochasticMatrix, Word};
use crate::matrix::Mat2;

/// A matrix is accepted as invertible when `|det| ≥ INVERTIBILITY_TOL · ‖A‖²`.
pub const INVERTIBILITY_TOL: f64 = 1e-12;
/// Default upper bound of the block length searched by [`check_expanding`].
pub const DEFAULT_L_MAX: usize = 8;
/// Projective points closer than this (in radians) are treated as equal.
pub const ANGLE_TOL: f64 = 1e-9;

/// Reduces an angle into `[0, π)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(PI);
    if t >= PI {
        0.0
    } else {
        t
    }
}

/// Distance between two angles on the circle `R / πZ`, in radians.
pub fn angle_gap(a: f64, b: f64) -> f64 {
    let d = normalize_angle(a - b);
    d.min(PI - d)
}

/// A line through the origin, stored by its angle in `[0, π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct ProjectivePoint(f64);

impl ProjectivePoint {
    pub fn new(theta: f64) -> Self {
        ProjectivePoint(normalize_angle(theta))
    }

    pub fn theta(self) -> f64 {
        self.0
    }

    /// Unit vector `(cos θ, sin θ)` spanning the line.
    pub fn unit(self) -> [f64; 2] {
        let (s, c) = self.0.sin_cos();
        [c, s]
    }

    fn from_vector(v: [f64; 2]) -> Self {
        ProjectivePoint::new(v[1].atan2(v[0]))
    }
}

/// One invertible 2×2 matrix per symbol.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CocycleMap {
    matrices: Vec<Mat2>,
}

impl CocycleMap {
    pub fn new(matrices: Vec<Mat2>) -> Result<Self> {
        if matrices.is_empty() {
            return Err(Error::validation("cocycle needs at least one matrix"));
        }
        for (i, a) in matrices.iter().enumerate() {
            check_invertible(a).map_err(|why| Error::validation(format!("A({i}) {why}")))?;
        }
        Ok(CocycleMap { matrices })
    }

    /// The same matrix for each of `q` symbols.
    pub fn constant(a: Mat2, q: usize) -> Result<Self> {
        CocycleMap::new(vec![a; q])
    }

    pub fn q(&self) -> usize {
        self.matrices.len()
    }

    pub fn matrix(&self, i: usize) -> &Mat2 {
        &self.matrices[i]
    }

    pub fn matrices(&self) -> &[Mat2] {
        &self.matrices
    }

    /// Every matrix multiplied on the left by `m`.
    pub fn left_multiply(&self, m: &Mat2) -> Result<Self> {
        CocycleMap::new(self.matrices.iter().map(|a| *m * *a).collect())
    }

    pub fn ensure_alphabet(&self, p: &StochasticMatrix) -> Result<()> {
        if self.q() != p.q() {
            return Err(Error::validation(format!(
                "cocycle has {} matrices but the stochastic matrix has {} symbols",
                self.q(),
                p.q()
            )));
        }
        Ok(())
    }
}

/// `Err` carries a human-readable reason when `a` is not safely invertible.
pub fn check_invertible(a: &Mat2) -> std::result::Result<(), String> {
    if a.m.iter().flatten().any(|x| !x.is_finite()) {
        return Err("has a non-finite entry".into());
    }
    let det = a.det();
    let scale = a.frobenius_sq();
    if scale == 0.0 || det.abs() < INVERTIBILITY_TOL * scale {
        return Err(format!("is singular or nearly so (det = {det:e})"));
    }
    Ok(())
}

/// `A^n = A(i_{n−1}) ⋯ A(i_1) A(i_0)`: the last symbol acts last.
/// The empty word gives the identity.
pub fn word_product(a: &CocycleMap, w: &Word) -> Result<Mat2> {
    w.validate(a.q())?;
    Ok(w.symbols().iter().fold(Mat2::IDENTITY, |acc, &i| *a.matrix(i) * acc))
}

pub fn projective_action(alpha: &Mat2, theta: ProjectivePoint) -> ProjectivePoint {
    ProjectivePoint::from_vector(alpha.apply(theta.unit()))
}

/// Magnitude of the derivative of the projective map of `alpha` at `theta`,
/// `|det α| / ‖α v‖²` with `v` the unit vector on the line.
pub fn projective_derivative(alpha: &Mat2, theta: ProjectivePoint) -> f64 {
    let w = alpha.apply(theta.unit());
    alpha.det().abs() / (w[0] * w[0] + w[1] * w[1])
}

/// Smallest singular value `‖α⁻¹‖⁻¹`.
pub fn matrix_conorm(alpha: &Mat2) -> f64 {
    alpha.conorm()
}

/// Result of [`invariant_points`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InvariantPoints {
    /// Every matrix is a multiple of the identity.
    All,
    Points(Vec<ProjectivePoint>),
}

/// Real eigendirections of a non-scalar matrix.
pub fn eigendirections(a: &Mat2) -> Vec<ProjectivePoint> {
    let m = a.m;
    let tr = a.trace();
    let det = a.det();
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    let disc = tr * tr - 4.0 * det;
    if disc < -1e-14 * scale * scale {
        return Vec::new();
    }
    let root = disc.max(0.0).sqrt();
    let mut eigenvalues = vec![(tr + root) / 2.0];
    if root > 1e-12 * scale {
        eigenvalues.push((tr - root) / 2.0);
    }
    let mut out: Vec<ProjectivePoint> = Vec::new();
    for lambda in eigenvalues {
        // Null vector of A − λI, taken from whichever row is better conditioned.
        let r0 = [m[0][1], lambda - m[0][0]];
        let r1 = [lambda - m[1][1], m[1][0]];
        let v = if r0[0].hypot(r0[1]) >= r1[0].hypot(r1[1]) {
            r0
        } else {
            r1
        };
        if v[0] == 0.0 && v[1] == 0.0 {
            continue;
        }
        let p = ProjectivePoint::from_vector(v);
        if !out.iter().any(|u| angle_gap(u.theta(), p.theta()) < ANGLE_TOL) {
            out.push(p);
        }
    }
    out.sort_by(|a, b| a.theta().total_cmp(&b.theta()));
    out
}

/// True when `alpha` maps the line `v` to itself.
pub fn fixes(alpha: &Mat2, v: ProjectivePoint) -> bool {
    let u = v.unit();
    let w = alpha.apply(u);
    let cross = w[0] * u[1] - w[1] * u[0];
    cross.abs() <= ANGLE_TOL * w[0].hypot(w[1])
}

/// Lines fixed by every `A(i)`.
pub fn invariant_points(a: &CocycleMap) -> InvariantPoints {
    let Some(first) = a.matrices().iter().find(|m| !m.is_scalar(1e-12)) else {
        return InvariantPoints::All;
    };
    let points = eigendirections(first)
        .into_iter()
        .filter(|&v| a.matrices().iter().all(|m| fixes(m, v)))
        .collect();
    InvariantPoints::Points(points)
}

fn ensure_invariant(a: &CocycleMap, v: ProjectivePoint) -> Result<()> {
    match a.matrices().iter().position(|m| !fixes(m, v)) {
        Some(i) => Err(Error::precondition(format!(
            "θ = {} is not invariant: A({i}) moves it",
            v.theta()
        ))),
        None => Ok(()),
    }
}

fn log_derivative_along_word(a: &CocycleMap, v: ProjectivePoint, word: &Word) -> f64 {
    word.symbols()
        .iter()
        .map(|&s| projective_derivative(a.matrix(s), v).ln())
        .sum()
}

/// Exact cylinder average of `log |D A^l(x)(v)|` over `[0; i]`, where `v`
/// is a common invariant line so that the chain rule evaluates every
/// factor at `v` itself.
pub fn expanding_integral(a: &CocycleMap, p: &StochasticMatrix, v: ProjectivePoint, l: usize, i: usize) -> Result<f64> {
    a.ensure_alphabet(p)?;
    ensure_invariant(a, v)?;
    let words = p.enumerate_from(i, l)?;
    Ok(words
        .iter()
        .map(|(w, mass)| mass * log_derivative_along_word(a, v, w))
        .sum())
}

/// Certificate that `v` is an expanding invariant point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Expansion {
    pub l: usize,
    /// `min_i integral_i / (4 p_i)`.
    pub c: f64,
    pub integrals: Vec<f64>,
}

/// Per-symbol integrals at block length `l`, plus the symbols for which
/// the integral is not positive.
pub fn expansion_profile(
    a: &CocycleMap,
    p: &StochasticMatrix,
    v: ProjectivePoint,
    l: usize,
) -> Result<(Vec<f64>, Vec<usize>)> {
    let integrals = (0..p.q())
        .map(|i| expanding_integral(a, p, v, l, i))
        .collect::<Result<Vec<_>>>()?;
    let failing = integrals
        .iter()
        .enumerate()
        .filter(|(_, x)| **x <= 0.0)
        .map(|(i, _)| i)
        .collect();
    Ok((integrals, failing))
}

/// Smallest `l ≤ l_max` for which every symbol has a positive expanding
/// integral, with the constant `c` it certifies.
pub fn check_expanding(
    a: &CocycleMap,
    p: &StochasticMatrix,
    v: ProjectivePoint,
    l_max: usize,
) -> Result<Option<Expansion>> {
    for l in 1..=l_max {
        let (integrals, failing) = expansion_profile(a, p, v, l)?;
        if failing.is_empty() {
            let c = integrals
                .iter()
                .zip(p.stationary())
                .map(|(x, pi)| x / (4.0 * pi))
                .fold(f64::INFINITY, f64::min);
            return Ok(Some(Expansion { l, c, integrals }));
        }
    }
    Ok(None)
}

/// The grid `{2^{-k} : k = 1..10}`.
pub fn default_delta_grid() -> Vec<f64> {
    (1..=10).map(|k| 0.5f64.powi(k)).collect()
}

/// Does `Σ_words μ(word) |D|^{-δ} ≤ (1 − 3cδ) p_i` hold for every symbol?
pub fn delta_moment_holds(
    a: &CocycleMap,
    p: &StochasticMatrix,
    v: ProjectivePoint,
    l: usize,
    c: f64,
    delta: f64,
) -> Result<bool> {
    a.ensure_alphabet(p)?;
    ensure_invariant(a, v)?;
    for i in 0..p.q() {
        let moment: f64 = p
            .enumerate_from(i, l)?
            .iter()
            .map(|(w, mass)| mass * (-delta * log_derivative_along_word(a, v, w)).exp())
            .sum();
        if moment > (1.0 - 3.0 * c * delta) * p.stationary()[i] {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Largest `δ` in `grid` passing [`delta_moment_holds`]; `None` when `c`
/// is not a positive number or no grid value qualifies.
pub fn delta_moment_scan(
    a: &CocycleMap,
    p: &StochasticMatrix,
    v: ProjectivePoint,
    l: usize,
    c: f64,
    grid: &[f64],
) -> Result<Option<f64>> {
    if !(c.is_finite() && c > 0.0) {
        return Ok(None);
    }
    let mut best: Option<f64> = None;
    for &delta in grid {
        if delta > 0.0 && best.is_none_or(|b| delta > b) && delta_moment_holds(a, p, v, l, c, delta)? {
            best = Some(delta);
        }
    }
    Ok(best)
}
