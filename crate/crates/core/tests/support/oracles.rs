//! Independent reference computations shared by integration tests.
#![allow(dead_code, clippy::needless_range_loop, clippy::explicit_counter_loop)]

use std::f64::consts::{FRAC_PI_2, PI};

use markov_cocycle::energy::EnergyParams;
use markov_cocycle::{GridMeasure, ProjectiveGrid};
use rand::Rng;

/// All nonempty subsets of `0..n` with at most `k` elements.
pub fn subsets_up_to(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mask in 1u32..(1 << n) {
        if mask.count_ones() as usize <= k {
            out.push((0..n).filter(|b| mask & (1 << b) != 0).collect());
        }
    }
    out
}

/// Probability measure on `n` bins with random positive masses on `support`.
pub fn random_measure(rng: &mut impl Rng, n: usize, support: &[usize]) -> GridMeasure {
    let mut masses = vec![0.0; n];
    for &b in support {
        masses[b] = rng.gen_range(0.1..1.0);
    }
    let total: f64 = masses.iter().sum();
    GridMeasure::new(masses.iter().map(|m| m / total).collect()).unwrap()
}

fn in_arc(theta: f64, center: f64, radius: f64) -> bool {
    let d = (theta - center).rem_euclid(PI);
    d.min(PI - d) < radius
}

/// Kernel at bin centers, written out from the definition.
pub fn kernel_cost(grid: &ProjectiveGrid, params: &EnergyParams, a: usize, b: usize) -> f64 {
    let (u, w) = (grid.center(a), grid.center(b));
    let (c, r) = (params.u1.center, params.u1.radius);
    if !(in_arc(u, c, r) && in_arc(w, c, r)) {
        return 1.0;
    }
    if a == b {
        return f64::INFINITY;
    }
    let gap = (u - w).abs();
    (gap.min(PI - gap) / FRAC_PI_2).powf(-params.delta)
}

/// Solves the square system restricted to `cols` by Gaussian elimination
/// with partial pivoting; `None` when the columns are dependent or the
/// system is inconsistent.
fn solve_restricted(rows: &[Vec<f64>], rhs: &[f64], cols: &[usize]) -> Option<Vec<f64>> {
    let k = cols.len();
    let mut m: Vec<Vec<f64>> = rows
        .iter()
        .zip(rhs)
        .map(|(r, &b)| cols.iter().map(|&c| r[c]).chain([b]).collect())
        .collect();
    let mut row = 0;
    for col in 0..k {
        let pivot = (row..m.len()).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))?;
        if m[pivot][col].abs() < 1e-12 {
            return None;
        }
        m.swap(row, pivot);
        for r in 0..m.len() {
            if r != row {
                let f = m[r][col] / m[row][col];
                for c in col..=k {
                    m[r][c] -= f * m[row][c];
                }
            }
        }
        row += 1;
    }
    if m[k..].iter().any(|r| r[k].abs() > 1e-12) {
        return None;
    }
    Some((0..k).map(|c| m[c][k] / m[c][c]).collect())
}

/// Minimum transport cost by enumerating every basic feasible solution of
/// the transportation polytope; infinite when no plan avoids the forbidden cells.
pub fn brute_force_transport(supply: &[f64], demand: &[f64], cost: &[Vec<f64>]) -> f64 {
    let (m, n) = (supply.len(), demand.len());
    let cells: Vec<(usize, usize)> = (0..m)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| cost[i][j].is_finite())
        .collect();
    let mut rows = Vec::new();
    for i in 0..m {
        rows.push(
            cells
                .iter()
                .map(|&(a, _)| if a == i { 1.0 } else { 0.0 })
                .collect::<Vec<_>>(),
        );
    }
    for j in 0..n {
        rows.push(
            cells
                .iter()
                .map(|&(_, b)| if b == j { 1.0 } else { 0.0 })
                .collect::<Vec<_>>(),
        );
    }
    let rhs: Vec<f64> = supply.iter().chain(demand).copied().collect();
    let mut best = f64::INFINITY;
    // Basic solutions have at most m + n - 1 positive cells; every vertex is
    // reached from some independent column set of that size or smaller.
    let size = (m + n - 1).min(cells.len());
    for mask in 1u32..(1 << cells.len()) {
        if mask.count_ones() as usize > size {
            continue;
        }
        let cols: Vec<usize> = (0..cells.len()).filter(|c| mask & (1 << c) != 0).collect();
        if let Some(x) = solve_restricted(&rows, &rhs, &cols) {
            if x.iter().all(|&v| v >= -1e-13) {
                let c: f64 = cols
                    .iter()
                    .zip(&x)
                    .map(|(&k, v)| v * cost[cells[k].0][cells[k].1])
                    .sum();
                best = best.min(c);
            }
        }
    }
    best
}

/// Minimum coupling energy of two measures by vertex enumeration.
pub fn brute_force_energy(eta1: &GridMeasure, eta2: &GridMeasure, grid: &ProjectiveGrid, params: &EnergyParams) -> f64 {
    let s1: Vec<usize> = (0..grid.n()).filter(|&b| eta1.masses()[b] > 0.0).collect();
    let s2: Vec<usize> = (0..grid.n()).filter(|&b| eta2.masses()[b] > 0.0).collect();
    let cost: Vec<Vec<f64>> = s1
        .iter()
        .map(|&a| s2.iter().map(|&b| kernel_cost(grid, params, a, b)).collect())
        .collect();
    let supply: Vec<f64> = s1.iter().map(|&b| eta1.masses()[b]).collect();
    let demand: Vec<f64> = s2.iter().map(|&b| eta2.masses()[b]).collect();
    brute_force_transport(&supply, &demand, &cost)
}
