//! Finite Markov shifts: stochastic matrices, their stationary vectors,
//! cylinder measures, chain sampling and exhaustive cylinder enumeration.
//!
//! Symbols are 0-based (`0..q`) throughout the crate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Row sums must equal one to this tolerance.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Residual target of the stationary-vector power iteration.
pub const STATIONARY_TOL: f64 = 1e-12;
/// Iteration cap of the stationary-vector power iteration.
pub const STATIONARY_MAX_ITERS: usize = 100_000;
/// Default cap on the number of words produced by [`StochasticMatrix::enumerate_cylinders`].
pub const ENUMERATION_CAP: usize = 1 << 20;
/// Extra iterations allowed after the tolerance is met.
const POLISH_STEPS: usize = 64;

/// A finite word `j_0 j_1 … j_{n-1}` over the alphabet `0..q`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Word(pub Vec<usize>);

impl Word {
    pub fn new(symbols: Vec<usize>) -> Self {
        Word(symbols)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[usize] {
        &self.0
    }

    pub fn validate(&self, q: usize) -> Result<()> {
        match self.0.iter().position(|&s| s >= q) {
            Some(pos) => Err(Error::validation(format!(
                "word symbol {} at position {pos} is out of range 0..{q}",
                self.0[pos]
            ))),
            None => Ok(()),
        }
    }
}

/// A validated irreducible row-stochastic matrix together with its
/// stationary probability vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StochasticMatrix {
    rows: Vec<Vec<f64>>,
    p: Vec<f64>,
    aperiodicity_exponent: Option<usize>,
}

fn validate_rows(rows: &[Vec<f64>]) -> Result<()> {
    let q = rows.len();
    if q < 2 {
        return Err(Error::validation(format!(
            "stochastic matrix needs at least 2 symbols, got {q}"
        )));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != q {
            return Err(Error::validation(format!(
                "row {i} has {} entries, expected {q}",
                row.len()
            )));
        }
        if let Some(j) = row.iter().position(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::validation(format!(
                "row {i}, column {j}: entry {} is not a finite nonnegative number",
                row[j]
            )));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::validation(format!(
                "row {i} sums to {sum}, expected 1 within {ROW_SUM_TOL:e}"
            )));
        }
    }
    for j in 0..q {
        if rows.iter().all(|row| row[j] == 0.0) {
            return Err(Error::validation(format!(
                "column {j} is identically zero (symbol {j} is never entered)"
            )));
        }
    }
    Ok(())
}

fn positive_pattern(rows: &[Vec<f64>]) -> Vec<Vec<bool>> {
    rows.iter().map(|row| row.iter().map(|&x| x > 0.0).collect()).collect()
}

fn bool_product(a: &[Vec<bool>], b: &[Vec<bool>]) -> Vec<Vec<bool>> {
    let q = a.len();
    (0..q)
        .map(|i| (0..q).map(|j| (0..q).any(|k| a[i][k] && b[k][j])).collect())
        .collect()
}

fn is_irreducible(rows: &[Vec<f64>]) -> bool {
    let q = rows.len();
    let pattern = positive_pattern(rows);
    (0..q).all(|start| {
        let mut seen = vec![false; q];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            for j in 0..q {
                if pattern[i][j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    })
}

/// Smallest `N ≤ (q−1)² + 1` with `P^N` entrywise positive, or `None`
/// when no such power exists (Wielandt's bound makes the search complete).
pub fn check_aperiodic(rows: &[Vec<f64>]) -> Result<Option<usize>> {
    validate_rows(rows)?;
    let q = rows.len();
    let base = positive_pattern(rows);
    let bound = (q - 1) * (q - 1) + 1;
    let mut power = base.clone();
    for n in 1..=bound {
        if power.iter().flatten().all(|&x| x) {
            return Ok(Some(n));
        }
        power = bool_product(&power, &base);
    }
    Ok(None)
}

fn stationary_residual(rows: &[Vec<f64>], p: &[f64]) -> f64 {
    let q = rows.len();
    (0..q)
        .map(|j| ((0..q).map(|i| p[i] * rows[i][j]).sum::<f64>() - p[j]).abs())
        .fold(0.0, f64::max)
}

/// Stationary probability vector `p` with `pP = p`.
///
/// Power iteration on the lazy chain `(I + P)/2`, which has the same fixed
/// vector and converges for periodic irreducible matrices as well.
pub fn stationary_distribution(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    validate_rows(rows)?;
    if !is_irreducible(rows) {
        return Err(Error::validation(
            "stochastic matrix is reducible; its stationary vector is not unique",
        ));
    }
    let q = rows.len();
    let mut p = vec![1.0 / q as f64; q];
    let mut next = vec![0.0; q];
    let mut residual = f64::INFINITY;
    let mut polish = 0;
    for _ in 0..STATIONARY_MAX_ITERS {
        let r = stationary_residual(rows, &p);
        // Past the tolerance, keep iterating while it still helps, so the
        // result sits at rounding level rather than just below 1e-12.
        if residual <= STATIONARY_TOL && (r >= residual || polish == POLISH_STEPS) {
            return Ok(p);
        }
        if r <= STATIONARY_TOL {
            polish += 1;
        }
        residual = r;
        for (j, slot) in next.iter_mut().enumerate() {
            let flow: f64 = (0..q).map(|i| p[i] * rows[i][j]).sum();
            *slot = 0.5 * (p[j] + flow);
        }
        let total: f64 = next.iter().sum();
        for (dst, src) in p.iter_mut().zip(&next) {
            *dst = src / total;
        }
    }
    if residual <= STATIONARY_TOL {
        return Ok(p);
    }
    Err(Error::Convergence {
        context: "stationary vector power iteration".into(),
        iterations: STATIONARY_MAX_ITERS,
        residual,
    })
}

impl StochasticMatrix {
    /// Validates `rows` (square, nonnegative, rows summing to one, no zero
    /// column, irreducible) and computes the stationary vector.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let p = stationary_distribution(&rows)?;
        let aperiodicity_exponent = check_aperiodic(&rows)?;
        Ok(StochasticMatrix {
            rows,
            p,
            aperiodicity_exponent,
        })
    }

    /// The Bernoulli matrix `P_{i,j} = p_j`.
    pub fn bernoulli(p: &[f64]) -> Result<Self> {
        let rows = vec![p.to_vec(); p.len()];
        StochasticMatrix::new(rows)
    }

    pub fn q(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.rows[i][j]
    }

    pub fn stationary(&self) -> &[f64] {
        &self.p
    }

    pub fn aperiodicity_exponent(&self) -> Option<usize> {
        self.aperiodicity_exponent
    }

    /// Irreducible but periodic matrices are accepted; this flags them.
    pub fn is_periodic(&self) -> bool {
        self.aperiodicity_exponent.is_none()
    }

    /// Weight `p_i P_{i,j} / p_j` with which symbol `i` feeds symbol `j`
    /// in the transfer operator. For fixed `j` these sum to one.
    pub fn backward_weight(&self, i: usize, j: usize) -> f64 {
        self.p[i] * self.rows[i][j] / self.p[j]
    }

    /// Maximum of `|(pP)_j − p_j|`.
    pub fn stationarity_residual(&self) -> f64 {
        stationary_residual(&self.rows, &self.p)
    }

    /// Markov measure `p_{j0} P_{j0,j1} ⋯ P_{j_{n−2},j_{n−1}}` of the
    /// cylinder spelled by `word`; the empty word has measure one.
    pub fn cylinder_measure(&self, word: &Word) -> Result<f64> {
        word.validate(self.q())?;
        let s = word.symbols();
        let Some(&first) = s.first() else {
            return Ok(1.0);
        };
        Ok(s.windows(2).fold(self.p[first], |acc, w| acc * self.rows[w[0]][w[1]]))
    }

    /// A chain of length `n` with `i_0 ~ p`, deterministic in `seed`.
    pub fn sample_chain(&self, n: usize, seed: u64) -> Word {
        Word(ChainSampler::new(self, seed).take(n).collect())
    }

    /// Every positive-mass word of length `l` paired with its cylinder
    /// measure, using the default cap of `2^20` words.
    pub fn enumerate_cylinders(&self, l: usize) -> Result<Vec<(Word, f64)>> {
        self.enumerate_cylinders_capped(l, ENUMERATION_CAP)
    }

    pub fn enumerate_cylinders_capped(&self, l: usize, cap: usize) -> Result<Vec<(Word, f64)>> {
        let mut out = Vec::new();
        for first in 0..self.q() {
            out.extend(self.enumerate_from_capped(first, l, cap)?);
        }
        Ok(out)
    }

    /// Positive-mass words of length `l ≥ 1` starting with `first`.
    pub fn enumerate_from(&self, first: usize, l: usize) -> Result<Vec<(Word, f64)>> {
        self.enumerate_from_capped(first, l, ENUMERATION_CAP)
    }

    fn enumerate_from_capped(&self, first: usize, l: usize, cap: usize) -> Result<Vec<(Word, f64)>> {
        let q = self.q();
        if first >= q {
            return Err(Error::validation(format!("symbol {first} out of range 0..{q}")));
        }
        if l == 0 {
            return Err(Error::validation("cylinder length must be at least 1"));
        }
        let total = (q as f64).powi(l as i32);
        if total > cap as f64 {
            return Err(Error::Size(format!(
                "{q}^{l} cylinders exceed the enumeration cap {cap}; use Monte-Carlo sampling instead"
            )));
        }
        let mut out = Vec::new();
        let mut word = vec![first];
        self.extend_words(&mut word, self.p[first], l, &mut out);
        Ok(out)
    }

    fn extend_words(&self, word: &mut Vec<usize>, mass: f64, l: usize, out: &mut Vec<(Word, f64)>) {
        if word.len() == l {
            out.push((Word(word.clone()), mass));
            return;
        }
        let last = *word.last().expect("nonempty prefix");
        for next in 0..self.q() {
            let m = mass * self.rows[last][next];
            if m > 0.0 {
                word.push(next);
                self.extend_words(word, m, l, out);
                word.pop();
            }
        }
    }
}

/// Infinite iterator over a sampled Markov chain.
///
/// Each sampler owns its generator, so samplers can run on separate
/// threads without coordination.
#[derive(Debug, Clone)]
pub struct ChainSampler {
    cumulative: Vec<Vec<f64>>,
    initial: Vec<f64>,
    state: Option<usize>,
    rng: ChaCha8Rng,
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect();
    // Pin the last positive bucket to exactly one so every draw lands somewhere valid.
    if let Some(last) = weights.iter().rposition(|&w| w > 0.0) {
        for c in &mut out[last..] {
            *c = 1.0;
        }
    }
    out
}

fn draw(cum: &[f64], u: f64) -> usize {
    cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1)
}

impl ChainSampler {
    pub fn new(matrix: &StochasticMatrix, seed: u64) -> Self {
        ChainSampler {
            cumulative: matrix.rows.iter().map(|r| cumulative(r)).collect(),
            initial: cumulative(&matrix.p),
            state: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Iterator for ChainSampler {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        let u: f64 = self.rng.gen();
        let next = match self.state {
            None => draw(&self.initial, u),
            Some(i) => draw(&self.cumulative[i], u),
        };
        self.state = Some(next);
        Some(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state() -> StochasticMatrix {
        StochasticMatrix::new(vec![vec![0.5, 0.5], vec![0.25, 0.75]]).unwrap()
    }

    #[test]
    fn aperiodicity_exponents() {
        assert_eq!(check_aperiodic(&[vec![0.5, 0.5], vec![0.25, 0.75]]).unwrap(), Some(1));
        assert_eq!(check_aperiodic(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap(), None);
        assert_eq!(check_aperiodic(&[vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap(), Some(2));
    }

    #[test]
    fn non_stochastic_row_is_named() {
        let err = check_aperiodic(&[vec![0.5, 0.4], vec![0.5, 0.5]]).unwrap_err();
        assert!(err.to_string().contains("row 0"), "{err}");
    }

    #[test]
    fn stationary_vectors() {
        let b = StochasticMatrix::bernoulli(&[0.3, 0.7]).unwrap();
        assert!((b.stationary()[0] - 0.3).abs() < 1e-12);
        let p = two_state();
        assert!((p.stationary()[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((p.stationary()[1] - 2.0 / 3.0).abs() < 1e-12);
        assert!(p.stationarity_residual() <= 1e-10);
        assert!(!p.is_periodic());
    }

    #[test]
    fn periodic_matrix_is_flagged() {
        let p = StochasticMatrix::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(p.is_periodic());
        assert_eq!(p.stationary(), &[0.5, 0.5]);
    }

    #[test]
    fn reducible_and_zero_column_rejected() {
        assert!(StochasticMatrix::new(vec![vec![1.0, 0.0], vec![0.5, 0.5]]).is_err());
        assert!(StochasticMatrix::new(vec![vec![1.0, 0.0], vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn cylinder_measures() {
        let p = two_state();
        assert_eq!(p.cylinder_measure(&Word(vec![])).unwrap(), 1.0);
        assert!((p.cylinder_measure(&Word(vec![0, 1])).unwrap() - 1.0 / 6.0).abs() < 1e-12);
        let b = StochasticMatrix::bernoulli(&[0.3, 0.7]).unwrap();
        let m = b.cylinder_measure(&Word(vec![1, 0])).unwrap();
        assert!((m - 0.7 * 0.3).abs() < 1e-15);
        assert!(p.cylinder_measure(&Word(vec![2])).is_err());
    }

    #[test]
    fn enumeration_matches_hand_values() {
        let p = two_state();
        let words = p.enumerate_cylinders(2).unwrap();
        let expect = [
            (vec![0, 0], 1.0 / 6.0),
            (vec![0, 1], 1.0 / 6.0),
            (vec![1, 0], 1.0 / 6.0),
            (vec![1, 1], 0.5),
        ];
        assert_eq!(words.len(), 4);
        for ((w, m), (ew, em)) in words.iter().zip(expect) {
            assert_eq!(w.0, ew);
            assert!((m - em).abs() < 1e-12);
        }
        let l1 = p.enumerate_cylinders(1).unwrap();
        assert!((l1[0].1 - 1.0 / 3.0).abs() < 1e-12 && (l1[1].1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn enumeration_cap() {
        let p = two_state();
        let err = p.enumerate_cylinders_capped(11, 1024).unwrap_err();
        assert!(matches!(err, Error::Size(_)));
        assert!(err.to_string().contains("Monte-Carlo"));
    }

    #[test]
    fn sampling_is_deterministic_and_respects_zeros() {
        let p = StochasticMatrix::new(vec![vec![0.4, 0.0, 0.6], vec![0.3, 0.3, 0.4], vec![0.5, 0.5, 0.0]]).unwrap();
        let a = p.sample_chain(5000, 42);
        assert_eq!(a, p.sample_chain(5000, 42));
        assert_ne!(a, p.sample_chain(5000, 43));
        assert!(a.0.windows(2).all(|w| !(w == [0, 1] || w == [2, 2])));
    }
}
