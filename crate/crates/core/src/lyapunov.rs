//! Extremal Lyapunov exponents: Monte-Carlo estimates along sampled
//! chains, the determinant-sum identity and the Furstenberg integral.

use rayon::prelude::*;
use serde::Serialize;

use crate::cocycle::CocycleMap;
use crate::error::{Error, Result};
use crate::markov::{ChainSampler, StochasticMatrix};
use crate::matrix::Mat2;
use crate::stationary::MeasureVector;

/// Running products are rescaled after this many steps.
pub const RENORMALIZE_EVERY: usize = 32;
pub const DEFAULT_CHAIN_LENGTH: usize = 100_000;
pub const DEFAULT_REPS: usize = 32;
/// Absolute floor added to combined standard errors. Constant cocycles
/// have zero replicate spread, and the identity check then compares
/// floating-point sums that agree only to rounding.
pub const STDERR_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MonteCarlo,
    /// Co-norm of the sampled products.
    MonteCarloConorm,
    /// `Σ p_i log|det A(i)| − λ₊`.
    DeterminantIdentity,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
    pub reps: usize,
    pub method: Method,
}

/// Log-scale running product of 2×2 matrices.
#[derive(Debug, Clone, Copy)]
struct ScaledProduct {
    m: Mat2,
    log_scale: f64,
}

impl ScaledProduct {
    fn new() -> Self {
        ScaledProduct {
            m: Mat2::IDENTITY,
            log_scale: 0.0,
        }
    }

    fn renormalize(&mut self) {
        let s = self.m.max_abs();
        self.m = self.m.scale(1.0 / s);
        self.log_scale += s.ln();
    }

    fn log_norm(&self) -> f64 {
        self.m.norm().ln() + self.log_scale
    }
}

/// Per-replicate `(1/n) log ‖A^n‖` and, if requested, `(1/n) log ‖(A^n)^{-1}‖^{-1}`.
fn replicate(
    a: &CocycleMap,
    inverses: Option<&[Mat2]>,
    p: &StochasticMatrix,
    n: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let mut forward = ScaledProduct::new();
    // (A^n)^{-1} = A(i_0)^{-1} ⋯ A(i_{n-1})^{-1}, built by right multiplication.
    let mut backward = ScaledProduct::new();
    for (t, i) in ChainSampler::new(p, seed).take(n).enumerate() {
        forward.m = *a.matrix(i) * forward.m;
        if let Some(inv) = inverses {
            backward.m = backward.m * inv[i];
        }
        if (t + 1) % RENORMALIZE_EVERY == 0 {
            forward.renormalize();
            if inverses.is_some() {
                backward.renormalize();
            }
        }
    }
    let plus = forward.log_norm() / n as f64;
    let minus = if inverses.is_some() {
        -backward.log_norm() / n as f64
    } else {
        f64::NAN
    };
    if !plus.is_finite() || (inverses.is_some() && !minus.is_finite()) {
        return Err(Error::Numerical(format!(
            "matrix product left floating-point range (replicate seed {seed})"
        )));
    }
    Ok((plus, minus))
}

fn validate_run(a: &CocycleMap, p: &StochasticMatrix, n: usize, reps: usize) -> Result<()> {
    a.ensure_alphabet(p)?;
    if n == 0 || reps == 0 {
        return Err(Error::validation("chain length and replicate count must be at least 1"));
    }
    Ok(())
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

fn run_replicates(
    a: &CocycleMap,
    p: &StochasticMatrix,
    n: usize,
    reps: usize,
    seed: u64,
    with_inverse: bool,
) -> Result<Vec<(f64, f64)>> {
    validate_run(a, p, n, reps)?;
    let inverses: Option<Vec<Mat2>> = if with_inverse {
        Some(
            a.matrices()
                .iter()
                .map(|m| m.inverse().expect("cocycle matrices are invertible"))
                .collect(),
        )
    } else {
        None
    };
    (0..reps as u64)
        .into_par_iter()
        .map(|r| replicate(a, inverses.as_deref(), p, n, seed ^ r))
        .collect()
}

/// Mean of `(1/n) log ‖A^n(x)‖` over `reps` chains; replicate `r` uses seed `seed ^ r`.
pub fn lambda_plus_monte_carlo(
    a: &CocycleMap,
    p: &StochasticMatrix,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<ExponentEstimate> {
    let samples: Vec<f64> = run_replicates(a, p, n, reps, seed, false)?
        .into_iter()
        .map(|(plus, _)| plus)
        .collect();
    let (value, stderr) = mean_and_stderr(&samples);
    Ok(ExponentEstimate {
        value,
        stderr,
        n,
        reps,
        method: Method::MonteCarlo,
    })
}

/// `Σ p_i log |det A(i)|`, which equals `λ₊ + λ₋`.
pub fn lyapunov_sum_exact(a: &CocycleMap, p: &StochasticMatrix) -> Result<f64> {
    a.ensure_alphabet(p)?;
    Ok(a.matrices()
        .iter()
        .zip(p.stationary())
        .map(|(m, pi)| pi * m.det().abs().ln())
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaPair {
    pub plus: ExponentEstimate,
    pub minus_direct: ExponentEstimate,
    pub minus_identity: ExponentEstimate,
    pub sum_exact: f64,
    /// `|λ₊ + λ₋(direct) − Σ p_i log|det A(i)||`.
    pub sum_residual: f64,
    /// Larger of `sqrt(se₊² + se₋²)` and the standard error of the
    /// per-replicate sums, plus [`STDERR_FLOOR`].
    pub combined_stderr: f64,
    pub consistent: bool,
    pub warning: Option<String>,
}

/// `λ₊` and `λ₋` from the same chains, with `λ₋` computed both directly
/// and from the determinant identity.
pub fn lambda_pair(a: &CocycleMap, p: &StochasticMatrix, n: usize, reps: usize, seed: u64) -> Result<LambdaPair> {
    let samples = run_replicates(a, p, n, reps, seed, true)?;
    let sum_exact = lyapunov_sum_exact(a, p)?;
    let plus: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let minus: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let sums: Vec<f64> = samples.iter().map(|s| s.0 + s.1).collect();
    let (plus_mean, plus_se) = mean_and_stderr(&plus);
    let (minus_mean, minus_se) = mean_and_stderr(&minus);
    let (_, sum_se) = mean_and_stderr(&sums);
    let combined_stderr = plus_se.hypot(minus_se).max(sum_se) + STDERR_FLOOR;
    let sum_residual = (plus_mean + minus_mean - sum_exact).abs();
    let consistent = sum_residual <= 3.0 * combined_stderr;
    let warning = (!consistent).then(|| {
        format!("λ₊ + λ₋ deviates from Σ p_i log|det A(i)| by {sum_residual:e}, more than 3 × {combined_stderr:e}")
    });
    let est = |value, stderr, method| ExponentEstimate {
        value,
        stderr,
        n,
        reps,
        method,
    };
    Ok(LambdaPair {
        plus: est(plus_mean, plus_se, Method::MonteCarlo),
        minus_direct: est(minus_mean, minus_se, Method::MonteCarloConorm),
        minus_identity: est(sum_exact - plus_mean, plus_se, Method::DeterminantIdentity),
        sum_exact,
        sum_residual,
        combined_stderr,
        consistent,
        warning,
    })
}

/// `Σ_i p_i ∫ log ‖A(i) v‖ dη_i(v)`, with `v` the unit vector at each bin center.
pub fn furstenberg_integral(a: &CocycleMap, p: &StochasticMatrix, eta: &MeasureVector) -> Result<f64> {
    a.ensure_alphabet(p)?;
    if eta.q() != p.q() {
        return Err(Error::validation(format!(
            "measure vector has {} components, expected {}",
            eta.q(),
            p.q()
        )));
    }
    eta.validate_unit()?;
    let grid = eta.grid();
    let mut total = 0.0;
    for (i, pi) in p.stationary().iter().enumerate() {
        let m = a.matrix(i);
        let integral: f64 = eta
            .component(i)
            .masses()
            .iter()
            .enumerate()
            .filter(|(_, &mass)| mass > 0.0)
            .map(|(b, &mass)| {
                let w = m.apply(grid.point(b).unit());
                mass * w[0].hypot(w[1]).ln()
            })
            .sum();
        total += pi * integral;
    }
    Ok(total)
}
