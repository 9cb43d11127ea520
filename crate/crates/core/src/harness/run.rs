//! Experiment runners behind the command-line subcommands.

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, SweepFamily};
use super::emit::{format_real, Csv};
use crate::cocycle::{
    angle_gap, check_expanding, check_invertible, default_delta_grid, delta_moment_holds, delta_moment_scan,
    expansion_profile, invariant_points, CocycleMap, Expansion, InvariantPoints, ProjectivePoint, DEFAULT_L_MAX,
};
use crate::energy::{contraction_experiment, Arc, ContractionSetup, ContractionTrace, EnergyParams};
use crate::error::{Error, Result};
use crate::lyapunov::{lambda_pair, ExponentEstimate, LambdaPair};
use crate::markov::StochasticMatrix;
use crate::matrix::Mat2;
use crate::stationary::{
    detect_atoms, maximize_furstenberg, Atom, FurstenbergMax, GridMeasure, MeasureVector, RunSummary, TransferOperator,
};

/// SplitMix64 finalizer, used to derive independent seeds.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of sweep point `index`.
pub fn point_seed(seed: u64, index: usize) -> u64 {
    splitmix64(seed ^ splitmix64(index as u64))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes") + "\n"
}

#[derive(Debug, Clone, Serialize)]
pub struct FurstenbergSummary {
    pub value: f64,
    pub init: String,
    pub residual: f64,
    pub runs: Vec<RunSummary>,
}

impl From<&FurstenbergMax> for FurstenbergSummary {
    fn from(f: &FurstenbergMax) -> Self {
        FurstenbergSummary {
            value: f.value,
            init: f.init.clone(),
            residual: f.residual,
            runs: f.runs.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LyapunovReport {
    pub config: ExperimentConfig,
    pub stationary_p: Vec<f64>,
    pub lambda_plus: ExponentEstimate,
    pub lambda_minus_direct: ExponentEstimate,
    pub lambda_minus_identity: ExponentEstimate,
    pub sum_exact: f64,
    pub sum_residual: f64,
    pub combined_stderr: f64,
    pub sum_check_pass: bool,
    pub warning: Option<String>,
    pub furstenberg: FurstenbergSummary,
    /// Replicate `r` runs with seed `seed ^ r`.
    pub seed: u64,
}

impl LyapunovReport {
    pub fn to_json(&self) -> String {
        to_json(self)
    }
}

/// Monte-Carlo exponents, the determinant identity and the Furstenberg maximum.
pub fn run_lyapunov(cfg: &ExperimentConfig) -> Result<LyapunovReport> {
    let p = cfg.stochastic()?;
    let a = cfg.cocycle()?;
    let pair = lambda_pair(&a, &p, cfg.chain_length, cfg.reps, cfg.seed)?;
    let furstenberg = maximize_furstenberg(
        &a,
        &p,
        cfg.projective_grid()?,
        None,
        cfg.solver.max_iters,
        cfg.solver.tol,
    )?;
    let LambdaPair {
        plus,
        minus_direct,
        minus_identity,
        sum_exact,
        sum_residual,
        combined_stderr,
        consistent,
        warning,
    } = pair;
    Ok(LyapunovReport {
        config: cfg.clone(),
        stationary_p: p.stationary().to_vec(),
        lambda_plus: plus,
        lambda_minus_direct: minus_direct,
        lambda_minus_identity: minus_identity,
        sum_exact,
        sum_residual,
        combined_stderr,
        sum_check_pass: consistent,
        warning,
        furstenberg: (&furstenberg).into(),
        seed: cfg.seed,
    })
}

pub const STATIONARY_COLUMNS: [&str; 4] = ["symbol", "bin", "theta_center", "mass"];

pub fn measure_csv(eta: &MeasureVector) -> Csv {
    let mut csv = Csv::new(&STATIONARY_COLUMNS);
    for (i, b, theta, m) in eta.rows() {
        csv.push(vec![i.to_string(), b.to_string(), format_real(theta), format_real(m)]);
    }
    csv
}

#[derive(Debug, Clone, Serialize)]
pub struct StationaryReport {
    pub furstenberg: FurstenbergSummary,
    pub atoms: Vec<Atom>,
}

/// The stationary vector with the largest Furstenberg integral, as CSV,
/// with a summary of the solver runs and the atoms found.
pub fn run_stationary(cfg: &ExperimentConfig) -> Result<(StationaryReport, Csv)> {
    let p = cfg.stochastic()?;
    let a = cfg.cocycle()?;
    let best = maximize_furstenberg(
        &a,
        &p,
        cfg.projective_grid()?,
        None,
        cfg.solver.max_iters,
        cfg.solver.tol,
    )?;
    let atoms = detect_atoms(&best.eta, None, cfg.solver.atom_threshold)?;
    let csv = measure_csv(&best.eta);
    Ok((
        StationaryReport {
            furstenberg: (&best).into(),
            atoms,
        },
        csv,
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct PointCertificate {
    pub theta: f64,
    pub expansion: Option<Expansion>,
    /// Per-symbol integrals at `l = 1`, reported when no `l ≤ 8` certifies.
    pub integrals_l1: Vec<f64>,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpandingReport {
    pub all_points_invariant: bool,
    pub points: Vec<PointCertificate>,
}

impl ExpandingReport {
    pub fn to_json(&self) -> String {
        to_json(self)
    }
}

/// Invariant points with their expansion certificates and admissible `δ`.
pub fn run_expanding(cfg: &ExperimentConfig) -> Result<ExpandingReport> {
    let p = cfg.stochastic()?;
    let a = cfg.cocycle()?;
    let (all, points) = match invariant_points(&a) {
        InvariantPoints::All => (true, Vec::new()),
        InvariantPoints::Points(pts) => (false, pts),
    };
    let points = points
        .into_iter()
        .map(|v| certify(&a, &p, v))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExpandingReport {
        all_points_invariant: all,
        points,
    })
}

fn certify(a: &CocycleMap, p: &StochasticMatrix, v: ProjectivePoint) -> Result<PointCertificate> {
    let expansion = check_expanding(a, p, v, DEFAULT_L_MAX)?;
    let delta = match &expansion {
        Some(e) => delta_moment_scan(a, p, v, e.l, e.c, &default_delta_grid())?,
        None => None,
    };
    let (integrals_l1, _) = expansion_profile(a, p, v, 1)?;
    Ok(PointCertificate {
        theta: v.theta(),
        expansion,
        integrals_l1,
        delta,
    })
}

pub const SWEEP_COLUMNS: [&str; 8] = [
    "t",
    "lambda_plus_mc",
    "stderr",
    "lambda_plus_furstenberg",
    "lambda_minus",
    "sum_residual",
    "stationary_residual",
    "reason",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub t: f64,
    pub seed: u64,
    pub lambda_plus_mc: Option<f64>,
    pub stderr: Option<f64>,
    pub combined_stderr: Option<f64>,
    pub lambda_plus_furstenberg: Option<f64>,
    pub lambda_minus: Option<f64>,
    pub sum_residual: Option<f64>,
    pub stationary_residual: Option<f64>,
    /// Why values are missing; empty for a complete row.
    pub reason: String,
}

fn perturbed_system(
    cfg: &ExperimentConfig,
    family: SweepFamily,
    t: f64,
) -> std::result::Result<(CocycleMap, StochasticMatrix), String> {
    let sweep = cfg.sweep.as_ref().expect("sweep block present");
    let (matrices, rows): (Vec<Mat2>, Vec<Vec<f64>>) = match family {
        SweepFamily::MatrixBlend => {
            let b = sweep.target_matrices.as_ref().expect("validated");
            (cfg.a.iter().zip(b).map(|(x, y)| x.lerp(y, t)).collect(), cfg.p.clone())
        }
        SweepFamily::RotationPerturb => {
            let r = Mat2::rotation(t);
            (cfg.a.iter().map(|x| r * *x).collect(), cfg.p.clone())
        }
        SweepFamily::MarkovBlend => {
            let q = sweep.target_stochastic.as_ref().expect("validated");
            let rows = cfg
                .p
                .iter()
                .zip(q)
                .map(|(pr, qr)| {
                    let row: Vec<f64> = pr.iter().zip(qr).map(|(x, y)| (1.0 - t) * x + t * y).collect();
                    // Re-close the row sum against rounding in the blend.
                    let s: f64 = row.iter().sum();
                    row.iter().map(|x| x / s).collect()
                })
                .collect();
            (cfg.a.clone(), rows)
        }
    };
    for (i, m) in matrices.iter().enumerate() {
        check_invertible(m).map_err(|why| format!("A_t({i}) {why}"))?;
    }
    let a = CocycleMap::new(matrices).map_err(|e| e.to_string())?;
    let p = StochasticMatrix::new(rows).map_err(|e| e.to_string())?;
    Ok((a, p))
}

fn sweep_point(cfg: &ExperimentConfig, family: SweepFamily, index: usize, t: f64) -> Result<SweepRow> {
    let seed = point_seed(cfg.seed, index);
    let mut row = SweepRow {
        t,
        seed,
        lambda_plus_mc: None,
        stderr: None,
        combined_stderr: None,
        lambda_plus_furstenberg: None,
        lambda_minus: None,
        sum_residual: None,
        stationary_residual: None,
        reason: String::new(),
    };
    let (a, p) = match perturbed_system(cfg, family, t) {
        Ok(system) => system,
        Err(reason) => {
            row.reason = reason;
            return Ok(row);
        }
    };
    let pair = lambda_pair(&a, &p, cfg.chain_length, cfg.reps, seed)?;
    row.lambda_plus_mc = Some(pair.plus.value);
    row.stderr = Some(pair.plus.stderr);
    row.combined_stderr = Some(pair.combined_stderr);
    row.lambda_minus = Some(pair.minus_direct.value);
    row.sum_residual = Some(pair.sum_residual);
    match maximize_furstenberg(
        &a,
        &p,
        cfg.projective_grid()?,
        None,
        cfg.solver.max_iters,
        cfg.solver.tol,
    ) {
        Ok(f) => {
            row.lambda_plus_furstenberg = Some(f.value);
            row.stationary_residual = Some(f.residual);
        }
        Err(e @ Error::Convergence { .. }) => row.reason = e.to_string(),
        Err(e) => return Err(e),
    }
    Ok(row)
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub csv: Csv,
}

/// One row per sweep value, in the configured order. Points run in
/// parallel; point `k` uses seed [`point_seed`]`(seed, k)`.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepOutput> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::validation("sweep: block required by the sweep subcommand"))?;
    let rows: Vec<SweepRow> = sweep
        .values
        .par_iter()
        .enumerate()
        .map(|(k, &t)| sweep_point(cfg, sweep.family, k, t))
        .collect::<Result<_>>()?;
    let mut csv = Csv::new(&SWEEP_COLUMNS);
    let opt = |x: Option<f64>| x.map(format_real).unwrap_or_default();
    for r in &rows {
        csv.push(vec![
            // The parameter is echoed with the shortest round-trip representation.
            r.t.to_string(),
            opt(r.lambda_plus_mc),
            opt(r.stderr),
            opt(r.lambda_plus_furstenberg),
            opt(r.lambda_minus),
            opt(r.sum_residual),
            opt(r.stationary_residual),
            r.reason.clone(),
        ]);
    }
    Ok(SweepOutput { rows, csv })
}

pub const ENERGY_COLUMNS: [&str; 4] = ["iteration", "symbol", "energy", "bound_rhs"];

#[derive(Debug, Clone, Serialize)]
pub struct EnergySummary {
    pub reference_theta: f64,
    pub l: usize,
    pub c: f64,
    pub delta: f64,
    pub delta_moment_condition: bool,
    pub factor: f64,
    pub c_emp: f64,
    pub rounds: usize,
    pub start: crate::energy::StartCoupling,
    pub truncated: Option<String>,
    pub recursion_holds: bool,
    pub sup_bound_holds: bool,
    pub background_residual: f64,
    pub preimage_radius: f64,
}

impl EnergySummary {
    pub fn line(&self) -> String {
        format!(
            "empirical C = {}, 1 - c*delta = {} (c = {}, delta = {}, l = {}), rounds = {}, recursion {}, sup bound {}{}",
            format_real(self.c_emp),
            format_real(self.factor),
            format_real(self.c),
            self.delta,
            self.l,
            self.rounds,
            if self.recursion_holds { "holds" } else { "fails" },
            if self.sup_bound_holds { "holds" } else { "fails" },
            self.truncated
                .as_ref()
                .map(|t| format!(", stopped early: {t}"))
                .unwrap_or_default()
        )
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }
}

#[derive(Debug, Clone)]
pub struct EnergyOutput {
    pub trace: ContractionTrace,
    pub summary: EnergySummary,
    pub csv: Csv,
}

pub fn trace_csv(trace: &ContractionTrace) -> Csv {
    let mut csv = Csv::new(&ENERGY_COLUMNS);
    for (n, round) in trace.rounds.iter().enumerate() {
        for (i, e) in round.energies.iter().enumerate() {
            csv.push(vec![
                n.to_string(),
                i.to_string(),
                format_real(*e),
                format_real(trace.bound_rhs_symbol(n, i)),
            ]);
        }
        csv.push(vec![
            n.to_string(),
            "all".into(),
            format_real(round.total),
            format_real(trace.bound_rhs(n)),
        ]);
    }
    csv
}

fn certification_error(a: &CocycleMap, p: &StochasticMatrix, v: ProjectivePoint, l: usize) -> Result<Error> {
    let (integrals, failing) = expansion_profile(a, p, v, l)?;
    let detail: Vec<String> = failing
        .iter()
        .map(|&i| {
            format!(
                "symbol {i} fails the 4c·p_i bound (integral {:e}, p_{i} = {:e})",
                integrals[i],
                p.stationary()[i]
            )
        })
        .collect();
    Ok(Error::precondition(format!(
        "θ = {} is not an expanding point at l = {l}: {}",
        v.theta(),
        detail.join("; ")
    )))
}

/// Starting vector: `atom_mass` spread over the `atom_width` bins nearest
/// `theta`, the rest following `background`.
pub fn concentrated_vector(
    background: &MeasureVector,
    theta: f64,
    atom_mass: f64,
    atom_width: usize,
) -> Result<MeasureVector> {
    let grid = *background.grid();
    let mut bins: Vec<usize> = (0..grid.n()).collect();
    bins.sort_by(|&x, &y| {
        angle_gap(grid.center(x), theta)
            .total_cmp(&angle_gap(grid.center(y), theta))
            .then(x.cmp(&y))
    });
    let mut spike = vec![0.0; grid.n()];
    for &b in bins.iter().take(atom_width.min(grid.n())) {
        spike[b] = 1.0 / atom_width.min(grid.n()) as f64;
    }
    let spike = GridMeasure::new(spike)?;
    let components = background
        .components()
        .iter()
        .map(|c| spike.mix(c, atom_mass))
        .collect();
    MeasureVector::new(grid, components)
}

/// Certifies the reference point, builds a starting vector concentrated
/// next to it and runs the energy-contraction experiment.
pub fn run_energy_decay(cfg: &ExperimentConfig) -> Result<EnergyOutput> {
    let energy = cfg
        .energy
        .as_ref()
        .ok_or_else(|| Error::validation("energy: block required by the energy-decay subcommand"))?;
    let p = cfg.stochastic()?;
    let a = cfg.cocycle()?;
    let grid = cfg.projective_grid()?;
    let l_max = energy.l.unwrap_or(DEFAULT_L_MAX);

    let (v, expansion) = match energy.u1_center {
        Some(theta) => {
            let v = ProjectivePoint::new(theta);
            let found = match energy.l {
                Some(l) => {
                    let (integrals, failing) = expansion_profile(&a, &p, v, l)?;
                    failing.is_empty().then(|| {
                        let c = integrals
                            .iter()
                            .zip(p.stationary())
                            .map(|(x, pi)| x / (4.0 * pi))
                            .fold(f64::INFINITY, f64::min);
                        Expansion { l, c, integrals }
                    })
                }
                None => check_expanding(&a, &p, v, l_max)?,
            };
            match found {
                Some(e) => (v, e),
                None => return Err(certification_error(&a, &p, v, l_max)?),
            }
        }
        None => {
            let candidates = match invariant_points(&a) {
                InvariantPoints::All => {
                    return Err(Error::precondition(
                        "every line is invariant; set energy.u1_center to choose a reference point",
                    ))
                }
                InvariantPoints::Points(pts) => pts,
            };
            let mut chosen = None;
            let mut reasons = Vec::new();
            for v in candidates {
                match check_expanding(&a, &p, v, l_max)? {
                    Some(e) => {
                        chosen = Some((v, e));
                        break;
                    }
                    None => reasons.push(certification_error(&a, &p, v, l_max)?.to_string()),
                }
            }
            match chosen {
                Some(found) => found,
                None if reasons.is_empty() => {
                    return Err(Error::precondition("the cocycle has no invariant point to certify"))
                }
                None => return Err(Error::precondition(reasons.join(" | "))),
            }
        }
    };

    let delta = match energy.delta {
        Some(d) => d,
        None => delta_moment_scan(&a, &p, v, expansion.l, expansion.c, &default_delta_grid())?.ok_or_else(|| {
            Error::precondition(format!(
                "no δ in {{2^-k : k = 1..10}} satisfies the moment condition at θ = {}",
                v.theta()
            ))
        })?,
    };
    let delta_moment_condition = delta_moment_holds(&a, &p, v, expansion.l, expansion.c, delta)?;
    let params = EnergyParams::new(delta, Arc::new(v.theta(), energy.u1_radius)?)?;

    let op = TransferOperator::new(&a, &p, grid)?;
    let background = op.cesaro_stationary(
        &MeasureVector::uniform(grid, p.q()),
        cfg.solver.max_iters,
        cfg.solver.tol,
    )?;
    let eta = concentrated_vector(&background.eta, v.theta(), energy.atom_mass, energy.atom_width)?;
    let setup = ContractionSetup {
        params,
        l: expansion.l,
        iters: energy.iters,
    };
    let trace = contraction_experiment(&a, &p, &eta, &setup)?;
    let summary = EnergySummary {
        reference_theta: v.theta(),
        l: trace.l,
        c: trace.c,
        delta,
        delta_moment_condition,
        factor: trace.factor,
        c_emp: trace.c_emp,
        rounds: trace.rounds.len(),
        start: trace.start,
        truncated: trace.truncated.clone(),
        recursion_holds: trace.recursion_holds(),
        sup_bound_holds: trace.sup_bound_holds(),
        background_residual: background.residual,
        preimage_radius: trace.preimage_radius,
    };
    let csv = trace_csv(&trace);
    Ok(EnergyOutput { trace, summary, csv })
}
