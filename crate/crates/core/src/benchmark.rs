//! Bayesian logistic-regression benchmark: data loading, Zellner prior,
//! preconditioning and the marginal-accuracy comparison of samplers.
//!
//! Marginal accuracy uses `MA(μ, ν) = 1 - TV(μ, ν)/2` with
//! `TV = sup_A |μ(A) - ν(A)|`, so `MA ∈ [½, 1]`. Other references use a total
//! variation twice as large; scores are not comparable across conventions.

use std::f64::consts::PI;
use std::fs::File;
use std::path::Path;

use log::{info, warn};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{plan, Metric, Plan, Variant};
use crate::error::{invalid, Error, Result};
use crate::potentials::{ConvexityConstants, LogisticModel, LogisticPotential, Potential};
use crate::rng::{fill_standard_normal, stream_rng};
use crate::samplers::{default_burn_in, run_chain_observed, Algorithm, ChainConfig};
use crate::schedules::StepSchedule;

pub const DEFAULT_BINS: usize = 50;
const REFERENCE_FACTOR: usize = 10;
const REFERENCE_REPLICA: u64 = u64::MAX;
const TUNER_REPLICA: u64 = u64::MAX - 1;
const TUNER_BURN_IN: usize = 1_000;
const TUNER_STEPS: usize = 4_000;
const TUNER_MAX_ITER: usize = 80;

/// Covariates and binary responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub design: DMatrix<f64>,
    pub labels: Vec<f64>,
    pub column_names: Vec<String>,
}

impl Dataset {
    pub fn new(design: DMatrix<f64>, labels: Vec<f64>, column_names: Vec<String>) -> Result<Self> {
        let (p, d) = design.shape();
        if p == 0 || d == 0 {
            return Err(Error::Data("dataset is empty".into()));
        }
        if labels.len() != p {
            return Err(Error::Data(format!("{} labels for {p} rows", labels.len())));
        }
        if column_names.len() != d {
            return Err(Error::Data(format!("{} names for {d} columns", column_names.len())));
        }
        if labels.iter().any(|&y| y != 0.0 && y != 1.0) {
            return Err(Error::Data("labels must be 0 or 1".into()));
        }
        if design.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("design has missing or non-finite values".into()));
        }
        Ok(Dataset {
            design,
            labels,
            column_names,
        })
    }

    pub fn observations(&self) -> usize {
        self.design.nrows()
    }

    pub fn dim(&self) -> usize {
        self.design.ncols()
    }

    /// Centers each column and scales it to unit (population) variance.
    /// Constant columns are dropped.
    pub fn standardized(self) -> Result<Self> {
        let p = self.observations() as f64;
        let mut keep = Vec::new();
        let mut columns = Vec::new();
        for (j, name) in self.column_names.iter().enumerate() {
            let col = self.design.column(j);
            let mean = col.sum() / p;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / p;
            let sd = var.sqrt();
            if sd <= 1e-12 * mean.abs().max(1.0) {
                warn!("dropping constant column {name:?}");
                continue;
            }
            keep.push(name.clone());
            columns.push(col.map(|v| (v - mean) / sd));
        }
        if columns.is_empty() {
            return Err(Error::Data("every covariate column is constant".into()));
        }
        let design = DMatrix::from_columns(&columns);
        Dataset::new(design, self.labels, keep)
    }

    /// `Σ_X = p⁻¹ Σ X_i X_iᵀ`.
    pub fn second_moment(&self) -> DMatrix<f64> {
        self.design.transpose() * &self.design / self.observations() as f64
    }
}

/// Reads a CSV with a header row. Every column other than `label_column`
/// is a covariate. Covariates are standardized.
pub fn load_dataset(path: &Path, label_column: &str) -> Result<Dataset> {
    let mut reader = csv::Reader::from_reader(File::open(path)?);
    let headers = reader.headers()?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h.trim() == label_column)
        .ok_or_else(|| Error::Data(format!("label column {label_column:?} not found")))?;
    let names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.trim().to_string())
        .collect();

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        for (i, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Data(format!("row {}: cannot parse {field:?} as a number", row + 1))
            })?;
            if i == label_idx {
                labels.push(v);
            } else {
                values.push(v);
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::Data(format!("{} has no data rows", path.display())));
    }
    if let Some(bad) = labels.iter().find(|&&y| y != 0.0 && y != 1.0) {
        return Err(Error::Data(format!("label {bad} is not 0 or 1")));
    }
    let design = DMatrix::from_row_slice(labels.len(), names.len(), &values);
    Dataset::new(design, labels, names)?.standardized()
}

/// Covariates `N(0, I)`, coefficients `N(0, I)`, labels drawn from the
/// logistic link; covariates are then standardized.
pub fn synthetic_dataset(p: usize, d: usize, seed: u64) -> Result<Dataset> {
    if p < 2 || d == 0 {
        return Err(invalid("synthetic data needs p >= 2 and d >= 1"));
    }
    let mut rng = stream_rng(seed, 0);
    let mut beta = vec![0.0; d];
    fill_standard_normal(&mut rng, &mut beta);
    let mut row = vec![0.0; d];
    let mut values = Vec::with_capacity(p * d);
    let mut labels = Vec::with_capacity(p);
    for _ in 0..p {
        fill_standard_normal(&mut rng, &mut row);
        let z: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
        let prob = 1.0 / (1.0 + (-z).exp());
        labels.push(if rng.gen::<f64>() < prob { 1.0 } else { 0.0 });
        values.extend_from_slice(&row);
    }
    let names = (1..=d).map(|j| format!("x{j}")).collect();
    Dataset::new(DMatrix::from_row_slice(p, d, &values), labels, names)?.standardized()
}

/// `Σ_X`, with `10⁻⁸·trace/d` added to the diagonal when it is singular.
fn regularized_second_moment(dataset: &Dataset) -> Result<DMatrix<f64>> {
    let mut sigma = dataset.second_moment();
    let d = dataset.dim();
    let eig = SymmetricEigen::new(sigma.clone()).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if !(lo > 1e-12 * hi) {
        let shift = 1e-8 * sigma.trace() / d as f64;
        info!("covariate second moment is singular; adding {shift} to its diagonal");
        sigma += DMatrix::identity(d, d) * shift;
    }
    Ok(sigma)
}

/// Zellner prior precision `(π²d/3) Σ_X⁻¹`.
pub fn zellner_prior(dataset: &Dataset) -> Result<DMatrix<f64>> {
    let sigma = regularized_second_moment(dataset)?;
    let d = dataset.dim();
    let inv = sigma
        .cholesky()
        .ok_or_else(|| Error::Numeric("covariate second moment is not positive definite".into()))?
        .inverse();
    let prec = inv * (PI * PI * d as f64 / 3.0);
    // Symmetrize against rounding in the inverse.
    Ok((&prec + prec.transpose()) * 0.5)
}

/// Isotropic prior precision `(dp)⁻¹ Σ_i ‖X_i‖² · I`.
pub fn isotropic_prior(dataset: &Dataset) -> DMatrix<f64> {
    let (p, d) = dataset.design.shape();
    let scale = dataset.design.iter().map(|v| v * v).sum::<f64>() / (d * p) as f64;
    DMatrix::identity(d, d) * scale
}

/// Linear map `β = S β̃` with `S = Σ_X^{1/2}`, the symmetric square root.
#[derive(Debug, Clone, PartialEq)]
pub struct Preconditioner {
    sqrt: DMatrix<f64>,
    inv_sqrt: DMatrix<f64>,
}

impl Preconditioner {
    pub fn from_covariance(sigma: &DMatrix<f64>) -> Result<Self> {
        let eig = SymmetricEigen::new(sigma.clone());
        if eig.eigenvalues.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::Numeric("matrix square root needs a positive definite matrix".into()));
        }
        let v = &eig.eigenvectors;
        let root = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
        let inv_root = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
        Ok(Preconditioner {
            sqrt: v * root * v.transpose(),
            inv_sqrt: v * inv_root * v.transpose(),
        })
    }

    pub fn identity(d: usize) -> Self {
        Preconditioner {
            sqrt: DMatrix::identity(d, d),
            inv_sqrt: DMatrix::identity(d, d),
        }
    }

    pub fn sqrt(&self) -> &DMatrix<f64> {
        &self.sqrt
    }

    /// `β̃ = S⁻¹ β`.
    pub fn forward(&self, beta: &[f64]) -> Vec<f64> {
        (&self.inv_sqrt * DVector::from_column_slice(beta)).as_slice().to_vec()
    }

    /// `β = S β̃`.
    pub fn back(&self, beta_tilde: &[f64]) -> Vec<f64> {
        (&self.sqrt * DVector::from_column_slice(beta_tilde)).as_slice().to_vec()
    }
}

/// Target `β̃ ↦ U(S β̃)` together with the map back to `β`.
#[derive(Debug, Clone)]
pub struct Preconditioned {
    pub potential: LogisticPotential,
    pub map: Preconditioner,
}

/// Rewrites the model in the coordinates `β̃ = S⁻¹β`, `S = Σ_X^{1/2}`.
///
/// The result is again a logistic model, with design `XS` and prior
/// precision `S Σ_β⁻¹ S`, so its gradient is `S ∇U(S β̃)` and its convexity
/// constants are those of the transformed problem.
pub fn precondition(model: &LogisticModel) -> Result<Preconditioned> {
    let p = model.observations() as f64;
    let sigma = model.design().transpose() * model.design() / p;
    let map = Preconditioner::from_covariance(&sigma)?;
    let design = model.design() * &map.sqrt;
    let prior = &map.sqrt * model.prior_precision() * &map.sqrt;
    let prior = (&prior + prior.transpose()) * 0.5;
    let potential = LogisticPotential::new(LogisticModel::new(design, model.labels().to_vec(), prior)?)?;
    Ok(Preconditioned { potential, map })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalAccuracy {
    pub per_dimension: Vec<f64>,
    pub mean: f64,
}

/// Histogram estimate of `MA = 1 - TV/2` per coordinate; rows are samples.
pub fn marginal_accuracy(a: &DMatrix<f64>, b: &DMatrix<f64>, bins: usize) -> Result<MarginalAccuracy> {
    if a.nrows() == 0 || b.nrows() == 0 {
        return Err(invalid("marginal accuracy needs nonempty sample sets"));
    }
    if a.ncols() != b.ncols() || a.ncols() == 0 {
        return Err(invalid(format!(
            "sample sets have dimensions {} and {}",
            a.ncols(),
            b.ncols()
        )));
    }
    if bins == 0 {
        return Err(invalid("bin count must be positive"));
    }
    let per_dimension: Vec<f64> = (0..a.ncols())
        .map(|j| 1.0 - 0.5 * histogram_tv(a.column(j).as_slice(), b.column(j).as_slice(), bins))
        .collect();
    let mean = per_dimension.iter().sum::<f64>() / per_dimension.len() as f64;
    Ok(MarginalAccuracy { per_dimension, mean })
}

/// Half the L1 distance between normalized histograms on a shared grid.
fn histogram_tv(a: &[f64], b: &[f64], bins: usize) -> f64 {
    let (lo, hi) = a.iter().chain(b).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let width = hi - lo;
    let hist = |xs: &[f64]| {
        let mut h = vec![0.0; bins];
        for &x in xs {
            let i = if width > 0.0 {
                (((x - lo) / width * bins as f64) as usize).min(bins - 1)
            } else {
                0
            };
            h[i] += 1.0;
        }
        let n = xs.len() as f64;
        h.iter_mut().for_each(|v| *v /= n);
        h
    };
    let (ha, hb) = (hist(a), hist(b));
    // In [0, 1] exactly; the sum of normalized counts can round past 1.
    (0.5 * ha.iter().zip(&hb).map(|(x, y)| (x - y).abs()).sum::<f64>()).min(1.0)
}

fn pilot_acceptance<P: Potential + ?Sized>(potential: &P, gamma: f64, seed: u64) -> Result<f64> {
    let schedule = StepSchedule::constant(gamma)?;
    let cfg = ChainConfig::new(Algorithm::Mala, TUNER_STEPS, seed)
        .burn_in(TUNER_BURN_IN)
        .replica(TUNER_REPLICA);
    let (_, _, rate) = run_chain_observed(potential, &schedule, &cfg, |_, _| {})?;
    Ok(rate)
}

/// Constant MALA step whose pilot acceptance rate lies in `[lo, hi]`.
///
/// Brackets by doubling or halving from `initial`, then bisects in log
/// scale. Every pilot run reuses one random stream.
pub fn tune_mala_step<P: Potential + ?Sized>(
    potential: &P,
    initial: f64,
    band: (f64, f64),
    seed: u64,
) -> Result<(f64, f64)> {
    if !(initial > 0.0 && initial.is_finite()) {
        return Err(invalid(format!("initial MALA step must be positive, got {initial}")));
    }
    let (lo_rate, hi_rate) = band;
    let rate = |g: f64| pilot_acceptance(potential, g, seed);
    let inside = |r: f64| (lo_rate..=hi_rate).contains(&r);

    let mut g = initial;
    let mut r = rate(g)?;
    if inside(r) {
        return Ok((g, r));
    }
    // (small step with high acceptance, large step with low acceptance)
    let (mut small, mut large);
    let mut iter = 0;
    if r > hi_rate {
        loop {
            let next = g * 2.0;
            let rn = rate(next)?;
            if inside(rn) {
                return Ok((next, rn));
            }
            iter += 1;
            if rn < lo_rate {
                small = g;
                large = next;
                break;
            }
            g = next;
            if iter > TUNER_MAX_ITER {
                return Err(Error::Infeasible("MALA step tuner failed to bracket".into()));
            }
        }
    } else {
        loop {
            let next = g / 2.0;
            r = rate(next)?;
            if inside(r) {
                return Ok((next, r));
            }
            iter += 1;
            if r > hi_rate {
                small = next;
                large = g;
                break;
            }
            g = next;
            if iter > TUNER_MAX_ITER {
                return Err(Error::Infeasible("MALA step tuner failed to bracket".into()));
            }
        }
    }
    for _ in 0..TUNER_MAX_ITER {
        let mid = (small * large).sqrt();
        let rm = rate(mid)?;
        if inside(rm) {
            return Ok((mid, rm));
        }
        if rm > hi_rate {
            small = mid;
        } else {
            large = mid;
        }
    }
    Err(Error::Infeasible(format!(
        "no MALA step with acceptance in [{lo_rate}, {hi_rate}]"
    )))
}

/// How the step sizes of the compared chains are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ScheduleRule {
    /// Constant `γ = 10/(κ n^{1/2})`.
    Paper,
    /// `γ_k = γ_1 k^{-1/2}` with `γ_1 = 10/(κ (log n)^{1/2})`.
    PaperDecreasing,
    Constant { gamma: f64 },
    /// The tuned MALA step, shared by every algorithm.
    Tuned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    Zellner,
    Isotropic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub algorithms: Vec<Algorithm>,
    pub schedule: ScheduleRule,
    pub n: usize,
    #[serde(rename = "N", default)]
    pub burn_in: Option<usize>,
    pub replicas: u64,
    pub seed: u64,
    pub bins: usize,
    pub prior: PriorKind,
    pub precondition: bool,
    /// Length of the MALA reference run is `reference_factor · n`.
    pub reference_factor: usize,
    /// Planner target for the report; TV, basic variant.
    #[serde(default)]
    pub epsilon: Option<f64>,
}

impl BenchmarkConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        BenchmarkConfig {
            algorithms: vec![Algorithm::Ula, Algorithm::Mala],
            schedule: ScheduleRule::Tuned,
            n,
            burn_in: None,
            replicas: 1,
            seed,
            bins: DEFAULT_BINS,
            prior: PriorKind::Zellner,
            precondition: true,
            reference_factor: REFERENCE_FACTOR,
            epsilon: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(invalid("benchmark needs at least one algorithm"));
        }
        if self.n == 0 || self.replicas == 0 || self.bins == 0 || self.reference_factor == 0 {
            return Err(invalid("n, replicas, bins and reference_factor must be positive"));
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0 && e < 1.0) {
                return Err(invalid(format!("epsilon must lie in (0, 1), got {e}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSummary {
    pub gamma: f64,
    pub steps: usize,
    pub acceptance_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmReport {
    pub algorithm: Algorithm,
    pub schedule: StepSchedule,
    #[serde(rename = "N")]
    pub burn_in: usize,
    pub acceptance_rate: f64,
    /// Pooled samples of every replica against the reference.
    pub pooled: MarginalAccuracy,
    /// Mean marginal accuracy of each replica against the reference.
    pub replica_mean: Vec<f64>,
    /// Per-dimension accuracy of each replica.
    pub replica_per_dimension: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub observations: usize,
    pub dim: usize,
    pub column_names: Vec<String>,
    pub constants: ConvexityConstants,
    pub preconditioned: bool,
    pub seed: u64,
    pub reference: ReferenceSummary,
    pub algorithms: Vec<AlgorithmReport>,
    pub plan: Option<Plan>,
}

impl BenchmarkReport {
    /// Rows `algorithm,replica,dimension,column,ma`; replica `pooled`
    /// holds the pooled comparison.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["algorithm", "replica", "dimension", "column", "ma"])?;
        for alg in &self.algorithms {
            let name = format!("{:?}", alg.algorithm).to_lowercase();
            let rows = std::iter::once(("pooled".to_string(), &alg.pooled.per_dimension)).chain(
                alg.replica_per_dimension
                    .iter()
                    .enumerate()
                    .map(|(r, v)| (r.to_string(), v)),
            );
            for (replica, values) in rows {
                for (j, v) in values.iter().enumerate() {
                    w.write_record(&[
                        name.clone(),
                        replica.clone(),
                        j.to_string(),
                        self.column_names[j].clone(),
                        format!("{v:.16e}"),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// The posterior the benchmark samples from, in sampling coordinates.
pub fn benchmark_target(dataset: &Dataset, prior: PriorKind, precondition_model: bool) -> Result<Preconditioned> {
    let prior = match prior {
        PriorKind::Zellner => zellner_prior(dataset)?,
        PriorKind::Isotropic => isotropic_prior(dataset),
    };
    let model = LogisticModel::new(dataset.design.clone(), dataset.labels.clone(), prior)?;
    if precondition_model {
        precondition(&model)
    } else {
        Ok(Preconditioned {
            potential: LogisticPotential::new(model)?,
            map: Preconditioner::identity(dataset.dim()),
        })
    }
}

/// Kept states of one chain, mapped back to `β`; rows are samples.
fn collect_samples(
    target: &Preconditioned,
    schedule: &StepSchedule,
    cfg: &ChainConfig,
) -> Result<(DMatrix<f64>, f64, usize)> {
    let d = target.potential.dim();
    let mut flat = Vec::with_capacity(cfg.n * d);
    let (_, burn_in, rate) = run_chain_observed(&target.potential, schedule, cfg, |_, x| {
        flat.extend_from_slice(x)
    })?;
    let raw = DMatrix::from_row_slice(cfg.n, d, &flat);
    let samples = raw * target.map.sqrt.transpose();
    Ok((samples, rate, burn_in))
}

fn stack_rows(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let d = blocks[0].ncols();
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, d);
    let mut at = 0;
    for b in blocks {
        out.rows_mut(at, b.nrows()).copy_from(b);
        at += b.nrows();
    }
    out
}

fn schedule_for(rule: ScheduleRule, c: &ConvexityConstants, n: usize, tuned: f64) -> Result<StepSchedule> {
    let nf = n as f64;
    match rule {
        ScheduleRule::Paper => StepSchedule::constant(10.0 / (c.kappa * nf.sqrt())),
        ScheduleRule::PaperDecreasing => {
            let log_n = nf.ln().max(1.0);
            StepSchedule::polynomial(10.0 / (c.kappa * log_n.sqrt()), 0.5)
        }
        ScheduleRule::Constant { gamma } => StepSchedule::constant(gamma),
        ScheduleRule::Tuned => StepSchedule::constant(tuned),
    }
}

/// Fits the prior, optionally preconditions, runs every algorithm's
/// replicas and compares their marginals with a long MALA reference.
pub fn run_benchmark(dataset: &Dataset, config: &BenchmarkConfig) -> Result<BenchmarkReport> {
    config.validate()?;
    let target = benchmark_target(dataset, config.prior, config.precondition)?;
    let c = target.potential.constants();
    let d = dataset.dim();

    let (tuned, tuned_rate) = tune_mala_step(
        &target.potential,
        c.discretization_step_cap(),
        (0.45, 0.55),
        config.seed,
    )?;
    info!("tuned MALA step {tuned} (pilot acceptance {tuned_rate})");

    let ref_steps = config.reference_factor * config.n;
    let ref_schedule = StepSchedule::constant(tuned)?;
    let ref_cfg = ChainConfig::new(Algorithm::Mala, ref_steps, config.seed)
        .burn_in(default_burn_in(&ref_schedule, ref_steps))
        .replica(REFERENCE_REPLICA);
    let (reference, ref_rate, _) = collect_samples(&target, &ref_schedule, &ref_cfg)?;

    let mut algorithms = Vec::with_capacity(config.algorithms.len());
    for (idx, &algorithm) in config.algorithms.iter().enumerate() {
        let schedule = schedule_for(config.schedule, &c, config.n, tuned)?;
        let burn_in = config.burn_in.unwrap_or_else(|| default_burn_in(&schedule, config.n));
        let runs: Vec<(DMatrix<f64>, f64)> = (0..config.replicas)
            .into_par_iter()
            .map(|r| {
                let cfg = ChainConfig::new(algorithm, config.n, config.seed)
                    .burn_in(burn_in)
                    .replica(((idx as u64) << 32) | r);
                collect_samples(&target, &schedule, &cfg).map(|(s, rate, _)| (s, rate))
            })
            .collect::<Result<_>>()?;
        let per_replica: Vec<MarginalAccuracy> = runs
            .iter()
            .map(|(s, _)| marginal_accuracy(s, &reference, config.bins))
            .collect::<Result<_>>()?;
        let blocks: Vec<DMatrix<f64>> = runs.iter().map(|(s, _)| s.clone()).collect();
        let pooled = marginal_accuracy(&stack_rows(&blocks), &reference, config.bins)?;
        let acceptance_rate = runs.iter().map(|(_, r)| r).sum::<f64>() / runs.len() as f64;
        algorithms.push(AlgorithmReport {
            algorithm,
            schedule,
            burn_in,
            acceptance_rate,
            pooled,
            replica_mean: per_replica.iter().map(|m| m.mean).collect(),
            replica_per_dimension: per_replica.into_iter().map(|m| m.per_dimension).collect(),
        });
    }

    let plan = match config.epsilon {
        Some(eps) => match plan(&c, d, eps, Metric::Tv, Variant::Basic) {
            Ok(p) => Some(p),
            Err(Error::Infeasible(msg)) => {
                warn!("planner: {msg}");
                None
            }
            Err(e) => return Err(e),
        },
        None => None,
    };

    Ok(BenchmarkReport {
        observations: dataset.observations(),
        dim: d,
        column_names: dataset.column_names.clone(),
        constants: c,
        preconditioned: config.precondition,
        seed: config.seed,
        reference: ReferenceSummary {
            gamma: tuned,
            steps: ref_steps,
            acceptance_rate: ref_rate,
        },
        algorithms,
        plan,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn toy(values: &[f64], p: usize, d: usize) -> Dataset {
        let labels = (0..p).map(|i| (i % 2) as f64).collect();
        let names = (0..d).map(|j| format!("c{j}")).collect();
        Dataset::new(DMatrix::from_row_slice(p, d, values), labels, names).unwrap()
    }

    #[test]
    fn standardization_identity() {
        let ds = toy(&[1.0, 10.0, 2.0, 20.0, 4.0, 70.0], 3, 2).standardized().unwrap();
        for j in 0..2 {
            let col = ds.design.column(j);
            assert!(col.mean().abs() < 1e-12);
            let var = col.iter().map(|v| v * v).sum::<f64>() / 3.0;
            assert!((var - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_column_dropped() {
        let ds = toy(&[1.0, 5.0, 2.0, 5.0, 4.0, 5.0], 3, 2).standardized().unwrap();
        assert_eq!(ds.dim(), 1);
        assert_eq!(ds.column_names, vec!["c0".to_string()]);
    }

    #[test]
    fn load_from_csv() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "a,y,b\n1,0,3\n2,1,5\n3,1,4").unwrap();
        let ds = load_dataset(f.path(), "y").unwrap();
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.labels, vec![0.0, 1.0, 1.0]);
        assert_eq!(ds.column_names, vec!["a".to_string(), "b".to_string()]);
        assert!(ds.design.column(0).mean().abs() < 1e-12);
        assert!(matches!(load_dataset(f.path(), "label"), Err(Error::Data(_))));

        let mut g = tempfile::NamedTempFile::new().unwrap();
        writeln!(g, "a,y\n1,0\n2,2").unwrap();
        assert!(load_dataset(g.path(), "y").is_err());
        let mut h = tempfile::NamedTempFile::new().unwrap();
        writeln!(h, "a,y").unwrap();
        assert!(load_dataset(h.path(), "y").is_err());
        let mut k = tempfile::NamedTempFile::new().unwrap();
        writeln!(k, "a,y\nfoo,1\n2,0").unwrap();
        assert!(load_dataset(k.path(), "y").is_err());
    }

    #[test]
    fn zellner_identity_second_moment() {
        // Rows ±√2 e_j give Σ_X = I.
        let s = 2f64.sqrt();
        let ds = toy(&[s, 0.0, -s, 0.0, 0.0, s, 0.0, -s], 4, 2);
        let prec = zellner_prior(&ds).unwrap();
        let expected = PI * PI * 2.0 / 3.0;
        assert!((expected - 6.579_736).abs() < 1e-6);
        assert!((&prec - DMatrix::identity(2, 2) * expected).amax() < 1e-12);
    }

    #[test]
    fn zellner_single_row_is_regularized() {
        let ds = toy(&[1.0, 2.0, 3.0], 1, 3);
        let prec = zellner_prior(&ds).unwrap();
        assert!(prec.clone().cholesky().is_some());
        assert!(prec.amax() > 1e6);
    }

    #[test]
    fn zellner_positive_definite() {
        let ds = synthetic_dataset(50, 3, 4).unwrap();
        let prec = zellner_prior(&ds).unwrap();
        assert_eq!(prec, prec.transpose());
        assert!(prec.cholesky().is_some());
    }

    #[test]
    fn preconditioner_round_trip_and_identity() {
        let ds = synthetic_dataset(40, 3, 9).unwrap();
        let map = Preconditioner::from_covariance(&ds.second_moment()).unwrap();
        let beta = [0.3, -1.2, 2.5];
        let back = map.back(&map.forward(&beta));
        for (a, b) in back.iter().zip(beta) {
            assert!((a - b).abs() < 1e-10);
        }
        let id = Preconditioner::from_covariance(&DMatrix::identity(3, 3)).unwrap();
        assert!((id.sqrt() - DMatrix::identity(3, 3)).amax() < 1e-15);
        assert!(Preconditioner::from_covariance(&DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn preconditioned_gradient_chain_rule() {
        let ds = synthetic_dataset(30, 2, 2).unwrap();
        let model = LogisticModel::new(ds.design.clone(), ds.labels.clone(), zellner_prior(&ds).unwrap()).unwrap();
        let raw = LogisticPotential::new(model.clone()).unwrap();
        let pre = precondition(&model).unwrap();
        let bt = [0.4, -0.7];
        let beta = pre.map.back(&bt);
        let g_raw = raw.gradient(&beta);
        let chain = pre.map.back(&g_raw);
        let g = pre.potential.gradient(&bt);
        for (a, b) in g.iter().zip(&chain) {
            assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()));
        }
        // Finite differences of β̃ ↦ U(Sβ̃) on the raw potential.
        let h = 1e-6;
        for i in 0..2 {
            let (mut up, mut dn) = (bt, bt);
            up[i] += h;
            dn[i] -= h;
            let fd = (raw.value(&pre.map.back(&up)) - raw.value(&pre.map.back(&dn))) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6 * (1.0 + g[i].abs()), "{fd} vs {}", g[i]);
        }
    }

    #[test]
    fn marginal_accuracy_edges() {
        let a = DMatrix::from_row_slice(4, 2, &[0.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 4.0]);
        let same = marginal_accuracy(&a, &a, 10).unwrap();
        assert!(same.per_dimension.iter().all(|&v| v == 1.0));
        let b = a.map(|v| v + 100.0);
        let apart = marginal_accuracy(&a, &b, 10).unwrap();
        assert!(apart.per_dimension.iter().all(|&v| (v - 0.5).abs() < 1e-15));
        let ab = marginal_accuracy(&a, &b.rows(0, 2).into_owned(), 7).unwrap();
        let ba = marginal_accuracy(&b.rows(0, 2).into_owned(), &a, 7).unwrap();
        assert_eq!(ab, ba);
        let empty = DMatrix::<f64>::zeros(0, 2);
        assert!(marginal_accuracy(&a, &empty, 10).is_err());
    }

    #[test]
    fn marginal_accuracy_same_law() {
        let n = 100_000;
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        fill_standard_normal(&mut stream_rng(1, 0), &mut a);
        fill_standard_normal(&mut stream_rng(1, 1), &mut b);
        let ma = marginal_accuracy(
            &DMatrix::from_column_slice(n, 1, &a),
            &DMatrix::from_column_slice(n, 1, &b),
            50,
        )
        .unwrap();
        assert!(ma.mean >= 0.98, "{}", ma.mean);
    }

    #[test]
    fn tuner_lands_in_band() {
        let ds = synthetic_dataset(100, 3, 5).unwrap();
        let target = benchmark_target(&ds, PriorKind::Zellner, true).unwrap();
        let c = target.potential.constants();
        let (g, r) = tune_mala_step(&target.potential, c.discretization_step_cap(), (0.45, 0.55), 3).unwrap();
        assert!((0.45..=0.55).contains(&r));
        assert_eq!(pilot_acceptance(&target.potential, g, 3).unwrap(), r);
    }

    #[test]
    fn benchmark_is_deterministic() {
        let ds = synthetic_dataset(60, 2, 1).unwrap();
        let mut cfg = BenchmarkConfig::new(2_000, 11);
        cfg.replicas = 2;
        cfg.epsilon = Some(0.1);
        let a = run_benchmark(&ds, &cfg).unwrap();
        let b = run_benchmark(&ds, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.algorithms.len(), 2);
        assert_eq!(a.algorithms[0].replica_mean.len(), 2);
        assert!(a.plan.is_some());
        let json = serde_json::to_string(&a).unwrap();
        let back: BenchmarkReport = serde_json::from_str(&json).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), json);
        let f = tempfile::NamedTempFile::new().unwrap();
        a.write_csv(f.path()).unwrap();
        let text = std::fs::read_to_string(f.path()).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 3 * 2);
    }
}
