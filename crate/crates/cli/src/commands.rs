//! One function per subcommand: build the inputs, run, format the report.

use std::path::Path;
use std::sync::Arc;

use langevin_kit::benchmark::{
    benchmark_target, load_dataset, run_benchmark, synthetic_dataset, Preconditioner, PriorKind,
    ScheduleRule,
};
use langevin_kit::bounds::{
    self, lambda, tv_bias, tv_discretization, tv_fixed_step_finite, tv_kernel_contraction,
    tv_kernel_stationary, tv_semigroup, w2_bias, w2_contraction, w2_discretization,
    w2_stationary_contraction, SemigroupBranch,
};
use langevin_kit::coupling::{simulate_uncoupled_fraction, tv_bound_ar, ula_as_ar_spec};
use langevin_kit::estimators::{self, concentration_bound, mse_bound, u4, u5, variance_bound};
use langevin_kit::samplers::default_burn_in;
use langevin_kit::{
    run_chain, Algorithm, BenchmarkConfig, BoundInputs, BoundReport, ChainConfig,
    ConvexityConstants, Dataset, GaussianPotential, Metric, Potential, RhoReading, StepSchedule,
    Variant, WeightedEstimatorConfig,
};
use serde::Serialize;

use crate::args::{
    BenchArgs, BoundArgs, ConstantsArgs, CoupleArgs, EstimateArgs, PlanArgs, SampleArgs,
    ScheduleArgs, TargetArgs, U4PlotArgs,
};
use crate::error::{config_err, CliResult};
use crate::output::{emit, float, to_json};

const DEFAULT_N: usize = 1000;
const DEFAULT_SYNTHETIC_P: usize = 500;
const DEFAULT_SYNTHETIC_D: usize = 5;

type Functional = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

fn required<T>(v: Option<T>, flag: &str) -> CliResult<T> {
    v.ok_or_else(|| config_err(format!("missing required parameter --{flag}")))
}

fn parse<T>(v: Option<&str>, default: &str) -> CliResult<T>
where
    T: std::str::FromStr<Err = langevin_kit::Error>,
{
    Ok(v.unwrap_or(default).parse()?)
}

#[derive(Debug, Serialize)]
struct TargetSummary {
    potential: &'static str,
    dim: usize,
    constants: ConvexityConstants,
    preconditioned: bool,
}

/// A target in sampling coordinates with the map back to model coordinates.
struct Target {
    potential: Arc<dyn Potential>,
    map: Option<Preconditioner>,
    summary: TargetSummary,
}

impl Target {
    fn to_model(&self, x: &[f64]) -> Vec<f64> {
        match &self.map {
            Some(m) => m.back(x),
            None => x.to_vec(),
        }
    }

    fn to_sampling(&self, x: &[f64]) -> Vec<f64> {
        match &self.map {
            Some(m) => m.forward(x),
            None => x.to_vec(),
        }
    }

    fn minimizer(&self) -> Vec<f64> {
        self.potential
            .minimizer()
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![0.0; self.potential.dim()])
    }

    fn check_dim(&self, x: &[f64], what: &str) -> CliResult<()> {
        let d = self.potential.dim();
        if x.len() != d {
            return Err(config_err(format!("{what} has {} entries, target dimension is {d}", x.len())));
        }
        Ok(())
    }
}

fn is_logistic(t: &TargetArgs) -> bool {
    match t.potential.as_deref() {
        Some(p) => p.eq_ignore_ascii_case("logistic"),
        None => t.data.is_some() || t.synthetic_p.is_some() || t.synthetic_d.is_some(),
    }
}

fn dataset(t: &TargetArgs) -> CliResult<Dataset> {
    match &t.data {
        Some(path) => {
            let label = required(t.label.as_deref(), "label")?;
            Ok(load_dataset(path, label)?)
        }
        None => Ok(synthetic_dataset(
            t.synthetic_p.unwrap_or(DEFAULT_SYNTHETIC_P),
            t.synthetic_d.unwrap_or(DEFAULT_SYNTHETIC_D),
            t.data_seed.unwrap_or(0),
        )?),
    }
}

fn prior_kind(t: &TargetArgs) -> CliResult<PriorKind> {
    match t.prior.as_deref().unwrap_or("zellner") {
        "zellner" => Ok(PriorKind::Zellner),
        "isotropic" => Ok(PriorKind::Isotropic),
        other => Err(config_err(format!("unknown prior {other:?}; expected zellner or isotropic"))),
    }
}

fn build_target(t: &TargetArgs) -> CliResult<Target> {
    if is_logistic(t) {
        let data = dataset(t)?;
        let precondition = t.precondition.unwrap_or(false);
        let pre = benchmark_target(&data, prior_kind(t)?, precondition)?;
        let potential: Arc<dyn Potential> = Arc::new(pre.potential);
        let summary = TargetSummary {
            potential: "logistic",
            dim: potential.dim(),
            constants: potential.constants(),
            preconditioned: precondition,
        };
        return Ok(Target {
            potential,
            map: precondition.then_some(pre.map),
            summary,
        });
    }
    match t.potential.as_deref() {
        None | Some("gaussian") => {}
        Some(other) => {
            return Err(config_err(format!("unknown potential {other:?}; expected gaussian or logistic")))
        }
    }
    let gaussian = match &t.precision {
        Some(p) => GaussianPotential::new(p)?,
        None => GaussianPotential::standard(t.dim.unwrap_or(1))?,
    };
    let potential: Arc<dyn Potential> = Arc::new(gaussian);
    let summary = TargetSummary {
        potential: "gaussian",
        dim: potential.dim(),
        constants: potential.constants(),
        preconditioned: false,
    };
    Ok(Target {
        potential,
        map: None,
        summary,
    })
}

/// Constant unless `alpha` is set and nonzero; `default_gamma` fills a
/// missing `--gamma`.
fn schedule(s: &ScheduleArgs, default_gamma: Option<f64>) -> CliResult<StepSchedule> {
    let gamma = match s.gamma.or(default_gamma) {
        Some(g) => g,
        None => return Err(config_err("missing required parameter --gamma")),
    };
    Ok(match s.alpha {
        Some(a) if a != 0.0 => StepSchedule::polynomial(gamma, a)?,
        _ => StepSchedule::constant(gamma)?,
    })
}

fn constants(c: &ConstantsArgs) -> CliResult<ConvexityConstants> {
    Ok(ConvexityConstants::new(required(c.m, "m")?, required(c.l, "L")?, c.ltilde)?)
}

/// Indicator or moment evaluated in model coordinates.
fn functional(name: &str, target: &Target, radius: f64) -> CliResult<Functional> {
    let map = target.map.clone();
    let back = move |x: &[f64]| match &map {
        Some(m) => m.back(x),
        None => x.to_vec(),
    };
    let center = target.to_model(&target.minimizer());
    Ok(match name {
        "positive" => Box::new(move |x| if back(x)[0] > 0.0 { 1.0 } else { 0.0 }),
        "coordinate" => Box::new(move |x| back(x)[0]),
        "norm2" => Box::new(move |x| back(x).iter().map(|v| v * v).sum()),
        "ball" => Box::new(move |x| {
            let d2: f64 = back(x).iter().zip(&center).map(|(a, b)| (a - b).powi(2)).sum();
            if d2 <= radius * radius {
                1.0
            } else {
                0.0
            }
        }),
        other => {
            return Err(config_err(format!(
                "unknown functional {other:?}; expected positive, coordinate, norm2 or ball"
            )))
        }
    })
}

#[derive(Debug, Serialize)]
struct SampleReport {
    target: TargetSummary,
    algorithm: Algorithm,
    schedule: StepSchedule,
    n: usize,
    #[serde(rename = "N")]
    burn_in: usize,
    seed: u64,
    replica: u64,
    acceptance_rate: f64,
    final_position: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    functional: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    functional_mean: Option<f64>,
}

pub fn sample(a: SampleArgs, out: Option<&Path>) -> CliResult<()> {
    let target = build_target(&a.target)?;
    let c = target.potential.constants();
    let sched = schedule(&a.schedule, Some(c.discretization_step_cap()))?;
    let algorithm: Algorithm = parse(a.algorithm.as_deref(), "ula")?;
    let mut cfg = ChainConfig::new(algorithm, a.n.unwrap_or(DEFAULT_N), a.seed.unwrap_or(0))
        .replica(a.replica.unwrap_or(0));
    if let Some(b) = a.burn_in {
        cfg = cfg.burn_in(b);
    }
    if let Some(s) = &a.start {
        target.check_dim(s, "start")?;
        cfg = cfg.start(target.to_sampling(s));
    }
    if a.stream.is_some() && a.functional.is_none() {
        return Err(config_err("--stream needs --functional"));
    }
    let f = a
        .functional
        .as_deref()
        .map(|name| functional(name, &target, 1.0))
        .transpose()?;
    let f_ref = f.as_ref().map(|b| &**b as &(dyn Fn(&[f64]) -> f64 + Sync));
    let run = run_chain(&*target.potential, &sched, &cfg, f_ref)?;
    if let Some(path) = &a.stream {
        run.write_stream_csv(path)?;
    }
    let functional_mean = run
        .functional_stream
        .as_ref()
        .map(|s| s.iter().sum::<f64>() / s.len() as f64);
    let report = SampleReport {
        algorithm,
        schedule: sched,
        n: run.n_steps,
        burn_in: run.burn_in,
        seed: run.seed,
        replica: run.replica,
        acceptance_rate: run.acceptance_rate,
        final_position: target.to_model(&run.final_state.position),
        functional: a.functional,
        functional_mean,
        target: target.summary,
    };
    emit(&to_json(&report)?, out)
}

const THEOREMS: &str = "w2_bias, w2_discretization, w2_contraction, w2_stationary_contraction, \
    tv_bias, tv_discretization, tv_fixed_step_finite, tv_kernel_contraction, \
    tv_kernel_stationary, tv_semigroup, drift_rho, lambda, u4, u5, variance, mse";

/// W2-type evaluators work with squares; the report gives the distance and
/// keeps the square as `w2_squared`.
fn w2_distance(mut report: BoundReport) -> BoundReport {
    let sq = report.value;
    report.value = sq.sqrt();
    report.with("w2_squared", sq)
}

pub fn bound(a: BoundArgs, out: Option<&Path>) -> CliResult<()> {
    let theorem = required(a.theorem.clone(), "theorem")?;
    let c = constants(&a.constants)?;
    let d = a.constants.d.unwrap_or(1);
    let variant: Variant = parse(a.variant.as_deref(), "basic")?;
    let rho: RhoReading = parse(a.rho_reading.as_deref(), "verbatim")?;
    let gamma = || required(a.schedule.gamma, "gamma");
    let n = || required(a.n, "n");
    let ell = || required(a.ell, "ell");
    let distance = || required(a.distance, "distance");
    let from = a.from.unwrap_or(1);
    let start_dist2 = a.start_dist2.unwrap_or(0.0);
    let inputs = || -> CliResult<BoundInputs> {
        Ok(BoundInputs::new(c, d, schedule(&a.schedule, None)?, start_dist2)?.with_rho_reading(rho))
    };
    let estimator = || -> CliResult<WeightedEstimatorConfig> {
        Ok(WeightedEstimatorConfig::new(
            a.burn_in.unwrap_or(0),
            n()?,
            schedule(&a.schedule, None)?,
            1.0,
        )?)
    };
    let report = match theorem.as_str() {
        "w2_bias" => w2_distance(BoundReport::new("w2_bias", w2_bias(&c, d, gamma()?, variant)?)),
        "w2_discretization" => w2_distance(w2_discretization(&inputs()?, n()?, variant)?),
        "w2_contraction" => {
            let dist = distance()?;
            BoundReport::new(&theorem, w2_contraction(&inputs()?, dist * dist, from, n()?)?)
        }
        "w2_stationary_contraction" => {
            BoundReport::new(&theorem, w2_stationary_contraction(&inputs()?, gamma()?, n()?)?)
        }
        "tv_bias" => tv_bias(&c, d, gamma()?, variant)?,
        "tv_discretization" => tv_discretization(&inputs()?, ell()?, n()?, variant)?,
        "tv_fixed_step_finite" => tv_fixed_step_finite(&inputs()?, gamma()?, ell()?)?,
        "tv_kernel_contraction" => {
            BoundReport::new(&theorem, tv_kernel_contraction(&inputs()?, distance()?, from, n()?)?)
        }
        "tv_kernel_stationary" => {
            BoundReport::new(&theorem, tv_kernel_stationary(&inputs()?, gamma()?, n()?)?)
        }
        "tv_semigroup" => {
            let branch = match a.branch.as_deref().unwrap_or("target") {
                "points" => SemigroupBranch::Points { distance: distance()? },
                "wasserstein" => SemigroupBranch::Wasserstein { w1: distance()? },
                "target" => SemigroupBranch::Target {
                    start_dist: start_dist2.sqrt(),
                },
                other => {
                    return Err(config_err(format!(
                        "unknown branch {other:?}; expected points, wasserstein or target"
                    )))
                }
            };
            BoundReport::new(&theorem, tv_semigroup(&c, d, branch, required(a.t, "t")?)?)
        }
        "drift_rho" => BoundReport::new(&theorem, inputs()?.drift_rho(from, n()?)?),
        "lambda" => BoundReport::new(&theorem, lambda(&inputs()?, from, n()?)?),
        "u4" => BoundReport::new(&theorem, u4(&estimator()?, &c)?),
        "u5" => BoundReport::new(&theorem, u5(&estimator()?, &c)?),
        "variance" => BoundReport::new(&theorem, variance_bound(&estimator()?, &c)?),
        "mse" => mse_bound(&estimator()?, &c, d, start_dist2, variant)?,
        other => return Err(config_err(format!("unknown theorem {other:?}; expected one of {THEOREMS}"))),
    };
    emit(&to_json(&report)?, out)
}

pub fn plan(a: PlanArgs, out: Option<&Path>) -> CliResult<()> {
    let c = constants(&a.constants)?;
    let metric: Metric = parse(a.metric.as_deref(), "tv")?;
    let variant: Variant = parse(a.variant.as_deref(), "basic")?;
    let epsilon = required(a.epsilon, "epsilon")?;
    let plan = bounds::plan(&c, a.constants.d.unwrap_or(1), epsilon, metric, variant)?;
    emit(&to_json(&plan)?, out)
}

pub fn couple(a: CoupleArgs, out: Option<&Path>) -> CliResult<()> {
    let target = build_target(&a.target)?;
    let c = target.potential.constants();
    let sched = schedule(&a.schedule, Some(c.discretization_step_cap()))?;
    let d = target.potential.dim();
    let x = a.x.clone().unwrap_or_else(|| vec![0.0; d]);
    let y = a.y.clone().unwrap_or_else(|| {
        let mut y = x.clone();
        y[0] += 1.0;
        y
    });
    target.check_dim(&x, "x")?;
    target.check_dim(&y, "y")?;
    let horizon = a.horizon.unwrap_or(50);
    let every = a.every.unwrap_or(1);
    if horizon == 0 || every == 0 {
        return Err(config_err("horizon and every must be positive"));
    }
    let reps = a.reps.unwrap_or(10_000);
    let seed = a.seed.unwrap_or(0);
    let spec = ula_as_ar_spec(target.potential.clone(), sched, horizon)?;
    let mut csv = String::from("n,empirical_fraction,std_error,theoretical_bound\n");
    for n in (every..=horizon).step_by(every) {
        let (p, se) = simulate_uncoupled_fraction(&spec, &x, &y, n, reps, seed)?;
        let b = tv_bound_ar(&spec, &x, &y, n)?;
        csv.push_str(&format!("{n},{},{},{}\n", float(p), float(se), float(b)));
    }
    emit(&csv, out)
}

#[derive(Debug, Serialize)]
struct ConcentrationPoint {
    r: f64,
    bound: f64,
}

#[derive(Debug, Serialize)]
struct EstimateReport {
    target: TargetSummary,
    schedule: StepSchedule,
    n: usize,
    #[serde(rename = "N")]
    burn_in: usize,
    seed: u64,
    functional: String,
    estimate: f64,
    variance_bound: f64,
    mse: BoundReport,
    concentration: Vec<ConcentrationPoint>,
}

pub fn estimate(a: EstimateArgs, out: Option<&Path>) -> CliResult<()> {
    let target = build_target(&a.target)?;
    let c = target.potential.constants();
    let d = target.potential.dim();
    let sched = schedule(&a.schedule, Some(c.discretization_step_cap()))?;
    let n = a.n.unwrap_or(10_000);
    let burn_in = a.burn_in.unwrap_or_else(|| default_burn_in(&sched, n));
    let seed = a.seed.unwrap_or(0);
    let name = a.functional.clone().unwrap_or_else(|| "positive".into());
    if !matches!(name.as_str(), "positive" | "ball") {
        return Err(config_err(format!("functional {name:?} is not bounded; use positive or ball")));
    }
    let f = functional(&name, &target, a.radius.unwrap_or(1.0))?;
    let start = match &a.start {
        Some(s) => {
            target.check_dim(s, "start")?;
            target.to_sampling(s)
        }
        None => target.minimizer(),
    };
    let start_dist2: f64 = start
        .iter()
        .zip(target.minimizer())
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    let cfg = WeightedEstimatorConfig::new(burn_in, n, sched, 1.0)?;
    let chain = ChainConfig::new(Algorithm::Ula, n, seed).burn_in(burn_in).start(start);
    let run = run_chain(&*target.potential, &sched, &chain, Some(&*f as &(dyn Fn(&[f64]) -> f64 + Sync)))?;
    let value = estimators::estimate(&run, &cfg)?;
    let variant: Variant = parse(a.variant.as_deref(), "basic")?;
    let concentration = a
        .r
        .clone()
        .unwrap_or_default()
        .into_iter()
        .map(|r| Ok(ConcentrationPoint { r, bound: concentration_bound(&cfg, &c, r)? }))
        .collect::<CliResult<_>>()?;
    let report = EstimateReport {
        schedule: sched,
        n,
        burn_in,
        seed,
        functional: name,
        estimate: value,
        variance_bound: variance_bound(&cfg, &c)?,
        mse: mse_bound(&cfg, &c, d, start_dist2, variant)?,
        concentration,
        target: target.summary,
    };
    emit(&to_json(&report)?, out)
}

pub fn u4plot(a: U4PlotArgs, out: Option<&Path>) -> CliResult<()> {
    let c = ConvexityConstants::new(required(a.m, "m")?, required(a.l, "L")?, None)?;
    let sched = schedule(&a.schedule, Some(c.discretization_step_cap()))?;
    let burn_in = a.burn_in.unwrap_or(0);
    let n_max = a.n_max.unwrap_or(1000);
    let every = a.every.unwrap_or(10);
    if n_max == 0 || every == 0 {
        return Err(config_err("n_max and every must be positive"));
    }
    let mut csv = String::from("n,scaled_u4\n");
    for n in (every..=n_max).step_by(every) {
        let cfg = WeightedEstimatorConfig::new(burn_in, n, sched, 1.0)?;
        csv.push_str(&format!("{n},{}\n", float(cfg.normalizer() * u4(&cfg, &c)?)));
    }
    emit(&csv, out)
}

fn schedule_rule(a: &BenchArgs) -> CliResult<ScheduleRule> {
    match a.schedule.as_deref().unwrap_or("tuned") {
        "tuned" => Ok(ScheduleRule::Tuned),
        "paper" => Ok(ScheduleRule::Paper),
        "paper-decreasing" | "paper_decreasing" => Ok(ScheduleRule::PaperDecreasing),
        "constant" => Ok(ScheduleRule::Constant {
            gamma: required(a.gamma, "gamma")?,
        }),
        other => Err(config_err(format!(
            "unknown schedule {other:?}; expected tuned, paper, paper-decreasing or constant"
        ))),
    }
}

pub fn bench(a: BenchArgs, out: Option<&Path>) -> CliResult<()> {
    if a.target.potential.as_deref().is_some_and(|p| p != "logistic") {
        return Err(config_err("the benchmark needs a logistic target"));
    }
    let data = dataset(&a.target)?;
    let mut cfg = BenchmarkConfig::new(a.n.unwrap_or(10_000), a.seed.unwrap_or(0));
    if let Some(algs) = &a.algorithms {
        cfg.algorithms = algs.iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
    }
    cfg.schedule = schedule_rule(&a)?;
    cfg.burn_in = a.burn_in;
    cfg.prior = prior_kind(&a.target)?;
    cfg.precondition = a.target.precondition.unwrap_or(true);
    cfg.epsilon = a.epsilon;
    if let Some(r) = a.replicas {
        cfg.replicas = r;
    }
    if let Some(b) = a.bins {
        cfg.bins = b;
    }
    if let Some(f) = a.reference_factor {
        cfg.reference_factor = f;
    }
    let report = run_benchmark(&data, &cfg)?;
    if let Some(path) = &a.csv {
        report.write_csv(path)?;
    }
    emit(&to_json(&report)?, out)
}
