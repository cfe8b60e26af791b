//! ULA and MALA kernels, chain runners and the synchronous coupling.

use std::path::Path;

use log::warn;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::potentials::{norm, Potential};
use crate::rng::{fill_standard_normal, stream_rng};
use crate::schedules::StepSchedule;

/// Chains farther than this from the origin are treated as diverged.
pub const DIVERGENCE_RADIUS: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Ula,
    Mala,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ula" => Ok(Algorithm::Ula),
            "mala" => Ok(Algorithm::Mala),
            other => Err(invalid(format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub position: Vec<f64>,
    pub step_index: usize,
}

impl ChainState {
    pub fn new(position: Vec<f64>) -> Self {
        ChainState {
            position,
            step_index: 0,
        }
    }
}

fn check_step(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("step size must be positive, got {gamma}")))
    }
}

fn guard(position: &[f64], step: usize, last: &[f64]) -> Result<()> {
    let r = norm(position);
    if r.is_finite() && r <= DIVERGENCE_RADIUS {
        Ok(())
    } else {
        Err(Error::Divergence {
            step,
            last_finite: last.to_vec(),
        })
    }
}

/// `x' = x - γ∇U(x) + √(2γ) z` written into `out`, with `grad = ∇U(x)`.
fn euler_into(x: &[f64], grad: &[f64], gamma: f64, noise: &[f64], out: &mut [f64]) {
    let s = (2.0 * gamma).sqrt();
    for i in 0..x.len() {
        out[i] = x[i] - gamma * grad[i] + s * noise[i];
    }
}

/// One ULA transition driven by the supplied standard normal vector.
pub fn ula_step<P: Potential + ?Sized>(
    state: &ChainState,
    potential: &P,
    gamma: f64,
    noise: &[f64],
) -> Result<ChainState> {
    check_step(gamma)?;
    let grad = potential.gradient(&state.position);
    let mut next = vec![0.0; state.position.len()];
    euler_into(&state.position, &grad, gamma, noise, &mut next);
    guard(&next, state.step_index + 1, &state.position)?;
    Ok(ChainState {
        position: next,
        step_index: state.step_index + 1,
    })
}

/// `ln` of the MALA acceptance ratio for a move `x -> y`.
#[allow(clippy::too_many_arguments)]
pub fn mala_log_acceptance(
    x: &[f64],
    u_x: f64,
    grad_x: &[f64],
    y: &[f64],
    u_y: f64,
    grad_y: &[f64],
    gamma: f64,
) -> f64 {
    let mut forward = 0.0;
    let mut backward = 0.0;
    for i in 0..x.len() {
        let f = y[i] - x[i] + gamma * grad_x[i];
        let b = x[i] - y[i] + gamma * grad_y[i];
        forward += f * f;
        backward += b * b;
    }
    -u_y + u_x + (forward - backward) / (4.0 * gamma)
}

/// One MALA transition with explicit randomness: `noise` drives the proposal
/// and the move is accepted iff `uniform < exp(log ratio)`.
pub fn mala_step_with<P: Potential + ?Sized>(
    state: &ChainState,
    potential: &P,
    gamma: f64,
    noise: &[f64],
    uniform: f64,
) -> Result<(ChainState, bool)> {
    check_step(gamma)?;
    let x = &state.position;
    let grad_x = potential.gradient(x);
    let mut y = vec![0.0; x.len()];
    euler_into(x, &grad_x, gamma, noise, &mut y);
    let grad_y = potential.gradient(&y);
    let log_ratio = mala_log_acceptance(x, potential.value(x), &grad_x, &y, potential.value(&y), &grad_y, gamma);
    if log_ratio.is_nan() {
        return Err(Error::Numeric(format!(
            "MALA acceptance ratio is not a number at step {}",
            state.step_index + 1
        )));
    }
    let accepted = uniform.ln() < log_ratio;
    let position = if accepted { y } else { x.clone() };
    Ok((
        ChainState {
            position,
            step_index: state.step_index + 1,
        },
        accepted,
    ))
}

/// One MALA transition drawing its randomness from `rng`.
pub fn mala_step<P: Potential + ?Sized, R: Rng + ?Sized>(
    state: &ChainState,
    potential: &P,
    gamma: f64,
    rng: &mut R,
) -> Result<(ChainState, bool)> {
    let mut noise = vec![0.0; state.position.len()];
    fill_standard_normal(rng, &mut noise);
    let u: f64 = rng.gen();
    mala_step_with(state, potential, gamma, &noise, u)
}

/// Advances two chains with the same noise.
pub fn synchronous_pair_step<P: Potential + ?Sized>(
    x: &[f64],
    y: &[f64],
    potential: &P,
    gamma: f64,
    noise: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let cap = potential.constants().contraction_step_cap();
    if gamma > cap {
        return Err(invalid(format!("step {gamma} exceeds 2/(m+L) = {cap}")));
    }
    let xs = ula_step(&ChainState::new(x.to_vec()), potential, gamma, noise)?;
    let ys = ula_step(&ChainState::new(y.to_vec()), potential, gamma, noise)?;
    Ok((xs.position, ys.position))
}

/// Burn-in used when none is given: `⌈√n⌉` for constant steps, `⌈ln n⌉`
/// for decreasing ones.
pub fn default_burn_in(schedule: &StepSchedule, n: usize) -> usize {
    let n = n as f64;
    if schedule.is_constant() {
        n.sqrt().ceil() as usize
    } else {
        n.ln().ceil().max(0.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub algorithm: Algorithm,
    /// Steps kept after burn-in.
    pub n: usize,
    /// Discarded steps; `None` picks [`default_burn_in`].
    #[serde(default)]
    pub burn_in: Option<usize>,
    pub seed: u64,
    #[serde(default)]
    pub replica: u64,
    /// Starting point; the minimizer when absent.
    #[serde(default)]
    pub start: Option<Vec<f64>>,
}

impl ChainConfig {
    pub fn new(algorithm: Algorithm, n: usize, seed: u64) -> Self {
        ChainConfig {
            algorithm,
            n,
            burn_in: None,
            seed,
            replica: 0,
            start: None,
        }
    }

    pub fn burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = Some(burn_in);
        self
    }

    pub fn start(mut self, start: Vec<f64>) -> Self {
        self.start = Some(start);
        self
    }

    pub fn replica(mut self, replica: u64) -> Self {
        self.replica = replica;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainRun {
    pub final_state: ChainState,
    pub n_steps: usize,
    pub burn_in: usize,
    /// Fraction of accepted MALA proposals; 1 for ULA.
    pub acceptance_rate: f64,
    pub seed: u64,
    pub replica: u64,
    /// `f(X_k)` for `k = N+1..=N+n`, when a functional was supplied.
    pub functional_stream: Option<Vec<f64>>,
}

/// JSON summary of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub final_position: Vec<f64>,
    pub n: usize,
    #[serde(rename = "N")]
    pub burn_in: usize,
    pub acceptance_rate: f64,
    pub seed: u64,
}

impl ChainRun {
    pub fn summary(&self) -> ChainSummary {
        ChainSummary {
            final_position: self.final_state.position.clone(),
            n: self.n_steps,
            burn_in: self.burn_in,
            acceptance_rate: self.acceptance_rate,
            seed: self.seed,
        }
    }

    /// Writes the functional stream as `step,value` rows.
    pub fn write_stream_csv(&self, path: &Path) -> Result<()> {
        let stream = self
            .functional_stream
            .as_ref()
            .ok_or_else(|| invalid("run has no functional stream"))?;
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["step", "value"])?;
        for (i, v) in stream.iter().enumerate() {
            w.write_record(&[(self.burn_in + i + 1).to_string(), format!("{v:.16e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn warn_if_outside_theory<P: Potential + ?Sized>(potential: &P, schedule: &StepSchedule) {
    let c = potential.constants();
    let g = schedule.first();
    if g > c.contraction_step_cap() {
        warn!(
            "first step {g} exceeds 2/(m+L) = {}; the chain need not contract",
            c.contraction_step_cap()
        );
    } else if g > c.discretization_step_cap() {
        warn!(
            "first step {g} exceeds 1/(m+L) = {}; discretization bounds do not apply",
            c.discretization_step_cap()
        );
    }
}

/// Runs `N + n` steps, calling `observe(k, X_k)` for every kept state
/// `k = N+1..=N+n`. Returns the final state and the acceptance rate.
pub fn run_chain_observed<P, F>(
    potential: &P,
    schedule: &StepSchedule,
    config: &ChainConfig,
    mut observe: F,
) -> Result<(ChainState, usize, f64)>
where
    P: Potential + ?Sized,
    F: FnMut(usize, &[f64]),
{
    if config.n == 0 {
        return Err(invalid("chain length n must be at least 1"));
    }
    let d = potential.dim();
    let start = match &config.start {
        Some(s) => s.clone(),
        None => potential
            .minimizer()
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![0.0; d]),
    };
    if start.len() != d {
        return Err(invalid(format!("start has dimension {}, expected {d}", start.len())));
    }
    let burn_in = config.burn_in.unwrap_or_else(|| default_burn_in(schedule, config.n));
    let total = burn_in + config.n;
    let mut rng = stream_rng(config.seed, config.replica);

    let mut x = start;
    let mut grad = potential.gradient(&x);
    let mut u_x = potential.value(&x);
    let mut y = vec![0.0; d];
    let mut grad_y = vec![0.0; d];
    let mut noise = vec![0.0; d];
    let mut accepted = 0usize;

    for k in 1..=total {
        let gamma = schedule.at(k);
        fill_standard_normal(&mut rng, &mut noise);
        euler_into(&x, &grad, gamma, &noise, &mut y);
        match config.algorithm {
            Algorithm::Ula => {
                guard(&y, k, &x)?;
                std::mem::swap(&mut x, &mut y);
                potential.gradient_into(&x, &mut grad);
                accepted += 1;
            }
            Algorithm::Mala => {
                let uniform: f64 = rng.gen();
                if !norm(&y).is_finite() {
                    // An overflowing proposal has zero acceptance probability.
                } else {
                    potential.gradient_into(&y, &mut grad_y);
                    let u_y = potential.value(&y);
                    let log_ratio = mala_log_acceptance(&x, u_x, &grad, &y, u_y, &grad_y, gamma);
                    if log_ratio.is_nan() {
                        return Err(Error::Numeric(format!("MALA acceptance ratio is not a number at step {k}")));
                    }
                    if uniform.ln() < log_ratio {
                        std::mem::swap(&mut x, &mut y);
                        std::mem::swap(&mut grad, &mut grad_y);
                        u_x = u_y;
                        accepted += 1;
                    }
                }
                guard(&x, k, &x)?;
            }
        }
        if k > burn_in {
            observe(k, &x);
        }
    }
    let rate = accepted as f64 / total as f64;
    Ok((
        ChainState {
            position: x,
            step_index: total,
        },
        burn_in,
        rate,
    ))
}

/// Runs one chain, optionally streaming `f(X_k)` after burn-in.
pub fn run_chain<P: Potential + ?Sized>(
    potential: &P,
    schedule: &StepSchedule,
    config: &ChainConfig,
    functional: Option<&(dyn Fn(&[f64]) -> f64 + Sync)>,
) -> Result<ChainRun> {
    warn_if_outside_theory(potential, schedule);
    let mut stream = functional.map(|_| Vec::with_capacity(config.n));
    let (final_state, burn_in, acceptance_rate) =
        run_chain_observed(potential, schedule, config, |_, x| {
            if let (Some(f), Some(s)) = (functional, stream.as_mut()) {
                s.push(f(x));
            }
        })?;
    Ok(ChainRun {
        final_state,
        n_steps: config.n,
        burn_in,
        acceptance_rate,
        seed: config.seed,
        replica: config.replica,
        functional_stream: stream,
    })
}

/// Runs replicas `0..replicas` of `config` in parallel, one stream each.
pub fn run_replicas<P: Potential + ?Sized>(
    potential: &P,
    schedule: &StepSchedule,
    config: &ChainConfig,
    replicas: u64,
    functional: Option<&(dyn Fn(&[f64]) -> f64 + Sync)>,
) -> Result<Vec<ChainRun>> {
    warn_if_outside_theory(potential, schedule);
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            let cfg = config.clone().replica(r);
            let mut stream = functional.map(|_| Vec::with_capacity(cfg.n));
            let (final_state, burn_in, acceptance_rate) =
                run_chain_observed(potential, schedule, &cfg, |_, x| {
                    if let (Some(f), Some(s)) = (functional, stream.as_mut()) {
                        s.push(f(x));
                    }
                })?;
            Ok(ChainRun {
                final_state,
                n_steps: cfg.n,
                burn_in,
                acceptance_rate,
                seed: cfg.seed,
                replica: r,
                functional_stream: stream,
            })
        })
        .collect()
}
