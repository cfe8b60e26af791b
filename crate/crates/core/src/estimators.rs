//! Step-weighted ergodic averages `π̂_n^N(f) = Σ_{k=N+1}^{N+n} ω_k f(X_k)` and
//! their variance, concentration and mean-square-error bounds.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::bounds::{
    tv_bias, tv_discretization, tv_kernel_stationary, tv_semigroup, BoundInputs, BoundReport,
    SemigroupBranch, Variant,
};
use crate::error::{invalid, Result};
use crate::potentials::ConvexityConstants;
use crate::samplers::ChainRun;
use crate::schedules::{StepKind, StepSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedEstimatorConfig {
    #[serde(rename = "N")]
    pub burn_in: usize,
    pub n: usize,
    pub schedule: StepSchedule,
    /// `osc(f) = sup f - inf f`.
    pub osc: f64,
}

impl WeightedEstimatorConfig {
    pub fn new(burn_in: usize, n: usize, schedule: StepSchedule, osc: f64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("estimator length n must be at least 1"));
        }
        if !(osc.is_finite() && osc >= 0.0) {
            return Err(invalid(format!("oscillation must be nonnegative, got {osc}")));
        }
        Ok(WeightedEstimatorConfig {
            burn_in,
            n,
            schedule,
            osc,
        })
    }

    /// `Γ_{N+2,N+n+1}`, the weight normalizer.
    pub fn normalizer(&self) -> f64 {
        self.schedule.gamma_sum(self.burn_in + 2, self.burn_in + self.n + 1)
    }

    fn check_steps(&self, c: &ConvexityConstants) -> Result<()> {
        let g = self.schedule.first();
        let cap = c.contraction_step_cap();
        if g > cap * (1.0 + 1e-12) {
            return Err(invalid(format!("first step {g} exceeds 2/(m+L) = {cap}")));
        }
        if c.kappa * g >= 1.0 {
            return Err(invalid(format!("κγ_1 = {} must be below 1", c.kappa * g)));
        }
        Ok(())
    }
}

/// `ω_k = γ_{k+1}/Γ_{N+2,N+n+1}` for `k = N+1..=N+n`.
pub fn weights(config: &WeightedEstimatorConfig) -> Vec<f64> {
    let norm = config.normalizer();
    let start = config.burn_in + 1;
    (start..start + config.n)
        .map(|k| config.schedule.at(k + 1) / norm)
        .collect()
}

/// Weighted average of `f(X_k)` values recorded for `k = N+1..=N+n`.
pub fn estimate_stream(values: &[f64], config: &WeightedEstimatorConfig) -> Result<f64> {
    if values.len() != config.n {
        return Err(invalid(format!(
            "stream has {} values, configuration expects {}",
            values.len(),
            config.n
        )));
    }
    Ok(weights(config).iter().zip(values).map(|(w, v)| w * v).sum())
}

/// `π̂_n^N(f)` from a run that recorded a functional stream.
pub fn estimate(run: &ChainRun, config: &WeightedEstimatorConfig) -> Result<f64> {
    let stream = run
        .functional_stream
        .as_deref()
        .ok_or_else(|| invalid("run has no functional stream"))?;
    if run.burn_in != config.burn_in {
        return Err(invalid(format!(
            "run burn-in {} differs from configured {}",
            run.burn_in, config.burn_in
        )));
    }
    estimate_stream(stream, config)
}

/// `Σ_{k=N}^{N+n-1} γ_{k+1}{Σ_{i=k+2}^{N+n} ω_i/(πΛ_{k+2,i})^{1/2}}²
/// + κ⁻¹{Σ_{i=N+1}^{N+n} ω_i/(cπΛ_{N+1,i})^{1/2}}²` with `c = 4` for
/// `u⁽⁴⁾` and `c = 1` for `u⁽⁵⁾`.
fn u_term(config: &WeightedEstimatorConfig, c: &ConvexityConstants, second_scale: f64) -> Result<f64> {
    config.check_steps(c)?;
    let (big_n, n) = (config.burn_in, config.n);
    let kappa = c.kappa;
    let w = weights(config);
    let omega = |i: usize| w[i - big_n - 1];

    match config.schedule.kind() {
        StepKind::Constant { gamma } => {
            // Λ_{a,i} depends only on the length j = i - a + 1.
            let log_q = (-kappa * gamma).ln_1p();
            let inv_root = |j: usize, scale: f64| {
                let lam = (-(j as f64) * log_q).exp_m1() / kappa;
                1.0 / (scale * PI * lam).sqrt()
            };
            // prefix[m] = Σ_{j=1}^{m} (πΛ(j))^{-1/2}
            let mut prefix = vec![0.0; n + 1];
            for j in 1..=n {
                prefix[j] = prefix[j - 1] + inv_root(j, 1.0);
            }
            let wt = 1.0 / n as f64;
            let mut first = 0.0;
            for k in big_n..big_n + n {
                // i runs over k+2..=N+n, so lengths 1..=N+n-k-1.
                let len = (big_n + n).saturating_sub(k + 1);
                let inner = wt * prefix[len];
                first += gamma * inner * inner;
            }
            let second: f64 = (1..=n).map(|j| wt * inv_root(j, second_scale)).sum();
            Ok(first + second * second / kappa)
        }
        StepKind::Polynomial { .. } => {
            let horizon = big_n + n + 1;
            let table = config.schedule.log_product_table(kappa, horizon);
            let lam = |a: usize, i: usize| (-table.log_product(a, i)).exp_m1() / kappa;
            let mut first = 0.0;
            for k in big_n..big_n + n {
                let mut inner = 0.0;
                for i in k + 2..=big_n + n {
                    inner += omega(i) / (PI * lam(k + 2, i)).sqrt();
                }
                first += config.schedule.at(k + 1) * inner * inner;
            }
            let second: f64 = (big_n + 1..=big_n + n)
                .map(|i| omega(i) / (second_scale * PI * lam(big_n + 1, i)).sqrt())
                .sum();
            Ok(first + second * second / kappa)
        }
    }
}

/// `u⁽⁴⁾_{N,n}(γ)`.
pub fn u4(config: &WeightedEstimatorConfig, c: &ConvexityConstants) -> Result<f64> {
    u_term(config, c, 4.0)
}

/// `u⁽⁵⁾_{N,n}(γ)`.
pub fn u5(config: &WeightedEstimatorConfig, c: &ConvexityConstants) -> Result<f64> {
    u_term(config, c, 1.0)
}

/// `osc(f)²{2γ_1/Γ_{N+2,N+n+1} + u⁽⁴⁾}`.
pub fn variance_bound(config: &WeightedEstimatorConfig, c: &ConvexityConstants) -> Result<f64> {
    let u = u4(config, c)?;
    Ok(config.osc.powi(2) * (2.0 * config.schedule.first() / config.normalizer() + u))
}

/// Bound on `P(π̂ ≥ E π̂ + r)`; 1 at or below the threshold `osc/Γ`.
pub fn concentration_bound(config: &WeightedEstimatorConfig, c: &ConvexityConstants, r: f64) -> Result<f64> {
    let threshold = config.osc / config.normalizer();
    if !(r > threshold) {
        return Ok(1.0);
    }
    if config.osc == 0.0 {
        return Ok(0.0);
    }
    let u = u5(config, c)?;
    let excess = r - threshold;
    Ok((-excess * excess / (2.0 * config.osc.powi(2) * u)).exp().clamp(0.0, 1.0))
}

/// Squared bias plus variance of `π̂_n^N(f)` for the chain started at
/// distance `start_dist2.sqrt()` from the minimizer.
///
/// The squared bias is `osc² Σ ω_k TV_k²`, where `TV_k` bounds
/// `‖δ_x Q^k - π‖`: for a constant step, the stationary bias plus the kernel
/// contraction to `π_γ`; for decreasing steps, the diffusion's convergence at
/// time `Γ_k` plus the discretization bound split at `k - ⌊k^α⌋`.
pub fn mse_bound(
    config: &WeightedEstimatorConfig,
    c: &ConvexityConstants,
    d: usize,
    start_dist2: f64,
    variant: Variant,
) -> Result<BoundReport> {
    let inputs = BoundInputs::new(*c, d, config.schedule, start_dist2)?;
    let w = weights(config);
    let first = config.burn_in + 1;
    let tv: Vec<f64> = match config.schedule.kind() {
        StepKind::Constant { gamma } => {
            let bias = tv_bias(c, d, gamma, variant)?.value;
            (first..first + config.n)
                .map(|k| Ok((bias + tv_kernel_stationary(&inputs, gamma, k)?).min(1.0)))
                .collect::<Result<_>>()?
        }
        StepKind::Polynomial { alpha, .. } => {
            let start = SemigroupBranch::Target {
                start_dist: start_dist2.sqrt(),
            };
            (first..first + config.n)
                .map(|k| {
                    let split = k - ((k as f64).powf(alpha).floor() as usize).min(k);
                    if split == 0 {
                        return Ok(1.0);
                    }
                    let diffusion = tv_semigroup(c, d, start, config.schedule.gamma_sum(1, k))?;
                    let disc = tv_discretization(&inputs, k, split, variant)?.value;
                    Ok((diffusion + disc).min(1.0))
                })
                .collect::<Result<_>>()?
        }
    };
    let osc2 = config.osc.powi(2);
    let squared_bias = osc2 * w.iter().zip(&tv).map(|(wk, t)| wk * t * t).sum::<f64>();
    let u = u4(config, c)?;
    let variance = osc2 * (2.0 * config.schedule.first() / config.normalizer() + u);
    Ok(BoundReport::new("mse", squared_bias + variance)
        .with("squared_bias", squared_bias)
        .with("variance", variance)
        .with("u4", u))
}
