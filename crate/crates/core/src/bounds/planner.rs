//! Step size and iteration count for a target precision.

use serde::{Deserialize, Serialize};

use super::tv::{tv_bias, tv_kernel_stationary};
use super::w2::{w2_bias, w2_stationary_contraction};
use super::{BoundInputs, Metric, Variant};
use crate::error::{invalid, Error, Result};
use crate::potentials::ConvexityConstants;
use crate::schedules::StepSchedule;

const GAMMA_REL_TOL: f64 = 1e-4;
const MAX_HALVINGS: usize = 200;
const MAX_ITERATIONS: u64 = 1 << 52;

/// Planner output for a chain started at the minimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub gamma: f64,
    pub n: u64,
    pub bias: f64,
    pub transient: f64,
    /// `bias + transient`, re-evaluated at the returned pair.
    pub bound: f64,
    pub epsilon: f64,
    pub metric: Metric,
    pub variant: Variant,
}

struct Problem {
    constants: ConvexityConstants,
    dim: usize,
    metric: Metric,
    variant: Variant,
}

impl Problem {
    fn bias(&self, gamma: f64) -> Result<f64> {
        match self.metric {
            Metric::W2 => Ok(w2_bias(&self.constants, self.dim, gamma, self.variant)?.sqrt()),
            Metric::Tv => Ok(tv_bias(&self.constants, self.dim, gamma, self.variant)?.value),
        }
    }

    fn transient(&self, gamma: f64, n: u64) -> Result<f64> {
        let inputs = BoundInputs::new(
            self.constants,
            self.dim,
            StepSchedule::constant(gamma)?,
            0.0,
        )?;
        let n = n as usize;
        match self.metric {
            Metric::W2 => w2_stationary_contraction(&inputs, gamma, n),
            Metric::Tv => tv_kernel_stationary(&inputs, gamma, n),
        }
    }
}

/// Largest step whose bias bound is at most `epsilon/2` (to relative
/// tolerance `1e-4`), then the smallest `n` bringing the total to `epsilon`.
///
/// The bias bound need not be monotone in `γ`; the search keeps a step that
/// satisfies the budget at every stage, so the result always re-validates.
pub fn plan(
    constants: &ConvexityConstants,
    dim: usize,
    epsilon: f64,
    metric: Metric,
    variant: Variant,
) -> Result<Plan> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    if dim == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    let problem = Problem {
        constants: *constants,
        dim,
        metric,
        variant,
    };
    let budget = epsilon / 2.0;
    let cap = constants.discretization_step_cap();

    let gamma = if problem.bias(cap)? <= budget {
        cap
    } else {
        let mut lo = cap;
        let mut found = false;
        for _ in 0..MAX_HALVINGS {
            lo /= 2.0;
            if problem.bias(lo)? <= budget {
                found = true;
                break;
            }
        }
        if !found {
            return Err(Error::Infeasible(format!(
                "no step in (0, {cap}] brings the bias below {budget}"
            )));
        }
        let mut hi = (2.0 * lo).min(cap);
        while hi - lo > GAMMA_REL_TOL * lo {
            let mid = 0.5 * (lo + hi);
            if problem.bias(mid)? <= budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let bias = problem.bias(gamma)?;
    let allowance = epsilon - bias;

    // Doubling, then bisection for the first n within the allowance.
    let mut hi = 1u64;
    while problem.transient(gamma, hi)? > allowance {
        if hi >= MAX_ITERATIONS {
            return Err(Error::Infeasible(format!(
                "transient term stays above {allowance} for n up to {MAX_ITERATIONS}"
            )));
        }
        hi *= 2;
    }
    let mut lo = hi / 2;
    if problem.transient(gamma, lo)? <= allowance {
        lo = 0;
        hi = 0;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if problem.transient(gamma, mid)? <= allowance {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let n = hi;
    let transient = problem.transient(gamma, n)?;
    let bound = bias + transient;
    if bound > epsilon {
        return Err(Error::Numeric(format!(
            "planned pair (gamma={gamma}, n={n}) re-evaluates to {bound} > {epsilon}"
        )));
    }
    Ok(Plan {
        gamma,
        n,
        bias,
        transient,
        bound,
        epsilon,
        metric,
        variant,
    })
}
