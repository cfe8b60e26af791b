//! Wasserstein-2 bounds.

use super::{check_cap, require_l_tilde, BoundInputs, BoundReport, Variant};
use crate::error::{invalid, Result};
use crate::potentials::ConvexityConstants;

/// `{∏_{k=n}^{ℓ}(1-κγ_k) · distance2}^{1/2}`: W2 distance after running the
/// kernels `n..=ℓ` from two points at squared distance `distance2`.
pub fn w2_contraction(inputs: &BoundInputs, distance2: f64, n: usize, l: usize) -> Result<f64> {
    if !(distance2 >= 0.0) {
        return Err(invalid(format!("squared distance must be nonnegative, got {distance2}")));
    }
    inputs.require_contraction()?;
    let prod = inputs.schedule.contraction_product(inputs.constants.kappa, n, l)?;
    Ok((prod * distance2).sqrt())
}

/// `(1-κγ)^{n/2}{‖x-x⋆‖² + 2κ⁻¹d}^{1/2}`: W2 distance from `δ_x R_γ^n` to
/// the stationary law of the constant-step chain.
pub fn w2_stationary_contraction(inputs: &BoundInputs, gamma: f64, n: usize) -> Result<f64> {
    let c = &inputs.constants;
    check_cap(gamma, c.contraction_step_cap(), "2/(m+L)")?;
    let q = (1.0 - c.kappa * gamma).max(0.0);
    Ok(q.powf(n as f64 / 2.0) * (inputs.start_dist2 + 2.0 * inputs.d() / c.kappa).sqrt())
}

/// Per-step summand of `u⁽²⁾` (basic) or `u⁽³⁾` (smooth) at step size `g`.
fn discretization_term(c: &ConvexityConstants, d: f64, g: f64, variant: Variant, lt: f64) -> f64 {
    let (m, l, k) = (c.m, c.l, c.kappa);
    let l2 = l * l;
    let l4 = l2 * l2;
    match variant {
        Variant::Basic => {
            l2 * g * g * (1.0 / k + g) * (2.0 * d + d * l2 * g / m + d * l2 * g * g / 6.0)
        }
        Variant::Smooth => {
            d * g.powi(3)
                * (2.0 * l2
                    + (d * lt * lt / 3.0 + g * l4 + 4.0 * l4 / (3.0 * m)) / k
                    + g * l4 * (g / 6.0 + 1.0 / m))
        }
    }
}

/// Bound on `W_2²(δ_x Q^n_γ, π)`: `u⁽¹⁾_n{‖x-x⋆‖² + d/m} + u⁽²⁾_n` (basic)
/// or `+ u⁽³⁾_n` (smooth).
pub fn w2_discretization(inputs: &BoundInputs, n: usize, variant: Variant) -> Result<BoundReport> {
    inputs.require_discretization()?;
    let c = &inputs.constants;
    let lt = match variant {
        Variant::Basic => 0.0,
        Variant::Smooth => require_l_tilde(c, "smooth W2 bound")?,
    };
    let d = inputs.d();
    let half = c.kappa / 2.0;
    let u1 = 2.0 * inputs.schedule.contraction_product(half, 1, n)?;
    let sum = if inputs.schedule.is_constant() {
        // Geometric series Σ_{i=1}^n t q^{n-i}.
        let g = inputs.schedule.first();
        let q = 1.0 - half * g;
        let t = discretization_term(c, d, g, variant, lt);
        t * (1.0 - q.powf(n as f64)) / (half * g)
    } else {
        let mut s = 0.0;
        for i in 1..=n {
            let g = inputs.schedule.at(i);
            s = s * (1.0 - half * g) + discretization_term(c, d, g, variant, lt);
        }
        s
    };
    let (name, key) = match variant {
        Variant::Basic => ("w2_discretization_basic", "u2"),
        Variant::Smooth => ("w2_discretization_smooth", "u3"),
    };
    let value = u1 * (inputs.start_dist2 + d / c.m) + sum;
    Ok(BoundReport::new(name, value).with("u1", u1).with(key, sum))
}

/// Bound on `W_2²(π, π_γ)` for the constant-step chain.
pub fn w2_bias(c: &ConvexityConstants, d: usize, gamma: f64, variant: Variant) -> Result<f64> {
    check_cap(gamma, c.discretization_step_cap(), "1/(m+L)")?;
    let lt = match variant {
        Variant::Basic => 0.0,
        Variant::Smooth => require_l_tilde(c, "smooth W2 bias bound")?,
    };
    // The stationary limit of the u⁽²⁾/u⁽³⁾ recursion: term / (κγ/2).
    Ok(2.0 * discretization_term(c, d as f64, gamma, variant, lt) / (c.kappa * gamma))
}
