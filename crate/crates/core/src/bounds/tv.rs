//! Total-variation bounds: the diffusion semigroup, the discrete kernels,
//! and the discretization error of ULA.

use std::f64::consts::PI;

use super::{check_cap, require_l_tilde, BoundInputs, BoundReport, Variant};
use crate::error::{invalid, Result};
use crate::normal::one_minus_two_cdf_neg;
use crate::potentials::ConvexityConstants;

/// `χ_m(t) = {(4/m)(e^{2mt} - 1)}^{1/2}`.
pub fn chi_m(m: f64, t: f64) -> f64 {
    (4.0 / m * (2.0 * m * t).exp_m1()).sqrt()
}

/// What the semigroup bound is measured from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SemigroupBranch {
    /// Two Dirac starts at distance `‖x - y‖`.
    Points { distance: f64 },
    /// Two laws at Wasserstein-1 distance `w1`.
    Wasserstein { w1: f64 },
    /// A Dirac start at distance `‖x - x⋆‖` against the target.
    Target { start_dist: f64 },
}

/// TV distance after running the Langevin diffusion for time `t`,
/// clamped to 1.
pub fn tv_semigroup(c: &ConvexityConstants, d: usize, branch: SemigroupBranch, t: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid(format!("time must be positive, got {t}")));
    }
    let m = c.m;
    let spread = (2.0 * PI / m * (2.0 * m * t).exp_m1()).sqrt();
    let raw = match branch {
        SemigroupBranch::Points { distance } => {
            non_negative(distance, "distance")?;
            one_minus_two_cdf_neg(distance / chi_m(m, t))
        }
        SemigroupBranch::Wasserstein { w1 } => {
            non_negative(w1, "w1")?;
            w1 / spread
        }
        SemigroupBranch::Target { start_dist } => {
            non_negative(start_dist, "start_dist")?;
            ((d as f64 / m).sqrt() + start_dist) / spread
        }
    };
    Ok(raw.min(1.0))
}

fn non_negative(v: f64, what: &str) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{what} must be nonnegative, got {v}")))
    }
}

/// `Λ_{n,ℓ} = κ⁻¹{∏_{j=n}^{ℓ}(1-κγ_j)⁻¹ - 1}`, zero for an empty range.
pub fn lambda(inputs: &BoundInputs, n: usize, l: usize) -> Result<f64> {
    let n = n.max(1);
    if l < n {
        return Ok(0.0);
    }
    let k = inputs.constants.kappa;
    if k * inputs.schedule.at(n) >= 1.0 {
        return Err(invalid(format!(
            "κγ_{n} = {} must be below 1",
            k * inputs.schedule.at(n)
        )));
    }
    let log_prod = inputs.schedule.log_contraction_product(k, n, l);
    Ok((-log_prod).exp_m1() / k)
}

/// `1 - 2Φ{-‖x-y‖/(8Λ_{n,ℓ})^{1/2}}`: TV between the chains started at two
/// points after the kernels `n..=ℓ`.
pub fn tv_kernel_contraction(inputs: &BoundInputs, distance: f64, n: usize, l: usize) -> Result<f64> {
    non_negative(distance, "distance")?;
    inputs.require_contraction()?;
    let lam = lambda(inputs, n, l)?;
    if distance == 0.0 {
        return Ok(0.0);
    }
    if lam == 0.0 {
        return Ok(1.0);
    }
    Ok(one_minus_two_cdf_neg(distance / (8.0 * lam).sqrt()))
}

/// `{4πκ(1-q^{n/2})}^{-1/2} q^{n/2}{‖x-x⋆‖ + (2κ⁻¹d)^{1/2}}` with
/// `q = 1-κγ`: TV from `δ_x R_γ^n` to the stationary law, clamped to 1.
pub fn tv_kernel_stationary(inputs: &BoundInputs, gamma: f64, n: usize) -> Result<f64> {
    let c = &inputs.constants;
    check_cap(gamma, c.contraction_step_cap(), "2/(m+L)")?;
    let q = (1.0 - c.kappa * gamma).max(0.0);
    let qh = q.powf(n as f64 / 2.0);
    let denom = 4.0 * PI * c.kappa * (1.0 - qh);
    if denom <= 0.0 {
        return Ok(1.0);
    }
    let raw = qh / denom.sqrt() * (inputs.start_dist2.sqrt() + (2.0 * inputs.d() / c.kappa).sqrt());
    Ok(raw.min(1.0))
}

/// TV between `δ_x Q^ℓ_γ` and the diffusion at time `Γ_ℓ`, using the split
/// index `n` (`1 ≤ n < ℓ`).
pub fn tv_discretization(inputs: &BoundInputs, l: usize, n: usize, variant: Variant) -> Result<BoundReport> {
    inputs.require_discretization()?;
    if n == 0 || n >= l {
        return Err(invalid(format!("split index must satisfy 1 <= n < l, got n={n}, l={l}")));
    }
    let c = &inputs.constants;
    let lt = match variant {
        Variant::Basic => 0.0,
        Variant::Smooth => require_l_tilde(c, "smooth TV discretization bound")?,
    };
    let (m, lip, k) = (c.m, c.l, c.kappa);
    let (l2, l4) = (lip * lip, lip.powi(4));
    let d = inputs.d();
    let sched = &inputs.schedule;

    // ϱ_{n,0}: empty product. Negative values of the verbatim reading are
    // clamped since the quantity stands for a second moment.
    let rho0 = inputs.rho_from_product(1.0).max(0.0);
    let g_next = sched.at(n + 1);
    let mut theta = 0.0;
    let mut elapsed = 0.0; // Γ_{1,i-1}
    for i in 1..=n {
        let g = sched.at(i);
        let e = (-2.0 * m * elapsed).exp();
        let delta = e * rho0 + (1.0 - e) * d / m;
        let term = match variant {
            Variant::Basic => {
                l2 * g * g
                    * ((1.0 / k + g) * (2.0 * d + d * l2 * g * g / 6.0)
                        + l2 * g * delta * (1.0 / k + g))
            }
            Variant::Smooth => {
                g.powi(3)
                    * (l4 * delta * (4.0 / (3.0 * k) + g_next)
                        + d * (2.0 * l2
                            + 4.0 / k * (d * lt * lt / 12.0 + g_next * l4 / 4.0)
                            + g_next * g_next * l4 / 6.0))
            }
        };
        theta = theta * (1.0 - k * g / 2.0) + term;
        elapsed += g;
    }
    let horizon = sched.gamma_sum(n + 1, l);
    let first = (theta / (4.0 * PI * horizon)).sqrt();

    let mut prod = sched.contraction_product(k, 1, n)?; // ∏_{1}^{k-1} at k = n+1
    let mut second_sum = 0.0;
    for step in n + 1..=l {
        let g = sched.at(step);
        let rho = inputs.rho_from_product(prod).max(0.0);
        second_sum += g.powi(3) * l2 / 3.0 * rho + d * g * g;
        prod *= 1.0 - k * g;
    }
    let second = 2f64.powf(-1.5) * lip * second_sum.sqrt();

    let name = match variant {
        Variant::Basic => "tv_discretization_basic",
        Variant::Smooth => "tv_discretization_smooth",
    };
    Ok(BoundReport::tv(name, first + second)
        .with("theta", theta)
        .with("gamma_sum", horizon)
        .with("first_term", first)
        .with("second_sum", second_sum)
        .with("second_term", second)
        .with("rho_n0", rho0))
}

fn d1(c: &ConvexityConstants, d: f64, g: f64) -> f64 {
    let l2 = c.l * c.l;
    2.0 * l2 / c.kappa * (1.0 / c.kappa + g) * (2.0 * d + l2 * g * g / 6.0)
}

fn d2(c: &ConvexityConstants, g: f64) -> f64 {
    c.l.powi(4) * (1.0 / c.kappa + g)
}

/// TV between `δ_x R_γ^ℓ` and the diffusion at time `ℓγ` for a constant
/// step, with the split `n = ℓ - ⌈1/γ⌉`.
pub fn tv_fixed_step_finite(inputs: &BoundInputs, gamma: f64, l: usize) -> Result<BoundReport> {
    let c = &inputs.constants;
    check_cap(gamma, c.discretization_step_cap(), "1/(m+L)")?;
    let ceil = (1.0 / gamma).ceil() as usize;
    if l <= ceil {
        return Err(invalid(format!("need l > ceil(1/gamma) = {ceil}, got {l}")));
    }
    let (d, s, k) = (inputs.d(), inputs.start_dist2, c.kappa);
    let gap = (l - ceil) as f64;
    let d1v = d1(c, d, gamma);
    let d2v = d2(c, gamma);
    let d3v = gap * (-c.m * gamma * (gap - 1.0)).exp() * s + 2.0 * d / (k * gamma * c.m);
    let inner = d * gamma * (1.0 + gamma)
        + c.l * c.l * gamma.powi(3) / 3.0
            * ((1.0 + 1.0 / gamma) * (1.0 - k * gamma).max(0.0).powf(gap) * s
                + 2.0 * (1.0 + gamma) * d / k);
    let d4v = 2f64.powf(-1.5) * c.l * inner.sqrt();
    let raw = (gamma * d1v + gamma.powi(3) * d2v * d3v).sqrt() / (4.0 * PI).sqrt() + d4v;
    Ok(BoundReport::tv("tv_fixed_step_finite", raw)
        .with("D1", d1v)
        .with("D2", d2v)
        .with("D3", d3v)
        .with("D4", d4v))
}

/// `n(γ) = ⌈log(γ⁻¹)/log 2⌉`, floored at zero.
pub fn n_gamma(gamma: f64) -> f64 {
    (-gamma.log2()).ceil().max(0.0)
}

/// Bound on `‖π - π_γ‖_TV` for the constant-step chain.
pub fn tv_bias(c: &ConvexityConstants, d: usize, gamma: f64, variant: Variant) -> Result<BoundReport> {
    check_cap(gamma, c.discretization_step_cap(), "1/(m+L)")?;
    let d = d as f64;
    let (lip, k, m, g) = (c.l, c.kappa, c.m, gamma);
    let (l2, l4) = (lip * lip, lip.powi(4));
    let inv_sqrt_4pi = 1.0 / (4.0 * PI).sqrt();
    match variant {
        Variant::Basic => {
            let first = 2f64.powf(-1.5)
                * lip
                * (d * g * (1.0 + g) + 2.0 * (l2 * g.powi(3) / 3.0) * (1.0 + g) * d / k).sqrt();
            let d1v = d1(c, d, g);
            let d2v = d2(c, g);
            let second = inv_sqrt_4pi * (g * d1v + 2.0 * d * g * g * d2v / (k * m)).sqrt();
            Ok(BoundReport::tv("tv_bias_basic", first + second)
                .with("D1", d1v)
                .with("D2", d2v)
                .with("first_term", first)
                .with("second_term", second))
        }
        Variant::Smooth => {
            let lt = require_l_tilde(c, "smooth TV bias bound")?;
            let e1 = 2.0 * d / k
                * (2.0 * l2 + 4.0 / k * (d * lt * lt / 12.0 + g * l4 / 4.0) + g * g * l4 / 6.0);
            let e2 = l4 * (4.0 / (3.0 * k) + g);
            let ng = n_gamma(g);
            let first = inv_sqrt_4pi * (g * g * e1 + 2.0 * d * g * g * e2 / (k * m)).sqrt();
            let second = inv_sqrt_4pi * ng * (g * g * e1 + g * g * e2 * (2.0 * d / k + d / m)).sqrt();
            let third = 2f64.powf(-1.5) * lip * (2.0 * d * g.powi(3) * l2 / (3.0 * k) + d * g * g).sqrt();
            Ok(BoundReport::tv("tv_bias_smooth", first + second + third)
                .with("E1", e1)
                .with("E2", e2)
                .with("n_gamma", ng)
                .with("first_term", first)
                .with("second_term", second)
                .with("third_term", third))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal::cdf;
    use crate::schedules::StepSchedule;

    fn consts(m: f64, l: f64) -> ConvexityConstants {
        ConvexityConstants::new(m, l, Some(0.0)).unwrap()
    }

    fn inputs(m: f64, l: f64, d: usize, gamma: f64, s: f64) -> BoundInputs {
        BoundInputs::new(consts(m, l), d, StepSchedule::constant(gamma).unwrap(), s).unwrap()
    }

    #[test]
    fn semigroup_examples() {
        let c = consts(1.0, 1.0);
        let t = 2f64.ln() / 2.0;
        assert!((chi_m(1.0, t) - 2.0).abs() < 1e-15);
        assert_eq!(tv_semigroup(&c, 1, SemigroupBranch::Points { distance: 0.0 }, t).unwrap(), 0.0);
        let v = tv_semigroup(&c, 1, SemigroupBranch::Points { distance: 2.0 }, t).unwrap();
        assert!((v - (1.0 - 2.0 * cdf(-1.0))).abs() < 1e-14);
        assert!((v - 0.682_689).abs() < 1e-6);
        let v = tv_semigroup(&c, 1, SemigroupBranch::Target { start_dist: 0.0 }, 1.0).unwrap();
        let oracle = 1.0 / (2.0 * PI * (1f64.exp().powi(2) - 1.0)).sqrt();
        assert!((v - oracle).abs() < 1e-14);
        assert!((v - 0.157_83).abs() < 1e-5);
        let v = tv_semigroup(&c, 1, SemigroupBranch::Wasserstein { w1: 0.5 }, 1.0).unwrap();
        assert!((v - 0.5 * oracle).abs() < 1e-14);
        assert!(tv_semigroup(&c, 1, SemigroupBranch::Points { distance: 1.0 }, 0.0).is_err());
    }

    #[test]
    fn lambda_examples() {
        let b = inputs(1.0, 1.0, 1, 0.1, 0.0);
        assert!((lambda(&b, 1, 1).unwrap() - (1.0 / 0.9 - 1.0)).abs() < 1e-15);
        assert_eq!(lambda(&b, 3, 2).unwrap(), 0.0);
        let b = inputs(0.5, 0.5, 1, 0.2, 0.0);
        let oracle = 2.0 * (0.9f64.powi(-3) - 1.0);
        assert!((lambda(&b, 1, 3).unwrap() - oracle).abs() < 1e-14);
        assert!((oracle - 0.74348).abs() < 1e-5);
        let b = inputs(1.0, 1.0, 1, 1.0, 0.0);
        assert!(lambda(&b, 1, 2).is_err());
    }

    #[test]
    fn kernel_examples() {
        let b = inputs(1.0, 1.0, 1, 0.1, 0.0);
        assert_eq!(tv_kernel_contraction(&b, 0.0, 1, 1).unwrap(), 0.0);
        let v = tv_kernel_contraction(&b, 1.0, 1, 1).unwrap();
        let oracle = 1.0 - 2.0 * cdf(-1.0 / (8.0 * (1.0_f64 / 0.9 - 1.0)).sqrt());
        assert!((v - oracle).abs() < 1e-14);
        assert!((v - 0.71115).abs() < 1e-5);
        let far = tv_kernel_stationary(&b, 0.1, 2000).unwrap();
        assert!(far < 1e-40);
        assert_eq!(tv_kernel_stationary(&b, 0.1, 0).unwrap(), 1.0);
    }

    #[test]
    fn discretization_two_step_oracle() {
        let b = inputs(1.0, 1.0, 1, 0.1, 0.0);
        let r = tv_discretization(&b, 2, 1, Variant::Basic).unwrap();
        // ϱ_{1,0} = 0, so δ_1 = 0 and ϑ has a single term.
        let theta = 0.01 * 1.1 * (2.0 + 0.01 / 6.0);
        let first = (theta / (4.0 * PI * 0.1)).sqrt();
        let rho11: f64 = 2.0 * (1.0 - 0.9);
        let second = (0.001 / 3.0 * rho11 + 0.01).sqrt() / 8f64.sqrt();
        assert!((r.get("theta").unwrap() - theta).abs() < 1e-16);
        assert!((r.value - (first + second)).abs() < 1e-15);
        assert!(!r.clamped);
    }

    #[test]
    fn discretization_vanishes_with_steps() {
        let mut prev = f64::INFINITY;
        for e in 2..12 {
            let g = 10f64.powi(-e);
            let b = inputs(1.0, 1.0, 1, g, 0.0);
            let v = tv_discretization(&b, 2, 1, Variant::Smooth).unwrap().value;
            assert!(v < prev);
            prev = v;
        }
        assert!(prev < 1e-5);
    }

    #[test]
    fn discretization_argument_checks() {
        let b = inputs(1.0, 1.0, 1, 0.1, 0.0);
        assert!(tv_discretization(&b, 3, 3, Variant::Basic).is_err());
        assert!(tv_discretization(&b, 3, 0, Variant::Basic).is_err());
        let no_lt = BoundInputs::new(ConvexityConstants::new(1.0, 1.0, None).unwrap(), 1, b.schedule, 0.0).unwrap();
        assert!(tv_discretization(&no_lt, 3, 1, Variant::Smooth).is_err());
    }

    #[test]
    fn smooth_drops_l_tilde_term_when_zero() {
        // With L̃ = 0 the smooth ϑ does not depend on d through L̃.
        let c0 = ConvexityConstants::new(1.0, 1.0, Some(0.0)).unwrap();
        let c1 = ConvexityConstants::new(1.0, 1.0, Some(1.0)).unwrap();
        let s = StepSchedule::constant(0.1).unwrap();
        let b0 = BoundInputs::new(c0, 2, s, 0.0).unwrap();
        let b1 = BoundInputs::new(c1, 2, s, 0.0).unwrap();
        let t0 = tv_discretization(&b0, 5, 2, Variant::Smooth).unwrap().get("theta").unwrap();
        let t1 = tv_discretization(&b1, 5, 2, Variant::Smooth).unwrap().get("theta").unwrap();
        let g: f64 = 0.1;
        // The L̃ term: Σ_i γ³ ∏ · d · 4κ⁻¹ dL̃²/12.
        let extra = (g.powi(3) * (1.0 - g / 2.0) + g.powi(3)) * 2.0 * 4.0 * 2.0 / 12.0;
        assert!((t1 - t0 - extra).abs() < 1e-15);
    }

    #[test]
    fn fixed_step_constants() {
        let b = inputs(1.0, 1.0, 1, 0.1, 0.0);
        let r = tv_fixed_step_finite(&b, 0.1, 100).unwrap();
        assert!((r.get("D1").unwrap() - 2.0 * 1.1 * (2.0 + 0.01 / 6.0)).abs() < 1e-14);
        assert!((r.get("D2").unwrap() - 1.1).abs() < 1e-15);
        assert!((r.get("D3").unwrap() - 2.0 / 0.1).abs() < 1e-12);
        let d4 = (0.1f64 * 1.1 + 0.001 / 3.0 * 2.0 * 1.1).sqrt() / 8f64.sqrt();
        assert!((r.get("D4").unwrap() - d4).abs() < 1e-15);
        let raw = (0.1 * r.get("D1").unwrap() + 1e-3 * 1.1 * 20.0).sqrt() / (4.0 * PI).sqrt() + d4;
        assert!((r.get("raw").unwrap() - raw).abs() < 1e-14);
        assert!(tv_fixed_step_finite(&b, 0.1, 10).is_err());
    }

    #[test]
    fn bias_constants() {
        assert_eq!(n_gamma(0.1), 4.0);
        assert_eq!(n_gamma(0.5), 1.0);
        assert_eq!(n_gamma(0.25), 2.0);
        let c = consts(1.0, 1.0);
        let r = tv_bias(&c, 1, 0.1, Variant::Smooth).unwrap();
        assert!((r.get("E1").unwrap() - 4.203_333_333_333_333).abs() < 1e-12);
        assert!((r.get("E2").unwrap() - 1.433_333_333_333_333).abs() < 1e-12);
        assert_eq!(r.get("n_gamma"), Some(4.0));
        let (e1, e2) = (r.get("E1").unwrap(), r.get("E2").unwrap());
        let g = 0.1f64;
        let oracle = (g * g * e1 + 2.0 * g * g * e2).sqrt() / (4.0 * PI).sqrt()
            + 4.0 * (g * g * e1 + g * g * e2 * 3.0).sqrt() / (4.0 * PI).sqrt()
            + (2.0 * g.powi(3) / 3.0 + g * g).sqrt() / 8f64.sqrt();
        assert!((r.get("raw").unwrap() - oracle).abs() < 1e-14);
    }

    #[test]
    fn basic_bias_leading_term_scales_with_sqrt_d() {
        let c = consts(1.0, 1.0);
        let a = tv_bias(&c, 3, 0.05, Variant::Basic).unwrap();
        let b = tv_bias(&c, 6, 0.05, Variant::Basic).unwrap();
        let ratio = b.get("first_term").unwrap() / a.get("first_term").unwrap();
        assert!((ratio - 2f64.sqrt()).abs() < 1e-14);
        let total = b.get("raw").unwrap() / a.get("raw").unwrap();
        assert!((total - 2f64.sqrt()).abs() < 1e-2);
    }
}
