//! Maximal reflection coupling for Gaussian functional autoregressive chains
//! `X_{k+1} = h_{k+1}(X_k) + σ_{k+1} Z_{k+1}`.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::normal::one_minus_two_cdf_neg;
use crate::potentials::{dot, Potential};
use crate::rng::{fill_standard_normal, stream_rng};
use crate::schedules::StepSchedule;

/// `h_k(x)` written into the output slice; `k` starts at 1.
pub type ArMap = dyn Fn(usize, &[f64], &mut [f64]) + Send + Sync;

/// An inhomogeneous AR chain over a finite horizon: maps `h_k` that are
/// `(1-ϖ_k)`-Lipschitz and noise scales `σ_k`, for `k = 1..=horizon`.
pub struct ArCouplingSpec {
    dim: usize,
    map: Box<ArMap>,
    deficits: Vec<f64>,
    noise_scales: Vec<f64>,
}

impl std::fmt::Debug for ArCouplingSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ArCouplingSpec")
            .field("dim", &self.dim)
            .field("horizon", &self.horizon())
            .finish_non_exhaustive()
    }
}

impl ArCouplingSpec {
    pub fn new(dim: usize, map: Box<ArMap>, deficits: Vec<f64>, noise_scales: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if deficits.len() != noise_scales.len() {
            return Err(invalid(format!(
                "{} deficits for {} noise scales",
                deficits.len(),
                noise_scales.len()
            )));
        }
        if let Some(s) = noise_scales.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(invalid(format!("noise scales must be positive, got {s}")));
        }
        if let Some(w) = deficits.iter().find(|w| !(w.is_finite() && **w <= 1.0)) {
            return Err(invalid(format!("maps must be nonexpansive (deficit <= 1), got {w}")));
        }
        Ok(ArCouplingSpec {
            dim,
            map,
            deficits,
            noise_scales,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> usize {
        self.deficits.len()
    }

    fn check_index(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.horizon() {
            return Err(crate::error::Error::Index(format!(
                "step {k} outside 1..={}",
                self.horizon()
            )));
        }
        Ok(())
    }

    pub fn deficit(&self, k: usize) -> Result<f64> {
        self.check_index(k)?;
        Ok(self.deficits[k - 1])
    }

    pub fn noise_scale(&self, k: usize) -> Result<f64> {
        self.check_index(k)?;
        Ok(self.noise_scales[k - 1])
    }

    pub fn apply(&self, k: usize, x: &[f64], out: &mut [f64]) {
        (self.map)(k, x, out)
    }
}

/// Outcome of one coupled transition.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledStep {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `y == x` by construction (coalescence or identical images).
    pub coupled: bool,
}

/// One step of the coupling kernel with explicit randomness: `z` is a
/// standard normal vector and `uniform` decides the coalescence attempt.
pub fn coupling_step_with(
    spec: &ArCouplingSpec,
    k: usize,
    x: &[f64],
    y: &[f64],
    z: &[f64],
    uniform: f64,
) -> Result<CoupledStep> {
    let sigma = spec.noise_scale(k)?;
    let d = spec.dim;
    let mut hx = vec![0.0; d];
    let mut hy = vec![0.0; d];
    spec.apply(k, x, &mut hx);
    spec.apply(k, y, &mut hy);
    let w: Vec<f64> = z.iter().map(|zi| sigma * zi).collect();
    let next_x: Vec<f64> = hx.iter().zip(&w).map(|(h, wi)| h + wi).collect();

    let e: Vec<f64> = hy.iter().zip(&hx).map(|(a, b)| a - b).collect();
    let e_norm = dot(&e, &e).sqrt();
    if e_norm == 0.0 {
        // Identical images: shared noise keeps the chains together.
        return Ok(CoupledStep {
            y: next_x.clone(),
            x: next_x,
            coupled: true,
        });
    }
    let dir: Vec<f64> = e.iter().map(|v| v / e_norm).collect();
    let proj = dot(&dir, &w);
    let log_alpha = (proj * proj - (e_norm - proj) * (e_norm - proj)) / (2.0 * sigma * sigma);
    if uniform.ln() < log_alpha {
        return Ok(CoupledStep {
            y: next_x.clone(),
            x: next_x,
            coupled: true,
        });
    }
    let next_y = hy
        .iter()
        .zip(&w)
        .zip(&dir)
        .map(|((h, wi), ei)| h + wi - 2.0 * ei * proj)
        .collect();
    Ok(CoupledStep {
        x: next_x,
        y: next_y,
        coupled: false,
    })
}

/// One step of the coupling kernel drawing from `rng`.
pub fn coupling_step<R: Rng + ?Sized>(
    spec: &ArCouplingSpec,
    k: usize,
    x: &[f64],
    y: &[f64],
    rng: &mut R,
) -> Result<CoupledStep> {
    let mut z = vec![0.0; spec.dim];
    fill_standard_normal(rng, &mut z);
    let u: f64 = rng.gen();
    coupling_step_with(spec, k, x, y, &z, u)
}

/// `Ξ_{k1,k2} = Σ_{i=k1}^{k2} σ_i² ∏_{j=k1}^{i}(1-ϖ_j)⁻²`, zero when `k2 < k1`.
pub fn xi(spec: &ArCouplingSpec, k1: usize, k2: usize) -> Result<f64> {
    if k2 < k1 {
        return Ok(0.0);
    }
    spec.check_index(k1)?;
    spec.check_index(k2)?;
    let mut acc = 0.0;
    let mut growth = 1.0;
    for i in k1..=k2 {
        let w = spec.deficits[i - 1];
        if w >= 1.0 {
            return Err(invalid(format!("deficit at step {i} is {w}; need < 1")));
        }
        growth /= (1.0 - w) * (1.0 - w);
        acc += spec.noise_scales[i - 1].powi(2) * growth;
    }
    Ok(acc)
}

/// `1 - 2Φ(-‖x-y‖/(2Ξ_n^{1/2}))`, and 0 when `x == y`.
pub fn tv_bound_ar(spec: &ArCouplingSpec, x: &[f64], y: &[f64], n: usize) -> Result<f64> {
    let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let dist = dot(&diff, &diff).sqrt();
    let xi_n = xi(spec, 1, n)?;
    if dist == 0.0 {
        return Ok(0.0);
    }
    if xi_n == 0.0 {
        return Ok(1.0);
    }
    Ok(one_minus_two_cdf_neg(dist / (2.0 * xi_n.sqrt())))
}

/// Runs `reps` coupled trajectories of `n` steps from `(x, y)` in parallel
/// and returns the fraction still apart at step `n` with its binomial
/// standard error.
pub fn simulate_uncoupled_fraction(
    spec: &ArCouplingSpec,
    x: &[f64],
    y: &[f64],
    n: usize,
    reps: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    if reps == 0 {
        return Err(invalid("need at least one replica"));
    }
    if x.len() != spec.dim || y.len() != spec.dim {
        return Err(invalid("start points do not match the spec dimension"));
    }
    if n > spec.horizon() {
        return Err(invalid(format!("n = {n} exceeds the spec horizon {}", spec.horizon())));
    }
    let apart = (0..reps)
        .into_par_iter()
        .map(|r| -> Result<u64> {
            let mut rng = stream_rng(seed, r);
            let mut cx = x.to_vec();
            let mut cy = y.to_vec();
            let mut coupled = cx == cy;
            let mut z = vec![0.0; spec.dim];
            let mut buf = vec![0.0; spec.dim];
            for k in 1..=n {
                if coupled {
                    let sigma = spec.noise_scales[k - 1];
                    fill_standard_normal(&mut rng, &mut z);
                    // Keep the draw count aligned with the uncoupled branch.
                    let _: f64 = rng.gen();
                    spec.apply(k, &cx, &mut buf);
                    for i in 0..spec.dim {
                        cx[i] = buf[i] + sigma * z[i];
                    }
                } else {
                    let step = coupling_step(spec, k, &cx, &cy, &mut rng)?;
                    cx = step.x;
                    cy = step.y;
                    coupled = step.coupled;
                }
            }
            Ok(u64::from(!coupled))
        })
        .collect::<Result<Vec<u64>>>()?
        .into_iter()
        .sum::<u64>();
    let p = apart as f64 / reps as f64;
    Ok((p, (p * (1.0 - p) / reps as f64).sqrt()))
}

/// ULA as an AR chain: `h_k(x) = x - γ_k∇U(x)`, `1-ϖ_k = (1-κγ_k)^{1/2}`,
/// `σ_k = (2γ_k)^{1/2}`.
pub fn ula_as_ar_spec(
    potential: Arc<dyn Potential>,
    schedule: StepSchedule,
    horizon: usize,
) -> Result<ArCouplingSpec> {
    let c = potential.constants();
    let cap = c.contraction_step_cap();
    if schedule.first() > cap * (1.0 + 1e-12) {
        return Err(invalid(format!(
            "first step {} exceeds 2/(m+L) = {cap}",
            schedule.first()
        )));
    }
    let deficits = (1..=horizon)
        .map(|k| 1.0 - (1.0 - c.kappa * schedule.at(k)).max(0.0).sqrt())
        .collect();
    let noise_scales = (1..=horizon).map(|k| (2.0 * schedule.at(k)).sqrt()).collect();
    let dim = potential.dim();
    let map = Box::new(move |k: usize, x: &[f64], out: &mut [f64]| {
        let g = schedule.at(k);
        potential.gradient_into(x, out);
        for i in 0..x.len() {
            out[i] = x[i] - g * out[i];
        }
    });
    ArCouplingSpec::new(dim, map, deficits, noise_scales)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal::cdf;
    use crate::potentials::GaussianPotential;

    fn linear_spec(dim: usize, a: f64, sigma: f64, horizon: usize) -> ArCouplingSpec {
        let map = Box::new(move |_: usize, x: &[f64], out: &mut [f64]| {
            for i in 0..x.len() {
                out[i] = a * x[i];
            }
        });
        ArCouplingSpec::new(dim, map, vec![1.0 - a; horizon], vec![sigma; horizon]).unwrap()
    }

    fn gaussian_ula(gamma: f64, horizon: usize) -> ArCouplingSpec {
        let g: Arc<dyn Potential> = Arc::new(GaussianPotential::standard(1).unwrap());
        ula_as_ar_spec(g, StepSchedule::constant(gamma).unwrap(), horizon).unwrap()
    }

    #[test]
    fn equal_points_stay_together() {
        let spec = linear_spec(2, 0.7, 1.0, 3);
        let s = coupling_step_with(&spec, 1, &[1.0, 2.0], &[1.0, 2.0], &[0.3, -0.4], 0.99).unwrap();
        assert!(s.coupled && s.x == s.y);
    }

    #[test]
    fn reflection_is_an_isometry() {
        let spec = linear_spec(3, 1.0, 0.5, 1);
        let x = [0.0, 0.0, 0.0];
        let y = [3.0, -1.0, 2.0];
        let z = [0.2, 1.5, -0.7];
        // A uniform of one never coalesces.
        let s = coupling_step_with(&spec, 1, &x, &y, &z, 1.0).unwrap();
        assert!(!s.coupled);
        let off: f64 = s.y.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let zn = z.iter().map(|v| (0.5 * v).powi(2)).sum::<f64>().sqrt();
        assert!((off - zn).abs() < 1e-14);
    }

    #[test]
    fn coalescence_law() {
        let spec = linear_spec(2, 1.0, 0.5, 1);
        let x = [0.0, 0.0];
        let y = [0.6, 0.8]; // ‖E‖ = 1 = 2σ
        let mut rng = stream_rng(11, 0);
        let trials = 100_000;
        let hits = (0..trials)
            .filter(|_| coupling_step(&spec, 1, &x, &y, &mut rng).unwrap().coupled)
            .count();
        let p = hits as f64 / trials as f64;
        let expected = 2.0 * cdf(-1.0);
        let se = (expected * (1.0 - expected) / trials as f64).sqrt();
        assert!((p - expected).abs() < 3.0 * se, "p = {p}");
    }

    #[test]
    fn xi_examples() {
        let spec = linear_spec(1, 1.0, 1.0, 3);
        assert_eq!(xi(&spec, 3, 2).unwrap(), 0.0);
        assert!((xi(&spec, 1, 3).unwrap() - 3.0).abs() < 1e-15);
        let spec = linear_spec(1, 0.5, 1.0, 2);
        assert!((xi(&spec, 1, 2).unwrap() - 20.0).abs() < 1e-13);
        let spec = linear_spec(1, 0.0, 1.0, 2);
        assert!(xi(&spec, 1, 2).is_err());
    }

    #[test]
    fn tv_bound_examples() {
        let spec = linear_spec(1, 1.0, 1.0, 1);
        assert_eq!(tv_bound_ar(&spec, &[1.0], &[1.0], 1).unwrap(), 0.0);
        let v = tv_bound_ar(&spec, &[0.0], &[2.0], 1).unwrap();
        assert!((v - 0.682_689_492_137_086).abs() < 1e-12);
        let wide = linear_spec(1, 1.0, 1e6, 1);
        assert!(tv_bound_ar(&wide, &[0.0], &[2.0], 1).unwrap() < 1e-5);
    }

    #[test]
    fn equal_starts_never_separate() {
        let spec = gaussian_ula(0.1, 10);
        let (p, se) = simulate_uncoupled_fraction(&spec, &[0.5], &[0.5], 10, 1000, 3).unwrap();
        assert_eq!((p, se), (0.0, 0.0));
    }

    #[test]
    fn ula_spec_on_gaussian() {
        let spec = gaussian_ula(0.1, 5);
        let w = spec.deficit(1).unwrap();
        assert!((w - (1.0 - 0.9f64.sqrt())).abs() < 1e-15);
        assert!((w - 0.05132).abs() < 1e-5);
        assert!(((1.0 - w).powi(2) - 0.9).abs() < 1e-15);
        assert!((spec.noise_scale(3).unwrap() - 0.2f64.sqrt()).abs() < 1e-15);
        let mut out = [0.0];
        spec.apply(1, &[2.0], &mut out);
        assert!((out[0] - 1.8).abs() < 1e-15);
        let g: Arc<dyn Potential> = Arc::new(GaussianPotential::standard(1).unwrap());
        assert!(ula_as_ar_spec(g, StepSchedule::constant(1.5).unwrap(), 2).is_err());
    }

    #[test]
    fn xi_is_twice_lambda_for_constant_ula() {
        use crate::bounds::{lambda, BoundInputs};
        let g = GaussianPotential::standard(1).unwrap();
        let sched = StepSchedule::constant(0.1).unwrap();
        let spec = gaussian_ula(0.1, 20);
        let b = BoundInputs::new(g.constants(), 1, sched, 0.0).unwrap();
        for n in [1, 5, 20] {
            let lam = lambda(&b, 1, n).unwrap();
            assert!((xi(&spec, 1, n).unwrap() - 2.0 * lam).abs() < 1e-12 * lam);
        }
    }

    #[test]
    fn simulation_is_deterministic() {
        let spec = gaussian_ula(0.1, 5);
        let a = simulate_uncoupled_fraction(&spec, &[0.0], &[1.0], 5, 2000, 9).unwrap();
        let b = simulate_uncoupled_fraction(&spec, &[0.0], &[1.0], 5, 2000, 9).unwrap();
        assert_eq!(a, b);
    }
}
