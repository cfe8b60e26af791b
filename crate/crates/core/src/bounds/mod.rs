//! Explicit non-asymptotic bounds for ULA, and a planner that inverts them.
//!
//! W2-type evaluators return squared distances where the underlying result
//! is stated for `W_2²`. TV-type reports are clamped to `[0, 1]`; the raw
//! value is kept under the `raw` intermediate.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::potentials::ConvexityConstants;
use crate::schedules::StepSchedule;

mod planner;
mod tv;
mod w2;

pub use planner::{plan, Plan};
pub use tv::{
    chi_m, lambda, n_gamma, tv_bias, tv_discretization, tv_fixed_step_finite,
    tv_kernel_contraction, tv_kernel_stationary, tv_semigroup, SemigroupBranch,
};
pub use w2::{w2_bias, w2_contraction, w2_discretization, w2_stationary_contraction};

/// Relative slack when comparing a step against its admissibility cap.
const CAP_SLACK: f64 = 1e-12;

/// Which reading of the constant term of the drift bound `ϱ_{n,ℓ}` to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RhoReading {
    /// `2dκ⁻¹{1 - κ⁻¹ ∏(1-κγ_i)}`, as printed.
    #[default]
    Verbatim,
    /// `2dκ⁻¹{1 - ∏(1-κγ_i)}`.
    Corrected,
}

/// Basic bounds need only `m` and `L`; smooth ones also use `l_tilde`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Basic,
    Smooth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    W2,
    Tv,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "basic" => Ok(Variant::Basic),
            "smooth" => Ok(Variant::Smooth),
            other => Err(invalid(format!("unknown variant {other:?}"))),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "w2" => Ok(Metric::W2),
            "tv" => Ok(Metric::Tv),
            other => Err(invalid(format!("unknown metric {other:?}"))),
        }
    }
}

impl std::str::FromStr for RhoReading {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "verbatim" => Ok(RhoReading::Verbatim),
            "corrected" => Ok(RhoReading::Corrected),
            other => Err(invalid(format!("unknown rho reading {other:?}"))),
        }
    }
}

/// Problem data shared by the schedule-dependent bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub constants: ConvexityConstants,
    pub dim: usize,
    pub schedule: StepSchedule,
    /// `‖x - x⋆‖²` for the chain's starting point.
    pub start_dist2: f64,
    #[serde(default)]
    pub rho_reading: RhoReading,
}

impl BoundInputs {
    pub fn new(
        constants: ConvexityConstants,
        dim: usize,
        schedule: StepSchedule,
        start_dist2: f64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if !(start_dist2.is_finite() && start_dist2 >= 0.0) {
            return Err(invalid(format!("start_dist2 must be nonnegative, got {start_dist2}")));
        }
        Ok(BoundInputs {
            constants,
            dim,
            schedule,
            start_dist2,
            rho_reading: RhoReading::Verbatim,
        })
    }

    pub fn with_rho_reading(mut self, reading: RhoReading) -> Self {
        self.rho_reading = reading;
        self
    }

    pub(crate) fn d(&self) -> f64 {
        self.dim as f64
    }

    /// Requires `γ_1 ≤ 2/(m+L)`.
    pub(crate) fn require_contraction(&self) -> Result<()> {
        check_cap(self.schedule.first(), self.constants.contraction_step_cap(), "2/(m+L)")
    }

    /// Requires `γ_1 ≤ 1/(m+L)`.
    pub(crate) fn require_discretization(&self) -> Result<()> {
        check_cap(self.schedule.first(), self.constants.discretization_step_cap(), "1/(m+L)")
    }

    /// Drift bound on `E‖X_ℓ - x⋆‖²` for the chain started at time `n-1`:
    /// `ϱ_{n,ℓ} = ∏(1-κγ_k)‖x-x⋆‖² + 2dκ⁻¹{1 - κ⁻¹∏(1-κγ_i)}`.
    ///
    /// The verbatim reading can be negative when `κ < 1` and the range is
    /// short.
    pub fn drift_rho(&self, n: usize, l: usize) -> Result<f64> {
        self.require_contraction()?;
        let prod = self.schedule.contraction_product(self.constants.kappa, n, l)?;
        Ok(self.rho_from_product(prod))
    }

    pub(crate) fn rho_from_product(&self, prod: f64) -> f64 {
        let k = self.constants.kappa;
        let inner = match self.rho_reading {
            RhoReading::Verbatim => 1.0 - prod / k,
            RhoReading::Corrected => 1.0 - prod,
        };
        prod * self.start_dist2 + 2.0 * self.d() / k * inner
    }
}

pub(crate) fn check_cap(gamma: f64, cap: f64, label: &str) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(invalid(format!("step size must be positive, got {gamma}")));
    }
    if gamma > cap * (1.0 + CAP_SLACK) {
        return Err(invalid(format!("step {gamma} exceeds {label} = {cap}")));
    }
    Ok(())
}

pub(crate) fn require_l_tilde(constants: &ConvexityConstants, what: &'static str) -> Result<f64> {
    constants.l_tilde.ok_or(Error::MissingCapability(what))
}

/// A bound value together with the constants that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub value: f64,
    /// Set when a TV-type raw value exceeded 1 and was clamped.
    pub clamped: bool,
    pub intermediates: BTreeMap<String, f64>,
}

impl BoundReport {
    pub fn new(name: &str, value: f64) -> Self {
        BoundReport {
            name: name.to_string(),
            value,
            clamped: false,
            intermediates: BTreeMap::new(),
        }
    }

    /// TV-type report: clamps into `[0, 1]` and keeps the raw value.
    pub(crate) fn tv(name: &str, raw: f64) -> Self {
        let mut r = BoundReport::new(name, raw.clamp(0.0, 1.0));
        r.clamped = raw > 1.0;
        r.intermediates.insert("raw".into(), raw);
        r
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.intermediates.insert(key.to_string(), value);
        self
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.intermediates.get(key).copied()
    }
}
