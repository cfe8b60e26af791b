//! Step-size sequences and the partial sums / products the bounds consume.
//!
//! Steps are indexed from 1: the chain update `X_{k} -> X_{k+1}` uses
//! `gamma(k + 1)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Shape of the step sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StepKind {
    /// `γ_k = gamma`.
    Constant { gamma: f64 },
    /// `γ_k = gamma1 · k^{-alpha}`, `alpha ∈ (0, 1]`.
    #[serde(rename = "poly")]
    Polynomial { gamma1: f64, alpha: f64 },
}

/// A positive nonincreasing step sequence, optionally capped at its first term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule", into = "RawSchedule")]
pub struct StepSchedule {
    kind: StepKind,
    cap: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawSchedule {
    #[serde(flatten)]
    kind: StepKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cap: Option<f64>,
}

impl TryFrom<RawSchedule> for StepSchedule {
    type Error = Error;

    fn try_from(raw: RawSchedule) -> Result<Self> {
        let schedule = StepSchedule::from_kind(raw.kind)?;
        match raw.cap {
            Some(cap) => schedule.with_cap(cap),
            None => Ok(schedule),
        }
    }
}

impl From<StepSchedule> for RawSchedule {
    fn from(s: StepSchedule) -> Self {
        RawSchedule {
            kind: s.kind,
            cap: s.cap,
        }
    }
}

/// Factors below this are accumulated in log space.
const LOG_SPACE_THRESHOLD: f64 = 1e-3;

impl StepSchedule {
    pub fn constant(gamma: f64) -> Result<Self> {
        Self::from_kind(StepKind::Constant { gamma })
    }

    pub fn polynomial(gamma1: f64, alpha: f64) -> Result<Self> {
        Self::from_kind(StepKind::Polynomial { gamma1, alpha })
    }

    pub fn from_kind(kind: StepKind) -> Result<Self> {
        match kind {
            StepKind::Constant { gamma } => {
                if !(gamma.is_finite() && gamma > 0.0) {
                    return Err(invalid(format!("step size must be positive, got {gamma}")));
                }
            }
            StepKind::Polynomial { gamma1, alpha } => {
                if !(gamma1.is_finite() && gamma1 > 0.0) {
                    return Err(invalid(format!("gamma1 must be positive, got {gamma1}")));
                }
                if !(alpha > 0.0 && alpha <= 1.0) {
                    return Err(invalid(format!("alpha must lie in (0, 1], got {alpha}")));
                }
            }
        }
        Ok(StepSchedule { kind, cap: None })
    }

    /// Attach an admissibility cap; fails if the first step already exceeds it.
    pub fn with_cap(self, cap: f64) -> Result<Self> {
        if !(cap > 0.0) {
            return Err(invalid(format!("cap must be positive, got {cap}")));
        }
        if self.first() > cap {
            return Err(invalid(format!(
                "first step {} exceeds the cap {cap}",
                self.first()
            )));
        }
        Ok(StepSchedule {
            cap: Some(cap),
            ..self
        })
    }

    pub fn kind(&self) -> StepKind {
        self.kind
    }

    pub fn cap(&self) -> Option<f64> {
        self.cap
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, StepKind::Constant { .. })
    }

    /// `γ_1`, the largest step of the sequence.
    pub fn first(&self) -> f64 {
        self.at(1)
    }

    /// `γ_k` for `k >= 1`.
    pub fn gamma(&self, k: usize) -> Result<f64> {
        if k == 0 {
            return Err(Error::Index("step indices start at 1".into()));
        }
        Ok(self.at(k))
    }

    /// Unchecked `γ_k`; `k = 0` is treated as `k = 1`.
    pub(crate) fn at(&self, k: usize) -> f64 {
        match self.kind {
            StepKind::Constant { gamma } => gamma,
            StepKind::Polynomial { gamma1, alpha } => gamma1 * (k.max(1) as f64).powf(-alpha),
        }
    }

    /// `Γ_{n,ℓ} = Σ_{k=n}^{ℓ} γ_k`, zero when `ℓ < n`.
    ///
    /// # Panics
    /// If `n == 0`.
    pub fn gamma_sum(&self, n: usize, l: usize) -> f64 {
        assert!(n >= 1, "step indices start at 1");
        if l < n {
            return 0.0;
        }
        match self.kind {
            StepKind::Constant { gamma } => gamma * (l - n + 1) as f64,
            StepKind::Polynomial { .. } => pairwise_sum(n, l, &|k| self.at(k)),
        }
    }

    /// `∏_{k=n}^{ℓ} (1 - rate·γ_k)`, one when `ℓ < n`.
    pub fn contraction_product(&self, rate: f64, n: usize, l: usize) -> Result<f64> {
        let n = n.max(1);
        if l < n {
            return Ok(1.0);
        }
        // Steps are nonincreasing, so the first factor is the smallest.
        let smallest = 1.0 - rate * self.at(n);
        if smallest < 0.0 {
            return Err(invalid(format!(
                "factor 1 - {rate}·γ_{n} = {smallest} is negative; step too large for the rate"
            )));
        }
        if smallest == 0.0 {
            return Ok(0.0);
        }
        match self.kind {
            StepKind::Constant { gamma } => Ok((1.0 - rate * gamma).powf((l - n + 1) as f64)),
            StepKind::Polynomial { .. } => {
                if smallest < LOG_SPACE_THRESHOLD || l - n >= 64 {
                    Ok(self.log_contraction_product(rate, n, l).exp())
                } else {
                    Ok((n..=l).map(|k| 1.0 - rate * self.at(k)).product())
                }
            }
        }
    }

    /// `Σ_{k=n}^{ℓ} ln(1 - rate·γ_k)`; callers ensure every factor is positive.
    pub(crate) fn log_contraction_product(&self, rate: f64, n: usize, l: usize) -> f64 {
        let n = n.max(1);
        if l < n {
            return 0.0;
        }
        match self.kind {
            StepKind::Constant { gamma } => (l - n + 1) as f64 * (-rate * gamma).ln_1p(),
            StepKind::Polynomial { .. } => pairwise_sum(n, l, &|k| (-rate * self.at(k)).ln_1p()),
        }
    }

    /// Prefix table of `ln(1 - rate·γ_k)` for `k = 1..=horizon`.
    pub(crate) fn log_product_table(&self, rate: f64, horizon: usize) -> LogProductTable {
        let mut prefix = Vec::with_capacity(horizon + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        let mut comp = 0.0;
        for k in 1..=horizon {
            // Kahan keeps the long prefix sums honest.
            let y = (-rate * self.at(k)).ln_1p() - comp;
            let t = acc + y;
            comp = (t - acc) - y;
            acc = t;
            prefix.push(acc);
        }
        LogProductTable { prefix }
    }
}

/// Range queries on `Σ ln(1 - rate·γ_k)` in O(1).
pub(crate) struct LogProductTable {
    prefix: Vec<f64>,
}

impl LogProductTable {
    /// `ln ∏_{k=n}^{ℓ}(1 - rate·γ_k)`, zero for an empty range.
    pub(crate) fn log_product(&self, n: usize, l: usize) -> f64 {
        let n = n.max(1);
        if l < n {
            0.0
        } else {
            self.prefix[l] - self.prefix[n - 1]
        }
    }
}

fn pairwise_sum(lo: usize, hi: usize, f: &dyn Fn(usize) -> f64) -> f64 {
    if hi - lo < 128 {
        return (lo..=hi).map(f).sum();
    }
    let mid = lo + (hi - lo) / 2;
    pairwise_sum(lo, mid, f) + pairwise_sum(mid + 1, hi, f)
}
