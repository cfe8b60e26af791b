//! Strongly convex potentials `U = -log π` and their convexity constants.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Curvature constants of a potential: `m ≤ ∇²U ≤ L`, optional Hessian
/// Lipschitz constant, and the contraction rate `κ = 2mL/(m+L)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexityConstants {
    pub m: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_tilde: Option<f64>,
    pub kappa: f64,
}

impl ConvexityConstants {
    pub fn new(m: f64, l: f64, l_tilde: Option<f64>) -> Result<Self> {
        if !(m.is_finite() && m > 0.0) {
            return Err(invalid(format!("strong convexity modulus must be positive, got {m}")));
        }
        if !(l.is_finite() && l >= m) {
            return Err(invalid(format!("gradient Lipschitz constant {l} must be >= m = {m}")));
        }
        if let Some(lt) = l_tilde {
            if !(lt.is_finite() && lt >= 0.0) {
                return Err(invalid(format!("l_tilde must be nonnegative, got {lt}")));
            }
        }
        Ok(ConvexityConstants {
            m,
            l,
            l_tilde,
            kappa: 2.0 * m * l / (m + l),
        })
    }

    /// `2/(m+L)`: largest step for which the Langevin kernel contracts.
    pub fn contraction_step_cap(&self) -> f64 {
        2.0 / (self.m + self.l)
    }

    /// `1/(m+L)`: largest step covered by the discretization bounds.
    pub fn discretization_step_cap(&self) -> f64 {
        1.0 / (self.m + self.l)
    }
}

/// A differentiable strongly convex potential on `R^d`.
///
/// Implementations are immutable and shared across parallel replicas.
pub trait Potential: Send + Sync {
    fn dim(&self) -> usize;

    /// `U(x)` up to an additive constant.
    fn value(&self, x: &[f64]) -> f64;

    /// Writes `∇U(x)` into `grad`.
    fn gradient_into(&self, x: &[f64], grad: &mut [f64]);

    fn constants(&self) -> ConvexityConstants;

    fn minimizer(&self) -> Option<&[f64]> {
        None
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.gradient_into(x, &mut g);
        g
    }
}

impl<P: Potential + ?Sized> Potential for &P {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn gradient_into(&self, x: &[f64], grad: &mut [f64]) {
        (**self).gradient_into(x, grad)
    }
    fn constants(&self) -> ConvexityConstants {
        (**self).constants()
    }
    fn minimizer(&self) -> Option<&[f64]> {
        (**self).minimizer()
    }
}

impl<P: Potential + ?Sized> Potential for std::sync::Arc<P> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn gradient_into(&self, x: &[f64], grad: &mut [f64]) {
        (**self).gradient_into(x, grad)
    }
    fn constants(&self) -> ConvexityConstants {
        (**self).constants()
    }
    fn minimizer(&self) -> Option<&[f64]> {
        (**self).minimizer()
    }
}

/// Centered Gaussian with diagonal precision: `U(x) = ½ Σ λ_i x_i²`.
#[derive(Debug, Clone)]
pub struct GaussianPotential {
    precision: Vec<f64>,
    zero: Vec<f64>,
    constants: ConvexityConstants,
}

impl GaussianPotential {
    pub fn new(precision_diag: &[f64]) -> Result<Self> {
        if precision_diag.is_empty() {
            return Err(invalid("dimension must be at least 1"));
        }
        if let Some(bad) = precision_diag.iter().find(|&&v| !(v.is_finite() && v > 0.0)) {
            return Err(invalid(format!("precision entries must be positive, got {bad}")));
        }
        let m = precision_diag.iter().cloned().fold(f64::INFINITY, f64::min);
        let l = precision_diag.iter().cloned().fold(0.0, f64::max);
        Ok(GaussianPotential {
            precision: precision_diag.to_vec(),
            zero: vec![0.0; precision_diag.len()],
            constants: ConvexityConstants::new(m, l, Some(0.0))?,
        })
    }

    /// Standard Gaussian on `R^d`.
    pub fn standard(d: usize) -> Result<Self> {
        Self::new(&vec![1.0; d])
    }

    pub fn precision(&self) -> &[f64] {
        &self.precision
    }
}

impl Potential for GaussianPotential {
    fn dim(&self) -> usize {
        self.precision.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * x
            .iter()
            .zip(&self.precision)
            .map(|(xi, li)| li * xi * xi)
            .sum::<f64>()
    }

    fn gradient_into(&self, x: &[f64], grad: &mut [f64]) {
        for ((g, xi), li) in grad.iter_mut().zip(x).zip(&self.precision) {
            *g = li * xi;
        }
    }

    fn constants(&self) -> ConvexityConstants {
        self.constants
    }

    fn minimizer(&self) -> Option<&[f64]> {
        Some(&self.zero)
    }
}

/// Bayesian logistic regression data: `p × d` design, binary labels and a
/// Gaussian prior precision.
#[derive(Debug, Clone)]
pub struct LogisticModel {
    design: DMatrix<f64>,
    labels: Vec<f64>,
    prior_precision: DMatrix<f64>,
}

impl LogisticModel {
    pub fn new(design: DMatrix<f64>, labels: Vec<f64>, prior_precision: DMatrix<f64>) -> Result<Self> {
        let (p, d) = design.shape();
        if p == 0 || d == 0 {
            return Err(invalid("design matrix must be nonempty"));
        }
        if labels.len() != p {
            return Err(invalid(format!("{} labels for {p} observations", labels.len())));
        }
        if labels.iter().any(|&y| y != 0.0 && y != 1.0) {
            return Err(invalid("labels must be 0 or 1"));
        }
        if design.iter().any(|v| !v.is_finite()) {
            return Err(invalid("design matrix has non-finite entries"));
        }
        if prior_precision.shape() != (d, d) {
            return Err(invalid(format!(
                "prior precision is {:?}, expected {d}x{d}",
                prior_precision.shape()
            )));
        }
        let asym = (&prior_precision - prior_precision.transpose()).amax();
        if asym > 1e-10 * prior_precision.amax().max(1.0) {
            return Err(invalid("prior precision must be symmetric"));
        }
        if prior_precision.clone().cholesky().is_none() {
            return Err(invalid("prior precision must be positive definite"));
        }
        Ok(LogisticModel {
            design,
            labels,
            prior_precision,
        })
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn prior_precision(&self) -> &DMatrix<f64> {
        &self.prior_precision
    }

    pub fn observations(&self) -> usize {
        self.design.nrows()
    }

    pub fn dim(&self) -> usize {
        self.design.ncols()
    }
}

/// Eigenvalues of a symmetric matrix, reading the diagonal when it is diagonal.
pub(crate) fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = a.nrows();
    let off_diagonal = (0..n).any(|i| (0..n).any(|j| i != j && a[(i, j)] != 0.0));
    let values: Vec<f64> = if off_diagonal {
        SymmetricEigen::new(a.clone()).eigenvalues.iter().cloned().collect()
    } else {
        a.diagonal().iter().cloned().collect()
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("eigendecomposition produced non-finite values".into()));
    }
    Ok(values)
}

/// `log(1 + e^z)` without overflow.
fn log1p_exp(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Negative log posterior of Bayesian logistic regression, normalized to
/// vanish at its minimizer.
#[derive(Debug, Clone)]
pub struct LogisticPotential {
    model: LogisticModel,
    /// Design rows stored contiguously for the gradient loop.
    rows: Vec<f64>,
    prior_diag: Option<Vec<f64>>,
    constants: ConvexityConstants,
    minimizer: Vec<f64>,
    offset: f64,
}

const MINIMIZER_TOLERANCE: f64 = 1e-8;
const GRADIENT_DESCENT_MAX_ITER: usize = 200_000;

impl LogisticPotential {
    pub fn new(model: LogisticModel) -> Result<Self> {
        let (p, d) = model.design.shape();
        let mut rows = Vec::with_capacity(p * d);
        for i in 0..p {
            rows.extend(model.design.row(i).iter());
        }
        let prior = &model.prior_precision;
        let is_diag = (0..d).all(|i| (0..d).all(|j| i == j || prior[(i, j)] == 0.0));
        let prior_diag = is_diag.then(|| prior.diagonal().iter().cloned().collect());

        let eig = symmetric_eigenvalues(prior)?;
        let lambda_min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        let lambda_max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let data_term = 0.25 * model.design.iter().map(|v| v * v).sum::<f64>();
        let constants = ConvexityConstants::new(lambda_min, data_term + lambda_max, None)?;

        let mut potential = LogisticPotential {
            model,
            rows,
            prior_diag,
            constants,
            minimizer: vec![0.0; d],
            offset: 0.0,
        };
        potential.minimizer = potential.find_minimizer()?;
        potential.offset = potential.raw_value(&potential.minimizer);
        Ok(potential)
    }

    pub fn model(&self) -> &LogisticModel {
        &self.model
    }

    /// Largest eigenvalue of `¼ Σ X_i X_iᵀ + Σ_β^{-1}`'s two pieces, summed.
    /// Tighter than `L`; diagnostic only, never fed into the bounds.
    pub fn operator_norm_lipschitz(&self) -> Result<f64> {
        let gram = self.model.design.transpose() * &self.model.design * 0.25;
        let data = symmetric_eigenvalues(&gram)?.into_iter().fold(0.0, f64::max);
        let prior = symmetric_eigenvalues(&self.model.prior_precision)?
            .into_iter()
            .fold(0.0, f64::max);
        Ok(data + prior)
    }

    fn row(&self, i: usize) -> &[f64] {
        let d = self.model.dim();
        &self.rows[i * d..(i + 1) * d]
    }

    fn raw_value(&self, beta: &[f64]) -> f64 {
        let mut nll = 0.0;
        for (i, &y) in self.model.labels.iter().enumerate() {
            let z = dot(self.row(i), beta);
            nll += log1p_exp(z) - y * z;
        }
        nll + 0.5 * self.prior_quadratic(beta)
    }

    fn prior_quadratic(&self, beta: &[f64]) -> f64 {
        match &self.prior_diag {
            Some(diag) => beta.iter().zip(diag).map(|(b, l)| l * b * b).sum(),
            None => {
                let p = &self.model.prior_precision;
                let d = beta.len();
                let mut acc = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        acc += beta[i] * p[(i, j)] * beta[j];
                    }
                }
                acc
            }
        }
    }

    fn hessian(&self, beta: &[f64]) -> DMatrix<f64> {
        let d = beta.len();
        let mut h = self.model.prior_precision.clone();
        for i in 0..self.model.observations() {
            let row = self.row(i);
            let s = sigmoid(dot(row, beta));
            let w = s * (1.0 - s);
            for a in 0..d {
                for b in 0..d {
                    h[(a, b)] += w * row[a] * row[b];
                }
            }
        }
        h
    }

    /// Gradient descent with step `1/L`; Newton polishing when the problem is
    /// too ill-conditioned for descent to reach the tolerance.
    fn find_minimizer(&self) -> Result<Vec<f64>> {
        let d = self.model.dim();
        let step = 1.0 / self.constants.l;
        let mut beta = vec![0.0; d];
        let mut grad = vec![0.0; d];
        for _ in 0..GRADIENT_DESCENT_MAX_ITER {
            self.gradient_into(&beta, &mut grad);
            if norm(&grad) <= MINIMIZER_TOLERANCE {
                return Ok(beta);
            }
            for (b, g) in beta.iter_mut().zip(&grad) {
                *b -= step * g;
            }
        }
        for _ in 0..100 {
            self.gradient_into(&beta, &mut grad);
            if norm(&grad) <= MINIMIZER_TOLERANCE {
                return Ok(beta);
            }
            let h = self.hessian(&beta);
            let chol = h
                .cholesky()
                .ok_or_else(|| Error::Numeric("posterior Hessian is not positive definite".into()))?;
            let delta = chol.solve(&nalgebra::DVector::from_column_slice(&grad));
            for (b, dl) in beta.iter_mut().zip(delta.iter()) {
                *b -= dl;
            }
        }
        Err(Error::Numeric("posterior mode search did not converge".into()))
    }
}

impl Potential for LogisticPotential {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn value(&self, beta: &[f64]) -> f64 {
        self.raw_value(beta) - self.offset
    }

    fn gradient_into(&self, beta: &[f64], grad: &mut [f64]) {
        let d = beta.len();
        match &self.prior_diag {
            Some(diag) => {
                for ((g, b), l) in grad.iter_mut().zip(beta).zip(diag) {
                    *g = l * b;
                }
            }
            None => {
                let p = &self.model.prior_precision;
                for i in 0..d {
                    grad[i] = (0..d).map(|j| p[(i, j)] * beta[j]).sum();
                }
            }
        }
        for (i, &y) in self.model.labels.iter().enumerate() {
            let row = self.row(i);
            let w = sigmoid(dot(row, beta)) - y;
            for (g, x) in grad.iter_mut().zip(row) {
                *g += w * x;
            }
        }
    }

    fn constants(&self) -> ConvexityConstants {
        self.constants
    }

    fn minimizer(&self) -> Option<&[f64]> {
        Some(&self.minimizer)
    }
}

/// Central finite-difference check of a potential's gradient:
/// `max_i |(U(x+h e_i) - U(x-h e_i))/(2h) - ∂_i U(x)| / (1 + |∂_i U(x)|)`.
pub fn check_gradient<P: Potential + ?Sized>(potential: &P, x: &[f64], step: f64) -> Result<f64> {
    if !(step > 0.0) {
        return Err(invalid(format!("finite-difference step must be positive, got {step}")));
    }
    let grad = potential.gradient(x);
    let mut probe = x.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let up = potential.value(&probe);
        probe[i] = x[i] - step;
        let down = potential.value(&probe);
        probe[i] = x[i];
        let fd = (up - down) / (2.0 * step);
        worst = worst.max((fd - grad[i]).abs() / (1.0 + grad[i].abs()));
    }
    Ok(worst)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
