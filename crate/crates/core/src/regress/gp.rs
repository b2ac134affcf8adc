//! Gaussian-process regression with the sum kernel
//! `k(a, b) = σ₀² + a·b + σ_w² [a = b]`.
//!
//! The dot-product part has the explicit feature map `φ(θ) = (σ₀, θ)`, so the
//! posterior is computed in weight space: with `Φ` the `n × (k+1)` feature
//! matrix and `A = ΦᵀΦ + σ_w² I`,
//!
//! ```text
//! K⁻¹ Y = (Y - Φ w) / σ_w²        where w = A⁻¹ Φᵀ Y
//! μ(θ)  = φᵀ w
//! Σ(θ)  = σ_w² (1 + φᵀ A⁻¹ φ)
//! ```
//!
//! which equals `k(θ,Θ̂)ᵀ K⁻¹ Y` and `k(θ,θ) - k(θ,Θ̂)ᵀ K⁻¹ k(Θ̂,θ)` exactly,
//! but only needs a `(k+1) × (k+1)` factorization and stays accurate when
//! `σ_w²` is tiny and `K` is nearly singular.
//!
//! White noise sits on the diagonal of the training Gram matrix and on
//! `k(θ, θ)`. A query point contributes white covariance to a training point
//! only when the two are bitwise identical.

use std::collections::HashMap;

use super::linalg::{dot, Cholesky, Matrix};
use super::{Dataset, Posterior, RegressError, Surrogate};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    /// `σ₀²`, the constant offset of the dot-product kernel.
    pub sigma0_sq: f64,
    /// `σ_w²`, the white-noise variance.
    pub noise: f64,
}

impl Default for Kernel {
    fn default() -> Self {
        Self { sigma0_sq: 1.0, noise: 0.1 }
    }
}

impl Kernel {
    /// Dot-product part only; the white term depends on point identity.
    pub fn dot_part(&self, a: &[f64], b: &[f64]) -> f64 {
        self.sigma0_sq + dot(a, b)
    }

    fn features(&self, theta: &[f64]) -> Vec<f64> {
        let mut f = Vec::with_capacity(theta.len() + 1);
        f.push(self.sigma0_sq.sqrt());
        f.extend_from_slice(theta);
        f
    }
}

fn bits(theta: &[f64]) -> Vec<u64> {
    theta.iter().map(|x| x.to_bits()).collect()
}

#[derive(Debug, Clone)]
pub struct GpSurrogate {
    kernel: Kernel,
    dim: usize,
    weights: Vec<f64>,
    chol: Cholesky,
    /// Training points by bit pattern: (multiplicity, sum of targets).
    coincident: HashMap<Vec<u64>, (usize, f64)>,
    train_size: usize,
}

pub fn fit(data: &Dataset, kernel: &Kernel) -> Result<GpSurrogate, RegressError> {
    if !(kernel.noise > 0.0 && kernel.noise.is_finite()) {
        return Err(RegressError::InvalidConfig(format!("white-noise variance {} must be > 0", kernel.noise)));
    }
    if !(kernel.sigma0_sq >= 0.0 && kernel.sigma0_sq.is_finite()) {
        return Err(RegressError::InvalidConfig(format!("sigma0^2 = {} must be >= 0", kernel.sigma0_sq)));
    }
    let rows: Vec<Vec<f64>> = data.thetas().iter().map(|t| kernel.features(t)).collect();
    let phi = Matrix::from_rows(&rows);
    let mut a = phi.gram();
    a.add_diagonal(kernel.noise);
    let chol = Cholesky::new(&a).ok_or(RegressError::SingularKernel)?;
    let weights = chol.solve(&phi.transpose_mul_vec(data.rhos()));
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(RegressError::SingularKernel);
    }
    let mut coincident: HashMap<Vec<u64>, (usize, f64)> = HashMap::new();
    for (t, y) in data.thetas().iter().zip(data.rhos()) {
        let e = coincident.entry(bits(t)).or_default();
        e.0 += 1;
        e.1 += y;
    }
    Ok(GpSurrogate { kernel: *kernel, dim: data.dim(), weights, chol, coincident, train_size: data.len() })
}

impl GpSurrogate {
    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn train_size(&self) -> usize {
        self.train_size
    }

    /// Posterior mean weights on the features `(σ₀, θ)`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn coincidence(&self, theta: &[f64]) -> (usize, f64) {
        self.coincident.get(&bits(theta)).copied().unwrap_or((0, 0.0))
    }

    /// Posterior mean and variance at `theta`.
    pub fn mean_var(&self, theta: &[f64]) -> (f64, f64) {
        let f = self.kernel.features(theta);
        let linear = dot(&f, &self.weights);
        let q = self.chol.inv_quad(&f);
        let noise = self.kernel.noise;
        match self.coincidence(theta) {
            (0, _) => (linear, noise * (1.0 + q)),
            (j, sum_y) => {
                let jf = j as f64;
                let mean = linear * (1.0 - jf) + sum_y;
                let var = noise * (1.0 - jf) * (1.0 + q * (1.0 - jf));
                (mean, var.max(0.0))
            }
        }
    }
}

impl Surrogate for GpSurrogate {
    fn predict(&self, theta: &[f64]) -> f64 {
        self.mean_var(theta).0
    }
}

impl Posterior for GpSurrogate {
    fn stddev(&self, theta: &[f64]) -> f64 {
        self.mean_var(theta).1.max(0.0).sqrt()
    }
}
