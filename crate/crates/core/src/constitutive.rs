//! Pointwise constitutive densities: inelastic strain Ξ, degraded stiffness
//! 𝕂(χ), coupling H, damage regularization J, plastic regularization G and
//! the 1-homogeneous dissipation rate.
//!
//! Indicator terms evaluate to `f64::INFINITY`; finite values are never used
//! as a stand-in for an infinite penalty.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::{ConvexSetK, SubspaceS, SymTensor2, Tensor4};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConstitutiveError {
    #[error("damage value {0} outside [0, 1]")]
    ChiOutOfRange(f64),
}

/// Lower-order damage potential W₁ added to J.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum W1Variant {
    /// (β/α)(1−χ)²
    Inhibit,
    /// (β/α)χ²(1−χ)²
    #[default]
    DoubleWell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialParams {
    pub lame_lambda: f64,
    pub lame_mu: f64,
    /// Residual stiffness fraction; 𝕂(χ) = (k_min + (1−k_min)χ²)·𝕂₀.
    pub k_min: f64,
    /// Cohesion energy density in H.
    pub w: f64,
    /// Weight of the damage gradient term.
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub w1_variant: W1Variant,
    /// Plastic dissipation coefficient μ.
    pub mu_diss: f64,
    /// Damage dissipation coefficient ν.
    pub nu_diss: f64,
    /// Exponent of the plastic-strain gradient term.
    #[serde(default = "default_q")]
    pub q: f64,
    /// Weight in front of (|D|²−1)².
    #[serde(default = "default_quartic_weight")]
    pub quartic_weight: f64,
    #[serde(default)]
    pub subspace: SubspaceS,
    #[serde(default)]
    pub k_set: ConvexSetK,
}

fn default_q() -> f64 {
    2.0
}

fn default_quartic_weight() -> f64 {
    1.0
}

/// Upper end of the admissible window for q, from the quartic growth of G.
pub const Q1: f64 = 4.0;

/// Exponent of the damage gradient term.
pub const R_EXPONENT: f64 = 2.0;

impl MaterialParams {
    /// Assumption violations for spatial dimension `dim`; empty if admissible.
    pub fn violations(&self, dim: usize) -> Vec<String> {
        let mut v = Vec::new();
        let q_lo = 2.0 * dim as f64 / (dim as f64 + 2.0);
        if !(self.q >= q_lo && self.q <= Q1) {
            v.push(format!(
                "plastic gradient exponent q = {} violates the growth condition 2d/(d+2) = {:.4} <= q <= q1 = {}",
                self.q, q_lo, Q1
            ));
        }
        if !(self.k_min > 0.0 && self.k_min <= 1.0) {
            v.push(format!(
                "k_min = {} must lie in (0, 1]: the stiffness must stay uniformly positive definite (degenerate stiffness is not supported)",
                self.k_min
            ));
        }
        if !(self.lame_mu > 0.0) {
            v.push(format!("lame_mu = {} must be > 0 for positive definite stiffness", self.lame_mu));
        }
        if !(dim as f64 * self.lame_lambda + 2.0 * self.lame_mu > 0.0) {
            v.push(format!(
                "d*lame_lambda + 2*lame_mu = {} must be > 0 for positive definite stiffness",
                dim as f64 * self.lame_lambda + 2.0 * self.lame_mu
            ));
        }
        for (name, val) in [("mu_diss", self.mu_diss), ("nu_diss", self.nu_diss), ("w", self.w), ("alpha", self.alpha)] {
            if !(val > 0.0) {
                v.push(format!("{name} = {val} must be > 0"));
            }
        }
        if !(self.beta >= 0.0) {
            v.push(format!("beta = {} must be >= 0", self.beta));
        }
        if !(self.quartic_weight > 0.0) {
            v.push(format!("quartic_weight = {} must be > 0 (G must control |D|^q1 from below)", self.quartic_weight));
        }
        if let ConvexSetK::FrobeniusBall { radius } = self.k_set {
            if !(radius > 0.0) {
                v.push(format!("K ball radius {radius} must be > 0"));
            }
        }
        v
    }
}

fn check_chi(chi: f64) -> Result<(), ConstitutiveError> {
    if (0.0..=1.0).contains(&chi) {
        Ok(())
    } else {
        Err(ConstitutiveError::ChiOutOfRange(chi))
    }
}

/// Derivatives of Ξ(χ, D) = (1−χ)D.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiPartials {
    /// ∂Ξ/∂χ = −D
    pub d_chi: SymTensor2,
    /// ∂Ξ/∂D acts as A ↦ factor·A with factor = 1−χ.
    pub d_d_factor: f64,
}

impl XiPartials {
    pub fn apply_d_d(&self, a: &SymTensor2) -> SymTensor2 {
        a.scale(self.d_d_factor)
    }
}

/// Pointwise values entering the free energy density.
#[derive(Debug, Clone, PartialEq)]
pub struct PointState {
    pub chi: f64,
    pub d_tensor: SymTensor2,
    pub grad_chi: Vec<f64>,
    /// ∂ₖD for k = 0..dim.
    pub grad_d: Vec<SymTensor2>,
}

/// Material model for a fixed spatial dimension.
#[derive(Debug, Clone)]
pub struct Material {
    params: MaterialParams,
    dim: usize,
    base: Tensor4,
}

impl Material {
    pub fn new(params: MaterialParams, dim: usize) -> Self {
        let base = Tensor4::isotropic(dim, params.lame_lambda, params.lame_mu);
        Self { params, dim, base }
    }

    pub fn params(&self) -> &MaterialParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn base_stiffness(&self) -> &Tensor4 {
        &self.base
    }

    /// Lower eigenvalue bound K₁ of 𝕂(χ) over χ ∈ [0, 1].
    pub fn k1(&self) -> f64 {
        let p = &self.params;
        let vol = self.dim as f64 * p.lame_lambda + 2.0 * p.lame_mu;
        let dev = 2.0 * p.lame_mu;
        // d = 1 has no deviatoric direction
        let lo = if self.dim == 1 { vol } else { vol.min(dev) };
        p.k_min * lo
    }

    /// Upper eigenvalue bound K₂ of 𝕂(χ) over χ ∈ [0, 1].
    pub fn k2(&self) -> f64 {
        let p = &self.params;
        let vol = self.dim as f64 * p.lame_lambda + 2.0 * p.lame_mu;
        if self.dim == 1 {
            vol
        } else {
            vol.max(2.0 * p.lame_mu)
        }
    }

    /// Stiffness degradation g(χ) = k_min + (1−k_min)χ².
    #[inline]
    pub fn degradation(&self, chi: f64) -> f64 {
        self.params.k_min + (1.0 - self.params.k_min) * chi * chi
    }

    #[inline]
    pub fn degradation_prime(&self, chi: f64) -> f64 {
        2.0 * (1.0 - self.params.k_min) * chi
    }

    pub fn eval_xi(&self, chi: f64, d: &SymTensor2) -> Result<SymTensor2, ConstitutiveError> {
        check_chi(chi)?;
        Ok(xi(chi, d))
    }

    pub fn xi_partials(&self, chi: f64, d: &SymTensor2) -> Result<XiPartials, ConstitutiveError> {
        check_chi(chi)?;
        Ok(XiPartials { d_chi: -*d, d_d_factor: 1.0 - chi })
    }

    pub fn eval_stiffness(&self, chi: f64) -> Result<Tensor4, ConstitutiveError> {
        check_chi(chi)?;
        Ok(self.base.scale(self.degradation(chi)))
    }

    pub fn eval_h(&self, chi: f64, d: &SymTensor2) -> Result<f64, ConstitutiveError> {
        check_chi(chi)?;
        Ok(self.h(chi, d))
    }

    /// (∂H/∂χ, ∂H/∂D)
    pub fn h_partials(&self, chi: f64, d: &SymTensor2) -> Result<(f64, SymTensor2), ConstitutiveError> {
        check_chi(chi)?;
        Ok((-self.params.w - 0.5 * d.norm_sq(), d.scale(1.0 - chi)))
    }

    #[inline]
    pub(crate) fn h(&self, chi: f64, d: &SymTensor2) -> f64 {
        (1.0 - chi) * (self.params.w + 0.5 * d.norm_sq())
    }

    pub fn w1(&self, chi: f64) -> f64 {
        let c = self.params.beta / self.params.alpha;
        match self.params.w1_variant {
            W1Variant::Inhibit => c * (1.0 - chi).powi(2),
            W1Variant::DoubleWell => c * chi * chi * (1.0 - chi).powi(2),
        }
    }

    pub fn w1_prime(&self, chi: f64) -> f64 {
        let c = self.params.beta / self.params.alpha;
        match self.params.w1_variant {
            W1Variant::Inhibit => -2.0 * c * (1.0 - chi),
            W1Variant::DoubleWell => 2.0 * c * chi * (1.0 - chi) * (1.0 - 2.0 * chi),
        }
    }

    /// J(χ, ∇χ) = I_[0,1](χ) + (α/2)|∇χ|² + W₁(χ).
    pub fn eval_j_density(&self, chi: f64, grad_chi: &[f64]) -> f64 {
        if !(0.0..=1.0).contains(&chi) {
            return f64::INFINITY;
        }
        let g2: f64 = grad_chi.iter().map(|x| x * x).sum();
        0.5 * self.params.alpha * g2 + self.w1(chi)
    }

    /// G(D, ∇D) = I_K(D) + w_G(|D|²−1)² + (1/q)|∇D|^q.
    pub fn eval_g_density(&self, d: &SymTensor2, grad_d: &[SymTensor2]) -> f64 {
        if !self.params.k_set.contains(d) {
            return f64::INFINITY;
        }
        self.quartic(d) + self.gradient_term(grad_d)
    }

    #[inline]
    pub(crate) fn quartic(&self, d: &SymTensor2) -> f64 {
        let s = d.norm_sq() - 1.0;
        self.params.quartic_weight * s * s
    }

    /// Frobenius gradient of w_G(|D|²−1)².
    #[inline]
    pub fn quartic_gradient(&self, d: &SymTensor2) -> SymTensor2 {
        d.scale(4.0 * self.params.quartic_weight * (d.norm_sq() - 1.0))
    }

    pub(crate) fn gradient_term(&self, grad_d: &[SymTensor2]) -> f64 {
        let n2: f64 = grad_d.iter().map(SymTensor2::norm_sq).sum();
        let q = self.params.q;
        if q == 2.0 {
            0.5 * n2
        } else {
            n2.powf(0.5 * q) / q
        }
    }

    /// Factor c with ∂/∂(∇D) of (1/q)|∇D|^q = c·∇D; zero at ∇D = 0.
    pub fn gradient_term_factor(&self, grad_d: &[SymTensor2]) -> f64 {
        let q = self.params.q;
        if q == 2.0 {
            return 1.0;
        }
        let n2: f64 = grad_d.iter().map(SymTensor2::norm_sq).sum();
        if n2 == 0.0 {
            0.0
        } else {
            n2.powf(0.5 * q - 1.0)
        }
    }

    /// R(δχ, δD) = ν|δχ| + I_(−∞,0](δχ) + μ|δD|.
    pub fn eval_dissipation_rate(&self, delta_chi: f64, delta_d: &SymTensor2) -> f64 {
        if delta_chi > 0.0 {
            return f64::INFINITY;
        }
        self.params.nu_diss * delta_chi.abs() + self.params.mu_diss * delta_d.norm()
    }

    /// Free energy density without the elastic part: H + J + G.
    pub fn internal_density(&self, p: &PointState) -> f64 {
        if !(0.0..=1.0).contains(&p.chi) {
            return f64::INFINITY;
        }
        self.h(p.chi, &p.d_tensor) + self.eval_j_density(p.chi, &p.grad_chi) + self.eval_g_density(&p.d_tensor, &p.grad_d)
    }

    /// ½(e − Ξ):𝕂(χ):(e − Ξ) for a total strain `e`.
    pub fn elastic_density(&self, chi: f64, d: &SymTensor2, e: &SymTensor2) -> Result<f64, ConstitutiveError> {
        check_chi(chi)?;
        let r = *e - xi(chi, d);
        Ok(0.5 * self.degradation(chi) * self.base.quadratic(&r))
    }
}

/// Linear inelastic strain (1−χ)D, unchecked.
#[inline]
pub fn xi(chi: f64, d: &SymTensor2) -> SymTensor2 {
    d.scale(1.0 - chi)
}
