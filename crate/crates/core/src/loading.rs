//! Time profiles and external loading.
//!
//! Profiles are piecewise linear in time with every interior corner replaced
//! by a quadratic blend, so values and derivatives are exact and C¹.

use serde::{Deserialize, Serialize};

use crate::mesh::{Facet, Mesh};
use crate::tensor::SymTensor2;

/// Named scalar time profile as written in scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProfileSpec {
    Constant {
        value: f64,
    },
    /// 0 before `t0`, then `amplitude·(t − t0)/(t1 − t0)` without bound.
    LinearRamp {
        t0: f64,
        t1: f64,
        amplitude: f64,
    },
    /// 0 before `t0`, linear up to `amplitude` at `t1`, constant afterwards.
    HoldAfterRamp {
        t0: f64,
        t1: f64,
        amplitude: f64,
    },
}

impl Default for ProfileSpec {
    fn default() -> Self {
        ProfileSpec::Constant { value: 0.0 }
    }
}

impl ProfileSpec {
    pub fn violations(&self, name: &str) -> Vec<String> {
        match *self {
            ProfileSpec::Constant { value } if !value.is_finite() => vec![format!("{name}: value must be finite")],
            ProfileSpec::LinearRamp { t0, t1, amplitude } | ProfileSpec::HoldAfterRamp { t0, t1, amplitude } => {
                let mut v = Vec::new();
                if !(t1 > t0) {
                    v.push(format!("{name}: ramp needs t1 > t0 (got t0 = {t0}, t1 = {t1})"));
                }
                if !amplitude.is_finite() {
                    v.push(format!("{name}: amplitude must be finite"));
                }
                v
            }
            _ => Vec::new(),
        }
    }
}

/// A resolved C¹ profile on [0, T].
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    offset: f64,
    slope: f64,
    /// (corner time, slope jump)
    corners: Vec<(f64, f64)>,
    blend: f64,
}

impl Profile {
    /// Corners at or before t = 0 are folded into the affine part; later
    /// corners are blended over a window of width `blend`.
    pub fn resolve(spec: &ProfileSpec, blend: f64) -> Self {
        let (offset, slope, raw) = match *spec {
            ProfileSpec::Constant { value } => (value, 0.0, vec![]),
            ProfileSpec::LinearRamp { t0, t1, amplitude } => {
                let m = amplitude / (t1 - t0);
                (0.0, 0.0, vec![(t0, m)])
            }
            ProfileSpec::HoldAfterRamp { t0, t1, amplitude } => {
                let m = amplitude / (t1 - t0);
                (0.0, 0.0, vec![(t0, m), (t1, -m)])
            }
        };
        // fold corners before t = 0 into the affine part
        let mut offset = offset;
        let mut slope = slope;
        let mut corners = Vec::new();
        for (c, dm) in raw {
            if c <= 0.0 {
                offset -= dm * c;
                slope += dm;
            } else {
                corners.push((c, dm));
            }
        }
        Self { offset, slope, corners, blend }
    }

    /// Corner times inside (0, `horizon`) that are blended.
    pub fn interior_corners(&self, horizon: f64) -> Vec<f64> {
        self.corners.iter().map(|c| c.0).filter(|&c| c < horizon).collect()
    }

    pub fn blend(&self) -> f64 {
        self.blend
    }

    pub fn value(&self, t: f64) -> f64 {
        self.offset + self.slope * t + self.corners.iter().map(|&(c, dm)| dm * ramp(t - c, self.blend)).sum::<f64>()
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.slope + self.corners.iter().map(|&(c, dm)| dm * ramp_prime(t - c, self.blend)).sum::<f64>()
    }

    /// sup over [0, T] of |value| and |derivative|, sampled at corners and ends.
    pub fn bounds(&self, horizon: f64) -> (f64, f64) {
        let mut ts = vec![0.0, horizon];
        for &(c, _) in &self.corners {
            for t in [c - self.blend / 2.0, c, c + self.blend / 2.0] {
                if (0.0..=horizon).contains(&t) {
                    ts.push(t);
                }
            }
        }
        // piecewise linear/quadratic between these points, so extrema of the
        // value sit at sample points and the derivative is monotone in between
        ts.iter().fold((0.0f64, 0.0f64), |(v, d), &t| (v.max(self.value(t).abs()), d.max(self.derivative(t).abs())))
    }
}

/// C¹ smoothing of max(0, x) over a window of width `b` centred at 0.
fn ramp(x: f64, b: f64) -> f64 {
    if b <= 0.0 {
        return x.max(0.0);
    }
    if x <= -0.5 * b {
        0.0
    } else if x >= 0.5 * b {
        x
    } else {
        let s = x + 0.5 * b;
        s * s / (2.0 * b)
    }
}

fn ramp_prime(x: f64, b: f64) -> f64 {
    if b <= 0.0 {
        return if x > 0.0 { 1.0 } else { 0.0 };
    }
    if x <= -0.5 * b {
        0.0
    } else if x >= 0.5 * b {
        1.0
    } else {
        (x + 0.5 * b) / b
    }
}

/// External loading: Dirichlet lift u_D(t, x) = s_D(t)·G·x and load
/// functional F(t) = s_F(t)·F₀.
#[derive(Debug, Clone)]
pub struct Loading {
    pub dirichlet: Profile,
    /// Row-major d×d lift gradient G.
    pub lift_gradient: Vec<f64>,
    pub lift_strain: SymTensor2,
    pub force: Profile,
    /// Nodal load vector F₀, zero on Dirichlet nodes.
    pub force_vector: Vec<f64>,
}

impl Loading {
    /// Assembles F₀ from a constant volume density and a constant traction on
    /// the given facets, both with lumped quadrature.
    pub fn new(
        mesh: &Mesh,
        dirichlet: Profile,
        lift_gradient: Vec<f64>,
        force: Profile,
        volume_force: &[f64],
        traction: &[f64],
        traction_facets: &[Facet],
    ) -> Self {
        let dim = mesh.dim();
        let lift_strain = SymTensor2::sym_from_matrix(dim, &lift_gradient).expect("lift gradient must be d×d");
        let mut f = vec![0.0; mesh.n_nodes() * dim];
        for (node, m) in mesh.lumped_mass().iter().enumerate() {
            for k in 0..dim {
                f[node * dim + k] += m * volume_force[k];
            }
        }
        for &facet in traction_facets {
            for (node, w) in mesh.facet_weights(facet) {
                for k in 0..dim {
                    f[node * dim + k] += w * traction[k];
                }
            }
        }
        for node in 0..mesh.n_nodes() {
            if mesh.kind(node) == crate::mesh::NodeKind::Dirichlet {
                f[node * dim..(node + 1) * dim].iter_mut().for_each(|x| *x = 0.0);
            }
        }
        Self { dirichlet, lift_gradient, lift_strain, force, force_vector: f }
    }

    /// No loading at all.
    pub fn none(mesh: &Mesh) -> Self {
        let dim = mesh.dim();
        Self {
            dirichlet: Profile::resolve(&ProfileSpec::default(), 0.0),
            lift_gradient: vec![0.0; dim * dim],
            lift_strain: SymTensor2::zeros(dim),
            force: Profile::resolve(&ProfileSpec::default(), 0.0),
            force_vector: vec![0.0; mesh.n_nodes() * dim],
        }
    }

    /// e_D(t)
    pub fn e_d(&self, t: f64) -> SymTensor2 {
        self.lift_strain.scale(self.dirichlet.value(t))
    }

    /// ∂ₜe_D(t)
    pub fn e_d_rate(&self, t: f64) -> SymTensor2 {
        self.lift_strain.scale(self.dirichlet.derivative(t))
    }

    pub fn force_scale(&self, t: f64) -> f64 {
        self.force.value(t)
    }

    pub fn force_rate_scale(&self, t: f64) -> f64 {
        self.force.derivative(t)
    }

    /// Nodal Dirichlet lift values at time `t`.
    pub fn lift_values(&self, mesh: &Mesh, t: f64) -> Vec<f64> {
        let dim = mesh.dim();
        let s = self.dirichlet.value(t);
        let mut out = vec![0.0; mesh.n_nodes() * dim];
        for node in 0..mesh.n_nodes() {
            let x = mesh.coords(node);
            for i in 0..dim {
                out[node * dim + i] = s * (0..dim).map(|j| self.lift_gradient[i * dim + j] * x[j]).sum::<f64>();
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(p: &Profile, t: f64) -> f64 {
        let h = 1e-7;
        (p.value(t + h) - p.value(t - h)) / (2.0 * h)
    }

    #[test]
    fn ramp_from_zero_is_exactly_linear() {
        let p = Profile::resolve(&ProfileSpec::LinearRamp { t0: 0.0, t1: 2.0, amplitude: 3.0 }, 0.05);
        assert_eq!(p.value(0.0), 0.0);
        assert_eq!(p.value(1.0), 1.5);
        assert_eq!(p.derivative(0.7), 1.5);
        assert!(p.interior_corners(1.0).is_empty());
    }

    #[test]
    fn hold_after_ramp_is_c1() {
        let b = 0.1;
        let p = Profile::resolve(&ProfileSpec::HoldAfterRamp { t0: 0.2, t1: 0.6, amplitude: 2.0 }, b);
        assert_eq!(p.value(0.0), 0.0);
        assert!((p.value(0.9) - 2.0).abs() < 1e-14);
        assert!((p.value(0.4) - 1.0).abs() < 1e-14);
        for t in [0.15, 0.2, 0.24, 0.55, 0.6, 0.649, 0.3, 0.8] {
            assert!((p.derivative(t) - fd(&p, t)).abs() < 1e-5, "t = {t}");
        }
        // continuity of the derivative across the blend window edges
        for c in [0.2, 0.6] {
            for e in [c - b / 2.0, c + b / 2.0] {
                assert!((p.derivative(e - 1e-12) - p.derivative(e + 1e-12)).abs() < 1e-9);
            }
        }
        let (vmax, dmax) = p.bounds(1.0);
        assert!((vmax - 2.0).abs() < 1e-14);
        assert!((dmax - 5.0).abs() < 1e-14);
    }

    #[test]
    fn invalid_ramp_is_reported() {
        let v = ProfileSpec::LinearRamp { t0: 1.0, t1: 1.0, amplitude: 1.0 }.violations("force");
        assert_eq!(v.len(), 1);
    }
}
