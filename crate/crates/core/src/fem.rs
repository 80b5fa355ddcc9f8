//! P1 finite-element discretization of the stored energy.
//!
//! All three fields are nodal. Inside each element the damage and plastic
//! strain enter through their barycentric values χ̄, D̄, so the elastic part is
//! an exact quadratic form in u with element-constant strain; the remaining
//! densities use one-point quadrature. Indicator constraints are checked at
//! the nodes and dissipation integrals use the lumped nodal weights.

use thiserror::Error;

use crate::constitutive::Material;
use crate::loading::Loading;
use crate::mesh::{Mesh, NodeKind};
use crate::sparse::{conjugate_gradient, CgError, CgOutcome, CsrMatrix};
use crate::tensor::{component_index, n_components, SymTensor2, Tensor4, MAX_COMPONENTS};

const MAX_LOCAL: usize = 6;

enum Violation {
    Chi(usize),
    Subspace(usize),
    ConvexSet(usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FemError {
    #[error("field `{field}` has length {got}, expected {expected}")]
    Shape { field: &'static str, expected: usize, got: usize },
    #[error("material dimension {material} does not match mesh dimension {mesh}")]
    Dimension { material: usize, mesh: usize },
    #[error("state is infeasible: {0}")]
    Infeasible(String),
    #[error("elastic solve failed: {0}")]
    Cg(#[from] CgError),
}

/// Nodal state q = (u, χ, D). `u` holds `dim` entries per node and vanishes
/// on Dirichlet nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct StateFields {
    pub u: Vec<f64>,
    pub chi: Vec<f64>,
    pub d: Vec<SymTensor2>,
}

impl StateFields {
    /// Sound material, no plastic strain, no displacement.
    pub fn sound(mesh: &Mesh) -> Self {
        Self {
            u: vec![0.0; mesh.n_nodes() * mesh.dim()],
            chi: vec![1.0; mesh.n_nodes()],
            d: vec![SymTensor2::zeros(mesh.dim()); mesh.n_nodes()],
        }
    }

    pub fn min_chi(&self) -> f64 {
        self.chi.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_norm_d(&self) -> f64 {
        self.d.iter().map(SymTensor2::norm).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    /// Elastic energy minus the work of the external load.
    pub w_elastic_minus_work: f64,
    pub j_damage: f64,
    pub g_plastic: f64,
    pub h_coupling: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn is_finite(&self) -> bool {
        self.total.is_finite()
    }
}

/// Nodal gradients of the smooth part of the energy. `d` holds Frobenius
/// gradients, so a perturbation δD at node i changes the energy by
/// `d[i] : δD` to first order.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBlocks {
    pub u: Vec<f64>,
    pub chi: Vec<f64>,
    pub d: Vec<SymTensor2>,
}

#[derive(Debug, Clone)]
struct ElementOps {
    /// Mandel strain operator, rows = components, columns = local dofs.
    bm: [[f64; MAX_LOCAL]; MAX_COMPONENTS],
    ndof: usize,
}

/// Per-element quantities shared by energy, power and gradient evaluation.
struct ElementEval {
    chi: f64,
    d: SymTensor2,
    /// r = e(u) + e_D − Ξ(χ̄, D̄)
    r: SymTensor2,
    grad_chi: [f64; 2],
    grad_d: [SymTensor2; 2],
}

/// A discretized problem: mesh, material and loading with the dof numbering
/// and stiffness pattern.
#[derive(Debug, Clone)]
pub struct Model {
    mesh: Mesh,
    material: Material,
    loading: Loading,
    free_index: Vec<Option<usize>>,
    free_dofs: Vec<usize>,
    pattern: CsrMatrix,
    ops: Vec<ElementOps>,
    cg_tol: f64,
}

impl Model {
    pub fn new(mesh: Mesh, material: Material, loading: Loading) -> Result<Self, FemError> {
        let dim = mesh.dim();
        if material.dim() != dim {
            return Err(FemError::Dimension { material: material.dim(), mesh: dim });
        }
        let n_dof = mesh.n_nodes() * dim;
        if loading.force_vector.len() != n_dof {
            return Err(FemError::Shape { field: "force_vector", expected: n_dof, got: loading.force_vector.len() });
        }
        let mut free_index = vec![None; n_dof];
        let mut free_dofs = Vec::new();
        for node in 0..mesh.n_nodes() {
            if mesh.kind(node) != NodeKind::Dirichlet {
                for k in 0..dim {
                    free_index[node * dim + k] = Some(free_dofs.len());
                    free_dofs.push(node * dim + k);
                }
            }
        }
        let mut rows = vec![Vec::new(); free_dofs.len()];
        for e in mesh.elements() {
            let dofs: Vec<usize> = local_dofs(e.nodes(), dim).filter_map(|g| free_index[g]).collect();
            for &i in &dofs {
                rows[i].extend_from_slice(&dofs);
            }
        }
        let pattern = CsrMatrix::from_pattern(&rows);
        let ops = mesh.elements().iter().map(|e| element_ops(e, dim)).collect();
        Ok(Self { mesh, material, loading, free_index, free_dofs, pattern, ops, cg_tol: 1e-10 })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn material(&self) -> &Material {
        &self.material
    }

    pub fn loading(&self) -> &Loading {
        &self.loading
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn n_free(&self) -> usize {
        self.free_dofs.len()
    }

    /// Global dof (node·dim + k) of each free unknown.
    pub fn free_dofs(&self) -> &[usize] {
        &self.free_dofs
    }

    pub fn cg_tolerance(&self) -> f64 {
        self.cg_tol
    }

    pub fn set_cg_tolerance(&mut self, tol: f64) {
        self.cg_tol = tol;
    }

    /// Load vector F(t).
    pub fn force(&self, t: f64) -> Vec<f64> {
        let s = self.loading.force_scale(t);
        self.loading.force_vector.iter().map(|f| s * f).collect()
    }

    pub fn check_shape(&self, fields: &StateFields) -> Result<(), FemError> {
        let n = self.mesh.n_nodes();
        let checks = [("u", fields.u.len(), n * self.dim()), ("chi", fields.chi.len(), n), ("d", fields.d.len(), n)];
        for (field, got, expected) in checks {
            if got != expected {
                return Err(FemError::Shape { field, expected, got });
            }
        }
        if let Some(t) = fields.d.iter().find(|t| t.dim() != self.dim()) {
            return Err(FemError::Shape { field: "d (tensor dimension)", expected: self.dim(), got: t.dim() });
        }
        Ok(())
    }

    /// First nodal constraint violation of (χ, D), if any.
    pub fn infeasibility(&self, chi: &[f64], d: &[SymTensor2]) -> Option<String> {
        let p = self.material.params();
        self.violation(chi, d).map(|v| match v {
            Violation::Chi(i) => format!("chi = {} outside [0, 1] at node {i}", chi[i]),
            Violation::Subspace(i) => format!("D at node {i} is not in the subspace {:?}", p.subspace),
            Violation::ConvexSet(i) => format!("D at node {i} (|D| = {}) is outside K", d[i].norm()),
        })
    }

    fn violation(&self, chi: &[f64], d: &[SymTensor2]) -> Option<Violation> {
        if let Some(i) = chi.iter().position(|c| !(0.0..=1.0).contains(c)) {
            return Some(Violation::Chi(i));
        }
        let p = self.material.params();
        for (i, t) in d.iter().enumerate() {
            if !p.subspace.contains(t, 1e-12 * (1.0 + t.norm())) {
                return Some(Violation::Subspace(i));
            }
            if !p.k_set.contains(t) {
                return Some(Violation::ConvexSet(i));
            }
        }
        None
    }

    fn element_eval(&self, idx: usize, u: &[f64], chi: &[f64], d: &[SymTensor2], e_d: &SymTensor2) -> ElementEval {
        let e = &self.mesh.elements()[idx];
        let dim = self.dim();
        let nodes = e.nodes();
        let inv = 1.0 / nodes.len() as f64;
        let chi_bar = nodes.iter().map(|&a| chi[a]).sum::<f64>() * inv;
        let mut d_bar = SymTensor2::zeros(dim);
        for &a in nodes {
            d_bar += d[a];
        }
        let d_bar = d_bar.scale(inv);
        let strain = self.strain(idx, u);
        let r = strain + *e_d - d_bar.scale(1.0 - chi_bar);
        let mut grad_chi = [0.0; 2];
        let mut grad_d = [SymTensor2::zeros(dim); 2];
        for (a, &node) in nodes.iter().enumerate() {
            let g = e.grad(a);
            for k in 0..dim {
                grad_chi[k] += chi[node] * g[k];
                grad_d[k] = grad_d[k].axpy(g[k], &d[node]);
            }
        }
        ElementEval { chi: chi_bar, d: d_bar, r, grad_chi, grad_d }
    }

    /// Constant strain e(u) on element `idx`.
    pub fn strain(&self, idx: usize, u: &[f64]) -> SymTensor2 {
        let dim = self.dim();
        let op = &self.ops[idx];
        let nodes = self.mesh.elements()[idx].nodes();
        let mut m = [0.0; MAX_COMPONENTS];
        for (c, mc) in m.iter_mut().enumerate().take(n_components(dim)) {
            let mut s = 0.0;
            for (l, g) in local_dofs(nodes, dim).enumerate() {
                s += op.bm[c][l] * u[g];
            }
            *mc = s;
        }
        SymTensor2::from_mandel(dim, &m)
    }

    /// Evaluates E(t, q) split into its four functionals.
    pub fn assemble_energy(&self, t: f64, fields: &StateFields) -> Result<EnergyBreakdown, FemError> {
        self.check_shape(fields)?;
        Ok(self.energy_unchecked(t, fields))
    }

    pub(crate) fn energy_unchecked(&self, t: f64, fields: &StateFields) -> EnergyBreakdown {
        self.energy_parts(t, &fields.u, &fields.chi, &fields.d)
    }

    /// [`Model::assemble_energy`] on raw nodal slices without shape checks.
    pub fn energy_parts(&self, t: f64, u: &[f64], chi: &[f64], d: &[SymTensor2]) -> EnergyBreakdown {
        let mat = &self.material;
        let dim = self.dim();
        let e_d = self.loading.e_d(t);
        let (mut w, mut j, mut g, mut h) = (0.0, 0.0, 0.0, 0.0);
        for (idx, e) in self.mesh.elements().iter().enumerate() {
            let ev = self.element_eval(idx, u, chi, d, &e_d);
            let m = e.measure;
            w += m * 0.5 * mat.degradation(ev.chi) * mat.base_stiffness().quadratic(&ev.r);
            let g2: f64 = ev.grad_chi[..dim].iter().map(|x| x * x).sum();
            j += m * (0.5 * mat.params().alpha * g2 + mat.w1(ev.chi));
            g += m * (mat.quartic(&ev.d) + mat.gradient_term(&ev.grad_d[..dim]));
            h += m * mat.h(ev.chi, &ev.d);
        }
        let s = self.loading.force_scale(t);
        let work: f64 = self.loading.force_vector.iter().zip(u).map(|(f, u)| s * f * u).sum();
        w -= work;
        match self.violation(chi, d) {
            Some(Violation::Chi(_)) => j = f64::INFINITY,
            Some(_) => g = f64::INFINITY,
            None => {}
        }
        EnergyBreakdown { w_elastic_minus_work: w, j_damage: j, g_plastic: g, h_coupling: h, total: w + j + g + h }
    }

    /// ∂ₜE(t, q) = ∫ (e(u)+e_D−Ξ):𝕂(χ):∂ₜe_D − ⟨∂ₜF, u⟩.
    pub fn assemble_power(&self, t: f64, fields: &StateFields) -> Result<f64, FemError> {
        self.check_shape(fields)?;
        Ok(self.power_unchecked(t, fields))
    }

    pub(crate) fn power_unchecked(&self, t: f64, fields: &StateFields) -> f64 {
        let mat = &self.material;
        let e_d = self.loading.e_d(t);
        let rate = self.loading.e_d_rate(t);
        let k_rate = mat.base_stiffness().apply(&rate);
        let mut p = 0.0;
        if rate.max_abs() > 0.0 {
            for (idx, e) in self.mesh.elements().iter().enumerate() {
                let ev = self.element_eval(idx, &fields.u, &fields.chi, &fields.d, &e_d);
                p += e.measure * mat.degradation(ev.chi) * ev.r.dot(&k_rate);
            }
        }
        let s = self.loading.force_rate_scale(t);
        p - self.loading.force_vector.iter().zip(&fields.u).map(|(f, u)| s * f * u).sum::<f64>()
    }

    /// Adds Σ_T |T|·weight_T·Bᵀ𝕂B over free dofs via `add(i, j, v)`.
    fn assemble_operator(&self, tensor: &Tensor4, weights: &[f64], mut add: impl FnMut(usize, usize, f64)) {
        let dim = self.dim();
        let nc = n_components(dim);
        for (idx, e) in self.mesh.elements().iter().enumerate() {
            let op = &self.ops[idx];
            let scale = e.measure * weights[idx];
            let dofs: Vec<Option<usize>> = local_dofs(e.nodes(), dim).map(|g| self.free_index[g]).collect();
            // kb = 𝕂·B
            let mut kb = [[0.0; MAX_LOCAL]; MAX_COMPONENTS];
            for (r, row) in kb.iter_mut().enumerate().take(nc) {
                for (l, x) in row.iter_mut().enumerate().take(op.ndof) {
                    *x = (0..nc).map(|c| tensor.mandel(r, c) * op.bm[c][l]).sum();
                }
            }
            for (a, fa) in dofs.iter().enumerate() {
                let Some(i) = fa else { continue };
                for (b, fb) in dofs.iter().enumerate() {
                    let Some(j) = fb else { continue };
                    let v: f64 = (0..nc).map(|c| op.bm[c][a] * kb[c][b]).sum();
                    add(*i, *j, scale * v);
                }
            }
        }
    }

    /// Sparse matrix Σ_T |T|·weights_T·Bᵀ𝕂B on the free dofs.
    pub fn stiffness_matrix(&self, tensor: &Tensor4, weights: &[f64]) -> CsrMatrix {
        let mut k = self.pattern.clone();
        self.assemble_operator(tensor, weights, |i, j, v| k.add(i, j, v));
        k
    }

    /// Dense row-major copy of the same operator.
    pub fn stiffness_dense(&self, tensor: &Tensor4, weights: &[f64], out: &mut [f64]) {
        let n = self.n_free();
        out.iter_mut().for_each(|x| *x = 0.0);
        self.assemble_operator(tensor, weights, |i, j, v| out[i * n + j] += v);
    }

    /// Degradation factor g(χ̄) for every element.
    pub fn element_degradation(&self, chi: &[f64]) -> Vec<f64> {
        self.mesh
            .elements()
            .iter()
            .map(|e| {
                let c = e.nodes().iter().map(|&a| chi[a]).sum::<f64>() / e.n_nodes() as f64;
                self.material.degradation(c)
            })
            .collect()
    }

    /// Right-hand side of the elastic system on the free dofs:
    /// F(t) − Σ_T |T| g Bᵀ𝕂₀(e_D − Ξ̄).
    pub fn elastic_rhs(&self, t: f64, chi: &[f64], d: &[SymTensor2]) -> Vec<f64> {
        let dim = self.dim();
        let nc = n_components(dim);
        let e_d = self.loading.e_d(t);
        let s = self.loading.force_scale(t);
        let mut b: Vec<f64> = self.free_dofs.iter().map(|&g| s * self.loading.force_vector[g]).collect();
        for (idx, e) in self.mesh.elements().iter().enumerate() {
            let nodes = e.nodes();
            let inv = 1.0 / nodes.len() as f64;
            let chi_bar = nodes.iter().map(|&a| chi[a]).sum::<f64>() * inv;
            let mut d_bar = SymTensor2::zeros(dim);
            for &a in nodes {
                d_bar += d[a];
            }
            let pre = e_d - d_bar.scale(inv * (1.0 - chi_bar));
            let sigma = self.material.base_stiffness().apply(&pre).to_mandel();
            let scale = e.measure * self.material.degradation(chi_bar);
            let op = &self.ops[idx];
            for (l, g) in local_dofs(nodes, dim).enumerate() {
                if let Some(i) = self.free_index[g] {
                    b[i] -= scale * (0..nc).map(|c| op.bm[c][l] * sigma[c]).sum::<f64>();
                }
            }
        }
        b
    }

    /// Scatters free-dof values into a full nodal vector.
    pub fn expand(&self, free: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.mesh.n_nodes() * self.dim()];
        for (i, &g) in self.free_dofs.iter().enumerate() {
            u[g] = free[i];
        }
        u
    }

    pub fn restrict(&self, u: &[f64]) -> Vec<f64> {
        self.free_dofs.iter().map(|&g| u[g]).collect()
    }

    /// Unique minimizer of W(t, ·, χ, D) over displacements vanishing on Γ_D.
    pub fn elastic_solve(&self, t: f64, chi: &[f64], d: &[SymTensor2]) -> Result<Vec<f64>, FemError> {
        self.elastic_solve_from(t, chi, d, None).map(|(u, _)| u)
    }

    /// As [`Model::elastic_solve`], warm-started from `guess` when given.
    pub fn elastic_solve_from(
        &self,
        t: f64,
        chi: &[f64],
        d: &[SymTensor2],
        guess: Option<&[f64]>,
    ) -> Result<(Vec<f64>, CgOutcome), FemError> {
        let n = self.mesh.n_nodes();
        if chi.len() != n {
            return Err(FemError::Shape { field: "chi", expected: n, got: chi.len() });
        }
        if d.len() != n {
            return Err(FemError::Shape { field: "d", expected: n, got: d.len() });
        }
        let k = self.stiffness_matrix(self.material.base_stiffness(), &self.element_degradation(chi));
        let b = self.elastic_rhs(t, chi, d);
        let mut x = match guess {
            Some(g) => self.restrict(g),
            None => vec![0.0; self.n_free()],
        };
        let out = conjugate_gradient(&k, &b, &mut x, self.cg_tol, 20 * self.n_free() + 100)?;
        Ok((self.expand(&x), out))
    }

    /// Nodal gradients of the smooth part of E(t, ·) at `fields`.
    pub fn energy_gradient_blocks(&self, t: f64, fields: &StateFields) -> Result<GradientBlocks, FemError> {
        self.check_shape(fields)?;
        if let Some(msg) = self.infeasibility(&fields.chi, &fields.d) {
            return Err(FemError::Infeasible(msg));
        }
        Ok(self.gradient_unchecked(t, fields))
    }

    pub(crate) fn gradient_unchecked(&self, t: f64, fields: &StateFields) -> GradientBlocks {
        let mat = &self.material;
        let p = mat.params();
        let dim = self.dim();
        let nc = n_components(dim);
        let e_d = self.loading.e_d(t);
        let n = self.mesh.n_nodes();
        let s = self.loading.force_scale(t);
        let mut gu: Vec<f64> = self.loading.force_vector.iter().map(|f| -s * f).collect();
        let mut gchi = vec![0.0; n];
        let mut gd = vec![SymTensor2::zeros(dim); n];
        for (idx, e) in self.mesh.elements().iter().enumerate() {
            let ev = self.element_eval(idx, &fields.u, &fields.chi, &fields.d, &e_d);
            let m = e.measure;
            let nodes = e.nodes();
            let inv = 1.0 / nodes.len() as f64;
            let g = mat.degradation(ev.chi);
            let kr = mat.base_stiffness().apply(&ev.r);

            let sigma = kr.scale(g).to_mandel();
            let op = &self.ops[idx];
            for (l, gdof) in local_dofs(nodes, dim).enumerate() {
                gu[gdof] += m * (0..nc).map(|c| op.bm[c][l] * sigma[c]).sum::<f64>();
            }

            let d_chi_bar =
                0.5 * mat.degradation_prime(ev.chi) * kr.dot(&ev.r) + g * kr.dot(&ev.d) + mat.w1_prime(ev.chi) - p.w - 0.5 * ev.d.norm_sq();
            let d_d_bar = kr.scale(-(1.0 - ev.chi) * g) + ev.d.scale(1.0 - ev.chi) + mat.quartic_gradient(&ev.d);
            let c = mat.gradient_term_factor(&ev.grad_d[..dim]);
            for (a, &node) in nodes.iter().enumerate() {
                let gr = e.grad(a);
                let dot: f64 = (0..dim).map(|k| ev.grad_chi[k] * gr[k]).sum();
                gchi[node] += m * (inv * d_chi_bar + p.alpha * dot);
                let mut term = d_d_bar.scale(inv);
                for k in 0..dim {
                    term = term.axpy(c * gr[k], &ev.grad_d[k]);
                }
                gd[node] += term.scale(m);
            }
        }
        for (g, free) in gu.iter_mut().zip(&self.free_index) {
            if free.is_none() {
                *g = 0.0;
            }
        }
        GradientBlocks { u: gu, chi: gchi, d: gd }
    }

    /// Lumped dissipation Σ_i m_i (ν|χ₁−χ₀| + μ|D₁−D₀|), +∞ if χ increases.
    pub fn dissipation(&self, chi0: &[f64], d0: &[SymTensor2], chi1: &[f64], d1: &[SymTensor2]) -> f64 {
        let mass = self.mesh.lumped_mass();
        let mut total = 0.0;
        for i in 0..chi0.len() {
            let r = self.material.eval_dissipation_rate(chi1[i] - chi0[i], &(d1[i] - d0[i]));
            if r == f64::INFINITY {
                return f64::INFINITY;
            }
            total += mass[i] * r;
        }
        total
    }
}

fn local_dofs(nodes: &[usize], dim: usize) -> impl Iterator<Item = usize> + '_ {
    nodes.iter().flat_map(move |&a| (0..dim).map(move |k| a * dim + k))
}

fn element_ops(e: &crate::mesh::Element, dim: usize) -> ElementOps {
    let mut bm = [[0.0; MAX_LOCAL]; MAX_COMPONENTS];
    let ndof = e.n_nodes() * dim;
    for c in 0..n_components(dim) {
        let (i, j) = component_index(dim, c);
        let factor = if i == j { 1.0 } else { std::f64::consts::SQRT_2 };
        for a in 0..e.n_nodes() {
            let g = e.grad(a);
            for k in 0..dim {
                let mut v = 0.0;
                if k == i {
                    v += 0.5 * g[j];
                }
                if k == j {
                    v += 0.5 * g[i];
                }
                bm[c][a * dim + k] = factor * v;
            }
        }
    }
    ElementOps { bm, ndof }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::tests::params;
    use crate::loading::{Profile, ProfileSpec};
    use crate::mesh::{build_mesh, Facet};

    fn bar(n: usize, traction: f64) -> Model {
        let mesh = build_mesh(1, &[1.0], &[n], &[Facet::Left]).unwrap();
        let mat = Material::new(params(), 1);
        let loading = Loading::new(
            &mesh,
            Profile::resolve(&ProfileSpec::default(), 0.0),
            vec![0.0],
            Profile::resolve(&ProfileSpec::Constant { value: 1.0 }, 0.0),
            &[0.0],
            &[traction],
            &[Facet::Right],
        );
        Model::new(mesh, mat, loading).unwrap()
    }

    #[test]
    fn constant_sound_state_has_only_quartic_energy() {
        let m = bar(4, 0.0);
        let f = StateFields::sound(m.mesh());
        let e = m.assemble_energy(0.0, &f).unwrap();
        let wg = m.material().params().quartic_weight;
        assert_eq!(e.w_elastic_minus_work, 0.0);
        assert_eq!(e.j_damage, 0.0);
        assert!((e.g_plastic - wg).abs() < 1e-15);
        assert_eq!(e.h_coupling, 0.0);
        assert_eq!(e.total, e.w_elastic_minus_work + e.j_damage + e.g_plastic + e.h_coupling);
    }

    #[test]
    fn damage_above_one_is_infinite() {
        let m = bar(4, 0.0);
        let mut f = StateFields::sound(m.mesh());
        f.chi[2] = 1.1;
        assert_eq!(m.assemble_energy(0.0, &f).unwrap().total, f64::INFINITY);
    }

    #[test]
    fn traction_bar_is_linear() {
        let m = bar(5, 0.3);
        let f = StateFields::sound(m.mesh());
        let u = m.elastic_solve(0.0, &f.chi, &f.d).unwrap();
        let p = m.material().params();
        let stiff = p.lame_lambda + 2.0 * p.lame_mu;
        for node in 0..6 {
            let x = m.mesh().coords(node)[0];
            assert!((u[node] - 0.3 * x / stiff).abs() < 1e-10);
        }
    }

    #[test]
    fn wrong_shape_is_rejected() {
        let m = bar(3, 0.0);
        let mut f = StateFields::sound(m.mesh());
        f.chi.pop();
        assert!(matches!(m.assemble_energy(0.0, &f), Err(FemError::Shape { field: "chi", .. })));
    }

    fn plate() -> Model {
        let mesh = build_mesh(2, &[1.0, 0.5], &[3, 2], &[Facet::Left]).unwrap();
        let mut p = params();
        p.k_set = crate::tensor::ConvexSetK::AllOfS;
        let mat = Material::new(p, 2);
        let loading = Loading::new(
            &mesh,
            Profile::resolve(&ProfileSpec::LinearRamp { t0: 0.0, t1: 1.0, amplitude: 0.2 }, 0.0),
            vec![1.0, 0.3, 0.3, -0.5],
            Profile::resolve(&ProfileSpec::LinearRamp { t0: 0.0, t1: 1.0, amplitude: 1.0 }, 0.0),
            &[0.1, -0.2],
            &[0.4, 0.1],
            &[Facet::Right],
        );
        Model::new(mesh, mat, loading).unwrap()
    }

    #[test]
    fn gradient_matches_central_differences() {
        let m = plate();
        let n = m.mesh().n_nodes();
        let mut f = StateFields::sound(m.mesh());
        for i in 0..n {
            let x = i as f64;
            f.chi[i] = 0.3 + 0.4 * (0.5 + 0.5 * (1.3 * x).sin());
            f.d[i] = SymTensor2::from_components(2, &[0.3 * x.cos(), -0.2 + 0.1 * x.sin(), 0.15 * (2.0 * x).cos()]).unwrap();
        }
        for (k, &g) in m.free_dofs().iter().enumerate() {
            f.u[g] = 0.05 * (k as f64 * 0.7).sin();
        }
        let t = 0.6;
        let g = m.energy_gradient_blocks(t, &f).unwrap();
        let h = 1e-6;
        let e = |f: &StateFields| m.assemble_energy(t, f).unwrap().total;
        let check = |an: f64, fd: f64| assert!((an - fd).abs() <= 1e-5 * an.abs().max(1e-3), "{an} vs {fd}");
        for &dof in m.free_dofs() {
            let (mut a, mut b) = (f.clone(), f.clone());
            a.u[dof] += h;
            b.u[dof] -= h;
            check(g.u[dof], (e(&a) - e(&b)) / (2.0 * h));
        }
        for i in 0..n {
            let (mut a, mut b) = (f.clone(), f.clone());
            a.chi[i] += h;
            b.chi[i] -= h;
            check(g.chi[i], (e(&a) - e(&b)) / (2.0 * h));
            for c in 0..3 {
                let (mut a, mut b) = (f.clone(), f.clone());
                a.d[i].components_mut()[c] += h;
                b.d[i].components_mut()[c] -= h;
                check(g.d[i].weight(c) * g.d[i].components()[c], (e(&a) - e(&b)) / (2.0 * h));
            }
        }
    }

    #[test]
    fn solve_zeroes_the_displacement_gradient() {
        let m = plate();
        let mut f = StateFields::sound(m.mesh());
        f.chi[4] = 0.4;
        f.u = m.elastic_solve(0.7, &f.chi, &f.d).unwrap();
        let g = m.energy_gradient_blocks(0.7, &f).unwrap();
        assert!(g.u.iter().all(|x| x.abs() < 1e-9), "{:?}", g.u);
    }
}
