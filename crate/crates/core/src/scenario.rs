//! Scenario files: TOML with named sections and strict key checking.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constitutive::{Material, MaterialParams};
use crate::fem::{FemError, Model, StateFields};
use crate::loading::{Loading, Profile, ProfileSpec};
use crate::mesh::{build_mesh, Facet, MeshError};
use crate::solver::{SolverConfig, TimeGrid};
use crate::tensor::{n_components, SymTensor2};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed scenario: {0}")]
    Parse(String),
    #[error("invalid scenario:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fem(#[from] FemError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    pub dim: usize,
    pub extents: Vec<f64>,
    pub subdivisions: Vec<usize>,
    /// Facets forming Γ_D.
    pub dirichlet: Vec<Facet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadingSpec {
    /// Row-major d×d gradient G of the Dirichlet lift u_D = s_D(t)·G·x.
    pub dirichlet_gradient: Vec<f64>,
    pub dirichlet_profile: ProfileSpec,
    /// Constant volume force density f.
    pub volume_force: Vec<f64>,
    /// Constant traction applied on `traction_facets`.
    pub traction: Vec<f64>,
    pub traction_facets: Vec<Facet>,
    pub force_profile: ProfileSpec,
    /// Corner smoothing width of the time profiles; 2Δt when absent.
    pub blend_width: Option<f64>,
}

impl Default for LoadingSpec {
    fn default() -> Self {
        Self {
            dirichlet_gradient: Vec::new(),
            dirichlet_profile: ProfileSpec::default(),
            volume_force: Vec::new(),
            traction: Vec::new(),
            traction_facets: Vec::new(),
            force_profile: ProfileSpec::Constant { value: 1.0 },
            blend_width: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSpec {
    /// Uniform initial damage.
    pub chi: f64,
    /// Uniform initial plastic strain, independent components.
    pub d: Vec<f64>,
}

impl Default for InitialSpec {
    fn default() -> Self {
        Self { chi: 1.0, d: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerificationConfig {
    pub seed: u64,
    /// Competitors per randomized family.
    pub per_family: usize,
    /// Largest uniform damage drop.
    pub drop_delta: f64,
    /// Largest shift δ of the recovery construction.
    pub recovery_delta: f64,
    /// Largest random damage decrease per node.
    pub chi_scale: f64,
    /// Largest random plastic-strain perturbation per node.
    pub d_scale: f64,
    /// Relative tolerance ε_stab/(1+|E|) for stability violations.
    pub stability_tol: f64,
    /// Relative tolerance ε_bal/(1+|E|) for the upper energy estimate.
    pub balance_tol: f64,
}

impl Default for VerificationConfig {
    fn default() -> Self {
        Self {
            seed: 20240917,
            per_family: 250,
            drop_delta: 0.2,
            recovery_delta: 0.2,
            chi_scale: 0.1,
            d_scale: 0.1,
            stability_tol: 1e-8,
            balance_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// Grid levels per unknown and refinement round.
    pub levels: usize,
    /// Number of zoom rounds after the first full grid.
    pub rounds: usize,
    /// Half-width of the initial plastic-strain search box around D_prev.
    pub d_radius: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { levels: 7, rounds: 18, d_radius: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub mesh: MeshSpec,
    pub material: MaterialParams,
    #[serde(default)]
    pub loading: LoadingSpec,
    pub time: TimeGrid,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub verification: VerificationConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
}

/// Reads and validates a scenario file.
pub fn parse_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
    Scenario::from_toml_str(&text)
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        let v = s.violations();
        if v.is_empty() {
            Ok(s)
        } else {
            Err(ScenarioError::Validation(v))
        }
    }

    /// Canonical text form; parsing it gives back an equal scenario.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Every violated assumption, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let m = &self.mesh;
        let dim = m.dim;
        if !(1..=2).contains(&dim) {
            v.push(format!("mesh.dim = {dim} is not supported (expected 1 or 2)"));
            return v;
        }
        if m.extents.len() != dim || m.subdivisions.len() != dim {
            v.push(format!("mesh.extents and mesh.subdivisions need {dim} entries"));
        }
        if m.extents.iter().any(|e| !(*e > 0.0)) {
            v.push("mesh.extents must be positive".into());
        }
        if m.subdivisions.contains(&0) {
            v.push("mesh.subdivisions must be >= 1".into());
        }
        if m.dirichlet.is_empty() {
            v.push("mesh.dirichlet is empty: the Dirichlet boundary must be nonempty".into());
        }
        for f in m.dirichlet.iter().chain(&self.loading.traction_facets) {
            if dim == 1 && matches!(f, Facet::Top | Facet::Bottom) {
                v.push(format!("facet {f:?} does not exist in 1D"));
            }
        }
        v.extend(self.material.violations(dim));
        let l = &self.loading;
        if !l.dirichlet_gradient.is_empty() && l.dirichlet_gradient.len() != dim * dim {
            v.push(format!("loading.dirichlet_gradient needs {} entries (row-major d×d)", dim * dim));
        }
        for (name, vec) in [("loading.volume_force", &l.volume_force), ("loading.traction", &l.traction)] {
            if !vec.is_empty() && vec.len() != dim {
                v.push(format!("{name} needs {dim} entries"));
            }
        }
        if !l.traction_facets.is_empty() && l.traction.is_empty() {
            v.push("loading.traction_facets given without loading.traction".into());
        }
        v.extend(l.dirichlet_profile.violations("loading.dirichlet_profile"));
        v.extend(l.force_profile.violations("loading.force_profile"));
        if let Some(b) = l.blend_width {
            if !(b >= 0.0) {
                v.push(format!("loading.blend_width = {b} must be >= 0"));
            }
        }
        v.extend(self.time.violations());
        if !(0.0..=1.0).contains(&self.initial.chi) {
            v.push(format!("initial.chi = {} must lie in [0, 1]", self.initial.chi));
        }
        if !self.initial.d.is_empty() {
            if self.initial.d.len() != n_components(dim) {
                v.push(format!("initial.d needs {} components", n_components(dim)));
            } else {
                let d = SymTensor2::from_components(dim, &self.initial.d).expect("length checked");
                let p = &self.material;
                if !p.subspace.contains(&d, 1e-12) {
                    v.push("initial.d is not in the subspace S".into());
                } else if !p.k_set.contains(&d) {
                    v.push("initial.d is outside K".into());
                }
            }
        }
        v.extend(self.solver.violations());
        let ver = &self.verification;
        for (name, x) in
            [("drop_delta", ver.drop_delta), ("recovery_delta", ver.recovery_delta), ("chi_scale", ver.chi_scale), ("d_scale", ver.d_scale)]
        {
            if !(x >= 0.0) {
                v.push(format!("verification.{name} = {x} must be >= 0"));
            }
        }
        if ver.per_family == 0 {
            v.push("verification.per_family must be >= 1".into());
        }
        if !(ver.stability_tol > 0.0 && ver.balance_tol > 0.0) {
            v.push("verification tolerances must be > 0".into());
        }
        if self.oracle.levels < 2 {
            v.push("oracle.levels must be >= 2".into());
        }
        if !(self.oracle.d_radius >= 0.0) {
            v.push("oracle.d_radius must be >= 0".into());
        }
        v
    }

    pub fn blend_width(&self) -> f64 {
        self.loading.blend_width.unwrap_or(2.0 * self.time.step())
    }

    pub fn build_model(&self) -> Result<Model, ScenarioError> {
        let v = self.violations();
        if !v.is_empty() {
            return Err(ScenarioError::Validation(v));
        }
        let dim = self.mesh.dim;
        let mesh = build_mesh(dim, &self.mesh.extents, &self.mesh.subdivisions, &self.mesh.dirichlet)?;
        let l = &self.loading;
        let or_zero = |v: &Vec<f64>, n: usize| if v.is_empty() { vec![0.0; n] } else { v.clone() };
        let blend = self.blend_width();
        let loading = Loading::new(
            &mesh,
            Profile::resolve(&l.dirichlet_profile, blend),
            or_zero(&l.dirichlet_gradient, dim * dim),
            Profile::resolve(&l.force_profile, blend),
            &or_zero(&l.volume_force, dim),
            &or_zero(&l.traction, dim),
            &l.traction_facets,
        );
        Ok(Model::new(mesh, Material::new(self.material.clone(), dim), loading)?)
    }

    /// Initial (χ, D) with zero displacement; the solver re-solves u.
    pub fn initial_state(&self, model: &Model) -> StateFields {
        let mut q = StateFields::sound(model.mesh());
        q.chi.iter_mut().for_each(|c| *c = self.initial.chi);
        if !self.initial.d.is_empty() {
            let d = SymTensor2::from_components(self.mesh.dim, &self.initial.d).expect("validated");
            q.d.iter_mut().for_each(|x| *x = d);
        }
        q
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[mesh]
dim = 1
extents = [1.0]
subdivisions = [4]
dirichlet = ["left"]

[material]
lame_lambda = 0.0
lame_mu = 0.5
k_min = 0.5
w = 0.1
alpha = 0.01
mu_diss = 1.5
nu_diss = 0.05

[time]
horizon = 1.0
n_steps = 10
"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let s = Scenario::from_toml_str(MINIMAL).unwrap();
        assert_eq!(s.material.q, 2.0);
        assert_eq!(s.initial.chi, 1.0);
        assert_eq!(s.solver, SolverConfig::default());
        assert!((s.blend_width() - 0.2).abs() < 1e-15);
        s.build_model().unwrap();
    }

    #[test]
    fn roundtrip_is_identity() {
        let s = Scenario::from_toml_str(MINIMAL).unwrap();
        let again = Scenario::from_toml_str(&s.to_toml_string()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = MINIMAL.replace("k_min = 0.5", "k_min = 0.5\nkmin = 0.5");
        assert!(matches!(Scenario::from_toml_str(&text), Err(ScenarioError::Parse(_))));
    }

    #[test]
    fn all_violations_are_reported() {
        let text = MINIMAL.replace("k_min = 0.5", "k_min = 0.0\nq = 0.5").replace("mu_diss = 1.5", "mu_diss = -1.0");
        match Scenario::from_toml_str(&text) {
            Err(ScenarioError::Validation(v)) => {
                assert_eq!(v.len(), 3, "{v:?}");
                assert!(v.iter().any(|m| m.contains("growth condition")));
            }
            other => panic!("{other:?}"),
        }
    }
}
