//! A-posteriori certification of discrete trajectories: dissipation
//! accounting, sampled global stability, the two-sided energy balance, the
//! structural conditions with explicit constants, and the cleavage reduction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::constitutive::Material;
use crate::fem::{FemError, Model, StateFields};
use crate::scenario::VerificationConfig;
use crate::solver::Trajectory;
use crate::sparse::conjugate_gradient;
use crate::tensor::{ConvexSetK, SubspaceS, SymTensor2, Tensor4};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnergeticsError {
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error("step range [{from}, {to}] is invalid for a trajectory with {len} stored states")]
    Range { from: usize, to: usize, len: usize },
    #[error("configuration error: {0}")]
    Configuration(String),
}

/// D(z₁, z₂) = R(z₂ − z₁) with lumped quadrature; `u` is ignored.
pub fn dissipation_distance(model: &Model, z1: &StateFields, z2: &StateFields) -> Result<f64, EnergeticsError> {
    model.check_shape(z1)?;
    model.check_shape(z2)?;
    Ok(model.dissipation(&z1.chi, &z1.d, &z2.chi, &z2.d))
}

/// Total dissipation between stored states `from` and `to` (inclusive
/// indices), summed over consecutive pairs.
pub fn diss_along(model: &Model, traj: &Trajectory, from: usize, to: usize) -> Result<f64, EnergeticsError> {
    if from > to || to >= traj.len() {
        return Err(EnergeticsError::Range { from, to, len: traj.len() });
    }
    let mut total = 0.0;
    for k in from + 1..=to {
        total += dissipation_distance(model, &traj.records[k - 1].state, &traj.records[k].state)?;
    }
    Ok(total)
}

/// Competitor family used by [`stability_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CompetitorKind {
    /// χ̃ = max(0, χ − δ_j) with δ_j spread over (0, delta].
    UniformDamageDrop { delta: f64 },
    /// χ̃ = min{χ, max{0, χ̂ − δ_j}} for a seeded random target χ̂ ≤ χ.
    Recovery { delta: f64 },
    /// Random downward damage perturbation on a random node subset.
    RandomPerturbation { scale: f64 },
    /// Random plastic-strain perturbation projected onto K ∩ S.
    PlasticPerturbation { scale: f64 },
    /// z unchanged; the exact elastic minimizer and random displacement
    /// perturbations of it.
    ElasticRebalance { scale: f64 },
}

impl CompetitorKind {
    pub fn name(&self) -> &'static str {
        match self {
            CompetitorKind::UniformDamageDrop { .. } => "uniform-damage-drop",
            CompetitorKind::Recovery { .. } => "recovery",
            CompetitorKind::RandomPerturbation { .. } => "random-perturbation",
            CompetitorKind::PlasticPerturbation { .. } => "d-perturbation",
            CompetitorKind::ElasticRebalance { .. } => "elastic-rebalance",
        }
    }

    fn size(&self) -> f64 {
        match *self {
            CompetitorKind::UniformDamageDrop { delta } | CompetitorKind::Recovery { delta } => delta,
            CompetitorKind::RandomPerturbation { scale }
            | CompetitorKind::PlasticPerturbation { scale }
            | CompetitorKind::ElasticRebalance { scale } => scale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompetitorSpec {
    pub kind: CompetitorKind,
    pub count: usize,
    pub seed: u64,
}

impl CompetitorSpec {
    /// The five standard families with `per_family` members each.
    pub fn families(cfg: &VerificationConfig) -> Vec<Self> {
        let kinds = [
            CompetitorKind::UniformDamageDrop { delta: cfg.drop_delta },
            CompetitorKind::Recovery { delta: cfg.recovery_delta },
            CompetitorKind::RandomPerturbation { scale: cfg.chi_scale },
            CompetitorKind::PlasticPerturbation { scale: cfg.d_scale },
            CompetitorKind::ElasticRebalance { scale: cfg.d_scale },
        ];
        kinds
            .iter()
            .enumerate()
            .map(|(f, &kind)| CompetitorSpec { kind, count: cfg.per_family, seed: cfg.seed.wrapping_add(f as u64) })
            .collect()
    }

    pub fn violations(&self) -> Vec<String> {
        let s = self.kind.size();
        if s >= 0.0 && s.is_finite() {
            Vec::new()
        } else {
            vec![format!("{}: size {s} must be finite and >= 0", self.kind.name())]
        }
    }
}

/// Sizes from `top` down to `top·1e−6`, geometrically spaced.
fn log_spread(top: f64, j: usize, n: usize) -> f64 {
    if n <= 1 {
        return top;
    }
    top * 10f64.powf(-6.0 * j as f64 / (n - 1) as f64)
}

fn random_tensor(rng: &mut ChaCha8Rng, dim: usize, sub: SubspaceS) -> SymTensor2 {
    let mut t = SymTensor2::zeros(dim);
    for c in t.components_mut() {
        *c = rng.gen_range(-1.0..=1.0);
    }
    sub.project(&t)
}

/// Member `j` of a family as (χ̃, D̃, displacement offset). The offset is set
/// only for the elastic family: empty for the exact re-solve, otherwise added
/// to it.
fn generate(model: &Model, q: &StateFields, spec: &CompetitorSpec, j: usize) -> (Vec<f64>, Vec<SymTensor2>, Option<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(j as u64);
    let p = model.material().params();
    let n = spec.count;
    let mut chi = q.chi.clone();
    let mut d = q.d.clone();
    match spec.kind {
        CompetitorKind::UniformDamageDrop { delta } => {
            let frac = (j + 1) as f64 / n as f64;
            let dj = delta * frac * frac * frac;
            chi.iter_mut().for_each(|c| *c = (*c - dj).max(0.0));
        }
        CompetitorKind::Recovery { delta } => {
            let depth: f64 = rng.gen_range(0.0..=1.0);
            let dj = log_spread(delta, j, n);
            for c in chi.iter_mut() {
                let target = *c * (1.0 - depth * rng.gen::<f64>());
                *c = c.min((target - dj).max(0.0));
            }
        }
        CompetitorKind::RandomPerturbation { scale } => {
            let s = log_spread(scale, j, n);
            let density: f64 = rng.gen_range(0.1..=1.0);
            for c in chi.iter_mut() {
                if rng.gen::<f64>() < density {
                    *c = (*c - s * rng.gen::<f64>()).max(0.0);
                }
            }
        }
        CompetitorKind::PlasticPerturbation { scale } => {
            let s = log_spread(scale, j, n);
            let density: f64 = rng.gen_range(0.1..=1.0);
            for x in d.iter_mut() {
                if rng.gen::<f64>() < density {
                    let step = random_tensor(&mut rng, model.dim(), p.subspace);
                    *x = p.k_set.project(&p.subspace.project(&x.axpy(s, &step)));
                }
            }
        }
        CompetitorKind::ElasticRebalance { scale } => {
            if j == 0 {
                return (chi, d, Some(Vec::new()));
            }
            let s = log_spread(scale, j - 1, n.saturating_sub(1));
            let mut du = vec![0.0; q.u.len()];
            for &g in model.free_dofs() {
                du[g] = s * rng.gen_range(-1.0..=1.0);
            }
            return (chi, d, Some(du));
        }
    }
    (chi, d, None)
}

/// E(t, q̃) + R(z̃ − z) − E(t, q).
pub fn stability_margin(model: &Model, t: f64, q: &StateFields, competitor: &StateFields) -> f64 {
    let r = model.dissipation(&q.chi, &q.d, &competitor.chi, &competitor.d);
    if r == f64::INFINITY {
        return f64::INFINITY;
    }
    let e0 = model.energy_unchecked(t, q).total;
    let e1 = model.energy_unchecked(t, competitor).total;
    e1 + r - e0
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub t: f64,
    pub energy: f64,
    pub min_margin: f64,
    /// Family name and member index of the worst competitor.
    pub worst: Option<(&'static str, usize)>,
    pub worst_state: Option<StateFields>,
    pub evaluated: usize,
    pub skipped: usize,
    /// ε_stab = stability_tol·(1 + |E(t, q)|)
    pub tolerance: f64,
}

impl StabilityReport {
    pub fn violated(&self) -> bool {
        self.min_margin < -self.tolerance
    }
}

/// Samples competitors from `specs` around `q` at time `t`. Competitors that
/// change z get their displacement re-solved.
pub fn stability_check(
    model: &Model,
    t: f64,
    q: &StateFields,
    specs: &[CompetitorSpec],
    stability_tol: f64,
) -> Result<StabilityReport, EnergeticsError> {
    model.check_shape(q)?;
    if let Some(msg) = model.infeasibility(&q.chi, &q.d) {
        return Err(FemError::Infeasible(msg).into());
    }
    for s in specs {
        if let Some(v) = s.violations().into_iter().next() {
            return Err(EnergeticsError::Configuration(v));
        }
    }
    let energy = model.energy_unchecked(t, q).total;
    let jobs: Vec<(usize, usize)> = specs.iter().enumerate().flat_map(|(f, s)| (0..s.count).map(move |j| (f, j))).collect();
    let results: Vec<Option<(f64, StateFields)>> = jobs
        .par_iter()
        .map(|&(f, j)| {
            let (chi, d, du) = generate(model, q, &specs[f], j);
            let u = match du {
                Some(du) => {
                    let base = model.elastic_solve_from(t, &chi, &d, Some(&q.u)).ok()?.0;
                    if du.is_empty() {
                        base
                    } else {
                        base.iter().zip(&du).map(|(a, b)| a + b).collect()
                    }
                }
                None => model.elastic_solve_from(t, &chi, &d, Some(&q.u)).ok()?.0,
            };
            let c = StateFields { u, chi, d };
            Some((stability_margin(model, t, q, &c), c))
        })
        .collect();
    let mut report = StabilityReport {
        t,
        energy,
        min_margin: f64::INFINITY,
        worst: None,
        worst_state: None,
        evaluated: 0,
        skipped: 0,
        tolerance: stability_tol * (1.0 + energy.abs()),
    };
    for (&(f, j), r) in jobs.iter().zip(results) {
        match r {
            Some((m, c)) if !m.is_nan() => {
                report.evaluated += 1;
                if m < report.min_margin {
                    report.min_margin = m;
                    report.worst = Some((specs[f].kind.name(), j));
                    report.worst_state = Some(c);
                }
            }
            _ => report.skipped += 1,
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceStep {
    pub step: usize,
    pub t: f64,
    pub energy: f64,
    pub diss_cum: f64,
    /// ∫₀^{t_k} ∂ₜE, each interval by the trapezoidal rule at its left state.
    pub power_integral: f64,
    /// E(t_k, q_k) + Diss[0, t_k] − E(0, q₀) − power_integral; the step
    /// minimality of the scheme makes this non-positive up to solver error.
    pub upper_gap: f64,
    /// Same with the right states in the quadrature; non-negative when every
    /// stored state is stable.
    pub lower_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceReport {
    pub steps: Vec<BalanceStep>,
}

impl BalanceReport {
    pub fn final_gap(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.upper_gap)
    }

    /// Largest upper gap relative to 1 + |E|.
    pub fn max_relative_upper(&self) -> f64 {
        self.steps.iter().map(|s| s.upper_gap / (1.0 + s.energy.abs())).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Recomputes energies, dissipation and power integrals from the stored
/// states and times alone.
pub fn energy_balance_check(model: &Model, traj: &Trajectory) -> Result<BalanceReport, EnergeticsError> {
    let mut steps = Vec::with_capacity(traj.len());
    let Some(first) = traj.records.first() else {
        return Ok(BalanceReport { steps });
    };
    model.check_shape(&first.state)?;
    let e0 = model.energy_unchecked(first.t, &first.state).total;
    let (mut diss, mut left, mut right) = (0.0, 0.0, 0.0);
    steps.push(BalanceStep { step: 0, t: first.t, energy: e0, diss_cum: 0.0, power_integral: 0.0, upper_gap: 0.0, lower_gap: 0.0 });
    for k in 1..traj.len() {
        let (a, b) = (&traj.records[k - 1], &traj.records[k]);
        model.check_shape(&b.state)?;
        let h = 0.5 * (b.t - a.t);
        left += h * (model.power_unchecked(a.t, &a.state) + model.power_unchecked(b.t, &a.state));
        right += h * (model.power_unchecked(a.t, &b.state) + model.power_unchecked(b.t, &b.state));
        diss += model.dissipation(&a.state.chi, &a.state.d, &b.state.chi, &b.state.d);
        let e = model.energy_unchecked(b.t, &b.state).total;
        steps.push(BalanceStep {
            step: k,
            t: b.t,
            energy: e,
            diss_cum: diss,
            power_integral: left,
            upper_gap: e + diss - e0 - left,
            lower_gap: e + diss - e0 - right,
        });
    }
    Ok(BalanceReport { steps })
}

/// Unidirectionality and feasibility of every stored state.
pub fn admissibility_check(model: &Model, traj: &Trajectory) -> Result<Vec<(usize, String)>, EnergeticsError> {
    let mut out = Vec::new();
    for (k, r) in traj.records.iter().enumerate() {
        model.check_shape(&r.state)?;
        if let Some(msg) = model.infeasibility(&r.state.chi, &r.state.d) {
            out.push((k, msg));
        }
        if k > 0 {
            let prev = &traj.records[k - 1].state.chi;
            if let Some(i) = (0..prev.len()).find(|&i| r.state.chi[i] > prev[i]) {
                out.push((k, format!("damage increased at node {i}: {} -> {}", prev[i], r.state.chi[i])));
            }
        }
    }
    Ok(out)
}

/// One row of the verification report.
#[derive(Debug, Clone, PartialEq)]
pub struct StepVerification {
    pub step: usize,
    pub t: f64,
    pub energy: f64,
    pub min_margin: f64,
    pub margin_tolerance: f64,
    pub worst_competitor: Option<(&'static str, usize)>,
    pub upper_gap: f64,
    pub lower_gap: f64,
    pub diss_cum: f64,
    pub power_integral: f64,
    pub admissibility: Vec<String>,
    /// Worst competitor state, kept only when the margin is a violation.
    pub violating_competitor: Option<StateFields>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub steps: Vec<StepVerification>,
    pub balance_tol: f64,
    pub competitors_per_step: usize,
    pub conditions: Option<ConditionReport>,
}

impl VerificationReport {
    /// Human-readable findings; empty when every check passed.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        for s in &self.steps {
            for a in &s.admissibility {
                v.push(format!("step {}: {a}", s.step));
            }
            if s.min_margin < -s.margin_tolerance {
                let (fam, j) = s.worst_competitor.unwrap_or(("?", 0));
                v.push(format!(
                    "step {}: stability margin {:.3e} below -{:.3e} (competitor {fam} #{j})",
                    s.step, s.min_margin, s.margin_tolerance
                ));
            }
            let eps = self.balance_tol * (1.0 + s.energy.abs());
            if !(s.upper_gap <= eps) {
                v.push(format!("step {}: upper energy gap {:.3e} exceeds {:.3e}", s.step, s.upper_gap, eps));
            }
        }
        if let Some(c) = &self.conditions {
            v.extend(c.failures());
        }
        v
    }

    pub fn dissipation_total(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.diss_cum)
    }
}

/// Runs admissibility, stability sampling at every stored state and the
/// energy balance.
pub fn verify_trajectory(model: &Model, traj: &Trajectory, cfg: &VerificationConfig) -> Result<VerificationReport, EnergeticsError> {
    let specs = CompetitorSpec::families(cfg);
    let balance = energy_balance_check(model, traj)?;
    let admissible = admissibility_check(model, traj)?;
    let mut steps = Vec::with_capacity(traj.len());
    for (k, rec) in traj.records.iter().enumerate() {
        let b = &balance.steps[k];
        let notes: Vec<String> = admissible.iter().filter(|(s, _)| *s == k).map(|(_, m)| m.clone()).collect();
        let feasible = model.infeasibility(&rec.state.chi, &rec.state.d).is_none();
        let (min_margin, tol, worst, competitor) = if feasible {
            let r = stability_check(model, rec.t, &rec.state, &specs, cfg.stability_tol)?;
            let competitor = if r.violated() { r.worst_state } else { None };
            (r.min_margin, r.tolerance, r.worst, competitor)
        } else {
            (f64::NAN, cfg.stability_tol * (1.0 + b.energy.abs()), None, None)
        };
        steps.push(StepVerification {
            step: k,
            t: rec.t,
            energy: b.energy,
            min_margin,
            margin_tolerance: tol,
            worst_competitor: worst,
            upper_gap: b.upper_gap,
            lower_gap: b.lower_gap,
            diss_cum: b.diss_cum,
            power_integral: b.power_integral,
            admissibility: notes,
            violating_competitor: competitor,
        });
    }
    Ok(VerificationReport {
        steps,
        balance_tol: cfg.balance_tol,
        competitors_per_step: specs.iter().map(|s| s.count).sum(),
        conditions: None,
    })
}

/// Constants of the coercivity and power-control estimates for a model on
/// [0, T]. Norms are L² norms of element-constant fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    pub k1: f64,
    pub k2: f64,
    /// sup_t ‖F(t)‖ dual to ‖e(u)‖
    pub c_f: f64,
    pub c_f_rate: f64,
    /// sup_t ‖e_D(t)‖
    pub e_d: f64,
    pub e_d_rate: f64,
    /// W_el + G ≤ 2(E + m)
    pub m: f64,
    pub c0: f64,
    pub c1: f64,
    pub volume: f64,
    pub quartic_weight: f64,
    pub alpha: f64,
    pub horizon: f64,
}

impl DerivedConstants {
    pub fn compute(model: &Model, horizon: f64) -> Result<Self, EnergeticsError> {
        let mat = model.material();
        let p = mat.params();
        if !(p.quartic_weight > 0.0) {
            return Err(EnergeticsError::Configuration("power control needs quartic_weight > 0".into()));
        }
        let mesh = model.mesh();
        let volume = mesh.volume();
        let loading = model.loading();
        let a = model.stiffness_matrix(&Tensor4::identity(model.dim()), &vec![1.0; mesh.n_elements()]);
        let f0 = model.restrict(&loading.force_vector);
        let mut x = vec![0.0; f0.len()];
        let dual = if f0.iter().any(|v| *v != 0.0) {
            conjugate_gradient(&a, &f0, &mut x, 1e-13, 50 * f0.len() + 100).map_err(FemError::from)?;
            f0.iter().zip(&x).map(|(f, y)| f * y).sum::<f64>().max(0.0).sqrt()
        } else {
            0.0
        };
        let (sf, sf_rate) = loading.force.bounds(horizon);
        let (sd, sd_rate) = loading.dirichlet.bounds(horizon);
        let lift = loading.lift_strain.norm() * volume.sqrt();
        let (k1, k2) = (mat.k1(), mat.k2());
        let w_g = p.quartic_weight;
        let (c_f, c_f_rate) = (sf * dual, sf_rate * dual);
        let (e_d, e_d_rate) = (sd * lift, sd_rate * lift);
        let reservoir = (1.5 * volume).sqrt();
        let m = c_f * c_f / k1 + c_f * e_d + c_f * c_f / (4.0 * w_g) + c_f * reservoir;
        let n =
            0.5 * k2 * e_d_rate * e_d_rate + c_f_rate * c_f_rate / k1 + c_f_rate * c_f_rate / (4.0 * w_g) + c_f_rate * (e_d + reservoir);
        Ok(Self { k1, k2, c_f, c_f_rate, e_d, e_d_rate, m, c0: m + n / 3.0, c1: 3.0, volume, quartic_weight: w_g, alpha: p.alpha, horizon })
    }

    /// Lipschitz constant of t ↦ E(t, q) on [0, T] given E(s, q).
    pub fn time_lipschitz(&self, energy: f64) -> f64 {
        self.c1 * (self.c1 * self.horizon).exp() * (energy + self.c0)
    }
}

/// Worst measured ratios of the structural inequalities; every ratio must
/// stay at or below 1 and every count at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub samples: usize,
    pub constants: DerivedConstants,
    /// |Ξ(χ, D)| > |D| occurrences.
    pub xi_bound_failures: usize,
    /// max K₁|e|² / e:𝕂(χ):e and max e:𝕂(χ):e / (K₂|e|²).
    pub stiffness_lower_ratio: f64,
    pub stiffness_upper_ratio: f64,
    pub h_min: f64,
    /// max |∂ₜE| / (c₁(c₀ + E)).
    pub power_ratio: f64,
    /// max (W_el + G) / (2(E + m)).
    pub sublevel_ratio: f64,
    /// max ‖e(u)‖ / (√(2W_el/K₁) + ‖e_D‖ + ‖D̄‖).
    pub strain_ratio: f64,
    /// max α‖∇χ‖² / (2(E + m)).
    pub gradient_ratio: f64,
    /// max |E(t,q) − E(s,q)| / (c_E |t − s|).
    pub lipschitz_ratio: f64,
    /// Pairs z₁ ≠ z₂ with D(z₁, z₂) = 0, plus pairs z with D(z, z) ≠ 0.
    pub identity_failures: usize,
    /// max D(z₁,z₃) − D(z₁,z₂) − D(z₂,z₃).
    pub triangle_excess: f64,
    /// max D(z, lim z̃_j) − D(z, z̃_J) − R₀(lim z̃_j − z̃_J) on converging
    /// sequences, R₀ being R without the monotonicity indicator.
    pub lsc_excess: f64,
    /// max ‖Ξ_j − Ξ‖ / (‖D_j − D‖ + ‖(χ − χ_j)D‖).
    pub xi_continuity_ratio: f64,
    /// max ‖Ξ_J − Ξ‖ / ‖Ξ_1 − Ξ‖ between the last and first sequence member.
    pub xi_continuity_tail: f64,
}

impl ConditionReport {
    pub fn failures(&self) -> Vec<String> {
        let mut v = Vec::new();
        let ratio_checks = [
            ("K1 lower stiffness bound", self.stiffness_lower_ratio),
            ("K2 upper stiffness bound", self.stiffness_upper_ratio),
            ("power control |dE/dt| <= c1 (c0 + E)", self.power_ratio),
            ("energy sublevel bound", self.sublevel_ratio),
            ("strain bound on sublevels", self.strain_ratio),
            ("damage gradient bound on sublevels", self.gradient_ratio),
            ("time Lipschitz bound", self.lipschitz_ratio),
            ("inelastic strain continuity bound", self.xi_continuity_ratio),
        ];
        for (name, r) in ratio_checks {
            if !(r <= 1.0 + 1e-12) {
                v.push(format!("{name}: worst ratio {r:.6e} > 1"));
            }
        }
        if self.xi_bound_failures > 0 {
            v.push(format!("|Xi| <= |D| failed on {} samples", self.xi_bound_failures));
        }
        if self.h_min < 0.0 {
            v.push(format!("H took the negative value {:.3e}", self.h_min));
        }
        if self.identity_failures > 0 {
            v.push(format!("dissipation distance identity of indiscernibles failed {} times", self.identity_failures));
        }
        if self.triangle_excess > 1e-12 {
            v.push(format!("dissipation triangle inequality violated by {:.3e}", self.triangle_excess));
        }
        if self.lsc_excess > 1e-9 {
            v.push(format!("dissipation lower semicontinuity violated by {:.3e}", self.lsc_excess));
        }
        if self.xi_continuity_tail > 1e-3 {
            v.push(format!("inelastic strain sequence did not converge (tail {:.3e})", self.xi_continuity_tail));
        }
        v
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }
}

struct Sampler<'a> {
    model: &'a Model,
    rng: ChaCha8Rng,
}

impl Sampler<'_> {
    fn chi(&mut self) -> Vec<f64> {
        let n = self.model.mesh().n_nodes();
        let mode: f64 = self.rng.gen();
        (0..n)
            .map(|_| {
                let c: f64 = self.rng.gen();
                if mode < 0.2 {
                    c.round()
                } else {
                    c
                }
            })
            .collect()
    }

    fn d(&mut self) -> Vec<SymTensor2> {
        let p = self.model.material().params();
        let scale = 10f64.powf(self.rng.gen_range(-3.0..=0.5));
        let dim = self.model.dim();
        (0..self.model.mesh().n_nodes()).map(|_| p.k_set.project(&random_tensor(&mut self.rng, dim, p.subspace).scale(scale))).collect()
    }

    fn u(&mut self) -> Vec<f64> {
        let scale = 10f64.powf(self.rng.gen_range(-3.0..=1.0));
        let mut u = vec![0.0; self.model.mesh().n_nodes() * self.model.dim()];
        for &g in self.model.free_dofs() {
            u[g] = scale * self.rng.gen_range(-1.0..=1.0);
        }
        u
    }

    fn state(&mut self) -> StateFields {
        StateFields { u: self.u(), chi: self.chi(), d: self.d() }
    }

    /// A state whose damage lies below that of `z` node-wise.
    fn below(&mut self, z: &StateFields) -> StateFields {
        let mut w = self.state();
        for (c, &zc) in w.chi.iter_mut().zip(&z.chi) {
            *c = if self.rng.gen::<f64>() < 0.3 { zc } else { zc * self.rng.gen::<f64>() };
        }
        w
    }
}

/// Element-barycentre fields: (χ̄, D̄, e(u)) per element.
fn element_values(model: &Model, q: &StateFields) -> Vec<(f64, SymTensor2, SymTensor2)> {
    model
        .mesh()
        .elements()
        .iter()
        .enumerate()
        .map(|(idx, e)| {
            let nodes = e.nodes();
            let inv = 1.0 / nodes.len() as f64;
            let chi = nodes.iter().map(|&a| q.chi[a]).sum::<f64>() * inv;
            let mut d = SymTensor2::zeros(model.dim());
            for &a in nodes {
                d += q.d[a];
            }
            (chi, d.scale(inv), model.strain(idx, &q.u))
        })
        .collect()
}

fn lumped_norm_l1(mass: &[f64], f: impl Fn(usize) -> f64) -> f64 {
    mass.iter().enumerate().map(|(i, m)| m * f(i)).sum()
}

fn lumped_norm(mass: &[f64], f: impl Fn(usize) -> f64) -> f64 {
    mass.iter().enumerate().map(|(i, m)| m * f(i)).sum::<f64>().sqrt()
}

/// Samples random feasible states and checks every structural inequality
/// with the constants of [`DerivedConstants`].
pub fn condition_suite(model: &Model, horizon: f64, samples: usize, seed: u64) -> Result<ConditionReport, EnergeticsError> {
    if samples == 0 {
        return Err(EnergeticsError::Configuration("condition suite needs at least one sample".into()));
    }
    let constants = DerivedConstants::compute(model, horizon)?;
    let mat = model.material();
    let p = mat.params();
    let dim = model.dim();
    let mass = model.mesh().lumped_mass();
    let mut s = Sampler { model, rng: ChaCha8Rng::seed_from_u64(seed) };
    let mut rep = ConditionReport {
        samples,
        constants,
        xi_bound_failures: 0,
        stiffness_lower_ratio: 0.0,
        stiffness_upper_ratio: 0.0,
        h_min: f64::INFINITY,
        power_ratio: 0.0,
        sublevel_ratio: 0.0,
        strain_ratio: 0.0,
        gradient_ratio: 0.0,
        lipschitz_ratio: 0.0,
        identity_failures: 0,
        triangle_excess: f64::NEG_INFINITY,
        lsc_excess: f64::NEG_INFINITY,
        xi_continuity_ratio: 0.0,
        xi_continuity_tail: 0.0,
    };
    let c = &constants;
    for _ in 0..samples {
        // pointwise constitutive bounds
        let chi: f64 = s.rng.gen();
        let dt = random_tensor(&mut s.rng, dim, p.subspace).scale(10f64.powf(s.rng.gen_range(-3.0..=1.0)));
        if crate::constitutive::xi(chi, &dt).norm() > dt.norm() {
            rep.xi_bound_failures += 1;
        }
        let e = random_tensor(&mut s.rng, dim, SubspaceS::FullSymmetric);
        let quad = mat.degradation(chi) * mat.base_stiffness().quadratic(&e);
        let e2 = e.norm_sq();
        if e2 > 0.0 {
            rep.stiffness_lower_ratio = rep.stiffness_lower_ratio.max(c.k1 * e2 / quad);
            rep.stiffness_upper_ratio = rep.stiffness_upper_ratio.max(quad / (c.k2 * e2));
        }
        rep.h_min = rep.h_min.min(mat.h(chi, &dt));

        // energy-level inequalities
        let q = s.state();
        let t = s.rng.gen_range(0.0..=horizon);
        let parts = model.energy_unchecked(t, &q);
        let energy = parts.total;
        let work: f64 = model.force(t).iter().zip(&q.u).map(|(f, u)| f * u).sum();
        let w_el = parts.w_elastic_minus_work + work;
        let power = model.power_unchecked(t, &q);
        rep.power_ratio = rep.power_ratio.max(power.abs() / (c.c1 * (c.c0 + energy)));
        rep.sublevel_ratio = rep.sublevel_ratio.max((w_el + parts.g_plastic) / (2.0 * (energy + c.m)));
        let elems = element_values(model, &q);
        let measures: Vec<f64> = model.mesh().elements().iter().map(|e| e.measure).collect();
        let strain = elems.iter().zip(&measures).map(|((_, _, e), m)| m * e.norm_sq()).sum::<f64>().sqrt();
        let d_bar = elems.iter().zip(&measures).map(|((_, d, _), m)| m * d.norm_sq()).sum::<f64>().sqrt();
        let e_d_now = model.loading().e_d(t).norm() * c.volume.sqrt();
        let strain_bound = (2.0 * w_el.max(0.0) / c.k1).sqrt() + e_d_now + d_bar;
        if strain > 0.0 {
            rep.strain_ratio = rep.strain_ratio.max(strain / strain_bound);
        }
        let grad_sq: f64 = model
            .mesh()
            .elements()
            .iter()
            .map(|el| {
                let mut g = [0.0; 2];
                for (a, &node) in el.nodes().iter().enumerate() {
                    for k in 0..dim {
                        g[k] += q.chi[node] * el.grad(a)[k];
                    }
                }
                el.measure * g[..dim].iter().map(|x| x * x).sum::<f64>()
            })
            .sum();
        rep.gradient_ratio = rep.gradient_ratio.max(c.alpha * grad_sq / (2.0 * (energy + c.m)));
        let t2 = s.rng.gen_range(0.0..=horizon);
        if t2 != t {
            let e2 = model.energy_unchecked(t2, &q).total;
            rep.lipschitz_ratio = rep.lipschitz_ratio.max((e2 - energy).abs() / (c.time_lipschitz(energy) * (t2 - t).abs()));
        }

        // quasi-distance
        let z1 = s.state();
        let z2 = s.below(&z1);
        let z3 = s.below(&z2);
        let dist = |a: &StateFields, b: &StateFields| model.dissipation(&a.chi, &a.d, &b.chi, &b.d);
        if dist(&z1, &z1) != 0.0 {
            rep.identity_failures += 1;
        }
        if (z1.chi != z2.chi || z1.d != z2.d) && dist(&z1, &z2) == 0.0 {
            rep.identity_failures += 1;
        }
        let random3 = s.state();
        for (a, b, cc) in [(&z1, &z2, &z3), (&z1, &random3, &z3), (&z2, &z1, &z3)] {
            let lhs = dist(a, cc);
            let rhs = dist(a, b) + dist(b, cc);
            if rhs.is_finite() {
                rep.triangle_excess = rep.triangle_excess.max(lhs - rhs);
            }
        }
        let (lim, far) = (z2.clone(), s.below(&z1));
        let j = 1e6;
        let zj = StateFields {
            u: lim.u.clone(),
            chi: lim.chi.iter().zip(&far.chi).map(|(l, f)| l + (f - l) / j).collect(),
            d: lim.d.iter().zip(&far.d).map(|(l, f)| l.axpy(1.0 / j, &(*f - *l))).collect(),
        };
        let (dl, dj) = (dist(&z1, &lim), dist(&z1, &zj));
        if dl.is_finite() {
            let gap = lumped_norm_l1(mass, |i| p.nu_diss * (lim.chi[i] - zj.chi[i]).abs() + p.mu_diss * (lim.d[i] - zj.d[i]).norm());
            rep.lsc_excess = rep.lsc_excess.max(dl - dj - gap - 1e-12 * (1.0 + dl.abs()));
        }

        // Ξ continuity along χ_j → χ, D_j → D
        let base = s.state();
        let dir = s.state();
        let xi_of = |chi: &[f64], d: &[SymTensor2], i: usize| crate::constitutive::xi(chi[i], &d[i]);
        let mut first = 0.0;
        let mut last = 0.0;
        for j in 1..=6 {
            let h = 10f64.powi(-j);
            let chi_j: Vec<f64> = base.chi.iter().zip(&dir.chi).map(|(a, b)| a + h * (b - a)).collect();
            let d_j: Vec<SymTensor2> = base.d.iter().zip(&dir.d).map(|(a, b)| p.k_set.project(&a.axpy(h, &(*b - *a)))).collect();
            let lhs = lumped_norm(mass, |i| (xi_of(&chi_j, &d_j, i) - xi_of(&base.chi, &base.d, i)).norm_sq());
            let rhs = lumped_norm(mass, |i| (d_j[i] - base.d[i]).norm_sq())
                + lumped_norm(mass, |i| base.d[i].scale(base.chi[i] - chi_j[i]).norm_sq());
            if lhs > 0.0 {
                rep.xi_continuity_ratio = rep.xi_continuity_ratio.max(lhs / rhs);
            }
            if j == 1 {
                first = lhs;
            }
            last = lhs;
        }
        if first > 0.0 {
            rep.xi_continuity_tail = rep.xi_continuity_tail.max(last / first);
        }
    }
    Ok(rep)
}

/// Pointwise input of the cleavage reduction: damage and total strain
/// e(u) + e_D.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CleavageSample {
    pub chi: f64,
    pub strain: SymTensor2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CleavageReport {
    pub samples: usize,
    /// max |D* − (e(u)+e_D)| / (1 + |e(u)+e_D|)
    pub minimizer_error: f64,
    /// max relative deviation of the reduced density from ½χ²|e(u)+e_D|².
    pub density_error: f64,
    /// max over samples of the ∞-distance between the grid minimizer and D*.
    pub grid_distance: f64,
    /// Grid spacing per component.
    pub grid_spacing: f64,
    /// min over samples of (grid minimum − closed-form minimum); must be ≥ 0.
    pub grid_excess: f64,
}

impl CleavageReport {
    pub fn passed(&self, rel_tol: f64) -> bool {
        self.minimizer_error <= rel_tol
            && self.density_error <= rel_tol
            && self.grid_distance <= self.grid_spacing * (1.0 + 1e-9)
            && self.grid_excess >= -1e-12
    }
}

/// Minimizes the elastic density of the fully damaged state over D in closed
/// form and evaluates the reduced density at each sample's damage.
pub fn cleavage_reduction_check(
    material: &Material,
    samples: &[CleavageSample],
    grid_levels: usize,
) -> Result<CleavageReport, EnergeticsError> {
    let p = material.params();
    if p.subspace != SubspaceS::FullSymmetric {
        return Err(EnergeticsError::Configuration("cleavage reduction needs the full symmetric subspace".into()));
    }
    if p.k_set != ConvexSetK::AllOfS {
        return Err(EnergeticsError::Configuration("cleavage reduction needs K = S".into()));
    }
    if p.lame_lambda != 0.0 || p.lame_mu != 0.5 || p.k_min != 1.0 {
        return Err(EnergeticsError::Configuration(
            "cleavage reduction needs the identity stiffness (lame_lambda = 0, lame_mu = 0.5, k_min = 1)".into(),
        ));
    }
    if grid_levels < 3 {
        return Err(EnergeticsError::Configuration("grid search needs at least 3 levels".into()));
    }
    let dim = material.dim();
    let mut rep = CleavageReport {
        samples: samples.len(),
        minimizer_error: 0.0,
        density_error: 0.0,
        grid_distance: 0.0,
        grid_spacing: 0.0,
        grid_excess: f64::INFINITY,
    };
    let density = |chi: f64, d: &SymTensor2, e: &SymTensor2| {
        material.elastic_density(chi, d, e).map_err(|e| EnergeticsError::Configuration(e.to_string()))
    };
    for s in samples {
        if s.strain.dim() != dim {
            return Err(EnergeticsError::Configuration(format!("sample strain has dimension {}, expected {dim}", s.strain.dim())));
        }
        // stationarity of ½(e − D):𝕂(0):(e − D) in D ∈ S: 𝕂(0)(D − e) = 0
        let k0 = material.eval_stiffness(0.0).map_err(|e| EnergeticsError::Configuration(e.to_string()))?;
        let d_star = solve_mandel(&k0, &k0.apply(&s.strain));
        let scale = 1.0 + s.strain.norm();
        rep.minimizer_error = rep.minimizer_error.max((d_star - s.strain).norm() / scale);
        let reduced = density(s.chi, &d_star, &s.strain)?;
        let expected = 0.5 * s.chi * s.chi * s.strain.norm_sq();
        rep.density_error = rep.density_error.max((reduced - expected).abs() / expected.max(1e-12 * scale * scale));

        // exhaustive grid over D around the strain, never containing it
        let radius = 1.0 + s.strain.max_abs();
        let h = 2.0 * radius / (grid_levels - 1) as f64;
        rep.grid_spacing = h;
        let nc = s.strain.len();
        let offset = 0.37 * h;
        let total = grid_levels.pow(nc as u32);
        let mut best = (f64::INFINITY, SymTensor2::zeros(dim));
        for idx in 0..total {
            let mut r = idx;
            let mut d = SymTensor2::zeros(dim);
            for (c, x) in d.components_mut().iter_mut().enumerate() {
                let k = r % grid_levels;
                r /= grid_levels;
                *x = s.strain.components()[c] - radius + offset + k as f64 * h;
            }
            let f = density(0.0, &d, &s.strain)?;
            if f < best.0 {
                best = (f, d);
            }
        }
        let closed = density(0.0, &d_star, &s.strain)?;
        rep.grid_excess = rep.grid_excess.min(best.0 - closed);
        rep.grid_distance = rep.grid_distance.max((best.1 - d_star).max_abs());
    }
    Ok(rep)
}

/// Solves 𝕂 x = b in the Mandel basis by Gaussian elimination.
fn solve_mandel(k: &Tensor4, b: &SymTensor2) -> SymTensor2 {
    let dim = b.dim();
    let n = b.len();
    let mut a = nalgebra::DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = k.mandel(i, j);
        }
    }
    let rhs = nalgebra::DVector::from_row_slice(&b.to_mandel()[..n]);
    let x = a.lu().solve(&rhs).expect("stiffness is positive definite");
    SymTensor2::from_mandel(dim, x.as_slice())
}
