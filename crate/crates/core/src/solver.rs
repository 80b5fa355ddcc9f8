//! Time-incremental minimization of E(t_k, q) + R(z − z_{k−1}) by alternating
//! minimization: an exact elastic solve in u, then proximal-gradient steps in
//! χ and in D. Both proximal blocks work in the lumped-mass metric, so every
//! prox is closed form and node-wise.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fem::{EnergyBreakdown, FemError, GradientBlocks, Model, StateFields};
use crate::tensor::SymTensor2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("infeasible previous state: {0}")]
    Infeasible(String),
    #[error(
        "alternating minimization stalled after {sweeps} sweeps: objective {objective:.6e}, last decrease {decrease:.3e}, stationarity residual {residual:.3e}"
    )]
    Stall { sweeps: usize, objective: f64, decrease: f64, residual: f64 },
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error(transparent)]
    Fem(#[from] FemError),
}

/// Uniform partition t_k = kT/n of [0, T].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub horizon: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Self {
        Self { horizon, n_steps }
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.horizon
        } else {
            k as f64 * self.horizon / self.n_steps as f64
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.time(k)).collect()
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            v.push(format!("time horizon T = {} must be positive and finite", self.horizon));
        }
        if self.n_steps == 0 {
            v.push("n_steps must be >= 1".to_string());
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Stop once a sweep decreases the objective by at most am_tol·(1+|Φ|).
    pub am_tol: f64,
    pub am_max_sweeps: usize,
    /// First trial step of each proximal block (in the lumped-mass metric).
    pub prox_step_init: f64,
    pub backtrack_factor: f64,
    /// Proximal iterations per block and sweep.
    pub prox_max_iters: usize,
    pub stationarity_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { am_tol: 1e-14, am_max_sweeps: 1000, prox_step_init: 1.0, backtrack_factor: 0.5, prox_max_iters: 50, stationarity_tol: 1e-7 }
    }
}

impl SolverConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.am_tol > 0.0) {
            v.push(format!("solver.am_tol = {} must be > 0", self.am_tol));
        }
        if self.am_max_sweeps == 0 {
            v.push("solver.am_max_sweeps must be >= 1".into());
        }
        if !(self.prox_step_init > 0.0) {
            v.push(format!("solver.prox_step_init = {} must be > 0", self.prox_step_init));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            v.push(format!("solver.backtrack_factor = {} must lie in (0, 1)", self.backtrack_factor));
        }
        if self.prox_max_iters == 0 {
            v.push("solver.prox_max_iters must be >= 1".into());
        }
        if !(self.stationarity_tol > 0.0) {
            v.push(format!("solver.stationarity_tol = {} must be > 0", self.stationarity_tol));
        }
        v
    }
}

/// Outcome of one incremental problem.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: StateFields,
    /// E(t_k, q_k) + R(z_k − z_{k−1})
    pub objective: f64,
    /// Objective at (elastic_solve(t_k, z_{k−1}), z_{k−1}).
    pub initial_objective: f64,
    /// Objective after every sweep.
    pub sweep_objectives: Vec<f64>,
    pub sweeps: usize,
    pub residual: f64,
}

/// One stored point of a discrete trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub state: StateFields,
    pub energy: EnergyBreakdown,
    pub diss_increment: f64,
    pub diss_cum: f64,
    /// ∫₀^{t_k} ∂ₜE along the left-continuous piecewise-constant interpolant.
    pub power_integral: f64,
    /// Same integral with each interval evaluated at its right end state.
    pub power_integral_right: f64,
    pub sweeps: usize,
    pub stationarity_residual: f64,
}

impl StepRecord {
    /// E(t_k, q_k) + Diss[0, t_k] − E(0, q₀) − ∫₀^{t_k} ∂ₜE
    pub fn balance_gap(&self, e0: f64) -> f64 {
        self.energy.total + self.diss_cum - e0 - self.power_integral
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub records: Vec<StepRecord>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn initial_energy(&self) -> f64 {
        self.records.first().map_or(0.0, |r| r.energy.total)
    }

    pub fn balance_gaps(&self) -> Vec<f64> {
        let e0 = self.initial_energy();
        self.records.iter().map(|r| r.balance_gap(e0)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("step {step} (t = {t}): {source}")]
pub struct EvolutionError {
    pub step: usize,
    pub t: f64,
    pub source: SolverError,
    /// Steps completed before the failure.
    pub partial: Trajectory,
}

struct Problem<'a> {
    model: &'a Model,
    t: f64,
    chi_prev: &'a [f64],
    d_prev: &'a [SymTensor2],
    mass: &'a [f64],
}

impl Problem<'_> {
    fn objective(&self, q: &StateFields) -> f64 {
        let e = self.model.energy_unchecked(self.t, q).total;
        if !e.is_finite() {
            return f64::INFINITY;
        }
        e + self.model.dissipation(self.chi_prev, self.d_prev, &q.chi, &q.d)
    }

    fn gradient(&self, q: &StateFields) -> GradientBlocks {
        self.model.gradient_unchecked(self.t, q)
    }

    fn u_step(&self, q: &mut StateFields, phi: &mut f64) -> Result<(), FemError> {
        let (u, _) = self.model.elastic_solve_from(self.t, &q.chi, &q.d, Some(&q.u))?;
        let trial = StateFields { u, chi: q.chi.clone(), d: q.d.clone() };
        let f = self.objective(&trial);
        // the solve is exact up to the CG tolerance; never accept a rounding increase
        if f <= *phi {
            *q = trial;
            *phi = f;
        }
        Ok(())
    }

    fn chi_prox(&self, chi: &[f64], g: &[f64], tau: f64) -> Vec<f64> {
        let nu = self.model.material().params().nu_diss;
        chi.iter().enumerate().map(|(i, &c)| (c - tau * g[i] / self.mass[i] + tau * nu).clamp(0.0, self.chi_prev[i])).collect()
    }

    fn d_prox(&self, d: &[SymTensor2], g: &[SymTensor2], tau: f64) -> Vec<SymTensor2> {
        let p = self.model.material().params();
        d.iter()
            .enumerate()
            .map(|(i, di)| {
                let step = p.subspace.project(&g[i]).scale(tau / self.mass[i]);
                let v = *di - step - self.d_prev[i];
                let n = v.norm();
                let thr = tau * p.mu_diss;
                let shrunk = if n <= thr { self.d_prev[i] } else { self.d_prev[i] + v.scale(1.0 - thr / n) };
                p.k_set.project(&p.subspace.project(&shrunk))
            })
            .collect()
    }

    /// Proximal-gradient iterations on one block with Barzilai–Borwein trial
    /// steps and backtracking; every accepted step strictly lowers Φ.
    fn block<B: Block>(&self, q: &mut StateFields, phi: &mut f64, cfg: &SolverConfig) {
        let mut tau = cfg.prox_step_init;
        let mut last: Option<(B, B)> = None;
        for _ in 0..cfg.prox_max_iters {
            let x = B::get(q);
            let g = B::grad(&self.gradient(q));
            if let Some((x0, g0)) = &last {
                let (sms, sy) = B::bb(&x, x0, &g, g0, self.mass);
                if sy > 0.0 && sms > 0.0 {
                    tau = (sms / sy).clamp(1e-12, 1e12);
                }
            }
            let mut accepted = false;
            let mut trial_tau = tau;
            for _ in 0..60 {
                let xn = B::prox(self, &x, &g, trial_tau);
                let dist = B::dist_sq(&xn, &x, self.mass);
                if dist == 0.0 {
                    break;
                }
                let mut trial = q.clone();
                B::set(&mut trial, xn);
                let f = self.objective(&trial);
                if f < *phi && f <= *phi - 1e-4 * dist / (2.0 * trial_tau) {
                    *q = trial;
                    *phi = f;
                    accepted = true;
                    break;
                }
                trial_tau *= cfg.backtrack_factor;
            }
            if !accepted {
                return;
            }
            tau = trial_tau;
            last = Some((x, g));
        }
    }
}

/// A block of nodal unknowns updated by proximal gradient.
trait Block: Sized {
    fn get(q: &StateFields) -> Self;
    fn set(q: &mut StateFields, x: Self);
    fn grad(g: &GradientBlocks) -> Self;
    fn prox(pb: &Problem, x: &Self, g: &Self, tau: f64) -> Self;
    /// ‖a − b‖² in the lumped-mass metric.
    fn dist_sq(a: &Self, b: &Self, mass: &[f64]) -> f64;
    /// (⟨s, Ms⟩, ⟨s, y⟩) with s = x − x0 and y = g − g0.
    fn bb(x: &Self, x0: &Self, g: &Self, g0: &Self, mass: &[f64]) -> (f64, f64);
}

struct Chi(Vec<f64>);
struct Plastic(Vec<SymTensor2>);

impl Block for Chi {
    fn get(q: &StateFields) -> Self {
        Chi(q.chi.clone())
    }
    fn set(q: &mut StateFields, x: Self) {
        q.chi = x.0;
    }
    fn grad(g: &GradientBlocks) -> Self {
        Chi(g.chi.clone())
    }
    fn prox(pb: &Problem, x: &Self, g: &Self, tau: f64) -> Self {
        Chi(pb.chi_prox(&x.0, &g.0, tau))
    }
    fn dist_sq(a: &Self, b: &Self, mass: &[f64]) -> f64 {
        a.0.iter().zip(&b.0).zip(mass).map(|((x, y), m)| m * (x - y) * (x - y)).sum()
    }
    fn bb(x: &Self, x0: &Self, g: &Self, g0: &Self, mass: &[f64]) -> (f64, f64) {
        let sy = (0..x.0.len()).map(|i| (x.0[i] - x0.0[i]) * (g.0[i] - g0.0[i])).sum();
        (Self::dist_sq(x, x0, mass), sy)
    }
}

impl Block for Plastic {
    fn get(q: &StateFields) -> Self {
        Plastic(q.d.clone())
    }
    fn set(q: &mut StateFields, x: Self) {
        q.d = x.0;
    }
    fn grad(g: &GradientBlocks) -> Self {
        Plastic(g.d.clone())
    }
    fn prox(pb: &Problem, x: &Self, g: &Self, tau: f64) -> Self {
        Plastic(pb.d_prox(&x.0, &g.0, tau))
    }
    fn dist_sq(a: &Self, b: &Self, mass: &[f64]) -> f64 {
        a.0.iter().zip(&b.0).zip(mass).map(|((x, y), m)| m * (*x - *y).norm_sq()).sum()
    }
    fn bb(x: &Self, x0: &Self, g: &Self, g0: &Self, mass: &[f64]) -> (f64, f64) {
        let sy = (0..x.0.len()).map(|i| (x.0[i] - x0.0[i]).dot(&(g.0[i] - g0.0[i]))).sum();
        (Self::dist_sq(x, x0, mass), sy)
    }
}

/// Solves the incremental problem at time `t` from the previous state.
pub fn incremental_step(model: &Model, t: f64, previous: &StateFields, cfg: &SolverConfig) -> Result<StepOutcome, SolverError> {
    model.check_shape(previous)?;
    if let Some(msg) = model.infeasibility(&previous.chi, &previous.d) {
        return Err(SolverError::Infeasible(msg));
    }
    let pb = Problem { model, t, chi_prev: &previous.chi, d_prev: &previous.d, mass: model.mesh().lumped_mass() };
    let mut q = previous.clone();
    let (u, _) = model.elastic_solve_from(t, &q.chi, &q.d, Some(&q.u))?;
    q.u = u;
    let mut phi = pb.objective(&q);
    let initial_objective = phi;
    let mut sweep_objectives = Vec::new();
    let mut extra = 0;
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let before = phi;
        pb.u_step(&mut q, &mut phi)?;
        pb.block::<Chi>(&mut q, &mut phi, cfg);
        pb.block::<Plastic>(&mut q, &mut phi, cfg);
        pb.u_step(&mut q, &mut phi)?;
        debug_assert!(phi <= before);
        sweep_objectives.push(phi);
        let decrease = before - phi;
        if decrease <= cfg.am_tol * (1.0 + phi.abs()) {
            let residual = inclusion_residual(model, t, &q, previous);
            if residual <= cfg.stationarity_tol {
                return Ok(StepOutcome { state: q, objective: phi, initial_objective, sweep_objectives, sweeps, residual });
            }
            extra += 1;
            if extra > 3 {
                return Err(SolverError::Stall { sweeps, objective: phi, decrease, residual });
            }
        } else {
            extra = 0;
        }
        if sweeps >= cfg.am_max_sweeps {
            let residual = inclusion_residual(model, t, &q, previous);
            return Err(SolverError::Stall { sweeps, objective: phi, decrease, residual });
        }
    }
}

/// Distance from the negative smooth gradient to the subdifferential of the
/// nonsmooth terms (dissipation and indicators) at `fields`, aggregated over
/// all nodal unknowns in the Euclidean norm.
pub fn inclusion_residual(model: &Model, t: f64, fields: &StateFields, previous: &StateFields) -> f64 {
    let g = model.gradient_unchecked(t, fields);
    let p = model.material().params();
    let mass = model.mesh().lumped_mass();
    let mut sum = 0.0;
    for &dof in model.free_dofs() {
        sum += g.u[dof] * g.u[dof];
    }
    for i in 0..fields.chi.len() {
        let (c, cp, gi, m) = (fields.chi[i], previous.chi[i], g.chi[i], mass[i]);
        // −g must lie in the interval [lo, hi]
        let mut lo = -p.nu_diss * m;
        let mut hi = lo;
        if c == cp {
            hi = f64::INFINITY;
        }
        if c == 0.0 {
            lo = f64::NEG_INFINITY;
        }
        let v = -gi;
        let r = if v < lo {
            lo - v
        } else if v > hi {
            v - hi
        } else {
            0.0
        };
        sum += r * r;
    }
    for i in 0..fields.d.len() {
        let v = -p.subspace.project(&g.d[i]);
        let rho = p.mu_diss * mass[i];
        let delta = fields.d[i] - previous.d[i];
        let normal = p.k_set.active_normal(&fields.d[i], 1e-12);
        let r = if delta.norm() > 0.0 {
            let w = v - delta.scale(rho / delta.norm());
            match normal {
                Some(n) => (w - n.scale(w.dot(&n).max(0.0))).norm(),
                None => w.norm(),
            }
        } else {
            let w = match normal {
                Some(n) => v - n.scale(v.dot(&n).max(0.0)),
                None => v,
            };
            (w.norm() - rho).max(0.0)
        };
        sum += r * r;
    }
    sum.sqrt()
}

/// Inclusion residual in the simplified configuration 𝕂 ≡ Id (λ = 0,
/// μ_L = ½, k_min = 1) where the optimality system reduces to
/// −div(e(u) − (1−χ)D) = f with two scalar/tensor inclusions.
pub fn stationarity_residual(model: &Model, t: f64, fields: &StateFields, previous: &StateFields) -> Result<f64, SolverError> {
    let p = model.material().params();
    if p.lame_lambda != 0.0 || p.lame_mu != 0.5 || p.k_min != 1.0 {
        return Err(SolverError::Configuration(format!(
            "stationarity residual needs lame_lambda = 0, lame_mu = 0.5, k_min = 1 (got {}, {}, {})",
            p.lame_lambda, p.lame_mu, p.k_min
        )));
    }
    model.check_shape(fields)?;
    model.check_shape(previous)?;
    if let Some(msg) = model.infeasibility(&fields.chi, &fields.d) {
        return Err(SolverError::Infeasible(msg));
    }
    Ok(inclusion_residual(model, t, fields, previous))
}

/// Runs the incremental scheme over `grid` from `initial` (χ, D); the initial
/// displacement is recomputed by an elastic solve at t = 0.
pub fn run_evolution(model: &Model, grid: &TimeGrid, cfg: &SolverConfig, initial: &StateFields) -> Result<Trajectory, EvolutionError> {
    let fail = |step: usize, source: SolverError, partial: &Trajectory| EvolutionError {
        step,
        t: grid.time(step),
        source,
        partial: partial.clone(),
    };
    let mut traj = Trajectory::default();
    if let Err(e) = model.check_shape(initial) {
        return Err(fail(0, e.into(), &traj));
    }
    if let Some(msg) = model.infeasibility(&initial.chi, &initial.d) {
        return Err(fail(0, SolverError::Infeasible(msg), &traj));
    }
    let mut q0 = initial.clone();
    q0.u = model.elastic_solve(0.0, &q0.chi, &q0.d).map_err(|e| fail(0, e.into(), &traj))?;
    traj.records.push(StepRecord {
        t: 0.0,
        energy: model.energy_unchecked(0.0, &q0),
        diss_increment: 0.0,
        diss_cum: 0.0,
        power_integral: 0.0,
        power_integral_right: 0.0,
        sweeps: 0,
        stationarity_residual: inclusion_residual(model, 0.0, &q0, &q0),
        state: q0,
    });
    for k in 1..=grid.n_steps {
        let (t0, t1) = (grid.time(k - 1), grid.time(k));
        let prev = &traj.records[k - 1];
        let out = incremental_step(model, t1, &prev.state, cfg).map_err(|e| fail(k, e, &traj))?;
        let q = out.state;
        let diss = model.dissipation(&prev.state.chi, &prev.state.d, &q.chi, &q.d);
        let half = 0.5 * (t1 - t0);
        let left = half * (model.power_unchecked(t0, &prev.state) + model.power_unchecked(t1, &prev.state));
        let right = half * (model.power_unchecked(t0, &q) + model.power_unchecked(t1, &q));
        let rec = StepRecord {
            t: t1,
            energy: model.energy_unchecked(t1, &q),
            diss_increment: diss,
            diss_cum: prev.diss_cum + diss,
            power_integral: prev.power_integral + left,
            power_integral_right: prev.power_integral_right + right,
            sweeps: out.sweeps,
            stationarity_residual: out.residual,
            state: q,
        };
        traj.records.push(rec);
    }
    Ok(traj)
}
