//! Brute-force ground truth for tiny incremental problems.
//!
//! Every nodal unknown of (χ, D) is quantized; all grid points are visited
//! and u is obtained for each by a dense Cholesky factorization, independent
//! of the sparse CG path. After the full grid, the search box is shrunk
//! around the best point and searched exhaustively again, `rounds` times.
//! Kink locations of the objective (χ = χ_prev, χ = 0, D = D_prev) are always
//! grid points.

use nalgebra::DMatrix;
use rayon::prelude::*;
use thiserror::Error;

use crate::fem::{FemError, Model, StateFields};
use crate::scenario::OracleConfig;
use crate::tensor::{n_components, SubspaceS, SymTensor2};

pub const MAX_UNKNOWNS: usize = 8;
pub const MAX_LEVELS: usize = 21;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error(
        "instance too large for exhaustive search: {unknowns} unknowns at {levels} levels (limits: {MAX_UNKNOWNS} unknowns, {MAX_LEVELS} levels)"
    )]
    TooLarge { unknowns: usize, levels: usize },
    #[error("no feasible grid point")]
    Empty,
    #[error("singular elastic system")]
    Singular,
    #[error(transparent)]
    Fem(#[from] FemError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub state: StateFields,
    /// E(t, q) + R(z − z_prev) at the best grid point.
    pub objective: f64,
    /// Σ over unknowns of the largest objective change to a feasible grid
    /// neighbour at the final spacing.
    pub quantization_gap: f64,
    pub evaluations: usize,
}

/// Coordinates of one unknown of the search.
#[derive(Debug, Clone, Copy)]
enum Unknown {
    Chi(usize),
    /// (node, coordinate in S)
    Plastic(usize, usize),
}

struct Search<'a> {
    model: &'a Model,
    t: f64,
    previous: &'a StateFields,
    unknowns: Vec<Unknown>,
    /// Hard bounds per unknown.
    bounds: Vec<(f64, f64)>,
}

/// Number of unknowns the oracle would search for this model.
pub fn unknown_count(model: &Model) -> usize {
    let s = model.material().params().subspace.dimension(model.dim());
    model.mesh().n_nodes() * (1 + s)
}

fn s_coords(sub: SubspaceS, d: &SymTensor2) -> Vec<f64> {
    let dim = d.dim();
    match sub {
        SubspaceS::FullSymmetric => d.components().to_vec(),
        SubspaceS::Deviatoric => {
            let c = d.components();
            c[..dim - 1].iter().chain(&c[dim..]).copied().collect()
        }
    }
}

fn from_s_coords(sub: SubspaceS, dim: usize, x: &[f64]) -> SymTensor2 {
    match sub {
        SubspaceS::FullSymmetric => SymTensor2::from_components(dim, x).expect("component count"),
        SubspaceS::Deviatoric => {
            let mut c = vec![0.0; n_components(dim)];
            let tr: f64 = x[..dim - 1].iter().sum();
            c[..dim - 1].copy_from_slice(&x[..dim - 1]);
            c[dim - 1] = -tr;
            c[dim..].copy_from_slice(&x[dim - 1..]);
            SymTensor2::from_components(dim, &c).expect("component count")
        }
    }
}

/// `n` levels on [lo, hi] containing both ends exactly, or the single point
/// `lo` for a degenerate interval.
fn levels(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if hi <= lo {
        return vec![lo];
    }
    let h = (hi - lo) / (n - 1) as f64;
    (0..n).map(|k| if k == n - 1 { hi } else { lo + k as f64 * h }).collect()
}

/// `n` (odd) levels centred exactly on `c` with spacing `h`, clipped to
/// [lo, hi]; a clipped bound is added as a level of its own.
fn centred_levels(c: f64, h: f64, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mid = (n / 2) as isize;
    let raw: Vec<f64> = (0..n as isize).map(|k| c + (k - mid) as f64 * h).collect();
    let mut v: Vec<f64> = raw.iter().copied().filter(|x| *x >= lo && *x <= hi).collect();
    if raw[0] < lo && v.first() != Some(&lo) {
        v.insert(0, lo);
    }
    if raw[n - 1] > hi && v.last() != Some(&hi) {
        v.push(hi);
    }
    v
}

impl Search<'_> {
    fn state_of(&self, x: &[f64]) -> (Vec<f64>, Vec<SymTensor2>) {
        let dim = self.model.dim();
        let sub = self.model.material().params().subspace;
        let mut chi = self.previous.chi.clone();
        let mut coords: Vec<Vec<f64>> = self.previous.d.iter().map(|d| s_coords(sub, d)).collect();
        for (k, u) in self.unknowns.iter().enumerate() {
            match *u {
                Unknown::Chi(i) => chi[i] = x[k],
                Unknown::Plastic(i, c) => coords[i][c] = x[k],
            }
        }
        let d = coords.iter().map(|c| from_s_coords(sub, dim, c)).collect();
        (chi, d)
    }

    /// Objective and displacement at a grid point; `None` if infeasible.
    fn evaluate(&self, x: &[f64], kbuf: &mut Vec<f64>) -> Option<(f64, Vec<f64>)> {
        let (chi, d) = self.state_of(x);
        if self.model.infeasibility(&chi, &d).is_some() {
            return None;
        }
        let n = self.model.n_free();
        kbuf.resize(n * n, 0.0);
        let weights = self.model.element_degradation(&chi);
        self.model.stiffness_dense(self.model.material().base_stiffness(), &weights, kbuf);
        let b = self.model.elastic_rhs(self.t, &chi, &d);
        let k = DMatrix::from_row_slice(n, n, kbuf);
        let chol = k.cholesky()?;
        let sol = chol.solve(&nalgebra::DVector::from_vec(b));
        let u = self.model.expand(sol.as_slice());
        let e = self.model.energy_parts(self.t, &u, &chi, &d).total;
        let r = self.model.dissipation(&self.previous.chi, &self.previous.d, &chi, &d);
        let f = e + r;
        f.is_finite().then_some((f, u))
    }

    /// Exhaustive scan of the tensor grid `axes`; ties go to the lowest index.
    fn scan(&self, axes: &[Vec<f64>]) -> (Option<(f64, usize)>, usize) {
        let total: usize = axes.iter().map(Vec::len).product();
        let best = (0..total)
            .into_par_iter()
            .map_init(
                || (Vec::new(), vec![0.0; axes.len()]),
                |(kbuf, x), idx| {
                    let mut r = idx;
                    for (a, axis) in axes.iter().enumerate().rev() {
                        x[a] = axis[r % axis.len()];
                        r /= axis.len();
                    }
                    self.evaluate(x, kbuf).map(|(f, _)| (f, idx))
                },
            )
            .reduce(
                || None,
                |a, b| match (a, b) {
                    (None, b) => b,
                    (a, None) => a,
                    (Some(a), Some(b)) => Some(if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a }),
                },
            );
        (best, total)
    }
}

fn point(axes: &[Vec<f64>], mut idx: usize) -> Vec<f64> {
    let mut x = vec![0.0; axes.len()];
    for (a, axis) in axes.iter().enumerate().rev() {
        x[a] = axis[idx % axis.len()];
        idx /= axis.len();
    }
    x
}

/// Exhaustive minimization of E(t, ·) + R(· − z_prev) over quantized (χ, D).
pub fn oracle_minimize(model: &Model, t: f64, previous: &StateFields, cfg: &OracleConfig) -> Result<OracleResult, OracleError> {
    model.check_shape(previous)?;
    let unknown_total = unknown_count(model);
    if unknown_total > MAX_UNKNOWNS || cfg.levels > MAX_LEVELS || cfg.levels < 2 {
        return Err(OracleError::TooLarge { unknowns: unknown_total, levels: cfg.levels });
    }
    if let Some(msg) = model.infeasibility(&previous.chi, &previous.d) {
        return Err(FemError::Infeasible(msg).into());
    }
    let p = model.material().params();
    let s_dim = p.subspace.dimension(model.dim());
    let n_nodes = model.mesh().n_nodes();
    let mut unknowns = Vec::new();
    let mut bounds = Vec::new();
    let mut centre = Vec::new();
    for i in 0..n_nodes {
        unknowns.push(Unknown::Chi(i));
        bounds.push((0.0, previous.chi[i]));
        centre.push(previous.chi[i]);
        let c = s_coords(p.subspace, &previous.d[i]);
        for (k, &ck) in c.iter().enumerate().take(s_dim) {
            unknowns.push(Unknown::Plastic(i, k));
            bounds.push((ck - cfg.d_radius, ck + cfg.d_radius));
            centre.push(ck);
        }
    }
    let search = Search { model, t, previous, unknowns, bounds };
    let n = cfg.levels | 1;
    let mut spacing: Vec<f64> = Vec::new();
    let mut axes: Vec<Vec<f64>> = Vec::new();
    for (k, u) in search.unknowns.iter().enumerate() {
        let (lo, hi) = search.bounds[k];
        match u {
            Unknown::Chi(_) => {
                axes.push(levels(lo, hi, n));
                spacing.push((hi - lo) / (n - 1) as f64);
            }
            Unknown::Plastic(..) => {
                let h = 2.0 * cfg.d_radius / (n - 1) as f64;
                axes.push(centred_levels(centre[k], h, n, lo, hi));
                spacing.push(h);
            }
        }
    }
    let mut evaluations = 0;
    let mut best_x;
    let (best, count) = search.scan(&axes);
    evaluations += count;
    let (mut best_f, idx) = best.ok_or(OracleError::Empty)?;
    best_x = point(&axes, idx);
    for _ in 0..cfg.rounds {
        let factor = 2.0 / (n - 1) as f64;
        for (k, u) in search.unknowns.iter().enumerate() {
            let (lo, hi) = search.bounds[k];
            let h = spacing[k];
            axes[k] = match u {
                Unknown::Chi(_) | Unknown::Plastic(..) => centred_levels(best_x[k], h * factor, n, lo, hi),
            };
            spacing[k] = h * factor;
        }
        let (best, count) = search.scan(&axes);
        evaluations += count;
        let (f, idx) = best.ok_or(OracleError::Empty)?;
        // the previous best is always on the new grid
        if f <= best_f {
            best_f = f;
            best_x = point(&axes, idx);
        }
    }
    let mut kbuf = Vec::new();
    let (_, u) = search.evaluate(&best_x, &mut kbuf).ok_or(OracleError::Singular)?;
    let mut gap = 0.0;
    for k in 0..best_x.len() {
        let mut worst: f64 = 0.0;
        for s in [-1.0, 1.0] {
            let mut y = best_x.clone();
            y[k] += s * spacing[k];
            let (lo, hi) = search.bounds[k];
            if y[k] < lo || y[k] > hi {
                continue;
            }
            if let Some((f, _)) = search.evaluate(&y, &mut kbuf) {
                worst = worst.max((f - best_f).abs());
            }
        }
        gap += worst;
    }
    let (chi, d) = search.state_of(&best_x);
    Ok(OracleResult { state: StateFields { u, chi, d }, objective: best_f, quantization_gap: gap, evaluations })
}
