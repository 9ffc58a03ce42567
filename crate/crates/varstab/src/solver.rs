//! Localized solver: tilted argmin/value maps, stationary-point maps, and
//! batch value surfaces.
//!
//! `solve_tilted` minimizes `phi(x, u) - v.[x - xbar]` over the ball
//! `|x - xbar| < delta` by dense grid search followed by local refinement
//! of every grid basin. The open ball is realized as the closed ball of
//! radius `delta - refine_tol`; candidates that land within `refine_tol`
//! of the boundary raise the `boundary_hit` flag, signalling that the
//! localization radius was too small.
//!
//! Refinement is exact-derivative based: golden-section plus gradient
//! bisection in one dimension, and compass search on an exact penalty
//! followed by an active-set Newton polish of the KKT system for
//! constrained composites. The primal dimension is capped at 6.

use std::cell::Cell;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::{ConvexPiece, ParametricProblem, ProblemBody};

/// Maximum primal dimension for grid search.
pub const MAX_GRID_DIM: usize = 6;

const MAX_BASINS: usize = 16;
const PENALTY_WEIGHT: f64 = 1e3;

/// Localization of the stability analysis: the anchor, the ball radius,
/// the attentive value cutoff, and the perturbation box radii.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Localization {
    pub xbar: Vec<f64>,
    pub delta: f64,
    /// Attentive level: stationary points with `phi(x, u) >= alpha` are
    /// discarded. Defaults to `+inf` (no truncation).
    pub alpha: f64,
    pub v_radius: f64,
    pub u_radius: f64,
}

impl Localization {
    /// Standard localization around a problem's anchor.
    pub fn around(problem: &ParametricProblem, delta: f64) -> Self {
        Localization {
            xbar: problem.xbar.clone(),
            delta,
            alpha: f64::INFINITY,
            v_radius: 0.25,
            u_radius: 0.1,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_radii(mut self, v_radius: f64, u_radius: f64) -> Self {
        self.v_radius = v_radius;
        self.u_radius = u_radius;
        self
    }

    pub fn validate(&self, problem: &ParametricProblem) -> Result<()> {
        if self.xbar.len() != problem.n {
            return Err(Error::Config("localization anchor dimension mismatch".into()));
        }
        if !(self.delta > 0.0) || !(self.v_radius > 0.0) || !(self.u_radius > 0.0) {
            return Err(Error::Config("localization radii must be positive".into()));
        }
        if self.alpha.is_finite() {
            let at_anchor = problem.eval_phi(&self.xbar, &vec![0.0; problem.m])?;
            if self.alpha <= at_anchor {
                return Err(Error::Config(format!(
                    "attentive level alpha = {} must exceed phi(xbar, 0) = {at_anchor}",
                    self.alpha
                )));
            }
        }
        Ok(())
    }
}

/// Numerical knobs of the localized solver.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveConfig {
    /// Grid points per axis; odd and at least 11.
    pub grid_points_per_axis: usize,
    pub refine_iters: usize,
    pub refine_tol: f64,
    pub cluster_tol: f64,
    pub active_tol: f64,
    pub seed: u64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            grid_points_per_axis: 21,
            refine_iters: 60,
            refine_tol: 1e-9,
            cluster_tol: 1e-6,
            active_tol: 1e-9,
            seed: 0,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_points_per_axis < 11 || self.grid_points_per_axis % 2 == 0 {
            return Err(Error::Config(
                "grid_points_per_axis must be odd and >= 11".into(),
            ));
        }
        if !(self.refine_tol > 0.0) || !(self.cluster_tol > 0.0) || !(self.active_tol > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Result of one localized tilted minimization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArgminResult {
    /// Cluster representatives, lexicographically sorted; each within
    /// `cluster_tol` (in value) of `value`.
    pub minimizers: Vec<Vec<f64>>,
    /// The localized optimal value `m_delta(v, u)`.
    pub value: f64,
    pub single_valued: bool,
    /// Best point lies within `refine_tol` of the ball boundary.
    pub boundary_hit: bool,
    /// Number of objective evaluations spent.
    pub evaluations: u64,
}

// ---------------------------------------------------------------------------
// Tilted objective helpers
// ---------------------------------------------------------------------------

struct Tilted<'a> {
    problem: &'a ParametricProblem,
    v: &'a [f64],
    u: &'a [f64],
    xbar: &'a [f64],
    evals: Cell<u64>,
    /// Allowed indicator violation when evaluating refined candidates.
    feas_slack: f64,
}

impl<'a> Tilted<'a> {
    fn new(
        problem: &'a ParametricProblem,
        v: &'a [f64],
        u: &'a [f64],
        xbar: &'a [f64],
        feas_slack: f64,
    ) -> Self {
        Tilted { problem, v, u, xbar, evals: Cell::new(0), feas_slack }
    }

    fn tilt_term(&self, x: &[f64]) -> f64 {
        let mut t = 0.0;
        for ((xi, bi), vi) in x.iter().zip(self.xbar).zip(self.v) {
            t += vi * (xi - bi);
        }
        t
    }

    /// Strict extended value `phi(x,u) - v.[x - xbar]`.
    fn value(&self, x: &[f64]) -> f64 {
        self.evals.set(self.evals.get() + 1);
        let phi = self.problem.eval_phi(x, self.u).expect("dimensions checked");
        phi - self.tilt_term(x)
    }

    /// Same but tolerating indicator violations up to `feas_slack`
    /// (refined candidates satisfy constraints only to refinement accuracy).
    fn value_lenient(&self, x: &[f64]) -> f64 {
        match &self.problem.body {
            ProblemBody::Composite { f0, fmap, g } if g.is_indicator() => {
                self.evals.set(self.evals.get() + 1);
                let z = linalg::add(&fmap.eval(x), self.u);
                if g.violation(&z) <= self.feas_slack {
                    f0.eval(x) - self.tilt_term(x)
                } else {
                    f64::INFINITY
                }
            }
            _ => self.value(x),
        }
    }

    /// Exact penalty for constrained refinement.
    fn penalty(&self, x: &[f64]) -> f64 {
        match &self.problem.body {
            ProblemBody::Composite { f0, fmap, g } => {
                self.evals.set(self.evals.get() + 1);
                let z = linalg::add(&fmap.eval(x), self.u);
                let smooth = match g {
                    ConvexPiece::EuclideanNorm { .. } | ConvexPiece::SquaredNorm { .. } => {
                        g.value(&z, 0.0)
                    }
                    _ => 0.0,
                };
                f0.eval(x) + smooth - self.tilt_term(x) + PENALTY_WEIGHT * g.violation(&z)
            }
            ProblemBody::ClosedForm(_) => self.value(x),
        }
    }

    /// Gradient of the tilted objective where available.
    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        let g = self.problem.phi_grad_x(x, self.u).ok()??;
        Some(linalg::sub(&g, self.v))
    }
}

fn project_ball(x: &mut [f64], center: &[f64], radius: f64) {
    let d = linalg::sub(x, center);
    let nd = linalg::norm2(&d);
    if nd > radius {
        let f = radius / nd;
        for (xi, (ci, di)) in x.iter_mut().zip(center.iter().zip(&d)) {
            *xi = ci + f * di;
        }
    }
}

// ---------------------------------------------------------------------------
// Grid scan
// ---------------------------------------------------------------------------

struct Grid {
    coords: Vec<Vec<f64>>,
    points_per_axis: usize,
    n: usize,
}

impl Grid {
    fn new(xbar: &[f64], radius: f64, points_per_axis: usize) -> Self {
        let coords = xbar
            .iter()
            .map(|&c| {
                (0..points_per_axis)
                    .map(|i| {
                        c - radius
                            + 2.0 * radius * (i as f64) / ((points_per_axis - 1) as f64)
                    })
                    .collect()
            })
            .collect();
        Grid { coords, points_per_axis, n: xbar.len() }
    }

    fn len(&self) -> usize {
        self.points_per_axis.pow(self.n as u32)
    }

    fn point(&self, flat: usize) -> Vec<f64> {
        let mut rest = flat;
        let mut x = vec![0.0; self.n];
        for j in (0..self.n).rev() {
            x[j] = self.coords[j][rest % self.points_per_axis];
            rest /= self.points_per_axis;
        }
        x
    }

    fn spacing(&self, axis: usize) -> f64 {
        self.coords[axis][1] - self.coords[axis][0]
    }

    /// Flat indices of the <= 2n axis neighbors.
    fn neighbors(&self, flat: usize) -> Vec<usize> {
        let mut digits = vec![0usize; self.n];
        let mut rest = flat;
        for j in (0..self.n).rev() {
            digits[j] = rest % self.points_per_axis;
            rest /= self.points_per_axis;
        }
        let mut out = Vec::with_capacity(2 * self.n);
        for j in 0..self.n {
            let stride = self.points_per_axis.pow((self.n - 1 - j) as u32);
            if digits[j] > 0 {
                out.push(flat - stride);
            }
            if digits[j] + 1 < self.points_per_axis {
                out.push(flat + stride);
            }
        }
        out
    }
}

/// Grid-local minima (value <= all axis neighbors), best `MAX_BASINS` kept.
fn grid_basins(values: &[f64], grid: &Grid) -> Vec<usize> {
    let mut basins: Vec<(f64, usize)> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .filter(|&(i, &v)| grid.neighbors(i).iter().all(|&nb| v <= values[nb]))
        .map(|(i, &v)| (v, i))
        .collect();
    basins.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    basins.truncate(MAX_BASINS);
    basins.into_iter().map(|(_, i)| i).collect()
}

// ---------------------------------------------------------------------------
// One-dimensional refinement
// ---------------------------------------------------------------------------

/// Golden-section minimization on `[a, b]`; handles +inf plateaus.
fn golden_min(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, min_width: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..300 {
        if (b - a).abs() <= min_width {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mut best = a;
    let mut fbest = f64::INFINITY;
    for t in [a, c, d, b] {
        let ft = f(t);
        if ft < fbest {
            fbest = ft;
            best = t;
        }
    }
    best
}

/// Bisection on the sign of `g` over `[a, b]` assuming `g(a) < 0 < g(b)`;
/// converges to the sign change even across jumps (kinks of the objective).
fn bisect_sign(g: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if g(mid) < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

fn refine_1d(tilted: &Tilted, bracket: (f64, f64), cfg: &SolveConfig) -> f64 {
    let f = |t: f64| tilted.value(&[t]);
    let (lo, hi) = bracket;
    let coarse = golden_min(&f, lo, hi, 1e-12);
    // Gradient polish: bisect the tilted gradient's sign change when the
    // bracket is a genuine minimum bracket. Skip for indicator composites,
    // where the smooth gradient ignores the constraint kink.
    let has_indicator = matches!(
        &tilted.problem.body,
        ProblemBody::Composite { g, .. } if g.is_indicator()
    );
    if !has_indicator {
        let g = |t: f64| {
            tilted.gradient(&[t]).map(|gr| gr[0]).unwrap_or_else(|| {
                // Nonsmooth point: probe a whisker to the right.
                tilted
                    .gradient(&[t + 1e-13 * (1.0 + t.abs())])
                    .map_or(0.0, |gr| gr[0])
            })
        };
        let (mut a, mut b) = (lo, hi);
        if !(g(a) < 0.0 && g(b) > 0.0) {
            // Not a sign bracket (e.g. boundary minimum): try a narrow
            // window around the coarse minimum.
            let w = (hi - lo) * 1e-3;
            a = (coarse - w).max(lo);
            b = (coarse + w).min(hi);
        }
        if g(a) < 0.0 && g(b) > 0.0 {
            let polished = bisect_sign(&g, a, b);
            if tilted.value(&[polished]) <= tilted.value(&[coarse]) + cfg.refine_tol {
                return polished;
            }
        }
    }
    coarse
}

// ---------------------------------------------------------------------------
// Multi-dimensional refinement
// ---------------------------------------------------------------------------

/// Deterministic compass (pattern) search within the ball. The probe set
/// is the coordinate directions plus all pairwise diagonals, which keeps
/// the search from stalling on ridges that are flat along single axes
/// (degenerate active constraint sets produce exactly those).
fn compass_search(
    f: &dyn Fn(&[f64]) -> f64,
    x0: &[f64],
    step0: f64,
    min_step: f64,
    center: &[f64],
    radius: f64,
) -> Vec<f64> {
    let n = x0.len();
    let mut probes: Vec<Vec<f64>> = Vec::new();
    for j in 0..n {
        for sign in [1.0, -1.0] {
            let mut d = vec![0.0; n];
            d[j] = sign;
            probes.push(d);
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            for si in [1.0, -1.0] {
                for sj in [1.0, -1.0] {
                    let mut d = vec![0.0; n];
                    d[i] = si;
                    d[j] = sj;
                    probes.push(d);
                }
            }
        }
    }
    let mut x = x0.to_vec();
    project_ball(&mut x, center, radius);
    let mut fx = f(&x);
    let mut step = step0;
    while step >= min_step {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for d in &probes {
            let mut cand = x.clone();
            for (c, di) in cand.iter_mut().zip(d) {
                *c += step * di;
            }
            project_ball(&mut cand, center, radius);
            let fc = f(&cand);
            if fc < fx && best.as_ref().map_or(true, |(fb, _)| fc < *fb) {
                best = Some((fc, cand));
            }
        }
        match best {
            Some((fb, xb)) => {
                x = xb;
                fx = fb;
            }
            None => step *= 0.5,
        }
    }
    x
}

/// Oriented constraint row for the active-set Newton polish: the row is
/// active when `sign * (F_idx(x) + u_idx) - offset = 0`, with inequality
/// multipliers normalized to `y >= 0`.
struct ActiveRow {
    idx: usize,
    sign: f64,
    offset: f64,
    is_equality: bool,
}

fn candidate_rows(g: &ConvexPiece, z: &[f64], tol: f64) -> Vec<ActiveRow> {
    match g {
        ConvexPiece::OrthantNonpos { s, .. } => (0..*s)
            .filter(|&i| z[i] >= -tol)
            .map(|i| ActiveRow { idx: i, sign: 1.0, offset: 0.0, is_equality: false })
            .collect(),
        ConvexPiece::ZeroIndicator { m } => (0..*m)
            .map(|i| ActiveRow { idx: i, sign: 1.0, offset: 0.0, is_equality: true })
            .collect(),
        ConvexPiece::Box { lo, hi } => {
            let mut rows = Vec::new();
            for i in 0..z.len() {
                if lo[i].is_finite() && lo[i] == hi[i] {
                    rows.push(ActiveRow { idx: i, sign: 1.0, offset: lo[i], is_equality: true });
                    continue;
                }
                if hi[i].is_finite() && z[i] >= hi[i] - tol {
                    rows.push(ActiveRow { idx: i, sign: 1.0, offset: hi[i], is_equality: false });
                }
                if lo[i].is_finite() && z[i] <= lo[i] + tol {
                    rows.push(ActiveRow { idx: i, sign: -1.0, offset: -lo[i], is_equality: false });
                }
            }
            rows
        }
        _ => Vec::new(),
    }
}

fn kkt_point_residual(tilted: &Tilted, x: &[f64], y: &[f64], active: &[ActiveRow]) -> f64 {
    let ProblemBody::Composite { f0, fmap, .. } = &tilted.problem.body else {
        return f64::INFINITY;
    };
    let z = linalg::add(&fmap.eval(x), tilted.u);
    let jac = fmap.jacobian(x);
    let mut stat = linalg::sub(&f0.gradient(x), tilted.v);
    for (yi, r) in y.iter().zip(active) {
        for (s, g) in stat.iter_mut().zip(&jac[r.idx]) {
            *s += yi * r.sign * g;
        }
    }
    let cons = active
        .iter()
        .map(|r| (r.sign * z[r.idx] - r.offset).abs())
        .fold(0.0_f64, f64::max);
    linalg::norm_inf(&stat).max(cons)
}

/// Newton polish of the KKT system for the current active set, with
/// multiplier-sign / violation exchanges. Rank-deficient systems (the
/// multiplier segment of degenerate problems) fall back to least-squares
/// steps.
fn kkt_polish(
    tilted: &Tilted,
    x0: &[f64],
    cfg: &SolveConfig,
    center: &[f64],
    radius: f64,
) -> Vec<f64> {
    let ProblemBody::Composite { f0, fmap, g } = &tilted.problem.body else {
        return x0.to_vec();
    };
    let n = tilted.problem.n;
    let act_tol = cfg.active_tol.max(1e-6);
    let mut x = x0.to_vec();
    let mut active = candidate_rows(g, &linalg::add(&fmap.eval(&x), tilted.u), act_tol);

    for _exchange in 0..8 {
        let mut y = vec![0.0; active.len()];
        for _newton in 0..cfg.refine_iters {
            let z = linalg::add(&fmap.eval(&x), tilted.u);
            let jac = fmap.jacobian(&x);
            let rows: Vec<Vec<f64>> = active
                .iter()
                .map(|r| linalg::scale(&jac[r.idx], r.sign))
                .collect();
            let cons: Vec<f64> = active
                .iter()
                .map(|r| r.sign * z[r.idx] - r.offset)
                .collect();
            let grad0 = linalg::sub(&f0.gradient(&x), tilted.v);
            if !rows.is_empty() {
                // Least-squares multipliers for the current point.
                let at: Vec<Vec<f64>> = (0..n)
                    .map(|i| rows.iter().map(|r| r[i]).collect())
                    .collect();
                y = linalg::lstsq(&at, &linalg::scale(&grad0, -1.0), 1e-12);
            }
            let mut stat = grad0.clone();
            for (yi, row) in y.iter().zip(&rows) {
                for (s, r) in stat.iter_mut().zip(row) {
                    *s += yi * r;
                }
            }
            let resid = linalg::norm_inf(&stat)
                .max(cons.iter().fold(0.0_f64, |a, c| a.max(c.abs())));
            if resid <= cfg.refine_tol * 1e-2 {
                break;
            }
            // Newton step on [stationarity; active constraints].
            let mut hess = f0.hessian(&x);
            for (r, &yi) in active.iter().zip(&y) {
                if yi != 0.0 {
                    let hi = fmap.component_hessian(r.idx, &x);
                    for a in 0..n {
                        for b in 0..n {
                            hess[a][b] += yi * r.sign * hi[a][b];
                        }
                    }
                }
            }
            let dim = n + rows.len();
            let mut kkt = vec![vec![0.0; dim]; dim];
            let mut rhs = vec![0.0; dim];
            for a in 0..n {
                for b in 0..n {
                    kkt[a][b] = hess[a][b];
                }
                for (k, row) in rows.iter().enumerate() {
                    kkt[a][n + k] = row[a];
                    kkt[n + k][a] = row[a];
                }
                rhs[a] = -stat[a];
            }
            for (k, &c) in cons.iter().enumerate() {
                rhs[n + k] = -c;
            }
            let step = linalg::solve(&kkt, &rhs)
                .unwrap_or_else(|| linalg::lstsq(&kkt, &rhs, 1e-10));
            // Backtracking on the KKT residual.
            let mut t = 1.0;
            let mut accepted = false;
            for _bt in 0..30 {
                let mut xt = x.clone();
                for (xi, di) in xt.iter_mut().zip(&step[..n]) {
                    *xi += t * di;
                }
                project_ball(&mut xt, center, radius);
                let yt: Vec<f64> = y
                    .iter()
                    .zip(&step[n..])
                    .map(|(yi, di)| yi + t * di)
                    .collect();
                let rt = kkt_point_residual(tilted, &xt, &yt, &active);
                if rt < resid * (1.0 - 1e-4 * t) {
                    x = xt;
                    y = yt;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }

        // Exchange step: drop the most negative inequality multiplier, or
        // add the most violated constraint.
        let neg = active
            .iter()
            .enumerate()
            .filter(|(k, r)| !r.is_equality && y[*k] < -10.0 * cfg.active_tol)
            .min_by(|a, b| y[a.0].total_cmp(&y[b.0]))
            .map(|(k, _)| k);
        if let Some(k) = neg {
            active.remove(k);
            continue;
        }
        let z = linalg::add(&fmap.eval(&x), tilted.u);
        let violated = candidate_rows(g, &z, -cfg.active_tol)
            .into_iter()
            .filter(|r| {
                !active
                    .iter()
                    .any(|a| a.idx == r.idx && a.sign == r.sign && a.is_equality == r.is_equality)
            })
            .filter(|r| r.sign * z[r.idx] - r.offset > cfg.active_tol)
            .max_by(|a, b| {
                (a.sign * z[a.idx] - a.offset).total_cmp(&(b.sign * z[b.idx] - b.offset))
            });
        match violated {
            Some(r) => active.push(r),
            None => break,
        }
    }
    x
}

/// Plain Newton with value backtracking for smooth composites.
fn newton_smooth(
    tilted: &Tilted,
    x0: &[f64],
    cfg: &SolveConfig,
    center: &[f64],
    radius: f64,
) -> Vec<f64> {
    let mut x = x0.to_vec();
    for _ in 0..cfg.refine_iters {
        let Some(grad) = tilted.gradient(&x) else { break };
        if linalg::norm_inf(&grad) <= cfg.refine_tol * 1e-3 {
            break;
        }
        let hess = smooth_hessian(tilted.problem, &x, tilted.u);
        let step = hess
            .as_ref()
            .and_then(|h| linalg::solve(h, &linalg::scale(&grad, -1.0)))
            .unwrap_or_else(|| linalg::scale(&grad, -1.0));
        let fx = tilted.value(&x);
        let mut t = 1.0;
        let mut moved = false;
        for _bt in 0..40 {
            let mut xt = x.clone();
            for (xi, di) in xt.iter_mut().zip(&step) {
                *xi += t * di;
            }
            project_ball(&mut xt, center, radius);
            if tilted.value(&xt) < fx {
                x = xt;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    x
}

/// Exact Hessian of `phi(., u)` for smooth composite pieces.
fn smooth_hessian(problem: &ParametricProblem, x: &[f64], u: &[f64]) -> Option<Vec<Vec<f64>>> {
    let ProblemBody::Composite { f0, fmap, g } = &problem.body else {
        return None;
    };
    let n = problem.n;
    let mut h = f0.hessian(x);
    match g {
        ConvexPiece::SquaredNorm { w } => {
            let z = linalg::add(&fmap.eval(x), u);
            let jac = fmap.jacobian(x);
            for a in 0..n {
                for b in 0..n {
                    let mut acc = 0.0;
                    for (j, zj) in z.iter().enumerate() {
                        acc += jac[j][a] * jac[j][b];
                        acc += zj * fmap.component_hessian(j, x)[a][b];
                    }
                    h[a][b] += w * acc;
                }
            }
            Some(h)
        }
        ConvexPiece::EuclideanNorm { .. } => None,
        _ => Some(h),
    }
}

// ---------------------------------------------------------------------------
// solve_tilted
// ---------------------------------------------------------------------------

/// Minimizes `phi(x, u) - v.[x - xbar]` over `|x - xbar| < delta`.
///
/// Grid search keeps every feasible grid basin; each basin is refined and
/// the refined candidates are clustered at `cluster_tol`. When the grid
/// sees no feasible point and `g` is an indicator (equality-constrained
/// feasible sets have measure zero), refinement starts from the best
/// exact-penalty points instead; `EmptyLocalProblem` is returned only when
/// no refined candidate reaches feasibility.
pub fn solve_tilted(
    problem: &ParametricProblem,
    loc: &Localization,
    v: &[f64],
    u: &[f64],
    cfg: &SolveConfig,
) -> Result<ArgminResult> {
    cfg.validate()?;
    loc.validate(problem)?;
    if v.len() != problem.n || u.len() != problem.m {
        return Err(Error::Input("solve_tilted dimension mismatch".into()));
    }
    if problem.n > MAX_GRID_DIM {
        return Err(Error::Unsupported(format!(
            "grid search capped at dimension {MAX_GRID_DIM}"
        )));
    }
    let k = cfg.grid_points_per_axis;
    if k.pow(problem.n as u32) > 8_000_000 {
        return Err(Error::Unsupported(
            "grid too large; reduce grid_points_per_axis or dimension".into(),
        ));
    }

    let de = loc.delta - cfg.refine_tol;
    if de <= 0.0 {
        return Err(Error::Config("delta must exceed refine_tol".into()));
    }
    let feas_slack = 10.0 * cfg.refine_tol;
    let tilted = Tilted::new(problem, v, u, &loc.xbar, feas_slack);
    let grid = Grid::new(&loc.xbar, de, k);

    let mut values = vec![f64::INFINITY; grid.len()];
    for (flat, slot) in values.iter_mut().enumerate() {
        let x = grid.point(flat);
        if problem.n > 1 && linalg::norm2(&linalg::sub(&x, &loc.xbar)) > de {
            continue;
        }
        *slot = tilted.value(&x);
    }

    let mut seeds: Vec<usize> = grid_basins(&values, &grid);

    if seeds.is_empty() {
        let is_indicator = matches!(
            &problem.body,
            ProblemBody::Composite { g, .. } if g.is_indicator()
        );
        if !is_indicator {
            return Err(Error::EmptyLocalProblem);
        }

        let mut pvals = vec![f64::INFINITY; grid.len()];
        for (flat, slot) in pvals.iter_mut().enumerate() {
            let x = grid.point(flat);
            if problem.n > 1 && linalg::norm2(&linalg::sub(&x, &loc.xbar)) > de {
                continue;
            }
            *slot = tilted.penalty(&x);
        }
        seeds = grid_basins(&pvals, &grid);
        if seeds.is_empty() {
            return Err(Error::EmptyLocalProblem);
        }
    }

    let mut scored: Vec<(Vec<f64>, f64)> = Vec::new();
    for &flat in &seeds {
        let x0 = grid.point(flat);
        let mut x = refine_candidate(&tilted, &grid, &x0, cfg, &loc.xbar, de);
        project_ball(&mut x, &loc.xbar, de);
        let val = tilted.value_lenient(&x);
        if val.is_finite() {
            scored.push((x, val));
        }
    }
    if scored.is_empty() {
        return Err(Error::EmptyLocalProblem);
    }
    let best = scored
        .iter()
        .map(|(_, val)| *val)
        .fold(f64::INFINITY, f64::min);
    scored.retain(|(_, val)| *val <= best + cfg.cluster_tol);
    scored.sort_by(|a, b| lex_cmp(&a.0, &b.0));

    let mut clusters: Vec<Vec<f64>> = Vec::new();
    for (x, _) in &scored {
        let dup = clusters
            .iter()
            .any(|rep| linalg::norm2(&linalg::sub(x, rep)) <= cfg.cluster_tol);
        if !dup {
            clusters.push(x.clone());
        }
    }

    let boundary_hit = clusters
        .iter()
        .any(|x| linalg::norm2(&linalg::sub(x, &loc.xbar)) >= de - cfg.refine_tol);
    let single_valued = clusters.len() == 1;
    Ok(ArgminResult {
        minimizers: clusters,
        value: best,
        single_valued,
        boundary_hit,
        evaluations: tilted.evals.get(),
    })
}

fn refine_candidate(
    tilted: &Tilted,
    grid: &Grid,
    x0: &[f64],
    cfg: &SolveConfig,
    center: &[f64],
    radius: f64,
) -> Vec<f64> {
    let n = x0.len();
    let bracket_1d = || {
        let h = grid.spacing(0);
        let lo = (x0[0] - h).max(center[0] - radius);
        let hi = (x0[0] + h).min(center[0] + radius);
        (lo, hi)
    };
    match &tilted.problem.body {
        // Indicator-constrained composites go through the exact penalty
        // even in one dimension: equality feasible sets are spikes the
        // value-based golden section cannot track.
        ProblemBody::Composite { g, .. } if g.is_indicator() => {
            let step0 = grid.spacing(0).max(1e-6);
            let pen = |x: &[f64]| tilted.penalty(x);
            let x1 = compass_search(&pen, x0, step0, cfg.refine_tol * 1e-3, center, radius);
            let x2 = kkt_polish(tilted, &x1, cfg, center, radius);
            let (f1, f2) = (tilted.value_lenient(&x1), tilted.value_lenient(&x2));
            if f2.is_finite() && (f2 <= f1 || !f1.is_finite()) {
                x2
            } else {
                x1
            }
        }
        ProblemBody::Composite { .. } if n == 1 => {
            vec![refine_1d(tilted, bracket_1d(), cfg)]
        }
        ProblemBody::Composite { .. } => newton_smooth(tilted, x0, cfg, center, radius),
        ProblemBody::ClosedForm(_) if n == 1 => {
            vec![refine_1d(tilted, bracket_1d(), cfg)]
        }
        ProblemBody::ClosedForm(_) => {
            let val = |x: &[f64]| tilted.value(x);
            compass_search(&val, x0, grid.spacing(0), cfg.refine_tol * 1e-3, center, radius)
        }
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            other => return other,
        }
    }
    std::cmp::Ordering::Equal
}

// ---------------------------------------------------------------------------
// Stationary-point map
// ---------------------------------------------------------------------------

/// Distance from `v` to the attainable stationarity values at `x`: zero
/// (up to tolerance) exactly when the multiplier set `Y(x, u, v)` is
/// nonempty. `+inf` when `F(x) + u` is outside the domain of `g`.
pub fn kkt_residual(
    problem: &ParametricProblem,
    x: &[f64],
    u: &[f64],
    v: &[f64],
    active_tol: f64,
) -> Result<f64> {
    if x.len() != problem.n || u.len() != problem.m || v.len() != problem.n {
        return Err(Error::Input("kkt_residual dimension mismatch".into()));
    }
    match &problem.body {
        ProblemBody::ClosedForm(cf) => match problem.phi_grad_x(x, u)? {
            Some(g) => Ok((g[0] - v[0]).abs()),
            None => {
                if problem.m == 0 || u.iter().all(|&ui| ui == 0.0) {
                    let (lo, hi) = cf.subgrad_x_interval(x[0], problem.xbar[0]);
                    Ok((lo - v[0]).max(v[0] - hi).max(0.0))
                } else {
                    Err(Error::Unsupported(
                        "subgradient interval only available on the u = 0 slice".into(),
                    ))
                }
            }
        },
        ProblemBody::Composite { f0, fmap, g } => {
            let z = linalg::add(&fmap.eval(x), u);
            if !g.in_domain(&z, active_tol) {
                return Ok(f64::INFINITY);
            }
            let jac = fmap.jacobian(x);
            let mut target = linalg::sub(v, &f0.gradient(x));
            // Columns: oriented active inequality gradients (multiplier
            // >= 0) plus +/- pairs for equality rows (free multiplier).
            let mut columns: Vec<Vec<f64>> = Vec::new();
            match g {
                ConvexPiece::OrthantNonpos { s, .. } => {
                    for i in 0..*s {
                        if z[i].abs() <= active_tol {
                            columns.push(jac[i].clone());
                        }
                    }
                }
                ConvexPiece::ZeroIndicator { .. } => {
                    for row in &jac {
                        columns.push(row.clone());
                        columns.push(linalg::scale(row, -1.0));
                    }
                }
                ConvexPiece::Box { lo, hi } => {
                    for i in 0..z.len() {
                        let at_lo = lo[i].is_finite() && (z[i] - lo[i]).abs() <= active_tol;
                        let at_hi = hi[i].is_finite() && (z[i] - hi[i]).abs() <= active_tol;
                        if at_lo && at_hi {
                            columns.push(jac[i].clone());
                            columns.push(linalg::scale(&jac[i], -1.0));
                        } else if at_hi {
                            columns.push(jac[i].clone());
                        } else if at_lo {
                            columns.push(linalg::scale(&jac[i], -1.0));
                        }
                    }
                }
                ConvexPiece::SquaredNorm { w } => {
                    let gz = linalg::scale(&z, *w);
                    target = linalg::sub(&target, &linalg::mat_t_vec(&jac, &gz));
                }
                ConvexPiece::EuclideanNorm { w } => {
                    let nz = linalg::norm2(&z);
                    if nz > active_tol {
                        let gz = linalg::scale(&z, w / nz);
                        target = linalg::sub(&target, &linalg::mat_t_vec(&jac, &gz));
                    } else {
                        return Err(Error::Unsupported(
                            "kkt_residual over a norm kink is not implemented".into(),
                        ));
                    }
                }
            }
            if columns.is_empty() {
                return Ok(linalg::norm2(&target));
            }
            let a: Vec<Vec<f64>> = (0..problem.n)
                .map(|i| columns.iter().map(|c| c[i]).collect())
                .collect();
            let y = linalg::nnls(&a, &target);
            let fitted = linalg::mat_vec(&a, &y);
            Ok(linalg::norm2(&linalg::sub(&fitted, &target)))
        }
    }
}

/// All stationary points in the ball passing the attentive filter
/// `phi(x, u) < alpha`: points whose multiplier set is nonempty at
/// residual `refine_tol`. Sign scanning for closed forms; grid seeding of
/// value and stationarity-residual basins with KKT polish for composites.
pub fn truncated_stationary_map(
    problem: &ParametricProblem,
    loc: &Localization,
    v: &[f64],
    u: &[f64],
    cfg: &SolveConfig,
) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    loc.validate(problem)?;
    if v.len() != problem.n || u.len() != problem.m {
        return Err(Error::Input(
            "truncated_stationary_map dimension mismatch".into(),
        ));
    }
    let de = loc.delta - cfg.refine_tol;
    let mut points: Vec<Vec<f64>> = Vec::new();

    match &problem.body {
        ProblemBody::ClosedForm(_) => {
            // Fine sign scan of the tilted gradient; bisection converges to
            // sign changes whether they are roots or kink jumps.
            let fine = 4 * cfg.grid_points_per_axis + 1;
            let gval = |t: f64| -> Option<f64> {
                problem
                    .phi_grad_x(&[t], u)
                    .ok()
                    .flatten()
                    .map(|g| g[0] - v[0])
            };
            let coords: Vec<f64> = (0..fine)
                .map(|i| loc.xbar[0] - de + 2.0 * de * (i as f64) / ((fine - 1) as f64))
                .collect();
            let samples: Vec<(f64, Option<f64>)> =
                coords.iter().map(|&t| (t, gval(t))).collect();
            for w in samples.windows(2) {
                let (a, ga) = (w[0].0, w[0].1);
                let (b, gb) = (w[1].0, w[1].1);
                let (Some(ga), Some(gb)) = (ga, gb) else { continue };
                if ga == 0.0 {
                    points.push(vec![a]);
                } else if ga < 0.0 && gb >= 0.0 {
                    let g = |t: f64| gval(t).unwrap_or(0.0);
                    points.push(vec![bisect_sign(&g, a, b)]);
                } else if ga > 0.0 && gb <= 0.0 {
                    // Descending sign change (a maximum): negate.
                    let g = |t: f64| -gval(t).unwrap_or(0.0);
                    points.push(vec![bisect_sign(&g, a, b)]);
                }
            }
        }
        ProblemBody::Composite { .. } => {
            let solved = solve_tilted(problem, loc, v, u, cfg)?;
            let tilted = Tilted::new(problem, v, u, &loc.xbar, 10.0 * cfg.refine_tol);
            let grid = Grid::new(&loc.xbar, de, cfg.grid_points_per_axis);
            let loose = cfg.active_tol.max(0.5 * grid.spacing(0));
            let mut rvals = vec![f64::INFINITY; grid.len()];
            for (flat, slot) in rvals.iter_mut().enumerate() {
                let x = grid.point(flat);
                if problem.n > 1 && linalg::norm2(&linalg::sub(&x, &loc.xbar)) > de {
                    continue;
                }
                *slot = kkt_residual(problem, &x, u, v, loose)?;
            }
            let mut seeds: Vec<Vec<f64>> = grid_basins(&rvals, &grid)
                .into_iter()
                .map(|f| grid.point(f))
                .collect();
            seeds.extend(solved.minimizers.iter().cloned());
            for seed in seeds {
                points.push(kkt_polish(&tilted, &seed, cfg, &loc.xbar, de));
            }
        }
    }

    // Filter: residual, ball, attentive level; then cluster.
    let strict = cfg.active_tol.max(100.0 * cfg.refine_tol);
    let mut kept: Vec<Vec<f64>> = Vec::new();
    for x in points {
        if linalg::norm2(&linalg::sub(&x, &loc.xbar)) > de {
            continue;
        }
        let resid = kkt_residual(problem, &x, u, v, strict)?;
        if !(resid <= cfg.refine_tol.max(1e-7)) {
            continue;
        }
        let phi = problem.eval_phi(&x, u)?;
        let phi = if phi.is_finite() {
            phi
        } else {
            // Tolerate refinement-level constraint violation.
            match &problem.body {
                ProblemBody::Composite { f0, fmap, g }
                    if g.violation(&linalg::add(&fmap.eval(&x), u)) <= 10.0 * cfg.refine_tol =>
                {
                    f0.eval(&x)
                }
                _ => continue,
            }
        };
        if phi >= loc.alpha {
            continue;
        }
        kept.push(x);
    }
    kept.sort_by(|a, b| lex_cmp(a, b));
    let mut clusters: Vec<Vec<f64>> = Vec::new();
    for x in kept {
        if !clusters
            .iter()
            .any(|rep| linalg::norm2(&linalg::sub(&x, rep)) <= cfg.cluster_tol)
        {
            clusters.push(x);
        }
    }
    Ok(clusters)
}

// ---------------------------------------------------------------------------
// Value surfaces
// ---------------------------------------------------------------------------

/// One `(v, u)` node of a value surface.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceRow {
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    /// `m_delta(v, u)`; NaN when the node errored.
    pub m_value: f64,
    /// Representative minimizer (lexicographically smallest cluster).
    pub x: Vec<f64>,
    pub single_valued: bool,
    pub boundary_hit: bool,
    pub error: Option<String>,
}

/// Batch of localized solves over node lists, row order `v` outer, `u`
/// inner. Rows are computed independently (in parallel) and reduced in
/// node order, so output is identical for any worker count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceTable {
    pub n: usize,
    pub m: usize,
    pub rows: Vec<SurfaceRow>,
}

pub fn value_surface(
    problem: &ParametricProblem,
    loc: &Localization,
    v_nodes: &[Vec<f64>],
    u_nodes: &[Vec<f64>],
    cfg: &SolveConfig,
) -> Result<SurfaceTable> {
    cfg.validate()?;
    loc.validate(problem)?;
    for v in v_nodes {
        if linalg::norm2(v) > loc.v_radius * (1.0 + 1e-12) {
            return Err(Error::Config("v node outside v_radius".into()));
        }
    }
    for u in u_nodes {
        if linalg::norm2(u) > loc.u_radius * (1.0 + 1e-12) {
            return Err(Error::Config("u node outside u_radius".into()));
        }
    }
    let pairs: Vec<(usize, usize)> = (0..v_nodes.len())
        .flat_map(|i| (0..u_nodes.len()).map(move |j| (i, j)))
        .collect();
    let rows: Vec<SurfaceRow> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let v = &v_nodes[i];
            let u = &u_nodes[j];
            match solve_tilted(problem, loc, v, u, cfg) {
                Ok(res) => SurfaceRow {
                    v: v.clone(),
                    u: u.clone(),
                    m_value: res.value,
                    x: res.minimizers[0].clone(),
                    single_valued: res.single_valued,
                    boundary_hit: res.boundary_hit,
                    error: None,
                },
                Err(e) => SurfaceRow {
                    v: v.clone(),
                    u: u.clone(),
                    m_value: f64::NAN,
                    x: vec![f64::NAN; problem.n],
                    single_valued: false,
                    boundary_hit: false,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(SurfaceTable { n: problem.n, m: problem.m, rows })
}

impl SurfaceTable {
    /// CSV dump: `v_1..v_n, u_1..u_m, m_delta, x_1..x_n, single_valued,
    /// boundary_hit`. Errored rows carry NaN values.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let mut header: Vec<String> = Vec::new();
        header.extend((1..=self.n).map(|i| format!("v_{i}")));
        header.extend((1..=self.m).map(|i| format!("u_{i}")));
        header.push("m_delta".into());
        header.extend((1..=self.n).map(|i| format!("x_{i}")));
        header.push("single_valued".into());
        header.push("boundary_hit".into());
        out.push_str(&header.join(","));
        out.push('\n');
        for row in &self.rows {
            let mut fields: Vec<String> = Vec::new();
            fields.extend(row.v.iter().map(|x| format!("{x:e}")));
            fields.extend(row.u.iter().map(|x| format!("{x:e}")));
            fields.push(format!("{:e}", row.m_value));
            fields.extend(row.x.iter().map(|x| format!("{x:e}")));
            fields.push(row.single_valued.to_string());
            fields.push(row.boundary_hit.to_string());
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{neg_quadratic_pinned, registry_build};

    fn cfg() -> SolveConfig {
        SolveConfig::default()
    }

    fn loc(problem: &ParametricProblem, delta: f64) -> Localization {
        Localization::around(problem, delta)
    }

    #[test]
    fn quadratic_tilted_solution() {
        let p = registry_build("quadratic").unwrap();
        let l = loc(&p, 1.0);
        let res = solve_tilted(&p, &l, &[0.2], &[0.1], &cfg()).unwrap();
        assert!(res.single_valued);
        assert!((res.minimizers[0][0] - 0.3).abs() < 1e-10);
        assert!((res.value + 0.045).abs() < 1e-12);
        assert!(!res.boundary_hit);
    }

    #[test]
    fn ex32_unperturbed_minimum_at_anchor() {
        let p = registry_build("ex32").unwrap();
        let l = loc(&p, 0.5);
        let res = solve_tilted(&p, &l, &[0.0], &[0.0], &cfg()).unwrap();
        assert!(res.single_valued);
        assert!(res.minimizers[0][0].abs() < 1e-10);
        assert!(res.value.abs() < 1e-12);
    }

    #[test]
    fn ex32_perturbed_matches_root_oracle() {
        // Independent oracle: bisection on the stationarity relation
        // (z^(1/3) + 1) x / z = 1, z = |(x, u)|.
        let oracle = |u: f64| -> f64 {
            let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
            for _ in 0..300 {
                let mid = 0.5 * (lo + hi);
                let z = mid.hypot(u);
                let g = (z.powf(1.0 / 3.0) + 1.0) * (mid / z) - 1.0;
                if g > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let p = registry_build("ex32").unwrap();
        let l = loc(&p, 0.5);
        for u in [1e-3, 1e-4, 1e-6] {
            let res = solve_tilted(&p, &l, &[0.0], &[u], &cfg()).unwrap();
            let expect = oracle(u);
            assert!(
                (res.minimizers[0][0] - expect).abs() < 1e-9 * (1.0 + expect),
                "u={u}: solver {} vs oracle {expect}",
                res.minimizers[0][0]
            );
        }
        // Frozen value from the oracle at u = 1e-4.
        let res = solve_tilted(&p, &l, &[0.0], &[1e-4], &cfg()).unwrap();
        assert!((res.minimizers[0][0] - 2.706423351761e-4).abs() < 1e-12);
    }

    #[test]
    fn ex33_diagonal_parameter_shift() {
        let p = registry_build("ex33").unwrap();
        let l = loc(&p, 0.5);
        let mut c = cfg();
        c.grid_points_per_axis = 11;
        let t = 1e-3;
        let res = solve_tilted(&p, &l, &[0.0; 4], &[-t; 4], &c).unwrap();
        assert!(res.single_valued, "minimizers: {:?}", res.minimizers);
        let x = &res.minimizers[0];
        assert!(
            linalg::norm_inf(&linalg::sub(x, &[0.0, 0.0, -t, 0.0])) < 1e-7,
            "{x:?}"
        );
        assert!((res.value + t).abs() < 1e-9);
    }

    #[test]
    fn neg_quadratic_hits_boundary() {
        let p = registry_build("neg_quadratic").unwrap();
        let l = loc(&p, 0.5);
        let res = solve_tilted(&p, &l, &[0.0], &[], &cfg()).unwrap();
        assert!(res.boundary_hit);
        assert!(!res.single_valued); // two symmetric boundary minimizers
        let res = solve_tilted(&p, &l, &[0.1], &[], &cfg()).unwrap();
        assert!(res.boundary_hit);
        assert!(res.single_valued);
        assert!((res.minimizers[0][0] - (0.5 - cfg().refine_tol)).abs() < 1e-6);
    }

    #[test]
    fn empty_local_problem_detected() {
        // x + 10 <= 0 has no feasible point in |x| < 1 around 0.
        let f0 = crate::poly::Polynomial::zero(1);
        let fmap = crate::poly::SmoothMap::new(
            1,
            vec![crate::poly::Polynomial::new(1, vec![(1.0, vec![1])]).unwrap()],
        )
        .unwrap();
        let p = ParametricProblem::composite(
            "far",
            f0,
            fmap,
            ConvexPiece::orthant_nonpos(1, 1).unwrap(),
            vec![-11.0],
        )
        .unwrap();
        let l = Localization {
            xbar: vec![0.0],
            delta: 1.0,
            alpha: f64::INFINITY,
            v_radius: 0.1,
            u_radius: 0.1,
        };
        let err = solve_tilted(&p, &l, &[0.0], &[10.0], &cfg()).unwrap_err();
        assert!(matches!(err, Error::EmptyLocalProblem));
    }

    #[test]
    fn equality_constrained_solve_via_penalty_seeds() {
        let p = neg_quadratic_pinned().unwrap();
        let l = loc(&p, 1.0);
        let u = 0.3;
        let res = solve_tilted(&p, &l, &[0.0], &[u], &cfg()).unwrap();
        assert!(res.single_valued);
        assert!(
            (res.minimizers[0][0] + u).abs() < 1e-7,
            "{:?}",
            res.minimizers
        );
        assert!((res.value + 0.5 * u * u).abs() < 1e-7);
    }

    #[test]
    fn stationary_map_quadratic_origin() {
        let p = registry_build("quadratic").unwrap();
        let l = loc(&p, 1.0);
        let pts = truncated_stationary_map(&p, &l, &[0.0], &[0.0], &cfg()).unwrap();
        assert_eq!(pts.len(), 1);
        assert!(pts[0][0].abs() < 1e-10);
    }

    #[test]
    fn stationary_map_matches_argmin_on_ex33() {
        let p = registry_build("ex33").unwrap();
        let l = loc(&p, 0.5);
        let mut c = cfg();
        c.grid_points_per_axis = 11;
        let t = 1e-3;
        let pts = truncated_stationary_map(&p, &l, &[0.0; 4], &[-t; 4], &c).unwrap();
        let arg = solve_tilted(&p, &l, &[0.0; 4], &[-t; 4], &c).unwrap();
        assert_eq!(pts.len(), 1, "{pts:?}");
        assert!(
            linalg::norm2(&linalg::sub(&pts[0], &arg.minimizers[0])) <= c.cluster_tol * 10.0,
            "stationary {:?} vs argmin {:?}",
            pts,
            arg.minimizers
        );
    }

    #[test]
    fn stationary_map_convex_closed_form() {
        // Stationarity = optimality for the convex ex32.
        let p = registry_build("ex32").unwrap();
        let l = loc(&p, 0.5);
        let pts = truncated_stationary_map(&p, &l, &[0.0], &[1e-3], &cfg()).unwrap();
        let arg = solve_tilted(&p, &l, &[0.0], &[1e-3], &cfg()).unwrap();
        assert_eq!(pts.len(), 1);
        assert!((pts[0][0] - arg.minimizers[0][0]).abs() < 1e-8);
    }

    #[test]
    fn stationary_map_finds_interior_maximum_of_neg_quadratic() {
        // The tilted stationary point of -x^2/2 is x = -v (a maximum), while
        // the argmin sits on the boundary: the two maps genuinely differ.
        let p = registry_build("neg_quadratic").unwrap();
        let l = loc(&p, 0.5);
        let pts = truncated_stationary_map(&p, &l, &[0.1], &[], &cfg()).unwrap();
        assert_eq!(pts.len(), 1);
        assert!((pts[0][0] + 0.1).abs() < 1e-9, "{pts:?}");
    }

    #[test]
    fn attentive_filter_discards_high_values() {
        let p = registry_build("quadratic").unwrap();
        let mut l = loc(&p, 1.0);
        l.alpha = 1e-6;
        let pts = truncated_stationary_map(&p, &l, &[0.0], &[0.0], &cfg()).unwrap();
        assert_eq!(pts.len(), 1);
        // With tilt v = 0.8 the stationary point is x = 0.8 where
        // phi(x, 0) = 0.32 >= alpha: filtered out.
        let pts = truncated_stationary_map(&p, &l, &[0.8], &[0.0], &cfg()).unwrap();
        assert!(pts.is_empty(), "{pts:?}");
    }

    #[test]
    fn surface_rows_and_quadratic_identity() {
        let p = registry_build("quadratic").unwrap();
        let mut l = loc(&p, 1.0);
        l.v_radius = 0.3;
        l.u_radius = 0.3;
        let v_nodes: Vec<Vec<f64>> = (-2..=2).map(|i| vec![0.1 * i as f64]).collect();
        let u_nodes: Vec<Vec<f64>> = (-2..=2).map(|i| vec![0.1 * i as f64]).collect();
        let surf = value_surface(&p, &l, &v_nodes, &u_nodes, &cfg()).unwrap();
        assert_eq!(surf.rows.len(), 25);
        for row in &surf.rows {
            let expect = -0.5 * (row.u[0] + row.v[0]).powi(2);
            assert!((row.m_value - expect).abs() < 1e-10, "row {row:?}");
            assert!(row.single_valued);
            assert!(row.error.is_none());
        }
        let csv = surf.to_csv();
        assert!(csv.starts_with("v_1,u_1,m_delta,x_1,single_valued,boundary_hit\n"));
        assert_eq!(csv.lines().count(), 26);
    }

    #[test]
    fn surface_flags_per_node_errors() {
        let f0 = crate::poly::Polynomial::zero(1);
        let fmap = crate::poly::SmoothMap::new(
            1,
            vec![crate::poly::Polynomial::new(1, vec![(1.0, vec![1])]).unwrap()],
        )
        .unwrap();
        let p = ParametricProblem::composite(
            "sometimes",
            f0,
            fmap,
            ConvexPiece::orthant_nonpos(1, 1).unwrap(),
            vec![0.0],
        )
        .unwrap();
        let mut l = loc(&p, 1.0);
        l.u_radius = 10.0;
        let surf =
            value_surface(&p, &l, &[vec![0.0]], &[vec![-0.5], vec![10.0]], &cfg()).unwrap();
        assert!(surf.rows[0].error.is_none());
        assert!(surf.rows[1].error.is_some());
        assert!(surf.rows[1].m_value.is_nan());
    }

    #[test]
    fn grid_doubling_is_stable_on_registry() {
        for id in ["quadratic", "ex32", "neg_quadratic", "abs1d"] {
            let p = registry_build(id).unwrap();
            let l = loc(&p, 0.5);
            let u = vec![1e-3; p.m];
            let mut c1 = cfg();
            c1.grid_points_per_axis = 21;
            let mut c2 = cfg();
            c2.grid_points_per_axis = 41;
            let r1 = solve_tilted(&p, &l, &vec![0.05; p.n], &u, &c1).unwrap();
            let r2 = solve_tilted(&p, &l, &vec![0.05; p.n], &u, &c2).unwrap();
            assert!(
                (r1.value - r2.value).abs() <= 10.0 * c1.refine_tol,
                "{id}: {} vs {}",
                r1.value,
                r2.value
            );
        }
    }
}
