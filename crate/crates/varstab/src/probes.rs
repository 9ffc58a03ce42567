//! Stability probes: Lipschitz-modulus trends, envelope-identity residuals,
//! hypo-convexity elicitation, prox-regularity levels, graphical-derivative
//! inner norms, and the stability classifier.
//!
//! Every probe is empirical. Verdicts are `pass` / `fail` / `inconclusive`
//! at the probed resolution: `fail` requires positive evidence (a trend
//! blowing up beyond `blowup_factor` across at least four scales, a
//! boundary hit, a multi-valued minimizer), `pass` means the data is
//! consistent with the property at every probed scale, and anything in
//! between stays `inconclusive`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::{ClosedForm, ParametricProblem, ProblemBody};
use crate::solver::{
    solve_tilted, truncated_stationary_map, value_surface, Localization, SolveConfig, SurfaceRow,
    SurfaceTable,
};
use crate::subdiff::multiplier_set;

/// Empirical verdict of a probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
    /// The probed condition holds vacuously (empty admissible set).
    Vacuous,
}

/// A point in perturbation space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationPoint {
    pub v: Vec<f64>,
    pub u: Vec<f64>,
}

/// A modulus estimated across shrinking scales.
///
/// `trend` holds the *local* estimate per scale: the sup of difference
/// quotients over node pairs whose distance falls in the annulus between
/// consecutive scales. `cap_trend` holds the cumulative sup over all pairs
/// with distance below the scale, which is monotone as the cap shrinks.
/// `value` is the estimate at the smallest scale (where both coincide).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModulusEstimate {
    pub value: f64,
    pub witness_pair: Option<(PerturbationPoint, PerturbationPoint)>,
    pub trend: Vec<(f64, f64)>,
    pub cap_trend: Vec<(f64, f64)>,
}

impl ModulusEstimate {
    pub fn unavailable() -> Self {
        ModulusEstimate {
            value: f64::NAN,
            witness_pair: None,
            trend: Vec::new(),
            cap_trend: Vec::new(),
        }
    }
}

/// Which perturbation block the Lipschitz estimate varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LipschitzMode {
    /// Pairs share `u`, distance measured in `v`.
    VOnly,
    /// Pairs share `v`, distance measured in `u`.
    UOnly,
    /// Union of both families (coordinate-block perturbations).
    Joint,
}

/// Fail threshold: local trend growth beyond this factor across at least
/// `MIN_TREND_LEN` scales.
pub const DEFAULT_BLOWUP_FACTOR: f64 = 100.0;
const MIN_TREND_LEN: usize = 4;
const MILD_GROWTH: f64 = 3.0;

/// Sup of minimizer difference quotients over node pairs, per scale.
///
/// Scales must be strictly decreasing. Multi-valued or errored rows abort
/// with a probe error naming the offending node.
pub fn estimate_lipschitz(
    surface: &SurfaceTable,
    mode: LipschitzMode,
    scales: &[f64],
) -> Result<ModulusEstimate> {
    if scales.windows(2).any(|w| w[1] >= w[0]) || scales.is_empty() {
        return Err(Error::Config("scales must be strictly decreasing".into()));
    }
    for row in &surface.rows {
        if let Some(err) = &row.error {
            return Err(Error::Probe(format!(
                "node (v={:?}, u={:?}) errored: {err}",
                row.v, row.u
            )));
        }
        if !row.single_valued {
            return Err(Error::Probe(format!(
                "node (v={:?}, u={:?}) is multi-valued",
                row.v, row.u
            )));
        }
    }
    let rows = &surface.rows;
    let mut quotients: Vec<(f64, f64, usize, usize)> = Vec::new();
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let (a, b) = (&rows[i], &rows[j]);
            let same_u = a.u == b.u;
            let same_v = a.v == b.v;
            let dist = match mode {
                LipschitzMode::VOnly if same_u => linalg::norm2(&linalg::sub(&a.v, &b.v)),
                LipschitzMode::UOnly if same_v => linalg::norm2(&linalg::sub(&a.u, &b.u)),
                LipschitzMode::Joint if same_u => linalg::norm2(&linalg::sub(&a.v, &b.v)),
                LipschitzMode::Joint if same_v => linalg::norm2(&linalg::sub(&a.u, &b.u)),
                _ => continue,
            };
            if dist <= 0.0 {
                continue;
            }
            let dx = linalg::norm2(&linalg::sub(&a.x, &b.x));
            quotients.push((dist, dx / dist, i, j));
        }
    }
    if quotients.is_empty() {
        return Err(Error::Probe("no admissible node pairs".into()));
    }

    let mut trend: Vec<(f64, f64)> = Vec::new();
    let mut cap_trend: Vec<(f64, f64)> = Vec::new();
    let mut witness: Option<(usize, usize)> = None;
    for (k, &scale) in scales.iter().enumerate() {
        let lower = scales.get(k + 1).copied().unwrap_or(0.0);
        let mut local = f64::NEG_INFINITY;
        let mut cap = f64::NEG_INFINITY;
        let mut cap_at: Option<(usize, usize)> = None;
        for &(dist, q, i, j) in &quotients {
            if dist <= scale {
                if q > cap {
                    cap = q;
                    cap_at = Some((i, j));
                }
                if dist > lower && q > local {
                    local = q;
                }
            }
        }
        if cap.is_finite() {
            cap_trend.push((scale, cap));
            witness = cap_at.or(witness);
        }
        if local.is_finite() {
            trend.push((scale, local));
        }
    }
    if trend.is_empty() {
        return Err(Error::Probe("no pairs matched any scale".into()));
    }
    let value = cap_trend.last().map(|&(_, c)| c).unwrap_or(f64::NAN);
    let witness_pair = witness.map(|(i, j)| {
        (
            PerturbationPoint { v: rows[i].v.clone(), u: rows[i].u.clone() },
            PerturbationPoint { v: rows[j].v.clone(), u: rows[j].u.clone() },
        )
    });
    Ok(ModulusEstimate { value, witness_pair, trend, cap_trend })
}

/// Verdict from a local Lipschitz trend: fail on blowup across at least
/// four scales, pass on a bounded (at most mildly growing) trend.
pub fn lipschitz_verdict(est: &ModulusEstimate, blowup_factor: f64) -> Verdict {
    if est.trend.len() < 2 {
        return Verdict::Inconclusive;
    }
    let first = est.trend.first().unwrap().1;
    let last = est.trend.last().unwrap().1;
    if first == 0.0 && last == 0.0 {
        return Verdict::Pass;
    }
    let growth = last / first.max(1e-300);
    if growth > blowup_factor && est.trend.len() >= MIN_TREND_LEN {
        Verdict::Fail
    } else if growth <= MILD_GROWTH && last.is_finite() {
        Verdict::Pass
    } else {
        Verdict::Inconclusive
    }
}

// ---------------------------------------------------------------------------
// Envelope identities
// ---------------------------------------------------------------------------

/// Residuals of the tilt-derivative identity `grad_v m = -(M - xbar)`.
///
/// `alt_plus_m` / `alt_minus_m` report the same finite-difference data
/// against the candidate forms `+M` and `-M`, which differ once the anchor
/// is nonzero; all three are surfaced so a mismatch is visible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvelopeVReport {
    pub max_residual: f64,
    pub alt_plus_m: f64,
    pub alt_minus_m: f64,
    pub nodes: usize,
    pub step: f64,
}

pub fn envelope_check_v(
    problem: &ParametricProblem,
    loc: &Localization,
    v_nodes: &[Vec<f64>],
    u: &[f64],
    h: f64,
    cfg: &SolveConfig,
) -> Result<EnvelopeVReport> {
    if h <= cfg.refine_tol {
        return Err(Error::Config(format!(
            "envelope step {h} must exceed the solver tolerance {}",
            cfg.refine_tol
        )));
    }
    let n = problem.n;
    let mut max_residual = 0.0_f64;
    let mut alt_plus = 0.0_f64;
    let mut alt_minus = 0.0_f64;
    for v in v_nodes {
        let base = solve_tilted(problem, loc, v, u, cfg)?;
        if !base.single_valued {
            return Err(Error::Probe(format!("multi-valued minimizer at v={v:?}")));
        }
        let x = &base.minimizers[0];
        for j in 0..n {
            let mut vp = v.clone();
            vp[j] += h;
            let mut vm = v.clone();
            vm[j] -= h;
            let mp = solve_tilted(problem, loc, &vp, u, cfg)?.value;
            let mm = solve_tilted(problem, loc, &vm, u, cfg)?.value;
            let fd = (mp - mm) / (2.0 * h);
            max_residual = max_residual.max((fd + (x[j] - loc.xbar[j])).abs());
            alt_plus = alt_plus.max((fd - x[j]).abs());
            alt_minus = alt_minus.max((fd + x[j]).abs());
        }
    }
    Ok(EnvelopeVReport {
        max_residual,
        alt_plus_m: alt_plus,
        alt_minus_m: alt_minus,
        nodes: v_nodes.len(),
        step: h,
    })
}

/// Residual of the parameter-derivative identity `d_u m = Y(M(v,u), u, v)`.
///
/// At nodes with a unique multiplier the centered difference is compared
/// componentwise; at nodes with a multiplier polytope, forward and backward
/// directional quotients must land inside the support interval
/// `[min y.w, max y.w]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvelopeUReport {
    pub max_residual: f64,
    pub nodes: usize,
    pub polytope_nodes: usize,
    pub step: f64,
}

pub fn envelope_check_u(
    problem: &ParametricProblem,
    loc: &Localization,
    v: &[f64],
    u_nodes: &[Vec<f64>],
    h: f64,
    cfg: &SolveConfig,
) -> Result<EnvelopeUReport> {
    if h <= cfg.refine_tol {
        return Err(Error::Config(format!(
            "envelope step {h} must exceed the solver tolerance {}",
            cfg.refine_tol
        )));
    }
    let m = problem.m;
    if m == 0 {
        return Err(Error::Probe("problem has no parameter block".into()));
    }
    let mut max_residual = 0.0_f64;
    let mut polytope_nodes = 0usize;
    for u in u_nodes {
        let base = solve_tilted(problem, loc, v, u, cfg)?;
        if !base.single_valued {
            return Err(Error::Probe(format!("multi-valued minimizer at u={u:?}")));
        }
        let x = &base.minimizers[0];
        let m0 = base.value;

        let fd_forward = |j: usize| -> Result<f64> {
            let mut up = u.clone();
            up[j] += h;
            Ok((solve_tilted(problem, loc, v, &up, cfg)?.value - m0) / h)
        };
        let fd_backward = |j: usize| -> Result<f64> {
            let mut um = u.clone();
            um[j] -= h;
            Ok((m0 - solve_tilted(problem, loc, v, &um, cfg)?.value) / h)
        };

        match &problem.body {
            ProblemBody::ClosedForm(_) => {
                let y = problem
                    .phi_grad_u(x, u)?
                    .ok_or_else(|| Error::Probe("nonsmooth parameter gradient at node".into()))?;
                for j in 0..m {
                    let central = 0.5 * (fd_forward(j)? + fd_backward(j)?);
                    max_residual = max_residual.max((central - y[j]).abs());
                }
            }
            ProblemBody::Composite { .. } => {
                let act = cfg.active_tol.max(1e-6);
                let set = multiplier_set(problem, x, u, v, act)?;
                let verts = set.vertices()?;
                if verts.is_empty() {
                    return Err(Error::Probe(format!(
                        "empty multiplier set at u={u:?}: stationarity lost"
                    )));
                }
                if verts.len() == 1 {
                    let y = &verts[0];
                    for j in 0..m {
                        let central = 0.5 * (fd_forward(j)? + fd_backward(j)?);
                        max_residual = max_residual.max((central - y[j]).abs());
                    }
                } else {
                    polytope_nodes += 1;
                    for j in 0..m {
                        let mut e = vec![0.0; m];
                        e[j] = 1.0;
                        let (lo, hi) = set.support(&e)?;
                        for q in [fd_forward(j)?, fd_backward(j)?] {
                            let violation = (lo - q).max(q - hi).max(0.0);
                            max_residual = max_residual.max(violation);
                        }
                    }
                }
            }
        }
    }
    Ok(EnvelopeUReport {
        max_residual,
        nodes: u_nodes.len(),
        polytope_nodes,
        step: h,
    })
}

// ---------------------------------------------------------------------------
// Hypo-convexity elicitation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypoConvexityReport {
    /// Smallest elicitation level `e >= 0` making `m(v, .) + (e/2)|u|^2`
    /// pass all midpoint convexity tests; `+inf` when none below `e_max`
    /// suffices.
    pub e: f64,
    pub detected: bool,
    pub v_groups: usize,
    pub midpoint_triples: usize,
}

const CONVEXITY_SLACK: f64 = 1e-8;

/// Adds `(c/2)|u|^2` to every surface value; the exact effect of adding
/// the same term to `phi` itself.
pub fn surface_with_u_quadratic(surface: &SurfaceTable, c: f64) -> SurfaceTable {
    let mut out = surface.clone();
    for row in &mut out.rows {
        row.m_value += 0.5 * c * linalg::dot(&row.u, &row.u);
    }
    out
}

/// Smallest `e >= 0` (bisection to `1e-3`) such that every midpoint
/// convexity test of `m(v, .) + (e/2)|.|^2` passes with slack `-1e-8`.
pub fn hypoconvexity_modulus(surface: &SurfaceTable, e_max: f64) -> Result<HypoConvexityReport> {
    // Group rows by v; nodes are built from shared lists, so exact
    // equality is the right grouping key.
    let mut groups: Vec<(Vec<f64>, Vec<&SurfaceRow>)> = Vec::new();
    for row in &surface.rows {
        if let Some(err) = &row.error {
            return Err(Error::Probe(format!("surface row errored: {err}")));
        }
        match groups.iter_mut().find(|(v, _)| *v == row.v) {
            Some((_, rows)) => rows.push(row),
            None => groups.push((row.v.clone(), vec![row])),
        }
    }
    // Midpoint triples (a, mid, b) with u_mid = (u_a + u_b) / 2.
    // Stored as (m_a, m_mid, m_b, coefficient of e in the test).
    let mut triples: Vec<(f64, f64, f64, f64)> = Vec::new();
    for (_, rows) in &groups {
        for i in 0..rows.len() {
            for j in i + 1..rows.len() {
                let mid: Vec<f64> = rows[i]
                    .u
                    .iter()
                    .zip(&rows[j].u)
                    .map(|(a, b)| 0.5 * (a + b))
                    .collect();
                if mid == rows[i].u {
                    continue;
                }
                if let Some(mrow) = rows
                    .iter()
                    .find(|r| linalg::norm_inf(&linalg::sub(&r.u, &mid)) <= 1e-12)
                {
                    let qa = linalg::dot(&rows[i].u, &rows[i].u);
                    let qb = linalg::dot(&rows[j].u, &rows[j].u);
                    let qm = linalg::dot(&mid, &mid);
                    let quad = 0.5 * (0.5 * (qa + qb) - qm);
                    triples.push((rows[i].m_value, mrow.m_value, rows[j].m_value, quad));
                }
            }
        }
    }
    if triples.is_empty() {
        return Err(Error::Probe("u-grid contains no midpoint triples".into()));
    }
    let passes = |e: f64| -> bool {
        triples
            .iter()
            .all(|&(ma, mm, mb, quad)| 0.5 * (ma + mb) - mm + e * quad >= -CONVEXITY_SLACK)
    };
    let e = if passes(0.0) {
        0.0
    } else if !passes(e_max) {
        f64::INFINITY
    } else {
        let (mut lo, mut hi) = (0.0, e_max);
        while hi - lo > 1e-3 {
            let mid = 0.5 * (lo + hi);
            if passes(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    Ok(HypoConvexityReport {
        e,
        detected: e.is_finite(),
        v_groups: groups.len(),
        midpoint_triples: triples.len(),
    })
}

// ---------------------------------------------------------------------------
// Subgradient graph samples
// ---------------------------------------------------------------------------

/// One point of the subgradient graph of `f = phi(., 0)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphPoint {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub f: f64,
}

/// A sample of `gph df` near the anchor, filtered by `f < alpha`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphSample {
    pub points: Vec<GraphPoint>,
    pub alpha: f64,
    pub base_x: Vec<f64>,
    pub base_v: Vec<f64>,
}

/// Exact piecewise graph description for the 1-d closed forms.
pub fn exact_graph_sample(
    problem: &ParametricProblem,
    radius: f64,
    count: usize,
    alpha: f64,
) -> Result<GraphSample> {
    let Some(cf) = problem.closed_form() else {
        return Err(Error::Unsupported(
            "exact graph sample needs a closed-form body".into(),
        ));
    };
    let xbar = problem.xbar[0];
    let mut points: Vec<GraphPoint> = Vec::new();
    let u0 = vec![0.0; problem.m];
    let mut push = |x: f64, v: f64| {
        let f = problem.eval_phi(&[x], &u0).expect("closed form is total");
        if f < alpha {
            points.push(GraphPoint { x: vec![x], v: vec![v], f });
        }
    };
    match cf {
        ClosedForm::Quadratic { .. } | ClosedForm::NegQuadratic | ClosedForm::Ex32 => {
            for i in 0..count {
                let x = xbar - radius + 2.0 * radius * (i as f64) / ((count - 1) as f64);
                if x == xbar && matches!(cf, ClosedForm::Ex32) {
                    continue;
                }
                let (lo, _hi) = cf.subgrad_x_interval(x, xbar);
                push(x, lo);
            }
            // Kink fan at the anchor.
            let (lo, hi) = cf.subgrad_x_interval(xbar, xbar);
            if lo < hi {
                for i in 0..count {
                    let t = lo + (hi - lo) * (i as f64) / ((count - 1) as f64);
                    push(xbar, t);
                }
            }
        }
        ClosedForm::Abs1d => {
            for i in 1..=count / 2 {
                let x = radius * (i as f64) / ((count / 2) as f64);
                push(xbar + x, 1.0);
                push(xbar - x, -1.0);
            }
            for i in 0..count {
                let t = -1.0 + 2.0 * (i as f64) / ((count - 1) as f64);
                push(xbar, t);
            }
        }
    }
    if points.is_empty() {
        return Err(Error::Probe("graph sample is empty".into()));
    }
    Ok(GraphSample {
        points,
        alpha,
        base_x: problem.xbar.clone(),
        base_v: vec![0.0; problem.n],
    })
}

/// Graph sample for composites: stationary points of the tilted problem at
/// `u = 0` across a tilt sweep, each contributing `(x, v, phi(x, 0))`.
pub fn stationary_graph_sample(
    problem: &ParametricProblem,
    loc: &Localization,
    v_nodes: &[Vec<f64>],
    cfg: &SolveConfig,
) -> Result<GraphSample> {
    let u0 = vec![0.0; problem.m];
    let mut points = Vec::new();
    for v in v_nodes {
        for x in truncated_stationary_map(problem, loc, v, &u0, cfg)? {
            let f = problem.eval_phi(&x, &u0)?;
            let f = if f.is_finite() {
                f
            } else {
                match &problem.body {
                    ProblemBody::Composite { f0, .. } => f0.eval(&x),
                    _ => continue,
                }
            };
            if f < loc.alpha {
                points.push(GraphPoint { x, v: v.clone(), f });
            }
        }
    }
    if points.is_empty() {
        return Err(Error::Probe(
            "stationary sweep produced no graph points".into(),
        ));
    }
    Ok(GraphSample {
        points,
        alpha: loc.alpha,
        base_x: problem.xbar.clone(),
        base_v: vec![0.0; problem.n],
    })
}

// ---------------------------------------------------------------------------
// Prox-regularity level
// ---------------------------------------------------------------------------

/// Estimated prox-regularity level `r` and monotonicity level `s`.
///
/// `r_hat(rho)` is the smallest `r` validating the lower quadratic
/// subgradient inequality over graph points and probes within `rho` of the
/// anchor; `s_hat(rho)` is the largest `s` validating pairwise monotonicity
/// there. The two estimate the same quantity with opposite signs, so
/// `gap = |r_hat + s_hat|` at the smallest scale is a consistency check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProxRegularityReport {
    pub r_hat: f64,
    pub s_hat: f64,
    pub gap: f64,
    /// (scale, r_hat, s_hat), scales strictly decreasing.
    pub trend: Vec<(f64, f64, f64)>,
}

pub fn prox_regularity_level(
    sample: &GraphSample,
    x_probes: &[Vec<f64>],
    scales: &[f64],
) -> Result<ProxRegularityReport> {
    if sample.points.len() < 2 {
        return Err(Error::Probe("graph sample has fewer than 2 points".into()));
    }
    if scales.windows(2).any(|w| w[1] >= w[0]) || scales.is_empty() {
        return Err(Error::Config("scales must be strictly decreasing".into()));
    }
    let f_of = |x: &[f64]| -> Option<f64> {
        sample
            .points
            .iter()
            .find(|p| linalg::norm_inf(&linalg::sub(&p.x, x)) <= 1e-12)
            .map(|p| p.f)
    };
    let mut trend = Vec::new();
    for &rho in scales {
        let pts: Vec<&GraphPoint> = sample
            .points
            .iter()
            .filter(|p| linalg::norm_inf(&linalg::sub(&p.x, &sample.base_x)) <= rho)
            .collect();
        let probes: Vec<&Vec<f64>> = x_probes
            .iter()
            .filter(|x| linalg::norm_inf(&linalg::sub(x, &sample.base_x)) <= rho)
            .collect();
        // r_hat: sup over (x, v) in the truncated graph and probes x' of
        // 2 (f(x) + v.(x'-x) - f(x')) / |x'-x|^2. Probe values are looked
        // up in the sample itself, so the caller controls the f-oracle.
        let mut r_hat = f64::NEG_INFINITY;
        for p in &pts {
            for x2 in &probes {
                let d = linalg::sub(x2, &p.x);
                let dd = linalg::dot(&d, &d);
                if dd < 1e-24 {
                    continue;
                }
                let Some(f2) = f_of(x2) else { continue };
                let num = p.f + linalg::dot(&p.v, &d) - f2;
                r_hat = r_hat.max(2.0 * num / dd);
            }
        }
        // s_hat: inf over graph pairs of (v'-v).(x'-x) / |x'-x|^2.
        let mut s_hat = f64::INFINITY;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                let dx = linalg::sub(&pts[j].x, &pts[i].x);
                let dd = linalg::dot(&dx, &dx);
                if dd < 1e-24 {
                    continue;
                }
                let dv = linalg::sub(&pts[j].v, &pts[i].v);
                s_hat = s_hat.min(linalg::dot(&dv, &dx) / dd);
            }
        }
        if r_hat.is_finite() && s_hat.is_finite() {
            trend.push((rho, r_hat, s_hat));
        }
    }
    let Some(&(_, r_hat, s_hat)) = trend.last() else {
        return Err(Error::Probe(
            "no scale produced both r and s estimates".into(),
        ));
    };
    Ok(ProxRegularityReport {
        r_hat,
        s_hat,
        gap: (r_hat + s_hat).abs(),
        trend,
    })
}

// ---------------------------------------------------------------------------
// Graphical-derivative inner norm
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InnerNormReport {
    /// Max over unit directions of the smallest-step difference quotient.
    pub estimate: f64,
    /// Per-direction quotient ladders (tau, quotient), tau descending.
    pub ladders: Vec<Vec<(f64, f64)>>,
    pub skipped_directions: usize,
    /// Whether every surviving ladder is monotone in tau.
    pub ladders_monotone: bool,
}

/// Uniformly spread unit directions; deterministic in the seed.
pub fn sphere_directions(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    use rand::Rng;
    use rand::SeedableRng;
    if dim == 1 {
        return vec![vec![1.0], vec![-1.0]];
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut dirs = Vec::with_capacity(count);
    while dirs.len() < count {
        let w: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = linalg::norm2(&w);
        if norm > 1e-3 {
            dirs.push(linalg::scale(&w, 1.0 / norm));
        }
    }
    dirs
}

/// Estimates the inner norm of the graphical derivative of `u -> M(v, u)`
/// at `(v, u)` by difference quotients along unit directions, keeping the
/// smallest successful step per direction (no extrapolation).
pub fn graphical_derivative_inner_norm(
    problem: &ParametricProblem,
    loc: &Localization,
    v: &[f64],
    u: &[f64],
    directions: usize,
    taus: &[f64],
    cfg: &SolveConfig,
) -> Result<InnerNormReport> {
    if taus.windows(2).any(|w| w[1] >= w[0]) || taus.is_empty() {
        return Err(Error::Config("taus must be strictly decreasing".into()));
    }
    let base = solve_tilted(problem, loc, v, u, cfg)?;
    if !base.single_valued {
        return Err(Error::Probe("base point is multi-valued".into()));
    }
    let x0 = &base.minimizers[0];
    let dirs = sphere_directions(problem.m, directions, cfg.seed);
    let mut ladders = Vec::new();
    let mut skipped = 0usize;
    let mut estimate = 0.0_f64;
    let mut monotone = true;
    for w in &dirs {
        let mut ladder: Vec<(f64, f64)> = Vec::new();
        for &tau in taus {
            let up: Vec<f64> = u.iter().zip(w).map(|(ui, wi)| ui + tau * wi).collect();
            match solve_tilted(problem, loc, v, &up, cfg) {
                Ok(res) if res.single_valued => {
                    let q = linalg::norm2(&linalg::sub(&res.minimizers[0], x0)) / tau;
                    ladder.push((tau, q));
                }
                _ => {}
            }
        }
        match ladder.last() {
            Some(&(_, q)) => {
                estimate = estimate.max(q);
                monotone &= ladder.windows(2).all(|p| p[1].1 >= p[0].1 - 1e-9)
                    || ladder.windows(2).all(|p| p[1].1 <= p[0].1 + 1e-9);
                ladders.push(ladder);
            }
            None => skipped += 1,
        }
    }
    if ladders.is_empty() {
        return Err(Error::Probe("all directions failed".into()));
    }
    Ok(InnerNormReport {
        estimate,
        ladders,
        skipped_directions: skipped,
        ladders_monotone: monotone,
    })
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

/// Empirical stability classification with the measured moduli.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub tilt_stable: Verdict,
    pub substable: Verdict,
    pub full_substable: Verdict,
    pub fully_stable: Verdict,
    pub lipschitz_v: ModulusEstimate,
    pub lipschitz_u: ModulusEstimate,
    pub lipschitz_joint: ModulusEstimate,
    pub notes: Vec<String>,
}

/// Knobs for [`classify`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifyConfig {
    pub blowup_factor: f64,
    /// Relative ladder floor for closed forms with gradient rules (their
    /// solves stay accurate at extreme scales).
    pub deep_floor: f64,
    /// Relative ladder floor for composites (limited by refinement).
    pub shallow_floor: f64,
    /// Continuity threshold for the pass-at-resolution verdict.
    pub continuity_tol: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            blowup_factor: DEFAULT_BLOWUP_FACTOR,
            deep_floor: 1e-16,
            shallow_floor: 1e-7,
            continuity_tol: 1e-4,
        }
    }
}

fn geometric_ladder(top: f64, floor: f64) -> Vec<f64> {
    let mut scales = Vec::new();
    let mut s = top;
    while s >= floor * 0.999 {
        scales.push(s);
        s /= 10.0;
    }
    scales
}

fn axis_nodes(dim: usize, scales: &[f64]) -> Vec<Vec<f64>> {
    let mut nodes = vec![vec![0.0; dim]];
    for &s in scales {
        for j in 0..dim {
            for sign in [1.0, -1.0] {
                let mut node = vec![0.0; dim];
                node[j] = sign * s;
                nodes.push(node);
            }
        }
    }
    nodes
}

fn merge_trends(a: &[(f64, f64)], b: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = a.to_vec();
    for &(s, e) in b {
        match out
            .iter_mut()
            .find(|(t, _)| (*t - s).abs() <= 1e-12 * s.abs().max(1e-300))
        {
            Some(slot) => slot.1 = slot.1.max(e),
            None => out.push((s, e)),
        }
    }
    out.sort_by(|x, y| y.0.total_cmp(&x.0));
    out
}

/// Runs the tilt / parameter / joint sweeps and classifies the anchor.
pub fn classify(
    problem: &ParametricProblem,
    loc: &Localization,
    cfg: &SolveConfig,
    knobs: &ClassifyConfig,
) -> Result<StabilityVerdict> {
    let mut notes: Vec<String> = Vec::new();
    let floor = if problem.closed_form().is_some() {
        knobs.deep_floor
    } else {
        knobs.shallow_floor
    };
    let u0 = vec![vec![0.0; problem.m]];

    // --- tilt sweep: v varies, u = 0 ---------------------------------
    let v_scales = geometric_ladder(loc.v_radius, loc.v_radius * floor);
    let v_nodes = axis_nodes(problem.n, &v_scales);
    let surf_v = value_surface(problem, loc, &v_nodes, &u0, cfg)?;
    let mut tilt = Verdict::Inconclusive;
    let mut lipschitz_v = ModulusEstimate::unavailable();
    let v_bad = surf_v
        .rows
        .iter()
        .find(|r| r.error.is_some() || !r.single_valued || r.boundary_hit);
    match v_bad {
        Some(row) if row.boundary_hit && row.error.is_none() => {
            tilt = Verdict::Fail;
            notes.push(format!(
                "tilt sweep: minimizer reached the localization boundary at v={:?}",
                row.v
            ));
        }
        Some(row) if !row.single_valued && row.error.is_none() => {
            tilt = Verdict::Fail;
            notes.push(format!(
                "tilt sweep: multi-valued minimizer at v={:?}",
                row.v
            ));
        }
        Some(row) => {
            notes.push(format!(
                "tilt sweep: solver failure at v={:?}: {}",
                row.v,
                row.error.clone().unwrap_or_default()
            ));
        }
        None => {
            lipschitz_v = estimate_lipschitz(&surf_v, LipschitzMode::VOnly, &v_scales)?;
            tilt = lipschitz_verdict(&lipschitz_v, knobs.blowup_factor);
        }
    }

    // --- parameter sweep: u varies, v = 0 ----------------------------
    let mut substable = Verdict::Pass;
    let mut lipschitz_u = ModulusEstimate::unavailable();
    if problem.m == 0 {
        notes.push("no parameter block: substability holds trivially".into());
    } else {
        let u_scales = geometric_ladder(loc.u_radius, loc.u_radius * floor);
        let u_nodes = axis_nodes(problem.m, &u_scales);
        let zero_v = vec![vec![0.0; problem.n]];
        let surf_u = value_surface(problem, loc, &zero_v, &u_nodes, cfg)?;
        let u_bad = surf_u
            .rows
            .iter()
            .find(|r| r.error.is_some() || !r.single_valued);
        match u_bad {
            Some(row) => {
                substable = Verdict::Inconclusive;
                notes.push(format!(
                    "parameter sweep: cannot certify continuity at u={:?}{}",
                    row.u,
                    row.error
                        .as_ref()
                        .map(|e| format!(": {e}"))
                        .unwrap_or_else(|| " (multi-valued)".into())
                ));
            }
            None => {
                let base = surf_u
                    .rows
                    .iter()
                    .find(|r| r.u.iter().all(|&c| c == 0.0))
                    .expect("zero node present");
                let smallest = *u_scales.last().expect("nonempty ladder");
                let omega_min = surf_u
                    .rows
                    .iter()
                    .filter(|r| {
                        let nu = linalg::norm2(&r.u);
                        nu > 0.0 && nu <= smallest * 1.001
                    })
                    .map(|r| linalg::norm2(&linalg::sub(&r.x, &base.x)))
                    .fold(0.0_f64, f64::max);
                substable = if omega_min <= knobs.continuity_tol {
                    Verdict::Pass
                } else if omega_min > 0.05 * loc.delta {
                    notes.push(format!(
                        "parameter sweep: minimizer jump of {omega_min:.3e} persists at the smallest scale"
                    ));
                    Verdict::Fail
                } else {
                    Verdict::Inconclusive
                };
                lipschitz_u = estimate_lipschitz(&surf_u, LipschitzMode::UOnly, &u_scales)?;
            }
        }
    }

    // --- uniform tilt over a coarse u-set (full substability) --------
    let mut full_substable = match (tilt, substable) {
        (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
        (Verdict::Pass, Verdict::Pass) => Verdict::Pass,
        _ => Verdict::Inconclusive,
    };
    if full_substable == Verdict::Pass && problem.m > 0 {
        let mini_scales = geometric_ladder(loc.v_radius, loc.v_radius * 1e-4);
        'outer: for frac in [1.0, 0.1] {
            for j in 0..problem.m {
                for sign in [1.0, -1.0] {
                    let mut u = vec![0.0; problem.m];
                    u[j] = sign * frac * loc.u_radius;
                    let nodes = axis_nodes(problem.n, &mini_scales);
                    let surf = value_surface(problem, loc, &nodes, &[u.clone()], cfg)?;
                    if surf
                        .rows
                        .iter()
                        .any(|r| r.error.is_some() || !r.single_valued)
                    {
                        full_substable = Verdict::Inconclusive;
                        notes.push(format!("uniform tilt check: unusable sweep at u={u:?}"));
                        break 'outer;
                    }
                    let est = estimate_lipschitz(&surf, LipschitzMode::VOnly, &mini_scales)?;
                    match lipschitz_verdict(&est, knobs.blowup_factor) {
                        Verdict::Pass => {}
                        v => {
                            full_substable = v;
                            notes.push(format!("uniform tilt check: verdict {v:?} at u={u:?}"));
                            break 'outer;
                        }
                    }
                }
            }
        }
    }

    // --- joint verdict ------------------------------------------------
    let lipschitz_joint = if problem.m == 0 {
        lipschitz_v.clone()
    } else if !lipschitz_v.trend.is_empty() && !lipschitz_u.trend.is_empty() {
        let trend = merge_trends(&lipschitz_v.trend, &lipschitz_u.trend);
        let cap_trend = merge_trends(&lipschitz_v.cap_trend, &lipschitz_u.cap_trend);
        let value = trend.last().map(|&(_, e)| e).unwrap_or(f64::NAN);
        ModulusEstimate {
            value,
            witness_pair: lipschitz_u
                .witness_pair
                .clone()
                .or_else(|| lipschitz_v.witness_pair.clone()),
            trend,
            cap_trend,
        }
    } else {
        ModulusEstimate::unavailable()
    };
    let mut fully_stable = if tilt == Verdict::Fail || full_substable == Verdict::Fail {
        Verdict::Fail
    } else if lipschitz_joint.trend.is_empty() {
        Verdict::Inconclusive
    } else {
        lipschitz_verdict(&lipschitz_joint, knobs.blowup_factor)
    };
    if fully_stable == Verdict::Pass && (tilt != Verdict::Pass || full_substable != Verdict::Pass)
    {
        fully_stable = Verdict::Inconclusive;
        notes.push("joint modulus bounded but tilt/substability unconfirmed".into());
    }

    Ok(StabilityVerdict {
        tilt_stable: tilt,
        substable,
        full_substable,
        fully_stable,
        lipschitz_v,
        lipschitz_u,
        lipschitz_joint,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::registry_build;

    fn cfg() -> SolveConfig {
        SolveConfig::default()
    }

    #[test]
    fn quadratic_joint_estimate_is_one_at_every_scale() {
        let p = registry_build("quadratic").unwrap();
        let mut l = Localization::around(&p, 1.0);
        l.v_radius = 0.2;
        l.u_radius = 0.2;
        let scales = vec![0.2, 0.02, 0.002, 0.0002];
        let nodes_v = axis_nodes(1, &scales);
        let nodes_u = axis_nodes(1, &scales);
        let surf = value_surface(&p, &l, &nodes_v, &nodes_u, &cfg()).unwrap();
        let est = estimate_lipschitz(&surf, LipschitzMode::Joint, &scales).unwrap();
        for &(_, e) in &est.trend {
            assert!((e - 1.0).abs() < 1e-6, "estimate {e}");
        }
        assert!((est.value - 1.0).abs() < 1e-6);
        assert_eq!(lipschitz_verdict(&est, 100.0), Verdict::Pass);
        // The cumulative cap is monotone as the cap shrinks.
        for w in est.cap_trend.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-9);
        }
    }

    #[test]
    fn multivalued_rows_are_probe_errors() {
        let p = registry_build("neg_quadratic").unwrap();
        let l = Localization::around(&p, 0.5);
        let scales = vec![0.1, 0.01];
        let nodes = axis_nodes(1, &scales);
        let surf = value_surface(&p, &l, &nodes, &[vec![]], &cfg()).unwrap();
        let err = estimate_lipschitz(&surf, LipschitzMode::VOnly, &scales).unwrap_err();
        assert!(matches!(err, Error::Probe(_)));
    }

    #[test]
    fn envelope_v_quadratic_and_shifted_anchor() {
        let p = registry_build("quadratic").unwrap();
        let l = Localization::around(&p, 1.0);
        let nodes: Vec<Vec<f64>> = (-2..=2).map(|i| vec![0.05 * i as f64]).collect();
        let rep = envelope_check_v(&p, &l, &nodes, &[0.1], 1e-4, &cfg()).unwrap();
        assert!(rep.max_residual < 1e-6, "residual {}", rep.max_residual);

        // Anchored at 1 the derived form still holds while +/-M both fail:
        // M(v,u) = 1 + u + v and grad_v m = -(u + v).
        let shifted = registry_build("quadratic")
            .unwrap()
            .with_anchor(vec![1.0])
            .unwrap();
        let l = Localization::around(&shifted, 1.0);
        let rep = envelope_check_v(&shifted, &l, &nodes, &[0.1], 1e-4, &cfg()).unwrap();
        assert!(rep.max_residual < 1e-6, "derived {}", rep.max_residual);
        assert!(rep.alt_plus_m > 0.5, "plus-M should fail: {}", rep.alt_plus_m);
        assert!(rep.alt_minus_m > 0.5, "minus-M should fail: {}", rep.alt_minus_m);
    }

    #[test]
    fn envelope_v_quadratic_residual_has_no_h_term() {
        // Central differences are exact on the quadratic value, so the
        // residual is solver noise, bounded well below C h^2.
        let p = registry_build("quadratic").unwrap();
        let l = Localization::around(&p, 1.0);
        let nodes = vec![vec![0.0], vec![0.05]];
        let r1 = envelope_check_v(&p, &l, &nodes, &[0.1], 2e-4, &cfg()).unwrap();
        let r2 = envelope_check_v(&p, &l, &nodes, &[0.1], 1e-4, &cfg()).unwrap();
        assert!(r2.max_residual <= (0.3 * r1.max_residual).max(1e-8));
    }

    #[test]
    fn envelope_step_below_tolerance_is_config_error() {
        let p = registry_build("quadratic").unwrap();
        let l = Localization::around(&p, 1.0);
        let err = envelope_check_v(&p, &l, &[vec![0.0]], &[0.0], 1e-12, &cfg()).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn envelope_u_quadratic_unique_multiplier() {
        // Closed-form path: y = -(M - xbar) = -(u + v), d_u m = -(u + v).
        let p = registry_build("quadratic").unwrap();
        let l = Localization::around(&p, 1.0);
        let nodes: Vec<Vec<f64>> = (-2..=2).map(|i| vec![0.05 * i as f64]).collect();
        let rep = envelope_check_u(&p, &l, &[0.1], &nodes, 1e-4, &cfg()).unwrap();
        assert!(rep.max_residual < 1e-6, "residual {}", rep.max_residual);
    }

    #[test]
    fn envelope_u_ex33_respects_polytope_bounds() {
        let p = registry_build("ex33").unwrap();
        let mut l = Localization::around(&p, 0.5);
        l.u_radius = 0.1;
        let mut c = cfg();
        c.grid_points_per_axis = 11;
        let t = 1e-3;
        let rep = envelope_check_u(&p, &l, &[0.0; 4], &[vec![-t; 4]], 1e-4, &c).unwrap();
        assert_eq!(rep.polytope_nodes, 1);
        assert!(rep.max_residual <= 1e-4, "violation {}", rep.max_residual);
    }

    #[test]
    fn hypoconvexity_of_quadratic_needs_unit_elicitation() {
        let p = registry_build("quadratic").unwrap();
        let mut l = Localization::around(&p, 1.0);
        l.v_radius = 0.3;
        l.u_radius = 0.3;
        let u_nodes: Vec<Vec<f64>> = (-6..=6).map(|i| vec![0.05 * i as f64]).collect();
        let v_nodes: Vec<Vec<f64>> = (-2..=2).map(|i| vec![0.1 * i as f64]).collect();
        let surf = value_surface(&p, &l, &v_nodes, &u_nodes, &cfg()).unwrap();
        let rep = hypoconvexity_modulus(&surf, 1e4).unwrap();
        assert!((rep.e - 1.0).abs() < 0.05, "e = {}", rep.e);

        // Adding (c/2)|u|^2 shifts the requirement down to max(1 - c, 0).
        for (c, expect) in [(0.5, 0.5), (1.0, 0.0), (2.0, 0.0)] {
            let shifted = surface_with_u_quadratic(&surf, c);
            let rep = hypoconvexity_modulus(&shifted, 1e4).unwrap();
            assert!(
                (rep.e - expect).abs() < 0.05,
                "c = {c}: e = {} expected {expect}",
                rep.e
            );
        }
    }

    #[test]
    fn hypoconvexity_of_convex_problem_is_zero() {
        let p = registry_build("ex32").unwrap();
        let mut l = Localization::around(&p, 0.5);
        l.v_radius = 0.05;
        l.u_radius = 0.05;
        let u_nodes: Vec<Vec<f64>> = (-4..=4).map(|i| vec![0.01 * i as f64]).collect();
        let v_nodes: Vec<Vec<f64>> = vec![vec![0.0], vec![0.02]];
        let surf = value_surface(&p, &l, &v_nodes, &u_nodes, &cfg()).unwrap();
        let rep = hypoconvexity_modulus(&surf, 1e4).unwrap();
        assert_eq!(rep.e, 0.0);
    }

    #[test]
    fn pinned_equality_value_map_needs_unit_elicitation() {
        // m(v, u) = -u^2/2 + u v: second derivative in u is -1.
        let p = crate::problem::neg_quadratic_pinned().unwrap();
        let mut l = Localization::around(&p, 1.0);
        l.u_radius = 0.3;
        let u_nodes: Vec<Vec<f64>> = (-4..=4).map(|i| vec![0.05 * i as f64]).collect();
        let v_nodes: Vec<Vec<f64>> = vec![vec![0.0], vec![0.1]];
        let surf = value_surface(&p, &l, &v_nodes, &u_nodes, &cfg()).unwrap();
        let rep = hypoconvexity_modulus(&surf, 1e4).unwrap();
        assert!((rep.e - 1.0).abs() < 0.05, "e = {}", rep.e);
    }

    #[test]
    fn prox_levels_on_quadratics() {
        for (id, expect_s) in [
            ("quadratic", 1.0),
            ("quadratic(0.5)", 0.5),
            ("quadratic(2)", 2.0),
        ] {
            let p = registry_build(id).unwrap();
            let sample = exact_graph_sample(&p, 0.2, 41, f64::INFINITY).unwrap();
            let probes: Vec<Vec<f64>> = sample.points.iter().map(|pt| pt.x.clone()).collect();
            let rep = prox_regularity_level(&sample, &probes, &[0.2, 0.1, 0.05]).unwrap();
            assert!((rep.s_hat - expect_s).abs() < 1e-3, "{id}: s {}", rep.s_hat);
            assert!((rep.r_hat + expect_s).abs() < 1e-3, "{id}: r {}", rep.r_hat);
            assert!(rep.gap < 1e-3);
        }
        let p = registry_build("neg_quadratic").unwrap();
        let sample = exact_graph_sample(&p, 0.2, 41, f64::INFINITY).unwrap();
        let probes: Vec<Vec<f64>> = sample.points.iter().map(|pt| pt.x.clone()).collect();
        let rep = prox_regularity_level(&sample, &probes, &[0.2, 0.1]).unwrap();
        assert!((rep.s_hat + 1.0).abs() < 1e-3);
        assert!((rep.r_hat - 1.0).abs() < 1e-3);
    }

    #[test]
    fn prox_levels_on_abs_value_trend_to_zero() {
        let p = registry_build("abs1d").unwrap();
        let sample = exact_graph_sample(&p, 0.2, 41, f64::INFINITY).unwrap();
        let probes: Vec<Vec<f64>> = sample.points.iter().map(|pt| pt.x.clone()).collect();
        let rep = prox_regularity_level(&sample, &probes, &[0.2, 0.1, 0.05, 0.01]).unwrap();
        assert!(rep.s_hat.abs() <= 1e-9, "s {}", rep.s_hat);
        assert!(rep.r_hat.abs() <= 1e-9, "r {}", rep.r_hat);
    }

    #[test]
    fn sample_too_small_is_probe_error() {
        let sample = GraphSample {
            points: vec![GraphPoint { x: vec![0.0], v: vec![0.0], f: 0.0 }],
            alpha: f64::INFINITY,
            base_x: vec![0.0],
            base_v: vec![0.0],
        };
        assert!(matches!(
            prox_regularity_level(&sample, &[vec![0.0]], &[0.1]),
            Err(Error::Probe(_))
        ));
    }

    #[test]
    fn inner_norm_of_quadratic_is_one() {
        let p = registry_build("quadratic").unwrap();
        let l = Localization::around(&p, 1.0);
        let taus = vec![1e-2, 1e-3, 1e-4];
        let rep =
            graphical_derivative_inner_norm(&p, &l, &[0.05], &[0.02], 2, &taus, &cfg()).unwrap();
        assert!((rep.estimate - 1.0).abs() < 1e-3, "estimate {}", rep.estimate);
        assert_eq!(rep.skipped_directions, 0);
    }

    #[test]
    fn inner_norm_of_ex32_matches_derivative_oracle_and_grows() {
        // Oracle: finite difference of the stationarity-relation root.
        let root = |u: f64| -> f64 {
            let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let z = mid.hypot(u);
                if (z.powf(1.0 / 3.0) + 1.0) * (mid / z) - 1.0 > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let p = registry_build("ex32").unwrap();
        let l = Localization::around(&p, 0.5);
        let taus = vec![1e-5, 1e-6, 1e-7];
        let u = 1e-4;
        let rep =
            graphical_derivative_inner_norm(&p, &l, &[0.0], &[u], 2, &taus, &cfg()).unwrap();
        let h = 1e-7;
        let oracle = (root(u + h) - root(u - h)) / (2.0 * h);
        assert!(
            rep.estimate <= oracle * 1.2 && rep.estimate >= oracle / 1.2,
            "estimate {} vs oracle {oracle}",
            rep.estimate
        );
        // Trend over shrinking u: strictly increasing estimates.
        let mut last = 0.0;
        for k in 2..=6 {
            let u = 10f64.powi(-k);
            let taus = vec![u * 1e-1, u * 1e-2];
            let rep = graphical_derivative_inner_norm(&p, &l, &[0.0], &[u], 2, &taus, &cfg())
                .unwrap();
            assert!(rep.estimate > last, "u={u}: {} vs {last}", rep.estimate);
            last = rep.estimate;
        }
    }

    #[test]
    fn classify_quadratic_fully_stable() {
        let p = registry_build("quadratic").unwrap();
        let l = Localization::around(&p, 1.0);
        let verdict = classify(&p, &l, &cfg(), &ClassifyConfig::default()).unwrap();
        assert_eq!(verdict.tilt_stable, Verdict::Pass);
        assert_eq!(verdict.substable, Verdict::Pass);
        assert_eq!(verdict.full_substable, Verdict::Pass);
        assert_eq!(verdict.fully_stable, Verdict::Pass, "{:?}", verdict.notes);
    }

    #[test]
    fn classify_ex32_tilt_pass_fully_fail() {
        let p = registry_build("ex32").unwrap();
        let l = Localization::around(&p, 0.5);
        let verdict = classify(&p, &l, &cfg(), &ClassifyConfig::default()).unwrap();
        assert_eq!(verdict.tilt_stable, Verdict::Pass, "{:?}", verdict.notes);
        assert_eq!(verdict.full_substable, Verdict::Pass, "{:?}", verdict.notes);
        assert_eq!(verdict.fully_stable, Verdict::Fail, "{:?}", verdict.notes);
    }

    #[test]
    fn classify_neg_quadratic_tilt_fails_at_boundary() {
        let p = registry_build("neg_quadratic").unwrap();
        let l = Localization::around(&p, 0.5);
        let verdict = classify(&p, &l, &cfg(), &ClassifyConfig::default()).unwrap();
        assert_eq!(verdict.tilt_stable, Verdict::Fail);
        assert_eq!(verdict.fully_stable, Verdict::Fail);
        assert!(verdict.notes.iter().any(|n| n.contains("boundary")));
    }

    #[test]
    fn verdict_consistency_fully_implies_parts() {
        for id in ["quadratic", "quadratic(0.5)", "ex32", "neg_quadratic", "abs1d"] {
            let p = registry_build(id).unwrap();
            let l = Localization::around(&p, 0.5);
            let v = classify(&p, &l, &cfg(), &ClassifyConfig::default()).unwrap();
            if v.fully_stable == Verdict::Pass {
                assert_eq!(v.tilt_stable, Verdict::Pass, "{id}");
                assert_eq!(v.full_substable, Verdict::Pass, "{id}");
            }
        }
    }
}
