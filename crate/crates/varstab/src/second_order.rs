//! Second-order machinery: Lagrangian Hessians, critical subspaces, the
//! strong second-order sufficient condition swept over the whole
//! multiplier set, definiteness moduli of second-order difference
//! quotients, and the tilt-stability cross-check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::probes::{
    estimate_lipschitz, exact_graph_sample, lipschitz_verdict, stationary_graph_sample,
    GraphSample, LipschitzMode, Verdict,
};
use crate::problem::{ConvexPiece, ParametricProblem, ProblemBody};
use crate::solver::{value_surface, Localization, SolveConfig};
use crate::subdiff::multiplier_set;

/// Positive-definiteness threshold for restricted Hessian eigenvalues.
pub const PD_TOL: f64 = 1e-8;

/// Which constraints span the subspace the Hessian is restricted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubspaceMode {
    /// Orthogonal complement of all active constraint gradients.
    AllActive,
    /// Orthogonal complement of gradients with multiplier above tolerance.
    StrictMultipliers,
}

/// Exact Hessian of the Lagrangian `f0 + sum_i y_i F_i` at `(x, y)`.
///
/// Defined for classical composites (`OrthantNonpos` piece) only.
pub fn lagrangian_hessian(
    problem: &ParametricProblem,
    x: &[f64],
    y: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let ProblemBody::Composite { f0, fmap, g } = &problem.body else {
        return Err(Error::Unsupported(
            "lagrangian_hessian needs a composite body".into(),
        ));
    };
    if !matches!(g, ConvexPiece::OrthantNonpos { .. }) {
        return Err(Error::Unsupported(
            "lagrangian_hessian is defined for the inequality-constrained case".into(),
        ));
    }
    if x.len() != problem.n || y.len() != problem.m {
        return Err(Error::Input("lagrangian_hessian dimension mismatch".into()));
    }
    let n = problem.n;
    let mut h = f0.hessian(x);
    for (i, &yi) in y.iter().enumerate() {
        if yi != 0.0 {
            let hi = fmap.component_hessian(i, x);
            for a in 0..n {
                for b in 0..n {
                    h[a][b] += yi * hi[a][b];
                }
            }
        }
    }
    Ok(h)
}

/// Orthonormal basis of the critical subspace at `(x, u)`: the orthogonal
/// complement of the active constraint gradients (`AllActive`), or of the
/// gradients carrying a multiplier above `active_tol`
/// (`StrictMultipliers`, which needs `y`). An empty active set yields the
/// full space.
pub fn critical_subspace(
    problem: &ParametricProblem,
    x: &[f64],
    u: &[f64],
    y: Option<&[f64]>,
    mode: SubspaceMode,
    active_tol: f64,
) -> Result<Vec<Vec<f64>>> {
    let ProblemBody::Composite { fmap, g, .. } = &problem.body else {
        return Err(Error::Unsupported(
            "critical_subspace needs a composite body".into(),
        ));
    };
    let ConvexPiece::OrthantNonpos { s, .. } = g else {
        return Err(Error::Unsupported(
            "critical_subspace is defined for the inequality-constrained case".into(),
        ));
    };
    let z = linalg::add(&fmap.eval(x), u);
    let jac = fmap.jacobian(x);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for i in 0..*s {
        let active = z[i].abs() <= active_tol;
        let keep = match mode {
            SubspaceMode::AllActive => active,
            SubspaceMode::StrictMultipliers => {
                let yi = y
                    .ok_or_else(|| {
                        Error::Input("strict_multipliers mode needs a multiplier vector".into())
                    })?
                    .get(i)
                    .copied()
                    .unwrap_or(0.0);
                active && yi > active_tol
            }
        };
        if keep {
            rows.push(jac[i].clone());
        }
    }
    Ok(linalg::null_space_basis(&rows, problem.n, 1e-10))
}

/// One multiplier sample of the sufficiency sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SoscSample {
    pub y: Vec<f64>,
    pub is_vertex: bool,
    /// Position along the segment parameterization when the multiplier
    /// set is one-dimensional.
    pub theta: Option<f64>,
    pub min_eigenvalue: f64,
    pub pass: bool,
}

/// Strong second-order sufficiency swept over the multiplier set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SoscReport {
    pub samples: Vec<SoscSample>,
    pub subspace_dim: usize,
    pub polytope_dim: usize,
    pub all_multipliers_pass: bool,
    pub some_multipliers_pass: bool,
    /// Measured parameter where the verdict flips (one-dimensional sets,
    /// bisection of the smallest restricted eigenvalue against `PD_TOL`).
    pub crossing: Option<f64>,
}

/// Checks positive definiteness of the restricted Lagrangian Hessian at
/// every vertex of `Y(x, u, v)` and along a parameter grid through the
/// polytope (theta grid on segments, seeded interior samples above
/// dimension one).
pub fn strong_sosc_over_multipliers(
    problem: &ParametricProblem,
    x: &[f64],
    v: &[f64],
    u: &[f64],
    theta_grid: usize,
    mode: SubspaceMode,
    cfg: &SolveConfig,
    pd_tol: f64,
) -> Result<SoscReport> {
    let act = cfg.active_tol.max(1e-8);
    let set = multiplier_set(problem, x, u, v, act)?;
    let verts = set.vertices()?;
    if verts.is_empty() {
        return Err(Error::Probe("multiplier set is empty".into()));
    }
    let polytope_dim = set.affine_dim()?;

    let eig_min = |y: &[f64]| -> Result<(f64, usize)> {
        let basis = critical_subspace(problem, x, u, Some(y), mode, act)?;
        if basis.is_empty() {
            // Trivial subspace: the condition holds vacuously.
            return Ok((f64::INFINITY, 0));
        }
        let h = lagrangian_hessian(problem, x, y)?;
        let k = basis.len();
        let mut restricted = vec![vec![0.0; k]; k];
        for a in 0..k {
            let hb = linalg::mat_vec(&h, &basis[a]);
            for b in 0..k {
                restricted[a][b] = linalg::dot(&hb, &basis[b]);
            }
        }
        let (eigs, _) = linalg::jacobi_eigen(&restricted);
        Ok((eigs[0], k))
    };

    let mut samples: Vec<SoscSample> = Vec::new();
    let mut subspace_dim = 0usize;

    if polytope_dim <= 1 && verts.len() <= 2 {
        // Segment (or point): theta runs from the lexicographically
        // smaller vertex to the larger.
        let y0 = &verts[0];
        let y1 = verts.last().unwrap();
        let count = theta_grid.max(2);
        for k in 0..count {
            let theta = k as f64 / (count - 1) as f64;
            let y: Vec<f64> = y0
                .iter()
                .zip(y1)
                .map(|(a, b)| (1.0 - theta) * a + theta * b)
                .collect();
            let (lam, dim) = eig_min(&y)?;
            subspace_dim = subspace_dim.max(dim);
            samples.push(SoscSample {
                is_vertex: theta == 0.0 || theta == 1.0,
                theta: Some(theta),
                min_eigenvalue: lam,
                pass: lam > pd_tol,
                y,
            });
        }
    } else {
        use rand::Rng;
        use rand::SeedableRng;
        for yv in verts {
            let (lam, dim) = eig_min(yv)?;
            subspace_dim = subspace_dim.max(dim);
            samples.push(SoscSample {
                y: yv.clone(),
                is_vertex: true,
                theta: None,
                min_eigenvalue: lam,
                pass: lam > pd_tol,
            });
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x505c);
        for _ in 0..theta_grid {
            let weights: Vec<f64> = (0..verts.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
            let total: f64 = weights.iter().sum();
            let mut y = vec![0.0; problem.m];
            for (w, vert) in weights.iter().zip(verts) {
                for (yi, vi) in y.iter_mut().zip(vert) {
                    *yi += w / total * vi;
                }
            }
            let (lam, dim) = eig_min(&y)?;
            subspace_dim = subspace_dim.max(dim);
            samples.push(SoscSample {
                y,
                is_vertex: false,
                theta: None,
                min_eigenvalue: lam,
                pass: lam > pd_tol,
            });
        }
    }

    let all_pass = samples.iter().all(|s| s.pass);
    let some_pass = samples.iter().any(|s| s.pass);

    // Measured crossing: bisection of the pass/fail flip along theta.
    let mut crossing = None;
    if polytope_dim == 1 && !all_pass && some_pass {
        let thetas: Vec<(f64, bool)> = samples
            .iter()
            .filter_map(|s| s.theta.map(|t| (t, s.pass)))
            .collect();
        for w in thetas.windows(2) {
            if w[0].1 != w[1].1 {
                let y0 = &verts[0];
                let y1 = verts.last().unwrap();
                let pass_at = |theta: f64| -> Result<bool> {
                    let y: Vec<f64> = y0
                        .iter()
                        .zip(y1)
                        .map(|(a, b)| (1.0 - theta) * a + theta * b)
                        .collect();
                    Ok(eig_min(&y)?.0 > pd_tol)
                };
                let (mut lo, mut hi) = (w[0].0, w[1].0);
                let lo_pass = w[0].1;
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if pass_at(mid)? == lo_pass {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                crossing = Some(0.5 * (lo + hi));
                break;
            }
        }
    }

    Ok(SoscReport {
        samples,
        subspace_dim,
        polytope_dim,
        all_multipliers_pass: all_pass,
        some_multipliers_pass: some_pass,
        crossing,
    })
}

// ---------------------------------------------------------------------------
// Strict second-order difference quotients
// ---------------------------------------------------------------------------

/// Definiteness modulus of second-order difference quotients harvested
/// from a subgradient graph sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DefinitenessReport {
    /// `inf` of `mu.xi / |xi|^2` at the smallest neighborhood; `+inf`
    /// when no admissible quadruple has `|xi| >= xi_tol` (the condition
    /// holds vacuously).
    pub modulus: f64,
    pub vacuous: bool,
    /// (neighborhood radius, modulus or +inf, quadruples harvested).
    pub trend: Vec<(f64, f64, usize)>,
}

/// Harvest knobs for [`strict_second_subdiff_estimate`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HarvestConfig {
    /// Step ladder, strictly decreasing; steps above the current
    /// neighborhood radius are skipped.
    pub tau_ladder: Vec<f64>,
    /// Neighborhood radii, strictly decreasing.
    pub neighborhood_ladder: Vec<f64>,
    /// Minimum |xi| for a quadruple to count as a genuine direction.
    pub xi_tol: f64,
    /// Bound on |xi| and |mu|: difference quotients must stay bounded.
    pub bound: f64,
}

impl Default for HarvestConfig {
    fn default() -> Self {
        HarvestConfig {
            tau_ladder: vec![1e-1, 1e-2, 1e-3, 1e-4],
            neighborhood_ladder: vec![1e-1, 1e-2, 1e-3, 1e-4],
            xi_tol: 1e-6,
            bound: 1e3,
        }
    }
}

/// Estimates the definiteness modulus of the strict second-order
/// difference quotients of the sampled graph at its base point.
///
/// At each neighborhood radius `rho`, base points are restricted to
/// `|x - xbar| <= rho`, `|v - vbar| <= rho`; offsets may be any sampled
/// graph point, with `xi = (x' - x)/tau`, `mu = (v' - v)/tau` kept when
/// both stay below `bound` for some ladder step `tau <= rho`. The modulus
/// is the infimum of `mu.xi / |xi|^2` over quadruples with
/// `|xi| >= xi_tol`; an empty harvest reports `+inf` (vacuous).
pub fn strict_second_subdiff_estimate(
    sample: &GraphSample,
    harvest: &HarvestConfig,
) -> Result<DefinitenessReport> {
    if sample.points.is_empty() {
        return Err(Error::Probe("graph sample is empty".into()));
    }
    if harvest.neighborhood_ladder.windows(2).any(|w| w[1] >= w[0])
        || harvest.neighborhood_ladder.is_empty()
    {
        return Err(Error::Config(
            "neighborhood ladder must be strictly decreasing".into(),
        ));
    }
    let mut trend = Vec::new();
    for &rho in &harvest.neighborhood_ladder {
        let bases: Vec<&crate::probes::GraphPoint> = sample
            .points
            .iter()
            .filter(|p| {
                linalg::norm_inf(&linalg::sub(&p.x, &sample.base_x)) <= rho
                    && linalg::norm_inf(&linalg::sub(&p.v, &sample.base_v)) <= rho
            })
            .collect();
        let mut modulus = f64::INFINITY;
        let mut count = 0usize;
        for base in &bases {
            for offset in &sample.points {
                let dx = linalg::sub(&offset.x, &base.x);
                let dv = linalg::sub(&offset.v, &base.v);
                for &tau in &harvest.tau_ladder {
                    if tau > rho {
                        continue;
                    }
                    let xi = linalg::scale(&dx, 1.0 / tau);
                    let mu = linalg::scale(&dv, 1.0 / tau);
                    if linalg::norm2(&xi) > harvest.bound || linalg::norm2(&mu) > harvest.bound
                    {
                        continue;
                    }
                    let nxi2 = linalg::dot(&xi, &xi);
                    if nxi2.sqrt() < harvest.xi_tol {
                        continue;
                    }
                    count += 1;
                    modulus = modulus.min(linalg::dot(&mu, &xi) / nxi2);
                }
            }
        }
        trend.push((rho, modulus, count));
    }
    let &(_, modulus, count) = trend.last().expect("nonempty ladder");
    Ok(DefinitenessReport {
        modulus,
        vacuous: count == 0,
        trend,
    })
}

// ---------------------------------------------------------------------------
// Tilt cross-check
// ---------------------------------------------------------------------------

/// Comparison of the measured tilt Lipschitz constant against the
/// reciprocal of the definiteness modulus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrosscheckReport {
    pub tilt_lipschitz: f64,
    pub tilt_verdict: Verdict,
    pub definiteness: f64,
    pub definiteness_vacuous: bool,
    /// `tilt_lipschitz * definiteness`; near or below 1 when the bound
    /// `lip <= 1/s` holds.
    pub ratio: f64,
    /// Measured constant exceeds `(1/s)(1 + slack)` for a positive
    /// definiteness modulus.
    pub violation: bool,
    /// Tilt stability detected while the definiteness modulus is
    /// nonpositive: the probes disagree.
    pub inconsistent: bool,
}

const CROSSCHECK_SLACK: f64 = 0.1;

/// Measures the tilt Lipschitz constant by a tilt sweep at `u = 0` and
/// compares it with `1/s` for `s` the definiteness-modulus estimate.
pub fn tilt_crosscheck(
    problem: &ParametricProblem,
    loc: &Localization,
    cfg: &SolveConfig,
) -> Result<CrosscheckReport> {
    let mut scales = Vec::new();
    let mut s = loc.v_radius;
    while s >= loc.v_radius * 1e-5 {
        scales.push(s);
        s /= 10.0;
    }
    let mut nodes = vec![vec![0.0; problem.n]];
    for &sc in &scales {
        for j in 0..problem.n {
            for sign in [1.0, -1.0] {
                let mut node = vec![0.0; problem.n];
                node[j] = sign * sc;
                nodes.push(node);
            }
        }
    }
    let u0 = vec![vec![0.0; problem.m]];
    let surf = value_surface(problem, loc, &nodes, &u0, cfg)?;
    let (tilt_lipschitz, tilt_verdict) =
        match estimate_lipschitz(&surf, LipschitzMode::VOnly, &scales) {
            Ok(est) => {
                let verdict = lipschitz_verdict(&est, crate::probes::DEFAULT_BLOWUP_FACTOR);
                (est.value, verdict)
            }
            Err(_) => (f64::NAN, Verdict::Fail),
        };

    let sample = graph_sample_for(problem, loc, cfg)?;
    let dfnt = strict_second_subdiff_estimate(&sample, &HarvestConfig::default())?;

    let (violation, inconsistent, ratio);
    if dfnt.vacuous {
        ratio = f64::NAN;
        violation = false;
        inconsistent = false;
    } else if dfnt.modulus > 0.0 {
        ratio = tilt_lipschitz * dfnt.modulus;
        violation = tilt_lipschitz > (1.0 / dfnt.modulus) * (1.0 + CROSSCHECK_SLACK);
        inconsistent = false;
    } else {
        ratio = tilt_lipschitz * dfnt.modulus;
        violation = false;
        inconsistent = tilt_verdict == Verdict::Pass;
    }
    Ok(CrosscheckReport {
        tilt_lipschitz,
        tilt_verdict,
        definiteness: dfnt.modulus,
        definiteness_vacuous: dfnt.vacuous,
        ratio,
        violation,
        inconsistent,
    })
}

/// Graph sampler dispatch: exact piecewise descriptions for 1-d closed
/// forms, stationary sweeps for composites.
pub fn graph_sample_for(
    problem: &ParametricProblem,
    loc: &Localization,
    cfg: &SolveConfig,
) -> Result<GraphSample> {
    if problem.closed_form().is_some() {
        exact_graph_sample(problem, loc.delta.min(0.25), 81, loc.alpha)
    } else {
        let mut v_nodes = vec![vec![0.0; problem.n]];
        for k in 0..4 {
            let sc = loc.v_radius * 10f64.powi(-(k as i32));
            for j in 0..problem.n {
                for sign in [1.0, -1.0] {
                    let mut node = vec![0.0; problem.n];
                    node[j] = sign * sc;
                    v_nodes.push(node);
                }
            }
        }
        stationary_graph_sample(problem, loc, &v_nodes, cfg)
    }
}
