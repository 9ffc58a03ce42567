//! Subdifferentials of the convex piece, multiplier sets, and the basic
//! constraint qualification.
//!
//! For a composite `phi = f0 + g(F(.) + u)` the multiplier set
//! `Y(x, u, v) = { y in dg(F(x)+u) : grad f0(x) + DF(x)^T y = v }` is
//! polyhedral whenever `g` is, and is produced here in constraint form with
//! on-demand vertex enumeration. The constraint qualification is checked
//! through its classical equivalent: a strictly feasible direction for the
//! active gradients (inequalities) and full row rank (equalities).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::polytope::{boxed_linprog_max, PolyhedralSet};
use crate::problem::{ConvexPiece, ParametricProblem, ProblemBody};

/// Subdifferential of a structured convex piece at a point.
#[derive(Debug, Clone, PartialEq)]
pub enum Subdifferential {
    /// The point is outside the effective domain.
    Empty,
    /// Smooth point: a single gradient.
    Point(Vec<f64>),
    /// Polyhedral normal cone / subgradient set.
    Polyhedral(PolyhedralSet),
    /// Euclidean ball (norm kink at the origin); not polyhedral.
    Ball { radius: f64 },
}

/// Verdict of the basic constraint qualification at a point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CqReport {
    pub holds: bool,
    /// For inequality systems: a direction `w` with `grad f_i . w <= -1` on
    /// every active constraint when the qualification holds, or the zero
    /// vector when there is nothing to certify. When it fails, the best
    /// (least-infeasible) direction found.
    pub certificate: Vec<f64>,
    /// Margin achieved by the certificate before rescaling.
    pub margin: f64,
    pub detail: String,
}

/// Subdifferential `dg(z)` of the convex piece at `z`.
///
/// Out-of-domain points give `Subdifferential::Empty` (a signal, not an
/// error); dimension mismatches are input errors.
pub fn subdiff_g(piece: &ConvexPiece, z: &[f64], active_tol: f64) -> Result<Subdifferential> {
    let m = z.len();
    match piece {
        ConvexPiece::OrthantNonpos { s, m: pm } => {
            if *pm != m {
                return Err(Error::Input(format!("z has length {m}, expected {pm}")));
            }
            if z.iter().take(*s).any(|&zi| zi > active_tol) {
                return Ok(Subdifferential::Empty);
            }
            let mut eq_rows = Vec::new();
            let mut eq_rhs = Vec::new();
            let mut in_rows = Vec::new();
            let mut in_rhs = Vec::new();
            for i in 0..m {
                let mut row = vec![0.0; m];
                row[i] = 1.0;
                if i < *s && z[i].abs() <= active_tol {
                    // Active inequality coordinate: y_i >= 0.
                    let mut neg = vec![0.0; m];
                    neg[i] = -1.0;
                    in_rows.push(neg);
                    in_rhs.push(0.0);
                } else {
                    // Inactive (z_i < 0) or free coordinate (i >= s): y_i = 0.
                    eq_rows.push(row);
                    eq_rhs.push(0.0);
                }
            }
            Ok(Subdifferential::Polyhedral(PolyhedralSet::new(
                m, eq_rows, eq_rhs, in_rows, in_rhs,
            )?))
        }
        ConvexPiece::ZeroIndicator { m: pm } => {
            if *pm != m {
                return Err(Error::Input(format!("z has length {m}, expected {pm}")));
            }
            if z.iter().any(|&zi| zi.abs() > active_tol) {
                return Ok(Subdifferential::Empty);
            }
            Ok(Subdifferential::Polyhedral(PolyhedralSet::free(m)))
        }
        ConvexPiece::Box { lo, hi } => {
            if lo.len() != m {
                return Err(Error::Input(format!(
                    "z has length {m}, expected {}",
                    lo.len()
                )));
            }
            let inside = z
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(&zi, (&l, &h))| zi >= l - active_tol && zi <= h + active_tol);
            if !inside {
                return Ok(Subdifferential::Empty);
            }
            let mut eq_rows = Vec::new();
            let mut eq_rhs = Vec::new();
            let mut in_rows = Vec::new();
            let mut in_rhs = Vec::new();
            for i in 0..m {
                let at_lo = lo[i].is_finite() && (z[i] - lo[i]).abs() <= active_tol;
                let at_hi = hi[i].is_finite() && (z[i] - hi[i]).abs() <= active_tol;
                match (at_lo, at_hi) {
                    (true, true) => {} // pinned coordinate: y_i free
                    (true, false) => {
                        // y_i <= 0 at the lower bound.
                        let mut row = vec![0.0; m];
                        row[i] = 1.0;
                        in_rows.push(row);
                        in_rhs.push(0.0);
                    }
                    (false, true) => {
                        let mut row = vec![0.0; m];
                        row[i] = -1.0;
                        in_rows.push(row);
                        in_rhs.push(0.0);
                    }
                    (false, false) => {
                        let mut row = vec![0.0; m];
                        row[i] = 1.0;
                        eq_rows.push(row);
                        eq_rhs.push(0.0);
                    }
                }
            }
            Ok(Subdifferential::Polyhedral(PolyhedralSet::new(
                m, eq_rows, eq_rhs, in_rows, in_rhs,
            )?))
        }
        ConvexPiece::EuclideanNorm { w } => {
            let nz = linalg::norm2(z);
            if nz <= active_tol {
                Ok(Subdifferential::Ball { radius: *w })
            } else {
                Ok(Subdifferential::Point(linalg::scale(z, w / nz)))
            }
        }
        ConvexPiece::SquaredNorm { w } => Ok(Subdifferential::Point(linalg::scale(z, *w))),
    }
}

/// The multiplier set `Y(x, u, v)` of a composite problem in constraint
/// form. An empty set is a valid output (it means `v` is not attainable as
/// a partial subgradient at `(x, u)`), not an error.
pub fn multiplier_set(
    problem: &ParametricProblem,
    x: &[f64],
    u: &[f64],
    v: &[f64],
    active_tol: f64,
) -> Result<PolyhedralSet> {
    let ProblemBody::Composite { f0, fmap, g } = &problem.body else {
        return Err(Error::Unsupported(
            "multiplier_set needs a composite body".into(),
        ));
    };
    if x.len() != problem.n || u.len() != problem.m || v.len() != problem.n {
        return Err(Error::Input("multiplier_set dimension mismatch".into()));
    }
    let z = linalg::add(&fmap.eval(x), u);
    let sd = subdiff_g(g, &z, active_tol)?;
    let m = problem.m;
    // Stationarity rows: DF(x)^T y = v - grad f0(x), one row per primal
    // coordinate.
    let jac = fmap.jacobian(x);
    let g0 = f0.gradient(x);
    let stat_rows: Vec<Vec<f64>> = (0..problem.n)
        .map(|i| (0..m).map(|j| jac[j][i]).collect())
        .collect();
    let stat_rhs: Vec<f64> = (0..problem.n).map(|i| v[i] - g0[i]).collect();

    match sd {
        Subdifferential::Empty => {
            // Encode emptiness as an inconsistent system 0 = 1.
            PolyhedralSet::new(m, vec![vec![0.0; m]], vec![1.0], vec![], vec![])
        }
        Subdifferential::Point(y) => {
            let resid: Vec<f64> = stat_rows
                .iter()
                .zip(&stat_rhs)
                .map(|(row, &b)| linalg::dot(row, &y) - b)
                .collect();
            if linalg::norm_inf(&resid) <= 1e-9 {
                // Singleton: y_i = y fixed coordinatewise.
                let eq_rows: Vec<Vec<f64>> = (0..m)
                    .map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                    .collect();
                PolyhedralSet::new(m, eq_rows, y, vec![], vec![])
            } else {
                PolyhedralSet::new(m, vec![vec![0.0; m]], vec![1.0], vec![], vec![])
            }
        }
        Subdifferential::Polyhedral(sd_set) => {
            let (sd_eq, sd_eq_rhs) = sd_set.equalities();
            let (sd_in, sd_in_rhs) = sd_set.inequalities();
            let mut eq_rows = stat_rows;
            let mut eq_rhs = stat_rhs;
            eq_rows.extend_from_slice(sd_eq);
            eq_rhs.extend_from_slice(sd_eq_rhs);
            PolyhedralSet::new(m, eq_rows, eq_rhs, sd_in.to_vec(), sd_in_rhs.to_vec())
        }
        Subdifferential::Ball { .. } => Err(Error::Unsupported(
            "multiplier_set over a norm kink is not polyhedral".into(),
        )),
    }
}

/// Checks the basic constraint qualification at `(x, u)`.
///
/// Composite with `OrthantNonpos`/`Box`: a strictly feasible direction for
/// the active constraint gradients is sought by maximizing the margin `mu`
/// in `grad f_i . w <= -mu` over the unit box; the qualification holds when
/// the optimal margin is positive, and the reported certificate is scaled
/// so every active product is <= -1. `ZeroIndicator` additionally requires
/// linearly independent constraint gradients. Closed forms have
/// full-dimensional domains, so the qualification holds trivially.
pub fn check_basic_cq(
    problem: &ParametricProblem,
    x: &[f64],
    u: &[f64],
    active_tol: f64,
) -> Result<CqReport> {
    let ProblemBody::Composite { fmap, g, .. } = &problem.body else {
        return Ok(CqReport {
            holds: true,
            certificate: vec![0.0; problem.n],
            margin: f64::INFINITY,
            detail: "closed-form body with full-dimensional domain".into(),
        });
    };
    if x.len() != problem.n || u.len() != problem.m {
        return Err(Error::Input("check_basic_cq dimension mismatch".into()));
    }
    let z = linalg::add(&fmap.eval(x), u);
    if !g.in_domain(&z, active_tol) {
        return Err(Error::Input(
            "constraint qualification requested at an infeasible point".into(),
        ));
    }
    let jac = fmap.jacobian(x);

    // Gradient rows whose products with the certificate must be negative,
    // plus equality rows that must be linearly independent.
    let mut active_rows: Vec<Vec<f64>> = Vec::new();
    let mut equality_rows: Vec<Vec<f64>> = Vec::new();
    match g {
        ConvexPiece::OrthantNonpos { s, .. } => {
            for i in 0..*s {
                if z[i].abs() <= active_tol {
                    active_rows.push(jac[i].clone());
                }
            }
        }
        ConvexPiece::ZeroIndicator { .. } => {
            equality_rows = jac.clone();
        }
        ConvexPiece::Box { lo, hi } => {
            for i in 0..z.len() {
                let at_lo = lo[i].is_finite() && (z[i] - lo[i]).abs() <= active_tol;
                let at_hi = hi[i].is_finite() && (z[i] - hi[i]).abs() <= active_tol;
                match (at_lo, at_hi) {
                    (true, true) => equality_rows.push(jac[i].clone()),
                    (true, false) => active_rows.push(linalg::scale(&jac[i], -1.0)),
                    (false, true) => active_rows.push(jac[i].clone()),
                    (false, false) => {}
                }
            }
        }
        ConvexPiece::EuclideanNorm { .. } | ConvexPiece::SquaredNorm { .. } => {
            // Finite convex pieces put no horizon restriction on y.
            return Ok(CqReport {
                holds: true,
                certificate: vec![0.0; problem.n],
                margin: f64::INFINITY,
                detail: "finite convex piece".into(),
            });
        }
    }

    if !equality_rows.is_empty() {
        let rk = linalg::rank(&equality_rows, 1e-12);
        if rk < equality_rows.len() {
            return Ok(CqReport {
                holds: false,
                certificate: vec![0.0; problem.n],
                margin: f64::NEG_INFINITY,
                detail: format!(
                    "equality gradients are dependent (rank {rk} of {})",
                    equality_rows.len()
                ),
            });
        }
    }

    if active_rows.is_empty() {
        return Ok(CqReport {
            holds: true,
            certificate: vec![0.0; problem.n],
            margin: f64::INFINITY,
            detail: "no active inequality constraints".into(),
        });
    }

    // Maximize mu subject to grad f_i . w + mu <= 0 over |w|_inf <= 1,
    // 0 <= mu <= 1 + max gradient norm. Equality rows (when mixed with
    // inequalities) pin w to their null space via two-sided rows.
    let n = problem.n;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for gr in &active_rows {
        let mut row = gr.clone();
        row.push(1.0);
        rows.push(row);
        rhs.push(0.0);
    }
    for er in &equality_rows {
        for sign in [1.0, -1.0] {
            let mut row = linalg::scale(er, sign);
            row.push(0.0);
            rows.push(row);
            rhs.push(0.0);
        }
    }
    // mu >= 0.
    let mut mu_pos = vec![0.0; n];
    mu_pos.push(-1.0);
    rows.push(mu_pos);
    rhs.push(0.0);
    let mut objective = vec![0.0; n];
    objective.push(1.0);
    let (margin, wmu) = boxed_linprog_max(&rows, &rhs, n + 1, 2.0, &objective)
        .map_err(|e| Error::Numerical(format!("constraint-qualification program: {e}")))?;
    let w = &wmu[..n];
    let holds = margin > 1e-9;
    let certificate = if holds {
        linalg::scale(w, 1.0 / margin)
    } else {
        w.to_vec()
    };
    Ok(CqReport {
        holds,
        certificate,
        margin,
        detail: format!("{} active gradient(s), margin {margin:.3e}", active_rows.len()),
    })
}

/// Re-verifies convexity of an enumerated multiplier set by pushing random
/// convex combinations of its vertices back through the raw membership
/// conditions: stationarity residual and subdifferential membership. This
/// guards the constraint-form construction rather than proving convexity.
pub fn multiplier_set_convexity_test(
    problem: &ParametricProblem,
    x: &[f64],
    u: &[f64],
    v: &[f64],
    set: &PolyhedralSet,
    samples: usize,
    seed: u64,
) -> Result<bool> {
    use rand::Rng;
    use rand::SeedableRng;
    let verts = set.vertices()?;
    if verts.is_empty() {
        return Ok(true);
    }
    if verts.len() == 1 {
        return Ok(membership_residual(problem, x, u, v, &verts[0])? <= 1e-9);
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for k in 0..samples {
        let mut weights: Vec<f64> = (0..verts.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
        if k == 0 {
            // Always include the uniform midpoint.
            weights.iter_mut().for_each(|w| *w = 1.0);
        }
        let total: f64 = weights.iter().sum();
        let mut y = vec![0.0; set.dim()];
        for (w, vert) in weights.iter().zip(verts) {
            for (yi, vi) in y.iter_mut().zip(vert) {
                *yi += w / total * vi;
            }
        }
        if membership_residual(problem, x, u, v, &y)? > 1e-9 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Raw membership check for `y in Y(x, u, v)`: the stationarity residual
/// plus the distance to the subdifferential structure of `g`.
pub fn membership_residual(
    problem: &ParametricProblem,
    x: &[f64],
    u: &[f64],
    v: &[f64],
    y: &[f64],
) -> Result<f64> {
    let ProblemBody::Composite { f0, fmap, g } = &problem.body else {
        return Err(Error::Unsupported(
            "membership_residual needs a composite body".into(),
        ));
    };
    let jac = fmap.jacobian(x);
    let station = linalg::sub(
        &linalg::add(&f0.gradient(x), &linalg::mat_t_vec(&jac, y)),
        v,
    );
    let mut resid = linalg::norm_inf(&station);
    let z = linalg::add(&fmap.eval(x), u);
    match g {
        ConvexPiece::OrthantNonpos { s, .. } => {
            for i in 0..z.len() {
                if i >= *s || z[i] < -1e-9 {
                    resid = resid.max(y[i].abs());
                } else {
                    resid = resid.max((-y[i]).max(0.0));
                }
            }
        }
        ConvexPiece::ZeroIndicator { .. } => {}
        ConvexPiece::Box { lo, hi } => {
            for i in 0..z.len() {
                let at_lo = lo[i].is_finite() && (z[i] - lo[i]).abs() <= 1e-9;
                let at_hi = hi[i].is_finite() && (z[i] - hi[i]).abs() <= 1e-9;
                match (at_lo, at_hi) {
                    (true, true) => {}
                    (true, false) => resid = resid.max(y[i].max(0.0)),
                    (false, true) => resid = resid.max((-y[i]).max(0.0)),
                    (false, false) => resid = resid.max(y[i].abs()),
                }
            }
        }
        ConvexPiece::SquaredNorm { w } => {
            let gz = linalg::scale(&z, *w);
            resid = resid.max(linalg::norm_inf(&linalg::sub(y, &gz)));
        }
        ConvexPiece::EuclideanNorm { w } => {
            let nz = linalg::norm2(&z);
            if nz > 1e-12 {
                let gz = linalg::scale(&z, w / nz);
                resid = resid.max(linalg::norm_inf(&linalg::sub(y, &gz)));
            } else {
                resid = resid.max((linalg::norm2(y) - w).max(0.0));
            }
        }
    }
    Ok(resid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::registry_build;

    const TOL: f64 = 1e-9;

    #[test]
    fn orthant_subdiff_active_and_inactive() {
        let piece = ConvexPiece::orthant_nonpos(4, 4).unwrap();
        // Two inactive, two active coordinates.
        let sd = subdiff_g(&piece, &[-1.0, -1.0, 0.0, 0.0], TOL).unwrap();
        let Subdifferential::Polyhedral(set) = sd else { panic!() };
        assert!(set.contains(&[0.0, 0.0, 3.0, 7.0], 0.0));
        assert!(!set.contains(&[0.1, 0.0, 3.0, 7.0], 1e-10));
        assert!(!set.contains(&[0.0, 0.0, -1.0, 0.0], 1e-10));

        // All active: the whole nonnegative orthant.
        let sd = subdiff_g(&piece, &[0.0; 4], TOL).unwrap();
        let Subdifferential::Polyhedral(set) = sd else { panic!() };
        assert!(set.contains(&[1.0, 2.0, 3.0, 4.0], 0.0));
        assert!(!set.contains(&[-0.1, 0.0, 0.0, 0.0], 1e-10));

        // Out of domain.
        let sd = subdiff_g(&piece, &[0.1, 0.0, 0.0, 0.0], TOL).unwrap();
        assert_eq!(sd, Subdifferential::Empty);
    }

    #[test]
    fn free_coordinates_force_zero_multiplier() {
        // s = 1 of m = 2: the second coordinate is unconstrained.
        let piece = ConvexPiece::orthant_nonpos(1, 2).unwrap();
        let sd = subdiff_g(&piece, &[0.0, 5.0], TOL).unwrap();
        let Subdifferential::Polyhedral(set) = sd else { panic!() };
        assert!(set.contains(&[2.0, 0.0], 0.0));
        assert!(!set.contains(&[2.0, 0.5], 1e-10));
    }

    #[test]
    fn ex33_multiplier_segment() {
        let p = registry_build("ex33").unwrap();
        let set = multiplier_set(&p, &[0.0; 4], &[0.0; 4], &[0.0; 4], TOL).unwrap();
        let verts = set.vertices().unwrap();
        assert_eq!(verts.len(), 2);
        assert!(linalg::norm_inf(&linalg::sub(&verts[0], &[0.0, 0.0, 0.5, 0.5])) < 1e-8);
        assert!(linalg::norm_inf(&linalg::sub(&verts[1], &[0.5, 0.5, 0.0, 0.0])) < 1e-8);
        assert_eq!(set.affine_dim().unwrap(), 1);
        // The KKT system itself: y1 = y2, y3 = y4, sum = 1, y >= 0.
        assert!(set.contains(&[0.25, 0.25, 0.25, 0.25], 1e-12));
        assert!(!set.contains(&[0.5, 0.0, 0.25, 0.25], 1e-9));
    }

    #[test]
    fn ex33_vertices_satisfy_raw_kkt() {
        let p = registry_build("ex33").unwrap();
        let set = multiplier_set(&p, &[0.0; 4], &[0.0; 4], &[0.0; 4], TOL).unwrap();
        for yv in set.vertices().unwrap() {
            let r = membership_residual(&p, &[0.0; 4], &[0.0; 4], &[0.0; 4], yv).unwrap();
            assert!(r <= 1e-9, "vertex residual {r}");
        }
    }

    #[test]
    fn smooth_unconstrained_multiplier_is_gradient_match() {
        // f0 = x^2/2, F(x) = x, g identically zero via an infinite box:
        // Y(x,u,v) = {0} iff grad f0(x) = v.
        let f0 = crate::poly::Polynomial::new(1, vec![(0.5, vec![2])]).unwrap();
        let fmap = crate::poly::SmoothMap::new(
            1,
            vec![crate::poly::Polynomial::new(1, vec![(1.0, vec![1])]).unwrap()],
        )
        .unwrap();
        let g = ConvexPiece::boxed(vec![f64::NEG_INFINITY], vec![f64::INFINITY]).unwrap();
        let p = ParametricProblem::composite("free", f0, fmap, g, vec![0.0]).unwrap();

        let set = multiplier_set(&p, &[0.7], &[0.0], &[0.7], TOL).unwrap();
        let verts = set.vertices().unwrap();
        assert_eq!(verts.len(), 1);
        assert!(verts[0][0].abs() < 1e-12);

        let set = multiplier_set(&p, &[0.7], &[0.0], &[0.1], TOL).unwrap();
        assert!(set.is_empty());
    }

    #[test]
    fn ex33_cq_holds_with_strict_certificate() {
        let p = registry_build("ex33").unwrap();
        let rep = check_basic_cq(&p, &[0.0; 4], &[0.0; 4], TOL).unwrap();
        assert!(rep.holds);
        let (_, jac) = p.grad_f0_and_jac_f(&[0.0; 4]).unwrap();
        for row in &jac {
            assert!(
                linalg::dot(row, &rep.certificate) <= -1.0 + 1e-9,
                "certificate not strict on {row:?}"
            );
        }
    }

    #[test]
    fn ex32_cq_holds_trivially() {
        let p = registry_build("ex32").unwrap();
        let rep = check_basic_cq(&p, &[0.0], &[0.0], TOL).unwrap();
        assert!(rep.holds);
        assert_eq!(rep.certificate, vec![0.0]);
    }

    #[test]
    fn opposed_gradients_fail_cq() {
        // Constraints x <= 0 and -x <= 0 both active at 0 in R^1.
        let f0 = crate::poly::Polynomial::zero(1);
        let fmap = crate::poly::SmoothMap::new(
            1,
            vec![
                crate::poly::Polynomial::new(1, vec![(1.0, vec![1])]).unwrap(),
                crate::poly::Polynomial::new(1, vec![(-1.0, vec![1])]).unwrap(),
            ],
        )
        .unwrap();
        let p = ParametricProblem::composite(
            "opposed",
            f0,
            fmap,
            ConvexPiece::orthant_nonpos(2, 2).unwrap(),
            vec![0.0],
        )
        .unwrap();
        let rep = check_basic_cq(&p, &[0.0], &[0.0, 0.0], TOL).unwrap();
        assert!(!rep.holds);
        // And the multiplier set is indeed unbounded there.
        let set = multiplier_set(&p, &[0.0], &[0.0, 0.0], &[0.0], TOL).unwrap();
        assert!(!set.is_empty());
        assert!(!set.is_bounded());
    }

    #[test]
    fn cq_invariant_under_row_rescaling() {
        // Scaling a constraint by a positive factor must not change the verdict.
        let p = registry_build("ex33").unwrap();
        let base = check_basic_cq(&p, &[0.0; 4], &[0.0; 4], TOL).unwrap();

        let f0 = crate::poly::Polynomial::new(4, vec![(1.0, vec![0, 0, 1, 0]), (0.5, vec![0, 0, 0, 2])])
            .unwrap();
        let scaled_f1 = crate::poly::Polynomial::new(
            4,
            vec![(10.0, vec![1, 0, 0, 0]), (-10.0, vec![0, 0, 1, 0])],
        )
        .unwrap();
        let ProblemBody::Composite { fmap, .. } = &p.body else { panic!() };
        let mut comps = fmap.components().to_vec();
        comps[0] = scaled_f1;
        let fmap2 = crate::poly::SmoothMap::new(4, comps).unwrap();
        let p2 = ParametricProblem::composite(
            "ex33_scaled",
            f0,
            fmap2,
            ConvexPiece::orthant_nonpos(4, 4).unwrap(),
            vec![0.0; 4],
        )
        .unwrap();
        let scaled = check_basic_cq(&p2, &[0.0; 4], &[0.0; 4], TOL).unwrap();
        assert_eq!(base.holds, scaled.holds);
    }

    #[test]
    fn midpoint_passes_raw_membership() {
        let p = registry_build("ex33").unwrap();
        let set = multiplier_set(&p, &[0.0; 4], &[0.0; 4], &[0.0; 4], TOL).unwrap();
        assert!(multiplier_set_convexity_test(&p, &[0.0; 4], &[0.0; 4], &[0.0; 4], &set, 32, 1234)
            .unwrap());
    }
}
