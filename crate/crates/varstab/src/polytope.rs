//! Polyhedral sets in constraint form with desk-scale vertex enumeration.
//!
//! Multiplier sets and the small feasibility programs behind the
//! constraint-qualification check all live in dimension <= ~7 with a
//! handful of rows, so vertices are enumerated by walking the active-set
//! bases directly: every d-subset of constraints is solved as an equality
//! system and kept when it is feasible. Equalities are eliminated first by
//! parameterizing their affine solution set, which also keeps the basis
//! walk well conditioned.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Dimension cap for vertex enumeration of multiplier sets.
pub const VERTEX_DIM_CAP: usize = 6;

const FEAS_TOL: f64 = 1e-9;
const DEDUP_TOL: f64 = 1e-8;

/// `{ y : A_eq y = b_eq, A_in y <= b_in }` with lazily cached vertices.
#[derive(Debug, Serialize, Deserialize)]
pub struct PolyhedralSet {
    dim: usize,
    eq_rows: Vec<Vec<f64>>,
    eq_rhs: Vec<f64>,
    in_rows: Vec<Vec<f64>>,
    in_rhs: Vec<f64>,
    #[serde(skip)]
    cache: OnceLock<Geometry>,
}

#[derive(Debug, Clone)]
struct Geometry {
    feasible: bool,
    bounded: bool,
    /// Present only when the set is bounded and within the dimension cap.
    vertices: Option<Vec<Vec<f64>>>,
}

impl Clone for PolyhedralSet {
    fn clone(&self) -> Self {
        PolyhedralSet {
            dim: self.dim,
            eq_rows: self.eq_rows.clone(),
            eq_rhs: self.eq_rhs.clone(),
            in_rows: self.in_rows.clone(),
            in_rhs: self.in_rhs.clone(),
            cache: OnceLock::new(),
        }
    }
}

impl PartialEq for PolyhedralSet {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.eq_rows == other.eq_rows
            && self.eq_rhs == other.eq_rhs
            && self.in_rows == other.in_rows
            && self.in_rhs == other.in_rhs
    }
}

impl PolyhedralSet {
    pub fn new(
        dim: usize,
        eq_rows: Vec<Vec<f64>>,
        eq_rhs: Vec<f64>,
        in_rows: Vec<Vec<f64>>,
        in_rhs: Vec<f64>,
    ) -> Result<Self> {
        if eq_rows.len() != eq_rhs.len() || in_rows.len() != in_rhs.len() {
            return Err(Error::Input("constraint rows and rhs lengths differ".into()));
        }
        if eq_rows.iter().chain(&in_rows).any(|r| r.len() != dim) {
            return Err(Error::Input("constraint row has wrong dimension".into()));
        }
        Ok(PolyhedralSet {
            dim,
            eq_rows,
            eq_rhs,
            in_rows,
            in_rhs,
            cache: OnceLock::new(),
        })
    }

    /// The whole space `R^dim` (no constraints).
    pub fn free(dim: usize) -> Self {
        PolyhedralSet::new(dim, vec![], vec![], vec![], vec![]).expect("free set")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn equalities(&self) -> (&[Vec<f64>], &[f64]) {
        (&self.eq_rows, &self.eq_rhs)
    }

    pub fn inequalities(&self) -> (&[Vec<f64>], &[f64]) {
        (&self.in_rows, &self.in_rhs)
    }

    pub fn contains(&self, y: &[f64], tol: f64) -> bool {
        if y.len() != self.dim {
            return false;
        }
        let eq_ok = self
            .eq_rows
            .iter()
            .zip(&self.eq_rhs)
            .all(|(row, &b)| (linalg::dot(row, y) - b).abs() <= tol);
        let in_ok = self
            .in_rows
            .iter()
            .zip(&self.in_rhs)
            .all(|(row, &b)| linalg::dot(row, y) <= b + tol);
        eq_ok && in_ok
    }

    fn geometry(&self) -> &Geometry {
        self.cache.get_or_init(|| compute_geometry(self, VERTEX_DIM_CAP))
    }

    pub fn is_empty(&self) -> bool {
        !self.geometry().feasible
    }

    pub fn is_bounded(&self) -> bool {
        self.geometry().bounded
    }

    /// Vertices in lexicographic order. Errors when the set is unbounded or
    /// its effective dimension exceeds the enumeration cap.
    pub fn vertices(&self) -> Result<&[Vec<f64>]> {
        let geo = self.geometry();
        if !geo.feasible {
            return Ok(&[]);
        }
        if !geo.bounded {
            return Err(Error::Unsupported(
                "vertex enumeration of an unbounded set".into(),
            ));
        }
        geo.vertices.as_deref().ok_or_else(|| {
            Error::Unsupported(format!(
                "vertex enumeration capped at effective dimension {VERTEX_DIM_CAP}"
            ))
        })
    }

    /// Affine dimension of the vertex hull.
    pub fn affine_dim(&self) -> Result<usize> {
        let verts = self.vertices()?;
        if verts.len() <= 1 {
            return Ok(0);
        }
        let diffs: Vec<Vec<f64>> = verts[1..]
            .iter()
            .map(|v| linalg::sub(v, &verts[0]))
            .collect();
        Ok(linalg::rank(&diffs, 1e-12))
    }

    /// `(min, max)` of `c . y` over the set (via its vertices).
    pub fn support(&self, c: &[f64]) -> Result<(f64, f64)> {
        let verts = self.vertices()?;
        if verts.is_empty() {
            return Err(Error::Probe("support of an empty set".into()));
        }
        let vals = verts.iter().map(|v| linalg::dot(c, v));
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for t in vals {
            lo = lo.min(t);
            hi = hi.max(t);
        }
        Ok((lo, hi))
    }
}

fn compute_geometry(set: &PolyhedralSet, cap: usize) -> Geometry {
    let infeasible = Geometry {
        feasible: false,
        bounded: true,
        vertices: Some(Vec::new()),
    };
    let dim = set.dim;

    // Eliminate equalities: y = y0 + N^T t with N the null-space basis.
    let (y0, basis) = if set.eq_rows.is_empty() {
        (
            vec![0.0; dim],
            (0..dim)
                .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect::<Vec<Vec<f64>>>(),
        )
    } else {
        let y0 = linalg::lstsq(&set.eq_rows, &set.eq_rhs, 0.0);
        let resid: Vec<f64> = set
            .eq_rows
            .iter()
            .zip(&set.eq_rhs)
            .map(|(row, &b)| linalg::dot(row, &y0) - b)
            .collect();
        if linalg::norm_inf(&resid) > FEAS_TOL {
            return infeasible;
        }
        (y0, linalg::null_space_basis(&set.eq_rows, dim, 1e-12))
    };
    let k = basis.len();

    // Reduced inequalities A t <= b in the t coordinates.
    let a_red: Vec<Vec<f64>> = set
        .in_rows
        .iter()
        .map(|row| basis.iter().map(|b| linalg::dot(row, b)).collect())
        .collect();
    let b_red: Vec<f64> = set
        .in_rows
        .iter()
        .zip(&set.in_rhs)
        .map(|(row, &b)| b - linalg::dot(row, &y0))
        .collect();

    if k == 0 {
        // Single candidate point.
        let feasible = a_red.iter().zip(&b_red).all(|(_, &b)| b >= -FEAS_TOL);
        return Geometry {
            feasible,
            bounded: true,
            vertices: Some(if feasible { vec![y0] } else { vec![] }),
        };
    }

    let bounded = recession_is_trivial(&a_red, k);
    if !bounded {
        // Feasibility via a big-box section; adequate at desk scale.
        let boxed = append_box(&a_red, &b_red, k, 1e6);
        let verts = enumerate_reduced(&boxed.0, &boxed.1, k);
        return Geometry {
            feasible: !verts.is_empty(),
            bounded: false,
            vertices: None,
        };
    }

    if k > cap {
        // Bounded but too high-dimensional to enumerate; report feasibility
        // through a boxed section as well.
        let boxed = append_box(&a_red, &b_red, k, 1e6);
        let verts = enumerate_reduced(&boxed.0, &boxed.1, k);
        return Geometry {
            feasible: !verts.is_empty(),
            bounded: true,
            vertices: None,
        };
    }

    let t_verts = enumerate_reduced(&a_red, &b_red, k);
    let mut verts: Vec<Vec<f64>> = t_verts
        .iter()
        .map(|t| {
            let mut y = y0.clone();
            for (tb, b) in t.iter().zip(&basis) {
                for (yi, bi) in y.iter_mut().zip(b) {
                    *yi += tb * bi;
                }
            }
            y
        })
        .filter(|y| set.contains(y, FEAS_TOL))
        .collect();
    dedup_points(&mut verts, DEDUP_TOL);
    verts.sort_by(lex_cmp);
    Geometry {
        feasible: !verts.is_empty(),
        bounded: true,
        vertices: Some(verts),
    }
}

/// True when `{t : A t <= 0}` is `{0}`, i.e. the reduced set is bounded.
fn recession_is_trivial(a_red: &[Vec<f64>], k: usize) -> bool {
    if a_red.is_empty() {
        return k == 0;
    }
    let zeros = vec![0.0; a_red.len()];
    let (rows, rhs) = append_box(a_red, &zeros, k, 1.0);
    let verts = enumerate_reduced(&rows, &rhs, k);
    verts.iter().all(|t| linalg::norm_inf(t) <= 1e-6)
}

fn append_box(
    rows: &[Vec<f64>],
    rhs: &[f64],
    k: usize,
    half_width: f64,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut all_rows = rows.to_vec();
    let mut all_rhs = rhs.to_vec();
    for j in 0..k {
        let mut up = vec![0.0; k];
        up[j] = 1.0;
        let mut down = vec![0.0; k];
        down[j] = -1.0;
        all_rows.push(up);
        all_rhs.push(half_width);
        all_rows.push(down);
        all_rhs.push(half_width);
    }
    (all_rows, all_rhs)
}

/// Vertices of the full-dimensional polytope `{t in R^k : A t <= b}` by
/// enumerating k-subsets of rows as candidate active bases.
fn enumerate_reduced(rows: &[Vec<f64>], rhs: &[f64], k: usize) -> Vec<Vec<f64>> {
    let nrows = rows.len();
    let mut verts: Vec<Vec<f64>> = Vec::new();
    if nrows < k {
        return verts;
    }
    let scale = 1.0 + rhs.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let a_sub: Vec<Vec<f64>> = idx.iter().map(|&i| rows[i].clone()).collect();
        let b_sub: Vec<f64> = idx.iter().map(|&i| rhs[i]).collect();
        if let Some(t) = linalg::solve(&a_sub, &b_sub) {
            let feasible = rows
                .iter()
                .zip(rhs)
                .all(|(row, &b)| linalg::dot(row, &t) <= b + FEAS_TOL * scale);
            if feasible {
                verts.push(t);
            }
        }
        // Next k-combination in lexicographic order.
        let mut i = k;
        loop {
            if i == 0 {
                dedup_points(&mut verts, DEDUP_TOL);
                verts.sort_by(lex_cmp);
                return verts;
            }
            i -= 1;
            if idx[i] != i + nrows - k {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn dedup_points(pts: &mut Vec<Vec<f64>>, tol: f64) {
    let mut kept: Vec<Vec<f64>> = Vec::with_capacity(pts.len());
    for p in pts.drain(..) {
        if !kept
            .iter()
            .any(|q| linalg::norm_inf(&linalg::sub(&p, q)) <= tol)
        {
            kept.push(p);
        }
    }
    *pts = kept;
}

fn lex_cmp(a: &Vec<f64>, b: &Vec<f64>) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            other => return other,
        }
    }
    std::cmp::Ordering::Equal
}

/// Maximizes `c . x` over the bounded polytope `{A x <= b} ∩ [-box, box]^k`.
/// Returns the optimal value and the lexicographically smallest maximizer.
pub fn boxed_linprog_max(
    rows: &[Vec<f64>],
    rhs: &[f64],
    k: usize,
    half_width: f64,
    c: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let (all_rows, all_rhs) = append_box(rows, rhs, k, half_width);
    let verts = enumerate_reduced(&all_rows, &all_rhs, k);
    if verts.is_empty() {
        return Err(Error::Numerical(
            "boxed linear program is infeasible".into(),
        ));
    }
    let best_val = verts
        .iter()
        .map(|v| linalg::dot(c, v))
        .fold(f64::NEG_INFINITY, f64::max);
    let best = verts
        .iter()
        .find(|v| linalg::dot(c, v) >= best_val - 1e-12 * (1.0 + best_val.abs()))
        .expect("nonempty vertex list");
    Ok((best_val, best.clone()))
}
