//! Parametric problems `phi(x, u)` and the built-in registry.
//!
//! A problem is either a *composite* `phi(x,u) = f0(x) + g(F(x) + u)` with
//! polynomial `f0`, `F` and a structured convex piece `g`, or a *closed
//! form* registry entry with analytic value/gradient rules. Indicator
//! violations evaluate to `+inf` rather than erroring, matching the
//! extended-real-valued convention used throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::poly::{Polynomial, SmoothMap};

/// Structured convex function `g` acting on `z = F(x) + u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ConvexPiece {
    /// Indicator of `K = R^s_- x R^(m-s)`: the first `s` coordinates must be
    /// nonpositive, the remaining `m - s` are unconstrained. The classical
    /// nonlinear-programming case.
    OrthantNonpos { s: usize, m: usize },
    /// Indicator of `{0}^m` (equality constraints).
    ZeroIndicator { m: usize },
    /// Indicator of the box `[lo, hi]` (entries may be infinite).
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// `z -> w |z|` (Euclidean norm).
    EuclideanNorm { w: f64 },
    /// `z -> (w/2) |z|^2`.
    SquaredNorm { w: f64 },
}

impl ConvexPiece {
    pub fn orthant_nonpos(s: usize, m: usize) -> Result<Self> {
        if s > m {
            return Err(Error::Input(format!("orthant split s={s} exceeds dimension m={m}")));
        }
        Ok(ConvexPiece::OrthantNonpos { s, m })
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Input("box bounds have mismatched lengths".into()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Err(Error::Input("box requires lo <= hi componentwise".into()));
        }
        Ok(ConvexPiece::Box { lo, hi })
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexPiece::OrthantNonpos { m, .. } | ConvexPiece::ZeroIndicator { m } => *m,
            ConvexPiece::Box { lo, .. } => lo.len(),
            // Norm pieces act on whatever dimension F produces; dim is
            // taken from the problem. 0 means "any".
            ConvexPiece::EuclideanNorm { .. } | ConvexPiece::SquaredNorm { .. } => 0,
        }
    }

    /// Extended-real value of `g(z)`; indicator violations give `+inf`.
    pub fn value(&self, z: &[f64], feas_tol: f64) -> f64 {
        match self {
            ConvexPiece::OrthantNonpos { s, .. } => {
                if z.iter().take(*s).all(|&zi| zi <= feas_tol) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ConvexPiece::ZeroIndicator { .. } => {
                if z.iter().all(|&zi| zi.abs() <= feas_tol) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ConvexPiece::Box { lo, hi } => {
                let ok = z
                    .iter()
                    .zip(lo.iter().zip(hi))
                    .all(|(&zi, (&l, &h))| zi >= l - feas_tol && zi <= h + feas_tol);
                if ok {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ConvexPiece::EuclideanNorm { w } => w * linalg::norm2(z),
            ConvexPiece::SquaredNorm { w } => 0.5 * w * linalg::dot(z, z),
        }
    }

    pub fn in_domain(&self, z: &[f64], feas_tol: f64) -> bool {
        self.value(z, feas_tol).is_finite()
    }

    /// Whether `g` is an indicator (so the feasible set has empty interior
    /// along constrained coordinates).
    pub fn is_indicator(&self) -> bool {
        matches!(
            self,
            ConvexPiece::OrthantNonpos { .. } | ConvexPiece::ZeroIndicator { .. } | ConvexPiece::Box { .. }
        )
    }

    /// Total constraint violation used by merit functions during refinement.
    pub fn violation(&self, z: &[f64]) -> f64 {
        match self {
            ConvexPiece::OrthantNonpos { s, .. } => {
                z.iter().take(*s).map(|&zi| zi.max(0.0)).sum()
            }
            ConvexPiece::ZeroIndicator { .. } => z.iter().map(|zi| zi.abs()).sum(),
            ConvexPiece::Box { lo, hi } => z
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(&zi, (&l, &h))| (l - zi).max(0.0) + (zi - h).max(0.0))
                .sum(),
            _ => 0.0,
        }
    }
}

/// Closed-form registry bodies with analytic rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ClosedForm {
    /// `phi(x, u) = (s/2)(x - xbar)^2 - u (x - xbar)`, n = m = 1, s > 0.
    Quadratic { s: f64 },
    /// `f(x) = -x^2 / 2`, n = 1, no parameter.
    NegQuadratic,
    /// `f(x) = |x|`, n = 1, no parameter.
    Abs1d,
    /// `phi(x, u) = (3/4) z^(4/3) + z - x` with `z = |(x, u)|`, n = m = 1.
    /// Strongly convex near the origin yet not fully stable there.
    Ex32,
}

impl ClosedForm {
    fn value(&self, x: &[f64], u: &[f64], xbar: &[f64]) -> f64 {
        match self {
            ClosedForm::Quadratic { s } => {
                let d = x[0] - xbar[0];
                0.5 * s * d * d - u[0] * d
            }
            ClosedForm::NegQuadratic => -0.5 * x[0] * x[0],
            ClosedForm::Abs1d => x[0].abs(),
            ClosedForm::Ex32 => {
                let z = x[0].hypot(u[0]);
                0.75 * z.powf(4.0 / 3.0) + z - x[0]
            }
        }
    }

    /// Gradient in `x`; `None` at nonsmooth points.
    fn grad_x(&self, x: &[f64], u: &[f64], xbar: &[f64]) -> Option<Vec<f64>> {
        match self {
            ClosedForm::Quadratic { s } => Some(vec![s * (x[0] - xbar[0]) - u[0]]),
            ClosedForm::NegQuadratic => Some(vec![-x[0]]),
            ClosedForm::Abs1d => (x[0] != 0.0).then(|| vec![x[0].signum()]),
            ClosedForm::Ex32 => {
                let z = x[0].hypot(u[0]);
                (z != 0.0).then(|| vec![(z.powf(1.0 / 3.0) + 1.0) * (x[0] / z) - 1.0])
            }
        }
    }

    /// Gradient in `u`; `None` at nonsmooth points or when m = 0.
    fn grad_u(&self, x: &[f64], u: &[f64], xbar: &[f64]) -> Option<Vec<f64>> {
        match self {
            ClosedForm::Quadratic { .. } => Some(vec![-(x[0] - xbar[0])]),
            ClosedForm::NegQuadratic | ClosedForm::Abs1d => Some(Vec::new()),
            ClosedForm::Ex32 => {
                let z = x[0].hypot(u[0]);
                (z != 0.0).then(|| vec![(z.powf(1.0 / 3.0) + 1.0) * (u[0] / z)])
            }
        }
    }

    /// Subgradient interval of the u = 0 slice at `x` (1-d bodies only):
    /// `[lo, hi]` with lo = hi at smooth points.
    pub fn subgrad_x_interval(&self, x: f64, xbar: f64) -> (f64, f64) {
        match self {
            ClosedForm::Quadratic { s } => {
                let g = s * (x - xbar);
                (g, g)
            }
            ClosedForm::NegQuadratic => (-x, -x),
            ClosedForm::Abs1d => {
                if x == 0.0 {
                    (-1.0, 1.0)
                } else {
                    (x.signum(), x.signum())
                }
            }
            ClosedForm::Ex32 => {
                if x == 0.0 {
                    // At the origin the u = 0 slice has the kink of |x|:
                    // subgradients fill [-|x|^(1/3)-2, |x|^(1/3)] as x -> 0.
                    (-2.0, 0.0)
                } else {
                    let g = (x.abs().powf(1.0 / 3.0) + 1.0) * x.signum() - 1.0;
                    (g, g)
                }
            }
        }
    }
}

/// The smooth/convex body of a parametric problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ProblemBody {
    Composite {
        f0: Polynomial,
        fmap: SmoothMap,
        g: ConvexPiece,
    },
    ClosedForm(ClosedForm),
}

/// A parametric optimization problem anchored at `xbar`, to be probed under
/// tilts `v` and parameter shifts `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParametricProblem {
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub body: ProblemBody,
    pub xbar: Vec<f64>,
}

/// Feasibility tolerance used when evaluating indicators on exact data.
pub const FEAS_TOL: f64 = 1e-9;

impl ParametricProblem {
    pub fn composite(
        name: &str,
        f0: Polynomial,
        fmap: SmoothMap,
        g: ConvexPiece,
        xbar: Vec<f64>,
    ) -> Result<Self> {
        let n = f0.num_vars();
        let m = fmap.range_dim();
        if fmap.domain_dim() != n {
            return Err(Error::Input(format!(
                "map domain {} does not match objective dimension {n}",
                fmap.domain_dim()
            )));
        }
        let g_dim = g.dim();
        if g_dim != 0 && g_dim != m {
            return Err(Error::Input(format!(
                "convex piece dimension {g_dim} does not match map range {m}"
            )));
        }
        if xbar.len() != n {
            return Err(Error::Input(format!(
                "anchor has length {}, expected {n}",
                xbar.len()
            )));
        }
        let p = ParametricProblem {
            name: name.to_string(),
            n,
            m,
            body: ProblemBody::Composite { f0, fmap, g },
            xbar,
        };
        let at_anchor = p.eval_phi(&p.xbar.clone(), &vec![0.0; m])?;
        if !at_anchor.is_finite() {
            return Err(Error::Input(
                "phi(xbar, 0) must be finite: the anchor is infeasible".into(),
            ));
        }
        Ok(p)
    }

    /// Moves the anchor; the quadratic closed form is centered on its
    /// anchor, so this shifts the whole problem.
    pub fn with_anchor(mut self, xbar: Vec<f64>) -> Result<Self> {
        if xbar.len() != self.n {
            return Err(Error::Input("anchor length mismatch".into()));
        }
        self.xbar = xbar;
        Ok(self)
    }

    fn check_dims(&self, x: &[f64], u: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::Input(format!(
                "x has length {}, expected {}",
                x.len(),
                self.n
            )));
        }
        if u.len() != self.m {
            return Err(Error::Input(format!(
                "u has length {}, expected {}",
                u.len(),
                self.m
            )));
        }
        Ok(())
    }

    /// `phi(x, u)` as an extended real (`+inf` when an indicator is violated).
    pub fn eval_phi(&self, x: &[f64], u: &[f64]) -> Result<f64> {
        self.check_dims(x, u)?;
        match &self.body {
            ProblemBody::Composite { f0, fmap, g } => {
                let z = linalg::add(&fmap.eval(x), u);
                Ok(f0.eval(x) + g.value(&z, FEAS_TOL))
            }
            ProblemBody::ClosedForm(cf) => Ok(cf.value(x, u, &self.xbar)),
        }
    }

    /// Exact `grad f0(x)` and Jacobian `DF(x)` (m x n) for composite bodies.
    pub fn grad_f0_and_jac_f(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        if x.len() != self.n {
            return Err(Error::Input(format!(
                "x has length {}, expected {}",
                x.len(),
                self.n
            )));
        }
        match &self.body {
            ProblemBody::Composite { f0, fmap, .. } => {
                Ok((f0.gradient(x), fmap.jacobian(x)))
            }
            ProblemBody::ClosedForm(_) => Err(Error::Unsupported(
                "grad_f0_and_jac_f needs a composite body".into(),
            )),
        }
    }

    /// Gradient of `phi(., u)` at smooth points: analytic for closed forms,
    /// exact for composites whose convex piece is smooth at `F(x) + u`.
    pub fn phi_grad_x(&self, x: &[f64], u: &[f64]) -> Result<Option<Vec<f64>>> {
        self.check_dims(x, u)?;
        match &self.body {
            ProblemBody::ClosedForm(cf) => Ok(cf.grad_x(x, u, &self.xbar)),
            ProblemBody::Composite { f0, fmap, g } => {
                let z = linalg::add(&fmap.eval(x), u);
                let gz = match g {
                    ConvexPiece::SquaredNorm { w } => linalg::scale(&z, *w),
                    ConvexPiece::EuclideanNorm { w } => {
                        let nz = linalg::norm2(&z);
                        if nz == 0.0 {
                            return Ok(None);
                        }
                        linalg::scale(&z, w / nz)
                    }
                    // Indicators are flat on their domain; the gradient of
                    // the smooth part only, valid at interior points.
                    _ => vec![0.0; z.len()],
                };
                let jac = fmap.jacobian(x);
                Ok(Some(linalg::add(&f0.gradient(x), &linalg::mat_t_vec(&jac, &gz))))
            }
        }
    }

    /// Gradient of `phi(x, .)` in the parameter at smooth points.
    pub fn phi_grad_u(&self, x: &[f64], u: &[f64]) -> Result<Option<Vec<f64>>> {
        self.check_dims(x, u)?;
        match &self.body {
            ProblemBody::ClosedForm(cf) => Ok(cf.grad_u(x, u, &self.xbar)),
            ProblemBody::Composite { fmap, g, .. } => {
                let z = linalg::add(&fmap.eval(x), u);
                match g {
                    ConvexPiece::SquaredNorm { w } => Ok(Some(linalg::scale(&z, *w))),
                    ConvexPiece::EuclideanNorm { w } => {
                        let nz = linalg::norm2(&z);
                        if nz == 0.0 {
                            Ok(None)
                        } else {
                            Ok(Some(linalg::scale(&z, w / nz)))
                        }
                    }
                    _ => Ok(None),
                }
            }
        }
    }

    pub fn closed_form(&self) -> Option<&ClosedForm> {
        match &self.body {
            ProblemBody::ClosedForm(cf) => Some(cf),
            _ => None,
        }
    }

    pub fn is_composite(&self) -> bool {
        matches!(self.body, ProblemBody::Composite { .. })
    }

    /// Content hash of the problem definition, for report reproducibility.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("problem serializes");
        // FNV-1a, enough to detect accidental config drift between runs.
        let mut h: u64 = 0xcbf29ce484222325;
        for b in bytes {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

/// One registry entry: id pattern plus a one-line description.
pub struct RegistryEntry {
    pub id: &'static str,
    pub describe: &'static str,
}

/// Stable listing of the built-in problems.
pub fn registry_list() -> Vec<RegistryEntry> {
    vec![
        RegistryEntry {
            id: "quadratic(s)",
            describe: "phi(x,u) = (s/2) x^2 - u x, s > 0 (default s = 1); fully stable calibration baseline with known moduli",
        },
        RegistryEntry {
            id: "neg_quadratic",
            describe: "f(x) = -x^2/2, no parameter; concave model whose localized minimizer sits on the ball boundary",
        },
        RegistryEntry {
            id: "abs1d",
            describe: "f(x) = |x|, no parameter; kink at the origin with multi-valued subgradient",
        },
        RegistryEntry {
            id: "ex32",
            describe: "phi(x,u) = (3/4)|(x,u)|^(4/3) + |(x,u)| - x; strongly convex near 0, tilt-stable but not fully stable",
        },
        RegistryEntry {
            id: "ex33",
            describe: "4-variable NLP with four inequality constraints; second-order sufficiency holds for only part of the multiplier segment",
        },
    ]
}

/// Builds a registry problem from its id. `quadratic` takes an optional
/// curvature parameter: `quadratic`, `quadratic(0.5)` and `quadratic:0.5`
/// are all accepted.
pub fn registry_build(id: &str) -> Result<ParametricProblem> {
    let id = id.trim();
    if let Some(s) = parse_quadratic_id(id)? {
        return quadratic(s);
    }
    match id {
        "neg_quadratic" => Ok(ParametricProblem {
            name: "neg_quadratic".into(),
            n: 1,
            m: 0,
            body: ProblemBody::ClosedForm(ClosedForm::NegQuadratic),
            xbar: vec![0.0],
        }),
        "abs1d" => Ok(ParametricProblem {
            name: "abs1d".into(),
            n: 1,
            m: 0,
            body: ProblemBody::ClosedForm(ClosedForm::Abs1d),
            xbar: vec![0.0],
        }),
        "ex32" => Ok(ParametricProblem {
            name: "ex32".into(),
            n: 1,
            m: 1,
            body: ProblemBody::ClosedForm(ClosedForm::Ex32),
            xbar: vec![0.0],
        }),
        "ex33" => ex33(),
        other => Err(Error::Input(format!("unknown registry id '{other}'"))),
    }
}

fn parse_quadratic_id(id: &str) -> Result<Option<f64>> {
    if id == "quadratic" {
        return Ok(Some(1.0));
    }
    let param = id
        .strip_prefix("quadratic(")
        .and_then(|rest| rest.strip_suffix(')'))
        .or_else(|| id.strip_prefix("quadratic:"));
    match param {
        None => Ok(None),
        Some(p) => {
            let s: f64 = p
                .trim()
                .parse()
                .map_err(|_| Error::Input(format!("bad quadratic parameter '{p}'")))?;
            Ok(Some(s))
        }
    }
}

/// `phi(x,u) = (s/2) x^2 - u x` anchored at 0.
pub fn quadratic(s: f64) -> Result<ParametricProblem> {
    if !(s > 0.0) {
        return Err(Error::Input(format!("quadratic needs s > 0, got {s}")));
    }
    Ok(ParametricProblem {
        name: format!("quadratic({s})"),
        n: 1,
        m: 1,
        body: ProblemBody::ClosedForm(ClosedForm::Quadratic { s }),
        xbar: vec![0.0],
    })
}

/// Four-variable NLP: minimize `x3 + x4^2/2` subject to
/// `x1 - x3 <= -u1`, `-x1 - x3 <= -u2`, `x2 - x3 - x4^2/2 <= -u3`,
/// `-x2 - x3 - x4^2/2 <= -u4`, anchored at the origin where all four
/// constraints are active and the multiplier set is a segment.
fn ex33() -> Result<ParametricProblem> {
    let f0 = Polynomial::new(4, vec![(1.0, vec![0, 0, 1, 0]), (0.5, vec![0, 0, 0, 2])])?;
    let f1 = Polynomial::new(4, vec![(1.0, vec![1, 0, 0, 0]), (-1.0, vec![0, 0, 1, 0])])?;
    let f2 = Polynomial::new(4, vec![(-1.0, vec![1, 0, 0, 0]), (-1.0, vec![0, 0, 1, 0])])?;
    let f3 = Polynomial::new(
        4,
        vec![
            (1.0, vec![0, 1, 0, 0]),
            (-1.0, vec![0, 0, 1, 0]),
            (-0.5, vec![0, 0, 0, 2]),
        ],
    )?;
    let f4 = Polynomial::new(
        4,
        vec![
            (-1.0, vec![0, 1, 0, 0]),
            (-1.0, vec![0, 0, 1, 0]),
            (-0.5, vec![0, 0, 0, 2]),
        ],
    )?;
    let fmap = SmoothMap::new(4, vec![f1, f2, f3, f4])?;
    ParametricProblem::composite(
        "ex33",
        f0,
        fmap,
        ConvexPiece::orthant_nonpos(4, 4)?,
        vec![0.0; 4],
    )
}

/// Equality-constrained companion of `neg_quadratic`: `f0(x) = -x^2/2`
/// subject to `x + u = 0`. The localized value map is `-u^2/2 + u v`,
/// which needs elicitation level 1 to become convex in `u`.
pub fn neg_quadratic_pinned() -> Result<ParametricProblem> {
    let f0 = Polynomial::new(1, vec![(-0.5, vec![2])])?;
    let fmap = SmoothMap::new(1, vec![Polynomial::new(1, vec![(1.0, vec![1])])?])?;
    ParametricProblem::composite(
        "neg_quadratic_pinned",
        f0,
        fmap,
        ConvexPiece::ZeroIndicator { m: 1 },
        vec![0.0],
    )
}

// ---------------------------------------------------------------------------
// Problem files (JSON)
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum PieceSpec {
    OrthantNonpos { s: usize },
    Zero {},
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Norm { w: f64 },
    Sqnorm { w: f64 },
}

#[derive(Debug, Serialize, Deserialize)]
struct PolySpec {
    coeff: f64,
    powers: Vec<u32>,
}

/// On-disk problem description.
#[derive(Debug, Serialize, Deserialize)]
struct ProblemFile {
    name: String,
    n: usize,
    m: usize,
    kind: String,
    #[serde(default)]
    builtin: Option<String>,
    #[serde(default)]
    xbar: Option<Vec<f64>>,
    #[serde(default)]
    f0: Option<Vec<PolySpec>>,
    #[serde(rename = "F", default)]
    fmap: Option<Vec<Vec<PolySpec>>>,
    #[serde(default)]
    g: Option<PieceSpec>,
}

/// Parses a problem from its JSON text representation.
pub fn problem_from_json(text: &str) -> Result<ParametricProblem> {
    let file: ProblemFile =
        serde_json::from_str(text).map_err(|e| Error::Input(format!("bad problem file: {e}")))?;
    match file.kind.as_str() {
        "builtin" => {
            let id = file
                .builtin
                .as_deref()
                .ok_or_else(|| Error::Input("builtin problem needs a 'builtin' id".into()))?;
            let mut p = registry_build(id)?;
            if let Some(xbar) = file.xbar {
                p = p.with_anchor(xbar)?;
            }
            Ok(p)
        }
        "composite" => {
            let to_poly = |specs: &[PolySpec]| -> Result<Polynomial> {
                Polynomial::new(
                    file.n,
                    specs.iter().map(|t| (t.coeff, t.powers.clone())).collect(),
                )
            };
            let f0 = to_poly(
                file.f0
                    .as_deref()
                    .ok_or_else(|| Error::Input("composite problem needs 'f0'".into()))?,
            )?;
            let comps = file
                .fmap
                .as_deref()
                .ok_or_else(|| Error::Input("composite problem needs 'F'".into()))?;
            if comps.len() != file.m {
                return Err(Error::Input(format!(
                    "'F' has {} components, expected m = {}",
                    comps.len(),
                    file.m
                )));
            }
            let fmap = SmoothMap::new(
                file.n,
                comps.iter().map(|c| to_poly(c)).collect::<Result<Vec<_>>>()?,
            )?;
            let g = match file
                .g
                .ok_or_else(|| Error::Input("composite problem needs 'g'".into()))?
            {
                PieceSpec::OrthantNonpos { s } => ConvexPiece::orthant_nonpos(s, file.m)?,
                PieceSpec::Zero {} => ConvexPiece::ZeroIndicator { m: file.m },
                PieceSpec::Box { lo, hi } => {
                    if lo.len() != file.m {
                        return Err(Error::Input("box bounds must have length m".into()));
                    }
                    ConvexPiece::boxed(lo, hi)?
                }
                PieceSpec::Norm { w } => {
                    if w < 0.0 {
                        return Err(Error::Input("norm weight must be >= 0".into()));
                    }
                    ConvexPiece::EuclideanNorm { w }
                }
                PieceSpec::Sqnorm { w } => {
                    if w < 0.0 {
                        return Err(Error::Input("sqnorm weight must be >= 0".into()));
                    }
                    ConvexPiece::SquaredNorm { w }
                }
            };
            let xbar = file.xbar.unwrap_or_else(|| vec![0.0; file.n]);
            ParametricProblem::composite(&file.name, f0, fmap, g, xbar)
        }
        other => Err(Error::Input(format!("unknown problem kind '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;

    #[test]
    fn value_at_anchor_is_zero_for_registry() {
        for id in ["quadratic", "ex32", "ex33", "neg_quadratic", "abs1d"] {
            let p = registry_build(id).unwrap();
            let u = vec![0.0; p.m];
            let v = p.eval_phi(&p.xbar.clone(), &u).unwrap();
            assert_eq!(v, 0.0, "{id} at anchor");
        }
    }

    #[test]
    fn ex33_all_constraints_active_at_anchor() {
        let p = registry_build("ex33").unwrap();
        assert_eq!((p.n, p.m), (4, 4));
        assert_eq!(p.xbar, vec![0.0; 4]);
        match &p.body {
            ProblemBody::Composite { fmap, .. } => {
                assert_eq!(fmap.eval(&[0.0; 4]), vec![0.0; 4]);
            }
            _ => panic!("ex33 is composite"),
        }
        assert_eq!(p.eval_phi(&[0.0; 4], &[0.0; 4]).unwrap(), 0.0);
    }

    #[test]
    fn ex33_constraint_gradients_at_anchor() {
        let p = registry_build("ex33").unwrap();
        let (g0, jac) = p.grad_f0_and_jac_f(&[0.0; 4]).unwrap();
        assert_eq!(g0, vec![0.0, 0.0, 1.0, 0.0]);
        assert_eq!(jac[0], vec![1.0, 0.0, -1.0, 0.0]);
        assert_eq!(jac[1], vec![-1.0, 0.0, -1.0, 0.0]);
        assert_eq!(jac[2], vec![0.0, 1.0, -1.0, 0.0]);
        assert_eq!(jac[3], vec![0.0, -1.0, -1.0, 0.0]);
    }

    #[test]
    fn indicator_violation_gives_infinity() {
        let p = registry_build("ex33").unwrap();
        // x3 very negative violates x1 - x3 <= 0.
        let v = p.eval_phi(&[0.0, 0.0, -1.0, 0.0], &[0.0; 4]).unwrap();
        assert!(v.is_infinite());
    }

    #[test]
    fn dimension_mismatch_is_input_error() {
        let p = registry_build("quadratic").unwrap();
        assert!(matches!(
            p.eval_phi(&[0.0, 0.0], &[0.0]),
            Err(Error::Input(_))
        ));
        assert!(matches!(
            p.grad_f0_and_jac_f(&[0.0]),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn ex32_closed_form_gradient_value() {
        let p = registry_build("ex32").unwrap();
        let g = p.phi_grad_x(&[0.1], &[0.0]).unwrap().unwrap();
        assert!((g[0] - 0.464158883361278).abs() < 1e-12);
        let phi = p.eval_phi(&[0.1], &[0.0]).unwrap();
        assert!((phi - 0.03481191625209584).abs() < 1e-12);
    }

    #[test]
    fn ex32_gradient_matches_finite_differences() {
        let p = registry_build("ex32").unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        while checked < 100 {
            let x: f64 = rng.gen_range(-1.0..1.0);
            let u: f64 = rng.gen_range(-1.0..1.0);
            let r = x.hypot(u);
            if !(1e-3..=1.0).contains(&r) {
                continue;
            }
            checked += 1;
            let h = 1e-7;
            let fdx = (p.eval_phi(&[x + h], &[u]).unwrap() - p.eval_phi(&[x - h], &[u]).unwrap())
                / (2.0 * h);
            let fdu = (p.eval_phi(&[x], &[u + h]).unwrap() - p.eval_phi(&[x], &[u - h]).unwrap())
                / (2.0 * h);
            let gx = p.phi_grad_x(&[x], &[u]).unwrap().unwrap()[0];
            let gu = p.phi_grad_u(&[x], &[u]).unwrap().unwrap()[0];
            assert!((gx - fdx).abs() < 1e-6, "x grad at ({x},{u}): {gx} vs {fdx}");
            assert!((gu - fdu).abs() < 1e-6, "u grad at ({x},{u}): {gu} vs {fdu}");
        }
    }

    #[test]
    fn composite_eval_matches_term_recomputation() {
        // phi = f0 + g(F(x) + u) recomputed term by term at random points.
        let p = registry_build("ex33").unwrap();
        let ProblemBody::Composite { f0, fmap, g } = &p.body else {
            panic!()
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let u: Vec<f64> = (0..4).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let z: Vec<f64> = fmap
                .eval(&x)
                .iter()
                .zip(&u)
                .map(|(a, b)| a + b)
                .collect();
            let by_hand = f0.eval(&x) + g.value(&z, FEAS_TOL);
            let by_op = p.eval_phi(&x, &u).unwrap();
            if by_hand.is_finite() {
                let scale = by_hand.abs().max(1.0);
                assert!((by_hand - by_op).abs() <= 1e-12 * scale);
            } else {
                assert!(by_op.is_infinite());
            }
        }
    }

    #[test]
    fn registry_rejects_unknown_and_bad_params() {
        assert!(matches!(registry_build("nosuch"), Err(Error::Input(_))));
        assert!(matches!(registry_build("quadratic(0)"), Err(Error::Input(_))));
        assert!(matches!(registry_build("quadratic(x)"), Err(Error::Input(_))));
    }

    #[test]
    fn quadratic_parameter_forms() {
        for id in ["quadratic", "quadratic(1)", "quadratic:1"] {
            let p = registry_build(id).unwrap();
            let v = p.eval_phi(&[0.3], &[0.1]).unwrap();
            assert!((v - (0.045 - 0.03)).abs() < 1e-15, "{id}");
        }
        let p = registry_build("quadratic(0.5)").unwrap();
        assert!((p.eval_phi(&[1.0], &[0.0]).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn problem_file_roundtrip() {
        let text = r#"{
            "name": "toy",
            "n": 1, "m": 1,
            "kind": "composite",
            "xbar": [0.0],
            "f0": [{"coeff": 0.5, "powers": [2]}],
            "F": [[{"coeff": 1.0, "powers": [1]}]],
            "g": {"type": "orthant_nonpos", "s": 1}
        }"#;
        let p = problem_from_json(text).unwrap();
        // minimize x^2/2 s.t. x + u <= 0
        assert_eq!(p.eval_phi(&[-1.0], &[0.0]).unwrap(), 0.5);
        assert!(p.eval_phi(&[1.0], &[0.0]).unwrap().is_infinite());

        let builtin = r#"{"name":"q","n":1,"m":1,"kind":"builtin","builtin":"quadratic(2)"}"#;
        let q = problem_from_json(builtin).unwrap();
        assert!((q.eval_phi(&[1.0], &[0.0]).unwrap() - 1.0).abs() < 1e-15);

        assert!(problem_from_json("{definitely not json").is_err());
    }

    #[test]
    fn fingerprint_is_stable_and_discriminating() {
        let a = registry_build("ex32").unwrap();
        let b = registry_build("ex32").unwrap();
        let c = registry_build("ex33").unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_ne!(a.fingerprint(), c.fingerprint());
    }
}
