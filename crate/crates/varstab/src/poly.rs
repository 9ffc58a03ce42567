//! Multivariate polynomials with exact differentiation.
//!
//! The composite problem format restricts the smooth data to polynomials so
//! that gradients and Hessians are exact, keeping solver refinement and
//! second-order probes free of finite-difference noise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One monomial `coeff * prod_j x_j^powers[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: f64,
    pub powers: Vec<u32>,
}

/// A polynomial in `num_vars` variables, stored as a canonical term list:
/// terms are sorted by exponent pattern, duplicates merged, zeros dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    num_vars: usize,
    terms: Vec<Term>,
}

impl Polynomial {
    pub fn new(num_vars: usize, terms: Vec<(f64, Vec<u32>)>) -> Result<Self> {
        for (_, powers) in &terms {
            if powers.len() != num_vars {
                return Err(Error::Input(format!(
                    "term has {} exponents, expected {num_vars}",
                    powers.len()
                )));
            }
        }
        let mut p = Polynomial {
            num_vars,
            terms: terms
                .into_iter()
                .map(|(coeff, powers)| Term { coeff, powers })
                .collect(),
        };
        p.canonicalize();
        Ok(p)
    }

    pub fn zero(num_vars: usize) -> Self {
        Polynomial { num_vars, terms: Vec::new() }
    }

    pub fn constant(num_vars: usize, c: f64) -> Self {
        Polynomial::new(num_vars, vec![(c, vec![0; num_vars])]).expect("constant term")
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    fn canonicalize(&mut self) {
        self.terms.sort_by(|a, b| a.powers.cmp(&b.powers));
        let mut merged: Vec<Term> = Vec::with_capacity(self.terms.len());
        for t in self.terms.drain(..) {
            match merged.last_mut() {
                Some(last) if last.powers == t.powers => last.coeff += t.coeff,
                _ => merged.push(t),
            }
        }
        merged.retain(|t| t.coeff != 0.0);
        self.terms = merged;
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.num_vars);
        self.terms
            .iter()
            .map(|t| {
                let mut v = t.coeff;
                for (xi, &p) in x.iter().zip(&t.powers) {
                    if p > 0 {
                        v *= xi.powi(p as i32);
                    }
                }
                v
            })
            .sum()
    }

    /// Exact partial derivative with respect to variable `j`.
    pub fn partial(&self, j: usize) -> Polynomial {
        let terms = self
            .terms
            .iter()
            .filter(|t| t.powers[j] > 0)
            .map(|t| {
                let mut powers = t.powers.clone();
                let p = powers[j];
                powers[j] = p - 1;
                Term { coeff: t.coeff * f64::from(p), powers }
            })
            .collect();
        let mut out = Polynomial { num_vars: self.num_vars, terms };
        out.canonicalize();
        out
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (0..self.num_vars).map(|j| self.partial(j).eval(x)).collect()
    }

    pub fn hessian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let n = self.num_vars;
        let firsts: Vec<Polynomial> = (0..n).map(|j| self.partial(j)).collect();
        let mut h = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i..n {
                let v = firsts[i].partial(j).eval(x);
                h[i][j] = v;
                h[j][i] = v;
            }
        }
        h
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

/// A smooth map `F: R^n -> R^m` whose components are polynomials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothMap {
    domain_dim: usize,
    components: Vec<Polynomial>,
}

impl SmoothMap {
    pub fn new(domain_dim: usize, components: Vec<Polynomial>) -> Result<Self> {
        for c in &components {
            if c.num_vars() != domain_dim {
                return Err(Error::Input(format!(
                    "map component has {} variables, expected {domain_dim}",
                    c.num_vars()
                )));
            }
        }
        Ok(SmoothMap { domain_dim, components })
    }

    pub fn domain_dim(&self) -> usize {
        self.domain_dim
    }

    pub fn range_dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Polynomial] {
        &self.components
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.components.iter().map(|c| c.eval(x)).collect()
    }

    /// Jacobian as an `m x n` row-major matrix.
    pub fn jacobian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.components.iter().map(|c| c.gradient(x)).collect()
    }

    pub fn component_hessian(&self, i: usize, x: &[f64]) -> Vec<Vec<f64>> {
        self.components[i].hessian(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central_diff(f: impl Fn(f64) -> f64, a: f64, h: f64) -> f64 {
        (f(a + h) - f(a - h)) / (2.0 * h)
    }

    #[test]
    fn duplicate_terms_merge() {
        let p = Polynomial::new(2, vec![(1.0, vec![1, 0]), (2.0, vec![1, 0]), (0.5, vec![0, 2])])
            .unwrap();
        assert_eq!(p.terms().len(), 2);
        assert!((p.eval(&[1.0, 2.0]) - (3.0 + 2.0)).abs() < 1e-12);
    }

    #[test]
    fn cancelled_terms_drop() {
        let p = Polynomial::new(1, vec![(1.0, vec![2]), (-1.0, vec![2])]).unwrap();
        assert!(p.is_zero());
        assert_eq!(p.gradient(&[3.0]), vec![0.0]);
    }

    #[test]
    fn wrong_exponent_length_rejected() {
        assert!(Polynomial::new(2, vec![(1.0, vec![1])]).is_err());
    }

    #[test]
    fn gradient_matches_central_differences() {
        // p(x, y) = x^3 y + 2 x y^2 - y
        let p = Polynomial::new(
            2,
            vec![(1.0, vec![3, 1]), (2.0, vec![1, 2]), (-1.0, vec![0, 1])],
        )
        .unwrap();
        for &(x, y) in &[(0.3, -1.2), (1.5, 0.7), (-0.9, 0.4)] {
            let g = p.gradient(&[x, y]);
            let gx = central_diff(|t| p.eval(&[t, y]), x, 1e-5);
            let gy = central_diff(|t| p.eval(&[x, t]), y, 1e-5);
            assert!((g[0] - gx).abs() < 1e-6, "{} vs {gx}", g[0]);
            assert!((g[1] - gy).abs() < 1e-6);
        }
    }

    #[test]
    fn hessian_is_symmetric_and_exact() {
        let p = Polynomial::new(2, vec![(1.0, vec![2, 1]), (0.5, vec![0, 3])]).unwrap();
        let h = p.hessian(&[2.0, -1.0]);
        // d2/dx2 = 2y = -2, d2/dxdy = 2x = 4, d2/dy2 = 3y = -3
        assert!((h[0][0] + 2.0).abs() < 1e-12);
        assert!((h[0][1] - 4.0).abs() < 1e-12);
        assert!((h[1][0] - 4.0).abs() < 1e-12);
        assert!((h[1][1] + 3.0).abs() < 1e-12);
    }

    #[test]
    fn smooth_map_dimension_check() {
        let p1 = Polynomial::new(2, vec![(1.0, vec![1, 0])]).unwrap();
        let bad = Polynomial::new(3, vec![(1.0, vec![1, 0, 0])]).unwrap();
        assert!(SmoothMap::new(2, vec![p1.clone()]).is_ok());
        assert!(SmoothMap::new(2, vec![p1, bad]).is_err());
    }
}
