//! Real polynomials in a scaled variable `s = t / scale`.
//!
//! Control polynomials live on `[0, t_f]`; storing their coefficients in the
//! normalized variable keeps the Vandermonde systems well conditioned for any
//! `t_f`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{EstaError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    /// Coefficients of `s^k`, lowest order first.
    pub coeffs: Vec<f64>,
    /// Time scale: the polynomial is evaluated at `s = t / scale`.
    pub scale: f64,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>, scale: f64) -> Self {
        Polynomial { coeffs, scale }
    }

    pub fn zero(scale: f64) -> Self {
        Polynomial { coeffs: vec![0.0], scale }
    }

    /// Nominal degree (length of the coefficient list minus one).
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let s = t / self.scale;
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * s + c)
    }

    /// `order`-th derivative with respect to `t`.
    pub fn derivative(&self, t: f64, order: usize) -> f64 {
        if order == 0 {
            return self.eval(t);
        }
        let s = t / self.scale;
        let mut acc = 0.0;
        for k in (order..self.coeffs.len()).rev() {
            let falling: f64 = ((k - order + 1)..=k).map(|v| v as f64).product();
            acc = acc * s + self.coeffs[k] * falling;
        }
        acc / self.scale.powi(order as i32)
    }

    /// Returns the derivative polynomial.
    pub fn differentiate(&self) -> Polynomial {
        if self.coeffs.len() <= 1 {
            return Polynomial::zero(self.scale);
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| c * k as f64 / self.scale)
            .collect();
        Polynomial { coeffs, scale: self.scale }
    }

    /// Exact integral over `[t0, t1]`.
    pub fn integral(&self, t0: f64, t1: f64) -> f64 {
        let anti = |t: f64| {
            let s = t / self.scale;
            let mut acc = 0.0;
            for (k, &c) in self.coeffs.iter().enumerate().rev() {
                acc = acc * s + c / (k as f64 + 1.0);
            }
            acc * s * self.scale
        };
        anti(t1) - anti(t0)
    }

    pub fn scaled(&self, factor: f64) -> Polynomial {
        Polynomial {
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
            scale: self.scale,
        }
    }

    /// Pointwise linear combination of polynomials sharing a scale.
    pub fn linear_combination(terms: &[(f64, &Polynomial)], scale: f64) -> Polynomial {
        let len = terms.iter().map(|(_, p)| p.coeffs.len()).max().unwrap_or(1);
        let mut coeffs = vec![0.0; len];
        for (w, p) in terms {
            debug_assert!((p.scale - scale).abs() <= 1e-12 * scale.abs());
            for (c, pc) in coeffs.iter_mut().zip(&p.coeffs) {
                *c += w * pc;
            }
        }
        Polynomial { coeffs, scale }
    }
}

/// One linear condition `p^(order)(s) = value` in the normalized variable.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Constraint {
    pub s: f64,
    pub order: usize,
    pub value: f64,
}

/// Solves for the unique polynomial of degree `constraints.len() - 1`
/// satisfying the given derivative conditions (in `s`).
pub(crate) fn solve_constraints(constraints: &[Constraint], scale: f64) -> Result<Polynomial> {
    let n = constraints.len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for (row, c) in constraints.iter().enumerate() {
        for k in c.order..n {
            let falling: f64 = ((k - c.order + 1)..=k).map(|v| v as f64).product();
            a[(row, k)] = falling * c.s.powi((k - c.order) as i32);
        }
        b[row] = c.value;
    }
    let coeffs = a
        .lu()
        .solve(&b)
        .ok_or_else(|| EstaError::Internal("singular interpolation system".into()))?;
    Ok(Polynomial { coeffs: coeffs.iter().copied().collect(), scale })
}
