//! Gauss rules and the adaptive composite Gauss–Legendre integrator used for
//! all time integrals.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{EstaError, Result};

/// Nodes and weights of a quadrature rule.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Gauss–Legendre rule on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        // recompute derivative at converged z
        let (mut p0, mut p1) = (1.0, 0.0);
        for j in 0..n {
            let p2 = p1;
            p1 = p0;
            p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
        }
        if z * z != 1.0 {
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    Rule { nodes, weights }
}

/// Gauss–Hermite rule for the weight `exp(-x^2)`.
///
/// Nodes from the eigenvalues of the Jacobi matrix, polished by Newton
/// steps on the orthonormal Hermite recurrence, which also gives the
/// weights. Usable up to about 600 nodes before the recurrence overflows.
pub fn gauss_hermite(n: usize) -> Rule {
    assert!(n >= 1);
    let pim4 = PI.powf(-0.25);
    let jacobi = nalgebra::DMatrix::<f64>::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
    nodes.sort_by(f64::total_cmp);
    let mut weights = vec![0.0; n];
    for (z, w) in nodes.iter_mut().zip(weights.iter_mut()) {
        for _ in 0..3 {
            let (p, dp) = hermite_orthonormal_and_derivative(n, *z, pim4);
            if dp == 0.0 || !dp.is_finite() {
                break;
            }
            *z -= p / dp;
        }
        let (_, dp) = hermite_orthonormal_and_derivative(n, *z, pim4);
        *w = 2.0 / (dp * dp);
    }
    // restore exact symmetry
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        let w = 0.5 * (weights[i] + weights[j]);
        nodes[i] = -x;
        nodes[j] = x;
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Rule { nodes, weights }
}

fn hermite_orthonormal_and_derivative(n: usize, z: f64, pim4: f64) -> (f64, f64) {
    let mut p1 = pim4;
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
    }
    (p1, (2.0 * n as f64).sqrt() * p2)
}

/// Values `h_k(u)` of the normalized Hermite polynomials, so that the
/// oscillator eigenfunctions are `psi_k(u) = h_k(u) exp(-u^2/2)`.
pub fn normalized_hermite(n_max: usize, u: f64, out: &mut [f64]) {
    debug_assert!(out.len() > n_max);
    out[0] = PI.powf(-0.25);
    if n_max >= 1 {
        out[1] = 2f64.sqrt() * u * out[0];
    }
    for k in 1..n_max {
        let kf = k as f64;
        out[k + 1] = (2.0 / (kf + 1.0)).sqrt() * u * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
    }
}

/// Settings of the adaptive composite Gauss–Legendre integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptiveGl {
    /// Nodes per panel.
    pub order: usize,
    pub initial_panels: usize,
    pub max_panels: usize,
    /// Relative tolerance between successive panel doublings.
    pub rel_tol: f64,
    /// Absolute floor for the convergence test.
    pub abs_tol: f64,
}

impl Default for AdaptiveGl {
    fn default() -> Self {
        AdaptiveGl { order: 8, initial_panels: 16, max_panels: 1 << 15, rel_tol: 1e-8, abs_tol: 1e-14 }
    }
}

impl AdaptiveGl {
    /// Integrates a complex vector-valued function over `[a, b]`, doubling the
    /// panel count until two successive estimates agree.
    pub fn integrate<F>(&self, a: f64, b: f64, dim: usize, mut f: F) -> Result<Vec<Complex64>>
    where
        F: FnMut(f64) -> Vec<Complex64>,
    {
        let rule = gauss_legendre(self.order);
        let mut panels = self.initial_panels.max(1);
        let mut prev = composite(&rule, a, b, panels, dim, &mut f);
        loop {
            panels *= 2;
            if panels > self.max_panels {
                return Err(EstaError::accuracy(format!(
                    "time quadrature did not converge with {} panels",
                    self.max_panels
                )));
            }
            let next = composite(&rule, a, b, panels, dim, &mut f);
            let scale = next.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let diff = next.iter().zip(&prev).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            if diff <= self.rel_tol * scale + self.abs_tol {
                return Ok(next);
            }
            prev = next;
        }
    }

    pub fn integrate_real<F>(&self, a: f64, b: f64, mut f: F) -> Result<f64>
    where
        F: FnMut(f64) -> f64,
    {
        let v = self.integrate(a, b, 1, |t| vec![Complex64::new(f(t), 0.0)])?;
        Ok(v[0].re)
    }
}

fn composite<F>(rule: &Rule, a: f64, b: f64, panels: usize, dim: usize, f: &mut F) -> Vec<Complex64>
where
    F: FnMut(f64) -> Vec<Complex64>,
{
    let mut acc = vec![Complex64::new(0.0, 0.0); dim];
    let width = (b - a) / panels as f64;
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let half = 0.5 * width;
        let mid = lo + half;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            let vals = f(mid + half * x);
            debug_assert_eq!(vals.len(), dim);
            for (acc_k, v) in acc.iter_mut().zip(vals) {
                *acc_k += v * (w * half);
            }
        }
    }
    acc
}

/// Fixed Gauss–Legendre integral of a real function over `[a, b]`.
pub fn gl_fixed<F: Fn(f64) -> f64>(rule: &Rule, a: f64, b: f64, f: F) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * f(mid + half * x)).sum::<f64>() * half
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let r = gauss_legendre(6);
        // degree 11 is the highest exact degree
        let v = gl_fixed(&r, -1.0, 1.0, |x| x.powi(10));
        assert!((v - 2.0 / 11.0).abs() < 1e-14);
        assert!((r.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn hermite_moments() {
        for n in [8, 64, 128, 200] {
            let r = gauss_hermite(n);
            let m0: f64 = r.weights.iter().sum();
            let m2: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x * x).sum();
            assert!((m0 - PI.sqrt()).abs() < 1e-12, "n={n}: {m0}");
            assert!((m2 - PI.sqrt() / 2.0).abs() < 1e-12, "n={n}: {m2}");
        }
    }

    #[test]
    fn normalized_hermite_is_orthonormal() {
        let r = gauss_hermite(40);
        let mut h = vec![0.0; 8];
        let mut gram = [[0.0; 8]; 8];
        for (x, w) in r.nodes.iter().zip(&r.weights) {
            normalized_hermite(7, *x, &mut h);
            for i in 0..8 {
                for j in 0..8 {
                    gram[i][j] += w * h[i] * h[j];
                }
            }
        }
        for (i, row) in gram.iter().enumerate() {
            for (j, g) in row.iter().enumerate() {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((g - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn adaptive_handles_oscillatory_integrand() {
        let q = AdaptiveGl::default();
        // int_0^{10} e^{i 20 t} dt = (e^{200 i} - 1) / (20 i)
        let v = q.integrate(0.0, 10.0, 1, |t| vec![Complex64::new(0.0, 20.0 * t).exp()]).unwrap();
        let exact = (Complex64::new(0.0, 200.0).exp() - 1.0) / Complex64::new(0.0, 20.0);
        assert!((v[0] - exact).norm() < 1e-10);
    }
}
