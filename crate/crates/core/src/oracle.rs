//! Perturbative fidelity and gradient in powers of the anharmonicity `mu`.
//!
//! With `H_S = H_0 + mu H^(1) + mu^2 H^(2) + ...` and the idealized modes
//! `chi_n`, the matrix elements
//! `alpha^(j)_nm = <chi_n|H^(j)|chi_m>` and
//! `beta^(j)_nm = <chi_n|grad H^(j)|chi_m>` give
//!
//! ```text
//! F    ~ 1 + mu^2 F2 + mu^3 F3
//! F2   = -sum |A1_n|^2
//! F3   ~ -2 sum Re(A1_n* A2_n)
//! dF   ~ mu dF1 + mu^2 dF2
//! dF1  = -2 sum Re(A1_n B0_n*)
//! dF2  ~ -2 sum Re(B1_n* A1_n + B0_n* A2_n)
//! ```
//!
//! where `Aj_n` and `Bj_n` are time integrals of `alpha^(j)_n0` and
//! `beta^(j)_n0`. Terms with triple time integrals are dropped. Only the
//! transport cases have an explicit series, so only they are supported.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{EstaError, Result};
use crate::models::{CaseId, CaseModel, GaussianTrap};
use crate::modes::{HermiteTable, TransportModes};
use crate::poly::Polynomial;
use crate::quadrature::AdaptiveGl;
use crate::schemes::{knot_basis, TRANSPORT_DIM};

type C = Complex64;

/// Highest order of `H^(j)` with an `alpha` element.
pub const MAX_ALPHA_ORDER: usize = 2;
/// Highest order of `grad H^(j)` with a `beta` element.
pub const MAX_BETA_ORDER: usize = 1;

/// Matrix elements of the `mu`-expansion terms of a transport case.
pub struct Perturbation {
    model: CaseModel,
    modes: TransportModes,
    n_modes: usize,
    basis: Vec<Polynomial>,
    table: HermiteTable,
    x_r: f64,
}

impl Perturbation {
    /// Matrix elements are taken between modes `0..=n_modes`.
    pub fn new(model: &CaseModel, t_f: f64, n_modes: usize) -> Result<Self> {
        if !model.is_transport() {
            return Err(EstaError::domain("the perturbative series is only defined for transport cases"));
        }
        if n_modes == 0 {
            return Err(EstaError::domain("at least one excited mode is required"));
        }
        let modes = TransportModes::for_case(model, t_f)?;
        let x_r = if model.case == CaseId::TwoIon { model.r_eq() } else { 0.0 };
        // the expansion terms are polynomials of degree <= 6, which the
        // 64-node rule integrates exactly against phi_n phi_m for small n
        let table = modes.table(n_modes, 0);
        Ok(Perturbation { model: *model, basis: knot_basis(TRANSPORT_DIM, t_f)?, modes, n_modes, table, x_r })
    }

    pub fn t_f(&self) -> f64 {
        self.modes.trajectory.t_f
    }

    /// Expansion parameter `mu` of the model.
    pub fn mu(&self) -> f64 {
        self.model.trap().mu
    }

    pub fn transport_modes(&self) -> &TransportModes {
        &self.modes
    }

    fn trap(&self) -> GaussianTrap {
        self.model.trap()
    }

    fn offsets(&self) -> Vec<f64> {
        match self.model.case {
            CaseId::TwoIon => vec![self.x_r, -self.x_r],
            _ => vec![0.0],
        }
    }

    fn check_mode(&self, n: usize) -> Result<()> {
        if n > self.n_modes {
            return Err(EstaError::domain(format!("mode index must be in 0..={}, got {n}", self.n_modes)));
        }
        Ok(())
    }

    /// `H^(j)` summed over the ions, trap at `q0`.
    fn term(&self, j: usize, x: f64, q0: f64) -> f64 {
        let trap = self.trap();
        self.offsets().iter().map(|s| trap.term(j, x + s - q0).unwrap_or(f64::NAN)).sum()
    }

    /// `d H^(j) / d q0`.
    fn term_q0(&self, j: usize, x: f64, q0: f64) -> f64 {
        let trap = self.trap();
        self.offsets().iter().map(|s| -trap.term_slope(j, x + s - q0).unwrap_or(f64::NAN)).sum()
    }

    /// `alpha^(j)_nm(t)` for `j` in `1..=2`.
    pub fn alpha(&self, j: usize, n: usize, m: usize, t: f64) -> Result<C> {
        if j == 0 || j > MAX_ALPHA_ORDER {
            return Err(EstaError::UnsupportedOrder(j));
        }
        self.check_mode(n)?;
        self.check_mode(m)?;
        let tr = &self.modes.trajectory;
        let q0 = tr.q0(t);
        let v = self.table.element(n, m, tr.qc(t), |x| self.term(j, x, q0)).0;
        Ok(self.modes.phase_factor(n, m, t) * v)
    }

    /// `beta^(j)_nm(t)`, one entry per control, for `j` in `0..=1`.
    pub fn beta(&self, j: usize, n: usize, m: usize, t: f64) -> Result<Vec<C>> {
        if j > MAX_BETA_ORDER {
            return Err(EstaError::UnsupportedOrder(j));
        }
        self.check_mode(n)?;
        self.check_mode(m)?;
        let tr = &self.modes.trajectory;
        let q0 = tr.q0(t);
        let v = self.modes.phase_factor(n, m, t) * self.table.element(n, m, tr.qc(t), |x| self.term_q0(j, x, q0)).0;
        Ok(self.basis.iter().map(|b| v * b.eval(t)).collect())
    }

    /// Time integrals `A1_n`, `A2_n`, `B0_n`, `B1_n` for `n = 1..=N` and the
    /// expansion coefficients built from them.
    pub fn terms(&self, quad: &AdaptiveGl) -> Result<PerturbativeTerms> {
        let (n, d) = (self.n_modes, TRANSPORT_DIM);
        let width = 2 * n + 2 * n * d;
        let flat = quad
            .integrate(0.0, self.t_f(), width, |t| {
                let mut out = Vec::with_capacity(width);
                for j in 1..=2 {
                    out.extend((1..=n).map(|k| self.alpha(j, k, 0, t).unwrap()));
                }
                for j in 0..=1 {
                    for k in 1..=n {
                        out.extend(self.beta(j, k, 0, t).unwrap());
                    }
                }
                out
            })
            .map_err(|e| e.context("integrating perturbative matrix elements"))?;
        let a1 = flat[..n].to_vec();
        let a2 = flat[n..2 * n].to_vec();
        let split = |s: &[C]| s.chunks(d).map(|c| c.to_vec()).collect::<Vec<_>>();
        let b0 = split(&flat[2 * n..2 * n + n * d]);
        let b1 = split(&flat[2 * n + n * d..]);
        Ok(PerturbativeTerms::from_integrals(self.mu(), a1, a2, b0, b1))
    }
}

/// Integrated matrix elements and the resulting series coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbativeTerms {
    pub mu: f64,
    pub a1: Vec<C>,
    pub a2: Vec<C>,
    pub b0: Vec<Vec<C>>,
    pub b1: Vec<Vec<C>>,
    /// `F^(0..=3)`, the last one without triple integrals.
    pub f: [f64; 4],
    /// Gradient coefficients of orders `0..=2`.
    pub grad: [Vec<f64>; 3],
}

impl PerturbativeTerms {
    pub fn from_integrals(mu: f64, a1: Vec<C>, a2: Vec<C>, b0: Vec<Vec<C>>, b1: Vec<Vec<C>>) -> Self {
        let d = b0.first().map_or(0, |v| v.len());
        let f2 = -a1.iter().map(|a| a.norm_sqr()).sum::<f64>();
        let f3 = -2.0 * a1.iter().zip(&a2).map(|(x, y)| (x.conj() * y).re).sum::<f64>();
        let mut g1 = vec![0.0; d];
        let mut g2 = vec![0.0; d];
        for n in 0..a1.len() {
            for k in 0..d {
                g1[k] -= 2.0 * (a1[n] * b0[n][k].conj()).re;
                g2[k] -= 2.0 * (b1[n][k].conj() * a1[n] + b0[n][k].conj() * a2[n]).re;
            }
        }
        PerturbativeTerms { mu, a1, a2, b0, b1, f: [1.0, 0.0, f2, f3], grad: [vec![0.0; d], g1, g2] }
    }

    pub fn f2(&self) -> f64 {
        self.f[2]
    }

    pub fn f3_approx(&self) -> f64 {
        self.f[3]
    }

    pub fn grad_f1(&self) -> &[f64] {
        &self.grad[1]
    }

    pub fn grad_f2_approx(&self) -> &[f64] {
        &self.grad[2]
    }

    /// `1 + mu^2 F2`.
    pub fn fidelity_second_order(&self) -> f64 {
        1.0 + self.mu * self.mu * self.f[2]
    }

    /// `1 + mu^2 F2 + mu^3 F3`.
    pub fn fidelity_third_order(&self) -> f64 {
        self.fidelity_second_order() + self.mu.powi(3) * self.f[3]
    }

    /// `mu dF1 + mu^2 dF2`.
    pub fn gradient(&self) -> Vec<f64> {
        let mu = self.mu;
        self.grad[1].iter().zip(&self.grad[2]).map(|(a, b)| mu * a + mu * mu * b).collect()
    }

    /// Norm of the kept `mu^2` gradient term. The dropped triple-integral
    /// terms are of the same order, so this sizes the truncation.
    pub fn neglected_proxy(&self) -> f64 {
        self.mu * self.mu * self.grad[2].iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// Oracle terms of a transport case with the default time quadrature.
pub fn perturbative_terms(model: &CaseModel, t_f: f64, n_modes: usize, quad: &AdaptiveGl) -> Result<PerturbativeTerms> {
    Perturbation::new(model, t_f, n_modes)?.terms(quad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::CaseModel;

    fn single() -> CaseModel {
        CaseModel::single_transport(1e5, 1562.0)
    }

    #[test]
    fn hermitian_pairs_and_real_diagonal() {
        let p = Perturbation::new(&single(), 20.0, 3).unwrap();
        for &t in &[0.0, 3.1, 9.7, 17.2] {
            for j in 1..=2 {
                for n in 0..=3 {
                    for m in 0..=3 {
                        let a = p.alpha(j, n, m, t).unwrap();
                        let b = p.alpha(j, m, n, t).unwrap();
                        assert!((a - b.conj()).norm() <= 1e-12 * a.norm().max(1.0));
                    }
                    assert_eq!(p.alpha(j, n, n, t).unwrap().im, 0.0);
                }
            }
            for (x, y) in p.beta(0, 2, 1, t).unwrap().iter().zip(p.beta(0, 1, 2, t).unwrap()) {
                assert!((x - y.conj()).norm() <= 1e-12 * x.norm().max(1.0));
            }
            assert!(p.beta(0, 0, 0, t).unwrap().iter().all(|b| b.im == 0.0));
        }
    }

    #[test]
    fn unsupported_orders() {
        let p = Perturbation::new(&single(), 20.0, 1).unwrap();
        assert!(matches!(p.alpha(3, 1, 0, 1.0), Err(EstaError::UnsupportedOrder(3))));
        assert!(matches!(p.alpha(0, 1, 0, 1.0), Err(EstaError::UnsupportedOrder(0))));
        assert!(matches!(p.beta(2, 1, 0, 1.0), Err(EstaError::UnsupportedOrder(2))));
        assert!(p.alpha(1, 2, 0, 1.0).is_err());
    }

    #[test]
    fn two_level_is_rejected() {
        let m = CaseModel::two_level(1.0);
        assert!(Perturbation::new(&m, 30.0, 1).is_err());
    }

    #[test]
    fn coefficient_algebra() {
        let a1 = vec![C::new(0.3, -0.2)];
        let b0 = vec![vec![C::new(1.0, 0.5), C::new(-0.4, 0.0)]];
        let zero = vec![vec![C::new(0.0, 0.0); 2]];
        let t = PerturbativeTerms::from_integrals(1e-3, a1.clone(), vec![C::new(0.0, 0.0)], b0.clone(), zero);
        assert_eq!(t.f[0], 1.0);
        assert_eq!(t.f[1], 0.0);
        assert!((t.f2() + 0.13).abs() < 1e-15);
        assert_eq!(t.f3_approx(), 0.0);
        assert!(t.grad[0].iter().all(|g| *g == 0.0));
        assert!((t.grad_f1()[0] + 2.0 * (a1[0] * b0[0][0].conj()).re).abs() < 1e-15);
        let flipped = PerturbativeTerms::from_integrals(1e-3, a1.clone(), vec![C::new(0.1, 0.2)], b0.clone(), vec![vec![C::new(0.0, 0.0); 2]]);
        let back = PerturbativeTerms::from_integrals(1e-3, a1, vec![C::new(-0.1, -0.2)], b0, vec![vec![C::new(0.0, 0.0); 2]]);
        assert_eq!(flipped.f3_approx(), -back.f3_approx());
    }

    proptest::proptest! {
        #[test]
        fn symmetry_at_random_samples(n in 0usize..4, m in 0usize..4, t in 0.0f64..20.0, j in 1usize..3) {
            let p = Perturbation::new(&single(), 20.0, 3).unwrap();
            let a = p.alpha(j, n, m, t).unwrap();
            let b = p.alpha(j, m, n, t).unwrap();
            proptest::prop_assert!((a - b.conj()).norm() <= 1e-12 * a.norm().max(1.0));
            for (x, y) in p.beta(1, n, m, t).unwrap().iter().zip(p.beta(1, m, n, t).unwrap()) {
                proptest::prop_assert!((x - y.conj()).norm() <= 1e-12 * x.norm().max(1.0));
            }
        }
    }
}
