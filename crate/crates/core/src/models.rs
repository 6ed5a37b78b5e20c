//! Physical models of the three case studies: the system Hamiltonian, its
//! idealized (STA-tractable) limit, the expansion terms in `mu`, and the
//! gradient with respect to the control vector.
//!
//! Natural units throughout: `hbar = m = w = 1`, lengths in units of the
//! oscillator length, energies in units of `hbar w`.

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{EstaError, Result};
use crate::schemes::{knot_basis, Scheme, TransportScheme, TwoLevelScheme};

pub const HBAR: f64 = 1.0;

/// Which case study a model describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseId {
    TwoLevel,
    SingleTransport,
    TwoIon,
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaseId::TwoLevel => "two_level",
            CaseId::SingleTransport => "single_transport",
            CaseId::TwoIon => "two_ion",
        })
    }
}

impl FromStr for CaseId {
    type Err = EstaError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two_level" => Ok(CaseId::TwoLevel),
            "single_transport" => Ok(CaseId::SingleTransport),
            "two_ion" => Ok(CaseId::TwoIon),
            other => Err(EstaError::config("case", format!("unknown case `{other}`"))),
        }
    }
}

/// Which Hamiltonian to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianKind {
    System,
    Idealized,
}

/// Physical constants of one case study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseModel {
    pub case: CaseId,
    /// Expansion parameter of the system Hamiltonian. Transport: `1/a`.
    /// Two-level: strength of the counter-rotating terms (1 is the physical
    /// Hamiltonian, 0 its rotating-wave limit).
    pub mu: f64,
    /// Transport distance.
    pub distance: f64,
    /// Carrier frequency of the two-level drive.
    pub omega_carrier: f64,
    /// Dimensionless Coulomb constant.
    pub coulomb: f64,
    /// Total mass of the ion pair.
    pub total_mass: f64,
}

impl CaseModel {
    pub fn two_level(omega_carrier: f64) -> Self {
        CaseModel {
            case: CaseId::TwoLevel,
            mu: 1.0,
            distance: 0.0,
            omega_carrier,
            coulomb: 0.0,
            total_mass: 1.0,
        }
    }

    pub fn single_transport(a: f64, distance: f64) -> Self {
        CaseModel {
            case: CaseId::SingleTransport,
            mu: 1.0 / a,
            distance,
            omega_carrier: 0.0,
            coulomb: 0.0,
            total_mass: 1.0,
        }
    }

    pub fn two_ion(a: f64, distance: f64, coulomb: f64) -> Self {
        CaseModel {
            case: CaseId::TwoIon,
            mu: 1.0 / a,
            distance,
            omega_carrier: 0.0,
            coulomb,
            total_mass: 2.0,
        }
    }

    /// Reduced-scale two-ion model: `a = 1e5`, `r_eq = 20`, `d = 100`.
    pub fn two_ion_desk() -> Self {
        CaseModel::two_ion(1e5, 100.0, 4.0 * 2.0 * 20f64.powi(3))
    }

    /// Same model with a different expansion parameter.
    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    /// Trap depth `a = U_0 / (hbar w)`; infinite when `mu = 0`.
    pub fn a(&self) -> f64 {
        1.0 / self.mu
    }

    pub fn is_transport(&self) -> bool {
        self.case != CaseId::TwoLevel
    }

    /// Mass entering the trap potential.
    pub fn trap_mass(&self) -> f64 {
        match self.case {
            CaseId::TwoIon => self.total_mass,
            _ => 1.0,
        }
    }

    /// Mass of the transported oscillator (centre of mass for two ions).
    pub fn com_mass(&self) -> f64 {
        self.trap_mass()
    }

    /// Frequency of the transported oscillator: `w` for a single particle,
    /// `sqrt(2) w` for the centre of mass of two ions.
    pub fn com_frequency(&self) -> f64 {
        match self.case {
            CaseId::TwoIon => 2f64.sqrt(),
            _ => 1.0,
        }
    }

    pub fn trap(&self) -> GaussianTrap {
        GaussianTrap { mu: self.mu, mass: self.trap_mass() }
    }

    /// Stationary ion separation parameter `x_r` of the idealized relative
    /// potential.
    pub fn r_eq(&self) -> f64 {
        equilibrium_distance(self)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(EstaError::config(key, format!("must be positive and finite, got {v}")))
            }
        };
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(EstaError::config("a", format!("must be positive, got a = {}", self.a())));
        }
        match self.case {
            CaseId::TwoLevel => positive("omega_carrier", self.omega_carrier),
            CaseId::SingleTransport => positive("d", self.distance),
            CaseId::TwoIon => {
                positive("d", self.distance)?;
                positive("coulomb", self.coulomb)?;
                positive("total_mass", self.total_mass)
            }
        }
    }
}

/// `(1 - e^{-z}) / z`, continuous at zero.
fn one_minus_exp_over(z: f64) -> f64 {
    if z == 0.0 {
        1.0
    } else {
        -(-z).exp_m1() / z
    }
}

/// `(e^{-z} - 1 + z) / z^2`, continuous at zero.
fn exp_remainder2(z: f64) -> f64 {
    if z.abs() < 1e-2 {
        // 1/2 - z/6 + z^2/24 - z^3/120 + z^4/720
        0.5 + z * (-1.0 / 6.0 + z * (1.0 / 24.0 + z * (-1.0 / 120.0 + z / 720.0)))
    } else {
        ((-z).exp_m1() + z) / (z * z)
    }
}

/// Gaussian trap `V_S(y) = U_0 [1 - exp(-m w^2 y^2 / (2 U_0))]` with
/// `U_0 = 1/mu`, and its harmonic limit `V_0(y) = m w^2 y^2 / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianTrap {
    pub mu: f64,
    pub mass: f64,
}

impl GaussianTrap {
    /// Harmonic energy `xi = m y^2 / 2`.
    #[inline]
    pub fn xi(&self, y: f64) -> f64 {
        0.5 * self.mass * y * y
    }

    #[inline]
    pub fn system(&self, y: f64) -> f64 {
        let xi = self.xi(y);
        xi * one_minus_exp_over(self.mu * xi)
    }

    #[inline]
    pub fn idealized(&self, y: f64) -> f64 {
        self.xi(y)
    }

    #[inline]
    pub fn potential(&self, kind: HamiltonianKind, y: f64) -> f64 {
        match kind {
            HamiltonianKind::System => self.system(y),
            HamiltonianKind::Idealized => self.idealized(y),
        }
    }

    /// `V_S - V_0` without cancellation.
    #[inline]
    pub fn gap(&self, y: f64) -> f64 {
        let xi = self.xi(y);
        let z = self.mu * xi;
        -xi * z * exp_remainder2(z)
    }

    /// `dV_S/dy`.
    #[inline]
    pub fn system_slope(&self, y: f64) -> f64 {
        self.mass * y * (-self.mu * self.xi(y)).exp()
    }

    #[inline]
    pub fn slope(&self, kind: HamiltonianKind, y: f64) -> f64 {
        match kind {
            HamiltonianKind::System => self.system_slope(y),
            HamiltonianKind::Idealized => self.mass * y,
        }
    }

    /// Expansion term `H^(n)`: `xi`, `-xi^2/2`, `xi^3/6`.
    pub fn term(&self, n: usize, y: f64) -> Result<f64> {
        let xi = self.xi(y);
        match n {
            0 => Ok(xi),
            1 => Ok(-0.5 * xi * xi),
            2 => Ok(xi * xi * xi / 6.0),
            _ => Err(EstaError::UnsupportedOrder(n)),
        }
    }

    /// `d H^(n) / dy`.
    pub fn term_slope(&self, n: usize, y: f64) -> Result<f64> {
        let xi = self.xi(y);
        let dxi = self.mass * y;
        match n {
            0 => Ok(dxi),
            1 => Ok(-xi * dxi),
            2 => Ok(0.5 * xi * xi * dxi),
            _ => Err(EstaError::UnsupportedOrder(n)),
        }
    }
}

/// Single-particle Gaussian potential with trap depth `a` (mass 1).
pub fn gaussian_potential(x: f64, a: f64) -> f64 {
    GaussianTrap { mu: 1.0 / a, mass: 1.0 }.system(x)
}

/// `n`-th coefficient of the single-particle potential in powers of `mu`.
pub fn mu_expansion_term(n: usize, x: f64) -> Result<f64> {
    GaussianTrap { mu: 0.0, mass: 1.0 }.term(n, x)
}

/// Two-level Hamiltonian at time `t`.
pub fn two_level_h(kind: HamiltonianKind, scheme: &TwoLevelScheme, model: &CaseModel, t: f64) -> Matrix2<Complex64> {
    let (omega, delta) = scheme.pulses(t);
    let cr = match kind {
        HamiltonianKind::System => model.mu,
        HamiltonianKind::Idealized => 0.0,
    };
    two_level_matrix(omega, delta, cr, model.omega_carrier, t)
}

/// `(hbar/2) [[-delta, Omega (1 + c e^{-2iwt})], [Omega (1 + c e^{2iwt}), delta]]`.
pub fn two_level_matrix(omega: f64, delta: f64, counter: f64, carrier: f64, t: f64) -> Matrix2<Complex64> {
    let rot = Complex64::from_polar(1.0, -2.0 * carrier * t);
    let upper = (Complex64::new(1.0, 0.0) + rot * counter) * omega;
    let h = 0.5 * HBAR;
    Matrix2::new(
        Complex64::new(-h * delta, 0.0),
        upper * h,
        upper.conj() * h,
        Complex64::new(h * delta, 0.0),
    )
}

/// `dH_S/d eps_k` of the two-level Hamiltonian, `k = 0..8`.
pub fn two_level_grad_h(scheme: &TwoLevelScheme, model: &CaseModel, t: f64) -> Result<Vec<Matrix2<Complex64>>> {
    let basis = knot_basis(4, scheme.t_f)?;
    Ok(two_level_grad_with_basis(&basis, model, t))
}

pub(crate) fn two_level_grad_with_basis(basis: &[crate::poly::Polynomial], model: &CaseModel, t: f64) -> Vec<Matrix2<Complex64>> {
    let coupling = two_level_matrix(1.0, 0.0, model.mu, model.omega_carrier, t);
    let detuning = two_level_matrix(0.0, 1.0, 0.0, model.omega_carrier, t);
    let mut out = Vec::with_capacity(8);
    for b in basis {
        out.push(coupling * Complex64::new(b.eval(t), 0.0));
    }
    for b in basis {
        out.push(detuning * Complex64::new(b.eval(t), 0.0));
    }
    out
}

/// System and idealized two-ion potentials in centre-of-mass and relative
/// coordinates.
pub fn two_ion_potentials(x_c: f64, x_r: f64, q0: f64, model: &CaseModel) -> Result<(f64, f64)> {
    if !(x_r > 0.0) {
        return Err(EstaError::domain(format!("relative coordinate must be positive, got {x_r}")));
    }
    let trap = model.trap();
    let coulomb = model.coulomb / (2.0 * x_r);
    let sys = trap.system(x_c + x_r - q0) + trap.system(x_c - x_r - q0) + coulomb;
    let ideal = model.total_mass * ((x_c - q0).powi(2) + x_r * x_r) + coulomb;
    Ok((sys, ideal))
}

/// Relative potential of the idealized two-ion Hamiltonian,
/// `M w^2 x_r^2 + C / (2 x_r)`.
pub fn relative_potential(model: &CaseModel, x_r: f64) -> f64 {
    model.total_mass * x_r * x_r + model.coulomb / (2.0 * x_r)
}

/// Stationary point of the relative potential: `(C / (4 M w^2))^(1/3)`.
pub fn equilibrium_distance(model: &CaseModel) -> f64 {
    (model.coulomb / (4.0 * model.total_mass)).cbrt()
}

/// Transport case: `dH_S/d lambda_j` as a function of position.
///
/// For one particle `x` is the position; for two ions it is `(x_c, x_r)`.
pub fn transport_grad_potential(
    model: &CaseModel,
    scheme: &TransportScheme,
    basis_values: &[f64],
    x_c: f64,
    x_r: f64,
    t: f64,
) -> Vec<f64> {
    let trap = model.trap();
    let q0 = scheme.q0(t);
    let slope = match model.case {
        CaseId::TwoIon => trap.system_slope(x_c + x_r - q0) + trap.system_slope(x_c - x_r - q0),
        _ => trap.system_slope(x_c - q0),
    };
    basis_values.iter().map(|b| -slope * b).collect()
}

/// Gradient of the system Hamiltonian with respect to the control vector.
#[derive(Debug, Clone)]
pub enum GradH {
    /// One Hermitian matrix per component.
    TwoLevel(Vec<Matrix2<Complex64>>),
    /// One potential value per component at the requested position.
    Transport(Vec<f64>),
}

/// `grad_lambda H_S` at time `t`; `position = (x, 0)` for a single particle
/// and `(x_c, x_r)` for two ions (ignored in the two-level case).
pub fn grad_h_s(model: &CaseModel, scheme: &Scheme, t: f64, position: (f64, f64)) -> Result<GradH> {
    match scheme {
        Scheme::TwoLevel(s) => Ok(GradH::TwoLevel(two_level_grad_h(s, model, t)?)),
        Scheme::Transport(s) => {
            let basis = knot_basis(s.eps.dim(), s.t_f())?;
            let b: Vec<f64> = basis.iter().map(|p| p.eval(t)).collect();
            Ok(GradH::Transport(transport_grad_potential(model, s, &b, position.0, position.1, t)))
        }
    }
}

/// System or idealized potential energy of a transport case at `(x, x_r)`
/// for the trap position `q0`.
pub fn transport_potential(model: &CaseModel, kind: HamiltonianKind, x: f64, x_r: f64, q0: f64) -> f64 {
    let trap = model.trap();
    match model.case {
        CaseId::TwoIon => {
            trap.potential(kind, x + x_r - q0) + trap.potential(kind, x - x_r - q0) + model.coulomb / (2.0 * x_r)
        }
        _ => trap.potential(kind, x - q0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schemes::{build_corrected, lambda0, ControlVector};
    use std::f64::consts::PI;

    #[test]
    fn idealized_two_level_at_start() {
        let model = CaseModel::two_level(3.0);
        let t_f = 2.0;
        let s = TwoLevelScheme::new(t_f, &ControlVector::zeros(8)).unwrap();
        let h = two_level_h(HamiltonianKind::Idealized, &s, &model, 0.0);
        let w = PI / t_f;
        assert!((h[(0, 1)] - Complex64::new(0.5 * w, 0.0)).norm() < 1e-14);
        assert!((h[(1, 0)] - Complex64::new(0.5 * w, 0.0)).norm() < 1e-14);
        assert!(h[(0, 0)].norm() < 1e-14 && h[(1, 1)].norm() < 1e-14);
    }

    #[test]
    fn system_minus_idealized_is_counter_rotating() {
        let model = CaseModel::two_level(3.0);
        let t_f = 2.0;
        let s = TwoLevelScheme::new(t_f, &ControlVector::zeros(8)).unwrap();
        for &t in &[0.1, 0.77, 1.5] {
            let d = two_level_h(HamiltonianKind::System, &s, &model, t) - two_level_h(HamiltonianKind::Idealized, &s, &model, t);
            let (om, _) = s.pulses(t);
            let e = Complex64::from_polar(1.0, -2.0 * 3.0 * t);
            assert!((d[(0, 1)] - 0.5 * om * e).norm() < 1e-14);
            assert!((d[(1, 0)] - 0.5 * om * e.conj()).norm() < 1e-14);
            assert!(d[(0, 0)].norm() < 1e-15);
        }
    }

    #[test]
    fn system_matrix_eigenvalues() {
        let t_f = 1.0;
        let carrier = 40.0 * PI / t_f;
        let model = CaseModel::two_level(carrier);
        let s = TwoLevelScheme::new(t_f, &ControlVector(vec![0.3, -0.2, 0.1, 0.0, 0.05, 0.0, -0.1, 0.2])).unwrap();
        for &t in &[t_f / 2.0, 0.31 * t_f] {
            let h = two_level_h(HamiltonianKind::System, &s, &model, t);
            assert!((h - h.adjoint()).norm() < 1e-14);
            let (om, de) = s.pulses(t);
            let c = (Complex64::new(1.0, 0.0) + Complex64::from_polar(1.0, -2.0 * carrier * t)) * om;
            let expect = 0.5 * (de * de + c.norm_sqr()).sqrt();
            let eig = h.symmetric_eigenvalues();
            let (lo, hi) = (eig[0].min(eig[1]), eig[0].max(eig[1]));
            assert!((hi - expect).abs() < 1e-12 && (lo + expect).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_potential_limits_and_series() {
        assert_eq!(gaussian_potential(0.0, 1e5), 0.0);
        assert!((gaussian_potential(1e4, 50.0) - 50.0).abs() < 1e-12);
        let a = 1e5;
        let v = gaussian_potential(1.0, a);
        assert!((v - a * (1.0 - (-0.5 / a).exp())).abs() < 1e-10);
        let series = 0.5 - 1.0 / (8.0 * a);
        assert!((v - series).abs() < 1.0 / (a * a));
    }

    #[test]
    fn expansion_terms() {
        assert!((mu_expansion_term(0, 1.7).unwrap() - 0.5 * 1.7 * 1.7).abs() < 1e-15);
        // x = sqrt 2 -> xi = 1
        assert!((mu_expansion_term(1, 2f64.sqrt()).unwrap() + 0.5).abs() < 1e-15);
        assert!(matches!(mu_expansion_term(3, 1.0), Err(EstaError::UnsupportedOrder(3))));
        let mu: f64 = 1e-3;
        for i in 0..=30 {
            let x = 3.0 * i as f64 / 30.0;
            let xi = 0.5 * x * x;
            let approx: f64 = (0..3).map(|n| mu.powi(n as i32) * mu_expansion_term(n, x).unwrap()).sum();
            let exact = gaussian_potential(x, 1.0 / mu);
            assert!((approx - exact).abs() <= mu.powi(3) * xi.powi(4) / 24.0 * 1.01 + 1e-15);
        }
    }

    #[test]
    fn gap_matches_difference_and_bound() {
        let trap = GaussianTrap { mu: 1e-3, mass: 1.0 };
        for i in 0..=30 {
            let y = 3.0 * i as f64 / 30.0;
            let direct = trap.system(y) - trap.idealized(y);
            assert!((trap.gap(y) - direct).abs() < 1e-12);
            let xi = trap.xi(y);
            assert!(trap.gap(y).abs() <= trap.mu * xi * xi / 2.0 * (1.0 + 1e-9));
        }
        let zero = GaussianTrap { mu: 0.0, mass: 2.0 };
        assert_eq!(zero.gap(3.0), 0.0);
        assert_eq!(zero.system(3.0), 9.0);
    }

    #[test]
    fn two_ion_potential_values() {
        let model = CaseModel::two_ion_desk();
        let r = model.r_eq();
        let (_, ideal) = two_ion_potentials(5.0, r, 5.0, &model).unwrap();
        assert!((ideal - (2.0 * r * r + model.coulomb / (2.0 * r))).abs() < 1e-9);
        assert!(two_ion_potentials(0.0, 0.0, 0.0, &model).is_err());
        assert!(two_ion_potentials(0.0, -1.0, 0.0, &model).is_err());
        // derivative of the relative potential vanishes at r_eq
        let h = 1e-5;
        let d = (relative_potential(&model, r + h) - relative_potential(&model, r - h)) / (2.0 * h);
        assert!(d.abs() < 1e-6);
        // system - idealized is O(1/a)
        let (s, i) = two_ion_potentials(1.0, r, 0.0, &model).unwrap();
        let trap = model.trap();
        let bound = model.mu * (trap.xi(1.0 + r).powi(2) + trap.xi(1.0 - r).powi(2)) / 2.0;
        assert!((s - i).abs() <= bound * 1.0001);
        assert!((s - i).abs() > 0.5 * bound);
    }

    #[test]
    fn equilibrium_distance_values() {
        let m = CaseModel::two_ion(1e7, 1562.0, 7.35e7);
        assert!((m.r_eq() - (7.35e7f64 / 8.0).cbrt()).abs() < 1e-9);
        assert!((m.r_eq() - 209.45).abs() < 0.01);
        let scaled = CaseModel::two_ion(1e7, 1.0, 8.0 * 7.35e7);
        assert!((scaled.r_eq() / m.r_eq() - 2.0).abs() < 1e-12);
        let small = CaseModel::two_ion(1e5, 1.0, 4.0);
        assert!((small.r_eq() - 0.5f64.cbrt()).abs() < 1e-14);
        // strict local minimum
        let r = small.r_eq();
        let h = 1e-4;
        let curv = (relative_potential(&small, r + h) - 2.0 * relative_potential(&small, r) + relative_potential(&small, r - h)) / (h * h);
        assert!(curv > 0.0);
    }

    #[test]
    fn two_level_gradient_at_knot_and_ends() {
        let model = CaseModel::two_level(5.0);
        let t_f = 2.0;
        let s = TwoLevelScheme::new(t_f, &ControlVector::zeros(8)).unwrap();
        let g = two_level_grad_h(&s, &model, t_f / 5.0).unwrap();
        assert!((g[4][(0, 0)] + 0.5).norm() < 1e-12 && (g[4][(1, 1)] - 0.5).norm() < 1e-12);
        for t in [0.0, t_f] {
            for m in two_level_grad_h(&s, &model, t).unwrap() {
                assert!(m.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn transport_gradient_matches_finite_differences() {
        for model in [CaseModel::single_transport(1e3, 30.0), CaseModel::two_ion(1e4, 30.0, 4.0 * 2.0 * 125.0)] {
            let t_f = 8.0;
            let lam0 = lambda0(&model, t_f).unwrap();
            let s0 = build_corrected(&model, &ControlVector::zeros(6), t_f).unwrap();
            let x_r = if model.case == CaseId::TwoIon { model.r_eq() } else { 0.0 };
            for &t in &[1.3, 4.0, 6.1] {
                let x = s0.as_transport().unwrap().q0(t) + 2.5;
                let GradH::Transport(g) = grad_h_s(&model, &s0, t, (x, x_r)).unwrap() else { panic!() };
                for j in 0..6 {
                    let h = 1e-6;
                    let plus = crate::schemes::build_scheme(&model, &(&lam0 + &ControlVector::unit(6, j, h)), t_f).unwrap();
                    let minus = crate::schemes::build_scheme(&model, &(&lam0 - &ControlVector::unit(6, j, h)), t_f).unwrap();
                    let v = |s: &Scheme| transport_potential(&model, HamiltonianKind::System, x, x_r, s.as_transport().unwrap().q0(t));
                    let fd = (v(&plus) - v(&minus)) / (2.0 * h);
                    let rel = (fd - g[j]).abs() / g[j].abs().max(1e-300);
                    assert!(rel < 1e-4 || (fd - g[j]).abs() < 1e-9, "j={j} t={t}: fd={fd} g={}", g[j]);
                }
            }
        }
    }

    #[test]
    fn case_id_round_trip() {
        for c in [CaseId::TwoLevel, CaseId::SingleTransport, CaseId::TwoIon] {
            assert_eq!(c.to_string().parse::<CaseId>().unwrap(), c);
        }
        assert!("three_level".parse::<CaseId>().is_err());
    }
}
