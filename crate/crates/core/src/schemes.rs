//! STA baseline protocols and their control-point parameterization.
//!
//! The two-level protocol is a pair of pulses `Omega(t)`, `delta(t)`; a
//! correction adds the minimal polynomials through four interior knots at
//! `j t_f / 5` to each of them. Transport protocols are trap trajectories
//! `q_0(t)` obtained from a degree-9 classical path `q_c(t)` through the
//! auxiliary equation `q_c'' + w^2 (q_c - q_0) = 0`; their control vector is
//! the trajectory value at the six knots `j t_f / 7`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::ops::{Add, Sub};

use crate::error::{EstaError, Result};
use crate::models::{CaseId, CaseModel};
use crate::poly::{solve_constraints, Constraint, Polynomial};

/// Number of correction parameters of the two-level protocol.
pub const TWO_LEVEL_DIM: usize = 8;
/// Number of trajectory control points of the transport protocols.
pub const TRANSPORT_DIM: usize = 6;

/// Control vector `lambda` (or a correction `epsilon`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ControlVector(pub Vec<f64>);

impl ControlVector {
    pub fn zeros(dim: usize) -> Self {
        ControlVector(vec![0.0; dim])
    }

    pub fn unit(dim: usize, k: usize, h: f64) -> Self {
        let mut v = vec![0.0; dim];
        v[k] = h;
        ControlVector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }

    pub fn scale(&self, factor: f64) -> Self {
        ControlVector(self.0.iter().map(|x| x * factor).collect())
    }
}

impl Add for &ControlVector {
    type Output = ControlVector;
    fn add(self, rhs: &ControlVector) -> ControlVector {
        assert_eq!(self.dim(), rhs.dim());
        ControlVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &ControlVector {
    type Output = ControlVector;
    fn sub(self, rhs: &ControlVector) -> ControlVector {
        assert_eq!(self.dim(), rhs.dim());
        ControlVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

/// Minimal polynomial vanishing at `0` and `t_f` and taking prescribed values
/// at the equally spaced interior knots `j t_f / (n + 1)`, `j = 1..=n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolantPolynomial {
    pub poly: Polynomial,
    pub knot_values: Vec<f64>,
    pub t_f: f64,
}

impl InterpolantPolynomial {
    pub fn through_knots(knot_values: &[f64], t_f: f64) -> Result<Self> {
        if !(t_f > 0.0) {
            return Err(EstaError::domain(format!("t_f must be positive, got {t_f}")));
        }
        if knot_values.is_empty() {
            return Err(EstaError::domain("interpolant needs at least one knot value"));
        }
        let n = knot_values.len();
        let poly = if knot_values.iter().all(|&v| v == 0.0) {
            Polynomial::zero(t_f)
        } else {
            let mut cs = Vec::with_capacity(n + 2);
            cs.push(Constraint { s: 0.0, order: 0, value: 0.0 });
            for (j, &v) in knot_values.iter().enumerate() {
                let s = (j + 1) as f64 / (n + 1) as f64;
                cs.push(Constraint { s, order: 0, value: v });
            }
            cs.push(Constraint { s: 1.0, order: 0, value: 0.0 });
            solve_constraints(&cs, t_f)?
        };
        Ok(InterpolantPolynomial { poly, knot_values: knot_values.to_vec(), t_f })
    }

    pub fn knot_times(&self) -> Vec<f64> {
        let n = self.knot_values.len();
        (1..=n).map(|j| j as f64 * self.t_f / (n + 1) as f64).collect()
    }

    pub fn degree(&self) -> usize {
        self.knot_values.len() + 1
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.poly.eval(t)
    }
}

/// Correction interpolant of the two-level pulses (four interior knots).
pub fn correction_interpolant(knot_values: &[f64], t_f: f64) -> Result<InterpolantPolynomial> {
    if knot_values.len() != 4 {
        return Err(EstaError::domain(format!(
            "two-level interpolant takes 4 knot values, got {}",
            knot_values.len()
        )));
    }
    InterpolantPolynomial::through_knots(knot_values, t_f)
}

/// Lagrange-type basis polynomials `b_j` (value 1 at knot `j`, 0 at the other
/// knots and the endpoints) for `n` interior knots.
pub fn knot_basis(n: usize, t_f: f64) -> Result<Vec<Polynomial>> {
    (0..n)
        .map(|j| {
            let mut v = vec![0.0; n];
            v[j] = 1.0;
            InterpolantPolynomial::through_knots(&v, t_f).map(|ip| ip.poly)
        })
        .collect()
}

fn check_time(t: f64, t_f: f64) -> Result<()> {
    if !(t_f > 0.0) {
        return Err(EstaError::domain(format!("t_f must be positive, got {t_f}")));
    }
    let slack = 1e-12 * t_f;
    if !(t >= -slack && t <= t_f + slack) {
        return Err(EstaError::domain(format!("t = {t} outside [0, {t_f}]")));
    }
    Ok(())
}

/// Baseline Rabi frequency and detuning of the robust population-inversion
/// protocol.
pub fn sta_pulse(t: f64, t_f: f64) -> Result<(f64, f64)> {
    check_time(t, t_f)?;
    Ok(sta_pulse_unchecked(t, t_f))
}

pub(crate) fn sta_pulse_unchecked(t: f64, t_f: f64) -> (f64, f64) {
    let rate = PI / t_f;
    let s = (rate * t).sin();
    let s6 = s.powi(6);
    let omega = rate * (1.0 + 16.0 * s6).sqrt();
    let delta = -8.0 * rate * s * (2.0 * rate * t).sin() * (1.0 + 4.0 * s6) / (1.0 + 16.0 * s6);
    (omega, delta)
}

/// Degree-9 classical path with `q_c(0)=0`, `q_c(t_f)=d` and vanishing first
/// to fourth derivatives at both ends.
pub fn design_qc(t_f: f64, d: f64) -> Result<Polynomial> {
    if !(t_f > 0.0) {
        return Err(EstaError::domain(format!("t_f must be positive, got {t_f}")));
    }
    if !(d >= 0.0) || !d.is_finite() {
        return Err(EstaError::domain(format!("transport distance must be finite and >= 0, got {d}")));
    }
    if d == 0.0 {
        return Ok(Polynomial::new(vec![0.0; 10], t_f));
    }
    let mut cs = Vec::with_capacity(10);
    for (s, value) in [(0.0, 0.0), (1.0, d)] {
        cs.push(Constraint { s, order: 0, value });
        for order in 1..=4 {
            cs.push(Constraint { s, order, value: 0.0 });
        }
    }
    solve_constraints(&cs, t_f)
}

/// Trap trajectory from the auxiliary equation: `q_0 = q_c + q_c'' / w^2`.
pub fn q0_from_qc(qc: &Polynomial, omega: f64) -> Polynomial {
    let dd = qc.differentiate().differentiate();
    let mut coeffs = qc.coeffs.clone();
    for (c, extra) in coeffs.iter_mut().zip(&dd.coeffs) {
        *c += extra / (omega * omega);
    }
    Polynomial::new(coeffs, qc.scale)
}

/// STA transport trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportTrajectory {
    pub qc: Polynomial,
    pub q0: Polynomial,
    /// Oscillation frequency entering the auxiliary equation.
    pub omega: f64,
    pub t_f: f64,
    pub d: f64,
}

impl TransportTrajectory {
    pub fn new(t_f: f64, d: f64, omega: f64) -> Result<Self> {
        let qc = design_qc(t_f, d)?;
        let q0 = q0_from_qc(&qc, omega);
        Ok(TransportTrajectory { qc, q0, omega, t_f, d })
    }

    pub fn qc(&self, t: f64) -> f64 {
        self.qc.eval(t)
    }

    pub fn qc_dot(&self, t: f64) -> f64 {
        self.qc.derivative(t, 1)
    }

    pub fn qc_ddot(&self, t: f64) -> f64 {
        self.qc.derivative(t, 2)
    }

    pub fn q0(&self, t: f64) -> f64 {
        self.q0.eval(t)
    }

    /// Largest `|q_c - q_0|` over the protocol, sampled densely.
    pub fn max_lag(&self) -> f64 {
        (0..=2000)
            .map(|i| {
                let t = self.t_f * i as f64 / 2000.0;
                (self.qc(t) - self.q0(t)).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Two-level pulses at a given correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelScheme {
    pub t_f: f64,
    pub eps: ControlVector,
    pub f1: InterpolantPolynomial,
    pub f2: InterpolantPolynomial,
}

impl TwoLevelScheme {
    pub fn new(t_f: f64, eps: &ControlVector) -> Result<Self> {
        if eps.dim() != TWO_LEVEL_DIM {
            return Err(EstaError::domain(format!(
                "two-level control vector must have {TWO_LEVEL_DIM} components, got {}",
                eps.dim()
            )));
        }
        let f1 = correction_interpolant(&eps.0[0..4], t_f)?;
        let f2 = correction_interpolant(&eps.0[4..8], t_f)?;
        Ok(TwoLevelScheme { t_f, eps: eps.clone(), f1, f2 })
    }

    /// `(Omega(t), delta(t))`.
    pub fn pulses(&self, t: f64) -> (f64, f64) {
        let (omega, delta) = sta_pulse_unchecked(t, self.t_f);
        (omega + self.f1.eval(t), delta + self.f2.eval(t))
    }
}

/// Trap trajectory at a given control vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportScheme {
    pub trajectory: TransportTrajectory,
    pub eps: ControlVector,
    pub correction: InterpolantPolynomial,
}

impl TransportScheme {
    pub fn new(trajectory: TransportTrajectory, eps: &ControlVector) -> Result<Self> {
        if eps.dim() != TRANSPORT_DIM {
            return Err(EstaError::domain(format!(
                "transport control vector must have {TRANSPORT_DIM} components, got {}",
                eps.dim()
            )));
        }
        let correction = InterpolantPolynomial::through_knots(&eps.0, trajectory.t_f)?;
        Ok(TransportScheme { trajectory, eps: eps.clone(), correction })
    }

    pub fn t_f(&self) -> f64 {
        self.trajectory.t_f
    }

    pub fn q0(&self, t: f64) -> f64 {
        self.trajectory.q0(t) + self.correction.eval(t)
    }

    /// Absolute control vector: the trajectory value at the knots.
    pub fn lambda(&self) -> ControlVector {
        ControlVector(self.correction.knot_times().iter().map(|&t| self.q0(t)).collect())
    }
}

/// A protocol for one of the case studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Scheme {
    TwoLevel(TwoLevelScheme),
    Transport(TransportScheme),
}

impl Scheme {
    pub fn t_f(&self) -> f64 {
        match self {
            Scheme::TwoLevel(s) => s.t_f,
            Scheme::Transport(s) => s.t_f(),
        }
    }

    pub fn eps(&self) -> &ControlVector {
        match self {
            Scheme::TwoLevel(s) => &s.eps,
            Scheme::Transport(s) => &s.eps,
        }
    }

    pub fn as_two_level(&self) -> Option<&TwoLevelScheme> {
        match self {
            Scheme::TwoLevel(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_transport(&self) -> Option<&TransportScheme> {
        match self {
            Scheme::Transport(s) => Some(s),
            _ => None,
        }
    }
}

/// Control dimension of a case.
pub fn control_dim(case: CaseId) -> usize {
    match case {
        CaseId::TwoLevel => TWO_LEVEL_DIM,
        CaseId::SingleTransport | CaseId::TwoIon => TRANSPORT_DIM,
    }
}

/// STA trajectory of a transport case.
pub fn sta_trajectory(model: &CaseModel, t_f: f64) -> Result<TransportTrajectory> {
    TransportTrajectory::new(t_f, model.distance, model.com_frequency())
}

/// Control vector of the STA baseline.
pub fn lambda0(model: &CaseModel, t_f: f64) -> Result<ControlVector> {
    match model.case {
        CaseId::TwoLevel => Ok(ControlVector::zeros(TWO_LEVEL_DIM)),
        _ => {
            let traj = sta_trajectory(model, t_f)?;
            Ok(ControlVector(
                (1..=TRANSPORT_DIM).map(|j| traj.q0(j as f64 * t_f / (TRANSPORT_DIM + 1) as f64)).collect(),
            ))
        }
    }
}

/// Builds the protocol for an absolute control vector `lambda`.
pub fn build_scheme(model: &CaseModel, lambda: &ControlVector, t_f: f64) -> Result<Scheme> {
    let dim = control_dim(model.case);
    if lambda.dim() != dim {
        return Err(EstaError::domain(format!(
            "control vector for {:?} must have {dim} components, got {}",
            model.case,
            lambda.dim()
        )));
    }
    let base = lambda0(model, t_f)?;
    build_corrected(model, &(lambda - &base), t_f)
}

/// Builds the protocol `lambda_0 + eps`.
pub fn build_corrected(model: &CaseModel, eps: &ControlVector, t_f: f64) -> Result<Scheme> {
    match model.case {
        CaseId::TwoLevel => Ok(Scheme::TwoLevel(TwoLevelScheme::new(t_f, eps)?)),
        _ => Ok(Scheme::Transport(TransportScheme::new(sta_trajectory(model, t_f)?, eps)?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{gauss_legendre, gl_fixed};
    use proptest::prelude::*;

    #[test]
    fn pulse_endpoint_and_midpoint() {
        for t_f in [0.5, 1.0, 7.3] {
            let (o, d) = sta_pulse(0.0, t_f).unwrap();
            assert!((o - PI / t_f).abs() < 1e-14);
            assert_eq!(d, 0.0);
            let (o, d) = sta_pulse(t_f / 2.0, t_f).unwrap();
            assert!((o - PI / t_f * 17f64.sqrt()).abs() < 1e-12);
            assert!(d.abs() < 1e-12);
        }
    }

    #[test]
    fn pulse_quarter_time() {
        // sin(pi/4)^6 = 1/8, sin(pi/2) = 1:
        // Omega = (pi/t_f) sqrt(3), delta = -8 (pi/t_f) (1/sqrt2) (3/2) / 3 = -(pi/t_f) 2 sqrt2
        let t_f = 2.0;
        let (o, d) = sta_pulse(0.5, t_f).unwrap();
        assert!((o - PI / t_f * 3f64.sqrt()).abs() < 1e-13);
        assert!((d + PI / t_f * 2.0 * 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn pulse_rejects_out_of_range() {
        assert!(matches!(sta_pulse(-0.1, 1.0), Err(EstaError::Domain(_))));
        assert!(matches!(sta_pulse(1.1, 1.0), Err(EstaError::Domain(_))));
        assert!(sta_pulse(0.5, 0.0).is_err());
    }

    #[test]
    fn interpolant_zero_and_ones() {
        let z = correction_interpolant(&[0.0; 4], 3.0).unwrap();
        assert!(z.poly.is_zero());
        let p = correction_interpolant(&[1.0; 4], 3.0).unwrap();
        assert_eq!(p.degree(), 5);
        assert!(p.eval(0.0).abs() < 1e-14);
        assert!(p.eval(3.0).abs() < 1e-12);
        for t in p.knot_times() {
            assert!((p.eval(t) - 1.0).abs() < 1e-12);
        }
        assert!(correction_interpolant(&[1.0; 3], 3.0).is_err());
    }

    #[test]
    fn first_basis_integral_against_dense_quadrature() {
        // Closed form of b_1 on [0, 1] from the Lagrange product, integrated
        // by a high-order rule independent of the monomial coefficients.
        let t_f = 2.0;
        let b1 = correction_interpolant(&[1.0, 0.0, 0.0, 0.0], t_f).unwrap();
        let knots: Vec<f64> = (0..6).map(|k| k as f64 * t_f / 5.0).collect();
        let lagrange = |t: f64| {
            (0..6).filter(|&k| k != 1).map(|k| (t - knots[k]) / (knots[1] - knots[k])).product::<f64>()
        };
        let rule = gauss_legendre(20);
        let dense = gl_fixed(&rule, 0.0, t_f, lagrange);
        assert!((b1.poly.integral(0.0, t_f) - dense).abs() < 1e-12);
        // exact rational value from a symbolic integration: 25/96
        assert!((dense / t_f - 25.0 / 96.0).abs() < 1e-12);
    }

    #[test]
    fn qc_constraints_and_closed_form() {
        let (t_f, d) = (1.0, 1.0);
        let qc = design_qc(t_f, d).unwrap();
        let mut resid: f64 = (qc.eval(0.0)).abs().max((qc.eval(t_f) - d).abs());
        for order in 1..=4 {
            resid = resid.max(qc.derivative(0.0, order).abs()).max(qc.derivative(t_f, order).abs());
        }
        assert!(resid < 1e-10, "residual {resid}");
        // smoothstep of order 4: 126 s^5 - 420 s^6 + 540 s^7 - 315 s^8 + 70 s^9
        let expect = [0.0, 0.0, 0.0, 0.0, 0.0, 126.0, -420.0, 540.0, -315.0, 70.0];
        for (c, e) in qc.coeffs.iter().zip(expect) {
            assert!((c - e).abs() < 1e-8, "{c} vs {e}");
        }
        assert!(design_qc(0.0, 1.0).is_err());
        assert!(design_qc(1.0, 0.0).unwrap().is_zero());
    }

    #[test]
    fn q0_endpoints_and_fd_midpoint() {
        let (t_f, d) = (7.5, 40.0);
        let qc = design_qc(t_f, d).unwrap();
        let q0 = q0_from_qc(&qc, 1.0);
        assert!(q0.eval(0.0).abs() < 1e-10);
        assert!((q0.eval(t_f) - d).abs() < 1e-9);
        let h = 1e-3;
        let m = t_f / 2.0;
        let fd = (qc.eval(m + h) - 2.0 * qc.eval(m) + qc.eval(m - h)) / (h * h);
        assert!((q0.eval(m) - (d / 2.0 + fd)).abs() < 1e-5);
        assert!(q0_from_qc(&Polynomial::zero(1.0), 1.0).is_zero());
    }

    #[test]
    fn transport_knot_shift() {
        let model = CaseModel::single_transport(1e5, 100.0);
        let t_f = 14.0;
        let base = build_corrected(&model, &ControlVector::zeros(6), t_f).unwrap();
        let eps = ControlVector::unit(6, 2, 0.5);
        let s = build_corrected(&model, &eps, t_f).unwrap();
        let (b, s) = (base.as_transport().unwrap(), s.as_transport().unwrap());
        let knot = 3.0 * t_f / 7.0;
        assert!((s.q0(knot) - b.q0(knot) - 0.5).abs() < 1e-12);
        assert!((s.q0(0.0) - b.q0(0.0)).abs() < 1e-12);
        assert!((s.q0(t_f) - b.q0(t_f)).abs() < 1e-10);
        // lambda round trip through build_scheme
        let again = build_scheme(&model, &s.lambda(), t_f).unwrap();
        for (a, e) in again.eps().0.iter().zip(&eps.0) {
            assert!((a - e).abs() < 1e-9);
        }
    }

    #[test]
    fn two_level_shift_by_basis() {
        let model = CaseModel::two_level(1.0);
        let t_f = 3.0;
        let eps = ControlVector::unit(8, 0, 0.1);
        let s = build_corrected(&model, &eps, t_f).unwrap();
        let s = s.as_two_level().unwrap();
        let b1 = &knot_basis(4, t_f).unwrap()[0];
        for i in 0..=50 {
            let t = t_f * i as f64 / 50.0;
            let (o0, d0) = sta_pulse(t, t_f).unwrap();
            let (o, d) = s.pulses(t);
            assert!((o - o0 - 0.1 * b1.eval(t)).abs() < 1e-13);
            assert_eq!(d, d0);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let model = CaseModel::two_level(1.0);
        assert!(matches!(build_scheme(&model, &ControlVector::zeros(6), 1.0), Err(EstaError::Domain(_))));
        let model = CaseModel::single_transport(1e5, 10.0);
        assert!(build_scheme(&model, &ControlVector::zeros(8), 1.0).is_err());
    }

    #[test]
    fn baseline_symmetry() {
        let model = CaseModel::single_transport(1e5, 1562.0);
        let t_f = 20.0;
        let s = build_corrected(&model, &ControlVector::zeros(6), t_f).unwrap();
        let s = s.as_transport().unwrap();
        for i in 0..=100 {
            let t = t_f * i as f64 / 100.0;
            let sym = s.q0(t_f - t) - (1562.0 - s.q0(t));
            assert!(sym.abs() < 1e-9, "t={t}: {sym}");
        }
    }

    #[test]
    fn zero_correction_is_baseline() {
        for model in [CaseModel::two_level(2.0), CaseModel::single_transport(1e5, 50.0), CaseModel::two_ion_desk()] {
            let t_f = 9.0;
            let lam0 = lambda0(&model, t_f).unwrap();
            let s = build_scheme(&model, &lam0, t_f).unwrap();
            for i in 0..100 {
                let t = t_f * i as f64 / 99.0;
                match &s {
                    Scheme::TwoLevel(s) => {
                        let (o, d) = s.pulses(t);
                        let (o0, d0) = sta_pulse(t, t_f).unwrap();
                        assert!((o - o0).abs() < 1e-12 && (d - d0).abs() < 1e-12);
                    }
                    Scheme::Transport(s) => {
                        assert!((s.q0(t) - s.trajectory.q0(t)).abs() < 1e-12);
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn interpolant_is_linear(u in prop::collection::vec(-5.0f64..5.0, 4),
                                 v in prop::collection::vec(-5.0f64..5.0, 4),
                                 alpha in -3.0f64..3.0, beta in -3.0f64..3.0,
                                 t_f in 0.1f64..50.0) {
            let combo: Vec<f64> = u.iter().zip(&v).map(|(a, b)| alpha * a + beta * b).collect();
            let pu = correction_interpolant(&u, t_f).unwrap();
            let pv = correction_interpolant(&v, t_f).unwrap();
            let pc = correction_interpolant(&combo, t_f).unwrap();
            for i in 0..=20 {
                let t = t_f * i as f64 / 20.0;
                let lhs = pc.eval(t);
                let rhs = alpha * pu.eval(t) + beta * pv.eval(t);
                prop_assert!((lhs - rhs).abs() < 1e-10);
            }
        }

        #[test]
        fn qc_constraints_hold(t_f in 0.5f64..100.0, d in 0.0f64..2000.0) {
            let qc = design_qc(t_f, d).unwrap();
            let scale = d.max(1.0);
            prop_assert!(qc.eval(0.0).abs() < 1e-10 * scale);
            prop_assert!((qc.eval(t_f) - d).abs() < 1e-10 * scale);
            for order in 1..=4 {
                let unit = scale / t_f.powi(order as i32);
                prop_assert!(qc.derivative(0.0, order).abs() < 1e-10 * unit);
                prop_assert!(qc.derivative(t_f, order).abs() < 1e-10 * unit);
            }
            prop_assert!((qc.eval(t_f / 2.0) - d / 2.0).abs() < 1e-10 * scale);
        }

        #[test]
        fn auxiliary_equation_identity(t_f in 1.0f64..60.0, d in 1.0f64..2000.0, w in 0.5f64..2.0) {
            let qc = design_qc(t_f, d).unwrap();
            let q0 = q0_from_qc(&qc, w);
            for i in 0..=50 {
                let t = t_f * i as f64 / 50.0;
                let r = qc.derivative(t, 2) + w * w * (qc.eval(t) - q0.eval(t));
                prop_assert!(r.abs() < 1e-10 * d.max(1.0));
            }
        }
    }
}
