//! Dynamical modes of the idealized Hamiltonians and matrix elements
//! against them.
//!
//! Two-level modes are the columns of the idealized propagator `U_0(t, 0)`,
//! stored at checkpoints and refined on demand. Transport modes are
//! displaced, boosted oscillator eigenstates
//! `chi_n(x, t) = exp(i theta_n + i m qc' x) phi_n(x - q_c)` with
//! `theta_n' = -[E_n + m qc'^2/2 + m qc'' q_c + m qc''^2 / (2 W^2)]`.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use std::sync::OnceLock;

use crate::error::{EstaError, Result};
use crate::models::{two_level_h, CaseId, CaseModel, HamiltonianKind, HBAR};
use crate::propagators::two_level::{evolve_unitary, propagate_two_level, StepControl};
use crate::quadrature::{gauss_hermite, gauss_legendre, normalized_hermite, Rule};
use crate::schemes::{sta_trajectory, ControlVector, TransportTrajectory, TwoLevelScheme, TWO_LEVEL_DIM};

type C = Complex64;

const CHECKPOINTS: usize = 256;

/// Propagated two-level basis `chi_n(t) = U_0(t, 0) e_n`.
#[derive(Debug, Clone)]
pub struct TwoLevelModes {
    scheme: TwoLevelScheme,
    model: CaseModel,
    t_f: f64,
    /// Step length of the verified integration.
    step: f64,
    checkpoints: Vec<Matrix2<C>>,
    /// Difference of `chi(t_f)` between the accepted step and twice that step.
    pub discrepancy: f64,
    gauge: [f64; 2],
}

impl TwoLevelModes {
    /// Builds the modes of the idealized Hamiltonian driven by `scheme`.
    pub fn new(model: &CaseModel, scheme: &TwoLevelScheme, tol: f64) -> Result<Self> {
        let t_f = scheme.t_f;
        let h0 = |t: f64| two_level_h(HamiltonianKind::Idealized, scheme, model, t);
        let rate = (17f64.sqrt() + 8.0) * std::f64::consts::PI / t_f + scheme.eps.norm();
        let control = StepControl::for_problem(t_f, rate, tol);
        let e0 = Vector2::new(C::new(1.0, 0.0), C::new(0.0, 0.0));
        let run = propagate_two_level(h0, &e0, t_f, control)?;
        let steps = run.steps.div_ceil(CHECKPOINTS) * CHECKPOINTS;
        let per = steps / CHECKPOINTS;
        let dt_check = t_f / CHECKPOINTS as f64;
        let mut checkpoints = Vec::with_capacity(CHECKPOINTS + 1);
        let mut u = Matrix2::identity();
        checkpoints.push(u);
        for k in 0..CHECKPOINTS {
            let t0 = k as f64 * dt_check;
            u = evolve_unitary(&h0, t0, t0 + dt_check, per) * u;
            checkpoints.push(u);
        }
        Ok(TwoLevelModes {
            scheme: scheme.clone(),
            model: *model,
            t_f,
            step: t_f / steps as f64,
            checkpoints,
            discrepancy: run.discrepancy,
            gauge: [0.0; 2],
        })
    }

    /// Multiplies each mode by a constant unit phase.
    pub fn with_gauge(mut self, phases: [f64; 2]) -> Self {
        self.gauge = phases;
        self
    }

    pub fn t_f(&self) -> f64 {
        self.t_f
    }

    /// `U_0(t, 0)` with mode phases applied to its columns.
    pub fn propagator(&self, t: f64) -> Matrix2<C> {
        let t = t.clamp(0.0, self.t_f);
        let dt_check = self.t_f / CHECKPOINTS as f64;
        let k = ((t / dt_check).floor() as usize).min(CHECKPOINTS - 1);
        let t0 = k as f64 * dt_check;
        let mut u = self.checkpoints[k];
        if t > t0 {
            let steps = ((t - t0) / self.step).ceil().max(1.0) as usize;
            let h0 = |s: f64| two_level_h(HamiltonianKind::Idealized, &self.scheme, &self.model, s);
            u = evolve_unitary(&h0, t0, t, steps) * u;
        }
        for (col, phi) in self.gauge.iter().enumerate() {
            if *phi != 0.0 {
                let f = C::from_polar(1.0, *phi);
                for r in 0..2 {
                    u[(r, col)] *= f;
                }
            }
        }
        u
    }

    /// Mode `n` at time `t`.
    pub fn chi(&self, n: usize, t: f64) -> Vector2<C> {
        self.propagator(t).column(n).into_owned()
    }
}

/// Gauss–Hermite rules with 64, 128, 256 and 512 nodes.
fn hermite_rule(level: usize) -> &'static Rule {
    static RULES: [OnceLock<Rule>; 4] = [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];
    RULES[level].get_or_init(|| gauss_hermite(64 << level))
}

/// Node and weight table of one Gauss–Hermite rule in oscillator units.
#[derive(Debug, Clone)]
pub struct HermiteTable {
    /// Displacements `s_i / beta` from the packet centre.
    pub offsets: Vec<f64>,
    /// `w_i h_k(s_i)^2`-style weights are formed from `weights` and `h`.
    pub weights: Vec<f64>,
    /// `h[k][i]`: normalized Hermite polynomial `k` at node `i`.
    pub h: Vec<Vec<f64>>,
}

impl HermiteTable {
    fn new(rule: &Rule, beta: f64, n_max: usize) -> Self {
        let mut h = vec![Vec::with_capacity(rule.nodes.len()); n_max + 1];
        let mut buf = vec![0.0; n_max + 2];
        for &s in &rule.nodes {
            normalized_hermite(n_max, s, &mut buf);
            for (k, hk) in h.iter_mut().enumerate() {
                hk.push(buf[k]);
            }
        }
        HermiteTable { offsets: rule.nodes.iter().map(|s| s / beta).collect(), weights: rule.weights.clone(), h }
    }

    /// `int phi_n(u) A(center + u) phi_m(u) du` and the same integral of `|.|`.
    pub fn element<F: Fn(f64) -> f64>(&self, n: usize, m: usize, center: f64, a: F) -> (f64, f64) {
        let (mut sum, mut abs) = (0.0, 0.0);
        for i in 0..self.offsets.len() {
            let v = self.weights[i] * self.h[n][i] * self.h[m][i] * a(center + self.offsets[i]);
            sum += v;
            abs += v.abs();
        }
        (sum, abs)
    }
}

/// Displaced oscillator modes of the idealized transport Hamiltonian.
#[derive(Debug, Clone)]
pub struct TransportModes {
    pub trajectory: TransportTrajectory,
    pub mass: f64,
    pub omega: f64,
    gauge: Vec<f64>,
}

/// Relative tolerance of the adaptive Gauss–Hermite matrix elements.
pub const HERMITE_TOL: f64 = 1e-8;

impl TransportModes {
    pub fn new(trajectory: TransportTrajectory, mass: f64, omega: f64) -> Self {
        TransportModes { trajectory, mass, omega, gauge: Vec::new() }
    }

    /// Modes of the transported oscillator of a case: mass 1 and frequency
    /// 1 for one particle, the centre of mass for two ions.
    pub fn for_case(model: &CaseModel, t_f: f64) -> Result<Self> {
        if !model.is_transport() {
            return Err(EstaError::domain("transport modes need a transport case"));
        }
        Ok(Self::new(sta_trajectory(model, t_f)?, model.com_mass(), model.com_frequency()))
    }

    /// Multiplies mode `n` by the constant phase `phases[n]`.
    pub fn with_gauge(mut self, phases: Vec<f64>) -> Self {
        self.gauge = phases;
        self
    }

    fn gauge_phase(&self, n: usize) -> f64 {
        self.gauge.get(n).copied().unwrap_or(0.0)
    }

    /// `sqrt(m W / hbar)`, the inverse oscillator length.
    pub fn beta(&self) -> f64 {
        (self.mass * self.omega / HBAR).sqrt()
    }

    pub fn energy(&self, n: usize) -> f64 {
        HBAR * self.omega * (n as f64 + 0.5)
    }

    /// Lab-frame phase `theta_n(t)`, integrated with a Gauss–Legendre rule
    /// exact for the polynomial integrand.
    pub fn phase(&self, n: usize, t: f64) -> f64 {
        let tr = &self.trajectory;
        let (m, w) = (self.mass, self.omega);
        let rule = gauss_legendre(12);
        let integral = crate::quadrature::gl_fixed(&rule, 0.0, t, |s| {
            let (q, v, acc) = (tr.qc(s), tr.qc_dot(s), tr.qc_ddot(s));
            0.5 * m * v * v + m * acc * q + m * acc * acc / (2.0 * w * w)
        });
        -(self.energy(n) * t + integral) / HBAR + self.gauge_phase(n)
    }

    /// Oscillator eigenfunction `phi_n(u)`.
    pub fn phi(&self, n: usize, u: f64) -> f64 {
        let beta = self.beta();
        let mut h = vec![0.0; n + 2];
        normalized_hermite(n, beta * u, &mut h);
        beta.sqrt() * h[n] * (-0.5 * (beta * u).powi(2)).exp()
    }

    /// Full lab-frame mode `chi_n(x, t)`.
    pub fn chi(&self, n: usize, t: f64, x: f64) -> C {
        let tr = &self.trajectory;
        let phase = self.phase(n, t) + self.mass * tr.qc_dot(t) * x / HBAR;
        C::from_polar(self.phi(n, x - tr.qc(t)), phase)
    }

    /// Relative phase factor `e^{i (n - m) W t}` of `<chi_n| A |chi_m>`,
    /// including gauge phases.
    pub fn phase_factor(&self, n: usize, m: usize, t: f64) -> C {
        let rel = (n as f64 - m as f64) * self.omega * t - self.gauge_phase(n) + self.gauge_phase(m);
        C::from_polar(1.0, rel)
    }

    /// Gauss–Hermite table for mode indices up to `n_max` at rule level
    /// `level` (64 nodes times `2^level`).
    pub fn table(&self, n_max: usize, level: usize) -> HermiteTable {
        HermiteTable::new(hermite_rule(level), self.beta(), n_max)
    }

    /// Smallest rule level at which `int phi_n A phi_m` is stable under node
    /// doubling.
    pub fn converged_level<F: Fn(f64) -> f64>(&self, n: usize, m: usize, t: f64, a: F) -> Result<usize> {
        let nm = n.max(m);
        let center = self.trajectory.qc(t);
        let mut prev = self.table(nm, 0).element(n, m, center, &a).0;
        for level in 1..4 {
            let (next, abs) = self.table(nm, level).element(n, m, center, &a);
            if (next - prev).abs() <= HERMITE_TOL * abs.max(f64::MIN_POSITIVE) {
                return Ok(level - 1);
            }
            prev = next;
        }
        Err(EstaError::accuracy(format!(
            "Gauss-Hermite matrix element <{n}|A|{m}> at t={t} did not converge with 512 nodes"
        )))
    }

    /// `<chi_n(t)| A |chi_m(t)>` for a multiplicative operator `A(x)`.
    pub fn matrix_element<F: Fn(f64) -> f64>(&self, n: usize, m: usize, t: f64, a: F) -> Result<C> {
        let level = self.converged_level(n, m, t, &a)?;
        let value = self.table(n.max(m), level + 1).element(n, m, self.trajectory.qc(t), &a).0;
        Ok(self.phase_factor(n, m, t) * value)
    }
}

/// Idealized-Hamiltonian modes of a case.
#[derive(Debug, Clone)]
pub enum ModeSet {
    TwoLevel(TwoLevelModes),
    Transport(TransportModes),
}

impl ModeSet {
    /// Modes of the STA baseline of `model` at final time `t_f`.
    pub fn build(model: &CaseModel, t_f: f64) -> Result<Self> {
        match model.case {
            CaseId::TwoLevel => {
                let scheme = TwoLevelScheme::new(t_f, &ControlVector::zeros(TWO_LEVEL_DIM))?;
                Ok(ModeSet::TwoLevel(TwoLevelModes::new(model, &scheme, 1e-10)?))
            }
            _ => Ok(ModeSet::Transport(TransportModes::for_case(model, t_f)?)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::two_level_matrix;

    fn modes(t_f: f64) -> TwoLevelModes {
        let model = CaseModel::two_level(1.0);
        let scheme = TwoLevelScheme::new(t_f, &ControlVector::zeros(8)).unwrap();
        TwoLevelModes::new(&model, &scheme, 1e-10).unwrap()
    }

    #[test]
    fn two_level_modes_invert_population() {
        for t_f in [1.0, 5.0, 30.0] {
            let m = modes(t_f);
            let chi0 = m.chi(0, t_f);
            assert!((chi0[1].norm_sqr() - 1.0).abs() < 1e-9, "t_f={t_f}");
            for k in 0..=20 {
                let t = t_f * k as f64 / 20.0;
                let (a, b) = (m.chi(0, t), m.chi(1, t));
                assert!(a.dotc(&b).norm() < 1e-8);
                assert!((a.norm() - 1.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn two_level_modes_solve_schrodinger() {
        let t_f = 7.0;
        let m = modes(t_f);
        let scheme = TwoLevelScheme::new(t_f, &ControlVector::zeros(8)).unwrap();
        let h = 1e-4;
        for k in 1..10 {
            let t = t_f * k as f64 / 10.0 + 0.013;
            let deriv = (m.chi(0, t + h) - m.chi(0, t - h)) / C::new(2.0 * h, 0.0);
            let (om, de) = scheme.pulses(t);
            let hv = two_level_matrix(om, de, 0.0, 0.0, t) * m.chi(0, t);
            let resid = deriv * C::new(0.0, HBAR) - hv;
            assert!(resid.norm() < 1e-6, "t={t}: {}", resid.norm());
        }
    }

    #[test]
    fn two_level_step_halving() {
        let m = modes(12.0);
        assert!(m.discrepancy < 1e-9);
    }

    fn transport() -> TransportModes {
        TransportModes::new(TransportTrajectory::new(6.0, 5.0, 1.0).unwrap(), 1.0, 1.0)
    }

    #[test]
    fn constant_operator_is_diagonal() {
        let m = transport();
        for n in 1..4 {
            assert!(m.matrix_element(n, 0, 2.3, |_| 3.5).unwrap().norm() < 1e-13);
        }
        let d = m.matrix_element(2, 2, 2.3, |_| 3.5).unwrap();
        assert!((d.re - 3.5).abs() < 1e-12 && d.im.abs() < 1e-15);
    }

    #[test]
    fn first_moment_closed_form() {
        let m = transport();
        let t = 1.7;
        let qc = m.trajectory.qc(t);
        let el = m.matrix_element(1, 0, t, |x| x - qc).unwrap();
        let expect = C::from_polar(1.0 / 2f64.sqrt(), t);
        assert!((el - expect).norm() < 1e-12, "{el} vs {expect}");
        // centre-of-mass modes: mass 2, frequency sqrt 2, length (2 sqrt 2)^(-1/2)
        let com = TransportModes::new(TransportTrajectory::new(6.0, 5.0, 2f64.sqrt()).unwrap(), 2.0, 2f64.sqrt());
        let qc = com.trajectory.qc(t);
        let el = com.matrix_element(1, 0, t, |x| x - qc).unwrap();
        assert!((el.norm() - (1.0 / (2.0 * 2.0 * 2f64.sqrt())).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn phase_difference_is_linear() {
        let m = transport();
        for &t in &[0.0, 0.4, 3.3, 6.0] {
            for n in 1..4 {
                let d = m.phase(n, t) - m.phase(0, t);
                assert!((d + n as f64 * t).abs() < 1e-12);
            }
        }
        assert_eq!(m.phase(3, 0.0), 0.0);
        let fixed = TransportModes::new(TransportTrajectory::new(6.0, 0.0, 1.0).unwrap(), 1.0, 1.0);
        assert!((fixed.phase(2, 1.5) + 2.5 * 1.5).abs() < 1e-13);
    }

    #[test]
    fn transport_modes_solve_schrodinger() {
        let m = transport();
        let tr = &m.trajectory;
        let (ht, hx) = (1e-4, 2e-4);
        for n in 0..3 {
            for k in 1..8 {
                let t = 6.0 * k as f64 / 8.0;
                let mut worst: f64 = 0.0;
                for j in -40..=40 {
                    let x = tr.qc(t) + j as f64 * 0.1;
                    let dt = (m.chi(n, t + ht, x) - m.chi(n, t - ht, x)) / (2.0 * ht);
                    let dxx = (m.chi(n, t, x + hx) - 2.0 * m.chi(n, t, x) + m.chi(n, t, x - hx)) / (hx * hx);
                    let v = 0.5 * (x - tr.q0(t)).powi(2);
                    let resid = C::new(0.0, 1.0) * dt - (-0.5 * dxx + m.chi(n, t, x) * v);
                    worst = worst.max(resid.norm());
                }
                assert!(worst < 1e-6, "n={n} t={t}: {worst}");
            }
        }
    }

    #[test]
    fn gauge_phases_rotate_elements() {
        let m = transport().with_gauge(vec![0.3, -1.1]);
        let plain = transport();
        let a = m.matrix_element(1, 0, 2.0, |x| x * x).unwrap();
        let b = plain.matrix_element(1, 0, 2.0, |x| x * x).unwrap();
        assert!((a - b * C::from_polar(1.0, 1.4)).norm() < 1e-12);
    }
}
