//! Unitary integration of two-level Schrödinger equations.
//!
//! Fourth-order Magnus steps: the Hamiltonian is sampled at the two
//! Gauss–Legendre points of each step and the step operator is the exact
//! matrix exponential of the truncated Magnus series, so every step is
//! unitary to round-off.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;

use crate::error::{EstaError, Result};
use crate::models::HBAR;

type C = Complex64;

/// Exponential of an arbitrary complex 2x2 matrix.
pub fn expm2(m: &Matrix2<C>) -> Matrix2<C> {
    let tau = (m[(0, 0)] + m[(1, 1)]) * 0.5;
    let n = m - Matrix2::identity() * tau;
    // n^2 = s^2 I for traceless n
    let s2 = n[(0, 0)] * n[(0, 0)] + n[(0, 1)] * n[(1, 0)];
    let s = s2.sqrt();
    let (cosh, sinhc) = if s.norm() < 1e-4 {
        (C::new(1.0, 0.0) + s2 / 2.0 + s2 * s2 / 24.0, C::new(1.0, 0.0) + s2 / 6.0 + s2 * s2 / 120.0)
    } else {
        (s.cosh(), s.sinh() / s)
    };
    (Matrix2::identity() * cosh + n * sinhc) * tau.exp()
}

/// One fourth-order Magnus step of `U` from `t` to `t + h`.
pub fn magnus4_step<H>(hamiltonian: &H, t: f64, h: f64) -> Matrix2<C>
where
    H: Fn(f64) -> Matrix2<C>,
{
    const SQRT3: f64 = 1.732_050_807_568_877_2;
    let c1 = 0.5 - SQRT3 / 6.0;
    let c2 = 0.5 + SQRT3 / 6.0;
    let minus_i = C::new(0.0, -1.0 / HBAR);
    let a1 = hamiltonian(t + c1 * h) * minus_i;
    let a2 = hamiltonian(t + c2 * h) * minus_i;
    let comm = a2 * a1 - a1 * a2;
    let omega = (a1 + a2) * C::new(0.5 * h, 0.0) + comm * C::new(SQRT3 * h * h / 12.0, 0.0);
    expm2(&omega)
}

/// Propagator `U(t1, t0)` built from `steps` equal Magnus steps.
pub fn evolve_unitary<H>(hamiltonian: &H, t0: f64, t1: f64, steps: usize) -> Matrix2<C>
where
    H: Fn(f64) -> Matrix2<C>,
{
    let steps = steps.max(1);
    let h = (t1 - t0) / steps as f64;
    let mut u = Matrix2::identity();
    for k in 0..steps {
        u = magnus4_step(hamiltonian, t0 + k as f64 * h, h) * u;
    }
    u
}

/// Step-count control with step-halving verification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub initial_steps: usize,
    /// Accepted discrepancy between a run and the run with half the step.
    pub tol: f64,
    pub max_doublings: u32,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl { initial_steps: 256, tol: 1e-10, max_doublings: 14 }
    }
}

impl StepControl {
    /// Picks a starting step count resolving both the pulse and the carrier.
    pub fn for_problem(t_f: f64, max_rate: f64, tol: f64) -> Self {
        let n = (t_f * max_rate * 8.0).ceil() as usize;
        StepControl { initial_steps: n.clamp(64, 1 << 22), tol, max_doublings: 14 }
    }
}

/// Outcome of a verified two-level propagation.
#[derive(Debug, Clone)]
pub struct TwoLevelRun {
    pub psi: Vector2<C>,
    pub steps: usize,
    /// Difference to the run with twice the step size.
    pub discrepancy: f64,
}

/// Propagates `psi0` over `[0, t_f]`, doubling the step count until two
/// successive runs agree within `control.tol`.
pub fn propagate_two_level<H>(hamiltonian: H, psi0: &Vector2<C>, t_f: f64, control: StepControl) -> Result<TwoLevelRun>
where
    H: Fn(f64) -> Matrix2<C>,
{
    if !(t_f >= 0.0) {
        return Err(EstaError::domain(format!("final time must be non-negative, got {t_f}")));
    }
    if t_f == 0.0 {
        return Ok(TwoLevelRun { psi: *psi0, steps: 0, discrepancy: 0.0 });
    }
    let mut steps = control.initial_steps.max(1);
    let mut prev = evolve_unitary(&hamiltonian, 0.0, t_f, steps) * psi0;
    for _ in 0..control.max_doublings {
        steps *= 2;
        let next = evolve_unitary(&hamiltonian, 0.0, t_f, steps) * psi0;
        let discrepancy = (next - prev).norm();
        if discrepancy <= control.tol {
            return Ok(TwoLevelRun { psi: next, steps, discrepancy });
        }
        prev = next;
    }
    Err(EstaError::accuracy(format!(
        "two-level propagation did not reach tolerance {:.1e} with {steps} steps",
        control.tol
    )))
}
