//! First-order correction of an STA protocol.
//!
//! With `G_n = int <chi_n|H_S - H_0|chi_0> dt` and
//! `K_n = int <chi_n|grad H_S|chi_0> dt`, the fidelity near the baseline is
//! modelled as `F ~ 1 - sum |G_n|^2` with gradient `-2 sum Re(G_n K_n*)`,
//! and the correction is the step to the vertex of that paraboloid.

use nalgebra::Vector2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{EstaError, Result};
use crate::models::{two_level_grad_with_basis, two_level_matrix, CaseId, CaseModel, HBAR};
use crate::modes::{HermiteTable, ModeSet, TransportModes, TwoLevelModes};
use crate::poly::Polynomial;
use crate::quadrature::AdaptiveGl;
use crate::schemes::{knot_basis, lambda0, sta_pulse_unchecked, ControlVector, TRANSPORT_DIM, TWO_LEVEL_DIM};

type C = Complex64;

/// Relative size of `|R|` below which the gradient counts as degenerate.
pub const DEGENERATE_RATIO: f64 = 1e-12;

/// Matrix elements entering the time integrals of `G_n` and `K_n`.
pub trait CorrectionProblem: Sync {
    fn t_f(&self) -> f64;
    /// Control dimension.
    fn dim(&self) -> usize;
    /// Number of excited modes `N`.
    fn modes(&self) -> usize;
    /// `<chi_n|H_S - H_0|chi_0>` for `n = 1..=N`.
    fn gap_elements(&self, t: f64) -> Vec<C>;
    /// `<chi_n|d H_S / d lambda_k|chi_0>`, mode-major.
    fn grad_elements(&self, t: f64) -> Vec<C>;
}

pub struct TwoLevelProblem {
    model: CaseModel,
    modes: TwoLevelModes,
    basis: Vec<Polynomial>,
}

impl TwoLevelProblem {
    pub fn new(model: &CaseModel, modes: TwoLevelModes) -> Result<Self> {
        let basis = knot_basis(4, modes.t_f())?;
        Ok(TwoLevelProblem { model: *model, modes, basis })
    }

    fn states(&self, t: f64) -> (Vector2<C>, Vector2<C>) {
        let u = self.modes.propagator(t);
        (u.column(0).into_owned(), u.column(1).into_owned())
    }
}

impl CorrectionProblem for TwoLevelProblem {
    fn t_f(&self) -> f64 {
        self.modes.t_f()
    }

    fn dim(&self) -> usize {
        TWO_LEVEL_DIM
    }

    fn modes(&self) -> usize {
        1
    }

    fn gap_elements(&self, t: f64) -> Vec<C> {
        let (chi0, chi1) = self.states(t);
        let (omega, _) = sta_pulse_unchecked(t, self.t_f());
        let w = self.model.omega_carrier;
        let gap = two_level_matrix(omega, 0.0, self.model.mu, w, t) - two_level_matrix(omega, 0.0, 0.0, w, t);
        vec![chi1.dotc(&(gap * chi0))]
    }

    fn grad_elements(&self, t: f64) -> Vec<C> {
        let (chi0, chi1) = self.states(t);
        two_level_grad_with_basis(&self.basis, &self.model, t)
            .iter()
            .map(|g| chi1.dotc(&(g * chi0)))
            .collect()
    }
}

pub struct TransportProblem {
    model: CaseModel,
    modes: TransportModes,
    n_modes: usize,
    basis: Vec<Polynomial>,
    table: HermiteTable,
    /// Frozen ion separation parameter (zero for one particle).
    x_r: f64,
}

impl TransportProblem {
    /// Chooses a Gauss–Hermite rule that is converged at a set of sample
    /// times for every matrix element used.
    pub fn new(model: &CaseModel, modes: TransportModes, n_modes: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(EstaError::domain("at least one excited mode is required"));
        }
        let t_f = modes.trajectory.t_f;
        let x_r = if model.case == CaseId::TwoIon { model.r_eq() } else { 0.0 };
        let mut p = TransportProblem {
            model: *model,
            basis: knot_basis(TRANSPORT_DIM, t_f)?,
            table: modes.table(n_modes, 0),
            modes,
            n_modes,
            x_r,
        };
        let mut level = 0;
        for i in 0..=32 {
            let t = t_f * i as f64 / 32.0;
            let q0 = p.modes.trajectory.q0(t);
            for n in 1..=n_modes {
                level = level.max(p.modes.converged_level(n, 0, t, |x| p.gap(x, q0))?);
                level = level.max(p.modes.converged_level(n, 0, t, |x| p.slope(x, q0))?);
            }
        }
        // the verified estimate is the one on the next finer rule
        p.table = p.modes.table(n_modes, (level + 1).min(3));
        Ok(p)
    }

    /// `V_S - V_0` at centre-of-mass position `x`.
    pub fn gap(&self, x: f64, q0: f64) -> f64 {
        let trap = self.model.trap();
        match self.model.case {
            CaseId::TwoIon => trap.gap(x + self.x_r - q0) + trap.gap(x - self.x_r - q0),
            _ => trap.gap(x - q0),
        }
    }

    /// `dV_S/dx` with the trap held at `q0`.
    pub fn slope(&self, x: f64, q0: f64) -> f64 {
        let trap = self.model.trap();
        match self.model.case {
            CaseId::TwoIon => trap.system_slope(x + self.x_r - q0) + trap.system_slope(x - self.x_r - q0),
            _ => trap.system_slope(x - q0),
        }
    }

    pub fn transport_modes(&self) -> &TransportModes {
        &self.modes
    }
}

impl CorrectionProblem for TransportProblem {
    fn t_f(&self) -> f64 {
        self.modes.trajectory.t_f
    }

    fn dim(&self) -> usize {
        TRANSPORT_DIM
    }

    fn modes(&self) -> usize {
        self.n_modes
    }

    fn gap_elements(&self, t: f64) -> Vec<C> {
        let tr = &self.modes.trajectory;
        let (qc, q0) = (tr.qc(t), tr.q0(t));
        (1..=self.n_modes)
            .map(|n| self.modes.phase_factor(n, 0, t) * self.table.element(n, 0, qc, |x| self.gap(x, q0)).0)
            .collect()
    }

    fn grad_elements(&self, t: f64) -> Vec<C> {
        let tr = &self.modes.trajectory;
        let (qc, q0) = (tr.qc(t), tr.q0(t));
        let b: Vec<f64> = self.basis.iter().map(|p| p.eval(t)).collect();
        let mut out = Vec::with_capacity(self.n_modes * b.len());
        for n in 1..=self.n_modes {
            let force = -self.modes.phase_factor(n, 0, t) * self.table.element(n, 0, qc, |x| self.slope(x, q0)).0;
            out.extend(b.iter().map(|bj| force * bj));
        }
        out
    }
}

/// `G_n` and `K_n` together with the derived correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstaTerms {
    pub g: Vec<C>,
    pub k: Vec<Vec<C>>,
    pub n_modes: usize,
    pub eps: ControlVector,
    pub lambda0: ControlVector,
    pub lambda_s: ControlVector,
    pub f_estimate: f64,
    pub grad_estimate: Vec<f64>,
    /// The gradient was degenerate and the baseline was kept.
    pub degenerate: bool,
}

/// Integrates the matrix elements of a problem over `[0, t_f]`.
pub fn integrate_terms(problem: &dyn CorrectionProblem, quad: &AdaptiveGl) -> Result<(Vec<C>, Vec<Vec<C>>)> {
    let (n, d, t_f) = (problem.modes(), problem.dim(), problem.t_f());
    let g = quad
        .integrate(0.0, t_f, n, |t| problem.gap_elements(t))
        .map_err(|e| e.context("integrating G_n"))?;
    let flat = quad
        .integrate(0.0, t_f, n * d, |t| problem.grad_elements(t))
        .map_err(|e| e.context("integrating K_n"))?;
    let k = flat.chunks(d).map(|c| c.to_vec()).collect();
    Ok((g, k))
}

/// `G_n` for a single mode `n >= 1`.
pub fn compute_g(problem: &dyn CorrectionProblem, n: usize, quad: &AdaptiveGl) -> Result<C> {
    check_mode(problem, n)?;
    let v = quad.integrate(0.0, problem.t_f(), 1, |t| vec![problem.gap_elements(t)[n - 1]])?;
    Ok(v[0])
}

/// `K_n` for a single mode `n >= 1`.
pub fn compute_k(problem: &dyn CorrectionProblem, n: usize, quad: &AdaptiveGl) -> Result<Vec<C>> {
    check_mode(problem, n)?;
    let d = problem.dim();
    quad.integrate(0.0, problem.t_f(), d, |t| problem.grad_elements(t)[(n - 1) * d..n * d].to_vec())
}

fn check_mode(problem: &dyn CorrectionProblem, n: usize) -> Result<()> {
    if n == 0 || n > problem.modes() {
        return Err(EstaError::domain(format!("mode index must be in 1..={}, got {n}", problem.modes())));
    }
    Ok(())
}

/// `R = sum Re(G_n* K_n)`.
fn r_vector(g: &[C], k: &[Vec<C>]) -> Vec<f64> {
    let d = k.first().map_or(0, |v| v.len());
    let mut r = vec![0.0; d];
    for (gn, kn) in g.iter().zip(k) {
        for (rj, kj) in r.iter_mut().zip(kn) {
            *rj += (gn.conj() * kj).re;
        }
    }
    r
}

/// `eps = -(sum |G_n|^2) R / |R|^2`.
pub fn esta_correction(g: &[C], k: &[Vec<C>]) -> Result<ControlVector> {
    let d = k.first().map_or(0, |v| v.len());
    let g2: f64 = g.iter().map(|z| z.norm_sqr()).sum();
    if g2 == 0.0 {
        return Ok(ControlVector::zeros(d));
    }
    let r = r_vector(g, k);
    let r2: f64 = r.iter().map(|x| x * x).sum();
    let g_abs: f64 = g.iter().map(|z| z.norm()).sum();
    let k_max = k.iter().map(|v| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).fold(0.0, f64::max);
    let threshold = DEGENERATE_RATIO * g_abs * k_max;
    if !(r2.sqrt() > threshold) {
        return Err(EstaError::DegenerateGradient { norm: r2.sqrt(), threshold });
    }
    Ok(ControlVector(r.iter().map(|rj| -g2 * rj / r2).collect()))
}

/// `1 - sum |G_n|^2 / hbar^2`.
pub fn fidelity_estimate(g: &[C]) -> f64 {
    1.0 - g.iter().map(|z| z.norm_sqr()).sum::<f64>() / (HBAR * HBAR)
}

/// `-(2 / hbar^2) sum Re(G_n K_n*)`.
pub fn gradient_estimate(g: &[C], k: &[Vec<C>]) -> Vec<f64> {
    let d = k.first().map_or(0, |v| v.len());
    let mut out = vec![0.0; d];
    for (gn, kn) in g.iter().zip(k) {
        for (o, kj) in out.iter_mut().zip(kn) {
            *o -= 2.0 * (gn * kj.conj()).re / (HBAR * HBAR);
        }
    }
    out
}

/// The correction written as a step along the estimated gradient:
/// `2 (1 - F) / |grad F|^2 grad F`.
pub fn gradient_step(f_estimate: f64, grad: &[f64]) -> ControlVector {
    let n2: f64 = grad.iter().map(|x| x * x).sum();
    if n2 == 0.0 {
        return ControlVector::zeros(grad.len());
    }
    ControlVector(grad.iter().map(|gj| 2.0 * (1.0 - f_estimate) / n2 * gj).collect())
}

/// Assembles [`EstaTerms`] from integrated `G_n` and `K_n`. A degenerate
/// gradient keeps the baseline and sets the flag.
pub fn assemble_terms(g: Vec<C>, k: Vec<Vec<C>>, lambda0: ControlVector) -> Result<EstaTerms> {
    let (eps, degenerate) = match esta_correction(&g, &k) {
        Ok(eps) => (eps, false),
        Err(EstaError::DegenerateGradient { norm, threshold }) => {
            log::warn!("degenerate correction gradient |R| = {norm:.3e} < {threshold:.3e}; keeping the baseline");
            (ControlVector::zeros(lambda0.dim()), true)
        }
        Err(e) => return Err(e),
    };
    let lambda_s = &lambda0 + &eps;
    Ok(EstaTerms {
        n_modes: g.len(),
        f_estimate: fidelity_estimate(&g),
        grad_estimate: gradient_estimate(&g, &k),
        g,
        k,
        eps,
        lambda0,
        lambda_s,
        degenerate,
    })
}

/// Correction problem for a case with prepared modes. Two-level problems
/// always use their single excited mode.
pub fn problem_for(model: &CaseModel, modes: ModeSet, n_modes: usize) -> Result<Box<dyn CorrectionProblem>> {
    match modes {
        ModeSet::TwoLevel(m) => Ok(Box::new(TwoLevelProblem::new(model, m)?)),
        ModeSet::Transport(m) => Ok(Box::new(TransportProblem::new(model, m, n_modes)?)),
    }
}

/// Computes the correction of the STA baseline of `model` at `t_f`.
pub fn correct(model: &CaseModel, t_f: f64, n_modes: usize, quad: &AdaptiveGl) -> Result<EstaTerms> {
    model.validate()?;
    if !(t_f > 0.0) {
        return Err(EstaError::domain(format!("final time must be positive, got {t_f}")));
    }
    let modes = ModeSet::build(model, t_f)?;
    correct_with_modes(model, t_f, modes, n_modes, quad)
}

pub fn correct_with_modes(model: &CaseModel, t_f: f64, modes: ModeSet, n_modes: usize, quad: &AdaptiveGl) -> Result<EstaTerms> {
    let problem = problem_for(model, modes, n_modes)?;
    let (g, k) = integrate_terms(problem.as_ref(), quad)?;
    assemble_terms(g, k, lambda0(model, t_f)?)
}
