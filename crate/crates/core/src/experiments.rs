//! Exact simulation of STA and corrected protocols and the sweeps built on
//! top of it.
//!
//! Transport runs are propagated by default in a frame that follows the
//! classical path `q_c(t)` and is boosted by `m qc'`:
//! `psi(x) = exp(i m qc' x + i gamma(t)) phi(x - q_c)`. The frame
//! wavefunction sees `W(u, t) = V(u + q_c; q_0(t)) + m qc'' u`, which for the
//! idealized Hamiltonian at the baseline is static up to a constant. The
//! transformation is exact and unitary, and since `qc'` vanishes at both
//! ends the fidelity with the displaced ground state is the overlap with
//! the ground state at the frame origin.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

use nalgebra::Vector2;
use num_complex::Complex64;

use crate::error::{EstaError, Result};
use crate::esta::{correct, correct_with_modes, EstaTerms};
use crate::models::{two_level_h, transport_potential, CaseId, CaseModel, HamiltonianKind};
use crate::modes::ModeSet;
use crate::propagators::{
    default_time_step, fidelity, gaussian_guess, propagate_two_level, sample_potential, Axis, GroundStateOptions,
    SpatialGrid, SplitStep, StepControl, WaveFunction,
};
use crate::quadrature::AdaptiveGl;
use crate::schemes::{build_corrected, ControlVector, Scheme, TransportScheme};

/// Reference frame of transport propagation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    #[default]
    CoMoving,
    Lab,
}

/// Numerical settings of the exact simulations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimOptions {
    pub frame: Frame,
    /// Fixed time step; the default is `min(0.002, dx^2 m / pi)`.
    pub dt: Option<f64>,
    /// Fixed number of points along the transport axis (power of two).
    pub points: Option<usize>,
    /// Fixed half-width of the transport axis around its centre.
    pub half_width: Option<f64>,
    /// Points along the relative axis of two ions.
    pub relative_points: usize,
    /// Upper bound on grid points along the transport axis.
    pub max_points: usize,
    /// Grid enlargements attempted after a grid error.
    pub grid_retries: usize,
    /// Aliasing threshold for edge populations.
    pub edge_tol: f64,
    /// Step-halving tolerance of two-level propagation.
    pub two_level_tol: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            frame: Frame::CoMoving,
            dt: None,
            points: None,
            half_width: None,
            relative_points: 32,
            max_points: 1 << 17,
            grid_retries: 3,
            edge_tol: 1e-8,
            two_level_tol: 1e-10,
        }
    }
}

/// Exact final fidelity of one protocol under one Hamiltonian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    pub fidelity: f64,
    /// Grid points per axis, empty for the two-level case.
    pub grid_points: Vec<usize>,
    pub steps: usize,
    pub norm_drift: f64,
}

/// Two-level simulation: population transferred from `|0>` to `|1>`.
pub fn simulate_two_level(model: &CaseModel, scheme: &Scheme, kind: HamiltonianKind, tol: f64) -> Result<SimOutcome> {
    let s = scheme.as_two_level().ok_or_else(|| EstaError::domain("two-level simulation needs a two-level scheme"))?;
    let t_f = s.t_f;
    let rate = 9.0 * std::f64::consts::PI / t_f + s.eps.norm() + 2.0 * model.omega_carrier * model.mu.min(1.0);
    let control = StepControl::for_problem(t_f, rate, tol);
    let psi0 = Vector2::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    let run = propagate_two_level(|t| two_level_h(kind, s, model, t), &psi0, t_f, control)?;
    Ok(SimOutcome { fidelity: run.psi[1].norm_sqr(), grid_points: Vec::new(), steps: run.steps, norm_drift: (run.psi.norm_squared() - 1.0).abs() })
}

fn relative_frequency() -> f64 {
    6f64.sqrt()
}

/// Transport simulator on a fixed grid with cached ground states.
pub struct TransportSimulator {
    model: CaseModel,
    frame: Frame,
    grid: SpatialGrid,
    masses: Vec<f64>,
    dt: f64,
    edge_tol: f64,
    x_r: Vec<f64>,
    /// `(initial, target)` per Hamiltonian kind: system first.
    states: [(WaveFunction, WaveFunction); 2],
}

fn kind_index(kind: HamiltonianKind) -> usize {
    match kind {
        HamiltonianKind::System => 0,
        HamiltonianKind::Idealized => 1,
    }
}

impl TransportSimulator {
    /// Sizes a grid for schemes whose largest lag `|q_c - q_0|` is `lag`.
    /// `enlarge` scales the resolution and width for retries.
    pub fn new(model: &CaseModel, lag: f64, opts: &SimOptions, enlarge: f64) -> Result<Self> {
        let mass = model.com_mass();
        let omega = model.com_frequency();
        let beta = (mass * omega).sqrt();
        let ell = 1.0 / beta;
        let k_max = enlarge * (6.0 * beta + 0.3 * mass * omega * lag);
        let dx = std::f64::consts::PI / k_max;
        let d = model.distance;
        let (center, half) = match opts.frame {
            Frame::CoMoving => (0.0, opts.half_width.unwrap_or(enlarge * (12.0 * ell + 0.5 * lag))),
            Frame::Lab => (0.5 * d, opts.half_width.unwrap_or(0.5 * d + enlarge * (12.0 * ell + 1.5 * lag))),
        };
        let axis = match opts.points {
            Some(n) => Axis::new(center - half, center + half, n)?,
            None => Axis::centered(center, half, dx, 64)?,
        };
        if axis.n > opts.max_points {
            return Err(EstaError::Grid(format!("transport grid needs {} points, above the limit {}", axis.n, opts.max_points)));
        }
        let (grid, masses) = if model.case == CaseId::TwoIon {
            let r_eq = model.r_eq();
            let ell_r = 1.0 / (model.total_mass * relative_frequency()).sqrt();
            let half_r = (8.0 * ell_r).min(0.75 * r_eq);
            let n_r = opts.relative_points;
            let r_axis = Axis::new(r_eq - half_r, r_eq + half_r, n_r)?;
            (SpatialGrid::two(axis, r_axis), vec![mass, model.total_mass])
        } else {
            (SpatialGrid::one(axis), vec![mass])
        };
        let dt = opts.dt.unwrap_or_else(|| default_time_step(&grid, &masses));
        let x_r = if grid.axes.len() > 1 { grid.axes[1].points() } else { vec![0.0] };
        let mut sim = TransportSimulator {
            model: *model,
            frame: opts.frame,
            grid,
            masses,
            dt,
            edge_tol: opts.edge_tol,
            x_r,
            states: [
                (WaveFunction::Spinor { amps: Vector2::zeros(), time: 0.0 }, WaveFunction::Spinor { amps: Vector2::zeros(), time: 0.0 }),
                (WaveFunction::Spinor { amps: Vector2::zeros(), time: 0.0 }, WaveFunction::Spinor { amps: Vector2::zeros(), time: 0.0 }),
            ],
        };
        for kind in [HamiltonianKind::System, HamiltonianKind::Idealized] {
            let initial = sim.ground_state(kind, 0.0)?;
            let target = match sim.frame {
                Frame::CoMoving => initial.clone(),
                Frame::Lab => sim.ground_state(kind, d)?,
            };
            sim.states[kind_index(kind)] = (initial, target);
        }
        Ok(sim)
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn ground_state(&self, kind: HamiltonianKind, center: f64) -> Result<WaveFunction> {
        let model = self.model;
        let v = sample_potential(&self.grid, |x, r| transport_potential(&model, kind, x, r.max(f64::MIN_POSITIVE), center));
        let ell = 1.0 / (model.com_mass() * model.com_frequency()).sqrt();
        let mut wells = vec![(center, ell)];
        if model.case == CaseId::TwoIon {
            wells.push((model.r_eq(), 1.0 / (model.total_mass * relative_frequency()).sqrt()));
        }
        let guess = gaussian_guess(&self.grid, &wells);
        let mut ss = SplitStep::new(&self.grid, &self.masses);
        let gs = ss.ground_state(&v, &guess, &GroundStateOptions::default()).map_err(|e| e.context("ground state"))?;
        Ok(gs.wf)
    }

    /// Initial state for a Hamiltonian kind.
    pub fn initial_state(&self, kind: HamiltonianKind) -> &WaveFunction {
        &self.states[kind_index(kind)].0
    }

    /// Fidelity of `scheme` under the Hamiltonian `kind`.
    pub fn run(&self, scheme: &TransportScheme, kind: HamiltonianKind) -> Result<SimOutcome> {
        let (initial, target) = &self.states[kind_index(kind)];
        let mut psi = initial.clone();
        let mut ss = SplitStep::new(&self.grid, &self.masses);
        ss.edge_tol = self.edge_tol;
        ss.checks = 64;
        let model = self.model;
        let mass = model.com_mass();
        let tr = &scheme.trajectory;
        let xs = self.grid.axes[0].points();
        let x_r = &self.x_r;
        let frame = self.frame;
        let stats = ss.propagate(&mut psi, 0.0, scheme.t_f(), self.dt, |t, out| {
            let q0 = scheme.q0(t);
            let (shift, force) = match frame {
                Frame::CoMoving => (tr.qc(t), mass * tr.qc_ddot(t)),
                Frame::Lab => (0.0, 0.0),
            };
            let ny = x_r.len();
            for (i, &u) in xs.iter().enumerate() {
                let x = u + shift;
                let lin = force * u;
                for (j, &r) in x_r.iter().enumerate() {
                    out[i * ny + j] = transport_potential(&model, kind, x, r, q0) + lin;
                }
            }
        })?;
        Ok(SimOutcome {
            fidelity: fidelity(&psi, target)?,
            grid_points: self.grid.axes.iter().map(|a| a.n).collect(),
            steps: stats.steps,
            norm_drift: stats.norm_drift,
        })
    }
}

/// Largest `|q_c - q_0|` over a set of transport schemes.
fn max_lag(schemes: &[&Scheme]) -> f64 {
    let mut lag: f64 = 0.0;
    for s in schemes {
        if let Some(ts) = s.as_transport() {
            let tr = &ts.trajectory;
            for i in 0..=2000 {
                let t = tr.t_f * i as f64 / 2000.0;
                lag = lag.max((tr.qc(t) - ts.q0(t)).abs());
            }
        }
    }
    lag
}

/// Runs every `(scheme, kind)` pair on one shared transport grid, enlarging
/// the grid after aliasing failures.
fn simulate_transport_batch(
    model: &CaseModel,
    jobs: &[(&Scheme, HamiltonianKind)],
    opts: &SimOptions,
) -> Result<Vec<SimOutcome>> {
    let schemes: Vec<&Scheme> = jobs.iter().map(|j| j.0).collect();
    let lag = max_lag(&schemes);
    let mut enlarge = 1.0;
    let mut last = None;
    for attempt in 0..=opts.grid_retries {
        let outcome = TransportSimulator::new(model, lag, opts, enlarge).and_then(|sim| {
            jobs.iter()
                .map(|(s, kind)| sim.run(s.as_transport().expect("transport scheme"), *kind))
                .collect::<Result<Vec<_>>>()
        });
        match outcome {
            Err(EstaError::Grid(msg)) if attempt < opts.grid_retries && opts.points.is_none() => {
                log::info!("grid attempt {attempt} failed ({msg}); enlarging");
                last = Some(msg);
                enlarge *= 1.5;
            }
            other => return other,
        }
    }
    Err(EstaError::Grid(last.unwrap_or_default()))
}

/// Exact fidelity of one scheme.
pub fn simulate(model: &CaseModel, scheme: &Scheme, kind: HamiltonianKind, opts: &SimOptions) -> Result<SimOutcome> {
    match model.case {
        CaseId::TwoLevel => simulate_two_level(model, scheme, kind, opts.two_level_tol),
        _ => Ok(simulate_transport_batch(model, &[(scheme, kind)], opts)?.remove(0)),
    }
}

/// Everything needed to reproduce one case study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseConfig {
    pub model: CaseModel,
    pub n_modes: usize,
    pub sim: SimOptions,
    #[serde(skip, default)]
    pub quad: AdaptiveGl,
}

impl CaseConfig {
    pub fn new(model: CaseModel) -> Self {
        CaseConfig { model, n_modes: 1, sim: SimOptions::default(), quad: AdaptiveGl::default() }
    }
}

/// Which of the four fidelities to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub sta: bool,
    pub esta: bool,
    pub idealized: bool,
}

impl Selection {
    pub const ALL: Selection = Selection { sta: true, esta: true, idealized: true };
    pub const SYSTEM: Selection = Selection { sta: true, esta: true, idealized: false };
}

/// Fidelities of one final time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityRecord {
    pub t_f: f64,
    pub f_sta: Option<f64>,
    pub f_esta: Option<f64>,
    pub f_esta_idealized: Option<f64>,
    pub f_sta_idealized: Option<f64>,
    pub eps: ControlVector,
    pub f_estimate: f64,
    pub degenerate: bool,
    pub grid_points: Vec<usize>,
    pub seconds: f64,
}

/// Builds the corrected scheme and runs the selected simulations.
pub fn run_case(config: &CaseConfig, t_f: f64, which: Selection) -> Result<FidelityRecord> {
    let start = Instant::now();
    let model = &config.model;
    let terms = correct(model, t_f, config.n_modes, &config.quad)?;
    run_with_terms(config, t_f, &terms, which, start)
}

fn run_with_terms(config: &CaseConfig, t_f: f64, terms: &EstaTerms, which: Selection, start: Instant) -> Result<FidelityRecord> {
    let model = &config.model;
    let sta = build_corrected(model, &ControlVector::zeros(terms.eps.dim()), t_f)?;
    let esta = build_corrected(model, &terms.eps, t_f)?;
    let mut jobs: Vec<(usize, &Scheme, HamiltonianKind)> = Vec::new();
    if which.sta {
        jobs.push((0, &sta, HamiltonianKind::System));
    }
    if which.esta {
        jobs.push((1, &esta, HamiltonianKind::System));
    }
    if which.idealized && which.esta {
        jobs.push((2, &esta, HamiltonianKind::Idealized));
    }
    if which.idealized && which.sta {
        jobs.push((3, &sta, HamiltonianKind::Idealized));
    }
    let mut values = [None; 4];
    let mut grid_points = Vec::new();
    match model.case {
        CaseId::TwoLevel => {
            for (slot, s, kind) in &jobs {
                values[*slot] = Some(simulate_two_level(model, s, *kind, config.sim.two_level_tol)?.fidelity);
            }
        }
        _ => {
            let batch: Vec<(&Scheme, HamiltonianKind)> = jobs.iter().map(|(_, s, k)| (*s, *k)).collect();
            let out = simulate_transport_batch(model, &batch, &config.sim)?;
            for ((slot, _, _), o) in jobs.iter().zip(&out) {
                values[*slot] = Some(o.fidelity);
            }
            grid_points = out.first().map(|o| o.grid_points.clone()).unwrap_or_default();
        }
    }
    Ok(FidelityRecord {
        t_f,
        f_sta: values[0],
        f_esta: values[1],
        f_esta_idealized: values[2],
        f_sta_idealized: values[3],
        eps: terms.eps.clone(),
        f_estimate: terms.f_estimate,
        degenerate: terms.degenerate,
        grid_points,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// One sweep row; failures are kept as messages so the sweep continues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub t_f: f64,
    pub record: Option<FidelityRecord>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: CaseConfig,
    pub rows: Vec<SweepRow>,
}

/// Evenly spaced final times, `steps` points including both ends.
pub fn tf_grid(min: f64, max: f64, steps: usize) -> Result<Vec<f64>> {
    if !(min > 0.0) || !(max >= min) || steps == 0 {
        return Err(EstaError::domain(format!("invalid t_f range [{min}, {max}] with {steps} steps")));
    }
    if steps == 1 {
        return Ok(vec![min]);
    }
    if !(max > min) {
        return Err(EstaError::domain(format!("t_f grid needs max > min for {steps} steps")));
    }
    Ok((0..steps).map(|i| min + (max - min) * i as f64 / (steps - 1) as f64).collect())
}

/// Runs `run_case` for every final time; rows run in parallel and keep
/// their order.
pub fn sweep_tf(config: &CaseConfig, t_fs: &[f64], which: Selection) -> Result<SweepResult> {
    if t_fs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(EstaError::domain("t_f grid must be strictly increasing"));
    }
    let rows = t_fs
        .par_iter()
        .map(|&t_f| match run_case(config, t_f, which) {
            Ok(r) => SweepRow { t_f, record: Some(r), error: None },
            Err(e) => {
                log::warn!("t_f = {t_f}: {e}");
                SweepRow { t_f, record: None, error: Some(e.to_string()) }
            }
        })
        .collect();
    Ok(SweepResult { config: config.clone(), rows })
}

/// Fidelity columns of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    Sta,
    Esta,
    EstaIdealized,
    StaIdealized,
}

impl Column {
    pub fn get(self, r: &FidelityRecord) -> Option<f64> {
        match self {
            Column::Sta => r.f_sta,
            Column::Esta => r.f_esta,
            Column::EstaIdealized => r.f_esta_idealized,
            Column::StaIdealized => r.f_sta_idealized,
        }
    }
}

/// Threshold time of one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    At(f64),
    NotReached,
}

impl Threshold {
    pub fn time(self) -> Option<f64> {
        match self {
            Threshold::At(t) => Some(t),
            Threshold::NotReached => None,
        }
    }
}

/// Smallest grid time from which every later row of `column` stays at or
/// above `level`. Rows that failed or lack the column break the tail.
pub fn threshold_time(sweep: &SweepResult, column: Column, level: f64) -> Threshold {
    let mut found = Threshold::NotReached;
    for row in sweep.rows.iter().rev() {
        match row.record.as_ref().and_then(|r| column.get(r)) {
            Some(f) if f >= level => found = Threshold::At(row.t_f),
            _ => break,
        }
    }
    found
}

/// Corrections for one and two excited modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub eps_n1: ControlVector,
    pub eps_n2: ControlVector,
    /// `|eps_N1 - eps_N2| / |eps_N1|` (zero when both vanish).
    pub deviation: f64,
}

pub fn compare_truncation(model: &CaseModel, t_f: f64, quad: &AdaptiveGl) -> Result<TruncationReport> {
    let modes = ModeSet::build(model, t_f)?;
    let one = correct_with_modes(model, t_f, modes.clone(), 1, quad)?;
    let two = correct_with_modes(model, t_f, modes, 2, quad)?;
    let diff = (&one.eps - &two.eps).norm();
    let deviation = if one.eps.norm() == 0.0 { diff } else { diff / one.eps.norm() };
    Ok(TruncationReport { eps_n1: one.eps, eps_n2: two.eps, deviation })
}

/// Exact fidelity as a function of the control vector near the baseline
/// (used for finite-difference gradients).
pub fn fidelity_at(config: &CaseConfig, t_f: f64, eps: &ControlVector, kind: HamiltonianKind) -> Result<f64> {
    let scheme = build_corrected(&config.model, eps, t_f)?;
    Ok(simulate(&config.model, &scheme, kind, &config.sim)?.fidelity)
}

/// Exact fidelities of several control vectors on one shared grid.
pub fn fidelities_at(config: &CaseConfig, t_f: f64, eps: &[ControlVector], kind: HamiltonianKind) -> Result<Vec<f64>> {
    let schemes = eps.iter().map(|e| build_corrected(&config.model, e, t_f)).collect::<Result<Vec<_>>>()?;
    match config.model.case {
        CaseId::TwoLevel => schemes
            .iter()
            .map(|s| simulate_two_level(&config.model, s, kind, config.sim.two_level_tol).map(|o| o.fidelity))
            .collect(),
        _ => {
            let jobs: Vec<(&Scheme, HamiltonianKind)> = schemes.iter().map(|s| (s, kind)).collect();
            Ok(simulate_transport_batch(&config.model, &jobs, &config.sim)?.into_iter().map(|o| o.fidelity).collect())
        }
    }
}

/// Sample potential of the frame used at time `t` (for diagnostics).
pub fn frame_potential(sim: &TransportSimulator, scheme: &TransportScheme, kind: HamiltonianKind, t: f64) -> Vec<f64> {
    let model = sim.model;
    let tr = &scheme.trajectory;
    let q0 = scheme.q0(t);
    let (shift, force) = match sim.frame {
        Frame::CoMoving => (tr.qc(t), model.com_mass() * tr.qc_ddot(t)),
        Frame::Lab => (0.0, 0.0),
    };
    sample_potential(&sim.grid, |u, r| transport_potential(&model, kind, u + shift, r, q0) + force * u)
}
