//! Fourier split-operator propagation on one- and two-dimensional grids,
//! in real and imaginary time.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use super::grid::{SpatialGrid, WaveFunction};
use crate::error::{EstaError, Result};
use crate::models::HBAR;

type C = Complex64;

/// Fraction of each axis treated as its edge when testing for aliasing.
const EDGE_FRACTION: f64 = 1.0 / 32.0;
/// Wavenumbers above this fraction of `k_max` count as the momentum edge.
const K_EDGE_FRACTION: f64 = 0.85;

/// Forward/inverse FFT over a [`SpatialGrid`]; the inverse is normalized.
pub struct Fourier {
    shape: (usize, usize),
    fwd_rows: Arc<dyn Fft<f64>>,
    inv_rows: Arc<dyn Fft<f64>>,
    fwd_cols: Arc<dyn Fft<f64>>,
    inv_cols: Arc<dyn Fft<f64>>,
    scratch: Vec<C>,
    column: Vec<C>,
}

impl Fourier {
    pub fn new(grid: &SpatialGrid) -> Self {
        let (nx, ny) = grid.shape();
        let mut planner = FftPlanner::new();
        let fwd_rows = planner.plan_fft_forward(ny);
        let inv_rows = planner.plan_fft_inverse(ny);
        let fwd_cols = planner.plan_fft_forward(nx);
        let inv_cols = planner.plan_fft_inverse(nx);
        let scratch_len = [&fwd_rows, &inv_rows, &fwd_cols, &inv_cols]
            .iter()
            .map(|f| f.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        Fourier {
            shape: (nx, ny),
            fwd_rows,
            inv_rows,
            fwd_cols,
            inv_cols,
            scratch: vec![C::new(0.0, 0.0); scratch_len],
            column: vec![C::new(0.0, 0.0); nx],
        }
    }

    fn transform(&mut self, data: &mut [C], inverse: bool) {
        let (nx, ny) = self.shape;
        let (rows, cols) = if inverse { (&self.inv_rows, &self.inv_cols) } else { (&self.fwd_rows, &self.fwd_cols) };
        if ny > 1 {
            for row in data.chunks_exact_mut(ny) {
                rows.process_with_scratch(row, &mut self.scratch);
            }
            for j in 0..ny {
                for i in 0..nx {
                    self.column[i] = data[i * ny + j];
                }
                cols.process_with_scratch(&mut self.column, &mut self.scratch);
                for i in 0..nx {
                    data[i * ny + j] = self.column[i];
                }
            }
        } else {
            cols.process_with_scratch(data, &mut self.scratch);
        }
        if inverse {
            let norm = 1.0 / (nx * ny) as f64;
            data.iter_mut().for_each(|z| *z *= norm);
        }
    }

    pub fn forward(&mut self, data: &mut [C]) {
        self.transform(data, false);
    }

    pub fn inverse(&mut self, data: &mut [C]) {
        self.transform(data, true);
    }
}

/// Kinetic energy `sum_k hbar^2 k^2 / (2 m_k)` on the FFT-ordered momentum grid.
pub fn kinetic_energies(grid: &SpatialGrid, masses: &[f64]) -> Vec<f64> {
    assert_eq!(grid.axes.len(), masses.len());
    let kx = grid.axes[0].wavenumbers();
    let ky = if grid.axes.len() > 1 { grid.axes[1].wavenumbers() } else { vec![0.0] };
    let my = if masses.len() > 1 { masses[1] } else { 1.0 };
    let mut out = Vec::with_capacity(grid.len());
    for kxi in &kx {
        for kyj in &ky {
            out.push(HBAR * HBAR * (kxi * kxi / (2.0 * masses[0]) + kyj * kyj / (2.0 * my)));
        }
    }
    out
}

/// Diagnostics of a real-time run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunStats {
    pub steps: usize,
    pub dt: f64,
    pub norm_drift: f64,
    /// Largest probability found in the position-edge strips.
    pub edge_position: f64,
    /// Largest probability found near the momentum cutoff.
    pub edge_momentum: f64,
}

/// Real-time split-step propagator for a Hamiltonian
/// `sum_k p_k^2 / (2 m_k) + V(x, t)`.
pub struct SplitStep {
    grid: SpatialGrid,
    fourier: Fourier,
    kinetic: Vec<f64>,
    potential: Vec<f64>,
    k_edge: Vec<bool>,
    x_edge: Vec<bool>,
    /// Population threshold for the aliasing checks.
    pub edge_tol: f64,
    /// Number of evenly spaced aliasing checks during a run.
    pub checks: usize,
}

impl SplitStep {
    pub fn new(grid: &SpatialGrid, masses: &[f64]) -> Self {
        let kinetic = kinetic_energies(grid, masses);
        let (nx, ny) = grid.shape();
        let kx = grid.axes[0].wavenumbers();
        let ky = if grid.axes.len() > 1 { grid.axes[1].wavenumbers() } else { vec![0.0] };
        let kxm = grid.axes[0].k_max();
        let kym = if grid.axes.len() > 1 { grid.axes[1].k_max() } else { f64::INFINITY };
        let ex = ((nx as f64 * EDGE_FRACTION).ceil() as usize).max(1);
        let ey = ((ny as f64 * EDGE_FRACTION).ceil() as usize).max(1);
        let mut k_edge = Vec::with_capacity(nx * ny);
        let mut x_edge = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            for j in 0..ny {
                k_edge.push(kx[i].abs() > K_EDGE_FRACTION * kxm || ky[j].abs() > K_EDGE_FRACTION * kym);
                let xe = i < ex || i >= nx - ex;
                let ye = ny > 1 && (j < ey || j >= ny - ey);
                x_edge.push(xe || ye);
            }
        }
        SplitStep {
            grid: grid.clone(),
            fourier: Fourier::new(grid),
            kinetic,
            potential: vec![0.0; nx * ny],
            k_edge,
            x_edge,
            edge_tol: 1e-8,
            checks: 8,
        }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    fn edge_populations(&self, amps: &[C], spectrum: bool) -> f64 {
        let mask = if spectrum { &self.k_edge } else { &self.x_edge };
        let (mut edge, mut total) = (0.0, 0.0);
        for (z, &m) in amps.iter().zip(mask) {
            let p = z.norm_sqr();
            total += p;
            if m {
                edge += p;
            }
        }
        edge / total
    }

    /// Propagates from `t0` to `t1` with equal steps no longer than
    /// `dt_max`. `potential(t, out)` fills the potential on the grid.
    ///
    /// Each step applies half a potential step, a full kinetic step in
    /// momentum space and another half potential step; consecutive half
    /// steps are merged.
    pub fn propagate<V>(&mut self, psi: &mut WaveFunction, t0: f64, t1: f64, dt_max: f64, mut potential: V) -> Result<RunStats>
    where
        V: FnMut(f64, &mut [f64]),
    {
        let WaveFunction::Grid { grid, amps, time } = psi else {
            return Err(EstaError::domain("split-step propagation needs a grid wavefunction"));
        };
        if *grid != self.grid {
            return Err(EstaError::domain("wavefunction grid differs from the propagator grid"));
        }
        if !(dt_max > 0.0) || !(t1 >= t0) {
            return Err(EstaError::domain(format!("invalid time interval [{t0}, {t1}] with dt {dt_max}")));
        }
        let cell = grid.cell();
        let norm0 = amps.iter().map(|z| z.norm_sqr()).sum::<f64>() * cell;
        let steps = ((t1 - t0) / dt_max).ceil().max(1.0) as usize;
        let dt = (t1 - t0) / steps as f64;
        let kin: Vec<C> = self.kinetic.iter().map(|&e| C::from_polar(1.0, -e * dt / HBAR)).collect();
        let check_every = (steps / self.checks.max(1)).max(1);
        let mut edge_x: f64 = 0.0;
        let mut edge_k: f64 = 0.0;

        potential(t0, &mut self.potential);
        apply_phase(amps, &self.potential, 0.5 * dt);
        for s in 0..steps {
            self.fourier.forward(amps);
            if s % check_every == 0 {
                edge_k = edge_k.max(self.edge_populations(amps, true));
            }
            for (z, k) in amps.iter_mut().zip(&kin) {
                *z *= k;
            }
            self.fourier.inverse(amps);
            let t = t0 + (s + 1) as f64 * dt;
            potential(t, &mut self.potential);
            let weight = if s + 1 == steps { 0.5 } else { 1.0 };
            apply_phase(amps, &self.potential, weight * dt);
            if s % check_every == 0 || s + 1 == steps {
                edge_x = edge_x.max(self.edge_populations(amps, false));
                self.check_edges(edge_x, edge_k, t)?;
            }
        }
        // final spectrum check
        let mut spectrum = amps.clone();
        self.fourier.forward(&mut spectrum);
        edge_k = edge_k.max(self.edge_populations(&spectrum, true));
        *time = t1;

        let norm1 = amps.iter().map(|z| z.norm_sqr()).sum::<f64>() * cell;
        self.check_edges(edge_x, edge_k, t1)?;
        Ok(RunStats { steps, dt, norm_drift: (norm1 - norm0).abs(), edge_position: edge_x, edge_momentum: edge_k })
    }

    fn check_edges(&self, edge_x: f64, edge_k: f64, t: f64) -> Result<()> {
        if edge_k > self.edge_tol {
            return Err(EstaError::Grid(format!(
                "momentum-edge population {edge_k:.2e} exceeds {:.1e} at t={t:.4}; refine the grid",
                self.edge_tol
            )));
        }
        if edge_x > self.edge_tol {
            return Err(EstaError::Grid(format!(
                "position-edge population {edge_x:.2e} exceeds {:.1e} at t={t:.4}; widen the grid",
                self.edge_tol
            )));
        }
        Ok(())
    }

    /// `<psi|H|psi> / <psi|psi>` for a static potential.
    pub fn energy(&mut self, psi: &[C], potential: &[f64]) -> f64 {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        let pot: f64 = psi.iter().zip(potential).map(|(z, v)| z.norm_sqr() * v).sum();
        let mut spec = psi.to_vec();
        self.fourier.forward(&mut spec);
        let n = spec.len() as f64;
        let kin: f64 = spec.iter().zip(&self.kinetic).map(|(z, e)| z.norm_sqr() * e).sum::<f64>() / n;
        (kin + pot) / norm
    }

    /// Imaginary-time relaxation towards the ground state of a static
    /// potential.
    pub fn ground_state(&mut self, potential: &[f64], guess: &WaveFunction, opts: &GroundStateOptions) -> Result<GroundState> {
        let WaveFunction::Grid { grid, amps, .. } = guess else {
            return Err(EstaError::domain("ground state search needs a grid wavefunction"));
        };
        if *grid != self.grid || potential.len() != grid.len() {
            return Err(EstaError::domain("guess/potential do not match the propagator grid"));
        }
        let cell = grid.cell();
        let mut psi = amps.clone();
        let mut iterations = 0usize;
        let mut energy = self.energy(&psi, potential);
        let normalize = |psi: &mut [C]| {
            let n = (psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * cell).sqrt();
            psi.iter_mut().for_each(|z| *z /= n);
        };
        let last = opts.steps.len().saturating_sub(1);
        for (stage, &dtau) in opts.steps.iter().enumerate() {
            let tol = if stage == last { opts.energy_tol } else { opts.stage_tol };
            let half_v: Vec<f64> = potential.iter().map(|v| (-0.5 * v * dtau / HBAR).exp()).collect();
            let kin: Vec<f64> = self.kinetic.iter().map(|e| (-e * dtau / HBAR).exp()).collect();
            let block = ((opts.block_time / dtau).ceil() as usize).max(1);
            let max_blocks = ((opts.max_time / opts.block_time).ceil() as usize).max(1);
            let mut converged = false;
            for _ in 0..max_blocks {
                for _ in 0..block {
                    psi.iter_mut().zip(&half_v).for_each(|(z, v)| *z *= v);
                    self.fourier.forward(&mut psi);
                    psi.iter_mut().zip(&kin).for_each(|(z, k)| *z *= k);
                    self.fourier.inverse(&mut psi);
                    psi.iter_mut().zip(&half_v).for_each(|(z, v)| *z *= v);
                    normalize(&mut psi);
                }
                iterations += block;
                let e = self.energy(&psi, potential);
                let delta = (e - energy).abs();
                energy = e;
                if delta < tol {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(EstaError::Convergence(format!(
                    "imaginary-time stage dtau={dtau} did not settle to {tol:.1e} within tau={}",
                    opts.max_time
                )));
            }
        }
        let wf = WaveFunction::on_grid(grid.clone(), psi);
        Ok(GroundState { wf, energy, iterations })
    }
}

fn apply_phase(amps: &mut [C], potential: &[f64], dt: f64) {
    for (z, v) in amps.iter_mut().zip(potential) {
        *z *= C::from_polar(1.0, -v * dt / HBAR);
    }
}

/// Schedule and tolerances of the imaginary-time search.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundStateOptions {
    /// Successively smaller imaginary time steps.
    pub steps: Vec<f64>,
    /// Energy change per block accepted in the intermediate stages.
    pub stage_tol: f64,
    /// Energy change per block accepted in the last stage.
    pub energy_tol: f64,
    /// Imaginary time between energy evaluations.
    pub block_time: f64,
    /// Imaginary time budget per stage.
    pub max_time: f64,
}

impl Default for GroundStateOptions {
    fn default() -> Self {
        GroundStateOptions { steps: vec![0.05, 0.01, 0.002], stage_tol: 1e-9, energy_tol: 1e-10, block_time: 0.5, max_time: 400.0 }
    }
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub wf: WaveFunction,
    pub energy: f64,
    pub iterations: usize,
}

/// Samples a static potential on a grid.
pub fn sample_potential<F: Fn(f64, f64) -> f64>(grid: &SpatialGrid, f: F) -> Vec<f64> {
    (0..grid.len()).map(|idx| {
        let (x, y) = grid.coords(idx);
        f(x, y)
    }).collect()
}
