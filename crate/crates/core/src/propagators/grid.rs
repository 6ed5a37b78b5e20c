//! Periodic spatial grids and wavefunctions.

use nalgebra::Vector2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{EstaError, Result};

/// One periodic axis: `n` points `min + i (max - min) / n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, n: usize) -> Result<Self> {
        if !(max > min) {
            return Err(EstaError::Grid(format!("axis must have max > min, got [{min}, {max}]")));
        }
        if n < 2 || !n.is_power_of_two() {
            return Err(EstaError::Grid(format!("axis point count must be a power of two, got {n}")));
        }
        Ok(Axis { min, max, n })
    }

    /// Axis centred on `center` with half-width `half` and spacing at most `dx`.
    pub fn centered(center: f64, half: f64, dx: f64, min_points: usize) -> Result<Self> {
        let n = ((2.0 * half / dx).ceil() as usize).max(min_points).next_power_of_two();
        Axis::new(center - half, center + half, n)
    }

    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / self.n as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        self.min + i as f64 * self.spacing()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let dk = 2.0 * PI / (self.max - self.min);
        (0..self.n)
            .map(|i| if i < self.n / 2 { i as f64 * dk } else { (i as f64 - self.n as f64) * dk })
            .collect()
    }

    pub fn k_max(&self) -> f64 {
        PI / self.spacing()
    }
}

/// Grid of one or two axes; amplitudes are stored row-major with the last
/// axis contiguous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    pub axes: Vec<Axis>,
}

impl SpatialGrid {
    pub fn one(axis: Axis) -> Self {
        SpatialGrid { axes: vec![axis] }
    }

    pub fn two(x: Axis, y: Axis) -> Self {
        SpatialGrid { axes: vec![x, y] }
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Volume element.
    pub fn cell(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing()).product()
    }

    /// `(n_rows, n_cols)`, with `n_cols = 1` on one-dimensional grids.
    pub fn shape(&self) -> (usize, usize) {
        match self.axes.len() {
            1 => (self.axes[0].n, 1),
            _ => (self.axes[0].n, self.axes[1].n),
        }
    }

    /// Coordinates `(x, y)` of a flat index (`y = 0` in one dimension).
    pub fn coords(&self, idx: usize) -> (f64, f64) {
        let (_, ny) = self.shape();
        let (i, j) = (idx / ny, idx % ny);
        let x = self.axes[0].point(i);
        let y = if self.axes.len() > 1 { self.axes[1].point(j) } else { 0.0 };
        (x, y)
    }

    /// Samples a function on the grid.
    pub fn sample<F: Fn(f64, f64) -> Complex64>(&self, f: F) -> Vec<Complex64> {
        (0..self.len()).map(|idx| {
            let (x, y) = self.coords(idx);
            f(x, y)
        }).collect()
    }
}

/// State vector: grid amplitudes or a two-level spinor.
#[derive(Debug, Clone, PartialEq)]
pub enum WaveFunction {
    Spinor { amps: Vector2<Complex64>, time: f64 },
    Grid { grid: SpatialGrid, amps: Vec<Complex64>, time: f64 },
}

impl WaveFunction {
    pub fn spinor(amps: Vector2<Complex64>) -> Self {
        WaveFunction::Spinor { amps, time: 0.0 }
    }

    pub fn on_grid(grid: SpatialGrid, amps: Vec<Complex64>) -> Self {
        assert_eq!(grid.len(), amps.len());
        WaveFunction::Grid { grid, amps, time: 0.0 }
    }

    pub fn time(&self) -> f64 {
        match self {
            WaveFunction::Spinor { time, .. } | WaveFunction::Grid { time, .. } => *time,
        }
    }

    pub fn set_time(&mut self, t: f64) {
        match self {
            WaveFunction::Spinor { time, .. } | WaveFunction::Grid { time, .. } => *time = t,
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        match self {
            WaveFunction::Spinor { amps, .. } => amps.norm_squared(),
            WaveFunction::Grid { grid, amps, .. } => amps.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.cell(),
        }
    }

    pub fn normalize(&mut self) {
        let n = self.norm_sqr().sqrt();
        match self {
            WaveFunction::Spinor { amps, .. } => *amps /= Complex64::new(n, 0.0),
            WaveFunction::Grid { amps, .. } => amps.iter_mut().for_each(|z| *z /= n),
        }
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &WaveFunction) -> Result<Complex64> {
        match (self, other) {
            (WaveFunction::Spinor { amps: a, .. }, WaveFunction::Spinor { amps: b, .. }) => Ok(a.dotc(b)),
            (WaveFunction::Grid { grid: ga, amps: a, .. }, WaveFunction::Grid { grid: gb, amps: b, .. }) => {
                if ga != gb {
                    return Err(EstaError::domain("wavefunctions live on different grids"));
                }
                Ok(a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>() * ga.cell())
            }
            _ => Err(EstaError::domain("cannot compare a spinor with a grid wavefunction")),
        }
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        match self {
            WaveFunction::Spinor { amps, .. } => amps.as_slice(),
            WaveFunction::Grid { amps, .. } => amps,
        }
    }

    pub fn grid(&self) -> Option<&SpatialGrid> {
        match self {
            WaveFunction::Grid { grid, .. } => Some(grid),
            _ => None,
        }
    }

    /// Expectation value of the first coordinate.
    pub fn mean_position(&self, axis: usize) -> Option<f64> {
        let WaveFunction::Grid { grid, amps, .. } = self else { return None };
        let mut acc = 0.0;
        let mut norm = 0.0;
        for (idx, z) in amps.iter().enumerate() {
            let (x, y) = grid.coords(idx);
            let p = z.norm_sqr();
            acc += p * if axis == 0 { x } else { y };
            norm += p;
        }
        Some(acc / norm)
    }

    /// Multiplies every amplitude by a unit phase.
    pub fn with_global_phase(mut self, phi: f64) -> Self {
        let f = Complex64::from_polar(1.0, phi);
        match &mut self {
            WaveFunction::Spinor { amps, .. } => *amps *= f,
            WaveFunction::Grid { amps, .. } => amps.iter_mut().for_each(|z| *z *= f),
        }
        self
    }
}

/// `|<target|state>|^2`.
pub fn fidelity(state: &WaveFunction, target: &WaveFunction) -> Result<f64> {
    Ok(target.inner(state)?.norm_sqr())
}

/// Product of Gaussian ground states of harmonic wells, one per axis:
/// `(center, oscillator length)`.
pub fn gaussian_guess(grid: &SpatialGrid, wells: &[(f64, f64)]) -> WaveFunction {
    let amps = grid.sample(|x, y| {
        let mut e = 0.0;
        for (k, &(c, l)) in wells.iter().enumerate() {
            let v = if k == 0 { x } else { y };
            e += -0.5 * ((v - c) / l).powi(2);
        }
        Complex64::new(e.exp(), 0.0)
    });
    let mut wf = WaveFunction::on_grid(grid.clone(), amps);
    wf.normalize();
    wf
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_validation() {
        assert!(Axis::new(0.0, 1.0, 100).is_err());
        assert!(Axis::new(1.0, 0.0, 128).is_err());
        let a = Axis::centered(0.0, 10.0, 0.25, 16).unwrap();
        assert_eq!(a.n, 128);
        assert!(a.spacing() <= 0.25);
        let k = a.wavenumbers();
        assert_eq!(k[0], 0.0);
        assert!(k[a.n / 2] < 0.0);
    }

    #[test]
    fn fidelity_basics() {
        let g = SpatialGrid::one(Axis::new(-10.0, 10.0, 256).unwrap());
        let a = gaussian_guess(&g, &[(0.0, 1.0)]);
        assert!((fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let rotated = a.clone().with_global_phase(1.234);
        assert!((fidelity(&rotated, &a).unwrap() - 1.0).abs() < 1e-12);
        // first excited state is orthogonal
        let odd = WaveFunction::on_grid(g.clone(), g.sample(|x, _| Complex64::new(x * (-0.5 * x * x).exp(), 0.0)));
        assert!(fidelity(&odd, &a).unwrap() < 1e-20);
        let s = WaveFunction::spinor(Vector2::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)));
        assert!(matches!(fidelity(&s, &a), Err(EstaError::Domain(_))));
        let other = SpatialGrid::one(Axis::new(-10.0, 10.0, 512).unwrap());
        let b = gaussian_guess(&other, &[(0.0, 1.0)]);
        assert!(fidelity(&b, &a).is_err());
    }
}
