//! Self-checks run by `esta validate`.

use esta::esta::{correct, correct_with_modes, gradient_step};
use esta::experiments::{compare_truncation, fidelities_at, simulate_two_level, CaseConfig};
use esta::models::{equilibrium_distance, relative_potential, CaseModel, HamiltonianKind};
use esta::modes::{ModeSet, TransportModes, TwoLevelModes};
use esta::oracle::{perturbative_terms, Perturbation};
use esta::quadrature::AdaptiveGl;
use esta::schemes::{ControlVector, Scheme, TwoLevelScheme};
use esta::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Level {
    Fast,
    Full,
}

pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

fn sta_two_level() -> Result<Check> {
    let model = CaseModel::two_level(1.0);
    let mut worst: f64 = 0.0;
    for k in [10.0, 17.0, 31.0] {
        let scheme = Scheme::TwoLevel(TwoLevelScheme::new(k * std::f64::consts::PI, &ControlVector::zeros(8))?);
        let f = simulate_two_level(&model, &scheme, HamiltonianKind::Idealized, 1e-10)?.fidelity;
        worst = worst.max((1.0 - f).abs());
    }
    Ok(check("two-level STA on H0", worst <= 1e-8, format!("max |1-F| = {worst:.2e}")))
}

fn sta_transport() -> Result<Check> {
    let cfg = CaseConfig::new(CaseModel::single_transport(1e5, 1562.0));
    let f = fidelities_at(&cfg, 20.0, &[ControlVector::zeros(6)], HamiltonianKind::Idealized)?[0];
    Ok(check("transport STA on H0", (1.0 - f).abs() <= 1e-6, format!("|1-F| = {:.2e}", (1.0 - f).abs())))
}

fn closed_forms(quad: &AdaptiveGl) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for (model, t_f) in [
        (CaseModel::single_transport(1e5, 1562.0), 20.0),
        (CaseModel::two_level(1.0), 8.0 * std::f64::consts::PI),
        (CaseModel::two_ion_desk(), 8.0),
    ] {
        let terms = correct(&model, t_f, 1, quad)?;
        let step = gradient_step(terms.f_estimate, &terms.grad_estimate);
        worst = worst.max(rel_diff(terms.eps.as_slice(), step.as_slice()));
    }
    Ok(check("correction forms agree", worst <= 1e-12, format!("max relative difference {worst:.2e}")))
}

fn gauge(quad: &AdaptiveGl) -> Result<Check> {
    let model = CaseModel::single_transport(1e5, 1562.0);
    let plain = correct(&model, 20.0, 2, quad)?;
    let modes = TransportModes::for_case(&model, 20.0)?.with_gauge(vec![0.7, -2.1, 1.3]);
    let turned = correct_with_modes(&model, 20.0, ModeSet::Transport(modes), 2, quad)?;
    let d1 = rel_diff(plain.eps.as_slice(), turned.eps.as_slice());
    let tl = CaseModel::two_level(1.0);
    let t_f = 9.0 * std::f64::consts::PI;
    let scheme = TwoLevelScheme::new(t_f, &ControlVector::zeros(8))?;
    let plain = correct(&tl, t_f, 1, quad)?;
    let modes = TwoLevelModes::new(&tl, &scheme, 1e-10)?.with_gauge([0.4, 2.5]);
    let turned = correct_with_modes(&tl, t_f, ModeSet::TwoLevel(modes), 1, quad)?;
    let d2 = rel_diff(plain.eps.as_slice(), turned.eps.as_slice());
    let worst = d1.max(d2);
    Ok(check("gauge invariance", worst <= 1e-10, format!("max relative change {worst:.2e}")))
}

fn mu_zero(quad: &AdaptiveGl) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for (model, t_f) in [
        (CaseModel::single_transport(1e5, 1562.0).with_mu(0.0), 20.0),
        (CaseModel::two_level(1.0).with_mu(0.0), 8.0 * std::f64::consts::PI),
    ] {
        worst = worst.max(correct(&model, t_f, 1, quad)?.eps.norm());
    }
    Ok(check("no correction without anharmonicity", worst == 0.0, format!("max |eps| = {worst:.2e}")))
}

fn oracle_symmetry() -> Result<Check> {
    let p = Perturbation::new(&CaseModel::single_transport(1e5, 1562.0), 20.0, 3)?;
    let mut worst: f64 = 0.0;
    for t in [0.5, 4.0, 11.3, 19.0] {
        for j in 1..=2 {
            for n in 0..=3 {
                for m in 0..=3 {
                    let a = p.alpha(j, n, m, t)?;
                    let b = p.alpha(j, m, n, t)?;
                    worst = worst.max((a - b.conj()).norm() / a.norm().max(1.0));
                }
            }
        }
    }
    Ok(check("matrix element symmetry", worst <= 1e-12, format!("max deviation {worst:.2e}")))
}

fn oracle_gradient(quad: &AdaptiveGl) -> Result<Check> {
    let model = CaseModel::single_transport(1e6, 1562.0);
    let terms = correct(&model, 20.0, 1, quad)?;
    let o = perturbative_terms(&model, 20.0, 1, quad)?;
    let d = rel_diff(&terms.grad_estimate, &o.gradient());
    Ok(check("series gradient matches estimate", d <= 1e-3, format!("relative difference {d:.2e}")))
}

/// Golden-section minimum of the relative potential.
fn minimize_relative(model: &CaseModel) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let guess = equilibrium_distance(model);
    let (mut a, mut b) = (guess * 0.1, guess * 10.0);
    for _ in 0..200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if relative_potential(model, c) < relative_potential(model, d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

fn equilibrium() -> Check {
    let mut worst: f64 = 0.0;
    for c in [7.35e7, 4.0] {
        let model = CaseModel::two_ion(1e7, 100.0, c);
        let closed = equilibrium_distance(&model);
        worst = worst.max((minimize_relative(&model) - closed).abs() / closed);
    }
    check("equilibrium distance", worst <= 1e-6, format!("max relative error {worst:.2e}"))
}

fn scaling(quad: &AdaptiveGl) -> Result<Check> {
    let mut residuals = Vec::new();
    for a in [1e5, 2e5, 4e5] {
        let model = CaseModel::single_transport(a, 1562.0);
        let f = fidelities_at(&CaseConfig::new(model), 25.0, &[ControlVector::zeros(6)], HamiltonianKind::System)?[0];
        residuals.push((f - correct(&model, 25.0, 1, quad)?.f_estimate).abs());
    }
    let ratios = [residuals[0] / residuals[1], residuals[1] / residuals[2]];
    let ok = ratios.iter().all(|r| (6.0..=10.0).contains(r));
    Ok(check("perturbative scaling", ok, format!("ratios {:.2} {:.2}", ratios[0], ratios[1])))
}

fn truncation(quad: &AdaptiveGl) -> Result<Check> {
    let a = compare_truncation(&CaseModel::single_transport(1e5, 1562.0), 20.0, quad)?.deviation;
    let b = compare_truncation(&CaseModel::two_ion_desk(), 8.0, quad)?.deviation;
    Ok(check("truncation N=1 vs N=2", a.max(b) < 1e-3, format!("deviations {a:.2e} {b:.2e}")))
}

fn fd_gradient(quad: &AdaptiveGl) -> Result<Check> {
    let model = CaseModel::single_transport(1e6, 1562.0);
    let t_f = 20.0;
    let terms = correct(&model, t_f, 1, quad)?;
    let h = 1e-3;
    let mut eps = Vec::new();
    for k in 0..6 {
        eps.push(ControlVector::unit(6, k, h));
        eps.push(ControlVector::unit(6, k, -h));
    }
    let f = fidelities_at(&CaseConfig::new(model), t_f, &eps, HamiltonianKind::System)?;
    let mut worst: f64 = 0.0;
    for k in 0..6 {
        let fd = (f[2 * k] - f[2 * k + 1]) / (2.0 * h);
        if fd.abs() > 1e-8 {
            worst = worst.max((terms.grad_estimate[k] - fd).abs() / fd.abs());
        }
    }
    Ok(check("gradient vs finite differences", worst <= 0.05, format!("max relative error {worst:.2e}")))
}

/// Runs the checks of a level. Numerical failures abort with an error.
pub fn run(level: Level) -> Result<Vec<Check>> {
    let quad = AdaptiveGl::default();
    let mut out = vec![
        sta_two_level()?,
        sta_transport()?,
        closed_forms(&quad)?,
        gauge(&quad)?,
        mu_zero(&quad)?,
        oracle_symmetry()?,
        oracle_gradient(&quad)?,
        equilibrium(),
    ];
    if level == Level::Full {
        out.push(scaling(&quad)?);
        out.push(truncation(&quad)?);
        out.push(fd_gradient(&quad)?);
    }
    Ok(out)
}
