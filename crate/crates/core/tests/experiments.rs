use esta::experiments::{
    fidelities_at, run_case, sweep_tf, tf_grid, CaseConfig, Frame, Selection, SimOptions, TransportSimulator,
};
use esta::models::{CaseModel, HamiltonianKind};
use esta::schemes::ControlVector;

#[test]
fn lab_and_co_moving_frames_agree() {
    let model = CaseModel::single_transport(1e3, 20.0);
    let mut eps = ControlVector::zeros(6);
    eps.0[2] = 0.05;
    let controls = [ControlVector::zeros(6), eps];
    let mut co = CaseConfig::new(model);
    co.sim.dt = Some(5e-4);
    let mut lab = co.clone();
    lab.sim.frame = Frame::Lab;
    for kind in [HamiltonianKind::System, HamiltonianKind::Idealized] {
        let a = fidelities_at(&co, 6.0, &controls, kind).unwrap();
        let b = fidelities_at(&lab, 6.0, &controls, kind).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-6, "{kind:?}: {x} vs {y}");
        }
    }
}

#[test]
fn two_ion_ground_state_sits_at_equilibrium() {
    let model = CaseModel::two_ion_desk();
    let sim = TransportSimulator::new(&model, 0.0, &SimOptions::default(), 1.0).unwrap();
    for kind in [HamiltonianKind::System, HamiltonianKind::Idealized] {
        let wf = sim.initial_state(kind);
        let r = wf.mean_position(1).unwrap();
        assert!((r - model.r_eq()).abs() < 0.1, "{kind:?}: {r}");
        assert!(wf.mean_position(0).unwrap().abs() < 1e-8);
    }
}

#[test]
fn without_anharmonicity_esta_is_sta() {
    let model = CaseModel::single_transport(1e5, 1562.0).with_mu(0.0);
    let r = run_case(&CaseConfig::new(model), 20.0, Selection::ALL).unwrap();
    assert!(r.eps.is_zero());
    assert_eq!(r.f_sta, r.f_esta);
    assert_eq!(r.f_sta_idealized, r.f_esta_idealized);
    assert!((1.0 - r.f_sta.unwrap()).abs() < 1e-6);
}

#[test]
fn sweep_fidelities_are_probabilities() {
    let cfg = CaseConfig::new(CaseModel::single_transport(1e5, 1562.0));
    let s = sweep_tf(&cfg, &tf_grid(16.0, 30.0, 4).unwrap(), Selection::ALL).unwrap();
    assert_eq!(s.rows.len(), 4);
    for row in &s.rows {
        let r = row.record.as_ref().unwrap();
        for f in [r.f_sta, r.f_esta, r.f_esta_idealized, r.f_sta_idealized] {
            let f = f.unwrap();
            assert!((-1e-9..=1.0 + 1e-9).contains(&f), "{f}");
        }
        assert!((1.0 - r.f_sta_idealized.unwrap()).abs() < 1e-6);
        assert!(r.f_esta.unwrap() >= r.f_sta.unwrap());
    }
}

#[test]
fn sweep_rejects_unordered_grids() {
    let cfg = CaseConfig::new(CaseModel::two_level(1.0));
    assert!(sweep_tf(&cfg, &[30.0, 20.0], Selection::ALL).is_err());
}
