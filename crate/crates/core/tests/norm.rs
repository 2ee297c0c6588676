mod common;

use std::f64::consts::PI;

use approx::assert_relative_eq;
use common::{log_weight_dense, p_example1, p_example2, phi_dense, Oracle};
use evoscope::norm::*;
use evoscope::witness::{make_plateau, random_bumps, PlateauSpec};
use evoscope::{
    Analysis, BuiltinMatrix, EvolutionFamily, GridFunction, IntegratorConfig, SupSampling, Thresholds, TimeGrid,
};

fn plain(f: EvolutionFamily, h: f64, t_max: f64) -> Analysis {
    Analysis::plain(f, TimeGrid::uniform(h, t_max).unwrap()).unwrap()
}

fn constant(an: &Analysis, x: &[f64]) -> GridFunction {
    GridFunction::from_fn(an.grid().clone(), x.len(), |_, o| o.copy_from_slice(x))
}

#[test]
fn phi_matches_dense_sup_on_the_same_nodes() {
    let cases: Vec<(Analysis, Oracle, f64)> = vec![
        (plain(EvolutionFamily::example1(), 0.05, 30.0), Oracle::Potential(p_example1), -0.5),
        (plain(EvolutionFamily::example2(), 0.05, 30.0), Oracle::Potential(p_example2), 0.0),
        (plain(EvolutionFamily::constant_decay(1.0, 1).unwrap(), 0.05, 30.0), Oracle::Decay(1.0), 0.3),
        (
            plain(
                EvolutionFamily::builtin(BuiltinMatrix::Shear, IntegratorConfig { step: 0.05, horizon: 30.0, tolerance: 1e-8 }),
                0.05,
                30.0,
            ),
            Oracle::Shear,
            0.0,
        ),
    ];
    for (an, o, alpha) in cases {
        let nodes = an.grid().points().to_vec();
        let u = &random_bumps(&an, 3, 11)[2];
        let prof = phi_profile(&an, alpha, u).unwrap();
        for (i, &t) in nodes.iter().enumerate().step_by(7) {
            let expected = phi_dense(o, alpha, &nodes, t, u.at(i));
            assert_relative_eq!(prof.phi_values[i], expected, max_relative = 1e-7, epsilon = 1e-300);
        }
        let lw = weight_profile(&an, alpha).log_w;
        for (i, &t) in nodes.iter().enumerate().step_by(13) {
            assert!((lw[i] - log_weight_dense(o, alpha, &nodes, t)).abs() <= 1e-7, "{}", an.family().describe());
        }
    }
}

#[test]
fn example1_phi_at_quarter_turn() {
    // sup_{τ >= π/2} e^{(τ−π/2)} e^{p(π/2) − p(τ)} = e^{π}, checked against a step 1e−3 dense sup
    let an = plain(EvolutionFamily::example1(), 0.001, 20.0);
    let u = constant(&an, &[1.0]);
    let s = an.grid().points()[(PI / 2.0 / 0.001).round() as usize];
    let got = phi(&an, -1.0, s, &u).unwrap();
    let dense = phi_dense(Oracle::Potential(p_example1), -1.0, &common::uniform(1e-3, 20.0), s, &[1.0]);
    assert_relative_eq!(got, dense, max_relative = 1e-9);
    assert_relative_eq!(got, PI.exp(), max_relative = 0.01);
    assert_eq!(phi(&an, -1.0, s, &an.zeros()).unwrap(), 0.0);
}

#[test]
fn decay_norm_is_sup_norm_at_zero() {
    let an = plain(EvolutionFamily::constant_decay(1.0, 1).unwrap(), 0.01, 10.0);
    let spec = PlateauSpec::new(1.0, 1.0, 2.0, 1.0).unwrap();
    let u = make_plateau(spec, an.grid()).unwrap();
    let prof = phi_profile(&an, 0.0, &u).unwrap();
    assert_eq!(prof.norm, 1.0);
    assert_relative_eq!(prof.argmax_t, 2.0, epsilon = 1e-12);
    let z = phi_profile(&an, 0.0, &an.zeros()).unwrap();
    assert_eq!((z.norm, z.argmax_t), (0.0, 0.0));
}

#[test]
fn example1_plateau_norm() {
    let an = plain(EvolutionFamily::example1(), 0.01, 30.0);
    let u = make_plateau(PlateauSpec::new(1.5, 0.5, 4.0, 0.5).unwrap(), an.grid()).unwrap();
    let nodes = an.grid().points();
    let dense = nodes
        .iter()
        .enumerate()
        .map(|(i, &t)| phi_dense(Oracle::Potential(p_example1), -1.0, nodes, t, u.at(i)))
        .fold(0.0, f64::max);
    let norm = admissible_norm(&an, -1.0, &u).unwrap();
    assert_relative_eq!(norm, dense, max_relative = 1e-9);
    let prof = phi_profile(&an, -1.0, &u).unwrap();
    assert_eq!(prof.phi_values[prof.argmax_index], prof.norm);
    assert!(prof.phi_values[..prof.argmax_index].iter().all(|&v| v < prof.norm));
}

#[test]
fn weight_examples() {
    let an = plain(EvolutionFamily::constant_decay(1.0, 1).unwrap(), 0.01, 20.0);
    assert!(weight_profile(&an, -1.0).log_w.iter().all(|&l| l.abs() <= 1e-12));
    let e1 = plain(EvolutionFamily::example1(), 0.01, 50.0);
    let i = (PI / 2.0 / 0.01).round() as usize;
    let w = weight_profile(&e1, -1.0).w_values()[i];
    assert_relative_eq!(w, PI.exp(), max_relative = 0.01);
}

#[test]
fn example2_uniform_bound() {
    let an = Analysis::new(
        EvolutionFamily::example2(),
        TimeGrid::uniform(0.01, 1e4).unwrap(),
        SupSampling::LogAugmented { t_sup: 1e7, per_efold: 1000 },
    )
    .unwrap();
    assert!(weight_profile(&an, 0.0).max_log().exp() <= 1.0 + 1e-9);
    let b = random_bumps(&an, 1, 3).remove(0);
    assert!(sandwich_check(&an, 0.0, &b).unwrap() <= 1e-12);
}

#[test]
fn example2_dense_weight_is_at_most_one() {
    let nodes = common::uniform(0.01, 200.0);
    for s in [0.0, 0.7, 13.0, 120.0] {
        assert!(log_weight_dense(Oracle::Potential(p_example2), 0.0, &nodes, s) <= 1e-12);
    }
}

#[test]
fn membership_examples() {
    let th = Thresholds::default();
    let an = plain(EvolutionFamily::constant_decay(1.0, 1).unwrap(), 0.01, 20.0);
    let bump = make_plateau(PlateauSpec::new(1.0, 1.0, 5.0, 1.0).unwrap(), an.grid()).unwrap();
    assert!(membership_c(&an, 0.0, &bump, &th).unwrap().is_member());
    assert!(!membership_c(&an, 0.0, &constant(&an, &[1.0]), &th).unwrap().is_member());

    let e1 = plain(EvolutionFamily::example1(), 0.01, 60.0);
    let ramp = PlateauSpec::new(0.0, 1.0, 1e9, 1.0).unwrap();
    let u = GridFunction::from_fn(e1.grid().clone(), 1, |t, o| o[0] = (-p_example1(t) - t).exp() * ramp.value(t));
    let m = membership_c(&e1, -1.0, &u, &th).unwrap();
    assert!(m.is_member(), "{m:?}");
}

#[test]
fn monotonicity_examples() {
    let e1 = plain(EvolutionFamily::example1(), 0.01, 40.0);
    let b = random_bumps(&e1, 1, 5).remove(0);
    assert!(monotonicity_check(&e1, -1.0, 0.0, &b).unwrap() <= 1e-12);
    assert_eq!(monotonicity_check(&e1, 0.5, 0.5, &b).unwrap(), 0.0);
    assert!(monotonicity_check(&e1, 0.5, 0.0, &b).is_err());
    let d = plain(EvolutionFamily::constant_decay(1.0, 1).unwrap(), 0.01, 20.0);
    let b = random_bumps(&d, 1, 5).remove(0);
    assert!(monotonicity_check(&d, -1.0, 1.0, &b).unwrap() <= 1e-12);
    assert_eq!(sandwich_check(&d, 0.0, &d.zeros()).unwrap(), 0.0);
}

#[test]
fn quasi_negativity_examples() {
    let th = Thresholds::default();
    let e1 = plain(EvolutionFamily::example1(), 0.01, 200.0);
    let r = quasi_negativity_test(&e1, 0.0, 1.0, 4, 0x5EED, &th).unwrap();
    assert!(r.is_equivalent() && r.k_measured <= (2.0 * PI).exp() * 1.01, "{r:?}");
    let same = quasi_negativity_test(&e1, -1.0, 1.0, 4, 0x5EED, &th).unwrap();
    assert!(same.is_equivalent() && same.k_measured == 1.0);
    let e2 = Analysis::new(
        EvolutionFamily::example2(),
        TimeGrid::uniform(0.01, 1e4).unwrap(),
        SupSampling::LogAugmented { t_sup: 1e7, per_efold: 1000 },
    )
    .unwrap();
    let r = quasi_negativity_test(&e2, 0.0, 0.2, 4, 0x5EED, &th).unwrap();
    assert!(!r.is_equivalent(), "{r:?}");
}

#[test]
fn matrix_quasi_negativity_uses_directions() {
    let th = Thresholds::default();
    let an = plain(
        EvolutionFamily::builtin(BuiltinMatrix::Shear, IntegratorConfig { step: 0.02, horizon: 20.0, tolerance: 1e-8 }),
        0.02,
        20.0,
    );
    let r = quasi_negativity_test(&an, 0.0, 0.5, 4, 0x5EED, &th).unwrap();
    assert!(r.is_equivalent(), "{r:?}");
    assert!(r.k_measured >= 1.0);
}
