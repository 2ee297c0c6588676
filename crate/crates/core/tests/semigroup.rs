mod common;

use approx::assert_relative_eq;
use evoscope::norm::{admissible_norm, membership_c};
use evoscope::semigroup::*;
use evoscope::witness::{make_plateau, random_bumps, triangle_bump, PlateauSpec};
use evoscope::{Analysis, BuiltinMatrix, EvolutionFamily, GridFunction, IntegratorConfig, Thresholds, TimeGrid};

fn plain(f: EvolutionFamily, h: f64, t_max: f64) -> Analysis {
    Analysis::plain(f, TimeGrid::uniform(h, t_max).unwrap()).unwrap()
}

fn decay() -> Analysis {
    plain(EvolutionFamily::constant_decay(1.0, 1).unwrap(), 0.01, 20.0)
}

fn rotation() -> Analysis {
    plain(
        EvolutionFamily::builtin(BuiltinMatrix::Rotation, IntegratorConfig { step: 0.01, horizon: 20.0, tolerance: 1e-8 }),
        0.01,
        20.0,
    )
}

#[test]
fn zero_shift_is_identity() {
    let an = plain(EvolutionFamily::example1(), 0.01, 20.0);
    for u in random_bumps(&an, 5, 1) {
        let out = SemigroupAction::new(&an, 0.0, 0.0).unwrap().apply(&an, &u).unwrap();
        assert_eq!(out.values(), u.values());
    }
}

#[test]
fn shift_moves_values_along_the_family() {
    let an = decay();
    let u = triangle_bump(&an, 2.0, 0.5, &[3.0]).unwrap();
    let out = SemigroupAction::new(&an, 0.0, 1.0).unwrap().apply(&an, &u).unwrap();
    assert_relative_eq!(out.interp(3.0).unwrap()[0], 3.0 * (-1.0f64).exp(), max_relative = 1e-14);
    for k in 0..=100 {
        assert_eq!(out.at(k)[0], 0.0);
    }
    assert!(SemigroupAction::new(&an, 0.0, 0.015).is_err());
}

#[test]
fn semigroup_law() {
    for an in [plain(EvolutionFamily::example1(), 0.01, 30.0), plain(EvolutionFamily::example2(), 0.01, 30.0), decay()] {
        let u = random_bumps(&an, 1, 4).remove(0);
        assert_eq!(semigroup_law_residual(&an, 0.0, 0.0, 0.0, &u).unwrap(), 0.0);
        for (t, s) in [(0.5, 0.25), (1.0, 3.0), (2.37, 0.01)] {
            assert!(semigroup_law_residual(&an, 0.0, t, s, &u).unwrap() <= 1e-12);
        }
    }
    let an = rotation();
    let u = triangle_bump(&an, 5.0, 2.0, &[1.0, -0.5]).unwrap();
    assert!(semigroup_law_residual(&an, 0.0, 0.5, 0.5, &u).unwrap() <= 10.0 * 1e-8);
}

#[test]
fn growth_bound_examples() {
    let th = Thresholds::default();
    let an = decay();
    let u = random_bumps(&an, 1, 8).remove(0);
    assert_eq!(growth_bound_check(&an, 0.0, 0.0, &u, &th).unwrap(), 0.0);
    assert!(growth_bound_check(&an, 0.0, 1.0, &u, &th).unwrap() >= 0.0);
    let e1 = plain(EvolutionFamily::example1(), 0.01, 40.0);
    let u = make_plateau(PlateauSpec::new(2.0, 0.5, 4.0, 0.5).unwrap(), e1.grid()).unwrap();
    let m = growth_bound_check(&e1, -1.0, 2.0, &u, &th).unwrap();
    assert!(m >= 0.0, "{m}");
    let nonmember = u_const(&an);
    assert!(growth_bound_check(&an, 0.0, 1.0, &nonmember, &th).is_err());
}

fn u_const(an: &Analysis) -> GridFunction {
    GridFunction::from_fn(an.grid().clone(), 1, |_, o| o[0] = 1.0)
}

#[test]
fn members_stay_members_and_phi_is_dominated() {
    let th = Thresholds::default();
    let cases = [(plain(EvolutionFamily::example1(), 0.01, 40.0), -0.5), (decay(), 0.0), (rotation(), 0.5)];
    for (an, alpha) in &cases {
        // supports end before 0.8 T_max − 2 so the shifted bump stays out of the tail window
        let room = 0.8 * an.t_max() - 2.0;
        let bumps: Vec<GridFunction> = (0..10)
            .map(|k| {
                let a = room * k as f64 / 12.0 + 0.1;
                let spec = PlateauSpec::new(a, 0.3, a + 0.2 * room, 0.4).unwrap();
                let x: Vec<f64> = (0..an.dim()).map(|d| 1.0 + d as f64 + 0.1 * k as f64).collect();
                GridFunction::from_fn(an.grid().clone(), an.dim(), |t, o| {
                    o.iter_mut().zip(&x).for_each(|(v, xv)| *v = spec.value(t) * xv)
                })
            })
            .collect();
        for u in bumps {
            assert!(membership_c(an, *alpha, &u, &th).unwrap().is_member());
            for t in [0.5, 2.0] {
                let tu = SemigroupAction::new(an, *alpha, t).unwrap().apply(an, &u).unwrap();
                assert!(membership_c(an, *alpha, &tu, &th).unwrap().is_member());
                assert!(shifted_phi_excess(an, *alpha, t, &u).unwrap() <= 1e-9);
            }
        }
    }
}

#[test]
fn strong_continuity() {
    let shifts = [0.32, 0.16, 0.08, 0.04, 0.02, 0.01];
    let an = decay();
    let u = triangle_bump(&an, 5.0, 1.0, &[1.0]).unwrap();
    let rows = strong_continuity_probe(&an, 0.0, &u, &shifts).unwrap();
    assert!(rows.windows(2).all(|w| w[1].1 < w[0].1), "{rows:?}");
    assert!(strong_continuity_probe(&an, 0.0, &an.zeros(), &shifts).unwrap().iter().all(|r| r.1 == 0.0));
    let e1 = plain(EvolutionFamily::example1(), 0.01, 30.0);
    let p = make_plateau(PlateauSpec::new(2.0, 0.5, 3.5, 0.5).unwrap(), e1.grid()).unwrap();
    let rows = strong_continuity_probe(&e1, -1.0, &p, &shifts).unwrap();
    assert!(rows.windows(2).all(|w| w[1].1 < w[0].1), "{rows:?}");
    // O(t): halving the shift roughly halves the residual
    let ratio = rows[4].1 / rows[5].1;
    assert!((1.5..=2.5).contains(&ratio), "{ratio}");
}

#[test]
fn rescaling_invariance() {
    let e1 = plain(EvolutionFamily::example1(), 0.01, 40.0);
    let u = random_bumps(&e1, 1, 2).remove(0);
    assert_eq!(rescaling_invariance_check(&e1, 0.0, 0.0, &u).unwrap(), 0.0);
    assert!(rescaling_invariance_check(&e1, 0.0, 0.7, &u).unwrap() <= 1e-9);
    let d = decay();
    let u = random_bumps(&d, 1, 2).remove(0);
    assert!(rescaling_invariance_check(&d, -0.5, -0.5, &u).unwrap() <= 1e-9);
    let norm = admissible_norm(&d, -0.5, &u).unwrap();
    assert!(norm > 0.0);
}

