mod common;

use std::f64::consts::PI;

use approx::assert_relative_eq;
use common::{p_example1, p_example2, Oracle};
use evoscope::{propagate_rows, BuiltinMatrix, Coefficient, Error, EvolutionFamily, IntegratorConfig, StateMatrix};

fn rotation() -> EvolutionFamily {
    EvolutionFamily::builtin(BuiltinMatrix::Rotation, IntegratorConfig { step: 0.01, horizon: 20.0, tolerance: 1e-8 })
}

#[test]
fn decay_closed_form() {
    let f = EvolutionFamily::constant_decay(1.0, 1).unwrap();
    assert_relative_eq!(f.evaluate(2.0, 1.0).unwrap().get(0, 0), (-1.0f64).exp(), max_relative = 1e-14);
}

#[test]
fn example1_at_quarter_turns_is_one() {
    let f = EvolutionFamily::example1();
    assert_relative_eq!(f.evaluate(1.5 * PI, 0.5 * PI).unwrap().get(0, 0), 1.0, epsilon = 1e-12);
}

#[test]
fn example1_matches_scalar_ode() {
    // x' = −(2 + sin t + t cos t) x integrated with a fine RK4
    let rhs = |t: f64, x: f64| -(2.0 + t.sin() + t * t.cos()) * x;
    let (s, t, n) = (0.3, 4.0, 40_000);
    let h = (t - s) / n as f64;
    let mut x = 1.0;
    for k in 0..n {
        let tk = s + k as f64 * h;
        let k1 = rhs(tk, x);
        let k2 = rhs(tk + h / 2.0, x + h / 2.0 * k1);
        let k3 = rhs(tk + h / 2.0, x + h / 2.0 * k2);
        let k4 = rhs(tk + h, x + h * k3);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    let f = EvolutionFamily::example1();
    assert_relative_eq!(f.evaluate(t, s).unwrap().get(0, 0), x, max_relative = 1e-10);
}

#[test]
fn example2_closed_form_and_origin() {
    let f = EvolutionFamily::example2();
    for (t, s) in [(5.0, 1.0), (100.0, 0.0), (1e3, 20.0)] {
        let expected = (p_example2(s) - p_example2(t)).exp();
        assert_relative_eq!(f.evaluate(t, s).unwrap().get(0, 0), expected, max_relative = 1e-12);
    }
    assert_eq!(f.potential_at(0.0), Some(0.0));
}

#[test]
fn identity_on_the_diagonal() {
    let families = [EvolutionFamily::example1(), EvolutionFamily::example2(), rotation()];
    for f in &families {
        for t in [0.0, 0.5, 3.0, 7.25] {
            let m = f.evaluate(t, t).unwrap();
            assert!(m.sub(&StateMatrix::identity(f.dim())).norm() <= 1e-12);
        }
    }
}

#[test]
fn cocycle_residuals() {
    for f in [EvolutionFamily::example1(), EvolutionFamily::example2()] {
        for (t, tau, s) in [(3.0, 2.0, 1.0), (10.0, 4.5, 0.0), (50.0, 49.0, 12.0)] {
            assert!(f.cocycle_residual(t, tau, s).unwrap() <= 1e-12);
        }
    }
    let d = EvolutionFamily::constant_decay(1.0, 3).unwrap();
    assert!(d.cocycle_residual(3.0, 2.0, 1.0).unwrap() <= 1e-12);
    let r = rotation();
    assert!(r.cocycle_residual(2.0, 1.0, 0.0).unwrap() <= 10.0 * r.tolerance());
}

#[test]
fn rotation_matches_closed_form() {
    let r = rotation();
    for (t, s) in [(2.0, 1.0), (7.3, 0.4), (19.0, 3.0)] {
        let exact = BuiltinMatrix::Rotation.closed_form(t, s);
        assert!(r.evaluate(t, s).unwrap().sub(&exact).norm() <= 1e-8);
    }
}

#[test]
fn rescaling() {
    let decay = EvolutionFamily::constant_decay(1.0, 1).unwrap();
    let up = decay.rescale(-1.0).unwrap();
    for (t, s) in [(0.0, 0.0), (3.0, 1.0), (30.0, 0.5)] {
        assert_relative_eq!(up.evaluate(t, s).unwrap().get(0, 0), 1.0, max_relative = 1e-12);
    }
    let e1 = EvolutionFamily::example1();
    let same = e1.rescale(0.0).unwrap();
    let g = e1.rescale(0.7).unwrap();
    for (t, s) in [(4.0, 1.0), (9.0, 2.5)] {
        let base = e1.evaluate(t, s).unwrap().get(0, 0);
        assert_relative_eq!(same.evaluate(t, s).unwrap().get(0, 0), base, max_relative = 1e-12);
        assert_relative_eq!(g.evaluate(t, s).unwrap().get(0, 0), (-0.7 * (t - s)).exp() * base, max_relative = 1e-12);
    }
    let r = rotation();
    let rr = r.rescale(0.3).unwrap();
    let (a, b) = (rr.evaluate(5.0, 2.0).unwrap(), r.evaluate(5.0, 2.0).unwrap().scale((-0.9f64).exp()));
    assert!(a.sub(&b).norm() <= 1e-12 * b.norm());
}

#[test]
fn bad_arguments() {
    let f = EvolutionFamily::example1();
    assert!(matches!(f.evaluate(1.0, 2.0), Err(Error::Domain(_))));
    assert!(matches!(f.evaluate(1.0, -1.0), Err(Error::Domain(_))));
    assert!(matches!(rotation().evaluate(25.0, 0.0), Err(Error::Domain(_))));
    assert!(EvolutionFamily::constant_decay(1.0, 0).is_err());
}

#[test]
fn custom_coefficient_table() {
    let a = StateMatrix::from_row_major(2, &[-1.0, 2.0, 0.0, -1.0]);
    let f = EvolutionFamily::matrix_ode(Coefficient::Constant(a), IntegratorConfig::default()).unwrap();
    let shear = Oracle::Shear;
    let m = f.evaluate(6.0, 2.0).unwrap();
    let e = shear.matrix(6.0, 2.0);
    for r in 0..2 {
        for c in 0..2 {
            assert!((m.get(r, c) - e[r * 2 + c]).abs() <= 1e-8);
        }
    }
}

#[test]
fn cache_on_three_nodes() {
    let f = EvolutionFamily::constant_decay(1.0, 1).unwrap();
    let c = propagate_rows(&f, &[0.0, 1.0, 2.0]).unwrap();
    assert_relative_eq!(c.transition(2, 1).get(0, 0), (-1.0f64).exp(), max_relative = 1e-15);
    let single = propagate_rows(&f, &[0.0]).unwrap();
    assert_eq!(single.transition(0, 0).get(0, 0), 1.0);
}

#[test]
fn example1_cache_matches_closed_form() {
    let times = common::uniform(0.01, 50.0);
    let c = propagate_rows(&EvolutionFamily::example1(), &times).unwrap();
    for (j, i) in [(5000, 0), (4000, 1234), (777, 776), (2500, 2500)] {
        let exact = (p_example1(times[i]) - p_example1(times[j])).exp();
        assert_relative_eq!(c.transition(j, i).get(0, 0), exact, max_relative = 1e-9);
    }
}

#[test]
fn shear_cache_matches_closed_form() {
    let f = EvolutionFamily::builtin(BuiltinMatrix::Shear, IntegratorConfig::default());
    let times = common::uniform(0.01, 40.0);
    let c = propagate_rows(&f, &times).unwrap();
    for (j, i) in [(4000, 0), (3000, 1000), (101, 100)] {
        let e = Oracle::Shear.matrix(times[j], times[i]);
        let m = c.transition(j, i);
        let err = (0..4).map(|k| (m.get(k / 2, k % 2) - e[k]).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-8, "({j}, {i}): {err}");
    }
}

/// Largest `‖U(t_{k+1}, s) − U(t_k, s)‖` over a uniform grid of step `h` on `[s, s + 4]`.
fn max_jump(f: &EvolutionFamily, s: f64, h: f64) -> f64 {
    let n = (4.0 / h).round() as usize;
    (0..n)
        .map(|k| {
            let a = f.evaluate(s + (k + 1) as f64 * h, s).unwrap();
            let b = f.evaluate(s + k as f64 * h, s).unwrap();
            a.sub(&b).norm()
        })
        .fold(0.0, f64::max)
}

#[test]
fn discrete_jumps_shrink_with_the_step() {
    let families = [
        EvolutionFamily::example1(),
        EvolutionFamily::example2(),
        EvolutionFamily::constant_decay(1.0, 2).unwrap(),
        rotation(),
    ];
    for f in &families {
        let coarse = max_jump(f, 1.0, 0.04);
        let fine = max_jump(f, 1.0, 0.02);
        assert!(fine < coarse && fine >= coarse / 4.0, "{}: {coarse} -> {fine}", f.describe());
    }
}
