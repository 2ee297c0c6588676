use std::sync::OnceLock;

use evoscope::generator::{apply_inverse, certify_stability, envelope_margin, estimate_resolvent_norm, Battery};
use evoscope::norm::{admissible_norm, membership_c, monotonicity_check, phi_profile, sandwich_check};
use evoscope::semigroup::{growth_bound_check, semigroup_law_residual, shifted_phi_excess, SemigroupAction};
use evoscope::witness::PlateauSpec;
use evoscope::{Analysis, BuiltinMatrix, EvolutionFamily, GridFunction, IntegratorConfig, Thresholds, TimeGrid};
use proptest::prelude::*;

const H: f64 = 0.02;

struct Case {
    an: Analysis,
    alphas: [f64; 3],
}

fn cases() -> &'static [Case] {
    static CASES: OnceLock<Vec<Case>> = OnceLock::new();
    CASES.get_or_init(|| {
        let grid = |t: f64| TimeGrid::uniform(H, t).unwrap();
        let shear = EvolutionFamily::builtin(BuiltinMatrix::Shear, IntegratorConfig { step: H, horizon: 20.0, tolerance: 1e-8 });
        vec![
            Case { an: Analysis::plain(EvolutionFamily::example1(), grid(30.0)).unwrap(), alphas: [-0.5, 0.0, 1.0] },
            Case { an: Analysis::plain(EvolutionFamily::example2(), grid(30.0)).unwrap(), alphas: [0.0, 0.5, 1.0] },
            Case {
                an: Analysis::plain(EvolutionFamily::constant_decay(1.0, 1).unwrap(), grid(20.0)).unwrap(),
                alphas: [-0.5, 0.0, 1.0],
            },
            Case { an: Analysis::plain(shear, grid(20.0)).unwrap(), alphas: [-0.5, 0.0, 1.0] },
        ]
    })
}

#[derive(Debug, Clone)]
struct Bump {
    start: f64,
    rise: f64,
    len: f64,
    fall: f64,
    x: [f64; 2],
}

impl Bump {
    /// Places the bump inside `[0.05 T, 0.8 T − 2]` so shifts up to 2 stay clear of the tail window.
    fn build(&self, an: &Analysis) -> GridFunction {
        let room = 0.8 * an.t_max() - 2.0;
        let a = 0.05 * an.t_max() + self.start * 0.5 * room;
        let rise = (0.5 * self.rise).max(2.0 * H);
        let fall_start = a + rise + self.len * 0.3 * room;
        let spec = PlateauSpec::new(a, rise, fall_start, (0.5 * self.fall).max(2.0 * H)).unwrap();
        let x = &self.x[..an.dim()];
        GridFunction::from_fn(an.grid().clone(), an.dim(), |t, o| {
            o.iter_mut().zip(x).for_each(|(v, xv)| *v = spec.value(t) * xv)
        })
    }
}

fn bump() -> impl Strategy<Value = Bump> {
    (0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64, prop::array::uniform2(-2.0..2.0f64)).prop_map(
        |(start, rise, len, fall, x)| Bump { start, rise, len, fall, x },
    )
}

fn steps(k: usize) -> f64 {
    k as f64 * H
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn sandwich_holds(c in 0..4usize, a in 0..3usize, b in bump()) {
        let case = &cases()[c];
        let u = b.build(&case.an);
        let alpha = case.alphas[a];
        prop_assert!(sandwich_check(&case.an, alpha, &u).unwrap() <= 1e-12);
        let prof = phi_profile(&case.an, alpha, &u).unwrap();
        for (k, p) in prof.phi_values.iter().enumerate() {
            prop_assert!(*p >= u.norm_at(k));
        }
    }

    #[test]
    fn phi_is_monotone_in_alpha(c in 0..4usize, a in 0..3usize, d in 0.0..2.0f64, b in bump()) {
        let case = &cases()[c];
        let u = b.build(&case.an);
        let alpha = case.alphas[a];
        prop_assert!(monotonicity_check(&case.an, alpha, alpha + d, &u).unwrap() <= 1e-12);
    }

    #[test]
    fn shifts_respect_growth_and_domination(c in 0..4usize, a in 0..3usize, k in 0..100usize, b in bump()) {
        let case = &cases()[c];
        let th = Thresholds::default();
        let u = b.build(&case.an);
        let alpha = case.alphas[a];
        let t = steps(k);
        let bound = (alpha * t).exp() * admissible_norm(&case.an, alpha, &u).unwrap();
        prop_assert!(growth_bound_check(&case.an, alpha, t, &u, &th).unwrap() >= -1e-9 * bound);
        prop_assert!(shifted_phi_excess(&case.an, alpha, t, &u).unwrap() <= 1e-9);
        let tu = SemigroupAction::new(&case.an, alpha, t).unwrap().apply(&case.an, &u).unwrap();
        prop_assert!(membership_c(&case.an, alpha, &tu, &th).unwrap().is_member());
    }

    #[test]
    fn semigroup_law_on_scalar_families(c in 0..3usize, a in 0..3usize, k in 0..60usize, l in 0..60usize, b in bump()) {
        let case = &cases()[c];
        let u = b.build(&case.an);
        prop_assert!(semigroup_law_residual(&case.an, case.alphas[a], steps(k), steps(l), &u).unwrap() <= 1e-12);
    }

    #[test]
    fn inverse_is_linear(c in 0..4usize, f in bump(), g in bump(), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let an = &cases()[c].an;
        let (f, g) = (f.build(an), g.build(an));
        let lhs = apply_inverse(an, &f.combine(a, &g, b).unwrap()).unwrap();
        let uf = apply_inverse(an, &f).unwrap();
        let ug = apply_inverse(an, &g).unwrap();
        let scale = a.abs() * uf.max_abs() + b.abs() * ug.max_abs();
        let rhs = uf.combine(a, &ug, b).unwrap();
        for (x, y) in lhs.values().iter().zip(rhs.values()) {
            prop_assert!((x - y).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn inverse_is_causal(c in 0..4usize, f in bump(), frac in 0.1..0.9f64) {
        let an = &cases()[c].an;
        let f = f.build(an);
        let k = (frac * (an.grid().len() - 1) as f64) as usize;
        let d = an.dim();
        let mut cut = f.clone();
        cut.values_mut()[(k + 1) * d..].iter_mut().for_each(|v| *v = 0.0);
        let u = apply_inverse(an, &f).unwrap();
        let uc = apply_inverse(an, &cut).unwrap();
        prop_assert_eq!(&u.values()[..(k + 1) * d], &uc.values()[..(k + 1) * d]);
    }

    #[test]
    fn decay_transfer(c in prop::sample::select(vec![0usize, 2, 3]), f in bump()) {
        let an = &cases()[c].an;
        let alpha = -0.5;
        let f = f.build(an);
        let pf = phi_profile(an, alpha, &f).unwrap().phi_values;
        let pu = phi_profile(an, alpha, &apply_inverse(an, &f).unwrap()).unwrap().phi_values;
        let pts = an.grid().points();
        let tol = 1e-3 * pf.iter().fold(0.0f64, |m, v| m.max(*v)) * H;
        for i in (0..pts.len()).step_by(11) {
            let t = pts[i];
            let integral: f64 = (0..i)
                .map(|j| 0.5 * H * ((alpha * (t - pts[j])).exp() * pf[j] + (alpha * (t - pts[j + 1])).exp() * pf[j + 1]))
                .sum();
            prop_assert!(pu[i] <= integral + tol, "t = {}: {} > {}", t, pu[i], integral);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn certification_survives_refinement(rate in 0.5..2.0f64, delta in prop::sample::select(vec![0.25, 0.5, 0.75])) {
        let th = Thresholds::default();
        let an = Analysis::plain(EvolutionFamily::constant_decay(rate, 1).unwrap(), TimeGrid::uniform(H, 20.0).unwrap()).unwrap();
        let est = estimate_resolvent_norm(&an, 0.0, &Battery::standard(&an, 0.0, 8, 0x5EED)).unwrap();
        let v = certify_stability(&an, 0.0, &est, delta, &th).unwrap();
        prop_assert!(v.is_certified());
        prop_assert!(v.measured_margin >= 0.0);
        let fine = an.refined().unwrap();
        prop_assert!(envelope_margin(&fine, 0.0, v.c_upper, v.delta).unwrap() >= 0.0);
    }
}
