//! Built-in families with their known analytic facts and recommended grids.

use std::f64::consts::{PI, SQRT_2};

use crate::analysis::{Analysis, Thresholds};
use crate::error::{Error, Result};
use crate::exponents::{bohl_exponent, inf_admissible, is_strict, lyapunov_exponent};
use crate::family::{BuiltinMatrix, EvolutionFamily, IntegratorConfig};
use crate::generator::{certify_stability, estimate_resolvent_norm, Battery};
use crate::grid::{SupSampling, TimeGrid};
use crate::norm::{phi_profile, quasi_negativity_test, weight_profile};
use crate::witness::random_bumps;

pub const CATALOG_NAMES: [&str; 5] = ["scalar_example1", "scalar_example2", "constant_decay", "matrix_ode", "rescaled"];

/// The library operation that measures a fact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FactCheck {
    InfAdmissible { lo: f64, hi: f64 },
    Lyapunov,
    Bohl { t_gap: f64 },
    /// 1 if strict, 0 otherwise.
    Strict { alpha: f64 },
    MaxLogWeight { alpha: f64 },
    /// `ln W_α(s)` at the node nearest `s`.
    LogWeightAt { alpha: f64, s: f64 },
    /// Measured `K` when equivalent, `+∞` when diverging.
    QuasiNegativity { alpha: f64, nu: f64 },
    PotentialAt { t: f64 },
    /// `max_t |φ_α(t, u) − ‖u(t)‖|` over seeded bumps.
    PhiMinusNorm { alpha: f64 },
    ResolventNorm { alpha: f64 },
    /// 1 if the battery flags the inverse as unbounded.
    ResolventUnbounded { alpha: f64 },
    /// Certified rate, 0 when not certified.
    CertifiedRate { alpha: f64, delta: f64 },
    /// `‖U(t,s) − closed form‖` for built-in matrix families.
    TransitionError { t: f64, s: f64 },
    CocycleResidual { t: f64, tau: f64, s: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    Near,
    AtMost,
    AtLeast,
    PosInfinity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnownFact {
    pub id: &'static str,
    pub expected: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    /// The analytic statement the fact encodes.
    pub anchor: &'static str,
    pub check: FactCheck,
}

impl KnownFact {
    pub fn accepts(&self, measured: f64) -> bool {
        match self.comparison {
            Comparison::Near => (measured - self.expected).abs() <= self.tolerance,
            Comparison::AtMost => measured <= self.expected + self.tolerance,
            Comparison::AtLeast => measured >= self.expected - self.tolerance,
            Comparison::PosInfinity => measured == f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactOutcome {
    pub fact: KnownFact,
    pub measured: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecommendedGrid {
    pub t_max: f64,
    pub h: f64,
    pub sampling: SupSampling,
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub family: EvolutionFamily,
    pub facts: Vec<KnownFact>,
    pub grid: RecommendedGrid,
}

impl CatalogEntry {
    pub fn analysis(&self) -> Result<Analysis> {
        Analysis::new(self.family.clone(), TimeGrid::uniform(self.grid.h, self.grid.t_max)?, self.grid.sampling)
    }

    /// Runs every fact on the recommended grid.
    pub fn check_all(&self, th: &Thresholds, seed: u64) -> Result<Vec<FactOutcome>> {
        let an = self.analysis()?;
        self.facts.iter().map(|f| run_fact(&an, f, th, seed)).collect()
    }
}

fn fact(id: &'static str, expected: f64, tolerance: f64, comparison: Comparison, anchor: &'static str, check: FactCheck) -> KnownFact {
    KnownFact { id, expected, tolerance, comparison, anchor, check }
}

fn linear(t_max: f64, h: f64) -> RecommendedGrid {
    RecommendedGrid { t_max, h, sampling: SupSampling::Linear { t_sup: t_max } }
}

fn example1_entry() -> CatalogEntry {
    use Comparison::*;
    use FactCheck::*;
    let k_bound = (2.0 * PI).exp() * 1.01;
    CatalogEntry {
        name: "scalar_example1",
        family: EvolutionFamily::example1(),
        grid: linear(200.0, 0.01),
        facts: vec![
            fact("ex1.inf_admissible", -1.0, 0.05, Near, "A(U) = [-1, inf)", InfAdmissible { lo: -2.0, hi: 0.0 }),
            fact("ex1.lyapunov", -1.0, 0.05, Near, "K_L = -1", Lyapunov),
            fact("ex1.bohl_infinite", f64::INFINITY, 0.0, PosInfinity, "not uniformly exponentially bounded", Bohl { t_gap: 20.0 }),
            fact("ex1.not_strict_-1", 0.0, 0.0, Near, "no strict exponent", Strict { alpha: -1.0 }),
            fact("ex1.not_strict_0", 0.0, 0.0, Near, "no strict exponent", Strict { alpha: 0.0 }),
            fact("ex1.not_strict_5", 0.0, 0.0, Near, "no strict exponent", Strict { alpha: 5.0 }),
            fact(
                "ex1.f1_at_half_pi",
                PI,
                0.01,
                Near,
                "sup_{t>=s} [E(t,s) + (t-s)] = s(1 + sin s), equal to pi at s = pi/2",
                LogWeightAt { alpha: -1.0, s: PI / 2.0 },
            ),
            fact(
                "ex1.quasi_negative_0",
                k_bound,
                0.0,
                AtMost,
                "C(U,0) = C(U,-1) with K <= e^{2 pi (1 + alpha)}",
                QuasiNegativity { alpha: 0.0, nu: 1.0 },
            ),
            fact("ex1.certified_0", 0.01, 0.0, AtLeast, "every admissible exponent is quasi-negative", CertifiedRate { alpha: 0.0, delta: 0.5 }),
        ],
    }
}

fn example2_entry() -> CatalogEntry {
    use Comparison::*;
    use FactCheck::*;
    CatalogEntry {
        name: "scalar_example2",
        family: EvolutionFamily::example2(),
        grid: RecommendedGrid {
            t_max: 1e4,
            h: 0.01,
            sampling: SupSampling::LogAugmented { t_sup: 1e7, per_efold: 1000 },
        },
        facts: vec![
            fact("ex2.inf_admissible", 1.0 - SQRT_2, 0.05, Near, "A(U) = [1 - sqrt 2, inf)", InfAdmissible { lo: -1.0, hi: 0.0 }),
            fact("ex2.lyapunov", 1.0 - SQRT_2, 0.05, Near, "K_L = 1 - sqrt 2", Lyapunov),
            fact("ex2.bohl", 0.0, 0.05, Near, "bounded but not uniformly stable: K_B = 0", Bohl { t_gap: 1000.0 }),
            fact("ex2.uniform_bound", 0.0, 1e-9, AtMost, "||U(t,s)|| <= 1", MaxLogWeight { alpha: 0.0 }),
            fact("ex2.strict_0", 1.0, 0.0, Near, "0 is a strict exponent", Strict { alpha: 0.0 }),
            fact(
                "ex2.not_quasi_negative_0",
                f64::INFINITY,
                0.0,
                PosInfinity,
                "only negative exponents are quasi-negative",
                QuasiNegativity { alpha: 0.0, nu: 0.2 },
            ),
            fact("ex2.inverse_unbounded_0", 1.0, 0.0, Near, "||u_n|| / ||f_n|| = n", ResolventUnbounded { alpha: 0.0 }),
            fact("ex2.potential_at_0", 0.0, 0.0, Near, "t sin ln t extended by 0 at t = 0", PotentialAt { t: 0.0 }),
            fact("ex2.potential_near_0", 0.0, 1e-8, Near, "t sin ln t extended by 0 at t = 0", PotentialAt { t: 1e-9 }),
        ],
    }
}

fn decay_entry() -> CatalogEntry {
    use Comparison::*;
    use FactCheck::*;
    CatalogEntry {
        name: "constant_decay",
        family: EvolutionFamily::ConstantDecay { rate: 1.0, dim: 1 },
        grid: linear(40.0, 0.01),
        facts: vec![
            fact("decay.phi_is_norm", 0.0, 1e-12, AtMost, "phi_{U,0}(t,u) = ||u(t)||", PhiMinusNorm { alpha: 0.0 }),
            fact("decay.inf_admissible", -1.0, 0.05, Near, "A(U) = [-1, inf)", InfAdmissible { lo: -2.0, hi: 0.0 }),
            fact("decay.lyapunov", -1.0, 1e-9, Near, "K_L = -1", Lyapunov),
            fact("decay.strict_-0.5", 1.0, 0.0, Near, "uniformly exponentially stable", Strict { alpha: -0.5 }),
            fact("decay.resolvent_0", 1.0, 0.1, Near, "u_f = e^{-t} * f has norm 1", ResolventNorm { alpha: 0.0 }),
            fact("decay.certified_0", 0.45, 0.0, AtLeast, "||U(t,s)|| <= 2 e^{-(t-s)/2}", CertifiedRate { alpha: 0.0, delta: 0.5 }),
        ],
    }
}

fn matrix_entry() -> CatalogEntry {
    use Comparison::*;
    use FactCheck::*;
    CatalogEntry {
        name: "matrix_ode",
        family: EvolutionFamily::builtin(BuiltinMatrix::Shear, IntegratorConfig::default()),
        grid: linear(40.0, 0.01),
        facts: vec![
            fact("shear.transition", 0.0, 1e-8, AtMost, "U(t,s) = e^{-(t-s)} [[1, 2(t-s)], [0, 1]]", TransitionError { t: 5.0, s: 1.0 }),
            fact("shear.cocycle", 0.0, 1e-8, AtMost, "U(t,r) U(r,s) = U(t,s)", CocycleResidual { t: 3.0, tau: 2.0, s: 1.0 }),
            fact("shear.inf_admissible", -1.0, 0.1, Near, "A(U) = (-1, inf)", InfAdmissible { lo: -2.0, hi: 0.0 }),
            fact("shear.strict_-0.5", 1.0, 0.0, Near, "uniformly exponentially stable", Strict { alpha: -0.5 }),
        ],
    }
}

fn rescaled_entry() -> CatalogEntry {
    use Comparison::*;
    use FactCheck::*;
    CatalogEntry {
        name: "rescaled",
        family: EvolutionFamily::Rescaled {
            inner: Box::new(EvolutionFamily::ConstantDecay { rate: 1.0, dim: 1 }),
            shift: -1.0,
        },
        grid: linear(40.0, 0.01),
        facts: vec![
            fact("rescaled.inf_admissible", 0.0, 0.05, Near, "A(U_lambda) = A(U) - lambda", InfAdmissible { lo: -1.0, hi: 1.0 }),
            fact("rescaled.uniform_bound", 0.0, 1e-12, AtMost, "e^{(t-s)} e^{-(t-s)} = 1", MaxLogWeight { alpha: 0.0 }),
            fact("rescaled.lyapunov", 0.0, 1e-9, Near, "K_L(U_lambda) = K_L(U) - lambda", Lyapunov),
        ],
    }
}

pub fn catalog() -> Vec<CatalogEntry> {
    vec![example1_entry(), example2_entry(), decay_entry(), matrix_entry(), rescaled_entry()]
}

/// Looks up an entry; `perron` is an alias of `scalar_example2`.
pub fn entry(name: &str) -> Result<CatalogEntry> {
    let name = if name == "perron" { "scalar_example2" } else { name };
    catalog()
        .into_iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::UnknownFamily(name.to_string()))
}

pub fn catalog_facts(name: &str) -> Result<Vec<KnownFact>> {
    Ok(entry(name)?.facts)
}

fn measure(an: &Analysis, check: FactCheck, th: &Thresholds, seed: u64) -> Result<f64> {
    use FactCheck::*;
    Ok(match check {
        InfAdmissible { lo, hi } => inf_admissible(an, lo, hi, 0.02, th)?,
        Lyapunov => lyapunov_exponent(an)?,
        Bohl { t_gap } => bohl_exponent(an, t_gap, th)?.value,
        Strict { alpha } => f64::from(u8::from(is_strict(an, alpha, th)?)),
        MaxLogWeight { alpha } => weight_profile(an, alpha).max_log(),
        LogWeightAt { alpha, s } => {
            let (i, _) = an.grid().snap(s)?;
            weight_profile(an, alpha).log_w[i]
        }
        QuasiNegativity { alpha, nu } => {
            let r = quasi_negativity_test(an, alpha, nu, 4, seed, th)?;
            if r.is_equivalent() {
                r.k_measured
            } else {
                f64::INFINITY
            }
        }
        PotentialAt { t } => an
            .family()
            .potential_at(t)
            .ok_or_else(|| Error::Domain("family has no scalar potential".into()))?,
        PhiMinusNorm { alpha } => {
            let mut worst: f64 = 0.0;
            for u in random_bumps(an, 10, seed) {
                let prof = phi_profile(an, alpha, &u)?;
                for (i, p) in prof.phi_values.iter().enumerate() {
                    worst = worst.max((p - u.norm_at(i)).abs());
                }
            }
            worst
        }
        ResolventNorm { alpha } => estimate_resolvent_norm(an, alpha, &Battery::standard(an, alpha, 20, seed))?.c,
        ResolventUnbounded { alpha } => {
            let est = estimate_resolvent_norm(an, alpha, &Battery::standard(an, alpha, 20, seed))?;
            f64::from(u8::from(est.unbounded))
        }
        CertifiedRate { alpha, delta } => {
            let est = estimate_resolvent_norm(an, alpha, &Battery::standard(an, alpha, 20, seed))?;
            let v = certify_stability(an, alpha, &est, delta, th)?;
            if v.is_certified() {
                v.rate
            } else {
                0.0
            }
        }
        TransitionError { t, s } => match an.family() {
            EvolutionFamily::MatrixOde(m) => match m.coefficient {
                crate::family::Coefficient::Builtin(b) => {
                    an.family().evaluate(t, s)?.sub(&b.closed_form(t, s)).norm()
                }
                _ => return Err(Error::Domain("no closed form for this coefficient".into())),
            },
            _ => return Err(Error::Domain("transition check needs a built-in matrix family".into())),
        },
        CocycleResidual { t, tau, s } => an.family().cocycle_residual(t, tau, s)?,
    })
}

pub fn run_fact(an: &Analysis, fact: &KnownFact, th: &Thresholds, seed: u64) -> Result<FactOutcome> {
    let measured = measure(an, fact.check, th, seed)?;
    Ok(FactOutcome { passed: fact.accepts(measured), measured, fact: fact.clone() })
}
