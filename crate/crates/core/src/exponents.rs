//! Lyapunov and Bohl exponents, admissibility and strictness of growth
//! rates, and the left endpoint of the admissible set.

use rayon::prelude::*;

use crate::analysis::{Analysis, GrowthScan, Thresholds};
use crate::error::{domain, Error, Result};
use crate::norm::{weight_profile, WeightProfile};

#[derive(Debug, Clone, PartialEq)]
pub enum Admissibility {
    Admissible(WeightProfile),
    /// `blowup` marks growth past the threshold Θ.
    Inadmissible { evidence: GrowthScan, blowup: bool },
}

impl Admissibility {
    pub fn is_admissible(&self) -> bool {
        matches!(self, Admissibility::Admissible(_))
    }
}

/// Growth-scan verdict alone, without building the weight profile.
pub fn passes_growth_scan(an: &Analysis, alpha: f64, th: &Thresholds) -> bool {
    let g = an.growth_scan(alpha);
    g.growth.is_finite() && g.growth <= (1.0 + th.tol_growth).ln()
}

pub fn is_admissible(an: &Analysis, alpha: f64, th: &Thresholds) -> Admissibility {
    let g = an.growth_scan(alpha);
    let ok = g.growth.is_finite() && g.growth <= (1.0 + th.tol_growth).ln();
    if !ok {
        return Admissibility::Inadmissible { evidence: g, blowup: !(g.peak <= th.theta.ln()) };
    }
    let w = weight_profile(an, alpha);
    if w.log_w.iter().any(|v| !v.is_finite()) {
        return Admissibility::Inadmissible { evidence: g, blowup: true };
    }
    Admissibility::Admissible(w)
}

/// Whether `W_α` stabilizes over `s ∈ [0, T_max]`.
pub fn is_strict(an: &Analysis, alpha: f64, th: &Thresholds) -> Result<bool> {
    let w = match is_admissible(an, alpha, th) {
        Admissibility::Admissible(w) => w,
        Admissibility::Inadmissible { .. } => return domain(format!("α = {alpha} is not admissible")),
    };
    let half = an.t_max() / 2.0;
    let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (t, l) in an.grid().points().iter().zip(&w.log_w) {
        if *t <= half {
            first = first.max(*l);
        } else {
            second = second.max(*l);
        }
    }
    Ok(th.stabilizes(first, second))
}

/// Start of the limsup window ending at `end`.
fn window_start(an: &Analysis, end: f64) -> f64 {
    if an.sampling().is_log() {
        end.sqrt()
    } else {
        end / 2.0
    }
}

/// Largest `ln ‖U(t,0)‖ / t` over sup nodes in the limsup window.
pub fn lyapunov_exponent(an: &Analysis) -> Result<f64> {
    let nodes = an.nodes();
    let end = an.t_sup();
    let start = window_start(an, end);
    let first = nodes.partition_point(|&t| t < start);
    let mut best = f64::NEG_INFINITY;
    for (j, &t) in nodes.iter().enumerate().skip(first) {
        if t <= 0.0 {
            continue;
        }
        let l = an.cache().log_norm(j, 0);
        if !l.is_finite() {
            return Err(Error::Propagation { t, reason: "‖U(t, 0)‖ left the floating-point range".into() });
        }
        best = best.max(l / t);
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BohlEstimate {
    /// `+∞` when the running sup over `s` does not stabilize.
    pub value: f64,
    /// Largest sampled `ln ‖U(s + T_gap, s)‖ / T_gap`.
    pub raw: f64,
    pub first_half: f64,
    pub second_half: f64,
    pub diverging: bool,
    pub t_gap: f64,
}

/// Rows kept by the Bohl scan on matrix families.
const BOHL_ROWS: usize = 2000;

/// `sup_s ln ‖U(s + T_gap, s)‖ / T_gap` with a divergence flag.
pub fn bohl_exponent(an: &Analysis, t_gap: f64, th: &Thresholds) -> Result<BohlEstimate> {
    let t_max = an.t_max();
    if !(t_gap >= t_max / 10.0 * (1.0 - 1e-12) && t_gap <= t_max / 2.0 * (1.0 + 1e-12)) {
        return domain(format!("T_gap = {t_gap} must lie in [T_max/10, T_max/2] = [{}, {}]", t_max / 10.0, t_max / 2.0));
    }
    let end = an.t_sup();
    let last_s = end - t_gap;
    let split = if an.sampling().is_log() {
        ((1.0 + last_s).ln() / 2.0).exp() - 1.0
    } else {
        last_s / 2.0
    };
    let samples: Vec<(f64, f64)> = if an.family().is_scalar_like() {
        let f = an.family();
        an.nodes()
            .par_iter()
            .filter(|&&s| s <= last_s)
            .map(|&s| (s, (f.potential_at(s).unwrap() - f.potential_at(s + t_gap).unwrap()) / t_gap))
            .collect()
    } else {
        let h = an
            .grid()
            .step()
            .ok_or_else(|| Error::Domain("the Bohl scan on matrix families needs a uniform grid".into()))?;
        let k = ((t_gap / h).round() as usize).max(1);
        let gap = an.nodes()[k];
        let upto = an.main_len() - k;
        let stride = upto.div_ceil(BOHL_ROWS).max(1);
        let rows: Vec<usize> = (0..upto).step_by(stride).collect();
        rows.par_iter().map(|&i| (an.nodes()[i], an.cache().log_norm(i + k, i) / gap)).collect()
    };
    if samples.is_empty() {
        return domain("no rows fit the Bohl gap");
    }
    let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &(s, b) in &samples {
        let b = if b.is_nan() { f64::INFINITY } else { b };
        if s <= split {
            first = first.max(b);
        } else {
            second = second.max(b);
        }
    }
    let raw = first.max(second);
    let grows = !(second <= first + th.tol_growth * first.abs().max(1.0));
    let diverging = grows && {
        let probe = raw + th.tol_growth * raw.abs().max(1.0);
        !(probe.is_finite() && is_strict(an, probe, th).unwrap_or(false))
    };
    Ok(BohlEstimate {
        value: if diverging { f64::INFINITY } else { raw },
        raw,
        first_half: first,
        second_half: second,
        diverging,
        t_gap,
    })
}

/// Bisection on the admissibility verdict; returns the midpoint of the
/// final bracket.
pub fn inf_admissible(an: &Analysis, lo: f64, hi: f64, tol: f64, th: &Thresholds) -> Result<f64> {
    if !(lo < hi) || !(tol > 0.0) || !lo.is_finite() || !hi.is_finite() {
        return domain(format!("invalid bracket [{lo}, {hi}] with tol {tol}"));
    }
    if !passes_growth_scan(an, hi, th) {
        return domain(format!("upper bracket end {hi} is not admissible"));
    }
    if passes_growth_scan(an, lo, th) {
        return domain(format!("lower bracket end {lo} is admissible"));
    }
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if passes_growth_scan(an, mid, th) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaTest {
    pub alpha: f64,
    pub admissible: bool,
    pub strict: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Classification {
    pub uniform_exp_bounded: bool,
    pub nonuniform_exp_bounded: bool,
    pub nonuniform_exp_stable: bool,
    pub uniform_exp_stable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentReport {
    pub k_l: f64,
    pub k_b: BohlEstimate,
    pub inf_a: f64,
    pub inf_a_bracket: (f64, f64),
    pub alpha_tested: Vec<AlphaTest>,
    pub classification: Classification,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyOptions {
    pub bisect_tol: f64,
    /// Defaults to `T_max / 10`.
    pub t_gap: Option<f64>,
    /// Extra exponents to test for admissibility and strictness.
    pub alphas: Vec<f64>,
    /// Bisection bracket for `inf A(U)`; found automatically from `K_L` when unset.
    pub bracket: Option<(f64, f64)>,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions { bisect_tol: 0.02, t_gap: None, alphas: Vec::new(), bracket: None }
    }
}

pub fn test_alpha(an: &Analysis, alpha: f64, th: &Thresholds) -> AlphaTest {
    let admissible = is_admissible(an, alpha, th).is_admissible();
    let strict = admissible && is_strict(an, alpha, th).unwrap_or(false);
    AlphaTest { alpha, admissible, strict }
}

/// Brackets `inf A(U)` around a starting guess by doubling steps.
pub fn auto_bracket(an: &Analysis, guess: f64, th: &Thresholds) -> Result<(f64, f64)> {
    let guess = if guess.is_finite() { guess } else { 0.0 };
    let (mut lo, mut hi, mut width) = (guess - 1.0, guess + 1.0, 1.0);
    for _ in 0..40 {
        if passes_growth_scan(an, hi, th) {
            break;
        }
        lo = hi;
        hi += width;
        width *= 2.0;
    }
    if !passes_growth_scan(an, hi, th) {
        return Err(Error::Degenerate("no admissible exponent found".into()));
    }
    width = 1.0;
    for _ in 0..40 {
        if !passes_growth_scan(an, lo, th) {
            return Ok((lo, hi));
        }
        hi = lo;
        lo -= width;
        width *= 2.0;
    }
    Err(Error::Degenerate("admissible set looks unbounded below".into()))
}

pub fn classify(an: &Analysis, th: &Thresholds, opts: &ClassifyOptions) -> Result<ExponentReport> {
    let k_l = lyapunov_exponent(an)?;
    let k_b = bohl_exponent(an, opts.t_gap.unwrap_or(an.t_max() / 10.0), th)?;
    let bracket = match opts.bracket {
        Some(b) => b,
        None => auto_bracket(an, k_l, th)?,
    };
    let inf_a = inf_admissible(an, bracket.0, bracket.1, opts.bisect_tol, th)?;
    let mut alphas = opts.alphas.clone();
    if k_b.value.is_finite() {
        alphas.push(k_b.value + opts.bisect_tol.max(th.tol_growth * k_b.value.abs()));
    }
    let alpha_tested: Vec<AlphaTest> = alphas.iter().map(|&a| test_alpha(an, a, th)).collect();
    let classification = Classification {
        uniform_exp_bounded: alpha_tested.iter().any(|a| a.strict),
        nonuniform_exp_bounded: inf_a.is_finite(),
        nonuniform_exp_stable: inf_a < 0.0,
        uniform_exp_stable: alpha_tested.iter().any(|a| a.strict && a.alpha < 0.0),
    };
    Ok(ExponentReport { k_l, k_b, inf_a, inf_a_bracket: bracket, alpha_tested, classification })
}
