//! The inverse of the semigroup generator as the Volterra operator
//! `u_f(t) = ∫₀ᵗ U(t,ξ) f(ξ) dξ`, its norm estimate and the stability
//! certificate built from it.

use rayon::prelude::*;

use crate::analysis::{Analysis, Thresholds};
use crate::error::{domain, Error, Result};
use crate::grid::GridFunction;
use crate::norm::{admissible_norm, membership_c};
use crate::witness::{find_psi_anchor, make_psi_ratio_witness, make_window_witness, make_witness_f, random_bumps, theta_n};

/// Doubling sequence used by the witness families of the battery.
pub const WITNESS_NS: [usize; 3] = [4, 8, 16];
/// Growth factor per doubling of `n` that marks the inverse as unbounded.
pub const UNBOUNDED_FACTOR: f64 = 1.8;
pub const DELTA_SWEEP: [f64; 3] = [0.25, 0.5, 0.75];
const ENVELOPE_ROWS: usize = 1000;
const WINDOW_ANCHORS: usize = 16;
const SAMPLE_ROWS: usize = 40;
const SAMPLE_COLS: usize = 40;

/// `u_f` at every main node by the trapezoid recursion
/// `u_{j+1} = U_{j+1,j}(u_j + h_j/2 f_j) + h_j/2 f_{j+1}`.
pub fn apply_inverse(an: &Analysis, f: &GridFunction) -> Result<GridFunction> {
    an.check_function(f)?;
    let scale = f.max_abs();
    if f.at(0).iter().any(|v| v.abs() > 1e-14 * scale.max(1.0)) {
        return domain("apply_inverse needs f(0) = 0");
    }
    let d = an.dim();
    let pts = an.grid().points();
    let cache = an.cache();
    let mut out = an.zeros();
    let mut acc = vec![0.0; d];
    let mut next = vec![0.0; d];
    let mut block = vec![0.0; d * d];
    let potential = cache.potential();
    for j in 0..pts.len() - 1 {
        let half = 0.5 * (pts[j + 1] - pts[j]);
        let prev = &out.values()[j * d..(j + 1) * d];
        acc.iter_mut().zip(prev.iter().zip(f.at(j))).for_each(|(a, (u, fv))| *a = u + half * fv);
        match potential {
            Some(p) => {
                let c = (p[j] - p[j + 1]).exp();
                next.iter_mut().zip(&acc).for_each(|(o, a)| *o = c * a);
            }
            None => {
                cache.block_into(j + 1, j, &mut block);
                crate::cache::block_apply(&block, d, &acc, &mut next);
            }
        }
        let fj1 = f.at(j + 1);
        let dst = &mut out.values_mut()[(j + 1) * d..(j + 2) * d];
        for ((o, y), fv) in dst.iter_mut().zip(&next).zip(fj1) {
            let v = y + half * fv;
            // keep decayed tails out of subnormal range
            *o = if v.abs() < f64::MIN_POSITIVE { 0.0 } else { v };
        }
        if dst.iter().any(|v| !v.is_finite()) {
            return Err(Error::QuadratureOverflow { t: pts[j + 1], xi: pts[j] });
        }
    }
    Ok(out)
}

/// `(−1/α)‖f‖_{U,α} − ‖u_f‖_{U,α}` for a member `f` and `α < 0`.
pub fn resolvent_bound_check(an: &Analysis, alpha: f64, f: &GridFunction, th: &Thresholds) -> Result<f64> {
    if !(alpha < 0.0) {
        return domain(format!("resolvent bound needs α < 0, got {alpha}"));
    }
    if !membership_c(an, alpha, f, th)?.is_member() {
        return domain("resolvent bound needs f in C(U,α)");
    }
    let u = apply_inverse(an, f)?;
    Ok(-admissible_norm(an, alpha, f)? / alpha - admissible_norm(an, alpha, &u)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BatteryKind {
    Step1 { n: usize, s: f64 },
    Window { len: usize, s: f64 },
    Psi { n: usize, s: f64, t_n: f64 },
    Bump,
}

#[derive(Debug, Clone)]
pub struct BatteryMember {
    pub label: String,
    pub kind: BatteryKind,
    pub f: GridFunction,
}

/// Test functions for the norm of the inverse.
#[derive(Debug, Clone, Default)]
pub struct Battery {
    pub members: Vec<BatteryMember>,
}

impl Battery {
    /// Step-1 witnesses for `s ∈ {0, n/4, n/2}`, every coordinate direction
    /// and `n ∈ {4, 8, 16}`; the same profiles of length `n` anchored at 16
    /// evenly spread `s`; ψ_n witnesses where an anchor exists (scalar-like
    /// families only); and `n_bumps` seeded bumps. Members that do not fit
    /// in the horizon are left out.
    pub fn standard(an: &Analysis, alpha: f64, n_bumps: usize, seed: u64) -> Battery {
        let d = an.dim();
        let mut members = Vec::new();
        for n in WITNESS_NS {
            for s in [0.0, n as f64 / 4.0, n as f64 / 2.0] {
                for k in 0..d {
                    let mut x = vec![0.0; d];
                    x[k] = 1.0;
                    if let Ok(w) = make_witness_f(an, alpha, s, &x, n) {
                        members.push(BatteryMember {
                            label: format!("step1 n={n} s={s} e{k}"),
                            kind: BatteryKind::Step1 { n, s },
                            f: w.function,
                        });
                    }
                }
            }
        }
        for n in WITNESS_NS {
            let len = n as f64;
            let last = an.t_max() - len - theta_n(len);
            if last <= 0.0 {
                continue;
            }
            for a in 0..WINDOW_ANCHORS {
                let s = last * a as f64 / WINDOW_ANCHORS as f64;
                let s = an.nodes()[an.grid().snap(s).map(|(i, _)| i).unwrap_or(0)];
                for k in 0..d {
                    let mut x = vec![0.0; d];
                    x[k] = 1.0;
                    if let Ok(w) = make_window_witness(an, alpha, s, &x, len) {
                        members.push(BatteryMember {
                            label: format!("window len={n} s={s} e{k}"),
                            kind: BatteryKind::Window { len: n, s },
                            f: w.function,
                        });
                    }
                }
            }
        }
        let mut e0 = vec![0.0; d];
        e0[0] = 1.0;
        for n in WITNESS_NS {
            let Some((s, t_n)) = find_psi_anchor(an, alpha, n) else { continue };
            if let Ok(w) = make_psi_ratio_witness(an, n, s, &e0, t_n) {
                members.push(BatteryMember {
                    label: format!("psi n={n} s={s} t_n={t_n}"),
                    kind: BatteryKind::Psi { n, s, t_n },
                    f: w.f,
                });
            }
        }
        for (k, f) in random_bumps(an, n_bumps, seed).into_iter().enumerate() {
            members.push(BatteryMember { label: format!("bump {k} seed={seed:#x}"), kind: BatteryKind::Bump, f });
        }
        Battery { members }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Lower estimate of `‖G⁻¹‖` on `C(U,α)` from a battery.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolventEstimate {
    pub alpha: f64,
    pub c: f64,
    pub witness_f: String,
    pub n_tests: usize,
    pub ratio_history: Vec<f64>,
    pub labels: Vec<String>,
    /// Largest ratio per witness `n`, from ψ witnesses when all three exist
    /// and from Step-1 witnesses otherwise.
    pub per_n: Vec<(usize, f64)>,
    pub unbounded: bool,
}

fn ratio_trend(members: &[(BatteryKind, f64)], psi: bool) -> Vec<(usize, f64)> {
    WITNESS_NS
        .iter()
        .filter_map(|&n| {
            let best = members
                .iter()
                .filter(|(k, _)| match k {
                    BatteryKind::Psi { n: m, .. } => psi && *m == n,
                    BatteryKind::Step1 { n: m, .. } => !psi && *m == n,
                    BatteryKind::Bump | BatteryKind::Window { .. } => false,
                })
                .map(|(_, r)| *r)
                .fold(f64::NEG_INFINITY, f64::max);
            best.is_finite().then_some((n, best))
        })
        .collect()
}

/// `c = max ‖u_f‖_{U,α} / ‖f‖_{U,α}` over the battery.
pub fn estimate_resolvent_norm(an: &Analysis, alpha: f64, battery: &Battery) -> Result<ResolventEstimate> {
    let log_w = an.cache().potential().map(|_| an.log_weights(alpha));
    let results: Vec<Option<(f64, usize)>> = battery
        .members
        .par_iter()
        .enumerate()
        .map(|(k, m)| {
            let norm = |g: &GridFunction| match &log_w {
                Some(lw) => {
                    an.check_function(g)?;
                    Ok(an.norm_from_log_weights(g, lw))
                }
                None => admissible_norm(an, alpha, g),
            };
            let nf = norm(&m.f)?;
            if nf == 0.0 {
                return Ok(None);
            }
            let u = apply_inverse(an, &m.f)?;
            Ok(Some((norm(&u)? / nf, k)))
        })
        .collect::<Result<_>>()?;
    let used: Vec<(f64, usize)> = results.into_iter().flatten().collect();
    if used.is_empty() {
        return Err(Error::Degenerate("every battery function is zero".into()));
    }
    let ratio_history: Vec<f64> = used.iter().map(|(r, _)| *r).collect();
    let labels: Vec<String> = used.iter().map(|(_, k)| battery.members[*k].label.clone()).collect();
    let mut arg = 0;
    for (k, r) in ratio_history.iter().enumerate() {
        if *r > ratio_history[arg] || r.is_nan() {
            arg = k;
        }
    }
    let kinds: Vec<(BatteryKind, f64)> = used.iter().map(|(r, k)| (battery.members[*k].kind, *r)).collect();
    let psi = ratio_trend(&kinds, true);
    let per_n = if psi.len() == WITNESS_NS.len() { psi } else { ratio_trend(&kinds, false) };
    let unbounded = per_n.len() == WITNESS_NS.len()
        && per_n.windows(2).all(|w| w[1].1 >= UNBOUNDED_FACTOR * w[0].1);
    Ok(ResolventEstimate {
        alpha,
        c: ratio_history[arg],
        witness_f: labels[arg].clone(),
        n_tests: ratio_history.len(),
        ratio_history,
        labels,
        per_n,
        unbounded,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    CertifiedStable,
    NotCertified(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepEntry {
    pub delta: f64,
    pub rate: f64,
    /// `(c α + 1) / (1 − δ)`, the factor in front of `W_α(s)`.
    pub prefactor: f64,
    pub margin: f64,
    pub certified: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeSample {
    pub t: f64,
    pub s: f64,
    pub measured: f64,
    pub predicted: f64,
}

/// Margins are relative: the smallest `1 − ‖U(t,s)‖ / bound(t,s)` over the
/// sampled pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityVerdict {
    pub alpha: f64,
    pub c: f64,
    pub c_upper: f64,
    pub delta: f64,
    pub rate: f64,
    pub prefactor: f64,
    pub log_w: Vec<f64>,
    pub verdict: Verdict,
    pub measured_margin: f64,
    pub step1_margin: f64,
    /// `(k, margin)` of the factorial bounds.
    pub step2_margins: Vec<(u32, f64)>,
    pub sweep: Vec<SweepEntry>,
    pub samples: Vec<EnvelopeSample>,
}

impl StabilityVerdict {
    pub fn is_certified(&self) -> bool {
        self.verdict == Verdict::CertifiedStable
    }

    /// `(c α + 1)/(1 − δ) · W_α(s)` at main node `i`.
    pub fn prefactor_at(&self, i: usize) -> f64 {
        self.prefactor * self.log_w[i].exp()
    }
}

/// Log-scale bounds compared in a single pass over `(t, s)` pairs.
struct Envelope {
    log_pref: Vec<f64>,
    rates: Vec<f64>,
    step1: f64,
    step2: [f64; 3],
    ln_c: f64,
}

impl Envelope {
    fn new(alpha: f64, c_upper: f64, deltas: &[f64]) -> Self {
        let base = (c_upper * alpha + 1.0).ln();
        Envelope {
            log_pref: deltas.iter().map(|d| base - (1.0 - d).ln()).collect(),
            rates: deltas.iter().map(|d| d / c_upper).collect(),
            step1: base,
            step2: [1.0f64, 2.0, 6.0].map(|f| f.ln() + base),
            ln_c: c_upper.ln(),
        }
    }

    /// Smallest relative margins: one per δ, then Step 1, then Step 2 k = 1..3.
    fn scan(&self, an: &Analysis, log_w: &[f64], rows: &[usize]) -> Vec<f64> {
        let nodes = an.nodes();
        let end = nodes.len();
        let width = self.rates.len() + 4;
        let rel = |lm: f64, lp: f64| 1.0 - (lm - lp).exp();
        rows.par_iter()
            .map(|&i| {
                let mut m = vec![f64::INFINITY; width];
                let lw = log_w[i];
                an.cache().for_each_log_norm_in_row(i, end, |j, lm| {
                    let lm = if lm.is_nan() { f64::INFINITY } else { lm };
                    let gap = nodes[j] - nodes[i];
                    for (k, (lp, r)) in self.log_pref.iter().zip(&self.rates).enumerate() {
                        m[k] = m[k].min(rel(lm, lp + lw - r * gap));
                    }
                    let n = self.rates.len();
                    m[n] = m[n].min(rel(lm, self.step1 + lw));
                    if gap > 0.0 {
                        for k in 0..3 {
                            let kf = (k + 1) as f64;
                            let lp = self.step2[k] + lw + kf * (self.ln_c - gap.ln());
                            m[n + 1 + k] = m[n + 1 + k].min(rel(lm, lp));
                        }
                    }
                })
                ;
                m
            })
            .reduce(
                || vec![f64::INFINITY; width],
                |a, b| a.iter().zip(&b).map(|(x, y)| x.min(*y)).collect(),
            )
    }
}

fn envelope_rows(an: &Analysis) -> Vec<usize> {
    let main = an.main_len();
    let stride = main.div_ceil(ENVELOPE_ROWS).max(1);
    (0..main).step_by(stride).collect()
}

/// Smallest relative margin of `‖U(t,s)‖ <= (cα+1)/(1−δ) W_α(s) e^{−(δ/c)(t−s)}`
/// over the sampled pairs, for a given `c`. Used to re-check a certificate on
/// another grid.
pub fn envelope_margin(an: &Analysis, alpha: f64, c_upper: f64, delta: f64) -> Result<f64> {
    check_certify_args(alpha, delta)?;
    let env = Envelope::new(alpha, c_upper, &[delta]);
    let log_w = an.log_weights(alpha);
    Ok(env.scan(an, &log_w, &envelope_rows(an))[0])
}

fn check_certify_args(alpha: f64, delta: f64) -> Result<()> {
    if !(alpha >= 0.0) {
        return domain(format!("certification needs α >= 0, got {alpha}"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return domain(format!("δ must lie in (0, 1), got {delta}"));
    }
    Ok(())
}

fn samples(an: &Analysis, log_w: &[f64], pref: f64, rate: f64) -> Vec<EnvelopeSample> {
    let main = an.main_len();
    let nodes = an.nodes();
    let row_stride = main.div_ceil(SAMPLE_ROWS).max(1);
    let mut out = Vec::new();
    for i in (0..main).step_by(row_stride) {
        let span = main - i;
        let col_stride = span.div_ceil(SAMPLE_COLS).max(1);
        for j in (i..main).step_by(col_stride) {
            let (t, s) = (nodes[j], nodes[i]);
            out.push(EnvelopeSample {
                t,
                s,
                measured: an.cache().log_norm(j, i).exp(),
                predicted: pref * (log_w[i] - rate * (t - s)).exp(),
            });
        }
    }
    out
}

/// Checks the decay envelope built from `c_upper = c_safety · c` for every
/// δ of the sweep plus the requested one and reports the best certified
/// rate.
pub fn certify_stability(
    an: &Analysis,
    alpha: f64,
    est: &ResolventEstimate,
    delta: f64,
    th: &Thresholds,
) -> Result<StabilityVerdict> {
    check_certify_args(alpha, delta)?;
    if est.alpha != alpha {
        return domain(format!("resolvent estimate is for α = {}, not {alpha}", est.alpha));
    }
    let c_upper = th.c_safety * est.c;
    let log_w = an.log_weights(alpha);
    let mut deltas: Vec<f64> = DELTA_SWEEP.to_vec();
    if !deltas.contains(&delta) {
        deltas.push(delta);
    }
    deltas.sort_by(f64::total_cmp);
    let usable = c_upper.is_finite() && c_upper > 0.0 && !est.unbounded;
    let (margins, env) = if usable {
        let env = Envelope::new(alpha, c_upper, &deltas);
        (env.scan(an, &log_w, &envelope_rows(an)), Some(env))
    } else {
        (vec![f64::NEG_INFINITY; deltas.len() + 4], None)
    };
    let tol = -1e-9;
    let sweep: Vec<SweepEntry> = deltas
        .iter()
        .zip(&margins)
        .map(|(&d, &margin)| SweepEntry {
            delta: d,
            rate: d / c_upper,
            prefactor: (c_upper * alpha + 1.0) / (1.0 - d),
            margin,
            certified: usable && margin >= tol,
        })
        .collect();
    let best = sweep.iter().rev().find(|e| e.certified).copied();
    let chosen = best.unwrap_or_else(|| *sweep.iter().find(|e| e.delta == delta).unwrap());
    let verdict = if est.unbounded {
        Verdict::NotCertified("inverse unbounded".into())
    } else if !usable {
        Verdict::NotCertified(format!("resolvent estimate c = {} is not usable", est.c))
    } else if best.is_some() {
        Verdict::CertifiedStable
    } else {
        Verdict::NotCertified(format!("envelope violated, relative margin {:.3e}", chosen.margin))
    };
    let n = deltas.len();
    let step2_margins = (1..=3).map(|k| (k, margins[n + k as usize])).collect();
    let samples = match env {
        Some(_) => samples(an, &log_w, chosen.prefactor, chosen.rate),
        None => Vec::new(),
    };
    Ok(StabilityVerdict {
        alpha,
        c: est.c,
        c_upper,
        delta: chosen.delta,
        rate: chosen.rate,
        prefactor: chosen.prefactor,
        log_w,
        verdict,
        measured_margin: chosen.margin,
        step1_margin: margins[n],
        step2_margins,
        sweep,
        samples,
    })
}

/// Composite Simpson weights on `k + 1` equally spaced points, with the
/// 3/8 rule on the last three cells when `k` is odd.
fn simpson_weights(k: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; k + 1];
    match k {
        0 => {}
        1 => {
            w[0] = h / 2.0;
            w[1] = h / 2.0;
        }
        _ => {
            let even = if k % 2 == 0 { k } else { k - 3 };
            for c in (0..even).step_by(2) {
                w[c] += h / 3.0;
                w[c + 1] += 4.0 * h / 3.0;
                w[c + 2] += h / 3.0;
            }
            if k % 2 == 1 {
                for (o, f) in [1.0, 3.0, 3.0, 1.0].iter().enumerate() {
                    w[even + o] += 3.0 * h / 8.0 * f;
                }
            }
        }
    }
    w
}

/// Largest `‖u_f(t) − U(t,s) u_f(s) − ∫ₛᵗ U(t,ξ) f(ξ) dξ‖` over the node
/// pairs, the integral taken by Simpson's rule on a uniform grid.
pub fn inverse_consistency_check(an: &Analysis, f: &GridFunction, pairs: &[(f64, f64)]) -> Result<f64> {
    let h = an
        .grid()
        .step()
        .ok_or_else(|| Error::Domain("consistency check needs a uniform grid".into()))?;
    let u = apply_inverse(an, f)?;
    let d = an.dim();
    let cache = an.cache();
    let mut worst: f64 = 0.0;
    let mut y = vec![0.0; d];
    for &(s, t) in pairs {
        let i = an.grid().node_index(s)?;
        let j = an.grid().node_index(t)?;
        if i > j {
            return domain(format!("need s <= t, got s = {s}, t = {t}"));
        }
        let mut r: Vec<f64> = u.at(j).to_vec();
        cache.apply(j, i, u.at(i), &mut y);
        r.iter_mut().zip(&y).for_each(|(a, b)| *a -= b);
        for (off, w) in simpson_weights(j - i, h).into_iter().enumerate() {
            cache.apply(j, i + off, f.at(i + off), &mut y);
            r.iter_mut().zip(&y).for_each(|(a, b)| *a -= w * b);
        }
        worst = worst.max(crate::linalg::vec_norm(&r));
    }
    Ok(worst)
}
