//! The look-ahead functional φ_{U,α}, admissible norms, weight envelopes,
//! membership in C(U,α) and quasi-negativity.

use std::sync::Arc;

use rayon::prelude::*;

use crate::analysis::{Analysis, Thresholds};
use crate::error::{domain, Result};
use crate::exponents::{is_admissible, Admissibility};
use crate::grid::{GridFunction, TimeGrid};
use crate::witness::probe_directions;

/// φ_{U,α}(t_i, u) at every node with the norm and smallest maximizer.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiProfile {
    pub alpha: f64,
    pub grid: Arc<TimeGrid>,
    pub phi_values: Vec<f64>,
    pub norm: f64,
    pub argmax_index: usize,
    pub argmax_t: f64,
}

/// `W_α(s) = sup_{s <= t <= T_sup} e^{−α(t−s)} ‖U(t,s)‖`, stored as logs.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightProfile {
    pub alpha: f64,
    pub grid: Arc<TimeGrid>,
    pub log_w: Vec<f64>,
}

impl WeightProfile {
    /// `W_α(s)` per node; overflow shows up as `+∞`.
    pub fn w_values(&self) -> Vec<f64> {
        self.log_w.iter().map(|v| v.exp()).collect()
    }

    pub fn max_log(&self) -> f64 {
        self.log_w.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Membership {
    Member,
    Nonmember { phi_at_zero: f64, tail: f64, norm: f64 },
}

impl Membership {
    pub fn is_member(&self) -> bool {
        matches!(self, Membership::Member)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Equivalence {
    Equivalent { k: f64 },
    /// Log-scale sups of `φ_{−ν}/φ_α` over the first and second half of `[0, T_max]`.
    Diverging { first_half_log: f64, second_half_log: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub alpha: f64,
    pub nu: f64,
    pub k_measured: f64,
    pub log_k: f64,
    pub verdict: Equivalence,
    pub probes: String,
}

impl EquivalenceReport {
    pub fn is_equivalent(&self) -> bool {
        matches!(self.verdict, Equivalence::Equivalent { .. })
    }
}

fn smallest_argmax(v: &[f64]) -> (usize, f64) {
    let mut best = (0, v.first().copied().unwrap_or(0.0));
    for (k, &x) in v.iter().enumerate() {
        if x > best.1 {
            best = (k, x);
        }
    }
    best
}

/// φ_{U,α}(t, u) at the grid node `t`.
pub fn phi(an: &Analysis, alpha: f64, t: f64, u: &GridFunction) -> Result<f64> {
    an.check_function(u)?;
    let i = an.grid().node_index(t)?;
    Ok(an.phi_at(alpha, i, u.at(i)))
}

pub fn phi_profile(an: &Analysis, alpha: f64, u: &GridFunction) -> Result<PhiProfile> {
    let phi_values = an.phi_values(alpha, u)?;
    let (argmax_index, norm) = smallest_argmax(&phi_values);
    Ok(PhiProfile {
        alpha,
        grid: an.grid().clone(),
        argmax_t: an.grid().points()[argmax_index],
        argmax_index,
        norm,
        phi_values,
    })
}

/// `‖u‖_{U,α}`
pub fn admissible_norm(an: &Analysis, alpha: f64, u: &GridFunction) -> Result<f64> {
    Ok(phi_profile(an, alpha, u)?.norm)
}

pub fn weight_profile(an: &Analysis, alpha: f64) -> WeightProfile {
    WeightProfile { alpha, grid: an.grid().clone(), log_w: an.log_weights(alpha) }
}

/// Largest violation of `‖u(t)‖ <= φ(t,u) <= W_α(t)‖u(t)‖` over nodes, each
/// node's violation taken relative to `max(1, W_α(t)‖u(t)‖)`.
pub fn sandwich_check(an: &Analysis, alpha: f64, u: &GridFunction) -> Result<f64> {
    let phi = an.phi_values(alpha, u)?;
    let lw = an.log_weights(alpha);
    let mut worst = f64::NEG_INFINITY;
    for (i, (&p, &l)) in phi.iter().zip(&lw).enumerate() {
        let nu = u.norm_at(i);
        let upper = Analysis::scale_by_weight(nu, l);
        let scale = upper.max(1.0);
        let v = ((nu - p) / scale).max((p - upper) / scale);
        worst = worst.max(v);
    }
    Ok(if phi.is_empty() { 0.0 } else { worst })
}

pub fn membership_c(an: &Analysis, alpha: f64, u: &GridFunction, th: &Thresholds) -> Result<Membership> {
    let prof = phi_profile(an, alpha, u)?;
    Ok(membership_from_profile(an, &prof, th))
}

pub(crate) fn membership_from_profile(an: &Analysis, prof: &PhiProfile, th: &Thresholds) -> Membership {
    let tol_zero = th.tol_zero_rel * (1.0 + prof.norm);
    let start = 0.8 * an.t_max();
    let pts = an.grid().points();
    let tail = pts
        .iter()
        .zip(&prof.phi_values)
        .filter(|(t, _)| **t >= start)
        .fold(0.0f64, |m, (_, v)| m.max(*v));
    let phi0 = prof.phi_values[0];
    if phi0 <= tol_zero && tail <= th.tol_tail * prof.norm {
        Membership::Member
    } else {
        Membership::Nonmember { phi_at_zero: phi0, tail, norm: prof.norm }
    }
}

/// Largest `φ_β(t,u) − φ_α(t,u)` over nodes relative to `max(1, φ_α(t,u))`.
pub fn monotonicity_check(an: &Analysis, alpha: f64, beta: f64, u: &GridFunction) -> Result<f64> {
    if beta < alpha {
        return domain(format!("monotonicity needs β >= α, got α = {alpha}, β = {beta}"));
    }
    let a = an.phi_values(alpha, u)?;
    let b = an.phi_values(beta, u)?;
    Ok(a.iter().zip(&b).map(|(pa, pb)| (pb - pa) / pa.max(1.0)).fold(0.0, f64::max))
}

/// Direction-sampled test of `C(U,α) = C(U,−ν)`.
pub fn quasi_negativity_test(
    an: &Analysis,
    alpha: f64,
    nu: f64,
    n_dirs: usize,
    seed: u64,
    th: &Thresholds,
) -> Result<EquivalenceReport> {
    if !(nu > 0.0) {
        return domain("ν must be positive");
    }
    for a in [alpha, -nu] {
        if let Admissibility::Inadmissible { .. } = is_admissible(an, a, th) {
            return domain(format!("exponent {a} is not admissible"));
        }
    }
    let main = an.main_len();
    let (rows, log_ratio, probes): (Vec<usize>, Vec<f64>, String) = if an.cache().potential().is_some() {
        // φ(s, x) = ‖x‖ W(s) for every direction
        let a = an.log_weights(-nu);
        let b = an.log_weights(alpha);
        let r = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        ((0..main).collect(), r, "scalar-like family: ratio is direction independent".into())
    } else {
        let dirs = probe_directions(an.dim(), n_dirs, seed);
        let rows = an.scan_rows(main);
        let (ta, tb) = (an.tail_bound(-nu), an.tail_bound(alpha));
        let r = rows
            .par_iter()
            .map(|&i| {
                dirs.iter()
                    .map(|x| {
                        an.row_log_sup_with(i, -nu, Some(x), ta.as_deref())
                            - an.row_log_sup_with(i, alpha, Some(x), tb.as_deref())
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let probes = format!("{} coordinate + {} seeded directions (seed {seed:#x}) on {} rows", an.dim(), n_dirs, rows.len());
        (rows, r, probes)
    };
    let half = an.t_max() / 2.0;
    let pts = an.grid().points();
    let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (&i, &v) in rows.iter().zip(&log_ratio) {
        let v = if v.is_nan() { f64::INFINITY } else { v };
        if pts[i] <= half {
            first = first.max(v);
        } else {
            second = second.max(v);
        }
    }
    let log_k = first.max(second);
    let verdict = if th.stabilizes(first, second) {
        Equivalence::Equivalent { k: log_k.exp() }
    } else {
        Equivalence::Diverging { first_half_log: first, second_half_log: second }
    };
    Ok(EquivalenceReport { alpha, nu, k_measured: log_k.exp(), log_k, verdict, probes })
}
