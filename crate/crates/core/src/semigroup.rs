//! The evolution semigroup `(T_α(t)u)(s) = U(s, s−t) u(s−t)` on grid
//! functions, restricted to shifts by whole grid steps.

use rayon::prelude::*;

use crate::analysis::{Analysis, Thresholds};
use crate::error::{domain, Result};
use crate::grid::GridFunction;
use crate::norm::{admissible_norm, membership_c, phi_profile};

/// `T_α(t)` with `t = steps · h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemigroupAction {
    pub alpha: f64,
    pub shift: f64,
    pub steps: usize,
}

impl SemigroupAction {
    /// Fails unless `t` is a whole number of grid steps.
    pub fn new(an: &Analysis, alpha: f64, t: f64) -> Result<Self> {
        let steps = an.grid().aligned_steps(t)?;
        let h = an.grid().max_step();
        Ok(SemigroupAction { alpha, shift: steps as f64 * h, steps })
    }

    pub fn apply(&self, an: &Analysis, u: &GridFunction) -> Result<GridFunction> {
        apply(an, self, u)
    }
}

/// Node-exact shift. `T_α(0)` returns `u` itself; otherwise nodes with
/// `s <= t` map to zero.
pub fn apply(an: &Analysis, action: &SemigroupAction, u: &GridFunction) -> Result<GridFunction> {
    an.check_function(u)?;
    let k = action.steps;
    if k == 0 {
        return Ok(u.clone());
    }
    let d = an.dim();
    let main = an.main_len();
    let mut out = an.zeros();
    if k >= main {
        return Ok(out);
    }
    let cache = an.cache();
    out.values_mut()[k * d..]
        .par_chunks_mut(d)
        .enumerate()
        .for_each(|(off, dst)| {
            let j = k + off;
            let x = u.at(j - k);
            if x.iter().any(|v| *v != 0.0) {
                cache.apply(j, j - k, x, dst);
            }
        });
    Ok(out)
}

fn shift(an: &Analysis, alpha: f64, t: f64, u: &GridFunction) -> Result<GridFunction> {
    apply(an, &SemigroupAction::new(an, alpha, t)?, u)
}

/// `‖T(t)T(s)u − T(t+s)u‖_{U,α} / max(1, ‖u‖_{U,α})`.
pub fn semigroup_law_residual(an: &Analysis, alpha: f64, t: f64, s: f64, u: &GridFunction) -> Result<f64> {
    let a = shift(an, alpha, t, &shift(an, alpha, s, u)?)?;
    let b = shift(an, alpha, t + s, u)?;
    let diff = a.combine(1.0, &b, -1.0)?;
    let scale = admissible_norm(an, alpha, u)?.max(1.0);
    Ok(admissible_norm(an, alpha, &diff)? / scale)
}

/// `e^{αt}‖u‖_{U,α} − ‖T_α(t)u‖_{U,α}` for a member `u`.
pub fn growth_bound_check(an: &Analysis, alpha: f64, t: f64, u: &GridFunction, th: &Thresholds) -> Result<f64> {
    if !membership_c(an, alpha, u, th)?.is_member() {
        return domain("growth bound needs u in C(U,α)");
    }
    let tu = shift(an, alpha, t, u)?;
    Ok((alpha * t).exp() * admissible_norm(an, alpha, u)? - admissible_norm(an, alpha, &tu)?)
}

/// Largest `φ(s, T(t)u) − e^{αt} φ(s−t, u)` over nodes `s >= t`, relative
/// to `max(1, e^{αt} φ(s−t, u))`.
pub fn shifted_phi_excess(an: &Analysis, alpha: f64, t: f64, u: &GridFunction) -> Result<f64> {
    let action = SemigroupAction::new(an, alpha, t)?;
    let tu = apply(an, &action, u)?;
    let before = phi_profile(an, alpha, u)?.phi_values;
    let after = phi_profile(an, alpha, &tu)?.phi_values;
    let grow = (alpha * action.shift).exp();
    let k = action.steps;
    Ok((k..an.main_len())
        .map(|j| {
            let bound = grow * before[j - k];
            (after[j] - bound) / bound.max(1.0)
        })
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Rows `(t, ‖T_α(t)u − u‖_{U,α})` for each shift.
pub fn strong_continuity_probe(an: &Analysis, alpha: f64, u: &GridFunction, shifts: &[f64]) -> Result<Vec<(f64, f64)>> {
    shifts
        .iter()
        .map(|&t| {
            let diff = shift(an, alpha, t, u)?.combine(1.0, u, -1.0)?;
            Ok((t, admissible_norm(an, alpha, &diff)?))
        })
        .collect()
}

/// `max_t |φ_{U_λ, α−λ}(t, u) − φ_{U,α}(t, u)| / max(1, φ_{U,α}(t, u))`
pub fn rescaling_invariance_check(an: &Analysis, alpha: f64, lambda: f64, u: &GridFunction) -> Result<f64> {
    let scaled = an.with_family(an.family().rescale(lambda)?)?;
    let a = phi_profile(an, alpha, u)?.phi_values;
    let b = scaled.phi_values(alpha - lambda, u)?;
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs() / x.max(1.0)).fold(0.0, f64::max))
}
