//! A family bound to a time grid, a sup-sampling rule and its transition
//! cache, plus the row-wise sup kernels every module builds on.

use std::ops::ControlFlow;
use std::sync::Arc;

use rayon::prelude::*;

use crate::cache::{propagate_rows, FamilyEvalCache};
use crate::error::{domain, Result};
use crate::family::EvolutionFamily;
use crate::grid::{GridFunction, SupSampling, TimeGrid};
use crate::linalg::vec_norm;

/// Tunable decision thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// Growth beyond this factor is labelled a hard blow-up.
    pub theta: f64,
    pub tol_growth: f64,
    pub tol_tail: f64,
    /// `tol_zero = tol_zero_rel · (1 + norm)`
    pub tol_zero_rel: f64,
    /// `c_upper = c_safety · c` in certification.
    pub c_safety: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { theta: 1e12, tol_growth: 0.05, tol_tail: 1e-3, tol_zero_rel: 1e-9, c_safety: 1.25 }
    }
}

impl Thresholds {
    /// Whether a log-scale running sup stabilizes: the later value may exceed
    /// the earlier one by at most `ln(1 + tol_growth) · max(1, |earlier|)`.
    pub fn stabilizes(&self, earlier: f64, later: f64) -> bool {
        if !later.is_finite() {
            return false;
        }
        later <= earlier + (1.0 + self.tol_growth).ln() * earlier.abs().max(1.0)
    }
}

/// Largest row count for O(N²) scans on matrix families.
pub(crate) const MATRIX_ROW_BUDGET: usize = 512;

/// Columns between checks of the tail bound in matrix row scans.
const PRUNE_STRIDE: usize = 64;

/// A row scan stops only when its tail bound is below the running best by
/// this much on the log scale.
const PRUNE_SLACK: f64 = 1e-9;

/// Head/tail growth statistic of one admissibility scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthScan {
    /// `tail max − head max` of `ln ‖U(τ,s)‖ − α(τ−s)`.
    pub growth: f64,
    /// Row of the scan and the tail maximizer.
    pub s: f64,
    pub t: f64,
    /// Largest tail value `ln ‖U(τ,s)‖ − α(τ−s)` seen (hard blow-up evidence).
    pub peak: f64,
}

#[derive(Debug, Clone)]
pub struct Analysis {
    family: EvolutionFamily,
    grid: Arc<TimeGrid>,
    sampling: SupSampling,
    nodes: Vec<f64>,
    cache: FamilyEvalCache,
}

impl Analysis {
    pub fn new(family: EvolutionFamily, grid: TimeGrid, sampling: SupSampling) -> Result<Self> {
        Self::with_grid(family, Arc::new(grid), sampling)
    }

    /// Linear sampling with `T_sup = T_max`.
    pub fn plain(family: EvolutionFamily, grid: TimeGrid) -> Result<Self> {
        let t_sup = grid.horizon();
        Self::new(family, grid, SupSampling::Linear { t_sup })
    }

    pub fn with_grid(family: EvolutionFamily, grid: Arc<TimeGrid>, sampling: SupSampling) -> Result<Self> {
        let extra = sampling.extra_nodes(&grid)?;
        if !extra.is_empty() && extra.last().copied().unwrap_or(0.0) > family.horizon() {
            return domain(format!(
                "sup sampling reaches {}, beyond the family horizon {}",
                sampling.t_sup(),
                family.horizon()
            ));
        }
        let mut nodes = grid.points().to_vec();
        nodes.extend(extra);
        let cache = propagate_rows(&family, &nodes)?;
        Ok(Analysis { family, grid, sampling, nodes, cache })
    }

    /// Same grid and sampling, another family.
    pub fn with_family(&self, family: EvolutionFamily) -> Result<Analysis> {
        Self::with_grid(family, self.grid.clone(), self.sampling)
    }

    /// Half the step, same horizon and sampling.
    pub fn refined(&self) -> Result<Analysis> {
        Self::new(self.family.clone(), self.grid.refined()?, self.sampling)
    }

    pub fn family(&self) -> &EvolutionFamily {
        &self.family
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn sampling(&self) -> SupSampling {
        self.sampling
    }

    pub fn cache(&self) -> &FamilyEvalCache {
        &self.cache
    }

    pub fn dim(&self) -> usize {
        self.family.dim()
    }

    /// All sup nodes: the main grid followed by the extra sampling nodes.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn main_len(&self) -> usize {
        self.grid.len()
    }

    pub fn t_max(&self) -> f64 {
        self.grid.horizon()
    }

    pub fn t_sup(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn zeros(&self) -> GridFunction {
        GridFunction::zeros(self.grid.clone(), self.dim())
    }

    pub(crate) fn check_function(&self, u: &GridFunction) -> Result<()> {
        if !Arc::ptr_eq(u.grid(), &self.grid) && **u.grid() != *self.grid {
            return Err(crate::Error::GridMismatch("function is not on the analysis grid".into()));
        }
        if u.dim() != self.dim() {
            return Err(crate::Error::GridMismatch(format!(
                "function has dimension {}, family has {}",
                u.dim(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Rows used by O(N²) scans: every node for scalar-like families, an
    /// evenly strided subset for matrix families.
    pub(crate) fn scan_rows(&self, upto: usize) -> Vec<usize> {
        if self.cache.potential().is_some() || upto <= MATRIX_ROW_BUDGET {
            return (0..upto).collect();
        }
        let stride = upto.div_ceil(MATRIX_ROW_BUDGET);
        (0..upto).step_by(stride).collect()
    }

    /// `q_j = p(t_j) + α t_j` over all sup nodes (scalar-like families).
    fn shifted_potential(&self, alpha: f64) -> Option<Vec<f64>> {
        let p = self.cache.potential()?;
        Some(p.iter().zip(&self.nodes).map(|(p, t)| p + alpha * t).collect())
    }

    /// `max_{k >= j} ln ‖Φ(t_k)‖ − α t_k` over all sup nodes (matrix families).
    pub(crate) fn tail_bound(&self, alpha: f64) -> Option<Vec<f64>> {
        let lp = self.cache.log_phi_norms()?;
        let mut out = vec![0.0; lp.len()];
        let mut m = f64::NEG_INFINITY;
        for j in (0..lp.len()).rev() {
            let v = lp[j] - alpha * self.nodes[j];
            if v > m || v.is_nan() {
                m = if v.is_nan() { f64::INFINITY } else { v };
            }
            out[j] = m;
        }
        Some(out)
    }

    /// `ln W_α(s)` at every main node, the sup running over sup nodes `τ >= s`.
    pub fn log_weights(&self, alpha: f64) -> Vec<f64> {
        let main = self.main_len();
        if let Some(q) = self.shifted_potential(alpha) {
            let suf = suffix_min(&q);
            return (0..main).map(|i| q[i] - suf[i]).collect();
        }
        let tail = self.tail_bound(alpha);
        (0..main).into_par_iter().map(|i| self.row_log_sup_with(i, alpha, None, tail.as_deref())).collect()
    }

    /// `max_{j >= i} ln(e^{−α(t_j−t_i)} ‖U(t_j,t_i) x‖)`, or the operator
    /// norm when `x` is `None`. `−∞` for `x = 0`.
    pub fn row_log_sup(&self, i: usize, alpha: f64, x: Option<&[f64]>) -> f64 {
        self.row_log_sup_with(i, alpha, x, None)
    }

    pub(crate) fn row_log_sup_with(&self, i: usize, alpha: f64, x: Option<&[f64]>, tail: Option<&[f64]>) -> f64 {
        let end = self.nodes.len();
        let ti = self.nodes[i];
        let bound = tail.and_then(|t| Some((t, self.cache.log_inverse_bound(i, x)? + alpha * ti)));
        let mut best = f64::NEG_INFINITY;
        let mut step = |j: usize, v: f64| {
            if v > best || v.is_nan() {
                best = if v.is_nan() { f64::INFINITY } else { v };
            }
            match bound {
                Some((t, b)) if (j - i) % PRUNE_STRIDE == 0 && j + 1 < end && t[j + 1] + b + PRUNE_SLACK < best => {
                    ControlFlow::Break(())
                }
                _ => ControlFlow::Continue(()),
            }
        };
        match x {
            None => self.cache.try_for_each_log_norm_in_row(i, end, |j, l| step(j, l - alpha * (self.nodes[j] - ti))),
            Some(x) => self
                .cache
                .try_for_each_image_in_row(i, end, x, |j, y| step(j, vec_norm(y).ln() - alpha * (self.nodes[j] - ti))),
        }
        best
    }

    /// `φ_α(t_i, u) = ‖u(t_i)‖ W_α(t_i)` for scalar-like families, given
    /// `ln W_α(t_i)`.
    pub(crate) fn scale_by_weight(norm_u: f64, log_w: f64) -> f64 {
        if norm_u == 0.0 {
            return 0.0;
        }
        let w = log_w.exp();
        let direct = norm_u * w;
        if direct.is_finite() && w.is_finite() {
            direct
        } else {
            (norm_u.ln() + log_w).exp()
        }
    }

    /// `φ_α(t_i, u)` at every main node.
    pub fn phi_values(&self, alpha: f64, u: &GridFunction) -> Result<Vec<f64>> {
        self.check_function(u)?;
        let main = self.main_len();
        if self.cache.potential().is_some() {
            let lw = self.log_weights(alpha);
            return Ok((0..main).map(|i| Self::scale_by_weight(u.norm_at(i), lw[i])).collect());
        }
        let tail = self.tail_bound(alpha);
        Ok((0..main)
            .into_par_iter()
            .map(|i| {
                let x = u.at(i);
                if x.iter().all(|v| *v == 0.0) {
                    return 0.0;
                }
                self.row_phi(i, alpha, x, tail.as_deref())
            })
            .collect())
    }

    /// `‖u‖_{U,α}` from precomputed `ln W_α` (scalar-like families only).
    pub(crate) fn norm_from_log_weights(&self, u: &GridFunction, log_w: &[f64]) -> f64 {
        log_w
            .iter()
            .enumerate()
            .map(|(i, l)| Self::scale_by_weight(u.norm_at(i), *l))
            .fold(0.0, |m, v| if v > m || v.is_nan() { v } else { m })
    }

    fn row_phi(&self, i: usize, alpha: f64, x: &[f64], tail: Option<&[f64]>) -> f64 {
        let end = self.nodes.len();
        let ti = self.nodes[i];
        let bound = tail.and_then(|t| Some((t, self.cache.log_inverse_bound(i, Some(x))? + alpha * ti)));
        let mut best = vec_norm(x);
        self.cache.try_for_each_image_in_row(i, end, x, |j, y| {
            let v = (-alpha * (self.nodes[j] - ti)).exp() * vec_norm(y);
            if v > best || v.is_nan() {
                best = if v.is_nan() { f64::INFINITY } else { v };
            }
            match bound {
                Some((t, b)) if (j - i) % PRUNE_STRIDE == 0 && j + 1 < end && t[j + 1] + b + PRUNE_SLACK < best.ln() => {
                    ControlFlow::Break(())
                }
                _ => ControlFlow::Continue(()),
            }
        });
        best
    }

    /// `φ_α(t_i, x)` for a single node and state.
    pub fn phi_at(&self, alpha: f64, i: usize, x: &[f64]) -> f64 {
        if x.iter().all(|v| *v == 0.0) {
            return 0.0;
        }
        if let Some(q) = self.shifted_potential(alpha) {
            let m = q[i..].iter().fold(f64::INFINITY, |m, v| m.min(*v));
            return Self::scale_by_weight(vec_norm(x), q[i] - m);
        }
        self.row_phi(i, alpha, x, self.tail_bound(alpha).as_deref())
    }

    /// Calls `visit(j, e^{−α(t_j−t_i)} U(t_j, t_i) x)` for `j = i, …, end`,
    /// combining the exponents in the log domain for scalar-like families.
    pub fn for_each_weighted_image(
        &self,
        i: usize,
        end: usize,
        alpha: f64,
        x: &[f64],
        mut visit: impl FnMut(usize, &[f64]),
    ) {
        let ti = self.nodes[i];
        if let Some(p) = self.cache.potential() {
            let mut out = vec![0.0; x.len()];
            for j in i..end {
                let c = (p[i] - p[j] - alpha * (self.nodes[j] - ti)).exp();
                out.iter_mut().zip(x).for_each(|(o, v)| *o = c * v);
                visit(j, &out);
            }
            return;
        }
        let mut out = vec![0.0; x.len()];
        self.cache.for_each_image_in_row(i, end, x, |j, y| {
            let c = (-alpha * (self.nodes[j] - ti)).exp();
            out.iter_mut().zip(y).for_each(|(o, v)| *o = c * v);
            visit(j, &out);
        });
    }

    /// Split point of the window `[s, T_sup]` into a head and a tail half,
    /// arithmetic for linear sampling and geometric in `1 + t` otherwise.
    pub fn split_point(&self, s: f64) -> f64 {
        let end = self.t_sup();
        if self.sampling.is_log() {
            (0.5 * ((1.0 + s).ln() + (1.0 + end).ln())).exp() - 1.0
        } else {
            0.5 * (s + end)
        }
    }

    /// Head-versus-tail growth of `L(τ) = ln ‖U(τ, 0)‖ − ατ` over the sup
    /// nodes, split at [`Analysis::split_point`]`(0)`.
    ///
    /// Transition matrices are invertible, so `e^{−α(τ−s)}‖U(τ,s)‖ <=
    /// e^{−ατ}‖U(τ,0)‖ · e^{αs}‖U(s,0)⁻¹‖` and an unbounded row `s` forces an
    /// unbounded row 0.
    pub fn growth_scan(&self, alpha: f64) -> GrowthScan {
        let m = self.split_point(0.0);
        let (mut head, mut tail, mut tail_at) = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0);
        let mut bad = false;
        self.cache.for_each_log_norm_in_row(0, self.nodes.len(), |j, l| {
            let t = self.nodes[j];
            let v = l - alpha * t;
            if !v.is_finite() {
                bad = true;
            }
            if t <= m {
                head = head.max(v);
            } else if v > tail {
                tail = v;
                tail_at = t;
            }
        });
        if bad {
            return GrowthScan { growth: f64::INFINITY, s: 0.0, t: tail_at, peak: f64::INFINITY };
        }
        GrowthScan { growth: tail - head, s: 0.0, t: tail_at, peak: tail }
    }
}

pub(crate) fn suffix_min(q: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; q.len()];
    let mut m = f64::INFINITY;
    for i in (0..q.len()).rev() {
        m = m.min(q[i]);
        out[i] = m;
    }
    out
}
