//! Transition-matrix lookups `U(t_j, t_i)` on a fixed node set.

use std::collections::HashMap;
use std::ops::ControlFlow;

use crate::error::{domain, Error, Result};
use crate::family::{EvolutionFamily, MatrixOde};
use crate::linalg::{norm_2x2, spectral_norm, StateMatrix};

/// Condition number above which `Φ(t_j) Φ(t_i)⁻¹` is not trusted.
pub const COND_LIMIT: f64 = 1e8;

#[derive(Debug, Clone)]
enum Store {
    /// `U(t_j, t_i) = exp(p_i − p_j) · I`
    Potential(Vec<f64>),
    /// Flat row-major `n × n` blocks, one per node.
    Matrix {
        phi: Vec<f64>,
        inv: Vec<f64>,
        /// `ln ‖Φ(t_j)‖` and `ln ‖Φ(t_j)⁻¹‖`
        log_phi: Vec<f64>,
        log_inv: Vec<f64>,
        /// Rows `U(t_j, t_i)` for `j >= i`, propagated from `t_i`, for nodes
        /// whose `Φ(t_i)` is ill-conditioned.
        rows: HashMap<usize, Vec<f64>>,
    },
}

/// Cached transition data on an increasing node set starting at 0.
#[derive(Debug, Clone)]
pub struct FamilyEvalCache {
    times: Vec<f64>,
    dim: usize,
    store: Store,
}

/// Builds the cache for `family` on `times`.
pub fn propagate_rows(family: &EvolutionFamily, times: &[f64]) -> Result<FamilyEvalCache> {
    if times.is_empty() || times[0] != 0.0 {
        return domain("cache grid must start at 0");
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return domain("cache grid must be strictly increasing");
    }
    let last = *times.last().unwrap();
    if !last.is_finite() {
        return domain("cache grid must be finite");
    }
    if family.is_scalar_like() {
        let p = times.iter().map(|&t| family.potential_at(t).unwrap()).collect();
        return Ok(FamilyEvalCache { times: times.to_vec(), dim: family.dim(), store: Store::Potential(p) });
    }
    if last > family.horizon() {
        return domain(format!("cache grid reaches {last}, beyond the horizon {}", family.horizon()));
    }
    match family {
        EvolutionFamily::MatrixOde(m) => matrix_cache(m, times),
        EvolutionFamily::Rescaled { inner, shift } => Ok(propagate_rows(inner, times)?.rescaled(*shift)),
        _ => unreachable!("scalar-like families handled above"),
    }
}

fn matrix_cache(m: &MatrixOde, times: &[f64]) -> Result<FamilyEvalCache> {
    let n = m.coefficient.dim();
    let nn = n * n;
    let len = times.len();
    let mut phi = vec![0.0; len * nn];
    let mut inv = vec![0.0; len * nn];
    let mut current = StateMatrix::identity(n);
    let mut ill = Vec::new();
    for j in 0..len {
        if j > 0 {
            current = m.propagate(times[j], times[j - 1])?.mul(&current);
            if !current.is_finite() {
                return Err(Error::Propagation { t: times[j], reason: "non-finite fundamental matrix".into() });
            }
        }
        store_block(&mut phi[j * nn..(j + 1) * nn], &current);
        let well = current.condition_number() < COND_LIMIT;
        match current.try_inverse() {
            Some(i) if well && i.is_finite() => store_block(&mut inv[j * nn..(j + 1) * nn], &i),
            _ => ill.push(j),
        }
    }
    let mut rows = HashMap::new();
    for i in ill {
        let mut row = vec![0.0; (len - i) * nn];
        let mut u = StateMatrix::identity(n);
        store_block(&mut row[..nn], &u);
        for j in i + 1..len {
            u = m.propagate(times[j], times[j - 1])?.mul(&u);
            store_block(&mut row[(j - i) * nn..(j - i + 1) * nn], &u);
        }
        rows.insert(i, row);
    }
    let log_phi = phi.chunks(nn).map(|b| block_norm(b, n).ln()).collect();
    let log_inv = inv.chunks(nn).map(|b| block_norm(b, n).ln()).collect();
    Ok(FamilyEvalCache { times: times.to_vec(), dim: n, store: Store::Matrix { phi, inv, log_phi, log_inv, rows } })
}

fn store_block(dst: &mut [f64], m: &StateMatrix) {
    let n = m.dim();
    for r in 0..n {
        for c in 0..n {
            dst[r * n + c] = m.get(r, c);
        }
    }
}

/// `out = a · x` for a flat row-major block.
pub(crate) fn block_apply(a: &[f64], n: usize, x: &[f64], out: &mut [f64]) {
    for r in 0..n {
        let row = &a[r * n..(r + 1) * n];
        out[r] = row.iter().zip(x).map(|(p, q)| p * q).sum();
    }
}

/// `out = a · b` for flat row-major blocks.
pub(crate) fn block_mul(a: &[f64], b: &[f64], n: usize, out: &mut [f64]) {
    for r in 0..n {
        for c in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += a[r * n + k] * b[k * n + c];
            }
            out[r * n + c] = acc;
        }
    }
}

pub(crate) fn block_norm(a: &[f64], n: usize) -> f64 {
    match n {
        1 => a[0].abs(),
        2 => norm_2x2(a[0], a[1], a[2], a[3]),
        _ => spectral_norm(&nalgebra::DMatrix::from_row_slice(n, n, a)),
    }
}

impl FamilyEvalCache {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Potential values `p(t_j)` for scalar-like families.
    pub fn potential(&self) -> Option<&[f64]> {
        match &self.store {
            Store::Potential(p) => Some(p),
            Store::Matrix { .. } => None,
        }
    }

    /// Rows propagated directly because `Φ(t_i)` was ill-conditioned.
    pub fn fallback_rows(&self) -> usize {
        match &self.store {
            Store::Potential(_) => 0,
            Store::Matrix { rows, .. } => rows.len(),
        }
    }

    fn check(&self, j: usize, i: usize) {
        assert!(i <= j && j < self.times.len(), "cache lookup ({j}, {i}) out of range");
    }

    /// Flat block of `U(t_j, t_i)` written into `out`.
    pub(crate) fn block_into(&self, j: usize, i: usize, out: &mut [f64]) {
        self.check(j, i);
        let n = self.dim;
        let nn = n * n;
        if j == i {
            out[..nn].iter_mut().for_each(|v| *v = 0.0);
            for d in 0..n {
                out[d * n + d] = 1.0;
            }
            return;
        }
        match &self.store {
            Store::Potential(p) => {
                out[..nn].iter_mut().for_each(|v| *v = 0.0);
                let v = (p[i] - p[j]).exp();
                for d in 0..n {
                    out[d * n + d] = v;
                }
            }
            Store::Matrix { phi, inv, rows, .. } => match rows.get(&i) {
                Some(row) => out[..nn].copy_from_slice(&row[(j - i) * nn..(j - i + 1) * nn]),
                None => block_mul(&phi[j * nn..(j + 1) * nn], &inv[i * nn..(i + 1) * nn], n, out),
            },
        }
    }

    /// `U(t_j, t_i)`, `j >= i`.
    pub fn transition(&self, j: usize, i: usize) -> StateMatrix {
        let n = self.dim;
        let mut block = vec![0.0; n * n];
        self.block_into(j, i, &mut block);
        StateMatrix::from_row_major(n, &block)
    }

    /// `ln ‖U(t_j, t_i)‖`, exact in the log domain for scalar-like families.
    pub fn log_norm(&self, j: usize, i: usize) -> f64 {
        self.check(j, i);
        match &self.store {
            Store::Potential(p) => p[i] - p[j],
            Store::Matrix { .. } if j == i => 0.0,
            Store::Matrix { .. } => self.transition(j, i).norm().ln(),
        }
    }

    /// Calls `visit(j, ln ‖U(t_j, t_i)‖)` for `j = i, …, end`.
    pub fn for_each_log_norm_in_row(&self, i: usize, end: usize, mut visit: impl FnMut(usize, f64)) {
        self.try_for_each_log_norm_in_row(i, end, |j, l| {
            visit(j, l);
            ControlFlow::Continue(())
        });
    }

    /// As [`FamilyEvalCache::for_each_log_norm_in_row`], stopping when `visit` breaks.
    pub fn try_for_each_log_norm_in_row(
        &self,
        i: usize,
        end: usize,
        mut visit: impl FnMut(usize, f64) -> ControlFlow<()>,
    ) {
        let n = self.dim;
        match &self.store {
            Store::Potential(p) => {
                for j in i..end {
                    if visit(j, p[i] - p[j]).is_break() {
                        return;
                    }
                }
            }
            Store::Matrix { .. } => {
                let mut block = vec![0.0; n * n];
                if i < end && visit(i, 0.0).is_break() {
                    return;
                }
                for j in i + 1..end {
                    self.block_into(j, i, &mut block);
                    if visit(j, block_norm(&block, n).ln()).is_break() {
                        return;
                    }
                }
            }
        }
    }

    /// Calls `visit(j, U(t_j, t_i) x)` for `j = i, …, end`.
    pub fn for_each_image_in_row(&self, i: usize, end: usize, x: &[f64], mut visit: impl FnMut(usize, &[f64])) {
        self.try_for_each_image_in_row(i, end, x, |j, y| {
            visit(j, y);
            ControlFlow::Continue(())
        });
    }

    /// As [`FamilyEvalCache::for_each_image_in_row`], stopping when `visit` breaks.
    pub fn try_for_each_image_in_row(
        &self,
        i: usize,
        end: usize,
        x: &[f64],
        mut visit: impl FnMut(usize, &[f64]) -> ControlFlow<()>,
    ) {
        let n = self.dim;
        let nn = n * n;
        let mut out = vec![0.0; n];
        match &self.store {
            Store::Potential(p) => {
                for j in i..end {
                    let v = (p[i] - p[j]).exp();
                    out.iter_mut().zip(x).for_each(|(o, xv)| *o = v * xv);
                    if visit(j, &out).is_break() {
                        return;
                    }
                }
            }
            Store::Matrix { phi, inv, rows, .. } => {
                if i < end && visit(i, x).is_break() {
                    return;
                }
                match rows.get(&i) {
                    Some(row) => {
                        for j in i + 1..end {
                            block_apply(&row[(j - i) * nn..(j - i + 1) * nn], n, x, &mut out);
                            if visit(j, &out).is_break() {
                                return;
                            }
                        }
                    }
                    None => {
                        let mut y = vec![0.0; n];
                        block_apply(&inv[i * nn..(i + 1) * nn], n, x, &mut y);
                        for j in i + 1..end {
                            block_apply(&phi[j * nn..(j + 1) * nn], n, &y, &mut out);
                            if visit(j, &out).is_break() {
                                return;
                            }
                        }
                    }
                }
            }
        }
    }

    /// `ln ‖Φ(t_j)‖` per node for matrix families.
    pub(crate) fn log_phi_norms(&self) -> Option<&[f64]> {
        match &self.store {
            Store::Matrix { log_phi, .. } => Some(log_phi),
            Store::Potential(_) => None,
        }
    }

    /// `ln ‖Φ(t_i)⁻¹ x‖`, or `ln ‖Φ(t_i)⁻¹‖` without `x`, so that
    /// `ln ‖U(t_j, t_i) x‖ <= ln ‖Φ(t_j)‖ + bound`. `None` for potentials and
    /// directly propagated rows.
    pub(crate) fn log_inverse_bound(&self, i: usize, x: Option<&[f64]>) -> Option<f64> {
        let Store::Matrix { inv, log_inv, rows, .. } = &self.store else { return None };
        if rows.contains_key(&i) {
            return None;
        }
        let n = self.dim;
        Some(match x {
            None => log_inv[i],
            Some(x) => {
                let mut y = vec![0.0; n];
                block_apply(&inv[i * n * n..(i + 1) * n * n], n, x, &mut y);
                crate::linalg::vec_norm(&y).ln()
            }
        })
    }

    /// `out = U(t_j, t_i) x`.
    pub fn apply(&self, j: usize, i: usize, x: &[f64], out: &mut [f64]) {
        let n = self.dim;
        let mut block = vec![0.0; n * n];
        self.block_into(j, i, &mut block);
        block_apply(&block, n, x, out);
    }

    /// Cache of `exp(−λ (t − s)) U(t, s)` on the same nodes.
    pub fn rescaled(&self, shift: f64) -> FamilyEvalCache {
        let n = self.dim;
        let nn = n * n;
        let store = match &self.store {
            Store::Potential(p) => {
                Store::Potential(p.iter().zip(&self.times).map(|(v, t)| v + shift * t).collect())
            }
            Store::Matrix { phi, inv, log_phi, log_inv, rows } => {
                let mut phi = phi.clone();
                let mut inv = inv.clone();
                for (j, &t) in self.times.iter().enumerate() {
                    let down = (-shift * t).exp();
                    phi[j * nn..(j + 1) * nn].iter_mut().for_each(|v| *v *= down);
                    inv[j * nn..(j + 1) * nn].iter_mut().for_each(|v| *v /= down);
                }
                let rows = rows
                    .iter()
                    .map(|(&i, row)| {
                        let mut row = row.clone();
                        for j in i..self.times.len() {
                            let f = (-shift * (self.times[j] - self.times[i])).exp();
                            row[(j - i) * nn..(j - i + 1) * nn].iter_mut().for_each(|v| *v *= f);
                        }
                        (i, row)
                    })
                    .collect();
                let log_phi = log_phi.iter().zip(&self.times).map(|(v, t)| v - shift * t).collect();
                let log_inv = log_inv.iter().zip(&self.times).map(|(v, t)| v + shift * t).collect();
                Store::Matrix { phi, inv, log_phi, log_inv, rows }
            }
        };
        FamilyEvalCache { times: self.times.clone(), dim: n, store }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{BuiltinMatrix, IntegratorConfig};

    #[test]
    fn constant_decay_three_nodes() {
        let f = EvolutionFamily::constant_decay(1.0, 1).unwrap();
        let c = propagate_rows(&f, &[0.0, 1.0, 2.0]).unwrap();
        assert!((c.transition(2, 1).get(0, 0) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn single_node_cache() {
        let f = EvolutionFamily::example1();
        let c = propagate_rows(&f, &[0.0]).unwrap();
        assert_eq!(c.transition(0, 0).get(0, 0), 1.0);
    }

    #[test]
    fn rejects_bad_grids() {
        let f = EvolutionFamily::example1();
        assert!(propagate_rows(&f, &[]).is_err());
        assert!(propagate_rows(&f, &[0.5, 1.0]).is_err());
        assert!(propagate_rows(&f, &[0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn matrix_cache_matches_closed_form() {
        let cfg = IntegratorConfig { step: 0.01, horizon: 10.0, tolerance: 1e-8 };
        let f = EvolutionFamily::builtin(BuiltinMatrix::Shear, cfg);
        let times: Vec<f64> = (0..=1000).map(|k| k as f64 * 0.01).collect();
        let c = propagate_rows(&f, &times).unwrap();
        for (j, i) in [(1000, 0), (700, 300), (55, 54)] {
            let exact = BuiltinMatrix::Shear.closed_form(times[j], times[i]);
            assert!(c.transition(j, i).sub(&exact).norm() <= 1e-8, "({j}, {i})");
        }
        let mut seen = 0;
        c.for_each_image_in_row(300, 1001, &[1.0, 0.0], |j, v| {
            let e = BuiltinMatrix::Shear.closed_form(times[j], times[300]);
            assert!((v[0] - e.get(0, 0)).abs() < 1e-8 && (v[1] - e.get(1, 0)).abs() < 1e-8);
            seen += 1;
        });
        assert_eq!(seen, 701);
    }

    #[test]
    fn rescaled_cache_agrees_with_rescaled_family() {
        let cfg = IntegratorConfig { step: 0.05, horizon: 5.0, tolerance: 1e-8 };
        let f = EvolutionFamily::builtin(BuiltinMatrix::DampedRotation, cfg);
        let g = f.rescale(-0.7).unwrap();
        let times: Vec<f64> = (0..=100).map(|k| k as f64 * 0.05).collect();
        let a = propagate_rows(&g, &times).unwrap();
        let b = propagate_rows(&f, &times).unwrap().rescaled(-0.7);
        for (j, i) in [(100, 0), (60, 20)] {
            assert!(a.transition(j, i).sub(&b.transition(j, i)).norm() <= 1e-12 * b.transition(j, i).norm());
        }
    }

    #[test]
    fn beyond_horizon_is_domain_error() {
        let cfg = IntegratorConfig { step: 0.5, horizon: 1.0, tolerance: 1e-8 };
        let f = EvolutionFamily::builtin(BuiltinMatrix::Rotation, cfg);
        assert!(matches!(propagate_rows(&f, &[0.0, 0.5, 1.0, 1.5]), Err(Error::Domain(_))));
    }
}
