//! Special grid functions: cutoffs, the Step-1/Step-2 witnesses, the
//! exponential probe `ũ_{s,x}`, the ψ_n ratio witness and seeded bumps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::analysis::Analysis;
use crate::error::{domain, Error, Result};
use crate::grid::{GridFunction, TimeGrid};
use crate::linalg::vec_norm;

/// `θ_n = ln(eⁿ / (eⁿ − 1))`
pub fn theta_n(n: f64) -> f64 {
    -(-(-n).exp()).ln_1p()
}

/// Trapezoidal cutoff: 0 up to `rise_start`, linear up to 1 over
/// `rise_width`, 1 until `fall_start`, linear down to 0 over `fall_width`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateauSpec {
    pub rise_start: f64,
    pub rise_width: f64,
    pub fall_start: f64,
    pub fall_width: f64,
}

impl PlateauSpec {
    pub fn new(rise_start: f64, rise_width: f64, fall_start: f64, fall_width: f64) -> Result<Self> {
        let spec = PlateauSpec { rise_start, rise_width, fall_start, fall_width };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if !(self.rise_width > 0.0 && self.fall_width > 0.0) {
            return domain("plateau ramp widths must be positive");
        }
        if !(self.rise_start >= 0.0) || !(self.rise_start + self.rise_width <= self.fall_start * (1.0 + 1e-12)) {
            return domain(format!(
                "plateau needs 0 <= s and s + θ <= fall start, got s = {}, θ = {}, fall = {}",
                self.rise_start, self.rise_width, self.fall_start
            ));
        }
        if !self.fall_start.is_finite() || !self.fall_width.is_finite() {
            return domain("plateau must be finite");
        }
        Ok(())
    }

    pub fn end(&self) -> f64 {
        self.fall_start + self.fall_width
    }

    pub fn value(&self, t: f64) -> f64 {
        if t <= self.rise_start || t >= self.end() {
            0.0
        } else if t < self.rise_start + self.rise_width {
            (t - self.rise_start) / self.rise_width
        } else if t <= self.fall_start {
            1.0
        } else {
            (self.end() - t) / self.fall_width
        }
    }
}

/// Scalar grid function of a cutoff.
pub fn make_plateau(spec: PlateauSpec, grid: &std::sync::Arc<TimeGrid>) -> Result<GridFunction> {
    spec.validate()?;
    if spec.end() > grid.horizon() * (1.0 + 1e-12) {
        return domain(format!("plateau ends at {}, beyond the horizon {}", spec.end(), grid.horizon()));
    }
    Ok(GridFunction::from_fn(grid.clone(), 1, |t, out| out[0] = spec.value(t)))
}

/// Pointwise product of a scalar cutoff and `u`.
pub fn scale_truncate(u: &GridFunction, plateau: &GridFunction) -> Result<GridFunction> {
    u.ensure_same_grid(plateau)?;
    if plateau.dim() != 1 {
        return Err(Error::GridMismatch("cutoff must be scalar".into()));
    }
    let mut out = u.clone();
    let d = u.dim();
    for (k, w) in plateau.values().iter().enumerate() {
        out.values_mut()[k * d..(k + 1) * d].iter_mut().for_each(|v| *v *= w);
    }
    Ok(out)
}

/// A constructed function with the distance its anchor moved when snapped
/// to the grid.
#[derive(Debug, Clone)]
pub struct Witness {
    pub function: GridFunction,
    pub snap_error: f64,
}

fn check_direction(an: &Analysis, x: &[f64]) -> Result<()> {
    if x.len() != an.dim() {
        return Err(Error::GridMismatch(format!("direction has length {}, state dimension is {}", x.len(), an.dim())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return domain("direction must be finite");
    }
    Ok(())
}

/// `values[j] = w(t_j) · e^{−α(t_j−s)} U(t_j, s) x` for nodes `t_j >= s`, with
/// `log_weight = ln w`. Scalar-like families combine all exponents before
/// exponentiating.
fn transported(
    an: &Analysis,
    alpha: f64,
    i: usize,
    x: &[f64],
    log_weight: impl Fn(f64) -> f64,
) -> GridFunction {
    let d = an.dim();
    let mut out = an.zeros();
    let nodes = an.nodes();
    let main = an.main_len();
    let vals = out.values_mut();
    if let Some(p) = an.cache().potential() {
        for j in i..main {
            let lw = log_weight(nodes[j]);
            if lw == f64::NEG_INFINITY {
                continue;
            }
            let c = (lw + p[i] - p[j] - alpha * (nodes[j] - nodes[i])).exp();
            if c < f64::MIN_POSITIVE {
                continue;
            }
            for (o, v) in vals[j * d..(j + 1) * d].iter_mut().zip(x) {
                *o = c * v;
            }
        }
        return out;
    }
    an.for_each_weighted_image(i, main, alpha, x, |j, y| {
        let lw = log_weight(nodes[j]);
        if lw != f64::NEG_INFINITY {
            let w = lw.exp();
            for (o, v) in vals[j * d..(j + 1) * d].iter_mut().zip(y) {
                *o = w * v;
            }
        }
    });
    out
}

/// Step-1 cutoff: 0 on `[0, s]`, ramp of width θ_n, plateau to `n`, ramp
/// down over θ_n.
pub fn step1_cutoff(s: f64, n: usize) -> Result<PlateauSpec> {
    let th = theta_n(n as f64);
    if s + th > n as f64 {
        return domain(format!("need s + θ_n <= n, got s = {s}, n = {n}"));
    }
    PlateauSpec::new(s, th, n as f64, th)
}

fn anchor(an: &Analysis, s: f64) -> Result<(usize, f64)> {
    let (i, err) = an.grid().snap(s)?;
    Ok((i, err))
}

fn check_support(an: &Analysis, spec: &PlateauSpec) -> Result<()> {
    if spec.end() > an.t_max() * (1.0 + 1e-12) {
        return domain(format!(
            "horizon {} too short for a cutoff ending at {}",
            an.t_max(),
            spec.end()
        ));
    }
    Ok(())
}

/// `f_n(ξ) = α_n(ξ) e^{−α(ξ−s)} U(ξ, s) x`
pub fn make_witness_f(an: &Analysis, alpha: f64, s: f64, x: &[f64], n: usize) -> Result<Witness> {
    check_direction(an, x)?;
    let (i, snap_error) = anchor(an, s)?;
    let spec = step1_cutoff(an.nodes()[i], n)?;
    check_support(an, &spec)?;
    let function = transported(an, alpha, i, x, |t| spec.value(t).ln());
    Ok(Witness { function, snap_error })
}

/// The Step-1 profile moved to start at `s`: ramp over θ_len on `[s, s+θ]`,
/// plateau up to `s + len`, ramp down, times `e^{−α(ξ−s)} U(ξ, s) x`.
pub fn make_window_witness(an: &Analysis, alpha: f64, s: f64, x: &[f64], len: f64) -> Result<Witness> {
    check_direction(an, x)?;
    let (i, snap_error) = anchor(an, s)?;
    let si = an.nodes()[i];
    let th = theta_n(len);
    let spec = PlateauSpec::new(si, th, si + len, th)?;
    check_support(an, &spec)?;
    let function = transported(an, alpha, i, x, |t| spec.value(t).ln());
    Ok(Witness { function, snap_error })
}

/// `g_{n,k}(ξ) = α_n(ξ) (ξ−s)^k U(ξ, s) x`
pub fn make_witness_g(an: &Analysis, s: f64, x: &[f64], k: u32, n: usize) -> Result<Witness> {
    check_direction(an, x)?;
    let (i, snap_error) = anchor(an, s)?;
    let si = an.nodes()[i];
    let spec = step1_cutoff(si, n)?;
    check_support(an, &spec)?;
    let function = transported(an, 0.0, i, x, |t| (spec.value(t) * (t - si).powi(k as i32)).ln());
    Ok(Witness { function, snap_error })
}

/// `ũ_{s,x}`: `x` on `[0, s]`, `e^{ν(ξ−s)} U(ξ, s) x` afterwards.
pub fn make_u_tilde(an: &Analysis, nu: f64, s: f64, x: &[f64]) -> Result<Witness> {
    check_direction(an, x)?;
    if vec_norm(x) == 0.0 {
        return Err(Error::Degenerate("ũ needs a nonzero direction".into()));
    }
    if !(nu > 0.0) {
        return domain("ν must be positive");
    }
    let (i, snap_error) = anchor(an, s)?;
    let mut function = transported(an, -nu, i, x, |_| 0.0);
    let d = an.dim();
    for k in 0..i {
        function.values_mut()[k * d..(k + 1) * d].copy_from_slice(x);
    }
    Ok(Witness { function, snap_error })
}

/// The C¹ profile ψ_n: 0 up to `s`, the quadratic `a (t−s)²` up to `s+δ`,
/// the tangent line of the exponential through `t_n`, then `e^{(t−s)/n}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiProfile {
    pub n: f64,
    pub s: f64,
    pub t_n: f64,
    pub delta: f64,
    pub a: f64,
}

impl PsiProfile {
    /// Matching value and slope at `s` and `s + δ` gives
    /// `δ = 2(t_n − s − n)` and `a = e^{(t_n−s)/n} / (2nδ)`.
    pub fn solve(n: f64, s: f64, t_n: f64) -> Result<Self> {
        let gap = t_n - s;
        if !(gap > n) {
            return Err(Error::Construction(format!("need t_n > s + n, got t_n − s = {gap}, n = {n}")));
        }
        let delta = 2.0 * (gap - n);
        if !(delta < gap) {
            return Err(Error::Construction(format!(
                "patch width δ = {delta} must lie in (0, t_n − s = {gap}); need t_n − s < 2n"
            )));
        }
        let a = (gap / n).exp() / (2.0 * n * delta);
        Ok(PsiProfile { n, s, t_n, delta, a })
    }

    fn e_tn(&self) -> f64 {
        ((self.t_n - self.s) / self.n).exp()
    }

    pub fn value(&self, t: f64) -> f64 {
        let (n, s) = (self.n, self.s);
        if t <= s {
            0.0
        } else if t <= s + self.delta {
            self.a * (t - s).powi(2)
        } else if t <= self.t_n {
            self.e_tn() * ((t - self.t_n) / n + 1.0)
        } else {
            ((t - s) / n).exp()
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let (n, s) = (self.n, self.s);
        if t <= s {
            0.0
        } else if t <= s + self.delta {
            2.0 * self.a * (t - s)
        } else if t <= self.t_n {
            self.e_tn() / n
        } else {
            ((t - s) / n).exp() / n
        }
    }

    /// `ln ψ(t)`, exact on the exponential part.
    pub fn log_value(&self, t: f64) -> f64 {
        if t > self.t_n {
            (t - self.s) / self.n
        } else {
            self.value(t).ln()
        }
    }

    /// `ln ψ'(t)`, exact on the exponential part.
    pub fn log_derivative(&self, t: f64) -> f64 {
        if t > self.t_n {
            (t - self.s) / self.n - self.n.ln()
        } else {
            self.derivative(t).ln()
        }
    }

    /// Value and slope just left and right of `t_n`.
    pub fn jump_at_t_n(&self) -> (f64, f64) {
        let left = self.e_tn() * ((self.t_n - self.t_n) / self.n + 1.0);
        let right = ((self.t_n - self.s) / self.n).exp();
        (left - right, self.e_tn() / self.n - right / self.n)
    }
}

/// The pair `u_n = ψ_n U(·, s) x`, `f_n = ψ_n' U(·, s) x`.
#[derive(Debug, Clone)]
pub struct PsiWitness {
    pub u: GridFunction,
    pub f: GridFunction,
    pub profile: PsiProfile,
    pub snap_error: f64,
}

/// ψ_n ratio witness anchored at `s` and `t_n` (both snapped to nodes).
pub fn make_psi_ratio_witness(an: &Analysis, n: usize, s: f64, x: &[f64], t_n: f64) -> Result<PsiWitness> {
    check_direction(an, x)?;
    if vec_norm(x) == 0.0 {
        return Err(Error::Degenerate("ψ witness needs a nonzero direction".into()));
    }
    let (i, e1) = anchor(an, s)?;
    let (k, e2) = an.grid().snap(t_n.min(an.t_max()))?;
    if t_n > an.t_max() {
        return domain(format!("t_n = {t_n} beyond the horizon {}", an.t_max()));
    }
    let nodes = an.nodes();
    let profile = PsiProfile::solve(n as f64, nodes[i], nodes[k])?;
    let u = transported(an, 0.0, i, x, |t| profile.log_value(t));
    let f = transported(an, 0.0, i, x, |t| profile.log_derivative(t));
    Ok(PsiWitness { u, f, profile, snap_error: e1.max(e2) })
}

/// For every sup node `i`, the smallest maximizer over `j >= i` of
/// `t_j ↦ φ_α(t_j, ũ_{t_i,x})` with `ν = 1/n`, for scalar-like families.
///
/// `ln φ_α(t_j, ũ) = ν(t_j − s) + α t_j − min_{τ >= t_j}(p(τ) + ατ) + const`,
/// so the maximizer does not depend on `s` beyond the range `j >= i`.
pub fn u_tilde_argmax_table(an: &Analysis, alpha: f64, n: usize) -> Option<Vec<usize>> {
    let p = an.cache().potential()?;
    let nodes = an.nodes();
    let nu = 1.0 / n as f64;
    let q: Vec<f64> = p.iter().zip(nodes).map(|(p, t)| p + alpha * t).collect();
    let suf = crate::analysis::suffix_min(&q);
    let len = nodes.len();
    let mut out = vec![0; len];
    let mut best = f64::NEG_INFINITY;
    let mut arg = len - 1;
    for j in (0..len).rev() {
        let v = (nu + alpha) * nodes[j] - suf[j];
        if v >= best {
            best = v;
            arg = j;
        }
        out[j] = arg;
    }
    Some(out)
}

/// Anchor `(s, t_n)` for the ψ_n witness: scans `s` upward and takes the
/// first row whose maximizer lies beyond `s + n`, using `t_n = s + 1.5n`
/// when the maximizer is further than `s + 2n`.
pub fn find_psi_anchor(an: &Analysis, alpha: f64, n: usize) -> Option<(f64, f64)> {
    let table = u_tilde_argmax_table(an, alpha, n)?;
    let nf = n as f64;
    let limit = an.t_max() - 2.0 * nf;
    if limit < 0.0 {
        return None;
    }
    let nodes = an.nodes();
    let h = an.grid().max_step();
    let stride = ((0.25 / h).round() as usize).max(1);
    let last = an.grid().points().partition_point(|&t| t <= limit);
    for i in (0..last).step_by(stride) {
        let s = nodes[i];
        let t_star = nodes[table[i]];
        let gap = t_star - s;
        if gap > nf * (1.0 + 1e-9) && gap < 2.0 * nf && t_star <= an.t_max() {
            return Some((s, t_star));
        }
        if gap >= 2.0 * nf {
            return Some((s, s + 1.5 * nf));
        }
    }
    None
}

/// A random trapezoid bump on `(0, T_max)` with a seeded direction.
pub fn random_bump(an: &Analysis, rng: &mut ChaCha8Rng) -> GridFunction {
    let t_max = an.t_max();
    let h = an.grid().max_step();
    let len = rng.gen_range(0.1..0.4) * t_max;
    let start = rng.gen_range(0.02..0.55) * t_max;
    let rise = (rng.gen_range(0.02..0.3) * len).max(2.0 * h);
    let fall = (rng.gen_range(0.02..0.3) * len).max(2.0 * h);
    let fall_start = (start + len - fall).max(start + rise);
    let spec = PlateauSpec { rise_start: start, rise_width: rise, fall_start, fall_width: fall };
    let d = an.dim();
    let mut x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let nx = vec_norm(&x).max(1e-300);
    let amp = rng.gen_range(0.5..2.0);
    x.iter_mut().for_each(|v| *v *= amp / nx);
    GridFunction::from_fn(an.grid().clone(), d, |t, out| {
        let w = spec.value(t.min(t_max));
        out.iter_mut().zip(&x).for_each(|(o, v)| *o = w * v);
    })
}

/// `count` seeded random bumps.
pub fn random_bumps(an: &Analysis, count: usize, seed: u64) -> Vec<GridFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_bump(an, &mut rng)).collect()
}

/// Triangle bump `max(0, 1 − |t − center| / half_width) · x`.
pub fn triangle_bump(an: &Analysis, center: f64, half_width: f64, x: &[f64]) -> Result<GridFunction> {
    check_direction(an, x)?;
    if !(half_width > 0.0) || center - half_width < 0.0 || center + half_width > an.t_max() {
        return domain("triangle bump must lie inside [0, T_max]");
    }
    Ok(GridFunction::from_fn(an.grid().clone(), an.dim(), |t, out| {
        let w = (1.0 - (t - center).abs() / half_width).max(0.0);
        out.iter_mut().zip(x).for_each(|(o, v)| *o = w * v);
    }))
}

/// Seeded unit vectors: the coordinate directions followed by `n_random`
/// Gaussian directions.
pub fn probe_directions(dim: usize, n_random: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut dirs: Vec<Vec<f64>> = (0..dim)
        .map(|k| {
            let mut e = vec![0.0; dim];
            e[k] = 1.0;
            e
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while dirs.len() < dim + n_random {
        let x: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let nx = vec_norm(&x);
        if nx > 1e-12 {
            dirs.push(x.iter().map(|v| v / nx).collect());
        }
    }
    dirs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::EvolutionFamily;
    use std::sync::Arc;

    fn decay(h: f64, t: f64) -> Analysis {
        Analysis::plain(EvolutionFamily::constant_decay(1.0, 1).unwrap(), TimeGrid::uniform(h, t).unwrap()).unwrap()
    }

    #[test]
    fn theta_values() {
        assert!((theta_n(3.0) - 0.051069).abs() < 1e-6);
        assert!(theta_n(5.0) < 1.0);
    }

    #[test]
    fn plateau_values() {
        let g = Arc::new(TimeGrid::uniform(0.25, 5.0).unwrap());
        let p = make_plateau(PlateauSpec::new(1.0, 0.5, 3.0, 0.5).unwrap(), &g).unwrap();
        assert_eq!(p.interp(2.0).unwrap()[0], 1.0);
        assert_eq!(p.interp(1.0).unwrap()[0], 0.0);
        assert_eq!(p.interp(1.25).unwrap()[0], 0.5);
        assert!(PlateauSpec::new(1.0, 3.0, 2.0, 0.5).is_err());
        assert!(make_plateau(PlateauSpec::new(1.0, 0.5, 4.8, 0.5).unwrap(), &g).is_err());
    }

    #[test]
    fn step1_and_step2_witness_values() {
        let an = decay(0.01, 20.0);
        let f = make_witness_f(&an, 0.0, 0.0, &[1.0], 5).unwrap().function;
        assert!((f.interp(1.0).unwrap()[0] - (-1.0f64).exp()).abs() < 1e-12);
        assert_eq!(f.at(0)[0], 0.0);
        let past = an.grid().node_index(5.01).unwrap();
        assert!(f.values()[past..].iter().all(|v| *v == 0.0));
        let g = make_witness_g(&an, 0.0, &[1.0], 1, 5).unwrap().function;
        assert!((g.interp(2.0).unwrap()[0] - 2.0 * (-2.0f64).exp()).abs() < 1e-12);
        let g0 = make_witness_g(&an, 0.0, &[1.0], 0, 5).unwrap().function;
        assert_eq!(g0, f);
        assert!(make_witness_f(&an, 0.0, 0.0, &[1.0], 20).is_err());
    }

    #[test]
    fn u_tilde_values() {
        let an = decay(0.01, 5.0);
        let u = make_u_tilde(&an, 0.5, 0.0, &[1.0]).unwrap().function;
        assert!((u.interp(2.0).unwrap()[0] - (-1.0f64).exp()).abs() < 1e-12);
        let u = make_u_tilde(&an, 0.5, 1.0, &[2.0]).unwrap().function;
        assert_eq!(u.at(0)[0], 2.0);
        assert_eq!(u.at(100)[0], 2.0);
        assert!(matches!(make_u_tilde(&an, 0.5, 1.0, &[0.0]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn psi_profile_is_c1() {
        let p = PsiProfile::solve(8.0, 3.0, 14.0).unwrap();
        let (dv, dd) = p.jump_at_t_n();
        assert!(dv.abs() < 1e-12 && dd.abs() < 1e-12);
        let m = p.s + p.delta;
        assert!((p.value(m) - p.e_tn() * ((m - p.t_n) / p.n + 1.0)).abs() < 1e-12);
        assert!((2.0 * p.a * p.delta - p.e_tn() / p.n).abs() < 1e-12);
        assert!(PsiProfile::solve(8.0, 0.0, 7.0).is_err());
        assert!(PsiProfile::solve(8.0, 0.0, 17.0).is_err());
    }

    #[test]
    fn truncation() {
        let an = decay(0.5, 5.0);
        let g = an.grid().clone();
        let u = GridFunction::from_fn(g.clone(), 1, |_, o| o[0] = 1.0);
        let zero = GridFunction::zeros(g.clone(), 1);
        assert_eq!(scale_truncate(&u, &zero).unwrap(), zero);
        let p = make_plateau(PlateauSpec::new(1.0, 1.0, 3.0, 1.0).unwrap(), &g).unwrap();
        let v = scale_truncate(&u, &p).unwrap();
        assert_eq!(v.interp(1.5).unwrap()[0], 0.5);
    }

    #[test]
    fn bumps_are_reproducible_and_vanish_at_zero() {
        let an = decay(0.01, 10.0);
        let a = random_bumps(&an, 5, 7);
        let b = random_bumps(&an, 5, 7);
        assert_eq!(a, b);
        for u in &a {
            assert_eq!(u.norm_at(0), 0.0);
            assert_eq!(u.norm_at(u.len() - 1), 0.0);
        }
    }
}
