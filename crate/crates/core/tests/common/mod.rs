//! Closed-form families and brute-force evaluators written without the
//! library's caches or kernels.

#![allow(dead_code)]

use std::f64::consts::SQRT_2;

pub fn p_example1(t: f64) -> f64 {
    t * (2.0 + t.sin())
}

pub fn p_example2(t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t * (SQRT_2 + t.ln().sin())
    }
}

#[derive(Clone, Copy)]
pub enum Oracle {
    /// `U(t,s) = e^{p(s) − p(t)}`
    Potential(fn(f64) -> f64),
    Decay(f64),
    /// `e^{−(t−s)} [[1, 2(t−s)], [0, 1]]`
    Shear,
}

impl Oracle {
    pub fn dim(&self) -> usize {
        match self {
            Oracle::Shear => 2,
            _ => 1,
        }
    }

    pub fn matrix(&self, t: f64, s: f64) -> Vec<f64> {
        match *self {
            Oracle::Potential(p) => vec![(p(s) - p(t)).exp()],
            Oracle::Decay(r) => vec![(-r * (t - s)).exp()],
            Oracle::Shear => {
                let d = t - s;
                let e = (-d).exp();
                vec![e, 2.0 * d * e, 0.0, e]
            }
        }
    }

    /// `ln ‖U(t,s)‖`, without overflow for scalar families.
    pub fn log_norm(&self, t: f64, s: f64) -> f64 {
        match *self {
            Oracle::Potential(p) => p(s) - p(t),
            Oracle::Decay(r) => -r * (t - s),
            Oracle::Shear => op_norm(&self.matrix(t, s)).ln(),
        }
    }

    pub fn apply(&self, t: f64, s: f64, x: &[f64]) -> Vec<f64> {
        let m = self.matrix(t, s);
        let n = self.dim();
        (0..n).map(|r| (0..n).map(|c| m[r * n + c] * x[c]).sum()).collect()
    }
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Spectral norm of a 1×1 or 2×2 row-major matrix from the singular value
/// formula.
pub fn op_norm(m: &[f64]) -> f64 {
    match m.len() {
        1 => m[0].abs(),
        4 => {
            let (a, b, c, d) = (m[0], m[1], m[2], m[3]);
            let f = a * a + b * b + c * c + d * d;
            let det = a * d - b * c;
            ((f + (f * f - 4.0 * det * det).max(0.0).sqrt()) / 2.0).sqrt()
        }
        _ => panic!("oracle handles 1x1 and 2x2 only"),
    }
}

pub fn uniform(h: f64, t_max: f64) -> Vec<f64> {
    let n = (t_max / h).round() as usize;
    (0..=n).map(|k| k as f64 * h).collect()
}

/// `sup_{τ ∈ nodes, τ >= t} e^{−α(τ−t)} ‖U(τ,t) x‖`
pub fn phi_dense(o: Oracle, alpha: f64, nodes: &[f64], t: f64, x: &[f64]) -> f64 {
    if norm(x) == 0.0 {
        return 0.0;
    }
    let mut best = norm(x);
    for &tau in nodes.iter().filter(|&&tau| tau >= t) {
        let v = match o {
            Oracle::Shear => (-alpha * (tau - t)).exp() * norm(&o.apply(tau, t, x)),
            _ => (o.log_norm(tau, t) - alpha * (tau - t)).exp() * norm(x),
        };
        best = best.max(v);
    }
    best
}

/// `ln W_α(s)` by a dense sup over `nodes`.
pub fn log_weight_dense(o: Oracle, alpha: f64, nodes: &[f64], s: f64) -> f64 {
    nodes
        .iter()
        .filter(|&&tau| tau >= s)
        .map(|&tau| o.log_norm(tau, s) - alpha * (tau - s))
        .fold(0.0, f64::max)
}

/// `∫₀ᵗ U(t,ξ) f(ξ) dξ` by composite Simpson with `panels` (even) panels.
pub fn volterra(o: Oracle, f: &dyn Fn(f64) -> Vec<f64>, t: f64, panels: usize) -> Vec<f64> {
    assert!(panels % 2 == 0);
    let n = o.dim();
    let mut acc = vec![0.0; n];
    if t == 0.0 {
        return acc;
    }
    let h = t / panels as f64;
    for k in 0..=panels {
        let xi = k as f64 * h;
        let w = if k == 0 || k == panels { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
        let y = o.apply(t, xi, &f(xi));
        acc.iter_mut().zip(&y).for_each(|(a, v)| *a += w * v);
    }
    acc.iter().map(|a| a * h / 3.0).collect()
}

/// Smooth compactly supported bump `sin²(π(t−a)/(b−a))` on `[a, b]`.
pub fn sin2_bump(a: f64, b: f64) -> impl Fn(f64) -> f64 + Copy {
    move |t| {
        if t <= a || t >= b {
            0.0
        } else {
            (std::f64::consts::PI * (t - a) / (b - a)).sin().powi(2)
        }
    }
}
