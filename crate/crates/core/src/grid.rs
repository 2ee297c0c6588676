//! Time grids on `[0, T_max]` and grid functions with piecewise-linear
//! interpolation.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::error::{domain, Error, Result};
use crate::linalg::vec_norm;

/// Strictly increasing nodes `0 = t_0 < … < t_{N−1} = T_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
    step: Option<f64>,
}

impl TimeGrid {
    /// Uniform grid `t_k = k h`; `T_max / h` must be an integer.
    pub fn uniform(h: f64, t_max: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return domain(format!("grid step must be positive, got {h}"));
        }
        if !(t_max > 0.0) || !t_max.is_finite() {
            return domain(format!("horizon must be positive, got {t_max}"));
        }
        let cells = t_max / h;
        let n = cells.round();
        if n < 1.0 || (cells - n).abs() > 1e-6 * n.max(1.0) {
            return domain(format!("horizon {t_max} is not a whole number of steps {h}"));
        }
        let n = n as usize;
        let mut points: Vec<f64> = (0..=n).map(|k| k as f64 * h).collect();
        points[n] = t_max;
        Ok(TimeGrid { points, step: Some(h) })
    }

    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points[0] != 0.0 {
            return domain("grid must start at 0");
        }
        if points.iter().any(|p| !p.is_finite()) || points.windows(2).any(|w| !(w[1] > w[0])) {
            return domain("grid must be finite and strictly increasing");
        }
        Ok(TimeGrid { points, step: None })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.points.last().unwrap()
    }

    /// Uniform step, if the grid was built uniformly.
    pub fn step(&self) -> Option<f64> {
        self.step
    }

    /// Largest cell width.
    pub fn max_step(&self) -> f64 {
        self.step
            .unwrap_or_else(|| self.points.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max))
    }

    /// Nearest node and the snapping error `|t − t_k|`.
    pub fn snap(&self, t: f64) -> Result<(usize, f64)> {
        if !(t >= 0.0 && t <= self.horizon()) {
            return domain(format!("t = {t} outside [0, {}]", self.horizon()));
        }
        let k = self.points.partition_point(|&p| p < t);
        let best = match k {
            0 => 0,
            k if k == self.points.len() => k - 1,
            k => {
                if t - self.points[k - 1] <= self.points[k] - t {
                    k - 1
                } else {
                    k
                }
            }
        };
        Ok((best, (t - self.points[best]).abs()))
    }

    /// Index of the node equal to `t` up to rounding of the grid arithmetic.
    pub fn node_index(&self, t: f64) -> Result<usize> {
        let (k, err) = self.snap(t)?;
        let tol = 1e-7 * self.max_step().min(1.0);
        if err > tol {
            return domain(format!("t = {t} is not a grid node (nearest {} )", self.points[k]));
        }
        Ok(k)
    }

    /// Number of cells in a shift of length `t`, which must be a whole number
    /// of uniform steps.
    pub fn aligned_steps(&self, t: f64) -> Result<usize> {
        let h = self
            .step
            .ok_or_else(|| Error::Domain("shifts need a uniform grid".into()))?;
        if !(t >= 0.0) || !t.is_finite() {
            return domain(format!("shift must be finite and >= 0, got {t}"));
        }
        let k = (t / h).round();
        if (t - k * h).abs() > 1e-7 * h {
            return domain(format!("shift {t} is not a multiple of the grid step {h}"));
        }
        Ok(k as usize)
    }

    /// Same horizon, half the step.
    pub fn refined(&self) -> Result<TimeGrid> {
        match self.step {
            Some(h) => TimeGrid::uniform(h / 2.0, self.horizon()),
            None => {
                let mut pts = Vec::with_capacity(2 * self.points.len() - 1);
                for w in self.points.windows(2) {
                    pts.push(w[0]);
                    pts.push(0.5 * (w[0] + w[1]));
                }
                pts.push(self.horizon());
                TimeGrid::from_points(pts)
            }
        }
    }
}

/// How sups over `τ ∈ [t, T_sup]` are sampled beyond the main grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SupSampling {
    /// Uniform continuation of the main grid step up to `t_sup`.
    Linear { t_sup: f64 },
    /// Geometric nodes on `(T_max, t_sup]`, `per_efold` per factor `e`.
    /// Limsup windows are taken in `ln t` as well.
    LogAugmented { t_sup: f64, per_efold: usize },
}

impl SupSampling {
    pub fn t_sup(&self) -> f64 {
        match *self {
            SupSampling::Linear { t_sup } | SupSampling::LogAugmented { t_sup, .. } => t_sup,
        }
    }

    pub fn is_log(&self) -> bool {
        matches!(self, SupSampling::LogAugmented { .. })
    }

    /// Extra nodes strictly beyond the horizon of `grid`.
    pub fn extra_nodes(&self, grid: &TimeGrid) -> Result<Vec<f64>> {
        let t_max = grid.horizon();
        let t_sup = self.t_sup();
        if !(t_sup >= t_max) || !t_sup.is_finite() {
            return domain(format!("T_sup = {t_sup} must be finite and >= T_max = {t_max}"));
        }
        if t_sup == t_max {
            return Ok(Vec::new());
        }
        match *self {
            SupSampling::Linear { .. } => {
                let h = grid.max_step();
                let n = ((t_sup - t_max) / h).ceil() as usize;
                let mut v: Vec<f64> = (1..=n).map(|k| t_max + k as f64 * h).collect();
                if let Some(last) = v.last_mut() {
                    *last = t_sup;
                }
                v.retain(|&t| t > t_max);
                v.dedup();
                Ok(v)
            }
            SupSampling::LogAugmented { per_efold, .. } => {
                if per_efold == 0 {
                    return domain("log-augmented sampling needs at least one node per e-fold");
                }
                let ratio = (t_sup / t_max).ln();
                let n = (per_efold as f64 * ratio).ceil().max(1.0) as usize;
                let mut v: Vec<f64> = (1..=n).map(|k| t_max * (ratio * k as f64 / n as f64).exp()).collect();
                v[n - 1] = t_sup;
                Ok(v)
            }
        }
    }
}

/// A map `[0, T_max] → ℝⁿ` stored at the nodes of a grid.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Arc<TimeGrid>,
    dim: usize,
    values: Vec<f64>,
}

impl PartialEq for GridFunction {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.values == other.values && self.same_grid(other)
    }
}

impl GridFunction {
    /// `values` holds `dim` entries per node, node-major.
    pub fn new(grid: Arc<TimeGrid>, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return domain("dimension must be >= 1");
        }
        if values.len() != grid.len() * dim {
            return Err(Error::GridMismatch(format!(
                "{} values for {} nodes of dimension {dim}",
                values.len(),
                grid.len()
            )));
        }
        Ok(GridFunction { grid, dim, values })
    }

    pub fn zeros(grid: Arc<TimeGrid>, dim: usize) -> Self {
        let values = vec![0.0; grid.len() * dim];
        GridFunction { grid, dim, values }
    }

    /// Samples `f(t, out)` at every node.
    pub fn from_fn(grid: Arc<TimeGrid>, dim: usize, mut f: impl FnMut(f64, &mut [f64])) -> Self {
        let mut values = vec![0.0; grid.len() * dim];
        for (k, &t) in grid.points().iter().enumerate() {
            f(t, &mut values[k * dim..(k + 1) * dim]);
        }
        GridFunction { grid, dim, values }
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn at(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn norm_at(&self, k: usize) -> f64 {
        vec_norm(self.at(k))
    }

    pub fn same_grid(&self, other: &GridFunction) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub(crate) fn ensure_same_grid(&self, other: &GridFunction) -> Result<()> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch("functions live on different grids".into()));
        }
        Ok(())
    }

    /// Piecewise-linear value at `t ∈ [0, T_max]`; exact at nodes.
    pub fn interp(&self, t: f64) -> Result<Vec<f64>> {
        let pts = self.grid.points();
        if !(t >= 0.0 && t <= self.grid.horizon()) {
            return domain(format!("t = {t} outside [0, {}]", self.grid.horizon()));
        }
        let k = pts.partition_point(|&p| p <= t);
        if k == 0 {
            return Ok(self.at(0).to_vec());
        }
        let lo = k - 1;
        if pts[lo] == t || lo + 1 == pts.len() {
            return Ok(self.at(lo).to_vec());
        }
        let w = (t - pts[lo]) / (pts[lo + 1] - pts[lo]);
        Ok(self
            .at(lo)
            .iter()
            .zip(self.at(lo + 1))
            .map(|(a, b)| a + w * (b - a))
            .collect())
    }

    pub fn scaled(&self, factor: f64) -> GridFunction {
        let values = self.values.iter().map(|v| v * factor).collect();
        GridFunction { grid: self.grid.clone(), dim: self.dim, values }
    }

    /// `a · self + b · other`
    pub fn combine(&self, a: f64, other: &GridFunction, b: f64) -> Result<GridFunction> {
        self.ensure_same_grid(other)?;
        if self.dim != other.dim {
            return Err(Error::GridMismatch("dimensions differ".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Ok(GridFunction { grid: self.grid.clone(), dim: self.dim, values })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// CSV text `t,v0,…` with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t");
        for d in 0..self.dim {
            let _ = write!(s, ",v{d}");
        }
        s.push('\n');
        for (k, &t) in self.grid.points().iter().enumerate() {
            s.push_str(&fmt_f64(t));
            for v in self.at(k) {
                s.push(',');
                s.push_str(&fmt_f64(*v));
            }
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Full-precision decimal rendering used by every CSV writer.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> GridFunction {
        let g = Arc::new(TimeGrid::uniform(1.0, 2.0).unwrap());
        GridFunction::new(g, 1, vec![0.0, 1.0, 0.0]).unwrap()
    }

    #[test]
    fn interpolation_basics() {
        let u = tri();
        assert_eq!(u.interp(0.5).unwrap(), vec![0.5]);
        assert_eq!(u.interp(1.0).unwrap(), vec![1.0]);
        assert_eq!(u.interp(2.0).unwrap(), vec![0.0]);
        assert!(u.interp(2.5).is_err());
        assert!(u.interp(-0.1).is_err());
    }

    #[test]
    fn uniform_grid_shape() {
        let g = TimeGrid::uniform(0.01, 200.0).unwrap();
        assert_eq!(g.len(), 20001);
        assert_eq!(g.horizon(), 200.0);
        assert_eq!(g.node_index(3.0).unwrap(), 300);
        assert!(g.node_index(3.005).is_err());
        assert!(TimeGrid::uniform(0.3, 1.0).is_err());
        assert!(TimeGrid::uniform(0.0, 1.0).is_err());
    }

    #[test]
    fn sampling_nodes() {
        let g = TimeGrid::uniform(0.5, 10.0).unwrap();
        let lin = SupSampling::Linear { t_sup: 12.0 }.extra_nodes(&g).unwrap();
        assert_eq!(lin, vec![10.5, 11.0, 11.5, 12.0]);
        let log = SupSampling::LogAugmented { t_sup: 10.0 * std::f64::consts::E, per_efold: 4 }
            .extra_nodes(&g)
            .unwrap();
        assert_eq!(log.len(), 4);
        assert!((log[0] - 10.0 * 0.25f64.exp()).abs() < 1e-12);
        assert!(SupSampling::Linear { t_sup: 5.0 }.extra_nodes(&g).is_err());
    }

    #[test]
    fn csv_has_header_and_full_precision() {
        let csv = tri().to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,v0"));
        let row: Vec<f64> = lines.nth(1).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(row, vec![1.0, 1.0]);
        assert_eq!(fmt_f64(0.1).parse::<f64>().unwrap(), 0.1);
    }
}
