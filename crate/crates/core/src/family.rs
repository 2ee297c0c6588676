//! Evolution families `U(t, s)`, `t >= s >= 0`, on ℝⁿ.

use std::fmt;
use std::sync::Arc;

use crate::error::{domain, Error, Result};
use crate::linalg::StateMatrix;

/// A nonnegative, finite time on the half-line.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct TimePoint(f64);

impl TimePoint {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return domain(format!("time {value} is not a finite point of [0, ∞)"));
        }
        Ok(TimePoint(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for TimePoint {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        TimePoint::new(value)
    }
}

/// Closed-form scalar families are stored through a potential `g` with
/// `U(t, s) = exp(g(s) − g(t))`, which makes the cocycle law exact.
#[derive(Clone)]
pub enum Potential {
    /// `g(t) = t (2 + sin t)`
    Example1,
    /// `g(t) = t (√2 + sin ln t)`, extended by `g(0) = 0`
    Example2,
    Custom { name: String, g: Arc<dyn Fn(f64) -> f64 + Send + Sync> },
}

impl Potential {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Potential::Example1 => t * (2.0 + t.sin()),
            Potential::Example2 => {
                if t == 0.0 {
                    0.0
                } else {
                    t * (std::f64::consts::SQRT_2 + t.ln().sin())
                }
            }
            Potential::Custom { g, .. } => g(t),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Potential::Example1 => "example1",
            Potential::Example2 => "example2",
            Potential::Custom { name, .. } => name,
        }
    }
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Potential({})", self.name())
    }
}

/// Built-in coefficient matrices for `dx/dt = A(t) x` (all 2 × 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinMatrix {
    /// `[[0, 1], [−1, 0]]`
    Rotation,
    /// `[[−1, 2], [0, −1]]`
    Shear,
    /// `[[−1/2, cos t], [−cos t, −1/2]]`
    DampedRotation,
}

impl BuiltinMatrix {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "rotation" => Some(BuiltinMatrix::Rotation),
            "shear" => Some(BuiltinMatrix::Shear),
            "damped_rotation" => Some(BuiltinMatrix::DampedRotation),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BuiltinMatrix::Rotation => "rotation",
            BuiltinMatrix::Shear => "shear",
            BuiltinMatrix::DampedRotation => "damped_rotation",
        }
    }

    fn at(self, t: f64) -> [f64; 4] {
        match self {
            BuiltinMatrix::Rotation => [0.0, 1.0, -1.0, 0.0],
            BuiltinMatrix::Shear => [-1.0, 2.0, 0.0, -1.0],
            BuiltinMatrix::DampedRotation => {
                let c = t.cos();
                [-0.5, c, -c, -0.5]
            }
        }
    }

    /// Exact transition matrix, used as an oracle for the integrator.
    pub fn closed_form(self, t: f64, s: f64) -> StateMatrix {
        let d = t - s;
        match self {
            BuiltinMatrix::Rotation => {
                StateMatrix::from_row_major(2, &[d.cos(), d.sin(), -d.sin(), d.cos()])
            }
            BuiltinMatrix::Shear => {
                let e = (-d).exp();
                StateMatrix::from_row_major(2, &[e, 2.0 * d * e, 0.0, e])
            }
            BuiltinMatrix::DampedRotation => {
                let e = (-0.5 * d).exp();
                let w = t.sin() - s.sin();
                StateMatrix::from_row_major(2, &[e * w.cos(), e * w.sin(), -e * w.sin(), e * w.cos()])
            }
        }
    }
}

#[derive(Clone)]
pub enum Coefficient {
    Constant(StateMatrix),
    Builtin(BuiltinMatrix),
    Custom { dim: usize, a: Arc<dyn Fn(f64) -> StateMatrix + Send + Sync> },
}

impl Coefficient {
    pub fn dim(&self) -> usize {
        match self {
            Coefficient::Constant(m) => m.dim(),
            Coefficient::Builtin(_) => 2,
            Coefficient::Custom { dim, .. } => *dim,
        }
    }

    pub fn at(&self, t: f64) -> StateMatrix {
        match self {
            Coefficient::Constant(m) => m.clone(),
            Coefficient::Builtin(b) => StateMatrix::from_row_major(2, &b.at(t)),
            Coefficient::Custom { a, .. } => a(t),
        }
    }
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(m) => write!(f, "Constant({:?})", m.0),
            Coefficient::Builtin(b) => write!(f, "Builtin({})", b.name()),
            Coefficient::Custom { dim, .. } => write!(f, "Custom(dim = {dim})"),
        }
    }
}

/// Fixed-step classical RK4 settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub step: f64,
    /// Evaluation beyond this time is a domain error.
    pub horizon: f64,
    /// Reported accuracy target used by residual checks.
    pub tolerance: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig { step: 0.01, horizon: 200.0, tolerance: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct MatrixOde {
    pub coefficient: Coefficient,
    pub integrator: IntegratorConfig,
}

impl MatrixOde {
    /// Transition matrix from `s` to `t` by RK4 with uniform substeps no
    /// longer than the configured step.
    pub fn propagate(&self, t: f64, s: f64) -> Result<StateMatrix> {
        let n = self.coefficient.dim();
        let mut y = StateMatrix::identity(n);
        let span = t - s;
        if span == 0.0 {
            return Ok(y);
        }
        let h = self.integrator.step;
        let ratio = span / h;
        let steps = if (ratio - ratio.round()).abs() <= 1e-9 * ratio.max(1.0) {
            ratio.round().max(1.0)
        } else {
            ratio.ceil()
        } as usize;
        let dt = span / steps as f64;
        if !(dt > 0.0) || s + dt == s {
            return Err(Error::Propagation { t: s, reason: "step underflow".into() });
        }
        for k in 0..steps {
            let tk = s + k as f64 * dt;
            y = self.rk4_step(tk, &y, dt);
            if !y.is_finite() {
                return Err(Error::Propagation { t: tk + dt, reason: "non-finite state".into() });
            }
        }
        Ok(y)
    }

    pub(crate) fn rk4_step(&self, t: f64, y: &StateMatrix, dt: f64) -> StateMatrix {
        let a0 = self.coefficient.at(t);
        let am = self.coefficient.at(t + 0.5 * dt);
        let a1 = self.coefficient.at(t + dt);
        let k1 = a0.mul(y);
        let k2 = am.mul(&StateMatrix(&y.0 + &k1.0 * (0.5 * dt)));
        let k3 = am.mul(&StateMatrix(&y.0 + &k2.0 * (0.5 * dt)));
        let k4 = a1.mul(&StateMatrix(&y.0 + &k3.0 * dt));
        StateMatrix(&y.0 + (&k1.0 + &k2.0 * 2.0 + &k3.0 * 2.0 + &k4.0) * (dt / 6.0))
    }
}

/// A two-parameter evolution family on ℝⁿ.
#[derive(Debug, Clone)]
pub enum EvolutionFamily {
    /// `U(t, s) = exp(g(s) − g(t))` on ℝ¹.
    ScalarExponent(Potential),
    MatrixOde(MatrixOde),
    /// `U(t, s) = exp(−rate (t − s)) · I`
    ConstantDecay { rate: f64, dim: usize },
    /// `U_λ(t, s) = exp(−λ (t − s)) · U(t, s)`
    Rescaled { inner: Box<EvolutionFamily>, shift: f64 },
}

impl EvolutionFamily {
    pub fn example1() -> Self {
        EvolutionFamily::ScalarExponent(Potential::Example1)
    }

    pub fn example2() -> Self {
        EvolutionFamily::ScalarExponent(Potential::Example2)
    }

    pub fn constant_decay(rate: f64, dim: usize) -> Result<Self> {
        if !(rate >= 0.0) || !rate.is_finite() {
            return domain(format!("decay rate must be finite and >= 0, got {rate}"));
        }
        if dim == 0 {
            return domain("dimension must be >= 1");
        }
        Ok(EvolutionFamily::ConstantDecay { rate, dim })
    }

    pub fn matrix_ode(coefficient: Coefficient, integrator: IntegratorConfig) -> Result<Self> {
        if !(integrator.step > 0.0) || !(integrator.horizon > 0.0) {
            return domain("integrator step and horizon must be positive");
        }
        if coefficient.dim() == 0 {
            return domain("dimension must be >= 1");
        }
        Ok(EvolutionFamily::MatrixOde(MatrixOde { coefficient, integrator }))
    }

    pub fn builtin(matrix: BuiltinMatrix, integrator: IntegratorConfig) -> Self {
        EvolutionFamily::MatrixOde(MatrixOde { coefficient: Coefficient::Builtin(matrix), integrator })
    }

    pub fn dim(&self) -> usize {
        match self {
            EvolutionFamily::ScalarExponent(_) => 1,
            EvolutionFamily::MatrixOde(m) => m.coefficient.dim(),
            EvolutionFamily::ConstantDecay { dim, .. } => *dim,
            EvolutionFamily::Rescaled { inner, .. } => inner.dim(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            EvolutionFamily::ScalarExponent(p) => format!("scalar_{}", p.name()),
            EvolutionFamily::MatrixOde(m) => format!("matrix_ode({:?})", m.coefficient),
            EvolutionFamily::ConstantDecay { rate, dim } => format!("constant_decay(rate={rate}, dim={dim})"),
            EvolutionFamily::Rescaled { inner, shift } => format!("rescaled({}, shift={shift})", inner.describe()),
        }
    }

    /// Latest time at which the family may be evaluated.
    pub fn horizon(&self) -> f64 {
        match self {
            EvolutionFamily::MatrixOde(m) => m.integrator.horizon,
            EvolutionFamily::Rescaled { inner, .. } => inner.horizon(),
            _ => f64::INFINITY,
        }
    }

    /// `p(x)` such that `U(t, s) = exp(p(s) − p(t)) · I`, for families that are
    /// scalar multiples of the identity. `None` for matrix ODE families.
    pub fn potential_at(&self, x: f64) -> Option<f64> {
        match self {
            EvolutionFamily::ScalarExponent(p) => Some(p.eval(x)),
            EvolutionFamily::ConstantDecay { rate, .. } => Some(rate * x),
            EvolutionFamily::Rescaled { inner, shift } => inner.potential_at(x).map(|p| p + shift * x),
            EvolutionFamily::MatrixOde(_) => None,
        }
    }

    pub fn is_scalar_like(&self) -> bool {
        match self {
            EvolutionFamily::MatrixOde(_) => false,
            EvolutionFamily::Rescaled { inner, .. } => inner.is_scalar_like(),
            _ => true,
        }
    }

    fn check_pair(&self, t: f64, s: f64) -> Result<()> {
        TimePoint::new(t)?;
        TimePoint::new(s)?;
        if t < s {
            return domain(format!("evaluation requires t >= s, got t = {t}, s = {s}"));
        }
        if t > self.horizon() {
            return domain(format!("t = {t} lies beyond the horizon {}", self.horizon()));
        }
        Ok(())
    }

    /// `U(t, s)`.
    pub fn evaluate(&self, t: f64, s: f64) -> Result<StateMatrix> {
        self.check_pair(t, s)?;
        if t == s {
            return Ok(StateMatrix::identity(self.dim()));
        }
        match self {
            EvolutionFamily::MatrixOde(m) => m.propagate(t, s),
            EvolutionFamily::Rescaled { inner, shift } if !inner.is_scalar_like() => {
                Ok(inner.evaluate(t, s)?.scale((-shift * (t - s)).exp()))
            }
            _ => {
                let e = self.potential_at(s).unwrap() - self.potential_at(t).unwrap();
                Ok(StateMatrix::scalar(self.dim(), e.exp()))
            }
        }
    }

    /// `ln ‖U(t, s)‖`, evaluated in the log domain for scalar-like families.
    pub fn log_norm(&self, t: f64, s: f64) -> Result<f64> {
        self.check_pair(t, s)?;
        if self.is_scalar_like() {
            return Ok(self.potential_at(s).unwrap() - self.potential_at(t).unwrap());
        }
        match self {
            EvolutionFamily::Rescaled { inner, shift } => Ok(inner.log_norm(t, s)? - shift * (t - s)),
            _ => Ok(self.evaluate(t, s)?.norm().ln()),
        }
    }

    /// `‖U(t, τ) U(τ, s) − U(t, s)‖`
    pub fn cocycle_residual(&self, t: f64, tau: f64, s: f64) -> Result<f64> {
        if !(t >= tau && tau >= s) {
            return domain(format!("cocycle residual requires t >= τ >= s, got ({t}, {tau}, {s})"));
        }
        let composed = self.evaluate(t, tau)?.mul(&self.evaluate(tau, s)?);
        Ok(composed.sub(&self.evaluate(t, s)?).norm())
    }

    /// The rescaled family `exp(−λ (t − s)) U(t, s)`.
    pub fn rescale(&self, shift: f64) -> Result<EvolutionFamily> {
        if !shift.is_finite() {
            return domain("rescaling shift must be finite");
        }
        Ok(EvolutionFamily::Rescaled { inner: Box::new(self.clone()), shift })
    }

    /// Accuracy target for transition matrices: the integrator tolerance for
    /// ODE families, rounding level for closed forms.
    pub fn tolerance(&self) -> f64 {
        match self {
            EvolutionFamily::MatrixOde(m) => m.integrator.tolerance,
            EvolutionFamily::Rescaled { inner, .. } => inner.tolerance(),
            _ => 1e-12,
        }
    }
}
