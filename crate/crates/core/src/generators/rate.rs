use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// How `f'(t)` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeKind {
    Analytic,
    FiniteDifference,
    Unavailable,
}

#[derive(Clone)]
pub enum RateKind {
    Constant(f64),
    Sin,
    Cos,
    /// Coefficients in increasing degree.
    Poly(Vec<f64>),
    Custom {
        name: String,
        value: ScalarFn,
        derivative: Option<ScalarFn>,
    },
}

/// Time modulation `f(t)` of the rates `c1 = 1 + f`, `c2 = 1 - f`.
#[derive(Clone)]
pub struct RateFunction {
    kind: RateKind,
    bounded: bool,
    finite_difference: bool,
}

impl RateFunction {
    pub fn new(kind: RateKind) -> Self {
        Self {
            kind,
            bounded: true,
            finite_difference: true,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(RateKind::Constant(c))
    }

    pub fn sin() -> Self {
        Self::new(RateKind::Sin)
    }

    pub fn cos() -> Self {
        Self::new(RateKind::Cos)
    }

    pub fn poly(coeffs: Vec<f64>) -> Self {
        Self::new(RateKind::Poly(coeffs))
    }

    pub fn custom(
        name: impl Into<String>,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: Option<Box<dyn Fn(f64) -> f64 + Send + Sync>>,
    ) -> Self {
        Self::new(RateKind::Custom {
            name: name.into(),
            value: Arc::new(value),
            derivative: derivative.map(Arc::from),
        })
    }

    /// Whether `|f(t)| <= 1` is enforced by [`Self::checked_value`].
    pub fn with_bounded(mut self, bounded: bool) -> Self {
        self.bounded = bounded;
        self
    }

    pub fn with_finite_difference(mut self, enabled: bool) -> Self {
        self.finite_difference = enabled;
        self
    }

    pub fn is_bounded(&self) -> bool {
        self.bounded
    }

    pub fn kind(&self) -> &RateKind {
        &self.kind
    }

    pub fn value(&self, t: f64) -> f64 {
        match &self.kind {
            RateKind::Constant(c) => *c,
            RateKind::Sin => t.sin(),
            RateKind::Cos => t.cos(),
            RateKind::Poly(c) => c.iter().rev().fold(0.0, |acc, &a| acc * t + a),
            RateKind::Custom { value, .. } => value(t),
        }
    }

    /// `f(t)`, failing if the bound is asserted and violated.
    pub fn checked_value(&self, t: f64) -> Result<f64> {
        let v = self.value(t);
        if !v.is_finite() || (self.bounded && v.abs() > 1.0) {
            return Err(Error::RateOutOfBounds { t, value: v.abs() });
        }
        Ok(v)
    }

    pub fn derivative_kind(&self) -> DerivativeKind {
        match &self.kind {
            RateKind::Custom { derivative: None, .. } => {
                if self.finite_difference {
                    DerivativeKind::FiniteDifference
                } else {
                    DerivativeKind::Unavailable
                }
            }
            _ => DerivativeKind::Analytic,
        }
    }

    /// `f'(t)`; analytic when known, otherwise a fourth-order difference
    /// quotient with step `eps^(1/3) * max(1, |t|)`. Stencils never reach
    /// below `t = 0`.
    pub fn derivative(&self, t: f64) -> Result<f64> {
        match &self.kind {
            RateKind::Constant(_) => Ok(0.0),
            RateKind::Sin => Ok(t.cos()),
            RateKind::Cos => Ok(-t.sin()),
            RateKind::Poly(c) => Ok(c
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, &a)| acc * t + k as f64 * a)),
            RateKind::Custom {
                derivative: Some(d), ..
            } => Ok(d(t)),
            RateKind::Custom {
                derivative: None,
                value,
                name,
            } => {
                if !self.finite_difference {
                    return Err(Error::invalid(format!(
                        "rate function '{name}' has no derivative and finite differencing is disabled"
                    )));
                }
                Ok(finite_difference(value.as_ref(), t))
            }
        }
    }

    /// `Some(c)` if `f` is identically `c`.
    pub fn constant_value(&self) -> Option<f64> {
        match &self.kind {
            RateKind::Constant(c) => Some(*c),
            RateKind::Poly(c) if c.iter().skip(1).all(|&a| a == 0.0) => Some(c.first().copied().unwrap_or(0.0)),
            _ => None,
        }
    }

    /// Canonical mini-language form (round-trips through [`FromStr`] for
    /// the built-in kinds).
    pub fn spec_string(&self) -> String {
        match &self.kind {
            RateKind::Constant(c) => format!("const:{c}"),
            RateKind::Sin => "sin".into(),
            RateKind::Cos => "cos".into(),
            RateKind::Poly(c) => {
                let parts: Vec<String> = c.iter().map(|a| a.to_string()).collect();
                format!("poly:{}", parts.join(","))
            }
            RateKind::Custom { name, .. } => format!("custom:{name}"),
        }
    }
}

pub(crate) fn finite_difference(f: &dyn Fn(f64) -> f64, t: f64) -> f64 {
    let h = f64::EPSILON.cbrt() * t.abs().max(1.0);
    if t >= 2.0 * h {
        (-f(t + 2.0 * h) + 8.0 * f(t + h) - 8.0 * f(t - h) + f(t - 2.0 * h)) / (12.0 * h)
    } else {
        (-25.0 * f(t) + 48.0 * f(t + h) - 36.0 * f(t + 2.0 * h) + 16.0 * f(t + 3.0 * h) - 3.0 * f(t + 4.0 * h))
            / (12.0 * h)
    }
}

impl fmt::Debug for RateFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RateFunction")
            .field("spec", &self.spec_string())
            .field("bounded", &self.bounded)
            .finish()
    }
}

impl fmt::Display for RateFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.spec_string())
    }
}

fn parse_number(s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("rate spec: '{s}' is not a number")))?;
    if !v.is_finite() {
        return Err(Error::invalid(format!("rate spec: '{s}' is not finite")));
    }
    Ok(v)
}

impl FromStr for RateFunction {
    type Err = Error;

    /// Accepts `const:c`, `sin`, `cos` and `poly:c0,c1,...`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, tail) = match s.split_once(':') {
            Some((h, t)) => (h.trim(), Some(t)),
            None => (s, None),
        };
        match (head, tail) {
            ("sin", None) => Ok(Self::sin()),
            ("cos", None) => Ok(Self::cos()),
            ("const", Some(c)) => Ok(Self::constant(parse_number(c)?)),
            ("poly", Some(list)) => {
                let coeffs = list.split(',').map(parse_number).collect::<Result<Vec<_>>>()?;
                Ok(Self::poly(coeffs))
            }
            _ => Err(Error::invalid(format!(
                "unknown rate spec '{s}' (expected const:c, sin, cos or poly:c0,c1,...)"
            ))),
        }
    }
}
