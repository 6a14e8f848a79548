//! The Volterra kernel `Θ(t, x)` and its scalar ingredients.
//!
//! With `z = -2y` the three building blocks are
//!
//! * `a(y) = 1 - e^{-2y}`
//! * `b(y) = 1 - 2y - e^{-2y}`
//! * `n(y) = 1 - y - (1 + y) e^{-2y}`
//!
//! and `g = n / (a b)`, `h(x) = b / (x a)`, prefactor `P(t) = t a / b = 1 / h(t)`.
//! Near zero all three vanish (to orders 1, 2 and 3), so they are evaluated
//! from their Taylor series divided by the matching power of `y`.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadratureSpec};

const SERIES_RADIUS: f64 = 1.0;
const SERIES_TERMS: usize = 32;

/// `a(y) / y`.
pub(crate) fn a_reduced(y: f64) -> f64 {
    if y.abs() <= SERIES_RADIUS {
        // a / y = sum_{j>=1} -(-2)^j / j! y^(j-1)
        let mut term = 2.0; // j = 1
        let mut sum = term;
        for j in 2..SERIES_TERMS {
            term *= -2.0 * y / j as f64;
            sum += term;
        }
        sum
    } else {
        -(-2.0 * y).exp_m1() / y
    }
}

/// `b(y) / y^2`.
pub(crate) fn b_reduced(y: f64) -> f64 {
    if y.abs() <= SERIES_RADIUS {
        // b / y^2 = -sum_{j>=2} (-2)^j / j! y^(j-2)
        let mut term = -2.0; // j = 2
        let mut sum = term;
        for j in 3..SERIES_TERMS {
            term *= -2.0 * y / j as f64;
            sum += term;
        }
        sum
    } else {
        (1.0 - 2.0 * y - (-2.0 * y).exp()) / (y * y)
    }
}

/// `n(y) / y^3`.
pub(crate) fn n_reduced(y: f64) -> f64 {
    if y.abs() <= SERIES_RADIUS {
        // n / y^3 = sum_{j>=3} (j - 2) (-2)^j / (2 j!) y^(j-3)
        let mut power = -8.0 / 6.0; // (-2)^3 / 3!
        let mut sum = 0.5 * power;
        for j in 4..SERIES_TERMS {
            power *= -2.0 * y / j as f64;
            sum += (j as f64 - 2.0) * 0.5 * power;
        }
        sum
    } else {
        (1.0 - y - (1.0 + y) * (-2.0 * y).exp()) / (y * y * y)
    }
}

pub fn a_fn(y: f64) -> f64 {
    -(-2.0 * y).exp_m1()
}

pub fn b_fn(y: f64) -> f64 {
    b_reduced(y) * y * y
}

pub fn n_fn(y: f64) -> f64 {
    n_reduced(y) * y * y * y
}

/// Taylor coefficients of `g` at 0, from power-series division.
fn g_taylor() -> &'static [f64; 8] {
    static COEFFS: OnceLock<[f64; 8]> = OnceLock::new();
    COEFFS.get_or_init(|| {
        const M: usize = 8;
        let mut fact = [1.0f64; M + 4];
        for j in 1..M + 4 {
            fact[j] = fact[j - 1] * j as f64;
        }
        let pow2 = |j: usize| (-2.0f64).powi(j as i32);
        let a: Vec<f64> = (0..M).map(|k| -pow2(k + 1) / fact[k + 1]).collect();
        let b: Vec<f64> = (0..M).map(|k| -pow2(k + 2) / fact[k + 2]).collect();
        let n: Vec<f64> = (0..M)
            .map(|k| (k as f64 + 1.0) * pow2(k + 3) / (2.0 * fact[k + 3]))
            .collect();
        let mut ab = [0.0; M];
        for i in 0..M {
            for j in 0..M - i {
                ab[i + j] += a[i] * b[j];
            }
        }
        let mut g = [0.0; M];
        for k in 0..M {
            let s: f64 = (1..=k).map(|i| ab[i] * g[k - i]).sum();
            g[k] = (n[k] - s) / ab[0];
        }
        g
    })
}

/// `g(y) = n / (a b)`; `g(0) = 1/6`. Inside `|y| < guard` the truncated
/// Taylor polynomial is used.
pub fn g_kernel(y: f64, guard: f64) -> f64 {
    if y.abs() < guard {
        g_taylor().iter().rev().fold(0.0, |acc, &c| acc * y + c)
    } else {
        n_reduced(y) / (a_reduced(y) * b_reduced(y))
    }
}

/// `h(x) = b / (x a)`; `h(0) = -1`.
pub fn h_kernel(x: f64) -> f64 {
    b_reduced(x) / a_reduced(x)
}

/// `P(t) = t a(t) / b(t)`; `P(0) = -1`, `P(t) -> -1/2` as `t -> oo`.
pub fn prefactor(t: f64) -> f64 {
    a_reduced(t) / b_reduced(t)
}

/// Cumulative antiderivative `G(y) = int_0^y g` on fixed panels.
#[derive(Debug, Clone)]
pub struct KernelTable {
    panel: f64,
    guard: f64,
    cumulative: Vec<f64>,
    error: f64,
    spec: QuadratureSpec,
}

impl KernelTable {
    const PANEL: f64 = 0.25;

    /// Table valid on `[0, t_max]`.
    pub fn new(t_max: f64, spec: &QuadratureSpec) -> Result<Self> {
        spec.validate()?;
        if !(t_max >= 0.0 && t_max.is_finite()) {
            return Err(Error::invalid(format!("kernel table needs finite t >= 0, got {t_max}")));
        }
        let panels = (t_max / Self::PANEL).ceil() as usize + 1;
        let mut cumulative = Vec::with_capacity(panels + 1);
        cumulative.push(0.0);
        let mut error = 0.0;
        let guard = spec.singularity_guard;
        for k in 0..panels {
            let (lo, hi) = (k as f64 * Self::PANEL, (k + 1) as f64 * Self::PANEL);
            let r = integrate(|y| g_kernel(y, guard), lo, hi, spec)?;
            cumulative.push(cumulative[k] + r.value);
            error += r.error;
        }
        Ok(Self {
            panel: Self::PANEL,
            guard,
            cumulative,
            error,
            spec: *spec,
        })
    }

    pub fn t_max(&self) -> f64 {
        (self.cumulative.len() - 2) as f64 * self.panel
    }

    /// Accumulated quadrature error estimate of the table.
    pub fn error(&self) -> f64 {
        self.error
    }

    /// `int_0^y g`.
    pub fn antiderivative(&self, y: f64) -> Result<f64> {
        if !(y >= 0.0) || y > self.t_max() + self.panel {
            return Err(Error::invalid(format!(
                "kernel table covers [0, {}], got {y}",
                self.t_max()
            )));
        }
        let k = ((y / self.panel).floor() as usize).min(self.cumulative.len() - 2);
        let lo = k as f64 * self.panel;
        let guard = self.guard;
        let r = integrate(|s| g_kernel(s, guard), lo, y, &self.spec)?;
        Ok(self.cumulative[k] + r.value)
    }

    /// `Θ(t, x) = -exp(-4 int_x^t g) h(x)`.
    pub fn theta(&self, t: f64, x: f64) -> Result<f64> {
        check_pair(t, x)?;
        let gt = self.antiderivative(t)?;
        self.theta_with(gt, x)
    }

    /// `Θ(t, x)` given a precomputed `G(t)`.
    pub(crate) fn theta_with(&self, g_at_t: f64, x: f64) -> Result<f64> {
        let gx = self.antiderivative(x)?;
        Ok(-(-4.0 * (g_at_t - gx)).exp() * h_kernel(x))
    }
}

fn check_pair(t: f64, x: f64) -> Result<()> {
    if !(t.is_finite() && x.is_finite()) || t < 0.0 || x < 0.0 {
        return Err(Error::invalid(format!(
            "kernel arguments must be finite and nonnegative, got t={t}, x={x}"
        )));
    }
    if x > t {
        return Err(Error::invalid(format!("kernel needs x <= t, got t={t}, x={x}")));
    }
    Ok(())
}

/// `Θ(t, x)` for `0 <= x <= t`.
pub fn theta_kernel(t: f64, x: f64, q: &QuadratureSpec) -> Result<f64> {
    check_pair(t, x)?;
    KernelTable::new(t, q)?.theta(t, x)
}

/// `P(t) Θ(t, x) - (int_x^t Θ(y, x) dy - 1)`, which vanishes for the exact kernel.
pub fn volterra_residual(t: f64, x: f64, q: &QuadratureSpec) -> Result<f64> {
    check_pair(t, x)?;
    let table = KernelTable::new(t, q)?;
    let gx = table.antiderivative(x)?;
    let hx = h_kernel(x);
    let theta_tx = -(-4.0 * (table.antiderivative(t)? - gx)).exp() * hx;
    let mut failure = None;
    let integral = integrate(
        |y| match table.antiderivative(y) {
            Ok(gy) => -(-4.0 * (gy - gx)).exp() * hx,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        x,
        t,
        q,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(prefactor(t) * theta_tx - (integral.value - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use dashu_float::{round::mode::HalfEven, FBig};

    type F = FBig<HalfEven, 2>;

    fn hp(x: f64) -> F {
        F::try_from(x).unwrap().with_precision(256).value()
    }

    fn g_high_precision(y: f64) -> f64 {
        let y = hp(y);
        let one = hp(1.0);
        let two = hp(2.0);
        let e = (-(&two * &y)).exp();
        let a = &one - &e;
        let b = &one - &two * &y - &e;
        let n = &one - &y - (&one + &y) * &e;
        (n / (a * b)).to_f64().value()
    }

    #[test]
    fn limits_at_zero() {
        assert!((g_kernel(0.0, 1e-3) - 1.0 / 6.0).abs() < 1e-16);
        assert_eq!(h_kernel(0.0), -1.0);
        assert_eq!(prefactor(0.0), -1.0);
    }

    #[test]
    fn series_patch_matches_high_precision() {
        for &y in &[1e-8, 1e-5, 3e-4, 9.99e-4, 1e-3, 0.01, 0.3, 0.99, 1.0, 1.01, 2.5, 10.0] {
            let exact = g_high_precision(y);
            for guard in [0.0, 1e-3, 1e-2] {
                let v = g_kernel(y, guard);
                assert!((v - exact).abs() < 1e-14, "y={y} guard={guard}: {v} vs {exact}");
            }
        }
    }

    #[test]
    fn building_blocks_against_direct_formulas() {
        for &y in &[0.5f64, 0.9, 1.0, 1.5, 4.0] {
            let e = (-2.0 * y).exp();
            assert!((a_fn(y) - (1.0 - e)).abs() < 1e-15);
            assert!((b_fn(y) - (1.0 - 2.0 * y - e)).abs() < 1e-14);
            assert!((n_fn(y) - (1.0 - y - (1.0 + y) * e)).abs() < 1e-14);
        }
    }

    #[test]
    fn prefactor_is_bounded_and_finite() {
        for i in 0..=500 {
            let t = i as f64 * 0.1;
            let p = prefactor(t);
            assert!(p.is_finite() && (-1.0..=-0.5).contains(&p), "t={t}: {p}");
        }
        assert!((prefactor(1e6) + 0.5).abs() < 1e-6);
    }

    /// `exp(-4 int_x^t g) = F(t) / F(x)` with `F(y) = -b(y) / sinh(y)^2`.
    fn theta_closed_form(t: f64, x: f64) -> f64 {
        let big_f = |y: f64| {
            if y == 0.0 {
                2.0
            } else {
                -b_reduced(y) * (y / y.sinh()).powi(2)
            }
        };
        -big_f(t) / big_f(x) * h_kernel(x)
    }

    #[test]
    fn theta_matches_closed_form() {
        let q = QuadratureSpec::default();
        for &t in &[1e-4, 0.3, 1.0, 2.7, 6.0] {
            for frac in [0.0, 0.25, 0.5, 1.0] {
                let x = frac * t;
                let v = theta_kernel(t, x, &q).unwrap();
                let e = theta_closed_form(t, x);
                assert!((v - e).abs() < 1e-11, "t={t} x={x}: {v} vs {e}");
            }
        }
    }

    #[test]
    fn theta_near_origin() {
        let q = QuadratureSpec::default();
        assert!((theta_kernel(0.0, 0.0, &q).unwrap() - 1.0).abs() < 1e-15);
        // Θ ≈ 1 + x - 2t/3 to first order
        let (t, x) = (1e-4, 4e-5);
        let v = theta_kernel(t, x, &q).unwrap();
        assert!((v - (1.0 + x - 2.0 * t / 3.0)).abs() < 1e-7);
    }

    #[test]
    fn theta_diagonal_is_minus_h() {
        let q = QuadratureSpec::default();
        for &x in &[0.1, 0.7, 2.0] {
            assert!((theta_kernel(x, x, &q).unwrap() + h_kernel(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn argument_errors() {
        let q = QuadratureSpec::default();
        assert!(theta_kernel(1.0, 1.5, &q).is_err());
        assert!(theta_kernel(-1.0, -2.0, &q).is_err());
        assert!(volterra_residual(1.0, 2.0, &q).is_err());
    }

    #[test]
    fn volterra_examples() {
        let q = QuadratureSpec::default();
        assert!(volterra_residual(1.0, 0.5, &q).unwrap().abs() <= 10.0 * q.abs_tol);
        assert!(volterra_residual(0.3, 0.3, &q).unwrap().abs() < 1e-15);
        assert!(volterra_residual(1e-9, 1e-9, &q).unwrap().abs() < 1e-12);
    }
}
