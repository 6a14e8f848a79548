//! Magnus exponent `Ω(t) = t A0 + σ(t) A1` for the modulated isomerisation
//! generator `A0 + f(t) A1`.

pub mod kernel;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expm::splitting::{recorded_constants, FactorOrder};
use crate::generators::RateFunction;
use crate::quadrature::{integrate, QuadratureSpec};

pub use kernel::{theta_kernel, volterra_residual, KernelTable};

/// How σ was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaMethod {
    /// Kernel representation `t f(t) + P(t) int_0^t x f'(x) Θ(t, x) dx`.
    Full,
    Order1,
    Order2,
    /// Wei–Norman coordinate mapped through the validated splitting.
    Reference,
}

impl SigmaMethod {
    pub const ALL: [SigmaMethod; 4] = [Self::Full, Self::Order1, Self::Order2, Self::Reference];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::Order1 => "order1",
            Self::Order2 => "order2",
            Self::Reference => "reference",
        }
    }
}

impl fmt::Display for SigmaMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SigmaMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown sigma method '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagnusCoefficients {
    pub t: f64,
    pub sigma: f64,
    pub method: SigmaMethod,
    pub est_error: f64,
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("time must be finite and >= 0, got {t}")));
    }
    Ok(())
}

fn zero(t: f64, method: SigmaMethod) -> MagnusCoefficients {
    MagnusCoefficients {
        t,
        sigma: 0.0,
        method,
        est_error: 0.0,
    }
}

/// σ(t) from the kernel representation, by nested adaptive quadrature.
pub fn sigma(f: &RateFunction, t: f64, q: &QuadratureSpec) -> Result<MagnusCoefficients> {
    check_time(t)?;
    q.validate()?;
    if t == 0.0 {
        return Ok(zero(t, SigmaMethod::Full));
    }
    let ft = f.value(t);
    if f.constant_value().is_some() {
        return Ok(MagnusCoefficients {
            t,
            sigma: ft * t,
            method: SigmaMethod::Full,
            est_error: 0.0,
        });
    }
    // surface a missing derivative before any quadrature work
    f.derivative(t)?;
    let table = KernelTable::new(t, q)?;
    let g_t = table.antiderivative(t)?;
    let mut failure = None;
    let outer = integrate(
        |x| {
            let r = f
                .derivative(x)
                .and_then(|d| table.theta_with(g_t, x).map(|th| x * d * th));
            r.unwrap_or_else(|e| {
                failure.get_or_insert(e);
                0.0
            })
        },
        0.0,
        t,
        q,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let p = kernel::prefactor(t);
    let correction = p * outer.value;
    Ok(MagnusCoefficients {
        t,
        sigma: t * ft + correction,
        method: SigmaMethod::Full,
        est_error: p.abs() * outer.error + 4.0 * table.error() * correction.abs(),
    })
}

/// Order-1 (`int_0^t f`) or order-2 (`int_0^t (1 - t + 2x) f(x) dx`) truncation.
pub fn sigma_truncated(f: &RateFunction, t: f64, order: u8, q: &QuadratureSpec) -> Result<MagnusCoefficients> {
    check_time(t)?;
    q.validate()?;
    let method = match order {
        1 => SigmaMethod::Order1,
        2 => SigmaMethod::Order2,
        _ => return Err(Error::invalid(format!("truncation order must be 1 or 2, got {order}"))),
    };
    if t == 0.0 {
        return Ok(zero(t, method));
    }
    let r = if order == 1 {
        integrate(|x| f.value(x), 0.0, t, q)?
    } else {
        integrate(|x| (1.0 - t + 2.0 * x) * f.value(x), 0.0, t, q)?
    };
    Ok(MagnusCoefficients {
        t,
        sigma: r.value,
        method,
        est_error: r.error,
    })
}

/// σ(t) from the Wei–Norman coordinate of `exp(t A0) exp(ρ A1)` pushed
/// through the recorded splitting map. Fails if no adjudicated constants
/// are recorded.
pub fn sigma_reference(f: &RateFunction, t: f64, q: &QuadratureSpec) -> Result<MagnusCoefficients> {
    check_time(t)?;
    q.validate()?;
    let consts = recorded_constants()?;
    if t == 0.0 {
        return Ok(zero(t, SigmaMethod::Reference));
    }
    let (rho, rho_err) = consts.rho_form.scaled_rho(f, t, q)?;
    // rho is stored as e^{-2t} ρ, the coefficient of exp(c A1) exp(t A0)
    let c = match consts.order {
        FactorOrder::A1Left => rho,
        FactorOrder::A0Left => rho * (2.0 * t).exp(),
    };
    let sigma = consts.splitting_form.sigma_from_coefficient(c, t, consts.order)?;
    let gain = if c == 0.0 { 1.0 } else { (sigma / c).abs() };
    Ok(MagnusCoefficients {
        t,
        sigma,
        method: SigmaMethod::Reference,
        est_error: gain * rho_err,
    })
}

pub fn sigma_by(method: SigmaMethod, f: &RateFunction, t: f64, q: &QuadratureSpec) -> Result<MagnusCoefficients> {
    match method {
        SigmaMethod::Full => sigma(f, t, q),
        SigmaMethod::Order1 => sigma_truncated(f, t, 1, q),
        SigmaMethod::Order2 => sigma_truncated(f, t, 2, q),
        SigmaMethod::Reference => sigma_reference(f, t, q),
    }
}

/// σ on the uniform grid `t_k = k t_max / steps`, `k = 0..=steps`, for each
/// requested method. Rows are ordered by time, then by method.
pub fn sigma_table(
    f: &RateFunction,
    t_max: f64,
    steps: usize,
    methods: &[SigmaMethod],
    q: &QuadratureSpec,
) -> Result<Vec<MagnusCoefficients>> {
    check_time(t_max)?;
    if steps == 0 {
        return Err(Error::invalid("sigma table needs at least one step"));
    }
    let rows: Result<Vec<Vec<MagnusCoefficients>>> = (0..=steps)
        .into_par_iter()
        .map(|k| {
            let t = t_max * k as f64 / steps as f64;
            methods.iter().map(|&m| sigma_by(m, f, t, q)).collect()
        })
        .collect();
    Ok(rows?.into_iter().flatten().collect())
}

/// CSV with header `t,sigma,method,est_error`.
pub fn write_sigma_csv(mut w: impl Write, rows: &[MagnusCoefficients]) -> Result<()> {
    writeln!(w, "t,sigma,method,est_error")?;
    for r in rows {
        writeln!(w, "{:e},{:e},{},{:e}", r.t, r.sigma, r.method, r.est_error)?;
    }
    Ok(())
}
