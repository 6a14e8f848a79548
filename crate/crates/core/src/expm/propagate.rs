//! End-to-end solution `p(t) = exp(t A0 + σ(t) A1) p(0)` of the master
//! equation.

use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expm::dense::solve_master_equation;
use crate::expm::jordan::{a1_action_real, a1_lost_bits};
use crate::expm::scalar::{working_bits, Arithmetic, HpFloat, Real};
use crate::expm::spectral::{a0_action_real, a0_lost_bits, resolve_a0, SpectralFactorization};
use crate::expm::splitting::{splitting_constants, FactorOrder};
use crate::generators::{build_a0, build_a1, RateFunction};
use crate::magnus::{sigma, MagnusCoefficients, SigmaMethod};
use crate::quadrature::QuadratureSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropagationMethod {
    /// σ(t) by quadrature, then the two factorized exponentials.
    MagnusSplit,
    /// Direct adaptive integration.
    Ode,
    /// Constant rate only: σ = c t, no quadrature.
    SpectralConst,
}

impl FromStr for PropagationMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "split" | "magnus_split" => Ok(Self::MagnusSplit),
            "ode" => Ok(Self::Ode),
            "spectral" | "spectral_const" => Ok(Self::SpectralConst),
            _ => Err(Error::invalid(format!(
                "unknown propagation method '{s}' (expected split, ode or spectral)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagateOptions {
    pub method: PropagationMethod,
    pub arithmetic: Arithmetic,
    pub quadrature: QuadratureSpec,
    /// Local error tolerance of the `ode` method.
    pub ode_tol: f64,
}

impl Default for PropagateOptions {
    fn default() -> Self {
        Self {
            method: PropagationMethod::MagnusSplit,
            arithmetic: Arithmetic::Auto,
            quadrature: QuadratureSpec::default(),
            ode_tol: 1e-10,
        }
    }
}

impl PropagateOptions {
    pub fn with_method(method: PropagationMethod) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }
}

/// Result of a propagation together with the exponent used, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagation {
    pub p: Vec<f64>,
    pub sigma: Option<MagnusCoefficients>,
}

pub(crate) fn check_probability(p0: &[f64]) -> Result<()> {
    if p0.len() < 2 {
        return Err(Error::invalid("state vector needs N + 1 >= 2 entries"));
    }
    if let Some((i, x)) = p0.iter().enumerate().find(|(_, x)| !(**x >= 0.0)) {
        return Err(Error::invalid(format!(
            "initial vector entry {i} is {x}, not a probability"
        )));
    }
    let s: f64 = p0.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!("initial vector sums to {s}, not 1")));
    }
    Ok(())
}

/// `p(t)` for the modulated isomerisation model with `N = p0.len() - 1`.
pub fn propagate(f: &RateFunction, p0: &[f64], t: f64, opts: &PropagateOptions) -> Result<Vec<f64>> {
    Ok(propagate_detailed(f, p0, t, opts)?.p)
}

pub fn propagate_detailed(f: &RateFunction, p0: &[f64], t: f64, opts: &PropagateOptions) -> Result<Propagation> {
    check_probability(p0)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("time must be finite and >= 0, got {t}")));
    }
    let n = p0.len() - 1;
    if t == 0.0 {
        return Ok(Propagation {
            p: p0.to_vec(),
            sigma: None,
        });
    }
    f.checked_value(t)?;
    match opts.method {
        PropagationMethod::Ode => {
            let (p, _) = solve_master_equation(&build_a0(n)?, &build_a1(n)?, f, p0, t, opts.ode_tol)?;
            Ok(Propagation { p, sigma: None })
        }
        PropagationMethod::SpectralConst => {
            let c = f.constant_value().ok_or_else(|| {
                Error::invalid(format!(
                    "spectral method needs a constant rate, got '{}'",
                    f.spec_string()
                ))
            })?;
            f.checked_value(0.0)?;
            let s = MagnusCoefficients {
                t,
                sigma: c * t,
                method: SigmaMethod::Full,
                est_error: 0.0,
            };
            Ok(Propagation {
                p: split_apply(n, t, s.sigma, p0, opts.arithmetic)?,
                sigma: Some(s),
            })
        }
        PropagationMethod::MagnusSplit => {
            let s = sigma(f, t, &opts.quadrature)?;
            Ok(Propagation {
                p: split_apply(n, t, s.sigma, p0, opts.arithmetic)?,
                sigma: Some(s),
            })
        }
    }
}

/// `exp(t A0 + σ A1) p` through the validated splitting.
pub fn split_apply(n: usize, t: f64, sigma: f64, p: &[f64], arithmetic: Arithmetic) -> Result<Vec<f64>> {
    if p.len() != n + 1 {
        return Err(Error::DimensionMismatch {
            expected: n + 1,
            found: p.len(),
        });
    }
    let consts = splitting_constants()?;
    let c = consts.splitting_form.coefficient(sigma, t);
    let factor = SpectralFactorization::build(n)?;
    let lost = a0_lost_bits(n) + a1_lost_bits(n, c);
    let mode = match arithmetic {
        Arithmetic::Auto if lost > 12.0 => Arithmetic::HighPrecision,
        other => resolve_a0(n, other)?,
    };
    match mode {
        Arithmetic::Double => chain::<f64>(&factor, consts.order, t, c, p, 0),
        _ => chain::<HpFloat>(&factor, consts.order, t, c, p, working_bits(lost)),
    }
}

fn chain<T: Real>(
    factor: &SpectralFactorization,
    order: FactorOrder,
    t: f64,
    c: f64,
    p: &[f64],
    bits: usize,
) -> Result<Vec<f64>> {
    let x = p.iter().map(|&v| T::lift(v, bits)).collect::<Result<Vec<_>>>()?;
    let q = T::lift(c, bits)?;
    let y = match order {
        FactorOrder::A1Left => a1_action_real(&q, &a0_action_real(factor, t, &x, bits)?)?,
        FactorOrder::A0Left => a0_action_real(factor, t, &a1_action_real(&q, &x)?, bits)?,
    };
    Ok(y.iter().map(Real::lower).collect())
}

/// CSV with header `state_index,probability`.
pub fn write_solution_csv(mut w: impl Write, p: &[f64]) -> Result<()> {
    writeln!(w, "state_index,probability")?;
    for (i, x) in p.iter().enumerate() {
        writeln!(w, "{i},{x:e}")?;
    }
    Ok(())
}
