//! Splitting `exp(t A0 + σ A1)` into a product of one-parameter factors,
//! and the oracle run that decides which closed form is correct.
//!
//! Using `exp(t A0) A1 exp(-t A0) = e^{-2t} A1` one finds
//! `exp(t A0 + σ A1) = exp(c A1) exp(t A0)` with `c = σ (1 - e^{-2t}) / (2t)`,
//! and for the Wei–Norman product `exp(t A0) exp(ρ A1)` of the modulated
//! problem `ρ' = e^{2t} f(t)`. Competing closed forms are kept as candidates
//! so the oracle comparison can reject them explicitly.

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expm::dense::{expm_dense, solve_master_equation};
use crate::generators::{build_a0, build_a1, RateFunction};
use crate::magnus::kernel::a_reduced;
use crate::matrix::Matrix;
use crate::quadrature::{integrate, QuadratureSpec};

/// Candidate maps `(σ, t) -> c` in `exp(t A0 + σ A1) = exp(c A1) exp(t A0)`
/// (or the reversed product).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplittingMap {
    /// `c = σ (1 - e^{-2t}) / (2t)`.
    Linear,
    /// `c = (1 - e^{-2σ/t}) / 2`.
    HalfExpRatio,
    /// `c = σ / t`.
    Ratio,
}

impl SplittingMap {
    pub const ALL: [SplittingMap; 3] = [Self::Linear, Self::HalfExpRatio, Self::Ratio];

    pub fn coefficient(self, sigma: f64, t: f64) -> f64 {
        if sigma == 0.0 {
            return 0.0;
        }
        match self {
            Self::Linear => 0.5 * sigma * a_reduced(t),
            Self::HalfExpRatio => -0.5 * (-2.0 * sigma / t).exp_m1(),
            Self::Ratio => sigma / t,
        }
    }

    /// Inverse of [`Self::coefficient`] in `σ`.
    pub fn sigma_from_coefficient(self, c: f64, t: f64, _order: FactorOrder) -> Result<f64> {
        if c == 0.0 {
            return Ok(0.0);
        }
        match self {
            Self::Linear => Ok(2.0 * c / a_reduced(t)),
            Self::HalfExpRatio => {
                if 2.0 * c >= 1.0 {
                    return Err(Error::invalid(format!(
                        "coefficient {c} outside the range of the half-exp map"
                    )));
                }
                Ok(-0.5 * t * (-2.0 * c).ln_1p())
            }
            Self::Ratio => Ok(c * t),
        }
    }
}

impl fmt::Display for SplittingMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Linear => "linear",
            Self::HalfExpRatio => "half_exp_ratio",
            Self::Ratio => "ratio",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorOrder {
    /// `exp(c A1) exp(t A0)`.
    A1Left,
    /// `exp(t A0) exp(c A1)`.
    A0Left,
}

impl fmt::Display for FactorOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::A1Left => "a1_left",
            Self::A0Left => "a0_left",
        })
    }
}

/// Candidate closed forms for `ρ` in `p(t) = exp(t A0) exp(ρ A1) p(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoForm {
    /// `ρ = int_0^t e^{2τ} f(τ) dτ`.
    ExpPlus,
    /// `ρ = int_0^t e^{-2τ} f(τ) dτ`.
    ExpMinus,
}

impl RhoForm {
    pub const ALL: [RhoForm; 2] = [Self::ExpPlus, Self::ExpMinus];

    /// `(e^{-2t} ρ, error estimate)`; the scaling keeps the integrand bounded.
    pub fn scaled_rho(self, f: &RateFunction, t: f64, q: &QuadratureSpec) -> Result<(f64, f64)> {
        let r = match self {
            Self::ExpPlus => integrate(|s| (2.0 * (s - t)).exp() * f.value(s), 0.0, t, q)?,
            Self::ExpMinus => integrate(|s| (-2.0 * (s + t)).exp() * f.value(s), 0.0, t, q)?,
        };
        Ok((r.value, r.error))
    }

    pub fn rho(self, f: &RateFunction, t: f64, q: &QuadratureSpec) -> Result<f64> {
        Ok(self.scaled_rho(f, t, q)?.0 * (2.0 * t).exp())
    }
}

impl fmt::Display for RhoForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ExpPlus => "exp_plus",
            Self::ExpMinus => "exp_minus",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplittingConstants {
    pub splitting_form: SplittingMap,
    pub order: FactorOrder,
    pub rho_form: RhoForm,
    pub adjudicated: bool,
}

/// Outcome of `adjudicate_splittings(1e-10)` (see `examples/adjudicate.rs`
/// and the `splitting_adjudication` acceptance check). Worst relative
/// residuals of that run against the dense exponential, N = 2 and 4:
///
/// * linear / a1_left 2.6e-14; linear / a0_left 1.08; ratio 55 to 382;
///   half_exp_ratio above 1e68 (its coefficient explodes for σ < 0).
/// * rho exp_plus 9.9e-15 against the RK4 propagator, exp_minus 0.34.
/// * σ fitted to the integrated equation (f = sin, N = 2): 0.0336560 at
///   t = 0.25, 0.5912002 at t = 1, 1.5334546 at t = 3.
pub const RECORDED_CONSTANTS: Option<SplittingConstants> = Some(SplittingConstants {
    splitting_form: SplittingMap::Linear,
    order: FactorOrder::A1Left,
    rho_form: RhoForm::ExpPlus,
    adjudicated: true,
});

/// The recorded table, or an error if the adjudication was never recorded.
pub fn recorded_constants() -> Result<SplittingConstants> {
    match RECORDED_CONSTANTS {
        Some(c) if c.adjudicated => Ok(c),
        _ => Err(Error::NotAdjudicated(
            "no splitting constants are recorded; run the splitting adjudication check \
             (cargo test --test acceptance) and record its winner"
                .into(),
        )),
    }
}

/// Recorded constants, re-verified against the oracle once per process.
pub fn splitting_constants() -> Result<SplittingConstants> {
    static VERIFIED: OnceLock<Result<SplittingConstants>> = OnceLock::new();
    VERIFIED
        .get_or_init(|| {
            let recorded = recorded_constants()?;
            let report = adjudicate_splittings(ADJUDICATION_TOL)?;
            if report.constants != recorded {
                return Err(Error::Invariant(format!(
                    "recorded splitting constants {recorded:?} disagree with the oracle run {:?}",
                    report.constants
                )));
            }
            Ok(recorded)
        })
        .clone()
}

pub const ADJUDICATION_TOL: f64 = 1e-10;
pub const ADJUDICATION_SIZES: [usize; 2] = [2, 4];
pub const ADJUDICATION_SIGMAS: [f64; 4] = [-1.0, 0.3, 1.0, 2.0];
pub const ADJUDICATION_TIMES: [f64; 3] = [0.25, 1.0, 3.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplittingResidual {
    pub map: SplittingMap,
    pub order: FactorOrder,
    /// Worst relative residual over the grid.
    pub max_residual: f64,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoResidual {
    pub form: RhoForm,
    pub max_residual: f64,
    pub passes: bool,
}

/// `σ` recovered from the integrated master equation by fitting
/// `exp(t A0 + s A1) p0 = p(t)` in the scalar `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaRecovery {
    pub t: f64,
    pub sigma_fit: f64,
    pub fit_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjudicationReport {
    pub constants: SplittingConstants,
    pub splitting: Vec<SplittingResidual>,
    pub rho: Vec<RhoResidual>,
    pub sigma_recovery: Vec<SigmaRecovery>,
}

fn rel_residual(a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
    let diff = a.try_sub(b).map(|d| d.max_abs()).unwrap_or(f64::INFINITY);
    diff / a.max_abs().max(1.0)
}

fn generator_pair(n: usize) -> Result<(Matrix<f64>, Matrix<f64>)> {
    Ok((build_a0(n)?.to_f64().to_dense(), build_a1(n)?.to_f64().to_dense()))
}

fn product(order: FactorOrder, c: f64, t: f64, a0: &Matrix<f64>, a1: &Matrix<f64>) -> Result<Matrix<f64>> {
    let e1 = expm_dense(&a1.scale(&c))?;
    let e0 = expm_dense(&a0.scale(&t))?;
    match order {
        FactorOrder::A1Left => e1.try_mul(&e0),
        FactorOrder::A0Left => e0.try_mul(&e1),
    }
}

/// Residual of one candidate over the oracle grid.
pub fn splitting_residual(map: SplittingMap, order: FactorOrder) -> Result<f64> {
    let mut worst = 0.0f64;
    for n in ADJUDICATION_SIZES {
        let (a0, a1) = generator_pair(n)?;
        for t in ADJUDICATION_TIMES {
            for sigma in ADJUDICATION_SIGMAS {
                let exact = expm_dense(&a0.scale(&t).try_add(&a1.scale(&sigma))?)?;
                let c = map.coefficient(sigma, t);
                let cand = product(order, c, t, &a0, &a1)?;
                worst = worst.max(rel_residual(&exact, &cand));
            }
        }
    }
    Ok(worst)
}

/// Rate functions used to test the `ρ` candidates.
fn rho_test_rates() -> [RateFunction; 2] {
    [RateFunction::sin(), RateFunction::poly(vec![0.2, -0.5, 0.1])]
}

const ORACLE_ODE_TOL: f64 = 1e-12;

fn ode_propagator(n: usize, f: &RateFunction, t: f64) -> Result<Matrix<f64>> {
    let a0 = build_a0(n)?;
    let a1 = build_a1(n)?;
    let mut cols = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let mut e = vec![0.0; n + 1];
        e[j] = 1.0;
        cols.push(solve_master_equation(&a0, &a1, f, &e, t, ORACLE_ODE_TOL)?.0);
    }
    Ok(Matrix::from_fn(n + 1, n + 1, |i, j| cols[j][i]))
}

/// Residual of a `ρ` candidate against the integrated master equation.
pub fn rho_residual(form: RhoForm) -> Result<f64> {
    let q = QuadratureSpec::default().with_tolerance(1e-13);
    let mut worst = 0.0f64;
    for n in ADJUDICATION_SIZES {
        let (a0, a1) = generator_pair(n)?;
        for f in rho_test_rates() {
            for t in ADJUDICATION_TIMES {
                let exact = ode_propagator(n, &f, t)?;
                // exp(t A0) exp(ρ A1) = exp(e^{-2t} ρ A1) exp(t A0) exactly; the
                // right-hand form avoids cancellation when ρ is large
                let (scaled, _) = form.scaled_rho(&f, t, &q)?;
                let cand = product(FactorOrder::A1Left, scaled, t, &a0, &a1)?;
                worst = worst.max(rel_residual(&exact, &cand));
            }
        }
    }
    Ok(worst)
}

/// Fit `s` with `exp(t A0 + s A1) e_N ≈ p(t)` by Gauss–Newton.
pub fn recover_sigma(n: usize, f: &RateFunction, t: f64) -> Result<SigmaRecovery> {
    let (a0, a1) = generator_pair(n)?;
    let p = ode_propagator(n, f, t)?.column(n);
    let at = a0.scale(&t);
    let eval = |s: f64| -> Result<Vec<f64>> {
        let e = expm_dense(&at.try_add(&a1.scale(&s))?)?;
        Ok(e.column(n))
    };
    let resid = |v: &[f64]| -> Vec<f64> { v.iter().zip(&p).map(|(a, b)| a - b).collect() };
    let mut s = integrate(|x| f.value(x), 0.0, t, &QuadratureSpec::default())?.value;
    let mut r = resid(&eval(s)?);
    for _ in 0..50 {
        let h = 1e-6 * s.abs().max(1e-2);
        let rp = resid(&eval(s + h)?);
        let rm = resid(&eval(s - h)?);
        let jac: Vec<f64> = rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let jj: f64 = jac.iter().map(|x| x * x).sum();
        if jj == 0.0 {
            break;
        }
        let step = jac.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() / jj;
        s -= step;
        r = resid(&eval(s)?);
        if step.abs() < 1e-15 * s.abs().max(1.0) {
            break;
        }
    }
    Ok(SigmaRecovery {
        t,
        sigma_fit: s,
        fit_residual: r.iter().fold(0.0, |m, x| m.max(x.abs())),
    })
}

/// Run the oracle comparison and pick the unique passing candidates.
pub fn adjudicate_splittings(tol: f64) -> Result<AdjudicationReport> {
    if !(tol > 0.0) {
        return Err(Error::invalid("adjudication tolerance must be positive"));
    }
    let mut splitting = Vec::new();
    for map in SplittingMap::ALL {
        for order in [FactorOrder::A1Left, FactorOrder::A0Left] {
            let max_residual = splitting_residual(map, order)?;
            splitting.push(SplittingResidual {
                map,
                order,
                max_residual,
                passes: max_residual <= tol,
            });
        }
    }
    // the ρ oracle is an ODE solve, so it is held to its own accuracy
    let rho_tol = tol.max(1e-9);
    let rho: Vec<RhoResidual> = RhoForm::ALL
        .into_iter()
        .map(|form| {
            rho_residual(form).map(|max_residual| RhoResidual {
                form,
                max_residual,
                passes: max_residual <= rho_tol,
            })
        })
        .collect::<Result<_>>()?;
    let sigma_recovery = ADJUDICATION_TIMES
        .iter()
        .map(|&t| recover_sigma(2, &RateFunction::sin(), t))
        .collect::<Result<Vec<_>>>()?;

    let winners: Vec<&SplittingResidual> = splitting.iter().filter(|r| r.passes).collect();
    let rho_winners: Vec<&RhoResidual> = rho.iter().filter(|r| r.passes).collect();
    if winners.len() != 1 || rho_winners.len() != 1 {
        let table: Vec<String> = splitting
            .iter()
            .map(|r| format!("{}/{}: {:.3e}", r.map, r.order, r.max_residual))
            .chain(rho.iter().map(|r| format!("rho {}: {:.3e}", r.form, r.max_residual)))
            .collect();
        return Err(Error::Invariant(format!(
            "splitting adjudication needs exactly one passing candidate per family; residuals: {}",
            table.join("; ")
        )));
    }
    Ok(AdjudicationReport {
        constants: SplittingConstants {
            splitting_form: winners[0].map,
            order: winners[0].order,
            rho_form: rho_winners[0].form,
            adjudicated: true,
        },
        splitting,
        rho,
        sigma_recovery,
    })
}
