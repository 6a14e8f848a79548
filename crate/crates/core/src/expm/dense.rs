//! Small dense oracles: scaling-and-squaring Taylor exponential and an
//! adaptive RK4 integrator for `p' = (A0 + f(t) A1) p`.

use crate::error::{Error, Result};
use crate::generators::{RateFunction, TridiagonalGenerator};
use crate::matrix::Matrix;

/// `exp(A)` by scaling to `||A||_1 <= 1/2`, a Taylor series run to
/// machine precision, and repeated squaring.
pub fn expm_dense(a: &Matrix<f64>) -> Result<Matrix<f64>> {
    if !a.is_square() {
        return Err(Error::invalid("matrix exponential needs a square matrix"));
    }
    let norm = a.norm_1();
    if !norm.is_finite() {
        return Err(Error::invalid("matrix exponential of a non-finite matrix"));
    }
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a.scale(&0.5f64.powi(squarings));
    let n = a.rows();
    let mut sum = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..=40 {
        term = term.try_mul(&scaled)?.scale(&(1.0 / k as f64));
        sum = sum.try_add(&term)?;
        if term.max_abs() <= f64::EPSILON * 1e-3 * sum.max_abs() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum.try_mul(&sum)?;
    }
    Ok(sum)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
}

/// Integrate `y' = F(t, y)` on `[0, t_end]` with classical RK4, local error
/// estimated by step doubling and removed by Richardson extrapolation.
/// `tol` bounds the max-norm local error per unit time.
pub fn rk4_step_doubling(
    mut rhs: impl FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    y0: &[f64],
    t_end: f64,
    tol: f64,
) -> Result<(Vec<f64>, OdeStats)> {
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::invalid(format!("end time must be finite and >= 0, got {t_end}")));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("integrator tolerance must be positive"));
    }
    let dim = y0.len();
    let mut y = y0.to_vec();
    let mut stats = OdeStats {
        accepted: 0,
        rejected: 0,
    };
    if t_end == 0.0 {
        return Ok((y, stats));
    }
    let mut t = 0.0;
    let mut h = (t_end / 16.0).min(0.01);
    let mut ws = Workspace::new(dim);
    let mut big = vec![0.0; dim];
    let mut half = vec![0.0; dim];
    let mut two_halves = vec![0.0; dim];
    const MAX_STEPS: usize = 10_000_000;
    while t < t_end {
        if stats.accepted + stats.rejected > MAX_STEPS {
            return Err(Error::Integration(format!("step budget exhausted at t={t}")));
        }
        let h_eff = h.min(t_end - t);
        rk4_step(&mut rhs, t, &y, h_eff, &mut big, &mut ws)?;
        rk4_step(&mut rhs, t, &y, 0.5 * h_eff, &mut half, &mut ws)?;
        rk4_step(&mut rhs, t + 0.5 * h_eff, &half, 0.5 * h_eff, &mut two_halves, &mut ws)?;
        let err = big
            .iter()
            .zip(&two_halves)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / 15.0;
        let allowed = tol * h_eff.max(1e-3 * t_end.min(1.0));
        if err <= allowed || h_eff < 1e-14 * t_end.max(1.0) {
            for i in 0..dim {
                y[i] = two_halves[i] + (two_halves[i] - big[i]) / 15.0;
            }
            t = if h_eff == t_end - t { t_end } else { t + h_eff };
            stats.accepted += 1;
        } else {
            stats.rejected += 1;
        }
        let ratio = if err == 0.0 {
            4.0
        } else {
            0.9 * (allowed / err).powf(0.25)
        };
        h = h_eff * ratio.clamp(0.2, 4.0);
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::Integration(format!("solution left the finite range at t={t}")));
        }
    }
    Ok((y, stats))
}

struct Workspace {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }
}

fn rk4_step(
    rhs: &mut impl FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    t: f64,
    y: &[f64],
    h: f64,
    out: &mut [f64],
    w: &mut Workspace,
) -> Result<()> {
    let n = y.len();
    rhs(t, y, &mut w.k1)?;
    for i in 0..n {
        w.tmp[i] = y[i] + 0.5 * h * w.k1[i];
    }
    rhs(t + 0.5 * h, &w.tmp, &mut w.k2)?;
    for i in 0..n {
        w.tmp[i] = y[i] + 0.5 * h * w.k2[i];
    }
    rhs(t + 0.5 * h, &w.tmp, &mut w.k3)?;
    for i in 0..n {
        w.tmp[i] = y[i] + h * w.k3[i];
    }
    rhs(t + h, &w.tmp, &mut w.k4)?;
    for i in 0..n {
        out[i] = y[i] + h / 6.0 * (w.k1[i] + 2.0 * w.k2[i] + 2.0 * w.k3[i] + w.k4[i]);
    }
    Ok(())
}

/// Solve the master equation `p' = (A0 + f(t) A1) p` directly.
pub fn solve_master_equation(
    a0: &TridiagonalGenerator<i64>,
    a1: &TridiagonalGenerator<i64>,
    f: &RateFunction,
    p0: &[f64],
    t: f64,
    tol: f64,
) -> Result<(Vec<f64>, OdeStats)> {
    let n = a0.n_states();
    if a1.n_states() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a1.n_states(),
        });
    }
    if p0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: p0.len(),
        });
    }
    let (s0, d0, u0) = (to_f(&a0.sub), to_f(&a0.diag), to_f(&a0.sup));
    let (s1, d1, u1) = (to_f(&a1.sub), to_f(&a1.diag), to_f(&a1.sup));
    rk4_step_doubling(
        |s, y, out| {
            let c = f.checked_value(s)?;
            for i in 0..n {
                let mut v = (d0[i] + c * d1[i]) * y[i];
                if i > 0 {
                    v += (s0[i - 1] + c * s1[i - 1]) * y[i - 1];
                }
                if i + 1 < n {
                    v += (u0[i] + c * u1[i]) * y[i + 1];
                }
                out[i] = v;
            }
            Ok(())
        },
        p0,
        t,
        tol,
    )
}

fn to_f(v: &[i64]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{build_a0, build_a1};

    #[test]
    fn exponential_of_diagonal_and_nilpotent() {
        let d = Matrix::from_rows(vec![vec![-3.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let e = expm_dense(&d).unwrap();
        assert!((e[(0, 0)] - (-3.0f64).exp()).abs() < 1e-15);
        assert!((e[(1, 1)] - 2.0f64.exp()).abs() < 1e-14 * 2.0f64.exp());
        let a1 = build_a1(2).unwrap().to_f64().to_dense();
        let e = expm_dense(&a1).unwrap();
        assert_eq!(e.column(0), vec![4.0, -4.0, 1.0]);
    }

    #[test]
    fn exponential_of_a0_n1() {
        let a0 = build_a0(1).unwrap().to_f64().to_dense();
        let e = expm_dense(&a0.scale(&1.0)).unwrap();
        let x = (-2.0f64).exp();
        assert!((e[(0, 1)] - (1.0 - x) / 2.0).abs() < 1e-15);
        assert!((e[(1, 1)] - (1.0 + x) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn ode_scalar_decay() {
        let (y, stats) = rk4_step_doubling(
            |_, y, out| {
                out[0] = -3.0 * y[0];
                Ok(())
            },
            &[1.0],
            2.0,
            1e-12,
        )
        .unwrap();
        assert!((y[0] - (-6.0f64).exp()).abs() < 1e-12);
        assert!(stats.accepted > 0);
    }

    #[test]
    fn ode_matches_dense_exponential_for_constant_rate() {
        let n = 4;
        let a0 = build_a0(n).unwrap();
        let a1 = build_a1(n).unwrap();
        let mut p0 = vec![0.0; n + 1];
        p0[n] = 1.0;
        let t = 1.3;
        let (p, _) = solve_master_equation(&a0, &a1, &RateFunction::constant(0.3), &p0, t, 1e-12).unwrap();
        let m = crate::generators::combine(&a0, &a1, 0.3).to_dense().scale(&t);
        let e = expm_dense(&m).unwrap().mul_vec(&p0).unwrap();
        for (a, b) in p.iter().zip(&e) {
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn rate_bound_is_enforced_by_ode() {
        let a0 = build_a0(2).unwrap();
        let a1 = build_a1(2).unwrap();
        let r = solve_master_equation(&a0, &a1, &RateFunction::constant(2.0), &[0.0, 0.0, 1.0], 1.0, 1e-8);
        assert!(matches!(r, Err(Error::RateOutOfBounds { .. })));
    }
}
