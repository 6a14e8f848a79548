//! Jordan form of the nilpotent `A1 = Z C^{-1} E C Z~` and the
//! multiplication-free transforms `Z~ u`, `Z u`.

use dashu_int::IBig;

use crate::error::{Error, Result};
use crate::expm::scalar::{working_bits, Arithmetic, HpFloat, Real, Scalar};
use crate::generators::build_a1;
use crate::matrix::Matrix;

fn non_empty<T>(u: &[T]) -> Result<usize> {
    if u.is_empty() {
        return Err(Error::invalid("transform input must have length N + 1 >= 1"));
    }
    Ok(u.len() - 1)
}

/// `Z~ u` with `Z~[m][n] = binom(N - n, m - n)`, using additions only.
pub fn fast_ztilde_apply<T: Scalar>(u: &[T]) -> Result<Vec<T>> {
    let n = non_empty(u)?;
    let mut y = u.to_vec();
    // after step M, y[0..=M] holds the transform of u[0..=M] at size M
    for m_top in 1..=n {
        y[m_top] = y[m_top - 1].checked_add(&u[m_top])?;
        for m in (1..m_top).rev() {
            y[m] = y[m].checked_add(&y[m - 1])?;
        }
    }
    Ok(y)
}

/// `Z u` with `Z[m][n] = (-1)^(m-n) binom(N - n, m - n)`, the inverse of `Z~`.
pub fn fast_z_apply<T: Scalar>(u: &[T]) -> Result<Vec<T>> {
    let n = non_empty(u)?;
    let mut y = u.to_vec();
    for m_top in 1..=n {
        y[m_top] = u[m_top].checked_sub(&y[m_top - 1])?;
        for m in (1..m_top).rev() {
            y[m] = y[m].checked_sub(&y[m - 1])?;
        }
    }
    Ok(y)
}

/// In place `y <- (C^{-1} e^{qE} C) y`, i.e. the coefficients of
/// `sum_n y_n x^n` re-expanded around `x + q` (repeated synthetic division).
pub fn taylor_shift<T: Scalar>(y: &mut [T], q: &T) -> Result<()> {
    let n = y.len().saturating_sub(1);
    for i in 0..n {
        for j in (i..n).rev() {
            y[j] = y[j].checked_add(&q.checked_mul(&y[j + 1])?)?;
        }
    }
    Ok(())
}

#[cfg(test)]
fn binom_ibig(n: usize, k: usize) -> IBig {
    if k > n {
        return IBig::ZERO;
    }
    let k = k.min(n - k);
    let mut acc = IBig::ONE;
    for i in 0..k {
        acc = acc * IBig::from(n - i) / IBig::from(i + 1);
    }
    acc
}

/// Dense `Z~`, filled column by column from successive Pascal rows.
pub fn ztilde_dense(n: usize) -> Matrix<IBig> {
    let mut out = Matrix::<IBig>::zeros(n + 1, n + 1);
    let mut row = vec![IBig::ONE];
    for j in 0..=n {
        // row holds binom(j, .); it belongs to column k = n - j
        let k = n - j;
        for (i, b) in row.iter().enumerate() {
            out[(k + i, k)] = b.clone();
        }
        let mut next = vec![IBig::ONE; j + 2];
        for i in 1..=j {
            next[i] = &row[i - 1] + &row[i];
        }
        row = next;
    }
    out
}

/// Dense `Z`, `Z~`, the factorial diagonal `C` and the integer matrix
/// `M = C^{-1} E C` (superdiagonal `1, 2, ..., N`).
#[derive(Debug, Clone, PartialEq)]
pub struct JordanFactorization {
    pub n: usize,
    pub z: Matrix<IBig>,
    pub ztilde: Matrix<IBig>,
    pub factorials: Vec<IBig>,
}

impl JordanFactorization {
    pub fn new(n: usize) -> Result<Self> {
        let f = Self::build(n)?;
        f.validate()?;
        Ok(f)
    }

    pub fn build(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("need at least one molecule"));
        }
        let ztilde = ztilde_dense(n);
        let z = Matrix::from_fn(n + 1, n + 1, |m, k| {
            let b = ztilde[(m, k)].clone();
            if (m + k) % 2 == 1 {
                -b
            } else {
                b
            }
        });
        let mut factorials = vec![IBig::ONE; n + 1];
        for k in 1..=n {
            factorials[k] = &factorials[k - 1] * IBig::from(k);
        }
        Ok(Self {
            n,
            z,
            ztilde,
            factorials,
        })
    }

    pub fn middle(&self) -> Matrix<IBig> {
        Matrix::from_fn(self.n + 1, self.n + 1, |i, j| {
            if j == i + 1 {
                IBig::from(j)
            } else {
                IBig::ZERO
            }
        })
    }

    fn shift(&self) -> Matrix<IBig> {
        Matrix::from_fn(
            self.n + 1,
            self.n + 1,
            |i, j| {
                if j == i + 1 {
                    IBig::ONE
                } else {
                    IBig::ZERO
                }
            },
        )
    }

    /// `Z Z~ = I`, `C M = E C` and `A1 = Z M Z~`, all exact.
    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if !is_identity(&self.z.try_mul(&self.ztilde)?) {
            return Err(Error::Invariant(format!("Z Z~ != I at N={n}")));
        }
        let c = Matrix::from_fn(n + 1, n + 1, |i, j| {
            if i == j {
                self.factorials[i].clone()
            } else {
                IBig::ZERO
            }
        });
        let m = self.middle();
        if c.try_mul(&m)? != self.shift().try_mul(&c)? {
            return Err(Error::Invariant(format!("C^-1 E C != M at N={n}")));
        }
        let a1 = build_a1(n)?.to_dense().to_ibig();
        if self.z.try_mul(&m)?.try_mul(&self.ztilde)? != a1 {
            return Err(Error::Invariant(format!("A1 != Z C^-1 E C Z~ at N={n}")));
        }
        Ok(())
    }
}

fn is_identity(m: &Matrix<IBig>) -> bool {
    (0..m.rows()).all(|i| (0..m.cols()).all(|j| m[(i, j)] == if i == j { IBig::ONE } else { IBig::ZERO }))
}

/// Checks `(A1)^{N+1} e_j = 0` for every basis vector and that `(A1)^N != 0`.
pub fn verify_nilpotent(n: usize) -> Result<()> {
    let a1 = build_a1(n)?;
    let mut top_nonzero = false;
    for j in 0..=n {
        let mut v = vec![IBig::ZERO; n + 1];
        v[j] = IBig::ONE;
        for step in 1..=n + 1 {
            v = apply_tridiagonal(&a1.sub, &a1.diag, &a1.sup, &v);
            if step == n && v.iter().any(|x| *x != IBig::ZERO) {
                top_nonzero = true;
            }
        }
        if v.iter().any(|x| *x != IBig::ZERO) {
            return Err(Error::Invariant(format!("(A1)^(N+1) e_{j} != 0 at N={n}")));
        }
    }
    if !top_nonzero {
        return Err(Error::Invariant(format!("(A1)^N vanishes at N={n}")));
    }
    Ok(())
}

fn apply_tridiagonal(sub: &[i64], diag: &[i64], sup: &[i64], v: &[IBig]) -> Vec<IBig> {
    let n = v.len();
    (0..n)
        .map(|i| {
            let mut acc = &v[i] * IBig::from(diag[i]);
            if i > 0 {
                acc += &v[i - 1] * IBig::from(sub[i - 1]);
            }
            if i + 1 < n {
                acc += &v[i + 1] * IBig::from(sup[i]);
            }
            acc
        })
        .collect()
}

/// Bits lost to cancellation in `Z (shift) Z~`.
pub(crate) fn a1_lost_bits(n: usize, q: f64) -> f64 {
    2.0 * (n as f64 + 1.0) + n as f64 * (1.0 + q.abs()).log2()
}

pub(crate) fn a1_action_real<T: Real>(q: &T, u: &[T]) -> Result<Vec<T>> {
    let mut y = fast_ztilde_apply(u)?;
    taylor_shift(&mut y, q)?;
    fast_z_apply(&y)
}

/// Extra bits lost by the smallest output entries, whose size relative to
/// the largest is roughly `min(|q|, |1 + q|)^N`.
fn a1_range_bits(n: usize, q: f64) -> f64 {
    let small = q.abs().min((1.0 + q).abs()).clamp(f64::EPSILON, 1.0);
    -(n as f64) * small.log2()
}

/// `exp(q A1) u` in `O(N^2)` operations. `Auto` aims at entrywise relative
/// accuracy, so small entries can force the high-precision path.
pub fn expm_a1_action(n: usize, q: f64, u: &[f64], arithmetic: Arithmetic) -> Result<Vec<f64>> {
    if !q.is_finite() {
        return Err(Error::invalid(format!("exponent coefficient must be finite, got {q}")));
    }
    if u.len() != n + 1 {
        return Err(Error::DimensionMismatch {
            expected: n + 1,
            found: u.len(),
        });
    }
    if q == 0.0 {
        return Ok(u.to_vec());
    }
    let lost = a1_lost_bits(n, q) + a1_range_bits(n, q);
    let use_double = match arithmetic {
        Arithmetic::Double => true,
        Arithmetic::HighPrecision => false,
        Arithmetic::Auto => lost <= 12.0,
    };
    if use_double {
        return a1_action_real(&q, u).map_err(|e| match e {
            Error::Overflow(_) => Error::Magnitude(format!(
                "exp(q A1) overflows double precision at N={n}, q={q} \
                 (intermediate magnitude about 2^{lost:.0}); use high precision"
            )),
            other => other,
        });
    }
    let bits = working_bits(lost);
    let qh = HpFloat::lift(q, bits)?;
    let uh = u.iter().map(|&x| HpFloat::lift(x, bits)).collect::<Result<Vec<_>>>()?;
    Ok(a1_action_real(&qh, &uh)?.iter().map(Real::lower).collect())
}

/// `(exp(q A1) e_0)_m = (-1)^m binom(N, m) q^m (1 + q)^(N - m)`.
pub fn binomial_column(n: usize, q: f64) -> Vec<f64> {
    let mut binom = 1.0f64;
    (0..=n)
        .map(|m| {
            if m > 0 {
                binom = binom * (n - m + 1) as f64 / m as f64;
            }
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            sign * binom * q.powi(m as i32) * (1.0 + q).powi((n - m) as i32)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_apply(m: &Matrix<IBig>, u: &[i64]) -> Vec<IBig> {
        let u: Vec<IBig> = u.iter().map(|&x| IBig::from(x)).collect();
        m.mul_vec(&u).unwrap()
    }

    #[test]
    fn pascal_fill_matches_binomials() {
        for n in [1, 2, 7, 20] {
            let z = ztilde_dense(n);
            for m in 0..=n {
                for k in 0..=n {
                    let expect = if m >= k { binom_ibig(n - k, m - k) } else { IBig::ZERO };
                    assert_eq!(z[(m, k)], expect);
                }
            }
        }
    }

    #[test]
    fn transform_examples() {
        assert_eq!(fast_ztilde_apply(&[1i64, 1, 1]).unwrap(), vec![1, 3, 3]);
        let mut e0 = vec![0i64; 6];
        e0[0] = 1;
        assert_eq!(fast_ztilde_apply(&e0).unwrap(), vec![1, 5, 10, 10, 5, 1]);
        assert_eq!(fast_z_apply(&[1i64, 3, 3]).unwrap(), vec![1, 1, 1]);
        assert!(fast_z_apply::<i64>(&[]).is_err());
        assert_eq!(fast_ztilde_apply(&[7i64]).unwrap(), vec![7]);
    }

    #[test]
    fn transforms_match_dense() {
        for n in 1..25 {
            let f = JordanFactorization::build(n).unwrap();
            let u: Vec<i64> = (0..=n as i64).map(|k| (k * 37 % 11) - 5).collect();
            let ui: Vec<IBig> = u.iter().map(|&x| IBig::from(x)).collect();
            assert_eq!(fast_ztilde_apply(&ui).unwrap(), dense_apply(&f.ztilde, &u));
            assert_eq!(fast_z_apply(&ui).unwrap(), dense_apply(&f.z, &u));
        }
    }

    #[test]
    fn overflow_is_reported() {
        let u = vec![i64::MAX / 4; 8];
        assert!(matches!(fast_ztilde_apply(&u), Err(Error::Overflow(_))));
    }

    #[test]
    fn factorization_identities() {
        for n in 1..30 {
            JordanFactorization::new(n).unwrap();
        }
        for n in 1..12 {
            verify_nilpotent(n).unwrap();
        }
    }

    #[test]
    fn exponential_examples() {
        let e0 = [1.0, 0.0, 0.0];
        for arith in [Arithmetic::Double, Arithmetic::HighPrecision] {
            let y = expm_a1_action(2, 1.0, &e0, arith).unwrap();
            assert_eq!(y, vec![4.0, -4.0, 1.0]);
            let u = [0.3, -0.2, 0.9];
            assert_eq!(expm_a1_action(2, 0.0, &u, arith).unwrap(), u.to_vec());
        }
        assert_eq!(binomial_column(2, 1.0), vec![4.0, -4.0, 1.0]);
        assert_eq!(binomial_column(2, -0.5), vec![0.25, 0.5, 0.25]);
        assert_eq!(binomial_column(3, 0.0), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn integer_taylor_shift_matches_dense_exponential() {
        // exp(A1) has integer entries Z M' Z~ with M'[m][n] = binom(n, m)
        for n in 1..10 {
            let f = JordanFactorization::build(n).unwrap();
            let shift = Matrix::from_fn(n + 1, n + 1, |i, j| binom_ibig(j, i));
            let dense = f.z.try_mul(&shift).unwrap().try_mul(&f.ztilde).unwrap();
            for j in 0..=n {
                let mut u = vec![IBig::ZERO; n + 1];
                u[j] = IBig::ONE;
                let mut y = fast_ztilde_apply(&u).unwrap();
                taylor_shift(&mut y, &IBig::ONE).unwrap();
                assert_eq!(fast_z_apply(&y).unwrap(), dense.column(j));
            }
        }
    }
}
