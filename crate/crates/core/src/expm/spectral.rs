//! Exact eigen-decomposition of `A0`: eigenvalues `-2r`, eigenvectors the
//! coefficient vectors of `(1 + t)^(N - r) (1 - t)^r`, and `V^2 = 2^N I`.

use dashu_int::IBig;
use dashu_ratio::RBig;

use crate::error::{Error, Result};
use crate::expm::scalar::{working_bits, Arithmetic, HpFloat, Real};
use crate::generators::build_a0;
use crate::matrix::Matrix;

/// Largest `N` for which the double-precision spectral path is allowed.
pub const DOUBLE_SPECTRAL_MAX_N: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenvectorMethod {
    GeneratingPoly,
    Hypergeometric,
}

fn check_r(n: usize, r: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("need at least one molecule"));
    }
    if r > n {
        return Err(Error::invalid(format!("eigenvector index r={r} exceeds N={n}")));
    }
    Ok(())
}

/// Eigenvector of `A0` for eigenvalue `-2r`, scaled so entry 0 is `+1`.
pub fn eigenvector_a0(n: usize, r: usize, method: EigenvectorMethod) -> Result<Vec<IBig>> {
    check_r(n, r)?;
    match method {
        EigenvectorMethod::GeneratingPoly => Ok(generating_poly(n, r)),
        EigenvectorMethod::Hypergeometric => hypergeometric(n, r),
    }
}

fn generating_poly(n: usize, r: usize) -> Vec<IBig> {
    let mut c = vec![IBig::ZERO; n + 1];
    c[0] = IBig::ONE;
    for (deg, sign) in (0..n).map(|k| (k, k < r)) {
        // multiply the degree-`deg` polynomial by (1 - t) or (1 + t)
        for m in (1..=deg + 1).rev() {
            let prev = c[m - 1].clone();
            if sign {
                c[m] -= prev;
            } else {
                c[m] += prev;
            }
        }
    }
    c
}

fn rational(v: i64) -> RBig {
    RBig::from(v)
}

/// Terminating `2F1(a, b; c; z)` with `b` a nonpositive integer.
fn hyp2f1(a: i64, b: i64, c: i64, z: &RBig) -> RBig {
    let mut term = RBig::ONE;
    let mut sum = RBig::ONE;
    let mut k = 0i64;
    while b + k != 0 {
        term = term * rational(a + k) * rational(b + k) / (rational(c + k) * rational(k + 1)) * z;
        sum += &term;
        k += 1;
    }
    sum
}

fn binom_ibig(n: u64, k: u64) -> IBig {
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

fn hypergeometric(n: usize, r: usize) -> Result<Vec<IBig>> {
    let (ni, ri) = (n as i64, r as i64);
    let z = rational(-1);
    let mut v = Vec::with_capacity(n + 1);
    for m in 0..=n {
        let mi = m as i64;
        let val = if m <= r {
            let sign = if m % 2 == 0 { 1 } else { -1 };
            RBig::from(binom_ibig(r as u64, m as u64) * IBig::from(sign)) * hyp2f1(-ni + ri, -mi, ri - mi + 1, &z)
        } else {
            let sign = if r % 2 == 0 { 1 } else { -1 };
            RBig::from(binom_ibig((n - r) as u64, (m - r) as u64) * IBig::from(sign))
                * hyp2f1(-ni + mi, -ri, mi - ri + 1, &z)
        };
        v.push(val);
    }
    let v0 = v[0].clone();
    if v0 == RBig::ZERO {
        return Err(Error::Invariant(format!(
            "hypergeometric eigenvector N={n} r={r} has v0 = 0"
        )));
    }
    v.into_iter()
        .map(|x| {
            let q = x / &v0;
            if q.denominator() != &dashu_int::UBig::ONE {
                return Err(Error::Invariant(format!(
                    "hypergeometric eigenvector N={n} r={r} is not integral"
                )));
            }
            Ok(q.numerator().clone())
        })
        .collect()
}

/// `A0 = 2^{-N} V diag(0, -2, ..., -2N) V`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFactorization {
    pub n: usize,
    pub eigenvalues: Vec<i64>,
    /// Column `r` is the eigenvector for `-2r`.
    pub v: Matrix<IBig>,
}

impl SpectralFactorization {
    /// Build and verify every identity exactly.
    pub fn new(n: usize) -> Result<Self> {
        let f = Self::build(n)?;
        f.validate()?;
        Ok(f)
    }

    /// Build without verification. Column `r` is derived from column `r - 1`
    /// by multiplying with `(1 - t) / (1 + t)`, an exact polynomial division.
    pub fn build(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("need at least one molecule"));
        }
        let mut v = Matrix::<IBig>::zeros(n + 1, n + 1);
        let mut col = generating_poly(n, 0);
        for r in 0..=n {
            if r > 0 {
                for m in (1..=n).rev() {
                    let prev = col[m - 1].clone();
                    col[m] -= prev;
                }
                for m in 1..=n {
                    let prev = col[m - 1].clone();
                    col[m] -= prev;
                }
            }
            for (m, x) in col.iter().enumerate() {
                v[(m, r)] = x.clone();
            }
        }
        Ok(Self {
            n,
            eigenvalues: (0..=n as i64).map(|r| -2 * r).collect(),
            v,
        })
    }

    /// `A0 V = V Λ`, `V^2 = 2^N I` and the column symmetry, all exact.
    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        let a0 = build_a0(n)?.to_dense().to_ibig();
        let lhs = a0.try_mul(&self.v)?;
        for r in 0..=n {
            let lambda = IBig::from(self.eigenvalues[r]);
            for m in 0..=n {
                if lhs[(m, r)] != &self.v[(m, r)] * &lambda {
                    return Err(Error::Invariant(format!("A0 V != V diag at N={n}, entry ({m}, {r})")));
                }
            }
        }
        let sq = self.v.try_mul(&self.v)?;
        let scale = IBig::ONE << n;
        for i in 0..=n {
            for j in 0..=n {
                let expect = if i == j { scale.clone() } else { IBig::ZERO };
                if sq[(i, j)] != expect {
                    return Err(Error::Invariant(format!("V^2 != 2^N I at N={n}, entry ({i}, {j})")));
                }
            }
        }
        for r in 0..=n {
            for m in 0..=n {
                let mut rhs = self.v[(m, n - r)].clone();
                if (m + r) % 2 == 1 {
                    rhs = -rhs;
                }
                if self.v[(n - m, r)] != rhs {
                    return Err(Error::Invariant(format!(
                        "column symmetry fails at N={n}, r={r}, m={m}"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn check_vector(n: usize, v: &[f64]) -> Result<()> {
    if v.len() != n + 1 {
        return Err(Error::DimensionMismatch {
            expected: n + 1,
            found: v.len(),
        });
    }
    Ok(())
}

pub(crate) fn a0_lost_bits(n: usize) -> f64 {
    n as f64 + 2.0
}

/// `exp(t A0) v` through the spectral factorization.
pub fn expm_a0_action(n: usize, t: f64, v: &[f64], arithmetic: Arithmetic) -> Result<Vec<f64>> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("time must be finite and >= 0, got {t}")));
    }
    if n == 0 {
        return Err(Error::invalid("need at least one molecule"));
    }
    check_vector(n, v)?;
    let factor = SpectralFactorization::build(n)?;
    match resolve_a0(n, arithmetic)? {
        Arithmetic::Double => a0_action::<f64>(&factor, t, v, 0),
        _ => {
            let bits = working_bits(a0_lost_bits(n));
            let x = v.iter().map(|&x| HpFloat::lift(x, bits)).collect::<Result<Vec<_>>>()?;
            let y = a0_action_real::<HpFloat>(&factor, t, &x, bits)?;
            Ok(y.iter().map(Real::lower).collect())
        }
    }
}

pub(crate) fn resolve_a0(n: usize, arithmetic: Arithmetic) -> Result<Arithmetic> {
    match arithmetic {
        Arithmetic::Double if n > DOUBLE_SPECTRAL_MAX_N => Err(Error::Conditioning(format!(
            "double-precision spectral path is limited to N <= {DOUBLE_SPECTRAL_MAX_N} \
             (eigenvector matrix conditioning grows like 2^N); got N={n}, use high precision"
        ))),
        Arithmetic::Auto if a0_lost_bits(n) > 12.0 => Ok(Arithmetic::HighPrecision),
        Arithmetic::Auto => Ok(Arithmetic::Double),
        other => Ok(other),
    }
}

fn a0_action<T: Real>(f: &SpectralFactorization, t: f64, v: &[f64], bits: usize) -> Result<Vec<f64>> {
    let x = v.iter().map(|&x| T::lift(x, bits)).collect::<Result<Vec<_>>>()?;
    let y = a0_action_real::<T>(f, t, &x, bits)?;
    Ok(y.iter().map(Real::lower).collect())
}

/// `2^{-N} V Λ(t) V x` in the scalar type `T`.
pub(crate) fn a0_action_real<T: Real>(f: &SpectralFactorization, t: f64, x: &[T], bits: usize) -> Result<Vec<T>> {
    let n = f.n;
    let v: Matrix<IBig> = f.v.clone();
    let vt: Vec<Vec<T>> = (0..=n)
        .map(|i| (0..=n).map(|j| T::lift_int(&v[(i, j)], bits)).collect())
        .collect();
    let matvec = |x: &[T]| -> Result<Vec<T>> {
        vt.iter()
            .map(|row| {
                row.iter()
                    .zip(x)
                    .try_fold(T::zero(), |acc, (a, b)| acc.checked_add(&a.checked_mul(b)?))
            })
            .collect()
    };
    let mut w = matvec(x)?;
    let decay = T::lift(-2.0 * t, bits)?.exp();
    let mut weight = T::lift(1.0, bits)?;
    for wr in w.iter_mut() {
        *wr = wr.checked_mul(&weight)?;
        weight = weight.checked_mul(&decay)?;
    }
    let scale = pow2_neg::<T>(n, bits)?;
    matvec(&w)?.iter().map(|y| y.checked_mul(&scale)).collect()
}

fn pow2_neg<T: Real>(n: usize, bits: usize) -> Result<T> {
    let mut s = T::lift(1.0, bits)?;
    let half = T::lift(0.5, bits)?;
    for _ in 0..n {
        s = s.checked_mul(&half)?;
    }
    Ok(s)
}
