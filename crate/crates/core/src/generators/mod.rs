//! Generator matrices of the isomerisation master equation.
//!
//! States are indexed by the number of `S1` molecules, `i = 0..=N`. The two
//! building blocks are
//!
//! * `A0`: diagonal `-N`, superdiagonal `l`, subdiagonal `N - l`;
//! * `A1`: diagonal `N - 2l`, superdiagonal `l`, subdiagonal `-N + l`;
//!
//! (column index `l`), and the time-dependent generator is `A0 + f(t) A1`.
//! Both are stored as three bands; dense and coordinate forms are derived.

mod rate;
mod tasep;

pub use rate::{DerivativeKind, RateFunction, RateKind};
pub use tasep::{build_tasep_generator, count_bounded_partitions, SparseGenerator, TasepState, DEFAULT_STATE_CAP};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{Matrix, Ring};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorLabel {
    A0,
    A1,
    Combined,
}

impl std::fmt::Display for GeneratorLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GeneratorLabel::A0 => "a0",
            GeneratorLabel::A1 => "a1",
            GeneratorLabel::Combined => "combined",
        })
    }
}

/// Tridiagonal matrix in band storage.
///
/// `sub[l]` is entry `(l + 1, l)`, `sup[l]` is entry `(l, l + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalGenerator<T = i64> {
    pub sub: Vec<T>,
    pub diag: Vec<T>,
    pub sup: Vec<T>,
    pub label: GeneratorLabel,
}

impl<T: Ring> TridiagonalGenerator<T> {
    pub fn n_states(&self) -> usize {
        self.diag.len()
    }

    /// The molecule total `N` (one less than the state count).
    pub fn molecules(&self) -> usize {
        self.diag.len() - 1
    }

    pub fn get(&self, k: usize, l: usize) -> T {
        if k == l {
            self.diag[k].clone()
        } else if k + 1 == l {
            self.sup[k].clone()
        } else if l + 1 == k {
            self.sub[l].clone()
        } else {
            T::zero()
        }
    }

    pub fn to_dense(&self) -> Matrix<T> {
        let n = self.n_states();
        Matrix::from_fn(n, n, |k, l| self.get(k, l))
    }

    /// Nonzero entries as `(row, col, value)`, row-major.
    pub fn to_coordinates(&self) -> Vec<(usize, usize, T)> {
        let n = self.n_states();
        let mut out = Vec::with_capacity(3 * n);
        for k in 0..n {
            for l in k.saturating_sub(1)..(k + 2).min(n) {
                let v = self.get(k, l);
                if !v.is_zero() {
                    out.push((k, l, v));
                }
            }
        }
        out
    }

    /// Product with a vector, `y = M x`.
    pub fn apply(&self, x: &[T]) -> Result<Vec<T>> {
        let n = self.n_states();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: x.len(),
            });
        }
        Ok((0..n)
            .map(|k| {
                let mut acc = self.diag[k].mul(&x[k]);
                if k > 0 {
                    acc = acc.add(&self.sub[k - 1].mul(&x[k - 1]));
                }
                if k + 1 < n {
                    acc = acc.add(&self.sup[k].mul(&x[k + 1]));
                }
                acc
            })
            .collect())
    }

    /// Product of two tridiagonal matrices as a dense matrix; only the five
    /// central bands are touched.
    pub fn band_product(&self, rhs: &Self) -> Result<Matrix<T>> {
        let n = self.n_states();
        if rhs.n_states() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: rhs.n_states(),
            });
        }
        let mut out: Matrix<T> = Matrix::zeros(n, n);
        for i in 0..n {
            for k in i.saturating_sub(1)..(i + 2).min(n) {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in k.saturating_sub(1)..(k + 2).min(n) {
                    out[(i, j)] = out[(i, j)].add(&a.mul(&rhs.get(k, j)));
                }
            }
        }
        Ok(out)
    }

    /// `[self, rhs]` exploiting the band structure.
    pub fn commutator_with(&self, rhs: &Self) -> Result<Matrix<T>> {
        let ab = self.band_product(rhs)?;
        let ba = rhs.band_product(self)?;
        ab.try_sub(&ba)
    }
}

impl TridiagonalGenerator<i64> {
    pub fn to_f64(&self) -> TridiagonalGenerator<f64> {
        let conv = |v: &[i64]| v.iter().map(|&x| x as f64).collect();
        TridiagonalGenerator {
            sub: conv(&self.sub),
            diag: conv(&self.diag),
            sup: conv(&self.sup),
            label: self.label,
        }
    }
}

fn checked_n(n: usize) -> Result<i64> {
    if n == 0 {
        return Err(Error::invalid("molecule count N must be at least 1"));
    }
    let n = i64::try_from(n).map_err(|_| Error::Overflow(format!("N = {n} does not fit in i64")))?;
    n.checked_mul(2)
        .ok_or_else(|| Error::Overflow(format!("2N overflows i64 for N = {n}")))?;
    Ok(n)
}

pub fn build_a0(n: usize) -> Result<TridiagonalGenerator> {
    let big_n = checked_n(n)?;
    Ok(TridiagonalGenerator {
        sub: (0..big_n).map(|l| big_n - l).collect(),
        diag: vec![-big_n; n + 1],
        sup: (1..=big_n).collect(),
        label: GeneratorLabel::A0,
    })
}

pub fn build_a1(n: usize) -> Result<TridiagonalGenerator> {
    let big_n = checked_n(n)?;
    Ok(TridiagonalGenerator {
        sub: (0..big_n).map(|l| -big_n + l).collect(),
        diag: (0..=big_n).map(|l| big_n - 2 * l).collect(),
        sup: (1..=big_n).collect(),
        label: GeneratorLabel::A1,
    })
}

/// `A0 + f(t) A1` with real bands.
///
/// Fails on dimension mismatch, or when the rate function is flagged as
/// bounded and `|f(t)| > 1`.
pub fn assemble(
    a0: &TridiagonalGenerator,
    a1: &TridiagonalGenerator,
    f: &RateFunction,
    t: f64,
) -> Result<TridiagonalGenerator<f64>> {
    if a0.n_states() != a1.n_states() {
        return Err(Error::DimensionMismatch {
            expected: a0.n_states(),
            found: a1.n_states(),
        });
    }
    let ft = f.checked_value(t)?;
    Ok(combine(a0, a1, ft))
}

/// `A0 + c A1` for a fixed scalar. The diagonal is rebuilt as minus the
/// off-diagonal column sum so columns sum to exactly zero in floating point.
pub fn combine(a0: &TridiagonalGenerator, a1: &TridiagonalGenerator, c: f64) -> TridiagonalGenerator<f64> {
    let mix = |x: &[i64], y: &[i64]| {
        x.iter()
            .zip(y)
            .map(|(&p, &q)| p as f64 + c * q as f64)
            .collect::<Vec<_>>()
    };
    let sub = mix(&a0.sub, &a1.sub);
    let sup = mix(&a0.sup, &a1.sup);
    let diag = (0..a0.diag.len())
        .map(|j| {
            let above = if j > 0 { sup[j - 1] } else { 0.0 };
            let below = sub.get(j).copied().unwrap_or(0.0);
            -(above + below)
        })
        .collect();
    TridiagonalGenerator {
        sub,
        diag,
        sup,
        label: GeneratorLabel::Combined,
    }
}

/// `XY - YX`.
pub fn commutator<T: Ring>(x: &Matrix<T>, y: &Matrix<T>) -> Result<Matrix<T>> {
    if !x.is_square() || !y.is_square() {
        return Err(Error::invalid("commutator requires square matrices"));
    }
    if x.rows() != y.rows() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            found: y.rows(),
        });
    }
    x.try_mul(y)?.try_sub(&y.try_mul(x)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaplacianReport {
    /// Largest `|column sum|`.
    pub max_column_sum_deviation: f64,
    /// Most negative off-diagonal entry (0 if none is negative).
    pub min_off_diagonal: f64,
    pub is_laplacian: bool,
}

/// Check for nonnegative off-diagonals and zero column sums.
pub fn check_laplacian(m: &Matrix<f64>, tol: f64) -> Result<LaplacianReport> {
    if !m.is_square() {
        return Err(Error::invalid("check_laplacian requires a square matrix"));
    }
    let n = m.rows();
    let mut dev = 0.0f64;
    let mut min_off = 0.0f64;
    for j in 0..n {
        // off-diagonal part first, then the diagonal
        let mut off = 0.0;
        for i in (0..n).filter(|&i| i != j) {
            off += m[(i, j)];
            min_off = min_off.min(m[(i, j)]);
        }
        dev = dev.max((off + m[(j, j)]).abs());
    }
    Ok(LaplacianReport {
        max_column_sum_deviation: dev,
        min_off_diagonal: min_off,
        is_laplacian: dev <= tol && min_off >= -tol,
    })
}

/// The persymmetric identity `P` (`P[i][j] = 1` iff `j = N - i`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Involution {
    dim: usize,
}

impl Involution {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("involution dimension must be positive"));
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn to_matrix<T: Ring>(&self) -> Matrix<T> {
        let n = self.dim;
        Matrix::from_fn(n, n, |i, j| if i + j == n - 1 { T::one() } else { T::zero() })
    }

    /// `P v` (reversal).
    pub fn apply<T: Clone>(&self, v: &[T]) -> Vec<T> {
        v.iter().rev().cloned().collect()
    }

    /// `P B P`.
    pub fn conjugate<T: Ring>(&self, b: &Matrix<T>) -> Result<Matrix<T>> {
        let n = self.dim;
        if b.rows() != n || b.cols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: b.rows(),
            });
        }
        Ok(Matrix::from_fn(n, n, |i, j| b[(n - 1 - i, n - 1 - j)].clone()))
    }
}

/// Split `B` into the parts fixed and negated by `B -> PBP`.
pub fn cartan_split(b: &Matrix<f64>, p: &Involution) -> Result<(Matrix<f64>, Matrix<f64>)> {
    let pbp = p.conjugate(b)?;
    let k = b.try_add(&pbp)?.scale(&0.5);
    let q = b.try_sub(&pbp)?.scale(&0.5);
    Ok((k, q))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(m: &Matrix<i64>) -> Vec<Vec<i64>> {
        m.to_rows()
    }

    #[test]
    fn a0_small_cases() {
        assert_eq!(
            rows(&build_a0(2).unwrap().to_dense()),
            vec![vec![-2, 1, 0], vec![2, -2, 2], vec![0, 1, -2]]
        );
        assert_eq!(rows(&build_a0(1).unwrap().to_dense()), vec![vec![-1, 1], vec![1, -1]]);
        let a = build_a0(2).unwrap();
        assert_eq!(
            (a.diag.clone(), a.sup.clone(), a.sub.clone()),
            (vec![-2, -2, -2], vec![1, 2], vec![2, 1])
        );
    }

    #[test]
    fn a1_small_cases() {
        assert_eq!(
            rows(&build_a1(2).unwrap().to_dense()),
            vec![vec![2, 1, 0], vec![-2, 0, 2], vec![0, -1, -2]]
        );
        assert_eq!(rows(&build_a1(1).unwrap().to_dense()), vec![vec![1, 1], vec![-1, -1]]);
    }

    #[test]
    fn zero_molecules_rejected() {
        assert!(matches!(build_a0(0), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_a1(0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn column_sums_vanish() {
        for n in 1..40 {
            for m in [build_a0(n).unwrap(), build_a1(n).unwrap()] {
                let d = m.to_dense();
                for j in 0..=n {
                    assert_eq!((0..=n).map(|i| d[(i, j)]).sum::<i64>(), 0);
                }
            }
        }
    }

    #[test]
    fn commutator_n2() {
        let a0 = build_a0(2).unwrap().to_dense();
        let a1 = build_a1(2).unwrap().to_dense();
        let c = commutator(&a0, &a1).unwrap();
        assert_eq!(rows(&c), vec![vec![-4, -2, 0], vec![4, 0, -4], vec![0, 2, 4]]);
        assert!(commutator(&a0, &a0).unwrap().is_zero_matrix());
        let id = Matrix::<i64>::identity(3);
        assert!(commutator(&id, &a1).unwrap().is_zero_matrix());
    }

    #[test]
    fn banded_commutator_matches_dense() {
        for n in 1..12 {
            let a0 = build_a0(n).unwrap();
            let a1 = build_a1(n).unwrap();
            assert_eq!(
                a0.commutator_with(&a1).unwrap(),
                commutator(&a0.to_dense(), &a1.to_dense()).unwrap()
            );
        }
    }

    #[test]
    fn assemble_cases() {
        let a0 = build_a0(1).unwrap();
        let a1 = build_a1(1).unwrap();
        let m = assemble(&a0, &a1, &RateFunction::constant(1.0), 3.7).unwrap();
        assert_eq!(m.to_dense().to_rows(), vec![vec![0.0, 2.0], vec![0.0, -2.0]]);
        let z = assemble(&a0, &a1, &RateFunction::constant(0.0), 1.0).unwrap();
        assert_eq!(z.to_dense(), a0.to_f64().to_dense());
        let a0_2 = build_a0(2).unwrap();
        assert!(matches!(
            assemble(&a0_2, &a1, &RateFunction::sin(), 0.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn assemble_sin_at_pi_is_a0() {
        let a0 = build_a0(4).unwrap();
        let a1 = build_a1(4).unwrap();
        let m = assemble(&a0, &a1, &RateFunction::sin(), std::f64::consts::PI).unwrap();
        let d = m.to_dense();
        let e = a0.to_f64().to_dense();
        for i in 0..5 {
            for j in 0..5 {
                assert!((d[(i, j)] - e[(i, j)]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn laplacian_checks() {
        let r = check_laplacian(&build_a0(10).unwrap().to_f64().to_dense(), 0.0).unwrap();
        assert!(r.is_laplacian);
        assert_eq!(r.max_column_sum_deviation, 0.0);

        let bad = combine(&build_a0(2).unwrap(), &build_a1(2).unwrap(), 2.0);
        let r = check_laplacian(&bad.to_dense(), 0.0).unwrap();
        assert!(!r.is_laplacian);
        assert_eq!(bad.get(2, 1), -1.0);
        assert_eq!(r.min_off_diagonal, -2.0);

        let r = check_laplacian(&Matrix::identity(3), 0.0).unwrap();
        assert!(!r.is_laplacian);
        assert_eq!(r.max_column_sum_deviation, 1.0);
    }

    #[test]
    fn involution_conjugation() {
        for n in 1..30 {
            let p = Involution::new(n + 1).unwrap();
            let a0 = build_a0(n).unwrap().to_dense();
            let a1 = build_a1(n).unwrap().to_dense();
            assert_eq!(p.conjugate(&a0).unwrap(), a0);
            assert_eq!(p.conjugate(&a1).unwrap(), -&a1);
            let pm: Matrix<i64> = p.to_matrix();
            assert_eq!(&pm * &pm, Matrix::identity(n + 1));
            assert_eq!(pm.transpose(), pm);
        }
    }

    #[test]
    fn cartan_split_cases() {
        let n = 5;
        let p = Involution::new(n + 1).unwrap();
        let a0 = build_a0(n).unwrap().to_f64().to_dense();
        let a1 = build_a1(n).unwrap().to_f64().to_dense();
        let (k, q) = cartan_split(&a0, &p).unwrap();
        assert_eq!(k, a0);
        assert!(q.max_abs() == 0.0);
        let (k, q) = cartan_split(&a1, &p).unwrap();
        assert!(k.max_abs() == 0.0);
        assert_eq!(q, a1);
        let b = a0.try_add(&a1.scale(&3.0)).unwrap();
        let (k, q) = cartan_split(&b, &p).unwrap();
        assert_eq!(k, a0);
        assert_eq!(q, a1.scale(&3.0));
        assert!(cartan_split(&a0, &Involution::new(3).unwrap()).is_err());
    }

    #[test]
    fn coordinates_count() {
        assert_eq!(build_a0(2).unwrap().to_coordinates().len(), 7);
        assert_eq!(build_a1(1).unwrap().to_coordinates().len(), 4);
    }
}
