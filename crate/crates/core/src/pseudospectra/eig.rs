use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expm::SpectralFactorization;
use crate::generators::{build_a0, build_a1};
use crate::matrix::Matrix;

/// Floating-point eigenvalues of `A` set against its exact spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigSensitivityReport {
    pub exact_spectrum: Vec<f64>,
    pub computed_spectrum: Vec<Complex64>,
    /// `None` when the eigensolver failed.
    pub max_abs_error: Option<f64>,
    pub max_imag: Option<f64>,
    /// `max |A v - λ v| / |v|` over the supplied exact pairs.
    pub residual_of_exact: f64,
    pub eigensolver_converged: bool,
}

fn norm2(v: &[f64]) -> f64 {
    let m = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if m == 0.0 {
        return 0.0;
    }
    m * v.iter().map(|x| (x / m) * (x / m)).sum::<f64>().sqrt()
}

pub fn eig_sensitivity_report(
    a: &Matrix<f64>,
    exact_spectrum: &[f64],
    exact_pairs: &[(f64, Vec<f64>)],
) -> Result<EigSensitivityReport> {
    if !a.is_square() {
        return Err(Error::invalid("eigenvalue report needs a square matrix"));
    }
    let n = a.rows();
    if exact_spectrum.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: exact_spectrum.len(),
        });
    }
    let mut residual = 0.0f64;
    for (lambda, v) in exact_pairs {
        let av = a.mul_vec(v)?;
        let r: Vec<f64> = av.iter().zip(v).map(|(x, y)| x - lambda * y).collect();
        let nv = norm2(v);
        if nv == 0.0 {
            return Err(Error::invalid("exact eigenvector is zero"));
        }
        residual = residual.max(norm2(&r) / nv);
    }
    let dense = DMatrix::from_fn(n, n, |i, j| a[(i, j)]);
    let computed: Option<Vec<Complex64>> =
        Schur::try_new(dense, f64::EPSILON, 100 * n.max(10)).map(|s| s.complex_eigenvalues().iter().copied().collect());
    let mut exact = exact_spectrum.to_vec();
    exact.sort_by(f64::total_cmp);
    let (computed_spectrum, max_abs_error, max_imag, converged) = match computed {
        Some(mut c) => {
            c.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
            let err = c.iter().zip(&exact).map(|(z, &l)| (z - l).norm()).fold(0.0, f64::max);
            let imag = c.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
            (c, Some(err), Some(imag), true)
        }
        None => (Vec::new(), None, None, false),
    };
    Ok(EigSensitivityReport {
        exact_spectrum: exact,
        computed_spectrum,
        max_abs_error,
        max_imag,
        residual_of_exact: residual,
        eigensolver_converged: converged,
    })
}

/// Report for `A0` with eigenpairs `(-2r, V e_r)` from the exact factorization.
pub fn a0_report(n: usize) -> Result<EigSensitivityReport> {
    let a = build_a0(n)?.to_f64().to_dense();
    let f = SpectralFactorization::build(n)?;
    let pairs: Vec<(f64, Vec<f64>)> = (0..=n)
        .map(|r| {
            (
                f.eigenvalues[r] as f64,
                (0..=n).map(|m| f.v[(m, r)].to_f64().value()).collect(),
            )
        })
        .collect();
    let spectrum: Vec<f64> = f.eigenvalues.iter().map(|&l| l as f64).collect();
    eig_sensitivity_report(&a, &spectrum, &pairs)
}

/// `A1 v = 0` for `v_m = (-1)^m binom(N, m)`.
pub fn a1_null_vector(n: usize) -> Vec<f64> {
    let mut b = 1.0f64;
    (0..=n)
        .map(|m| {
            if m > 0 {
                b = b * (n - m + 1) as f64 / m as f64;
            }
            if m % 2 == 0 {
                b
            } else {
                -b
            }
        })
        .collect()
}

/// Report for the nilpotent `A1`: exact spectrum all zeros.
pub fn a1_report(n: usize) -> Result<EigSensitivityReport> {
    let a = build_a1(n)?.to_f64().to_dense();
    eig_sensitivity_report(&a, &vec![0.0; n + 1], &[(0.0, a1_null_vector(n))])
}
