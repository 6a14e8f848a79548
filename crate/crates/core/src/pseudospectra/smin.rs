//! Smallest singular value of `zI - A`.
//!
//! The reference method is a dense complex SVD. The fast method runs
//! Lanczos on `(zI - A)^{-1} (zI - A)^{-H}`, whose largest eigenvalue is
//! `s_min^{-2}`; each step costs one solve with `zI - A` and one with its
//! adjoint. Triangular matrices are solved directly, banded ones through a
//! banded LU with partial pivoting, and dense ones optionally after a
//! one-time complex Schur reduction.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

type C = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SminMethod {
    SvdDirect,
    InverseIteration,
}

impl std::str::FromStr for SminMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "svd" | "svd_direct" => Ok(Self::SvdDirect),
            "inverse" | "inverse_iteration" => Ok(Self::InverseIteration),
            _ => Err(Error::invalid(format!(
                "unknown smin method '{s}' (expected svd or inverse)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SminOptions {
    pub method: SminMethod,
    /// Reduce a dense matrix to triangular Schur form once up front.
    pub schur: bool,
    /// Krylov dimension per cycle.
    pub max_steps: usize,
    pub max_restarts: usize,
    /// Relative stabilisation threshold on the Ritz value.
    pub tol: f64,
}

impl Default for SminOptions {
    fn default() -> Self {
        Self {
            method: SminMethod::InverseIteration,
            schur: false,
            max_steps: 60,
            max_restarts: 6,
            tol: 1e-13,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Structure {
    Lower,
    Upper,
    Banded { kl: usize, ku: usize },
}

/// Precomputed data for repeated `s_min(zI - A)` evaluations.
#[derive(Debug, Clone)]
pub struct SminEngine {
    n: usize,
    /// Row-major; either `A` or its Schur factor `T`.
    base: Vec<C>,
    structure: Structure,
    options: SminOptions,
}

/// Per-thread scratch space.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    lu: Vec<C>,
    piv: Vec<usize>,
    basis: Vec<Vec<C>>,
    w: Vec<C>,
}

fn detect(n: usize, a: &[C]) -> Structure {
    let (mut kl, mut ku) = (0, 0);
    for i in 0..n {
        for j in 0..n {
            if a[i * n + j] != C::new(0.0, 0.0) {
                if i > j {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
    }
    match (kl, ku) {
        (_, 0) => Structure::Lower,
        (0, _) => Structure::Upper,
        _ => Structure::Banded { kl, ku },
    }
}

impl SminEngine {
    pub fn new(a: &Matrix<f64>, options: SminOptions) -> Result<Self> {
        if !a.is_square() || a.rows() == 0 {
            return Err(Error::invalid("s_min needs a nonempty square matrix"));
        }
        let n = a.rows();
        let mut base = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let v = a[(i, j)];
                if !v.is_finite() {
                    return Err(Error::invalid(format!("matrix entry ({i}, {j}) is not finite")));
                }
                base.push(C::new(v, 0.0));
            }
        }
        let mut structure = detect(n, &base);
        let dense = matches!(structure, Structure::Banded { kl, ku } if kl + ku > 4);
        if options.schur && dense {
            let m = DMatrix::from_row_slice(n, n, &base);
            let schur = Schur::try_new(m, f64::EPSILON, 10_000)
                .ok_or_else(|| Error::Eigensolver("Schur reduction did not converge".into()))?;
            let (_, t) = schur.unpack();
            base = (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .map(|(i, j)| t[(i, j)])
                .collect();
            for i in 0..n {
                for j in 0..i {
                    base[i * n + j] = C::new(0.0, 0.0);
                }
            }
            structure = Structure::Upper;
        }
        Ok(Self {
            n,
            base,
            structure,
            options,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn workspace(&self) -> Workspace {
        Workspace::default()
    }

    pub fn smin(&self, z: C, ws: &mut Workspace) -> Result<f64> {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::invalid("shift z must be finite"));
        }
        match self.options.method {
            SminMethod::SvdDirect => Ok(self.smin_svd(z)),
            SminMethod::InverseIteration => self.smin_lanczos(z, ws),
        }
    }

    pub fn smin_svd(&self, z: C) -> f64 {
        let n = self.n;
        let m = DMatrix::from_fn(n, n, |i, j| {
            let a = self.base[i * n + j];
            if i == j {
                z - a
            } else {
                -a
            }
        });
        m.singular_values().iter().fold(f64::INFINITY, |acc, &s| acc.min(s))
    }

    fn entry(&self, z: C, i: usize, j: usize) -> C {
        let a = self.base[i * self.n + j];
        if i == j {
            z - a
        } else {
            -a
        }
    }

    /// Prepare per-shift data. Returns `false` if `zI - A` is exactly singular.
    fn factor(&self, z: C, ws: &mut Workspace) -> bool {
        let n = self.n;
        match self.structure {
            Structure::Lower | Structure::Upper => (0..n).all(|i| self.entry(z, i, i) != C::new(0.0, 0.0)),
            Structure::Banded { kl, ku } => {
                ws.lu.clear();
                ws.lu.extend((0..n * n).map(|k| self.entry(z, k / n, k % n)));
                ws.piv.clear();
                ws.piv.resize(n, 0);
                let width = kl + ku;
                let a = &mut ws.lu;
                for k in 0..n {
                    let last = (k + kl + 1).min(n);
                    let mut p = k;
                    for i in k + 1..last {
                        if a[i * n + k].norm_sqr() > a[p * n + k].norm_sqr() {
                            p = i;
                        }
                    }
                    ws.piv[k] = p;
                    if a[p * n + k] == C::new(0.0, 0.0) {
                        return false;
                    }
                    let col_end = (k + width + 1).min(n);
                    if p != k {
                        for j in k..col_end {
                            a.swap(k * n + j, p * n + j);
                        }
                    }
                    let pivot = a[k * n + k];
                    for i in k + 1..last {
                        let l = a[i * n + k] / pivot;
                        a[i * n + k] = l;
                        if l != C::new(0.0, 0.0) {
                            for j in k + 1..col_end {
                                let u = a[k * n + j];
                                a[i * n + j] -= l * u;
                            }
                        }
                    }
                }
                true
            }
        }
    }

    /// `x <- (zI - A)^{-1} x`.
    fn solve(&self, z: C, ws: &Workspace, x: &mut [C]) {
        let n = self.n;
        match self.structure {
            Structure::Lower => {
                for i in 0..n {
                    let mut s = x[i];
                    for j in 0..i {
                        s -= self.entry(z, i, j) * x[j];
                    }
                    x[i] = s / self.entry(z, i, i);
                }
            }
            Structure::Upper => {
                for i in (0..n).rev() {
                    let mut s = x[i];
                    for j in i + 1..n {
                        s -= self.entry(z, i, j) * x[j];
                    }
                    x[i] = s / self.entry(z, i, i);
                }
            }
            Structure::Banded { kl, ku } => {
                let a = &ws.lu;
                for k in 0..n {
                    x.swap(k, ws.piv[k]);
                    let xk = x[k];
                    for i in k + 1..(k + kl + 1).min(n) {
                        x[i] -= a[i * n + k] * xk;
                    }
                }
                let width = kl + ku;
                for i in (0..n).rev() {
                    let mut s = x[i];
                    for j in i + 1..(i + width + 1).min(n) {
                        s -= a[i * n + j] * x[j];
                    }
                    x[i] = s / a[i * n + i];
                }
            }
        }
    }

    /// `x <- (zI - A)^{-H} x`.
    fn solve_adjoint(&self, z: C, ws: &Workspace, x: &mut [C]) {
        let n = self.n;
        match self.structure {
            Structure::Lower => {
                for i in (0..n).rev() {
                    let mut s = x[i];
                    for j in i + 1..n {
                        s -= self.entry(z, j, i).conj() * x[j];
                    }
                    x[i] = s / self.entry(z, i, i).conj();
                }
            }
            Structure::Upper => {
                for i in 0..n {
                    let mut s = x[i];
                    for j in 0..i {
                        s -= self.entry(z, j, i).conj() * x[j];
                    }
                    x[i] = s / self.entry(z, i, i).conj();
                }
            }
            Structure::Banded { kl, ku } => {
                let a = &ws.lu;
                let width = kl + ku;
                for i in 0..n {
                    let mut s = x[i];
                    for j in i.saturating_sub(width)..i {
                        s -= a[j * n + i].conj() * x[j];
                    }
                    x[i] = s / a[i * n + i].conj();
                }
                for k in (0..n).rev() {
                    let mut s = x[k];
                    for i in k + 1..(k + kl + 1).min(n) {
                        s -= a[i * n + k].conj() * x[i];
                    }
                    x[k] = s;
                    x.swap(k, ws.piv[k]);
                }
            }
        }
    }

    fn smin_lanczos(&self, z: C, ws: &mut Workspace) -> Result<f64> {
        let n = self.n;
        if !self.factor(z, ws) {
            return Ok(0.0);
        }
        let opts = self.options;
        let steps = opts.max_steps.min(n).max(1);
        let mut start: Vec<C> = (0..n)
            .map(|i| {
                let t = i as f64 + 1.0;
                C::new((1.3 * t).cos() + 1.5, (2.1 * t).sin())
            })
            .collect();
        normalize(&mut start);
        // operator scaled by 1/s^2, s = |(zI - A)^{-H} start|, to stay in range
        let mut probe = start.clone();
        self.solve_adjoint(z, ws, &mut probe);
        let s = norm(&probe);
        if !s.is_finite() {
            return Ok(0.0);
        }
        if s == 0.0 {
            return Err(Error::invalid("degenerate start vector in s_min"));
        }
        let inv_s = 1.0 / s;
        let mut theta_prev = 0.0f64;
        let mut settled = 0;
        let mut total_steps = 0;
        for _cycle in 0..=opts.max_restarts {
            ws.basis.clear();
            ws.basis.push(start.clone());
            let mut alpha: Vec<f64> = Vec::with_capacity(steps);
            let mut beta: Vec<f64> = Vec::with_capacity(steps);
            for j in 0..steps {
                total_steps += 1;
                let mut w = std::mem::take(&mut ws.w);
                w.clear();
                w.extend_from_slice(&ws.basis[j]);
                self.solve_adjoint(z, ws, &mut w);
                scale(&mut w, inv_s);
                self.solve(z, ws, &mut w);
                scale(&mut w, inv_s);
                if !w.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
                    return Ok(0.0);
                }
                let a = dot(&ws.basis[j], &w).re;
                alpha.push(a);
                // full reorthogonalisation, twice
                for _ in 0..2 {
                    for q in &ws.basis {
                        let c = dot(q, &w);
                        axpy(&mut w, -c, q);
                    }
                }
                let b = norm(&w);
                let theta = largest_eigenvalue(&alpha, &beta);
                if j > 0 && (theta - theta_prev).abs() <= opts.tol * theta {
                    settled += 1;
                } else {
                    settled = 0;
                }
                let converged = settled >= 2;
                let exhausted = b <= 1e-14 * theta.max(f64::MIN_POSITIVE) || j + 1 == n;
                theta_prev = theta;
                if converged || exhausted {
                    ws.w = w;
                    return Ok(s_from_theta(theta, s));
                }
                if j + 1 < steps {
                    beta.push(b);
                    scale(&mut w, 1.0 / b);
                    ws.basis.push(w.clone());
                }
                ws.w = w;
            }
            // restart from the leading Ritz vector
            let y = leading_ritz_vector(&alpha, &beta, theta_prev);
            let mut next = vec![C::new(0.0, 0.0); n];
            for (q, &c) in ws.basis.iter().zip(&y) {
                axpy(&mut next, C::new(c, 0.0), q);
            }
            normalize(&mut next);
            start = next;
        }
        Err(Error::NoConvergence {
            iterations: total_steps,
        })
    }
}

fn s_from_theta(theta: f64, s: f64) -> f64 {
    // theta estimates s^2 / s_min^2
    if theta <= 0.0 {
        return f64::INFINITY;
    }
    (1.0 / theta.sqrt()) * s.recip()
}

fn dot(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).fold(C::new(0.0, 0.0), |acc, (x, y)| acc + x.conj() * y)
}

fn norm(a: &[C]) -> f64 {
    // scaled to avoid overflow in the sum of squares
    let m = a.iter().fold(0.0f64, |m, c| m.max(c.re.abs()).max(c.im.abs()));
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    m * a.iter().map(|c| (c / m).norm_sqr()).sum::<f64>().sqrt()
}

fn scale(a: &mut [C], s: f64) {
    for x in a {
        *x *= s;
    }
}

fn normalize(a: &mut [C]) {
    let n = norm(a);
    scale(a, 1.0 / n);
}

fn axpy(y: &mut [C], a: C, x: &[C]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Number of eigenvalues of the symmetric tridiagonal `(alpha, beta)` below `x`.
fn sturm_count(alpha: &[f64], beta: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut d = 1.0f64;
    for i in 0..alpha.len() {
        let b2 = if i == 0 { 0.0 } else { beta[i - 1] * beta[i - 1] };
        d = alpha[i] - x - if i == 0 { 0.0 } else { b2 / d };
        if d == 0.0 {
            d = -f64::EPSILON * (alpha[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Largest eigenvalue of a symmetric tridiagonal matrix by bisection.
pub(crate) fn largest_eigenvalue(alpha: &[f64], beta: &[f64]) -> f64 {
    let m = alpha.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..m {
        let r = if i > 0 { beta[i - 1].abs() } else { 0.0 } + if i + 1 < m { beta[i].abs() } else { 0.0 };
        lo = lo.min(alpha[i] - r);
        hi = hi.max(alpha[i] + r);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(alpha, beta, mid) == m {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Eigenvector of the tridiagonal for eigenvalue `theta`, by inverse iteration.
fn leading_ritz_vector(alpha: &[f64], beta: &[f64], theta: f64) -> Vec<f64> {
    let m = alpha.len();
    let shift = theta * (1.0 + 1e-10) + f64::MIN_POSITIVE;
    let mut y = vec![1.0; m];
    for _ in 0..3 {
        // Thomas algorithm on (T - shift I) x = y
        let mut c = vec![0.0; m];
        let mut d = vec![0.0; m];
        let mut denom = alpha[0] - shift;
        c[0] = if m > 1 { beta[0] / denom } else { 0.0 };
        d[0] = y[0] / denom;
        for i in 1..m {
            denom = alpha[i] - shift - beta[i - 1] * c[i - 1];
            if i + 1 < m {
                c[i] = beta[i] / denom;
            }
            d[i] = (y[i] - beta[i - 1] * d[i - 1]) / denom;
        }
        for i in (0..m - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        let n = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        y = d.iter().map(|x| x / n).collect();
    }
    y
}

/// `s_min(zI - A)`.
pub fn smin(a: &Matrix<f64>, z: C, method: SminMethod) -> Result<f64> {
    let engine = SminEngine::new(
        a,
        SminOptions {
            method,
            ..SminOptions::default()
        },
    )?;
    let mut ws = engine.workspace();
    engine.smin(z, &mut ws)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{build_a0, build_a1};

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn scalar_case() {
        let a = Matrix::from_rows(vec![vec![2.5]]).unwrap();
        for method in [SminMethod::SvdDirect, SminMethod::InverseIteration] {
            let s = smin(&a, c(1.0, 1.0), method).unwrap();
            assert!((s - (1.5f64 * 1.5 + 1.0).sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn nilpotent_at_zero_and_one() {
        let a1 = build_a1(30).unwrap().to_f64().to_dense();
        for method in [SminMethod::SvdDirect, SminMethod::InverseIteration] {
            assert!(smin(&a1, c(0.0, 0.0), method).unwrap() < 1e-12 * a1.norm_1());
            assert!(smin(&a1, c(1.0, 0.0), method).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn normal_matrix_distance_to_spectrum() {
        // symmetric tridiagonal with known spectrum 2 - 2cos(kπ/(n+1))
        let n = 12;
        let a = Matrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
            0 => 2.0,
            1 => -1.0,
            _ => 0.0,
        });
        let eigs: Vec<f64> = (1..=n)
            .map(|k| 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos())
            .collect();
        for &z in &[c(0.3, 0.2), c(1.7, -0.05), c(5.0, 1.0), c(-1.0, 0.0)] {
            let d = eigs.iter().map(|&l| (z - l).norm()).fold(f64::INFINITY, f64::min);
            for method in [SminMethod::SvdDirect, SminMethod::InverseIteration] {
                let s = smin(&a, z, method).unwrap();
                assert!((s - d).abs() <= 1e-10 * d, "{method:?} z={z}: {s} vs {d}");
            }
        }
    }

    #[test]
    fn methods_agree_on_a0() {
        let a0 = build_a0(20).unwrap().to_f64().to_dense();
        for &z in &[c(-3.0, 2.0), c(-21.0, 0.5), c(1.0, -4.0), c(-40.0, 10.0)] {
            let s1 = smin(&a0, z, SminMethod::SvdDirect).unwrap();
            let s2 = smin(&a0, z, SminMethod::InverseIteration).unwrap();
            assert!((s1 - s2).abs() <= 1e-8 * s1, "z={z}: {s1} vs {s2}");
        }
    }

    #[test]
    fn schur_prefactor_agrees() {
        let n = 15;
        let a = Matrix::from_fn(n, n, |i, j| ((i * 7 + j * 13) % 11) as f64 - 5.0);
        let plain = SminEngine::new(&a, SminOptions::default()).unwrap();
        let schur = SminEngine::new(
            &a,
            SminOptions {
                schur: true,
                ..SminOptions::default()
            },
        )
        .unwrap();
        let mut ws = plain.workspace();
        for &z in &[c(0.5, 0.5), c(-3.0, 7.0), c(20.0, 0.0)] {
            let s0 = plain.smin_svd(z);
            let s1 = plain.smin(z, &mut ws).unwrap();
            let s2 = schur.smin(z, &mut ws).unwrap();
            assert!((s0 - s1).abs() <= 1e-8 * s0);
            assert!((s0 - s2).abs() <= 1e-8 * s0);
        }
    }

    #[test]
    fn lower_triangular_path() {
        let a = Matrix::from_fn(6, 6, |i, j| {
            if i == j {
                -1.0 - (i % 3) as f64
            } else if i > j {
                1.0
            } else {
                0.0
            }
        });
        for &z in &[c(0.0, 1.0), c(-2.5, 0.3)] {
            let s1 = smin(&a, z, SminMethod::SvdDirect).unwrap();
            let s2 = smin(&a, z, SminMethod::InverseIteration).unwrap();
            assert!((s1 - s2).abs() <= 1e-8 * s1);
        }
    }

    #[test]
    fn tridiagonal_eigen_bisection() {
        let alpha = [2.0, 2.0, 2.0];
        let beta = [-1.0, -1.0];
        let top = largest_eigenvalue(&alpha, &beta);
        assert!((top - (2.0 + 2f64.sqrt())).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_input() {
        let a = Matrix::<f64>::zeros(2, 3);
        assert!(smin(&a, c(0.0, 0.0), SminMethod::SvdDirect).is_err());
        let a = Matrix::from_rows(vec![vec![f64::NAN]]).unwrap();
        assert!(smin(&a, c(0.0, 0.0), SminMethod::SvdDirect).is_err());
    }
}
