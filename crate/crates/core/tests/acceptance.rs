//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use mecat_core::expm::{
    adjudicate_splittings, binomial_column, eigenvector_a0, expm_a1_action, expm_dense, fast_z_apply,
    fast_ztilde_apply, propagate, solve_master_equation, verify_nilpotent, ztilde_dense, Arithmetic, EigenvectorMethod,
    JordanFactorization, PropagateOptions, PropagationMethod, SpectralFactorization, SplittingMap,
};
use mecat_core::generators::{build_a0, build_a1, RateFunction};
use mecat_core::magnus::{sigma, sigma_reference, sigma_truncated, volterra_residual};
use mecat_core::matrix::Matrix;
use mecat_core::parallel::with_threads;
use mecat_core::pseudospectra::{grid, Preset, SminEngine, SminMethod, SminOptions};
use mecat_core::quadrature::QuadratureSpec;
use mecat_core::stochastic::{binomial_pmf, empirical_marginal, rre_theta, tv_distance};
use mecat_core::IBig;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn lib<T>(r: mecat_core::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn within(elapsed: Duration, limit_s: f64, what: &str) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s, || {
        format!("{what} took {:.1} s, limit {limit_s} s", elapsed.as_secs_f64())
    })
}

fn binom(n: usize, k: usize) -> IBig {
    if k > n {
        return IBig::ZERO;
    }
    let mut acc = IBig::ONE;
    for i in 0..k {
        acc = acc * IBig::from(n - i) / IBig::from(i + 1);
    }
    acc
}

fn int_matrix(m: &Matrix<i64>) -> Matrix<IBig> {
    Matrix::from_fn(m.rows(), m.cols(), |i, j| IBig::from(m[(i, j)]))
}

fn e_last(n: usize) -> Vec<f64> {
    let mut p = vec![0.0; n + 1];
    p[n] = 1.0;
    p
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn c1_commutator() -> Outcome {
    let start = Instant::now();
    for n in 1..=200 {
        let a0 = lib(build_a0(n))?.to_dense();
        let a1 = lib(build_a1(n))?.to_dense();
        let c = lib(a0.try_mul(&a1))?.try_sub(&lib(a1.try_mul(&a0))?);
        let expected = a1.scale(&-2);
        ensure(lib(c)? == expected, || format!("[A0,A1] != -2 A1 at N={n}"))?;
    }
    within(start.elapsed(), 1.0, "commutator sweep")?;
    Ok(format!("N=1..200 exact, {:.2} s", start.elapsed().as_secs_f64()))
}

fn c2_spectral() -> Outcome {
    let start = Instant::now();
    for n in 1..=100 {
        let f = lib(SpectralFactorization::build(n))?;
        let a0 = int_matrix(&lib(build_a0(n))?.to_dense());
        let lambda = Matrix::from_fn(n + 1, n + 1, |i, j| {
            if i == j {
                IBig::from(-2 * i as i64)
            } else {
                IBig::ZERO
            }
        });
        let lhs = lib(a0.try_mul(&f.v))?;
        let rhs = lib(f.v.try_mul(&lambda))?;
        ensure(lhs == rhs, || format!("A0 V != V diag at N={n}"))?;
        let sq = lib(f.v.try_mul(&f.v))?;
        let two_n = IBig::ONE << n;
        let ok = (0..=n).all(|i| (0..=n).all(|j| sq[(i, j)] == if i == j { two_n.clone() } else { IBig::ZERO }));
        ensure(ok, || format!("V^2 != 2^N I at N={n}"))?;
    }
    for n in 1..=30 {
        for r in 0..=n {
            let g = lib(eigenvector_a0(n, r, EigenvectorMethod::GeneratingPoly))?;
            let h = lib(eigenvector_a0(n, r, EigenvectorMethod::Hypergeometric))?;
            ensure(g == h, || format!("eigenvector paths differ at N={n}, r={r}"))?;
        }
    }
    within(start.elapsed(), 30.0, "spectral checks")?;
    Ok(format!(
        "N<=100 exact, paths agree N<=30, {:.1} s",
        start.elapsed().as_secs_f64()
    ))
}

fn c3_jordan() -> Outcome {
    for n in 1..=100 {
        let j = lib(JordanFactorization::build(n))?;
        // independent Pascal oracle for Z~
        let zt = Matrix::from_fn(
            n + 1,
            n + 1,
            |m, k| if m >= k { binom(n - k, m - k) } else { IBig::ZERO },
        );
        ensure(zt == j.ztilde, || format!("Z~ entries wrong at N={n}"))?;
        let prod = lib(j.z.try_mul(&j.ztilde))?;
        let ok = (0..=n).all(|a| (0..=n).all(|b| prod[(a, b)] == if a == b { IBig::ONE } else { IBig::ZERO }));
        ensure(ok, || format!("Z Z~ != I at N={n}"))?;
        // C^{-1} E C with C = diag(k!) is the superdiagonal 1..N
        let mut fact = vec![IBig::ONE; n + 1];
        for k in 1..=n {
            fact[k] = &fact[k - 1] * IBig::from(k);
        }
        let m = Matrix::from_fn(
            n + 1,
            n + 1,
            |a, b| if b == a + 1 { &fact[b] / &fact[a] } else { IBig::ZERO },
        );
        ensure(m == j.middle(), || format!("C^-1 E C mismatch at N={n}"))?;
        let a1 = int_matrix(&lib(build_a1(n))?.to_dense());
        ensure(lib(lib(j.z.try_mul(&m))?.try_mul(&j.ztilde))? == a1, || {
            format!("A1 != Z C^-1 E C Z~ at N={n}")
        })?;
    }
    for n in 1..=40 {
        let a1 = int_matrix(&lib(build_a1(n))?.to_dense());
        let mut p = Matrix::<IBig>::identity(n + 1);
        for _ in 0..=n {
            p = lib(a1.try_mul(&p))?;
        }
        ensure(p.is_zero_matrix(), || format!("(A1)^(N+1) != 0 at N={n}"))?;
        lib(verify_nilpotent(n))?;
    }
    Ok("factorization exact N<=100, nilpotent N<=40".into())
}

fn c4_transforms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut report = Vec::new();
    for n in [1usize, 2, 3, 7, 16, 64, 128, 333, 500, 1000] {
        let u: Vec<IBig> = (0..=n)
            .map(|_| IBig::from(rng.gen_range(-1_000_000i64..=1_000_000)))
            .collect();
        let t0 = Instant::now();
        let fast_t = lib(fast_ztilde_apply(&u))?;
        let fast_z = lib(fast_z_apply(&u))?;
        let fast_s = t0.elapsed().as_secs_f64();
        let t1 = Instant::now();
        let zt = ztilde_dense(n);
        let mut dense_t = vec![IBig::ZERO; n + 1];
        let mut dense_z = vec![IBig::ZERO; n + 1];
        for m in 0..=n {
            for k in 0..=m {
                let term = &zt[(m, k)] * &u[k];
                dense_t[m] += &term;
                if (m - k) % 2 == 0 {
                    dense_z[m] += term;
                } else {
                    dense_z[m] -= term;
                }
            }
        }
        let dense_s = t1.elapsed().as_secs_f64();
        ensure(fast_t == dense_t, || format!("fast Z~ differs from dense at N={n}"))?;
        ensure(fast_z == dense_z, || format!("fast Z differs from dense at N={n}"))?;
        report.push(serde_json::json!({
            "n": n, "equal": true, "fast_seconds": fast_s, "dense_seconds": dense_s,
            "speedup": dense_s / fast_s.max(1e-9),
        }));
    }
    let path = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("transform_bench.json");
    std::fs::write(&path, serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    Ok(format!("bit-equal N<=1000, report {}", path.display()))
}

struct RunRow {
    n: usize,
    f: &'static str,
    t: f64,
    err: f64,
    min: f64,
    sum: f64,
}

fn run_matrix() -> &'static Result<(Vec<RunRow>, Duration), String> {
    static CELL: OnceLock<Result<(Vec<RunRow>, Duration), String>> = OnceLock::new();
    CELL.get_or_init(|| {
        let start = Instant::now();
        let mut rows = Vec::new();
        for n in [2usize, 4, 8, 30] {
            let a0 = lib(build_a0(n))?;
            let a1 = lib(build_a1(n))?;
            for (name, f) in [("const 0.3", RateFunction::constant(0.3)), ("sin", RateFunction::sin())] {
                for t in [0.5, 1.0, 2.0] {
                    let p0 = e_last(n);
                    let p = lib(propagate(&f, &p0, t, &PropagateOptions::default()))?;
                    let (ode, _) = lib(solve_master_equation(&a0, &a1, &f, &p0, t, 1e-10))?;
                    let mut err = sup_diff(&p, &ode);
                    if let Some(c) = f.constant_value() {
                        let gen = lib(a0.to_f64().to_dense().try_add(&a1.to_f64().to_dense().scale(&c)))?;
                        let e = lib(expm_dense(&gen.scale(&t)))?;
                        err = err.max(sup_diff(&p, &lib(e.mul_vec(&p0))?));
                    }
                    rows.push(RunRow {
                        n,
                        f: name,
                        t,
                        err,
                        min: p.iter().copied().fold(f64::INFINITY, f64::min),
                        sum: p.iter().sum(),
                    });
                }
            }
        }
        Ok((rows, start.elapsed()))
    })
}

fn c5_master_identity() -> Outcome {
    let (rows, elapsed) = run_matrix().as_ref().map_err(Clone::clone)?;
    let worst = rows.iter().max_by(|a, b| a.err.total_cmp(&b.err)).unwrap();
    for r in rows {
        ensure(r.err <= 1e-6, || {
            format!("N={} f={} t={}: error {:.2e}", r.n, r.f, r.t, r.err)
        })?;
    }
    within(*elapsed, 60.0, "run matrix")?;
    Ok(format!(
        "{} cases, worst {:.2e} (N={} f={} t={}), {:.1} s",
        rows.len(),
        worst.err,
        worst.n,
        worst.f,
        worst.t,
        elapsed.as_secs_f64()
    ))
}

fn c6_sigma() -> Outcome {
    let f = RateFunction::sin();
    let q = QuadratureSpec::default();
    let mut worst = 0.0f64;
    for k in 0..=300 {
        let t = k as f64 * 0.01;
        let full = lib(sigma(&f, t, &q))?.sigma;
        let reference = lib(sigma_reference(&f, t, &q))?.sigma;
        worst = worst.max((full - reference).abs());
    }
    ensure(worst <= 1e-6, || {
        format!("|sigma_full - sigma_reference| = {worst:.2e}")
    })?;
    let mut worst_v = 0.0f64;
    for a in 0..10 {
        let t = 0.3 * (a + 1) as f64;
        for b in 0..10 {
            let x = t * b as f64 / 9.0;
            worst_v = worst_v.max(lib(volterra_residual(t, x, &q))?.abs());
        }
    }
    ensure(worst_v <= 1e-8, || format!("Volterra residual {worst_v:.2e}"))?;
    let tight = q.with_tolerance(1e-14);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for k in 0..=8 {
        let t = 10f64.powf(-3.0 + 2.0 * k as f64 / 8.0);
        let full = lib(sigma(&f, t, &tight))?.sigma;
        let trunc = lib(sigma_truncated(&f, t, 2, &tight))?.sigma;
        let err = (full - trunc).abs();
        ensure(err > 0.0, || format!("truncation error vanished at t={t}"))?;
        xs.push(t.ln());
        ys.push(err.ln());
    }
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    ensure(slope >= 3.0, || format!("order-2 truncation slope {slope:.3}"))?;
    Ok(format!(
        "sigma diff {worst:.1e}, Volterra {worst_v:.1e}, order-2 slope {slope:.2}"
    ))
}

fn c7_splitting() -> Outcome {
    let report = lib(adjudicate_splittings(1e-10))?;
    let passing: Vec<_> = report.splitting.iter().filter(|s| s.passes).collect();
    ensure(passing.len() == 1, || format!("{} candidates pass", passing.len()))?;
    let winner = passing[0].map;
    let mut worst = 0.0f64;
    for k in 1..=200 {
        let t = k as f64 * 0.025;
        let c = winner.coefficient(t, t);
        let expected = -0.5 * (-2.0 * t).exp_m1();
        worst = worst.max(((c - expected) / expected).abs());
    }
    ensure(worst <= 1e-14, || format!("winner at sigma=t off by {worst:.2e}"))?;
    let name = match winner {
        SplittingMap::Linear => "linear",
        SplittingMap::HalfExpRatio => "half-exp-ratio",
        SplittingMap::Ratio => "ratio",
    };
    Ok(format!(
        "single winner {name} ({:?}), residual {:.1e}",
        passing[0].order, passing[0].max_residual
    ))
}

fn c8_binomial() -> Outcome {
    let n = 30;
    let f = RateFunction::sin();
    let p = lib(propagate(&f, &e_last(n), 1.0, &PropagateOptions::default()))?;
    let theta = lib(rre_theta(&f, 1.0, 1.0))?;
    let b = lib(binomial_pmf(n, theta))?;
    let d = sup_diff(&p, &b);
    ensure(d <= 1e-6, || format!("binomial mismatch {d:.2e}"))?;
    let mut worst = 0.0f64;
    for n in 1..=30 {
        let mut e0 = vec![0.0; n + 1];
        e0[0] = 1.0;
        for q in [-0.9, -0.5, -0.2, 0.1, 0.3, 1.0, 2.5] {
            let got = lib(expm_a1_action(n, q, &e0, Arithmetic::Auto))?;
            let want = binomial_column(n, q);
            for m in 0..=n {
                // closed form evaluated independently here
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                let exact = sign * binom(n, m).to_f64().value() * q.powi(m as i32) * (1.0f64 + q).powi((n - m) as i32);
                if exact != 0.0 {
                    worst = worst.max(((got[m] - exact) / exact).abs());
                    worst = worst.max(((want[m] - exact) / exact).abs());
                }
            }
        }
    }
    ensure(worst <= 1e-12, || format!("column identity relative error {worst:.2e}"))?;
    Ok(format!("sup {d:.1e} at N=30, column relative {worst:.1e}"))
}

fn c9_stochastic() -> Outcome {
    let start = Instant::now();
    let (n, t, paths, seed) = (20usize, 1.0, 200_000u64, 20_250_101u64);
    let f = RateFunction::sin();
    let opts = PropagateOptions {
        ode_tol: 1e-10,
        ..PropagateOptions::with_method(PropagationMethod::Ode)
    };
    let exact = lib(propagate(&f, &e_last(n), t, &opts))?;
    let one = lib(lib(with_threads(Some(1), || {
        empirical_marginal(&f, n, n, t, paths, seed)
    }))?)?;
    let tv = lib(tv_distance(&one.frequencies(), &exact))?;
    let theta = lib(rre_theta(&f, 1.0, t))?;
    let mean_err = (one.mean() / n as f64 - theta).abs();
    ensure(tv <= 0.015, || format!("TV distance {tv:.4}"))?;
    ensure(mean_err <= 0.01, || format!("scaled mean error {mean_err:.4}"))?;
    for threads in [2, 3] {
        let again = lib(lib(with_threads(Some(threads), || {
            empirical_marginal(&f, n, n, t, paths, seed)
        }))?)?;
        ensure(again.counts == one.counts, || {
            format!("counts differ with {threads} threads")
        })?;
    }
    within(start.elapsed(), 120.0, "stochastic run")?;
    Ok(format!(
        "TV {tv:.4}, mean error {mean_err:.4}, identical for 1/2/3 threads, {:.1} s",
        start.elapsed().as_secs_f64()
    ))
}

fn svd_opts() -> SminOptions {
    SminOptions {
        method: SminMethod::SvdDirect,
        ..SminOptions::default()
    }
}

fn c10_pseudospectra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst_agree = 0.0f64;
    let mut compare = |a: &Matrix<f64>, zs: &[Complex64]| -> Result<(), String> {
        let inv = lib(SminEngine::new(a, SminOptions::default()))?;
        let mut ws = inv.workspace();
        for &z in zs {
            let s_inv = lib(inv.smin(z, &mut ws))?;
            let s_svd = inv.smin_svd(z);
            let d = (s_inv - s_svd).abs() / s_svd.max(1.0);
            worst_agree = worst_agree.max(d);
        }
        Ok(())
    };
    for _ in 0..10 {
        let a = Matrix::from_fn(20, 20, |_, _| rng.gen_range(-1.0..1.0));
        let zs: Vec<Complex64> = (0..10)
            .map(|_| Complex64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)))
            .collect();
        compare(&a, &zs)?;
    }
    for n in [10usize, 20, 30] {
        let a1 = lib(build_a1(n))?.to_f64().to_dense();
        let r = n as f64;
        let zs: Vec<Complex64> = (0..20)
            .map(|_| Complex64::new(rng.gen_range(-r..r), rng.gen_range(-r..r)))
            .collect();
        compare(&a1, &zs)?;
    }
    ensure(worst_agree <= 1e-8, || {
        format!("smin methods differ by {worst_agree:.2e}")
    })?;

    // s_min(zI - A) <= dist(z, spectrum), up to rounding in forming zI - A
    let mut worst_ratio = 0.0f64;
    for n in [1usize, 5, 10, 20, 30] {
        let a0 = lib(build_a0(n))?.to_f64().to_dense();
        let a1 = lib(build_a1(n))?.to_f64().to_dense();
        let spec0: Vec<f64> = (0..=n).map(|r| -2.0 * r as f64).collect();
        for (a, spec) in [(a0, spec0), (a1, vec![0.0])] {
            let engine = lib(SminEngine::new(&a, SminOptions::default()))?;
            let mut ws = engine.workspace();
            let scale = a.norm_1();
            for _ in 0..40 {
                let z = Complex64::new(rng.gen_range(-2.5 * n as f64..1.0), rng.gen_range(-2.0..2.0) * n as f64);
                let dist = spec.iter().map(|&l| (z - l).norm()).fold(f64::INFINITY, f64::min);
                let s = lib(engine.smin(z, &mut ws))?;
                let slack = 64.0 * f64::EPSILON * (scale + z.norm());
                ensure(s <= dist + slack, || format!("s_min {s} > dist {dist} at N={n}, z={z}"))?;
                worst_ratio = worst_ratio.max(s / dist);
            }
        }
    }

    let a1 = lib(build_a1(30))?.to_f64().to_dense();
    let one = Complex64::new(1.0, 0.0);
    let s_inv = lib(mecat_core::pseudospectra::smin(&a1, one, SminMethod::InverseIteration))?;
    let s_svd = lib(SminEngine::new(&a1, svd_opts()))?.smin_svd(one);
    ensure(s_inv <= 1e-10 && s_svd <= 1e-10, || {
        format!("s_min(I - A1) = {s_inv:.2e} / {s_svd:.2e} at N=30")
    })?;

    let levels = [1e-1, 1e-2, 1e-4, 1e-6, 1e-8, 1e-10, 1e-12];
    let mut timings = Vec::new();
    for preset in [Preset::Almond, Preset::Track, Preset::Seedpod] {
        let setup = lib(preset.setup())?;
        let start = Instant::now();
        let g = lib(grid(
            &setup.matrix,
            setup.re_range,
            setup.im_range,
            200,
            200,
            &setup.label,
        ))?;
        let elapsed = start.elapsed();
        within(elapsed, 300.0, &setup.label)?;
        lib(g.validate())?;
        for w in levels.windows(2) {
            let outer = g.node_set(w[0]);
            let inner = g.node_set(w[1]);
            let nested = inner.iter().zip(&outer).all(|(i, o)| !*i || *o);
            ensure(nested, || {
                format!("{}: level {} not inside {}", setup.label, w[1], w[0])
            })?;
        }
        timings.push(format!("{} {:.1} s", setup.label, elapsed.as_secs_f64()));
    }
    Ok(format!(
        "agreement {worst_agree:.1e}, max s_min/dist {worst_ratio:.3}, s_min(I-A1) {s_inv:.1e}, presets: {}",
        timings.join(", ")
    ))
}

fn c11_positivity() -> Outcome {
    let (rows, _) = run_matrix().as_ref().map_err(Clone::clone)?;
    let min = rows.iter().map(|r| r.min).fold(f64::INFINITY, f64::min);
    let sum_dev = rows.iter().map(|r| (r.sum - 1.0).abs()).fold(0.0, f64::max);
    ensure(min >= -1e-12, || format!("min entry {min:.2e}"))?;
    ensure(sum_dev <= 1e-10, || format!("sum deviates by {sum_dev:.2e}"))?;
    Ok(format!("min {min:.1e}, sum deviation {sum_dev:.1e}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("commutator identity", c1_commutator),
        ("spectral theorem", c2_spectral),
        ("Jordan theorem", c3_jordan),
        ("fast transforms", c4_transforms),
        ("Magnus master identity", c5_master_identity),
        ("sigma consistency", c6_sigma),
        ("splitting adjudication", c7_splitting),
        ("binomial stays binomial", c8_binomial),
        ("stochastic agreement", c9_stochastic),
        ("pseudospectra", c10_pseudospectra),
        ("positivity and stochasticity", c11_positivity),
    ];
    let mut failures = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", k + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {:>2} {name}: {detail}", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
