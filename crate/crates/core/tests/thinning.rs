use mecat_core::generators::RateFunction;
use mecat_core::stochastic::{binomial_pmf, empirical_marginal, rre_theta, tv_distance};

#[test]
fn constant_rate_histogram_is_binomial() {
    let n = 20;
    for (c, seed) in [(0.4, 11u64), (-0.7, 12)] {
        let f = RateFunction::constant(c);
        let m = empirical_marginal(&f, n, n, 1.0, 200_000, seed).unwrap();
        let theta = rre_theta(&f, 1.0, 1.0).unwrap();
        let tv = tv_distance(&m.frequencies(), &binomial_pmf(n, theta).unwrap()).unwrap();
        assert!(tv <= 0.015, "c={c}: tv={tv}");
        assert!((m.mean() / n as f64 - theta).abs() <= 0.01);
    }
}
