//! Exact path simulation by thinning, the reaction-rate equation and
//! binomial marginals.
//!
//! The state is the number of `S1` molecules. With `c1 = 1 + f` and
//! `c2 = 1 - f`, a forward reaction fires at rate `c1 n1` and takes
//! `n1 -> n1 - 1`; a backward one fires at rate `c2 (N - n1)`. The total rate
//! never exceeds `2N`, so proposals at constant rate `2N` thinned by the
//! actual propensities give exact paths.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::RateFunction;
use crate::quadrature::{integrate, QuadratureSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub jump_times: Vec<f64>,
    /// `states[0]` is the initial state; `states[k + 1]` holds after `jump_times[k]`.
    pub states: Vec<usize>,
    pub seed: u64,
    pub path_index: u64,
    pub n: usize,
}

impl Trajectory {
    /// Right-continuous state at time `t`.
    pub fn state_at(&self, t: f64) -> usize {
        let k = self.jump_times.partition_point(|&s| s <= t);
        self.states[k]
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "time,state")?;
        writeln!(w, "0,{}", self.states[0])?;
        for (t, s) in self.jump_times.iter().zip(&self.states[1..]) {
            writeln!(w, "{t},{s}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmpiricalMarginal {
    pub counts: Vec<u64>,
    pub n_paths: u64,
    pub t: OrderedTime,
}

/// Observation time stored by bit pattern so the marginal can be `Eq`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OrderedTime(u64);

impl OrderedTime {
    pub fn new(t: f64) -> Self {
        Self(t.to_bits())
    }

    pub fn get(self) -> f64 {
        f64::from_bits(self.0)
    }
}

impl EmpiricalMarginal {
    pub fn frequencies(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.n_paths as f64).collect()
    }

    pub fn mean(&self) -> f64 {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, &c)| i as f64 * c as f64)
            .sum::<f64>()
            / self.n_paths as f64
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "state,count,frequency")?;
        for (i, (&c, p)) in self.counts.iter().zip(self.frequencies()).enumerate() {
            writeln!(w, "{i},{c},{p}")?;
        }
        Ok(())
    }
}

fn rng_for(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

fn check_args(n: usize, i0: usize, t_end: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("need at least one molecule"));
    }
    if i0 > n {
        return Err(Error::invalid(format!("initial state {i0} exceeds N = {n}")));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::invalid(format!("end time must be finite and >= 0, got {t_end}")));
    }
    Ok(())
}

fn rate_at(f: &RateFunction, t: f64) -> Result<f64> {
    let v = f.value(t);
    if !(v.abs() <= 1.0) {
        return Err(Error::RateOutOfBounds { t, value: v.abs() });
    }
    Ok(v)
}

/// Run one path on `[0, t_end]`, calling `on_jump(time, new_state)`.
fn simulate(
    f: &RateFunction,
    n: usize,
    i0: usize,
    t_end: f64,
    rng: &mut ChaCha8Rng,
    mut on_jump: impl FnMut(f64, usize),
) -> Result<usize> {
    let majorant = 2.0 * n as f64;
    let mut t = 0.0;
    let mut state = i0;
    loop {
        let u: f64 = rng.gen();
        t += -(1.0 - u).ln() / majorant;
        if t > t_end {
            return Ok(state);
        }
        let c = rate_at(f, t)?;
        let forward = (1.0 + c) * state as f64;
        let backward = (1.0 - c) * (n - state) as f64;
        let v: f64 = rng.gen::<f64>() * majorant;
        if v < forward {
            state -= 1;
            on_jump(t, state);
        } else if v < forward + backward {
            state += 1;
            on_jump(t, state);
        }
    }
}

/// One jump path; the random stream is keyed by `(seed, 0)`.
pub fn ssa_path(f: &RateFunction, n: usize, i0: usize, t_end: f64, seed: u64) -> Result<Trajectory> {
    ssa_path_indexed(f, n, i0, t_end, seed, 0)
}

/// Path number `path_index` of the family keyed by `seed`.
pub fn ssa_path_indexed(
    f: &RateFunction,
    n: usize,
    i0: usize,
    t_end: f64,
    seed: u64,
    path_index: u64,
) -> Result<Trajectory> {
    check_args(n, i0, t_end)?;
    let mut rng = rng_for(seed, path_index);
    let mut jump_times = Vec::new();
    let mut states = vec![i0];
    simulate(f, n, i0, t_end, &mut rng, |t, s| {
        jump_times.push(t);
        states.push(s);
    })?;
    Ok(Trajectory {
        jump_times,
        states,
        seed,
        path_index,
        n,
    })
}

/// Occupancy histogram at `t` over paths `0..n_paths`. The result does
/// not depend on how the paths are scheduled across threads.
pub fn empirical_marginal(
    f: &RateFunction,
    n: usize,
    i0: usize,
    t: f64,
    n_paths: u64,
    seed: u64,
) -> Result<EmpiricalMarginal> {
    check_args(n, i0, t)?;
    if n_paths == 0 {
        return Err(Error::invalid("need at least one path"));
    }
    let counts = (0..n_paths)
        .into_par_iter()
        .try_fold(
            || vec![0u64; n + 1],
            |mut acc, k| -> Result<Vec<u64>> {
                let mut rng = rng_for(seed, k);
                acc[simulate(f, n, i0, t, &mut rng, |_, _| {})?] += 1;
                Ok(acc)
            },
        )
        .try_reduce(
            || vec![0u64; n + 1],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                Ok(a)
            },
        )?;
    Ok(EmpiricalMarginal {
        counts,
        n_paths,
        t: OrderedTime::new(t),
    })
}

/// Histogram of stored trajectories at time `t`.
pub fn marginal_of_paths(paths: &[Trajectory], t: f64) -> Result<EmpiricalMarginal> {
    let first = paths.first().ok_or_else(|| Error::invalid("need at least one path"))?;
    let mut counts = vec![0u64; first.n + 1];
    for p in paths {
        if p.n != first.n {
            return Err(Error::DimensionMismatch {
                expected: first.n,
                found: p.n,
            });
        }
        counts[p.state_at(t)] += 1;
    }
    Ok(EmpiricalMarginal {
        counts,
        n_paths: paths.len() as u64,
        t: OrderedTime::new(t),
    })
}

/// `θ(t)` for `θ' = (1 - f) - 2θ`, `θ(0) = theta0`.
pub fn rre_theta(f: &RateFunction, theta0: f64, t: f64) -> Result<f64> {
    rre_theta_with(f, theta0, t, &QuadratureSpec::default())
}

pub fn rre_theta_with(f: &RateFunction, theta0: f64, t: f64, q: &QuadratureSpec) -> Result<f64> {
    if !(0.0..=1.0).contains(&theta0) {
        return Err(Error::invalid(format!("theta0 = {theta0} is outside [0, 1]")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("time must be finite and >= 0, got {t}")));
    }
    if let Some(c) = f.constant_value() {
        return Ok((-2.0 * t).exp() * theta0 + (1.0 - c) * (-(-2.0 * t).exp_m1()) / 2.0);
    }
    let r = integrate(|s| (-2.0 * (t - s)).exp() * (1.0 - f.value(s)), 0.0, t, q)?;
    Ok((-2.0 * t).exp() * theta0 + r.value)
}

/// `binom(N, i) θ^i (1 - θ)^(N - i)`.
pub fn binomial_pmf(n: usize, theta: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::invalid(format!("theta = {theta} is outside [0, 1]")));
    }
    let mut p = vec![0.0; n + 1];
    if theta == 0.0 {
        p[0] = 1.0;
        return Ok(p);
    }
    if theta == 1.0 {
        p[n] = 1.0;
        return Ok(p);
    }
    // ratios outward from the mode, then normalise
    let odds = theta / (1.0 - theta);
    let mode = (((n + 1) as f64 * theta).floor() as usize).min(n);
    p[mode] = 1.0;
    for i in mode..n {
        p[i + 1] = p[i] * (n - i) as f64 / (i + 1) as f64 * odds;
    }
    for i in (0..mode).rev() {
        p[i] = p[i + 1] * (i + 1) as f64 / ((n - i) as f64 * odds);
    }
    let total: f64 = p.iter().sum();
    for x in &mut p {
        *x /= total;
    }
    Ok(p)
}

/// Total-variation distance `½ Σ |p_i - q_i|`.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    for (name, v) in [("p", p), ("q", q)] {
        let s: f64 = v.iter().sum();
        if !((s - 1.0).abs() <= 1e-6) {
            return Err(Error::invalid(format!("{name} sums to {s}, not 1")));
        }
    }
    let d = 0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>();
    Ok(d.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expm::{propagate, PropagateOptions};

    #[test]
    fn absorbing_when_backward_rate_vanishes() {
        for seed in 0..20 {
            let p = ssa_path(&RateFunction::constant(1.0), 1, 1, 50.0, seed).unwrap();
            assert!(p.states.len() <= 2);
            assert_eq!(*p.states.last().unwrap(), 0);
        }
    }

    #[test]
    fn climbs_to_n_when_forward_rate_vanishes() {
        let p = ssa_path(&RateFunction::constant(-1.0), 5, 0, 100.0, 3).unwrap();
        assert_eq!(p.states, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn paths_are_valid_and_reproducible() {
        let f = RateFunction::sin();
        let a = ssa_path_indexed(&f, 10, 4, 5.0, 42, 7).unwrap();
        let b = ssa_path_indexed(&f, 10, 4, 5.0, 42, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.jump_times.windows(2).all(|w| w[0] < w[1]));
        assert!(a.states.windows(2).all(|w| w[0].abs_diff(w[1]) == 1));
        assert!(a.states.iter().all(|&s| s <= 10));
        assert_eq!(a.state_at(0.0), 4);
        let c = ssa_path_indexed(&f, 10, 4, 5.0, 42, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn unbounded_rate_is_reported_with_time() {
        let f = RateFunction::poly(vec![0.0, 1.0]);
        match ssa_path(&f, 3, 3, 10.0, 1) {
            Err(Error::RateOutOfBounds { t, .. }) => assert!(t > 1.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn marginal_basics() {
        let f = RateFunction::sin();
        let m = empirical_marginal(&f, 6, 2, 0.0, 50, 1).unwrap();
        assert_eq!(m.counts[2], 50);
        let one = empirical_marginal(&f, 6, 2, 1.0, 1, 1).unwrap();
        assert_eq!(one.counts.iter().sum::<u64>(), 1);
        let paths: Vec<Trajectory> = (0..200)
            .map(|k| ssa_path_indexed(&f, 6, 2, 1.0, 9, k).unwrap())
            .collect();
        let from_paths = marginal_of_paths(&paths, 1.0).unwrap();
        let direct = empirical_marginal(&f, 6, 2, 1.0, 200, 9).unwrap();
        assert_eq!(from_paths, direct);
    }

    #[test]
    fn stationary_single_molecule() {
        let m = empirical_marginal(&RateFunction::constant(0.0), 1, 1, 20.0, 20_000, 5).unwrap();
        let fr = m.frequencies();
        assert!((fr[0] - 0.5).abs() < 0.02);
    }

    #[test]
    fn rre_closed_forms() {
        for t in [0.0, 0.3, 2.0] {
            let a = rre_theta(&RateFunction::constant(0.0), 1.0, t).unwrap();
            assert!((a - (1.0 + (-2.0 * t).exp()) / 2.0).abs() < 1e-15);
            let b = rre_theta(&RateFunction::constant(1.0), 0.7, t).unwrap();
            assert!((b - 0.7 * (-2.0 * t).exp()).abs() < 1e-15);
            assert!((rre_theta(&RateFunction::constant(0.0), 0.5, t).unwrap() - 0.5).abs() < 1e-15);
            // quadrature path against the same closed form
            let q = rre_theta(&RateFunction::poly(vec![0.0]), 1.0, t).unwrap();
            assert!((q - a).abs() < 1e-10);
        }
    }

    #[test]
    fn binomial_examples() {
        assert_eq!(binomial_pmf(3, 1.0).unwrap(), vec![0.0, 0.0, 0.0, 1.0]);
        let p = binomial_pmf(2, 0.5).unwrap();
        for (a, b) in p.iter().zip([0.25, 0.5, 0.25]) {
            assert!((a - b).abs() < 1e-15);
        }
        let big = binomial_pmf(5000, 0.37).unwrap();
        assert!((big.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(binomial_pmf(3, 1.5).is_err());
    }

    #[test]
    fn binomial_stays_binomial() {
        let n = 30;
        let theta = rre_theta(&RateFunction::sin(), 1.0, 1.0).unwrap();
        let mut p0 = vec![0.0; n + 1];
        p0[n] = 1.0;
        let p = propagate(&RateFunction::sin(), &p0, 1.0, &PropagateOptions::default()).unwrap();
        let b = binomial_pmf(n, theta).unwrap();
        let d = p.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(d < 1e-6, "{d}");
    }

    #[test]
    fn tv_examples() {
        assert_eq!(tv_distance(&[0.2, 0.8], &[0.2, 0.8]).unwrap(), 0.0);
        assert_eq!(tv_distance(&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(tv_distance(&[0.5, 0.5], &[1.0, 0.0]).unwrap(), 0.5);
        assert!(tv_distance(&[1.0], &[0.5, 0.5]).is_err());
        assert!(tv_distance(&[0.3, 0.3], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn csv_formats() {
        let p = ssa_path(&RateFunction::constant(-1.0), 2, 0, 100.0, 3).unwrap();
        let mut out = Vec::new();
        p.write_csv(&mut out).unwrap();
        let s = String::from_utf8(out).unwrap();
        assert!(s.starts_with("time,state\n0,0\n"));
        assert_eq!(s.lines().count(), 4);
        let m = empirical_marginal(&RateFunction::sin(), 2, 2, 0.0, 4, 0).unwrap();
        let mut out = Vec::new();
        m.write_csv(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "state,count,frequency\n0,0,0\n1,0,0\n2,4,1\n"
        );
    }
}
