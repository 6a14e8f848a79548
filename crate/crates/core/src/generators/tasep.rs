//! Displacement-truncated TASEP started from the step configuration.
//!
//! Particle `i` (1-based, rightmost first) starts at site `-i` and hops one
//! site to the right at rate 1 when the target is empty. A configuration is
//! encoded by the displacements `d_i = x_i + i`, which form a weakly
//! decreasing sequence, i.e. a partition with at most `K` parts. Only
//! configurations with total displacement `<= D` are kept; hops leaving that
//! set are treated as outflow, so boundary columns sum to a negative value.

use std::collections::{HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const DEFAULT_STATE_CAP: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TasepState {
    /// Displacements, particle 1 first; weakly decreasing.
    pub displacement: Vec<u32>,
}

impl TasepState {
    /// Lattice positions `x_i = d_i - i`, strictly decreasing.
    pub fn positions(&self) -> Vec<i64> {
        self.displacement
            .iter()
            .enumerate()
            .map(|(i, &d)| i64::from(d) - (i as i64 + 1))
            .collect()
    }

    pub fn total(&self) -> u32 {
        self.displacement.iter().sum()
    }
}

/// Generator in coordinate form together with its state table.
#[derive(Debug, Clone)]
pub struct SparseGenerator {
    pub dim: usize,
    /// `(row, col, rate)`: flow from `col` into `row`.
    pub entries: Vec<(usize, usize, f64)>,
    pub states: Vec<TasepState>,
    pub index: HashMap<TasepState, usize>,
}

impl SparseGenerator {
    pub fn to_dense(&self) -> Matrix<f64> {
        let mut m = Matrix::zeros(self.dim, self.dim);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.dim];
        for &(_, j, v) in &self.entries {
            s[j] += v;
        }
        s
    }

    pub fn state_index(&self, s: &TasepState) -> Option<usize> {
        self.index.get(s).copied()
    }
}

/// Enumerate states reachable from the step configuration and assemble the
/// truncated generator. State 0 is the step configuration; states appear in
/// breadth-first order, so the generator is lower triangular.
pub fn build_tasep_generator(k: usize, d: usize, cap: usize) -> Result<SparseGenerator> {
    if k == 0 {
        return Err(Error::invalid("TASEP needs at least one particle"));
    }
    let d = u32::try_from(d).map_err(|_| Error::invalid("displacement bound too large"))?;
    let start = TasepState {
        displacement: vec![0; k],
    };
    let mut states = vec![start.clone()];
    let mut index = HashMap::from([(start, 0usize)]);
    let mut queue = VecDeque::from([0usize]);
    let mut entries = Vec::new();

    while let Some(cur) = queue.pop_front() {
        let state = states[cur].clone();
        let total = state.total();
        let mut hops = 0.0;
        for i in 0..k {
            let free = i == 0 || state.displacement[i] < state.displacement[i - 1];
            if !free {
                continue;
            }
            hops += 1.0;
            if total + 1 > d {
                continue;
            }
            let mut next = state.clone();
            next.displacement[i] += 1;
            let idx = match index.get(&next) {
                Some(&idx) => idx,
                None => {
                    if states.len() >= cap {
                        return Err(Error::StateCap { cap });
                    }
                    let idx = states.len();
                    index.insert(next.clone(), idx);
                    states.push(next);
                    queue.push_back(idx);
                    idx
                }
            };
            entries.push((idx, cur, 1.0));
        }
        entries.push((cur, cur, -hops));
    }
    entries.sort_by_key(|&(i, j, _)| (i, j));
    Ok(SparseGenerator {
        dim: states.len(),
        entries,
        states,
        index,
    })
}

/// Number of partitions of integers `0..=d` into at most `k` parts.
pub fn count_bounded_partitions(k: usize, d: usize) -> u64 {
    // p[j][n]: partitions of n into parts of size <= j (conjugate: at most j parts)
    let mut p = vec![0u64; d + 1];
    p[0] = 1;
    for part in 1..=k {
        for n in part..=d {
            p[n] += p[n - part];
        }
    }
    p.iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_particle_is_birth_chain() {
        let g = build_tasep_generator(1, 2, 100).unwrap();
        assert_eq!(g.dim, 3);
        let m = g.to_dense();
        assert_eq!(
            m.to_rows(),
            vec![vec![-1.0, 0.0, 0.0], vec![1.0, -1.0, 0.0], vec![0.0, 1.0, -1.0]]
        );
        assert_eq!(g.column_sums(), vec![0.0, 0.0, -1.0]);
    }

    #[test]
    fn two_particles_two_steps() {
        let g = build_tasep_generator(2, 2, 100).unwrap();
        let mut profiles: Vec<Vec<u32>> = g.states.iter().map(|s| s.displacement.clone()).collect();
        profiles.sort();
        assert_eq!(profiles, vec![vec![0, 0], vec![1, 0], vec![1, 1], vec![2, 0]]);
        assert_eq!(g.states[0].positions(), vec![-1, -2]);
    }

    #[test]
    fn state_counts_match_partitions() {
        for k in 1..6 {
            for d in 0..12 {
                let g = build_tasep_generator(k, d, DEFAULT_STATE_CAP).unwrap();
                assert_eq!(g.dim as u64, count_bounded_partitions(k, d), "k={k} d={d}");
            }
        }
    }

    #[test]
    fn unit_rates_and_nonpositive_column_sums() {
        let g = build_tasep_generator(4, 9, DEFAULT_STATE_CAP).unwrap();
        for &(i, j, v) in &g.entries {
            if i != j {
                assert_eq!(v, 1.0);
                assert!(i > j, "generator should be lower triangular");
            }
        }
        for s in g.column_sums() {
            assert!(s <= 0.0 && s.fract() == 0.0);
        }
        for s in &g.states {
            let x = s.positions();
            assert!(x.windows(2).all(|w| w[0] > w[1]));
        }
    }

    #[test]
    fn cap_is_reported() {
        assert_eq!(
            build_tasep_generator(3, 20, 10).unwrap_err(),
            Error::StateCap { cap: 10 }
        );
    }

    #[test]
    fn partition_counts() {
        // 0,1,2 into at most 2 parts: 1 + 1 + 2
        assert_eq!(count_bounded_partitions(2, 2), 4);
        assert_eq!(count_bounded_partitions(1, 5), 6);
        // p(5) = 7, with k >= 5 all partitions of 0..=5: 1+1+2+3+5+7
        assert_eq!(count_bounded_partitions(5, 5), 19);
    }
}
