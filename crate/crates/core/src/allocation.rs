//! Random allocations (doubly stochastic matrices) and welfare arithmetic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::Instance;

/// Tolerance for row/column stochasticity checks. Values are O(1) and
/// accumulation stays far below this for any feasible n.
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// A doubly stochastic assignment matrix: `probs[i][j]` is the probability
/// that agent `i` receives item `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub n: usize,
    pub probs: Vec<Vec<f64>>,
}

impl Allocation {
    /// Validates entries in [0,1] and row/column sums within
    /// [`STOCHASTIC_TOL`] of 1.
    pub fn new(probs: Vec<Vec<f64>>) -> Result<Self> {
        let n = probs.len();
        if n == 0 || probs.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch(
                "allocation matrix must be square and non-empty".into(),
            ));
        }
        for (i, row) in probs.iter().enumerate() {
            for (j, &p) in row.iter().enumerate() {
                if !(-STOCHASTIC_TOL..=1.0 + STOCHASTIC_TOL).contains(&p) {
                    return Err(Error::NotDoublyStochastic(format!(
                        "entry ({i},{j}) = {p} outside [0,1]"
                    )));
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::NotDoublyStochastic(format!("row {i} sums to {sum}")));
            }
        }
        for j in 0..n {
            let sum: f64 = probs.iter().map(|row| row[j]).sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::NotDoublyStochastic(format!(
                    "column {j} sums to {sum}"
                )));
            }
        }
        Ok(Allocation { n, probs })
    }

    /// The deterministic allocation induced by a permutation
    /// (`assignment[i]` = item of agent `i`).
    pub fn from_permutation(assignment: &[usize]) -> Result<Self> {
        let n = assignment.len();
        if !is_permutation(assignment) {
            return Err(Error::InvalidPermutation { n });
        }
        let mut probs = vec![vec![0.0; n]; n];
        for (agent, &item) in assignment.iter().enumerate() {
            probs[agent][item] = 1.0;
        }
        Ok(Allocation { n, probs })
    }

    #[inline]
    pub fn prob(&self, agent: usize, item: usize) -> f64 {
        self.probs[agent][item]
    }
}

pub(crate) fn is_permutation(assignment: &[usize]) -> bool {
    let n = assignment.len();
    let mut seen = vec![false; n];
    for &item in assignment {
        if item >= n || seen[item] {
            return false;
        }
        seen[item] = true;
    }
    true
}

/// Expected utility of one agent: sum_j a_ij * x_ij. Lies in [0,1] for a
/// valid instance/allocation pair.
pub fn utility(inst: &Instance, alloc: &Allocation, agent: usize) -> Result<f64> {
    if inst.n != alloc.n {
        return Err(Error::DimensionMismatch(format!(
            "instance n = {} vs allocation n = {}",
            inst.n, alloc.n
        )));
    }
    if agent >= inst.n {
        return Err(Error::DimensionMismatch(format!(
            "agent index {agent} out of range for n = {}",
            inst.n
        )));
    }
    Ok(inst.values[agent]
        .iter()
        .zip(&alloc.probs[agent])
        .map(|(a, x)| a * x)
        .sum())
}

/// Expected social welfare: the sum of per-agent utilities, accumulated
/// in agent order (so it equals the sum of `utility` calls exactly).
pub fn social_welfare(inst: &Instance, alloc: &Allocation) -> Result<f64> {
    let mut total = 0.0;
    for agent in 0..inst.n {
        total += utility(inst, alloc, agent)?;
    }
    Ok(total)
}
