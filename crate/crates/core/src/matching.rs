//! Optimal social welfare as a maximum-weight perfect matching.

use serde::{Deserialize, Serialize};

use crate::allocation::is_permutation;
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::numeric::for_each_permutation;

/// An agent-to-item assignment and its total value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingResult {
    /// `assignment[i]` is the item given to agent `i`.
    pub assignment: Vec<usize>,
    pub value: f64,
}

impl MatchingResult {
    fn from_assignment(inst: &Instance, assignment: Vec<usize>) -> Self {
        let value = assignment
            .iter()
            .enumerate()
            .map(|(i, &j)| inst.values[i][j])
            .sum();
        MatchingResult { assignment, value }
    }

    pub fn is_valid_for(&self, n: usize) -> bool {
        self.assignment.len() == n && is_permutation(&self.assignment)
    }
}

/// Maximum-weight perfect matching via the Hungarian algorithm
/// (Kuhn-Munkres with potentials, O(n^3)).
///
/// Weights are maximized directly; internally each row is converted to
/// costs by subtracting from its row maximum, and the reported value is
/// re-summed from the original matrix so the transform cannot contaminate
/// it. Only the value is contract-bearing; tie-breaking among optimal
/// assignments is unspecified.
pub fn optimal_welfare(inst: &Instance) -> Result<MatchingResult> {
    let n = inst.n;
    if n == 0 {
        return Err(Error::DimensionMismatch("empty instance".into()));
    }

    let cost: Vec<Vec<f64>> = inst
        .values
        .iter()
        .map(|row| {
            let row_max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            row.iter().map(|&a| row_max - a).collect()
        })
        .collect();

    // Kuhn-Munkres on the cost matrix, 1-indexed with a dummy slot 0.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut col_row = vec![0usize; n + 1]; // row matched to each column
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        col_row[0] = i;
        let mut j0 = 0usize;
        let mut min_slack = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if reduced < min_slack[j] {
                    min_slack[j] = reduced;
                    way[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if col_row[j0] == 0 {
                break;
            }
        }
        // Unwind the augmenting path.
        loop {
            let j1 = way[j0];
            col_row[j0] = col_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[col_row[j] - 1] = j - 1;
    }
    Ok(MatchingResult::from_assignment(inst, assignment))
}

/// Exhaustive maximum over all n! assignments. Test oracle for
/// [`optimal_welfare`]; rejects n > 10.
pub fn optimal_welfare_bruteforce(inst: &Instance) -> Result<MatchingResult> {
    const MAX_N: usize = 10;
    if inst.n > MAX_N {
        return Err(Error::SizeLimit {
            op: "optimal_welfare_bruteforce",
            n: inst.n,
            max: MAX_N,
        });
    }
    let mut best_value = f64::NEG_INFINITY;
    let mut best: Vec<usize> = Vec::new();
    for_each_permutation(inst.n, |perm| {
        let value: f64 = perm
            .iter()
            .enumerate()
            .map(|(i, &j)| inst.values[i][j])
            .sum();
        if value > best_value {
            best_value = value;
            best = perm.to_vec();
        }
    });
    Ok(MatchingResult::from_assignment(inst, best))
}
