//! Birkhoff-von Neumann decomposition of doubly stochastic matrices into
//! convex combinations of permutation matrices.

use serde::{Deserialize, Serialize};

use crate::allocation::{Allocation, STOCHASTIC_TOL};
use crate::error::{Error, Result};

/// Entries at or below this are treated as zero when building the support
/// graph of the residual matrix.
pub const SUPPORT_EPS: f64 = 1e-12;

/// A convex combination of permutations reproducing an [`Allocation`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BirkhoffDecomposition {
    pub n: usize,
    /// `(weight, permutation)` pairs; weights are in (0,1] and sum to 1,
    /// `permutation[i]` is the item of agent `i`.
    pub terms: Vec<(f64, Vec<usize>)>,
}

impl BirkhoffDecomposition {
    pub fn weight_sum(&self) -> f64 {
        self.terms.iter().map(|(w, _)| w).sum()
    }

    /// Rebuild the matrix `sum_k w_k P_k`.
    pub fn recombine(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.n]; self.n];
        for (w, perm) in &self.terms {
            for (agent, &item) in perm.iter().enumerate() {
                m[agent][item] += w;
            }
        }
        m
    }

    /// Largest absolute entrywise deviation from `alloc`.
    pub fn recombination_error(&self, alloc: &Allocation) -> f64 {
        let rebuilt = self.recombine();
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in 0..self.n {
                worst = worst.max((rebuilt[i][j] - alloc.probs[i][j]).abs());
            }
        }
        worst
    }
}

/// Decompose a doubly stochastic matrix by repeatedly extracting the
/// lexicographically smallest perfect matching on the positive support and
/// subtracting the minimum matched entry, until the residual mass drops
/// below [`STOCHASTIC_TOL`]. Produces at most `(n-1)^2 + 1` terms.
pub fn birkhoff_decompose(alloc: &Allocation) -> Result<BirkhoffDecomposition> {
    let n = alloc.n;
    let mut residual = alloc.probs.clone();
    // Total remaining mass; starts at n for a doubly stochastic matrix.
    let mut mass: f64 = residual.iter().flatten().sum();
    let mut terms: Vec<(f64, Vec<usize>)> = Vec::new();
    let max_terms = (n - 1) * (n - 1) + 1;

    while mass >= STOCHASTIC_TOL {
        if terms.len() >= max_terms {
            // A doubly stochastic input cannot need more terms; bail out
            // rather than loop on a malformed matrix.
            return Err(Error::NotDoublyStochastic(format!(
                "residual mass {mass} left after {max_terms} extractions"
            )));
        }
        let matching = lex_smallest_perfect_matching(&residual, n)?;
        let weight = matching
            .iter()
            .enumerate()
            .map(|(i, &j)| residual[i][j])
            .fold(f64::INFINITY, f64::min);
        for (i, &j) in matching.iter().enumerate() {
            residual[i][j] -= weight;
        }
        mass -= weight * n as f64;
        terms.push((weight, matching));
    }

    Ok(BirkhoffDecomposition { n, terms })
}

/// Lexicographically smallest perfect matching (as an agent-to-item map)
/// on the support graph `{(i,j) : m[i][j] > SUPPORT_EPS}`.
///
/// Greedy per row: commit the smallest feasible column, where feasibility
/// means the remaining rows still admit a perfect matching on the unused
/// columns (checked with Kuhn's augmenting-path algorithm).
fn lex_smallest_perfect_matching(m: &[Vec<f64>], n: usize) -> Result<Vec<usize>> {
    let support: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| m[i][j] > SUPPORT_EPS).collect())
        .collect();

    let mut chosen = vec![usize::MAX; n];
    let mut col_used = vec![false; n];

    for i in 0..n {
        let mut committed = false;
        for &j in &support[i] {
            if col_used[j] {
                continue;
            }
            col_used[j] = true;
            if rows_matchable(&support, i + 1, n, &col_used) {
                chosen[i] = j;
                committed = true;
                break;
            }
            col_used[j] = false;
        }
        if !committed {
            return Err(Error::NoPerfectMatching);
        }
    }
    Ok(chosen)
}

/// Can rows `from..n` all be matched to distinct unused columns?
fn rows_matchable(support: &[Vec<usize>], from: usize, n: usize, col_used: &[bool]) -> bool {
    let mut col_to_row = vec![usize::MAX; n];
    for row in from..n {
        let mut visited = vec![false; n];
        if !augment(support, row, col_used, &mut col_to_row, &mut visited) {
            return false;
        }
    }
    true
}

fn augment(
    support: &[Vec<usize>],
    row: usize,
    col_used: &[bool],
    col_to_row: &mut [usize],
    visited: &mut [bool],
) -> bool {
    for &j in &support[row] {
        if col_used[j] || visited[j] {
            continue;
        }
        visited[j] = true;
        if col_to_row[j] == usize::MAX
            || augment(support, col_to_row[j], col_used, col_to_row, visited)
        {
            col_to_row[j] = row;
            return true;
        }
    }
    false
}
