//! The Random Priority mechanism (random serial dictatorship).
//!
//! A uniformly random ordering of the agents is drawn; each agent in turn
//! takes its highest-value item among those still available, with ties
//! broken toward the lowest item index.

use serde::{Deserialize, Serialize};

use crate::allocation::{is_permutation, Allocation};
use crate::error::{Error, Result};
use crate::instance::{Instance, Mode};
use crate::numeric::{factorial, for_each_permutation, KahanSum};
use crate::seed::{tag, Stream};

/// Largest n for which exact ordering enumeration is offered
/// (10! orderings is seconds of work; beyond that use Monte Carlo).
pub const EXACT_MAX_N: usize = 10;

/// Exact expected allocation and welfare of Random Priority, obtained by
/// enumerating all n! agent orderings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RpExact {
    pub allocation: Allocation,
    pub expected_welfare: f64,
}

/// A seeded Monte Carlo estimate of expected RP welfare.
///
/// Bit-reproducible: identical `(instance, samples, seed)` yields an
/// identical estimate regardless of execution environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelfareEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
    pub seed: u64,
}

/// Outcome of a unilateral-deviation check for one agent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthfulnessReport {
    pub truthful_utility: f64,
    /// Largest expected-utility gain any tested misreport achieves over
    /// truth-telling (negative when every deviation hurts).
    pub max_gain: f64,
    pub witnessing_misreport: Option<Vec<f64>>,
}

/// Per-row preference lists sorted by descending value, index ascending on
/// ties. Shared by the exact and Monte Carlo paths so both resolve ties
/// identically.
pub(crate) struct SortedPrefs {
    prefs: Vec<Vec<u32>>,
}

impl SortedPrefs {
    pub fn build(inst: &Instance) -> Self {
        let prefs = inst
            .values
            .iter()
            .map(|row| {
                let mut idx: Vec<u32> = (0..row.len() as u32).collect();
                idx.sort_by(|&a, &b| {
                    row[b as usize]
                        .total_cmp(&row[a as usize])
                        .then(a.cmp(&b))
                });
                idx
            })
            .collect();
        SortedPrefs { prefs }
    }

    /// Run a single serial dictatorship pass. `taken` must be a cleared
    /// scratch buffer of length n; it is left dirty.
    fn run(&self, inst: &Instance, ordering: &[usize], taken: &mut [bool], out: &mut [usize]) -> f64 {
        let mut welfare = 0.0;
        for &agent in ordering {
            for &item in &self.prefs[agent] {
                let item = item as usize;
                if !taken[item] {
                    taken[item] = true;
                    out[agent] = item;
                    welfare += inst.values[agent][item];
                    break;
                }
            }
        }
        welfare
    }
}

/// Execute RP for one fixed agent ordering. Returns the agent-to-item
/// assignment and the realized welfare.
pub fn rp_run_once(inst: &Instance, ordering: &[usize]) -> Result<(Vec<usize>, f64)> {
    if ordering.len() != inst.n || !is_permutation(ordering) {
        return Err(Error::InvalidPermutation { n: inst.n });
    }
    let prefs = SortedPrefs::build(inst);
    let mut taken = vec![false; inst.n];
    let mut assignment = vec![0usize; inst.n];
    let welfare = prefs.run(inst, ordering, &mut taken, &mut assignment);
    Ok((assignment, welfare))
}

/// Exact RP outcome by enumerating all n! orderings (n <= 10).
///
/// `allocation[i][j]` is the fraction of orderings assigning item `j` to
/// agent `i`; `expected_welfare` is the mean realized welfare.
pub fn rp_exact(inst: &Instance) -> Result<RpExact> {
    let n = inst.n;
    if n > EXACT_MAX_N {
        return Err(Error::SizeLimit {
            op: "rp_exact",
            n,
            max: EXACT_MAX_N,
        });
    }
    let prefs = SortedPrefs::build(inst);
    let mut counts = vec![vec![0u64; n]; n];
    let mut welfare_sum = KahanSum::new();
    let mut taken = vec![false; n];
    let mut assignment = vec![0usize; n];
    for_each_permutation(n, |ordering| {
        taken.fill(false);
        let w = prefs.run(inst, ordering, &mut taken, &mut assignment);
        welfare_sum.add(w);
        for (agent, &item) in assignment.iter().enumerate() {
            counts[agent][item] += 1;
        }
    });
    let total = factorial(n);
    let probs = counts
        .iter()
        .map(|row| row.iter().map(|&c| c as f64 / total).collect())
        .collect();
    Ok(RpExact {
        allocation: Allocation::new(probs)?,
        expected_welfare: welfare_sum.value() / total,
    })
}

/// Monte Carlo estimate of expected RP welfare over `samples` uniformly
/// random orderings.
///
/// Each sample draws its ordering by Fisher-Yates from a stream derived
/// from `(seed, sample index)`, and welfare is accumulated in sample-index
/// order with compensated summation, so the result is bit-identical no
/// matter how samples are scheduled.
pub fn rp_welfare_mc(inst: &Instance, samples: u64, seed: u64) -> Result<WelfareEstimate> {
    if samples == 0 {
        return Err(Error::InvalidParameter {
            param: "samples",
            reason: "must be at least 1".into(),
        });
    }
    let prefs = SortedPrefs::build(inst);
    let n = inst.n;
    let mut welfares = Vec::with_capacity(samples as usize);
    let mut ordering: Vec<usize> = (0..n).collect();
    let mut taken = vec![false; n];
    let mut assignment = vec![0usize; n];
    for k in 0..samples {
        let mut stream = Stream::derive(seed, &[tag::SAMPLE, k]);
        for (i, slot) in ordering.iter_mut().enumerate() {
            *slot = i;
        }
        stream.shuffle(&mut ordering);
        taken.fill(false);
        welfares.push(prefs.run(inst, &ordering, &mut taken, &mut assignment));
    }
    Ok(estimate_from_samples(&welfares, seed))
}

fn estimate_from_samples(welfares: &[f64], seed: u64) -> WelfareEstimate {
    let samples = welfares.len() as u64;
    let mut sum = KahanSum::new();
    for &w in welfares {
        sum.add(w);
    }
    let mean = sum.value() / samples as f64;
    let stderr = if samples > 1 {
        let mut sq = KahanSum::new();
        for &w in welfares {
            let d = w - mean;
            sq.add(d * d);
        }
        (sq.value() / (samples as f64 - 1.0)).sqrt() / (samples as f64).sqrt()
    } else {
        0.0
    };
    WelfareEstimate {
        mean,
        stderr,
        samples,
        seed,
    }
}

/// The deterministic welfare floor `1 + (1/n) * sum of free entries` that
/// RP's expected welfare never drops below on unit-range instances
/// (equivalently `(1/n) * sum of all entries`, since the preset entries
/// contribute exactly n ones and n zeros).
pub fn rp_welfare_lower_bound(inst: &Instance) -> Result<f64> {
    if inst.mode != Mode::UnitRange || inst.preset.len() != 2 * inst.n {
        return Err(Error::UnitRangeRequired);
    }
    Ok(1.0 + inst.free_sum() / inst.n as f64)
}

/// Test whether `agent` can gain by misreporting its valuation row.
///
/// Uses exact ordering enumeration, so n <= 6. Each misreport replaces the
/// agent's reported row; the resulting utility is still scored with the
/// agent's true values. Truthfulness predicts `max_gain <= 1e-9`.
pub fn check_truthfulness(
    inst: &Instance,
    agent: usize,
    misreports: &[Vec<f64>],
) -> Result<TruthfulnessReport> {
    const MAX_N: usize = 6;
    if inst.n > MAX_N {
        return Err(Error::SizeLimit {
            op: "check_truthfulness",
            n: inst.n,
            max: MAX_N,
        });
    }
    if agent >= inst.n {
        return Err(Error::DimensionMismatch(format!(
            "agent index {agent} out of range for n = {}",
            inst.n
        )));
    }
    if let Some(bad) = misreports.iter().find(|row| row.len() != inst.n) {
        return Err(Error::DimensionMismatch(format!(
            "misreport of length {} for n = {}",
            bad.len(),
            inst.n
        )));
    }

    let true_row = inst.values[agent].clone();
    let truthful = rp_exact(inst)?;
    let truthful_utility = expected_true_utility(&true_row, &truthful.allocation, agent);

    let mut max_gain = f64::NEG_INFINITY;
    let mut witness = None;
    for report in misreports {
        let mut deviated = inst.clone();
        deviated.values[agent] = report.clone();
        let outcome = rp_exact(&deviated)?;
        let gain = expected_true_utility(&true_row, &outcome.allocation, agent) - truthful_utility;
        if gain > max_gain {
            max_gain = gain;
            witness = Some(report.clone());
        }
    }
    if misreports.is_empty() {
        max_gain = 0.0;
    }
    Ok(TruthfulnessReport {
        truthful_utility,
        max_gain,
        witnessing_misreport: witness,
    })
}

fn expected_true_utility(true_row: &[f64], alloc: &Allocation, agent: usize) -> f64 {
    true_row
        .iter()
        .zip(&alloc.probs[agent])
        .map(|(a, x)| a * x)
        .sum()
}
