//! Random instance generation under bounded-support value models:
//! i.i.d. entries from one distribution, or independent entries with a
//! per-cell distribution grid.

use std::collections::BTreeMap;

use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Instance, Mode};
use crate::numeric::{adaptive_simpson, normal_cdf, normal_pdf};
use crate::seed::{tag, Stream};

/// Quadrature tolerance for moments without a closed form.
const MOMENT_QUAD_TOL: f64 = 1e-10;

/// Smallest truncated-normal spread whose moment formulas stay stable.
const MIN_SPREAD: f64 = 1e-3;

/// A value distribution with support inside [0, 1] and closed-form mean
/// and variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DistributionSpec {
    Uniform { lo: f64, hi: f64 },
    Beta { alpha: f64, beta: f64 },
    Discrete { points: Vec<f64>, probs: Vec<f64> },
    #[serde(rename = "truncnormal")]
    TruncatedNormal { center: f64, spread: f64 },
}

impl DistributionSpec {
    pub fn uniform01() -> Self {
        DistributionSpec::Uniform { lo: 0.0, hi: 1.0 }
    }

    /// Check the model constraints: support in [0,1], probabilities
    /// summing to 1 within 1e-12, parameters in stable ranges.
    pub fn validate(&self) -> Result<()> {
        match self {
            DistributionSpec::Uniform { lo, hi } => {
                if !(0.0..=1.0).contains(lo) || !(0.0..=1.0).contains(hi) || lo >= hi {
                    return Err(Error::InvalidSpec {
                        field: "lo/hi",
                        reason: format!("need 0 <= lo < hi <= 1, got [{lo}, {hi}]"),
                    });
                }
            }
            DistributionSpec::Beta { alpha, beta } => {
                if !(alpha.is_finite() && beta.is_finite() && *alpha > 0.0 && *beta > 0.0) {
                    return Err(Error::InvalidSpec {
                        field: "alpha/beta",
                        reason: format!("need positive finite shapes, got ({alpha}, {beta})"),
                    });
                }
            }
            DistributionSpec::Discrete { points, probs } => {
                if points.is_empty() || points.len() != probs.len() {
                    return Err(Error::InvalidSpec {
                        field: "points",
                        reason: "points and probs must be non-empty and equal length".into(),
                    });
                }
                if let Some(p) = points.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                    return Err(Error::InvalidSpec {
                        field: "points",
                        reason: format!("point {p} outside [0,1]"),
                    });
                }
                if probs.iter().any(|&q| !(0.0..=1.0).contains(&q)) {
                    return Err(Error::InvalidSpec {
                        field: "probs",
                        reason: "negative or >1 probability".into(),
                    });
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidSpec {
                        field: "probs",
                        reason: format!("probabilities sum to {total}, expected 1"),
                    });
                }
            }
            DistributionSpec::TruncatedNormal { center, spread } => {
                if !(0.0..=1.0).contains(center) {
                    return Err(Error::InvalidSpec {
                        field: "center",
                        reason: format!("center {center} outside [0,1]"),
                    });
                }
                if !spread.is_finite() || *spread < MIN_SPREAD {
                    return Err(Error::InvalidSpec {
                        field: "spread",
                        reason: format!("spread {spread} below stable minimum {MIN_SPREAD}"),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match self {
            DistributionSpec::Uniform { lo, hi } => 0.5 * (lo + hi),
            DistributionSpec::Beta { alpha, beta } => alpha / (alpha + beta),
            DistributionSpec::Discrete { points, probs } => {
                points.iter().zip(probs).map(|(x, p)| x * p).sum()
            }
            DistributionSpec::TruncatedNormal { center, spread } => {
                let (z, phi_a, phi_b, _, _) = truncnorm_pieces(*center, *spread);
                center + spread * (phi_a - phi_b) / z
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            DistributionSpec::Uniform { lo, hi } => {
                let w = hi - lo;
                w * w / 12.0
            }
            DistributionSpec::Beta { alpha, beta } => {
                let s = alpha + beta;
                alpha * beta / (s * s * (s + 1.0))
            }
            DistributionSpec::Discrete { points, probs } => {
                let mu = self.mean();
                points
                    .iter()
                    .zip(probs)
                    .map(|(x, p)| (x - mu) * (x - mu) * p)
                    .sum()
            }
            DistributionSpec::TruncatedNormal { center, spread } => {
                let (z, phi_a, phi_b, a, b) = truncnorm_pieces(*center, *spread);
                let ratio = (phi_a - phi_b) / z;
                spread * spread * (1.0 + (a * phi_a - b * phi_b) / z - ratio * ratio)
            }
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Third absolute central moment E|X - mu|^3: closed form for Uniform
    /// and Discrete, adaptive quadrature split at the kink for the rest.
    pub fn abs_third_central_moment(&self) -> f64 {
        let mu = self.mean();
        match self {
            DistributionSpec::Uniform { lo, hi } => {
                let w = hi - lo;
                w * w * w / 32.0
            }
            DistributionSpec::Discrete { points, probs } => points
                .iter()
                .zip(probs)
                .map(|(x, p)| (x - mu).abs().powi(3) * p)
                .sum(),
            DistributionSpec::Beta { alpha, beta } => {
                let ln_norm = libm::lgamma(alpha + beta) - libm::lgamma(*alpha) - libm::lgamma(*beta);
                let pdf = move |x: f64| {
                    if x <= 0.0 || x >= 1.0 {
                        0.0
                    } else {
                        (ln_norm + (alpha - 1.0) * x.ln() + (beta - 1.0) * (1.0 - x).ln()).exp()
                    }
                };
                let f = |x: f64| (x - mu).abs().powi(3) * pdf(x);
                adaptive_simpson(&f, 0.0, mu, MOMENT_QUAD_TOL)
                    + adaptive_simpson(&f, mu, 1.0, MOMENT_QUAD_TOL)
            }
            DistributionSpec::TruncatedNormal { center, spread } => {
                let (z, ..) = truncnorm_pieces(*center, *spread);
                let pdf = move |x: f64| normal_pdf((x - center) / spread) / (spread * z);
                let f = |x: f64| (x - mu).abs().powi(3) * pdf(x);
                adaptive_simpson(&f, 0.0, mu, MOMENT_QUAD_TOL)
                    + adaptive_simpson(&f, mu, 1.0, MOMENT_QUAD_TOL)
            }
        }
    }

    /// Draw one value. Uniform and Discrete invert the CDF directly; Beta
    /// and TruncatedNormal use rejection.
    pub(crate) fn sample(&self, stream: &mut Stream) -> f64 {
        match self {
            DistributionSpec::Uniform { lo, hi } => lo + (hi - lo) * stream.next_f64(),
            DistributionSpec::Discrete { points, probs } => {
                let u = stream.next_f64();
                let mut cum = 0.0;
                for (x, p) in points.iter().zip(probs) {
                    cum += p;
                    if u < cum {
                        return *x;
                    }
                }
                *points.last().expect("validated non-empty")
            }
            DistributionSpec::Beta { alpha, beta } => {
                let dist = Beta::new(*alpha, *beta).expect("validated shapes");
                loop {
                    let x: f64 = dist.sample(stream);
                    if (0.0..=1.0).contains(&x) {
                        return x;
                    }
                }
            }
            DistributionSpec::TruncatedNormal { center, spread } => {
                let dist = Normal::new(*center, *spread).expect("validated parameters");
                loop {
                    let x: f64 = dist.sample(stream);
                    if (0.0..=1.0).contains(&x) {
                        return x;
                    }
                }
            }
        }
    }
}

fn truncnorm_pieces(center: f64, spread: f64) -> (f64, f64, f64, f64, f64) {
    let a = (0.0 - center) / spread;
    let b = (1.0 - center) / spread;
    let z = normal_cdf(b) - normal_cdf(a);
    (z, normal_pdf(a), normal_pdf(b), a, b)
}

/// How the 2n preset positions (one value-1 and one value-0 per row) are
/// placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PresetPolicy {
    /// Column 0 holds the 1 and column n-1 holds the 0 in every row.
    /// Deterministic layout; the default for reproducible experiments.
    #[default]
    FixedColumns,
    /// Positions drawn per row from a dedicated stream, leaving the free
    /// entry streams untouched.
    RandomPerRow,
}

/// The fixed-columns preset layout used as the canonical set S.
pub fn fixed_columns_preset(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| [(i, 0), (i, n - 1)]).collect()
}

/// Generate a unit-range instance with i.i.d. free entries.
///
/// Deterministic in `seed`: preset positions come from per-row streams
/// keyed `(seed, "preset", i)` and each free entry from a cell stream
/// keyed `(seed, "cell", i, j)`, so cells can be filled in any order.
pub fn gen_iid(
    n: usize,
    dist: &DistributionSpec,
    policy: PresetPolicy,
    seed: u64,
) -> Result<Instance> {
    dist.validate()?;
    generate(n, |_, _| dist, policy, seed)
}

/// Generate a unit-range instance whose free entry (i, j) is drawn from
/// `grid`'s cell (i, j). With every cell equal this reproduces [`gen_iid`]
/// bit for bit.
pub fn gen_non_iid(
    n: usize,
    grid: &NonIidGrid,
    policy: PresetPolicy,
    seed: u64,
) -> Result<Instance> {
    if grid.n != n {
        return Err(Error::DimensionMismatch(format!(
            "grid is {}x{} but n = {n}",
            grid.n, grid.n
        )));
    }
    grid.validate()?;
    generate(n, |i, j| grid.spec_at(i, j), policy, seed)
}

fn generate<'a, F>(n: usize, spec_at: F, policy: PresetPolicy, seed: u64) -> Result<Instance>
where
    F: Fn(usize, usize) -> &'a DistributionSpec,
{
    if n < 2 {
        return Err(Error::SizeTooSmall {
            op: "instance generation",
            n,
            min: 2,
        });
    }
    let mut values = vec![vec![0.0f64; n]; n];
    let mut preset = Vec::with_capacity(2 * n);
    for i in 0..n {
        let (one_pos, zero_pos) = match policy {
            PresetPolicy::FixedColumns => (0, n - 1),
            PresetPolicy::RandomPerRow => {
                let mut s = Stream::derive(seed, &[tag::PRESET, i as u64]);
                let one = s.next_index(n);
                let mut zero = s.next_index(n - 1);
                if zero >= one {
                    zero += 1;
                }
                (one, zero)
            }
        };
        values[i][one_pos] = 1.0;
        values[i][zero_pos] = 0.0;
        preset.push((i, one_pos));
        preset.push((i, zero_pos));
    }
    let preset_set: std::collections::BTreeSet<(usize, usize)> = preset.iter().copied().collect();
    for i in 0..n {
        for j in 0..n {
            if preset_set.contains(&(i, j)) {
                continue;
            }
            let mut s = Stream::derive(seed, &[tag::CELL, i as u64, j as u64]);
            values[i][j] = spec_at(i, j).sample(&mut s);
        }
    }
    Instance::new(values, preset, Mode::UnitRange)
}

/// Per-cell distribution grid for the independent non-identical model:
/// a default spec plus sparse overrides. Cells at preset positions are
/// never sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct NonIidGrid {
    pub n: usize,
    default: DistributionSpec,
    overrides: BTreeMap<(usize, usize), DistributionSpec>,
}

/// JSON form of a grid: `{"default": spec, "overrides": [{"i":..,"j":..,"spec":..}]}`.
/// Materialize with [`GridSpec::materialize`] once n is known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub default: DistributionSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<GridOverride>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOverride {
    pub i: usize,
    pub j: usize,
    pub spec: DistributionSpec,
}

impl GridSpec {
    pub fn uniform(default: DistributionSpec) -> Self {
        GridSpec {
            default,
            overrides: Vec::new(),
        }
    }

    pub fn materialize(&self, n: usize) -> Result<NonIidGrid> {
        let mut overrides = BTreeMap::new();
        for o in &self.overrides {
            if o.i >= n || o.j >= n {
                return Err(Error::InvalidSpec {
                    field: "overrides",
                    reason: format!("override at ({}, {}) out of range for n = {n}", o.i, o.j),
                });
            }
            overrides.insert((o.i, o.j), o.spec.clone());
        }
        let grid = NonIidGrid {
            n,
            default: self.default.clone(),
            overrides,
        };
        grid.validate()?;
        Ok(grid)
    }
}

impl NonIidGrid {
    /// Grid with one spec everywhere.
    pub fn homogeneous(n: usize, spec: DistributionSpec) -> Result<Self> {
        GridSpec::uniform(spec).materialize(n)
    }

    /// Grid built from an explicit per-cell closure.
    pub fn from_fn(n: usize, mut cell: impl FnMut(usize, usize) -> DistributionSpec) -> Result<Self> {
        let default = cell(0, 0);
        let mut overrides = BTreeMap::new();
        for i in 0..n {
            for j in 0..n {
                let spec = cell(i, j);
                if spec != default {
                    overrides.insert((i, j), spec);
                }
            }
        }
        let grid = NonIidGrid {
            n,
            default,
            overrides,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn spec_at(&self, i: usize, j: usize) -> &DistributionSpec {
        self.overrides.get(&(i, j)).unwrap_or(&self.default)
    }

    pub fn validate(&self) -> Result<()> {
        self.default.validate()?;
        for spec in self.overrides.values() {
            spec.validate()?;
        }
        Ok(())
    }

    fn free_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        (0..n)
            .flat_map(move |i| (0..n).map(move |j| (i, j)))
            .filter(move |&(_, j)| j != 0 && j != n - 1)
    }

    /// Sum of cell means over the canonical free positions (the
    /// fixed-columns preset layout is excluded).
    pub fn sum_mu(&self) -> f64 {
        self.free_cells()
            .map(|(i, j)| self.spec_at(i, j).mean())
            .sum()
    }

    /// Sum of cell variances over the canonical free positions.
    pub fn sum_var(&self) -> f64 {
        self.free_cells()
            .map(|(i, j)| self.spec_at(i, j).variance())
            .sum()
    }
}

/// Finite-n proxies for the model conditions "mean mass grows like n^2"
/// and "variance mass grows faster than n".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// sum of free-cell means over n^2 - 2n; should stay bounded away
    /// from zero across the tested n range.
    pub mu_density: f64,
    /// sum of free-cell variances over n; should grow with n.
    pub var_density: f64,
}

/// Densities behind the two model conditions at one n.
pub fn condition_report(grid: &NonIidGrid) -> Result<ConditionReport> {
    let n = grid.n;
    if n <= 2 {
        return Err(Error::SizeTooSmall {
            op: "condition_report",
            n,
            min: 3,
        });
    }
    let free = (n * n - 2 * n) as f64;
    Ok(ConditionReport {
        mu_density: grid.sum_mu() / free,
        var_density: grid.sum_var() / n as f64,
    })
}

/// Verdicts from comparing condition densities across an n range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionAssessment {
    pub condition_i_plausible: bool,
    pub condition_ii_plausible: bool,
}

/// Minimum admissible mean density for condition (i).
pub const MU_DENSITY_FLOOR: f64 = 0.05;
/// Condition (i) also requires the density not to collapse across the
/// range: min >= this fraction of max.
pub const MU_DENSITY_STABILITY: f64 = 0.5;
/// Condition (ii) requires variance density to grow by at least this
/// factor from the smallest to the largest n (the range should span at
/// least a factor of two in n).
pub const VAR_DENSITY_GROWTH: f64 = 1.5;

/// Assess the two conditions from reports at increasing n.
pub fn assess_conditions(reports: &[(usize, ConditionReport)]) -> ConditionAssessment {
    assert!(
        reports.len() >= 2,
        "need reports at two or more n values to assess trends"
    );
    let mut sorted = reports.to_vec();
    sorted.sort_by_key(|(n, _)| *n);
    let mus: Vec<f64> = sorted.iter().map(|(_, r)| r.mu_density).collect();
    let mu_min = mus.iter().cloned().fold(f64::INFINITY, f64::min);
    let mu_max = mus.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let first_var = sorted.first().map(|(_, r)| r.var_density).unwrap_or(0.0);
    let last_var = sorted.last().map(|(_, r)| r.var_density).unwrap_or(0.0);
    ConditionAssessment {
        condition_i_plausible: mu_min >= MU_DENSITY_FLOOR && mu_min >= MU_DENSITY_STABILITY * mu_max,
        condition_ii_plausible: first_var > 0.0 && last_var >= VAR_DENSITY_GROWTH * first_var,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::validate_instance;

    #[test]
    fn uniform_moments() {
        let d = DistributionSpec::uniform01();
        assert_eq!(d.mean(), 0.5);
        assert!((d.variance() - 1.0 / 12.0).abs() < 1e-15);
        assert!((d.abs_third_central_moment() - 1.0 / 32.0).abs() < 1e-15);
    }

    #[test]
    fn beta_moments_against_quadrature() {
        let d = DistributionSpec::Beta {
            alpha: 2.0,
            beta: 2.0,
        };
        assert_eq!(d.mean(), 0.5);
        assert!((d.variance() - 0.05).abs() < 1e-15);
        // E|X - 1/2|^3 for Beta(2,2) is exactly 1/64.
        assert!((d.abs_third_central_moment() - 1.0 / 64.0).abs() < 1e-9);

        let skew = DistributionSpec::Beta {
            alpha: 2.0,
            beta: 5.0,
        };
        assert!((skew.mean() - 2.0 / 7.0).abs() < 1e-15);
        assert!((skew.variance() - 0.025510204081632654).abs() < 1e-15);
        // Frozen from quadrature of |x - 2/7|^3 against the Beta(2,5) pdf.
        assert!((skew.abs_third_central_moment() - 0.006328598722644192).abs() < 1e-9);
    }

    #[test]
    fn truncnormal_moments() {
        let d = DistributionSpec::TruncatedNormal {
            center: 0.5,
            spread: 0.2,
        };
        // Symmetric truncation keeps the mean at the center.
        assert!((d.mean() - 0.5).abs() < 1e-14);
        assert!((d.variance() - 0.03645025443741568).abs() < 1e-12);
        assert!((d.abs_third_central_moment() - 0.01058386178679534).abs() < 1e-9);
    }

    #[test]
    fn discrete_moments() {
        let d = DistributionSpec::Discrete {
            points: vec![0.0, 1.0],
            probs: vec![0.5, 0.5],
        };
        assert_eq!(d.mean(), 0.5);
        assert_eq!(d.variance(), 0.25);
        assert_eq!(d.abs_third_central_moment(), 0.125);
    }

    #[test]
    fn spec_validation_failures() {
        assert!(DistributionSpec::Uniform { lo: 0.5, hi: 0.2 }.validate().is_err());
        assert!(DistributionSpec::Uniform { lo: 0.0, hi: 1.5 }.validate().is_err());
        let bad_probs = DistributionSpec::Discrete {
            points: vec![0.1, 0.9],
            probs: vec![0.6, 0.6],
        };
        let err = bad_probs.validate().unwrap_err();
        assert!(err.to_string().contains("probs"));
        assert!(DistributionSpec::TruncatedNormal {
            center: 0.5,
            spread: 1e-4
        }
        .validate()
        .is_err());
    }

    #[test]
    fn spec_json_schema() {
        let d = DistributionSpec::uniform01();
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(json, r#"{"kind":"uniform","lo":0.0,"hi":1.0}"#);
        let tn: DistributionSpec =
            serde_json::from_str(r#"{"kind":"truncnormal","center":0.5,"spread":0.2}"#).unwrap();
        assert!(matches!(tn, DistributionSpec::TruncatedNormal { .. }));
        let beta: DistributionSpec =
            serde_json::from_str(r#"{"kind":"beta","alpha":2,"beta":5}"#).unwrap();
        assert!(matches!(beta, DistributionSpec::Beta { .. }));
    }

    #[test]
    fn n2_has_no_free_entries() {
        let inst = gen_iid(2, &DistributionSpec::uniform01(), PresetPolicy::FixedColumns, 1)
            .unwrap();
        assert_eq!(inst.free_entries().count(), 0);
        assert!(validate_instance(&inst).is_empty());
        assert_eq!(inst.values, vec![vec![1.0, 0.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn free_entry_mean_matches_the_law_of_large_numbers() {
        let n = 100;
        let inst = gen_iid(n, &DistributionSpec::uniform01(), PresetPolicy::FixedColumns, 42)
            .unwrap();
        let count = (n * n - 2 * n) as f64;
        let mean = inst.free_sum() / count;
        let band = 4.0 * (1.0f64 / 12.0 / count).sqrt();
        assert!((mean - 0.5).abs() < band, "mean {mean} outside 4-sigma band");
    }

    #[test]
    fn discrete_support_containment() {
        let d = DistributionSpec::Discrete {
            points: vec![0.3, 0.7],
            probs: vec![0.5, 0.5],
        };
        let inst = gen_iid(10, &d, PresetPolicy::FixedColumns, 5).unwrap();
        for (i, j) in inst.free_entries() {
            let v = inst.values[i][j];
            assert!(v == 0.3 || v == 0.7, "unexpected value {v}");
        }
    }

    #[test]
    fn generation_is_deterministic_and_seed_sensitive() {
        let d = DistributionSpec::uniform01();
        let a = gen_iid(20, &d, PresetPolicy::RandomPerRow, 9).unwrap();
        let b = gen_iid(20, &d, PresetPolicy::RandomPerRow, 9).unwrap();
        assert_eq!(a, b);
        let c = gen_iid(20, &d, PresetPolicy::RandomPerRow, 10).unwrap();
        assert_ne!(a, c);
        assert!(validate_instance(&a).is_empty());
    }

    #[test]
    fn fixed_columns_preset_layout() {
        let inst = gen_iid(6, &DistributionSpec::uniform01(), PresetPolicy::FixedColumns, 3)
            .unwrap();
        let expected: std::collections::BTreeSet<_> =
            fixed_columns_preset(6).into_iter().collect();
        assert_eq!(inst.preset, expected);
        for i in 0..6 {
            assert_eq!(inst.values[i][0], 1.0);
            assert_eq!(inst.values[i][5], 0.0);
        }
    }

    #[test]
    fn homogeneous_grid_reproduces_iid_bit_for_bit() {
        let d = DistributionSpec::Beta {
            alpha: 2.0,
            beta: 2.0,
        };
        let grid = NonIidGrid::homogeneous(12, d.clone()).unwrap();
        let from_grid = gen_non_iid(12, &grid, PresetPolicy::FixedColumns, 77).unwrap();
        let from_iid = gen_iid(12, &d, PresetPolicy::FixedColumns, 77).unwrap();
        assert_eq!(from_grid, from_iid);
    }

    #[test]
    fn checkerboard_grid_mean() {
        let lo = DistributionSpec::Uniform { lo: 0.0, hi: 0.2 };
        let hi = DistributionSpec::Uniform { lo: 0.8, hi: 1.0 };
        let n = 100;
        let grid = NonIidGrid::from_fn(n, |i, j| {
            if (i + j) % 2 == 0 {
                lo.clone()
            } else {
                hi.clone()
            }
        })
        .unwrap();
        let inst = gen_non_iid(n, &grid, PresetPolicy::FixedColumns, 31).unwrap();
        let expected: f64 = inst
            .free_entries()
            .map(|(i, j)| grid.spec_at(i, j).mean())
            .sum::<f64>()
            / (n * n - 2 * n) as f64;
        let got = inst.free_sum() / (n * n - 2 * n) as f64;
        let sigma = (grid.sum_var()).sqrt() / (n * n - 2 * n) as f64;
        assert!((got - expected).abs() < 4.0 * sigma);
        assert!((expected - 0.5).abs() < 0.01);
    }

    #[test]
    fn grid_dimension_mismatch() {
        let grid = NonIidGrid::homogeneous(5, DistributionSpec::uniform01()).unwrap();
        assert!(gen_non_iid(6, &grid, PresetPolicy::FixedColumns, 1).is_err());
    }

    #[test]
    fn condition_report_uniform_closed_form() {
        for n in [3usize, 10, 50] {
            let grid = NonIidGrid::homogeneous(n, DistributionSpec::uniform01()).unwrap();
            let r = condition_report(&grid).unwrap();
            assert!((r.mu_density - 0.5).abs() < 1e-12);
            assert!((r.var_density - (n as f64 - 2.0) / 12.0).abs() < 1e-12);
        }
    }

    #[test]
    fn condition_report_rejects_n2() {
        let grid = NonIidGrid::homogeneous(2, DistributionSpec::uniform01()).unwrap();
        assert!(condition_report(&grid).is_err());
    }

    #[test]
    fn point_mass_flags_condition_ii() {
        let point = DistributionSpec::Discrete {
            points: vec![0.9],
            probs: vec![1.0],
        };
        let reports: Vec<(usize, ConditionReport)> = [50usize, 100, 200]
            .iter()
            .map(|&n| {
                let grid = NonIidGrid::homogeneous(n, point.clone()).unwrap();
                (n, condition_report(&grid).unwrap())
            })
            .collect();
        for (_, r) in &reports {
            assert_eq!(r.var_density, 0.0);
        }
        let verdict = assess_conditions(&reports);
        assert!(verdict.condition_i_plausible);
        assert!(!verdict.condition_ii_plausible);
    }

    #[test]
    fn row_decaying_means_flag_condition_i() {
        let reports: Vec<(usize, ConditionReport)> = [50usize, 100, 200]
            .iter()
            .map(|&n| {
                let grid = NonIidGrid::from_fn(n, |i, _| DistributionSpec::Uniform {
                    lo: 0.0,
                    hi: 1.0 / (i + 1) as f64,
                })
                .unwrap();
                (n, condition_report(&grid).unwrap())
            })
            .collect();
        // Harmonic mean mass: density decays like ln(n)/(2n).
        assert!(reports[0].1.mu_density > reports[2].1.mu_density);
        let verdict = assess_conditions(&reports);
        assert!(!verdict.condition_i_plausible);
    }

    #[test]
    fn healthy_grids_pass_both_conditions() {
        let reports: Vec<(usize, ConditionReport)> = [50usize, 100, 200]
            .iter()
            .map(|&n| {
                let grid = NonIidGrid::homogeneous(n, DistributionSpec::uniform01()).unwrap();
                (n, condition_report(&grid).unwrap())
            })
            .collect();
        let verdict = assess_conditions(&reports);
        assert!(verdict.condition_i_plausible);
        assert!(verdict.condition_ii_plausible);
    }

    #[test]
    fn grid_spec_json_round_trip() {
        let spec = GridSpec {
            default: DistributionSpec::uniform01(),
            overrides: vec![GridOverride {
                i: 1,
                j: 2,
                spec: DistributionSpec::Beta {
                    alpha: 2.0,
                    beta: 5.0,
                },
            }],
        };
        let json = serde_json::to_string(&spec).unwrap();
        let back: GridSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);
        let grid = back.materialize(4).unwrap();
        assert!(matches!(
            grid.spec_at(1, 2),
            DistributionSpec::Beta { .. }
        ));
        assert!(matches!(grid.spec_at(0, 0), DistributionSpec::Uniform { .. }));
    }

    #[test]
    fn sampled_moments_track_spec_moments() {
        let specs = [
            DistributionSpec::uniform01(),
            DistributionSpec::Beta {
                alpha: 2.0,
                beta: 5.0,
            },
            DistributionSpec::TruncatedNormal {
                center: 0.3,
                spread: 0.25,
            },
            DistributionSpec::Discrete {
                points: vec![0.1, 0.5, 0.9],
                probs: vec![0.25, 0.5, 0.25],
            },
        ];
        for (k, spec) in specs.iter().enumerate() {
            let count = 40_000usize;
            let mut s = Stream::derive(1000 + k as u64, &[tag::CELL]);
            let draws: Vec<f64> = (0..count).map(|_| spec.sample(&mut s)).collect();
            let mean: f64 = draws.iter().sum::<f64>() / count as f64;
            let var: f64 =
                draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (count - 1) as f64;
            let mean_band = 4.0 * (spec.variance() / count as f64).sqrt();
            assert!(
                (mean - spec.mean()).abs() < mean_band,
                "{spec:?}: mean {mean} vs {}",
                spec.mean()
            );
            // Variance of the sample variance is O(mu4/count); a 10x band
            // on the relative error is ample at this sample size.
            assert!(
                (var - spec.variance()).abs() < 0.05 * spec.variance() + 1e-4,
                "{spec:?}: var {var} vs {}",
                spec.variance()
            );
            for &x in &draws {
                assert!((0.0..=1.0).contains(&x));
            }
        }
    }
}
