//! Valuation instances: an n x n matrix of agent-item values in [0, 1]
//! together with the set of preset (normalization-pinned) entries.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalization mode of an instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Every row attains value 1 on some item and 0 on another; 2n entries
    /// are preset by the normalization.
    UnitRange,
    /// Only 0 <= a_ij <= 1 is required; the preset set may be empty.
    Box,
}

/// A valuation profile: `values[i][j]` is agent `i`'s value for item `j`.
///
/// Construction checks shape only. Semantic invariants (entry ranges,
/// per-row preset structure) are reported by [`validate_instance`], so
/// deliberately malformed profiles can be built and inspected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub n: usize,
    pub mode: Mode,
    pub values: Vec<Vec<f64>>,
    pub preset: BTreeSet<(usize, usize)>,
}

impl Instance {
    pub fn new(
        values: Vec<Vec<f64>>,
        preset: impl IntoIterator<Item = (usize, usize)>,
        mode: Mode,
    ) -> Result<Self> {
        let n = values.len();
        if n == 0 {
            return Err(Error::DimensionMismatch("empty value matrix".into()));
        }
        if let Some(row) = values.iter().find(|row| row.len() != n) {
            return Err(Error::DimensionMismatch(format!(
                "matrix must be square: found row of length {} in a {}-row matrix",
                row.len(),
                n
            )));
        }
        Ok(Instance {
            n,
            mode,
            values,
            preset: preset.into_iter().collect(),
        })
    }

    /// A box-mode instance with no preset entries.
    pub fn boxed(values: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(values, [], Mode::Box)
    }

    #[inline]
    pub fn value(&self, agent: usize, item: usize) -> f64 {
        self.values[agent][item]
    }

    pub fn is_preset(&self, agent: usize, item: usize) -> bool {
        self.preset.contains(&(agent, item))
    }

    /// Positions outside the preset set, row-major.
    pub fn free_entries(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        (0..n)
            .flat_map(move |i| (0..n).map(move |j| (i, j)))
            .filter(move |pos| !self.preset.contains(pos))
    }

    /// Sum of values over free entries.
    pub fn free_sum(&self) -> f64 {
        self.free_entries().map(|(i, j)| self.values[i][j]).sum()
    }

    pub fn to_json_writer<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer(w, self)?;
        Ok(())
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json_reader<R: Read>(r: R) -> Result<Self> {
        let inst: Instance = serde_json::from_reader(r)?;
        inst.check_shape()?;
        Ok(inst)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let inst: Instance = serde_json::from_str(s)?;
        inst.check_shape()?;
        Ok(inst)
    }

    fn check_shape(&self) -> Result<()> {
        if self.values.len() != self.n || self.values.iter().any(|r| r.len() != self.n) {
            return Err(Error::DimensionMismatch(format!(
                "declared n = {} does not match the value matrix",
                self.n
            )));
        }
        Ok(())
    }
}

/// Report every invariant violation of `inst`; an empty list means the
/// instance is valid for its mode. Violations are data, not failures.
pub fn validate_instance(inst: &Instance) -> Vec<String> {
    let mut violations = Vec::new();
    let n = inst.n;

    for (i, row) in inst.values.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                violations.push(format!("entry ({i},{j}) = {v} outside [0,1]"));
            }
        }
    }

    for &(i, j) in &inst.preset {
        if i >= n || j >= n {
            violations.push(format!("preset index ({i},{j}) out of range for n = {n}"));
        }
    }

    if inst.mode == Mode::UnitRange {
        if inst.preset.len() != 2 * n {
            violations.push(format!(
                "preset has {} entries, unit-range requires exactly {}",
                inst.preset.len(),
                2 * n
            ));
        }
        for (i, row) in inst.values.iter().enumerate() {
            if !row.iter().any(|&v| v == 1.0) {
                violations.push(format!("row {i} has no unit entry"));
            }
            if !row.iter().any(|&v| v == 0.0) {
                violations.push(format!("row {i} has no zero entry"));
            }
            let ones = preset_count(inst, i, 1.0);
            let zeros = preset_count(inst, i, 0.0);
            if ones != 1 {
                violations.push(format!("row {i} has {ones} preset-one entries, expected 1"));
            }
            if zeros != 1 {
                violations.push(format!(
                    "row {i} has {zeros} preset-zero entries, expected 1"
                ));
            }
        }
    }

    violations
}

fn preset_count(inst: &Instance, row: usize, target: f64) -> usize {
    inst.preset
        .iter()
        .filter(|&&(i, j)| i == row && j < inst.n && inst.values[row][j] == target)
        .count()
}

/// Write a matrix as header-free row-major CSV (RFC 4180, CRLF line ends,
/// 17 significant digits so values round-trip exactly).
pub fn matrix_to_csv<W: Write>(matrix: &[Vec<f64>], mut w: W) -> Result<()> {
    for row in matrix {
        let line = row
            .iter()
            .map(|v| format!("{v:.16e}"))
            .collect::<Vec<_>>()
            .join(",");
        w.write_all(line.as_bytes())
            .and_then(|_| w.write_all(b"\r\n"))
            .map_err(|e| Error::Serialization(e.to_string()))?;
    }
    Ok(())
}

/// Parse a header-free row-major CSV matrix.
pub fn matrix_from_csv<R: Read>(mut r: R) -> Result<Vec<Vec<f64>>> {
    let mut text = String::new();
    r.read_to_string(&mut text)
        .map_err(|e| Error::Serialization(e.to_string()))?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let row: Result<Vec<f64>> = line
            .split(',')
            .map(|field| {
                field.trim().parse::<f64>().map_err(|_| {
                    Error::Serialization(format!(
                        "line {}: `{}` is not a number",
                        lineno + 1,
                        field
                    ))
                })
            })
            .collect();
        rows.push(row?);
    }
    if rows.is_empty() {
        return Err(Error::Serialization("empty CSV matrix".into()));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_range_2x2() -> Instance {
        Instance::new(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            [(0, 0), (0, 1), (1, 0), (1, 1)],
            Mode::UnitRange,
        )
        .unwrap()
    }

    #[test]
    fn canonical_profile_is_valid() {
        assert!(validate_instance(&unit_range_2x2()).is_empty());
    }

    #[test]
    fn missing_zero_entry_is_reported() {
        let inst = Instance::new(
            vec![vec![1.0, 0.5], vec![0.0, 1.0]],
            [(0, 0), (0, 1), (1, 0), (1, 1)],
            Mode::UnitRange,
        )
        .unwrap();
        let violations = validate_instance(&inst);
        assert!(
            violations.iter().any(|v| v == "row 0 has no zero entry"),
            "got {violations:?}"
        );
    }

    #[test]
    fn box_mode_drops_the_unit_range_constraint() {
        let inst = Instance::new(vec![vec![1.0, 0.5], vec![0.0, 1.0]], [], Mode::Box).unwrap();
        assert!(validate_instance(&inst).is_empty());
    }

    #[test]
    fn out_of_range_entries_are_reported_in_box_mode() {
        let inst = Instance::boxed(vec![vec![1.5, 0.5], vec![0.0, -0.1]]).unwrap();
        let violations = validate_instance(&inst);
        assert_eq!(violations.len(), 2);
    }

    #[test]
    fn ragged_matrix_is_rejected() {
        let err = Instance::boxed(vec![vec![1.0, 0.0], vec![0.0]]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)));
    }

    #[test]
    fn preset_out_of_range_is_reported() {
        let inst = Instance::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], [(0, 5)], Mode::Box).unwrap();
        let violations = validate_instance(&inst);
        assert!(violations.iter().any(|v| v.contains("out of range")));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let inst = unit_range_2x2();
        let json = inst.to_json_string().unwrap();
        let back = Instance::from_json_str(&json).unwrap();
        assert_eq!(inst, back);
        // Field names follow the published schema.
        assert!(json.contains("\"mode\":\"unit-range\""));
        assert!(json.contains("\"preset\":[[0,0],[0,1],[1,0],[1,1]]"));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let matrix = vec![vec![0.123456789012345678, 1.0], vec![0.0, 0.7071067811865476]];
        let mut buf = Vec::new();
        matrix_to_csv(&matrix, &mut buf).unwrap();
        let back = matrix_from_csv(buf.as_slice()).unwrap();
        assert_eq!(matrix, back);
    }

    #[test]
    fn free_entries_exclude_preset() {
        let inst = unit_range_2x2();
        assert_eq!(inst.free_entries().count(), 0);
        let boxed = Instance::boxed(vec![vec![0.2, 0.3], vec![0.4, 0.5]]).unwrap();
        assert_eq!(boxed.free_entries().count(), 4);
        assert!((boxed.free_sum() - 1.4).abs() < 1e-12);
    }
}
