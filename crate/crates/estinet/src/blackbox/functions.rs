//! The exact functions behind each task. All of them are deterministic and
//! total on their declared domains; callers treat them as opaque.

use super::BbError;

pub const DIGIT_CLASSES: usize = 10;

/// Sum of a non-empty sequence of digits 0-9.
pub fn bb_sum(digits: &[usize]) -> Result<u32, BbError> {
    if digits.is_empty() {
        return Err(BbError::Domain("empty digit sequence".into()));
    }
    let mut total = 0u32;
    for &d in digits {
        if d >= DIGIT_CLASSES {
            return Err(BbError::Domain(format!("digit {d} outside 0-9")));
        }
        total += d as u32;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum CompareOp {
    GreaterThan,
    LessThan,
}

impl CompareOp {
    pub fn index(self) -> usize {
        match self {
            CompareOp::GreaterThan => 0,
            CompareOp::LessThan => 1,
        }
    }

    pub fn from_index(i: usize) -> Result<Self, BbError> {
        match i {
            0 => Ok(CompareOp::GreaterThan),
            1 => Ok(CompareOp::LessThan),
            _ => Err(BbError::Domain(format!("comparison class {i}"))),
        }
    }
}

/// Strict comparison of two finite reals.
pub fn bb_compare(x: f64, y: f64, op: CompareOp) -> Result<bool, BbError> {
    if x.is_nan() || y.is_nan() {
        return Err(BbError::Domain("NaN comparison argument".into()));
    }
    Ok(match op {
        CompareOp::GreaterThan => x > y,
        CompareOp::LessThan => x < y,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum TableOp {
    EqualTo,
    LessThan,
    GreaterThan,
    Max,
    Min,
}

pub const TABLE_OPS: [TableOp; 5] = [
    TableOp::EqualTo,
    TableOp::LessThan,
    TableOp::GreaterThan,
    TableOp::Max,
    TableOp::Min,
];

impl TableOp {
    pub fn index(self) -> usize {
        TABLE_OPS.iter().position(|&o| o == self).unwrap()
    }

    pub fn from_index(i: usize) -> Result<Self, BbError> {
        TABLE_OPS
            .get(i)
            .copied()
            .ok_or_else(|| BbError::Domain(format!("table op class {i}")))
    }

    pub fn needs_scalar(self) -> bool {
        matches!(self, TableOp::EqualTo | TableOp::LessThan | TableOp::GreaterThan)
    }

    pub fn name(self) -> &'static str {
        match self {
            TableOp::EqualTo => "equal_to",
            TableOp::LessThan => "less_than",
            TableOp::GreaterThan => "greater_than",
            TableOp::Max => "max",
            TableOp::Min => "min",
        }
    }
}

/// Row-indicator logic over one numeric column. Scalar comparisons need a
/// scalar argument; max/min ignore it (`None`, or NaN on the wire). Ties on
/// max/min mark every attaining row.
pub fn bb_table_logic(
    op: TableOp,
    column: &[f64],
    scalar: Option<f64>,
) -> Result<Vec<bool>, BbError> {
    if column.is_empty() {
        return Err(BbError::Domain("empty column".into()));
    }
    let scalar = scalar.filter(|s| !s.is_nan());
    if op.needs_scalar() {
        let s = scalar.ok_or_else(|| {
            BbError::Domain(format!("{} requires a scalar argument", op.name()))
        })?;
        return Ok(column
            .iter()
            .map(|&v| match op {
                TableOp::EqualTo => v == s,
                TableOp::LessThan => v < s,
                TableOp::GreaterThan => v > s,
                _ => unreachable!(),
            })
            .collect());
    }
    let extreme = column
        .iter()
        .copied()
        .reduce(|a, b| match op {
            TableOp::Max => a.max(b),
            TableOp::Min => a.min(b),
            _ => unreachable!(),
        })
        .unwrap();
    Ok(column.iter().map(|&v| v == extreme).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_basics() {
        assert!(bb_sum(&[]).is_err());
        assert_eq!(bb_sum(&[0, 0]).unwrap(), 0);
        assert_eq!(bb_sum(&[7, 2]).unwrap(), 9);
        assert!(bb_sum(&[10]).is_err());
    }

    #[test]
    fn sum_matches_naive_loop() {
        let digits = [3, 1, 4, 1, 5, 9, 2, 6, 5, 3];
        let mut expected = 0u32;
        for &d in &digits {
            expected += d as u32;
        }
        assert_eq!(bb_sum(&digits).unwrap(), expected);
    }

    #[test]
    fn compare_paper_example() {
        // "is 7.5 greater than 8.2?" -> false
        assert!(!bb_compare(7.5, 8.2, CompareOp::GreaterThan).unwrap());
    }

    #[test]
    fn compare_is_irreflexive() {
        assert!(!bb_compare(3.25, 3.25, CompareOp::GreaterThan).unwrap());
        assert!(!bb_compare(3.25, 3.25, CompareOp::LessThan).unwrap());
    }

    #[test]
    fn compare_matches_native_on_random_pairs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let x: f64 = rng.random_range(-1e6..1e6);
            let y: f64 = rng.random_range(-1e6..1e6);
            assert_eq!(bb_compare(x, y, CompareOp::GreaterThan).unwrap(), x > y);
            assert_eq!(bb_compare(x, y, CompareOp::LessThan).unwrap(), x < y);
        }
    }

    #[test]
    fn compare_rejects_nan() {
        assert!(bb_compare(f64::NAN, 0.0, CompareOp::GreaterThan).is_err());
    }

    #[test]
    fn table_logic_greater_than() {
        let out = bb_table_logic(TableOp::GreaterThan, &[8.0, 3.0, 9.0], Some(7.0)).unwrap();
        assert_eq!(out, vec![true, false, true]);
    }

    #[test]
    fn table_logic_max_marks_all_ties() {
        let out = bb_table_logic(TableOp::Max, &[2.0, 9.0, 9.0], None).unwrap();
        assert_eq!(out, vec![false, true, true]);
    }

    #[test]
    fn table_logic_equal_to_all_rows() {
        let out = bb_table_logic(TableOp::EqualTo, &[5.0, 5.0, 5.0], Some(5.0)).unwrap();
        assert_eq!(out, vec![true, true, true]);
    }

    #[test]
    fn table_logic_scalar_requirements() {
        assert!(bb_table_logic(TableOp::LessThan, &[1.0], None).is_err());
        // NaN on the wire means "not relevant".
        assert!(bb_table_logic(TableOp::LessThan, &[1.0], Some(f64::NAN)).is_err());
        assert!(bb_table_logic(TableOp::Max, &[1.0], Some(f64::NAN)).is_ok());
        assert!(bb_table_logic(TableOp::Max, &[], None).is_err());
    }
}
