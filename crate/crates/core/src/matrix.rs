//! Square-matrix helpers shared by the predictors.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Builds a matrix from row-major nested rows.
pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if let Some(bad) = rows.iter().find(|r| r.len() != n) {
        return Err(Error::DimensionMismatch {
            what: "matrix row length",
            expected: n,
            actual: bad.len(),
        });
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn check_row_stochastic(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::InvalidParameter(format!("{what} must be square")));
    }
    for i in 0..m.nrows() {
        let row = m.row(i);
        if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "{what} row {i} has a negative or non-finite entry"
            )));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "{what} row {i} sums to {sum}, expected 1"
            )));
        }
    }
    Ok(())
}

/// Row-stochastic matrix that keeps its state with probability `1 - switch`
/// and jumps uniformly to one of the other states otherwise.
pub fn sticky_transition(n: usize, switch: f64) -> DMatrix<f64> {
    if n == 1 {
        return DMatrix::identity(1, 1);
    }
    let off = switch / (n - 1) as f64;
    DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 - switch } else { off })
}

/// Serde adapter storing a `DMatrix` as row-major nested arrays.
pub mod row_major {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        super::to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        super::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_round_trip_in_row_major_order() {
        let m = from_rows(&[vec![0.9, 0.1], vec![0.3, 0.7]]).unwrap();
        assert_eq!(m[(0, 1)], 0.1);
        assert_eq!(to_rows(&m), vec![vec![0.9, 0.1], vec![0.3, 0.7]]);
        assert!(from_rows(&[vec![1.0], vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn stochastic_check() {
        assert!(check_row_stochastic(&sticky_transition(4, 0.2), "P").is_ok());
        let bad = from_rows(&[vec![0.5, 0.4], vec![0.0, 1.0]]).unwrap();
        assert!(check_row_stochastic(&bad, "P").is_err());
    }
}
