use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column layout of an executable chunk.
pub const DX: usize = 0;
pub const DY: usize = 1;
pub const DZ: usize = 2;
pub const DYAW: usize = 3;
pub const GRIPPER: usize = 4;
pub const ACTION_DIM: usize = 5;

/// Horizons accepted for execution.
pub const HORIZONS: [usize; 2] = [25, 50];

/// Per-step magnitude clamp applied at execution time, meters or radians.
pub const MAX_STEP_DELTA: f64 = 0.5;

/// Row-major `rows x cols` matrix. Rows are 10 Hz timesteps; for executable
/// chunks the columns are `(dx, dy, dz, dyaw, gripper)`.
///
/// The sampler and potentials work for any shape; [`ActionChunk::validate`]
/// enforces the executable layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<f64>>", try_from = "Vec<Vec<f64>>")]
pub struct ActionChunk {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ActionChunk {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ActionChunk {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        ActionChunk {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "{} values for a {rows}x{cols} chunk",
                data.len()
            )));
        }
        Ok(ActionChunk { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for t in 0..rows {
            for d in 0..cols {
                data.push(f(t, d));
            }
        }
        ActionChunk { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.cols..(t + 1) * self.cols]
    }

    pub fn row_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.data[t * self.cols..(t + 1) * self.cols]
    }

    pub fn column(&self, d: usize) -> Vec<f64> {
        (0..self.rows).map(|t| self[(t, d)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn ensure_shape(&self, expected: (usize, usize)) -> Result<()> {
        if self.shape() == expected {
            Ok(())
        } else {
            Err(Error::Shape {
                expected,
                got: self.shape(),
            })
        }
    }

    /// Executable layout: horizon 25 or 50, five columns, finite entries.
    pub fn validate(&self) -> Result<()> {
        if !HORIZONS.contains(&self.rows) || self.cols != ACTION_DIM {
            return Err(Error::invalid(format!(
                "chunk shape {}x{} is not executable",
                self.rows, self.cols
            )));
        }
        if !self.is_finite() {
            return Err(Error::NonFinite { what: "action chunk" });
        }
        Ok(())
    }

    /// `self + scale * other`, elementwise.
    pub fn axpy(&mut self, scale: f64, other: &ActionChunk) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }

    pub fn scaled(&self, scale: f64) -> ActionChunk {
        ActionChunk {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * scale).collect(),
        }
    }

    pub fn dot(&self, other: &ActionChunk) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs_diff(&self, other: &ActionChunk) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Rows `offset..` moved to the front; rows past the end become zero.
    pub fn shifted(&self, offset: usize) -> ActionChunk {
        ActionChunk::from_fn(self.rows, self.cols, |t, d| {
            if t + offset < self.rows {
                self[(t + offset, d)]
            } else {
                0.0
            }
        })
    }
}

impl Index<(usize, usize)> for ActionChunk {
    type Output = f64;

    fn index(&self, (t, d): (usize, usize)) -> &f64 {
        &self.data[t * self.cols + d]
    }
}

impl IndexMut<(usize, usize)> for ActionChunk {
    fn index_mut(&mut self, (t, d): (usize, usize)) -> &mut f64 {
        &mut self.data[t * self.cols + d]
    }
}

impl From<ActionChunk> for Vec<Vec<f64>> {
    fn from(chunk: ActionChunk) -> Self {
        chunk.data.chunks(chunk.cols.max(1)).map(<[f64]>::to_vec).collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for ActionChunk {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("ragged chunk rows"));
        }
        let n = rows.len();
        ActionChunk::from_vec(n, cols, rows.into_iter().flatten().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_validation() {
        let c = ActionChunk::zeros(25, ACTION_DIM);
        c.validate().unwrap();
        assert!(ActionChunk::zeros(24, ACTION_DIM).validate().is_err());
        assert!(ActionChunk::zeros(50, 4).validate().is_err());
        let mut bad = ActionChunk::zeros(50, ACTION_DIM);
        bad[(3, 2)] = f64::NAN;
        assert!(bad.validate().is_err());
        assert!(ActionChunk::from_vec(2, 2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn shift_moves_rows_forward() {
        let c = ActionChunk::from_fn(4, 2, |t, d| (10 * t + d) as f64);
        let s = c.shifted(3);
        assert_eq!(s.row(0), &[30.0, 31.0]);
        assert_eq!(s.row(1), &[0.0, 0.0]);
    }

    #[test]
    fn json_is_nested_rows() {
        let c = ActionChunk::from_fn(2, 3, |t, d| (t * 3 + d) as f64 * 0.5);
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(s, "[[0.0,0.5,1.0],[1.5,2.0,2.5]]");
        let back: ActionChunk = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        assert!(serde_json::from_str::<ActionChunk>("[[1.0],[1.0,2.0]]").is_err());
    }
}
