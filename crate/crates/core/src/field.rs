//! Dense time-by-column fields.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};

/// Row-major `nt x cols` array of nodal values.
///
/// The same type carries states (one column per unknown node), densities
/// and boundary or restricted data on the feedback side.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Field {
    nt: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(nt: usize, cols: usize) -> Self {
        Field {
            nt,
            cols,
            data: vec![0.0; nt * cols],
        }
    }

    pub fn constant(nt: usize, cols: usize, value: f64) -> Self {
        Field {
            nt,
            cols,
            data: vec![value; nt * cols],
        }
    }

    pub fn from_vec(nt: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        contract(data.len() == nt * cols, || {
            format!(
                "expected {} values for a {}x{} field, got {}",
                nt * cols,
                nt,
                cols,
                data.len()
            )
        })?;
        Ok(Field { nt, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nt = rows.len();
        let cols = rows.first().map_or(0, Vec::len);
        contract(rows.iter().all(|r| r.len() == cols), || {
            "ragged rows".to_string()
        })?;
        Ok(Field {
            nt,
            cols,
            data: rows.concat(),
        })
    }

    pub fn from_fn(nt: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(nt * cols);
        for n in 0..nt {
            for i in 0..cols {
                data.push(f(n, i));
            }
        }
        Field { nt, cols, data }
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nt, self.cols)
    }

    pub fn same_shape(&self, other: &Field) -> bool {
        self.shape() == other.shape()
    }

    pub fn get(&self, n: usize, i: usize) -> f64 {
        self.data[n * self.cols + i]
    }

    pub fn set(&mut self, n: usize, i: usize, v: f64) {
        self.data[n * self.cols + i] = v;
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.data[n * self.cols..(n + 1) * self.cols]
    }

    pub fn row_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.data[n * self.cols..(n + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.nt).map(|n| self.row(n).to_vec()).collect()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            nt: self.nt,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        debug_assert!(self.same_shape(other));
        Field {
            nt: self.nt,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Field {
        self.map(|v| s * v)
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Field) -> Field {
        self.zip_map(other, |a, b| a + s * b)
    }

    pub fn dot(&self, other: &Field) -> f64 {
        debug_assert!(self.same_shape(other));
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
