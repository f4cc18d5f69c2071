//! Dense cubic rank-3 arrays used for structure constants and quadratic
//! coefficients.
//!
//! Storage is flat and row-major in `[i][j][k]` order; the JSON form is the
//! nested array `[[[..]]]` with the same index order.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dim: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    t.data[(i * dim + j) * dim + k] = f(i, j, k);
                }
            }
        }
        t
    }

    pub fn from_nested(nested: &[Vec<Vec<f64>>]) -> Result<Self> {
        let dim = nested.len();
        let mut data = Vec::with_capacity(dim * dim * dim);
        for (i, plane) in nested.iter().enumerate() {
            if plane.len() != dim {
                return Err(Error::Shape(format!(
                    "plane {i} has {} rows, expected {dim}",
                    plane.len()
                )));
            }
            for (j, row) in plane.iter().enumerate() {
                if row.len() != dim {
                    return Err(Error::Shape(format!(
                        "row [{i}][{j}] has {} entries, expected {dim}",
                        row.len()
                    )));
                }
                data.extend_from_slice(row);
            }
        }
        Ok(Self { dim, data })
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        let n = self.dim;
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| self.data[(i * n + j) * n..(i * n + j + 1) * n].to_vec())
                    .collect()
            })
            .collect()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.dim + j) * self.dim + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        self.data[(i * self.dim + j) * self.dim + k] = value;
    }

    /// Contiguous slice `[i][j][..]`.
    #[inline]
    pub fn row(&self, i: usize, j: usize) -> &[f64] {
        let start = (i * self.dim + j) * self.dim;
        &self.data[start..start + self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|x| x * factor).collect(),
        }
    }

    /// Largest `|T[i][j][k] - T[i][k][j]|` and where it occurs (with `j < k`).
    pub fn worst_asymmetry_in_last_pair(&self) -> (f64, Option<(usize, usize, usize)>) {
        let n = self.dim;
        let mut worst = 0.0;
        let mut at = None;
        for i in 0..n {
            for j in 0..n {
                for k in (j + 1)..n {
                    let r = (self.get(i, j, k) - self.get(i, k, j)).abs();
                    if r > worst {
                        worst = r;
                        at = Some((i, j, k));
                    }
                }
            }
        }
        (worst, at)
    }
}

impl Serialize for Tensor3 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_nested().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Tensor3 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let nested = Vec::<Vec<Vec<f64>>>::deserialize(deserializer)?;
        Tensor3::from_nested(&nested).map_err(serde::de::Error::custom)
    }
}
