//! Spatial weight matrices.
//!
//! Dense storage throughout: the panels this crate targets have at most a few
//! hundred locations.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when checking that a row-normalized matrix has unit rows.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// How a weight matrix was built. Written to the metadata sidecar of weight CSVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Construction {
    QueenGrid { rows: usize, cols: usize },
    KNearest { k: usize, order: Option<usize> },
    External,
}

/// An `n x n` spatial weight matrix with a zero diagonal and non-negative entries.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    values: DMatrix<f64>,
    row_normalized: bool,
}

impl WeightMatrix {
    /// Validates and wraps a square matrix. `row_normalized` is checked, not
    /// assumed: every row with mass must sum to one within [`ROW_SUM_TOL`].
    pub fn new(values: DMatrix<f64>, row_normalized: bool) -> Result<Self> {
        let n = values.nrows();
        if n == 0 || values.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "weight matrix must be square and non-empty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let v = values[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::param(
                        format!("w[{i},{j}]"),
                        format!("entries must be finite and non-negative, got {v}"),
                    ));
                }
            }
            if values[(i, i)] != 0.0 {
                return Err(Error::param(
                    format!("w[{i},{i}]"),
                    "diagonal entries must be zero",
                ));
            }
        }
        if row_normalized {
            for i in 0..n {
                let s = values.row(i).sum();
                if s != 0.0 && (s - 1.0).abs() > ROW_SUM_TOL {
                    return Err(Error::param(
                        format!("w[{i},:]"),
                        format!("row sums to {s}, expected 1"),
                    ));
                }
            }
        }
        Ok(Self {
            values,
            row_normalized,
        })
    }

    /// Builds from row-major nested vectors and detects row normalization.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch(
                "weight rows must all have length n".into(),
            ));
        }
        let values = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        let normalized = (0..n).all(|i| {
            let s = values.row(i).sum();
            s == 0.0 || (s - 1.0).abs() <= ROW_SUM_TOL
        });
        Self::new(values, normalized)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn is_row_normalized(&self) -> bool {
        self.row_normalized
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    /// Number of nonzero entries in row `i`.
    pub fn neighbours(&self, i: usize) -> usize {
        self.values.row(i).iter().filter(|&&v| v != 0.0).count()
    }

    pub fn is_symmetric(&self) -> bool {
        self.values == self.values.transpose()
    }

    /// Rows without any neighbour.
    pub fn zero_rows(&self) -> Vec<usize> {
        (0..self.n())
            .filter(|&i| self.values.row(i).iter().all(|&v| v == 0.0))
            .collect()
    }

    /// `W x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        debug_assert_eq!(x.len(), n);
        (0..n)
            .map(|i| {
                self.values
                    .row(i)
                    .iter()
                    .zip(x)
                    .map(|(w, v)| w * v)
                    .sum()
            })
            .collect()
    }

    /// Interval of `rho` for which `I - rho W` is nonsingular, from the extreme
    /// real eigenvalues `(1/lambda_min, 1/lambda_max)`. Only meaningful when
    /// the spectrum is real, i.e. for symmetric or similar-to-symmetric `W`.
    pub fn rho_bounds(&self) -> Option<(f64, f64)> {
        let eig = self.values.complex_eigenvalues();
        if eig.iter().any(|z| z.im.abs() > 1e-9) {
            return None;
        }
        let min = eig.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        let max = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        if min >= 0.0 || max <= 0.0 {
            return None;
        }
        Some((1.0 / min, 1.0 / max))
    }
}

/// Pairwise distances between series.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    values: DMatrix<f64>,
}

impl DistanceMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        let n = values.nrows();
        if n == 0 || values.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "distance matrix must be square and non-empty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        for i in 0..n {
            if values[(i, i)] != 0.0 {
                return Err(Error::param(format!("d[{i},{i}]"), "diagonal must be zero"));
            }
            for j in 0..n {
                let v = values[(i, j)];
                if v < 0.0 || v.is_nan() {
                    return Err(Error::param(
                        format!("d[{i},{j}]"),
                        format!("distances must be non-negative, got {v}"),
                    ));
                }
                if (v - values[(j, i)]).abs() > 1e-12 {
                    return Err(Error::param(format!("d[{i},{j}]"), "matrix is not symmetric"));
                }
            }
        }
        Ok(Self { values })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }
}

/// Binary queen-contiguity adjacency on a `rows x cols` lattice. Cell `(r, c)`
/// has index `r * cols + c`; cells sharing an edge or a corner are neighbours.
pub fn build_queen_grid(rows: usize, cols: usize) -> Result<WeightMatrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::param("rows/cols", "grid dimensions must be positive"));
    }
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::param("rows/cols", format!("{rows} x {cols} overflows")))?;
    // n^2 entries must be addressable too.
    n.checked_mul(n)
        .ok_or_else(|| Error::param("rows/cols", format!("{n} locations overflow a dense matrix")))?;
    let mut w = DMatrix::zeros(n, n);
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let (rr, cc) = (r as i64 + dr, c as i64 + dc);
                    if rr < 0 || cc < 0 || rr >= rows as i64 || cc >= cols as i64 {
                        continue;
                    }
                    w[(i, rr as usize * cols + cc as usize)] = 1.0;
                }
            }
        }
    }
    WeightMatrix::new(w, false)
}

/// Result of [`row_normalize`]: the normalized matrix and the indices of rows
/// that had no neighbours and were left at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub matrix: WeightMatrix,
    pub zero_rows: Vec<usize>,
}

/// Divides each row with positive mass by its sum.
pub fn row_normalize(w: &WeightMatrix) -> Normalized {
    let mut values = w.values.clone();
    let mut zero_rows = Vec::new();
    for i in 0..w.n() {
        let s: f64 = values.row(i).sum();
        if s > 0.0 {
            values.row_mut(i).iter_mut().for_each(|v| *v /= s);
        } else {
            zero_rows.push(i);
        }
    }
    Normalized {
        matrix: WeightMatrix {
            values,
            row_normalized: true,
        },
        zero_rows,
    }
}

/// k-nearest-neighbour weights: `w_ij = 1 / #N_k(i)` for the `k` closest `j`.
///
/// Ties are broken by the lower index and non-finite distances are never
/// selected. The relation is not symmetrized.
pub fn knn_weights(d: &DistanceMatrix, k: usize) -> Result<WeightMatrix> {
    let n = d.n();
    if k == 0 || k + 1 > n {
        return Err(Error::param(
            "k",
            format!("must satisfy 1 <= k <= n - 1 = {}, got {k}", n.saturating_sub(1)),
        ));
    }
    let mut w = DMatrix::zeros(n, n);
    let mut candidates: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        candidates.clear();
        candidates.extend((0..n).filter(|&j| j != i && d.get(i, j).is_finite()));
        // Stable sort keeps the lower index first among equal distances.
        candidates.sort_by(|&a, &b| d.get(i, a).total_cmp(&d.get(i, b)));
        let chosen = &candidates[..k.min(candidates.len())];
        if chosen.is_empty() {
            continue;
        }
        let weight = 1.0 / chosen.len() as f64;
        for &j in chosen {
            w[(i, j)] = weight;
        }
    }
    Ok(WeightMatrix {
        values: w,
        row_normalized: true,
    })
}
