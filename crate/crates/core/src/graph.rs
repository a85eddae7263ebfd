//! Attention maps to undirected distance graphs.

use crate::error::{Error, Result};
use crate::record_io::ROW_SUM_TOLERANCE;

/// A validated row-stochastic `n × n` attention map, widened to f64.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    n: usize,
    weights: Vec<f64>,
}

impl AttentionMap {
    pub fn new(n: usize, weights: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("attention map must have at least one token"));
        }
        if weights.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: weights.len() });
        }
        for (i, row) in weights.chunks_exact(n).enumerate() {
            if let Some(w) = row.iter().find(|w| !(0.0..=1.0).contains(*w)) {
                return Err(Error::invalid(format!("row {i}: weight {w} outside [0, 1]")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::invalid(format!("row {i} sums to {sum}")));
            }
        }
        Ok(AttentionMap { n, weights })
    }

    pub fn from_f32(n: usize, weights: &[f32]) -> Result<Self> {
        Self::new(n, weights.iter().map(|&w| f64::from(w)).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }
}

/// Symmetric, zero-diagonal matrix of pairwise distances in `[0, 1]`
/// (or `[0, ∞)` for matrices built with [`DistanceMatrix::new`]).
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    /// Builds a matrix from row-major entries, checking symmetry, a zero
    /// diagonal and nonnegative finite entries.
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: data.len() });
        }
        for i in 0..n {
            if data[i * n + i] != 0.0 {
                return Err(Error::invalid(format!("nonzero diagonal at {i}")));
            }
            for j in i + 1..n {
                let d = data[i * n + j];
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::invalid(format!("distance ({i}, {j}) = {d}")));
                }
                if d != data[j * n + i] {
                    return Err(Error::invalid(format!("asymmetric entry ({i}, {j})")));
                }
            }
        }
        Ok(DistanceMatrix { n, data })
    }

    /// Builds a matrix from a function of the unordered pair `i < j`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = f(i, j);
                data[i * n + j] = d;
                data[j * n + i] = d;
            }
        }
        Self::new(n, data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Largest off-diagonal entry, 0 for fewer than two points.
    pub fn max_distance(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    /// Relabels points: entry `(i, j)` of the result is `(perm[i], perm[j])` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> DistanceMatrix {
        assert_eq!(perm.len(), self.n);
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = self.get(perm[i], perm[j]);
            }
        }
        DistanceMatrix { n, data }
    }

    pub fn scaled(&self, factor: f64) -> DistanceMatrix {
        DistanceMatrix {
            n: self.n,
            data: self.data.iter().map(|d| d * factor).collect(),
        }
    }
}

/// Distance between tokens `i != j` is `1 - max(w[i][j], w[j][i])`; the diagonal is 0.
pub fn to_distance_matrix(map: &AttentionMap) -> DistanceMatrix {
    let n = map.n();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = 1.0 - map.get(i, j).max(map.get(j, i));
            data[i * n + j] = d;
            data[j * n + i] = d;
        }
    }
    DistanceMatrix { n, data }
}
