//! Compressed sparse row storage for the network matrices.
//!
//! Only the handful of products the encoder needs are provided; anything
//! else goes through [`Csr::to_dense`] on team-sized views.

use ndarray::{Array2, ArrayView2};

/// Row-compressed `f64` matrix with sorted, duplicate-free column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Csr {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds from `(row, col, value)` triplets. Duplicates are merged with
    /// `combine`; explicit zeros are dropped.
    ///
    /// Panics if a triplet falls outside `rows × cols`.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
        combine: impl Fn(f64, f64) -> f64,
    ) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < rows && c < cols, "triplet ({r},{c}) outside {rows}x{cols}");
            if last == Some((r, c)) {
                let slot = values.last_mut().expect("previous entry");
                *slot = combine(*slot, v);
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        let mut m = Csr {
            rows,
            cols,
            indptr,
            indices,
            values,
        };
        m.drop_zeros();
        m
    }

    pub fn from_dense(dense: ArrayView2<f64>) -> Self {
        let (rows, cols) = dense.dim();
        let mut t = Vec::new();
        for ((r, c), &v) in dense.indexed_iter() {
            if v != 0.0 {
                t.push((r, c, v));
            }
        }
        Csr::from_triplets(rows, cols, t, |a, _| a)
    }

    fn drop_zeros(&mut self) {
        if self.values.iter().all(|&v| v != 0.0) {
            return;
        }
        let mut indptr = vec![0usize; self.rows + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut values = Vec::with_capacity(self.values.len());
        for r in 0..self.rows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                if self.values[k] != 0.0 {
                    indices.push(self.indices[k]);
                    values.push(self.values[k]);
                }
            }
            indptr[r + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.values = values;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values stored in row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    /// All stored entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|r| self.row(r).map(|(_, v)| v).sum()).collect()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.rows, self.cols));
        for (r, c, v) in self.iter() {
            out[[r, c]] = v;
        }
        out
    }

    /// Dense block `self[rows, cols]` in the given index order.
    pub fn select_dense(&self, rows: &[usize], cols: &[usize]) -> Array2<f64> {
        Array2::from_shape_fn((rows.len(), cols.len()), |(i, j)| self.get(rows[i], cols[j]))
    }

    /// Keeps all rows and only the listed columns, renumbered in list order.
    pub fn select_columns(&self, cols: &[usize]) -> Csr {
        let mut remap = vec![usize::MAX; self.cols];
        for (new, &old) in cols.iter().enumerate() {
            remap[old] = new;
        }
        let t = self
            .iter()
            .filter(|&(_, c, _)| remap[c] != usize::MAX)
            .map(|(r, c, v)| (r, remap[c], v))
            .collect();
        Csr::from_triplets(self.rows, cols.len(), t, |a, _| a)
    }

    /// `self · rhs`.
    pub fn mul_dense(&self, rhs: ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(self.cols, rhs.nrows(), "sparse·dense inner dimension");
        let mut out = Array2::zeros((self.rows, rhs.ncols()));
        for r in 0..self.rows {
            let mut out_row = out.row_mut(r);
            for (c, v) in self.row(r) {
                out_row.scaled_add(v, &rhs.row(c));
            }
        }
        out
    }

    /// `selfᵀ · rhs` without forming the transpose.
    pub fn t_mul_dense(&self, rhs: ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(self.rows, rhs.nrows(), "sparseᵀ·dense inner dimension");
        let mut out = Array2::zeros((self.cols, rhs.ncols()));
        for r in 0..self.rows {
            let rhs_row = rhs.row(r);
            for (c, v) in self.row(r) {
                out.row_mut(c).scaled_add(v, &rhs_row);
            }
        }
        out
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols && self.iter().all(|(r, c, v)| self.get(c, r) == v)
    }
}
