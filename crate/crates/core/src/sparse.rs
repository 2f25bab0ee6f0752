//! Compressed sparse row storage for square nonnegative matrices.

/// Square CSR matrix. Rows are sorted by column with duplicates summed and
/// exact zeros dropped, so every stored entry is a genuine nonzero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            row_ptr: vec![0; n + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    /// Builds from `(row, col, value)` triplets; indices must be `< n`.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(sorted.len());
        let mut vals: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            assert!(r < n && c < n, "triplet ({r}, {c}) outside {n}x{n}");
            if last == Some((r, c)) {
                *vals.last_mut().expect("previous entry") += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        let m = Self {
            n,
            row_ptr,
            cols,
            vals,
        };
        m.filter(|_, _, v| v != 0.0)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn row_nnz(&self, r: usize) -> usize {
        self.row_ptr[r + 1] - self.row_ptr[r]
    }

    pub fn row_cols(&self, r: usize) -> &[usize] {
        &self.cols[self.row_ptr[r]..self.row_ptr[r + 1]]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let cols = self.row_cols(r);
        match cols.binary_search(&c) {
            Ok(k) => self.vals[self.row_ptr[r] + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self, r: usize) -> f64 {
        self.get(r, r)
    }

    pub fn row_sum(&self, r: usize) -> f64 {
        self.row(r).map(|(_, v)| v).sum()
    }

    /// `(A x)_r`.
    pub fn row_dot(&self, r: usize, x: &[f64]) -> f64 {
        self.row(r).map(|(c, v)| v * x[c]).sum()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<(usize, usize, f64)> = self.triplets().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.n, &t)
    }

    /// Keeps entries for which `keep(row, col, value)` holds.
    pub fn filter(&self, mut keep: impl FnMut(usize, usize, f64) -> bool) -> Self {
        let mut row_ptr = vec![0usize; self.n + 1];
        let mut cols = Vec::with_capacity(self.nnz());
        let mut vals = Vec::with_capacity(self.nnz());
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                if keep(r, c, v) {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr[r + 1] = cols.len();
        }
        Self {
            n: self.n,
            row_ptr,
            cols,
            vals,
        }
    }

    /// Applies `f(row, col, value)` to every stored entry; new zeros are dropped.
    pub fn map_values(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        let mut m = self.clone();
        for r in 0..self.n {
            for k in m.row_ptr[r]..m.row_ptr[r + 1] {
                m.vals[k] = f(r, m.cols[k], m.vals[k]);
            }
        }
        m.filter(|_, _, v| v != 0.0)
    }
}
