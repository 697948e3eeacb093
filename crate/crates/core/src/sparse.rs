//! Column-compressed sparse binary matrices.

use crate::bits::Bits;

/// Sparse binary matrix stored by columns, row indices ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseBinMatrix {
    n_rows: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<u32>,
}

impl SparseBinMatrix {
    /// Builds from per-column row lists; each list is sorted and duplicate
    /// pairs cancel.
    pub fn from_columns<I, C>(n_rows: usize, columns: I) -> Self
    where
        I: IntoIterator<Item = C>,
        C: AsRef<[u32]>,
    {
        let mut col_ptr = vec![0];
        let mut row_idx = Vec::new();
        for col in columns {
            let mut rows = col.as_ref().to_vec();
            rows.sort_unstable();
            let mut i = 0;
            while i < rows.len() {
                let mut j = i;
                while j < rows.len() && rows[j] == rows[i] {
                    j += 1;
                }
                if (j - i) % 2 == 1 {
                    assert!((rows[i] as usize) < n_rows, "row index out of range");
                    row_idx.push(rows[i]);
                }
                i = j;
            }
            col_ptr.push(row_idx.len());
        }
        SparseBinMatrix {
            n_rows,
            col_ptr,
            row_idx,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.col_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    #[inline]
    pub fn column(&self, k: usize) -> &[u32] {
        &self.row_idx[self.col_ptr[k]..self.col_ptr[k + 1]]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[u32]> + '_ {
        (0..self.n_cols()).map(move |k| self.column(k))
    }

    /// Row-major view: for each row, the ascending list of columns.
    pub fn rows(&self) -> Vec<Vec<u32>> {
        let mut rows = vec![Vec::new(); self.n_rows];
        for k in 0..self.n_cols() {
            for &r in self.column(k) {
                rows[r as usize].push(k as u32);
            }
        }
        rows
    }

    /// Matrix-vector product over GF(2).
    pub fn mul_vec(&self, x: &Bits) -> Bits {
        assert_eq!(x.len(), self.n_cols(), "dimension mismatch");
        let mut out = Bits::zeros(self.n_rows);
        for k in x.iter_ones() {
            for &r in self.column(k) {
                out.toggle(r as usize);
            }
        }
        out
    }

    /// Product with a vector given by its support.
    pub fn mul_support(&self, support: impl IntoIterator<Item = usize>) -> Bits {
        let mut out = Bits::zeros(self.n_rows);
        for k in support {
            for &r in self.column(k) {
                out.toggle(r as usize);
            }
        }
        out
    }
}
