//! Compressed sparse row matrices with the handful of operations the solver
//! and estimators need. Factorization is delegated to `faer`.

use faer::sparse::{SparseColMat, Triplet};

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` entries; duplicates are summed
    /// in input order, so equal input gives bitwise-equal output.
    pub fn from_triplets(nrows: usize, ncols: usize, mut entries: Vec<(usize, usize, f64)>) -> SparseMatrix {
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; nrows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last = None;
        for (r, c, v) in entries {
            assert!(r < nrows && c < ncols, "entry ({r}, {c}) outside {nrows}x{ncols} matrix");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseMatrix { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> SparseMatrix {
        SparseMatrix::from_triplets(nrows, ncols, Vec::new())
    }

    pub fn identity(n: usize) -> SparseMatrix {
        SparseMatrix::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Stored entries of row `r` as `(col, value)` pairs.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(i) => self.values[span.start + i],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    /// `yᵀ M x`.
    pub fn bilinear(&self, y: &[f64], x: &[f64]) -> f64 {
        assert_eq!(y.len(), self.nrows);
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|r| y[r] * self.row(r).map(|(c, v)| v * x[c]).sum::<f64>()).sum()
    }

    pub fn transpose(&self) -> SparseMatrix {
        SparseMatrix::from_triplets(self.ncols, self.nrows, self.triplets().map(|(r, c, v)| (c, r, v)).collect())
    }

    pub fn scaled(&self, s: f64) -> SparseMatrix {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= s);
        m
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: f64, other: &SparseMatrix) -> SparseMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let entries = self.triplets().chain(other.triplets().map(|(r, c, v)| (r, c, s * v))).collect();
        SparseMatrix::from_triplets(self.nrows, self.ncols, entries)
    }

    /// Assembles a block matrix. Each block is `(block_row, block_col,
    /// matrix, scale)`; `row_sizes` and `col_sizes` give the block layout.
    pub fn from_blocks(
        row_sizes: &[usize],
        col_sizes: &[usize],
        blocks: &[(usize, usize, &SparseMatrix, f64)],
    ) -> SparseMatrix {
        let offsets = |sizes: &[usize]| {
            sizes
                .iter()
                .scan(0, |acc, &s| {
                    let o = *acc;
                    *acc += s;
                    Some(o)
                })
                .collect::<Vec<_>>()
        };
        let (ro, co) = (offsets(row_sizes), offsets(col_sizes));
        let mut entries = Vec::new();
        for &(bi, bj, m, s) in blocks {
            assert_eq!((m.nrows, m.ncols), (row_sizes[bi], col_sizes[bj]), "block ({bi}, {bj}) has wrong shape");
            entries.extend(m.triplets().map(|(r, c, v)| (ro[bi] + r, co[bj] + c, s * v)));
        }
        SparseMatrix::from_triplets(row_sizes.iter().sum(), col_sizes.iter().sum(), entries)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |M - Mᵀ|` over all entries.
    pub fn asymmetry(&self) -> f64 {
        assert_eq!(self.nrows, self.ncols);
        self.triplets().map(|(r, c, v)| (v - self.get(c, r)).abs()).fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, c, v) in self.triplets() {
            d[r][c] += v;
        }
        d
    }

    /// Symmetric elimination of the dofs flagged in `fixed`: their rows and
    /// columns are cleared and a unit diagonal is inserted.
    pub fn eliminate(&self, fixed: &[bool]) -> SparseMatrix {
        assert_eq!(self.nrows, self.ncols);
        assert_eq!(fixed.len(), self.nrows);
        let mut entries: Vec<_> = self.triplets().filter(|&(r, c, _)| !fixed[r] && !fixed[c]).collect();
        entries.extend((0..self.nrows).filter(|&i| fixed[i]).map(|i| (i, i, 1.0)));
        SparseMatrix::from_triplets(self.nrows, self.ncols, entries)
    }

    /// Right-hand side matching [`SparseMatrix::eliminate`]: moves the
    /// coupling to the prescribed values `g` (read at fixed dofs only) into
    /// `rhs` and writes `g` into the fixed rows.
    pub fn lift(&self, rhs: &mut [f64], fixed: &[bool], g: &[f64]) {
        for r in 0..self.nrows {
            if fixed[r] {
                continue;
            }
            rhs[r] -= self.row(r).filter(|&(c, _)| fixed[c]).map(|(c, v)| v * g[c]).sum::<f64>();
        }
        for r in 0..self.nrows {
            if fixed[r] {
                rhs[r] = g[r];
            }
        }
    }

    pub fn to_faer(&self) -> SparseColMat<usize, f64> {
        let trip: Vec<_> = self.triplets().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &trip).expect("CSR entries are valid triplets")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed_and_lookup_works() {
        let m = SparseMatrix::from_triplets(2, 3, vec![(1, 2, 1.0), (0, 0, 2.0), (1, 2, 0.5), (0, 1, -1.0)]);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(1, 2), 1.5);
        assert_eq!(m.get(1, 0), 0.0);
        assert_eq!(m.mul_vec(&[1.0, 1.0, 2.0]), vec![1.0, 3.0]);
        assert_eq!(m.transpose().get(2, 1), 1.5);
        assert_eq!(m.bilinear(&[1.0, 2.0], &[1.0, 1.0, 2.0]), 7.0);
    }

    #[test]
    fn blocks_and_elimination() {
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0)]);
        let b = SparseMatrix::from_triplets(2, 1, vec![(0, 0, 4.0), (1, 0, 5.0)]);
        let bt = b.transpose();
        let one = SparseMatrix::identity(1);
        let m = SparseMatrix::from_blocks(
            &[2, 1],
            &[2, 1],
            &[(0, 0, &a, 1.0), (0, 1, &b, -1.0), (1, 0, &bt, 1.0), (1, 1, &one, 2.0)],
        );
        assert_eq!(m.get(0, 2), -4.0);
        assert_eq!(m.get(2, 1), 5.0);
        assert_eq!(m.get(2, 2), 2.0);
        assert_eq!(a.asymmetry(), 0.0);
        assert_eq!(m.asymmetry(), 10.0);

        let fixed = [false, true, false];
        let e = m.eliminate(&fixed);
        assert_eq!(e.get(1, 1), 1.0);
        assert_eq!(e.get(0, 1), 0.0);
        assert_eq!(e.get(1, 0), 0.0);
        let mut rhs = vec![1.0, 9.0, 1.0];
        let g = [0.0, 2.0, 0.0];
        m.lift(&mut rhs, &fixed, &g);
        assert_eq!(rhs, vec![1.0 - 2.0, 2.0, 1.0 - 10.0]);
    }
}
