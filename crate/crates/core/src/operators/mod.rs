//! Linear forward operators with exact adjoints.
//!
//! An operator is either a dense row-major matrix or a sparse matrix whose
//! transpose is stored alongside it. Both `apply` and `adjoint_apply` compute
//! every output entry as a sequential sum in a fixed order, so results do not
//! depend on how many threads the rayon pool has.

mod norm;
mod partition;
mod radon;

pub use norm::{operator_norm, power_iteration, PowerIteration, DEFAULT_MAX_ITER, DEFAULT_TOL};
pub use partition::{partition_views, PartitionedProblem, Subset, SubsetPartition};
pub use radon::{radon_build, Geometry};

use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::varexp::{check_finite, Signal};

// Below this many stored weights a single thread is faster.
const PAR_THRESHOLD: usize = 1 << 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Dense,
    Radon,
}

/// Compressed sparse rows with column indices sorted within each row.
#[derive(Debug, Clone)]
pub(crate) struct Csr {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    vals: Vec<f64>,
}

impl Csr {
    pub(crate) fn from_rows(cols: usize, rows: Vec<Vec<(u32, f64)>>) -> Self {
        let nnz = rows.iter().map(Vec::len).sum();
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for row in &rows {
            for &(c, v) in row {
                col_idx.push(c);
                vals.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Csr { rows: rows.len(), cols, row_ptr, col_idx, vals }
    }

    fn row(&self, r: usize) -> (&[u32], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[span.clone()], &self.vals[span])
    }

    /// `out = Mᵀy` by scattering rows. Each output accumulates in ascending
    /// row order from `-0.0`, exactly like a gather over the stored transpose.
    fn mul_transpose_into(&self, y: &[f64], out: &mut [f64]) {
        out.fill(-0.0);
        for (r, &yr) in y.iter().enumerate() {
            let (cols, vals) = self.row(r);
            for (&c, &w) in cols.iter().zip(vals) {
                out[c as usize] += w * yr;
            }
        }
    }

    fn mul_into(&self, x: &[f64], out: &mut [f64]) {
        let row_dot = |r: usize| -> f64 {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(|(&c, &w)| w * x[c as usize]).sum()
        };
        if self.vals.len() >= PAR_THRESHOLD {
            out.par_iter_mut().enumerate().for_each(|(r, o)| *o = row_dot(r));
        } else {
            out.iter_mut().enumerate().for_each(|(r, o)| *o = row_dot(r));
        }
    }

    /// Transpose; entries of each output row stay ordered by source row.
    fn transpose(&self) -> Csr {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.col_idx {
            counts[c as usize + 1] += 1;
        }
        for i in 0..self.cols {
            counts[i + 1] += counts[i];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0u32; self.vals.len()];
        let mut vals = vec![0.0; self.vals.len()];
        for r in 0..self.rows {
            let (cols, ws) = self.row(r);
            for (&c, &w) in cols.iter().zip(ws) {
                let slot = next[c as usize];
                col_idx[slot] = r as u32;
                vals[slot] = w;
                next[c as usize] += 1;
            }
        }
        Csr { rows: self.cols, cols: self.rows, row_ptr, col_idx, vals }
    }

    fn select_rows(&self, rows: &[usize]) -> Csr {
        let picked = rows
            .iter()
            .map(|&r| {
                let (cols, vals) = self.row(r);
                cols.iter().copied().zip(vals.iter().copied()).collect()
            })
            .collect();
        Csr::from_rows(self.cols, picked)
    }
}

#[derive(Debug, Clone)]
enum Repr {
    Dense(Vec<f64>),
    Sparse { forward: Csr, adjoint: Csr },
}

/// A bounded linear map `A: ℝ^cols → ℝ^rows` together with its transpose.
#[derive(Debug, Clone)]
pub struct LinearOperator {
    kind: OperatorKind,
    rows: usize,
    cols: usize,
    repr: Repr,
    geometry: Option<Geometry>,
}

impl LinearOperator {
    /// Dense operator from row-major entries.
    pub fn from_dense(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Empty);
        }
        check_len(rows * cols, data.len())?;
        check_finite(&data)?;
        Ok(Self { kind: OperatorKind::Dense, rows, cols, repr: Repr::Dense(data), geometry: None })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            check_len(cols, row.len())?;
            data.extend_from_slice(row);
        }
        Self::from_dense(rows.len(), cols, data)
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut data = vec![0.0; n * n];
        for (i, &d) in diag.iter().enumerate() {
            data[i * n + i] = d;
        }
        Self::from_dense(n, n, data)
    }

    pub(crate) fn from_csr(kind: OperatorKind, forward: Csr, geometry: Option<Geometry>) -> Self {
        let adjoint = forward.transpose();
        Self {
            kind,
            rows: forward.rows,
            cols: forward.cols,
            repr: Repr::Sparse { forward, adjoint },
            geometry,
        }
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Geometry the operator was built from (Radon operators only).
    pub fn geometry(&self) -> Option<&Geometry> {
        self.geometry.as_ref()
    }

    /// Number of stored weights.
    pub fn nnz(&self) -> usize {
        match &self.repr {
            Repr::Dense(d) => d.len(),
            Repr::Sparse { forward, .. } => forward.vals.len(),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Signal> {
        let mut out = vec![0.0; self.rows];
        self.apply_into(x, &mut out)?;
        Ok(Signal::from_vec_unchecked(out))
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_len(self.cols, x.len())?;
        check_len(self.rows, out.len())?;
        match &self.repr {
            Repr::Dense(d) => {
                let row_dot = |r: usize| -> f64 {
                    d[r * self.cols..(r + 1) * self.cols].iter().zip(x).map(|(a, b)| a * b).sum()
                };
                if d.len() >= PAR_THRESHOLD {
                    out.par_iter_mut().enumerate().for_each(|(r, o)| *o = row_dot(r));
                } else {
                    out.iter_mut().enumerate().for_each(|(r, o)| *o = row_dot(r));
                }
            }
            Repr::Sparse { forward, .. } => forward.mul_into(x, out),
        }
        Ok(())
    }

    pub fn adjoint_apply(&self, y: &[f64]) -> Result<Signal> {
        let mut out = vec![0.0; self.cols];
        self.adjoint_apply_into(y, &mut out)?;
        Ok(Signal::from_vec_unchecked(out))
    }

    pub fn adjoint_apply_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        check_len(self.rows, y.len())?;
        check_len(self.cols, out.len())?;
        match &self.repr {
            Repr::Dense(d) => {
                out.iter_mut().for_each(|o| *o = 0.0);
                for (r, &yr) in y.iter().enumerate() {
                    for (o, a) in out.iter_mut().zip(&d[r * self.cols..(r + 1) * self.cols]) {
                        *o += a * yr;
                    }
                }
            }
            // Scattering wins when the transposed rows are short (wide
            // operators such as view subsets); the gather parallelises.
            Repr::Sparse { forward, adjoint } => {
                let serial = rayon::current_num_threads() == 1 || adjoint.vals.len() < PAR_THRESHOLD;
                if self.rows < self.cols && serial {
                    forward.mul_transpose_into(y, out)
                } else {
                    adjoint.mul_into(y, out)
                }
            }
        }
        Ok(())
    }

    /// Operator made of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.rows) {
            return Err(Error::DimensionMismatch { expected: self.rows, found: bad + 1 });
        }
        if rows.is_empty() {
            return Err(Error::Empty);
        }
        Ok(match &self.repr {
            Repr::Dense(d) => {
                let mut data = Vec::with_capacity(rows.len() * self.cols);
                for &r in rows {
                    data.extend_from_slice(&d[r * self.cols..(r + 1) * self.cols]);
                }
                Self {
                    kind: OperatorKind::Dense,
                    rows: rows.len(),
                    cols: self.cols,
                    repr: Repr::Dense(data),
                    geometry: None,
                }
            }
            Repr::Sparse { forward, .. } => {
                Self::from_csr(self.kind, forward.select_rows(rows), self.geometry.clone())
            }
        })
    }

    /// Row-major dense copy of the matrix.
    pub fn to_dense(&self) -> Vec<f64> {
        match &self.repr {
            Repr::Dense(d) => d.clone(),
            Repr::Sparse { forward, .. } => {
                let mut out = vec![0.0; self.rows * self.cols];
                for r in 0..self.rows {
                    let (cols, vals) = forward.row(r);
                    for (&c, &w) in cols.iter().zip(vals) {
                        out[r * self.cols + c as usize] = w;
                    }
                }
                out
            }
        }
    }

    /// Stored weights of one row as `(column, weight)` pairs.
    pub fn row_entries(&self, r: usize) -> Vec<(usize, f64)> {
        match &self.repr {
            Repr::Dense(d) => d[r * self.cols..(r + 1) * self.cols]
                .iter()
                .enumerate()
                .filter(|(_, w)| **w != 0.0)
                .map(|(c, &w)| (c, w))
                .collect(),
            Repr::Sparse { forward, .. } => {
                let (cols, vals) = forward.row(r);
                cols.iter().map(|&c| c as usize).zip(vals.iter().copied()).collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn example() -> LinearOperator {
        LinearOperator::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap()
    }

    #[test]
    fn scatter_and_gather_adjoints_agree_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<(u32, f64)>> = (0..40)
            .map(|_| {
                let mut cols: Vec<u32> = (0..300).filter(|_| rng.random_bool(0.05)).collect();
                cols.dedup();
                cols.into_iter().map(|c| (c, rng.random_range(-1.0..1.0))).collect()
            })
            .collect();
        let csr = Csr::from_rows(300, rows);
        let t = csr.transpose();
        let y: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (mut a, mut b) = (vec![0.0; 300], vec![0.0; 300]);
        csr.mul_transpose_into(&y, &mut a);
        t.mul_into(&y, &mut b);
        assert!(a.iter().zip(&b).all(|(u, v)| u.to_bits() == v.to_bits()));
    }

    #[test]
    fn dense_arithmetic() {
        let a = example();
        assert_eq!(a.apply(&[2.0, 3.0]).unwrap().as_slice(), &[2.0, 3.0, 5.0]);
        assert_eq!(a.adjoint_apply(&[1.0, 1.0, 1.0]).unwrap().as_slice(), &[2.0, 2.0]);
        assert_eq!(a.apply(&[0.0, 0.0]).unwrap().as_slice(), &[0.0, 0.0, 0.0]);
        let id = LinearOperator::identity(3).unwrap();
        assert_eq!(id.apply(&[1.0, -2.0, 3.0]).unwrap().as_slice(), &[1.0, -2.0, 3.0]);
        assert_eq!(id.adjoint_apply(&[1.0, -2.0, 3.0]).unwrap().as_slice(), &[1.0, -2.0, 3.0]);
    }

    #[test]
    fn dimension_errors() {
        let a = example();
        assert!(matches!(a.apply(&[1.0]), Err(Error::DimensionMismatch { expected: 2, found: 1 })));
        assert!(matches!(a.adjoint_apply(&[1.0]), Err(Error::DimensionMismatch { expected: 3, found: 1 })));
        assert!(LinearOperator::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(LinearOperator::from_dense(2, 2, vec![1.0, f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn sparse_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); 7];
        for row in rows.iter_mut() {
            for c in 0..5u32 {
                if rng.random_bool(0.5) {
                    row.push((c, rng.random_range(-1.0..1.0)));
                }
            }
        }
        let sparse = LinearOperator::from_csr(OperatorKind::Radon, Csr::from_rows(5, rows), None);
        let dense = LinearOperator::from_dense(7, 5, sparse.to_dense()).unwrap();
        let x: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (a, b) = (sparse.apply(&x).unwrap(), dense.apply(&x).unwrap());
        a.iter().zip(b.iter()).for_each(|(u, v)| assert!((u - v).abs() < 1e-14));
        let (a, b) = (sparse.adjoint_apply(&y).unwrap(), dense.adjoint_apply(&y).unwrap());
        a.iter().zip(b.iter()).for_each(|(u, v)| assert!((u - v).abs() < 1e-14));

        let sub = sparse.select_rows(&[4, 1]).unwrap();
        let full = sparse.apply(&x).unwrap();
        assert_eq!(sub.apply(&x).unwrap().as_slice(), &[full[4], full[1]]);
    }
}
