use std::fmt;
use std::ops::{Index, IndexMut, Mul};

use thiserror::Error;

use super::field::Field;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatrixError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NonSquare { rows: usize, cols: usize },
    #[error("expected rank {expected}, found {found}")]
    WrongRank { expected: usize, found: usize },
    #[error("dimension mismatch: {0}")]
    Shape(String),
}

/// Dense row-major matrix over an exact field.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct DenseMatrix<F: Field> {
    rows: usize,
    cols: usize,
    ctx: F::Ctx,
    entries: Vec<F>,
}

impl<F: Field> DenseMatrix<F> {
    pub fn zeros(ctx: &F::Ctx, rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, ctx: ctx.clone(), entries: vec![F::zero_in(ctx); rows * cols] }
    }

    pub fn identity(ctx: &F::Ctx, n: usize) -> Self {
        let mut m = Self::zeros(ctx, n, n);
        for i in 0..n {
            m[(i, i)] = F::one_in(ctx);
        }
        m
    }

    pub fn from_rows(ctx: &F::Ctx, rows: Vec<Vec<F>>) -> Result<Self, MatrixError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(MatrixError::Shape("ragged rows".into()));
        }
        let entries: Vec<F> = rows.into_iter().flatten().collect();
        if entries.iter().any(|e| e.ctx() != *ctx) {
            return Err(MatrixError::Shape("entries from a different field".into()));
        }
        Ok(DenseMatrix { rows: r, cols: c, ctx: ctx.clone(), entries })
    }

    pub fn from_i64(ctx: &F::Ctx, rows: &[&[i64]]) -> Self {
        let lifted = rows.iter().map(|r| r.iter().map(|&v| F::from_i64(ctx, v)).collect()).collect();
        Self::from_rows(ctx, lifted).expect("rectangular input")
    }

    pub fn from_fn(ctx: &F::Ctx, rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> F) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, ctx: ctx.clone(), entries }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn ctx(&self) -> &F::Ctx {
        &self.ctx
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<F> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(&self.ctx, self.cols, self.rows, |i, j| self[(j, i)].clone())
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(F::is_zero)
    }

    pub fn scale(&self, s: &F) -> Self {
        Self::from_fn(&self.ctx, self.rows, self.cols, |i, j| self[(i, j)].clone() * s.clone())
    }

    pub fn mul_vec(&self, v: &[F]) -> Vec<F> {
        assert_eq!(v.len(), self.cols, "vector length");
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(F::zero_in(&self.ctx), |acc, (a, b)| acc + a.clone() * b.clone())
            })
            .collect()
    }

    /// Row echelon form by ordinary elimination; returns the pivot columns.
    fn echelon(&mut self) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            let Some(p) = (r..self.rows).find(|&i| !self[(i, c)].is_zero()) else {
                continue;
            };
            self.swap_rows(r, p);
            let inv = self[(r, c)].inverse().expect("nonzero pivot");
            for j in c..self.cols {
                self[(r, j)] = self[(r, j)].clone() * inv.clone();
            }
            for i in 0..self.rows {
                if i != r && !self[(i, c)].is_zero() {
                    let f = self[(i, c)].clone();
                    for j in c..self.cols {
                        let d = f.clone() * self[(r, j)].clone();
                        self[(i, j)] = self[(i, j)].clone() - d;
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            for j in 0..self.cols {
                self.entries.swap(a * self.cols + j, b * self.cols + j);
            }
        }
    }

    pub fn rank(&self) -> usize {
        self.clone().echelon().len()
    }

    pub fn det(&self) -> Result<F, MatrixError> {
        self.require_square()?;
        let n = self.rows;
        let mut m = self.clone();
        let mut det = F::one_in(&self.ctx);
        for c in 0..n {
            let Some(p) = (c..n).find(|&i| !m[(i, c)].is_zero()) else {
                return Ok(F::zero_in(&self.ctx));
            };
            if p != c {
                m.swap_rows(p, c);
                det = -det;
            }
            let pivot = m[(c, c)].clone();
            det = det * pivot.clone();
            let inv = pivot.inverse().expect("nonzero pivot");
            for i in c + 1..n {
                if m[(i, c)].is_zero() {
                    continue;
                }
                let f = m[(i, c)].clone() * inv.clone();
                for j in c..n {
                    let d = f.clone() * m[(c, j)].clone();
                    m[(i, j)] = m[(i, j)].clone() - d;
                }
            }
        }
        Ok(det)
    }

    /// Basis of the right kernel.
    pub fn kernel(&self) -> Vec<Vec<F>> {
        let mut m = self.clone();
        let pivots = m.echelon();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        free.iter()
            .map(|&fc| {
                let mut v = vec![F::zero_in(&self.ctx); self.cols];
                v[fc] = F::one_in(&self.ctx);
                for (r, &pc) in pivots.iter().enumerate() {
                    v[pc] = -m[(r, fc)].clone();
                }
                v
            })
            .collect()
    }

    /// The unique projective kernel point of a square matrix of corank one,
    /// scaled so its first nonzero coordinate is 1.
    pub fn corank1_kernel(&self) -> Result<Vec<F>, MatrixError> {
        self.require_square()?;
        let mut basis = self.kernel();
        let rank = self.cols - basis.len();
        if basis.len() != 1 {
            return Err(MatrixError::WrongRank { expected: self.rows.saturating_sub(1), found: rank });
        }
        Ok(normalize_projective(basis.pop().unwrap()).expect("kernel vector is nonzero"))
    }

    pub fn minor(&self, skip_row: usize, skip_col: usize) -> Self {
        let rows = (0..self.rows).filter(|&i| i != skip_row);
        let mut entries = Vec::with_capacity((self.rows - 1) * (self.cols - 1));
        for i in rows {
            for j in (0..self.cols).filter(|&j| j != skip_col) {
                entries.push(self[(i, j)].clone());
            }
        }
        DenseMatrix { rows: self.rows - 1, cols: self.cols - 1, ctx: self.ctx.clone(), entries }
    }

    /// Classical adjugate: `adj[j][i] = (-1)^(i+j) det(minor(i, j))`.
    pub fn adjugate(&self) -> Result<Self, MatrixError> {
        self.require_square()?;
        let n = self.rows;
        if n == 0 {
            return Ok(self.clone());
        }
        if n == 1 {
            return Ok(Self::identity(&self.ctx, 1));
        }
        let mut adj = Self::zeros(&self.ctx, n, n);
        for i in 0..n {
            for j in 0..n {
                let d = self.minor(i, j).det()?;
                adj[(j, i)] = if (i + j) % 2 == 0 { d } else { -d };
            }
        }
        Ok(adj)
    }

    fn require_square(&self) -> Result<(), MatrixError> {
        if self.is_square() {
            Ok(())
        } else {
            Err(MatrixError::NonSquare { rows: self.rows, cols: self.cols })
        }
    }
}

/// Scales a vector so its first nonzero coordinate is 1; `None` for the zero vector.
pub fn normalize_projective<F: Field>(mut v: Vec<F>) -> Option<Vec<F>> {
    let lead = v.iter().find(|x| !x.is_zero())?.clone();
    let inv = lead.inverse().expect("nonzero");
    for x in v.iter_mut() {
        *x = x.clone() * inv.clone();
    }
    Some(v)
}

impl<F: Field> Index<(usize, usize)> for DenseMatrix<F> {
    type Output = F;
    fn index(&self, (i, j): (usize, usize)) -> &F {
        &self.entries[i * self.cols + j]
    }
}

impl<F: Field> IndexMut<(usize, usize)> for DenseMatrix<F> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut F {
        &mut self.entries[i * self.cols + j]
    }
}

impl<F: Field> Mul for &DenseMatrix<F> {
    type Output = DenseMatrix<F>;
    fn mul(self, rhs: &DenseMatrix<F>) -> DenseMatrix<F> {
        assert_eq!(self.cols, rhs.rows, "inner dimensions");
        DenseMatrix::from_fn(&self.ctx, self.rows, rhs.cols, |i, j| {
            (0..self.cols).fold(F::zero_in(&self.ctx), |acc, k| {
                acc + self[(i, k)].clone() * rhs[(k, j)].clone()
            })
        })
    }
}

impl<F: Field> fmt::Debug for DenseMatrix<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[F]> = (0..self.rows).map(|i| self.row(i)).collect();
        f.debug_list().entries(rows).finish()
    }
}

#[cfg(test)]
mod tests {
    use num_rational::BigRational;

    use super::*;
    use crate::exactnum::{ratio, Gf, GfField, RationalField};

    fn q(rows: &[&[i64]]) -> DenseMatrix<BigRational> {
        DenseMatrix::from_i64(&RationalField, rows)
    }

    #[test]
    fn rank_examples() {
        let f3 = GfField::finite(3, 1).unwrap();
        assert_eq!(DenseMatrix::<Gf>::zeros(&f3, 2, 2).rank(), 0);
        assert_eq!(DenseMatrix::<BigRational>::identity(&RationalField, 3).rank(), 3);
        assert_eq!(q(&[&[1, 2], &[2, 4]]).rank(), 1);
        assert_eq!(DenseMatrix::<BigRational>::zeros(&RationalField, 0, 0).rank(), 0);
    }

    #[test]
    fn det_examples() {
        assert_eq!(q(&[&[0, 0], &[0, 1]]).det().unwrap(), ratio(0, 1));
        assert_eq!(DenseMatrix::<BigRational>::identity(&RationalField, 4).det().unwrap(), ratio(1, 1));
        assert_eq!(q(&[&[1, 2], &[3, 4]]).det().unwrap(), ratio(-2, 1));
        assert_eq!(
            q(&[&[1, 2, 3], &[4, 5, 6]]).det(),
            Err(MatrixError::NonSquare { rows: 2, cols: 3 })
        );
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(q(&[&[0, 0], &[0, 1]]).corank1_kernel().unwrap(), vec![ratio(1, 1), ratio(0, 1)]);
        assert_eq!(q(&[&[1, 2], &[2, 4]]).corank1_kernel().unwrap(), vec![ratio(1, 1), ratio(-1, 2)]);
        assert_eq!(
            q(&[&[0, 0], &[0, 0]]).corank1_kernel(),
            Err(MatrixError::WrongRank { expected: 1, found: 0 })
        );
        assert_eq!(
            q(&[&[1, 0], &[0, 1]]).corank1_kernel(),
            Err(MatrixError::WrongRank { expected: 1, found: 2 })
        );
    }

    #[test]
    fn adjugate_examples() {
        let id = DenseMatrix::<BigRational>::identity(&RationalField, 3);
        assert_eq!(id.adjugate().unwrap(), id);
        assert_eq!(q(&[&[1, 2], &[3, 4]]).adjugate().unwrap(), q(&[&[4, -2], &[-3, 1]]));
    }
}
