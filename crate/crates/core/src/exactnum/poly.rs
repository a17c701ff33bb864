use std::collections::{BTreeMap, HashMap};
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

use super::field::{ExactCoeff, Field};

/// Default cap on intermediate term counts in [`poly_det`].
pub const DEFAULT_TERM_CAP: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolyError {
    #[error("determinant expansion exceeds {cap} terms")]
    SizeBudgetExceeded { cap: usize },
    #[error("matrix is not square")]
    NonSquare,
    #[error("entries live in different polynomial rings")]
    RingMismatch,
    #[error("an entry is not multihomogeneous")]
    NotHomogeneous,
}

/// Polynomial in groups of `width` variables, one group per factor label.
///
/// Variable `c` of factor position `f` has flat index `f * width + c`;
/// monomials are stored as flat exponent vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiPoly<T: ExactCoeff> {
    factors: Vec<usize>,
    width: usize,
    terms: BTreeMap<Vec<u32>, T>,
}

impl<T: ExactCoeff> MultiPoly<T> {
    pub fn zero(factors: &[usize], width: usize) -> Self {
        MultiPoly { factors: factors.to_vec(), width, terms: BTreeMap::new() }
    }

    pub fn constant(factors: &[usize], width: usize, c: T) -> Self {
        let mut p = Self::zero(factors, width);
        p.add_term(vec![0; factors.len() * width], c);
        p
    }

    /// The coordinate variable `x^{factor}_{coord}`.
    pub fn var(factors: &[usize], width: usize, factor: usize, coord: usize) -> Self {
        let pos = factors.iter().position(|&f| f == factor).expect("factor label in ring");
        let mut e = vec![0; factors.len() * width];
        e[pos * width + coord] = 1;
        let mut p = Self::zero(factors, width);
        p.add_term(e, T::one());
        p
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn terms(&self) -> &BTreeMap<Vec<u32>, T> {
        &self.terms
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, exps: Vec<u32>, c: T) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&exps) {
            Some(v) => {
                *v = v.clone() + c;
                if v.is_zero() {
                    self.terms.remove(&exps);
                }
            }
            None => {
                self.terms.insert(exps, c);
            }
        }
    }

    fn degree_of(&self, exps: &[u32]) -> Vec<u32> {
        exps.chunks(self.width).map(|c| c.iter().sum()).collect()
    }

    /// Common per-factor degree of all terms; `None` for zero or mixed degrees.
    pub fn multidegree(&self) -> Option<Vec<u32>> {
        let mut it = self.terms.keys().map(|e| self.degree_of(e));
        let first = it.next()?;
        it.all(|d| d == first).then_some(first)
    }

    pub fn same_ring(&self, other: &Self) -> bool {
        self.factors == other.factors && self.width == other.width
    }

    /// Evaluates at one coordinate vector per factor (in ring order).
    pub fn eval<F: Field>(&self, ctx: &F::Ctx, coords: &[Vec<F>]) -> F {
        assert_eq!(coords.len(), self.factors.len(), "one vector per factor");
        let mut acc = F::zero_in(ctx);
        for (exps, c) in &self.terms {
            let mut t: F = c.to_field(ctx);
            for (k, &e) in exps.iter().enumerate() {
                if e > 0 {
                    t = t * coords[k / self.width][k % self.width].pow(e as u64);
                }
            }
            acc = acc + t;
        }
        acc
    }

    /// Product with term-count guard.
    pub fn mul_capped(&self, rhs: &Self, cap: usize) -> Result<Self, PolyError> {
        if !self.same_ring(rhs) {
            return Err(PolyError::RingMismatch);
        }
        let mut out = Self::zero(&self.factors, self.width);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &rhs.terms {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca.clone() * cb.clone());
            }
            if out.terms.len() > cap {
                return Err(PolyError::SizeBudgetExceeded { cap });
            }
        }
        Ok(out)
    }
}

impl<T: ExactCoeff> Add for &MultiPoly<T> {
    type Output = MultiPoly<T>;
    fn add(self, rhs: &MultiPoly<T>) -> MultiPoly<T> {
        assert!(self.same_ring(rhs), "ring mismatch");
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }
}

impl<T: ExactCoeff> Neg for &MultiPoly<T> {
    type Output = MultiPoly<T>;
    fn neg(self) -> MultiPoly<T> {
        let mut out = self.clone();
        for v in out.terms.values_mut() {
            *v = -v.clone();
        }
        out
    }
}

impl<T: ExactCoeff> Sub for &MultiPoly<T> {
    type Output = MultiPoly<T>;
    fn sub(self, rhs: &MultiPoly<T>) -> MultiPoly<T> {
        self + &(-rhs)
    }
}

impl<T: ExactCoeff> Mul for &MultiPoly<T> {
    type Output = MultiPoly<T>;
    fn mul(self, rhs: &MultiPoly<T>) -> MultiPoly<T> {
        self.mul_capped(rhs, usize::MAX).expect("same ring")
    }
}

/// Exact determinant of a square matrix of multihomogeneous polynomials.
///
/// Laplace expansion along rows with memoised minors keyed by column subset.
pub fn poly_det<T: ExactCoeff>(m: &[Vec<MultiPoly<T>>], cap: usize) -> Result<MultiPoly<T>, PolyError> {
    let n = m.len();
    if m.iter().any(|r| r.len() != n) {
        return Err(PolyError::NonSquare);
    }
    let Some(first) = m.first().and_then(|r| r.first()) else {
        return Err(PolyError::NonSquare);
    };
    if m.iter().flatten().any(|p| !p.same_ring(first)) {
        return Err(PolyError::RingMismatch);
    }
    if m.iter().flatten().any(|p| !p.is_zero() && p.multidegree().is_none()) {
        return Err(PolyError::NotHomogeneous);
    }
    assert!(n <= 16, "matrix too large for subset memoisation");
    let mut memo: HashMap<u32, MultiPoly<T>> = HashMap::new();
    minor_det(m, 0, (1u32 << n) - 1, cap, &mut memo)
}

fn minor_det<T: ExactCoeff>(
    m: &[Vec<MultiPoly<T>>],
    row: usize,
    cols: u32,
    cap: usize,
    memo: &mut HashMap<u32, MultiPoly<T>>,
) -> Result<MultiPoly<T>, PolyError> {
    let proto = &m[0][0];
    if cols == 0 {
        return Ok(MultiPoly::constant(proto.factors(), proto.width(), T::one()));
    }
    if let Some(p) = memo.get(&cols) {
        return Ok(p.clone());
    }
    let mut acc = MultiPoly::zero(proto.factors(), proto.width());
    let mut sign_neg = false;
    for c in 0..m.len() {
        if cols & (1 << c) == 0 {
            continue;
        }
        let entry = &m[row][c];
        if !entry.is_zero() {
            let sub = minor_det(m, row + 1, cols & !(1 << c), cap, memo)?;
            let term = entry.mul_capped(&sub, cap)?;
            acc = if sign_neg { &acc - &term } else { &acc + &term };
            if acc.num_terms() > cap {
                return Err(PolyError::SizeBudgetExceeded { cap });
            }
        }
        sign_neg = !sign_neg;
    }
    memo.insert(cols, acc.clone());
    Ok(acc)
}
