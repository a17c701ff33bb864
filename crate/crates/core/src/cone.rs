//! Rational polyhedral cones with synchronized generator/facet descriptions
//! (double description method) and small integer-matrix helpers.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Int = i128;
pub type Vector = Vec<Int>;
/// Row-major integer matrix.
pub type IMatrix = Vec<Vec<Int>>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConeError {
    #[error("cone contains a line")]
    NotPointed,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("matrix is not unimodular")]
    NotUnimodular,
}

/// A pointed rational polyhedral cone.
///
/// `generators` are the primitive extreme rays; `facets` the primitive inward
/// facet normals, reduced modulo the span of `equations`, which cut out the
/// linear span. All three lists are sorted, so equal cones compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConeRP {
    dim: usize,
    generators: Vec<Vector>,
    facets: Vec<Vector>,
    equations: Vec<Vector>,
}

pub fn dot(a: &[Int], b: &[Int]) -> Int {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn gcd_all(v: &[Int]) -> Int {
    v.iter().fold(0, |g, &x| g.gcd(&x))
}

/// Divides by the gcd of the entries.
pub fn primitive(mut v: Vector) -> Vector {
    let g = gcd_all(&v);
    if g > 1 {
        for x in v.iter_mut() {
            *x /= g;
        }
    }
    v
}

/// Rank over the rationals by fraction-free elimination.
pub fn rank(rows: &[Vector]) -> usize {
    let mut m: Vec<Vector> = rows.iter().filter(|r| r.iter().any(|&x| x != 0)).cloned().collect();
    let Some(cols) = m.first().map(Vec::len) else { return 0 };
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..m.len()).find(|&i| m[i][c] != 0) else { continue };
        m.swap(r, p);
        let pivot = m[r].clone();
        for row in m.iter_mut().skip(r + 1) {
            if row[c] != 0 {
                let f = row[c];
                for k in 0..cols {
                    row[k] = row[k] * pivot[c] - f * pivot[k];
                }
                *row = primitive(std::mem::take(row));
            }
        }
        r += 1;
        if r == m.len() {
            break;
        }
    }
    r
}

/// Double description: `{x : a.x >= 0 for a in ineqs}` as `span(lines) + cone(rays)`.
fn double_description(dim: usize, ineqs: &[Vector]) -> (Vec<Vector>, Vec<Vector>) {
    let mut lines: Vec<Vector> = (0..dim)
        .map(|k| {
            let mut e = vec![0; dim];
            e[k] = 1;
            e
        })
        .collect();
    let mut rays: Vec<Vector> = Vec::new();
    let mut processed: Vec<&Vector> = Vec::new();
    for a in ineqs {
        if a.iter().all(|&x| x == 0) {
            continue;
        }
        if let Some(pos) = lines.iter().position(|l| dot(a, l) != 0) {
            let mut l = lines.swap_remove(pos);
            if dot(a, &l) < 0 {
                l.iter_mut().for_each(|x| *x = -*x);
            }
            let al = dot(a, &l);
            let shift = |v: &Vector| -> Vector {
                let av = dot(a, v);
                primitive(v.iter().zip(&l).map(|(x, y)| al * x - av * y).collect())
            };
            lines = lines.iter().map(shift).filter(|v| v.iter().any(|&x| x != 0)).collect();
            rays = rays.iter().map(shift).collect();
            rays.push(primitive(l));
            processed.push(a);
            continue;
        }
        processed.push(a);
        let vals: Vec<Int> = rays.iter().map(|r| dot(a, r)).collect();
        let zero_set = |r: &Vector| -> Vec<bool> { processed.iter().map(|b| dot(b, r) == 0).collect() };
        let zs: Vec<Vec<bool>> = rays.iter().map(zero_set).collect();
        let mut next: Vec<Vector> = Vec::new();
        for (k, r) in rays.iter().enumerate() {
            if vals[k] >= 0 {
                next.push(r.clone());
            }
        }
        for p in (0..rays.len()).filter(|&k| vals[k] > 0) {
            for m in (0..rays.len()).filter(|&k| vals[k] < 0) {
                let common: Vec<bool> = zs[p].iter().zip(&zs[m]).map(|(x, y)| *x && *y).collect();
                let adjacent = (0..rays.len()).filter(|&k| k != p && k != m).all(|k| {
                    !common.iter().zip(&zs[k]).all(|(c, z)| !*c || *z)
                });
                if adjacent {
                    let v: Vector = rays[m].iter().zip(&rays[p]).map(|(x, y)| vals[p] * x - vals[m] * y).collect();
                    next.push(primitive(v));
                }
            }
        }
        rays = next;
    }
    (lines, rays)
}

fn to_int_primitive(v: &[BigRational]) -> Vector {
    let den = v.iter().fold(BigInt::from(1), |acc, x| acc.lcm(x.denom()));
    let ints: Vec<BigInt> = v.iter().map(|x| (x * BigRational::from_integer(den.clone())).to_integer()).collect();
    let g = ints.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
    ints.iter()
        .map(|x| if g.is_zero() { x.clone() } else { x / &g })
        .map(|x| x.to_i128().expect("coordinate fits in i128"))
        .collect()
}

/// Row-reduced, primitive basis of the row space (canonical).
fn rref_primitive(rows: &[Vector], dim: usize) -> Vec<Vector> {
    let mut m: Vec<Vec<BigRational>> = rows
        .iter()
        .map(|r| r.iter().map(|&x| BigRational::from_integer(BigInt::from(x))).collect())
        .collect();
    let mut r = 0;
    for c in 0..dim {
        let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else { continue };
        m.swap(r, p);
        let inv = m[r][c].recip();
        for x in m[r].iter_mut() {
            *x *= &inv;
        }
        let pivot = m[r].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i != r && !row[c].is_zero() {
                let f = row[c].clone();
                for (x, y) in row.iter_mut().zip(&pivot) {
                    *x -= &f * y;
                }
            }
        }
        r += 1;
    }
    m.truncate(r);
    m.iter().map(|row| to_int_primitive(row)).collect()
}

/// Reduces `v` modulo the span of RREF rows (zeroing their pivot columns).
fn reduce_mod(v: &[Int], rref: &[Vector]) -> Vector {
    let mut w: Vec<BigRational> = v.iter().map(|&x| BigRational::from_integer(BigInt::from(x))).collect();
    for row in rref {
        let c = row.iter().position(|&x| x != 0).expect("nonzero row");
        if !w[c].is_zero() {
            let f = &w[c] / BigRational::from_integer(BigInt::from(row[c]));
            for (x, &y) in w.iter_mut().zip(row) {
                *x -= &f * BigRational::from_integer(BigInt::from(y));
            }
        }
    }
    to_int_primitive(&w)
}

fn sorted_unique(mut v: Vec<Vector>) -> Vec<Vector> {
    v.sort();
    v.dedup();
    v
}

impl ConeRP {
    /// Cone spanned by `vectors` (double description; redundant generators pruned).
    pub fn from_generators(dim: usize, vectors: &[Vector]) -> Result<Self, ConeError> {
        for v in vectors {
            if v.len() != dim {
                return Err(ConeError::Dimension { expected: dim, got: v.len() });
            }
        }
        let gens: Vec<Vector> = vectors.iter().filter(|v| v.iter().any(|&x| x != 0)).cloned().map(primitive).collect();
        // Dual cone: lineality = equations, extreme rays = facet normals.
        let (dual_lines, dual_rays) = double_description(dim, &gens);
        let equations = rref_primitive(&dual_lines, dim);
        let facets = sorted_unique(dual_rays.iter().map(|f| reduce_mod(f, &equations)).collect());
        let mut ineqs = facets.clone();
        for e in &equations {
            ineqs.push(e.clone());
            ineqs.push(e.iter().map(|x| -x).collect());
        }
        let (lines, rays) = double_description(dim, &ineqs);
        if !lines.is_empty() {
            return Err(ConeError::NotPointed);
        }
        let cone = ConeRP { dim, generators: sorted_unique(rays), facets, equations };
        cone.assert_consistent();
        Ok(cone)
    }

    /// `{x : f.x >= 0 for f in ineqs, e.x = 0 for e in eqs}`.
    pub fn from_inequalities(dim: usize, ineqs: &[Vector], eqs: &[Vector]) -> Result<Self, ConeError> {
        let mut all: Vec<Vector> = ineqs.to_vec();
        for e in eqs {
            all.push(e.clone());
            all.push(e.iter().map(|x| -x).collect());
        }
        for v in &all {
            if v.len() != dim {
                return Err(ConeError::Dimension { expected: dim, got: v.len() });
            }
        }
        let (lines, rays) = double_description(dim, &all);
        if !lines.is_empty() {
            return Err(ConeError::NotPointed);
        }
        ConeRP::from_generators(dim, &rays)
    }

    /// The cone spanned by the standard basis.
    pub fn orthant(dim: usize) -> Self {
        let gens: Vec<Vector> = (0..dim)
            .map(|k| {
                let mut e = vec![0; dim];
                e[k] = 1;
                e
            })
            .collect();
        ConeRP::from_generators(dim, &gens).expect("orthant is pointed")
    }

    /// Panics if the generator and facet descriptions disagree.
    pub fn assert_consistent(&self) {
        for g in &self.generators {
            assert!(self.facets.iter().all(|f| dot(f, g) >= 0), "generator violates a facet");
            assert!(self.equations.iter().all(|e| dot(e, g) == 0), "generator violates an equation");
        }
        for f in &self.facets {
            let on = self.generators.iter().filter(|g| dot(f, g) == 0).cloned().collect::<Vec<_>>();
            assert_eq!(rank(&on) + 1, self.dimension(), "facet not spanned by generators");
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.dim
    }

    pub fn generators(&self) -> &[Vector] {
        &self.generators
    }

    pub fn facets(&self) -> &[Vector] {
        &self.facets
    }

    pub fn equations(&self) -> &[Vector] {
        &self.equations
    }

    /// Dimension of the linear span.
    pub fn dimension(&self) -> usize {
        self.dim - self.equations.len()
    }

    pub fn is_full_dimensional(&self) -> bool {
        self.equations.is_empty()
    }

    pub fn contains(&self, v: &[Int]) -> bool {
        self.facets.iter().all(|f| dot(f, v) >= 0) && self.equations.iter().all(|e| dot(e, v) == 0)
    }

    /// `v` lies in the relative interior.
    pub fn contains_in_interior(&self, v: &[Int]) -> bool {
        self.facets.iter().all(|f| dot(f, v) > 0) && self.equations.iter().all(|e| dot(e, v) == 0)
    }

    pub fn contains_cone(&self, other: &ConeRP) -> bool {
        other.generators.iter().all(|g| self.contains(g))
    }

    pub fn intersect(&self, other: &ConeRP) -> ConeRP {
        assert_eq!(self.dim, other.dim, "ambient dimensions differ");
        let ineqs: Vec<Vector> = self.facets.iter().chain(&other.facets).cloned().collect();
        let eqs: Vec<Vector> = self.equations.iter().chain(&other.equations).cloned().collect();
        ConeRP::from_inequalities(self.dim, &ineqs, &eqs).expect("subcone of a pointed cone")
    }

    /// Interiors of two full-dimensional cones meet.
    pub fn interiors_overlap(&self, other: &ConeRP) -> bool {
        if self.separated_by_facet(other) {
            return false;
        }
        self.intersect(other).dimension() == self.dim
    }

    /// Some facet of either cone weakly separates the two.
    pub fn separated_by_facet(&self, other: &ConeRP) -> bool {
        let sep = |a: &ConeRP, b: &ConeRP| a.facets.iter().any(|f| b.generators.iter().all(|g| dot(f, g) <= 0));
        sep(self, other) || sep(other, self)
    }

    /// The face cut out by a valid inequality.
    pub fn face(&self, normal: &[Int]) -> ConeRP {
        let gens: Vec<Vector> = self.generators.iter().filter(|g| dot(normal, g) == 0).cloned().collect();
        ConeRP::from_generators(self.dim, &gens).expect("faces are pointed")
    }

    /// `a` is a face of `self`.
    pub fn has_face(&self, a: &ConeRP) -> bool {
        if !self.contains_cone(a) {
            return false;
        }
        if a.generators.is_empty() {
            return true;
        }
        // The smallest face containing `a` is cut by the facets tight on all of `a`.
        let tight: Vec<&Vector> = self.facets.iter().filter(|f| a.generators.iter().all(|g| dot(f, g) == 0)).collect();
        let gens: Vec<Vector> =
            self.generators.iter().filter(|g| tight.iter().all(|f| dot(f, g) == 0)).cloned().collect();
        ConeRP::from_generators(self.dim, &gens).expect("faces are pointed") == *a
    }

    /// Image under an integer matrix acting on column vectors.
    pub fn transform(&self, m: &IMatrix) -> ConeRP {
        let gens: Vec<Vector> = self.generators.iter().map(|g| mat_vec(m, g)).collect();
        ConeRP::from_generators(self.dim, &gens).expect("image of a pointed cone under an invertible map")
    }

    /// Image under a unimodular `m` with inverse `m_inv`, without re-running
    /// the double description (full-dimensional cones; others fall back).
    pub fn transform_unimodular(&self, m: &IMatrix, m_inv: &IMatrix) -> ConeRP {
        if !self.is_full_dimensional() {
            return self.transform(m);
        }
        debug_assert_eq!(mat_mul(m, m_inv), identity(self.dim));
        ConeRP {
            dim: self.dim,
            generators: sorted_unique(self.generators.iter().map(|g| primitive(mat_vec(m, g))).collect()),
            facets: sorted_unique(self.facets.iter().map(|f| primitive(vec_mat(f, m_inv))).collect()),
            equations: Vec::new(),
        }
    }

    /// Triangulation into simplicial cones (pulling from the first generator).
    pub fn triangulate(&self) -> Vec<Vec<Vector>> {
        let k = self.dimension();
        if self.generators.len() <= k {
            return vec![self.generators.clone()];
        }
        let apex = &self.generators[0];
        let mut out = Vec::new();
        for f in self.facets.iter().filter(|f| dot(f, apex) > 0) {
            for mut simplex in self.face(f).triangulate() {
                simplex.push(apex.clone());
                out.push(simplex);
            }
        }
        out
    }

    /// `sum |det| / prod(xi.r)` over a triangulation: `d!` times the volume of
    /// `{x in C : xi.x <= 1}`. `xi` must be positive on every generator.
    pub fn volume(&self, xi: &[Int]) -> BigRational {
        assert!(self.is_full_dimensional(), "volume of a full-dimensional cone");
        let mut total = BigRational::zero();
        for s in self.triangulate() {
            let det = BigInt::from(det_i128(&transpose(&s)).abs());
            let mut den = BigInt::from(1);
            for r in &s {
                let v = dot(xi, r);
                assert!(v > 0, "xi must be positive on the cone");
                den *= BigInt::from(v);
            }
            total += BigRational::new(det, den);
        }
        total
    }
}

impl PartialOrd for ConeRP {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ConeRP {
    fn cmp(&self, other: &Self) -> Ordering {
        (&self.generators, &self.equations).cmp(&(&other.generators, &other.equations))
    }
}

pub fn identity(n: usize) -> IMatrix {
    (0..n).map(|i| (0..n).map(|j| Int::from(i == j)).collect()).collect()
}

pub fn mat_mul(a: &IMatrix, b: &IMatrix) -> IMatrix {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter().map(|row| (0..cols).map(|j| (0..inner).map(|k| row[k] * b[k][j]).sum()).collect()).collect()
}

pub fn mat_vec(a: &IMatrix, v: &[Int]) -> Vector {
    a.iter().map(|row| dot(row, v)).collect()
}

/// Row vector times matrix.
pub fn vec_mat(v: &[Int], a: &IMatrix) -> Vector {
    let cols = a.first().map_or(0, Vec::len);
    (0..cols).map(|j| v.iter().zip(a).map(|(x, row)| x * row[j]).sum()).collect()
}

pub fn transpose(a: &[Vector]) -> IMatrix {
    let cols = a.first().map_or(0, Vec::len);
    (0..cols).map(|j| a.iter().map(|row| row[j]).collect()).collect()
}

/// Determinant by Bareiss elimination.
pub fn det_i128(a: &IMatrix) -> Int {
    let n = a.len();
    let mut m = a.clone();
    let mut sign = 1;
    let mut prev = 1;
    for k in 0..n {
        if m[k][k] == 0 {
            let Some(p) = (k + 1..n).find(|&i| m[i][k] != 0) else { return 0 };
            m.swap(k, p);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) / prev;
            }
        }
        prev = m[k][k];
    }
    if n == 0 {
        1
    } else {
        sign * m[n - 1][n - 1]
    }
}

/// Inverse of a unimodular matrix.
pub fn inverse_unimodular(a: &IMatrix) -> Result<IMatrix, ConeError> {
    let n = a.len();
    let d = det_i128(a);
    if d.abs() != 1 {
        return Err(ConeError::NotUnimodular);
    }
    let mut inv = vec![vec![0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let minor: IMatrix = (0..n)
                .filter(|&r| r != j)
                .map(|r| (0..n).filter(|&c| c != i).map(|c| a[r][c]).collect())
                .collect();
            let cof = if (i + j) % 2 == 0 { det_i128(&minor) } else { -det_i128(&minor) };
            inv[i][j] = cof * d;
        }
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[i128]) -> Vector {
        x.to_vec()
    }

    #[test]
    fn standard_basis_2d() {
        let c = ConeRP::from_generators(2, &[v(&[1, 0]), v(&[0, 1])]).unwrap();
        assert_eq!(c.facets(), &[v(&[0, 1]), v(&[1, 0])]);
        assert_eq!(c.dimension(), 2);
    }

    #[test]
    fn redundant_generator_pruned() {
        let c = ConeRP::from_generators(2, &[v(&[1, 0]), v(&[1, 1]), v(&[0, 1])]).unwrap();
        assert_eq!(c.generators(), &[v(&[0, 1]), v(&[1, 0])]);
        assert_eq!(c.facets(), &[v(&[0, 1]), v(&[1, 0])]);
    }

    #[test]
    fn line_is_not_pointed() {
        assert_eq!(ConeRP::from_generators(2, &[v(&[1, 0]), v(&[-1, 0])]), Err(ConeError::NotPointed));
    }

    #[test]
    fn intersections() {
        let a = ConeRP::from_generators(2, &[v(&[1, 0]), v(&[0, 1])]).unwrap();
        let b = ConeRP::from_generators(2, &[v(&[0, 1]), v(&[-1, 0])]).unwrap();
        let ab = a.intersect(&b);
        assert_eq!(ab.generators(), &[v(&[0, 1])]);
        assert_eq!(ab.dimension(), 1);
        assert_eq!(a.intersect(&a), a);
        assert!(!a.interiors_overlap(&b));
        assert!(a.has_face(&ab) && b.has_face(&ab));
    }

    #[test]
    fn lower_dimensional_cone_in_3d() {
        let c = ConeRP::from_generators(3, &[v(&[1, 0, 0]), v(&[0, 1, 0]), v(&[2, 3, 0])]).unwrap();
        assert_eq!(c.dimension(), 2);
        assert_eq!(c.equations(), &[v(&[0, 0, 1])]);
        assert_eq!(c.generators().len(), 2);
        assert!(c.contains(&[5, 1, 0]) && !c.contains(&[5, 1, 1]));
    }

    #[test]
    fn non_simplicial_facets() {
        // Cone over a square.
        let sq = ConeRP::from_generators(3, &[v(&[1, 0, 1]), v(&[0, 1, 1]), v(&[-1, 0, 1]), v(&[0, -1, 1])]).unwrap();
        assert_eq!(sq.facets().len(), 4);
        assert_eq!(sq.triangulate().len(), 2);
        let xi = v(&[0, 0, 1]);
        assert_eq!(sq.volume(&xi), BigRational::from_integer(BigInt::from(4)));
        let h = ConeRP::from_inequalities(3, sq.facets(), &[]).unwrap();
        assert_eq!(h, sq);
    }

    #[test]
    fn matrices() {
        let a: IMatrix = vec![vec![2, 1], vec![1, 1]];
        assert_eq!(det_i128(&a), 1);
        let inv = inverse_unimodular(&a).unwrap();
        assert_eq!(mat_mul(&a, &inv), identity(2));
        assert_eq!(det_i128(&vec![vec![1, 2], vec![3, 4]]), -2);
        assert_eq!(inverse_unimodular(&vec![vec![1, 2], vec![3, 4]]), Err(ConeError::NotUnimodular));
    }
}
