//! Divisor-class lattices of the models, intersection numbers and the
//! unimodular lattice maps induced by the flops.

mod oracle;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cone::{self, ConeRP, IMatrix, Int};
use crate::tensor::CoefficientTensor;

pub use oracle::{degree_count_pullback, OracleConfig, OracleResult, PrimeRecord, SliceRecord};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PicardError {
    #[error("exponents sum to {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("classes live on different models or bases")]
    ModelMismatch,
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error("oracle calibration unavailable for n = {0}")]
    CalibrationUnavailable(usize),
    #[error("oracle inconclusive: {0}")]
    OracleInconclusive(String),
    #[error("postcondition failed: {0}")]
    Postcondition(String),
}

/// Basis labels of `N^1(X_ell)`: every factor except `ell`.
pub fn model_basis(big_n: usize, ell: usize) -> Vec<usize> {
    (0..=big_n).filter(|&k| k != ell).collect()
}

/// `dim X = n(N-1) - 1`.
pub fn model_dimension(n: usize, big_n: usize) -> usize {
    n * (big_n - 1) - 1
}

/// `H`-monomial degree on any model: the coefficient of `prod H_k^{n-e_k}` in
/// `(sum H_k)^{n+1}`, i.e. `(n+1)! / prod (n-e_k)!`, and `0` if some `e_k > n`.
pub fn intersection_number(n: usize, big_n: usize, exponents: &[u32]) -> Result<Int, PicardError> {
    if exponents.len() != big_n {
        return Err(PicardError::Invalid(format!("{} exponents for {big_n} factors", exponents.len())));
    }
    let expected = model_dimension(n, big_n);
    let got: usize = exponents.iter().map(|&e| e as usize).sum();
    if got != expected {
        return Err(PicardError::DimensionMismatch { expected, got });
    }
    if exponents.iter().any(|&e| e as usize > n) {
        return Ok(0);
    }
    let fact = |k: usize| (1..=k as Int).product::<Int>();
    Ok(exponents.iter().fold(fact(n + 1), |acc, &e| acc / fact(n - e as usize)))
}

/// Memoised table of all nonzero `H`-monomial degrees (read-only once built).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntersectionForm {
    n: usize,
    big_n: usize,
    table: BTreeMap<Vec<u32>, Int>,
}

impl IntersectionForm {
    pub fn new(n: usize, big_n: usize) -> Result<Self, PicardError> {
        if n == 0 || big_n < 2 {
            return Err(PicardError::Invalid(format!("need n >= 1, N >= 2 (got n = {n}, N = {big_n})")));
        }
        let dim = model_dimension(n, big_n) as u32;
        let mut table = BTreeMap::new();
        let mut e = vec![0u32; big_n];
        loop {
            if e.iter().sum::<u32>() == dim {
                table.insert(e.clone(), intersection_number(n, big_n, &e)?);
            }
            let Some(pos) = (0..big_n).rev().find(|&k| e[k] < n as u32) else { break };
            e[pos] += 1;
            e[pos + 1..].iter_mut().for_each(|x| *x = 0);
        }
        Ok(IntersectionForm { n, big_n, table })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn big_n(&self) -> usize {
        self.big_n
    }

    pub fn get(&self, exponents: &[u32]) -> Result<Int, PicardError> {
        match self.table.get(exponents) {
            Some(&v) => Ok(v),
            None => intersection_number(self.n, self.big_n, exponents),
        }
    }

    /// `D_1 ... D_d` for `d = dim X` classes on one model, by multilinear expansion.
    pub fn evaluate(&self, classes: &[&DivisorClass]) -> Result<Int, PicardError> {
        let dim = model_dimension(self.n, self.big_n);
        if classes.len() != dim {
            return Err(PicardError::DimensionMismatch { expected: dim, got: classes.len() });
        }
        let model = classes[0].model;
        if classes.iter().any(|c| c.model != model || c.coefficients.len() != self.big_n) {
            return Err(PicardError::ModelMismatch);
        }
        let mut acc: BTreeMap<Vec<u32>, Int> = BTreeMap::from([(vec![0; self.big_n], 1)]);
        for c in classes {
            let mut next = BTreeMap::new();
            for (e, w) in &acc {
                for (k, &ck) in c.coefficients.iter().enumerate().filter(|(_, &ck)| ck != 0) {
                    let mut f = e.clone();
                    f[k] += 1;
                    *next.entry(f).or_insert(0) += w * ck as Int;
                }
            }
            acc = next;
        }
        acc.iter().map(|(e, w)| Ok(w * self.get(e)?)).sum()
    }
}

/// Integer class on `X_model`, coefficients in the basis `H_k`, `k != model`,
/// ordered by label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DivisorClass {
    pub model: usize,
    pub labels: Vec<usize>,
    pub coefficients: Vec<i64>,
}

impl DivisorClass {
    pub fn new(big_n: usize, model: usize, coefficients: Vec<i64>) -> Result<Self, PicardError> {
        let labels = model_basis(big_n, model);
        if coefficients.len() != labels.len() {
            return Err(PicardError::Invalid(format!("{} coefficients for {} basis classes", coefficients.len(), labels.len())));
        }
        Ok(DivisorClass { model, labels, coefficients })
    }

    /// The basis class `H_label`.
    pub fn basis(big_n: usize, model: usize, label: usize) -> Result<Self, PicardError> {
        let labels = model_basis(big_n, model);
        let pos = labels
            .iter()
            .position(|&k| k == label)
            .ok_or_else(|| PicardError::Invalid(format!("H_{label} is not a basis class of X_{model}")))?;
        let mut coefficients = vec![0; labels.len()];
        coefficients[pos] = 1;
        Ok(DivisorClass { model, labels, coefficients })
    }

    pub fn coefficient(&self, label: usize) -> Option<i64> {
        self.labels.iter().position(|&k| k == label).map(|p| self.coefficients[p])
    }
}

/// `Nef(X_model)`: the orthant on the model's basis classes.
pub fn nef_cone(big_n: usize) -> ConeRP {
    ConeRP::orthant(big_n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Structural,
    OracleCalibrated,
}

/// `M_{j->i}`: the lattice map `N^1(X_j) -> N^1(X_i)` induced by the flop
/// `X_j --> X_i`. Column `c` is the image of the `c`-th source basis class,
/// rows index the target basis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PushforwardMatrix {
    pub flop: [usize; 2],
    pub matrix: Vec<Vec<i64>>,
    pub provenance: Provenance,
    pub primes: Vec<u64>,
    /// Structural values not confirmed by the oracle.
    pub provisional: bool,
    /// Admissible range of the shared-slot coefficients when provisional.
    pub interval: Option<[i64; 2]>,
}

/// On-disk matrix fixture.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFixture {
    pub flop: [usize; 2],
    pub matrix: Vec<Vec<i64>>,
    pub provenance: Provenance,
    pub primes: Vec<u64>,
}

impl From<&PushforwardMatrix> for MatrixFixture {
    fn from(m: &PushforwardMatrix) -> Self {
        MatrixFixture { flop: m.flop, matrix: m.matrix.clone(), provenance: m.provenance, primes: m.primes.clone() }
    }
}

impl From<MatrixFixture> for PushforwardMatrix {
    fn from(f: MatrixFixture) -> Self {
        let provisional = f.provenance == Provenance::Structural;
        PushforwardMatrix { flop: f.flop, matrix: f.matrix, provenance: f.provenance, primes: f.primes, provisional, interval: None }
    }
}

fn pos(labels: &[usize], k: usize) -> usize {
    labels.iter().position(|&x| x == k).expect("label in basis")
}

impl PushforwardMatrix {
    pub fn source(&self) -> usize {
        self.flop[0]
    }

    pub fn target(&self) -> usize {
        self.flop[1]
    }

    pub fn big_n(&self) -> usize {
        self.matrix.len()
    }

    pub fn as_imatrix(&self) -> IMatrix {
        self.matrix.iter().map(|r| r.iter().map(|&x| x as Int).collect()).collect()
    }

    /// Builds the matrix from the image of the exchanged class `H_i`
    /// (given as a class on `X_i`); shared classes map to themselves.
    pub fn from_exchanged_image(
        big_n: usize,
        j: usize,
        i: usize,
        image: &DivisorClass,
        provenance: Provenance,
        primes: Vec<u64>,
    ) -> Result<Self, PicardError> {
        if j == i || j > big_n || i > big_n || image.model != i {
            return Err(PicardError::Invalid(format!("bad flop {j} -> {i} or image class on X_{}", image.model)));
        }
        let src = model_basis(big_n, j);
        let tgt = model_basis(big_n, i);
        let mut matrix = vec![vec![0i64; big_n]; big_n];
        for (c, &k) in src.iter().enumerate() {
            if k == i {
                for (r, v) in image.coefficients.iter().enumerate() {
                    matrix[r][c] = *v;
                }
            } else {
                matrix[pos(&tgt, k)][c] = 1;
            }
        }
        Ok(PushforwardMatrix { flop: [j, i], matrix, provenance, primes, provisional: false, interval: None })
    }

    /// Structural mode: the exchanged class maps to `n * sum(shared) - H_j`.
    /// The shared coefficient `n` is the adjugate-multidegree bound; the
    /// admissible interval `[0, n]` is recorded and the result is provisional.
    pub fn structural(n: usize, big_n: usize, j: usize, i: usize) -> Result<Self, PicardError> {
        let tgt = model_basis(big_n, i);
        let coeffs: Vec<i64> = tgt.iter().map(|&k| if k == j { -1 } else { n as i64 }).collect();
        let image = DivisorClass::new(big_n, i, coeffs)?;
        let mut m = PushforwardMatrix::from_exchanged_image(big_n, j, i, &image, Provenance::Structural, Vec::new())?;
        m.provisional = true;
        m.interval = Some([0, n as i64]);
        m.validate()?;
        Ok(m)
    }

    /// Permutation identifying the basis of `X_i` with that of `X_j` via `i <-> j`.
    fn relabeling(&self) -> IMatrix {
        let (j, i) = (self.source(), self.target());
        let big_n = self.big_n();
        let src = model_basis(big_n, j);
        let tgt = model_basis(big_n, i);
        let mut p = vec![vec![0; big_n]; big_n];
        for (r, &k) in tgt.iter().enumerate() {
            let k2 = if k == j { i } else { k };
            p[pos(&src, k2)][r] = 1;
        }
        p
    }

    /// Unimodular, identity on shared classes, involution after relabeling, and
    /// the image of `Nef(X_j)` meets `Nef(X_i)` exactly in the shared facet.
    pub fn validate(&self) -> Result<(), PicardError> {
        let big_n = self.big_n();
        let (j, i) = (self.source(), self.target());
        if self.matrix.iter().any(|r| r.len() != big_n) || j == i || j > big_n || i > big_n {
            return Err(PicardError::Postcondition(format!("malformed matrix for flop {j} -> {i}")));
        }
        let m = self.as_imatrix();
        if cone::det_i128(&m).abs() != 1 {
            return Err(PicardError::Postcondition(format!("flop {j} -> {i}: determinant {} is not a unit", cone::det_i128(&m))));
        }
        let src = model_basis(big_n, j);
        let tgt = model_basis(big_n, i);
        for (c, &k) in src.iter().enumerate().filter(|(_, &k)| k != i) {
            let r = pos(&tgt, k);
            if (0..big_n).any(|x| m[x][c] != Int::from(x == r)) {
                return Err(PicardError::Postcondition(format!("flop {j} -> {i} moves shared class H_{k}")));
            }
        }
        let pm = cone::mat_mul(&self.relabeling(), &m);
        if cone::mat_mul(&pm, &pm) != cone::identity(big_n) {
            return Err(PicardError::Postcondition(format!("flop {j} -> {i} is not an involution after relabeling")));
        }
        let wall = self.wall()?;
        if wall.dimension() != big_n - 1 {
            return Err(PicardError::Postcondition(format!("flop {j} -> {i}: wall has dimension {}", wall.dimension())));
        }
        Ok(())
    }

    /// `M(Nef(X_j)) ∩ Nef(X_i)`, checked to be the facet spanned by the shared classes.
    pub fn wall(&self) -> Result<ConeRP, PicardError> {
        let big_n = self.big_n();
        let nef = nef_cone(big_n);
        let meet = nef.transform(&self.as_imatrix()).intersect(&nef);
        let tgt = model_basis(big_n, self.target());
        let shared: Vec<cone::Vector> = tgt
            .iter()
            .filter(|&&k| k != self.source())
            .map(|&k| {
                let mut e = vec![0; big_n];
                e[pos(&tgt, k)] = 1;
                e
            })
            .collect();
        let facet = ConeRP::from_generators(big_n, &shared).expect("orthant face");
        if meet != facet {
            return Err(PicardError::Postcondition(format!(
                "flop {} -> {}: image cone meets the nef cone in {:?}, not the shared facet",
                self.source(),
                self.target(),
                meet.generators()
            )));
        }
        Ok(meet)
    }
}

/// Structural matrices for every ordered pair.
pub fn structural_set(n: usize, big_n: usize) -> Result<Vec<PushforwardMatrix>, PicardError> {
    let mut out = Vec::new();
    for j in 0..=big_n {
        for i in (0..=big_n).filter(|&i| i != j) {
            out.push(PushforwardMatrix::structural(n, big_n, j, i)?);
        }
    }
    Ok(out)
}

/// `pushforward_matrix` in oracle mode: `M_{j->i}` sends the exchanged class
/// `H_i` to the pullback of `H_i` along `X_i --> X_j`, measured by the oracle.
pub fn calibrated_pushforward(
    tensor: &CoefficientTensor,
    j: usize,
    i: usize,
    config: &OracleConfig,
) -> Result<PushforwardMatrix, PicardError> {
    if tensor.n() != 1 {
        return Err(PicardError::CalibrationUnavailable(tensor.n()));
    }
    let res = degree_count_pullback(tensor, i, j, config)?;
    let m = PushforwardMatrix::from_exchanged_image(
        tensor.big_n(),
        j,
        i,
        &res.class,
        Provenance::OracleCalibrated,
        config.primes.clone(),
    )?;
    m.validate()?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intersection_examples() {
        assert_eq!(intersection_number(1, 3, &[1, 0, 0]), Ok(2));
        assert_eq!(intersection_number(2, 2, &[1, 0]), Ok(3));
        assert_eq!(intersection_number(1, 4, &[2, 0, 0, 0]), Ok(0));
        assert_eq!(intersection_number(1, 5, &[1, 1, 1, 0, 0]), Ok(2));
        assert!(matches!(intersection_number(1, 3, &[1, 1, 0]), Err(PicardError::DimensionMismatch { .. })));
    }

    #[test]
    fn form_evaluates_products() {
        let f = IntersectionForm::new(1, 3).unwrap();
        let h = DivisorClass::new(3, 0, vec![1, 1, 1]).unwrap();
        assert_eq!(f.evaluate(&[&h]), Ok(6));
        let f = IntersectionForm::new(1, 4).unwrap();
        let h = DivisorClass::new(4, 0, vec![1, 1, 1, 1]).unwrap();
        // (sum H)^2 (sum H)^2 on (P^1)^4: 4! = 24.
        assert_eq!(f.evaluate(&[&h, &h]), Ok(24));
    }

    #[test]
    fn structural_matrices_validate() {
        for (n, big_n) in [(1, 2), (1, 3), (1, 5), (2, 3)] {
            let set = structural_set(n, big_n).unwrap();
            assert_eq!(set.len(), big_n * (big_n + 1));
            for m in &set {
                assert!(m.provisional);
                m.validate().unwrap();
            }
        }
    }

    #[test]
    fn forced_coefficient_and_shared_block() {
        let m = PushforwardMatrix::structural(1, 3, 0, 1).unwrap();
        // Source basis (H_1, H_2, H_3) of X_0, target basis (H_0, H_2, H_3) of X_1.
        assert_eq!(m.matrix, vec![vec![-1, 0, 0], vec![1, 1, 0], vec![1, 0, 1]]);
    }

    #[test]
    fn corrupted_matrix_rejected() {
        let mut m = PushforwardMatrix::structural(1, 3, 0, 1).unwrap();
        m.matrix[0][0] = 1;
        assert!(m.validate().is_err());
    }

    #[test]
    fn oracle_forced_coefficient() {
        let inst = crate::tensor::random_instance(1, 3, 10, 9).unwrap();
        let res = degree_count_pullback(&inst.tensor, 0, 1, &OracleConfig::default()).unwrap();
        assert_eq!(res.class.coefficient(1), Some(-1));
        assert_eq!(res.class.coefficients, vec![-1, 1, 1]);
        assert_eq!(res.per_prime.len(), 2);
        let m = calibrated_pushforward(&inst.tensor, 1, 0, &OracleConfig::default()).unwrap();
        assert_eq!(m.matrix, PushforwardMatrix::structural(1, 3, 1, 0).unwrap().matrix);
    }

    #[test]
    fn oracle_needs_n_one() {
        let inst = crate::tensor::random_instance(2, 2, 1, 9).unwrap();
        assert_eq!(
            degree_count_pullback(&inst.tensor, 0, 1, &OracleConfig::default()),
            Err(PicardError::CalibrationUnavailable(2))
        );
    }

    #[test]
    fn fixture_roundtrip() {
        let m = PushforwardMatrix::structural(1, 3, 2, 0).unwrap();
        let text = serde_json::to_string(&MatrixFixture::from(&m)).unwrap();
        assert!(text.starts_with("{\"flop\":[2,0],\"matrix\""));
        let back: MatrixFixture = serde_json::from_str(&text).unwrap();
        assert_eq!(back.matrix, m.matrix);
        assert!(serde_json::from_str::<MatrixFixture>(&text.replace("\"primes\"", "\"extra\":1,\"primes\"")).is_err());
    }
}
