//! Coefficient tensors, model equations, slice matrices and determinantal loci.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exactnum::{poly_det, DenseMatrix, Field, MultiPoly, PolyError, SeededRng, DEFAULT_TERM_CAP};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TensorError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("tensor has {found} entries, expected {expected}")]
    BadLength { expected: usize, found: usize },
    #[error("coordinates must cover exactly the slots {expected:?}, got {found:?}")]
    SlotMismatch { expected: Vec<usize>, found: Vec<usize> },
    #[error("slot {0} out of range")]
    BadSlot(usize),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("instance file: {0}")]
    Format(String),
}

/// Integer tensor `b^{m_0 ... m_N}`, flat row-major with `m_0` most significant.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CoefficientTensor {
    n: usize,
    big_n: usize,
    entries: Vec<i64>,
}

impl CoefficientTensor {
    pub fn new(n: usize, big_n: usize, entries: Vec<i64>) -> Result<Self, TensorError> {
        check_params(n, big_n)?;
        let expected = (n + 1).pow(big_n as u32 + 1);
        if entries.len() != expected {
            return Err(TensorError::BadLength { expected, found: entries.len() });
        }
        Ok(CoefficientTensor { n, big_n, entries })
    }

    pub fn zeros(n: usize, big_n: usize) -> Result<Self, TensorError> {
        check_params(n, big_n)?;
        Self::new(n, big_n, vec![0; (n + 1).pow(big_n as u32 + 1)])
    }

    /// `b = 1` when all indices agree, `0` otherwise.
    pub fn diagonal(n: usize, big_n: usize) -> Result<Self, TensorError> {
        let mut t = Self::zeros(n, big_n)?;
        for m in 0..=n {
            let idx = t.flat_index(&vec![m; big_n + 1]);
            t.entries[idx] = 1;
        }
        Ok(t)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn big_n(&self) -> usize {
        self.big_n
    }

    pub fn width(&self) -> usize {
        self.n + 1
    }

    pub fn slots(&self) -> usize {
        self.big_n + 1
    }

    pub fn entries(&self) -> &[i64] {
        &self.entries
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().fold(0, |acc, &m| acc * self.width() + m)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.slots()];
        for s in (0..self.slots()).rev() {
            out[s] = flat % self.width();
            flat /= self.width();
        }
        out
    }

    pub fn get(&self, multi: &[usize]) -> i64 {
        self.entries[self.flat_index(multi)]
    }

    /// Copy with one entry replaced (mutation harness).
    pub fn with_entry(&self, multi: &[usize], value: i64) -> Self {
        let mut t = self.clone();
        let idx = t.flat_index(multi);
        t.entries[idx] = value;
        t
    }

    /// Hyperslices `b[.., m_s = m, ..]` that vanish identically, as `(s, m)`.
    pub fn zero_hyperslices(&self) -> Vec<(usize, usize)> {
        let mut nonzero = vec![vec![false; self.width()]; self.slots()];
        for (flat, &v) in self.entries.iter().enumerate() {
            if v != 0 {
                for (s, m) in self.multi_index(flat).into_iter().enumerate() {
                    nonzero[s][m] = true;
                }
            }
        }
        let mut out = Vec::new();
        for (s, row) in nonzero.iter().enumerate() {
            for (m, &nz) in row.iter().enumerate() {
                if !nz {
                    out.push((s, m));
                }
            }
        }
        out
    }

    /// Some model equation vanishes identically.
    pub fn is_degenerate(&self) -> bool {
        !self.zero_hyperslices().is_empty()
    }

    pub fn lift<F: Field>(&self, ctx: &F::Ctx) -> FieldTensor<F> {
        FieldTensor {
            ctx: ctx.clone(),
            width: self.width(),
            slots: (0..self.slots()).collect(),
            data: self.entries.iter().map(|&v| F::from_i64(ctx, v)).collect(),
        }
    }
}

fn check_params(n: usize, big_n: usize) -> Result<(), TensorError> {
    if n < 1 {
        return Err(TensorError::InvalidParams(format!("n = {n}, need n >= 1")));
    }
    if big_n < 2 {
        return Err(TensorError::InvalidParams(format!("N = {big_n}, need N >= 2")));
    }
    if (n + 1).checked_pow(big_n as u32 + 1).is_none_or(|s| s > 1 << 24) {
        return Err(TensorError::InvalidParams(format!("tensor (n+1)^(N+1) too large for n = {n}, N = {big_n}")));
    }
    Ok(())
}

/// A tensor instance together with its generation parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub seed: u64,
    pub bound: i64,
    pub tensor: CoefficientTensor,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    n: usize,
    #[serde(rename = "N")]
    big_n: usize,
    seed: u64,
    bound: i64,
    tensor: Vec<i64>,
}

impl Instance {
    pub fn from_tensor(tensor: CoefficientTensor, seed: u64, bound: i64) -> Self {
        Instance { seed, bound, tensor }
    }

    pub fn n(&self) -> usize {
        self.tensor.n
    }

    pub fn big_n(&self) -> usize {
        self.tensor.big_n
    }

    /// `dim X = n(N-1) - 1`.
    pub fn dim_x(&self) -> i64 {
        (self.n() * (self.big_n() - 1)) as i64 - 1
    }

    pub fn model_count(&self) -> usize {
        self.big_n() + 1
    }

    pub fn to_json(&self) -> String {
        let file = InstanceFile {
            n: self.n(),
            big_n: self.big_n(),
            seed: self.seed,
            bound: self.bound,
            tensor: self.tensor.entries.clone(),
        };
        serde_json::to_string(&file).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self, TensorError> {
        let file: InstanceFile = serde_json::from_str(text).map_err(|e| TensorError::Format(e.to_string()))?;
        if file.bound < 0 {
            return Err(TensorError::Format("bound must be non-negative".into()));
        }
        let tensor = CoefficientTensor::new(file.n, file.big_n, file.tensor)?;
        Ok(Instance { seed: file.seed, bound: file.bound, tensor })
    }
}

/// Seeded instance: entries uniform in `[-bound, bound]`, drawn in flat order
/// from `SeededRng::new(seed)`.
pub fn random_instance(n: usize, big_n: usize, seed: u64, bound: i64) -> Result<Instance, TensorError> {
    check_params(n, big_n)?;
    if bound < 1 {
        return Err(TensorError::InvalidParams(format!("bound = {bound}, need bound >= 1")));
    }
    let mut rng = SeededRng::new(seed);
    let len = (n + 1).pow(big_n as u32 + 1);
    let entries = (0..len).map(|_| rng.range_i64(-bound, bound)).collect();
    Ok(Instance { seed, bound, tensor: CoefficientTensor::new(n, big_n, entries)? })
}

/// Dense tensor over a field on an ordered list of slot labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldTensor<F: Field> {
    ctx: F::Ctx,
    width: usize,
    slots: Vec<usize>,
    data: Vec<F>,
}

impl<F: Field> FieldTensor<F> {
    pub fn ctx(&self) -> &F::Ctx {
        &self.ctx
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn slots(&self) -> &[usize] {
        &self.slots
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    /// `n` for a lifted instance tensor.
    pub fn n(&self) -> usize {
        self.width - 1
    }

    /// Contracts the slot labelled `slot` against `v`.
    pub fn contract(&self, slot: usize, v: &[F]) -> Self {
        let pos = self.slots.iter().position(|&s| s == slot).expect("slot present");
        assert_eq!(v.len(), self.width, "coordinate vector length");
        let w = self.width;
        let inner = w.pow((self.slots.len() - pos - 1) as u32);
        let outer = self.data.len() / (inner * w);
        let mut data = Vec::with_capacity(outer * inner);
        for a in 0..outer {
            for b in 0..inner {
                let mut acc = F::zero_in(&self.ctx);
                for (m, vm) in v.iter().enumerate() {
                    if !vm.is_zero() {
                        acc = acc + self.data[(a * w + m) * inner + b].clone() * vm.clone();
                    }
                }
                data.push(acc);
            }
        }
        let mut slots = self.slots.clone();
        slots.remove(pos);
        FieldTensor { ctx: self.ctx.clone(), width: w, slots, data }
    }

    /// Contracts every slot in `coords`.
    pub fn contract_all(&self, coords: &BTreeMap<usize, Vec<F>>) -> Self {
        // Contract the trailing slots first so the strides stay small.
        let mut t = self.clone();
        for (&s, v) in coords.iter().rev() {
            t = t.contract(s, v);
        }
        t
    }

    /// Slice matrix: rows indexed by slot `j`, columns by slot `i`, every
    /// other slot contracted with `coords`.
    pub fn slice_matrix(&self, j: usize, i: usize, coords: &BTreeMap<usize, Vec<F>>) -> Result<DenseMatrix<F>, TensorError> {
        for s in [j, i] {
            if !self.slots.contains(&s) {
                return Err(TensorError::BadSlot(s));
            }
        }
        if j == i {
            return Err(TensorError::InvalidParams("slice needs two distinct slots".into()));
        }
        let expected: Vec<usize> = self.slots.iter().copied().filter(|&s| s != j && s != i).collect();
        let found: Vec<usize> = coords.keys().copied().collect();
        if expected != found {
            return Err(TensorError::SlotMismatch { expected, found });
        }
        let t = self.contract_all(coords);
        let w = self.width;
        // Remaining slots are {j, i} in label order.
        Ok(DenseMatrix::from_fn(&self.ctx, w, w, |a, b| {
            if j < i {
                t.data[a * w + b].clone()
            } else {
                t.data[b * w + a].clone()
            }
        }))
    }

    /// Values of the `n+1` equations of model `ell` at a point given on all other slots.
    pub fn model_values(&self, ell: usize, coords: &BTreeMap<usize, Vec<F>>) -> Vec<F> {
        debug_assert!(!coords.contains_key(&ell));
        self.contract_all(coords).data
    }

    /// Some model equation vanishes identically over this field.
    pub fn is_degenerate(&self) -> bool {
        let w = self.width;
        let k = self.slots.len();
        (0..k).any(|pos| {
            let inner = w.pow((k - pos - 1) as u32);
            (0..w).any(|m| {
                self.data.iter().enumerate().all(|(flat, v)| (flat / inner) % w != m || v.is_zero())
            })
        })
    }
}

/// The model `X_ell`: ambient factors `{0..N} \ {ell}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub ell: usize,
    pub ambient: Vec<usize>,
}

impl ModelSpec {
    pub fn new(inst: &Instance, ell: usize) -> Result<Self, TensorError> {
        if ell > inst.big_n() {
            return Err(TensorError::BadSlot(ell));
        }
        Ok(ModelSpec { ell, ambient: (0..=inst.big_n()).filter(|&s| s != ell).collect() })
    }
}

/// The `n+1` multilinear forms `D^ell_m` cutting out `X_ell`.
pub fn model_equations(inst: &Instance, ell: usize) -> Result<Vec<MultiPoly<BigInt>>, TensorError> {
    let spec = ModelSpec::new(inst, ell)?;
    let t = &inst.tensor;
    let w = t.width();
    let mut forms = vec![MultiPoly::zero(&spec.ambient, w); w];
    for (flat, &b) in t.entries.iter().enumerate() {
        if b == 0 {
            continue;
        }
        let idx = t.multi_index(flat);
        let mut exps = vec![0u32; spec.ambient.len() * w];
        for (pos, &s) in spec.ambient.iter().enumerate() {
            exps[pos * w + idx[s]] = 1;
        }
        forms[idx[ell]].add_term(exps, BigInt::from(b));
    }
    Ok(forms)
}

/// The determinantal hypersurface of a pair of slots.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseLocusSpec {
    pub pair: (usize, usize),
    pub ambient: Vec<usize>,
    pub form: MultiPoly<BigInt>,
    pub degenerate: bool,
}

/// Symbolic slice matrix with polynomial entries in the complementary factors.
pub fn symbolic_slice(inst: &Instance, j: usize, i: usize) -> Result<Vec<Vec<MultiPoly<BigInt>>>, TensorError> {
    let big_n = inst.big_n();
    if j > big_n || i > big_n {
        return Err(TensorError::BadSlot(j.max(i)));
    }
    if j == i {
        return Err(TensorError::InvalidParams("slice needs two distinct slots".into()));
    }
    let t = &inst.tensor;
    let w = t.width();
    let ambient: Vec<usize> = (0..=big_n).filter(|&s| s != j && s != i).collect();
    let mut m = vec![vec![MultiPoly::zero(&ambient, w); w]; w];
    for (flat, &b) in t.entries.iter().enumerate() {
        if b == 0 {
            continue;
        }
        let idx = t.multi_index(flat);
        let mut exps = vec![0u32; ambient.len() * w];
        for (pos, &s) in ambient.iter().enumerate() {
            exps[pos * w + idx[s]] = 1;
        }
        m[idx[j]][idx[i]].add_term(exps, BigInt::from(b));
    }
    Ok(m)
}

/// `W_{ji} = (det A = 0)`, expanded symbolically.
pub fn determinant_form(inst: &Instance, j: usize, i: usize) -> Result<BaseLocusSpec, TensorError> {
    determinant_form_capped(inst, j, i, DEFAULT_TERM_CAP)
}

pub fn determinant_form_capped(inst: &Instance, j: usize, i: usize, cap: usize) -> Result<BaseLocusSpec, TensorError> {
    let m = symbolic_slice(inst, j, i)?;
    let form = poly_det(&m, cap)?;
    let ambient = m[0][0].factors().to_vec();
    let degenerate = form.is_zero() || inst.tensor.is_degenerate();
    Ok(BaseLocusSpec { pair: (j.min(i), j.max(i)), ambient, form, degenerate })
}
