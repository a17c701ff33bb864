//! Finite-field probing of the models and base loci: enumeration, sampling,
//! Jacobian smoothness and rank-locus witnesses.

mod point;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use point::{embed_elem, projective_points, MultiProjPoint};

use crate::exactnum::{DenseMatrix, Field, FieldError, FieldSpec, FiniteField, Gf, GfField, SeededRng};
use crate::tensor::{CoefficientTensor, FieldTensor, TensorError};

/// Largest field on which `sample_point` searches roots by brute force.
pub const MAX_ROOT_SEARCH_ORDER: u64 = 1 << 16;

/// Field orders scanned for rank-locus witnesses, in order.
pub const DEFAULT_RANK_FIELDS: [u64; 11] = [3, 5, 7, 9, 25, 27, 49, 81, 125, 11, 121];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProbeError {
    #[error("point does not lie on model X_{0}")]
    NotOnVariety(usize),
    #[error("enumeration needs {required} ambient points, budget is {budget}")]
    BudgetExceeded { required: u64, budget: u64 },
    #[error("sampling failed: {0}")]
    SampleFailure(String),
    #[error("point has factors {found:?}, model needs {expected:?}")]
    WrongFactors { expected: Vec<usize>, found: Vec<usize> },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Budgets shared by the scans.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeBudget {
    /// Largest ambient point count enumerated exhaustively.
    pub enumeration_cap: u64,
    /// Points drawn when enumeration is over budget.
    pub samples: usize,
    /// Attempts per field in `sample_point`.
    pub retries: usize,
    pub seed: u64,
}

impl Default for ProbeBudget {
    fn default() -> Self {
        ProbeBudget { enumeration_cap: 4_000_000, samples: 100, retries: 64, seed: 0 }
    }
}

fn ambient(t: &FieldTensor<impl Field>, ell: usize) -> Vec<usize> {
    t.slots().iter().copied().filter(|&s| s != ell).collect()
}

fn check_factors<F: Field + Ord>(t: &FieldTensor<F>, ell: usize, p: &MultiProjPoint<F>) -> Result<(), ProbeError> {
    let expected = ambient(t, ell);
    let found = p.labels();
    if expected != found {
        return Err(ProbeError::WrongFactors { expected, found });
    }
    Ok(())
}

/// The point satisfies all `n+1` equations of `X_ell`.
pub fn is_on_model<F: Field + Ord>(t: &FieldTensor<F>, ell: usize, p: &MultiProjPoint<F>) -> Result<bool, ProbeError> {
    check_factors(t, ell, p)?;
    Ok(t.model_values(ell, p.coords()).iter().all(Field::is_zero))
}

/// Jacobian of the model equations at `p`. With a chart, the column of the
/// chosen coordinate in each factor is dropped (it must be nonzero there).
pub fn jacobian_matrix<F: Field + Ord>(
    t: &FieldTensor<F>,
    ell: usize,
    p: &MultiProjPoint<F>,
    chart: Option<&BTreeMap<usize, usize>>,
) -> Result<DenseMatrix<F>, ProbeError> {
    check_factors(t, ell, p)?;
    let w = t.width();
    let mut columns: Vec<Vec<F>> = Vec::new();
    for s in ambient(t, ell) {
        let block = t.slice_matrix(ell, s, &p.without(&[s]))?;
        let skip = chart.and_then(|c| c.get(&s).copied());
        if let Some(c) = skip {
            assert!(!p.factor(s)[c].is_zero(), "chart coordinate must be nonzero");
        }
        for c in (0..w).filter(|&c| Some(c) != skip) {
            columns.push(block.column(c));
        }
    }
    Ok(DenseMatrix::from_fn(t.ctx(), w, columns.len(), |r, c| columns[c][r].clone()))
}

/// Chart given by each factor's leading coordinate (the normalised 1).
pub fn standard_chart<F: Field + Ord>(p: &MultiProjPoint<F>) -> BTreeMap<usize, usize> {
    p.coords().iter().map(|(s, v)| (*s, v.iter().position(|x| !x.is_zero()).expect("nonzero"))).collect()
}

/// Rank of the Jacobian in the standard affine chart; `n+1` means smooth.
pub fn jacobian_rank<F: Field + Ord>(t: &FieldTensor<F>, ell: usize, p: &MultiProjPoint<F>) -> Result<usize, ProbeError> {
    jacobian_rank_in_chart(t, ell, p, &standard_chart(p))
}

pub fn jacobian_rank_in_chart<F: Field + Ord>(
    t: &FieldTensor<F>,
    ell: usize,
    p: &MultiProjPoint<F>,
    chart: &BTreeMap<usize, usize>,
) -> Result<usize, ProbeError> {
    if !is_on_model(t, ell, p)? {
        return Err(ProbeError::NotOnVariety(ell));
    }
    Ok(jacobian_matrix(t, ell, p, Some(chart))?.rank())
}

/// Depth-first walk over all point tuples of `slots`, contracting as it goes.
fn walk(
    t: &FieldTensor<Gf>,
    slots: &[usize],
    pts: &[Vec<Gf>],
    coords: &mut Vec<(usize, Vec<Gf>)>,
    leaf: &mut dyn FnMut(&FieldTensor<Gf>, &[(usize, Vec<Gf>)]),
) {
    match slots.split_first() {
        None => leaf(t, coords),
        Some((&s, rest)) => {
            for v in pts {
                let sub = t.contract(s, v);
                coords.push((s, v.clone()));
                walk(&sub, rest, pts, coords, leaf);
                coords.pop();
            }
        }
    }
}

/// Parallel walk split over the first slot; leaf outputs concatenated in order.
fn par_walk<T: Send>(
    t: &FieldTensor<Gf>,
    slots: &[usize],
    pts: &[Vec<Gf>],
    leaf: impl Fn(&FieldTensor<Gf>, &[(usize, Vec<Gf>)], &mut Vec<T>) + Sync,
) -> Vec<T> {
    let Some((&s0, rest)) = slots.split_first() else {
        let mut out = Vec::new();
        leaf(t, &[], &mut out);
        return out;
    };
    let chunks: Vec<Vec<T>> = pts
        .par_iter()
        .map(|v| {
            let mut out = Vec::new();
            let sub = t.contract(s0, v);
            let mut coords = vec![(s0, v.clone())];
            walk(&sub, rest, pts, &mut coords, &mut |tt, cc| leaf(tt, cc, &mut out));
            out
        })
        .collect();
    chunks.into_iter().flatten().collect()
}

/// Result of a full enumeration of `X_ell(F_q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Enumeration {
    pub points: Vec<MultiProjPoint<Gf>>,
    /// Ambient points covered, `(q+1)^N` for `n = 1` and `((q^{n+1}-1)/(q-1))^N` in general.
    pub scanned: u64,
    pub degenerate: bool,
}

/// Number of points of `(P^n)^k` over `GF(q)`, saturating.
pub fn ambient_count(q: u64, n: usize, k: usize) -> u64 {
    let line = (0..=n as u32).fold(0u64, |acc, e| acc.saturating_add(q.saturating_pow(e)));
    line.saturating_pow(k as u32)
}

/// Every `GF(q)`-point of `X_ell`, lexicographic in normalised coordinates.
pub fn enumerate_points(t: &FieldTensor<Gf>, ell: usize, cap: u64) -> Result<Enumeration, ProbeError> {
    let field = *t.ctx();
    let amb = ambient(t, ell);
    let required = ambient_count(field.order(), t.n(), amb.len());
    if required > cap {
        return Err(ProbeError::BudgetExceeded { required, budget: cap });
    }
    let pts = projective_points(field, t.width());
    let (last, firsts) = amb.split_last().expect("N >= 2");
    let points = par_walk(t, firsts, &pts, |tt, coords, out| {
        let map: BTreeMap<usize, Vec<Gf>> = coords.iter().cloned().collect();
        // Remaining slots are {ell, last}; the last factor ranges over the kernel.
        let m = tt.slice_matrix(ell, *last, &BTreeMap::new()).expect("two slots left");
        let kernel = m.kernel();
        let emit = |v: Vec<Gf>, out: &mut Vec<MultiProjPoint<Gf>>| {
            let mut c = map.clone();
            c.insert(*last, v);
            out.push(MultiProjPoint::new(c).expect("nonzero"));
        };
        match kernel.len() {
            0 => {}
            1 => emit(kernel.into_iter().next().unwrap(), out),
            _ => {
                for v in pts.iter().filter(|v| m.mul_vec(v).iter().all(Gf::is_zero)) {
                    emit(v.clone(), out);
                }
            }
        }
    });
    Ok(Enumeration { points, scanned: required, degenerate: t.is_degenerate() })
}

/// A sampled point and how it was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleOutcome {
    pub point: MultiProjPoint<Gf>,
    pub field: GfField,
    /// The base field had no usable root and the sample lives in `GF(q^2)`.
    pub escalated: bool,
    pub pivot: usize,
}

fn random_vector(field: GfField, width: usize, rng: &mut SeededRng) -> Vec<Gf> {
    loop {
        let v: Vec<Gf> = (0..width).map(|_| Gf::from_index(&field, rng.below(field.order()))).collect();
        if v.iter().any(|x| !x.is_zero()) {
            return v;
        }
    }
}

fn proportional(a: &[Gf], b: &[Gf]) -> bool {
    (0..a.len()).all(|x| (0..a.len()).all(|y| a[x] * b[y] == a[y] * b[x]))
}

/// Samples one point of `X_ell`: random coordinates off two factors `t, t'`,
/// a random line in factor `t'`, a root of the pivot slice determinant on the
/// line, and the corank-one kernel for factor `t`.
pub fn sample_point(
    tensor: &CoefficientTensor,
    ell: usize,
    field: GfField,
    rng: &mut SeededRng,
    retries: usize,
) -> Result<SampleOutcome, ProbeError> {
    if ell > tensor.big_n() {
        return Err(TensorError::BadSlot(ell).into());
    }
    let lifted = tensor.lift::<Gf>(&field);
    if tensor.is_degenerate() || lifted.is_degenerate() {
        return Err(ProbeError::SampleFailure(format!("model X_{ell} is degenerate over {}", field.spec())));
    }
    let start = rng.next_u64();
    if let Some(out) = sample_in(&lifted, ell, rng, retries, start)? {
        return Ok(SampleOutcome { escalated: false, ..out });
    }
    let ext_spec = field.spec().quadratic_extension()?;
    let ext = GfField::new(&ext_spec)
        .map_err(|e| ProbeError::SampleFailure(format!("no usable root over {} and no extension: {e}", field.spec())))?;
    let lifted = tensor.lift::<Gf>(&ext);
    match sample_in(&lifted, ell, rng, retries, start)? {
        Some(out) => Ok(SampleOutcome { escalated: true, ..out }),
        None => Err(ProbeError::SampleFailure(format!(
            "no point after {retries} attempts over {} and {}",
            field.spec(),
            ext_spec
        ))),
    }
}

fn sample_in(
    t: &FieldTensor<Gf>,
    ell: usize,
    rng: &mut SeededRng,
    retries: usize,
    start: u64,
) -> Result<Option<SampleOutcome>, ProbeError> {
    let field = *t.ctx();
    let q = field.order();
    if q > MAX_ROOT_SEARCH_ORDER {
        return Err(ProbeError::SampleFailure(format!("root search capped at order {MAX_ROOT_SEARCH_ORDER}, field has {q}")));
    }
    let amb = ambient(t, ell);
    let w = t.width();
    let n = t.n();
    for attempt in 0..retries {
        let k = amb.len();
        let pos = ((start % k as u64) as usize + attempt) % k;
        let (piv, line) = (amb[pos], amb[(pos + 1) % k]);
        let mut coords: BTreeMap<usize, Vec<Gf>> = BTreeMap::new();
        for &s in amb.iter().filter(|&&s| s != piv && s != line) {
            coords.insert(s, random_vector(field, w, rng));
        }
        let u = random_vector(field, w, rng);
        let dir = random_vector(field, w, rng);
        if proportional(&u, &dir) {
            continue;
        }
        let partial = t.contract_all(&coords);
        let at = |x: &[Gf]| {
            partial.contract(line, x).slice_matrix(ell, piv, &BTreeMap::new()).expect("two slots left")
        };
        let mu = at(&u);
        let md = at(&dir);
        let mut roots: Vec<Vec<Gf>> = Vec::new();
        for lam in field.elements() {
            let m = DenseMatrix::from_fn(&field, w, w, |a, b| mu[(a, b)] + lam * md[(a, b)]);
            if m.det().expect("square").is_zero() {
                roots.push(u.iter().zip(&dir).map(|(&a, &b)| a + lam * b).collect());
            }
        }
        if md.det().expect("square").is_zero() {
            roots.push(dir.clone());
        }
        if roots.is_empty() {
            continue;
        }
        let x_line = roots.swap_remove(rng.below(roots.len() as u64) as usize);
        let m = at(&x_line);
        let Ok(x_piv) = m.corank1_kernel() else { continue };
        debug_assert_eq!(m.rank(), n);
        coords.insert(line, x_line);
        coords.insert(piv, x_piv);
        let point = MultiProjPoint::new(coords).expect("nonzero factors");
        if !is_on_model(t, ell, &point)? {
            return Err(ProbeError::SampleFailure("internal: sampled point misses the model".into()));
        }
        return Ok(Some(SampleOutcome { point, field, escalated: false, pivot: piv }));
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmoothnessVerdict {
    NoSingularPointFound,
    SingularWitness,
    Degenerate,
}

/// Outcome of the smoothness probe (label "7.3") on one model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmoothnessReport {
    pub assumption: String,
    pub model: usize,
    pub fields: Vec<String>,
    /// "enumerated" or "sampled", per field.
    pub methods: Vec<String>,
    pub tested: u64,
    pub witnesses: Vec<Vec<Vec<u64>>>,
    pub witness_fields: Vec<String>,
    pub witness_count: u64,
    pub verdict: SmoothnessVerdict,
}

const MAX_STORED_WITNESSES: usize = 32;

fn field_list(fields: &[FieldSpec]) -> Result<Vec<GfField>, ProbeError> {
    fields.iter().map(|f| GfField::new(f).map_err(ProbeError::from)).collect()
}

/// Jacobian scan of `X_ell` over each field: exhaustive when within the
/// enumeration cap, sampled otherwise. A clean verdict is evidence, not proof.
pub fn smoothness_scan(
    tensor: &CoefficientTensor,
    ell: usize,
    fields: &[FieldSpec],
    budget: &ProbeBudget,
) -> Result<SmoothnessReport, ProbeError> {
    let mut report = SmoothnessReport {
        assumption: "7.3".into(),
        model: ell,
        fields: fields.iter().map(ToString::to_string).collect(),
        methods: Vec::new(),
        tested: 0,
        witnesses: Vec::new(),
        witness_fields: Vec::new(),
        witness_count: 0,
        verdict: SmoothnessVerdict::NoSingularPointFound,
    };
    if tensor.is_degenerate() {
        report.verdict = SmoothnessVerdict::Degenerate;
        return Ok(report);
    }
    for (fi, field) in field_list(fields)?.into_iter().enumerate() {
        let t = tensor.lift::<Gf>(&field);
        let points: Vec<MultiProjPoint<Gf>> = match enumerate_points(&t, ell, budget.enumeration_cap) {
            Ok(e) => {
                report.methods.push("enumerated".into());
                e.points
            }
            Err(ProbeError::BudgetExceeded { .. }) => {
                report.methods.push("sampled".into());
                let mut rng = SeededRng::derived(budget.seed, (ell as u64) << 32 | fi as u64);
                let mut pts = Vec::new();
                for _ in 0..budget.samples {
                    match sample_point(tensor, ell, field, &mut rng, budget.retries) {
                        Ok(s) if !s.escalated => pts.push(s.point),
                        Ok(_) | Err(ProbeError::SampleFailure(_)) => {}
                        Err(e) => return Err(e),
                    }
                }
                pts
            }
            Err(e) => return Err(e),
        };
        let ranks: Vec<usize> = points.par_iter().map(|p| jacobian_rank(&t, ell, p).expect("point on model")).collect();
        report.tested += points.len() as u64;
        for (p, r) in points.iter().zip(ranks) {
            if r < t.width() {
                report.witness_count += 1;
                if report.witnesses.len() < MAX_STORED_WITNESSES {
                    report.witnesses.push(p.indices());
                    report.witness_fields.push(field.spec().to_string());
                }
            }
        }
    }
    if report.witness_count > 0 {
        report.verdict = SmoothnessVerdict::SingularWitness;
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankLocusVerdict {
    ExceptionalLocusNonempty,
    NoneFound,
}

/// Outcome of the exceptional-locus probe (label "7.5") on one pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankLocusReport {
    pub assumption: String,
    pub pair: [usize; 2],
    /// Fields actually scanned, in order.
    pub fields: Vec<String>,
    /// Witness count per scanned field (dimension evidence).
    pub counts: Vec<u64>,
    pub tested: u64,
    pub sampling_budget: u64,
    pub witnesses: Vec<Vec<Vec<u64>>>,
    pub witness_fields: Vec<String>,
    pub verdict: RankLocusVerdict,
}

/// Searches the locus `rank A_{ji} <= n-1` of `W_{ji}` over each field in
/// turn, stopping after the first field that yields a witness.
///
/// For `n = 1` the locus is `A = 0`, linear in the last factor, so the scan
/// runs over the other factors and solves for the last. For `n >= 2` the full
/// product is scanned within the cap and sampled otherwise.
pub fn rank_locus_scan(
    tensor: &CoefficientTensor,
    j: usize,
    i: usize,
    fields: &[FieldSpec],
    budget: &ProbeBudget,
) -> Result<RankLocusReport, ProbeError> {
    let big_n = tensor.big_n();
    if j > big_n || i > big_n || j == i {
        return Err(TensorError::InvalidParams(format!("bad pair ({j}, {i})")).into());
    }
    let mut report = RankLocusReport {
        assumption: "7.5".into(),
        pair: [j.min(i), j.max(i)],
        fields: Vec::new(),
        counts: Vec::new(),
        tested: 0,
        sampling_budget: budget.enumeration_cap,
        witnesses: Vec::new(),
        witness_fields: Vec::new(),
        verdict: RankLocusVerdict::NoneFound,
    };
    let others: Vec<usize> = (0..=big_n).filter(|&s| s != j && s != i).collect();
    let n = tensor.n();
    for (fi, field) in field_list(fields)?.into_iter().enumerate() {
        let t = tensor.lift::<Gf>(&field);
        let q = field.order();
        let pts = projective_points(field, t.width());
        let (found, tested) = if n == 1 {
            let (last, firsts) = others.split_last().expect("N >= 2");
            let required = ambient_count(q, n, firsts.len());
            if required > budget.enumeration_cap {
                continue;
            }
            let found = par_walk(&t, firsts, &pts, |tt, coords, out: &mut Vec<MultiProjPoint<Gf>>| {
                // Columns vec(A_c): the slice at x^last = e_c.
                let w = tt.width();
                let mut basis = Vec::with_capacity(w);
                for c in 0..w {
                    let mut e = vec![Gf::zero_in(&field); w];
                    e[c] = Gf::one_in(&field);
                    let m = tt.contract(*last, &e).slice_matrix(j, i, &BTreeMap::new()).expect("two slots");
                    basis.push(m);
                }
                let sys = DenseMatrix::from_fn(&field, w * w, w, |r, c| basis[c][(r / w, r % w)]);
                let kernel = sys.kernel();
                let candidates: Vec<Vec<Gf>> = match kernel.len() {
                    0 => Vec::new(),
                    1 => kernel,
                    _ => pts.iter().filter(|v| sys.mul_vec(v).iter().all(Gf::is_zero)).cloned().collect(),
                };
                for v in candidates {
                    let mut c: BTreeMap<usize, Vec<Gf>> = coords.iter().cloned().collect();
                    c.insert(*last, v);
                    out.push(MultiProjPoint::new(c).expect("nonzero"));
                }
            });
            (found, required)
        } else {
            let required = ambient_count(q, n, others.len());
            if required <= budget.enumeration_cap {
                let found = par_walk(&t, &others, &pts, |tt, coords, out: &mut Vec<MultiProjPoint<Gf>>| {
                    let m = tt.slice_matrix(j, i, &BTreeMap::new()).expect("two slots");
                    if m.rank() < n {
                        out.push(MultiProjPoint::new(coords.iter().cloned().collect()).expect("nonzero"));
                    }
                });
                (found, required)
            } else {
                let mut rng = SeededRng::derived(budget.seed, ((j * 64 + i) as u64) << 32 | fi as u64);
                let mut found = Vec::new();
                for _ in 0..budget.samples {
                    let c: BTreeMap<usize, Vec<Gf>> =
                        others.iter().map(|&s| (s, random_vector(field, t.width(), &mut rng))).collect();
                    if t.slice_matrix(j, i, &c)?.rank() < n {
                        found.push(MultiProjPoint::new(c).expect("nonzero"));
                    }
                }
                (found, budget.samples as u64)
            }
        };
        for p in &found {
            let m = t.slice_matrix(j, i, p.coords())?;
            assert!(m.det().expect("square").is_zero() && m.rank() < n, "rank-locus witness must verify");
        }
        report.fields.push(field.spec().to_string());
        report.counts.push(found.len() as u64);
        report.tested += tested;
        for p in found.iter().take(MAX_STORED_WITNESSES.saturating_sub(report.witnesses.len())) {
            report.witnesses.push(p.indices());
            report.witness_fields.push(field.spec().to_string());
        }
        if !found.is_empty() {
            report.verdict = RankLocusVerdict::ExceptionalLocusNonempty;
            break;
        }
    }
    Ok(report)
}

/// Field specs for a list of orders.
pub fn fields_of_orders(orders: &[u64]) -> Result<Vec<FieldSpec>, FieldError> {
    orders.iter().map(|&q| FieldSpec::of_order(q)).collect()
}
