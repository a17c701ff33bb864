//! Pointwise evaluation of the flops `phi_{ji}: X_j --> X_i` and their checks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exactnum::{Field, Gf, GfField, SeededRng};
use crate::tensor::{CoefficientTensor, FieldTensor, TensorError};
use crate::varprobe::{enumerate_points, is_on_model, sample_point, MultiProjPoint, ProbeError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FlopError {
    #[error("point does not lie on X_{0}")]
    NotOnVariety(usize),
    #[error("exceptional point (slice rank {rank}){}", step.map(|s| format!(" at word step {s}")).unwrap_or_default())]
    ExceptionalPoint { rank: usize, step: Option<usize> },
    #[error("invalid flop: {0}")]
    Invalid(String),
    #[error(transparent)]
    Probe(#[from] ProbeError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// `phi_{ji}`: source model `j`, target model `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FlopMap {
    pub source: usize,
    pub target: usize,
}

impl FlopMap {
    pub fn new(big_n: usize, source: usize, target: usize) -> Result<Self, FlopError> {
        if source == target || source > big_n || target > big_n {
            return Err(FlopError::Invalid(format!("({source}, {target}) with N = {big_n}")));
        }
        Ok(FlopMap { source, target })
    }

    pub fn reverse(self) -> Self {
        FlopMap { source: self.target, target: self.source }
    }

    /// Factors common to source and target.
    pub fn shared(&self, big_n: usize) -> Vec<usize> {
        (0..=big_n).filter(|&s| s != self.source && s != self.target).collect()
    }
}

fn require_on<F: Field + Ord>(t: &FieldTensor<F>, model: usize, p: &MultiProjPoint<F>) -> Result<(), FlopError> {
    match is_on_model(t, model, p) {
        Ok(true) => Ok(()),
        Ok(false) => Err(FlopError::NotOnVariety(model)),
        Err(ProbeError::WrongFactors { .. }) => Err(FlopError::NotOnVariety(model)),
        Err(e) => Err(e.into()),
    }
}

/// `alpha`: drops the target factor; the image lies on `W_{ji}`.
pub fn project_to_base<F: Field + Ord>(
    t: &FieldTensor<F>,
    flop: FlopMap,
    p: &MultiProjPoint<F>,
) -> Result<MultiProjPoint<F>, FlopError> {
    require_on(t, flop.source, p)?;
    let base = p.project(&[flop.target]);
    let m = t.slice_matrix(flop.source, flop.target, base.coords())?;
    assert!(m.det().expect("square").is_zero(), "base image must lie on the determinantal locus");
    Ok(base)
}

/// `phi_{ji}`: keeps the shared factors and replaces factor `i` by factor `j`,
/// the kernel of the slice with rows in slot `i` and columns in slot `j`.
pub fn apply_flop<F: Field + Ord>(
    t: &FieldTensor<F>,
    flop: FlopMap,
    p: &MultiProjPoint<F>,
) -> Result<MultiProjPoint<F>, FlopError> {
    require_on(t, flop.source, p)?;
    let base = p.project(&[flop.target]);
    let m = t.slice_matrix(flop.target, flop.source, base.coords())?;
    finish_flop(t, flop, &base, m)
}

/// Same map evaluated through the transpose of the reverse slice.
pub fn apply_flop_via_transpose<F: Field + Ord>(
    t: &FieldTensor<F>,
    flop: FlopMap,
    p: &MultiProjPoint<F>,
) -> Result<MultiProjPoint<F>, FlopError> {
    require_on(t, flop.source, p)?;
    let base = p.project(&[flop.target]);
    let m = t.slice_matrix(flop.source, flop.target, base.coords())?.transpose();
    finish_flop(t, flop, &base, m)
}

fn finish_flop<F: Field + Ord>(
    t: &FieldTensor<F>,
    flop: FlopMap,
    base: &MultiProjPoint<F>,
    m: crate::exactnum::DenseMatrix<F>,
) -> Result<MultiProjPoint<F>, FlopError> {
    let v = m.corank1_kernel().map_err(|_| FlopError::ExceptionalPoint { rank: m.rank(), step: None })?;
    let out = base.with_factor(flop.source, v).expect("kernel vector is nonzero");
    require_on(t, flop.target, &out).map_err(|_| FlopError::Invalid("image misses the target model".into()))?;
    Ok(out)
}

/// Where `check_diagram` gets its source points.
#[derive(Debug, Clone)]
pub enum PointSource {
    /// Every rational point of the source model, within an ambient cap.
    Enumerate { cap: u64 },
    /// `count` non-exceptional samples (at most `max_draws` draws).
    Sample { count: usize, max_draws: usize, seed: u64, retries: usize },
    /// Explicit points, e.g. sampled from another tensor.
    Points(Vec<MultiProjPoint<Gf>>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagramFailure {
    pub point: Vec<Vec<u64>>,
    pub discrepancy: String,
}

/// Outcome of checking `beta . phi = alpha` on a batch of points.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagramReport {
    pub flop: [usize; 2],
    pub field: String,
    pub tested: u64,
    pub exceptional_skipped: u64,
    pub failures: Vec<DiagramFailure>,
}

impl DiagramReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks one point; `Ok(false)` when it is exceptional and skipped.
fn check_point(t: &FieldTensor<Gf>, flop: FlopMap, p: &MultiProjPoint<Gf>) -> Result<bool, String> {
    let alpha = match project_to_base(t, flop, p) {
        Ok(b) => b,
        Err(FlopError::NotOnVariety(m)) => return Err(format!("input is not on X_{m}")),
        Err(e) => return Err(e.to_string()),
    };
    let image = match apply_flop(t, flop, p) {
        Ok(q) => q,
        Err(FlopError::ExceptionalPoint { .. }) => return Ok(false),
        Err(e) => return Err(e.to_string()),
    };
    let beta = project_to_base(t, flop.reverse(), &image).map_err(|e| format!("image: {e}"))?;
    if beta != alpha {
        return Err("base images differ".into());
    }
    if apply_flop_via_transpose(t, flop, p).as_ref() != Ok(&image) {
        return Err("transpose evaluation differs".into());
    }
    match apply_flop(t, flop.reverse(), &image) {
        Ok(back) if &back == p => Ok(true),
        Ok(_) => Err("reverse flop does not return the input".into()),
        Err(e) => Err(format!("reverse flop: {e}")),
    }
}

/// Verifies the commutative diagram for `phi_{ji}` over `field`.
pub fn check_diagram(
    tensor: &CoefficientTensor,
    field: GfField,
    flop: FlopMap,
    source: PointSource,
) -> Result<DiagramReport, FlopError> {
    FlopMap::new(tensor.big_n(), flop.source, flop.target)?;
    let mut lifted: BTreeMap<u64, FieldTensor<Gf>> = BTreeMap::new();
    let mut report = DiagramReport {
        flop: [flop.source, flop.target],
        field: field.spec().to_string(),
        tested: 0,
        exceptional_skipped: 0,
        failures: Vec::new(),
    };
    let mut run = |p: &MultiProjPoint<Gf>, report: &mut DiagramReport| {
        let f = p.field();
        let t = lifted.entry(f.order()).or_insert_with(|| tensor.lift::<Gf>(&f));
        match check_point(t, flop, p) {
            Ok(true) => report.tested += 1,
            Ok(false) => report.exceptional_skipped += 1,
            Err(d) => {
                report.tested += 1;
                report.failures.push(DiagramFailure { point: p.indices(), discrepancy: d });
            }
        }
    };
    match source {
        PointSource::Enumerate { cap } => {
            let t = tensor.lift::<Gf>(&field);
            for p in enumerate_points(&t, flop.source, cap)?.points {
                run(&p, &mut report);
            }
        }
        PointSource::Points(points) => {
            for p in &points {
                run(p, &mut report);
            }
        }
        PointSource::Sample { count, max_draws, seed, retries } => {
            let mut rng = SeededRng::derived(seed, (flop.source * 64 + flop.target) as u64);
            let mut draws = 0;
            while (report.tested as usize) < count && draws < max_draws {
                draws += 1;
                let s = sample_point(tensor, flop.source, field, &mut rng, retries)?;
                run(&s.point, &mut report);
            }
        }
    }
    Ok(report)
}

/// Evaluator for a composite of flops along a path of model indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordEvaluator {
    pub word: Vec<usize>,
}

/// Builds the evaluator for `word = (l_0, l_1, ..., l_m)`.
pub fn compose_word(big_n: usize, word: &[usize]) -> Result<WordEvaluator, FlopError> {
    if word.is_empty() {
        return Err(FlopError::Invalid("empty word".into()));
    }
    for w in word.windows(2) {
        FlopMap::new(big_n, w[0], w[1])?;
    }
    if let Some(&bad) = word.iter().find(|&&l| l > big_n) {
        return Err(FlopError::Invalid(format!("model {bad} with N = {big_n}")));
    }
    Ok(WordEvaluator { word: word.to_vec() })
}

impl WordEvaluator {
    pub fn is_loop(&self) -> bool {
        self.word.first() == self.word.last()
    }

    /// Applies the flops in order; exceptional points report the failing step.
    pub fn apply<F: Field + Ord>(&self, t: &FieldTensor<F>, p: &MultiProjPoint<F>) -> Result<MultiProjPoint<F>, FlopError> {
        require_on(t, self.word[0], p)?;
        let mut cur = p.clone();
        for (step, w) in self.word.windows(2).enumerate() {
            let flop = FlopMap { source: w[0], target: w[1] };
            cur = apply_flop(t, flop, &cur).map_err(|e| match e {
                FlopError::ExceptionalPoint { rank, .. } => FlopError::ExceptionalPoint { rank, step: Some(step) },
                other => other,
            })?;
        }
        Ok(cur)
    }
}
