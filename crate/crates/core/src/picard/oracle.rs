//! Degree-counting oracle (`n = 1`): the class of the kernel-coordinate map
//! of a flop, measured by point counts on enumerated curves.
//!
//! For `X_s --> X_t` the new coordinate is `x^s = ker M`, `M` the slice with
//! rows in slot `t` and columns in slot `s`. Every column `F_b` of `adj M` is
//! a section of multidegree `delta` (measured by scaling) whose divisor is
//! the strict pullback of a point plus a fixed part supported on one fibre of
//! the projection to factor `t`. On a curve `C`,
//! `sum_k delta_k d_k = deg(x^s|_C) + m d_t` with `d_k = H_k . C`; the strict
//! degree is the largest fibre of `x^s` over the field tower, so
//! `phi^* H_s = delta - m H_t`.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{intersection_number, model_basis, DivisorClass, PicardError};
use crate::exactnum::{DenseMatrix, Field, FiniteField, Gf, GfField, SeededRng};
use crate::tensor::{CoefficientTensor, FieldTensor};
use crate::varprobe::{enumerate_points, MultiProjPoint};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub primes: Vec<u64>,
    /// Curves are enumerated over `GF(p^k)`, `k = 1..=tower_height`.
    pub tower_height: u32,
    /// Curve slices per prime when `N >= 4`.
    pub slices: usize,
    /// Draws per slice before giving up.
    pub redraws: usize,
    pub seed: u64,
    pub enumeration_cap: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { primes: vec![3, 5], tower_height: 3, slices: 3, redraws: 8, seed: 0, enumeration_cap: 4_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceRecord {
    /// Fixed factors and their `GF(p)` coordinates.
    pub fixed: BTreeMap<usize, Vec<u64>>,
    pub free: Vec<usize>,
    /// `#C(GF(p^k))` per tower level.
    pub points: Vec<u64>,
    /// Base points of each adjugate column, per tower level.
    pub base_points: Vec<Vec<u64>>,
    pub strict_degree: u64,
    pub multiplicity: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimeRecord {
    pub prime: u64,
    pub delta: Vec<i64>,
    pub class: Vec<i64>,
    pub slices: Vec<SliceRecord>,
    pub rejected_slices: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleResult {
    pub source: usize,
    pub target: usize,
    /// `phi_{st}^* H_s` on `X_s`.
    pub class: DivisorClass,
    pub per_prime: Vec<PrimeRecord>,
    /// At least two primes agreed.
    pub cross_checked: bool,
}

fn inconclusive(msg: impl Into<String>) -> PicardError {
    PicardError::OracleInconclusive(msg.into())
}

/// Class of `phi_{st}^* H_s` in the basis of `N^1(X_s)`, cross-checked over primes.
pub fn degree_count_pullback(
    tensor: &CoefficientTensor,
    source: usize,
    target: usize,
    config: &OracleConfig,
) -> Result<OracleResult, PicardError> {
    let big_n = tensor.big_n();
    if tensor.n() != 1 {
        return Err(PicardError::CalibrationUnavailable(tensor.n()));
    }
    if source == target || source > big_n || target > big_n {
        return Err(PicardError::Invalid(format!("bad flop {source} -> {target}")));
    }
    if config.primes.is_empty() || config.tower_height == 0 {
        return Err(PicardError::Invalid("oracle needs a prime and a nonempty tower".into()));
    }
    if let Some(&p) = config.primes.iter().find(|&&p| !crate::exactnum::is_prime(p)) {
        return Err(PicardError::Invalid(format!("{p} is not prime")));
    }
    let mut per_prime = Vec::new();
    for &p in &config.primes {
        per_prime.push(run_prime(tensor, source, target, p, config)?);
    }
    let class = per_prime[0].class.clone();
    if let Some(bad) = per_prime.iter().find(|r| r.class != class) {
        return Err(inconclusive(format!(
            "primes {} and {} disagree: {:?} vs {:?}",
            per_prime[0].prime, bad.prime, class, bad.class
        )));
    }
    let cross_checked = per_prime.len() >= 2;
    Ok(OracleResult { source, target, class: DivisorClass::new(big_n, source, class)?, per_prime, cross_checked })
}

fn random_vector(field: GfField, rng: &mut SeededRng) -> Vec<Gf> {
    loop {
        let v: Vec<Gf> = (0..2).map(|_| Gf::from_index(&field, rng.below(field.order()))).collect();
        if v.iter().any(|x| !x.is_zero()) {
            return v;
        }
    }
}

fn adj_column(m: &DenseMatrix<Gf>, b: usize) -> Vec<Gf> {
    m.adjugate().expect("square").column(b)
}

/// Degree of `F_b` in each shared factor, by scaling one factor at a time.
fn measure_delta(
    tensor: &CoefficientTensor,
    s: usize,
    t: usize,
    p: u64,
    rng: &mut SeededRng,
) -> Result<BTreeMap<usize, i64>, PicardError> {
    let field = GfField::finite(p, 3).map_err(|e| PicardError::Invalid(e.to_string()))?;
    let lam = field
        .elements()
        .find(|x| (1..=3).all(|e| !x.pow(e).is_one()))
        .ok_or_else(|| inconclusive("no scaling element"))?;
    let ft = tensor.lift::<Gf>(&field);
    let shared: Vec<usize> = (0..=tensor.big_n()).filter(|&k| k != s && k != t).collect();
    for _ in 0..32 {
        let x: BTreeMap<usize, Vec<Gf>> = shared.iter().map(|&k| (k, random_vector(field, rng))).collect();
        let base = adj_column(&ft.slice_matrix(t, s, &x).expect("slots"), 0);
        if base.iter().all(Gf::is_zero) {
            continue;
        }
        let mut delta = BTreeMap::new();
        for &k in &shared {
            let mut y = x.clone();
            y.insert(k, x[&k].iter().map(|&c| c * lam).collect());
            let scaled = adj_column(&ft.slice_matrix(t, s, &y).expect("slots"), 0);
            let e = (0..=2u64)
                .find(|&e| scaled.iter().zip(&base).all(|(&a, &b)| a == b * lam.pow(e)))
                .ok_or_else(|| inconclusive(format!("adjugate column is not homogeneous in factor {k}")))?;
            delta.insert(k, e as i64);
        }
        return Ok(delta);
    }
    Err(inconclusive("adjugate column vanishes at every sampled point"))
}

enum SliceOutcome {
    Accepted(SliceRecord),
    Rejected(String),
}

struct LevelCount {
    points: u64,
    max_fibre: u64,
    base: [BTreeSet<Vec<Vec<u64>>>; 2],
    fibres: [BTreeSet<Vec<Vec<u64>>>; 2],
    rank_zero: bool,
}

fn count_level(tensor: &CoefficientTensor, s: usize, t: usize, fixed: &BTreeMap<usize, Vec<u64>>, field: GfField, cap: u64) -> Result<LevelCount, PicardError> {
    let lifted: FieldTensor<Gf> = tensor.lift(&field);
    let coords: BTreeMap<usize, Vec<Gf>> =
        fixed.iter().map(|(&k, v)| (k, v.iter().map(|&c| Gf::from_index(&field, c)).collect())).collect();
    let curve = lifted.contract_all(&coords);
    let en = enumerate_points(&curve, s, cap).map_err(|e| inconclusive(format!("slice enumeration: {e}")))?;
    let mut fibre_sizes: BTreeMap<Vec<u64>, u64> = BTreeMap::new();
    let mut out = LevelCount {
        points: en.points.len() as u64,
        max_fibre: 0,
        base: Default::default(),
        fibres: Default::default(),
        rank_zero: false,
    };
    // The base set of F_b should be the fibre over the point of factor t with x_b = 0.
    let tau: [Vec<Gf>; 2] = [
        vec![Gf::zero_in(&field), Gf::one_in(&field)],
        vec![Gf::one_in(&field), Gf::zero_in(&field)],
    ];
    for pt in &en.points {
        let shared: BTreeMap<usize, Vec<Gf>> = pt.without(&[t]);
        let m = curve.slice_matrix(t, s, &shared).expect("slots");
        let Ok(v) = m.corank1_kernel() else {
            out.rank_zero = true;
            continue;
        };
        let image = MultiProjPoint::new(BTreeMap::from([(s, v)])).expect("nonzero").indices();
        *fibre_sizes.entry(image.into_iter().flatten().collect()).or_insert(0) += 1;
        let adj = m.adjugate().expect("square");
        for b in 0..2 {
            if adj.column(b).iter().all(Gf::is_zero) {
                out.base[b].insert(pt.indices());
            }
            if pt.factor(t) == tau[b].as_slice() {
                out.fibres[b].insert(pt.indices());
            }
        }
    }
    out.max_fibre = fibre_sizes.values().copied().max().unwrap_or(0);
    Ok(out)
}

fn examine_slice(
    tensor: &CoefficientTensor,
    s: usize,
    t: usize,
    p: u64,
    fixed: BTreeMap<usize, Vec<u64>>,
    delta: &BTreeMap<usize, i64>,
    config: &OracleConfig,
) -> Result<SliceOutcome, PicardError> {
    let big_n = tensor.big_n();
    let basis = model_basis(big_n, s);
    let free: Vec<usize> = basis.iter().copied().filter(|k| !fixed.contains_key(k)).collect();
    let levels: Vec<LevelCount> = (1..=config.tower_height)
        .into_par_iter()
        .map(|k| {
            let field = GfField::finite(p, k).map_err(|e| PicardError::Invalid(e.to_string()))?;
            count_level(tensor, s, t, &fixed, field, config.enumeration_cap)
        })
        .collect::<Result<_, _>>()?;
    for (k, lv) in levels.iter().enumerate() {
        let q = p.pow(k as u32 + 1) as i128;
        if lv.rank_zero {
            return Ok(SliceOutcome::Rejected("slice meets the rank-0 locus".into()));
        }
        // Smooth genus-one curve: Hasse bound.
        let dev = lv.points as i128 - q - 1;
        if dev * dev > 4 * q {
            return Ok(SliceOutcome::Rejected(format!("{} points over GF({q}) violate the Hasse bound", lv.points)));
        }
        for b in 0..2 {
            if lv.base[b] != lv.fibres[b] {
                return Ok(SliceOutcome::Rejected(format!("base set of column {b} is not a fibre of factor {t}")));
            }
        }
    }
    // d_k = H_k . C with C cut by one hyperplane class per fixed factor.
    let degree = |k: usize| -> Result<i64, PicardError> {
        let e: Vec<u32> = basis.iter().map(|&x| u32::from(fixed.contains_key(&x)) + u32::from(x == k)).collect();
        Ok(intersection_number(1, big_n, &e)? as i64)
    };
    let strict = levels.iter().map(|lv| lv.max_fibre).max().unwrap_or(0);
    let total: i64 = basis.iter().map(|&k| Ok(delta.get(&k).copied().unwrap_or(0) * degree(k)?)).sum::<Result<i64, PicardError>>()?;
    let d_t = degree(t)?;
    let excess = total - strict as i64;
    if d_t == 0 || excess < 0 || excess % d_t != 0 {
        return Ok(SliceOutcome::Rejected(format!("fixed part of degree {excess} is not a multiple of H_{t}.C = {d_t}")));
    }
    let m = excess / d_t;
    for b in 0..2 {
        let has_base = levels.iter().any(|lv| !lv.base[b].is_empty());
        if (m > 0) != has_base {
            return Err(inconclusive(format!("fixed multiplicity {m} but column {b} has base points: {has_base}")));
        }
    }
    Ok(SliceOutcome::Accepted(SliceRecord {
        fixed,
        free,
        points: levels.iter().map(|lv| lv.points).collect(),
        base_points: levels.iter().map(|lv| vec![lv.base[0].len() as u64, lv.base[1].len() as u64]).collect(),
        strict_degree: strict,
        multiplicity: m,
    }))
}

fn run_prime(tensor: &CoefficientTensor, s: usize, t: usize, p: u64, config: &OracleConfig) -> Result<PrimeRecord, PicardError> {
    let big_n = tensor.big_n();
    let mut rng = SeededRng::derived(config.seed, p * 1_000_003 + (s * 64 + t) as u64);
    let delta = measure_delta(tensor, s, t, p, &mut rng)?;
    let shared: Vec<usize> = delta.keys().copied().collect();
    let prime_field = GfField::finite(p, 1).map_err(|e| PicardError::Invalid(e.to_string()))?;
    // Free pairs of shared factors (the curve also keeps factor t free).
    let pairs: Vec<(usize, usize)> = if big_n == 3 {
        vec![(shared[0], shared[1])]
    } else {
        let mut v = Vec::new();
        for a in 0..shared.len() {
            for b in a + 1..shared.len() {
                v.push((shared[a], shared[b]));
            }
        }
        v
    };
    let wanted = if big_n == 3 { 1 } else { config.slices.max(1).min(pairs.len()) };
    let mut slices = Vec::new();
    let mut rejected = 0;
    let mut reasons = Vec::new();
    for &(a, b) in pairs.iter().take(wanted) {
        let draws = if big_n == 3 { 1 } else { config.redraws.max(1) };
        let mut accepted = None;
        for _ in 0..draws {
            let fixed: BTreeMap<usize, Vec<u64>> = shared
                .iter()
                .filter(|&&k| k != a && k != b)
                .map(|&k| (k, random_vector(prime_field, &mut rng).iter().map(Gf::index).collect()))
                .collect();
            match examine_slice(tensor, s, t, p, fixed, &delta, config)? {
                SliceOutcome::Accepted(r) => {
                    accepted = Some(r);
                    break;
                }
                SliceOutcome::Rejected(why) => {
                    rejected += 1;
                    reasons.push(why);
                }
            }
        }
        match accepted {
            Some(r) => slices.push(r),
            None => {
                return Err(inconclusive(format!(
                    "no usable curve slice over GF({p}) with free factors {{{t}, {a}, {b}}}: {}",
                    reasons.last().cloned().unwrap_or_default()
                )))
            }
        }
    }
    let m = slices[0].multiplicity;
    if slices.iter().any(|r| r.multiplicity != m) {
        return Err(inconclusive(format!("slices over GF({p}) disagree on the fixed multiplicity")));
    }
    let basis = model_basis(big_n, s);
    let class: Vec<i64> = basis.iter().map(|&k| if k == t { -m } else { delta[&k] }).collect();
    Ok(PrimeRecord { prime: p, delta: basis.iter().map(|k| delta.get(k).copied().unwrap_or(0)).collect(), class, slices, rejected_slices: rejected })
}
