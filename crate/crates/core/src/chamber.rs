//! Chamber walk on the movable cone: nef chambers of the marked models,
//! transported into `N^1(X_0)` along flop words.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cone::{self, ConeRP, IMatrix, Int, Vector};
use crate::picard::{model_basis, nef_cone, PushforwardMatrix};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChamberError {
    #[error("inconsistent fan: {0}")]
    InconsistentFan(String),
    #[error("certificate is not closed")]
    NotClosed,
    #[error("stabilizer obstruction: {word:?} fixes chamber of X_{model}")]
    StabilizerObstruction { model: usize, matrix: IMatrix, word: Vec<usize> },
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// Pushforward matrices for every ordered pair, indexed by `(j, i)` for `X_j --> X_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PushforwardSet {
    big_n: usize,
    matrices: BTreeMap<(usize, usize), IMatrix>,
}

impl PushforwardSet {
    /// Checks completeness, unimodularity and `M_{i->j} M_{j->i} = I`.
    pub fn new(big_n: usize, list: &[PushforwardMatrix]) -> Result<Self, ChamberError> {
        let mut matrices = BTreeMap::new();
        for m in list {
            let [j, i] = m.flop;
            if j > big_n || i > big_n || j == i || m.matrix.len() != big_n || m.matrix.iter().any(|r| r.len() != big_n) {
                return Err(ChamberError::Invalid(format!("malformed matrix for flop {j} -> {i}")));
            }
            if matrices.insert((j, i), m.as_imatrix()).is_some() {
                return Err(ChamberError::Invalid(format!("duplicate matrix for flop {j} -> {i}")));
            }
        }
        Self::from_map(big_n, matrices)
    }

    pub fn from_map(big_n: usize, matrices: BTreeMap<(usize, usize), IMatrix>) -> Result<Self, ChamberError> {
        for j in 0..=big_n {
            for i in (0..=big_n).filter(|&i| i != j) {
                let m = matrices
                    .get(&(j, i))
                    .ok_or_else(|| ChamberError::Invalid(format!("missing matrix for flop {j} -> {i}")))?;
                if cone::det_i128(m).abs() != 1 {
                    return Err(ChamberError::InconsistentFan(format!("flop {j} -> {i} is not unimodular")));
                }
                if let Some(back) = matrices.get(&(i, j)) {
                    if cone::mat_mul(back, m) != cone::identity(big_n) {
                        return Err(ChamberError::InconsistentFan(format!("flops {j} -> {i} and {i} -> {j} are not inverse")));
                    }
                }
            }
        }
        Ok(PushforwardSet { big_n, matrices })
    }

    /// Every matrix the identity (degenerate sanity input).
    pub fn identity(big_n: usize) -> Self {
        let mut matrices = BTreeMap::new();
        for j in 0..=big_n {
            for i in (0..=big_n).filter(|&i| i != j) {
                matrices.insert((j, i), cone::identity(big_n));
            }
        }
        PushforwardSet { big_n, matrices }
    }

    pub fn big_n(&self) -> usize {
        self.big_n
    }

    pub fn get(&self, j: usize, i: usize) -> &IMatrix {
        &self.matrices[&(j, i)]
    }

    /// Transport of the endpoint of a word starting at model `word[0]`.
    pub fn word_matrix(&self, word: &[usize]) -> Result<IMatrix, ChamberError> {
        let mut t = cone::identity(self.big_n);
        for w in word.windows(2) {
            if w[0] == w[1] || w[0] > self.big_n || w[1] > self.big_n {
                return Err(ChamberError::Invalid(format!("bad step {} -> {}", w[0], w[1])));
            }
            t = cone::mat_mul(&t, self.get(w[1], w[0]));
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChamberNode {
    pub model: usize,
    /// `N^1(X_model) -> N^1(X_0)`.
    pub transport: IMatrix,
    pub chamber: ConeRP,
    pub word: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupElement {
    pub matrix: IMatrix,
    /// Loop of model indices from 0 back to 0.
    pub word: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WallMatch {
    /// Crossing leads to an already registered chamber.
    Registered { chamber: usize },
    /// A new orbit representative.
    Representative { chamber: usize },
    /// A translate of a representative by a generator.
    Translate { chamber: usize, generator: usize },
    Unexplored,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WallRecord {
    /// Index of the crossed chamber in `chambers`.
    pub from: usize,
    /// Model on the other side.
    pub to_model: usize,
    /// Primitive normal of the crossed facet in `N^1(X_0)`, pointing into `from`.
    pub normal: Vector,
    pub matched: WallMatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TilingStatus {
    Closed,
    FrontierOpen,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TilingCertificate {
    pub big_n: usize,
    /// Indices into `chambers` of the orbit representatives.
    pub orbits: Vec<usize>,
    pub chambers: Vec<ChamberNode>,
    pub generators: Vec<GroupElement>,
    pub walls: Vec<WallRecord>,
    pub explored_depth: usize,
    pub status: TilingStatus,
    /// Pairs of chambers checked for the fan property.
    pub fan_pairs_checked: usize,
}

impl TilingCertificate {
    pub fn representatives(&self) -> impl Iterator<Item = &ChamberNode> {
        self.orbits.iter().map(|&k| &self.chambers[k])
    }
}

/// Wall of `Nef(X_model)` opposite the class `H_to`, as a coordinate covector.
fn nef_facet(big_n: usize, model: usize, to: usize) -> Vector {
    let pos = model_basis(big_n, model).iter().position(|&k| k == to).expect("basis label");
    let mut f = vec![0; big_n];
    f[pos] = 1;
    f
}

/// Facet normal `f` on `N^1(X_model)` moved to `N^1(X_0)` by `T`: `f T^{-1}`.
fn transport_normal(f: &[Int], t_inv: &IMatrix) -> Vector {
    cone::primitive(cone::vec_mat(f, t_inv))
}

struct Candidate {
    from: usize,
    to_model: usize,
    transport: IMatrix,
    chamber: ConeRP,
    word: Vec<usize>,
    normal: Vector,
}

/// Breadth-first walk over chambers from `Nef(X_0)`; representatives are
/// expanded while their depth is below `depth_limit`.
pub fn chamber_bfs(set: &PushforwardSet, depth_limit: usize) -> Result<TilingCertificate, ChamberError> {
    let big_n = set.big_n();
    let nef = nef_cone(big_n);
    let root = ChamberNode { model: 0, transport: cone::identity(big_n), chamber: nef.clone(), word: vec![0] };
    let mut chambers = vec![root];
    let mut orbits = vec![0usize];
    let mut rep_of_model: BTreeMap<usize, usize> = BTreeMap::from([(0, 0)]);
    let mut generators: Vec<GroupElement> = Vec::new();
    let mut walls = Vec::new();
    let mut frontier = vec![0usize];
    let mut depth = 0;
    let mut open = false;
    while !frontier.is_empty() {
        if depth >= depth_limit {
            for &k in &frontier {
                let node = &chambers[k];
                let t_inv = cone::inverse_unimodular(&node.transport).expect("unimodular transport");
                for to in (0..=big_n).filter(|&i| i != node.model) {
                    let normal = transport_normal(&nef_facet(big_n, node.model, to), &t_inv);
                    walls.push(WallRecord { from: k, to_model: to, normal, matched: WallMatch::Unexplored });
                }
            }
            open = true;
            break;
        }
        let tasks: Vec<(usize, usize)> = frontier
            .iter()
            .flat_map(|&k| (0..=big_n).map(move |i| (k, i)))
            .filter(|&(k, i)| i != chambers[k].model)
            .collect();
        let candidates: Vec<Candidate> = tasks
            .par_iter()
            .map(|&(k, i)| {
                let node = &chambers[k];
                let transport = cone::mat_mul(&node.transport, set.get(i, node.model));
                let chamber = nef.transform(&transport);
                let t_inv = cone::inverse_unimodular(&node.transport).expect("unimodular transport");
                let normal = transport_normal(&nef_facet(big_n, node.model, i), &t_inv);
                let mut word = node.word.clone();
                word.push(i);
                Candidate { from: k, to_model: i, transport, chamber, word, normal }
            })
            .collect();
        let mut next = Vec::new();
        for c in candidates {
            if let Some(idx) = chambers.iter().position(|x| x.chamber == c.chamber) {
                let same = &chambers[idx];
                if same.model == c.to_model && same.transport != c.transport {
                    let g = cone::mat_mul(&c.transport, &cone::inverse_unimodular(&same.transport).expect("unimodular"));
                    push_generator(&mut generators, g, loop_word(&c.word, &same.word));
                }
                walls.push(WallRecord { from: c.from, to_model: c.to_model, normal: c.normal, matched: WallMatch::Registered { chamber: idx } });
                continue;
            }
            let from_cone = &chambers[c.from].chamber;
            let meet = from_cone.intersect(&c.chamber);
            let facet = from_cone.face(&c.normal);
            if meet != facet || meet.dimension() != big_n - 1 {
                return Err(ChamberError::InconsistentFan(format!(
                    "crossing {:?} meets its parent in dimension {} instead of the shared facet",
                    c.word,
                    meet.dimension()
                )));
            }
            let idx = chambers.len();
            let matched = match rep_of_model.get(&c.to_model) {
                None => {
                    rep_of_model.insert(c.to_model, idx);
                    orbits.push(idx);
                    next.push(idx);
                    WallMatch::Representative { chamber: idx }
                }
                Some(&r) => {
                    let rep = &chambers[r];
                    let g = cone::mat_mul(&c.transport, &cone::inverse_unimodular(&rep.transport).expect("unimodular"));
                    let generator = push_generator(&mut generators, g, loop_word(&c.word, &rep.word));
                    WallMatch::Translate { chamber: idx, generator }
                }
            };
            walls.push(WallRecord { from: c.from, to_model: c.to_model, normal: c.normal, matched });
            chambers.push(ChamberNode { model: c.to_model, transport: c.transport, chamber: c.chamber, word: c.word });
        }
        frontier = next;
        depth += 1;
    }
    let fan_pairs_checked = check_fan(&chambers)?;
    Ok(TilingCertificate {
        big_n,
        orbits,
        chambers,
        generators,
        walls,
        explored_depth: depth,
        status: if open { TilingStatus::FrontierOpen } else { TilingStatus::Closed },
        fan_pairs_checked,
    })
}

/// Loop `path ++ reverse(rep)[1..]`: walks to the new chamber, then back
/// along the representative's word.
fn loop_word(path: &[usize], rep: &[usize]) -> Vec<usize> {
    let mut w = path.to_vec();
    w.extend(rep.iter().rev().skip(1));
    w
}

fn push_generator(gens: &mut Vec<GroupElement>, matrix: IMatrix, word: Vec<usize>) -> usize {
    if let Some(k) = gens.iter().position(|g| g.matrix == matrix) {
        if word.len() < gens[k].word.len() || (word.len() == gens[k].word.len() && word < gens[k].word) {
            gens[k].word = word;
        }
        return k;
    }
    gens.push(GroupElement { matrix, word });
    gens.len() - 1
}

/// Distinct chambers meet in a common face; returns the number of pairs checked.
fn check_fan(chambers: &[ChamberNode]) -> Result<usize, ChamberError> {
    let pairs: Vec<(usize, usize)> =
        (0..chambers.len()).flat_map(|a| (a + 1..chambers.len()).map(move |b| (a, b))).collect();
    pairs.par_iter().try_for_each(|&(a, b)| {
        let (x, y) = (&chambers[a].chamber, &chambers[b].chamber);
        if x.separated_by_facet(y) {
            let meet = x.intersect(y);
            if x.has_face(&meet) && y.has_face(&meet) {
                return Ok(());
            }
        }
        Err(ChamberError::InconsistentFan(format!(
            "chambers {:?} and {:?} overlap beyond a common face",
            chambers[a].word, chambers[b].word
        )))
    })?;
    Ok(pairs.len())
}

/// Order of a unimodular matrix if it is at most `bound`; `None` means
/// infinite order (powers overflow or never return to the identity; the
/// maximal finite order in `GL_N(Z)` for `N <= 8` is far below the default bound).
pub fn finite_order(m: &IMatrix, bound: u32) -> Option<u32> {
    let id = cone::identity(m.len());
    let mut p = m.clone();
    for k in 1..=bound {
        if p == id {
            return Some(k);
        }
        let mut next = vec![vec![0 as Int; m.len()]; m.len()];
        for i in 0..m.len() {
            for j in 0..m.len() {
                let mut acc: Int = 0;
                for l in 0..m.len() {
                    acc = acc.checked_add(p[i][l].checked_mul(m[l][j])?)?;
                }
                next[i][j] = acc;
            }
        }
        p = next;
    }
    None
}

pub const ORDER_BOUND: u32 = 2520;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorReport {
    pub element: GroupElement,
    pub determinant: Int,
    /// `None`: infinite order.
    pub order: Option<u32>,
    /// The word's matrix product equals the recorded matrix.
    pub word_replayed: bool,
}

/// Deduplicated generators with unimodularity, order and word checks, plus
/// the closure check on pairwise products.
pub fn bir_generators(cert: &TilingCertificate, set: &PushforwardSet) -> Result<Vec<GeneratorReport>, ChamberError> {
    if cert.status != TilingStatus::Closed {
        return Err(ChamberError::NotClosed);
    }
    let mut out = Vec::new();
    for g in &cert.generators {
        let determinant = cone::det_i128(&g.matrix);
        if determinant.abs() != 1 {
            return Err(ChamberError::InconsistentFan(format!("generator {:?} is not unimodular", g.word)));
        }
        let replay = set.word_matrix(&g.word)?;
        out.push(GeneratorReport {
            element: g.clone(),
            determinant,
            order: finite_order(&g.matrix, ORDER_BOUND),
            word_replayed: replay == g.matrix && g.word.first() == Some(&0) && g.word.last() == Some(&0),
        });
    }
    check_products(cert)?;
    Ok(out)
}

/// Every product of two generators sends `Nef(X_0)` to a chamber that is
/// either registered or interior-disjoint from all registered chambers.
fn check_products(cert: &TilingCertificate) -> Result<(), ChamberError> {
    let base = &cert.chambers[0].chamber;
    let pairs: Vec<(usize, usize)> =
        (0..cert.generators.len()).flat_map(|a| (0..cert.generators.len()).map(move |b| (a, b))).collect();
    pairs.par_iter().try_for_each(|&(a, b)| {
        let p = cone::mat_mul(&cert.generators[a].matrix, &cert.generators[b].matrix);
        let image = base.transform(&p);
        for c in &cert.chambers {
            if c.chamber != image && c.chamber.interiors_overlap(&image) {
                return Err(ChamberError::InconsistentFan(format!(
                    "product of generators {a} and {b} overlaps chamber {:?}",
                    c.word
                )));
            }
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::picard::structural_set;

    #[test]
    fn identity_set_gives_one_chamber() {
        let cert = chamber_bfs(&PushforwardSet::identity(3), 4).unwrap();
        assert_eq!(cert.status, TilingStatus::Closed);
        assert_eq!(cert.orbits.len(), 1);
        assert_eq!(cert.chambers.len(), 1);
        assert!(cert.generators.is_empty());
        assert!(bir_generators(&cert, &PushforwardSet::identity(3)).unwrap().is_empty());
    }

    #[test]
    fn depth_zero_is_frontier_open() {
        let set = PushforwardSet::new(3, &structural_set(1, 3).unwrap()).unwrap();
        let cert = chamber_bfs(&set, 0).unwrap();
        assert_eq!(cert.status, TilingStatus::FrontierOpen);
        assert_eq!(cert.walls.len(), 3);
        assert!(cert.walls.iter().all(|w| w.matched == WallMatch::Unexplored));
        assert_eq!(bir_generators(&cert, &set), Err(ChamberError::NotClosed));
    }

    #[test]
    fn structural_n1_n3_closes() {
        let set = PushforwardSet::new(3, &structural_set(1, 3).unwrap()).unwrap();
        let cert = chamber_bfs(&set, 3).unwrap();
        assert_eq!(cert.status, TilingStatus::Closed);
        assert_eq!(cert.orbits.len(), 4);
        assert!(!cert.generators.is_empty());
        for g in bir_generators(&cert, &set).unwrap() {
            assert!(g.word_replayed);
            assert_eq!(g.determinant.abs(), 1);
        }
    }

    #[test]
    fn corrupted_matrix_is_inconsistent() {
        let mut list = structural_set(1, 3).unwrap();
        list[4].matrix[1][0] += 1;
        assert!(matches!(PushforwardSet::new(3, &list), Err(ChamberError::InconsistentFan(_))));
    }

    #[test]
    fn orders() {
        assert_eq!(finite_order(&vec![vec![0, -1], vec![1, 0]], ORDER_BOUND), Some(4));
        assert_eq!(finite_order(&vec![vec![1, 1], vec![0, 1]], 100), None);
        assert_eq!(finite_order(&vec![vec![2, 1], vec![1, 1]], ORDER_BOUND), None);
    }
}
