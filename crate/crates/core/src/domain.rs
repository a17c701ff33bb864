//! Fundamental-domain candidate for the group generated by the chamber-walk
//! generators, certified on a finite ball of group elements.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::BigRational;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chamber::{ChamberError, ChamberNode, GroupElement, TilingCertificate, TilingStatus};
use crate::cone::{self, ConeRP, IMatrix, Int, Vector};

/// Largest ball enumerated.
pub const MAX_BALL_SIZE: usize = 250_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certification {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FundamentalDomainCandidate {
    pub cone: ConeRP,
    pub ball_radius: usize,
    pub ball_size: usize,
    /// Dirichlet cuts applied to the hull of the representatives.
    pub cuts: usize,
    /// Chamber stabilizers beyond the ball are assumed trivial.
    pub stabilizer_assumption: bool,
    pub certified: Vec<Certification>,
    /// Disjointness for translates outside the ball is not certified.
    pub beyond_ball_certified: bool,
}

impl FundamentalDomainCandidate {
    pub fn all_passed(&self) -> bool {
        self.certified.iter().all(|c| c.passed)
    }
}

/// A ball element: matrix, inverse and a shortest word in the generators.
#[derive(Debug, Clone)]
struct BallElement {
    matrix: IMatrix,
    inverse: IMatrix,
    /// Letter words, leftmost letter applied last.
    letters: Vec<Vec<usize>>,
}

/// Elements of word length `<= radius` in the generators and their inverses,
/// breadth-first, deduplicated by matrix.
fn group_ball(generators: &[GroupElement], big_n: usize, radius: usize) -> Result<Vec<BallElement>, ChamberError> {
    // (matrix, inverse, word of the letter as a loop)
    let mut letters: Vec<(IMatrix, IMatrix, Vec<usize>)> = Vec::new();
    for g in generators {
        let inv = cone::inverse_unimodular(&g.matrix).map_err(|_| ChamberError::Invalid("generator not unimodular".into()))?;
        let rev: Vec<usize> = g.word.iter().rev().copied().collect();
        for letter in [(g.matrix.clone(), inv.clone(), g.word.clone()), (inv, g.matrix.clone(), rev)] {
            if !letters.iter().any(|l| l.0 == letter.0) {
                letters.push(letter);
            }
        }
    }
    let id = cone::identity(big_n);
    let mut seen: BTreeSet<IMatrix> = BTreeSet::from([id.clone()]);
    let mut ball = vec![BallElement { matrix: id.clone(), inverse: id, letters: Vec::new() }];
    let mut layer = vec![0usize];
    for _ in 0..radius {
        let fresh: Vec<BallElement> = layer
            .par_iter()
            .flat_map_iter(|&k| {
                let e = &ball[k];
                letters.iter().map(move |(m, inv, w)| BallElement {
                    matrix: cone::mat_mul(m, &e.matrix),
                    inverse: cone::mat_mul(&e.inverse, inv),
                    letters: std::iter::once(w.clone()).chain(e.letters.iter().cloned()).collect(),
                })
            })
            .collect();
        let mut next = Vec::new();
        for e in fresh {
            if seen.insert(e.matrix.clone()) {
                next.push(ball.len());
                ball.push(e);
                if ball.len() > MAX_BALL_SIZE {
                    return Err(ChamberError::Invalid(format!("group ball exceeds {MAX_BALL_SIZE} elements")));
                }
            }
        }
        layer = next;
    }
    Ok(ball)
}

fn sum_facets(c: &ConeRP) -> Vector {
    let mut xi = vec![0; c.ambient_dim()];
    for f in c.facets() {
        for (x, y) in xi.iter_mut().zip(f) {
            *x += y;
        }
    }
    xi
}

fn fixes(m: &IMatrix, c: &ConeRP) -> bool {
    let mut img: Vec<Vector> = c.generators().iter().map(|g| cone::primitive(cone::mat_vec(m, g))).collect();
    img.sort();
    img == c.generators()
}

/// Concatenates loops at model 0; the word of `A B` is that of `A` followed by that of `B`.
fn splice_loops(letters: &[Vec<usize>]) -> Vec<usize> {
    let mut word = vec![0];
    for w in letters {
        word.extend(w.iter().skip(1));
    }
    word
}

/// Builds `Pi` from the hull of the orbit representatives, trims it by the
/// cuts `(xi g - xi) . x >= 0` for ball elements `g` whose translate overlaps
/// it, and certifies disjointness and coverage on the ball.
pub fn fundamental_domain(cert: &TilingCertificate, radius: usize) -> Result<FundamentalDomainCandidate, ChamberError> {
    if cert.status != TilingStatus::Closed {
        return Err(ChamberError::NotClosed);
    }
    let big_n = cert.big_n;
    let reps: Vec<&ChamberNode> = cert.representatives().collect();
    let hull_gens: Vec<Vector> = reps.iter().flat_map(|r| r.chamber.generators().iter().cloned()).collect();
    let pi0 = ConeRP::from_generators(big_n, &hull_gens).map_err(|e| ChamberError::Invalid(format!("hull of representatives: {e}")))?;
    let ball = group_ball(&cert.generators, big_n, radius)?;

    if let Some((e, r)) = ball[1..]
        .par_iter()
        .find_map_first(|e| reps.iter().find(|r| fixes(&e.matrix, &r.chamber)).map(|r| (e, r)))
    {
        let word = splice_loops(&e.letters);
        return Err(ChamberError::StabilizerObstruction { model: r.model, matrix: e.matrix.clone(), word });
    }

    let xi = sum_facets(&pi0);
    let cuts: Vec<Vector> = ball[1..]
        .par_iter()
        .filter(|e| pi0.interiors_overlap(&pi0.transform_unimodular(&e.matrix, &e.inverse)))
        .map(|e| {
            let xg = cone::vec_mat(&xi, &e.matrix);
            cone::primitive(xg.iter().zip(&xi).map(|(a, b)| a - b).collect())
        })
        .collect();
    if cuts.iter().any(|c| c.iter().all(|&x| x == 0)) {
        return Err(ChamberError::Invalid("Dirichlet centre is fixed by a ball element".into()));
    }
    let mut ineqs: Vec<Vector> = pi0.facets().to_vec();
    ineqs.extend(cuts.iter().cloned());
    let pi = ConeRP::from_inequalities(big_n, &ineqs, &[]).map_err(|e| ChamberError::Invalid(format!("trimmed domain: {e}")))?;

    let mut certified = Vec::new();
    certified.push(Certification {
        name: "rational-polyhedral".into(),
        passed: pi.dimension() == big_n,
        detail: format!("{} generators, {} facets, dimension {}", pi.generators().len(), pi.facets().len(), pi.dimension()),
    });
    let nef0 = &cert.chambers[0].chamber;
    let meet = pi.intersect(nef0);
    certified.push(Certification {
        name: "meets-interior-of-reference-chamber".into(),
        passed: meet.dimension() == big_n,
        detail: format!("dim(Pi ∩ Nef(X_0)) = {}", meet.dimension()),
    });
    let inside = pi.generators().iter().all(|g| pi0.contains(g));
    certified.push(Certification {
        name: "inside-hull-of-chambers".into(),
        passed: inside,
        detail: "Pi is contained in the convex hull of the orbit representatives".into(),
    });

    let translates: Vec<ConeRP> = ball.par_iter().map(|e| pi.transform_unimodular(&e.matrix, &e.inverse)).collect();
    let overlaps: Vec<usize> =
        (1..ball.len()).into_par_iter().filter(|&k| pi.interiors_overlap(&translates[k])).collect();
    certified.push(Certification {
        name: "ball-disjointness".into(),
        passed: overlaps.is_empty(),
        detail: format!(
            "int(Pi) ∩ int(g Pi) = ∅ for all {} elements g ≠ id of B_{radius} (hence for every pair g, h with g⁻¹h in the ball); {} overlaps",
            ball.len() - 1,
            overlaps.len()
        ),
    });

    let uncovered: Vec<Vec<usize>> = cert
        .chambers
        .par_iter()
        .filter(|c| !covered(&c.chamber, &translates))
        .map(|c| c.word.clone())
        .collect();
    certified.push(Certification {
        name: "ball-covers-explored-chambers".into(),
        passed: uncovered.is_empty(),
        detail: format!("{} explored chambers, uncovered: {:?}", cert.chambers.len(), uncovered),
    });

    Ok(FundamentalDomainCandidate {
        cone: pi,
        ball_radius: radius,
        ball_size: ball.len(),
        cuts: cuts.len(),
        stabilizer_assumption: true,
        certified,
        beyond_ball_certified: false,
    })
}

/// `c` lies in the union of the translates: single containment, else the
/// exact volumes of the (interior-disjoint) pieces add up.
fn covered(c: &ConeRP, translates: &[ConeRP]) -> bool {
    if translates.iter().any(|t| t.contains_cone(c)) {
        return true;
    }
    let eta = sum_facets(c);
    let total = c.volume(&eta);
    let mut acc = BigRational::zero();
    for t in translates.iter().filter(|t| !t.separated_by_facet(c)) {
        let piece = t.intersect(c);
        if piece.dimension() == c.ambient_dim() {
            acc += piece.volume(&eta);
        }
    }
    acc == total
}

/// Hand-checkable 2D fixture: the shear `[[1,0],[1,1]]` acting on the tiling
/// of the open right half-plane by the chambers `Cone((1,k),(1,k+1))`.
pub fn shear_toy_certificate(explored: i64) -> TilingCertificate {
    let shear: IMatrix = vec![vec![1, 0], vec![1, 1]];
    let rep_transport: IMatrix = vec![vec![1, 1], vec![0, 1]];
    let chamber = |k: i64| {
        ConeRP::from_generators(2, &[vec![1, k as Int], vec![1, k as Int + 1]]).expect("pointed")
    };
    let mut chambers = vec![ChamberNode { model: 0, transport: rep_transport.clone(), chamber: chamber(0), word: vec![0] }];
    for k in (-explored..=explored).filter(|&k| k != 0) {
        let mut t = rep_transport.clone();
        let step = if k > 0 { shear.clone() } else { cone::inverse_unimodular(&shear).expect("unimodular") };
        for _ in 0..k.abs() {
            t = cone::mat_mul(&step, &t);
        }
        chambers.push(ChamberNode { model: 0, transport: t, chamber: chamber(k), word: vec![0; k.unsigned_abs() as usize + 1] });
    }
    TilingCertificate {
        big_n: 2,
        orbits: vec![0],
        chambers,
        generators: vec![GroupElement { matrix: shear, word: vec![0, 0] }],
        walls: Vec::new(),
        explored_depth: explored as usize,
        status: TilingStatus::Closed,
        fan_pairs_checked: 0,
    }
}

/// Element counts per word length (for reports).
pub fn ball_profile(cert: &TilingCertificate, radius: usize) -> Result<BTreeMap<usize, usize>, ChamberError> {
    let ball = group_ball(&cert.generators, cert.big_n, radius)?;
    let mut out = BTreeMap::new();
    for e in &ball {
        *out.entry(e.letters.len()).or_insert(0) += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chamber::{chamber_bfs, PushforwardSet};

    #[test]
    fn trivial_group_gives_reference_chamber() {
        let cert = chamber_bfs(&PushforwardSet::identity(3), 2).unwrap();
        let d = fundamental_domain(&cert, 3).unwrap();
        assert_eq!(d.cone, ConeRP::orthant(3));
        assert!(d.all_passed());
        assert_eq!(d.ball_size, 1);
    }

    #[test]
    fn shear_toy() {
        let cert = shear_toy_certificate(6);
        let d = fundamental_domain(&cert, 6).unwrap();
        assert_eq!(d.cone, cert.chambers[0].chamber);
        assert_eq!(d.ball_size, 13);
        assert!(d.all_passed(), "{:?}", d.certified);
        assert!(!d.beyond_ball_certified);
    }

    #[test]
    fn stabilizer_detected() {
        let mut cert = chamber_bfs(&PushforwardSet::identity(2), 1).unwrap();
        // Swapping the two basis classes fixes Nef(X_0) setwise.
        cert.generators.push(GroupElement { matrix: vec![vec![0, 1], vec![1, 0]], word: vec![0, 1, 0] });
        assert!(matches!(fundamental_domain(&cert, 2), Err(ChamberError::StabilizerObstruction { model: 0, .. })));
    }

    #[test]
    fn ball_words_replay() {
        let set = PushforwardSet::new(3, &crate::picard::structural_set(1, 3).unwrap()).unwrap();
        let cert = chamber_bfs(&set, 3).unwrap();
        for e in group_ball(&cert.generators, 3, 3).unwrap() {
            assert_eq!(set.word_matrix(&splice_loops(&e.letters)).unwrap(), e.matrix);
        }
    }
}
