use std::collections::BTreeMap;

use crate::exactnum::{normalize_projective, Field, FiniteField, Gf, GfField};

/// Point of a product of projective spaces, one normalised vector per factor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiProjPoint<F: Field + Ord> {
    coords: BTreeMap<usize, Vec<F>>,
}

impl<F: Field + Ord> MultiProjPoint<F> {
    /// Normalises every factor; `None` if some vector is zero.
    pub fn new(coords: BTreeMap<usize, Vec<F>>) -> Option<Self> {
        let mut out = BTreeMap::new();
        for (s, v) in coords {
            out.insert(s, normalize_projective(v)?);
        }
        Some(MultiProjPoint { coords: out })
    }

    pub fn coords(&self) -> &BTreeMap<usize, Vec<F>> {
        &self.coords
    }

    pub fn factor(&self, slot: usize) -> &[F] {
        &self.coords[&slot]
    }

    pub fn labels(&self) -> Vec<usize> {
        self.coords.keys().copied().collect()
    }

    /// Coordinates of every factor except `skip`.
    pub fn without(&self, skip: &[usize]) -> BTreeMap<usize, Vec<F>> {
        self.coords.iter().filter(|(s, _)| !skip.contains(s)).map(|(s, v)| (*s, v.clone())).collect()
    }

    /// Drops the listed factors.
    pub fn project(&self, skip: &[usize]) -> Self {
        MultiProjPoint { coords: self.without(skip) }
    }

    /// Replaces (or adds) one factor.
    pub fn with_factor(&self, slot: usize, v: Vec<F>) -> Option<Self> {
        let mut coords = self.coords.clone();
        coords.insert(slot, normalize_projective(v)?);
        Some(MultiProjPoint { coords })
    }
}

impl Ord for Gf {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.index().cmp(&other.index())
    }
}

impl PartialOrd for Gf {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl MultiProjPoint<Gf> {
    /// Canonical element indices, factor by factor in label order.
    pub fn indices(&self) -> Vec<Vec<u64>> {
        self.coords.values().map(|v| v.iter().map(Gf::index).collect()).collect()
    }

    pub fn field(&self) -> GfField {
        self.coords.values().next().and_then(|v| v.first()).map(Field::ctx).expect("nonempty point")
    }

    /// Re-embeds a point with prime-field coordinates into `target`.
    pub fn embed(&self, target: GfField) -> Self {
        assert_eq!(self.field().characteristic(), target.characteristic());
        let coords = self
            .coords
            .iter()
            .map(|(s, v)| (*s, v.iter().map(|x| embed_elem(*x, target)).collect()))
            .collect();
        MultiProjPoint { coords }
    }
}

/// Embeds a prime-subfield element into another field of the same characteristic.
pub fn embed_elem(x: Gf, target: GfField) -> Gf {
    assert!(x.index() < x.field().characteristic(), "only prime-subfield elements embed canonically");
    target.elem(x.index() as i64)
}

/// All points of `P^{width-1}` over the field, in lexicographic index order.
pub fn projective_points(field: GfField, width: usize) -> Vec<Vec<Gf>> {
    let q = field.order();
    let mut out = Vec::new();
    for lead in 0..width {
        let tail = width - lead - 1;
        let count = q.pow(tail as u32);
        for t in 0..count {
            let mut v = vec![Gf::zero_in(&field); width];
            v[lead] = Gf::one_in(&field);
            let mut rest = t;
            for k in (lead + 1..width).rev() {
                v[k] = Gf::from_index(&field, rest % q);
                rest /= q;
            }
            out.push(v);
        }
    }
    out.sort_by(|a, b| a.iter().map(Gf::index).cmp(b.iter().map(Gf::index)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p1_over_f3() {
        let f = GfField::finite(3, 1).unwrap();
        let pts: Vec<Vec<u64>> = projective_points(f, 2).iter().map(|v| v.iter().map(Gf::index).collect()).collect();
        assert_eq!(pts, vec![vec![0, 1], vec![1, 0], vec![1, 1], vec![1, 2]]);
        assert_eq!(projective_points(f, 3).len(), 13);
    }

    #[test]
    fn normalisation_is_canonical() {
        let f = GfField::finite(5, 1).unwrap();
        let a = MultiProjPoint::new(BTreeMap::from([(1, vec![f.elem(2), f.elem(4)])])).unwrap();
        let b = MultiProjPoint::new(BTreeMap::from([(1, vec![f.elem(1), f.elem(2)])])).unwrap();
        assert_eq!(a, b);
        assert!(MultiProjPoint::new(BTreeMap::from([(1, vec![f.elem(0), f.elem(0)])])).is_none());
    }
}
