use std::hash::BuildHasherDefault;

use indexmap::IndexSet;
use rustc_hash::FxHasher;
use serde::{Deserialize, Serialize};

use super::Triple;

type Inner = IndexSet<Triple, BuildHasherDefault<FxHasher>>;

/// Hash set of triples that remembers insertion order, so iteration (and
/// everything seeded from it) is reproducible.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "Vec<Triple>", from = "Vec<Triple>")]
pub struct FactSet {
    facts: Inner,
}

impl FactSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        FactSet {
            facts: Inner::with_capacity_and_hasher(n, Default::default()),
        }
    }

    /// Returns `true` when the fact was not present before.
    #[inline]
    pub fn insert(&mut self, fact: Triple) -> bool {
        self.facts.insert(fact)
    }

    #[inline]
    pub fn contains(&self, fact: &Triple) -> bool {
        self.facts.contains(fact)
    }

    /// Removes a fact, preserving the order of the remaining ones.
    pub fn remove(&mut self, fact: &Triple) -> bool {
        self.facts.shift_remove(fact)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.facts.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &Triple> + '_ {
        self.facts.iter()
    }

    pub fn get_index(&self, i: usize) -> Option<&Triple> {
        self.facts.get_index(i)
    }

    pub fn is_subset(&self, other: &FactSet) -> bool {
        self.facts.iter().all(|f| other.contains(f))
    }

    pub fn is_disjoint(&self, other: &FactSet) -> bool {
        let (small, large) = if self.len() <= other.len() { (self, other) } else { (other, self) };
        small.iter().all(|f| !large.contains(f))
    }

    /// Facts of `self` that are also in `other`, in `self`'s order.
    pub fn intersection(&self, other: &FactSet) -> FactSet {
        self.iter().filter(|f| other.contains(f)).copied().collect()
    }

    pub fn union(&self, other: &FactSet) -> FactSet {
        let mut out = self.clone();
        out.extend(other.iter().copied());
        out
    }

    pub fn difference(&self, other: &FactSet) -> FactSet {
        self.iter().filter(|f| !other.contains(f)).copied().collect()
    }

    pub fn to_vec(&self) -> Vec<Triple> {
        self.facts.iter().copied().collect()
    }
}

impl Extend<Triple> for FactSet {
    fn extend<I: IntoIterator<Item = Triple>>(&mut self, iter: I) {
        self.facts.extend(iter)
    }
}

impl FromIterator<Triple> for FactSet {
    fn from_iter<I: IntoIterator<Item = Triple>>(iter: I) -> Self {
        FactSet {
            facts: iter.into_iter().collect(),
        }
    }
}

impl<'a> IntoIterator for &'a FactSet {
    type Item = &'a Triple;
    type IntoIter = indexmap::set::Iter<'a, Triple>;

    fn into_iter(self) -> Self::IntoIter {
        self.facts.iter()
    }
}

impl From<Vec<Triple>> for FactSet {
    fn from(v: Vec<Triple>) -> Self {
        v.into_iter().collect()
    }
}

impl From<FactSet> for Vec<Triple> {
    fn from(s: FactSet) -> Self {
        s.facts.into_iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_semantics_and_order() {
        let mut s = FactSet::new();
        assert!(s.insert(Triple::new(2, 0, 1)));
        assert!(s.insert(Triple::new(0, 0, 1)));
        assert!(!s.insert(Triple::new(2, 0, 1)));
        assert_eq!(s.len(), 2);
        assert_eq!(s.to_vec(), vec![Triple::new(2, 0, 1), Triple::new(0, 0, 1)]);
        assert!(s.remove(&Triple::new(2, 0, 1)));
        assert_eq!(s.to_vec(), vec![Triple::new(0, 0, 1)]);
    }

    #[test]
    fn algebra() {
        let a: FactSet = [(0, 0, 1), (1, 0, 2), (2, 0, 0)].map(Triple::from).into_iter().collect();
        let b: FactSet = [(1, 0, 2)].map(Triple::from).into_iter().collect();
        assert!(b.is_subset(&a));
        assert_eq!(a.intersection(&b), b);
        assert_eq!(a.difference(&b).len(), 2);
        assert!(a.difference(&b).is_disjoint(&b));
        assert_eq!(a.difference(&b).union(&b).len(), 3);
    }
}
