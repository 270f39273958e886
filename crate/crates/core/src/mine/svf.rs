use rustc_hash::FxHashSet;

use crate::kg::{ClassDict, FactSet, Triple};

/// Class/relation pairings observed in the known facts.
///
/// `head_pairs` holds `(class(h), r)`, `tail_pairs` holds `(r, class(t))`.
/// Entities without a class pass every check.
#[derive(Debug, Clone)]
pub struct SemanticValidityFilter {
    classes: Vec<Option<u32>>,
    num_relations: u32,
    head_pairs: FxHashSet<(u32, u32)>,
    tail_pairs: FxHashSet<(u32, u32)>,
}

impl SemanticValidityFilter {
    pub fn build(known: &FactSet, classes: &ClassDict, num_entities: usize, num_relations: usize) -> Self {
        let classes: Vec<Option<u32>> = (0..num_entities as u32).map(|e| classes.class_of(e)).collect();
        let mut head_pairs = FxHashSet::default();
        let mut tail_pairs = FxHashSet::default();
        for f in known {
            if let Some(c) = classes[f.head as usize] {
                head_pairs.insert((c, f.relation));
            }
            if let Some(c) = classes[f.tail as usize] {
                tail_pairs.insert((f.relation, c));
            }
        }
        SemanticValidityFilter {
            classes,
            num_relations: num_relations as u32,
            head_pairs,
            tail_pairs,
        }
    }

    pub fn head_pairs(&self) -> &FxHashSet<(u32, u32)> {
        &self.head_pairs
    }

    pub fn tail_pairs(&self) -> &FxHashSet<(u32, u32)> {
        &self.tail_pairs
    }

    pub fn class_of(&self, e: u32) -> Option<u32> {
        self.classes.get(e as usize).copied().flatten()
    }

    fn head_ok(&self, e: u32, r: u32) -> bool {
        self.class_of(e).is_none_or(|c| self.head_pairs.contains(&(c, r)))
    }

    fn tail_ok(&self, r: u32, e: u32) -> bool {
        self.class_of(e).is_none_or(|c| self.tail_pairs.contains(&(r, c)))
    }

    /// Query `(e, r)` over augmented relation ids: a forward query needs
    /// `(class(e), r)` as a head pairing, a reciprocal one needs `(r, class(e))`
    /// as a tail pairing of the forward relation.
    pub fn query_ok(&self, e: u32, r: u32) -> bool {
        if r < self.num_relations {
            self.head_ok(e, r)
        } else {
            self.tail_ok(r - self.num_relations, e)
        }
    }

    /// Answer `e` to a query over augmented relation `r`.
    pub fn answer_ok(&self, r: u32, e: u32) -> bool {
        if r < self.num_relations {
            self.tail_ok(r, e)
        } else {
            self.head_ok(e, r - self.num_relations)
        }
    }

    /// Whether a canonical fact is reachable through at least one direction.
    pub fn admits(&self, f: &Triple, filter_tails: bool) -> bool {
        let fwd = self.head_ok(f.head, f.relation) && (!filter_tails || self.tail_ok(f.relation, f.tail));
        let rev = self.tail_ok(f.relation, f.tail) && (!filter_tails || self.head_ok(f.head, f.relation));
        fwd || rev
    }

    /// Fraction of `facts` the filter lets through. The conservative reading
    /// counts any fact touching a classless entity as missed.
    pub fn cover_rate(&self, facts: &FactSet, filter_tails: bool, conservative: bool) -> f64 {
        if facts.is_empty() {
            return 1.0;
        }
        let covered = facts
            .iter()
            .filter(|f| {
                let classless = self.class_of(f.head).is_none() || self.class_of(f.tail).is_none();
                !(conservative && classless) && self.admits(f, filter_tails)
            })
            .count();
        covered as f64 / facts.len() as f64
    }
}
