use rustc_hash::FxHashMap;

use crate::kg::Triple;
use crate::scalar::Scalar;

/// One heap slot; `triple == None` marks a dummy of score `−∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate<S> {
    pub score: S,
    pub triple: Option<Triple>,
}

impl<S: Scalar> Candidate<S> {
    fn dummy() -> Self {
        Candidate {
            score: S::neg_infinity(),
            triple: None,
        }
    }

    /// Ranking: higher score first, then lower triple id; dummies rank last.
    #[inline]
    pub fn outranks(&self, other: &Self) -> bool {
        match (self.triple, other.triple) {
            (None, _) => false,
            (Some(_), None) => true,
            (Some(a), Some(b)) => self.score > other.score || (self.score == other.score && a < b),
        }
    }
}

/// Outcome of [`CandidateHeap::offer`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Offer {
    Rejected,
    /// Evicted the root.
    Replaced,
    /// Raised the score of a triple already held.
    Raised,
}

/// Fixed-capacity min-heap of the best candidates seen so far.
///
/// Starts with `capacity` dummies and only ever replaces its root, so the
/// size is constant. A triple offered twice keeps its best score.
#[derive(Debug, Clone)]
pub struct CandidateHeap<S> {
    slots: Vec<Candidate<S>>,
    position: FxHashMap<Triple, usize>,
}

impl<S: Scalar> CandidateHeap<S> {
    pub fn new(capacity: usize) -> Self {
        CandidateHeap {
            slots: vec![Candidate::dummy(); capacity],
            position: FxHashMap::default(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    /// The weakest held candidate; `None` only when capacity is 0.
    pub fn root(&self) -> Option<&Candidate<S>> {
        self.slots.first()
    }

    /// Root score, `+∞` for a zero-capacity heap (nothing can enter).
    pub fn threshold(&self) -> S {
        self.root().map_or(S::infinity(), |c| c.score)
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.position.contains_key(triple)
    }

    pub fn offer(&mut self, score: S, triple: Triple) -> Offer {
        let cand = Candidate {
            score,
            triple: Some(triple),
        };
        if let Some(&i) = self.position.get(&triple) {
            if score > self.slots[i].score {
                self.slots[i].score = score;
                self.sift_down(i);
                return Offer::Raised;
            }
            return Offer::Rejected;
        }
        match self.slots.first() {
            Some(root) if cand.outranks(root) => {
                if let Some(old) = root.triple {
                    self.position.remove(&old);
                }
                self.slots[0] = cand;
                self.position.insert(triple, 0);
                self.sift_down(0);
                Offer::Replaced
            }
            _ => Offer::Rejected,
        }
    }

    fn sift_down(&mut self, mut i: usize) {
        let n = self.slots.len();
        loop {
            let (l, r) = (2 * i + 1, 2 * i + 2);
            let mut weakest = i;
            if l < n && self.slots[weakest].outranks(&self.slots[l]) {
                weakest = l;
            }
            if r < n && self.slots[weakest].outranks(&self.slots[r]) {
                weakest = r;
            }
            if weakest == i {
                return;
            }
            self.slots.swap(i, weakest);
            for j in [i, weakest] {
                if let Some(t) = self.slots[j].triple {
                    self.position.insert(t, j);
                }
            }
            i = weakest;
        }
    }

    /// Non-dummy entries, best first.
    pub fn into_sorted(self) -> Vec<(Triple, S)> {
        let mut v: Vec<_> = self
            .slots
            .into_iter()
            .filter_map(|c| c.triple.map(|t| (t, c.score)))
            .collect();
        v.sort_by(|a, b| rank_order(a, b));
        v
    }

    pub fn len_real(&self) -> usize {
        self.position.len()
    }
}

/// Total order used for outputs: score descending, then triple ascending.
pub fn rank_order<S: Scalar>(a: &(Triple, S), b: &(Triple, S)) -> std::cmp::Ordering {
    b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0))
}
