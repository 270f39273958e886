use serde::{Deserialize, Serialize};

/// A canonical fact `(head, relation, tail)` over dense ids.
///
/// Ordering is lexicographic on `(head, relation, tail)`, which is the
/// order of [`Triple::packed`]; mining breaks score ties by it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: u32,
    pub relation: u32,
    pub tail: u32,
}

impl Triple {
    #[inline]
    pub const fn new(head: u32, relation: u32, tail: u32) -> Self {
        Triple { head, relation, tail }
    }

    /// Single integer key, order-isomorphic to the derived `Ord`.
    #[inline]
    pub const fn packed(&self) -> u128 {
        ((self.head as u128) << 64) | ((self.relation as u128) << 32) | self.tail as u128
    }

    /// The companion `(tail, relation + num_relations, head)` used by the
    /// reciprocal training view.
    #[inline]
    pub const fn reciprocal(&self, num_relations: u32) -> Triple {
        Triple::new(self.tail, self.relation + num_relations, self.head)
    }

    /// Map an augmented fact (relation id possibly in `[R, 2R)`) back to its
    /// canonical forward form.
    #[inline]
    pub const fn canonical(&self, num_relations: u32) -> Triple {
        if self.relation >= num_relations {
            Triple::new(self.tail, self.relation - num_relations, self.head)
        } else {
            *self
        }
    }
}

impl From<(u32, u32, u32)> for Triple {
    fn from((h, r, t): (u32, u32, u32)) -> Self {
        Triple::new(h, r, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packed_order_matches_ord() {
        let a = Triple::new(1, 7, 3);
        let b = Triple::new(1, 8, 0);
        let c = Triple::new(2, 0, 0);
        assert!(a < b && b < c);
        assert!(a.packed() < b.packed() && b.packed() < c.packed());
    }

    #[test]
    fn reciprocal_round_trips() {
        let f = Triple::new(4, 2, 9);
        let r = f.reciprocal(5);
        assert_eq!(r, Triple::new(9, 7, 4));
        assert_eq!(r.canonical(5), f);
        assert_eq!(f.canonical(5), f);
    }
}
