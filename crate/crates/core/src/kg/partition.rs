use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashSet;

use super::{FactSet, KgError, Triple};

/// Initial completion ratio and the seed for shuffling the non-scaffold facts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionConfig {
    pub rho: f64,
    pub seed: u64,
}

impl PartitionConfig {
    pub fn new(rho: f64, seed: u64) -> Result<Self, KgError> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(KgError::InvalidRatio(rho));
        }
        Ok(PartitionConfig { rho, seed })
    }

    /// `⌊total · rho⌋`, tolerant to the representation error of `rho`.
    pub fn known_size(&self, total: usize) -> usize {
        ((total as f64 * self.rho + 1e-9).floor() as usize).min(total)
    }
}

/// First fact (in iteration order) introducing each unseen entity or relation.
pub fn scaffold(total: &FactSet) -> Vec<Triple> {
    let mut seen_e = FxHashSet::default();
    let mut seen_r = FxHashSet::default();
    let mut out = Vec::new();
    for f in total {
        if !seen_e.contains(&f.head) || !seen_e.contains(&f.tail) || !seen_r.contains(&f.relation) {
            seen_e.insert(f.head);
            seen_e.insert(f.tail);
            seen_r.insert(f.relation);
            out.push(*f);
        }
    }
    out
}

/// Splits `total` into `(known, unexplored)`.
///
/// The scaffold keeps every entity and relation represented in `known`. The
/// remaining facts are shuffled by `cfg.seed`; the first `|total| − n` become
/// unexplored and the rest join the scaffold, where `n = ⌊|total|·ρ⌋`.
pub fn partition(total: &FactSet, cfg: &PartitionConfig) -> Result<(FactSet, FactSet), KgError> {
    if !(cfg.rho > 0.0 && cfg.rho <= 1.0) {
        return Err(KgError::InvalidRatio(cfg.rho));
    }
    if total.is_empty() {
        return Err(KgError::EmptyTotal);
    }
    let n_total = total.len();
    let n_known = cfg.known_size(n_total);
    let scaffold = scaffold(total);
    if n_known < scaffold.len() {
        return Err(KgError::InfeasibleRatio {
            rho: cfg.rho,
            known: n_known,
            scaffold: scaffold.len(),
            min_rho: scaffold.len() as f64 / n_total as f64,
        });
    }
    let scaffold_set: FactSet = scaffold.iter().copied().collect();
    let mut remain: Vec<Triple> = total.iter().filter(|f| !scaffold_set.contains(f)).copied().collect();
    remain.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));

    let n_un = n_total - n_known;
    let unexplored: FactSet = remain[..n_un].iter().copied().collect();
    let mut known = FactSet::with_capacity(n_known);
    known.extend(remain[n_un..].iter().copied());
    known.extend(scaffold);
    Ok((known, unexplored))
}
