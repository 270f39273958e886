//! Exact top-`n_c` mining of unvisited facts.

mod heap;
mod svf;

pub use heap::{rank_order, Candidate, CandidateHeap, Offer};
pub use svf::SemanticValidityFilter;

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{FactSet, Triple};
use crate::kge::{EmbeddingModel, ModelError};
use crate::scalar::Scalar;

/// Default cap on the candidate space [`mine_naive`] agrees to enumerate.
pub const NAIVE_GUARD: u64 = 100_000_000;

#[derive(Debug, Error)]
pub enum MineError {
    #[error("candidate space of {size} exceeds the naive enumeration guard {guard}")]
    GuardExceeded { size: u64, guard: u64 },
    #[error("maximum mining batch size must be positive")]
    ZeroBatch,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiningConfig {
    pub n_c: usize,
    /// Upper bound on the number of queries scored per batch.
    pub b_m_max: usize,
    pub warm_up: bool,
    pub root_filter: bool,
    pub svf: bool,
    /// With `svf`, also drop answers whose class never filled that slot.
    pub svf_tails: bool,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            n_c: 1000,
            b_m_max: 10_000,
            warm_up: true,
            root_filter: true,
            svf: true,
            svf_tails: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchStats {
    pub batch_index: usize,
    /// Queries in the batch.
    pub batch_size: usize,
    /// Candidate facts scored.
    pub candidates: u64,
    /// Candidates surviving the root filter.
    pub passed: u64,
    pub pass_rate: f64,
    pub heap_replacements: u64,
    /// Root score when the batch started.
    pub root_score: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MiningStats {
    pub batches: Vec<BatchStats>,
    pub queries: usize,
    pub candidates: u64,
    pub heap_replacements: u64,
    /// `n_c` minus the number of facts found, when the space ran dry.
    pub shortfall: usize,
    pub wall_ms: f64,
}

impl MiningStats {
    pub const CSV_HEADER: &'static str = "step,batch_index,batch_size,pass_rate,heap_replacements,wall_ms";

    pub fn write_csv_rows<W: Write>(&self, step: usize, mut w: W) -> std::io::Result<()> {
        for b in &self.batches {
            writeln!(
                w,
                "{step},{},{},{:.6},{},{:.3}",
                b.batch_index, b.batch_size, b.pass_rate, b.heap_replacements, b.wall_ms
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mined<S> {
    /// Canonical facts with their scores, best first.
    pub facts: Vec<(Triple, S)>,
    pub stats: MiningStats,
}

impl<S> Mined<S> {
    pub fn fact_set(&self) -> FactSet {
        self.facts.iter().map(|(f, _)| *f).collect()
    }
}

/// Query pairs `(h, r)` over augmented relation ids, ascending by `(r, h)`.
pub fn valid_queries(num_entities: usize, num_relations: usize, svf: Option<&SemanticValidityFilter>) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for r in 0..(2 * num_relations) as u32 {
        for h in 0..num_entities as u32 {
            if svf.is_none_or(|s| s.query_ok(h, r)) {
                out.push((h, r));
            }
        }
    }
    out
}

fn answer_masks(svf: Option<&SemanticValidityFilter>, cfg: &MiningConfig, num_entities: usize, num_relations: usize) -> Option<Vec<Vec<bool>>> {
    let svf = svf.filter(|_| cfg.svf && cfg.svf_tails)?;
    Some(
        (0..(2 * num_relations) as u32)
            .map(|r| (0..num_entities as u32).map(|e| svf.answer_ok(r, e)).collect())
            .collect(),
    )
}

/// The `n_c` highest-scoring canonical facts outside `visited`.
///
/// Queries are scored in batches; with `warm_up` the batch size starts at 1
/// and doubles up to `b_m_max`. With `root_filter` each batch is first cut in
/// bulk against the root score at batch start, so only survivors reach the
/// visited check and the heap. A fact reachable through both directions
/// keeps its better score. Ties rank the lower triple first.
pub fn mine<S: Scalar>(
    model: &EmbeddingModel<S>,
    visited: &FactSet,
    svf: Option<&SemanticValidityFilter>,
    cfg: &MiningConfig,
) -> Result<Mined<S>, MineError> {
    if cfg.b_m_max == 0 {
        return Err(MineError::ZeroBatch);
    }
    let start = Instant::now();
    let (view, _) = model.scoring_view()?;
    let model: &EmbeddingModel<S> = &view;
    let n_e = model.num_entities();
    let n_r = model.num_relations();
    let svf = svf.filter(|_| cfg.svf);
    let queries = valid_queries(n_e, n_r, svf);
    let masks = answer_masks(svf, cfg, n_e, n_r);
    let mut heap = CandidateHeap::<S>::new(cfg.n_c);
    let mut stats = MiningStats {
        queries: queries.len(),
        ..Default::default()
    };
    let pw = model.phi_width();

    let mut begin = 0;
    let mut size = if cfg.warm_up { 1 } else { cfg.b_m_max };
    while begin < queries.len() && cfg.n_c > 0 {
        let t0 = Instant::now();
        let batch = &queries[begin..(begin + size).min(queries.len())];
        let root = heap.threshold();
        let rows: Vec<(u64, Vec<(S, u32)>)> = batch
            .par_iter()
            .map_init(
                || vec![S::zero(); pw],
                |phi, &(h, r)| {
                    model.compose_into(h, r, phi).expect("query ids in range");
                    let mask = masks.as_ref().map(|m| &m[r as usize]);
                    let mut scored = 0u64;
                    let mut keep = Vec::new();
                    for t in 0..n_e as u32 {
                        if mask.is_some_and(|m| !m[t as usize]) {
                            continue;
                        }
                        scored += 1;
                        let s = model.score_composed(phi, t);
                        if !cfg.root_filter || s >= root {
                            keep.push((s, t));
                        }
                    }
                    (scored, keep)
                },
            )
            .collect();

        let mut candidates = 0u64;
        let mut passed = 0u64;
        let mut replacements = 0u64;
        for (&(h, r), (scored, keep)) in batch.iter().zip(rows) {
            candidates += scored;
            passed += keep.len() as u64;
            for (s, t) in keep {
                let f = Triple::new(h, r, t).canonical(n_r as u32);
                if visited.contains(&f) {
                    continue;
                }
                if heap.offer(s, f) != Offer::Rejected {
                    replacements += 1;
                }
            }
        }
        stats.batches.push(BatchStats {
            batch_index: stats.batches.len(),
            batch_size: batch.len(),
            candidates,
            passed,
            pass_rate: if candidates == 0 { 1.0 } else { passed as f64 / candidates as f64 },
            heap_replacements: replacements,
            root_score: root.as_f64(),
            wall_ms: t0.elapsed().as_secs_f64() * 1e3,
        });
        stats.candidates += candidates;
        stats.heap_replacements += replacements;

        begin += batch.len();
        if cfg.warm_up {
            size = (2 * size).min(cfg.b_m_max);
        }
    }
    let facts = heap.into_sorted();
    stats.shortfall = cfg.n_c - facts.len();
    stats.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(Mined { facts, stats })
}

/// Brute-force reference: score every candidate, keep the best score per
/// canonical fact, sort, truncate. With a filter, only candidates the
/// filter lets through are enumerated.
pub fn mine_naive<S: Scalar>(
    model: &EmbeddingModel<S>,
    visited: &FactSet,
    svf: Option<&SemanticValidityFilter>,
    svf_tails: bool,
    n_c: usize,
    guard: u64,
) -> Result<Vec<(Triple, S)>, MineError> {
    let (view, _) = model.scoring_view()?;
    let model: &EmbeddingModel<S> = &view;
    let n_e = model.num_entities() as u64;
    let n_r = model.num_relations() as u32;
    let size = n_e * n_e * 2 * n_r as u64;
    if size > guard {
        return Err(MineError::GuardExceeded { size, guard });
    }
    if n_c == 0 {
        return Ok(Vec::new());
    }
    let mut best: FxHashMap<Triple, S> = FxHashMap::default();
    for r in 0..2 * n_r {
        for h in 0..n_e as u32 {
            if svf.is_some_and(|s| !s.query_ok(h, r)) {
                continue;
            }
            let batch = model.score_tails(h, r)?;
            for (t, &s) in batch.scores.iter().enumerate() {
                let t = t as u32;
                if svf.is_some_and(|f| svf_tails && !f.answer_ok(r, t)) {
                    continue;
                }
                let f = Triple::new(h, r, t).canonical(n_r);
                if visited.contains(&f) {
                    continue;
                }
                best.entry(f).and_modify(|b| *b = b.max(s)).or_insert(s);
            }
        }
    }
    let mut all: Vec<(Triple, S)> = best.into_iter().collect();
    all.sort_by(rank_order);
    all.truncate(n_c);
    Ok(all)
}

/// Uniformly random unvisited canonical facts, optionally restricted to those
/// the filter admits. Used as the chance baseline.
pub fn mine_random(
    num_entities: usize,
    num_relations: usize,
    visited: &FactSet,
    svf: Option<(&SemanticValidityFilter, bool)>,
    n_c: usize,
    seed: u64,
) -> Vec<Triple> {
    let eligible = |f: &Triple| !visited.contains(f) && svf.is_none_or(|(s, tails)| s.admits(f, tails));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = (num_entities * num_entities * num_relations) as u64;
    if space == 0 || n_c == 0 {
        return Vec::new();
    }
    let mut chosen = FxHashSet::default();
    let mut out = Vec::with_capacity(n_c);
    let attempts = 20 * n_c as u64 + 1000;
    for _ in 0..attempts {
        if out.len() == n_c {
            return out;
        }
        let f = Triple::new(
            rng.random_range(0..num_entities as u32),
            rng.random_range(0..num_relations as u32),
            rng.random_range(0..num_entities as u32),
        );
        if eligible(&f) && chosen.insert(f) {
            out.push(f);
        }
    }
    // dense regime: enumerate what is left and sample from it
    let mut rest: Vec<Triple> = Vec::new();
    for h in 0..num_entities as u32 {
        for r in 0..num_relations as u32 {
            for t in 0..num_entities as u32 {
                let f = Triple::new(h, r, t);
                if eligible(&f) && !chosen.contains(&f) {
                    rest.push(f);
                }
            }
        }
    }
    let need = (n_c - out.len()).min(rest.len());
    let (picked, _) = rand::seq::SliceRandom::partial_shuffle(&mut rest[..], &mut rng, need);
    out.extend_from_slice(picked);
    out
}
