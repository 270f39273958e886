//! Synthetic knowledge graphs with typed entities, inverse relation pairs and
//! symmetric relations, for tests and desk-scale experiments.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::kg::{write_triples, ClassDict, DatasetManifest, FactSet, Triple, Vocabulary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub num_entities: usize,
    pub num_classes: usize,
    /// Relation pairs `(r, r⁻¹)`; each contributes two relations.
    pub inverse_pairs: usize,
    pub symmetric: usize,
    /// Expected out-degree of a head-class entity under each relation.
    pub degree: f64,
    /// Zipf exponent for tail popularity; larger means stronger hubs.
    pub hub_exponent: f64,
    pub classless_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    /// Roughly the shape of a lexical hierarchy: few relations, mostly
    /// paired with their inverse.
    fn default() -> Self {
        SynthConfig {
            num_entities: 1000,
            num_classes: 8,
            inverse_pairs: 7,
            symmetric: 4,
            degree: 1.0,
            hub_exponent: 1.0,
            classless_fraction: 0.05,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn num_relations(&self) -> usize {
        2 * self.inverse_pairs + self.symmetric
    }
}

#[derive(Debug, Clone)]
pub struct SynthKg {
    pub facts: FactSet,
    pub vocab: Vocabulary,
    pub classes: ClassDict,
    /// The class each entity was generated with, including those later
    /// hidden from `classes`.
    pub true_classes: Vec<u32>,
}

/// Generates a graph. Entities are split into classes round-robin; every
/// relation links a head class to a tail class, choosing tails with Zipf
/// weights so that popular targets emerge.
pub fn generate(cfg: &SynthConfig) -> SynthKg {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_e = cfg.num_entities;
    let n_c = cfg.num_classes.max(1);
    let true_classes: Vec<u32> = (0..n_e).map(|e| (e % n_c) as u32).collect();
    let members: Vec<Vec<u32>> = (0..n_c as u32)
        .map(|c| (0..n_e as u32).filter(|&e| true_classes[e as usize] == c).collect())
        .collect();

    let n_r = cfg.num_relations();
    let vocab = {
        let mut v = Vocabulary::new();
        for e in 0..n_e {
            v.intern_entity(&format!("e{e}")).expect("fits in u32");
        }
        for p in 0..cfg.inverse_pairs {
            v.intern_relation(&format!("rel{p}")).expect("fits in u32");
            v.intern_relation(&format!("rel{p}_inv")).expect("fits in u32");
        }
        for s in 0..cfg.symmetric {
            v.intern_relation(&format!("sym{s}")).expect("fits in u32");
        }
        v
    };
    debug_assert_eq!(vocab.num_relations(), n_r);

    let link = |rng: &mut ChaCha8Rng, head_class: usize, tail_class: usize| -> Vec<(u32, u32)> {
        let tails = &members[tail_class];
        if tails.is_empty() {
            return Vec::new();
        }
        // hub order is a random permutation of the tail class
        let mut order = tails.clone();
        order.shuffle(rng);
        let weights: Vec<f64> = (1..=order.len()).map(|i| (i as f64).powf(-cfg.hub_exponent)).collect();
        let dist = WeightedIndex::new(&weights).expect("positive weights");
        let mut pairs = Vec::new();
        for &h in &members[head_class] {
            for _ in 0..poisson_like(rng, cfg.degree) {
                let t = order[dist.sample(rng)];
                if t != h {
                    pairs.push((h, t));
                }
            }
        }
        pairs
    };
    let mut facts = FactSet::new();
    for p in 0..cfg.inverse_pairs {
        let (a, b) = (rng.random_range(0..n_c), rng.random_range(0..n_c));
        let (r, r_inv) = ((2 * p) as u32, (2 * p + 1) as u32);
        for (h, t) in link(&mut rng, a, b) {
            facts.insert(Triple::new(h, r, t));
            facts.insert(Triple::new(t, r_inv, h));
        }
    }
    for s in 0..cfg.symmetric {
        let c = rng.random_range(0..n_c);
        let r = (2 * cfg.inverse_pairs + s) as u32;
        for (h, t) in link(&mut rng, c, c) {
            facts.insert(Triple::new(h, r, t));
            facts.insert(Triple::new(t, r, h));
        }
    }

    let mut classes = ClassDict::new(n_e);
    let ids: Vec<u32> = (0..n_c).map(|c| classes.intern_class(&format!("class{c}"))).collect();
    for (e, &c) in true_classes.iter().enumerate() {
        if !rng.random_bool(cfg.classless_fraction.clamp(0.0, 1.0)) {
            classes.assign(e as u32, ids[c as usize]);
        }
    }
    SynthKg {
        facts,
        vocab,
        classes,
        true_classes,
    }
}

/// Small-integer count with mean `mean`: floor plus a Bernoulli remainder,
/// then at least one.
fn poisson_like(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    let base = mean.floor() as usize;
    let extra = usize::from(rng.random_bool((mean - mean.floor()).clamp(0.0, 1.0)));
    (base + extra).max(1)
}

impl SynthKg {
    /// Writes `triples.tsv`, `classes.tsv` and `manifest.conf` into `dir`.
    pub fn write_dataset(&self, dir: &Path, rho: Option<f64>, seed: Option<u64>) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        let mut w = BufWriter::new(fs::File::create(dir.join("triples.tsv"))?);
        write_triples(&mut w, &self.facts, &self.vocab)?;
        w.flush()?;
        let mut w = BufWriter::new(fs::File::create(dir.join("classes.tsv"))?);
        for e in 0..self.vocab.num_entities() as u32 {
            if let Some(c) = self.classes.class_of(e) {
                let name = self.vocab.entity_name(e).expect("entity interned");
                writeln!(w, "{name}\t{}", self.classes.class_name(c).expect("class interned"))?;
            }
        }
        w.flush()?;
        let manifest = DatasetManifest {
            triples_path: "triples.tsv".into(),
            classes_path: Some("classes.tsv".into()),
            rho,
            seed,
        };
        fs::write(dir.join("manifest.conf"), manifest.render())
    }
}
