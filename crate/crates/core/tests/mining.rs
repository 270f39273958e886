mod common;

use common::*;
use pkgc_core::kg::{FactSet, Triple};
use pkgc_core::kge::{EmbeddingModel, ModelFamily};
use pkgc_core::mine::{mine, mine_naive, mine_random, valid_queries, MiningConfig, SemanticValidityFilter, NAIVE_GUARD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(n_c: usize, b_m_max: usize, warm_up: bool, root_filter: bool, svf: bool) -> MiningConfig {
    MiningConfig { n_c, b_m_max, warm_up, root_filter, svf, svf_tails: true }
}

#[test]
fn matches_brute_force_on_toy_complex() {
    for seed in 0..100 {
        let m = EmbeddingModel::<f32>::random(ModelFamily::ComplEx, 3, 5, 2, seed).unwrap();
        let known: FactSet = [Triple::new(0, 0, 1), Triple::new(2, 1, 3)].into_iter().collect();
        let mined = mine(&m, &known, None, &config(3, 4, true, true, false)).unwrap();
        let naive = mine_naive(&m, &known, None, false, 3, NAIVE_GUARD).unwrap();
        assert_eq!(mined.facts, naive, "seed {seed}");
    }
}

#[test]
fn exact_for_every_toggle_combination() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..30u64 {
        let n_e = rng.random_range(2..40);
        let n_r = rng.random_range(1..5);
        let family = ModelFamily::ALL[case as usize % 9];
        let (known, classes) = random_kg(n_e, n_r, rng.random_range(1..3 * n_e), 4, case);
        let mut m = EmbeddingModel::<f32>::random(family, 4, n_e, n_r, case).unwrap();
        m.init_uniform(0.5, case);
        let svf = SemanticValidityFilter::build(&known, &classes, n_e, n_r);
        let n_c = rng.random_range(1..60);
        for (warm_up, root_filter, use_svf) in toggle_combinations(&[false, true]) {
            let cfg = config(n_c, rng.random_range(1..64), warm_up, root_filter, use_svf);
            let got = mine(&m, &known, Some(&svf), &cfg).unwrap();
            let want = mine_naive(&m, &known, use_svf.then_some(&svf), true, n_c, NAIVE_GUARD).unwrap();
            assert_eq!(got.facts, want, "case {case} {cfg:?}");
            assert!(got.facts.iter().all(|(f, _)| !known.contains(f)));
        }
    }
}

fn toggle_combinations(v: &[bool]) -> Vec<(bool, bool, bool)> {
    let mut out = vec![];
    for &a in v {
        for &b in v {
            for &c in v {
                out.push((a, b, c));
            }
        }
    }
    out
}

#[test]
fn ties_are_broken_by_triple_order() {
    let m = EmbeddingModel::<f32>::zeros(ModelFamily::Cp, 2, 3, 1).unwrap();
    let got = mine(&m, &FactSet::new(), None, &config(4, 2, true, true, false)).unwrap();
    let ids: Vec<Triple> = got.facts.iter().map(|(f, _)| *f).collect();
    assert_eq!(ids, vec![Triple::new(0, 0, 0), Triple::new(0, 0, 1), Triple::new(0, 0, 2), Triple::new(1, 0, 0)]);
}

#[test]
fn warm_up_schedule_doubles_to_cap() {
    let m = EmbeddingModel::<f32>::random(ModelFamily::TransE, 2, 20, 1, 1).unwrap();
    let got = mine(&m, &FactSet::new(), None, &config(5, 8, true, true, false)).unwrap();
    let sizes: Vec<usize> = got.stats.batches.iter().map(|b| b.batch_size).collect();
    assert_eq!(sizes, vec![1, 2, 4, 8, 8, 8, 8, 1]);
    let fixed = mine(&m, &FactSet::new(), None, &config(5, 8, false, true, false)).unwrap();
    assert!(fixed.stats.batches.iter().all(|b| b.batch_size == 8));
    assert_eq!(fixed.facts, got.facts);
}

#[test]
fn first_batch_passes_everything_and_root_rises() {
    let m = EmbeddingModel::<f32>::random(ModelFamily::RotatE, 3, 30, 2, 5).unwrap();
    let got = mine(&m, &FactSet::new(), None, &config(10, 16, true, true, false)).unwrap();
    assert_eq!(got.stats.batches[0].pass_rate, 1.0);
    let roots: Vec<f64> = got.stats.batches.iter().map(|b| b.root_score).collect();
    assert!(roots.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn shortfall_when_space_is_small() {
    let m = EmbeddingModel::<f32>::random(ModelFamily::TransE, 2, 2, 1, 0).unwrap();
    let visited: FactSet = [Triple::new(0, 0, 0)].into_iter().collect();
    let got = mine(&m, &visited, None, &config(10, 4, true, true, false)).unwrap();
    assert_eq!(got.facts.len(), 3);
    assert_eq!(got.stats.shortfall, 7);
    assert!(mine_naive(&m, &visited, None, false, 0, NAIVE_GUARD).unwrap().is_empty());
}

#[test]
fn naive_guard_refuses_large_spaces() {
    let m = EmbeddingModel::<f32>::zeros(ModelFamily::TransE, 1, 100, 1).unwrap();
    assert!(mine_naive(&m, &FactSet::new(), None, false, 1, 1000).is_err());
}

#[test]
fn query_enumeration() {
    assert_eq!(valid_queries(7, 3, None).len(), 7 * 6);
    let (known, classes) = random_kg(15, 3, 20, 3, 2);
    let svf = SemanticValidityFilter::build(&known, &classes, 15, 3);
    let got = valid_queries(15, 3, Some(&svf));
    let mut want = vec![];
    for r in 0..6 {
        for h in 0..15 {
            let ok = match classes.class_of(h) {
                None => true,
                Some(c) if r < 3 => known.iter().any(|f| f.relation == r && classes.class_of(f.head) == Some(c)),
                Some(c) => known.iter().any(|f| f.relation == r - 3 && classes.class_of(f.tail) == Some(c)),
            };
            if ok {
                want.push((h, r));
            }
        }
    }
    assert_eq!(got, want);
}

#[test]
fn random_baseline_avoids_visited() {
    let (known, _) = random_kg(6, 1, 30, 1, 0);
    let got = mine_random(6, 1, &known, None, 10, 3);
    assert_eq!(got.len(), 6);
    assert!(got.iter().all(|f| !known.contains(f)));
}
