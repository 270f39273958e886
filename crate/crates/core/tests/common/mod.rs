#![allow(dead_code)]

use ndarray::Array2;
use pkgc_core::kg::Triple;
use pkgc_core::kge::{EmbeddingModel, ModelFamily};
use pkgc_core::train::{loss, Objective, RegKind};

pub const FD_EPS: f64 = 1e-4;
pub const FD_TOL: f64 = 1e-4;
/// Denominator floor: coordinates with both gradients below this are compared absolutely.
pub const FD_FLOOR: f64 = 1e-3;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_FLOOR)
}

/// A random model with parameters large enough for non-trivial softmaxes.
pub fn random_model(family: ModelFamily, dim: usize, n_e: usize, n_r: usize, seed: u64) -> EmbeddingModel<f64> {
    let mut m = EmbeddingModel::<f64>::zeros(family, dim, n_e, n_r).unwrap();
    m.init_uniform(0.8, seed);
    if family.has_trainable_gamma() {
        m.set_gamma(1.7);
    }
    m
}

pub fn toy_batch(n_r: u32) -> Vec<Triple> {
    vec![
        Triple::new(0, 0, 1),
        Triple::new(1, 1, 2),
        Triple::new(3, 0, 3),
        Triple::new(2, n_r, 4),
        Triple::new(4, 1 + n_r, 0),
        Triple::new(0, 0, 1),
    ]
}

/// Largest relative error between the analytic gradient and central
/// differences over every parameter coordinate (and `γ` when trainable).
pub fn max_gradient_error(model: &EmbeddingModel<f64>, batch: &[Triple], reg: RegKind, lambda: f64, drift: Option<(f64, &Array2<f64>)>) -> f64 {
    let objective = |_: ()| Objective { reg_kind: reg, lambda, drift };
    let (_, grads) = loss(model, batch, &objective(())).unwrap();
    let eval = |m: &EmbeddingModel<f64>| loss(m, batch, &objective(())).unwrap().0.total;
    let mut worst = 0.0f64;
    let mut m = model.clone();
    for (table, analytic) in [(0u8, &grads.entities), (1, &grads.relations)] {
        let shape = analytic.dim();
        for i in 0..shape.0 {
            for j in 0..shape.1 {
                let up = eval(&nudged(&m, table, i, j, FD_EPS));
                let down = eval(&nudged(&m, table, i, j, -FD_EPS));
                let numeric = (up - down) / (2.0 * FD_EPS);
                worst = worst.max(relative_error(analytic[(i, j)], numeric));
            }
        }
    }
    if model.family().has_trainable_gamma() {
        let g = m.gamma();
        m.set_gamma(g + FD_EPS);
        let up = eval(&m);
        m.set_gamma(g - FD_EPS);
        let down = eval(&m);
        m.set_gamma(g);
        worst = worst.max(relative_error(grads.gamma, (up - down) / (2.0 * FD_EPS)));
    }
    worst
}

fn nudged(m: &EmbeddingModel<f64>, table: u8, i: usize, j: usize, delta: f64) -> EmbeddingModel<f64> {
    let mut m = m.clone();
    if table == 0 {
        m.entities_mut()[(i, j)] += delta;
    } else {
        m.relations_mut()[(i, j)] += delta;
    }
    m
}

use pkgc_core::kg::{ClassDict, FactSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random facts over `n_e` entities / `n_r` relations, plus a class dict
/// leaving roughly one entity in ten classless.
pub fn random_kg(n_e: usize, n_r: usize, n_facts: usize, n_classes: u32, seed: u64) -> (FactSet, ClassDict) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut facts = FactSet::new();
    while facts.len() < n_facts.min(n_e * n_e * n_r) {
        facts.insert(Triple::new(
            rng.random_range(0..n_e as u32),
            rng.random_range(0..n_r as u32),
            rng.random_range(0..n_e as u32),
        ));
    }
    let assignments = (0..n_e)
        .map(|_| if rng.random_bool(0.9) { Some(rng.random_range(0..n_classes.max(1))) } else { None })
        .collect();
    (facts, ClassDict::from_assignments(assignments))
}

/// Checks every partition postcondition; `Ok(false)` when the ratio was
/// rejected as infeasible (and rightly so).
pub fn check_partition(total: &FactSet, rho: f64, seed: u64) -> Result<bool, String> {
    use pkgc_core::kg::{partition, scaffold, KgError, PartitionConfig};
    use std::collections::BTreeSet;

    let cfg = PartitionConfig::new(rho, seed).map_err(|e| e.to_string())?;
    let n_known = (total.len() as f64 * rho + 1e-9).floor() as usize;
    let (known, un) = match partition(total, &cfg) {
        Ok(p) => p,
        Err(KgError::InfeasibleRatio { scaffold: s, .. }) => {
            return if s > n_known && s == scaffold(total).len() {
                Ok(false)
            } else {
                Err(format!("rejected ρ={rho} with scaffold {s} ≤ {n_known}"))
            };
        }
        Err(e) => return Err(e.to_string()),
    };
    if known.len() != n_known || un.len() != total.len() - n_known {
        return Err(format!("sizes {}/{} for |total|={} ρ={rho}", known.len(), un.len(), total.len()));
    }
    if !known.is_disjoint(&un) || !known.is_subset(total) || !un.is_subset(total) {
        return Err("not a disjoint split of total".into());
    }
    let ents = |s: &FactSet| s.iter().flat_map(|f| [f.head, f.tail]).collect::<BTreeSet<_>>();
    let rels = |s: &FactSet| s.iter().map(|f| f.relation).collect::<BTreeSet<_>>();
    if ents(&known) != ents(total) {
        return Err("an entity is missing from known".into());
    }
    if rels(&known) != rels(total) {
        return Err("a relation is missing from known".into());
    }
    Ok(true)
}

/// Steps the loop by hand: score every unvisited canonical fact by the better
/// of its two directions, take the best `n_c`, accept those in `unexplored`.
/// Returns `(candidates, accepted, known)` per step.
pub fn hand_trace(
    model: &EmbeddingModel<f64>,
    known: &FactSet,
    unexplored: &FactSet,
    n_c: usize,
    n_s: usize,
) -> Vec<(usize, usize, usize)> {
    let n_e = model.num_entities() as u32;
    let n_r = model.num_relations() as u32;
    let mut visited: std::collections::BTreeSet<Triple> = known.iter().copied().collect();
    let mut n_known = known.len();
    let mut out = Vec::new();
    for _ in 0..n_s {
        let mut all = Vec::new();
        for h in 0..n_e {
            for r in 0..n_r {
                for t in 0..n_e {
                    let f = Triple::new(h, r, t);
                    if visited.contains(&f) {
                        continue;
                    }
                    let fwd = model.score(h, r, t).unwrap();
                    let rev = model.score(t, r + n_r, h).unwrap();
                    all.push((fwd.max(rev), f));
                }
            }
        }
        if all.is_empty() {
            break;
        }
        all.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        all.truncate(n_c);
        let accepted = all.iter().filter(|(_, f)| unexplored.contains(f)).count();
        visited.extend(all.iter().map(|&(_, f)| f));
        n_known += accepted;
        out.push((all.len(), accepted, n_known));
    }
    out
}

/// A 20-fact KG over 8 entities and 2 relations.
pub fn twenty_fact_kg() -> FactSet {
    let (facts, _) = random_kg(8, 2, 20, 1, 77);
    facts
}
