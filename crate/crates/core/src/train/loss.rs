//! Full-softmax cross-entropy over all tails plus regularizers, with
//! analytic gradients.

use ndarray::{s, Array2, Axis, Zip};

use super::{RegKind, TrainError};
use crate::kg::Triple;
use crate::kge::kernels::{compose, compose_backward};
use crate::kge::{EmbeddingModel, Geometry};
use crate::scalar::{self, Scalar};

/// Dense gradient buffers shaped like the model's tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<S> {
    pub entities: Array2<S>,
    pub relations: Array2<S>,
    pub gamma: S,
}

impl<S: Scalar> Gradients<S> {
    pub fn zeros_like(model: &EmbeddingModel<S>) -> Self {
        Gradients {
            entities: Array2::zeros(model.entities().raw_dim()),
            relations: Array2::zeros(model.relations().raw_dim()),
            gamma: S::zero(),
        }
    }
}

/// Batch means of each objective term; `total = nll + λ·reg + μ·drift`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue<S> {
    pub total: S,
    pub nll: S,
    pub reg: S,
    pub drift: S,
}

/// Regularization terms of the objective.
#[derive(Debug, Clone, Copy)]
pub struct Objective<'a, S> {
    pub reg_kind: RegKind,
    pub lambda: S,
    /// Drift weight `μ` and the entity table snapshot it anchors to.
    pub drift: Option<(S, &'a Array2<S>)>,
}

impl<S: Scalar> Objective<'_, S> {
    pub fn plain(reg_kind: RegKind, lambda: f64) -> Self {
        Objective {
            reg_kind,
            lambda: S::lit(lambda),
            drift: None,
        }
    }
}

fn reciprocal_id(r: u32, num_relations: usize) -> u32 {
    let nr = num_relations as u32;
    if r >= nr { r - nr } else { r + nr }
}

/// Per-fact regularizer.
///
/// `F2 = ‖h‖² + ‖r‖² + ‖t‖²` over the full parameter rows;
/// `DURA = ‖φ(h, r)‖² + ‖t̃‖² + ‖φ(t, r′)‖² + ‖h̃‖²` where `x̃` is the part of
/// an entity row compared against compositions and `r′` the reciprocal.
pub fn regularizer<S: Scalar>(model: &EmbeddingModel<S>, fact: &Triple, kind: RegKind) -> S {
    let (h, r, t) = (fact.head, fact.relation, fact.tail);
    match kind {
        RegKind::F2 => {
            scalar::sq_norm(model.entity_row(h)) + scalar::sq_norm(model.relation_row(r)) + scalar::sq_norm(model.entity_row(t))
        }
        RegKind::Dura => {
            let rp = reciprocal_id(r, model.num_relations());
            let mut phi = vec![S::zero(); model.phi_width()];
            compose(model.family(), model.dim(), model.source(h), model.relation_row(r), &mut phi);
            let a = scalar::sq_norm(&phi);
            compose(model.family(), model.dim(), model.source(t), model.relation_row(rp), &mut phi);
            let c = scalar::sq_norm(&phi);
            a + scalar::sq_norm(model.target(t)) + c + scalar::sq_norm(model.target(h))
        }
    }
}

/// Drift penalty `‖h − h_old‖ + ‖t − t_old‖` against an entity snapshot.
pub fn drift_penalty<S: Scalar>(model: &EmbeddingModel<S>, fact: &Triple, snapshot: &Array2<S>) -> S {
    let row = |e: u32| snapshot.row(e as usize).to_slice().expect("standard layout").to_vec();
    scalar::distance(model.entity_row(fact.head), &row(fact.head)) + scalar::distance(model.entity_row(fact.tail), &row(fact.tail))
}

/// Mean entity displacement `‖e − e_old‖` over all entities.
pub fn mean_entity_drift<S: Scalar>(model: &EmbeddingModel<S>, snapshot: &Array2<S>) -> f64 {
    let n = model.num_entities().max(1);
    let total: f64 = model
        .entities()
        .outer_iter()
        .zip(snapshot.outer_iter())
        .map(|(a, b)| {
            scalar::distance(a.as_slice().expect("standard layout"), b.as_slice().expect("standard layout")).as_f64()
        })
        .sum();
    total / n as f64
}

/// Objective value and gradients for a batch of (augmented) facts.
///
/// The cross-entropy term is the mean over the batch of `−log softmax` of the
/// true tail among all `|E|` candidate tails.
pub fn loss<S: Scalar>(
    model: &EmbeddingModel<S>,
    batch: &[Triple],
    objective: &Objective<'_, S>,
) -> Result<(LossValue<S>, Gradients<S>), TrainError> {
    let mut grads = Gradients::zeros_like(model);
    let value = loss_into(model, batch, objective, &mut grads)?;
    Ok((value, grads))
}

/// As [`loss`], accumulating into existing (zeroed) buffers.
pub fn loss_into<S: Scalar>(
    model: &EmbeddingModel<S>,
    batch: &[Triple],
    objective: &Objective<'_, S>,
    grads: &mut Gradients<S>,
) -> Result<LossValue<S>, TrainError> {
    let family = model.family();
    let dim = model.dim();
    let n_e = model.num_entities();
    let b = batch.len();
    if b == 0 {
        let z = S::zero();
        return Ok(LossValue { total: z, nll: z, reg: z, drift: z });
    }
    for f in batch {
        for e in [f.head, f.tail] {
            if e as usize >= n_e {
                return Err(crate::kge::ModelError::EntityOutOfRange { id: e, len: n_e }.into());
            }
        }
        if f.relation as usize >= 2 * model.num_relations() {
            return Err(crate::kge::ModelError::RelationOutOfRange {
                id: f.relation,
                len: 2 * model.num_relations(),
            }
            .into());
        }
    }
    let pw = model.phi_width();
    let tr = family.target_range(dim);
    let sr = family.source_range(dim);
    let gamma = model.gamma();
    let inv_b = S::one() / S::lit(b as f64);

    let mut phi = Array2::<S>::zeros((b, pw));
    for (i, f) in batch.iter().enumerate() {
        let row = phi.row_mut(i).into_slice().expect("standard layout");
        compose(family, dim, model.source(f.head), model.relation_row(f.relation), row);
    }
    let entities = model.entities();
    let targets = entities.slice(s![.., tr.clone()]);

    // raw[b, t]: ⟨φ_b, t⟩ for bilinear, ‖φ_b − t‖ for distance families
    let raw = match family.geometry() {
        Geometry::Bilinear => phi.dot(&targets.t()),
        Geometry::Distance => {
            let mut d = Array2::<S>::zeros((b, n_e));
            Zip::from(d.rows_mut()).and(phi.rows()).par_for_each(|mut drow, prow| {
                let p = prow.as_slice().expect("standard layout");
                for (t, v) in drow.iter_mut().enumerate() {
                    *v = scalar::distance(p, model.target(t as u32));
                }
            });
            d
        }
    };
    let sign = match family.geometry() {
        Geometry::Bilinear => gamma,
        Geometry::Distance => -gamma,
    };

    // softmax rows → G = (p − onehot) / B
    let mut g = raw.mapv(|v| v * sign);
    let mut nll = S::zero();
    for (i, mut row) in g.axis_iter_mut(Axis(0)).enumerate() {
        let truth = batch[i].tail as usize;
        let m = row.iter().fold(S::neg_infinity(), |a, &v| a.max(v));
        let sum: S = row.iter().map(|&v| (v - m).exp()).sum();
        let lse = m + sum.ln();
        nll += lse - row[truth];
        row.mapv_inplace(|v| (v - lse).exp() * inv_b);
        row[truth] -= inv_b;
    }
    nll *= inv_b;

    let mut dphi;
    {
        let mut dtarget = grads.entities.slice_mut(s![.., tr.clone()]);
        match family.geometry() {
            Geometry::Bilinear => {
                dphi = g.dot(&targets);
                dphi.mapv_inplace(|v| v * gamma);
                dtarget.scaled_add(gamma, &g.t().dot(&phi));
                if family.has_trainable_gamma() {
                    grads.gamma += Zip::from(&g).and(&raw).fold(S::zero(), |acc, &a, &r| acc + a * r);
                }
            }
            Geometry::Distance => {
                // W = γ G / D; dφ_b = −(Σ_t W_bt) φ_b + (W T)_b; dT_t = (Wᵀ Φ)_t − (Σ_b W_bt) T_t
                let w = Zip::from(&g).and(&raw).map_collect(|&gv, &dv| if dv > S::zero() { gamma * gv / dv } else { S::zero() });
                dphi = w.dot(&targets);
                let row_sums = w.sum_axis(Axis(1));
                Zip::from(dphi.rows_mut()).and(phi.rows()).and(&row_sums).for_each(|mut dr, pr, &rs| {
                    dr.scaled_add(-rs, &pr);
                });
                dtarget.scaled_add(S::one(), &w.t().dot(&phi));
                let col_sums = w.sum_axis(Axis(0));
                Zip::from(dtarget.rows_mut()).and(targets.rows()).and(&col_sums).for_each(|mut dr, tr, &cs| {
                    dr.scaled_add(-cs, &tr);
                });
            }
        }
    }

    let mut reg = S::zero();
    let mut drift = S::zero();
    let lam = objective.lambda;
    let two = S::lit(2.0);
    let mut scratch = vec![S::zero(); pw];
    let mut dscratch = vec![S::zero(); pw];
    for (i, f) in batch.iter().enumerate() {
        let (h, r, t) = (f.head as usize, f.relation as usize, f.tail as usize);
        let phi_b = phi.row(i).to_vec();
        let dphi_b = dphi.row_mut(i).into_slice().expect("standard layout");

        if lam > S::zero() {
            match objective.reg_kind {
                RegKind::F2 => {
                    reg += regularizer(model, f, RegKind::F2);
                    let k = two * lam * inv_b;
                    for e in [h, t] {
                        let src = model.entity_row(e as u32);
                        let mut gr = grads.entities.row_mut(e);
                        Zip::from(&mut gr).and(src).for_each(|gv, &v| *gv += k * v);
                    }
                    let mut gr = grads.relations.row_mut(r);
                    Zip::from(&mut gr).and(model.relation_row(r as u32)).for_each(|gv, &v| *gv += k * v);
                }
                RegKind::Dura => {
                    let k = two * lam * inv_b;
                    let rp = reciprocal_id(f.relation, model.num_relations()) as usize;
                    reg += scalar::sq_norm(&phi_b) + scalar::sq_norm(model.target(f.tail)) + scalar::sq_norm(model.target(f.head));
                    // ‖φ(h, r)‖²: folded into dφ_b
                    for (d, &p) in dphi_b.iter_mut().zip(&phi_b) {
                        *d += k * p;
                    }
                    // ‖φ(t, r′)‖²
                    compose(family, dim, model.source(f.tail), model.relation_row(rp as u32), &mut scratch);
                    reg += scalar::sq_norm(&scratch);
                    for (d, &p) in dscratch.iter_mut().zip(&scratch) {
                        *d = k * p;
                    }
                    let mut dsrc = vec![S::zero(); sr.len()];
                    let mut drel = vec![S::zero(); model.relations().ncols()];
                    compose_backward(family, dim, model.source(f.tail), model.relation_row(rp as u32), &dscratch, &mut dsrc, &mut drel);
                    add_to_row(&mut grads.entities, t, sr.start, &dsrc);
                    add_to_row(&mut grads.relations, rp, 0, &drel);
                    // ‖t̃‖² + ‖h̃‖²
                    for e in [f.tail, f.head] {
                        let tv: Vec<S> = model.target(e).iter().map(|&v| k * v).collect();
                        add_to_row(&mut grads.entities, e as usize, tr.start, &tv);
                    }
                }
            }
        }

        if let Some((mu, snapshot)) = objective.drift {
            drift += drift_penalty(model, f, snapshot);
            if mu > S::zero() {
                let k = mu * inv_b;
                for e in [h, t] {
                    let cur = model.entity_row(e as u32);
                    let old = snapshot.row(e);
                    let diff: Vec<S> = cur.iter().zip(old.iter()).map(|(&a, &b)| a - b).collect();
                    let n = scalar::sq_norm(&diff).sqrt();
                    if n > S::zero() {
                        let gv: Vec<S> = diff.iter().map(|&d| k * d / n).collect();
                        add_to_row(&mut grads.entities, e, 0, &gv);
                    }
                }
            }
        }

        // backprop dφ into source entity row and relation row
        let mut dsrc = vec![S::zero(); sr.len()];
        let mut drel = vec![S::zero(); model.relations().ncols()];
        compose_backward(family, dim, model.source(f.head), model.relation_row(f.relation), dphi_b, &mut dsrc, &mut drel);
        add_to_row(&mut grads.entities, h, sr.start, &dsrc);
        add_to_row(&mut grads.relations, r, 0, &drel);
    }
    reg *= inv_b;
    drift *= inv_b;
    let mu = objective.drift.map(|(m, _)| m).unwrap_or(S::zero());
    let total = nll + lam * reg + mu * drift;
    if !total.is_finite() {
        return Err(TrainError::NonFinite {
            detail: format!("loss {total} (nll {nll}, reg {reg}, drift {drift})"),
        });
    }
    Ok(LossValue { total, nll, reg, drift })
}

fn add_to_row<S: Scalar>(table: &mut Array2<S>, row: usize, offset: usize, values: &[S]) {
    let mut r = table.row_mut(row);
    let r = r.as_slice_mut().expect("standard layout");
    for (dst, &v) in r[offset..offset + values.len()].iter_mut().zip(values) {
        *dst += v;
    }
}
