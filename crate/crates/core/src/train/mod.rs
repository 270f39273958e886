//! Mini-batch Adagrad training over the reciprocal view of a fact set.

mod adagrad;
mod config;
mod loss;

pub use adagrad::{Adagrad, ADAGRAD_EPS};
pub use config::{Optimizer, Profile, RegKind, TrainConfig, REG_WEIGHT_GRID};
pub use loss::{drift_penalty, loss, loss_into, mean_entity_drift, regularizer, Gradients, LossValue, Objective};

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{FactSet, Triple};
use crate::kge::{EmbeddingModel, ModelError};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite loss: {detail}; lower the learning rate or regularization weight")]
    NonFinite { detail: String },
    #[error("diverged in epoch {epoch}: {detail}; parameters restored to the end of epoch {}", epoch - 1)]
    Diverged { epoch: usize, detail: String },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `{(h, r, t), (t, r + |R|, h)}` for every fact, in input order.
pub fn reciprocal_view<'a>(facts: impl IntoIterator<Item = &'a Triple>, num_relations: usize) -> Vec<Triple> {
    facts
        .into_iter()
        .flat_map(|f| [*f, f.reciprocal(num_relations as u32)])
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean objective over the epoch's batches, weighted by batch size.
    pub mean_loss: f64,
    /// Mean unweighted regularizer over the same batches.
    pub reg_loss: f64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
}

impl TrainReport {
    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.mean_loss)
    }

    pub const CSV_HEADER: &'static str = "epoch,mean_loss,reg_loss,wall_ms";

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for e in &self.epochs {
            writeln!(w, "{},{},{},{}", e.epoch, e.mean_loss, e.reg_loss, e.wall_ms)?;
        }
        Ok(())
    }
}

/// Mean objective of `model` over `facts` (already augmented), without updating.
pub fn mean_loss<S: Scalar>(
    model: &EmbeddingModel<S>,
    facts: &[Triple],
    objective: &Objective<'_, S>,
    batch_size: usize,
) -> Result<LossValue<f64>, TrainError> {
    let mut acc = [0.0f64; 4];
    for chunk in facts.chunks(batch_size.max(1)) {
        let (v, _) = loss(model, chunk, objective)?;
        let w = chunk.len() as f64;
        acc[0] += v.total.as_f64() * w;
        acc[1] += v.nll.as_f64() * w;
        acc[2] += v.reg.as_f64() * w;
        acc[3] += v.drift.as_f64() * w;
    }
    let n = facts.len().max(1) as f64;
    Ok(LossValue {
        total: acc[0] / n,
        nll: acc[1] / n,
        reg: acc[2] / n,
        drift: acc[3] / n,
    })
}

/// Runs `epochs` passes of shuffled mini-batch Adagrad over `data`.
///
/// If a batch produces a non-finite loss the parameters are rolled back to the
/// end of the last completed epoch and [`TrainError::Diverged`] is returned.
pub fn train_epochs<S: Scalar>(
    model: &mut EmbeddingModel<S>,
    data: &[Triple],
    cfg: &TrainConfig,
    epochs: usize,
    drift: Option<(f64, &Array2<S>)>,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainReport, TrainError> {
    cfg.validate().map_err(TrainError::Config)?;
    let objective = Objective {
        reg_kind: cfg.reg_kind,
        lambda: S::lit(cfg.lambda),
        drift: drift.map(|(mu, snap)| (S::lit(mu), snap)),
    };
    let mut opt = Adagrad::new(model, cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<Triple> = data.to_vec();
    let mut grads = Gradients::zeros_like(model);
    let mut good = model.clone();
    let mut report = TrainReport::default();
    for epoch in 1..=epochs {
        if order.is_empty() {
            break;
        }
        let start = Instant::now();
        order.shuffle(&mut rng);
        let (mut total, mut reg) = (0.0, 0.0);
        for chunk in order.chunks(cfg.batch_size) {
            grads.entities.fill(S::zero());
            grads.relations.fill(S::zero());
            grads.gamma = S::zero();
            let v = match loss_into(model, chunk, &objective, &mut grads) {
                Ok(v) => v,
                Err(TrainError::NonFinite { detail }) => {
                    *model = good;
                    return Err(TrainError::Diverged { epoch, detail });
                }
                Err(e) => return Err(e),
            };
            let w = chunk.len() as f64;
            total += v.total.as_f64() * w;
            reg += v.reg.as_f64() * w;
            opt.step(model, &grads);
        }
        if !model.is_finite() {
            *model = good;
            return Err(TrainError::Diverged {
                epoch,
                detail: "non-finite parameters after update".into(),
            });
        }
        good.clone_from(model);
        let n = order.len() as f64;
        let rec = EpochRecord {
            epoch,
            mean_loss: total / n,
            reg_loss: reg / n,
            wall_ms: start.elapsed().as_millis() as u64,
        };
        on_epoch(&rec);
        report.epochs.push(rec);
    }
    Ok(report)
}

/// Trains on the reciprocal view of `known` for `cfg.max_epochs` epochs.
pub fn pretrain<S: Scalar>(
    model: &mut EmbeddingModel<S>,
    known: &FactSet,
    cfg: &TrainConfig,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainReport, TrainError> {
    let data = reciprocal_view(known, model.num_relations());
    train_epochs(model, &data, cfg, cfg.max_epochs, None, on_epoch)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateMode {
    /// No updates; the pretrained model is used throughout.
    None,
    /// Retrain on all of `F_known`.
    Retrain,
    /// Fine-tune on the facts accepted since the previous update.
    Finetune,
}

impl fmt::Display for UpdateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UpdateMode::None => "none",
            UpdateMode::Retrain => "retrain",
            UpdateMode::Finetune => "finetune",
        })
    }
}

impl FromStr for UpdateMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" | "origin" => Ok(UpdateMode::None),
            "retrain" => Ok(UpdateMode::Retrain),
            "finetune" | "fine-tune" => Ok(UpdateMode::Finetune),
            _ => Err(format!("unknown update mode `{s}` (expected none, retrain or finetune)")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateReport {
    pub train: TrainReport,
    /// Finetune with nothing new to learn from.
    pub skipped: bool,
    /// Mean `‖e_new − e_old‖` over all entities.
    pub mean_drift: f64,
}

/// One incremental update anchored to the current entity embeddings by the
/// drift penalty `μ·(‖h − h_old‖ + ‖t − t_old‖)`.
pub fn incremental_update<S: Scalar>(
    model: &mut EmbeddingModel<S>,
    known: &FactSet,
    new: &FactSet,
    mode: UpdateMode,
    cfg: &TrainConfig,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<UpdateReport, TrainError> {
    let source = match mode {
        UpdateMode::None => return Ok(UpdateReport { skipped: true, ..Default::default() }),
        UpdateMode::Retrain => known,
        UpdateMode::Finetune => new,
    };
    if source.is_empty() {
        return Ok(UpdateReport { skipped: true, ..Default::default() });
    }
    let snapshot = model.entities().to_owned();
    let data = reciprocal_view(source, model.num_relations());
    let train = train_epochs(model, &data, cfg, cfg.incremental_epochs, Some((cfg.mu, &snapshot)), on_epoch)?;
    Ok(UpdateReport {
        train,
        skipped: false,
        mean_drift: mean_entity_drift(model, &snapshot),
    })
}

/// Seeded 95/5 train/validation split for hyperparameter selection.
pub fn split_validation(facts: &FactSet, seed: u64) -> (FactSet, FactSet) {
    let mut v = facts.to_vec();
    v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_valid = v.len() / 20;
    let valid = v.split_off(v.len() - n_valid);
    (v.into_iter().collect(), valid.into_iter().collect())
}

/// Writes a train log to `path`.
pub fn write_train_log(report: &TrainReport, path: &Path) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    report.write_csv(&mut f)?;
    f.flush()
}
