//! The completion loop and its metrics.

mod curve;
mod state;

pub use curve::{cr_at_k, ideal_known, moar, CompletionCurve, CurvePoint, MetricError};
pub use state::{load_resume, LoopState, MODEL_FILE, STATE_FILE};

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::FactSet;
use crate::kge::{EmbeddingModel, ModelError};
use crate::mine::{mine, mine_random, MineError, MiningConfig, MiningStats, SemanticValidityFilter};
use crate::scalar::Scalar;
use crate::train::{incremental_update, EpochRecord, TrainConfig, TrainError, UpdateMode, UpdateReport};
use crate::verify::{Proposal, Verification, Verifier, VerifyError};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("step {step}: {source}")]
    Mine { step: usize, source: MineError },
    #[error("update before step {step}: {source}")]
    Train { step: usize, source: TrainError },
    #[error("step {step} aborted: {source}")]
    Verify { step: usize, source: VerifyError },
    #[error("invalid loop config: {0}")]
    Config(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How candidates are picked each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Exact top-`n_c` under the model.
    Model,
    /// Uniformly random unvisited facts (chance baseline).
    Random,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Model => "model",
            Strategy::Random => "random",
        })
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "model" => Ok(Strategy::Model),
            "random" => Ok(Strategy::Random),
            _ => Err(format!("unknown strategy `{s}` (expected model or random)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub n_s: usize,
    pub n_c: usize,
    pub update_mode: UpdateMode,
    /// Update before every step divisible by `delta_s`.
    pub delta_s: usize,
    /// Step at which CR@k is reported.
    pub k_report: usize,
    pub strategy: Strategy,
    pub seed: u64,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            n_s: 50,
            n_c: 1000,
            update_mode: UpdateMode::None,
            delta_s: 5,
            k_report: 50,
            strategy: Strategy::Model,
            seed: 0,
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_c == 0 {
            return Err("n_c must be at least 1".into());
        }
        if self.delta_s == 0 {
            return Err("delta_s must be at least 1".into());
        }
        Ok(())
    }
}

/// Summary written as `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub moar: f64,
    /// `null` when `k` lies past `n_s`.
    pub cr_at_k: Option<f64>,
    pub k: usize,
    pub n_s: usize,
    pub n_c: usize,
    pub rho: f64,
    pub model: String,
    pub update_mode: UpdateMode,
}

/// Everything reported about one completed step.
#[derive(Debug, Clone)]
pub struct StepReport<'a> {
    pub step: usize,
    pub proposals: &'a [Proposal],
    pub verification: &'a Verification,
    pub mining: Option<&'a MiningStats>,
    pub point: CurvePoint,
    pub wall_ms: f64,
}

/// Hooks for logging; every method defaults to doing nothing.
pub trait RunObserver {
    fn on_update_epoch(&mut self, _step: usize, _record: &EpochRecord) {}
    fn on_update(&mut self, _step: usize, _report: &UpdateReport) {}
    fn on_step(&mut self, _report: &StepReport<'_>) {}
}

pub struct NoopObserver;

impl RunObserver for NoopObserver {}

/// Fixed inputs of a run.
#[derive(Debug, Clone, Copy)]
pub struct RunContext<'a> {
    pub train: &'a TrainConfig,
    pub mining: &'a MiningConfig,
    pub looping: &'a LoopConfig,
    /// Filter built once from the initial known facts.
    pub svf: Option<&'a SemanticValidityFilter>,
    /// Where to checkpoint every `delta_s` steps.
    pub checkpoint_dir: Option<&'a Path>,
}

/// Runs the loop from `state.step + 1` through `n_s`.
///
/// Each step: optionally update the model (step divisible by `delta_s`),
/// mine `n_c` unvisited candidates, verify them, mark them visited and merge
/// the accepted ones into the known facts. Ends early when nothing is left
/// to mine. On a verification abort the state is left as it was after the
/// previous step.
pub fn run<S: Scalar>(
    model: &mut EmbeddingModel<S>,
    state: &mut LoopState,
    ctx: &RunContext<'_>,
    verifier: &mut dyn Verifier,
    observer: &mut dyn RunObserver,
) -> Result<RunMetrics, RunError> {
    let lc = ctx.looping;
    lc.validate().map_err(RunError::Config)?;
    let mining_cfg = MiningConfig { n_c: lc.n_c, ..*ctx.mining };
    while state.step < lc.n_s && !state.curve.truncated {
        let step = state.step + 1;
        let t0 = Instant::now();
        if lc.update_mode != UpdateMode::None && step % lc.delta_s == 0 {
            let cfg = TrainConfig {
                seed: ctx.train.seed ^ step as u64,
                ..ctx.train.clone()
            };
            let report = incremental_update(model, &state.known, &state.since_update, lc.update_mode, &cfg, |rec| {
                observer.on_update_epoch(step, rec)
            })
            .map_err(|source| RunError::Train { step, source })?;
            state.since_update = FactSet::new();
            observer.on_update(step, &report);
        }

        let (proposals, stats) = match lc.strategy {
            Strategy::Model => {
                let mined = mine(model, &state.visited, ctx.svf, &mining_cfg).map_err(|source| RunError::Mine { step, source })?;
                let p = mined.facts.iter().map(|&(triple, s)| Proposal { triple, score: s.as_f64() }).collect::<Vec<_>>();
                (p, Some(mined.stats))
            }
            Strategy::Random => {
                let svf = ctx.svf.filter(|_| mining_cfg.svf).map(|s| (s, mining_cfg.svf_tails));
                let p = mine_random(model.num_entities(), model.num_relations(), &state.visited, svf, lc.n_c, lc.seed ^ step as u64)
                    .into_iter()
                    .map(|triple| Proposal { triple, score: 0.0 })
                    .collect::<Vec<_>>();
                (p, None)
            }
        };
        if proposals.is_empty() {
            state.curve.truncated = true;
            break;
        }

        let verification = verifier.verify(step, &proposals).map_err(|source| RunError::Verify { step, source })?;
        let mut accepted = 0;
        for p in &proposals {
            if !verification.expired.contains(&p.triple) {
                state.visited.insert(p.triple);
            }
        }
        for f in &verification.accepted {
            if state.known.insert(*f) {
                state.since_update.insert(*f);
                accepted += 1;
            }
        }
        state.curve.push(proposals.len(), accepted);
        state.step = step;
        verifier.progress(&state.curve);
        observer.on_step(&StepReport {
            step,
            proposals: &proposals,
            verification: &verification,
            mining: stats.as_ref(),
            point: *state.curve.points.last().expect("just pushed"),
            wall_ms: t0.elapsed().as_secs_f64() * 1e3,
        });
        if let Some(dir) = ctx.checkpoint_dir {
            if step % lc.delta_s == 0 {
                state.save(model, dir)?;
            }
        }
    }
    metrics(&state.curve, lc, &model.family().to_string())
}

pub fn metrics(curve: &CompletionCurve, lc: &LoopConfig, model: &str) -> Result<RunMetrics, RunError> {
    let last = curve.last_step();
    let cr = if lc.k_report > lc.n_s {
        None
    } else if lc.k_report > last && curve.truncated {
        curve.points.last().map(|p| p.completion_ratio)
    } else {
        Some(cr_at_k(curve, lc.k_report)?)
    };
    Ok(RunMetrics {
        moar: moar(curve, lc.n_s, lc.n_c)?,
        cr_at_k: cr,
        k: lc.k_report,
        n_s: lc.n_s,
        n_c: lc.n_c,
        rho: curve.rho(),
        model: model.to_owned(),
        update_mode: lc.update_mode,
    })
}
