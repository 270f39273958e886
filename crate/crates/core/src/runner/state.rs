use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CompletionCurve, RunError};
use crate::kg::FactSet;
use crate::kge::{read_checkpoint, write_checkpoint, EmbeddingModel};
use crate::scalar::Scalar;

pub const MODEL_FILE: &str = "model.ckpt";
pub const STATE_FILE: &str = "state.json";

/// Mutable loop state; everything needed to resume besides the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopState {
    /// Last completed step.
    pub step: usize,
    pub known: FactSet,
    /// Everything ever known or proposed (expired proposals excepted).
    pub visited: FactSet,
    /// Facts accepted since the last model update.
    pub since_update: FactSet,
    pub curve: CompletionCurve,
}

impl LoopState {
    pub fn new(known: FactSet, unexplored_len: usize) -> Self {
        let curve = CompletionCurve::new(known.len(), known.len() + unexplored_len);
        LoopState {
            step: 0,
            visited: known.clone(),
            known,
            since_update: FactSet::new(),
            curve,
        }
    }

    /// Writes `model.ckpt` and `state.json` into `dir`, each via rename.
    pub fn save<S: Scalar>(&self, model: &EmbeddingModel<S>, dir: &Path) -> Result<(), RunError> {
        fs::create_dir_all(dir)?;
        write_checkpoint(model, &dir.join(MODEL_FILE))?;
        let tmp = dir.join("state.json.tmp");
        let mut w = BufWriter::new(fs::File::create(&tmp)?);
        serde_json::to_writer(&mut w, self).map_err(|e| RunError::Checkpoint(e.to_string()))?;
        w.flush()?;
        drop(w);
        fs::rename(&tmp, dir.join(STATE_FILE))?;
        Ok(())
    }
}

/// Reads back what [`LoopState::save`] wrote.
pub fn load_resume<S: Scalar>(dir: &Path) -> Result<(EmbeddingModel<S>, LoopState), RunError> {
    let model = read_checkpoint(&dir.join(MODEL_FILE))?;
    let f = fs::File::open(dir.join(STATE_FILE))?;
    let state: LoopState = serde_json::from_reader(BufReader::new(f)).map_err(|e| RunError::Checkpoint(e.to_string()))?;
    state.curve.validate()?;
    if state.curve.last_step() != state.step {
        return Err(RunError::Checkpoint(format!(
            "state at step {} but curve ends at step {}",
            state.step,
            state.curve.last_step()
        )));
    }
    Ok((model, state))
}
