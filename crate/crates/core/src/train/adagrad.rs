use ndarray::{Array2, Zip};

use super::Gradients;
use crate::kge::EmbeddingModel;
use crate::scalar::Scalar;

pub const ADAGRAD_EPS: f64 = 1e-10;

/// Per-parameter Adagrad accumulators.
#[derive(Debug, Clone)]
pub struct Adagrad<S> {
    lr: S,
    entities: Array2<S>,
    relations: Array2<S>,
    gamma: S,
}

impl<S: Scalar> Adagrad<S> {
    pub fn new(model: &EmbeddingModel<S>, learning_rate: f64) -> Self {
        Adagrad {
            lr: S::lit(learning_rate),
            entities: Array2::zeros(model.entities().raw_dim()),
            relations: Array2::zeros(model.relations().raw_dim()),
            gamma: S::zero(),
        }
    }

    /// Apply one update, then project the model back onto its constraints.
    pub fn step(&mut self, model: &mut EmbeddingModel<S>, grads: &Gradients<S>) {
        let lr = self.lr;
        let eps = S::lit(ADAGRAD_EPS);
        let update = |p: &mut S, acc: &mut S, &g: &S| {
            if g != S::zero() {
                *acc += g * g;
                *p -= lr * g / (acc.sqrt() + eps);
            }
        };
        Zip::from(model.entities_mut()).and(&mut self.entities).and(&grads.entities).for_each(update);
        Zip::from(model.relations_mut()).and(&mut self.relations).and(&grads.relations).for_each(update);
        if model.family().has_trainable_gamma() {
            let mut g = model.gamma();
            update(&mut g, &mut self.gamma, &grads.gamma);
            model.set_gamma(g);
        }
        model.project_constraints();
    }
}
