use ndarray::{Array2, ArrayView2};
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::kernels;
use super::{Geometry, ModelError, ModelFamily};
use crate::kg::Triple;
use crate::scalar::{self, Scalar};

/// Default half-width of the uniform parameter initialization.
pub const INIT_SCALE: f64 = 1e-3;

/// Entity and relation parameter tables plus the output scale `γ`.
///
/// Relation rows cover `2|R|` ids: `r` and its reciprocal `r + |R|`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel<S> {
    family: ModelFamily,
    dim: usize,
    num_relations: usize,
    entities: Array2<S>,
    relations: Array2<S>,
    gamma: S,
    rel_norm: bool,
}

/// Scores of every candidate tail for one query `(head, relation)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreBatch<S> {
    pub head: u32,
    pub relation: u32,
    pub scores: Vec<S>,
}

impl<S: Scalar> EmbeddingModel<S> {
    /// All-zero parameters, `γ = 1`.
    pub fn zeros(family: ModelFamily, dim: usize, num_entities: usize, num_relations: usize) -> Result<Self, ModelError> {
        if dim == 0 {
            return Err(ModelError::ZeroDim);
        }
        Ok(EmbeddingModel {
            family,
            dim,
            num_relations,
            entities: Array2::zeros((num_entities, family.entity_width(dim))),
            relations: Array2::zeros((2 * num_relations, family.relation_width(dim))),
            gamma: S::one(),
            rel_norm: false,
        })
    }

    /// Parameters i.i.d. uniform in `[−INIT_SCALE, INIT_SCALE]`, then projected.
    pub fn random(
        family: ModelFamily,
        dim: usize,
        num_entities: usize,
        num_relations: usize,
        seed: u64,
    ) -> Result<Self, ModelError> {
        let mut m = Self::zeros(family, dim, num_entities, num_relations)?;
        m.init_uniform(INIT_SCALE, seed);
        Ok(m)
    }

    pub fn init_uniform(&mut self, scale: f64, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Uniform::new_inclusive(-scale, scale).expect("finite scale");
        for v in self.entities.iter_mut().chain(self.relations.iter_mut()) {
            *v = S::lit(dist.sample(&mut rng));
        }
        self.project_constraints();
    }

    /// Assemble a model from raw tables (e.g. a checkpoint).
    pub fn from_parts(
        family: ModelFamily,
        dim: usize,
        num_relations: usize,
        entities: Array2<S>,
        relations: Array2<S>,
        gamma: S,
    ) -> Result<Self, ModelError> {
        if dim == 0 {
            return Err(ModelError::ZeroDim);
        }
        if entities.ncols() != family.entity_width(dim) || relations.ncols() != family.relation_width(dim) {
            return Err(ModelError::Shape(format!(
                "{family} dim {dim}: got widths {}/{}, expected {}/{}",
                entities.ncols(),
                relations.ncols(),
                family.entity_width(dim),
                family.relation_width(dim)
            )));
        }
        if relations.nrows() != 2 * num_relations {
            return Err(ModelError::Shape(format!(
                "relation table has {} rows, expected {}",
                relations.nrows(),
                2 * num_relations
            )));
        }
        Ok(EmbeddingModel {
            family,
            dim,
            num_relations,
            entities,
            relations,
            gamma,
            rel_norm: false,
        })
    }

    /// Same parameters in another scalar type.
    pub fn cast<T: Scalar>(&self) -> EmbeddingModel<T> {
        EmbeddingModel {
            family: self.family,
            dim: self.dim,
            num_relations: self.num_relations,
            entities: self.entities.mapv(|v| T::lit(v.as_f64())),
            relations: self.relations.mapv(|v| T::lit(v.as_f64())),
            gamma: T::lit(self.gamma.as_f64()),
            rel_norm: self.rel_norm,
        }
    }

    pub fn family(&self) -> ModelFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_entities(&self) -> usize {
        self.entities.nrows()
    }

    /// Number of canonical relations `|R|`.
    pub fn num_relations(&self) -> usize {
        self.num_relations
    }

    pub fn gamma(&self) -> S {
        self.gamma
    }

    pub fn set_gamma(&mut self, gamma: S) {
        self.gamma = gamma;
    }

    pub fn rel_norm(&self) -> bool {
        self.rel_norm
    }

    pub fn set_rel_norm(&mut self, on: bool) {
        self.rel_norm = on;
    }

    pub fn entities(&self) -> ArrayView2<'_, S> {
        self.entities.view()
    }

    pub fn relations(&self) -> ArrayView2<'_, S> {
        self.relations.view()
    }

    pub fn entities_mut(&mut self) -> &mut Array2<S> {
        &mut self.entities
    }

    pub fn relations_mut(&mut self) -> &mut Array2<S> {
        &mut self.relations
    }

    #[inline]
    pub fn entity_row(&self, e: u32) -> &[S] {
        self.entities.row(e as usize).to_slice().expect("standard layout")
    }

    #[inline]
    pub fn relation_row(&self, r: u32) -> &[S] {
        self.relations.row(r as usize).to_slice().expect("standard layout")
    }

    #[inline]
    pub fn phi_width(&self) -> usize {
        self.family.phi_width(self.dim)
    }

    /// The slice of entity `e` that compositions are compared against.
    #[inline]
    pub fn target(&self, e: u32) -> &[S] {
        &self.entity_row(e)[self.family.target_range(self.dim)]
    }

    #[inline]
    pub fn source(&self, e: u32) -> &[S] {
        &self.entity_row(e)[self.family.source_range(self.dim)]
    }

    fn check_entity(&self, e: u32) -> Result<(), ModelError> {
        if (e as usize) < self.num_entities() {
            Ok(())
        } else {
            Err(ModelError::EntityOutOfRange {
                id: e,
                len: self.num_entities(),
            })
        }
    }

    fn check_relation(&self, r: u32) -> Result<(), ModelError> {
        if (r as usize) < 2 * self.num_relations {
            Ok(())
        } else {
            Err(ModelError::RelationOutOfRange {
                id: r,
                len: 2 * self.num_relations,
            })
        }
    }

    /// `φ(h, r)`: the object compared against every candidate tail.
    pub fn compose_into(&self, h: u32, r: u32, out: &mut [S]) -> Result<(), ModelError> {
        self.check_entity(h)?;
        self.check_relation(r)?;
        kernels::compose(self.family, self.dim, self.source(h), self.relation_row(r), out);
        Ok(())
    }

    pub fn compose(&self, h: u32, r: u32) -> Result<Vec<S>, ModelError> {
        let mut out = vec![S::zero(); self.phi_width()];
        self.compose_into(h, r, &mut out)?;
        Ok(out)
    }

    /// Score of a composed query against tail `t`; unchecked hot path.
    #[inline]
    pub fn score_composed(&self, phi: &[S], t: u32) -> S {
        let target = self.target(t);
        match self.family.geometry() {
            Geometry::Bilinear => self.gamma * scalar::dot(phi, target),
            Geometry::Distance => -(self.gamma * scalar::distance(phi, target)),
        }
    }

    /// `s(h, r, t)`; `r` may be a reciprocal id in `[|R|, 2|R|)`.
    pub fn score(&self, h: u32, r: u32, t: u32) -> Result<S, ModelError> {
        self.check_entity(t)?;
        let phi = self.compose(h, r)?;
        Ok(self.score_composed(&phi, t))
    }

    pub fn score_triple(&self, f: &Triple) -> Result<S, ModelError> {
        self.score(f.head, f.relation, f.tail)
    }

    /// Score without the `γ` scale.
    pub fn raw_score(&self, h: u32, r: u32, t: u32) -> Result<S, ModelError> {
        Ok(self.score(h, r, t)? / self.gamma)
    }

    /// Fills `out[t] = s(h, r, t)` for every entity `t`.
    pub fn score_tails_into(&self, h: u32, r: u32, phi: &mut [S], out: &mut [S]) -> Result<(), ModelError> {
        self.compose_into(h, r, phi)?;
        for (t, o) in out.iter_mut().enumerate().take(self.num_entities()) {
            *o = self.score_composed(phi, t as u32);
        }
        Ok(())
    }

    pub fn score_tails(&self, h: u32, r: u32) -> Result<ScoreBatch<S>, ModelError> {
        let mut phi = vec![S::zero(); self.phi_width()];
        let mut scores = vec![S::zero(); self.num_entities()];
        self.score_tails_into(h, r, &mut phi, &mut scores)?;
        Ok(ScoreBatch {
            head: h,
            relation: r,
            scores,
        })
    }

    /// Enforce family constraints in place: unit-norm UniBi entities,
    /// singular values clamped to `[−1, 1]`, phases wrapped to `(−π, π]`.
    pub fn project_constraints(&mut self) {
        let dim = self.dim;
        let pi = S::PI();
        let two_pi = pi + pi;
        let wrap = |v: &mut S| {
            if *v > pi || *v <= -pi {
                *v = *v - two_pi * ((*v + pi) / two_pi).floor();
                if *v <= -pi {
                    *v += two_pi;
                }
            }
        };
        match self.family {
            ModelFamily::RotatE => self.relations.iter_mut().for_each(wrap),
            ModelFamily::RotE => {
                for mut row in self.relations.rows_mut() {
                    row.iter_mut().take(dim).for_each(wrap);
                }
            }
            ModelFamily::UniBiO2 | ModelFamily::UniBiO3 => {
                for mut row in self.entities.rows_mut() {
                    let n = row.iter().map(|v| *v * *v).sum::<S>().sqrt();
                    if n > S::zero() {
                        row.mapv_inplace(|v| v / n);
                    }
                }
                let block = if self.family == ModelFamily::UniBiO2 { 2 } else { 5 };
                for mut row in self.relations.rows_mut() {
                    let row = row.as_slice_mut().expect("standard layout");
                    for b in row.chunks_exact_mut(block) {
                        let sigma = &mut b[block - 1];
                        *sigma = sigma.max(-S::one()).min(S::one());
                        if block == 2 {
                            wrap(&mut b[0]);
                        } else {
                            let n = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2] + b[3] * b[3]).sqrt();
                            if n > S::zero() {
                                for v in &mut b[..4] {
                                    *v /= n;
                                }
                            }
                        }
                    }
                }
            }
            _ => {}
        }
        if self.family.has_trainable_gamma() && self.gamma < S::lit(1e-6) {
            self.gamma = S::lit(1e-6);
        }
    }

    /// Scoring-time copy with every relation row rescaled to unit Euclidean
    /// norm. Zero rows stay as they are; their count is returned.
    pub fn with_relation_normalization(&self) -> Result<(Self, usize), ModelError> {
        if !self.family.supports_relation_normalization() {
            return Err(ModelError::RelNormUnsupported(self.family));
        }
        let mut out = self.clone();
        let mut zero_rows = 0;
        for mut row in out.relations.rows_mut() {
            let n = row.iter().map(|v| *v * *v).sum::<S>().sqrt();
            if n > S::zero() {
                row.mapv_inplace(|v| v / n);
            } else {
                zero_rows += 1;
            }
        }
        Ok((out, zero_rows))
    }

    /// The model used for mining: relation-normalized when `rel_norm` is on.
    pub fn scoring_view(&self) -> Result<(std::borrow::Cow<'_, Self>, usize), ModelError> {
        if self.rel_norm {
            let (m, z) = self.with_relation_normalization()?;
            Ok((std::borrow::Cow::Owned(m), z))
        } else {
            Ok((std::borrow::Cow::Borrowed(self), 0))
        }
    }

    pub fn is_finite(&self) -> bool {
        self.gamma.is_finite() && self.entities.iter().chain(self.relations.iter()).all(|v| v.is_finite())
    }
}
