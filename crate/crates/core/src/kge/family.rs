use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The nine supported scoring families.
///
/// `dim` counts native coordinates: reals for TransE/CP/RESCAL, complex
/// numbers for ComplEx/RotatE, 2-D pairs for RotE, quaternions for QuatE and
/// 2×2 or 3×3 blocks for UniBi. Parameter layouts (per row, reals):
///
/// | family    | entity row            | relation row                          | score                          |
/// |-----------|-----------------------|---------------------------------------|--------------------------------|
/// | TransE    | `d`                   | `d` translation                       | `−‖h + r − t‖₂`                |
/// | CP        | `d` head ‖ `d` tail   | `d`                                   | `⟨h_head, r, t_tail⟩`          |
/// | ComplEx   | `d` complex (re, im)  | `d` complex                           | `Re⟨h, r, conj(t)⟩`            |
/// | RESCAL    | `d`                   | `d×d` row-major matrix `M`            | `hᵀ M t`                       |
/// | RotatE    | `d` complex           | `d` phases `θ`, `r = e^{iθ}`          | `−‖h ∘ r − t‖₂`                |
/// | RotE      | `d` pairs             | `d` angles ‖ `2d` translation         | `−‖Rot(θ) h + b − t‖₂`         |
/// | QuatE     | `d` quaternions       | `d` quaternions, unit-normalized      | `⟨h ⊗ r̂, t⟩`                  |
/// | UniBi-O2  | `2d`, unit norm       | per block `(θ, σ)`                    | `γ · hᵀ blockdiag(σ R(θ)) t`   |
/// | UniBi-O3  | `3d`, unit norm       | per block `(w, x, y, z, σ)`           | `γ · hᵀ blockdiag(σ R(q̂)) t`  |
///
/// RotatE and RotE use the Euclidean norm over all real coordinates. UniBi
/// singular values `σ` are clamped to `[−1, 1]` by projection, so the raw
/// UniBi score of unit-norm entities lies in `[−1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelFamily {
    TransE,
    Cp,
    ComplEx,
    Rescal,
    RotatE,
    RotE,
    QuatE,
    UniBiO2,
    UniBiO3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Geometry {
    /// `score = γ · ⟨φ(h, r), t⟩`
    Bilinear,
    /// `score = −γ · ‖φ(h, r) − t‖₂`
    Distance,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 9] = [
        ModelFamily::TransE,
        ModelFamily::Cp,
        ModelFamily::ComplEx,
        ModelFamily::Rescal,
        ModelFamily::RotatE,
        ModelFamily::RotE,
        ModelFamily::QuatE,
        ModelFamily::UniBiO2,
        ModelFamily::UniBiO3,
    ];

    pub fn geometry(self) -> Geometry {
        match self {
            ModelFamily::TransE | ModelFamily::RotatE | ModelFamily::RotE => Geometry::Distance,
            _ => Geometry::Bilinear,
        }
    }

    pub fn entity_width(self, dim: usize) -> usize {
        match self {
            ModelFamily::TransE | ModelFamily::Rescal => dim,
            ModelFamily::Cp | ModelFamily::ComplEx | ModelFamily::RotatE | ModelFamily::RotE | ModelFamily::UniBiO2 => {
                2 * dim
            }
            ModelFamily::UniBiO3 => 3 * dim,
            ModelFamily::QuatE => 4 * dim,
        }
    }

    pub fn relation_width(self, dim: usize) -> usize {
        match self {
            ModelFamily::TransE | ModelFamily::Cp | ModelFamily::RotatE => dim,
            ModelFamily::ComplEx | ModelFamily::UniBiO2 => 2 * dim,
            ModelFamily::RotE => 3 * dim,
            ModelFamily::QuatE => 4 * dim,
            ModelFamily::UniBiO3 => 5 * dim,
            ModelFamily::Rescal => dim * dim,
        }
    }

    /// Columns of an entity row fed into the composition `φ(h, r)`.
    pub fn source_range(self, dim: usize) -> Range<usize> {
        match self {
            ModelFamily::Cp => 0..dim,
            _ => 0..self.entity_width(dim),
        }
    }

    /// Columns of an entity row that `φ(h, r)` is compared against.
    pub fn target_range(self, dim: usize) -> Range<usize> {
        match self {
            ModelFamily::Cp => dim..2 * dim,
            _ => 0..self.entity_width(dim),
        }
    }

    pub fn phi_width(self, dim: usize) -> usize {
        self.target_range(dim).len()
    }

    pub fn has_trainable_gamma(self) -> bool {
        matches!(self, ModelFamily::UniBiO2 | ModelFamily::UniBiO3)
    }

    pub fn is_unibi(self) -> bool {
        self.has_trainable_gamma()
    }

    /// Families whose parameters carry constraints enforced by projection.
    pub fn has_constraints(self) -> bool {
        matches!(self, ModelFamily::RotatE | ModelFamily::UniBiO2 | ModelFamily::UniBiO3)
    }

    pub fn supports_relation_normalization(self) -> bool {
        matches!(self, ModelFamily::Cp | ModelFamily::ComplEx)
    }

    pub fn tag(self) -> u32 {
        ModelFamily::ALL.iter().position(|&f| f == self).expect("listed") as u32
    }

    pub fn from_tag(tag: u32) -> Option<Self> {
        ModelFamily::ALL.get(tag as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelFamily::TransE => "transe",
            ModelFamily::Cp => "cp",
            ModelFamily::ComplEx => "complex",
            ModelFamily::Rescal => "rescal",
            ModelFamily::RotatE => "rotate",
            ModelFamily::RotE => "rote",
            ModelFamily::QuatE => "quate",
            ModelFamily::UniBiO2 => "unibi-o2",
            ModelFamily::UniBiO3 => "unibi-o3",
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        match key.as_str() {
            "transe" => Ok(ModelFamily::TransE),
            "cp" => Ok(ModelFamily::Cp),
            "complex" => Ok(ModelFamily::ComplEx),
            "rescal" => Ok(ModelFamily::Rescal),
            "rotate" => Ok(ModelFamily::RotatE),
            "rote" => Ok(ModelFamily::RotE),
            "quate" => Ok(ModelFamily::QuatE),
            "unibio2" => Ok(ModelFamily::UniBiO2),
            "unibio3" => Ok(ModelFamily::UniBiO3),
            _ => Err(format!("unknown model family {s:?}")),
        }
    }
}
