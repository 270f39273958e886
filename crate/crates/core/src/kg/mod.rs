//! Fact storage: triples, vocabularies, class dictionaries, TSV loading and
//! the known/unexplored partition.

mod classes;
mod factset;
mod io;
mod partition;
mod triple;
mod vocab;

pub use classes::{ClassDict, ClassLoadReport};
pub use factset::FactSet;
pub use io::{load_class_dict, load_triples, parse_class_dict, parse_triples, write_triples, DatasetManifest};
pub use partition::{partition, scaffold, PartitionConfig};
pub use triple::Triple;
pub use vocab::Vocabulary;

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum KgError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("ratio {0} outside (0, 1]")]
    InvalidRatio(f64),
    #[error("ratio {rho} keeps {known} facts but the scaffold needs {scaffold}; minimum feasible ratio is {min_rho:.6}")]
    InfeasibleRatio {
        rho: f64,
        known: usize,
        scaffold: usize,
        min_rho: f64,
    },
    #[error("cannot partition an empty fact set")]
    EmptyTotal,
    #[error("vocabulary overflow: more than {0} names")]
    VocabularyOverflow(u64),
}
