use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use super::{ClassDict, ClassLoadReport, FactSet, KgError, Triple, Vocabulary};
use crate::kv;

fn open(path: &Path) -> Result<fs::File, KgError> {
    fs::File::open(path).map_err(|source| KgError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Reads `head<TAB>relation<TAB>tail` lines, interning unseen names into
/// `vocab`. Duplicate lines collapse; an empty input yields an empty set.
pub fn parse_triples<R: Read>(reader: R, origin: &Path, vocab: &mut Vocabulary) -> Result<FactSet, KgError> {
    let mut facts = FactSet::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|source| KgError::Io {
            path: origin.to_owned(),
            source,
        })?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(KgError::Parse {
                path: origin.to_owned(),
                line: i + 1,
                msg: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        let h = vocab.intern_entity(fields[0])?;
        let r = vocab.intern_relation(fields[1])?;
        let t = vocab.intern_entity(fields[2])?;
        facts.insert(Triple::new(h, r, t));
    }
    Ok(facts)
}

pub fn load_triples(path: &Path, vocab: &mut Vocabulary) -> Result<FactSet, KgError> {
    let f = open(path)?;
    parse_triples(f, path, vocab)
}

/// Writes facts as named TSV lines.
pub fn write_triples<W: Write>(mut w: W, facts: &FactSet, vocab: &Vocabulary) -> std::io::Result<()> {
    for f in facts {
        let name = |n: Option<&str>, id: u32| n.map(str::to_owned).unwrap_or_else(|| id.to_string());
        writeln!(
            w,
            "{}\t{}\t{}",
            name(vocab.entity_name(f.head), f.head),
            name(vocab.relation_name(f.relation), f.relation),
            name(vocab.entity_name(f.tail), f.tail)
        )?;
    }
    Ok(())
}

/// Reads `entity<TAB>class` lines. Unknown entities are skipped and counted;
/// an entity listed twice keeps its first class.
pub fn parse_class_dict<R: Read>(
    reader: R,
    origin: &Path,
    vocab: &Vocabulary,
) -> Result<(ClassDict, ClassLoadReport), KgError> {
    let mut dict = ClassDict::new(vocab.num_entities());
    let mut report = ClassLoadReport::default();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|source| KgError::Io {
            path: origin.to_owned(),
            source,
        })?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.is_empty() {
            continue;
        }
        let Some((entity, class)) = line.split_once('\t') else {
            return Err(KgError::Parse {
                path: origin.to_owned(),
                line: i + 1,
                msg: "expected entity<TAB>class".into(),
            });
        };
        let Some(e) = vocab.entity_id(entity) else {
            report.unknown_entities += 1;
            continue;
        };
        let c = dict.intern_class(class);
        if !dict.assign(e, c) {
            report.repeated_entities += 1;
        }
    }
    Ok((dict, report))
}

pub fn load_class_dict(path: &Path, vocab: &Vocabulary) -> Result<(ClassDict, ClassLoadReport), KgError> {
    let f = open(path)?;
    parse_class_dict(f, path, vocab)
}

/// Dataset manifest: `triples_path`, optional `classes_path`, `rho`, `seed`.
/// Relative paths resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub triples_path: PathBuf,
    pub classes_path: Option<PathBuf>,
    pub rho: Option<f64>,
    pub seed: Option<u64>,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self, KgError> {
        let text = fs::read_to_string(path).map_err(|source| KgError::Io {
            path: path.to_owned(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, path, base)
    }

    pub fn parse(text: &str, origin: &Path, base: &Path) -> Result<Self, KgError> {
        let perr = |line: usize, msg: String| KgError::Parse {
            path: origin.to_owned(),
            line,
            msg,
        };
        let entries = kv::parse(text).map_err(|e| perr(e.line, e.msg))?;
        let mut triples_path = None;
        let mut m = DatasetManifest {
            triples_path: PathBuf::new(),
            classes_path: None,
            rho: None,
            seed: None,
        };
        for e in entries {
            let resolve = |v: &str| {
                let p = PathBuf::from(v);
                if p.is_absolute() { p } else { base.join(p) }
            };
            match e.key.as_str() {
                "triples_path" => triples_path = Some(resolve(&e.value)),
                "classes_path" => m.classes_path = Some(resolve(&e.value)),
                "rho" => m.rho = Some(e.value.parse().map_err(|_| perr(e.line, format!("bad rho {:?}", e.value)))?),
                "seed" => m.seed = Some(e.value.parse().map_err(|_| perr(e.line, format!("bad seed {:?}", e.value)))?),
                other => return Err(perr(e.line, format!("unknown manifest key {other:?}"))),
            }
        }
        m.triples_path = triples_path.ok_or_else(|| perr(0, "missing triples_path".into()))?;
        Ok(m)
    }

    pub fn render(&self) -> String {
        let mut entries = vec![("triples_path", self.triples_path.display().to_string())];
        if let Some(c) = &self.classes_path {
            entries.push(("classes_path", c.display().to_string()));
        }
        if let Some(r) = self.rho {
            entries.push(("rho", r.to_string()));
        }
        if let Some(s) = self.seed {
            entries.push(("seed", s.to_string()));
        }
        kv::render(entries)
    }
}
