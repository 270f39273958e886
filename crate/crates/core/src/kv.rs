//! Flat `key=value` text files (dataset manifests, experiment configs).

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {msg}")]
pub struct KvError {
    pub line: usize,
    pub msg: String,
}

/// One parsed `key=value` entry with its 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KvEntry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// Parses `key=value` lines. Blank lines and `#` comments are skipped; keys
/// may not repeat.
pub fn parse(text: &str) -> Result<Vec<KvEntry>, KvError> {
    let mut out: Vec<KvEntry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((k, v)) = trimmed.split_once('=') else {
            return Err(KvError {
                line,
                msg: format!("expected key=value, got {trimmed:?}"),
            });
        };
        let key = k.trim();
        if key.is_empty() {
            return Err(KvError {
                line,
                msg: "empty key".into(),
            });
        }
        if out.iter().any(|e| e.key == key) {
            return Err(KvError {
                line,
                msg: format!("duplicate key {key:?}"),
            });
        }
        out.push(KvEntry {
            key: key.to_owned(),
            value: v.trim().to_owned(),
            line,
        });
    }
    Ok(out)
}

/// Renders entries back to text, one per line.
pub fn render<'a>(entries: impl IntoIterator<Item = (&'a str, String)>) -> String {
    let mut s = String::new();
    for (k, v) in entries {
        s.push_str(k);
        s.push('=');
        s.push_str(&v);
        s.push('\n');
    }
    s
}
