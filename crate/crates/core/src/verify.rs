//! Verifiers: the oracle backed by the held-out facts, and live sessions
//! answered by a human through the verify API.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{FactSet, Triple, Vocabulary};
use crate::runner::{CompletionCurve, CurvePoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictSource {
    Oracle,
    Human,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub triple: Triple,
    pub accepted: bool,
    pub source: VerdictSource,
}

/// What one verification step produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Verification {
    pub verdicts: Vec<Verdict>,
    /// `F_new`
    pub accepted: FactSet,
    /// Candidates left without a verdict at the deadline; they may be
    /// proposed again.
    pub expired: FactSet,
}

#[derive(Debug, Error, PartialEq)]
pub enum VerifyError {
    #[error("session `{0}` not found")]
    NotFound(String),
    #[error("session `{0}` was closed")]
    Closed(String),
    #[error("verdict conflict: {0}")]
    Conflict(String),
    #[error("session `{id}` is waiting on step {step}; cannot start another")]
    Busy { id: String, step: usize },
}

/// A candidate handed to a verifier, with its model score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proposal {
    pub triple: Triple,
    pub score: f64,
}

pub trait Verifier {
    fn verify(&mut self, step: usize, proposals: &[Proposal]) -> Result<Verification, VerifyError>;

    /// Called after every completed step with the curve so far.
    fn progress(&mut self, _curve: &CompletionCurve) {}
}

/// `F_new = candidates ∩ F_un`, one verdict per candidate in input order.
pub fn verify_oracle(candidates: &[Triple], unexplored: &FactSet) -> Verification {
    let mut out = Verification::default();
    for &triple in candidates {
        let accepted = unexplored.contains(&triple);
        if accepted {
            out.accepted.insert(triple);
        }
        out.verdicts.push(Verdict {
            triple,
            accepted,
            source: VerdictSource::Oracle,
        });
    }
    out
}

/// Simulated verifier that knows the held-out facts.
#[derive(Debug, Clone)]
pub struct OracleVerifier {
    unexplored: FactSet,
}

impl OracleVerifier {
    pub fn new(unexplored: FactSet) -> Self {
        OracleVerifier { unexplored }
    }
}

impl Verifier for OracleVerifier {
    fn verify(&mut self, _step: usize, proposals: &[Proposal]) -> Result<Verification, VerifyError> {
        let c: Vec<Triple> = proposals.iter().map(|p| p.triple).collect();
        Ok(verify_oracle(&c, &self.unexplored))
    }
}

/// A pending candidate as shown to a human.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingFact {
    pub h: u32,
    pub r: u32,
    pub t: u32,
    pub head: String,
    pub relation: String,
    pub tail: String,
    pub score: f64,
}

impl PendingFact {
    pub fn triple(&self) -> Triple {
        Triple::new(self.h, self.r, self.t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictEntry {
    pub h: u32,
    pub r: u32,
    pub t: u32,
    pub accepted: bool,
}

impl VerdictEntry {
    pub fn triple(&self) -> Triple {
        Triple::new(self.h, self.r, self.t)
    }
}

/// Read-only snapshot of a session for API responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub id: String,
    pub step: usize,
    /// Pending candidates, best score first.
    pub pending: Vec<PendingFact>,
    pub verdicts: Vec<VerdictEntry>,
    pub curve: Vec<CurvePoint>,
    /// Milliseconds left before pending candidates expire; `None` when idle.
    pub deadline_ms: Option<u64>,
    pub awaiting: bool,
    pub closed: bool,
}

#[derive(Debug)]
struct Session {
    step: usize,
    pending: Vec<PendingFact>,
    verdicts: Vec<VerdictEntry>,
    curve: Vec<CurvePoint>,
    deadline: Option<Instant>,
    awaiting: bool,
    closed: bool,
}

impl Session {
    fn verdict_of(&self, t: &Triple) -> Option<bool> {
        self.verdicts.iter().find(|v| v.triple() == *t).map(|v| v.accepted)
    }
}

/// Shared state between the loop (single writer) and API readers.
#[derive(Debug, Default)]
pub struct SessionStore {
    sessions: Mutex<HashMap<String, Session>>,
    changed: Condvar,
}

impl SessionStore {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    fn lock(&self) -> MutexGuard<'_, HashMap<String, Session>> {
        self.sessions.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Registers a session whose curve starts at `initial`.
    pub fn open(&self, id: &str, initial: CurvePoint) {
        self.lock().insert(
            id.to_owned(),
            Session {
                step: 0,
                pending: Vec::new(),
                verdicts: Vec::new(),
                curve: vec![initial],
                deadline: None,
                awaiting: false,
                closed: false,
            },
        );
    }

    pub fn close(&self, id: &str) {
        if let Some(s) = self.lock().get_mut(id) {
            s.closed = true;
        }
        self.changed.notify_all();
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.lock().keys().cloned().collect();
        ids.sort();
        ids
    }

    pub fn snapshot(&self, id: &str) -> Result<SessionSnapshot, VerifyError> {
        let map = self.lock();
        let s = map.get(id).ok_or_else(|| VerifyError::NotFound(id.to_owned()))?;
        let now = Instant::now();
        Ok(SessionSnapshot {
            id: id.to_owned(),
            step: s.step,
            pending: s.pending.clone(),
            verdicts: s.verdicts.clone(),
            curve: s.curve.clone(),
            deadline_ms: s.deadline.filter(|_| s.awaiting).map(|d| d.saturating_duration_since(now).as_millis() as u64),
            awaiting: s.awaiting,
            closed: s.closed,
        })
    }

    pub fn set_curve(&self, id: &str, curve: &[CurvePoint]) {
        if let Some(s) = self.lock().get_mut(id) {
            s.curve = curve.to_vec();
        }
        self.changed.notify_all();
    }

    /// Starts a verification step; pending candidates are kept best first.
    pub fn begin_step(&self, id: &str, step: usize, mut pending: Vec<PendingFact>, timeout: Duration) -> Result<(), VerifyError> {
        let mut map = self.lock();
        let s = map.get_mut(id).ok_or_else(|| VerifyError::NotFound(id.to_owned()))?;
        if s.closed {
            return Err(VerifyError::Closed(id.to_owned()));
        }
        if s.awaiting {
            return Err(VerifyError::Busy { id: id.to_owned(), step: s.step });
        }
        pending.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.triple().cmp(&b.triple())));
        pending.dedup_by_key(|p| p.triple());
        s.step = step;
        s.pending = pending;
        s.verdicts.clear();
        s.deadline = Some(Instant::now() + timeout);
        s.awaiting = true;
        drop(map);
        self.changed.notify_all();
        Ok(())
    }

    /// Records verdicts atomically: either all apply or none do. Re-posting
    /// a recorded verdict is a no-op. Returns the number still pending.
    pub fn post_verdicts(&self, id: &str, entries: &[VerdictEntry]) -> Result<usize, VerifyError> {
        let mut map = self.lock();
        let s = map.get_mut(id).ok_or_else(|| VerifyError::NotFound(id.to_owned()))?;
        if s.closed {
            return Err(VerifyError::Closed(id.to_owned()));
        }
        let mut fresh: Vec<VerdictEntry> = Vec::new();
        for e in entries {
            let t = e.triple();
            let prior = s.verdict_of(&t).or_else(|| fresh.iter().find(|f| f.triple() == t).map(|f| f.accepted));
            match prior {
                Some(a) if a == e.accepted => {}
                Some(_) => return Err(VerifyError::Conflict(format!("({}, {}, {}) already has the opposite verdict", e.h, e.r, e.t))),
                None if s.awaiting && s.pending.iter().any(|p| p.triple() == t) => fresh.push(*e),
                None => return Err(VerifyError::Conflict(format!("({}, {}, {}) is not pending", e.h, e.r, e.t))),
            }
        }
        for e in &fresh {
            s.pending.retain(|p| p.triple() != e.triple());
        }
        s.verdicts.extend(fresh);
        let remaining = s.pending.len();
        drop(map);
        self.changed.notify_all();
        Ok(remaining)
    }

    /// Blocks until every candidate has a verdict, the deadline passes or
    /// the session is closed. Returns verdicts and the expired candidates.
    pub fn await_step(&self, id: &str) -> Result<(Vec<VerdictEntry>, Vec<Triple>), VerifyError> {
        let mut map = self.lock();
        loop {
            let s = map.get_mut(id).ok_or_else(|| VerifyError::NotFound(id.to_owned()))?;
            if s.closed {
                s.awaiting = false;
                return Err(VerifyError::Closed(id.to_owned()));
            }
            let now = Instant::now();
            let deadline = s.deadline.unwrap_or(now);
            if s.pending.is_empty() || now >= deadline {
                let expired = s.pending.drain(..).map(|p| p.triple()).collect();
                s.awaiting = false;
                s.deadline = None;
                return Ok((s.verdicts.clone(), expired));
            }
            let wait = deadline - now;
            map = self.changed.wait_timeout(map, wait).unwrap_or_else(|e| e.into_inner()).0;
        }
    }
}

/// Verifier answered through a [`SessionStore`] session.
#[derive(Debug, Clone)]
pub struct SessionVerifier {
    store: Arc<SessionStore>,
    id: String,
    timeout: Duration,
    vocab: Arc<Vocabulary>,
}

impl SessionVerifier {
    /// Opens session `id` with the initial curve point.
    pub fn open(store: Arc<SessionStore>, id: impl Into<String>, timeout: Duration, vocab: Arc<Vocabulary>, initial: CurvePoint) -> Self {
        let id = id.into();
        store.open(&id, initial);
        SessionVerifier { store, id, timeout, vocab }
    }

    pub fn id(&self) -> &str {
        &self.id
    }
}

impl Verifier for SessionVerifier {
    fn verify(&mut self, step: usize, proposals: &[Proposal]) -> Result<Verification, VerifyError> {
        let name = |n: Option<&str>, id: u32| n.map_or_else(|| id.to_string(), str::to_owned);
        let pending = proposals
            .iter()
            .map(|p| {
                let t = p.triple;
                PendingFact {
                    h: t.head,
                    r: t.relation,
                    t: t.tail,
                    head: name(self.vocab.entity_name(t.head), t.head),
                    relation: name(self.vocab.relation_name(t.relation), t.relation),
                    tail: name(self.vocab.entity_name(t.tail), t.tail),
                    score: p.score,
                }
            })
            .collect();
        self.store.begin_step(&self.id, step, pending, self.timeout)?;
        let (entries, expired) = self.store.await_step(&self.id)?;
        let mut out = Verification::default();
        for e in entries {
            if e.accepted {
                out.accepted.insert(e.triple());
            }
            out.verdicts.push(Verdict {
                triple: e.triple(),
                accepted: e.accepted,
                source: VerdictSource::Human,
            });
        }
        out.expired = expired.into_iter().collect();
        Ok(out)
    }

    fn progress(&mut self, curve: &CompletionCurve) {
        self.store.set_curve(&self.id, &curve.points);
    }
}

/// Append-only JSON-lines verdict log.
pub struct VerdictLog {
    out: BufWriter<File>,
}

#[derive(Serialize, Deserialize, Debug, PartialEq)]
pub struct VerdictRecord {
    pub step: usize,
    pub h: u32,
    pub r: u32,
    pub t: u32,
    pub accepted: bool,
    pub source: VerdictSource,
    /// Unix time in milliseconds.
    pub ts: u64,
}

impl VerdictLog {
    pub fn append_to(path: &Path) -> std::io::Result<Self> {
        let f = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(VerdictLog { out: BufWriter::new(f) })
    }

    pub fn record(&mut self, step: usize, verdicts: &[Verdict]) -> std::io::Result<()> {
        let ts = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64);
        for v in verdicts {
            let rec = VerdictRecord {
                step,
                h: v.triple.head,
                r: v.triple.relation,
                t: v.triple.tail,
                accepted: v.accepted,
                source: v.source,
                ts,
            };
            serde_json::to_writer(&mut self.out, &rec)?;
            self.out.write_all(b"\n")?;
        }
        self.out.flush()
    }
}
