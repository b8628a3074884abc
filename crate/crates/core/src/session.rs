//! In-memory sessions: one dataset plus the pipelines asked or built on it.
//!
//! Every stored pipeline is valid, executed and compiled. Edits build the new
//! pipeline, trace and document off to the side and only replace the stored
//! entry when all three succeed, so a failed edit leaves nothing behind.
//! Reads on different sessions run concurrently; writes to one session are
//! serialized by its lock.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::datamation::{generate_with, DatamationDoc, DatamationError, DatamationOptions};
use crate::decomposer::{resolve, suggest_questions, CandidateSet, DecomposeError, ResolveConfig};
use crate::eval::{hardness_of, Hardness};
use crate::executor::{ExecError, Trace};
use crate::ingest::{ingest_csv, CsvFile, IngestError, TypeHints};
use crate::linker::{link_with_threshold, LinkScore};
use crate::model::{Answer, Arg, Dataset, Op, QdmrPipeline, QdmrStep, Schema};
use crate::plan::{validate_steps, ValidationReport, ValidatorOptions, Violation};
use crate::text::{parse, serialize, ParseError};

#[derive(Debug, Clone, Default)]
pub struct EngineConfig {
    pub resolve: ResolveConfig,
    pub datamation: DatamationOptions,
}

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("session '{0}' not found")]
    SessionNotFound(String),
    #[error("pipeline '{0}' not found")]
    PipelineNotFound(String),
    #[error("step {index} not found; the pipeline has {len} steps")]
    StepNotFound { index: usize, len: usize },
    #[error("edit rejected: {0}")]
    InvalidEdit(ValidationReport),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Exec(ExecError),
    #[error(transparent)]
    Datamation(DatamationError),
    #[error("{error}")]
    Decompose {
        error: DecomposeError,
        suggestions: Vec<String>,
    },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("snapshot: {0}")]
    Snapshot(String),
}

impl SessionError {
    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::SessionNotFound(_) => "SessionNotFound",
            SessionError::PipelineNotFound(_) => "PipelineNotFound",
            SessionError::StepNotFound { .. } => "NotFound",
            SessionError::InvalidEdit(_) => "InvalidEdit",
            SessionError::Parse(_) => "ParseError",
            SessionError::Exec(ExecError::EmptyInput { .. }) => "EmptyInput",
            SessionError::Exec(_) => "ExecError",
            SessionError::Datamation(DatamationError::ChannelConflict { .. }) => "ChannelConflict",
            SessionError::Datamation(_) => "DatamationError",
            SessionError::Decompose { error, .. } => match error {
                DecomposeError::NoPatternMatch(_) => "NoPatternMatch",
                DecomposeError::NoValidCandidate(_) => "NoValidCandidate",
                DecomposeError::Transport(_) => "Transport",
                DecomposeError::Protocol(_) => "Protocol",
            },
            SessionError::Ingest(e) => match e {
                IngestError::EmptyFile { .. } => "EmptyFile",
                IngestError::RaggedRows { .. } => "RaggedRows",
                IngestError::TypeConflict { .. } => "TypeConflict",
                _ => "IngestError",
            },
            SessionError::Snapshot(_) => "SnapshotError",
        }
    }
}

fn from_generate(e: DatamationError) -> SessionError {
    match e {
        DatamationError::Invalid(r) => SessionError::InvalidEdit(r),
        DatamationError::Exec(e) => SessionError::Exec(e),
        e => SessionError::Datamation(e),
    }
}

/// A stored pipeline with everything derived from it.
#[derive(Debug, Clone)]
pub struct Entry {
    pub question: Option<String>,
    pub pipeline: QdmrPipeline,
    pub trace: Trace,
    pub doc: DatamationDoc,
    pub warnings: Vec<Violation>,
}

/// Wire view of a stored pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineView {
    pub id: String,
    pub session_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<String>,
    pub text: String,
    pub steps: Vec<QdmrStep>,
    pub answer: Answer,
    pub hardness: Hardness,
    #[serde(default)]
    pub warnings: Vec<Violation>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EditOutcome {
    pub pipeline: PipelineView,
    pub doc: DatamationDoc,
}

#[derive(Debug, Clone, Serialize)]
pub struct AskOutcome {
    pub pipeline: PipelineView,
    pub doc: DatamationDoc,
    pub ranked: Vec<LinkScore>,
    pub serialized_schema: String,
    pub candidates: CandidateSet,
    /// 0-based index of the chosen candidate.
    pub chosen: usize,
}

pub struct Session {
    pub id: String,
    pub dataset: Arc<Dataset>,
    /// Milliseconds since the Unix epoch.
    pub created_at: u64,
    pipelines: BTreeMap<String, Entry>,
}

impl Session {
    pub fn pipeline_ids(&self) -> impl Iterator<Item = &str> {
        self.pipelines.keys().map(String::as_str)
    }

    pub fn entry(&self, pid: &str) -> Option<&Entry> {
        self.pipelines.get(pid)
    }

    fn view(&self, pid: &str, e: &Entry) -> PipelineView {
        PipelineView {
            id: pid.to_string(),
            session_id: self.id.clone(),
            question: e.question.clone(),
            text: serialize(&e.pipeline),
            steps: e.pipeline.steps().to_vec(),
            answer: e.trace.answer.clone(),
            hardness: hardness_of(&e.pipeline),
            warnings: e.warnings.clone(),
        }
    }
}

/// JSON snapshot of a session; pipelines are re-derived on restore.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub version: u32,
    pub id: String,
    pub created_at: u64,
    pub dataset: Dataset,
    pub pipelines: Vec<SnapshotPipeline>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnapshotPipeline {
    pub id: String,
    #[serde(default)]
    pub question: Option<String>,
    pub text: String,
}

fn new_id() -> String {
    uuid::Uuid::new_v4().simple().to_string()
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

pub struct SessionStore {
    config: EngineConfig,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    /// pipeline id -> session id
    owners: RwLock<HashMap<String, String>>,
}

impl Default for SessionStore {
    fn default() -> Self {
        SessionStore::new(EngineConfig::default())
    }
}

impl SessionStore {
    pub fn new(config: EngineConfig) -> Self {
        SessionStore {
            config,
            sessions: RwLock::default(),
            owners: RwLock::default(),
        }
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn create(&self, dataset: Dataset) -> String {
        let id = new_id();
        let s = Session {
            id: id.clone(),
            dataset: Arc::new(dataset),
            created_at: now_ms(),
            pipelines: BTreeMap::new(),
        };
        self.sessions
            .write()
            .expect("session map lock")
            .insert(id.clone(), Arc::new(Mutex::new(s)));
        id
    }

    pub fn ingest(&self, files: &[CsvFile], hints: &TypeHints) -> Result<String, SessionError> {
        Ok(self.create(ingest_csv(files, hints)?))
    }

    pub fn close(&self, sid: &str) -> Result<(), SessionError> {
        let s = self
            .sessions
            .write()
            .expect("session map lock")
            .remove(sid)
            .ok_or_else(|| SessionError::SessionNotFound(sid.to_string()))?;
        let s = s.lock().expect("session lock");
        let mut owners = self.owners.write().expect("owner map lock");
        for pid in s.pipelines.keys() {
            owners.remove(pid);
        }
        Ok(())
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .sessions
            .read()
            .expect("session map lock")
            .keys()
            .cloned()
            .collect();
        ids.sort();
        ids
    }

    fn session(&self, sid: &str) -> Result<Arc<Mutex<Session>>, SessionError> {
        self.sessions
            .read()
            .expect("session map lock")
            .get(sid)
            .cloned()
            .ok_or_else(|| SessionError::SessionNotFound(sid.to_string()))
    }

    /// Runs `f` with the session locked.
    pub fn with_session<T>(
        &self,
        sid: &str,
        f: impl FnOnce(&mut Session) -> Result<T, SessionError>,
    ) -> Result<T, SessionError> {
        let s = self.session(sid)?;
        let mut guard = s.lock().expect("session lock");
        f(&mut guard)
    }

    pub fn schema(&self, sid: &str) -> Result<Schema, SessionError> {
        self.with_session(sid, |s| Ok(s.dataset.schema().clone()))
    }

    pub fn dataset(&self, sid: &str) -> Result<Arc<Dataset>, SessionError> {
        self.with_session(sid, |s| Ok(s.dataset.clone()))
    }

    /// Validates, executes and compiles; nothing is stored.
    fn derive(
        &self,
        dataset: &Dataset,
        steps: Vec<QdmrStep>,
        question: Option<String>,
    ) -> Result<Entry, SessionError> {
        let report = validate_steps(&steps, dataset.schema(), ValidatorOptions::default());
        if !report.valid {
            return Err(SessionError::InvalidEdit(report));
        }
        let pipeline = QdmrPipeline::new(steps).map_err(|e| {
            SessionError::InvalidEdit(ValidationReport {
                valid: false,
                violations: vec![Violation {
                    rule_id: "V3".into(),
                    step_index: 0,
                    message: e.to_string(),
                }],
                warnings: Vec::new(),
            })
        })?;
        let trace = crate::executor::execute_with(&pipeline, dataset, self.config.datamation.exec)
            .map_err(|e| match e {
                ExecError::Invalid(r) => SessionError::InvalidEdit(r),
                e => SessionError::Exec(e),
            })?;
        let doc =
            generate_with(&pipeline, dataset, &self.config.datamation).map_err(from_generate)?;
        Ok(Entry {
            question,
            pipeline,
            trace,
            doc,
            warnings: report.warnings,
        })
    }

    fn store(&self, s: &mut Session, pid: String, entry: Entry) -> EditOutcome {
        let doc = entry.doc.clone();
        let view = s.view(&pid, &entry);
        s.pipelines.insert(pid.clone(), entry);
        self.owners
            .write()
            .expect("owner map lock")
            .insert(pid, s.id.clone());
        EditOutcome {
            pipeline: view,
            doc,
        }
    }

    pub fn ask(&self, sid: &str, question: &str) -> Result<AskOutcome, SessionError> {
        self.with_session(sid, |s| {
            let res = resolve(question, &s.dataset, &self.config.resolve).map_err(|error| {
                SessionError::Decompose {
                    error,
                    suggestions: suggestions_for(&s.dataset, &self.config.resolve),
                }
            })?;
            let entry = self.derive(
                &s.dataset,
                res.pipeline.into_steps(),
                Some(question.to_string()),
            )?;
            let out = self.store(s, new_id(), entry);
            Ok(AskOutcome {
                pipeline: out.pipeline,
                doc: out.doc,
                ranked: res.ranked.scores.clone(),
                serialized_schema: res.ranked.serialized.text.clone(),
                candidates: res.candidates,
                chosen: res.chosen,
            })
        })
    }

    /// Stores a pipeline built from scratch (for example a lone SELECT).
    pub fn create_pipeline(
        &self,
        sid: &str,
        steps: Vec<QdmrStep>,
    ) -> Result<EditOutcome, SessionError> {
        self.with_session(sid, |s| {
            let entry = self.derive(&s.dataset, steps, None)?;
            Ok(self.store(s, new_id(), entry))
        })
    }

    pub fn create_pipeline_text(&self, sid: &str, text: &str) -> Result<EditOutcome, SessionError> {
        let steps = parse(text)?.into_steps();
        self.create_pipeline(sid, steps)
    }

    fn owner(&self, pid: &str) -> Result<String, SessionError> {
        self.owners
            .read()
            .expect("owner map lock")
            .get(pid)
            .cloned()
            .ok_or_else(|| SessionError::PipelineNotFound(pid.to_string()))
    }

    pub fn get(&self, sid: &str, pid: &str) -> Result<PipelineView, SessionError> {
        self.with_session(sid, |s| {
            let e = s
                .pipelines
                .get(pid)
                .ok_or_else(|| SessionError::PipelineNotFound(pid.to_string()))?;
            Ok(s.view(pid, e))
        })
    }

    pub fn list(&self, sid: &str) -> Result<Vec<PipelineView>, SessionError> {
        self.with_session(sid, |s| {
            Ok(s.pipelines.iter().map(|(pid, e)| s.view(pid, e)).collect())
        })
    }

    /// Document of a pipeline looked up by pipeline id alone.
    pub fn datamation(&self, pid: &str) -> Result<DatamationDoc, SessionError> {
        let sid = self.owner(pid)?;
        self.with_session(&sid, |s| {
            s.pipelines
                .get(pid)
                .map(|e| e.doc.clone())
                .ok_or_else(|| SessionError::PipelineNotFound(pid.to_string()))
        })
    }

    pub fn trace(&self, sid: &str, pid: &str) -> Result<Trace, SessionError> {
        self.with_session(sid, |s| {
            s.pipelines
                .get(pid)
                .map(|e| e.trace.clone())
                .ok_or_else(|| SessionError::PipelineNotFound(pid.to_string()))
        })
    }

    /// Applies `change` to a copy of the stored steps and replaces the entry
    /// only if the result derives cleanly.
    fn modify(
        &self,
        sid: &str,
        pid: &str,
        change: impl FnOnce(Vec<QdmrStep>) -> Result<Vec<QdmrStep>, SessionError>,
    ) -> Result<EditOutcome, SessionError> {
        self.with_session(sid, |s| {
            let current = s
                .pipelines
                .get(pid)
                .ok_or_else(|| SessionError::PipelineNotFound(pid.to_string()))?;
            let question = current.question.clone();
            let steps = change(current.pipeline.steps().to_vec())?;
            let entry = self.derive(&s.dataset, steps, question)?;
            Ok(self.store(s, pid.to_string(), entry))
        })
    }

    /// Replaces the whole pipeline with `text`.
    pub fn replace(&self, sid: &str, pid: &str, text: &str) -> Result<EditOutcome, SessionError> {
        let steps = parse(text)?.into_steps();
        self.modify(sid, pid, |_| Ok(steps))
    }

    /// Replaces step `index` (1-based).
    pub fn edit_step(
        &self,
        sid: &str,
        pid: &str,
        index: usize,
        step: QdmrStep,
    ) -> Result<EditOutcome, SessionError> {
        self.modify(sid, pid, |mut steps| {
            let len = steps.len();
            let slot = index
                .checked_sub(1)
                .and_then(|i| steps.get_mut(i))
                .ok_or(SessionError::StepNotFound { index, len })?;
            *slot = step;
            Ok(steps)
        })
    }

    pub fn append_step(
        &self,
        sid: &str,
        pid: &str,
        step: QdmrStep,
    ) -> Result<EditOutcome, SessionError> {
        self.modify(sid, pid, |mut steps| {
            steps.push(step);
            Ok(steps)
        })
    }

    /// Removes step `index` (1-based); see [`remove_step`] for how
    /// references are rewritten.
    pub fn delete_step(
        &self,
        sid: &str,
        pid: &str,
        index: usize,
    ) -> Result<EditOutcome, SessionError> {
        self.modify(sid, pid, |steps| {
            let len = steps.len();
            if index == 0 || index > len {
                return Err(SessionError::StepNotFound { index, len });
            }
            if len == 1 {
                return Err(SessionError::InvalidEdit(ValidationReport {
                    valid: false,
                    violations: vec![Violation {
                        rule_id: "V4".into(),
                        step_index: 0,
                        message: "a pipeline needs at least its SELECT step".into(),
                    }],
                    warnings: Vec::new(),
                }));
            }
            Ok(remove_step(steps, index))
        })
    }

    pub fn delete_pipeline(&self, sid: &str, pid: &str) -> Result<(), SessionError> {
        self.with_session(sid, |s| {
            s.pipelines
                .remove(pid)
                .ok_or_else(|| SessionError::PipelineNotFound(pid.to_string()))?;
            self.owners.write().expect("owner map lock").remove(pid);
            Ok(())
        })
    }

    pub fn suggestions(&self, sid: &str) -> Result<Vec<String>, SessionError> {
        self.with_session(sid, |s| {
            Ok(suggestions_for(&s.dataset, &self.config.resolve))
        })
    }

    pub fn snapshot(&self, sid: &str) -> Result<SessionSnapshot, SessionError> {
        self.with_session(sid, |s| {
            Ok(SessionSnapshot {
                version: 1,
                id: s.id.clone(),
                created_at: s.created_at,
                dataset: (*s.dataset).clone(),
                pipelines: s
                    .pipelines
                    .iter()
                    .map(|(pid, e)| SnapshotPipeline {
                        id: pid.clone(),
                        question: e.question.clone(),
                        text: serialize(&e.pipeline),
                    })
                    .collect(),
            })
        })
    }

    /// Rebuilds a session from a snapshot, keeping its ids.
    pub fn restore(&self, snap: SessionSnapshot) -> Result<String, SessionError> {
        if snap.version != 1 {
            return Err(SessionError::Snapshot(format!(
                "unsupported version {}",
                snap.version
            )));
        }
        let mut session = Session {
            id: snap.id.clone(),
            dataset: Arc::new(snap.dataset),
            created_at: snap.created_at,
            pipelines: BTreeMap::new(),
        };
        for p in snap.pipelines {
            let steps = parse(&p.text)?.into_steps();
            let entry = self.derive(&session.dataset, steps, p.question)?;
            self.store(&mut session, p.id, entry);
        }
        self.sessions
            .write()
            .expect("session map lock")
            .insert(snap.id.clone(), Arc::new(Mutex::new(session)));
        Ok(snap.id)
    }

    /// Writes `<dir>/<session id>.json`.
    pub fn save_snapshot(&self, sid: &str, dir: &Path) -> Result<PathBuf, SessionError> {
        let snap = self.snapshot(sid)?;
        let path = dir.join(format!("{sid}.json"));
        let json =
            serde_json::to_string(&snap).map_err(|e| SessionError::Snapshot(e.to_string()))?;
        std::fs::write(&path, json).map_err(|e| SessionError::Snapshot(e.to_string()))?;
        Ok(path)
    }

    pub fn load_snapshot(&self, path: &Path) -> Result<String, SessionError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| SessionError::Snapshot(e.to_string()))?;
        let snap: SessionSnapshot =
            serde_json::from_str(&text).map_err(|e| SessionError::Snapshot(e.to_string()))?;
        self.restore(snap)
    }
}

/// Cold-start questions from a neutral linking pass.
pub fn suggestions_for(dataset: &Dataset, config: &ResolveConfig) -> Vec<String> {
    let ranked = link_with_threshold("", dataset.schema(), config.scorer.as_ref(), config.theta);
    suggest_questions(&ranked, dataset.schema())
}

/// Drops step `index` (1-based) and renumbers references after it.
///
/// FILTER, SUPERLATIVE and SORT keep the shape of their input, so references
/// to a deleted one are redirected to that input. References to any other
/// deleted step become `#0` and fail validation.
pub fn remove_step(mut steps: Vec<QdmrStep>, index: usize) -> Vec<QdmrStep> {
    let removed = steps.remove(index - 1);
    let bypass = match removed.op {
        Op::Filter | Op::Superlative | Op::Sort => match removed.args.first() {
            Some(Arg::Ref(k)) if *k < index => *k,
            _ => 0,
        },
        _ => 0,
    };
    for step in steps.iter_mut().skip(index - 1) {
        for r in step.refs_mut() {
            *r = match (*r).cmp(&index) {
                std::cmp::Ordering::Greater => *r - 1,
                std::cmp::Ordering::Equal => bypass,
                std::cmp::Ordering::Less => *r,
            };
        }
    }
    steps
}
