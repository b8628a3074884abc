//! From a question to candidate pipelines, and from candidates to the first
//! valid pipeline.

mod remote;
mod rules;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

#[cfg(feature = "remote")]
pub use remote::HttpModelClient;
pub use remote::{
    build_prompt, decompose_remote, parse_response, timeout_of, RemoteConfig, RemoteError,
    RemoteModelClient, PROMPT_VERSION,
};
pub use rules::{decompose_rules, suggest_questions};

use crate::linker::{link_with_threshold, LexicalScorer, RankedSchema, Scorer, THETA};
use crate::model::{Dataset, QdmrPipeline};
use crate::text::{first_valid, NoValidCandidate};

/// Default number of candidates kept per decomposition.
pub const DEFAULT_BEAM: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub text: String,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateSource {
    Rules,
    Remote,
}

/// Candidates in non-increasing score order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub candidates: Vec<Candidate>,
    pub source: CandidateSource,
}

impl CandidateSet {
    pub fn texts(&self) -> Vec<&str> {
        self.candidates.iter().map(|c| c.text.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DecomposeError {
    #[error("no question pattern matches '{0}'")]
    NoPatternMatch(String),
    #[error(transparent)]
    NoValidCandidate(#[from] NoValidCandidate),
    #[error("remote model transport error: {0}")]
    Transport(String),
    #[error("remote model protocol error: {0}")]
    Protocol(String),
}

/// Which generators to try, in order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[default]
    RulesThenRemote,
    RemoteThenRules,
    RulesOnly,
    RemoteOnly,
}

#[derive(Clone)]
pub struct ResolveConfig {
    pub strategy: Strategy,
    pub theta: f64,
    pub beam_size: usize,
    pub retry_budget: u32,
    pub remote: Option<Arc<dyn RemoteModelClient>>,
    pub scorer: Arc<dyn Scorer>,
}

impl Default for ResolveConfig {
    fn default() -> Self {
        ResolveConfig {
            strategy: Strategy::default(),
            theta: THETA,
            beam_size: DEFAULT_BEAM,
            retry_budget: 1,
            remote: None,
            scorer: Arc::new(LexicalScorer::default()),
        }
    }
}

impl std::fmt::Debug for ResolveConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ResolveConfig")
            .field("strategy", &self.strategy)
            .field("theta", &self.theta)
            .field("beam_size", &self.beam_size)
            .field("remote", &self.remote.is_some())
            .finish()
    }
}

/// The chosen pipeline plus what led to it.
#[derive(Debug, Clone)]
pub struct Resolution {
    pub pipeline: QdmrPipeline,
    pub candidates: CandidateSet,
    /// 0-based index of the chosen candidate.
    pub chosen: usize,
    pub ranked: RankedSchema,
}

fn try_source(
    source: CandidateSource,
    question: &str,
    ranked: &RankedSchema,
    dataset: &Dataset,
    config: &ResolveConfig,
) -> Result<(usize, QdmrPipeline, CandidateSet), DecomposeError> {
    let set = match source {
        CandidateSource::Rules => decompose_rules(question, ranked, dataset.schema())?,
        CandidateSource::Remote => match &config.remote {
            Some(client) => decompose_remote(
                question,
                ranked,
                client.as_ref(),
                config.beam_size,
                config.retry_budget,
            )?,
            None => return Err(DecomposeError::NoPatternMatch(question.to_string())),
        },
    };
    let (i, p) = first_valid(&set.texts(), dataset.schema())?;
    Ok((i, p, set))
}

/// Links, decomposes and picks the first valid candidate.
pub fn resolve(
    question: &str,
    dataset: &Dataset,
    config: &ResolveConfig,
) -> Result<Resolution, DecomposeError> {
    let ranked = link_with_threshold(
        question,
        dataset.schema(),
        config.scorer.as_ref(),
        config.theta,
    );
    let order: &[CandidateSource] = match (config.strategy, config.remote.is_some()) {
        (Strategy::RulesOnly, _) | (Strategy::RulesThenRemote, false) => &[CandidateSource::Rules],
        (Strategy::RemoteOnly, _) => &[CandidateSource::Remote],
        (Strategy::RulesThenRemote, true) => &[CandidateSource::Rules, CandidateSource::Remote],
        (Strategy::RemoteThenRules, true) => &[CandidateSource::Remote, CandidateSource::Rules],
        (Strategy::RemoteThenRules, false) => &[CandidateSource::Rules],
    };
    let mut last_err = None;
    for &source in order {
        match try_source(source, question, &ranked, dataset, config) {
            Ok((chosen, pipeline, candidates)) => {
                return Ok(Resolution {
                    pipeline,
                    candidates,
                    chosen,
                    ranked,
                })
            }
            Err(e) => {
                tracing::debug!(?source, error = %e, "candidate source failed");
                last_err = Some(e);
            }
        }
    }
    Err(last_err.unwrap_or_else(|| DecomposeError::NoPatternMatch(question.to_string())))
}
