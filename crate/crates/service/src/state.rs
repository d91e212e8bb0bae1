use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use tokio::sync::Mutex;

use lexiforge_core::{
    detect_ambiguities, what_if, AlignedWord, AmbiguityCluster, ApplyOptions, ApplyOutput, CoverageReport,
    EquivalenceSet, Lexicon, PhoneSet, Rule, RuleEngine, RuleMatch, RuleSet, WhatIfReport,
};

use crate::error::ApiError;

/// Everything that stays fixed while the service runs.
#[derive(Debug)]
pub struct ServiceConfig {
    pub phones: PhoneSet,
    pub equiv: EquivalenceSet,
    pub lexicon: Lexicon,
    /// Derivation-time alignments by word, when a dump was loaded.
    pub alignments: HashMap<String, AlignedWord>,
    pub clusters: Vec<AmbiguityCluster>,
    /// Where accepted rule changes are written; `None` keeps them in memory.
    pub rules_path: Option<PathBuf>,
    pub options: ApplyOptions,
}

impl ServiceConfig {
    pub fn new(phones: PhoneSet, lexicon: Lexicon) -> Self {
        let equiv = EquivalenceSet::for_phoneset(&phones);
        Self {
            phones,
            equiv,
            lexicon,
            alignments: HashMap::new(),
            clusters: Vec::new(),
            rules_path: None,
            options: ApplyOptions::default(),
        }
    }

    pub fn with_alignments(mut self, alignments: Vec<AlignedWord>) -> Self {
        self.clusters = detect_ambiguities(&alignments);
        self.alignments = alignments.into_iter().map(|a| (a.word.clone(), a)).collect();
        self
    }

    pub fn with_rules_path(mut self, path: impl Into<PathBuf>) -> Self {
        self.rules_path = Some(path.into());
        self
    }

    pub fn with_options(mut self, options: ApplyOptions) -> Self {
        self.options = options;
        self
    }
}

/// A complete, immutable view of the rule set and what it produces.
#[derive(Debug)]
pub struct Snapshot {
    pub revision: u64,
    pub rules: RuleSet,
    pub output: ApplyOutput,
    pub report: CoverageReport,
}

impl Snapshot {
    fn build(config: &ServiceConfig, rules: RuleSet, revision: u64) -> Result<Self, ApiError> {
        let output = RuleEngine::new(&config.phones, &config.equiv, &rules)
            .apply(&config.lexicon, config.options)
            .map_err(|e| ApiError::Internal(e.to_string()))?;
        let report = CoverageReport::from_output(&output, &rules, config.lexicon.len());
        Ok(Self {
            revision,
            rules,
            output,
            report,
        })
    }

    /// Logged matches for one word; the log is ordered by word.
    pub fn matches_for(&self, word: &str) -> &[RuleMatch] {
        let m = &self.output.matches;
        let start = m.partition_point(|x| x.word.as_str() < word);
        let end = start + m[start..].partition_point(|x| x.word == word);
        &m[start..end]
    }
}

struct Inner {
    config: ServiceConfig,
    current: RwLock<Arc<Snapshot>>,
    writer: Mutex<()>,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

fn blocking_failed(e: tokio::task::JoinError) -> ApiError {
    ApiError::Internal(format!("worker task failed: {e}"))
}

impl AppState {
    pub fn new(config: ServiceConfig, rules: RuleSet) -> Result<Self, ApiError> {
        let snapshot = Snapshot::build(&config, rules, 0)?;
        Ok(Self {
            inner: Arc::new(Inner {
                config,
                current: RwLock::new(Arc::new(snapshot)),
                writer: Mutex::new(()),
            }),
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.inner.config
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.inner.current.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    fn parse(&self, text: &str) -> Result<Rule, ApiError> {
        Rule::parse(text, &self.config().phones).map_err(|e| ApiError::BadRequest(e.to_string()))
    }

    /// What adding (or replacing) a rule would change. Never mutates.
    pub async fn preview(&self, text: &str) -> Result<WhatIfReport, ApiError> {
        let draft = self.parse(text)?;
        let snap = self.snapshot();
        let state = self.clone();
        tokio::task::spawn_blocking(move || {
            let c = state.config();
            what_if(
                &c.lexicon,
                &draft,
                &snap.rules,
                &c.phones,
                &c.equiv,
                Some(&snap.output.lexicon),
            )
            .map_err(|e| ApiError::Internal(e.to_string()))
        })
        .await
        .map_err(blocking_failed)?
    }

    pub async fn add_rule(&self, text: &str, expected: Option<u64>) -> Result<(u64, String), ApiError> {
        let rule = self.parse(text)?;
        let canonical = rule.to_string();
        self.mutate(expected, move |rules| {
            rules.push(rule).map_err(|e| ApiError::BadRequest(e.to_string()))
        })
        .await
        .map(|rev| (rev, canonical))
    }

    pub async fn remove_rule(&self, id: &str, expected: Option<u64>) -> Result<(u64, String), ApiError> {
        let id = id.to_string();
        let mut removed = String::new();
        let rev = self
            .mutate(expected, |rules| match rules.remove(&id) {
                Some(r) => {
                    removed = r.to_string();
                    Ok(())
                }
                None => Err(ApiError::NotFound(format!("unknown rule `{id}`"))),
            })
            .await?;
        Ok((rev, removed))
    }

    async fn mutate(
        &self,
        expected: Option<u64>,
        change: impl FnOnce(&mut RuleSet) -> Result<(), ApiError>,
    ) -> Result<u64, ApiError> {
        let _guard = self.inner.writer.lock().await;
        let current = self.snapshot();
        if let Some(expected) = expected {
            if expected != current.revision {
                return Err(ApiError::Conflict {
                    expected,
                    current: current.revision,
                });
            }
        }
        let mut rules = current.rules.clone();
        change(&mut rules)?;
        let revision = current.revision + 1;
        let state = self.clone();
        let next = tokio::task::spawn_blocking(move || -> Result<Snapshot, ApiError> {
            let snap = Snapshot::build(state.config(), rules, revision)?;
            if let Some(path) = &state.config().rules_path {
                persist_atomically(path, &snap.rules.to_text())
                    .map_err(|e| ApiError::Internal(format!("writing {}: {e}", path.display())))?;
            }
            Ok(snap)
        })
        .await
        .map_err(blocking_failed)??;
        *self.inner.current.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(next);
        tracing::info!(revision, "rule set updated");
        Ok(revision)
    }
}

/// Writes `text` to a sibling temp file and renames it over `path`.
pub(crate) fn persist_atomically(path: &Path, text: &str) -> io::Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "rules path has no file name"))?;
    let tmp = path.with_file_name(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(text.as_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}
