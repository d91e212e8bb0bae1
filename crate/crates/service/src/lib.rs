//! Local HTTP API over a loaded lexicon and a mutable rule set.
//!
//! Readers take a cheap `Arc` snapshot and never block on writers. Writers
//! are serialized, recompute the transformed lexicon off the async runtime,
//! persist the rules file, and only then publish the new snapshot.

mod error;
mod state;

use std::net::{Ipv4Addr, SocketAddr};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;

use lexiforge_core::{AmbiguityCluster, CoverageReport, Inventory, RuleMatch, WhatIfReport};

pub use error::ApiError;
pub use state::{AppState, ServiceConfig, Snapshot};

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/clusters", get(clusters))
        .route("/api/words/:word", get(word))
        .route("/api/rules", get(list_rules).post(add_rule))
        .route("/api/rules/preview", post(preview))
        .route("/api/rules/:id", delete(remove_rule))
        .route("/api/stats", get(stats))
        .route("/api/inventories", get(inventories))
        .with_state(state)
}

/// Serves on the loopback interface until the task is cancelled.
pub async fn serve(state: AppState, port: u16) -> std::io::Result<()> {
    let listener = TcpListener::bind(SocketAddr::from((Ipv4Addr::LOCALHOST, port))).await?;
    serve_on(listener, state).await
}

/// Serves on an already bound listener.
pub async fn serve_on(listener: TcpListener, state: AppState) -> std::io::Result<()> {
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state)).await
}

#[derive(Debug, Serialize)]
struct Health {
    status: &'static str,
    revision: u64,
    words: usize,
    rules: usize,
}

async fn health(State(state): State<AppState>) -> Json<Health> {
    let snap = state.snapshot();
    Json(Health {
        status: "ok",
        revision: snap.revision,
        words: state.config().lexicon.len(),
        rules: snap.rules.len(),
    })
}

#[derive(Debug, Deserialize)]
struct Page {
    #[serde(default)]
    offset: usize,
    limit: Option<usize>,
}

const DEFAULT_PAGE: usize = 50;
const MAX_PAGE: usize = 1000;

#[derive(Debug, Serialize)]
struct ClusterPage<'a> {
    total: usize,
    offset: usize,
    limit: usize,
    clusters: &'a [AmbiguityCluster],
}

async fn clusters(State(state): State<AppState>, Query(page): Query<Page>) -> Json<serde_json::Value> {
    let all = &state.config().clusters;
    let limit = page.limit.unwrap_or(DEFAULT_PAGE).min(MAX_PAGE);
    let start = page.offset.min(all.len());
    let end = (start + limit).min(all.len());
    Json(
        serde_json::to_value(ClusterPage {
            total: all.len(),
            offset: page.offset,
            limit,
            clusters: &all[start..end],
        })
        .unwrap_or_default(),
    )
}

#[derive(Debug, Serialize)]
struct Column {
    letter: Option<String>,
    cmu: Option<String>,
    cls: Option<String>,
}

#[derive(Debug, Serialize)]
struct WordView {
    word: String,
    revision: u64,
    cmu: String,
    syllables: String,
    alignment: Vec<Column>,
    derivation: Option<Vec<Column>>,
    transformed: String,
    matches: Vec<RuleMatch>,
}

fn columns(aligned: &lexiforge_core::AlignedWord) -> Vec<Column> {
    aligned
        .columns
        .iter()
        .map(|c| Column {
            letter: c.letter.as_ref().map(|l| l.text.clone()),
            cmu: c.cmu.as_ref().map(|p| p.label().to_string()),
            cls: c.cls.as_ref().map(|p| p.label().to_string()),
        })
        .collect()
}

async fn word(State(state): State<AppState>, Path(raw): Path<String>) -> Result<Json<WordView>, ApiError> {
    let word = raw.trim().to_ascii_uppercase();
    let config = state.config();
    let entry = config
        .lexicon
        .primary(&word)
        .ok_or_else(|| ApiError::NotFound(format!("unknown word `{raw}`")))?;
    let snap = state.snapshot();
    let aligned = lexiforge_core::align_letters(&word, &entry.phones, &config.equiv)
        .map_err(|e| ApiError::Internal(e.to_string()))?;
    let (syll, _) = lexiforge_core::syllabify_lenient(&entry.phones);
    let transformed = snap
        .output
        .lexicon
        .primary(&word)
        .map(|e| e.labels().join(" "))
        .unwrap_or_default();
    Ok(Json(WordView {
        cmu: entry.labels().join(" "),
        syllables: syll.brackets(),
        alignment: columns(&aligned),
        derivation: config.alignments.get(&word).map(columns),
        transformed,
        matches: snap.matches_for(&word).to_vec(),
        revision: snap.revision,
        word,
    }))
}

#[derive(Debug, Serialize)]
struct RuleView {
    id: String,
    kind: String,
    text: String,
}

#[derive(Debug, Serialize)]
struct RuleList {
    revision: u64,
    rules: Vec<RuleView>,
}

async fn list_rules(State(state): State<AppState>) -> Json<RuleList> {
    let snap = state.snapshot();
    Json(RuleList {
        revision: snap.revision,
        rules: snap
            .rules
            .rules()
            .iter()
            .map(|r| RuleView {
                id: r.id.clone(),
                kind: r.kind().to_string(),
                text: r.to_string(),
            })
            .collect(),
    })
}

#[derive(Debug, Deserialize)]
pub struct PreviewRequest {
    pub rule: String,
}

async fn preview(State(state): State<AppState>, Json(req): Json<PreviewRequest>) -> Result<Json<WhatIfReport>, ApiError> {
    Ok(Json(state.preview(&req.rule).await?))
}

#[derive(Debug, Deserialize)]
pub struct AddRuleRequest {
    pub rule: String,
    pub expected_revision: Option<u64>,
}

#[derive(Debug, Serialize)]
struct Mutation {
    revision: u64,
    rule: String,
}

async fn add_rule(
    State(state): State<AppState>,
    Json(req): Json<AddRuleRequest>,
) -> Result<(StatusCode, Json<Mutation>), ApiError> {
    let (revision, rule) = state.add_rule(&req.rule, req.expected_revision).await?;
    Ok((StatusCode::CREATED, Json(Mutation { revision, rule })))
}

#[derive(Debug, Deserialize)]
struct RemoveQuery {
    expected_revision: Option<u64>,
}

async fn remove_rule(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<RemoveQuery>,
) -> Result<Json<Mutation>, ApiError> {
    let (revision, rule) = state.remove_rule(&id, q.expected_revision).await?;
    Ok(Json(Mutation { revision, rule }))
}

async fn stats(State(state): State<AppState>) -> Json<CoverageReport> {
    Json(state.snapshot().report.clone())
}

#[derive(Debug, Serialize)]
struct Inventories<'a> {
    cmu: &'a [String],
    cls: &'a [String],
    common: &'a [String],
    merge: &'a [lexiforge_core::MergePair],
}

async fn inventories(State(state): State<AppState>) -> Json<serde_json::Value> {
    let phones = &state.config().phones;
    Json(
        serde_json::to_value(Inventories {
            cmu: phones.inventory(Inventory::Cmu).members(),
            cls: phones.inventory(Inventory::Cls).members(),
            common: phones.inventory(Inventory::Common).members(),
            merge: phones.merge_table().pairs(),
        })
        .unwrap_or_default(),
    )
}
