// Copyright 2026 The opsflow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


//! REST API for one or more organization administrators over a shared
//! simulation. Every bearer token is bound to exactly one organization and
//! every mutation is submitted under that organization's identity.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::body::Bytes;
use axum::extract::{FromRequestParts, Path, State};
use axum::http::header::{AUTHORIZATION, CONTENT_TYPE};
use axum::http::request::Parts;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use opsflow_core::codec;
use opsflow_core::configtx::{ConfigOp, ConfigTxError};
use opsflow_core::opssc::chaincode::Decision;
use opsflow_core::opssc::{CHAINCODE_OPS, CHANNEL_OPS};
use opsflow_core::sim::{SimError, Simulation};
use opsflow_core::simnet::{ChaincodeDefinition, ErrorKind, NetError};
use opsflow_core::{ChannelId, OrgId};

pub type SharedSim = Arc<Mutex<Simulation>>;

pub fn default_token(org: &OrgId) -> String {
    format!("token-{org}")
}

#[derive(Clone)]
pub struct ApiState {
    sim: SharedSim,
    tokens: Arc<BTreeMap<String, OrgId>>,
    export: Option<Arc<PathBuf>>,
}

impl ApiState {
    /// `export`, when set, receives the full block log after every
    /// successful mutation.
    pub fn new(sim: SharedSim, tokens: BTreeMap<String, OrgId>, export: Option<PathBuf>) -> Self {
        ApiState { sim, tokens: Arc::new(tokens), export: export.map(Arc::new) }
    }

    fn lock(&self) -> MutexGuard<'_, Simulation> {
        // A panicking handler cannot leave the network half-updated: every
        // mutation is a single committed transaction.
        self.sim.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn read<T: Serialize>(&self, f: impl FnOnce(&Simulation) -> Result<T, SimError>) -> Result<Response, ApiError> {
        let value = f(&self.lock())?;
        canonical(StatusCode::OK, &value)
    }

    fn write<T: Serialize>(
        &self,
        status: StatusCode,
        f: impl FnOnce(&mut Simulation) -> Result<T, SimError>,
    ) -> Result<Response, ApiError> {
        let mut sim = self.lock();
        let value = f(&mut sim)?;
        if let Some(path) = &self.export {
            if let Err(e) = crate::files::write_block_log(path, sim.network().export_blocks()) {
                eprintln!("block log export failed: {e:#}");
            }
        }
        canonical(status, &value)
    }
}

/// Error body: `{"error": {"kind", "code", "message"}}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub kind: &'static str,
    pub code: String,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, code: &str, message: impl ToString) -> Self {
        ApiError { status, kind, code: code.into(), message: message.to_string() }
    }

    fn unauthorized() -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "unauthorized", "bad_token", "missing or unknown bearer token")
    }

    fn bad_body(err: impl ToString) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid", "bad_body", err)
    }
}

fn kind_status(kind: ErrorKind) -> (StatusCode, &'static str) {
    match kind {
        ErrorKind::NotFound => (StatusCode::NOT_FOUND, "not_found"),
        ErrorKind::Conflict => (StatusCode::CONFLICT, "conflict"),
        ErrorKind::Forbidden => (StatusCode::FORBIDDEN, "forbidden"),
        ErrorKind::Invalid => (StatusCode::BAD_REQUEST, "invalid"),
    }
}

fn config_error(e: &ConfigTxError) -> ApiError {
    let (kind, code) = match e {
        ConfigTxError::StaleBase { .. } => (ErrorKind::Conflict, "stale_base"),
        _ => (ErrorKind::Invalid, "config"),
    };
    let (status, kind) = kind_status(kind);
    ApiError::new(status, kind, code, e)
}

impl From<SimError> for ApiError {
    fn from(err: SimError) -> Self {
        let message = err.to_string();
        let (kind, code) = match &err {
            SimError::Net(NetError::Chaincode(e)) => {
                let (status, kind) = kind_status(e.kind);
                return ApiError::new(status, kind, &e.code, &e.message);
            }
            SimError::Config(e) | SimError::Net(NetError::Config(e)) => return config_error(e),
            SimError::Net(net) => match net {
                NetError::UnknownChannel(_) => (ErrorKind::NotFound, "unknown_channel"),
                NetError::UnknownOrg(_) => (ErrorKind::NotFound, "unknown_org"),
                NetError::UnknownPeer(_) => (ErrorKind::NotFound, "unknown_peer"),
                NetError::ChaincodeNotCommitted(_) => (ErrorKind::NotFound, "chaincode_not_committed"),
                NetError::NotMember { .. } => (ErrorKind::Forbidden, "not_member"),
                NetError::NotJoined { .. } => (ErrorKind::Forbidden, "not_joined"),
                NetError::PermissionDenied { .. } => (ErrorKind::Forbidden, "permission_denied"),
                NetError::TxInvalid { .. } => (ErrorKind::Conflict, "tx_invalid"),
                _ => (ErrorKind::Invalid, "rejected"),
            },
            SimError::Repo(_) => (ErrorKind::NotFound, "unknown_release"),
            _ => {
                return ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", "internal", message);
            }
        };
        let (status, kind) = kind_status(kind);
        ApiError::new(status, kind, code, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "kind": self.kind, "code": self.code, "message": self.message } });
        let text = codec::to_canonical_string(&body).unwrap_or_else(|_| body.to_string());
        (self.status, [(CONTENT_TYPE, "application/json")], text).into_response()
    }
}

fn canonical<T: Serialize + ?Sized>(status: StatusCode, value: &T) -> Result<Response, ApiError> {
    let text = codec::to_canonical_string(value)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", "encode", e))?;
    Ok((status, [(CONTENT_TYPE, "application/json")], text).into_response())
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(ApiError::bad_body)
}

/// The organization a request acts for, resolved from its bearer token.
pub struct Caller(pub OrgId);

impl FromRequestParts<ApiState> for Caller {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &ApiState) -> Result<Self, Self::Rejection> {
        let token = parts
            .headers
            .get(AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .ok_or_else(ApiError::unauthorized)?;
        state.tokens.get(token.trim()).cloned().map(Caller).ok_or_else(ApiError::unauthorized)
    }
}

#[derive(Deserialize)]
struct ChannelProposalBody {
    target_channel_id: ChannelId,
    #[serde(default)]
    description: String,
    spec: Vec<ConfigOp>,
}

#[derive(Deserialize)]
struct ChaincodeProposalBody {
    channel_id: ChannelId,
    definition: ChaincodeDefinition,
}

#[derive(Deserialize)]
struct DecisionBody {
    decision: Decision,
}

#[derive(Deserialize)]
struct ReleaseBody {
    name: String,
    version: String,
}

fn namespace_of(proposal_id: &str) -> &'static str {
    if proposal_id.starts_with("ccp-") {
        CHAINCODE_OPS
    } else {
        CHANNEL_OPS
    }
}

async fn list_channels(State(s): State<ApiState>, Caller(org): Caller) -> Result<Response, ApiError> {
    s.read(|sim| sim.query_ops(&org, CHANNEL_OPS, "list_channels", json!({})))
}

async fn get_channel(State(s): State<ApiState>, Caller(org): Caller, Path(id): Path<String>) -> Result<Response, ApiError> {
    s.read(|sim| sim.query_ops(&org, CHANNEL_OPS, "get_channel_info", json!({ "channel_id": id })))
}

async fn list_channel_proposals(State(s): State<ApiState>, Caller(org): Caller) -> Result<Response, ApiError> {
    s.read(|sim| sim.query_ops(&org, CHANNEL_OPS, "list_proposals", json!({})))
}

async fn get_channel_proposal(
    State(s): State<ApiState>,
    Caller(org): Caller,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    s.read(|sim| sim.query_ops(&org, CHANNEL_OPS, "get_proposal", json!({ "proposal_id": id })))
}

async fn create_channel_proposal(State(s): State<ApiState>, Caller(org): Caller, body: Bytes) -> Result<Response, ApiError> {
    let b: ChannelProposalBody = parse_body(&body)?;
    s.write(StatusCode::CREATED, |sim| sim.propose_channel_update(&org, &b.target_channel_id, &b.description, b.spec))
}

async fn vote_channel_proposal(
    State(s): State<ApiState>,
    Caller(org): Caller,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    s.write(StatusCode::OK, |sim| sim.vote_channel_update(&org, &id))
}

async fn list_chaincode_proposals(State(s): State<ApiState>, Caller(org): Caller) -> Result<Response, ApiError> {
    s.read(|sim| sim.query_ops(&org, CHAINCODE_OPS, "list_proposals", json!({})))
}

async fn get_chaincode_proposal(
    State(s): State<ApiState>,
    Caller(org): Caller,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    s.read(|sim| sim.query_ops(&org, CHAINCODE_OPS, "get_proposal", json!({ "proposal_id": id })))
}

async fn create_chaincode_proposal(State(s): State<ApiState>, Caller(org): Caller, body: Bytes) -> Result<Response, ApiError> {
    let b: ChaincodeProposalBody = parse_body(&body)?;
    s.write(StatusCode::CREATED, |sim| sim.propose_chaincode(&org, &b.channel_id, &b.definition))
}

async fn vote_chaincode_proposal(
    State(s): State<ApiState>,
    Caller(org): Caller,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let b: DecisionBody = parse_body(&body)?;
    s.write(StatusCode::OK, |sim| sim.vote_chaincode(&org, &id, b.decision))
}

async fn history(State(s): State<ApiState>, Caller(org): Caller, Path(id): Path<String>) -> Result<Response, ApiError> {
    s.read(|sim| sim.query_ops(&org, namespace_of(&id), "get_history", json!({ "proposal_id": id })))
}

async fn list_chaincodes(State(s): State<ApiState>, Caller(org): Caller) -> Result<Response, ApiError> {
    s.read(|sim| sim.query_ops(&org, CHAINCODE_OPS, "list_chaincodes", json!({})))
}

// Publishing to the source repository is off-chain; it only makes a
// release resolvable by the agents.
async fn publish_release(State(s): State<ApiState>, Caller(_): Caller, body: Bytes) -> Result<Response, ApiError> {
    let b: ReleaseBody = parse_body(&body)?;
    let mut sim = s.lock();
    let source = sim.publish_release(&b.name, &b.version, None)?;
    canonical(StatusCode::CREATED, &source)
}

async fn whoami(Caller(org): Caller) -> Result<Response, ApiError> {
    canonical(StatusCode::OK, &json!({ "org_id": org }))
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no_route", "no such endpoint")
}

pub fn router(state: ApiState) -> Router {
    Router::new()
        .route("/api/whoami", get(whoami))
        .route("/api/channels", get(list_channels))
        .route("/api/channels/{id}", get(get_channel))
        .route("/api/channel-proposals", get(list_channel_proposals).post(create_channel_proposal))
        .route("/api/channel-proposals/{id}", get(get_channel_proposal))
        .route("/api/channel-proposals/{id}/vote", post(vote_channel_proposal))
        .route("/api/chaincode-proposals", get(list_chaincode_proposals).post(create_chaincode_proposal))
        .route("/api/chaincode-proposals/{id}", get(get_chaincode_proposal))
        .route("/api/chaincode-proposals/{id}/vote", post(vote_chaincode_proposal))
        .route("/api/proposals/{id}/history", get(history))
        .route("/api/chaincodes", get(list_chaincodes))
        .route("/api/releases", post(publish_release))
        .fallback(not_found)
        .with_state(state)
}

