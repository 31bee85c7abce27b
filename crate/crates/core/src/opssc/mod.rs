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

//! Operations smart contracts: on-chain workflows that share, agree on and
//! drive channel and chaincode operations across organizations.
//!
//! Both contracts run as native chaincodes on the ops channel. They record
//! proposals, votes and task results, and emit [`OperationsEvent`]s that the
//! per-organization agents act on.

pub mod chaincode;
pub mod channel;

use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::codec::to_canonical_string;
use crate::identity::OrgId;
use crate::simnet::{Chaincode, ChannelConfig, GenesisSpec, KvWrite, Stub};

pub const CHANNEL_OPS: &str = "channel_ops";
pub const CHAINCODE_OPS: &str = "chaincode_ops";
pub const OPSSC_VERSION: &str = "1.0";

/// The contracts deployed on the ops channel at genesis, as (name, version).
pub const OPSSC_CHAINCODES: [(&str, &str); 2] = [(CHANNEL_OPS, OPSSC_VERSION), (CHAINCODE_OPS, OPSSC_VERSION)];

/// Failed attempts an agent retries locally before reporting a terminal
/// failure for a per-organization task.
pub const AGENT_RETRY_BUDGET: u32 = 1;

pub(crate) const SEED_KEY: &str = "params/seed";

pub(crate) fn native_chaincodes() -> Vec<(&'static str, Arc<dyn Chaincode>)> {
    alloc::vec![
        (CHANNEL_OPS, Arc::new(channel::ChannelOps) as Arc<dyn Chaincode>),
        (CHAINCODE_OPS, Arc::new(chaincode::ChaincodeOps) as Arc<dyn Chaincode>),
    ]
}

/// Initial ops-channel state: the channel inventory, the chaincode
/// inventory and the network seed used for executor selection.
pub(crate) fn genesis_writes(spec: &GenesisSpec, configs: &[ChannelConfig]) -> Vec<KvWrite> {
    let write = |namespace: &str, key: String, value: String| KvWrite {
        namespace: namespace.into(),
        key,
        value: Some(value),
    };
    let mut writes = Vec::new();
    for ns in [CHANNEL_OPS, CHAINCODE_OPS] {
        writes.push(write(ns, SEED_KEY.into(), spec.seed.to_string()));
    }
    for config in configs {
        let info = channel::ChannelInfo::from(config);
        writes.push(write(CHANNEL_OPS, channel::channel_key(&config.channel_id), json(&info)));
    }
    for cc in &spec.chaincodes {
        let info = chaincode::ChaincodeInfo {
            channel_id: cc.channel.clone(),
            definition: crate::simnet::ChaincodeDefinition {
                name: cc.name.clone(),
                version: cc.version.clone(),
                sequence: 1,
                endorsement_policy: Default::default(),
                source_ref: crate::repo::release(&cc.name, &cc.version).0,
            },
        };
        writes.push(write(CHAINCODE_OPS, chaincode::inventory_key(&cc.channel, &cc.name), json(&info)));
    }
    writes
}

fn json<T: Serialize>(value: &T) -> String {
    to_canonical_string(value).expect("opssc state has no floats")
}


#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    UpdateChannel,
    Deploy,
    Commit,
    ConfigUpdated,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::UpdateChannel => "update_channel",
            EventKind::Deploy => "deploy",
            EventKind::Commit => "commit",
            EventKind::ConfigUpdated => "config_updated",
        }
    }
}

/// Instruction emitted by an OpsSC telling agents what to execute next.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationsEvent {
    pub event_kind: EventKind,
    pub proposal_id: String,
    /// Set for kinds executed by a single organization.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub executor: Option<OrgId>,
    #[serde(default)]
    pub attempt: u32,
}

impl OperationsEvent {
    pub(crate) fn emit(&self, stub: &mut Stub<'_>) {
        let payload = serde_json::to_value(self).expect("events serialize");
        stub.set_event(self.event_kind.as_str(), payload);
    }

    pub fn from_payload(payload: &Value) -> Option<Self> {
        serde_json::from_value(payload.clone()).ok()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Request,
    Vote,
    UpdateChannel,
    Download,
    Install,
    Approve,
    Commit,
}

impl Task {
    pub const DEPLOY_TASKS: [Task; 3] = [Task::Download, Task::Install, Task::Approve];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Request => "request",
            Task::Vote => "vote",
            Task::UpdateChannel => "update_channel",
            Task::Download => "download",
            Task::Install => "install",
            Task::Approve => "approve",
            Task::Commit => "commit",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Task::Request,
            Task::Vote,
            Task::UpdateChannel,
            Task::Download,
            Task::Install,
            Task::Approve,
            Task::Commit,
        ]
        .into_iter()
        .find(|t| t.as_str() == s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum TaskOutcome {
    Success,
    Failure { detail: String },
}

impl TaskOutcome {
    pub fn failure(detail: impl Into<String>) -> Self {
        TaskOutcome::Failure { detail: detail.into() }
    }

    pub fn is_success(&self) -> bool {
        matches!(self, TaskOutcome::Success)
    }
}

/// One entry of a proposal's on-chain history.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub proposal_id: String,
    pub org_id: OrgId,
    pub task: Task,
    pub outcome: TaskOutcome,
    pub block_number: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

pub(crate) fn history_key(proposal_id: &str) -> String {
    alloc::format!("history/{proposal_id}")
}

pub(crate) fn append_history(
    stub: &mut Stub<'_>,
    proposal_id: &str,
    task: Task,
    outcome: TaskOutcome,
    note: Option<String>,
) -> Result<(), crate::simnet::ChaincodeError> {
    let key = history_key(proposal_id);
    let mut history: Vec<TaskRecord> = stub.get_json(&key)?.unwrap_or_default();
    history.push(TaskRecord {
        proposal_id: proposal_id.into(),
        org_id: stub.creator().clone(),
        task,
        outcome,
        block_number: stub.block_number(),
        note,
    });
    stub.put_json(&key, &history)
}

pub(crate) fn read_seed(stub: &mut Stub<'_>) -> Result<u64, crate::simnet::ChaincodeError> {
    stub.get_state(SEED_KEY)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| crate::simnet::ChaincodeError::invalid("corrupt_state", "missing seed"))
}

/// Next sequential proposal id under `prefix`.
pub(crate) fn next_proposal_id(stub: &mut Stub<'_>, prefix: &str) -> String {
    let counter: u64 = stub.get_state("params/next_id").and_then(|s| s.parse().ok()).unwrap_or(1);
    stub.put_state("params/next_id", (counter + 1).to_string());
    alloc::format!("{prefix}-{counter:04}")
}
