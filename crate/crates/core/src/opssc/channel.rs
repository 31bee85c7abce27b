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

//! OpsSC for channel operations.
//!
//! An organization proposes a human-readable list of config operations for
//! one channel. The contract compiles it into a [`ConfigUpdate`] and keeps
//! the organizations' [`ConfigSignature`]s as their votes. Once a majority of
//! the electorate has signed, an `update_channel` event names one voter as
//! executor; that agent submits the envelope and reports back. A failed
//! execution hands the job to the next voter in the seeded order.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{append_history, history_key, next_proposal_id, read_seed, EventKind, OperationsEvent, Task, TaskOutcome, TaskRecord};
use crate::agent::select_executor;
use crate::configtx::{self, ConfigOp, ConfigSignature, ConfigUpdate};
use crate::identity::{majority, ChannelId, OrgId};
use crate::simnet::{Chaincode, ChaincodeError, ChannelConfig, ChannelKind, ErrorKind, Stub};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelInfo {
    pub channel_id: ChannelId,
    pub kind: ChannelKind,
    pub member_orgs: BTreeSet<OrgId>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub consortium_orgs: BTreeSet<OrgId>,
    pub config_version: u64,
}

impl From<&ChannelConfig> for ChannelInfo {
    fn from(config: &ChannelConfig) -> Self {
        ChannelInfo {
            channel_id: config.channel_id.clone(),
            kind: config.kind,
            member_orgs: config.member_orgs.clone(),
            consortium_orgs: config.consortium_orgs.clone(),
            config_version: config.config_version,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelProposalStatus {
    Proposed,
    Approved,
    Committed,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelProposal {
    pub proposal_id: String,
    pub proposer: OrgId,
    pub target_channel_id: ChannelId,
    pub description: String,
    pub spec: Vec<ConfigOp>,
    /// Configuration the update was compiled against.
    pub base: ChannelConfig,
    pub compiled_update: ConfigUpdate,
    pub status: ChannelProposalStatus,
    pub votes: BTreeMap<OrgId, ConfigSignature>,
    pub electorate: BTreeSet<OrgId>,
    pub attempt: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub executor: Option<OrgId>,
}

impl ChannelProposal {
    pub fn voters(&self) -> BTreeSet<OrgId> {
        self.votes.keys().cloned().collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ChannelOpsError {
    #[error("unknown channel {0}")]
    UnknownChannel(ChannelId),
    #[error("unknown proposal {0}")]
    UnknownProposal(String),
    #[error("{0} is not in the governing member set")]
    NotMember(OrgId),
    #[error("{0} is not in the proposal's electorate")]
    NotInElectorate(OrgId),
    #[error("{0} has already voted")]
    DoubleVote(OrgId),
    #[error("proposal is {0:?}")]
    WrongStatus(ChannelProposalStatus),
    #[error("{0} is not the selected executor")]
    WrongExecutor(OrgId),
    #[error("task {0:?} is not registered on channel proposals")]
    WrongTask(Task),
    #[error("base config is for {0}")]
    BaseMismatch(ChannelId),
    #[error("base config version {base} is older than known version {known}")]
    StaleBase { base: u64, known: u64 },
    #[error("spec does not compile: {0}")]
    Compile(configtx::ConfigTxError),
    #[error("config signature of {0} does not verify")]
    BadSignature(OrgId),
}

impl From<ChannelOpsError> for ChaincodeError {
    fn from(e: ChannelOpsError) -> Self {
        use ChannelOpsError::*;
        let (kind, code) = match &e {
            UnknownChannel(_) => (ErrorKind::NotFound, "unknown_channel"),
            UnknownProposal(_) => (ErrorKind::NotFound, "unknown_proposal"),
            NotMember(_) => (ErrorKind::Forbidden, "not_member"),
            NotInElectorate(_) => (ErrorKind::Forbidden, "not_in_electorate"),
            DoubleVote(_) => (ErrorKind::Conflict, "double_vote"),
            WrongStatus(_) => (ErrorKind::Conflict, "wrong_status"),
            WrongExecutor(_) => (ErrorKind::Forbidden, "wrong_executor"),
            WrongTask(_) => (ErrorKind::Invalid, "wrong_task"),
            BaseMismatch(_) => (ErrorKind::Invalid, "base_mismatch"),
            StaleBase { .. } => (ErrorKind::Conflict, "stale_base"),
            Compile(_) => (ErrorKind::Invalid, "compile"),
            BadSignature(_) => (ErrorKind::Invalid, "bad_signature"),
        };
        ChaincodeError::new(kind, code, e.to_string())
    }
}

pub(crate) fn channel_key(channel_id: &ChannelId) -> String {
    format!("channel/{channel_id}")
}

fn proposal_key(proposal_id: &str) -> String {
    format!("proposal/{proposal_id}")
}

#[derive(Deserialize)]
struct RequestArgs {
    target_channel_id: ChannelId,
    #[serde(default)]
    description: String,
    spec: Vec<ConfigOp>,
    base: ChannelConfig,
    signature: ConfigSignature,
}

#[derive(Deserialize)]
struct VoteArgs {
    proposal_id: String,
    signature: ConfigSignature,
}

#[derive(Deserialize)]
struct ResultArgs {
    proposal_id: String,
    task: Task,
    outcome: TaskOutcome,
}

#[derive(Deserialize)]
struct ProposalIdArg {
    proposal_id: String,
}

#[derive(Deserialize)]
struct ChannelIdArg {
    channel_id: ChannelId,
}

/// The channel-operations contract.
pub struct ChannelOps;

type OpsResult<T> = Result<T, ChaincodeError>;

fn load(stub: &mut Stub<'_>, proposal_id: &str) -> OpsResult<ChannelProposal> {
    stub.get_json(&proposal_key(proposal_id))?
        .ok_or_else(|| ChannelOpsError::UnknownProposal(proposal_id.into()).into())
}

fn save(stub: &mut Stub<'_>, proposal: &ChannelProposal) -> OpsResult<()> {
    stub.put_json(&proposal_key(&proposal.proposal_id), proposal)
}

fn to_value<T: Serialize>(value: &T) -> OpsResult<Value> {
    serde_json::to_value(value).map_err(ChaincodeError::bad_args)
}

fn parse<T: serde::de::DeserializeOwned>(args: &Value) -> OpsResult<T> {
    serde_json::from_value(args.clone()).map_err(ChaincodeError::bad_args)
}

impl ChannelOps {
    fn request(stub: &mut Stub<'_>, a: RequestArgs) -> OpsResult<Value> {
        let proposer = stub.creator().clone();
        if a.base.channel_id != a.target_channel_id {
            return Err(ChannelOpsError::BaseMismatch(a.base.channel_id).into());
        }
        let info: ChannelInfo = stub
            .get_json(&channel_key(&a.target_channel_id))?
            .ok_or_else(|| ChannelOpsError::UnknownChannel(a.target_channel_id.clone()))?;
        if a.base.config_version < info.config_version {
            return Err(ChannelOpsError::StaleBase { base: a.base.config_version, known: info.config_version }.into());
        }
        let electorate = a.base.governing_orgs().clone();
        if !electorate.contains(&proposer) {
            return Err(ChannelOpsError::NotMember(proposer).into());
        }
        let compiled_update = configtx::compute_update(&a.base, &a.spec).map_err(ChannelOpsError::Compile)?;
        check_signature(&a.base, &compiled_update, &proposer, &a.signature)?;

        let proposal_id = next_proposal_id(stub, "chp");
        let mut proposal = ChannelProposal {
            proposal_id: proposal_id.clone(),
            proposer: proposer.clone(),
            target_channel_id: a.target_channel_id,
            description: a.description,
            spec: a.spec,
            base: a.base,
            compiled_update,
            status: ChannelProposalStatus::Proposed,
            votes: BTreeMap::from([(proposer, a.signature)]),
            electorate,
            attempt: 0,
            executor: None,
        };
        append_history(stub, &proposal_id, Task::Request, TaskOutcome::Success, None)?;
        Self::approve_if_majority(stub, &mut proposal)?;
        save(stub, &proposal)?;
        to_value(&proposal)
    }

    fn approve_if_majority(stub: &mut Stub<'_>, proposal: &mut ChannelProposal) -> OpsResult<()> {
        if proposal.votes.len() < majority(proposal.electorate.len()) {
            return Ok(());
        }
        proposal.status = ChannelProposalStatus::Approved;
        Self::dispatch(stub, proposal)
    }

    /// Select the executor for the current attempt and tell the agents.
    fn dispatch(stub: &mut Stub<'_>, proposal: &mut ChannelProposal) -> OpsResult<()> {
        let seed = read_seed(stub)?;
        let executor = select_executor(&proposal.voters(), seed, &proposal.proposal_id, proposal.attempt)
            .map_err(|e| ChaincodeError::invalid("executor", e.to_string()))?;
        proposal.executor = Some(executor.clone());
        OperationsEvent {
            event_kind: EventKind::UpdateChannel,
            proposal_id: proposal.proposal_id.clone(),
            executor: Some(executor),
            attempt: proposal.attempt,
        }
        .emit(stub);
        Ok(())
    }

    fn vote(stub: &mut Stub<'_>, a: VoteArgs) -> OpsResult<Value> {
        let voter = stub.creator().clone();
        let mut proposal = load(stub, &a.proposal_id)?;
        if !proposal.electorate.contains(&voter) {
            return Err(ChannelOpsError::NotInElectorate(voter).into());
        }
        if proposal.votes.contains_key(&voter) {
            return Err(ChannelOpsError::DoubleVote(voter).into());
        }
        if proposal.status != ChannelProposalStatus::Proposed {
            return Err(ChannelOpsError::WrongStatus(proposal.status).into());
        }
        check_signature(&proposal.base, &proposal.compiled_update, &voter, &a.signature)?;
        proposal.votes.insert(voter, a.signature);
        append_history(stub, &proposal.proposal_id, Task::Vote, TaskOutcome::Success, None)?;
        Self::approve_if_majority(stub, &mut proposal)?;
        save(stub, &proposal)?;
        to_value(&proposal)
    }

    fn register_result(stub: &mut Stub<'_>, a: ResultArgs) -> OpsResult<Value> {
        let reporter = stub.creator().clone();
        let mut proposal = load(stub, &a.proposal_id)?;
        if proposal.status != ChannelProposalStatus::Approved {
            return Err(ChannelOpsError::WrongStatus(proposal.status).into());
        }
        if a.task != Task::UpdateChannel {
            return Err(ChannelOpsError::WrongTask(a.task).into());
        }
        if proposal.executor.as_ref() != Some(&reporter) {
            return Err(ChannelOpsError::WrongExecutor(reporter).into());
        }
        append_history(stub, &proposal.proposal_id, Task::UpdateChannel, a.outcome.clone(), None)?;
        if a.outcome.is_success() {
            let next = configtx::apply_update(&proposal.base, &proposal.compiled_update).map_err(ChannelOpsError::Compile)?;
            stub.put_json(&channel_key(&proposal.target_channel_id), &ChannelInfo::from(&next))?;
            proposal.status = ChannelProposalStatus::Committed;
            OperationsEvent {
                event_kind: EventKind::ConfigUpdated,
                proposal_id: proposal.proposal_id.clone(),
                executor: None,
                attempt: proposal.attempt,
            }
            .emit(stub);
        } else {
            proposal.attempt += 1;
            if (proposal.attempt as usize) < proposal.votes.len() {
                Self::dispatch(stub, &mut proposal)?;
            } else {
                proposal.status = ChannelProposalStatus::Failed;
                proposal.executor = None;
            }
        }
        save(stub, &proposal)?;
        to_value(&proposal)
    }
}

fn check_signature(base: &ChannelConfig, update: &ConfigUpdate, org: &OrgId, sig: &ConfigSignature) -> OpsResult<()> {
    let ok = sig.org_id == *org && base.msp(org).is_some_and(|msp| configtx::verify_signature(msp, update, sig));
    if ok {
        Ok(())
    } else {
        Err(ChannelOpsError::BadSignature(org.clone()).into())
    }
}

impl Chaincode for ChannelOps {
    fn invoke(&self, stub: &mut Stub<'_>, operation: &str, args: &Value) -> Result<Value, ChaincodeError> {
        match operation {
            "request_proposal" => Self::request(stub, parse(args)?),
            "vote" => Self::vote(stub, parse(args)?),
            "register_result" => Self::register_result(stub, parse(args)?),
            "get_proposal" => {
                let a: ProposalIdArg = parse(args)?;
                to_value(&load(stub, &a.proposal_id)?)
            }
            "list_proposals" => {
                let proposals: Vec<Value> = stub
                    .range("proposal/")
                    .into_iter()
                    .map(|(_, v)| serde_json::from_str(&v).map_err(ChaincodeError::bad_args))
                    .collect::<Result<_, _>>()?;
                Ok(Value::Array(proposals))
            }
            "get_history" => {
                let a: ProposalIdArg = parse(args)?;
                load(stub, &a.proposal_id)?;
                let history: Vec<TaskRecord> = stub.get_json(&history_key(&a.proposal_id))?.unwrap_or_default();
                to_value(&history)
            }
            "get_channel_info" => {
                let a: ChannelIdArg = parse(args)?;
                let info: ChannelInfo = stub
                    .get_json(&channel_key(&a.channel_id))?
                    .ok_or(ChannelOpsError::UnknownChannel(a.channel_id))?;
                to_value(&info)
            }
            "list_channels" => {
                let channels: Vec<Value> = stub
                    .range("channel/")
                    .into_iter()
                    .map(|(_, v)| serde_json::from_str(&v).map_err(ChaincodeError::bad_args))
                    .collect::<Result<_, _>>()?;
                Ok(Value::Array(channels))
            }
            other => Err(ChaincodeError::invalid("unknown_operation", other)),
        }
    }
}
