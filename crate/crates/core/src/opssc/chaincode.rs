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

//! OpsSC for chaincode deployment.
//!
//! A proposal carries a full [`ChaincodeDefinition`] including a pointer to
//! the source in a repository. After a majority votes for it, every member
//! organization's agent downloads, installs and approves the package and
//! reports each step. When all members have succeeded the contract names one
//! for-voter to commit the definition.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::channel::ChannelInfo;
use super::{append_history, history_key, next_proposal_id, read_seed, EventKind, OperationsEvent, Task, TaskOutcome, TaskRecord, CHANNEL_OPS};
use crate::agent::select_executor;
use crate::identity::{majority, ChannelId, OrgId};
use crate::repo::{RepoError, RepositoryStore};
use crate::simnet::{Chaincode, ChaincodeDefinition, ChaincodeError, ErrorKind, Stub};

pub use crate::simnet::SourceRef;

/// Latest committed definition of a chaincode on a channel.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChaincodeInfo {
    pub channel_id: ChannelId,
    pub definition: ChaincodeDefinition,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChaincodeProposalStatus {
    Proposed,
    Approved,
    Acknowledged,
    Committed,
    Rejected,
    Failed,
}

impl ChaincodeProposalStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, Self::Committed | Self::Rejected | Self::Failed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    For,
    Against,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChaincodeProposal {
    pub proposal_id: String,
    pub proposer: OrgId,
    pub channel_id: ChannelId,
    pub definition: ChaincodeDefinition,
    pub status: ChaincodeProposalStatus,
    pub votes: BTreeMap<OrgId, Decision>,
    pub electorate: BTreeSet<OrgId>,
    /// Last reported outcome of each deploy task per organization.
    #[serde(default)]
    pub org_task_status: BTreeMap<OrgId, BTreeMap<Task, TaskOutcome>>,
    pub attempt: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub executor: Option<OrgId>,
}

impl ChaincodeProposal {
    pub fn voters_for(&self) -> BTreeSet<OrgId> {
        self.votes.iter().filter(|(_, d)| **d == Decision::For).map(|(o, _)| o.clone()).collect()
    }

    fn count(&self, decision: Decision) -> usize {
        self.votes.values().filter(|d| **d == decision).count()
    }

    fn task_succeeded(&self, org: &OrgId, task: Task) -> bool {
        self.org_task_status.get(org).and_then(|m| m.get(&task)).is_some_and(TaskOutcome::is_success)
    }

    /// True once every member reported success for every deploy task.
    pub fn all_deployed(&self) -> bool {
        self.electorate.iter().all(|org| Task::DEPLOY_TASKS.iter().all(|t| self.task_succeeded(org, *t)))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ChaincodeOpsError {
    #[error("unknown channel {0}")]
    UnknownChannel(ChannelId),
    #[error("unknown proposal {0}")]
    UnknownProposal(String),
    #[error("unknown chaincode {name} on {channel_id}")]
    UnknownChaincode { channel_id: ChannelId, name: String },
    #[error("{0} is not a member of the channel")]
    NotMember(OrgId),
    #[error("{0} is not in the proposal's electorate")]
    NotInElectorate(OrgId),
    #[error("{0} has already voted")]
    DoubleVote(OrgId),
    #[error("proposal is {0:?}")]
    WrongStatus(ChaincodeProposalStatus),
    #[error("{0} is not the selected executor")]
    WrongExecutor(OrgId),
    #[error("task {0:?} is not a deploy task")]
    WrongTask(Task),
    #[error("expected sequence {expected}, got {found}")]
    BadSequence { expected: u64, found: u64 },
}

impl From<ChaincodeOpsError> for ChaincodeError {
    fn from(e: ChaincodeOpsError) -> Self {
        use ChaincodeOpsError::*;
        let (kind, code) = match &e {
            UnknownChannel(_) => (ErrorKind::NotFound, "unknown_channel"),
            UnknownProposal(_) => (ErrorKind::NotFound, "unknown_proposal"),
            UnknownChaincode { .. } => (ErrorKind::NotFound, "unknown_chaincode"),
            NotMember(_) => (ErrorKind::Forbidden, "not_member"),
            NotInElectorate(_) => (ErrorKind::Forbidden, "not_in_electorate"),
            DoubleVote(_) => (ErrorKind::Conflict, "double_vote"),
            WrongStatus(_) => (ErrorKind::Conflict, "wrong_status"),
            WrongExecutor(_) => (ErrorKind::Forbidden, "wrong_executor"),
            WrongTask(_) => (ErrorKind::Invalid, "wrong_task"),
            BadSequence { .. } => (ErrorKind::Conflict, "bad_sequence"),
        };
        ChaincodeError::new(kind, code, e.to_string())
    }
}

pub(crate) fn inventory_key(channel_id: &ChannelId, name: &str) -> String {
    format!("chaincode/{channel_id}/{name}")
}

fn proposal_key(proposal_id: &str) -> String {
    format!("proposal/{proposal_id}")
}

/// Fetch the package bytes a definition points at.
pub fn resolve_source(repo: &RepositoryStore, source: &SourceRef) -> Result<Vec<u8>, RepoError> {
    repo.resolve(source)
}

#[derive(Deserialize)]
struct RequestArgs {
    channel_id: ChannelId,
    definition: ChaincodeDefinition,
}

#[derive(Deserialize)]
struct VoteArgs {
    proposal_id: String,
    decision: Decision,
}

#[derive(Deserialize)]
struct DeployResultArgs {
    proposal_id: String,
    task: Task,
    outcome: TaskOutcome,
    /// The agent will retry the task and report again.
    #[serde(default)]
    retrying: bool,
}

#[derive(Deserialize)]
struct CommitResultArgs {
    proposal_id: String,
    outcome: TaskOutcome,
}

#[derive(Deserialize)]
struct ProposalIdArg {
    proposal_id: String,
}

#[derive(Deserialize)]
struct ChaincodeArg {
    channel_id: ChannelId,
    name: String,
}

/// The chaincode-operations contract.
pub struct ChaincodeOps;

type OpsResult<T> = Result<T, ChaincodeError>;

fn load(stub: &mut Stub<'_>, proposal_id: &str) -> OpsResult<ChaincodeProposal> {
    stub.get_json(&proposal_key(proposal_id))?
        .ok_or_else(|| ChaincodeOpsError::UnknownProposal(proposal_id.into()).into())
}

fn save(stub: &mut Stub<'_>, proposal: &ChaincodeProposal) -> OpsResult<()> {
    stub.put_json(&proposal_key(&proposal.proposal_id), proposal)
}

fn to_value<T: Serialize>(value: &T) -> OpsResult<Value> {
    serde_json::to_value(value).map_err(ChaincodeError::bad_args)
}

fn parse<T: serde::de::DeserializeOwned>(args: &Value) -> OpsResult<T> {
    serde_json::from_value(args.clone()).map_err(ChaincodeError::bad_args)
}

fn list(stub: &mut Stub<'_>, prefix: &str) -> OpsResult<Value> {
    let items: Vec<Value> = stub
        .range(prefix)
        .into_iter()
        .map(|(_, v)| serde_json::from_str(&v).map_err(ChaincodeError::bad_args))
        .collect::<Result<_, _>>()?;
    Ok(Value::Array(items))
}

impl ChaincodeOps {
    fn request(stub: &mut Stub<'_>, a: RequestArgs) -> OpsResult<Value> {
        let proposer = stub.creator().clone();
        let info: ChannelInfo = stub
            .get_json_from(CHANNEL_OPS, &super::channel::channel_key(&a.channel_id))?
            .ok_or_else(|| ChaincodeOpsError::UnknownChannel(a.channel_id.clone()))?;
        if !info.member_orgs.contains(&proposer) {
            return Err(ChaincodeOpsError::NotMember(proposer).into());
        }
        let current: Option<ChaincodeInfo> = stub.get_json(&inventory_key(&a.channel_id, &a.definition.name))?;
        let expected = current.map_or(1, |c| c.definition.sequence + 1);
        if a.definition.sequence != expected {
            return Err(ChaincodeOpsError::BadSequence { expected, found: a.definition.sequence }.into());
        }
        let proposal_id = next_proposal_id(stub, "ccp");
        let mut proposal = ChaincodeProposal {
            proposal_id: proposal_id.clone(),
            proposer: proposer.clone(),
            channel_id: a.channel_id,
            definition: a.definition,
            status: ChaincodeProposalStatus::Proposed,
            votes: BTreeMap::from([(proposer, Decision::For)]),
            electorate: info.member_orgs,
            org_task_status: BTreeMap::new(),
            attempt: 0,
            executor: None,
        };
        append_history(stub, &proposal_id, Task::Request, TaskOutcome::Success, None)?;
        Self::tally(stub, &mut proposal);
        save(stub, &proposal)?;
        to_value(&proposal)
    }

    fn tally(stub: &mut Stub<'_>, proposal: &mut ChaincodeProposal) {
        let need = majority(proposal.electorate.len());
        if proposal.count(Decision::For) >= need {
            proposal.status = ChaincodeProposalStatus::Approved;
            OperationsEvent {
                event_kind: EventKind::Deploy,
                proposal_id: proposal.proposal_id.clone(),
                executor: None,
                attempt: 0,
            }
            .emit(stub);
        } else if proposal.count(Decision::Against) >= need {
            proposal.status = ChaincodeProposalStatus::Rejected;
        }
    }

    fn vote(stub: &mut Stub<'_>, a: VoteArgs) -> OpsResult<Value> {
        let voter = stub.creator().clone();
        let mut proposal = load(stub, &a.proposal_id)?;
        if !proposal.electorate.contains(&voter) {
            return Err(ChaincodeOpsError::NotInElectorate(voter).into());
        }
        if proposal.votes.contains_key(&voter) {
            return Err(ChaincodeOpsError::DoubleVote(voter).into());
        }
        if proposal.status != ChaincodeProposalStatus::Proposed {
            return Err(ChaincodeOpsError::WrongStatus(proposal.status).into());
        }
        proposal.votes.insert(voter, a.decision);
        let note = match a.decision {
            Decision::For => "for",
            Decision::Against => "against",
        };
        append_history(stub, &proposal.proposal_id, Task::Vote, TaskOutcome::Success, Some(note.into()))?;
        Self::tally(stub, &mut proposal);
        save(stub, &proposal)?;
        to_value(&proposal)
    }

    fn register_deploy_result(stub: &mut Stub<'_>, a: DeployResultArgs) -> OpsResult<Value> {
        let reporter = stub.creator().clone();
        if !Task::DEPLOY_TASKS.contains(&a.task) {
            return Err(ChaincodeOpsError::WrongTask(a.task).into());
        }
        let mut proposal = load(stub, &a.proposal_id)?;
        if !proposal.electorate.contains(&reporter) {
            return Err(ChaincodeOpsError::NotInElectorate(reporter).into());
        }
        // A repeated success report changes nothing.
        if a.outcome.is_success() && proposal.task_succeeded(&reporter, a.task) {
            return to_value(&proposal);
        }
        if proposal.status != ChaincodeProposalStatus::Approved {
            return Err(ChaincodeOpsError::WrongStatus(proposal.status).into());
        }
        let note = (a.retrying && !a.outcome.is_success()).then(|| "retrying".to_string());
        append_history(stub, &proposal.proposal_id, a.task, a.outcome.clone(), note)?;
        let failed = !a.outcome.is_success();
        proposal.org_task_status.entry(reporter).or_default().insert(a.task, a.outcome);
        if failed && !a.retrying {
            proposal.status = ChaincodeProposalStatus::Failed;
        } else if proposal.all_deployed() {
            proposal.status = ChaincodeProposalStatus::Acknowledged;
            Self::dispatch_commit(stub, &mut proposal)?;
        }
        save(stub, &proposal)?;
        to_value(&proposal)
    }

    fn dispatch_commit(stub: &mut Stub<'_>, proposal: &mut ChaincodeProposal) -> OpsResult<()> {
        let seed = read_seed(stub)?;
        let executor = select_executor(&proposal.voters_for(), seed, &proposal.proposal_id, proposal.attempt)
            .map_err(|e| ChaincodeError::invalid("executor", e.to_string()))?;
        proposal.executor = Some(executor.clone());
        OperationsEvent {
            event_kind: EventKind::Commit,
            proposal_id: proposal.proposal_id.clone(),
            executor: Some(executor),
            attempt: proposal.attempt,
        }
        .emit(stub);
        Ok(())
    }

    fn register_commit_result(stub: &mut Stub<'_>, a: CommitResultArgs) -> OpsResult<Value> {
        let reporter = stub.creator().clone();
        let mut proposal = load(stub, &a.proposal_id)?;
        if proposal.status != ChaincodeProposalStatus::Acknowledged {
            return Err(ChaincodeOpsError::WrongStatus(proposal.status).into());
        }
        if proposal.executor.as_ref() != Some(&reporter) {
            return Err(ChaincodeOpsError::WrongExecutor(reporter).into());
        }
        append_history(stub, &proposal.proposal_id, Task::Commit, a.outcome.clone(), None)?;
        if a.outcome.is_success() {
            let info = ChaincodeInfo { channel_id: proposal.channel_id.clone(), definition: proposal.definition.clone() };
            stub.put_json(&inventory_key(&info.channel_id, &info.definition.name), &info)?;
            proposal.status = ChaincodeProposalStatus::Committed;
        } else {
            proposal.attempt += 1;
            if (proposal.attempt as usize) < proposal.voters_for().len() {
                Self::dispatch_commit(stub, &mut proposal)?;
            } else {
                proposal.status = ChaincodeProposalStatus::Failed;
                proposal.executor = None;
            }
        }
        save(stub, &proposal)?;
        to_value(&proposal)
    }
}

impl Chaincode for ChaincodeOps {
    fn invoke(&self, stub: &mut Stub<'_>, operation: &str, args: &Value) -> Result<Value, ChaincodeError> {
        match operation {
            "request_proposal" => Self::request(stub, parse(args)?),
            "vote" => Self::vote(stub, parse(args)?),
            "register_deploy_result" => Self::register_deploy_result(stub, parse(args)?),
            "register_commit_result" => Self::register_commit_result(stub, parse(args)?),
            "get_proposal" => {
                let a: ProposalIdArg = parse(args)?;
                to_value(&load(stub, &a.proposal_id)?)
            }
            "list_proposals" => list(stub, "proposal/"),
            "get_history" => {
                let a: ProposalIdArg = parse(args)?;
                load(stub, &a.proposal_id)?;
                let history: Vec<TaskRecord> = stub.get_json(&history_key(&a.proposal_id))?.unwrap_or_default();
                to_value(&history)
            }
            "list_chaincodes" => list(stub, "chaincode/"),
            "get_chaincode" => {
                let a: ChaincodeArg = parse(args)?;
                let info: ChaincodeInfo = stub
                    .get_json(&inventory_key(&a.channel_id, &a.name))?
                    .ok_or(ChaincodeOpsError::UnknownChaincode { channel_id: a.channel_id, name: a.name })?;
                to_value(&info)
            }
            other => Err(ChaincodeError::invalid("unknown_operation", other)),
        }
    }
}
