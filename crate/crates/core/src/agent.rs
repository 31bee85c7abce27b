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

//! Per-organization operations agent.
//!
//! An agent follows the ops channel block by block, starting at the height
//! at which it was launched, and reacts to [`OperationsEvent`]s. It only
//! ever operates its own organization's peers and reports every task
//! outcome back to the OpsSC contracts.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::codec::Digest;
use crate::configtx::{self, ConfigTxError};
use crate::identity::{ChannelId, OrgId};
use crate::opssc::chaincode::{ChaincodeInfo, ChaincodeProposal};
use crate::opssc::channel::{ChannelInfo, ChannelProposal};
use crate::opssc::{
    EventKind, OperationsEvent, Task, TaskOutcome, AGENT_RETRY_BUDGET, CHAINCODE_OPS, CHANNEL_OPS, OPSSC_CHAINCODES,
};
use crate::repo::{RepoError, RepositoryStore};
use crate::simnet::{ChaincodeDefinition, NetError, Network, OPS_CHANNEL};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ExecutorError {
    #[error("no voters to select from")]
    NoVoters,
    #[error("attempt {attempt} exhausts {voters} voters")]
    Exhausted { attempt: u32, voters: usize },
}

/// The organization that executes attempt `attempt` of a proposal.
///
/// The voters are shuffled with a ChaCha20 stream seeded from the network
/// seed and the proposal id, so successive attempts walk a fixed
/// permutation and never pick the same organization twice.
pub fn select_executor(voters: &BTreeSet<OrgId>, seed: u64, proposal_id: &str, attempt: u32) -> Result<OrgId, ExecutorError> {
    if voters.is_empty() {
        return Err(ExecutorError::NoVoters);
    }
    if attempt as usize >= voters.len() {
        return Err(ExecutorError::Exhausted { attempt, voters: voters.len() });
    }
    let mut order: Vec<&OrgId> = voters.iter().collect();
    let key = Digest::of_parts(&[b"executor", &seed.to_be_bytes(), proposal_id.as_bytes()]);
    order.shuffle(&mut ChaCha20Rng::from_seed(key.0));
    Ok(order[attempt as usize].clone())
}

/// Injected failure: `task` fails for `org` on `attempt`. A missing org or
/// attempt matches any.
///
/// For update_channel and commit the attempt is the proposal's executor
/// attempt; for deploy tasks it is the agent's local try, starting at 0.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRule {
    pub task: Task,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub org: Option<OrgId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attempt: Option<u32>,
}

impl FailureRule {
    pub fn matches(&self, task: Task, org: &OrgId, attempt: u32) -> bool {
        self.task == task && self.org.as_ref().is_none_or(|o| o == org) && self.attempt.is_none_or(|a| a == attempt)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("bad failure rule {0:?}, expected task@org@attempt with * as wildcard")]
pub struct FailureRuleParseError(pub String);

impl FromStr for FailureRule {
    type Err = FailureRuleParseError;

    /// Parses `task@org@attempt`; trailing parts may be omitted.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || FailureRuleParseError(s.into());
        let mut parts = s.split('@');
        let task = parts.next().and_then(Task::parse).ok_or_else(bad)?;
        let org = match parts.next() {
            None | Some("*") => None,
            Some("") => return Err(bad()),
            Some(o) => Some(OrgId::from(o)),
        };
        let attempt = match parts.next() {
            None | Some("*") => None,
            Some(a) => Some(a.parse().map_err(|_| bad())?),
        };
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(FailureRule { task, org, attempt })
    }
}

impl fmt::Display for FailureRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let org = self.org.as_ref().map_or("*", |o| o.as_str());
        match self.attempt {
            Some(a) => write!(f, "{}@{}@{}", self.task.as_str(), org, a),
            None => write!(f, "{}@{}@*", self.task.as_str(), org),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub retry_budget: u32,
    #[serde(default)]
    pub failure_rules: Vec<FailureRule>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig { retry_budget: AGENT_RETRY_BUDGET, failure_rules: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum AgentError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Repo(#[from] RepoError),
    #[error(transparent)]
    Config(#[from] ConfigTxError),
    #[error("undecodable ops-channel response: {0}")]
    Decode(String),
}

/// What an agent did, kept for inspection.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentLogEntry {
    /// Ops-channel block that carried the triggering event.
    pub block_number: u64,
    pub proposal_id: String,
    pub task: Task,
    pub attempt: u32,
    pub outcome: TaskOutcome,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatchUp {
    pub joined: Vec<ChannelId>,
    pub installed: Vec<String>,
    pub approved: Vec<(ChannelId, String)>,
}

impl CatchUp {
    pub fn is_empty(&self) -> bool {
        self.joined.is_empty() && self.installed.is_empty() && self.approved.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct Agent {
    org_id: OrgId,
    cursor: u64,
    config: AgentConfig,
    log: Vec<AgentLogEntry>,
    errors: Vec<String>,
}

fn decode<T: serde::de::DeserializeOwned>(value: Value) -> Result<T, AgentError> {
    serde_json::from_value(value).map_err(|e| AgentError::Decode(e.to_string()))
}

impl Agent {
    /// An agent that will see ops-channel events from `start_height` on.
    pub fn new(org_id: OrgId, start_height: u64, config: AgentConfig) -> Self {
        Agent { org_id, cursor: start_height, config, log: Vec::new(), errors: Vec::new() }
    }

    pub fn org_id(&self) -> &OrgId {
        &self.org_id
    }

    /// Next ops-channel block the agent will process.
    pub fn cursor(&self) -> u64 {
        self.cursor
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn log(&self) -> &[AgentLogEntry] {
        &self.log
    }

    /// Ops-channel interactions that failed outright, such as a result
    /// registration rejected by the contract.
    pub fn errors(&self) -> &[String] {
        &self.errors
    }

    fn injected(&self, task: Task, attempt: u32) -> bool {
        self.config.failure_rules.iter().any(|r| r.matches(task, &self.org_id, attempt))
    }

    fn ops_channel() -> ChannelId {
        ChannelId::from(OPS_CHANNEL)
    }

    fn query(&self, net: &Network, namespace: &str, op: &str, args: Value) -> Result<Value, AgentError> {
        Ok(net.query(&Self::ops_channel(), &self.org_id, namespace, op, args)?)
    }

    /// Join the ops channel, deploy the OpsSC contracts on the org's own
    /// peers, then catch up with every managed channel. Idempotent.
    pub fn bootstrap(&mut self, net: &mut Network, repo: &RepositoryStore) -> Result<CatchUp, AgentError> {
        let ops = Self::ops_channel();
        let mut report = CatchUp::default();
        if !net.has_joined(&self.org_id, &ops) {
            net.join_peer(&self.org_id, &ops)?;
            report.joined.push(ops.clone());
        }
        for (name, _) in OPSSC_CHAINCODES {
            if let Some(def) = net.committed_definition(&ops, name)? {
                self.deploy_local(net, repo, &ops, &def, &mut report)?;
            }
        }
        let rest = self.catch_up(net, repo)?;
        report.joined.extend(rest.joined);
        report.installed.extend(rest.installed);
        report.approved.extend(rest.approved);
        Ok(report)
    }

    /// Join managed channels that list this org and install and approve the
    /// latest committed chaincodes on them.
    pub fn catch_up(&mut self, net: &mut Network, repo: &RepositoryStore) -> Result<CatchUp, AgentError> {
        let mut report = CatchUp::default();
        let channels: Vec<ChannelInfo> = decode(self.query(net, CHANNEL_OPS, "list_channels", json!({}))?)?;
        for info in &channels {
            if info.member_orgs.contains(&self.org_id) && !net.has_joined(&self.org_id, &info.channel_id) {
                net.join_peer(&self.org_id, &info.channel_id)?;
                report.joined.push(info.channel_id.clone());
            }
        }
        let chaincodes: Vec<ChaincodeInfo> = decode(self.query(net, CHAINCODE_OPS, "list_chaincodes", json!({}))?)?;
        for cc in &chaincodes {
            if net.has_joined(&self.org_id, &cc.channel_id) {
                self.deploy_local(net, repo, &cc.channel_id, &cc.definition, &mut report)?;
            }
        }
        Ok(report)
    }

    fn deploy_local(
        &self,
        net: &mut Network,
        repo: &RepositoryStore,
        channel_id: &ChannelId,
        def: &ChaincodeDefinition,
        report: &mut CatchUp,
    ) -> Result<(), AgentError> {
        let bytes = repo.resolve(&def.source_ref)?;
        if !net.installed_packages(&self.org_id).contains(&Digest::of_bytes(&bytes)) {
            net.install_package(&self.org_id, &bytes)?;
            report.installed.push(def.name.clone());
        }
        let state = net.lifecycle_state(channel_id, &def.name)?;
        if state.approvals.get(&self.org_id) != Some(def) {
            net.approve_definition(&self.org_id, channel_id, def)?;
            report.approved.push((channel_id.clone(), def.name.clone()));
        }
        Ok(())
    }

    /// True when ops-channel blocks remain unprocessed.
    pub fn pending(&self, net: &Network) -> bool {
        net.height(&Self::ops_channel()).is_ok_and(|h| self.cursor < h)
    }

    /// Process the events of the next ops-channel block, if there is one.
    pub fn step(&mut self, net: &mut Network, repo: &RepositoryStore) -> bool {
        let ops = Self::ops_channel();
        let Ok(height) = net.height(&ops) else {
            return false;
        };
        if self.cursor >= height {
            return false;
        }
        let block_number = self.cursor;
        self.cursor += 1;
        let events: Vec<OperationsEvent> = net.blocks(&ops).expect("height checked")[block_number as usize]
            .events
            .iter()
            .filter(|e| e.namespace == CHANNEL_OPS || e.namespace == CHAINCODE_OPS)
            .filter_map(|e| OperationsEvent::from_payload(&e.payload))
            .collect();
        for event in events {
            if let Err(e) = self.handle_event(net, repo, block_number, &event) {
                self.errors.push(format!("block {block_number} {}: {e}", event.proposal_id));
            }
        }
        true
    }

    pub fn handle_event(
        &mut self,
        net: &mut Network,
        repo: &RepositoryStore,
        block_number: u64,
        event: &OperationsEvent,
    ) -> Result<(), AgentError> {
        let addressed = event.executor.as_ref() == Some(&self.org_id);
        match event.event_kind {
            EventKind::UpdateChannel if addressed => self.update_channel(net, block_number, event),
            EventKind::Commit if addressed => self.commit(net, block_number, event),
            EventKind::Deploy => self.deploy(net, repo, block_number, event),
            EventKind::ConfigUpdated => self.catch_up(net, repo).map(|_| ()),
            EventKind::UpdateChannel | EventKind::Commit => Ok(()),
        }
    }

    fn record(&mut self, block_number: u64, proposal_id: &str, task: Task, attempt: u32, outcome: &TaskOutcome) {
        self.log.push(AgentLogEntry {
            block_number,
            proposal_id: proposal_id.into(),
            task,
            attempt,
            outcome: outcome.clone(),
        });
    }

    fn update_channel(&mut self, net: &mut Network, block_number: u64, event: &OperationsEvent) -> Result<(), AgentError> {
        let args = json!({ "proposal_id": event.proposal_id });
        let proposal: ChannelProposal = decode(self.query(net, CHANNEL_OPS, "get_proposal", args)?)?;
        let outcome = if self.injected(Task::UpdateChannel, event.attempt) {
            TaskOutcome::failure("injected failure")
        } else {
            let sigs = proposal.votes.values().cloned();
            match configtx::assemble_envelope(proposal.compiled_update.clone(), sigs, &proposal.base.msps) {
                Ok(envelope) => match net.apply_config_envelope(&proposal.target_channel_id, envelope) {
                    Ok(_) => TaskOutcome::Success,
                    Err(e) => TaskOutcome::failure(e.to_string()),
                },
                Err(e) => TaskOutcome::failure(e.to_string()),
            }
        };
        self.record(block_number, &event.proposal_id, Task::UpdateChannel, event.attempt, &outcome);
        let args = json!({ "proposal_id": event.proposal_id, "task": Task::UpdateChannel, "outcome": outcome });
        net.invoke(&Self::ops_channel(), &self.org_id, CHANNEL_OPS, "register_result", args)?;
        Ok(())
    }

    fn deploy(&mut self, net: &mut Network, repo: &RepositoryStore, block_number: u64, event: &OperationsEvent) -> Result<(), AgentError> {
        let args = json!({ "proposal_id": event.proposal_id });
        let proposal: ChaincodeProposal = decode(self.query(net, CHAINCODE_OPS, "get_proposal", args)?)?;
        if !proposal.electorate.contains(&self.org_id) {
            return Ok(());
        }
        let def = &proposal.definition;
        let mut package: Option<Vec<u8>> = None;
        for task in Task::DEPLOY_TASKS {
            let mut attempt = 0;
            loop {
                let result = if self.injected(task, attempt) {
                    Err("injected failure".to_string())
                } else {
                    match task {
                        Task::Download => repo.resolve(&def.source_ref).map(|b| package = Some(b)).map_err(|e| e.to_string()),
                        Task::Install => match &package {
                            Some(bytes) => net.install_package(&self.org_id, bytes).map(|_| ()).map_err(|e| e.to_string()),
                            None => Err("nothing downloaded".into()),
                        },
                        _ => net.approve_definition(&self.org_id, &proposal.channel_id, def).map(|_| ()).map_err(|e| e.to_string()),
                    }
                };
                let outcome = result.map_or_else(TaskOutcome::failure, |_| TaskOutcome::Success);
                let retrying = !outcome.is_success() && attempt < self.config.retry_budget;
                self.record(block_number, &event.proposal_id, task, attempt, &outcome);
                let args = json!({
                    "proposal_id": event.proposal_id,
                    "task": task,
                    "outcome": outcome,
                    "retrying": retrying,
                });
                net.invoke(&Self::ops_channel(), &self.org_id, CHAINCODE_OPS, "register_deploy_result", args)?;
                if outcome.is_success() {
                    break;
                }
                if !retrying {
                    return Ok(());
                }
                attempt += 1;
            }
        }
        Ok(())
    }

    fn commit(&mut self, net: &mut Network, block_number: u64, event: &OperationsEvent) -> Result<(), AgentError> {
        let args = json!({ "proposal_id": event.proposal_id });
        let proposal: ChaincodeProposal = decode(self.query(net, CHAINCODE_OPS, "get_proposal", args)?)?;
        let outcome = if self.injected(Task::Commit, event.attempt) {
            TaskOutcome::failure("injected failure")
        } else {
            match net.commit_definition(&self.org_id, &proposal.channel_id, &proposal.definition) {
                Ok(_) => TaskOutcome::Success,
                Err(e) => TaskOutcome::failure(e.to_string()),
            }
        };
        self.record(block_number, &event.proposal_id, Task::Commit, event.attempt, &outcome);
        let args = json!({ "proposal_id": event.proposal_id, "outcome": outcome });
        net.invoke(&Self::ops_channel(), &self.org_id, CHAINCODE_OPS, "register_commit_result", args)?;
        Ok(())
    }
}

/// Advance every agent block by block until none has work left. Agents at
/// the lowest cursor go first, in org order, so runs are deterministic.
/// Returns the number of agent steps taken.
pub fn pump(agents: &mut BTreeMap<OrgId, Agent>, net: &mut Network, repo: &RepositoryStore) -> usize {
    let mut steps = 0;
    loop {
        let Some(low) = agents.values().filter(|a| a.pending(net)).map(|a| a.cursor).min() else {
            return steps;
        };
        for agent in agents.values_mut().filter(|a| a.cursor == low) {
            if agent.step(net, repo) {
                steps += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn voters(n: usize) -> BTreeSet<OrgId> {
        (1..=n).map(|i| OrgId::from(format!("Org{i}"))).collect()
    }

    #[test]
    fn single_voter_then_exhausted() {
        let v = voters(1);
        assert_eq!(select_executor(&v, 7, "p", 0).unwrap(), OrgId::from("Org1"));
        assert_eq!(select_executor(&v, 7, "p", 1), Err(ExecutorError::Exhausted { attempt: 1, voters: 1 }));
        assert_eq!(select_executor(&BTreeSet::new(), 7, "p", 0), Err(ExecutorError::NoVoters));
    }

    #[test]
    fn attempts_walk_a_permutation() {
        for n in 1..=6 {
            let v = voters(n);
            let picked: BTreeSet<OrgId> = (0..n as u32).map(|a| select_executor(&v, 42, "chp-0001", a).unwrap()).collect();
            assert_eq!(picked, v);
        }
    }

    #[test]
    fn selection_is_deterministic_and_seed_sensitive() {
        let v = voters(8);
        let a = select_executor(&v, 1, "x", 0).unwrap();
        assert_eq!(a, select_executor(&v, 1, "x", 0).unwrap());
        let firsts: BTreeSet<OrgId> = (0..32).map(|s| select_executor(&v, s, "x", 0).unwrap()).collect();
        assert!(firsts.len() > 1);
    }

    #[test]
    fn failure_rules_parse_and_match() {
        let r: FailureRule = "commit@*@0".parse().unwrap();
        assert_eq!(r, FailureRule { task: Task::Commit, org: None, attempt: Some(0) });
        assert!(r.matches(Task::Commit, &OrgId::from("Org3"), 0));
        assert!(!r.matches(Task::Commit, &OrgId::from("Org3"), 1));
        assert!(!r.matches(Task::Install, &OrgId::from("Org3"), 0));

        let r: FailureRule = "install@Org2".parse().unwrap();
        assert!(r.matches(Task::Install, &OrgId::from("Org2"), 5));
        assert_eq!(r.to_string(), "install@Org2@*");

        for bad in ["", "launch@Org1@0", "commit@Org1@x", "commit@@0", "commit@a@1@2"] {
            assert!(bad.parse::<FailureRule>().is_err(), "{bad}");
        }
    }
}
