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

//! A network together with its source repository and the organizations'
//! agents, driven as one deterministic unit.
//!
//! The administrator-facing methods submit one transaction each, then let
//! the agents react until the ops channel is quiescent, so a caller always
//! observes the settled outcome of its action.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use crate::agent::{self, Agent, AgentConfig, AgentError, CatchUp};
use crate::configtx::{self, ConfigOp, ConfigTxError};
use crate::identity::{ChannelId, OrgId};
use crate::opssc::chaincode::{ChaincodeInfo, ChaincodeProposal, Decision, SourceRef};
use crate::opssc::channel::{ChannelInfo, ChannelProposal};
use crate::opssc::{TaskRecord, CHAINCODE_OPS, CHANNEL_OPS};
use crate::repo::{RepoError, RepositoryStore};
use crate::simnet::{ChaincodeDefinition, EndorsementPolicy, GenesisError, GenesisSpec, NetError, Network, OPS_CHANNEL};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Genesis(#[from] GenesisError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Repo(#[from] RepoError),
    #[error(transparent)]
    Config(#[from] ConfigTxError),
    #[error("undecodable response: {0}")]
    Decode(String),
    #[error("no organization has joined the ops channel")]
    NoObserver,
}

#[derive(Clone, Debug)]
pub struct Simulation {
    spec: GenesisSpec,
    net: Network,
    repo: RepositoryStore,
    agents: BTreeMap<OrgId, Agent>,
}

fn decode<T: DeserializeOwned>(value: Value) -> Result<T, SimError> {
    serde_json::from_value(value).map_err(|e| SimError::Decode(e.to_string()))
}

fn ops() -> ChannelId {
    ChannelId::from(OPS_CHANNEL)
}

impl Simulation {
    /// A fresh network with no agents running.
    pub fn new(spec: &GenesisSpec) -> Result<Self, SimError> {
        Ok(Simulation {
            spec: spec.clone(),
            net: Network::create(spec)?,
            repo: RepositoryStore::for_genesis(spec),
            agents: BTreeMap::new(),
        })
    }

    /// A fresh network with an agent for every genesis organization.
    pub fn with_agents(spec: &GenesisSpec, config: &AgentConfig) -> Result<Self, SimError> {
        let mut sim = Self::new(spec)?;
        for org in spec.orgs.iter().map(|o| o.id.clone()) {
            sim.launch_agent(&org, config.clone())?;
        }
        Ok(sim)
    }

    pub fn spec(&self) -> &GenesisSpec {
        &self.spec
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Network {
        &mut self.net
    }

    pub fn repo(&self) -> &RepositoryStore {
        &self.repo
    }

    pub fn agents(&self) -> &BTreeMap<OrgId, Agent> {
        &self.agents
    }

    pub fn agent(&self, org: &OrgId) -> Option<&Agent> {
        self.agents.get(org)
    }

    /// Start `org`'s agent at the current ops-channel height and bootstrap it.
    pub fn launch_agent(&mut self, org: &OrgId, config: AgentConfig) -> Result<CatchUp, SimError> {
        self.net.org(org)?;
        let mut agent = Agent::new(org.clone(), self.net.height(&ops())?, config);
        let report = agent.bootstrap(&mut self.net, &self.repo)?;
        self.agents.insert(org.clone(), agent);
        self.pump();
        Ok(report)
    }

    /// Replace the failure rules and retry budget of a running agent.
    pub fn reconfigure_agent(&mut self, org: &OrgId, config: AgentConfig) -> Result<(), SimError> {
        let agent = self.agents.get(org).ok_or_else(|| NetError::UnknownOrg(org.clone()))?;
        let replaced = Agent::new(org.clone(), agent.cursor(), config);
        self.agents.insert(org.clone(), replaced);
        Ok(())
    }

    /// Let the agents process every pending ops-channel block.
    pub fn pump(&mut self) -> usize {
        agent::pump(&mut self.agents, &mut self.net, &self.repo)
    }

    /// Submit an OpsSC invocation as `org` and settle. Returns the
    /// contract's response.
    pub fn invoke_ops(&mut self, org: &OrgId, namespace: &str, operation: &str, args: Value) -> Result<Value, SimError> {
        let receipt = self.net.invoke(&ops(), org, namespace, operation, args)?;
        self.pump();
        Ok(receipt.response)
    }

    pub fn query_ops(&self, org: &OrgId, namespace: &str, operation: &str, args: Value) -> Result<Value, SimError> {
        Ok(self.net.query(&ops(), org, namespace, operation, args)?)
    }

    fn observer(&self) -> Result<OrgId, SimError> {
        self.net
            .orgs()
            .map(|o| &o.org_id)
            .find(|o| self.net.has_joined(o, &ops()))
            .cloned()
            .ok_or(SimError::NoObserver)
    }

    fn observe<T: DeserializeOwned>(&self, namespace: &str, operation: &str, args: Value) -> Result<T, SimError> {
        decode(self.query_ops(&self.observer()?, namespace, operation, args)?)
    }

    // ---- channel operations ----

    /// Compile `spec` against the channel's current config, sign it as
    /// `org` and open a proposal.
    pub fn propose_channel_update(
        &mut self,
        org: &OrgId,
        channel_id: &ChannelId,
        description: &str,
        spec: Vec<ConfigOp>,
    ) -> Result<ChannelProposal, SimError> {
        let base = self.net.fetch_config_block(channel_id)?;
        let update = configtx::compute_update(&base, &spec)?;
        let signature = configtx::sign_update(self.net.identity(org)?, &update);
        let args = json!({
            "target_channel_id": channel_id,
            "description": description,
            "spec": spec,
            "base": base,
            "signature": signature,
        });
        let created: ChannelProposal = decode(self.invoke_ops(org, CHANNEL_OPS, "request_proposal", args)?)?;
        self.channel_proposal(&created.proposal_id)
    }

    /// Sign the proposal's compiled update as `org` and cast it as a vote.
    pub fn vote_channel_update(&mut self, org: &OrgId, proposal_id: &str) -> Result<ChannelProposal, SimError> {
        let proposal = self.channel_proposal(proposal_id)?;
        let signature = configtx::sign_update(self.net.identity(org)?, &proposal.compiled_update);
        let args = json!({ "proposal_id": proposal_id, "signature": signature });
        self.invoke_ops(org, CHANNEL_OPS, "vote", args)?;
        self.channel_proposal(proposal_id)
    }

    pub fn channel_proposal(&self, proposal_id: &str) -> Result<ChannelProposal, SimError> {
        self.observe(CHANNEL_OPS, "get_proposal", json!({ "proposal_id": proposal_id }))
    }

    pub fn channel_proposals(&self) -> Result<Vec<ChannelProposal>, SimError> {
        self.observe(CHANNEL_OPS, "list_proposals", json!({}))
    }

    pub fn channels(&self) -> Result<Vec<ChannelInfo>, SimError> {
        self.observe(CHANNEL_OPS, "list_channels", json!({}))
    }

    // ---- chaincode operations ----

    /// Publish a chaincode release to the repository. Without explicit
    /// content the deterministic package for (name, version) is used.
    pub fn publish_release(&mut self, name: &str, version: &str, content: Option<Vec<u8>>) -> Result<SourceRef, SimError> {
        let (mut source, default_bytes) = crate::repo::release(name, version);
        let bytes = match content {
            Some(bytes) => {
                let digest = crate::codec::Digest::of_bytes(&bytes).to_hex();
                source.commit_id = digest[..16].into();
                bytes
            }
            None => default_bytes,
        };
        self.repo.publish(source.clone(), bytes)?;
        Ok(source)
    }

    /// The definition for the next sequence of `name` on `channel_id`.
    pub fn next_definition(&self, channel_id: &ChannelId, name: &str, version: &str, source_ref: SourceRef) -> Result<ChaincodeDefinition, SimError> {
        let current = self.chaincodes()?.into_iter().find(|c| c.channel_id == *channel_id && c.definition.name == name);
        Ok(ChaincodeDefinition {
            name: name.into(),
            version: version.into(),
            sequence: current.map_or(1, |c| c.definition.sequence + 1),
            endorsement_policy: EndorsementPolicy::MajorityOfMembers,
            source_ref,
        })
    }

    pub fn propose_chaincode(&mut self, org: &OrgId, channel_id: &ChannelId, definition: &ChaincodeDefinition) -> Result<ChaincodeProposal, SimError> {
        let args = json!({ "channel_id": channel_id, "definition": definition });
        let created: ChaincodeProposal = decode(self.invoke_ops(org, CHAINCODE_OPS, "request_proposal", args)?)?;
        self.chaincode_proposal(&created.proposal_id)
    }

    pub fn vote_chaincode(&mut self, org: &OrgId, proposal_id: &str, decision: Decision) -> Result<ChaincodeProposal, SimError> {
        let args = json!({ "proposal_id": proposal_id, "decision": decision });
        self.invoke_ops(org, CHAINCODE_OPS, "vote", args)?;
        self.chaincode_proposal(proposal_id)
    }

    pub fn chaincode_proposal(&self, proposal_id: &str) -> Result<ChaincodeProposal, SimError> {
        self.observe(CHAINCODE_OPS, "get_proposal", json!({ "proposal_id": proposal_id }))
    }

    pub fn chaincode_proposals(&self) -> Result<Vec<ChaincodeProposal>, SimError> {
        self.observe(CHAINCODE_OPS, "list_proposals", json!({}))
    }

    pub fn chaincodes(&self) -> Result<Vec<ChaincodeInfo>, SimError> {
        self.observe(CHAINCODE_OPS, "list_chaincodes", json!({}))
    }

    /// On-chain history of a channel or chaincode proposal.
    pub fn history(&self, proposal_id: &str) -> Result<Vec<TaskRecord>, SimError> {
        let namespace = if proposal_id.starts_with("ccp-") { CHAINCODE_OPS } else { CHANNEL_OPS };
        self.observe(namespace, "get_history", json!({ "proposal_id": proposal_id }))
    }
}
