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

//! End-to-end runs of the two operational scenarios.
//!
//! Conventional mode drives the network primitives directly, the way a set
//! of per-organization scripts would. OpsSC mode acts only through
//! proposals and votes and leaves node work to the agents. Both count
//! every administrator action against its step id.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::agent::{AgentConfig, FailureRule};
use crate::codec::Digest;
use crate::configtx::{self, add_org_ops};
use crate::costmodel::{measured_compare, ActionLog, Comparison, CostParams, Method, Scenario};
use crate::identity::{majority, ChannelId, OrgId};
use crate::opssc::chaincode::{ChaincodeProposalStatus, Decision};
use crate::opssc::channel::ChannelProposalStatus;
use crate::sim::Simulation;
use crate::simnet::{ChaincodeDefinition, ChannelKind, GenesisSpec, OPS_CHANNEL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Conventional,
    Opssc,
}

impl Mode {
    pub fn method(self) -> Method {
        match self {
            Mode::Conventional => Method::Conventional,
            Mode::Opssc => Method::Proposed,
        }
    }
}

impl core::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "conventional" => Ok(Mode::Conventional),
            "opssc" => Ok(Mode::Opssc),
            _ => Err(format!("unknown mode {s:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub mode: Mode,
    pub params: CostParams,
    pub seed: u64,
    #[serde(default)]
    pub failures: Vec<FailureRule>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("step {step} failed: {detail}")]
pub struct ScenarioError {
    pub step: String,
    pub detail: String,
}

fn fail(step: &str, detail: impl ToString) -> ScenarioError {
    ScenarioError { step: step.into(), detail: detail.to_string() }
}

trait At<T> {
    fn at(self, step: &str) -> Result<T, ScenarioError>;
}

impl<T, E: ToString> At<T> for Result<T, E> {
    fn at(self, step: &str) -> Result<T, ScenarioError> {
        self.map_err(|e| fail(step, e))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: Scenario,
    pub mode: Mode,
    pub params: CostParams,
    pub seed: u64,
    pub failures: Vec<String>,
    pub actions: ActionLog,
    pub actions_total: u64,
    pub actions_per_org: BTreeMap<OrgId, u64>,
    pub proposal_ids: Vec<String>,
    pub heights: BTreeMap<ChannelId, u64>,
    pub total_blocks: u64,
    pub state_digest: Digest,
    pub node_digest: Digest,
    /// Digests of the system and application channels, comparable across
    /// modes.
    pub slice_digests: BTreeMap<ChannelId, Digest>,
    pub comparison: Comparison,
    pub agent_errors: Vec<String>,
}

pub struct ScenarioRun {
    pub report: ScenarioReport,
    pub sim: Simulation,
}

/// Genesis specification a scenario starts from.
pub fn genesis_for(config: &ScenarioConfig) -> Result<GenesisSpec, ScenarioError> {
    let p = &config.params;
    let spec = match config.scenario {
        Scenario::AddOrg => GenesisSpec::standard(p.n as usize, p.ch as usize, if p.ch == 0 { 0 } else { p.cc as usize }, config.seed),
        Scenario::DeployCc => GenesisSpec::standard(p.n as usize, p.ch.max(1) as usize, 0, config.seed),
    };
    spec.at("genesis")
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioReport, ScenarioError> {
    run_scenario_with_state(config).map(|r| r.report)
}

/// Run a scenario and keep the final simulation for inspection.
pub fn run_scenario_with_state(config: &ScenarioConfig) -> Result<ScenarioRun, ScenarioError> {
    let spec = genesis_for(config)?;
    let agent_config = AgentConfig { failure_rules: config.failures.clone(), ..AgentConfig::default() };
    let mut sim = match config.mode {
        Mode::Conventional => Simulation::new(&spec),
        Mode::Opssc => Simulation::with_agents(&spec, &agent_config),
    }
    .at("genesis")?;
    let mut run = Runner { sim: &mut sim, actions: ActionLog::default(), proposal_ids: Vec::new(), agent_config };
    match (config.scenario, config.mode) {
        (Scenario::AddOrg, Mode::Conventional) => run.add_org_conventional(&config.params)?,
        (Scenario::AddOrg, Mode::Opssc) => run.add_org_opssc(&config.params)?,
        (Scenario::DeployCc, Mode::Conventional) => run.deploy_conventional(&config.params)?,
        (Scenario::DeployCc, Mode::Opssc) => run.deploy_opssc(&config.params)?,
    }
    let Runner { actions, proposal_ids, .. } = run;
    let report = report(config, &sim, actions, proposal_ids)?;
    Ok(ScenarioRun { report, sim })
}

fn report(config: &ScenarioConfig, sim: &Simulation, actions: ActionLog, proposal_ids: Vec<String>) -> Result<ScenarioReport, ScenarioError> {
    let net = sim.network();
    let mut heights = BTreeMap::new();
    let mut slice_digests = BTreeMap::new();
    for channel in net.channel_ids() {
        heights.insert(channel.clone(), net.height(channel).at("report")?);
        if channel.as_str() != OPS_CHANNEL {
            slice_digests.insert(channel.clone(), net.channel_slice_digest(channel).at("report")?);
        }
    }
    let comparison =
        measured_compare(&actions, true, config.scenario, config.mode.method(), &config.params).at("report")?;
    let agent_errors = sim
        .agents()
        .values()
        .flat_map(|a| a.errors().iter().map(move |e| format!("{}: {e}", a.org_id())))
        .collect();
    Ok(ScenarioReport {
        scenario: config.scenario,
        mode: config.mode,
        params: config.params,
        seed: config.seed,
        failures: config.failures.iter().map(|f| f.to_string()).collect(),
        actions_total: actions.total(),
        actions_per_org: actions.per_org(),
        actions,
        proposal_ids,
        total_blocks: heights.values().sum(),
        heights,
        state_digest: net.state_digest(),
        node_digest: net.node_digest(),
        slice_digests,
        comparison,
        agent_errors,
    })
}

fn org(i: u64) -> OrgId {
    OrgId::from(format!("Org{i}"))
}

struct Runner<'a> {
    sim: &'a mut Simulation,
    actions: ActionLog,
    proposal_ids: Vec<String>,
    agent_config: AgentConfig,
}

impl Runner<'_> {
    fn act(&mut self, step: &str, org: &OrgId) {
        self.actions.record(step, org);
    }

    /// System channel first, then application channels in id order.
    fn managed_channels(&self, include_ops: bool) -> Vec<(ChannelId, ChannelKind)> {
        let net = self.sim.network();
        let mut channels: Vec<(ChannelId, ChannelKind)> = net
            .channel_ids()
            .map(|c| (c.clone(), net.fetch_config_block(c).expect("listed").kind))
            .filter(|(_, k)| include_ops || *k != ChannelKind::Ops)
            .collect();
        channels.sort_by_key(|(c, k)| (*k != ChannelKind::System, *k == ChannelKind::Ops, c.clone()));
        channels
    }

    /// Steps 1/2/3 common to both modes: the new org's keys and MSP.
    fn prepare_new_org(&mut self, p: &CostParams, ids: [&str; 3]) -> Result<OrgId, ScenarioError> {
        let new = org(p.n + 1);
        self.act(ids[0], &new);
        self.sim.network_mut().register_org(&new, true).at(ids[1])?;
        self.act(ids[1], &new);
        self.act(ids[2], &new);
        Ok(new)
    }

    fn add_org_conventional(&mut self, p: &CostParams) -> Result<(), ScenarioError> {
        let new = self.prepare_new_org(p, ["1-A-1", "1-A-2", "1-A-3"])?;
        let admin = org(1);
        let msp = self.sim.network().org(&new).at("1-A-3")?.msp_descriptor.clone();
        let channels = self.managed_channels(false);
        for (channel, kind) in &channels {
            let net = self.sim.network();
            let base = net.fetch_config_block(channel).at("1-A-4")?;
            let update = configtx::compute_update(&base, &add_org_ops(*kind, &new, &msp, true)).at("1-A-4")?;
            let mut signatures = alloc::vec![configtx::sign_update(net.identity(&admin).at("1-A-4")?, &update)];
            self.act("1-A-4", &admin);
            self.act("1-A-5", &admin);
            let signers: Vec<OrgId> =
                base.governing_orgs().iter().filter(|o| **o != admin).take(majority(base.governing_orgs().len()) - 1).cloned().collect();
            for signer in &signers {
                signatures.push(configtx::sign_update(self.sim.network().identity(signer).at("1-A-6")?, &update));
                self.act("1-A-6", signer);
            }
            for signer in &signers {
                self.act("1-A-7", signer);
            }
            let envelope = configtx::assemble_envelope(update, signatures, &base.msps).at("1-A-8")?;
            self.sim.network_mut().apply_config_envelope(channel, envelope).at("1-A-8")?;
            self.act("1-A-8", &admin);
        }
        self.sim.network().fetch_config_block(&ChannelId::from(crate::simnet::SYSTEM_CHANNEL)).at("1-A-9")?;
        self.act("1-A-9", &admin);
        self.act("1-A-10", &new);
        for (channel, _) in &channels {
            self.sim.network_mut().join_peer(&new, channel).at("1-A-11")?;
            self.act("1-A-11", &new);
        }
        for (channel, kind) in &channels {
            if *kind != ChannelKind::Application {
                continue;
            }
            for def in self.sim.network().committed_definitions(channel).at("1-A-12")? {
                let bytes = self.sim.repo().resolve(&def.source_ref).at("1-A-12")?;
                self.act("1-A-12", &new);
                self.sim.network_mut().install_package(&new, &bytes).at("1-A-13")?;
                self.act("1-A-13", &new);
                self.sim.network_mut().approve_definition(&new, channel, &def).at("1-A-14")?;
                self.act("1-A-14", &new);
            }
        }
        self.check_new_org(&new, &channels, "1-A-14")
    }

    fn add_org_opssc(&mut self, p: &CostParams) -> Result<(), ScenarioError> {
        let new = self.prepare_new_org(p, ["1-B-1", "1-B-2", "1-B-3"])?;
        let admin = org(1);
        let msp = self.sim.network().org(&new).at("1-B-3")?.msp_descriptor.clone();
        let channels = self.managed_channels(true);
        let mut pending = Vec::new();
        for (channel, kind) in &channels {
            let ops = add_org_ops(*kind, &new, &msp, true);
            let description = format!("add {new} to {channel}");
            let proposal = self.sim.propose_channel_update(&admin, channel, &description, ops).at("1-B-4")?;
            self.act("1-B-4", &admin);
            self.proposal_ids.push(proposal.proposal_id.clone());
            pending.push(proposal);
        }
        for proposal in pending {
            let mut status = proposal.status;
            for voter in proposal.electorate.iter().filter(|o| **o != admin) {
                if status != ChannelProposalStatus::Proposed {
                    break;
                }
                status = self.sim.vote_channel_update(voter, &proposal.proposal_id).at("1-B-5")?.status;
                self.act("1-B-5", voter);
            }
            if status != ChannelProposalStatus::Committed {
                return Err(fail("1-B-5", format!("{} ended {status:?}", proposal.proposal_id)));
            }
        }
        self.sim.network().fetch_config_block(&ChannelId::from(crate::simnet::SYSTEM_CHANNEL)).at("1-B-6")?;
        self.act("1-B-6", &admin);
        self.act("1-B-7", &new);
        self.sim.launch_agent(&new, self.agent_config.clone()).at("1-B-8")?;
        self.act("1-B-8", &new);
        self.check_new_org(&new, &channels, "1-B-8")
    }

    /// The new org is a joined member of every channel and runs every
    /// committed chaincode with an exact-match approval.
    fn check_new_org(&self, new: &OrgId, channels: &[(ChannelId, ChannelKind)], step: &str) -> Result<(), ScenarioError> {
        let net = self.sim.network();
        for (channel, _) in channels {
            if !net.fetch_config_block(channel).at(step)?.member_orgs.contains(new) {
                return Err(fail(step, format!("{new} is not a member of {channel}")));
            }
            if !net.has_joined(new, channel) {
                return Err(fail(step, format!("{new} has not joined {channel}")));
            }
            for def in net.committed_definitions(channel).at(step)? {
                self.check_deployed(new, channel, &def, step)?;
            }
        }
        Ok(())
    }

    fn check_deployed(&self, org: &OrgId, channel: &ChannelId, def: &ChaincodeDefinition, step: &str) -> Result<(), ScenarioError> {
        let net = self.sim.network();
        let state = net.lifecycle_state(channel, &def.name).at(step)?;
        if state.approvals.get(org) != Some(def) {
            return Err(fail(step, format!("{org} has no matching approval of {} on {channel}", def.name)));
        }
        let bytes = self.sim.repo().resolve(&def.source_ref).at(step)?;
        if !net.installed_packages(org).contains(&Digest::of_bytes(&bytes)) {
            return Err(fail(step, format!("{org} has not installed {}", def.name)));
        }
        Ok(())
    }

    fn deploy_channel(&self) -> ChannelId {
        ChannelId::from("app1")
    }

    fn deploy_conventional(&mut self, p: &CostParams) -> Result<(), ScenarioError> {
        let channel = self.deploy_channel();
        let admin = org(1);
        let members: Vec<OrgId> = self.sim.network().fetch_config_block(&channel).at("2-A-1")?.member_orgs.into_iter().collect();
        for i in 1..=p.cc {
            let name = format!("newcc{i}");
            let source = self.sim.publish_release(&name, "1.0", None).at("2-A-1")?;
            let def = ChaincodeDefinition {
                name: name.clone(),
                version: "1.0".into(),
                sequence: 1,
                endorsement_policy: Default::default(),
                source_ref: source,
            };
            self.act("2-A-1", &admin);
            let mut packages = BTreeMap::new();
            for m in &members {
                packages.insert(m.clone(), self.sim.repo().resolve(&def.source_ref).at("2-A-2")?);
                self.act("2-A-2", m);
            }
            for m in &members {
                self.sim.network_mut().install_package(m, &packages[m]).at("2-A-3")?;
                self.act("2-A-3", m);
            }
            for m in &members {
                self.sim.network_mut().approve_definition(m, &channel, &def).at("2-A-4")?;
                self.act("2-A-4", m);
            }
            self.sim.network_mut().commit_definition(&admin, &channel, &def).at("2-A-5")?;
            self.act("2-A-5", &admin);
            self.check_committed(&channel, &def, &members, "2-A-5")?;
        }
        Ok(())
    }

    fn deploy_opssc(&mut self, p: &CostParams) -> Result<(), ScenarioError> {
        let channel = self.deploy_channel();
        let admin = org(1);
        for i in 1..=p.cc {
            let name = format!("newcc{i}");
            let source = self.sim.publish_release(&name, "1.0", None).at("2-B-1")?;
            let def = self.sim.next_definition(&channel, &name, "1.0", source).at("2-B-1")?;
            let proposal = self.sim.propose_chaincode(&admin, &channel, &def).at("2-B-1")?;
            self.act("2-B-1", &admin);
            self.proposal_ids.push(proposal.proposal_id.clone());
            let mut status = proposal.status;
            for voter in proposal.electorate.iter().filter(|o| **o != admin) {
                if status != ChaincodeProposalStatus::Proposed {
                    break;
                }
                status = self.sim.vote_chaincode(voter, &proposal.proposal_id, Decision::For).at("2-B-2")?.status;
                self.act("2-B-2", voter);
            }
            if status != ChaincodeProposalStatus::Committed {
                return Err(fail("2-B-2", format!("{} ended {status:?}", proposal.proposal_id)));
            }
            let members: Vec<OrgId> = proposal.electorate.into_iter().collect();
            self.check_committed(&channel, &def, &members, "2-B-2")?;
        }
        Ok(())
    }

    fn check_committed(&self, channel: &ChannelId, def: &ChaincodeDefinition, members: &[OrgId], step: &str) -> Result<(), ScenarioError> {
        let committed = self.sim.network().committed_definition(channel, &def.name).at(step)?;
        if committed.as_ref() != Some(def) {
            return Err(fail(step, format!("{} is not committed as proposed", def.name)));
        }
        for m in members {
            self.check_deployed(m, channel, def, step)?;
        }
        Ok(())
    }
}
