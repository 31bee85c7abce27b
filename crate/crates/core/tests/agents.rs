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


use std::collections::BTreeMap;

use opsflow_core::agent::AgentConfig;
use opsflow_core::configtx::add_org_ops;
use opsflow_core::opssc::chaincode::{ChaincodeProposalStatus, Decision};
use opsflow_core::opssc::channel::ChannelProposalStatus;
use opsflow_core::sim::Simulation;
use opsflow_core::simnet::{ChannelKind, GenesisSpec, Network, OPS_CHANNEL};
use opsflow_core::{ChannelId, OrgId};

fn org(i: usize) -> OrgId {
    OrgId::from(format!("Org{i}"))
}

fn ops() -> ChannelId {
    ChannelId::from(OPS_CHANNEL)
}

/// Add `new` to every channel through proposals, voting until each closes.
fn admit(sim: &mut Simulation, new: &OrgId) {
    let msp = sim.network_mut().register_org(new, true).unwrap().msp_descriptor.clone();
    let channels: Vec<(ChannelId, ChannelKind)> = sim.channels().unwrap().into_iter().map(|c| (c.channel_id, c.kind)).collect();
    for (channel, kind) in channels {
        let mut p = sim.propose_channel_update(&org(1), &channel, "admit", add_org_ops(kind, new, &msp, true)).unwrap();
        for voter in p.electorate.clone().iter().skip(1) {
            if p.status != ChannelProposalStatus::Proposed {
                break;
            }
            p = sim.vote_channel_update(voter, &p.proposal_id).unwrap();
        }
        assert_eq!(p.status, ChannelProposalStatus::Committed);
    }
}

/// Joined channels, installed packages and per-chaincode approvals of one org.
fn org_slice(net: &Network, o: &OrgId) -> (Vec<ChannelId>, usize, BTreeMap<(ChannelId, String), bool>) {
    let mut approvals = BTreeMap::new();
    for channel in net.joined_channels(o) {
        for def in net.committed_definitions(&channel).unwrap() {
            let state = net.lifecycle_state(&channel, &def.name).unwrap();
            approvals.insert((channel.clone(), def.name.clone()), state.approvals.get(o) == Some(&def));
        }
    }
    (net.joined_channels(o).into_iter().collect(), net.installed_packages(o).len(), approvals)
}

#[test]
fn bootstrap_brings_a_new_org_level_with_genesis_members() {
    let spec = GenesisSpec::standard(3, 2, 2, 9).unwrap();
    let mut sim = Simulation::with_agents(&spec, &AgentConfig::default()).unwrap();
    let new = org(4);
    admit(&mut sim, &new);
    assert!(sim.network().joined_channels(&new).is_empty());

    let report = sim.launch_agent(&new, AgentConfig::default()).unwrap();
    assert_eq!(report.joined.len(), 4);
    let app_approvals = report.approved.iter().filter(|(c, _)| c.as_str().starts_with("app")).count();
    assert_eq!(app_approvals, 4);
    assert_eq!(org_slice(sim.network(), &new), org_slice(sim.network(), &org(1)));
    assert!(org_slice(sim.network(), &new).2.values().all(|ok| *ok));

    let heights: Vec<u64> = sim.network().channel_ids().map(|c| sim.network().height(c).unwrap()).collect();
    let mut agent = sim.agent(&new).unwrap().clone();
    let (net, repo) = (sim.network().clone(), sim.repo().clone());
    let mut net = net;
    let again = agent.bootstrap(&mut net, &repo).unwrap();
    assert!(again.is_empty(), "{again:?}");
    let after: Vec<u64> = net.channel_ids().map(|c| net.height(c).unwrap()).collect();
    assert_eq!(heights, after);
}

#[test]
fn config_updates_trigger_catch_up_on_new_channels() {
    let mut spec = GenesisSpec::standard(3, 2, 1, 9).unwrap();
    spec.channels.iter_mut().find(|c| c.id.as_str() == "app2").unwrap().members.retain(|o| *o != org(3));
    let mut sim = Simulation::with_agents(&spec, &AgentConfig::default()).unwrap();
    let app2 = ChannelId::from("app2");
    assert!(!sim.network().has_joined(&org(3), &app2));

    let msp = sim.network().org(&org(3)).unwrap().msp_descriptor.clone();
    let p = sim.propose_channel_update(&org(1), &app2, "invite Org3", add_org_ops(ChannelKind::Application, &org(3), &msp, true)).unwrap();
    let p = sim.vote_channel_update(&org(2), &p.proposal_id).unwrap();
    assert_eq!(p.status, ChannelProposalStatus::Committed);

    let net = sim.network();
    assert!(net.has_joined(&org(3), &app2));
    let def = net.committed_definition(&app2, "cc1").unwrap().unwrap();
    assert_eq!(net.lifecycle_state(&app2, "cc1").unwrap().approvals.get(&org(3)), Some(&def));
}

#[test]
fn agents_touch_only_their_own_peers() {
    let spec = GenesisSpec::standard(3, 2, 1, 9).unwrap();
    let mut sim = Simulation::with_agents(&spec, &AgentConfig::default()).unwrap();
    admit(&mut sim, &org(4));
    sim.launch_agent(&org(4), AgentConfig::default()).unwrap();
    let net = sim.network();
    assert!(!net.node_operations().is_empty());
    for op in net.node_operations() {
        assert_eq!(net.peer(&op.peer).unwrap().org_id, op.actor);
    }
}

#[test]
fn approved_proposals_settle_within_a_bounded_number_of_blocks() {
    for n in 1..=6 {
        let spec = GenesisSpec::standard(n, 1, 0, 9).unwrap();
        let mut sim = Simulation::with_agents(&spec, &AgentConfig::default()).unwrap();
        let app = ChannelId::from("app1");
        let source = sim.publish_release("bounded", "1.0", None).unwrap();
        let def = sim.next_definition(&app, "bounded", "1.0", source).unwrap();
        let mut p = sim.propose_chaincode(&org(1), &app, &def).unwrap();
        let mut approved_at = sim.network().height(&ops()).unwrap();
        for voter in p.electorate.clone().iter().skip(1) {
            if p.status != ChaincodeProposalStatus::Proposed {
                break;
            }
            approved_at = sim.network().height(&ops()).unwrap();
            p = sim.vote_chaincode(voter, &p.proposal_id, Decision::For).unwrap();
        }
        assert_eq!(p.status, ChaincodeProposalStatus::Committed);
        // One vote, three reports per org, the commit result.
        let used = sim.network().height(&ops()).unwrap() - approved_at;
        assert!(used <= 3 * n as u64 + 2, "n={n}: {used} blocks");
    }
}

#[test]
fn replay_reconstructs_proposals_and_histories() {
    let spec = GenesisSpec::standard(4, 1, 1, 9).unwrap();
    let mut sim = Simulation::with_agents(&spec, &AgentConfig::default()).unwrap();
    admit(&mut sim, &org(5));
    sim.launch_agent(&org(5), AgentConfig::default()).unwrap();
    let app = ChannelId::from("app1");
    let source = sim.publish_release("audited", "1.0", None).unwrap();
    let def = sim.next_definition(&app, "audited", "1.0", source).unwrap();
    let p = sim.propose_chaincode(&org(2), &app, &def).unwrap();
    for voter in [org(3), org(4)] {
        sim.vote_chaincode(&voter, &p.proposal_id, Decision::For).unwrap();
    }

    let log: Vec<_> = sim.network().export_blocks().into_iter().cloned().collect();
    let replayed = Network::replay(&spec, &log).unwrap();
    assert_eq!(replayed.state_digest(), sim.network().state_digest());

    let live = sim.network();
    let reader = org(1);
    for (ns, ids) in [
        ("channel_ops", sim.channel_proposals().unwrap().into_iter().map(|p| p.proposal_id).collect::<Vec<_>>()),
        ("chaincode_ops", sim.chaincode_proposals().unwrap().into_iter().map(|p| p.proposal_id).collect()),
    ] {
        assert!(!ids.is_empty());
        let list = |n: &Network| n.query(&ops(), &reader, ns, "list_proposals", serde_json::json!({})).unwrap();
        assert_eq!(list(&replayed), list(live));
        for id in ids {
            let args = serde_json::json!({ "proposal_id": id });
            let history = |n: &Network| n.query(&ops(), &reader, ns, "get_history", args.clone()).unwrap();
            assert_eq!(history(&replayed), history(live));
        }
    }
}
