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


use std::collections::BTreeSet;

use serde_json::json;

use opsflow_core::agent::{select_executor, AgentConfig};
use opsflow_core::configtx::{self, add_org_ops};
use opsflow_core::opssc::chaincode::{ChaincodeProposal, ChaincodeProposalStatus, Decision};
use opsflow_core::opssc::channel::{ChannelProposal, ChannelProposalStatus};
use opsflow_core::opssc::{Task, TaskOutcome, CHAINCODE_OPS, CHANNEL_OPS};
use opsflow_core::sim::{SimError, Simulation};
use opsflow_core::simnet::{ChaincodeDefinition, ErrorKind, GenesisSpec, NetError, Payload, OPS_CHANNEL};
use opsflow_core::{ChannelId, OrgId};

fn org(i: usize) -> OrgId {
    OrgId::from(format!("Org{i}"))
}

fn app() -> ChannelId {
    ChannelId::from("app1")
}

fn chaincode_error(err: SimError) -> (ErrorKind, String) {
    match err {
        SimError::Net(NetError::Chaincode(e)) => (e.kind, e.code),
        other => panic!("expected a chaincode error, got {other}"),
    }
}

fn sim(n: usize, agents: bool, rules: &[&str]) -> Simulation {
    let spec = GenesisSpec::standard(n, 1, 1, 3).unwrap();
    let config = AgentConfig { failure_rules: rules.iter().map(|r| r.parse().unwrap()).collect(), ..AgentConfig::default() };
    if agents {
        Simulation::with_agents(&spec, &config).unwrap()
    } else {
        Simulation::new(&spec).unwrap()
    }
}

fn definition(sim: &mut Simulation, name: &str) -> ChaincodeDefinition {
    let source = sim.publish_release(name, "1.0", None).unwrap();
    sim.next_definition(&app(), name, "1.0", source).unwrap()
}

/// Propose `name` as Org1 and vote for it until the vote closes.
fn deploy(sim: &mut Simulation, name: &str) -> ChaincodeProposal {
    let def = definition(sim, name);
    let mut p = sim.propose_chaincode(&org(1), &app(), &def).unwrap();
    for voter in p.electorate.clone().iter().skip(1) {
        if p.status != ChaincodeProposalStatus::Proposed {
            break;
        }
        p = sim.vote_chaincode(voter, &p.proposal_id, Decision::For).unwrap();
    }
    p
}

fn ops_events(sim: &Simulation, kind: &str) -> usize {
    sim.network()
        .subscribe_events(&ChannelId::from(OPS_CHANNEL), 0)
        .unwrap()
        .iter()
        .filter(|e| e.event.name == kind)
        .count()
}

#[test]
fn new_chaincode_starts_proposed_and_upgrades_check_the_sequence() {
    let mut sim = sim(4, false, &[]);
    let def = definition(&mut sim, "fresh");
    assert_eq!(def.sequence, 1);
    let p = sim.propose_chaincode(&org(1), &app(), &def).unwrap();
    assert_eq!(p.status, ChaincodeProposalStatus::Proposed);
    assert_eq!(p.votes.get(&org(1)), Some(&Decision::For));

    let mut upgrade = definition(&mut sim, "cc1");
    assert_eq!(upgrade.sequence, 2);
    upgrade.sequence = 3;
    let err = sim.propose_chaincode(&org(1), &app(), &upgrade).unwrap_err();
    assert_eq!(chaincode_error(err), (ErrorKind::Conflict, "bad_sequence".into()));

    let err = sim.propose_chaincode(&org(1), &ChannelId::from("nowhere"), &def).unwrap_err();
    assert_eq!(chaincode_error(err), (ErrorKind::NotFound, "unknown_channel".into()));
}

#[test]
fn non_members_cannot_propose_or_vote() {
    let spec = {
        let mut s = GenesisSpec::standard(4, 1, 0, 3).unwrap();
        s.channels.iter_mut().find(|c| c.id == app()).unwrap().members.retain(|o| *o != org(4));
        s
    };
    let mut sim = Simulation::new(&spec).unwrap();
    let def = definition(&mut sim, "fresh");
    let err = sim.propose_chaincode(&org(4), &app(), &def).unwrap_err();
    assert_eq!(chaincode_error(err), (ErrorKind::Forbidden, "not_member".into()));
    let p = sim.propose_chaincode(&org(1), &app(), &def).unwrap();
    assert_eq!(p.electorate.len(), 3);
    let err = sim.vote_chaincode(&org(4), &p.proposal_id, Decision::For).unwrap_err();
    assert_eq!(chaincode_error(err), (ErrorKind::Forbidden, "not_in_electorate".into()));
}

#[test]
fn single_member_channel_approves_on_request() {
    let mut sim = sim(1, false, &[]);
    let p = deploy(&mut sim, "solo");
    assert_eq!(p.status, ChaincodeProposalStatus::Approved);
    assert_eq!(ops_events(&sim, "deploy"), 1);
}

#[test]
fn vote_thresholds() {
    let mut sim = sim(4, false, &[]);
    let p = deploy(&mut sim, "yes");
    assert_eq!(p.status, ChaincodeProposalStatus::Approved);
    assert_eq!(p.votes.len(), 3);

    let def = definition(&mut sim, "no");
    let p = sim.propose_chaincode(&org(1), &app(), &def).unwrap();
    let id = p.proposal_id;
    assert_eq!(sim.vote_chaincode(&org(2), &id, Decision::Against).unwrap().status, ChaincodeProposalStatus::Proposed);
    assert_eq!(sim.vote_chaincode(&org(3), &id, Decision::Against).unwrap().status, ChaincodeProposalStatus::Proposed);
    assert_eq!(sim.vote_chaincode(&org(4), &id, Decision::Against).unwrap().status, ChaincodeProposalStatus::Rejected);
    let err = sim.vote_chaincode(&org(4), &id, Decision::For).unwrap_err();
    assert_eq!(chaincode_error(err), (ErrorKind::Conflict, "double_vote".into()));
}

#[test]
fn split_vote_on_two_orgs_stalls() {
    let mut sim = sim(2, true, &[]);
    let def = definition(&mut sim, "split");
    let p = sim.propose_chaincode(&org(1), &app(), &def).unwrap();
    let p = sim.vote_chaincode(&org(2), &p.proposal_id, Decision::Against).unwrap();
    assert_eq!(p.status, ChaincodeProposalStatus::Proposed);
    assert_eq!(ops_events(&sim, "deploy"), 0);
}

#[test]
fn deploy_results_are_checked_and_idempotent() {
    let mut sim = sim(2, false, &[]);
    let p = deploy(&mut sim, "manual");
    assert_eq!(p.status, ChaincodeProposalStatus::Approved);
    let id = p.proposal_id.clone();
    let report = |task: Task| json!({"proposal_id": id, "task": task, "outcome": TaskOutcome::Success});

    let err = sim.invoke_ops(&org(1), CHAINCODE_OPS, "register_deploy_result", json!({"proposal_id": id, "task": "commit", "outcome": {"result": "success"}})).unwrap_err();
    assert_eq!(chaincode_error(err), (ErrorKind::Invalid, "wrong_task".into()));

    for o in [1, 2] {
        for t in Task::DEPLOY_TASKS {
            sim.invoke_ops(&org(o), CHAINCODE_OPS, "register_deploy_result", report(t)).unwrap();
        }
    }
    let p = sim.chaincode_proposal(&id).unwrap();
    assert_eq!(p.status, ChaincodeProposalStatus::Acknowledged);
    let history_len = sim.history(&id).unwrap().len();
    assert_eq!(ops_events(&sim, "commit"), 1);
    sim.invoke_ops(&org(2), CHAINCODE_OPS, "register_deploy_result", report(Task::Approve)).unwrap();
    assert_eq!(sim.history(&id).unwrap().len(), history_len);
    assert_eq!(ops_events(&sim, "commit"), 1);

    let executor = p.executor.clone().unwrap();
    let bystander = if executor == org(1) { org(2) } else { org(1) };
    let commit = json!({"proposal_id": id, "outcome": TaskOutcome::Success});
    let err = sim.invoke_ops(&bystander, CHAINCODE_OPS, "register_commit_result", commit.clone()).unwrap_err();
    assert_eq!(chaincode_error(err), (ErrorKind::Forbidden, "wrong_executor".into()));
    sim.invoke_ops(&executor, CHAINCODE_OPS, "register_commit_result", commit.clone()).unwrap();
    assert_eq!(sim.chaincode_proposal(&id).unwrap().status, ChaincodeProposalStatus::Committed);
    let err = sim.invoke_ops(&executor, CHAINCODE_OPS, "register_commit_result", commit).unwrap_err();
    assert_eq!(chaincode_error(err), (ErrorKind::Conflict, "wrong_status".into()));
}

#[test]
fn agents_deploy_everywhere_and_commit_once() {
    let mut sim = sim(3, true, &[]);
    let p = deploy(&mut sim, "fresh");
    assert_eq!(p.status, ChaincodeProposalStatus::Committed);
    let history = sim.history(&p.proposal_id).unwrap();
    let deploy_records: Vec<_> = history.iter().filter(|r| Task::DEPLOY_TASKS.contains(&r.task)).collect();
    assert_eq!(deploy_records.len(), 9);
    assert!(deploy_records.iter().all(|r| r.outcome.is_success()));
    assert!(history.windows(2).all(|w| w[0].block_number <= w[1].block_number));

    let net = sim.network();
    assert_eq!(net.committed_definition(&app(), "fresh").unwrap().as_ref(), Some(&p.definition));
    let state = net.lifecycle_state(&app(), "fresh").unwrap();
    let bytes = sim.repo().resolve(&p.definition.source_ref).unwrap();
    for o in &p.electorate {
        assert_eq!(state.approvals.get(o), Some(&p.definition));
        assert!(state.installs[o].contains(&opsflow_core::Digest::of_bytes(&bytes)));
    }
    let commits = net
        .blocks(&app())
        .unwrap()
        .iter()
        .flat_map(|b| &b.transactions)
        .filter(|tx| tx.validity == opsflow_core::simnet::Validity::Valid)
        .filter(|tx| matches!(&tx.payload, Payload::Invoke(i) if i.operation == "commit" && i.args["definition"]["name"] == "fresh"))
        .count();
    assert_eq!(commits, 1);

    let executor = p.executor.clone();
    for (o, agent) in sim.agents() {
        let committed = agent.log().iter().any(|e| e.task == Task::Commit);
        assert_eq!(committed, Some(o) == executor.as_ref(), "{o}");
    }
}

#[test]
fn a_retried_install_leaves_one_failure_and_one_success() {
    let mut sim = sim(3, true, &["install@Org2@0"]);
    let p = deploy(&mut sim, "flaky");
    assert_eq!(p.status, ChaincodeProposalStatus::Committed);
    let installs: Vec<_> = sim
        .history(&p.proposal_id)
        .unwrap()
        .into_iter()
        .filter(|r| r.task == Task::Install && r.org_id == org(2))
        .collect();
    assert_eq!(installs.len(), 2);
    assert!(!installs[0].outcome.is_success());
    assert_eq!(installs[0].note.as_deref(), Some("retrying"));
    assert!(installs[1].outcome.is_success());
}

#[test]
fn a_persistent_install_failure_fails_the_proposal() {
    let mut sim = sim(3, true, &["install@Org2"]);
    let p = deploy(&mut sim, "broken");
    assert_eq!(p.status, ChaincodeProposalStatus::Failed);
    assert_eq!(ops_events(&sim, "commit"), 0);
    assert!(sim.network().committed_definition(&app(), "broken").unwrap().is_none());
}

/// Electorate sizes giving 1, 2, 3 and 4 voters when voting stops at a
/// majority.
const ELECTORATES: [(usize, usize); 4] = [(1, 1), (2, 2), (4, 3), (6, 4)];

fn subsets(voters: &[OrgId]) -> impl Iterator<Item = Vec<OrgId>> + '_ {
    (0..1u32 << voters.len()).map(move |mask| {
        voters.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, o)| o.clone()).collect()
    })
}

/// Attempts follow the seeded executor order and stop at the first org
/// that does not fail.
fn check_attempts(records: &[opsflow_core::opssc::TaskRecord], failing: &[OrgId], voters: &BTreeSet<OrgId>, proposal_id: &str) {
    let orgs: BTreeSet<&OrgId> = records.iter().map(|r| &r.org_id).collect();
    assert_eq!(orgs.len(), records.len(), "each attempt names a distinct org");
    let mut expected = Vec::new();
    for attempt in 0..voters.len() as u32 {
        let executor = select_executor(voters, 3, proposal_id, attempt).unwrap();
        let fails = failing.contains(&executor);
        expected.push((executor, !fails));
        if !fails {
            break;
        }
    }
    let seen: Vec<(OrgId, bool)> = records.iter().map(|r| (r.org_id.clone(), r.outcome.is_success())).collect();
    assert_eq!(seen, expected);
}

#[test]
fn commit_survives_any_failures_short_of_all_voters() {
    for (n, v) in ELECTORATES {
        let voters: Vec<OrgId> = (1..=v).map(org).collect();
        for failing in subsets(&voters) {
            let rules: Vec<String> = failing.iter().map(|o| format!("commit@{o}")).collect();
            let rules: Vec<&str> = rules.iter().map(String::as_str).collect();
            let mut sim = sim(n, true, &rules);
            let p = deploy(&mut sim, "target");
            assert_eq!(p.voters_for().len(), v);
            let want = if failing.len() < v { ChaincodeProposalStatus::Committed } else { ChaincodeProposalStatus::Failed };
            assert_eq!(p.status, want, "n={n} failing={failing:?}");
            let commits: Vec<_> = sim.history(&p.proposal_id).unwrap().into_iter().filter(|r| r.task == Task::Commit).collect();
            check_attempts(&commits, &failing, &p.voters_for(), &p.proposal_id);
        }
    }
}

fn add_org_proposal(sim: &mut Simulation, new: &OrgId) -> ChannelProposal {
    let msp = match sim.network().org(new) {
        Ok(o) => o.msp_descriptor.clone(),
        Err(_) => sim.network_mut().register_org(new, false).unwrap().msp_descriptor.clone(),
    };
    let ops = add_org_ops(opsflow_core::simnet::ChannelKind::Application, new, &msp, false);
    let mut p = sim.propose_channel_update(&org(1), &app(), "add", ops).unwrap();
    for voter in p.electorate.clone().iter().skip(1) {
        if p.status != ChannelProposalStatus::Proposed {
            break;
        }
        p = sim.vote_channel_update(voter, &p.proposal_id).unwrap();
    }
    p
}

#[test]
fn channel_update_survives_any_failures_short_of_all_voters() {
    for (n, v) in ELECTORATES {
        let voters: Vec<OrgId> = (1..=v).map(org).collect();
        for failing in subsets(&voters) {
            let rules: Vec<String> = failing.iter().map(|o| format!("update_channel@{o}")).collect();
            let rules: Vec<&str> = rules.iter().map(String::as_str).collect();
            let mut sim = sim(n, true, &rules);
            let new = org(n + 1);
            let p = add_org_proposal(&mut sim, &new);
            assert_eq!(p.votes.len(), v);
            let committed = failing.len() < v;
            let want = if committed { ChannelProposalStatus::Committed } else { ChannelProposalStatus::Failed };
            assert_eq!(p.status, want, "n={n} failing={failing:?}");
            assert_eq!(sim.network().fetch_config_block(&app()).unwrap().is_member(&new), committed);
            let updates: Vec<_> =
                sim.history(&p.proposal_id).unwrap().into_iter().filter(|r| r.task == Task::UpdateChannel).collect();
            check_attempts(&updates, &failing, &p.voters(), &p.proposal_id);
        }
    }
}

#[test]
fn channel_proposal_errors() {
    let mut sim = sim(4, true, &[]);
    let new = org(5);
    let msp = sim.network_mut().register_org(&new, false).unwrap().msp_descriptor.clone();
    let ops = add_org_ops(opsflow_core::simnet::ChannelKind::Application, &new, &msp, false);

    let err = sim.propose_channel_update(&new, &app(), "self-invite", ops.clone()).unwrap_err();
    assert!(matches!(err, SimError::Net(NetError::NotMember { .. })), "{err}");

    let base = sim.network().fetch_config_block(&app()).unwrap();
    let update = configtx::compute_update(&base, &ops).unwrap();
    let forged = configtx::sign_update(sim.network().identity(&org(2)).unwrap(), &update);
    let args = json!({"target_channel_id": app(), "spec": ops, "base": base, "signature": forged});
    let err = sim.invoke_ops(&org(1), CHANNEL_OPS, "request_proposal", args).unwrap_err();
    assert_eq!(chaincode_error(err), (ErrorKind::Invalid, "bad_signature".into()));

    let p = add_org_proposal(&mut sim, &new);
    assert_eq!(p.status, ChannelProposalStatus::Committed);
    let err = sim.vote_channel_update(&org(4), &p.proposal_id).unwrap_err();
    assert_eq!(chaincode_error(err), (ErrorKind::Conflict, "wrong_status".into()));
    let err = sim.vote_channel_update(&org(2), &p.proposal_id).unwrap_err();
    assert_eq!(chaincode_error(err), (ErrorKind::Conflict, "double_vote".into()));

    let sig = configtx::sign_update(sim.network().identity(&org(1)).unwrap(), &update);
    let args = json!({"target_channel_id": app(), "spec": ops, "base": base, "signature": sig});
    let err = sim.invoke_ops(&org(1), CHANNEL_OPS, "request_proposal", args).unwrap_err();
    assert_eq!(chaincode_error(err), (ErrorKind::Conflict, "stale_base".into()));

    let info = sim.channels().unwrap().into_iter().find(|c| c.channel_id == app()).unwrap();
    assert!(info.member_orgs.contains(&new));
    assert_eq!(info.config_version, 1);
    assert_eq!(ops_events(&sim, "config_updated"), 1);

    let history = sim.history(&p.proposal_id).unwrap();
    let tasks: Vec<Task> = history.iter().map(|r| r.task).collect();
    assert_eq!(tasks, [Task::Request, Task::Vote, Task::Vote, Task::UpdateChannel]);
}
