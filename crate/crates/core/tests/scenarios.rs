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


use std::time::Instant;

use opsflow_core::agent::FailureRule;
use opsflow_core::costmodel::{CostParams, Scenario};
use opsflow_core::opssc::{Task, TaskOutcome};
use opsflow_core::scenario::{run_scenario, run_scenario_with_state, Mode, ScenarioConfig};

fn config(scenario: Scenario, mode: Mode, n: u64, ch: u64, cc: u64) -> ScenarioConfig {
    ScenarioConfig { scenario, mode, params: CostParams::new(n, ch, cc), seed: 7, failures: Vec::new() }
}

#[test]
fn add_org_opssc_counts_match_the_table_at_even_n() {
    let start = Instant::now();
    let report = run_scenario(&config(Scenario::AddOrg, Mode::Opssc, 4, 2, 2)).unwrap();
    eprintln!("add-org opssc N=4: {:?}", start.elapsed());
    assert_eq!(report.actions.step_total("1-B-4"), 4);
    assert_eq!(report.actions.step_total("1-B-5"), 8);
    assert!(report.comparison.matches, "{:#?}", report.comparison);
    assert!(report.agent_errors.is_empty(), "{:?}", report.agent_errors);
}

#[test]
fn add_org_odd_n_completes() {
    let report = run_scenario(&config(Scenario::AddOrg, Mode::Opssc, 3, 2, 2)).unwrap();
    assert_eq!(report.proposal_ids.len(), 4);
    assert!(report.agent_errors.is_empty(), "{:?}", report.agent_errors);
}

#[test]
fn conventional_add_org_counts_24_actions() {
    let report = run_scenario(&config(Scenario::AddOrg, Mode::Conventional, 4, 1, 1)).unwrap();
    assert_eq!(report.actions_total, 24);
    assert!(report.comparison.matches, "{:#?}", report.comparison);
}

#[test]
fn both_modes_reach_the_same_application_state() {
    let a = run_scenario(&config(Scenario::AddOrg, Mode::Conventional, 4, 1, 1)).unwrap();
    let b = run_scenario(&config(Scenario::AddOrg, Mode::Opssc, 4, 1, 1)).unwrap();
    assert_eq!(a.slice_digests, b.slice_digests);
}

#[test]
fn deploy_modes_match_tables() {
    for mode in [Mode::Conventional, Mode::Opssc] {
        let report = run_scenario(&config(Scenario::DeployCc, mode, 4, 1, 1)).unwrap();
        assert!(report.comparison.matches, "{mode:?}: {:#?}", report.comparison);
    }
    let report = run_scenario(&config(Scenario::DeployCc, Mode::Opssc, 4, 1, 1)).unwrap();
    assert_eq!(report.actions_total, 3);
}

#[test]
fn commit_failure_is_recovered_by_reselection() {
    let mut c = config(Scenario::DeployCc, Mode::Opssc, 4, 1, 1);
    c.failures = vec!["commit@*@0".parse::<FailureRule>().unwrap()];
    let run = run_scenario_with_state(&c).unwrap();
    let id = &run.report.proposal_ids[0];
    let commits: Vec<_> = run.sim.history(id).unwrap().into_iter().filter(|r| r.task == Task::Commit).collect();
    assert_eq!(commits.len(), 2);
    assert!(!commits[0].outcome.is_success());
    assert_eq!(commits[1].outcome, TaskOutcome::Success);
    assert_ne!(commits[0].org_id, commits[1].org_id);
}

#[test]
fn reports_are_reproducible() {
    let c = config(Scenario::AddOrg, Mode::Opssc, 2, 1, 1);
    assert_eq!(run_scenario(&c).unwrap(), run_scenario(&c).unwrap());
}
