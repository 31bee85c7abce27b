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

//! Operational cost model for adding an organization (scenario 1) and
//! deploying chaincodes (scenario 2).
//!
//! Every step costs one unit per execution. A step's multiplicity is the
//! per-organization count times the number of organizations executing it;
//! the total operational cost (TOC) sums all executions, while the lead
//! time (LT) counts a step run in parallel by several organizations once.
//! Arithmetic is exact, so `N/2` stays a half-integer for odd `N`.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::ops::RangeInclusive;
use core::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::identity::OrgId;

/// Exact cost value.
pub type Cost = Ratio<i64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostParams {
    /// Existing organizations.
    pub n: u64,
    /// Application channels.
    pub ch: u64,
    /// Application chaincodes.
    pub cc: u64,
}

impl CostParams {
    pub fn new(n: u64, ch: u64, cc: u64) -> Self {
        CostParams { n, ch, cc }
    }

    pub fn get(&self, p: Param) -> u64 {
        match p {
            Param::N => self.n,
            Param::Ch => self.ch,
            Param::Cc => self.cc,
        }
    }

    pub fn with(mut self, p: Param, value: u64) -> Self {
        match p {
            Param::N => self.n = value,
            Param::Ch => self.ch = value,
            Param::Cc => self.cc = value,
        }
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Param {
    N,
    Ch,
    Cc,
}

impl FromStr for Param {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "n" => Ok(Param::N),
            "ch" => Ok(Param::Ch),
            "cc" => Ok(Param::Cc),
            _ => Err(format!("unknown parameter {s:?}")),
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Param::N => "N",
            Param::Ch => "CH",
            Param::Cc => "CC",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    AddOrg,
    DeployCc,
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "1" | "add-org" | "add_org" => Ok(Scenario::AddOrg),
            "2" | "deploy-cc" | "deploy_cc" => Ok(Scenario::DeployCc),
            _ => Err(format!("unknown scenario {s:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Conventional,
    Proposed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    Toc,
    Lt,
}

impl FromStr for CostKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "toc" => Ok(CostKind::Toc),
            "lt" => Ok(CostKind::Lt),
            _ => Err(format!("unknown cost kind {s:?}")),
        }
    }
}

/// Multiplicity expression over the cost parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    Const(i64),
    Var(Param),
    Half(Box<Expr>),
    Sum(Box<Expr>, Box<Expr>),
    Prod(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn eval(&self, p: &CostParams) -> Cost {
        match self {
            Expr::Const(c) => Cost::from_integer(*c),
            Expr::Var(v) => Cost::from_integer(p.get(*v) as i64),
            Expr::Half(e) => e.eval(p) / 2,
            Expr::Sum(a, b) => a.eval(p) + b.eval(p),
            Expr::Prod(a, b) => a.eval(p) * b.eval(p),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Half(e) => write!(f, "{e}/2"),
            Expr::Sum(a, b) => write!(f, "({a}+{b})"),
            Expr::Prod(a, b) => write!(f, "{a}*{b}"),
        }
    }
}

fn k(c: i64) -> Expr {
    Expr::Const(c)
}

fn var(p: Param) -> Expr {
    Expr::Var(p)
}

fn plus(a: Expr, b: Expr) -> Expr {
    Expr::Sum(Box::new(a), Box::new(b))
}

fn times(a: Expr, b: Expr) -> Expr {
    Expr::Prod(Box::new(a), Box::new(b))
}

fn half(e: Expr) -> Expr {
    Expr::Half(Box::new(e))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub id: &'static str,
    pub description: &'static str,
    /// Executions by one participating organization.
    pub per_org: Expr,
    /// Organizations executing the step.
    pub orgs: Expr,
    /// Steps in a parallel group are executed concurrently by all
    /// participating organizations and enter the lead time once.
    pub parallel_group: Option<&'static str>,
}

impl Step {
    pub fn toc(&self, p: &CostParams) -> Cost {
        self.per_org.eval(p) * self.orgs.eval(p)
    }

    pub fn lt(&self, p: &CostParams) -> Cost {
        match self.parallel_group {
            Some(_) => self.per_org.eval(p),
            None => self.toc(p),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepTable {
    pub scenario: Scenario,
    pub method: Method,
    pub steps: Vec<Step>,
}

fn step(id: &'static str, description: &'static str, per_org: Expr) -> Step {
    Step { id, description, per_org, orgs: k(1), parallel_group: None }
}

fn parallel(id: &'static str, description: &'static str, per_org: Expr, orgs: Expr, group: &'static str) -> Step {
    Step { id, description, per_org, orgs, parallel_group: Some(group) }
}

impl StepTable {
    pub fn new(scenario: Scenario, method: Method) -> Self {
        use Param::*;
        let ch1 = || plus(var(Ch), k(1));
        let ch2 = || plus(var(Ch), k(2));
        let half_n = || half(var(N));
        let ch_cc = || times(var(Ch), var(Cc));
        let steps = match (scenario, method) {
            (Scenario::AddOrg, Method::Conventional) => alloc::vec![
                step("1-A-1", "new org launches its CAs", k(1)),
                step("1-A-2", "new org issues certificates and keys for its nodes", k(1)),
                step("1-A-3", "new org sends its MSP info to an existing org", k(1)),
                step("1-A-4", "existing org creates a configtx per channel", ch1()),
                step("1-A-5", "existing org shares each configtx", ch1()),
                parallel("1-A-6", "remaining orgs sign each configtx", ch1(), half_n(), "signers"),
                parallel("1-A-7", "remaining orgs share their signed configtx", ch1(), half_n(), "signers"),
                step("1-A-8", "existing org submits each channel update", ch1()),
                step("1-A-9", "existing org shares the system genesis block", k(1)),
                step("1-A-10", "new org launches its peers and orderers", k(1)),
                step("1-A-11", "new org joins its peers to each channel", ch1()),
                step("1-A-12", "new org downloads every chaincode", ch_cc()),
                step("1-A-13", "new org installs every chaincode", ch_cc()),
                step("1-A-14", "new org approves every chaincode definition", ch_cc()),
            ],
            (Scenario::AddOrg, Method::Proposed) => alloc::vec![
                step("1-B-1", "new org launches its CAs", k(1)),
                step("1-B-2", "new org issues certificates and keys for its nodes", k(1)),
                step("1-B-3", "new org sends its MSP info to an existing org", k(1)),
                step("1-B-4", "existing org proposes the addition per channel", ch2()),
                parallel("1-B-5", "remaining orgs vote for each proposal", ch2(), half_n(), "voters"),
                step("1-B-6", "existing org shares the system genesis block", k(1)),
                step("1-B-7", "new org launches its peers and orderers", k(1)),
                step("1-B-8", "new org launches its agent and API server", k(1)),
            ],
            (Scenario::DeployCc, Method::Conventional) => alloc::vec![
                step("2-A-1", "existing org shares source and definition", var(Cc)),
                parallel("2-A-2", "every org downloads the chaincode", var(Cc), var(N), "all-orgs"),
                parallel("2-A-3", "every org installs the chaincode", var(Cc), var(N), "all-orgs"),
                parallel("2-A-4", "every org approves the definition", var(Cc), var(N), "all-orgs"),
                step("2-A-5", "existing org commits the definition", var(Cc)),
            ],
            (Scenario::DeployCc, Method::Proposed) => alloc::vec![
                step("2-B-1", "existing org proposes the chaincode", var(Cc)),
                parallel("2-B-2", "remaining orgs vote for the proposal", var(Cc), half_n(), "voters"),
            ],
        };
        StepTable { scenario, method, steps }
    }

    pub fn step(&self, id: &str) -> Option<&Step> {
        self.steps.iter().find(|s| s.id == id)
    }

    pub fn cost(&self, kind: CostKind, p: &CostParams) -> Cost {
        match kind {
            CostKind::Toc => toc(self, p),
            CostKind::Lt => lt(self, p),
        }
    }
}

pub fn toc(table: &StepTable, p: &CostParams) -> Cost {
    table.steps.iter().map(|s| s.toc(p)).sum()
}

pub fn lt(table: &StepTable, p: &CostParams) -> Cost {
    table.steps.iter().map(|s| s.lt(p)).sum()
}

/// The published total formulas, evaluated directly.
pub fn closed_form(scenario: Scenario, method: Method, kind: CostKind, p: &CostParams) -> Cost {
    let n = Cost::from_integer(p.n as i64);
    let ch = Cost::from_integer(p.ch as i64);
    let cc = Cost::from_integer(p.cc as i64);
    let c = Cost::from_integer;
    match (scenario, method, kind) {
        (Scenario::AddOrg, Method::Conventional, CostKind::Toc) => ch * (c(3) * cc + n + c(4)) + n + c(9),
        (Scenario::AddOrg, Method::Proposed, CostKind::Toc) => ch * (n / 2 + c(1)) + n + c(8),
        (Scenario::AddOrg, Method::Conventional, CostKind::Lt) => ch * (c(3) * cc + c(6)) + c(11),
        (Scenario::AddOrg, Method::Proposed, CostKind::Lt) => c(2) * ch + c(10),
        (Scenario::DeployCc, Method::Conventional, CostKind::Toc) => cc * (c(3) * n + c(2)),
        (Scenario::DeployCc, Method::Proposed, CostKind::Toc) => cc * (n / 2 + c(1)),
        (Scenario::DeployCc, Method::Conventional, CostKind::Lt) => c(5) * cc,
        (Scenario::DeployCc, Method::Proposed, CostKind::Lt) => c(2) * cc,
    }
}

/// `1 - proposed/conventional`, or zero when both are zero.
pub fn reduction(conventional: Cost, proposed: Cost) -> Cost {
    if conventional == Cost::from_integer(0) {
        Cost::from_integer(0)
    } else {
        Cost::from_integer(1) - proposed / conventional
    }
}

pub fn to_f64(c: Cost) -> f64 {
    *c.numer() as f64 / *c.denom() as f64
}

/// Exact decimal rendering when the denominator allows it, otherwise six
/// fractional digits.
pub fn format_cost(c: Cost) -> String {
    if c.is_integer() {
        return c.to_integer().to_string();
    }
    let mut d = *c.denom();
    while d % 2 == 0 {
        d /= 2;
    }
    while d % 5 == 0 {
        d /= 5;
    }
    let digits = if d == 1 {
        let mut scaled = c;
        let mut digits = 0;
        while !scaled.is_integer() {
            scaled *= 10;
            digits += 1;
        }
        digits
    } else {
        6
    };
    format!("{:.*}", digits, to_f64(c))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SweepRow {
    pub x: u64,
    pub conventional: Cost,
    pub proposed: Cost,
    pub reduction: Cost,
}

pub fn sweep(scenario: Scenario, kind: CostKind, fixed: CostParams, vary: Param, range: RangeInclusive<u64>) -> Vec<SweepRow> {
    let conv = StepTable::new(scenario, Method::Conventional);
    let prop = StepTable::new(scenario, Method::Proposed);
    range
        .map(|x| {
            let p = fixed.with(vary, x);
            let conventional = conv.cost(kind, &p);
            let proposed = prop.cost(kind, &p);
            SweepRow { x, conventional, proposed, reduction: reduction(conventional, proposed) }
        })
        .collect()
}

pub const SWEEP_CSV_HEADER: &str = "x,conventional,proposed,reduction";

/// CSV rendering of a sweep, reduction with six fractional digits.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:.6}\n",
            r.x,
            format_cost(r.conventional),
            format_cost(r.proposed),
            to_f64(r.reduction)
        ));
    }
    out
}

/// A named comparison of conventional and proposed TOC.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Headline {
    pub label: &'static str,
    pub scenario: Scenario,
    pub params: CostParams,
    pub conventional: Cost,
    pub proposed: Cost,
    pub reduction: Cost,
}

/// The headline TOC figures: both scenarios at N=10, CH=CC=2, and
/// scenario 1 with three application channels.
pub fn headlines() -> Vec<Headline> {
    let cases = [
        ("add-org N=10 CH=2 CC=2", Scenario::AddOrg, CostParams::new(10, 2, 2)),
        ("deploy-cc N=10 CC=2", Scenario::DeployCc, CostParams::new(10, 2, 2)),
        ("add-org N=10 CH=3 CC=2", Scenario::AddOrg, CostParams::new(10, 3, 2)),
    ];
    cases
        .into_iter()
        .map(|(label, scenario, params)| {
            let conventional = toc(&StepTable::new(scenario, Method::Conventional), &params);
            let proposed = toc(&StepTable::new(scenario, Method::Proposed), &params);
            Headline { label, scenario, params, conventional, proposed, reduction: reduction(conventional, proposed) }
        })
        .collect()
}

/// Administrator actions counted during a simulated run, per step id and
/// acting organization.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionLog {
    pub counts: BTreeMap<String, BTreeMap<OrgId, u64>>,
}

impl ActionLog {
    pub fn record(&mut self, step_id: &str, org: &OrgId) {
        *self.counts.entry(step_id.into()).or_default().entry(org.clone()).or_default() += 1;
    }

    pub fn step_total(&self, step_id: &str) -> u64 {
        self.counts.get(step_id).map_or(0, |m| m.values().sum())
    }

    /// Most actions any single organization took in the step.
    pub fn step_max_per_org(&self, step_id: &str) -> u64 {
        self.counts.get(step_id).and_then(|m| m.values().max().copied()).unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().flat_map(|m| m.values()).sum()
    }

    pub fn per_org(&self) -> BTreeMap<OrgId, u64> {
        let mut out: BTreeMap<OrgId, u64> = BTreeMap::new();
        for (org, n) in self.counts.values().flat_map(|m| m.iter()) {
            *out.entry(org.clone()).or_default() += n;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepComparison {
    pub step_id: String,
    /// Model value, rendered exactly.
    pub expected_toc: String,
    pub measured_toc: u64,
    pub expected_lt: String,
    pub measured_lt: u64,
    pub matches: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comparison {
    pub scenario: Scenario,
    pub method: Method,
    pub params: CostParams,
    pub steps: Vec<StepComparison>,
    /// Step ids counted in the run but absent from the table.
    pub unexpected: Vec<String>,
    pub expected_toc: String,
    pub measured_toc: u64,
    pub expected_lt: String,
    pub measured_lt: u64,
    pub matches: bool,
}

impl Comparison {
    pub fn discrepancies(&self) -> impl Iterator<Item = &StepComparison> {
        self.steps.iter().filter(|s| !s.matches)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("the run did not complete")]
pub struct IncompleteRun;

/// Compare counted actions with the step table. Parallel steps are
/// measured for the lead time by the busiest organization.
pub fn measured_compare(
    actions: &ActionLog,
    completed: bool,
    scenario: Scenario,
    method: Method,
    params: &CostParams,
) -> Result<Comparison, IncompleteRun> {
    if !completed {
        return Err(IncompleteRun);
    }
    let table = StepTable::new(scenario, method);
    let steps: Vec<StepComparison> = table
        .steps
        .iter()
        .map(|s| {
            let measured_toc = actions.step_total(s.id);
            let measured_lt = match s.parallel_group {
                Some(_) => actions.step_max_per_org(s.id),
                None => measured_toc,
            };
            let (et, el) = (s.toc(params), s.lt(params));
            StepComparison {
                step_id: s.id.into(),
                expected_toc: format_cost(et),
                measured_toc,
                expected_lt: format_cost(el),
                measured_lt,
                matches: et == Cost::from_integer(measured_toc as i64) && el == Cost::from_integer(measured_lt as i64),
            }
        })
        .collect();
    let unexpected: Vec<String> = actions.counts.keys().filter(|id| table.step(id).is_none()).cloned().collect();
    let measured_toc = steps.iter().map(|s| s.measured_toc).sum();
    let measured_lt = steps.iter().map(|s| s.measured_lt).sum();
    let matches = unexpected.is_empty() && steps.iter().all(|s| s.matches);
    Ok(Comparison {
        scenario,
        method,
        params: *params,
        expected_toc: format_cost(toc(&table, params)),
        measured_toc,
        expected_lt: format_cost(lt(&table, params)),
        measured_lt,
        steps,
        unexpected,
        matches,
    })
}
