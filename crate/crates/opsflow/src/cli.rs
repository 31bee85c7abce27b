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
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use opsflow_core::agent::{AgentConfig, FailureRule};
use opsflow_core::codec::Digest;
use opsflow_core::configtx::{self, ConfigOp, ConfigSignature, ConfigUpdate, Envelope};
use opsflow_core::costmodel::{self, CostKind, CostParams, Scenario};
use opsflow_core::identity::SigningIdentity;
use opsflow_core::scenario::{run_scenario_with_state, Mode, ScenarioConfig};
use opsflow_core::sim::Simulation;
use opsflow_core::simnet::{ChannelConfig, GenesisSpec, Network};
use opsflow_core::{ChannelId, OrgId};

use crate::files::{parse_fixed, parse_vary, read_block_log, read_json, write_block_log, write_canonical};
use crate::server::{default_token, router, ApiState};

#[derive(Parser, Debug)]
#[command(name = "opsflow", version, about = "Consortium blockchain operations simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Network genesis files.
    #[command(subcommand)]
    Net(NetCommand),
    /// End-to-end operation scenarios.
    #[command(subcommand)]
    Scenario(ScenarioCommand),
    /// Rebuild a network from a genesis file and an exported block log.
    Replay(ReplayArgs),
    /// Operational cost model.
    #[command(subcommand)]
    Cost(CostCommand),
    /// Channel configuration updates.
    #[command(subcommand)]
    Configtx(ConfigtxCommand),
    /// Serve the REST API for one or more organizations.
    Serve(ServeArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Shape {
    #[arg(long, default_value_t = 4)]
    pub orgs: usize,
    #[arg(long, default_value_t = 2)]
    pub channels: usize,
    #[arg(long, default_value_t = 2)]
    pub chaincodes: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

impl Shape {
    fn genesis(&self) -> Result<GenesisSpec> {
        Ok(GenesisSpec::standard(self.orgs, self.channels, self.chaincodes, self.seed)?)
    }
}

#[derive(Subcommand, Debug)]
pub enum NetCommand {
    /// Write the standard genesis layout.
    Init {
        #[command(flatten)]
        shape: Shape,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the genesis configuration of one channel.
    Config {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        channel: ChannelId,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
pub enum ScenarioCommand {
    Run(ScenarioRunArgs),
}

#[derive(Args, Debug)]
pub struct ScenarioRunArgs {
    /// add-org (1) or deploy-cc (2).
    #[arg(long)]
    pub scenario: Scenario,
    #[arg(long, default_value = "opssc")]
    pub mode: Mode,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Existing organizations.
    #[arg(long, default_value_t = 4)]
    pub orgs: u64,
    /// Application channels.
    #[arg(long, default_value_t = 2)]
    pub channels: u64,
    /// Chaincodes already deployed (add-org) or to deploy (deploy-cc).
    #[arg(long, default_value_t = 2)]
    pub chaincodes: u64,
    /// Injected agent failure, `task@org@attempt`; org and attempt accept `*`.
    #[arg(long = "fail")]
    pub failures: Vec<FailureRule>,
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Export the block log as NDJSON.
    #[arg(long)]
    pub blocks: Option<PathBuf>,
    /// Write the genesis file the run started from.
    #[arg(long)]
    pub genesis: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    #[arg(long)]
    pub net: PathBuf,
    #[arg(long)]
    pub blocks: PathBuf,
    /// Fail unless the rebuilt state digest equals this hex value.
    #[arg(long)]
    pub expect_digest: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum CostCommand {
    /// Evaluate conventional and proposed cost over a parameter range.
    Sweep {
        #[arg(long)]
        scenario: Scenario,
        #[arg(long, default_value = "toc")]
        kind: CostKind,
        /// Fixed parameters, e.g. `ch=2,cc=2`. Unlisted ones default to N=10, CH=2, CC=2.
        #[arg(long, default_value = "")]
        fix: String,
        /// Varied parameter and inclusive range, e.g. `n=2:20`.
        #[arg(long)]
        vary: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the headline reductions.
    Headlines,
    /// Print one step table with per-step costs.
    Table {
        #[arg(long)]
        scenario: Scenario,
        #[arg(long, default_value = "opssc")]
        mode: Mode,
        #[arg(long, default_value = "")]
        fix: String,
    },
}

#[derive(Subcommand, Debug)]
pub enum ConfigtxCommand {
    /// Compile an op list against a base configuration.
    Compute {
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        ops: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sign an update with an organization's identity.
    Sign {
        #[arg(long)]
        update: PathBuf,
        #[arg(long)]
        org: OrgId,
        /// Network seed the identity derives from.
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify signatures against the base configuration and bundle them.
    Assemble {
        #[arg(long)]
        update: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "sig", required = true)]
        signatures: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply an update or envelope to a base configuration.
    Apply {
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        update: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    /// Organization served; repeat to serve several orgs from one process.
    #[arg(long = "org", env = "OPSFLOW_ORG", value_delimiter = ',', required = true)]
    pub orgs: Vec<OrgId>,
    #[arg(long, env = "OPSFLOW_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, env = "OPSFLOW_HOST", default_value = "127.0.0.1")]
    pub host: String,
    /// Bearer token for a single served org. Defaults to `token-<org>`.
    #[arg(long, env = "OPSFLOW_TOKEN")]
    pub token: Option<String>,
    /// Genesis file; without it the standard layout from the shape flags is used.
    #[arg(long)]
    pub net: Option<PathBuf>,
    #[command(flatten)]
    pub shape: Shape,
    /// Rewrite this NDJSON block log after every mutation.
    #[arg(long)]
    pub export: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Net(c) => net(c),
        Command::Scenario(ScenarioCommand::Run(a)) => scenario(a),
        Command::Replay(a) => replay(a),
        Command::Cost(c) => cost(c),
        Command::Configtx(c) => configtx_cmd(c),
        Command::Serve(a) => serve(a),
    }
}

fn net(cmd: NetCommand) -> Result<()> {
    match cmd {
        NetCommand::Init { shape, out } => {
            let spec = shape.genesis()?;
            write_canonical(&out, &spec)?;
            println!("wrote genesis with {} orgs and {} channels to {}", spec.orgs.len(), spec.channels.len(), out.display());
        }
        NetCommand::Config { net, channel, out } => {
            let spec: GenesisSpec = read_json(&net)?;
            let config = Network::create(&spec)?.fetch_config_block(&channel)?;
            write_canonical(&out, &config)?;
        }
    }
    Ok(())
}

fn scenario(a: ScenarioRunArgs) -> Result<()> {
    let config = ScenarioConfig {
        scenario: a.scenario,
        mode: a.mode,
        params: CostParams::new(a.orgs, a.channels, a.chaincodes),
        seed: a.seed,
        failures: a.failures,
    };
    let run = run_scenario_with_state(&config)?;
    let r = &run.report;
    if let Some(path) = &a.metrics {
        write_canonical(path, r)?;
    }
    if let Some(path) = &a.blocks {
        write_block_log(path, run.sim.network().export_blocks())?;
    }
    if let Some(path) = &a.genesis {
        write_canonical(path, run.sim.spec())?;
    }
    println!(
        "{:?} {:?} N={} CH={} CC={}: {} actions, {} blocks, {} proposals",
        r.scenario, r.mode, r.params.n, r.params.ch, r.params.cc, r.actions_total, r.total_blocks, r.proposal_ids.len()
    );
    println!("state digest {}", r.state_digest.to_hex());
    let c = &r.comparison;
    println!("step table toc {} lt {}, measured toc {} lt {}", c.expected_toc, c.expected_lt, c.measured_toc, c.measured_lt);
    for d in c.discrepancies() {
        println!(
            "  step {}: table toc {} lt {}, measured toc {} lt {}",
            d.step_id, d.expected_toc, d.expected_lt, d.measured_toc, d.measured_lt
        );
    }
    for e in &r.agent_errors {
        println!("agent error: {e}");
    }
    Ok(())
}

fn replay(a: ReplayArgs) -> Result<()> {
    let spec: GenesisSpec = read_json(&a.net)?;
    let blocks = read_block_log(&a.blocks)?;
    let net = Network::replay(&spec, &blocks)?;
    let digest = net.state_digest();
    println!("replayed {} blocks", blocks.len());
    for id in net.channel_ids() {
        println!("{id}: height {}", net.height(id)?);
    }
    println!("state digest {}", digest.to_hex());
    if let Some(hex) = a.expect_digest {
        let want = Digest::from_hex(hex.trim()).context("malformed digest")?;
        if want != digest {
            bail!("state digest mismatch: expected {hex}");
        }
    }
    Ok(())
}

fn cost(cmd: CostCommand) -> Result<()> {
    match cmd {
        CostCommand::Sweep { scenario, kind, fix, vary, out } => {
            let fixed = parse_fixed(&fix)?;
            let (param, range) = parse_vary(&vary)?;
            let csv = costmodel::sweep_csv(&costmodel::sweep(scenario, kind, fixed, param, range));
            match out {
                Some(path) => std::fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{csv}"),
            }
        }
        CostCommand::Headlines => {
            for h in costmodel::headlines() {
                println!(
                    "{}: conventional {} proposed {} reduction {:.2}%",
                    h.label,
                    costmodel::format_cost(h.conventional),
                    costmodel::format_cost(h.proposed),
                    100.0 * costmodel::to_f64(h.reduction)
                );
            }
        }
        CostCommand::Table { scenario, mode, fix } => {
            let p = parse_fixed(&fix)?;
            let table = costmodel::StepTable::new(scenario, mode.method());
            for step in &table.steps {
                println!(
                    "{:<8} toc {:>6} lt {:>6}  {}",
                    step.id,
                    costmodel::format_cost(step.toc(&p)),
                    costmodel::format_cost(step.lt(&p)),
                    step.description
                );
            }
            println!(
                "total    toc {:>6} lt {:>6}",
                costmodel::format_cost(costmodel::toc(&table, &p)),
                costmodel::format_cost(costmodel::lt(&table, &p))
            );
        }
    }
    Ok(())
}

/// An update file may hold a bare update or a signed envelope.
fn read_update(path: &std::path::Path) -> Result<ConfigUpdate> {
    let value: serde_json::Value = read_json(path)?;
    if value.get("update").is_some() {
        Ok(serde_json::from_value::<Envelope>(value)?.update)
    } else {
        Ok(serde_json::from_value(value)?)
    }
}

fn configtx_cmd(cmd: ConfigtxCommand) -> Result<()> {
    match cmd {
        ConfigtxCommand::Compute { base, ops, out } => {
            let base: ChannelConfig = read_json(&base)?;
            let ops: Vec<ConfigOp> = read_json(&ops)?;
            write_canonical(&out, &configtx::compute_update(&base, &ops)?)?;
        }
        ConfigtxCommand::Sign { update, org, seed, out } => {
            let update = read_update(&update)?;
            let identity = SigningIdentity::derive(&org, seed);
            write_canonical(&out, &configtx::sign_update(&identity, &update))?;
        }
        ConfigtxCommand::Assemble { update, config, signatures, out } => {
            let update = read_update(&update)?;
            let config: ChannelConfig = read_json(&config)?;
            let sigs = signatures.iter().map(|p| read_json::<ConfigSignature>(p)).collect::<Result<Vec<_>>>()?;
            let envelope = configtx::assemble_envelope(update, sigs, &config.msps)?;
            println!("{} signatures", envelope.signatures.len());
            write_canonical(&out, &envelope)?;
        }
        ConfigtxCommand::Apply { base, update, out } => {
            let base: ChannelConfig = read_json(&base)?;
            let next = configtx::apply_update(&base, &read_update(&update)?)?;
            println!("{} at version {}", next.channel_id, next.config_version);
            write_canonical(&out, &next)?;
        }
    }
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let spec = match &a.net {
        Some(path) => read_json(path)?,
        None => a.shape.genesis()?,
    };
    let sim = Simulation::with_agents(&spec, &AgentConfig::default())?;
    for org in &a.orgs {
        sim.network().org(org)?;
    }
    let tokens: BTreeMap<String, OrgId> = match (&a.token, a.orgs.as_slice()) {
        (Some(token), [org]) => [(token.clone(), org.clone())].into(),
        (Some(_), _) => bail!("--token applies to a single served org"),
        (None, orgs) => orgs.iter().map(|o| (default_token(o), o.clone())).collect(),
    };
    let state = ApiState::new(Arc::new(Mutex::new(sim)), tokens, a.export.clone());
    let addr = format!("{}:{}", a.host, a.port);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr).await.with_context(|| format!("binding {addr}"))?;
        println!("serving {} on http://{}", a.orgs.iter().map(OrgId::as_str).collect::<Vec<_>>().join(","), listener.local_addr()?);
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
