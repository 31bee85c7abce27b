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

//! Deterministic in-process consortium network.
//!
//! Every channel has its own ledger, world state and configuration.
//! Transactions follow execute-order-validate: an invocation is executed
//! against the current world state producing a read/write set, endorsed by
//! a majority of the channel members, ordered into the next block (one
//! transaction per block), and validated on commit. Only valid transactions
//! touch the world state.
//!
//! Config transactions are checked before ordering; a rejected envelope
//! never reaches the ledger.

mod config;
mod genesis;
pub mod ledger;
mod lifecycle;
pub mod state;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use self::config::{ChannelConfig, ChannelKind, ModPolicy};
pub use self::genesis::{ChaincodeSpec, ChannelSpec, GenesisError, GenesisSpec, OrgSpec, OPS_CHANNEL, SYSTEM_CHANNEL};
pub use self::ledger::{
    Block, ChaincodeEvent, DeliveredEvent, Endorsement, GenesisConfig, Invocation, KvRead, KvWrite, Payload, Receipt,
    RwSet, Transaction, TxKind, Validity,
};
pub use self::lifecycle::{
    ChaincodeDefinition, EndorsementPolicy, LifecycleChaincode, LifecycleState, SourceRef, COMMIT_EVENT,
    LIFECYCLE_NAMESPACE,
};
pub use self::state::{Chaincode, ChaincodeError, ErrorKind, KvChaincode, Stub, VersionedValue, WorldState};

use crate::codec::{to_canonical_string, Digest};
use crate::configtx::{self, ConfigTxError, Envelope};
use crate::identity::{majority, ChannelId, MspDescriptor, OrgId, PeerId, SigningIdentity};

pub const PEERS_PER_ORG: usize = 2;

#[derive(Clone, Debug)]
pub struct Org {
    pub org_id: OrgId,
    pub msp_descriptor: MspDescriptor,
    pub has_orderer: bool,
    pub peer_ids: Vec<PeerId>,
    identity: SigningIdentity,
}

impl Org {
    fn new(org_id: OrgId, has_orderer: bool, seed: u64) -> Self {
        let identity = SigningIdentity::derive(&org_id, seed);
        let peer_ids = (0..PEERS_PER_ORG).map(|i| PeerId::new(format!("peer{i}.{org_id}"))).collect();
        Org { msp_descriptor: identity.msp(), org_id, has_orderer, peer_ids, identity }
    }

    pub fn identity(&self) -> &SigningIdentity {
        &self.identity
    }
}

/// Node-local state of one peer.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeerState {
    pub org_id: OrgId,
    pub joined: BTreeSet<ChannelId>,
    pub installed: BTreeSet<Digest>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum NodeOpKind {
    JoinChannel { channel_id: ChannelId },
    InstallPackage { digest: Digest },
}

/// An operation an organization performed against one peer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeOperation {
    pub actor: OrgId,
    pub peer: PeerId,
    pub kind: NodeOpKind,
}

#[derive(Clone, Debug)]
struct Channel {
    config: ChannelConfig,
    blocks: Vec<Block>,
    world: WorldState,
    tx_ids: BTreeSet<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum NetError {
    #[error("unknown channel {0}")]
    UnknownChannel(ChannelId),
    #[error("unknown organization {0}")]
    UnknownOrg(OrgId),
    #[error("unknown peer {0}")]
    UnknownPeer(PeerId),
    #[error("organization {0} already exists")]
    DuplicateOrg(OrgId),
    #[error("{org} is not a member of {channel}")]
    NotMember { org: OrgId, channel: ChannelId },
    #[error("no peer of {org} has joined {channel}")]
    NotJoined { org: OrgId, channel: ChannelId },
    #[error("{actor} may not operate peer {peer}")]
    PermissionDenied { actor: OrgId, peer: PeerId },
    #[error("malformed transaction: {0}")]
    Malformed(String),
    #[error("chaincode {0} is not committed on this channel")]
    ChaincodeNotCommitted(String),
    #[error("chaincode error: {0}")]
    Chaincode(ChaincodeError),
    #[error("config update rejected: {0}")]
    Config(ConfigTxError),
    #[error("config update rejected: {have} valid signatures, {need} required")]
    InsufficientSignatures { have: usize, need: usize },
    #[error("transaction {tx_id} invalidated: {reason}")]
    TxInvalid { tx_id: String, reason: String },
    #[error("subscription start {from} beyond channel height {height}")]
    BeyondHeight { from: u64, height: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ReplayError {
    #[error(transparent)]
    Genesis(#[from] GenesisError),
    #[error("block {number} of {channel} is out of order")]
    OutOfOrder { channel: ChannelId, number: u64 },
    #[error("block {number} of {channel} does not chain to its parent")]
    BrokenChain { channel: ChannelId, number: u64 },
    #[error("block {number} of {channel} diverges from the re-validated block")]
    Diverged { channel: ChannelId, number: u64 },
    #[error("block {number} of {channel}: {source}")]
    Rejected { channel: ChannelId, number: u64, source: NetError },
}

/// The simulated network: organizations, their peers, and every channel.
#[derive(Clone)]
pub struct Network {
    seed: u64,
    orgs: BTreeMap<OrgId, Org>,
    peers: BTreeMap<PeerId, PeerState>,
    channels: BTreeMap<ChannelId, Channel>,
    natives: BTreeMap<String, Arc<dyn Chaincode>>,
    commit_log: Vec<(ChannelId, u64)>,
    node_ops: Vec<NodeOperation>,
}

impl fmt::Debug for Network {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Network")
            .field("seed", &self.seed)
            .field("orgs", &self.orgs.keys().collect::<Vec<_>>())
            .field("channels", &self.channels.keys().collect::<Vec<_>>())
            .finish_non_exhaustive()
    }
}

#[derive(Serialize)]
struct ChannelDigestView<'a> {
    config: &'a ChannelConfig,
    height: u64,
    head: Digest,
    world: &'a WorldState,
}

#[derive(Serialize)]
struct SliceView<'a> {
    config: &'a ChannelConfig,
    world: BTreeMap<&'a str, BTreeMap<&'a str, &'a str>>,
}

impl Network {
    /// Build a network from its genesis specification. Deterministic in the
    /// spec, including its seed.
    pub fn create(spec: &GenesisSpec) -> Result<Network, GenesisError> {
        spec.validate()?;
        let mut natives: BTreeMap<String, Arc<dyn Chaincode>> = BTreeMap::new();
        natives.insert(LIFECYCLE_NAMESPACE.into(), Arc::new(LifecycleChaincode));
        for (name, handler) in crate::opssc::native_chaincodes() {
            natives.insert(name.into(), handler);
        }
        let mut net = Network {
            seed: spec.seed,
            orgs: BTreeMap::new(),
            peers: BTreeMap::new(),
            channels: BTreeMap::new(),
            natives,
            commit_log: Vec::new(),
            node_ops: Vec::new(),
        };
        for org in &spec.orgs {
            net.insert_org(Org::new(org.id.clone(), org.has_orderer, spec.seed));
        }
        let configs: Vec<ChannelConfig> = spec.channels.iter().map(|c| net.genesis_config(c)).collect();
        for config in &configs {
            let mut writes = Vec::new();
            let chaincodes: Vec<(&str, &str)> = match config.kind {
                ChannelKind::Ops => crate::opssc::OPSSC_CHAINCODES.to_vec(),
                ChannelKind::Application => spec
                    .chaincodes
                    .iter()
                    .filter(|cc| cc.channel == config.channel_id)
                    .map(|cc| (cc.name.as_str(), cc.version.as_str()))
                    .collect(),
                ChannelKind::System => Vec::new(),
            };
            for (name, version) in &chaincodes {
                let def = ChaincodeDefinition {
                    name: (*name).into(),
                    version: (*version).into(),
                    sequence: 1,
                    endorsement_policy: EndorsementPolicy::MajorityOfMembers,
                    source_ref: crate::repo::release(name, version).0,
                };
                writes.extend(genesis_lifecycle_writes(config, &def));
            }
            if config.kind == ChannelKind::Ops {
                writes.extend(crate::opssc::genesis_writes(spec, &configs));
            }
            net.create_channel(GenesisConfig { config: config.clone(), writes });
            for org in &config.member_orgs {
                net.join_peer(org, &config.channel_id).expect("genesis members exist");
                for (name, version) in &chaincodes {
                    let bytes = crate::repo::release(name, version).1;
                    net.install_package(org, &bytes).expect("genesis members exist");
                }
            }
        }
        Ok(net)
    }

    fn genesis_config(&self, spec: &ChannelSpec) -> ChannelConfig {
        let members: BTreeSet<OrgId> = spec.members.iter().cloned().collect();
        ChannelConfig {
            channel_id: spec.id.clone(),
            kind: spec.kind,
            config_version: 0,
            consortium_orgs: if spec.kind == ChannelKind::System { members.clone() } else { BTreeSet::new() },
            orderer_orgs: members.iter().filter(|o| self.orgs[*o].has_orderer).cloned().collect(),
            msps: members.iter().map(|o| (o.clone(), self.orgs[o].msp_descriptor.clone())).collect(),
            member_orgs: members,
            mod_policy: ModPolicy::MajorityOfMembers,
        }
    }

    fn insert_org(&mut self, org: Org) {
        for peer in &org.peer_ids {
            self.peers.insert(peer.clone(), PeerState { org_id: org.org_id.clone(), ..Default::default() });
        }
        self.orgs.insert(org.org_id.clone(), org);
    }

    fn create_channel(&mut self, genesis: GenesisConfig) {
        let channel_id = genesis.config.channel_id.clone();
        let tx_id = Digest::of_parts(&[b"genesis", channel_id.as_str().as_bytes()]).to_hex();
        let mut world = WorldState::default();
        world.apply(&genesis.writes, 0);
        let tx = Transaction {
            tx_id: tx_id.clone(),
            channel_id: channel_id.clone(),
            kind: TxKind::Config,
            creator: None,
            creator_signature: None,
            payload: Payload::Genesis(genesis.clone()),
            endorsements: Vec::new(),
            validity: Validity::Valid,
        };
        let block = Block {
            block_number: 0,
            channel_id: channel_id.clone(),
            parent_digest: Digest::ZERO,
            transactions: alloc::vec![tx],
            events: Vec::new(),
        };
        let mut tx_ids = BTreeSet::new();
        tx_ids.insert(tx_id);
        self.channels.insert(
            channel_id.clone(),
            Channel { config: genesis.config, blocks: alloc::vec![block], world, tx_ids },
        );
        self.commit_log.push((channel_id, 0));
    }

    /// Synthesize identity and peers for an organization that is not yet a
    /// member of any channel.
    pub fn register_org(&mut self, org_id: &OrgId, has_orderer: bool) -> Result<&Org, NetError> {
        if self.orgs.contains_key(org_id) {
            return Err(NetError::DuplicateOrg(org_id.clone()));
        }
        self.insert_org(Org::new(org_id.clone(), has_orderer, self.seed));
        Ok(&self.orgs[org_id])
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn org(&self, org_id: &OrgId) -> Result<&Org, NetError> {
        self.orgs.get(org_id).ok_or_else(|| NetError::UnknownOrg(org_id.clone()))
    }

    pub fn orgs(&self) -> impl Iterator<Item = &Org> {
        self.orgs.values()
    }

    pub fn identity(&self, org_id: &OrgId) -> Result<&SigningIdentity, NetError> {
        self.org(org_id).map(Org::identity)
    }

    pub fn channel_ids(&self) -> impl Iterator<Item = &ChannelId> {
        self.channels.keys()
    }

    fn channel(&self, channel_id: &ChannelId) -> Result<&Channel, NetError> {
        self.channels.get(channel_id).ok_or_else(|| NetError::UnknownChannel(channel_id.clone()))
    }

    /// Snapshot of the channel's current configuration.
    pub fn fetch_config_block(&self, channel_id: &ChannelId) -> Result<ChannelConfig, NetError> {
        self.channel(channel_id).map(|c| c.config.clone())
    }

    pub fn height(&self, channel_id: &ChannelId) -> Result<u64, NetError> {
        self.channel(channel_id).map(|c| c.blocks.len() as u64)
    }

    pub fn blocks(&self, channel_id: &ChannelId) -> Result<&[Block], NetError> {
        self.channel(channel_id).map(|c| c.blocks.as_slice())
    }

    pub fn world_state(&self, channel_id: &ChannelId) -> Result<&WorldState, NetError> {
        self.channel(channel_id).map(|c| &c.world)
    }

    pub fn peer(&self, peer_id: &PeerId) -> Result<&PeerState, NetError> {
        self.peers.get(peer_id).ok_or_else(|| NetError::UnknownPeer(peer_id.clone()))
    }

    pub fn peers(&self) -> impl Iterator<Item = (&PeerId, &PeerState)> {
        self.peers.iter()
    }

    pub fn has_joined(&self, org_id: &OrgId, channel_id: &ChannelId) -> bool {
        self.orgs.get(org_id).is_some_and(|org| {
            org.peer_ids.iter().any(|p| self.peers.get(p).is_some_and(|s| s.joined.contains(channel_id)))
        })
    }

    /// Channels all of the org's peers have joined.
    pub fn joined_channels(&self, org_id: &OrgId) -> BTreeSet<ChannelId> {
        self.channels.keys().filter(|c| self.has_joined(org_id, c)).cloned().collect()
    }

    pub fn installed_packages(&self, org_id: &OrgId) -> BTreeSet<Digest> {
        let Some(org) = self.orgs.get(org_id) else {
            return BTreeSet::new();
        };
        org.peer_ids.iter().filter_map(|p| self.peers.get(p)).flat_map(|s| s.installed.iter().copied()).collect()
    }

    pub fn node_operations(&self) -> &[NodeOperation] {
        &self.node_ops
    }

    // ---- node operations ----

    /// Join one peer to a channel on behalf of `actor`, who must own it.
    pub fn join_peer_as(&mut self, actor: &OrgId, peer_id: &PeerId, channel_id: &ChannelId) -> Result<(), NetError> {
        let owner = self.peer(peer_id)?.org_id.clone();
        if owner != *actor {
            return Err(NetError::PermissionDenied { actor: actor.clone(), peer: peer_id.clone() });
        }
        let channel = self.channel(channel_id)?;
        if !channel.config.is_member(actor) {
            return Err(NetError::NotMember { org: actor.clone(), channel: channel_id.clone() });
        }
        self.peers.get_mut(peer_id).expect("checked").joined.insert(channel_id.clone());
        self.node_ops.push(NodeOperation {
            actor: actor.clone(),
            peer: peer_id.clone(),
            kind: NodeOpKind::JoinChannel { channel_id: channel_id.clone() },
        });
        Ok(())
    }

    /// Join all of the org's peers to a channel it is a member of. The peers
    /// hold the channel ledger from block 0. Idempotent.
    pub fn join_peer(&mut self, org_id: &OrgId, channel_id: &ChannelId) -> Result<(), NetError> {
        let peers = self.org(org_id)?.peer_ids.clone();
        for peer in &peers {
            self.join_peer_as(org_id, peer, channel_id)?;
        }
        Ok(())
    }

    pub fn install_package_as(&mut self, actor: &OrgId, peer_id: &PeerId, package: &[u8]) -> Result<Digest, NetError> {
        let state = self.peers.get_mut(peer_id).ok_or_else(|| NetError::UnknownPeer(peer_id.clone()))?;
        if state.org_id != *actor {
            return Err(NetError::PermissionDenied { actor: actor.clone(), peer: peer_id.clone() });
        }
        let digest = Digest::of_bytes(package);
        state.installed.insert(digest);
        self.node_ops.push(NodeOperation {
            actor: actor.clone(),
            peer: peer_id.clone(),
            kind: NodeOpKind::InstallPackage { digest },
        });
        Ok(digest)
    }

    /// Install a chaincode package on all of the org's peers.
    pub fn install_package(&mut self, org_id: &OrgId, package: &[u8]) -> Result<Digest, NetError> {
        let peers = self.org(org_id)?.peer_ids.clone();
        let mut digest = Digest::of_bytes(package);
        for peer in &peers {
            digest = self.install_package_as(org_id, peer, package)?;
        }
        Ok(digest)
    }

    // ---- transactions ----

    fn handler(&self, channel: &Channel, namespace: &str) -> Result<Arc<dyn Chaincode>, NetError> {
        if namespace != LIFECYCLE_NAMESPACE
            && channel.world.get(LIFECYCLE_NAMESPACE, &lifecycle::committed_key(namespace)).is_none()
        {
            return Err(NetError::ChaincodeNotCommitted(namespace.into()));
        }
        Ok(self.natives.get(namespace).cloned().unwrap_or_else(|| Arc::new(KvChaincode)))
    }

    #[allow(clippy::too_many_arguments)]
    fn execute(
        &self,
        channel: &Channel,
        creator: &OrgId,
        tx_id: &str,
        namespace: &str,
        operation: &str,
        args: &Value,
    ) -> Result<(Value, RwSet, Vec<ChaincodeEvent>), NetError> {
        if !channel.config.is_member(creator) {
            return Err(NetError::NotMember { org: creator.clone(), channel: channel.config.channel_id.clone() });
        }
        let handler = self.handler(channel, namespace)?;
        let mut stub = Stub::new(&channel.world, &channel.config, namespace, tx_id, creator, channel.blocks.len() as u64);
        let response = handler.invoke(&mut stub, operation, args).map_err(NetError::Chaincode)?;
        let (rwset, events) = stub.finish();
        Ok((response, rwset, events))
    }

    /// Execute an invocation and wrap the result in an unendorsed
    /// transaction signed by `creator`.
    pub fn propose(
        &self,
        channel_id: &ChannelId,
        creator: &OrgId,
        namespace: &str,
        operation: &str,
        args: Value,
    ) -> Result<Transaction, NetError> {
        let channel = self.channel(channel_id)?;
        let identity = self.identity(creator)?;
        let args_json = to_canonical_string(&args).map_err(|e| NetError::Malformed(e.to_string()))?;
        let height = channel.blocks.len() as u64;
        let tx_id = Digest::of_parts(&[
            channel_id.as_str().as_bytes(),
            creator.as_str().as_bytes(),
            namespace.as_bytes(),
            operation.as_bytes(),
            args_json.as_bytes(),
            &height.to_be_bytes(),
        ])
        .to_hex();
        let (response, rwset, events) = self.execute(channel, creator, &tx_id, namespace, operation, &args)?;
        let mut tx = Transaction {
            tx_id,
            channel_id: channel_id.clone(),
            kind: TxKind::Invoke,
            creator: Some(creator.clone()),
            creator_signature: None,
            payload: Payload::Invoke(Invocation {
                namespace: namespace.into(),
                operation: operation.into(),
                args,
                rwset,
                response,
                events,
            }),
            endorsements: Vec::new(),
            validity: Validity::Pending,
        };
        let bytes = tx.proposal_bytes().ok_or_else(|| NetError::Malformed("unencodable proposal".into()))?;
        tx.creator_signature = Some(identity.sign(&bytes));
        Ok(tx)
    }

    /// Have `org`'s peer re-execute the invocation and, if it reproduces the
    /// recorded result, sign it.
    pub fn endorse(&self, org_id: &OrgId, tx: &mut Transaction) -> Result<(), NetError> {
        let channel = self.channel(&tx.channel_id)?;
        if !self.has_joined(org_id, &tx.channel_id) {
            return Err(NetError::NotJoined { org: org_id.clone(), channel: tx.channel_id.clone() });
        }
        let inv = tx.invocation().ok_or_else(|| NetError::Malformed("only invocations are endorsed".into()))?;
        let creator = tx.creator.as_ref().ok_or_else(|| NetError::Malformed("missing creator".into()))?;
        let (response, rwset, events) =
            self.execute(channel, creator, &tx.tx_id, &inv.namespace, &inv.operation, &inv.args)?;
        if response != inv.response || rwset != inv.rwset || events != inv.events {
            return Err(NetError::Malformed("endorser produced a different result".into()));
        }
        let bytes = tx.response_bytes().ok_or_else(|| NetError::Malformed("unencodable response".into()))?;
        let signature = self.identity(org_id)?.sign(&bytes);
        tx.endorsements.retain(|e| e.org_id != *org_id);
        tx.endorsements.push(Endorsement { org_id: org_id.clone(), signature });
        tx.endorsements.sort_by(|a, b| a.org_id.cmp(&b.org_id));
        Ok(())
    }

    /// Members whose peers can endorse on the channel: the creator first,
    /// then the rest in id order, up to a majority.
    fn select_endorsers(&self, channel_id: &ChannelId, creator: &OrgId) -> Result<Vec<OrgId>, NetError> {
        let config = &self.channel(channel_id)?.config;
        let need = majority(config.member_orgs.len());
        let joined = |o: &&OrgId| self.has_joined(o, channel_id);
        let mut picked: Vec<OrgId> = config.member_orgs.iter().filter(|o| *o == creator).filter(joined).cloned().collect();
        picked.extend(config.member_orgs.iter().filter(|o| *o != creator).filter(joined).cloned());
        picked.truncate(need);
        Ok(picked)
    }

    /// Execute, endorse, order and validate an invocation. An invalidated
    /// transaction is still recorded in its block but reported as an error.
    pub fn invoke(
        &mut self,
        channel_id: &ChannelId,
        creator: &OrgId,
        namespace: &str,
        operation: &str,
        args: Value,
    ) -> Result<Receipt, NetError> {
        let mut tx = self.propose(channel_id, creator, namespace, operation, args)?;
        for org in self.select_endorsers(channel_id, creator)? {
            self.endorse(&org, &mut tx)?;
        }
        let receipt = self.submit_transaction(channel_id, tx)?;
        match &receipt.validity {
            Validity::Invalid { reason } => Err(NetError::TxInvalid { tx_id: receipt.tx_id, reason: reason.clone() }),
            _ => Ok(receipt),
        }
    }

    /// Execute a read-only invocation on `org`'s own peer.
    pub fn query(
        &self,
        channel_id: &ChannelId,
        org_id: &OrgId,
        namespace: &str,
        operation: &str,
        args: Value,
    ) -> Result<Value, NetError> {
        let channel = self.channel(channel_id)?;
        if !self.has_joined(org_id, channel_id) {
            return Err(NetError::NotJoined { org: org_id.clone(), channel: channel_id.clone() });
        }
        self.execute(channel, org_id, "query", namespace, operation, &args).map(|(response, _, _)| response)
    }

    fn validate_invoke(&self, channel: &Channel, tx: &Transaction) -> Validity {
        let invalid = |reason: &str| Validity::Invalid { reason: reason.into() };
        let config = &channel.config;
        let (Some(inv), Some(creator), Some(sig)) = (tx.invocation(), &tx.creator, &tx.creator_signature) else {
            return invalid("unsigned");
        };
        let creator_ok = config.is_member(creator)
            && config.msp(creator).zip(tx.proposal_bytes()).is_some_and(|(msp, bytes)| msp.verify(&bytes, sig));
        if !creator_ok {
            return invalid("creator");
        }
        if self.handler(channel, &inv.namespace).is_err() {
            return invalid("namespace");
        }
        let Some(bytes) = tx.response_bytes() else {
            return invalid("encoding");
        };
        let endorsers: BTreeSet<&OrgId> = tx
            .endorsements
            .iter()
            .filter(|e| config.is_member(&e.org_id))
            .filter(|e| config.msp(&e.org_id).is_some_and(|m| m.verify(&bytes, &e.signature)))
            .map(|e| &e.org_id)
            .collect();
        if endorsers.len() < majority(config.member_orgs.len()) {
            return invalid("endorsement");
        }
        if !channel.world.reads_current(&inv.rwset.reads) {
            return invalid("mvcc");
        }
        Validity::Valid
    }

    fn validate_config(&self, channel: &Channel, envelope: &Envelope) -> Result<ChannelConfig, NetError> {
        let config = &channel.config;
        let update = &envelope.update;
        if update.channel_id != config.channel_id {
            return Err(NetError::Config(ConfigTxError::ChannelMismatch {
                expected: config.channel_id.clone(),
                found: update.channel_id.clone(),
            }));
        }
        if update.base_version != config.config_version {
            return Err(NetError::Config(ConfigTxError::StaleBase {
                expected: config.config_version,
                found: update.base_version,
            }));
        }
        let governing = config.governing_orgs();
        let mut signers = BTreeSet::new();
        for sig in &envelope.signatures {
            let msp = governing
                .contains(&sig.org_id)
                .then(|| config.msp(&sig.org_id))
                .flatten()
                .ok_or_else(|| NetError::Config(ConfigTxError::UnknownSigner(sig.org_id.clone())))?;
            if !configtx::verify_signature(msp, update, sig) {
                return Err(NetError::Config(ConfigTxError::BadSignature(sig.org_id.clone())));
            }
            signers.insert(&sig.org_id);
        }
        let need = majority(governing.len());
        if signers.len() < need {
            return Err(NetError::InsufficientSignatures { have: signers.len(), need });
        }
        configtx::apply_update(config, update).map_err(NetError::Config)
    }

    /// Order `tx` into the next block of the channel and validate it.
    pub fn submit_transaction(&mut self, channel_id: &ChannelId, mut tx: Transaction) -> Result<Receipt, NetError> {
        let channel = self.channel(channel_id)?;
        if tx.channel_id != *channel_id {
            return Err(NetError::Malformed(format!("transaction targets {}", tx.channel_id)));
        }
        if channel.tx_ids.contains(&tx.tx_id) {
            return Err(NetError::Malformed(format!("duplicate tx id {}", tx.tx_id)));
        }
        let (validity, next_config) = match (&tx.kind, &tx.payload) {
            (TxKind::Invoke, Payload::Invoke(_)) => (self.validate_invoke(channel, &tx), None),
            (TxKind::Config, Payload::ConfigUpdate(envelope)) => {
                (Validity::Valid, Some(self.validate_config(channel, envelope)?))
            }
            (_, Payload::Genesis(_)) => return Err(NetError::Malformed("genesis transactions cannot be submitted".into())),
            _ => return Err(NetError::Malformed("transaction kind does not match payload".into())),
        };
        tx.validity = validity.clone();
        let block_number = channel.blocks.len() as u64;
        let events = match (&validity, &tx.payload) {
            (Validity::Valid, Payload::Invoke(inv)) => inv.events.clone(),
            _ => Vec::new(),
        };
        let response = tx.invocation().map_or(Value::Null, |inv| inv.response.clone());
        let tx_id = tx.tx_id.clone();
        let channel = self.channels.get_mut(channel_id).expect("checked");
        if let (Validity::Valid, Payload::Invoke(inv)) = (&validity, &tx.payload) {
            channel.world.apply(&inv.rwset.writes, block_number);
        }
        if let Some(config) = next_config {
            channel.config = config;
        }
        let parent_digest = channel.blocks.last().expect("genesis block").digest();
        channel.tx_ids.insert(tx_id.clone());
        channel.blocks.push(Block {
            block_number,
            channel_id: channel_id.clone(),
            parent_digest,
            transactions: alloc::vec![tx],
            events,
        });
        self.commit_log.push((channel_id.clone(), block_number));
        Ok(Receipt { tx_id, block_number, validity, response })
    }

    /// Submit a signed config envelope. Applied iff it is based on the
    /// current version and carries valid signatures from a majority of the
    /// governing organizations; otherwise nothing changes.
    pub fn apply_config_envelope(&mut self, channel_id: &ChannelId, envelope: Envelope) -> Result<u64, NetError> {
        let channel = self.channel(channel_id)?;
        let tx_id = Digest::of_parts(&[
            b"config",
            channel_id.as_str().as_bytes(),
            &envelope.update.signing_bytes(),
            &(channel.blocks.len() as u64).to_be_bytes(),
        ])
        .to_hex();
        let tx = Transaction {
            tx_id,
            channel_id: channel_id.clone(),
            kind: TxKind::Config,
            creator: None,
            creator_signature: None,
            payload: Payload::ConfigUpdate(envelope),
            endorsements: Vec::new(),
            validity: Validity::Pending,
        };
        self.submit_transaction(channel_id, tx)?;
        Ok(self.channel(channel_id)?.config.config_version)
    }

    // ---- lifecycle ----

    pub fn approve_definition(
        &mut self,
        org_id: &OrgId,
        channel_id: &ChannelId,
        definition: &ChaincodeDefinition,
    ) -> Result<Receipt, NetError> {
        let args = serde_json::json!({ "definition": definition });
        self.invoke(channel_id, org_id, LIFECYCLE_NAMESPACE, "approve", args)
    }

    pub fn commit_definition(
        &mut self,
        org_id: &OrgId,
        channel_id: &ChannelId,
        definition: &ChaincodeDefinition,
    ) -> Result<Receipt, NetError> {
        let args = serde_json::json!({ "definition": definition });
        self.invoke(channel_id, org_id, LIFECYCLE_NAMESPACE, "commit", args)
    }

    pub fn committed_definition(&self, channel_id: &ChannelId, name: &str) -> Result<Option<ChaincodeDefinition>, NetError> {
        let world = &self.channel(channel_id)?.world;
        Ok(world
            .get(LIFECYCLE_NAMESPACE, &lifecycle::committed_key(name))
            .and_then(|v| crate::codec::from_str(&v.value).ok()))
    }

    /// Latest committed definition of every chaincode on the channel.
    pub fn committed_definitions(&self, channel_id: &ChannelId) -> Result<Vec<ChaincodeDefinition>, NetError> {
        let world = &self.channel(channel_id)?.world;
        Ok(world
            .range(LIFECYCLE_NAMESPACE, "committed/")
            .filter_map(|(_, v)| crate::codec::from_str(&v.value).ok())
            .collect())
    }

    pub fn lifecycle_state(&self, channel_id: &ChannelId, name: &str) -> Result<LifecycleState, NetError> {
        let channel = self.channel(channel_id)?;
        let prefix = lifecycle::approval_prefix(name);
        let approvals = channel
            .world
            .range(LIFECYCLE_NAMESPACE, &prefix)
            .filter_map(|(k, v)| {
                let org = OrgId::from(&k[prefix.len()..]);
                crate::codec::from_str(&v.value).ok().map(|d| (org, d))
            })
            .collect();
        let installs = channel
            .config
            .member_orgs
            .iter()
            .map(|o| (o.clone(), self.installed_packages(o)))
            .collect();
        Ok(LifecycleState { committed_definition: self.committed_definition(channel_id, name)?, approvals, installs })
    }

    // ---- delivery ----

    /// Chaincode events of valid transactions from `from_block` on, in block
    /// order then transaction order.
    pub fn subscribe_events(&self, channel_id: &ChannelId, from_block: u64) -> Result<Vec<DeliveredEvent>, NetError> {
        let channel = self.channel(channel_id)?;
        let height = channel.blocks.len() as u64;
        if from_block > height {
            return Err(NetError::BeyondHeight { from: from_block, height });
        }
        Ok(channel.blocks[from_block as usize..]
            .iter()
            .flat_map(|b| b.events.iter().map(|e| DeliveredEvent { block_number: b.block_number, event: e.clone() }))
            .collect())
    }

    /// Every block of every channel in the order they were committed.
    pub fn export_blocks(&self) -> Vec<&Block> {
        self.commit_log
            .iter()
            .map(|(c, n)| &self.channels[c].blocks[*n as usize])
            .collect()
    }

    // ---- digests ----

    /// Digest over channel configurations, ledgers and world states
    /// (lifecycle state included). Everything here is reproducible from the
    /// block log.
    pub fn state_digest(&self) -> Digest {
        let view: BTreeMap<&ChannelId, ChannelDigestView<'_>> = self
            .channels
            .iter()
            .map(|(id, c)| {
                (
                    id,
                    ChannelDigestView {
                        config: &c.config,
                        height: c.blocks.len() as u64,
                        head: c.blocks.last().expect("genesis block").digest(),
                        world: &c.world,
                    },
                )
            })
            .collect();
        Digest::of_canonical(&view).expect("state has no floats")
    }

    /// Digest over peer-local state: joined channels and installed packages.
    pub fn node_digest(&self) -> Digest {
        Digest::of_canonical(&self.peers).expect("peer state has no floats")
    }

    /// Digest of one channel's configuration and world-state values,
    /// independent of how and in which blocks they were produced.
    pub fn channel_slice_digest(&self, channel_id: &ChannelId) -> Result<Digest, NetError> {
        let channel = self.channel(channel_id)?;
        let view = SliceView { config: &channel.config, world: channel.world.values() };
        Ok(Digest::of_canonical(&view).expect("state has no floats"))
    }

    // ---- replay ----

    /// Rebuild a network from its genesis spec and an exported block log,
    /// re-validating every transaction. Peer-local state is not part of the
    /// log and is left at its genesis value.
    pub fn replay<'a, I>(spec: &GenesisSpec, blocks: I) -> Result<Network, ReplayError>
    where
        I: IntoIterator<Item = &'a Block>,
    {
        let mut net = Network::create(spec)?;
        for block in blocks {
            net.replay_block(block)?;
        }
        Ok(net)
    }

    fn replay_block(&mut self, block: &Block) -> Result<(), ReplayError> {
        let channel_id = &block.channel_id;
        let number = block.block_number;
        let rejected = |source| ReplayError::Rejected { channel: channel_id.clone(), number, source };
        let channel = self.channel(channel_id).map_err(rejected)?;
        let height = channel.blocks.len() as u64;
        if number == 0 && height >= 1 {
            // Genesis blocks are rebuilt by `create`; they must agree.
            if channel.blocks[0] != *block {
                return Err(ReplayError::Diverged { channel: channel_id.clone(), number });
            }
            return Ok(());
        }
        if number != height {
            return Err(ReplayError::OutOfOrder { channel: channel_id.clone(), number });
        }
        if block.parent_digest != channel.blocks.last().expect("genesis block").digest() {
            return Err(ReplayError::BrokenChain { channel: channel_id.clone(), number });
        }
        let [tx] = block.transactions.as_slice() else {
            return Err(rejected(NetError::Malformed("blocks hold exactly one transaction".into())));
        };
        let mut unvalidated = tx.clone();
        unvalidated.validity = Validity::Pending;
        self.submit_transaction(channel_id, unvalidated).map_err(rejected)?;
        let rebuilt = self.channels[channel_id].blocks.last().expect("just pushed");
        if rebuilt != block {
            return Err(ReplayError::Diverged { channel: channel_id.clone(), number });
        }
        Ok(())
    }
}

fn genesis_lifecycle_writes(config: &ChannelConfig, def: &ChaincodeDefinition) -> Vec<KvWrite> {
    let value = to_canonical_string(def).expect("definitions have no floats");
    let mut writes = alloc::vec![KvWrite {
        namespace: LIFECYCLE_NAMESPACE.into(),
        key: lifecycle::committed_key(&def.name),
        value: Some(value.clone()),
    }];
    writes.extend(config.member_orgs.iter().map(|org| KvWrite {
        namespace: LIFECYCLE_NAMESPACE.into(),
        key: lifecycle::approval_key(&def.name, org),
        value: Some(value.clone()),
    }));
    writes
}
