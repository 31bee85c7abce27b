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

//! Channel configuration updates: compute a delta against a base config,
//! collect per-organization signatures over it, and bundle both into an
//! envelope that the network can apply.
//!
//! The delta is an ordered list of membership operations rather than a
//! read/write-set diff, so a proposal can be shown to humans as-is and its
//! effect is just the fold of those operations over the base config.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::codec::to_canonical_bytes;
use crate::identity::{ChannelId, MspDescriptor, OrgId, SignatureBytes, SigningIdentity};
use crate::simnet::{ChannelConfig, ChannelKind};

const SIGNING_DOMAIN: &[u8] = b"opsflow/config-update\0";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfigOpKind {
    AddOrg,
    RemoveOrg,
    AddConsortiumOrg,
    RemoveConsortiumOrg,
    AddOrdererOrg,
    RemoveOrdererOrg,
}

impl ConfigOpKind {
    pub fn is_add(self) -> bool {
        matches!(
            self,
            ConfigOpKind::AddOrg | ConfigOpKind::AddConsortiumOrg | ConfigOpKind::AddOrdererOrg
        )
    }

    fn target(self) -> OrgSet {
        match self {
            ConfigOpKind::AddOrg | ConfigOpKind::RemoveOrg => OrgSet::Members,
            ConfigOpKind::AddConsortiumOrg | ConfigOpKind::RemoveConsortiumOrg => OrgSet::Consortium,
            ConfigOpKind::AddOrdererOrg | ConfigOpKind::RemoveOrdererOrg => OrgSet::Orderers,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum OrgSet {
    Members,
    Consortium,
    Orderers,
}

/// One human-readable membership change.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigOp {
    pub kind: ConfigOpKind,
    pub org_id: OrgId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub msp_descriptor: Option<MspDescriptor>,
}

impl ConfigOp {
    pub fn add(kind: ConfigOpKind, msp: MspDescriptor, org_id: OrgId) -> Self {
        debug_assert!(kind.is_add());
        ConfigOp { kind, org_id, msp_descriptor: Some(msp) }
    }

    pub fn remove(kind: ConfigOpKind, org_id: OrgId) -> Self {
        debug_assert!(!kind.is_add());
        ConfigOp { kind, org_id, msp_descriptor: None }
    }

    pub fn add_org(org_id: OrgId, msp: MspDescriptor) -> Self {
        Self::add(ConfigOpKind::AddOrg, msp, org_id)
    }

    pub fn remove_org(org_id: OrgId) -> Self {
        Self::remove(ConfigOpKind::RemoveOrg, org_id)
    }
}

/// The operations that add `org` to a channel of the given kind: membership,
/// consortium membership on the system channel, and orderer membership when
/// the org runs an orderer.
pub fn add_org_ops(kind: ChannelKind, org: &OrgId, msp: &MspDescriptor, has_orderer: bool) -> Vec<ConfigOp> {
    let mut ops = alloc::vec![ConfigOp::add_org(org.clone(), msp.clone())];
    if kind == ChannelKind::System {
        ops.push(ConfigOp::add(ConfigOpKind::AddConsortiumOrg, msp.clone(), org.clone()));
    }
    if has_orderer {
        ops.push(ConfigOp::add(ConfigOpKind::AddOrdererOrg, msp.clone(), org.clone()));
    }
    ops
}

/// The delta between a base configuration and the desired one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigUpdate {
    pub channel_id: ChannelId,
    pub base_version: u64,
    pub ops: Vec<ConfigOp>,
}

impl ConfigUpdate {
    /// The exact bytes covered by a [`ConfigSignature`].
    pub fn signing_bytes(&self) -> Vec<u8> {
        let mut bytes = SIGNING_DOMAIN.to_vec();
        bytes.extend(to_canonical_bytes(self).expect("config updates contain no floats"));
        bytes
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigSignature {
    pub org_id: OrgId,
    pub signature: SignatureBytes,
}

/// A config update together with the signatures collected for it, at most
/// one per organization, sorted by org id.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Envelope {
    pub update: ConfigUpdate,
    pub signatures: Vec<ConfigSignature>,
}

impl Envelope {
    pub fn signers(&self) -> BTreeSet<&OrgId> {
        self.signatures.iter().map(|s| &s.org_id).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum OpError {
    #[error("org {0} is already present")]
    AlreadyPresent(OrgId),
    #[error("org {0} is not present")]
    NotPresent(OrgId),
    #[error("add operation for {0} lacks an msp descriptor")]
    MissingMsp(OrgId),
    #[error("msp descriptor for {0} differs from the one in the config")]
    MspMismatch(OrgId),
    #[error("consortium operations are only valid on the system channel")]
    NotSystemChannel,
    #[error("removing {0} would leave the channel without members")]
    LastMember(OrgId),
    #[error("org {0} is touched twice in the same set")]
    Conflict(OrgId),
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ConfigTxError {
    #[error("config update has no operations")]
    Empty,
    #[error("operation {index} is invalid: {reason}")]
    InvalidOp { index: usize, reason: OpError },
    #[error("update targets channel {found}, config is for {expected}")]
    ChannelMismatch { expected: ChannelId, found: ChannelId },
    #[error("stale config update: base version {found}, current version {expected}")]
    StaleBase { expected: u64, found: u64 },
    #[error("signature of {0} does not verify")]
    BadSignature(OrgId),
    #[error("no identity known for signer {0}")]
    UnknownSigner(OrgId),
}

fn apply_op(config: &mut ChannelConfig, op: &ConfigOp) -> Result<(), OpError> {
    let org = &op.org_id;
    if op.kind.is_add() {
        let msp = op.msp_descriptor.as_ref().ok_or_else(|| OpError::MissingMsp(org.clone()))?;
        if let Some(existing) = config.msps.get(org) {
            if existing != msp {
                return Err(OpError::MspMismatch(org.clone()));
            }
        }
    }
    let set = match op.kind.target() {
        OrgSet::Members => &mut config.member_orgs,
        OrgSet::Consortium if config.kind != ChannelKind::System => return Err(OpError::NotSystemChannel),
        OrgSet::Consortium => &mut config.consortium_orgs,
        OrgSet::Orderers => &mut config.orderer_orgs,
    };
    if op.kind.is_add() {
        if !set.insert(org.clone()) {
            return Err(OpError::AlreadyPresent(org.clone()));
        }
        let msp = op.msp_descriptor.clone().expect("checked above");
        config.msps.insert(org.clone(), msp);
    } else {
        if !set.remove(org) {
            return Err(OpError::NotPresent(org.clone()));
        }
        if op.kind == ConfigOpKind::RemoveOrg && config.member_orgs.is_empty() {
            return Err(OpError::LastMember(org.clone()));
        }
        if !config.references(org) {
            config.msps.remove(org);
        }
    }
    Ok(())
}

fn fold_ops(base: &ChannelConfig, ops: &[ConfigOp]) -> Result<ChannelConfig, ConfigTxError> {
    if ops.is_empty() {
        return Err(ConfigTxError::Empty);
    }
    let mut touched = BTreeSet::new();
    let mut config = base.clone();
    for (index, op) in ops.iter().enumerate() {
        if !touched.insert((op.kind.target(), &op.org_id)) {
            return Err(ConfigTxError::InvalidOp { index, reason: OpError::Conflict(op.org_id.clone()) });
        }
        apply_op(&mut config, op).map_err(|reason| ConfigTxError::InvalidOp { index, reason })?;
    }
    Ok(config)
}

/// Build the update that takes `base` to the configuration described by
/// `desired`.
pub fn compute_update(base: &ChannelConfig, desired: &[ConfigOp]) -> Result<ConfigUpdate, ConfigTxError> {
    fold_ops(base, desired)?;
    Ok(ConfigUpdate {
        channel_id: base.channel_id.clone(),
        base_version: base.config_version,
        ops: desired.to_vec(),
    })
}

/// Apply `update` to `base`, producing the next config version.
pub fn apply_update(base: &ChannelConfig, update: &ConfigUpdate) -> Result<ChannelConfig, ConfigTxError> {
    if update.channel_id != base.channel_id {
        return Err(ConfigTxError::ChannelMismatch {
            expected: base.channel_id.clone(),
            found: update.channel_id.clone(),
        });
    }
    if update.base_version != base.config_version {
        return Err(ConfigTxError::StaleBase { expected: base.config_version, found: update.base_version });
    }
    let mut next = fold_ops(base, &update.ops)?;
    next.config_version = base.config_version + 1;
    Ok(next)
}

pub fn sign_update(identity: &SigningIdentity, update: &ConfigUpdate) -> ConfigSignature {
    ConfigSignature {
        org_id: identity.org_id().clone(),
        signature: identity.sign(&update.signing_bytes()),
    }
}

pub fn verify_signature(msp: &MspDescriptor, update: &ConfigUpdate, signature: &ConfigSignature) -> bool {
    msp.verify(&update.signing_bytes(), &signature.signature)
}

/// Bundle `update` with its signatures. Every signature must verify against
/// the signer's descriptor in `msps`; repeated signers are collapsed.
pub fn assemble_envelope<I>(
    update: ConfigUpdate,
    signatures: I,
    msps: &BTreeMap<OrgId, MspDescriptor>,
) -> Result<Envelope, ConfigTxError>
where
    I: IntoIterator<Item = ConfigSignature>,
{
    let mut by_org: BTreeMap<OrgId, ConfigSignature> = BTreeMap::new();
    for sig in signatures {
        let msp = msps.get(&sig.org_id).ok_or_else(|| ConfigTxError::UnknownSigner(sig.org_id.clone()))?;
        if !verify_signature(msp, &update, &sig) {
            return Err(ConfigTxError::BadSignature(sig.org_id));
        }
        by_org.entry(sig.org_id.clone()).or_insert(sig);
    }
    Ok(Envelope { update, signatures: by_org.into_values().collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use crate::simnet::ModPolicy;

    fn ident(name: &str) -> SigningIdentity {
        SigningIdentity::derive(&OrgId::from(name), 42)
    }

    fn config(kind: ChannelKind, members: &[&str]) -> ChannelConfig {
        let msps = members.iter().map(|m| (OrgId::from(*m), ident(m).msp())).collect();
        let set: BTreeSet<OrgId> = members.iter().map(|m| OrgId::from(*m)).collect();
        ChannelConfig {
            channel_id: ChannelId::from("app1"),
            kind,
            config_version: 3,
            member_orgs: set.clone(),
            consortium_orgs: if kind == ChannelKind::System { set } else { BTreeSet::new() },
            orderer_orgs: BTreeSet::new(),
            msps,
            mod_policy: ModPolicy::MajorityOfMembers,
        }
    }

    fn add(name: &str) -> ConfigOp {
        ConfigOp::add_org(OrgId::from(name), ident(name).msp())
    }

    #[test]
    fn empty_delta_rejected() {
        let base = config(ChannelKind::Application, &["O1", "O2"]);
        assert_eq!(compute_update(&base, &[]), Err(ConfigTxError::Empty));
    }

    #[test]
    fn single_add() {
        let base = config(ChannelKind::Application, &["O1", "O2"]);
        let update = compute_update(&base, &[add("O3")]).unwrap();
        assert_eq!(update.base_version, 3);
        assert_eq!(update.ops.len(), 1);
        let next = apply_update(&base, &update).unwrap();
        assert_eq!(next.config_version, 4);
        assert!(next.is_member(&OrgId::from("O3")));
        assert_eq!(next.msp(&OrgId::from("O3")), Some(&ident("O3").msp()));
    }

    #[test]
    fn add_then_remove_same_org_conflicts() {
        let base = config(ChannelKind::Application, &["O1", "O2"]);
        let err = compute_update(&base, &[add("O3"), ConfigOp::remove_org(OrgId::from("O3"))]).unwrap_err();
        assert_eq!(err, ConfigTxError::InvalidOp { index: 1, reason: OpError::Conflict(OrgId::from("O3")) });
    }

    #[test]
    fn invalid_ops() {
        let base = config(ChannelKind::Application, &["O1", "O2"]);
        assert!(matches!(
            compute_update(&base, &[add("O1")]),
            Err(ConfigTxError::InvalidOp { reason: OpError::AlreadyPresent(_), .. })
        ));
        assert!(matches!(
            compute_update(&base, &[ConfigOp::remove_org(OrgId::from("O9"))]),
            Err(ConfigTxError::InvalidOp { reason: OpError::NotPresent(_), .. })
        ));
        let consortium = ConfigOp::add(ConfigOpKind::AddConsortiumOrg, ident("O3").msp(), OrgId::from("O3"));
        assert!(matches!(
            compute_update(&base, &[consortium]),
            Err(ConfigTxError::InvalidOp { reason: OpError::NotSystemChannel, .. })
        ));
        let mut no_msp = add("O3");
        no_msp.msp_descriptor = None;
        assert!(matches!(
            compute_update(&base, &[no_msp]),
            Err(ConfigTxError::InvalidOp { reason: OpError::MissingMsp(_), .. })
        ));
        let single = config(ChannelKind::Application, &["O1"]);
        assert!(matches!(
            compute_update(&single, &[ConfigOp::remove_org(OrgId::from("O1"))]),
            Err(ConfigTxError::InvalidOp { reason: OpError::LastMember(_), .. })
        ));
    }

    #[test]
    fn remove_then_readd_across_two_updates() {
        let base = config(ChannelKind::Application, &["O1", "O2"]);
        let u1 = compute_update(&base, &[ConfigOp::remove_org(OrgId::from("O2"))]).unwrap();
        let mid = apply_update(&base, &u1).unwrap();
        assert!(mid.msp(&OrgId::from("O2")).is_none());
        let u2 = compute_update(&mid, &[add("O2")]).unwrap();
        let end = apply_update(&mid, &u2).unwrap();
        assert_eq!(end.member_orgs, base.member_orgs);
        assert_eq!(end.msps, base.msps);
        assert_eq!(end.config_version, base.config_version + 2);
    }

    #[test]
    fn stale_base_rejected() {
        let base = config(ChannelKind::Application, &["O1", "O2"]);
        let mut update = compute_update(&base, &[add("O3")]).unwrap();
        update.base_version = 2;
        assert_eq!(apply_update(&base, &update), Err(ConfigTxError::StaleBase { expected: 3, found: 2 }));
    }

    #[test]
    fn system_channel_add_covers_consortium() {
        let base = config(ChannelKind::System, &["O1"]);
        let ops = add_org_ops(ChannelKind::System, &OrgId::from("O2"), &ident("O2").msp(), true);
        let next = apply_update(&base, &compute_update(&base, &ops).unwrap()).unwrap();
        let o2 = OrgId::from("O2");
        assert!(next.member_orgs.contains(&o2));
        assert!(next.consortium_orgs.contains(&o2));
        assert!(next.orderer_orgs.contains(&o2));
    }

    #[test]
    fn signatures_bind_to_update() {
        let base = config(ChannelKind::Application, &["O1", "O2"]);
        let update = compute_update(&base, &[add("O3")]).unwrap();
        let s1 = sign_update(&ident("O1"), &update);
        let s2 = sign_update(&ident("O2"), &update);
        assert!(verify_signature(&ident("O1").msp(), &update, &s1));
        assert!(verify_signature(&ident("O2").msp(), &update, &s2));
        assert_ne!(s1.signature, s2.signature);

        let mut changed = update.clone();
        changed.ops[0] = add("O4");
        assert!(!verify_signature(&ident("O1").msp(), &changed, &s1));
    }

    #[test]
    fn assemble_dedups_and_rejects_bad() {
        let base = config(ChannelKind::Application, &["O1", "O2", "O3"]);
        let update = compute_update(&base, &[add("O4")]).unwrap();
        let sigs: Vec<_> = ["O1", "O2", "O3"].iter().map(|o| sign_update(&ident(o), &update)).collect();

        let env = assemble_envelope(update.clone(), sigs.clone(), &base.msps).unwrap();
        assert_eq!(env.signatures.len(), 3);

        let dup = vec![sigs[0].clone(), sigs[1].clone(), sigs[0].clone()];
        let env = assemble_envelope(update.clone(), dup, &base.msps).unwrap();
        assert_eq!(env.signatures.len(), 2);

        let mut forged = sigs[2].clone();
        forged.signature = sigs[1].signature.clone();
        let err = assemble_envelope(update, vec![sigs[0].clone(), forged], &base.msps).unwrap_err();
        assert_eq!(err, ConfigTxError::BadSignature(OrgId::from("O3")));
    }
}
