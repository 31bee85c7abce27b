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


//! Randomized checks of the config update laws against a small org-centric
//! model of channel membership.

use std::collections::{BTreeMap, BTreeSet};

use opsflow_core::codec;
use opsflow_core::configtx::{
    apply_update, assemble_envelope, compute_update, sign_update, verify_signature, ConfigOp, ConfigOpKind, ConfigTxError,
    ConfigUpdate,
};
use opsflow_core::identity::{MspDescriptor, SigningIdentity};
use opsflow_core::simnet::{ChannelConfig, ChannelKind, ModPolicy};
use opsflow_core::{ChannelId, OrgId};
use proptest::prelude::*;

const POOL: usize = 6;

fn org(i: usize) -> OrgId {
    OrgId::from(format!("Org{i}"))
}

fn identity(i: usize, seed: u64) -> SigningIdentity {
    SigningIdentity::derive(&org(i), seed)
}

#[derive(Clone, Debug, Default, PartialEq)]
struct Flags {
    member: bool,
    consortium: bool,
    orderer: bool,
    msp: Option<MspDescriptor>,
}

/// Membership keyed by org; an org without any flag has no descriptor.
fn model(base: &ChannelConfig, ops: &[ConfigOp]) -> Option<BTreeMap<OrgId, Flags>> {
    if ops.is_empty() {
        return None;
    }
    let mut orgs: BTreeMap<OrgId, Flags> = BTreeMap::new();
    for (o, msp) in &base.msps {
        orgs.insert(
            o.clone(),
            Flags {
                member: base.member_orgs.contains(o),
                consortium: base.consortium_orgs.contains(o),
                orderer: base.orderer_orgs.contains(o),
                msp: Some(msp.clone()),
            },
        );
    }
    let mut seen = BTreeSet::new();
    for op in ops {
        let slot = match op.kind {
            ConfigOpKind::AddOrg | ConfigOpKind::RemoveOrg => 0,
            ConfigOpKind::AddConsortiumOrg | ConfigOpKind::RemoveConsortiumOrg => 1,
            ConfigOpKind::AddOrdererOrg | ConfigOpKind::RemoveOrdererOrg => 2,
        };
        if !seen.insert((slot, op.org_id.clone())) {
            return None;
        }
        if slot == 1 && base.kind != ChannelKind::System {
            return None;
        }
        let adding = matches!(op.kind, ConfigOpKind::AddOrg | ConfigOpKind::AddConsortiumOrg | ConfigOpKind::AddOrdererOrg);
        let f = orgs.entry(op.org_id.clone()).or_default();
        if adding {
            let msp = op.msp_descriptor.clone()?;
            if f.msp.as_ref().is_some_and(|m| *m != msp) {
                return None;
            }
            f.msp = Some(msp);
        }
        let flag = match slot {
            0 => &mut f.member,
            1 => &mut f.consortium,
            _ => &mut f.orderer,
        };
        if *flag == adding {
            return None;
        }
        *flag = adding;
        if !(f.member || f.consortium || f.orderer) {
            f.msp = None;
        }
        if slot == 0 && !adding && !orgs.values().any(|f| f.member) {
            return None;
        }
    }
    orgs.retain(|_, f| f.msp.is_some());
    Some(orgs)
}

fn flatten(config: &ChannelConfig) -> BTreeMap<OrgId, Flags> {
    config
        .msps
        .iter()
        .map(|(o, msp)| {
            (
                o.clone(),
                Flags {
                    member: config.member_orgs.contains(o),
                    consortium: config.consortium_orgs.contains(o),
                    orderer: config.orderer_orgs.contains(o),
                    msp: Some(msp.clone()),
                },
            )
        })
        .collect()
}

fn base_config() -> impl Strategy<Value = ChannelConfig> {
    (any::<bool>(), 1u8..(1 << POOL), any::<u8>(), 0u64..4).prop_map(|(system, member_mask, orderer_mask, version)| {
        let members: BTreeSet<OrgId> = (0..POOL).filter(|i| member_mask & (1 << i) != 0).map(|i| org(i + 1)).collect();
        let orderers = (0..POOL).filter(|i| member_mask & orderer_mask & (1 << i) != 0).map(|i| org(i + 1)).collect();
        ChannelConfig {
            channel_id: ChannelId::from(if system { "system-channel" } else { "app1" }),
            kind: if system { ChannelKind::System } else { ChannelKind::Application },
            config_version: version,
            consortium_orgs: if system { members.clone() } else { BTreeSet::new() },
            msps: members
                .iter()
                .map(|o| {
                    let i: usize = o.as_str()[3..].parse().unwrap();
                    (o.clone(), identity(i, 1).msp())
                })
                .collect(),
            member_orgs: members,
            orderer_orgs: orderers,
            mod_policy: ModPolicy::MajorityOfMembers,
        }
    })
}

fn op() -> impl Strategy<Value = ConfigOp> {
    let kinds = prop_oneof![
        Just(ConfigOpKind::AddOrg),
        Just(ConfigOpKind::RemoveOrg),
        Just(ConfigOpKind::AddConsortiumOrg),
        Just(ConfigOpKind::RemoveConsortiumOrg),
        Just(ConfigOpKind::AddOrdererOrg),
        Just(ConfigOpKind::RemoveOrdererOrg),
    ];
    // Seed 2 produces a descriptor that differs from the base's.
    (kinds, 1..=POOL, prop_oneof![9 => Just(1u64), 1 => Just(2u64)], any::<bool>()).prop_map(|(kind, i, seed, drop_msp)| {
        let adding = matches!(kind, ConfigOpKind::AddOrg | ConfigOpKind::AddConsortiumOrg | ConfigOpKind::AddOrdererOrg);
        let msp = (adding && !(drop_msp && seed == 2)).then(|| identity(i, seed).msp());
        ConfigOp { kind, org_id: org(i), msp_descriptor: msp }
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]

    #[test]
    fn apply_after_compute_matches_model(base in base_config(), ops in prop::collection::vec(op(), 0..6)) {
        let expected = model(&base, &ops);
        match compute_update(&base, &ops) {
            Ok(update) => {
                let expected = expected.expect("model accepts what compute accepts");
                prop_assert_eq!(&update.channel_id, &base.channel_id);
                prop_assert_eq!(update.base_version, base.config_version);
                let next = apply_update(&base, &update).unwrap();
                prop_assert_eq!(next.config_version, base.config_version + 1);
                prop_assert_eq!(flatten(&next), expected);
                prop_assert_eq!(next.kind, base.kind);

                let mut stale = update.clone();
                stale.base_version += 1;
                let is_stale = matches!(apply_update(&base, &stale), Err(ConfigTxError::StaleBase { .. }));
                prop_assert!(is_stale);
                let moved = apply_update(&next, &update);
                let is_stale = matches!(moved, Err(ConfigTxError::StaleBase { .. }));
                prop_assert!(is_stale);

                let text = codec::to_canonical_string(&update).unwrap();
                let back: ConfigUpdate = codec::from_str(&text).unwrap();
                prop_assert_eq!(&back, &update);
                prop_assert_eq!(back.signing_bytes(), update.signing_bytes());
            }
            Err(_) => prop_assert!(expected.is_none(), "model accepted {:?}", ops),
        }
    }

    #[test]
    fn signatures_bind_to_the_exact_update(
        base in base_config(),
        ops in prop::collection::vec(op(), 1..4),
        signer in 1..=POOL,
        other in 1..=POOL,
    ) {
        let update = ConfigUpdate { channel_id: base.channel_id.clone(), base_version: base.config_version, ops };
        let me = identity(signer, 1);
        let sig = sign_update(&me, &update);
        prop_assert_eq!(&sig.org_id, &org(signer));
        prop_assert!(verify_signature(&me.msp(), &update, &sig));
        if other != signer {
            prop_assert!(!verify_signature(&identity(other, 1).msp(), &update, &sig));
        }
        prop_assert!(!verify_signature(&identity(signer, 2).msp(), &update, &sig));

        let mut bumped = update.clone();
        bumped.base_version += 1;
        prop_assert!(!verify_signature(&me.msp(), &bumped, &sig));
        let mut moved = update.clone();
        moved.channel_id = ChannelId::from("elsewhere");
        prop_assert!(!verify_signature(&me.msp(), &moved, &sig));
        let mut trimmed = update.clone();
        trimmed.ops.pop();
        prop_assert!(!verify_signature(&me.msp(), &trimmed, &sig));

        let known: BTreeMap<OrgId, MspDescriptor> = (1..=POOL).map(|i| (org(i), identity(i, 1).msp())).collect();
        let env = assemble_envelope(update.clone(), vec![sig.clone(), sig.clone()], &known).unwrap();
        prop_assert_eq!(env.signatures.len(), 1);
        let forged = assemble_envelope(bumped, vec![sig.clone()], &known);
        prop_assert_eq!(forged.unwrap_err(), ConfigTxError::BadSignature(org(signer)));
        let unknown: BTreeMap<OrgId, MspDescriptor> = known.into_iter().filter(|(o, _)| *o != org(signer)).collect();
        prop_assert_eq!(assemble_envelope(update, vec![sig], &unknown).unwrap_err(), ConfigTxError::UnknownSigner(org(signer)));
    }
}
