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

//! Genesis specification of a network: organizations, channels and the
//! application chaincodes committed from the start.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::identity::{ChannelId, OrgId};
use crate::simnet::ChannelKind;

pub const SYSTEM_CHANNEL: &str = "system-channel";
pub const OPS_CHANNEL: &str = "ops-channel";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrgSpec {
    pub id: OrgId,
    pub has_orderer: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub id: ChannelId,
    pub kind: ChannelKind,
    pub members: Vec<OrgId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChaincodeSpec {
    pub name: String,
    pub channel: ChannelId,
    pub version: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenesisSpec {
    pub orgs: Vec<OrgSpec>,
    pub channels: Vec<ChannelSpec>,
    pub chaincodes: Vec<ChaincodeSpec>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum GenesisError {
    #[error("a network needs at least one organization")]
    NoOrgs,
    #[error("duplicate organization id {0}")]
    DuplicateOrg(OrgId),
    #[error("duplicate channel id {0}")]
    DuplicateChannel(ChannelId),
    #[error("expected exactly one {0:?} channel, found {1}")]
    ChannelCount(ChannelKind, usize),
    #[error("channel {0} has no members")]
    EmptyChannel(ChannelId),
    #[error("channel {channel} lists unknown member {org}")]
    UnknownMember { channel: ChannelId, org: OrgId },
    #[error("chaincode {name} targets unknown channel {channel}")]
    UnknownChannel { name: String, channel: ChannelId },
    #[error("chaincode {name} must target an application channel, not {channel}")]
    NotApplicationChannel { name: String, channel: ChannelId },
    #[error("duplicate chaincode {name} on {channel}")]
    DuplicateChaincode { name: String, channel: ChannelId },
    #[error("chaincodes requested but there are no application channels")]
    ChaincodesWithoutChannels,
}

impl GenesisSpec {
    /// The evaluation layout: `orgs` organizations `Org1..`, all members of
    /// the system channel, the ops channel and `channels` application
    /// channels `app1..`; `chaincodes` chaincodes `cc1..` committed on every
    /// application channel.
    pub fn standard(orgs: usize, channels: usize, chaincodes: usize, seed: u64) -> Result<Self, GenesisError> {
        if orgs == 0 {
            return Err(GenesisError::NoOrgs);
        }
        if chaincodes > 0 && channels == 0 {
            return Err(GenesisError::ChaincodesWithoutChannels);
        }
        let org_ids: Vec<OrgId> = (1..=orgs).map(|i| OrgId::new(format!("Org{i}"))).collect();
        let mut channel_specs = alloc::vec![
            ChannelSpec { id: ChannelId::from(SYSTEM_CHANNEL), kind: ChannelKind::System, members: org_ids.clone() },
            ChannelSpec { id: ChannelId::from(OPS_CHANNEL), kind: ChannelKind::Ops, members: org_ids.clone() },
        ];
        let mut cc_specs = Vec::new();
        for c in 1..=channels {
            let id = ChannelId::new(format!("app{c}"));
            for k in 1..=chaincodes {
                cc_specs.push(ChaincodeSpec { name: format!("cc{k}"), channel: id.clone(), version: String::from("1.0") });
            }
            channel_specs.push(ChannelSpec { id, kind: ChannelKind::Application, members: org_ids.clone() });
        }
        let spec = GenesisSpec {
            orgs: org_ids.into_iter().map(|id| OrgSpec { id, has_orderer: true }).collect(),
            channels: channel_specs,
            chaincodes: cc_specs,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), GenesisError> {
        if self.orgs.is_empty() {
            return Err(GenesisError::NoOrgs);
        }
        let mut orgs = BTreeSet::new();
        for org in &self.orgs {
            if !orgs.insert(&org.id) {
                return Err(GenesisError::DuplicateOrg(org.id.clone()));
            }
        }
        let mut channels = BTreeSet::new();
        for ch in &self.channels {
            if !channels.insert(&ch.id) {
                return Err(GenesisError::DuplicateChannel(ch.id.clone()));
            }
            if ch.members.is_empty() {
                return Err(GenesisError::EmptyChannel(ch.id.clone()));
            }
            if let Some(org) = ch.members.iter().find(|m| !orgs.contains(m)) {
                return Err(GenesisError::UnknownMember { channel: ch.id.clone(), org: org.clone() });
            }
        }
        for kind in [ChannelKind::System, ChannelKind::Ops] {
            let n = self.channels.iter().filter(|c| c.kind == kind).count();
            if n != 1 {
                return Err(GenesisError::ChannelCount(kind, n));
            }
        }
        let has_apps = self.channels.iter().any(|c| c.kind == ChannelKind::Application);
        if !self.chaincodes.is_empty() && !has_apps {
            return Err(GenesisError::ChaincodesWithoutChannels);
        }
        let mut seen = BTreeSet::new();
        for cc in &self.chaincodes {
            let channel = self.channels.iter().find(|c| c.id == cc.channel).ok_or_else(|| GenesisError::UnknownChannel {
                name: cc.name.clone(),
                channel: cc.channel.clone(),
            })?;
            if channel.kind != ChannelKind::Application {
                return Err(GenesisError::NotApplicationChannel { name: cc.name.clone(), channel: cc.channel.clone() });
            }
            if !seen.insert((&cc.name, &cc.channel)) {
                return Err(GenesisError::DuplicateChaincode { name: cc.name.clone(), channel: cc.channel.clone() });
            }
        }
        Ok(())
    }

    pub fn channel_of_kind(&self, kind: ChannelKind) -> Option<&ChannelSpec> {
        self.channels.iter().find(|c| c.kind == kind)
    }

    pub fn ops_channel(&self) -> &ChannelId {
        &self.channel_of_kind(ChannelKind::Ops).expect("validated spec has an ops channel").id
    }

    pub fn system_channel(&self) -> &ChannelId {
        &self.channel_of_kind(ChannelKind::System).expect("validated spec has a system channel").id
    }

    pub fn application_channels(&self) -> impl Iterator<Item = &ChannelSpec> {
        self.channels.iter().filter(|c| c.kind == ChannelKind::Application)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_layout() {
        let spec = GenesisSpec::standard(3, 2, 2, 7).unwrap();
        assert_eq!(spec.orgs.len(), 3);
        assert_eq!(spec.channels.len(), 4);
        assert_eq!(spec.chaincodes.len(), 4);
        assert_eq!(spec.ops_channel().as_str(), OPS_CHANNEL);
    }

    #[test]
    fn invalid_specs() {
        assert_eq!(GenesisSpec::standard(0, 0, 0, 1), Err(GenesisError::NoOrgs));
        assert_eq!(GenesisSpec::standard(2, 0, 1, 1), Err(GenesisError::ChaincodesWithoutChannels));

        let mut dup = GenesisSpec::standard(2, 1, 0, 1).unwrap();
        dup.orgs[1].id = dup.orgs[0].id.clone();
        assert_eq!(dup.validate(), Err(GenesisError::DuplicateOrg(OrgId::from("Org1"))));

        let mut two_ops = GenesisSpec::standard(1, 1, 0, 1).unwrap();
        two_ops.channels[2].kind = ChannelKind::Ops;
        assert_eq!(two_ops.validate(), Err(GenesisError::ChannelCount(ChannelKind::Ops, 2)));

        let mut bad_cc = GenesisSpec::standard(1, 1, 1, 1).unwrap();
        bad_cc.chaincodes[0].channel = ChannelId::from(OPS_CHANNEL);
        assert!(matches!(bad_cc.validate(), Err(GenesisError::NotApplicationChannel { .. })));
    }
}
