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

use alloc::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::identity::{ChannelId, MspDescriptor, OrgId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    System,
    Ops,
    Application,
}

/// Modification policy of a channel configuration. Only the majority rule is
/// modeled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModPolicy {
    #[default]
    #[serde(rename = "majority-of-members")]
    MajorityOfMembers,
}

/// Configuration of one channel at a given config version.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub channel_id: ChannelId,
    pub kind: ChannelKind,
    pub config_version: u64,
    pub member_orgs: BTreeSet<OrgId>,
    /// Non-empty only on the system channel.
    pub consortium_orgs: BTreeSet<OrgId>,
    pub orderer_orgs: BTreeSet<OrgId>,
    /// Identity material for every org referenced by one of the sets above.
    pub msps: BTreeMap<OrgId, MspDescriptor>,
    pub mod_policy: ModPolicy,
}

impl ChannelConfig {
    /// The organizations whose signatures count towards `mod_policy`.
    pub fn governing_orgs(&self) -> &BTreeSet<OrgId> {
        match self.kind {
            ChannelKind::System => &self.consortium_orgs,
            _ => &self.member_orgs,
        }
    }

    pub fn is_member(&self, org: &OrgId) -> bool {
        self.member_orgs.contains(org)
    }

    pub fn msp(&self, org: &OrgId) -> Option<&MspDescriptor> {
        self.msps.get(org)
    }

    pub(crate) fn references(&self, org: &OrgId) -> bool {
        self.member_orgs.contains(org)
            || self.consortium_orgs.contains(org)
            || self.orderer_orgs.contains(org)
    }
}
