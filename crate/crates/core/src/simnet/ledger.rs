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

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::codec::{to_canonical_bytes, Digest};
use crate::configtx::Envelope;
use crate::identity::{ChannelId, OrgId, SignatureBytes};
use crate::simnet::ChannelConfig;

const PROPOSAL_DOMAIN: &[u8] = b"opsflow/proposal\0";
const RESPONSE_DOMAIN: &[u8] = b"opsflow/endorsement\0";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxKind {
    Invoke,
    Config,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KvRead {
    pub namespace: String,
    pub key: String,
    /// Block number of the write that produced the value read, `None` if
    /// the key was absent.
    pub version: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KvWrite {
    pub namespace: String,
    pub key: String,
    /// `None` deletes the key.
    pub value: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RwSet {
    pub reads: Vec<KvRead>,
    pub writes: Vec<KvWrite>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChaincodeEvent {
    pub tx_id: String,
    pub namespace: String,
    pub name: String,
    pub payload: Value,
}

/// A chaincode invocation together with the result of executing it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Invocation {
    pub namespace: String,
    pub operation: String,
    pub args: Value,
    pub rwset: RwSet,
    pub response: Value,
    pub events: Vec<ChaincodeEvent>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenesisConfig {
    pub config: ChannelConfig,
    pub writes: Vec<KvWrite>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    Invoke(Invocation),
    ConfigUpdate(Envelope),
    Genesis(GenesisConfig),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Endorsement {
    pub org_id: OrgId,
    pub signature: SignatureBytes,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Validity {
    Pending,
    Valid,
    Invalid { reason: String },
}

impl Validity {
    pub fn is_valid(&self) -> bool {
        matches!(self, Validity::Valid)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub tx_id: String,
    pub channel_id: ChannelId,
    pub kind: TxKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub creator: Option<OrgId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub creator_signature: Option<SignatureBytes>,
    pub payload: Payload,
    pub endorsements: Vec<Endorsement>,
    pub validity: Validity,
}

#[derive(Serialize)]
struct ProposalView<'a> {
    tx_id: &'a str,
    channel_id: &'a ChannelId,
    creator: &'a Option<OrgId>,
    namespace: &'a str,
    operation: &'a str,
    args: &'a Value,
}

impl Transaction {
    pub fn invocation(&self) -> Option<&Invocation> {
        match &self.payload {
            Payload::Invoke(inv) => Some(inv),
            _ => None,
        }
    }

    pub fn namespace(&self) -> Option<&str> {
        self.invocation().map(|inv| inv.namespace.as_str())
    }

    /// Bytes signed by the transaction creator: the invocation request.
    pub fn proposal_bytes(&self) -> Option<Vec<u8>> {
        let inv = self.invocation()?;
        let view = ProposalView {
            tx_id: &self.tx_id,
            channel_id: &self.channel_id,
            creator: &self.creator,
            namespace: &inv.namespace,
            operation: &inv.operation,
            args: &inv.args,
        };
        let mut bytes = PROPOSAL_DOMAIN.to_vec();
        bytes.extend(to_canonical_bytes(&view).ok()?);
        Some(bytes)
    }

    /// Bytes signed by endorsers: the request plus its execution result.
    pub fn response_bytes(&self) -> Option<Vec<u8>> {
        let inv = self.invocation()?;
        let mut bytes = RESPONSE_DOMAIN.to_vec();
        bytes.extend(self.proposal_bytes()?);
        bytes.extend(to_canonical_bytes(&(&inv.rwset, &inv.response, &inv.events)).ok()?);
        Some(bytes)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub block_number: u64,
    pub channel_id: ChannelId,
    pub parent_digest: Digest,
    pub transactions: Vec<Transaction>,
    /// Chaincode events of the valid transactions, in transaction order.
    pub events: Vec<ChaincodeEvent>,
}

impl Block {
    pub fn digest(&self) -> Digest {
        Digest::of_canonical(self).expect("blocks contain no floats")
    }
}

/// A chaincode event as seen by a subscriber.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveredEvent {
    pub block_number: u64,
    pub event: ChaincodeEvent,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    pub tx_id: String,
    pub block_number: u64,
    pub validity: Validity,
    #[serde(default)]
    pub response: Value,
}
