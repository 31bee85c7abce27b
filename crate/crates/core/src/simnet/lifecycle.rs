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

//! Chaincode lifecycle: per-org approvals of a definition and the commit
//! that requires a majority of exact-match approvals.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::codec::Digest;
use crate::identity::{majority, OrgId};
use crate::simnet::state::{Chaincode, ChaincodeError, ErrorKind, Stub};

pub const LIFECYCLE_NAMESPACE: &str = "_lifecycle";
pub const COMMIT_EVENT: &str = "lifecycle_commit";

/// Location of a chaincode's source in a repository.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SourceRef {
    pub repository_url: String,
    pub commit_id: String,
    pub path: String,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum EndorsementPolicy {
    #[default]
    #[serde(rename = "majority-of-members")]
    MajorityOfMembers,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChaincodeDefinition {
    pub name: String,
    pub version: String,
    pub sequence: u64,
    #[serde(default)]
    pub endorsement_policy: EndorsementPolicy,
    pub source_ref: SourceRef,
}

/// Snapshot of the lifecycle of one chaincode name on one channel.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LifecycleState {
    pub committed_definition: Option<ChaincodeDefinition>,
    pub approvals: BTreeMap<OrgId, ChaincodeDefinition>,
    pub installs: BTreeMap<OrgId, BTreeSet<Digest>>,
}

pub(crate) fn committed_key(name: &str) -> String {
    format!("committed/{name}")
}

pub(crate) fn approval_key(name: &str, org: &OrgId) -> String {
    format!("approvals/{name}/{org}")
}

pub(crate) fn approval_prefix(name: &str) -> String {
    format!("approvals/{name}/")
}

#[derive(Deserialize)]
struct DefinitionArg {
    definition: ChaincodeDefinition,
}

#[derive(Deserialize)]
struct NameArg {
    name: String,
}

/// The `_lifecycle` system chaincode.
pub struct LifecycleChaincode;

impl LifecycleChaincode {
    fn commit(stub: &mut Stub<'_>, def: ChaincodeDefinition) -> Result<Value, ChaincodeError> {
        let current = stub
            .get_json::<ChaincodeDefinition>(&committed_key(&def.name))?
            .map_or(0, |d| d.sequence);
        if def.sequence != current + 1 {
            return Err(ChaincodeError::invalid(
                "wrong_sequence",
                format!("sequence {} does not follow committed sequence {current}", def.sequence),
            ));
        }
        let members = stub.channel_config().member_orgs.clone();
        let mut exact = 0;
        for org in &members {
            if stub.get_json::<ChaincodeDefinition>(&approval_key(&def.name, org))?.as_ref() == Some(&def) {
                exact += 1;
            }
        }
        let needed = majority(members.len());
        if exact < needed {
            return Err(ChaincodeError::new(
                ErrorKind::Conflict,
                "insufficient_approvals",
                format!("{exact} exact-match approvals, {needed} required"),
            ));
        }
        stub.put_json(&committed_key(&def.name), &def)?;
        stub.set_event(COMMIT_EVENT, json!({"name": def.name, "sequence": def.sequence}));
        Ok(json!({"approvals": exact}))
    }
}

impl Chaincode for LifecycleChaincode {
    fn invoke(&self, stub: &mut Stub<'_>, operation: &str, args: &Value) -> Result<Value, ChaincodeError> {
        match operation {
            "approve" => {
                let a: DefinitionArg = serde_json::from_value(args.clone()).map_err(ChaincodeError::bad_args)?;
                let creator = stub.creator().clone();
                stub.put_json(&approval_key(&a.definition.name, &creator), &a.definition)?;
                Ok(Value::Null)
            }
            "commit" => {
                let a: DefinitionArg = serde_json::from_value(args.clone()).map_err(ChaincodeError::bad_args)?;
                Self::commit(stub, a.definition)
            }
            "query_committed" => {
                let a: NameArg = serde_json::from_value(args.clone()).map_err(ChaincodeError::bad_args)?;
                let def: Option<ChaincodeDefinition> = stub.get_json(&committed_key(&a.name))?;
                serde_json::to_value(def).map_err(ChaincodeError::bad_args)
            }
            other => Err(ChaincodeError::invalid("unknown_operation", other)),
        }
    }
}
