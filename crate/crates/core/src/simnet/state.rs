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

//! World state and the execution context handed to chaincodes.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::codec::{from_str, to_canonical_string};
use crate::identity::{ChannelId, OrgId};
use crate::simnet::ledger::{ChaincodeEvent, KvRead, KvWrite, RwSet};
use crate::simnet::ChannelConfig;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionedValue {
    pub value: String,
    pub version: u64,
}

/// Per-channel key/value state, partitioned by chaincode namespace.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldState {
    namespaces: BTreeMap<String, BTreeMap<String, VersionedValue>>,
}

impl WorldState {
    pub fn get(&self, namespace: &str, key: &str) -> Option<&VersionedValue> {
        self.namespaces.get(namespace)?.get(key)
    }

    pub fn range<'a>(&'a self, namespace: &str, prefix: &'a str) -> impl Iterator<Item = (&'a String, &'a VersionedValue)> + 'a {
        self.namespaces
            .get(namespace)
            .into_iter()
            .flat_map(move |ns| ns.range(String::from(prefix)..).take_while(move |(k, _)| k.starts_with(prefix)))
    }

    pub fn apply(&mut self, writes: &[KvWrite], version: u64) {
        for w in writes {
            match &w.value {
                Some(value) => {
                    self.namespaces
                        .entry(w.namespace.clone())
                        .or_default()
                        .insert(w.key.clone(), VersionedValue { value: value.clone(), version });
                }
                None => {
                    if let Some(ns) = self.namespaces.get_mut(&w.namespace) {
                        ns.remove(&w.key);
                        if ns.is_empty() {
                            self.namespaces.remove(&w.namespace);
                        }
                    }
                }
            }
        }
    }

    /// True iff every read observed the version currently stored.
    pub fn reads_current(&self, reads: &[KvRead]) -> bool {
        reads.iter().all(|r| self.get(&r.namespace, &r.key).map(|v| v.version) == r.version)
    }

    pub fn namespace_keys(&self, namespace: &str) -> usize {
        self.namespaces.get(namespace).map_or(0, |ns| ns.len())
    }

    /// Values only, without versions.
    pub fn values(&self) -> BTreeMap<&str, BTreeMap<&str, &str>> {
        self.namespaces
            .iter()
            .map(|(ns, kv)| (ns.as_str(), kv.iter().map(|(k, v)| (k.as_str(), v.value.as_str())).collect()))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    NotFound,
    Conflict,
    Forbidden,
    Invalid,
}

/// Error returned by a chaincode. `code` is a stable machine-readable tag.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{code}: {message}")]
pub struct ChaincodeError {
    pub kind: ErrorKind,
    pub code: String,
    pub message: String,
}

impl ChaincodeError {
    pub fn new(kind: ErrorKind, code: &str, message: impl Into<String>) -> Self {
        ChaincodeError { kind, code: code.to_string(), message: message.into() }
    }

    pub fn invalid(code: &str, message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Invalid, code, message)
    }

    pub fn bad_args(err: impl core::fmt::Display) -> Self {
        Self::invalid("bad_arguments", err.to_string())
    }
}

/// A chaincode handler. Handlers are stateless; all state lives in the
/// namespace of the world state they are invoked on.
pub trait Chaincode: Send + Sync {
    fn invoke(&self, stub: &mut Stub<'_>, operation: &str, args: &Value) -> Result<Value, ChaincodeError>;
}

/// Execution context for one chaincode invocation. Reads are recorded with
/// the version they observed; writes are buffered until validation.
pub struct Stub<'a> {
    world: &'a WorldState,
    config: &'a ChannelConfig,
    namespace: String,
    tx_id: String,
    creator: OrgId,
    block_number: u64,
    reads: BTreeMap<(String, String), Option<u64>>,
    writes: BTreeMap<(String, String), Option<String>>,
    events: Vec<ChaincodeEvent>,
}

impl<'a> Stub<'a> {
    pub(crate) fn new(
        world: &'a WorldState,
        config: &'a ChannelConfig,
        namespace: &str,
        tx_id: &str,
        creator: &OrgId,
        block_number: u64,
    ) -> Self {
        Stub {
            world,
            config,
            namespace: namespace.to_string(),
            tx_id: tx_id.to_string(),
            creator: creator.clone(),
            block_number,
            reads: BTreeMap::new(),
            writes: BTreeMap::new(),
            events: Vec::new(),
        }
    }

    pub fn creator(&self) -> &OrgId {
        &self.creator
    }

    pub fn tx_id(&self) -> &str {
        &self.tx_id
    }

    pub fn channel_id(&self) -> &ChannelId {
        &self.config.channel_id
    }

    /// Number of the block this transaction will be committed in.
    pub fn block_number(&self) -> u64 {
        self.block_number
    }

    /// The channel configuration in effect at execution time.
    pub fn channel_config(&self) -> &ChannelConfig {
        self.config
    }

    fn read(&mut self, namespace: &str, key: &str) -> Option<String> {
        let id = (namespace.to_string(), key.to_string());
        if let Some(pending) = self.writes.get(&id) {
            return pending.clone();
        }
        let current = self.world.get(namespace, key);
        self.reads.entry(id).or_insert(current.map(|v| v.version));
        current.map(|v| v.value.clone())
    }

    pub fn get_state(&mut self, key: &str) -> Option<String> {
        let ns = self.namespace.clone();
        self.read(&ns, key)
    }

    /// Read-only access to another namespace on the same channel.
    pub fn get_state_from(&mut self, namespace: &str, key: &str) -> Option<String> {
        self.read(namespace, key)
    }

    pub fn put_state(&mut self, key: &str, value: String) {
        self.writes.insert((self.namespace.clone(), key.to_string()), Some(value));
    }

    pub fn delete_state(&mut self, key: &str) {
        self.writes.insert((self.namespace.clone(), key.to_string()), None);
    }

    /// All keys in this namespace starting with `prefix`, in key order,
    /// including this invocation's own pending writes.
    pub fn range(&mut self, prefix: &str) -> Vec<(String, String)> {
        let ns = self.namespace.clone();
        self.range_from(&ns, prefix)
    }

    pub fn range_from(&mut self, namespace: &str, prefix: &str) -> Vec<(String, String)> {
        let mut keys: Vec<String> = self.world.range(namespace, prefix).map(|(k, _)| k.clone()).collect();
        for (ns, key) in self.writes.keys() {
            if ns == namespace && key.starts_with(prefix) {
                keys.push(key.clone());
            }
        }
        keys.sort();
        keys.dedup();
        keys.into_iter()
            .filter_map(|k| self.read(namespace, &k).map(|v| (k, v)))
            .collect()
    }

    pub fn get_json<T: DeserializeOwned>(&mut self, key: &str) -> Result<Option<T>, ChaincodeError> {
        self.get_state(key)
            .map(|s| from_str(&s).map_err(|e| ChaincodeError::invalid("corrupt_state", format!("{key}: {e}"))))
            .transpose()
    }

    pub fn get_json_from<T: DeserializeOwned>(&mut self, namespace: &str, key: &str) -> Result<Option<T>, ChaincodeError> {
        self.get_state_from(namespace, key)
            .map(|s| from_str(&s).map_err(|e| ChaincodeError::invalid("corrupt_state", format!("{key}: {e}"))))
            .transpose()
    }

    pub fn put_json<T: Serialize>(&mut self, key: &str, value: &T) -> Result<(), ChaincodeError> {
        let s = to_canonical_string(value).map_err(|e| ChaincodeError::invalid("encode", e.to_string()))?;
        self.put_state(key, s);
        Ok(())
    }

    pub fn set_event(&mut self, name: &str, payload: Value) {
        self.events.push(ChaincodeEvent {
            tx_id: self.tx_id.clone(),
            namespace: self.namespace.clone(),
            name: name.to_string(),
            payload,
        });
    }

    pub(crate) fn finish(self) -> (RwSet, Vec<ChaincodeEvent>) {
        let reads = self
            .reads
            .into_iter()
            .map(|((namespace, key), version)| KvRead { namespace, key, version })
            .collect();
        let writes = self
            .writes
            .into_iter()
            .map(|((namespace, key), value)| KvWrite { namespace, key, value })
            .collect();
        (RwSet { reads, writes }, self.events)
    }
}

/// Generic key/value application chaincode: `put`, `get`, `delete`.
pub struct KvChaincode;

#[derive(Deserialize)]
struct KeyArg {
    key: String,
}

#[derive(Deserialize)]
struct PutArg {
    key: String,
    value: String,
}

impl Chaincode for KvChaincode {
    fn invoke(&self, stub: &mut Stub<'_>, operation: &str, args: &Value) -> Result<Value, ChaincodeError> {
        match operation {
            "put" => {
                let a: PutArg = serde_json::from_value(args.clone()).map_err(ChaincodeError::bad_args)?;
                stub.put_state(&a.key, a.value);
                Ok(Value::Null)
            }
            "get" => {
                let a: KeyArg = serde_json::from_value(args.clone()).map_err(ChaincodeError::bad_args)?;
                Ok(stub.get_state(&a.key).map_or(Value::Null, Value::String))
            }
            "delete" => {
                let a: KeyArg = serde_json::from_value(args.clone()).map_err(ChaincodeError::bad_args)?;
                stub.delete_state(&a.key);
                Ok(Value::Null)
            }
            other => Err(ChaincodeError::invalid("unknown_operation", other)),
        }
    }
}
