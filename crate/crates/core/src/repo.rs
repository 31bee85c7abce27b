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

//! Content store standing in for the source repositories that chaincode
//! proposals link to.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::codec::Digest;
use crate::simnet::{GenesisSpec, SourceRef};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum RepoError {
    #[error("no source at {}@{}:{}", .0.repository_url, .0.commit_id, .0.path)]
    UnknownRef(SourceRef),
    #[error("{} is already published with different content", .0.commit_id)]
    Immutable(SourceRef),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RepositoryStore {
    entries: BTreeMap<SourceRef, Vec<u8>>,
}

impl RepositoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Store containing the packages of every chaincode committed at genesis.
    pub fn for_genesis(spec: &GenesisSpec) -> Self {
        let mut store = Self::new();
        for cc in &spec.chaincodes {
            let (source, bytes) = release(&cc.name, &cc.version);
            store.entries.insert(source, bytes);
        }
        for (name, version) in crate::opssc::OPSSC_CHAINCODES {
            let (source, bytes) = release(name, version);
            store.entries.insert(source, bytes);
        }
        store
    }

    /// Publish `bytes` at `source`. Commits are immutable: republishing the
    /// same content is a no-op, different content is an error.
    pub fn publish(&mut self, source: SourceRef, bytes: Vec<u8>) -> Result<(), RepoError> {
        match self.entries.get(&source) {
            Some(existing) if *existing != bytes => Err(RepoError::Immutable(source)),
            Some(_) => Ok(()),
            None => {
                self.entries.insert(source, bytes);
                Ok(())
            }
        }
    }

    pub fn resolve(&self, source: &SourceRef) -> Result<Vec<u8>, RepoError> {
        self.entries.get(source).cloned().ok_or_else(|| RepoError::UnknownRef(source.clone()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Deterministic source location and package bytes for a named release.
pub fn release(name: &str, version: &str) -> (SourceRef, Vec<u8>) {
    let bytes = format!("chaincode-package name={name} version={version}\n").into_bytes();
    let commit = Digest::of_bytes(&bytes).to_hex();
    let source = SourceRef {
        repository_url: format!("https://repo.example/{name}.git"),
        commit_id: commit[..16].into(),
        path: alloc::string::String::from("/"),
    };
    (source, bytes)
}
