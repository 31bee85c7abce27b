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

//! Deterministic consortium-blockchain simulator with on-chain operations
//! workflows, per-organization agents and an operational cost model.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod agent;
pub mod codec;
pub mod configtx;
pub mod costmodel;
pub mod identity;
pub mod opssc;
pub mod repo;
pub mod scenario;
pub mod sim;
pub mod simnet;

pub use codec::Digest;
pub use identity::{majority, ChannelId, OrgId, PeerId};
pub use simnet::{GenesisSpec, Network};
