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

//! Organization identities: names, signing keys and MSP descriptors.

use alloc::borrow::ToOwned;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use ed25519_dalek::{Signer, SigningKey, Verifier, VerifyingKey};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::codec::Digest;

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{:?}", self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }

        impl core::borrow::Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }
    };
}

string_id!(
    /// Organization identifier, unique within a network.
    OrgId
);
string_id!(ChannelId);
string_id!(PeerId);

/// Ed25519 verification key.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PublicKey(pub [u8; 32]);

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", &hex::encode(self.0)[..16])
    }
}

impl Serialize for PublicKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&hex::encode(self.0))
    }
}

impl<'de> Deserialize<'de> for PublicKey {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        let mut out = [0u8; 32];
        hex::decode_to_slice(&s, &mut out).map_err(serde::de::Error::custom)?;
        Ok(PublicKey(out))
    }
}

/// Detached signature bytes, hex encoded on the wire.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SignatureBytes(pub Vec<u8>);

impl fmt::Debug for SignatureBytes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = hex::encode(&self.0);
        write!(f, "Sig({})", &h[..h.len().min(16)])
    }
}

impl Serialize for SignatureBytes {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&hex::encode(&self.0))
    }
}

impl<'de> Deserialize<'de> for SignatureBytes {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        hex::decode(&s).map(SignatureBytes).map_err(serde::de::Error::custom)
    }
}

/// Public identity material of an organization, as carried in channel
/// configurations.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MspDescriptor {
    pub msp_id: String,
    pub public_key: PublicKey,
    pub display_name: String,
}

impl MspDescriptor {
    /// Verify `signature` over `message` with this MSP's key.
    pub fn verify(&self, message: &[u8], signature: &SignatureBytes) -> bool {
        let Ok(key) = VerifyingKey::from_bytes(&self.public_key.0) else {
            return false;
        };
        let Ok(sig) = ed25519_dalek::Signature::from_slice(&signature.0) else {
            return false;
        };
        key.verify(message, &sig).is_ok()
    }
}

/// An organization's private signing identity.
#[derive(Clone)]
pub struct SigningIdentity {
    org_id: OrgId,
    key: SigningKey,
}

impl fmt::Debug for SigningIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SigningIdentity")
            .field("org_id", &self.org_id)
            .finish_non_exhaustive()
    }
}

impl SigningIdentity {
    /// Derive a keypair deterministically from the network seed and org id.
    pub fn derive(org_id: &OrgId, seed: u64) -> Self {
        let secret = Digest::of_parts(&[b"opsflow/org-key", &seed.to_be_bytes(), org_id.as_str().as_bytes()]);
        SigningIdentity {
            org_id: org_id.clone(),
            key: SigningKey::from_bytes(&secret.0),
        }
    }

    pub fn org_id(&self) -> &OrgId {
        &self.org_id
    }

    pub fn public_key(&self) -> PublicKey {
        PublicKey(self.key.verifying_key().to_bytes())
    }

    pub fn msp(&self) -> MspDescriptor {
        MspDescriptor {
            msp_id: alloc::format!("{}MSP", self.org_id),
            public_key: self.public_key(),
            display_name: self.org_id.to_string(),
        }
    }

    pub fn sign(&self, message: &[u8]) -> SignatureBytes {
        SignatureBytes(self.key.sign(message).to_bytes().to_vec())
    }
}


/// Smallest number of distinct organizations forming a majority of `members`.
pub const fn majority(members: usize) -> usize {
    members / 2 + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn majority_thresholds() {
        assert_eq!(majority(1), 1);
        assert_eq!(majority(2), 2);
        assert_eq!(majority(3), 2);
        assert_eq!(majority(4), 3);
        assert_eq!(majority(5), 3);
    }

    #[test]
    fn keys_are_deterministic_and_distinct() {
        let a1 = SigningIdentity::derive(&OrgId::from("Org1"), 7);
        let a2 = SigningIdentity::derive(&OrgId::from("Org1"), 7);
        let b = SigningIdentity::derive(&OrgId::from("Org2"), 7);
        let c = SigningIdentity::derive(&OrgId::from("Org1"), 8);
        assert_eq!(a1.public_key(), a2.public_key());
        assert_ne!(a1.public_key(), b.public_key());
        assert_ne!(a1.public_key(), c.public_key());
    }

    #[test]
    fn sign_and_verify() {
        let id = SigningIdentity::derive(&OrgId::from("Org1"), 1);
        let sig = id.sign(b"hello");
        assert!(id.msp().verify(b"hello", &sig));
        assert!(!id.msp().verify(b"hellp", &sig));
        let other = SigningIdentity::derive(&OrgId::from("Org2"), 1);
        assert!(!other.msp().verify(b"hello", &sig));
        assert!(!id.msp().verify(b"hello", &SignatureBytes(alloc::vec![1, 2, 3])));
    }
}
