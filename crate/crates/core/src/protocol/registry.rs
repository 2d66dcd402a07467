//! Static key registry standing in for the trusted key distributor.
//!
//! ```json
//! {
//!   "function_party": {"address": "127.0.0.1", "port": 7000},
//!   "parties": [
//!     {"party_id": "A", "signing_key": "<b64>", "encryption_key": "<b64>",
//!      "address": "127.0.0.1", "port": 0}
//!   ],
//!   "signature": "<b64, optional>"
//! }
//! ```

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::crypto::{CryptoSuite, PublicKeys, SecretKeys, KEY_LEN};
use crate::error::{Error, Result};
use crate::PartyId;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Endpoint {
    pub address: String,
    pub port: u16,
}

impl Endpoint {
    pub fn socket_addr(&self) -> String {
        format!("{}:{}", self.address, self.port)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub party_id: PartyId,
    pub signing_key: String,
    pub encryption_key: String,
    pub address: String,
    pub port: u16,
}

impl RegistryEntry {
    pub fn new(party_id: PartyId, keys: &PublicKeys, endpoint: Endpoint) -> Self {
        RegistryEntry {
            party_id,
            signing_key: B64.encode(keys.signing),
            encryption_key: B64.encode(keys.encryption),
            address: endpoint.address,
            port: endpoint.port,
        }
    }

    pub fn public_keys(&self) -> Result<PublicKeys> {
        Ok(PublicKeys { signing: decode_key(&self.signing_key)?, encryption: decode_key(&self.encryption_key)? })
    }
}

fn decode_key(text: &str) -> Result<[u8; KEY_LEN]> {
    let bytes = B64.decode(text).map_err(|e| Error::Registry(format!("bad base64 key: {e}")))?;
    bytes.try_into().map_err(|b: Vec<u8>| Error::Registry(format!("key has {} bytes, expected {KEY_LEN}", b.len())))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartyRegistry {
    pub function_party: Endpoint,
    pub parties: Vec<RegistryEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signature: Option<String>,
}

impl PartyRegistry {
    pub fn new(function_party: Endpoint, parties: Vec<RegistryEntry>) -> Result<Self> {
        let registry = PartyRegistry { function_party, parties, signature: None };
        registry.validate()?;
        Ok(registry)
    }

    /// Unique ids, at least two input parties, decodable keys.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for entry in &self.parties {
            if !seen.insert(&entry.party_id) {
                return Err(Error::DuplicateParty(entry.party_id.clone()));
            }
            if entry.party_id == PartyId::function_party() {
                return Err(Error::Registry("the function party id is reserved".into()));
            }
            entry.public_keys()?;
        }
        if self.parties.len() < 2 {
            return Err(Error::Registry(format!("need at least 2 input parties, got {}", self.parties.len())));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let registry: PartyRegistry = serde_json::from_str(&fs::read_to_string(path)?)?;
        registry.validate()?;
        Ok(registry)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn entry(&self, party: &PartyId) -> Result<&RegistryEntry> {
        self.parties.iter().find(|e| &e.party_id == party).ok_or_else(|| Error::UnknownParty(party.clone()))
    }

    pub fn public_keys(&self, party: &PartyId) -> Result<PublicKeys> {
        self.entry(party)?.public_keys()
    }

    /// Input party ids in ascending order.
    pub fn party_ids(&self) -> Vec<PartyId> {
        let mut ids: Vec<PartyId> = self.parties.iter().map(|e| e.party_id.clone()).collect();
        ids.sort();
        ids
    }

    fn signing_bytes(&self) -> Result<Vec<u8>> {
        let unsigned = PartyRegistry { signature: None, ..self.clone() };
        Ok(serde_json::to_vec(&unsigned)?)
    }

    /// Signs the registry contents with an authority key.
    pub fn sign(&mut self, suite: &dyn CryptoSuite, authority: &SecretKeys) -> Result<()> {
        self.signature = Some(B64.encode(suite.sign(authority, &self.signing_bytes()?)));
        Ok(())
    }

    pub fn verify(&self, suite: &dyn CryptoSuite, authority: &PublicKeys) -> Result<()> {
        let signature = self.signature.as_deref().ok_or(Error::SignatureInvalid)?;
        let signature = B64.decode(signature).map_err(|_| Error::SignatureInvalid)?;
        suite.verify(authority, &self.signing_bytes()?, &signature)
    }
}

/// Lexicographically smallest input party id.
pub fn elect_leader(registry: &PartyRegistry) -> Result<PartyId> {
    match registry.parties.len() {
        0 => Err(Error::Registry("empty registry".into())),
        1 => Err(Error::Registry("a single input party cannot run a private session".into())),
        _ => Ok(registry.party_ids().remove(0)),
    }
}

/// Private key file of one party.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyFile {
    pub party_id: PartyId,
    pub signing_secret: String,
    pub encryption_secret: String,
}

impl KeyFile {
    pub fn new(party_id: PartyId, keys: &SecretKeys) -> Self {
        KeyFile { party_id, signing_secret: B64.encode(keys.signing), encryption_secret: B64.encode(keys.encryption) }
    }

    pub fn secret_keys(&self) -> Result<SecretKeys> {
        Ok(SecretKeys { signing: decode_key(&self.signing_secret)?, encryption: decode_key(&self.encryption_secret)? })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
