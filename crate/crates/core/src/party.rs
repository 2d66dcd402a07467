use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width of a party id on the wire.
pub const PARTY_ID_LEN: usize = 8;

/// Identifier of a protocol participant.
///
/// Ids are 1 to 8 printable ASCII bytes so that they fit the fixed-width
/// frame header field. Ordering is lexicographic on the bytes.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PartyId(String);

impl PartyId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        let valid = !id.is_empty()
            && id.len() <= PARTY_ID_LEN
            && id.bytes().all(|b| b.is_ascii_graphic());
        if valid {
            Ok(PartyId(id))
        } else {
            Err(Error::InvalidPartyId(id))
        }
    }

    /// Id the function party uses in the frames it originates.
    pub fn function_party() -> Self {
        PartyId("FUNCTION".to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn to_wire(&self) -> [u8; PARTY_ID_LEN] {
        let mut out = [0u8; PARTY_ID_LEN];
        out[..self.0.len()].copy_from_slice(self.0.as_bytes());
        out
    }

    pub fn from_wire(bytes: &[u8; PARTY_ID_LEN]) -> Result<Self> {
        let end = bytes.iter().position(|&b| b == 0).unwrap_or(PARTY_ID_LEN);
        if bytes[end..].iter().any(|&b| b != 0) {
            return Err(Error::InvalidPartyId(format!("{bytes:?}")));
        }
        let text = std::str::from_utf8(&bytes[..end])
            .map_err(|_| Error::InvalidPartyId(format!("{bytes:?}")))?;
        PartyId::new(text)
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PartyId({})", self.0)
    }
}

impl FromStr for PartyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PartyId::new(s)
    }
}

impl TryFrom<String> for PartyId {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        PartyId::new(value)
    }
}

impl From<PartyId> for String {
    fn from(id: PartyId) -> Self {
        id.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_round_trip_pads_with_zeros() {
        let id = PartyId::new("alice").unwrap();
        let wire = id.to_wire();
        assert_eq!(&wire, b"alice\0\0\0");
        assert_eq!(PartyId::from_wire(&wire).unwrap(), id);
    }

    #[test]
    fn rejects_bad_ids() {
        assert!(PartyId::new("").is_err());
        assert!(PartyId::new("way-too-long").is_err());
        assert!(PartyId::new("a b").is_err());
        assert!(PartyId::from_wire(b"ab\0cd\0\0\0").is_err());
    }

    #[test]
    fn ordering_is_lexicographic() {
        let mut ids: Vec<PartyId> = ["B", "A", "C"].iter().map(|s| s.parse().unwrap()).collect();
        ids.sort();
        assert_eq!(ids[0].as_str(), "A");
    }
}
