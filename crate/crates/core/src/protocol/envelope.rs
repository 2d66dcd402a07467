//! Signed and encrypted seed hand-off from the leader to each input party.
//!
//! Encoding: `sender (8) | recipient (8) | ciphertext_len u64 LE | ciphertext
//! | signature`. The signature covers `sender | recipient | ciphertext`; the
//! plaintext is `seed u64 | f u64 | k u64`, all little-endian.

use super::crypto::{CryptoSuite, SecretKeys};
use super::registry::PartyRegistry;
use crate::error::{Error, Result};
use crate::linalg::MaskDims;
use crate::party::{PartyId, PARTY_ID_LEN};

const PLAINTEXT_LEN: usize = 24;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeedEnvelope {
    pub sender: PartyId,
    pub recipient: PartyId,
    pub ciphertext: Vec<u8>,
    pub signature: Vec<u8>,
}

impl SeedEnvelope {
    fn signed_bytes(sender: &PartyId, recipient: &PartyId, ciphertext: &[u8]) -> Vec<u8> {
        [sender.to_wire().as_slice(), &recipient.to_wire(), ciphertext].concat()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(2 * PARTY_ID_LEN + 8 + self.ciphertext.len() + self.signature.len());
        out.extend_from_slice(&self.sender.to_wire());
        out.extend_from_slice(&self.recipient.to_wire());
        out.extend_from_slice(&(self.ciphertext.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.ciphertext);
        out.extend_from_slice(&self.signature);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fixed = 2 * PARTY_ID_LEN + 8;
        if bytes.len() < fixed {
            return Err(Error::Frame("seed envelope too short".into()));
        }
        let sender = PartyId::from_wire(bytes[..8].try_into().expect("id"))?;
        let recipient = PartyId::from_wire(bytes[8..16].try_into().expect("id"))?;
        let ct_len = u64::from_le_bytes(bytes[16..24].try_into().expect("u64"));
        let rest = &bytes[fixed..];
        if ct_len > rest.len() as u64 {
            return Err(Error::Frame("seed envelope ciphertext length exceeds envelope".into()));
        }
        let (ciphertext, signature) = rest.split_at(ct_len as usize);
        Ok(SeedEnvelope { sender, recipient, ciphertext: ciphertext.to_vec(), signature: signature.to_vec() })
    }
}

pub fn seal_seed(
    suite: &dyn CryptoSuite,
    registry: &PartyRegistry,
    seed: u64,
    dims: MaskDims,
    sender: &PartyId,
    sender_secret: &SecretKeys,
    recipient: &PartyId,
) -> Result<SeedEnvelope> {
    let recipient_keys = registry.public_keys(recipient)?;
    let mut plaintext = Vec::with_capacity(PLAINTEXT_LEN);
    plaintext.extend_from_slice(&seed.to_le_bytes());
    plaintext.extend_from_slice(&(dims.features as u64).to_le_bytes());
    plaintext.extend_from_slice(&(dims.width as u64).to_le_bytes());
    let ciphertext = suite.encrypt(sender_secret, &recipient_keys, &plaintext)?;
    let signature = suite.sign(sender_secret, &SeedEnvelope::signed_bytes(sender, recipient, &ciphertext));
    Ok(SeedEnvelope { sender: sender.clone(), recipient: recipient.clone(), ciphertext, signature })
}

/// Verifies the sender's signature, then decrypts.
pub fn open_seed(
    suite: &dyn CryptoSuite,
    registry: &PartyRegistry,
    envelope: &SeedEnvelope,
    recipient_secret: &SecretKeys,
) -> Result<(u64, MaskDims)> {
    let sender_keys = registry.public_keys(&envelope.sender)?;
    let signed = SeedEnvelope::signed_bytes(&envelope.sender, &envelope.recipient, &envelope.ciphertext);
    suite.verify(&sender_keys, &signed, &envelope.signature)?;
    let plaintext = suite.decrypt(recipient_secret, &sender_keys, &envelope.ciphertext)?;
    if plaintext.len() != PLAINTEXT_LEN {
        return Err(Error::DecryptionFailed);
    }
    let word = |i: usize| u64::from_le_bytes(plaintext[8 * i..8 * i + 8].try_into().expect("u64"));
    let dims = MaskDims::new(word(1) as usize, word(2) as usize)?;
    Ok((word(0), dims))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::crypto::{DalekSuite, FakeSuite};
    use crate::protocol::registry::{Endpoint, RegistryEntry};

    fn setup(suite: &dyn CryptoSuite) -> (PartyRegistry, Vec<(PartyId, SecretKeys)>) {
        let parties: Vec<(PartyId, SecretKeys)> =
            ["A", "B", "C"].iter().enumerate().map(|(i, id)| (PartyId::new(*id).unwrap(), SecretKeys::from_seed(10 + i as u64))).collect();
        let entries = parties
            .iter()
            .map(|(id, sk)| RegistryEntry::new(id.clone(), &suite.public_keys(sk), Endpoint { address: "127.0.0.1".into(), port: 0 }))
            .collect();
        (PartyRegistry::new(Endpoint { address: "127.0.0.1".into(), port: 1 }, entries).unwrap(), parties)
    }

    #[test]
    fn seal_open_round_trip_for_both_suites() {
        for suite in [&DalekSuite as &dyn CryptoSuite, &FakeSuite] {
            let (registry, parties) = setup(suite);
            let dims = MaskDims::new(20, 40).unwrap();
            let env = seal_seed(suite, &registry, 0xDEAD_BEEF, dims, &parties[0].0, &parties[0].1, &parties[1].0).unwrap();
            let decoded = SeedEnvelope::from_bytes(&env.to_bytes()).unwrap();
            assert_eq!(decoded, env);
            assert_eq!(open_seed(suite, &registry, &decoded, &parties[1].1).unwrap(), (0xDEAD_BEEF, dims));
        }
    }

    #[test]
    fn tampering_wrong_key_and_unknown_recipient() {
        let suite = &DalekSuite;
        let (registry, parties) = setup(suite);
        let dims = MaskDims::doubled(3).unwrap();
        let env = seal_seed(suite, &registry, 7, dims, &parties[0].0, &parties[0].1, &parties[1].0).unwrap();

        let mut tampered = env.clone();
        tampered.ciphertext[5] ^= 0x01;
        assert!(matches!(open_seed(suite, &registry, &tampered, &parties[1].1), Err(Error::SignatureInvalid)));

        assert!(matches!(open_seed(suite, &registry, &env, &parties[2].1), Err(Error::DecryptionFailed)));

        let stranger = PartyId::new("Z").unwrap();
        assert!(matches!(
            seal_seed(suite, &registry, 7, dims, &parties[0].0, &parties[0].1, &stranger),
            Err(Error::UnknownParty(_))
        ));
    }
}
