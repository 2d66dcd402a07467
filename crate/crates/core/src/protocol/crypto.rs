//! Signature and public-key encryption behind one interface.
//!
//! Every suite works on the same key material: two 32-byte secrets per party
//! (one for signing, one for encryption) and the derived public halves.

use std::fmt;

use crypto_box::aead::rand_core::RngCore;
use crypto_box::aead::{Aead, AeadCore, OsRng};
use crypto_box::SalsaBox;
use ed25519_dalek::{Signer, Verifier};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const KEY_LEN: usize = 32;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PublicKeys {
    pub signing: [u8; KEY_LEN],
    pub encryption: [u8; KEY_LEN],
}

impl fmt::Debug for PublicKeys {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKeys(sig {:02x?}.., enc {:02x?}..)", &self.signing[..4], &self.encryption[..4])
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct SecretKeys {
    pub signing: [u8; KEY_LEN],
    pub encryption: [u8; KEY_LEN],
}

impl fmt::Debug for SecretKeys {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretKeys(..)")
    }
}

impl SecretKeys {
    pub fn random() -> Self {
        let mut keys = SecretKeys { signing: [0; KEY_LEN], encryption: [0; KEY_LEN] };
        OsRng.fill_bytes(&mut keys.signing);
        OsRng.fill_bytes(&mut keys.encryption);
        keys
    }

    /// Reproducible keys for tests and loopback runs. Not for real use.
    pub fn from_seed(seed: u64) -> Self {
        let derive = |tag: &[u8]| -> [u8; KEY_LEN] { Sha256::new().chain_update(tag).chain_update(seed.to_le_bytes()).finalize().into() };
        SecretKeys { signing: derive(b"sign"), encryption: derive(b"encrypt") }
    }
}

pub trait CryptoSuite: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;
    fn public_keys(&self, secret: &SecretKeys) -> PublicKeys;
    fn sign(&self, secret: &SecretKeys, message: &[u8]) -> Vec<u8>;
    /// Fails with [`Error::SignatureInvalid`].
    fn verify(&self, signer: &PublicKeys, message: &[u8], signature: &[u8]) -> Result<()>;
    fn encrypt(&self, sender: &SecretKeys, recipient: &PublicKeys, plaintext: &[u8]) -> Result<Vec<u8>>;
    /// Fails with [`Error::DecryptionFailed`].
    fn decrypt(&self, recipient: &SecretKeys, sender: &PublicKeys, ciphertext: &[u8]) -> Result<Vec<u8>>;
}

/// Ed25519 signatures and X25519 + XSalsa20-Poly1305 boxes. The 24-byte
/// nonce is prepended to the ciphertext.
#[derive(Clone, Copy, Debug, Default)]
pub struct DalekSuite;

const NONCE_LEN: usize = 24;

impl CryptoSuite for DalekSuite {
    fn name(&self) -> &'static str {
        "ed25519-x25519-xsalsa20poly1305"
    }

    fn public_keys(&self, secret: &SecretKeys) -> PublicKeys {
        PublicKeys {
            signing: ed25519_dalek::SigningKey::from_bytes(&secret.signing).verifying_key().to_bytes(),
            encryption: crypto_box::SecretKey::from_bytes(secret.encryption).public_key().to_bytes(),
        }
    }

    fn sign(&self, secret: &SecretKeys, message: &[u8]) -> Vec<u8> {
        ed25519_dalek::SigningKey::from_bytes(&secret.signing).sign(message).to_bytes().to_vec()
    }

    fn verify(&self, signer: &PublicKeys, message: &[u8], signature: &[u8]) -> Result<()> {
        let key = ed25519_dalek::VerifyingKey::from_bytes(&signer.signing).map_err(|_| Error::SignatureInvalid)?;
        let signature = ed25519_dalek::Signature::from_slice(signature).map_err(|_| Error::SignatureInvalid)?;
        key.verify(message, &signature).map_err(|_| Error::SignatureInvalid)
    }

    fn encrypt(&self, sender: &SecretKeys, recipient: &PublicKeys, plaintext: &[u8]) -> Result<Vec<u8>> {
        let secret = crypto_box::SecretKey::from_bytes(sender.encryption);
        let salsa = SalsaBox::new(&crypto_box::PublicKey::from_bytes(recipient.encryption), &secret);
        let nonce = SalsaBox::generate_nonce(&mut OsRng);
        let sealed = salsa.encrypt(&nonce, plaintext).map_err(|_| Error::Protocol("encryption failed".into()))?;
        Ok([nonce.as_slice(), &sealed].concat())
    }

    fn decrypt(&self, recipient: &SecretKeys, sender: &PublicKeys, ciphertext: &[u8]) -> Result<Vec<u8>> {
        if ciphertext.len() < NONCE_LEN {
            return Err(Error::DecryptionFailed);
        }
        let (nonce, sealed) = ciphertext.split_at(NONCE_LEN);
        let secret = crypto_box::SecretKey::from_bytes(recipient.encryption);
        let salsa = SalsaBox::new(&crypto_box::PublicKey::from_bytes(sender.encryption), &secret);
        salsa.decrypt(crypto_box::Nonce::from_slice(nonce), sealed).map_err(|_| Error::DecryptionFailed)
    }
}

/// Deterministic stand-in that keeps protocol tests hermetic.
///
/// INSECURE: public keys are hashes of the secrets, so anyone holding the
/// registry can forge signatures and read ciphertexts. It does honour the
/// failure modes of the real suite towards parties following the protocol
/// (tampering breaks verification, a wrong recipient key fails decryption).
#[derive(Clone, Copy, Debug, Default)]
pub struct FakeSuite;

fn hash(parts: &[&[u8]]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part);
    }
    hasher.finalize().into()
}

fn keystream_xor(key: &[u8; 32], data: &[u8]) -> Vec<u8> {
    data.chunks(32)
        .enumerate()
        .flat_map(|(block, chunk)| {
            let pad = hash(&[b"stream", key, &(block as u64).to_le_bytes()]);
            chunk.iter().zip(pad).map(|(b, p)| b ^ p).collect::<Vec<_>>()
        })
        .collect()
}

const FAKE_TAG_LEN: usize = 16;

impl CryptoSuite for FakeSuite {
    fn name(&self) -> &'static str {
        "fake-insecure"
    }

    fn public_keys(&self, secret: &SecretKeys) -> PublicKeys {
        PublicKeys { signing: hash(&[b"sign-pub", &secret.signing]), encryption: hash(&[b"enc-pub", &secret.encryption]) }
    }

    fn sign(&self, secret: &SecretKeys, message: &[u8]) -> Vec<u8> {
        hash(&[b"sig", &self.public_keys(secret).signing, message]).to_vec()
    }

    fn verify(&self, signer: &PublicKeys, message: &[u8], signature: &[u8]) -> Result<()> {
        if hash(&[b"sig", &signer.signing, message]).as_slice() == signature {
            Ok(())
        } else {
            Err(Error::SignatureInvalid)
        }
    }

    fn encrypt(&self, _sender: &SecretKeys, recipient: &PublicKeys, plaintext: &[u8]) -> Result<Vec<u8>> {
        let mut out = keystream_xor(&recipient.encryption, plaintext);
        out.extend_from_slice(&hash(&[b"tag", &recipient.encryption, plaintext])[..FAKE_TAG_LEN]);
        Ok(out)
    }

    fn decrypt(&self, recipient: &SecretKeys, _sender: &PublicKeys, ciphertext: &[u8]) -> Result<Vec<u8>> {
        if ciphertext.len() < FAKE_TAG_LEN {
            return Err(Error::DecryptionFailed);
        }
        let (body, tag) = ciphertext.split_at(ciphertext.len() - FAKE_TAG_LEN);
        let key = self.public_keys(recipient).encryption;
        let plaintext = keystream_xor(&key, body);
        if &hash(&[b"tag", &key, &plaintext])[..FAKE_TAG_LEN] == tag {
            Ok(plaintext)
        } else {
            Err(Error::DecryptionFailed)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn suites() -> Vec<Box<dyn CryptoSuite>> {
        vec![Box::new(DalekSuite), Box::new(FakeSuite)]
    }

    #[test]
    fn sign_verify_and_tamper() {
        for suite in suites() {
            let alice = SecretKeys::from_seed(1);
            let public = suite.public_keys(&alice);
            let sig = suite.sign(&alice, b"message");
            suite.verify(&public, b"message", &sig).unwrap();
            assert!(matches!(suite.verify(&public, b"massage", &sig), Err(Error::SignatureInvalid)));
            let other = suite.public_keys(&SecretKeys::from_seed(2));
            assert!(matches!(suite.verify(&other, b"message", &sig), Err(Error::SignatureInvalid)));
        }
    }

    #[test]
    fn encrypt_decrypt_and_wrong_key() {
        for suite in suites() {
            let (alice, bob, eve) = (SecretKeys::from_seed(1), SecretKeys::from_seed(2), SecretKeys::from_seed(3));
            let ct = suite.encrypt(&alice, &suite.public_keys(&bob), b"seed bytes").unwrap();
            assert_eq!(suite.decrypt(&bob, &suite.public_keys(&alice), &ct).unwrap(), b"seed bytes");
            assert!(matches!(suite.decrypt(&eve, &suite.public_keys(&alice), &ct), Err(Error::DecryptionFailed)));
            let mut tampered = ct.clone();
            tampered[ct.len() / 2] ^= 1;
            assert!(suite.decrypt(&bob, &suite.public_keys(&alice), &tampered).is_err());
        }
    }

    #[test]
    fn fake_suite_is_deterministic() {
        let bob = FakeSuite.public_keys(&SecretKeys::from_seed(2));
        let a = FakeSuite.encrypt(&SecretKeys::from_seed(1), &bob, b"x").unwrap();
        let b = FakeSuite.encrypt(&SecretKeys::from_seed(1), &bob, b"x").unwrap();
        assert_eq!(a, b);
        assert_ne!(SecretKeys::random(), SecretKeys::random());
    }
}
