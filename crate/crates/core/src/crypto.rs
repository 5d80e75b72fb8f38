//! Deterministic primitives shared by the rest of the crate.
//!
//! The PRF is `SHA3-256(key || tag || data)` with a one-octet domain tag,
//! the cipher is AES-256-GCM under a fixed zero nonce, and signatures are
//! RFC 6979 ECDSA over secp256k1 with SHA-256 message hashing and low-S
//! normalisation. Nothing in here draws randomness.

use std::fmt;

use aes_gcm::aead::Aead;
use aes_gcm::{Aes256Gcm, KeyInit, Nonce};
use k256::ecdsa::signature::{Signer, Verifier};
use k256::ecdsa::{Signature, SigningKey, VerifyingKey};
use k256::elliptic_curve::ops::Reduce;
use k256::elliptic_curve::Group;
use k256::elliptic_curve::sec1::ToEncodedPoint;
use k256::{FieldBytes, NonZeroScalar, ProjectivePoint, PublicKey, Scalar, U256};
use ripemd::Ripemd160;
use sha2::Sha256;
use sha3::{Digest, Sha3_256};

use crate::error::{Error, Result};

/// Nonce length of the AEAD; the nonce itself is always zero.
pub const NONCE_LEN: usize = 12;
/// GCM authentication tag length.
pub const TAG_LEN: usize = 16;
/// Retry cap for rejection sampling and perturbation re-hashing.
pub const MAX_ATTEMPTS: usize = 1000;

/// Domain separation prefix for [`prf`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum PrfTag {
    /// Derivation tag `t_i`.
    DerivationTag = 0x00,
    /// Cryptographic key `x_i`.
    Key = 0x01,
    /// Edge key `r_ij`.
    EdgeKey = 0x02,
    /// Node secret `S_i`, also used for perturbation offsets.
    Secret = 0x03,
}

/// A PRF key: either a 64-octet root seed or a 32-octet node secret.
#[derive(Clone, Copy)]
pub struct PrfKey<'a>(&'a [u8]);

impl<'a> PrfKey<'a> {
    pub fn new(bytes: &'a [u8]) -> Result<Self> {
        match bytes.len() {
            32 | 64 => Ok(PrfKey(bytes)),
            n => Err(Error::InvalidKeyLength {
                expected: "32 or 64",
                actual: n,
            }),
        }
    }

    pub fn as_bytes(&self) -> &'a [u8] {
        self.0
    }
}

impl<'a> From<&'a [u8; 32]> for PrfKey<'a> {
    fn from(b: &'a [u8; 32]) -> Self {
        PrfKey(b)
    }
}

impl<'a> From<&'a [u8; 64]> for PrfKey<'a> {
    fn from(b: &'a [u8; 64]) -> Self {
        PrfKey(b)
    }
}

pub fn prf(key: PrfKey<'_>, tag: PrfTag, data: &[u8]) -> [u8; 32] {
    let mut h = Sha3_256::new();
    h.update(key.0);
    h.update([tag as u8]);
    h.update(data);
    h.finalize().into()
}

pub fn sha3_256(data: &[u8]) -> [u8; 32] {
    Sha3_256::digest(data).into()
}

pub fn sha256(data: &[u8]) -> [u8; 32] {
    Sha256::digest(data).into()
}

/// RIPEMD160(SHA-256(data)).
pub fn hash160(data: &[u8]) -> [u8; 20] {
    Ripemd160::digest(Sha256::digest(data)).into()
}

/// 32-octet AES-256-GCM key.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct SymmetricKey(pub [u8; 32]);

impl fmt::Debug for SymmetricKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SymmetricKey(..)")
    }
}

/// Returns `nonce || ciphertext || tag` under the all-zero nonce.
///
/// Every key in the key-assignment scheme encrypts exactly one message, so
/// the fixed nonce is never reused under a key.
pub fn aead_seal(key: &SymmetricKey, plaintext: &[u8]) -> Vec<u8> {
    let cipher = Aes256Gcm::new(&key.0.into());
    let nonce = [0u8; NONCE_LEN];
    let body = cipher
        .encrypt(Nonce::from_slice(&nonce), plaintext)
        .expect("AES-GCM encryption of in-memory buffers cannot fail");
    let mut out = Vec::with_capacity(NONCE_LEN + body.len());
    out.extend_from_slice(&nonce);
    out.extend_from_slice(&body);
    out
}

pub fn aead_open(key: &SymmetricKey, ciphertext: &[u8]) -> Result<Vec<u8>> {
    if ciphertext.len() < NONCE_LEN + TAG_LEN {
        return Err(Error::MalformedCiphertext(ciphertext.len()));
    }
    let (nonce, body) = ciphertext.split_at(NONCE_LEN);
    Aes256Gcm::new(&key.0.into())
        .decrypt(Nonce::from_slice(nonce), body)
        .map_err(|_| Error::AuthFailure)
}

/// SEC1 compressed secp256k1 point.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CompressedPoint([u8; 33]);

impl CompressedPoint {
    /// Parses and validates a 33-octet compressed point.
    pub fn from_slice(bytes: &[u8]) -> Result<Self> {
        let arr: [u8; 33] = bytes.try_into().map_err(|_| Error::InvalidPoint)?;
        if arr[0] != 0x02 && arr[0] != 0x03 {
            return Err(Error::InvalidPoint);
        }
        PublicKey::from_sec1_bytes(&arr).map_err(|_| Error::InvalidPoint)?;
        Ok(CompressedPoint(arr))
    }

    pub fn as_bytes(&self) -> &[u8; 33] {
        &self.0
    }

    fn from_projective(p: &ProjectivePoint) -> Option<Self> {
        if bool::from(p.is_identity()) {
            return None;
        }
        let enc = p.to_affine().to_encoded_point(true);
        Some(CompressedPoint(enc.as_bytes().try_into().ok()?))
    }

    fn to_projective(self) -> ProjectivePoint {
        PublicKey::from_sec1_bytes(&self.0)
            .expect("validated at construction")
            .to_projective()
    }

    /// `g^scalar`.
    pub fn from_secret(scalar: &NonZeroScalar) -> Self {
        Self::from_projective(&(ProjectivePoint::GENERATOR * scalar.as_ref()))
            .expect("non-zero scalar times generator is never the identity")
    }
}

impl fmt::Debug for CompressedPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CompressedPoint({})", hex::encode(self.0))
    }
}

impl fmt::Display for CompressedPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

/// secp256k1 signing key pair.
#[derive(Clone)]
pub struct KeyPair {
    signing: SigningKey,
    public: CompressedPoint,
}

impl KeyPair {
    pub fn from_scalar(scalar: NonZeroScalar) -> Self {
        let public = CompressedPoint::from_secret(&scalar);
        KeyPair {
            signing: SigningKey::from(scalar),
            public,
        }
    }

    pub fn public(&self) -> CompressedPoint {
        self.public
    }

    pub fn secret_scalar(&self) -> NonZeroScalar {
        *self.signing.as_nonzero_scalar()
    }

    pub fn secret_bytes(&self) -> [u8; 32] {
        self.signing.to_bytes().into()
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair").field("public", &self.public).finish_non_exhaustive()
    }
}

impl PartialEq for KeyPair {
    fn eq(&self, other: &Self) -> bool {
        self.public == other.public && self.secret_bytes() == other.secret_bytes()
    }
}

impl Eq for KeyPair {}

/// Key generation with fixed randomness `x`.
///
/// `x` is read as a big-endian integer; values that are zero or not below
/// the group order are replaced by `SHA3-256(x)` and tried again.
pub fn keygen_from_bytes(x: &[u8; 32]) -> Result<KeyPair> {
    let mut candidate = *x;
    for _ in 0..MAX_ATTEMPTS {
        if let Ok(sk) = SigningKey::from_bytes(&FieldBytes::from(candidate)) {
            let public = CompressedPoint::from_secret(sk.as_nonzero_scalar());
            return Ok(KeyPair {
                signing: sk,
                public,
            });
        }
        candidate = sha3_256(&candidate);
    }
    Err(Error::Internal("keygen rejection loop exhausted"))
}

/// DER-encoded low-S ECDSA signature over `SHA-256(msg)`.
pub fn sign_msg(kp: &KeyPair, msg: &[u8]) -> Vec<u8> {
    let sig: Signature = kp.signing.sign(msg);
    let sig = sig.normalize_s().unwrap_or(sig);
    sig.to_der().as_bytes().to_vec()
}

/// Verifies a DER low-S signature; any malformed input yields `false`.
pub fn verify_msg(public: &[u8], msg: &[u8], sig: &[u8]) -> bool {
    let Ok(vk) = VerifyingKey::from_sec1_bytes(public) else {
        return false;
    };
    let Ok(sig) = Signature::from_der(sig) else {
        return false;
    };
    if sig.normalize_s().is_some() {
        // high-S
        return false;
    }
    vk.verify(msg, &sig).is_ok()
}

/// Big-endian interpretation of 32 octets reduced modulo the group order.
pub fn reduce_scalar(bytes: &[u8; 32]) -> Scalar {
    <Scalar as Reduce<U256>>::reduce_bytes(&FieldBytes::from(*bytes))
}

/// Perturbation offsets for `label`, in retry order: the PRF of the label,
/// then of the label with one, two, ... zero octets appended.
fn perturbation_offsets<'a>(
    chain_code: PrfKey<'a>,
    label: &'a [u8],
) -> impl Iterator<Item = Scalar> + 'a {
    let mut data = label.to_vec();
    let mut first = true;
    std::iter::from_fn(move || {
        if !first {
            data.push(0x00);
        }
        first = false;
        Some(reduce_scalar(&prf(chain_code, PrfTag::Secret, &data)))
    })
    .take(MAX_ATTEMPTS)
}

/// The first perturbation offset, `scalar(PRF_c(label))`.
pub fn perturbation_offset(chain_code: PrfKey<'_>, label: &[u8]) -> Scalar {
    reduce_scalar(&prf(chain_code, PrfTag::Secret, label))
}

/// `base + scalar(PRF_c(label)) mod n`.
pub fn perturb_secret(
    base: &NonZeroScalar,
    chain_code: PrfKey<'_>,
    label: &[u8],
) -> Result<NonZeroScalar> {
    for offset in perturbation_offsets(chain_code, label) {
        let s = *base.as_ref() + offset;
        if let Some(nz) = Option::from(NonZeroScalar::new(s)) {
            return Ok(nz);
        }
    }
    Err(Error::DegenerateKey)
}

/// `base * g^scalar(PRF_c(label))`; agrees with [`perturb_secret`].
pub fn perturb_public(
    base: &CompressedPoint,
    chain_code: PrfKey<'_>,
    label: &[u8],
) -> Result<CompressedPoint> {
    let base = base.to_projective();
    for offset in perturbation_offsets(chain_code, label) {
        let p = base + ProjectivePoint::GENERATOR * offset;
        if let Some(c) = CompressedPoint::from_projective(&p) {
            return Ok(c);
        }
    }
    Err(Error::DegenerateKey)
}
