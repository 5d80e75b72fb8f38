//! On-disk formats for public parameters and passphrase-sealed secrets.
//!
//! Both files start with a 4-octet magic and a big-endian u16 format
//! version; all integers are big-endian and all variable fields are length
//! prefixed. Encoding is canonical, so equal states give equal files.

use std::fs;
use std::path::Path;

use pbkdf2::pbkdf2_hmac;
use sha2::Sha256;

use crate::codec::{Reader, Writer};
use crate::crypto::{aead_open, aead_seal, sha3_256, CompressedPoint, SymmetricKey};
use crate::dhka::{NodeSecrets, PublicMapping, SecretTable};
use crate::error::{Error, Result};
use crate::hierarchy::{AccessHierarchy, Dag};
use crate::wallet::{Certificate, WalletPublicParams};

pub const PP_MAGIC: &[u8; 4] = b"ARPP";
pub const SECRETS_MAGIC: &[u8; 4] = b"ARSK";
pub const FORMAT_VERSION: u16 = 1;
pub const KDF_ROUNDS: u32 = 20_000;

fn header(w: &mut Writer, magic: &[u8; 4]) {
    w.raw(magic);
    w.u16(FORMAT_VERSION);
}

fn check_header(r: &mut Reader<'_>, magic: &[u8; 4]) -> Result<()> {
    if &r.array::<4>()? != magic {
        return Err(Error::CorruptFile("bad magic".into()));
    }
    let v = r.u16()?;
    if v != FORMAT_VERSION {
        return Err(Error::CorruptFile(format!("unsupported format version {v}")));
    }
    Ok(())
}

pub fn pp_to_bytes(pp: &WalletPublicParams) -> Vec<u8> {
    let mut w = Writer::default();
    header(&mut w, PP_MAGIC);
    let h = &pp.hierarchy;
    w.u32(h.root());
    w.count(h.node_count());
    for n in h.nodes() {
        w.u32(n);
        w.u32(h.version(n));
    }
    w.count(h.edge_count());
    for (a, b) in h.edges() {
        w.u32(a);
        w.u32(b);
    }
    pp.mapping.encode(&mut w);
    w.count(pp.certs.len());
    for (n, cert) in &pp.certs {
        w.u32(*n);
        match cert.expiry {
            None => w.u8(0),
            Some(e) => {
                w.u8(1);
                w.u32(e);
            }
        }
        w.bytes8(&cert.sig);
    }
    w.raw(pp.mpk.as_bytes());
    w.buf
}

pub fn pp_from_bytes(bytes: &[u8]) -> Result<WalletPublicParams> {
    let corrupt = |e: Error| match e {
        Error::CorruptFile(_) => e,
        other => Error::CorruptFile(other.to_string()),
    };
    let mut r = Reader::new(bytes);
    check_header(&mut r, PP_MAGIC)?;
    let root = r.u32()?;
    let mut nodes = Vec::new();
    let mut versions = std::collections::BTreeMap::new();
    for _ in 0..r.u32()? {
        let n = r.u32()?;
        nodes.push(n);
        versions.insert(n, r.u32()?);
    }
    let mut edges = Vec::new();
    for _ in 0..r.u32()? {
        edges.push((r.u32()?, r.u32()?));
    }
    let hierarchy = AccessHierarchy::from_dag(Dag::new(nodes, edges).map_err(corrupt)?)
        .and_then(|h| h.with_versions(versions))
        .map_err(corrupt)?;
    if hierarchy.root() != root {
        return Err(Error::CorruptFile("root mismatch".into()));
    }
    let mapping = PublicMapping::decode(&mut r)?;
    let mut certs = std::collections::BTreeMap::new();
    for _ in 0..r.u32()? {
        let n = r.u32()?;
        let expiry = match r.u8()? {
            0 => None,
            1 => Some(r.u32()?),
            f => return Err(Error::CorruptFile(format!("bad expiry flag {f}"))),
        };
        let sig = r.bytes8()?.to_vec();
        certs.insert(n, Certificate { sig, expiry });
    }
    let mpk = CompressedPoint::from_slice(&r.array::<33>()?).map_err(corrupt)?;
    r.finish()?;
    let consistent = hierarchy.nodes().eq(mapping.labels.keys().copied())
        && hierarchy.nodes().eq(certs.keys().copied())
        && hierarchy.nodes().all(|n| mapping.labels[&n].version == hierarchy.version(n));
    if !consistent {
        return Err(Error::CorruptFile("tables disagree with the hierarchy".into()));
    }
    Ok(WalletPublicParams { hierarchy, mapping, certs, mpk })
}

fn secrets_plaintext(table: &SecretTable) -> Vec<u8> {
    let mut w = Writer::default();
    w.count(table.len());
    for (n, s) in table {
        w.u32(*n);
        w.raw(&s.secret);
        w.raw(&s.tag);
        w.raw(&s.key);
    }
    w.buf
}

fn passphrase_key(passphrase: &str, salt: &[u8; 32], rounds: u32) -> SymmetricKey {
    let mut key = [0u8; 32];
    pbkdf2_hmac::<Sha256>(passphrase.as_bytes(), salt, rounds, &mut key);
    SymmetricKey(key)
}

/// Seals the secret table. The KDF salt is a hash of the plaintext, so the
/// output is deterministic and a key never seals two different tables.
pub fn secrets_to_bytes(table: &SecretTable, passphrase: &str) -> Vec<u8> {
    let plaintext = secrets_plaintext(table);
    let mut salt_input = b"arcula-store".to_vec();
    salt_input.extend_from_slice(&plaintext);
    let salt = sha3_256(&salt_input);
    let mut w = Writer::default();
    header(&mut w, SECRETS_MAGIC);
    w.u32(KDF_ROUNDS);
    w.raw(&salt);
    w.raw(&aead_seal(&passphrase_key(passphrase, &salt, KDF_ROUNDS), &plaintext));
    w.buf
}

pub fn secrets_from_bytes(bytes: &[u8], passphrase: &str) -> Result<SecretTable> {
    let mut r = Reader::new(bytes);
    check_header(&mut r, SECRETS_MAGIC)?;
    let rounds = r.u32()?;
    if rounds == 0 {
        return Err(Error::CorruptFile("zero KDF rounds".into()));
    }
    let salt = r.array::<32>()?;
    let sealed = &bytes[4 + 2 + 4 + 32..];
    let plaintext = match aead_open(&passphrase_key(passphrase, &salt, rounds), sealed) {
        Ok(p) => p,
        Err(Error::MalformedCiphertext(n)) => {
            return Err(Error::CorruptFile(format!("sealed body of {n} octets")))
        }
        Err(_) => return Err(Error::WrongPassphrase),
    };
    let mut r = Reader::new(&plaintext);
    let mut table = SecretTable::new();
    for _ in 0..r.u32()? {
        let n = r.u32()?;
        let s = NodeSecrets {
            secret: r.array()?,
            tag: r.array()?,
            key: r.array()?,
        };
        table.insert(n, s);
    }
    r.finish()?;
    Ok(table)
}

pub fn save_pp(path: impl AsRef<Path>, pp: &WalletPublicParams) -> Result<()> {
    Ok(fs::write(path, pp_to_bytes(pp))?)
}

pub fn load_pp(path: impl AsRef<Path>) -> Result<WalletPublicParams> {
    pp_from_bytes(&fs::read(path)?)
}

pub fn save_secrets(path: impl AsRef<Path>, table: &SecretTable, passphrase: &str) -> Result<()> {
    Ok(fs::write(path, secrets_to_bytes(table, passphrase))?)
}

pub fn load_secrets(path: impl AsRef<Path>, passphrase: &str) -> Result<SecretTable> {
    secrets_from_bytes(&fs::read(path)?, passphrase)
}
