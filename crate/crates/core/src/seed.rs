//! BIP39 mnemonics, the reproducible test fixture, and the BIP43/44-style
//! hierarchy template.

use std::sync::OnceLock;

use pbkdf2::pbkdf2_hmac;
use sha2::{Digest, Sha256, Sha512};
use unicode_normalization::UnicodeNormalization;

use crate::crypto::sha3_256;
use crate::dhka::Seed;
use crate::error::{Error, Result};
use crate::hierarchy::{HierarchyFile, NodeId};

const WORDLIST: &str = include_str!("../data/bip39_english.txt");
const PBKDF2_ROUNDS: u32 = 2048;
pub const FIXTURE_PHRASE: &str = "correct horse battery staple";

pub fn wordlist() -> &'static [&'static str] {
    static WORDS: OnceLock<Vec<&'static str>> = OnceLock::new();
    WORDS.get_or_init(|| WORDLIST.lines().collect())
}

fn word_index(word: &str) -> Option<usize> {
    wordlist().binary_search(&word).ok()
}

/// Mnemonic words for 16, 20, 24, 28 or 32 octets of entropy.
pub fn entropy_to_mnemonic(entropy: &[u8]) -> Result<Vec<&'static str>> {
    if !(16..=32).contains(&entropy.len()) || !entropy.len().is_multiple_of(4) {
        return Err(Error::InvalidEntropyLength(entropy.len()));
    }
    let checksum_bits = entropy.len() / 4;
    let checksum = Sha256::digest(entropy)[0];
    let bit = |i: usize| -> usize {
        let byte = if i < entropy.len() * 8 { entropy[i / 8] } else { checksum };
        ((byte >> (7 - i % 8)) & 1) as usize
    };
    let total = entropy.len() * 8 + checksum_bits;
    Ok((0..total / 11)
        .map(|w| wordlist()[(0..11).fold(0, |acc, b| (acc << 1) | bit(w * 11 + b))])
        .collect())
}

/// Entropy encoded by a mnemonic, after word and checksum validation.
pub fn mnemonic_to_entropy(phrase: &str) -> Result<Vec<u8>> {
    let normalized: String = phrase.nfkd().collect();
    let words: Vec<&str> = normalized.split_whitespace().collect();
    if ![12, 15, 18, 21, 24].contains(&words.len()) {
        return Err(Error::InvalidWordCount(words.len()));
    }
    let mut bits = Vec::with_capacity(words.len() * 11);
    for w in &words {
        let idx = word_index(w).ok_or_else(|| Error::InvalidWord(w.to_string()))?;
        bits.extend((0..11).rev().map(|b| (idx >> b) & 1 == 1));
    }
    let checksum_bits = words.len() / 3;
    let entropy: Vec<u8> = bits[..bits.len() - checksum_bits]
        .chunks(8)
        .map(|c| c.iter().fold(0u8, |acc, &b| (acc << 1) | b as u8))
        .collect();
    let expected = Sha256::digest(&entropy)[0] >> (8 - checksum_bits);
    let actual = bits[bits.len() - checksum_bits..]
        .iter()
        .fold(0u8, |acc, &b| (acc << 1) | b as u8);
    if expected != actual {
        return Err(Error::BadChecksum);
    }
    Ok(entropy)
}

/// BIP39 seed: PBKDF2-HMAC-SHA512 over the NFKD mnemonic with salt
/// `"mnemonic" || passphrase`.
pub fn mnemonic_to_seed(phrase: &str, passphrase: &str) -> Result<Seed> {
    mnemonic_to_entropy(phrase)?;
    let normalized: String = phrase.nfkd().collect();
    let sentence = normalized.split_whitespace().collect::<Vec<_>>().join(" ");
    let salt: String = format!("mnemonic{passphrase}").nfkd().collect();
    let mut out = [0u8; 64];
    pbkdf2_hmac::<Sha512>(sentence.as_bytes(), salt.as_bytes(), PBKDF2_ROUNDS, &mut out);
    Ok(Seed::new(out))
}

/// SHA3-256 of the fixture phrase, used as mnemonic entropy.
pub fn fixture_entropy() -> [u8; 32] {
    sha3_256(FIXTURE_PHRASE.as_bytes())
}

pub fn fixture_mnemonic() -> String {
    entropy_to_mnemonic(&fixture_entropy())
        .expect("32 octets is a valid entropy length")
        .join(" ")
}

/// Seed of the fixture mnemonic with an empty passphrase.
pub fn fixture_seed() -> Seed {
    mnemonic_to_seed(&fixture_mnemonic(), "").expect("fixture mnemonic is valid")
}

/// Root, purpose, then `coins` coin nodes, each with `accounts` account
/// nodes, each with `addresses` address leaves. Ids follow preorder.
pub fn bip44_template(coins: u32, accounts: u32, addresses: u32) -> HierarchyFile {
    let mut edges = Vec::new();
    let mut next: NodeId = 2;
    let mut fresh = || {
        next += 1;
        next - 1
    };
    edges.push([0, 1]);
    for _ in 0..coins {
        let coin = fresh();
        edges.push([1, coin]);
        for _ in 0..accounts {
            let account = fresh();
            edges.push([coin, account]);
            for _ in 0..addresses {
                edges.push([account, fresh()]);
            }
        }
    }
    HierarchyFile {
        nodes: (0..next).collect(),
        edges,
        versions: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ABANDON_ABOUT: &str = "abandon abandon abandon abandon abandon abandon abandon abandon abandon abandon abandon about";

    #[test]
    fn wordlist_loaded() {
        assert_eq!(wordlist().len(), 2048);
        assert_eq!(word_index("abandon"), Some(0));
        assert_eq!(word_index("zoo"), Some(2047));
    }

    #[test]
    fn fixture_entropy_digest() {
        assert_eq!(
            hex::encode(fixture_entropy()),
            "af9ac3dac56b02f1ea017e7657a9bb7e1778274e31509f134f023e41a5953866"
        );
        assert_eq!(fixture_mnemonic().split(' ').count(), 24);
        assert_eq!(fixture_seed(), fixture_seed());
    }

    #[test]
    fn fixture_matches_reference_derivation() {
        assert_eq!(fixture_mnemonic(), FIXTURE_MNEMONIC);
        assert_eq!(hex::encode(fixture_seed().as_bytes()), FIXTURE_SEED_HEX);
    }

    // computed with python-mnemonic's reference implementation
    const FIXTURE_MNEMONIC: &str = "question stock wall member rabbit jump pool cool iron run human wire jealous beauty decide claw pair omit scene lady bottom skin thunder stand";
    const FIXTURE_SEED_HEX: &str = "aa31a7cddbe262fdb6eadff0b426c12f9a7aa15e56bee17b743b90f8ffe30f0649a2969b54338d6cc8bc785a9c1569c8d7e9040799b0f3752bc93bf645e168b7";

    #[test]
    fn mnemonic_errors() {
        assert_eq!(
            mnemonic_to_seed(&ABANDON_ABOUT.replace("about", "abandon"), ""),
            Err(Error::BadChecksum)
        );
        assert_eq!(
            mnemonic_to_seed(&ABANDON_ABOUT.replace("about", "aboutt"), ""),
            Err(Error::InvalidWord("aboutt".into()))
        );
        assert_eq!(mnemonic_to_seed("abandon about", ""), Err(Error::InvalidWordCount(2)));
        assert_eq!(entropy_to_mnemonic(&[0; 15]), Err(Error::InvalidEntropyLength(15)));
    }

    #[test]
    fn template_shapes() {
        let chain = bip44_template(1, 1, 1);
        assert_eq!(chain.nodes.len(), 5);
        assert_eq!(chain.edges, vec![[0, 1], [1, 2], [2, 3], [3, 4]]);
        for (c, a, k) in [(1, 1, 1), (2, 3, 4), (3, 1, 5), (1, 2, 0)] {
            let t = bip44_template(c, a, k);
            assert_eq!(t.nodes.len() as u32, 2 + c * (1 + a * (1 + k)));
            let h = t.into_hierarchy().unwrap();
            assert_eq!(h.edge_count() + 1, h.node_count());
        }
    }
}
