//! Locking and unlocking scripts in the Bitcoin Cash dialect, plus the
//! size accounting used to compare them.
//!
//! Accounting counts each opcode as one octet and each pushed item at its
//! nominal size (signatures at the 73-octet DER maximum) without push
//! prefixes. [`Script::to_bytes`] emits real push prefixes.

use std::fmt;

use crate::crypto::{hash160, CompressedPoint};
use crate::error::{Error, Result};
use crate::hierarchy::Label;

pub const MAX_PUSH: usize = 520;
/// Accounted size of any signature.
pub const SIG_SIZE: usize = 73;

const PUSHDATA1: u8 = 0x4c;
const PUSHDATA2: u8 = 0x4d;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Opcode {
    Dup,
    Hash160,
    Equal,
    EqualVerify,
    CheckSig,
    Cat,
    ToAltStack,
    FromAltStack,
    CheckDataSig,
    CheckDataSigVerify,
}

impl Opcode {
    pub const ALL: [Opcode; 10] = [
        Opcode::Dup,
        Opcode::Hash160,
        Opcode::Equal,
        Opcode::EqualVerify,
        Opcode::CheckSig,
        Opcode::Cat,
        Opcode::ToAltStack,
        Opcode::FromAltStack,
        Opcode::CheckDataSig,
        Opcode::CheckDataSigVerify,
    ];

    pub fn byte(self) -> u8 {
        match self {
            Opcode::Dup => 0x76,
            Opcode::Hash160 => 0xa9,
            Opcode::Equal => 0x87,
            Opcode::EqualVerify => 0x88,
            Opcode::CheckSig => 0xac,
            Opcode::Cat => 0x7e,
            Opcode::ToAltStack => 0x6b,
            Opcode::FromAltStack => 0x6c,
            Opcode::CheckDataSig => 0xba,
            Opcode::CheckDataSigVerify => 0xbb,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|op| op.byte() == b)
    }

    pub fn name(self) -> &'static str {
        match self {
            Opcode::Dup => "OP_DUP",
            Opcode::Hash160 => "OP_HASH160",
            Opcode::Equal => "OP_EQUAL",
            Opcode::EqualVerify => "OP_EQUALVERIFY",
            Opcode::CheckSig => "OP_CHECKSIG",
            Opcode::Cat => "OP_CAT",
            Opcode::ToAltStack => "OP_TOALTSTACK",
            Opcode::FromAltStack => "OP_FROMALTSTACK",
            Opcode::CheckDataSig => "OP_CHECKDATASIG",
            Opcode::CheckDataSigVerify => "OP_CHECKDATASIGVERIFY",
        }
    }
}

/// What a pushed item is, for size accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PushRole {
    /// Counted at [`SIG_SIZE`].
    Signature,
    PublicKey,
    Hash,
    Label,
    /// A serialized script, counted at the inner script's accounted size.
    Redeem { nominal: usize },
    Raw,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptOp {
    Op(Opcode),
    Push { data: Vec<u8>, role: PushRole },
}

impl ScriptOp {
    pub fn accounted_size(&self) -> usize {
        match self {
            ScriptOp::Op(_) => 1,
            ScriptOp::Push { role: PushRole::Signature, .. } => SIG_SIZE,
            ScriptOp::Push { role: PushRole::Redeem { nominal }, .. } => *nominal,
            ScriptOp::Push { data, .. } => data.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Script {
    ops: Vec<ScriptOp>,
}

impl Script {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn ops(&self) -> &[ScriptOp] {
        &self.ops
    }

    pub fn op(mut self, op: Opcode) -> Self {
        self.ops.push(ScriptOp::Op(op));
        self
    }

    pub fn push(mut self, role: PushRole, data: &[u8]) -> Result<Self> {
        if data.len() > MAX_PUSH {
            return Err(Error::PushTooLarge(data.len()));
        }
        self.ops.push(ScriptOp::Push { data: data.to_vec(), role });
        Ok(self)
    }

    /// Appends all ops of `other`.
    pub fn concat(mut self, other: &Script) -> Self {
        self.ops.extend(other.ops.iter().cloned());
        self
    }

    pub fn is_push_only(&self) -> bool {
        self.ops.iter().all(|op| matches!(op, ScriptOp::Push { .. }))
    }

    pub fn accounted_size(&self) -> usize {
        self.ops.iter().map(ScriptOp::accounted_size).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for op in &self.ops {
            match op {
                ScriptOp::Op(o) => out.push(o.byte()),
                ScriptOp::Push { data, .. } => {
                    match data.len() {
                        n @ 0..=75 => out.push(n as u8),
                        n @ 76..=255 => out.extend_from_slice(&[PUSHDATA1, n as u8]),
                        n => {
                            out.push(PUSHDATA2);
                            out.extend_from_slice(&(n as u16).to_le_bytes());
                        }
                    }
                    out.extend_from_slice(data);
                }
            }
        }
        out
    }

    /// Parses serialized bytes; pushes come back with [`PushRole::Raw`].
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut ops = Vec::new();
        let mut pos = 0;
        while pos < bytes.len() {
            let start = pos;
            let b = bytes[pos];
            pos += 1;
            let len = match b {
                0..=75 => b as usize,
                PUSHDATA1 => {
                    let n = *bytes.get(pos).ok_or(Error::MalformedScript(start))?;
                    pos += 1;
                    n as usize
                }
                PUSHDATA2 => {
                    let n = bytes.get(pos..pos + 2).ok_or(Error::MalformedScript(start))?;
                    pos += 2;
                    u16::from_le_bytes([n[0], n[1]]) as usize
                }
                _ => {
                    ops.push(ScriptOp::Op(Opcode::from_byte(b).ok_or(Error::MalformedScript(start))?));
                    continue;
                }
            };
            if len > MAX_PUSH {
                return Err(Error::PushTooLarge(len));
            }
            let data = bytes.get(pos..pos + len).ok_or(Error::MalformedScript(start))?;
            pos += len;
            ops.push(ScriptOp::Push { data: data.to_vec(), role: PushRole::Raw });
        }
        Ok(Script { ops })
    }

    /// Pushed items in order.
    pub fn pushes(&self) -> impl Iterator<Item = &[u8]> {
        self.ops.iter().filter_map(|op| match op {
            ScriptOp::Push { data, .. } => Some(data.as_slice()),
            ScriptOp::Op(_) => None,
        })
    }
}

impl fmt::Display for Script {
    /// Assembly form: opcode names and `<hex>` pushes.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, op) in self.ops.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            match op {
                ScriptOp::Op(o) => f.write_str(o.name())?,
                ScriptOp::Push { data, .. } => write!(f, "<{}>", hex::encode(data))?,
            }
        }
        Ok(())
    }
}

fn pushes(items: &[(PushRole, &[u8])]) -> Result<Script> {
    items
        .iter()
        .try_fold(Script::new(), |s, (role, data)| s.push(*role, data))
}

/// `OP_DUP OP_HASH160 <hash160(pk)> OP_EQUALVERIFY OP_CHECKSIG`
pub fn lock_standard(pk: &CompressedPoint) -> Script {
    Script::new()
        .op(Opcode::Dup)
        .op(Opcode::Hash160)
        .push(PushRole::Hash, &hash160(pk.as_bytes()))
        .expect("20 octets")
        .op(Opcode::EqualVerify)
        .op(Opcode::CheckSig)
}

pub fn unlock_standard(sig: &[u8], pk: &CompressedPoint) -> Result<Script> {
    pushes(&[(PushRole::Signature, sig), (PushRole::PublicKey, pk.as_bytes())])
}

/// `OP_DUP OP_TOALTSTACK <label> OP_CAT <mpk> OP_CHECKDATASIGVERIFY
/// OP_FROMALTSTACK OP_CHECKSIG`
pub fn lock_arcula(mpk: &CompressedPoint, label: &Label) -> Script {
    Script::new()
        .op(Opcode::Dup)
        .op(Opcode::ToAltStack)
        .push(PushRole::Label, &label.to_bytes())
        .expect("short label")
        .op(Opcode::Cat)
        .push(PushRole::PublicKey, mpk.as_bytes())
        .expect("33 octets")
        .op(Opcode::CheckDataSigVerify)
        .op(Opcode::FromAltStack)
        .op(Opcode::CheckSig)
}

/// `<sig> <cert> <pk>`; also the unlock for [`lock_perturbed`].
pub fn unlock_arcula(sig: &[u8], cert: &[u8], pk: &CompressedPoint) -> Result<Script> {
    pushes(&[
        (PushRole::Signature, sig),
        (PushRole::Signature, cert),
        (PushRole::PublicKey, pk.as_bytes()),
    ])
}

/// Pay-to-script-hash wrapping: the new lock and the push that must follow
/// the inner unlock.
pub fn p2sh_wrap(inner: &Script) -> (Script, Script) {
    let serialized = inner.to_bytes();
    let lock = Script::new()
        .op(Opcode::Hash160)
        .push(PushRole::Hash, &hash160(&serialized))
        .expect("20 octets")
        .op(Opcode::Equal);
    let suffix = Script::new()
        .push(PushRole::Redeem { nominal: inner.accounted_size() }, &serialized)
        .expect("dialect scripts stay under the push limit");
    (lock, suffix)
}

/// Matches `OP_HASH160 <20 octets> OP_EQUAL`.
pub fn is_p2sh(lock: &Script) -> bool {
    matches!(
        lock.ops(),
        [ScriptOp::Op(Opcode::Hash160), ScriptOp::Push { data, .. }, ScriptOp::Op(Opcode::Equal)]
            if data.len() == 20
    )
}

/// `OP_DUP OP_TOALTSTACK <mpk_i> OP_CHECKDATASIGVERIFY OP_FROMALTSTACK
/// OP_CHECKSIG`
pub fn lock_perturbed(mpk_i: &CompressedPoint) -> Script {
    Script::new()
        .op(Opcode::Dup)
        .op(Opcode::ToAltStack)
        .push(PushRole::PublicKey, mpk_i.as_bytes())
        .expect("33 octets")
        .op(Opcode::CheckDataSigVerify)
        .op(Opcode::FromAltStack)
        .op(Opcode::CheckSig)
}

/// True when `lock` is an identity lock ([`lock_arcula`]) under `mpk`.
/// Perturbed and hashed locks never match.
pub fn is_identity_lock_for(lock: &Script, mpk: &CompressedPoint) -> bool {
    use Opcode::*;
    matches!(
        lock.ops(),
        [
            ScriptOp::Op(Dup),
            ScriptOp::Op(ToAltStack),
            ScriptOp::Push { data: label, .. },
            ScriptOp::Op(Cat),
            ScriptOp::Push { data: key, .. },
            ScriptOp::Op(CheckDataSigVerify),
            ScriptOp::Op(FromAltStack),
            ScriptOp::Op(CheckSig),
        ] if Label::from_bytes(label).is_ok() && key.as_slice() == mpk.as_bytes()
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SizeReport {
    pub lock: usize,
    pub unlock: usize,
    pub total: usize,
}

pub fn size_report(lock: &Script, unlock: &Script) -> SizeReport {
    let (lock, unlock) = (lock.accounted_size(), unlock.accounted_size());
    SizeReport { lock, unlock, total: lock + unlock }
}

/// Sizes of each script family, computed from placeholder data.
pub fn size_table() -> Vec<(&'static str, SizeReport)> {
    let pk = CompressedPoint::from_slice(&hex_lit(
        "0279be667ef9dcbbac55a06295ce870b07029bfcdb2dce28d959f2815b16f81798",
    ))
    .expect("generator point");
    let sig = [0x30u8; SIG_SIZE];
    let label = Label::new(0, 0);

    let standard = (lock_standard(&pk), unlock_standard(&sig, &pk).unwrap());
    let arcula_unlock = unlock_arcula(&sig, &sig, &pk).unwrap();
    let arcula = lock_arcula(&pk, &label);
    let (p2sh_lock, suffix) = p2sh_wrap(&arcula);
    let perturbed = lock_perturbed(&pk);
    vec![
        ("standard", size_report(&standard.0, &standard.1)),
        ("arcula", size_report(&arcula, &arcula_unlock)),
        ("arcula-p2sh", size_report(&p2sh_lock, &arcula_unlock.clone().concat(&suffix))),
        ("arcula-perturbed", size_report(&perturbed, &arcula_unlock)),
    ]
}

fn hex_lit(s: &str) -> Vec<u8> {
    hex::decode(s).expect("literal hex")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g() -> CompressedPoint {
        CompressedPoint::from_slice(&hex_lit(
            "0279be667ef9dcbbac55a06295ce870b07029bfcdb2dce28d959f2815b16f81798",
        ))
        .unwrap()
    }

    #[test]
    fn table_rows() {
        let t: std::collections::BTreeMap<_, _> = size_table().into_iter().collect();
        let row = |name: &str| {
            let r = t[name];
            (r.lock, r.unlock, r.total)
        };
        assert_eq!(row("standard"), (24, 106, 130));
        assert_eq!(row("arcula"), (43, 179, 222));
        assert_eq!(row("arcula-p2sh").0, 22);
        assert_eq!(row("arcula-p2sh").1, 73 + 73 + 33 + 43);
        assert_eq!(row("arcula-perturbed").0, 38);
    }

    #[test]
    fn standard_lock_bytes() {
        let bytes = lock_standard(&g()).to_bytes();
        assert_eq!(
            hex::encode(bytes),
            "76a914751e76e8199196d454941c45d1b3a323f1433bd688ac"
        );
    }

    #[test]
    fn arcula_lock_layout() {
        let bytes = lock_arcula(&g(), &Label::new(5, 0)).to_bytes();
        let mut expected = vec![0x76, 0x6b, 0x04, 0, 0, 0, 5, 0x7e, 0x21];
        expected.extend_from_slice(g().as_bytes());
        expected.extend_from_slice(&[0xbb, 0x6c, 0xac]);
        assert_eq!(bytes, expected);
    }

    #[test]
    fn distinct_keys_distinct_locks() {
        let other = CompressedPoint::from_slice(&hex_lit(
            "03f973a0b87062c389d125d8199e803b832b6ac6bf7867a4f6cd87506060fc4c58",
        ))
        .unwrap();
        assert_ne!(lock_standard(&g()), lock_standard(&other));
        let (a, _) = p2sh_wrap(&lock_arcula(&g(), &Label::new(0, 0)));
        let (b, _) = p2sh_wrap(&a);
        assert_ne!(a, b);
        assert!(is_p2sh(&a) && is_p2sh(&b));
        assert!(!is_p2sh(&lock_standard(&g())));
    }

    #[test]
    fn audit_matches_identity_locks_only() {
        let lock = lock_arcula(&g(), &Label::new(3, 1));
        let parsed = Script::from_bytes(&lock.to_bytes()).unwrap();
        assert!(is_identity_lock_for(&parsed, &g()));
        assert!(!is_identity_lock_for(&lock_perturbed(&g()), &g()));
        assert!(!is_identity_lock_for(&p2sh_wrap(&lock).0, &g()));
        assert!(!is_identity_lock_for(&lock_standard(&g()), &g()));
    }

    #[test]
    fn push_encodings() {
        let s = Script::new()
            .push(PushRole::Raw, &[])
            .unwrap()
            .push(PushRole::Raw, &[1; 76])
            .unwrap()
            .push(PushRole::Raw, &[2; 300])
            .unwrap();
        let b = s.to_bytes();
        assert_eq!(b[0], 0x00);
        assert_eq!(&b[1..3], &[PUSHDATA1, 76]);
        assert_eq!(&b[79..82], &[PUSHDATA2, 0x2c, 0x01]);
        assert_eq!(Script::new().push(PushRole::Raw, &[0; 521]), Err(Error::PushTooLarge(521)));
    }

    #[test]
    fn malformed_bytes() {
        assert_eq!(Script::from_bytes(&[0x05, 1, 2]), Err(Error::MalformedScript(0)));
        assert_eq!(Script::from_bytes(&[0x76, 0xff]), Err(Error::MalformedScript(1)));
        assert_eq!(Script::from_bytes(&[PUSHDATA2, 0x01]), Err(Error::MalformedScript(0)));
    }

    #[test]
    fn assembly_text() {
        let s = lock_perturbed(&g());
        assert!(s.to_string().starts_with("OP_DUP OP_TOALTSTACK <0279be"));
    }

    proptest! {
        #[test]
        fn bytes_round_trip(items in prop::collection::vec(
            prop_oneof![
                prop::sample::select(Opcode::ALL.to_vec()).prop_map(ScriptOp::Op),
                prop::collection::vec(any::<u8>(), 0..=MAX_PUSH)
                    .prop_map(|data| ScriptOp::Push { data, role: PushRole::Raw }),
            ],
            0..8,
        )) {
            let s = Script { ops: items };
            prop_assert_eq!(Script::from_bytes(&s.to_bytes()).unwrap(), s);
        }
    }
}
