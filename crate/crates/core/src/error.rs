use thiserror::Error;

use crate::hierarchy::NodeId;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input: malformed hierarchy, unknown node, invalid mnemonic word.
    Usage,
    /// A cryptographic check failed or no derivation exists.
    Crypto,
    /// Persisted state is damaged or inconsistent.
    Corruption,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("authenticated decryption failed")]
    AuthFailure,
    #[error("ciphertext too short: {0} octets")]
    MalformedCiphertext(usize),
    #[error("invalid key length: expected {expected}, got {actual}")]
    InvalidKeyLength { expected: &'static str, actual: usize },
    #[error("invalid curve point encoding")]
    InvalidPoint,
    #[error("perturbation produced a degenerate key")]
    DegenerateKey,
    #[error("internal error: {0}")]
    Internal(&'static str),

    #[error("hierarchy contains a cycle")]
    CycleDetected,
    #[error("edge ({0}, {1}) references an unknown node")]
    DanglingEdge(NodeId, NodeId),
    #[error("hierarchy has several minimal nodes: {0:?}")]
    MultipleComponents(Vec<NodeId>),
    #[error("hierarchy is empty")]
    EmptyHierarchy,
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("unknown edge ({0}, {1})")]
    UnknownEdge(NodeId, NodeId),
    #[error("duplicate node {0}")]
    DuplicateNode(NodeId),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(NodeId, NodeId),
    #[error("edge ({0}, {1}) would create a cycle")]
    WouldCreateCycle(NodeId, NodeId),
    #[error("the root node cannot be deleted")]
    CannotDeleteRoot,
    #[error("invalid hierarchy file: {0}")]
    InvalidHierarchyFile(String),

    #[error("no path from {from} to {to}")]
    NoPath { from: NodeId, to: NodeId },
    #[error("public mapping has no token for edge ({0}, {1})")]
    MissingToken(NodeId, NodeId),
    #[error("seed must be 64 octets, got {0}")]
    InvalidSeedLength(usize),

    #[error("node {0} has an empty or out-of-range period assignment")]
    EmptyAssignment(NodeId),
    #[error("invalid period count {0}")]
    InvalidPeriodCount(u32),

    #[error("word {0:?} is not in the BIP39 English wordlist")]
    InvalidWord(String),
    #[error("mnemonic checksum mismatch")]
    BadChecksum,
    #[error("invalid mnemonic length: {0} words")]
    InvalidWordCount(usize),
    #[error("invalid entropy length: {0} octets")]
    InvalidEntropyLength(usize),

    #[error("push of {0} octets exceeds the 520 octet limit")]
    PushTooLarge(usize),
    #[error("malformed script at offset {0}")]
    MalformedScript(usize),

    #[error("corrupt file: {0}")]
    CorruptFile(String),
    #[error("wrong passphrase")]
    WrongPassphrase,
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            AuthFailure | MalformedCiphertext(_) | InvalidPoint | DegenerateKey | NoPath { .. }
            | MissingToken(..) | WrongPassphrase => ErrorKind::Crypto,
            CorruptFile(_) | Internal(_) | Io(_) => ErrorKind::Corruption,
            _ => ErrorKind::Usage,
        }
    }

    /// Stable machine-readable identifier.
    pub fn code(&self) -> &'static str {
        use Error::*;
        match self {
            AuthFailure => "auth_failure",
            MalformedCiphertext(_) => "malformed_ciphertext",
            InvalidKeyLength { .. } => "invalid_key_length",
            InvalidPoint => "invalid_point",
            DegenerateKey => "degenerate_key",
            Internal(_) => "internal",
            CycleDetected => "cycle_detected",
            DanglingEdge(..) => "dangling_edge",
            MultipleComponents(_) => "multiple_components",
            EmptyHierarchy => "empty_hierarchy",
            UnknownNode(_) => "unknown_node",
            UnknownEdge(..) => "unknown_edge",
            DuplicateNode(_) => "duplicate_node",
            DuplicateEdge(..) => "duplicate_edge",
            WouldCreateCycle(..) => "would_create_cycle",
            CannotDeleteRoot => "cannot_delete_root",
            InvalidHierarchyFile(_) => "invalid_hierarchy_file",
            NoPath { .. } => "no_path",
            MissingToken(..) => "missing_token",
            InvalidSeedLength(_) => "invalid_seed_length",
            EmptyAssignment(_) => "empty_assignment",
            InvalidPeriodCount(_) => "invalid_period_count",
            InvalidWord(_) => "invalid_word",
            BadChecksum => "bad_checksum",
            InvalidWordCount(_) => "invalid_word_count",
            InvalidEntropyLength(_) => "invalid_entropy_length",
            PushTooLarge(_) => "push_too_large",
            MalformedScript(_) => "malformed_script",
            CorruptFile(_) => "corrupt_file",
            WrongPassphrase => "wrong_passphrase",
            Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
