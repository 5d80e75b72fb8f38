mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use arcula::hierarchy::NodeId;
use clap::{Args, Parser, Subcommand};

use crate::error::CliError;

#[derive(Parser)]
#[command(name = "arcula", version, about = "Hierarchical deterministic wallet with identity-based addresses")]
struct Cli {
    /// Print results as JSON.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct SeedArgs {
    /// BIP39 mnemonic sentence.
    #[arg(long, conflicts_with = "seed_hex")]
    pub mnemonic: Option<String>,
    /// Raw 64-octet seed in hex.
    #[arg(long)]
    pub seed_hex: Option<String>,
    /// Optional BIP39 passphrase used with --mnemonic.
    #[arg(long, default_value = "")]
    pub bip39_passphrase: String,
}

#[derive(Args, Clone)]
pub struct WalletArgs {
    /// Wallet directory holding pp.bin and secrets.bin.
    #[arg(long, default_value = ".")]
    pub wallet: PathBuf,
}

#[derive(Args, Clone)]
pub struct SecretArgs {
    /// Passphrase sealing secrets.bin.
    #[arg(long, default_value = "")]
    pub passphrase: String,
}

#[derive(Subcommand)]
pub enum Command {
    /// Create a wallet from a seed and a hierarchy file.
    Init {
        #[command(flatten)]
        seed: SeedArgs,
        #[arg(long)]
        hierarchy: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        secret: SecretArgs,
    },
    /// Create a time-bound wallet: each node is usable only in its assigned periods.
    TimedInit {
        #[command(flatten)]
        seed: SeedArgs,
        #[arg(long)]
        hierarchy: PathBuf,
        #[arg(long)]
        periods: u32,
        /// JSON object mapping node id to [first, last] period.
        #[arg(long)]
        assignments: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        secret: SecretArgs,
    },
    /// Identity address of a node; needs only public parameters.
    DerivePub {
        #[command(flatten)]
        wallet: WalletArgs,
        #[arg(long)]
        node: NodeId,
    },
    /// Signing key of --to derived from the derivation key of --from.
    DerivePriv {
        #[command(flatten)]
        wallet: WalletArgs,
        #[command(flatten)]
        secret: SecretArgs,
        #[arg(long)]
        from: NodeId,
        #[arg(long)]
        to: NodeId,
        /// Derivation key of --from in hex, instead of reading secrets.bin.
        #[arg(long)]
        derivation_key: Option<String>,
    },
    /// Sign a message with the key of a node.
    Sign {
        #[command(flatten)]
        wallet: WalletArgs,
        #[command(flatten)]
        secret: SecretArgs,
        #[arg(long)]
        node: NodeId,
        /// Derive the key from this ancestor instead of the node itself.
        #[arg(long)]
        from: Option<NodeId>,
        #[arg(long)]
        msg_hex: String,
        /// Write the signature JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a signature file against a node's identity address.
    Verify {
        #[command(flatten)]
        wallet: WalletArgs,
        #[arg(long)]
        node: NodeId,
        #[arg(long)]
        msg_hex: String,
        #[arg(long)]
        sig: PathBuf,
        /// Also reject certificates that expired before this period.
        #[arg(long)]
        period: Option<u32>,
    },
    /// Locking script for a node, and the unlocking script when --sig is given.
    EmitScript {
        #[command(flatten)]
        wallet: WalletArgs,
        #[arg(long)]
        node: NodeId,
        #[arg(long)]
        p2sh: bool,
        /// Lock to the node's perturbed master key; needs the seed.
        #[arg(long)]
        perturbed: bool,
        #[command(flatten)]
        seed: SeedArgs,
        /// Signature file from `sign`, used to build the unlocking script.
        #[arg(long)]
        sig: Option<PathBuf>,
    },
    /// Run an unlocking script against a locking script.
    VmEval {
        #[arg(long)]
        lock: String,
        #[arg(long)]
        unlock: String,
        /// 32-octet transaction digest checked by OP_CHECKSIG.
        #[arg(long)]
        digest: String,
        /// Print the stacks after every op.
        #[arg(long)]
        trace: bool,
    },
    /// Script sizes of the standard and identity-based constructions.
    SizeTable,
    /// Change the hierarchy of an existing wallet; needs the seed.
    Mutate {
        #[command(flatten)]
        wallet: WalletArgs,
        #[command(flatten)]
        secret: SecretArgs,
        #[command(flatten)]
        seed: SeedArgs,
        #[command(subcommand)]
        op: MutateOp,
    },
    /// List which locking scripts in a file pay to a master public key.
    Audit {
        #[arg(long)]
        mpk: String,
        /// One hex locking script per line.
        #[arg(long)]
        scripts: PathBuf,
    },
    /// Hierarchy file shaped like a BIP44 tree.
    Bip44Template {
        #[arg(long, default_value_t = 1)]
        coins: u32,
        #[arg(long, default_value_t = 1)]
        accounts: u32,
        #[arg(long, default_value_t = 2)]
        addresses: u32,
    },
    /// The reproducible test mnemonic.
    FixtureMnemonic,
}

#[derive(Subcommand, Clone)]
pub enum MutateOp {
    /// New label version for a node and fresh keys for its cone.
    Rekey {
        #[arg(long)]
        node: NodeId,
    },
    /// Replace only the node's signing key.
    ReplaceKey {
        #[arg(long)]
        node: NodeId,
    },
    AddNode {
        #[arg(long)]
        id: NodeId,
        #[arg(long)]
        parent: NodeId,
        /// Extra edge FROM:TO, repeatable.
        #[arg(long = "edge", value_parser = parse_edge)]
        edges: Vec<(NodeId, NodeId)>,
    },
    DelNode {
        #[arg(long)]
        node: NodeId,
    },
    AddEdge {
        #[arg(long)]
        from: NodeId,
        #[arg(long)]
        to: NodeId,
    },
    DelEdge {
        #[arg(long)]
        from: NodeId,
        #[arg(long)]
        to: NodeId,
    },
}

fn parse_edge(s: &str) -> Result<(NodeId, NodeId), String> {
    let (a, b) = s.split_once(':').ok_or("expected FROM:TO")?;
    Ok((
        a.trim().parse().map_err(|e| format!("{e}"))?,
        b.trim().parse().map_err(|e| format!("{e}"))?,
    ))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(out) => {
            out.print(cli.json);
            ExitCode::SUCCESS
        }
        Err(e) => report(e),
    }
}

fn report(e: CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit)
}
