use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use arcula::crypto::CompressedPoint;
use arcula::dhka::Seed;
use arcula::hierarchy::{AccessHierarchy, NodeId};
use arcula::script::{self, Script};
use arcula::timebound::{parse_assignments, timed_wallet_set};
use arcula::vm::{self, VmContext};
use arcula::wallet::{
    derive_priv, derive_pub, wallet_sign, wallet_verify, wallet_verify_at, Certificate, Wallet,
    WalletSignature,
};
use arcula::{seed, store};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};
use crate::{Command, MutateOp, SecretArgs, SeedArgs, WalletArgs};

const PP_FILE: &str = "pp.bin";
const SECRETS_FILE: &str = "secrets.bin";
const HIERARCHY_FILE: &str = "hierarchy.json";
const TIMED_FILE: &str = "timed.json";
const RETIRED_FILE: &str = "retired.json";

pub struct Output {
    value: Value,
    text: String,
}

impl Output {
    /// Key/value result; text mode prints one `key: value` line each.
    fn fields(pairs: Vec<(&str, Value)>) -> Self {
        let text = pairs
            .iter()
            .map(|(k, v)| match v {
                Value::String(s) => format!("{k}: {s}"),
                other => format!("{k}: {other}"),
            })
            .collect::<Vec<_>>()
            .join("\n");
        let value = Value::Object(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect());
        Output { value, text }
    }

    fn with_text(value: Value, text: String) -> Self {
        Output { value, text }
    }

    pub fn print(&self, json: bool) {
        if json {
            println!("{}", serde_json::to_string_pretty(&self.value).expect("json value"));
        } else if !self.text.is_empty() {
            println!("{}", self.text);
        }
    }
}

/// Signature file written by `sign`.
#[derive(Serialize, Deserialize)]
struct SignatureFile {
    node: NodeId,
    pk: String,
    sig: String,
    cert: String,
    expiry: Option<u32>,
}

impl SignatureFile {
    fn from_signature(node: NodeId, ws: &WalletSignature) -> Self {
        SignatureFile {
            node,
            pk: hex::encode(ws.pk.as_bytes()),
            sig: hex::encode(&ws.sig),
            cert: hex::encode(&ws.cert.sig),
            expiry: ws.cert.expiry,
        }
    }

    fn to_signature(&self) -> CliResult<WalletSignature> {
        Ok(WalletSignature {
            pk: CompressedPoint::from_slice(&parse_hex("pk", &self.pk)?)?,
            sig: parse_hex("sig", &self.sig)?,
            cert: Certificate { sig: parse_hex("cert", &self.cert)?, expiry: self.expiry },
        })
    }
}

fn parse_hex(what: &str, s: &str) -> CliResult<Vec<u8>> {
    hex::decode(s.trim()).map_err(|e| CliError::usage("invalid_hex", format!("{what}: {e}")))
}

fn parse_digest(s: &str) -> CliResult<[u8; 32]> {
    parse_hex("digest", s)?
        .try_into()
        .map_err(|v: Vec<u8>| CliError::usage("invalid_digest", format!("digest must be 32 octets, got {}", v.len())))
}

fn read_input(path: &Path) -> CliResult<String> {
    fs::read_to_string(path)
        .map_err(|e| CliError::usage("unreadable_input", format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, data: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, data).map_err(|e| CliError::usage("unwritable_output", format!("{}: {e}", path.display())))
}

impl SeedArgs {
    fn resolve(&self) -> CliResult<Seed> {
        match (&self.mnemonic, &self.seed_hex) {
            (Some(m), None) => Ok(seed::mnemonic_to_seed(m, &self.bip39_passphrase)?),
            (None, Some(h)) => Ok(Seed::from_slice(&parse_hex("seed", h)?)?),
            _ => Err(CliError::usage("missing_seed", "pass --mnemonic or --seed-hex")),
        }
    }
}

impl WalletArgs {
    fn path(&self, file: &str) -> PathBuf {
        self.wallet.join(file)
    }

    fn load_pp(&self) -> CliResult<arcula::wallet::WalletPublicParams> {
        Ok(store::load_pp(self.path(PP_FILE))?)
    }

    fn load_secrets(&self, secret: &SecretArgs) -> CliResult<arcula::dhka::SecretTable> {
        Ok(store::load_secrets(self.path(SECRETS_FILE), &secret.passphrase)?)
    }
}

fn save_wallet(dir: &Path, w: &Wallet, passphrase: &str) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::usage("unwritable_output", format!("{}: {e}", dir.display())))?;
    store::save_pp(dir.join(PP_FILE), w.pp())?;
    store::save_secrets(dir.join(SECRETS_FILE), w.secrets(), passphrase)?;
    write_file(&dir.join(HIERARCHY_FILE), w.hierarchy().to_json() + "\n")?;
    let retired_path = dir.join(RETIRED_FILE);
    if !w.retired().is_empty() {
        let retired: BTreeMap<String, u32> = w.retired().iter().map(|(k, v)| (k.to_string(), *v)).collect();
        write_file(&retired_path, serde_json::to_string_pretty(&retired).expect("json") + "\n")?;
    } else if retired_path.exists() {
        fs::remove_file(&retired_path).map_err(|e| CliError::usage("unwritable_output", e.to_string()))?;
    }
    Ok(())
}

fn load_retired(dir: &Path) -> CliResult<BTreeMap<NodeId, u32>> {
    let path = dir.join(RETIRED_FILE);
    if !path.exists() {
        return Ok(BTreeMap::new());
    }
    let text = fs::read_to_string(&path).map_err(|e| CliError::corrupt("io", e.to_string()))?;
    let raw: BTreeMap<String, u32> =
        serde_json::from_str(&text).map_err(|e| CliError::corrupt("corrupt_file", format!("{RETIRED_FILE}: {e}")))?;
    raw.into_iter()
        .map(|(k, v)| {
            k.parse()
                .map(|n| (n, v))
                .map_err(|_| CliError::corrupt("corrupt_file", format!("{RETIRED_FILE}: bad node key {k:?}")))
        })
        .collect()
}

fn wallet_summary(dir: &Path, w: &Wallet) -> Vec<(&'static str, Value)> {
    let h = w.hierarchy();
    vec![
        ("wallet", json!(dir.display().to_string())),
        ("mpk", json!(hex::encode(w.pp().mpk.as_bytes()))),
        ("root", json!(h.root())),
        ("nodes", json!(h.node_count())),
        ("edges", json!(h.edge_count())),
        ("tokens", json!(w.pp().mapping.tokens.len())),
    ]
}

pub fn run(command: Command) -> CliResult<Output> {
    match command {
        Command::Init { seed, hierarchy, out, secret } => {
            let h = AccessHierarchy::from_json(&read_input(&hierarchy)?)?;
            let w = Wallet::new(h, seed.resolve()?)?;
            save_wallet(&out, &w, &secret.passphrase)?;
            Ok(Output::fields(wallet_summary(&out, &w)))
        }
        Command::TimedInit { seed, hierarchy, periods, assignments, out, secret } => {
            let h = AccessHierarchy::from_json(&read_input(&hierarchy)?)?;
            let assignments = parse_assignments(&read_input(&assignments)?)?;
            let tw = timed_wallet_set(&h, &assignments, periods, &seed.resolve()?)?;
            save_wallet(&out, &tw.wallet, &secret.passphrase)?;
            let mut nodes = serde_json::Map::new();
            for id in tw.timed.hierarchy.nodes() {
                if let Some(tn) = tw.timed.timed_node(id) {
                    nodes.insert(id.to_string(), json!({ "base": tn.base, "interval": tn.interval }));
                }
            }
            let entries: BTreeMap<String, NodeId> = h
                .nodes()
                .map(|b| Ok((b.to_string(), tw.timed.entry(b)?)))
                .collect::<arcula::Result<_>>()?;
            let layout = json!({ "periods": periods, "entries": entries, "nodes": nodes });
            write_file(&out.join(TIMED_FILE), serde_json::to_string_pretty(&layout).expect("json") + "\n")?;
            let mut fields = wallet_summary(&out, &tw.wallet);
            fields.push(("periods", json!(periods)));
            fields.push(("entries", json!(entries)));
            Ok(Output::fields(fields))
        }
        Command::DerivePub { wallet, node } => {
            let pp = wallet.load_pp()?;
            let id = derive_pub(&pp, node)?;
            Ok(Output::fields(vec![
                ("node", json!(node)),
                ("mpk", json!(hex::encode(id.mpk.as_bytes()))),
                ("label", json!(hex::encode(id.label.to_bytes()))),
                ("lock", json!(hex::encode(script::lock_arcula(&id.mpk, &id.label).to_bytes()))),
            ]))
        }
        Command::DerivePriv { wallet, secret, from, to, derivation_key } => {
            let pp = wallet.load_pp()?;
            let key: [u8; 32] = match derivation_key {
                Some(h) => parse_hex("derivation key", &h)?
                    .try_into()
                    .map_err(|_| CliError::usage("invalid_key_length", "derivation key must be 32 octets"))?,
                None => {
                    let table = wallet.load_secrets(&secret)?;
                    table.get(&from).ok_or(arcula::Error::UnknownNode(from))?.secret
                }
            };
            let sk = derive_priv(&pp, &key, from, to)?;
            Ok(Output::fields(vec![
                ("from", json!(from)),
                ("to", json!(to)),
                ("secret_key", json!(hex::encode(sk.keypair.secret_bytes()))),
                ("public_key", json!(hex::encode(sk.public().as_bytes()))),
                ("label", json!(hex::encode(sk.label.to_bytes()))),
            ]))
        }
        Command::Sign { wallet, secret, node, from, msg_hex, out } => {
            let pp = wallet.load_pp()?;
            let table = wallet.load_secrets(&secret)?;
            let from = from.unwrap_or(node);
            let key = table.get(&from).ok_or(arcula::Error::UnknownNode(from))?.secret;
            let sk = derive_priv(&pp, &key, from, node)?;
            let ws = wallet_sign(&sk, &parse_hex("message", &msg_hex)?);
            let file = SignatureFile::from_signature(node, &ws);
            let text = serde_json::to_string_pretty(&file).expect("json");
            match out {
                Some(path) => {
                    write_file(&path, text + "\n")?;
                    Ok(Output::fields(vec![
                        ("node", json!(node)),
                        ("signature", json!(path.display().to_string())),
                    ]))
                }
                None => Ok(Output::with_text(serde_json::to_value(&file).expect("json"), text)),
            }
        }
        Command::Verify { wallet, node, msg_hex, sig, period } => {
            let pp = wallet.load_pp()?;
            let file: SignatureFile = serde_json::from_str(&read_input(&sig)?)
                .map_err(|e| CliError::usage("invalid_signature_file", e.to_string()))?;
            let ws = file.to_signature()?;
            let id = derive_pub(&pp, node)?;
            let msg = parse_hex("message", &msg_hex)?;
            let ok = match period {
                Some(t) => wallet_verify_at(&id, &msg, &ws, t),
                None => wallet_verify(&id, &msg, &ws),
            };
            if !ok {
                return Err(CliError::crypto("invalid_signature", format!("signature does not verify for node {node}")));
            }
            Ok(Output::fields(vec![("node", json!(node)), ("valid", json!(true))]))
        }
        Command::EmitScript { wallet, node, p2sh, perturbed, seed, sig } => {
            emit_script(&wallet, node, p2sh, perturbed, &seed, sig.as_deref())
        }
        Command::VmEval { lock, unlock, digest, trace } => {
            let ctx = VmContext { tx_digest: parse_digest(&digest)? };
            let lock = Script::from_bytes(&parse_hex("lock", &lock)?)?;
            let unlock = Script::from_bytes(&parse_hex("unlock", &unlock)?)?;
            let t = vm::trace(&unlock, &lock, &ctx);
            if trace {
                for step in &t.steps {
                    let stack = |s: &[Vec<u8>]| s.iter().map(hex::encode).collect::<Vec<_>>().join(" ");
                    eprintln!("{:<24} main=[{}] alt=[{}]", step.op, stack(&step.main), stack(&step.alt));
                }
            }
            if !t.result {
                let why = t.failure.unwrap_or("final stack is not true");
                return Err(CliError::crypto("script_failed", why));
            }
            Ok(Output::fields(vec![("result", json!(true))]))
        }
        Command::SizeTable => Ok(size_table()),
        Command::Mutate { wallet, secret, seed, op } => mutate(&wallet, &secret, &seed, op),
        Command::Audit { mpk, scripts } => audit(&mpk, &scripts),
        Command::Bip44Template { coins, accounts, addresses } => {
            let file = seed::bip44_template(coins, accounts, addresses);
            let value = serde_json::to_value(&file).expect("json");
            Ok(Output::with_text(value.clone(), serde_json::to_string_pretty(&value).expect("json")))
        }
        Command::FixtureMnemonic => Ok(Output::fields(vec![("mnemonic", json!(seed::fixture_mnemonic()))])),
    }
}

fn emit_script(
    wallet: &WalletArgs,
    node: NodeId,
    p2sh: bool,
    perturbed: bool,
    seed: &SeedArgs,
    sig: Option<&Path>,
) -> CliResult<Output> {
    let pp = wallet.load_pp()?;
    let id = derive_pub(&pp, node)?;
    let unlinkable = if perturbed {
        let w = rebuild_checked(wallet, seed, &pp)?;
        Some(w.unlinkable_identity(node)?)
    } else {
        None
    };
    let inner = match &unlinkable {
        Some(u) => script::lock_perturbed(&u.mpk),
        None => script::lock_arcula(&id.mpk, &id.label),
    };
    let (lock, suffix) = if p2sh {
        let (lock, suffix) = script::p2sh_wrap(&inner);
        (lock, Some(suffix))
    } else {
        (inner, None)
    };
    let mut fields = vec![
        ("node", json!(node)),
        ("lock", json!(hex::encode(lock.to_bytes()))),
        ("lock_asm", json!(lock.to_string())),
    ];
    if let Some(path) = sig {
        let file: SignatureFile = serde_json::from_str(&read_input(path)?)
            .map_err(|e| CliError::usage("invalid_signature_file", e.to_string()))?;
        let ws = file.to_signature()?;
        let cert = match &unlinkable {
            Some(u) => u.cert.clone(),
            None => ws.cert.sig.clone(),
        };
        let mut unlock = script::unlock_arcula(&ws.sig, &cert, &ws.pk)?;
        if let Some(suffix) = &suffix {
            unlock = unlock.concat(suffix);
        }
        fields.push(("unlock", json!(hex::encode(unlock.to_bytes()))));
        fields.push(("unlock_asm", json!(unlock.to_string())));
        let report = script::size_report(&lock, &unlock);
        fields.push(("accounted_size", json!({ "lock": report.lock, "unlock": report.unlock, "total": report.total })));
    }
    Ok(Output::fields(fields))
}

fn size_table() -> Output {
    let rows = script::size_table();
    let mut text = format!("{:<20} {:>6} {:>8} {:>7}", "construction", "lock", "unlock", "total");
    for (name, r) in &rows {
        text.push_str(&format!("\n{:<20} {:>6} {:>8} {:>7}", name, r.lock, r.unlock, r.total));
    }
    let value = rows
        .iter()
        .map(|(name, r)| json!({ "construction": name, "lock": r.lock, "unlock": r.unlock, "total": r.total }))
        .collect();
    Output::with_text(Value::Array(value), text)
}

/// Wallet rebuilt from the seed, refusing to continue if it disagrees with
/// the stored public parameters.
fn rebuild_checked(
    wallet: &WalletArgs,
    seed: &SeedArgs,
    pp: &arcula::wallet::WalletPublicParams,
) -> CliResult<Wallet> {
    let expiries = pp.certs.iter().filter_map(|(&n, c)| c.expiry.map(|e| (n, e))).collect();
    let w = Wallet::with_options(pp.hierarchy.clone(), seed.resolve()?, Default::default(), expiries)?
        .with_retired(load_retired(&wallet.wallet)?);
    if w.pp() != pp {
        return Err(CliError::corrupt(
            "state_mismatch",
            "stored public parameters do not match the seed",
        ));
    }
    Ok(w)
}

fn mutate(wallet: &WalletArgs, secret: &SecretArgs, seed: &SeedArgs, op: MutateOp) -> CliResult<Output> {
    let pp = wallet.load_pp()?;
    let mut w = rebuild_checked(wallet, seed, &pp)?;
    if wallet.load_secrets(secret)? != *w.secrets() {
        return Err(CliError::corrupt("state_mismatch", "stored secrets do not match the seed"));
    }
    let before = w.pp().clone();
    match op {
        MutateOp::Rekey { node } => w.rekey(node)?,
        MutateOp::ReplaceKey { node } => w.replace_key(node)?,
        MutateOp::AddNode { id, parent, edges } => w.insert_node(id, parent, &edges)?,
        MutateOp::DelNode { node } => w.delete_node(node)?,
        MutateOp::AddEdge { from, to } => w.insert_edge(from, to)?,
        MutateOp::DelEdge { from, to } => w.delete_edge(from, to)?,
    }
    save_wallet(&wallet.wallet, &w, &secret.passphrase)?;
    let changed: Vec<NodeId> = w
        .hierarchy()
        .nodes()
        .filter(|n| before.mapping.labels.get(n) != w.pp().mapping.labels.get(n) || before.certs.get(n) != w.pp().certs.get(n))
        .collect();
    let mut fields = wallet_summary(&wallet.wallet, &w);
    fields.push(("changed", json!(changed)));
    Ok(Output::fields(fields))
}

fn audit(mpk: &str, scripts: &Path) -> CliResult<Output> {
    let mpk = CompressedPoint::from_slice(&parse_hex("mpk", mpk)?)?;
    let mut matches = Vec::new();
    let mut text = Vec::new();
    for (i, line) in read_input(scripts)?.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let lock = Script::from_bytes(&parse_hex(&format!("line {}", i + 1), line)?)?;
        if script::is_identity_lock_for(&lock, &mpk) {
            let label = lock.pushes().next().map(hex::encode).unwrap_or_default();
            matches.push(json!({ "line": i + 1, "label": label }));
            text.push(format!("line {}: label {label}", i + 1));
        }
    }
    Ok(Output::with_text(json!({ "matches": matches }), text.join("\n")))
}
