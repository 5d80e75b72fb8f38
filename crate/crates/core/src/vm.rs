//! A small interpreter for the script dialect.
//!
//! The unlock script (pushes only) runs first, then the lock script on the
//! resulting stack. Pay-to-script-hash locks are recognised by shape: once
//! the hash check passes, the topmost unlock item is parsed as a script and
//! executed against the rest of the unlock stack.

use crate::crypto::{hash160, verify_msg};
use crate::script::{is_p2sh, Opcode, Script, ScriptOp};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VmContext {
    /// Stand-in for the transaction signature hash checked by OP_CHECKSIG.
    pub tx_digest: [u8; 32],
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VmState {
    pub main: Vec<Vec<u8>>,
    pub alt: Vec<Vec<u8>>,
    pub failed: bool,
}

/// Stacks after one executed op.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceStep {
    pub op: String,
    pub main: Vec<Vec<u8>>,
    pub alt: Vec<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub steps: Vec<TraceStep>,
    pub result: bool,
    /// Why execution stopped early, if it did.
    pub failure: Option<&'static str>,
}

pub fn is_true(item: &[u8]) -> bool {
    item.iter().any(|&b| b != 0)
}

pub fn eval(unlock: &Script, lock: &Script, ctx: &VmContext) -> bool {
    Interpreter::new(*ctx, false).eval(unlock, lock).is_ok()
}

/// [`eval`] on serialized scripts; unparsable input evaluates to false.
pub fn eval_bytes(unlock: &[u8], lock: &[u8], ctx: &VmContext) -> bool {
    match (Script::from_bytes(unlock), Script::from_bytes(lock)) {
        (Ok(u), Ok(l)) => eval(&u, &l, ctx),
        _ => false,
    }
}

pub fn trace(unlock: &Script, lock: &Script, ctx: &VmContext) -> Trace {
    let mut vm = Interpreter::new(*ctx, true);
    let outcome = vm.eval(unlock, lock);
    Trace {
        steps: vm.trace,
        result: outcome.is_ok(),
        failure: outcome.err(),
    }
}

type Step = Result<(), &'static str>;

struct Interpreter {
    ctx: VmContext,
    state: VmState,
    tracing: bool,
    trace: Vec<TraceStep>,
}

impl Interpreter {
    fn new(ctx: VmContext, tracing: bool) -> Self {
        Interpreter {
            ctx,
            state: VmState::default(),
            tracing,
            trace: Vec::new(),
        }
    }

    fn eval(&mut self, unlock: &Script, lock: &Script) -> Step {
        if !unlock.is_push_only() {
            return self.fail("unlock script is not push-only");
        }
        self.run(unlock)?;
        let snapshot = self.state.main.clone();
        self.run(lock)?;
        self.check_top()?;
        if is_p2sh(lock) {
            let mut rest = snapshot;
            let redeem = rest.pop().ok_or("empty stack")?;
            let Ok(inner) = Script::from_bytes(&redeem) else {
                return self.fail("redeem script does not parse");
            };
            self.state = VmState { main: rest, ..VmState::default() };
            self.run(&inner)?;
            self.check_top()?;
        }
        Ok(())
    }

    fn check_top(&mut self) -> Step {
        match self.state.main.last() {
            Some(top) if is_true(top) => Ok(()),
            _ => self.fail("top of stack is false"),
        }
    }

    fn fail(&mut self, why: &'static str) -> Step {
        self.state.failed = true;
        Err(why)
    }

    fn run(&mut self, script: &Script) -> Step {
        for op in script.ops() {
            let r = self.step(op);
            if self.tracing {
                self.trace.push(TraceStep {
                    op: match op {
                        ScriptOp::Op(o) => o.name().to_string(),
                        ScriptOp::Push { data, .. } => format!("<{}>", hex::encode(data)),
                    },
                    main: self.state.main.clone(),
                    alt: self.state.alt.clone(),
                });
            }
            if let Err(why) = r {
                return self.fail(why);
            }
        }
        Ok(())
    }

    fn pop(&mut self) -> Result<Vec<u8>, &'static str> {
        self.state.main.pop().ok_or("stack underflow")
    }

    fn push_bool(&mut self, b: bool) {
        self.state.main.push(if b { vec![1] } else { Vec::new() });
    }

    fn step(&mut self, op: &ScriptOp) -> Step {
        let op = match op {
            ScriptOp::Push { data, .. } => {
                self.state.main.push(data.clone());
                return Ok(());
            }
            ScriptOp::Op(o) => *o,
        };
        match op {
            Opcode::Dup => {
                let top = self.state.main.last().ok_or("stack underflow")?.clone();
                self.state.main.push(top);
            }
            Opcode::Hash160 => {
                let top = self.pop()?;
                self.state.main.push(hash160(&top).to_vec());
            }
            Opcode::Equal | Opcode::EqualVerify => {
                let b = self.pop()?;
                let a = self.pop()?;
                if op == Opcode::Equal {
                    self.push_bool(a == b);
                } else if a != b {
                    return Err("OP_EQUALVERIFY failed");
                }
            }
            Opcode::CheckSig => {
                let pk = self.pop()?;
                let sig = self.pop()?;
                let ok = verify_msg(&pk, &self.ctx.tx_digest, &sig);
                self.push_bool(ok);
            }
            Opcode::Cat => {
                let b = self.pop()?;
                let mut a = self.pop()?;
                a.extend_from_slice(&b);
                if a.len() > crate::script::MAX_PUSH {
                    return Err("OP_CAT result too large");
                }
                self.state.main.push(a);
            }
            Opcode::ToAltStack => {
                let top = self.pop()?;
                self.state.alt.push(top);
            }
            Opcode::FromAltStack => {
                let top = self.state.alt.pop().ok_or("alt stack underflow")?;
                self.state.main.push(top);
            }
            Opcode::CheckDataSig | Opcode::CheckDataSigVerify => {
                let pk = self.pop()?;
                let msg = self.pop()?;
                let sig = self.pop()?;
                let ok = verify_msg(&pk, &msg, &sig);
                if op == Opcode::CheckDataSig {
                    self.push_bool(ok);
                } else if !ok {
                    return Err("OP_CHECKDATASIGVERIFY failed");
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{keygen_from_bytes, sign_msg};
    use crate::hierarchy::{AccessHierarchy, Label};
    use crate::script::*;
    use crate::test_support::test_seed;
    use crate::wallet::{wallet_sign, Wallet};

    const CTX: VmContext = VmContext { tx_digest: [0xab; 32] };

    fn raw(items: &[&[u8]]) -> Script {
        items.iter().fold(Script::new(), |s, d| s.push(PushRole::Raw, d).unwrap())
    }

    #[test]
    fn trivial_scripts() {
        assert!(eval(&Script::new(), &raw(&[&[1]]), &CTX));
        assert!(!eval(&Script::new(), &raw(&[&[0, 0]]), &CTX));
        assert!(!eval(&Script::new(), &raw(&[&[]]), &CTX));
        assert!(!eval(&Script::new(), &Script::new().op(Opcode::Dup), &CTX));
        assert!(!eval(&Script::new().op(Opcode::Dup), &raw(&[&[1]]), &CTX));
    }

    #[test]
    fn cat_and_equal() {
        let lock = Script::new().op(Opcode::Cat).push(PushRole::Raw, b"abcd").unwrap().op(Opcode::Equal);
        assert!(eval(&raw(&[b"ab", b"cd"]), &lock, &CTX));
        assert!(!eval(&raw(&[b"cd", b"ab"]), &lock, &CTX));
    }

    #[test]
    fn standard_pair() {
        let kp = keygen_from_bytes(&[3; 32]).unwrap();
        let other = keygen_from_bytes(&[4; 32]).unwrap();
        let sig = sign_msg(&kp, &CTX.tx_digest);
        let lock = lock_standard(&kp.public());
        assert!(eval(&unlock_standard(&sig, &kp.public()).unwrap(), &lock, &CTX));
        let t = trace(&unlock_standard(&sig, &other.public()).unwrap(), &lock, &CTX);
        assert!(!t.result);
        assert_eq!(t.failure, Some("OP_EQUALVERIFY failed"));
        let wrong_digest = VmContext { tx_digest: [0; 32] };
        assert!(!eval(&unlock_standard(&sig, &kp.public()).unwrap(), &lock, &wrong_digest));
    }

    #[test]
    fn arcula_trace() {
        let h = AccessHierarchy::validate(0..3, [(0, 1), (0, 2)]).unwrap();
        let w = Wallet::new(h, test_seed()).unwrap();
        let sk = w.signing_key(2).unwrap();
        let ws = wallet_sign(&sk, &CTX.tx_digest);
        let unlock = unlock_arcula(&ws.sig, &ws.cert.sig, &ws.pk).unwrap();
        let lock = lock_arcula(&w.pp().mpk, &Label::new(2, 0));
        let t = trace(&unlock, &lock, &CTX);
        assert!(t.result);
        let after_cdsv = t.steps.iter().find(|s| s.op == "OP_CHECKDATASIGVERIFY").unwrap();
        assert_eq!(after_cdsv.main, vec![ws.sig.clone()]);
        assert_eq!(after_cdsv.alt, vec![ws.pk.as_bytes().to_vec()]);

        let mut bad_cert = ws.cert.sig.clone();
        bad_cert[10] ^= 1;
        assert!(!eval(&unlock_arcula(&ws.sig, &bad_cert, &ws.pk).unwrap(), &lock, &CTX));
        assert!(!eval(&unlock, &lock_arcula(&w.pp().mpk, &Label::new(1, 0)), &CTX));
    }

    #[test]
    fn p2sh_matches_plain() {
        let h = AccessHierarchy::validate(0..2, [(0, 1)]).unwrap();
        let w = Wallet::new(h, test_seed()).unwrap();
        let ws = wallet_sign(&w.signing_key(1).unwrap(), &CTX.tx_digest);
        let unlock = unlock_arcula(&ws.sig, &ws.cert.sig, &ws.pk).unwrap();
        let inner = lock_arcula(&w.pp().mpk, &Label::new(1, 0));
        let (lock, suffix) = p2sh_wrap(&inner);
        assert!(eval(&unlock.clone().concat(&suffix), &lock, &CTX));
        assert!(eval_bytes(&unlock.clone().concat(&suffix).to_bytes(), &lock.to_bytes(), &CTX));
        // hash matches but the inner script rejects
        let bad = unlock_arcula(&ws.sig, &ws.sig, &ws.pk).unwrap().concat(&suffix);
        assert!(!eval(&bad, &lock, &CTX));
        // wrong redeem script
        let (_, other_suffix) = p2sh_wrap(&lock_arcula(&w.pp().mpk, &Label::new(0, 0)));
        assert!(!eval(&unlock.concat(&other_suffix), &lock, &CTX));
    }

    #[test]
    fn malformed_bytes_are_false() {
        assert!(!eval_bytes(&[0x05, 1], &[0x51], &CTX));
        assert!(!eval_bytes(&[], &[0xff], &CTX));
    }
}
