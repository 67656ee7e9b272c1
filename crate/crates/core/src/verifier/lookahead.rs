//! Input candidates from symbolic lookahead.
//!
//! Every input still ahead of a thread is made a symbolic variable, and each
//! path through its continuation is explored twice at every guard: once
//! assuming the guard passes (unifying its two sides, or a destructor
//! pattern with its arguments) and once assuming it is skipped. What the
//! input variables must be for a path to go through, with leftover
//! variables set to the attacker's name, gives the interesting messages.

use std::collections::BTreeSet;

use super::program::{Env, Node, NodeId, Program};
use super::term::{Subst, Term};

const MAX_PATHS: usize = 4096;

struct Walk<'a> {
    prog: &'a Program,
    out: &'a mut BTreeSet<Term>,
    counter: u32,
    paths: usize,
}

/// Subterms of what the thread at `node` could profitably receive.
pub fn candidates(prog: &Program, node: NodeId, env: &Env, path: &[u8], out: &mut BTreeSet<Term>) {
    let mut w = Walk { prog, out, counter: 0, paths: 0 };
    w.go(node, env.clone(), path.to_vec(), Subst::new(), Vec::new());
}

impl Walk<'_> {
    fn leaf(&mut self, s: &Subst, inputs: &[Term]) {
        self.paths += 1;
        for v in inputs {
            v.subst(s).ground_with(&Term::Attacker).subterms(self.out);
        }
    }

    fn go(&mut self, id: NodeId, mut env: Env, path: Vec<u8>, s: Subst, mut inputs: Vec<Term>) {
        if self.paths >= MAX_PATHS {
            return;
        }
        match self.prog.node(id) {
            Node::Nil => self.leaf(&s, &inputs),
            Node::New { name, next } => {
                env.push((name.clone(), self.prog.fresh(name, id, &path)));
                self.go(*next, env, path, s, inputs);
            }
            Node::Out { next, .. } | Node::Event { next, .. } => self.go(*next, env, path, s, inputs),
            Node::In { var, next, .. } => {
                self.counter += 1;
                let v = Term::Var(format!("in{}", self.counter).into());
                inputs.push(v.clone());
                env.push((var.clone(), v));
                self.go(*next, env, path, s, inputs);
            }
            Node::Let { var, term, then, els } => {
                let mut s2 = s.clone();
                if let Some(val) = self.prog.eval_sym(term, &env, &mut s2, &mut self.counter) {
                    let mut env2 = env.clone();
                    env2.push((var.clone(), val));
                    self.go(*then, env2, path.clone(), s2, inputs.clone());
                }
                self.go(*els, env, path, s, inputs);
            }
            Node::If { lhs, rhs, then, els } => {
                let mut s2 = s.clone();
                let l = self.prog.eval_sym(lhs, &env, &mut s2, &mut self.counter);
                let r = self.prog.eval_sym(rhs, &env, &mut s2, &mut self.counter);
                if let (Some(l), Some(r)) = (l, r) {
                    if super::term::unify(&l, &r, &mut s2) {
                        self.go(*then, env.clone(), path.clone(), s2, inputs.clone());
                    }
                }
                self.go(*els, env, path, s, inputs);
            }
            Node::Par(a, b) => {
                self.go(*a, env.clone(), path.clone(), s.clone(), inputs.clone());
                self.go(*b, env, path, s, inputs);
            }
            Node::Repl(q) => {
                let mut p = path;
                p.push(1);
                self.go(*q, env, p, s, inputs);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pvlang::parse_model;

    #[test]
    fn decrypt_then_compare() {
        let m = parse_model(
            "free c: channel. free k: bitstring [private]. free a: bitstring.\n\
             fun senc(bitstring, bitstring): bitstring. fun h(bitstring): bitstring.\n\
             reduc forall x: bitstring, y: bitstring; sdec(senc(x, y), y) = x.\n\
             process in(c, m: bitstring); let z = sdec(m, k) in if z = h(a) then out(c, z) else 0 else 0",
        )
        .unwrap();
        let p = Program::compile(&m);
        let mut out = BTreeSet::new();
        candidates(&p, p.root, &Vec::new(), &[], &mut out);
        let want = Term::app("senc", vec![Term::app("h", vec![Term::name("a")]), Term::name("k")]);
        assert!(out.contains(&want), "{out:?}");
        assert!(out.contains(&Term::app("h", vec![Term::name("a")])));
        assert!(out.contains(&Term::Attacker));
    }
}
