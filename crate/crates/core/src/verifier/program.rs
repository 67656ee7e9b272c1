use std::sync::Arc;

use super::term::{Rule, Signature, Subst, Term};
use crate::pvlang::{self, PiModel, Process};

pub type NodeId = u32;

/// Process tree flattened into an arena so threads can point into it.
#[derive(Debug, Clone)]
pub enum Node {
    Nil,
    New { name: Arc<str>, next: NodeId },
    Out { chan: pvlang::Term, msg: pvlang::Term, next: NodeId },
    In { chan: pvlang::Term, var: Arc<str>, next: NodeId },
    Event { name: Arc<str>, args: Vec<pvlang::Term>, next: NodeId },
    Let { var: Arc<str>, term: pvlang::Term, then: NodeId, els: NodeId },
    If { lhs: pvlang::Term, rhs: pvlang::Term, then: NodeId, els: NodeId },
    Par(NodeId, NodeId),
    Repl(NodeId),
}

/// Variable bindings of a thread, innermost last.
pub type Env = Vec<(Arc<str>, Term)>;

#[derive(Debug, Clone)]
pub struct Program {
    pub nodes: Vec<Node>,
    pub root: NodeId,
    pub sig: Signature,
}

impl Program {
    pub fn compile(model: &PiModel) -> Self {
        let mut p = Program { nodes: vec![Node::Nil], root: 0, sig: Signature::from_model(model) };
        p.root = p.add(&model.main_process);
        p
    }

    fn add(&mut self, proc: &Process) -> NodeId {
        let node = match proc {
            Process::Nil => return 0,
            Process::New { name, cont, .. } => Node::New { name: name.as_str().into(), next: self.add(cont) },
            Process::Out { chan, msg, cont } => {
                Node::Out { chan: chan.clone(), msg: msg.clone(), next: self.add(cont) }
            }
            Process::In { chan, var, cont, .. } => {
                Node::In { chan: chan.clone(), var: var.as_str().into(), next: self.add(cont) }
            }
            Process::Event { name, args, cont } => {
                Node::Event { name: name.as_str().into(), args: args.clone(), next: self.add(cont) }
            }
            Process::Let { var, term, cont, els } => Node::Let {
                var: var.as_str().into(),
                term: term.clone(),
                then: self.add(cont),
                els: els.as_ref().map_or(0, |e| self.add(e)),
            },
            Process::If { lhs, rhs, then, els } => Node::If {
                lhs: lhs.clone(),
                rhs: rhs.clone(),
                then: self.add(then),
                els: els.as_ref().map_or(0, |e| self.add(e)),
            },
            Process::Par(a, b) => {
                let (a, b) = (self.add(a), self.add(b));
                Node::Par(a, b)
            }
            Process::Repl(q) => Node::Repl(self.add(q)),
        };
        self.nodes.push(node);
        (self.nodes.len() - 1) as NodeId
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id as usize]
    }

    /// Label of the name created by the `new` at `site` in copy `path`.
    pub fn fresh(&self, name: &str, site: NodeId, path: &[u8]) -> Term {
        let mut label = format!("{name}#{site}");
        for (i, c) in path.iter().enumerate() {
            label.push(if i == 0 { '.' } else { '_' });
            label.push_str(&c.to_string());
        }
        Term::Fresh(label.into())
    }

    /// Evaluates a ground term; `None` when a destructor does not reduce.
    pub fn eval(&self, t: &pvlang::Term, env: &Env) -> Option<Term> {
        match t {
            pvlang::Term::Ident(x) => Some(self.lookup(x, env)),
            pvlang::Term::App(f, args) => {
                let vals = args.iter().map(|a| self.eval(a, env)).collect::<Option<Vec<_>>>()?;
                match self.sig.rules.get(f.as_str()) {
                    Some(rule) => rule.apply(&vals),
                    None => Some(Term::App(f.as_str().into(), vals.into())),
                }
            }
        }
    }

    fn lookup(&self, x: &str, env: &Env) -> Term {
        if let Some((_, v)) = env.iter().rev().find(|(n, _)| &**n == x) {
            return v.clone();
        }
        if self.sig.ctors.contains_key(x) {
            Term::App(x.into(), Arc::from([]))
        } else {
            Term::Name(x.into())
        }
    }

    /// Evaluation over terms that may contain symbolic variables; destructor
    /// rules are applied by unification, extending `s`.
    pub fn eval_sym(&self, t: &pvlang::Term, env: &Env, s: &mut Subst, fresh_suffix: &mut u32) -> Option<Term> {
        match t {
            pvlang::Term::Ident(x) => Some(self.lookup(x, env)),
            pvlang::Term::App(f, args) => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.eval_sym(a, env, s, fresh_suffix)?);
                }
                match self.sig.rules.get(f.as_str()) {
                    Some(rule) => {
                        *fresh_suffix += 1;
                        let r: Rule = rule.renamed(&format!("'{fresh_suffix}"));
                        for (p, v) in r.lhs.iter().zip(&vals) {
                            if !super::term::unify(p, v, s) {
                                return None;
                            }
                        }
                        Some(r.rhs)
                    }
                    None => Some(Term::App(f.as_str().into(), vals.into())),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pvlang::parse_model;

    #[test]
    fn compile_and_eval() {
        let m = parse_model(
            "free c: channel. free k: bitstring [private]. fun senc(bitstring, bitstring): bitstring.\n\
             reduc forall x: bitstring, y: bitstring; sdec(senc(x, y), y) = x.\n\
             process new n: bitstring; out(c, senc(n, k))",
        )
        .unwrap();
        let p = Program::compile(&m);
        assert!(matches!(p.node(p.root), Node::New { .. }));
        let env: Env = vec![("n".into(), Term::name("v"))];
        let t = pvlang::Term::app(
            "sdec",
            vec![
                pvlang::Term::app("senc", vec![pvlang::Term::ident("n"), pvlang::Term::ident("k")]),
                pvlang::Term::ident("k"),
            ],
        );
        assert_eq!(p.eval(&t, &env), Some(Term::name("v")));
        let bad = pvlang::Term::app("sdec", vec![pvlang::Term::ident("n"), pvlang::Term::ident("k")]);
        assert_eq!(p.eval(&bad, &env), None);
        assert_eq!(p.fresh("n", 3, &[1, 2]).to_string(), "n#3.1_2");
    }
}
