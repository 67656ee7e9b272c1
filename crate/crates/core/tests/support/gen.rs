//! Seeded random models over a fixed small signature.

#![allow(dead_code)]

use bleproof_core::pvlang::{parse_valid, render, PiModel, Process, Term};
use rand::rngs::StdRng;
use rand::Rng;

pub const HEADER: &str = "\
free c: channel.
free d: channel [private].
free k: bitstring [private].
free s: bitstring [private].
fun senc(bitstring, bitstring): bitstring.
fun h(bitstring): bitstring.
reduc forall m: bitstring, kk: bitstring; sdec(senc(m, kk), kk) = m.
event begin_auth(bitstring).
event end_auth(bitstring).
event accept(bitstring).
query attacker(s).
query x: bitstring; event(end_auth(x)) ==> event(begin_auth(x)).
(*! query freshness(accept). *)
";

pub struct Shape {
    pub max_steps: usize,
    /// Input instances after unrolling replication.
    pub max_inputs: usize,
    /// Input statements in the model text.
    pub max_input_sites: usize,
    pub session_bound: usize,
}

struct Role<'r> {
    rng: &'r mut StdRng,
    steps: usize,
    inputs: usize,
    sites: usize,
    weight: usize,
    fresh: usize,
    cap: usize,
    site_cap: usize,
}

impl Role<'_> {
    fn atom(&mut self, scope: &[String]) -> Term {
        let base = ["s", "k"];
        let n = base.len() + scope.len();
        let i = self.rng.gen_range(0..n);
        if i < base.len() {
            Term::ident(base[i])
        } else {
            Term::ident(scope[i - base.len()].clone())
        }
    }

    fn term(&mut self, scope: &[String]) -> Term {
        match self.rng.gen_range(0..6) {
            0..=2 => self.atom(scope),
            3 => Term::app("h", vec![self.atom(scope)]),
            _ => {
                let key = if self.rng.gen_bool(0.7) { Term::ident("k") } else { self.atom(scope) };
                Term::app("senc", vec![self.atom(scope), key])
            }
        }
    }

    fn chan(&mut self) -> Term {
        Term::ident(if self.rng.gen_bool(0.8) { "c" } else { "d" })
    }

    fn name(&mut self, stem: &str) -> String {
        self.fresh += 1;
        format!("{stem}{}", self.fresh)
    }

    fn process(&mut self, scope: &mut Vec<String>) -> Process {
        if self.steps == 0 {
            return Process::Nil;
        }
        self.steps -= 1;
        let vars: Vec<String> = scope.iter().filter(|v| !v.starts_with('n')).cloned().collect();
        match self.rng.gen_range(0..10) {
            0 => {
                let n = self.name("n");
                scope.push(n.clone());
                let cont = self.process(scope);
                Process::New { name: n, ty: "bitstring".into(), cont: Box::new(cont) }
            }
            1 | 2 => {
                let (chan, msg) = (self.chan(), self.term(scope));
                Process::Out { chan, msg, cont: Box::new(self.process(scope)) }
            }
            3 | 4 if self.inputs + self.weight <= self.cap && self.sites < self.site_cap => {
                self.inputs += self.weight;
                self.sites += 1;
                let chan = self.chan();
                let x = self.name("x");
                scope.push(x.clone());
                let cont = self.process(scope);
                Process::In { chan, var: x, ty: "bitstring".into(), cont: Box::new(cont) }
            }
            5 if !vars.is_empty() => {
                let src = vars[self.rng.gen_range(0..vars.len())].clone();
                let y = self.name("y");
                let key = if self.rng.gen_bool(0.8) { Term::ident("k") } else { self.atom(scope) };
                let mut inner = scope.clone();
                inner.push(y.clone());
                let cont = self.process(&mut inner);
                let els = if self.rng.gen_bool(0.7) { Process::Nil } else { self.event(scope) };
                Process::Let {
                    var: y,
                    term: Term::app("sdec", vec![Term::ident(src), key]),
                    cont: Box::new(cont),
                    els: Some(Box::new(els)),
                }
            }
            6 if !scope.is_empty() => {
                let lhs = Term::ident(scope[self.rng.gen_range(0..scope.len())].clone());
                let rhs = self.term(scope);
                let then = self.process(&mut scope.clone());
                let els = self.rng.gen_bool(0.3).then(|| Box::new(Process::Nil));
                Process::If { lhs, rhs, then: Box::new(then), els }
            }
            _ => {
                let ev = self.event(scope);
                match ev {
                    Process::Event { name, args, .. } => {
                        Process::Event { name, args, cont: Box::new(self.process(scope)) }
                    }
                    _ => unreachable!(),
                }
            }
        }
    }

    fn event(&mut self, scope: &[String]) -> Process {
        let name = ["begin_auth", "end_auth", "accept"][self.rng.gen_range(0..3)];
        let arg = if self.rng.gen_bool(0.6) { self.atom(scope) } else { self.term(scope) };
        Process::Event { name: name.into(), args: vec![arg], cont: Box::new(Process::Nil) }
    }
}

/// A valid model with one or two roles, each possibly replicated.
pub fn model(rng: &mut StdRng, shape: &Shape) -> PiModel {
    loop {
        let roles = rng.gen_range(1..=2);
        let mut budget_steps = shape.max_steps;
        let (mut inputs, mut sites, mut fresh) = (0, 0, 0);
        let mut parts = Vec::new();
        for r in 0..roles {
            let replicated = rng.gen_bool(0.5);
            let weight = if replicated { shape.session_bound } else { 1 };
            let steps = if r + 1 == roles { budget_steps } else { rng.gen_range(1..=budget_steps.max(1)) };
            budget_steps = budget_steps.saturating_sub(steps).max(1);
            let mut role = Role {
                rng,
                steps,
                inputs,
                sites,
                weight,
                fresh,
                cap: shape.max_inputs,
                site_cap: shape.max_input_sites,
            };
            let p = role.process(&mut Vec::new());
            inputs = role.inputs;
            sites = role.sites;
            fresh = role.fresh;
            parts.push(if replicated { Process::repl(p) } else { p });
        }
        let main = parts.into_iter().reduce(Process::par).unwrap_or(Process::Nil);
        let text = format!("{HEADER}\nprocess\n{}", body(&main));
        if let Ok(m) = parse_valid(&text) {
            return m;
        }
    }
}

fn body(p: &Process) -> String {
    let m = PiModel { declarations: Vec::new(), main_process: p.clone(), queries: Vec::new() };
    let text = render(&m);
    text.trim_start_matches("process").to_string()
}
