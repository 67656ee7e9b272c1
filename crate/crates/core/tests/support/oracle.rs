//! Reference semantics for the bounded verifier, written without reusing any
//! of its code. Every step of every process is interleaved (no eager
//! execution), each input ranges over the whole literal attacker closure
//! restricted to the input depth, and derivability is membership in that
//! materialized closure.

#![allow(dead_code)]

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::rc::Rc;

use bleproof_core::pvlang::{Decl, PiModel, Process, QuerySpec, Term as Ast};

/// Interned ground term.
type Id = u32;

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
enum Node {
    Free(String),
    /// Binder (made unique per site) and replication copy path.
    Fresh(String, Vec<u8>),
    Adv,
    F(String, Vec<Id>),
}

#[derive(Default)]
struct Terms {
    nodes: Vec<Node>,
    depth: Vec<usize>,
    index: HashMap<Node, Id>,
}

impl Terms {
    fn intern(&mut self, n: Node) -> Id {
        if let Some(&id) = self.index.get(&n) {
            return id;
        }
        let d = match &n {
            Node::F(_, a) => 1 + a.iter().map(|&x| self.depth[x as usize]).max().unwrap_or(0),
            _ => 1,
        };
        let id = self.nodes.len() as Id;
        self.nodes.push(n.clone());
        self.depth.push(d);
        self.index.insert(n, id);
        id
    }
}

/// Rewrite-rule pattern.
#[derive(Clone, Debug)]
enum Pat {
    V(String),
    Free(String),
    F(String, Vec<Pat>),
}

#[derive(Clone)]
struct Sig {
    ctors: BTreeMap<String, (usize, bool)>,
    rules: BTreeMap<String, (Vec<Pat>, Pat)>,
    public: Vec<String>,
}

fn pat(t: &Ast, vars: &BTreeSet<String>, ctors: &BTreeMap<String, (usize, bool)>) -> Pat {
    match t {
        Ast::Ident(x) if vars.contains(x) => Pat::V(x.clone()),
        Ast::Ident(x) if ctors.contains_key(x) => Pat::F(x.clone(), vec![]),
        Ast::Ident(x) => Pat::Free(x.clone()),
        Ast::App(f, a) => Pat::F(f.clone(), a.iter().map(|x| pat(x, vars, ctors)).collect()),
    }
}

impl Sig {
    fn new(m: &PiModel) -> Self {
        let mut ctors = BTreeMap::new();
        let mut public = Vec::new();
        for d in &m.declarations {
            match d {
                Decl::Fun { name, args, private, .. } => {
                    ctors.insert(name.clone(), (args.len(), *private));
                }
                Decl::Free { name, private: false, .. } => public.push(name.clone()),
                _ => {}
            }
        }
        let mut rules = BTreeMap::new();
        for d in &m.declarations {
            if let Decl::Reduc { vars, name, args, rhs } = d {
                let vs: BTreeSet<String> = vars.iter().map(|v| v.0.clone()).collect();
                rules.insert(name.clone(), (args.iter().map(|a| pat(a, &vs, &ctors)).collect(), pat(rhs, &vs, &ctors)));
            }
        }
        Sig { ctors, rules, public }
    }
}

fn matches(terms: &Terms, p: &Pat, t: Id, s: &mut BTreeMap<String, Id>) -> bool {
    match p {
        Pat::V(v) => match s.get(v) {
            Some(&b) => b == t,
            None => {
                s.insert(v.clone(), t);
                true
            }
        },
        Pat::Free(x) => matches!(&terms.nodes[t as usize], Node::Free(y) if x == y),
        Pat::F(f, ps) => match &terms.nodes[t as usize] {
            Node::F(g, ts) if f == g && ps.len() == ts.len() => {
                let ts = ts.clone();
                ps.iter().zip(ts).all(|(p, t)| matches(terms, p, t, s))
            }
            _ => false,
        },
    }
}

fn inst(terms: &mut Terms, p: &Pat, s: &BTreeMap<String, Id>) -> Id {
    match p {
        Pat::V(v) => s[v],
        Pat::Free(x) => terms.intern(Node::Free(x.clone())),
        Pat::F(f, a) => {
            let args = a.iter().map(|x| inst(terms, x, s)).collect();
            terms.intern(Node::F(f.clone(), args))
        }
    }
}

fn reduce(sig: &Sig, terms: &mut Terms, f: &str, args: &[Id]) -> Option<Id> {
    let (lhs, rhs) = &sig.rules[f];
    let mut s = BTreeMap::new();
    if lhs.len() != args.len() || !lhs.iter().zip(args).all(|(p, &a)| matches(terms, p, a, &mut s)) {
        return None;
    }
    Some(inst(terms, rhs, &s))
}

/// Least set containing `raw`, closed under public constructors (results
/// up to `cap` deep) and destructor rules.
fn closure(sig: &Sig, terms: &mut Terms, raw: &BTreeSet<Id>, cap: usize) -> HashSet<Id> {
    let mut set: HashSet<Id> = raw.iter().copied().collect();
    loop {
        let items: Vec<Id> = set.iter().copied().collect();
        let mut added = Vec::new();
        for (f, (n, private)) in &sig.ctors {
            if *private {
                continue;
            }
            for args in tuples(&items, *n) {
                if 1 + args.iter().map(|&a| terms.depth[a as usize]).max().unwrap_or(0) > cap {
                    continue;
                }
                let t = terms.intern(Node::F(f.clone(), args));
                if !set.contains(&t) {
                    added.push(t);
                }
            }
        }
        for (g, (lhs, _)) in &sig.rules {
            for args in tuples(&items, lhs.len()) {
                if let Some(t) = reduce(sig, terms, g, &args) {
                    if !set.contains(&t) {
                        added.push(t);
                    }
                }
            }
        }
        if added.is_empty() {
            return set;
        }
        set.extend(added);
    }
}

fn tuples(items: &[Id], n: usize) -> Vec<Vec<Id>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        let mut next = Vec::with_capacity(out.len() * items.len());
        for prefix in &out {
            for &it in items {
                let mut p = prefix.clone();
                p.push(it);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Gives every `new` binder a unique name so fresh values can be told
/// apart by binder and copy path alone.
fn uniquify(p: &Process, ren: &BTreeMap<String, String>, counter: &mut usize) -> Process {
    let term = |t: &Ast| rename_term(t, ren);
    let shadow = |v: &str| {
        let mut r = ren.clone();
        r.remove(v);
        r
    };
    match p {
        Process::Nil => Process::Nil,
        Process::New { name, ty, cont } => {
            *counter += 1;
            let fresh = format!("{name}~{counter}");
            let mut r = ren.clone();
            r.insert(name.clone(), fresh.clone());
            Process::New { name: fresh, ty: ty.clone(), cont: Box::new(uniquify(cont, &r, counter)) }
        }
        Process::Out { chan, msg, cont } => {
            Process::Out { chan: term(chan), msg: term(msg), cont: Box::new(uniquify(cont, ren, counter)) }
        }
        Process::In { chan, var, ty, cont } => Process::In {
            chan: term(chan),
            var: var.clone(),
            ty: ty.clone(),
            cont: Box::new(uniquify(cont, &shadow(var), counter)),
        },
        Process::Event { name, args, cont } => Process::Event {
            name: name.clone(),
            args: args.iter().map(term).collect(),
            cont: Box::new(uniquify(cont, ren, counter)),
        },
        Process::Let { var, term: t, cont, els } => Process::Let {
            var: var.clone(),
            term: term(t),
            cont: Box::new(uniquify(cont, &shadow(var), counter)),
            els: els.as_ref().map(|e| Box::new(uniquify(e, ren, counter))),
        },
        Process::If { lhs, rhs, then, els } => Process::If {
            lhs: term(lhs),
            rhs: term(rhs),
            then: Box::new(uniquify(then, ren, counter)),
            els: els.as_ref().map(|e| Box::new(uniquify(e, ren, counter))),
        },
        Process::Par(a, b) => Process::par(uniquify(a, ren, counter), uniquify(b, ren, counter)),
        Process::Repl(q) => Process::repl(uniquify(q, ren, counter)),
    }
}

fn rename_term(t: &Ast, ren: &BTreeMap<String, String>) -> Ast {
    match t {
        Ast::Ident(x) => Ast::Ident(ren.get(x).cloned().unwrap_or_else(|| x.clone())),
        Ast::App(f, a) => Ast::App(f.clone(), a.iter().map(|x| rename_term(x, ren)).collect()),
    }
}

/// Process subtrees indexed by pre-order position, with child ids.
struct Tree {
    nodes: Vec<Process>,
    kids: Vec<Vec<usize>>,
}

const NIL: usize = 0;

impl Tree {
    fn build(root: &Process) -> (Tree, usize) {
        let mut t = Tree { nodes: vec![Process::Nil], kids: vec![Vec::new()] };
        let id = t.add(root);
        (t, id)
    }

    fn add(&mut self, p: &Process) -> usize {
        let id = self.nodes.len();
        self.nodes.push(p.clone());
        self.kids.push(Vec::new());
        let kids = match p {
            Process::Nil => vec![],
            Process::New { cont, .. }
            | Process::Out { cont, .. }
            | Process::In { cont, .. }
            | Process::Event { cont, .. } => {
                vec![self.add(cont)]
            }
            Process::Let { cont: a, els, .. } | Process::If { then: a, els, .. } => {
                vec![self.add(a), els.as_ref().map_or(NIL, |e| self.add(e))]
            }
            Process::Par(a, b) => vec![self.add(a), self.add(b)],
            Process::Repl(q) => vec![self.add(q)],
        };
        self.kids[id] = kids;
        id
    }
}

const UNSET: Id = Id::MAX;

/// Variable values by slot; binder names are mapped to slots up front.
type Env = Vec<Id>;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Proc {
    path: Vec<u8>,
    env: Env,
    p: usize,
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct Conf {
    procs: Vec<Proc>,
    raw: BTreeSet<Id>,
    begins: BTreeSet<Vec<Id>>,
}

/// Attacker closure, sorted, and the part of it shallow enough to send.
struct Known {
    all: Vec<Id>,
    inputs: Vec<Id>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Findings {
    pub secrecy_violated: bool,
    pub correspondence_violated: bool,
    pub end_reached: bool,
    pub freshness_violated: bool,
}

pub struct Oracle {
    sig: Sig,
    tree: Tree,
    main: usize,
    slots: HashMap<String, usize>,
    bound: u8,
    depth: usize,
    terms: RefCell<Terms>,
    cache: HashMap<BTreeSet<Id>, Rc<Known>>,
    pub max_states: usize,
}

enum Watch<'q> {
    Trace { secret: Option<Id>, end: Option<&'q str>, begin: Option<&'q str> },
    Replay { accept: &'q str, target: u8 },
}

impl Oracle {
    pub fn new(model: &PiModel, session_bound: usize, depth: usize) -> Self {
        let mut counter = 0;
        let (tree, main) = Tree::build(&uniquify(&model.main_process, &BTreeMap::new(), &mut counter));
        let mut slots = HashMap::new();
        for p in &tree.nodes {
            let binder = match p {
                Process::New { name, .. } => name,
                Process::In { var, .. } | Process::Let { var, .. } => var,
                _ => continue,
            };
            let next = slots.len();
            slots.entry(binder.clone()).or_insert(next);
        }
        Oracle {
            sig: Sig::new(model),
            tree,
            main,
            slots,
            bound: session_bound as u8,
            depth,
            terms: RefCell::new(Terms::default()),
            cache: HashMap::new(),
            max_states: 5_000_000,
        }
    }

    fn known(&mut self, raw: &BTreeSet<Id>) -> Rc<Known> {
        if let Some(c) = self.cache.get(raw) {
            return c.clone();
        }
        let set = closure(&self.sig, &mut self.terms.borrow_mut(), raw, self.depth);
        let mut all: Vec<Id> = set.into_iter().collect();
        all.sort_unstable();
        let depth = &self.terms.borrow().depth;
        let inputs = all.iter().copied().filter(|&t| depth[t as usize] <= self.depth).collect();
        let c = Rc::new(Known { all, inputs });
        self.cache.insert(raw.clone(), c.clone());
        c
    }

    fn eval(&self, t: &Ast, env: &Env) -> Option<Id> {
        match t {
            Ast::Ident(x) => {
                if let Some(&slot) = self.slots.get(x) {
                    if env[slot] != UNSET {
                        return Some(env[slot]);
                    }
                }
                let node =
                    if self.sig.ctors.contains_key(x) { Node::F(x.clone(), vec![]) } else { Node::Free(x.clone()) };
                Some(self.terms.borrow_mut().intern(node))
            }
            Ast::App(f, a) => {
                let args = a.iter().map(|x| self.eval(x, env)).collect::<Option<Vec<_>>>()?;
                let mut terms = self.terms.borrow_mut();
                if self.sig.rules.contains_key(f) {
                    reduce(&self.sig, &mut terms, f, &args)
                } else {
                    Some(terms.intern(Node::F(f.clone(), args)))
                }
            }
        }
    }

    fn bind(&self, env: &Env, var: &str, v: Id) -> Env {
        let mut env = env.clone();
        env[self.slots[var]] = v;
        env
    }

    /// Splits parallel composition, unrolls replication and drops `0`.
    fn spread(&self, pr: Proc, copies: u8, out: &mut Vec<Proc>) {
        let kids = &self.tree.kids[pr.p];
        match &self.tree.nodes[pr.p] {
            Process::Nil => {}
            Process::Par(..) => {
                self.spread(Proc { path: pr.path.clone(), env: pr.env.clone(), p: kids[0] }, copies, out);
                self.spread(Proc { path: pr.path, env: pr.env, p: kids[1] }, copies, out);
            }
            Process::Repl(_) => {
                for i in 1..=copies {
                    let mut path = pr.path.clone();
                    path.push(i);
                    self.spread(Proc { path, env: pr.env.clone(), p: kids[0] }, copies, out);
                }
            }
            _ => out.push(pr),
        }
    }

    fn start(&self, replay: Option<u8>) -> Conf {
        let mut procs = Vec::new();
        let env = vec![UNSET; self.slots.len()];
        match replay {
            Some(sessions) => {
                for s in 1..=sessions {
                    self.spread(Proc { path: vec![s], env: env.clone(), p: self.main }, 1, &mut procs);
                }
            }
            None => self.spread(Proc { path: vec![], env, p: self.main }, self.bound, &mut procs),
        }
        procs.sort();
        let mut terms = self.terms.borrow_mut();
        let mut raw: BTreeSet<Id> = self.sig.public.iter().map(|n| terms.intern(Node::Free(n.clone()))).collect();
        raw.insert(terms.intern(Node::Adv));
        Conf { procs, raw, begins: BTreeSet::new() }
    }

    /// Secrecy of `secret` and the correspondence `end ==> begin`, over every
    /// interleaving.
    pub fn trace_properties(&mut self, secret: Option<&Ast>, end: Option<&str>, begin: Option<&str>) -> Findings {
        let empty = vec![UNSET; self.slots.len()];
        let secret = secret.and_then(|t| self.eval(t, &empty));
        self.explore(&Watch::Trace { secret, end, begin }, None)
    }

    /// Pure replay into the last of `max(bound, 2)` whole-process sessions.
    pub fn freshness(&mut self, accept: &str) -> bool {
        let target = self.bound.max(2);
        self.explore(&Watch::Replay { accept, target }, Some(target)).freshness_violated
    }

    fn explore(&mut self, watch: &Watch<'_>, replay: Option<u8>) -> Findings {
        let copies = if replay.is_some() { 1 } else { self.bound };
        let mut found = Findings::default();
        let init = self.start(replay);
        if self.check_secret(watch, &init.raw) {
            found.secrecy_violated = true;
        }
        let mut seen = HashSet::new();
        let mut stack = vec![init.clone()];
        seen.insert(init);
        while let Some(conf) = stack.pop() {
            assert!(seen.len() <= self.max_states, "oracle state budget exceeded");
            for next in self.successors(&conf, copies, watch, &mut found) {
                if self.check_secret(watch, &next.raw) {
                    found.secrecy_violated = true;
                }
                if seen.insert(next.clone()) {
                    stack.push(next);
                }
            }
        }
        found
    }

    fn check_secret(&mut self, watch: &Watch<'_>, raw: &BTreeSet<Id>) -> bool {
        match watch {
            Watch::Trace { secret: Some(s), .. } => self.known(raw).all.binary_search(s).is_ok(),
            _ => false,
        }
    }

    fn successors(&mut self, conf: &Conf, copies: u8, watch: &Watch<'_>, found: &mut Findings) -> Vec<Conf> {
        let know = self.known(&conf.raw);
        let this = &*self;
        let knows = |t: Id| know.all.binary_search(&t).is_ok();
        let mut out = Vec::new();
        for i in 0..conf.procs.len() {
            let pr = &conf.procs[i];
            let session = pr.path.first().copied().unwrap_or(0);
            let kids = &this.tree.kids[pr.p];
            // replaces process i by `conts` in a copy of the configuration
            let rebuild = |conts: Vec<Proc>, raw: BTreeSet<Id>, begins: BTreeSet<Vec<Id>>| {
                let mut procs: Vec<Proc> =
                    conf.procs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, p)| p.clone()).collect();
                for c in conts {
                    this.spread(c, copies, &mut procs);
                }
                procs.sort();
                Conf { procs, raw, begins }
            };
            let with = |p: usize, env: Env| Proc { path: pr.path.clone(), env, p };
            match &this.tree.nodes[pr.p] {
                Process::New { name, .. } => {
                    let v = this.terms.borrow_mut().intern(Node::Fresh(name.clone(), pr.path.clone()));
                    out.push(rebuild(
                        vec![with(kids[0], this.bind(&pr.env, name, v))],
                        conf.raw.clone(),
                        conf.begins.clone(),
                    ));
                }
                Process::Let { var, term, .. } => {
                    let next = match this.eval(term, &pr.env) {
                        Some(v) => with(kids[0], this.bind(&pr.env, var, v)),
                        None => with(kids[1], pr.env.clone()),
                    };
                    out.push(rebuild(vec![next], conf.raw.clone(), conf.begins.clone()));
                }
                Process::If { lhs, rhs, .. } => {
                    let l = this.eval(lhs, &pr.env);
                    let eq = l.is_some() && l == this.eval(rhs, &pr.env);
                    let branch = if eq { kids[0] } else { kids[1] };
                    out.push(rebuild(vec![with(branch, pr.env.clone())], conf.raw.clone(), conf.begins.clone()));
                }
                Process::Event { name, args, .. } => {
                    let Some(vals) = args.iter().map(|a| this.eval(a, &pr.env)).collect::<Option<Vec<_>>>() else {
                        out.push(rebuild(vec![], conf.raw.clone(), conf.begins.clone()));
                        continue;
                    };
                    let mut begins = conf.begins.clone();
                    match watch {
                        Watch::Trace { end, begin, .. } => {
                            if Some(name.as_str()) == *end {
                                found.end_reached = true;
                                if !conf.begins.contains(&vals) {
                                    found.correspondence_violated = true;
                                }
                            }
                            if Some(name.as_str()) == *begin {
                                begins.insert(vals);
                            }
                        }
                        Watch::Replay { accept, target } => {
                            if name == accept && session == *target {
                                found.freshness_violated = true;
                            }
                        }
                    }
                    out.push(rebuild(vec![with(kids[0], pr.env.clone())], conf.raw.clone(), begins));
                }
                Process::Out { chan, msg, .. } => {
                    let (Some(c), Some(m)) = (this.eval(chan, &pr.env), this.eval(msg, &pr.env)) else {
                        out.push(rebuild(vec![], conf.raw.clone(), conf.begins.clone()));
                        continue;
                    };
                    if knows(c) {
                        let mut raw = conf.raw.clone();
                        let withheld = matches!(watch, Watch::Replay { target, .. } if session == *target);
                        if !withheld {
                            raw.insert(m);
                        }
                        out.push(rebuild(vec![with(kids[0], pr.env.clone())], raw, conf.begins.clone()));
                    } else {
                        for (j, q) in conf.procs.iter().enumerate() {
                            let Process::In { chan: qc, var, .. } = &this.tree.nodes[q.p] else { continue };
                            if j == i || this.eval(qc, &q.env) != Some(c) {
                                continue;
                            }
                            let mut procs: Vec<Proc> = conf
                                .procs
                                .iter()
                                .enumerate()
                                .filter(|(k, _)| *k != i && *k != j)
                                .map(|(_, p)| p.clone())
                                .collect();
                            this.spread(with(kids[0], pr.env.clone()), copies, &mut procs);
                            let env = this.bind(&q.env, var, m);
                            this.spread(
                                Proc { path: q.path.clone(), env, p: this.tree.kids[q.p][0] },
                                copies,
                                &mut procs,
                            );
                            procs.sort();
                            out.push(Conf { procs, raw: conf.raw.clone(), begins: conf.begins.clone() });
                        }
                    }
                }
                Process::In { chan, var, .. } => {
                    let Some(c) = this.eval(chan, &pr.env) else {
                        out.push(rebuild(vec![], conf.raw.clone(), conf.begins.clone()));
                        continue;
                    };
                    if !knows(c) {
                        continue;
                    }
                    for &m in &know.inputs {
                        let next = with(kids[0], this.bind(&pr.env, var, m));
                        out.push(rebuild(vec![next], conf.raw.clone(), conf.begins.clone()));
                    }
                }
                Process::Nil | Process::Par(..) | Process::Repl(_) => unreachable!("spread removes these"),
            }
        }
        out
    }
}

/// Oracle findings for a model's secrecy, correspondence and freshness
/// queries.
pub fn judge(model: &PiModel, session_bound: usize, depth: usize) -> Findings {
    let mut o = Oracle::new(model, session_bound, depth);
    let secret = model.queries.iter().find_map(|q| match q {
        QuerySpec::Secrecy { target } => Some(target.clone()),
        _ => None,
    });
    let corr = model.queries.iter().find_map(|q| match q {
        QuerySpec::Correspondence { end, begin, .. } => Some((end.clone(), begin.clone())),
        _ => None,
    });
    let mut f =
        o.trace_properties(secret.as_ref(), corr.as_ref().map(|c| c.0.as_str()), corr.as_ref().map(|c| c.1.as_str()));
    if let Some(accept) = model.queries.iter().find_map(|q| match q {
        QuerySpec::Freshness { accept, .. } => Some(accept.clone()),
        _ => None,
    }) {
        f.freshness_violated = o.freshness(&accept);
    }
    f
}
