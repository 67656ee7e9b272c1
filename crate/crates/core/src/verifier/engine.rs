//! Bounded trace exploration.
//!
//! Replicated processes are unrolled to `session_bound` copies. Steps that
//! cannot help or hurt the attacker by being delayed (name creation, lets,
//! conditionals, outputs on public channels, and every event except a
//! `begin` of the watched correspondence) run eagerly; the search branches
//! only on message inputs, `begin` events and private-channel handshakes.
//! States are deduplicated and explored breadth first, so returned traces
//! are shortest in scheduling decisions.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::sync::Arc;

use super::knowledge::{derivation_steps, Derivation, Knowledge};
use super::lookahead;
use super::program::{Env, Node, NodeId, Program};
use super::term::Term;
use super::verdict::{Choice, TraceAction, TraceStep, VerdictStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bounds {
    pub session_bound: usize,
    pub term_depth: usize,
    pub state_cap: usize,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds { session_bound: 2, term_depth: super::knowledge::DEFAULT_TERM_DEPTH, state_cap: 1_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Goal {
    Secrecy(Term),
    Correspondence {
        end: Arc<str>,
        begin: Arc<str>,
    },
    /// Whole process run `sessions` times; outputs of the last session are
    /// withheld from the attacker and `accept` there is a violation.
    Freshness {
        accept: Arc<str>,
        sessions: u8,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Thread {
    path: Vec<u8>,
    node: NodeId,
    env: Env,
}

impl Thread {
    fn session(&self) -> usize {
        self.path.first().copied().unwrap_or(0) as usize
    }

    fn key(&self) -> (Vec<u8>, NodeId) {
        (self.path.clone(), self.node)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct State {
    threads: Vec<Thread>,
    know: Knowledge,
    begins: BTreeSet<Vec<Term>>,
}

#[derive(Debug, Default)]
struct Settle {
    violation: Option<String>,
    ended: bool,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub status: VerdictStatus,
    pub vacuous: bool,
    pub schedule: Vec<Choice>,
    pub states: usize,
    pub warnings: Vec<String>,
}

pub struct Machine<'a> {
    prog: &'a Program,
    goal: &'a Goal,
    bounds: Bounds,
}

type Log<'l> = Option<&'l mut Vec<TraceStep>>;

fn note(log: &mut Log<'_>, session_id: usize, action: TraceAction, term: String, justification: String) {
    if let Some(l) = log {
        l.push(TraceStep { session_id, action, term, justification });
    }
}

impl<'a> Machine<'a> {
    pub fn new(prog: &'a Program, goal: &'a Goal, bounds: Bounds) -> Self {
        Machine { prog, goal, bounds }
    }

    fn copies(&self) -> u8 {
        match self.goal {
            Goal::Freshness { .. } => 1,
            _ => self.bounds.session_bound.clamp(1, u8::MAX as usize) as u8,
        }
    }

    fn withheld(&self, session: usize) -> bool {
        matches!(self.goal, Goal::Freshness { sessions, .. } if session == *sessions as usize)
    }

    fn initial(&self) -> State {
        let threads = match self.goal {
            Goal::Freshness { sessions, .. } => {
                (1..=*sessions).map(|s| Thread { path: vec![s], node: self.prog.root, env: Vec::new() }).collect()
            }
            _ => vec![Thread { path: Vec::new(), node: self.prog.root, env: Vec::new() }],
        };
        let mut know = Knowledge::empty();
        know.extend(self.prog.sig.initial_knowledge(), &self.prog.sig, self.bounds.term_depth);
        State { threads, know, begins: BTreeSet::new() }
    }

    fn knows(&self, st: &State, t: &Term) -> bool {
        st.know.contains(t, &self.prog.sig, self.bounds.term_depth)
    }

    /// Runs every eager step to a fixpoint.
    fn settle(&self, st: &mut State, log: &mut Log<'_>) -> Settle {
        let mut res = Settle::default();
        let mut work: Vec<Thread> = std::mem::take(&mut st.threads);
        work.reverse();
        let mut parked: Vec<Thread> = Vec::new();
        loop {
            while let Some(t) = work.pop() {
                self.run(t, st, &mut work, &mut parked, log, &mut res);
                if res.violation.is_some() {
                    st.threads = parked;
                    st.threads.extend(work);
                    st.threads.sort();
                    return res;
                }
            }
            // outputs on channels the attacker has since learned become eager
            let (ready, blocked): (Vec<Thread>, Vec<Thread>) =
                parked.into_iter().partition(|t| match self.prog.node(t.node) {
                    Node::Out { chan, .. } => self.prog.eval(chan, &t.env).is_some_and(|c| self.knows(st, &c)),
                    _ => false,
                });
            parked = blocked;
            if ready.is_empty() {
                break;
            }
            work = ready;
            work.reverse();
        }
        parked.sort();
        st.threads = parked;
        if let Goal::Secrecy(target) = self.goal {
            if self.knows(st, target) {
                let steps = derivation_steps(&st.know, target, &self.prog.sig, self.bounds.term_depth);
                let why = if steps.is_empty() { "held by the attacker".to_string() } else { steps.join("; ") };
                note(log, 0, TraceAction::Deduce, target.to_string(), why);
                res.violation = Some(format!("attacker derives {target}"));
            }
        }
        res
    }

    fn run(
        &self,
        mut t: Thread,
        st: &mut State,
        work: &mut Vec<Thread>,
        parked: &mut Vec<Thread>,
        log: &mut Log<'_>,
        res: &mut Settle,
    ) {
        loop {
            let sid = t.session();
            match self.prog.node(t.node) {
                Node::Nil => return,
                Node::New { name, next } => {
                    let v = self.prog.fresh(name, t.node, &t.path);
                    t.env.push((name.clone(), v));
                    t.node = *next;
                }
                Node::Let { var, term, then, els } => match self.prog.eval(term, &t.env) {
                    Some(v) => {
                        t.env.push((var.clone(), v));
                        t.node = *then;
                    }
                    None => t.node = *els,
                },
                Node::If { lhs, rhs, then, els } => {
                    let eq = matches!((self.prog.eval(lhs, &t.env), self.prog.eval(rhs, &t.env)), (Some(a), Some(b)) if a == b);
                    t.node = if eq { *then } else { *els };
                }
                Node::Par(a, b) => {
                    work.push(Thread { path: t.path.clone(), node: *b, env: t.env.clone() });
                    t.node = *a;
                }
                Node::Repl(q) => {
                    for i in (1..=self.copies()).rev() {
                        let mut path = t.path.clone();
                        path.push(i);
                        work.push(Thread { path, node: *q, env: t.env.clone() });
                    }
                    return;
                }
                Node::Event { name, args, next } => {
                    let Some(vals) = args.iter().map(|a| self.prog.eval(a, &t.env)).collect::<Option<Vec<_>>>() else {
                        return;
                    };
                    let shown = show_event(name, &vals);
                    match self.goal {
                        Goal::Correspondence { begin, .. } if name == begin => {
                            parked.push(t);
                            return;
                        }
                        Goal::Correspondence { end, begin } if name == end => {
                            res.ended = true;
                            if !st.begins.contains(&vals) {
                                note(
                                    log,
                                    sid,
                                    TraceAction::Event,
                                    shown.clone(),
                                    format!("no earlier {}", show_event(begin, &vals)),
                                );
                                res.violation = Some(format!("{shown} without matching {begin}"));
                                return;
                            }
                            note(log, sid, TraceAction::Event, shown, "matched by an earlier begin".into());
                        }
                        Goal::Freshness { accept, sessions } if name == accept && sid == *sessions as usize => {
                            note(
                                log,
                                sid,
                                TraceAction::Event,
                                shown.clone(),
                                "accepted using only messages recorded from earlier sessions".into(),
                            );
                            res.violation = Some(format!("{shown} replayed into session {sid}"));
                            return;
                        }
                        _ => note(log, sid, TraceAction::Event, shown, "executed".into()),
                    }
                    t.node = *next;
                }
                Node::Out { chan, msg, next } => {
                    let (Some(c), Some(m)) = (self.prog.eval(chan, &t.env), self.prog.eval(msg, &t.env)) else {
                        return;
                    };
                    if !self.knows(st, &c) {
                        parked.push(t);
                        return;
                    }
                    if self.withheld(sid) {
                        note(log, sid, TraceAction::Out, m.to_string(), format!("sent on {c}, not recorded"));
                    } else {
                        note(log, sid, TraceAction::Out, m.to_string(), format!("sent on public channel {c}"));
                        st.know.extend([m], &self.prog.sig, self.bounds.term_depth);
                    }
                    t.node = *next;
                }
                Node::In { .. } => {
                    parked.push(t);
                    return;
                }
            }
        }
    }

    fn candidates(&self, st: &State, warnings: &mut BTreeSet<String>) -> Vec<Term> {
        let mut pool: BTreeSet<Term> = st.know.analyzed().clone();
        for t in &st.threads {
            lookahead::candidates(self.prog, t.node, &t.env, &t.path, &mut pool);
        }
        pool.into_iter()
            .filter(|t| {
                if !t.is_ground() {
                    return false;
                }
                match st.know.derive(t, &self.prog.sig, self.bounds.term_depth) {
                    Derivation::Clipped => {
                        warnings.insert(format!("depth cap {} clipped candidate {t}", self.bounds.term_depth));
                        false
                    }
                    d => d.ok() && t.depth() <= self.bounds.term_depth,
                }
            })
            .collect()
    }

    fn choices(&self, st: &State, warnings: &mut BTreeSet<String>) -> Vec<Choice> {
        let mut out = Vec::new();
        let mut pool: Option<Vec<Term>> = None;
        for t in &st.threads {
            match self.prog.node(t.node) {
                Node::In { chan, .. } => {
                    let Some(c) = self.prog.eval(chan, &t.env) else { continue };
                    if self.knows(st, &c) {
                        let pool = pool.get_or_insert_with(|| self.candidates(st, warnings));
                        out.extend(pool.iter().map(|m| Choice::Input {
                            path: t.path.clone(),
                            node: t.node,
                            msg: m.clone(),
                        }));
                    } else {
                        for o in &st.threads {
                            if let Node::Out { chan: oc, .. } = self.prog.node(o.node) {
                                if self.prog.eval(oc, &o.env).as_ref() == Some(&c) {
                                    out.push(Choice::Sync { out: o.key(), inp: t.key() });
                                }
                            }
                        }
                    }
                }
                Node::Event { .. } => out.push(Choice::Begin { path: t.path.clone(), node: t.node }),
                _ => {}
            }
        }
        out
    }

    fn take(st: &mut State, key: &(Vec<u8>, NodeId)) -> Option<Thread> {
        let i = st.threads.iter().position(|t| t.path == key.0 && t.node == key.1)?;
        Some(st.threads.remove(i))
    }

    /// Applies one decision and settles. `None` if the decision does not fit
    /// the state (only possible when replaying a foreign schedule).
    fn apply(&self, st: &mut State, choice: &Choice, log: &mut Log<'_>) -> Option<Settle> {
        match choice {
            Choice::Input { path, node, msg } => {
                let mut t = Self::take(st, &(path.clone(), *node))?;
                let Node::In { chan, var, next } = self.prog.node(t.node) else { return None };
                let c = self.prog.eval(chan, &t.env)?;
                note(log, t.session(), TraceAction::In, msg.to_string(), format!("attacker sends on {c}"));
                t.env.push((var.clone(), msg.clone()));
                t.node = *next;
                st.threads.push(t);
            }
            Choice::Begin { path, node } => {
                let mut t = Self::take(st, &(path.clone(), *node))?;
                let Node::Event { name, args, next } = self.prog.node(t.node) else { return None };
                let vals = args.iter().map(|a| self.prog.eval(a, &t.env)).collect::<Option<Vec<_>>>()?;
                note(log, t.session(), TraceAction::Event, show_event(name, &vals), "executed".into());
                st.begins.insert(vals);
                t.node = *next;
                st.threads.push(t);
            }
            Choice::Sync { out, inp } => {
                let mut o = Self::take(st, out)?;
                let mut i = Self::take(st, inp)?;
                let Node::Out { chan, msg, next: onext } = self.prog.node(o.node) else { return None };
                let Node::In { var, next: inext, .. } = self.prog.node(i.node) else { return None };
                let c = self.prog.eval(chan, &o.env)?;
                let m = self.prog.eval(msg, &o.env)?;
                note(log, o.session(), TraceAction::Out, m.to_string(), format!("private channel {c}"));
                note(log, i.session(), TraceAction::In, m.to_string(), format!("received on private channel {c}"));
                o.node = *onext;
                i.env.push((var.clone(), m));
                i.node = *inext;
                st.threads.push(o);
                st.threads.push(i);
            }
        }
        Some(self.settle(st, log))
    }

    pub fn search(&self) -> SearchOutcome {
        let mut warnings = BTreeSet::new();
        let mut root = self.initial();
        let first = self.settle(&mut root, &mut None);
        let mut ended = first.ended;
        let finish = |status, ended: bool, schedule, states, warnings: BTreeSet<String>| SearchOutcome {
            status,
            vacuous: status == VerdictStatus::Holds && matches!(self.goal, Goal::Correspondence { .. }) && !ended,
            schedule,
            states,
            warnings: warnings.into_iter().collect(),
        };
        if first.violation.is_some() {
            return finish(VerdictStatus::Violated, ended, Vec::new(), 1, warnings);
        }
        let mut seen: HashSet<State> = HashSet::new();
        seen.insert(root.clone());
        let mut parents: Vec<(usize, Option<Choice>)> = vec![(0, None)];
        let mut queue = VecDeque::from([(root, 0usize)]);
        while let Some((st, idx)) = queue.pop_front() {
            for choice in self.choices(&st, &mut warnings) {
                let mut next = st.clone();
                let Some(res) = self.apply(&mut next, &choice, &mut None) else { continue };
                ended |= res.ended;
                if res.violation.is_some() {
                    let mut schedule = vec![choice];
                    let mut at = idx;
                    while at != 0 {
                        let (p, c) = &parents[at];
                        schedule.push(c.clone().expect("non-root has a choice"));
                        at = *p;
                    }
                    schedule.reverse();
                    return finish(VerdictStatus::Violated, ended, schedule, parents.len(), warnings);
                }
                if seen.insert(next.clone()) {
                    parents.push((idx, Some(choice)));
                    if parents.len() > self.bounds.state_cap {
                        warnings.insert(format!("state cap {} reached", self.bounds.state_cap));
                        return finish(VerdictStatus::Unknown, ended, Vec::new(), parents.len(), warnings);
                    }
                    queue.push_back((next, parents.len() - 1));
                }
            }
        }
        finish(VerdictStatus::Holds, ended, Vec::new(), parents.len(), warnings)
    }

    /// Re-executes a schedule, logging every step. Returns the steps and
    /// whether the goal was violated by the end.
    pub fn replay(&self, schedule: &[Choice]) -> (Vec<TraceStep>, bool) {
        let mut steps = Vec::new();
        let mut st = self.initial();
        let mut log: Log<'_> = Some(&mut steps);
        if self.settle(&mut st, &mut log).violation.is_some() {
            return (steps, true);
        }
        for c in schedule {
            let mut log: Log<'_> = Some(&mut steps);
            match self.apply(&mut st, c, &mut log) {
                Some(r) if r.violation.is_some() => return (steps, true),
                Some(_) => {}
                None => return (steps, false),
            }
        }
        (steps, false)
    }
}

fn show_event(name: &str, args: &[Term]) -> String {
    if args.is_empty() {
        name.to_string()
    } else {
        format!("{name}({})", args.iter().map(Term::to_string).collect::<Vec<_>>().join(", "))
    }
}
