use std::collections::{BTreeMap, BTreeSet};

use super::ast::{Decl, PiModel, Process, QuerySpec, Term};
use super::diag::{DiagCode, Diagnostic};

pub const BUILTIN_TYPES: &[&str] = &["bitstring", "channel", "bool"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sym {
    /// Free name with its channel-ness.
    Free {
        channel: bool,
    },
    Ctor(usize),
    Dtor(usize),
}

#[derive(Default)]
struct Scope {
    types: BTreeSet<String>,
    events: BTreeMap<String, usize>,
    syms: BTreeMap<String, Sym>,
}

struct Checker {
    scope: Scope,
    out: Vec<Diagnostic>,
}

/// Runs every static check and returns the findings in model order.
pub fn validate(model: &PiModel) -> Vec<Diagnostic> {
    let mut c = Checker { scope: Scope::default(), out: Vec::new() };
    c.scope.types.extend(BUILTIN_TYPES.iter().map(|s| s.to_string()));
    for d in &model.declarations {
        c.decl(d);
    }
    for q in &model.queries {
        c.query(q, model);
    }
    let mut env = Vec::new();
    c.process(&model.main_process, &mut env);
    c.out
}

/// Bound process variable with its declared type, if any.
type Env = Vec<(String, Option<String>)>;

impl Checker {
    fn push(&mut self, d: Diagnostic) {
        self.out.push(d);
    }

    fn need_type(&mut self, ty: &str) {
        if !self.scope.types.contains(ty) {
            self.push(Diagnostic::new(DiagCode::UndeclaredType, format!("type `{ty}` is not declared")).about(ty));
        }
    }

    fn decl(&mut self, d: &Decl) {
        let name = d.name().to_string();
        let taken = match d {
            Decl::Type { .. } => self.scope.types.contains(&name),
            Decl::Event { .. } => self.scope.events.contains_key(&name),
            _ => self.scope.syms.contains_key(&name),
        };
        if taken {
            self.push(
                Diagnostic::new(DiagCode::DuplicateDecl, format!("`{name}` is declared more than once")).about(&name),
            );
            return;
        }
        match d {
            Decl::Type { .. } => {
                self.scope.types.insert(name);
            }
            Decl::Free { ty, .. } => {
                self.need_type(ty);
                self.scope.syms.insert(name, Sym::Free { channel: ty == "channel" });
            }
            Decl::Fun { args, ret, .. } => {
                for t in args.iter().chain(std::iter::once(ret)) {
                    self.need_type(t);
                }
                self.scope.syms.insert(name, Sym::Ctor(args.len()));
            }
            Decl::Event { args, .. } => {
                for t in args {
                    self.need_type(t);
                }
                self.scope.events.insert(name, args.len());
            }
            Decl::Reduc { vars, args, rhs, .. } => {
                self.reduc(&name, vars, args, rhs);
                self.scope.syms.insert(name, Sym::Dtor(args.len()));
            }
        }
    }

    fn reduc(&mut self, name: &str, vars: &[(String, String)], args: &[Term], rhs: &Term) {
        let mut seen = BTreeSet::new();
        for (v, t) in vars {
            self.need_type(t);
            if self.scope.syms.contains_key(v) || !seen.insert(v.as_str()) {
                self.push(
                    Diagnostic::new(
                        DiagCode::BadReduc,
                        format!("rewrite variable `{v}` of `{name}` clashes with another name"),
                    )
                    .about(v),
                );
                return;
            }
        }
        let mut lhs_vars = BTreeSet::new();
        for a in args {
            self.reduc_term(a, vars, &mut lhs_vars);
        }
        let mut rhs_vars = BTreeSet::new();
        self.reduc_term(rhs, vars, &mut rhs_vars);
        if let Some(v) = rhs_vars.difference(&lhs_vars).next() {
            self.push(
                Diagnostic::new(
                    DiagCode::BadReduc,
                    format!("`{v}` appears on the right of `{name}` but not on the left"),
                )
                .about(v.clone()),
            );
        }
    }

    fn reduc_term(&mut self, t: &Term, vars: &[(String, String)], used: &mut BTreeSet<String>) {
        match t {
            Term::Ident(x) if vars.iter().any(|v| v.0 == *x) => {
                used.insert(x.clone());
            }
            Term::Ident(_) => self.term(t, &Vec::new(), false),
            Term::App(f, args) => {
                self.app_head(f, args.len(), false);
                for a in args {
                    self.reduc_term(a, vars, used);
                }
            }
        }
    }

    /// Checks a function head; `dtor_ok` marks the one position where a
    /// destructor may appear (the top of a `let` term).
    fn app_head(&mut self, f: &str, arity: usize, dtor_ok: bool) {
        match self.scope.syms.get(f).copied() {
            Some(Sym::Ctor(n)) | Some(Sym::Dtor(n)) if n != arity => {
                self.push(
                    Diagnostic::new(DiagCode::Arity, format!("`{f}` takes {n} argument(s), got {arity}"))
                        .about(f)
                        .arity(n, arity),
                );
            }
            Some(Sym::Dtor(_)) if !dtor_ok => {
                self.push(
                    Diagnostic::new(
                        DiagCode::DestructorMisuse,
                        format!("destructor `{f}` may only head the term of a `let`"),
                    )
                    .about(f),
                );
            }
            Some(Sym::Ctor(_)) | Some(Sym::Dtor(_)) => {}
            Some(Sym::Free { .. }) | None => {
                self.push(Diagnostic::new(DiagCode::Undeclared, format!("function `{f}` is not declared")).about(f));
            }
        }
    }

    fn term(&mut self, t: &Term, env: &Env, dtor_ok: bool) {
        match t {
            Term::Ident(x) => {
                if env.iter().any(|(v, _)| v == x) {
                    return;
                }
                match self.scope.syms.get(x) {
                    Some(Sym::Free { .. }) | Some(Sym::Ctor(0)) => {}
                    Some(Sym::Ctor(n)) | Some(Sym::Dtor(n)) => {
                        let n = *n;
                        self.push(
                            Diagnostic::new(DiagCode::Arity, format!("`{x}` takes {n} argument(s), got 0"))
                                .about(x)
                                .arity(n, 0),
                        );
                    }
                    None => {
                        self.push(Diagnostic::new(DiagCode::Undeclared, format!("`{x}` is not declared")).about(x));
                    }
                }
            }
            Term::App(f, args) => {
                self.app_head(f, args.len(), dtor_ok);
                for a in args {
                    self.term(a, env, false);
                }
            }
        }
    }

    fn channel(&mut self, t: &Term, env: &Env) {
        let ok = match t {
            Term::Ident(x) => match env.iter().rev().find(|(v, _)| v == x) {
                Some((_, ty)) => ty.as_deref().is_none_or(|ty| ty == "channel"),
                None => match self.scope.syms.get(x) {
                    Some(Sym::Free { channel }) => *channel,
                    None => {
                        self.push(Diagnostic::new(DiagCode::Undeclared, format!("`{x}` is not declared")).about(x));
                        return;
                    }
                    _ => false,
                },
            },
            Term::App(..) => false,
        };
        if !ok {
            let s = super::render::render_term(t);
            self.push(Diagnostic::new(DiagCode::NotChannel, format!("`{s}` is used as a channel")).about(t.head()));
        }
    }

    fn event_use(&mut self, name: &str, arity: usize) {
        match self.scope.events.get(name).copied() {
            None => self.push(
                Diagnostic::new(DiagCode::UndeclaredEvent, format!("event `{name}` is not declared")).about(name),
            ),
            Some(n) if n != arity => self.push(
                Diagnostic::new(DiagCode::Arity, format!("event `{name}` takes {n} argument(s), got {arity}"))
                    .about(name)
                    .arity(n, arity),
            ),
            Some(_) => {}
        }
    }

    fn query(&mut self, q: &QuerySpec, model: &PiModel) {
        match q {
            QuerySpec::Secrecy { target } => self.term(target, &Vec::new(), false),
            QuerySpec::Correspondence { vars, end, begin } => {
                for (_, t) in vars {
                    self.need_type(t);
                }
                for e in [end, begin] {
                    match self.scope.events.get(e).copied() {
                        None => self.push(
                            Diagnostic::new(
                                DiagCode::QueryUndeclaredEvent,
                                format!("query refers to undeclared event `{e}`"),
                            )
                            .about(e),
                        ),
                        Some(n) if n != vars.len() => self.push(
                            Diagnostic::new(
                                DiagCode::Arity,
                                format!("event `{e}` takes {n} argument(s), query gives {}", vars.len()),
                            )
                            .about(e)
                            .arity(n, vars.len()),
                        ),
                        Some(_) => {}
                    }
                }
            }
            QuerySpec::Freshness { accept, nonce } => {
                if !self.scope.events.contains_key(accept) {
                    self.push(
                        Diagnostic::new(
                            DiagCode::QueryUndeclaredEvent,
                            format!("query refers to undeclared event `{accept}`"),
                        )
                        .about(accept),
                    );
                }
                if let Some(n) = nonce {
                    let known = model.main_process.new_names().contains(&n.as_str())
                        || matches!(self.scope.syms.get(n), Some(Sym::Free { .. }));
                    if !known {
                        self.push(
                            Diagnostic::new(DiagCode::Undeclared, format!("nonce `{n}` is not declared")).about(n),
                        );
                    }
                }
            }
        }
    }

    fn bind(&mut self, env: &mut Env, var: &str, ty: Option<&str>, body: &Process) {
        env.push((var.to_string(), ty.map(str::to_string)));
        self.process(body, env);
        env.pop();
    }

    fn process(&mut self, p: &Process, env: &mut Env) {
        match p {
            Process::Nil => {}
            Process::New { name, ty, cont } => {
                self.need_type(ty);
                self.bind(env, name, Some(ty), cont);
            }
            Process::Out { chan, msg, cont } => {
                self.channel(chan, env);
                self.term(msg, env, false);
                self.process(cont, env);
            }
            Process::In { chan, var, ty, cont } => {
                self.channel(chan, env);
                self.need_type(ty);
                self.bind(env, var, Some(ty), cont);
            }
            Process::Event { name, args, cont } => {
                self.event_use(name, args.len());
                for a in args {
                    self.term(a, env, false);
                }
                self.process(cont, env);
            }
            Process::Let { var, term, cont, els } => {
                self.term(term, env, true);
                let is_dtor = matches!(term, Term::App(f, _) if matches!(self.scope.syms.get(f), Some(Sym::Dtor(_))));
                if is_dtor && els.is_none() {
                    self.push(
                        Diagnostic::new(
                            DiagCode::MissingElse,
                            format!(
                                "`let {var} = {}` can fail but has no else branch",
                                super::render::render_term(term)
                            ),
                        )
                        .about(term.head()),
                    );
                }
                self.bind(env, var, None, cont);
                if let Some(e) = els {
                    self.process(e, env);
                }
            }
            Process::If { lhs, rhs, then, els } => {
                self.term(lhs, env, false);
                self.term(rhs, env, false);
                self.process(then, env);
                if let Some(e) = els {
                    self.process(e, env);
                }
            }
            Process::Par(a, b) => {
                self.process(a, env);
                self.process(b, env);
            }
            Process::Repl(q) => self.process(q, env),
        }
    }
}
