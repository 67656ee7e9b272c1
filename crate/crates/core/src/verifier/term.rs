use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::pvlang::{self, Decl, PiModel};

/// Runtime term. Fresh names carry a label that is unique per `new` site and
/// replication copy, so two runs that create the same name agree on it.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Name(Arc<str>),
    Fresh(Arc<str>),
    /// The attacker's own name.
    Attacker,
    /// Pattern or symbolic variable; never part of a runtime value.
    Var(Arc<str>),
    App(Arc<str>, Arc<[Term]>),
}

pub const ATTACKER_LABEL: &str = "@a";

impl Term {
    pub fn name(s: &str) -> Self {
        Term::Name(s.into())
    }

    pub fn app(f: &str, args: Vec<Term>) -> Self {
        Term::App(f.into(), args.into())
    }

    /// Height with atoms at 1.
    pub fn depth(&self) -> usize {
        match self {
            Term::App(_, args) => 1 + args.iter().map(Term::depth).max().unwrap_or(0),
            _ => 1,
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::App(_, args) => args.iter().all(Term::is_ground),
            _ => true,
        }
    }

    pub fn subterms(&self, out: &mut BTreeSet<Term>) {
        out.insert(self.clone());
        if let Term::App(_, args) = self {
            for a in args.iter() {
                a.subterms(out);
            }
        }
    }

    pub fn vars(&self, out: &mut BTreeSet<Arc<str>>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::App(_, args) => args.iter().for_each(|a| a.vars(out)),
            _ => {}
        }
    }

    pub fn occurs(&self, v: &str) -> bool {
        match self {
            Term::Var(w) => &**w == v,
            Term::App(_, args) => args.iter().any(|a| a.occurs(v)),
            _ => false,
        }
    }

    pub fn subst(&self, s: &Subst) -> Term {
        match self {
            Term::Var(v) => match s.get(v) {
                Some(t) => t.subst(s),
                None => self.clone(),
            },
            Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| a.subst(s)).collect()),
            _ => self.clone(),
        }
    }

    /// Replaces every remaining variable with `with`.
    pub fn ground_with(&self, with: &Term) -> Term {
        match self {
            Term::Var(_) => with.clone(),
            Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| a.ground_with(with)).collect()),
            _ => self.clone(),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Name(n) | Term::Fresh(n) => f.write_str(n),
            Term::Attacker => f.write_str(ATTACKER_LABEL),
            Term::Var(v) => write!(f, "?{v}"),
            Term::App(g, args) => {
                write!(f, "{g}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

pub type Subst = BTreeMap<Arc<str>, Term>;

/// One-way matching of `pat` against `t`, extending `s`.
pub fn match_term(pat: &Term, t: &Term, s: &mut Subst) -> bool {
    match pat {
        Term::Var(v) => match s.get(v) {
            Some(bound) => bound == t,
            None => {
                s.insert(v.clone(), t.clone());
                true
            }
        },
        Term::App(f, ps) => match t {
            Term::App(g, ts) if f == g && ps.len() == ts.len() => {
                ps.iter().zip(ts.iter()).all(|(p, x)| match_term(p, x, s))
            }
            _ => false,
        },
        _ => pat == t,
    }
}

/// Syntactic unification with occurs check; `s` is kept in triangular form.
pub fn unify(a: &Term, b: &Term, s: &mut Subst) -> bool {
    let a = walk(a, s);
    let b = walk(b, s);
    match (&a, &b) {
        (Term::Var(x), Term::Var(y)) if x == y => true,
        (Term::Var(x), t) | (t, Term::Var(x)) => {
            if t.subst(s).occurs(x) {
                return false;
            }
            s.insert(x.clone(), t.clone());
            true
        }
        (Term::App(f, xs), Term::App(g, ys)) => {
            f == g && xs.len() == ys.len() && xs.iter().zip(ys.iter()).all(|(x, y)| unify(x, y, s))
        }
        _ => a == b,
    }
}

fn walk(t: &Term, s: &Subst) -> Term {
    let mut cur = t.clone();
    while let Term::Var(v) = &cur {
        match s.get(v) {
            Some(next) => cur = next.clone(),
            None => break,
        }
    }
    cur
}

/// `g(lhs...) = rhs` with pattern variables as [`Term::Var`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub name: Arc<str>,
    pub lhs: Vec<Term>,
    pub rhs: Term,
}

impl Rule {
    pub fn apply(&self, args: &[Term]) -> Option<Term> {
        if args.len() != self.lhs.len() {
            return None;
        }
        let mut s = Subst::new();
        for (p, a) in self.lhs.iter().zip(args) {
            if !match_term(p, a, &mut s) {
                return None;
            }
        }
        let out = self.rhs.subst(&s);
        out.is_ground().then_some(out)
    }

    /// Copy with variables renamed by `suffix`, for unification against
    /// terms that may share variable names.
    pub fn renamed(&self, suffix: &str) -> Rule {
        let mut vs = BTreeSet::new();
        for t in self.lhs.iter().chain(std::iter::once(&self.rhs)) {
            t.vars(&mut vs);
        }
        let s: Subst = vs.into_iter().map(|v| (v.clone(), Term::Var(format!("{v}{suffix}").into()))).collect();
        Rule { name: self.name.clone(), lhs: self.lhs.iter().map(|t| t.subst(&s)).collect(), rhs: self.rhs.subst(&s) }
    }

    /// Whether the right-hand side is a subterm of some argument pattern.
    /// Only such rules can be handled by analysis without synthesis.
    pub fn is_subterm_rule(&self) -> bool {
        let mut subs = BTreeSet::new();
        for p in &self.lhs {
            p.subterms(&mut subs);
        }
        subs.contains(&self.rhs)
    }
}

/// Function symbols and free names of a model, in runtime form.
#[derive(Debug, Clone, Default)]
pub struct Signature {
    /// Constructor arity and privacy.
    pub ctors: BTreeMap<Arc<str>, (usize, bool)>,
    pub rules: BTreeMap<Arc<str>, Rule>,
    pub public_names: BTreeSet<Arc<str>>,
    pub private_names: BTreeSet<Arc<str>>,
}

impl Signature {
    pub fn from_model(model: &PiModel) -> Self {
        let mut sig = Signature::default();
        for d in &model.declarations {
            match d {
                Decl::Free { name, private, .. } => {
                    if *private {
                        sig.private_names.insert(name.as_str().into());
                    } else {
                        sig.public_names.insert(name.as_str().into());
                    }
                }
                Decl::Fun { name, args, private, .. } => {
                    sig.ctors.insert(name.as_str().into(), (args.len(), *private));
                }
                Decl::Reduc { vars, name, args, rhs } => {
                    let bound: BTreeSet<&str> = vars.iter().map(|v| v.0.as_str()).collect();
                    let conv = |t: &pvlang::Term| sig.pattern(t, &bound);
                    let rule =
                        Rule { name: name.as_str().into(), lhs: args.iter().map(conv).collect(), rhs: conv(rhs) };
                    sig.rules.insert(name.as_str().into(), rule);
                }
                Decl::Type { .. } | Decl::Event { .. } => {}
            }
        }
        sig
    }

    fn pattern(&self, t: &pvlang::Term, vars: &BTreeSet<&str>) -> Term {
        match t {
            pvlang::Term::Ident(x) if vars.contains(x.as_str()) => Term::Var(x.as_str().into()),
            pvlang::Term::Ident(x) if self.ctors.contains_key(x.as_str()) => {
                Term::App(x.as_str().into(), Arc::from([]))
            }
            pvlang::Term::Ident(x) => Term::Name(x.as_str().into()),
            pvlang::Term::App(f, args) => {
                Term::App(f.as_str().into(), args.iter().map(|a| self.pattern(a, vars)).collect())
            }
        }
    }

    pub fn is_public_ctor(&self, f: &str) -> bool {
        matches!(self.ctors.get(f), Some((_, false)))
    }

    pub fn is_dtor(&self, f: &str) -> bool {
        self.rules.contains_key(f)
    }

    /// Public free names plus the attacker's own name.
    pub fn initial_knowledge(&self) -> BTreeSet<Term> {
        let mut k: BTreeSet<Term> = self.public_names.iter().map(|n| Term::Name(n.clone())).collect();
        k.insert(Term::Attacker);
        k
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &str) -> Term {
        Term::Var(x.into())
    }

    #[test]
    fn depth_and_display() {
        let t = Term::app("senc", vec![Term::app("h", vec![Term::name("mac")]), Term::Attacker]);
        assert_eq!(t.depth(), 3);
        assert_eq!(t.to_string(), "senc(h(mac), @a)");
    }

    #[test]
    fn rule_application() {
        let r = Rule { name: "sdec".into(), lhs: vec![Term::app("senc", vec![v("x"), v("y")]), v("y")], rhs: v("x") };
        let c = Term::app("senc", vec![Term::name("m"), Term::name("k")]);
        assert_eq!(r.apply(&[c.clone(), Term::name("k")]), Some(Term::name("m")));
        assert_eq!(r.apply(&[c, Term::name("j")]), None);
        assert!(r.is_subterm_rule());
    }

    #[test]
    fn unification() {
        let mut s = Subst::new();
        assert!(unify(
            &Term::app("f", vec![v("a"), Term::name("k")]),
            &Term::app("f", vec![Term::name("m"), v("b")]),
            &mut s
        ));
        assert_eq!(v("a").subst(&s), Term::name("m"));
        assert_eq!(v("b").subst(&s), Term::name("k"));
        let mut s = Subst::new();
        assert!(!unify(&v("a"), &Term::app("h", vec![v("a")]), &mut s));
    }
}
