use serde::{Deserialize, Serialize};

/// Term as written in a model. Whether an identifier is a free name, a
/// bound variable or a zero-arity function is decided by scope.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Term {
    Ident(String),
    App(String, Vec<Term>),
}

impl Term {
    pub fn ident(name: impl Into<String>) -> Self {
        Term::Ident(name.into())
    }

    pub fn app(f: impl Into<String>, args: Vec<Term>) -> Self {
        Term::App(f.into(), args)
    }

    pub fn head(&self) -> &str {
        match self {
            Term::Ident(n) | Term::App(n, _) => n,
        }
    }

    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Term)) {
        f(self);
        if let Term::App(_, args) = self {
            for a in args {
                a.visit(f);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decl {
    Type {
        name: String,
    },
    Free {
        name: String,
        ty: String,
        private: bool,
    },
    Fun {
        name: String,
        args: Vec<String>,
        ret: String,
        private: bool,
    },
    /// `reduc forall x: T, ...; name(args) = rhs.`
    Reduc {
        vars: Vec<(String, String)>,
        name: String,
        args: Vec<Term>,
        rhs: Term,
    },
    Event {
        name: String,
        args: Vec<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeclKind {
    Type,
    FreeName,
    PrivateFreeName,
    Constructor,
    Destructor,
    Event,
    Channel,
}

impl Decl {
    pub fn name(&self) -> &str {
        match self {
            Decl::Type { name }
            | Decl::Free { name, .. }
            | Decl::Fun { name, .. }
            | Decl::Reduc { name, .. }
            | Decl::Event { name, .. } => name,
        }
    }

    pub fn kind(&self) -> DeclKind {
        match self {
            Decl::Type { .. } => DeclKind::Type,
            Decl::Free { ty, .. } if ty == "channel" => DeclKind::Channel,
            Decl::Free { private: true, .. } => DeclKind::PrivateFreeName,
            Decl::Free { .. } => DeclKind::FreeName,
            Decl::Fun { .. } => DeclKind::Constructor,
            Decl::Reduc { .. } => DeclKind::Destructor,
            Decl::Event { .. } => DeclKind::Event,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Process {
    Nil,
    New { name: String, ty: String, cont: Box<Process> },
    Out { chan: Term, msg: Term, cont: Box<Process> },
    In { chan: Term, var: String, ty: String, cont: Box<Process> },
    Let { var: String, term: Term, cont: Box<Process>, els: Option<Box<Process>> },
    If { lhs: Term, rhs: Term, then: Box<Process>, els: Option<Box<Process>> },
    Event { name: String, args: Vec<Term>, cont: Box<Process> },
    Par(Box<Process>, Box<Process>),
    Repl(Box<Process>),
}

impl Process {
    pub fn par(a: Process, b: Process) -> Self {
        Process::Par(Box::new(a), Box::new(b))
    }

    pub fn repl(p: Process) -> Self {
        Process::Repl(Box::new(p))
    }

    /// Number of prefix constructs (everything except Nil/Par/Repl).
    pub fn steps(&self) -> usize {
        match self {
            Process::Nil => 0,
            Process::New { cont, .. }
            | Process::Out { cont, .. }
            | Process::In { cont, .. }
            | Process::Event { cont, .. } => 1 + cont.steps(),
            Process::Let { cont, els, .. } => 1 + cont.steps() + els.as_ref().map_or(0, |e| e.steps()),
            Process::If { then, els, .. } => 1 + then.steps() + els.as_ref().map_or(0, |e| e.steps()),
            Process::Par(a, b) => a.steps() + b.steps(),
            Process::Repl(p) => p.steps(),
        }
    }

    /// Visits every process node in pre-order.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Process)) {
        f(self);
        match self {
            Process::Nil => {}
            Process::New { cont, .. }
            | Process::Out { cont, .. }
            | Process::In { cont, .. }
            | Process::Event { cont, .. } => cont.walk(f),
            Process::Let { cont, els, .. } => {
                cont.walk(f);
                if let Some(e) = els {
                    e.walk(f);
                }
            }
            Process::If { then, els, .. } => {
                then.walk(f);
                if let Some(e) = els {
                    e.walk(f);
                }
            }
            Process::Par(a, b) => {
                a.walk(f);
                b.walk(f);
            }
            Process::Repl(p) => p.walk(f),
        }
    }

    pub fn walk_mut(&mut self, f: &mut impl FnMut(&mut Process)) {
        f(self);
        match self {
            Process::Nil => {}
            Process::New { cont, .. }
            | Process::Out { cont, .. }
            | Process::In { cont, .. }
            | Process::Event { cont, .. } => cont.walk_mut(f),
            Process::Let { cont, els, .. } => {
                cont.walk_mut(f);
                if let Some(e) = els {
                    e.walk_mut(f);
                }
            }
            Process::If { then, els, .. } => {
                then.walk_mut(f);
                if let Some(e) = els {
                    e.walk_mut(f);
                }
            }
            Process::Par(a, b) => {
                a.walk_mut(f);
                b.walk_mut(f);
            }
            Process::Repl(p) => p.walk_mut(f),
        }
    }

    /// Names of every event emitted anywhere in the process.
    pub fn emitted_events(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk(&mut |p| {
            if let Process::Event { name, .. } = p {
                if !out.contains(&name.as_str()) {
                    out.push(name.as_str());
                }
            }
        });
        out
    }

    /// Names bound by `new` anywhere in the process.
    pub fn new_names(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk(&mut |p| {
            if let Process::New { name, .. } = p {
                out.push(name.as_str());
            }
        });
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    Secrecy,
    Freshness,
    Correspondence,
}

impl std::fmt::Display for QueryKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            QueryKind::Secrecy => "secrecy",
            QueryKind::Freshness => "freshness",
            QueryKind::Correspondence => "authentication",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuerySpec {
    /// `query attacker(target).`
    Secrecy { target: Term },
    /// `query x: T; event(end(x)) ==> event(begin(x)).`
    Correspondence { vars: Vec<(String, String)>, end: String, begin: String },
    /// Replay check on the acceptance event, optionally naming the nonce
    /// that is supposed to prevent it. Rendered as a `(*! ... *)` pragma.
    Freshness { accept: String, nonce: Option<String> },
}

impl QuerySpec {
    pub fn kind(&self) -> QueryKind {
        match self {
            QuerySpec::Secrecy { .. } => QueryKind::Secrecy,
            QuerySpec::Freshness { .. } => QueryKind::Freshness,
            QuerySpec::Correspondence { .. } => QueryKind::Correspondence,
        }
    }

    /// Short human label used in reports and CLI output.
    pub fn label(&self) -> String {
        match self {
            QuerySpec::Secrecy { target } => format!("attacker({})", super::render::render_term(target)),
            QuerySpec::Correspondence { vars, end, begin } => {
                let args = vars.iter().map(|v| v.0.as_str()).collect::<Vec<_>>().join(", ");
                format!("event({end}({args})) ==> event({begin}({args}))")
            }
            QuerySpec::Freshness { accept, nonce } => match nonce {
                Some(n) => format!("freshness({accept}, {n})"),
                None => format!("freshness({accept})"),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PiModel {
    pub declarations: Vec<Decl>,
    pub main_process: Process,
    pub queries: Vec<QuerySpec>,
}

impl PiModel {
    pub fn decl(&self, name: &str) -> Option<&Decl> {
        self.declarations.iter().find(|d| d.name() == name)
    }

    pub fn event_decl(&self, name: &str) -> Option<&[String]> {
        self.declarations.iter().find_map(|d| match d {
            Decl::Event { name: n, args } if n == name => Some(args.as_slice()),
            _ => None,
        })
    }

    pub fn free_decl(&self, name: &str) -> Option<(&str, bool)> {
        self.declarations.iter().find_map(|d| match d {
            Decl::Free { name: n, ty, private } if n == name => Some((ty.as_str(), *private)),
            _ => None,
        })
    }
}
