use super::ast::{Decl, PiModel, Process, QuerySpec, Term};

const INDENT: &str = "    ";

pub fn render_term(t: &Term) -> String {
    let mut s = String::new();
    term_into(t, &mut s);
    s
}

fn term_into(t: &Term, s: &mut String) {
    match t {
        Term::Ident(x) => s.push_str(x),
        Term::App(f, args) => {
            s.push_str(f);
            s.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    s.push_str(", ");
                }
                term_into(a, s);
            }
            s.push(')');
        }
    }
}

fn terms(ts: &[Term]) -> String {
    ts.iter().map(render_term).collect::<Vec<_>>().join(", ")
}

fn private(p: bool) -> &'static str {
    if p {
        " [private]"
    } else {
        ""
    }
}

pub fn render_decl(d: &Decl) -> String {
    match d {
        Decl::Type { name } => format!("type {name}."),
        Decl::Free { name, ty, private: p } => format!("free {name}: {ty}{}.", private(*p)),
        Decl::Fun { name, args, ret, private: p } => format!("fun {name}({}): {ret}{}.", args.join(", "), private(*p)),
        Decl::Reduc { vars, name, args, rhs } => {
            let vs = vars.iter().map(|(v, t)| format!("{v}: {t}")).collect::<Vec<_>>().join(", ");
            format!("reduc forall {vs}; {name}({}) = {}.", terms(args), render_term(rhs))
        }
        Decl::Event { name, args } if args.is_empty() => format!("event {name}."),
        Decl::Event { name, args } => format!("event {name}({}).", args.join(", ")),
    }
}

pub fn render_query(q: &QuerySpec) -> String {
    match q {
        QuerySpec::Secrecy { target } => format!("query attacker({}).", render_term(target)),
        QuerySpec::Correspondence { vars, end, begin } => {
            let fact = |e: &str| {
                if vars.is_empty() {
                    format!("event({e})")
                } else {
                    format!("event({e}({}))", vars.iter().map(|v| v.0.as_str()).collect::<Vec<_>>().join(", "))
                }
            };
            let decls = vars.iter().map(|(v, t)| format!("{v}: {t}")).collect::<Vec<_>>().join(", ");
            let prefix = if vars.is_empty() { String::new() } else { format!("{decls}; ") };
            format!("query {prefix}{} ==> {}.", fact(end), fact(begin))
        }
        QuerySpec::Freshness { accept, nonce: Some(n) } => format!("(*! query freshness({accept}, {n}). *)"),
        QuerySpec::Freshness { accept, nonce: None } => format!("(*! query freshness({accept}). *)"),
    }
}

/// Canonical text: declarations, queries, then the main process with one
/// construct per line.
pub fn render(model: &PiModel) -> String {
    let mut out = String::new();
    for d in &model.declarations {
        out.push_str(&render_decl(d));
        out.push('\n');
    }
    for q in &model.queries {
        out.push_str(&render_query(q));
        out.push('\n');
    }
    if !out.is_empty() {
        out.push('\n');
    }
    if model.main_process == Process::Nil {
        out.push_str("process 0\n");
        return out;
    }
    out.push_str("process\n");
    let mut w = Writer { out, lines_open: false };
    w.process(&model.main_process, 1);
    w.out.push('\n');
    w.out
}

struct Writer {
    out: String,
    /// Whether the current line still accepts a suffix.
    lines_open: bool,
}

impl Writer {
    fn line(&mut self, depth: usize, text: &str) {
        if self.lines_open {
            self.out.push('\n');
        }
        for _ in 0..depth {
            self.out.push_str(INDENT);
        }
        self.out.push_str(text);
        self.lines_open = true;
    }

    fn group(&mut self, p: &Process, depth: usize, prefix: &str) {
        self.line(depth, &format!("{prefix}("));
        self.process(p, depth + 1);
        self.line(depth, ")");
    }

    /// Writes `p`, parenthesized when `wrap` holds.
    fn maybe_group(&mut self, p: &Process, depth: usize, wrap: bool, prefix: &str) {
        if wrap {
            self.group(p, depth, prefix);
        } else if prefix.is_empty() {
            self.process(p, depth);
        } else if *p == Process::Nil {
            self.line(depth, &format!("{prefix}0"));
        } else {
            self.line(depth, prefix.trim_end());
            self.process(p, depth + 1);
        }
    }

    fn seq(&mut self, head: String, cont: &Process, depth: usize) {
        match cont {
            Process::Nil => self.line(depth, &head),
            Process::Par(..) => {
                self.line(depth, &format!("{head};"));
                self.group(cont, depth, "");
            }
            _ => {
                self.line(depth, &format!("{head};"));
                self.process(cont, depth);
            }
        }
    }

    fn branches(&mut self, head: String, main: &Process, els: Option<&Process>, depth: usize) {
        self.line(depth, &head);
        match els {
            None => self.process(main, depth),
            Some(e) => {
                self.maybe_group(main, depth, *main != Process::Nil, "");
                let wrap_else = matches!(e, Process::Par(..));
                self.maybe_group(e, depth, wrap_else, "else ");
            }
        }
    }

    fn process(&mut self, p: &Process, depth: usize) {
        match p {
            Process::Nil => self.line(depth, "0"),
            Process::New { name, ty, cont } => match **cont {
                Process::Nil => self.line(depth, &format!("new {name}: {ty}; 0")),
                _ => self.seq(format!("new {name}: {ty}"), cont, depth),
            },
            Process::Out { chan, msg, cont } => {
                self.seq(format!("out({}, {})", render_term(chan), render_term(msg)), cont, depth)
            }
            Process::In { chan, var, ty, cont } => {
                self.seq(format!("in({}, {var}: {ty})", render_term(chan)), cont, depth)
            }
            Process::Event { name, args, cont } => {
                let head =
                    if args.is_empty() { format!("event {name}") } else { format!("event {name}({})", terms(args)) };
                self.seq(head, cont, depth)
            }
            Process::Let { var, term, cont, els } => {
                self.branches(format!("let {var} = {} in", render_term(term)), cont, els.as_deref(), depth)
            }
            Process::If { lhs, rhs, then, els } => self.branches(
                format!("if {} = {} then", render_term(lhs), render_term(rhs)),
                then,
                els.as_deref(),
                depth,
            ),
            Process::Par(a, b) => {
                let wrap_left = !matches!(**a, Process::Nil | Process::Par(..));
                self.maybe_group(a, depth, wrap_left, "");
                let wrap_right = **b != Process::Nil;
                self.maybe_group(b, depth, wrap_right, "| ");
            }
            Process::Repl(q) => {
                if **q == Process::Nil {
                    self.line(depth, "!0");
                } else {
                    self.group(q, depth, "!");
                }
            }
        }
    }
}

/// Single-line form used in traces and prompts.
pub fn render_inline(p: &Process) -> String {
    let text = render(&PiModel { declarations: Vec::new(), main_process: p.clone(), queries: Vec::new() });
    let body = text.strip_prefix("process").unwrap_or(&text);
    body.split_whitespace().collect::<Vec<_>>().join(" ")
}
