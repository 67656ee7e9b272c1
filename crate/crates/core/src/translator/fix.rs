//! Mechanical repairs named by error-recovery entries. Each one takes the
//! faulty text and the diagnostic it answers, and returns new text, or
//! `None` when it does not apply.

use std::collections::BTreeSet;

use crate::pvlang::{parse_unchecked, render, Decl, Diagnostic, PiModel, Process, QuerySpec, Term};

pub const FIX_ACTIONS: &[&str] = &[
    "add_else",
    "declare_event",
    "declare_free",
    "declare_type",
    "drop_duplicate",
    "fix_arity",
    "bind_channel",
    "fix_reduc",
    "hoist_destructor",
    "close_syntax",
];

pub fn apply_fix(action: &str, text: &str, diag: &Diagnostic) -> Option<String> {
    if action == "close_syntax" {
        return close_syntax(text, diag);
    }
    let (mut m, _) = parse_unchecked(text).ok()?;
    let changed = match action {
        "add_else" => add_else(&mut m),
        "declare_event" => declare_event(&mut m, diag.subject.as_deref()?),
        "declare_free" => declare_free(&mut m, diag.subject.as_deref()?),
        "declare_type" => declare_type(&mut m, diag.subject.as_deref()?),
        "drop_duplicate" => drop_duplicate(&mut m, diag.subject.as_deref()?),
        "fix_arity" => fix_arity(&mut m, diag.subject.as_deref()?, diag.expected_arity?, diag.found_arity?),
        "bind_channel" => bind_channel(&mut m, diag.subject.as_deref()?),
        "fix_reduc" => fix_reduc(&mut m),
        "hoist_destructor" => hoist_destructor(&mut m),
        _ => false,
    };
    changed.then(|| render(&m))
}

fn destructors(m: &PiModel) -> BTreeSet<String> {
    m.declarations
        .iter()
        .filter_map(|d| match d {
            Decl::Reduc { name, .. } => Some(name.clone()),
            _ => None,
        })
        .collect()
}

fn add_else(m: &mut PiModel) -> bool {
    let dtors = destructors(m);
    let mut changed = false;
    m.main_process.walk_mut(&mut |p| {
        if let Process::Let { term: Term::App(f, _), els: els @ None, .. } = p {
            if dtors.contains(f) {
                *els = Some(Box::new(Process::Nil));
                changed = true;
            }
        }
    });
    changed
}

fn insert_after_last(m: &mut PiModel, decl: Decl, same_kind: impl Fn(&Decl) -> bool) {
    let at = m.declarations.iter().rposition(same_kind).map_or(m.declarations.len(), |i| i + 1);
    m.declarations.insert(at, decl);
}

fn declare_event(m: &mut PiModel, name: &str) -> bool {
    if m.event_decl(name).is_some() {
        return false;
    }
    let mut args: Option<Vec<String>> = None;
    m.main_process.walk(&mut |p| {
        if let Process::Event { name: n, args: a, .. } = p {
            if n == name && args.is_none() {
                args = Some(vec!["bitstring".to_string(); a.len()]);
            }
        }
    });
    if args.is_none() {
        args = m.queries.iter().find_map(|q| match q {
            QuerySpec::Correspondence { vars, end, begin } if end == name || begin == name => {
                Some(vars.iter().map(|(_, t)| t.clone()).collect())
            }
            QuerySpec::Freshness { accept, .. } if accept == name => Some(vec!["bitstring".to_string()]),
            _ => None,
        });
    }
    let Some(args) = args else { return false };
    insert_after_last(m, Decl::Event { name: name.to_string(), args }, |d| matches!(d, Decl::Event { .. }));
    true
}

fn declare_free(m: &mut PiModel, name: &str) -> bool {
    if m.decl(name).is_some() {
        return false;
    }
    let decl = Decl::Free { name: name.to_string(), ty: "bitstring".to_string(), private: true };
    insert_after_last(m, decl, |d| matches!(d, Decl::Free { .. }));
    true
}

fn declare_type(m: &mut PiModel, name: &str) -> bool {
    if m.declarations.iter().any(|d| matches!(d, Decl::Type { name: n } if n == name)) {
        return false;
    }
    m.declarations.insert(0, Decl::Type { name: name.to_string() });
    true
}

fn namespace(d: &Decl) -> u8 {
    match d {
        Decl::Type { .. } => 0,
        Decl::Event { .. } => 1,
        _ => 2,
    }
}

fn drop_duplicate(m: &mut PiModel, name: &str) -> bool {
    let mut seen = BTreeSet::new();
    let before = m.declarations.len();
    m.declarations.retain(|d| d.name() != name || seen.insert(namespace(d)));
    m.declarations.len() != before
}

/// First free name of type `ty`, else any free name.
fn filler(m: &PiModel, ty: &str) -> Option<Term> {
    let frees = || {
        m.declarations.iter().filter_map(|d| match d {
            Decl::Free { name, ty, .. } => Some((name, ty)),
            _ => None,
        })
    };
    frees()
        .find(|(_, t)| *t == ty)
        .or_else(|| frees().find(|(_, t)| *t != "channel"))
        .map(|(n, _)| Term::ident(n.clone()))
}

fn arg_types(m: &PiModel, f: &str, n: usize) -> Vec<String> {
    match m.decl(f) {
        Some(Decl::Fun { args, .. }) => args.clone(),
        _ => vec!["bitstring".to_string(); n],
    }
}

fn resize(args: &mut Vec<Term>, want: usize, types: &[String], m: &PiModel) -> bool {
    if args.len() > want {
        args.truncate(want);
        return true;
    }
    while args.len() < want {
        let ty = types.get(args.len()).map_or("bitstring", String::as_str);
        match filler(m, ty) {
            Some(t) => args.push(t),
            None => return false,
        }
    }
    true
}

fn fix_term(t: &mut Term, f: &str, want: usize, found: usize, types: &[String], m: &PiModel, changed: &mut bool) {
    if let Term::App(g, args) = t {
        for a in args.iter_mut() {
            fix_term(a, f, want, found, types, m, changed);
        }
        if g == f && args.len() == found && resize(args, want, types, m) {
            *changed = true;
        }
    }
}

fn fix_arity(m: &mut PiModel, f: &str, want: usize, found: usize) -> bool {
    let types =
        if m.event_decl(f).is_some() { m.event_decl(f).unwrap_or_default().to_vec() } else { arg_types(m, f, want) };
    let snapshot = m.clone();
    let mut changed = false;
    m.main_process.walk_mut(&mut |p| {
        let mut fix = |t: &mut Term| fix_term(t, f, want, found, &types, &snapshot, &mut changed);
        match p {
            Process::Out { chan, msg, .. } => {
                fix(chan);
                fix(msg);
            }
            Process::In { chan, .. } => fix(chan),
            Process::Let { term, .. } => fix(term),
            Process::If { lhs, rhs, .. } => {
                fix(lhs);
                fix(rhs);
            }
            Process::Event { name, args, .. } => {
                for a in args.iter_mut() {
                    fix(a);
                }
                if name == f && args.len() == found && resize(args, want, &types, &snapshot) {
                    changed = true;
                }
            }
            _ => {}
        }
    });
    if let Some(QuerySpec::Secrecy { target }) = m.queries.iter_mut().find(|q| matches!(q, QuerySpec::Secrecy { .. })) {
        fix_term(target, f, want, found, &types, &snapshot, &mut changed);
    }
    changed
}

fn bind_channel(m: &mut PiModel, bad: &str) -> bool {
    let Some(chan) = m.declarations.iter().find_map(|d| match d {
        Decl::Free { name, ty, .. } if ty == "channel" => Some(name.clone()),
        _ => None,
    }) else {
        return false;
    };
    let mut changed = false;
    m.main_process.walk_mut(&mut |p| {
        if let Process::Out { chan: c, .. } | Process::In { chan: c, .. } = p {
            if c.head() == bad {
                *c = Term::ident(chan.clone());
                changed = true;
            }
        }
    });
    changed
}

fn idents(t: &Term, out: &mut Vec<String>) {
    match t {
        Term::Ident(x) => {
            if !out.contains(x) {
                out.push(x.clone());
            }
        }
        Term::App(_, args) => args.iter().for_each(|a| idents(a, out)),
    }
}

fn fix_reduc(m: &mut PiModel) -> bool {
    let mut changed = false;
    for d in &mut m.declarations {
        let Decl::Reduc { vars, args, rhs, .. } = d else { continue };
        let mut lhs = Vec::new();
        args.iter().for_each(|a| idents(a, &mut lhs));
        let declared: Vec<&String> = vars.iter().map(|(v, _)| v).collect();
        let lhs_vars: Vec<&String> = lhs.iter().filter(|x| declared.contains(x)).collect();
        let mut rhs_ids = Vec::new();
        idents(rhs, &mut rhs_ids);
        if rhs_ids.iter().any(|x| declared.contains(&x) && !lhs.contains(x)) {
            if let Some(first) = lhs_vars.first() {
                *rhs = Term::ident((*first).clone());
                changed = true;
            }
        }
        let mut seen = BTreeSet::new();
        let before = vars.len();
        vars.retain(|(v, _)| lhs.contains(v) && seen.insert(v.clone()));
        changed |= vars.len() != before;
    }
    changed
}

fn all_idents(m: &PiModel) -> BTreeSet<String> {
    let text = render(m);
    super::kb::tokenize(&text).into_iter().collect()
}

/// Outermost destructor application inside `t`, replaced by `var`.
fn take_dtor(t: &mut Term, dtors: &BTreeSet<String>, var: &str) -> Option<Term> {
    if let Term::App(f, _) = t {
        if dtors.contains(f) {
            return Some(std::mem::replace(t, Term::ident(var)));
        }
    }
    match t {
        Term::App(_, args) => args.iter_mut().find_map(|a| take_dtor(a, dtors, var)),
        Term::Ident(_) => None,
    }
}

fn hoist_destructor(m: &mut PiModel) -> bool {
    let dtors = destructors(m);
    let taken = all_idents(m);
    let var = std::iter::once("v".to_string())
        .chain((1..).map(|i| format!("v{i}")))
        .find(|v| !taken.contains(v))
        .expect("unbounded supply");
    let mut done = false;
    m.main_process.walk_mut(&mut |p| {
        if done {
            return;
        }
        let found = match p {
            Process::Out { chan, msg, .. } => take_dtor(chan, &dtors, &var).or_else(|| take_dtor(msg, &dtors, &var)),
            Process::In { chan, .. } => take_dtor(chan, &dtors, &var),
            Process::Event { args, .. } => args.iter_mut().find_map(|a| take_dtor(a, &dtors, &var)),
            Process::If { lhs, rhs, .. } => take_dtor(lhs, &dtors, &var).or_else(|| take_dtor(rhs, &dtors, &var)),
            Process::Let { term: Term::App(_, args), .. } => args.iter_mut().find_map(|a| take_dtor(a, &dtors, &var)),
            _ => None,
        };
        if let Some(term) = found {
            let inner = std::mem::replace(p, Process::Nil);
            *p = Process::Let { var: var.clone(), term, cont: Box::new(inner), els: Some(Box::new(Process::Nil)) };
            done = true;
        }
    });
    done
}

/// Inserts the first expected token at the reported position.
fn close_syntax(text: &str, diag: &Diagnostic) -> Option<String> {
    let trace = diag.syntax.as_ref()?;
    let token = trace.expected.first()?;
    let token = token.trim_matches(|c| c == '`' || c == '\'' || c == '"');
    let mut offset = None;
    let mut pos = 0;
    for (i, line) in text.split_inclusive('\n').enumerate() {
        if i + 1 == trace.line {
            let col = line.char_indices().nth(trace.column.saturating_sub(1)).map_or(line.len(), |(b, _)| b);
            offset = Some(pos + col);
            break;
        }
        pos += line.len();
    }
    let at = offset.unwrap_or(text.len());
    let mut out = String::with_capacity(text.len() + token.len() + 1);
    out.push_str(&text[..at]);
    out.push_str(token);
    if !token.is_empty() && text[at..].starts_with(|c: char| c.is_alphanumeric()) {
        out.push(' ');
    }
    out.push_str(&text[at..]);
    Some(out)
}
