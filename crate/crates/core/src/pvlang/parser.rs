//! Recursive-descent parser for the supported model subset.
//!
//! ```text
//! model   := decl* 'process' process EOF
//! process := unary ('|' unary)*
//! unary   := '!' unary | '0' | '(' process ')'
//!          | 'new' x ':' T ';' process
//!          | 'out' '(' M ',' M ')' [';' process]
//!          | 'in' '(' M ',' x ':' T ')' [';' process]
//!          | 'event' e ['(' M,* ')'] [';' process]
//!          | 'let' x '=' M 'in' process ['else' process]
//!          | 'if' M '=' M 'then' process ['else' process]
//! ```

use super::ast::{Decl, PiModel, Process, QuerySpec, Term};
use super::diag::SyntaxTrace;
use super::lexer::{lex, Spanned, Tok};

type PResult<T> = Result<T, SyntaxTrace>;

const DECL_KEYWORDS: &[&str] = &["type", "free", "fun", "reduc", "event", "query", "process"];

const RESERVED: &[&str] = &[
    "type", "free", "fun", "reduc", "forall", "event", "query", "process", "new", "out", "in", "let", "if", "then",
    "else", "private", "attacker",
];

pub fn parse(src: &str) -> PResult<PiModel> {
    let toks = lex(src)?;
    Parser { toks, pos: 0, decls: Vec::new() }.model()
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    decls: Vec<Decl>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> SyntaxTrace {
        let t = &self.toks[self.pos];
        SyntaxTrace::new(t.line, t.col, expected.iter().map(|s| s.to_string()).collect(), &t.tok.describe())
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect(&mut self, tok: Tok) -> PResult<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&[&tok.describe()]))
        }
    }

    fn keyword(&mut self, kw: &str) -> PResult<()> {
        if self.is_kw(kw) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&[kw]))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek() {
            Tok::Ident(s) if !RESERVED.contains(&s.as_str()) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    fn model(mut self) -> PResult<PiModel> {
        let mut queries = Vec::new();
        loop {
            match self.peek().clone() {
                Tok::Ident(kw) if kw == "process" => {
                    self.bump();
                    break;
                }
                Tok::Ident(kw) if kw == "query" => {
                    self.bump();
                    queries.push(self.query()?);
                }
                Tok::Ident(kw) if DECL_KEYWORDS.contains(&kw.as_str()) => {
                    self.bump();
                    self.decl(&kw)?;
                }
                Tok::PragmaOpen => {
                    self.bump();
                    queries.push(self.pragma()?);
                }
                _ => return Err(self.error(DECL_KEYWORDS)),
            }
        }
        let main_process = self.process()?;
        if *self.peek() != Tok::Eof {
            return Err(self.error(&["end of input", "|"]));
        }
        Ok(PiModel { declarations: self.decls, main_process, queries })
    }

    fn private_flag(&mut self) -> PResult<bool> {
        if *self.peek() == Tok::LBracket {
            self.bump();
            self.keyword("private")?;
            self.expect(Tok::RBracket)?;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    fn type_list(&mut self) -> PResult<Vec<String>> {
        self.expect(Tok::LParen)?;
        let mut out = Vec::new();
        if *self.peek() != Tok::RParen {
            out.push(self.ident()?);
            while *self.peek() == Tok::Comma {
                self.bump();
                out.push(self.ident()?);
            }
        }
        self.expect(Tok::RParen)?;
        Ok(out)
    }

    fn var_decls(&mut self) -> PResult<Vec<(String, String)>> {
        let mut vars = Vec::new();
        loop {
            let v = self.ident()?;
            self.expect(Tok::Colon)?;
            let t = self.ident()?;
            vars.push((v, t));
            if *self.peek() == Tok::Comma {
                self.bump();
            } else {
                return Ok(vars);
            }
        }
    }

    fn decl(&mut self, kw: &str) -> PResult<()> {
        match kw {
            "type" => {
                let name = self.ident()?;
                self.decls.push(Decl::Type { name });
            }
            "free" => {
                let mut names = vec![self.ident()?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    names.push(self.ident()?);
                }
                self.expect(Tok::Colon)?;
                let ty = self.ident()?;
                let private = self.private_flag()?;
                for name in names {
                    self.decls.push(Decl::Free { name, ty: ty.clone(), private });
                }
            }
            "fun" => {
                let name = self.ident()?;
                let args = self.type_list()?;
                self.expect(Tok::Colon)?;
                let ret = self.ident()?;
                let private = self.private_flag()?;
                self.decls.push(Decl::Fun { name, args, ret, private });
            }
            "reduc" => {
                self.keyword("forall")?;
                let vars = self.var_decls()?;
                self.expect(Tok::Semi)?;
                let name = self.ident()?;
                let args = self.term_args()?;
                self.expect(Tok::Eq)?;
                let rhs = self.term()?;
                self.decls.push(Decl::Reduc { vars, name, args, rhs });
            }
            "event" => {
                let name = self.ident()?;
                let args = if *self.peek() == Tok::LParen { self.type_list()? } else { Vec::new() };
                self.decls.push(Decl::Event { name, args });
            }
            _ => unreachable!("caller checks keyword"),
        }
        self.expect(Tok::Dot)
    }

    fn query(&mut self) -> PResult<QuerySpec> {
        let declared = if matches!(self.peek(), Tok::Ident(_)) && *self.peek_at(1) == Tok::Colon {
            let v = self.var_decls()?;
            self.expect(Tok::Semi)?;
            Some(v)
        } else {
            None
        };
        let q = if self.is_kw("attacker") {
            if declared.is_some() {
                return Err(self.error(&["event"]));
            }
            self.bump();
            self.expect(Tok::LParen)?;
            let target = self.term()?;
            self.expect(Tok::RParen)?;
            QuerySpec::Secrecy { target }
        } else if self.is_kw("event") {
            let (end, end_args) = self.event_fact()?;
            self.expect(Tok::Implies)?;
            let (begin, begin_args) = self.event_fact()?;
            if end_args != begin_args {
                return Err(self.error(&["matching argument variables"]));
            }
            let vars = match declared {
                Some(v) => {
                    if v.iter().map(|x| &x.0).ne(end_args.iter()) {
                        return Err(self.error(&["query variables in declaration order"]));
                    }
                    v
                }
                None => {
                    let tys = self
                        .decls
                        .iter()
                        .find_map(|d| match d {
                            Decl::Event { name, args } if *name == end => Some(args.clone()),
                            _ => None,
                        })
                        .unwrap_or_default();
                    end_args
                        .into_iter()
                        .enumerate()
                        .map(|(i, v)| (v, tys.get(i).cloned().unwrap_or_else(|| "bitstring".into())))
                        .collect()
                }
            };
            QuerySpec::Correspondence { vars, end, begin }
        } else {
            return Err(self.error(&["attacker", "event"]));
        };
        self.expect(Tok::Dot)?;
        Ok(q)
    }

    /// `event(name(x, y))` with plain variable arguments.
    fn event_fact(&mut self) -> PResult<(String, Vec<String>)> {
        self.keyword("event")?;
        self.expect(Tok::LParen)?;
        let name = self.ident()?;
        let mut args = Vec::new();
        if *self.peek() == Tok::LParen {
            self.bump();
            if *self.peek() != Tok::RParen {
                args.push(self.ident()?);
                while *self.peek() == Tok::Comma {
                    self.bump();
                    args.push(self.ident()?);
                }
            }
            self.expect(Tok::RParen)?;
        }
        self.expect(Tok::RParen)?;
        Ok((name, args))
    }

    fn pragma(&mut self) -> PResult<QuerySpec> {
        self.keyword("query")?;
        match self.peek() {
            Tok::Ident(s) if s == "freshness" => {
                self.bump();
            }
            _ => return Err(self.error(&["freshness"])),
        }
        self.expect(Tok::LParen)?;
        let accept = self.ident()?;
        let nonce = if *self.peek() == Tok::Comma {
            self.bump();
            Some(self.ident()?)
        } else {
            None
        };
        self.expect(Tok::RParen)?;
        self.expect(Tok::Dot)?;
        self.expect(Tok::PragmaClose)?;
        Ok(QuerySpec::Freshness { accept, nonce })
    }

    fn term(&mut self) -> PResult<Term> {
        let name = self.ident()?;
        if *self.peek() == Tok::LParen {
            let args = self.term_args()?;
            Ok(Term::App(name, args))
        } else {
            Ok(Term::Ident(name))
        }
    }

    fn term_args(&mut self) -> PResult<Vec<Term>> {
        self.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            args.push(self.term()?);
            while *self.peek() == Tok::Comma {
                self.bump();
                args.push(self.term()?);
            }
        }
        self.expect(Tok::RParen)?;
        Ok(args)
    }

    fn process(&mut self) -> PResult<Process> {
        let mut p = self.unary()?;
        while *self.peek() == Tok::Bar {
            self.bump();
            let q = self.unary()?;
            p = Process::par(p, q);
        }
        Ok(p)
    }

    /// Optional `; P` continuation.
    fn cont(&mut self) -> PResult<Box<Process>> {
        if *self.peek() == Tok::Semi {
            self.bump();
            Ok(Box::new(self.process()?))
        } else {
            Ok(Box::new(Process::Nil))
        }
    }

    fn else_branch(&mut self) -> PResult<Option<Box<Process>>> {
        if self.is_kw("else") {
            self.bump();
            Ok(Some(Box::new(self.process()?)))
        } else {
            Ok(None)
        }
    }

    fn unary(&mut self) -> PResult<Process> {
        match self.peek().clone() {
            Tok::Bang => {
                self.bump();
                Ok(Process::repl(self.unary()?))
            }
            Tok::Zero => {
                self.bump();
                Ok(Process::Nil)
            }
            Tok::LParen => {
                self.bump();
                let p = self.process()?;
                self.expect(Tok::RParen)?;
                Ok(p)
            }
            Tok::Ident(kw) => match kw.as_str() {
                "new" => {
                    self.bump();
                    let name = self.ident()?;
                    self.expect(Tok::Colon)?;
                    let ty = self.ident()?;
                    self.expect(Tok::Semi)?;
                    let cont = Box::new(self.process()?);
                    Ok(Process::New { name, ty, cont })
                }
                "out" => {
                    self.bump();
                    self.expect(Tok::LParen)?;
                    let chan = self.term()?;
                    self.expect(Tok::Comma)?;
                    let msg = self.term()?;
                    self.expect(Tok::RParen)?;
                    let cont = self.cont()?;
                    Ok(Process::Out { chan, msg, cont })
                }
                "in" => {
                    self.bump();
                    self.expect(Tok::LParen)?;
                    let chan = self.term()?;
                    self.expect(Tok::Comma)?;
                    let var = self.ident()?;
                    self.expect(Tok::Colon)?;
                    let ty = self.ident()?;
                    self.expect(Tok::RParen)?;
                    let cont = self.cont()?;
                    Ok(Process::In { chan, var, ty, cont })
                }
                "event" => {
                    self.bump();
                    let name = self.ident()?;
                    let args = if *self.peek() == Tok::LParen { self.term_args()? } else { Vec::new() };
                    let cont = self.cont()?;
                    Ok(Process::Event { name, args, cont })
                }
                "let" => {
                    self.bump();
                    let var = self.ident()?;
                    self.expect(Tok::Eq)?;
                    let term = self.term()?;
                    self.keyword("in")?;
                    let cont = Box::new(self.process()?);
                    let els = self.else_branch()?;
                    Ok(Process::Let { var, term, cont, els })
                }
                "if" => {
                    self.bump();
                    let lhs = self.term()?;
                    self.expect(Tok::Eq)?;
                    let rhs = self.term()?;
                    self.keyword("then")?;
                    let then = Box::new(self.process()?);
                    let els = self.else_branch()?;
                    Ok(Process::If { lhs, rhs, then, els })
                }
                _ => Err(self.error(&["0", "(", "!", "new", "out", "in", "event", "let", "if"])),
            },
            _ => Err(self.error(&["0", "(", "!", "new", "out", "in", "event", "let", "if"])),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_model() {
        let m = parse("free c:channel. process out(c, c)").unwrap();
        assert_eq!(m.declarations.len(), 1);
        assert_eq!(
            m.main_process,
            Process::Out { chan: Term::ident("c"), msg: Term::ident("c"), cont: Box::new(Process::Nil) }
        );
    }

    #[test]
    fn queries_and_pragmas() {
        let src =
            "free s: bitstring [private].\nevent begin_auth(bitstring).\nevent end_auth(bitstring).\nevent accept.\n\
                   query attacker(s).\nquery x: bitstring; event(end_auth(x)) ==> event(begin_auth(x)).\n\
                   query event(end_auth(y)) ==> event(begin_auth(y)).\n(*! query freshness(accept, n). *)\nprocess 0";
        let m = parse(src).unwrap();
        assert_eq!(m.queries.len(), 4);
        assert_eq!(
            m.queries[2],
            QuerySpec::Correspondence {
                vars: vec![("y".into(), "bitstring".into())],
                end: "end_auth".into(),
                begin: "begin_auth".into()
            }
        );
        assert_eq!(m.queries[3], QuerySpec::Freshness { accept: "accept".into(), nonce: Some("n".into()) });
    }

    #[test]
    fn precedence() {
        let m = parse("free c: channel. process !out(c, c) | in(c, x: bitstring); 0 | 0").unwrap();
        // `;` continuations extend to the right, so the `| 0` belongs to `in`
        match m.main_process {
            Process::Par(l, r) => {
                assert!(matches!(*l, Process::Repl(_)));
                assert!(matches!(*r, Process::In { .. }));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dangling_else_binds_inner() {
        let m = parse("free a, b: bitstring. process if a = b then if b = a then 0 else 0").unwrap();
        match m.main_process {
            Process::If { then, els, .. } => {
                assert!(els.is_none());
                assert!(matches!(*then, Process::If { els: Some(_), .. }));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_error_trace() {
        let err = parse("free c: channel\nfree d: channel.\nprocess 0").unwrap_err();
        assert_eq!((err.line, err.column), (2, 1));
        assert_eq!(err.expected, vec!["."]);
        assert_eq!(err.found, "free");
        let err = parse("free c: channel.").unwrap_err();
        assert!(err.expected.contains(&"process".to_string()));
    }
}
