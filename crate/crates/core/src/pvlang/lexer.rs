use super::diag::SyntaxTrace;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Zero,
    Dot,
    Comma,
    Colon,
    Semi,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Eq,
    Bar,
    Bang,
    Implies,
    /// `(*!` opens a pragma whose content is lexed normally.
    PragmaOpen,
    /// `*)` closing a pragma.
    PragmaClose,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => s.clone(),
            Tok::Zero => "0".into(),
            Tok::Dot => ".".into(),
            Tok::Comma => ",".into(),
            Tok::Colon => ":".into(),
            Tok::Semi => ";".into(),
            Tok::LParen => "(".into(),
            Tok::RParen => ")".into(),
            Tok::LBracket => "[".into(),
            Tok::RBracket => "]".into(),
            Tok::Eq => "=".into(),
            Tok::Bar => "|".into(),
            Tok::Bang => "!".into(),
            Tok::Implies => "==>".into(),
            Tok::PragmaOpen => "(*!".into(),
            Tok::PragmaClose => "*)".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Spanned {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

pub fn lex(src: &str) -> Result<Vec<Spanned>, SyntaxTrace> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (1usize, 1usize);
    let mut i = 0;
    let mut in_pragma = false;
    let at = |i: usize| chars.get(i).copied();

    macro_rules! advance {
        ($n:expr) => {
            for _ in 0..$n {
                if at(i) == Some('\n') {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                i += 1;
            }
        };
    }

    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let push = |out: &mut Vec<Spanned>, tok| out.push(Spanned { tok, line: tl, col: tc });
        if c.is_whitespace() {
            advance!(1);
            continue;
        }
        if c == '(' && at(i + 1) == Some('*') {
            if at(i + 2) == Some('!') && !in_pragma {
                push(&mut out, Tok::PragmaOpen);
                in_pragma = true;
                advance!(3);
                continue;
            }
            // ordinary comment, possibly nested
            let mut depth = 0usize;
            loop {
                match (at(i), at(i + 1)) {
                    (Some('('), Some('*')) => {
                        depth += 1;
                        advance!(2);
                    }
                    (Some('*'), Some(')')) => {
                        depth -= 1;
                        advance!(2);
                        if depth == 0 {
                            break;
                        }
                    }
                    (Some(_), _) => advance!(1),
                    (None, _) => {
                        return Err(SyntaxTrace::new(tl, tc, vec!["*)".into()], "end of input"));
                    }
                }
            }
            continue;
        }
        if c == '*' && at(i + 1) == Some(')') && in_pragma {
            push(&mut out, Tok::PragmaClose);
            in_pragma = false;
            advance!(2);
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while at(i).is_some_and(|c| c.is_alphanumeric() || c == '_' || c == '\'') {
                advance!(1);
            }
            let s: String = chars[start..i].iter().collect();
            push(&mut out, Tok::Ident(s));
            continue;
        }
        let (tok, len) = match c {
            '0' if !at(i + 1).is_some_and(|d| d.is_alphanumeric()) => (Tok::Zero, 1),
            '.' => (Tok::Dot, 1),
            ',' => (Tok::Comma, 1),
            ':' => (Tok::Colon, 1),
            ';' => (Tok::Semi, 1),
            '(' => (Tok::LParen, 1),
            ')' => (Tok::RParen, 1),
            '[' => (Tok::LBracket, 1),
            ']' => (Tok::RBracket, 1),
            '|' => (Tok::Bar, 1),
            '!' => (Tok::Bang, 1),
            '=' if at(i + 1) == Some('=') && at(i + 2) == Some('>') => (Tok::Implies, 3),
            '=' => (Tok::Eq, 1),
            other => {
                return Err(SyntaxTrace::new(tl, tc, Vec::new(), &other.to_string()));
            }
        };
        push(&mut out, tok);
        advance!(len);
    }
    if in_pragma {
        return Err(SyntaxTrace::new(line, col, vec!["*)".into()], "end of input"));
    }
    out.push(Spanned { tok: Tok::Eof, line, col });
    Ok(out)
}
