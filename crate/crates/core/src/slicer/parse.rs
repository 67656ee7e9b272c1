//! Brace-balanced, method-granularity reader for decompiled Java.
//!
//! Recognizes class/interface/enum bodies, anonymous class bodies
//! (`new Foo(...) { ... }`) and method declarations inside them, and records
//! `name(` call sites inside method bodies. No expression grammar.

use super::SliceError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Punct(char),
    Literal,
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub start: usize,
    pub end: usize,
}

pub(crate) fn tokenize(path: &str, text: &str) -> Result<Vec<Token>, SliceError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let fail = |line| SliceError::ParseFailure {
        path: path.to_string(),
        line,
        reason: "unterminated literal or comment".into(),
    };
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b'\n' => {
                line += 1;
                i += 1;
            }
            b' ' | b'\t' | b'\r' => i += 1,
            b'/' if bytes.get(i + 1) == Some(&b'/') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'/' if bytes.get(i + 1) == Some(&b'*') => {
                let start_line = line;
                i += 2;
                loop {
                    if i + 1 >= bytes.len() {
                        return Err(fail(start_line));
                    }
                    if bytes[i] == b'\n' {
                        line += 1;
                    }
                    if bytes[i] == b'*' && bytes[i + 1] == b'/' {
                        i += 2;
                        break;
                    }
                    i += 1;
                }
            }
            b'"' | b'\'' => {
                let quote = b;
                let start = i;
                let start_line = line;
                // text blocks
                if quote == b'"' && bytes[i..].starts_with(b"\"\"\"") {
                    i += 3;
                    loop {
                        if i + 2 >= bytes.len() {
                            return Err(fail(start_line));
                        }
                        if bytes[i] == b'\n' {
                            line += 1;
                        }
                        if bytes[i..].starts_with(b"\"\"\"") {
                            i += 3;
                            break;
                        }
                        i += 1;
                    }
                } else {
                    i += 1;
                    loop {
                        match bytes.get(i) {
                            None | Some(b'\n') => return Err(fail(start_line)),
                            Some(b'\\') => i += 2,
                            Some(c) if *c == quote => {
                                i += 1;
                                break;
                            }
                            _ => i += 1,
                        }
                    }
                }
                out.push(Token { tok: Tok::Literal, line: start_line, start, end: i });
            }
            c if c.is_ascii_alphabetic() || c == b'_' || c == b'$' || c >= 0x80 => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'$' || bytes[i] >= 0x80)
                {
                    i += 1;
                }
                out.push(Token { tok: Tok::Ident(text[start..i].to_string()), line, start, end: i });
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'.' || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token { tok: Tok::Literal, line, start, end: i });
            }
            c => {
                out.push(Token { tok: Tok::Punct(c as char), line, start: i, end: i + 1 });
                i += 1;
            }
        }
    }
    Ok(out)
}

const NON_METHOD_WORDS: &[&str] = &[
    "if",
    "for",
    "while",
    "switch",
    "catch",
    "synchronized",
    "return",
    "new",
    "else",
    "try",
    "do",
    "throw",
    "super",
    "this",
    "assert",
    "case",
];

const TYPE_KEYWORDS: &[&str] = &["class", "interface", "enum", "record"];

/// A method declaration found in a unit.
#[derive(Debug, Clone)]
pub(crate) struct RawMethod {
    pub class_name: String,
    pub name: String,
    pub body: String,
    /// `(receiver, name)` for each call site, in source order.
    pub calls: Vec<(Option<String>, String)>,
}

enum Frame {
    Class(String),
    Method(usize),
    Block,
}

fn ident(t: &Token) -> Option<&str> {
    match &t.tok {
        Tok::Ident(s) => Some(s),
        _ => None,
    }
}

fn punct(t: &Token, c: char) -> bool {
    t.tok == Tok::Punct(c)
}

/// Index of the `(` matching the `)` at `close`.
fn matching_open_paren(tokens: &[Token], close: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut i = close;
    loop {
        if punct(&tokens[i], ')') {
            depth += 1;
        } else if punct(&tokens[i], '(') {
            depth -= 1;
            if depth == 0 {
                return Some(i);
            }
        }
        if i == 0 {
            return None;
        }
        i -= 1;
    }
}

pub(crate) fn parse_unit(path: &str, default_class: &str, text: &str) -> Result<Vec<RawMethod>, SliceError> {
    let tokens = tokenize(path, text)?;
    let mut methods: Vec<RawMethod> = Vec::new();
    let mut method_start: Vec<usize> = Vec::new();
    let mut stack: Vec<Frame> = Vec::new();
    // start of the current statement/header
    let mut header_start = 0usize;

    let enclosing_class = |stack: &[Frame]| -> String {
        stack
            .iter()
            .rev()
            .find_map(|f| match f {
                Frame::Class(n) => Some(n.clone()),
                _ => None,
            })
            .unwrap_or_else(|| default_class.to_string())
    };
    let in_class_body = |stack: &[Frame]| matches!(stack.last(), Some(Frame::Class(_)));
    let current_method = |stack: &[Frame]| {
        stack.iter().rev().find_map(|f| match f {
            Frame::Method(i) => Some(*i),
            _ => None,
        })
    };

    let mut i = 0;
    while i < tokens.len() {
        let t = &tokens[i];
        match &t.tok {
            Tok::Punct('{') => {
                let header = &tokens[header_start..i];
                let frame = classify_header(header, &tokens, header_start, i, in_class_body(&stack));
                match frame {
                    HeaderKind::Class(name) => stack.push(Frame::Class(name)),
                    HeaderKind::Anonymous => {
                        // methods of anonymous classes belong to the enclosing named class
                        stack.push(Frame::Class(enclosing_class(&stack)))
                    }
                    HeaderKind::Method(name) => {
                        methods.push(RawMethod {
                            class_name: enclosing_class(&stack),
                            name,
                            body: String::new(),
                            calls: Vec::new(),
                        });
                        method_start.push(tokens[header_start].start);
                        stack.push(Frame::Method(methods.len() - 1));
                    }
                    HeaderKind::Block => stack.push(Frame::Block),
                }
                header_start = i + 1;
            }
            Tok::Punct('}') => {
                match stack.pop() {
                    None => {
                        return Err(SliceError::ParseFailure {
                            path: path.to_string(),
                            line: t.line,
                            reason: "unbalanced '}'".into(),
                        })
                    }
                    Some(Frame::Method(idx)) => {
                        methods[idx].body = text[method_start[idx]..t.end].to_string();
                    }
                    Some(_) => {}
                }
                header_start = i + 1;
            }
            Tok::Punct(';') => header_start = i + 1,
            Tok::Ident(name) => {
                if let Some(m) = current_method(&stack) {
                    let is_call = tokens.get(i + 1).is_some_and(|n| punct(n, '('));
                    let prev_new = i > 0 && ident(&tokens[i - 1]) == Some("new");
                    if is_call && !prev_new && !NON_METHOD_WORDS.contains(&name.as_str()) {
                        let receiver = if i >= 2 && punct(&tokens[i - 1], '.') {
                            ident(&tokens[i - 2]).map(str::to_string)
                        } else {
                            None
                        };
                        methods[m].calls.push((receiver, name.clone()));
                    }
                }
            }
            _ => {}
        }
        i += 1;
    }
    if !stack.is_empty() {
        let line = tokens.last().map(|t| t.line).unwrap_or(1);
        return Err(SliceError::ParseFailure { path: path.to_string(), line, reason: "unbalanced '{'".into() });
    }
    Ok(methods)
}

enum HeaderKind {
    Class(String),
    Anonymous,
    Method(String),
    Block,
}

fn classify_header(header: &[Token], all: &[Token], start: usize, brace: usize, in_class: bool) -> HeaderKind {
    if let Some(pos) = header.iter().position(|t| ident(t).is_some_and(|s| TYPE_KEYWORDS.contains(&s))) {
        // `Foo.class` is not a declaration
        let dotted = pos > 0 && punct(&header[pos - 1], '.');
        if !dotted {
            if let Some(name) = header.get(pos + 1).and_then(ident) {
                return HeaderKind::Class(name.to_string());
            }
        }
    }
    // anonymous class: `new Type(args) {`
    if brace > start && punct(&all[brace - 1], ')') {
        if let Some(open) = matching_open_paren(all, brace - 1) {
            if open >= 2 {
                let mut j = open;
                // skip generic arguments: new Foo<Bar>() {
                if j >= 1 && punct(&all[j - 1], '>') {
                    let mut depth = 0i32;
                    while j > 0 {
                        j -= 1;
                        if punct(&all[j], '>') {
                            depth += 1;
                        } else if punct(&all[j], '<') {
                            depth -= 1;
                            if depth == 0 {
                                break;
                            }
                        }
                    }
                }
                if j >= 2 && ident(&all[j - 1]).is_some() {
                    // walk back over a dotted type name
                    let mut k = j - 1;
                    while k >= 2 && punct(&all[k - 1], '.') && ident(&all[k - 2]).is_some() {
                        k -= 2;
                    }
                    if k >= 1 && ident(&all[k - 1]) == Some("new") {
                        return HeaderKind::Anonymous;
                    }
                }
            }
        }
    }
    if in_class {
        let open = (1..header.len()).find(|&p| {
            punct(&header[p], '(') && ident(&header[p - 1]).is_some() && !(p >= 2 && punct(&header[p - 2], '@'))
        });
        if let Some(open) = open {
            {
                if let Some(name) = ident(&header[open - 1]) {
                    let has_assign = header[..open].iter().any(|t| punct(t, '='));
                    if !NON_METHOD_WORDS.contains(&name) && !has_assign {
                        return HeaderKind::Method(name.to_string());
                    }
                }
            }
        }
    }
    HeaderKind::Block
}
