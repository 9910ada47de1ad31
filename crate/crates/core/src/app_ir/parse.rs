//! Line-aware recursive-descent parser for `.papp` sources.

use std::collections::BTreeMap;

use super::ast::{App, Body, NetMethodDecl, StaticSource, Stmt, UrlPart};
use super::validate::{validate_with, Diagnostic, Loc, ParseError};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Str(String),
    Num(u64),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Eq,
    Plus,
    Comma,
    Semi,
    Arrow,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::Num(n) => format!("number {n}"),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Arrow => "`->`".into(),
        }
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '$'
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, Diagnostic> {
    let mut toks = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let err = |msg: String| Diagnostic::at(line_no, msg);
        let mut chars = line.char_indices().peekable();
        while let Some(&(start, c)) = chars.peek() {
            match c {
                '#' => break,
                c if c.is_whitespace() => {
                    chars.next();
                }
                '{' | '}' | '(' | ')' | '=' | '+' | ',' | ';' => {
                    chars.next();
                    toks.push((
                        match c {
                            '{' => Tok::LBrace,
                            '}' => Tok::RBrace,
                            '(' => Tok::LParen,
                            ')' => Tok::RParen,
                            '=' => Tok::Eq,
                            '+' => Tok::Plus,
                            ',' => Tok::Comma,
                            _ => Tok::Semi,
                        },
                        line_no,
                    ));
                }
                '-' => {
                    chars.next();
                    match chars.next() {
                        Some((_, '>')) => toks.push((Tok::Arrow, line_no)),
                        _ => return Err(err("expected `->`".into())),
                    }
                }
                '"' => {
                    chars.next();
                    let mut s = String::new();
                    let mut closed = false;
                    while let Some((_, c)) = chars.next() {
                        match c {
                            '"' => {
                                closed = true;
                                break;
                            }
                            '\\' => match chars.next() {
                                Some((_, 'n')) => s.push('\n'),
                                Some((_, 't')) => s.push('\t'),
                                Some((_, '"')) => s.push('"'),
                                Some((_, '\\')) => s.push('\\'),
                                Some((_, other)) => {
                                    return Err(err(format!("unknown escape `\\{other}`")))
                                }
                                None => break,
                            },
                            c => s.push(c),
                        }
                    }
                    if !closed {
                        return Err(err("unterminated string literal".into()));
                    }
                    toks.push((Tok::Str(s), line_no));
                }
                c if c.is_ascii_digit() => {
                    let mut end = start;
                    while let Some(&(i, d)) = chars.peek() {
                        if !d.is_ascii_digit() {
                            break;
                        }
                        end = i + d.len_utf8();
                        chars.next();
                    }
                    let n = line[start..end]
                        .parse()
                        .map_err(|_| err(format!("number `{}` out of range", &line[start..end])))?;
                    toks.push((Tok::Num(n), line_no));
                }
                c if is_ident_start(c) => {
                    let mut end = start;
                    while let Some(&(i, d)) = chars.peek() {
                        if !is_ident_char(d) {
                            break;
                        }
                        end = i + d.len_utf8();
                        chars.next();
                    }
                    toks.push((Tok::Ident(line[start..end].to_string()), line_no));
                }
                other => return Err(err(format!("unexpected character `{other}`"))),
            }
        }
    }
    Ok(toks)
}

/// Source line numbers collected while parsing, used to place validation diagnostics.
#[derive(Debug, Default)]
pub(crate) struct SourceLines {
    pub bodies: Vec<usize>,
    pub stmts: Vec<Vec<usize>>,
    pub netmethods: Vec<usize>,
    pub waits: Vec<usize>,
    pub edges: Vec<usize>,
}

impl SourceLines {
    pub(crate) fn line(&self, loc: Loc) -> Option<usize> {
        match loc {
            Loc::Body(b) => self.bodies.get(b).copied(),
            Loc::Stmt(b, s) => self.stmts.get(b).and_then(|v| v.get(s)).copied(),
            Loc::NetMethod(i) => self.netmethods.get(i).copied(),
            Loc::Wait(i) => self.waits.get(i).copied(),
            Loc::Edge(i) => self.edges.get(i).copied(),
        }
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    last_line: usize,
}

type PResult<T> = Result<T, Diagnostic>;

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.pos + 1).map(|(t, _)| t)
    }

    fn line(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|(_, l)| *l)
            .unwrap_or(self.last_line)
    }

    fn next(&mut self) -> PResult<Tok> {
        match self.toks.get(self.pos) {
            Some((t, _)) => {
                self.pos += 1;
                Ok(t.clone())
            }
            None => Err(Diagnostic::at(self.last_line, "unexpected end of input")),
        }
    }

    fn unexpected<T>(&self, tok: &Tok, wanted: &str) -> PResult<T> {
        Err(Diagnostic::at(
            self.line(),
            format!("expected {wanted}, found {}", tok.describe()),
        ))
    }

    fn expect(&mut self, want: Tok) -> PResult<()> {
        let line = self.line();
        let t = self.next()?;
        if t == want {
            Ok(())
        } else {
            Err(Diagnostic::at(
                line,
                format!("expected {}, found {}", want.describe(), t.describe()),
            ))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        let line = self.line();
        match self.next()? {
            Tok::Ident(s) => Ok(s),
            t => Err(Diagnostic::at(
                line,
                format!("expected identifier, found {}", t.describe()),
            )),
        }
    }

    fn string(&mut self) -> PResult<String> {
        let line = self.line();
        match self.next()? {
            Tok::Str(s) => Ok(s),
            t => Err(Diagnostic::at(
                line,
                format!("expected string literal, found {}", t.describe()),
            )),
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn paren_ident(&mut self) -> PResult<String> {
        self.expect(Tok::LParen)?;
        let id = self.ident()?;
        self.expect(Tok::RParen)?;
        Ok(id)
    }

    fn paren_args(&mut self) -> PResult<Vec<Tok>> {
        self.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok(args);
        }
        loop {
            let line = self.line();
            match self.next()? {
                t @ (Tok::Ident(_) | Tok::Num(_)) => args.push(t),
                t => {
                    return Err(Diagnostic::at(
                        line,
                        format!("expected argument, found {}", t.describe()),
                    ))
                }
            }
            if self.eat(&Tok::RParen) {
                return Ok(args);
            }
            self.expect(Tok::Comma)?;
        }
    }

    fn url_part(&mut self) -> PResult<UrlPart> {
        let line = self.line();
        match self.next()? {
            Tok::Str(s) => Ok(UrlPart::Literal(s)),
            Tok::Ident(kw) if kw == "resource" && self.peek() == Some(&Tok::LParen) => {
                Ok(UrlPart::Resource(self.paren_ident()?))
            }
            Tok::Ident(v) => Ok(UrlPart::Var(v)),
            t => Err(Diagnostic::at(
                line,
                format!("expected URL part, found {}", t.describe()),
            )),
        }
    }

    fn stmt(&mut self, instrumented: bool) -> PResult<Stmt> {
        let line = self.line();
        let head = self.ident()?;
        let stmt = if self.peek() == Some(&Tok::LParen) {
            self.call_form(head, instrumented, line)?
        } else {
            match head.as_str() {
                "let" => {
                    let var = self.ident()?;
                    self.expect(Tok::Eq)?;
                    let line = self.line();
                    match self.next()? {
                        Tok::Str(s) => Stmt::DefineStatic {
                            var,
                            source: StaticSource::Literal(s),
                        },
                        Tok::Ident(f) => {
                            let arg = self.paren_ident()?;
                            match f.as_str() {
                                "resource" => Stmt::DefineStatic {
                                    var,
                                    source: StaticSource::Resource(arg),
                                },
                                "setting" => Stmt::DefineStatic {
                                    var,
                                    source: StaticSource::Setting(arg),
                                },
                                "input" => Stmt::DefineDynamic { var, tag: arg },
                                other => {
                                    return Err(Diagnostic::at(
                                        line,
                                        format!(
                                            "unknown value source `{other}` (expected resource, setting or input)"
                                        ),
                                    ))
                                }
                            }
                        }
                        t => return self.unexpected(&t, "string literal or value source"),
                    }
                }
                "url" => {
                    let url = self.ident()?;
                    self.expect(Tok::Eq)?;
                    let mut parts = vec![self.url_part()?];
                    while self.eat(&Tok::Plus) {
                        parts.push(self.url_part()?);
                    }
                    Stmt::BuildUrl { url, parts }
                }
                "call" => Stmt::Call(self.ident()?),
                "asynccall" => Stmt::AsyncCall(self.ident()?),
                "goto" => Stmt::Transition(self.ident()?),
                other => return Err(Diagnostic::at(line, format!("unknown statement `{other}`"))),
            }
        };
        self.eat(&Tok::Semi);
        Ok(stmt)
    }

    fn call_form(&mut self, head: String, instrumented: bool, line: usize) -> PResult<Stmt> {
        let args = self.paren_args()?;
        let pseudo = matches!(
            head.as_str(),
            "send_definition" | "trigger_prefetch" | "fetch_from_proxy"
        );
        if pseudo && !instrumented {
            return Err(Diagnostic::at(
                line,
                format!("`{head}` is only allowed in an instrumented app"),
            ));
        }
        let idents = |args: &[Tok]| -> PResult<Vec<String>> {
            args.iter()
                .map(|a| match a {
                    Tok::Ident(s) => Ok(s.clone()),
                    t => Err(Diagnostic::at(
                        line,
                        format!("expected identifier argument, found {}", t.describe()),
                    )),
                })
                .collect()
        };
        let arity = |n: usize| -> PResult<()> {
            if args.len() == n {
                Ok(())
            } else {
                Err(Diagnostic::at(
                    line,
                    format!("`{head}` takes {n} argument(s), got {}", args.len()),
                ))
            }
        };
        match head.as_str() {
            "send_definition" => {
                arity(3)?;
                let names = idents(&args[..2])?;
                let m = match &args[2] {
                    Tok::Num(n) if *n >= 1 => *n as usize,
                    _ => return Err(Diagnostic::at(line, "part index must be a number >= 1")),
                };
                Ok(Stmt::SendDefinition {
                    var: names[0].clone(),
                    url: names[1].clone(),
                    m,
                })
            }
            "trigger_prefetch" => Ok(Stmt::TriggerPrefetch(idents(&args)?)),
            "fetch_from_proxy" => {
                arity(2)?;
                let names = idents(&args)?;
                Ok(Stmt::FetchFromProxy {
                    method: names[0].clone(),
                    url: names[1].clone(),
                })
            }
            _ => {
                arity(1)?;
                let names = idents(&args)?;
                Ok(Stmt::NetCall {
                    method: head,
                    url: names[0].clone(),
                })
            }
        }
    }

    fn body(&mut self, instrumented: bool, lines: &mut Vec<usize>) -> PResult<Vec<Stmt>> {
        self.expect(Tok::LBrace)?;
        let mut stmts = Vec::new();
        loop {
            match self.peek() {
                Some(Tok::RBrace) => {
                    self.pos += 1;
                    return Ok(stmts);
                }
                Some(Tok::Semi) => {
                    self.pos += 1;
                }
                Some(_) => {
                    lines.push(self.line());
                    stmts.push(self.stmt(instrumented)?);
                }
                None => {
                    return Err(Diagnostic::at(self.last_line, "unclosed `{`"));
                }
            }
        }
    }

    fn ccfg(&mut self, app: &mut App, lines: &mut SourceLines) -> PResult<()> {
        self.expect(Tok::LBrace)?;
        loop {
            match self.peek() {
                Some(Tok::RBrace) => {
                    self.pos += 1;
                    return Ok(());
                }
                Some(Tok::Semi) => {
                    self.pos += 1;
                }
                Some(Tok::Ident(kw))
                    if kw == "wait" && matches!(self.peek2(), Some(Tok::Ident(_))) =>
                {
                    self.pos += 1;
                    lines.waits.push(self.line());
                    let w = self.ident()?;
                    app.ccfg.waits.push(w);
                }
                Some(_) => {
                    let line = self.line();
                    let mut from = self.ident()?;
                    self.expect(Tok::Arrow)?;
                    loop {
                        let to = self.ident()?;
                        lines.edges.push(line);
                        app.ccfg.edges.push((from, to.clone()));
                        if !self.eat(&Tok::Arrow) {
                            break;
                        }
                        from = to;
                    }
                }
                None => return Err(Diagnostic::at(self.last_line, "unclosed `ccfg {`")),
            }
        }
    }

    fn app(&mut self, lines: &mut SourceLines) -> PResult<App> {
        let mut app = App::default();
        match self.peek() {
            Some(Tok::Ident(kw)) if kw == "app" => {
                self.pos += 1;
            }
            Some(t) => {
                let t = t.clone();
                return self.unexpected(&t, "`app <name>` header");
            }
            None => return Err(Diagnostic::at(1, "missing `app <name>` header")),
        }
        app.name = self.ident()?;
        if matches!(self.peek(), Some(Tok::Ident(s)) if s == "instrumented") {
            self.pos += 1;
            app.instrumented = true;
        }
        let mut callbacks: Vec<(Body, usize, Vec<usize>)> = Vec::new();
        let mut methods: Vec<(Body, usize, Vec<usize>)> = Vec::new();
        let mut resources = BTreeMap::new();
        let mut settings = BTreeMap::new();
        while let Some(tok) = self.peek().cloned() {
            let line = self.line();
            let kw = match tok {
                Tok::Ident(kw) => kw,
                Tok::Semi => {
                    self.pos += 1;
                    continue;
                }
                t => return self.unexpected(&t, "top-level declaration"),
            };
            self.pos += 1;
            match kw.as_str() {
                "resource" | "setting" => {
                    let key = self.ident()?;
                    self.expect(Tok::Eq)?;
                    let value = self.string()?;
                    let map = if kw == "resource" {
                        &mut resources
                    } else {
                        &mut settings
                    };
                    if map.insert(key.clone(), value).is_some() {
                        return Err(Diagnostic::at(line, format!("duplicate {kw} `{key}`")));
                    }
                }
                "netmethod" => {
                    let name = self.ident()?;
                    let l = self.ident()?;
                    if l != "latency" {
                        return Err(Diagnostic::at(line, "expected `latency=<ms>`"));
                    }
                    self.expect(Tok::Eq)?;
                    let latency_ms = match self.next()? {
                        Tok::Num(n) => n,
                        t => return self.unexpected(&t, "latency in milliseconds"),
                    };
                    lines.netmethods.push(line);
                    app.netlib.push(NetMethodDecl { name, latency_ms });
                }
                "callback" | "method" => {
                    let name = self.ident()?;
                    let mut stmt_lines = Vec::new();
                    let stmts = self.body(app.instrumented, &mut stmt_lines)?;
                    let entry = (Body { name, stmts }, line, stmt_lines);
                    if kw == "callback" {
                        callbacks.push(entry);
                    } else {
                        methods.push(entry);
                    }
                }
                "ccfg" => self.ccfg(&mut app, lines)?,
                other => {
                    return Err(Diagnostic::at(
                        line,
                        format!("unknown declaration `{other}`"),
                    ))
                }
            }
        }
        app.resources = resources;
        app.settings = settings;
        // Line tables follow program order: callbacks, then helper methods.
        for (body, line, stmt_lines) in callbacks {
            lines.bodies.push(line);
            lines.stmts.push(stmt_lines);
            app.callbacks.push(body);
        }
        for (body, line, stmt_lines) in methods {
            lines.bodies.push(line);
            lines.stmts.push(stmt_lines);
            app.methods.push(body);
        }
        Ok(app)
    }
}

/// Parses `.papp` source into a validated [`App`].
pub fn parse_app(text: &str) -> Result<App, ParseError> {
    let toks = lex(text).map_err(|d| ParseError::new(vec![d]))?;
    let last_line = toks.last().map(|(_, l)| *l).unwrap_or(1);
    let mut parser = Parser {
        toks,
        pos: 0,
        last_line,
    };
    let mut lines = SourceLines::default();
    let app = parser
        .app(&mut lines)
        .map_err(|d| ParseError::new(vec![d]))?;
    validate_with(&app, &|loc| lines.line(loc)).map_err(ParseError::new)?;
    Ok(app)
}
