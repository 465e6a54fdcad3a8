//! Line-oriented `.twn` netlist parser.
//!
//! ```text
//! circuit <name> [fluid|electrical]
//! source <id> [kind]          sink <id> [kind]          segment <id> [kind]
//! actuator <id> [follows <segment>]
//! manual <id>
//! checkvalve <id> : <from> -> <to>
//! param <id> real [<default> [<unit>]]
//! connect <id> (-- <id>)+     usual flow from left to right
//! link <id> (-- <id>)+        no usual flow direction
//! layout <id> <x> <y> [<x> <y>]*
//! # comment
//! ```
//!
//! In a chain, consecutive segments are joined directly and consecutive
//! devices sit in series between the surrounding segments.

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use super::{CircuitGraph, Device, DeviceKind, Edge, LayoutHint, ParamDecl, Role, Segment, SegmentKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("expected circuit header")]
    ExpectedHeader,
    #[error("circuit header declared twice")]
    DuplicateHeader,
    #[error("unknown statement `{0}`")]
    UnknownStatement(String),
    #[error("expected {expected}, found {found}")]
    Unexpected { expected: String, found: String },
    #[error("invalid identifier `{0}`")]
    InvalidIdentifier(String),
    #[error("duplicate identifier `{0}`")]
    Duplicate(String),
    #[error("unknown identifier `{0}`")]
    Dangling(String),
    #[error("invalid number `{0}`")]
    InvalidNumber(String),
    #[error("chain must start and end with a segment, found device `{0}`")]
    ChainEndsWithDevice(String),
    #[error("device `{0}` is already used in another connection")]
    DeviceReused(String),
    #[error("`follows` must name a segment, `{0}` is not one")]
    FollowsNonSegment(String),
}

/// Syntax or resolution error, reported as `file:line:col: message`.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ParseError {
    pub file: Option<String>,
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let file = self.file.as_deref().unwrap_or("<input>");
        write!(f, "{}:{}:{}: {}", file, self.line, self.col, self.kind)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Sep,
    Arrow,
    Colon,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Word(w) => write!(f, "`{w}`"),
            Tok::Sep => f.write_str("`--`"),
            Tok::Arrow => f.write_str("`->`"),
            Tok::Colon => f.write_str("`:`"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    col: usize,
}

fn lex(line: &str) -> Vec<Token> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '#' {
            break;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let col = i + 1;
        let next = chars.get(i + 1).copied();
        if c == '-' && next == Some('-') {
            out.push(Token { tok: Tok::Sep, col });
            i += 2;
        } else if c == '-' && next == Some('>') {
            out.push(Token { tok: Tok::Arrow, col });
            i += 2;
        } else if c == ':' {
            out.push(Token { tok: Tok::Colon, col });
            i += 1;
        } else {
            let start = i;
            while i < chars.len() {
                let c = chars[i];
                let next = chars.get(i + 1).copied();
                if c.is_whitespace() || c == ':' || c == '#' {
                    break;
                }
                if i > start && c == '-' && matches!(next, Some('-') | Some('>')) {
                    break;
                }
                i += 1;
            }
            out.push(Token {
                tok: Tok::Word(chars[start..i].iter().collect()),
                col,
            });
        }
    }
    out
}

fn is_identifier(word: &str) -> bool {
    let mut chars = word.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Declared {
    Segment(usize),
    Device(usize),
    Param,
}

struct Parser {
    file: Option<String>,
    line: usize,
    graph: Option<CircuitGraph>,
    names: HashMap<String, Declared>,
    used_devices: HashSet<String>,
}

/// Parse a netlist. Errors are reported against `<input>`.
pub fn parse_netlist(text: &str) -> Result<CircuitGraph, ParseError> {
    parse_netlist_named(text, None)
}

/// Parse a netlist, naming `file` in error positions.
pub fn parse_netlist_named(text: &str, file: Option<&str>) -> Result<CircuitGraph, ParseError> {
    let mut p = Parser {
        file: file.map(str::to_owned),
        line: 0,
        graph: None,
        names: HashMap::new(),
        used_devices: HashSet::new(),
    };
    for (idx, line) in text.lines().enumerate() {
        p.line = idx + 1;
        let tokens = lex(line);
        if tokens.is_empty() {
            continue;
        }
        p.statement(&tokens)?;
    }
    p.graph.ok_or(ParseError {
        file: p.file,
        line: p.line.max(1),
        col: 1,
        kind: ParseErrorKind::ExpectedHeader,
    })
}

impl Parser {
    fn err(&self, col: usize, kind: ParseErrorKind) -> ParseError {
        ParseError {
            file: self.file.clone(),
            line: self.line,
            col,
            kind,
        }
    }

    fn unexpected(&self, tokens: &[Token], at: usize, expected: &str) -> ParseError {
        match tokens.get(at) {
            Some(t) => self.err(
                t.col,
                ParseErrorKind::Unexpected {
                    expected: expected.into(),
                    found: t.tok.to_string(),
                },
            ),
            None => {
                let col = tokens.last().map(|t| t.col + 1).unwrap_or(1);
                self.err(
                    col,
                    ParseErrorKind::Unexpected {
                        expected: expected.into(),
                        found: "end of line".into(),
                    },
                )
            }
        }
    }

    fn word<'t>(&self, tokens: &'t [Token], at: usize, expected: &str) -> Result<(&'t str, usize), ParseError> {
        match tokens.get(at) {
            Some(Token { tok: Tok::Word(w), col }) => Ok((w.as_str(), *col)),
            _ => Err(self.unexpected(tokens, at, expected)),
        }
    }

    fn ident<'t>(&self, tokens: &'t [Token], at: usize) -> Result<(&'t str, usize), ParseError> {
        let (w, col) = self.word(tokens, at, "identifier")?;
        if !is_identifier(w) {
            return Err(self.err(col, ParseErrorKind::InvalidIdentifier(w.into())));
        }
        Ok((w, col))
    }

    fn number(&self, tokens: &[Token], at: usize) -> Result<f64, ParseError> {
        let (w, col) = self.word(tokens, at, "number")?;
        w.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.err(col, ParseErrorKind::InvalidNumber(w.into())))
    }

    fn end(&self, tokens: &[Token], at: usize) -> Result<(), ParseError> {
        if at < tokens.len() {
            Err(self.unexpected(tokens, at, "end of line"))
        } else {
            Ok(())
        }
    }

    fn graph(&mut self) -> &mut CircuitGraph {
        self.graph.as_mut().expect("header checked before declarations")
    }

    fn declare(&mut self, id: &str, col: usize, what: Declared) -> Result<(), ParseError> {
        if self.names.contains_key(id) {
            return Err(self.err(col, ParseErrorKind::Duplicate(id.into())));
        }
        self.names.insert(id.to_owned(), what);
        if !matches!(what, Declared::Param) {
            self.graph().declaration_order.push(id.to_owned());
        }
        Ok(())
    }

    fn statement(&mut self, tokens: &[Token]) -> Result<(), ParseError> {
        let (keyword, col) = match &tokens[0] {
            Token { tok: Tok::Word(w), col } => (w.as_str(), *col),
            t => return Err(self.unexpected(tokens, 0, &format!("statement, not {}", t.tok))),
        };
        if self.graph.is_none() && keyword != "circuit" {
            return Err(self.err(col, ParseErrorKind::ExpectedHeader));
        }
        match keyword {
            "circuit" => self.header(tokens),
            "source" => self.segment(tokens, Role::Input),
            "sink" => self.segment(tokens, Role::Output),
            "segment" => self.segment(tokens, Role::InternalVariable),
            "actuator" => self.actuator(tokens),
            "manual" => self.manual(tokens),
            "checkvalve" => self.checkvalve(tokens),
            "param" => self.param(tokens),
            "connect" => self.chain(tokens, true),
            "link" => self.chain(tokens, false),
            "layout" => self.layout(tokens),
            other => Err(self.err(col, ParseErrorKind::UnknownStatement(other.into()))),
        }
    }

    fn header(&mut self, tokens: &[Token]) -> Result<(), ParseError> {
        if self.graph.is_some() {
            return Err(self.err(tokens[0].col, ParseErrorKind::DuplicateHeader));
        }
        let (name, _) = self.ident(tokens, 1)?;
        let mut kind = SegmentKind::Fluid;
        let mut at = 2;
        if let Some(Token { tok: Tok::Word(w), col }) = tokens.get(2) {
            kind = SegmentKind::from_keyword(w).ok_or_else(|| {
                self.err(
                    *col,
                    ParseErrorKind::Unexpected {
                        expected: "circuit kind".into(),
                        found: format!("`{w}`"),
                    },
                )
            })?;
            at = 3;
        }
        self.end(tokens, at)?;
        self.graph = Some(CircuitGraph {
            name: name.into(),
            kind,
            segments: Vec::new(),
            devices: Vec::new(),
            edges: Vec::new(),
            params: Vec::new(),
            declaration_order: Vec::new(),
        });
        Ok(())
    }

    fn segment(&mut self, tokens: &[Token], role: Role) -> Result<(), ParseError> {
        let (id, col) = self.ident(tokens, 1)?;
        let mut kind = self.graph().kind;
        let mut at = 2;
        if let Some(Token { tok: Tok::Word(w), col }) = tokens.get(2) {
            kind = SegmentKind::from_keyword(w).ok_or_else(|| {
                self.err(
                    *col,
                    ParseErrorKind::Unexpected {
                        expected: "segment kind".into(),
                        found: format!("`{w}`"),
                    },
                )
            })?;
            at = 3;
        }
        self.end(tokens, at)?;
        let index = self.graph().segments.len();
        self.declare(id, col, Declared::Segment(index))?;
        self.graph().segments.push(Segment {
            id: id.into(),
            role,
            kind,
            memoryless: kind == SegmentKind::Signal,
            display: None,
        });
        Ok(())
    }

    fn push_device(&mut self, id: &str, col: usize, device: Device) -> Result<(), ParseError> {
        let index = self.graph().devices.len();
        self.declare(id, col, Declared::Device(index))?;
        self.graph().devices.push(device);
        Ok(())
    }

    fn actuator(&mut self, tokens: &[Token]) -> Result<(), ParseError> {
        let (id, col) = self.ident(tokens, 1)?;
        let mut follows = None;
        let mut at = 2;
        if tokens.len() > 2 {
            let (kw, kw_col) = self.word(tokens, 2, "`follows`")?;
            if kw != "follows" {
                return Err(self.err(
                    kw_col,
                    ParseErrorKind::Unexpected {
                        expected: "`follows`".into(),
                        found: format!("`{kw}`"),
                    },
                ));
            }
            let (target, target_col) = self.ident(tokens, 3)?;
            match self.names.get(target) {
                Some(Declared::Segment(_)) => {}
                Some(_) => return Err(self.err(target_col, ParseErrorKind::FollowsNonSegment(target.into()))),
                None => return Err(self.err(target_col, ParseErrorKind::Dangling(target.into()))),
            }
            follows = Some(target.to_owned());
            at = 4;
        }
        self.end(tokens, at)?;
        self.push_device(
            id,
            col,
            Device {
                id: id.into(),
                kind: DeviceKind::Actuator,
                endpoints: None,
                allowed_direction: None,
                transparent: false,
                follows,
                display: None,
            },
        )
    }

    fn manual(&mut self, tokens: &[Token]) -> Result<(), ParseError> {
        let (id, col) = self.ident(tokens, 1)?;
        self.end(tokens, 2)?;
        self.push_device(
            id,
            col,
            Device {
                id: id.into(),
                kind: DeviceKind::ManualValve,
                endpoints: None,
                allowed_direction: None,
                transparent: true,
                follows: None,
                display: None,
            },
        )
    }

    fn checkvalve(&mut self, tokens: &[Token]) -> Result<(), ParseError> {
        let (id, col) = self.ident(tokens, 1)?;
        if !matches!(tokens.get(2).map(|t| &t.tok), Some(Tok::Colon)) {
            return Err(self.unexpected(tokens, 2, "`:`"));
        }
        let (from, _) = self.ident(tokens, 3)?;
        if !matches!(tokens.get(4).map(|t| &t.tok), Some(Tok::Arrow)) {
            return Err(self.unexpected(tokens, 4, "`->`"));
        }
        let (to, _) = self.ident(tokens, 5)?;
        self.end(tokens, 6)?;
        self.push_device(
            id,
            col,
            Device {
                id: id.into(),
                kind: DeviceKind::CheckValve,
                endpoints: None,
                allowed_direction: Some((from.into(), to.into())),
                transparent: false,
                follows: None,
                display: None,
            },
        )
    }

    fn param(&mut self, tokens: &[Token]) -> Result<(), ParseError> {
        let (id, col) = self.ident(tokens, 1)?;
        let (ty, ty_col) = self.word(tokens, 2, "`real`")?;
        if ty != "real" {
            return Err(self.err(
                ty_col,
                ParseErrorKind::Unexpected {
                    expected: "`real`".into(),
                    found: format!("`{ty}`"),
                },
            ));
        }
        let mut default = 0.0;
        let mut unit = None;
        let mut at = 3;
        if tokens.len() > 3 {
            default = self.number(tokens, 3)?;
            at = 4;
            if tokens.len() > 4 {
                let (u, _) = self.word(tokens, 4, "unit")?;
                unit = Some(u.to_owned());
                at = 5;
            }
        }
        self.end(tokens, at)?;
        self.declare(id, col, Declared::Param)?;
        self.graph().params.push(ParamDecl {
            id: id.into(),
            default,
            unit,
        });
        Ok(())
    }

    fn chain(&mut self, tokens: &[Token], directed: bool) -> Result<(), ParseError> {
        // collect ids separated by `--`
        let mut items: Vec<(String, usize, Declared)> = Vec::new();
        let mut at = 1;
        loop {
            let (id, col) = self.ident(tokens, at)?;
            let declared = match self.names.get(id) {
                Some(Declared::Param) | None => return Err(self.err(col, ParseErrorKind::Dangling(id.into()))),
                Some(d) => *d,
            };
            items.push((id.to_owned(), col, declared));
            at += 1;
            match tokens.get(at).map(|t| &t.tok) {
                None => break,
                Some(Tok::Sep) => at += 1,
                Some(_) => return Err(self.unexpected(tokens, at, "`--`")),
            }
        }
        if items.len() < 2 {
            return Err(self.unexpected(tokens, at, "`--`"));
        }
        for end in [items.first().unwrap(), items.last().unwrap()] {
            if let Declared::Device(_) = end.2 {
                return Err(self.err(end.1, ParseErrorKind::ChainEndsWithDevice(end.0.clone())));
            }
        }

        let mut from = items[0].0.clone();
        let mut devices: Vec<String> = Vec::new();
        let mut device_cols: Vec<usize> = Vec::new();
        for (id, col, declared) in items.into_iter().skip(1) {
            match declared {
                Declared::Device(_) => {
                    devices.push(id);
                    device_cols.push(col);
                }
                Declared::Segment(_) => {
                    for (dev, dcol) in devices.iter().zip(&device_cols) {
                        if !self.used_devices.insert(dev.clone()) {
                            return Err(self.err(*dcol, ParseErrorKind::DeviceReused(dev.clone())));
                        }
                        let ends = (from.clone(), id.clone());
                        if let Some(d) = self.graph().devices.iter_mut().find(|d| &d.id == dev) {
                            d.endpoints = Some(ends);
                        }
                    }
                    self.graph().edges.push(Edge {
                        from: std::mem::replace(&mut from, id.clone()),
                        to: id,
                        devices: std::mem::take(&mut devices),
                        directed,
                    });
                    device_cols.clear();
                }
                Declared::Param => unreachable!(),
            }
        }
        Ok(())
    }

    fn layout(&mut self, tokens: &[Token]) -> Result<(), ParseError> {
        let (id, col) = self.ident(tokens, 1)?;
        let x = self.number(tokens, 2)?;
        let y = self.number(tokens, 3)?;
        let mut path = Vec::new();
        let mut at = 4;
        while at < tokens.len() {
            let px = self.number(tokens, at)?;
            let py = self.number(tokens, at + 1)?;
            path.push((px, py));
            at += 2;
        }
        let hint = Some(LayoutHint { x, y, path });
        match self.names.get(id).copied() {
            Some(Declared::Segment(i)) => self.graph().segments[i].display = hint,
            Some(Declared::Device(i)) => self.graph().devices[i].display = hint,
            _ => return Err(self.err(col, ParseErrorKind::Dangling(id.into()))),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;

    #[test]
    fn circuit1_has_five_segments_and_two_devices() {
        let g = parse_netlist(bundled::CIRCUIT1).unwrap();
        assert_eq!(g.name, "circuit1");
        assert_eq!(g.segments.len(), 5);
        assert_eq!(g.devices.len(), 2);
        assert_eq!(g.edges.len(), 4);
        let e2 = g.device("E2").unwrap();
        assert_eq!(e2.endpoints, Some(("E1".into(), "E3".into())));
        assert_eq!(g.segment("E3").unwrap().display.as_ref().unwrap().x, 160.0);
    }

    #[test]
    fn empty_file_expects_header() {
        let err = parse_netlist("").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::ExpectedHeader);
        assert_eq!(err.to_string(), "<input>:1:1: expected circuit header");

        let err = parse_netlist("# just a comment\n\nsource A\n").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::ExpectedHeader);
        assert_eq!((err.line, err.col), (3, 1));
    }

    #[test]
    fn checkvalve_records_allowed_direction() {
        let g = parse_netlist(bundled::CIRCUIT2).unwrap();
        let cv = g.device("cv").unwrap();
        assert_eq!(cv.kind, DeviceKind::CheckValve);
        assert_eq!(cv.allowed_direction, Some(("G1".into(), "H1".into())));
        assert_eq!(cv.endpoints, Some(("G1".into(), "H1".into())));
        let edge = g.edges.iter().find(|e| e.devices.contains(&"cv".to_string())).unwrap();
        assert_eq!(edge.devices, ["G2", "cv"]);
    }

    #[test]
    fn compact_spelling_is_accepted() {
        let g = parse_netlist("circuit c\nsource a\nsink b\ncheckvalve v:a->b\nconnect a--v--b\n").unwrap();
        assert_eq!(g.edges[0].devices, ["v"]);
        assert_eq!(g.device("v").unwrap().allowed_direction, Some(("a".into(), "b".into())));
    }

    #[test]
    fn duplicate_identifier_reports_position() {
        let err = parse_netlist_named("circuit c\nsource a\nsink a\n", Some("dup.twn")).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::Duplicate("a".into()));
        assert_eq!(err.to_string(), "dup.twn:3:6: duplicate identifier `a`");
    }

    #[test]
    fn dangling_endpoint_is_an_error() {
        let err = parse_netlist("circuit c\nsource a\nconnect a -- b\n").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::Dangling("b".into()));
        assert_eq!((err.line, err.col), (3, 14));
    }

    #[test]
    fn chain_cannot_end_on_a_device() {
        let err = parse_netlist("circuit c\nsource a\nactuator v\nconnect a -- v\n").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::ChainEndsWithDevice("v".into()));
    }

    #[test]
    fn device_used_twice_is_rejected() {
        let src = "circuit c\nsource a\nsink b\nsink d\nactuator v\nconnect a -- v -- b\nconnect a -- v -- d\n";
        let err = parse_netlist(src).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::DeviceReused("v".into()));
        assert_eq!(err.line, 7);
    }

    #[test]
    fn signal_segments_are_memoryless() {
        let g = parse_netlist(bundled::CIS).unwrap();
        let mfia = g.segment("MFIA_out").unwrap();
        assert_eq!(mfia.kind, SegmentKind::Signal);
        assert!(mfia.memoryless);
        assert!(!g.segment("Gm").unwrap().memoryless);
        let p = g.param("SP_Furnace").unwrap();
        assert_eq!(p.default, 100.0);
        assert_eq!(p.unit.as_deref(), Some("degC"));
    }

    #[test]
    fn follows_must_name_a_declared_segment() {
        let err = parse_netlist("circuit c\nactuator g follows X\n").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::Dangling("X".into()));
        let err = parse_netlist("circuit c\nactuator v\nactuator g follows v\n").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::FollowsNonSegment("v".into()));
    }

    #[test]
    fn bad_tokens() {
        let err = parse_netlist("circuit c\nsource 1a\n").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::InvalidIdentifier("1a".into()));
        let err = parse_netlist("circuit c\nvalve x\n").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnknownStatement("valve".into()));
        let err = parse_netlist("circuit c\nsource a\nlayout a 1 y\n").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::InvalidNumber("y".into()));
        let err = parse_netlist("circuit c\ncircuit d\n").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::DuplicateHeader);
        let err = parse_netlist("circuit c\nsource a\nsink b\nconnect a b\n").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::Unexpected { .. }));
    }

    #[test]
    fn layout_with_path_points() {
        let g = parse_netlist("circuit c\nsource a\nlayout a 1 2 3 4 -5.5 6\n").unwrap();
        let hint = g.segment("a").unwrap().display.clone().unwrap();
        assert_eq!(hint.path, vec![(3.0, 4.0), (-5.5, 6.0)]);
    }
}
