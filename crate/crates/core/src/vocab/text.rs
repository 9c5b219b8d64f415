//! Surface text of spatial answers.
//!
//! ```text
//! sequence := group*
//! group    := open item* close
//! open     := "<seg>" | "<box>" | "<line>" | "<point>"
//! close    := "</seg>" | "</box>" | "</line>" | "</point>"
//! item     := grid | off | del
//! grid     := "<grid_" uint "_" uint ">"
//! off      := ("<OFF_" | "[OFF_") sint "_" sint (">" | "]")
//! del      := "<DELETE>"
//! ```
//!
//! Whitespace between tokens is ignored. Offsets pair with the grid tokens of
//! their group in order; canonical output writes each offset right after its
//! grid token. A group may also carry offsets alone, which is how a
//! refinement turn answers a proposal.

use std::fmt;

use thiserror::Error;

use super::grid::{Delta, GridGeometry, GridToken, OffsetToken};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupKind {
    Seg,
    Box,
    Line,
    Point,
}

impl GroupKind {
    pub const ALL: [GroupKind; 4] = [GroupKind::Seg, GroupKind::Box, GroupKind::Line, GroupKind::Point];

    pub fn tag(self) -> &'static str {
        match self {
            GroupKind::Seg => "seg",
            GroupKind::Box => "box",
            GroupKind::Line => "line",
            GroupKind::Point => "point",
        }
    }

    fn from_tag(tag: &str) -> Option<GroupKind> {
        GroupKind::ALL.into_iter().find(|k| k.tag() == tag)
    }

    /// Required token count for fixed-arity groups.
    fn arity(self) -> Option<usize> {
        match self {
            GroupKind::Box => Some(2),
            GroupKind::Point => Some(1),
            GroupKind::Seg | GroupKind::Line => None,
        }
    }
}

/// One tagged group of a spatial answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    kind: GroupKind,
    grids: Vec<GridToken>,
    offsets: Vec<OffsetToken>,
}

impl Group {
    /// Validates arity: offsets are either absent, one per grid token, or
    /// stand alone; boxes hold two tokens of each present kind and points one.
    pub fn new(
        kind: GroupKind,
        grids: Vec<GridToken>,
        offsets: Vec<OffsetToken>,
    ) -> Result<Group, ParseErrorKind> {
        if !grids.is_empty() && !offsets.is_empty() && grids.len() != offsets.len() {
            return Err(ParseErrorKind::Arity(format!(
                "{} grid tokens but {} offsets in <{}>",
                grids.len(),
                offsets.len(),
                kind.tag()
            )));
        }
        if let Some(k) = kind.arity() {
            let count = grids.len().max(offsets.len());
            if count != k {
                return Err(ParseErrorKind::Arity(format!(
                    "<{}> needs {k} tokens, found {count}",
                    kind.tag()
                )));
            }
        }
        Ok(Group {
            kind,
            grids,
            offsets,
        })
    }

    pub fn seg(grids: Vec<GridToken>) -> Group {
        Group {
            kind: GroupKind::Seg,
            grids,
            offsets: Vec::new(),
        }
    }

    pub fn line(grids: Vec<GridToken>) -> Group {
        Group {
            kind: GroupKind::Line,
            grids,
            offsets: Vec::new(),
        }
    }

    pub fn bbox(tl: GridToken, br: GridToken) -> Group {
        Group {
            kind: GroupKind::Box,
            grids: vec![tl, br],
            offsets: Vec::new(),
        }
    }

    pub fn point(t: GridToken) -> Group {
        Group {
            kind: GroupKind::Point,
            grids: vec![t],
            offsets: Vec::new(),
        }
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn grids(&self) -> &[GridToken] {
        &self.grids
    }

    pub fn offsets(&self) -> &[OffsetToken] {
        &self.offsets
    }

    /// Grid tokens paired with their offsets, `None` when the group has no offsets.
    pub fn anchors(&self) -> impl Iterator<Item = (GridToken, Option<OffsetToken>)> + '_ {
        self.grids
            .iter()
            .enumerate()
            .map(|(i, &g)| (g, self.offsets.get(i).copied()))
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>", self.kind.tag())?;
        if self.grids.is_empty() {
            for o in &self.offsets {
                write!(f, "{o}")?;
            }
        } else {
            for (g, o) in self.anchors() {
                write!(f, "{g}")?;
                if let Some(o) = o {
                    write!(f, "{o}")?;
                }
            }
        }
        write!(f, "</{}>", self.kind.tag())
    }
}

/// Ordered list of tagged groups.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SpatialSequence {
    pub groups: Vec<Group>,
}

impl SpatialSequence {
    pub fn new(groups: Vec<Group>) -> Self {
        Self { groups }
    }

    pub fn groups_of(&self, kind: GroupKind) -> impl Iterator<Item = &Group> + '_ {
        self.groups.iter().filter(move |g| g.kind == kind)
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

impl fmt::Display for SpatialSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for g in &self.groups {
            write!(f, "{g}")?;
        }
        Ok(())
    }
}

pub fn serialize(s: &SpatialSequence) -> String {
    s.to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("malformed token `{0}`")]
    MalformedToken(String),
    #[error("index out of range: ({row}, {col}) on a {n}x{n} grid")]
    IndexOutOfRange { row: u32, col: u32, n: u32 },
    #[error("unexpected text `{0}`")]
    UnexpectedText(String),
    #[error("token `{0}` outside any group")]
    StrayToken(String),
    #[error("unpaired wrapper `{0}`")]
    UnpairedWrapper(String),
    #[error("group <{0}> is never closed")]
    UnclosedGroup(&'static str),
    #[error("nested group `{0}`")]
    NestedGroup(String),
    #[error("{0}")]
    Arity(String),
}

/// Parse failure with the byte offset where it was detected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("at byte {position}: {kind}")]
pub struct ParseError {
    pub position: usize,
    pub kind: ParseErrorKind,
}

enum Token {
    Grid(GridToken),
    Offset(OffsetToken),
    Open(GroupKind),
    Close(GroupKind),
}

fn lex_token(raw: &str, n: u32) -> Result<Token, ParseErrorKind> {
    let malformed = || ParseErrorKind::MalformedToken(raw.to_string());
    if raw == "<DELETE>" {
        return Ok(Token::Offset(OffsetToken::Delete));
    }
    let (open, body, close) = (&raw[..1], &raw[1..raw.len() - 1], &raw[raw.len() - 1..]);
    if let Some(rest) = body.strip_prefix("OFF_") {
        if !matches!((open, close), ("<", ">") | ("[", "]")) {
            return Err(malformed());
        }
        let (du, dv) = rest.split_once('_').ok_or_else(malformed)?;
        let du: i8 = parse_signed(du).ok_or_else(malformed)?;
        let dv: i8 = parse_signed(dv).ok_or_else(malformed)?;
        return Delta::new(du, dv)
            .map(|d| Token::Offset(OffsetToken::Move(d)))
            .ok_or_else(malformed);
    }
    if open != "<" || close != ">" {
        return Err(malformed());
    }
    if let Some(rest) = body.strip_prefix("grid_") {
        let (r, c) = rest.split_once('_').ok_or_else(malformed)?;
        let row = parse_unsigned(r).ok_or_else(malformed)?;
        let col = parse_unsigned(c).ok_or_else(malformed)?;
        if row >= n || col >= n {
            return Err(ParseErrorKind::IndexOutOfRange { row, col, n });
        }
        return Ok(Token::Grid(GridToken::new(row, col)));
    }
    if let Some(tag) = body.strip_prefix('/') {
        return GroupKind::from_tag(tag).map(Token::Close).ok_or_else(malformed);
    }
    GroupKind::from_tag(body).map(Token::Open).ok_or_else(malformed)
}

fn parse_unsigned(s: &str) -> Option<u32> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

fn parse_signed(s: &str) -> Option<i8> {
    let digits = s.strip_prefix('-').unwrap_or(s);
    if digits.is_empty() || digits.len() > 2 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

/// Parses a single `<grid_I_J>` token.
pub fn parse_grid_token(raw: &str, geometry: &GridGeometry) -> Result<GridToken, ParseErrorKind> {
    match lex_raw(raw, geometry.n())? {
        Token::Grid(t) => Ok(t),
        _ => Err(ParseErrorKind::MalformedToken(raw.to_string())),
    }
}

/// Parses a single offset or `<DELETE>` token, in either bracket spelling.
pub fn parse_offset_token(raw: &str) -> Result<OffsetToken, ParseErrorKind> {
    match lex_raw(raw, 0)? {
        Token::Offset(o) => Ok(o),
        _ => Err(ParseErrorKind::MalformedToken(raw.to_string())),
    }
}

fn lex_raw(raw: &str, n: u32) -> Result<Token, ParseErrorKind> {
    let raw = raw.trim();
    if raw.len() < 2 || !raw.is_ascii() {
        return Err(ParseErrorKind::MalformedToken(raw.to_string()));
    }
    lex_token(raw, n)
}

struct OpenGroup {
    kind: GroupKind,
    position: usize,
    grids: Vec<GridToken>,
    offsets: Vec<OffsetToken>,
}

/// Parses answer text against a grid. Indices must lie inside the grid.
pub fn parse(text: &str, geometry: &GridGeometry) -> Result<SpatialSequence, ParseError> {
    let n = geometry.n();
    let bytes = text.as_bytes();
    let mut groups = Vec::new();
    let mut open: Option<OpenGroup> = None;
    let mut i = 0;

    while i < bytes.len() {
        let b = bytes[i];
        if b.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let err = |kind| ParseError { position: i, kind };
        let closer = match b {
            b'<' => b'>',
            b'[' => b']',
            _ => {
                let end = text[i..]
                    .find(|c: char| c == '<' || c == '[' || c.is_whitespace())
                    .map_or(text.len(), |e| i + e);
                return Err(err(ParseErrorKind::UnexpectedText(text[i..end].to_string())));
            }
        };
        // Either bracket may close a token so that `<OFF_0_0]` is reported as malformed.
        let Some(len) = bytes[i + 1..]
            .iter()
            .position(|&c| c == closer || c == b'>' || c == b']' || c == b'<' || c == b'[')
        else {
            return Err(err(ParseErrorKind::MalformedToken(text[i..].to_string())));
        };
        let end = i + 1 + len;
        if bytes[end] == b'<' || bytes[end] == b'[' {
            return Err(err(ParseErrorKind::MalformedToken(text[i..end].to_string())));
        }
        let raw = &text[i..=end];
        let token = lex_token(raw, n).map_err(err)?;

        match token {
            Token::Open(kind) => {
                if open.is_some() {
                    return Err(err(ParseErrorKind::NestedGroup(raw.to_string())));
                }
                open = Some(OpenGroup {
                    kind,
                    position: i,
                    grids: Vec::new(),
                    offsets: Vec::new(),
                });
            }
            Token::Close(kind) => match open.take() {
                Some(g) if g.kind == kind => {
                    let group = Group::new(kind, g.grids, g.offsets).map_err(|kind| ParseError {
                        position: g.position,
                        kind,
                    })?;
                    groups.push(group);
                }
                _ => return Err(err(ParseErrorKind::UnpairedWrapper(raw.to_string()))),
            },
            Token::Grid(t) => match open.as_mut() {
                Some(g) => g.grids.push(t),
                None => return Err(err(ParseErrorKind::StrayToken(raw.to_string()))),
            },
            Token::Offset(o) => match open.as_mut() {
                Some(g) => g.offsets.push(o),
                None => return Err(err(ParseErrorKind::StrayToken(raw.to_string()))),
            },
        }
        i = end + 1;
    }

    if let Some(g) = open {
        return Err(ParseError {
            position: g.position,
            kind: ParseErrorKind::UnclosedGroup(g.kind.tag()),
        });
    }
    Ok(SpatialSequence { groups })
}
