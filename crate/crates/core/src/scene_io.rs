//! Text scene format.
//!
//! ```text
//! document   := "unisg" INT scene ;
//! scene      := "scene" STRING "{" meta* entity? "}" ;
//! meta       := IDENT "=" value ;
//! entity     := "entity" STRING "{" (component | entity | meta)* "}" ;
//! component  := ("info"|"trs"|"mesh"|"action") "{" (IDENT "=" value)* "}" ;
//! value      := STRING | NUMBER | "[" (NUMBER ("," NUMBER)*)? "]" ;
//! ```
//!
//! Entity meta keys are `id` (optional; missing ids are assigned after the
//! largest explicit one) and `category`. Component keys: `trs` takes
//! `form`, `coeffs`, `scale`; `mesh` takes `feature`; `action` takes
//! `type`, `params`, `refs`, `satisfied`. `#` starts a line comment.
//!
//! The serializer writes one item per line with two-space indentation,
//! every component on a single line.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::graph_export::{node_feature, node_table};
use crate::scene::{
    action_layout, ActionDataComponent, Component, EntityId, MeshFeatureComponent, MetaValue, Scene, TrsComponent,
    MESH_FEATURE_LEN,
};
use crate::xform::{Form, TransformRepr};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneDocument {
    pub format_version: u32,
    pub scene: Scene,
}

impl SceneDocument {
    pub fn new(scene: Scene) -> Self {
        SceneDocument {
            format_version: FORMAT_VERSION,
            scene,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub struct ParseError {
    pub pos: Pos,
    pub message: String,
    /// Secondary location, e.g. the first definition of a duplicate id.
    pub related: Option<(Pos, String)>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.pos, self.message)?;
        if let Some((p, m)) = &self.related {
            write!(f, " ({m} at {p})")?;
        }
        Ok(())
    }
}

impl ParseError {
    fn at(pos: Pos, message: impl Into<String>) -> Self {
        ParseError {
            pos,
            message: message.into(),
            related: None,
        }
    }

    /// Every position this error points at.
    pub fn positions(&self) -> Vec<Pos> {
        let mut v = vec![self.pos];
        v.extend(self.related.as_ref().map(|(p, _)| *p));
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Num(f64),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Eq,
    Comma,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Str(s) => write!(f, "string {s:?}"),
            Tok::Num(n) => write!(f, "number {n}"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: Pos,
    /// Column just past the token; tokens never span lines.
    end_col: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let single = match c {
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            '=' => Some(Tok::Eq),
            ',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Token { tok, pos, end_col: col + 1 });
            i += 1;
            col += 1;
            continue;
        }
        if c == '"' {
            let mut s = String::new();
            let mut j = i + 1;
            loop {
                match chars.get(j) {
                    None | Some('\n') => return Err(ParseError::at(pos, "unterminated string")),
                    Some('"') => break,
                    Some('\\') => {
                        let esc = match chars.get(j + 1) {
                            Some('"') => '"',
                            Some('\\') => '\\',
                            Some('n') => '\n',
                            Some('t') => '\t',
                            _ => {
                                let p = Pos {
                                    line,
                                    col: col + (j - i),
                                };
                                return Err(ParseError::at(p, "invalid escape sequence"));
                            }
                        };
                        s.push(esc);
                        j += 2;
                    }
                    Some(ch) => {
                        s.push(*ch);
                        j += 1;
                    }
                }
            }
            col += j + 1 - i;
            out.push(Token {
                tok: Tok::Str(s),
                pos,
                end_col: col,
            });
            i = j + 1;
            continue;
        }
        let word_char = |ch: char| ch.is_ascii_alphanumeric() || matches!(ch, '_' | '.' | '+' | '-');
        if c.is_ascii_digit() || matches!(c, '-' | '+' | '.') {
            let start = i;
            while i < chars.len() && word_char(chars[i]) {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            col += i - start;
            let n: f64 = s
                .parse()
                .map_err(|_| ParseError::at(pos, format!("malformed number `{s}`")))?;
            out.push(Token {
                tok: Tok::Num(n),
                pos,
                end_col: col,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                pos,
                end_col: col,
            });
            continue;
        }
        return Err(ParseError::at(pos, format!("unexpected character {c:?}")));
    }
    out.push(Token {
        tok: Tok::Eof,
        pos: Pos { line, col },
        end_col: col,
    });
    Ok(out)
}

/// First line whose indentation disagrees with the brace depth of the
/// canonical layout (two spaces per open brace).
fn first_indent_mismatch(tokens: &[Token]) -> Option<usize> {
    let mut depth: i64 = 0;
    let mut last_line = 0;
    for t in tokens {
        if t.tok == Tok::Eof {
            break;
        }
        if t.pos.line != last_line {
            last_line = t.pos.line;
            let expected = if t.tok == Tok::RBrace { depth - 1 } else { depth };
            if (t.pos.col as i64 - 1) != 2 * expected {
                return Some(t.pos.line);
            }
        }
        match t.tok {
            Tok::LBrace => depth += 1,
            Tok::RBrace => depth -= 1,
            _ => {}
        }
    }
    None
}

#[derive(Debug, Clone)]
enum Value {
    Str(String),
    Num(f64),
    List(Vec<f64>),
}

impl Value {
    fn describe(&self) -> &'static str {
        match self {
            Value::Str(_) => "a string",
            Value::Num(_) => "a number",
            Value::List(_) => "a list",
        }
    }
}

struct ParsedEntity {
    name: String,
    pos: Pos,
    id: Option<(u64, Pos)>,
    category: String,
    components: Vec<Component>,
    children: Vec<ParsedEntity>,
}

struct Parser {
    tokens: Vec<Token>,
    idx: usize,
}

/// Error that points at broken nesting rather than at a single token.
struct Structural(ParseError);

enum Failure {
    Plain(ParseError),
    Structural(Structural),
}

impl From<ParseError> for Failure {
    fn from(e: ParseError) -> Self {
        Failure::Plain(e)
    }
}

type PResult<T> = Result<T, Failure>;

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.idx]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.idx].clone();
        if t.tok != Tok::Eof {
            self.idx += 1;
        }
        t
    }

    /// A token missing at a line end is reported just past the previous
    /// token, with the token actually found as the related position.
    fn unexpected(&self, expected: &str) -> Failure {
        let t = self.peek();
        let mut err = ParseError::at(t.pos, format!("expected {expected}, found {}", t.tok));
        if let Some(prev) = self.idx.checked_sub(1).map(|i| &self.tokens[i]) {
            if prev.pos.line < t.pos.line && t.tok != Tok::Eof {
                err.pos = Pos {
                    line: prev.pos.line,
                    col: prev.end_col,
                };
                err.related = Some((t.pos, format!("found {}", t.tok)));
            }
        }
        if t.tok == Tok::Eof {
            Failure::Structural(Structural(err))
        } else {
            Failure::Plain(err)
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> PResult<Pos> {
        if self.peek().tok == tok {
            Ok(self.next().pos)
        } else {
            Err(self.unexpected(what))
        }
    }

    fn keyword(&mut self, kw: &str) -> PResult<Pos> {
        match &self.peek().tok {
            Tok::Ident(s) if s == kw => Ok(self.next().pos),
            _ => Err(self.unexpected(&format!("`{kw}`"))),
        }
    }

    fn string(&mut self) -> PResult<(String, Pos)> {
        match &self.peek().tok {
            Tok::Str(s) => {
                let s = s.clone();
                Ok((s, self.next().pos))
            }
            _ => Err(self.unexpected("a string")),
        }
    }

    fn number(&mut self) -> PResult<(f64, Pos)> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Num(n) => {
                self.next();
                Ok((*n, t.pos))
            }
            Tok::Ident(s) if matches!(s.as_str(), "inf" | "nan") => {
                self.next();
                Ok((if s == "inf" { f64::INFINITY } else { f64::NAN }, t.pos))
            }
            _ => Err(self.unexpected("a number")),
        }
    }

    fn value(&mut self) -> PResult<(Value, Pos)> {
        let pos = self.peek().pos;
        match &self.peek().tok {
            Tok::Str(_) => self.string().map(|(s, p)| (Value::Str(s), p)),
            Tok::LBracket => {
                self.next();
                let mut items = Vec::new();
                if self.peek().tok == Tok::RBracket {
                    self.next();
                    return Ok((Value::List(items), pos));
                }
                loop {
                    items.push(self.number()?.0);
                    match self.peek().tok {
                        Tok::Comma => {
                            self.next();
                        }
                        Tok::RBracket => {
                            self.next();
                            return Ok((Value::List(items), pos));
                        }
                        _ => return Err(self.unexpected("`,` or `]`")),
                    }
                }
            }
            _ => self
                .number()
                .map(|(n, p)| (Value::Num(n), p))
                .map_err(|_| self.unexpected("a string, number or list")),
        }
    }

    fn ident(&mut self) -> PResult<(String, Pos)> {
        match &self.peek().tok {
            Tok::Ident(s) => {
                let s = s.clone();
                Ok((s, self.next().pos))
            }
            _ => Err(self.unexpected("an identifier")),
        }
    }

    fn assignment(&mut self) -> PResult<(String, Pos, Value, Pos)> {
        let (key, kpos) = self.ident()?;
        self.expect(Tok::Eq, "`=`")?;
        let (v, vpos) = self.value()?;
        Ok((key, kpos, v, vpos))
    }

    fn document(&mut self) -> PResult<(u32, Scene, Option<ParsedEntity>)> {
        self.keyword("unisg")?;
        let (version, vpos) = self.number()?;
        if version != FORMAT_VERSION as f64 {
            return Err(ParseError::at(vpos, format!("unsupported format version {version}")).into());
        }
        self.keyword("scene")?;
        let (name, _) = self.string()?;
        self.expect(Tok::LBrace, "`{`")?;
        let mut scene = Scene::new(name);
        let mut meta_pos: HashMap<String, Pos> = HashMap::new();
        loop {
            match &self.peek().tok {
                Tok::Ident(s) if s == "entity" => break,
                Tok::RBrace => break,
                Tok::Ident(_) => {
                    let (key, kpos, v, _) = self.assignment()?;
                    if meta_pos.insert(key.clone(), kpos).is_some() {
                        return Err(ParseError::at(kpos, format!("duplicate scene key `{key}`")).into());
                    }
                    let v = match v {
                        Value::Str(s) => MetaValue::Str(s),
                        Value::Num(n) => MetaValue::Num(n),
                        Value::List(l) => MetaValue::List(l),
                    };
                    scene.meta.insert(key, v);
                }
                _ => return Err(self.unexpected("a scene key or `entity`")),
            }
        }
        let root = match self.peek().tok {
            Tok::RBrace => None,
            _ => Some(self.entity()?),
        };
        if self.peek().tok != Tok::RBrace {
            let (Failure::Plain(e) | Failure::Structural(Structural(e))) = self.unexpected("`}` closing the scene");
            return Err(Failure::Structural(Structural(e)));
        }
        self.next();
        if self.peek().tok != Tok::Eof {
            let (Failure::Plain(e) | Failure::Structural(Structural(e))) = self.unexpected("end of input");
            return Err(Failure::Structural(Structural(e)));
        }
        Ok((version as u32, scene, root))
    }

    fn entity(&mut self) -> PResult<ParsedEntity> {
        let pos = self.keyword("entity")?;
        let (name, _) = self.string()?;
        self.expect(Tok::LBrace, "`{`")?;
        let mut e = ParsedEntity {
            name,
            pos,
            id: None,
            category: String::new(),
            components: Vec::new(),
            children: Vec::new(),
        };
        let mut seen_category = false;
        loop {
            let t = self.peek().clone();
            match &t.tok {
                Tok::RBrace => {
                    self.next();
                    return Ok(e);
                }
                Tok::Ident(s) if s == "entity" => e.children.push(self.entity()?),
                Tok::Ident(s) if matches!(s.as_str(), "info" | "trs" | "mesh" | "action") => {
                    let c = self.component()?;
                    if e.components.iter().any(|x| x.kind() == c.kind()) {
                        return Err(ParseError::at(t.pos, format!("duplicate {} component", c.kind())).into());
                    }
                    e.components.push(c);
                }
                Tok::Ident(_) => {
                    let (key, kpos, v, vpos) = self.assignment()?;
                    match key.as_str() {
                        "id" => {
                            if e.id.is_some() {
                                return Err(ParseError::at(kpos, "duplicate key `id`").into());
                            }
                            let Value::Num(n) = v else {
                                return Err(ParseError::at(vpos, format!("`id` must be a number, found {}", v.describe())).into());
                            };
                            if n < 0.0 || n.fract() != 0.0 || n > u32::MAX as f64 {
                                return Err(ParseError::at(vpos, format!("invalid entity id {n}")).into());
                            }
                            e.id = Some((n as u64, vpos));
                        }
                        "category" => {
                            if seen_category {
                                return Err(ParseError::at(kpos, "duplicate key `category`").into());
                            }
                            let Value::Str(s) = v else {
                                return Err(ParseError::at(vpos, format!("`category` must be a string, found {}", v.describe())).into());
                            };
                            e.category = s;
                            seen_category = true;
                        }
                        other => {
                            return Err(ParseError::at(kpos, format!("unknown entity key `{other}` (expected `id` or `category`)")).into())
                        }
                    }
                }
                _ => return Err(self.unexpected("`entity`, a component, a key or `}`")),
            }
        }
    }

    fn component(&mut self) -> PResult<Component> {
        let (kind, kind_pos) = self.ident()?;
        self.expect(Tok::LBrace, "`{`")?;
        let mut fields: BTreeMap<String, (Value, Pos)> = BTreeMap::new();
        loop {
            if self.peek().tok == Tok::RBrace {
                self.next();
                break;
            }
            if !matches!(self.peek().tok, Tok::Ident(_)) {
                return Err(self.unexpected("a key or `}`"));
            }
            let (key, kpos, v, vpos) = self.assignment()?;
            let allowed: &[&str] = match kind.as_str() {
                "info" => &[],
                "trs" => &["form", "coeffs", "scale"],
                "mesh" => &["feature"],
                _ => &["type", "params", "refs", "satisfied"],
            };
            if !allowed.contains(&key.as_str()) {
                return Err(ParseError::at(kpos, format!("unknown {kind} key `{key}`")).into());
            }
            if fields.insert(key.clone(), (v, vpos)).is_some() {
                return Err(ParseError::at(kpos, format!("duplicate key `{key}`")).into());
            }
        }
        let list = |fields: &BTreeMap<String, (Value, Pos)>, key: &str| -> Result<Option<(Vec<f64>, Pos)>, ParseError> {
            match fields.get(key) {
                None => Ok(None),
                Some((Value::List(l), p)) => Ok(Some((l.clone(), *p))),
                Some((v, p)) => Err(ParseError::at(*p, format!("`{key}` must be a list, found {}", v.describe()))),
            }
        };
        let string = |fields: &BTreeMap<String, (Value, Pos)>, key: &str| -> Result<Option<(String, Pos)>, ParseError> {
            match fields.get(key) {
                None => Ok(None),
                Some((Value::Str(s), p)) => Ok(Some((s.clone(), *p))),
                Some((v, p)) => Err(ParseError::at(*p, format!("`{key}` must be a string, found {}", v.describe()))),
            }
        };
        let missing = |key: &str| ParseError::at(kind_pos, format!("{kind} component is missing `{key}`"));
        Ok(match kind.as_str() {
            "info" => Component::Info,
            "trs" => {
                let (form_name, fpos) = string(&fields, "form")?.ok_or_else(|| missing("form"))?;
                let form: Form = form_name
                    .parse()
                    .map_err(|_| ParseError::at(fpos, format!("unknown representation form {form_name:?}")))?;
                let (coeffs, cpos) = list(&fields, "coeffs")?.ok_or_else(|| missing("coeffs"))?;
                if coeffs.len() != form.arity() {
                    return Err(ParseError::at(
                        cpos,
                        format!("{form} expects {} coefficients, got {}", form.arity(), coeffs.len()),
                    )
                    .into());
                }
                let scale = match list(&fields, "scale")? {
                    None => [1.0; 3],
                    Some((s, p)) if s.len() != 3 => {
                        return Err(ParseError::at(p, format!("`scale` expects 3 values, got {}", s.len())).into())
                    }
                    Some((s, _)) => [s[0], s[1], s[2]],
                };
                let repr = TransformRepr::from_coeffs(form, &coeffs, scale).map_err(|e| ParseError::at(cpos, e.to_string()))?;
                Component::Trs(TrsComponent { repr })
            }
            "mesh" => {
                let (feature, p) = list(&fields, "feature")?.ok_or_else(|| missing("feature"))?;
                if feature.len() != MESH_FEATURE_LEN {
                    return Err(ParseError::at(p, format!("`feature` expects {MESH_FEATURE_LEN} values, got {}", feature.len())).into());
                }
                Component::Mesh(MeshFeatureComponent { feature })
            }
            _ => {
                let (action_type, tpos) = string(&fields, "type")?.ok_or_else(|| missing("type"))?;
                let layout = action_layout(&action_type)
                    .ok_or_else(|| ParseError::at(tpos, format!("unregistered action type {action_type:?}")))?;
                let (params, ppos) = list(&fields, "params")?.unwrap_or((Vec::new(), kind_pos));
                if params.len() != layout.params {
                    return Err(ParseError::at(
                        ppos,
                        format!("{action_type:?} expects {} params, got {}", layout.params, params.len()),
                    )
                    .into());
                }
                let mut refs = Vec::new();
                if let Some((r, rpos)) = list(&fields, "refs")? {
                    for v in r {
                        if v < 0.0 || v.fract() != 0.0 {
                            return Err(ParseError::at(rpos, format!("invalid entity reference {v}")).into());
                        }
                        refs.push(EntityId(v as u64));
                    }
                }
                let satisfied = match fields.get("satisfied") {
                    None => false,
                    Some((Value::Num(n), _)) if *n == 0.0 || *n == 1.0 => *n == 1.0,
                    Some((_, p)) => return Err(ParseError::at(*p, "`satisfied` must be 0 or 1").into()),
                };
                Component::Action(ActionDataComponent {
                    action_type,
                    params,
                    refs,
                    satisfied,
                })
            }
        })
    }
}

fn build_scene(scene: &mut Scene, root: ParsedEntity) -> Result<(), ParseError> {
    let mut explicit: HashMap<u64, Pos> = HashMap::new();
    let mut stack = vec![&root];
    let mut order = Vec::new();
    while let Some(e) = stack.pop() {
        order.push(e);
        stack.extend(e.children.iter().rev());
    }
    for e in &order {
        if let Some((id, pos)) = e.id {
            if let Some(first) = explicit.insert(id, pos) {
                return Err(ParseError {
                    pos,
                    message: format!("duplicate entity id {id}"),
                    related: Some((first, "first defined".into())),
                });
            }
        }
    }
    let mut next = explicit.keys().max().map_or(0, |m| m + 1);
    fn add(scene: &mut Scene, e: ParsedEntity, parent: Option<EntityId>, next: &mut u64) -> Result<(), ParseError> {
        let id = match e.id {
            Some((id, _)) => EntityId(id),
            None => {
                *next += 1;
                EntityId(*next - 1)
            }
        };
        scene
            .add_entity_with_id(id, e.name, e.category, parent)
            .map_err(|err| ParseError::at(e.pos, err.to_string()))?;
        for c in e.components {
            scene
                .add_component(id, c)
                .map_err(|err| ParseError::at(e.pos, err.to_string()))?;
        }
        for child in e.children {
            add(scene, child, Some(id), next)?;
        }
        Ok(())
    }
    add(scene, root, None, &mut next)
}

/// Parse a document. Payload values are checked for arity only; use
/// [`Scene::validate`] for semantic checks.
pub fn parse(text: &str) -> Result<SceneDocument, ParseError> {
    let tokens = lex(text)?;
    let mut parser = Parser {
        tokens: tokens.clone(),
        idx: 0,
    };
    match parser.document() {
        Ok((format_version, mut scene, root)) => {
            if let Some(root) = root {
                build_scene(&mut scene, root)?;
            }
            scene.refresh_info();
            Ok(SceneDocument { format_version, scene })
        }
        Err(Failure::Plain(e)) => Err(e),
        Err(Failure::Structural(Structural(mut e))) => {
            // Unbalanced braces surface far from their cause; point at the
            // first line whose indentation no longer matches the nesting.
            if let Some(line) = first_indent_mismatch(&tokens) {
                if line < e.pos.line {
                    let col = tokens.iter().find(|t| t.pos.line == line).map_or(1, |t| t.pos.col);
                    e.related = Some((e.pos, e.message.clone()));
                    e.message = "unbalanced braces: indentation does not match nesting".into();
                    e.pos = Pos { line, col };
                }
            }
            Err(e)
        }
    }
}

/// Canonical float text: shortest round-trip digits, integers without a
/// fractional part, `-0.0` as `0`.
pub fn format_f64(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:?}")
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn list(values: impl IntoIterator<Item = f64>) -> String {
    let items: Vec<String> = values.into_iter().map(format_f64).collect();
    format!("[{}]", items.join(", "))
}

fn meta_value(v: &MetaValue) -> String {
    match v {
        MetaValue::Str(s) => quote(s),
        MetaValue::Num(n) => format_f64(*n),
        MetaValue::List(l) => list(l.iter().cloned()),
    }
}

/// Canonical text for a document.
pub fn serialize(doc: &SceneDocument) -> String {
    let scene = &doc.scene;
    let mut out = String::new();
    let _ = writeln!(out, "unisg {}", doc.format_version);
    let _ = writeln!(out, "scene {} {{", quote(&scene.name));
    for (k, v) in &scene.meta {
        let _ = writeln!(out, "  {k} = {}", meta_value(v));
    }
    if let Some(root) = scene.root() {
        write_entity(&mut out, scene, root, 1);
    }
    out.push_str("}\n");
    out
}

fn write_entity(out: &mut String, scene: &Scene, id: EntityId, depth: usize) {
    let pad = "  ".repeat(depth);
    let e = scene.entity(id).expect("entity in tree");
    let _ = writeln!(out, "{pad}entity {} {{", quote(&e.name));
    let _ = writeln!(out, "{pad}  id = {}", id.0);
    let _ = writeln!(out, "{pad}  category = {}", quote(&e.category));
    if scene.info(id).is_some() {
        let _ = writeln!(out, "{pad}  info {{ }}");
    }
    if let Some(t) = scene.trs(id) {
        let _ = writeln!(
            out,
            "{pad}  trs {{ form = {} coeffs = {} scale = {} }}",
            quote(t.repr.form().name()),
            list(t.repr.coeffs()),
            list(t.repr.scale())
        );
    }
    if let Some(m) = scene.mesh(id) {
        let _ = writeln!(out, "{pad}  mesh {{ feature = {} }}", list(m.feature.iter().cloned()));
    }
    if let Some(a) = scene.action(id) {
        let _ = writeln!(
            out,
            "{pad}  action {{ type = {} params = {} refs = {} satisfied = {} }}",
            quote(&a.action_type),
            list(a.params.iter().cloned()),
            list(a.refs.iter().map(|r| r.0 as f64)),
            a.satisfied as u8
        );
    }
    for &c in &e.children {
        write_entity(out, scene, c, depth + 1);
    }
    let _ = writeln!(out, "{pad}}}");
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    ParentChild,
    EntityComponent,
}

impl EdgeKind {
    pub fn name(self) -> &'static str {
        match self {
            EdgeKind::ParentChild => "parent_child",
            EdgeKind::EntityComponent => "entity_component",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatNode {
    pub id: usize,
    pub kind: String,
    pub owner: EntityId,
    pub category: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatEdge {
    pub src: usize,
    pub dst: usize,
    pub kind: EdgeKind,
}

/// Node, edge and feature tables.
///
/// * `nodes.csv`: `node_id,kind,owner_entity,category`
/// * `edges.csv`: `src,dst,edge_kind` with `edge_kind` one of
///   `parent_child`, `entity_component`; each undirected edge listed once,
///   parent or owner first
/// * `features.csv`: `node_id,width,v0,v1,...` (ragged rows)
#[derive(Debug, Clone, PartialEq)]
pub struct FlatExport {
    pub nodes: Vec<FlatNode>,
    pub edges: Vec<FlatEdge>,
    pub features: Vec<(usize, Vec<f64>)>,
}

/// Flat tables with TRS features in each component's stored form.
pub fn export_flat(doc: &SceneDocument) -> FlatExport {
    let scene = &doc.scene;
    let table = node_table(scene);
    let nodes = table
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| FlatNode {
            id: i,
            kind: n.kind.name().to_string(),
            owner: n.owner,
            category: n.category.clone(),
        })
        .collect();
    let features = table
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (i, node_feature(scene, n, MESH_FEATURE_LEN)))
        .collect();
    FlatExport {
        nodes,
        edges: table.edges,
        features,
    }
}

impl FlatExport {
    pub fn nodes_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["node_id", "kind", "owner_entity", "category"]).unwrap();
        for n in &self.nodes {
            w.write_record([n.id.to_string(), n.kind.clone(), n.owner.to_string(), n.category.clone()])
                .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    pub fn edges_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["src", "dst", "edge_kind"]).unwrap();
        for e in &self.edges {
            w.write_record([e.src.to_string(), e.dst.to_string(), e.kind.name().to_string()])
                .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    pub fn features_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
        for (id, v) in &self.features {
            let mut rec = vec![id.to_string(), v.len().to_string()];
            rec.extend(v.iter().map(|x| format_f64(*x)));
            w.write_record(&rec).unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    /// Write `nodes.csv`, `edges.csv` and `features.csv` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("nodes.csv"), self.nodes_csv())?;
        std::fs::write(dir.join("edges.csv"), self.edges_csv())?;
        std::fs::write(dir.join("features.csv"), self.features_csv())
    }
}
