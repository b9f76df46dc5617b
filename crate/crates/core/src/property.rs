//! Bounded temporal properties over piecewise-constant trajectories.
//!
//! Grammar (loosest binding first):
//!
//! ```text
//! expr    := and ('|' and)*
//! and     := unary ('&' unary)*
//! unary   := '!' unary | primary
//! primary := ('G' | 'F') '[' a ',' b ']' '(' expr ')' | '(' expr ')' | atom
//! atom    := species ('<' | '<=' | '==' | '>=' | '>') integer
//! ```
//!
//! Temporal operators are evaluated at time zero over the closed window
//! `[a, b]`; their bodies must be state formulas (no nested `G`/`F`).

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::ssa::Trajectory;

#[derive(Debug, Clone, PartialEq)]
pub enum PropertyError {
    Syntax { position: usize, message: String },
    UnknownSpecies(String),
    InvalidInterval { start: f64, end: f64 },
    NestedTemporal,
    HorizonTooShort { needed: f64, t_end: f64 },
    SpeciesOutOfRange { species: usize, n_species: usize },
}

impl fmt::Display for PropertyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropertyError::Syntax { position, message } => {
                write!(f, "syntax error at offset {position}: {message}")
            }
            PropertyError::UnknownSpecies(s) => write!(f, "unknown species `{s}`"),
            PropertyError::InvalidInterval { start, end } => {
                write!(f, "invalid interval [{start}, {end}]: need 0 <= a < b")
            }
            PropertyError::NestedTemporal => {
                write!(f, "temporal operators cannot be nested")
            }
            PropertyError::HorizonTooShort { needed, t_end } => write!(
                f,
                "property looks up to t = {needed} but the trajectory ends at {t_end}"
            ),
            PropertyError::SpeciesOutOfRange { species, n_species } => write!(
                f,
                "atom refers to species #{species} but the trajectory has {n_species}"
            ),
        }
    }
}

impl core::error::Error for PropertyError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl Comparison {
    #[inline]
    pub fn holds(self, lhs: i64, rhs: i64) -> bool {
        match self {
            Comparison::Lt => lhs < rhs,
            Comparison::Le => lhs <= rhs,
            Comparison::Eq => lhs == rhs,
            Comparison::Ge => lhs >= rhs,
            Comparison::Gt => lhs > rhs,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Comparison::Lt => "<",
            Comparison::Le => "<=",
            Comparison::Eq => "==",
            Comparison::Ge => ">=",
            Comparison::Gt => ">",
        }
    }
}

/// Property syntax tree. Species are referred to by index.
#[derive(Debug, Clone, PartialEq)]
pub enum Property {
    Atom {
        species: usize,
        op: Comparison,
        value: i64,
    },
    Globally {
        start: f64,
        end: f64,
        body: Box<Property>,
    },
    Eventually {
        start: f64,
        end: f64,
        body: Box<Property>,
    },
    And(Box<Property>, Box<Property>),
    Or(Box<Property>, Box<Property>),
    Not(Box<Property>),
}

impl Property {
    pub fn atom(species: usize, op: Comparison, value: i64) -> Self {
        Property::Atom { species, op, value }
    }

    pub fn globally(start: f64, end: f64, body: Property) -> Self {
        Property::Globally {
            start,
            end,
            body: Box::new(body),
        }
    }

    pub fn eventually(start: f64, end: f64, body: Property) -> Self {
        Property::Eventually {
            start,
            end,
            body: Box::new(body),
        }
    }

    pub fn and(a: Property, b: Property) -> Self {
        Property::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Property, b: Property) -> Self {
        Property::Or(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(a: Property) -> Self {
        Property::Not(Box::new(a))
    }

    /// Latest time the property inspects.
    pub fn horizon(&self) -> f64 {
        match self {
            Property::Atom { .. } => 0.0,
            Property::Globally { end, body, .. } | Property::Eventually { end, body, .. } => {
                end.max(body.horizon())
            }
            Property::And(a, b) | Property::Or(a, b) => a.horizon().max(b.horizon()),
            Property::Not(a) => a.horizon(),
        }
    }

    fn is_state_formula(&self) -> bool {
        match self {
            Property::Atom { .. } => true,
            Property::Globally { .. } | Property::Eventually { .. } => false,
            Property::And(a, b) | Property::Or(a, b) => a.is_state_formula() && b.is_state_formula(),
            Property::Not(a) => a.is_state_formula(),
        }
    }

    /// Checks interval and nesting constraints.
    pub fn validate(&self) -> Result<(), PropertyError> {
        match self {
            Property::Atom { .. } => Ok(()),
            Property::Globally { start, end, body } | Property::Eventually { start, end, body } => {
                if !(*start >= 0.0 && start < end && end.is_finite()) {
                    return Err(PropertyError::InvalidInterval {
                        start: *start,
                        end: *end,
                    });
                }
                if !body.is_state_formula() {
                    return Err(PropertyError::NestedTemporal);
                }
                Ok(())
            }
            Property::And(a, b) | Property::Or(a, b) => {
                a.validate()?;
                b.validate()
            }
            Property::Not(a) => a.validate(),
        }
    }

    pub(crate) fn max_species(&self) -> Option<usize> {
        match self {
            Property::Atom { species, .. } => Some(*species),
            Property::Globally { body, .. } | Property::Eventually { body, .. } => {
                body.max_species()
            }
            Property::And(a, b) | Property::Or(a, b) => a.max_species().max(b.max_species()),
            Property::Not(a) => a.max_species(),
        }
    }

    /// Writes the property back in the text grammar using `species` names.
    pub fn display<'a>(&'a self, species: &'a [String]) -> DisplayProperty<'a> {
        DisplayProperty {
            prop: self,
            species,
        }
    }
}

pub struct DisplayProperty<'a> {
    prop: &'a Property,
    species: &'a [String],
}

impl<'a> fmt::Display for DisplayProperty<'a> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sub = |p: &'a Property| DisplayProperty {
            prop: p,
            species: self.species,
        };
        match self.prop {
            Property::Atom { species, op, value } => {
                let name = self.species.get(*species).map(String::as_str).unwrap_or("?");
                write!(f, "{name} {} {value}", op.symbol())
            }
            Property::Globally { start, end, body } => {
                write!(f, "G[{start:?},{end:?}]({})", sub(body))
            }
            Property::Eventually { start, end, body } => {
                write!(f, "F[{start:?},{end:?}]({})", sub(body))
            }
            Property::And(a, b) => write!(f, "({} & {})", sub(a), sub(b)),
            Property::Or(a, b) => write!(f, "({} | {})", sub(a), sub(b)),
            Property::Not(a) => write!(f, "!({})", sub(a)),
        }
    }
}

/// Parses a property, resolving atoms against `species`.
pub fn parse_property(text: &str, species: &[String]) -> Result<Property, PropertyError> {
    let tokens = lex(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        species,
        end: text.len(),
    };
    let prop = p.expr()?;
    if let Some((off, t)) = p.tokens.get(p.pos) {
        return Err(PropertyError::Syntax {
            position: *off,
            message: format!("unexpected `{t}`"),
        });
    }
    prop.validate()?;
    Ok(prop)
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Number(String),
    LBracket,
    RBracket,
    LParen,
    RParen,
    Comma,
    And,
    Or,
    Not,
    Cmp(Comparison),
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Ident(s) | Token::Number(s) => write!(f, "{s}"),
            Token::LBracket => write!(f, "["),
            Token::RBracket => write!(f, "]"),
            Token::LParen => write!(f, "("),
            Token::RParen => write!(f, ")"),
            Token::Comma => write!(f, ","),
            Token::And => write!(f, "&"),
            Token::Or => write!(f, "|"),
            Token::Not => write!(f, "!"),
            Token::Cmp(c) => write!(f, "{}", c.symbol()),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Token)>, PropertyError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let tok = match c {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
                continue;
            }
            b'[' => Token::LBracket,
            b']' => Token::RBracket,
            b'(' => Token::LParen,
            b')' => Token::RParen,
            b',' => Token::Comma,
            b'&' => {
                if bytes.get(i + 1) == Some(&b'&') {
                    i += 1;
                }
                Token::And
            }
            b'|' => {
                if bytes.get(i + 1) == Some(&b'|') {
                    i += 1;
                }
                Token::Or
            }
            b'!' => Token::Not,
            b'<' | b'>' | b'=' => {
                let eq = bytes.get(i + 1) == Some(&b'=');
                let op = match (c, eq) {
                    (b'<', true) => Comparison::Le,
                    (b'<', false) => Comparison::Lt,
                    (b'>', true) => Comparison::Ge,
                    (b'>', false) => Comparison::Gt,
                    (b'=', true) => Comparison::Eq,
                    _ => {
                        return Err(PropertyError::Syntax {
                            position: i,
                            message: "expected `==`".to_string(),
                        })
                    }
                };
                if eq {
                    i += 1;
                }
                Token::Cmp(op)
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Token::Ident(text[start..i].to_string())));
                continue;
            }
            c if c.is_ascii_digit() || c == b'-' || c == b'+' || c == b'.' => {
                i += 1;
                while i < bytes.len() {
                    let d = bytes[i];
                    let exp_sign = (d == b'-' || d == b'+')
                        && matches!(bytes[i - 1], b'e' | b'E');
                    if d.is_ascii_digit() || d == b'.' || d == b'e' || d == b'E' || exp_sign {
                        i += 1;
                    } else {
                        break;
                    }
                }
                out.push((start, Token::Number(text[start..i].to_string())));
                continue;
            }
            _ => {
                return Err(PropertyError::Syntax {
                    position: i,
                    message: format!("unexpected character `{}`", c as char),
                })
            }
        };
        i += 1;
        out.push((start, tok));
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    species: &'a [String],
    end: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map(|(o, _)| *o).unwrap_or(self.end)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, PropertyError> {
        Err(PropertyError::Syntax {
            position: self.offset(),
            message: message.into(),
        })
    }

    fn expect(&mut self, want: Token) -> Result<(), PropertyError> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            let found = self
                .peek()
                .map(|t| format!("`{t}`"))
                .unwrap_or_else(|| "end of input".to_string());
            self.error(format!("expected `{want}`, found {found}"))
        }
    }

    fn expr(&mut self) -> Result<Property, PropertyError> {
        let mut lhs = self.and()?;
        while self.peek() == Some(&Token::Or) {
            self.pos += 1;
            let rhs = self.and()?;
            lhs = Property::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Property, PropertyError> {
        let mut lhs = self.unary()?;
        while self.peek() == Some(&Token::And) {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Property::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Property, PropertyError> {
        if self.peek() == Some(&Token::Not) {
            self.pos += 1;
            return Ok(Property::not(self.unary()?));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Property, PropertyError> {
        match self.peek().cloned() {
            Some(Token::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(e)
            }
            Some(Token::Ident(name))
                if (name == "G" || name == "F")
                    && matches!(self.tokens.get(self.pos + 1), Some((_, Token::LBracket))) =>
            {
                self.pos += 2;
                let start = self.number()?;
                self.expect(Token::Comma)?;
                let end = self.number()?;
                self.expect(Token::RBracket)?;
                self.expect(Token::LParen)?;
                let body = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(if name == "G" {
                    Property::globally(start, end, body)
                } else {
                    Property::eventually(start, end, body)
                })
            }
            Some(Token::Ident(name)) => {
                self.pos += 1;
                let species = self
                    .species
                    .iter()
                    .position(|s| *s == name)
                    .ok_or(PropertyError::UnknownSpecies(name))?;
                let op = match self.peek() {
                    Some(Token::Cmp(op)) => *op,
                    _ => return self.error("expected a comparison operator"),
                };
                self.pos += 1;
                let value = match self.peek() {
                    Some(Token::Number(s)) => match s.parse::<i64>() {
                        Ok(v) => v,
                        Err(_) => return self.error(format!("expected an integer, found `{s}`")),
                    },
                    _ => return self.error("expected an integer constant"),
                };
                self.pos += 1;
                Ok(Property::atom(species, op, value))
            }
            Some(t) => self.error(format!("unexpected `{t}`")),
            None => self.error("unexpected end of input"),
        }
    }

    fn number(&mut self) -> Result<f64, PropertyError> {
        match self.peek() {
            Some(Token::Number(s)) => match s.parse::<f64>() {
                Ok(v) if v.is_finite() => {
                    self.pos += 1;
                    Ok(v)
                }
                _ => self.error(format!("invalid number `{s}`")),
            },
            _ => self.error("expected a time bound"),
        }
    }
}

fn eval_state(prop: &Property, state: &[u64]) -> bool {
    match prop {
        Property::Atom { species, op, value } => {
            let count = i64::try_from(state[*species]).unwrap_or(i64::MAX);
            op.holds(count, *value)
        }
        Property::And(a, b) => eval_state(a, state) && eval_state(b, state),
        Property::Or(a, b) => eval_state(a, state) || eval_state(b, state),
        Property::Not(a) => !eval_state(a, state),
        Property::Globally { .. } | Property::Eventually { .. } => {
            unreachable!("validated state formula")
        }
    }
}

/// Indices of the segments that intersect the closed window `[a, b]`.
fn segments_in(traj: &Trajectory, a: f64, b: f64) -> impl Iterator<Item = usize> + '_ {
    // first segment whose end exceeds a (or the last one)
    let first = traj.times().partition_point(|&t| t <= a).saturating_sub(1);
    (first..traj.len()).take_while(move |&i| traj.times()[i] <= b)
}

fn eval(traj: &Trajectory, prop: &Property) -> bool {
    match prop {
        Property::Atom { .. } => eval_state(prop, traj.state(0)),
        Property::Globally { start, end, body } => {
            segments_in(traj, *start, *end).all(|i| eval_state(body, traj.state(i)))
        }
        Property::Eventually { start, end, body } => {
            segments_in(traj, *start, *end).any(|i| eval_state(body, traj.state(i)))
        }
        Property::And(a, b) => eval(traj, a) && eval(traj, b),
        Property::Or(a, b) => eval(traj, a) || eval(traj, b),
        Property::Not(a) => !eval(traj, a),
    }
}

/// Boolean satisfaction of `prop` by `traj`.
pub fn check(traj: &Trajectory, prop: &Property) -> Result<bool, PropertyError> {
    prop.validate()?;
    let needed = prop.horizon();
    if needed > traj.t_end() {
        return Err(PropertyError::HorizonTooShort {
            needed,
            t_end: traj.t_end(),
        });
    }
    if let Some(s) = prop.max_species() {
        if s >= traj.n_species() {
            return Err(PropertyError::SpeciesOutOfRange {
                species: s,
                n_species: traj.n_species(),
            });
        }
    }
    Ok(eval(traj, prop))
}

/// Checks every trajectory, preserving order.
pub fn label_batch(trajs: &[Trajectory], prop: &Property) -> Result<Vec<bool>, PropertyError> {
    trajs.iter().map(|t| check(t, prop)).collect()
}
