//! Parametric chemical reaction networks with mass-action kinetics.
//!
//! A [`CrnModel`] together with a [`ParameterPoint`] fixes a population
//! CTMC: states are species count vectors and each reaction fires at its
//! mass-action propensity.
//!
//! # File format
//!
//! ```text
//! # SIR epidemic
//! species S=95 I=5 R=0
//! param k_I range 0.005 0.3
//! param k_R range 0.005 0.3
//! reaction infect: S + I -> I + I @ k_I
//! reaction recover: I -> R @ k_R
//! ```
//!
//! An empty side is written `0`. A term may carry an integer coefficient
//! (`2 A`), which is the same as repeating the species name.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    UndeclaredSpecies {
        line: usize,
        name: String,
    },
    UndeclaredParameter {
        line: usize,
        name: String,
    },
    DuplicateName {
        line: usize,
        name: String,
    },
    NegativeCount {
        line: usize,
        name: String,
    },
    EmptyRange {
        line: usize,
        name: String,
    },
    /// A reaction was applied in a state that lacks its reactants.
    Underflow {
        reaction: String,
        species: String,
    },
    InvalidPoint(String),
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::Syntax {
                line,
                column,
                message,
            } => write!(f, "syntax error at {line}:{column}: {message}"),
            ModelError::UndeclaredSpecies { line, name } => {
                write!(f, "line {line}: undeclared species `{name}`")
            }
            ModelError::UndeclaredParameter { line, name } => {
                write!(f, "line {line}: undeclared parameter `{name}`")
            }
            ModelError::DuplicateName { line, name } => {
                write!(f, "line {line}: duplicate name `{name}`")
            }
            ModelError::NegativeCount { line, name } => {
                write!(f, "line {line}: negative initial count for `{name}`")
            }
            ModelError::EmptyRange { line, name } => {
                write!(f, "line {line}: parameter `{name}` has an empty range")
            }
            ModelError::Underflow { reaction, species } => write!(
                f,
                "reaction `{reaction}` applied without enough `{species}`"
            ),
            ModelError::InvalidPoint(msg) => write!(f, "invalid parameter point: {msg}"),
        }
    }
}

impl core::error::Error for ModelError {}

/// A named rate constant and the closed range it may take.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    pub label: String,
    /// `(species index, multiplicity)`, sorted by species index.
    pub reactants: Vec<(usize, u32)>,
    pub products: Vec<(usize, u32)>,
    /// Index into [`CrnModel::parameters`].
    pub rate: usize,
}

impl Reaction {
    /// Net state change (products minus reactants) as a dense vector.
    pub fn change_vector(&self, n_species: usize) -> Vec<i64> {
        let mut v = vec![0i64; n_species];
        for &(s, k) in &self.reactants {
            v[s] -= i64::from(k);
        }
        for &(s, k) in &self.products {
            v[s] += i64::from(k);
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrnModel {
    pub species: Vec<String>,
    pub initial_state: Vec<u64>,
    pub parameters: Vec<Parameter>,
    pub reactions: Vec<Reaction>,
}

/// A point in the model's parameter space, ordered like
/// [`CrnModel::parameters`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterPoint(pub Vec<f64>);

impl ParameterPoint {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Axis-aligned box of parameter values. Degenerate axes (`lo == hi`) are
/// allowed here even though model files reject them.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSpace {
    pub bounds: Vec<(f64, f64)>,
}

impl ParameterSpace {
    pub fn new(bounds: Vec<(f64, f64)>) -> Self {
        Self { bounds }
    }

    pub fn unit(dim: usize) -> Self {
        Self {
            bounds: vec![(0.0, 1.0); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn contains(&self, values: &[f64]) -> bool {
        values.len() == self.dim()
            && values
                .iter()
                .zip(&self.bounds)
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn clip(&self, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .zip(&self.bounds)
            .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
            .collect()
    }

    /// Maps a point of the box onto `[0, 1]^d`.
    pub fn normalize(&self, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .zip(&self.bounds)
            .map(|(v, (lo, hi))| {
                let w = hi - lo;
                if w > 0.0 {
                    (v - lo) / w
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Inverse of [`normalize`](Self::normalize), clipped to the box.
    pub fn denormalize(&self, unit: &[f64]) -> Vec<f64> {
        unit.iter()
            .zip(&self.bounds)
            .map(|(u, (lo, hi))| (lo + u * (hi - lo)).clamp(*lo, *hi))
            .collect()
    }
}

impl CrnModel {
    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s == name)
    }

    pub fn parameter_index(&self, name: &str) -> Option<usize> {
        self.parameters.iter().position(|p| p.name == name)
    }

    pub fn space(&self) -> ParameterSpace {
        ParameterSpace::new(self.parameters.iter().map(|p| (p.lower, p.upper)).collect())
    }

    /// Validates `values` against the declared parameter ranges.
    pub fn point(&self, values: Vec<f64>) -> Result<ParameterPoint, ModelError> {
        if values.len() != self.parameters.len() {
            return Err(ModelError::InvalidPoint(format!(
                "expected {} values, got {}",
                self.parameters.len(),
                values.len()
            )));
        }
        for (v, p) in values.iter().zip(&self.parameters) {
            if !(*v >= p.lower && *v <= p.upper) {
                return Err(ModelError::InvalidPoint(format!(
                    "{} = {v} outside [{}, {}]",
                    p.name, p.lower, p.upper
                )));
            }
        }
        Ok(ParameterPoint(values))
    }

    /// Mass-action propensities, written into `out` (one entry per reaction).
    pub fn propensities_into(&self, state: &[u64], point: &ParameterPoint, out: &mut [f64]) {
        debug_assert_eq!(state.len(), self.n_species());
        for (o, r) in out.iter_mut().zip(&self.reactions) {
            let mut a = point.0[r.rate];
            for &(s, k) in &r.reactants {
                let n = state[s];
                if n < u64::from(k) {
                    a = 0.0;
                    break;
                }
                // falling factorial n (n-1) ... (n-k+1)
                for j in 0..u64::from(k) {
                    a *= (n - j) as f64;
                }
            }
            *o = a;
        }
    }

    pub fn propensities(&self, state: &[u64], point: &ParameterPoint) -> Vec<f64> {
        let mut out = vec![0.0; self.reactions.len()];
        self.propensities_into(state, point, &mut out);
        out
    }

    /// Fires reaction `index` in `state`.
    pub fn apply_reaction(&self, state: &[u64], index: usize) -> Result<Vec<u64>, ModelError> {
        let mut next = state.to_vec();
        self.apply_reaction_in_place(&mut next, index)?;
        Ok(next)
    }

    pub fn apply_reaction_in_place(
        &self,
        state: &mut [u64],
        index: usize,
    ) -> Result<(), ModelError> {
        let r = &self.reactions[index];
        for &(s, k) in &r.reactants {
            if state[s] < u64::from(k) {
                return Err(ModelError::Underflow {
                    reaction: r.label.clone(),
                    species: self.species[s].clone(),
                });
            }
        }
        for &(s, k) in &r.reactants {
            state[s] -= u64::from(k);
        }
        for &(s, k) in &r.products {
            state[s] += u64::from(k);
        }
        Ok(())
    }
}

/// Parses the line-based model format.
pub fn parse_model(text: &str) -> Result<CrnModel, ModelError> {
    let mut species: Vec<String> = Vec::new();
    let mut initial_state = Vec::new();
    let mut parameters: Vec<Parameter> = Vec::new();
    // Reactions are resolved after all declarations are known.
    let mut pending: Vec<PendingReaction> = Vec::new();
    let mut labels: Vec<String> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let trimmed = line.trim_start();
        if trimmed.trim().is_empty() {
            continue;
        }
        let indent = line.len() - trimmed.len();
        let (keyword, rest) = match trimmed.find(char::is_whitespace) {
            Some(i) => (&trimmed[..i], &trimmed[i..]),
            None => (trimmed, ""),
        };
        let rest_col = indent + keyword.len() + 1;
        match keyword {
            "species" => {
                let mut any = false;
                for (col, tok) in tokens(rest, rest_col) {
                    any = true;
                    let (name, count) = tok.split_once('=').ok_or_else(|| ModelError::Syntax {
                        line: line_no,
                        column: col,
                        message: format!("expected <Name>=<count>, found `{tok}`"),
                    })?;
                    check_identifier(name, line_no, col)?;
                    if count.starts_with('-') {
                        return Err(ModelError::NegativeCount {
                            line: line_no,
                            name: name.to_string(),
                        });
                    }
                    let n: u64 = count.parse().map_err(|_| ModelError::Syntax {
                        line: line_no,
                        column: col + name.len() + 1,
                        message: format!("invalid count `{count}`"),
                    })?;
                    if species.iter().any(|s| s == name) {
                        return Err(ModelError::DuplicateName {
                            line: line_no,
                            name: name.to_string(),
                        });
                    }
                    species.push(name.to_string());
                    initial_state.push(n);
                }
                if !any {
                    return Err(ModelError::Syntax {
                        line: line_no,
                        column: rest_col,
                        message: "`species` needs at least one declaration".to_string(),
                    });
                }
            }
            "param" => {
                let toks: Vec<(usize, &str)> = tokens(rest, rest_col).collect();
                if toks.len() != 4 || toks[1].1 != "range" {
                    return Err(ModelError::Syntax {
                        line: line_no,
                        column: rest_col,
                        message: "expected `param <name> range <lo> <hi>`".to_string(),
                    });
                }
                let name = toks[0].1;
                check_identifier(name, line_no, toks[0].0)?;
                let lo = parse_real(toks[2].1, line_no, toks[2].0)?;
                let hi = parse_real(toks[3].1, line_no, toks[3].0)?;
                if parameters.iter().any(|p| p.name == name) {
                    return Err(ModelError::DuplicateName {
                        line: line_no,
                        name: name.to_string(),
                    });
                }
                if !(lo < hi) {
                    return Err(ModelError::EmptyRange {
                        line: line_no,
                        name: name.to_string(),
                    });
                }
                parameters.push(Parameter {
                    name: name.to_string(),
                    lower: lo,
                    upper: hi,
                });
            }
            "reaction" => {
                let r = parse_reaction_line(rest, rest_col, line_no)?;
                if labels.contains(&r.label) {
                    return Err(ModelError::DuplicateName {
                        line: line_no,
                        name: r.label,
                    });
                }
                labels.push(r.label.clone());
                pending.push(r);
            }
            other => {
                return Err(ModelError::Syntax {
                    line: line_no,
                    column: indent + 1,
                    message: format!("unknown keyword `{other}`"),
                })
            }
        }
    }

    let mut reactions = Vec::with_capacity(pending.len());
    for p in pending {
        let resolve = |side: &[(String, u32)]| -> Result<Vec<(usize, u32)>, ModelError> {
            let mut acc: BTreeMap<usize, u32> = BTreeMap::new();
            for (name, k) in side {
                let idx = species.iter().position(|s| s == name).ok_or_else(|| {
                    ModelError::UndeclaredSpecies {
                        line: p.line,
                        name: name.clone(),
                    }
                })?;
                *acc.entry(idx).or_insert(0) += k;
            }
            Ok(acc.into_iter().collect())
        };
        let reactants = resolve(&p.reactants)?;
        let products = resolve(&p.products)?;
        let rate = parameters
            .iter()
            .position(|q| q.name == p.rate)
            .ok_or_else(|| ModelError::UndeclaredParameter {
                line: p.line,
                name: p.rate.clone(),
            })?;
        reactions.push(Reaction {
            label: p.label,
            reactants,
            products,
            rate,
        });
    }

    Ok(CrnModel {
        species,
        initial_state,
        parameters,
        reactions,
    })
}

struct PendingReaction {
    line: usize,
    label: String,
    reactants: Vec<(String, u32)>,
    products: Vec<(String, u32)>,
    rate: String,
}

/// Whitespace-separated tokens with their 1-based columns.
fn tokens(s: &str, base_col: usize) -> impl Iterator<Item = (usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in s.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(st)) => {
                out.push((base_col + st, &s[st..i]));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(st) = start {
        out.push((base_col + st, &s[st..]));
    }
    out.into_iter()
}

fn check_identifier(name: &str, line: usize, column: usize) -> Result<(), ModelError> {
    let mut chars = name.chars();
    let ok = match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {
            chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        }
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(ModelError::Syntax {
            line,
            column,
            message: format!("invalid identifier `{name}`"),
        })
    }
}

fn parse_real(tok: &str, line: usize, column: usize) -> Result<f64, ModelError> {
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(ModelError::Syntax {
            line,
            column,
            message: format!("invalid number `{tok}`"),
        }),
    }
}

fn parse_reaction_line(
    rest: &str,
    rest_col: usize,
    line: usize,
) -> Result<PendingReaction, ModelError> {
    let syntax = |column: usize, message: &str| ModelError::Syntax {
        line,
        column,
        message: message.to_string(),
    };
    let colon = rest
        .find(':')
        .ok_or_else(|| syntax(rest_col, "expected `<label>:`"))?;
    let label = rest[..colon].trim();
    check_identifier(label, line, rest_col + rest[..colon].find(label).unwrap_or(0))?;
    let body = &rest[colon + 1..];
    let body_col = rest_col + colon + 1;
    let arrow = body
        .find("->")
        .ok_or_else(|| syntax(body_col, "expected `->`"))?;
    let at = body.find('@').ok_or_else(|| syntax(body_col, "expected `@ <param>`"))?;
    if at < arrow {
        return Err(syntax(body_col + at, "`@` must follow the products"));
    }
    let lhs = &body[..arrow];
    let rhs = &body[arrow + 2..at];
    let rate = body[at + 1..].trim();
    check_identifier(rate, line, body_col + at + 1)?;
    Ok(PendingReaction {
        line,
        label: label.to_string(),
        reactants: parse_side(lhs, body_col, line)?,
        products: parse_side(rhs, body_col + arrow + 2, line)?,
        rate: rate.to_string(),
    })
}

fn parse_side(side: &str, col: usize, line: usize) -> Result<Vec<(String, u32)>, ModelError> {
    let s = side.trim();
    if s.is_empty() {
        return Err(ModelError::Syntax {
            line,
            column: col,
            message: "empty reaction side; write `0`".to_string(),
        });
    }
    if s == "0" {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for term in s.split('+') {
        let t = term.trim();
        let parts: Vec<&str> = t.split_whitespace().collect();
        let (k, name) = match parts.as_slice() {
            [name] => (1u32, *name),
            [k, name] => {
                let k: u32 = k.parse().map_err(|_| ModelError::Syntax {
                    line,
                    column: col,
                    message: format!("invalid coefficient in `{t}`"),
                })?;
                (k, *name)
            }
            _ => {
                return Err(ModelError::Syntax {
                    line,
                    column: col,
                    message: format!("malformed term `{t}`"),
                })
            }
        };
        check_identifier(name, line, col)?;
        if k > 0 {
            out.push((name.to_string(), k));
        }
    }
    Ok(out)
}

impl fmt::Display for CrnModel {
    /// Writes the model back in the file format accepted by [`parse_model`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.species.is_empty() {
            write!(f, "species")?;
            for (s, n) in self.species.iter().zip(&self.initial_state) {
                write!(f, " {s}={n}")?;
            }
            writeln!(f)?;
        }
        for p in &self.parameters {
            writeln!(f, "param {} range {:?} {:?}", p.name, p.lower, p.upper)?;
        }
        let side = |f: &mut fmt::Formatter<'_>, terms: &[(usize, u32)]| -> fmt::Result {
            if terms.is_empty() {
                return write!(f, "0");
            }
            let mut first = true;
            for &(s, k) in terms {
                for _ in 0..k {
                    if !first {
                        write!(f, " + ")?;
                    }
                    first = false;
                    write!(f, "{}", self.species[s])?;
                }
            }
            Ok(())
        };
        for r in &self.reactions {
            write!(f, "reaction {}: ", r.label)?;
            side(f, &r.reactants)?;
            write!(f, " -> ")?;
            side(f, &r.products)?;
            writeln!(f, " @ {}", self.parameters[r.rate].name)?;
        }
        Ok(())
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use alloc::string::ToString;

    pub(crate) const SIR: &str = "\
# SIR epidemic
species S=95 I=5 R=0
param k_I range 0.005 0.3
param k_R range 0.005 0.3
reaction infect: S + I -> I + I @ k_I
reaction recover: I -> R @ k_R
";

    pub(crate) fn sir() -> CrnModel {
        parse_model(SIR).unwrap()
    }

    #[test]
    fn parses_sir() {
        let m = sir();
        assert_eq!(m.species, ["S", "I", "R"]);
        assert_eq!(m.initial_state, [95, 5, 0]);
        assert_eq!(m.parameters.len(), 2);
        assert_eq!(m.reactions.len(), 2);
        assert_eq!(m.reactions[0].reactants, [(0, 1), (1, 1)]);
        assert_eq!(m.reactions[0].products, [(1, 2)]);
        assert_eq!(m.reactions[0].change_vector(3), [-1, 1, 0]);
        assert_eq!(m.reactions[1].change_vector(3), [0, -1, 1]);
    }

    #[test]
    fn zero_reactions_is_valid() {
        let m = parse_model("species A=3\nparam k range 0 1\n").unwrap();
        assert!(m.reactions.is_empty());
    }

    #[test]
    fn empty_sides_and_coefficients() {
        let m = parse_model(
            "species A=0 B=2\nparam k range 0 1\nreaction birth: 0 -> A @ k\nreaction dimer: 2 B -> 0 @ k\n",
        )
        .unwrap();
        assert!(m.reactions[0].reactants.is_empty());
        assert_eq!(m.reactions[1].reactants, [(1, 2)]);
        // 2 B at B = 2: k * 2 * 1
        let p = m.point(alloc::vec![0.5]).unwrap();
        assert_eq!(m.propensities(&[0, 2], &p), [0.5, 1.0]);
        assert_eq!(m.propensities(&[0, 1], &p), [0.5, 0.0]);
    }

    #[test]
    fn undeclared_species() {
        let err = parse_model("species S=1\nparam k range 0 1\nreaction r: S + X -> S @ k\n")
            .unwrap_err();
        assert_eq!(
            err,
            ModelError::UndeclaredSpecies {
                line: 3,
                name: "X".to_string()
            }
        );
    }

    #[test]
    fn other_errors() {
        assert!(matches!(
            parse_model("species S=1\nreaction r: S -> 0 @ k\n"),
            Err(ModelError::UndeclaredParameter { line: 2, .. })
        ));
        assert!(matches!(
            parse_model("species S=1 S=2\n"),
            Err(ModelError::DuplicateName { line: 1, .. })
        ));
        assert!(matches!(
            parse_model("species S=-4\n"),
            Err(ModelError::NegativeCount { line: 1, .. })
        ));
        assert!(matches!(
            parse_model("param k range 0.3 0.3\n"),
            Err(ModelError::EmptyRange { line: 1, .. })
        ));
        assert!(matches!(
            parse_model("species S=1\n  bogus stuff\n"),
            Err(ModelError::Syntax {
                line: 2,
                column: 3,
                ..
            })
        ));
        assert!(matches!(
            parse_model("species S=1\nparam k range 0 1\nreaction r: S => 0 @ k\n"),
            Err(ModelError::Syntax { line: 3, .. })
        ));
    }

    #[test]
    fn propensity_examples() {
        let m = sir();
        let p = m.point(alloc::vec![0.01, 0.1]).unwrap();
        let a = m.propensities(&[95, 5, 0], &p);
        assert!((a[0] - 4.75).abs() < 1e-12);
        let a = m.propensities(&[0, 7, 93], &p);
        assert_eq!(a[0], 0.0);
        assert!((a[1] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn apply_examples() {
        let m = sir();
        assert_eq!(m.apply_reaction(&[95, 5, 0], 0).unwrap(), [94, 6, 0]);
        assert_eq!(m.apply_reaction(&[94, 6, 0], 1).unwrap(), [94, 5, 1]);
        assert!(matches!(
            m.apply_reaction(&[0, 0, 100], 1),
            Err(ModelError::Underflow { .. })
        ));
    }

    #[test]
    fn points_are_range_checked() {
        let m = sir();
        assert!(m.point(alloc::vec![0.01]).is_err());
        assert!(m.point(alloc::vec![0.01, 0.5]).is_err());
        assert!(m.point(alloc::vec![0.005, 0.3]).is_ok());
    }

    #[test]
    fn serialize_round_trip() {
        let m = sir();
        let text = m.to_string();
        assert_eq!(parse_model(&text).unwrap(), m);
    }

    #[test]
    fn normalization_round_trip() {
        let s = sir().space();
        let x = [0.1, 0.2];
        let u = s.normalize(&x);
        let back = s.denormalize(&u);
        assert!((back[0] - 0.1).abs() < 1e-15 && (back[1] - 0.2).abs() < 1e-15);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn sir_conserves_population(steps in proptest::collection::vec(0usize..2, 0..200)) {
                let m = sir();
                let mut state = m.initial_state.clone();
                for r in steps {
                    let _ = m.apply_reaction_in_place(&mut state, r);
                    prop_assert_eq!(state.iter().sum::<u64>(), 100);
                }
            }

            #[test]
            fn propensity_linear_in_rate(s in 0u64..200, i in 0u64..200, r in 0u64..200,
                                         ki in 0.005f64..0.15, kr in 0.005f64..0.15) {
                let m = sir();
                let p = m.point(alloc::vec![ki, kr]).unwrap();
                let p2 = m.point(alloc::vec![2.0 * ki, kr]).unwrap();
                let a = m.propensities(&[s, i, r], &p);
                let b = m.propensities(&[s, i, r], &p2);
                prop_assert_eq!(b[0], 2.0 * a[0]);
                prop_assert_eq!(b[1], a[1]);
            }

            #[test]
            fn parse_serialize_identity(counts in proptest::collection::vec(0u64..1000, 1..5),
                                        lo in -10.0f64..10.0, width in 1e-6f64..10.0,
                                        stoich in proptest::collection::vec((0usize..5, 0u32..3, 0usize..5, 0u32..3), 0..6)) {
                let n = counts.len();
                let mut text = String::from("species");
                for (i, c) in counts.iter().enumerate() {
                    text.push_str(&format!(" X{i}={c}"));
                }
                text.push_str(&format!("\nparam k range {lo:?} {:?}\n", lo + width));
                for (j, (a, ka, b, kb)) in stoich.iter().enumerate() {
                    let lhs = if *ka == 0 { "0".to_string() } else { format!("{ka} X{}", a % n) };
                    let rhs = if *kb == 0 { "0".to_string() } else { format!("{kb} X{}", b % n) };
                    text.push_str(&format!("reaction r{j}: {lhs} -> {rhs} @ k\n"));
                }
                let m = parse_model(&text).unwrap();
                prop_assert_eq!(parse_model(&m.to_string()).unwrap(), m);
            }
        }
    }
}
