//! The option type lattice.
//!
//! An option type is a list of alternatives separated by `|`. Each
//! alternative is either a numeric conjunction (shape, sign and integrality
//! qualifiers) or one of the stand-alone kinds that combine with nothing.

use std::fmt;
use std::str::FromStr;

use super::value::{format_number, NumArray, OptionValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Scalar,
    Vector,
    Matrix,
    Integer,
    Positive,
    NonNegative,
    Negative,
    NonPositive,
    Index,
    Indices,
    Boolean,
    List,
    Text,
    Struct,
    FunctionHandle,
}

impl Kind {
    pub const ALL: [Kind; 15] = [
        Kind::Scalar,
        Kind::Vector,
        Kind::Matrix,
        Kind::Integer,
        Kind::Positive,
        Kind::NonNegative,
        Kind::Negative,
        Kind::NonPositive,
        Kind::Index,
        Kind::Indices,
        Kind::Boolean,
        Kind::List,
        Kind::Text,
        Kind::Struct,
        Kind::FunctionHandle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Scalar => "scalar",
            Kind::Vector => "vector",
            Kind::Matrix => "matrix",
            Kind::Integer => "integer",
            Kind::Positive => "positive",
            Kind::NonNegative => "non-negative",
            Kind::Negative => "negative",
            Kind::NonPositive => "non-positive",
            Kind::Index => "index",
            Kind::Indices => "indices",
            Kind::Boolean => "boolean",
            Kind::List => "list",
            Kind::Text => "text",
            Kind::Struct => "struct",
            Kind::FunctionHandle => "function_handle",
        }
    }

    fn is_shape(self) -> bool {
        matches!(self, Kind::Scalar | Kind::Vector | Kind::Matrix)
    }

    fn is_sign(self) -> bool {
        matches!(
            self,
            Kind::Positive | Kind::NonNegative | Kind::Negative | Kind::NonPositive
        )
    }

    /// Whether `self` may appear together with `other` in one alternative.
    pub fn combines_with(self, other: Kind) -> bool {
        if self == other {
            return false;
        }
        let numeric = |k: Kind| k.is_shape() || k.is_sign() || k == Kind::Integer;
        if !numeric(self) || !numeric(other) {
            return false;
        }
        // at most one shape and one sign per alternative
        !(self.is_shape() && other.is_shape()) && !(self.is_sign() && other.is_sign())
    }
}

impl FromStr for Kind {
    type Err = TypeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Kind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| TypeError(format!("unknown option type '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeError(pub String);

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for TypeError {}

/// One entry of a `list` option. Some lists attach a numeric value to each
/// entry, printed in parentheses after the name.
#[derive(Debug, Clone, PartialEq)]
pub struct ListEntry {
    pub name: String,
    pub value: Option<f64>,
}

impl ListEntry {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            value: None,
        }
    }

    pub fn valued(name: &str, value: f64) -> Self {
        Self {
            name: name.to_string(),
            value: Some(value),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Positive,
    NonNegative,
    Negative,
    NonPositive,
}

impl Sign {
    fn holds(self, x: f64) -> bool {
        match self {
            Sign::Positive => x > 0.0,
            Sign::NonNegative => x >= 0.0,
            Sign::Negative => x < 0.0,
            Sign::NonPositive => x <= 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Scalar,
    Vector,
    Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Alternative {
    /// A conjunction such as `positive integer scalar`; `kinds` keeps the
    /// order used when printing.
    Numeric {
        kinds: Vec<Kind>,
        shape: Option<Shape>,
        sign: Option<Sign>,
        integer: bool,
    },
    Index,
    Indices,
    Boolean,
    List(Vec<ListEntry>),
    Text,
    Struct,
    FunctionHandle,
}

/// Result of checking a value against a type.
#[derive(Debug, Clone, PartialEq)]
pub enum Checked {
    Num(NumArray),
    /// Boolean or list selection, numbered from 0.
    Index(usize),
    Text(String),
    Struct,
    Handle,
}

pub const BOOLEAN_VALUES: [&str; 2] = ["off", "on"];

fn is_integer(x: f64) -> bool {
    (x - x.round()) == 0.0
}

impl Alternative {
    fn from_kinds(kinds: Vec<Kind>, list: Option<&[ListEntry]>) -> Result<Self, TypeError> {
        if kinds.is_empty() {
            return Err(TypeError("empty type alternative".into()));
        }
        for (i, a) in kinds.iter().enumerate() {
            for b in &kinds[i + 1..] {
                if !a.combines_with(*b) {
                    return Err(TypeError(format!(
                        "type '{}' cannot be combined with '{}'",
                        a.name(),
                        b.name()
                    )));
                }
            }
        }
        if kinds.len() == 1 {
            match kinds[0] {
                Kind::Index => return Ok(Alternative::Index),
                Kind::Indices => return Ok(Alternative::Indices),
                Kind::Boolean => return Ok(Alternative::Boolean),
                Kind::Text => return Ok(Alternative::Text),
                Kind::Struct => return Ok(Alternative::Struct),
                Kind::FunctionHandle => return Ok(Alternative::FunctionHandle),
                Kind::List => {
                    let entries = list
                        .filter(|l| !l.is_empty())
                        .ok_or_else(|| TypeError("list type needs at least one value".into()))?;
                    return Ok(Alternative::List(entries.to_vec()));
                }
                _ => {}
            }
        }
        let shape = kinds.iter().find_map(|k| match k {
            Kind::Scalar => Some(Shape::Scalar),
            Kind::Vector => Some(Shape::Vector),
            Kind::Matrix => Some(Shape::Matrix),
            _ => None,
        });
        let sign = kinds.iter().find_map(|k| match k {
            Kind::Positive => Some(Sign::Positive),
            Kind::NonNegative => Some(Sign::NonNegative),
            Kind::Negative => Some(Sign::Negative),
            Kind::NonPositive => Some(Sign::NonPositive),
            _ => None,
        });
        Ok(Alternative::Numeric {
            integer: kinds.contains(&Kind::Integer),
            kinds,
            shape,
            sign,
        })
    }

    fn check(&self, value: &OptionValue) -> Option<Checked> {
        match (self, value) {
            (
                Alternative::Numeric {
                    shape,
                    sign,
                    integer,
                    ..
                },
                OptionValue::Num(a),
            ) => {
                let shape_ok = match shape {
                    Some(Shape::Scalar) => a.is_scalar(),
                    Some(Shape::Vector) => a.is_vector(),
                    Some(Shape::Matrix) | None => true,
                };
                let ok = shape_ok
                    && (!integer || a.data.iter().all(|x| is_integer(*x)))
                    && sign.is_none_or(|s| a.data.iter().all(|x| s.holds(*x)));
                ok.then(|| Checked::Num(a.clone()))
            }
            (Alternative::Index, OptionValue::Num(a)) => (a.is_scalar()
                && is_integer(a.data[0])
                && a.data[0] > 0.0)
                .then(|| Checked::Num(a.clone())),
            (Alternative::Indices, OptionValue::Num(a)) => (a.is_vector()
                && a.data.iter().all(|x| is_integer(*x) && *x > 0.0))
            .then(|| Checked::Num(a.clone())),
            (Alternative::Boolean, OptionValue::Bool(b)) => Some(Checked::Index(*b as usize)),
            (Alternative::Boolean, OptionValue::Text(s)) => {
                match s.trim().to_ascii_lowercase().as_str() {
                    "on" | "yes" | "true" => Some(Checked::Index(1)),
                    "off" | "no" | "false" => Some(Checked::Index(0)),
                    _ => None,
                }
            }
            (Alternative::Boolean, OptionValue::Num(a)) => match a.as_scalar() {
                Some(x) if x == 0.0 => Some(Checked::Index(0)),
                Some(x) if x == 1.0 => Some(Checked::Index(1)),
                _ => None,
            },
            (Alternative::List(entries), OptionValue::Text(s)) => {
                let s = s.trim();
                entries
                    .iter()
                    .position(|e| e.name.eq_ignore_ascii_case(s))
                    .map(Checked::Index)
            }
            (Alternative::List(entries), OptionValue::Num(a)) => {
                let x = a.as_scalar()?;
                if is_integer(x) && x >= 0.0 && (x as usize) < entries.len() {
                    return Some(Checked::Index(x as usize));
                }
                entries
                    .iter()
                    .position(|e| e.value == Some(x))
                    .map(Checked::Index)
            }
            (Alternative::Text, OptionValue::Text(s)) => Some(Checked::Text(s.clone())),
            (Alternative::Struct, OptionValue::Struct(_)) => Some(Checked::Struct),
            (Alternative::FunctionHandle, OptionValue::Handle(_)) => Some(Checked::Handle),
            _ => None,
        }
    }

    fn render(&self, default: Option<usize>) -> String {
        let quoted = |i: usize, name: &str, value: Option<f64>| {
            let mut s = if default == Some(i) {
                format!("{{'{name}'}}")
            } else {
                format!("'{name}'")
            };
            if let Some(v) = value {
                s.push_str(&format!(" ({})", format_number(v)));
            }
            s
        };
        match self {
            Alternative::Numeric { kinds, .. } => kinds
                .iter()
                .map(|k| k.name())
                .collect::<Vec<_>>()
                .join(" "),
            Alternative::Boolean => BOOLEAN_VALUES
                .iter()
                .enumerate()
                .map(|(i, n)| quoted(i, n, None))
                .collect::<Vec<_>>()
                .join(" | "),
            Alternative::List(entries) => entries
                .iter()
                .enumerate()
                .map(|(i, e)| quoted(i, &e.name, e.value))
                .collect::<Vec<_>>()
                .join(" | "),
            Alternative::Index => "index".into(),
            Alternative::Indices => "indices".into(),
            Alternative::Text => "text".into(),
            Alternative::Struct => "struct".into(),
            Alternative::FunctionHandle => "function_handle".into(),
        }
    }

    fn is_selection(&self) -> bool {
        matches!(self, Alternative::Boolean | Alternative::List(_))
    }
}

/// A full option type: one or more alternatives.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionType {
    alternatives: Vec<Alternative>,
}

impl OptionType {
    /// Parses a type expression like `"positive scalar | positive vector"`.
    /// `list` alternatives take their entries from `list`.
    pub fn parse(expr: &str, list: &[ListEntry]) -> Result<Self, TypeError> {
        let alternatives = expr
            .split('|')
            .map(|alt| {
                let kinds = alt
                    .split_whitespace()
                    .map(Kind::from_str)
                    .collect::<Result<Vec<_>, _>>()?;
                Alternative::from_kinds(kinds, Some(list))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let selections = alternatives.iter().filter(|a| a.is_selection()).count();
        if selections > 1 {
            return Err(TypeError("at most one boolean or list alternative".into()));
        }
        Ok(Self { alternatives })
    }

    pub fn alternatives(&self) -> &[Alternative] {
        &self.alternatives
    }

    /// The list entries of the selection alternative, if any. Booleans report
    /// `off`, `on`.
    pub fn selection_entries(&self) -> Option<Vec<ListEntry>> {
        self.alternatives.iter().find_map(|a| match a {
            Alternative::Boolean => Some(BOOLEAN_VALUES.iter().map(|n| ListEntry::new(n)).collect()),
            Alternative::List(e) => Some(e.clone()),
            _ => None,
        })
    }

    pub fn is_boolean(&self) -> bool {
        self.alternatives.contains(&Alternative::Boolean)
    }

    /// Checks `value` against the alternatives in order; the first match wins.
    pub fn check(&self, value: &OptionValue) -> Option<Checked> {
        self.alternatives.iter().find_map(|a| a.check(value))
    }

    /// Renders the bracketed type string used by the info listing, with the
    /// default marked in braces.
    pub fn render(&self, default: &OptionValue) -> String {
        let selected = match self.check(default) {
            Some(Checked::Index(i)) => Some(i),
            _ => None,
        };
        let body = self
            .alternatives
            .iter()
            .map(|a| a.render(if a.is_selection() { selected } else { None }))
            .collect::<Vec<_>>()
            .join(" | ");
        if selected.is_some() {
            format!("[ {body} ]")
        } else {
            format!("[ {body} {{{default}}} ]")
        }
    }
}
