//! Temporal pattern language.
//!
//! ```text
//! pattern := term { "W[" number "," number "]" term } ;
//! term    := PATH | "(" pattern ")" ;
//! number  := digits [ "." digit [ digit ] ]      (hours)
//! ```
//!
//! `A W[a,b] B` reads "A followed by B, starting between a and b hours
//! later". The operator is left-associative and `W` is case-insensitive.
//! Whitespace is insignificant.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ledger::{EventType, Taxonomy};
use crate::time::{format_hours, hours_to_seconds, seconds_to_hours};

/// Closed interval `[start, end]` of seconds between two events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Window {
    pub start: i64,
    pub end: i64,
}

impl Window {
    pub fn new(start: i64, end: i64) -> Result<Self> {
        let w = Self { start, end };
        w.validate()?;
        Ok(w)
    }

    pub fn from_hours(start: f64, end: f64) -> Result<Self> {
        if !start.is_finite() || !end.is_finite() {
            return Err(Error::InvalidWindow(format!("[{start}, {end}] is not finite")));
        }
        Self::new(hours_to_seconds(start), hours_to_seconds(end))
    }

    pub fn validate(&self) -> Result<()> {
        if self.start < 0 {
            return Err(Error::InvalidWindow(format!("start {}s is negative", self.start)));
        }
        if self.start > self.end {
            return Err(Error::InvalidWindow(format!(
                "start {}s exceeds end {}s",
                self.start, self.end
            )));
        }
        Ok(())
    }

    pub fn contains(&self, delta: i64) -> bool {
        self.start <= delta && delta <= self.end
    }

    pub fn width(&self) -> i64 {
        self.end - self.start
    }

    pub fn hours(&self) -> [f64; 2] {
        [seconds_to_hours(self.start), seconds_to_hours(self.end)]
    }

    /// Whether both bounds are whole hundredths of an hour and so can be
    /// written in the pattern grammar.
    pub fn is_representable(&self) -> bool {
        self.start % 36 == 0 && self.end % 36 == 0
    }

    pub fn overlaps(&self, other: &Window) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", format_hours(self.start), format_hours(self.end))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Pattern {
    Atom(EventType),
    /// `left` followed by `right` with the gap between their anchor times
    /// inside `window`.
    Seq {
        left: Box<Pattern>,
        right: Box<Pattern>,
        window: Window,
    },
}

impl Pattern {
    pub fn atom(t: EventType) -> Self {
        Pattern::Atom(t)
    }

    pub fn seq(left: Pattern, right: Pattern, window: Window) -> Result<Self> {
        window.validate()?;
        if !window.is_representable() {
            return Err(Error::InvalidWindow(format!(
                "{}s..{}s is not a whole number of hundredths of an hour",
                window.start, window.end
            )));
        }
        Ok(Pattern::Seq {
            left: Box::new(left),
            right: Box::new(right),
            window,
        })
    }

    /// Atoms in left-to-right order.
    pub fn atoms(&self) -> Vec<&EventType> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a EventType>) {
        match self {
            Pattern::Atom(t) => out.push(t),
            Pattern::Seq { left, right, .. } => {
                left.collect_atoms(out);
                right.collect_atoms(out);
            }
        }
    }

    /// Number of nested `Seq` levels; an atom has depth 0.
    pub fn depth(&self) -> usize {
        match self {
            Pattern::Atom(_) => 0,
            Pattern::Seq { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn as_atom(&self) -> Option<&EventType> {
        match self {
            Pattern::Atom(t) => Some(t),
            Pattern::Seq { .. } => None,
        }
    }

    /// Fails with every atom that is missing from `taxonomy`.
    pub fn validate(&self, taxonomy: &Taxonomy) -> Result<()> {
        let mut unknown: Vec<String> = Vec::new();
        for atom in self.atoms() {
            if !taxonomy.contains(atom) && !unknown.iter().any(|u| u == atom.as_str()) {
                unknown.push(atom.to_string());
            }
        }
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::UnknownEventType(unknown))
        }
    }

    fn write(&self, out: &mut String, as_right: bool) {
        match self {
            Pattern::Atom(t) => out.push_str(t.as_str()),
            Pattern::Seq {
                left,
                right,
                window,
            } => {
                if as_right {
                    out.push('(');
                }
                left.write(out, false);
                out.push_str(" W");
                out.push_str(&window.to_string());
                out.push(' ');
                right.write(out, true);
                if as_right {
                    out.push(')');
                }
            }
        }
    }
}

pub fn parse_pattern(text: &str) -> Result<Pattern> {
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    let pattern = p.pattern()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.expected("`W[` or end of input"));
    }
    Ok(pattern)
}

/// Canonical text. Parentheses appear only around a sequence in right
/// operand position.
pub fn format_pattern(pattern: &Pattern) -> String {
    let mut out = String::new();
    pattern.write(&mut out, false);
    out
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_pattern(self))
    }
}

impl FromStr for Pattern {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_pattern(s)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(|b| b.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn expected(&self, what: &str) -> Error {
        Error::Syntax {
            offset: self.pos,
            expected: what.to_string(),
        }
    }

    /// After optional whitespace starting at `at`, is the next byte `[`?
    fn bracket_follows(&self, mut at: usize) -> bool {
        while self.src.get(at).is_some_and(|b| b.is_ascii_whitespace()) {
            at += 1;
        }
        self.src.get(at) == Some(&b'[')
    }

    fn pattern(&mut self) -> Result<Pattern> {
        let mut left = self.term()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'W' | b'w') if self.bracket_follows(self.pos + 1) => {
                    self.pos += 1;
                    let window = self.window()?;
                    let right = self.term()?;
                    left = Pattern::Seq {
                        left: Box::new(left),
                        right: Box::new(right),
                        window,
                    };
                }
                _ => return Ok(left),
            }
        }
    }

    fn term(&mut self) -> Result<Pattern> {
        self.skip_ws();
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.pattern()?;
                self.skip_ws();
                if self.peek() != Some(b')') {
                    return Err(self.expected("`)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            _ => self.path(),
        }
    }

    fn path(&mut self) -> Result<Pattern> {
        let start = self.pos;
        while let Some(b) = self.peek() {
            let path_byte = b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_' || b == b'.';
            if !path_byte {
                break;
            }
            // `aw[1,2]b` splits as `a W[1,2] b`.
            if b == b'w' && self.pos > start && self.bracket_follows(self.pos + 1) {
                break;
            }
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        if text.is_empty() {
            return Err(self.expected("event type path or `(`"));
        }
        EventType::new(text).map(Pattern::Atom).map_err(|_| Error::Syntax {
            offset: start,
            expected: format!("dotted lowercase event type path, found `{text}`"),
        })
    }

    fn window(&mut self) -> Result<Window> {
        self.skip_ws();
        if self.peek() != Some(b'[') {
            return Err(self.expected("`[`"));
        }
        self.pos += 1;
        let at = self.pos;
        let start = self.number()?;
        self.skip_ws();
        if self.peek() != Some(b',') {
            return Err(self.expected("`,`"));
        }
        self.pos += 1;
        let end = self.number()?;
        self.skip_ws();
        if self.peek() != Some(b']') {
            return Err(self.expected("`]`"));
        }
        self.pos += 1;
        if start > end {
            return Err(Error::Window {
                offset: at,
                message: format!(
                    "start {}h exceeds end {}h",
                    format_hours(start),
                    format_hours(end)
                ),
            });
        }
        Ok(Window { start, end })
    }

    /// Hours with at most two fraction digits, returned as exact seconds.
    fn number(&mut self) -> Result<i64> {
        self.skip_ws();
        let at = self.pos;
        if self.peek() == Some(b'-') {
            return Err(Error::Window {
                offset: at,
                message: "window bounds must be non-negative".into(),
            });
        }
        let mut whole: i64 = 0;
        let mut digits = 0;
        while let Some(d @ b'0'..=b'9') = self.peek() {
            if digits >= 9 {
                return Err(self.expected("at most 9 integer digits"));
            }
            whole = whole * 10 + i64::from(d - b'0');
            digits += 1;
            self.pos += 1;
        }
        if digits == 0 {
            return Err(self.expected("number of hours"));
        }
        let mut centi = 0;
        if self.peek() == Some(b'.') {
            self.pos += 1;
            let mut frac_digits = 0;
            while let Some(d @ b'0'..=b'9') = self.peek() {
                if frac_digits == 2 {
                    return Err(self.expected("at most 2 fraction digits"));
                }
                centi += i64::from(d - b'0') * if frac_digits == 0 { 10 } else { 1 };
                frac_digits += 1;
                self.pos += 1;
            }
            if frac_digits == 0 {
                return Err(self.expected("fraction digit"));
            }
        }
        Ok(whole * 3600 + centi * 36)
    }
}
