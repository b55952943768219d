//! Linear payoff expressions in `x`, `y` and the transcribed 64-cell table.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::GameError;
use crate::actors::StrategyProfile;

/// `c + cx·x + cy·y` with integer coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Lin {
    pub c: i64,
    pub x: i64,
    pub y: i64,
}

impl Lin {
    pub const fn c(c: i64) -> Lin {
        Lin { c, x: 0, y: 0 }
    }

    pub const fn x() -> Lin {
        Lin { c: 0, x: 1, y: 0 }
    }

    pub const fn y() -> Lin {
        Lin { c: 0, x: 0, y: 1 }
    }

    pub fn eval(&self, x: i64, y: i64) -> i64 {
        self.c + self.x * x + self.y * y
    }

    /// Parses sums such as `x-11`, `16-x`, `-x-y` or `-24`.
    pub fn parse(src: &str) -> Result<Lin, GameError> {
        let err = || GameError::Parse(format!("bad linear term {src:?}"));
        let s: String = src.chars().filter(|c| !c.is_whitespace()).collect();
        if s.is_empty() {
            return Err(err());
        }
        let mut out = Lin::default();
        let mut rest = s.as_str();
        while !rest.is_empty() {
            let (sign, body) = match rest.as_bytes()[0] {
                b'-' => (-1, &rest[1..]),
                b'+' => (1, &rest[1..]),
                _ => (1, rest),
            };
            let end = body.find(['+', '-']).unwrap_or(body.len());
            let term = &body[..end];
            let coef = |digits: &str| -> Result<i64, GameError> {
                if digits.is_empty() {
                    Ok(1)
                } else {
                    digits.parse::<i64>().map_err(|_| err())
                }
            };
            if let Some(k) = term.strip_suffix('x') {
                out.x += sign * coef(k)?;
            } else if let Some(k) = term.strip_suffix('y') {
                out.y += sign * coef(k)?;
            } else {
                out.c += sign * term.parse::<i64>().map_err(|_| err())?;
            }
            rest = &body[end..];
        }
        Ok(out)
    }
}

impl Add for Lin {
    type Output = Lin;
    fn add(self, o: Lin) -> Lin {
        Lin { c: self.c + o.c, x: self.x + o.x, y: self.y + o.y }
    }
}

impl Sub for Lin {
    type Output = Lin;
    fn sub(self, o: Lin) -> Lin {
        self + (-o)
    }
}

impl Neg for Lin {
    type Output = Lin;
    fn neg(self) -> Lin {
        Lin { c: -self.c, x: -self.x, y: -self.y }
    }
}

impl fmt::Display for Lin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = String::new();
        for (coef, name) in [(self.x, "x"), (self.y, "y")] {
            let plus = if parts.is_empty() { "" } else { "+" };
            match coef {
                0 => {}
                1 => parts.push_str(&format!("{plus}{name}")),
                -1 => parts.push_str(&format!("-{name}")),
                k if k > 0 => parts.push_str(&format!("{plus}{k}{name}")),
                k => parts.push_str(&format!("{k}{name}")),
            }
        }
        if self.c != 0 || parts.is_empty() {
            if self.c > 0 && !parts.is_empty() {
                parts.push('+');
            }
            parts.push_str(&self.c.to_string());
        }
        f.write_str(&parts)
    }
}

/// A payoff triple in (seller, consumer, provider) order, symbolic in `x`, `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolicPayoff {
    pub seller: Lin,
    pub consumer: Lin,
    pub provider: Lin,
}

impl SymbolicPayoff {
    /// Parses `(a,b,c)`. Empty components from doubled commas are skipped.
    pub fn parse(src: &str) -> Result<SymbolicPayoff, GameError> {
        let inner = src
            .trim()
            .strip_prefix('(')
            .and_then(|s| s.strip_suffix(')'))
            .ok_or_else(|| GameError::Parse(format!("payoff {src:?} is not parenthesised")))?;
        let parts: Vec<&str> = inner.split(',').map(str::trim).filter(|p| !p.is_empty()).collect();
        let [a, b, c] = parts[..] else {
            return Err(GameError::Parse(format!("payoff {src:?} does not have three components")));
        };
        Ok(SymbolicPayoff { seller: Lin::parse(a)?, consumer: Lin::parse(b)?, provider: Lin::parse(c)? })
    }

    pub fn eval(&self, x: i64, y: i64) -> super::PayoffVector {
        super::PayoffVector {
            seller: self.seller.eval(x, y),
            consumer: self.consumer.eval(x, y),
            provider: self.provider.eval(x, y),
        }
    }
}

impl fmt::Display for SymbolicPayoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.seller, self.consumer, self.provider)
    }
}

/// The published payoff table, cell text kept as printed (including the
/// doubled commas in the `c?h?` column).
pub const REFERENCE_TABLE: [(&str, &str); 64] = [
    ("aei", "(9,-4,2)"),
    ("bei", "(19,-24,2)"),
    ("cei", "(10,-24,2)"),
    ("dei", "(20,-24,2)"),
    ("aej", "(9,-24,3)"),
    ("bej", "(19,-24,3)"),
    ("cej", "(10,-24,3)"),
    ("dej", "(20,-24,3)"),
    ("aek", "(9,-24,3)"),
    ("bek", "(19,-24,3)"),
    ("cek", "(10,-24,3)"),
    ("dek", "(20,-24,3)"),
    ("ael", "(9,-24,4)"),
    ("bel", "(19,-24,4)"),
    ("cel", "(10,-24,4)"),
    ("del", "(20,-24,4)"),
    ("afi", "(x-11,16-x,2)"),
    ("bfi", "(x-1,-24,2)"),
    ("cfi", "(x-10,-24,2)"),
    ("dfi", "(x,-24,2)"),
    ("afj", "(x-11,-24,3)"),
    ("bfj", "(x-1,-24,3)"),
    ("cfj", "(x-10,-24,3)"),
    ("dfj", "(x,-24,3)"),
    ("afk", "(x-11,-24,3)"),
    ("bfk", "(x-1,-24,3)"),
    ("cfk", "(x-10,-24,3)"),
    ("dfk", "(x,-24,3)"),
    ("afl", "(x-11,-24,4)"),
    ("bfl", "(x-1,-24,4)"),
    ("cfl", "(x-10,-24,4)"),
    ("dfl", "(x,-24,4)"),
    ("agi", "(9,-y,y-2)"),
    ("bgi", "(19,-24,y-2)"),
    ("cgi", "(10,-24,y-2)"),
    ("dgi", "(20,-24,y-2)"),
    ("agj", "(9,-24,y-1)"),
    ("bgj", "(19,-24,y-1)"),
    ("cgj", "(10,-24,y-1)"),
    ("dgj", "(20,-24,y-1)"),
    ("agk", "(9,-24,y-1)"),
    ("bgk", "(19,-24,y-1)"),
    ("cgk", "(10,-24,y-1)"),
    ("dgk", "(20,-24,y-1)"),
    ("agl", "(9,-24,y)"),
    ("bgl", "(19,-24,y)"),
    ("cgl", "(10,-24,y)"),
    ("dgl", "(20,-24,y)"),
    ("ahi", "(x-11,-x-y,y-2)"),
    ("bhi", "(x-1,-24,y-2)"),
    ("chi", "(x-10,,-24,y-2)"),
    ("dhi", "(x,-24,y-2)"),
    ("ahj", "(x-11,-24,y-1)"),
    ("bhj", "(x-1,-24,y-1)"),
    ("chj", "(x-10,,-24,y-1)"),
    ("dhj", "(x,-24,y-1)"),
    ("ahk", "(x-11,-24,y-1)"),
    ("bhk", "(x-1,-24,y-1)"),
    ("chk", "(x-10,,-24,y-1)"),
    ("dhk", "(x,-24,y-1)"),
    ("ahl", "(x-11,-24,y)"),
    ("bhl", "(x-1,-24,y)"),
    ("chl", "(x-10,,-24,y)"),
    ("dhl", "(x,-24,y)"),
];

pub fn parse_table(cells: &[(&str, &str)]) -> Result<Vec<(StrategyProfile, SymbolicPayoff)>, GameError> {
    cells
        .iter()
        .map(|(code, cell)| {
            let profile =
                code.parse().map_err(|e: crate::actors::ProfileParseError| GameError::Parse(e.to_string()))?;
            Ok((profile, SymbolicPayoff::parse(cell)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lin_parse_forms() {
        assert_eq!(Lin::parse("9").unwrap(), Lin::c(9));
        assert_eq!(Lin::parse("-24").unwrap(), Lin::c(-24));
        assert_eq!(Lin::parse("x-11").unwrap(), Lin { c: -11, x: 1, y: 0 });
        assert_eq!(Lin::parse("16-x").unwrap(), Lin { c: 16, x: -1, y: 0 });
        assert_eq!(Lin::parse("-x-y").unwrap(), Lin { c: 0, x: -1, y: -1 });
        assert_eq!(Lin::parse("-y").unwrap(), Lin { c: 0, x: 0, y: -1 });
        assert!(Lin::parse("").is_err());
        assert!(Lin::parse("z+1").is_err());
        assert_eq!(Lin::parse("2x-3y").unwrap(), Lin { c: 0, x: 2, y: -3 });
        assert!(Lin::parse("3-").is_err());
    }

    #[test]
    fn lin_display_roundtrip() {
        for s in ["9", "-24", "x-11", "-x+16", "-x-y", "y-2", "x", "-y", "0", "2x+3y-1", "-2x"] {
            let l = Lin::parse(s).unwrap();
            assert_eq!(Lin::parse(&l.to_string()).unwrap(), l, "{s} -> {l}");
        }
    }

    #[test]
    fn doubled_comma_is_tolerated() {
        let p = SymbolicPayoff::parse("(x-10,,-24,y-2)").unwrap();
        assert_eq!(p.eval(10, 2).seller, 0);
        assert_eq!(p.eval(10, 2).consumer, -24);
        assert!(SymbolicPayoff::parse("(1,2)").is_err());
        assert!(SymbolicPayoff::parse("1,2,3").is_err());
    }

    #[test]
    fn table_covers_every_profile_once() {
        let parsed = parse_table(&REFERENCE_TABLE).unwrap();
        let set: std::collections::BTreeSet<_> = parsed.iter().map(|(p, _)| *p).collect();
        assert_eq!(set.len(), 64);
    }
}
