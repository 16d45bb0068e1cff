//! Rectangular constraints and the delay intervals they induce.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::rational::Rational;
use crate::valuation::Valuation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rel {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
}

impl Rel {
    pub fn holds(self, lhs: &Rational, rhs: &Rational) -> bool {
        match self {
            Rel::Lt => lhs < rhs,
            Rel::Le => lhs <= rhs,
            Rel::Eq => lhs == rhs,
            Rel::Ge => lhs >= rhs,
            Rel::Gt => lhs > rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Lt => "<",
            Rel::Le => "<=",
            Rel::Eq => "=",
            Rel::Ge => ">=",
            Rel::Gt => ">",
        }
    }
}

/// `var ⋈ bound` with an integer bound.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub var: usize,
    pub rel: Rel,
    pub bound: i64,
}

impl Atom {
    pub fn new(var: usize, rel: Rel, bound: i64) -> Self {
        Atom { var, rel, bound }
    }

    pub fn holds(&self, v: &Valuation) -> bool {
        self.rel.holds(&v[self.var], &Rational::from_integer(self.bound))
    }

    /// `{ t >= 0 : value + rate * t ⋈ bound }`.
    pub fn delay_interval(&self, value: &Rational, rate: &Rational) -> Interval {
        let k = Rational::from_integer(self.bound);
        if rate.is_zero() {
            return if self.rel.holds(value, &k) {
                Interval::all()
            } else {
                Interval::empty()
            };
        }
        // rate > 0: value + rate*t ⋈ k  <=>  t ⋈ (k - value) / rate
        let c = (&k - value) / rate;
        let bounded = |lo_closed: bool, hi: Option<(Rational, bool)>, lo: Rational| Interval {
            lo,
            lo_closed,
            hi,
        };
        let iv = match self.rel {
            Rel::Lt => bounded(true, Some((c, false)), Rational::zero()),
            Rel::Le => bounded(true, Some((c, true)), Rational::zero()),
            Rel::Eq => bounded(true, Some((c.clone(), true)), c),
            Rel::Ge => bounded(true, None, c),
            Rel::Gt => bounded(false, None, c),
        };
        iv.intersect(&Interval::all())
    }
}

/// A conjunction of atoms, or one of the constants.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub enum Constraint {
    #[default]
    True,
    False,
    And(Vec<Atom>),
}

impl Constraint {
    pub fn atoms(atoms: Vec<Atom>) -> Self {
        if atoms.is_empty() {
            Constraint::True
        } else {
            Constraint::And(atoms)
        }
    }

    pub fn holds(&self, v: &Valuation) -> bool {
        self.first_violation(v).is_none()
    }

    /// The first atom `v` violates; `False` is violated by everything.
    pub fn first_violation(&self, v: &Valuation) -> Option<Violation> {
        match self {
            Constraint::True => None,
            Constraint::False => Some(Violation::False),
            Constraint::And(atoms) => atoms.iter().find(|a| !a.holds(v)).cloned().map(Violation::Atom),
        }
    }

    /// `{ t >= 0 : v + rates * t satisfies self }`, convex because every
    /// atom's solution set in `t` is an interval.
    pub fn delay_interval(&self, v: &Valuation, rates: &[Rational]) -> Interval {
        match self {
            Constraint::True => Interval::all(),
            Constraint::False => Interval::empty(),
            Constraint::And(atoms) => atoms.iter().fold(Interval::all(), |acc, a| {
                acc.intersect(&a.delay_interval(&v[a.var], &rates[a.var]))
            }),
        }
    }

    pub fn vars(&self) -> Vec<usize> {
        match self {
            Constraint::And(atoms) => atoms.iter().map(|a| a.var).collect(),
            _ => Vec::new(),
        }
    }

    pub fn display<'a>(&'a self, names: &'a [String]) -> impl fmt::Display + 'a {
        ConstraintDisplay { c: self, names }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    False,
    Atom(Atom),
}

impl Violation {
    pub fn describe(&self, names: &[String]) -> String {
        match self {
            Violation::False => "false".to_string(),
            Violation::Atom(a) => format!("{} {} {}", names[a.var], a.rel.symbol(), a.bound),
        }
    }
}

struct ConstraintDisplay<'a> {
    c: &'a Constraint,
    names: &'a [String],
}

impl fmt::Display for ConstraintDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.c {
            Constraint::True => f.write_str("true"),
            Constraint::False => f.write_str("false"),
            Constraint::And(atoms) => {
                let parts: Vec<String> = atoms
                    .iter()
                    .map(|a| format!("{} {} {}", self.names[a.var], a.rel.symbol(), a.bound))
                    .collect();
                f.write_str(&parts.join(" && "))
            }
        }
    }
}

/// An interval of non-negative delays. `hi = None` is unbounded above.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interval {
    pub lo: Rational,
    pub lo_closed: bool,
    pub hi: Option<(Rational, bool)>,
}

impl Interval {
    /// `[0, ∞)`.
    pub fn all() -> Self {
        Interval {
            lo: Rational::zero(),
            lo_closed: true,
            hi: None,
        }
    }

    pub fn empty() -> Self {
        Interval {
            lo: Rational::zero(),
            lo_closed: false,
            hi: Some((Rational::zero(), false)),
        }
    }

    pub fn point(t: Rational) -> Self {
        Interval {
            lo: t.clone(),
            lo_closed: true,
            hi: Some((t, true)),
        }
    }

    pub fn is_empty(&self) -> bool {
        match &self.hi {
            None => false,
            Some((hi, hi_closed)) => self.lo > *hi || (self.lo == *hi && !(self.lo_closed && *hi_closed)),
        }
    }

    pub fn contains(&self, t: &Rational) -> bool {
        let above = if self.lo_closed { *t >= self.lo } else { *t > self.lo };
        let below = match &self.hi {
            None => true,
            Some((hi, true)) => t <= hi,
            Some((hi, false)) => t < hi,
        };
        above && below
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        let (lo, lo_closed) = match self.lo.cmp(&other.lo) {
            std::cmp::Ordering::Greater => (self.lo.clone(), self.lo_closed),
            std::cmp::Ordering::Less => (other.lo.clone(), other.lo_closed),
            std::cmp::Ordering::Equal => (self.lo.clone(), self.lo_closed && other.lo_closed),
        };
        let hi = match (&self.hi, &other.hi) {
            (None, h) | (h, None) => h.clone(),
            (Some((a, ac)), Some((b, bc))) => Some(match a.cmp(b) {
                std::cmp::Ordering::Less => (a.clone(), *ac),
                std::cmp::Ordering::Greater => (b.clone(), *bc),
                std::cmp::Ordering::Equal => (a.clone(), *ac && *bc),
            }),
        };
        Interval { lo, lo_closed, hi }
    }

    /// The least member if it exists, else some member near the infimum.
    pub fn pick(&self) -> Option<Rational> {
        if self.is_empty() {
            return None;
        }
        if self.lo_closed {
            return Some(self.lo.clone());
        }
        let step = match &self.hi {
            Some((hi, _)) => ((hi - &self.lo) / Rational::from_integer(2)).min(Rational::one()),
            None => Rational::one(),
        };
        Some(&self.lo + &step)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("{}");
        }
        let open = if self.lo_closed { '[' } else { '(' };
        match &self.hi {
            None => write!(f, "{open}{}, inf)", self.lo),
            Some((hi, closed)) => write!(f, "{open}{}, {}{}", self.lo, hi, if *closed { ']' } else { ')' }),
        }
    }
}

/// A finite union of delay intervals.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DelaySet(pub Vec<Interval>);

impl DelaySet {
    pub fn empty() -> Self {
        DelaySet(Vec::new())
    }

    pub fn from_interval(iv: Interval) -> Self {
        if iv.is_empty() {
            DelaySet(Vec::new())
        } else {
            DelaySet(vec![iv])
        }
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(Interval::is_empty)
    }

    pub fn contains(&self, t: &Rational) -> bool {
        self.0.iter().any(|iv| iv.contains(t))
    }

    pub fn pick(&self) -> Option<Rational> {
        self.0.iter().filter_map(Interval::pick).min()
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.0
    }
}
