//! Relational reachability queries: parsing, validation, normalization.
//!
//! Concrete syntax (one query per input):
//!
//! ```text
//! exists s1, s2 . 1*P(s1, s0, F T1) - 1/2*P(s2, s0, F T2) ~ 0 eps 1/100
//! forall s . P(s, init, F ret0) - P(s, init, F ret1) ~ 0 eps 0.05
//! exists a, b . P(a, 0, F goal) >= P(b, 0, F goal)
//! ```
//!
//! A query quantifies over scheduler variables, then compares a linear
//! combination of reachability probabilities against a rational threshold.
//! Comparators: `>`, `>=`, `<`, `<=`, `=`, `!=`, `~` (within eps), `!~`
//! (further than eps); `eps` is required exactly for `~` and `!~`. Both sides
//! of the comparator may be sums of probability terms and constants; the
//! query is stored with all terms on the left and a single constant on the
//! right. State references are a label naming exactly one state, or a state
//! index; targets are labels.

use crate::model::Mdp;
use crate::rational::{fmt_rat, parse_rat, Rat};
use num::{One, Signed, Zero};
use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantifier {
    Exists,
    Forall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comp {
    Gt,
    Ge,
    Lt,
    Le,
    Eq,
    Ne,
    Approx,
    NotApprox,
}

impl Comp {
    fn symbol(self) -> &'static str {
        match self {
            Comp::Gt => ">",
            Comp::Ge => ">=",
            Comp::Lt => "<",
            Comp::Le => "<=",
            Comp::Eq => "=",
            Comp::Ne => "!=",
            Comp::Approx => "~",
            Comp::NotApprox => "!~",
        }
    }

    fn takes_epsilon(self) -> bool {
        matches!(self, Comp::Approx | Comp::NotApprox)
    }

    /// Comparator of the complemented comparison (`not (x comp q)`).
    fn complement(self) -> Comp {
        match self {
            Comp::Gt => Comp::Le,
            Comp::Le => Comp::Gt,
            Comp::Ge => Comp::Lt,
            Comp::Lt => Comp::Ge,
            Comp::Eq => Comp::Ne,
            Comp::Ne => Comp::Eq,
            Comp::Approx => Comp::NotApprox,
            Comp::NotApprox => Comp::Approx,
        }
    }
}

/// How a state was referred to in the source text; kept for printing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StateRef {
    Label(String),
    Index(usize),
}

impl fmt::Display for StateRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateRef::Label(name) => write!(f, "{name}"),
            StateRef::Index(i) => write!(f, "{i}"),
        }
    }
}

/// One weighted reachability probability `coeff * P(var, state, F target)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Term {
    pub coeff: Rat,
    /// Index into the query's scheduler variable list.
    pub sched: usize,
    pub state_ref: StateRef,
    /// Resolved initial state.
    pub state: usize,
    pub target_label: String,
    /// Resolved target set (may be empty; such a term contributes 0).
    pub target: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub quantifier: Quantifier,
    pub sched_vars: Vec<String>,
    pub terms: Vec<Term>,
    pub comp: Comp,
    pub threshold: Rat,
    pub epsilon: Option<Rat>,
}

/// Canonical comparator after normalization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NormComp {
    Gt,
    Ge,
    /// Within `eps` of the threshold.
    Approx(Rat),
    /// Further than `eps` from the threshold.
    NotApprox(Rat),
}

impl NormComp {
    pub fn is_one_sided(&self) -> bool {
        matches!(self, NormComp::Gt | NormComp::Ge)
    }
}

/// Existentially quantified query over canonical comparators. `negated` set
/// means the original query was universal: its verdict is the complement of
/// this query's verdict.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedQuery {
    pub sched_vars: Vec<String>,
    pub terms: Vec<Term>,
    pub comp: NormComp,
    pub threshold: Rat,
    pub negated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PropertyError {
    #[error("syntax error at offset {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown label {name:?}")]
    UnknownLabel { name: String },
    #[error("state reference {name:?} names {count} states, need exactly one")]
    AmbiguousStateRef { name: String, count: usize },
    #[error("state index {index} out of range (num_states = {num_states})")]
    StateOutOfRange { index: usize, num_states: usize },
    #[error("scheduler variable {name:?} is not declared")]
    UndeclaredSchedulerVar { name: String },
    #[error("scheduler variable {name:?} is declared but unused")]
    UnusedSchedulerVar { name: String },
    #[error("scheduler variable {name:?} is declared twice")]
    DuplicateSchedulerVar { name: String },
    #[error("comparator {comp} requires an eps bound")]
    MissingEpsilon { comp: String },
    #[error("comparator {comp} does not take an eps bound")]
    UnexpectedEpsilon { comp: String },
    #[error("eps must be nonnegative, got {0}")]
    NegativeEpsilon(String),
    #[error("query contains no probability terms")]
    NoTerms,
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Number(String),
    Comma,
    Dot,
    LParen,
    RParen,
    Plus,
    Minus,
    Star,
    Cmp(Comp),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier {s:?}"),
            Tok::Number(s) => write!(f, "number {s:?}"),
            Tok::Comma => write!(f, "','"),
            Tok::Dot => write!(f, "'.'"),
            Tok::LParen => write!(f, "'('"),
            Tok::RParen => write!(f, "')'"),
            Tok::Plus => write!(f, "'+'"),
            Tok::Minus => write!(f, "'-'"),
            Tok::Star => write!(f, "'*'"),
            Tok::Cmp(c) => write!(f, "'{}'", c.symbol()),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, PropertyError> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let start = i;
        match b {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                toks.push((Tok::Ident(text[start..i].to_string()), start));
            }
            b'0'..=b'9' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                } else if i < bytes.len() && bytes[i] == b'/' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                toks.push((Tok::Number(text[start..i].to_string()), start));
            }
            b'.' => {
                // A dot directly starting digits is a decimal like ".5";
                // otherwise it is the quantifier separator.
                if i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit() {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                    toks.push((Tok::Number(text[start..i].to_string()), start));
                } else {
                    toks.push((Tok::Dot, start));
                    i += 1;
                }
            }
            b',' => {
                toks.push((Tok::Comma, start));
                i += 1;
            }
            b'(' => {
                toks.push((Tok::LParen, start));
                i += 1;
            }
            b')' => {
                toks.push((Tok::RParen, start));
                i += 1;
            }
            b'+' => {
                toks.push((Tok::Plus, start));
                i += 1;
            }
            b'-' => {
                toks.push((Tok::Minus, start));
                i += 1;
            }
            b'*' => {
                toks.push((Tok::Star, start));
                i += 1;
            }
            b'>' => {
                if i + 1 < bytes.len() && bytes[i + 1] == b'=' {
                    toks.push((Tok::Cmp(Comp::Ge), start));
                    i += 2;
                } else {
                    toks.push((Tok::Cmp(Comp::Gt), start));
                    i += 1;
                }
            }
            b'<' => {
                if i + 1 < bytes.len() && bytes[i + 1] == b'=' {
                    toks.push((Tok::Cmp(Comp::Le), start));
                    i += 2;
                } else {
                    toks.push((Tok::Cmp(Comp::Lt), start));
                    i += 1;
                }
            }
            b'=' => {
                toks.push((Tok::Cmp(Comp::Eq), start));
                i += 1;
            }
            b'~' => {
                toks.push((Tok::Cmp(Comp::Approx), start));
                i += 1;
            }
            b'!' => {
                if i + 1 < bytes.len() && bytes[i + 1] == b'=' {
                    toks.push((Tok::Cmp(Comp::Ne), start));
                    i += 2;
                } else if i + 1 < bytes.len() && bytes[i + 1] == b'~' {
                    toks.push((Tok::Cmp(Comp::NotApprox), start));
                    i += 2;
                } else {
                    return Err(PropertyError::Syntax {
                        pos: start,
                        message: "'!' must be followed by '=' or '~'".into(),
                    });
                }
            }
            _ => {
                return Err(PropertyError::Syntax {
                    pos: start,
                    message: format!("unexpected character {:?}", text[start..].chars().next().unwrap()),
                });
            }
        }
    }
    toks.push((Tok::Eof, text.len()));
    Ok(toks)
}

// ---------------------------------------------------------------------------
// Parser

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    at: usize,
    mdp: &'a Mdp,
}

/// One parsed summand: a constant, or a probability term.
enum Item {
    Const(Rat),
    Prob {
        coeff: Rat,
        var: String,
        state_ref: StateRef,
        target_label: String,
    },
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn err(&self, message: impl Into<String>) -> PropertyError {
        PropertyError::Syntax {
            pos: self.pos(),
            message: message.into(),
        }
    }

    fn expect(&mut self, want: &Tok, what: &str) -> Result<(), PropertyError> {
        if self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.err(format!("expected {what}, found {}", self.peek())))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, PropertyError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            other => Err(self.err(format!("expected {what}, found {other}"))),
        }
    }

    fn number(&mut self, what: &str) -> Result<Rat, PropertyError> {
        match self.peek().clone() {
            Tok::Number(s) => {
                let pos = self.pos();
                self.bump();
                parse_rat(&s).map_err(|e| PropertyError::Syntax {
                    pos,
                    message: e.to_string(),
                })
            }
            other => Err(self.err(format!("expected {what}, found {other}"))),
        }
    }

    /// `expr := ["+"|"-"] item (("+"|"-") item)*`
    fn expr(&mut self) -> Result<Vec<Item>, PropertyError> {
        let mut items = Vec::new();
        let mut negative = match self.peek() {
            Tok::Minus => {
                self.bump();
                true
            }
            Tok::Plus => {
                self.bump();
                false
            }
            _ => false,
        };
        loop {
            let mut item = self.item()?;
            if negative {
                match &mut item {
                    Item::Const(c) => *c = -c.clone(),
                    Item::Prob { coeff, .. } => *coeff = -coeff.clone(),
                }
            }
            items.push(item);
            negative = match self.peek() {
                Tok::Plus => {
                    self.bump();
                    false
                }
                Tok::Minus => {
                    self.bump();
                    true
                }
                _ => break,
            };
        }
        Ok(items)
    }

    /// `item := rational ["*" pterm] | pterm`
    fn item(&mut self) -> Result<Item, PropertyError> {
        match self.peek() {
            Tok::Number(_) => {
                let value = self.number("a rational")?;
                if matches!(self.peek(), Tok::Star) {
                    self.bump();
                    let (var, state_ref, target_label) = self.pterm()?;
                    Ok(Item::Prob {
                        coeff: value,
                        var,
                        state_ref,
                        target_label,
                    })
                } else {
                    Ok(Item::Const(value))
                }
            }
            Tok::Ident(_) => {
                let (var, state_ref, target_label) = self.pterm()?;
                Ok(Item::Prob {
                    coeff: Rat::one(),
                    var,
                    state_ref,
                    target_label,
                })
            }
            other => Err(self.err(format!("expected a term, found {other}"))),
        }
    }

    /// `pterm := "P" "(" id "," stateref "," "F" labelref ")"`
    fn pterm(&mut self) -> Result<(String, StateRef, String), PropertyError> {
        match self.peek().clone() {
            Tok::Ident(s) if s == "P" => {
                self.bump();
            }
            other => return Err(self.err(format!("expected 'P', found {other}"))),
        }
        self.expect(&Tok::LParen, "'('")?;
        let var = self.ident("a scheduler variable")?;
        self.expect(&Tok::Comma, "','")?;
        let state_ref = match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                StateRef::Label(name)
            }
            Tok::Number(n) => {
                let pos = self.pos();
                self.bump();
                let idx: usize = n.parse().map_err(|_| PropertyError::Syntax {
                    pos,
                    message: format!("state index must be a nonnegative integer, got {n:?}"),
                })?;
                StateRef::Index(idx)
            }
            other => return Err(self.err(format!("expected a state reference, found {other}"))),
        };
        self.expect(&Tok::Comma, "','")?;
        match self.peek().clone() {
            Tok::Ident(s) if s == "F" => {
                self.bump();
            }
            other => return Err(self.err(format!("expected 'F', found {other}"))),
        }
        let target_label = self.ident("a target label")?;
        self.expect(&Tok::RParen, "')'")?;
        Ok((var, state_ref, target_label))
    }

    fn resolve_state(&self, state_ref: &StateRef) -> Result<usize, PropertyError> {
        match state_ref {
            StateRef::Index(i) => {
                if *i >= self.mdp.num_states() {
                    Err(PropertyError::StateOutOfRange {
                        index: *i,
                        num_states: self.mdp.num_states(),
                    })
                } else {
                    Ok(*i)
                }
            }
            StateRef::Label(name) => {
                let states = self
                    .mdp
                    .states_with_label(name)
                    .ok_or_else(|| PropertyError::UnknownLabel { name: name.clone() })?;
                if states.len() != 1 {
                    return Err(PropertyError::AmbiguousStateRef {
                        name: name.clone(),
                        count: states.len(),
                    });
                }
                Ok(*states.iter().next().unwrap())
            }
        }
    }

    fn resolve_target(&self, label: &str) -> Result<BTreeSet<usize>, PropertyError> {
        self.mdp
            .states_with_label(label)
            .cloned()
            .ok_or_else(|| PropertyError::UnknownLabel {
                name: label.to_string(),
            })
    }
}

/// Parses and validates a query against a model's labels and state count.
pub fn parse_query(text: &str, mdp: &Mdp) -> Result<Query, PropertyError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, at: 0, mdp };

    let quantifier = match p.ident("'exists' or 'forall'")?.as_str() {
        "exists" => Quantifier::Exists,
        "forall" => Quantifier::Forall,
        other => {
            return Err(PropertyError::Syntax {
                pos: 0,
                message: format!("expected 'exists' or 'forall', found {other:?}"),
            })
        }
    };
    let mut sched_vars = vec![p.ident("a scheduler variable")?];
    while matches!(p.peek(), Tok::Comma) {
        p.bump();
        sched_vars.push(p.ident("a scheduler variable")?);
    }
    for (i, v) in sched_vars.iter().enumerate() {
        if sched_vars[..i].contains(v) {
            return Err(PropertyError::DuplicateSchedulerVar { name: v.clone() });
        }
    }
    p.expect(&Tok::Dot, "'.'")?;

    let left = p.expr()?;
    let comp = match p.peek().clone() {
        Tok::Cmp(c) => {
            p.bump();
            c
        }
        other => return Err(p.err(format!("expected a comparator, found {other}"))),
    };
    let right = p.expr()?;
    let epsilon = if matches!(p.peek(), Tok::Ident(s) if s == "eps") {
        p.bump();
        let sign = if matches!(p.peek(), Tok::Minus) {
            p.bump();
            -Rat::one()
        } else {
            Rat::one()
        };
        Some(sign * p.number("an eps bound")?)
    } else {
        None
    };
    if !matches!(p.peek(), Tok::Eof) {
        return Err(p.err(format!("expected end of query, found {}", p.peek())));
    }

    // Move probability terms left and constants right.
    let mut terms: Vec<Term> = Vec::new();
    let mut threshold = Rat::zero();
    let mut push = |item: Item, on_left: bool, p: &Parser| -> Result<(), PropertyError> {
        match item {
            Item::Const(c) => {
                if on_left {
                    threshold -= c;
                } else {
                    threshold += c;
                }
                Ok(())
            }
            Item::Prob {
                coeff,
                var,
                state_ref,
                target_label,
                ..
            } => {
                let sched = sched_vars
                    .iter()
                    .position(|v| *v == var)
                    .ok_or(PropertyError::UndeclaredSchedulerVar { name: var })?;
                let state = p.resolve_state(&state_ref)?;
                let target = p.resolve_target(&target_label)?;
                terms.push(Term {
                    coeff: if on_left { coeff } else { -coeff },
                    sched,
                    state_ref,
                    state,
                    target_label,
                    target,
                });
                Ok(())
            }
        }
    };
    for item in left {
        push(item, true, &p)?;
    }
    for item in right {
        push(item, false, &p)?;
    }
    if terms.is_empty() {
        return Err(PropertyError::NoTerms);
    }
    for (i, v) in sched_vars.iter().enumerate() {
        if !terms.iter().any(|t| t.sched == i) {
            return Err(PropertyError::UnusedSchedulerVar { name: v.clone() });
        }
    }
    match (&epsilon, comp.takes_epsilon()) {
        (None, true) => {
            return Err(PropertyError::MissingEpsilon {
                comp: comp.symbol().to_string(),
            })
        }
        (Some(_), false) => {
            return Err(PropertyError::UnexpectedEpsilon {
                comp: comp.symbol().to_string(),
            })
        }
        _ => {}
    }
    if let Some(e) = &epsilon {
        if e.is_negative() {
            return Err(PropertyError::NegativeEpsilon(fmt_rat(e)));
        }
    }

    Ok(Query {
        quantifier,
        sched_vars,
        terms,
        comp,
        threshold,
        epsilon,
    })
}

// ---------------------------------------------------------------------------
// Printing

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.quantifier {
            Quantifier::Exists => write!(f, "exists ")?,
            Quantifier::Forall => write!(f, "forall ")?,
        }
        write!(f, "{}", self.sched_vars.join(", "))?;
        write!(f, " . ")?;
        for (i, t) in self.terms.iter().enumerate() {
            let mag = t.coeff.abs();
            if i == 0 {
                if t.coeff.is_negative() {
                    write!(f, "-")?;
                }
            } else if t.coeff.is_negative() {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            if !mag.is_one() {
                write!(f, "{}*", fmt_rat(&mag))?;
            }
            write!(
                f,
                "P({}, {}, F {})",
                self.sched_vars[t.sched], t.state_ref, t.target_label
            )?;
        }
        write!(f, " {} {}", self.comp.symbol(), fmt_rat(&self.threshold))?;
        if let Some(e) = &self.epsilon {
            write!(f, " eps {}", fmt_rat(e))?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Normalization

impl Query {
    /// Rewrites to the canonical existential form over comparators
    /// `>`, `>=`, `~`, `!~`:
    ///
    /// * `forall` becomes `exists` with the complemented comparator and the
    ///   `negated` flag set (the caller complements the final verdict);
    /// * `=` and `!=` become `~ eps 0` and `!~ eps 0`;
    /// * `<` and `<=` become `>` and `>=` with every coefficient and the
    ///   threshold negated.
    ///
    /// Normalizing an already canonical query changes nothing, so the map is
    /// idempotent up to the `negated` flag.
    pub fn normalize(&self) -> NormalizedQuery {
        let mut comp = self.comp;
        let negated = self.quantifier == Quantifier::Forall;
        if negated {
            comp = comp.complement();
        }
        let eps = self.epsilon.clone().unwrap_or_else(Rat::zero);
        let (comp, flip) = match comp {
            Comp::Gt => (NormComp::Gt, false),
            Comp::Ge => (NormComp::Ge, false),
            Comp::Lt => (NormComp::Gt, true),
            Comp::Le => (NormComp::Ge, true),
            Comp::Eq => (NormComp::Approx(Rat::zero()), false),
            Comp::Ne => (NormComp::NotApprox(Rat::zero()), false),
            Comp::Approx => (NormComp::Approx(eps), false),
            Comp::NotApprox => (NormComp::NotApprox(eps), false),
        };
        let mut terms = self.terms.clone();
        let mut threshold = self.threshold.clone();
        if flip {
            for t in &mut terms {
                t.coeff = -t.coeff.clone();
            }
            threshold = -threshold;
        }
        NormalizedQuery {
            sched_vars: self.sched_vars.clone(),
            terms,
            comp,
            threshold,
            negated,
        }
    }
}

impl NormalizedQuery {
    /// View as a plain query again (used to restate what was solved).
    pub fn as_query(&self) -> Query {
        let (comp, epsilon) = match &self.comp {
            NormComp::Gt => (Comp::Gt, None),
            NormComp::Ge => (Comp::Ge, None),
            NormComp::Approx(e) => (Comp::Approx, Some(e.clone())),
            NormComp::NotApprox(e) => (Comp::NotApprox, Some(e.clone())),
        };
        Query {
            quantifier: Quantifier::Exists,
            sched_vars: self.sched_vars.clone(),
            terms: self.terms.clone(),
            comp,
            threshold: self.threshold.clone(),
            epsilon,
        }
    }
}
