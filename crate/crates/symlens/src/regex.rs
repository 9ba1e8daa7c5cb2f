//! Plain regular expressions: syntax, membership, unique parsing, bounded
//! unambiguity checking, and bounded language enumeration.
//!
//! The matcher is an all-parses matcher (memoized recursion over string
//! positions). Ambiguity is therefore observable directly: `parse` fails
//! with [`Error::AmbiguousParse`] whenever an input admits two distinct
//! parse trees.

use crate::env::DefEnv;
use crate::error::{Error, Result};
use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;

/// A plain regular expression. `Const("")` is the only representation of
/// epsilon; `Empty` denotes the empty language.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Regex {
    Empty,
    Const(String),
    Concat(Box<Regex>, Box<Regex>),
    Or(Box<Regex>, Box<Regex>),
    Star(Box<Regex>),
    Ref(String),
}

impl Regex {
    pub fn lit(s: &str) -> Regex {
        Regex::Const(s.to_string())
    }

    pub fn concat(a: Regex, b: Regex) -> Regex {
        Regex::Concat(Box::new(a), Box::new(b))
    }

    pub fn or(a: Regex, b: Regex) -> Regex {
        Regex::Or(Box::new(a), Box::new(b))
    }

    pub fn star(a: Regex) -> Regex {
        Regex::Star(Box::new(a))
    }

    pub fn reference(name: &str) -> Regex {
        Regex::Ref(name.to_string())
    }

    /// Syntactic size (number of AST nodes), following `Ref`s not at all.
    pub fn size(&self) -> usize {
        match self {
            Regex::Empty | Regex::Const(_) | Regex::Ref(_) => 1,
            Regex::Concat(a, b) | Regex::Or(a, b) => 1 + a.size() + b.size(),
            Regex::Star(a) => 1 + a.size(),
        }
    }

    /// All `Ref` names occurring in this expression (not transitively).
    pub fn direct_refs(&self, out: &mut Vec<String>) {
        match self {
            Regex::Ref(n) => {
                if !out.contains(n) {
                    out.push(n.clone());
                }
            }
            Regex::Concat(a, b) | Regex::Or(a, b) => {
                a.direct_refs(out);
                b.direct_refs(out);
            }
            Regex::Star(a) => a.direct_refs(out),
            _ => {}
        }
    }

    /// True iff the language contains the empty string.
    pub fn nullable(&self, env: &DefEnv) -> Result<bool> {
        match self {
            Regex::Empty => Ok(false),
            Regex::Const(s) => Ok(s.is_empty()),
            Regex::Concat(a, b) => Ok(a.nullable(env)? && b.nullable(env)?),
            Regex::Or(a, b) => Ok(a.nullable(env)? || b.nullable(env)?),
            Regex::Star(_) => Ok(true),
            Regex::Ref(n) => env.regex_of(n)?.nullable(env),
        }
    }

    /// True iff the language is empty.
    pub fn is_empty_language(&self, env: &DefEnv) -> Result<bool> {
        match self {
            Regex::Empty => Ok(true),
            Regex::Const(_) => Ok(false),
            Regex::Concat(a, b) => Ok(a.is_empty_language(env)? || b.is_empty_language(env)?),
            Regex::Or(a, b) => Ok(a.is_empty_language(env)? && b.is_empty_language(env)?),
            Regex::Star(_) => Ok(false),
            Regex::Ref(n) => env.regex_of(n)?.is_empty_language(env),
        }
    }

    /// Checks that every `Ref` resolves in `env`.
    pub fn check_refs(&self, env: &DefEnv) -> Result<()> {
        match self {
            Regex::Ref(n) => env.regex_of(n).map(|_| ()),
            Regex::Concat(a, b) | Regex::Or(a, b) => {
                a.check_refs(env)?;
                b.check_refs(env)
            }
            Regex::Star(a) => a.check_refs(env),
            _ => Ok(()),
        }
    }

    pub fn matches(&self, s: &str, env: &DefEnv) -> Result<bool> {
        self.check_refs(env)?;
        let chars: Vec<char> = s.chars().collect();
        let mut m = Matcher::new(env, &chars);
        Ok(m.count(self, 0, chars.len())? > 0)
    }

    /// Unique parse of `s` against this expression.
    pub fn parse(&self, s: &str, env: &DefEnv) -> Result<ParseTree> {
        self.check_refs(env)?;
        let chars: Vec<char> = s.chars().collect();
        let mut m = Matcher::new(env, &chars);
        let n = m.count(self, 0, chars.len())?;
        match n {
            0 => Err(Error::NoParse),
            1 => {
                let trees = m.parses(self, 0, chars.len())?;
                Ok(trees[0].clone())
            }
            n => Err(Error::AmbiguousParse {
                input: s.to_string(),
                count: n as usize,
            }),
        }
    }

    /// Number of distinct parse trees for `s` (saturating).
    pub fn parse_count(&self, s: &str, env: &DefEnv) -> Result<u64> {
        self.check_refs(env)?;
        let chars: Vec<char> = s.chars().collect();
        let mut m = Matcher::new(env, &chars);
        m.count(self, 0, chars.len())
    }

    /// Exactly the member strings of length at most `max_len`,
    /// duplicate-free, in length-then-lexicographic order.
    pub fn enumerate(&self, env: &DefEnv, max_len: usize) -> Result<Vec<String>> {
        self.check_refs(env)?;
        let mut set = self.enumerate_set(env, max_len)?;
        set.sort_by(|a, b| cmp_len_lex(a, b));
        set.dedup();
        Ok(set)
    }

    fn enumerate_set(&self, env: &DefEnv, max_len: usize) -> Result<Vec<String>> {
        Ok(match self {
            Regex::Empty => vec![],
            Regex::Const(s) => {
                if s.chars().count() <= max_len {
                    vec![s.clone()]
                } else {
                    vec![]
                }
            }
            Regex::Or(a, b) => {
                let mut out = a.enumerate_set(env, max_len)?;
                out.extend(b.enumerate_set(env, max_len)?);
                out
            }
            Regex::Concat(a, b) => {
                let left = a.enumerate_set(env, max_len)?;
                let right = b.enumerate_set(env, max_len)?;
                let mut out = Vec::new();
                for l in &left {
                    let ll = l.chars().count();
                    for r in &right {
                        if ll + r.chars().count() <= max_len {
                            out.push(format!("{l}{r}"));
                        }
                    }
                }
                out
            }
            Regex::Star(a) => {
                let body = a.enumerate_set(env, max_len)?;
                let mut acc: Vec<String> = vec![String::new()];
                let mut frontier: Vec<String> = vec![String::new()];
                loop {
                    let mut next = Vec::new();
                    for f in &frontier {
                        let fl = f.chars().count();
                        for b in &body {
                            if b.is_empty() {
                                continue;
                            }
                            if fl + b.chars().count() <= max_len {
                                let s = format!("{f}{b}");
                                if !acc.contains(&s) {
                                    acc.push(s.clone());
                                    next.push(s);
                                }
                            }
                        }
                    }
                    if next.is_empty() {
                        break;
                    }
                    frontier = next;
                }
                acc
            }
            Regex::Ref(n) => env.regex_of(n)?.enumerate_set(env, max_len)?,
        })
    }

    /// Bounded ambiguity check: searches member strings of length at most
    /// `bound` for one with two distinct parses. Returns a witness if one is
    /// found. This is a semi-decision; `Ok(None)` means no witness was found
    /// within the bound (and a candidate cap of a few thousand strings, so
    /// large-alphabet languages are only spot-checked).
    pub fn check_unambiguous(&self, env: &DefEnv, bound: usize) -> Result<Option<String>> {
        const CANDIDATE_CAP: usize = 2000;
        let mut budget = CANDIDATE_CAP;
        let candidates = self.enumerate_capped(env, bound, &mut budget)?;
        for s in candidates {
            if self.parse_count(&s, env)? >= 2 {
                return Ok(Some(s));
            }
        }
        Ok(None)
    }

    /// Enumeration with a result-count budget; stops early once the budget
    /// is spent, so the result may be incomplete (but every returned string
    /// is a member).
    fn enumerate_capped(
        &self,
        env: &DefEnv,
        max_len: usize,
        budget: &mut usize,
    ) -> Result<Vec<String>> {
        Ok(match self {
            Regex::Empty => vec![],
            Regex::Const(s) => {
                if s.chars().count() <= max_len && *budget > 0 {
                    *budget -= 1;
                    vec![s.clone()]
                } else {
                    vec![]
                }
            }
            Regex::Or(a, b) => {
                let mut out = a.enumerate_capped(env, max_len, budget)?;
                out.extend(b.enumerate_capped(env, max_len, budget)?);
                out
            }
            Regex::Concat(a, b) => {
                let mut inner = *budget;
                let left = a.enumerate_capped(env, max_len, &mut inner)?;
                let mut inner = *budget;
                let right = b.enumerate_capped(env, max_len, &mut inner)?;
                let mut out = Vec::new();
                'outer: for l in &left {
                    let ll = l.chars().count();
                    for r in &right {
                        if *budget == 0 {
                            break 'outer;
                        }
                        if ll + r.chars().count() <= max_len {
                            *budget -= 1;
                            out.push(format!("{l}{r}"));
                        }
                    }
                }
                out
            }
            Regex::Star(a) => {
                let mut inner = *budget;
                let body = a.enumerate_capped(env, max_len, &mut inner)?;
                let mut acc: Vec<String> = Vec::new();
                if *budget > 0 {
                    *budget -= 1;
                    acc.push(String::new());
                }
                let mut frontier: Vec<String> = vec![String::new()];
                loop {
                    let mut next = Vec::new();
                    'grow: for f in &frontier {
                        let fl = f.chars().count();
                        for b in &body {
                            if *budget == 0 {
                                break 'grow;
                            }
                            if b.is_empty() {
                                continue;
                            }
                            if fl + b.chars().count() <= max_len {
                                let s = format!("{f}{b}");
                                if !acc.contains(&s) {
                                    *budget -= 1;
                                    acc.push(s.clone());
                                    next.push(s);
                                }
                            }
                        }
                    }
                    if next.is_empty() || *budget == 0 {
                        break;
                    }
                    frontier = next;
                }
                acc
            }
            Regex::Ref(n) => env.regex_of(n)?.enumerate_capped(env, max_len, budget)?,
        })
    }

    /// Default bound for [`Regex::check_unambiguous`].
    pub fn default_ambiguity_bound(&self) -> usize {
        2 * self.size() + 4
    }

    /// Deterministic minimal member string: shortest, then lexicographically
    /// least. `None` when the language is empty.
    pub fn min_string(&self, env: &DefEnv) -> Result<Option<String>> {
        Ok(match self {
            Regex::Empty => None,
            Regex::Const(s) => Some(s.clone()),
            Regex::Concat(a, b) => match (a.min_string(env)?, b.min_string(env)?) {
                (Some(x), Some(y)) => Some(format!("{x}{y}")),
                _ => None,
            },
            Regex::Or(a, b) => match (a.min_string(env)?, b.min_string(env)?) {
                (Some(x), Some(y)) => {
                    if cmp_len_lex(&x, &y) == std::cmp::Ordering::Greater {
                        Some(y)
                    } else {
                        Some(x)
                    }
                }
                (Some(x), None) => Some(x),
                (None, y) => y,
            },
            Regex::Star(_) => Some(String::new()),
            Regex::Ref(n) => env.regex_of(n)?.min_string(env)?,
        })
    }

    /// The set of characters appearing in constants, following references.
    pub fn alphabet(&self, env: &DefEnv, out: &mut std::collections::BTreeSet<char>) -> Result<()> {
        match self {
            Regex::Empty => {}
            Regex::Const(s) => out.extend(s.chars()),
            Regex::Concat(a, b) | Regex::Or(a, b) => {
                a.alphabet(env, out)?;
                b.alphabet(env, out)?;
            }
            Regex::Star(a) => a.alphabet(env, out)?,
            Regex::Ref(n) => env.regex_of(n)?.alphabet(env, out)?,
        }
        Ok(())
    }
}

pub fn cmp_len_lex(a: &str, b: &str) -> std::cmp::Ordering {
    a.chars()
        .count()
        .cmp(&b.chars().count())
        .then_with(|| a.cmp(b))
}

impl fmt::Debug for Regex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Regex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Precedence: star > concat > union.
        fn go(r: &Regex, f: &mut fmt::Formatter<'_>, prec: u8) -> fmt::Result {
            match r {
                Regex::Empty => write!(f, "{{}}"),
                Regex::Const(s) => write!(f, "{}", crate::syntax::quote(s)),
                Regex::Ref(n) => write!(f, "{n}"),
                Regex::Or(a, b) => {
                    if prec > 0 {
                        write!(f, "(")?;
                    }
                    go(a, f, 1)?;
                    write!(f, " | ")?;
                    go(b, f, 0)?;
                    if prec > 0 {
                        write!(f, ")")?;
                    }
                    Ok(())
                }
                Regex::Concat(a, b) => {
                    if prec > 1 {
                        write!(f, "(")?;
                    }
                    go(a, f, 2)?;
                    write!(f, " . ")?;
                    go(b, f, 1)?;
                    if prec > 1 {
                        write!(f, ")")?;
                    }
                    Ok(())
                }
                Regex::Star(a) => {
                    go(a, f, 3)?;
                    write!(f, "*")
                }
            }
        }
        go(self, f, 0)
    }
}

/// Which branch of an `Or` a parse took.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// A parse tree mirroring the structure of the [`Regex`] it was parsed
/// against. Parsing through a `Ref` yields the tree of its definition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParseTree {
    ConstLeaf(String),
    ConcatNode(Box<ParseTree>, Box<ParseTree>),
    OrNode(Side, Box<ParseTree>),
    StarNode(Vec<ParseTree>),
}

impl ParseTree {
    /// Reproduces exactly the parsed string.
    pub fn flatten(&self) -> String {
        let mut out = String::new();
        self.flatten_into(&mut out);
        out
    }

    fn flatten_into(&self, out: &mut String) {
        match self {
            ParseTree::ConstLeaf(s) => out.push_str(s),
            ParseTree::ConcatNode(a, b) => {
                a.flatten_into(out);
                b.flatten_into(out);
            }
            ParseTree::OrNode(_, t) => t.flatten_into(out),
            ParseTree::StarNode(ts) => {
                for t in ts {
                    t.flatten_into(out);
                }
            }
        }
    }
}

/// All-parses matcher over a fixed input, memoized by (node, span).
/// Nodes are keyed by address; the borrowed expressions stay alive for the
/// matcher's lifetime.
struct Matcher<'a> {
    env: &'a DefEnv,
    chars: &'a [char],
    counts: HashMap<(usize, usize, usize), u64>,
    trees: HashMap<(usize, usize, usize), Rc<Vec<ParseTree>>>,
    star_checked: HashMap<usize, ()>,
}

impl<'a> Matcher<'a> {
    fn new(env: &'a DefEnv, chars: &'a [char]) -> Self {
        Matcher {
            env,
            chars,
            counts: HashMap::new(),
            trees: HashMap::new(),
            star_checked: HashMap::new(),
        }
    }

    fn key(r: &Regex) -> usize {
        r as *const Regex as usize
    }

    fn check_star_body(&mut self, star: &'a Regex, body: &'a Regex) -> Result<()> {
        let k = Self::key(star);
        if self.star_checked.contains_key(&k) {
            return Ok(());
        }
        if body.nullable(self.env)? {
            return Err(Error::AmbiguousParse {
                input: String::new(),
                count: 2,
            });
        }
        self.star_checked.insert(k, ());
        Ok(())
    }

    fn count(&mut self, r: &'a Regex, i: usize, j: usize) -> Result<u64> {
        let key = (Self::key(r), i, j);
        if let Some(&c) = self.counts.get(&key) {
            return Ok(c);
        }
        let c = match r {
            Regex::Empty => 0,
            Regex::Const(s) => {
                let want: Vec<char> = s.chars().collect();
                if self.chars[i..j] == want[..] {
                    1
                } else {
                    0
                }
            }
            Regex::Or(a, b) => self
                .count(a, i, j)?
                .saturating_add(self.count(b, i, j)?),
            Regex::Concat(a, b) => {
                let mut total: u64 = 0;
                for k in i..=j {
                    let ca = self.count(a, i, k)?;
                    if ca == 0 {
                        continue;
                    }
                    let cb = self.count(b, k, j)?;
                    total = total.saturating_add(ca.saturating_mul(cb));
                }
                total
            }
            Regex::Star(body) => {
                self.check_star_body(r, body)?;
                if i == j {
                    1
                } else {
                    let mut total: u64 = 0;
                    for k in (i + 1)..=j {
                        let ca = self.count(body, i, k)?;
                        if ca == 0 {
                            continue;
                        }
                        let rest = self.count(r, k, j)?;
                        total = total.saturating_add(ca.saturating_mul(rest));
                    }
                    total
                }
            }
            Regex::Ref(n) => {
                let def = self.env.regex_node(n)?;
                self.count(def, i, j)?
            }
        };
        self.counts.insert(key, c);
        Ok(c)
    }

    fn parses(&mut self, r: &'a Regex, i: usize, j: usize) -> Result<Rc<Vec<ParseTree>>> {
        let key = (Self::key(r), i, j);
        if let Some(ts) = self.trees.get(&key) {
            return Ok(ts.clone());
        }
        let ts: Vec<ParseTree> = match r {
            Regex::Empty => vec![],
            Regex::Const(s) => {
                let want: Vec<char> = s.chars().collect();
                if self.chars[i..j] == want[..] {
                    vec![ParseTree::ConstLeaf(s.clone())]
                } else {
                    vec![]
                }
            }
            Regex::Or(a, b) => {
                let mut out: Vec<ParseTree> = self
                    .parses(a, i, j)?
                    .iter()
                    .map(|t| ParseTree::OrNode(Side::Left, Box::new(t.clone())))
                    .collect();
                out.extend(
                    self.parses(b, i, j)?
                        .iter()
                        .map(|t| ParseTree::OrNode(Side::Right, Box::new(t.clone()))),
                );
                out
            }
            Regex::Concat(a, b) => {
                let mut out = Vec::new();
                for k in i..=j {
                    if self.count(a, i, k)? == 0 || self.count(b, k, j)? == 0 {
                        continue;
                    }
                    let left = self.parses(a, i, k)?;
                    let right = self.parses(b, k, j)?;
                    for l in left.iter() {
                        for rt in right.iter() {
                            out.push(ParseTree::ConcatNode(
                                Box::new(l.clone()),
                                Box::new(rt.clone()),
                            ));
                        }
                    }
                }
                out
            }
            Regex::Star(body) => {
                self.check_star_body(r, body)?;
                if i == j {
                    vec![ParseTree::StarNode(vec![])]
                } else {
                    let mut out = Vec::new();
                    for k in (i + 1)..=j {
                        if self.count(body, i, k)? == 0 || self.count(r, k, j)? == 0 {
                            continue;
                        }
                        let heads = self.parses(body, i, k)?;
                        let tails = self.parses(r, k, j)?;
                        for h in heads.iter() {
                            for t in tails.iter() {
                                if let ParseTree::StarNode(items) = t {
                                    let mut v = Vec::with_capacity(items.len() + 1);
                                    v.push(h.clone());
                                    v.extend(items.iter().cloned());
                                    out.push(ParseTree::StarNode(v));
                                }
                            }
                        }
                    }
                    out
                }
            }
            Regex::Ref(n) => {
                let def = self.env.regex_node(n)?;
                self.parses(def, i, j)?.iter().cloned().collect()
            }
        };
        let rc = Rc::new(ts);
        self.trees.insert(key, rc.clone());
        Ok(rc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::DefEnv;

    fn env() -> DefEnv {
        DefEnv::new()
    }

    #[test]
    fn membership_basics() {
        let e = env();
        assert!(Regex::lit("ab").matches("ab", &e).unwrap());
        assert!(Regex::star(Regex::lit("a")).matches("", &e).unwrap());
        assert!(!Regex::or(Regex::lit("a"), Regex::lit("b"))
            .matches("c", &e)
            .unwrap());
        assert!(!Regex::Empty.matches("", &e).unwrap());
    }

    #[test]
    fn parse_unique_split() {
        let e = env();
        let r = Regex::concat(Regex::lit("a"), Regex::lit("b"));
        let t = r.parse("ab", &e).unwrap();
        assert_eq!(
            t,
            ParseTree::ConcatNode(
                Box::new(ParseTree::ConstLeaf("a".into())),
                Box::new(ParseTree::ConstLeaf("b".into()))
            )
        );
        assert_eq!(t.flatten(), "ab");
    }

    #[test]
    fn parse_star_forced() {
        let e = env();
        let r = Regex::star(Regex::lit("a"));
        let t = r.parse("aa", &e).unwrap();
        assert_eq!(
            t,
            ParseTree::StarNode(vec![
                ParseTree::ConstLeaf("a".into()),
                ParseTree::ConstLeaf("a".into())
            ])
        );
    }

    #[test]
    fn parse_ambiguous_union() {
        let e = env();
        let r = Regex::or(Regex::lit("a"), Regex::lit("a"));
        match r.parse("a", &e) {
            Err(Error::AmbiguousParse { count, .. }) => assert_eq!(count, 2),
            other => panic!("expected ambiguity, got {other:?}"),
        }
    }

    #[test]
    fn nullable_star_body_rejected() {
        let e = env();
        let r = Regex::star(Regex::star(Regex::lit("a")));
        assert!(matches!(
            r.parse("a", &e),
            Err(Error::AmbiguousParse { .. })
        ));
    }

    #[test]
    fn enumerate_star() {
        let e = env();
        let r = Regex::star(Regex::lit("a"));
        assert_eq!(r.enumerate(&e, 2).unwrap(), vec!["", "a", "aa"]);
        assert_eq!(Regex::Empty.enumerate(&e, 10).unwrap(), Vec::<String>::new());
        let r2 = Regex::or(Regex::lit("ab"), Regex::lit("c"));
        assert_eq!(r2.enumerate(&e, 1).unwrap(), vec!["c"]);
    }

    #[test]
    fn unambiguity_witnesses() {
        let e = env();
        let dup = Regex::or(Regex::lit("a"), Regex::lit("a"));
        assert_eq!(dup.check_unambiguous(&e, 3).unwrap(), Some("a".into()));
        let astar2 = Regex::concat(Regex::star(Regex::lit("a")), Regex::star(Regex::lit("a")));
        assert_eq!(astar2.check_unambiguous(&e, 2).unwrap(), Some("a".into()));
        let c = Regex::lit("x");
        assert_eq!(c.check_unambiguous(&e, 5).unwrap(), None);
    }

    #[test]
    fn min_strings() {
        let e = env();
        let r = Regex::or(
            Regex::concat(Regex::lit("aa"), Regex::lit("b")),
            Regex::lit("zz"),
        );
        assert_eq!(r.min_string(&e).unwrap(), Some("zz".into()));
        assert_eq!(
            Regex::star(Regex::lit("a")).min_string(&e).unwrap(),
            Some("".into())
        );
        assert_eq!(Regex::Empty.min_string(&e).unwrap(), None);
    }

    #[test]
    fn parse_flatten_round_trip() {
        let e = env();
        let r = Regex::concat(
            Regex::or(Regex::lit("x"), Regex::lit("yy")),
            Regex::star(Regex::lit("z")),
        );
        for s in r.enumerate(&e, 6).unwrap() {
            let t = r.parse(&s, &e).unwrap();
            assert_eq!(t.flatten(), s);
        }
    }
}
