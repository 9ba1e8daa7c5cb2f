//! Stochastic regular expressions: a language and a probability
//! distribution over that language, expressed in one syntax.
//!
//! Union and star operators carry exact rational probabilities. `skip` and
//! `require` relevance wrappers mark information as freely discardable or
//! as mandatory; they are transparent to probabilities, stripping, normal
//! forms, and rewriting, and only entropy and lens costs treat them
//! specially.

use crate::env::DefEnv;
use crate::error::{Error, Result};
use crate::rational::{rat_one, rat_zero, Prob, Rat};
use crate::regex::Regex;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::fmt;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sre {
    Empty,
    Const(String),
    Concat(Box<Sre>, Box<Sre>),
    Or(Box<Sre>, Box<Sre>, Prob),
    Star(Box<Sre>, Prob),
    Skip(Box<Sre>),
    Require(Box<Sre>),
    Ref(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Relevance {
    None,
    Skip,
    Require,
}

impl Sre {
    pub fn lit(s: &str) -> Sre {
        Sre::Const(s.to_string())
    }

    pub fn concat(a: Sre, b: Sre) -> Sre {
        Sre::Concat(Box::new(a), Box::new(b))
    }

    pub fn or(a: Sre, b: Sre, p: Prob) -> Sre {
        Sre::Or(Box::new(a), Box::new(b), p)
    }

    pub fn star(a: Sre, p: Prob) -> Sre {
        Sre::Star(Box::new(a), p)
    }

    pub fn reference(n: &str) -> Sre {
        Sre::Ref(n.to_string())
    }

    pub fn skip(a: Sre) -> Sre {
        match a {
            // Directly nested relevance wrappers normalize: outermost wins.
            Sre::Skip(b) | Sre::Require(b) => Sre::Skip(b),
            other => Sre::Skip(Box::new(other)),
        }
    }

    pub fn require(a: Sre) -> Sre {
        match a {
            Sre::Skip(b) | Sre::Require(b) => Sre::Require(b),
            other => Sre::Require(Box::new(other)),
        }
    }

    /// Drops probability annotations and relevance wrappers.
    pub fn strip(&self) -> Regex {
        match self {
            Sre::Empty => Regex::Empty,
            Sre::Const(s) => Regex::Const(s.clone()),
            Sre::Concat(a, b) => Regex::concat(a.strip(), b.strip()),
            Sre::Or(a, b, _) => Regex::or(a.strip(), b.strip()),
            Sre::Star(a, _) => Regex::star(a.strip()),
            Sre::Skip(a) | Sre::Require(a) => a.strip(),
            Sre::Ref(n) => Regex::Ref(n.clone()),
        }
    }

    pub fn contains_empty(&self) -> bool {
        match self {
            Sre::Empty => true,
            Sre::Const(_) | Sre::Ref(_) => false,
            Sre::Concat(a, b) | Sre::Or(a, b, _) => a.contains_empty() || b.contains_empty(),
            Sre::Star(a, _) | Sre::Skip(a) | Sre::Require(a) => a.contains_empty(),
        }
    }

    pub fn nullable(&self, env: &DefEnv) -> Result<bool> {
        self.strip().nullable(env)
    }

    /// Removes empty-language subterms; the result denotes the same language.
    /// Fails with [`Error::WholeLanguageEmpty`] when the whole term is empty.
    pub fn normalize_empty(&self) -> Result<Sre> {
        fn go(s: &Sre) -> Option<Sre> {
            match s {
                Sre::Empty => None,
                Sre::Const(c) => Some(Sre::Const(c.clone())),
                Sre::Ref(n) => Some(Sre::Ref(n.clone())),
                Sre::Concat(a, b) => Some(Sre::concat(go(a)?, go(b)?)),
                Sre::Or(a, b, p) => match (go(a), go(b)) {
                    (Some(x), Some(y)) => Some(Sre::or(x, y, p.clone())),
                    (Some(x), None) => Some(x),
                    (None, Some(y)) => Some(y),
                    (None, None) => None,
                },
                Sre::Star(a, p) => match go(a) {
                    Some(x) => Some(Sre::star(x, p.clone())),
                    None => Some(Sre::lit("")),
                },
                Sre::Skip(a) => go(a).map(Sre::skip),
                Sre::Require(a) => go(a).map(Sre::require),
            }
        }
        go(self).ok_or(Error::WholeLanguageEmpty)
    }

    /// True when some subterm carries a `require` wrapper whose body has
    /// nonzero entropy.
    pub fn has_costly_require(&self, env: &DefEnv) -> bool {
        match self {
            Sre::Require(a) => {
                matches!(entropy(a, env), Ok(h) if h > 1e-12)
                    || a.has_costly_require(env)
            }
            Sre::Concat(a, b) | Sre::Or(a, b, _) => {
                a.has_costly_require(env) || b.has_costly_require(env)
            }
            Sre::Star(a, _) | Sre::Skip(a) => a.has_costly_require(env),
            _ => false,
        }
    }
}

impl fmt::Debug for Sre {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Sre {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(s: &Sre, f: &mut fmt::Formatter<'_>, prec: u8) -> fmt::Result {
            match s {
                Sre::Empty => write!(f, "{{}}"),
                Sre::Const(c) => write!(f, "{}", crate::syntax::quote(c)),
                Sre::Ref(n) => write!(f, "{n}"),
                Sre::Skip(a) => {
                    write!(f, "skip(")?;
                    go(a, f, 0)?;
                    write!(f, ")")
                }
                Sre::Require(a) => {
                    write!(f, "require(")?;
                    go(a, f, 0)?;
                    write!(f, ")")
                }
                Sre::Or(a, b, p) => {
                    if prec > 0 {
                        write!(f, "(")?;
                    }
                    go(a, f, 1)?;
                    write!(f, " |{{{p}}} ")?;
                    go(b, f, 0)?;
                    if prec > 0 {
                        write!(f, ")")?;
                    }
                    Ok(())
                }
                Sre::Concat(a, b) => {
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
                Sre::Star(a, p) => {
                    go(a, f, 3)?;
                    write!(f, "*{{{p}}}")
                }
            }
        }
        go(self, f, 0)
    }
}

/// Number of sequences in the normal form of `r`, with references counting
/// as single indivisible atoms.
pub(crate) fn sequence_count(r: &Regex) -> u128 {
    match r {
        Regex::Empty => 0,
        Regex::Const(_) | Regex::Star(_) | Regex::Ref(_) => 1,
        Regex::Concat(a, b) => sequence_count(a).saturating_mul(sequence_count(b)),
        Regex::Or(a, b) => sequence_count(a).saturating_add(sequence_count(b)),
    }
}

/// Default probability assignment: every star continues with probability
/// 4/5 and every union splits so that the sequences of the normal form end
/// up with equal probabilities.
pub fn to_stochastic(r: &Regex, env: &DefEnv) -> Result<Sre> {
    r.check_refs(env)?;
    if !matches!(r, Regex::Empty) && contains_empty_regex(r) {
        return Err(Error::EmptySubterm);
    }
    fn go(r: &Regex) -> Sre {
        match r {
            Regex::Empty => Sre::Empty,
            Regex::Const(s) => Sre::Const(s.clone()),
            Regex::Ref(n) => Sre::Ref(n.clone()),
            Regex::Concat(a, b) => Sre::concat(go(a), go(b)),
            Regex::Star(a) => Sre::star(go(a), Prob::from_ratio(4, 5)),
            Regex::Or(a, b) => {
                let ca = sequence_count(a);
                let cb = sequence_count(b);
                let p = Prob::new(Rat::new((ca as i128).into(), ((ca + cb) as i128).into()))
                    .expect("counts are positive");
                Sre::or(go(a), go(b), p)
            }
        }
    }
    Ok(go(r))
}

fn contains_empty_regex(r: &Regex) -> bool {
    match r {
        Regex::Empty => true,
        Regex::Const(_) | Regex::Ref(_) => false,
        Regex::Concat(a, b) | Regex::Or(a, b) => {
            contains_empty_regex(a) || contains_empty_regex(b)
        }
        Regex::Star(a) => contains_empty_regex(a),
    }
}

/// P_S(w): the probability the expression assigns to `w`. Exact.
///
/// Star bodies must reject the empty string (otherwise the defining sum
/// diverges); ambiguity is not checked here, so on ambiguous expressions
/// this is the defining sum over all decompositions.
pub fn probability(s: &Sre, w: &str, env: &DefEnv) -> Result<Rat> {
    let chars: Vec<char> = w.chars().collect();
    let mut ev = ProbEval {
        env,
        chars: &chars,
        memo: HashMap::new(),
    };
    ev.prob(s, 0, chars.len())
}

struct ProbEval<'a> {
    env: &'a DefEnv,
    chars: &'a [char],
    memo: HashMap<(usize, usize, usize), Rat>,
}

impl<'a> ProbEval<'a> {
    fn prob(&mut self, s: &'a Sre, i: usize, j: usize) -> Result<Rat> {
        let key = (s as *const Sre as usize, i, j);
        if let Some(p) = self.memo.get(&key) {
            return Ok(p.clone());
        }
        let p = match s {
            Sre::Empty => rat_zero(),
            Sre::Const(c) => {
                let want: Vec<char> = c.chars().collect();
                if self.chars[i..j] == want[..] {
                    rat_one()
                } else {
                    rat_zero()
                }
            }
            Sre::Or(a, b, pr) => {
                let pa = self.prob(a, i, j)?;
                let pb = self.prob(b, i, j)?;
                pr.value() * pa + (rat_one() - pr.value()) * pb
            }
            Sre::Concat(a, b) => {
                let mut total = rat_zero();
                for k in i..=j {
                    let pa = self.prob(a, i, k)?;
                    if pa.is_zero() {
                        continue;
                    }
                    let pb = self.prob(b, k, j)?;
                    total += pa * pb;
                }
                total
            }
            Sre::Star(body, pr) => {
                if body.nullable(self.env)? {
                    return Err(Error::PreconditionViolated(
                        "star body accepts the empty string".into(),
                    ));
                }
                if i == j {
                    rat_one() - pr.value()
                } else {
                    let mut total = rat_zero();
                    for k in (i + 1)..=j {
                        let head = self.prob(body, i, k)?;
                        if head.is_zero() {
                            continue;
                        }
                        let tail = self.prob(s, k, j)?;
                        total += head * tail;
                    }
                    pr.value() * total
                }
            }
            Sre::Skip(a) | Sre::Require(a) => self.prob(a, i, j)?,
            Sre::Ref(n) => {
                let def = self.env.sre_of(n)?;
                self.prob(def, i, j)?
            }
        };
        self.memo.insert(key, p.clone());
        Ok(p)
    }
}

/// H(S) in bits, computed from the syntax. Valid for unambiguous
/// expressions without empty subterms. `skip` bodies contribute zero.
pub fn entropy(s: &Sre, env: &DefEnv) -> Result<f64> {
    if s.contains_empty() {
        return Err(Error::PreconditionViolated(
            "entropy is undefined on empty-language subterms".into(),
        ));
    }
    fn go(s: &Sre, env: &DefEnv) -> Result<f64> {
        Ok(match s {
            Sre::Empty => unreachable!("checked above"),
            Sre::Const(_) => 0.0,
            Sre::Concat(a, b) => go(a, env)? + go(b, env)?,
            Sre::Or(a, b, p) => {
                let pf = p.to_f64();
                let ha = go(a, env)?;
                let hb = go(b, env)?;
                let left = if pf > 0.0 { pf * (ha - pf.log2()) } else { 0.0 };
                let q = 1.0 - pf;
                let right = if q > 0.0 { q * (hb - q.log2()) } else { 0.0 };
                left + right
            }
            Sre::Star(a, p) => {
                if a.nullable(env)? {
                    return Err(Error::PreconditionViolated(
                        "star body accepts the empty string".into(),
                    ));
                }
                let pf = p.to_f64();
                let q = 1.0 - pf;
                (pf / q) * (go(a, env)? - pf.log2()) - q.log2()
            }
            Sre::Skip(_) => 0.0,
            Sre::Require(a) => go(a, env)?,
            Sre::Ref(n) => go(env.sre_of(n)?, env)?,
        })
    }
    go(s, env)
}

/// The distribution-preserving rewrite rules, each applicable forward or
/// backward at a subterm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RewriteRule {
    ZeroProjL,
    ZeroProjR,
    ConcatIdentL,
    ConcatIdentR,
    OrIdent,
    OrComm,
    DistR,
    DistL,
    UnrollL,
    UnrollR,
    ConcatAssoc,
    OrAssoc,
}

pub const ALL_RULES: [RewriteRule; 12] = [
    RewriteRule::ZeroProjL,
    RewriteRule::ZeroProjR,
    RewriteRule::ConcatIdentL,
    RewriteRule::ConcatIdentR,
    RewriteRule::OrIdent,
    RewriteRule::OrComm,
    RewriteRule::DistR,
    RewriteRule::DistL,
    RewriteRule::UnrollL,
    RewriteRule::UnrollR,
    RewriteRule::ConcatAssoc,
    RewriteRule::OrAssoc,
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RewriteStep {
    pub rule: RewriteRule,
    pub path: Vec<usize>,
    pub forward: bool,
}

impl RewriteStep {
    pub fn forward(rule: RewriteRule, path: Vec<usize>) -> RewriteStep {
        RewriteStep {
            rule,
            path,
            forward: true,
        }
    }

    pub fn backward(rule: RewriteRule, path: Vec<usize>) -> RewriteStep {
        RewriteStep {
            rule,
            path,
            forward: false,
        }
    }
}

pub fn apply_rewrite(s: &Sre, step: &RewriteStep) -> Result<Sre> {
    rewrite_at(s, &step.path, &|redex| {
        if step.forward {
            apply_rule_forward(step.rule, redex)
        } else {
            apply_rule_backward(step.rule, redex)
        }
    })
}

fn rewrite_at(s: &Sre, path: &[usize], f: &dyn Fn(&Sre) -> Result<Sre>) -> Result<Sre> {
    match path.split_first() {
        None => f(s),
        Some((&idx, rest)) => match (s, idx) {
            (Sre::Concat(a, b), 0) => Ok(Sre::concat(rewrite_at(a, rest, f)?, (**b).clone())),
            (Sre::Concat(a, b), 1) => Ok(Sre::concat((**a).clone(), rewrite_at(b, rest, f)?)),
            (Sre::Or(a, b, p), 0) => Ok(Sre::or(rewrite_at(a, rest, f)?, (**b).clone(), p.clone())),
            (Sre::Or(a, b, p), 1) => Ok(Sre::or((**a).clone(), rewrite_at(b, rest, f)?, p.clone())),
            (Sre::Star(a, p), 0) => Ok(Sre::star(rewrite_at(a, rest, f)?, p.clone())),
            (Sre::Skip(a), 0) => Ok(Sre::skip(rewrite_at(a, rest, f)?)),
            (Sre::Require(a), 0) => Ok(Sre::require(rewrite_at(a, rest, f)?)),
            _ => Err(Error::BadPath),
        },
    }
}

fn apply_rule_forward(rule: RewriteRule, s: &Sre) -> Result<Sre> {
    use RewriteRule::*;
    match (rule, s) {
        (ZeroProjL, Sre::Concat(a, _)) if matches!(**a, Sre::Empty) => Ok(Sre::Empty),
        (ZeroProjR, Sre::Concat(_, b)) if matches!(**b, Sre::Empty) => Ok(Sre::Empty),
        (ConcatIdentL, Sre::Concat(a, b)) if is_epsilon(a) => Ok((**b).clone()),
        (ConcatIdentR, Sre::Concat(a, b)) if is_epsilon(b) => Ok((**a).clone()),
        (OrIdent, Sre::Or(a, b, p)) if matches!(**b, Sre::Empty) && p.is_one() => {
            Ok((**a).clone())
        }
        (OrComm, Sre::Or(a, b, p)) if !p.is_one() => {
            Ok(Sre::or((**b).clone(), (**a).clone(), p.complement()))
        }
        (DistR, Sre::Concat(a, bc)) => match &**bc {
            Sre::Or(b, c, p) => Ok(Sre::or(
                Sre::concat((**a).clone(), (**b).clone()),
                Sre::concat((**a).clone(), (**c).clone()),
                p.clone(),
            )),
            _ => Err(Error::PatternMismatch),
        },
        (DistL, Sre::Concat(ab, c)) => match &**ab {
            Sre::Or(a, b, p) => Ok(Sre::or(
                Sre::concat((**a).clone(), (**c).clone()),
                Sre::concat((**b).clone(), (**c).clone()),
                p.clone(),
            )),
            _ => Err(Error::PatternMismatch),
        },
        (UnrollL, Sre::Star(a, p)) => Ok(Sre::or(
            Sre::lit(""),
            Sre::concat((**a).clone(), s.clone()),
            p.complement(),
        )),
        (UnrollR, Sre::Star(a, p)) => Ok(Sre::or(
            Sre::lit(""),
            Sre::concat(s.clone(), (**a).clone()),
            p.complement(),
        )),
        (ConcatAssoc, Sre::Concat(ab, c)) => match &**ab {
            Sre::Concat(a, b) => Ok(Sre::concat(
                (**a).clone(),
                Sre::concat((**b).clone(), (**c).clone()),
            )),
            _ => Err(Error::PatternMismatch),
        },
        (OrAssoc, Sre::Or(ab, c, p2)) => match &**ab {
            Sre::Or(a, b, p1) => {
                let (q1, q2) = Prob::assoc_right(p1, p2);
                Ok(Sre::or(
                    (**a).clone(),
                    Sre::or((**b).clone(), (**c).clone(), q2),
                    q1,
                ))
            }
            _ => Err(Error::PatternMismatch),
        },
        _ => Err(Error::PatternMismatch),
    }
}

fn apply_rule_backward(rule: RewriteRule, s: &Sre) -> Result<Sre> {
    use RewriteRule::*;
    match (rule, s) {
        // The zero-projection right-hand side carries no trace of the
        // discarded operand, so the backward direction is not constructive.
        (ZeroProjL, _) | (ZeroProjR, _) => Err(Error::PatternMismatch),
        (ConcatIdentL, _) => Ok(Sre::concat(Sre::lit(""), s.clone())),
        (ConcatIdentR, _) => Ok(Sre::concat(s.clone(), Sre::lit(""))),
        (OrIdent, _) => Ok(Sre::or(
            s.clone(),
            Sre::Empty,
            Prob::new(rat_one()).unwrap(),
        )),
        (OrComm, Sre::Or(a, b, p)) if !p.is_one() => {
            Ok(Sre::or((**b).clone(), (**a).clone(), p.complement()))
        }
        (DistR, Sre::Or(l, r, p)) => match (&**l, &**r) {
            (Sre::Concat(a1, b), Sre::Concat(a2, c)) if a1 == a2 => Ok(Sre::concat(
                (**a1).clone(),
                Sre::or((**b).clone(), (**c).clone(), p.clone()),
            )),
            _ => Err(Error::PatternMismatch),
        },
        (DistL, Sre::Or(l, r, p)) => match (&**l, &**r) {
            (Sre::Concat(a, c1), Sre::Concat(b, c2)) if c1 == c2 => Ok(Sre::concat(
                Sre::or((**a).clone(), (**b).clone(), p.clone()),
                (**c1).clone(),
            )),
            _ => Err(Error::PatternMismatch),
        },
        (UnrollL, Sre::Or(eps, rest, q)) if is_epsilon(eps) => match &**rest {
            Sre::Concat(a, star) => match &**star {
                Sre::Star(a2, p) if a2 == a && *q == p.complement() => Ok((**star).clone()),
                _ => Err(Error::PatternMismatch),
            },
            _ => Err(Error::PatternMismatch),
        },
        (UnrollR, Sre::Or(eps, rest, q)) if is_epsilon(eps) => match &**rest {
            Sre::Concat(star, a) => match &**star {
                Sre::Star(a2, p) if a2 == a && *q == p.complement() => Ok((**star).clone()),
                _ => Err(Error::PatternMismatch),
            },
            _ => Err(Error::PatternMismatch),
        },
        (ConcatAssoc, Sre::Concat(a, bc)) => match &**bc {
            Sre::Concat(b, c) => Ok(Sre::concat(
                Sre::concat((**a).clone(), (**b).clone()),
                (**c).clone(),
            )),
            _ => Err(Error::PatternMismatch),
        },
        (OrAssoc, Sre::Or(a, bc, q1)) => match &**bc {
            Sre::Or(b, c, q2) => {
                let (p1, p2) = Prob::assoc_left(q1, q2);
                Ok(Sre::or(
                    Sre::or((**a).clone(), (**b).clone(), p1),
                    (**c).clone(),
                    p2,
                ))
            }
            _ => Err(Error::PatternMismatch),
        },
        _ => Err(Error::PatternMismatch),
    }
}

fn is_epsilon(s: &Sre) -> bool {
    matches!(s, Sre::Const(c) if c.is_empty())
}

/// All expressions reachable by one star unrolling at any star position, or
/// by opening one closed reference (replacing the occurrence with its
/// definition). Deterministic order: by path, then rule.
pub fn unroll_neighbors(s: &Sre, env: &DefEnv) -> Vec<Sre> {
    let mut out = Vec::new();
    let mut paths: Vec<(Vec<usize>, NeighborKind)> = Vec::new();
    collect_neighbor_sites(s, env, &mut Vec::new(), &mut paths);
    for (path, kind) in paths {
        match kind {
            NeighborKind::Star => {
                for rule in [RewriteRule::UnrollL, RewriteRule::UnrollR] {
                    if let Ok(next) = apply_rewrite(s, &RewriteStep::forward(rule, path.clone())) {
                        out.push(next);
                    }
                }
            }
            NeighborKind::ClosedRef(name) => {
                let def = env.sre_of(&name).expect("collected from env").clone();
                if let Ok(next) = rewrite_at(s, &path, &|_| Ok(def.clone())) {
                    out.push(next);
                }
            }
        }
    }
    out
}

enum NeighborKind {
    Star,
    ClosedRef(String),
}

fn collect_neighbor_sites(
    s: &Sre,
    env: &DefEnv,
    path: &mut Vec<usize>,
    out: &mut Vec<(Vec<usize>, NeighborKind)>,
) {
    match s {
        Sre::Star(a, _) => {
            out.push((path.clone(), NeighborKind::Star));
            path.push(0);
            collect_neighbor_sites(a, env, path, out);
            path.pop();
        }
        Sre::Ref(n) => {
            if env.is_closed(n) && env.contains(n) {
                out.push((path.clone(), NeighborKind::ClosedRef(n.clone())));
            }
        }
        Sre::Concat(a, b) | Sre::Or(a, b, _) => {
            path.push(0);
            collect_neighbor_sites(a, env, path, out);
            path.pop();
            path.push(1);
            collect_neighbor_sites(b, env, path, out);
            path.pop();
        }
        Sre::Skip(a) | Sre::Require(a) => {
            path.push(0);
            collect_neighbor_sites(a, env, path, out);
            path.pop();
        }
        _ => {}
    }
}

/// Draws a string from the distribution. Deterministic given the seed.
pub fn sample(s: &Sre, env: &DefEnv, seed: u64) -> Result<String> {
    Ok(sample_with_surprisal(s, env, seed)?.0)
}

/// Draws a string together with its surprisal -log2 P(w). For unambiguous
/// expressions the generation path is the unique parse, so the accumulated
/// choice surprisal equals the surprisal of the string.
pub fn sample_with_surprisal(s: &Sre, env: &DefEnv, seed: u64) -> Result<(String, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::new();
    let mut bits = 0.0;
    gen_into(s, env, &mut rng, &mut out, &mut bits)?;
    Ok((out, bits))
}

fn gen_into(
    s: &Sre,
    env: &DefEnv,
    rng: &mut ChaCha8Rng,
    out: &mut String,
    bits: &mut f64,
) -> Result<()> {
    match s {
        Sre::Empty => Err(Error::PreconditionViolated(
            "cannot sample from the empty language".into(),
        )),
        Sre::Const(c) => {
            out.push_str(c);
            Ok(())
        }
        Sre::Concat(a, b) => {
            gen_into(a, env, rng, out, bits)?;
            gen_into(b, env, rng, out, bits)
        }
        Sre::Or(a, b, p) => {
            if bernoulli(rng, p.value()) {
                *bits -= p.log2();
                gen_into(a, env, rng, out, bits)
            } else {
                *bits -= p.complement().log2();
                gen_into(b, env, rng, out, bits)
            }
        }
        Sre::Star(a, p) => {
            loop {
                if bernoulli(rng, p.value()) {
                    *bits -= p.log2();
                    gen_into(a, env, rng, out, bits)?;
                } else {
                    *bits -= p.complement().log2();
                    break;
                }
            }
            Ok(())
        }
        Sre::Skip(a) | Sre::Require(a) => gen_into(a, env, rng, out, bits),
        Sre::Ref(n) => gen_into(env.sre_of(n)?, env, rng, out, bits),
    }
}

/// Exact rational Bernoulli draw: true with probability num/den.
fn bernoulli(rng: &mut ChaCha8Rng, p: &Rat) -> bool {
    use num_bigint::BigUint;
    let num = p.numer().to_biguint().expect("probabilities nonnegative");
    let den = p.denom().to_biguint().expect("denominator positive");
    if let (Some(n), Some(d)) = (num.to_u64(), den.to_u64()) {
        return rng.gen_range(0..d) < n;
    }
    let nbits = den.bits();
    loop {
        let mut x = BigUint::zero();
        let mut remaining = nbits;
        while remaining > 0 {
            let take = remaining.min(32);
            let chunk: u32 = rng.gen();
            let chunk = chunk & (((1u64 << take) - 1) as u32);
            x = (x << take) | BigUint::from(chunk);
            remaining -= take;
        }
        if x < den {
            return x < num;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn env() -> DefEnv {
        DefEnv::new()
    }

    fn half() -> Prob {
        Prob::from_ratio(1, 2)
    }

    #[test]
    fn to_stochastic_examples() {
        let e = env();
        let r = Regex::or(
            Regex::or(Regex::lit("a"), Regex::lit("b")),
            Regex::lit("c"),
        );
        match to_stochastic(&r, &e).unwrap() {
            Sre::Or(inner, _, p_outer) => {
                assert_eq!(p_outer, Prob::from_ratio(2, 3));
                match *inner {
                    Sre::Or(_, _, p_inner) => assert_eq!(p_inner, half()),
                    _ => panic!(),
                }
            }
            _ => panic!(),
        }
        let star = to_stochastic(&Regex::star(Regex::lit("a")), &e).unwrap();
        assert_eq!(
            star,
            Sre::star(Sre::lit("a"), Prob::from_ratio(4, 5))
        );
        assert_eq!(
            to_stochastic(&Regex::lit("x"), &e).unwrap(),
            Sre::lit("x")
        );
    }

    #[test]
    fn normalize_empty_examples() {
        let s = Sre::or(Sre::Empty, Sre::lit("s"), half());
        assert_eq!(s.normalize_empty().unwrap(), Sre::lit("s"));
        let c = Sre::concat(Sre::Empty, Sre::lit("a"));
        assert_eq!(c.normalize_empty(), Err(Error::WholeLanguageEmpty));
        assert_eq!(Sre::lit("a").normalize_empty().unwrap(), Sre::lit("a"));
    }

    #[test]
    fn probability_examples() {
        let e = env();
        let s = Sre::or(Sre::lit("a"), Sre::lit("b"), half());
        assert_eq!(probability(&s, "a", &e).unwrap(), rat(1, 2));

        let star = Sre::star(Sre::lit("a"), Prob::from_ratio(4, 5));
        assert_eq!(probability(&star, "aa", &e).unwrap(), rat(16, 125));

        // Ambiguous input: the probability is still the defining sum over
        // all decompositions.
        let amb = Sre::concat(
            Sre::or(Sre::lit("a"), Sre::lit("ab"), half()),
            Sre::or(Sre::lit("b"), Sre::lit(""), half()),
        );
        assert_eq!(probability(&amb, "ab", &e).unwrap(), rat(1, 2));
    }

    #[test]
    fn entropy_examples() {
        let e = env();
        let s = Sre::or(Sre::lit("a"), Sre::lit("b"), half());
        assert!((entropy(&s, &e).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(entropy(&Sre::lit("anything"), &e).unwrap(), 0.0);
        let star = Sre::star(Sre::lit("a"), Prob::from_ratio(4, 5));
        let h = entropy(&star, &e).unwrap();
        assert!((h - 3.609640).abs() < 1e-5, "got {h}");
        // Cross-check against the truncated defining series.
        let p: f64 = 0.8;
        let mut series = 0.0;
        for n in 0..200 {
            let pw = p.powi(n) * (1.0 - p);
            series += pw * (-pw.log2());
        }
        assert!((h - series).abs() < 1e-6);
        // Relevance wrappers.
        assert_eq!(entropy(&Sre::skip(s.clone()), &e).unwrap(), 0.0);
        assert!((entropy(&Sre::require(s), &e).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rewrite_examples() {
        let a = Sre::lit("a");
        let b = Sre::lit("b");
        let or = Sre::or(a.clone(), b.clone(), Prob::from_ratio(1, 3));
        let commuted = apply_rewrite(&or, &RewriteStep::forward(RewriteRule::OrComm, vec![]))
            .unwrap();
        assert_eq!(
            commuted,
            Sre::or(b.clone(), a.clone(), Prob::from_ratio(2, 3))
        );

        let star = Sre::star(a.clone(), Prob::from_ratio(4, 5));
        let unrolled =
            apply_rewrite(&star, &RewriteStep::forward(RewriteRule::UnrollL, vec![])).unwrap();
        assert_eq!(
            unrolled,
            Sre::or(
                Sre::lit(""),
                Sre::concat(a.clone(), star.clone()),
                Prob::from_ratio(1, 5)
            )
        );
        let back = apply_rewrite(
            &unrolled,
            &RewriteStep::backward(RewriteRule::UnrollL, vec![]),
        )
        .unwrap();
        assert_eq!(back, star);

        let with_ident = Sre::or(a.clone(), Sre::Empty, Prob::new(rat_one()).unwrap());
        assert_eq!(
            apply_rewrite(&with_ident, &RewriteStep::forward(RewriteRule::OrIdent, vec![]))
                .unwrap(),
            a
        );
    }

    #[test]
    fn neighbors() {
        let e = env();
        let star = Sre::star(Sre::lit("a"), Prob::from_ratio(4, 5));
        let ns = unroll_neighbors(&star, &e);
        assert_eq!(ns.len(), 2);
        assert_eq!(unroll_neighbors(&Sre::lit("x"), &e), vec![]);

        let mut e2 = DefEnv::new();
        e2.define("name", Sre::lit("n")).unwrap();
        let r = Sre::reference("name");
        let ns2 = unroll_neighbors(&r, &e2);
        assert_eq!(ns2, vec![Sre::lit("n")]);
    }

    #[test]
    fn sampling() {
        let e = env();
        assert_eq!(sample(&Sre::lit("a"), &e, 7).unwrap(), "a");
        let s = Sre::or(Sre::lit("a"), Sre::lit("b"), half());
        let mut a_count = 0;
        let n = 20_000;
        for seed in 0..n {
            if sample(&s, &e, seed).unwrap() == "a" {
                a_count += 1;
            }
        }
        let freq = a_count as f64 / n as f64;
        assert!((0.48..=0.52).contains(&freq), "freq {freq}");

        let star = Sre::star(Sre::lit("a"), Prob::from_ratio(4, 5));
        let mut total_len = 0usize;
        for seed in 0..n {
            total_len += sample(&star, &e, seed).unwrap().len();
        }
        let mean = total_len as f64 / n as f64;
        assert!((3.85..=4.15).contains(&mean), "mean len {mean}");
    }

    #[test]
    fn costly_require_detection() {
        let e = env();
        let s = Sre::require(Sre::or(Sre::lit("a"), Sre::lit("b"), half()));
        assert!(s.has_costly_require(&e));
        assert!(!Sre::require(Sre::lit("x")).has_costly_require(&e));
        assert!(!Sre::skip(Sre::or(Sre::lit("a"), Sre::lit("b"), half()))
            .has_costly_require(&e));
    }
}
