//! The surface lens language: combinators, typing, the four evaluators,
//! entropy-bound intervals, edit-sequence application, and the forgetful
//! classical-lens wrapper.
//!
//! Evaluators parse each input once against the lens's principal type and
//! then interpret the parse tree structurally; substrings are re-parsed
//! only at merge, composition, and library-reference seams, where the
//! adjacent types are equivalent rather than structurally identical.

use crate::automata;
use crate::env::DefEnv;
use crate::error::{Error, Result};
use crate::regex::{ParseTree, Regex, Side};
use crate::sre::{entropy, Sre};
use std::fmt;
use std::sync::Arc;

/// Surface lens combinators.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Lens {
    Identity(Regex),
    Disconnect(Regex, Regex, String, String),
    Concat(Box<Lens>, Box<Lens>),
    Swap(Box<Lens>, Box<Lens>),
    Or(Box<Lens>, Box<Lens>),
    MergeRight(Box<Lens>, Box<Lens>),
    MergeLeft(Box<Lens>, Box<Lens>),
    Compose(Box<Lens>, Box<Lens>),
    Iterate(Box<Lens>),
    Invert(Box<Lens>),
    LibRef(String),
}

impl Lens {
    pub fn id(r: Regex) -> Lens {
        Lens::Identity(r)
    }

    pub fn disconnect(src: Regex, tgt: Regex, s_default: &str, t_default: &str) -> Lens {
        Lens::Disconnect(src, tgt, s_default.to_string(), t_default.to_string())
    }

    /// `ins(t)`: inserts a constant left-to-right.
    pub fn ins(t: &str) -> Lens {
        Lens::disconnect(Regex::lit(""), Regex::lit(t), "", t)
    }

    /// `del(s)`: deletes a constant left-to-right.
    pub fn del(s: &str) -> Lens {
        Lens::disconnect(Regex::lit(s), Regex::lit(""), s, "")
    }

    pub fn concat(a: Lens, b: Lens) -> Lens {
        Lens::Concat(Box::new(a), Box::new(b))
    }

    pub fn swap(a: Lens, b: Lens) -> Lens {
        Lens::Swap(Box::new(a), Box::new(b))
    }

    pub fn or(a: Lens, b: Lens) -> Lens {
        Lens::Or(Box::new(a), Box::new(b))
    }

    pub fn merge_right(a: Lens, b: Lens) -> Lens {
        Lens::MergeRight(Box::new(a), Box::new(b))
    }

    pub fn merge_left(a: Lens, b: Lens) -> Lens {
        Lens::MergeLeft(Box::new(a), Box::new(b))
    }

    pub fn compose(a: Lens, b: Lens) -> Lens {
        Lens::Compose(Box::new(a), Box::new(b))
    }

    pub fn iterate(a: Lens) -> Lens {
        Lens::Iterate(Box::new(a))
    }

    pub fn invert(a: Lens) -> Lens {
        Lens::Invert(Box::new(a))
    }

    pub fn contains_compose(&self) -> bool {
        match self {
            Lens::Identity(_) | Lens::Disconnect(..) | Lens::LibRef(_) => false,
            Lens::Compose(..) => true,
            Lens::Concat(a, b)
            | Lens::Swap(a, b)
            | Lens::Or(a, b)
            | Lens::MergeRight(a, b)
            | Lens::MergeLeft(a, b) => a.contains_compose() || b.contains_compose(),
            Lens::Iterate(a) | Lens::Invert(a) => a.contains_compose(),
        }
    }
}

impl fmt::Debug for Lens {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", crate::syntax::print_lens(self))
    }
}

/// A lens together with its checked principal type at every node.
#[derive(Clone, Debug)]
pub struct TypedLens {
    pub src: Regex,
    pub tgt: Regex,
    pub node: TypedNode,
}

#[derive(Clone, Debug)]
pub enum TypedNode {
    Identity,
    Disconnect { s_default: String, t_default: String },
    Concat(Box<TypedLens>, Box<TypedLens>),
    Swap(Box<TypedLens>, Box<TypedLens>),
    Or(Box<TypedLens>, Box<TypedLens>),
    MergeRight(Box<TypedLens>, Box<TypedLens>),
    MergeLeft(Box<TypedLens>, Box<TypedLens>),
    Compose(Box<TypedLens>, Box<TypedLens>),
    Iterate(Box<TypedLens>),
    Invert(Box<TypedLens>),
    LibRef(String, Arc<TypedLens>),
}

/// Named, already-checked lenses available to `LibRef` and to
/// compositional synthesis.
#[derive(Clone, Debug, Default)]
pub struct Library {
    pub entries: Vec<LibraryEntry>,
}

#[derive(Clone, Debug)]
pub struct LibraryEntry {
    pub name: String,
    pub lens: Lens,
    pub typed: Arc<TypedLens>,
    /// Declared type as written (often references).
    pub src: Regex,
    pub tgt: Regex,
    pub h_left: Interval,
    pub h_right: Interval,
}

impl Library {
    pub fn new() -> Library {
        Library::default()
    }

    pub fn get(&self, name: &str) -> Option<&LibraryEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

fn check_operand_unambiguous(r: &Regex, env: &DefEnv) -> Result<()> {
    let bound = r.default_ambiguity_bound();
    if let Some(w) = r.check_unambiguous(env, bound)? {
        return Err(Error::UnambiguityViolation(w));
    }
    Ok(())
}

/// Builds the principal type structurally, deciding regex equivalence
/// completely at composition and merge seams.
pub fn typecheck(l: &Lens, env: &DefEnv, lib: &Library) -> Result<TypedLens> {
    match l {
        Lens::Identity(r) => {
            r.check_refs(env)?;
            check_operand_unambiguous(r, env)?;
            Ok(TypedLens {
                src: r.clone(),
                tgt: r.clone(),
                node: TypedNode::Identity,
            })
        }
        Lens::Disconnect(rs, rt, ds, dt) => {
            rs.check_refs(env)?;
            rt.check_refs(env)?;
            check_operand_unambiguous(rs, env)?;
            check_operand_unambiguous(rt, env)?;
            if !rs.matches(ds, env)? {
                return Err(Error::DefaultNotInLanguage(ds.clone()));
            }
            if !rt.matches(dt, env)? {
                return Err(Error::DefaultNotInLanguage(dt.clone()));
            }
            Ok(TypedLens {
                src: rs.clone(),
                tgt: rt.clone(),
                node: TypedNode::Disconnect {
                    s_default: ds.clone(),
                    t_default: dt.clone(),
                },
            })
        }
        Lens::Concat(a, b) => {
            let ta = typecheck(a, env, lib)?;
            let tb = typecheck(b, env, lib)?;
            let src = Regex::concat(ta.src.clone(), tb.src.clone());
            let tgt = Regex::concat(ta.tgt.clone(), tb.tgt.clone());
            check_operand_unambiguous(&src, env)?;
            check_operand_unambiguous(&tgt, env)?;
            Ok(TypedLens {
                src,
                tgt,
                node: TypedNode::Concat(Box::new(ta), Box::new(tb)),
            })
        }
        Lens::Swap(a, b) => {
            let ta = typecheck(a, env, lib)?;
            let tb = typecheck(b, env, lib)?;
            let src = Regex::concat(ta.src.clone(), tb.src.clone());
            let tgt = Regex::concat(tb.tgt.clone(), ta.tgt.clone());
            check_operand_unambiguous(&src, env)?;
            check_operand_unambiguous(&tgt, env)?;
            Ok(TypedLens {
                src,
                tgt,
                node: TypedNode::Swap(Box::new(ta), Box::new(tb)),
            })
        }
        Lens::Or(a, b) => {
            let ta = typecheck(a, env, lib)?;
            let tb = typecheck(b, env, lib)?;
            // Branch dispatch needs disjoint branch languages on both sides.
            if !automata::disjoint(&ta.src, &tb.src, env)? {
                return Err(Error::TypeMismatch {
                    location: "or source".into(),
                    expected: "disjoint branch languages".into(),
                    got: format!("{} and {}", ta.src, tb.src),
                });
            }
            if !automata::disjoint(&ta.tgt, &tb.tgt, env)? {
                return Err(Error::TypeMismatch {
                    location: "or target".into(),
                    expected: "disjoint branch languages".into(),
                    got: format!("{} and {}", ta.tgt, tb.tgt),
                });
            }
            let src = Regex::or(ta.src.clone(), tb.src.clone());
            let tgt = Regex::or(ta.tgt.clone(), tb.tgt.clone());
            Ok(TypedLens {
                src,
                tgt,
                node: TypedNode::Or(Box::new(ta), Box::new(tb)),
            })
        }
        Lens::MergeRight(a, b) => {
            let ta = typecheck(a, env, lib)?;
            let tb = typecheck(b, env, lib)?;
            if !automata::disjoint(&ta.src, &tb.src, env)? {
                return Err(Error::TypeMismatch {
                    location: "merge_right source".into(),
                    expected: "disjoint branch languages".into(),
                    got: format!("{} and {}", ta.src, tb.src),
                });
            }
            if !automata::equivalent(&ta.tgt, &tb.tgt, env)? {
                return Err(Error::TypeMismatch {
                    location: "merge_right target".into(),
                    expected: ta.tgt.to_string(),
                    got: tb.tgt.to_string(),
                });
            }
            let src = Regex::or(ta.src.clone(), tb.src.clone());
            let tgt = ta.tgt.clone();
            Ok(TypedLens {
                src,
                tgt,
                node: TypedNode::MergeRight(Box::new(ta), Box::new(tb)),
            })
        }
        Lens::MergeLeft(a, b) => {
            let ta = typecheck(a, env, lib)?;
            let tb = typecheck(b, env, lib)?;
            if !automata::disjoint(&ta.tgt, &tb.tgt, env)? {
                return Err(Error::TypeMismatch {
                    location: "merge_left target".into(),
                    expected: "disjoint branch languages".into(),
                    got: format!("{} and {}", ta.tgt, tb.tgt),
                });
            }
            if !automata::equivalent(&ta.src, &tb.src, env)? {
                return Err(Error::TypeMismatch {
                    location: "merge_left source".into(),
                    expected: ta.src.to_string(),
                    got: tb.src.to_string(),
                });
            }
            let src = ta.src.clone();
            let tgt = Regex::or(ta.tgt.clone(), tb.tgt.clone());
            Ok(TypedLens {
                src,
                tgt,
                node: TypedNode::MergeLeft(Box::new(ta), Box::new(tb)),
            })
        }
        Lens::Compose(a, b) => {
            let ta = typecheck(a, env, lib)?;
            let tb = typecheck(b, env, lib)?;
            if !automata::equivalent(&ta.tgt, &tb.src, env)? {
                return Err(Error::TypeMismatch {
                    location: "compose seam".into(),
                    expected: ta.tgt.to_string(),
                    got: tb.src.to_string(),
                });
            }
            let src = ta.src.clone();
            let tgt = tb.tgt.clone();
            Ok(TypedLens {
                src,
                tgt,
                node: TypedNode::Compose(Box::new(ta), Box::new(tb)),
            })
        }
        Lens::Iterate(a) => {
            let ta = typecheck(a, env, lib)?;
            if ta.src.nullable(env)? || ta.tgt.nullable(env)? {
                return Err(Error::UnambiguityViolation(String::new()));
            }
            let src = Regex::star(ta.src.clone());
            let tgt = Regex::star(ta.tgt.clone());
            check_operand_unambiguous(&src, env)?;
            check_operand_unambiguous(&tgt, env)?;
            Ok(TypedLens {
                src,
                tgt,
                node: TypedNode::Iterate(Box::new(ta)),
            })
        }
        Lens::Invert(a) => {
            let ta = typecheck(a, env, lib)?;
            Ok(TypedLens {
                src: ta.tgt.clone(),
                tgt: ta.src.clone(),
                node: TypedNode::Invert(Box::new(ta)),
            })
        }
        Lens::LibRef(n) => {
            let entry = lib
                .get(n)
                .ok_or_else(|| Error::UnresolvedLibRef(n.clone()))?;
            Ok(TypedLens {
                src: entry.typed.src.clone(),
                tgt: entry.typed.tgt.clone(),
                node: TypedNode::LibRef(n.clone(), entry.typed.clone()),
            })
        }
    }
}

impl TypedLens {
    pub fn create_r(&self, s: &str, env: &DefEnv) -> Result<String> {
        let tree = self.src.parse(s, env)?;
        self.cr(&tree, env)
    }

    pub fn create_l(&self, t: &str, env: &DefEnv) -> Result<String> {
        let tree = self.tgt.parse(t, env)?;
        self.cl(&tree, env)
    }

    pub fn put_r(&self, s: &str, t_old: &str, env: &DefEnv) -> Result<String> {
        let st = self.src.parse(s, env)?;
        let tt = self.tgt.parse(t_old, env)?;
        self.pr(&st, &tt, env)
    }

    pub fn put_l(&self, t: &str, s_old: &str, env: &DefEnv) -> Result<String> {
        let tt = self.tgt.parse(t, env)?;
        let st = self.src.parse(s_old, env)?;
        self.pl(&tt, &st, env)
    }

    fn cr(&self, s: &ParseTree, env: &DefEnv) -> Result<String> {
        match &self.node {
            TypedNode::Identity => Ok(s.flatten()),
            TypedNode::Disconnect { t_default, .. } => Ok(t_default.clone()),
            TypedNode::Concat(a, b) => match s {
                ParseTree::ConcatNode(x, y) => Ok(format!("{}{}", a.cr(x, env)?, b.cr(y, env)?)),
                _ => Err(Error::NoParse),
            },
            TypedNode::Swap(a, b) => match s {
                ParseTree::ConcatNode(x, y) => Ok(format!("{}{}", b.cr(y, env)?, a.cr(x, env)?)),
                _ => Err(Error::NoParse),
            },
            TypedNode::Or(a, b) => match s {
                ParseTree::OrNode(Side::Left, x) => a.cr(x, env),
                ParseTree::OrNode(Side::Right, x) => b.cr(x, env),
                _ => Err(Error::NoParse),
            },
            TypedNode::MergeRight(a, b) => match s {
                ParseTree::OrNode(Side::Left, x) => a.cr(x, env),
                ParseTree::OrNode(Side::Right, x) => b.cr(x, env),
                _ => Err(Error::NoParse),
            },
            TypedNode::MergeLeft(a, _) => a.cr(s, env),
            TypedNode::Compose(a, b) => b.create_r(&a.cr(s, env)?, env),
            TypedNode::Iterate(a) => match s {
                ParseTree::StarNode(items) => {
                    let mut out = String::new();
                    for item in items {
                        out.push_str(&a.cr(item, env)?);
                    }
                    Ok(out)
                }
                _ => Err(Error::NoParse),
            },
            TypedNode::Invert(a) => a.cl(s, env),
            TypedNode::LibRef(_, l) => l.create_r(&s.flatten(), env),
        }
    }

    fn cl(&self, t: &ParseTree, env: &DefEnv) -> Result<String> {
        match &self.node {
            TypedNode::Identity => Ok(t.flatten()),
            TypedNode::Disconnect { s_default, .. } => Ok(s_default.clone()),
            TypedNode::Concat(a, b) => match t {
                ParseTree::ConcatNode(x, y) => Ok(format!("{}{}", a.cl(x, env)?, b.cl(y, env)?)),
                _ => Err(Error::NoParse),
            },
            TypedNode::Swap(a, b) => match t {
                // Target reads t2 . t1.
                ParseTree::ConcatNode(y, x) => Ok(format!("{}{}", a.cl(x, env)?, b.cl(y, env)?)),
                _ => Err(Error::NoParse),
            },
            TypedNode::Or(a, b) => match t {
                ParseTree::OrNode(Side::Left, x) => a.cl(x, env),
                ParseTree::OrNode(Side::Right, x) => b.cl(x, env),
                _ => Err(Error::NoParse),
            },
            TypedNode::MergeRight(a, _) => a.cl(t, env),
            TypedNode::MergeLeft(a, b) => match t {
                ParseTree::OrNode(Side::Left, x) => a.cl(x, env),
                ParseTree::OrNode(Side::Right, x) => b.cl(x, env),
                _ => Err(Error::NoParse),
            },
            TypedNode::Compose(a, b) => a.create_l(&b.cl(t, env)?, env),
            TypedNode::Iterate(a) => match t {
                ParseTree::StarNode(items) => {
                    let mut out = String::new();
                    for item in items {
                        out.push_str(&a.cl(item, env)?);
                    }
                    Ok(out)
                }
                _ => Err(Error::NoParse),
            },
            TypedNode::Invert(a) => a.cr(t, env),
            TypedNode::LibRef(_, l) => l.create_l(&t.flatten(), env),
        }
    }

    fn pr(&self, s: &ParseTree, t: &ParseTree, env: &DefEnv) -> Result<String> {
        match &self.node {
            TypedNode::Identity => Ok(s.flatten()),
            TypedNode::Disconnect { .. } => Ok(t.flatten()),
            TypedNode::Concat(a, b) => match (s, t) {
                (ParseTree::ConcatNode(s1, s2), ParseTree::ConcatNode(t1, t2)) => {
                    Ok(format!("{}{}", a.pr(s1, t1, env)?, b.pr(s2, t2, env)?))
                }
                _ => Err(Error::NoParse),
            },
            TypedNode::Swap(a, b) => match (s, t) {
                (ParseTree::ConcatNode(s1, s2), ParseTree::ConcatNode(t2, t1)) => {
                    Ok(format!("{}{}", b.pr(s2, t2, env)?, a.pr(s1, t1, env)?))
                }
                _ => Err(Error::NoParse),
            },
            TypedNode::Or(a, b) => match (s, t) {
                (ParseTree::OrNode(Side::Left, x), ParseTree::OrNode(Side::Left, y)) => {
                    a.pr(x, y, env)
                }
                (ParseTree::OrNode(Side::Right, x), ParseTree::OrNode(Side::Right, y)) => {
                    b.pr(x, y, env)
                }
                (ParseTree::OrNode(Side::Left, x), ParseTree::OrNode(Side::Right, _)) => {
                    a.cr(x, env)
                }
                (ParseTree::OrNode(Side::Right, x), ParseTree::OrNode(Side::Left, _)) => {
                    b.cr(x, env)
                }
                _ => Err(Error::NoParse),
            },
            TypedNode::MergeRight(a, b) => match s {
                ParseTree::OrNode(Side::Left, x) => a.put_r(&x.flatten(), &t.flatten(), env),
                ParseTree::OrNode(Side::Right, x) => b.put_r(&x.flatten(), &t.flatten(), env),
                _ => Err(Error::NoParse),
            },
            TypedNode::MergeLeft(a, b) => match t {
                ParseTree::OrNode(Side::Left, y) => a.put_r(&s.flatten(), &y.flatten(), env),
                ParseTree::OrNode(Side::Right, y) => b.put_r(&s.flatten(), &y.flatten(), env),
                _ => Err(Error::NoParse),
            },
            TypedNode::Compose(a, b) => {
                let mid_old = b.create_l(&t.flatten(), env)?;
                let mid_new = a.put_r(&s.flatten(), &mid_old, env)?;
                b.put_r(&mid_new, &t.flatten(), env)
            }
            TypedNode::Iterate(a) => match (s, t) {
                (ParseTree::StarNode(ss), ParseTree::StarNode(ts)) => {
                    let mut out = String::new();
                    for (i, si) in ss.iter().enumerate() {
                        if let Some(ti) = ts.get(i) {
                            out.push_str(&a.pr(si, ti, env)?);
                        } else {
                            out.push_str(&a.cr(si, env)?);
                        }
                    }
                    Ok(out)
                }
                _ => Err(Error::NoParse),
            },
            TypedNode::Invert(a) => a.pl(s, t, env),
            TypedNode::LibRef(_, l) => l.put_r(&s.flatten(), &t.flatten(), env),
        }
    }

    fn pl(&self, t: &ParseTree, s: &ParseTree, env: &DefEnv) -> Result<String> {
        match &self.node {
            TypedNode::Identity => Ok(t.flatten()),
            TypedNode::Disconnect { .. } => Ok(s.flatten()),
            TypedNode::Concat(a, b) => match (t, s) {
                (ParseTree::ConcatNode(t1, t2), ParseTree::ConcatNode(s1, s2)) => {
                    Ok(format!("{}{}", a.pl(t1, s1, env)?, b.pl(t2, s2, env)?))
                }
                _ => Err(Error::NoParse),
            },
            TypedNode::Swap(a, b) => match (t, s) {
                (ParseTree::ConcatNode(t2, t1), ParseTree::ConcatNode(s1, s2)) => {
                    Ok(format!("{}{}", a.pl(t1, s1, env)?, b.pl(t2, s2, env)?))
                }
                _ => Err(Error::NoParse),
            },
            TypedNode::Or(a, b) => match (t, s) {
                (ParseTree::OrNode(Side::Left, y), ParseTree::OrNode(Side::Left, x)) => {
                    a.pl(y, x, env)
                }
                (ParseTree::OrNode(Side::Right, y), ParseTree::OrNode(Side::Right, x)) => {
                    b.pl(y, x, env)
                }
                (ParseTree::OrNode(Side::Left, y), ParseTree::OrNode(Side::Right, _)) => {
                    a.cl(y, env)
                }
                (ParseTree::OrNode(Side::Right, y), ParseTree::OrNode(Side::Left, _)) => {
                    b.cl(y, env)
                }
                _ => Err(Error::NoParse),
            },
            TypedNode::MergeRight(a, b) => match s {
                ParseTree::OrNode(Side::Left, x) => a.put_l(&t.flatten(), &x.flatten(), env),
                ParseTree::OrNode(Side::Right, x) => b.put_l(&t.flatten(), &x.flatten(), env),
                _ => Err(Error::NoParse),
            },
            TypedNode::MergeLeft(a, b) => match t {
                ParseTree::OrNode(Side::Left, y) => a.put_l(&y.flatten(), &s.flatten(), env),
                ParseTree::OrNode(Side::Right, y) => b.put_l(&y.flatten(), &s.flatten(), env),
                _ => Err(Error::NoParse),
            },
            TypedNode::Compose(a, b) => {
                let mid_old = a.create_r(&s.flatten(), env)?;
                let mid_new = b.put_l(&t.flatten(), &mid_old, env)?;
                a.put_l(&mid_new, &s.flatten(), env)
            }
            TypedNode::Iterate(a) => match (t, s) {
                (ParseTree::StarNode(ts), ParseTree::StarNode(ss)) => {
                    let mut out = String::new();
                    for (i, ti) in ts.iter().enumerate() {
                        if let Some(si) = ss.get(i) {
                            out.push_str(&a.pl(ti, si, env)?);
                        } else {
                            out.push_str(&a.cl(ti, env)?);
                        }
                    }
                    Ok(out)
                }
                _ => Err(Error::NoParse),
            },
            TypedNode::Invert(a) => a.pr(t, s, env),
            TypedNode::LibRef(_, l) => l.put_l(&t.flatten(), &s.flatten(), env),
        }
    }
}

/// A closed interval of bit counts; the upper end may be infinite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn zero() -> Interval {
        Interval { lo: 0.0, hi: 0.0 }
    }

    pub fn point(x: f64) -> Interval {
        Interval { lo: x, hi: x }
    }

    pub fn infinite() -> Interval {
        Interval {
            lo: f64::INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn add(self, other: Interval) -> Interval {
        Interval {
            lo: self.lo + other.lo,
            hi: self.hi + other.hi,
        }
    }

    /// Scales by a positive factor.
    pub fn scale(self, f: f64) -> Interval {
        debug_assert!(f > 0.0);
        Interval {
            lo: self.lo * f,
            hi: self.hi * f,
        }
    }

    pub fn mix(p: f64, a: Interval, b: Interval) -> Interval {
        let term = |w: f64, x: f64| if w > 0.0 { w * x } else { 0.0 };
        Interval {
            lo: term(p, a.lo) + term(1.0 - p, b.lo),
            hi: term(p, a.hi) + term(1.0 - p, b.hi),
        }
    }

    fn collapse_require(self) -> Interval {
        if self.hi == 0.0 {
            Interval::zero()
        } else {
            Interval::infinite()
        }
    }
}

/// Reassociates an expression's concatenation spine to match a principal
/// type built from the same pieces, inserting epsilon constants where the
/// shape has them. Returns `None` when the pieces do not line up; the
/// original expression is then used unchanged.
fn reshape_to(sre: &Sre, shape: &Regex, env: &DefEnv) -> Option<Sre> {
    if sre.strip() == *shape {
        return Some(sre.clone());
    }
    match sre {
        Sre::Skip(x) => return reshape_to(x, shape, env).map(Sre::skip),
        Sre::Require(x) => return reshape_to(x, shape, env).map(Sre::require),
        // A reference unfolds when the shape demands structure.
        Sre::Ref(n) => return reshape_to(env.sre_of(n).ok()?, shape, env),
        _ => {}
    }
    match shape {
        Regex::Or(a, b) => match sre {
            Sre::Or(x, y, p) => Some(Sre::or(
                reshape_to(x, a, env)?,
                reshape_to(y, b, env)?,
                p.clone(),
            )),
            _ => None,
        },
        Regex::Star(a) => match sre {
            Sre::Star(x, p) => Some(Sre::star(reshape_to(x, a, env)?, p.clone())),
            _ => None,
        },
        Regex::Concat(..) => {
            let mut leaves = std::collections::VecDeque::new();
            concat_leaves(sre, &mut leaves);
            let rebuilt = rebuild(shape, &mut leaves, env)?;
            if leaves.is_empty() {
                Some(rebuilt)
            } else {
                None
            }
        }
        _ => None,
    }
}

fn concat_leaves(sre: &Sre, out: &mut std::collections::VecDeque<Sre>) {
    match sre {
        Sre::Concat(a, b) => {
            concat_leaves(a, out);
            concat_leaves(b, out);
        }
        Sre::Const(c) if c.is_empty() => {}
        other => out.push_back(other.clone()),
    }
}

fn rebuild(
    shape: &Regex,
    leaves: &mut std::collections::VecDeque<Sre>,
    env: &DefEnv,
) -> Option<Sre> {
    match shape {
        Regex::Concat(a, b) => {
            let left = rebuild(a, leaves, env)?;
            let right = rebuild(b, leaves, env)?;
            Some(Sre::concat(left, right))
        }
        Regex::Const(c) if c.is_empty() => Some(Sre::lit("")),
        other => {
            let f = leaves.pop_front()?;
            if f.strip() == *other {
                Some(f)
            } else {
                reshape_to(&f, other, env)
            }
        }
    }
}

/// Bits to recover the target string from a synchronized source string.
pub fn h_right(l: &TypedLens, s: &Sre, t: &Sre, env: &DefEnv) -> Result<Interval> {
    bound(l, s, t, env, Dir::Right)
}

/// Bits to recover the source string from a synchronized target string.
pub fn h_left(l: &TypedLens, s: &Sre, t: &Sre, env: &DefEnv) -> Result<Interval> {
    bound(l, s, t, env, Dir::Left)
}

/// Lens cost: the sum of both directions' upper bounds. Zero only for
/// (bound-)bijective lenses.
pub fn cost(l: &TypedLens, s: &Sre, t: &Sre, env: &DefEnv) -> Result<f64> {
    let hr = h_right(l, s, t, env)?;
    let hl = h_left(l, s, t, env)?;
    Ok(hl.hi + hr.hi)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Dir {
    Right,
    Left,
}

fn bound(l: &TypedLens, s: &Sre, t: &Sre, env: &DefEnv, dir: Dir) -> Result<Interval> {
    // Reassociate the expressions to this node's principal shapes when the
    // same pieces are merely grouped differently.
    if s.strip() != l.src {
        if let Some(s2) = reshape_to(s, &l.src, env) {
            return bound(l, &s2, t, env, dir);
        }
    }
    if t.strip() != l.tgt {
        if let Some(t2) = reshape_to(t, &l.tgt, env) {
            return bound(l, s, &t2, env, dir);
        }
    }
    // Relevance wrappers on the side being recovered collapse or vanish;
    // wrappers on the known side are transparent.
    let recovered = if dir == Dir::Right { t } else { s };
    match recovered {
        Sre::Skip(_) => return Ok(Interval::zero()),
        Sre::Require(inner) => {
            let peeled = match dir {
                Dir::Right => bound(l, s, inner, env, dir)?,
                Dir::Left => bound(l, inner, t, env, dir)?,
            };
            return Ok(peeled.collapse_require());
        }
        _ => {}
    }
    let known = if dir == Dir::Right { s } else { t };
    if let Sre::Skip(inner) | Sre::Require(inner) = known {
        return match dir {
            Dir::Right => bound(l, inner, t, env, dir),
            Dir::Left => bound(l, s, inner, env, dir),
        };
    }

    let mismatch = |loc: &str| Error::TypeMismatch {
        location: loc.to_string(),
        expected: format!("{} <=> {}", l.src, l.tgt),
        got: format!("{s} <=> {t}"),
    };

    match &l.node {
        TypedNode::Identity => Ok(Interval::zero()),
        TypedNode::Disconnect { .. } => {
            let target = if dir == Dir::Right { t } else { s };
            if target.has_costly_require(env) {
                Ok(Interval::infinite())
            } else {
                Ok(Interval::point(entropy(target, env)?))
            }
        }
        TypedNode::Concat(a, b) => match (s, t) {
            (Sre::Concat(s1, s2), Sre::Concat(t1, t2)) => {
                Ok(bound(a, s1, t1, env, dir)?.add(bound(b, s2, t2, env, dir)?))
            }
            _ => Err(mismatch("concat")),
        },
        TypedNode::Swap(a, b) => match (s, t) {
            // Source reads s1 . s2, target reads t2 . t1.
            (Sre::Concat(s1, s2), Sre::Concat(t2, t1)) => {
                Ok(bound(b, s2, t2, env, dir)?.add(bound(a, s1, t1, env, dir)?))
            }
            _ => Err(mismatch("swap")),
        },
        TypedNode::Or(a, b) => match (s, t) {
            (Sre::Or(s1, s2, p), Sre::Or(t1, t2, q)) => {
                let w = if dir == Dir::Right { p } else { q };
                Ok(Interval::mix(
                    w.to_f64(),
                    bound(a, s1, t1, env, dir)?,
                    bound(b, s2, t2, env, dir)?,
                ))
            }
            _ => Err(mismatch("or")),
        },
        TypedNode::MergeRight(a, b) => match s {
            Sre::Or(s1, s2, p) => match dir {
                Dir::Right => Ok(Interval::mix(
                    p.to_f64(),
                    bound(a, s1, t, env, dir)?,
                    bound(b, s2, t, env, dir)?,
                )),
                Dir::Left => {
                    // Which source branch produced the string is not
                    // recoverable from the target alone: one extra bit.
                    let ia = bound(a, s1, t, env, dir)?;
                    let ib = bound(b, s2, t, env, dir)?;
                    Ok(Interval {
                        lo: 0.0,
                        hi: ia.hi + ib.hi + 1.0,
                    })
                }
            },
            _ => Err(mismatch("merge_right")),
        },
        TypedNode::MergeLeft(a, b) => match t {
            Sre::Or(t1, t2, q) => match dir {
                Dir::Left => Ok(Interval::mix(
                    q.to_f64(),
                    bound(a, s, t1, env, dir)?,
                    bound(b, s, t2, env, dir)?,
                )),
                Dir::Right => {
                    let ia = bound(a, s, t1, env, dir)?;
                    let ib = bound(b, s, t2, env, dir)?;
                    Ok(Interval {
                        lo: 0.0,
                        hi: ia.hi + ib.hi + 1.0,
                    })
                }
            },
            _ => Err(mismatch("merge_left")),
        },
        TypedNode::Iterate(a) => match (s, t) {
            (Sre::Star(s1, p), Sre::Star(t1, q)) => {
                // Synchronized pairs iterate in lockstep; the expected
                // iteration count comes from the known side.
                let w = if dir == Dir::Right { p } else { q };
                let pf = w.to_f64();
                Ok(bound(a, s1, t1, env, dir)?.scale(pf / (1.0 - pf)))
            }
            _ => Err(mismatch("iterate")),
        },
        TypedNode::Invert(a) => match dir {
            Dir::Right => bound(a, t, s, env, Dir::Left),
            Dir::Left => bound(a, t, s, env, Dir::Right),
        },
        TypedNode::Compose(..) => Err(Error::ComposePresent),
        TypedNode::LibRef(_, inner) => bound(inner, s, t, env, dir),
    }
}

/// One edit to either side of a synchronized pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Edit {
    Inl(String),
    Inr(String),
}

pub type EditState = Option<(String, String)>;

/// Runs an edit sequence: edits on a fresh state go through creates, later
/// edits through puts, threading the most recent synchronized pair.
pub fn apply(
    l: &TypedLens,
    mut state: EditState,
    edits: &[Edit],
    env: &DefEnv,
) -> Result<Vec<Edit>> {
    let mut out = Vec::with_capacity(edits.len());
    for e in edits {
        match (e, &state) {
            (Edit::Inl(x), None) => {
                let y = l.create_r(x, env)?;
                out.push(Edit::Inr(y.clone()));
                state = Some((x.clone(), y));
            }
            (Edit::Inr(y), None) => {
                let x = l.create_l(y, env)?;
                out.push(Edit::Inl(x.clone()));
                state = Some((x, y.clone()));
            }
            (Edit::Inl(x), Some((_, y_old))) => {
                let y = l.put_r(x, y_old, env)?;
                out.push(Edit::Inr(y.clone()));
                state = Some((x.clone(), y));
            }
            (Edit::Inr(y), Some((x_old, _))) => {
                let x = l.put_l(y, x_old, env)?;
                out.push(Edit::Inl(x.clone()));
                state = Some((x, y.clone()));
            }
        }
    }
    Ok(out)
}

/// The forgetful classical wrapper: a complement holding the most recent
/// synchronized pair, with puts dispatching on its presence.
pub struct Forgetful<'a> {
    lens: &'a TypedLens,
    env: &'a DefEnv,
}

impl<'a> Forgetful<'a> {
    pub fn new(lens: &'a TypedLens, env: &'a DefEnv) -> Forgetful<'a> {
        Forgetful { lens, env }
    }

    pub fn init(&self) -> EditState {
        None
    }

    pub fn putr(&self, x: &str, c: &EditState) -> Result<(String, EditState)> {
        let y = match c {
            None => self.lens.create_r(x, self.env)?,
            Some((_, y_old)) => self.lens.put_r(x, y_old, self.env)?,
        };
        Ok((y.clone(), Some((x.to_string(), y))))
    }

    pub fn putl(&self, y: &str, c: &EditState) -> Result<(String, EditState)> {
        let x = match c {
            None => self.lens.create_l(y, self.env)?,
            Some((x_old, _)) => self.lens.put_l(y, x_old, self.env)?,
        };
        Ok((x.clone(), Some((x, y.to_string()))))
    }

    /// The classical apply over the explicit complement.
    pub fn apply(&self, mut c: EditState, edits: &[Edit]) -> Result<Vec<Edit>> {
        let mut out = Vec::with_capacity(edits.len());
        for e in edits {
            match e {
                Edit::Inl(x) => {
                    let (y, c2) = self.putr(x, &c)?;
                    out.push(Edit::Inr(y));
                    c = c2;
                }
                Edit::Inr(y) => {
                    let (x, c2) = self.putl(y, &c)?;
                    out.push(Edit::Inl(x));
                    c = c2;
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::Prob;

    fn env() -> DefEnv {
        let mut e = DefEnv::new();
        let digit = (0..=9)
            .map(|d| Sre::lit(&d.to_string()))
            .reduce(|a, b| Sre::or(a, b, Prob::from_ratio(1, 2)))
            .unwrap();
        e.define("digit", digit).unwrap();
        e.define(
            "number",
            Sre::concat(
                Sre::reference("digit"),
                Sre::star(Sre::reference("digit"), Prob::from_ratio(4, 5)),
            ),
        )
        .unwrap();
        e.define(
            "salary",
            Sre::or(
                Sre::reference("number"),
                Sre::lit("unk"),
                Prob::from_ratio(1, 2),
            ),
        )
        .unwrap();
        e
    }

    fn lib() -> Library {
        Library::new()
    }

    fn tc(l: &Lens, e: &DefEnv) -> TypedLens {
        typecheck(l, e, &lib()).unwrap()
    }

    #[test]
    fn typecheck_examples() {
        let e = env();
        let id = tc(&Lens::id(Regex::reference("salary")), &e);
        assert_eq!(id.src, Regex::reference("salary"));
        assert_eq!(id.tgt, Regex::reference("salary"));

        let disc = tc(
            &Lens::disconnect(Regex::reference("salary"), Regex::lit(""), "unk", ""),
            &e,
        );
        assert_eq!(disc.src, Regex::reference("salary"));
        assert_eq!(disc.tgt, Regex::lit(""));

        // The principal type "a" . "b" is equivalent to "ab".
        let cc = tc(
            &Lens::concat(Lens::id(Regex::lit("a")), Lens::id(Regex::lit("b"))),
            &e,
        );
        assert!(automata::equivalent(&cc.src, &Regex::lit("ab"), &e).unwrap());

        // Bad default.
        assert!(matches!(
            typecheck(
                &Lens::disconnect(Regex::reference("salary"), Regex::lit(""), "nope", ""),
                &e,
                &lib()
            ),
            Err(Error::DefaultNotInLanguage(_))
        ));

        // Overlapping or-branches are rejected.
        assert!(typecheck(
            &Lens::or(Lens::id(Regex::lit("a")), Lens::id(Regex::lit("a"))),
            &e,
            &lib()
        )
        .is_err());
    }

    #[test]
    fn create_examples() {
        let e = env();
        let disc = tc(
            &Lens::disconnect(Regex::reference("salary"), Regex::lit(""), "unk", ""),
            &e,
        );
        assert_eq!(disc.create_r("38000", &e).unwrap(), "");
        assert_eq!(disc.create_l("", &e).unwrap(), "unk");

        let id = tc(&Lens::id(Regex::reference("salary")), &e);
        assert_eq!(id.create_l("37500", &e).unwrap(), "37500");
    }

    #[test]
    fn put_examples() {
        let e = env();
        let disc = tc(
            &Lens::disconnect(Regex::reference("salary"), Regex::lit(""), "unk", ""),
            &e,
        );
        assert_eq!(disc.put_l("", "60000", &e).unwrap(), "60000");
        assert_eq!(disc.put_r("12345", "", &e).unwrap(), "");

        let id = tc(&Lens::id(Regex::reference("salary")), &e);
        assert_eq!(id.put_r("123", "456", &e).unwrap(), "123");

        // Iteration pads with creates and drops surplus old iterations.
        let inner = Lens::disconnect(
            Regex::or(Regex::lit("a"), Regex::lit("A")),
            Regex::or(Regex::lit("b"), Regex::lit("B")),
            "a",
            "b",
        );
        let it = tc(&Lens::iterate(inner), &e);
        assert_eq!(it.put_r("aAa", "B", &e).unwrap(), "Bbb");
        assert_eq!(it.put_r("a", "BBB", &e).unwrap(), "B");
    }

    #[test]
    fn swap_round_trip() {
        let e = env();
        let sw = tc(
            &Lens::swap(Lens::id(Regex::lit("x")), Lens::id(Regex::lit("y"))),
            &e,
        );
        assert_eq!(sw.create_r("xy", &e).unwrap(), "yx");
        assert_eq!(sw.create_l("yx", &e).unwrap(), "xy");
        assert_eq!(sw.put_l("yx", "xy", &e).unwrap(), "xy");
    }

    #[test]
    fn compose_and_invert() {
        let e = env();
        let first = Lens::concat(Lens::id(Regex::lit("x")), Lens::ins("!"));
        let second = Lens::concat(Lens::id(Regex::lit("x")), Lens::id(Regex::lit("!")));
        let comp = tc(&Lens::compose(first, second), &e);
        assert_eq!(comp.create_r("x", &e).unwrap(), "x!");
        assert_eq!(comp.create_l("x!", &e).unwrap(), "x");

        let inv = tc(&Lens::invert(Lens::ins("t")), &e);
        assert_eq!(inv.create_r("t", &e).unwrap(), "");
        assert_eq!(inv.create_l("", &e).unwrap(), "t");
    }

    #[test]
    fn entropy_bounds_examples() {
        let e = env();
        let r = Regex::or(Regex::lit("x"), Regex::lit("y"));
        let s = Sre::or(Sre::lit("x"), Sre::lit("y"), Prob::from_ratio(1, 2));

        let id = tc(&Lens::id(r.clone()), &e);
        assert_eq!(h_right(&id, &s, &s, &e).unwrap(), Interval::zero());

        let disc = tc(&Lens::disconnect(r.clone(), r.clone(), "x", "x"), &e);
        let hr = h_right(&disc, &s, &s, &e).unwrap();
        assert!((hr.lo - 1.0).abs() < 1e-12 && (hr.hi - 1.0).abs() < 1e-12);
        assert!((cost(&disc, &s, &s, &e).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(cost(&id, &s, &s, &e).unwrap(), 0.0);

        // merge_left of two zero-entropy sublenses: the branch choice costs
        // at most one bit in the right direction.
        let ml = tc(
            &Lens::merge_left(
                Lens::id(Regex::lit("x")),
                Lens::disconnect(Regex::lit("x"), Regex::lit("y"), "x", "y"),
            ),
            &e,
        );
        let sx = Sre::lit("x");
        let t = Sre::or(Sre::lit("x"), Sre::lit("y"), Prob::from_ratio(1, 2));
        let b = h_right(&ml, &sx, &t, &e).unwrap();
        assert_eq!(b.lo, 0.0);
        assert!((b.hi - 1.0).abs() < 1e-12);

        // Discarding required information is infinitely costly.
        let req = Sre::require(s.clone());
        let c = cost(&disc, &req, &s, &e).unwrap();
        assert!(c.is_infinite());
    }

    #[test]
    fn apply_examples() {
        let e = env();
        let r = Regex::or(Regex::lit("a"), Regex::lit("b"));
        let id = tc(&Lens::id(r), &e);
        let out = apply(
            &id,
            None,
            &[Edit::Inl("a".into()), Edit::Inr("b".into())],
            &e,
        )
        .unwrap();
        assert_eq!(out, vec![Edit::Inr("a".into()), Edit::Inl("b".into())]);
        assert_eq!(apply(&id, None, &[], &e).unwrap(), vec![]);

        let disc = tc(
            &Lens::disconnect(Regex::lit("s"), Regex::lit("t0"), "s", "t0"),
            &e,
        );
        assert_eq!(
            apply(&disc, None, &[Edit::Inl("s".into())], &e).unwrap(),
            vec![Edit::Inr("t0".into())]
        );
    }

    #[test]
    fn forgetful_wrapper() {
        let e = env();
        let id = tc(&Lens::id(Regex::lit("a")), &e);
        let f = Forgetful::new(&id, &e);
        let (y, c) = f.putr("a", &f.init()).unwrap();
        assert_eq!(y, "a");
        assert_eq!(c, Some(("a".into(), "a".into())));

        // apply-equivalence on a small edit sequence.
        let edits = vec![
            Edit::Inl("a".into()),
            Edit::Inr("a".into()),
            Edit::Inl("a".into()),
        ];
        assert_eq!(
            apply(&id, None, &edits, &e).unwrap(),
            f.apply(None, &edits).unwrap()
        );
    }

    #[test]
    fn round_trip_laws_spot_check() {
        let e = env();
        let l = tc(
            &Lens::concat(
                Lens::id(Regex::reference("salary")),
                Lens::or(Lens::ins("L"), Lens::del("r")),
            ),
            &e,
        );
        for (s, t) in [("123", "45L"), ("unkr", "77L"), ("9r", "unk")] {
            let cr = l.create_r(s, &e).unwrap();
            assert_eq!(l.put_l(&cr, s, &e).unwrap(), s, "CreatePutRL");
            let cl = l.create_l(t, &e).unwrap();
            assert_eq!(l.put_r(&cl, t, &e).unwrap(), t, "CreatePutLR");
            let pr = l.put_r(s, t, &e).unwrap();
            assert_eq!(l.put_l(&pr, s, &e).unwrap(), s, "PutRL");
            let pl = l.put_l(t, s, &e).unwrap();
            assert_eq!(l.put_r(&pl, t, &e).unwrap(), t, "PutLR");
        }
    }
}
