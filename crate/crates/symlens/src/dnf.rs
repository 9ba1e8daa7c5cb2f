//! Stochastic DNF regular expressions: the normal form used by synthesis.
//!
//! A DNF expression is an n-ary union of probability-weighted sequences;
//! a sequence interleaves constant strings with atoms; an atom is either a
//! starred DNF expression, an unopened closed reference, or a relevance
//! group. The form quotients associativity, commutativity, and
//! distributivity: expressions related by those rewrites convert to
//! structurally equal normal forms.

use crate::env::DefEnv;
use crate::error::{Error, Result};
use crate::rational::{rat_one, rat_zero, Prob, Rat};
use crate::regex::{cmp_len_lex, Regex};
use crate::sre::{Relevance, Sre};
use num_traits::Zero;
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum AtomKind {
    /// Iterated body with a continuation probability.
    Star(Prob),
    /// An unopened closed reference; the body caches the definition's
    /// normal form and the atom matches it exactly once.
    Closed(String),
    /// A relevance-annotated subterm kept whole so its information content
    /// stays attributable; matches its body exactly once.
    Group,
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub kind: AtomKind,
    pub body: Arc<DnfRegex>,
    pub relevance: Relevance,
}

impl Atom {
    pub fn star(body: DnfRegex, p: Prob) -> Atom {
        Atom {
            kind: AtomKind::Star(p),
            body: Arc::new(body),
            relevance: Relevance::None,
        }
    }

    pub fn closed(name: &str, body: DnfRegex) -> Atom {
        Atom {
            kind: AtomKind::Closed(name.to_string()),
            body: Arc::new(body),
            relevance: Relevance::None,
        }
    }

    pub fn group(body: DnfRegex) -> Atom {
        Atom {
            kind: AtomKind::Group,
            body: Arc::new(body),
            relevance: Relevance::None,
        }
    }

    pub fn with_relevance(mut self, rel: Relevance) -> Atom {
        self.relevance = rel;
        self
    }

    /// Expected bits to describe a draw from the atom. Skip-marked atoms
    /// contribute nothing.
    pub fn entropy(&self) -> f64 {
        if self.relevance == Relevance::Skip {
            return 0.0;
        }
        match &self.kind {
            AtomKind::Star(p) => {
                let pf = p.to_f64();
                let q = 1.0 - pf;
                (pf / q) * (self.body.entropy() - pf.log2()) - q.log2()
            }
            AtomKind::Closed(_) | AtomKind::Group => self.body.entropy(),
        }
    }

    /// Entropy ignoring relevance (the raw information content).
    pub fn raw_entropy(&self) -> f64 {
        match &self.kind {
            AtomKind::Star(p) => {
                let pf = p.to_f64();
                let q = 1.0 - pf;
                (pf / q) * (self.body.entropy() - pf.log2()) - q.log2()
            }
            AtomKind::Closed(_) | AtomKind::Group => self.body.entropy(),
        }
    }

    pub fn min_string(&self) -> Option<String> {
        match &self.kind {
            AtomKind::Star(_) => Some(String::new()),
            AtomKind::Closed(_) | AtomKind::Group => self.body.min_string(),
        }
    }

    pub fn to_sre(&self) -> Sre {
        let inner = match &self.kind {
            AtomKind::Star(p) => Sre::star(self.body.to_sre(), p.clone()),
            AtomKind::Closed(name) => Sre::reference(name),
            AtomKind::Group => self.body.to_sre(),
        };
        match self.relevance {
            Relevance::None => inner,
            Relevance::Skip => Sre::skip(inner),
            Relevance::Require => Sre::require(inner),
        }
    }
}

impl fmt::Debug for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.relevance {
            Relevance::Skip => write!(f, "skip:")?,
            Relevance::Require => write!(f, "require:")?,
            Relevance::None => {}
        }
        match &self.kind {
            AtomKind::Star(p) => write!(f, "{:?}*{{{}}}", self.body, p),
            AtomKind::Closed(n) => write!(f, "{n}"),
            AtomKind::Group => write!(f, "{:?}", self.body),
        }
    }
}

/// An interleaving s0 A1 s1 ... An sn of constants and atoms.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sequence {
    pub strings: Vec<String>,
    pub atoms: Vec<Atom>,
}

impl Sequence {
    pub fn constant(s: &str) -> Sequence {
        Sequence {
            strings: vec![s.to_string()],
            atoms: vec![],
        }
    }

    pub fn new(strings: Vec<String>, atoms: Vec<Atom>) -> Sequence {
        assert_eq!(strings.len(), atoms.len() + 1, "interleaving shape");
        Sequence { strings, atoms }
    }

    pub fn of_atom(atom: Atom) -> Sequence {
        Sequence {
            strings: vec![String::new(), String::new()],
            atoms: vec![atom],
        }
    }

    /// Sequence concatenation: the boundary constants fuse.
    pub fn concat(&self, other: &Sequence) -> Sequence {
        let mut strings = self.strings.clone();
        let fused = format!("{}{}", strings.pop().unwrap(), other.strings[0]);
        strings.push(fused);
        strings.extend(other.strings[1..].iter().cloned());
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().cloned());
        Sequence { strings, atoms }
    }

    pub fn entropy(&self) -> f64 {
        self.atoms.iter().map(Atom::entropy).sum()
    }

    pub fn min_string(&self) -> Option<String> {
        let mut out = String::new();
        for (i, s) in self.strings.iter().enumerate() {
            out.push_str(s);
            if i < self.atoms.len() {
                out.push_str(&self.atoms[i].min_string()?);
            }
        }
        Some(out)
    }

    pub fn to_sre(&self) -> Sre {
        let mut pieces: Vec<Sre> = Vec::new();
        for (i, s) in self.strings.iter().enumerate() {
            if !s.is_empty() {
                pieces.push(Sre::Const(s.clone()));
            }
            if i < self.atoms.len() {
                pieces.push(self.atoms[i].to_sre());
            }
        }
        match pieces.len() {
            0 => Sre::lit(""),
            _ => {
                let mut it = pieces.into_iter().rev();
                let last = it.next().unwrap();
                it.fold(last, |acc, p| Sre::concat(p, acc))
            }
        }
    }
}

impl fmt::Debug for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, s) in self.strings.iter().enumerate() {
            if i > 0 {
                write!(f, "·")?;
            }
            write!(f, "{}", crate::syntax::quote(s))?;
            if i < self.atoms.len() {
                write!(f, "·{:?}", self.atoms[i])?;
            }
        }
        write!(f, "]")
    }
}

/// A probability-weighted n-ary union of sequences in canonical order.
/// The empty union denotes the empty language; otherwise the weights sum
/// to one.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct DnfRegex {
    pub branches: Vec<(Sequence, Prob)>,
}

impl DnfRegex {
    pub fn empty() -> DnfRegex {
        DnfRegex { branches: vec![] }
    }

    pub fn singleton(seq: Sequence) -> DnfRegex {
        DnfRegex {
            branches: vec![(seq, Prob::new(rat_one()).unwrap())],
        }
    }

    pub fn from_branches(mut branches: Vec<(Sequence, Prob)>) -> DnfRegex {
        branches.sort();
        DnfRegex { branches }
    }

    pub fn is_empty_language(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn total_mass(&self) -> Rat {
        self.branches
            .iter()
            .fold(rat_zero(), |acc, (_, p)| acc + p.value())
    }

    pub fn entropy(&self) -> f64 {
        self.branches
            .iter()
            .map(|(sq, p)| {
                let pf = p.to_f64();
                pf * (sq.entropy() - pf.log2())
            })
            .sum()
    }

    pub fn min_string(&self) -> Option<String> {
        self.branches
            .iter()
            .filter_map(|(sq, _)| sq.min_string())
            .min_by(|a, b| cmp_len_lex(a, b))
    }

    pub fn to_sre(&self) -> Sre {
        if self.branches.is_empty() {
            return Sre::Empty;
        }
        // Right-nested union with conditional probabilities.
        fn build(branches: &[(Sequence, Prob)], remaining_mass: Rat) -> Sre {
            if branches.len() == 1 {
                return branches[0].0.to_sre();
            }
            let (sq, p) = &branches[0];
            let cond = Prob::new(p.value() / &remaining_mass).expect("valid conditional");
            let rest_mass = remaining_mass - p.value();
            Sre::or(sq.to_sre(), build(&branches[1..], rest_mass), cond)
        }
        build(&self.branches, self.total_mass())
    }

    pub fn flatten_regex(&self) -> Regex {
        self.to_sre().strip()
    }
}

impl fmt::Debug for DnfRegex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "⟨")?;
        for (i, (sq, p)) in self.branches.iter().enumerate() {
            if i > 0 {
                write!(f, " ⊕ ")?;
            }
            write!(f, "({sq:?},{p})")?;
        }
        write!(f, "⟩")
    }
}

/// DNF concatenation: all pairwise sequence products with multiplied
/// weights. The empty union absorbs.
pub fn concat_dnf(x: &DnfRegex, y: &DnfRegex) -> DnfRegex {
    let mut branches = Vec::with_capacity(x.branches.len() * y.branches.len());
    for (sx, px) in &x.branches {
        for (sy, py) in &y.branches {
            branches.push((sx.concat(sy), px.mul(py)));
        }
    }
    DnfRegex::from_branches(branches)
}

/// DNF union: branches of `x` scaled by `p`, branches of `y` by `1 - p`.
/// Never merges duplicate sequences. If one side denotes the empty
/// language the result's weights sum to less than one; `total_mass`
/// exposes that for callers that must reject it.
pub fn or_dnf(x: &DnfRegex, y: &DnfRegex, p: &Prob) -> DnfRegex {
    let q = p.complement();
    let mut branches: Vec<(Sequence, Prob)> = x
        .branches
        .iter()
        .map(|(s, w)| (s.clone(), w.mul(p)))
        .collect();
    branches.extend(y.branches.iter().map(|(s, w)| (s.clone(), w.mul(&q))));
    DnfRegex::from_branches(branches)
}

/// Wraps an atom as a one-atom sequence with empty flanking strings.
pub fn atom_to_dnf(a: Atom) -> DnfRegex {
    DnfRegex::singleton(Sequence::of_atom(a))
}

/// Conversion to the normal form. Closed references become single closed
/// atoms; open references inline their definition's normal form. Relevance
/// wrappers mark the atoms they cover, or group a multi-branch body into a
/// single atom so its information content stays attributable.
pub fn to_dnf(s: &Sre, env: &DefEnv) -> Result<DnfRegex> {
    match s {
        Sre::Empty => Ok(DnfRegex::empty()),
        Sre::Const(c) => Ok(DnfRegex::singleton(Sequence::constant(c))),
        Sre::Concat(a, b) => {
            let da = to_dnf(a, env)?;
            let db = to_dnf(b, env)?;
            if (da.is_empty_language() || db.is_empty_language())
                && !matches!(**a, Sre::Empty)
                && !matches!(**b, Sre::Empty)
            {
                return Err(Error::EmptySubterm);
            }
            Ok(concat_dnf(&da, &db))
        }
        Sre::Or(a, b, p) => {
            let da = to_dnf(a, env)?;
            let db = to_dnf(b, env)?;
            if da.is_empty_language() || db.is_empty_language() {
                return Err(Error::EmptySubterm);
            }
            Ok(or_dnf(&da, &db, p))
        }
        Sre::Star(a, p) => {
            let body = to_dnf(a, env)?;
            if body.is_empty_language() {
                return Err(Error::EmptySubterm);
            }
            Ok(atom_to_dnf(Atom::star(body, p.clone())))
        }
        Sre::Skip(a) => relevance_dnf(a, env, Relevance::Skip),
        Sre::Require(a) => relevance_dnf(a, env, Relevance::Require),
        Sre::Ref(n) => {
            let body = env.dnf_of(n)?;
            if env.is_closed(n) {
                Ok(atom_to_dnf(Atom::closed(n, body.clone())))
            } else {
                Ok(body.clone())
            }
        }
    }
}

fn relevance_dnf(body: &Sre, env: &DefEnv, rel: Relevance) -> Result<DnfRegex> {
    let d = to_dnf(body, env)?;
    if d.is_empty_language() {
        return Err(Error::EmptySubterm);
    }
    if d.branches.len() == 1 {
        let (sq, p) = d.branches.into_iter().next().unwrap();
        let atoms = sq
            .atoms
            .into_iter()
            .map(|a| a.with_relevance(rel))
            .collect();
        Ok(DnfRegex {
            branches: vec![(
                Sequence {
                    strings: sq.strings,
                    atoms,
                },
                p,
            )],
        })
    } else {
        Ok(atom_to_dnf(Atom::group(d).with_relevance(rel)))
    }
}

/// Exact probability assigned to `w` by the normal form.
pub fn dnf_probability(d: &DnfRegex, w: &str) -> Result<Rat> {
    let chars: Vec<char> = w.chars().collect();
    let mut ev = DnfEval {
        chars: &chars,
        prob_memo: HashMap::new(),
        count_memo: HashMap::new(),
    };
    let mut total = rat_zero();
    for (sq, p) in &d.branches {
        total += p.value() * ev.seq_prob(sq, 0, chars.len())?;
    }
    Ok(total)
}

/// True iff `w` is in the language of the normal form.
pub fn dnf_member(d: &DnfRegex, w: &str) -> Result<bool> {
    let chars: Vec<char> = w.chars().collect();
    let mut ev = DnfEval {
        chars: &chars,
        prob_memo: HashMap::new(),
        count_memo: HashMap::new(),
    };
    for (sq, _) in &d.branches {
        if ev.seq_count(sq, 0, chars.len())? > 0 {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Expected bits for a draw: branch choice plus per-atom content.
pub fn dnf_entropy(d: &DnfRegex) -> Result<f64> {
    if d.is_empty_language() {
        return Err(Error::PreconditionViolated(
            "entropy is undefined on the empty language".into(),
        ));
    }
    Ok(d.entropy())
}

/// How one atom matched during a DNF parse.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AtomMatch {
    pub text: String,
    /// Iteration-by-iteration split for star atoms.
    pub iterations: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DnfParse {
    pub branch: usize,
    pub atoms: Vec<AtomMatch>,
}

/// Unique parse of `w`: the branch it belongs to and the substring matched
/// by each atom (iteration splits for star atoms).
pub fn dnf_parse(d: &DnfRegex, w: &str) -> Result<DnfParse> {
    let chars: Vec<char> = w.chars().collect();
    let mut ev = DnfEval {
        chars: &chars,
        prob_memo: HashMap::new(),
        count_memo: HashMap::new(),
    };
    let mut total: u64 = 0;
    let mut hit: Option<usize> = None;
    for (idx, (sq, _)) in d.branches.iter().enumerate() {
        let c = ev.seq_count(sq, 0, chars.len())?;
        total = total.saturating_add(c);
        if c > 0 && hit.is_none() {
            hit = Some(idx);
        }
    }
    match total {
        0 => Err(Error::NoParse),
        1 => {
            let branch = hit.unwrap();
            let atoms = ev.extract_seq(&d.branches[branch].0, 0, chars.len())?;
            Ok(DnfParse { branch, atoms })
        }
        n => Err(Error::AmbiguousParse {
            input: w.to_string(),
            count: n as usize,
        }),
    }
}

struct DnfEval<'a> {
    chars: &'a [char],
    prob_memo: HashMap<(usize, usize, usize), Rat>,
    count_memo: HashMap<(usize, usize, usize), u64>,
}

impl<'a> DnfEval<'a> {
    fn literal_at(&self, s: &str, i: usize, j: usize) -> bool {
        let want: Vec<char> = s.chars().collect();
        j.checked_sub(i) == Some(want.len()) && self.chars[i..j] == want[..]
    }

    fn seq_prob(&mut self, sq: &'a Sequence, i: usize, j: usize) -> Result<Rat> {
        let key = (sq as *const Sequence as usize, i, j);
        if let Some(p) = self.prob_memo.get(&key) {
            return Ok(p.clone());
        }
        let s0_len = sq.strings[0].chars().count();
        let p = if i + s0_len > j || !self.literal_at(&sq.strings[0], i, i + s0_len) {
            rat_zero()
        } else {
            self.seq_prob_from(sq, 0, i + s0_len, j)?
        };
        self.prob_memo.insert(key, p.clone());
        Ok(p)
    }

    fn seq_prob_from(&mut self, sq: &'a Sequence, k: usize, i: usize, j: usize) -> Result<Rat> {
        if k == sq.atoms.len() {
            return Ok(if i == j { rat_one() } else { rat_zero() });
        }
        let mut total = rat_zero();
        let sep = &sq.strings[k + 1];
        let sep_len = sep.chars().count();
        for m in i..=j {
            let pa = self.atom_prob(&sq.atoms[k], i, m)?;
            if pa.is_zero() {
                continue;
            }
            if m + sep_len > j || !self.literal_at(sep, m, m + sep_len) {
                continue;
            }
            let rest = self.seq_prob_from(sq, k + 1, m + sep_len, j)?;
            total += pa * rest;
        }
        Ok(total)
    }

    fn atom_prob(&mut self, atom: &'a Atom, i: usize, j: usize) -> Result<Rat> {
        let key = (atom as *const Atom as usize, i, j);
        if let Some(p) = self.prob_memo.get(&key) {
            return Ok(p.clone());
        }
        let p = match &atom.kind {
            AtomKind::Star(pr) => {
                if self.dnf_member_span(&atom.body, i, i)? && i != j {
                    return Err(Error::PreconditionViolated(
                        "star body accepts the empty string".into(),
                    ));
                }
                if i == j {
                    rat_one() - pr.value()
                } else {
                    let mut total = rat_zero();
                    for m in (i + 1)..=j {
                        let head = self.dnf_prob_span(&atom.body, i, m)?;
                        if head.is_zero() {
                            continue;
                        }
                        let tail = self.atom_prob(atom, m, j)?;
                        total += head * tail;
                    }
                    pr.value() * total
                }
            }
            AtomKind::Closed(_) | AtomKind::Group => self.dnf_prob_span(&atom.body, i, j)?,
        };
        self.prob_memo.insert(key, p.clone());
        Ok(p)
    }

    fn dnf_prob_span(&mut self, d: &'a DnfRegex, i: usize, j: usize) -> Result<Rat> {
        let mut total = rat_zero();
        for (sq, p) in &d.branches {
            let sp = self.seq_prob(sq, i, j)?;
            total += p.value() * sp;
        }
        Ok(total)
    }

    fn dnf_member_span(&mut self, d: &'a DnfRegex, i: usize, j: usize) -> Result<bool> {
        for (sq, _) in &d.branches {
            if self.seq_count(sq, i, j)? > 0 {
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn seq_count(&mut self, sq: &'a Sequence, i: usize, j: usize) -> Result<u64> {
        let key = (sq as *const Sequence as usize, i, j);
        if let Some(&c) = self.count_memo.get(&key) {
            return Ok(c);
        }
        let s0_len = sq.strings[0].chars().count();
        let c = if i + s0_len > j || !self.literal_at(&sq.strings[0], i, i + s0_len) {
            0
        } else {
            self.seq_count_from(sq, 0, i + s0_len, j)?
        };
        self.count_memo.insert(key, c);
        Ok(c)
    }

    fn seq_count_from(&mut self, sq: &'a Sequence, k: usize, i: usize, j: usize) -> Result<u64> {
        if k == sq.atoms.len() {
            return Ok(if i == j { 1 } else { 0 });
        }
        let mut total: u64 = 0;
        let sep = &sq.strings[k + 1];
        let sep_len = sep.chars().count();
        for m in i..=j {
            let ca = self.atom_count(&sq.atoms[k], i, m)?;
            if ca == 0 {
                continue;
            }
            if m + sep_len > j || !self.literal_at(sep, m, m + sep_len) {
                continue;
            }
            let rest = self.seq_count_from(sq, k + 1, m + sep_len, j)?;
            total = total.saturating_add(ca.saturating_mul(rest));
        }
        Ok(total)
    }

    fn atom_count(&mut self, atom: &'a Atom, i: usize, j: usize) -> Result<u64> {
        let key = (atom as *const Atom as usize, i, j);
        if let Some(&c) = self.count_memo.get(&key) {
            return Ok(c);
        }
        let c = match &atom.kind {
            AtomKind::Star(_) => {
                if self.dnf_member_span(&atom.body, i, i)? && i != j {
                    return Err(Error::AmbiguousParse {
                        input: String::new(),
                        count: 2,
                    });
                }
                if i == j {
                    1
                } else {
                    let mut total: u64 = 0;
                    for m in (i + 1)..=j {
                        let head = self.dnf_count_span(&atom.body, i, m)?;
                        if head == 0 {
                            continue;
                        }
                        let tail = self.atom_count(atom, m, j)?;
                        total = total.saturating_add(head.saturating_mul(tail));
                    }
                    total
                }
            }
            AtomKind::Closed(_) | AtomKind::Group => self.dnf_count_span(&atom.body, i, j)?,
        };
        self.count_memo.insert(key, c);
        Ok(c)
    }

    fn dnf_count_span(&mut self, d: &'a DnfRegex, i: usize, j: usize) -> Result<u64> {
        let mut total: u64 = 0;
        for (sq, _) in &d.branches {
            total = total.saturating_add(self.seq_count(sq, i, j)?);
        }
        Ok(total)
    }

    /// Extraction assuming the parse over this span is unique.
    fn extract_seq(&mut self, sq: &'a Sequence, i: usize, j: usize) -> Result<Vec<AtomMatch>> {
        let s0_len = sq.strings[0].chars().count();
        let mut out = Vec::with_capacity(sq.atoms.len());
        self.extract_seq_from(sq, 0, i + s0_len, j, &mut out)?;
        Ok(out)
    }

    fn extract_seq_from(
        &mut self,
        sq: &'a Sequence,
        k: usize,
        i: usize,
        j: usize,
        out: &mut Vec<AtomMatch>,
    ) -> Result<()> {
        if k == sq.atoms.len() {
            return Ok(());
        }
        let sep = &sq.strings[k + 1];
        let sep_len = sep.chars().count();
        for m in i..=j {
            if self.atom_count(&sq.atoms[k], i, m)? == 0 {
                continue;
            }
            if m + sep_len > j || !self.literal_at(sep, m, m + sep_len) {
                continue;
            }
            if self.seq_count_from(sq, k + 1, m + sep_len, j)? == 0 {
                continue;
            }
            out.push(self.extract_atom(&sq.atoms[k], i, m)?);
            return self.extract_seq_from(sq, k + 1, m + sep_len, j, out);
        }
        Err(Error::NoParse)
    }

    fn extract_atom(&mut self, atom: &'a Atom, i: usize, j: usize) -> Result<AtomMatch> {
        let text: String = self.chars[i..j].iter().collect();
        let iterations = match &atom.kind {
            AtomKind::Star(_) => {
                let mut iters = Vec::new();
                let mut pos = i;
                while pos < j {
                    let mut advanced = false;
                    for m in (pos + 1)..=j {
                        if self.dnf_count_span(&atom.body, pos, m)? > 0
                            && self.atom_count(atom, m, j)? > 0
                        {
                            iters.push(self.chars[pos..m].iter().collect());
                            pos = m;
                            advanced = true;
                            break;
                        }
                    }
                    if !advanced {
                        return Err(Error::NoParse);
                    }
                }
                Some(iters)
            }
            AtomKind::Closed(_) | AtomKind::Group => None,
        };
        Ok(AtomMatch { text, iterations })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sre::{probability, to_stochastic};

    fn env() -> DefEnv {
        DefEnv::new()
    }

    fn half() -> Prob {
        Prob::from_ratio(1, 2)
    }

    #[test]
    fn concat_seq_examples() {
        let a = Sequence::constant("a");
        let b = Sequence::constant("b");
        assert_eq!(a.concat(&b), Sequence::constant("ab"));

        let star = Atom::star(DnfRegex::singleton(Sequence::constant("a")), Prob::from_ratio(4, 5));
        let with_atom = Sequence::new(vec!["".into(), "".into()], vec![star.clone()]);
        let x = Sequence::constant("x");
        assert_eq!(
            with_atom.concat(&x),
            Sequence::new(vec!["".into(), "x".into()], vec![star.clone()])
        );

        let pq = Sequence::new(vec!["p".into(), "q".into()], vec![star.clone()]);
        let rs = Sequence::new(vec!["r".into(), "s".into()], vec![star.clone()]);
        assert_eq!(
            pq.concat(&rs),
            Sequence::new(
                vec!["p".into(), "qr".into(), "s".into()],
                vec![star.clone(), star]
            )
        );
    }

    #[test]
    fn concat_dnf_examples() {
        let a = DnfRegex::singleton(Sequence::constant("a"));
        let b = DnfRegex::singleton(Sequence::constant("b"));
        assert_eq!(
            concat_dnf(&a, &b),
            DnfRegex::singleton(Sequence::constant("ab"))
        );

        let ab = or_dnf(&a, &b, &half());
        let c = DnfRegex::singleton(Sequence::constant("c"));
        let got = concat_dnf(&ab, &c);
        assert_eq!(
            got,
            DnfRegex::from_branches(vec![
                (Sequence::constant("ac"), half()),
                (Sequence::constant("bc"), half()),
            ])
        );

        assert_eq!(concat_dnf(&a, &DnfRegex::empty()), DnfRegex::empty());
    }

    #[test]
    fn or_dnf_examples() {
        let a = DnfRegex::singleton(Sequence::constant("a"));
        let b = DnfRegex::singleton(Sequence::constant("b"));
        let third = Prob::from_ratio(1, 3);
        assert_eq!(
            or_dnf(&a, &b, &third),
            DnfRegex::from_branches(vec![
                (Sequence::constant("a"), third.clone()),
                (Sequence::constant("b"), Prob::from_ratio(2, 3)),
            ])
        );

        // Union with the empty language leaves a mass deficit that callers
        // must reject.
        let partial = or_dnf(&DnfRegex::empty(), &a, &Prob::from_ratio(1, 4));
        assert_eq!(partial.total_mass(), crate::rational::rat(3, 4));

        // No merging of duplicate branches.
        let doubled = or_dnf(&a, &a, &half());
        assert_eq!(doubled.branches.len(), 2);
    }

    #[test]
    fn to_dnf_examples() {
        let e = env();
        let s = Sre::or(Sre::lit("a"), Sre::lit("b"), half());
        assert_eq!(
            to_dnf(&s, &e).unwrap(),
            DnfRegex::from_branches(vec![
                (Sequence::constant("a"), half()),
                (Sequence::constant("b"), half()),
            ])
        );

        let s2 = Sre::concat(
            Sre::lit("a"),
            Sre::or(Sre::lit("b"), Sre::lit("c"), Prob::from_ratio(1, 3)),
        );
        assert_eq!(
            to_dnf(&s2, &e).unwrap(),
            DnfRegex::from_branches(vec![
                (Sequence::constant("ab"), Prob::from_ratio(1, 3)),
                (Sequence::constant("ac"), Prob::from_ratio(2, 3)),
            ])
        );

        let star = Sre::star(Sre::lit("a"), Prob::from_ratio(4, 5));
        let d = to_dnf(&star, &e).unwrap();
        assert_eq!(
            d,
            atom_to_dnf(Atom::star(
                DnfRegex::singleton(Sequence::constant("a")),
                Prob::from_ratio(4, 5)
            ))
        );
    }

    #[test]
    fn probability_transport() {
        let e = env();
        let samples = [
            Sre::or(Sre::lit("a"), Sre::lit("b"), half()),
            Sre::star(Sre::lit("a"), Prob::from_ratio(4, 5)),
            Sre::concat(
                Sre::or(Sre::lit("x"), Sre::lit("yy"), Prob::from_ratio(1, 3)),
                Sre::star(Sre::lit("z"), half()),
            ),
        ];
        for s in &samples {
            let d = to_dnf(s, &e).unwrap();
            for w in s.strip().enumerate(&e, 5).unwrap() {
                assert_eq!(
                    dnf_probability(&d, &w).unwrap(),
                    probability(s, &w, &e).unwrap(),
                    "string {w:?} of {s}"
                );
            }
        }
    }

    #[test]
    fn entropy_transport() {
        let e = env();
        let s = Sre::concat(
            Sre::or(Sre::lit("x"), Sre::lit("yy"), Prob::from_ratio(1, 3)),
            Sre::star(Sre::lit("z"), half()),
        );
        let d = to_dnf(&s, &e).unwrap();
        let hs = crate::sre::entropy(&s, &e).unwrap();
        let hd = dnf_entropy(&d).unwrap();
        assert!((hs - hd).abs() < 1e-9, "{hs} vs {hd}");

        let simple = DnfRegex::from_branches(vec![
            (Sequence::constant("a"), half()),
            (Sequence::constant("b"), half()),
        ]);
        assert!((dnf_entropy(&simple).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(
            dnf_entropy(&DnfRegex::singleton(Sequence::constant("const"))).unwrap(),
            0.0
        );
        let star = to_dnf(&Sre::star(Sre::lit("a"), Prob::from_ratio(4, 5)), &e).unwrap();
        assert!((dnf_entropy(&star).unwrap() - 3.609640).abs() < 1e-5);
    }

    #[test]
    fn canonical_quotient() {
        // Rewrites by associativity/commutativity/distributivity do not
        // change the normal form.
        let e = env();
        let a = Sre::lit("a");
        let b = Sre::lit("bb");
        let c = Sre::lit("c");
        let s1 = Sre::or(
            Sre::or(a.clone(), b.clone(), half()),
            c.clone(),
            Prob::from_ratio(2, 3),
        );
        let s2 = crate::sre::apply_rewrite(
            &s1,
            &crate::sre::RewriteStep::forward(crate::sre::RewriteRule::OrAssoc, vec![]),
        )
        .unwrap();
        assert_eq!(to_dnf(&s1, &e).unwrap(), to_dnf(&s2, &e).unwrap());

        let t1 = Sre::concat(a.clone(), Sre::or(b.clone(), c.clone(), half()));
        let t2 = crate::sre::apply_rewrite(
            &t1,
            &crate::sre::RewriteStep::forward(crate::sre::RewriteRule::DistR, vec![]),
        )
        .unwrap();
        assert_eq!(to_dnf(&t1, &e).unwrap(), to_dnf(&t2, &e).unwrap());
    }

    #[test]
    fn parse_examples() {
        let e = env();
        let d = DnfRegex::from_branches(vec![
            (Sequence::constant("a"), half()),
            (Sequence::constant("b"), half()),
        ]);
        let p = dnf_parse(&d, "b").unwrap();
        assert_eq!(p.branch, 1);
        assert!(p.atoms.is_empty());

        let star = to_dnf(&Sre::star(Sre::lit("a"), Prob::from_ratio(4, 5)), &e).unwrap();
        let p2 = dnf_parse(&star, "aa").unwrap();
        assert_eq!(p2.branch, 0);
        assert_eq!(
            p2.atoms[0].iterations,
            Some(vec!["a".to_string(), "a".to_string()])
        );

        assert_eq!(dnf_parse(&d, "c"), Err(Error::NoParse));
    }

    #[test]
    fn uniform_default_probabilities() {
        let e = env();
        let r = Regex::or(
            Regex::or(Regex::lit("a"), Regex::lit("b")),
            Regex::concat(Regex::lit("c"), Regex::or(Regex::lit("d"), Regex::lit("e"))),
        );
        let s = to_stochastic(&r, &e).unwrap();
        let d = to_dnf(&s, &e).unwrap();
        let n = d.branches.len();
        for (_, p) in &d.branches {
            assert_eq!(
                p.value().clone(),
                Rat::new(1.into(), (n as i64).into()),
                "sequence probabilities must be uniform"
            );
        }
    }

    #[test]
    fn relevance_grouping() {
        let e = env();
        // Multi-branch body becomes one group atom; entropy collapses to 0
        // under skip at both levels.
        let s = Sre::skip(Sre::or(Sre::lit("a"), Sre::lit("b"), half()));
        let d = to_dnf(&s, &e).unwrap();
        assert_eq!(d.branches.len(), 1);
        assert_eq!(d.branches[0].0.atoms.len(), 1);
        assert_eq!(dnf_entropy(&d).unwrap(), 0.0);
        assert_eq!(
            dnf_entropy(&d).unwrap(),
            crate::sre::entropy(&s, &e).unwrap()
        );
        // Membership is unchanged.
        assert!(dnf_member(&d, "a").unwrap());
        assert!(dnf_member(&d, "b").unwrap());
        assert!(!dnf_member(&d, "c").unwrap());
    }
}

/// Membership in a single atom's language.
pub fn atom_member(a: &Atom, w: &str) -> Result<bool> {
    dnf_member(&atom_to_dnf(a.clone()), w)
}
