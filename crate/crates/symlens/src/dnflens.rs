//! Composition-free normal-form lenses: the synthesis target.
//!
//! A normal-form lens mirrors the shape of the DNF expressions it relates:
//! a union of sequence lenses with create-dispatch tables, a sequence lens
//! is a partial matching of atoms with defaults for the unmatched ones, and
//! an atom lens iterates a normal-form lens, reuses a library lens between
//! closed atoms, or connects equal closed atoms by name.

use crate::dnf::{atom_member, dnf_parse, Atom, AtomKind, AtomMatch, DnfRegex, Sequence};
use crate::env::DefEnv;
use crate::error::{Error, Result};
use crate::lens::{Interval, Lens, TypedLens};
use crate::regex::Regex;
use crate::sre::Relevance;
use std::sync::Arc;

#[derive(Clone, Debug)]
pub enum AtomLens {
    /// Iterates a normal-form lens between two star atoms.
    IterateDnf(Box<DnfLens>),
    /// Applies a normal-form lens once between two relevance-group atoms.
    GroupDnf(Box<DnfLens>),
    /// Connects two closed atoms carrying the same name.
    ClosedId(String),
    /// Reuses a library lens between closed atoms of the declared type.
    ClosedLib {
        name: String,
        src_name: String,
        tgt_name: String,
        lens: Arc<TypedLens>,
        h_left: Interval,
        h_right: Interval,
    },
}

#[derive(Clone, Debug)]
pub struct AtomMapping {
    pub left: usize,
    pub right: usize,
    pub lens: AtomLens,
}

#[derive(Clone, Debug)]
pub struct SeqLens {
    pub mappings: Vec<AtomMapping>,
    /// Unmapped left atoms with their restore defaults.
    pub left_unmapped: Vec<(usize, String)>,
    pub right_unmapped: Vec<(usize, String)>,
}

#[derive(Clone, Debug)]
pub struct SeqMapping {
    pub left: usize,
    pub right: usize,
    pub lens: SeqLens,
}

#[derive(Clone, Debug)]
pub struct DnfLens {
    pub mappings: Vec<SeqMapping>,
    /// For each left sequence, the mapping used by creates and unmatched puts.
    pub create_r_table: Vec<usize>,
    /// For each right sequence, dually.
    pub create_l_table: Vec<usize>,
}

pub fn typecheck_dnf(dl: &DnfLens, src: &DnfRegex, tgt: &DnfRegex, env: &DefEnv) -> Result<()> {
    for m in &dl.mappings {
        let sq = &src
            .branches
            .get(m.left)
            .ok_or_else(|| Error::InvalidDnfLens(format!("no left sequence {}", m.left)))?
            .0;
        let tq = &tgt
            .branches
            .get(m.right)
            .ok_or_else(|| Error::InvalidDnfLens(format!("no right sequence {}", m.right)))?
            .0;
        typecheck_seq(&m.lens, sq, tq, env)?;
    }
    if dl.create_r_table.len() != src.branches.len() {
        return Err(Error::CreateTableGap {
            side: "left",
            index: dl.create_r_table.len(),
        });
    }
    if dl.create_l_table.len() != tgt.branches.len() {
        return Err(Error::CreateTableGap {
            side: "right",
            index: dl.create_l_table.len(),
        });
    }
    for (k, &mi) in dl.create_r_table.iter().enumerate() {
        if dl.mappings.get(mi).map(|m| m.left) != Some(k) {
            return Err(Error::CreateTableGap {
                side: "left",
                index: k,
            });
        }
    }
    for (k, &mi) in dl.create_l_table.iter().enumerate() {
        if dl.mappings.get(mi).map(|m| m.right) != Some(k) {
            return Err(Error::CreateTableGap {
                side: "right",
                index: k,
            });
        }
    }
    Ok(())
}

pub fn typecheck_seq(sl: &SeqLens, sq: &Sequence, tq: &Sequence, env: &DefEnv) -> Result<()> {
    let mut left_seen = vec![false; sq.atoms.len()];
    let mut right_seen = vec![false; tq.atoms.len()];
    for m in &sl.mappings {
        let a = sq
            .atoms
            .get(m.left)
            .ok_or_else(|| Error::InvalidDnfLens(format!("no left atom {}", m.left)))?;
        let b = tq
            .atoms
            .get(m.right)
            .ok_or_else(|| Error::InvalidDnfLens(format!("no right atom {}", m.right)))?;
        if left_seen[m.left] || right_seen[m.right] {
            return Err(Error::InvalidDnfLens(
                "an atom is mapped by more than one atom lens".into(),
            ));
        }
        left_seen[m.left] = true;
        right_seen[m.right] = true;
        typecheck_atom(&m.lens, a, b, env)?;
    }
    for (idx, default) in &sl.left_unmapped {
        let a = sq
            .atoms
            .get(*idx)
            .ok_or_else(|| Error::InvalidDnfLens(format!("no left atom {idx}")))?;
        if left_seen[*idx] {
            return Err(Error::InvalidDnfLens(format!(
                "left atom {idx} both mapped and defaulted"
            )));
        }
        left_seen[*idx] = true;
        if !atom_member(a, default)? {
            return Err(Error::DefaultNotInLanguage(default.clone()));
        }
    }
    for (idx, default) in &sl.right_unmapped {
        let b = tq
            .atoms
            .get(*idx)
            .ok_or_else(|| Error::InvalidDnfLens(format!("no right atom {idx}")))?;
        if right_seen[*idx] {
            return Err(Error::InvalidDnfLens(format!(
                "right atom {idx} both mapped and defaulted"
            )));
        }
        right_seen[*idx] = true;
        if !atom_member(b, default)? {
            return Err(Error::DefaultNotInLanguage(default.clone()));
        }
    }
    if let Some(i) = left_seen.iter().position(|&b| !b) {
        return Err(Error::InvalidDnfLens(format!("left atom {i} uncovered")));
    }
    if let Some(j) = right_seen.iter().position(|&b| !b) {
        return Err(Error::InvalidDnfLens(format!("right atom {j} uncovered")));
    }
    Ok(())
}

fn typecheck_atom(al: &AtomLens, a: &Atom, b: &Atom, env: &DefEnv) -> Result<()> {
    match al {
        AtomLens::ClosedId(n) => {
            let ok = matches!(&a.kind, AtomKind::Closed(x) if x == n)
                && matches!(&b.kind, AtomKind::Closed(x) if x == n);
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidDnfLens(format!(
                    "closed-identity lens `{n}` over non-matching atoms"
                )))
            }
        }
        AtomLens::ClosedLib {
            src_name, tgt_name, ..
        } => {
            let ok = matches!(&a.kind, AtomKind::Closed(x) if x == src_name)
                && matches!(&b.kind, AtomKind::Closed(x) if x == tgt_name);
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidDnfLens(
                    "library lens type does not match the closed atoms".into(),
                ))
            }
        }
        AtomLens::IterateDnf(dl) => match (&a.kind, &b.kind) {
            (AtomKind::Star(_), AtomKind::Star(_)) => typecheck_dnf(dl, &a.body, &b.body, env),
            _ => Err(Error::InvalidDnfLens(
                "iteration lens over non-star atoms".into(),
            )),
        },
        AtomLens::GroupDnf(dl) => match (&a.kind, &b.kind) {
            (AtomKind::Group, AtomKind::Group) => typecheck_dnf(dl, &a.body, &b.body, env),
            _ => Err(Error::InvalidDnfLens(
                "group lens over non-group atoms".into(),
            )),
        },
    }
}

/// The four evaluators over a normal-form lens at a fixed pair of DNF types.
pub struct DnfEvaluator<'a> {
    pub dl: &'a DnfLens,
    pub src: &'a DnfRegex,
    pub tgt: &'a DnfRegex,
    pub env: &'a DefEnv,
}

impl<'a> DnfEvaluator<'a> {
    pub fn new(
        dl: &'a DnfLens,
        src: &'a DnfRegex,
        tgt: &'a DnfRegex,
        env: &'a DefEnv,
    ) -> DnfEvaluator<'a> {
        DnfEvaluator { dl, src, tgt, env }
    }

    pub fn create_r(&self, s: &str) -> Result<String> {
        let p = dnf_parse(self.src, s)?;
        let m = &self.dl.mappings[self.dl.create_r_table[p.branch]];
        let sq = &self.src.branches[m.left].0;
        let tq = &self.tgt.branches[m.right].0;
        seq_create_r(&m.lens, sq, tq, &p.atoms, self.env)
    }

    pub fn create_l(&self, t: &str) -> Result<String> {
        let p = dnf_parse(self.tgt, t)?;
        let m = &self.dl.mappings[self.dl.create_l_table[p.branch]];
        let sq = &self.src.branches[m.left].0;
        let tq = &self.tgt.branches[m.right].0;
        seq_create_l(&m.lens, sq, tq, &p.atoms, self.env)
    }

    pub fn put_r(&self, s: &str, t_old: &str) -> Result<String> {
        let ps = dnf_parse(self.src, s)?;
        let pt = dnf_parse(self.tgt, t_old)?;
        match self
            .dl
            .mappings
            .iter()
            .find(|m| m.left == ps.branch && m.right == pt.branch)
        {
            Some(m) => {
                let sq = &self.src.branches[m.left].0;
                let tq = &self.tgt.branches[m.right].0;
                seq_put_r(&m.lens, sq, tq, &ps.atoms, &pt.atoms, self.env)
            }
            None => self.create_r(s),
        }
    }

    pub fn put_l(&self, t: &str, s_old: &str) -> Result<String> {
        let pt = dnf_parse(self.tgt, t)?;
        let ps = dnf_parse(self.src, s_old)?;
        match self
            .dl
            .mappings
            .iter()
            .find(|m| m.left == ps.branch && m.right == pt.branch)
        {
            Some(m) => {
                let sq = &self.src.branches[m.left].0;
                let tq = &self.tgt.branches[m.right].0;
                seq_put_l(&m.lens, sq, tq, &pt.atoms, &ps.atoms, self.env)
            }
            None => self.create_l(t),
        }
    }
}

fn assemble(strings: &[String], parts: Vec<String>) -> String {
    let mut out = String::new();
    for (i, s) in strings.iter().enumerate() {
        out.push_str(s);
        if let Some(p) = parts.get(i) {
            out.push_str(p);
        }
    }
    out
}

fn seq_create_r(
    sl: &SeqLens,
    sq: &Sequence,
    tq: &Sequence,
    sm: &[AtomMatch],
    env: &DefEnv,
) -> Result<String> {
    let mut parts = vec![String::new(); tq.atoms.len()];
    for m in &sl.mappings {
        parts[m.right] = atom_create_r(
            &m.lens,
            &sq.atoms[m.left],
            &tq.atoms[m.right],
            &sm[m.left],
            env,
        )?;
    }
    for (idx, default) in &sl.right_unmapped {
        parts[*idx] = default.clone();
    }
    Ok(assemble(&tq.strings, parts))
}

fn seq_create_l(
    sl: &SeqLens,
    sq: &Sequence,
    tq: &Sequence,
    tm: &[AtomMatch],
    env: &DefEnv,
) -> Result<String> {
    let mut parts = vec![String::new(); sq.atoms.len()];
    for m in &sl.mappings {
        parts[m.left] = atom_create_l(
            &m.lens,
            &sq.atoms[m.left],
            &tq.atoms[m.right],
            &tm[m.right],
            env,
        )?;
    }
    for (idx, default) in &sl.left_unmapped {
        parts[*idx] = default.clone();
    }
    Ok(assemble(&sq.strings, parts))
}

fn seq_put_r(
    sl: &SeqLens,
    sq: &Sequence,
    tq: &Sequence,
    sm: &[AtomMatch],
    tm: &[AtomMatch],
    env: &DefEnv,
) -> Result<String> {
    // Unmapped target atoms keep their old contents.
    let mut parts: Vec<String> = tm.iter().map(|m| m.text.clone()).collect();
    for m in &sl.mappings {
        parts[m.right] = atom_put_r(
            &m.lens,
            &sq.atoms[m.left],
            &tq.atoms[m.right],
            &sm[m.left],
            &tm[m.right],
            env,
        )?;
    }
    Ok(assemble(&tq.strings, parts))
}

fn seq_put_l(
    sl: &SeqLens,
    sq: &Sequence,
    tq: &Sequence,
    tm: &[AtomMatch],
    sm: &[AtomMatch],
    env: &DefEnv,
) -> Result<String> {
    let mut parts: Vec<String> = sm.iter().map(|m| m.text.clone()).collect();
    for m in &sl.mappings {
        parts[m.left] = atom_put_l(
            &m.lens,
            &sq.atoms[m.left],
            &tq.atoms[m.right],
            &tm[m.right],
            &sm[m.left],
            env,
        )?;
    }
    Ok(assemble(&sq.strings, parts))
}

fn iterations<'m>(m: &'m AtomMatch) -> Result<&'m [String]> {
    m.iterations
        .as_deref()
        .ok_or_else(|| Error::InvalidDnfLens("star atom match without iterations".into()))
}

pub(crate) fn atom_create_r(
    al: &AtomLens,
    a: &Atom,
    b: &Atom,
    sm: &AtomMatch,
    env: &DefEnv,
) -> Result<String> {
    match al {
        AtomLens::ClosedId(_) => Ok(sm.text.clone()),
        AtomLens::ClosedLib { lens, .. } => lens.create_r(&sm.text, env),
        AtomLens::GroupDnf(dl) => {
            DnfEvaluator::new(dl, &a.body, &b.body, env).create_r(&sm.text)
        }
        AtomLens::IterateDnf(dl) => {
            let ev = DnfEvaluator::new(dl, &a.body, &b.body, env);
            let mut out = String::new();
            for it in iterations(sm)? {
                out.push_str(&ev.create_r(it)?);
            }
            Ok(out)
        }
    }
}

pub(crate) fn atom_create_l(
    al: &AtomLens,
    a: &Atom,
    b: &Atom,
    tm: &AtomMatch,
    env: &DefEnv,
) -> Result<String> {
    match al {
        AtomLens::ClosedId(_) => Ok(tm.text.clone()),
        AtomLens::ClosedLib { lens, .. } => lens.create_l(&tm.text, env),
        AtomLens::GroupDnf(dl) => {
            DnfEvaluator::new(dl, &a.body, &b.body, env).create_l(&tm.text)
        }
        AtomLens::IterateDnf(dl) => {
            let ev = DnfEvaluator::new(dl, &a.body, &b.body, env);
            let mut out = String::new();
            for it in iterations(tm)? {
                out.push_str(&ev.create_l(it)?);
            }
            Ok(out)
        }
    }
}

pub(crate) fn atom_put_r(
    al: &AtomLens,
    a: &Atom,
    b: &Atom,
    sm: &AtomMatch,
    tm: &AtomMatch,
    env: &DefEnv,
) -> Result<String> {
    match al {
        AtomLens::ClosedId(_) => Ok(sm.text.clone()),
        AtomLens::ClosedLib { lens, .. } => lens.put_r(&sm.text, &tm.text, env),
        AtomLens::GroupDnf(dl) => {
            DnfEvaluator::new(dl, &a.body, &b.body, env).put_r(&sm.text, &tm.text)
        }
        AtomLens::IterateDnf(dl) => {
            let ev = DnfEvaluator::new(dl, &a.body, &b.body, env);
            let ss = iterations(sm)?;
            let ts = iterations(tm)?;
            let mut out = String::new();
            for (i, si) in ss.iter().enumerate() {
                match ts.get(i) {
                    Some(ti) => out.push_str(&ev.put_r(si, ti)?),
                    None => out.push_str(&ev.create_r(si)?),
                }
            }
            Ok(out)
        }
    }
}

pub(crate) fn atom_put_l(
    al: &AtomLens,
    a: &Atom,
    b: &Atom,
    tm: &AtomMatch,
    sm: &AtomMatch,
    env: &DefEnv,
) -> Result<String> {
    match al {
        AtomLens::ClosedId(_) => Ok(tm.text.clone()),
        AtomLens::ClosedLib { lens, .. } => lens.put_l(&tm.text, &sm.text, env),
        AtomLens::GroupDnf(dl) => {
            DnfEvaluator::new(dl, &a.body, &b.body, env).put_l(&tm.text, &sm.text)
        }
        AtomLens::IterateDnf(dl) => {
            let ev = DnfEvaluator::new(dl, &a.body, &b.body, env);
            let ts = iterations(tm)?;
            let ss = iterations(sm)?;
            let mut out = String::new();
            for (i, ti) in ts.iter().enumerate() {
                match ss.get(i) {
                    Some(si) => out.push_str(&ev.put_l(ti, si)?),
                    None => out.push_str(&ev.create_l(ti)?),
                }
            }
            Ok(out)
        }
    }
}

fn relevance_adjust(base: Interval, rel: Relevance) -> Interval {
    match rel {
        Relevance::None => base,
        Relevance::Skip => Interval::zero(),
        Relevance::Require => {
            if base.hi == 0.0 {
                Interval::zero()
            } else {
                Interval::infinite()
            }
        }
    }
}

fn disconnect_cost(atom: &Atom) -> Interval {
    match atom.relevance {
        Relevance::Skip => Interval::zero(),
        Relevance::Require => {
            if atom.raw_entropy() > 1e-12 {
                Interval::infinite()
            } else {
                Interval::zero()
            }
        }
        Relevance::None => Interval::point(atom.raw_entropy()),
    }
}

pub fn atom_h_right(al: &AtomLens, a: &Atom, b: &Atom) -> Interval {
    let base = match al {
        AtomLens::ClosedId(_) => Interval::zero(),
        AtomLens::ClosedLib { h_right, .. } => *h_right,
        AtomLens::GroupDnf(dl) => dnf_h_right(dl, &a.body, &b.body),
        AtomLens::IterateDnf(dl) => {
            let p = match &a.kind {
                AtomKind::Star(p) => p.to_f64(),
                _ => 0.0,
            };
            dnf_h_right(dl, &a.body, &b.body).scale(p / (1.0 - p))
        }
    };
    relevance_adjust(base, b.relevance)
}

pub fn atom_h_left(al: &AtomLens, a: &Atom, b: &Atom) -> Interval {
    let base = match al {
        AtomLens::ClosedId(_) => Interval::zero(),
        AtomLens::ClosedLib { h_left, .. } => *h_left,
        AtomLens::GroupDnf(dl) => dnf_h_left(dl, &a.body, &b.body),
        AtomLens::IterateDnf(dl) => {
            let q = match &b.kind {
                AtomKind::Star(p) => p.to_f64(),
                _ => 0.0,
            };
            dnf_h_left(dl, &a.body, &b.body).scale(q / (1.0 - q))
        }
    };
    relevance_adjust(base, a.relevance)
}

/// Bits to recover the target sequence from a synchronized source string.
pub fn seq_h_right(sl: &SeqLens, sq: &Sequence, tq: &Sequence) -> Interval {
    let mut total = Interval::zero();
    for m in &sl.mappings {
        total = total.add(atom_h_right(&m.lens, &sq.atoms[m.left], &tq.atoms[m.right]));
    }
    for (idx, _) in &sl.right_unmapped {
        total = total.add(disconnect_cost(&tq.atoms[*idx]));
    }
    total
}

pub fn seq_h_left(sl: &SeqLens, sq: &Sequence, tq: &Sequence) -> Interval {
    let mut total = Interval::zero();
    for m in &sl.mappings {
        total = total.add(atom_h_left(&m.lens, &sq.atoms[m.left], &tq.atoms[m.right]));
    }
    for (idx, _) in &sl.left_unmapped {
        total = total.add(disconnect_cost(&sq.atoms[*idx]));
    }
    total
}

/// Bits to recover the right string from the left, mixing over left
/// branches; a left sequence mapped to several targets pays a one-bit
/// branch-choice bound.
pub fn dnf_h_right(dl: &DnfLens, src: &DnfRegex, tgt: &DnfRegex) -> Interval {
    let mut total = Interval::zero();
    for (i, (sq, p)) in src.branches.iter().enumerate() {
        let sharers: Vec<&SeqMapping> = dl.mappings.iter().filter(|m| m.left == i).collect();
        let term = match sharers.len() {
            0 => Interval::zero(),
            1 => {
                let m = sharers[0];
                seq_h_right(&m.lens, sq, &tgt.branches[m.right].0)
            }
            _ => {
                let mut hi = 1.0;
                for m in &sharers {
                    hi += seq_h_right(&m.lens, sq, &tgt.branches[m.right].0).hi;
                }
                Interval { lo: 0.0, hi }
            }
        };
        let pf = p.to_f64();
        if pf > 0.0 {
            total = total.add(term.scale(pf));
        }
    }
    total
}

pub fn dnf_h_left(dl: &DnfLens, src: &DnfRegex, tgt: &DnfRegex) -> Interval {
    let mut total = Interval::zero();
    for (j, (tq, q)) in tgt.branches.iter().enumerate() {
        let sharers: Vec<&SeqMapping> = dl.mappings.iter().filter(|m| m.right == j).collect();
        let term = match sharers.len() {
            0 => Interval::zero(),
            1 => {
                let m = sharers[0];
                seq_h_left(&m.lens, &src.branches[m.left].0, tq)
            }
            _ => {
                let mut hi = 1.0;
                for m in &sharers {
                    hi += seq_h_left(&m.lens, &src.branches[m.left].0, tq).hi;
                }
                Interval { lo: 0.0, hi }
            }
        };
        let qf = q.to_f64();
        if qf > 0.0 {
            total = total.add(term.scale(qf));
        }
    }
    total
}

/// Interval cost of the whole lens: both directions summed.
pub fn dnf_cost(dl: &DnfLens, src: &DnfRegex, tgt: &DnfRegex) -> Interval {
    dnf_h_left(dl, src, tgt).add(dnf_h_right(dl, src, tgt))
}

// ---------------------------------------------------------------------
// Conversion to the surface combinators.

/// One-sided pieces of a sequence: nonempty constants and atoms.
enum Piece {
    Const(String),
    Atom(usize),
}

fn pieces(sq: &Sequence) -> Vec<Piece> {
    let mut out = Vec::new();
    for (i, s) in sq.strings.iter().enumerate() {
        if !s.is_empty() {
            out.push(Piece::Const(s.clone()));
        }
        if i < sq.atoms.len() {
            out.push(Piece::Atom(i));
        }
    }
    out
}

fn atom_regex(a: &Atom) -> Regex {
    a.to_sre().strip()
}

fn left_piece_lens(p: &Piece, sq: &Sequence, sl: &SeqLens) -> Lens {
    match p {
        Piece::Const(s) => Lens::del(s),
        Piece::Atom(x) => {
            let default = sl
                .left_unmapped
                .iter()
                .find(|(i, _)| i == x)
                .map(|(_, d)| d.clone())
                .unwrap_or_default();
            Lens::disconnect(atom_regex(&sq.atoms[*x]), Regex::lit(""), &default, "")
        }
    }
}

fn right_piece_lens(p: &Piece, tq: &Sequence, sl: &SeqLens) -> Lens {
    match p {
        Piece::Const(s) => Lens::ins(s),
        Piece::Atom(y) => {
            let default = sl
                .right_unmapped
                .iter()
                .find(|(i, _)| i == y)
                .map(|(_, d)| d.clone())
                .unwrap_or_default();
            Lens::disconnect(Regex::lit(""), atom_regex(&tq.atoms[*y]), "", &default)
        }
    }
}

fn concat_chain(mut factors: Vec<Lens>) -> Lens {
    match factors.len() {
        0 => Lens::id(Regex::lit("")),
        1 => factors.pop().unwrap(),
        _ => {
            let last = factors.pop().unwrap();
            factors
                .into_iter()
                .rev()
                .fold(last, |acc, f| Lens::concat(f, acc))
        }
    }
}

fn atom_lens_to_surface(al: &AtomLens, a: &Atom, b: &Atom, env: &DefEnv) -> Result<Lens> {
    Ok(match al {
        AtomLens::ClosedId(n) => Lens::id(Regex::reference(n)),
        AtomLens::ClosedLib { name, .. } => Lens::LibRef(name.clone()),
        AtomLens::IterateDnf(dl) => Lens::iterate(to_surface(dl, &a.body, &b.body, env)?),
        AtomLens::GroupDnf(dl) => to_surface(dl, &a.body, &b.body, env)?,
    })
}

/// An anchored pair during sequence realization.
struct Anchor {
    left_pos: usize,
    right_pos: usize,
    lens: Lens,
}

fn seq_to_surface(sl: &SeqLens, sq: &Sequence, tq: &Sequence, env: &DefEnv) -> Result<Lens> {
    let lp = pieces(sq);
    let rp = pieces(tq);
    let mut anchors = Vec::new();
    for m in &sl.mappings {
        let left_pos = lp
            .iter()
            .position(|p| matches!(p, Piece::Atom(x) if *x == m.left))
            .expect("mapped atom is a piece");
        let right_pos = rp
            .iter()
            .position(|p| matches!(p, Piece::Atom(y) if *y == m.right))
            .expect("mapped atom is a piece");
        anchors.push(Anchor {
            left_pos,
            right_pos,
            lens: atom_lens_to_surface(&m.lens, &sq.atoms[m.left], &tq.atoms[m.right], env)?,
        });
    }
    anchors.sort_by_key(|a| a.left_pos);
    build_range(&anchors, 0..lp.len(), 0..rp.len(), &lp, &rp, sq, tq, sl)
}

#[allow(clippy::too_many_arguments)]
fn build_range(
    anchors: &[Anchor],
    lr: std::ops::Range<usize>,
    rr: std::ops::Range<usize>,
    lp: &[Piece],
    rp: &[Piece],
    sq: &Sequence,
    tq: &Sequence,
    sl: &SeqLens,
) -> Result<Lens> {
    let in_range: Vec<&Anchor> = anchors
        .iter()
        .filter(|a| lr.contains(&a.left_pos))
        .collect();
    match in_range.len() {
        0 => {
            let mut factors: Vec<Lens> = lp[lr]
                .iter()
                .map(|p| left_piece_lens(p, sq, sl))
                .collect();
            factors.extend(rp[rr].iter().map(|p| right_piece_lens(p, tq, sl)));
            Ok(concat_chain(factors))
        }
        1 => {
            let a = in_range[0];
            let mut factors = Vec::new();
            for p in &lp[lr.start..a.left_pos] {
                factors.push(left_piece_lens(p, sq, sl));
            }
            for p in &rp[rr.start..a.right_pos] {
                factors.push(right_piece_lens(p, tq, sl));
            }
            factors.push(a.lens.clone());
            for p in &lp[a.left_pos + 1..lr.end] {
                factors.push(left_piece_lens(p, sq, sl));
            }
            for p in &rp[a.right_pos + 1..rr.end] {
                factors.push(right_piece_lens(p, tq, sl));
            }
            Ok(concat_chain(factors))
        }
        k => {
            // Split the anchors (sorted by left position) into a prefix
            // whose right positions form a block strictly before or
            // strictly after the rest: straight split or swap.
            for m in 1..k {
                let (fst, snd) = in_range.split_at(m);
                let fst_max = fst.iter().map(|a| a.right_pos).max().unwrap();
                let fst_min = fst.iter().map(|a| a.right_pos).min().unwrap();
                let snd_max = snd.iter().map(|a| a.right_pos).max().unwrap();
                let snd_min = snd.iter().map(|a| a.right_pos).min().unwrap();
                let lsplit = snd[0].left_pos;
                if fst_max < snd_min {
                    let rsplit = snd_min;
                    let left = build_range(
                        anchors,
                        lr.start..lsplit,
                        rr.start..rsplit,
                        lp,
                        rp,
                        sq,
                        tq,
                        sl,
                    )?;
                    let right =
                        build_range(anchors, lsplit..lr.end, rsplit..rr.end, lp, rp, sq, tq, sl)?;
                    return Ok(Lens::concat(left, right));
                }
                if fst_min > snd_max {
                    // First group's targets sit after the second group's:
                    // swap(first, second) has source s_first . s_second and
                    // target t_second . t_first.
                    let rsplit = fst_min;
                    let first = build_range(
                        anchors,
                        lr.start..lsplit,
                        rsplit..rr.end,
                        lp,
                        rp,
                        sq,
                        tq,
                        sl,
                    )?;
                    let second = build_range(
                        anchors,
                        lsplit..lr.end,
                        rr.start..rsplit,
                        lp,
                        rp,
                        sq,
                        tq,
                        sl,
                    )?;
                    return Ok(Lens::swap(first, second));
                }
            }
            Err(Error::UnrealizableMapping(
                "atom mapping is not a separable permutation".into(),
            ))
        }
    }
}

/// Whether a set of sequence mappings can be realized with union and merge
/// combinators: every connected component must be one-to-one or a star.
pub fn mappings_realizable(mappings: &[(usize, usize)]) -> bool {
    components(mappings).iter().all(|c| {
        let lefts: std::collections::BTreeSet<usize> = c.iter().map(|m| m.0).collect();
        let rights: std::collections::BTreeSet<usize> = c.iter().map(|m| m.1).collect();
        lefts.len() == 1 || rights.len() == 1
    })
}

fn components(mappings: &[(usize, usize)]) -> Vec<Vec<(usize, usize)>> {
    let n = mappings.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let r = find(parent, parent[i]);
            parent[i] = r;
        }
        parent[i]
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if mappings[i].0 == mappings[j].0 || mappings[i].1 == mappings[j].1 {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<(usize, usize)>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(mappings[i]);
    }
    groups.into_values().collect()
}

/// Conversion to a surface lens extensionally equal to the evaluators.
/// Requires every mapping component to be one-to-one or a merge star and
/// every sequence-level atom mapping to be a separable permutation.
pub fn to_surface(dl: &DnfLens, src: &DnfRegex, tgt: &DnfRegex, env: &DefEnv) -> Result<Lens> {
    let pairs: Vec<(usize, usize)> = dl.mappings.iter().map(|m| (m.left, m.right)).collect();
    let comps = components(&pairs);
    let mut comp_lenses: Vec<(usize, Lens)> = Vec::new();
    for comp in comps {
        let lefts: std::collections::BTreeSet<usize> = comp.iter().map(|m| m.0).collect();
        let rights: std::collections::BTreeSet<usize> = comp.iter().map(|m| m.1).collect();
        let min_left = *lefts.iter().next().unwrap();
        let member = |l: usize, r: usize| comp.iter().any(|&(cl, cr)| cl == l && cr == r);
        let mapping_lens = |l: usize, r: usize| -> Result<Lens> {
            let m = dl
                .mappings
                .iter()
                .find(|m| m.left == l && m.right == r)
                .expect("mapping exists");
            seq_to_surface(&m.lens, &src.branches[l].0, &tgt.branches[r].0, env)
        };
        let lens = if comp.len() == 1 {
            let (l, r) = comp[0];
            mapping_lens(l, r)?
        } else if rights.len() == 1 {
            // Merge star on a shared right sequence: the designated
            // create mapping goes first.
            let j = *rights.iter().next().unwrap();
            let designated = dl.mappings[dl.create_l_table[j]].left;
            debug_assert!(member(designated, j));
            let mut order: Vec<usize> = vec![designated];
            order.extend(lefts.iter().copied().filter(|&l| l != designated));
            let mut lenses: Vec<Lens> = order
                .into_iter()
                .map(|l| mapping_lens(l, j))
                .collect::<Result<_>>()?;
            let last = lenses.pop().unwrap();
            lenses
                .into_iter()
                .rev()
                .fold(last, |acc, l| Lens::merge_right(l, acc))
        } else if lefts.len() == 1 {
            let i = *lefts.iter().next().unwrap();
            let designated = dl.mappings[dl.create_r_table[i]].right;
            debug_assert!(member(i, designated));
            let mut order: Vec<usize> = vec![designated];
            order.extend(rights.iter().copied().filter(|&r| r != designated));
            let mut lenses: Vec<Lens> = order
                .into_iter()
                .map(|r| mapping_lens(i, r))
                .collect::<Result<_>>()?;
            let last = lenses.pop().unwrap();
            lenses
                .into_iter()
                .rev()
                .fold(last, |acc, l| Lens::merge_left(l, acc))
        } else {
            return Err(Error::UnrealizableMapping(format!(
                "sequence mapping component {comp:?} connects several sources to several targets"
            )));
        };
        comp_lenses.push((min_left, lens));
    }
    comp_lenses.sort_by_key(|(k, _)| *k);
    let mut lenses: Vec<Lens> = comp_lenses.into_iter().map(|(_, l)| l).collect();
    let last = lenses.pop().expect("at least one mapping");
    Ok(lenses.into_iter().rev().fold(last, |acc, l| Lens::or(l, acc)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dnf::to_dnf;
    use crate::lens::{cost, typecheck, Library};
    use crate::rational::Prob;
    use crate::sre::Sre;

    fn env() -> DefEnv {
        DefEnv::new()
    }

    fn half() -> Prob {
        Prob::from_ratio(1, 2)
    }

    /// "a"|"b" <-> "x"|"y" with branches mapped identically and all atoms
    /// absent: a pure constant relabeling.
    fn const_pair() -> (DnfRegex, DnfRegex, DnfLens) {
        let e = env();
        let src = to_dnf(&Sre::or(Sre::lit("a"), Sre::lit("b"), half()), &e).unwrap();
        let tgt = to_dnf(&Sre::or(Sre::lit("x"), Sre::lit("y"), half()), &e).unwrap();
        let seq = SeqLens {
            mappings: vec![],
            left_unmapped: vec![],
            right_unmapped: vec![],
        };
        let dl = DnfLens {
            mappings: vec![
                SeqMapping {
                    left: 0,
                    right: 0,
                    lens: seq.clone(),
                },
                SeqMapping {
                    left: 1,
                    right: 1,
                    lens: seq,
                },
            ],
            create_r_table: vec![0, 1],
            create_l_table: vec![0, 1],
        };
        (src, tgt, dl)
    }

    #[test]
    fn typecheck_and_eval_bijective_branches() {
        let e = env();
        let (src, tgt, dl) = const_pair();
        typecheck_dnf(&dl, &src, &tgt, &e).unwrap();
        let ev = DnfEvaluator::new(&dl, &src, &tgt, &e);
        assert_eq!(ev.create_r("a").unwrap(), "x");
        assert_eq!(ev.create_r("b").unwrap(), "y");
        assert_eq!(ev.create_l("y").unwrap(), "b");
        assert_eq!(ev.put_r("a", "x").unwrap(), "x");
        // Cross-branch put falls back to a create.
        assert_eq!(ev.put_r("a", "y").unwrap(), "x");
        let c = dnf_cost(&dl, &src, &tgt);
        assert_eq!((c.lo, c.hi), (0.0, 0.0));
    }

    #[test]
    fn create_table_gap_detected() {
        let e = env();
        let (src, tgt, mut dl) = const_pair();
        dl.create_l_table[1] = 0;
        assert!(matches!(
            typecheck_dnf(&dl, &src, &tgt, &e),
            Err(Error::CreateTableGap { side: "right", .. })
        ));
    }

    #[test]
    fn star_iteration_lens() {
        let e = env();
        let src = to_dnf(&Sre::star(Sre::lit("a"), Prob::from_ratio(4, 5)), &e).unwrap();
        let tgt = to_dnf(&Sre::star(Sre::lit("b"), Prob::from_ratio(4, 5)), &e).unwrap();
        // Inner lens between the singleton bodies.
        let inner = DnfLens {
            mappings: vec![SeqMapping {
                left: 0,
                right: 0,
                lens: SeqLens {
                    mappings: vec![],
                    left_unmapped: vec![],
                    right_unmapped: vec![],
                },
            }],
            create_r_table: vec![0],
            create_l_table: vec![0],
        };
        let dl = DnfLens {
            mappings: vec![SeqMapping {
                left: 0,
                right: 0,
                lens: SeqLens {
                    mappings: vec![AtomMapping {
                        left: 0,
                        right: 0,
                        lens: AtomLens::IterateDnf(Box::new(inner)),
                    }],
                    left_unmapped: vec![],
                    right_unmapped: vec![],
                },
            }],
            create_r_table: vec![0],
            create_l_table: vec![0],
        };
        typecheck_dnf(&dl, &src, &tgt, &e).unwrap();
        let ev = DnfEvaluator::new(&dl, &src, &tgt, &e);
        assert_eq!(ev.create_r("aaa").unwrap(), "bbb");
        assert_eq!(ev.put_r("aa", "bbb").unwrap(), "bb");
        assert_eq!(ev.put_l("bbb", "a").unwrap(), "aaa");
        let c = dnf_cost(&dl, &src, &tgt);
        assert_eq!((c.lo, c.hi), (0.0, 0.0));

        // Surface conversion is extensionally equal.
        let surface = to_surface(&dl, &src, &tgt, &e).unwrap();
        let typed = typecheck(&surface, &e, &Library::new()).unwrap();
        for s in ["", "a", "aa", "aaa"] {
            for t in ["", "b", "bb"] {
                assert_eq!(
                    ev.put_r(s, t).unwrap(),
                    typed.put_r(s, t, &e).unwrap(),
                    "putR {s:?} {t:?}"
                );
                assert_eq!(ev.put_l(t, s).unwrap(), typed.put_l(t, s, &e).unwrap());
            }
            assert_eq!(ev.create_r(s).unwrap(), typed.create_r(s, &e).unwrap());
        }
    }

    #[test]
    fn unmapped_atoms_restore_and_default() {
        let e = env();
        // src = "x" A where A iterates "a"; tgt = "y" (atom discarded).
        let src = to_dnf(
            &Sre::concat(
                Sre::lit("x"),
                Sre::star(Sre::lit("a"), Prob::from_ratio(4, 5)),
            ),
            &e,
        )
        .unwrap();
        let tgt = to_dnf(&Sre::lit("y"), &e).unwrap();
        let dl = DnfLens {
            mappings: vec![SeqMapping {
                left: 0,
                right: 0,
                lens: SeqLens {
                    mappings: vec![],
                    left_unmapped: vec![(0, "aa".to_string())],
                    right_unmapped: vec![],
                },
            }],
            create_r_table: vec![0],
            create_l_table: vec![0],
        };
        typecheck_dnf(&dl, &src, &tgt, &e).unwrap();
        let ev = DnfEvaluator::new(&dl, &src, &tgt, &e);
        assert_eq!(ev.create_r("xaaa").unwrap(), "y");
        assert_eq!(ev.create_l("y").unwrap(), "xaa");
        // putL restores the old source atom.
        assert_eq!(ev.put_l("y", "xaaaa").unwrap(), "xaaaa");

        // Cost: the discarded star atom's entropy in the left direction.
        let c = dnf_cost(&dl, &src, &tgt);
        let h_star = src.branches[0].0.atoms[0].raw_entropy();
        assert!((c.hi - h_star).abs() < 1e-9);

        // Fully-disconnected lens cost equals the sum of both entropies,
        // matching the surface disconnect (cross-module oracle).
        let surface = to_surface(&dl, &src, &tgt, &e).unwrap();
        let typed = typecheck(&surface, &e, &Library::new()).unwrap();
        let ssrc = src.to_sre();
        let stgt = tgt.to_sre();
        let sc = cost(&typed, &ssrc, &stgt, &e).unwrap();
        assert!((sc - c.hi).abs() < 1e-9, "dnf {} vs surface {}", c.hi, sc);
    }

    #[test]
    fn swapped_mapping_realized() {
        let e = env();
        // src = A "." B, tgt = B "." A with both atoms mapped across.
        let star = |c: &str| Sre::star(Sre::lit(c), Prob::from_ratio(1, 2));
        let src = to_dnf(
            &Sre::concat(star("a"), Sre::concat(Sre::lit("."), star("b"))),
            &e,
        )
        .unwrap();
        let tgt = to_dnf(
            &Sre::concat(star("b"), Sre::concat(Sre::lit("."), star("a"))),
            &e,
        )
        .unwrap();
        let id_inner = |c: &str| {
            let d = to_dnf(&Sre::lit(c), &e).unwrap();
            let _ = d;
            DnfLens {
                mappings: vec![SeqMapping {
                    left: 0,
                    right: 0,
                    lens: SeqLens {
                        mappings: vec![],
                        left_unmapped: vec![],
                        right_unmapped: vec![],
                    },
                }],
                create_r_table: vec![0],
                create_l_table: vec![0],
            }
        };
        let dl = DnfLens {
            mappings: vec![SeqMapping {
                left: 0,
                right: 0,
                lens: SeqLens {
                    mappings: vec![
                        AtomMapping {
                            left: 0,
                            right: 1,
                            lens: AtomLens::IterateDnf(Box::new(id_inner("a"))),
                        },
                        AtomMapping {
                            left: 1,
                            right: 0,
                            lens: AtomLens::IterateDnf(Box::new(id_inner("b"))),
                        },
                    ],
                    left_unmapped: vec![],
                    right_unmapped: vec![],
                },
            }],
            create_r_table: vec![0],
            create_l_table: vec![0],
        };
        typecheck_dnf(&dl, &src, &tgt, &e).unwrap();
        let ev = DnfEvaluator::new(&dl, &src, &tgt, &e);
        assert_eq!(ev.create_r("aa.b").unwrap(), "b.aa");
        let surface = to_surface(&dl, &src, &tgt, &e).unwrap();
        let typed = typecheck(&surface, &e, &Library::new()).unwrap();
        for s in ["aa.b", ".", "a.bb"] {
            assert_eq!(ev.create_r(s).unwrap(), typed.create_r(s, &e).unwrap());
        }
    }

    #[test]
    fn realizability_guard() {
        assert!(mappings_realizable(&[(0, 0), (1, 1)]));
        assert!(mappings_realizable(&[(0, 0), (1, 0), (2, 0)]));
        assert!(mappings_realizable(&[(0, 0), (0, 1)]));
        // Two sources sharing two targets cannot become union/merge trees.
        assert!(!mappings_realizable(&[(0, 0), (0, 1), (1, 1)]));
    }
}
