//! The synthesis engine.
//!
//! An outer loop walks pairs of rewrite-equivalent stochastic expressions
//! in priority order (fewest rewrites first, star unrollings and closed-
//! reference openings as the moves), and for each pair a greedy search
//! assembles a normal-form lens between the DNF forms: cheapest sequence
//! lenses first, cheapest atom lenses inside them, connecting components
//! only when that transfers information more cheaply than disconnecting
//! them. Examples pin branch pairs and veto inconsistent atom lenses;
//! `require` annotations force connections and `skip` annotations make
//! discarding free.

use crate::dnf::{dnf_entropy, dnf_parse, to_dnf, Atom, AtomKind, AtomMatch, DnfRegex, Sequence};
use crate::dnflens::{
    atom_h_left, atom_h_right, atom_put_l, atom_put_r, dnf_h_left, dnf_h_right,
    mappings_realizable, seq_h_left, seq_h_right, AtomLens, AtomMapping, DnfEvaluator, DnfLens,
    SeqLens, SeqMapping,
};
use crate::env::DefEnv;
use crate::error::{Error, Result};
use crate::lens::{self, Interval, Lens, Library, LibraryEntry, TypedLens};
use crate::regex::{cmp_len_lex, Regex};
use crate::sre::{unroll_neighbors, Relevance, Sre};
use crate::syntax::CostAnnotation;
use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::sync::Arc;
use std::time::{Duration, Instant};

#[derive(Clone, Debug)]
pub struct SynthLimits {
    pub max_expansions: usize,
    pub wall_clock: Duration,
    pub rng_seed: u64,
}

impl Default for SynthLimits {
    fn default() -> Self {
        SynthLimits {
            max_expansions: 20_000,
            wall_clock: Duration::from_secs(30),
            rng_seed: 0,
        }
    }
}

/// Search mode. `FirstLens` returns the first satisfying lens found and is
/// a test configuration, not a shipped feature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SearchMode {
    #[default]
    CostRanked,
    FirstLens,
}

#[derive(Clone, Debug)]
pub struct SynthTask<'a> {
    pub src: Sre,
    pub tgt: Sre,
    pub examples: Vec<(String, String)>,
    pub env: &'a DefEnv,
    pub library: &'a Library,
    pub limits: SynthLimits,
    pub mode: SearchMode,
    pub verbose: bool,
}

impl<'a> SynthTask<'a> {
    pub fn new(src: Sre, tgt: Sre, env: &'a DefEnv, library: &'a Library) -> SynthTask<'a> {
        SynthTask {
            src,
            tgt,
            examples: Vec::new(),
            env,
            library,
            limits: SynthLimits::default(),
            mode: SearchMode::default(),
            verbose: false,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct SynthStats {
    pub pops: usize,
    pub continue_checks: usize,
    pub max_distance: usize,
    pub timed_out: bool,
}

#[derive(Clone, Debug)]
pub struct SynthResult {
    pub lens: Lens,
    pub typed: TypedLens,
    pub cost: f64,
    pub distance: usize,
    pub dnf_lens: DnfLens,
    pub src_dnf: DnfRegex,
    pub tgt_dnf: DnfRegex,
    pub stats: SynthStats,
}

/// Priority queue of expression pairs, deduplicated by canonical normal
/// forms, popping in ascending rewrite distance and insertion order within
/// a distance.
pub struct Frontier {
    queue: BTreeMap<(usize, u64), (Sre, Sre, DnfRegex, DnfRegex)>,
    by_distance: BTreeMap<usize, usize>,
    seen: HashSet<(DnfRegex, DnfRegex)>,
    seq: u64,
}

impl Frontier {
    pub fn new() -> Frontier {
        Frontier {
            queue: BTreeMap::new(),
            by_distance: BTreeMap::new(),
            seen: HashSet::new(),
            seq: 0,
        }
    }

    /// Pushes a pair after forcing one-sided openings; duplicates (by
    /// canonical form) are dropped.
    pub fn push(&mut self, src: Sre, tgt: Sre, distance: usize, env: &DefEnv) {
        let (src, tgt) = force_open_fixpoint(src, tgt, env);
        let (ds, dt) = match (to_dnf(&src, env), to_dnf(&tgt, env)) {
            (Ok(a), Ok(b)) => (a, b),
            _ => return,
        };
        if !self.seen.insert((ds.clone(), dt.clone())) {
            return;
        }
        self.queue
            .insert((distance, self.seq), (src, tgt, ds, dt));
        *self.by_distance.entry(distance).or_insert(0) += 1;
        self.seq += 1;
    }

    pub fn pop(&mut self) -> Option<(usize, Sre, Sre, DnfRegex, DnfRegex)> {
        let (&(distance, seq), _) = self.queue.iter().next()?;
        let (src, tgt, ds, dt) = self.queue.remove(&(distance, seq)).unwrap();
        let cnt = self.by_distance.get_mut(&distance).unwrap();
        *cnt -= 1;
        if *cnt == 0 {
            self.by_distance.remove(&distance);
        }
        Some((distance, src, tgt, ds, dt))
    }

    /// Distance of the next pop and how many pairs share it.
    pub fn next_frame(&self) -> Option<(usize, usize)> {
        let (&d, &n) = self.by_distance.iter().next()?;
        Some((d, n))
    }
}

impl Default for Frontier {
    fn default() -> Self {
        Frontier::new()
    }
}

/// The stopping rule: keep searching while the best lens is bad relative
/// to how deep and how wide the next frame is. With a zero-cost lens in
/// hand the search halts immediately.
pub fn continue_search(frontier: &Frontier, best_cost: Option<f64>) -> bool {
    match (best_cost, frontier.next_frame()) {
        (None, Some(_)) => true,
        (_, None) => false,
        (Some(c), Some((d, n))) => c > d as f64 + (n as f64).log2(),
    }
}

/// Names marked for forced opening: closed references occurring on exactly
/// one side whose definitions share reachable structure with the other
/// side, so keeping them closed could only ever yield a disconnect.
pub fn infer_expansions(src: &Sre, tgt: &Sre, env: &DefEnv) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut left_names = Vec::new();
    src.strip().direct_refs(&mut left_names);
    let mut right_names = Vec::new();
    tgt.strip().direct_refs(&mut right_names);
    let left_set: BTreeSet<String> = left_names.iter().cloned().collect();
    let right_set: BTreeSet<String> = right_names.iter().cloned().collect();
    let left_reach = env.reachable_refs(&left_names);
    let right_reach = env.reachable_refs(&right_names);

    let forced = |name: &String, here: &BTreeSet<String>, other: &BTreeSet<String>, other_reach: &BTreeSet<String>| {
        if !here.contains(name) || other.contains(name) || !env.is_closed(name) {
            return false;
        }
        let defn = match env.regex_of(name) {
            Ok(r) => r,
            Err(_) => return false,
        };
        let mut inner = Vec::new();
        defn.direct_refs(&mut inner);
        let inner_reach = env.reachable_refs(&inner);
        !inner_reach.is_disjoint(other_reach)
    };

    let left_open: BTreeSet<String> = left_set
        .iter()
        .filter(|n| forced(n, &left_set, &right_set, &right_reach))
        .cloned()
        .collect();
    let right_open: BTreeSet<String> = right_set
        .iter()
        .filter(|n| forced(n, &right_set, &left_set, &left_reach))
        .cloned()
        .collect();
    (left_open, right_open)
}

fn open_all(s: &Sre, names: &BTreeSet<String>, env: &DefEnv) -> Sre {
    match s {
        Sre::Ref(n) if names.contains(n) => env.sre_of(n).expect("bound").clone(),
        Sre::Concat(a, b) => Sre::concat(open_all(a, names, env), open_all(b, names, env)),
        Sre::Or(a, b, p) => Sre::or(
            open_all(a, names, env),
            open_all(b, names, env),
            p.clone(),
        ),
        Sre::Star(a, p) => Sre::star(open_all(a, names, env), p.clone()),
        Sre::Skip(a) => Sre::skip(open_all(a, names, env)),
        Sre::Require(a) => Sre::require(open_all(a, names, env)),
        other => other.clone(),
    }
}

fn force_open_fixpoint(mut src: Sre, mut tgt: Sre, env: &DefEnv) -> (Sre, Sre) {
    loop {
        let (l, r) = infer_expansions(&src, &tgt, env);
        if l.is_empty() && r.is_empty() {
            return (src, tgt);
        }
        src = open_all(&src, &l, env);
        tgt = open_all(&tgt, &r, env);
    }
}

/// All pairs reachable by one unrolling or opening on exactly one side.
pub fn expand(src: &Sre, tgt: &Sre, env: &DefEnv) -> Vec<(Sre, Sre)> {
    let mut out = Vec::new();
    for s in unroll_neighbors(src, env) {
        out.push((s, tgt.clone()));
    }
    for t in unroll_neighbors(tgt, env) {
        out.push((src.clone(), t.clone()));
    }
    out
}

/// One example after parsing both sides against the DNF pair.
#[derive(Clone, Debug)]
pub struct DistributedExample {
    pub left_branch: usize,
    pub right_branch: usize,
    pub left_atoms: Vec<AtomMatch>,
    pub right_atoms: Vec<AtomMatch>,
}

/// Parses each example against the DNF pair, binding it to a branch pair
/// and splitting it into per-atom substrings.
pub fn distribute_examples(
    examples: &[(String, String)],
    ds: &DnfRegex,
    dt: &DnfRegex,
) -> Result<Vec<DistributedExample>> {
    let mut out = Vec::with_capacity(examples.len());
    for (l, r) in examples {
        let pl = dnf_parse(ds, l)?;
        let pr = dnf_parse(dt, r)?;
        out.push(DistributedExample {
            left_branch: pl.branch,
            right_branch: pr.branch,
            left_atoms: pl.atoms,
            right_atoms: pr.atoms,
        });
    }
    Ok(out)
}

/// Conservative unsatisfiability check: an obligated example that cannot
/// parse, or required information on one side with a counterpart that can
/// carry none.
pub fn cannot_map(examples: &[(String, String)], ds: &DnfRegex, dt: &DnfRegex) -> bool {
    if distribute_examples(examples, ds, dt).is_err() {
        return true;
    }
    let require_h = |d: &DnfRegex| {
        d.branches
            .iter()
            .flat_map(|(sq, _)| sq.atoms.iter())
            .filter(|a| a.relevance == Relevance::Require)
            .map(|a| a.raw_entropy())
            .fold(0.0f64, f64::max)
    };
    let capacity = |d: &DnfRegex| dnf_entropy(d).unwrap_or(0.0);
    (require_h(ds) > 1e-9 && capacity(dt) < 1e-9)
        || (require_h(dt) > 1e-9 && capacity(ds) < 1e-9)
}

fn interval_cost(hl: Interval, hr: Interval) -> f64 {
    hl.hi + hr.hi
}

/// Synthesizes the best atom lens between two atoms, or `None` when no
/// candidate satisfies the distributed examples.
pub fn atom_synth(
    sub_exs: &[(AtomMatch, AtomMatch)],
    a: &Atom,
    b: &Atom,
    library: &Library,
    env: &DefEnv,
) -> Option<(AtomLens, f64)> {
    let candidate = match (&a.kind, &b.kind) {
        (AtomKind::Closed(x), AtomKind::Closed(y)) => {
            let id = if x == y {
                Some(AtomLens::ClosedId(x.clone()))
            } else {
                None
            };
            let from_lib = || {
                library.entries.iter().find_map(|e| {
                    let matches_type = e.src == Regex::Ref(x.clone())
                        && e.tgt == Regex::Ref(y.clone());
                    if matches_type {
                        Some(AtomLens::ClosedLib {
                            name: e.name.clone(),
                            src_name: x.clone(),
                            tgt_name: y.clone(),
                            lens: e.typed.clone(),
                            h_left: e.h_left,
                            h_right: e.h_right,
                        })
                    } else {
                        None
                    }
                })
            };
            // Prefer the identity; fall back to a library lens that
            // satisfies the examples.
            match id {
                Some(al) if satisfies_atom_examples(&al, a, b, sub_exs, env) => Some(al),
                _ => from_lib(),
            }
        }
        (AtomKind::Star(_), AtomKind::Star(_)) => {
            let body_exs = iterate_sub_examples(sub_exs)?;
            greedy_synth(&body_exs, &a.body, &b.body, library, env)
                .map(|dl| AtomLens::IterateDnf(Box::new(dl)))
        }
        (AtomKind::Group, AtomKind::Group) => {
            let body_exs: Vec<(String, String)> = sub_exs
                .iter()
                .map(|(sm, tm)| (sm.text.clone(), tm.text.clone()))
                .collect();
            greedy_synth(&body_exs, &a.body, &b.body, library, env)
                .map(|dl| AtomLens::GroupDnf(Box::new(dl)))
        }
        _ => None,
    }?;
    if !satisfies_atom_examples(&candidate, a, b, sub_exs, env) {
        return None;
    }
    let cost = interval_cost(
        atom_h_left(&candidate, a, b),
        atom_h_right(&candidate, a, b),
    );
    Some((candidate, cost))
}

/// Pairs up star iterations positionally; synchronized examples must agree
/// on iteration counts, which the later satisfaction check enforces.
fn iterate_sub_examples(sub_exs: &[(AtomMatch, AtomMatch)]) -> Option<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (sm, tm) in sub_exs {
        let ss = sm.iterations.as_ref()?;
        let ts = tm.iterations.as_ref()?;
        for k in 0..ss.len().min(ts.len()) {
            out.push((ss[k].clone(), ts[k].clone()));
        }
    }
    Some(out)
}

fn satisfies_atom_examples(
    al: &AtomLens,
    a: &Atom,
    b: &Atom,
    sub_exs: &[(AtomMatch, AtomMatch)],
    env: &DefEnv,
) -> bool {
    sub_exs.iter().all(|(sm, tm)| {
        matches!(atom_put_r(al, a, b, sm, tm, env), Ok(out) if out == tm.text)
            && matches!(atom_put_l(al, a, b, tm, sm, env), Ok(out) if out == sm.text)
    })
}

/// Checks that atom mappings form a separable permutation, so they can be
/// realized with concatenation and swap alone.
pub fn separable(pairs: &[(usize, usize)]) -> bool {
    let mut sorted: Vec<(usize, usize)> = pairs.to_vec();
    sorted.sort();
    fn rec(ys: &[usize]) -> bool {
        let k = ys.len();
        if k <= 1 {
            return true;
        }
        for m in 1..k {
            let (a, b) = ys.split_at(m);
            let (amin, amax) = (a.iter().min().unwrap(), a.iter().max().unwrap());
            let (bmin, bmax) = (b.iter().min().unwrap(), b.iter().max().unwrap());
            if (amax < bmin || amin > bmax) && rec(a) && rec(b) {
                return true;
            }
        }
        false
    }
    let ys: Vec<usize> = sorted.iter().map(|&(_, y)| y).collect();
    rec(&ys)
}

/// Greedy synthesis of a sequence lens: cheapest atom lenses first,
/// connecting only when that beats disconnecting both ends, with `require`
/// obligations forcing connections (evicting cheaper choices if needed).
pub fn greedy_seq_synth(
    exs: &[(Vec<AtomMatch>, Vec<AtomMatch>)],
    sq: &Sequence,
    tq: &Sequence,
    library: &Library,
    env: &DefEnv,
) -> Option<SeqLens> {
    let n = sq.atoms.len();
    let m = tq.atoms.len();
    let requires_left: Vec<usize> = (0..n)
        .filter(|&x| sq.atoms[x].relevance == Relevance::Require && sq.atoms[x].raw_entropy() > 1e-12)
        .collect();
    let requires_right: Vec<usize> = (0..m)
        .filter(|&y| tq.atoms[y].relevance == Relevance::Require && tq.atoms[y].raw_entropy() > 1e-12)
        .collect();
    if (!requires_left.is_empty() && m == 0) || (!requires_right.is_empty() && n == 0) {
        return None;
    }

    // All candidate atom lenses.
    let mut cands: Vec<(f64, usize, usize, AtomLens)> = Vec::new();
    for x in 0..n {
        for y in 0..m {
            let sub_exs: Vec<(AtomMatch, AtomMatch)> = exs
                .iter()
                .map(|(sm, tm)| (sm[x].clone(), tm[y].clone()))
                .collect();
            if let Some((al, cost)) = atom_synth(&sub_exs, &sq.atoms[x], &tq.atoms[y], library, env)
            {
                cands.push((cost, x, y, al));
            }
        }
    }
    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let disconnect_pair = |x: usize, y: usize| -> f64 {
        let da = match sq.atoms[x].relevance {
            Relevance::Skip => 0.0,
            Relevance::Require => f64::INFINITY,
            Relevance::None => sq.atoms[x].raw_entropy(),
        };
        let db = match tq.atoms[y].relevance {
            Relevance::Skip => 0.0,
            Relevance::Require => f64::INFINITY,
            Relevance::None => tq.atoms[y].raw_entropy(),
        };
        da + db
    };

    let mut left_used = vec![false; n];
    let mut right_used = vec![false; m];
    let mut chosen: Vec<(usize, usize, AtomLens, f64)> = Vec::new();

    let pairs_of = |chosen: &Vec<(usize, usize, AtomLens, f64)>| -> Vec<(usize, usize)> {
        chosen.iter().map(|&(x, y, _, _)| (x, y)).collect()
    };

    for (cost, x, y, al) in &cands {
        if left_used[*x] || right_used[*y] {
            continue;
        }
        if *cost < disconnect_pair(*x, *y) {
            let mut pairs = pairs_of(&chosen);
            pairs.push((*x, *y));
            if !separable(&pairs) {
                continue;
            }
            left_used[*x] = true;
            right_used[*y] = true;
            chosen.push((*x, *y, al.clone(), *cost));
        }
    }

    // Force connections for required atoms, evicting non-required choices.
    let force = |idx: usize, is_left: bool,
                     left_used: &mut Vec<bool>,
                     right_used: &mut Vec<bool>,
                     chosen: &mut Vec<(usize, usize, AtomLens, f64)>|
     -> bool {
        let already = chosen
            .iter()
            .any(|&(x, y, _, _)| if is_left { x == idx } else { y == idx });
        if already {
            return true;
        }
        for (cost, x, y, al) in &cands {
            let (mine, other) = if is_left { (*x, *y) } else { (*y, *x) };
            if mine != idx {
                continue;
            }
            let other_required = if is_left {
                requires_right.contains(&other)
            } else {
                requires_left.contains(&other)
            };
            let occupied_pos = chosen
                .iter()
                .position(|&(cx, cy, _, _)| if is_left { cy == *y } else { cx == *x });
            if let Some(pos) = occupied_pos {
                let (cx, cy, _, _) = chosen[pos];
                let evict_ok = !requires_left.contains(&cx) && !requires_right.contains(&cy);
                if !evict_ok || other_required {
                    continue;
                }
                let mut pairs = pairs_of(chosen);
                pairs.remove(pos);
                pairs.push((*x, *y));
                if !separable(&pairs) {
                    continue;
                }
                left_used[cx] = false;
                right_used[cy] = false;
                chosen.remove(pos);
            } else {
                let mut pairs = pairs_of(chosen);
                pairs.push((*x, *y));
                if !separable(&pairs) {
                    continue;
                }
            }
            left_used[*x] = true;
            right_used[*y] = true;
            chosen.push((*x, *y, al.clone(), *cost));
            return true;
        }
        false
    };

    for &x in &requires_left {
        if !force(x, true, &mut left_used, &mut right_used, &mut chosen) {
            return None;
        }
    }
    for &y in &requires_right {
        if !force(y, false, &mut left_used, &mut right_used, &mut chosen) {
            return None;
        }
    }

    // Defaults for unmapped atoms: the example-observed substring when all
    // observations agree, else the minimal member string.
    let left_default = |x: usize| -> Option<String> {
        let mut seen: Option<String> = None;
        let mut unanimous = true;
        for (sm, _) in exs {
            match &seen {
                None => seen = Some(sm[x].text.clone()),
                Some(prev) if *prev != sm[x].text => unanimous = false,
                _ => {}
            }
        }
        match seen {
            Some(s) if unanimous => Some(s),
            _ => sq.atoms[x].min_string(),
        }
    };
    let right_default = |y: usize| -> Option<String> {
        let mut seen: Option<String> = None;
        let mut unanimous = true;
        for (_, tm) in exs {
            match &seen {
                None => seen = Some(tm[y].text.clone()),
                Some(prev) if *prev != tm[y].text => unanimous = false,
                _ => {}
            }
        }
        match seen {
            Some(s) if unanimous => Some(s),
            _ => tq.atoms[y].min_string(),
        }
    };

    let mut sl = SeqLens {
        mappings: chosen
            .into_iter()
            .map(|(x, y, al, _)| AtomMapping {
                left: x,
                right: y,
                lens: al,
            })
            .collect(),
        left_unmapped: Vec::new(),
        right_unmapped: Vec::new(),
    };
    for x in 0..n {
        if !left_used[x] {
            sl.left_unmapped.push((x, left_default(x)?));
        }
    }
    for y in 0..m {
        if !right_used[y] {
            sl.right_unmapped.push((y, right_default(y)?));
        }
    }
    Some(sl)
}

/// Greedy synthesis of a whole normal-form lens between two DNF types.
pub fn greedy_synth(
    examples: &[(String, String)],
    ds: &DnfRegex,
    dt: &DnfRegex,
    library: &Library,
    env: &DefEnv,
) -> Option<DnfLens> {
    if ds.is_empty_language() || dt.is_empty_language() {
        return None;
    }
    if cannot_map(examples, ds, dt) {
        return None;
    }
    let distributed = distribute_examples(examples, ds, dt).ok()?;
    let n = ds.branches.len();
    let m = dt.branches.len();
    let obligations: BTreeSet<(usize, usize)> = distributed
        .iter()
        .map(|d| (d.left_branch, d.right_branch))
        .collect();

    // Candidate sequence lenses for every branch pair.
    let mut cands: Vec<Option<(SeqLens, f64)>> = Vec::with_capacity(n * m);
    for i in 0..n {
        for j in 0..m {
            let exs: Vec<(Vec<AtomMatch>, Vec<AtomMatch>)> = distributed
                .iter()
                .filter(|d| d.left_branch == i && d.right_branch == j)
                .map(|d| (d.left_atoms.clone(), d.right_atoms.clone()))
                .collect();
            let sl = greedy_seq_synth(&exs, &ds.branches[i].0, &dt.branches[j].0, library, env);
            cands.push(sl.map(|sl| {
                let c = interval_cost(
                    seq_h_left(&sl, &ds.branches[i].0, &dt.branches[j].0),
                    seq_h_right(&sl, &ds.branches[i].0, &dt.branches[j].0),
                );
                (sl, c)
            }));
        }
    }
    let cand = |i: usize, j: usize| cands[i * m + j].as_ref();

    // Every obligated branch pair must have a candidate.
    for &(i, j) in &obligations {
        cand(i, j)?;
    }

    #[derive(Clone, Copy, PartialEq)]
    struct Entry {
        cost: f64,
        penalty: u8,
        i: usize,
        j: usize,
    }
    let mut queue: VecDeque<Entry> = VecDeque::new();
    let mut items: Vec<Entry> = Vec::new();
    for i in 0..n {
        for j in 0..m {
            if let Some((_, c)) = cand(i, j) {
                items.push(Entry {
                    cost: *c,
                    penalty: 0,
                    i,
                    j,
                });
            }
        }
    }
    let sort_queue = |q: &mut VecDeque<Entry>| {
        let mut v: Vec<Entry> = q.drain(..).collect();
        v.sort_by(|a, b| {
            a.cost
                .total_cmp(&b.cost)
                .then(a.i.cmp(&b.i))
                .then(a.j.cmp(&b.j))
        });
        q.extend(v);
    };
    queue.extend(items);
    sort_queue(&mut queue);

    let mut chosen: Vec<(usize, usize)> = Vec::new();
    let mut left_cov = vec![false; n];
    let mut right_cov = vec![false; m];

    // Obligated pairs first: examples require these mappings to exist.
    for &(i, j) in &obligations {
        chosen.push((i, j));
        left_cov[i] = true;
        right_cov[j] = true;
    }
    if !mappings_realizable(&chosen) {
        return None;
    }

    while let Some(e) = queue.pop_front() {
        if chosen.contains(&(e.i, e.j)) {
            continue;
        }
        let new_cover = !left_cov[e.i] || !right_cov[e.j];
        if !new_cover {
            continue;
        }
        let creates_merge = left_cov[e.i] || right_cov[e.j];
        if creates_merge && e.penalty == 0 {
            // A merge stores an extra branch-choice bit; re-rank once.
            let mut e2 = e;
            e2.cost += 1.0;
            e2.penalty = 1;
            queue.push_back(e2);
            sort_queue(&mut queue);
            continue;
        }
        let mut tentative = chosen.clone();
        tentative.push((e.i, e.j));
        if !mappings_realizable(&tentative) {
            continue;
        }
        chosen = tentative;
        left_cov[e.i] = true;
        right_cov[e.j] = true;
    }

    if left_cov.iter().any(|c| !c) || right_cov.iter().any(|c| !c) {
        return None;
    }

    let mappings: Vec<SeqMapping> = chosen
        .iter()
        .map(|&(i, j)| SeqMapping {
            left: i,
            right: j,
            lens: cand(i, j).unwrap().0.clone(),
        })
        .collect();

    // Create tables: the cheapest mapping per side.
    let mut create_r_table = vec![usize::MAX; n];
    let mut create_l_table = vec![usize::MAX; m];
    for i in 0..n {
        let best = mappings
            .iter()
            .enumerate()
            .filter(|(_, mm)| mm.left == i)
            .min_by(|(_, a), (_, b)| {
                let ca = cand(a.left, a.right).unwrap().1;
                let cb = cand(b.left, b.right).unwrap().1;
                ca.total_cmp(&cb).then(a.right.cmp(&b.right))
            });
        create_r_table[i] = best?.0;
    }
    for j in 0..m {
        let best = mappings
            .iter()
            .enumerate()
            .filter(|(_, mm)| mm.right == j)
            .min_by(|(_, a), (_, b)| {
                let ca = cand(a.left, a.right).unwrap().1;
                let cb = cand(b.left, b.right).unwrap().1;
                ca.total_cmp(&cb).then(a.left.cmp(&b.left))
            });
        create_l_table[j] = best?.0;
    }

    Some(DnfLens {
        mappings,
        create_r_table,
        create_l_table,
    })
}

/// Checks every example against the normal-form evaluators: both puts
/// must fix the pair.
pub fn satisfies_examples(
    dl: &DnfLens,
    ds: &DnfRegex,
    dt: &DnfRegex,
    examples: &[(String, String)],
    env: &DefEnv,
) -> bool {
    let ev = DnfEvaluator::new(dl, ds, dt, env);
    examples.iter().all(|(l, r)| {
        matches!(ev.put_r(l, r), Ok(out) if out == *r)
            && matches!(ev.put_l(r, l), Ok(out) if out == *l)
    })
}

/// Runs the full search and returns the best lens found.
pub fn synth(task: &SynthTask) -> Result<SynthResult> {
    let env = task.env;
    let src = task.src.normalize_empty()?;
    let tgt = task.tgt.normalize_empty()?;
    let src_strip = src.strip();
    let tgt_strip = tgt.strip();
    for (l, r) in &task.examples {
        if !src_strip.matches(l, env)? {
            return Err(Error::BadExample {
                left: l.clone(),
                right: r.clone(),
                side: format!("{l:?} is not in the source language"),
            });
        }
        if !tgt_strip.matches(r, env)? {
            return Err(Error::BadExample {
                left: l.clone(),
                right: r.clone(),
                side: format!("{r:?} is not in the target language"),
            });
        }
    }
    if let Some(w) = src_strip.check_unambiguous(env, src_strip.default_ambiguity_bound())? {
        return Err(Error::UnambiguityViolation(w));
    }
    if let Some(w) = tgt_strip.check_unambiguous(env, tgt_strip.default_ambiguity_bound())? {
        return Err(Error::UnambiguityViolation(w));
    }

    let started = Instant::now();
    let mut frontier = Frontier::new();
    frontier.push(src, tgt, 0, env);
    let mut stats = SynthStats::default();
    let mut best: Option<(DnfLens, DnfRegex, DnfRegex, usize, f64)> = None;

    loop {
        stats.continue_checks += 1;
        if !continue_search(&frontier, best.as_ref().map(|b| b.4)) {
            break;
        }
        if stats.pops >= task.limits.max_expansions || started.elapsed() > task.limits.wall_clock {
            stats.timed_out = true;
            break;
        }
        let (distance, s, t, ds, dt) = match frontier.pop() {
            Some(x) => x,
            None => break,
        };
        stats.pops += 1;
        stats.max_distance = stats.max_distance.max(distance);
        if task.verbose {
            let frame = frontier.next_frame().unwrap_or((distance, 0));
            eprintln!(
                "pop d={distance} queued(d={})={} best={:?}",
                frame.0,
                frame.1,
                best.as_ref().map(|b| b.4)
            );
        }
        if let Some(dl) = greedy_synth(&task.examples, &ds, &dt, task.library, env) {
            if satisfies_examples(&dl, &ds, &dt, &task.examples, env) {
                let c = interval_cost(dnf_h_left(&dl, &ds, &dt), dnf_h_right(&dl, &ds, &dt));
                let better = match &best {
                    None => true,
                    Some((_, _, _, _, bc)) => c < *bc,
                };
                if better {
                    best = Some((dl, ds.clone(), dt.clone(), distance, c));
                    if task.mode == SearchMode::FirstLens {
                        break;
                    }
                }
            }
        }
        for (s2, t2) in expand(&s, &t, env) {
            frontier.push(s2, t2, distance + 1, env);
        }
    }

    let (dl, ds, dt, distance, cost) = best.ok_or(Error::NoLens)?;
    let lens = crate::dnflens::to_surface(&dl, &ds, &dt, env)?;
    let typed = lens::typecheck(&lens, env, task.library)?;
    // Soundness: the surface lens must typecheck at the requested pair and
    // satisfy every example.
    if !crate::automata::equivalent(&typed.src, &src_strip, env)?
        || !crate::automata::equivalent(&typed.tgt, &tgt_strip, env)?
    {
        return Err(Error::TypeMismatch {
            location: "synthesized lens".into(),
            expected: format!("{src_strip} <=> {tgt_strip}"),
            got: format!("{} <=> {}", typed.src, typed.tgt),
        });
    }
    for (l, r) in &task.examples {
        if typed.put_r(l, r, env)? != *r || typed.put_l(r, l, env)? != *l {
            return Err(Error::Other(format!(
                "internal: synthesized lens fails example ({l:?}, {r:?})"
            )));
        }
    }
    Ok(SynthResult {
        lens,
        typed,
        cost,
        distance,
        dnf_lens: dl,
        src_dnf: ds,
        tgt_dnf: dt,
        stats,
    })
}

/// Adds a checked lens to the library. Composition-free lenses get their
/// cost intervals from the entropy bounds at the declared types;
/// composition needs an explicit annotation.
pub fn register_library(
    library: &mut Library,
    name: &str,
    lens: Lens,
    src: &Sre,
    tgt: &Sre,
    annotation: Option<CostAnnotation>,
    env: &DefEnv,
) -> Result<()> {
    let typed = lens::typecheck(&lens, env, library)?;
    let (h_left, h_right) = match annotation {
        Some(CostAnnotation::Bijective) => (Interval::zero(), Interval::zero()),
        Some(CostAnnotation::Cost(c)) => {
            // A single annotated figure splits evenly across directions.
            (Interval::point(c / 2.0), Interval::point(c / 2.0))
        }
        None => {
            if lens.contains_compose() {
                return Err(Error::MissingCostAnnotation(name.to_string()));
            }
            (
                lens::h_left(&typed, src, tgt, env)?,
                lens::h_right(&typed, src, tgt, env)?,
            )
        }
    };
    library.entries.push(LibraryEntry {
        name: name.to_string(),
        lens,
        typed: Arc::new(typed),
        src: src.strip(),
        tgt: tgt.strip(),
        h_left,
        h_right,
    });
    Ok(())
}

/// Deterministic minimal member string of a DNF type (used in tests).
pub fn min_string_of(d: &DnfRegex) -> Option<String> {
    d.branches
        .iter()
        .filter_map(|(sq, _)| sq.min_string())
        .min_by(|a, b| cmp_len_lex(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::Prob;

    fn base_env() -> DefEnv {
        let mut e = DefEnv::new();
        e.define(
            "name",
            Sre::concat(
                Sre::or(Sre::lit("A"), Sre::lit("B"), Prob::from_ratio(1, 2)),
                Sre::star(
                    Sre::or(Sre::lit("a"), Sre::lit("b"), Prob::from_ratio(1, 2)),
                    Prob::from_ratio(4, 5),
                ),
            ),
        )
        .unwrap();
        e
    }

    #[test]
    fn continue_rule() {
        let mut f = Frontier::new();
        let e = base_env();
        f.push(Sre::lit("a"), Sre::lit("a"), 3, &e);
        // Fake eight entries at distance 3.
        for k in 0..7 {
            f.push(Sre::lit(&format!("a{k}")), Sre::lit("a"), 3, &e);
        }
        assert_eq!(f.next_frame(), Some((3, 8)));
        // A zero-cost lens halts; an expensive one keeps searching.
        assert!(!continue_search(&f, Some(0.0)));
        assert!(!continue_search(&f, Some(5.0)), "5 <= 3 + log2(8)");
        assert!(continue_search(&f, Some(7.0)), "7 > 3 + log2(8)");
        assert!(continue_search(&f, None));
    }

    #[test]
    fn identity_task_is_immediate() {
        let e = base_env();
        let lib = Library::new();
        let task = SynthTask::new(
            Sre::reference("name"),
            Sre::reference("name"),
            &e,
            &lib,
        );
        let r = synth(&task).unwrap();
        assert_eq!(r.cost, 0.0);
        assert_eq!(r.distance, 0);
        assert_eq!(r.stats.pops, 1);
        assert_eq!(r.typed.create_r("Aab", &e).unwrap(), "Aab");
    }

    #[test]
    fn forced_opening_one_sided() {
        let mut e = base_env();
        e.define(
            "wrapped",
            Sre::concat(Sre::lit("["), Sre::concat(Sre::reference("name"), Sre::lit("]"))),
        )
        .unwrap();
        // Left mentions `wrapped` (which reaches `name`), right mentions
        // `name` directly: wrapped must open so the names can connect.
        let (l, r) = infer_expansions(
            &Sre::reference("wrapped"),
            &Sre::reference("name"),
            &e,
        );
        assert!(l.contains("wrapped"));
        assert!(r.is_empty());

        let lib = Library::new();
        let task = SynthTask::new(Sre::reference("wrapped"), Sre::reference("name"), &e, &lib);
        let res = synth(&task).unwrap();
        assert_eq!(res.typed.create_r("[Aa]", &e).unwrap(), "Aa");
        assert_eq!(res.typed.create_l("Bb", &e).unwrap(), "[Bb]");
        assert_eq!(res.cost, 0.0);
    }

    #[test]
    fn disconnects_unrelated_content() {
        let mut e = base_env();
        let digit = (0..=2)
            .map(|d| Sre::lit(&d.to_string()))
            .reduce(|a, b| Sre::or(a, b, Prob::from_ratio(1, 2)))
            .unwrap();
        e.define("digit", digit).unwrap();
        let lib = Library::new();
        // name . ":" . digit <=> name
        let src = Sre::concat(
            Sre::reference("name"),
            Sre::concat(Sre::lit(":"), Sre::reference("digit")),
        );
        let task = SynthTask::new(src, Sre::reference("name"), &e, &lib);
        let r = synth(&task).unwrap();
        assert_eq!(r.typed.create_r("Aab:2", &e).unwrap(), "Aab");
        // The digit restores from the old source on puts.
        assert_eq!(r.typed.put_l("Bb", "Aab:2", &e).unwrap(), "Bb:2");
        assert!(r.cost > 0.0);
    }

    #[test]
    fn examples_pin_branches() {
        let e = base_env();
        let lib = Library::new();
        // "x" | "y"  <=>  "0" | "1" with examples crossing the default
        // cheap pairing.
        let src = Sre::or(Sre::lit("x"), Sre::lit("y"), Prob::from_ratio(1, 2));
        let tgt = Sre::or(Sre::lit("0"), Sre::lit("1"), Prob::from_ratio(1, 2));
        let mut task = SynthTask::new(src, tgt, &e, &lib);
        task.examples = vec![("x".into(), "1".into()), ("y".into(), "0".into())];
        let r = synth(&task).unwrap();
        assert_eq!(r.typed.put_r("x", "1", &e).unwrap(), "1");
        assert_eq!(r.typed.create_r("x", &e).unwrap(), "1");
        assert_eq!(r.typed.create_r("y", &e).unwrap(), "0");
    }

    #[test]
    fn require_without_counterpart_fails() {
        let e = base_env();
        let lib = Library::new();
        let src = Sre::require(Sre::reference("name"));
        let tgt = Sre::lit("constant");
        let mut task = SynthTask::new(src, tgt, &e, &lib);
        task.limits.max_expansions = 50;
        match synth(&task) {
            Err(Error::NoLens) => {}
            other => panic!("expected no lens, got {other:?}"),
        }
    }

    #[test]
    fn library_reuse() {
        let mut e = base_env();
        e.define(
            "name2",
            Sre::concat(
                Sre::or(Sre::lit("C"), Sre::lit("D"), Prob::from_ratio(1, 2)),
                Sre::star(
                    Sre::or(Sre::lit("c"), Sre::lit("d"), Prob::from_ratio(1, 2)),
                    Prob::from_ratio(4, 5),
                ),
            ),
        )
        .unwrap();
        let mut lib = Library::new();
        // A hand lens between the two name formats.
        let inner = Lens::concat(
            Lens::or(
                Lens::disconnect(Regex::lit("A"), Regex::lit("C"), "A", "C"),
                Lens::disconnect(Regex::lit("B"), Regex::lit("D"), "B", "D"),
            ),
            Lens::iterate(Lens::or(
                Lens::disconnect(Regex::lit("a"), Regex::lit("c"), "a", "c"),
                Lens::disconnect(Regex::lit("b"), Regex::lit("d"), "b", "d"),
            )),
        );
        register_library(
            &mut lib,
            "names",
            inner,
            &Sre::reference("name"),
            &Sre::reference("name2"),
            None,
            &e,
        )
        .unwrap();

        let task = SynthTask::new(Sre::reference("name"), Sre::reference("name2"), &e, &lib);
        let r = synth(&task).unwrap();
        assert_eq!(r.typed.create_r("Aab", &e).unwrap(), "Ccd");
        // The reused lens shows up as a reference in the surface syntax.
        assert!(
            crate::syntax::print_lens(&r.lens).contains("names"),
            "{}",
            crate::syntax::print_lens(&r.lens)
        );
    }
}
