//! Finite-automaton decision procedures for plain regular expressions:
//! language equivalence and disjointness.
//!
//! Used by the lens typechecker, where the type-equivalence rule and the
//! disjointness requirements of union/merge combinators need complete
//! answers rather than bounded checks. References are inlined (definition
//! chains are acyclic), then a Thompson construction and a synchronized
//! subset-construction walk compare the languages.

use crate::env::DefEnv;
use crate::error::Result;
use crate::regex::Regex;
use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

struct Nfa {
    /// transitions[state] = list of (label, target); None is epsilon.
    transitions: Vec<Vec<(Option<char>, usize)>>,
    start: usize,
    accept: usize,
}

impl Nfa {
    fn new() -> Nfa {
        Nfa {
            transitions: vec![Vec::new(), Vec::new()],
            start: 0,
            accept: 1,
        }
    }

    fn fresh(&mut self) -> usize {
        self.transitions.push(Vec::new());
        self.transitions.len() - 1
    }

    fn edge(&mut self, from: usize, label: Option<char>, to: usize) {
        self.transitions[from].push((label, to));
    }

    fn build(&mut self, r: &Regex, env: &DefEnv, from: usize, to: usize) -> Result<()> {
        match r {
            Regex::Empty => {}
            Regex::Const(s) => {
                let mut cur = from;
                let chars: Vec<char> = s.chars().collect();
                for (i, c) in chars.iter().enumerate() {
                    let next = if i + 1 == chars.len() { to } else { self.fresh() };
                    self.edge(cur, Some(*c), next);
                    cur = next;
                }
                if chars.is_empty() {
                    self.edge(from, None, to);
                }
            }
            Regex::Concat(a, b) => {
                let mid = self.fresh();
                self.build(a, env, from, mid)?;
                self.build(b, env, mid, to)?;
            }
            Regex::Or(a, b) => {
                self.build(a, env, from, to)?;
                self.build(b, env, from, to)?;
            }
            Regex::Star(a) => {
                let hub = self.fresh();
                self.edge(from, None, hub);
                self.edge(hub, None, to);
                let back = self.fresh();
                self.build(a, env, hub, back)?;
                self.edge(back, None, hub);
            }
            Regex::Ref(n) => {
                let def = env.regex_of(n)?;
                self.build(def, env, from, to)?;
            }
        }
        Ok(())
    }

    fn epsilon_closure(&self, states: &BTreeSet<usize>) -> BTreeSet<usize> {
        let mut out = states.clone();
        let mut stack: Vec<usize> = states.iter().copied().collect();
        while let Some(s) = stack.pop() {
            for (label, t) in &self.transitions[s] {
                if label.is_none() && out.insert(*t) {
                    stack.push(*t);
                }
            }
        }
        out
    }

    fn step(&self, states: &BTreeSet<usize>, c: char) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for s in states {
            for (label, t) in &self.transitions[*s] {
                if *label == Some(c) {
                    out.insert(*t);
                }
            }
        }
        self.epsilon_closure(&out)
    }

    fn accepts(&self, states: &BTreeSet<usize>) -> bool {
        states.contains(&self.accept)
    }
}

fn compile(r: &Regex, env: &DefEnv) -> Result<Nfa> {
    let mut nfa = Nfa::new();
    let (start, accept) = (nfa.start, nfa.accept);
    nfa.build(r, env, start, accept)?;
    Ok(nfa)
}

fn joint_alphabet(a: &Regex, b: &Regex, env: &DefEnv) -> Result<Vec<char>> {
    let mut set = BTreeSet::new();
    a.alphabet(env, &mut set)?;
    b.alphabet(env, &mut set)?;
    Ok(set.into_iter().collect())
}

/// Complete language-equivalence decision.
pub fn equivalent(a: &Regex, b: &Regex, env: &DefEnv) -> Result<bool> {
    let na = compile(a, env)?;
    let nb = compile(b, env)?;
    let alphabet = joint_alphabet(a, b, env)?;
    let sa = na.epsilon_closure(&BTreeSet::from([na.start]));
    let sb = nb.epsilon_closure(&BTreeSet::from([nb.start]));
    let mut seen: HashSet<(Vec<usize>, Vec<usize>)> = HashSet::new();
    let mut queue = VecDeque::new();
    queue.push_back((sa, sb));
    while let Some((qa, qb)) = queue.pop_front() {
        if na.accepts(&qa) != nb.accepts(&qb) {
            return Ok(false);
        }
        let key = (
            qa.iter().copied().collect::<Vec<_>>(),
            qb.iter().copied().collect::<Vec<_>>(),
        );
        if !seen.insert(key) {
            continue;
        }
        for &c in &alphabet {
            queue.push_back((na.step(&qa, c), nb.step(&qb, c)));
        }
    }
    Ok(true)
}

/// Complete disjointness decision: true iff the languages share no string.
pub fn disjoint(a: &Regex, b: &Regex, env: &DefEnv) -> Result<bool> {
    let na = compile(a, env)?;
    let nb = compile(b, env)?;
    let alphabet = joint_alphabet(a, b, env)?;
    let sa = na.epsilon_closure(&BTreeSet::from([na.start]));
    let sb = nb.epsilon_closure(&BTreeSet::from([nb.start]));
    let mut seen: HashMap<(Vec<usize>, Vec<usize>), ()> = HashMap::new();
    let mut queue = VecDeque::new();
    queue.push_back((sa, sb));
    while let Some((qa, qb)) = queue.pop_front() {
        if qa.is_empty() || qb.is_empty() {
            continue;
        }
        if na.accepts(&qa) && nb.accepts(&qb) {
            return Ok(false);
        }
        let key = (
            qa.iter().copied().collect::<Vec<_>>(),
            qb.iter().copied().collect::<Vec<_>>(),
        );
        if seen.insert(key, ()).is_some() {
            continue;
        }
        for &c in &alphabet {
            queue.push_back((na.step(&qa, c), nb.step(&qb, c)));
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> DefEnv {
        DefEnv::new()
    }

    #[test]
    fn equivalence_basics() {
        let e = env();
        let ab = Regex::lit("ab");
        let a_b = Regex::concat(Regex::lit("a"), Regex::lit("b"));
        assert!(equivalent(&ab, &a_b, &e).unwrap());

        let astar = Regex::star(Regex::lit("a"));
        let unrolled = Regex::or(
            Regex::lit(""),
            Regex::concat(Regex::lit("a"), Regex::star(Regex::lit("a"))),
        );
        assert!(equivalent(&astar, &unrolled, &e).unwrap());
        assert!(!equivalent(&astar, &ab, &e).unwrap());
    }

    #[test]
    fn disjointness_basics() {
        let e = env();
        assert!(disjoint(&Regex::lit("a"), &Regex::lit("b"), &e).unwrap());
        let astar = Regex::star(Regex::lit("a"));
        let bstar = Regex::star(Regex::lit("b"));
        // Both contain the empty string.
        assert!(!disjoint(&astar, &bstar, &e).unwrap());
        assert!(disjoint(&Regex::Empty, &astar, &e).unwrap());
    }
}

/// Number of characters of `s` consumable before the automaton for `r` has
/// no live states; equals `s.chars().count()` when `s` is a prefix of some
/// member string. Used for parse-failure diagnostics.
pub fn longest_prefix_match(r: &Regex, env: &DefEnv, s: &str) -> Result<usize> {
    let nfa = compile(r, env)?;
    let mut states = nfa.epsilon_closure(&BTreeSet::from([nfa.start]));
    for (consumed, c) in s.chars().enumerate() {
        states = nfa.step(&states, c);
        if states.is_empty() {
            return Ok(consumed);
        }
    }
    Ok(s.chars().count())
}
