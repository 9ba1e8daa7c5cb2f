//! Definition environments.
//!
//! An environment is an ordered map from names to stochastic regular
//! expressions. A binding may reference only earlier bindings, which makes
//! reference chains acyclic by construction. Each entry also caches the
//! stripped plain expression and the normal form of the definition, computed
//! once at definition time.

use crate::dnf::DnfRegex;
use crate::error::{Error, Result};
use crate::regex::Regex;
use crate::sre::Sre;
use std::collections::{BTreeSet, HashMap};

#[derive(Clone, Debug)]
struct Entry {
    sre: Sre,
    regex: Regex,
    dnf: DnfRegex,
}

#[derive(Clone, Debug, Default)]
pub struct DefEnv {
    order: Vec<String>,
    entries: HashMap<String, Entry>,
    closed: BTreeSet<String>,
}

impl DefEnv {
    pub fn new() -> DefEnv {
        DefEnv::default()
    }

    /// Adds a binding. All references inside `sre` must already be bound.
    /// The name is treated as closed until opened.
    pub fn define(&mut self, name: &str, sre: Sre) -> Result<()> {
        if self.entries.contains_key(name) {
            return Err(Error::Other(format!("`{name}` is already defined")));
        }
        let mut refs = Vec::new();
        sre.strip().direct_refs(&mut refs);
        for r in &refs {
            if !self.entries.contains_key(r) {
                return Err(Error::UnresolvedRef(r.clone()));
            }
        }
        let sre = sre.normalize_empty()?;
        let regex = sre.strip();
        let dnf = crate::dnf::to_dnf(&sre, self)?;
        self.order.push(name.to_string());
        self.closed.insert(name.to_string());
        self.entries.insert(name.to_string(), Entry { sre, regex, dnf });
        Ok(())
    }

    pub fn names(&self) -> &[String] {
        &self.order
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn sre_of(&self, name: &str) -> Result<&Sre> {
        self.entries
            .get(name)
            .map(|e| &e.sre)
            .ok_or_else(|| Error::UnresolvedRef(name.to_string()))
    }

    pub fn regex_of(&self, name: &str) -> Result<&Regex> {
        self.entries
            .get(name)
            .map(|e| &e.regex)
            .ok_or_else(|| Error::UnresolvedRef(name.to_string()))
    }

    /// Same as [`DefEnv::regex_of`]; separate name for matcher call sites.
    pub fn regex_node(&self, name: &str) -> Result<&Regex> {
        self.regex_of(name)
    }

    pub fn dnf_of(&self, name: &str) -> Result<&DnfRegex> {
        self.entries
            .get(name)
            .map(|e| &e.dnf)
            .ok_or_else(|| Error::UnresolvedRef(name.to_string()))
    }

    pub fn is_closed(&self, name: &str) -> bool {
        self.closed.contains(name)
    }

    pub fn set_closed(&mut self, name: &str, closed: bool) {
        if closed {
            self.closed.insert(name.to_string());
        } else {
            self.closed.remove(name);
        }
    }

    /// Names reachable from `start` through definitions, including `start`.
    pub fn reachable_refs(&self, start: &[String]) -> BTreeSet<String> {
        let mut seen: BTreeSet<String> = BTreeSet::new();
        let mut stack: Vec<String> = start.to_vec();
        while let Some(n) = stack.pop() {
            if !seen.insert(n.clone()) {
                continue;
            }
            if let Ok(r) = self.regex_of(&n) {
                let mut direct = Vec::new();
                r.direct_refs(&mut direct);
                stack.extend(direct);
            }
        }
        seen
    }
}
