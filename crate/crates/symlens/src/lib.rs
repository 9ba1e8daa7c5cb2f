//! Simple symmetric string lenses over regular-language formats.
//!
//! A simple symmetric lens is four functions — `createR`, `createL`,
//! `putR`, `putL` — between two string languages, subject to four
//! round-tripping laws. This crate provides:
//!
//! - the lens combinator language with typing and all four evaluators,
//! - stochastic regular expressions (languages plus distributions) with
//!   exact rational probabilities, syntactic entropy, and the
//!   distribution-preserving star-semiring rewrites,
//! - the stochastic DNF normal form the synthesizer searches over,
//! - composition-free normal-form lenses and their conversion to surface
//!   combinators,
//! - a synthesizer that, given two regular expressions and synchronized
//!   example pairs, searches rewrite-equivalent pairs in priority order and
//!   ranks candidate lenses by an information-theoretic cost,
//! - concrete syntax for definition files driving all of the above.

pub mod automata;
pub mod dnf;
pub mod dnflens;
pub mod env;
pub mod error;
pub mod lens;
pub mod rational;
pub mod regex;
pub mod sre;
pub mod synth;
pub mod syntax;

pub use env::DefEnv;
pub use error::{Error, Result};
pub use rational::{Prob, Rat};
pub use regex::{ParseTree, Regex};
pub use sre::Sre;
