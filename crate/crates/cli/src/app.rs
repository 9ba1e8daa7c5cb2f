//! Drivers behind the command-line interface: processing definition files,
//! running tests, synthesizing directives, applying lenses, and reporting
//! entropies.

use std::fmt::Write as _;
use std::time::Duration;
use symlens::dnf::dnf_entropy;
use symlens::env::DefEnv;
use symlens::error::Error;
use symlens::lens::{Library, TypedLens};
use symlens::sre::{entropy, sample_with_surprisal, Sre};
use symlens::synth::{register_library, synth, SynthLimits, SynthTask};
use symlens::syntax::{
    self, parse_spec_file, print_lens, CostAnnotation, LensBody, LensOp, SpecFile, Statement,
};

/// Outcomes are classified for exit codes: 0 success, 1 user error,
/// 2 no lens / timeout, 3 internal invariant violation.
#[derive(Debug)]
pub enum CliError {
    User(String),
    NoLens(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::User(_) => 1,
            CliError::NoLens(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::User(m) | CliError::NoLens(m) | CliError::Internal(m) => m,
        }
    }
}

fn user<E: std::fmt::Display>(e: E) -> CliError {
    CliError::User(e.to_string())
}

fn classify(e: Error) -> CliError {
    match e {
        Error::NoLens => CliError::NoLens(e.to_string()),
        Error::InvalidDnfLens(_) | Error::UnrealizableMapping(_) | Error::BadPath => {
            CliError::Internal(e.to_string())
        }
        other => CliError::User(other.to_string()),
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SynthFlags {
    pub timeout_secs: Option<u64>,
    pub max_expansions: Option<usize>,
    pub seed: Option<u64>,
    pub verbose: bool,
}

impl Default for SynthFlags {
    fn default() -> Self {
        SynthFlags {
            timeout_secs: None,
            max_expansions: None,
            seed: None,
            verbose: false,
        }
    }
}

impl SynthFlags {
    fn limits(&self) -> SynthLimits {
        let mut l = SynthLimits::default();
        if let Some(t) = self.timeout_secs {
            l.wall_clock = Duration::from_secs(t);
        }
        if let Some(m) = self.max_expansions {
            l.max_expansions = m;
        }
        if let Some(s) = self.seed {
            l.rng_seed = s;
        }
        l
    }
}

/// A processed definition file: environment, library of named lenses, and
/// the statements (with synth directives resolved when requested).
pub struct Session {
    pub env: DefEnv,
    pub library: Library,
    pub file: SpecFile,
    /// For each resolved directive: (name, cost, search distance).
    pub synthesized: Vec<(String, f64, usize)>,
    pub failures: Vec<String>,
}

fn check_definition_unambiguous(name: &str, sre: &Sre, env: &DefEnv) -> Result<(), CliError> {
    let r = sre.strip();
    let bound = r.default_ambiguity_bound();
    match r.check_unambiguous(env, bound) {
        Ok(None) => Ok(()),
        Ok(Some(w)) => Err(CliError::User(format!(
            "definition `{name}` is ambiguous: {w:?} parses in more than one way"
        ))),
        Err(e) => Err(user(format!("definition `{name}`: {e}"))),
    }
}

/// Walks a file in order, defining expressions and lenses. Synth directives
/// are resolved when `resolve_synth` is set (otherwise they are an error).
/// Later statements see earlier lenses as library entries.
pub fn process_file(
    text: &str,
    resolve_synth: bool,
    flags: &SynthFlags,
) -> Result<Session, CliError> {
    let file = parse_spec_file(text).map_err(user)?;
    let mut env = DefEnv::new();
    let mut library = Library::new();
    let mut resolved_file = SpecFile::default();
    let mut synthesized = Vec::new();
    let mut failures = Vec::new();

    for stmt in &file.statements {
        match stmt {
            Statement::ExprDef { name, sre } => {
                check_definition_unambiguous(name, sre, &env)?;
                env.define(name, sre.clone()).map_err(user)?;
                resolved_file.statements.push(stmt.clone());
            }
            Statement::LensDef {
                name,
                src,
                tgt,
                body,
                annotation,
            } => match body {
                LensBody::Expr(lens) => {
                    register_library(&mut library, name, lens.clone(), src, tgt, *annotation, &env)
                        .map_err(classify)?;
                    let entry = library.get(name).expect("just registered");
                    // The declared type must agree with the principal type.
                    let src_ok =
                        symlens::automata::equivalent(&entry.typed.src, &src.strip(), &env)
                            .map_err(user)?;
                    let tgt_ok =
                        symlens::automata::equivalent(&entry.typed.tgt, &tgt.strip(), &env)
                            .map_err(user)?;
                    if !src_ok || !tgt_ok {
                        return Err(CliError::User(format!(
                            "lens `{name}` has type {} <=> {}, annotation says {} <=> {}",
                            entry.typed.src,
                            entry.typed.tgt,
                            src.strip(),
                            tgt.strip()
                        )));
                    }
                    resolved_file.statements.push(stmt.clone());
                }
                LensBody::Synth { examples } => {
                    if !resolve_synth {
                        return Err(CliError::User(format!(
                            "lens `{name}` is an unresolved synth directive; run `symlens synth` first"
                        )));
                    }
                    let mut task = SynthTask::new(src.clone(), tgt.clone(), &env, &library);
                    task.examples = examples.clone();
                    task.limits = flags.limits();
                    task.verbose = flags.verbose;
                    match synth(&task) {
                        Ok(result) => {
                            register_library(
                                &mut library,
                                name,
                                result.lens.clone(),
                                src,
                                tgt,
                                None,
                                &env,
                            )
                            .map_err(classify)?;
                            synthesized.push((name.clone(), result.cost, result.distance));
                            resolved_file.statements.push(Statement::LensDef {
                                name: name.clone(),
                                src: src.clone(),
                                tgt: tgt.clone(),
                                body: LensBody::Expr(result.lens),
                                annotation: None,
                            });
                        }
                        Err(Error::NoLens) => {
                            failures.push(format!("{name}: no satisfying lens found"));
                            resolved_file.statements.push(stmt.clone());
                        }
                        Err(e) => return Err(classify(e)),
                    }
                }
            },
            Statement::Test { .. } => {
                resolved_file.statements.push(stmt.clone());
            }
        }
    }
    Ok(Session {
        env,
        library,
        file: resolved_file,
        synthesized,
        failures,
    })
}

fn eval_op(
    lens: &TypedLens,
    op: LensOp,
    inputs: &[String],
    env: &DefEnv,
) -> symlens::error::Result<String> {
    match op {
        LensOp::CreateR => lens.create_r(&inputs[0], env),
        LensOp::CreateL => lens.create_l(&inputs[0], env),
        LensOp::PutR => lens.put_r(&inputs[0], &inputs[1], env),
        LensOp::PutL => lens.put_l(&inputs[0], &inputs[1], env),
    }
}

#[derive(Debug, Default)]
pub struct CheckReport {
    pub tests_run: usize,
    pub failures: Vec<String>,
}

/// Parses, typechecks, runs unambiguity checks, and evaluates every test
/// statement.
pub fn run_check(text: &str) -> Result<CheckReport, CliError> {
    let session = process_file(text, false, &SynthFlags::default())?;
    let mut report = CheckReport::default();
    for stmt in &session.file.statements {
        if let Statement::Test {
            op,
            lens,
            inputs,
            expected,
            line,
        } = stmt
        {
            report.tests_run += 1;
            let entry = session.library.get(lens).ok_or_else(|| {
                CliError::User(format!("line {line}: unknown lens `{lens}`"))
            })?;
            match eval_op(&entry.typed, *op, inputs, &session.env) {
                Ok(actual) if actual == *expected => {}
                Ok(actual) => report.failures.push(format!(
                    "line {line}: {} {lens}: expected {expected:?}, got {actual:?}",
                    op.name()
                )),
                Err(e) => report.failures.push(format!(
                    "line {line}: {} {lens}: error {e}",
                    op.name()
                )),
            }
        }
    }
    Ok(report)
}

fn print_statement(out: &mut String, stmt: &Statement) {
    match stmt {
        Statement::ExprDef { name, sre } => {
            let _ = writeln!(out, "let {name} = {sre} ;");
        }
        Statement::LensDef {
            name,
            src,
            tgt,
            body,
            annotation,
        } => match body {
            LensBody::Expr(l) => {
                let suffix = match annotation {
                    Some(CostAnnotation::Bijective) => " bijective".to_string(),
                    Some(CostAnnotation::Cost(c)) => format!(" cost {{{c}}}"),
                    None => String::new(),
                };
                let _ = writeln!(
                    out,
                    "let {name} : {src} <=> {tgt} = {}{suffix} ;",
                    print_lens(l)
                );
            }
            LensBody::Synth { examples } => {
                let exs: Vec<String> = examples
                    .iter()
                    .map(|(l, r)| format!("({}, {})", syntax::quote(l), syntax::quote(r)))
                    .collect();
                let using = if exs.is_empty() {
                    String::new()
                } else {
                    format!(" using ( {} )", exs.join(", "))
                };
                let _ = writeln!(out, "let {name} : {src} <=> {tgt} = synth{using} ;");
            }
        },
        Statement::Test {
            op,
            lens,
            inputs,
            expected,
            ..
        } => {
            let ins: Vec<String> = inputs.iter().map(|i| syntax::quote(i)).collect();
            let _ = writeln!(
                out,
                "test {} {lens} {} = {} ;",
                op.name(),
                ins.join(" "),
                syntax::quote(expected)
            );
        }
    }
}

pub struct SynthReport {
    pub output: String,
    pub synthesized: Vec<(String, f64, usize)>,
    pub failures: Vec<String>,
}

/// Resolves every synth directive and reprints the file with the
/// synthesized lenses inlined (cost and search distance as comments).
pub fn run_synth(text: &str, flags: &SynthFlags) -> Result<SynthReport, CliError> {
    let session = process_file(text, true, flags)?;
    let mut out = String::new();
    let mut synth_iter = session.synthesized.iter();
    for stmt in &session.file.statements {
        if let Statement::LensDef {
            name,
            body: LensBody::Expr(_),
            ..
        } = stmt
        {
            if let Some((sname, cost, distance)) =
                session.synthesized.iter().find(|(n, _, _)| n == name)
            {
                // Only annotate lenses this run produced.
                if synth_iter.clone().any(|(n, _, _)| n == sname) {
                    let _ = writeln!(out, "# cost: {cost:.6}, distance: {distance}");
                    synth_iter.next();
                }
            }
        }
        print_statement(&mut out, stmt);
    }
    Ok(SynthReport {
        output: out,
        synthesized: session.synthesized,
        failures: session.failures,
    })
}

/// Applies a named lens to whole-file strings.
pub fn run_apply(
    text: &str,
    lens_name: &str,
    op: LensOp,
    input: &str,
    old: Option<&str>,
    flags: &SynthFlags,
) -> Result<String, CliError> {
    let session = process_file(text, true, flags)?;
    let entry = session
        .library
        .get(lens_name)
        .ok_or_else(|| CliError::User(format!("unknown lens `{lens_name}`")))?;
    let mut inputs = vec![input.to_string()];
    if op.arity() == 2 {
        let old = old.ok_or_else(|| {
            CliError::User(format!("{} needs --old with the other side's current file", op.name()))
        })?;
        inputs.push(old.to_string());
    }
    eval_op(&entry.typed, op, &inputs, &session.env).map_err(|e| match e {
        Error::NoParse | Error::AmbiguousParse { .. } => {
            let side = match op {
                LensOp::CreateR | LensOp::PutR => &entry.typed.src,
                LensOp::CreateL | LensOp::PutL => &entry.typed.tgt,
            };
            let pos = symlens::automata::longest_prefix_match(side, &session.env, input)
                .unwrap_or(0);
            CliError::User(format!(
                "input does not match {side}: longest matched prefix ends at character {pos}"
            ))
        }
        other => classify(other),
    })
}

pub struct EntropyReport {
    pub bits: f64,
    pub sampled: Option<f64>,
}

/// Prints the syntactic entropy of a named expression, optionally
/// cross-checked by the mean surprisal of sampled strings.
pub fn run_entropy(
    text: &str,
    name: &str,
    sample_count: Option<usize>,
    seed: u64,
) -> Result<EntropyReport, CliError> {
    let session = process_file(text, false, &SynthFlags::default())?;
    let sre = session
        .env
        .sre_of(name)
        .map_err(|_| CliError::User(format!("unknown definition `{name}`")))?;
    let bits = entropy(sre, &session.env).map_err(user)?;
    // The normal form must agree; disagreement is an internal error.
    let d = session.env.dnf_of(name).map_err(user)?;
    let transported = dnf_entropy(d).map_err(user)?;
    if (bits - transported).abs() > 1e-6 {
        return Err(CliError::Internal(format!(
            "entropy mismatch between syntax ({bits}) and normal form ({transported})"
        )));
    }
    let sampled = match sample_count {
        None => None,
        Some(n) => {
            let mut total = 0.0;
            for k in 0..n {
                let (_, surprisal) =
                    sample_with_surprisal(sre, &session.env, seed.wrapping_add(k as u64))
                        .map_err(user)?;
                total += surprisal;
            }
            Some(total / n.max(1) as f64)
        }
    };
    Ok(EntropyReport { bits, sampled })
}

#[cfg(test)]
mod tests {
    use super::*;

    const EMPLOYEE_MINI: &str = r#"
        let vowel = "a" | "e" ;
        let word = ("J" | "K") vowel* ;
        let d : word <=> word = id(word) ;
        test putR d "Ja" "Ke" = "Ja" ;
        test createL d "Kae" = "Kae" ;
    "#;

    #[test]
    fn check_passes() {
        let report = run_check(EMPLOYEE_MINI).unwrap();
        assert_eq!(report.tests_run, 2);
        assert!(report.failures.is_empty(), "{:?}", report.failures);
    }

    #[test]
    fn check_reports_failure_with_expected_and_actual() {
        let text = r#"
            let w = "x" ;
            let d : w <=> w = id(w) ;
            test createR d "x" = "y" ;
        "#;
        let report = run_check(text).unwrap();
        assert_eq!(report.failures.len(), 1);
        assert!(report.failures[0].contains("expected \"y\""), "{}", report.failures[0]);
        assert!(report.failures[0].contains("got \"x\""));
    }

    #[test]
    fn check_rejects_unknown_name() {
        let err = run_check("let d : nope <=> nope = id(nope) ;").unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn empty_file_passes() {
        let report = run_check("").unwrap();
        assert_eq!(report.tests_run, 0);
    }

    #[test]
    fn synth_round_trip() {
        let text = r#"
            let word = ("J" | "K") ("a" | "e")* ;
            let l : word <=> word = synth ;
            test putR l "Ja" "Ke" = "Ja" ;
        "#;
        let flags = SynthFlags::default();
        let report = run_synth(text, &flags).unwrap();
        assert!(report.failures.is_empty());
        assert_eq!(report.synthesized.len(), 1);
        assert_eq!(report.synthesized[0].1, 0.0, "identity task is free");
        assert!(report.output.contains("# cost: 0.000000, distance: 0"));
        // The output re-parses and its tests pass.
        let check = run_check(&report.output).unwrap();
        assert!(check.failures.is_empty(), "{:?}", check.failures);
    }

    #[test]
    fn apply_round_trip() {
        let out = run_apply(
            EMPLOYEE_MINI,
            "d",
            LensOp::CreateR,
            "Jae",
            None,
            &SynthFlags::default(),
        )
        .unwrap();
        assert_eq!(out, "Jae");
        let err = run_apply(
            EMPLOYEE_MINI,
            "d",
            LensOp::PutR,
            "Ja",
            None,
            &SynthFlags::default(),
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 1);
        let err2 = run_apply(
            EMPLOYEE_MINI,
            "d",
            LensOp::CreateR,
            "Jzz",
            None,
            &SynthFlags::default(),
        )
        .unwrap_err();
        assert!(err2.message().contains("character 1"), "{}", err2.message());
    }

    #[test]
    fn entropy_values() {
        let text = r#"
            let bit = "x" | "y" ;
            let fixed = "constant" ;
            let reps = "a"*{4/5} ;
        "#;
        let r = run_entropy(text, "bit", None, 0).unwrap();
        assert!((r.bits - 1.0).abs() < 1e-9);
        let r2 = run_entropy(text, "fixed", None, 0).unwrap();
        assert_eq!(r2.bits, 0.0);
        let r3 = run_entropy(text, "reps", Some(20_000), 7).unwrap();
        assert!((r3.bits - 3.609640).abs() < 1e-5);
        let sampled = r3.sampled.unwrap();
        assert!(
            (sampled - r3.bits).abs() / r3.bits < 0.05,
            "sampled {sampled} vs {0}",
            r3.bits
        );
    }
}
