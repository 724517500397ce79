//! Whole programs: toplevel forms, sessions, the report of a run, and the
//! interactive loop.

use std::io::{self, BufRead, Write};
use std::sync::Arc;

use crate::compile::CompiledMatch;
use crate::error::{Error, EvalError, StaticError};
use crate::eval::{evaluate, Env, Expr, ExprParser, Lambda};
use crate::pattern::{ExpanderDef, ExpanderRule, StaticEnv, DEFAULT_FUEL};
use crate::sexpr::{print_value, read_syntax, values_equal, SourceSpan, Symbol, Syntax, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Options {
    pub dump_ir: bool,
    pub trace: bool,
    pub fuel: usize,
}

impl Default for Options {
    fn default() -> Self {
        Options { dump_ir: false, trace: false, fuel: DEFAULT_FUEL }
    }
}

/// A parsed toplevel form. Struct and expander definitions take effect while
/// parsing, so they leave nothing to run.
#[derive(Debug)]
pub enum Toplevel {
    Define(Symbol, Expr),
    Expression(Expr),
    CheckEqual { actual: Expr, expected: Expr, source: String },
    Declaration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub passed: bool,
    pub source: String,
    pub actual: String,
    pub expected: String,
}

#[derive(Debug, Default)]
pub struct RunReport {
    pub outputs: Vec<String>,
    pub checks: Vec<CheckResult>,
    pub error: Option<Error>,
}

impl RunReport {
    /// 0 when nothing failed, 2 for reader and static errors, 1 for runtime
    /// errors and failed checks.
    pub fn exit_code(&self) -> i32 {
        match &self.error {
            Some(e) if e.is_static() => 2,
            Some(_) => 1,
            None if self.checks.iter().any(|c| !c.passed) => 1,
            None => 0,
        }
    }
}

fn show(v: &Value) -> String {
    print_value(v).unwrap_or_else(|_| v.to_string())
}

/// `kind: message`, as the CLI reports errors.
pub fn describe_error(e: &Error) -> String {
    format!("{}: {}", e.kind(), e)
}

fn malformed(span: SourceSpan, message: impl Into<String>) -> StaticError {
    StaticError::MalformedExpr { span, message: message.into() }
}

/// Registries and global environment shared by the forms of one program or
/// REPL session.
pub struct Session {
    pub statics: StaticEnv,
    pub env: Env,
    pub options: Options,
    /// Every match compiled so far, numbered in source order.
    pub matches: Vec<Arc<CompiledMatch>>,
}

impl Session {
    pub fn new(options: Options) -> Self {
        let env = Env::base();
        env.set_tracing(options.trace);
        Session { statics: StaticEnv::default(), env, options, matches: Vec::new() }
    }

    /// Parses one toplevel form, registering structs and expanders as a
    /// side effect. Returns the form and the matches compiled inside it.
    pub fn parse_form(&mut self, stx: &Syntax) -> Result<(Toplevel, Vec<Arc<CompiledMatch>>), StaticError> {
        let head = stx.head_symbol().map(|s| s.as_str().to_string());
        let items = stx.as_list().unwrap_or(&[]);
        let mut parser = ExprParser::new(&self.statics, self.options.fuel);
        let form = match head.as_deref() {
            Some("define") => {
                if items.len() != 3 {
                    return Err(malformed(stx.span, "expected (define name expr) or (define (name param ...) body)"));
                }
                if let Some(name) = items[1].as_symbol() {
                    Toplevel::Define(name.clone(), parser.parse(&items[2])?)
                } else {
                    let sig = items[1]
                        .as_list()
                        .filter(|s| !s.is_empty())
                        .ok_or_else(|| malformed(items[1].span, "expected a name or (name param ...)"))?;
                    let name = sig[0].as_symbol().ok_or_else(|| malformed(sig[0].span, "function name must be a symbol"))?;
                    let params = parser.params(&Syntax { kind: crate::sexpr::SyntaxKind::List { items: sig[1..].to_vec(), tail: None }, span: items[1].span })?;
                    let body = parser.parse(&items[2])?;
                    Toplevel::Define(name.clone(), Expr::Lambda(Arc::new(Lambda { name: Some(name.clone()), params, body })))
                }
            }
            Some("struct") => {
                let name = items.get(1).and_then(Syntax::as_symbol);
                let fields = items.get(2).and_then(Syntax::as_list);
                let (Some(name), Some(fields), 3) = (name, fields, items.len()) else {
                    return Err(malformed(stx.span, "expected (struct name (field ...))"));
                };
                let fields = fields
                    .iter()
                    .map(|f| f.as_symbol().cloned().ok_or_else(|| malformed(f.span, "field name must be a symbol")))
                    .collect::<Result<Vec<_>, _>>()?;
                drop(parser);
                self.statics.register_struct(name.clone(), fields, stx.span, &self.env)?;
                return Ok((Toplevel::Declaration, Vec::new()));
            }
            Some("define-match-expander") => {
                let name = items
                    .get(1)
                    .and_then(Syntax::as_symbol)
                    .ok_or_else(|| malformed(stx.span, "expected (define-match-expander name [use template] ...)"))?
                    .clone();
                let mut rules = Vec::new();
                for rule in &items[2..] {
                    let parts = rule
                        .as_list()
                        .filter(|p| p.len() == 2)
                        .ok_or_else(|| StaticError::BadTemplate { span: rule.span, message: "rule must be [use template]".into() })?;
                    rules.push(ExpanderRule { pattern: parts[0].to_value(), template: parts[1].to_value() });
                }
                if rules.is_empty() {
                    return Err(StaticError::BadTemplate { span: stx.span, message: "expander has no rules".into() });
                }
                drop(parser);
                let def = ExpanderDef::from_rules(name, rules, stx.span)?;
                self.statics.register_expander(def, stx.span)?;
                return Ok((Toplevel::Declaration, Vec::new()));
            }
            Some("check-equal?") => {
                if items.len() != 3 {
                    return Err(malformed(stx.span, "expected (check-equal? actual expected)"));
                }
                let actual = parser.parse(&items[1])?;
                let expected = parser.parse(&items[2])?;
                Toplevel::CheckEqual { actual, expected, source: stx.to_value().to_string() }
            }
            _ => Toplevel::Expression(parser.parse(stx)?),
        };
        let compiled = std::mem::take(&mut parser.compiled);
        self.matches.extend(compiled.iter().cloned());
        Ok((form, compiled))
    }

    /// Runs a parsed form. Returns the printed value of an expression form.
    pub fn run_form(&mut self, form: &Toplevel, report: &mut RunReport) -> Result<(), EvalError> {
        let result = self.run_form_inner(form, report);
        for trace in self.env.take_traces() {
            report.outputs.push(trace.trim_end().to_string());
        }
        let line = result?;
        if let Some(line) = line {
            report.outputs.push(line);
        }
        Ok(())
    }

    fn run_form_inner(&mut self, form: &Toplevel, report: &mut RunReport) -> Result<Option<String>, EvalError> {
        match form {
            Toplevel::Define(name, expr) => {
                let v = evaluate(expr, &self.env)?;
                self.env.define_global(name.clone(), v);
                Ok(None)
            }
            Toplevel::Expression(expr) => Ok(Some(show(&evaluate(expr, &self.env)?))),
            Toplevel::CheckEqual { actual, expected, source } => {
                let a = evaluate(actual, &self.env)?;
                let e = evaluate(expected, &self.env)?;
                report.checks.push(CheckResult {
                    passed: values_equal(&a, &e),
                    source: source.clone(),
                    actual: show(&a),
                    expected: show(&e),
                });
                Ok(None)
            }
            Toplevel::Declaration => Ok(None),
        }
    }

    /// Reads and runs every form of `text` in order, stopping at the first
    /// error.
    pub fn run_text(&mut self, text: &str, report: &mut RunReport) {
        if let Err(e) = self.run_text_inner(text, report) {
            report.error = Some(e);
        }
    }

    fn run_text_inner(&mut self, text: &str, report: &mut RunReport) -> Result<(), Error> {
        for stx in read_syntax(text)? {
            let (form, compiled) = self.parse_form(&stx)?;
            if self.options.dump_ir {
                let first = self.matches.len() - compiled.len();
                for (i, cm) in compiled.iter().enumerate() {
                    report.outputs.push(dump_header(first + i, cm));
                    report.outputs.push(cm.dump().trim_end().to_string());
                }
            }
            self.run_form(&form, report)?;
        }
        Ok(())
    }
}

fn dump_header(index: usize, cm: &CompiledMatch) -> String {
    format!(";; match {}: (match {} ...)", index, cm.scrutinee)
}

/// Runs a whole program.
pub fn run_program(text: &str, options: Options) -> RunReport {
    let mut report = RunReport::default();
    Session::new(options).run_text(text, &mut report);
    report
}

/// IR dumps of every match in the program (or only match `index`), without
/// running anything.
pub fn dump_ir(text: &str, index: Option<usize>, fuel: usize) -> Result<String, Error> {
    let mut session = Session::new(Options { fuel, ..Options::default() });
    for stx in read_syntax(text)? {
        session.parse_form(&stx)?;
    }
    let mut out = String::new();
    for (i, cm) in session.matches.iter().enumerate() {
        if index.is_some_and(|k| k != i) {
            continue;
        }
        out.push_str(&dump_header(i, cm));
        out.push('\n');
        out.push_str(&cm.dump());
    }
    Ok(out)
}

/// Reads one line per entry and runs it in a persistent session. Errors are
/// reported on `err` and the session goes on.
pub fn repl(input: impl BufRead, out: &mut impl Write, err: &mut impl Write, options: Options, prompt: bool) -> io::Result<()> {
    let mut session = Session::new(options);
    if prompt {
        write!(out, "> ")?;
        out.flush()?;
    }
    for line in input.lines() {
        let line = line?;
        let mut report = RunReport::default();
        session.run_text(&line, &mut report);
        for o in &report.outputs {
            writeln!(out, "{}", o)?;
        }
        for c in report.checks.iter().filter(|c| !c.passed) {
            writeln!(err, "check failed: {}: got {}, expected {}", c.source, c.actual, c.expected)?;
        }
        if let Some(e) = &report.error {
            writeln!(err, "{}", describe_error(e))?;
        }
        if prompt {
            write!(out, "> ")?;
            out.flush()?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MAGNITUDE: &str = "
        (define (magnitude v)
          (match v
            [(list 'cart x y) (sqrt (+ (sqr x) (sqr y)))]
            [(list 'polar r theta) r]))
        (check-equal? (magnitude '(cart 3 4)) 5)
    ";

    #[test]
    fn magnitude_passes() {
        let r = run_program(MAGNITUDE, Options::default());
        assert!(r.error.is_none(), "{:?}", r.error);
        assert_eq!(r.checks.len(), 1);
        assert!(r.checks[0].passed);
        assert_eq!(r.exit_code(), 0);
    }

    #[test]
    fn exit_codes() {
        let r = run_program("(match 5 [(? string?) 1])", Options::default());
        assert_eq!(r.error.as_ref().map(Error::kind), Some("MatchFailure"));
        assert_eq!(r.exit_code(), 1);
        let r = run_program("(match 5 [(frob x) 1])", Options::default());
        assert_eq!(r.error.as_ref().map(Error::kind), Some("UnknownPatternHead"));
        assert_eq!(r.exit_code(), 2);
        let r = run_program("(check-equal? 1 2)", Options::default());
        assert_eq!(r.exit_code(), 1);
        let r = run_program("(+ 1", Options::default());
        assert_eq!(r.exit_code(), 2);
    }

    #[test]
    fn forms_see_only_earlier_definitions() {
        let r = run_program("(f 1) (define (f x) x)", Options::default());
        assert_eq!(r.error.as_ref().map(Error::kind), Some("UnboundVariable"));
        let r = run_program("(match 1 [(num) 1]) (define-match-expander num [(_) (? number?)])", Options::default());
        assert_eq!(r.error.as_ref().map(Error::kind), Some("UnknownPatternHead"));
    }

    #[test]
    fn expression_values_print() {
        let r = run_program("(+ 1 2) (define x 4) (list x 'a \"s\")", Options::default());
        assert_eq!(r.outputs, vec!["3", "(4 a \"s\")"]);
    }

    #[test]
    fn dump_and_trace_options() {
        let opts = Options { dump_ir: true, trace: true, ..Options::default() };
        let r = run_program("(match 5 [(and (? number?) x) x] [_ 'no])", opts);
        let text = r.outputs.join("\n");
        assert!(text.contains("#0 TestPred"), "{text}");
        assert!(text.contains("pred-apply @r"), "{text}");
        assert!(text.ends_with("\n5"));
    }

    #[test]
    fn dump_ir_selects_matches() {
        let src = "(match 1 [_ 1]) (match 2 [x x])";
        let all = dump_ir(src, None, DEFAULT_FUEL).unwrap();
        assert_eq!(all.matches(";; match").count(), 2);
        let one = dump_ir(src, Some(1), DEFAULT_FUEL).unwrap();
        assert!(one.starts_with(";; match 1"));
        assert!(one.contains("#0 Bind x @r"));
    }

    #[test]
    fn repl_session() {
        let input = "(struct point (x y))\n(match (make-point 1 2) [(point a b) a])\n(\n(+ 1 2)\n";
        let mut out = Vec::new();
        let mut err = Vec::new();
        repl(input.as_bytes(), &mut out, &mut err, Options::default(), false).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "1\n3\n");
        assert!(String::from_utf8(err).unwrap().starts_with("UnbalancedDelimiter"));
    }
}
