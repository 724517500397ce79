//! The expression sublanguage: right-hand sides, `?` predicate expressions
//! and `app` transformer expressions.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, RwLock};

use crate::compile::{compile_match, CompiledMatch};
use crate::error::{EvalError, StaticError};
use crate::pattern::{parse_pattern_with, StaticEnv, DEFAULT_FUEL};
use crate::runtime::{run_clause_rhs, run_match, trace_text};
use crate::sexpr::{values_equal, SourceSpan, Symbol, Syntax, SyntaxKind, Value};

#[derive(Debug, Clone)]
pub enum Expr {
    Literal(Value),
    Var(Symbol),
    Lambda(Arc<Lambda>),
    Apply(Box<Expr>, Vec<Expr>),
    Let(Vec<(Symbol, Expr)>, Box<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    Quote(Value),
    Match(Arc<CompiledMatch>),
}

// Prints the expression back in surface syntax (used by IR dumps).
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn seq(f: &mut fmt::Formatter<'_>, items: &[Expr]) -> fmt::Result {
            for e in items {
                write!(f, " {}", e)?;
            }
            Ok(())
        }
        match self {
            Expr::Literal(v) => write!(f, "{}", v),
            Expr::Var(s) => write!(f, "{}", s),
            Expr::Quote(v) => write!(f, "'{}", v),
            Expr::Lambda(l) => {
                let params: Vec<&str> = l.params.iter().map(Symbol::as_str).collect();
                write!(f, "(lambda ({}) {})", params.join(" "), l.body)
            }
            Expr::Apply(func, args) => {
                write!(f, "({}", func)?;
                seq(f, args)?;
                f.write_str(")")
            }
            Expr::Let(bindings, body) => {
                f.write_str("(let (")?;
                for (i, (name, e)) in bindings.iter().enumerate() {
                    write!(f, "{}[{} {}]", if i > 0 { " " } else { "" }, name, e)?;
                }
                write!(f, ") {})", body)
            }
            Expr::If(c, t, e) => write!(f, "(if {} {} {})", c, t, e),
            Expr::Match(m) => write!(f, "(match {} ...)", m.scrutinee),
        }
    }
}

#[derive(Debug)]
pub struct Lambda {
    pub name: Option<Symbol>,
    pub params: Vec<Symbol>,
    pub body: Expr,
}

// ---------------------------------------------------------------------------
// Environments

struct Frame {
    vars: Vec<(Symbol, Value)>,
    parent: Option<Arc<Frame>>,
}

/// Toplevel definitions, shared by every environment of one session.
#[derive(Default)]
pub struct Globals {
    table: RwLock<HashMap<Symbol, Value>>,
    /// Collected match traces, when tracing is on.
    trace: Mutex<Option<Vec<String>>>,
}

/// Lexical environment: immutable frames over a shared global table.
#[derive(Clone)]
pub struct Env {
    frame: Option<Arc<Frame>>,
    globals: Arc<Globals>,
}

impl Env {
    /// An environment with no bindings at all.
    pub fn empty() -> Env {
        Env { frame: None, globals: Arc::new(Globals::default()) }
    }

    /// A fresh environment holding the builtin procedures.
    pub fn base() -> Env {
        let env = Env::empty();
        crate::builtins::install(&env);
        env
    }

    pub fn lookup(&self, name: &Symbol) -> Option<Value> {
        let mut frame = self.frame.as_deref();
        while let Some(f) = frame {
            if let Some((_, v)) = f.vars.iter().rev().find(|(n, _)| n == name) {
                return Some(v.clone());
            }
            frame = f.parent.as_deref();
        }
        self.globals.table.read().unwrap().get(name).cloned()
    }

    /// Returns a new environment with `vars` in an innermost frame.
    pub fn extend(&self, vars: Vec<(Symbol, Value)>) -> Env {
        if vars.is_empty() {
            return self.clone();
        }
        Env {
            frame: Some(Arc::new(Frame { vars, parent: self.frame.clone() })),
            globals: self.globals.clone(),
        }
    }

    /// Adds or replaces a toplevel definition.
    pub fn define_global(&self, name: Symbol, value: Value) {
        self.globals.table.write().unwrap().insert(name, value);
    }

    /// Turns collection of match traces on or off for every environment
    /// sharing these globals.
    pub fn set_tracing(&self, on: bool) {
        *self.globals.trace.lock().unwrap() = if on { Some(Vec::new()) } else { None };
    }

    pub fn tracing(&self) -> bool {
        self.globals.trace.lock().unwrap().is_some()
    }

    /// Drains the traces collected so far.
    pub fn take_traces(&self) -> Vec<String> {
        self.globals.trace.lock().unwrap().as_mut().map(std::mem::take).unwrap_or_default()
    }

    fn push_trace(&self, text: String) {
        if let Some(t) = self.globals.trace.lock().unwrap().as_mut() {
            t.push(text);
        }
    }

    pub fn define_builtin<F>(&self, name: &str, arity: Arity, func: F)
    where
        F: Fn(&[Value]) -> Result<Value, EvalError> + Send + Sync + 'static,
    {
        self.define_global(Symbol::new(name), Builtin::new(name, arity, func));
    }
}

impl fmt::Debug for Env {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("#<env>")
    }
}

// ---------------------------------------------------------------------------
// Procedures

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arity {
    pub min: usize,
    pub max: Option<usize>,
}

impl Arity {
    pub const fn exactly(n: usize) -> Arity {
        Arity { min: n, max: Some(n) }
    }

    pub const fn at_least(n: usize) -> Arity {
        Arity { min: n, max: None }
    }

    pub const fn range(min: usize, max: usize) -> Arity {
        Arity { min, max: Some(max) }
    }

    pub fn accepts(&self, n: usize) -> bool {
        n >= self.min && self.max.is_none_or(|m| n <= m)
    }
}

impl fmt::Display for Arity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.max {
            Some(m) if m == self.min => write!(f, "{}", m),
            Some(m) => write!(f, "{} to {}", self.min, m),
            None => write!(f, "at least {}", self.min),
        }
    }
}

type NativeFn = dyn Fn(&[Value]) -> Result<Value, EvalError> + Send + Sync;

pub struct Builtin {
    pub name: String,
    pub arity: Arity,
    func: Box<NativeFn>,
}

impl Builtin {
    #[allow(clippy::new_ret_no_self)]
    pub fn new<F>(name: &str, arity: Arity, func: F) -> Value
    where
        F: Fn(&[Value]) -> Result<Value, EvalError> + Send + Sync + 'static,
    {
        Value::Callable(Callable::Builtin(Arc::new(Builtin {
            name: name.to_string(),
            arity,
            func: Box::new(func),
        })))
    }
}

pub struct Closure {
    lambda: Arc<Lambda>,
    env: Env,
}

#[derive(Clone)]
pub enum Callable {
    Builtin(Arc<Builtin>),
    Closure(Arc<Closure>),
}

impl Callable {
    /// Identity comparison.
    pub fn same(&self, other: &Callable) -> bool {
        match (self, other) {
            (Callable::Builtin(a), Callable::Builtin(b)) => Arc::ptr_eq(a, b),
            (Callable::Closure(a), Callable::Closure(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Callable::Builtin(b) => b.name.clone(),
            Callable::Closure(c) => c
                .lambda
                .name
                .as_ref()
                .map_or_else(|| "lambda".to_string(), |n| n.to_string()),
        }
    }
}

impl fmt::Debug for Callable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#<procedure:{}>", self.name())
    }
}

pub fn apply_value(func: &Value, args: &[Value]) -> Result<Value, EvalError> {
    match func {
        Value::Callable(Callable::Builtin(b)) => {
            if !b.arity.accepts(args.len()) {
                return Err(EvalError::ArityError {
                    name: b.name.clone(),
                    expected: b.arity.to_string(),
                    found: args.len(),
                });
            }
            (b.func)(args)
        }
        Value::Callable(Callable::Closure(c)) => {
            let lambda = &c.lambda;
            if lambda.params.len() != args.len() {
                return Err(EvalError::ArityError {
                    name: Callable::Closure(c.clone()).name(),
                    expected: lambda.params.len().to_string(),
                    found: args.len(),
                });
            }
            let frame = lambda.params.iter().cloned().zip(args.iter().cloned()).collect();
            evaluate(&lambda.body, &c.env.extend(frame))
        }
        other => Err(EvalError::NotCallable(other.to_string())),
    }
}

pub fn evaluate(expr: &Expr, env: &Env) -> Result<Value, EvalError> {
    match expr {
        Expr::Literal(v) | Expr::Quote(v) => Ok(v.clone()),
        Expr::Var(name) => env.lookup(name).ok_or_else(|| EvalError::UnboundVariable(name.clone())),
        Expr::Lambda(lambda) => Ok(Value::Callable(Callable::Closure(Arc::new(Closure {
            lambda: lambda.clone(),
            env: env.clone(),
        })))),
        Expr::Apply(func, args) => {
            let func = evaluate(func, env)?;
            let args = args.iter().map(|a| evaluate(a, env)).collect::<Result<Vec<_>, _>>()?;
            apply_value(&func, &args)
        }
        Expr::Let(bindings, body) => {
            let mut frame = Vec::with_capacity(bindings.len());
            for (name, e) in bindings {
                frame.push((name.clone(), evaluate(e, env)?));
            }
            evaluate(body, &env.extend(frame))
        }
        Expr::If(test, then, otherwise) => {
            if evaluate(test, env)?.is_true() {
                evaluate(then, env)
            } else {
                evaluate(otherwise, env)
            }
        }
        Expr::Match(compiled) => {
            let value = evaluate(&compiled.scrutinee, env)?;
            let outcome = if env.tracing() {
                let mut events = Vec::new();
                let result = run_match(compiled, &value, env, Some(&mut events));
                env.push_trace(format!(";; trace {} on {}\n{}", compiled.scrutinee, value, trace_text(&events)));
                result?
            } else {
                run_match(compiled, &value, env, None)?
            };
            run_clause_rhs(&outcome, compiled, env, &value)
        }
    }
}

/// Evaluates two expressions and compares them structurally.
pub fn evaluates_equal(a: &Expr, b: &Expr, env: &Env) -> Result<bool, EvalError> {
    Ok(values_equal(&evaluate(a, env)?, &evaluate(b, env)?))
}

// ---------------------------------------------------------------------------
// Parsing

/// Parsing state shared between expressions and the patterns nested in them.
pub struct ExprParser<'a> {
    pub statics: &'a StaticEnv,
    pub fuel: usize,
    /// Every match compiled so far, in source order.
    pub compiled: Vec<Arc<CompiledMatch>>,
}

fn malformed(span: SourceSpan, message: impl Into<String>) -> StaticError {
    StaticError::MalformedExpr { span, message: message.into() }
}

/// Parses an expression with the default expansion fuel.
pub fn parse_expr(datum: &Syntax, statics: &StaticEnv) -> Result<Expr, StaticError> {
    ExprParser::new(statics, DEFAULT_FUEL).parse(datum)
}

impl<'a> ExprParser<'a> {
    pub fn new(statics: &'a StaticEnv, fuel: usize) -> Self {
        ExprParser { statics, fuel, compiled: Vec::new() }
    }

    pub fn parse(&mut self, stx: &Syntax) -> Result<Expr, StaticError> {
        let items = match &stx.kind {
            SyntaxKind::Atom(Value::Symbol(s)) => return Ok(Expr::Var(s.clone())),
            SyntaxKind::Atom(Value::Null) => {
                return Err(malformed(stx.span, "empty application `()`"));
            }
            SyntaxKind::Atom(v) => return Ok(Expr::Literal(v.clone())),
            SyntaxKind::List { items, tail: None } => items,
            SyntaxKind::List { tail: Some(_), .. } => {
                return Err(malformed(stx.span, "dotted list in expression position"));
            }
        };
        let head = items[0].as_symbol().map(Symbol::as_str);
        match head {
            Some("quote") => {
                if items.len() != 2 {
                    return Err(malformed(stx.span, "quote takes one datum"));
                }
                Ok(Expr::Quote(items[1].to_value()))
            }
            Some("lambda") | Some("λ") => {
                if items.len() != 3 {
                    return Err(malformed(stx.span, "expected (lambda (param ...) body)"));
                }
                let params = self.params(&items[1])?;
                let body = self.parse(&items[2])?;
                Ok(Expr::Lambda(Arc::new(Lambda { name: None, params, body })))
            }
            Some("let") => {
                if items.len() != 3 {
                    return Err(malformed(stx.span, "expected (let ([name expr] ...) body)"));
                }
                let bindings = items[1]
                    .as_list()
                    .ok_or_else(|| malformed(items[1].span, "let bindings must be a list"))?;
                let mut parsed = Vec::with_capacity(bindings.len());
                for b in bindings {
                    let pair = b.as_list().filter(|p| p.len() == 2);
                    let (name, e) = match pair.and_then(|p| Some((p[0].as_symbol()?, &p[1]))) {
                        Some(x) => x,
                        None => return Err(malformed(b.span, "expected [name expr]")),
                    };
                    parsed.push((name.clone(), self.parse(e)?));
                }
                Ok(Expr::Let(parsed, Box::new(self.parse(&items[2])?)))
            }
            Some("if") => {
                if items.len() != 4 {
                    return Err(malformed(stx.span, "expected (if test then else)"));
                }
                Ok(Expr::If(
                    Box::new(self.parse(&items[1])?),
                    Box::new(self.parse(&items[2])?),
                    Box::new(self.parse(&items[3])?),
                ))
            }
            Some("cond") => self.cond(&items[1..], stx.span),
            Some("match") => self.match_form(items, stx.span),
            Some(kw @ ("define" | "struct" | "define-match-expander" | "check-equal?")) => Err(malformed(
                stx.span,
                format!("`{}` is only allowed at toplevel", kw),
            )),
            _ => {
                let func = self.parse(&items[0])?;
                let args = items[1..].iter().map(|a| self.parse(a)).collect::<Result<_, _>>()?;
                Ok(Expr::Apply(Box::new(func), args))
            }
        }
    }

    pub fn params(&self, stx: &Syntax) -> Result<Vec<Symbol>, StaticError> {
        let list = stx
            .as_list()
            .ok_or_else(|| malformed(stx.span, "parameter list must be a list of names"))?;
        let mut out: Vec<Symbol> = Vec::with_capacity(list.len());
        for p in list {
            let name = p.as_symbol().ok_or_else(|| malformed(p.span, "parameter must be a name"))?;
            if out.contains(name) {
                return Err(malformed(p.span, format!("duplicate parameter `{}`", name)));
            }
            out.push(name.clone());
        }
        Ok(out)
    }

    // A `cond` with no matching clause and no `else` yields #f.
    fn cond(&mut self, clauses: &[Syntax], span: SourceSpan) -> Result<Expr, StaticError> {
        let Some((first, rest)) = clauses.split_first() else {
            return Ok(Expr::Literal(Value::Bool(false)));
        };
        let parts = first
            .as_list()
            .filter(|p| p.len() == 2)
            .ok_or_else(|| malformed(first.span, "expected [test expr]"))?;
        if parts[0].is_symbol("else") {
            if !rest.is_empty() {
                return Err(malformed(span, "`else` must be the last cond clause"));
            }
            return self.parse(&parts[1]);
        }
        Ok(Expr::If(
            Box::new(self.parse(&parts[0])?),
            Box::new(self.parse(&parts[1])?),
            Box::new(self.cond(rest, span)?),
        ))
    }

    fn match_form(&mut self, items: &[Syntax], span: SourceSpan) -> Result<Expr, StaticError> {
        if items.len() < 2 {
            return Err(malformed(span, "expected (match expr [pat expr] ...)"));
        }
        let scrutinee = self.parse(&items[1])?;
        let mut clauses = Vec::with_capacity(items.len() - 2);
        for clause in &items[2..] {
            let parts = clause
                .as_list()
                .filter(|p| p.len() == 2)
                .ok_or_else(|| malformed(clause.span, "match clause must be [pattern expr]"))?;
            let fuel = self.fuel;
            let pattern = parse_pattern_with(self, &parts[0], fuel)?;
            let rhs = self.parse(&parts[1])?;
            clauses.push((pattern, rhs));
        }
        let compiled = Arc::new(compile_match(scrutinee, clauses, span)?);
        self.compiled.push(compiled.clone());
        Ok(Expr::Match(compiled))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sexpr::{read_syntax, print_value};

    fn eval_str(text: &str) -> Result<Value, EvalError> {
        let statics = StaticEnv::default();
        let stx = read_syntax(text).unwrap().remove(0);
        let expr = parse_expr(&stx, &statics).unwrap();
        evaluate(&expr, &Env::base())
    }

    fn show(text: &str) -> String {
        print_value(&eval_str(text).unwrap()).unwrap()
    }

    #[test]
    fn parses_core_forms() {
        let statics = StaticEnv::default();
        let parse = |t: &str| parse_expr(&read_syntax(t).unwrap()[0], &statics).unwrap();
        assert!(matches!(parse("(+ (sqr 3) (sqr 4))"), Expr::Apply(f, args)
            if matches!(&*f, Expr::Var(s) if s.as_str() == "+") && args.len() == 2));
        assert!(matches!(parse("5"), Expr::Literal(Value::Int(5))));
        assert!(matches!(parse("(lambda (x) x)"), Expr::Lambda(l)
            if l.params.len() == 1 && matches!(&l.body, Expr::Var(s) if s.as_str() == "x")));
        assert!(matches!(parse("'(1 2)"), Expr::Quote(_)));
        assert!(matches!(parse("(let ([x 1]) x)"), Expr::Let(b, _) if b.len() == 1));
        assert!(matches!(parse("(if #t 1 2)"), Expr::If(..)));
    }

    #[test]
    fn malformed_forms() {
        let statics = StaticEnv::default();
        for bad in ["(lambda x)", "(if 1 2)", "(let (x) x)", "()", "(quote)", "(1 . 2)"] {
            let stx = &read_syntax(bad).unwrap()[0];
            assert!(
                matches!(parse_expr(stx, &statics), Err(StaticError::MalformedExpr { .. })),
                "{bad}"
            );
        }
    }

    #[test]
    fn arithmetic_examples() {
        assert!(matches!(eval_str("(sqrt (+ (sqr 3) (sqr 4)))").unwrap(), Value::Int(5)));
        assert_eq!(show("(format \"perfect square: ~a\" 4)"), "\"perfect square: 4\"");
        assert_eq!(show("(map add1 (list 1 2 3 4 5))"), "(2 3 4 5 6)");
        assert_eq!(show("(let ([x 2] [y 3]) (* x y))"), "6");
        assert_eq!(show("((lambda (x) x) 'q)"), "q");
        assert_eq!(show("(cond [(equal? 1 2) 'a] [else 'b])"), "b");
    }

    #[test]
    fn apply_value_examples() {
        let env = Env::base();
        let even = env.lookup(&Symbol::new("even?")).unwrap();
        assert!(matches!(apply_value(&even, &[4.into()]).unwrap(), Value::Bool(true)));
        let sqrt = env.lookup(&Symbol::new("sqrt")).unwrap();
        assert!(matches!(apply_value(&sqrt, &[16.into()]).unwrap(), Value::Int(4)));
        let id = eval_str("(lambda (x) x)").unwrap();
        assert_eq!(apply_value(&id, &[Value::sym("x")]).unwrap(), Value::sym("x"));
        assert!(matches!(apply_value(&5.into(), &[]), Err(EvalError::NotCallable(_))));
        assert!(matches!(apply_value(&id, &[]), Err(EvalError::ArityError { .. })));
    }

    #[test]
    fn errors() {
        assert!(matches!(eval_str("nope"), Err(EvalError::UnboundVariable(_))));
        assert!(matches!(eval_str("(+ 1 'a)"), Err(EvalError::TypeError(_))));
        assert!(matches!(eval_str("(error \"boom\")"), Err(EvalError::UserError(m)) if m == "boom"));
        assert!(matches!(eval_str("(sqrt -4)"), Err(EvalError::TypeError(_))));
        assert!(matches!(eval_str("(first 5)"), Err(EvalError::TypeError(_))));
    }

    #[test]
    fn environments_extend_without_mutation() {
        let env = Env::empty();
        env.define_global(Symbol::new("x"), 1.into());
        let inner = env.extend(vec![(Symbol::new("x"), 2.into())]);
        assert_eq!(inner.lookup(&Symbol::new("x")), Some(2.into()));
        assert_eq!(env.lookup(&Symbol::new("x")), Some(1.into()));
    }
}
