//! Executing compiled matches, plus the naive reference matcher.

use std::collections::HashMap;
use std::fmt;

use crate::compile::{CompiledMatch, Node, NodeId, OccId, OccRoot, Step};
use crate::error::EvalError;
use crate::eval::{apply_value, evaluate, Env};
use crate::pattern::{bound_vars, Pattern};
use crate::sexpr::{values_equal, Symbol, Value};

pub type Bindings = Vec<(Symbol, Value)>;

#[derive(Debug, Clone, PartialEq)]
pub enum MatchOutcome {
    Matched { rhs: usize, bindings: Bindings },
    NoMatch,
}

/// Predicate and transformer values of one match execution. Each `?` and
/// `app` expression is evaluated at most once, the first time the automaton
/// reaches a node that needs it.
#[derive(Debug, Default)]
pub struct PredCache {
    preds: Vec<Option<Value>>,
    apps: Vec<Option<Value>>,
    pub evaluations: usize,
}

impl PredCache {
    pub fn new(cm: &CompiledMatch) -> Self {
        PredCache { preds: vec![None; cm.preds.len()], apps: vec![None; cm.apps.len()], evaluations: 0 }
    }

    pub fn pred(&mut self, cm: &CompiledMatch, id: usize, env: &Env) -> Result<Value, EvalError> {
        if let Some(v) = &self.preds[id] {
            return Ok(v.clone());
        }
        let v = evaluate(&cm.preds[id], env)?;
        self.evaluations += 1;
        self.preds[id] = Some(v.clone());
        Ok(v)
    }

    pub fn app(&mut self, cm: &CompiledMatch, id: usize, env: &Env) -> Result<Value, EvalError> {
        if let Some(v) = &self.apps[id] {
            return Ok(v.clone());
        }
        let v = evaluate(&cm.apps[id], env)?;
        self.evaluations += 1;
        self.apps[id] = Some(v.clone());
        Ok(v)
    }
}

// ---------------------------------------------------------------------------
// Tracing

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopPhase {
    /// Length check on entry; `passed` says whether enough elements exist.
    Enter { len: Option<usize> },
    Iter(usize),
    Exit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    TypeTest,
    LiteralTest,
    PredApply,
    AppApply,
    Bind,
    LoopIter(LoopPhase),
    Success,
    FailureJump,
}

impl TraceKind {
    pub fn name(&self) -> &'static str {
        match self {
            TraceKind::TypeTest => "type-test",
            TraceKind::LiteralTest => "literal-test",
            TraceKind::PredApply => "pred-apply",
            TraceKind::AppApply => "app-apply",
            TraceKind::Bind => "bind",
            TraceKind::LoopIter(_) => "loop-iter",
            TraceKind::Success => "success",
            TraceKind::FailureJump => "failure-jump",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub step: usize,
    pub kind: TraceKind,
    pub node: NodeId,
    pub occurrence: Option<String>,
    pub passed: Option<bool>,
    /// Bound value for `bind`, result for `app-apply`.
    pub value: Option<Value>,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} @{} #{}", self.step, self.kind.name(), self.occurrence.as_deref().unwrap_or("-"), self.node)?;
        match self.kind {
            TraceKind::LoopIter(LoopPhase::Enter { len: Some(n) }) => write!(f, " enter len={}", n)?,
            TraceKind::LoopIter(LoopPhase::Enter { len: None }) => write!(f, " enter improper")?,
            TraceKind::LoopIter(LoopPhase::Iter(i)) => write!(f, " iter {}", i)?,
            TraceKind::LoopIter(LoopPhase::Exit) => write!(f, " exit")?,
            _ => {}
        }
        if let Some(p) = self.passed {
            write!(f, " {}", if p { "pass" } else { "fail" })?;
        }
        if let Some(v) = &self.value {
            write!(f, " = {}", v)?;
        }
        Ok(())
    }
}

pub fn trace_text(events: &[TraceEvent]) -> String {
    events.iter().map(|e| format!("{}\n", e)).collect()
}

// ---------------------------------------------------------------------------
// Automaton execution

enum End {
    Success(usize),
    Accept,
    Failure,
}

struct Walker<'a, 't> {
    cm: &'a CompiledMatch,
    env: &'a Env,
    scrutinee: &'a Value,
    roots: HashMap<OccRoot, Value>,
    cache: PredCache,
    trace: Option<&'t mut Vec<TraceEvent>>,
}

fn invariant(message: impl Into<String>) -> EvalError {
    EvalError::InternalInvariantViolation(message.into())
}

impl Walker<'_, '_> {
    fn emit(&mut self, kind: TraceKind, node: NodeId, occ: Option<OccId>, passed: Option<bool>, value: Option<Value>) {
        if let Some(trace) = self.trace.as_deref_mut() {
            let occurrence = occ.map(|o| self.cm.automaton.occurrence_name(o));
            let step = trace.len();
            trace.push(TraceEvent { step, kind, node, occurrence, passed, value });
        }
    }

    fn value(&self, occ: OccId) -> Result<Value, EvalError> {
        let occs = &self.cm.automaton.occurrences;
        let mut steps = Vec::new();
        let mut cur = occ;
        while let Some((parent, step)) = &occs[cur].parent {
            steps.push(step);
            cur = *parent;
        }
        let mut v = match &occs[cur].root {
            OccRoot::Scrutinee => self.scrutinee.clone(),
            root => self.roots.get(root).cloned().ok_or_else(|| invariant(format!("unset occurrence root {:?}", root)))?,
        };
        for step in steps.into_iter().rev() {
            v = match (step, &v) {
                (Step::Head, Value::Pair(c)) => c.car.clone(),
                (Step::Tail, Value::Pair(c)) => c.cdr.clone(),
                (Step::Field { index, .. }, Value::Struct(s)) if *index < s.fields.len() => s.fields[*index].clone(),
                _ => return Err(invariant(format!("occurrence {} read before its shape was tested", occ))),
            };
        }
        Ok(v)
    }

    fn set_root(&mut self, occ: OccId, v: Value) {
        let root = self.cm.automaton.occurrences[occ].root.clone();
        self.roots.insert(root, v);
    }

    fn walk(&mut self, entry: NodeId, binds: &mut Bindings) -> Result<End, EvalError> {
        let cm = self.cm;
        let mut id = entry;
        loop {
            match &cm.automaton.nodes[id] {
                Node::TestType { occ, kind, pass, fail } => {
                    let ok = kind.test(&self.value(*occ)?);
                    self.emit(TraceKind::TypeTest, id, Some(*occ), Some(ok), None);
                    id = if ok { *pass } else { *fail };
                }
                Node::TestLiteral { occ, value, pass, fail } => {
                    let ok = values_equal(&self.value(*occ)?, value);
                    self.emit(TraceKind::LiteralTest, id, Some(*occ), Some(ok), None);
                    id = if ok { *pass } else { *fail };
                }
                Node::TestPred { pred, occ, pass, fail } => {
                    let f = self.cache.pred(cm, *pred, self.env)?;
                    let ok = apply_value(&f, &[self.value(*occ)?])?.is_true();
                    self.emit(TraceKind::PredApply, id, Some(*occ), Some(ok), None);
                    id = if ok { *pass } else { *fail };
                }
                Node::Bind { name, occ, next } => {
                    let v = self.value(*occ)?;
                    self.emit(TraceKind::Bind, id, Some(*occ), None, Some(v.clone()));
                    binds.push((name.clone(), v));
                    id = *next;
                }
                Node::AppTransform { app, occ, result, next } => {
                    let f = self.cache.app(cm, *app, self.env)?;
                    let r = apply_value(&f, &[self.value(*occ)?])?;
                    self.emit(TraceKind::AppApply, id, Some(*occ), None, Some(r.clone()));
                    self.set_root(*result, r);
                    id = *next;
                }
                Node::SeqLoop { occ, body, element, vars, var_occs, min_tail, rest, pass, fail } => {
                    let ok = self.run_loop(id, *occ, *body, *element, vars, var_occs, *min_tail, *rest)?;
                    id = if ok { *pass } else { *fail };
                }
                Node::Accept => {
                    self.emit(TraceKind::Success, id, None, None, None);
                    return Ok(End::Accept);
                }
                Node::Success(rhs) => {
                    self.emit(TraceKind::Success, id, None, None, None);
                    return Ok(End::Success(*rhs));
                }
                Node::Failure => {
                    self.emit(TraceKind::FailureJump, id, None, None, None);
                    return Ok(End::Failure);
                }
                Node::Join(target) => {
                    self.emit(TraceKind::FailureJump, id, None, None, None);
                    id = *target;
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn run_loop(
        &mut self,
        id: NodeId,
        occ: OccId,
        body: NodeId,
        element: OccId,
        vars: &[Symbol],
        var_occs: &[OccId],
        min_tail: usize,
        rest: OccId,
    ) -> Result<bool, EvalError> {
        let list = self.value(occ)?;
        let len = list.proper_length();
        let enough = len.is_some_and(|n| n >= min_tail);
        self.emit(TraceKind::LoopIter(LoopPhase::Enter { len }), id, Some(occ), Some(enough), None);
        if !enough {
            return Ok(false);
        }
        let count = len.unwrap_or(0) - min_tail;
        let mut columns: Vec<Vec<Value>> = vec![Vec::with_capacity(count); vars.len()];
        let mut cur = list;
        let mut ok = true;
        for i in 0..count {
            let (head, tail) = match &cur {
                Value::Pair(c) => (c.car.clone(), c.cdr.clone()),
                _ => return Err(invariant("sequence shorter than its length")),
            };
            self.emit(TraceKind::LoopIter(LoopPhase::Iter(i)), id, Some(occ), None, None);
            self.set_root(element, head);
            let mut local = Vec::new();
            match self.walk(body, &mut local)? {
                End::Accept => {}
                End::Failure => {
                    ok = false;
                    break;
                }
                End::Success(_) => return Err(invariant("sequence body reached a clause success")),
            }
            for (column, var) in columns.iter_mut().zip(vars) {
                let v = local
                    .iter()
                    .find(|(n, _)| n == var)
                    .map(|(_, v)| v.clone())
                    .ok_or_else(|| invariant(format!("sequence body did not bind `{}`", var)))?;
                column.push(v);
            }
            cur = tail;
        }
        self.emit(TraceKind::LoopIter(LoopPhase::Exit), id, Some(occ), Some(ok), None);
        if ok {
            self.set_root(rest, cur);
            for (column, vo) in columns.into_iter().zip(var_occs) {
                self.set_root(*vo, Value::list(column));
            }
        }
        Ok(ok)
    }
}

fn order_bindings(cm: &CompiledMatch, rhs: usize, binds: Bindings) -> Result<Bindings, EvalError> {
    let layout = &cm.var_layout[rhs];
    if binds.len() != layout.len() {
        return Err(invariant(format!("clause {} bound {} variables, expected {}", rhs, binds.len(), layout.len())));
    }
    layout
        .iter()
        .map(|name| {
            binds
                .iter()
                .find(|(n, _)| n == name)
                .cloned()
                .ok_or_else(|| invariant(format!("clause {} did not bind `{}`", rhs, name)))
        })
        .collect()
}

/// Runs the automaton against `scrutinee`. Errors raised by predicates or
/// transformers abort the match.
pub fn run_match(
    cm: &CompiledMatch,
    scrutinee: &Value,
    env: &Env,
    trace: Option<&mut Vec<TraceEvent>>,
) -> Result<MatchOutcome, EvalError> {
    run_match_with_cache(cm, scrutinee, env, trace).map(|(outcome, _)| outcome)
}

/// Like [`run_match`], also returning the cache to expose evaluation counts.
pub fn run_match_with_cache(
    cm: &CompiledMatch,
    scrutinee: &Value,
    env: &Env,
    trace: Option<&mut Vec<TraceEvent>>,
) -> Result<(MatchOutcome, PredCache), EvalError> {
    let mut walker = Walker { cm, env, scrutinee, roots: HashMap::new(), cache: PredCache::new(cm), trace };
    let mut binds = Vec::new();
    let outcome = match walker.walk(cm.automaton.entry, &mut binds)? {
        End::Success(rhs) => MatchOutcome::Matched { rhs, bindings: order_bindings(cm, rhs, binds)? },
        End::Failure => MatchOutcome::NoMatch,
        End::Accept => return Err(invariant("clause automaton reached a sequence accept")),
    };
    Ok((outcome, walker.cache))
}

/// Evaluates the selected clause's right-hand side with its bindings.
pub fn run_clause_rhs(
    outcome: &MatchOutcome,
    cm: &CompiledMatch,
    env: &Env,
    scrutinee: &Value,
) -> Result<Value, EvalError> {
    match outcome {
        MatchOutcome::Matched { rhs, bindings } => evaluate(&cm.rhs[*rhs], &env.extend(bindings.clone())),
        MatchOutcome::NoMatch => Err(EvalError::MatchFailure(scrutinee.to_string())),
    }
}

// ---------------------------------------------------------------------------
// Replay

/// Re-derives the outcome of a traced execution from the automaton and the
/// trace alone, without evaluating anything. Fails if the trace does not
/// describe a path through the automaton.
pub fn replay(cm: &CompiledMatch, events: &[TraceEvent]) -> Result<MatchOutcome, String> {
    let mut r = Replayer { cm, events, pos: 0 };
    let mut binds = Vec::new();
    let outcome = match r.walk(cm.automaton.entry, &mut binds)? {
        End::Success(rhs) => MatchOutcome::Matched {
            rhs,
            bindings: order_bindings(cm, rhs, binds).map_err(|e| e.to_string())?,
        },
        End::Failure => MatchOutcome::NoMatch,
        End::Accept => return Err("trace ends in a sequence accept".into()),
    };
    if r.pos != events.len() {
        return Err(format!("{} trailing events", events.len() - r.pos));
    }
    Ok(outcome)
}

struct Replayer<'a> {
    cm: &'a CompiledMatch,
    events: &'a [TraceEvent],
    pos: usize,
}

impl Replayer<'_> {
    fn next(&mut self, node: NodeId, kind: &str) -> Result<&TraceEvent, String> {
        let e = self.events.get(self.pos).ok_or_else(|| format!("trace ended at node #{}", node))?;
        if e.node != node || e.kind.name() != kind {
            return Err(format!("expected {} at #{}, found {} at #{}", kind, node, e.kind.name(), e.node));
        }
        self.pos += 1;
        Ok(e)
    }

    fn outcome(&mut self, node: NodeId, kind: &str) -> Result<bool, String> {
        self.next(node, kind)?.passed.ok_or_else(|| format!("event at #{} has no outcome", node))
    }

    fn walk(&mut self, entry: NodeId, binds: &mut Bindings) -> Result<End, String> {
        let cm = self.cm;
        let mut id = entry;
        loop {
            match &cm.automaton.nodes[id] {
                Node::TestType { pass, fail, .. } => id = if self.outcome(id, "type-test")? { *pass } else { *fail },
                Node::TestLiteral { pass, fail, .. } => {
                    id = if self.outcome(id, "literal-test")? { *pass } else { *fail }
                }
                Node::TestPred { pass, fail, .. } => id = if self.outcome(id, "pred-apply")? { *pass } else { *fail },
                Node::Bind { name, next, .. } => {
                    let v = self.next(id, "bind")?.value.clone().ok_or("bind event without value")?;
                    binds.push((name.clone(), v));
                    id = *next;
                }
                Node::AppTransform { next, .. } => {
                    self.next(id, "app-apply")?;
                    id = *next;
                }
                Node::SeqLoop { body, pass, fail, .. } => {
                    let mut ok = self.outcome(id, "loop-iter")?;
                    if ok {
                        while let Some(e) = self.events.get(self.pos) {
                            if e.node == id && matches!(e.kind, TraceKind::LoopIter(LoopPhase::Iter(_))) {
                                self.pos += 1;
                                if let End::Failure = self.walk(*body, &mut Vec::new())? {
                                    break;
                                }
                            } else {
                                break;
                            }
                        }
                        ok = self.outcome(id, "loop-iter")?;
                    }
                    id = if ok { *pass } else { *fail };
                }
                Node::Accept => {
                    self.next(id, "success")?;
                    return Ok(End::Accept);
                }
                Node::Success(rhs) => {
                    self.next(id, "success")?;
                    return Ok(End::Success(*rhs));
                }
                Node::Failure => {
                    self.next(id, "failure-jump")?;
                    return Ok(End::Failure);
                }
                Node::Join(target) => {
                    self.next(id, "failure-jump")?;
                    id = *target;
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Reference matcher

/// Matches one pattern directly, left to right, re-evaluating `?` and `app`
/// expressions at every use. Bindings come back in first-occurrence order.
pub fn naive_match(p: &Pattern, v: &Value, env: &Env) -> Result<Option<Bindings>, EvalError> {
    let mut binds = Vec::new();
    if naive(p, v, env, &mut binds)? {
        let layout = bound_vars(p);
        let ordered = layout
            .iter()
            .map(|name| binds.iter().find(|(n, _)| n == name).cloned().expect("matched pattern binds its variables"))
            .collect();
        Ok(Some(ordered))
    } else {
        Ok(None)
    }
}

/// First-match semantics over a clause list.
pub fn naive_first_match(patterns: &[Pattern], v: &Value, env: &Env) -> Result<MatchOutcome, EvalError> {
    for (rhs, p) in patterns.iter().enumerate() {
        if let Some(bindings) = naive_match(p, v, env)? {
            return Ok(MatchOutcome::Matched { rhs, bindings });
        }
    }
    Ok(MatchOutcome::NoMatch)
}

fn naive(p: &Pattern, v: &Value, env: &Env, binds: &mut Bindings) -> Result<bool, EvalError> {
    Ok(match p {
        Pattern::Var(name) => {
            binds.push((name.clone(), v.clone()));
            true
        }
        Pattern::Wildcard => true,
        Pattern::Literal(lit) => values_equal(lit, v),
        Pattern::Pred(e) => apply_value(&evaluate(e, env)?, std::slice::from_ref(v))?.is_true(),
        Pattern::And(ps) => {
            for q in ps {
                if !naive(q, v, env, binds)? {
                    return Ok(false);
                }
            }
            true
        }
        Pattern::Or(ps) => {
            for q in ps {
                let mark = binds.len();
                if naive(q, v, env, binds)? {
                    return Ok(true);
                }
                binds.truncate(mark);
            }
            false
        }
        Pattern::Cons(h, t) => match v {
            Value::Pair(c) => naive(h, &c.car, env, binds)? && naive(t, &c.cdr, env, binds)?,
            _ => false,
        },
        Pattern::EmptyList => matches!(v, Value::Null),
        Pattern::App(e, q) => {
            let r = apply_value(&evaluate(e, env)?, std::slice::from_ref(v))?;
            naive(q, &r, env, binds)?
        }
        Pattern::Seq { element, tail } => {
            let Some(items) = v.list_items() else { return Ok(false) };
            if items.len() < tail.len() {
                return Ok(false);
            }
            let split = items.len() - tail.len();
            let vars = bound_vars(element);
            let mut columns: Vec<Vec<Value>> = vec![Vec::new(); vars.len()];
            for item in &items[..split] {
                let mut local = Vec::new();
                if !naive(element, item, env, &mut local)? {
                    return Ok(false);
                }
                for (column, var) in columns.iter_mut().zip(&vars) {
                    let found = local.iter().find(|(n, _)| n == var).map(|(_, v)| v.clone());
                    column.push(found.expect("element pattern binds its variables"));
                }
            }
            for (var, column) in vars.into_iter().zip(columns) {
                binds.push((var, Value::list(column)));
            }
            for (q, item) in tail.iter().zip(&items[split..]) {
                if !naive(q, item, env, binds)? {
                    return Ok(false);
                }
            }
            true
        }
        Pattern::Struct { info, fields } => match v {
            Value::Struct(s) if s.tag == info.tag => {
                for (q, field) in fields.iter().zip(&s.fields) {
                    if !naive(q, field, env, binds)? {
                        return Ok(false);
                    }
                }
                true
            }
            _ => false,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compile::compile_match;
    use crate::eval::{parse_expr, Arity, Expr};
    use crate::pattern::{parse_pattern, StaticEnv, DEFAULT_FUEL};
    use crate::sexpr::{read_all, read_syntax, SourceSpan};
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    fn cm(patterns: &[&str]) -> CompiledMatch {
        let statics = StaticEnv::default();
        let clauses = patterns
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let pat = parse_pattern(&read_syntax(p).unwrap()[0], &statics, DEFAULT_FUEL).unwrap();
                (pat, Expr::Literal((i as i64).into()))
            })
            .collect();
        compile_match(Expr::Var(Symbol::new("v")), clauses, SourceSpan::default()).unwrap()
    }

    fn val(text: &str) -> Value {
        read_all(text).unwrap().remove(0)
    }

    fn check(m: &CompiledMatch, input: &str) -> MatchOutcome {
        let env = Env::base();
        let v = val(input);
        let fast = run_match(m, &v, &env, None).unwrap();
        let slow = naive_first_match(&m.patterns, &v, &env).unwrap();
        assert_eq!(fast, slow, "input {input}\n{}", m.dump());
        fast
    }

    fn rhs(o: &MatchOutcome) -> Option<usize> {
        match o {
            MatchOutcome::Matched { rhs, .. } => Some(*rhs),
            MatchOutcome::NoMatch => None,
        }
    }

    #[test]
    fn magnitude_clauses() {
        let m = cm(&["(list 'cart x y)", "(list 'polar r theta)"]);
        assert_eq!(rhs(&check(&m, "(cart 3 4)")), Some(0));
        assert_eq!(rhs(&check(&m, "(polar 5 0.9)")), Some(1));
        assert_eq!(check(&m, "(other 1 2)"), MatchOutcome::NoMatch);
        assert_eq!(check(&m, "(cart 1)"), MatchOutcome::NoMatch);
        let MatchOutcome::Matched { bindings, .. } = check(&m, "(cart 3 4)") else { panic!() };
        assert_eq!(bindings, vec![(Symbol::new("x"), 3.into()), (Symbol::new("y"), 4.into())]);
    }

    #[test]
    fn sequences() {
        let m = cm(&["(list 'cart xs ...)", "(cons 'polar (list r (? real? thetas) ...))"]);
        let MatchOutcome::Matched { bindings, .. } = check(&m, "(cart 1 2 3)") else { panic!() };
        assert_eq!(bindings[0].1, val("(1 2 3)"));
        check(&m, "(cart)");
        check(&m, "(polar 1 0.5 0.25)");
        check(&m, "(polar 1 0.5 x)");
        check(&m, "(polar)");
        check(&m, "(cart 1 . 2)");
        let m = cm(&["(list a ... b c)", "(list (list x y) ...)"]);
        for input in ["(1)", "(1 2)", "(1 2 3 4)", "((1 2) (3 4))", "((1 2) (3))"] {
            check(&m, input);
        }
    }

    #[test]
    fn transformers_and_or() {
        let m = cm(&["(app (lambda (x) (if (number? x) (sqrt x) -1)) (? integer? r))", "(or (list x) (cons x (list _ _)))", "_"]);
        for input in ["16", "17", "(1)", "(1 2 3)", "(1 2)"] {
            check(&m, input);
        }
        let m = cm(&["(app (lambda (l) (map add1 l)) (list a b))", "x"]);
        let MatchOutcome::Matched { bindings, .. } = check(&m, "(1 2)") else { panic!() };
        assert_eq!(bindings[0].1, 2.into());
    }

    #[test]
    fn long_lists_do_not_grow_the_stack() {
        let m = cm(&["(list (? number? xs) ... last)"]);
        let v = Value::list((0..200_000).map(Value::Int).collect::<Vec<_>>());
        let MatchOutcome::Matched { bindings, .. } = run_match(&m, &v, &Env::base(), None).unwrap() else { panic!() };
        assert_eq!(bindings[0].1.proper_length(), Some(199_999));
        assert_eq!(bindings[1].1, 199_999.into());
    }

    #[test]
    fn predicate_errors_abort() {
        let m = cm(&["(? even?)", "_"]);
        let err = run_match(&m, &Value::sym("a"), &Env::base(), None).unwrap_err();
        assert!(matches!(err, EvalError::TypeError(_)));
    }

    #[test]
    fn predicates_evaluated_once() {
        let env = Env::base();
        let count = Arc::new(AtomicUsize::new(0));
        let c = count.clone();
        let number = env.lookup(&Symbol::new("number?")).unwrap();
        env.define_builtin("make-pred", Arity::exactly(0), move |_| {
            c.fetch_add(1, Ordering::SeqCst);
            Ok(number.clone())
        });
        let m = cm(&["(list (? (make-pred)) ... 'a)", "(list (? (make-pred)) ...)"]);
        let v = val("(1 2 3 4 5 6)");
        let (outcome, cache) = run_match_with_cache(&m, &v, &env, None).unwrap();
        assert_eq!(rhs(&outcome), Some(1));
        // one evaluation per syntactic occurrence, not per element
        assert_eq!(count.load(Ordering::SeqCst), 2);
        assert_eq!(cache.evaluations, 2);
    }

    #[test]
    fn trace_replays() {
        let m = cm(&["(list 'cart xs ...)", "(cons 'polar (list r (? real? thetas) ...))", "(app sqrt x)"]);
        let env = Env::base();
        for input in ["(cart 1 2)", "(polar 1 0.5)", "(polar 1 q)", "16", "(x)"] {
            let mut trace = Vec::new();
            let v = val(input);
            let outcome = match run_match(&m, &v, &env, Some(&mut trace)) {
                Ok(o) => o,
                Err(_) => continue,
            };
            assert_eq!(replay(&m, &trace).unwrap(), outcome, "{}", trace_text(&trace));
        }
    }

    #[test]
    fn trace_text_lines() {
        let m = cm(&["(and (? number?) x)", "_"]);
        let mut trace = Vec::new();
        run_match(&m, &5.into(), &Env::base(), Some(&mut trace)).unwrap();
        let text = trace_text(&trace);
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("0 pred-apply @r"));
        assert!(text.contains("1 bind @r"));
    }

    #[test]
    fn rhs_runs_with_bindings() {
        let statics = StaticEnv::default();
        let e = parse_expr(&read_syntax("(match (list 1 2) [(list a b) (+ a b)])").unwrap()[0], &statics).unwrap();
        assert_eq!(evaluate(&e, &Env::base()).unwrap(), 3.into());
        let e = parse_expr(&read_syntax("(match 5 [(list a) a])").unwrap()[0], &statics).unwrap();
        assert!(matches!(evaluate(&e, &Env::base()), Err(EvalError::MatchFailure(_))));
    }
}
