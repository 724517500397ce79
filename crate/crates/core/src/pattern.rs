//! Pattern syntax: parsing, expander expansion, desugaring, and the static
//! registries for structs and match expanders.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{EvalError, StaticError};
use crate::eval::{Arity, Builtin, Env, Expr, ExprParser};
use crate::sexpr::{SourceSpan, StructTag, Symbol, Syntax, SyntaxKind, Value};
use crate::template;

/// Default bound on expander rewrites along one pattern path.
pub const DEFAULT_FUEL: usize = 64;

/// Words that always have their built-in pattern meaning.
pub const PATTERN_KEYWORDS: [&str; 9] = ["list", "cons", "and", "or", "app", "quote", "_", "?", "..."];

#[derive(Debug, Clone)]
pub enum Pattern {
    Var(Symbol),
    Wildcard,
    Literal(Value),
    /// `(? expr)`: the expression must produce a one-argument predicate.
    Pred(Arc<Expr>),
    And(Vec<Pattern>),
    Or(Vec<Pattern>),
    Cons(Box<Pattern>, Box<Pattern>),
    EmptyList,
    /// `(app expr pat)`: matches `pat` against the result of the transformer.
    App(Arc<Expr>, Box<Pattern>),
    /// `elem ...` followed by fixed patterns for the last elements of a list.
    Seq { element: Box<Pattern>, tail: Vec<Pattern> },
    Struct { info: Arc<StructInfo>, fields: Vec<Pattern> },
}

impl Pattern {
    pub fn is_trivial(&self) -> bool {
        matches!(self, Pattern::Var(_) | Pattern::Wildcard)
    }

    /// Desugars a fixed-length list pattern into a cons chain.
    pub fn list(items: Vec<Pattern>) -> Pattern {
        items
            .into_iter()
            .rev()
            .fold(Pattern::EmptyList, |tail, head| Pattern::Cons(Box::new(head), Box::new(tail)))
    }
}

/// Pattern variables in left-to-right first-occurrence order.
pub fn bound_vars(p: &Pattern) -> Vec<Symbol> {
    let mut out = Vec::new();
    collect_bound(p, &mut out);
    out
}

fn collect_bound(p: &Pattern, out: &mut Vec<Symbol>) {
    match p {
        Pattern::Var(name) => {
            if !out.contains(name) {
                out.push(name.clone());
            }
        }
        Pattern::Wildcard | Pattern::Literal(_) | Pattern::Pred(_) | Pattern::EmptyList => {}
        Pattern::And(ps) | Pattern::Or(ps) => ps.iter().for_each(|q| collect_bound(q, out)),
        Pattern::Cons(h, t) => {
            collect_bound(h, out);
            collect_bound(t, out);
        }
        Pattern::App(_, q) => collect_bound(q, out),
        Pattern::Seq { element, tail } => {
            collect_bound(element, out);
            tail.iter().for_each(|q| collect_bound(q, out));
        }
        Pattern::Struct { fields, .. } => fields.iter().for_each(|q| collect_bound(q, out)),
    }
}

/// Compile-time record of a struct definition.
#[derive(Debug, Clone)]
pub struct StructInfo {
    pub name: Symbol,
    pub fields: Vec<Symbol>,
    pub tag: StructTag,
    pub constructor: Symbol,
    pub predicate: Symbol,
    pub accessors: Vec<Symbol>,
}

/// A rewrite rule `[use-pattern template]`.
#[derive(Debug, Clone)]
pub struct ExpanderRule {
    pub pattern: Value,
    pub template: Value,
}

pub type NativeTransformer = dyn Fn(&Value) -> Result<Value, String> + Send + Sync;

#[derive(Clone)]
pub enum Transformer {
    Rules(Vec<ExpanderRule>),
    Native(Arc<NativeTransformer>),
}

#[derive(Clone)]
pub struct ExpanderDef {
    pub name: Symbol,
    pub transformer: Transformer,
}

impl fmt::Debug for ExpanderDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.transformer {
            Transformer::Rules(rules) => write!(f, "ExpanderDef({}, {} rules)", self.name, rules.len()),
            Transformer::Native(_) => write!(f, "ExpanderDef({}, native)", self.name),
        }
    }
}

impl ExpanderDef {
    /// Builds a rule-based expander, checking every rule's shape.
    pub fn from_rules(name: Symbol, rules: Vec<ExpanderRule>, span: SourceSpan) -> Result<Self, StaticError> {
        let bad = |message: String| StaticError::BadTemplate { span, message };
        for rule in &rules {
            if !matches!(rule.pattern, Value::Pair(_)) {
                return Err(bad(format!("use pattern must be a list, got {}", rule.pattern)));
            }
            template::check_pattern(&rule.pattern).map_err(bad)?;
            template::check_template(&rule.pattern, &rule.template).map_err(bad)?;
        }
        Ok(ExpanderDef { name, transformer: Transformer::Rules(rules) })
    }

    pub fn native<F>(name: &str, f: F) -> Self
    where
        F: Fn(&Value) -> Result<Value, String> + Send + Sync + 'static,
    {
        ExpanderDef { name: Symbol::new(name), transformer: Transformer::Native(Arc::new(f)) }
    }
}

/// Why a single expansion step failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExpandError {
    NoRuleMatches,
    Template(String),
}

/// Rewrites one use of an expander. The head of each use pattern is skipped,
/// since it is the expander's own name.
pub fn expand_once(datum: &Value, def: &ExpanderDef) -> Result<Value, ExpandError> {
    match &def.transformer {
        Transformer::Native(f) => f(datum).map_err(ExpandError::Template),
        Transformer::Rules(rules) => {
            let args = datum.as_pair().map(|(_, rest)| rest).ok_or(ExpandError::NoRuleMatches)?;
            for rule in rules {
                let (_, pattern_args) = rule.pattern.as_pair().expect("checked at definition");
                let mut binds = template::Bindings::new();
                if template::match_pattern(pattern_args, args, &mut binds) {
                    return template::instantiate(&rule.template, &binds).map_err(ExpandError::Template);
                }
            }
            Err(ExpandError::NoRuleMatches)
        }
    }
}

/// Statically known structs and expanders.
#[derive(Debug, Clone, Default)]
pub struct StaticEnv {
    pub structs: HashMap<Symbol, Arc<StructInfo>>,
    pub expanders: HashMap<Symbol, Arc<ExpanderDef>>,
}

impl StaticEnv {
    fn check_name(&self, name: &Symbol, span: SourceSpan) -> Result<(), StaticError> {
        if PATTERN_KEYWORDS.contains(&name.as_str()) {
            return Err(StaticError::ReservedName { span, name: name.clone() });
        }
        if self.structs.contains_key(name) || self.expanders.contains_key(name) {
            return Err(StaticError::DuplicateDefinition { span, name: name.clone() });
        }
        Ok(())
    }

    /// Registers a struct and installs `make-NAME`, `NAME?` and `NAME-FIELD`
    /// into `runtime`.
    pub fn register_struct(
        &mut self,
        name: Symbol,
        fields: Vec<Symbol>,
        span: SourceSpan,
        runtime: &Env,
    ) -> Result<Arc<StructInfo>, StaticError> {
        self.check_name(&name, span)?;
        for (i, f) in fields.iter().enumerate() {
            if fields[..i].contains(f) {
                return Err(StaticError::DuplicateDefinition { span, name: f.clone() });
            }
        }
        let tag = StructTag { name: name.clone(), arity: fields.len() };
        let info = Arc::new(StructInfo {
            constructor: Symbol::new(&format!("make-{}", name)),
            predicate: Symbol::new(&format!("{}?", name)),
            accessors: fields.iter().map(|f| Symbol::new(&format!("{}-{}", name, f))).collect(),
            name: name.clone(),
            fields,
            tag: tag.clone(),
        });

        let t = tag.clone();
        runtime.define_global(
            info.constructor.clone(),
            Builtin::new(info.constructor.as_str(), Arity::exactly(tag.arity), move |args| {
                Ok(Value::new_struct(t.clone(), args.to_vec()))
            }),
        );
        let t = tag.clone();
        runtime.define_global(
            info.predicate.clone(),
            Builtin::new(info.predicate.as_str(), Arity::exactly(1), move |args| {
                Ok(Value::Bool(matches!(&args[0], Value::Struct(s) if s.tag == t)))
            }),
        );
        for (i, accessor) in info.accessors.iter().enumerate() {
            let t = tag.clone();
            let who = accessor.to_string();
            runtime.define_global(
                accessor.clone(),
                Builtin::new(accessor.as_str(), Arity::exactly(1), move |args| match &args[0] {
                    Value::Struct(s) if s.tag == t => Ok(s.fields[i].clone()),
                    other => Err(EvalError::type_error(&who, t.name.as_str(), other)),
                }),
            );
        }
        self.structs.insert(name, info.clone());
        Ok(info)
    }

    pub fn register_expander(&mut self, def: ExpanderDef, span: SourceSpan) -> Result<(), StaticError> {
        self.check_name(&def.name, span)?;
        self.expanders.insert(def.name.clone(), Arc::new(def));
        Ok(())
    }
}

/// Parses a pattern with its own expression parser.
pub fn parse_pattern(datum: &Syntax, env: &StaticEnv, fuel: usize) -> Result<Pattern, StaticError> {
    parse_pattern_with(&mut ExprParser::new(env, fuel), datum, fuel)
}

/// Parses and checks one clause pattern. Embedded expressions are parsed by
/// `parser`, so matches nested inside them are recorded there.
pub fn parse_pattern_with(parser: &mut ExprParser<'_>, datum: &Syntax, fuel: usize) -> Result<Pattern, StaticError> {
    let pattern = PatternParser { parser }.parse(datum, fuel)?;
    check_variables(&pattern, datum.span)?;
    Ok(pattern)
}

fn malformed(span: SourceSpan, message: impl Into<String>) -> StaticError {
    StaticError::MalformedPattern { span, message: message.into() }
}

struct PatternParser<'p, 'a> {
    parser: &'p mut ExprParser<'a>,
}

impl PatternParser<'_, '_> {
    fn parse(&mut self, stx: &Syntax, fuel: usize) -> Result<Pattern, StaticError> {
        let items = match &stx.kind {
            SyntaxKind::Atom(Value::Symbol(s)) => {
                return match s.as_str() {
                    "_" => Ok(Pattern::Wildcard),
                    "..." => Err(malformed(stx.span, "`...` must follow a pattern inside `list`")),
                    _ => Ok(Pattern::Var(s.clone())),
                };
            }
            SyntaxKind::Atom(Value::Null) => return Ok(Pattern::EmptyList),
            SyntaxKind::Atom(v) => return Ok(Pattern::Literal(v.clone())),
            SyntaxKind::List { items, tail: None } => items,
            SyntaxKind::List { tail: Some(_), .. } => {
                return Err(malformed(stx.span, "dotted list in pattern position"));
            }
        };
        let head = match items[0].as_symbol() {
            Some(h) => h.clone(),
            None => {
                return Err(StaticError::UnknownPatternHead { span: stx.span, head: items[0].to_value().to_string() })
            }
        };
        let args = &items[1..];
        match head.as_str() {
            "quote" => {
                if args.len() != 1 {
                    return Err(malformed(stx.span, "quote takes one datum"));
                }
                Ok(match args[0].to_value() {
                    Value::Null => Pattern::EmptyList,
                    v => Pattern::Literal(v),
                })
            }
            "list" => self.list(args, stx.span, fuel),
            "cons" => {
                if args.len() != 2 {
                    return Err(malformed(stx.span, "cons takes two patterns"));
                }
                Ok(Pattern::Cons(Box::new(self.parse(&args[0], fuel)?), Box::new(self.parse(&args[1], fuel)?)))
            }
            "and" => Ok(Pattern::And(self.many(args, fuel)?)),
            "or" => Ok(Pattern::Or(self.many(args, fuel)?)),
            "?" => {
                let Some((pred, rest)) = args.split_first() else {
                    return Err(malformed(stx.span, "expected (? expr pat ...)"));
                };
                let pred = Pattern::Pred(Arc::new(self.parser.parse(pred)?));
                if rest.is_empty() {
                    return Ok(pred);
                }
                let mut conjuncts = vec![pred];
                conjuncts.extend(self.many(rest, fuel)?);
                Ok(Pattern::And(conjuncts))
            }
            "app" => {
                if args.len() != 2 {
                    return Err(malformed(stx.span, "expected (app expr pat)"));
                }
                let transformer = Arc::new(self.parser.parse(&args[0])?);
                Ok(Pattern::App(transformer, Box::new(self.parse(&args[1], fuel)?)))
            }
            "_" | "..." => Err(StaticError::UnknownPatternHead { span: stx.span, head: head.to_string() }),
            _ => {
                if let Some(def) = self.parser.statics.expanders.get(&head).cloned() {
                    return self.expand(stx, &def, fuel);
                }
                if let Some(info) = self.parser.statics.structs.get(&head).cloned() {
                    if args.len() != info.fields.len() {
                        return Err(StaticError::StructArityError {
                            span: stx.span,
                            name: head,
                            expected: info.fields.len(),
                            found: args.len(),
                        });
                    }
                    return Ok(Pattern::Struct { fields: self.many(args, fuel)?, info });
                }
                Err(StaticError::UnknownPatternHead { span: stx.span, head: head.to_string() })
            }
        }
    }

    fn many(&mut self, items: &[Syntax], fuel: usize) -> Result<Vec<Pattern>, StaticError> {
        items.iter().map(|i| self.parse(i, fuel)).collect()
    }

    fn list(&mut self, args: &[Syntax], span: SourceSpan, fuel: usize) -> Result<Pattern, StaticError> {
        let dots: Vec<usize> = (0..args.len()).filter(|&i| args[i].is_symbol("...")).collect();
        match dots.as_slice() {
            [] => Ok(Pattern::list(self.many(args, fuel)?)),
            [0] => Err(malformed(span, "`...` must follow a pattern")),
            [d] => {
                let prefix = self.many(&args[..d - 1], fuel)?;
                let element = Box::new(self.parse(&args[d - 1], fuel)?);
                let tail = self.many(&args[d + 1..], fuel)?;
                let seq = Pattern::Seq { element, tail };
                Ok(prefix
                    .into_iter()
                    .rev()
                    .fold(seq, |rest, head| Pattern::Cons(Box::new(head), Box::new(rest))))
            }
            _ => Err(malformed(span, "at most one `...` per list pattern")),
        }
    }

    fn expand(&mut self, stx: &Syntax, def: &ExpanderDef, fuel: usize) -> Result<Pattern, StaticError> {
        if fuel == 0 {
            return Err(StaticError::FuelExhausted { span: stx.span, expander: def.name.clone() });
        }
        let expanded = expand_once(&stx.to_value(), def).map_err(|e| match e {
            ExpandError::NoRuleMatches => StaticError::NoRuleMatches { span: stx.span, expander: def.name.clone() },
            ExpandError::Template(message) => StaticError::BadTemplate { span: stx.span, message },
        })?;
        self.parse(&Syntax::from_value(&expanded, stx.span), fuel - 1)
    }
}

/// Rejects duplicate variables and `or` branches that bind different sets.
/// Returns the pattern's variables in first-occurrence order.
fn check_variables(p: &Pattern, span: SourceSpan) -> Result<Vec<Symbol>, StaticError> {
    fn disjoint(parts: Vec<Vec<Symbol>>, span: SourceSpan) -> Result<Vec<Symbol>, StaticError> {
        let mut out: Vec<Symbol> = Vec::new();
        for name in parts.into_iter().flatten() {
            if out.contains(&name) {
                return Err(StaticError::DuplicateVariable { span, name });
            }
            out.push(name);
        }
        Ok(out)
    }
    let each = |ps: &[Pattern]| ps.iter().map(|q| check_variables(q, span)).collect::<Result<Vec<_>, _>>();
    match p {
        Pattern::Var(name) => Ok(vec![name.clone()]),
        Pattern::Wildcard | Pattern::Literal(_) | Pattern::Pred(_) | Pattern::EmptyList => Ok(Vec::new()),
        Pattern::And(ps) => disjoint(each(ps)?, span),
        Pattern::Struct { fields, .. } => disjoint(each(fields)?, span),
        Pattern::Cons(h, t) => disjoint(vec![check_variables(h, span)?, check_variables(t, span)?], span),
        Pattern::App(_, q) => check_variables(q, span),
        Pattern::Seq { element, tail } => {
            let mut parts = vec![check_variables(element, span)?];
            parts.extend(each(tail)?);
            disjoint(parts, span)
        }
        Pattern::Or(ps) => {
            let branches = each(ps)?;
            let Some(first) = branches.first() else {
                return Ok(Vec::new());
            };
            for other in &branches[1..] {
                let same = first.len() == other.len() && first.iter().all(|n| other.contains(n));
                if !same {
                    return Err(StaticError::OrBindingMismatch { span, left: first.clone(), right: other.clone() });
                }
            }
            Ok(first.clone())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sexpr::read_syntax;

    fn stx(text: &str) -> Syntax {
        read_syntax(text).unwrap().remove(0)
    }

    fn parse(text: &str, env: &StaticEnv) -> Result<Pattern, StaticError> {
        parse_pattern(&stx(text), env, DEFAULT_FUEL)
    }

    fn rules(env: &mut StaticEnv, name: &str, rules: &[(&str, &str)]) {
        let rules = rules
            .iter()
            .map(|(p, t)| ExpanderRule { pattern: stx(p).to_value(), template: stx(t).to_value() })
            .collect();
        let def = ExpanderDef::from_rules(Symbol::new(name), rules, SourceSpan::default()).unwrap();
        env.register_expander(def, SourceSpan::default()).unwrap();
    }

    fn is_pred_of(p: &Pattern, name: &str) -> bool {
        matches!(p, Pattern::Pred(e) if matches!(&**e, Expr::Var(s) if s.as_str() == name))
    }

    #[test]
    fn list_desugars_to_cons_chain() {
        let p = parse("(list 'cart x y)", &StaticEnv::default()).unwrap();
        let Pattern::Cons(h, t) = p else { panic!() };
        assert!(matches!(*h, Pattern::Literal(ref v) if v.is_symbol("cart")));
        let Pattern::Cons(x, t) = *t else { panic!() };
        assert!(matches!(*x, Pattern::Var(ref s) if s.as_str() == "x"));
        let Pattern::Cons(y, t) = *t else { panic!() };
        assert!(matches!(*y, Pattern::Var(ref s) if s.as_str() == "y"));
        assert!(matches!(*t, Pattern::EmptyList));
    }

    #[test]
    fn question_mark_with_subpatterns() {
        let p = parse("(? real? xs)", &StaticEnv::default()).unwrap();
        let Pattern::And(parts) = p else { panic!() };
        assert_eq!(parts.len(), 2);
        assert!(is_pred_of(&parts[0], "real?"));
        assert!(matches!(&parts[1], Pattern::Var(s) if s.as_str() == "xs"));
    }

    #[test]
    fn ellipsis_shape() {
        let p = parse("(list a b x ... y z)", &StaticEnv::default()).unwrap();
        let Pattern::Cons(_, rest) = p else { panic!() };
        let Pattern::Cons(_, rest) = *rest else { panic!() };
        let Pattern::Seq { element, tail } = *rest else { panic!() };
        assert!(matches!(*element, Pattern::Var(ref s) if s.as_str() == "x"));
        assert_eq!(tail.len(), 2);
        assert!(parse("(list ... x)", &StaticEnv::default()).is_err());
        assert!(parse("(list x ... y ...)", &StaticEnv::default()).is_err());
    }

    #[test]
    fn expanders() {
        let mut env = StaticEnv::default();
        rules(&mut env, "num", &[("(num)", "(? number?)")]);
        rules(&mut env, "??", &[("(?? pred pat)", "(and (? pred) pat)")]);
        assert!(is_pred_of(&parse("(num)", &env).unwrap(), "number?"));
        let Pattern::And(parts) = parse("(?? even? x)", &env).unwrap() else { panic!() };
        assert!(is_pred_of(&parts[0], "even?"));
        assert!(matches!(parse("(num 1)", &env), Err(StaticError::NoRuleMatches { .. })));
    }

    #[test]
    fn expand_once_rewrites_data() {
        let def = ExpanderDef::from_rules(
            Symbol::new("??"),
            vec![ExpanderRule {
                pattern: stx("(?? pred pat)").to_value(),
                template: stx("(and (? pred) pat)").to_value(),
            }],
            SourceSpan::default(),
        )
        .unwrap();
        let out = expand_once(&stx("(?? pred pat)").to_value(), &def).unwrap();
        assert_eq!(out, stx("(and (? pred) pat)").to_value());
    }

    #[test]
    fn self_recursive_expander_runs_out_of_fuel() {
        let mut env = StaticEnv::default();
        rules(&mut env, "loop", &[("(loop)", "(loop)")]);
        assert!(matches!(parse("(loop)", &env), Err(StaticError::FuelExhausted { .. })));
        assert!(matches!(
            parse_pattern(&stx("(loop)"), &env, 1),
            Err(StaticError::FuelExhausted { .. })
        ));
    }

    #[test]
    fn native_transformer() {
        let mut env = StaticEnv::default();
        let def = ExpanderDef::native("evens", |_| Ok(stx("(list (? even?) ...)").to_value()));
        env.register_expander(def, SourceSpan::default()).unwrap();
        assert!(matches!(parse("(evens)", &env).unwrap(), Pattern::Seq { .. }));
    }

    #[test]
    fn bound_variables() {
        let env = StaticEnv::default();
        let names = |t: &str| -> Vec<String> {
            bound_vars(&parse(t, &env).unwrap()).iter().map(|s| s.to_string()).collect()
        };
        assert_eq!(names("(and (? number?) x)"), ["x"]);
        assert!(names("_").is_empty());
        assert_eq!(names("(list x ... y)"), ["x", "y"]);
        assert_eq!(names("(or (cons a b) (cons b a))"), ["a", "b"]);
    }

    #[test]
    fn static_errors() {
        let mut env = StaticEnv::default();
        env.register_struct(Symbol::new("point"), vec![Symbol::new("x"), Symbol::new("y")], SourceSpan::default(), &Env::empty())
            .unwrap();
        assert!(matches!(parse("(frob x)", &env), Err(StaticError::UnknownPatternHead { .. })));
        assert!(matches!(parse("(or x y)", &env), Err(StaticError::OrBindingMismatch { .. })));
        assert!(matches!(parse("(point a)", &env), Err(StaticError::StructArityError { .. })));
        assert!(matches!(parse("(list x x)", &env), Err(StaticError::DuplicateVariable { .. })));
        assert!(matches!(parse("(and x x)", &env), Err(StaticError::DuplicateVariable { .. })));
        assert!(parse("(or (list x) (cons x _))", &env).is_ok());
        assert!(matches!(parse("(point a b)", &env).unwrap(), Pattern::Struct { fields, .. } if fields.len() == 2));
    }

    #[test]
    fn registration() {
        let mut env = StaticEnv::default();
        let runtime = Env::base();
        let point = Symbol::new("point");
        let fields = vec![Symbol::new("x"), Symbol::new("y")];
        let info = env.register_struct(point.clone(), fields.clone(), SourceSpan::default(), &runtime).unwrap();
        assert_eq!(info.accessors.len(), 2);
        assert_eq!(info.predicate.as_str(), "point?");
        assert!(matches!(
            env.register_struct(point, fields, SourceSpan::default(), &runtime),
            Err(StaticError::DuplicateDefinition { .. })
        ));
        assert!(matches!(
            env.register_expander(ExpanderDef::native("list", |v| Ok(v.clone())), SourceSpan::default()),
            Err(StaticError::ReservedName { .. })
        ));
        let mk = runtime.lookup(&Symbol::new("make-point")).unwrap();
        let px = runtime.lookup(&Symbol::new("point-x")).unwrap();
        let p = crate::eval::apply_value(&mk, &[1.into(), 2.into()]).unwrap();
        assert_eq!(crate::eval::apply_value(&px, &[p]).unwrap(), Value::Int(1));
    }
}
