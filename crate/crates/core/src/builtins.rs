//! Builtin procedures of the base environment.

use crate::error::EvalError;
use crate::eval::{apply_value, Arity, Builtin, Env};
use crate::sexpr::{values_equal, Value};

#[derive(Clone, Copy)]
enum Num {
    Int(i64),
    Real(f64),
}

impl Num {
    fn of(who: &str, v: &Value) -> Result<Num, EvalError> {
        match v {
            Value::Int(n) => Ok(Num::Int(*n)),
            Value::Real(x) => Ok(Num::Real(*x)),
            other => Err(EvalError::type_error(who, "number", other)),
        }
    }

    fn to_f64(self) -> f64 {
        match self {
            Num::Int(n) => n as f64,
            Num::Real(x) => x,
        }
    }

    fn into_value(self) -> Value {
        match self {
            Num::Int(n) => Value::Int(n),
            Num::Real(x) => Value::Real(x),
        }
    }
}

fn overflow(who: &str) -> EvalError {
    EvalError::TypeError(format!("{}: integer overflow", who))
}

fn arith(
    who: &'static str,
    a: Num,
    b: Num,
    int_op: fn(i64, i64) -> Option<i64>,
    real_op: fn(f64, f64) -> f64,
) -> Result<Num, EvalError> {
    match (a, b) {
        (Num::Int(x), Num::Int(y)) => int_op(x, y).map(Num::Int).ok_or_else(|| overflow(who)),
        _ => Ok(Num::Real(real_op(a.to_f64(), b.to_f64()))),
    }
}

fn fold_numbers(
    who: &'static str,
    args: &[Value],
    unit: i64,
    int_op: fn(i64, i64) -> Option<i64>,
    real_op: fn(f64, f64) -> f64,
) -> Result<Value, EvalError> {
    let mut acc = Num::Int(unit);
    for a in args {
        acc = arith(who, acc, Num::of(who, a)?, int_op, real_op)?;
    }
    Ok(acc.into_value())
}

fn divide(a: Num, b: Num) -> Result<Num, EvalError> {
    match (a, b) {
        (_, Num::Int(0)) => Err(EvalError::TypeError("/: division by zero".into())),
        (Num::Int(x), Num::Int(y)) if x.checked_rem(y) == Some(0) => {
            x.checked_div(y).map(Num::Int).ok_or_else(|| overflow("/"))
        }
        _ => Ok(Num::Real(a.to_f64() / b.to_f64())),
    }
}

fn exact_sqrt(n: i64) -> Option<i64> {
    let guess = (n as f64).sqrt().round() as i64;
    (guess.saturating_sub(1)..=guess.saturating_add(1))
        .find(|r| *r >= 0 && r.checked_mul(*r) == Some(n))
}

fn sqrt(v: &Value) -> Result<Value, EvalError> {
    match Num::of("sqrt", v)? {
        Num::Int(n) if n < 0 => Err(EvalError::type_error("sqrt", "non-negative number", v)),
        Num::Int(n) => Ok(exact_sqrt(n).map_or(Value::Real((n as f64).sqrt()), Value::Int)),
        Num::Real(x) if x < 0.0 => Err(EvalError::type_error("sqrt", "non-negative number", v)),
        Num::Real(x) => Ok(Value::Real(x.sqrt())),
    }
}

fn is_integer(v: &Value) -> bool {
    match v {
        Value::Int(_) => true,
        Value::Real(x) => x.is_finite() && x.fract() == 0.0,
        _ => false,
    }
}

fn parity(who: &str, v: &Value) -> Result<bool, EvalError> {
    match v {
        Value::Int(n) => Ok(n % 2 == 0),
        Value::Real(x) if is_integer(v) => Ok(x % 2.0 == 0.0),
        other => Err(EvalError::type_error(who, "integer", other)),
    }
}

fn compare(who: &'static str, args: &[Value], ok: fn(f64, f64) -> bool, int_ok: fn(&i64, &i64) -> bool) -> Result<Value, EvalError> {
    let nums = args.iter().map(|a| Num::of(who, a)).collect::<Result<Vec<_>, _>>()?;
    Ok(Value::Bool(nums.windows(2).all(|w| match (w[0], w[1]) {
        (Num::Int(a), Num::Int(b)) => int_ok(&a, &b),
        (a, b) => ok(a.to_f64(), b.to_f64()),
    })))
}

fn list_of(who: &str, v: &Value) -> Result<Vec<Value>, EvalError> {
    v.list_items().ok_or_else(|| EvalError::type_error(who, "list", v))
}

fn nth(who: &'static str, v: &Value, n: usize) -> Result<Value, EvalError> {
    let items = list_of(who, v)?;
    items
        .get(n)
        .cloned()
        .ok_or_else(|| EvalError::type_error(who, &format!("list with at least {} elements", n + 1), v))
}

/// Text spliced by `~a`: strings and symbols contribute their bare text.
pub fn display_text(v: &Value) -> String {
    match v {
        Value::Str(s) => s.to_string(),
        Value::Symbol(s) => s.as_str().to_string(),
        other => other.to_string(),
    }
}

fn format(args: &[Value]) -> Result<Value, EvalError> {
    let template = match &args[0] {
        Value::Str(s) => s.clone(),
        other => return Err(EvalError::type_error("format", "string", other)),
    };
    let mut rest = args[1..].iter();
    let mut out = String::new();
    let mut chars = template.chars();
    while let Some(c) = chars.next() {
        if c != '~' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('a') | Some('A') => {
                let arg = rest
                    .next()
                    .ok_or_else(|| EvalError::TypeError("format: not enough arguments".into()))?;
                out.push_str(&display_text(arg));
            }
            Some('n') => out.push('\n'),
            other => {
                return Err(EvalError::TypeError(format!(
                    "format: unsupported directive ~{}",
                    other.map(String::from).unwrap_or_default()
                )))
            }
        }
    }
    if rest.next().is_some() {
        return Err(EvalError::TypeError("format: too many arguments".into()));
    }
    Ok(Value::string(&out))
}

fn map(args: &[Value]) -> Result<Value, EvalError> {
    let f = &args[0];
    let lists = args[1..].iter().map(|l| list_of("map", l)).collect::<Result<Vec<_>, _>>()?;
    let len = lists[0].len();
    if lists.iter().any(|l| l.len() != len) {
        return Err(EvalError::TypeError("map: all lists must have the same length".into()));
    }
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        let call_args: Vec<Value> = lists.iter().map(|l| l[i].clone()).collect();
        out.push(apply_value(f, &call_args)?);
    }
    Ok(Value::list(out))
}

fn predicate(env: &Env, name: &str, test: fn(&Value) -> bool) {
    env.define_builtin(name, Arity::exactly(1), move |a| Ok(Value::Bool(test(&a[0]))));
}

pub(crate) fn install(env: &Env) {
    env.define_builtin("+", Arity::at_least(0), |a| {
        fold_numbers("+", a, 0, i64::checked_add, |x, y| x + y)
    });
    env.define_builtin("*", Arity::at_least(0), |a| {
        fold_numbers("*", a, 1, i64::checked_mul, |x, y| x * y)
    });
    env.define_builtin("-", Arity::at_least(1), |a| {
        let first = Num::of("-", &a[0])?;
        if a.len() == 1 {
            return Ok(arith("-", Num::Int(0), first, i64::checked_sub, |x, y| x - y)?.into_value());
        }
        let mut acc = first;
        for v in &a[1..] {
            acc = arith("-", acc, Num::of("-", v)?, i64::checked_sub, |x, y| x - y)?;
        }
        Ok(acc.into_value())
    });
    env.define_builtin("/", Arity::at_least(1), |a| {
        let first = Num::of("/", &a[0])?;
        if a.len() == 1 {
            return Ok(divide(Num::Int(1), first)?.into_value());
        }
        let mut acc = first;
        for v in &a[1..] {
            acc = divide(acc, Num::of("/", v)?)?;
        }
        Ok(acc.into_value())
    });
    env.define_builtin("sqrt", Arity::exactly(1), |a| sqrt(&a[0]));
    env.define_builtin("sqr", Arity::exactly(1), |a| {
        let n = Num::of("sqr", &a[0])?;
        Ok(arith("sqr", n, n, i64::checked_mul, |x, y| x * y)?.into_value())
    });
    env.define_builtin("add1", Arity::exactly(1), |a| {
        Ok(arith("add1", Num::of("add1", &a[0])?, Num::Int(1), i64::checked_add, |x, y| x + y)?.into_value())
    });
    env.define_builtin("sub1", Arity::exactly(1), |a| {
        Ok(arith("sub1", Num::of("sub1", &a[0])?, Num::Int(1), i64::checked_sub, |x, y| x - y)?.into_value())
    });
    env.define_builtin("abs", Arity::exactly(1), |a| match Num::of("abs", &a[0])? {
        Num::Int(n) => n.checked_abs().map(Value::Int).ok_or_else(|| overflow("abs")),
        Num::Real(x) => Ok(Value::Real(x.abs())),
    });
    env.define_builtin("atan", Arity::range(1, 2), |a| {
        let y = Num::of("atan", &a[0])?.to_f64();
        Ok(Value::Real(match a.get(1) {
            Some(x) => y.atan2(Num::of("atan", x)?.to_f64()),
            None => y.atan(),
        }))
    });
    env.define_builtin("=", Arity::at_least(1), |a| compare("=", a, |x, y| x == y, i64::eq));
    env.define_builtin("<", Arity::at_least(1), |a| compare("<", a, |x, y| x < y, i64::lt));
    env.define_builtin(">", Arity::at_least(1), |a| compare(">", a, |x, y| x > y, i64::gt));
    env.define_builtin("<=", Arity::at_least(1), |a| compare("<=", a, |x, y| x <= y, i64::le));
    env.define_builtin(">=", Arity::at_least(1), |a| compare(">=", a, |x, y| x >= y, i64::ge));

    env.define_builtin("apply", Arity::at_least(2), |a| {
        let (last, middle) = a[1..].split_last().expect("arity checked");
        let mut args = middle.to_vec();
        args.extend(list_of("apply", last)?);
        apply_value(&a[0], &args)
    });
    env.define_builtin("map", Arity::at_least(2), map);
    env.define_builtin("curry", Arity::at_least(1), |a| {
        let f = a[0].clone();
        let fixed = a[1..].to_vec();
        Ok(Builtin::new("curried", Arity::at_least(0), move |rest| {
            let mut args = fixed.clone();
            args.extend_from_slice(rest);
            apply_value(&f, &args)
        }))
    });

    env.define_builtin("cons", Arity::exactly(2), |a| Ok(Value::cons(a[0].clone(), a[1].clone())));
    env.define_builtin("list", Arity::at_least(0), |a| Ok(Value::list(a.to_vec())));
    env.define_builtin("first", Arity::exactly(1), |a| nth("first", &a[0], 0));
    env.define_builtin("second", Arity::exactly(1), |a| nth("second", &a[0], 1));
    env.define_builtin("third", Arity::exactly(1), |a| nth("third", &a[0], 2));
    env.define_builtin("rest", Arity::exactly(1), |a| match &a[0] {
        Value::Pair(cell) if a[0].proper_length().is_some() => Ok(cell.cdr.clone()),
        other => Err(EvalError::type_error("rest", "non-empty list", other)),
    });
    env.define_builtin("length", Arity::exactly(1), |a| {
        let n = a[0].proper_length().ok_or_else(|| EvalError::type_error("length", "list", &a[0]))?;
        Ok(Value::Int(n as i64))
    });

    env.define_builtin("equal?", Arity::exactly(2), |a| Ok(Value::Bool(values_equal(&a[0], &a[1]))));
    env.define_builtin("eq?", Arity::exactly(2), |a| {
        let same = match (&a[0], &a[1]) {
            (Value::Pair(x), Value::Pair(y)) => std::sync::Arc::ptr_eq(x, y),
            (Value::Struct(x), Value::Struct(y)) => std::sync::Arc::ptr_eq(x, y),
            (Value::Str(x), Value::Str(y)) => std::sync::Arc::ptr_eq(x, y),
            (x, y) => values_equal(x, y),
        };
        Ok(Value::Bool(same))
    });
    env.define_builtin("not", Arity::exactly(1), |a| Ok(Value::Bool(!a[0].is_true())));
    predicate(env, "number?", |v| matches!(v, Value::Int(_) | Value::Real(_)));
    predicate(env, "real?", |v| matches!(v, Value::Int(_) | Value::Real(_)));
    predicate(env, "integer?", is_integer);
    predicate(env, "symbol?", |v| matches!(v, Value::Symbol(_)));
    predicate(env, "string?", |v| matches!(v, Value::Str(_)));
    predicate(env, "boolean?", |v| matches!(v, Value::Bool(_)));
    predicate(env, "null?", |v| matches!(v, Value::Null));
    predicate(env, "pair?", |v| matches!(v, Value::Pair(_)));
    predicate(env, "list?", |v| v.proper_length().is_some());
    predicate(env, "procedure?", |v| matches!(v, Value::Callable(_)));
    env.define_builtin("even?", Arity::exactly(1), |a| Ok(Value::Bool(parity("even?", &a[0])?)));
    env.define_builtin("odd?", Arity::exactly(1), |a| Ok(Value::Bool(!parity("odd?", &a[0])?)));

    env.define_builtin("string-append", Arity::at_least(0), |a| {
        let mut out = String::new();
        for v in a {
            match v {
                Value::Str(s) => out.push_str(s),
                other => return Err(EvalError::type_error("string-append", "string", other)),
            }
        }
        Ok(Value::string(&out))
    });
    env.define_builtin("format", Arity::at_least(1), format);
    env.define_builtin("error", Arity::at_least(1), |a| {
        let message: Vec<String> = a.iter().map(display_text).collect();
        Err(EvalError::UserError(message.join(" ")))
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sexpr::Symbol;

    fn call(name: &str, args: &[Value]) -> Result<Value, EvalError> {
        let env = Env::base();
        apply_value(&env.lookup(&Symbol::new(name)).unwrap(), args)
    }

    #[test]
    fn sqrt_is_exact_on_perfect_squares() {
        assert!(matches!(call("sqrt", &[16.into()]).unwrap(), Value::Int(4)));
        assert!(matches!(call("sqrt", &[0.into()]).unwrap(), Value::Int(0)));
        assert!(matches!(call("sqrt", &[17.into()]).unwrap(), Value::Real(x) if (x - 17f64.sqrt()).abs() < 1e-12));
        assert!(matches!(call("sqrt", &[Value::Real(2.25)]).unwrap(), Value::Real(x) if x == 1.5));
        assert!(call("sqrt", &[(-1).into()]).is_err());
        assert!(matches!(call("sqrt", &[(i64::MAX).into()]).unwrap(), Value::Real(_)));
    }

    #[test]
    fn mixed_arithmetic_promotes() {
        assert!(matches!(call("+", &[1.into(), Value::Real(0.5)]).unwrap(), Value::Real(x) if x == 1.5));
        assert!(matches!(call("/", &[6.into(), 3.into()]).unwrap(), Value::Int(2)));
        assert!(matches!(call("/", &[1.into(), 2.into()]).unwrap(), Value::Real(x) if x == 0.5));
        assert!(call("/", &[1.into(), 0.into()]).is_err());
        assert!(call("+", &[i64::MAX.into(), 1.into()]).is_err());
        assert!(matches!(call("-", &[5.into()]).unwrap(), Value::Int(-5)));
    }

    #[test]
    fn integer_predicate() {
        assert_eq!(call("integer?", &[4.into()]).unwrap(), Value::Bool(true));
        assert_eq!(call("integer?", &[Value::Real(4.0)]).unwrap(), Value::Bool(true));
        assert_eq!(call("integer?", &[Value::Real(4.5)]).unwrap(), Value::Bool(false));
        assert_eq!(call("integer?", &[Value::sym("a")]).unwrap(), Value::Bool(false));
    }

    #[test]
    fn format_directives() {
        let f = |args: &[Value]| call("format", args).unwrap();
        assert_eq!(f(&[Value::string("perfect square: ~a"), 4.into()]), Value::string("perfect square: 4"));
        assert_eq!(f(&[Value::string("~a/~a"), Value::string("s"), Value::sym("y")]), Value::string("s/y"));
        assert_eq!(f(&[Value::string("~a~n"), Value::list([1.into()])]), Value::string("(1)\n"));
        assert!(call("format", &[Value::string("~s"), 1.into()]).is_err());
        assert!(call("format", &[Value::string("~a")]).is_err());
    }

    #[test]
    fn curry_partially_applies() {
        let env = Env::base();
        let plus = env.lookup(&Symbol::new("+")).unwrap();
        let curried = call("curry", &[plus.clone(), 3.into()]).unwrap();
        assert_eq!(apply_value(&curried, &[4.into()]).unwrap(), apply_value(&plus, &[3.into(), 4.into()]).unwrap());
    }

    #[test]
    fn list_accessors() {
        let l = Value::list([1.into(), 2.into(), 3.into()]);
        assert_eq!(call("first", &[l.clone()]).unwrap(), 1.into());
        assert_eq!(call("third", &[l.clone()]).unwrap(), 3.into());
        assert_eq!(call("rest", &[l.clone()]).unwrap(), Value::list([2.into(), 3.into()]));
        assert_eq!(call("length", &[l.clone()]).unwrap(), 3.into());
        assert!(call("rest", &[Value::Null]).is_err());
        assert!(call("length", &[Value::cons(1.into(), 2.into())]).is_err());
    }
}
