//! Macro-by-example matching and substitution over plain data.
//!
//! Symbols in a use pattern are pattern variables (`_` matches anything
//! without binding), other atoms match by equality, and `p ...` matches zero
//! or more elements followed by any number of fixed patterns.
//!
//! When an input list itself contains `...` (a pattern such as
//! `(polar r theta ...)`), the element before it is captured together with
//! its ellipsis. Substituting that element under a template ellipsis emits
//! the instantiated template followed by `...` again, so
//! `[(_ r ps ...) (list r (? real? ps) ...)]` turns `(polar r theta ...)`
//! into `(list r (? real? theta) ...)`.

use std::collections::HashMap;

use crate::sexpr::{values_equal, Symbol, Value};

pub const ELLIPSIS: &str = "...";

#[derive(Debug, Clone)]
pub enum Binding {
    One(Value),
    /// One entry per repetition; the flag marks elements followed by `...`
    /// in the input.
    Many(Vec<(Binding, bool)>),
}

pub type Bindings = HashMap<Symbol, Binding>;

fn is_ellipsis(v: &Value) -> bool {
    v.is_symbol(ELLIPSIS)
}

/// Splits a possibly improper list into its elements and final tail.
fn spine(v: &Value) -> (Vec<Value>, Value) {
    let mut items = Vec::new();
    let mut cur = v;
    while let Value::Pair(cell) = cur {
        items.push(cell.car.clone());
        cur = &cell.cdr;
    }
    (items, cur.clone())
}

/// Pattern variables with their ellipsis depth.
pub fn pattern_vars(pat: &Value) -> Vec<(Symbol, usize)> {
    let mut out = Vec::new();
    collect_vars(pat, 0, &mut out);
    out
}

fn collect_vars(pat: &Value, depth: usize, out: &mut Vec<(Symbol, usize)>) {
    match pat {
        Value::Symbol(s) if s.as_str() != "_" && s.as_str() != ELLIPSIS => out.push((s.clone(), depth)),
        Value::Pair(_) => {
            let (items, tail) = spine(pat);
            for (i, item) in items.iter().enumerate() {
                if is_ellipsis(item) {
                    continue;
                }
                let repeated = items.get(i + 1).is_some_and(is_ellipsis);
                collect_vars(item, depth + usize::from(repeated), out);
            }
            collect_vars(&tail, depth, out);
        }
        _ => {}
    }
}

/// Checks a use pattern for misplaced ellipses and repeated variables.
pub fn check_pattern(pat: &Value) -> Result<(), String> {
    let vars = pattern_vars(pat);
    for (i, (name, _)) in vars.iter().enumerate() {
        if vars[..i].iter().any(|(n, _)| n == name) {
            return Err(format!("pattern variable `{}` appears twice", name));
        }
    }
    check_ellipses(pat, true)
}

fn check_ellipses(pat: &Value, in_pattern: bool) -> Result<(), String> {
    if is_ellipsis(pat) {
        return Err("misplaced `...`".into());
    }
    if let Value::Pair(_) = pat {
        let (items, tail) = spine(pat);
        if !in_pattern && items.len() == 2 && items.iter().all(is_ellipsis) {
            return Ok(());
        }
        let mut seen = 0;
        for (i, item) in items.iter().enumerate() {
            if is_ellipsis(item) {
                if i == 0 || is_ellipsis(&items[i - 1]) {
                    return Err("`...` must follow a subpattern".into());
                }
                seen += 1;
                if in_pattern && seen > 1 {
                    return Err("at most one `...` per list level".into());
                }
            } else {
                check_ellipses(item, in_pattern)?;
            }
        }
        if !matches!(tail, Value::Null) {
            check_ellipses(&tail, in_pattern)?;
        }
    }
    Ok(())
}

/// Checks that every template variable is used at least as deep as it was bound.
pub fn check_template(pat: &Value, template: &Value) -> Result<(), String> {
    check_ellipses(template, false)?;
    let bound: HashMap<Symbol, usize> = pattern_vars(pat).into_iter().collect();
    let mut used = Vec::new();
    collect_vars(template, 0, &mut used);
    for (name, depth) in used {
        if let Some(&bound_depth) = bound.get(&name) {
            if bound_depth > depth {
                return Err(format!(
                    "`{}` is bound under {} ellipses but used under {}",
                    name, bound_depth, depth
                ));
            }
        }
    }
    Ok(())
}

/// Matches `input` against the use pattern `pat`, extending `binds`.
pub fn match_pattern(pat: &Value, input: &Value, binds: &mut Bindings) -> bool {
    match pat {
        Value::Symbol(s) if s.as_str() == "_" => true,
        Value::Symbol(s) => {
            binds.insert(s.clone(), Binding::One(input.clone()));
            true
        }
        Value::Pair(_) => {
            let (items, tail) = spine(pat);
            match items.iter().position(is_ellipsis) {
                Some(dots) => match_sequence(&items[..dots - 1], &items[dots - 1], &items[dots + 1..], &tail, input, binds),
                None => match_fixed(&items, &tail, input, binds),
            }
        }
        atom => values_equal(atom, input),
    }
}

fn match_fixed(items: &[Value], tail: &Value, input: &Value, binds: &mut Bindings) -> bool {
    let mut cur = input;
    for item in items {
        match cur {
            Value::Pair(cell) => {
                if !match_pattern(item, &cell.car, binds) {
                    return false;
                }
                cur = &cell.cdr;
            }
            _ => return false,
        }
    }
    match tail {
        Value::Null => matches!(cur, Value::Null),
        t => match_pattern(t, cur, binds),
    }
}

fn match_sequence(
    before: &[Value],
    element: &Value,
    after: &[Value],
    tail: &Value,
    input: &Value,
    binds: &mut Bindings,
) -> bool {
    let (raw, input_tail) = spine(input);
    // Group each input element with a directly following `...`.
    let mut groups: Vec<(Value, bool)> = Vec::with_capacity(raw.len());
    let mut i = 0;
    while i < raw.len() {
        let marked = raw.get(i + 1).is_some_and(is_ellipsis) && !is_ellipsis(&raw[i]);
        groups.push((raw[i].clone(), marked));
        i += if marked { 2 } else { 1 };
    }
    let fixed = before.len() + after.len();
    if groups.len() < fixed {
        return false;
    }
    let repeat_end = groups.len() - after.len();
    for (p, (v, marked)) in before.iter().zip(&groups) {
        if *marked || !match_pattern(p, v, binds) {
            return false;
        }
    }
    for (p, (v, marked)) in after.iter().zip(&groups[repeat_end..]) {
        if *marked || !match_pattern(p, v, binds) {
            return false;
        }
    }
    let element_vars: Vec<Symbol> = pattern_vars(element).into_iter().map(|(n, _)| n).collect();
    let mut columns: Vec<Vec<(Binding, bool)>> = vec![Vec::new(); element_vars.len()];
    for (v, marked) in &groups[before.len()..repeat_end] {
        let mut inner = Bindings::new();
        if !match_pattern(element, v, &mut inner) {
            return false;
        }
        for (col, name) in columns.iter_mut().zip(&element_vars) {
            col.push((inner.remove(name).expect("element variable bound"), *marked));
        }
    }
    for (name, col) in element_vars.into_iter().zip(columns) {
        binds.insert(name, Binding::Many(col));
    }
    match tail {
        Value::Null => matches!(input_tail, Value::Null),
        t => match_pattern(t, &input_tail, binds),
    }
}

/// Substitutes `binds` into `template`.
pub fn instantiate(template: &Value, binds: &Bindings) -> Result<Value, String> {
    match template {
        Value::Symbol(s) => match binds.get(s) {
            Some(Binding::One(v)) => Ok(v.clone()),
            Some(Binding::Many(_)) => Err(format!("`{}` used without enough `...`", s)),
            None => Ok(template.clone()),
        },
        Value::Pair(_) => {
            let (items, tail) = spine(template);
            if items.len() == 2 && items.iter().all(is_ellipsis) && matches!(tail, Value::Null) {
                return Ok(Value::sym(ELLIPSIS));
            }
            let mut out = Vec::with_capacity(items.len());
            let mut i = 0;
            while i < items.len() {
                let item = &items[i];
                if items.get(i + 1).is_some_and(is_ellipsis) {
                    expand_repetition(item, binds, &mut out)?;
                    i += 2;
                } else {
                    out.push(instantiate(item, binds)?);
                    i += 1;
                }
            }
            let tail = instantiate(&tail, binds)?;
            Ok(Value::list_with_tail(out, tail))
        }
        atom => Ok(atom.clone()),
    }
}

fn expand_repetition(item: &Value, binds: &Bindings, out: &mut Vec<Value>) -> Result<(), String> {
    let mut used = Vec::new();
    collect_vars(item, 0, &mut used);
    let drivers: Vec<(&Symbol, &Vec<(Binding, bool)>)> = used
        .iter()
        .filter_map(|(name, _)| match binds.get(name) {
            Some(Binding::Many(seq)) => Some((name, seq)),
            _ => None,
        })
        .collect();
    let Some((_, first)) = drivers.first() else {
        return Err(format!("no repeated variable under `...` in {}", item));
    };
    let count = first.len();
    if drivers.iter().any(|(_, seq)| seq.len() != count) {
        return Err("repeated variables have different lengths".into());
    }
    for i in 0..count {
        let mut local = binds.clone();
        let mut marked = false;
        for (name, seq) in &drivers {
            let (b, m) = &seq[i];
            marked |= *m;
            local.insert((*name).clone(), b.clone());
        }
        out.push(instantiate(item, &local)?);
        if marked {
            out.push(Value::sym(ELLIPSIS));
        }
    }
    Ok(())
}
