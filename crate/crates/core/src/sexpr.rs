//! Runtime values, structural equality, and the S-expression reader/printer.
//!
//! The reader produces [`Syntax`] trees, which are values annotated with
//! source spans. Most consumers only need [`read_all`], which strips the spans.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::eval::Callable;

/// Byte range into the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SourceSpan {
    pub start: usize,
    pub end: usize,
}

impl SourceSpan {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        SourceSpan { start, end }
    }

    pub fn contains(&self, other: &SourceSpan) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

/// An interned-by-content symbol name.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol(Arc<str>);

impl Symbol {
    pub fn new(name: &str) -> Self {
        Symbol(Arc::from(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Symbol {
    fn from(s: &str) -> Self {
        Symbol::new(s)
    }
}

/// Identity of a struct type. Struct names are unique within a session, so
/// name plus arity is enough to tell types apart.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StructTag {
    pub name: Symbol,
    pub arity: usize,
}

#[derive(Debug, Clone)]
pub struct StructInstance {
    pub tag: StructTag,
    pub fields: Vec<Value>,
}

/// Cons cell. Dropping a long list unrolls the tail iteratively.
pub struct PairCell {
    pub car: Value,
    pub cdr: Value,
}

impl Drop for PairCell {
    fn drop(&mut self) {
        let mut next = std::mem::replace(&mut self.cdr, Value::Null);
        while let Value::Pair(cell) = next {
            match Arc::try_unwrap(cell) {
                Ok(mut cell) => next = std::mem::replace(&mut cell.cdr, Value::Null),
                Err(_) => break,
            }
        }
    }
}

#[derive(Clone)]
pub enum Value {
    Int(i64),
    Real(f64),
    Symbol(Symbol),
    Str(Arc<str>),
    Bool(bool),
    Null,
    Pair(Arc<PairCell>),
    Struct(Arc<StructInstance>),
    Callable(Callable),
}

impl Value {
    pub fn sym(name: &str) -> Value {
        Value::Symbol(Symbol::new(name))
    }

    pub fn string(s: &str) -> Value {
        Value::Str(Arc::from(s))
    }

    pub fn cons(car: Value, cdr: Value) -> Value {
        Value::Pair(Arc::new(PairCell { car, cdr }))
    }

    pub fn list<I>(items: I) -> Value
    where
        I: IntoIterator<Item = Value>,
        I::IntoIter: DoubleEndedIterator,
    {
        Value::list_with_tail(items, Value::Null)
    }

    pub fn list_with_tail<I>(items: I, tail: Value) -> Value
    where
        I: IntoIterator<Item = Value>,
        I::IntoIter: DoubleEndedIterator,
    {
        items
            .into_iter()
            .rev()
            .fold(tail, |acc, item| Value::cons(item, acc))
    }

    pub fn new_struct(tag: StructTag, fields: Vec<Value>) -> Value {
        debug_assert_eq!(tag.arity, fields.len());
        Value::Struct(Arc::new(StructInstance { tag, fields }))
    }

    pub fn is_true(&self) -> bool {
        !matches!(self, Value::Bool(false))
    }

    pub fn as_symbol(&self) -> Option<&Symbol> {
        match self {
            Value::Symbol(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_symbol(&self, name: &str) -> bool {
        matches!(self, Value::Symbol(s) if s.as_str() == name)
    }

    pub fn as_pair(&self) -> Option<(&Value, &Value)> {
        match self {
            Value::Pair(cell) => Some((&cell.car, &cell.cdr)),
            _ => None,
        }
    }

    /// Elements of a proper list, or `None` for anything else.
    pub fn list_items(&self) -> Option<Vec<Value>> {
        let mut out = Vec::new();
        let mut cur = self;
        loop {
            match cur {
                Value::Null => return Some(out),
                Value::Pair(cell) => {
                    out.push(cell.car.clone());
                    cur = &cell.cdr;
                }
                _ => return None,
            }
        }
    }

    /// Length of a proper list, or `None` when the value is not one.
    pub fn proper_length(&self) -> Option<usize> {
        let mut n = 0;
        let mut cur = self;
        loop {
            match cur {
                Value::Null => return Some(n),
                Value::Pair(cell) => {
                    n += 1;
                    cur = &cell.cdr;
                }
                _ => return None,
            }
        }
    }

    pub fn contains_callable(&self) -> bool {
        let mut cur = self;
        loop {
            match cur {
                Value::Callable(_) => return true,
                Value::Struct(s) => return s.fields.iter().any(Value::contains_callable),
                Value::Pair(cell) => {
                    if cell.car.contains_callable() {
                        return true;
                    }
                    cur = &cell.cdr;
                }
                _ => return false,
            }
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "integer",
            Value::Real(_) => "real",
            Value::Symbol(_) => "symbol",
            Value::Str(_) => "string",
            Value::Bool(_) => "boolean",
            Value::Null => "empty list",
            Value::Pair(_) => "pair",
            Value::Struct(_) => "struct",
            Value::Callable(_) => "procedure",
        }
    }
}

impl From<i64> for Value {
    fn from(n: i64) -> Self {
        Value::Int(n)
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Real(x)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

/// Deep structural equality. Integers and reals are never equal to each
/// other; NaN is equal to itself so that equality stays reflexive.
pub fn values_equal(a: &Value, b: &Value) -> bool {
    let (mut a, mut b) = (a, b);
    loop {
        match (a, b) {
            (Value::Pair(x), Value::Pair(y)) => {
                if Arc::ptr_eq(x, y) {
                    return true;
                }
                if !values_equal(&x.car, &y.car) {
                    return false;
                }
                a = &x.cdr;
                b = &y.cdr;
            }
            (Value::Int(x), Value::Int(y)) => return x == y,
            (Value::Real(x), Value::Real(y)) => return x == y || (x.is_nan() && y.is_nan()),
            (Value::Symbol(x), Value::Symbol(y)) => return x == y,
            (Value::Str(x), Value::Str(y)) => return x == y,
            (Value::Bool(x), Value::Bool(y)) => return x == y,
            (Value::Null, Value::Null) => return true,
            (Value::Struct(x), Value::Struct(y)) => {
                return x.tag == y.tag
                    && x.fields.len() == y.fields.len()
                    && x.fields.iter().zip(&y.fields).all(|(p, q)| values_equal(p, q))
            }
            (Value::Callable(x), Value::Callable(y)) => return x.same(y),
            _ => return false,
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Value) -> bool {
        values_equal(self, other)
    }
}

// ---------------------------------------------------------------------------
// Printer

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PrintError {
    #[error("value contains a procedure and cannot be printed as data")]
    Unprintable,
}

/// Prints a callable-free value in a form `read_all` reads back.
pub fn print_value(v: &Value) -> Result<String, PrintError> {
    if v.contains_callable() {
        return Err(PrintError::Unprintable);
    }
    Ok(v.to_string())
}

fn write_real(f: &mut fmt::Formatter<'_>, x: f64) -> fmt::Result {
    if x.is_nan() {
        f.write_str("+nan.0")
    } else if x.is_infinite() {
        f.write_str(if x > 0.0 { "+inf.0" } else { "-inf.0" })
    } else {
        // Debug output is the shortest round-tripping form and always marks
        // the value as a real ("5.0", "1e-7").
        write!(f, "{:?}", x)
    }
}

fn write_string(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("\"")?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            '\r' => f.write_str("\\r")?,
            c if c.is_control() => write!(f, "\\x{:x};", c as u32)?,
            c => write!(f, "{}", c)?,
        }
    }
    f.write_str("\"")
}

fn is_delimiter(c: char) -> bool {
    c.is_whitespace() || matches!(c, '(' | ')' | '[' | ']' | '"' | ';' | '\'')
}

fn symbol_needs_bars(name: &str) -> bool {
    name.is_empty()
        || name == "."
        || name.starts_with('#')
        || name.chars().any(|c| is_delimiter(c) || c == '|' || c == '\\')
        || classify_number(name).is_some()
}

fn write_symbol(f: &mut fmt::Formatter<'_>, name: &str) -> fmt::Result {
    if !symbol_needs_bars(name) {
        return f.write_str(name);
    }
    f.write_str("|")?;
    for c in name.chars() {
        if c == '|' || c == '\\' {
            f.write_str("\\")?;
        }
        write!(f, "{}", c)?;
    }
    f.write_str("|")
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{}", n),
            Value::Real(x) => write_real(f, *x),
            Value::Symbol(s) => write_symbol(f, s.as_str()),
            Value::Str(s) => write_string(f, s),
            Value::Bool(true) => f.write_str("#t"),
            Value::Bool(false) => f.write_str("#f"),
            Value::Null => f.write_str("()"),
            Value::Pair(cell) => {
                write!(f, "({}", cell.car)?;
                let mut cur = &cell.cdr;
                loop {
                    match cur {
                        Value::Null => break,
                        Value::Pair(next) => {
                            write!(f, " {}", next.car)?;
                            cur = &next.cdr;
                        }
                        tail => {
                            write!(f, " . {}", tail)?;
                            break;
                        }
                    }
                }
                f.write_str(")")
            }
            Value::Struct(s) => {
                f.write_str("#(struct ")?;
                write_symbol(f, s.tag.name.as_str())?;
                for field in &s.fields {
                    write!(f, " {}", field)?;
                }
                f.write_str(")")
            }
            Value::Callable(c) => write!(f, "#<procedure:{}>", c.name()),
        }
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

// ---------------------------------------------------------------------------
// Reader

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReadError {
    #[error("unbalanced delimiter at {span}: {message}")]
    UnbalancedDelimiter { span: SourceSpan, message: String },
    #[error("bad token `{token}` at {span}")]
    BadToken { span: SourceSpan, token: String },
}

impl ReadError {
    pub fn span(&self) -> SourceSpan {
        match self {
            ReadError::UnbalancedDelimiter { span, .. } | ReadError::BadToken { span, .. } => *span,
        }
    }
}

/// A read datum with source positions on every node.
#[derive(Debug, Clone)]
pub struct Syntax {
    pub kind: SyntaxKind,
    pub span: SourceSpan,
}

#[derive(Debug, Clone)]
pub enum SyntaxKind {
    Atom(Value),
    /// `tail` is `Some` only for dotted lists.
    List {
        items: Vec<Syntax>,
        tail: Option<Box<Syntax>>,
    },
}

impl Syntax {
    pub fn atom(value: Value, span: SourceSpan) -> Syntax {
        Syntax { kind: SyntaxKind::Atom(value), span }
    }

    pub fn to_value(&self) -> Value {
        match &self.kind {
            SyntaxKind::Atom(v) => v.clone(),
            SyntaxKind::List { items, tail } => {
                let tail = tail.as_ref().map_or(Value::Null, |t| t.to_value());
                Value::list_with_tail(items.iter().map(Syntax::to_value).collect::<Vec<_>>(), tail)
            }
        }
    }

    /// Rebuilds syntax for a value, attributing every node to `span`. Used for
    /// the output of pattern rewriters, which has no source text of its own.
    pub fn from_value(v: &Value, span: SourceSpan) -> Syntax {
        match v {
            Value::Pair(_) => {
                let mut items = Vec::new();
                let mut cur = v;
                while let Value::Pair(cell) = cur {
                    items.push(Syntax::from_value(&cell.car, span));
                    cur = &cell.cdr;
                }
                let tail = match cur {
                    Value::Null => None,
                    other => Some(Box::new(Syntax::from_value(other, span))),
                };
                Syntax { kind: SyntaxKind::List { items, tail }, span }
            }
            other => Syntax::atom(other.clone(), span),
        }
    }

    pub fn as_symbol(&self) -> Option<&Symbol> {
        match &self.kind {
            SyntaxKind::Atom(Value::Symbol(s)) => Some(s),
            _ => None,
        }
    }

    pub fn is_symbol(&self, name: &str) -> bool {
        self.as_symbol().is_some_and(|s| s.as_str() == name)
    }

    /// Items of a proper (non-dotted) list form, including `()`.
    pub fn as_list(&self) -> Option<&[Syntax]> {
        match &self.kind {
            SyntaxKind::List { items, tail: None } => Some(items),
            SyntaxKind::Atom(Value::Null) => Some(&[]),
            _ => None,
        }
    }

    /// Head symbol of a non-empty list form.
    pub fn head_symbol(&self) -> Option<&Symbol> {
        self.as_list().and_then(|items| items.first()).and_then(Syntax::as_symbol)
    }

    /// Calls `f` on this node and every descendant.
    pub fn walk(&self, f: &mut dyn FnMut(&Syntax)) {
        f(self);
        if let SyntaxKind::List { items, tail } = &self.kind {
            for item in items {
                item.walk(f);
            }
            if let Some(t) = tail {
                t.walk(f);
            }
        }
    }
}

/// Reads every toplevel datum in `text`.
pub fn read_all(text: &str) -> Result<Vec<Value>, ReadError> {
    Ok(read_syntax(text)?.iter().map(Syntax::to_value).collect())
}

/// Reads every toplevel datum in `text`, keeping source spans.
pub fn read_syntax(text: &str) -> Result<Vec<Syntax>, ReadError> {
    let mut reader = Reader { text, pos: 0 };
    let mut out = Vec::new();
    loop {
        reader.skip_atmosphere();
        if reader.pos >= text.len() {
            return Ok(out);
        }
        out.push(reader.datum()?);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Number {
    Int(i64),
    Real(f64),
    Overflow,
}

fn all_digits(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
}

/// Decides whether a token denotes a number.
fn classify_number(token: &str) -> Option<Number> {
    match token {
        "+inf.0" => return Some(Number::Real(f64::INFINITY)),
        "-inf.0" => return Some(Number::Real(f64::NEG_INFINITY)),
        "+nan.0" | "-nan.0" => return Some(Number::Real(f64::NAN)),
        _ => {}
    }
    let unsigned = token.strip_prefix(['+', '-']).unwrap_or(token);
    if all_digits(unsigned) {
        return Some(token.parse::<i64>().map_or(Number::Overflow, Number::Int));
    }
    let (mantissa, exponent) = match unsigned.find(['e', 'E']) {
        Some(i) => (&unsigned[..i], Some(&unsigned[i + 1..])),
        None => (unsigned, None),
    };
    let mantissa_ok = match mantissa.split_once('.') {
        Some((whole, frac)) => {
            (whole.is_empty() || all_digits(whole))
                && (frac.is_empty() || all_digits(frac))
                && !(whole.is_empty() && frac.is_empty())
        }
        None => all_digits(mantissa),
    };
    let exponent_ok = exponent.is_none_or(|e| all_digits(e.strip_prefix(['+', '-']).unwrap_or(e)));
    if mantissa_ok && exponent_ok {
        token.parse::<f64>().ok().map(Number::Real)
    } else {
        None
    }
}

struct Reader<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Reader<'a> {
    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_atmosphere(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == ';' {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn unbalanced(&self, start: usize, message: &str) -> ReadError {
        ReadError::UnbalancedDelimiter {
            span: SourceSpan::new(start, self.pos.max(start)),
            message: message.to_string(),
        }
    }

    fn datum(&mut self) -> Result<Syntax, ReadError> {
        self.skip_atmosphere();
        let start = self.pos;
        let c = match self.peek() {
            Some(c) => c,
            None => return Err(self.unbalanced(start, "unexpected end of input")),
        };
        match c {
            '(' | '[' => {
                self.bump();
                let close = if c == '(' { ')' } else { ']' };
                self.list_tail(start, close)
            }
            ')' | ']' => {
                self.bump();
                Err(self.unbalanced(start, &format!("unexpected `{}`", c)))
            }
            '\'' => {
                self.bump();
                let quoted = self.datum()?;
                let span = SourceSpan::new(start, quoted.span.end);
                let quote = Syntax::atom(Value::sym("quote"), SourceSpan::new(start, start + 1));
                Ok(Syntax { kind: SyntaxKind::List { items: vec![quote, quoted], tail: None }, span })
            }
            '"' => {
                self.bump();
                self.string(start)
            }
            '#' if self.text[self.pos..].starts_with("#(") => {
                self.pos += 2;
                self.struct_literal(start)
            }
            _ => self.atom(start),
        }
    }

    fn list_tail(&mut self, start: usize, close: char) -> Result<Syntax, ReadError> {
        let mut items = Vec::new();
        let mut tail = None;
        loop {
            self.skip_atmosphere();
            match self.peek() {
                None => return Err(self.unbalanced(start, &format!("missing `{}`", close))),
                Some(c) if c == close => {
                    self.bump();
                    break;
                }
                Some(c @ (')' | ']')) => {
                    let at = self.pos;
                    self.bump();
                    return Err(ReadError::UnbalancedDelimiter {
                        span: SourceSpan::new(at, self.pos),
                        message: format!("expected `{}` but found `{}`", close, c),
                    });
                }
                Some(_) => {
                    let item = self.datum()?;
                    if item.is_symbol(".") && !self.text[item.span.start..item.span.end].starts_with('|') {
                        if items.is_empty() || tail.is_some() {
                            return Err(ReadError::BadToken { span: item.span, token: ".".into() });
                        }
                        tail = Some(Box::new(self.datum()?));
                        self.skip_atmosphere();
                        if self.peek() != Some(close) {
                            let at = self.pos;
                            return Err(ReadError::BadToken {
                                span: SourceSpan::new(at, at),
                                token: "expected list end after dotted tail".into(),
                            });
                        }
                    } else {
                        items.push(item);
                    }
                }
            }
        }
        let span = SourceSpan::new(start, self.pos);
        if items.is_empty() {
            return Ok(Syntax::atom(Value::Null, span));
        }
        Ok(Syntax { kind: SyntaxKind::List { items, tail }, span })
    }

    fn struct_literal(&mut self, start: usize) -> Result<Syntax, ReadError> {
        let body = self.list_tail(start, ')')?;
        let bad = || ReadError::BadToken { span: body.span, token: "#(".into() };
        let items = body.as_list().ok_or_else(bad)?;
        if items.len() < 2 || !items[0].is_symbol("struct") {
            return Err(bad());
        }
        let name = items[1].as_symbol().ok_or_else(bad)?.clone();
        let fields: Vec<Value> = items[2..].iter().map(Syntax::to_value).collect();
        let tag = StructTag { name, arity: fields.len() };
        Ok(Syntax::atom(Value::new_struct(tag, fields), body.span))
    }

    fn string(&mut self, start: usize) -> Result<Syntax, ReadError> {
        let mut out = String::new();
        loop {
            let c = match self.bump() {
                Some(c) => c,
                None => return Err(self.unbalanced(start, "unterminated string")),
            };
            match c {
                '"' => break,
                '\\' => {
                    let esc_start = self.pos - 1;
                    let bad = |r: &Self| ReadError::BadToken {
                        span: SourceSpan::new(esc_start, r.pos),
                        token: r.text[esc_start..r.pos].to_string(),
                    };
                    match self.bump() {
                        Some('n') => out.push('\n'),
                        Some('t') => out.push('\t'),
                        Some('r') => out.push('\r'),
                        Some('"') => out.push('"'),
                        Some('\\') => out.push('\\'),
                        Some('x') => {
                            let hex_start = self.pos;
                            while self.peek().is_some_and(|c| c.is_ascii_hexdigit()) {
                                self.bump();
                            }
                            let hex = &self.text[hex_start..self.pos];
                            if self.bump() != Some(';') {
                                return Err(bad(self));
                            }
                            let ch = u32::from_str_radix(hex, 16).ok().and_then(char::from_u32);
                            out.push(ch.ok_or_else(|| bad(self))?);
                        }
                        None => return Err(self.unbalanced(start, "unterminated string")),
                        Some(_) => return Err(bad(self)),
                    }
                }
                c => out.push(c),
            }
        }
        Ok(Syntax::atom(Value::string(&out), SourceSpan::new(start, self.pos)))
    }

    fn atom(&mut self, start: usize) -> Result<Syntax, ReadError> {
        let mut name = String::new();
        let mut barred = false;
        while let Some(c) = self.peek() {
            if c == '|' {
                barred = true;
                self.bump();
                loop {
                    match self.bump() {
                        None => return Err(self.unbalanced(start, "unterminated `|`")),
                        Some('|') => break,
                        Some('\\') => match self.bump() {
                            Some(c) => name.push(c),
                            None => return Err(self.unbalanced(start, "unterminated `|`")),
                        },
                        Some(c) => name.push(c),
                    }
                }
            } else if is_delimiter(c) {
                break;
            } else {
                name.push(c);
                self.bump();
            }
        }
        let span = SourceSpan::new(start, self.pos);
        if barred {
            return Ok(Syntax::atom(Value::Symbol(Symbol::new(&name)), span));
        }
        let token = name;
        let bad = || ReadError::BadToken { span, token: token.clone() };
        let value = match token.as_str() {
            "#t" | "#true" => Value::Bool(true),
            "#f" | "#false" => Value::Bool(false),
            t if t.starts_with('#') => return Err(bad()),
            t => match classify_number(t) {
                Some(Number::Int(n)) => Value::Int(n),
                Some(Number::Real(x)) => Value::Real(x),
                Some(Number::Overflow) => return Err(bad()),
                None => Value::Symbol(Symbol::new(t)),
            },
        };
        Ok(Syntax::atom(value, span))
    }
}
