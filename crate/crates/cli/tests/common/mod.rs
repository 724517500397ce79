//! Random pattern sets and values for differential tests.

#![allow(dead_code)]

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use pmx_core::compile::{compile_match, CompiledMatch};
use pmx_core::eval::{Arity, Env, Expr};
use pmx_core::pattern::{parse_pattern, StaticEnv, DEFAULT_FUEL};
use pmx_core::sexpr::{read_syntax, SourceSpan, StructTag, Symbol, Value};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PREDS: [&str; 6] = ["number?", "symbol?", "null?", "pair?", "integer?", "(lambda (v) (equal? v 1))"];

const TRANSFORMERS: [&str; 4] = [
    "(lambda (v) (if (pair? v) (if (list? v) (rest v) v) v))",
    "(lambda (v) (if (list? v) (length v) -1))",
    "(lambda (v) (if (number? v) (add1 v) v))",
    "(lambda (v) (list v v))",
];

/// A session with a two-field struct `pt` and a counting predicate factory
/// `counted`.
pub struct World {
    pub statics: StaticEnv,
    pub env: Env,
    pub counter: Arc<AtomicUsize>,
    pub pt: StructTag,
}

impl World {
    pub fn new() -> World {
        let env = Env::base();
        let mut statics = StaticEnv::default();
        let info = statics
            .register_struct(Symbol::new("pt"), vec![Symbol::new("x"), Symbol::new("y")], SourceSpan::default(), &env)
            .unwrap();
        let counter = Arc::new(AtomicUsize::new(0));
        let c = counter.clone();
        let number = env.lookup(&Symbol::new("number?")).unwrap();
        env.define_builtin("counted", Arity::exactly(0), move |_| {
            c.fetch_add(1, Ordering::SeqCst);
            Ok(number.clone())
        });
        World { statics, env, counter, pt: info.tag.clone() }
    }

    pub fn compile(&self, patterns: &[String]) -> CompiledMatch {
        let clauses = patterns
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let stx = &read_syntax(p).unwrap()[0];
                let pat = parse_pattern(stx, &self.statics, DEFAULT_FUEL).unwrap_or_else(|e| panic!("{p}: {e}"));
                (pat, Expr::Literal((i as i64).into()))
            })
            .collect();
        compile_match(Expr::Var(Symbol::new("v")), clauses, SourceSpan::default()).unwrap()
    }

    pub fn count(&self) -> usize {
        self.counter.load(Ordering::SeqCst)
    }
}

pub struct Gen {
    pub rng: ChaCha8Rng,
    next_var: usize,
}

impl Gen {
    pub fn new(seed: u64) -> Gen {
        Gen { rng: ChaCha8Rng::seed_from_u64(seed), next_var: 0 }
    }

    fn fresh(&mut self) -> String {
        self.next_var += 1;
        format!("x{}", self.next_var)
    }

    fn pick<'a>(&mut self, items: &[&'a str]) -> &'a str {
        items.choose(&mut self.rng).unwrap()
    }

    fn literal(&mut self) -> String {
        match self.rng.gen_range(0..5) {
            0 | 1 => self.rng.gen_range(0..3).to_string(),
            2 => format!("'{}", self.pick(&["a", "b"])),
            3 => "'()".to_string(),
            _ => "'(1 a)".to_string(),
        }
    }

    /// A pattern of nesting depth at most `depth`. Variables are fresh
    /// unless `vars` is false, in which case none are bound.
    pub fn pattern(&mut self, depth: usize, vars: bool) -> String {
        let leaf = depth == 0 || self.rng.gen_bool(0.3);
        if leaf {
            return match self.rng.gen_range(0..5) {
                0 | 1 if vars => self.fresh(),
                0 | 1 | 2 => "_".to_string(),
                3 => self.literal(),
                _ => format!("(? {})", self.pick(&PREDS)),
            };
        }
        let d = depth - 1;
        match self.rng.gen_range(0..9) {
            0 => format!("(and {} {})", self.pattern(d, vars), self.pattern(d, vars)),
            1 => {
                let before = self.next_var;
                let a = self.pattern(d, vars);
                let bound: Vec<String> = (before + 1..=self.next_var).map(|i| format!("x{}", i)).collect();
                let b = self.pattern(d, false);
                let b = if bound.is_empty() { b } else { format!("(and {} {})", b, bound.join(" ")) };
                if self.rng.gen_bool(0.5) {
                    format!("(or {} {})", a, b)
                } else {
                    format!("(or {} {})", b, a)
                }
            }
            2 => format!("(cons {} {})", self.pattern(d, vars), self.pattern(d, vars)),
            3 | 4 => {
                let n = self.rng.gen_range(0..4);
                let items: Vec<String> = (0..n).map(|_| self.pattern(d, vars)).collect();
                format!("(list{})", items.iter().map(|s| format!(" {}", s)).collect::<String>())
            }
            5 | 6 => {
                let element = self.pattern(d, vars);
                let k = self.rng.gen_range(0..3);
                let tail: Vec<String> = (0..k).map(|_| self.pattern(d, vars)).collect();
                format!("(list {} ...{})", element, tail.iter().map(|s| format!(" {}", s)).collect::<String>())
            }
            7 => format!("(app {} {})", self.pick(&TRANSFORMERS), self.pattern(d, vars)),
            _ => format!("(pt {} {})", self.pattern(d, vars), self.pattern(d, vars)),
        }
    }

    pub fn pattern_set(&mut self, max: usize) -> Vec<String> {
        let n = self.rng.gen_range(1..=max);
        (0..n).map(|_| self.pattern(3, true)).collect()
    }

    pub fn value(&mut self, depth: usize, pt: &StructTag) -> Value {
        let leaf = depth == 0 || self.rng.gen_bool(0.35);
        if leaf {
            return match self.rng.gen_range(0..6) {
                0 | 1 => Value::Int(self.rng.gen_range(0..3)),
                2 => Value::sym(self.pick(&["a", "b"])),
                3 => Value::Null,
                4 => Value::Real(1.5),
                _ => Value::Int(1),
            };
        }
        match self.rng.gen_range(0..6) {
            0..=3 => {
                let n = self.rng.gen_range(0..5);
                Value::list((0..n).map(|_| self.value(depth - 1, pt)).collect::<Vec<_>>())
            }
            4 => Value::cons(self.value(depth - 1, pt), self.value(depth - 1, pt)),
            _ => Value::new_struct(pt.clone(), vec![self.value(depth - 1, pt), self.value(depth - 1, pt)]),
        }
    }
}
