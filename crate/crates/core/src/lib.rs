//! Extensible pattern matching for a small S-expression language.
//!
//! The pipeline: [`sexpr`] reads text into values and syntax, [`pattern`]
//! parses clause patterns and runs match expanders, [`compile`] turns clause
//! lists into a backtracking automaton, and [`runtime`] executes it (with a
//! naive reference matcher for comparison). [`program`] ties the pieces into
//! whole programs and a REPL.

pub mod builtins;
pub mod compile;
pub mod error;
pub mod eval;
pub mod pattern;
pub mod program;
pub mod runtime;
pub mod sexpr;
pub mod template;

pub use compile::{compile_match, CompiledMatch};
pub use error::{Error, EvalError, StaticError};
pub use eval::{apply_value, evaluate, parse_expr, Env, Expr};
pub use pattern::{parse_pattern, Pattern, StaticEnv, DEFAULT_FUEL};
pub use program::{dump_ir, repl, run_program, Options, RunReport, Session};
pub use runtime::{naive_first_match, naive_match, replay, run_match, MatchOutcome, TraceEvent};
pub use sexpr::{print_value, read_all, read_syntax, values_equal, Value};
