//! Compilation of match clauses to a backtracking automaton.
//!
//! Clauses become rows of a clause matrix whose columns are occurrences
//! (access paths into the scrutinee). Compilation repeatedly picks a column,
//! groups the leading rows that share a head constructor there, emits one
//! test for the group, and compiles the remaining rows once as a shared
//! failure continuation reached through a `Join` node.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::ops::Range;
use std::sync::Arc;

use crate::error::StaticError;
use crate::eval::Expr;
use crate::pattern::{bound_vars, Pattern, StructInfo};
use crate::sexpr::{SourceSpan, StructTag, Symbol, Value};

pub type NodeId = usize;
pub type OccId = usize;

/// Where an occurrence path starts. Transformer results and sequence loop
/// values are not sub-paths of the scrutinee, so each gets a fresh root.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum OccRoot {
    Scrutinee,
    App(usize),
    SeqElement(usize),
    SeqRest(usize),
    SeqVar(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Step {
    Head,
    Tail,
    Field { index: usize, accessor: Symbol },
}

#[derive(Debug, Clone)]
pub struct OccInfo {
    pub root: OccRoot,
    pub parent: Option<(OccId, Step)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TypeKind {
    Pair,
    EmptyList,
    Struct { tag: StructTag, predicate: Symbol },
}

impl TypeKind {
    pub fn test(&self, v: &Value) -> bool {
        match (self, v) {
            (TypeKind::Pair, Value::Pair(_)) => true,
            (TypeKind::EmptyList, Value::Null) => true,
            (TypeKind::Struct { tag, .. }, Value::Struct(s)) => s.tag == *tag,
            _ => false,
        }
    }
}

impl fmt::Display for TypeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeKind::Pair => f.write_str("pair"),
            TypeKind::EmptyList => f.write_str("empty-list"),
            TypeKind::Struct { tag, .. } => write!(f, "struct:{}", tag.name),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Node {
    TestType { occ: OccId, kind: TypeKind, pass: NodeId, fail: NodeId },
    TestLiteral { occ: OccId, value: Value, pass: NodeId, fail: NodeId },
    TestPred { pred: usize, occ: OccId, pass: NodeId, fail: NodeId },
    Bind { name: Symbol, occ: OccId, next: NodeId },
    AppTransform { app: usize, occ: OccId, result: OccId, next: NodeId },
    /// Matches every element but the last `min_tail` against `body`, then
    /// stores the remaining suffix at `rest` and the per-variable lists at
    /// `var_occs`.
    SeqLoop {
        occ: OccId,
        body: NodeId,
        element: OccId,
        vars: Vec<Symbol>,
        var_occs: Vec<OccId>,
        min_tail: usize,
        rest: OccId,
        pass: NodeId,
        fail: NodeId,
    },
    /// Successful end of a sequence loop body.
    Accept,
    Success(usize),
    Failure,
    Join(NodeId),
}

impl Node {
    fn successors(&self) -> Vec<NodeId> {
        match self {
            Node::TestType { pass, fail, .. }
            | Node::TestLiteral { pass, fail, .. }
            | Node::TestPred { pass, fail, .. } => vec![*pass, *fail],
            Node::Bind { next, .. } | Node::AppTransform { next, .. } => vec![*next],
            Node::SeqLoop { body, pass, fail, .. } => vec![*body, *pass, *fail],
            Node::Join(target) => vec![*target],
            Node::Accept | Node::Success(_) | Node::Failure => Vec::new(),
        }
    }

    fn map_successors(&mut self, f: impl Fn(NodeId) -> NodeId) {
        match self {
            Node::TestType { pass, fail, .. }
            | Node::TestLiteral { pass, fail, .. }
            | Node::TestPred { pass, fail, .. } => {
                *pass = f(*pass);
                *fail = f(*fail);
            }
            Node::Bind { next, .. } | Node::AppTransform { next, .. } => *next = f(*next),
            Node::SeqLoop { body, pass, fail, .. } => {
                *body = f(*body);
                *pass = f(*pass);
                *fail = f(*fail);
            }
            Node::Join(target) => *target = f(*target),
            Node::Accept | Node::Success(_) | Node::Failure => {}
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Node::TestType { .. } => "TestType",
            Node::TestLiteral { .. } => "TestLiteral",
            Node::TestPred { .. } => "TestPred",
            Node::Bind { .. } => "Bind",
            Node::AppTransform { .. } => "AppTransform",
            Node::SeqLoop { .. } => "SeqLoop",
            Node::Accept => "Accept",
            Node::Success(_) => "Success",
            Node::Failure => "Failure",
            Node::Join(_) => "Join",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Automaton {
    pub nodes: Vec<Node>,
    pub entry: NodeId,
    pub occurrences: Vec<OccInfo>,
}

impl Automaton {
    pub fn occurrence_name(&self, occ: OccId) -> String {
        let info = &self.occurrences[occ];
        match &info.parent {
            Some((parent, step)) => {
                let base = self.occurrence_name(*parent);
                match step {
                    Step::Head => format!("{}.hd", base),
                    Step::Tail => format!("{}.tl", base),
                    Step::Field { accessor, .. } => format!("{}.{}", base, accessor),
                }
            }
            None => match &info.root {
                OccRoot::Scrutinee => "r".to_string(),
                OccRoot::App(k) => format!("a{}", k),
                OccRoot::SeqElement(k) => format!("e{}", k),
                OccRoot::SeqRest(k) => format!("s{}", k),
                OccRoot::SeqVar(k, j) => format!("v{}.{}", k, j),
            },
        }
    }

    /// Number of nodes of the given kind (as named by [`Node::kind_name`]).
    pub fn count(&self, kind: &str) -> usize {
        self.nodes.iter().filter(|n| n.kind_name() == kind).count()
    }
}

// ---------------------------------------------------------------------------
// Clause matrix

/// A matrix cell: a pattern whose embedded expressions have been replaced by
/// indices into the expression tables.
#[derive(Debug, Clone)]
pub enum Cell {
    Var(Symbol),
    Wildcard,
    Literal(Value),
    Pred(usize),
    And(Vec<Cell>),
    Or(Vec<Cell>),
    Cons(Box<Cell>, Box<Cell>),
    EmptyList,
    App(usize, Box<Cell>),
    Seq { element: Box<Cell>, tail: Vec<Cell>, vars: Vec<Symbol> },
    Struct { info: Arc<StructInfo>, fields: Vec<Cell> },
}

impl Cell {
    pub fn is_trivial(&self) -> bool {
        matches!(self, Cell::Var(_) | Cell::Wildcard)
    }

    /// Whether testing this cell may run user code.
    fn runs_user_code(&self) -> bool {
        match self {
            Cell::Pred(_) | Cell::App(..) => true,
            Cell::Seq { element, tail, .. } => element.contains_user_code() || tail.iter().any(Cell::contains_user_code),
            _ => false,
        }
    }

    fn contains_user_code(&self) -> bool {
        match self {
            Cell::Var(_) | Cell::Wildcard | Cell::Literal(_) | Cell::EmptyList => false,
            Cell::Pred(_) | Cell::App(..) => true,
            Cell::And(ps) | Cell::Or(ps) => ps.iter().any(Cell::contains_user_code),
            Cell::Cons(h, t) => h.contains_user_code() || t.contains_user_code(),
            Cell::Seq { element, tail, .. } => element.contains_user_code() || tail.iter().any(Cell::contains_user_code),
            Cell::Struct { fields, .. } => fields.iter().any(Cell::contains_user_code),
        }
    }

    fn list(items: Vec<Cell>) -> Cell {
        items
            .into_iter()
            .rev()
            .fold(Cell::EmptyList, |tail, head| Cell::Cons(Box::new(head), Box::new(tail)))
    }
}

#[derive(Debug, Clone)]
pub struct Row {
    pub cells: Vec<Cell>,
    pub rhs: usize,
}

#[derive(Debug, Clone)]
pub struct ClauseMatrix {
    pub occurrences: Vec<OccId>,
    pub rows: Vec<Row>,
}

impl ClauseMatrix {
    fn rest(&self, rows: Range<usize>) -> ClauseMatrix {
        ClauseMatrix { occurrences: self.occurrences.clone(), rows: self.rows[rows].to_vec() }
    }

    /// Expands `and` cells into extra columns at the same occurrence, splits
    /// rows at `or` cells, and drops columns that are wildcards everywhere.
    fn normalize(&mut self) {
        let mut r = 0;
        while r < self.rows.len() {
            let Some(c) = self.rows[r].cells.iter().position(|c| matches!(c, Cell::And(_) | Cell::Or(_))) else {
                r += 1;
                continue;
            };
            match std::mem::replace(&mut self.rows[r].cells[c], Cell::Wildcard) {
                Cell::Or(branches) => {
                    let template = self.rows.remove(r);
                    for (k, branch) in branches.into_iter().enumerate() {
                        let mut row = template.clone();
                        row.cells[c] = branch;
                        self.rows.insert(r + k, row);
                    }
                }
                Cell::And(parts) => {
                    let occ = self.occurrences[c];
                    for (k, part) in parts.into_iter().enumerate() {
                        if k == 0 {
                            self.rows[r].cells[c] = part;
                            continue;
                        }
                        self.occurrences.insert(c + k, occ);
                        for (i, row) in self.rows.iter_mut().enumerate() {
                            row.cells.insert(c + k, if i == r { part.clone() } else { Cell::Wildcard });
                        }
                    }
                }
                _ => unreachable!(),
            }
        }
        let width = self.occurrences.len();
        let keep: Vec<bool> = (0..width)
            .map(|c| self.rows.iter().any(|row| !matches!(row.cells[c], Cell::Wildcard)))
            .collect();
        if keep.iter().all(|k| *k) {
            return;
        }
        let filter = |cells: &mut Vec<Cell>| {
            let mut i = 0;
            cells.retain(|_| {
                i += 1;
                keep[i - 1]
            });
        };
        for row in &mut self.rows {
            filter(&mut row.cells);
        }
        let mut i = 0;
        self.occurrences.retain(|_| {
            i += 1;
            keep[i - 1]
        });
    }
}

/// Number of rows, counting from the first, whose cell in `col` is non-trivial.
pub fn column_score(m: &ClauseMatrix, col: usize) -> usize {
    m.rows.iter().take_while(|row| !row.cells[col].is_trivial()).count()
}

/// Picks the column to test next: the leftmost column with the longest run
/// of non-trivial cells starting at the first row. Cells that run user code
/// are only eligible once they are the leftmost non-trivial cell of the
/// first row, so predicates and transformers see values in the same order
/// a left-to-right matcher would give them.
pub fn select_column(m: &ClauseMatrix) -> usize {
    let first = &m.rows[0].cells;
    let leftmost = first.iter().position(|c| !c.is_trivial());
    let mut best: Option<(usize, usize)> = None;
    for (col, cell) in first.iter().enumerate() {
        if cell.is_trivial() || (cell.runs_user_code() && Some(col) != leftmost) {
            continue;
        }
        let score = column_score(m, col);
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((col, score));
        }
    }
    best.map_or(0, |(col, _)| col)
}

#[derive(Debug, Clone, PartialEq)]
enum HeadKey {
    Pair,
    EmptyList,
    Literal(Value),
    Struct(StructTag),
}

fn head_key(cell: &Cell) -> Option<HeadKey> {
    match cell {
        Cell::Cons(..) => Some(HeadKey::Pair),
        Cell::EmptyList => Some(HeadKey::EmptyList),
        Cell::Literal(v) => Some(HeadKey::Literal(v.clone())),
        Cell::Struct { info, .. } => Some(HeadKey::Struct(info.tag.clone())),
        _ => None,
    }
}

/// Partitions the rows into maximal runs of adjacent rows sharing a head
/// constructor in `col`. Variables, predicates, transformers and sequences
/// always form runs of one.
pub fn coalesce_rows(m: &ClauseMatrix, col: usize) -> Vec<Range<usize>> {
    let mut groups = Vec::new();
    let mut start = 0;
    while start < m.rows.len() {
        let key = head_key(&m.rows[start].cells[col]);
        let mut end = start + 1;
        if let Some(key) = &key {
            while end < m.rows.len() && head_key(&m.rows[end].cells[col]).as_ref() == Some(key) {
                end += 1;
            }
        }
        groups.push(start..end);
        start = end;
    }
    groups
}


/// What a row reaching the end of its obligations turns into.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Terminal {
    Success,
    Accept,
}

/// Expression tables built while numbering `?` and `app` expressions.
#[derive(Debug, Clone, Default)]
pub struct ExprTables {
    pub preds: Vec<Arc<Expr>>,
    pub apps: Vec<Arc<Expr>>,
}

/// Holds the node arena and occurrence table while a match is compiled.
pub struct Compiler {
    nodes: Vec<Node>,
    occurrences: Vec<OccInfo>,
    occ_index: HashMap<(OccRoot, Option<(OccId, Step)>), OccId>,
    failure: NodeId,
    app_roots: usize,
    loops: usize,
    pub tables: ExprTables,
}

impl Default for Compiler {
    fn default() -> Self {
        Compiler::new()
    }
}

impl Compiler {
    pub fn new() -> Self {
        Compiler {
            nodes: vec![Node::Failure],
            occurrences: Vec::new(),
            occ_index: HashMap::new(),
            failure: 0,
            app_roots: 0,
            loops: 0,
            tables: ExprTables::default(),
        }
    }

    fn push(&mut self, node: Node) -> NodeId {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    fn occurrence(&mut self, root: OccRoot, parent: Option<(OccId, Step)>) -> OccId {
        let key = (root.clone(), parent.clone());
        if let Some(&id) = self.occ_index.get(&key) {
            return id;
        }
        self.occurrences.push(OccInfo { root, parent });
        let id = self.occurrences.len() - 1;
        self.occ_index.insert(key, id);
        id
    }

    fn child(&mut self, parent: OccId, step: Step) -> OccId {
        let root = self.occurrences[parent].root.clone();
        self.occurrence(root, Some((parent, step)))
    }

    pub fn root_occurrence(&mut self) -> OccId {
        self.occurrence(OccRoot::Scrutinee, None)
    }

    fn cell(&mut self, p: &Pattern) -> Cell {
        match p {
            Pattern::Var(name) => Cell::Var(name.clone()),
            Pattern::Wildcard => Cell::Wildcard,
            Pattern::Literal(v) => Cell::Literal(v.clone()),
            Pattern::Pred(e) => {
                self.tables.preds.push(e.clone());
                Cell::Pred(self.tables.preds.len() - 1)
            }
            Pattern::And(ps) => Cell::And(ps.iter().map(|q| self.cell(q)).collect()),
            Pattern::Or(ps) => Cell::Or(ps.iter().map(|q| self.cell(q)).collect()),
            Pattern::Cons(h, t) => Cell::Cons(Box::new(self.cell(h)), Box::new(self.cell(t))),
            Pattern::EmptyList => Cell::EmptyList,
            Pattern::App(e, q) => {
                self.tables.apps.push(e.clone());
                let id = self.tables.apps.len() - 1;
                Cell::App(id, Box::new(self.cell(q)))
            }
            Pattern::Seq { element, tail } => Cell::Seq {
                vars: bound_vars(element),
                element: Box::new(self.cell(element)),
                tail: tail.iter().map(|q| self.cell(q)).collect(),
            },
            Pattern::Struct { info, fields } => Cell::Struct {
                info: info.clone(),
                fields: fields.iter().map(|q| self.cell(q)).collect(),
            },
        }
    }

    /// One row per clause over a single column at the scrutinee. `?` and
    /// `app` expressions are numbered here, before `or` splitting, so copies
    /// of a row share their expression ids.
    pub fn build_matrix(&mut self, clauses: &[(Pattern, usize)]) -> ClauseMatrix {
        let root = self.root_occurrence();
        let rows = clauses
            .iter()
            .map(|(p, rhs)| Row { cells: vec![self.cell(p)], rhs: *rhs })
            .collect();
        let mut m = ClauseMatrix { occurrences: vec![root], rows };
        m.normalize();
        m
    }

    /// Compiles a matrix whose rows end in `Success`; returns the entry node.
    pub fn compile_matrix(&mut self, m: ClauseMatrix) -> NodeId {
        let fail = self.failure;
        self.compile(m, fail, Terminal::Success)
    }

    fn compile(&mut self, mut m: ClauseMatrix, fail: NodeId, terminal: Terminal) -> NodeId {
        m.normalize();
        if m.rows.is_empty() {
            return fail;
        }
        if m.rows[0].cells.iter().all(Cell::is_trivial) {
            let row = &m.rows[0];
            let mut next = match terminal {
                Terminal::Success => self.push(Node::Success(row.rhs)),
                Terminal::Accept => self.push(Node::Accept),
            };
            let binds: Vec<(Symbol, OccId)> = row
                .cells
                .iter()
                .zip(&m.occurrences)
                .filter_map(|(cell, occ)| match cell {
                    Cell::Var(name) => Some((name.clone(), *occ)),
                    _ => None,
                })
                .collect();
            for (name, occ) in binds.into_iter().rev() {
                next = self.push(Node::Bind { name, occ, next });
            }
            return next;
        }

        let col = select_column(&m);
        let group = coalesce_rows(&m, col).remove(0);
        let on_fail = if group.end == m.rows.len() {
            fail
        } else {
            let rest = self.compile(m.rest(group.end..m.rows.len()), fail, terminal);
            self.push(Node::Join(rest))
        };
        let occ = m.occurrences[col];
        let lead = m.rows[group.start].cells[col].clone();
        match lead {
            Cell::Cons(..) => {
                let head = self.child(occ, Step::Head);
                let tail = self.child(occ, Step::Tail);
                let spec = specialize(&m, group, col, vec![head, tail], |cell| match cell {
                    Cell::Cons(h, t) => vec![*h, *t],
                    _ => unreachable!("group shares the pair constructor"),
                });
                let pass = self.compile(spec, on_fail, terminal);
                self.push(Node::TestType { occ, kind: TypeKind::Pair, pass, fail: on_fail })
            }
            Cell::EmptyList => {
                let spec = specialize(&m, group, col, vec![], |_| vec![]);
                let pass = self.compile(spec, on_fail, terminal);
                self.push(Node::TestType { occ, kind: TypeKind::EmptyList, pass, fail: on_fail })
            }
            Cell::Literal(value) => {
                let spec = specialize(&m, group, col, vec![], |_| vec![]);
                let pass = self.compile(spec, on_fail, terminal);
                self.push(Node::TestLiteral { occ, value, pass, fail: on_fail })
            }
            Cell::Struct { info, .. } => {
                let fields: Vec<OccId> = info
                    .accessors
                    .iter()
                    .enumerate()
                    .map(|(index, accessor)| self.child(occ, Step::Field { index, accessor: accessor.clone() }))
                    .collect();
                let spec = specialize(&m, group, col, fields, |cell| match cell {
                    Cell::Struct { fields, .. } => fields,
                    _ => unreachable!("group shares the struct constructor"),
                });
                let pass = self.compile(spec, on_fail, terminal);
                let kind = TypeKind::Struct { tag: info.tag.clone(), predicate: info.predicate.clone() };
                self.push(Node::TestType { occ, kind, pass, fail: on_fail })
            }
            Cell::Pred(pred) => {
                let spec = specialize(&m, group, col, vec![], |_| vec![]);
                let pass = self.compile(spec, on_fail, terminal);
                self.push(Node::TestPred { pred, occ, pass, fail: on_fail })
            }
            Cell::App(app, _) => {
                let result = self.occurrence(OccRoot::App(self.app_roots), None);
                self.app_roots += 1;
                let spec = specialize(&m, group, col, vec![result], |cell| match cell {
                    Cell::App(_, sub) => vec![*sub],
                    _ => unreachable!(),
                });
                let next = self.compile(spec, on_fail, terminal);
                self.push(Node::AppTransform { app, occ, result, next })
            }
            Cell::Seq { element, tail, vars } => {
                let id = self.loops;
                self.loops += 1;
                let element_occ = self.occurrence(OccRoot::SeqElement(id), None);
                let rest = self.occurrence(OccRoot::SeqRest(id), None);
                let var_occs: Vec<OccId> =
                    (0..vars.len()).map(|j| self.occurrence(OccRoot::SeqVar(id, j), None)).collect();

                let body_matrix = ClauseMatrix {
                    occurrences: vec![element_occ],
                    rows: vec![Row { cells: vec![*element], rhs: usize::MAX }],
                };
                let failure = self.failure;
                let body = self.compile(body_matrix, failure, Terminal::Accept);

                let mut new_occs = vec![rest];
                new_occs.extend(&var_occs);
                let min_tail = tail.len();
                let loop_vars = vars.clone();
                let spec = specialize(&m, group, col, new_occs, move |_| {
                    // the loop already checked the length, so an empty tail needs no test
                    let rest = if tail.is_empty() { Cell::Wildcard } else { Cell::list(tail.clone()) };
                    let mut cells = vec![rest];
                    cells.extend(loop_vars.iter().cloned().map(Cell::Var));
                    cells
                });
                let pass = self.compile(spec, on_fail, terminal);
                self.push(Node::SeqLoop {
                    occ,
                    body,
                    element: element_occ,
                    vars,
                    var_occs,
                    min_tail,
                    rest,
                    pass,
                    fail: on_fail,
                })
            }
            Cell::Var(_) | Cell::Wildcard | Cell::And(_) | Cell::Or(_) => {
                unreachable!("selected column holds a normalized non-trivial cell")
            }
        }
    }

    /// Renumbers reachable nodes in depth-first order from `entry` (pass
    /// edges before fail edges) so that node ids do not depend on the order
    /// in which the compiler happened to allocate them.
    pub fn finish(self, entry: NodeId) -> Automaton {
        let mut order = Vec::new();
        let mut new_id = vec![usize::MAX; self.nodes.len()];
        let mut stack = vec![entry];
        while let Some(id) = stack.pop() {
            if new_id[id] != usize::MAX {
                continue;
            }
            new_id[id] = order.len();
            order.push(id);
            for succ in self.nodes[id].successors().into_iter().rev() {
                if new_id[succ] == usize::MAX {
                    stack.push(succ);
                }
            }
        }
        let nodes = order
            .iter()
            .map(|&old| {
                let mut node = self.nodes[old].clone();
                node.map_successors(|s| new_id[s]);
                node
            })
            .collect();
        Automaton { nodes, entry: 0, occurrences: self.occurrences }
    }
}

fn specialize(
    m: &ClauseMatrix,
    rows: Range<usize>,
    col: usize,
    new_occs: Vec<OccId>,
    expand: impl Fn(Cell) -> Vec<Cell>,
) -> ClauseMatrix {
    let mut occurrences = m.occurrences[..col].to_vec();
    occurrences.extend(&new_occs);
    occurrences.extend(&m.occurrences[col + 1..]);
    let rows = m.rows[rows]
        .iter()
        .map(|row| {
            let mut cells = row.cells[..col].to_vec();
            let expanded = expand(row.cells[col].clone());
            debug_assert_eq!(expanded.len(), new_occs.len());
            cells.extend(expanded);
            cells.extend(row.cells[col + 1..].iter().cloned());
            Row { cells, rhs: row.rhs }
        })
        .collect();
    ClauseMatrix { occurrences, rows }
}

// ---------------------------------------------------------------------------
// Whole match expressions

/// A compiled `match` expression.
#[derive(Debug)]
pub struct CompiledMatch {
    pub scrutinee: Expr,
    pub automaton: Automaton,
    pub patterns: Vec<Pattern>,
    pub rhs: Vec<Expr>,
    pub preds: Vec<Arc<Expr>>,
    pub apps: Vec<Arc<Expr>>,
    /// Binding names of each clause, in first-occurrence order.
    pub var_layout: Vec<Vec<Symbol>>,
    pub span: SourceSpan,
}

pub fn compile_match(
    scrutinee: Expr,
    clauses: Vec<(Pattern, Expr)>,
    span: SourceSpan,
) -> Result<CompiledMatch, StaticError> {
    if clauses.is_empty() {
        return Err(StaticError::EmptyMatch { span });
    }
    let (patterns, rhs): (Vec<Pattern>, Vec<Expr>) = clauses.into_iter().unzip();
    let numbered: Vec<(Pattern, usize)> = patterns.iter().cloned().zip(0..).collect();
    let mut compiler = Compiler::new();
    let matrix = compiler.build_matrix(&numbered);
    let entry = compiler.compile_matrix(matrix);
    let tables = std::mem::take(&mut compiler.tables);
    let automaton = compiler.finish(entry);
    Ok(CompiledMatch {
        scrutinee,
        automaton,
        var_layout: patterns.iter().map(bound_vars).collect(),
        patterns,
        rhs,
        preds: tables.preds,
        apps: tables.apps,
        span,
    })
}

impl CompiledMatch {
    /// Deterministic text form of the automaton, one node per line.
    pub fn dump(&self) -> String {
        let a = &self.automaton;
        let occ = |o: &OccId| a.occurrence_name(*o);
        let mut out = String::new();
        for (i, e) in self.rhs.iter().enumerate() {
            let _ = writeln!(out, ";; rhs {} = {}", i, e);
        }
        for (i, e) in self.preds.iter().enumerate() {
            let _ = writeln!(out, ";; pred p{} = {}", i, e);
        }
        for (i, e) in self.apps.iter().enumerate() {
            let _ = writeln!(out, ";; app f{} = {}", i, e);
        }
        for (id, node) in a.nodes.iter().enumerate() {
            let _ = write!(out, "#{} {}", id, node.kind_name());
            let _ = match node {
                Node::TestType { occ: o, kind, pass, fail } => {
                    write!(out, " @{} {} => pass:{} fail:{}", occ(o), kind, pass, fail)
                }
                Node::TestLiteral { occ: o, value, pass, fail } => {
                    write!(out, " @{} {} => pass:{} fail:{}", occ(o), value, pass, fail)
                }
                Node::TestPred { pred, occ: o, pass, fail } => {
                    write!(out, " p{} @{} => pass:{} fail:{}", pred, occ(o), pass, fail)
                }
                Node::Bind { name, occ: o, next } => write!(out, " {} @{} => pass:{}", name, occ(o), next),
                Node::AppTransform { app, occ: o, result, next } => {
                    write!(out, " f{} @{} -> @{} => pass:{}", app, occ(o), occ(result), next)
                }
                Node::SeqLoop { occ: o, body, element, vars, var_occs, min_tail, rest, pass, fail } => {
                    let vars: Vec<String> =
                        vars.iter().zip(var_occs).map(|(v, vo)| format!("{}@{}", v, occ(vo))).collect();
                    write!(
                        out,
                        " @{} elem:@{} tail:{} rest:@{} vars:[{}] body:{} => pass:{} fail:{}",
                        occ(o),
                        occ(element),
                        min_tail,
                        occ(rest),
                        vars.join(" "),
                        body,
                        pass,
                        fail
                    )
                }
                Node::Success(rhs) => write!(out, " {}", rhs),
                Node::Join(target) => write!(out, " => pass:{}", target),
                Node::Accept | Node::Failure => Ok(()),
            };
            out.push('\n');
        }
        out
    }
}
