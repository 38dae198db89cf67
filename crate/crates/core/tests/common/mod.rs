#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
        .join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Removes every `wall_time_ms` field from a JSON document.
pub fn strip_wall_times(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(m) => {
            m.remove("wall_time_ms");
            for x in m.values_mut() {
                strip_wall_times(x);
            }
        }
        serde_json::Value::Array(xs) => {
            for x in xs {
                strip_wall_times(x);
            }
        }
        _ => {}
    }
}

// ---------------------------------------------------------------------------
// Branch DAGs: straight-line numeric code plus if/else, with a reference
// evaluator that knows nothing about forcing.

#[derive(Debug, Clone)]
pub enum Node {
    /// `v[target] = v[src] op k;`
    Assign {
        target: usize,
        src: usize,
        op: char,
        k: i64,
    },
    If {
        id: usize,
        var: usize,
        cmp: &'static str,
        k: i64,
        then: Vec<Node>,
        els: Vec<Node>,
    },
}

#[derive(Debug, Clone)]
pub struct Dag {
    pub vars: usize,
    pub init: Vec<i64>,
    pub body: Vec<Node>,
    pub branch_count: usize,
    pub source: String,
    /// Byte offset of each branch, by id.
    pub offsets: Vec<usize>,
}

fn random_assigns(rng: &mut impl Rng, vars: usize, counts: std::ops::Range<usize>) -> Vec<Node> {
    let n = rng.gen_range(counts);
    (0..n)
        .map(|_| Node::Assign {
            target: rng.gen_range(0..vars),
            src: rng.gen_range(0..vars),
            op: *['+', '-', '*'].choose(rng).unwrap(),
            k: rng.gen_range(-3..=5),
        })
        .collect()
}

fn random_if(
    rng: &mut impl Rng,
    vars: usize,
    next_id: &mut usize,
    then: Vec<Node>,
    els: Vec<Node>,
) -> Node {
    let id = *next_id;
    *next_id += 1;
    Node::If {
        id,
        var: rng.gen_range(0..vars),
        cmp: ["<", ">", "<=", ">=", "==", "!="].choose(rng).unwrap(),
        k: rng.gen_range(-4..=8),
        then,
        els,
    }
}

/// `k` if/else diamonds in sequence, separated by assignments.
pub fn sequential_dag(rng: &mut impl Rng, k: usize) -> Dag {
    let vars = rng.gen_range(2..=5);
    let mut next = 0;
    let mut body = random_assigns(rng, vars, 0..3);
    for _ in 0..k {
        let then = random_assigns(rng, vars, 1..3);
        let els = random_assigns(rng, vars, 0..3);
        body.push(random_if(rng, vars, &mut next, then, els));
        body.extend(random_assigns(rng, vars, 0..2));
    }
    finish(rng, vars, body, next)
}

/// Up to `k` branch points nested at random inside each other's arms.
pub fn nested_dag(rng: &mut impl Rng, k: usize) -> Dag {
    fn block(
        rng: &mut impl Rng,
        vars: usize,
        budget: &mut usize,
        next: &mut usize,
        depth: usize,
    ) -> Vec<Node> {
        let mut out = random_assigns(rng, vars, 0..2);
        while *budget > 0 && rng.gen_bool(if depth == 0 { 0.9 } else { 0.5 }) {
            *budget -= 1;
            let then = block(rng, vars, budget, next, depth + 1);
            let els = block(rng, vars, budget, next, depth + 1);
            out.push(random_if(rng, vars, next, then, els));
            out.extend(random_assigns(rng, vars, 0..2));
        }
        out
    }
    let vars = rng.gen_range(2..=5);
    let mut budget = k;
    let mut next = 0;
    let body = block(rng, vars, &mut budget, &mut next, 0);
    finish(rng, vars, body, next)
}

fn finish(rng: &mut impl Rng, vars: usize, body: Vec<Node>, branch_count: usize) -> Dag {
    let init: Vec<i64> = (0..vars).map(|_| rng.gen_range(-3..=6)).collect();
    let mut source = String::new();
    for (i, v) in init.iter().enumerate() {
        source.push_str(&format!("var v{i} = {v};\n"));
    }
    let mut offsets = vec![0; branch_count];
    render(&body, 0, &mut source, &mut offsets);
    Dag {
        vars,
        init,
        body,
        branch_count,
        source,
        offsets,
    }
}

fn render(nodes: &[Node], indent: usize, out: &mut String, offsets: &mut [usize]) {
    let pad = "    ".repeat(indent);
    for n in nodes {
        match n {
            Node::Assign { target, src, op, k } => {
                out.push_str(&format!("{pad}v{target} = v{src} {op} {k};\n"));
            }
            Node::If {
                id,
                var,
                cmp,
                k,
                then,
                els,
            } => {
                out.push_str(&pad);
                offsets[*id] = out.len();
                out.push_str(&format!("if (v{var} {cmp} {k}) {{\n"));
                render(then, indent + 1, out, offsets);
                out.push_str(&format!("{pad}}} else {{\n"));
                render(els, indent + 1, out, offsets);
                out.push_str(&format!("{pad}}}\n"));
            }
        }
    }
}

fn compare(a: f64, cmp: &str, b: f64) -> bool {
    match cmp {
        "<" => a < b,
        ">" => a > b,
        "<=" => a <= b,
        ">=" => a >= b,
        "==" => a == b,
        "!=" => a != b,
        _ => unreachable!(),
    }
}

/// Walks the DAG. `force` picks the direction of a branch by id; `None`
/// evaluates the condition. Visited (id, direction) pairs go to `out`.
fn walk(
    nodes: &[Node],
    vars: &mut [f64],
    force: &dyn Fn(usize) -> Option<bool>,
    out: &mut Vec<(usize, bool)>,
) {
    for n in nodes {
        match n {
            Node::Assign { target, src, op, k } => {
                let (a, b) = (vars[*src], *k as f64);
                vars[*target] = match op {
                    '+' => a + b,
                    '-' => a - b,
                    _ => a * b,
                };
            }
            Node::If {
                id,
                var,
                cmp,
                k,
                then,
                els,
            } => {
                let dir = force(*id).unwrap_or_else(|| compare(vars[*var], cmp, *k as f64));
                out.push((*id, dir));
                walk(if dir { then } else { els }, vars, force, out);
            }
        }
    }
}

impl Dag {
    /// Branch directions of the unforced run, in execution order.
    pub fn natural_path(&self) -> Vec<(usize, bool)> {
        let mut vars: Vec<f64> = self.init.iter().map(|v| *v as f64).collect();
        let mut out = Vec::new();
        walk(&self.body, &mut vars, &|_| None, &mut out);
        out
    }

    /// Every (branch, direction) reachable under some forcing of all branches.
    pub fn reachable_arms(&self) -> BTreeSet<(usize, bool)> {
        let mut all = BTreeSet::new();
        for mask in 0u32..(1u32 << self.branch_count) {
            let mut vars: Vec<f64> = self.init.iter().map(|v| *v as f64).collect();
            let mut out = Vec::new();
            walk(
                &self.body,
                &mut vars,
                &|id| Some(mask & (1 << id) != 0),
                &mut out,
            );
            all.extend(out);
        }
        all
    }

    pub fn id_of_offset(&self, offset: usize) -> Option<usize> {
        self.offsets.iter().position(|o| *o == offset)
    }

    /// Arms marked covered in unit `main`, by branch id.
    pub fn covered_arms(&self, coverage: &forcex::CoverageMap) -> BTreeSet<(usize, bool)> {
        let Some(unit) = coverage.units.get("main") else {
            return BTreeSet::new();
        };
        unit.iter()
            .flat_map(|(off, d)| {
                let id = self
                    .id_of_offset(*off)
                    .expect("anchor is a generated branch");
                [(id, true), (id, false)]
                    .into_iter()
                    .filter(move |(_, b)| d.get(*b))
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Grammar-directed fuzzing of the supported subset.

pub struct Fuzz<'r, R: Rng> {
    rng: &'r mut R,
    depth: usize,
    funcs: usize,
    in_try: usize,
    in_loop: usize,
    in_function: usize,
}

const IDENTS: &[&str] = &[
    "a",
    "b",
    "c",
    "x",
    "y",
    "u1",
    "u2",
    "obj",
    "arr",
    "navigator",
    "window",
    "document",
    "e",
];
const PROPS: &[&str] = &[
    "length",
    "foo",
    "bar",
    "appName",
    "userAgent",
    "prototype",
    "toString",
    "push",
    "style",
    "src",
];
const BINOPS: &[&str] = &[
    "+",
    "-",
    "*",
    "/",
    "%",
    "<<",
    ">>",
    ">>>",
    "&",
    "|",
    "^",
    "<",
    ">",
    "<=",
    ">=",
    "==",
    "!=",
    "===",
    "!==",
    "in",
    "instanceof",
];
const CALLEES: &[&str] = &[
    "Math.abs",
    "Math.floor",
    "Math.max",
    "parseInt",
    "parseFloat",
    "String.fromCharCode",
    "unescape",
    "escape",
    "isNaN",
    "foo",
    "obj.method",
    "u1.run",
    "document.write",
    "window.addEvent",
    "setTimeout",
    "Array",
    "Object.keys",
    "navigator.appName.indexOf",
    "x.toString",
    "arr.push",
    "arr.join",
    "String",
    "Number",
];

impl<'r, R: Rng> Fuzz<'r, R> {
    pub fn new(rng: &'r mut R) -> Self {
        Fuzz {
            rng,
            depth: 0,
            funcs: 0,
            in_try: 0,
            in_loop: 0,
            in_function: 0,
        }
    }

    pub fn program(&mut self) -> String {
        let n = self.rng.gen_range(1..12);
        let mut out = String::new();
        for _ in 0..n {
            out.push_str(&self.stmt());
            out.push('\n');
        }
        out
    }

    fn pick<'a>(&mut self, xs: &[&'a str]) -> &'a str {
        xs.choose(self.rng).unwrap()
    }

    fn ident(&mut self) -> String {
        if self.funcs > 0 && self.rng.gen_bool(0.1) {
            return format!("f{}", self.rng.gen_range(0..self.funcs));
        }
        self.pick(IDENTS).to_string()
    }

    fn block(&mut self) -> String {
        let n = self.rng.gen_range(0..4);
        let mut s = String::from("{ ");
        for _ in 0..n {
            s.push_str(&self.stmt());
            s.push(' ');
        }
        s.push('}');
        s
    }

    fn lhs(&mut self) -> String {
        match self.rng.gen_range(0..4) {
            0 | 1 => self.ident(),
            2 => format!("{}.{}", self.ident(), self.pick(PROPS)),
            _ => {
                let i = self.index_key();
                format!("{}[{}]", self.ident(), i)
            }
        }
    }

    fn index_key(&mut self) -> String {
        match self.rng.gen_range(0..4) {
            0 => self.rng.gen_range(0..20).to_string(),
            1 => self.ident(),
            2 => format!("\"{}\"", self.pick(PROPS)),
            _ => self.expr(),
        }
    }

    pub fn stmt(&mut self) -> String {
        self.depth += 1;
        let deep = self.depth > 4;
        let choice = if deep {
            self.rng.gen_range(0..4)
        } else {
            self.rng.gen_range(0..17)
        };
        let s = match choice {
            0 => format!("var {} = {};", self.ident(), self.expr()),
            1 => format!("{} = {};", self.lhs(), self.expr()),
            2 => {
                let e = self.expr();
                if e.starts_with('{') || e.starts_with("function") {
                    format!("({e});")
                } else {
                    format!("{e};")
                }
            }
            3 => match self.rng.gen_range(0..3) {
                0 => format!("var {} = null;", self.ident()),
                1 => format!("var {};", self.ident()),
                _ => format!("{} += {};", self.lhs(), self.expr()),
            },
            4 => {
                let (t, c) = (self.expr(), self.block());
                if self.rng.gen_bool(0.5) {
                    format!("if ({t}) {c} else {}", self.block())
                } else {
                    format!("if ({t}) {c}")
                }
            }
            5 => {
                self.in_loop += 1;
                let s = format!("while ({}) {}", self.expr(), self.block());
                self.in_loop -= 1;
                s
            }
            6 => {
                self.in_loop += 1;
                let n = self.rng.gen_range(0..30);
                let s = format!("for (var i = 0; i < {n}; i++) {}", self.block());
                self.in_loop -= 1;
                s
            }
            7 => {
                self.in_try += 1;
                let body = self.block();
                self.in_try -= 1;
                let handler = self.block();
                if self.rng.gen_bool(0.3) {
                    format!("try {body} catch (e) {handler} finally {}", self.block())
                } else {
                    format!("try {body} catch (e) {handler}")
                }
            }
            8 => {
                let id = self.funcs;
                self.funcs += 1;
                let body = self.function_body();
                let recurse = if self.rng.gen_bool(0.3) {
                    format!("f{id}(p + 1);")
                } else {
                    String::new()
                };
                format!(
                    "function f{id}(p, q) {{ {recurse} {body} return {}; }}",
                    self.expr()
                )
            }
            9 => {
                let cases: Vec<String> = (0..self.rng.gen_range(1..4))
                    .map(|i| {
                        let b = self.block();
                        format!("case {i}: {b} break;")
                    })
                    .collect();
                format!(
                    "switch ({}) {{ {} default: {} }}",
                    self.expr(),
                    cases.join(" "),
                    self.block()
                )
            }
            10 if self.in_try > 0 => format!("throw {};", self.expr()),
            11 if self.in_loop > 0 => {
                if self.rng.gen_bool(0.5) {
                    "break;".into()
                } else {
                    "continue;".into()
                }
            }
            12 if self.in_function > 0 => format!("return {};", self.expr()),
            13 => format!("for (var k in {}) {}", self.expr(), self.block()),
            14 => format!("{}[{}] = {};", self.ident(), self.index_key(), self.expr()),
            15 => format!(
                "setTimeout(function () {} , {});",
                self.function_body(),
                self.rng.gen_range(0..5000)
            ),
            _ => format!("{}({});", self.pick(CALLEES), self.args()),
        };
        self.depth -= 1;
        s
    }

    fn function_body(&mut self) -> String {
        let saved = (self.in_loop, self.in_try);
        (self.in_loop, self.in_try) = (0, 0);
        self.in_function += 1;
        let body = self.block();
        self.in_function -= 1;
        (self.in_loop, self.in_try) = saved;
        body
    }

    fn args(&mut self) -> String {
        let n = self.rng.gen_range(0..3);
        (0..n).map(|_| self.expr()).collect::<Vec<_>>().join(", ")
    }

    pub fn expr(&mut self) -> String {
        self.depth += 1;
        let deep = self.depth > 6;
        let choice = if deep {
            self.rng.gen_range(0..4)
        } else {
            self.rng.gen_range(0..20)
        };
        let s = match choice {
            0 => self.rng.gen_range(-5..100).to_string(),
            1 => format!(
                "\"{}\"",
                ["", "abc", "%u9090", "1", "var z = 1;", "Hello World"]
                    .choose(self.rng)
                    .unwrap()
            ),
            2 => self.ident(),
            3 => ["null", "undefined", "true", "false", "this"]
                .choose(self.rng)
                .unwrap()
                .to_string(),
            4 => format!("{}.{}", self.ident(), self.pick(PROPS)),
            5 => format!("{}.{}.{}", self.ident(), self.pick(PROPS), self.pick(PROPS)),
            6 => format!("{}[{}]", self.ident(), self.index_key()),
            7 | 8 => format!("({} {} {})", self.expr(), self.pick(BINOPS), self.expr()),
            9 => format!(
                "({} {})",
                ["-", "+", "!", "~", "typeof", "void"]
                    .choose(self.rng)
                    .unwrap(),
                self.expr()
            ),
            10 => format!(
                "{}{}",
                self.ident(),
                if self.rng.gen_bool(0.5) { "++" } else { "--" }
            ),
            11 => format!("({} ? {} : {})", self.expr(), self.expr(), self.expr()),
            12 => format!("({} && {})", self.expr(), self.expr()),
            13 => format!("({} || {})", self.expr(), self.expr()),
            14 => format!("function (p) {}", self.function_body()),
            15 => format!("[{}]", self.args()),
            16 => format!("{{ k1: {}, \"k2\": {} }}", self.expr(), self.expr()),
            17 => format!("{}({})", self.pick(CALLEES), self.args()),
            18 => format!(
                "new {}({})",
                ["Foo", "ActiveXObject", "Array", "Date", "obj.Thing", "u1"]
                    .choose(self.rng)
                    .unwrap(),
                self.args()
            ),
            _ => format!("{}({})", self.ident(), self.args()),
        };
        self.depth -= 1;
        s
    }
}
