//! Syntax tree for the supported subset.
//!
//! Every statement and expression carries a [`SourceAnchor`]. Nodes that can
//! steer control flow expose their anchor through [`Program::branch_points`];
//! the explorer uses those anchors to name predicates across runs.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// `unit:offset`: the byte offset of a construct inside a named script unit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SourceAnchor {
    pub source_name: Arc<str>,
    pub offset: usize,
}

impl SourceAnchor {
    pub fn new(source_name: impl Into<Arc<str>>, offset: usize) -> Self {
        SourceAnchor {
            source_name: source_name.into(),
            offset,
        }
    }
}

impl fmt::Display for SourceAnchor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.source_name, self.offset)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub unit_anchor: SourceAnchor,
    pub statements: Vec<Stmt>,
    /// Text the program was parsed from.
    pub source: Arc<str>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub anchor: SourceAnchor,
    pub kind: StmtKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeclKind {
    Var,
    Let,
    Const,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDeclarator {
    pub anchor: SourceAnchor,
    pub name: Arc<str>,
    pub init: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ForInit {
    Var(DeclKind, Vec<VarDeclarator>),
    Expr(Expr),
}

/// Left-hand side of `for (x in o)` / `for (x of o)`.
#[derive(Debug, Clone, PartialEq)]
pub enum ForTarget {
    Var(DeclKind, Arc<str>),
    Expr(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatchClause {
    pub param: Option<Arc<str>>,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchCase {
    /// Offset of the `case` / `default` keyword.
    pub anchor: SourceAnchor,
    /// `None` for `default:`.
    pub test: Option<Expr>,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Empty,
    Block(Vec<Stmt>),
    Var(DeclKind, Vec<VarDeclarator>),
    Expr(Expr),
    If {
        test: Expr,
        consequent: Box<Stmt>,
        alternate: Option<Box<Stmt>>,
    },
    While {
        test: Expr,
        body: Box<Stmt>,
    },
    For {
        init: Option<ForInit>,
        test: Option<Expr>,
        update: Option<Expr>,
        body: Box<Stmt>,
    },
    ForIn {
        target: ForTarget,
        object: Expr,
        body: Box<Stmt>,
        of: bool,
    },
    Try {
        block: Vec<Stmt>,
        handler: Option<CatchClause>,
        finalizer: Option<Vec<Stmt>>,
    },
    Switch {
        discriminant: Expr,
        cases: Vec<SwitchCase>,
    },
    Return(Option<Expr>),
    Function(Arc<Function>),
    Break,
    Continue,
    Throw(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Function {
    pub anchor: SourceAnchor,
    pub name: Option<Arc<str>>,
    pub params: Vec<Arc<str>>,
    pub body: Vec<Stmt>,
    /// The body mentions `arguments` somewhere outside nested functions.
    pub uses_arguments: bool,
    /// Byte range of the whole function in its unit, for `toString`.
    pub source_range: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Shl,
    Shr,
    UShr,
    BitAnd,
    BitOr,
    BitXor,
    Lt,
    Gt,
    Le,
    Ge,
    Eq,
    Ne,
    StrictEq,
    StrictNe,
    In,
    Instanceof,
}

impl BinaryOp {
    pub const ALL: [BinaryOp; 21] = [
        BinaryOp::Add,
        BinaryOp::Sub,
        BinaryOp::Mul,
        BinaryOp::Div,
        BinaryOp::Mod,
        BinaryOp::Shl,
        BinaryOp::Shr,
        BinaryOp::UShr,
        BinaryOp::BitAnd,
        BinaryOp::BitOr,
        BinaryOp::BitXor,
        BinaryOp::Lt,
        BinaryOp::Gt,
        BinaryOp::Le,
        BinaryOp::Ge,
        BinaryOp::Eq,
        BinaryOp::Ne,
        BinaryOp::StrictEq,
        BinaryOp::StrictNe,
        BinaryOp::In,
        BinaryOp::Instanceof,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Mod => "%",
            BinaryOp::Shl => "<<",
            BinaryOp::Shr => ">>",
            BinaryOp::UShr => ">>>",
            BinaryOp::BitAnd => "&",
            BinaryOp::BitOr => "|",
            BinaryOp::BitXor => "^",
            BinaryOp::Lt => "<",
            BinaryOp::Gt => ">",
            BinaryOp::Le => "<=",
            BinaryOp::Ge => ">=",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::StrictEq => "===",
            BinaryOp::StrictNe => "!==",
            BinaryOp::In => "in",
            BinaryOp::Instanceof => "instanceof",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Plus,
    BitNot,
    Not,
    Typeof,
    Void,
    Delete,
}

impl UnaryOp {
    pub const ALL: [UnaryOp; 7] = [
        UnaryOp::Neg,
        UnaryOp::Plus,
        UnaryOp::BitNot,
        UnaryOp::Not,
        UnaryOp::Typeof,
        UnaryOp::Void,
        UnaryOp::Delete,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Plus => "+",
            UnaryOp::BitNot => "~",
            UnaryOp::Not => "!",
            UnaryOp::Typeof => "typeof",
            UnaryOp::Void => "void",
            UnaryOp::Delete => "delete",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UpdateOp {
    Inc,
    Dec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LogicalOp {
    And,
    Or,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PropKey {
    Ident(Arc<str>),
    Str(Arc<str>),
    Num(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub anchor: SourceAnchor,
    pub kind: ExprKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Number(f64),
    Str(Arc<[u16]>),
    Bool(bool),
    Null,
    Regex {
        pattern: Arc<str>,
        flags: Arc<str>,
    },
    Ident(Arc<str>),
    This,
    /// `o.name`; `o.prototype` / `o.__proto__` are prototype accesses.
    Member {
        object: Box<Expr>,
        property: Arc<str>,
    },
    Index {
        object: Box<Expr>,
        index: Box<Expr>,
    },
    Unary {
        op: UnaryOp,
        argument: Box<Expr>,
    },
    Update {
        op: UpdateOp,
        prefix: bool,
        argument: Box<Expr>,
    },
    Binary {
        op: BinaryOp,
        left: Box<Expr>,
        right: Box<Expr>,
    },
    /// Anchored at the operator token so nested chains stay distinct.
    Logical {
        op: LogicalOp,
        left: Box<Expr>,
        right: Box<Expr>,
    },
    /// `op` is `None` for plain `=`.
    Assign {
        op: Option<BinaryOp>,
        target: Box<Expr>,
        value: Box<Expr>,
    },
    /// Anchored at the `?` token.
    Conditional {
        test: Box<Expr>,
        consequent: Box<Expr>,
        alternate: Box<Expr>,
    },
    Call {
        callee: Box<Expr>,
        args: Vec<Expr>,
    },
    New {
        callee: Box<Expr>,
        args: Vec<Expr>,
    },
    Object(Vec<(PropKey, Expr)>),
    Array(Vec<Option<Expr>>),
    Function(Arc<Function>),
    Sequence(Vec<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchKind {
    If,
    While,
    For,
    Conditional,
    SwitchCase,
    TryCatch,
    LogicalAnd,
    LogicalOr,
}

impl Expr {
    /// Short textual rendering of reference-like expressions (`a`, `a.b`,
    /// `a[5]`), used to name subjects in recovery logs.
    pub fn display_path(&self) -> String {
        match &self.kind {
            ExprKind::Ident(name) => name.to_string(),
            ExprKind::This => "this".into(),
            ExprKind::Member { object, property } => {
                format!("{}.{}", object.display_path(), property)
            }
            ExprKind::Index { object, index } => {
                let idx = match &index.kind {
                    ExprKind::Number(n) => crate::values::number::number_to_string(*n),
                    ExprKind::Str(s) => format!("{:?}", String::from_utf16_lossy(s)),
                    ExprKind::Ident(name) => name.to_string(),
                    _ => "…".into(),
                };
                format!("{}[{}]", object.display_path(), idx)
            }
            ExprKind::Call { callee, .. } => format!("{}()", callee.display_path()),
            ExprKind::New { callee, .. } => format!("new {}()", callee.display_path()),
            ExprKind::Str(s) => format!("{:?}", String::from_utf16_lossy(s)),
            ExprKind::Number(n) => crate::values::number::number_to_string(*n),
            ExprKind::Function(f) => match &f.name {
                Some(name) => format!("function {name}"),
                None => "function".into(),
            },
            _ => "<expr>".into(),
        }
    }
}

/// Visits every node of a program in source order.
pub trait Visitor {
    fn stmt(&mut self, _stmt: &Stmt) {}
    fn expr(&mut self, _expr: &Expr) {}
    fn switch_case(&mut self, _case: &SwitchCase) {}
}

pub fn walk_stmts<V: Visitor>(v: &mut V, stmts: &[Stmt]) {
    for s in stmts {
        walk_stmt(v, s);
    }
}

pub fn walk_stmt<V: Visitor>(v: &mut V, stmt: &Stmt) {
    v.stmt(stmt);
    match &stmt.kind {
        StmtKind::Empty | StmtKind::Break | StmtKind::Continue => {}
        StmtKind::Block(body) => walk_stmts(v, body),
        StmtKind::Var(_, decls) => walk_decls(v, decls),
        StmtKind::Expr(e) | StmtKind::Throw(e) => walk_expr(v, e),
        StmtKind::If {
            test,
            consequent,
            alternate,
        } => {
            walk_expr(v, test);
            walk_stmt(v, consequent);
            if let Some(alt) = alternate {
                walk_stmt(v, alt);
            }
        }
        StmtKind::While { test, body } => {
            walk_expr(v, test);
            walk_stmt(v, body);
        }
        StmtKind::For {
            init,
            test,
            update,
            body,
        } => {
            match init {
                Some(ForInit::Var(_, decls)) => walk_decls(v, decls),
                Some(ForInit::Expr(e)) => walk_expr(v, e),
                None => {}
            }
            if let Some(t) = test {
                walk_expr(v, t);
            }
            if let Some(u) = update {
                walk_expr(v, u);
            }
            walk_stmt(v, body);
        }
        StmtKind::ForIn {
            target,
            object,
            body,
            ..
        } => {
            if let ForTarget::Expr(e) = target {
                walk_expr(v, e);
            }
            walk_expr(v, object);
            walk_stmt(v, body);
        }
        StmtKind::Try {
            block,
            handler,
            finalizer,
        } => {
            walk_stmts(v, block);
            if let Some(h) = handler {
                walk_stmts(v, &h.body);
            }
            if let Some(f) = finalizer {
                walk_stmts(v, f);
            }
        }
        StmtKind::Switch {
            discriminant,
            cases,
        } => {
            walk_expr(v, discriminant);
            for case in cases {
                v.switch_case(case);
                if let Some(t) = &case.test {
                    walk_expr(v, t);
                }
                walk_stmts(v, &case.body);
            }
        }
        StmtKind::Return(e) => {
            if let Some(e) = e {
                walk_expr(v, e);
            }
        }
        StmtKind::Function(f) => walk_stmts(v, &f.body),
    }
}

fn walk_decls<V: Visitor>(v: &mut V, decls: &[VarDeclarator]) {
    for d in decls {
        if let Some(init) = &d.init {
            walk_expr(v, init);
        }
    }
}

pub fn walk_expr<V: Visitor>(v: &mut V, expr: &Expr) {
    v.expr(expr);
    match &expr.kind {
        ExprKind::Number(_)
        | ExprKind::Str(_)
        | ExprKind::Bool(_)
        | ExprKind::Null
        | ExprKind::Regex { .. }
        | ExprKind::Ident(_)
        | ExprKind::This => {}
        ExprKind::Member { object, .. } => walk_expr(v, object),
        ExprKind::Index { object, index } => {
            walk_expr(v, object);
            walk_expr(v, index);
        }
        ExprKind::Unary { argument, .. } | ExprKind::Update { argument, .. } => {
            walk_expr(v, argument)
        }
        ExprKind::Binary { left, right, .. } | ExprKind::Logical { left, right, .. } => {
            walk_expr(v, left);
            walk_expr(v, right);
        }
        ExprKind::Assign { target, value, .. } => {
            walk_expr(v, target);
            walk_expr(v, value);
        }
        ExprKind::Conditional {
            test,
            consequent,
            alternate,
        } => {
            walk_expr(v, test);
            walk_expr(v, consequent);
            walk_expr(v, alternate);
        }
        ExprKind::Call { callee, args } | ExprKind::New { callee, args } => {
            walk_expr(v, callee);
            for a in args {
                walk_expr(v, a);
            }
        }
        ExprKind::Object(props) => {
            for (_, e) in props {
                walk_expr(v, e);
            }
        }
        ExprKind::Array(items) => {
            for e in items.iter().flatten() {
                walk_expr(v, e);
            }
        }
        ExprKind::Function(f) => walk_stmts(v, &f.body),
        ExprKind::Sequence(items) => {
            for e in items {
                walk_expr(v, e);
            }
        }
    }
}

struct BranchCollector(Vec<(SourceAnchor, BranchKind)>);

impl Visitor for BranchCollector {
    fn stmt(&mut self, stmt: &Stmt) {
        let kind = match &stmt.kind {
            StmtKind::If { .. } => BranchKind::If,
            StmtKind::While { .. } => BranchKind::While,
            StmtKind::For { .. } => BranchKind::For,
            StmtKind::Try {
                handler: Some(_), ..
            } => BranchKind::TryCatch,
            _ => return,
        };
        self.0.push((stmt.anchor.clone(), kind));
    }

    fn expr(&mut self, expr: &Expr) {
        let kind = match &expr.kind {
            ExprKind::Conditional { .. } => BranchKind::Conditional,
            ExprKind::Logical {
                op: LogicalOp::And, ..
            } => BranchKind::LogicalAnd,
            ExprKind::Logical {
                op: LogicalOp::Or, ..
            } => BranchKind::LogicalOr,
            _ => return,
        };
        self.0.push((expr.anchor.clone(), kind));
    }

    fn switch_case(&mut self, case: &SwitchCase) {
        if case.test.is_some() {
            self.0.push((case.anchor.clone(), BranchKind::SwitchCase));
        }
    }
}

impl Program {
    /// Every branch point in the program, including those inside function bodies,
    /// in source order.
    pub fn branch_points(&self) -> Vec<(SourceAnchor, BranchKind)> {
        let mut c = BranchCollector(Vec::new());
        walk_stmts(&mut c, &self.statements);
        c.0
    }

    pub fn unit_name(&self) -> &Arc<str> {
        &self.unit_anchor.source_name
    }
}
