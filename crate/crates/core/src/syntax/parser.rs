//! Recursive-descent parser for the supported subset.

use std::sync::Arc;

use thiserror::Error;

use super::ast::*;
use super::lexer::{tokenize, Keyword, LexError, Punct, Token, TokenKind};

/// Deepest syntactic nesting accepted; deeper input is reported as a syntax error
/// instead of exhausting the evaluator's stack.
pub const MAX_NESTING: usize = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("syntax error at {anchor}: {message}")]
pub struct SyntaxError {
    pub anchor: SourceAnchor,
    pub message: String,
}

impl SyntaxError {
    fn from_lex(unit: &Arc<str>, e: LexError) -> Self {
        SyntaxError {
            anchor: SourceAnchor::new(unit.clone(), e.offset),
            message: e.reason,
        }
    }
}

type PResult<T> = Result<T, SyntaxError>;

struct Parser<'a> {
    src: &'a str,
    unit: Arc<str>,
    tokens: Vec<Token>,
    pos: usize,
    depth: usize,
    function_depth: usize,
    breakable_depth: usize,
    loop_depth: usize,
    /// One flag per enclosing function: whether `arguments` was mentioned.
    arguments_flags: Vec<bool>,
}

/// Parses `source` as a script unit called `unit_name`.
pub fn parse(source: &str, unit_name: &str) -> PResult<Program> {
    crate::interp::run_on_big_stack(|| parse_here(source, unit_name))
}

fn parse_here(source: &str, unit_name: &str) -> PResult<Program> {
    let unit: Arc<str> = Arc::from(unit_name);
    let tokens = tokenize(source).map_err(|e| SyntaxError::from_lex(&unit, e))?;
    let mut p = Parser {
        src: source,
        unit: unit.clone(),
        tokens,
        pos: 0,
        depth: 0,
        function_depth: 0,
        breakable_depth: 0,
        loop_depth: 0,
        arguments_flags: Vec::new(),
    };
    let mut statements = Vec::new();
    while !p.at_eof() {
        statements.push(p.statement()?);
    }
    Ok(Program {
        unit_anchor: SourceAnchor::new(unit, 0),
        statements,
        source: Arc::from(source),
    })
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek_kind(&self) -> &TokenKind {
        &self.tokens[self.pos].kind
    }

    fn peek_nth_kind(&self, n: usize) -> &TokenKind {
        let idx = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[idx].kind
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek_kind(), TokenKind::Eof)
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn anchor_here(&self) -> SourceAnchor {
        SourceAnchor::new(self.unit.clone(), self.peek().offset)
    }

    fn error_here(&self, message: impl Into<String>) -> SyntaxError {
        SyntaxError {
            anchor: self.anchor_here(),
            message: message.into(),
        }
    }

    fn unexpected(&self) -> SyntaxError {
        self.error_here(format!("unexpected token {}", self.peek_kind()))
    }

    fn is_punct(&self, p: Punct) -> bool {
        matches!(self.peek_kind(), TokenKind::Punct(q) if *q == p)
    }

    fn is_keyword(&self, k: Keyword) -> bool {
        matches!(self.peek_kind(), TokenKind::Keyword(q) if *q == k)
    }

    fn eat_punct(&mut self, p: Punct) -> bool {
        if self.is_punct(p) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: Punct) -> PResult<Token> {
        if self.is_punct(p) {
            Ok(self.advance())
        } else {
            Err(self.error_here(format!(
                "expected `{}` but found {}",
                p.as_str(),
                self.peek_kind()
            )))
        }
    }

    fn expect_keyword(&mut self, k: Keyword) -> PResult<Token> {
        if self.is_keyword(k) {
            Ok(self.advance())
        } else {
            Err(self.error_here(format!(
                "expected `{}` but found {}",
                k.as_str(),
                self.peek_kind()
            )))
        }
    }

    fn ident_name(&mut self) -> PResult<Arc<str>> {
        match self.peek_kind().clone() {
            TokenKind::Ident(name) => {
                self.advance();
                Ok(Arc::from(name.as_str()))
            }
            _ => Err(self.unexpected()),
        }
    }

    /// Identifier or reserved word, as allowed after `.` and as object keys.
    fn property_name(&mut self) -> PResult<Arc<str>> {
        match self.peek_kind().clone() {
            TokenKind::Ident(name) => {
                self.advance();
                Ok(Arc::from(name.as_str()))
            }
            TokenKind::Keyword(k) => {
                self.advance();
                Ok(Arc::from(k.as_str()))
            }
            _ => Err(self.unexpected()),
        }
    }

    /// Automatic semicolon insertion: a real `;`, or a line break / `}` / end of input.
    fn consume_semicolon(&mut self) -> PResult<()> {
        if self.eat_punct(Punct::Semi) {
            return Ok(());
        }
        if self.is_punct(Punct::RBrace) || self.at_eof() || self.peek().newline_before {
            return Ok(());
        }
        Err(self.unexpected())
    }

    fn enter(&mut self) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            return Err(self.error_here("nesting too deep"));
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    // ── statements ──────────────────────────────────────────────────────

    fn statement(&mut self) -> PResult<Stmt> {
        self.enter()?;
        let r = self.statement_inner();
        self.leave();
        r
    }

    fn statement_inner(&mut self) -> PResult<Stmt> {
        let anchor = self.anchor_here();
        let kind = match self.peek_kind().clone() {
            TokenKind::Punct(Punct::LBrace) => StmtKind::Block(self.block()?),
            TokenKind::Punct(Punct::Semi) => {
                self.advance();
                StmtKind::Empty
            }
            TokenKind::Keyword(Keyword::Var) => self.var_statement(DeclKind::Var)?,
            TokenKind::Keyword(Keyword::Let) => self.var_statement(DeclKind::Let)?,
            TokenKind::Keyword(Keyword::Const) => self.var_statement(DeclKind::Const)?,
            TokenKind::Keyword(Keyword::If) => self.if_statement()?,
            TokenKind::Keyword(Keyword::While) => {
                self.advance();
                self.expect_punct(Punct::LParen)?;
                let test = self.expression(false)?;
                self.expect_punct(Punct::RParen)?;
                let body = self.loop_body()?;
                StmtKind::While {
                    test,
                    body: Box::new(body),
                }
            }
            TokenKind::Keyword(Keyword::For) => self.for_statement()?,
            TokenKind::Keyword(Keyword::Return) => {
                self.advance();
                if self.function_depth == 0 {
                    return Err(SyntaxError {
                        anchor,
                        message: "return outside function".into(),
                    });
                }
                let arg = if self.is_punct(Punct::Semi)
                    || self.is_punct(Punct::RBrace)
                    || self.at_eof()
                    || self.peek().newline_before
                {
                    None
                } else {
                    Some(self.expression(false)?)
                };
                self.consume_semicolon()?;
                StmtKind::Return(arg)
            }
            TokenKind::Keyword(Keyword::Break) => {
                self.advance();
                if self.breakable_depth == 0 {
                    return Err(SyntaxError {
                        anchor,
                        message: "break outside loop or switch".into(),
                    });
                }
                self.reject_label()?;
                self.consume_semicolon()?;
                StmtKind::Break
            }
            TokenKind::Keyword(Keyword::Continue) => {
                self.advance();
                if self.loop_depth == 0 {
                    return Err(SyntaxError {
                        anchor,
                        message: "continue outside loop".into(),
                    });
                }
                self.reject_label()?;
                self.consume_semicolon()?;
                StmtKind::Continue
            }
            TokenKind::Keyword(Keyword::Throw) => {
                self.advance();
                if self.peek().newline_before {
                    return Err(self.error_here("line break after throw"));
                }
                let arg = self.expression(false)?;
                self.consume_semicolon()?;
                StmtKind::Throw(arg)
            }
            TokenKind::Keyword(Keyword::Try) => self.try_statement()?,
            TokenKind::Keyword(Keyword::Switch) => self.switch_statement()?,
            TokenKind::Keyword(Keyword::Function) => {
                let f = self.function(true)?;
                StmtKind::Function(f)
            }
            TokenKind::Keyword(
                k @ (Keyword::With
                | Keyword::Do
                | Keyword::Class
                | Keyword::Debugger
                | Keyword::Import
                | Keyword::Export
                | Keyword::Yield),
            ) => {
                return Err(SyntaxError {
                    anchor,
                    message: format!("unsupported statement `{}`", k.as_str()),
                });
            }
            TokenKind::Ident(_)
                if matches!(self.peek_nth_kind(1), TokenKind::Punct(Punct::Colon)) =>
            {
                return Err(SyntaxError {
                    anchor,
                    message: "labeled statements are not supported".into(),
                });
            }
            _ => {
                let e = self.expression(false)?;
                self.consume_semicolon()?;
                StmtKind::Expr(e)
            }
        };
        Ok(Stmt { anchor, kind })
    }

    fn reject_label(&self) -> PResult<()> {
        if matches!(self.peek_kind(), TokenKind::Ident(_)) && !self.peek().newline_before {
            return Err(self.error_here("labels are not supported"));
        }
        Ok(())
    }

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect_punct(Punct::LBrace)?;
        let mut body = Vec::new();
        while !self.is_punct(Punct::RBrace) {
            if self.at_eof() {
                return Err(self.error_here("unexpected end of input, expected `}`"));
            }
            body.push(self.statement()?);
        }
        self.advance();
        Ok(body)
    }

    fn loop_body(&mut self) -> PResult<Stmt> {
        self.loop_depth += 1;
        self.breakable_depth += 1;
        let r = self.statement();
        self.loop_depth -= 1;
        self.breakable_depth -= 1;
        r
    }

    fn declarators(&mut self, no_in: bool) -> PResult<Vec<VarDeclarator>> {
        let mut decls = Vec::new();
        loop {
            let anchor = self.anchor_here();
            let name = self.ident_name()?;
            let init = if self.eat_punct(Punct::Assign) {
                Some(self.assignment(no_in)?)
            } else {
                None
            };
            decls.push(VarDeclarator { anchor, name, init });
            if !self.eat_punct(Punct::Comma) {
                return Ok(decls);
            }
        }
    }

    fn var_statement(&mut self, kind: DeclKind) -> PResult<StmtKind> {
        self.advance();
        let decls = self.declarators(false)?;
        self.consume_semicolon()?;
        Ok(StmtKind::Var(kind, decls))
    }

    fn if_statement(&mut self) -> PResult<StmtKind> {
        self.advance();
        self.expect_punct(Punct::LParen)?;
        let test = self.expression(false)?;
        self.expect_punct(Punct::RParen)?;
        let consequent = Box::new(self.statement()?);
        let alternate = if self.is_keyword(Keyword::Else) {
            self.advance();
            Some(Box::new(self.statement()?))
        } else {
            None
        };
        Ok(StmtKind::If {
            test,
            consequent,
            alternate,
        })
    }

    fn is_contextual_of(&self) -> bool {
        matches!(self.peek_kind(), TokenKind::Ident(name) if name == "of")
    }

    fn for_statement(&mut self) -> PResult<StmtKind> {
        self.advance();
        self.expect_punct(Punct::LParen)?;
        let decl_kind = match self.peek_kind() {
            TokenKind::Keyword(Keyword::Var) => Some(DeclKind::Var),
            TokenKind::Keyword(Keyword::Let) => Some(DeclKind::Let),
            TokenKind::Keyword(Keyword::Const) => Some(DeclKind::Const),
            _ => None,
        };
        let init = if let Some(kind) = decl_kind {
            self.advance();
            let decls = self.declarators(true)?;
            let iter_kw = self.is_keyword(Keyword::In) || self.is_contextual_of();
            if iter_kw && decls.len() == 1 && decls[0].init.is_none() {
                let of = self.is_contextual_of();
                self.advance();
                let object = if of {
                    self.assignment(false)?
                } else {
                    self.expression(false)?
                };
                self.expect_punct(Punct::RParen)?;
                let body = self.loop_body()?;
                let name = decls.into_iter().next().unwrap().name;
                return Ok(StmtKind::ForIn {
                    target: ForTarget::Var(kind, name),
                    object,
                    body: Box::new(body),
                    of,
                });
            }
            Some(ForInit::Var(kind, decls))
        } else if self.is_punct(Punct::Semi) {
            None
        } else {
            let e = self.expression(true)?;
            if self.is_keyword(Keyword::In) || self.is_contextual_of() {
                Self::check_assign_target(&e)?;
                let of = self.is_contextual_of();
                self.advance();
                let object = if of {
                    self.assignment(false)?
                } else {
                    self.expression(false)?
                };
                self.expect_punct(Punct::RParen)?;
                let body = self.loop_body()?;
                return Ok(StmtKind::ForIn {
                    target: ForTarget::Expr(e),
                    object,
                    body: Box::new(body),
                    of,
                });
            }
            Some(ForInit::Expr(e))
        };
        self.expect_punct(Punct::Semi)?;
        let test = if self.is_punct(Punct::Semi) {
            None
        } else {
            Some(self.expression(false)?)
        };
        self.expect_punct(Punct::Semi)?;
        let update = if self.is_punct(Punct::RParen) {
            None
        } else {
            Some(self.expression(false)?)
        };
        self.expect_punct(Punct::RParen)?;
        let body = self.loop_body()?;
        Ok(StmtKind::For {
            init,
            test,
            update,
            body: Box::new(body),
        })
    }

    fn try_statement(&mut self) -> PResult<StmtKind> {
        self.advance();
        let block = self.block()?;
        let handler = if self.is_keyword(Keyword::Catch) {
            self.advance();
            let param = if self.eat_punct(Punct::LParen) {
                let name = self.ident_name()?;
                self.expect_punct(Punct::RParen)?;
                Some(name)
            } else {
                None
            };
            let body = self.block()?;
            Some(CatchClause { param, body })
        } else {
            None
        };
        let finalizer = if self.is_keyword(Keyword::Finally) {
            self.advance();
            Some(self.block()?)
        } else {
            None
        };
        if handler.is_none() && finalizer.is_none() {
            return Err(self.error_here("missing catch or finally after try"));
        }
        Ok(StmtKind::Try {
            block,
            handler,
            finalizer,
        })
    }

    fn switch_statement(&mut self) -> PResult<StmtKind> {
        self.advance();
        self.expect_punct(Punct::LParen)?;
        let discriminant = self.expression(false)?;
        self.expect_punct(Punct::RParen)?;
        self.expect_punct(Punct::LBrace)?;
        let mut cases = Vec::new();
        let mut seen_default = false;
        self.breakable_depth += 1;
        while !self.eat_punct(Punct::RBrace) {
            let anchor = self.anchor_here();
            let test = if self.is_keyword(Keyword::Case) {
                self.advance();
                Some(self.expression(false)?)
            } else if self.is_keyword(Keyword::Default) {
                if seen_default {
                    return Err(self.error_here("duplicate default clause"));
                }
                seen_default = true;
                self.advance();
                None
            } else {
                return Err(self.unexpected());
            };
            self.expect_punct(Punct::Colon)?;
            let mut body = Vec::new();
            while !(self.is_keyword(Keyword::Case)
                || self.is_keyword(Keyword::Default)
                || self.is_punct(Punct::RBrace))
            {
                if self.at_eof() {
                    return Err(self.error_here("unexpected end of input in switch"));
                }
                body.push(self.statement()?);
            }
            cases.push(SwitchCase { anchor, test, body });
        }
        self.breakable_depth -= 1;
        Ok(StmtKind::Switch {
            discriminant,
            cases,
        })
    }

    fn function(&mut self, declaration: bool) -> PResult<Arc<Function>> {
        let start = self.expect_keyword(Keyword::Function)?.offset;
        let anchor = SourceAnchor::new(self.unit.clone(), start);
        let name = match self.peek_kind() {
            TokenKind::Ident(_) => Some(self.ident_name()?),
            _ if declaration => return Err(self.error_here("function declaration requires a name")),
            _ => None,
        };
        self.expect_punct(Punct::LParen)?;
        let mut params = Vec::new();
        if !self.is_punct(Punct::RParen) {
            loop {
                params.push(self.ident_name()?);
                if !self.eat_punct(Punct::Comma) {
                    break;
                }
            }
        }
        self.expect_punct(Punct::RParen)?;
        // Saved so that `break` inside a nested function does not see the outer loop.
        let saved = (self.breakable_depth, self.loop_depth);
        self.breakable_depth = 0;
        self.loop_depth = 0;
        self.function_depth += 1;
        self.arguments_flags.push(false);
        let body = self.block();
        let uses_arguments = self.arguments_flags.pop().unwrap_or(false);
        self.function_depth -= 1;
        (self.breakable_depth, self.loop_depth) = saved;
        let body = body?;
        let end = self.tokens[self.pos.saturating_sub(1)].offset + 1;
        Ok(Arc::new(Function {
            anchor,
            name,
            params,
            body,
            uses_arguments,
            source_range: (start, end.min(self.src.len())),
        }))
    }

    // ── expressions ─────────────────────────────────────────────────────

    fn expr(&self, anchor: SourceAnchor, kind: ExprKind) -> Expr {
        Expr { anchor, kind }
    }

    fn expression(&mut self, no_in: bool) -> PResult<Expr> {
        let first = self.assignment(no_in)?;
        if !self.is_punct(Punct::Comma) {
            return Ok(first);
        }
        let anchor = first.anchor.clone();
        let mut items = vec![first];
        while self.eat_punct(Punct::Comma) {
            items.push(self.assignment(no_in)?);
        }
        Ok(self.expr(anchor, ExprKind::Sequence(items)))
    }

    fn check_assign_target(e: &Expr) -> PResult<()> {
        match e.kind {
            ExprKind::Ident(_) | ExprKind::Member { .. } | ExprKind::Index { .. } => Ok(()),
            _ => Err(SyntaxError {
                anchor: e.anchor.clone(),
                message: "invalid assignment target".into(),
            }),
        }
    }

    fn assignment(&mut self, no_in: bool) -> PResult<Expr> {
        self.enter()?;
        let r = self.assignment_inner(no_in);
        self.leave();
        r
    }

    fn assignment_inner(&mut self, no_in: bool) -> PResult<Expr> {
        let target = self.conditional(no_in)?;
        let op = match self.peek_kind() {
            TokenKind::Punct(p) => match p {
                Punct::Assign => Some(None),
                Punct::AddAssign => Some(Some(BinaryOp::Add)),
                Punct::SubAssign => Some(Some(BinaryOp::Sub)),
                Punct::MulAssign => Some(Some(BinaryOp::Mul)),
                Punct::DivAssign => Some(Some(BinaryOp::Div)),
                Punct::ModAssign => Some(Some(BinaryOp::Mod)),
                Punct::ShlAssign => Some(Some(BinaryOp::Shl)),
                Punct::ShrAssign => Some(Some(BinaryOp::Shr)),
                Punct::UShrAssign => Some(Some(BinaryOp::UShr)),
                Punct::AndAssign => Some(Some(BinaryOp::BitAnd)),
                Punct::OrAssign => Some(Some(BinaryOp::BitOr)),
                Punct::XorAssign => Some(Some(BinaryOp::BitXor)),
                _ => None,
            },
            _ => None,
        };
        let Some(op) = op else { return Ok(target) };
        Self::check_assign_target(&target)?;
        self.advance();
        let value = self.assignment(no_in)?;
        let anchor = target.anchor.clone();
        Ok(self.expr(
            anchor,
            ExprKind::Assign {
                op,
                target: Box::new(target),
                value: Box::new(value),
            },
        ))
    }

    fn conditional(&mut self, no_in: bool) -> PResult<Expr> {
        let test = self.logical_or(no_in)?;
        if !self.is_punct(Punct::Question) {
            return Ok(test);
        }
        let anchor = self.anchor_here();
        self.advance();
        let consequent = self.assignment(false)?;
        self.expect_punct(Punct::Colon)?;
        let alternate = self.assignment(no_in)?;
        Ok(self.expr(
            anchor,
            ExprKind::Conditional {
                test: Box::new(test),
                consequent: Box::new(consequent),
                alternate: Box::new(alternate),
            },
        ))
    }

    fn logical_or(&mut self, no_in: bool) -> PResult<Expr> {
        let mut left = self.logical_and(no_in)?;
        while self.is_punct(Punct::Or) {
            let anchor = self.anchor_here();
            self.advance();
            let right = self.logical_and(no_in)?;
            left = self.expr(
                anchor,
                ExprKind::Logical {
                    op: LogicalOp::Or,
                    left: Box::new(left),
                    right: Box::new(right),
                },
            );
        }
        Ok(left)
    }

    fn logical_and(&mut self, no_in: bool) -> PResult<Expr> {
        let mut left = self.binary(0, no_in)?;
        while self.is_punct(Punct::And) {
            let anchor = self.anchor_here();
            self.advance();
            let right = self.binary(0, no_in)?;
            left = self.expr(
                anchor,
                ExprKind::Logical {
                    op: LogicalOp::And,
                    left: Box::new(left),
                    right: Box::new(right),
                },
            );
        }
        Ok(left)
    }

    /// Binary operator at the current token with its precedence level (0 binds loosest).
    fn binary_op_here(&self, no_in: bool) -> Option<(BinaryOp, u8)> {
        let op = match self.peek_kind() {
            TokenKind::Punct(p) => match p {
                Punct::Pipe => (BinaryOp::BitOr, 0),
                Punct::Caret => (BinaryOp::BitXor, 1),
                Punct::Amp => (BinaryOp::BitAnd, 2),
                Punct::Eq => (BinaryOp::Eq, 3),
                Punct::Ne => (BinaryOp::Ne, 3),
                Punct::StrictEq => (BinaryOp::StrictEq, 3),
                Punct::StrictNe => (BinaryOp::StrictNe, 3),
                Punct::Lt => (BinaryOp::Lt, 4),
                Punct::Gt => (BinaryOp::Gt, 4),
                Punct::Le => (BinaryOp::Le, 4),
                Punct::Ge => (BinaryOp::Ge, 4),
                Punct::Shl => (BinaryOp::Shl, 5),
                Punct::Shr => (BinaryOp::Shr, 5),
                Punct::UShr => (BinaryOp::UShr, 5),
                Punct::Plus => (BinaryOp::Add, 6),
                Punct::Minus => (BinaryOp::Sub, 6),
                Punct::Star => (BinaryOp::Mul, 7),
                Punct::Slash => (BinaryOp::Div, 7),
                Punct::Percent => (BinaryOp::Mod, 7),
                _ => return None,
            },
            TokenKind::Keyword(Keyword::Instanceof) => (BinaryOp::Instanceof, 4),
            TokenKind::Keyword(Keyword::In) if !no_in => (BinaryOp::In, 4),
            _ => return None,
        };
        Some(op)
    }

    /// Precedence climbing; chains at one level are built iteratively.
    fn binary(&mut self, min_level: u8, no_in: bool) -> PResult<Expr> {
        let mut left = self.unary()?;
        while let Some((op, level)) = self.binary_op_here(no_in) {
            if level < min_level {
                break;
            }
            self.advance();
            let right = if level < 7 {
                self.binary(level + 1, no_in)?
            } else {
                self.unary()?
            };
            let anchor = left.anchor.clone();
            left = self.expr(
                anchor,
                ExprKind::Binary {
                    op,
                    left: Box::new(left),
                    right: Box::new(right),
                },
            );
        }
        Ok(left)
    }

    fn unary(&mut self) -> PResult<Expr> {
        self.enter()?;
        let r = self.unary_inner();
        self.leave();
        r
    }

    fn unary_inner(&mut self) -> PResult<Expr> {
        let anchor = self.anchor_here();
        let op = match self.peek_kind() {
            TokenKind::Punct(Punct::Minus) => Some(UnaryOp::Neg),
            TokenKind::Punct(Punct::Plus) => Some(UnaryOp::Plus),
            TokenKind::Punct(Punct::Tilde) => Some(UnaryOp::BitNot),
            TokenKind::Punct(Punct::Bang) => Some(UnaryOp::Not),
            TokenKind::Keyword(Keyword::Typeof) => Some(UnaryOp::Typeof),
            TokenKind::Keyword(Keyword::Void) => Some(UnaryOp::Void),
            TokenKind::Keyword(Keyword::Delete) => Some(UnaryOp::Delete),
            _ => None,
        };
        if let Some(op) = op {
            self.advance();
            let argument = self.unary()?;
            return Ok(self.expr(
                anchor,
                ExprKind::Unary {
                    op,
                    argument: Box::new(argument),
                },
            ));
        }
        let update = match self.peek_kind() {
            TokenKind::Punct(Punct::Inc) => Some(UpdateOp::Inc),
            TokenKind::Punct(Punct::Dec) => Some(UpdateOp::Dec),
            _ => None,
        };
        if let Some(op) = update {
            self.advance();
            let argument = self.unary()?;
            Self::check_assign_target(&argument)?;
            return Ok(self.expr(
                anchor,
                ExprKind::Update {
                    op,
                    prefix: true,
                    argument: Box::new(argument),
                },
            ));
        }
        let e = self.postfix()?;
        Ok(e)
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let e = self.call_member()?;
        if self.peek().newline_before {
            return Ok(e);
        }
        let op = match self.peek_kind() {
            TokenKind::Punct(Punct::Inc) => UpdateOp::Inc,
            TokenKind::Punct(Punct::Dec) => UpdateOp::Dec,
            _ => return Ok(e),
        };
        Self::check_assign_target(&e)?;
        self.advance();
        let anchor = e.anchor.clone();
        Ok(self.expr(
            anchor,
            ExprKind::Update {
                op,
                prefix: false,
                argument: Box::new(e),
            },
        ))
    }

    fn arguments(&mut self) -> PResult<Vec<Expr>> {
        self.expect_punct(Punct::LParen)?;
        let mut args = Vec::new();
        if self.eat_punct(Punct::RParen) {
            return Ok(args);
        }
        loop {
            args.push(self.assignment(false)?);
            if self.eat_punct(Punct::RParen) {
                return Ok(args);
            }
            self.expect_punct(Punct::Comma)?;
            // Trailing comma.
            if self.eat_punct(Punct::RParen) {
                return Ok(args);
            }
        }
    }

    fn call_member(&mut self) -> PResult<Expr> {
        let mut e = if self.is_keyword(Keyword::New) {
            self.new_expression()?
        } else {
            self.primary()?
        };
        loop {
            e = match self.peek_kind() {
                TokenKind::Punct(Punct::Dot) => {
                    self.advance();
                    let property = self.property_name()?;
                    let anchor = e.anchor.clone();
                    self.expr(
                        anchor,
                        ExprKind::Member {
                            object: Box::new(e),
                            property,
                        },
                    )
                }
                TokenKind::Punct(Punct::LBracket) => {
                    self.advance();
                    let index = self.expression(false)?;
                    self.expect_punct(Punct::RBracket)?;
                    let anchor = e.anchor.clone();
                    self.expr(
                        anchor,
                        ExprKind::Index {
                            object: Box::new(e),
                            index: Box::new(index),
                        },
                    )
                }
                TokenKind::Punct(Punct::LParen) => {
                    let args = self.arguments()?;
                    let anchor = e.anchor.clone();
                    self.expr(
                        anchor,
                        ExprKind::Call {
                            callee: Box::new(e),
                            args,
                        },
                    )
                }
                _ => return Ok(e),
            };
        }
    }

    /// `new` MemberExpression Arguments?
    fn new_expression(&mut self) -> PResult<Expr> {
        self.enter()?;
        let anchor = self.anchor_here();
        self.advance();
        let mut callee = if self.is_keyword(Keyword::New) {
            self.new_expression()?
        } else {
            self.primary()?
        };
        loop {
            callee = match self.peek_kind() {
                TokenKind::Punct(Punct::Dot) => {
                    self.advance();
                    let property = self.property_name()?;
                    let a = callee.anchor.clone();
                    self.expr(
                        a,
                        ExprKind::Member {
                            object: Box::new(callee),
                            property,
                        },
                    )
                }
                TokenKind::Punct(Punct::LBracket) => {
                    self.advance();
                    let index = self.expression(false)?;
                    self.expect_punct(Punct::RBracket)?;
                    let a = callee.anchor.clone();
                    self.expr(
                        a,
                        ExprKind::Index {
                            object: Box::new(callee),
                            index: Box::new(index),
                        },
                    )
                }
                _ => break,
            };
        }
        let args = if self.is_punct(Punct::LParen) {
            self.arguments()?
        } else {
            Vec::new()
        };
        self.leave();
        Ok(self.expr(
            anchor,
            ExprKind::New {
                callee: Box::new(callee),
                args,
            },
        ))
    }

    fn primary(&mut self) -> PResult<Expr> {
        let anchor = self.anchor_here();
        let kind = match self.peek_kind().clone() {
            TokenKind::Ident(name) => {
                self.advance();
                if name == "arguments" {
                    if let Some(flag) = self.arguments_flags.last_mut() {
                        *flag = true;
                    }
                }
                ExprKind::Ident(Arc::from(name.as_str()))
            }
            TokenKind::Number(n) => {
                self.advance();
                ExprKind::Number(n)
            }
            TokenKind::Str(units) => {
                self.advance();
                ExprKind::Str(Arc::from(units.as_slice()))
            }
            TokenKind::Regex { pattern, flags } => {
                self.advance();
                ExprKind::Regex {
                    pattern: Arc::from(pattern.as_str()),
                    flags: Arc::from(flags.as_str()),
                }
            }
            TokenKind::Keyword(Keyword::This) => {
                self.advance();
                ExprKind::This
            }
            TokenKind::Keyword(Keyword::Null) => {
                self.advance();
                ExprKind::Null
            }
            TokenKind::Keyword(Keyword::True) => {
                self.advance();
                ExprKind::Bool(true)
            }
            TokenKind::Keyword(Keyword::False) => {
                self.advance();
                ExprKind::Bool(false)
            }
            TokenKind::Keyword(Keyword::Function) => ExprKind::Function(self.function(false)?),
            TokenKind::Punct(Punct::LParen) => {
                self.advance();
                let e = self.expression(false)?;
                self.expect_punct(Punct::RParen)?;
                return Ok(e);
            }
            TokenKind::Punct(Punct::LBracket) => self.array_literal()?,
            TokenKind::Punct(Punct::LBrace) => self.object_literal()?,
            _ => return Err(self.unexpected()),
        };
        Ok(self.expr(anchor, kind))
    }

    fn array_literal(&mut self) -> PResult<ExprKind> {
        self.advance();
        let mut items = Vec::new();
        loop {
            if self.eat_punct(Punct::RBracket) {
                return Ok(ExprKind::Array(items));
            }
            if self.eat_punct(Punct::Comma) {
                items.push(None);
                continue;
            }
            items.push(Some(self.assignment(false)?));
            if self.eat_punct(Punct::RBracket) {
                return Ok(ExprKind::Array(items));
            }
            self.expect_punct(Punct::Comma)?;
        }
    }

    fn object_literal(&mut self) -> PResult<ExprKind> {
        self.advance();
        let mut props = Vec::new();
        loop {
            if self.eat_punct(Punct::RBrace) {
                return Ok(ExprKind::Object(props));
            }
            let is_accessor = matches!(self.peek_kind(), TokenKind::Ident(n) if n == "get" || n == "set")
                && !matches!(
                    self.peek_nth_kind(1),
                    TokenKind::Punct(Punct::Colon | Punct::Comma | Punct::RBrace)
                );
            if is_accessor {
                return Err(self.error_here("getters and setters are not supported"));
            }
            let key = match self.peek_kind().clone() {
                TokenKind::Str(units) => {
                    self.advance();
                    PropKey::Str(Arc::from(String::from_utf16_lossy(&units).as_str()))
                }
                TokenKind::Number(n) => {
                    self.advance();
                    PropKey::Num(n)
                }
                _ => PropKey::Ident(self.property_name()?),
            };
            self.expect_punct(Punct::Colon)?;
            let value = self.assignment(false)?;
            props.push((key, value));
            if self.eat_punct(Punct::RBrace) {
                return Ok(ExprKind::Object(props));
            }
            self.expect_punct(Punct::Comma)?;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const SAMPLE: &str = "var a = null;
var b = c + 1;
var d = a.length;
var func = null;
a = \"Hello World\";
var e = new abc();
if (b < 5) {
    func = function(x) {
        return x
    };
}
d = func(6);
var f = Math.abs(d);
array[5] = f;
";

    #[test]
    fn trace_sample_has_ten_statements() {
        let p = parse(SAMPLE, "t.js").unwrap();
        assert_eq!(p.statements.len(), 10);
        let StmtKind::If { consequent, .. } = &p.statements[6].kind else {
            panic!("expected if")
        };
        let StmtKind::Block(body) = &consequent.kind else {
            panic!("expected block")
        };
        let StmtKind::Expr(Expr {
            kind: ExprKind::Assign { value, .. },
            ..
        }) = &body[0].kind
        else {
            panic!("expected assignment")
        };
        assert!(matches!(value.kind, ExprKind::Function(_)));
    }

    #[test]
    fn empty_program() {
        assert!(parse("", "e.js").unwrap().statements.is_empty());
    }

    #[test]
    fn dotted_declaration_target_is_rejected() {
        let err = parse("var ifrm.style = 1", "c.js").unwrap_err();
        assert_eq!(err.anchor.offset, 8);
        assert!(err.message.contains("`.`"), "{}", err.message);
    }

    #[test]
    fn asi_rules() {
        let p = parse("a = 1\nb = 2\nfunction f() { return\n5 }", "asi.js").unwrap();
        assert_eq!(p.statements.len(), 3);
        let StmtKind::Function(f) = &p.statements[2].kind else {
            panic!()
        };
        assert!(matches!(f.body[0].kind, StmtKind::Return(None)));
        // postfix ++ must sit on the same line
        let p = parse("a\n++b", "asi2.js").unwrap();
        assert_eq!(p.statements.len(), 2);
        assert!(parse("a = 1 b = 2", "bad.js").is_err());
    }

    #[test]
    fn unsupported_constructs_are_rejected() {
        for src in [
            "with (o) { x }",
            "l: for(;;) {}",
            "do { } while (0)",
            "var o = { get x() { return 1 } }",
            "for(;;) { break l }",
            "return 1",
            "class A {}",
        ] {
            assert!(parse(src, "u.js").is_err(), "accepted {src}");
        }
    }

    #[test]
    fn logical_chain_anchors_are_distinct() {
        let p = parse("if (a && b && c) {}", "l.js").unwrap();
        let anchors: Vec<_> = p
            .branch_points()
            .into_iter()
            .map(|(a, _)| a.offset)
            .collect();
        assert_eq!(anchors, vec![0, 11, 6]);
    }

    #[test]
    fn for_variants() {
        let p = parse(
            "for (var k in o) {} for (x of xs) {} for (i = 0; i < 3; i++) {} for (;;) { break; }",
            "f.js",
        )
        .unwrap();
        assert!(matches!(
            p.statements[0].kind,
            StmtKind::ForIn { of: false, .. }
        ));
        assert!(matches!(
            p.statements[1].kind,
            StmtKind::ForIn { of: true, .. }
        ));
        assert!(matches!(p.statements[2].kind, StmtKind::For { .. }));
        assert!(matches!(
            p.statements[3].kind,
            StmtKind::For { test: None, .. }
        ));
    }

    #[test]
    fn deep_nesting_is_a_syntax_error() {
        let src = format!("x = {}1{};", "(".repeat(5000), ")".repeat(5000));
        let err = parse(&src, "deep.js").unwrap_err();
        assert!(err.message.contains("nesting"));
    }

    #[test]
    fn arguments_usage_flag() {
        let p = parse(
            "function f() { return arguments.length } function g() { function h() { arguments } }",
            "a.js",
        )
        .unwrap();
        let StmtKind::Function(f) = &p.statements[0].kind else {
            panic!()
        };
        let StmtKind::Function(g) = &p.statements[1].kind else {
            panic!()
        };
        assert!(f.uses_arguments);
        assert!(!g.uses_arguments);
    }

    #[test]
    fn switch_and_try_shapes() {
        let p = parse(
            "switch (x) { case 1: a(); break; default: b(); case 2: c() } try { t() } catch (e) { u() } finally { v() }",
            "s.js",
        )
        .unwrap();
        let StmtKind::Switch { cases, .. } = &p.statements[0].kind else {
            panic!()
        };
        assert_eq!(cases.len(), 3);
        assert!(cases[1].test.is_none());
        let kinds: Vec<_> = p.branch_points().into_iter().map(|(_, k)| k).collect();
        assert_eq!(
            kinds,
            vec![
                BranchKind::SwitchCase,
                BranchKind::SwitchCase,
                BranchKind::TryCatch
            ]
        );
    }
}
