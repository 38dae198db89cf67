//! Statement execution.

use std::time::Instant;

use super::engine::{Abort, Completion, Interp, R};
use super::expr::Ref;
use crate::syntax::ast::{
    BinaryOp, CatchClause, Expr, ForInit, ForTarget, Stmt, StmtKind, SwitchCase, VarDeclarator,
};
use crate::syntax::SourceAnchor;
use crate::values::{FakedOrigin, ObjKind, Rule, TypeTag, Value};

impl Interp {
    pub fn exec_stmts(&mut self, stmts: &[Stmt]) -> R<Completion> {
        for s in stmts {
            let c = self.exec_stmt(s)?;
            if !matches!(c, Completion::Normal) {
                return Ok(c);
            }
        }
        Ok(Completion::Normal)
    }

    pub fn exec_stmt(&mut self, s: &Stmt) -> R<Completion> {
        self.tick()?;
        match &s.kind {
            StmtKind::Empty | StmtKind::Function(_) => Ok(Completion::Normal),
            StmtKind::Block(body) => self.exec_stmts(body),
            StmtKind::Var(_, decls) => {
                for d in decls {
                    self.exec_declarator(d)?;
                }
                Ok(Completion::Normal)
            }
            StmtKind::Expr(e) => {
                let v = self.eval_raw(e)?;
                self.completion_value = v;
                Ok(Completion::Normal)
            }
            StmtKind::If {
                test,
                consequent,
                alternate,
            } => {
                let t = self.eval_raw(test)?;
                let natural = self.to_boolean(&t);
                if self.branch(&s.anchor, natural) {
                    self.exec_stmt(consequent)
                } else if let Some(alt) = alternate {
                    self.exec_stmt(alt)
                } else {
                    Ok(Completion::Normal)
                }
            }
            StmtKind::While { test, body } => {
                let idx = self.enter_loop(&s.anchor);
                let r = self.run_loop(idx, &s.anchor, Some(test), None, body);
                self.exit_loop();
                r
            }
            StmtKind::For {
                init,
                test,
                update,
                body,
            } => {
                match init {
                    Some(ForInit::Var(_, decls)) => {
                        for d in decls {
                            self.exec_declarator(d)?;
                        }
                    }
                    Some(ForInit::Expr(e)) => {
                        self.eval_raw(e)?;
                    }
                    None => {}
                }
                let idx = self.enter_loop(&s.anchor);
                let r = self.run_loop(idx, &s.anchor, test.as_ref(), update.as_ref(), body);
                self.exit_loop();
                r
            }
            StmtKind::ForIn {
                target,
                object,
                body,
                of,
            } => {
                let obj = self.eval_expr(object)?;
                let items = if *of {
                    self.iteration_values(&obj, &s.anchor)?
                } else {
                    self.iteration_keys(&obj)
                };
                let idx = self.enter_loop(&s.anchor);
                let r = self.run_for_in(idx, target, items, body);
                self.exit_loop();
                r
            }
            StmtKind::Try {
                block,
                handler,
                finalizer,
            } => {
                let result = match handler {
                    Some(h) => self.exec_try_catch(&s.anchor, block, h),
                    None => self.exec_stmts(block),
                };
                if let Some(f) = finalizer {
                    if matches!(result, Err(Abort::Timeout)) {
                        return result;
                    }
                    let fc = self.exec_stmts(f)?;
                    if !matches!(fc, Completion::Normal) {
                        return Ok(fc);
                    }
                }
                result
            }
            StmtKind::Switch {
                discriminant,
                cases,
            } => self.exec_switch(discriminant, cases),
            StmtKind::Return(e) => {
                let v = match e {
                    Some(e) => self.eval_raw(e)?,
                    None => Value::Undefined,
                };
                Ok(Completion::Return(v))
            }
            StmtKind::Break => Ok(Completion::Break),
            StmtKind::Continue => Ok(Completion::Continue),
            StmtKind::Throw(e) => {
                let v = self.eval_expr(e)?;
                Err(Abort::Throw(v))
            }
        }
    }

    fn exec_declarator(&mut self, d: &VarDeclarator) -> R<()> {
        let value = match &d.init {
            Some(init) => self.eval_raw(init)?,
            None => match self.get_var(&d.name) {
                Some(Value::Undefined) | None => Value::Undefined,
                Some(_) => return Ok(()),
            },
        };
        let value = if self.heap.resolve(value.clone()).is_nullish() {
            let fake = self.fake(&d.name, FakedOrigin::Er2NullInit, &d.anchor);
            self.log(
                &d.anchor,
                d.name.to_string(),
                Rule::Er2,
                Some(TypeTag::FObj),
                None,
                None,
            );
            fake
        } else {
            value
        };
        if let Some(cur) = self.get_var(&d.name) {
            if self.heap.type_tag(&cur).is_faked() {
                let tag = self.heap.type_tag(&value);
                self.log(
                    &d.anchor,
                    d.name.to_string(),
                    Rule::RAssign,
                    Some(tag),
                    None,
                    None,
                );
            }
        }
        self.set_var(&d.name, value);
        Ok(())
    }

    /// `while` and `for` loops. Each entry into the loop gets its own time
    /// budget; exceeding it ends the loop as if the condition were false.
    fn run_loop(
        &mut self,
        idx: usize,
        anchor: &SourceAnchor,
        test: Option<&Expr>,
        update: Option<&Expr>,
        body: &Stmt,
    ) -> R<Completion> {
        let start = Instant::now();
        let budget = self.config.budgets.loop_budget;
        loop {
            let natural = match test {
                Some(t) => {
                    let v = self.eval_raw(t)?;
                    self.to_boolean(&v)
                }
                None => true,
            };
            if !self.branch(anchor, natural) {
                return Ok(Completion::Normal);
            }
            if start.elapsed() > budget {
                self.loop_cutoff(idx, anchor);
                return Ok(Completion::Normal);
            }
            self.count_iteration(idx);
            match self.exec_stmt(body)? {
                Completion::Break => return Ok(Completion::Normal),
                Completion::Return(v) => return Ok(Completion::Return(v)),
                Completion::Normal | Completion::Continue => {}
            }
            if let Some(u) = update {
                self.eval_raw(u)?;
            }
        }
    }

    fn iteration_keys(&mut self, obj: &Value) -> Vec<Value> {
        match obj {
            Value::Object(id) => {
                if matches!(self.heap.get(*id).kind, ObjKind::Faked(_)) {
                    return Vec::new();
                }
                self.own_keys(*id).iter().map(|k| Value::str(k)).collect()
            }
            Value::String(s) => (0..s.len()).map(|i| Value::str(&i.to_string())).collect(),
            _ => Vec::new(),
        }
    }

    fn iteration_values(&mut self, obj: &Value, anchor: &SourceAnchor) -> R<Vec<Value>> {
        match obj {
            Value::String(s) => Ok(s
                .flat()
                .iter()
                .map(|u| Value::String(crate::values::JsStr::from_units(vec![*u])))
                .collect()),
            Value::Object(id) => {
                let id = *id;
                let len = match &self.heap.get(id).kind {
                    ObjKind::Array(items) => return Ok(items.clone()),
                    ObjKind::FakedArray(fa) => fa.len.min(1 << 16),
                    _ => return Ok(Vec::new()),
                };
                let mut out = Vec::with_capacity(len as usize);
                for i in 0..len {
                    let key: std::rc::Rc<str> = std::rc::Rc::from(i.to_string());
                    out.push(self.read_prop(obj, &key, &|| format!("[{i}]"), anchor)?);
                }
                Ok(out)
            }
            _ => Ok(Vec::new()),
        }
    }

    fn run_for_in(
        &mut self,
        idx: usize,
        target: &ForTarget,
        items: Vec<Value>,
        body: &Stmt,
    ) -> R<Completion> {
        for item in items {
            self.tick()?;
            match target {
                ForTarget::Var(_, name) => self.set_var(name, item),
                ForTarget::Expr(e) => {
                    let r: Ref = self.eval_ref(e)?;
                    self.write_ref(&r, item, e, false)?;
                }
            }
            self.count_iteration(idx);
            match self.exec_stmt(body)? {
                Completion::Break => break,
                Completion::Return(v) => return Ok(Completion::Return(v)),
                Completion::Normal | Completion::Continue => {}
            }
        }
        Ok(Completion::Normal)
    }

    /// The branch of a try/catch is "did the catch arm run". Forcing it true
    /// skips the protected block and enters the handler with a faked
    /// exception; forcing it false runs the block and discards any throw.
    fn exec_try_catch(
        &mut self,
        anchor: &SourceAnchor,
        block: &[Stmt],
        handler: &CatchClause,
    ) -> R<Completion> {
        match self.forced(anchor) {
            Some(true) => {
                let name = handler.param.as_deref().unwrap_or("exception");
                let e = self.fake(name, FakedOrigin::Er1Lookup, anchor);
                self.run_catch(handler, e)
            }
            Some(false) => match self.run_protected(block) {
                Err(Abort::Throw(_)) => Ok(Completion::Normal),
                other => other,
            },
            None => match self.run_protected(block) {
                Ok(c) => {
                    self.record(anchor, false);
                    Ok(c)
                }
                Err(Abort::Throw(v)) => {
                    self.record(anchor, true);
                    self.run_catch(handler, v)
                }
                Err(Abort::Timeout) => Err(Abort::Timeout),
            },
        }
    }

    fn run_protected(&mut self, block: &[Stmt]) -> R<Completion> {
        self.try_depth += 1;
        let r = self.exec_stmts(block);
        self.try_depth -= 1;
        r
    }

    fn run_catch(&mut self, handler: &CatchClause, exception: Value) -> R<Completion> {
        let scope = self.heap.new_scope(Some(self.scope), None);
        if let Some(p) = &handler.param {
            self.bind_in(scope, p, exception);
        }
        let saved = self.scope;
        self.scope = scope;
        self.catch_depth += 1;
        let r = self.exec_stmts(&handler.body);
        self.catch_depth -= 1;
        self.scope = saved;
        r
    }

    fn exec_switch(&mut self, discriminant: &Expr, cases: &[SwitchCase]) -> R<Completion> {
        let d = self.eval_raw(discriminant)?;
        let mut matched = None;
        for (i, case) in cases.iter().enumerate() {
            let Some(test) = &case.test else { continue };
            let t = self.eval_raw(test)?;
            let eq = self.apply_binary(
                BinaryOp::StrictEq,
                d.clone(),
                t,
                discriminant,
                test,
                &case.anchor,
            )?;
            let natural = matches!(eq, Value::Bool(true));
            if self.branch(&case.anchor, natural) {
                matched = Some(i);
                break;
            }
        }
        let start = match matched.or_else(|| cases.iter().position(|c| c.test.is_none())) {
            Some(i) => i,
            None => return Ok(Completion::Normal),
        };
        for case in &cases[start..] {
            match self.exec_stmts(&case.body)? {
                Completion::Normal => {}
                Completion::Break => return Ok(Completion::Normal),
                other => return Ok(other),
            }
        }
        Ok(Completion::Normal)
    }
}
