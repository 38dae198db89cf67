//! Calls, construction, builtins, faked functions and dynamic code.

use std::sync::Arc;

use super::engine::{Completion, Frame, Interp, R};
use super::{CbTarget, DynamicOrigin, EventKind};
use crate::hostenv::{self, builtin, CallSite};
use crate::syntax::ast::{Expr, ExprKind, StmtKind};
use crate::syntax::SourceAnchor;
use crate::values::retype::callable_rule;
use crate::values::{Callable, FakedOrigin, ObjId, ObjKind, Rule, TypeTag, Value};

impl Interp {
    pub fn eval_call(
        &mut self,
        e: &Expr,
        callee: &Expr,
        args: &[Expr],
        construct: bool,
    ) -> R<Value> {
        let (f_raw, this) = match &callee.kind {
            ExprKind::Member { .. } | ExprKind::Index { .. } => {
                let r = self.eval_ref(callee)?;
                let f = self.read_ref(&r, callee)?;
                let this = match r {
                    super::expr::Ref::Prop { base, .. } => base,
                    _ => Value::Undefined,
                };
                (f, this)
            }
            _ => (self.eval_raw(callee)?, Value::Undefined),
        };
        let mut argv = Vec::with_capacity(args.len());
        for a in args {
            argv.push(self.eval_raw(a)?);
        }
        if !construct {
            if let ExprKind::Ident(name) = &callee.kind {
                if &**name == "eval"
                    && matches!(self.heap.resolve(f_raw.clone()), Value::Object(id) if id == self.realm.eval_fn)
                {
                    let code = argv.into_iter().next().unwrap_or(Value::Undefined);
                    return self.eval_code(code, &e.anchor, true);
                }
            }
        }
        if self.heap.type_tag(&f_raw) == TypeTag::FObj {
            self.retype_cell(
                &f_raw,
                TypeTag::FFun,
                callable_rule(construct),
                &e.anchor,
                &callee.display_path(),
            );
        }
        match self.heap.resolve(f_raw) {
            Value::Object(id) if self.heap.is_callable(id) => {
                self.invoke(id, this, argv, construct, &e.anchor, Some(args))
            }
            _ => {
                let what = if construct {
                    "a constructor"
                } else {
                    "a function"
                };
                let msg = format!("{} is not {what}", callee.display_path());
                self.engine_error("TypeError", &msg, &e.anchor)
            }
        }
    }

    /// Calls `f` from host code.
    pub fn call_value(
        &mut self,
        f: Value,
        this: Value,
        args: Vec<Value>,
        anchor: &SourceAnchor,
        label: &str,
    ) -> R<Value> {
        match self.heap.resolve(f) {
            Value::Object(id) if self.heap.is_callable(id) => {
                self.invoke(id, this, args, false, anchor, None)
            }
            _ => self.engine_error(
                "TypeError",
                &format!("{label}: value is not a function"),
                anchor,
            ),
        }
    }

    fn invoke(
        &mut self,
        id: ObjId,
        this: Value,
        args: Vec<Value>,
        construct: bool,
        anchor: &SourceAnchor,
        arg_exprs: Option<&[Expr]>,
    ) -> R<Value> {
        self.tick()?;
        let callable = match &self.heap.get(id).kind {
            ObjKind::Function(c) => c.clone(),
            _ => return self.faked_call(id, args, anchor),
        };
        match callable {
            Callable::User { .. } => {
                if construct {
                    let proto = match self.get_prop(id, "prototype") {
                        Some(Value::Object(p)) => p,
                        _ => self.realm.object_proto,
                    };
                    let obj = Value::Object(self.alloc(ObjKind::Ordinary, Some(proto)));
                    let r = self.call_user(id, obj.clone(), args, anchor)?;
                    let r = self.heap.resolve(r);
                    Ok(if matches!(r, Value::Object(_)) {
                        r
                    } else {
                        obj
                    })
                } else {
                    self.call_user(id, this, args, anchor)
                }
            }
            Callable::Builtin(i) => self.call_builtin(i, this, args, construct, anchor, arg_exprs),
            Callable::Bound {
                target,
                this: bound_this,
                args: bound_args,
            } => {
                let mut all = bound_args;
                all.extend(args);
                self.invoke(target, bound_this, all, construct, anchor, None)
            }
        }
    }

    fn call_builtin(
        &mut self,
        index: u16,
        this: Value,
        args: Vec<Value>,
        construct: bool,
        anchor: &SourceAnchor,
        arg_exprs: Option<&[Expr]>,
    ) -> R<Value> {
        let b = builtin(index);
        let mut faked = 0u64;
        for (pos, a) in args.iter().enumerate() {
            if self.heap.type_tag(a) != TypeTag::FObj {
                continue;
            }
            if pos < 64 {
                faked |= 1 << pos;
            }
            let expected = b.params.get(pos).copied().unwrap_or(b.rest);
            let Some(tag) = expected else { continue };
            let tag = if tag == TypeTag::Function {
                TypeTag::FFun
            } else {
                tag
            };
            let subject = match arg_exprs.and_then(|xs| xs.get(pos)) {
                Some(x) => x.display_path(),
                None => format!("{}#{pos}", b.name),
            };
            self.retype_cell(a, tag, Rule::RCall2, anchor, &subject);
        }
        let argv: Vec<Value> = args.into_iter().map(|a| self.heap.resolve(a)).collect();
        let this = self.heap.resolve(this);
        (b.func)(
            self,
            &this,
            &argv,
            &CallSite {
                anchor,
                construct,
                faked,
            },
        )
    }

    /// A faked function accepts anything and returns a fresh faked object.
    /// Function arguments are queued as callbacks; string arguments that
    /// parse as code are reported as new code.
    fn faked_call(&mut self, id: ObjId, args: Vec<Value>, anchor: &SourceAnchor) -> R<Value> {
        let name = self.function_label(id);
        for a in args {
            match self.heap.resolve(a) {
                Value::Object(fid) if matches!(self.heap.get(fid).kind, ObjKind::Function(_)) => {
                    let label = self.function_label(fid);
                    self.emit(
                        EventKind::CallbackRegistered,
                        &format!("{name} <- {label}"),
                        anchor,
                    );
                    self.enqueue_callback(&name, anchor, CbTarget::Func(fid));
                }
                Value::String(s) if !s.is_empty() => {
                    self.emit_js(EventKind::FakedFunctionStringArg, &s, anchor);
                    let text = s.to_std_string();
                    if hostenv::is_javascript(&text) {
                        let unit = self.next_dynamic_name(anchor);
                        self.add_new_js(unit, text, DynamicOrigin::FakedFunctionArg, anchor);
                    }
                }
                _ => {}
            }
        }
        Ok(self.fake(&format!("{name}()"), FakedOrigin::FfunReturn, anchor))
    }

    fn recursion_cutoff(&mut self, label: &str, anchor: &SourceAnchor) -> Value {
        self.recursion_cutoffs += 1;
        self.log(
            anchor,
            label.to_string(),
            Rule::RecursionCap,
            Some(TypeTag::FObj),
            None,
            None,
        );
        self.fake(label, FakedOrigin::FfunReturn, anchor)
    }

    fn call_user(
        &mut self,
        id: ObjId,
        this: Value,
        args: Vec<Value>,
        anchor: &SourceAnchor,
    ) -> R<Value> {
        let ObjKind::Function(Callable::User {
            func,
            env,
            unit,
            source,
        }) = &self.heap.get(id).kind
        else {
            return Ok(Value::Undefined);
        };
        let (func, env, unit, source) = (func.clone(), *env, unit.clone(), source.clone());
        let key = Arc::as_ptr(&func);
        if self.capped.contains(&key) || self.call_depth >= self.config.budgets.recursion_cap {
            self.capped.insert(key);
            let label = self.function_label(id);
            return Ok(self.recursion_cutoff(&label, anchor));
        }
        let scope = self.heap.new_scope(Some(env), None);
        if func.uses_arguments {
            let arguments = self.new_array(args.clone());
            self.bind_in(scope, "arguments", arguments);
        }
        for (i, p) in func.params.iter().enumerate() {
            self.bind_in(scope, p, args.get(i).cloned().unwrap_or(Value::Undefined));
        }
        let this = match self.heap.resolve(this) {
            Value::Undefined | Value::Null => Value::Object(self.realm.window),
            v => v,
        };
        self.frames.push(Frame {
            this,
            var_scope: scope,
            unit,
            source,
        });
        let saved = self.scope;
        self.scope = scope;
        self.call_depth += 1;
        self.hoist_into(&func.body, scope, Some(&func));
        let r = self.exec_stmts(&func.body);
        self.call_depth -= 1;
        self.scope = saved;
        self.frames.pop();
        match r? {
            Completion::Return(v) => Ok(v),
            _ => Ok(Value::Undefined),
        }
    }

    /// `eval`. A direct call runs in the caller's scope, an indirect one in
    /// the global scope. The text is also reported as a new code unit.
    pub fn eval_code(&mut self, code: Value, anchor: &SourceAnchor, direct: bool) -> R<Value> {
        let Value::String(s) = self.heap.resolve(code.clone()) else {
            return Ok(code);
        };
        self.emit_js(EventKind::EvalString, &s, anchor);
        let text = s.to_std_string();
        let unit = self.next_dynamic_name(anchor);
        let program = match crate::syntax::parse(&text, &unit) {
            Ok(p) => p,
            Err(e) => return self.engine_error("SyntaxError", &e.message, anchor),
        };
        self.add_new_js(unit, text, DynamicOrigin::Eval, anchor);
        if self.call_depth >= self.config.budgets.recursion_cap {
            return Ok(self.recursion_cutoff("eval", anchor));
        }
        let saved = self.scope;
        let (this, var_scope) = match (direct, self.frames.last()) {
            (true, Some(f)) => (f.this.clone(), f.var_scope),
            _ => {
                self.scope = self.global;
                (Value::Object(self.realm.window), self.global)
            }
        };
        self.frames.push(Frame {
            this,
            var_scope,
            unit: program.unit_name().clone(),
            source: program.source.clone(),
        });
        self.call_depth += 1;
        self.completion_value = Value::Undefined;
        self.hoist_into(&program.statements, var_scope, None);
        let r = self.exec_stmts(&program.statements);
        self.call_depth -= 1;
        self.frames.pop();
        self.scope = saved;
        match r {
            Ok(Completion::Return(v)) => Ok(v),
            Ok(_) => Ok(std::mem::replace(
                &mut self.completion_value,
                Value::Undefined,
            )),
            Err(e) => Err(e),
        }
    }

    /// `Function(p1, ..., body)`: compiled in the global scope.
    pub fn function_ctor(&mut self, args: &[Value], anchor: &SourceAnchor) -> R<Value> {
        let mut parts = Vec::with_capacity(args.len());
        for a in args {
            parts.push(self.to_string(a, anchor)?.to_std_string());
        }
        let body = parts.pop().unwrap_or_default();
        let params = parts.join(",");
        let text = format!("(function anonymous({params}\n) {{\n{body}\n}})");
        if !body.is_empty() {
            self.emit(EventKind::EvalString, &body, anchor);
        }
        let unit = self.next_dynamic_name(anchor);
        let program = match crate::syntax::parse(&text, &unit) {
            Ok(p) => p,
            Err(e) => return self.engine_error("SyntaxError", &e.message, anchor),
        };
        self.add_new_js(unit, body, DynamicOrigin::FunctionConstructor, anchor);
        let Some(StmtKind::Expr(Expr {
            kind: ExprKind::Function(f),
            ..
        })) = program.statements.first().map(|s| &s.kind)
        else {
            return self.engine_error("SyntaxError", "malformed function body", anchor);
        };
        let f: Arc<crate::syntax::ast::Function> = f.clone();
        self.frames.push(Frame {
            this: Value::Object(self.realm.window),
            var_scope: self.global,
            unit: program.unit_name().clone(),
            source: program.source.clone(),
        });
        let closure = self.make_closure(&f, self.global);
        self.frames.pop();
        Ok(closure)
    }
}
