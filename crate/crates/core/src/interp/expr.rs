//! Expression evaluation.
//!
//! `eval_raw` may return a faked cell; consumers that need the concrete value
//! resolve it through the heap. Keeping the cell lets operators retype it in
//! place so every alias sees the change.

use std::rc::Rc;
use std::sync::Arc;

use super::engine::{Interp, R};
use super::ops::Hint;
use crate::syntax::ast::{BinaryOp, Expr, ExprKind, LogicalOp, PropKey, UnaryOp, UpdateOp};
use crate::syntax::SourceAnchor;
use crate::values::number::{array_index, number_to_string, to_int32, to_uint32};
use crate::values::retype::{
    binary_rule, faked_array_len, grown_array_len, unary_rule, update_rule,
};
use crate::values::{FakedForm, FakedOrigin, ObjKind, Rule, TypeTag, Value};

/// An assignable location.
#[derive(Debug, Clone)]
pub(crate) enum Ref {
    Var(Arc<str>),
    Prop {
        base: Value,
        key: Rc<str>,
        numeric: bool,
    },
    Invalid,
}

fn is_reference(e: &Expr) -> bool {
    match &e.kind {
        ExprKind::Ident(name) => &**name != "undefined",
        ExprKind::Member { .. } | ExprKind::Index { .. } => true,
        _ => false,
    }
}

impl Interp {
    pub fn eval_expr(&mut self, e: &Expr) -> R<Value> {
        let v = self.eval_raw(e)?;
        Ok(self.heap.resolve(v))
    }

    pub fn eval_raw(&mut self, e: &Expr) -> R<Value> {
        match &e.kind {
            ExprKind::Number(n) => Ok(Value::Number(*n)),
            ExprKind::Str(s) => Ok(Value::String(crate::values::JsStr::from_units(s.to_vec()))),
            ExprKind::Bool(b) => Ok(Value::Bool(*b)),
            ExprKind::Null => Ok(Value::Null),
            ExprKind::Regex { pattern, flags } => Ok(self.new_regexp(pattern, flags)),
            ExprKind::Ident(name) => Ok(self.read_ident(name, &e.anchor)),
            ExprKind::This => Ok(self
                .frames
                .last()
                .map(|f| f.this.clone())
                .unwrap_or(Value::Undefined)),
            ExprKind::Member { .. } | ExprKind::Index { .. } => {
                let r = self.eval_ref(e)?;
                self.read_ref(&r, e)
            }
            ExprKind::Unary { op, argument } => self.eval_unary(*op, argument, &e.anchor),
            ExprKind::Update {
                op,
                prefix,
                argument,
            } => self.eval_update(*op, *prefix, argument, &e.anchor),
            ExprKind::Binary { .. } => self.eval_binary_chain(e),
            ExprKind::Logical { op, left, right } => {
                let l = self.eval_raw(left)?;
                let natural = self.to_boolean(&l);
                let dir = self.branch(&e.anchor, natural);
                match (op, dir) {
                    (LogicalOp::And, true) => self.eval_raw(right),
                    (LogicalOp::And, false) => Ok(if natural { Value::Bool(false) } else { l }),
                    (LogicalOp::Or, true) => Ok(if natural { l } else { Value::Bool(true) }),
                    (LogicalOp::Or, false) => self.eval_raw(right),
                }
            }
            ExprKind::Assign { op, target, value } => {
                let r = self.eval_ref(target)?;
                match op {
                    None => {
                        let v = self.eval_raw(value)?;
                        self.write_ref(&r, v.clone(), target, true)?;
                        Ok(v)
                    }
                    Some(op) => {
                        let cur = self.read_ref(&r, target)?;
                        let rhs = self.eval_raw(value)?;
                        let v = self.apply_binary(*op, cur, rhs, target, value, &e.anchor)?;
                        self.write_ref(&r, v.clone(), target, false)?;
                        Ok(v)
                    }
                }
            }
            ExprKind::Conditional {
                test,
                consequent,
                alternate,
            } => {
                let t = self.eval_raw(test)?;
                let natural = self.to_boolean(&t);
                if self.config.ternary_as_branch {
                    if self.branch(&e.anchor, natural) {
                        self.eval_raw(consequent)
                    } else {
                        self.eval_raw(alternate)
                    }
                } else {
                    let a = self.eval_raw(consequent)?;
                    let b = self.eval_raw(alternate)?;
                    Ok(if natural { a } else { b })
                }
            }
            ExprKind::Call { callee, args } => self.eval_call(e, callee, args, false),
            ExprKind::New { callee, args } => self.eval_call(e, callee, args, true),
            ExprKind::Object(props) => {
                let id = self.new_object();
                for (key, value) in props {
                    let v = self.eval_raw(value)?;
                    let key: Rc<str> = match key {
                        PropKey::Ident(k) | PropKey::Str(k) => Rc::from(&**k),
                        PropKey::Num(n) => Rc::from(number_to_string(*n)),
                    };
                    self.put(id, &key, v, &value.anchor)?;
                }
                Ok(Value::Object(id))
            }
            ExprKind::Array(items) => {
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    out.push(match item {
                        Some(x) => self.eval_raw(x)?,
                        None => Value::Undefined,
                    });
                }
                Ok(self.new_array(out))
            }
            ExprKind::Function(f) => match &f.name {
                Some(name) => {
                    let scope = self.heap.new_scope(Some(self.scope), None);
                    let closure = self.make_closure(f, scope);
                    self.bind_in(scope, name, closure.clone());
                    Ok(closure)
                }
                None => Ok(self.make_closure(f, self.scope)),
            },
            ExprKind::Sequence(items) => {
                let mut last = Value::Undefined;
                for x in items {
                    last = self.eval_raw(x)?;
                }
                Ok(last)
            }
        }
    }

    pub fn new_regexp(&mut self, source: &str, flags: &str) -> Value {
        let proto = self.realm.regexp_proto;
        let id = self.alloc(
            ObjKind::RegExp {
                source: Rc::from(source),
                flags: Rc::from(flags),
            },
            Some(proto),
        );
        self.put_plain(id, "lastIndex", Value::Number(0.0));
        self.put_plain(id, "source", Value::str(source));
        self.put_plain(id, "global", Value::Bool(flags.contains('g')));
        Value::Object(id)
    }

    // ----- references -----

    pub fn eval_ref(&mut self, e: &Expr) -> R<Ref> {
        match &e.kind {
            ExprKind::Ident(name) => Ok(Ref::Var(name.clone())),
            ExprKind::Member { object, property } => {
                let base = self.eval_base(object, &e.anchor)?;
                Ok(Ref::Prop {
                    base,
                    key: Rc::from(&**property),
                    numeric: false,
                })
            }
            ExprKind::Index { object, index } => {
                let base = self.eval_base(object, &e.anchor)?;
                let idx_raw = self.eval_raw(index)?;
                if self.heap.type_tag(&idx_raw) == TypeTag::FObj {
                    if let Value::Object(id) = idx_raw {
                        self.heap.retype(id, TypeTag::Number, 0.0);
                        self.log(
                            &e.anchor,
                            index.display_path(),
                            Rule::RIndex2,
                            Some(TypeTag::Number),
                            None,
                            None,
                        );
                    }
                }
                let idx = self.heap.resolve(idx_raw);
                let numeric = matches!(idx, Value::Number(_));
                let key = self.to_key(&idx, &e.anchor)?;
                if let Value::Object(bid) = base {
                    if let Some(i) = array_index(&key) {
                        let i = i as u64;
                        match &self.heap.get(bid).kind {
                            ObjKind::Faked(f) if matches!(f.form, FakedForm::Obj) => {
                                let len = faked_array_len(i);
                                self.heap.retype_to_array(bid, len);
                                self.heap.get_mut(bid).proto = Some(self.realm.array_proto);
                                self.log(
                                    &e.anchor,
                                    object.display_path(),
                                    Rule::RIndex1,
                                    Some(TypeTag::Obj),
                                    Some(len),
                                    None,
                                );
                            }
                            ObjKind::FakedArray(fa) if i >= fa.len => {
                                let len = grown_array_len(fa.len, i);
                                if let ObjKind::FakedArray(fa) = &mut self.heap.get_mut(bid).kind {
                                    fa.len = len;
                                }
                                self.log(
                                    &e.anchor,
                                    object.display_path(),
                                    Rule::RIndex1,
                                    Some(TypeTag::Obj),
                                    Some(len),
                                    Some("grown".into()),
                                );
                            }
                            _ => {}
                        }
                    }
                }
                Ok(Ref::Prop { base, key, numeric })
            }
            _ => {
                self.eval_raw(e)?;
                self.engine_error(
                    "ReferenceError",
                    "Invalid left-hand side in assignment",
                    &e.anchor,
                )?;
                Ok(Ref::Invalid)
            }
        }
    }

    /// Evaluates the object of a member access. A nullish base that is itself
    /// a reference is replaced by a faked object.
    fn eval_base(&mut self, object: &Expr, anchor: &SourceAnchor) -> R<Value> {
        if !is_reference(object) {
            let v = self.eval_raw(object)?;
            return Ok(self.heap.resolve(v));
        }
        let r = self.eval_ref(object)?;
        let v = self.read_ref(&r, object)?;
        let v = self.heap.resolve(v);
        if !v.is_nullish() {
            return Ok(v);
        }
        let name = object.display_path();
        let fake = self.fake(&name, FakedOrigin::Er2NullInit, anchor);
        self.write_ref(&r, fake.clone(), object, false)?;
        self.log(anchor, name, Rule::Er2, Some(TypeTag::FObj), None, None);
        Ok(fake)
    }

    pub fn read_ref(&mut self, r: &Ref, e: &Expr) -> R<Value> {
        match r {
            Ref::Var(name) => Ok(self.read_ident(name, &e.anchor)),
            Ref::Prop { base, key, .. } => {
                self.read_prop(base, key, &|| e.display_path(), &e.anchor)
            }
            Ref::Invalid => Ok(Value::Undefined),
        }
    }

    pub fn write_ref(&mut self, r: &Ref, value: Value, target: &Expr, log_assign: bool) -> R<()> {
        match r {
            Ref::Var(name) => {
                if log_assign {
                    if let Some(cur) = self.get_var(name) {
                        if self.heap.type_tag(&cur).is_faked() {
                            let tag = self.heap.type_tag(&value);
                            self.log(
                                &target.anchor,
                                name.to_string(),
                                Rule::RAssign,
                                Some(tag),
                                None,
                                None,
                            );
                        }
                    }
                }
                self.set_var(name, value);
                Ok(())
            }
            Ref::Prop { base, key, numeric } => match base {
                Value::Object(id) => {
                    let id = *id;
                    if log_assign && self.slot_holds_fake(id, key) {
                        let tag = self.heap.type_tag(&value);
                        self.log(
                            &target.anchor,
                            target.display_path(),
                            Rule::RAssign,
                            Some(tag),
                            None,
                            None,
                        );
                    }
                    if *numeric {
                        let v = self.heap.resolve(value.clone());
                        self.note_indexed_write(&v);
                    }
                    self.put(id, key, value, &target.anchor)
                }
                Value::Undefined | Value::Null => {
                    let msg = format!("Cannot set property '{key}' of {}", self.describe(base));
                    self.engine_error("TypeError", &msg, &target.anchor)?;
                    Ok(())
                }
                _ => Ok(()),
            },
            Ref::Invalid => Ok(()),
        }
    }

    // ----- operators -----

    /// Left-leaning chains such as long string concatenations are walked
    /// iteratively so their depth does not turn into native recursion.
    fn eval_binary_chain(&mut self, e: &Expr) -> R<Value> {
        let mut spine = Vec::new();
        let mut cur = e;
        while let ExprKind::Binary { op, left, right } = &cur.kind {
            spine.push((*op, &**left, &**right, &cur.anchor));
            cur = left;
        }
        let mut acc = self.eval_raw(cur)?;
        for (op, left, right, anchor) in spine.into_iter().rev() {
            let r = self.eval_raw(right)?;
            acc = self.apply_binary(op, acc, r, left, right, anchor)?;
        }
        Ok(acc)
    }

    /// Applies the operator rules to faked operands, then computes `l op r`.
    pub fn apply_binary(
        &mut self,
        op: BinaryOp,
        l_raw: Value,
        r_raw: Value,
        l_expr: &Expr,
        r_expr: &Expr,
        anchor: &SourceAnchor,
    ) -> R<Value> {
        let lt = self.heap.type_tag(&l_raw);
        let rt = self.heap.type_tag(&r_raw);
        let mut divisor_faked = false;
        if let Some(rr) = binary_rule(op, lt, rt) {
            if let Some(t) = rr.lhs {
                self.retype_cell(&l_raw, t, rr.rule, anchor, &l_expr.display_path());
            }
            if let Some(t) = rr.rhs {
                self.retype_cell(&r_raw, t, rr.rule, anchor, &r_expr.display_path());
            }
        }
        if let Value::Object(id) = &r_raw {
            divisor_faked = matches!(self.heap.get(*id).kind, ObjKind::Faked(_));
        }
        let a = self.heap.resolve(l_raw);
        let mut b = self.heap.resolve(r_raw);
        if divisor_faked
            && matches!(op, BinaryOp::Div | BinaryOp::Mod)
            && matches!(b, Value::Number(n) if n == 0.0)
        {
            self.log(
                anchor,
                r_expr.display_path(),
                Rule::DivByZero,
                Some(TypeTag::Number),
                None,
                Some("divisor 0 -> 1".into()),
            );
            b = Value::Number(1.0);
        }
        self.binary_values(op, &a, &b, anchor)
    }

    pub fn binary_values(
        &mut self,
        op: BinaryOp,
        a: &Value,
        b: &Value,
        anchor: &SourceAnchor,
    ) -> R<Value> {
        use BinaryOp::*;
        Ok(match op {
            Add => {
                if let (Value::Number(x), Value::Number(y)) = (a, b) {
                    return Ok(Value::Number(x + y));
                }
                let pa = self.to_primitive(a, Hint::Default, anchor)?;
                let pb = self.to_primitive(b, Hint::Default, anchor)?;
                if matches!(pa, Value::String(_)) || matches!(pb, Value::String(_)) {
                    let sa = self.to_string(&pa, anchor)?;
                    let sb = self.to_string(&pb, anchor)?;
                    return self.concat(&sa, &sb, anchor);
                }
                Value::Number(
                    super::ops::primitive_to_number(&pa) + super::ops::primitive_to_number(&pb),
                )
            }
            Sub => Value::Number(self.to_number(a, anchor)? - self.to_number(b, anchor)?),
            Mul => Value::Number(self.to_number(a, anchor)? * self.to_number(b, anchor)?),
            Div => Value::Number(self.to_number(a, anchor)? / self.to_number(b, anchor)?),
            Mod => Value::Number(self.to_number(a, anchor)? % self.to_number(b, anchor)?),
            Shl => {
                let x = to_int32(self.to_number(a, anchor)?);
                let y = to_uint32(self.to_number(b, anchor)?) & 31;
                Value::Number(x.wrapping_shl(y) as f64)
            }
            Shr => {
                let x = to_int32(self.to_number(a, anchor)?);
                let y = to_uint32(self.to_number(b, anchor)?) & 31;
                Value::Number((x >> y) as f64)
            }
            UShr => {
                let x = to_uint32(self.to_number(a, anchor)?);
                let y = to_uint32(self.to_number(b, anchor)?) & 31;
                Value::Number((x >> y) as f64)
            }
            BitAnd => Value::Number(
                (to_int32(self.to_number(a, anchor)?) & to_int32(self.to_number(b, anchor)?))
                    as f64,
            ),
            BitOr => Value::Number(
                (to_int32(self.to_number(a, anchor)?) | to_int32(self.to_number(b, anchor)?))
                    as f64,
            ),
            BitXor => Value::Number(
                (to_int32(self.to_number(a, anchor)?) ^ to_int32(self.to_number(b, anchor)?))
                    as f64,
            ),
            Lt => Value::Bool(self.less_than(a, b, anchor)?.unwrap_or(false)),
            Gt => Value::Bool(self.less_than(b, a, anchor)?.unwrap_or(false)),
            Le => Value::Bool(self.less_than(b, a, anchor)?.map(|r| !r).unwrap_or(false)),
            Ge => Value::Bool(self.less_than(a, b, anchor)?.map(|r| !r).unwrap_or(false)),
            Eq => Value::Bool(self.loose_equals(a, b, anchor)?),
            Ne => Value::Bool(!self.loose_equals(a, b, anchor)?),
            StrictEq => Value::Bool(a.strict_equals(b)),
            StrictNe => Value::Bool(!a.strict_equals(b)),
            In => match b {
                Value::Object(id) => {
                    let key = self.to_key(a, anchor)?;
                    Value::Bool(self.has_property(*id, &key))
                }
                _ => {
                    return self.engine_error(
                        "TypeError",
                        "Cannot use 'in' operator to search for a key in a primitive",
                        anchor,
                    )
                }
            },
            Instanceof => self.instance_of(a, b, anchor)?,
        })
    }

    fn instance_of(&mut self, a: &Value, b: &Value, anchor: &SourceAnchor) -> R<Value> {
        let Value::Object(mut ctor) = b else {
            return self.engine_error(
                "TypeError",
                "Right-hand side of 'instanceof' is not callable",
                anchor,
            );
        };
        if !self.heap.is_callable(ctor) {
            return self.engine_error(
                "TypeError",
                "Right-hand side of 'instanceof' is not callable",
                anchor,
            );
        }
        while let ObjKind::Function(crate::values::Callable::Bound { target, .. }) =
            &self.heap.get(ctor).kind
        {
            ctor = *target;
        }
        let Value::Object(obj) = a else {
            return Ok(Value::Bool(false));
        };
        let Some(Value::Object(proto)) = self.get_prop(ctor, "prototype") else {
            return Ok(Value::Bool(false));
        };
        let mut cur = self.heap.get(*obj).proto;
        let mut guard = 0;
        while let Some(c) = cur {
            if c == proto {
                return Ok(Value::Bool(true));
            }
            cur = self.heap.get(c).proto;
            guard += 1;
            if guard > 10_000 {
                break;
            }
        }
        Ok(Value::Bool(false))
    }

    fn eval_unary(&mut self, op: UnaryOp, argument: &Expr, anchor: &SourceAnchor) -> R<Value> {
        match op {
            UnaryOp::Typeof => {
                if let ExprKind::Ident(name) = &argument.kind {
                    if self.find_binding(name).is_none() {
                        return Ok(Value::str("undefined"));
                    }
                }
                let v = self.eval_raw(argument)?;
                Ok(Value::str(self.typeof_str(&v)))
            }
            UnaryOp::Void => {
                self.eval_raw(argument)?;
                Ok(Value::Undefined)
            }
            UnaryOp::Delete => {
                if matches!(
                    argument.kind,
                    ExprKind::Member { .. } | ExprKind::Index { .. }
                ) {
                    if let Ref::Prop {
                        base: Value::Object(id),
                        key,
                        ..
                    } = self.eval_ref(argument)?
                    {
                        return Ok(Value::Bool(self.delete_prop(id, &key)));
                    }
                } else {
                    self.eval_raw(argument)?;
                }
                Ok(Value::Bool(true))
            }
            _ => {
                let raw = self.eval_raw(argument)?;
                if self.heap.type_tag(&raw) == TypeTag::FObj {
                    if let Some(tag) = unary_rule(op) {
                        self.retype_cell(
                            &raw,
                            tag,
                            Rule::RUnaryOperator,
                            anchor,
                            &argument.display_path(),
                        );
                    }
                }
                let v = self.heap.resolve(raw);
                Ok(match op {
                    UnaryOp::Neg => Value::Number(-self.to_number(&v, anchor)?),
                    UnaryOp::Plus => Value::Number(self.to_number(&v, anchor)?),
                    UnaryOp::BitNot => Value::Number(!to_int32(self.to_number(&v, anchor)?) as f64),
                    _ => Value::Bool(!self.to_boolean(&v)),
                })
            }
        }
    }

    fn eval_update(
        &mut self,
        op: UpdateOp,
        prefix: bool,
        argument: &Expr,
        anchor: &SourceAnchor,
    ) -> R<Value> {
        let r = self.eval_ref(argument)?;
        let cur = self.read_ref(&r, argument)?;
        if self.heap.type_tag(&cur) == TypeTag::FObj {
            self.retype_cell(
                &cur,
                update_rule(op),
                Rule::RUnaryOperator,
                anchor,
                &argument.display_path(),
            );
        }
        let cur = self.heap.resolve(cur);
        let old = self.to_number(&cur, anchor)?;
        let new = match op {
            UpdateOp::Inc => old + 1.0,
            UpdateOp::Dec => old - 1.0,
        };
        self.write_ref(&r, Value::Number(new), argument, false)?;
        Ok(Value::Number(if prefix { new } else { old }))
    }
}
