//! Scopes, property access and the standard conversions.

use std::rc::Rc;
use std::sync::Arc;

use super::engine::{Hoisted, Interp, MAX_STRING_LEN, R};
use crate::syntax::ast::{ForInit, ForTarget, Function, Stmt, StmtKind};
use crate::syntax::SourceAnchor;
use crate::values::number::{array_index, number_to_string, string_to_number};
use crate::values::{
    Callable, FakedForm, FakedOrigin, JsStr, ObjId, ObjKind, ScopeId, TypeTag, Value,
};

/// Array writes further than this past the end become plain properties.
const MAX_ARRAY_GAP: usize = 65_536;
/// Largest explicit array length.
pub(crate) const MAX_ARRAY_LEN: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Hint {
    Default,
    Number,
    String,
}

#[allow(clippy::wrong_self_convention)]
impl Interp {
    // ----- scopes -----

    /// Scope holding `name`, searching outwards from the current scope.
    pub fn find_binding(&self, name: &str) -> Option<ScopeId> {
        let mut cur = Some(self.scope);
        while let Some(id) = cur {
            let scope = self.heap.scope(id);
            if scope.vars.contains_key(name) {
                return Some(id);
            }
            if let Some(obj) = scope.object {
                if self.has_property(obj, name) {
                    return Some(id);
                }
            }
            cur = scope.parent;
        }
        None
    }

    /// Reads a variable without faking.
    pub fn get_var(&mut self, name: &str) -> Option<Value> {
        let id = self.find_binding(name)?;
        let scope = self.heap.scope(id);
        if let Some(v) = scope.vars.get(name) {
            return Some(v.clone());
        }
        let obj = scope.object?;
        self.get_prop(obj, name)
    }

    /// Reads a variable; a missing one is faked and bound on the global object.
    pub fn read_ident(&mut self, name: &Arc<str>, anchor: &SourceAnchor) -> Value {
        if let Some(v) = self.get_var(name) {
            return v;
        }
        let fake = self.fake(name, FakedOrigin::Er1Lookup, anchor);
        let window = self.realm.window;
        self.heap
            .get_mut(window)
            .props
            .insert(Rc::from(&**name), fake.clone());
        self.log(
            anchor,
            name.to_string(),
            crate::values::Rule::Er1,
            Some(TypeTag::FObj),
            None,
            None,
        );
        fake
    }

    pub fn set_var(&mut self, name: &str, value: Value) {
        match self.find_binding(name) {
            Some(id) => {
                let scope = self.heap.scope_mut(id);
                if let Some(slot) = scope.vars.get_mut(name) {
                    *slot = value;
                    return;
                }
                if let Some(obj) = scope.object {
                    self.put_plain(obj, name, value);
                }
            }
            None => {
                let window = self.realm.window;
                self.put_plain(window, name, value);
            }
        }
    }

    pub fn declare_in(&mut self, scope: ScopeId, name: &str) {
        match self.heap.scope(scope).object {
            Some(obj) => {
                if !self.heap.get(obj).props.contains_key(name) {
                    self.heap
                        .get_mut(obj)
                        .props
                        .insert(Rc::from(name), Value::Undefined);
                }
            }
            None => {
                self.heap
                    .scope_mut(scope)
                    .vars
                    .entry(Rc::from(name))
                    .or_insert(Value::Undefined);
            }
        }
    }

    pub fn bind_in(&mut self, scope: ScopeId, name: &str, value: Value) {
        match self.heap.scope(scope).object {
            Some(obj) => {
                self.heap.get_mut(obj).props.insert(Rc::from(name), value);
            }
            None => {
                self.heap
                    .scope_mut(scope)
                    .vars
                    .insert(Rc::from(name), value);
            }
        }
    }

    /// Declares the `var`s and function declarations of `stmts` in `var_scope`.
    pub fn hoist_into(
        &mut self,
        stmts: &[Stmt],
        var_scope: ScopeId,
        owner: Option<&Arc<Function>>,
    ) {
        let hoisted = match owner {
            Some(func) => {
                let key = Arc::as_ptr(func) as usize;
                match self.hoist_cache.get(&key) {
                    Some((_, h)) => h.clone(),
                    None => {
                        let h = Rc::new(collect_hoisted(stmts));
                        self.hoist_cache.insert(key, (func.clone(), h.clone()));
                        h
                    }
                }
            }
            None => Rc::new(collect_hoisted(stmts)),
        };
        for name in &hoisted.vars {
            self.declare_in(var_scope, name);
        }
        for func in &hoisted.funcs {
            let closure = self.make_closure(func, self.scope);
            if let Some(name) = &func.name {
                self.bind_in(var_scope, name, closure);
            }
        }
    }

    pub fn make_closure(&mut self, func: &Arc<Function>, env: ScopeId) -> Value {
        let (unit, source) = match self.frames.last() {
            Some(f) => (f.unit.clone(), f.source.clone()),
            None => (Arc::from("<host>"), Arc::from("")),
        };
        let fproto = self.realm.function_proto;
        let id = self.alloc(
            ObjKind::Function(Callable::User {
                func: func.clone(),
                env,
                unit,
                source,
            }),
            Some(fproto),
        );
        let proto = self.new_object();
        self.heap
            .get_mut(proto)
            .props
            .insert(Rc::from("constructor"), Value::Object(id));
        self.heap
            .get_mut(id)
            .props
            .insert(Rc::from("prototype"), Value::Object(proto));
        Value::Object(id)
    }

    // ----- properties -----

    /// Own property lookup including the virtual slots of arrays, strings and functions.
    pub fn get_own(&self, id: ObjId, key: &str) -> Option<Value> {
        let obj = self.heap.get(id);
        match &obj.kind {
            ObjKind::Array(items) => {
                if key == "length" {
                    return Some(Value::Number(items.len() as f64));
                }
                if let Some(i) = array_index(key) {
                    if let Some(v) = items.get(i as usize) {
                        return Some(v.clone());
                    }
                }
            }
            ObjKind::FakedArray(fa) => {
                if key == "length" {
                    return Some(Value::Number(fa.len as f64));
                }
                if let Some(i) = array_index(key) {
                    if let Some(v) = fa.elems.get(&(i as u64)) {
                        return Some(v.clone());
                    }
                }
            }
            ObjKind::Boxed(Value::String(s)) => {
                if key == "length" {
                    return Some(Value::Number(s.len() as f64));
                }
                if let Some(i) = array_index(key) {
                    if let Some(u) = s.unit_at(i as usize) {
                        return Some(Value::String(JsStr::from_units(vec![u])));
                    }
                }
            }
            ObjKind::Function(c) => {
                if let Some(v) = obj.props.get(key) {
                    return Some(v.clone());
                }
                return match (key, c) {
                    ("length", Callable::User { func, .. }) => {
                        Some(Value::Number(func.params.len() as f64))
                    }
                    ("length", _) => Some(Value::Number(0.0)),
                    ("name", Callable::User { func, .. }) => {
                        Some(Value::str(func.name.as_deref().unwrap_or("")))
                    }
                    _ => None,
                };
            }
            _ => {}
        }
        obj.props.get(key).cloned()
    }

    pub fn has_own(&self, id: ObjId, key: &str) -> bool {
        self.get_own(id, key).is_some() || self.implicit_faked_element(id, key)
    }

    fn implicit_faked_element(&self, id: ObjId, key: &str) -> bool {
        match &self.heap.get(id).kind {
            ObjKind::FakedArray(fa) => array_index(key).is_some_and(|i| (i as u64) < fa.len),
            _ => false,
        }
    }

    /// Prototype-chain lookup without faking.
    pub fn get_prop(&self, id: ObjId, key: &str) -> Option<Value> {
        let mut cur = Some(id);
        let mut guard = 0;
        while let Some(c) = cur {
            if let Some(v) = self.get_own(c, key) {
                return Some(v);
            }
            cur = self.heap.get(c).proto;
            guard += 1;
            if guard > 10_000 {
                break;
            }
        }
        None
    }

    pub fn has_property(&self, id: ObjId, key: &str) -> bool {
        let mut cur = Some(id);
        let mut guard = 0;
        while let Some(c) = cur {
            if self.has_own(c, key) {
                return true;
            }
            cur = self.heap.get(c).proto;
            guard += 1;
            if guard > 10_000 {
                break;
            }
        }
        false
    }

    /// Prototype used for property lookups on a primitive.
    pub fn primitive_proto(&self, v: &Value) -> Option<ObjId> {
        match v {
            Value::String(_) => Some(self.realm.string_proto),
            Value::Number(_) => Some(self.realm.number_proto),
            Value::Bool(_) => Some(self.realm.boolean_proto),
            _ => None,
        }
    }

    /// Reads `base[key]` with forced-execution recovery. `subject` names the
    /// access in the recovery log.
    pub fn read_prop(
        &mut self,
        base: &Value,
        key: &Rc<str>,
        subject: &dyn Fn() -> String,
        anchor: &SourceAnchor,
    ) -> R<Value> {
        match base {
            Value::Object(id) => {
                let id = *id;
                if let Some(v) = self.get_own(id, key) {
                    return Ok(v);
                }
                let materialize = match &self.heap.get(id).kind {
                    ObjKind::FakedArray(fa) => array_index(key).filter(|i| (*i as u64) < fa.len),
                    ObjKind::Array(items) => {
                        if array_index(key).is_some_and(|i| i as usize >= items.len()) {
                            return Ok(self.proto_lookup(id, key).unwrap_or(Value::Undefined));
                        }
                        None
                    }
                    _ => None,
                };
                if let Some(i) = materialize {
                    let fake = self.fake(&subject(), FakedOrigin::ArrayElement, anchor);
                    if let ObjKind::FakedArray(fa) = &mut self.heap.get_mut(id).kind {
                        fa.elems.insert(i as u64, fake.clone());
                    }
                    return Ok(fake);
                }
                if let Some(v) = self.proto_lookup(id, key) {
                    return Ok(v);
                }
                let fake = self.fake(key, FakedOrigin::Er1Lookup, anchor);
                self.heap
                    .get_mut(id)
                    .props
                    .insert(key.clone(), fake.clone());
                self.log(
                    anchor,
                    subject(),
                    crate::values::Rule::Er1,
                    Some(TypeTag::FObj),
                    None,
                    None,
                );
                Ok(fake)
            }
            Value::String(s) => {
                if &**key == "length" {
                    return Ok(Value::Number(s.len() as f64));
                }
                if let Some(i) = array_index(key) {
                    return Ok(match s.unit_at(i as usize) {
                        Some(u) => Value::String(JsStr::from_units(vec![u])),
                        None => Value::Undefined,
                    });
                }
                self.primitive_member(base, key, subject, anchor)
            }
            Value::Number(_) | Value::Bool(_) => self.primitive_member(base, key, subject, anchor),
            Value::Undefined | Value::Null => {
                let msg = format!(
                    "Cannot read property '{key}' of {}",
                    if matches!(base, Value::Null) {
                        "null"
                    } else {
                        "undefined"
                    }
                );
                self.engine_error("TypeError", &msg, anchor)
            }
        }
    }

    fn proto_lookup(&self, id: ObjId, key: &str) -> Option<Value> {
        let proto = self.heap.get(id).proto?;
        self.get_prop(proto, key)
    }

    fn primitive_member(
        &mut self,
        base: &Value,
        key: &Rc<str>,
        subject: &dyn Fn() -> String,
        anchor: &SourceAnchor,
    ) -> R<Value> {
        if let Some(proto) = self.primitive_proto(base) {
            if let Some(v) = self.get_prop(proto, key) {
                return Ok(v);
            }
        }
        let fake = self.fake(key, FakedOrigin::Er1Lookup, anchor);
        self.log(
            anchor,
            subject(),
            crate::values::Rule::Er1,
            Some(TypeTag::FObj),
            None,
            None,
        );
        Ok(fake)
    }

    /// True when the slot `base[key]` currently holds an unretyped faked value,
    /// including implicit elements of a faked array.
    pub fn slot_holds_fake(&self, base: ObjId, key: &str) -> bool {
        match self.get_own(base, key) {
            Some(v) => self.heap.type_tag(&v).is_faked(),
            None => self.implicit_faked_element(base, key),
        }
    }

    /// Writes `base[key] = value` honoring array semantics.
    pub fn put(&mut self, base: ObjId, key: &str, value: Value, anchor: &SourceAnchor) -> R<()> {
        if key == "length" && matches!(self.heap.get(base).kind, ObjKind::Array(_)) {
            let n = match self.heap.resolve(value) {
                Value::Number(n) => n,
                _ => f64::NAN,
            };
            if n < 0.0 || n.fract() != 0.0 || n > MAX_ARRAY_LEN as f64 || n.is_nan() {
                self.engine_error("RangeError", "Invalid array length", anchor)?;
                return Ok(());
            }
            if let ObjKind::Array(items) = &mut self.heap.get_mut(base).kind {
                items.resize(n as usize, Value::Undefined);
            }
            return Ok(());
        }
        let obj = self.heap.get_mut(base);
        match &mut obj.kind {
            ObjKind::Array(items) => {
                if let Some(i) = array_index(key) {
                    let i = i as usize;
                    if i < items.len() {
                        items[i] = value;
                        return Ok(());
                    }
                    if i < items.len() + MAX_ARRAY_GAP && i < MAX_ARRAY_LEN * 4 {
                        items.resize(i, Value::Undefined);
                        items.push(value);
                        return Ok(());
                    }
                }
            }
            ObjKind::FakedArray(fa) => {
                if key == "length" {
                    if let Value::Number(n) = value {
                        if n >= 0.0 && n.is_finite() {
                            fa.len = n as u64;
                            fa.elems.retain(|k, _| *k < n as u64);
                        }
                    }
                    return Ok(());
                }
                if let Some(i) = array_index(key) {
                    let i = i as u64;
                    if i >= fa.len {
                        fa.len = i + 1;
                    }
                    fa.elems.insert(i, value);
                    return Ok(());
                }
            }
            _ => {}
        }
        obj.props.insert(Rc::from(key), value);
        Ok(())
    }

    /// Plain property store with no array semantics, for host-side setup.
    pub fn put_plain(&mut self, base: ObjId, key: &str, value: Value) {
        self.heap.get_mut(base).props.insert(Rc::from(key), value);
    }

    pub fn delete_prop(&mut self, base: ObjId, key: &str) -> bool {
        let obj = self.heap.get_mut(base);
        match &mut obj.kind {
            ObjKind::Array(items) => {
                if let Some(i) = array_index(key) {
                    if let Some(slot) = items.get_mut(i as usize) {
                        *slot = Value::Undefined;
                        return true;
                    }
                }
            }
            ObjKind::FakedArray(fa) => {
                if let Some(i) = array_index(key) {
                    fa.elems.insert(i as u64, Value::Undefined);
                    return true;
                }
            }
            _ => {}
        }
        obj.props.shift_remove(key);
        true
    }

    /// Enumerable keys for `for-in`: indices first, then named properties.
    pub fn own_keys(&self, id: ObjId) -> Vec<Rc<str>> {
        let obj = self.heap.get(id);
        let mut keys: Vec<Rc<str>> = Vec::new();
        match &obj.kind {
            ObjKind::Array(items) => keys.extend((0..items.len()).map(|i| Rc::from(i.to_string()))),
            ObjKind::FakedArray(fa) => {
                keys.extend((0..fa.len.min(MAX_ARRAY_GAP as u64)).map(|i| Rc::from(i.to_string())))
            }
            ObjKind::Boxed(Value::String(s)) => {
                keys.extend((0..s.len()).map(|i| Rc::from(i.to_string())))
            }
            _ => {}
        }
        keys.extend(obj.props.keys().cloned());
        keys
    }

    // ----- conversions -----

    pub fn to_boolean(&self, v: &Value) -> bool {
        match self.heap.resolve(v.clone()) {
            Value::Undefined | Value::Null => false,
            Value::Bool(b) => b,
            Value::Number(n) => !(n == 0.0 || n.is_nan()),
            Value::String(s) => !s.is_empty(),
            Value::Object(_) => true,
        }
    }

    pub fn to_primitive(&mut self, v: &Value, hint: Hint, anchor: &SourceAnchor) -> R<Value> {
        let v = self.heap.resolve(v.clone());
        let Value::Object(id) = v else { return Ok(v) };
        match &self.heap.get(id).kind {
            ObjKind::Faked(f) => {
                return Ok(match &f.form {
                    FakedForm::Fun => Value::str(&format!(
                        "function {}() {{ [native code] }}",
                        f.provenance.name
                    )),
                    FakedForm::Prim(p) => p.clone(),
                    FakedForm::Obj => Value::str(&f.provenance.name),
                });
            }
            ObjKind::Boxed(inner) => return Ok(inner.clone()),
            ObjKind::Date(_) if hint == Hint::Default => {
                return self.to_primitive_with(id, Hint::String, anchor)
            }
            _ => {}
        }
        self.to_primitive_with(id, hint, anchor)
    }

    fn to_primitive_with(&mut self, id: ObjId, hint: Hint, anchor: &SourceAnchor) -> R<Value> {
        let order: [&str; 2] = if hint == Hint::String {
            ["toString", "valueOf"]
        } else {
            ["valueOf", "toString"]
        };
        for name in order {
            let Some(method) = self.get_prop(id, name) else {
                continue;
            };
            let Value::Object(mid) = method else { continue };
            if !matches!(self.heap.get(mid).kind, ObjKind::Function(_)) {
                continue;
            }
            let r = self.call_value(
                Value::Object(mid),
                Value::Object(id),
                Vec::new(),
                anchor,
                name,
            )?;
            let r = self.heap.resolve(r);
            if !matches!(r, Value::Object(_)) {
                return Ok(r);
            }
        }
        self.engine_error(
            "TypeError",
            "Cannot convert object to primitive value",
            anchor,
        )?;
        Ok(Value::str("[object Object]"))
    }

    pub fn to_number(&mut self, v: &Value, anchor: &SourceAnchor) -> R<f64> {
        let p = self.to_primitive(v, Hint::Number, anchor)?;
        Ok(primitive_to_number(&p))
    }

    pub fn to_string(&mut self, v: &Value, anchor: &SourceAnchor) -> R<JsStr> {
        let p = self.to_primitive(v, Hint::String, anchor)?;
        Ok(primitive_to_string(&p))
    }

    pub fn to_key(&mut self, v: &Value, anchor: &SourceAnchor) -> R<Rc<str>> {
        let v = self.heap.resolve(v.clone());
        Ok(match &v {
            Value::String(s) => Rc::from(s.to_std_string()),
            Value::Number(n) => Rc::from(number_to_string(*n)),
            _ => Rc::from(self.to_string(&v, anchor)?.to_std_string()),
        })
    }

    pub fn typeof_str(&self, v: &Value) -> &'static str {
        match self.heap.type_tag(v) {
            TypeTag::Undef => "undefined",
            TypeTag::Null => "object",
            TypeTag::Bool => "boolean",
            TypeTag::Number => "number",
            TypeTag::String => "string",
            TypeTag::Function | TypeTag::FFun => "function",
            TypeTag::Obj | TypeTag::FObj => "object",
        }
    }

    pub fn concat(&mut self, a: &JsStr, b: &JsStr, anchor: &SourceAnchor) -> R<Value> {
        if a.len() + b.len() > MAX_STRING_LEN {
            self.engine_error("RangeError", "Invalid string length", anchor)?;
            return Ok(Value::String(a.clone()));
        }
        Ok(Value::String(a.concat(b)))
    }

    pub fn loose_equals(&mut self, a: &Value, b: &Value, anchor: &SourceAnchor) -> R<bool> {
        let a = self.heap.resolve(a.clone());
        let b = self.heap.resolve(b.clone());
        Ok(match (&a, &b) {
            (Value::Undefined | Value::Null, Value::Undefined | Value::Null) => true,
            (Value::Undefined | Value::Null, _) | (_, Value::Undefined | Value::Null) => false,
            (Value::Number(x), Value::String(s)) | (Value::String(s), Value::Number(x)) => {
                *x == string_to_number(&s.to_std_string())
            }
            (Value::Bool(x), _) => {
                let n = Value::Number(if *x { 1.0 } else { 0.0 });
                return self.loose_equals(&n, &b, anchor);
            }
            (_, Value::Bool(y)) => {
                let n = Value::Number(if *y { 1.0 } else { 0.0 });
                return self.loose_equals(&a, &n, anchor);
            }
            (Value::Object(_), Value::Object(_)) => a.strict_equals(&b),
            (Value::Object(_), _) => {
                let p = self.to_primitive(&a, Hint::Default, anchor)?;
                return self.loose_equals(&p, &b, anchor);
            }
            (_, Value::Object(_)) => {
                let p = self.to_primitive(&b, Hint::Default, anchor)?;
                return self.loose_equals(&a, &p, anchor);
            }
            _ => a.strict_equals(&b),
        })
    }

    /// Abstract relational comparison `a < b`; `None` when undefined (NaN).
    pub fn less_than(&mut self, a: &Value, b: &Value, anchor: &SourceAnchor) -> R<Option<bool>> {
        let pa = self.to_primitive(a, Hint::Number, anchor)?;
        let pb = self.to_primitive(b, Hint::Number, anchor)?;
        if let (Value::String(x), Value::String(y)) = (&pa, &pb) {
            return Ok(Some(x.flat()[..] < y.flat()[..]));
        }
        let x = primitive_to_number(&pa);
        let y = primitive_to_number(&pb);
        if x.is_nan() || y.is_nan() {
            return Ok(None);
        }
        Ok(Some(x < y))
    }

    /// Checks the deadline from inside long-running host code.
    pub fn host_tick(&mut self) -> R<()> {
        self.tick()
    }
}

pub(crate) fn primitive_to_number(v: &Value) -> f64 {
    match v {
        Value::Undefined => f64::NAN,
        Value::Null => 0.0,
        Value::Bool(b) => {
            if *b {
                1.0
            } else {
                0.0
            }
        }
        Value::Number(n) => *n,
        Value::String(s) => string_to_number(&s.to_std_string()),
        Value::Object(_) => f64::NAN,
    }
}

pub(crate) fn primitive_to_string(v: &Value) -> JsStr {
    match v {
        Value::Undefined => JsStr::from("undefined"),
        Value::Null => JsStr::from("null"),
        Value::Bool(b) => JsStr::from(if *b { "true" } else { "false" }),
        Value::Number(n) => JsStr::from(number_to_string(*n)),
        Value::String(s) => s.clone(),
        Value::Object(_) => JsStr::from("[object Object]"),
    }
}

fn collect_hoisted(stmts: &[Stmt]) -> Hoisted {
    let mut h = Hoisted::default();
    for s in stmts {
        hoist_stmt(s, &mut h);
    }
    h
}

fn hoist_stmt(s: &Stmt, h: &mut Hoisted) {
    let add = |name: &Arc<str>, h: &mut Hoisted| {
        if !h.vars.iter().any(|v| v == name) {
            h.vars.push(name.clone());
        }
    };
    match &s.kind {
        StmtKind::Var(_, decls) => decls.iter().for_each(|d| add(&d.name, h)),
        StmtKind::Function(f) => h.funcs.push(f.clone()),
        StmtKind::Block(body) => body.iter().for_each(|s| hoist_stmt(s, h)),
        StmtKind::If {
            consequent,
            alternate,
            ..
        } => {
            hoist_stmt(consequent, h);
            if let Some(a) = alternate {
                hoist_stmt(a, h);
            }
        }
        StmtKind::While { body, .. } => hoist_stmt(body, h),
        StmtKind::For { init, body, .. } => {
            if let Some(ForInit::Var(_, decls)) = init {
                decls.iter().for_each(|d| add(&d.name, h));
            }
            hoist_stmt(body, h);
        }
        StmtKind::ForIn { target, body, .. } => {
            if let ForTarget::Var(_, name) = target {
                add(name, h);
            }
            hoist_stmt(body, h);
        }
        StmtKind::Try {
            block,
            handler,
            finalizer,
        } => {
            block.iter().for_each(|s| hoist_stmt(s, h));
            if let Some(c) = handler {
                c.body.iter().for_each(|s| hoist_stmt(s, h));
            }
            if let Some(f) = finalizer {
                f.iter().for_each(|s| hoist_stmt(s, h));
            }
        }
        StmtKind::Switch { cases, .. } => {
            for c in cases {
                c.body.iter().for_each(|s| hoist_stmt(s, h));
            }
        }
        _ => {}
    }
}
