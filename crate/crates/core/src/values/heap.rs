//! Object and scope arena for one analysis run.
//!
//! Everything allocated during a run lives until the interpreter is dropped,
//! which keeps cyclic object graphs trivial and makes identity a plain index.

use std::collections::BTreeMap;
use std::rc::Rc;
use std::sync::Arc;

use indexmap::IndexMap;

use super::{FakedProvenance, TypeTag, Value};
use crate::syntax::ast::Function;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObjId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ScopeId(pub u32);

pub type PropMap = IndexMap<Rc<str>, Value>;

#[derive(Debug)]
pub struct Object {
    pub kind: ObjKind,
    pub props: PropMap,
    pub proto: Option<ObjId>,
}

impl Object {
    pub fn new(kind: ObjKind, proto: Option<ObjId>) -> Self {
        Object {
            kind,
            props: PropMap::new(),
            proto,
        }
    }
}

#[derive(Debug)]
pub enum ObjKind {
    Ordinary,
    Array(Vec<Value>),
    Function(Callable),
    Faked(Faked),
    /// A faked value that was retyped to an array by an index access.
    FakedArray(FakedArray),
    Date(f64),
    RegExp {
        source: Rc<str>,
        flags: Rc<str>,
    },
    Error,
    /// Boxed primitive (`new String("x")` and friends).
    Boxed(Value),
}

#[derive(Debug, Clone)]
pub enum Callable {
    User {
        func: Arc<Function>,
        env: ScopeId,
        unit: Arc<str>,
        source: Arc<str>,
    },
    Builtin(u16),
    Bound {
        target: ObjId,
        this: Value,
        args: Vec<Value>,
    },
}

#[derive(Debug)]
pub struct Faked {
    pub provenance: Rc<FakedProvenance>,
    pub form: FakedForm,
}

#[derive(Debug, Clone)]
pub enum FakedForm {
    Obj,
    Fun,
    /// Retyped to a primitive; every alias now reads this value.
    Prim(Value),
}

#[derive(Debug)]
pub struct FakedArray {
    pub provenance: Rc<FakedProvenance>,
    pub len: u64,
    /// Elements written or read so far; the rest are still implicit faked values.
    pub elems: BTreeMap<u64, Value>,
}

#[derive(Debug)]
pub struct Scope {
    pub vars: IndexMap<Rc<str>, Value>,
    pub parent: Option<ScopeId>,
    /// Set for the global scope, whose bindings live on the window object.
    pub object: Option<ObjId>,
}

#[derive(Debug, Default)]
pub struct Heap {
    objects: Vec<Object>,
    scopes: Vec<Scope>,
}

impl Heap {
    pub fn new() -> Self {
        Heap::default()
    }

    pub fn alloc(&mut self, obj: Object) -> ObjId {
        self.objects.push(obj);
        ObjId((self.objects.len() - 1) as u32)
    }

    pub fn get(&self, id: ObjId) -> &Object {
        &self.objects[id.0 as usize]
    }

    pub fn get_mut(&mut self, id: ObjId) -> &mut Object {
        &mut self.objects[id.0 as usize]
    }

    pub fn object_count(&self) -> usize {
        self.objects.len()
    }

    pub fn new_scope(&mut self, parent: Option<ScopeId>, object: Option<ObjId>) -> ScopeId {
        self.scopes.push(Scope {
            vars: IndexMap::new(),
            parent,
            object,
        });
        ScopeId((self.scopes.len() - 1) as u32)
    }

    pub fn scope(&self, id: ScopeId) -> &Scope {
        &self.scopes[id.0 as usize]
    }

    pub fn scope_mut(&mut self, id: ScopeId) -> &mut Scope {
        &mut self.scopes[id.0 as usize]
    }

    /// A fresh faked object; never aliases an earlier value.
    pub fn make_faked(&mut self, provenance: FakedProvenance) -> Value {
        let id = self.alloc(Object::new(
            ObjKind::Faked(Faked {
                provenance: Rc::new(provenance),
                form: FakedForm::Obj,
            }),
            None,
        ));
        Value::Object(id)
    }

    pub fn faked(&self, id: ObjId) -> Option<&Faked> {
        match &self.get(id).kind {
            ObjKind::Faked(f) => Some(f),
            _ => None,
        }
    }

    /// Provenance of any value that started life as a faked object.
    pub fn provenance(&self, v: &Value) -> Option<Rc<FakedProvenance>> {
        let id = v.as_object()?;
        match &self.get(id).kind {
            ObjKind::Faked(f) => Some(f.provenance.clone()),
            ObjKind::FakedArray(a) => Some(a.provenance.clone()),
            _ => None,
        }
    }

    /// Reads through a retyped faked cell to the primitive it became.
    pub fn resolve(&self, v: Value) -> Value {
        if let Value::Object(id) = v {
            if let ObjKind::Faked(Faked {
                form: FakedForm::Prim(p),
                ..
            }) = &self.get(id).kind
            {
                return p.clone();
            }
        }
        v
    }

    pub fn type_tag(&self, v: &Value) -> TypeTag {
        match v {
            Value::Undefined => TypeTag::Undef,
            Value::Null => TypeTag::Null,
            Value::Bool(_) => TypeTag::Bool,
            Value::Number(_) => TypeTag::Number,
            Value::String(_) => TypeTag::String,
            Value::Object(id) => match &self.get(*id).kind {
                ObjKind::Function(_) => TypeTag::Function,
                ObjKind::Faked(f) => match &f.form {
                    FakedForm::Obj => TypeTag::FObj,
                    FakedForm::Fun => TypeTag::FFun,
                    FakedForm::Prim(p) => self.type_tag(p),
                },
                _ => TypeTag::Obj,
            },
        }
    }

    pub fn is_callable(&self, id: ObjId) -> bool {
        matches!(
            &self.get(id).kind,
            ObjKind::Function(_)
                | ObjKind::Faked(Faked {
                    form: FakedForm::Fun,
                    ..
                })
        )
    }

    /// Rewrites a faked object in place so every alias observes `tag`.
    /// `number` supplies the value used when `tag` is Number.
    pub fn retype(&mut self, id: ObjId, tag: TypeTag, number: f64) -> Value {
        let ObjKind::Faked(f) = &mut self.get_mut(id).kind else {
            return Value::Object(id);
        };
        let prim = match tag {
            TypeTag::Number => Some(Value::Number(number)),
            TypeTag::String => Some(Value::str(&f.provenance.name)),
            TypeTag::Bool => Some(Value::Bool(true)),
            TypeTag::Undef => Some(Value::Undefined),
            TypeTag::Null => Some(Value::Null),
            TypeTag::Function | TypeTag::FFun => {
                f.form = FakedForm::Fun;
                None
            }
            TypeTag::FObj => None,
            TypeTag::Obj => {
                self.get_mut(id).kind = ObjKind::Ordinary;
                None
            }
        };
        match prim {
            Some(p) => {
                if let ObjKind::Faked(f) = &mut self.get_mut(id).kind {
                    f.form = FakedForm::Prim(p.clone());
                }
                p
            }
            None => Value::Object(id),
        }
    }

    /// Turns a faked object into an array of `len` implicit faked elements.
    pub fn retype_to_array(&mut self, id: ObjId, len: u64) {
        let obj = self.get_mut(id);
        if let ObjKind::Faked(f) = &obj.kind {
            let provenance = f.provenance.clone();
            obj.kind = ObjKind::FakedArray(FakedArray {
                provenance,
                len,
                elems: BTreeMap::new(),
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::SourceAnchor;
    use crate::values::FakedOrigin;

    fn prov(name: &str) -> FakedProvenance {
        FakedProvenance {
            name: name.into(),
            origin: FakedOrigin::Er1Lookup,
            birth_anchor: SourceAnchor::new("t.js", 0),
        }
    }

    #[test]
    fn faked_values_are_fresh() {
        let mut h = Heap::new();
        let a = h.make_faked(prov("c"));
        let b = h.make_faked(prov("c"));
        assert!(!a.strict_equals(&b));
        assert_eq!(h.type_tag(&a), TypeTag::FObj);
    }

    #[test]
    fn retype_is_visible_through_aliases() {
        let mut h = Heap::new();
        let a = h.make_faked(prov("c"));
        let alias = a.clone();
        h.retype(a.as_object().unwrap(), TypeTag::Number, 7.0);
        assert_eq!(h.type_tag(&alias), TypeTag::Number);
        assert!(matches!(h.resolve(alias), Value::Number(n) if n == 7.0));
    }

    #[test]
    fn string_sentinel_is_the_name() {
        let mut h = Heap::new();
        let a = h.make_faked(prov("YYGRl6"));
        let v = h.retype(a.as_object().unwrap(), TypeTag::String, 0.0);
        assert!(matches!(v, Value::String(s) if s.to_std_string() == "YYGRl6"));
    }

    #[test]
    fn callable_and_array_forms() {
        let mut h = Heap::new();
        let f = h.make_faked(prov("func")).as_object().unwrap();
        h.retype(f, TypeTag::FFun, 0.0);
        assert!(h.is_callable(f));
        assert_eq!(h.type_tag(&Value::Object(f)), TypeTag::FFun);
        let a = h.make_faked(prov("array")).as_object().unwrap();
        h.retype_to_array(a, 10);
        assert!(matches!(&h.get(a).kind, ObjKind::FakedArray(fa) if fa.len == 10));
        assert_eq!(h.type_tag(&Value::Object(a)), TypeTag::Obj);
    }
}
