//! Runtime values, the type lattice, and the retyping rules for faked values.

pub mod heap;
pub mod jsstr;
pub mod number;
pub mod retype;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::syntax::SourceAnchor;
pub use heap::{
    Callable, Faked, FakedArray, FakedForm, Heap, ObjId, ObjKind, Object, Scope, ScopeId,
};
pub use jsstr::JsStr;
pub use retype::{NumberSource, Rule};

/// The type lattice: the standard JavaScript summands plus the faked object
/// and faked function types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TypeTag {
    Undef,
    Null,
    Bool,
    String,
    Number,
    Function,
    Obj,
    FObj,
    FFun,
}

impl TypeTag {
    pub const ALL: [TypeTag; 9] = [
        TypeTag::Undef,
        TypeTag::Null,
        TypeTag::Bool,
        TypeTag::String,
        TypeTag::Number,
        TypeTag::Function,
        TypeTag::Obj,
        TypeTag::FObj,
        TypeTag::FFun,
    ];

    pub fn is_faked(self) -> bool {
        matches!(self, TypeTag::FObj | TypeTag::FFun)
    }

    pub fn is_primitive(self) -> bool {
        matches!(
            self,
            TypeTag::Undef | TypeTag::Null | TypeTag::Bool | TypeTag::String | TypeTag::Number
        )
    }

    fn bit(self) -> u16 {
        1 << (self as u16)
    }
}

impl fmt::Display for TypeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TypeTag::Undef => "Undef",
            TypeTag::Null => "Null",
            TypeTag::Bool => "Bool",
            TypeTag::String => "String",
            TypeTag::Number => "Number",
            TypeTag::Function => "Function",
            TypeTag::Obj => "Obj",
            TypeTag::FObj => "FObj",
            TypeTag::FFun => "FFun",
        };
        f.write_str(s)
    }
}

/// A union type: a set of tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct TypeSet(u16);

impl TypeSet {
    pub fn empty() -> Self {
        TypeSet(0)
    }

    pub fn of(tags: &[TypeTag]) -> Self {
        tags.iter().fold(TypeSet(0), |s, t| s.with(*t))
    }

    pub fn with(self, tag: TypeTag) -> Self {
        TypeSet(self.0 | tag.bit())
    }

    pub fn contains(self, tag: TypeTag) -> bool {
        self.0 & tag.bit() != 0
    }

    pub fn union(self, other: TypeSet) -> Self {
        TypeSet(self.0 | other.0)
    }

    pub fn iter(self) -> impl Iterator<Item = TypeTag> {
        TypeTag::ALL.into_iter().filter(move |t| self.contains(*t))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FakedOrigin {
    #[serde(rename = "ER_1_lookup")]
    Er1Lookup,
    #[serde(rename = "ER_2_null_init")]
    Er2NullInit,
    #[serde(rename = "FFun_return")]
    FfunReturn,
    #[serde(rename = "array_element")]
    ArrayElement,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FakedProvenance {
    pub name: String,
    pub origin: FakedOrigin,
    pub birth_anchor: SourceAnchor,
}

#[derive(Debug, Clone)]
pub enum Value {
    Undefined,
    Null,
    Bool(bool),
    Number(f64),
    String(JsStr),
    Object(ObjId),
}

impl Value {
    pub fn str(s: &str) -> Value {
        Value::String(JsStr::from(s))
    }

    pub fn as_object(&self) -> Option<ObjId> {
        match self {
            Value::Object(id) => Some(*id),
            _ => None,
        }
    }

    pub fn is_nullish(&self) -> bool {
        matches!(self, Value::Undefined | Value::Null)
    }

    /// Same value in the `===` sense, for non-object operands and object identity.
    pub fn strict_equals(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Undefined, Value::Undefined) | (Value::Null, Value::Null) => true,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Number(a), Value::Number(b)) => a == b,
            (Value::String(a), Value::String(b)) => a == b,
            (Value::Object(a), Value::Object(b)) => a == b,
            _ => false,
        }
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Number(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<JsStr> for Value {
    fn from(v: JsStr) -> Self {
        Value::String(v)
    }
}
