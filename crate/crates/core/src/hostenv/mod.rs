//! Built-in environment: the global object, the standard library subset with
//! argument signatures, and the instrumented host APIs.
//!
//! Anything not installed here is still usable by scripts: reads of missing
//! globals and properties are faked by the interpreter.

mod builtins;
pub mod codec;
mod html;

pub use html::{extract_scripts, ExtractedScript};

use crate::interp::Interp;
use crate::syntax::ast::{ExprKind, StmtKind};
use crate::values::{Callable, ObjId, ObjKind, TypeTag, Value};
pub(crate) use builtins::{builtin, CallSite, BUILTINS};

/// Well-known objects of one interpreter instance.
#[derive(Debug, Clone)]
pub(crate) struct Realm {
    pub window: ObjId,
    pub object_proto: ObjId,
    pub function_proto: ObjId,
    pub array_proto: ObjId,
    pub string_proto: ObjId,
    pub number_proto: ObjId,
    pub boolean_proto: ObjId,
    pub date_proto: ObjId,
    pub regexp_proto: ObjId,
    pub error_proto: ObjId,
    pub error_protos: Vec<(&'static str, ObjId)>,
    pub eval_fn: ObjId,
}

impl Realm {
    pub fn placeholder() -> Self {
        let z = ObjId(0);
        Realm {
            window: z,
            object_proto: z,
            function_proto: z,
            array_proto: z,
            string_proto: z,
            number_proto: z,
            boolean_proto: z,
            date_proto: z,
            regexp_proto: z,
            error_proto: z,
            error_protos: Vec::new(),
            eval_fn: z,
        }
    }

    pub fn error_proto_for(&self, kind: &str) -> ObjId {
        self.error_protos
            .iter()
            .find(|(k, _)| *k == kind)
            .map(|(_, id)| *id)
            .unwrap_or(self.error_proto)
    }
}

const ERROR_KINDS: [&str; 6] = [
    "TypeError",
    "RangeError",
    "SyntaxError",
    "ReferenceError",
    "EvalError",
    "URIError",
];

pub(crate) fn builtin_name(index: u16) -> &'static str {
    BUILTINS
        .get(index as usize)
        .map(|b| b.name)
        .unwrap_or("<builtin>")
}

/// Builds the global environment and returns the realm.
pub(crate) fn install(interp: &mut Interp) -> Realm {
    let object_proto = interp.alloc(ObjKind::Ordinary, None);
    let mk = |interp: &mut Interp, kind: ObjKind| interp.alloc(kind, Some(object_proto));
    let function_proto = mk(interp, ObjKind::Ordinary);
    let array_proto = mk(interp, ObjKind::Array(Vec::new()));
    let string_proto = mk(interp, ObjKind::Boxed(Value::str("")));
    let number_proto = mk(interp, ObjKind::Boxed(Value::Number(0.0)));
    let boolean_proto = mk(interp, ObjKind::Boxed(Value::Bool(false)));
    let date_proto = mk(interp, ObjKind::Ordinary);
    let regexp_proto = mk(interp, ObjKind::Ordinary);
    let error_proto = mk(interp, ObjKind::Ordinary);
    interp.put_plain(error_proto, "name", Value::str("Error"));
    interp.put_plain(error_proto, "message", Value::str(""));
    let mut error_protos = Vec::new();
    for kind in ERROR_KINDS {
        let p = interp.alloc(ObjKind::Ordinary, Some(error_proto));
        interp.put_plain(p, "name", Value::str(kind));
        interp.put_plain(p, "message", Value::str(""));
        error_protos.push((kind, p));
    }
    let window = mk(interp, ObjKind::Ordinary);
    interp.realm = Realm {
        window,
        object_proto,
        function_proto,
        array_proto,
        string_proto,
        number_proto,
        boolean_proto,
        date_proto,
        regexp_proto,
        error_proto,
        error_protos: error_protos.clone(),
        eval_fn: ObjId(0),
    };

    let mut ctor_protos: Vec<(&str, ObjId)> = vec![
        ("Object", object_proto),
        ("Function", function_proto),
        ("Array", array_proto),
        ("String", string_proto),
        ("Number", number_proto),
        ("Boolean", boolean_proto),
        ("Date", date_proto),
        ("RegExp", regexp_proto),
        ("Error", error_proto),
    ];
    ctor_protos.extend(error_protos.iter().copied());

    let mut eval_fn = ObjId(0);
    for (i, b) in BUILTINS.iter().enumerate() {
        let f = interp.alloc(
            ObjKind::Function(Callable::Builtin(i as u16)),
            Some(function_proto),
        );
        let mut holder = window;
        let segments: Vec<&str> = b.name.split('.').collect();
        for seg in &segments[..segments.len() - 1] {
            holder = match interp.get_own(holder, seg) {
                Some(Value::Object(id)) => id,
                _ => {
                    let o = interp.new_object();
                    interp.put_plain(holder, seg, Value::Object(o));
                    o
                }
            };
        }
        let last = segments[segments.len() - 1];
        interp.put_plain(holder, last, Value::Object(f));
        if let Some((_, proto)) = ctor_protos.iter().find(|(n, _)| *n == b.name) {
            interp.put_plain(f, "prototype", Value::Object(*proto));
            interp.put_plain(*proto, "constructor", Value::Object(f));
        }
        if b.name == "eval" {
            eval_fn = f;
        }
    }

    let math = match interp.get_own(window, "Math") {
        Some(Value::Object(id)) => id,
        _ => interp.new_object(),
    };
    for (k, v) in [
        ("PI", std::f64::consts::PI),
        ("E", std::f64::consts::E),
        ("LN2", std::f64::consts::LN_2),
        ("LN10", std::f64::consts::LN_10),
        ("LOG2E", std::f64::consts::LOG2_E),
        ("LOG10E", std::f64::consts::LOG10_E),
        ("SQRT2", std::f64::consts::SQRT_2),
        ("SQRT1_2", std::f64::consts::FRAC_1_SQRT_2),
    ] {
        interp.put_plain(math, k, Value::Number(v));
    }
    if let Some(Value::Object(number)) = interp.get_own(window, "Number") {
        for (k, v) in [
            ("MAX_VALUE", f64::MAX),
            ("MIN_VALUE", 5e-324),
            ("NaN", f64::NAN),
            ("POSITIVE_INFINITY", f64::INFINITY),
            ("NEGATIVE_INFINITY", f64::NEG_INFINITY),
        ] {
            interp.put_plain(number, k, Value::Number(v));
        }
    }
    interp.put_plain(window, "NaN", Value::Number(f64::NAN));
    interp.put_plain(window, "Infinity", Value::Number(f64::INFINITY));
    interp.put_plain(window, "undefined", Value::Undefined);
    interp.put_plain(window, "window", Value::Object(window));
    interp.put_plain(window, "self", Value::Object(window));
    let navigator = interp.new_object();
    interp.put_plain(window, "navigator", Value::Object(navigator));

    let mut realm = interp.realm.clone();
    realm.eval_fn = eval_fn;
    realm
}

/// Whether `text` looks like code rather than data: it parses, and at least
/// one statement is more than a bare identifier, literal or dotted name.
pub fn is_javascript(text: &str) -> bool {
    if text.trim().is_empty() || text.len() > (1 << 20) {
        return false;
    }
    let Ok(program) = crate::syntax::parse(text, "<probe>") else {
        return false;
    };
    program.statements.iter().any(|s| match &s.kind {
        StmtKind::Empty => false,
        StmtKind::Expr(e) => !is_trivial_expr(&e.kind),
        _ => true,
    })
}

fn is_trivial_expr(kind: &ExprKind) -> bool {
    match kind {
        ExprKind::Ident(_)
        | ExprKind::Number(_)
        | ExprKind::Str(_)
        | ExprKind::Bool(_)
        | ExprKind::Null
        | ExprKind::Regex { .. }
        | ExprKind::This => true,
        ExprKind::Member { object, .. } => is_trivial_expr(&object.kind),
        _ => false,
    }
}

/// Expected parameter type of a builtin at `position`; `None` accepts anything.
pub fn builtin_param(name: &str, position: usize) -> Option<TypeTag> {
    let b = BUILTINS.iter().find(|b| b.name == name)?;
    b.params.get(position).copied().unwrap_or(b.rest)
}

/// Names of every installed builtin, as dotted paths from the global object.
pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTINS.iter().map(|b| b.name)
}
