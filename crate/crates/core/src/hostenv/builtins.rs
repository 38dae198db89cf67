//! Builtin functions and their argument signatures.
//!
//! A parameter typed `Some(tag)` makes a faked argument take that type before
//! the call; `None` accepts anything unchanged.

use std::cmp::Ordering;
use std::rc::Rc;

use chrono::{DateTime, Datelike, NaiveDate, NaiveDateTime, Timelike, Utc};
use regex::Regex;

use super::codec;
use crate::config::ActiveXMode;
use crate::interp::{Abort, EventKind, Interp, R};
use crate::interp::{CbTarget, DynamicOrigin};
use crate::syntax::SourceAnchor;
use crate::values::number::{
    number_to_radix_string, number_to_string, parse_float, parse_int, to_integer, to_uint16,
    to_uint32, trim_js,
};
use crate::values::{Callable, FakedOrigin, JsStr, ObjKind, TypeTag, Value};

pub(crate) struct CallSite<'a> {
    pub anchor: &'a SourceAnchor,
    pub construct: bool,
    /// Bit `i` set when argument `i` was a faked object before retyping.
    pub faked: u64,
}

impl CallSite<'_> {
    fn was_faked(&self, pos: usize) -> bool {
        pos < 64 && self.faked & (1 << pos) != 0
    }
}

pub(crate) type BuiltinFn = fn(&mut Interp, &Value, &[Value], &CallSite) -> R<Value>;

pub(crate) struct Builtin {
    /// Dotted path from the global object, e.g. `String.prototype.indexOf`.
    pub name: &'static str,
    pub params: &'static [Option<TypeTag>],
    /// Type for arguments past `params`.
    pub rest: Option<TypeTag>,
    pub func: BuiltinFn,
}

pub(crate) fn builtin(index: u16) -> &'static Builtin {
    &BUILTINS[index as usize]
}

const N: Option<TypeTag> = Some(TypeTag::Number);
const S: Option<TypeTag> = Some(TypeTag::String);
const F: Option<TypeTag> = Some(TypeTag::Function);
const O: Option<TypeTag> = Some(TypeTag::Obj);
const A: Option<TypeTag> = None;

/// Time reported by `Date` and `new Date()`, fixed so runs are reproducible.
pub(crate) const FIXED_NOW_MS: f64 = 1_370_088_000_000.0;
const MAX_WRITE_BUFFER: usize = 16 << 20;
const MAX_ARRAY_LIKE: usize = 1 << 16;

macro_rules! b {
    ($name:expr, [$($p:expr),*], $rest:expr, $f:expr) => {
        Builtin { name: $name, params: &[$($p),*], rest: $rest, func: $f }
    };
}

macro_rules! math1 {
    ($name:expr, $op:expr) => {
        b!($name, [N], None, |it, _t, a, s| {
            let x = num(it, a, 0, s)?;
            let op: fn(f64) -> f64 = $op;
            Ok(Value::Number(op(x)))
        })
    };
}

macro_rules! date_get {
    ($name:expr, $op:expr) => {
        b!($name, [], None, |it, t, _a, s| {
            let ms = this_date(it, t, s)?;
            let op: fn(&DateTime<Utc>) -> f64 = $op;
            Ok(Value::Number(
                date_of(ms).map(|d| op(&d)).unwrap_or(f64::NAN),
            ))
        })
    };
}

macro_rules! error_ctor {
    ($name:expr) => {
        b!($name, [S], None, |it, _t, a, s| make_error_value(
            it, $name, a, s
        ))
    };
}

pub(crate) static BUILTINS: &[Builtin] = &[
    // ----- globals -----
    b!("eval", [A], None, |it, _t, a, s| it.eval_code(
        arg(a, 0),
        s.anchor,
        false
    )),
    b!("parseInt", [S, N], None, |it, _t, a, s| {
        let text = string(it, a, 0, s)?.to_std_string();
        let radix = match arg(a, 1) {
            Value::Undefined => 0.0,
            v => it.to_number(&v, s.anchor)?,
        };
        Ok(Value::Number(parse_int(&text, radix)))
    }),
    b!("parseFloat", [S], None, |it, _t, a, s| Ok(Value::Number(
        parse_float(&string(it, a, 0, s)?.to_std_string())
    ))),
    b!("isNaN", [N], None, |it, _t, a, s| Ok(Value::Bool(
        num(it, a, 0, s)?.is_nan()
    ))),
    b!("isFinite", [N], None, |it, _t, a, s| Ok(Value::Bool(
        num(it, a, 0, s)?.is_finite()
    ))),
    b!("escape", [S], None, |it, _t, a, s| Ok(units_value(
        codec::escape(&string(it, a, 0, s)?.flat())
    ))),
    b!("unescape", [S], None, builtin_unescape),
    b!("encodeURIComponent", [S], None, |it, _t, a, s| encode_uri(
        it, a, s, true
    )),
    b!("encodeURI", [S], None, |it, _t, a, s| encode_uri(
        it, a, s, false
    )),
    b!("decodeURIComponent", [S], None, |it, _t, a, s| decode_uri(
        it, a, s, true
    )),
    b!("decodeURI", [S], None, |it, _t, a, s| decode_uri(
        it, a, s, false
    )),
    b!("atob", [S], None, builtin_atob),
    b!("btoa", [S], None, |it, _t, a, s| {
        let input = string(it, a, 0, s)?;
        match codec::btoa(&input.flat()) {
            Some(out) => Ok(Value::str(&out)),
            None => it.engine_error("Error", "String contains an invalid character", s.anchor),
        }
    }),
    b!("setTimeout", [F, N], None, |it, _t, a, s| register_timer(
        it,
        "setTimeout",
        a,
        s
    )),
    b!("setInterval", [F, N], None, |it, _t, a, s| register_timer(
        it,
        "setInterval",
        a,
        s
    )),
    b!("clearTimeout", [N], None, |_it, _t, _a, _s| Ok(
        Value::Undefined
    )),
    b!("clearInterval", [N], None, |_it, _t, _a, _s| Ok(
        Value::Undefined
    )),
    b!("alert", [A], None, |_it, _t, _a, _s| Ok(Value::Undefined)),
    b!("ActiveXObject", [S], None, builtin_activex),
    b!("Object", [A], None, builtin_object),
    b!("Object.keys", [O], None, |it, _t, a, _s| {
        let keys = match it.heap.resolve(arg(a, 0)) {
            Value::Object(id) => it.own_keys(id),
            _ => Vec::new(),
        };
        let items = keys.iter().map(|k| Value::str(k)).collect();
        Ok(it.new_array(items))
    }),
    b!(
        "Object.prototype.hasOwnProperty",
        [S],
        None,
        |it, t, a, s| {
            let key = it.to_key(&arg(a, 0), s.anchor)?;
            Ok(Value::Bool(match it.heap.resolve(t.clone()) {
                Value::Object(id) => it.has_own(id, &key),
                _ => false,
            }))
        }
    ),
    b!("Object.prototype.toString", [], None, |it, t, _a, _s| {
        let class = match it.heap.resolve(t.clone()) {
            Value::Undefined => "Undefined",
            Value::Null => "Null",
            Value::Object(id) => match &it.heap.get(id).kind {
                ObjKind::Array(_) | ObjKind::FakedArray(_) => "Array",
                ObjKind::Function(_) => "Function",
                ObjKind::Error => "Error",
                ObjKind::Date(_) => "Date",
                ObjKind::RegExp { .. } => "RegExp",
                ObjKind::Boxed(Value::String(_)) => "String",
                ObjKind::Boxed(Value::Number(_)) => "Number",
                ObjKind::Boxed(Value::Bool(_)) => "Boolean",
                _ => "Object",
            },
            Value::String(_) => "String",
            Value::Number(_) => "Number",
            Value::Bool(_) => "Boolean",
        };
        Ok(Value::str(&format!("[object {class}]")))
    }),
    b!("Object.prototype.valueOf", [], None, |_it, t, _a, _s| Ok(
        t.clone()
    )),
    b!("Function", [S], S, |it, _t, a, s| it
        .function_ctor(a, s.anchor)),
    b!("Function.prototype.call", [A], A, |it, t, a, s| {
        let this = arg(a, 0);
        let rest = a.get(1..).unwrap_or(&[]).to_vec();
        it.call_value(t.clone(), this, rest, s.anchor, "call")
    }),
    b!("Function.prototype.apply", [A, A], None, |it, t, a, s| {
        let this = arg(a, 0);
        let rest = match arg(a, 1) {
            Value::Undefined | Value::Null => Vec::new(),
            v => array_like_items(it, &v, s)?,
        };
        it.call_value(t.clone(), this, rest, s.anchor, "apply")
    }),
    b!("Function.prototype.bind", [A], A, |it, t, a, s| {
        let Value::Object(target) = it.heap.resolve(t.clone()) else {
            return it.engine_error("TypeError", "Bind must be called on a function", s.anchor);
        };
        if !it.heap.is_callable(target) {
            return it.engine_error("TypeError", "Bind must be called on a function", s.anchor);
        }
        let kind = ObjKind::Function(Callable::Bound {
            target,
            this: arg(a, 0),
            args: a.get(1..).unwrap_or(&[]).to_vec(),
        });
        let proto = it.realm.function_proto;
        Ok(Value::Object(it.alloc(kind, Some(proto))))
    }),
    b!("Function.prototype.toString", [], None, |it, t, _a, _s| Ok(
        Value::str(&function_source(it, t))
    )),
    b!("Array", [], A, builtin_array),
    b!("Array.isArray", [A], None, |it, _t, a, _s| {
        Ok(Value::Bool(
            matches!(it.heap.resolve(arg(a, 0)), Value::Object(id) if matches!(it.heap.get(id).kind, ObjKind::Array(_) | ObjKind::FakedArray(_))),
        ))
    }),
    b!("Array.prototype.push", [], A, array_push),
    b!("Array.prototype.pop", [], None, |it, t, _a, s| {
        let mut items = array_like_items(it, t, s)?;
        let v = items.pop().unwrap_or(Value::Undefined);
        store_items(it, t, items);
        Ok(v)
    }),
    b!("Array.prototype.shift", [], None, |it, t, _a, s| {
        let mut items = array_like_items(it, t, s)?;
        let v = if items.is_empty() {
            Value::Undefined
        } else {
            items.remove(0)
        };
        store_items(it, t, items);
        Ok(v)
    }),
    b!("Array.prototype.unshift", [], A, |it, t, a, s| {
        let mut items = array_like_items(it, t, s)?;
        items.splice(0..0, a.iter().cloned());
        let n = items.len();
        store_items(it, t, items);
        Ok(Value::Number(n as f64))
    }),
    b!("Array.prototype.join", [S], None, |it, t, a, s| {
        let sep = match arg(a, 0) {
            Value::Undefined => JsStr::from(","),
            v => it.to_string(&v, s.anchor)?,
        };
        array_join(it, t, &sep, s)
    }),
    b!("Array.prototype.toString", [], None, |it, t, _a, s| {
        array_join(it, t, &JsStr::from(","), s)
    }),
    b!("Array.prototype.reverse", [], None, |it, t, _a, s| {
        let mut items = array_like_items(it, t, s)?;
        items.reverse();
        store_items(it, t, items);
        Ok(t.clone())
    }),
    b!("Array.prototype.slice", [N, N], None, |it, t, a, s| {
        let items = array_like_items(it, t, s)?;
        let (start, end) = slice_range(it, a, items.len(), s)?;
        let out = items.get(start..end.max(start)).unwrap_or(&[]).to_vec();
        Ok(it.new_array(out))
    }),
    b!("Array.prototype.splice", [N, N], A, |it, t, a, s| {
        let mut items = array_like_items(it, t, s)?;
        let len = items.len();
        let start = relative_index(num(it, a, 0, s)?, len);
        let count = match a.get(1) {
            None => len - start,
            Some(v) => {
                let n = it.to_number(v, s.anchor)?;
                (to_integer(n).max(0.0) as usize).min(len - start)
            }
        };
        let removed: Vec<Value> = items
            .splice(start..start + count, a.iter().skip(2).cloned())
            .collect();
        store_items(it, t, items);
        Ok(it.new_array(removed))
    }),
    b!("Array.prototype.concat", [], A, |it, t, a, s| {
        let mut items = array_like_items(it, t, s)?;
        for v in a {
            let rv = it.heap.resolve(v.clone());
            match rv {
                Value::Object(id)
                    if matches!(
                        it.heap.get(id).kind,
                        ObjKind::Array(_) | ObjKind::FakedArray(_)
                    ) =>
                {
                    items.extend(array_like_items(it, &rv, s)?)
                }
                other => items.push(other),
            }
            if items.len() > crate::interp::MAX_ARRAY_LEN {
                return it.engine_error("RangeError", "Invalid array length", s.anchor);
            }
        }
        Ok(it.new_array(items))
    }),
    b!("Array.prototype.indexOf", [A, N], None, |it, t, a, s| {
        let items = array_like_items(it, t, s)?;
        let needle = it.heap.resolve(arg(a, 0));
        let from = match a.get(1) {
            Some(v) => relative_index(it.to_number(v, s.anchor)?, items.len()),
            None => 0,
        };
        let pos = items
            .iter()
            .skip(from)
            .position(|v| it.heap.resolve(v.clone()).strict_equals(&needle));
        Ok(Value::Number(
            pos.map(|p| (p + from) as f64).unwrap_or(-1.0),
        ))
    }),
    b!("Array.prototype.sort", [F], None, array_sort),
    b!("Array.prototype.forEach", [F], None, |it, t, a, s| {
        let f = arg(a, 0);
        for (i, v) in array_like_items(it, t, s)?.into_iter().enumerate() {
            it.host_tick()?;
            it.call_value(
                f.clone(),
                arg(a, 1),
                vec![v, Value::Number(i as f64), t.clone()],
                s.anchor,
                "forEach",
            )?;
        }
        Ok(Value::Undefined)
    }),
    b!("Array.prototype.map", [F], None, |it, t, a, s| {
        let f = arg(a, 0);
        let mut out = Vec::new();
        for (i, v) in array_like_items(it, t, s)?.into_iter().enumerate() {
            it.host_tick()?;
            out.push(it.call_value(
                f.clone(),
                arg(a, 1),
                vec![v, Value::Number(i as f64), t.clone()],
                s.anchor,
                "map",
            )?);
        }
        Ok(it.new_array(out))
    }),
    b!("Array.prototype.filter", [F], None, |it, t, a, s| {
        let f = arg(a, 0);
        let mut out = Vec::new();
        for (i, v) in array_like_items(it, t, s)?.into_iter().enumerate() {
            it.host_tick()?;
            let keep = it.call_value(
                f.clone(),
                arg(a, 1),
                vec![v.clone(), Value::Number(i as f64), t.clone()],
                s.anchor,
                "filter",
            )?;
            if it.to_boolean(&keep) {
                out.push(v);
            }
        }
        Ok(it.new_array(out))
    }),
    b!("String", [A], None, |it, _t, a, s| {
        let v = if a.is_empty() {
            JsStr::default()
        } else {
            string(it, a, 0, s)?
        };
        box_if_constructed(it, Value::String(v), s)
    }),
    b!("String.fromCharCode", [], N, |it, _t, a, s| {
        let mut out = Vec::with_capacity(a.len());
        for v in a {
            out.push(to_uint16(it.to_number(v, s.anchor)?));
        }
        let value = JsStr::from_units(out);
        if !value.is_empty() {
            it.emit_js(EventKind::DecodeCall, &value, s.anchor);
        }
        Ok(Value::String(value))
    }),
    b!("String.prototype.toString", [], None, |it, t, _a, s| Ok(
        Value::String(this_string(it, t, s)?)
    )),
    b!("String.prototype.valueOf", [], None, |it, t, _a, s| Ok(
        Value::String(this_string(it, t, s)?)
    )),
    b!("String.prototype.charAt", [N], None, |it, t, a, s| {
        let st = this_string(it, t, s)?;
        let i = to_integer(num(it, a, 0, s)?);
        Ok(match (i >= 0.0).then(|| st.unit_at(i as usize)).flatten() {
            Some(u) => units_value(vec![u]),
            None => Value::str(""),
        })
    }),
    b!("String.prototype.charCodeAt", [N], None, |it, t, a, s| {
        let st = this_string(it, t, s)?;
        let i = to_integer(num(it, a, 0, s)?);
        Ok(Value::Number(
            match (i >= 0.0).then(|| st.unit_at(i as usize)).flatten() {
                Some(u) => u as f64,
                None => f64::NAN,
            },
        ))
    }),
    b!("String.prototype.indexOf", [S, N], None, |it, t, a, s| {
        let hay = this_string(it, t, s)?.flat();
        let needle = string(it, a, 0, s)?.flat();
        let from = (to_integer(num(it, a, 1, s)?).max(0.0) as usize).min(hay.len());
        Ok(Value::Number(
            find_units(&hay, &needle, from)
                .map(|p| p as f64)
                .unwrap_or(-1.0),
        ))
    }),
    b!(
        "String.prototype.lastIndexOf",
        [S, N],
        None,
        |it, t, a, s| {
            let hay = this_string(it, t, s)?.flat();
            let needle = string(it, a, 0, s)?.flat();
            let from = match arg(a, 1) {
                Value::Undefined => hay.len(),
                v => {
                    let n = it.to_number(&v, s.anchor)?;
                    if n.is_nan() {
                        hay.len()
                    } else {
                        to_integer(n).max(0.0) as usize
                    }
                }
            };
            Ok(Value::Number(
                rfind_units(&hay, &needle, from)
                    .map(|p| p as f64)
                    .unwrap_or(-1.0),
            ))
        }
    ),
    b!("String.prototype.substring", [N, N], None, |it, t, a, s| {
        let st = this_string(it, t, s)?.flat();
        let len = st.len() as f64;
        let clamp = |x: f64| to_integer(x).clamp(0.0, len) as usize;
        let start = clamp(num(it, a, 0, s)?);
        let end = match arg(a, 1) {
            Value::Undefined => st.len(),
            v => clamp(it.to_number(&v, s.anchor)?),
        };
        let (lo, hi) = if start <= end {
            (start, end)
        } else {
            (end, start)
        };
        Ok(units_value(st[lo..hi].to_vec()))
    }),
    b!("String.prototype.substr", [N, N], None, |it, t, a, s| {
        let st = this_string(it, t, s)?.flat();
        let start = relative_index(num(it, a, 0, s)?, st.len());
        let count = match arg(a, 1) {
            Value::Undefined => st.len() - start,
            v => (to_integer(it.to_number(&v, s.anchor)?).max(0.0) as usize).min(st.len() - start),
        };
        Ok(units_value(st[start..start + count].to_vec()))
    }),
    b!("String.prototype.slice", [N, N], None, |it, t, a, s| {
        let st = this_string(it, t, s)?.flat();
        let (start, end) = slice_range(it, a, st.len(), s)?;
        Ok(units_value(
            st.get(start..end.max(start)).unwrap_or(&[]).to_vec(),
        ))
    }),
    b!("String.prototype.split", [A, N], None, string_split),
    b!("String.prototype.replace", [A, A], None, string_replace),
    b!("String.prototype.match", [A], None, string_match),
    b!("String.prototype.search", [A], None, |it, t, a, s| {
        let st = this_string(it, t, s)?;
        let (re, _) = regex_arg(it, &arg(a, 0), s)?;
        let Some(re) = re else {
            return Ok(Value::Number(-1.0));
        };
        let text = st.to_std_string();
        Ok(Value::Number(
            re.find(&text)
                .map(|m| utf16_len(&text[..m.start()]) as f64)
                .unwrap_or(-1.0),
        ))
    }),
    b!("String.prototype.toUpperCase", [], None, |it, t, _a, s| Ok(
        Value::str(&this_string(it, t, s)?.to_std_string().to_uppercase())
    )),
    b!("String.prototype.toLowerCase", [], None, |it, t, _a, s| Ok(
        Value::str(&this_string(it, t, s)?.to_std_string().to_lowercase())
    )),
    b!("String.prototype.trim", [], None, |it, t, _a, s| Ok(
        Value::str(trim_js(&this_string(it, t, s)?.to_std_string()))
    )),
    b!("String.prototype.concat", [], S, |it, t, a, s| {
        let mut acc = Value::String(this_string(it, t, s)?);
        for v in a {
            let piece = it.to_string(v, s.anchor)?;
            let Value::String(cur) = acc else {
                unreachable!()
            };
            acc = it.concat(&cur, &piece, s.anchor)?;
        }
        Ok(acc)
    }),
    b!("Number", [A], None, |it, _t, a, s| {
        let n = if a.is_empty() { 0.0 } else { num(it, a, 0, s)? };
        box_if_constructed(it, Value::Number(n), s)
    }),
    b!("Number.prototype.toString", [N], None, |it, t, a, s| {
        let x = this_number(it, t, s)?;
        let radix = match arg(a, 0) {
            Value::Undefined => 10.0,
            v => to_integer(it.to_number(&v, s.anchor)?),
        };
        if !(2.0..=36.0).contains(&radix) {
            return it.engine_error(
                "RangeError",
                "toString() radix must be between 2 and 36",
                s.anchor,
            );
        }
        Ok(Value::str(&number_to_radix_string(x, radix as u32)))
    }),
    b!("Number.prototype.toFixed", [N], None, |it, t, a, s| {
        let x = this_number(it, t, s)?;
        let d = to_integer(num(it, a, 0, s)?);
        if !(0.0..=100.0).contains(&d) {
            return it.engine_error(
                "RangeError",
                "toFixed() digits argument must be between 0 and 100",
                s.anchor,
            );
        }
        if !x.is_finite() || x.abs() >= 1e21 {
            return Ok(Value::str(&number_to_string(x)));
        }
        Ok(Value::str(&format!("{:.*}", d as usize, x)))
    }),
    b!("Number.prototype.valueOf", [], None, |it, t, _a, s| Ok(
        Value::Number(this_number(it, t, s)?)
    )),
    b!("Boolean", [A], None, |it, _t, a, s| {
        let v = it.to_boolean(&arg(a, 0));
        box_if_constructed(it, Value::Bool(v), s)
    }),
    b!("Boolean.prototype.toString", [], None, |it, t, _a, _s| Ok(
        Value::str(if boxed_bool(it, t) { "true" } else { "false" })
    )),
    b!("Boolean.prototype.valueOf", [], None, |it, t, _a, _s| Ok(
        Value::Bool(boxed_bool(it, t))
    )),
    // ----- Math -----
    math1!("Math.abs", f64::abs),
    math1!("Math.floor", f64::floor),
    math1!("Math.ceil", f64::ceil),
    math1!("Math.round", |x| if x.is_finite() {
        (x + 0.5).floor()
    } else {
        x
    }),
    math1!("Math.sqrt", f64::sqrt),
    math1!("Math.sin", f64::sin),
    math1!("Math.cos", f64::cos),
    math1!("Math.tan", f64::tan),
    math1!("Math.asin", f64::asin),
    math1!("Math.acos", f64::acos),
    math1!("Math.atan", f64::atan),
    math1!("Math.exp", f64::exp),
    math1!("Math.log", f64::ln),
    b!("Math.atan2", [N, N], None, |it, _t, a, s| Ok(
        Value::Number(num(it, a, 0, s)?.atan2(num(it, a, 1, s)?))
    )),
    b!("Math.pow", [N, N], None, |it, _t, a, s| {
        let (x, y) = (num(it, a, 0, s)?, num(it, a, 1, s)?);
        Ok(Value::Number(
            if y.is_nan() || (x.abs() == 1.0 && y.is_infinite()) {
                f64::NAN
            } else {
                x.powf(y)
            },
        ))
    }),
    b!("Math.max", [], N, |it, _t, a, s| {
        let mut acc = f64::NEG_INFINITY;
        for i in 0..a.len() {
            let x = num(it, a, i, s)?;
            acc = if x.is_nan() || acc.is_nan() {
                f64::NAN
            } else {
                acc.max(x)
            };
        }
        Ok(Value::Number(acc))
    }),
    b!("Math.min", [], N, |it, _t, a, s| {
        let mut acc = f64::INFINITY;
        for i in 0..a.len() {
            let x = num(it, a, i, s)?;
            acc = if x.is_nan() || acc.is_nan() {
                f64::NAN
            } else {
                acc.min(x)
            };
        }
        Ok(Value::Number(acc))
    }),
    b!("Math.random", [], None, |it, _t, _a, _s| Ok(Value::Number(
        it.numbers.gen_unit()
    ))),
    // ----- Date -----
    b!("Date", [], A, builtin_date),
    b!("Date.now", [], None, |_it, _t, _a, _s| Ok(Value::Number(
        FIXED_NOW_MS
    ))),
    date_get!("Date.prototype.getTime", |d| d.timestamp_millis() as f64),
    date_get!("Date.prototype.valueOf", |d| d.timestamp_millis() as f64),
    date_get!("Date.prototype.getFullYear", |d| d.year() as f64),
    date_get!("Date.prototype.getYear", |d| (d.year() - 1900) as f64),
    date_get!("Date.prototype.getMonth", |d| d.month0() as f64),
    date_get!("Date.prototype.getDate", |d| d.day() as f64),
    date_get!(
        "Date.prototype.getDay",
        |d| d.weekday().num_days_from_sunday() as f64
    ),
    date_get!("Date.prototype.getHours", |d| d.hour() as f64),
    date_get!("Date.prototype.getMinutes", |d| d.minute() as f64),
    date_get!("Date.prototype.getSeconds", |d| d.second() as f64),
    date_get!(
        "Date.prototype.getMilliseconds",
        |d| (d.timestamp_subsec_millis()) as f64
    ),
    date_get!("Date.prototype.getTimezoneOffset", |_d| 0.0),
    b!("Date.prototype.toString", [], None, |it, t, _a, s| {
        let ms = this_date(it, t, s)?;
        Ok(Value::str(&date_string(ms)))
    }),
    b!("Date.prototype.toUTCString", [], None, |it, t, _a, s| {
        let ms = this_date(it, t, s)?;
        Ok(Value::str(
            &date_of(ms)
                .map(|d| d.format("%a, %d %b %Y %H:%M:%S GMT").to_string())
                .unwrap_or_else(|| "Invalid Date".into()),
        ))
    }),
    b!("Date.prototype.setTime", [N], None, |it, t, a, s| {
        let ms = time_clip(num(it, a, 0, s)?);
        if let Value::Object(id) = it.heap.resolve(t.clone()) {
            if let ObjKind::Date(slot) = &mut it.heap.get_mut(id).kind {
                *slot = ms;
                return Ok(Value::Number(ms));
            }
        }
        it.engine_error("TypeError", "this is not a Date object.", s.anchor)
    }),
    // ----- RegExp -----
    b!("RegExp", [S, S], None, builtin_regexp),
    b!("RegExp.prototype.test", [S], None, |it, t, a, s| {
        let r = regexp_exec(it, t, &arg(a, 0), s)?;
        Ok(Value::Bool(!matches!(r, Value::Null)))
    }),
    b!("RegExp.prototype.exec", [S], None, |it, t, a, s| {
        regexp_exec(it, t, &arg(a, 0), s)
    }),
    b!("RegExp.prototype.toString", [], None, |it, t, _a, _s| {
        Ok(Value::str(&match it.heap.resolve(t.clone()) {
            Value::Object(id) => match &it.heap.get(id).kind {
                ObjKind::RegExp { source, flags } => format!("/{source}/{flags}"),
                _ => "/(?:)/".into(),
            },
            _ => "/(?:)/".into(),
        }))
    }),
    // ----- errors -----
    error_ctor!("Error"),
    error_ctor!("TypeError"),
    error_ctor!("RangeError"),
    error_ctor!("SyntaxError"),
    error_ctor!("ReferenceError"),
    error_ctor!("EvalError"),
    error_ctor!("URIError"),
    b!("Error.prototype.toString", [], None, |it, t, _a, s| {
        let Value::Object(id) = it.heap.resolve(t.clone()) else {
            return Ok(Value::str("Error"));
        };
        let name = it.get_prop(id, "name").unwrap_or(Value::str("Error"));
        let name = it.to_string(&name, s.anchor)?.to_std_string();
        let msg = it.get_prop(id, "message").unwrap_or(Value::str(""));
        let msg = it.to_string(&msg, s.anchor)?.to_std_string();
        Ok(Value::str(&if msg.is_empty() {
            name
        } else {
            format!("{name}: {msg}")
        }))
    }),
    // ----- document -----
    b!("document.write", [], S, |it, _t, a, s| document_write(
        it, a, s, ""
    )),
    b!("document.writeln", [], S, |it, _t, a, s| document_write(
        it, a, s, "\n"
    )),
    b!("document.createElement", [S], None, |it, _t, a, s| {
        let tag = string(it, a, 0, s)?.to_std_string().to_uppercase();
        let el = it.new_object();
        let style = it.new_object();
        it.put_plain(el, "tagName", Value::str(&tag));
        it.put_plain(el, "style", Value::Object(style));
        Ok(Value::Object(el))
    }),
];

// ----- argument helpers -----

fn arg(args: &[Value], i: usize) -> Value {
    args.get(i).cloned().unwrap_or(Value::Undefined)
}

fn num(it: &mut Interp, args: &[Value], i: usize, s: &CallSite) -> R<f64> {
    it.to_number(&arg(args, i), s.anchor)
}

fn string(it: &mut Interp, args: &[Value], i: usize, s: &CallSite) -> R<JsStr> {
    it.to_string(&arg(args, i), s.anchor)
}

fn units_value(units: Vec<u16>) -> Value {
    Value::String(JsStr::from_units(units))
}

fn this_string(it: &mut Interp, this: &Value, s: &CallSite) -> R<JsStr> {
    match it.heap.resolve(this.clone()) {
        Value::String(st) => Ok(st),
        v => it.to_string(&v, s.anchor),
    }
}

fn this_number(it: &mut Interp, this: &Value, s: &CallSite) -> R<f64> {
    match it.heap.resolve(this.clone()) {
        Value::Number(n) => Ok(n),
        Value::Object(id) => match &it.heap.get(id).kind {
            ObjKind::Boxed(Value::Number(n)) => Ok(*n),
            _ => it.to_number(&Value::Object(id), s.anchor),
        },
        v => it.to_number(&v, s.anchor),
    }
}

fn boxed_bool(it: &Interp, this: &Value) -> bool {
    match it.heap.resolve(this.clone()) {
        Value::Bool(b) => b,
        Value::Object(id) => matches!(it.heap.get(id).kind, ObjKind::Boxed(Value::Bool(true))),
        _ => false,
    }
}

fn box_if_constructed(it: &mut Interp, v: Value, s: &CallSite) -> R<Value> {
    if !s.construct {
        return Ok(v);
    }
    let proto = match &v {
        Value::String(_) => it.realm.string_proto,
        Value::Number(_) => it.realm.number_proto,
        _ => it.realm.boolean_proto,
    };
    Ok(Value::Object(it.alloc(ObjKind::Boxed(v), Some(proto))))
}

/// Index relative to `len`, counting from the end when negative.
fn relative_index(n: f64, len: usize) -> usize {
    let n = to_integer(n);
    if n < 0.0 {
        (len as f64 + n).max(0.0) as usize
    } else {
        n.min(len as f64) as usize
    }
}

fn slice_range(it: &mut Interp, a: &[Value], len: usize, s: &CallSite) -> R<(usize, usize)> {
    let start = relative_index(num(it, a, 0, s)?, len);
    let end = match arg(a, 1) {
        Value::Undefined => len,
        v => relative_index(it.to_number(&v, s.anchor)?, len),
    };
    Ok((start, end))
}

fn find_units(hay: &[u16], needle: &[u16], from: usize) -> Option<usize> {
    if needle.is_empty() {
        return Some(from.min(hay.len()));
    }
    if needle.len() > hay.len() {
        return None;
    }
    (from..=hay.len() - needle.len()).find(|&i| hay[i..i + needle.len()] == *needle)
}

fn rfind_units(hay: &[u16], needle: &[u16], from: usize) -> Option<usize> {
    if needle.len() > hay.len() {
        return None;
    }
    let last = (hay.len() - needle.len()).min(from);
    (0..=last)
        .rev()
        .find(|&i| hay[i..i + needle.len()] == *needle)
}

fn utf16_len(s: &str) -> usize {
    s.encode_utf16().count()
}

// ----- globals -----

fn builtin_unescape(it: &mut Interp, _t: &Value, a: &[Value], s: &CallSite) -> R<Value> {
    let input = string(it, a, 0, s)?;
    let units = input.flat();
    if codec::longest_unicode_escape_run(&units) >= 32 {
        it.emit_js(EventKind::ShellcodePolicyHit, &input, s.anchor);
    }
    if !input.is_empty() {
        it.emit_js(EventKind::DecodeCall, &input, s.anchor);
    }
    Ok(units_value(codec::unescape(&units)))
}

fn builtin_atob(it: &mut Interp, _t: &Value, a: &[Value], s: &CallSite) -> R<Value> {
    if s.was_faked(0) {
        return Ok(Value::str(""));
    }
    let input = string(it, a, 0, s)?;
    if !input.is_empty() {
        it.emit_js(EventKind::DecodeCall, &input, s.anchor);
    }
    match codec::atob(&input.flat()) {
        Some(out) => Ok(units_value(out)),
        None => it.engine_error(
            "Error",
            "The string to be decoded is not correctly encoded.",
            s.anchor,
        ),
    }
}

fn encode_uri(it: &mut Interp, a: &[Value], s: &CallSite, component: bool) -> R<Value> {
    let input = string(it, a, 0, s)?;
    match codec::encode_uri(&input.flat(), component) {
        Ok(out) => Ok(Value::str(&out)),
        Err(_) => it.engine_error("URIError", "URI malformed", s.anchor),
    }
}

fn decode_uri(it: &mut Interp, a: &[Value], s: &CallSite, component: bool) -> R<Value> {
    let input = string(it, a, 0, s)?;
    match codec::decode_uri(&input.flat(), component) {
        Ok(out) => Ok(units_value(out)),
        Err(_) => it.engine_error("URIError", "URI malformed", s.anchor),
    }
}

fn register_timer(it: &mut Interp, api: &str, a: &[Value], s: &CallSite) -> R<Value> {
    it.timer_counter += 1.0;
    let id = it.timer_counter;
    let target = it.heap.resolve(arg(a, 0));
    match &target {
        Value::Object(fid) if matches!(it.heap.get(*fid).kind, ObjKind::Function(_)) => {
            let label = it.function_label(*fid);
            it.emit(EventKind::TimerRegistered, &label, s.anchor);
            it.enqueue_callback(api, s.anchor, CbTarget::Func(*fid));
        }
        Value::String(code) => {
            it.emit_js(EventKind::TimerRegistered, code, s.anchor);
            let text = code.to_std_string();
            let unit = it.next_dynamic_name(s.anchor);
            if crate::syntax::parse(&text, &unit).is_ok() {
                it.add_new_js(unit.clone(), text.clone(), DynamicOrigin::Timer, s.anchor);
            }
            it.enqueue_callback(api, s.anchor, CbTarget::Code { unit, text });
        }
        other => {
            let label = it.describe(other);
            it.emit(EventKind::TimerRegistered, &label, s.anchor);
        }
    }
    Ok(Value::Number(id))
}

fn builtin_activex(it: &mut Interp, _t: &Value, a: &[Value], s: &CallSite) -> R<Value> {
    let name = string(it, a, 0, s)?.to_std_string();
    let payload = if name.is_empty() {
        "<unnamed>".to_string()
    } else {
        name.clone()
    };
    it.emit(EventKind::ActivexProbe, &payload, s.anchor);
    match it.config.activex {
        ActiveXMode::Throw => {
            let err = it.make_error("Error", "Automation server can't create object");
            Err(Abort::Throw(err))
        }
        ActiveXMode::Fake => Ok(it.fake(&payload, FakedOrigin::Er1Lookup, s.anchor)),
    }
}

fn builtin_object(it: &mut Interp, _t: &Value, a: &[Value], _s: &CallSite) -> R<Value> {
    let v = it.heap.resolve(arg(a, 0));
    Ok(match v {
        Value::Object(_) => v,
        Value::Undefined | Value::Null => Value::Object(it.new_object()),
        prim => {
            let proto = it.primitive_proto(&prim).unwrap_or(it.realm.object_proto);
            Value::Object(it.alloc(ObjKind::Boxed(prim), Some(proto)))
        }
    })
}

fn make_error_value(it: &mut Interp, kind: &str, a: &[Value], s: &CallSite) -> R<Value> {
    let proto = it.realm.error_proto_for(kind);
    let id = it.alloc(ObjKind::Error, Some(proto));
    if let Some(v) = a.first() {
        if !matches!(it.heap.resolve(v.clone()), Value::Undefined) {
            let msg = it.to_string(v, s.anchor)?;
            it.put_plain(id, "message", Value::String(msg));
        }
    }
    Ok(Value::Object(id))
}

fn document_write(it: &mut Interp, a: &[Value], s: &CallSite, suffix: &str) -> R<Value> {
    let mut text = String::new();
    for v in a {
        text.push_str(&it.to_string(v, s.anchor)?.to_std_string());
    }
    text.push_str(suffix);
    if !text.is_empty() {
        it.emit(EventKind::DocumentWrite, &text, s.anchor);
    }
    if it.write_anchor.is_none() {
        it.write_anchor = Some(s.anchor.clone());
    }
    if it.write_buffer.len() + text.len() <= MAX_WRITE_BUFFER {
        it.write_buffer.push_str(&text);
    }
    Ok(Value::Undefined)
}

// ----- arrays -----

fn builtin_array(it: &mut Interp, _t: &Value, a: &[Value], s: &CallSite) -> R<Value> {
    if a.len() == 1 {
        if let Value::Number(n) = it.heap.resolve(a[0].clone()) {
            if n < 0.0 || n.fract() != 0.0 || n > crate::interp::MAX_ARRAY_LEN as f64 || n.is_nan()
            {
                return it.engine_error("RangeError", "Invalid array length", s.anchor);
            }
            return Ok(it.new_array(vec![Value::Undefined; n as usize]));
        }
    }
    Ok(it.new_array(a.to_vec()))
}

/// Elements of an array or array-like `this`.
fn array_like_items(it: &mut Interp, v: &Value, s: &CallSite) -> R<Vec<Value>> {
    let v = it.heap.resolve(v.clone());
    match &v {
        Value::String(st) => Ok(st.flat().iter().map(|u| units_value(vec![*u])).collect()),
        Value::Object(id) => {
            let id = *id;
            let len = match &it.heap.get(id).kind {
                ObjKind::Array(items) => return Ok(items.clone()),
                ObjKind::FakedArray(fa) => fa.len.min(MAX_ARRAY_LIKE as u64) as usize,
                _ => match it.get_prop(id, "length") {
                    Some(l) => {
                        let n = it.to_number(&l, s.anchor)?;
                        if n.is_finite() && n > 0.0 {
                            (n as usize).min(MAX_ARRAY_LIKE)
                        } else {
                            0
                        }
                    }
                    None => 0,
                },
            };
            let mut out = Vec::with_capacity(len);
            for i in 0..len {
                let key: Rc<str> = Rc::from(i.to_string());
                let item = if matches!(it.heap.get(id).kind, ObjKind::FakedArray(_)) {
                    it.read_prop(&v, &key, &|| format!("[{i}]"), s.anchor)?
                } else {
                    it.get_prop(id, &key).unwrap_or(Value::Undefined)
                };
                out.push(item);
            }
            Ok(out)
        }
        _ => Ok(Vec::new()),
    }
}

fn store_items(it: &mut Interp, v: &Value, items: Vec<Value>) {
    let Value::Object(id) = it.heap.resolve(v.clone()) else {
        return;
    };
    let obj = it.heap.get_mut(id);
    match &mut obj.kind {
        ObjKind::Array(slot) => *slot = items,
        ObjKind::FakedArray(_) => obj.kind = ObjKind::Array(items),
        ObjKind::Ordinary => {
            let n = items.len();
            for (i, item) in items.into_iter().enumerate() {
                obj.props.insert(Rc::from(i.to_string()), item);
            }
            obj.props
                .insert(Rc::from("length"), Value::Number(n as f64));
        }
        _ => {}
    }
}

fn array_push(it: &mut Interp, t: &Value, a: &[Value], s: &CallSite) -> R<Value> {
    for v in a {
        it.note_indexed_write(v);
    }
    if let Value::Object(id) = it.heap.resolve(t.clone()) {
        match &mut it.heap.get_mut(id).kind {
            ObjKind::Array(items) => {
                if items.len() + a.len() > crate::interp::MAX_ARRAY_LEN * 4 {
                    return it.engine_error("RangeError", "Invalid array length", s.anchor);
                }
                items.extend(a.iter().cloned());
                return Ok(Value::Number(items.len() as f64));
            }
            ObjKind::FakedArray(fa) => {
                for v in a {
                    fa.elems.insert(fa.len, v.clone());
                    fa.len += 1;
                }
                return Ok(Value::Number(fa.len as f64));
            }
            _ => {}
        }
    }
    let mut items = array_like_items(it, t, s)?;
    items.extend(a.iter().cloned());
    let n = items.len();
    store_items(it, t, items);
    Ok(Value::Number(n as f64))
}

fn array_join(it: &mut Interp, t: &Value, sep: &JsStr, s: &CallSite) -> R<Value> {
    let this = it.heap.resolve(t.clone());
    if let Value::Object(id) = this {
        if it.join_stack.contains(&id) {
            return Ok(Value::str(""));
        }
        it.join_stack.push(id);
    }
    let result = (|| {
        let items = array_like_items(it, t, s)?;
        let mut acc = JsStr::default();
        for (i, v) in items.iter().enumerate() {
            it.host_tick()?;
            if i > 0 {
                let Value::String(next) = it.concat(&acc, sep, s.anchor)? else {
                    unreachable!()
                };
                acc = next;
            }
            let piece = match it.heap.resolve(v.clone()) {
                Value::Undefined | Value::Null => continue,
                other => it.to_string(&other, s.anchor)?,
            };
            let Value::String(next) = it.concat(&acc, &piece, s.anchor)? else {
                unreachable!()
            };
            acc = next;
        }
        Ok(Value::String(acc))
    })();
    if let Value::Object(_) = this {
        it.join_stack.pop();
    }
    result
}

fn array_sort(it: &mut Interp, t: &Value, a: &[Value], s: &CallSite) -> R<Value> {
    let items = array_like_items(it, t, s)?;
    let cmp = match it.heap.resolve(arg(a, 0)) {
        Value::Undefined => None,
        v => Some(v),
    };
    let (mut defined, undefined): (Vec<Value>, Vec<Value>) = items
        .into_iter()
        .partition(|v| !matches!(it.heap.resolve(v.clone()), Value::Undefined));
    // bottom-up merge sort; the comparator may run script code and fail
    let mut width = 1;
    let n = defined.len();
    while width < n {
        let mut merged = Vec::with_capacity(n);
        let mut lo = 0;
        while lo < n {
            let mid = (lo + width).min(n);
            let hi = (lo + 2 * width).min(n);
            let (mut i, mut j) = (lo, mid);
            while i < mid && j < hi {
                it.host_tick()?;
                if compare_values(it, &defined[j], &defined[i], cmp.as_ref(), s)? == Ordering::Less
                {
                    merged.push(defined[j].clone());
                    j += 1;
                } else {
                    merged.push(defined[i].clone());
                    i += 1;
                }
            }
            merged.extend_from_slice(&defined[i..mid]);
            merged.extend_from_slice(&defined[j..hi]);
            lo = hi;
        }
        defined = merged;
        width *= 2;
    }
    defined.extend(undefined);
    store_items(it, t, defined);
    Ok(t.clone())
}

fn compare_values(
    it: &mut Interp,
    x: &Value,
    y: &Value,
    cmp: Option<&Value>,
    s: &CallSite,
) -> R<Ordering> {
    match cmp {
        Some(f) => {
            let r = it.call_value(
                f.clone(),
                Value::Undefined,
                vec![x.clone(), y.clone()],
                s.anchor,
                "sort",
            )?;
            let n = it.to_number(&r, s.anchor)?;
            Ok(if n < 0.0 {
                Ordering::Less
            } else if n > 0.0 {
                Ordering::Greater
            } else {
                Ordering::Equal
            })
        }
        None => {
            let a = it.to_string(x, s.anchor)?.flat();
            let b = it.to_string(y, s.anchor)?.flat();
            Ok(a[..].cmp(&b[..]))
        }
    }
}

fn function_source(it: &Interp, t: &Value) -> String {
    let Value::Object(id) = it.heap.resolve(t.clone()) else {
        return "function () { [native code] }".into();
    };
    match &it.heap.get(id).kind {
        ObjKind::Function(Callable::User { func, source, .. }) => {
            let (start, end) = func.source_range;
            source
                .get(start..end.min(source.len()))
                .map(str::to_string)
                .unwrap_or_else(|| "function () {}".into())
        }
        ObjKind::Function(Callable::Builtin(i)) => {
            let name = super::builtin_name(*i).rsplit('.').next().unwrap_or("");
            format!("function {name}() {{ [native code] }}")
        }
        _ => "function () { [native code] }".into(),
    }
}

// ----- strings and regular expressions -----

/// Compiles a script regular expression; `None` when the engine cannot express it.
pub(crate) fn compile_regex(it: &mut Interp, source: &str, flags: &str) -> Option<Rc<Regex>> {
    let key = (source.to_string(), flags.to_string());
    if let Some(r) = it.regex_cache.get(&key) {
        return r.clone();
    }
    let mut inline = String::new();
    for f in flags.chars() {
        match f {
            'i' | 'm' | 's' => inline.push(f),
            _ => {}
        }
    }
    let translated = translate_regex(source);
    let pattern = if inline.is_empty() {
        translated
    } else {
        format!("(?{inline}){translated}")
    };
    let compiled = regex::RegexBuilder::new(&pattern)
        .size_limit(1 << 22)
        .build()
        .ok()
        .map(Rc::new);
    if it.regex_cache.len() > 4096 {
        it.regex_cache.clear();
    }
    it.regex_cache.insert(key, compiled.clone());
    compiled
}

/// Rewrites script-only regex syntax into the equivalent for the regex crate.
fn translate_regex(source: &str) -> String {
    let mut out = String::with_capacity(source.len());
    let mut chars = source.chars().peekable();
    let mut in_class = false;
    while let Some(c) = chars.next() {
        match c {
            '\\' => {
                let Some(n) = chars.next() else {
                    out.push_str("\\\\");
                    break;
                };
                match n {
                    'd'
                    | 'D'
                    | 'w'
                    | 'W'
                    | 's'
                    | 'S'
                    | 'b'
                    | 'B'
                    | 'n'
                    | 'r'
                    | 't'
                    | 'f'
                    | 'v'
                    | '0'..='9' => {
                        if n == 'v' {
                            out.push_str("\\x0B");
                        } else if n == '0' {
                            out.push_str("\\x00");
                        } else {
                            out.push('\\');
                            out.push(n);
                        }
                    }
                    'x' | 'u' => {
                        let len = if n == 'x' { 2 } else { 4 };
                        let hex: String = (0..len)
                            .filter_map(|_| chars.next_if(|c| c.is_ascii_hexdigit()))
                            .collect();
                        if hex.len() == len {
                            out.push_str(&format!("\\x{{{hex}}}"));
                        } else {
                            out.push(n);
                            out.push_str(&hex);
                        }
                    }
                    c if c.is_ascii_alphanumeric() => out.push(c),
                    c => {
                        out.push('\\');
                        out.push(c);
                    }
                }
            }
            '[' if !in_class => {
                in_class = true;
                out.push('[');
                if chars.peek() == Some(&']') {
                    chars.next();
                    out.push_str("^\\s\\S]");
                    in_class = false;
                } else if chars.peek() == Some(&'^') {
                    chars.next();
                    if chars.peek() == Some(&']') {
                        chars.next();
                        out.push_str("\\s\\S]");
                        in_class = false;
                    } else {
                        out.push('^');
                    }
                }
            }
            '[' if in_class => out.push_str("\\["),
            ']' if in_class => {
                in_class = false;
                out.push(']');
            }
            c => out.push(c),
        }
    }
    out
}

/// The compiled regex and global flag of a RegExp argument, or a literal
/// pattern built from its string value.
fn regex_arg(it: &mut Interp, v: &Value, s: &CallSite) -> R<(Option<Rc<Regex>>, bool)> {
    let v = it.heap.resolve(v.clone());
    if let Value::Object(id) = v {
        if let ObjKind::RegExp { source, flags } = &it.heap.get(id).kind {
            let (source, flags) = (source.clone(), flags.clone());
            return Ok((compile_regex(it, &source, &flags), flags.contains('g')));
        }
    }
    let text = it.to_string(&v, s.anchor)?.to_std_string();
    Ok((compile_regex(it, &regex::escape(&text), ""), false))
}

fn builtin_regexp(it: &mut Interp, _t: &Value, a: &[Value], s: &CallSite) -> R<Value> {
    let first = it.heap.resolve(arg(a, 0));
    let (source, mut flags) = match &first {
        Value::Object(id) => match &it.heap.get(*id).kind {
            ObjKind::RegExp { source, flags } => (source.to_string(), flags.to_string()),
            _ => (
                it.to_string(&first, s.anchor)?.to_std_string(),
                String::new(),
            ),
        },
        Value::Undefined => ("(?:)".to_string(), String::new()),
        _ => (
            it.to_string(&first, s.anchor)?.to_std_string(),
            String::new(),
        ),
    };
    if !matches!(it.heap.resolve(arg(a, 1)), Value::Undefined) && !s.was_faked(1) {
        flags = string(it, a, 1, s)?.to_std_string();
    }
    if flags.chars().any(|c| !"gimsuy".contains(c)) {
        return it.engine_error(
            "SyntaxError",
            &format!("Invalid flags supplied to RegExp constructor '{flags}'"),
            s.anchor,
        );
    }
    if compile_regex(it, &source, &flags).is_none() {
        return it.engine_error(
            "SyntaxError",
            &format!("Invalid regular expression: /{source}/"),
            s.anchor,
        );
    }
    Ok(it.new_regexp(&source, &flags))
}

fn regexp_exec(it: &mut Interp, t: &Value, input: &Value, s: &CallSite) -> R<Value> {
    let Value::Object(id) = it.heap.resolve(t.clone()) else {
        return it.engine_error(
            "TypeError",
            "RegExp method called on incompatible receiver",
            s.anchor,
        );
    };
    let ObjKind::RegExp { source, flags } = &it.heap.get(id).kind else {
        return it.engine_error(
            "TypeError",
            "RegExp method called on incompatible receiver",
            s.anchor,
        );
    };
    let (source, flags) = (source.clone(), flags.clone());
    let Some(re) = compile_regex(it, &source, &flags) else {
        return Ok(Value::Null);
    };
    let global = flags.contains('g');
    let text_js = it.to_string(input, s.anchor)?;
    let text = text_js.to_std_string();
    let start_u16 = if global {
        let li = it.get_prop(id, "lastIndex").unwrap_or(Value::Number(0.0));
        to_integer(it.to_number(&li, s.anchor)?).max(0.0) as usize
    } else {
        0
    };
    let start_byte = u16_to_byte(&text, start_u16);
    let found = start_byte.and_then(|b| re.captures_at(&text, b));
    let Some(caps) = found else {
        if global {
            it.put_plain(id, "lastIndex", Value::Number(0.0));
        }
        return Ok(Value::Null);
    };
    let m = caps.get(0).expect("whole match");
    let index = utf16_len(&text[..m.start()]);
    if global {
        let end = index + utf16_len(m.as_str());
        it.put_plain(id, "lastIndex", Value::Number(end as f64));
    }
    let items: Vec<Value> = caps
        .iter()
        .map(|g| {
            g.map(|g| Value::str(g.as_str()))
                .unwrap_or(Value::Undefined)
        })
        .collect();
    let arr = it.new_array(items);
    if let Value::Object(aid) = arr {
        it.put_plain(aid, "index", Value::Number(index as f64));
        it.put_plain(aid, "input", Value::String(text_js));
    }
    Ok(arr)
}

fn u16_to_byte(text: &str, target: usize) -> Option<usize> {
    let mut units = 0;
    for (b, c) in text.char_indices() {
        if units >= target {
            return Some(b);
        }
        units += c.len_utf16();
    }
    (units >= target).then_some(text.len())
}

fn string_match(it: &mut Interp, t: &Value, a: &[Value], s: &CallSite) -> R<Value> {
    let st = this_string(it, t, s)?;
    let (re, global) = regex_arg(it, &arg(a, 0), s)?;
    let Some(re) = re else { return Ok(Value::Null) };
    let text = st.to_std_string();
    if !global {
        let Some(caps) = re.captures(&text) else {
            return Ok(Value::Null);
        };
        let m = caps.get(0).expect("whole match");
        let items: Vec<Value> = caps
            .iter()
            .map(|g| {
                g.map(|g| Value::str(g.as_str()))
                    .unwrap_or(Value::Undefined)
            })
            .collect();
        let arr = it.new_array(items);
        if let Value::Object(aid) = arr {
            it.put_plain(
                aid,
                "index",
                Value::Number(utf16_len(&text[..m.start()]) as f64),
            );
            it.put_plain(aid, "input", Value::String(st.clone()));
        }
        return Ok(arr);
    }
    let mut items = Vec::new();
    for m in re.find_iter(&text) {
        it.host_tick()?;
        items.push(Value::str(m.as_str()));
    }
    if items.is_empty() {
        return Ok(Value::Null);
    }
    Ok(it.new_array(items))
}

fn string_split(it: &mut Interp, t: &Value, a: &[Value], s: &CallSite) -> R<Value> {
    let st = this_string(it, t, s)?;
    let limit = match arg(a, 1) {
        Value::Undefined => usize::MAX,
        v => to_uint32(it.to_number(&v, s.anchor)?) as usize,
    };
    let sep = it.heap.resolve(arg(a, 0));
    let mut parts: Vec<Value> = Vec::new();
    let is_regexp = matches!(&sep, Value::Object(id) if matches!(it.heap.get(*id).kind, ObjKind::RegExp { .. }));
    if matches!(sep, Value::Undefined) {
        parts.push(Value::String(st));
    } else if is_regexp {
        let (re, _) = regex_arg(it, &sep, s)?;
        let text = st.to_std_string();
        match re {
            Some(re) => {
                for p in re.split(&text) {
                    it.host_tick()?;
                    parts.push(Value::str(p));
                }
            }
            None => parts.push(Value::String(st)),
        }
    } else {
        let units = st.flat();
        let sep = it.to_string(&sep, s.anchor)?.flat();
        if sep.is_empty() {
            for u in units.iter().take(limit) {
                parts.push(units_value(vec![*u]));
            }
        } else {
            let mut start = 0;
            while let Some(p) = find_units(&units, &sep, start) {
                it.host_tick()?;
                parts.push(units_value(units[start..p].to_vec()));
                start = p + sep.len();
                if parts.len() >= limit {
                    break;
                }
            }
            parts.push(units_value(units[start..].to_vec()));
        }
    }
    parts.truncate(limit);
    Ok(it.new_array(parts))
}

fn expand_template(
    template: &str,
    whole: &str,
    groups: &[Option<String>],
    before: &str,
    after: &str,
) -> String {
    let mut out = String::with_capacity(template.len());
    let bytes: Vec<char> = template.chars().collect();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c != '$' || i + 1 >= bytes.len() {
            out.push(c);
            i += 1;
            continue;
        }
        let n = bytes[i + 1];
        match n {
            '$' => {
                out.push('$');
                i += 2;
            }
            '&' => {
                out.push_str(whole);
                i += 2;
            }
            '`' => {
                out.push_str(before);
                i += 2;
            }
            '\'' => {
                out.push_str(after);
                i += 2;
            }
            '0'..='9' => {
                let mut idx = n.to_digit(10).unwrap_or(0) as usize;
                let mut used = 2;
                if let Some(d2) = bytes.get(i + 2).and_then(|c| c.to_digit(10)) {
                    let two = idx * 10 + d2 as usize;
                    if two >= 1 && two <= groups.len() {
                        idx = two;
                        used = 3;
                    }
                }
                if idx >= 1 && idx <= groups.len() {
                    out.push_str(groups[idx - 1].as_deref().unwrap_or(""));
                    i += used;
                } else {
                    out.push('$');
                    i += 1;
                }
            }
            _ => {
                out.push('$');
                i += 1;
            }
        }
    }
    out
}

fn string_replace(it: &mut Interp, t: &Value, a: &[Value], s: &CallSite) -> R<Value> {
    let st = this_string(it, t, s)?;
    let pattern = it.heap.resolve(arg(a, 0));
    let replacement = it.heap.resolve(arg(a, 1));
    let callable = matches!(&replacement, Value::Object(id) if it.heap.is_callable(*id));
    let template = if callable {
        String::new()
    } else {
        it.to_string(&replacement, s.anchor)?.to_std_string()
    };
    let text = st.to_std_string();

    // (byte start, byte end, groups)
    let mut matches: Vec<(usize, usize, Vec<Option<String>>)> = Vec::new();
    let is_regexp = matches!(&pattern, Value::Object(id) if matches!(it.heap.get(*id).kind, ObjKind::RegExp { .. }));
    if is_regexp {
        let (re, global) = regex_arg(it, &pattern, s)?;
        let Some(re) = re else {
            return Ok(Value::String(st));
        };
        for caps in re.captures_iter(&text) {
            it.host_tick()?;
            let m = caps.get(0).expect("whole match");
            let groups = caps
                .iter()
                .skip(1)
                .map(|g| g.map(|g| g.as_str().to_string()))
                .collect();
            matches.push((m.start(), m.end(), groups));
            if !global {
                break;
            }
        }
    } else {
        let needle = it.to_string(&pattern, s.anchor)?.to_std_string();
        if let Some(p) = text.find(&needle) {
            matches.push((p, p + needle.len(), Vec::new()));
        }
    }
    if matches.is_empty() {
        return Ok(Value::String(st));
    }
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    let mut units_before = 0;
    for (start, end, groups) in matches {
        out.push_str(&text[last..start]);
        units_before += utf16_len(&text[last..start]);
        let whole = &text[start..end];
        let piece = if callable {
            let mut args = vec![Value::str(whole)];
            args.extend(
                groups
                    .iter()
                    .map(|g| g.as_deref().map(Value::str).unwrap_or(Value::Undefined)),
            );
            args.push(Value::Number(units_before as f64));
            args.push(Value::String(st.clone()));
            let r = it.call_value(
                replacement.clone(),
                Value::Undefined,
                args,
                s.anchor,
                "replace",
            )?;
            it.to_string(&r, s.anchor)?.to_std_string()
        } else {
            expand_template(&template, whole, &groups, &text[..start], &text[end..])
        };
        if out.len() + piece.len() > crate::interp::MAX_STRING_LEN {
            return it.engine_error("RangeError", "Invalid string length", s.anchor);
        }
        out.push_str(&piece);
        units_before += utf16_len(whole);
        last = end;
    }
    out.push_str(&text[last..]);
    Ok(Value::str(&out))
}

// ----- dates -----

fn date_of(ms: f64) -> Option<DateTime<Utc>> {
    if !ms.is_finite() {
        return None;
    }
    DateTime::<Utc>::from_timestamp_millis(ms as i64)
}

fn time_clip(ms: f64) -> f64 {
    if !ms.is_finite() || ms.abs() > 8.64e15 {
        f64::NAN
    } else {
        ms.trunc()
    }
}

fn date_string(ms: f64) -> String {
    date_of(ms)
        .map(|d| {
            d.format("%a %b %d %Y %H:%M:%S GMT+0000 (Coordinated Universal Time)")
                .to_string()
        })
        .unwrap_or_else(|| "Invalid Date".into())
}

fn this_date(it: &mut Interp, t: &Value, s: &CallSite) -> R<f64> {
    if let Value::Object(id) = it.heap.resolve(t.clone()) {
        if let ObjKind::Date(ms) = it.heap.get(id).kind {
            return Ok(ms);
        }
    }
    it.engine_error("TypeError", "this is not a Date object.", s.anchor)?;
    Ok(f64::NAN)
}

fn make_date(parts: &[f64]) -> f64 {
    if parts.iter().any(|p| !p.is_finite()) {
        return f64::NAN;
    }
    let get = |i: usize, d: f64| parts.get(i).copied().map(to_integer).unwrap_or(d);
    let mut year = get(0, f64::NAN);
    if (0.0..=99.0).contains(&year) {
        year += 1900.0;
    }
    let month = get(1, 0.0);
    let y = year + (month / 12.0).floor();
    let m = month.rem_euclid(12.0);
    if y.abs() > 300_000.0 {
        return f64::NAN;
    }
    let Some(first) = NaiveDate::from_ymd_opt(y as i32, m as u32 + 1, 1) else {
        return f64::NAN;
    };
    let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("epoch");
    let days = first.signed_duration_since(epoch).num_days() as f64 + get(2, 1.0) - 1.0;
    time_clip(
        days * 86_400_000.0
            + get(3, 0.0) * 3_600_000.0
            + get(4, 0.0) * 60_000.0
            + get(5, 0.0) * 1000.0
            + get(6, 0.0),
    )
}

fn parse_date(text: &str) -> f64 {
    let t = text.trim();
    if let Ok(d) = DateTime::parse_from_rfc3339(t) {
        return d.timestamp_millis() as f64;
    }
    if let Ok(d) = DateTime::parse_from_rfc2822(t) {
        return d.timestamp_millis() as f64;
    }
    for fmt in [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y/%m/%d %H:%M:%S",
    ] {
        if let Ok(d) = NaiveDateTime::parse_from_str(t, fmt) {
            return d.and_utc().timestamp_millis() as f64;
        }
    }
    for fmt in [
        "%Y-%m-%d",
        "%Y/%m/%d",
        "%m/%d/%Y",
        "%b %d, %Y",
        "%B %d, %Y",
        "%d %b %Y",
    ] {
        if let Ok(d) = NaiveDate::parse_from_str(t, fmt) {
            return d
                .and_hms_opt(0, 0, 0)
                .expect("midnight")
                .and_utc()
                .timestamp_millis() as f64;
        }
    }
    f64::NAN
}

fn builtin_date(it: &mut Interp, _t: &Value, a: &[Value], s: &CallSite) -> R<Value> {
    if !s.construct {
        return Ok(Value::str(&date_string(FIXED_NOW_MS)));
    }
    let ms = match a.len() {
        0 => FIXED_NOW_MS,
        1 => match it.heap.resolve(a[0].clone()) {
            Value::Object(id) if matches!(it.heap.get(id).kind, ObjKind::Date(_)) => {
                match it.heap.get(id).kind {
                    ObjKind::Date(ms) => ms,
                    _ => f64::NAN,
                }
            }
            Value::String(st) => parse_date(&st.to_std_string()),
            v => time_clip(it.to_number(&v, s.anchor)?),
        },
        _ => {
            let mut parts = Vec::new();
            for v in a.iter().take(7) {
                parts.push(it.to_number(v, s.anchor)?);
            }
            make_date(&parts)
        }
    };
    let proto = it.realm.date_proto;
    Ok(Value::Object(it.alloc(ObjKind::Date(ms), Some(proto))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_names_are_unique() {
        let mut names: Vec<&str> = BUILTINS.iter().map(|b| b.name).collect();
        names.sort();
        let before = names.len();
        names.dedup();
        assert_eq!(before, names.len());
        assert!(before >= 100);
    }

    #[test]
    fn regex_translation() {
        assert_eq!(translate_regex(r"\x41[^]"), r"\x{41}[\s\S]");
        assert_eq!(translate_regex(r"a\/b"), r"a\/b");
        assert!(Regex::new(&translate_regex(r"^\s*(\d+)\/[a-z]$")).is_ok());
    }

    #[test]
    fn templates() {
        let g = vec![Some("x".to_string())];
        assert_eq!(
            expand_template("[$1|$&|$$|$2]", "ax", &g, "<", ">"),
            "[x|ax|$|$2]"
        );
    }

    #[test]
    fn dates() {
        assert_eq!(make_date(&[2013.0, 5.0, 1.0, 12.0]), FIXED_NOW_MS);
        assert_eq!(parse_date("2013-06-01T12:00:00Z"), FIXED_NOW_MS);
        assert!(parse_date("soon").is_nan());
        assert_eq!(
            date_string(0.0),
            "Thu Jan 01 1970 00:00:00 GMT+0000 (Coordinated Universal Time)"
        );
    }
}
