//! UTF-16 string values with cheap concatenation.
//!
//! Concatenation builds a rope; the flat form is computed on demand and cached.
//! Heap-spray loops produce thousands of multi-kilobyte strings that share
//! their pieces, so they stay cheap until something actually reads them.

use std::cell::OnceCell;
use std::fmt;
use std::rc::Rc;

/// Appends that keep the right leaf under this size copy instead of nesting.
const LEAF_MERGE: usize = 4096;
/// Strings shorter than this are always stored flat.
const FLAT_BELOW: usize = 256;
const MAX_DEPTH: u32 = 2048;

#[derive(Clone)]
pub struct JsStr(Repr);

#[derive(Clone)]
enum Repr {
    Flat(Rc<[u16]>),
    Rope(Rc<Rope>),
}

struct Rope {
    left: JsStr,
    right: JsStr,
    len: usize,
    depth: u32,
    flat: OnceCell<Rc<[u16]>>,
}

impl Drop for Rope {
    // Long append chains would otherwise drop recursively.
    fn drop(&mut self) {
        let mut stack = vec![
            std::mem::take(&mut self.left),
            std::mem::take(&mut self.right),
        ];
        while let Some(s) = stack.pop() {
            if let Repr::Rope(rc) = s.0 {
                if let Ok(mut rope) = Rc::try_unwrap(rc) {
                    stack.push(std::mem::take(&mut rope.left));
                    stack.push(std::mem::take(&mut rope.right));
                }
            }
        }
    }
}

impl Default for JsStr {
    fn default() -> Self {
        JsStr(Repr::Flat(Rc::from(&[][..])))
    }
}

impl JsStr {
    pub fn from_units(units: impl Into<Rc<[u16]>>) -> Self {
        JsStr(Repr::Flat(units.into()))
    }

    pub fn len(&self) -> usize {
        match &self.0 {
            Repr::Flat(u) => u.len(),
            Repr::Rope(r) => r.len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn depth(&self) -> u32 {
        match &self.0 {
            Repr::Flat(_) => 0,
            Repr::Rope(r) => r.depth,
        }
    }

    pub fn concat(&self, other: &JsStr) -> JsStr {
        if other.is_empty() {
            return self.clone();
        }
        if self.is_empty() {
            return other.clone();
        }
        let len = self.len() + other.len();
        if len < FLAT_BELOW {
            let mut v = Vec::with_capacity(len);
            v.extend_from_slice(&self.flat());
            v.extend_from_slice(&other.flat());
            return JsStr::from_units(v);
        }
        if let (Repr::Rope(r), Repr::Flat(tail)) = (&self.0, &other.0) {
            if let Repr::Flat(leaf) = &r.right.0 {
                if leaf.len() + tail.len() <= LEAF_MERGE {
                    let mut v = Vec::with_capacity(leaf.len() + tail.len());
                    v.extend_from_slice(leaf);
                    v.extend_from_slice(tail);
                    return JsStr::rope(r.left.clone(), JsStr::from_units(v));
                }
            }
        }
        JsStr::rope(self.clone(), other.clone())
    }

    fn rope(left: JsStr, right: JsStr) -> JsStr {
        let depth = left.depth().max(right.depth()) + 1;
        let s = JsStr(Repr::Rope(Rc::new(Rope {
            len: left.len() + right.len(),
            left,
            right,
            depth,
            flat: OnceCell::new(),
        })));
        if depth > MAX_DEPTH {
            JsStr::from_units(s.flat())
        } else {
            s
        }
    }

    /// The code units, flattening (and caching) a rope if needed.
    pub fn flat(&self) -> Rc<[u16]> {
        match &self.0 {
            Repr::Flat(u) => u.clone(),
            Repr::Rope(r) => r.flat.get_or_init(|| flatten(self)).clone(),
        }
    }

    pub fn unit_at(&self, index: usize) -> Option<u16> {
        match &self.0 {
            Repr::Flat(u) => u.get(index).copied(),
            Repr::Rope(_) => self.flat().get(index).copied(),
        }
    }

    pub fn to_std_string(&self) -> String {
        String::from_utf16_lossy(&self.flat())
    }

    /// Up to `max` leading code units, rendered lossily.
    pub fn prefix_string(&self, max: usize) -> String {
        let units = self.flat();
        String::from_utf16_lossy(&units[..units.len().min(max)])
    }
}

fn flatten(s: &JsStr) -> Rc<[u16]> {
    let mut out = Vec::with_capacity(s.len());
    let mut stack = vec![s];
    while let Some(node) = stack.pop() {
        match &node.0 {
            Repr::Flat(u) => out.extend_from_slice(u),
            Repr::Rope(r) => {
                if let Some(cached) = r.flat.get() {
                    out.extend_from_slice(cached);
                } else {
                    stack.push(&r.right);
                    stack.push(&r.left);
                }
            }
        }
    }
    Rc::from(out)
}

impl From<&str> for JsStr {
    fn from(s: &str) -> Self {
        JsStr::from_units(s.encode_utf16().collect::<Vec<_>>())
    }
}

impl From<String> for JsStr {
    fn from(s: String) -> Self {
        JsStr::from(s.as_str())
    }
}

impl From<Vec<u16>> for JsStr {
    fn from(v: Vec<u16>) -> Self {
        JsStr::from_units(v)
    }
}

impl PartialEq for JsStr {
    fn eq(&self, other: &Self) -> bool {
        self.len() == other.len() && self.flat() == other.flat()
    }
}

impl Eq for JsStr {}

impl PartialOrd for JsStr {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for JsStr {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.flat().cmp(&other.flat())
    }
}

impl fmt::Debug for JsStr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len() > 80 {
            write!(f, "{:?}…(len {})", self.prefix_string(80), self.len())
        } else {
            write!(f, "{:?}", self.to_std_string())
        }
    }
}

impl fmt::Display for JsStr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_std_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concat_and_flatten() {
        let a = JsStr::from("ab");
        let b = JsStr::from("cd");
        assert_eq!(a.concat(&b).to_std_string(), "abcd");
        assert_eq!(JsStr::default().concat(&a), a);
    }

    #[test]
    fn doubling_stays_shallow() {
        let mut s = JsStr::from("%u9090");
        while s.len() < 0x10000 {
            s = s.concat(&s);
        }
        assert!(s.len() >= 0x10000);
        assert!(s.depth() < 20);
        assert_eq!(s.unit_at(0), Some(b'%' as u16));
        assert_eq!(s.unit_at(s.len() - 1), Some(b'0' as u16));
    }

    #[test]
    fn long_append_chain_drops_without_overflow() {
        let piece = JsStr::from("x".repeat(300).as_str());
        let mut s = JsStr::default();
        for _ in 0..20_000 {
            s = s.concat(&piece);
        }
        assert_eq!(s.len(), 6_000_000);
        drop(s);
    }

    #[test]
    fn small_appends_merge_into_leaves() {
        let mut s = JsStr::from("y".repeat(300).as_str());
        for _ in 0..100_000 {
            s = s.concat(&JsStr::from("z"));
        }
        assert_eq!(s.len(), 100_300);
        assert!(s.depth() < 100);
    }
}
