//! Which retyping rule applies in which operator context, and to what type.
//!
//! These functions only decide; the interpreter performs the in-place rewrite
//! and logs the rule.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TypeTag;
use crate::syntax::ast::{BinaryOp, UnaryOp, UpdateOp};

/// Rule tags for the recovery log: the two reference-error recoveries, the
/// typing rules, and the engine's other self-healing steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rule {
    #[serde(rename = "ER_1")]
    Er1,
    #[serde(rename = "ER_2")]
    Er2,
    #[serde(rename = "R_ASSIGN")]
    RAssign,
    #[serde(rename = "R_CALL1")]
    RCall1,
    #[serde(rename = "R_CALL2")]
    RCall2,
    #[serde(rename = "R_NEW")]
    RNew,
    #[serde(rename = "R_BINOPERATOR1")]
    RBinOperator1,
    #[serde(rename = "R_BINOPERATOR2")]
    RBinOperator2,
    #[serde(rename = "R_UNARYOPERATOR")]
    RUnaryOperator,
    #[serde(rename = "R_INDEX1")]
    RIndex1,
    #[serde(rename = "R_INDEX2")]
    RIndex2,
    #[serde(rename = "DIV_BY_ZERO")]
    DivByZero,
    #[serde(rename = "ERROR_RECOVERED")]
    ErrorRecovered,
    #[serde(rename = "UNCAUGHT_THROW")]
    UncaughtThrow,
    #[serde(rename = "LOOP_BUDGET")]
    LoopBudget,
    #[serde(rename = "RECURSION_CAP")]
    RecursionCap,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::Er1 => "ER_1",
            Rule::Er2 => "ER_2",
            Rule::RAssign => "R_ASSIGN",
            Rule::RCall1 => "R_CALL1",
            Rule::RCall2 => "R_CALL2",
            Rule::RNew => "R_NEW",
            Rule::RBinOperator1 => "R_BINOPERATOR1",
            Rule::RBinOperator2 => "R_BINOPERATOR2",
            Rule::RUnaryOperator => "R_UNARYOPERATOR",
            Rule::RIndex1 => "R_INDEX1",
            Rule::RIndex2 => "R_INDEX2",
            Rule::DivByZero => "DIV_BY_ZERO",
            Rule::ErrorRecovered => "ERROR_RECOVERED",
            Rule::UncaughtThrow => "UNCAUGHT_THROW",
            Rule::LoopBudget => "LOOP_BUDGET",
            Rule::RecursionCap => "RECURSION_CAP",
        }
    }

    /// True for the typing rules proper (as opposed to recoveries and budgets).
    pub fn is_typing_rule(self) -> bool {
        matches!(
            self,
            Rule::RAssign
                | Rule::RCall1
                | Rule::RCall2
                | Rule::RNew
                | Rule::RBinOperator1
                | Rule::RBinOperator2
                | Rule::RUnaryOperator
                | Rule::RIndex1
                | Rule::RIndex2
        )
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Seeded source of the numbers faked values become.
#[derive(Debug, Clone)]
pub struct NumberSource {
    rng: ChaCha8Rng,
}

impl NumberSource {
    pub const MIN: u32 = 1;
    pub const MAX: u32 = 16;

    pub fn new(seed: u64) -> Self {
        NumberSource {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// A small positive integer in `[MIN, MAX]`.
    pub fn gen_number(&mut self) -> f64 {
        self.rng.gen_range(Self::MIN..=Self::MAX) as f64
    }

    /// Uniform in `[0, 1)`, for `Math.random`.
    pub fn gen_unit(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }
}

/// Outcome of the binary-operator rules for one operator application.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinaryRetype {
    pub rule: Rule,
    /// New type of the left operand, if it is rewritten.
    pub lhs: Option<TypeTag>,
    pub rhs: Option<TypeTag>,
}

/// Operators whose semantics fix the operand type regardless of the other side.
fn forced_operand_types(op: BinaryOp) -> Option<(TypeTag, TypeTag)> {
    use BinaryOp::*;
    match op {
        Sub | Mul | Div | Mod | Shl | Shr | UShr | BitAnd | BitOr | BitXor => {
            Some((TypeTag::Number, TypeTag::Number))
        }
        In => Some((TypeTag::String, TypeTag::Obj)),
        Instanceof => Some((TypeTag::Obj, TypeTag::FFun)),
        _ => None,
    }
}

/// Type a lone faked operand takes from the other operand's type `other`.
fn adopt_type(op: BinaryOp, other: TypeTag) -> TypeTag {
    use BinaryOp::*;
    match op {
        Add => match other {
            TypeTag::String => TypeTag::String,
            TypeTag::Bool => TypeTag::Bool,
            TypeTag::Obj | TypeTag::Function | TypeTag::FFun => TypeTag::String,
            _ => TypeTag::Number,
        },
        Lt | Gt | Le | Ge => match other {
            TypeTag::String => TypeTag::String,
            _ => TypeTag::Number,
        },
        Eq | Ne | StrictEq | StrictNe => match other {
            TypeTag::String => TypeTag::String,
            TypeTag::Number => TypeTag::Number,
            TypeTag::Bool => TypeTag::Bool,
            _ => TypeTag::Obj,
        },
        _ => forced_operand_types(op)
            .map(|(l, _)| l)
            .unwrap_or(TypeTag::Number),
    }
}

/// Decides the rewrite for `lhs op rhs`; `None` when neither operand is FObj.
pub fn binary_rule(op: BinaryOp, lhs: TypeTag, rhs: TypeTag) -> Option<BinaryRetype> {
    let lf = lhs == TypeTag::FObj;
    let rf = rhs == TypeTag::FObj;
    if !lf && !rf {
        return None;
    }
    let rule = if lf && rf {
        Rule::RBinOperator2
    } else {
        Rule::RBinOperator1
    };
    if let Some((lt, rt)) = forced_operand_types(op) {
        return Some(BinaryRetype {
            rule,
            lhs: lf.then_some(lt),
            rhs: rf.then_some(rt),
        });
    }
    if lf && rf {
        return Some(BinaryRetype {
            rule,
            lhs: Some(TypeTag::Number),
            rhs: Some(TypeTag::Number),
        });
    }
    if lf {
        Some(BinaryRetype {
            rule,
            lhs: Some(adopt_type(op, rhs)),
            rhs: None,
        })
    } else {
        Some(BinaryRetype {
            rule,
            lhs: None,
            rhs: Some(adopt_type(op, lhs)),
        })
    }
}

/// Type a faked operand of a unary operator becomes; `None` for the total
/// operators (`typeof`, `void`, `delete`).
pub fn unary_rule(op: UnaryOp) -> Option<TypeTag> {
    match op {
        UnaryOp::Neg | UnaryOp::Plus | UnaryOp::BitNot => Some(TypeTag::Number),
        UnaryOp::Not => Some(TypeTag::Bool),
        UnaryOp::Typeof | UnaryOp::Void | UnaryOp::Delete => None,
    }
}

pub fn update_rule(_op: UpdateOp) -> TypeTag {
    TypeTag::Number
}

/// Rules for `base[index]`, in application order.
pub fn index_rules(base: TypeTag, index: TypeTag) -> Vec<Rule> {
    let mut rules = Vec::new();
    if index == TypeTag::FObj {
        rules.push(Rule::RIndex2);
    }
    if base == TypeTag::FObj {
        rules.push(Rule::RIndex1);
    }
    rules
}

/// Length a faked base gets when first indexed at `index`.
pub fn faked_array_len(index: u64) -> u64 {
    (index.saturating_mul(2)).max(1)
}

/// Length after an out-of-bounds access at `index` on a faked array of `len`.
pub fn grown_array_len(len: u64, index: u64) -> u64 {
    let mut len = len.max(1);
    while len <= index {
        len = len.saturating_mul(2);
    }
    len
}

/// Rule for a faked callee: `R_CALL1` for calls, `R_NEW` for constructions.
pub fn callable_rule(construct: bool) -> Rule {
    if construct {
        Rule::RNew
    } else {
        Rule::RCall1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn faked_plus_number_becomes_number() {
        let r = binary_rule(BinaryOp::Add, TypeTag::FObj, TypeTag::Number).unwrap();
        assert_eq!(
            r,
            BinaryRetype {
                rule: Rule::RBinOperator1,
                lhs: Some(TypeTag::Number),
                rhs: None
            }
        );
    }

    #[test]
    fn both_faked_become_numbers() {
        let r = binary_rule(BinaryOp::Lt, TypeTag::FObj, TypeTag::FObj).unwrap();
        assert_eq!(r.rule, Rule::RBinOperator2);
        assert_eq!(
            (r.lhs, r.rhs),
            (Some(TypeTag::Number), Some(TypeTag::Number))
        );
    }

    #[test]
    fn subtraction_forces_number_against_string() {
        let r = binary_rule(BinaryOp::Sub, TypeTag::String, TypeTag::FObj).unwrap();
        assert_eq!(r.rhs, Some(TypeTag::Number));
        let r = binary_rule(BinaryOp::Add, TypeTag::String, TypeTag::FObj).unwrap();
        assert_eq!(r.rhs, Some(TypeTag::String));
    }

    #[test]
    fn no_rule_without_faked_operand() {
        assert!(binary_rule(BinaryOp::Add, TypeTag::FFun, TypeTag::Number).is_none());
    }

    #[test]
    fn index_rule_order() {
        assert_eq!(
            index_rules(TypeTag::FObj, TypeTag::FObj),
            vec![Rule::RIndex2, Rule::RIndex1]
        );
        assert_eq!(faked_array_len(5), 10);
        assert_eq!(faked_array_len(0), 1);
        assert_eq!(grown_array_len(10, 10), 20);
        assert_eq!(grown_array_len(10, 45), 80);
    }

    #[test]
    fn numbers_are_small_and_reproducible() {
        let mut a = NumberSource::new(7);
        let mut b = NumberSource::new(7);
        for _ in 0..1000 {
            let x = a.gen_number();
            assert_eq!(x, b.gen_number());
            assert!((1.0..=16.0).contains(&x) && x.fract() == 0.0);
        }
    }
}
