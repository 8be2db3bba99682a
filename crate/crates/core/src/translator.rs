// SPDX-License-Identifier: Apache-2.0

//! Turning raw trace bits into source-typed values and display strings.

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{ToPrimitive, Zero};
use thiserror::Error;

use crate::bits::BitString;
use crate::hgldd::{EnumDef, Encoding, TypeInfo};
use crate::link::{Resolution, ResolvedExpr, TyKind, TyVariable};
use crate::vcd::{VcdDocument, VcdError};

#[derive(Debug, Error)]
pub enum TranslateError {
    #[error("bool encoding requires width 1, got {0}")]
    BoolWidth(u32),
    #[error("enum encoding requires an enum definition")]
    MissingEnumDef,
    #[error("internal error: linked expression references an unknown signal")]
    Trace(#[from] VcdError),
}

/// A value rendered with its source-level type.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TypedValue {
    Bool(bool),
    Unsigned(BigUint),
    Signed(BigInt),
    Enum { name: String, raw: BigUint },
    /// Known bits that do not match any variant.
    EnumUnknown(BigUint),
    Record(Vec<(String, TypedValue)>),
    Array(Vec<TypedValue>),
    /// Any `X` or `Z` in the contributing bits.
    Unknown(BitString),
}

impl TypedValue {
    pub fn kind_name(&self) -> &'static str {
        match self {
            TypedValue::Bool(_) => "bool",
            TypedValue::Unsigned(_) => "unsigned",
            TypedValue::Signed(_) => "signed",
            TypedValue::Enum { .. } => "enum",
            TypedValue::EnumUnknown(_) => "enum_unknown",
            TypedValue::Record(_) => "record",
            TypedValue::Array(_) => "array",
            TypedValue::Unknown(_) => "unknown",
        }
    }
}

pub fn eval_expr(expr: &ResolvedExpr, trace: &VcdDocument, time: u64) -> Result<BitString, VcdError> {
    Ok(match expr {
        ResolvedExpr::Sig { id_code, .. } => trace.value_at(id_code, time)?,
        ResolvedExpr::Slice { of, hi, lo } => eval_expr(of, trace, time)?
            .slice(*hi, *lo)
            .expect("slice bounds are checked when linking"),
        ResolvedExpr::Concat(parts) => {
            let vals = parts
                .iter()
                .map(|p| eval_expr(p, trace, time))
                .collect::<Result<Vec<_>, _>>()?;
            BitString::concat(&vals).expect("concat has at least one part")
        }
        ResolvedExpr::Const(bits) => bits.clone(),
    })
}

pub fn render_ground(
    bits: &BitString,
    encoding: Encoding,
    enum_def: Option<&EnumDef>,
) -> Result<TypedValue, TranslateError> {
    match encoding {
        Encoding::Bool if bits.width() != 1 => return Err(TranslateError::BoolWidth(bits.width())),
        Encoding::Enum if enum_def.is_none() => return Err(TranslateError::MissingEnumDef),
        _ => {}
    }
    let Some(raw) = bits.to_biguint() else {
        return Ok(TypedValue::Unknown(bits.clone()));
    };
    Ok(match encoding {
        Encoding::Bool => TypedValue::Bool(!raw.is_zero()),
        Encoding::Unsigned => TypedValue::Unsigned(raw),
        Encoding::Signed => {
            let w = bits.width() as u64;
            if raw.bit(w - 1) {
                let modulus = BigInt::from(1u8) << w;
                TypedValue::Signed(BigInt::from_biguint(Sign::Plus, raw) - modulus)
            } else {
                TypedValue::Signed(BigInt::from_biguint(Sign::Plus, raw))
            }
        }
        Encoding::Enum => {
            let def = enum_def.unwrap();
            match raw.to_u64().and_then(|k| def.lookup(k)) {
                Some(name) => TypedValue::Enum {
                    name: name.to_string(),
                    raw,
                },
                None => TypedValue::EnumUnknown(raw),
            }
        }
    })
}

pub fn render_variable(var: &TyVariable, trace: &VcdDocument, time: u64) -> Result<TypedValue, TranslateError> {
    match &var.kind {
        TyKind::Ground {
            width,
            encoding,
            resolution,
            enum_def,
        } => match resolution {
            Resolution::Resolved(expr) => {
                let bits = eval_expr(expr, trace, time)?;
                render_ground(&bits, *encoding, enum_def.as_deref())
            }
            Resolution::Degraded(_) => Ok(TypedValue::Unknown(BitString::unknown(*width))),
        },
        TyKind::Record { fields } => Ok(TypedValue::Record(
            fields
                .iter()
                .map(|f| Ok((f.name.clone(), render_variable(f, trace, time)?)))
                .collect::<Result<_, TranslateError>>()?,
        )),
        TyKind::Array { elements } => Ok(TypedValue::Array(
            elements
                .iter()
                .map(|e| render_variable(e, trace, time))
                .collect::<Result<_, _>>()?,
        )),
    }
}

/// Rendered values of `var` over `[from, to]`: the value at `from`, then one
/// entry per time at which the rendered value differs from the previous entry.
pub fn render_changes(
    var: &TyVariable,
    trace: &VcdDocument,
    from: u64,
    to: u64,
) -> Result<Vec<(u64, TypedValue)>, TranslateError> {
    if from > to {
        return Err(VcdError::InvalidRange { t0: from, t1: to }.into());
    }
    let mut times: Vec<u64> = Vec::new();
    for id in var.bound_ids() {
        times.extend(trace.changes(id)?.range(from, to).map(|(t, _)| t).filter(|&t| t > from));
    }
    times.sort_unstable();
    times.dedup();

    let mut out = vec![(from, render_variable(var, trace, from)?)];
    for t in times {
        let v = render_variable(var, trace, t)?;
        if out.last().map(|(_, prev)| prev) != Some(&v) {
            out.push((t, v));
        }
    }
    Ok(out)
}

pub fn format_value(v: &TypedValue) -> String {
    let mut s = String::new();
    write_value(v, &mut s);
    s
}

fn write_value(v: &TypedValue, out: &mut String) {
    match v {
        TypedValue::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        TypedValue::Unsigned(n) => out.push_str(&n.to_string()),
        TypedValue::Signed(n) => out.push_str(&n.to_string()),
        TypedValue::Enum { name, .. } => out.push_str(name),
        TypedValue::EnumUnknown(raw) => {
            out.push('?');
            out.push_str(&raw.to_string());
        }
        TypedValue::Unknown(bits) => {
            out.push_str("0b");
            out.push_str(&bits.to_lowercase_string());
        }
        TypedValue::Record(fields) => {
            out.push('{');
            for (i, (name, fv)) in fields.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(name);
                out.push_str(": ");
                write_value(fv, out);
            }
            out.push('}');
        }
        TypedValue::Array(elems) => {
            out.push('[');
            for (i, ev) in elems.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_value(ev, out);
            }
            out.push(']');
        }
    }
}

/// `Binding[Type](p=v, ...)`, degrading gracefully when parts are absent.
pub fn format_type_label(ti: &TypeInfo) -> String {
    let mut s = match (&ti.binding, &ti.type_name) {
        (Some(b), Some(t)) => format!("{b}[{t}]"),
        (Some(b), None) => b.clone(),
        (None, Some(t)) => t.clone(),
        (None, None) => String::new(),
    };
    if !ti.params.is_empty() {
        let params: Vec<String> = ti.params.iter().map(|p| format!("{}={}", p.name, p.value)).collect();
        s.push('(');
        s.push_str(&params.join(", "));
        s.push(')');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hgldd::Param;

    fn b(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn my_state() -> EnumDef {
        EnumDef::new("MyState", [(0u64, "IDLE"), (1, "A"), (2, "B"), (3, "C"), (4, "Other")])
    }

    #[test]
    fn ground_rendering() {
        assert_eq!(
            render_ground(&b("1111111111"), Encoding::Signed, None).unwrap(),
            TypedValue::Signed(BigInt::from(-1))
        );
        assert_eq!(
            render_ground(&b("000"), Encoding::Enum, Some(&my_state())).unwrap(),
            TypedValue::Enum { name: "IDLE".into(), raw: BigUint::from(0u8) }
        );
        assert_eq!(
            render_ground(&b("101"), Encoding::Enum, Some(&my_state())).unwrap(),
            TypedValue::EnumUnknown(BigUint::from(5u8))
        );
        assert_eq!(
            render_ground(&b("1X0"), Encoding::Unsigned, None).unwrap(),
            TypedValue::Unknown(b("1X0"))
        );
        assert_eq!(render_ground(&b("1"), Encoding::Bool, None).unwrap(), TypedValue::Bool(true));
        assert_eq!(
            render_ground(&b("1000000000"), Encoding::Signed, None).unwrap(),
            TypedValue::Signed(BigInt::from(-512))
        );
        assert_eq!(
            render_ground(&b("0111111111"), Encoding::Signed, None).unwrap(),
            TypedValue::Signed(BigInt::from(511))
        );
    }

    #[test]
    fn contract_violations() {
        assert!(matches!(render_ground(&b("10"), Encoding::Bool, None), Err(TranslateError::BoolWidth(2))));
        assert!(matches!(render_ground(&b("10"), Encoding::Enum, None), Err(TranslateError::MissingEnumDef)));
    }

    #[test]
    fn wide_values_are_exact() {
        let mut s = "1".to_string();
        s.push_str(&"0".repeat(99));
        let v = render_ground(&b(&s), Encoding::Unsigned, None).unwrap();
        assert_eq!(v, TypedValue::Unsigned(BigUint::from(1u8) << 99u32));
        let v = render_ground(&b(&s), Encoding::Signed, None).unwrap();
        assert_eq!(v, TypedValue::Signed(-(BigInt::from(1u8) << 99u32)));
    }

    #[test]
    fn value_formatting() {
        assert_eq!(format_value(&TypedValue::Enum { name: "IDLE".into(), raw: BigUint::zero() }), "IDLE");
        let rec = TypedValue::Record(vec![
            ("a".into(), TypedValue::Bool(true)),
            ("b".into(), TypedValue::Signed(BigInt::from(-3))),
        ]);
        assert_eq!(format_value(&rec), "{a: true, b: -3}");
        assert_eq!(format_value(&TypedValue::Unknown(b("1XZ0"))), "0b1xz0");
        assert_eq!(format_value(&TypedValue::EnumUnknown(BigUint::from(7u8))), "?7");
        let arr = TypedValue::Array(vec![TypedValue::Unsigned(BigUint::from(1u8)), rec]);
        assert_eq!(format_value(&arr), "[1, {a: true, b: -3}]");
        assert_eq!(format_value(&TypedValue::Array(vec![])), "[]");
        assert_eq!(format_value(&TypedValue::Record(vec![])), "{}");
    }

    #[test]
    fn type_labels() {
        let ti = |t: Option<&str>, b: Option<&str>| TypeInfo {
            type_name: t.map(Into::into),
            binding: b.map(Into::into),
            params: vec![],
        };
        assert_eq!(format_type_label(&ti(Some("Bool"), Some("IO"))), "IO[Bool]");
        assert_eq!(format_type_label(&ti(Some("MyState"), Some("Reg"))), "Reg[MyState]");
        assert_eq!(format_type_label(&ti(Some("SInt<10>"), None)), "SInt<10>");
        assert_eq!(format_type_label(&ti(None, Some("Wire"))), "Wire");
        assert_eq!(format_type_label(&TypeInfo::default()), "");
        let mut bundle = ti(Some("MyBundle"), Some("Wire"));
        bundle.params.push(Param { name: "n".into(), scala_type: "Int".into(), value: "10".into() });
        assert_eq!(format_type_label(&bundle), "Wire[MyBundle](n=10)");
    }
}
