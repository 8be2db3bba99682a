// SPDX-License-Identifier: Apache-2.0

//! Oracle generator for matched (debug metadata, trace, expected values) triples.
//!
//! A [`FixtureDesign`] describes a circuit at source level: typed signals,
//! module instances with parameters, and a declarative stimulus assigning
//! values to ground leaves over time. [`flatten_design`] lowers it the way a
//! hardware compiler would, with one of three [`Strategy`] choices, and
//! computes the expected typed values straight from the stimulus.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bits::BitString;
use crate::hgldd::{
    DebugKind, EnumDef, Encoding, HglddDocument, InstanceDebug, ModuleDebug, Param, TypeInfo,
    ValueExpr, VariableDebug, VERSION,
};
use crate::translator::{format_value, TypedValue};
use crate::vcd::{ScopeKind, TimeUnit, Timescale, VarKind, VcdBuilder, VcdDocument};

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("unsupported flattening strategy `{0}` (expected leaf, packed or constfold)")]
    UnsupportedStrategy(String),
    #[error("unknown fixture `{0}` (expected listing1 or enumcpu)")]
    UnknownFixture(String),
    #[error("malformed design: {0}")]
    Malformed(String),
    #[error("failed to write fixture files")]
    Io(#[from] std::io::Error),
}

/// How source aggregates are lowered into trace variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Each ground leaf becomes its own trace variable.
    Leaf,
    /// Each top-level signal becomes one wide variable; leaves are slices of it.
    Packed,
    /// Leaves that never change become constants and vanish from the trace.
    ConstFold,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Leaf, Strategy::Packed, Strategy::ConstFold];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Leaf => "leaf",
            Strategy::Packed => "packed",
            Strategy::ConstFold => "constfold",
        }
    }
}

impl FromStr for Strategy {
    type Err = FixtureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "leaf" => Ok(Strategy::Leaf),
            "packed" => Ok(Strategy::Packed),
            "constfold" => Ok(Strategy::ConstFold),
            other => Err(FixtureError::UnsupportedStrategy(other.to_string())),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FieldType {
    Bool,
    UInt(u32),
    SInt(u32),
    /// Refers to a [`FixtureEnum`] by id.
    Enum(String),
    Bundle {
        type_name: String,
        params: Vec<Param>,
        fields: Vec<(String, FieldType)>,
    },
    Vec {
        len: usize,
        elem: Box<FieldType>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureEnum {
    pub id: String,
    /// Variant `i` is encoded as `i`.
    pub variants: Vec<String>,
}

impl FixtureEnum {
    /// `ceil(log2(n))` bits, at least one.
    pub fn width(&self) -> u32 {
        let n = self.variants.len().max(2) as u64;
        64 - (n - 1).leading_zeros()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureSignal {
    pub name: String,
    pub binding: String,
    pub ty: FieldType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureModule {
    /// Unique elaborated name, also used as the HDL module name.
    pub name: String,
    pub class_name: String,
    pub params: Vec<Param>,
    pub signals: Vec<FixtureSignal>,
    /// `(instance name, module name)`.
    pub instances: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LeafValue {
    Bool(bool),
    UInt(BigUint),
    SInt(BigInt),
    /// Raw encoding; may lie outside the defined variants.
    Enum(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub time: u64,
    /// Full leaf paths such as `TopCircuit.mod1.inBundle.v[3]`.
    pub assigns: Vec<(String, LeafValue)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureDesign {
    pub name: String,
    pub enums: Vec<FixtureEnum>,
    pub modules: Vec<FixtureModule>,
    pub top: String,
    pub period: u64,
    pub stimulus: Vec<Step>,
}

/// Expected rendering of every variable node at every stimulus time.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExpectedTable {
    entries: BTreeMap<(String, u64), TypedValue>,
}

pub const TSV_HEADER: &str = "path\ttime\tvalue";

impl ExpectedTable {
    pub fn get(&self, path: &str, time: u64) -> Option<&TypedValue> {
        self.entries.get(&(path.to_string(), time))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64, &TypedValue)> + '_ {
        self.entries.iter().map(|((p, t), v)| (p.as_str(), *t, v))
    }

    pub fn paths(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.entries.keys().map(|(p, _)| p.as_str()).collect();
        out.dedup();
        out
    }

    /// `path TAB time TAB value` lines under a header, sorted by (path, time).
    pub fn to_tsv(&self) -> String {
        let mut s = String::from(TSV_HEADER);
        s.push('\n');
        for (p, t, v) in self.iter() {
            s.push_str(&format!("{p}\t{t}\t{}\n", format_value(v)));
        }
        s
    }

    /// Like [`to_tsv`](Self::to_tsv) but keeping only rows whose value differs
    /// from the previous row of the same path.
    pub fn change_points_tsv(&self) -> String {
        let mut s = String::from(TSV_HEADER);
        s.push('\n');
        let mut prev: Option<(&str, &TypedValue)> = None;
        for (p, t, v) in self.iter() {
            if prev != Some((p, v)) {
                s.push_str(&format!("{p}\t{t}\t{}\n", format_value(v)));
            }
            prev = Some((p, v));
        }
        s
    }
}

/// Output of [`flatten_design`].
#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    pub strategy: Strategy,
    pub debug: HglddDocument,
    pub trace: VcdDocument,
    pub expected: ExpectedTable,
}

impl Fixture {
    /// Writes `<name>.tywaves.json`, `<name>.vcd` and `<name>.expected.tsv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), FixtureError> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{}.tywaves.json", self.name)), self.debug.to_json_string() + "\n")?;
        std::fs::write(dir.join(format!("{}.vcd", self.name)), self.trace.to_vcd_string())?;
        std::fs::write(dir.join(format!("{}.expected.tsv", self.name)), self.expected.to_tsv())?;
        Ok(())
    }

    /// The same debug information split into one document per module.
    pub fn split_debug(&self) -> Vec<HglddDocument> {
        self.debug
            .modules
            .iter()
            .enumerate()
            .map(|(i, m)| HglddDocument {
                version: self.debug.version.clone(),
                top: (i == 0).then(|| self.debug.top.clone()).flatten(),
                enums: if i == 0 { self.debug.enums.clone() } else { Vec::new() },
                modules: vec![m.clone()],
                unknown_fields: Vec::new(),
            })
            .collect()
    }
}

/// Knobs for injecting faults into generated fixtures.
#[derive(Debug, Clone, Default)]
pub struct FlattenOptions {
    /// Full leaf paths whose trace variable is dropped while the debug info
    /// keeps referencing it, as a misconfigured constant folder would.
    pub drop_from_trace: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LeafKind {
    Bool,
    UInt,
    SInt,
    Enum,
}

#[derive(Debug, Clone)]
struct LeafSpec {
    /// Path relative to the module, e.g. `inBundle.v[3]`.
    rel: String,
    signal: usize,
    kind: LeafKind,
    width: u32,
    /// Offset of the LSB inside the packed top-level signal.
    lo: u32,
}

impl FixtureDesign {
    pub fn module(&self, name: &str) -> Option<&FixtureModule> {
        self.modules.iter().find(|m| m.name == name)
    }

    fn enum_def(&self, id: &str) -> Result<&FixtureEnum, FixtureError> {
        self.enums
            .iter()
            .find(|e| e.id == id)
            .ok_or_else(|| FixtureError::Malformed(format!("unknown enum `{id}`")))
    }

    fn width(&self, ty: &FieldType) -> Result<u32, FixtureError> {
        Ok(match ty {
            FieldType::Bool => 1,
            FieldType::UInt(w) | FieldType::SInt(w) => *w,
            FieldType::Enum(id) => self.enum_def(id)?.width(),
            FieldType::Bundle { fields, .. } => fields
                .iter()
                .map(|(_, t)| self.width(t))
                .sum::<Result<u32, _>>()?,
            FieldType::Vec { len, elem } => *len as u32 * self.width(elem)?,
        })
    }

    fn leaves(&self, module: &FixtureModule) -> Result<Vec<LeafSpec>, FixtureError> {
        let mut out = Vec::new();
        for (i, sig) in module.signals.iter().enumerate() {
            self.collect_leaves(&sig.ty, sig.name.clone(), i, 0, &mut out)?;
        }
        Ok(out)
    }

    fn collect_leaves(
        &self,
        ty: &FieldType,
        rel: String,
        signal: usize,
        lo: u32,
        out: &mut Vec<LeafSpec>,
    ) -> Result<(), FixtureError> {
        let leaf = |kind, width| LeafSpec {
            rel: rel.clone(),
            signal,
            kind,
            width,
            lo,
        };
        match ty {
            FieldType::Bool => out.push(leaf(LeafKind::Bool, 1)),
            FieldType::UInt(w) => out.push(leaf(LeafKind::UInt, *w)),
            FieldType::SInt(w) => out.push(leaf(LeafKind::SInt, *w)),
            FieldType::Enum(id) => out.push(leaf(LeafKind::Enum, self.enum_def(id)?.width())),
            FieldType::Bundle { fields, .. } => {
                // first field occupies the most significant bits
                let widths = fields
                    .iter()
                    .map(|(_, t)| self.width(t))
                    .collect::<Result<Vec<_>, _>>()?;
                for (i, (name, t)) in fields.iter().enumerate() {
                    let offset = lo + widths[i + 1..].iter().sum::<u32>();
                    self.collect_leaves(t, format!("{rel}.{name}"), signal, offset, out)?;
                }
            }
            FieldType::Vec { len, elem } => {
                let ew = self.width(elem)?;
                for i in 0..*len {
                    self.collect_leaves(elem, format!("{rel}[{i}]"), signal, lo + i as u32 * ew, out)?;
                }
            }
        }
        Ok(())
    }

    /// `(full instance path, module)` pairs in pre-order, starting at the top.
    fn instances(&self) -> Result<Vec<(String, &FixtureModule)>, FixtureError> {
        fn walk<'a>(
            d: &'a FixtureDesign,
            m: &'a FixtureModule,
            path: String,
            depth: usize,
            out: &mut Vec<(String, &'a FixtureModule)>,
        ) -> Result<(), FixtureError> {
            if depth > 64 {
                return Err(FixtureError::Malformed("instance nesting too deep".into()));
            }
            out.push((path.clone(), m));
            for (inst, mname) in &m.instances {
                let child = d
                    .module(mname)
                    .ok_or_else(|| FixtureError::Malformed(format!("unknown module `{mname}`")))?;
                walk(d, child, format!("{path}.{inst}"), depth + 1, out)?;
            }
            Ok(())
        }
        let top = self
            .module(&self.top)
            .ok_or_else(|| FixtureError::Malformed(format!("unknown top `{}`", self.top)))?;
        let mut out = Vec::new();
        walk(self, top, top.class_name.clone(), 0, &mut out)?;
        Ok(out)
    }

    /// Checks that every leaf is assigned at the first step and every value fits its type.
    pub fn check(&self) -> Result<(), FixtureError> {
        let kinds = self.leaf_kinds()?;
        let first = self
            .stimulus
            .first()
            .ok_or_else(|| FixtureError::Malformed("empty stimulus".into()))?;
        let assigned: HashSet<&str> = first.assigns.iter().map(|(p, _)| p.as_str()).collect();
        for p in kinds.keys() {
            if !assigned.contains(p.as_str()) {
                return Err(FixtureError::Malformed(format!("leaf `{p}` not assigned at the first step")));
            }
        }
        let mut last = None;
        for step in &self.stimulus {
            if last.is_some_and(|t| t >= step.time) {
                return Err(FixtureError::Malformed("stimulus times must increase".into()));
            }
            last = Some(step.time);
            for (p, v) in &step.assigns {
                let (kind, width) = kinds
                    .get(p)
                    .ok_or_else(|| FixtureError::Malformed(format!("assignment to unknown leaf `{p}`")))?;
                let ok = match (kind, v) {
                    (LeafKind::Bool, LeafValue::Bool(_)) => true,
                    (LeafKind::UInt, LeafValue::UInt(n)) => n.bits() <= *width as u64,
                    (LeafKind::SInt, LeafValue::SInt(n)) => {
                        let half = BigInt::from(1u8) << (*width - 1);
                        *n >= -half.clone() && *n < half
                    }
                    (LeafKind::Enum, LeafValue::Enum(n)) => *width >= 64 || *n < (1u64 << width),
                    _ => false,
                };
                if !ok {
                    return Err(FixtureError::Malformed(format!("value {v:?} out of range for `{p}`")));
                }
            }
        }
        Ok(())
    }

    fn leaf_kinds(&self) -> Result<HashMap<String, (LeafKind, u32)>, FixtureError> {
        let mut out = HashMap::new();
        for (ipath, m) in self.instances()? {
            for l in self.leaves(m)? {
                out.insert(format!("{ipath}.{}", l.rel), (l.kind, l.width));
            }
        }
        Ok(out)
    }

    /// Source hierarchy as `(path, label)` pairs: scopes, then their variables and members.
    pub fn source_tree(&self) -> Result<Vec<String>, FixtureError> {
        let mut out = Vec::new();
        for (ipath, m) in self.instances()? {
            out.push(format!("scope {ipath}"));
            for sig in &m.signals {
                self.source_nodes(&sig.ty, &format!("{ipath}.{}", sig.name), &mut out)?;
            }
        }
        Ok(out)
    }

    fn source_nodes(&self, ty: &FieldType, path: &str, out: &mut Vec<String>) -> Result<(), FixtureError> {
        match ty {
            FieldType::Bundle { fields, .. } => {
                out.push(format!("record {path} {}", fields.len()));
                for (n, t) in fields {
                    self.source_nodes(t, &format!("{path}.{n}"), out)?;
                }
            }
            FieldType::Vec { len, elem } => {
                out.push(format!("array {path} {len}"));
                for i in 0..*len {
                    self.source_nodes(elem, &format!("{path}[{i}]"), out)?;
                }
            }
            other => out.push(format!("ground {path} {}", self.width(other)?)),
        }
        Ok(())
    }

    fn type_info(&self, ty: &FieldType, binding: &str) -> TypeInfo {
        let (type_name, params) = match ty {
            FieldType::Bundle {
                type_name, params, ..
            } => (type_name.clone(), params.clone()),
            other => (type_label(other), Vec::new()),
        };
        TypeInfo {
            type_name: Some(type_name),
            binding: Some(binding.to_string()),
            params,
        }
    }
}

fn type_label(ty: &FieldType) -> String {
    match ty {
        FieldType::Bool => "Bool".into(),
        FieldType::UInt(w) => format!("UInt<{w}>"),
        FieldType::SInt(w) => format!("SInt<{w}>"),
        FieldType::Enum(id) => id.clone(),
        FieldType::Bundle { type_name, .. } => type_name.clone(),
        FieldType::Vec { len, elem } => format!("{}[{len}]", type_label(elem)),
    }
}

/// Flat HDL name for a module-relative leaf path: `a.b[3]` becomes `a_b_3`.
fn hdl_leaf_name(rel: &str) -> String {
    rel.replace(['.', '['], "_").replace(']', "")
}

/// Test-side two's complement / unsigned encoder for leaf values.
fn encode(value: &LeafValue, width: u32) -> BitString {
    let raw = match value {
        LeafValue::Bool(b) => BigUint::from(*b as u8),
        LeafValue::UInt(n) => n.clone(),
        LeafValue::Enum(n) => BigUint::from(*n),
        LeafValue::SInt(n) if n.is_negative() => {
            let modulus = BigInt::from(1u8) << width;
            (modulus + n).to_biguint().expect("in-range negative value")
        }
        LeafValue::SInt(n) => n.to_biguint().unwrap(),
    };
    BitString::from_biguint(&raw, width).expect("value checked against its width")
}

fn typed(value: &LeafValue, ty: &FieldType, design: &FixtureDesign) -> TypedValue {
    match (value, ty) {
        (LeafValue::Bool(b), _) => TypedValue::Bool(*b),
        (LeafValue::UInt(n), _) => TypedValue::Unsigned(n.clone()),
        (LeafValue::SInt(n), _) => TypedValue::Signed(n.clone()),
        (LeafValue::Enum(n), FieldType::Enum(id)) => {
            let e = design.enum_def(id).expect("checked design");
            match e.variants.get(*n as usize) {
                Some(name) => TypedValue::Enum {
                    name: name.clone(),
                    raw: BigUint::from(*n),
                },
                None => TypedValue::EnumUnknown(BigUint::from(*n)),
            }
        }
        (LeafValue::Enum(n), _) => TypedValue::EnumUnknown(BigUint::from(*n)),
    }
}

/// Expected value of a node assembled from current leaf values.
fn expected_node(
    design: &FixtureDesign,
    ty: &FieldType,
    path: &str,
    current: &HashMap<String, LeafValue>,
    out: &mut Vec<(String, TypedValue)>,
) -> TypedValue {
    let v = match ty {
        FieldType::Bundle { fields, .. } => TypedValue::Record(
            fields
                .iter()
                .map(|(n, t)| (n.clone(), expected_node(design, t, &format!("{path}.{n}"), current, out)))
                .collect(),
        ),
        FieldType::Vec { len, elem } => TypedValue::Array(
            (0..*len)
                .map(|i| expected_node(design, elem, &format!("{path}[{i}]"), current, out))
                .collect(),
        ),
        leaf => typed(&current[path], leaf, design),
    };
    out.push((path.to_string(), v.clone()));
    v
}

fn expected_table(design: &FixtureDesign) -> Result<ExpectedTable, FixtureError> {
    let instances = design.instances()?;
    let mut current: HashMap<String, LeafValue> = HashMap::new();
    let mut table = ExpectedTable::default();
    for step in &design.stimulus {
        for (p, v) in &step.assigns {
            current.insert(p.clone(), v.clone());
        }
        for (ipath, m) in &instances {
            for sig in &m.signals {
                let mut nodes = Vec::new();
                expected_node(design, &sig.ty, &format!("{ipath}.{}", sig.name), &current, &mut nodes);
                for (p, v) in nodes {
                    table.entries.insert((p, step.time), v);
                }
            }
        }
    }
    Ok(table)
}

/// Value of every leaf of `m` in every instance, if it never changes across the
/// stimulus and agrees across instances.
fn constant_leaves(
    design: &FixtureDesign,
    m: &FixtureModule,
    instances: &[(String, &FixtureModule)],
) -> Result<HashMap<String, LeafValue>, FixtureError> {
    let ipaths: Vec<&str> = instances
        .iter()
        .filter(|(_, im)| im.name == m.name)
        .map(|(p, _)| p.as_str())
        .collect();
    let mut seen: HashMap<String, Option<LeafValue>> = HashMap::new();
    let leaves = design.leaves(m)?;
    for l in &leaves {
        seen.insert(l.rel.clone(), None);
    }
    let mut varying: HashSet<String> = HashSet::new();
    for step in &design.stimulus {
        for (p, v) in &step.assigns {
            for ip in &ipaths {
                if let Some(rel) = p.strip_prefix(ip).and_then(|r| r.strip_prefix('.')) {
                    if let Some(slot) = seen.get_mut(rel) {
                        match slot {
                            None => *slot = Some(v.clone()),
                            Some(prev) if prev != v => {
                                varying.insert(rel.to_string());
                            }
                            Some(_) => {}
                        }
                    }
                }
            }
        }
    }
    Ok(seen
        .into_iter()
        .filter(|(rel, _)| !varying.contains(rel))
        .filter_map(|(rel, v)| v.map(|v| (rel, v)))
        .collect())
}

fn debug_var(
    design: &FixtureDesign,
    ty: &FieldType,
    name: &str,
    rel: &str,
    binding: &str,
    exprs: &HashMap<String, ValueExpr>,
) -> Result<VariableDebug, FixtureError> {
    let kind = match ty {
        FieldType::Bundle { fields, .. } => DebugKind::Record {
            fields: fields
                .iter()
                .map(|(n, t)| debug_var(design, t, n, &format!("{rel}.{n}"), binding, exprs))
                .collect::<Result<_, _>>()?,
        },
        FieldType::Vec { len, elem } => DebugKind::Array {
            elements: (0..*len)
                .map(|i| debug_var(design, elem, &i.to_string(), &format!("{rel}[{i}]"), binding, exprs))
                .collect::<Result<_, _>>()?,
        },
        leaf => {
            let (encoding, enum_ref) = match leaf {
                FieldType::Bool => (Encoding::Bool, None),
                FieldType::UInt(_) => (Encoding::Unsigned, None),
                FieldType::SInt(_) => (Encoding::Signed, None),
                FieldType::Enum(id) => (Encoding::Enum, Some(id.clone())),
                _ => unreachable!(),
            };
            DebugKind::Ground {
                width: design.width(leaf)?,
                encoding,
                enum_ref,
                expr: exprs[rel].clone(),
            }
        }
    };
    Ok(VariableDebug {
        name: name.to_string(),
        type_info: design.type_info(ty, binding),
        kind,
    })
}

pub fn flatten_design(design: &FixtureDesign, strategy: Strategy) -> Result<Fixture, FixtureError> {
    flatten_design_with(design, strategy, &FlattenOptions::default())
}

pub fn flatten_design_with(
    design: &FixtureDesign,
    strategy: Strategy,
    options: &FlattenOptions,
) -> Result<Fixture, FixtureError> {
    design.check()?;
    let instances = design.instances()?;

    // per-module leaf layout and expressions
    let mut layouts: HashMap<&str, Vec<LeafSpec>> = HashMap::new();
    let mut exprs: HashMap<&str, HashMap<String, ValueExpr>> = HashMap::new();
    let mut folded: HashMap<&str, HashSet<String>> = HashMap::new();
    for m in &design.modules {
        let leaves = design.leaves(m)?;
        let consts = match strategy {
            Strategy::ConstFold => constant_leaves(design, m, &instances)?,
            _ => HashMap::new(),
        };
        let mut ex = HashMap::new();
        for l in &leaves {
            let sig = &m.signals[l.signal];
            let is_top_ground = l.rel == sig.name;
            let e = match (strategy, consts.get(&l.rel)) {
                (Strategy::ConstFold, Some(v)) => ValueExpr::Const(encode(v, l.width)),
                (Strategy::Packed, _) if !is_top_ground => ValueExpr::Slice {
                    of: Box::new(ValueExpr::Sig(sig.name.clone())),
                    hi: l.lo + l.width - 1,
                    lo: l.lo,
                },
                _ => ValueExpr::Sig(hdl_leaf_name(&l.rel)),
            };
            ex.insert(l.rel.clone(), e);
        }
        folded.insert(&m.name, consts.into_keys().collect());
        layouts.insert(&m.name, leaves);
        exprs.insert(&m.name, ex);
    }

    // debug document
    let mut modules = Vec::new();
    for m in &design.modules {
        let ex = &exprs[m.name.as_str()];
        modules.push(ModuleDebug {
            name: m.name.clone(),
            type_info: TypeInfo {
                type_name: Some(m.class_name.clone()),
                binding: Some("Module".into()),
                params: m.params.clone(),
            },
            hdl_module: m.name.clone(),
            variables: m
                .signals
                .iter()
                .map(|s| debug_var(design, &s.ty, &s.name, &s.name, &s.binding, ex))
                .collect::<Result<_, _>>()?,
            scopes: Vec::new(),
            instances: m
                .instances
                .iter()
                .map(|(i, mn)| InstanceDebug {
                    name: i.clone(),
                    module: mn.clone(),
                    hdl_instance: i.clone(),
                })
                .collect(),
        });
    }
    // top module first, the rest in declaration order
    modules.sort_by_key(|m| m.name != design.top);
    let debug = HglddDocument {
        version: VERSION.into(),
        top: Some(design.top.clone()),
        enums: design
            .enums
            .iter()
            .map(|e| EnumDef::new(&e.id, e.variants.iter().enumerate().map(|(i, n)| (i as u64, n.clone()))))
            .collect(),
        modules,
        unknown_fields: Vec::new(),
    };

    // trace
    let mut vcd = VcdBuilder::new(Timescale {
        magnitude: 1,
        unit: TimeUnit::Ns,
    });
    vcd.open_scope(ScopeKind::Module, "TOP");
    let clock = vcd.var(VarKind::Wire, 1, "clock");
    let reset = vcd.var(VarKind::Wire, 1, "reset");
    let drop: HashSet<&str> = options.drop_from_trace.iter().map(String::as_str).collect();

    // full leaf path -> (id, width, lo, signal id for packed)
    struct Target {
        id: String,
        lo: u32,
        width: u32,
    }
    let mut targets: HashMap<String, Target> = HashMap::new();
    // packed signal id -> (width, leaf paths)
    let mut packed: Vec<(String, u32, Vec<String>)> = Vec::new();
    let depth_of = |p: &str| p.matches('.').count();
    let mut open_depth = 0usize;
    for (ipath, m) in &instances {
        let depth = depth_of(ipath);
        while open_depth > depth {
            vcd.close_scope();
            open_depth -= 1;
        }
        let scope_name = ipath.rsplit('.').next().unwrap();
        let scope_name = if depth == 0 { m.name.as_str() } else { scope_name };
        vcd.open_scope(ScopeKind::Module, scope_name);
        open_depth = depth + 1;

        let leaves = &layouts[m.name.as_str()];
        let ex = &exprs[m.name.as_str()];
        let folded = &folded[m.name.as_str()];
        for (si, sig) in m.signals.iter().enumerate() {
            let kind = if sig.binding == "Reg" { VarKind::Reg } else { VarKind::Wire };
            let sig_leaves: Vec<&LeafSpec> = leaves.iter().filter(|l| l.signal == si).collect();
            match strategy {
                Strategy::Packed => {
                    let width = design.width(&sig.ty)?;
                    let id = vcd.var(kind, width, &sig.name);
                    let mut paths = Vec::new();
                    for l in sig_leaves {
                        let full = format!("{ipath}.{}", l.rel);
                        targets.insert(full.clone(), Target { id: id.clone(), lo: l.lo, width: l.width });
                        paths.push(full);
                    }
                    packed.push((id, width, paths));
                }
                Strategy::Leaf | Strategy::ConstFold => {
                    for l in sig_leaves {
                        let full = format!("{ipath}.{}", l.rel);
                        if folded.contains(&l.rel) || drop.contains(full.as_str()) {
                            continue;
                        }
                        let ValueExpr::Sig(name) = &ex[&l.rel] else { unreachable!() };
                        let id = vcd.var(kind, l.width, name);
                        targets.insert(full, Target { id, lo: 0, width: l.width });
                    }
                }
            }
        }
    }
    while open_depth > 0 {
        vcd.close_scope();
        open_depth -= 1;
    }
    vcd.close_scope();

    let kinds = design.leaf_kinds()?;
    let mut current: HashMap<String, LeafValue> = HashMap::new();
    let mut emitted: HashMap<String, BitString> = HashMap::new();
    let half = (design.period / 2).max(1);
    for (n, step) in design.stimulus.iter().enumerate() {
        vcd.change(step.time, &clock, "1".parse().unwrap());
        vcd.change(step.time + half, &clock, "0".parse().unwrap());
        if n == 0 {
            vcd.change(step.time, &reset, "0".parse().unwrap());
        }
        for (p, v) in &step.assigns {
            current.insert(p.clone(), v.clone());
        }
        match strategy {
            Strategy::Packed => {
                for (id, width, paths) in &packed {
                    let mut raw = BigUint::zero();
                    for p in paths {
                        let t = &targets[p];
                        let bits = encode(&current[p], t.width).to_biguint().unwrap();
                        raw |= bits << t.lo;
                    }
                    let bits = BitString::from_biguint(&raw, *width).unwrap();
                    if emitted.get(id) != Some(&bits) {
                        vcd.change(step.time, id, bits.clone());
                        emitted.insert(id.clone(), bits);
                    }
                }
            }
            _ => {
                for (p, _) in &step.assigns {
                    if let Some(t) = targets.get(p) {
                        let bits = encode(&current[p], kinds[p].1);
                        if emitted.get(&t.id) != Some(&bits) {
                            vcd.change(step.time, &t.id, bits.clone());
                            emitted.insert(t.id.clone(), bits);
                        }
                    }
                }
            }
        }
    }
    let end = design.stimulus.last().map_or(0, |s| s.time + design.period - 1);
    let trace = vcd.finish(end).map_err(|e| FixtureError::Malformed(e.to_string()))?;

    Ok(Fixture {
        name: design.name.clone(),
        strategy,
        debug,
        trace,
        expected: expected_table(design)?,
    })
}

fn int_param(name: &str, value: i64) -> Param {
    Param {
        name: name.into(),
        scala_type: "Int".into(),
        value: value.to_string(),
    }
}

fn my_bundle(n: u32) -> FieldType {
    FieldType::Bundle {
        type_name: "MyBundle".into(),
        params: vec![int_param("n", n as i64)],
        fields: vec![
            ("a".into(), FieldType::Bool),
            ("b".into(), FieldType::SInt(n)),
            (
                "s".into(),
                FieldType::Bundle {
                    type_name: "AnonymousBundle".into(),
                    params: Vec::new(),
                    fields: vec![("x".into(), FieldType::UInt(8))],
                },
            ),
            (
                "v".into(),
                FieldType::Vec {
                    len: n as usize,
                    elem: Box::new(FieldType::SInt(32)),
                },
            ),
        ],
    }
}

fn my_module(name: &str, n1: u32, n2: u32, n3: u32) -> FixtureModule {
    let sig = |name: &str, binding: &str, ty| FixtureSignal {
        name: name.into(),
        binding: binding.into(),
        ty,
    };
    FixtureModule {
        name: name.into(),
        class_name: "MyModule".into(),
        params: vec![int_param("n1", n1 as i64), int_param("n2", n2 as i64), int_param("n3", n3 as i64)],
        signals: vec![
            sig("inBundle", "IO", my_bundle(n1)),
            sig("wireBundle", "Wire", my_bundle(n2)),
            sig("outBundle", "IO", my_bundle(n3)),
            sig("state", "Reg", FieldType::Enum("MyState".into())),
        ],
        instances: Vec::new(),
    }
}

fn random_value(rng: &mut ChaCha8Rng, kind: LeafKind, width: u32, variants: u64) -> LeafValue {
    let extreme = rng.gen_bool(0.1);
    match kind {
        LeafKind::Bool => LeafValue::Bool(rng.gen()),
        LeafKind::Enum => LeafValue::Enum(rng.gen_range(0..variants)),
        LeafKind::UInt => {
            let max = (BigUint::from(1u8) << width) - 1u8;
            if extreme {
                LeafValue::UInt(if rng.gen() { max } else { BigUint::zero() })
            } else {
                let bytes: Vec<u8> = (0..width.div_ceil(8)).map(|_| rng.gen()).collect();
                LeafValue::UInt(BigUint::from_bytes_le(&bytes) & max)
            }
        }
        LeafKind::SInt => {
            let half = BigInt::from(1u8) << (width - 1);
            if extreme {
                LeafValue::SInt(if rng.gen() { half - 1 } else { -half })
            } else {
                let bytes: Vec<u8> = (0..width.div_ceil(8)).map(|_| rng.gen()).collect();
                let mask = (BigUint::from(1u8) << width) - 1u8;
                let raw = BigInt::from_biguint(Sign::Plus, BigUint::from_bytes_le(&bytes) & mask);
                LeafValue::SInt(if raw >= half { raw - (BigInt::from(1u8) << width) } else { raw })
            }
        }
    }
}

/// The typed circuit with a `MyBundle`, a `MyState` enum register and two
/// differently parameterised `MyModule` instances, driven for 100 cycles.
pub fn listing1_fixture() -> FixtureDesign {
    let mut design = FixtureDesign {
        name: "listing1".into(),
        enums: vec![FixtureEnum {
            id: "MyState".into(),
            variants: ["IDLE", "A", "B", "C", "Other"].map(String::from).to_vec(),
        }],
        modules: vec![
            FixtureModule {
                name: "TopCircuit".into(),
                class_name: "TopCircuit".into(),
                params: Vec::new(),
                signals: Vec::new(),
                instances: vec![("mod1".into(), "MyModule".into()), ("mod2".into(), "MyModule_1".into())],
            },
            my_module("MyModule", 10, 7, 9),
            my_module("MyModule_1", 1, 1, 1),
        ],
        top: "TopCircuit".into(),
        period: 10,
        stimulus: Vec::new(),
    };

    // leaves held constant for the whole run
    let tied: HashMap<&str, LeafValue> = [
        ("TopCircuit.mod1.wireBundle.v[0]", LeafValue::SInt(BigInt::from(-7))),
        ("TopCircuit.mod2.outBundle.s.x", LeafValue::UInt(BigUint::from(42u8))),
        ("TopCircuit.mod2.inBundle.a", LeafValue::Bool(true)),
    ]
    .into_iter()
    .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(0x7479_7661_7665_7331);
    let mut leaves: Vec<(String, LeafKind, u32)> = Vec::new();
    for (ipath, m) in design.instances().expect("static design") {
        for l in design.leaves(m).expect("static design") {
            leaves.push((format!("{ipath}.{}", l.rel), l.kind, l.width));
        }
    }
    let variants = design.enums[0].variants.len() as u64;
    for cycle in 0..100u64 {
        let mut assigns = Vec::new();
        for (p, kind, width) in &leaves {
            if let Some(v) = tied.get(p.as_str()) {
                if cycle == 0 {
                    assigns.push((p.clone(), v.clone()));
                }
                continue;
            }
            if cycle == 0 || rng.gen_bool(0.3) {
                assigns.push((p.clone(), random_value(&mut rng, *kind, *width, variants)));
            }
        }
        design.stimulus.push(Step {
            time: cycle * design.period,
            assigns,
        });
    }
    design
}

/// A small fetch/decode/execute toy with enum-typed state registers, a decoded
/// instruction record and two ALU instances sharing one module definition.
pub fn enum_cpu_fixture() -> FixtureDesign {
    const OPCODES: [&str; 7] = ["NOP", "ADD", "SUB", "AND", "OR", "LOAD", "STORE"];
    let opcode = || FieldType::Enum("Opcode".into());
    let sig = |name: &str, binding: &str, ty| FixtureSignal {
        name: name.into(),
        binding: binding.into(),
        ty,
    };
    let instruction = FieldType::Bundle {
        type_name: "Instruction".into(),
        params: Vec::new(),
        fields: vec![
            ("opcode".into(), opcode()),
            ("rd".into(), FieldType::UInt(5)),
            ("rs1".into(), FieldType::UInt(5)),
            ("imm".into(), FieldType::SInt(12)),
            ("valid".into(), FieldType::Bool),
        ],
    };
    let mut design = FixtureDesign {
        name: "enumcpu".into(),
        enums: vec![
            FixtureEnum {
                id: "Opcode".into(),
                variants: OPCODES.map(String::from).to_vec(),
            },
            FixtureEnum {
                id: "FetchState".into(),
                variants: ["Idle", "Fetch", "Decode", "Execute", "WriteBack"].map(String::from).to_vec(),
            },
            FixtureEnum {
                id: "UnitState".into(),
                variants: ["Ready", "Busy", "Done"].map(String::from).to_vec(),
            },
        ],
        modules: vec![
            FixtureModule {
                name: "MiniCpu".into(),
                class_name: "MiniCpu".into(),
                params: vec![int_param("nRegs", 4)],
                signals: vec![
                    sig("pc", "Reg", FieldType::UInt(16)),
                    sig("fetchState", "Reg", FieldType::Enum("FetchState".into())),
                    sig("opcode", "Reg", opcode()),
                    sig("instr", "Wire", instruction),
                    sig(
                        "regs",
                        "Reg",
                        FieldType::Vec {
                            len: 4,
                            elem: Box::new(FieldType::SInt(16)),
                        },
                    ),
                ],
                instances: vec![("alu0".into(), "Alu".into()), ("alu1".into(), "Alu".into())],
            },
            FixtureModule {
                name: "Alu".into(),
                class_name: "Alu".into(),
                params: vec![int_param("width", 16)],
                signals: vec![
                    sig("op", "IO", opcode()),
                    sig("state", "Reg", FieldType::Enum("UnitState".into())),
                    sig("result", "IO", FieldType::SInt(16)),
                ],
                instances: Vec::new(),
            },
        ],
        top: "MiniCpu".into(),
        period: 10,
        stimulus: Vec::new(),
    };

    // (opcode raw, rd, rs1, imm); raw 7 is not a defined opcode
    let program: [(u64, u64, u64, i64); 8] = [
        (5, 1, 0, 100),
        (1, 2, 1, -3),
        (2, 3, 2, 2047),
        (3, 1, 3, -2048),
        (7, 0, 0, 0),
        (4, 2, 1, 15),
        (6, 0, 2, 8),
        (0, 0, 0, 0),
    ];
    let uint = |n: u64| LeafValue::UInt(BigUint::from(n));
    let sint = |n: i64| LeafValue::SInt(BigInt::from(n));
    let mut regs = [0i64; 4];
    let mut steps: Vec<Vec<(String, LeafValue)>> = Vec::new();
    let p = |s: &str| format!("MiniCpu.{s}");

    let mut reset = vec![
        (p("pc"), uint(0)),
        (p("fetchState"), LeafValue::Enum(0)),
        (p("opcode"), LeafValue::Enum(0)),
        (p("instr.opcode"), LeafValue::Enum(0)),
        (p("instr.rd"), uint(0)),
        (p("instr.rs1"), uint(0)),
        (p("instr.imm"), sint(0)),
        (p("instr.valid"), LeafValue::Bool(false)),
    ];
    for i in 0..4 {
        reset.push((p(&format!("regs[{i}]")), sint(0)));
    }
    for alu in ["alu0", "alu1"] {
        reset.push((p(&format!("{alu}.op")), LeafValue::Enum(0)));
        reset.push((p(&format!("{alu}.state")), LeafValue::Enum(0)));
        reset.push((p(&format!("{alu}.result")), sint(0)));
    }
    steps.push(reset);

    for (n, &(op, rd, rs1, imm)) in program.iter().enumerate() {
        let pc = (n as u64) * 4;
        steps.push(vec![(p("fetchState"), LeafValue::Enum(1)), (p("pc"), uint(pc))]);
        steps.push(vec![
            (p("fetchState"), LeafValue::Enum(2)),
            (p("instr.opcode"), LeafValue::Enum(op)),
            (p("instr.rd"), uint(rd)),
            (p("instr.rs1"), uint(rs1)),
            (p("instr.imm"), sint(imm)),
            (p("instr.valid"), LeafValue::Bool(true)),
        ]);
        let a = regs[rs1 as usize % 4];
        let result = match op {
            1 => a.wrapping_add(imm),
            2 => a.wrapping_sub(imm),
            3 => a & imm,
            4 => a | imm,
            5 => imm,
            _ => 0,
        };
        let result = ((result + 32768).rem_euclid(65536)) - 32768;
        steps.push(vec![
            (p("fetchState"), LeafValue::Enum(3)),
            (p("opcode"), LeafValue::Enum(op)),
            (p("alu0.op"), LeafValue::Enum(op)),
            (p("alu0.state"), LeafValue::Enum(1)),
            (p("instr.valid"), LeafValue::Bool(false)),
        ]);
        let mut wb = vec![
            (p("fetchState"), LeafValue::Enum(4)),
            (p("alu0.state"), LeafValue::Enum(2)),
            (p("alu0.result"), sint(result)),
        ];
        if matches!(op, 1..=5) && rd < 3 {
            // regs[3] is never written back
            regs[rd as usize] = result;
            wb.push((p(&format!("regs[{rd}]")), sint(result)));
        }
        steps.push(wb);
    }
    steps.push(vec![
        (p("fetchState"), LeafValue::Enum(0)),
        (p("alu0.state"), LeafValue::Enum(0)),
    ]);

    design.stimulus = steps
        .into_iter()
        .enumerate()
        .map(|(i, assigns)| Step {
            time: i as u64 * design.period,
            assigns,
        })
        .collect();
    design
}

/// Looks a built-in fixture up by its command-line name.
pub fn fixture_by_name(name: &str) -> Result<FixtureDesign, FixtureError> {
    match name {
        "listing1" => Ok(listing1_fixture()),
        "enumcpu" => Ok(enum_cpu_fixture()),
        other => Err(FixtureError::UnknownFixture(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hgldd::validate_hgldd;

    #[test]
    fn enum_width_is_ceil_log2() {
        let e = |n: usize| FixtureEnum {
            id: "E".into(),
            variants: (0..n).map(|i| i.to_string()).collect(),
        };
        assert_eq!(e(1).width(), 1);
        assert_eq!(e(2).width(), 1);
        assert_eq!(e(3).width(), 2);
        assert_eq!(e(4).width(), 2);
        assert_eq!(e(5).width(), 3);
        assert_eq!(e(8).width(), 3);
        assert_eq!(e(9).width(), 4);
    }

    #[test]
    fn listing1_shape() {
        let d = listing1_fixture();
        d.check().unwrap();
        let top = d.module("TopCircuit").unwrap();
        assert_eq!(top.instances.iter().map(|(i, _)| i.as_str()).collect::<Vec<_>>(), ["mod1", "mod2"]);
        let mod1 = d.module("MyModule").unwrap();
        let params: Vec<_> = mod1.params.iter().map(|p| (p.name.as_str(), p.value.as_str())).collect();
        assert_eq!(params, [("n1", "10"), ("n2", "7"), ("n3", "9")]);
        assert_eq!(d.enums[0].variants, ["IDLE", "A", "B", "C", "Other"]);
        assert_eq!(d.enums[0].width(), 3);
        assert_eq!(d.stimulus.len(), 100);
        assert_eq!(d, listing1_fixture(), "stimulus is seeded");
    }

    #[test]
    fn leaf_strategy_emits_one_var_per_leaf() {
        let f = flatten_design(&listing1_fixture(), Strategy::Leaf).unwrap();
        assert!(validate_hgldd(&f.debug).is_empty());
        let paths: Vec<String> = f.trace.flatten_hierarchy().into_iter().map(|(p, _)| p).collect();
        assert!(paths.contains(&"TOP.TopCircuit.mod1.state".to_string()));
        assert!(paths.contains(&"TOP.TopCircuit.mod1.inBundle_s_x".to_string()));
        assert!(paths.contains(&"TOP.TopCircuit.mod1.inBundle_v_9".to_string()));
        let state = f.trace.flatten_hierarchy().into_iter().find(|(p, _)| p == "TOP.TopCircuit.mod1.state").unwrap().1;
        assert_eq!(state.width, 3);
    }

    #[test]
    fn packed_strategy_emits_wide_vars_and_slices() {
        let f = flatten_design(&listing1_fixture(), Strategy::Packed).unwrap();
        assert!(validate_hgldd(&f.debug).is_empty());
        let flat = f.trace.flatten_hierarchy();
        let wb = flat.iter().find(|(p, _)| p == "TOP.TopCircuit.mod1.wireBundle").unwrap().1;
        // a + b(7) + s.x(8) + v(7 x 32)
        assert_eq!(wb.width, 1 + 7 + 8 + 7 * 32);
        let m = f.debug.module("MyModule").unwrap();
        let DebugKind::Record { fields } = &m.variables[1].kind else { panic!() };
        let DebugKind::Ground { expr, .. } = &fields[0].kind else { panic!() };
        assert_eq!(
            *expr,
            ValueExpr::Slice { of: Box::new(ValueExpr::Sig("wireBundle".into())), hi: 239, lo: 239 }
        );
    }

    #[test]
    fn constfold_drops_constant_leaves() {
        let f = flatten_design(&listing1_fixture(), Strategy::ConstFold).unwrap();
        let m = f.debug.module("MyModule_1").unwrap();
        let DebugKind::Record { fields } = &m.variables[2].kind else { panic!() };
        let DebugKind::Record { fields: s } = &fields[2].kind else { panic!() };
        let DebugKind::Ground { expr, .. } = &s[0].kind else { panic!() };
        assert_eq!(*expr, ValueExpr::Const("00101010".parse().unwrap()));
        let paths: Vec<String> = f.trace.flatten_hierarchy().into_iter().map(|(p, _)| p).collect();
        assert!(!paths.iter().any(|p| p == "TOP.TopCircuit.mod2.outBundle_s_x"));
        assert!(paths.iter().any(|p| p == "TOP.TopCircuit.mod1.outBundle_s_x"));
    }

    #[test]
    fn enum_cpu_has_undefined_opcode() {
        let d = enum_cpu_fixture();
        d.check().unwrap();
        let f = flatten_design(&d, Strategy::Leaf).unwrap();
        let unknown = f
            .expected
            .iter()
            .filter(|(p, _, v)| *p == "MiniCpu.opcode" && matches!(v, TypedValue::EnumUnknown(_)))
            .count();
        assert!(unknown > 0);
        // alu0 and alu1 share one module definition
        assert_eq!(f.debug.modules.iter().filter(|m| m.name == "Alu").count(), 1);
    }

    #[test]
    fn strategy_names() {
        for s in Strategy::ALL {
            assert_eq!(s.as_str().parse::<Strategy>().unwrap(), s);
        }
        assert!(matches!("zip".parse::<Strategy>(), Err(FixtureError::UnsupportedStrategy(_))));
    }

    #[test]
    fn two_complement_encoder() {
        assert_eq!(encode(&LeafValue::SInt(BigInt::from(-1)), 4).to_string(), "1111");
        assert_eq!(encode(&LeafValue::SInt(BigInt::from(-8)), 4).to_string(), "1000");
        assert_eq!(encode(&LeafValue::SInt(BigInt::from(7)), 4).to_string(), "0111");
        assert_eq!(encode(&LeafValue::Enum(4), 3).to_string(), "100");
    }

    #[test]
    fn malformed_designs_are_rejected() {
        let mut d = enum_cpu_fixture();
        d.stimulus[0].assigns.push(("MiniCpu.pc".into(), LeafValue::UInt(BigUint::from(1u32 << 16))));
        assert!(matches!(d.check(), Err(FixtureError::Malformed(_))));
        let mut d = enum_cpu_fixture();
        d.stimulus[0].assigns.retain(|(p, _)| p != "MiniCpu.pc");
        assert!(matches!(d.check(), Err(FixtureError::Malformed(_))));
    }
}
