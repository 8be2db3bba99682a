// SPDX-License-Identifier: Apache-2.0

//! Debug metadata describing source-level types, scopes and how each source
//! value is reassembled from emitted HDL signals.
//!
//! The on-disk form is a JSON document with version `tywaves-1`:
//!
//! ```json
//! {"version": "tywaves-1", "top": "TopCircuit",
//!  "enums": [{"id": "MyState", "variants": {"0": "IDLE", "1": "A"}}],
//!  "modules": [{"name": "TopCircuit", "hdl_module": "TopCircuit",
//!               "type_info": {"type_name": "TopCircuit", "binding": "Module", "params": []},
//!               "variables": [], "scopes": [],
//!               "instances": [{"name": "mod1", "module": "MyModule", "hdl_instance": "mod1"}]}]}
//! ```
//!
//! Variables are `{"name", "type_info"?, "kind": "ground"|"record"|"array", ...}`.
//! Ground variables carry `width`, `encoding`, optional `enum` and `expr` inline;
//! records carry `fields` and arrays carry `elements`.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::bits::BitString;
use crate::diag::{Diagnostic, DiagnosticKind};

pub const VERSION: &str = "tywaves-1";

#[derive(Debug, Error)]
pub enum HglddError {
    #[error("[hgldd] syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("[hgldd] schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("[hgldd] unknown version `{0}` (expected `{VERSION}`)")]
    UnknownVersion(String),
}

pub type Result<T> = std::result::Result<T, HglddError>;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TypeInfo {
    pub type_name: Option<String>,
    pub binding: Option<String>,
    pub params: Vec<Param>,
}

impl TypeInfo {
    pub fn is_empty(&self) -> bool {
        self.type_name.is_none() && self.binding.is_none() && self.params.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub scala_type: String,
    pub value: String,
}

/// Named variants of an enumeration, keyed by their unsigned encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnumDef {
    pub id: String,
    variants: HashMap<u64, String>,
}

impl EnumDef {
    pub fn new<I, S>(id: impl Into<String>, variants: I) -> Self
    where
        I: IntoIterator<Item = (u64, S)>,
        S: Into<String>,
    {
        EnumDef {
            id: id.into(),
            variants: variants.into_iter().map(|(k, v)| (k, v.into())).collect(),
        }
    }

    pub fn lookup(&self, value: u64) -> Option<&str> {
        self.variants.get(&value).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.variants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variants.is_empty()
    }

    /// Variants in ascending key order.
    pub fn variants(&self) -> Vec<(u64, &str)> {
        let mut v: Vec<_> = self.variants.iter().map(|(k, n)| (*k, n.as_str())).collect();
        v.sort_unstable_by_key(|(k, _)| *k);
        v
    }
}

pub fn enum_lookup(def: &EnumDef, value: u64) -> Option<&str> {
    def.lookup(value)
}

/// Expression reassembling a source value from HDL signals of the enclosing module.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValueExpr {
    Sig(String),
    Slice {
        of: Box<ValueExpr>,
        hi: u32,
        lo: u32,
    },
    /// Parts are MSB first.
    Concat(Vec<ValueExpr>),
    Const(BitString),
}

impl ValueExpr {
    /// Width when it does not depend on signal declarations.
    pub fn static_width(&self) -> Option<u32> {
        match self {
            ValueExpr::Sig(_) => None,
            ValueExpr::Slice { hi, lo, .. } => (hi >= lo).then(|| hi - lo + 1),
            ValueExpr::Concat(parts) => parts.iter().map(ValueExpr::static_width).sum(),
            ValueExpr::Const(bits) => Some(bits.width()),
        }
    }

    /// Names of all referenced signals, in expression order.
    pub fn signals(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_signals(&mut out);
        out
    }

    fn collect_signals<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            ValueExpr::Sig(s) => out.push(s),
            ValueExpr::Slice { of, .. } => of.collect_signals(out),
            ValueExpr::Concat(parts) => parts.iter().for_each(|p| p.collect_signals(out)),
            ValueExpr::Const(_) => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Encoding {
    Bool,
    Unsigned,
    Signed,
    Enum,
}

impl Encoding {
    pub fn parse(s: &str) -> Option<Encoding> {
        match s {
            "bool" => Some(Encoding::Bool),
            "unsigned" => Some(Encoding::Unsigned),
            "signed" => Some(Encoding::Signed),
            "enum" => Some(Encoding::Enum),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Encoding::Bool => "bool",
            Encoding::Unsigned => "unsigned",
            Encoding::Signed => "signed",
            Encoding::Enum => "enum",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DebugKind {
    Ground {
        width: u32,
        encoding: Encoding,
        enum_ref: Option<String>,
        expr: ValueExpr,
    },
    Record {
        fields: Vec<SubfieldDebug>,
    },
    Array {
        elements: Vec<VariableDebug>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableDebug {
    pub name: String,
    pub type_info: TypeInfo,
    pub kind: DebugKind,
}

/// Subfields of aggregates share the variable record layout.
pub type SubfieldDebug = VariableDebug;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScopeDebug {
    pub name: String,
    pub variables: Vec<VariableDebug>,
    pub scopes: Vec<ScopeDebug>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceDebug {
    pub name: String,
    pub module: String,
    pub hdl_instance: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModuleDebug {
    pub name: String,
    pub type_info: TypeInfo,
    pub hdl_module: String,
    pub variables: Vec<VariableDebug>,
    pub scopes: Vec<ScopeDebug>,
    pub instances: Vec<InstanceDebug>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HglddDocument {
    pub version: String,
    pub top: Option<String>,
    pub enums: Vec<EnumDef>,
    pub modules: Vec<ModuleDebug>,
    /// Paths of input fields that were not part of the schema.
    pub unknown_fields: Vec<String>,
}

impl HglddDocument {
    pub fn module(&self, name: &str) -> Option<&ModuleDebug> {
        self.modules.iter().find(|m| m.name == name)
    }

    pub fn enum_def(&self, id: &str) -> Option<&EnumDef> {
        self.enums.iter().find(|e| e.id == id)
    }

    pub fn to_json(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("version".into(), json!(self.version));
        if let Some(top) = &self.top {
            obj.insert("top".into(), json!(top));
        }
        obj.insert(
            "enums".into(),
            Value::Array(
                self.enums
                    .iter()
                    .map(|e| {
                        let variants: Map<String, Value> = e
                            .variants()
                            .into_iter()
                            .map(|(k, n)| (k.to_string(), json!(n)))
                            .collect();
                        json!({"id": e.id, "variants": variants})
                    })
                    .collect(),
            ),
        );
        obj.insert(
            "modules".into(),
            Value::Array(self.modules.iter().map(module_to_json).collect()),
        );
        Value::Object(obj)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("serializing a Value cannot fail")
    }
}

fn type_info_to_json(ti: &TypeInfo) -> Value {
    let mut obj = Map::new();
    if let Some(t) = &ti.type_name {
        obj.insert("type_name".into(), json!(t));
    }
    if let Some(b) = &ti.binding {
        obj.insert("binding".into(), json!(b));
    }
    obj.insert(
        "params".into(),
        ti.params
            .iter()
            .map(|p| json!({"name": p.name, "type": p.scala_type, "value": p.value}))
            .collect(),
    );
    Value::Object(obj)
}

fn expr_to_json(e: &ValueExpr) -> Value {
    match e {
        ValueExpr::Sig(s) => json!({ "sig": s }),
        ValueExpr::Slice { of, hi, lo } => {
            json!({"slice": {"of": expr_to_json(of), "hi": hi, "lo": lo}})
        }
        ValueExpr::Concat(parts) => {
            json!({ "concat": parts.iter().map(expr_to_json).collect::<Vec<_>>() })
        }
        ValueExpr::Const(bits) => json!({ "const": bits.to_string() }),
    }
}

fn var_to_json(v: &VariableDebug) -> Value {
    let mut obj = Map::new();
    obj.insert("name".into(), json!(v.name));
    if !v.type_info.is_empty() {
        obj.insert("type_info".into(), type_info_to_json(&v.type_info));
    }
    match &v.kind {
        DebugKind::Ground {
            width,
            encoding,
            enum_ref,
            expr,
        } => {
            obj.insert("kind".into(), json!("ground"));
            obj.insert("width".into(), json!(width));
            obj.insert("encoding".into(), json!(encoding.as_str()));
            if let Some(e) = enum_ref {
                obj.insert("enum".into(), json!(e));
            }
            obj.insert("expr".into(), expr_to_json(expr));
        }
        DebugKind::Record { fields } => {
            obj.insert("kind".into(), json!("record"));
            obj.insert("fields".into(), fields.iter().map(var_to_json).collect());
        }
        DebugKind::Array { elements } => {
            obj.insert("kind".into(), json!("array"));
            obj.insert("elements".into(), elements.iter().map(var_to_json).collect());
        }
    }
    Value::Object(obj)
}

fn scope_to_json(s: &ScopeDebug) -> Value {
    json!({
        "name": s.name,
        "variables": s.variables.iter().map(var_to_json).collect::<Vec<_>>(),
        "scopes": s.scopes.iter().map(scope_to_json).collect::<Vec<_>>(),
    })
}

fn module_to_json(m: &ModuleDebug) -> Value {
    let mut obj = Map::new();
    obj.insert("name".into(), json!(m.name));
    obj.insert("hdl_module".into(), json!(m.hdl_module));
    if !m.type_info.is_empty() {
        obj.insert("type_info".into(), type_info_to_json(&m.type_info));
    }
    obj.insert("variables".into(), m.variables.iter().map(var_to_json).collect());
    obj.insert("scopes".into(), m.scopes.iter().map(scope_to_json).collect());
    obj.insert(
        "instances".into(),
        m.instances
            .iter()
            .map(|i| json!({"name": i.name, "module": i.module, "hdl_instance": i.hdl_instance}))
            .collect(),
    );
    Value::Object(obj)
}

// ---- reading ----

struct Reader {
    unknown: Vec<String>,
}

fn schema(path: &str, message: impl Into<String>) -> HglddError {
    HglddError::Schema {
        path: path.to_string(),
        message: message.into(),
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

impl Reader {
    fn object<'v>(&mut self, v: &'v Value, path: &str, known: &[&str]) -> Result<&'v Map<String, Value>> {
        let map = v
            .as_object()
            .ok_or_else(|| schema(path, "expected an object"))?;
        for k in map.keys() {
            if !known.contains(&k.as_str()) {
                self.unknown.push(join(path, k));
            }
        }
        Ok(map)
    }

    fn string(&self, map: &Map<String, Value>, key: &str, path: &str) -> Result<String> {
        self.opt_string(map, key, path)?
            .ok_or_else(|| schema(&join(path, key), "missing required string"))
    }

    fn opt_string(&self, map: &Map<String, Value>, key: &str, path: &str) -> Result<Option<String>> {
        match map.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(schema(&join(path, key), "expected a string")),
        }
    }

    fn uint(&self, map: &Map<String, Value>, key: &str, path: &str) -> Result<u32> {
        let p = join(path, key);
        let v = map.get(key).ok_or_else(|| schema(&p, "missing required integer"))?;
        v.as_u64()
            .and_then(|n| u32::try_from(n).ok())
            .ok_or_else(|| schema(&p, "expected a non-negative integer"))
    }

    fn array<'v>(&self, map: &'v Map<String, Value>, key: &str, path: &str, required: bool) -> Result<&'v [Value]> {
        match map.get(key) {
            None if !required => Ok(&[]),
            None => Err(schema(&join(path, key), "missing required array")),
            Some(Value::Array(a)) => Ok(a),
            Some(_) => Err(schema(&join(path, key), "expected an array")),
        }
    }

    fn type_info(&mut self, map: &Map<String, Value>, path: &str) -> Result<TypeInfo> {
        let Some(v) = map.get("type_info").filter(|v| !v.is_null()) else {
            return Ok(TypeInfo::default());
        };
        let path = join(path, "type_info");
        let obj = self.object(v, &path, &["type_name", "binding", "params"])?;
        let mut params = Vec::new();
        for (i, p) in self.array(obj, "params", &path, false)?.iter().enumerate() {
            let pp = format!("{path}.params[{i}]");
            let po = self.object(p, &pp, &["name", "type", "value"])?;
            let name = self.string(po, "name", &pp)?;
            if name.is_empty() {
                return Err(schema(&join(&pp, "name"), "parameter name must not be empty"));
            }
            params.push(Param {
                name,
                scala_type: self.string(po, "type", &pp)?,
                value: self.string(po, "value", &pp)?,
            });
        }
        Ok(TypeInfo {
            type_name: self.opt_string(obj, "type_name", &path)?,
            binding: self.opt_string(obj, "binding", &path)?,
            params,
        })
    }

    fn expr(&mut self, v: &Value, path: &str) -> Result<ValueExpr> {
        let obj = v
            .as_object()
            .ok_or_else(|| schema(path, "expected an expression object"))?;
        if obj.len() != 1 {
            return Err(schema(path, "expression must have exactly one of sig/slice/concat/const"));
        }
        let (key, inner) = obj.iter().next().unwrap();
        let p = join(path, key);
        match key.as_str() {
            "sig" => match inner {
                Value::String(s) if !s.is_empty() => Ok(ValueExpr::Sig(s.clone())),
                _ => Err(schema(&p, "expected a non-empty signal name")),
            },
            "slice" => {
                let so = self.object(inner, &p, &["of", "hi", "lo"])?;
                let of = so.get("of").ok_or_else(|| schema(&join(&p, "of"), "missing operand"))?;
                Ok(ValueExpr::Slice {
                    of: Box::new(self.expr(of, &join(&p, "of"))?),
                    hi: self.uint(so, "hi", &p)?,
                    lo: self.uint(so, "lo", &p)?,
                })
            }
            "concat" => {
                let parts = inner
                    .as_array()
                    .ok_or_else(|| schema(&p, "expected an array of expressions"))?;
                if parts.is_empty() {
                    return Err(schema(&p, "concat must have at least one part"));
                }
                let parts = parts
                    .iter()
                    .enumerate()
                    .map(|(i, e)| self.expr(e, &format!("{p}[{i}]")))
                    .collect::<Result<Vec<_>>>()?;
                Ok(ValueExpr::Concat(parts))
            }
            "const" => {
                let s = inner.as_str().ok_or_else(|| schema(&p, "expected a 01XZ string"))?;
                let bits = s.parse().map_err(|e| schema(&p, format!("{e}")))?;
                Ok(ValueExpr::Const(bits))
            }
            other => Err(schema(path, format!("unknown expression kind `{other}`"))),
        }
    }

    fn variable(&mut self, v: &Value, path: &str) -> Result<VariableDebug> {
        const KNOWN: &[&str] = &[
            "name", "type_info", "kind", "width", "encoding", "enum", "expr", "fields", "elements",
        ];
        let obj = self.object(v, path, KNOWN)?;
        let name = self.string(obj, "name", path)?;
        let type_info = self.type_info(obj, path)?;
        let kind_str = self.string(obj, "kind", path)?;
        let misplaced = |keys: &[&str]| -> Result<()> {
            for k in keys {
                if obj.contains_key(*k) {
                    return Err(schema(&join(path, k), format!("not allowed for kind `{kind_str}`")));
                }
            }
            Ok(())
        };
        let kind = match kind_str.as_str() {
            "ground" => {
                misplaced(&["fields", "elements"])?;
                let width = self.uint(obj, "width", path)?;
                if width == 0 {
                    return Err(schema(&join(path, "width"), "width must be at least 1"));
                }
                let enc_str = self.string(obj, "encoding", path)?;
                let encoding = Encoding::parse(&enc_str).ok_or_else(|| {
                    schema(&join(path, "encoding"), format!("unknown encoding `{enc_str}`"))
                })?;
                let expr_v = obj
                    .get("expr")
                    .ok_or_else(|| schema(&join(path, "expr"), "missing required expression"))?;
                DebugKind::Ground {
                    width,
                    encoding,
                    enum_ref: self.opt_string(obj, "enum", path)?,
                    expr: self.expr(expr_v, &join(path, "expr"))?,
                }
            }
            "record" => {
                misplaced(&["width", "encoding", "enum", "expr", "elements"])?;
                let fields = self
                    .array(obj, "fields", path, true)?
                    .iter()
                    .enumerate()
                    .map(|(i, f)| self.variable(f, &format!("{path}.fields[{i}]")))
                    .collect::<Result<Vec<_>>>()?;
                DebugKind::Record { fields }
            }
            "array" => {
                misplaced(&["width", "encoding", "enum", "expr", "fields"])?;
                let elements = self
                    .array(obj, "elements", path, true)?
                    .iter()
                    .enumerate()
                    .map(|(i, f)| self.variable(f, &format!("{path}.elements[{i}]")))
                    .collect::<Result<Vec<_>>>()?;
                DebugKind::Array { elements }
            }
            other => {
                return Err(schema(&join(path, "kind"), format!("unknown variable kind `{other}`")))
            }
        };
        Ok(VariableDebug {
            name,
            type_info,
            kind,
        })
    }

    fn variables(&mut self, map: &Map<String, Value>, path: &str) -> Result<Vec<VariableDebug>> {
        self.array(map, "variables", path, false)?
            .iter()
            .enumerate()
            .map(|(i, v)| self.variable(v, &format!("{path}.variables[{i}]")))
            .collect()
    }

    fn scope(&mut self, v: &Value, path: &str) -> Result<ScopeDebug> {
        let obj = self.object(v, path, &["name", "variables", "scopes"])?;
        Ok(ScopeDebug {
            name: self.string(obj, "name", path)?,
            variables: self.variables(obj, path)?,
            scopes: self.scopes(obj, path)?,
        })
    }

    fn scopes(&mut self, map: &Map<String, Value>, path: &str) -> Result<Vec<ScopeDebug>> {
        self.array(map, "scopes", path, false)?
            .iter()
            .enumerate()
            .map(|(i, s)| self.scope(s, &format!("{path}.scopes[{i}]")))
            .collect()
    }

    fn module(&mut self, v: &Value, path: &str) -> Result<ModuleDebug> {
        let obj = self.object(
            v,
            path,
            &["name", "hdl_module", "type_info", "variables", "scopes", "instances"],
        )?;
        let hdl_module = self.string(obj, "hdl_module", path)?;
        if hdl_module.is_empty() {
            return Err(schema(&join(path, "hdl_module"), "must not be empty"));
        }
        let mut instances = Vec::new();
        for (i, inst) in self.array(obj, "instances", path, false)?.iter().enumerate() {
            let ip = format!("{path}.instances[{i}]");
            let io = self.object(inst, &ip, &["name", "module", "hdl_instance"])?;
            instances.push(InstanceDebug {
                name: self.string(io, "name", &ip)?,
                module: self.string(io, "module", &ip)?,
                hdl_instance: self.string(io, "hdl_instance", &ip)?,
            });
        }
        Ok(ModuleDebug {
            name: self.string(obj, "name", path)?,
            type_info: self.type_info(obj, path)?,
            hdl_module,
            variables: self.variables(obj, path)?,
            scopes: self.scopes(obj, path)?,
            instances,
        })
    }

    fn enum_def(&mut self, v: &Value, path: &str) -> Result<EnumDef> {
        let obj = self.object(v, path, &["id", "variants"])?;
        let id = self.string(obj, "id", path)?;
        let vp = join(path, "variants");
        let vars = obj
            .get("variants")
            .and_then(Value::as_object)
            .ok_or_else(|| schema(&vp, "expected an object mapping integers to names"))?;
        let mut variants = BTreeMap::new();
        for (k, name) in vars {
            let key: u64 = k
                .parse()
                .ok()
                .filter(|_| k.bytes().all(|b| b.is_ascii_digit()))
                .ok_or_else(|| schema(&vp, format!("variant key `{k}` is not a non-negative decimal")))?;
            let name = name
                .as_str()
                .filter(|s| !s.is_empty())
                .ok_or_else(|| schema(&join(&vp, k), "variant name must be a non-empty string"))?;
            if variants.insert(key, name.to_string()).is_some() {
                return Err(schema(&vp, format!("duplicate variant value {key}")));
            }
        }
        Ok(EnumDef::new(id, variants))
    }
}

/// Parses a `tywaves-1` debug document.
pub fn parse_hgldd(input: &str) -> Result<HglddDocument> {
    let root: Value = serde_json::from_str(input).map_err(|e| HglddError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut r = Reader {
        unknown: Vec::new(),
    };
    let obj = r.object(&root, "", &["version", "top", "enums", "modules"])?;
    let version = r.string(obj, "version", "")?;
    if version != VERSION {
        return Err(HglddError::UnknownVersion(version));
    }
    let top = r.opt_string(obj, "top", "")?;
    let enums = r
        .array(obj, "enums", "", false)?
        .iter()
        .enumerate()
        .map(|(i, e)| r.enum_def(e, &format!("enums[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    let modules = r
        .array(obj, "modules", "", true)?
        .iter()
        .enumerate()
        .map(|(i, m)| r.module(m, &format!("modules[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    Ok(HglddDocument {
        version,
        top,
        enums,
        modules,
        unknown_fields: r.unknown,
    })
}

/// Consistency checks that need no trace. Returns an empty list for a clean document.
pub fn validate_hgldd(doc: &HglddDocument) -> Vec<Diagnostic> {
    let mut out: Vec<Diagnostic> = doc
        .unknown_fields
        .iter()
        .map(|p| Diagnostic::new(DiagnosticKind::UnknownField, p, "field is not part of the schema and was ignored"))
        .collect();
    let enum_ids: HashSet<&str> = doc.enums.iter().map(|e| e.id.as_str()).collect();
    let module_names: HashSet<&str> = doc.modules.iter().map(|m| m.name.as_str()).collect();

    if let Some(top) = &doc.top {
        if !module_names.contains(top.as_str()) {
            out.push(Diagnostic::new(
                DiagnosticKind::UnresolvedTop,
                top,
                "top module is not defined in the document",
            ));
        }
    }

    for m in &doc.modules {
        let mut names = HashSet::new();
        let mut dup = |name: &str, out: &mut Vec<Diagnostic>| {
            if !names.insert(name.to_string()) {
                out.push(Diagnostic::new(
                    DiagnosticKind::DuplicateName,
                    format!("{}.{}", m.name, name),
                    "name is declared more than once in this scope",
                ));
            }
        };
        for v in &m.variables {
            dup(&v.name, &mut out);
        }
        for s in &m.scopes {
            dup(&s.name, &mut out);
        }
        for inst in &m.instances {
            dup(&inst.name, &mut out);
            if !module_names.contains(inst.module.as_str()) {
                out.push(Diagnostic::new(
                    DiagnosticKind::UnresolvedModule,
                    format!("{}.{}", m.name, inst.name),
                    format!("instance refers to undefined module `{}`", inst.module),
                ));
            }
        }
        for v in &m.variables {
            validate_var(v, &format!("{}.{}", m.name, v.name), &enum_ids, &mut out);
        }
        for s in &m.scopes {
            validate_scope(s, &format!("{}.{}", m.name, s.name), &enum_ids, &mut out);
        }
    }
    out
}

fn validate_scope(s: &ScopeDebug, path: &str, enums: &HashSet<&str>, out: &mut Vec<Diagnostic>) {
    let mut names = HashSet::new();
    for name in s.variables.iter().map(|v| &v.name).chain(s.scopes.iter().map(|c| &c.name)) {
        if !names.insert(name) {
            out.push(Diagnostic::new(
                DiagnosticKind::DuplicateName,
                format!("{path}.{name}"),
                "name is declared more than once in this scope",
            ));
        }
    }
    for v in &s.variables {
        validate_var(v, &format!("{path}.{}", v.name), enums, out);
    }
    for c in &s.scopes {
        validate_scope(c, &format!("{path}.{}", c.name), enums, out);
    }
}

fn validate_var(v: &VariableDebug, path: &str, enums: &HashSet<&str>, out: &mut Vec<Diagnostic>) {
    match &v.kind {
        DebugKind::Ground {
            width,
            encoding,
            enum_ref,
            expr,
        } => {
            match (encoding, enum_ref) {
                (Encoding::Enum, None) => out.push(Diagnostic::new(
                    DiagnosticKind::MissingEnumRef,
                    path,
                    "enum-encoded variable has no enum reference",
                )),
                (_, Some(id)) if !enums.contains(id.as_str()) => out.push(Diagnostic::new(
                    DiagnosticKind::DanglingEnumRef,
                    path,
                    format!("enum `{id}` is not defined"),
                )),
                _ => {}
            }
            if *encoding == Encoding::Bool && *width != 1 {
                out.push(Diagnostic::new(
                    DiagnosticKind::BoolWidth,
                    path,
                    format!("bool-encoded variable has width {width}"),
                ));
            }
            validate_expr(expr, path, out);
            if let Some(w) = expr.static_width() {
                if w != *width {
                    out.push(Diagnostic::new(
                        DiagnosticKind::WidthMismatch,
                        path,
                        format!("expression width {w} differs from declared width {width}"),
                    ));
                }
            }
        }
        DebugKind::Record { fields } => {
            let mut names = HashSet::new();
            for f in fields {
                if !names.insert(&f.name) {
                    out.push(Diagnostic::new(
                        DiagnosticKind::DuplicateName,
                        format!("{path}.{}", f.name),
                        "field is declared more than once",
                    ));
                }
                validate_var(f, &format!("{path}.{}", f.name), enums, out);
            }
        }
        DebugKind::Array { elements } => {
            for (i, e) in elements.iter().enumerate() {
                validate_var(e, &format!("{path}[{i}]"), enums, out);
            }
        }
    }
}

fn validate_expr(e: &ValueExpr, path: &str, out: &mut Vec<Diagnostic>) {
    match e {
        ValueExpr::Slice { of, hi, lo } => {
            if hi < lo {
                out.push(Diagnostic::new(
                    DiagnosticKind::InvalidSliceBounds,
                    path,
                    format!("slice [{hi}:{lo}] has hi < lo"),
                ));
            }
            if let Some(w) = of.static_width() {
                if *hi >= w {
                    out.push(Diagnostic::new(
                        DiagnosticKind::InvalidSliceBounds,
                        path,
                        format!("slice [{hi}:{lo}] exceeds operand width {w}"),
                    ));
                }
            }
            validate_expr(of, path, out);
        }
        ValueExpr::Concat(parts) => parts.iter().for_each(|p| validate_expr(p, path, out)),
        ValueExpr::Sig(_) | ValueExpr::Const(_) => {}
    }
}
