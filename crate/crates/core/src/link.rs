// SPDX-License-Identifier: Apache-2.0

//! Linking debug metadata against a trace.
//!
//! [`build_tyvcd`] walks the instance tree from the top module, pairs each
//! instance with the VCD scope of the same HDL instance name and binds every
//! signal reference of a ground leaf to a declared trace variable. Leaves that
//! cannot be bound stay in the tree in a degraded state and are reported as
//! diagnostics; trace variables that no debug record references are appended
//! as raw leaves.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use thiserror::Error;

use crate::bits::BitString;
use crate::diag::{Diagnostic, DiagnosticKind};
use crate::hgldd::{
    DebugKind, EnumDef, Encoding, HglddDocument, ModuleDebug, ScopeDebug, TypeInfo, ValueExpr,
    VariableDebug,
};
use crate::vcd::{VcdDocument, VcdScope, VcdVar};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MergeError {
    #[error("module `{0}` is defined in more than one debug document")]
    DuplicateModule(String),
    #[error("enum `{0}` is defined differently in more than one debug document")]
    DuplicateEnum(String),
    #[error("no debug document names a top module")]
    NoTop,
    #[error("more than one debug document names a top module (`{0}` and `{1}`)")]
    MultipleTops(String, String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LinkError {
    #[error("debug information names no top module")]
    NoTop,
    #[error("top module `{0}` is not defined in the debug information")]
    UnresolvedTop(String),
    #[error("no scope named `{0}` for the top module was found in the trace")]
    TopScopeNotFound(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PathError {
    #[error("path not found; longest resolved prefix is `{0}`")]
    PathNotFound(String),
    #[error("index {index} out of range for `{path}` with {len} elements")]
    IndexOutOfRange { path: String, index: usize, len: usize },
    #[error("`{0}` names a scope, not a variable")]
    NotAVariable(String),
    #[error("malformed path `{0}`")]
    Malformed(String),
}

/// A value expression whose signal references are bound to trace variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResolvedExpr {
    Sig { id_code: String, width: u32 },
    Slice { of: Box<ResolvedExpr>, hi: u32, lo: u32 },
    Concat(Vec<ResolvedExpr>),
    Const(BitString),
}

impl ResolvedExpr {
    pub fn width(&self) -> u32 {
        match self {
            ResolvedExpr::Sig { width, .. } => *width,
            ResolvedExpr::Slice { hi, lo, .. } => hi - lo + 1,
            ResolvedExpr::Concat(parts) => parts.iter().map(ResolvedExpr::width).sum(),
            ResolvedExpr::Const(b) => b.width(),
        }
    }

    pub fn collect_ids<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            ResolvedExpr::Sig { id_code, .. } => out.push(id_code),
            ResolvedExpr::Slice { of, .. } => of.collect_ids(out),
            ResolvedExpr::Concat(parts) => parts.iter().for_each(|p| p.collect_ids(out)),
            ResolvedExpr::Const(_) => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    Typed,
    UntypedFallback,
}

/// Where a ground leaf's bits come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Resolution {
    Resolved(ResolvedExpr),
    /// The leaf could not be bound and always renders as unknown.
    Degraded(DiagnosticKind),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TyKind {
    Ground {
        width: u32,
        encoding: Encoding,
        resolution: Resolution,
        enum_def: Option<Arc<EnumDef>>,
    },
    Record {
        fields: Vec<TyVariable>,
    },
    Array {
        elements: Vec<TyVariable>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TyVariable {
    pub name: String,
    pub type_info: TypeInfo,
    pub kind: TyKind,
    pub provenance: Provenance,
}

impl TyVariable {
    /// Trace ids feeding this variable, in leaf order, duplicates removed.
    pub fn bound_ids(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_ids(&mut out);
        let mut seen = HashSet::new();
        out.retain(|id| seen.insert(*id));
        out
    }

    fn collect_ids<'a>(&'a self, out: &mut Vec<&'a str>) {
        match &self.kind {
            TyKind::Ground {
                resolution: Resolution::Resolved(e),
                ..
            } => e.collect_ids(out),
            TyKind::Ground { .. } => {}
            TyKind::Record { fields } => fields.iter().for_each(|f| f.collect_ids(out)),
            TyKind::Array { elements } => elements.iter().for_each(|e| e.collect_ids(out)),
        }
    }

    pub fn is_ground(&self) -> bool {
        matches!(self.kind, TyKind::Ground { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TyScope {
    pub name: String,
    pub module_info: TypeInfo,
    pub variables: Vec<TyVariable>,
    pub children: Vec<TyScope>,
    pub provenance: Provenance,
}

impl TyScope {
    fn empty(name: impl Into<String>, module_info: TypeInfo, provenance: Provenance) -> Self {
        TyScope {
            name: name.into(),
            module_info,
            variables: Vec::new(),
            children: Vec::new(),
            provenance,
        }
    }

    fn has_name(&self, name: &str) -> bool {
        self.variables.iter().any(|v| v.name == name) || self.children.iter().any(|c| c.name == name)
    }

    fn unique_name(&self, name: &str) -> String {
        let mut candidate = name.to_string();
        while self.has_name(&candidate) {
            candidate.push_str("_raw");
        }
        candidate
    }
}

/// The typed view of one trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TyVcd {
    pub root: TyScope,
    pub enums: Vec<Arc<EnumDef>>,
    pub trace: Arc<VcdDocument>,
}

/// A node reached by a hierarchical path.
#[derive(Debug, Clone, Copy)]
pub enum Node<'a> {
    Scope(&'a TyScope),
    Variable(&'a TyVariable),
}

#[derive(Clone, Copy)]
enum Segment<'p> {
    Name(&'p str),
    Index(usize),
}

fn split_path(path: &str) -> Result<Vec<Segment<'_>>, PathError> {
    let malformed = || PathError::Malformed(path.to_string());
    let mut out = Vec::new();
    if path.is_empty() {
        return Ok(out);
    }
    for part in path.split('.') {
        let (name, mut rest) = match part.find('[') {
            Some(i) => part.split_at(i),
            None => (part, ""),
        };
        if name.is_empty() && out.is_empty() {
            return Err(malformed());
        }
        if !name.is_empty() {
            out.push(Segment::Name(name));
        }
        while !rest.is_empty() {
            let close = rest.find(']').ok_or_else(malformed)?;
            let idx: usize = rest[1..close].parse().map_err(|_| malformed())?;
            out.push(Segment::Index(idx));
            rest = &rest[close + 1..];
            if !rest.is_empty() && !rest.starts_with('[') {
                return Err(malformed());
            }
        }
    }
    Ok(out)
}

impl TyVcd {
    /// Navigates scopes, record fields and array elements, e.g. `Top.mod1.bundle.v[3]`.
    pub fn resolve_node(&self, path: &str) -> Result<Node<'_>, PathError> {
        let segments = split_path(path)?;
        let mut it = segments.into_iter();
        let mut resolved = String::new();
        if !self.root.name.is_empty() {
            match it.next() {
                Some(Segment::Name(n)) if n == self.root.name => resolved.push_str(n),
                _ => return Err(PathError::PathNotFound(String::new())),
            }
        }
        let mut node = Node::Scope(&self.root);
        for seg in it {
            node = match (node, seg) {
                (Node::Scope(s), Segment::Name(n)) => {
                    if let Some(c) = s.children.iter().find(|c| c.name == n) {
                        Node::Scope(c)
                    } else if let Some(v) = s.variables.iter().find(|v| v.name == n) {
                        Node::Variable(v)
                    } else {
                        return Err(PathError::PathNotFound(resolved));
                    }
                }
                (
                    Node::Variable(TyVariable {
                        kind: TyKind::Record { fields },
                        ..
                    }),
                    Segment::Name(n),
                ) => match fields.iter().find(|f| f.name == n) {
                    Some(f) => Node::Variable(f),
                    None => return Err(PathError::PathNotFound(resolved)),
                },
                (
                    Node::Variable(TyVariable {
                        kind: TyKind::Array { elements },
                        ..
                    }),
                    Segment::Index(i),
                ) => match elements.get(i) {
                    Some(e) => Node::Variable(e),
                    None => {
                        return Err(PathError::IndexOutOfRange {
                            path: resolved,
                            index: i,
                            len: elements.len(),
                        })
                    }
                },
                _ => return Err(PathError::PathNotFound(resolved)),
            };
            match seg {
                Segment::Name(n) => {
                    if !resolved.is_empty() {
                        resolved.push('.');
                    }
                    resolved.push_str(n);
                }
                Segment::Index(i) => resolved.push_str(&format!("[{i}]")),
            }
        }
        Ok(node)
    }

    pub fn resolve_path(&self, path: &str) -> Result<&TyVariable, PathError> {
        match self.resolve_node(path)? {
            Node::Variable(v) => Ok(v),
            Node::Scope(_) => Err(PathError::NotAVariable(path.to_string())),
        }
    }

    /// Every variable node, aggregates and their members included, with its path, in pre-order.
    pub fn variables(&self) -> Vec<(String, &TyVariable)> {
        fn var<'a>(v: &'a TyVariable, path: String, out: &mut Vec<(String, &'a TyVariable)>) {
            out.push((path.clone(), v));
            match &v.kind {
                TyKind::Ground { .. } => {}
                TyKind::Record { fields } => {
                    for f in fields {
                        var(f, format!("{path}.{}", f.name), out);
                    }
                }
                TyKind::Array { elements } => {
                    for (i, e) in elements.iter().enumerate() {
                        var(e, format!("{path}[{i}]"), out);
                    }
                }
            }
        }
        fn scope<'a>(s: &'a TyScope, path: String, out: &mut Vec<(String, &'a TyVariable)>) {
            let join = |n: &str| {
                if path.is_empty() {
                    n.to_string()
                } else {
                    format!("{path}.{n}")
                }
            };
            for v in &s.variables {
                var(v, join(&v.name), out);
            }
            for c in &s.children {
                scope(c, join(&c.name), out);
            }
        }
        let mut out = Vec::new();
        scope(&self.root, self.root.name.clone(), &mut out);
        out
    }

    /// Paths of scope-level variables only (no aggregate members).
    pub fn flatten(&self) -> Vec<String> {
        fn scope(s: &TyScope, path: &str, out: &mut Vec<String>) {
            let join = |n: &str| {
                if path.is_empty() {
                    n.to_string()
                } else {
                    format!("{path}.{n}")
                }
            };
            for v in &s.variables {
                out.push(join(&v.name));
            }
            for c in &s.children {
                scope(c, &join(&c.name), out);
            }
        }
        let mut out = Vec::new();
        scope(&self.root, &self.root.name, &mut out);
        out
    }
}

/// Unifies per-module debug documents into one.
pub fn merge_documents(docs: Vec<HglddDocument>) -> Result<HglddDocument, MergeError> {
    let mut top: Option<String> = None;
    let mut enums: Vec<EnumDef> = Vec::new();
    let mut modules: Vec<ModuleDebug> = Vec::new();
    let mut unknown_fields = Vec::new();
    let mut version = crate::hgldd::VERSION.to_string();
    for doc in docs {
        version = doc.version;
        if let Some(t) = doc.top {
            if let Some(prev) = &top {
                return Err(MergeError::MultipleTops(prev.clone(), t));
            }
            top = Some(t);
        }
        for e in doc.enums {
            match enums.iter().find(|x| x.id == e.id) {
                Some(prev) if *prev == e => {}
                Some(_) => return Err(MergeError::DuplicateEnum(e.id)),
                None => enums.push(e),
            }
        }
        for m in doc.modules {
            if modules.iter().any(|x| x.name == m.name) {
                return Err(MergeError::DuplicateModule(m.name));
            }
            modules.push(m);
        }
        unknown_fields.extend(doc.unknown_fields);
    }
    let top = top.ok_or(MergeError::NoTop)?;
    Ok(HglddDocument {
        version,
        top: Some(top),
        enums,
        modules,
        unknown_fields,
    })
}

fn find_scope<'a>(scopes: &'a [VcdScope], name: &str) -> Option<&'a VcdScope> {
    for s in scopes {
        if s.name == name {
            return Some(s);
        }
    }
    for s in scopes {
        if let Some(found) = find_scope(&s.children, name) {
            return Some(found);
        }
    }
    None
}

struct Linker<'a> {
    debug: &'a HglddDocument,
    enums: HashMap<&'a str, Arc<EnumDef>>,
    diags: Vec<Diagnostic>,
    stack: Vec<&'a str>,
}

impl<'a> Linker<'a> {
    fn module_scope(
        &mut self,
        name: &str,
        module: &'a ModuleDebug,
        vcd: Option<&VcdScope>,
        path: &str,
    ) -> TyScope {
        let mut out = TyScope::empty(name, module.type_info.clone(), Provenance::Typed);
        let mut used: HashSet<String> = HashSet::new();
        self.stack.push(&module.name);

        for v in &module.variables {
            let var = self.variable(v, vcd, &format!("{path}.{}", v.name), &mut used);
            out.variables.push(var);
        }
        for s in &module.scopes {
            let child = self.debug_scope(s, vcd, &format!("{path}.{}", s.name), &mut used);
            out.children.push(child);
        }

        let mut matched_scopes: HashSet<&str> = HashSet::new();
        for inst in &module.instances {
            let ipath = format!("{path}.{}", inst.name);
            let child_vcd = vcd.and_then(|s| s.child(&inst.hdl_instance));
            if let Some(c) = child_vcd {
                matched_scopes.insert(&c.name);
            } else if vcd.is_some() {
                self.diags.push(Diagnostic::new(
                    DiagnosticKind::MissingScope,
                    &ipath,
                    format!("no trace scope named `{}`", inst.hdl_instance),
                ));
            }
            let child = match self.debug.module(&inst.module) {
                Some(_) if self.stack.contains(&inst.module.as_str()) => {
                    self.diags.push(Diagnostic::new(
                        DiagnosticKind::UnresolvedModule,
                        &ipath,
                        format!("recursive instantiation of `{}`", inst.module),
                    ));
                    TyScope::empty(&inst.name, TypeInfo::default(), Provenance::Typed)
                }
                Some(m) => self.module_scope(&inst.name, m, child_vcd, &ipath),
                None => {
                    self.diags.push(Diagnostic::new(
                        DiagnosticKind::UnresolvedModule,
                        &ipath,
                        format!("instance refers to undefined module `{}`", inst.module),
                    ));
                    TyScope::empty(&inst.name, TypeInfo::default(), Provenance::Typed)
                }
            };
            out.children.push(child);
        }
        self.stack.pop();

        if let Some(vcd) = vcd {
            for var in &vcd.vars {
                if !used.contains(&var.name) {
                    let name = out.unique_name(&var.name);
                    out.variables.push(fallback_var(var, name));
                }
            }
            for c in &vcd.children {
                if !matched_scopes.contains(c.name.as_str()) {
                    let mut raw = fallback_scope(c);
                    raw.name = out.unique_name(&c.name);
                    out.children.push(raw);
                }
            }
        }
        out
    }

    fn debug_scope(
        &mut self,
        scope: &'a ScopeDebug,
        vcd: Option<&VcdScope>,
        path: &str,
        used: &mut HashSet<String>,
    ) -> TyScope {
        let mut out = TyScope::empty(&scope.name, TypeInfo::default(), Provenance::Typed);
        for v in &scope.variables {
            out.variables
                .push(self.variable(v, vcd, &format!("{path}.{}", v.name), used));
        }
        for s in &scope.scopes {
            out.children
                .push(self.debug_scope(s, vcd, &format!("{path}.{}", s.name), used));
        }
        out
    }

    fn variable(
        &mut self,
        v: &'a VariableDebug,
        vcd: Option<&VcdScope>,
        path: &str,
        used: &mut HashSet<String>,
    ) -> TyVariable {
        let kind = match &v.kind {
            DebugKind::Ground {
                width,
                encoding,
                enum_ref,
                expr,
            } => {
                for s in expr.signals() {
                    used.insert(s.to_string());
                }
                let enum_def = enum_ref.as_deref().and_then(|id| self.enums.get(id).cloned());
                let mut resolution = match vcd {
                    None => Resolution::Degraded(DiagnosticKind::MissingScope),
                    Some(scope) => match resolve(expr, scope) {
                        Ok(r) if r.width() == *width => Resolution::Resolved(r),
                        Ok(r) => {
                            self.diags.push(Diagnostic::new(
                                DiagnosticKind::WidthMismatch,
                                path,
                                format!("expression has width {} but the variable declares {width}", r.width()),
                            ));
                            Resolution::Degraded(DiagnosticKind::WidthMismatch)
                        }
                        Err(d) => {
                            let kind = d.kind;
                            self.diags.push(Diagnostic::new(kind, path, d.message));
                            Resolution::Degraded(kind)
                        }
                    },
                };
                // enum leaves without a usable definition cannot be rendered
                if *encoding == Encoding::Enum && enum_def.is_none() {
                    if let Resolution::Resolved(_) = resolution {
                        let kind = if enum_ref.is_some() {
                            DiagnosticKind::DanglingEnumRef
                        } else {
                            DiagnosticKind::MissingEnumRef
                        };
                        self.diags
                            .push(Diagnostic::new(kind, path, "enum definition unavailable"));
                        resolution = Resolution::Degraded(kind);
                    }
                }
                if *encoding == Encoding::Bool && *width != 1 {
                    if let Resolution::Resolved(_) = resolution {
                        self.diags.push(Diagnostic::new(
                            DiagnosticKind::BoolWidth,
                            path,
                            format!("bool-encoded variable has width {width}"),
                        ));
                        resolution = Resolution::Degraded(DiagnosticKind::BoolWidth);
                    }
                }
                TyKind::Ground {
                    width: *width,
                    encoding: *encoding,
                    resolution,
                    enum_def,
                }
            }
            DebugKind::Record { fields } => TyKind::Record {
                fields: fields
                    .iter()
                    .map(|f| self.variable(f, vcd, &format!("{path}.{}", f.name), used))
                    .collect(),
            },
            DebugKind::Array { elements } => TyKind::Array {
                elements: elements
                    .iter()
                    .enumerate()
                    .map(|(i, e)| self.variable(e, vcd, &format!("{path}[{i}]"), used))
                    .collect(),
            },
        };
        TyVariable {
            name: v.name.clone(),
            type_info: v.type_info.clone(),
            kind,
            provenance: Provenance::Typed,
        }
    }
}

fn resolve(expr: &ValueExpr, scope: &VcdScope) -> Result<ResolvedExpr, Diagnostic> {
    match expr {
        ValueExpr::Sig(name) => match scope.var(name) {
            Some(v) => Ok(ResolvedExpr::Sig {
                id_code: v.id_code.clone(),
                width: v.width,
            }),
            None => Err(Diagnostic::new(
                DiagnosticKind::MissingSignal,
                "",
                format!("signal `{name}` not found in trace scope `{}`", scope.name),
            )),
        },
        ValueExpr::Slice { of, hi, lo } => {
            let of = resolve(of, scope)?;
            if hi < lo || *hi >= of.width() {
                return Err(Diagnostic::new(
                    DiagnosticKind::WidthMismatch,
                    "",
                    format!("slice [{hi}:{lo}] out of range for operand width {}", of.width()),
                ));
            }
            Ok(ResolvedExpr::Slice {
                of: Box::new(of),
                hi: *hi,
                lo: *lo,
            })
        }
        ValueExpr::Concat(parts) => Ok(ResolvedExpr::Concat(
            parts
                .iter()
                .map(|p| resolve(p, scope))
                .collect::<Result<_, _>>()?,
        )),
        ValueExpr::Const(b) => Ok(ResolvedExpr::Const(b.clone())),
    }
}

fn fallback_var(var: &VcdVar, name: String) -> TyVariable {
    TyVariable {
        name,
        type_info: TypeInfo::default(),
        kind: TyKind::Ground {
            width: var.width,
            encoding: Encoding::Unsigned,
            resolution: Resolution::Resolved(ResolvedExpr::Sig {
                id_code: var.id_code.clone(),
                width: var.width,
            }),
            enum_def: None,
        },
        provenance: Provenance::UntypedFallback,
    }
}

fn fallback_scope(scope: &VcdScope) -> TyScope {
    let mut out = TyScope::empty(&scope.name, TypeInfo::default(), Provenance::UntypedFallback);
    for v in &scope.vars {
        let name = out.unique_name(&v.name);
        out.variables.push(fallback_var(v, name));
    }
    for c in &scope.children {
        let mut child = fallback_scope(c);
        child.name = out.unique_name(&c.name);
        out.children.push(child);
    }
    out
}

/// Links validated debug information with a parsed trace.
pub fn build_tyvcd(
    debug: &HglddDocument,
    trace: Arc<VcdDocument>,
) -> Result<(TyVcd, Vec<Diagnostic>), LinkError> {
    let top_name = debug.top.as_deref().ok_or(LinkError::NoTop)?;
    let top = debug
        .module(top_name)
        .ok_or_else(|| LinkError::UnresolvedTop(top_name.to_string()))?;
    let top_scope = find_scope(trace.root_scopes(), &top.hdl_module)
        .ok_or_else(|| LinkError::TopScopeNotFound(top.hdl_module.clone()))?;

    let enums: Vec<Arc<EnumDef>> = debug.enums.iter().cloned().map(Arc::new).collect();
    let mut linker = Linker {
        debug,
        enums: debug
            .enums
            .iter()
            .map(|e| e.id.as_str())
            .zip(enums.iter().cloned())
            .collect(),
        diags: Vec::new(),
        stack: Vec::new(),
    };
    let root = linker.module_scope(&top.name, top, Some(top_scope), &top.name);
    log::debug!(
        "linked top `{}` against trace scope `{}` with {} diagnostics",
        top.name,
        top_scope.name,
        linker.diags.len()
    );
    let diags = linker.diags;
    Ok((TyVcd { root, enums, trace }, diags))
}

/// A typed view that mirrors the raw trace hierarchy, for traces without debug information.
pub fn fallback_untyped(trace: Arc<VcdDocument>) -> TyVcd {
    let root = match trace.root_scopes() {
        [single] => fallback_scope(single),
        many => {
            let mut root = TyScope::empty("", TypeInfo::default(), Provenance::UntypedFallback);
            for s in many {
                let mut child = fallback_scope(s);
                child.name = root.unique_name(&s.name);
                root.children.push(child);
            }
            root
        }
    };
    TyVcd {
        root,
        enums: Vec::new(),
        trace,
    }
}
