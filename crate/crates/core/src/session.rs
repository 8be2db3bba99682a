// SPDX-License-Identifier: Apache-2.0

//! One loaded trace plus its debug information, and the queries shared by
//! the command line, the HTTP server and the C interface.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::{json, Value};
use thiserror::Error;

use crate::diag::{worst, Diagnostic, Severity};
use crate::hgldd::{parse_hgldd, validate_hgldd, HglddDocument, HglddError};
use crate::link::{
    build_tyvcd, fallback_untyped, merge_documents, LinkError, MergeError, Node, PathError, Provenance,
    TyKind, TyScope, TyVariable, TyVcd,
};
use crate::translator::{format_type_label, format_value, render_changes, render_variable, TranslateError};
use crate::vcd::{parse_vcd, VcdDocument, VcdError};

#[derive(Debug, Clone, Default)]
pub struct SessionConfig {
    pub vcd_path: PathBuf,
    pub debug_paths: Vec<PathBuf>,
    pub top_override: Option<String>,
    pub fallback_allowed: bool,
    pub serve_port: Option<u16>,
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("cannot read `{path}`")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid trace `{path}`")]
    Vcd {
        path: PathBuf,
        #[source]
        source: VcdError,
    },
    #[error("invalid debug file `{path}`")]
    Debug {
        path: PathBuf,
        #[source]
        source: HglddError,
    },
    #[error(transparent)]
    Merge(#[from] MergeError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error("no debug files given (pass --allow-fallback to browse the raw trace)")]
    NoDebug,
}

#[derive(Debug, Error)]
pub enum QueryError {
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Translate(#[from] TranslateError),
    #[error("invalid time range {from}..{to}")]
    Range { from: u64, to: u64 },
}

/// Result of a point query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValueReport {
    pub formatted: String,
    pub kind: &'static str,
    /// Lowercase bits for ground leaves, `None` for aggregates.
    pub raw_bits: Option<String>,
    /// The query time lies past the end of the trace.
    pub beyond_end: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChangeReport {
    pub time: u64,
    pub formatted: String,
    pub raw_bits: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub tyvcd: TyVcd,
    pub diagnostics: Vec<Diagnostic>,
    /// True when the view mirrors the raw trace without debug information.
    pub fallback: bool,
}

fn read(path: &Path) -> Result<String, SessionError> {
    std::fs::read_to_string(path).map_err(|source| SessionError::Io {
        path: path.to_path_buf(),
        source,
    })
}

impl Session {
    pub fn load(config: &SessionConfig) -> Result<Session, SessionError> {
        let file = std::fs::File::open(&config.vcd_path).map_err(|source| SessionError::Io {
            path: config.vcd_path.clone(),
            source,
        })?;
        let trace = parse_vcd(std::io::BufReader::new(file)).map_err(|source| match source {
            VcdError::Io(source) => SessionError::Io {
                path: config.vcd_path.clone(),
                source,
            },
            source => SessionError::Vcd {
                path: config.vcd_path.clone(),
                source,
            },
        })?;
        let mut docs = Vec::new();
        for p in &config.debug_paths {
            let doc = parse_hgldd(&read(p)?).map_err(|source| SessionError::Debug {
                path: p.clone(),
                source,
            })?;
            docs.push(doc);
        }
        Session::from_parts(docs, trace, config.top_override.as_deref(), config.fallback_allowed)
    }

    /// Builds a session from already parsed inputs.
    pub fn from_parts(
        debug: Vec<HglddDocument>,
        trace: VcdDocument,
        top_override: Option<&str>,
        fallback_allowed: bool,
    ) -> Result<Session, SessionError> {
        let trace = Arc::new(trace);
        if debug.is_empty() {
            if !fallback_allowed {
                return Err(SessionError::NoDebug);
            }
            return Ok(Session {
                tyvcd: fallback_untyped(trace),
                diagnostics: Vec::new(),
                fallback: true,
            });
        }
        let mut doc = if let (Some(top), [_]) = (top_override, debug.as_slice()) {
            // a single document may lack a top; the override supplies it
            let mut d = debug.into_iter().next().unwrap();
            d.top = Some(top.to_string());
            d
        } else {
            let mut d = merge_documents(debug)?;
            if let Some(top) = top_override {
                d.top = Some(top.to_string());
            }
            d
        };
        if doc.top.is_none() {
            return Err(MergeError::NoTop.into());
        }
        let mut diagnostics = validate_hgldd(&doc);
        for f in std::mem::take(&mut doc.unknown_fields) {
            log::debug!("ignoring unknown field `{f}`");
        }
        match build_tyvcd(&doc, trace.clone()) {
            Ok((tyvcd, diags)) => {
                diagnostics.extend(diags);
                Ok(Session {
                    tyvcd,
                    diagnostics,
                    fallback: false,
                })
            }
            Err(e) if fallback_allowed => {
                log::warn!("{e}; falling back to the raw trace hierarchy");
                Ok(Session {
                    tyvcd: fallback_untyped(trace),
                    diagnostics,
                    fallback: true,
                })
            }
            Err(e) => Err(e.into()),
        }
    }

    pub fn trace(&self) -> &VcdDocument {
        &self.tyvcd.trace
    }

    pub fn has_errors(&self) -> bool {
        worst(&self.diagnostics) == Some(Severity::Error)
    }

    /// 0 when clean, 1 with warnings only, 2 with errors.
    pub fn check_code(&self) -> i32 {
        match worst(&self.diagnostics) {
            None => 0,
            Some(Severity::Warning) => 1,
            Some(Severity::Error) => 2,
        }
    }

    pub fn value(&self, path: &str, time: u64) -> Result<ValueReport, QueryError> {
        let var = self.tyvcd.resolve_path(path)?;
        let v = render_variable(var, self.trace(), time)?;
        Ok(ValueReport {
            formatted: format_value(&v),
            kind: v.kind_name(),
            raw_bits: self.raw_bits(var, time)?,
            beyond_end: time > self.trace().end_time(),
        })
    }

    fn raw_bits(&self, var: &TyVariable, time: u64) -> Result<Option<String>, QueryError> {
        Ok(match &var.kind {
            TyKind::Ground {
                resolution: crate::link::Resolution::Resolved(e),
                ..
            } => Some(
                crate::translator::eval_expr(e, self.trace(), time)
                    .map_err(TranslateError::from)?
                    .to_lowercase_string(),
            ),
            TyKind::Ground { width, .. } => Some("x".repeat(*width as usize)),
            _ => None,
        })
    }

    pub fn changes(&self, path: &str, from: u64, to: u64) -> Result<Vec<ChangeReport>, QueryError> {
        if from > to {
            return Err(QueryError::Range { from, to });
        }
        let var = self.tyvcd.resolve_path(path)?;
        render_changes(var, self.trace(), from, to)?
            .into_iter()
            .map(|(t, v)| {
                Ok(ChangeReport {
                    time: t,
                    formatted: format_value(&v),
                    raw_bits: self.raw_bits(var, t)?,
                })
            })
            .collect()
    }

    /// Indented `name: label` lines for the whole typed hierarchy.
    pub fn tree_text(&self) -> String {
        fn line(out: &mut String, depth: usize, name: &str, label: &str) {
            let pad = "  ".repeat(depth);
            if label.is_empty() {
                let _ = writeln!(out, "{pad}{name}");
            } else {
                let _ = writeln!(out, "{pad}{name}: {label}");
            }
        }
        fn var(out: &mut String, v: &TyVariable, name: &str, depth: usize) {
            let label = match v.provenance {
                Provenance::UntypedFallback => "(raw)".to_string(),
                Provenance::Typed => format_type_label(&v.type_info),
            };
            line(out, depth, name, &label);
            match &v.kind {
                TyKind::Ground { .. } => {}
                TyKind::Record { fields } => fields.iter().for_each(|f| var(out, f, &f.name, depth + 1)),
                TyKind::Array { elements } => elements
                    .iter()
                    .enumerate()
                    .for_each(|(i, e)| var(out, e, &format!("[{i}]"), depth + 1)),
            }
        }
        fn scope(out: &mut String, s: &TyScope, depth: usize) {
            line(out, depth, &s.name, &format_type_label(&s.module_info));
            s.variables.iter().for_each(|v| var(out, v, &v.name, depth + 1));
            s.children.iter().for_each(|c| scope(out, c, depth + 1));
        }
        let mut out = String::new();
        scope(&mut out, &self.tyvcd.root, 0);
        out
    }

    /// Change-point records `path TAB time TAB value` for every variable node, sorted by (path, time).
    pub fn export_tsv(&self) -> Result<String, QueryError> {
        let end = self.trace().end_time();
        let mut rows: Vec<(String, u64, String)> = Vec::new();
        if !self.trace().change_times().is_empty() {
            for (path, var) in self.tyvcd.variables() {
                for (t, v) in render_changes(var, self.trace(), 0, end)? {
                    rows.push((path.clone(), t, format_value(&v)));
                }
            }
        }
        rows.sort();
        let mut out = String::from(crate::fixtures::TSV_HEADER);
        out.push('\n');
        for (p, t, v) in rows {
            let _ = writeln!(out, "{p}\t{t}\t{v}");
        }
        Ok(out)
    }

    /// Recursive `{name, type_label, kind, has_children, enum_id?, children}` tree.
    pub fn hierarchy_json(&self) -> Value {
        fn var(v: &TyVariable, name: &str) -> Value {
            let label = match v.provenance {
                Provenance::UntypedFallback => "(raw)".to_string(),
                Provenance::Typed => format_type_label(&v.type_info),
            };
            let (kind, children): (&str, Vec<Value>) = match &v.kind {
                TyKind::Ground { .. } => ("ground", Vec::new()),
                TyKind::Record { fields } => ("record", fields.iter().map(|f| var(f, &f.name)).collect()),
                TyKind::Array { elements } => (
                    "array",
                    elements.iter().enumerate().map(|(i, e)| var(e, &format!("[{i}]"))).collect(),
                ),
            };
            let mut node = json!({
                "name": name,
                "type_label": label,
                "kind": kind,
                "has_children": !children.is_empty(),
            });
            if let TyKind::Ground { enum_def: Some(e), .. } = &v.kind {
                node["enum_id"] = json!(e.id);
            }
            node["children"] = Value::Array(children);
            node
        }
        fn scope(s: &TyScope) -> Value {
            let children: Vec<Value> = s
                .variables
                .iter()
                .map(|v| var(v, &v.name))
                .chain(s.children.iter().map(scope))
                .collect();
            json!({
                "name": s.name,
                "type_label": format_type_label(&s.module_info),
                "kind": "scope",
                "has_children": !children.is_empty(),
                "children": children,
            })
        }
        scope(&self.tyvcd.root)
    }

    pub fn enum_json(&self, id: &str) -> Option<Value> {
        let e = self.tyvcd.enums.iter().find(|e| e.id == id)?;
        let map: serde_json::Map<String, Value> = e
            .variants()
            .into_iter()
            .map(|(k, n)| (k.to_string(), Value::String(n.to_string())))
            .collect();
        Some(Value::Object(map))
    }

    pub fn meta_json(&self) -> Value {
        json!({
            "end_time": self.trace().end_time(),
            "timescale": self.trace().timescale().to_string(),
            "top": self.tyvcd.root.name,
        })
    }

    /// True if `path` names a scope or variable.
    pub fn exists(&self, path: &str) -> bool {
        matches!(self.tyvcd.resolve_node(path), Ok(Node::Scope(_) | Node::Variable(_)))
    }
}
