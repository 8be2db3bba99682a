// SPDX-License-Identifier: Apache-2.0

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiagnosticKind {
    DanglingEnumRef,
    MissingEnumRef,
    UnresolvedModule,
    UnresolvedTop,
    InvalidSliceBounds,
    WidthMismatch,
    BoolWidth,
    DuplicateName,
    UnknownField,
    MissingSignal,
    MissingScope,
}

impl DiagnosticKind {
    pub fn severity(self) -> Severity {
        match self {
            DiagnosticKind::UnknownField
            | DiagnosticKind::MissingSignal
            | DiagnosticKind::MissingScope => Severity::Warning,
            _ => Severity::Error,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DiagnosticKind::DanglingEnumRef => "DanglingEnumRef",
            DiagnosticKind::MissingEnumRef => "MissingEnumRef",
            DiagnosticKind::UnresolvedModule => "UnresolvedModule",
            DiagnosticKind::UnresolvedTop => "UnresolvedTop",
            DiagnosticKind::InvalidSliceBounds => "InvalidSliceBounds",
            DiagnosticKind::WidthMismatch => "WidthMismatch",
            DiagnosticKind::BoolWidth => "BoolWidth",
            DiagnosticKind::DuplicateName => "DuplicateName",
            DiagnosticKind::UnknownField => "UnknownField",
            DiagnosticKind::MissingSignal => "MissingSignal",
            DiagnosticKind::MissingScope => "MissingScope",
        }
    }
}

/// A finding about the inputs. Diagnostics never abort processing on their own.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub path: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(kind: DiagnosticKind, path: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            kind,
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn severity(&self) -> Severity {
        self.kind.severity()
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity() {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{sev}[{}] {}: {}", self.kind.name(), self.path, self.message)
    }
}

/// Highest severity present, if any.
pub fn worst(diags: &[Diagnostic]) -> Option<Severity> {
    diags.iter().map(Diagnostic::severity).max()
}
