// SPDX-License-Identifier: Apache-2.0

//! Typed waveform reconstruction.
//!
//! Links a flattened VCD trace with source-level debug metadata into a typed
//! hierarchy ([`TyVcd`]) and renders signals with their source types, enum
//! variant names, bindings and parameters.

pub mod bits;
pub mod diag;
pub mod fixtures;
pub mod hgldd;
pub mod link;
pub mod session;
pub mod translator;
pub mod vcd;

#[cfg(feature = "cli")]
pub mod cli;
#[cfg(feature = "cli")]
pub mod server;

pub use bits::{BitString, BitsError, Logic};
pub use diag::{Diagnostic, DiagnosticKind, Severity};
pub use hgldd::{parse_hgldd, validate_hgldd, EnumDef, HglddDocument, HglddError, TypeInfo};
pub use link::{build_tyvcd, fallback_untyped, merge_documents, LinkError, PathError, TyScope, TyVariable, TyVcd};
pub use session::{QueryError, Session, SessionConfig, SessionError};
pub use translator::{format_type_label, format_value, render_variable, TypedValue};
pub use vcd::{parse_vcd, parse_vcd_str, VcdDocument, VcdError};
