//! JSON report schema.
//!
//! ```text
//! { "schema_version": 1, "command": "...", "status": "ok",
//!   "inputs": { name: path }, "params": { ... }, "result": { ... } }
//! { "schema_version": 1, "command": "...", "status": "error",
//!   "error": { "code": "...", "message": "..." } }
//! ```
//!
//! Angles are `{ "rad": .., "deg": .. }`. Maps are ordered, and nothing
//! depends on wall-clock time, so equal inputs give byte-equal reports.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::params::Params;
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Angle {
    pub rad: f64,
    pub deg: f64,
}

impl From<f64> for Angle {
    fn from(rad: f64) -> Self {
        Self {
            rad,
            deg: rad.to_degrees(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Report<'a, R: Serialize> {
    pub schema_version: u32,
    pub command: &'a str,
    pub status: &'static str,
    pub inputs: BTreeMap<&'static str, String>,
    pub params: &'a Params,
    pub result: R,
}

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub code: &'static str,
    pub message: String,
}

#[derive(Debug, Serialize)]
pub struct ErrorReport<'a> {
    pub schema_version: u32,
    pub command: &'a str,
    pub status: &'static str,
    pub error: ErrorBody,
}

impl<'a> ErrorReport<'a> {
    pub fn new(command: &'a str, err: &x2car::CalibError) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command,
            status: "error",
            error: ErrorBody {
                code: err.code(),
                message: err.to_string(),
            },
        }
    }
}

pub fn to_json<V: Serialize>(value: &V) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

/// Writes to `path`, or to stdout when there is none.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Data(e.into())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
