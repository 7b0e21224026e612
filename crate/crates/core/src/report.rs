//! JSON report encoding.
//!
//! Keys follow struct field order and every float is written with 17
//! significant digits, so identical results give byte-identical files.

use serde::ser::{SerializeSeq, Serializer};
use serde::Serialize;
use serde_json::value::RawValue;

use crate::gw::{GwSolveResult, TraceEntry};

/// Formats a float with 17 significant digits; non-finite values become
/// `null`.
pub fn format_num(v: f64) -> Option<String> {
    v.is_finite().then(|| format!("{v:.16e}"))
}

/// `serialize_with` adapter applying [`format_num`].
pub fn num<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    match format_num(*v) {
        Some(text) => RawValue::from_string(text)
            .map_err(serde::ser::Error::custom)?
            .serialize(s),
        None => s.serialize_none(),
    }
}

pub(crate) fn num_opt<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(v) => num(v, s),
        None => s.serialize_none(),
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut out = serde_json::to_string_pretty(value)?;
    out.push('\n');
    Ok(out)
}

struct Num(f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        num(&self.0, s)
    }
}

impl Serialize for TraceEntry {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(3))?;
        seq.serialize_element(&self.iteration)?;
        seq.serialize_element(&Num(self.objective))?;
        seq.serialize_element(&Num(self.step))?;
        seq.end()
    }
}

/// Wire form of a [`GwSolveResult`]; the coupling is dumped separately.
#[derive(Debug, Serialize)]
pub struct GwReport<'a> {
    #[serde(serialize_with = "num")]
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub restart_index: usize,
    pub trace: &'a [TraceEntry],
}

impl<'a> From<&'a GwSolveResult> for GwReport<'a> {
    fn from(r: &'a GwSolveResult) -> Self {
        Self {
            value: r.value,
            iterations: r.iterations_run,
            converged: r.converged,
            restart_index: r.restart_index,
            trace: &r.trace,
        }
    }
}
