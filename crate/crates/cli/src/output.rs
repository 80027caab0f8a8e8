//! Output formatting: JSON with full-precision floats, plus file helpers.

use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

/// JSON formatter printing every float with 17 significant digits, enough
/// to round-trip any f64 exactly. Non-finite values become null, matching
/// serde_json's own convention.
struct Sig17Formatter;

impl serde_json::ser::Formatter for Sig17Formatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        self.write_f64(writer, value as f64)
    }
}

/// Serialize to a JSON string with 17-significant-digit floats.
pub fn json_string<T: Serialize>(value: &T) -> anyhow::Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Sig17Formatter);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(out)?)
}

pub fn write_text(path: &Path, content: &str) -> anyhow::Result<()> {
    std::fs::write(path, content)
        .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))
}
