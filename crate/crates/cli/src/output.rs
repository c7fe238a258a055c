//! Deterministic result emission: JSON with 17-significant-digit floats
//! (exact double round-trips) and RFC 4180 CSV.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// serde_json formatter printing every float with 17 significant digits.
struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.7e}")
    }
}

/// Serialize to JSON with exact-round-trip floats.
pub fn to_sci_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFormatter);
    value
        .serialize(&mut ser)
        .map_err(|e| CliError::Config(format!("serialization failed: {e}")))?;
    String::from_utf8(buf).map_err(|e| CliError::Config(format!("non-utf8 output: {e}")))
}

/// One float field formatted for CSV (17 significant digits).
pub fn num(value: f64) -> String {
    format!("{value:.16e}")
}

/// Open a CSV writer over any sink with RFC 4180 CRLF records.
pub fn csv_writer<W: Write>(sink: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(sink)
}

/// Write `content` to the path, or to stdout when no path is given.
pub fn write_output(path: Option<&Path>, content: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            if let Some(parent) = p.parent() {
                if !parent.as_os_str().is_empty() && !parent.exists() {
                    return Err(CliError::Io(format!(
                        "output directory {} does not exist",
                        parent.display()
                    )));
                }
            }
            std::fs::write(p, content)
                .map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display())))
        }
        None => {
            io::stdout()
                .write_all(content.as_bytes())
                .map_err(|e| CliError::Io(format!("cannot write to stdout: {e}")))
        }
    }
}

/// Sibling path carrying an extra label: `runs/x.csv` -> `runs/x.detail.csv`.
pub fn sibling_path(path: &Path, label: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".into());
    let ext = path
        .extension()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    path.with_file_name(format!("{stem}.{label}.{ext}"))
}
