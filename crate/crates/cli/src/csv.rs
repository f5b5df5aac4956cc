//! CSV output with fixed formatting. File targets are written to a temporary
//! file in the destination directory and renamed into place on success, so a
//! failed run never leaves a partial file behind.

use std::fs;
use std::io::{self, BufWriter, Stdout, Write};
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::config::{CliError, CliResult};

pub enum Field<'a> {
    Num(f64),
    Int(usize),
    Text(&'a str),
    Empty,
}

/// 17 significant digits in scientific notation.
pub fn format_num(x: f64) -> String {
    format!("{x:.16e}")
}

enum Target {
    Stdout(BufWriter<Stdout>),
    File { tmp: BufWriter<NamedTempFile>, dest: PathBuf },
}

pub struct CsvSink {
    target: Target,
    width: usize,
    line: String,
}

/// Temporary files default to owner-only access; the renamed output should
/// look like any other written file.
fn temp_builder() -> tempfile::Builder<'static, 'static> {
    let mut builder = tempfile::Builder::new();
    builder.prefix(".qst-channel-");
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(fs::Permissions::from_mode(0o644));
    }
    builder
}

fn io_error(context: &str, path: &Path, err: io::Error) -> CliError {
    CliError::Usage(format!("{context} {}: {err}", path.display()))
}

impl CsvSink {
    pub fn create(out: Option<&Path>, header: &[&str]) -> CliResult<Self> {
        let target = match out {
            None => Target::Stdout(BufWriter::new(io::stdout())),
            Some(dest) => {
                let dir = match dest.parent() {
                    Some(p) if !p.as_os_str().is_empty() => p,
                    _ => Path::new("."),
                };
                let tmp = temp_builder().tempfile_in(dir).map_err(|e| io_error("cannot create output in", dir, e))?;
                Target::File {
                    tmp: BufWriter::new(tmp),
                    dest: dest.to_path_buf(),
                }
            }
        };
        let mut sink = Self {
            target,
            width: header.len(),
            line: String::new(),
        };
        sink.write_line(&header.join(","))?;
        Ok(sink)
    }

    fn writer(&mut self) -> &mut dyn Write {
        match &mut self.target {
            Target::Stdout(w) => w,
            Target::File { tmp, .. } => tmp,
        }
    }

    fn write_line(&mut self, line: &str) -> CliResult<()> {
        let w = self.writer();
        w.write_all(line.as_bytes())
            .and_then(|_| w.write_all(b"\n"))
            .map_err(|e| CliError::Usage(format!("write failed: {e}")))
    }

    pub fn row(&mut self, fields: &[Field]) -> CliResult<()> {
        debug_assert_eq!(fields.len(), self.width);
        let mut line = std::mem::take(&mut self.line);
        line.clear();
        for (i, field) in fields.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            match field {
                Field::Num(x) => line.push_str(&format_num(*x)),
                Field::Int(k) => line.push_str(&k.to_string()),
                Field::Text(s) => line.push_str(s),
                Field::Empty => {}
            }
        }
        let result = self.write_line(&line);
        self.line = line;
        result
    }

    /// Flushes and, for file targets, atomically moves the output into place.
    pub fn finish(self) -> CliResult<()> {
        match self.target {
            Target::Stdout(mut w) => w.flush().map_err(|e| CliError::Usage(format!("write failed: {e}"))),
            Target::File { tmp, dest } => {
                let tmp = tmp.into_inner().map_err(|e| io_error("cannot flush", &dest, e.into_error()))?;
                tmp.as_file().sync_all().map_err(|e| io_error("cannot sync", &dest, e))?;
                tmp.persist(&dest).map_err(|e| io_error("cannot write", &dest, e.error))?;
                Ok(())
            }
        }
    }
}

/// Output directory for multi-file commands; created if missing.
pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| io_error("cannot create directory", dir, e))
}
