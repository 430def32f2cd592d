use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use exmp_core::SimplexPoint;
use serde::Serialize;
use serde_json::Value;

/// Resolves output paths and records what a run wrote.
pub struct Outputs {
    dir: PathBuf,
    command: String,
    args: Vec<String>,
    seeds: Vec<u64>,
    written: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    args: &'a [String],
    seeds: &'a [u64],
    outputs: &'a [String],
}

impl Outputs {
    /// `argv` is the merged argument list; the thread count and output
    /// directory are left out of the manifest.
    pub fn new(dir: PathBuf, command: &str, argv: &[OsString]) -> Self {
        let mut args = Vec::new();
        let mut skip = false;
        for a in argv.iter().skip(1) {
            let s = a.to_string_lossy().into_owned();
            if skip {
                skip = false;
                continue;
            }
            if s == "--threads" || s == "--out-dir" || s == "--config" {
                skip = true;
                continue;
            }
            if s.starts_with("--threads=")
                || s.starts_with("--out-dir=")
                || s.starts_with("--config=")
            {
                continue;
            }
            args.push(s);
        }
        Outputs {
            dir,
            command: command.to_string(),
            args,
            seeds: Vec::new(),
            written: Vec::new(),
        }
    }

    pub fn seed(&mut self, s: u64) {
        self.seeds.push(s);
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.dir.join(p)
        }
    }

    /// Creates `p` (relative to the output directory) and hands a writer to `f`.
    pub fn write<F>(&mut self, p: &Path, f: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<()>,
    {
        let full = self.resolve(p);
        if let Some(parent) = full.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        let file = File::create(&full).with_context(|| format!("creating {}", full.display()))?;
        let mut w = BufWriter::new(file);
        f(&mut w)?;
        w.flush()?;
        self.written.push(p.to_string_lossy().into_owned());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, p: &Path, value: &T) -> Result<()> {
        self.write(p, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)?;
            Ok(())
        })
    }

    /// Tidy `t,color,value` rows.
    pub fn write_plot_data(&mut self, p: &Path, rows: &[(f64, SimplexPoint)]) -> Result<()> {
        self.write(p, |w| {
            writeln!(w, "t,color,value")?;
            for (t, y) in rows {
                for (c, v) in y.weights().iter().enumerate() {
                    writeln!(w, "{t},{},{v}", c + 1)?;
                }
            }
            Ok(())
        })
    }

    /// Writes `<command>.manifest.json` next to the first output.
    pub fn finish(self) -> Result<()> {
        let name = format!("{}.manifest.json", self.command.replace(' ', "-"));
        let dir = self
            .written
            .first()
            .and_then(|p| Path::new(p).parent().map(Path::to_path_buf))
            .unwrap_or_default();
        let manifest = Manifest {
            tool: "exmp",
            version: env!("CARGO_PKG_VERSION"),
            command: &self.command,
            args: &self.args,
            seeds: &self.seeds,
            outputs: &self.written,
        };
        let full = self.resolve(&dir.join(name));
        if let Some(parent) = full.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&full, text).with_context(|| format!("writing {}", full.display()))?;
        Ok(())
    }
}

/// Prints pretty JSON to stdout.
pub fn print_json(value: &Value) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}
