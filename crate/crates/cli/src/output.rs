use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;

pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CONTRADICTION: i32 = 3;
pub const EXIT_RESOURCE: i32 = 4;

/// An error carrying the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn config(msg: impl Into<String>) -> Self {
        Failure {
            code: EXIT_CONFIG,
            message: msg.into(),
        }
    }

    pub fn contradiction(msg: impl Into<String>) -> Self {
        Failure {
            code: EXIT_CONTRADICTION,
            message: msg.into(),
        }
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        Failure {
            code: EXIT_RUNTIME,
            message: msg.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<hriesz::Error> for Failure {
    fn from(e: hriesz::Error) -> Self {
        use hriesz::Error as E;
        let code = match &e {
            E::AtomCap { .. } => EXIT_RESOURCE,
            E::Io(_) | E::NonConvergence { .. } | E::SingularKernel => EXIT_RUNTIME,
            _ => EXIT_CONFIG,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::runtime(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, Failure>;

#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub library_version: &'static str,
    pub command: &'a str,
    pub seed: u64,
    pub threads: usize,
    pub config: &'a RunConfig,
    pub result: &'a T,
    pub verdict: Option<&'a VerdictCheck>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerdictCheck {
    pub expected: String,
    pub observed: String,
    pub ok: bool,
}

impl VerdictCheck {
    pub fn into_result(self, what: &str) -> CliResult<()> {
        if self.ok {
            Ok(())
        } else {
            Err(Failure::contradiction(format!(
                "{what}: expected {}, observed {}",
                self.expected, self.observed
            )))
        }
    }
}

pub struct Sink<'a> {
    pub dir: PathBuf,
    pub config: &'a RunConfig,
    pub threads: usize,
}

impl<'a> Sink<'a> {
    pub fn new(config: &'a RunConfig, threads: usize) -> CliResult<Self> {
        let dir = config.output_dir.clone();
        fs::create_dir_all(&dir).map_err(|e| Failure::runtime(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Sink { dir, config, threads })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn json<T: Serialize>(
        &self,
        name: &str,
        command: &str,
        result: &T,
        verdict: Option<&VerdictCheck>,
    ) -> CliResult<PathBuf> {
        let env = Envelope {
            tool: "hriesz",
            version: env!("CARGO_PKG_VERSION"),
            library_version: hriesz::VERSION,
            command,
            seed: self.config.seed,
            threads: self.threads,
            config: self.config,
            result,
            verdict,
        };
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(&env).map_err(|e| Failure::runtime(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }

    pub fn create(&self, name: &str) -> CliResult<fs::File> {
        Ok(fs::File::create(self.path(name))?)
    }
}

/// Writes rows as CSV with a header line; floats use Rust's shortest
/// round-trip formatting.
pub fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}
