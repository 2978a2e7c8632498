//! Output directories, run manifests and chain loading shared by the
//! commands.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use stochmort::data::read_panel_csv;
use stochmort::gibbs::{read_chain_csv, read_chain_json};
use stochmort::{AgeYearWindow, DataPanel, ErrorKind, ModelKind, PosteriorChain, SamplerConfig};

/// Failure of a command, carrying the exit status it maps to.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(stochmort::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Usage => 2,
                ErrorKind::Data => 3,
                ErrorKind::Numeric => 4,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<stochmort::Error> for CliError {
    fn from(e: stochmort::Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Core(stochmort::Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| io_err(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    serde_json::from_reader(open(path)?).map_err(|source| {
        CliError::Core(stochmort::Error::Json {
            path: path.to_path_buf(),
            source,
        })
    })
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

#[derive(Debug, Serialize)]
pub struct InputRecord {
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to rerun a command and check its outputs.
#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    /// The full command line.
    pub args: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<AgeYearWindow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chains: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub inputs: Vec<InputRecord>,
    pub output_dir: PathBuf,
    /// File name to SHA-256 of its contents.
    pub artifacts: BTreeMap<String, String>,
}

/// Output directory of one command invocation. Tracks the files written
/// so the manifest can list their checksums.
pub struct RunDir {
    pub dir: PathBuf,
    command: String,
    artifacts: Vec<String>,
    log: Vec<String>,
    quiet: bool,
}

impl RunDir {
    pub fn create(dir: PathBuf, command: &str, quiet: bool) -> CliResult<Self> {
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        Ok(RunDir {
            dir,
            command: command.to_string(),
            artifacts: Vec::new(),
            log: Vec::new(),
            quiet,
        })
    }

    /// Writes `name` through `write` and records it as an artifact.
    pub fn write(
        &mut self,
        name: &str,
        write: impl FnOnce(&mut BufWriter<File>) -> Result<(), stochmort::Error>,
    ) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| io_err(&path, e))?;
        let mut w = BufWriter::new(file);
        write(&mut w)?;
        w.flush().map_err(|e| io_err(&path, e))?;
        self.artifacts.push(name.to_string());
        Ok(path)
    }

    pub fn write_io(
        &mut self,
        name: &str,
        write: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        let p = path.clone();
        self.write(name, move |w| write(w).map_err(|e| stochmort::Error::Io { path: p, source: e }))
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<PathBuf> {
        self.write_io(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value).map_err(std::io::Error::other)?;
            writeln!(w)
        })
    }

    /// Appends a line to the run log and echoes it to stderr.
    pub fn note(&mut self, line: impl Into<String>) {
        let line = line.into();
        if !self.quiet {
            eprintln!("{line}");
        }
        self.log.push(line);
    }

    /// Writes the log and the manifest, which lists every artifact's
    /// checksum; consumes the run.
    pub fn finish(mut self, mut manifest: RunManifest) -> CliResult<()> {
        let log = std::mem::take(&mut self.log);
        let log_name = format!("{}.log", self.command);
        self.write_io(&log_name, |w| log.iter().try_for_each(|l| writeln!(w, "{l}")))?;
        for name in &self.artifacts {
            manifest
                .artifacts
                .insert(name.clone(), sha256_file(&self.dir.join(name))?);
        }
        manifest.output_dir = self.dir.clone();
        let name = format!("{}-manifest.json", self.command);
        self.write_json(&name, &manifest)?;
        Ok(())
    }
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            args: std::env::args().collect(),
            model: None,
            window: None,
            sampler: None,
            chains: None,
            seed: None,
            inputs: Vec::new(),
            output_dir: PathBuf::new(),
            artifacts: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> CliResult<()> {
        self.inputs.push(InputRecord {
            path: path.to_path_buf(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }
}

/// A chain read from disk together with where it came from.
pub struct LoadedChain {
    pub chain: PosteriorChain,
    /// Directory holding the chain files.
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
}

/// Reads a chain from a fit directory (`chain.csv` or `chain-*.csv`,
/// pooled in name order) or from a single `.csv`/`.json` chain file.
pub fn load_chain(path: &Path) -> CliResult<LoadedChain> {
    let (dir, files) = if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| io_err(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n == "chain.csv" || (n.starts_with("chain-") && n.ends_with(".csv")))
            })
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(CliError::Core(stochmort::Error::Data(format!(
                "{}: no chain files found",
                path.display()
            ))));
        }
        (path.to_path_buf(), files)
    } else {
        let dir = path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
        (dir, vec![path.to_path_buf()])
    };

    let mut pooled: Option<PosteriorChain> = None;
    for file in &files {
        let name = file.display().to_string();
        let chain = if file.extension().is_some_and(|e| e == "json") {
            read_chain_json(open(file)?, &name)?
        } else {
            read_chain_csv(open(file)?, &name)?
        };
        match &mut pooled {
            None => pooled = Some(chain),
            Some(p) => {
                if p.spec != chain.spec {
                    return Err(CliError::Core(stochmort::Error::Data(format!(
                        "{name}: model or window differs from the other chains"
                    ))));
                }
                p.draws.extend(chain.draws);
            }
        }
    }
    Ok(LoadedChain {
        chain: pooled.expect("at least one file"),
        dir,
        files,
    })
}

pub fn load_panel(path: &Path) -> CliResult<DataPanel> {
    Ok(read_panel_csv(open(path)?, &path.display().to_string())?)
}
