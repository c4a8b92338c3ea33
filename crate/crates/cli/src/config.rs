use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use heatnet::design::{ContinuationSchedule, PipeCatalog};
use heatnet::grid::GridSpec;
use heatnet::optimizer::OptimizerOptions;
use heatnet::{DesignVector, Model, Network, RadiatorModel, SolverOptions};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Common;

/// Error with the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Solver(String),
    Optimizer(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Solver(_) => 3,
            Failure::Optimizer(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration: {m}"),
            Failure::Solver(m) => write!(f, "state solver: {m}"),
            Failure::Optimizer(m) => write!(f, "optimizer: {m}"),
        }
    }
}

pub fn config_err(e: impl fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

/// An input file with the digest of its bytes.
#[derive(Debug, Clone, Serialize)]
pub struct InputFile {
    pub path: PathBuf,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read_input(path: &Path) -> Result<(String, InputFile), Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    let file = InputFile { path: path.to_path_buf(), sha256: sha256_hex(text.as_bytes()) };
    Ok((text, file))
}

/// Everything a run depends on. Its hash identifies the run in the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub network: Option<InputFile>,
    pub design: Option<InputFile>,
    pub catalog: Option<PipeCatalog>,
    pub schedule: Option<ContinuationSchedule>,
    pub radiator_model: RadiatorModel,
    pub solver: SolverOptions,
    pub optimizer: Option<OptimizerOptions>,
    pub grid: Option<GridSpec>,
    pub seed: u64,
}

impl RunConfig {
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}

pub fn load_network(path: &Path) -> Result<(Network, InputFile), Failure> {
    let (text, file) = read_input(path)?;
    let net = Network::from_json(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    Ok((net, file))
}

pub fn load_design(path: &Path, model: &Model) -> Result<(DesignVector, InputFile), Failure> {
    #[derive(serde::Deserialize)]
    #[serde(untagged)]
    enum DesignFile {
        Plain(DesignVector),
        Output { design: DesignVector },
    }
    let (text, file) = read_input(path)?;
    let phi = match serde_json::from_str::<DesignFile>(&text) {
        Ok(DesignFile::Plain(d)) | Ok(DesignFile::Output { design: d }) => d,
        Err(e) => return Err(Failure::Config(format!("{}: {e}", path.display()))),
    };
    if phi.layout() != model.layout() {
        return Err(Failure::Config(format!(
            "{}: design has layout {:?}, network needs {:?}",
            path.display(),
            phi.layout(),
            model.layout()
        )));
    }
    if phi.flatten().iter().any(|v| !v.is_finite()) {
        return Err(Failure::Config(format!("{}: non-finite design value", path.display())));
    }
    Ok((phi, file))
}

pub fn load_catalog(path: Option<&Path>) -> Result<PipeCatalog, Failure> {
    match path {
        Some(p) => PipeCatalog::load(p).map_err(config_err),
        None => Ok(PipeCatalog::default()),
    }
}

pub fn load_schedule(path: Option<&Path>) -> Result<ContinuationSchedule, Failure> {
    let s = match path {
        Some(p) => ContinuationSchedule::load(p).map_err(config_err)?,
        None => ContinuationSchedule::default(),
    };
    s.validate().map_err(config_err)?;
    Ok(s)
}

pub fn solver_options(common: &Common) -> Result<SolverOptions, Failure> {
    let mut s = SolverOptions::default();
    if let Some(t) = common.tol {
        s.tol_h = t;
        s.tol_t = t;
    }
    if let Some(n) = common.newton_max_iter {
        s.max_iter = n;
    }
    s.validate().map_err(Failure::Config)?;
    Ok(s)
}

pub fn create_out_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Config(format!("cannot create {}: {e}", dir.display())))
}

/// Writes outputs and remembers their digests for the manifest.
pub struct OutputSet {
    dir: PathBuf,
    written: Vec<(String, String)>,
    timed: Vec<String>,
}

impl OutputSet {
    pub fn new(dir: &Path) -> Result<Self, Failure> {
        create_out_dir(dir)?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new(), timed: Vec::new() })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), Failure> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))?;
        self.written.push((name.to_string(), sha256_hex(contents.as_bytes())));
        Ok(())
    }

    /// For outputs carrying wall times: listed in the manifest without a digest.
    pub fn write_timed(&mut self, name: &str, contents: &str) -> Result<(), Failure> {
        self.write(name, contents)?;
        self.written.pop();
        self.timed.push(name.to_string());
        Ok(())
    }

    /// Writes `name` with the config hash, versions, seed and output digests.
    pub fn finish(mut self, name: &str, config: &RunConfig, status: &str) -> Result<(), Failure> {
        let outputs: serde_json::Map<String, serde_json::Value> =
            self.written.iter().map(|(n, h)| (n.clone(), serde_json::Value::String(h.clone()))).collect();
        let manifest = serde_json::json!({
            "status": status,
            "config_hash": config.hash(),
            "versions": {
                "heatnet": heatnet::VERSION,
                "heatnet-cli": env!("CARGO_PKG_VERSION"),
            },
            "seed": config.seed,
            "config": config,
            "outputs": outputs,
            "timed_outputs": self.timed,
        });
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        self.write(name, &text)
    }
}
