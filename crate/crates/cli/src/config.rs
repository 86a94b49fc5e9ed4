//! Flat `section.key = value` run configuration.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use schwarz_core::darcy::GrfMethod;
use schwarz_core::dataset::CorpusSpec;
use schwarz_core::precond::Level1Variant;
use schwarz_core::spectral::Selection;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PermFamily {
    Constant,
    Lognormal,
    Channels,
}

impl PermFamily {
    pub const ALL: [PermFamily; 3] = [PermFamily::Constant, PermFamily::Lognormal, PermFamily::Channels];

    pub fn name(self) -> &'static str {
        match self {
            PermFamily::Constant => "constant",
            PermFamily::Lognormal => "lognormal",
            PermFamily::Channels => "channels",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoarseMode {
    Exact,
    Import,
    None,
}

impl CoarseMode {
    pub fn name(self) -> &'static str {
        match self {
            CoarseMode::Exact => "exact",
            CoarseMode::Import => "import",
            CoarseMode::None => "none",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Partitioner {
    Coordinates,
    Graph,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemConfig {
    pub dim: usize,
    pub nx: usize,
    pub ny: Option<usize>,
    pub nz: Option<usize>,
    pub perm: PermFamily,
    pub kappa: f64,
    pub sigma2: f64,
    pub corr: f64,
    pub grf: GrfMethod,
    pub kappa_c: f64,
    pub seed: u64,
    pub bc: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecompositionConfig {
    pub k: usize,
    pub delta: usize,
    pub partitioner: Partitioner,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoarseConfig {
    pub mode: CoarseMode,
    pub n_c: usize,
    pub tau: Option<f64>,
    pub max: Option<usize>,
    pub import_dir: Option<PathBuf>,
    pub variant: Level1Variant,
}

impl CoarseConfig {
    pub fn selection(&self) -> Selection {
        match self.tau {
            Some(tau) => Selection::Adaptive { tau, max: self.max },
            None => Selection::fixed(self.n_c),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub dense_kappa: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub decomposition: DecompositionConfig,
    pub coarse: CoarseConfig,
    pub solver: SolverConfig,
    pub output_dir: PathBuf,
    pub corpus: CorpusSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemConfig {
                dim: 2,
                nx: 64,
                ny: None,
                nz: None,
                perm: PermFamily::Channels,
                kappa: 1.0,
                sigma2: 2.0,
                corr: 0.1,
                grf: GrfMethod::Auto,
                kappa_c: 1e5,
                seed: 0,
                bc: "C1".into(),
            },
            decomposition: DecompositionConfig { k: 16, delta: 2, partitioner: Partitioner::Coordinates, seed: 0 },
            coarse: CoarseConfig {
                mode: CoarseMode::Exact,
                n_c: 8,
                tau: None,
                max: None,
                import_dir: None,
                variant: Level1Variant::SymmetricAs,
            },
            solver: SolverConfig { tol: 1e-8, max_iter: 1000, dense_kappa: false },
            output_dir: PathBuf::from("out"),
            corpus: CorpusSpec::default(),
        }
    }
}

/// Every accepted key with its default, as shown by `--help`.
pub const KEYS_HELP: &str = "\
Configuration keys (file lines `key = value`, `#` comments; override with --set key=value):
  problem.dim=2                 2 or 3
  problem.nx=64                 cells per axis; problem.ny / problem.nz default to nx
  problem.perm=channels         constant | lognormal | channels
  problem.kappa=1               value of the constant field
  problem.sigma2=2              log-normal variance
  problem.corr=0.1              log-normal correlation length (unit domain)
  problem.grf=auto              auto | circulant | karhunen_loeve
  problem.kappa_c=1e5           channel permeability (background 1)
  problem.seed=0
  problem.bc=C1                 C1 (flow in y) | C2 (flow in x)
  decomposition.k=16
  decomposition.delta=2
  decomposition.partitioner=coordinates   coordinates | graph
  decomposition.seed=0
  coarse.mode=exact             exact | import | none
  coarse.n_c=8                  fixed spectral vectors per subdomain
  coarse.tau=                   adaptive threshold; when set, keeps eigenvalues >= tau
  coarse.max=                   cap on the adaptive count
  coarse.import_dir=            directory of sub_XXXX.cbx files for import mode
  coarse.variant=symmetric      symmetric | weighted first level
  solver.tol=1e-8
  solver.max_iter=1000
  solver.dense_kappa=false      also compute the dense condition number (n <= 4096)
  outputs.dir=out
  corpus.num_graphs=100  corpus.n_vertices=4000  corpus.target_size=2000
  corpus.nnz_min=3  corpus.nnz_max=7  corpus.delta=1  corpus.n_c=8
  corpus.train_fraction=0.8  corpus.targets=true  corpus.seed=0";

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| ConfigError(format!("invalid value {value:?} for {key}")))
}

fn optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>, ConfigError> {
    if value.is_empty() {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        let p = &mut self.problem;
        let c = &mut self.coarse;
        let corpus = &mut self.corpus;
        match key.trim() {
            "problem.dim" => p.dim = parse(key, v)?,
            "problem.nx" => p.nx = parse(key, v)?,
            "problem.ny" => p.ny = optional(key, v)?,
            "problem.nz" => p.nz = optional(key, v)?,
            "problem.perm" => {
                p.perm = match v {
                    "constant" => PermFamily::Constant,
                    "lognormal" => PermFamily::Lognormal,
                    "channels" => PermFamily::Channels,
                    _ => return Err(ConfigError(format!("unknown permeability family {v:?}"))),
                }
            }
            "problem.kappa" => p.kappa = parse(key, v)?,
            "problem.sigma2" => p.sigma2 = parse(key, v)?,
            "problem.corr" => p.corr = parse(key, v)?,
            "problem.grf" => {
                p.grf = match v {
                    "auto" => GrfMethod::Auto,
                    "circulant" => GrfMethod::Circulant,
                    "karhunen_loeve" | "kl" => GrfMethod::KarhunenLoeve,
                    _ => return Err(ConfigError(format!("unknown GRF method {v:?}"))),
                }
            }
            "problem.kappa_c" => p.kappa_c = parse(key, v)?,
            "problem.seed" => p.seed = parse(key, v)?,
            "problem.bc" => {
                if !matches!(v.to_ascii_uppercase().as_str(), "C1" | "C2") {
                    return Err(ConfigError(format!("unknown boundary preset {v:?}")));
                }
                p.bc = v.to_ascii_uppercase();
            }
            "decomposition.k" => self.decomposition.k = parse(key, v)?,
            "decomposition.delta" => self.decomposition.delta = parse(key, v)?,
            "decomposition.partitioner" => {
                self.decomposition.partitioner = match v {
                    "coordinates" => Partitioner::Coordinates,
                    "graph" => Partitioner::Graph,
                    _ => return Err(ConfigError(format!("unknown partitioner {v:?}"))),
                }
            }
            "decomposition.seed" => self.decomposition.seed = parse(key, v)?,
            "coarse.mode" => {
                c.mode = match v {
                    "exact" => CoarseMode::Exact,
                    "import" => CoarseMode::Import,
                    "none" => CoarseMode::None,
                    _ => return Err(ConfigError(format!("unknown coarse mode {v:?}"))),
                }
            }
            "coarse.n_c" => c.n_c = parse(key, v)?,
            "coarse.tau" => c.tau = optional(key, v)?,
            "coarse.max" => c.max = optional(key, v)?,
            "coarse.import_dir" => c.import_dir = (!v.is_empty()).then(|| PathBuf::from(v)),
            "coarse.variant" => {
                c.variant = match v {
                    "symmetric" => Level1Variant::SymmetricAs,
                    "weighted" => Level1Variant::WeightedAs,
                    _ => return Err(ConfigError(format!("unknown first-level variant {v:?}"))),
                }
            }
            "solver.tol" => self.solver.tol = parse(key, v)?,
            "solver.max_iter" => self.solver.max_iter = parse(key, v)?,
            "solver.dense_kappa" => self.solver.dense_kappa = parse(key, v)?,
            "outputs.dir" => self.output_dir = PathBuf::from(v),
            "corpus.num_graphs" => corpus.num_graphs = parse(key, v)?,
            "corpus.n_vertices" => corpus.n_vertices = parse(key, v)?,
            "corpus.target_size" => corpus.target_subdomain_size = parse(key, v)?,
            "corpus.nnz_min" => corpus.nnz_range[0] = parse(key, v)?,
            "corpus.nnz_max" => corpus.nnz_range[1] = parse(key, v)?,
            "corpus.delta" => corpus.delta = parse(key, v)?,
            "corpus.n_c" => corpus.n_c = parse(key, v)?,
            "corpus.train_fraction" => corpus.train_fraction = parse(key, v)?,
            "corpus.targets" => corpus.with_targets = parse(key, v)?,
            "corpus.seed" => corpus.seed = parse(key, v)?,
            other => return Err(ConfigError(format!("unknown configuration key {other:?}"))),
        }
        Ok(())
    }

    /// Applies the lines of a config file in order.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {}: expected key = value", lineno + 1)))?;
            self.set(k, v).map_err(|e| ConfigError(format!("line {}: {}", lineno + 1, e.0)))?;
        }
        Ok(())
    }

    /// Applies one `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<(), ConfigError> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("override {kv:?} is not key=value")))?;
        self.set(k, v)
    }

    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
            cfg.apply_text(&text)?;
        }
        for kv in overrides {
            cfg.apply_override(kv)?;
        }
        Ok(cfg)
    }

    pub fn grid_dims(&self) -> Vec<usize> {
        let p = &self.problem;
        let mut dims = vec![p.nx, p.ny.unwrap_or(p.nx)];
        if p.dim == 3 {
            dims.push(p.nz.unwrap_or(p.nx));
        }
        dims
    }
}
