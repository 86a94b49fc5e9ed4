//! Subcommand implementations. Each returns a printable summary or a [`CliError`] carrying
//! its exit code.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use schwarz_core::darcy::{
    assemble_tpfa, gen_channels, gen_constant, gen_lognormal_with, BoundaryConfig, ChannelParams, Grid,
    LinearSystem, PermeabilityField,
};
use schwarz_core::dataset::{build_corpus, export_subdomains, import_coarse_spaces, read_cbx, SubdomainGraphRecord};
use schwarz_core::decomp::{adjacency_graph, decompose, overlap_stats, part_vector, write_partition_vector};
use schwarz_core::decomp::{Decomposition, DecompositionManifest};
use schwarz_core::io::write_atomic;
use schwarz_core::krylov::{bound_check, pcg, BoundReport, SolveReport};
use schwarz_core::linalg::SymSparseMatrix;
use schwarz_core::precond::{preconditioned_spectrum, CoarseInfo, TwoLevelPreconditioner};
use schwarz_core::spectral::{build_all_blocks, solve_all, LocalBlocks, LocalCoarseSpace};
use schwarz_core::subspace::{a_orthonormalize, dist, ImageOperator};
use schwarz_core::Error;

use crate::config::{CoarseMode, ConfigError, Partitioner, PermFamily, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] Error),
    #[error("PCG did not converge: {iterations} iterations, relative residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

impl CliError {
    /// 1 non-convergence, 2 input or configuration error, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::NotConverged { .. } => 1,
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_input_error() => 2,
            CliError::Core(_) => 3,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn build_permeability(cfg: &RunConfig, grid: &Grid) -> CliResult<PermeabilityField> {
    let p = &cfg.problem;
    Ok(match p.perm {
        PermFamily::Constant => gen_constant(grid, p.kappa)?,
        PermFamily::Lognormal => gen_lognormal_with(grid, p.sigma2, &vec![p.corr; grid.dim()], p.seed, p.grf)?,
        PermFamily::Channels => gen_channels(grid, &ChannelParams::scaled_default(grid, p.kappa_c), p.seed)?,
    })
}

pub fn build_system(cfg: &RunConfig) -> CliResult<LinearSystem> {
    if !matches!(cfg.problem.dim, 2 | 3) {
        return Err(CliError::Config(format!("problem.dim = {} must be 2 or 3", cfg.problem.dim)));
    }
    let grid = Grid::new(&cfg.grid_dims())?;
    let perm = build_permeability(cfg, &grid)?;
    let bc = BoundaryConfig::preset(&cfg.problem.bc)?;
    Ok(assemble_tpfa(&grid, &perm, &bc, None)?)
}

pub fn build_decomposition(cfg: &RunConfig, sys: &LinearSystem) -> CliResult<Decomposition> {
    let graph = adjacency_graph(&sys.a);
    let coords: Vec<[f64; 3]> = (0..sys.grid.n_cells()).map(|c| sys.grid.center(c)).collect();
    let coords = match cfg.decomposition.partitioner {
        Partitioner::Coordinates => Some(coords.as_slice()),
        Partitioner::Graph => None,
    };
    Ok(decompose(&graph, coords, cfg.decomposition.k, cfg.decomposition.delta, cfg.decomposition.seed)?)
}

fn import_dir(cfg: &RunConfig) -> CliResult<&Path> {
    cfg.coarse
        .import_dir
        .as_deref()
        .ok_or_else(|| CliError::Config("coarse.import_dir is required in import mode".into()))
}

/// Coarse spaces for `mode`, or `None` for the one-level method.
pub fn coarse_spaces(cfg: &RunConfig, mode: CoarseMode, blocks: &[LocalBlocks]) -> CliResult<Option<Vec<LocalCoarseSpace>>> {
    Ok(match mode {
        CoarseMode::None => None,
        CoarseMode::Exact => Some(solve_all(blocks, cfg.coarse.selection())?),
        CoarseMode::Import => Some(import_coarse_spaces(import_dir(cfg)?, blocks)?),
    })
}

/// A preconditioner with the time spent building it (decomposition included).
pub struct Setup {
    pub decomp: Decomposition,
    pub coarse: Option<Vec<LocalCoarseSpace>>,
    pub precond: TwoLevelPreconditioner,
    pub seconds: f64,
}

pub fn setup(cfg: &RunConfig, sys: &LinearSystem, mode: CoarseMode) -> CliResult<Setup> {
    let clock = Instant::now();
    let decomp = build_decomposition(cfg, sys)?;
    let coarse = match mode {
        CoarseMode::None => None,
        _ => coarse_spaces(cfg, mode, &build_all_blocks(&sys.a, &decomp)?)?,
    };
    let precond = TwoLevelPreconditioner::assemble(&sys.a, &decomp, coarse.as_deref(), cfg.coarse.variant)?;
    Ok(Setup { decomp, coarse, precond, seconds: clock.elapsed().as_secs_f64() })
}

#[derive(Serialize)]
struct SolveArtifact<'a> {
    mode: &'static str,
    n: usize,
    report: &'a SolveReport,
    coarse: &'a CoarseInfo,
    decomposition: DecompositionManifest,
    taus: Vec<f64>,
    m_bounds: Vec<f64>,
    bound: Option<BoundReport>,
    flux_in: f64,
    flux_out: f64,
}

/// Raw field: a JSON header line then `f64` little-endian values.
fn raster_bytes(dims: &[usize], field: &str, values: &[f64]) -> Vec<u8> {
    let header = serde_json::json!({ "dims": dims, "field": field });
    let mut out = header.to_string().into_bytes();
    out.push(b'\n');
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub struct SolveOutcome {
    pub report: SolveReport,
    pub bound: Option<BoundReport>,
    pub coarse_dim: usize,
}

fn run_solve(cfg: &RunConfig, sys: &LinearSystem, mode: CoarseMode) -> CliResult<(SolveOutcome, Vec<f64>, Setup)> {
    let s = setup(cfg, sys, mode)?;
    let (x, mut report) = pcg(&sys.a, &s.precond, &sys.b, cfg.solver.tol, cfg.solver.max_iter)?;
    report.setup_seconds = s.seconds;
    if cfg.solver.dense_kappa {
        report.kappa_dense = Some(preconditioned_spectrum(&sys.a, &s.precond)?.kappa);
    }
    let bound = match (&s.coarse, mode) {
        (Some(cs), CoarseMode::Exact) => {
            let taus: Vec<f64> = cs.iter().map(|c| c.tau).collect();
            let ms: Vec<f64> = cs.iter().map(|c| c.m_bound).collect();
            let b = bound_check(&report, overlap_stats(&s.decomp), &taus, &ms, &[])?;
            report.bound_value = Some(b.lemma_bound);
            Some(b)
        }
        _ => None,
    };
    let coarse_dim = s.precond.coarse_dim();
    Ok((SolveOutcome { report, bound, coarse_dim }, x, s))
}

pub fn cmd_solve(cfg: &RunConfig) -> CliResult<String> {
    let sys = build_system(cfg)?;
    let mode = cfg.coarse.mode;
    let (out, x, s) = run_solve(cfg, &sys, mode)?;
    let dir = &cfg.output_dir;
    write_atomic(&dir.join("time_to_accuracy.csv"), out.report.time_to_accuracy_csv().as_bytes())?;
    let (flux_in, flux_out) = sys.flux_balance(&x);
    let artifact = SolveArtifact {
        mode: mode.name(),
        n: sys.a.n(),
        report: &out.report,
        coarse: s.precond.coarse_info(),
        decomposition: s.decomp.manifest(),
        taus: s.coarse.iter().flatten().map(|c| c.tau).collect(),
        m_bounds: s.coarse.iter().flatten().map(|c| c.m_bound).collect(),
        bound: out.bound.clone(),
        flux_in,
        flux_out,
    };
    write_atomic(&dir.join("report.json"), &serde_json::to_vec_pretty(&artifact).map_err(Error::from)?)?;
    write_atomic(&dir.join("pressure.raster"), &raster_bytes(sys.grid.dims(), "pressure", &x))?;
    let r = &out.report;
    if !r.converged {
        return Err(CliError::NotConverged { iterations: r.iterations, residual: r.final_residual() });
    }
    Ok(format!(
        "converged in {} iterations, relative residual {:.3e}, coarse dim {}, setup {:.3}s, solve {:.3}s",
        r.iterations,
        r.final_residual(),
        out.coarse_dim,
        r.setup_seconds,
        r.solve_seconds
    ))
}

pub fn cmd_corpus(cfg: &RunConfig) -> CliResult<String> {
    let m = build_corpus(&cfg.corpus, &cfg.output_dir)?;
    Ok(format!(
        "{} records from {} graphs, mean record size {:.1}, manifest {}",
        m.records.len(),
        m.graphs.len(),
        m.mean_record_size(),
        cfg.output_dir.join(schwarz_core::dataset::MANIFEST_NAME).display()
    ))
}

pub fn cmd_export(cfg: &RunConfig) -> CliResult<String> {
    let sys = build_system(cfg)?;
    let d = build_decomposition(cfg, &sys)?;
    let blocks = build_all_blocks(&sys.a, &d)?;
    let exact = solve_all(&blocks, cfg.coarse.selection())?;
    let dir = &cfg.output_dir;
    let files = export_subdomains(dir, &blocks, &exact)?;
    write_atomic(&dir.join("decomposition.json"), &serde_json::to_vec_pretty(&d.manifest()).map_err(Error::from)?)?;
    write_partition_vector(&dir.join("partition.txt"), &part_vector(&interiors(&d), d.n()))?;
    Ok(format!("wrote {} files for {} subdomains to {}", files.len(), d.k(), dir.display()))
}

fn interiors(d: &Decomposition) -> Vec<Vec<usize>> {
    (0..d.k()).map(|i| d.interior(i).to_vec()).collect()
}

/// Distances between imported and freshly computed spectral spaces, per subdomain.
pub fn cmd_import_check(cfg: &RunConfig) -> CliResult<String> {
    let sys = build_system(cfg)?;
    let d = build_decomposition(cfg, &sys)?;
    let blocks = build_all_blocks(&sys.a, &d)?;
    let imported = import_coarse_spaces(import_dir(cfg)?, &blocks)?;
    let exact = solve_all(&blocks, cfg.coarse.selection())?;
    let mut lines = Vec::with_capacity(blocks.len() + 1);
    let mut worst = 0.0f64;
    for (i, b) in blocks.iter().enumerate() {
        let (x, y) = (imported[i].spectral_part(), exact[i].spectral_part());
        if x.ncols() != y.ncols() {
            return Err(CliError::Core(Error::Subdomain {
                subdomain: i,
                message: format!("imported n_c = {} but the exact space has {}", x.ncols(), y.ncols()),
            }));
        }
        let op = ImageOperator::new(&b.a_tilde)?;
        let dv = dist(&a_orthonormalize(&op, &x)?, &a_orthonormalize(&op, &y)?)?;
        worst = worst.max(dv);
        lines.push(format!("subdomain {i}: dist {dv:?}"));
    }
    lines.push(format!("max dist {worst:?}"));
    Ok(lines.join("\n"))
}

/// Ã-distance between two CBX bases of the subdomain described by an SGB record
/// (`Ã = A_i − diag(s_v)`).
pub fn cmd_distance(record: &Path, a: &Path, b: &Path) -> CliResult<String> {
    let rec = SubdomainGraphRecord::read(record)?;
    let s: Vec<f64> = rec.features.iter().map(|f| -f[2]).collect();
    let a_tilde: SymSparseMatrix = rec.matrix.add_diagonal(&s)?;
    let op = ImageOperator::new(&a_tilde)?;
    let (x, y) = (read_cbx(a)?, read_cbx(b)?);
    for m in [&x, &y] {
        if m.nrows() != rec.n() {
            return Err(CliError::Core(Error::DimensionMismatch {
                context: "basis rows vs record".into(),
                expected: rec.n(),
                got: m.nrows(),
            }));
        }
    }
    let d = dist(&a_orthonormalize(&op, &x)?, &a_orthonormalize(&op, &y)?)?;
    Ok(format!("{d:?}"))
}

/// Dense condition number of the configured preconditioner with its bound.
pub fn cmd_condest(cfg: &RunConfig) -> CliResult<String> {
    let sys = build_system(cfg)?;
    let s = setup(cfg, &sys, cfg.coarse.mode)?;
    let spec = preconditioned_spectrum(&sys.a, &s.precond)?;
    let mut out = format!(
        "kappa {:?}\nlambda_min {:?}\nlambda_max {:?}\ncoarse_dim {}",
        spec.kappa,
        spec.lambda_min(),
        spec.lambda_max(),
        s.precond.coarse_dim()
    );
    if let (Some(cs), CoarseMode::Exact) = (&s.coarse, cfg.coarse.mode) {
        let taus: Vec<f64> = cs.iter().map(|c| c.tau).collect();
        let ms: Vec<f64> = cs.iter().map(|c| c.m_bound).collect();
        let report = SolveReport { kappa_dense: Some(spec.kappa), ..Default::default() };
        let b = bound_check(&report, overlap_stats(&s.decomp), &taus, &ms, &[])?;
        out.push_str(&format!("\nlemma_bound {:?}\nholds {}", b.lemma_bound, b.lemma_holds == Some(true)));
    }
    Ok(out)
}

#[derive(Serialize)]
struct BenchCell {
    perm: &'static str,
    bc: String,
    mode: &'static str,
    csv: PathBuf,
    iterations: usize,
    converged: bool,
    setup_seconds: f64,
    solve_seconds: f64,
    coarse_dim: usize,
}

/// Runs every permeability family under C1 and C2 with each coarse mode and writes one
/// time-to-accuracy CSV per combination.
pub fn cmd_bench(cfg: &RunConfig) -> CliResult<String> {
    let mut modes = vec![CoarseMode::None, CoarseMode::Exact];
    if cfg.coarse.import_dir.is_some() {
        modes.push(CoarseMode::Import);
    }
    let dir = cfg.output_dir.join("bench");
    let mut cells = Vec::new();
    for perm in PermFamily::ALL {
        for bc in ["C1", "C2"] {
            let mut c = cfg.clone();
            c.problem.perm = perm;
            c.problem.bc = bc.into();
            let sys = build_system(&c)?;
            for &mode in &modes {
                let (out, _, _) = run_solve(&c, &sys, mode)?;
                let csv = dir.join(format!("{}_{}_{}.csv", perm.name(), bc, mode.name()));
                write_atomic(&csv, out.report.time_to_accuracy_csv().as_bytes())?;
                cells.push(BenchCell {
                    perm: perm.name(),
                    bc: bc.into(),
                    mode: mode.name(),
                    csv,
                    iterations: out.report.iterations,
                    converged: out.report.converged,
                    setup_seconds: out.report.setup_seconds,
                    solve_seconds: out.report.solve_seconds,
                    coarse_dim: out.coarse_dim,
                });
            }
        }
    }
    write_atomic(&dir.join("summary.json"), &serde_json::to_vec_pretty(&cells).map_err(Error::from)?)?;
    let lines: Vec<String> = cells
        .iter()
        .map(|c| format!("{:<10} {} {:<6} iterations {:>5} setup {:.3}s solve {:.3}s", c.perm, c.bc, c.mode, c.iterations, c.setup_seconds, c.solve_seconds))
        .collect();
    Ok(lines.join("\n"))
}
