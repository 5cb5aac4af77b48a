//! Batch commands behind the `asm-tse` binary.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{InputSource, RunConfig};
use crate::error::{Error, Result};
use crate::evaluation::{coverage_sweep, evaluate, relative_error, wavespeed_sweep};
use crate::grid::{aggregate_trajectories, apply_mask, detector_mask, equally_spaced_detectors, GridSpec, ObservationMask, SpeedField};
use crate::heatmap::render_ppm;
use crate::io::{self, Table};
use crate::pipeline::{estimate, Method};
use crate::synth::generate_field;

#[derive(Debug, Parser)]
#[command(name = "asm-tse", version, about = "Traffic speed field estimation from stationary detectors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Aggregate trajectories into a ground-truth field.
    Ingest(IngestArgs),
    /// Estimate a field from detector rows of a ground truth.
    Estimate(CommonArgs),
    /// Relative error against the number of detectors.
    SweepCoverage(CoverageArgs),
    /// Relative error as wave-speed pairs are added to the ADMM bank.
    SweepWavespeeds(WavespeedArgs),
    /// Generate a synthetic ground-truth field.
    Synth(CommonArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Ground truth in the native field format.
    #[arg(long)]
    pub field: Option<PathBuf>,
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long, conflicts_with = "detector_rows")]
    pub detectors: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub detector_rows: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub wave_speeds: Option<Vec<f64>>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the ADMM iteration trace.
    #[arg(long)]
    pub trace: bool,
    /// Write PPM heatmaps.
    #[arg(long)]
    pub heatmap: bool,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Trajectory file; native CSV unless `--ngsim-lane` is given.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Treat the input as an NGSIM extract and keep this lane.
    #[arg(long)]
    pub ngsim_lane: Option<u32>,
    #[arg(long, allow_hyphen_values = true)]
    pub x_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub t_min: Option<f64>,
    #[arg(long)]
    pub dx: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub n_x: Option<usize>,
    #[arg(long)]
    pub n_t: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct CoverageArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Detector counts, e.g. `1,2,3`.
    #[arg(long, value_delimiter = ',')]
    pub counts: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Args)]
pub struct WavespeedArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// `c_cong:c_free` pairs, e.g. `-20:90,-17.5:80`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, value_parser = parse_pair)]
    pub pairs: Option<Vec<(f64, f64)>>,
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected c_cong:c_free, got `{s}`"))?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("not a number: `{v}`"));
    Ok((num(a)?, num(b)?))
}

impl CommonArgs {
    /// Config file (if any) with flags applied on top.
    pub fn resolve(&self) -> Result<RunConfig> {
        let base = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let flags = RunConfig {
            field: self.field.clone(),
            method: self.method,
            detectors: self.detectors,
            detector_rows: self.detector_rows.clone(),
            wave_speeds: self.wave_speeds.clone(),
            beta: self.beta,
            out: self.out.clone(),
            trace: self.trace.then_some(true),
            heatmap: self.heatmap.then_some(true),
            seed: self.seed,
            ..Default::default()
        };
        let mut cfg = base.merge(flags);
        // an explicit count on the command line overrides rows from the file
        if self.detectors.is_some() {
            cfg.detector_rows = None;
        }
        if self.detector_rows.is_some() {
            cfg.detectors = None;
        }
        Ok(cfg)
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(args) => {
            let mut cfg = args.common.resolve()?;
            let flags = RunConfig {
                x_min: args.x_min,
                t_min: args.t_min,
                dx: args.dx,
                dt: args.dt,
                n_x: args.n_x,
                n_t: args.n_t,
                ..Default::default()
            };
            cfg = cfg.merge(flags);
            if let Some(input) = args.input {
                cfg.field = None;
                match args.ngsim_lane {
                    Some(lane) => {
                        cfg.trajectories = None;
                        cfg.ngsim = Some(input);
                        cfg.lane = Some(lane);
                    }
                    None => {
                        cfg.ngsim = None;
                        cfg.trajectories = Some(input);
                    }
                }
            }
            let out = cmd_ingest(&cfg)?;
            println!(
                "wrote {} ({}x{}), {} samples skipped, {} cells filled",
                out.field_path.display(),
                out.grid.n_x,
                out.grid.n_t,
                out.skipped_samples,
                out.filled_cells
            );
        }
        Command::Estimate(args) => {
            let out = cmd_estimate(&args.resolve()?)?;
            println!(
                "{}: relative error {:.5} -> {}",
                out.method,
                out.relative_error,
                out.dir.display()
            );
        }
        Command::SweepCoverage(args) => {
            let mut cfg = args.common.resolve()?;
            if args.counts.is_some() {
                cfg.counts = args.counts;
            }
            let methods = match args.common.method {
                Some(m) => vec![m],
                None => vec![Method::Asm, Method::Admm],
            };
            let table = cmd_sweep_coverage(&cfg, &methods)?;
            print!("{}", table.to_tsv());
        }
        Command::SweepWavespeeds(args) => {
            let mut cfg = args.common.resolve()?;
            if args.pairs.is_some() {
                cfg.pairs = args.pairs;
            }
            let table = cmd_sweep_wavespeeds(&cfg)?;
            print!("{}", table.to_tsv());
        }
        Command::Synth(args) => {
            let path = cmd_synth(&args.resolve()?)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn prepare_out(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.out_dir();
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn write_ppm(path: &Path, values: &ndarray::Array2<f64>, v_max: f64) -> Result<()> {
    fs::write(path, render_ppm(values, v_max)).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone)]
pub struct IngestOutput {
    pub field_path: PathBuf,
    pub grid: GridSpec,
    pub trajectories: usize,
    pub samples: usize,
    pub skipped_samples: usize,
    pub filled_cells: usize,
}

/// Trajectories → `field.txt` and `ingest_report.tsv` in the output directory.
pub fn cmd_ingest(cfg: &RunConfig) -> Result<IngestOutput> {
    let trajectories = match cfg.input()? {
        InputSource::Trajectories(p) => io::read_trajectories(&p)?,
        InputSource::Ngsim { path, lane } => io::read_ngsim(&path, lane)?,
        InputSource::Field(_) => return Err(Error::Config("`ingest` needs `trajectories` or `ngsim` input".into())),
    };
    let grid = cfg.grid()?;
    let agg = aggregate_trajectories(&trajectories, &grid)?;
    let dir = prepare_out(cfg)?;
    let field_path = dir.join("field.txt");
    io::write_field(&field_path, &agg.field)?;
    let out = IngestOutput {
        field_path,
        grid,
        trajectories: trajectories.len(),
        samples: trajectories.iter().map(|t| t.samples().len()).sum(),
        skipped_samples: agg.skipped_samples,
        filled_cells: agg.filled_cells,
    };
    let mut report = Table::new(["key", "value"]);
    report.push(["trajectories".to_string(), out.trajectories.to_string()]);
    report.push(["samples".to_string(), out.samples.to_string()]);
    report.push(["skipped_samples".to_string(), out.skipped_samples.to_string()]);
    report.push(["filled_cells".to_string(), out.filled_cells.to_string()]);
    report.push(["n_x".to_string(), grid.n_x.to_string()]);
    report.push(["n_t".to_string(), grid.n_t.to_string()]);
    io::write_text(&dir.join("ingest_report.tsv"), &report.to_tsv())?;
    if cfg.heatmap.unwrap_or(false) {
        write_ppm(&dir.join("field.ppm"), agg.field.values(), cfg.v_max())?;
    }
    Ok(out)
}

/// Synthetic ground truth → `truth.txt`.
pub fn cmd_synth(cfg: &RunConfig) -> Result<PathBuf> {
    let field = generate_field(&cfg.synthetic()?)?;
    let dir = prepare_out(cfg)?;
    let path = dir.join("truth.txt");
    io::write_field(&path, &field)?;
    if cfg.heatmap.unwrap_or(false) {
        write_ppm(&dir.join("truth.ppm"), field.values(), cfg.v_max())?;
    }
    Ok(path)
}

fn load_truth(cfg: &RunConfig) -> Result<SpeedField> {
    let truth = match cfg.input()? {
        InputSource::Field(p) => io::read_field(&p)?,
        InputSource::Trajectories(p) => aggregate_trajectories(&io::read_trajectories(&p)?, &cfg.grid()?)?.field,
        InputSource::Ngsim { path, lane } => aggregate_trajectories(&io::read_ngsim(&path, lane)?, &cfg.grid()?)?.field,
    };
    truth.ensure_dense("ground truth")?;
    Ok(truth)
}

fn detector_layout(cfg: &RunConfig, grid: &GridSpec) -> Result<ObservationMask> {
    let rows = match &cfg.detector_rows {
        Some(rows) => rows.clone(),
        None => equally_spaced_detectors(grid, cfg.detectors.unwrap_or(4))?,
    };
    let mask = detector_mask(grid, &rows)?;
    if mask.is_empty() {
        return Err(Error::Config("no detector rows".into()));
    }
    Ok(mask)
}

#[derive(Debug, Clone)]
pub struct EstimateOutput {
    pub dir: PathBuf,
    pub method: Method,
    pub relative_error: f64,
}

/// Writes `estimate.txt`, `mask.txt`, `weights_<i>.txt`, `report.tsv`, and on request
/// `trace.tsv` and `truth.ppm`/`observed.ppm`/`estimate.ppm`.
///
/// If ADMM diverges the trace is still written before the error is returned.
pub fn cmd_estimate(cfg: &RunConfig) -> Result<EstimateOutput> {
    let est_cfg = cfg.estimation()?;
    let method = cfg.method();
    let truth = load_truth(cfg)?;
    let mask = detector_layout(cfg, truth.grid())?;
    let observed = apply_mask(&truth, &mask)?;
    let dir = prepare_out(cfg)?;

    let est = match estimate(&observed, &mask, method, &est_cfg) {
        Ok(est) => est,
        Err(Error::Divergence { iter, trace }) => {
            io::write_text(&dir.join("trace.tsv"), &io::trace_table(&trace).to_tsv())?;
            return Err(Error::Divergence { iter, trace });
        }
        Err(e) => return Err(e),
    };

    io::write_field(&dir.join("estimate.txt"), &est.field)?;
    io::write_mask(&dir.join("mask.txt"), &mask)?;
    for (i, w) in est.weights.iter().enumerate() {
        io::write_text(&dir.join(format!("weights_{}.txt", i + 1)), &io::format_grid_matrix(truth.grid(), w))?;
    }

    let report = evaluate(&est.field, &truth, est_cfg.asm.v_thr)?;
    let mut table = Table::new(["key", "value"]);
    let mut kv = |k: &str, v: String| table.push([k.to_string(), v]);
    kv("method", method.to_string());
    kv(
        "wave_speeds",
        est_cfg.wave_speeds.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(","),
    );
    kv("detector_rows", mask.observed_rows().iter().map(|r| r.to_string()).collect::<Vec<_>>().join(","));
    kv("coverage", mask.coverage().to_string());
    kv("sigma", est.kernel.sigma.to_string());
    kv("tau", est.kernel.tau.to_string());
    kv("relative_error", report.relative_error.to_string());
    for (region, err) in &report.per_region_errors {
        kv(&format!("relative_error_{region}"), err.to_string());
    }
    kv("cells", report.cell_count.to_string());
    kv("negative_speed_cells", report.negative_speed_cells.to_string());
    if let Some(res) = &est.admm {
        kv("converged", res.converged.to_string());
        kv("iterations", res.iters.to_string());
        kv("objective", res.objective.to_string());
        kv("r_primal", res.final_residuals.0.to_string());
        kv("r_dual", res.final_residuals.1.to_string());
        kv("sum_violation_rms", res.weights.sum_violation_rms().to_string());
    }
    io::write_text(&dir.join("report.tsv"), &table.to_tsv())?;

    if cfg.trace.unwrap_or(false) {
        if let Some(res) = &est.admm {
            io::write_text(&dir.join("trace.tsv"), &io::trace_table(&res.trace).to_tsv())?;
        }
    }
    if cfg.heatmap.unwrap_or(false) {
        let v_max = cfg.v_max();
        write_ppm(&dir.join("truth.ppm"), truth.values(), v_max)?;
        write_ppm(&dir.join("observed.ppm"), observed.values(), v_max)?;
        write_ppm(&dir.join("estimate.ppm"), est.field.values(), v_max)?;
    }
    debug_assert_eq!(relative_error(&est.field, &truth)?, report.relative_error);
    Ok(EstimateOutput {
        dir,
        method,
        relative_error: report.relative_error,
    })
}

/// `coverage.tsv`: `method detectors coverage relative_error`.
pub fn cmd_sweep_coverage(cfg: &RunConfig, methods: &[Method]) -> Result<Table> {
    let counts = cfg.counts.clone().unwrap_or_else(|| (1..=7).collect());
    if counts.is_empty() {
        return Err(Error::Config("`counts` must not be empty".into()));
    }
    let est_cfg = cfg.estimation()?;
    let truth = load_truth(cfg)?;
    for &c in &counts {
        equally_spaced_detectors(truth.grid(), c)?;
    }
    let dir = prepare_out(cfg)?;
    let mut table = Table::new(["method", "detectors", "coverage", "relative_error"]);
    for &method in methods {
        for p in coverage_sweep(&truth, &counts, method, &est_cfg)? {
            table.push([
                method.to_string(),
                p.detectors.to_string(),
                p.coverage.to_string(),
                p.relative_error.to_string(),
            ]);
        }
    }
    io::write_text(&dir.join("coverage.tsv"), &table.to_tsv())?;
    Ok(table)
}

/// `wavespeeds.tsv`: `pairs m wave_speeds relative_error objective converged iterations`.
pub fn cmd_sweep_wavespeeds(cfg: &RunConfig) -> Result<Table> {
    let pairs = cfg.pairs.clone().unwrap_or_else(|| vec![(-15.0, 80.0)]);
    if pairs.is_empty() {
        return Err(Error::Config("`pairs` must not be empty".into()));
    }
    if pairs.iter().any(|&(c, f)| c == 0.0 || f == 0.0) {
        return Err(Error::Config("`pairs` must not contain zero wave speeds".into()));
    }
    let est_cfg = cfg.estimation()?;
    let truth = load_truth(cfg)?;
    let mask = detector_layout(cfg, truth.grid())?;
    let dir = prepare_out(cfg)?;
    let mut table = Table::new([
        "pairs",
        "m",
        "wave_speeds",
        "relative_error",
        "objective",
        "converged",
        "iterations",
    ]);
    for p in wavespeed_sweep(&truth, &mask, &pairs, &est_cfg)? {
        table.push([
            p.pairs.to_string(),
            p.wave_speeds.len().to_string(),
            p.wave_speeds.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(","),
            p.relative_error.to_string(),
            p.objective.to_string(),
            p.converged.to_string(),
            p.iters.to_string(),
        ]);
    }
    io::write_text(&dir.join("wavespeeds.tsv"), &table.to_tsv())?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_parsing() {
        assert_eq!(parse_pair("-17.5:80").unwrap(), (-17.5, 80.0));
        assert!(parse_pair("-17.5").is_err());
        assert!(parse_pair("a:1").is_err());
    }

    #[test]
    fn cli_parses_lists() {
        let cli = Cli::try_parse_from([
            "asm-tse",
            "sweep-wavespeeds",
            "--pairs",
            "-20:90,-17.5:80",
            "--wave-speeds",
            "80,-15",
        ])
        .unwrap();
        match cli.command {
            Command::SweepWavespeeds(a) => {
                assert_eq!(a.pairs.unwrap(), vec![(-20.0, 90.0), (-17.5, 80.0)]);
                assert_eq!(a.common.wave_speeds.unwrap(), vec![80.0, -15.0]);
            }
            other => panic!("{other:?}"),
        }
        assert!(Cli::try_parse_from(["asm-tse", "estimate", "--detectors", "2", "--detector-rows", "1,2"]).is_err());
    }

    #[test]
    fn empty_counts_is_a_validation_error() {
        let cfg = RunConfig {
            counts: Some(vec![]),
            ..Default::default()
        };
        let err = cmd_sweep_coverage(&cfg, &[Method::Asm]).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }
}
