//! Command-line front end. Every command returns its exit code so the whole
//! surface is testable in-process.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::certify::{certify_layerwise, certify_network, LayerwiseOutcome};
use crate::config::ExperimentConfig;
use crate::engine::{bound_sequences, Iteration, Status};
use crate::error::{Error, Result};
use crate::vi::{existence_flags, monotonicity_check, vi_residual, BlockPoint};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_CERTIFIED: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;
pub const EXIT_MAX_ITER: i32 = 4;
pub const EXIT_VI_RESIDUAL: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "proxnet", version, about = "Averagedness certificates and fixed-point runs for prox-affine networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Where to write the iteration trace CSV.
    #[arg(long, global = true)]
    pub trace: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the stopping tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Overrides the iteration budget.
    #[arg(long = "max-iter", global = true)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the smallest certified averagedness constant.
    Certify {
        /// α grid spacing.
        #[arg(long)]
        alpha_step: Option<f64>,
    },
    /// Run the relaxed fixed-point iteration.
    Run,
    /// Check a block point against the network's variational inequality.
    Vicheck {
        /// One component vector per line.
        #[arg(long)]
        point: PathBuf,
    },
}

/// Parses `args` (including the program name) and dispatches.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = write!(err, "{e}");
            return EXIT_ERROR;
        }
        Err(e) => {
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
    };
    match dispatch(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    let path = cli.config.as_deref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(tol) = cli.tol {
        cfg.stop.tol = Some(tol);
    }
    if let Some(max_iter) = cli.max_iter {
        cfg.stop.max_iter = Some(max_iter);
    }
    match &cli.command {
        Command::Certify { alpha_step } => {
            if let Some(step) = alpha_step {
                cfg.certify.alpha_step = Some(*step);
            }
            cmd_certify(&cfg, out)
        }
        Command::Run => {
            let trace = cli.trace.clone().or_else(|| cfg.output.trace.as_ref().map(|p| cfg.resolve(p)));
            cmd_run(&cfg, trace.as_deref(), out)
        }
        Command::Vicheck { point } => cmd_vicheck(&cfg, point, out),
    }
}

/// Exit 0 when some α is certified, 2 otherwise.
pub fn cmd_certify(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<i32> {
    let net = cfg.network()?;
    let cert = certify_network(&net, cfg.alpha_step())?;
    let mut text = cert.to_string();
    text.push('\n');
    match certify_layerwise(&net, cfg.alpha_step()) {
        Ok(LayerwiseOutcome::Certified(betas)) => {
            let b: Vec<String> = betas.iter().map(|b| b.to_string()).collect();
            text.push_str(&format!("layerwise={}\n", b.join(",")));
        }
        Ok(LayerwiseOutcome::Failed { layer }) => text.push_str(&format!("layerwise=failed layer={layer}\n")),
        Err(_) => text.push_str("layerwise=unavailable\n"),
    }
    out.write_all(text.as_bytes())?;
    if let Some(path) = &cfg.output.certificate {
        fs::write(cfg.resolve(path), &text)?;
    }
    Ok(if cert.alpha.is_some() { EXIT_OK } else { EXIT_NOT_CERTIFIED })
}

/// Writes the trace CSV to `trace` (or to `out` when absent) and exits 0,
/// 3 or 4 for converged, diverged and exhausted runs.
pub fn cmd_run(cfg: &ExperimentConfig, trace: Option<&Path>, out: &mut dyn Write) -> Result<i32> {
    let net = cfg.network()?;
    let x0 = cfg.x0(&net)?;
    let perturbation = cfg.perturbation(&net)?;
    let mut iteration = Iteration::new(&net, cfg.schedule()?, cfg.stop())?;
    if let Some(r) = cfg.reference(&net)? {
        iteration = iteration.with_reference(r)?;
    }
    if let Some(p) = &perturbation {
        iteration = iteration.with_perturbation(p)?;
    }
    let (x, result) = iteration.run(&x0)?;
    match trace {
        Some(path) => {
            let file = fs::File::create(path)?;
            let mut w = std::io::BufWriter::new(file);
            result.write_csv(&mut w)?;
            w.flush()?;
            writeln!(out, "status={}", result.status)?;
            writeln!(out, "iterations={}", result.steps())?;
            if let Some(last) = result.rows.last() {
                writeln!(out, "residual={}", last.residual)?;
            }
            let coords: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            writeln!(out, "x={}", coords.join(" "))?;
            if let Some(p) = &perturbation {
                let b = bound_sequences(&net, p, result.rows.len().max(1))?;
                let last = net.depth() - 1;
                writeln!(out, "tau_sum={}", b.tau.partial_sums[last].last().copied().unwrap_or(0.0))?;
                writeln!(out, "theta_sum={}", b.theta.partial_sums[last].last().copied().unwrap_or(0.0))?;
            }
        }
        None => result.write_csv(&mut *out)?,
    }
    Ok(match result.status {
        Status::Converged => EXIT_OK,
        Status::Diverged => EXIT_DIVERGED,
        Status::MaxIterations => EXIT_MAX_ITER,
    })
}

/// Exit 0 when the largest per-layer residual is within the tolerance,
/// 5 otherwise.
pub fn cmd_vicheck(cfg: &ExperimentConfig, point: &Path, out: &mut dyn Write) -> Result<i32> {
    let net = cfg.network()?;
    let text = fs::read_to_string(point)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", point.display())))?;
    let p = BlockPoint::parse(&text)?;
    let res = vi_residual(&net, &p)?;
    let tol = cfg.stop().tol;
    for (i, r) in res.per_layer.iter().enumerate() {
        writeln!(out, "residual[{}]={r}", i + 1)?;
    }
    writeln!(out, "max_residual={}", res.max)?;
    let mono = monotonicity_check(&net);
    writeln!(out, "monotone={} max_eigenvalue={} margin={}", mono.monotone, mono.max_eigenvalue, mono.margin)?;
    let flags = existence_flags(&net);
    match flags.range_radius {
        Some(r) => writeln!(out, "bounded_range=true range_radius={r}")?,
        None => writeln!(out, "bounded_range=false")?,
    }
    writeln!(out, "some_domain_bounded={}", flags.some_domain_bounded)?;
    writeln!(out, "kernel_condition={} kernel_singular_value={}", flags.kernel_condition, flags.kernel_singular_value)?;
    writeln!(out, "conjugate_condition={}", flags.conjugate_condition)?;
    writeln!(out, "all_domains_bounded={}", flags.all_domains_bounded)?;
    Ok(if res.max <= tol { EXIT_OK } else { EXIT_VI_RESIDUAL })
}
