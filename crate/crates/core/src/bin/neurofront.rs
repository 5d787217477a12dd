use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use neurofront::config::RunConfig;
use neurofront::output::{to_json, write_json};
use neurofront::pipeline::{self, threads_from_env};
use neurofront::{Error, Result};

/// Stochastic neural field fronts.
///
/// Any config key can be overridden with `--section.key value`,
/// e.g. `--sim.dt 5e-4` or `--mc.n_paths 50`.
#[derive(Parser)]
#[command(name = "neurofront", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; defaults are used for missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct PathArgs {
    #[command(flatten)]
    common: Common,
    /// Path index within the ensemble keyed by mc.base_seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Noise intensity; defaults to the first entry of sim.epsilon.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Travelling front: profile CSV and JSON sidecar.
    Front {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spectral gap certificate as JSON (stdout unless --out).
    Gap {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One path of the SPDE with phase adaptation.
    Simulate(PathArgs),
    /// Ornstein-Uhlenbeck decomposition of one path.
    Decompose(PathArgs),
    /// Monte Carlo stability report over the epsilon grid.
    Stability {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// front, gap and stability into one directory, with a manifest.
    Pipeline {
        #[command(flatten)]
        common: Common,
        /// Output directory; defaults to output.directory.
        #[arg(long)]
        dir: Option<PathBuf>,
    },
}

/// Pulls `--section.key value` and `--section.key=value` out of argv.
fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Vec<(String, String)>)> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let key = match a.strip_prefix("--") {
            Some(k) if k.split('=').next().is_some_and(|k| k.contains('.')) => k.to_string(),
            _ => {
                rest.push(a);
                continue;
            }
        };
        match key.split_once('=') {
            Some((k, v)) => overrides.push((k.to_string(), v.to_string())),
            None => match it.next() {
                Some(v) => overrides.push((key, v)),
                None => return Err(Error::Config(format!("override --{key} needs a value"))),
            },
        }
    }
    Ok((rest, overrides))
}

fn load(common: &Common, overrides: &[(String, String)]) -> Result<RunConfig> {
    match &common.config {
        Some(path) => RunConfig::load(path, overrides),
        None => RunConfig::from_toml_str("", overrides),
    }
}

fn out_or(cfg: &RunConfig, out: Option<PathBuf>, name: &str) -> PathBuf {
    out.unwrap_or_else(|| cfg.output.directory.join(name))
}

fn report_files(files: &[PathBuf]) {
    for f in files {
        eprintln!("wrote {}", f.display());
    }
}

fn run(cmd: Cmd, overrides: &[(String, String)]) -> Result<()> {
    let threads = threads_from_env();
    match cmd {
        Cmd::Front { common, out } => {
            let cfg = load(&common, overrides)?;
            let (s, files) = pipeline::cmd_front(&cfg, &out_or(&cfg, out, "front.csv"))?;
            report_files(&files);
            eprintln!("c = {:.12e}, residual = {:.3e}", s.c, s.residual_norm);
        }
        Cmd::Gap { common, out } => {
            let cfg = load(&common, overrides)?;
            let cert = pipeline::cmd_gap(&cfg)?;
            match out {
                Some(path) => {
                    write_json(&path, &cert)?;
                    report_files(&[path]);
                }
                None => print!("{}", to_json(&cert)?),
            }
        }
        Cmd::Simulate(a) => {
            let cfg = load(&a.common, overrides)?;
            let out = out_or(&cfg, a.out, &format!("path_{}.csv", a.seed));
            let (_, files) = pipeline::cmd_simulate(&cfg, a.seed, a.epsilon, &out)?;
            report_files(&files);
        }
        Cmd::Decompose(a) => {
            let cfg = load(&a.common, overrides)?;
            let out = out_or(&cfg, a.out, &format!("decomp_{}.csv", a.seed));
            let (_, files) = pipeline::cmd_decompose(&cfg, a.seed, a.epsilon, &out)?;
            report_files(&files);
        }
        Cmd::Stability { common, out } => {
            let cfg = load(&common, overrides)?;
            let (_, files) = pipeline::cmd_stability(&cfg, &out_or(&cfg, out, "report.json"), threads)?;
            report_files(&files);
        }
        Cmd::Pipeline { common, dir } => {
            let cfg = load(&common, overrides)?;
            let dir = dir.unwrap_or_else(|| cfg.output.directory.clone());
            pipeline::run_pipeline(&cfg, &dir, threads)?;
            report_files(&[Path::new(&dir).join("manifest.json")]);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let (args, overrides) = match split_overrides(std::env::args().collect()) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("neurofront: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.cmd, &overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("neurofront: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
