//! Subcommand drivers and the end-to-end pipeline.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::RunConfig;
use crate::decomp::{decompose, verify_z_bound, ZBoundCert};
use crate::dynamics::{simulate, PathRecord, SimConfig, Storage};
use crate::error::{Error, Result};
use crate::front::{solve_front, WaveProfile};
use crate::linops::{certify_gap, SpectralGapCert};
use crate::model::remainder_constant;
use crate::noise::{sample_path, NoisePath, NoiseSpec, PathKey};
use crate::output::{file_digest, sha256_hex, write_csv, write_json, write_series, Cell};
use crate::stability::{monte_carlo_stability, McConfig, StabilityReport};

/// Worker cap from `NEUROFRONT_THREADS` (0 when unset or invalid).
pub fn threads_from_env() -> usize {
    std::env::var("NEUROFRONT_THREADS").ok().and_then(|v| v.trim().parse().ok()).unwrap_or(0)
}

/// Front sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontSummary {
    pub c: f64,
    pub residual_norm: f64,
    pub norm_ux_sq: f64,
    pub iterations: usize,
    pub stationary: bool,
}

/// Solves the front for the configured model.
pub fn build_front(cfg: &RunConfig) -> Result<WaveProfile> {
    let g = cfg.grid()?;
    solve_front(&g, &cfg.kernel()?, &cfg.firing()?, &cfg.front_options())
}

/// Front and certificate; refuses to continue without a gap.
pub fn build_certified(cfg: &RunConfig) -> Result<(WaveProfile, SpectralGapCert)> {
    let p = build_front(cfg)?;
    let cert = certify_gap(&p, &cfg.gap.shifts, cfg.sim.m)?;
    Ok((p, cert))
}

fn sidecar(out: &Path) -> PathBuf {
    out.with_extension("json")
}

fn with_suffix(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    out.with_file_name(format!("{stem}{suffix}"))
}

fn ensure_parent(out: &Path) -> Result<()> {
    if let Some(dir) = out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    Ok(())
}

/// `front`: writes `x, û, û_x` and a JSON sidecar.
pub fn cmd_front(cfg: &RunConfig, out: &Path) -> Result<(FrontSummary, Vec<PathBuf>)> {
    let p = build_front(cfg)?;
    ensure_parent(out)?;
    let g = &p.grid;
    let header = format!(
        "# left_asymptote={:.16e} right_asymptote={:.16e}\nx",
        p.u_hat.left, p.u_hat.right
    );
    write_csv(
        out,
        &[header.as_str(), "u_hat", "u_hat_x"],
        (0..g.n()).map(|i| vec![Cell::F(g.x(i)), Cell::F(p.u_hat.values[i]), Cell::F(p.u_hat_x.values[i])]),
    )?;
    let summary = FrontSummary {
        c: p.speed,
        residual_norm: p.residual_norm,
        norm_ux_sq: p.norm_ux_sq,
        iterations: p.iterations,
        stationary: p.is_stationary(cfg.front.c_zero_tol),
    };
    let side = sidecar(out);
    write_json(&side, &summary)?;
    Ok((summary, vec![out.to_path_buf(), side]))
}

/// `gap`: the certificate.
pub fn cmd_gap(cfg: &RunConfig) -> Result<SpectralGapCert> {
    Ok(build_certified(cfg)?.1)
}

fn epsilon_or_default(cfg: &RunConfig, epsilon: Option<f64>) -> Result<f64> {
    match epsilon {
        Some(e) if e > 0.0 && e < 1.0 => Ok(e),
        Some(e) => Err(Error::Config(format!("--epsilon must lie in (0, 1), got {e}"))),
        None => Ok(cfg.sim.epsilon[0]),
    }
}

fn run_one(
    cfg: &RunConfig,
    p: &WaveProfile,
    spec: &NoiseSpec,
    seed: u64,
    epsilon: f64,
    storage: Storage,
) -> Result<(NoisePath, PathRecord)> {
    let key = PathKey { base_seed: cfg.mc.base_seed, path: seed };
    let path = sample_path(spec, cfg.sim.t_end, cfg.sim.dt, key)?;
    let sim = SimConfig { t_end: cfg.sim.t_end, dt: cfg.sim.dt, epsilon, m: cfg.sim.m, v0: None };
    let rec = simulate(&sim, p, spec, &path, storage)?;
    Ok((path, rec))
}

/// Simulation sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub seed: u64,
    pub base_seed: u64,
    pub epsilon: f64,
    pub speed: f64,
    pub final_phase: f64,
    pub max_norm_v: f64,
    pub reconstruction_defect: f64,
}

/// `simulate`: one path of the coupled system. Path `seed` of the ensemble
/// keyed by `mc.base_seed`.
pub fn cmd_simulate(cfg: &RunConfig, seed: u64, epsilon: Option<f64>, out: &Path) -> Result<(SimSummary, Vec<PathBuf>)> {
    let eps = epsilon_or_default(cfg, epsilon)?;
    let (p, _cert) = build_certified(cfg)?;
    let spec = cfg.noise_spec(&p.grid)?;
    let stride = cfg.output.snapshot_stride;
    let storage = Storage { stride, keep_v: false };
    let (_, rec) = run_one(cfg, &p, &spec, seed, eps, storage)?;
    ensure_parent(out)?;
    write_series(
        out,
        rec.dt,
        &["C", "norm_v", "norm_tilde_v", "norm_tilde_v_eps"],
        &[&rec.phase, &rec.norm_v, &rec.norm_tilde_v, &rec.norm_tilde_v_eps],
    )?;
    let mut files = vec![out.to_path_buf()];
    if stride > 0 {
        let snap = with_suffix(out, "_snapshots.csv");
        let g = &p.grid;
        write_csv(
            &snap,
            &["t", "x", "tilde_v_eps"],
            (0..rec.snapshot_count()).flat_map(|j| {
                let t = (j * stride) as f64 * rec.dt;
                let row = rec.tilde_v_eps_at(j);
                (0..g.n()).map(move |i| vec![Cell::F(t), Cell::F(g.x(i)), Cell::F(row[i])]).collect::<Vec<_>>()
            }),
        )?;
        files.push(snap);
    }
    let summary = SimSummary {
        seed,
        base_seed: cfg.mc.base_seed,
        epsilon: eps,
        speed: rec.speed,
        final_phase: *rec.phase.last().unwrap_or(&0.0),
        max_norm_v: rec.norm_v.iter().copied().fold(0.0, f64::max),
        reconstruction_defect: rec.reconstruction_defect,
    };
    let side = sidecar(out);
    write_json(&side, &summary)?;
    files.push(side);
    Ok((summary, files))
}

/// Decomposition sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompSummary {
    pub seed: u64,
    pub epsilon: f64,
    #[serde(rename = "Z_sup")]
    pub z_sup: f64,
    pub y_sup: f64,
    pub consistency_residual: f64,
    pub z_bound: ZBoundCert,
}

/// `decompose`: `Z`, `y` and the consistency residual along one path.
pub fn cmd_decompose(cfg: &RunConfig, seed: u64, epsilon: Option<f64>, out: &Path) -> Result<(DecompSummary, Vec<PathBuf>)> {
    let eps = epsilon_or_default(cfg, epsilon)?;
    let (p, cert) = build_certified(cfg)?;
    let spec = cfg.noise_spec(&p.grid)?;
    let (path, rec) = run_one(cfg, &p, &spec, seed, eps, Storage::FULL)?;
    let d = decompose(&rec, &path, &spec, &p, &[])?;
    ensure_parent(out)?;
    write_series(
        out,
        d.dt,
        &["norm_Z", "norm_y", "norm_y_direct_minus_y"],
        &[&d.norm_z, &d.norm_y, &d.residual],
    )?;
    let summary = DecompSummary {
        seed,
        epsilon: eps,
        z_sup: d.z_sup,
        y_sup: d.y_sup,
        consistency_residual: d.consistency_residual,
        z_bound: verify_z_bound(&d.norm_z, &cert, &p, &path, cfg.noise.eta, 0.1)?,
    };
    let side = sidecar(out);
    write_json(&side, &summary)?;
    Ok((summary, vec![out.to_path_buf(), side]))
}

/// Ensemble settings from the configuration.
pub fn mc_config(cfg: &RunConfig, threads: usize) -> McConfig {
    McConfig {
        epsilons: cfg.sim.epsilon.clone(),
        n_paths: cfg.mc.n_paths,
        base_seed: cfg.mc.base_seed,
        t_end: cfg.sim.t_end,
        dt: cfg.sim.dt,
        m: cfg.sim.m,
        q: cfg.sim.q,
        eta: cfg.noise.eta,
        threads,
    }
}

/// Runs the ensemble for a certified front.
pub fn run_stability(cfg: &RunConfig, p: &WaveProfile, cert: &SpectralGapCert, threads: usize) -> Result<StabilityReport> {
    let spec = cfg.noise_spec(&p.grid)?;
    let c_r = remainder_constant(&p.model.kernel, &p.model.firing).refined;
    monte_carlo_stability(p, cert, &spec, c_r, &mc_config(cfg, threads))
}

/// Writes the report and one CSV of per-path rows per ε.
pub fn write_stability(report: &StabilityReport, out: &Path) -> Result<Vec<PathBuf>> {
    ensure_parent(out)?;
    write_json(out, report)?;
    let mut files = vec![out.to_path_buf()];
    for (i, s) in report.per_epsilon.iter().enumerate() {
        let csv = with_suffix(out, &format!("_eps{i}.csv"));
        write_csv(
            &csv,
            &[
                "seed",
                "epsilon",
                "Z_sup",
                "y_sup",
                "in_omega_eps",
                "bound_ok",
                "tau",
                "tau_full",
                "sup_y_before_tau",
                "omega_star",
                "z_bound_ok",
                "diverged",
            ],
            s.rows.iter().map(|r| {
                vec![
                    Cell::I(r.path),
                    Cell::F(s.epsilon),
                    Cell::F(r.z_sup),
                    Cell::F(r.y_sup),
                    Cell::B(r.in_omega_eps),
                    Cell::B(r.bound_ok),
                    Cell::F(r.tau),
                    Cell::B(r.tau_full),
                    Cell::F(r.sup_y_before_tau),
                    Cell::B(r.omega_star),
                    Cell::B(r.z_bound_ok),
                    Cell::B(r.diverged),
                ]
            }),
        )?;
        files.push(csv);
    }
    Ok(files)
}

/// `stability`: the Monte Carlo report.
pub fn cmd_stability(cfg: &RunConfig, out: &Path, threads: usize) -> Result<(StabilityReport, Vec<PathBuf>)> {
    let (p, cert) = build_certified(cfg)?;
    let report = run_stability(cfg, &p, &cert, threads)?;
    let files = write_stability(&report, out)?;
    Ok((report, files))
}

/// One output file with its digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
}

/// Record of a pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_sha256: String,
    pub config: RunConfig,
    pub front: FrontSummary,
    pub gap_certificate: SpectralGapCert,
    pub outputs: BTreeMap<String, Vec<OutputFile>>,
    /// wall-clock seconds per stage
    pub timings: BTreeMap<String, f64>,
}

impl RunManifest {
    /// Digests of all outputs, without timings.
    pub fn digests(&self) -> Vec<(String, String)> {
        self.outputs.values().flatten().map(|o| (o.file.clone(), o.sha256.clone())).collect()
    }
}

fn describe(dir: &Path, files: &[PathBuf]) -> Result<Vec<OutputFile>> {
    files
        .iter()
        .map(|f| {
            Ok(OutputFile {
                file: f.strip_prefix(dir).unwrap_or(f).display().to_string(),
                sha256: file_digest(f)?,
            })
        })
        .collect()
}

/// front → gap → ensemble over ε → report, all under `dir`. Stops after the
/// gap stage when the certificate fails.
pub fn run_pipeline(cfg: &RunConfig, dir: &Path, threads: usize) -> Result<RunManifest> {
    std::fs::create_dir_all(dir)?;
    let mut timings = BTreeMap::new();
    let mut outputs = BTreeMap::new();

    let t = Instant::now();
    let (front, files) = cmd_front(cfg, &dir.join("front.csv"))?;
    timings.insert("front".to_string(), t.elapsed().as_secs_f64());
    outputs.insert("front".to_string(), describe(dir, &files)?);

    let t = Instant::now();
    let p = build_front(cfg)?;
    let cert = certify_gap(&p, &cfg.gap.shifts, cfg.sim.m)?;
    let gap_file = dir.join("gap.json");
    write_json(&gap_file, &cert)?;
    timings.insert("gap".to_string(), t.elapsed().as_secs_f64());
    outputs.insert("gap".to_string(), describe(dir, &[gap_file])?);

    let t = Instant::now();
    let report = run_stability(cfg, &p, &cert, threads)?;
    let files = write_stability(&report, &dir.join("stability.json"))?;
    timings.insert("stability".to_string(), t.elapsed().as_secs_f64());
    outputs.insert("stability".to_string(), describe(dir, &files)?);

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: sha256_hex(cfg.canonical_json().as_bytes()),
        config: cfg.clone(),
        front,
        gap_certificate: cert,
        outputs,
        timings,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}
