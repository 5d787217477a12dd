//! Pathwise stability checks: the comparison ODE, the good-path events and
//! the stopping time, plus the Monte Carlo driver over an ε grid.
//!
//! Squared sups follow the record conventions: `Z = sup‖Z_t‖²` and
//! `y_sup = sup‖y_t‖²`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomp::{decompose, verify_z_bound, DecompositionRecord};
use crate::dynamics::{simulate, SimConfig, Storage};
use crate::error::{Error, Result};
use crate::front::WaveProfile;
use crate::linops::SpectralGapCert;
use crate::noise::{sample_path, NoiseSpec, PathKey};

/// Constants entering the pathwise estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityInputs {
    pub kappa_star: f64,
    pub c_r: f64,
    pub epsilon: f64,
    pub q: f64,
    pub t_end: f64,
}

impl StabilityInputs {
    /// Requires `√ε < κ*/(4c_R)` and `q ∈ (0, 1/2)`.
    pub fn new(kappa_star: f64, c_r: f64, epsilon: f64, q: f64, t_end: f64) -> Result<Self> {
        if !(q > 0.0 && q < 0.5) {
            return Err(Error::Config(format!("sim.q must lie in (0, 1/2), got {q}")));
        }
        if !(epsilon > 0.0) {
            return Err(Error::Config(format!("ε must be positive, got {epsilon}")));
        }
        if !(epsilon.sqrt() < kappa_star / (4.0 * c_r)) {
            return Err(Error::Assumption(format!(
                "√ε = {:.4} is not below κ*/(4c_R) = {:.4}",
                epsilon.sqrt(),
                kappa_star / (4.0 * c_r)
            )));
        }
        Ok(Self { kappa_star, c_r, epsilon, q, t_end })
    }
}

/// `κ*/(8 c_R √ε)`
pub fn omega_threshold(kappa: f64, c_r: f64, eps: f64) -> f64 {
    kappa / (8.0 * c_r * eps.sqrt())
}

/// Membership in `Ω_ε`: `Z < κ*/(8 c_R √ε)`.
pub fn omega_eps(z_sup: f64, kappa: f64, c_r: f64, eps: f64) -> bool {
    z_sup < omega_threshold(kappa, c_r, eps)
}

/// `√(-Δ)` with `Δ = 16εZ² - κ²`, or an error outside `Δ < 0`.
fn root_minus_delta(kappa: f64, eps: f64, z: f64) -> Result<f64> {
    let delta = 16.0 * eps * z * z - kappa * kappa;
    if !(delta < 0.0) {
        return Err(Error::Domain(format!("comparison ODE outside its regime: Δ = {delta:.6e} ≥ 0")));
    }
    Ok((-delta).sqrt())
}

/// Closed-form solution of `ġ = -κg + 2√εZ² + 2√εg²`, `g(0) = 0`.
///
/// With `s = √(-Δ)` and `M = (κ+s)/(κ-s)`,
/// `g(t) = (κ+s)(1 - e^{-st}) / (4√ε(M - e^{-st}))`.
pub fn comparison_solution(kappa: f64, eps: f64, z: f64, t: f64) -> Result<f64> {
    let s = root_minus_delta(kappa, eps, z)?;
    if z == 0.0 {
        return Ok(0.0);
    }
    // κ - s without cancellation
    let km = 16.0 * eps * z * z / (kappa + s);
    let big_m = (kappa + s) / km;
    let e = (-s * t).exp();
    Ok((kappa + s) * (1.0 - e) / (4.0 * eps.sqrt() * (big_m - e)))
}

/// The comparison solution for a general remainder constant, by `h = c_R·g`.
pub fn comparison_solution_scaled(kappa: f64, c_r: f64, eps: f64, z: f64, t: f64) -> Result<f64> {
    Ok(comparison_solution(kappa, eps, c_r * z, t)? / c_r)
}

/// The majorant `f(t) = (κ-s)M / (4√ε(M - e^{-st}))` and its value at 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonBound {
    pub sqrt_minus_delta: f64,
    pub big_m: f64,
    /// `(κ - s)/(4√ε)`
    pub i: f64,
    /// `M/(M - 1)`
    pub ii: f64,
    pub f0: f64,
    pub in_omega: bool,
    /// `f(0) ≤ 3Z/2`
    pub bound_ok: bool,
}

/// Evaluates `f(0) = I·II` for `c_R = 1`.
pub fn comparison_bound(kappa: f64, eps: f64, z: f64) -> Result<ComparisonBound> {
    let s = root_minus_delta(kappa, eps, z)?;
    let km = 16.0 * eps * z * z / (kappa + s);
    let i = km / (4.0 * eps.sqrt());
    let ii = (kappa + s) / (2.0 * s);
    let f0 = i * ii;
    Ok(ComparisonBound {
        sqrt_minus_delta: s,
        big_m: if z == 0.0 { f64::INFINITY } else { (kappa + s) / km },
        i,
        ii,
        f0,
        in_omega: omega_eps(z, kappa, 1.0, eps),
        bound_ok: f0 <= 1.5 * z,
    })
}

/// `f(t)` for `c_R = 1`.
pub fn comparison_majorant(kappa: f64, eps: f64, z: f64, t: f64) -> Result<f64> {
    let s = root_minus_delta(kappa, eps, z)?;
    if z == 0.0 {
        return Ok(0.0);
    }
    let km = 16.0 * eps * z * z / (kappa + s);
    let big_m = (kappa + s) / km;
    Ok(km * big_m / (4.0 * eps.sqrt() * (big_m - (-s * t).exp())))
}

/// Outcome of the uniform bound on `y` along one path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropYCheck {
    pub in_omega: bool,
    /// `Z` within 5 % of the `Ω_ε` threshold
    pub marginal: bool,
    /// `y_sup ≤ 1.5·Z·(1 + tol)`; vacuous off `Ω_ε`
    pub bound_ok: bool,
    pub chain_samples: usize,
    pub chain_holds: usize,
}

/// Relative tolerance on pathwise bound checks.
pub const BOUND_TOL: f64 = 0.05;

/// Checks `sup‖y‖² ≤ 3Z/2` on `Ω_ε` and the differential inequality
/// `½ d/dt‖y‖² ≤ -κ*‖y‖² + 2c_R√ε‖y‖(‖Z‖² + ‖y‖²)` at every interior step,
/// with the derivative of the directly integrated `y` by centered differences.
pub fn check_prop_y(d: &DecompositionRecord, inputs: &StabilityInputs) -> PropYCheck {
    let thr = omega_threshold(inputs.kappa_star, inputs.c_r, inputs.epsilon);
    let in_omega = d.z_sup < thr;
    let bound_ok = !in_omega || d.y_sup <= 1.5 * d.z_sup * (1.0 + BOUND_TOL);
    let y = &d.norm_y_direct;
    let z = &d.norm_z;
    let se = inputs.epsilon.sqrt();
    let mut holds = 0;
    let samples = y.len().saturating_sub(2);
    for n in 1..y.len().saturating_sub(1) {
        let lhs = (y[n + 1] * y[n + 1] - y[n - 1] * y[n - 1]) / (4.0 * d.dt);
        let yn = y[n];
        let rhs = -inputs.kappa_star * yn * yn + 2.0 * inputs.c_r * se * yn * (z[n] * z[n] + yn * yn);
        if lhs <= rhs {
            holds += 1;
        }
    }
    PropYCheck {
        in_omega,
        marginal: (d.z_sup - thr).abs() <= 0.05 * thr,
        bound_ok,
        chain_samples: samples,
        chain_holds: holds,
    }
}

/// First grid time at which the left-rectangle sum `Σ dt‖ṽ^ε‖²` exceeds
/// `ε^{-q}`, capped at `T`; returned with its step index.
pub fn stopping_time_tau(norm_tilde_v_eps: &[f64], eps: f64, q: f64, dt: f64) -> (f64, usize) {
    let threshold = eps.powf(-q);
    let last = norm_tilde_v_eps.len().saturating_sub(1);
    let mut acc = 0.0;
    for k in 1..=last {
        let v = norm_tilde_v_eps[k - 1];
        acc += dt * v * v;
        if acc > threshold {
            return (k as f64 * dt, k);
        }
    }
    (last as f64 * dt, last)
}

/// `Ω*`: both `Z` and `y_sup` at most `ε^{-q}/(4T)`. On `Ω*` the stopping
/// time must equal `T`; a violation is an internal inconsistency.
pub fn check_omega_star(z_sup: f64, y_sup: f64, eps: f64, q: f64, t_end: f64, tau_full: bool) -> Result<bool> {
    let thr = eps.powf(-q) / (4.0 * t_end);
    let inside = z_sup <= thr && y_sup <= thr;
    if inside && !tau_full {
        return Err(Error::Consistency(format!(
            "path in Ω* (Z = {z_sup:.6e}, y = {y_sup:.6e}, threshold {thr:.6e}) stopped before T"
        )));
    }
    Ok(inside)
}

/// Ensemble settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub epsilons: Vec<f64>,
    pub n_paths: usize,
    pub base_seed: u64,
    pub t_end: f64,
    pub dt: f64,
    pub m: f64,
    pub q: f64,
    pub eta: f64,
    /// worker count; 0 uses the ambient pool
    pub threads: usize,
}

/// Per-path outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRow {
    pub path: u64,
    pub diverged: bool,
    pub z_sup: f64,
    pub y_sup: f64,
    pub in_omega_eps: bool,
    pub omega_marginal: bool,
    pub bound_ok: bool,
    pub chain_samples: usize,
    pub chain_holds: usize,
    pub tau: f64,
    pub tau_full: bool,
    pub sup_y_before_tau: f64,
    pub order_bound_ok: bool,
    pub omega_star: bool,
    pub omega_star_violation: bool,
    pub z_bound_ok: bool,
    pub z_bound_marginal: bool,
    pub consistency_residual: f64,
}

/// Aggregates at one ε.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSummary {
    pub epsilon: f64,
    pub omega_threshold: f64,
    pub n_paths: usize,
    pub diverged: usize,
    pub p_omega: Option<f64>,
    pub p_tau_full: Option<f64>,
    pub p_omega_star: Option<f64>,
    pub median_sup_y_before_tau: Option<f64>,
    pub prop_y_violations: usize,
    pub omega_marginal: usize,
    pub chain_fraction: Option<f64>,
    pub order_violations: usize,
    pub omega_star_violations: usize,
    pub z_bound_violations: usize,
    pub z_bound_violations_not_marginal: usize,
    pub max_consistency_residual: f64,
    pub rows: Vec<PathRow>,
}

/// Ensemble report across the ε grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub kappa_star: f64,
    pub c_star: f64,
    pub c_r: f64,
    pub m: f64,
    pub q: f64,
    pub eta: f64,
    pub t_end: f64,
    pub dt: f64,
    pub base_seed: u64,
    pub noise_trace: f64,
    pub per_epsilon: Vec<EpsilonSummary>,
    /// least-squares slope of `log median sup_{t≤τ}‖y‖` against `log ε`
    pub order_slope: Option<f64>,
}

fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Runs one path at one ε and evaluates every pathwise check.
pub fn run_path(
    p: &WaveProfile,
    cert: &SpectralGapCert,
    spec: &NoiseSpec,
    inputs: &StabilityInputs,
    cfg: &McConfig,
    path_index: u64,
) -> Result<(PathRow, DecompositionRecord)> {
    let key = PathKey { base_seed: cfg.base_seed, path: path_index };
    let path = sample_path(spec, cfg.t_end, cfg.dt, key)?;
    let sim = SimConfig { t_end: cfg.t_end, dt: cfg.dt, epsilon: inputs.epsilon, m: cfg.m, v0: None };
    let rec = simulate(&sim, p, spec, &path, Storage::FULL)?;
    let d = decompose(&rec, &path, spec, p, &[])?;
    let py = check_prop_y(&d, inputs);
    let (tau, k) = stopping_time_tau(&rec.norm_tilde_v_eps, inputs.epsilon, inputs.q, cfg.dt);
    let last = rec.n_steps;
    let tau_full = k == last && {
        let thr = inputs.epsilon.powf(-inputs.q);
        let total: f64 = rec.norm_tilde_v_eps[..last].iter().map(|v| cfg.dt * v * v).sum();
        total <= thr
    };
    let sup_y_before_tau = d.norm_y[..=k].iter().copied().fold(0.0, f64::max);
    let order_bound = inputs.c_r * inputs.epsilon.powf(0.5 - inputs.q) * (1.0 + BOUND_TOL);
    let (omega_star, omega_star_violation) =
        match check_omega_star(d.z_sup, d.y_sup, inputs.epsilon, inputs.q, cfg.t_end, tau_full) {
            Ok(b) => (b, false),
            Err(Error::Consistency(_)) => (true, true),
            Err(e) => return Err(e),
        };
    let zb = verify_z_bound(&d.norm_z, cert, p, &path, cfg.eta, 0.1)?;
    let row = PathRow {
        path: path_index,
        diverged: false,
        z_sup: d.z_sup,
        y_sup: d.y_sup,
        in_omega_eps: py.in_omega,
        omega_marginal: py.marginal,
        bound_ok: py.bound_ok,
        chain_samples: py.chain_samples,
        chain_holds: py.chain_holds,
        tau,
        tau_full,
        sup_y_before_tau,
        order_bound_ok: !tau_full || sup_y_before_tau <= order_bound,
        omega_star,
        omega_star_violation,
        z_bound_ok: zb.bound_ok,
        z_bound_marginal: zb.marginal,
        consistency_residual: d.consistency_residual,
    };
    Ok((row, d))
}

fn diverged_row(path: u64) -> PathRow {
    PathRow {
        path,
        diverged: true,
        z_sup: f64::NAN,
        y_sup: f64::NAN,
        in_omega_eps: false,
        omega_marginal: false,
        bound_ok: true,
        chain_samples: 0,
        chain_holds: 0,
        tau: f64::NAN,
        tau_full: false,
        sup_y_before_tau: f64::NAN,
        order_bound_ok: true,
        omega_star: false,
        omega_star_violation: false,
        z_bound_ok: true,
        z_bound_marginal: false,
        consistency_residual: f64::NAN,
    }
}

fn summarize(epsilon: f64, thr: f64, rows: Vec<PathRow>) -> EpsilonSummary {
    let ok: Vec<&PathRow> = rows.iter().filter(|r| !r.diverged).collect();
    let n = ok.len();
    let frac = |pred: &dyn Fn(&PathRow) -> bool| (n > 0).then(|| ok.iter().filter(|r| pred(r)).count() as f64 / n as f64);
    let count = |pred: &dyn Fn(&PathRow) -> bool| ok.iter().filter(|r| pred(r)).count();
    let mut sups: Vec<f64> = ok.iter().map(|r| r.sup_y_before_tau).collect();
    let samples: usize = ok.iter().map(|r| r.chain_samples).sum();
    let holds: usize = ok.iter().map(|r| r.chain_holds).sum();
    EpsilonSummary {
        epsilon,
        omega_threshold: thr,
        n_paths: rows.len(),
        diverged: rows.len() - n,
        p_omega: frac(&|r| r.in_omega_eps),
        p_tau_full: frac(&|r| r.tau_full),
        p_omega_star: frac(&|r| r.omega_star),
        median_sup_y_before_tau: median(&mut sups),
        prop_y_violations: count(&|r| r.in_omega_eps && !r.bound_ok),
        omega_marginal: count(&|r| r.omega_marginal),
        chain_fraction: (samples > 0).then(|| holds as f64 / samples as f64),
        order_violations: count(&|r| !r.order_bound_ok),
        omega_star_violations: count(&|r| r.omega_star_violation),
        z_bound_violations: count(&|r| !r.z_bound_ok),
        z_bound_violations_not_marginal: count(&|r| !r.z_bound_ok && !r.z_bound_marginal),
        max_consistency_residual: ok.iter().map(|r| r.consistency_residual).fold(0.0, f64::max),
        rows,
    }
}

/// Runs `n_paths` seeded paths for every ε, with the same seeds across ε.
///
/// Paths run concurrently; rows are merged by path index so the report does
/// not depend on the worker count. Diverged paths are kept as flagged rows
/// and excluded from the aggregates.
pub fn monte_carlo_stability(
    p: &WaveProfile,
    cert: &SpectralGapCert,
    spec: &NoiseSpec,
    c_r: f64,
    cfg: &McConfig,
) -> Result<StabilityReport> {
    let inputs: Vec<StabilityInputs> = cfg
        .epsilons
        .iter()
        .map(|&e| StabilityInputs::new(cert.kappa_star, c_r, e, cfg.q, cfg.t_end))
        .collect::<Result<_>>()?;
    let work = || -> Result<Vec<EpsilonSummary>> {
        inputs
            .iter()
            .map(|inp| {
                let rows: Vec<PathRow> = (0..cfg.n_paths as u64)
                    .into_par_iter()
                    .map(|i| match run_path(p, cert, spec, inp, cfg, i) {
                        Ok((row, _)) => Ok(row),
                        Err(Error::Divergence { .. }) => Ok(diverged_row(i)),
                        Err(e) => Err(e),
                    })
                    .collect::<Result<_>>()?;
                Ok(summarize(inp.epsilon, omega_threshold(cert.kappa_star, c_r, inp.epsilon), rows))
            })
            .collect()
    };
    let per_epsilon = if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?
            .install(work)?
    } else {
        work()?
    };
    let (xs, ys): (Vec<f64>, Vec<f64>) = per_epsilon
        .iter()
        .filter_map(|s| s.median_sup_y_before_tau.filter(|m| *m > 0.0).map(|m| (s.epsilon.ln(), m.ln())))
        .unzip();
    Ok(StabilityReport {
        kappa_star: cert.kappa_star,
        c_star: cert.c_star,
        c_r,
        m: cfg.m,
        q: cfg.q,
        eta: cfg.eta,
        t_end: cfg.t_end,
        dt: cfg.dt,
        base_seed: cfg.base_seed,
        noise_trace: spec.trace(),
        per_epsilon,
        order_slope: fit_slope(&xs, &ys),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn rk4_oracle(kappa: f64, eps: f64, z: f64, t_end: f64, h: f64) -> Vec<(f64, f64)> {
        let se = eps.sqrt();
        let rhs = |g: f64| -kappa * g + 2.0 * se * z * z + 2.0 * se * g * g;
        let steps = (t_end / h).round() as usize;
        let mut g = 0.0;
        let mut out = vec![(0.0, 0.0)];
        for n in 0..steps {
            let k1 = rhs(g);
            let k2 = rhs(g + 0.5 * h * k1);
            let k3 = rhs(g + 0.5 * h * k2);
            let k4 = rhs(g + h * k3);
            g += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            out.push(((n + 1) as f64 * h, g));
        }
        out
    }

    #[test]
    fn threshold_examples() {
        assert!(omega_eps(0.0, 1.0, 1.0, 1e-4));
        assert_relative_eq!(omega_threshold(1.0, 1.0, 1e-4), 12.5, epsilon = 1e-12);
        assert!(omega_threshold(0.5, 1.2, 1e-4) > omega_threshold(0.5, 1.2, 1e-3));
    }

    #[test]
    fn closed_form_arithmetic() {
        let b = comparison_bound(1.0, 0.01, 1.0).unwrap();
        assert_relative_eq!(b.sqrt_minus_delta, 0.9165151390, epsilon = 1e-10);
        assert_relative_eq!(b.big_m, 1.9165151390 / 0.0834848610, epsilon = 1e-8);
        assert!((b.big_m - 22.956439237).abs() < 1e-8);
        assert_eq!(comparison_solution(1.0, 0.01, 1.0, 0.0).unwrap(), 0.0);
        assert!(comparison_solution(1.0, 0.25, 1.0, 1.0).is_err());
    }

    #[test]
    fn closed_form_matches_rk4() {
        for &(k, e, z) in &[(1.0, 0.01, 1.0), (0.5, 1e-4, 3.0), (2.0, 0.1, 0.4)] {
            for (t, g) in rk4_oracle(k, e, z, 10.0, 1e-3).into_iter().step_by(250) {
                assert!((comparison_solution(k, e, z, t).unwrap() - g).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn scaled_solution_solves_general_ode() {
        let (k, c, e, z) = (0.8, 1.7, 1e-3f64, 2.0);
        let se = e.sqrt();
        let rhs = |g: f64| -k * g + 2.0 * c * se * z * z + 2.0 * c * se * g * g;
        let h = 1e-3;
        let mut g = 0.0;
        for n in 0..5000 {
            let k1 = rhs(g);
            let k2 = rhs(g + 0.5 * h * k1);
            let k3 = rhs(g + 0.5 * h * k2);
            let k4 = rhs(g + h * k3);
            g += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if (n + 1) % 1000 == 0 {
                let t = (n + 1) as f64 * h;
                assert!((comparison_solution_scaled(k, c, e, z, t).unwrap() - g).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn majorant_examples() {
        let b = comparison_bound(1.0, 1e-4, 1.0).unwrap();
        assert!(b.i <= 1.0 && b.ii <= 1.5 && b.bound_ok);
        assert_relative_eq!(b.f0, comparison_majorant(1.0, 1e-4, 1.0, 0.0).unwrap(), max_relative = 1e-12);
        let f: Vec<f64> = [0.0, 1.0, 5.0].iter().map(|&t| comparison_majorant(1.0, 1e-2, 2.0, t).unwrap()).collect();
        assert!(f[0] > f[1] && f[1] > f[2]);
        let tiny = comparison_bound(1.0, 1e-4, 1e-9).unwrap();
        assert!(tiny.f0 < 1e-8);
    }

    #[test]
    fn stopping_time_examples() {
        assert_eq!(stopping_time_tau(&[0.0; 11], 1e-3, 0.05, 0.5), (5.0, 10));
        let v = vec![1.0; 101];
        let (t1, _) = stopping_time_tau(&v, 1e-2, 0.01, 0.1);
        let (t2, _) = stopping_time_tau(&v, 1e-2, 0.2, 0.1);
        assert!(t1 <= t2);
        // 0.1·k > 10^{0.5} first at k = 32
        assert_eq!(stopping_time_tau(&v, 1e-2, 0.25, 0.1).1, 32);
        assert!(check_omega_star(0.0, 0.0, 1e-3, 0.05, 5.0, true).unwrap());
        assert!(matches!(check_omega_star(0.0, 0.0, 1e-3, 0.05, 5.0, false), Err(Error::Consistency(_))));
    }

    #[test]
    fn empty_summary() {
        let s = summarize(1e-3, 1.0, Vec::new());
        assert_eq!(s.p_omega, None);
        assert_eq!(s.median_sup_y_before_tau, None);
        assert_eq!(fit_slope(&[], &[]), None);
        assert_relative_eq!(fit_slope(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap(), 2.0);
    }

    proptest! {
        #[test]
        fn majorant_bounded_on_omega(k in 0.05f64..3.0, le in -8.0f64..-0.5, frac in 0.0f64..0.999) {
            let e = 10f64.powf(le);
            let z = frac * omega_threshold(k, 1.0, e);
            let b = comparison_bound(k, e, z).unwrap();
            prop_assert!(b.in_omega);
            prop_assert!(b.i <= z * (1.0 + 1e-12) && b.ii <= 1.5);
            prop_assert!(b.f0 <= 1.5 * z * (1.0 + 1e-12));
            let g = comparison_solution(k, e, z, 3.0).unwrap();
            prop_assert!(g <= b.f0 * (1.0 + 1e-12));
        }

        #[test]
        fn omega_nested_in_eps(z in 0.0f64..100.0, k in 0.05f64..3.0, c in 0.1f64..5.0, e in 1e-6f64..1e-1) {
            if omega_eps(z, k, c, e) {
                prop_assert!(omega_eps(z, k, c, e / 10.0));
            }
        }
    }
}
