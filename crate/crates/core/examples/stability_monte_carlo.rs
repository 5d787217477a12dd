//! A small Monte Carlo stability ensemble over three noise levels.
//!
//! ```text
//! NEUROFRONT_THREADS=4 cargo run --release --example stability_monte_carlo -- 32
//! ```

use neurofront::config::RunConfig;
use neurofront::pipeline::{build_certified, run_stability, threads_from_env};

fn main() -> neurofront::Result<()> {
    let n_paths = std::env::args().nth(1).unwrap_or_else(|| "16".into());
    let cfg = RunConfig::from_toml_str(
        "[sim]\nt_end = 2.0\n",
        &[("mc.n_paths".to_string(), n_paths)],
    )?;
    let (p, cert) = build_certified(&cfg)?;
    let report = run_stability(&cfg, &p, &cert, threads_from_env())?;

    println!("kappa* = {:.4}, c_R = {:.4}, tr Q = {:.4}", report.kappa_star, report.c_r, report.noise_trace);
    println!("{:>8} {:>8} {:>8} {:>10} {:>6}", "eps", "P[Omega]", "P[tau=T]", "median y", "viol");
    for s in &report.per_epsilon {
        println!(
            "{:>8.0e} {:>8.3} {:>8.3} {:>10.3e} {:>6}",
            s.epsilon,
            s.p_omega.unwrap_or(f64::NAN),
            s.p_tau_full.unwrap_or(f64::NAN),
            s.median_sup_y_before_tau.unwrap_or(f64::NAN),
            s.prop_y_violations + s.order_violations + s.omega_star_violations
        );
    }
    if let Some(slope) = report.order_slope {
        println!("order slope = {slope:.3}");
    }
    Ok(())
}
