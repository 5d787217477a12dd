//! The Riccati comparison ODE: closed form against RK4, and the majorant on
//! and off the small-noise set.

use neurofront::stability::{comparison_bound, comparison_solution, omega_threshold};

fn rk4(kappa: f64, eps: f64, z: f64, t_end: f64) -> f64 {
    let rhs = |g: f64| -kappa * g + 2.0 * eps.sqrt() * (z * z + g * g);
    let n = 20_000;
    let h = t_end / n as f64;
    let mut g = 0.0;
    for _ in 0..n {
        let k1 = rhs(g);
        let k2 = rhs(g + 0.5 * h * k1);
        let k3 = rhs(g + 0.5 * h * k2);
        let k4 = rhs(g + h * k3);
        g += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    g
}

fn main() -> neurofront::Result<()> {
    let (kappa, eps) = (0.5, 1e-3);
    let z_max = omega_threshold(kappa, 1.0, eps);
    println!("Omega_eps: Z < {z_max:.4}");
    for z in [0.1, 0.5, 0.9 * z_max, 1.5 * z_max] {
        let closed = comparison_solution(kappa, eps, z, 3.0);
        let b = comparison_bound(kappa, eps, z)?;
        match closed {
            Ok(g) => println!(
                "Z = {z:.4}: g(3) = {g:.10}, rk4 = {:.10}, f(0) = {:.4} <= 1.5 Z: {}",
                rk4(kappa, eps, z, 3.0),
                b.f0,
                b.bound_ok
            ),
            Err(e) => println!("Z = {z:.4}: {e}"),
        }
    }
    Ok(())
}
