//! Travelling and stationary fronts of the sigmoid model.
//!
//! ```text
//! cargo run --release --example front_profile
//! ```

use neurofront::front::{solve_front, FrontOptions};
use neurofront::grid::Grid;
use neurofront::model::{FiringRate, KernelSpec};

fn main() -> neurofront::Result<()> {
    let g = Grid::new(40.0, 1024)?;
    let k = KernelSpec::gaussian(2.0)?;
    for theta in [0.4, 0.5] {
        let f = FiringRate::new(8.0, theta)?;
        let p = solve_front(&g, &k, &f, &FrontOptions::default())?;
        println!(
            "theta = {theta}: c = {:+.10}, residual = {:.2e}, |u_x|^2 = {:.6}, {} iterations",
            p.speed, p.residual_norm, p.norm_ux_sq, p.iterations
        );
        // the profile crosses 1/2 near the origin after pinning
        let mid = p.u_hat.values.iter().position(|&u| u > 0.5).unwrap_or(0);
        println!("  u_hat crosses 1/2 at x = {:.4}", g.x(mid));
    }
    Ok(())
}
