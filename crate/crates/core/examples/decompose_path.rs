//! Splits the rescaled fluctuation of one path into its Ornstein-Uhlenbeck
//! part `Z` and the remainder `y`, and checks the pathwise bound on `Z`.

use neurofront::decomp::{decompose, verify_z_bound};
use neurofront::dynamics::{simulate, SimConfig, Storage};
use neurofront::front::{solve_front, FrontOptions};
use neurofront::grid::Grid;
use neurofront::linops::certify_gap;
use neurofront::model::{FiringRate, KernelSpec};
use neurofront::noise::{sample_path, NoiseSpec, PathKey};

fn main() -> neurofront::Result<()> {
    let g = Grid::new(40.0, 512)?;
    let p = solve_front(&g, &KernelSpec::gaussian(2.0)?, &FiringRate::new(8.0, 0.4)?, &FrontOptions::default())?;
    let cert = certify_gap(&p, &[-5.0, 0.0, 5.0], 15.0)?;
    let spec = NoiseSpec::new(&g, 32, 0.1, 2.0)?;
    let path = sample_path(&spec, 5.0, 1e-3, PathKey { base_seed: 3, path: 0 })?;

    for eps in [1e-2, 1e-3, 1e-4] {
        let cfg = SimConfig { t_end: 5.0, dt: 1e-3, epsilon: eps, m: 15.0, v0: None };
        let rec = simulate(&cfg, &p, &spec, &path, Storage::FULL)?;
        let d = decompose(&rec, &path, &spec, &p, &[])?;
        println!(
            "eps = {eps:e}: sup|Z|^2 = {:.4}, sup|y|^2 = {:.3e}, |y_direct - y| <= {:.2e}",
            d.z_sup, d.y_sup, d.consistency_residual
        );
        if eps == 1e-2 {
            let zb = verify_z_bound(&d.norm_z, &cert, &p, &path, 0.25, 0.1)?;
            println!("  sup|Z| = {:.4} <= {:.4} * {:.4}: {}", zb.sup_norm_z, zb.c_bound, zb.xi_hat, zb.bound_ok);
        }
    }
    Ok(())
}
