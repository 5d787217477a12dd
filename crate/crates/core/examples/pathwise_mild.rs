//! The OU component three ways: Euler in time, the pathwise mild formula
//! through the evolution family, and (for A = -I) the exact scalar OU
//! recursion per noise mode.

use neurofront::decomp::{integrate_z, ou_decay_oracle, pathwise_mild_z, pure_decay_variant};
use neurofront::dynamics::{simulate, SimConfig, Storage};
use neurofront::front::{solve_front, FrontOptions};
use neurofront::grid::{norm, Grid};
use neurofront::model::{FiringRate, KernelSpec};
use neurofront::noise::{sample_path, NoiseSpec, PathKey};

fn diff(a: &[f64], b: &[f64], dx: f64) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d, dx)
}

fn main() -> neurofront::Result<()> {
    let g = Grid::new(40.0, 512)?;
    let dx = g.dx();
    let p = solve_front(&g, &KernelSpec::gaussian(2.0)?, &FiringRate::new(8.0, 0.4)?, &FrontOptions::default())?;
    let spec = NoiseSpec::new(&g, 32, 0.1, 2.0)?;
    let (dt, m) = (1e-3, 15.0);
    let path = sample_path(&spec, 2.0, dt, PathKey { base_seed: 11, path: 0 })?;
    let rec = simulate(&SimConfig { t_end: 2.0, dt, epsilon: 1e-3, m, v0: None }, &p, &spec, &path, Storage::NONE)?;
    let traj = rec.trajectory();

    let checkpoints = [0.5, 1.0, 2.0];
    let mild = pathwise_mild_z(&path, &spec, &traj, &p, m, &checkpoints)?;
    let euler = integrate_z(&path, &spec, &traj, &p, m, 1)?;
    for (t, z) in checkpoints.iter().zip(&mild) {
        let e = euler.at((t / dt).round() as usize);
        println!("t = {t}: |Z_mild| = {:.5}, |Z_mild - Z_euler| = {:.2e}", norm(&z.values, dx), diff(&z.values, e, dx));
    }

    let (mild, euler) = pure_decay_variant(&p, &spec, &path, &checkpoints)?;
    let exact = ou_decay_oracle(&spec, &path, &checkpoints)?;
    for i in 0..checkpoints.len() {
        println!(
            "A = -I, t = {}: mild {:.2e}, euler {:.2e} from the exact recursion",
            checkpoints[i],
            diff(&mild[i], &exact[i], dx),
            diff(&euler[i], &exact[i], dx)
        );
    }
    Ok(())
}
