//! One path of the stochastic neural field with phase adaptation, written to
//! CSV.
//!
//! ```text
//! cargo run --release --example simulate_path -- out.csv
//! ```

use neurofront::dynamics::{dt_max, simulate, SimConfig, Storage};
use neurofront::front::{solve_front, FrontOptions};
use neurofront::grid::Grid;
use neurofront::model::{FiringRate, KernelSpec};
use neurofront::noise::{sample_path, NoiseSpec, PathKey};
use neurofront::output::write_series;

fn main() -> neurofront::Result<()> {
    let out = std::env::args().nth(1);
    let g = Grid::new(40.0, 512)?;
    let p = solve_front(&g, &KernelSpec::gaussian(2.0)?, &FiringRate::new(8.0, 0.4)?, &FrontOptions::default())?;
    let spec = NoiseSpec::new(&g, 32, 0.1, 2.0)?;
    let m = 15.0;
    println!("stable step size for m = {m}: dt < {:.4}", dt_max(&p, m));

    let path = sample_path(&spec, 5.0, 1e-3, PathKey { base_seed: 1, path: 0 })?;
    for eps in [1e-2, 1e-4] {
        let cfg = SimConfig { t_end: 5.0, dt: 1e-3, epsilon: eps, m, v0: None };
        let rec = simulate(&cfg, &p, &spec, &path, Storage::NONE)?;
        let sup_v = rec.norm_v.iter().copied().fold(0.0, f64::max);
        println!(
            "eps = {eps:e}: C(T) = {:+.5}, sup |v| = {:.4e}, sup |v|/sqrt(eps) = {:.4}",
            rec.phase[rec.n_steps],
            sup_v,
            sup_v / eps.sqrt()
        );
        if let (Some(out), true) = (&out, eps == 1e-2) {
            write_series(out.as_ref(), rec.dt, &["C", "norm_v"], &[&rec.phase, &rec.norm_v])?;
            println!("wrote {out}");
        }
    }
    Ok(())
}
