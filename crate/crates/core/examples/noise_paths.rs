//! Q-Wiener paths: reproducible seeding, coarsening and the Hölder seminorm.

use neurofront::grid::{norm, Grid};
use neurofront::noise::{holder_norm, sample_path, NoiseSpec, PathKey};

fn main() -> neurofront::Result<()> {
    let g = Grid::new(40.0, 512)?;
    let spec = NoiseSpec::new(&g, 32, 0.1, 2.0)?;
    println!("tr Q = {:.6}", spec.trace());

    let mut w = vec![0.0; g.n()];
    for path in 0..4 {
        let key = PathKey { base_seed: 7, path };
        let fine = sample_path(&spec, 5.0, 1e-3, key)?;
        let again = sample_path(&spec, 5.0, 1e-3, key)?;
        assert_eq!(fine.increments, again.increments);
        spec.synthesize_into(fine.value(fine.n_steps), &mut w);
        let coarse = fine.coarsen(10)?;
        println!(
            "path {path}: |W_T| = {:.4}, xi(eta=0.25) = {:.4} fine, {:.4} coarse",
            norm(&w, g.dx()),
            holder_norm(&fine, 0.25)?,
            holder_norm(&coarse, 0.25)?
        );
    }
    Ok(())
}
