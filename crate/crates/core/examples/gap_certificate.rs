//! Spectral gap certificate of the linearization, and what happens when the
//! phase relaxation rate is too small.

use neurofront::front::{solve_front, FrontOptions};
use neurofront::grid::Grid;
use neurofront::linops::{certify_gap, operator_norm_bound};
use neurofront::model::{FiringRate, KernelSpec};
use neurofront::Error;

fn main() -> neurofront::Result<()> {
    let g = Grid::new(40.0, 512)?;
    let p = solve_front(&g, &KernelSpec::gaussian(2.0)?, &FiringRate::new(8.0, 0.4)?, &FrontOptions::default())?;
    let shifts = [-5.0, -2.5, 0.0, 2.5, 5.0];

    let cert = certify_gap(&p, &shifts, 15.0)?;
    println!("kappa* = {:.6}", cert.kappa_star);
    println!("C*     = {:.6} (closed form {:.6})", cert.c_star, cert.c_closed_form.iter().copied().fold(0.0, f64::max));
    println!("margin = {:.3e}", cert.margin);
    println!("|A(t)| <= {:.4}", operator_norm_bound(&p, 15.0));

    match certify_gap(&p, &shifts, 5.0) {
        Err(e @ Error::RelaxationTooSmall { .. }) => println!("m = 5: {e}"),
        other => println!("m = 5: unexpected {other:?}"),
    }
    Ok(())
}
