//! Green potentials and H^-1 norms of a density and a point mass.

use singular_elliptic::grid::build_interval_mesh;
use singular_elliptic::measures::{atom_measure, density_measure, DEFAULT_ORDER};
use singular_elliptic::potential::{green_potential, h_minus1_norm};

fn main() -> singular_elliptic::Result<()> {
    let mesh = build_interval_mesh(64)?;
    let dx = density_measure(&mesh, |_| 1.0, DEFAULT_ORDER)?;
    let atom = atom_measure(&mesh, 0.5, 1.0)?;
    let u = green_potential(&dx)?;
    let g = green_potential(&atom)?;
    println!("x        G[dx]       x(1-x)/2    G[delta_1/2]");
    for i in (0..=64).step_by(8) {
        let x = i as f64 / 64.0;
        println!("{x:.4}   {:.8}  {:.8}  {:.8}", u.values()[i], x * (1.0 - x) / 2.0, g.values()[i]);
    }
    println!("H^-1 norm of dx     = {:.8} (exact 1/sqrt(12) = {:.8})", h_minus1_norm(&dx)?, (1.0f64 / 12.0).sqrt());
    println!("H^-1 norm of atom   = {:.8} (exact 1/2)", h_minus1_norm(&atom)?);
    Ok(())
}
