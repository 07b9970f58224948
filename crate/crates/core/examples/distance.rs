//! The distance d_lambda between measures: homogeneity, symmetry and the
//! oscillating family whose distance to dx does not vanish.

use singular_elliptic::grid::build_interval_mesh;
use singular_elliptic::homogenization::{perturbed_measure_family, PerturbationKind};
use singular_elliptic::measures::{atom_measure, density_measure, add, DEFAULT_ORDER};
use singular_elliptic::potential::d_lambda;

fn main() -> singular_elliptic::Result<()> {
    let mesh = build_interval_mesh(1024)?;
    let dx = density_measure(&mesh, |_| 1.0, DEFAULT_ORDER)?;
    let two = density_measure(&mesh, |_| 2.0, DEFAULT_ORDER)?;
    let with_atom = add(&dx, &atom_measure(&mesh, 0.3, 0.5)?)?;
    for lambda in [0.0, 0.5, 1.0] {
        println!(
            "lambda = {lambda}: d(dx, 2dx) = {:.6}, d(dx, dx + atom/2) = {:.6}",
            d_lambda(&dx, &two, lambda)?,
            d_lambda(&dx, &with_atom, lambda)?
        );
    }
    let eps = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    let decaying = perturbed_measure_family(&dx, PerturbationKind::Decaying, &eps)?;
    let oscillating = perturbed_measure_family(&dx, PerturbationKind::Oscillating, &eps)?;
    println!("eps       d_1 decaying   d_1 oscillating (2/pi = {:.6})", 2.0 / std::f64::consts::PI);
    for e in eps {
        println!(
            "{e:<9} {:.6e}   {:.6}",
            d_lambda(&dx, decaying.member(e).unwrap(), 1.0)?,
            d_lambda(&dx, oscillating.member(e).unwrap(), 1.0)?
        );
    }
    Ok(())
}
