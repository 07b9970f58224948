//! The energy norm of several measures next to its two-sided surrogate and
//! the interpolation bound mass^lambda * H^-1^(1-lambda).

use singular_elliptic::grid::build_interval_mesh;
use singular_elliptic::measures::{atom_measure, boundary_power_density, density_measure, DEFAULT_ORDER};
use singular_elliptic::potential::{cov_upper_constant, energy_report};
use singular_elliptic::singular::SolverOptions;

fn main() -> singular_elliptic::Result<()> {
    let mesh = build_interval_mesh(1024)?;
    let opts = SolverOptions::default();
    let cases = [
        ("dx", density_measure(&mesh, |_| 1.0, DEFAULT_ORDER)?),
        ("dist^-1/2 dx", boundary_power_density(&mesh, 0.5)?),
        ("dist^-1.1 dx", boundary_power_density(&mesh, 1.1)?),
        ("atom(0.5)", atom_measure(&mesh, 0.5, 1.0)?),
    ];
    println!("{:<14} {:>6} {:>12} {:>12} {:>12} {:>12}", "measure", "lambda", "norm", "cov", "C*norm", "interp");
    for (name, sigma) in &cases {
        for lambda in [0.25, 0.5, 0.75, 1.0] {
            let r = energy_report(sigma, lambda, &opts)?;
            let interp = r
                .mass
                .map_or(f64::INFINITY, |m| m.powf(lambda) * r.h_minus1.powf(1.0 - lambda));
            println!(
                "{name:<14} {lambda:>6.2} {:>12.6} {:>12.6} {:>12.6} {:>12.6}",
                r.trace_norm,
                r.cov_energy,
                cov_upper_constant(lambda) * r.trace_norm,
                interp
            );
        }
    }
    Ok(())
}
