//! Laminate homogenization: u_eps for A = a(x/eps) with a decaying load
//! family against the homogenized solution with A0 = harmonic mean.

use singular_elliptic::grid::build_interval_mesh;
use singular_elliptic::homogenization::{
    fit_effective_coefficient, perturbed_measure_family, run_h_convergence, Axis, OscillatingFamily, PerturbationKind,
    Profile,
};
use singular_elliptic::measures::{density_measure, DEFAULT_ORDER};
use singular_elliptic::singular::SolverOptions;

fn main() -> singular_elliptic::Result<()> {
    let mesh = build_interval_mesh(4096)?;
    let opts = SolverOptions::default();
    let profile = Profile::parse("2 + sin(2*pi*y)")?;
    let dx = density_measure(&mesh, |_| 1.0, DEFAULT_ORDER)?;
    println!("harmonic mean {:.8}, sqrt(3) = {:.8}", profile.harmonic_mean(), 3f64.sqrt());
    println!("fitted A0 at eps = 1/64: {:.8}", fit_effective_coefficient(&profile, 1.0 / 64.0, &dx, &opts)?);

    let family = OscillatingFamily::new(profile, Axis::X, vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0])?;
    for kind in [PerturbationKind::Decaying, PerturbationKind::Oscillating] {
        let measures = perturbed_measure_family(&dx, kind, &family.epsilons)?;
        let table = run_h_convergence(&family, &measures, 0.5, 4, &opts)?;
        println!("\nfamily {kind:?}");
        print!("{}", table.to_csv());
        println!("fitted rates: l2_err {:?}, d_lambda {:?}", table.rate("l2_err"), table.rate("d_lambda"));
    }
    Ok(())
}
