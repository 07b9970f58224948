//! Meshes, P1 interpolation and the discrete norms.

use std::f64::consts::PI;

use singular_elliptic::grid::{build_interval_mesh, build_square_mesh, p1_interpolate};

fn main() -> singular_elliptic::Result<()> {
    println!("1D: |I_h sin(pi x)|_H1 -> pi/sqrt(2) = {:.8}", PI / 2f64.sqrt());
    for n in [8, 32, 128, 512] {
        let mesh = build_interval_mesh(n)?;
        let u = p1_interpolate(|p| (PI * p[0]).sin(), &mesh, true)?;
        println!("  n = {n:4}  h1 = {:.8}  l2 = {:.8}", u.h1_seminorm(), u.l2_norm());
    }
    let mesh = build_square_mesh(64)?;
    let u = p1_interpolate(|p| (PI * p[0]).sin() * (PI * p[1]).sin(), &mesh, true)?;
    println!(
        "2D: {} vertices, {} triangles, {} interior dofs, h1 = {:.6} (limit pi/sqrt(2) = {:.6})",
        mesh.num_vertices(),
        mesh.num_cells(),
        mesh.num_dofs(),
        u.h1_seminorm(),
        PI / 2f64.sqrt()
    );
    Ok(())
}
