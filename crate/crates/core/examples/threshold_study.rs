//! Energy norm of dist^-s under mesh refinement: finite below the threshold
//! s < (3 - lambda)/2, growing like a power of 1/h above it.

use singular_elliptic::verify::{is_growing, is_mesh_stable, threshold_sequence};

fn main() -> singular_elliptic::Result<()> {
    for (lambda, s) in [(1.0, 0.8), (1.0, 1.2), (0.5, 1.1), (0.5, 1.4)] {
        let seq = threshold_sequence(lambda, s)?;
        println!("lambda = {lambda}, s = {s} (threshold {})", (3.0 - lambda) / 2.0);
        for (k, v) in (6..).zip(&seq) {
            println!("  h = 2^-{k:<2}  norm = {v:.6}");
        }
        println!("  mesh-stable: {}, growing: {}", is_mesh_stable(&seq), is_growing(&seq));
    }
    Ok(())
}
