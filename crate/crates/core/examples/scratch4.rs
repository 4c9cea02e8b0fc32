// Dev scratch. Not part of the deliverable.
use critheat_core::grid::{make_grid, Grading};
use critheat_core::params::DimensionParams;
use critheat_core::spectral::assemble;
use critheat_core::tridiag::largest_eigenpair;

fn main() {
    let params = DimensionParams::reference();
    let grid = make_grid(params, 100.0, 1024, Grading::Geometric { stretch: 30.0 }).unwrap();
    let op = assemble(grid.clone());
    let sym = op.weighted_symmetric();
    let (e0, vec) = largest_eigenpair(&sym, 1e-13, 400).unwrap();
    println!("e0 = {e0}");
    let mut min = (0usize, f64::INFINITY);
    let mut max = (0usize, f64::NEG_INFINITY);
    for (i, &v) in vec.iter().enumerate() {
        let y = v / grid.weights[i].sqrt();
        if y < min.1 { min = (i, y); }
        if y > max.1 { max = (i, y); }
    }
    println!("max y {:?} at r={}", max, grid.nodes[max.0]);
    println!("min y {:?} at r={}", min, grid.nodes[min.0]);
    // print tail profile
    for &i in &[0usize, 1, 2, 512, 900, 1000, 1020, 1022, 1023] {
        println!("i={i} r={:.3} s={:+.3e} y={:+.3e} w={:.3e}", grid.nodes[i], vec[i], vec[i]/grid.weights[i].sqrt(), grid.weights[i]);
    }
}
