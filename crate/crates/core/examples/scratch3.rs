// Dev scratch. Not part of the deliverable.
use critheat_core::evolution::{evolve, EvolveControls};
use critheat_core::field::grad_sq;
use critheat_core::grid::{make_grid, Grading};
use critheat_core::ground_state::q_field;
use critheat_core::params::DimensionParams;
use critheat_core::modulation::{decompose, DecomposeOptions};
use critheat_core::spectral::{SpectralData, EigenOptions};

fn main() {
    let params = DimensionParams::reference();
    // Reference stationarity drift at t=5, Dirichlet wall.
    let grid = make_grid(params, 200.0, 4096, Grading::Geometric { stretch: 60.0 }).unwrap();
    let q = q_field(grid.clone());
    let controls = EvolveControls { t_max: 5.0, ..Default::default() };
    let t0 = std::time::Instant::now();
    let traj = evolve(&q, controls).unwrap();
    let last = traj.field_at(traj.samples.len() - 1).unwrap();
    let diff = last.axpy(-1.0, &q).unwrap();
    println!("drift(t=5) = {:.4e}  steps={} time={:?}",
        grad_sq(&diff).sqrt() / grad_sq(&q).sqrt(), traj.steps, t0.elapsed());

    // Decompose mystery on the small grid.
    let sgrid = make_grid(params, 100.0, 1024, Grading::Geometric { stretch: 30.0 }).unwrap();
    let spec = SpectralData::compute(sgrid.clone(), 20.0, EigenOptions::default()).unwrap();
    let k = 1.05;
    let u = critheat_core::ground_state::rescaled_q(sgrid.clone(), k).unwrap();
    match decompose(&u, &spec, (1.0, 0.0), DecomposeOptions::default()) {
        Ok(d) => println!("rescaled decompose: lambda={} a={} grad_eps={:.3e} iters={}",
            d.lambda, d.a, grad_sq(&d.eps).sqrt(), d.newton_iters),
        Err(e) => println!("rescaled decompose failed: {e}"),
    }
}
