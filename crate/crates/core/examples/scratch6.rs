// Dev scratch. Not part of the deliverable.
use critheat_core::evolution::{evolve, EvolveControls};
use critheat_core::grid::{make_grid, Grading};
use critheat_core::ground_state::q_field;
use critheat_core::modulation::{track, TrackOptions};
use critheat_core::params::DimensionParams;
use critheat_core::spectral::{EigenOptions, SpectralData};

fn main() {
    let params = DimensionParams::reference();
    let grid = make_grid(params, 200.0, 4096, Grading::Geometric { stretch: 60.0 }).unwrap();
    let t0 = std::time::Instant::now();
    let spec = SpectralData::compute(grid.clone(), 20.0, EigenOptions::default()).unwrap();
    println!("spec: e0={} gradY={} ({:?})", spec.e0, spec.y_grad_l2, t0.elapsed());
    let q = q_field(grid.clone());
    let controls = EvolveControls { t_max: 5.0, sample_dt: 0.1, ..Default::default() };
    let traj = evolve(&q, controls).unwrap();
    let tr = track(&traj, &spec, TrackOptions::default()).unwrap();
    println!("points={} exit={:?}", tr.points.len(), tr.exit_sample);
    for p in tr.points.iter().rev().take(3) {
        println!("t={:.2} s={:.3} lambda={:.10} a={:+.4e} grad_eps={:.3e} eps_l2={:.3e} Heps={:.3e}",
            p.t, p.s, p.lambda, p.a, p.grad_eps_l2, p.eps_l2, p.h_eps_l2);
    }
    println!("total {:?}", t0.elapsed());
}
