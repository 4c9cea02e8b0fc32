// Dev scratch. Not part of the deliverable.
use critheat_core::evolution::{evolve, EvolveControls};
use critheat_core::field::{grad_sq, norm, NormKind};
use critheat_core::grid::{make_grid, Grading};
use critheat_core::ground_state::{discrete_ground_state, q_field};
use critheat_core::modulation::{track, TrackOptions};
use critheat_core::params::DimensionParams;
use critheat_core::spectral::{EigenOptions, SpectralData};

fn main() {
    let params = DimensionParams::reference();
    let grid = make_grid(params, 200.0, 4096, Grading::Geometric { stretch: 60.0 }).unwrap();
    let t0 = std::time::Instant::now();
    let qh = discrete_ground_state(grid.clone(), 1e-11, 40).unwrap();
    let q = q_field(grid.clone());
    let diff = qh.axpy(-1.0, &q).unwrap();
    println!("|Qh-Q|_2={:.3e} |grad(Qh-Q)|={:.3e} rel={:.3e} ({:?})",
        norm(&diff, NormKind::L2).unwrap(), grad_sq(&diff).sqrt(),
        grad_sq(&diff).sqrt() / grad_sq(&q).sqrt(), t0.elapsed());
    let spec = SpectralData::compute(grid.clone(), 20.0, EigenOptions::default()).unwrap();
    let controls = EvolveControls { t_max: 10.0, sample_dt: 0.2, ..Default::default() };
    let traj = evolve(&qh, controls).unwrap();
    let tr = track(&traj, &spec, TrackOptions::default()).unwrap();
    let last = tr.points.last().unwrap();
    println!("Qh run t=10: a={:+.3e} lambda-1={:+.3e} grad_eps={:.3e}", last.a, last.lambda - 1.0, last.grad_eps_l2);
    // implied bias: a(t) = B(e^{e0 t}-1)/e0-ish
    let e0 = spec.e0;
    let bias = last.a * e0 / ((e0 * last.s).exp() - 1.0);
    println!("implied bias f ~ {:.3e} (f/e0 = {:.3e})", bias, bias / e0);
}
