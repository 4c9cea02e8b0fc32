// Dev scratch: step diagnostics. Not part of the deliverable.
use critheat_core::evolution::{evolve, EvolveControls};
use critheat_core::field::grad_sq;
use critheat_core::grid::{make_grid, Grading};
use critheat_core::ground_state::q_field;
use critheat_core::params::DimensionParams;
use critheat_core::spectral::assemble_laplacian;

fn main() {
    let params = DimensionParams::reference();
    let grid = make_grid(params, 100.0, 1024, Grading::Geometric { stretch: 30.0 }).unwrap();
    let q = q_field(grid.clone());

    // Residual of Q under the discrete operator with the Dirichlet wall.
    let lap = assemble_laplacian(grid.clone());
    let mut qz = q.clone();
    let n = grid.len();
    qz.values[n - 1] = 0.0;
    let lq = lap.apply(&qz).unwrap();
    let mut worst = (0usize, 0.0f64);
    let mut res_norm_sq = 0.0;
    for i in 0..n {
        let res = lq.values[i] + qz.values[i] * qz.values[i];
        res_norm_sq += grid.weights[i] * res * res;
        if res.abs() > worst.1 {
            worst = (i, res.abs());
        }
    }
    println!(
        "residual: ||.||={:.3e} worst |res|={:.3e} at i={} r={:.3}",
        res_norm_sq.sqrt(),
        worst.1,
        worst.0,
        grid.nodes[worst.0]
    );

    let controls = EvolveControls {
        t_max: 1e-3,
        dt_init: 1e-3,
        ..Default::default()
    };
    let traj = evolve(&qz, controls).unwrap();
    let last = traj.field_at(traj.samples.len() - 1).unwrap();
    let diff = last.axpy(-1.0, &qz).unwrap();
    let mut worst = (0usize, 0.0f64);
    for i in 0..n {
        if diff.values[i].abs() > worst.1 {
            worst = (i, diff.values[i].abs());
        }
    }
    println!(
        "one-step: drift_h1_rel={:.3e}, worst |du|={:.3e} at i={} r={:.4}, samples={}",
        grad_sq(&diff).sqrt() / grad_sq(&qz).sqrt(),
        worst.1,
        worst.0,
        grid.nodes[worst.0],
        traj.samples.len()
    );
    println!("t_end={} steps={}", traj.final_sample().t, traj.steps);
}
