// Dev scratch. Not part of the deliverable.
use critheat_core::evolution::{evolve, EvolveControls};
use critheat_core::grid::{make_grid, Grading};
use critheat_core::ground_state::q_field;
use critheat_core::modulation::{decompose, track, DecomposeOptions, TrackOptions};
use critheat_core::params::DimensionParams;
use critheat_core::spectral::{EigenOptions, SpectralData};

fn main() {
    let params = DimensionParams::reference();
    let grid = make_grid(params, 100.0, 1024, Grading::Geometric { stretch: 30.0 }).unwrap();
    let spec = SpectralData::compute(grid.clone(), 20.0, EigenOptions::default()).unwrap();
    let q = q_field(grid.clone());
    let controls = EvolveControls { t_max: 0.5, sample_dt: 0.05, ..Default::default() };
    let traj = evolve(&q, controls).unwrap();
    println!("samples: {}", traj.samples.len());
    for k in 0..traj.samples.len().min(3) {
        let f = traj.field_at(k).unwrap();
        match decompose(&f, &spec, (1.0, 0.0), DecomposeOptions::default()) {
            Ok(d) => println!("k={k} t={:.3} lambda={:.6} a={:+.3e} iters={}", traj.samples[k].t, d.lambda, d.a, d.newton_iters),
            Err(e) => println!("k={k} t={:.3} FAILED: {e}", traj.samples[k].t),
        }
    }
    let tr = track(&traj, &spec, TrackOptions::default()).unwrap();
    println!("track points {} exit {:?}", tr.points.len(), tr.exit_sample);
    for p in &tr.points {
        println!("  t={:.3} s={:.3} lambda={:.8} a={:+.3e} grad_eps={:.3e} eps_l2={:.3e}", p.t, p.s, p.lambda, p.a, p.grad_eps_l2, p.eps_l2);
    }
    for k in 3..traj.samples.len().min(5) {
        let f = traj.field_at(k).unwrap();
        match decompose(&f, &spec, (1.0, 0.0), DecomposeOptions::default()) {
            Ok(d) => println!("k={k} t={:.3} lambda={:.6} a={:+.3e} iters={}", traj.samples[k].t, d.lambda, d.a, d.newton_iters),
            Err(e) => println!("k={k} t={:.3} FAILED: {e}", traj.samples[k].t),
        }
    }
    // plateau error scaling
    for safety in [0.02, 0.01, 0.005] {
        let init = critheat_core::RadialField::from_fn(grid.clone(), |_| 1.0);
        let c = EvolveControls { diffusion: false, t_max: 2.0, dt_init: 1e-5, safety, ..Default::default() };
        let t = evolve(&init, c).unwrap();
        let mut worst: f64 = 0.0;
        for s in &t.samples {
            if s.t > 0.0 && s.sup < 1e3 {
                let exact = 1.0 / (1.0 - s.t);
                worst = worst.max(((s.sup - exact) / exact).abs());
            }
        }
        let rep = critheat_core::evolution::detect_blowup(&t, Default::default()).unwrap();
        println!("safety={safety}: worst rel err (sup<1e3) = {worst:.3e}, T_est={:.8}, rate mean={:.6} min={:.6} max={:.6}",
            rep.t_est, rep.rate_tail_mean, rep.rate_tail_min, rep.rate_tail_max);
    }
}
