// Dev scratch: empirical constants. Not part of the deliverable.
use critheat_core::field::{grad_sq, inner_product, norm, NormKind};
use critheat_core::grid::{make_grid, refine_double, Grading};
use critheat_core::ground_state::lambda_q;
use critheat_core::params::DimensionParams;
use critheat_core::spectral::{
    assemble, ground_eigenpair, shooting_ground_eigenvalue, EigenOptions, SpectralData,
};

fn main() {
    let params = DimensionParams::reference();
    let t0 = std::time::Instant::now();
    for npts in [4096usize, 16384, 65536] {
        let grid = make_grid(params, 200.0, npts, Grading::Geometric { stretch: 60.0 }).unwrap();
        let op = assemble(grid.clone());
        let (e0, y) = ground_eigenpair(&op, EigenOptions::default()).unwrap();
        let hy = op.apply(&y).unwrap();
        let res = norm(&hy.axpy(-e0, &y).unwrap(), NormKind::L2).unwrap();
        println!(
            "N={npts:6} e0={e0:.12} resid={res:.3e} y(0)={:.6} t={:?}",
            y.values[0],
            t0.elapsed()
        );
    }
    let grid = make_grid(params, 200.0, 65536, Grading::Geometric { stretch: 60.0 }).unwrap();
    let fine = refine_double(&grid);
    let op = assemble(fine.clone());
    let (e0f, _) = ground_eigenpair(&op, EigenOptions::default()).unwrap();
    println!("N=131071 e0={e0f:.12}");

    let t1 = std::time::Instant::now();
    let e_shoot = shooting_ground_eigenvalue(params, 60.0, 2e-4, (0.02, 5.0)).unwrap();
    println!("shooting e0 = {e_shoot:.12}  ({:?})", t1.elapsed());

    let spec = SpectralData::compute(grid.clone(), 20.0, EigenOptions::default()).unwrap();
    println!(
        "e0={} grad_y={} (LamQ,Psi0)={} |psi0|={} resid={:.3e}",
        spec.e0, spec.y_grad_l2, spec.lambda_q_psi0, spec.psi0_l2, spec.eigen_residual
    );
    let lam = lambda_q(grid.clone());
    println!(
        "||LamQ||_2={} ||LamQ||_H1={}",
        norm(&lam, NormKind::L2).unwrap(),
        grad_sq(&lam).sqrt()
    );
    let q = critheat_core::ground_state::q_field(grid.clone());
    println!(
        "||Q||_2^2={} gradQ^2={} intQ^3={}",
        inner_product(&q, &q).unwrap(),
        grad_sq(&q),
        critheat_core::field::integrate(&grid, |i| q.values[i].powi(3))
    );
    println!("(Q^2, Y) = {}", {
        let q2 = critheat_core::RadialField::from_fn(grid.clone(), |r| {
            critheat_core::ground_state::q_at(r, params).powi(2)
        });
        inner_product(&q2, &spec.y).unwrap()
    });
    println!("decay fit slope on [20,35]: {:?} vs -sqrt(e0) = {}", spec.decay_fit(20.0, 35.0), -spec.e0.sqrt());
    println!("y(ln) at r=20 {} r=35 {}", spec.y.values.iter().zip(&grid.nodes).find(|(_, &r)| r >= 20.0).map(|(v, _)| v.ln()).unwrap(), spec.y.values.iter().zip(&grid.nodes).find(|(_, &r)| r >= 35.0).map(|(v, _)| v.ln()).unwrap());
    println!("total {:?}", t0.elapsed());
}
