//! Online cost of the certified reduced controller versus the truth solver.
//!
//! One MPC loop needs, per candidate horizon: a reduced optimal-control
//! solve, residual norms through the precomputed Gram data, and the error
//! bounds — all with complexity independent of the truth dimension. The
//! example times this full certified pipeline against the truth solve for
//! the 2D welding problem across basis sizes and horizons.

use std::time::Instant;

use rbmpc::bounds::evaluate_bounds;
use rbmpc::config::{ExperimentConfig, ExperimentSetup};
use rbmpc::ocp::TruthModel;
use rbmpc::rb::{project_initial, realize_online, residual_norms};
use rbmpc::solver::solve_ocp_unconstrained;

fn main() -> rbmpc::error::Result<()> {
    let cfg = ExperimentConfig::example_welding().with_scale(0.5)?;
    let setup = ExperimentSetup::build(cfg)?;
    let bundle = setup.train()?;
    println!(
        "truth dimension {} dofs, reduced basis N = {}",
        setup.ops.n,
        bundle.n_basis()
    );

    let mu = vec![1.0, 1e-5];
    let y0 = setup.initial_state();
    let reps = 5;
    println!(
        "{:>4} {:>12} {:>8} {:>12} {:>8}",
        "K", "truth (s)", "N", "reduced (s)", "speedup"
    );
    for k in [10usize, 25, 50] {
        let inst = setup.instance_data(&mu, k)?;
        let truth = TruthModel::new(&setup.ops, &inst.theta_eff, inst.mass_coeff, inst.spec.tau)?;
        let t0 = Instant::now();
        for _ in 0..reps {
            let _ = solve_ocp_unconstrained(&truth, &inst.spec, &y0, None, &Default::default())?;
        }
        let fe_s = t0.elapsed().as_secs_f64() / reps as f64;
        for n in [bundle.n_basis() / 2, bundle.n_basis()] {
            let sub = bundle.truncate(n)?;
            let t0 = Instant::now();
            for _ in 0..reps {
                // Full certified online pipeline.
                let rm = realize_online(&sub, &inst.theta_eff, inst.mass_coeff, inst.spec.tau)?;
                let (y0n, r0) = project_initial(&sub, &setup.ops, &y0)?;
                let sol = solve_ocp_unconstrained(&rm, &inst.spec, &y0n, None, &Default::default())?;
                let norms = residual_norms(&sub, &rm, &inst.spec, &sol)?;
                let _ = evaluate_bounds(&inst.ctx, &norms, r0, false)?;
            }
            let rb_s = t0.elapsed().as_secs_f64() / reps as f64;
            println!(
                "{:>4} {:>12.5} {:>8} {:>12.5} {:>8.1}x",
                k,
                fe_s,
                n,
                rb_s,
                fe_s / rb_s
            );
        }
    }
    Ok(())
}
