//! Solving one parabolic optimal control problem, with and without control
//! constraints.
//!
//! The unconstrained problem is solved by BFGS on the reduced control
//! variable with an exact line search (the cost is quadratic); the
//! box-constrained problem by a primal-dual active set method seeded from
//! the clamped unconstrained solution. The example prints iteration counts,
//! costs, the adjoint-based gradient check, and the active bounds found by
//! the constrained solver.

use nalgebra::DVector;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rbmpc::config::{ExperimentConfig, ExperimentSetup};
use rbmpc::ocp::{dot_u, eval_cost, eval_gradient, solve_state, TruthModel};
use rbmpc::solver::{solve_ocp, solve_ocp_unconstrained};

fn main() -> rbmpc::error::Result<()> {
    let cfg = ExperimentConfig::example_welding().with_scale(0.35)?;
    let setup = ExperimentSetup::build(cfg)?;
    let mu = vec![1.0, 1e-5];
    let k = 25;
    let spec_free = setup.spec_for(&mu, k, false)?;
    let spec_box = setup.spec_for(&mu, k, true)?;
    let inst = setup.instance_data(&mu, k)?;
    let model = TruthModel::new(&setup.ops, &inst.theta_eff, inst.mass_coeff, spec_free.tau)?;
    let y0 = setup.initial_state();

    let free = solve_ocp_unconstrained(&model, &spec_free, &y0, None, &Default::default())?;
    println!(
        "unconstrained: J = {:.6e} after {} BFGS iterations",
        free.cost, free.bfgs_iters
    );

    // Adjoint gradient versus a directional finite difference.
    let mut rng = StdRng::seed_from_u64(7);
    let u: Vec<DVector<f64>> = (0..k)
        .map(|_| DVector::from_fn(1, |_, _| rng.gen_range(0.0..40.0)))
        .collect();
    let d: Vec<DVector<f64>> = (0..k)
        .map(|_| DVector::from_fn(1, |_, _| rng.gen_range(-1.0..1.0)))
        .collect();
    let grad = eval_gradient(&model, &spec_free, &u, &y0);
    let h = 1e-5;
    let cost_at = |shift: f64| {
        let us: Vec<DVector<f64>> = u.iter().zip(&d).map(|(a, b)| a + b * shift).collect();
        let ys = solve_state(&model, &spec_free, &us, &y0);
        eval_cost(&spec_free, &model, &ys, &us)
    };
    let fd = (cost_at(h) - cost_at(-h)) / (2.0 * h);
    let gd = dot_u(&spec_free, &grad, &d);
    println!(
        "gradient check: adjoint {gd:.8e}, central difference {fd:.8e} (rel {:.1e})",
        (gd - fd).abs() / fd.abs()
    );

    let boxed = solve_ocp(&model, &spec_box, &y0, None, &Default::default())?;
    let (lo, hi) = {
        let b = spec_box.bounds.as_ref().unwrap();
        (b.lower[0][0], b.upper[0][0])
    };
    let at_upper = boxed.u.iter().filter(|u| (u[0] - hi).abs() < 1e-9).count();
    let at_lower = boxed.u.iter().filter(|u| (u[0] - lo).abs() < 1e-9).count();
    println!(
        "constrained u in [{lo}, {hi}]: J = {:.6e} after {} active-set iterations; \
         {at_upper} steps at the upper bound, {at_lower} at the lower",
        boxed.cost, boxed.pdas_iters
    );
    assert!(boxed.cost >= free.cost - 1e-12, "constraints cannot help");
    assert!(at_upper + at_lower > 0, "expected active constraints");
    Ok(())
}
