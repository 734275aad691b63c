//! Control of a 2D welding process: convection–diffusion on a rectangle with
//! a moving-frame convection term, a Gaussian heat source as control, box
//! constraints u ∈ [0, 80], and a mean-temperature output over a small
//! observation window with desired value 1. The desired output is not
//! reachable under the box constraint (the steady output at u ≡ 80 is
//! ≈ 0.36 at μ₁ = 1), so the controller saturates at the upper bound and
//! drives the output to the best attainable level.
//!
//! Runs desk-scale truth MPC (multi-step feedback, n = 5) over the full time
//! interval and prints the output trajectory, then shows the certified
//! reduced controller on the same plant.

use rbmpc::config::{ExperimentConfig, ExperimentSetup};
use rbmpc::mpc::{adaptive_rb_mpc, fe_mpc, LoopFlag};

fn main() -> rbmpc::error::Result<()> {
    let cfg = ExperimentConfig::example_welding().with_scale(0.35)?;
    let setup = ExperimentSetup::build(cfg)?;
    println!(
        "mesh {:?} ({} dofs), u in [0, 80], output = mean temperature over the seam window",
        setup.config.mesh_cells, setup.ops.n
    );

    let mu = vec![1.0, 1e-5];
    let inst = setup.mpc_instance(&mu)?;
    let y0 = setup.initial_state();
    let mut mpc_cfg = setup.config.mpc_config();
    mpc_cfg.total_steps = 50;

    let fe = fe_mpc(&inst, &y0, &mpc_cfg)?;
    println!(
        "truth MPC: K_ave = {:.1}, closed-loop cost = {:.4e}",
        fe.k_average(),
        fe.closed_loop_cost
    );
    println!("{:>6} {:>10} {:>10}", "t", "output", "control");
    for (k, s) in fe.outputs.iter().enumerate().step_by(5) {
        let u = if k == 0 { 0.0 } else { fe.controls[k - 1][0] };
        println!("{:>6.2} {:>10.4} {:>10.3}", k as f64 * setup.config.tau, s, u);
    }
    let settled = &fe.outputs[fe.outputs.len() - 10..];
    println!(
        "settled output mean over last 10 steps: {:.4} (desired 1, \
         best attainable under u <= 80 is ~0.35)",
        settled.iter().sum::<f64>() / settled.len() as f64
    );

    // Certified reduced controller on the same plant. At the tight
    // regularization of this benchmark (λ as small as 1e-6) the rigorous
    // bounds scale like 1/λ and are conservative, so loops typically exhaust
    // K_max: they are flagged and the horizon-K_max reduced control is
    // applied anyway. Those controls are accurate for their horizon; the
    // trajectory differs from the truth loop's because the governing
    // horizons differ (K_max versus the first accepted truth horizon), not
    // because the reduced solves are off.
    let bundle = setup.train()?;
    let rb = adaptive_rb_mpc(&inst, &bundle, &y0, &mpc_cfg)?;
    let flagged = rb
        .loops
        .iter()
        .filter(|l| l.flag != LoopFlag::Accepted)
        .count();
    println!(
        "reduced MPC (N = {}): K_ave = {:.1}, cost = {:.4e}, flagged loops = {}/{}",
        bundle.n_basis(),
        rb.k_average(),
        rb.closed_loop_cost,
        flagged,
        rb.loops.len()
    );
    let last_rb = *rb.outputs.last().unwrap();
    let last_fe = *fe.outputs.last().unwrap();
    println!("final outputs: truth {last_fe:.4}, reduced {last_rb:.4}");
    Ok(())
}
