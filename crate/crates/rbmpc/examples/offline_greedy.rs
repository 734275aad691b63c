//! POD-greedy construction of a reduced basis for the parametrized
//! reaction–diffusion control problem, followed by a save/load round trip of
//! the offline bundle.
//!
//! The greedy loop ranks every training parameter by an online-computable
//! error indicator (relative optimal-cost bound by default), solves the truth
//! optimal control problem at the worst parameter, and enriches the basis
//! with POD modes of the combined state/adjoint trajectory.

use rbmpc::bundle_io::{load_bundle, save_bundle};
use rbmpc::config::{ExperimentConfig, ExperimentSetup};

fn main() -> rbmpc::error::Result<()> {
    let cfg = ExperimentConfig::example_reaction_diffusion();
    println!(
        "training over {} parameters, mesh with {} dofs",
        cfg.training_grid.iter().map(|a| a.count).product::<usize>(),
        cfg.mesh_cells[0]
    );
    let setup = ExperimentSetup::build(cfg)?;

    let t0 = std::time::Instant::now();
    let bundle = setup.train()?;
    println!(
        "greedy finished: N = {} in {:.2}s",
        bundle.n_basis(),
        t0.elapsed().as_secs_f64()
    );
    println!("{:>4} {:>8} {:>14} {:>6}", "iter", "mu1", "indicator", "N");
    for (i, rec) in bundle.history.iter().enumerate() {
        println!(
            "{:>4} {:>8.3} {:>14.4e} {:>6}",
            i, rec.mu[0], rec.indicator, rec.n_after
        );
    }

    let path = std::env::temp_dir().join("rbmpc_offline_greedy.rbb");
    save_bundle(&bundle, &path)?;
    let reloaded = load_bundle(&path)?;
    assert_eq!(reloaded.n_basis(), bundle.n_basis());
    assert_eq!(reloaded.n_truth, bundle.n_truth);
    println!(
        "bundle round trip ok: {} ({} bytes)",
        path.display(),
        std::fs::metadata(&path)?.len()
    );
    std::fs::remove_file(&path)?;
    Ok(())
}
