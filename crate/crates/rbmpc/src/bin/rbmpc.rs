//! Benchmark front end: offline training, bound effectivities, closed-loop
//! MPC studies, online timing, suboptimality curves and single OCP solves,
//! all driven by a JSON experiment configuration (or a shipped preset) and
//! emitting CSV reports.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use rbmpc::bounds::evaluate_bounds;
use rbmpc::bundle_io::{load_bundle, save_bundle};
use rbmpc::config::{ExperimentConfig, ExperimentSetup};
use rbmpc::error::{RbMpcError, Result};
use rbmpc::mpc::{adaptive_rb_mpc, fe_mpc, fe_mpc_step, rb_suboptimality, warmup_state};
use rbmpc::ocp::{norm_u, TruthModel};
use rbmpc::rb::{
    adjoint_energy_norm, project_initial, realize_online, residual_norms, state_energy_norm,
    ReducedBasisBundle,
};
use rbmpc::report::{cell, history_table, trace_loop_table, trace_step_table, Table};
use rbmpc::solver::{solve_ocp, solve_ocp_unconstrained};

#[derive(Parser)]
#[command(
    name = "rbmpc",
    about = "Certified reduced-basis MPC benchmarks for parametrized parabolic PDEs"
)]
struct Cli {
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Shipped preset used when no --config is given.
    #[arg(long, global = true, value_enum)]
    preset: Option<PresetArg>,
    /// Reduced-basis bundle file (output of `offline`, input elsewhere).
    #[arg(long, global = true)]
    bundle: Option<PathBuf>,
    /// Output directory (overrides the configuration's output_dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Desk-scale factor in (0, 1] shrinking mesh, grids, and loop counts.
    #[arg(long, global = true)]
    scale: Option<f64>,
    /// Random seed override for sampled choices.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Rayon worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    #[value(name = "reaction-diffusion-1d")]
    ReactionDiffusion1d,
    #[value(name = "welding-2d")]
    Welding2d,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the POD/greedy offline stage; writes the bundle and a greedy
    /// history CSV.
    Offline,
    /// Evaluate error bounds and effectivities over the test grid.
    Bounds,
    /// Closed-loop MPC study: horizon table over the test grid plus traces.
    Mpc {
        /// Cap on the number of test parameters visited.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Online timing: truth solve versus reduced certification across (N, K).
    Timing {
        /// Repetitions per timed cell.
        #[arg(long, default_value_t = 3)]
        reps: usize,
    },
    /// Suboptimality quotients ω̃ versus horizon K at one parameter.
    Suboptimality {
        /// Parameter as comma-separated components, e.g. `14,0.01`.
        #[arg(long)]
        mu: Option<String>,
        /// Advance the plant this many steps under the truth-optimal control
        /// before sampling the curves.
        #[arg(long, default_value_t = 0)]
        warmup: usize,
        /// Reduced-basis sizes to evaluate (default: the full bundle).
        #[arg(long = "n-basis")]
        n_basis: Vec<usize>,
    },
    /// Solve one optimal control problem and report diagnostics.
    Solve {
        #[arg(long)]
        mu: Option<String>,
        /// Horizon (default: the training horizon).
        #[arg(long)]
        horizon: Option<usize>,
    },
}

fn parse_mu(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| RbMpcError::Config(format!("bad --mu component '{p}': {e}")))
        })
        .collect()
}

fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match (&cli.config, cli.preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(PresetArg::ReactionDiffusion1d)) => {
            ExperimentConfig::example_reaction_diffusion()
        }
        (None, Some(PresetArg::Welding2d)) => ExperimentConfig::example_welding(),
        (None, None) => {
            return Err(RbMpcError::Config(
                "provide --config PATH or --preset NAME".into(),
            ))
        }
    };
    if let Some(scale) = cli.scale {
        cfg = cfg.with_scale(scale)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.display().to_string();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_matching_bundle(cli: &Cli, setup: &ExperimentSetup) -> Result<ReducedBasisBundle> {
    let path = cli
        .bundle
        .as_ref()
        .ok_or_else(|| RbMpcError::Config("this command needs --bundle PATH".into()))?;
    let bundle = load_bundle(path)?;
    if bundle.n_truth != setup.ops.n {
        return Err(RbMpcError::Config(format!(
            "bundle truth dimension {} does not match configuration ({})",
            bundle.n_truth, setup.ops.n
        )));
    }
    Ok(bundle)
}

fn out_path(cfg: &ExperimentConfig, name: &str) -> PathBuf {
    PathBuf::from(&cfg.output_dir).join(name)
}

fn mid_mu(setup: &ExperimentSetup) -> Vec<f64> {
    let mus = setup.test_mus().unwrap_or_default();
    if mus.is_empty() {
        return setup.ops.domain().lower.clone();
    }
    mus[mus.len() / 2].clone()
}

fn cmd_offline(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(cli)?;
    let setup = ExperimentSetup::build(cfg)?;
    let t0 = Instant::now();
    let bundle = setup.train()?;
    let secs = t0.elapsed().as_secs_f64();
    let bundle_path = cli
        .bundle
        .clone()
        .unwrap_or_else(|| out_path(&setup.config, "bundle.rbb"));
    if let Some(dir) = bundle_path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    save_bundle(&bundle, &bundle_path)?;
    history_table(&bundle.history).write(out_path(&setup.config, "greedy_history.csv"))?;
    println!(
        "offline: N = {} basis vectors over {} training parameters in {secs:.1}s -> {}",
        bundle.n_basis(),
        setup.training_mus()?.len(),
        bundle_path.display()
    );
    Ok(())
}

fn cmd_bounds(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(cli)?;
    let setup = ExperimentSetup::build(cfg)?;
    let bundle = load_matching_bundle(cli, &setup)?;
    let y0 = setup.initial_state();
    let k = setup.config.greedy.k_train;
    let mut table = Table::new(&[
        "mu1", "mu2", "n_basis", "r0", "delta_u", "err_u", "eff_u", "delta_y_final",
        "err_y_final", "eff_y", "delta_p_1", "err_p_1", "eff_p", "delta_j", "err_j", "eff_j",
    ]);
    for mu in setup.test_mus()? {
        let inst = setup.instance_data(&mu, k)?;
        let rm = realize_online(&bundle, &inst.theta_eff, inst.mass_coeff, inst.spec.tau)?;
        let (y0n, r0) = project_initial(&bundle, &setup.ops, &y0)?;
        let sol = solve_ocp_unconstrained(&rm, &inst.spec, &y0n, None, &Default::default())?;
        let norms = residual_norms(&bundle, &rm, &inst.spec, &sol)?;
        let rep = evaluate_bounds(&inst.ctx, &norms, r0, false)?;

        let truth = TruthModel::new(&setup.ops, &inst.theta_eff, inst.mass_coeff, inst.spec.tau)?;
        let tsol = solve_ocp_unconstrained(&truth, &inst.spec, &y0, None, &Default::default())?;
        let eu: Vec<DVector<f64>> = sol
            .u
            .iter()
            .zip(&tsol.u)
            .map(|(a, b)| a - b)
            .collect();
        let err_u = norm_u(&inst.spec, &eu);
        let ey: Vec<DVector<f64>> = sol
            .y
            .iter()
            .zip(&tsol.y)
            .map(|(a, b)| bundle.lift(a) - b)
            .collect();
        let ep: Vec<DVector<f64>> = sol
            .p
            .iter()
            .zip(&tsol.p)
            .map(|(a, b)| bundle.lift(a) - b)
            .collect();
        let alpha = inst.ctx.alpha_lb;
        let err_y = state_energy_norm(&setup.ops, alpha, inst.spec.tau, &ey, k);
        let err_p = adjoint_energy_norm(&setup.ops, alpha, inst.spec.tau, &ep, 1);
        let err_j = (sol.cost - tsol.cost).abs();
        let eff = |d: f64, e: f64| cell(d / e);
        table.push(vec![
            cell(mu[0]),
            cell(mu[1]),
            bundle.n_basis().to_string(),
            cell(r0),
            cell(rep.delta_u),
            cell(err_u),
            eff(rep.delta_u, err_u),
            cell(*rep.delta_y.last().unwrap()),
            cell(err_y),
            eff(*rep.delta_y.last().unwrap(), err_y),
            cell(rep.delta_p[0]),
            cell(err_p),
            eff(rep.delta_p[0], err_p),
            cell(rep.delta_j),
            cell(err_j),
            eff(rep.delta_j, err_j),
        ]);
    }
    let path = out_path(&setup.config, "effectivities.csv");
    table.write(&path)?;
    println!("bounds: {} test parameters -> {}", table.rows.len(), path.display());
    Ok(())
}

fn cmd_mpc(cli: &Cli, limit: Option<usize>) -> Result<()> {
    let cfg = resolve_config(cli)?;
    let setup = ExperimentSetup::build(cfg)?;
    let bundle = load_matching_bundle(cli, &setup)?;
    let y0 = setup.initial_state();
    let mpc_cfg = setup.config.mpc_config();
    let mut table = Table::new(&[
        "mu1",
        "mu2",
        "k_ave_rb",
        "k_ave_fe",
        "flagged_loops_rb",
        "closed_loop_cost_rb",
        "closed_loop_cost_fe",
    ]);
    let mus = setup.test_mus()?;
    let visited: Vec<_> = match limit {
        Some(l) => mus.into_iter().take(l).collect(),
        None => mus,
    };
    for (i, mu) in visited.iter().enumerate() {
        let inst = setup.mpc_instance(mu)?;
        let rb = adaptive_rb_mpc(&inst, &bundle, &y0, &mpc_cfg)?;
        let fe = fe_mpc(&inst, &y0, &mpc_cfg)?;
        let flagged = rb
            .loops
            .iter()
            .filter(|l| l.flag != rbmpc::mpc::LoopFlag::Accepted)
            .count();
        table.push(vec![
            cell(mu[0]),
            cell(mu[1]),
            cell(rb.k_average()),
            cell(fe.k_average()),
            flagged.to_string(),
            cell(rb.closed_loop_cost),
            cell(fe.closed_loop_cost),
        ]);
        if i == 0 {
            trace_step_table(&rb, setup.config.tau)
                .write(out_path(&setup.config, "mpc_steps_rb.csv"))?;
            trace_loop_table(&rb).write(out_path(&setup.config, "mpc_loops_rb.csv"))?;
            trace_step_table(&fe, setup.config.tau)
                .write(out_path(&setup.config, "mpc_steps_fe.csv"))?;
            trace_loop_table(&fe).write(out_path(&setup.config, "mpc_loops_fe.csv"))?;
        }
    }
    let path = out_path(&setup.config, "horizon_table.csv");
    table.write(&path)?;
    println!("mpc: {} parameters -> {}", table.rows.len(), path.display());
    Ok(())
}

fn cmd_timing(cli: &Cli, reps: usize) -> Result<()> {
    let cfg = resolve_config(cli)?;
    let setup = ExperimentSetup::build(cfg)?;
    let bundle = load_matching_bundle(cli, &setup)?;
    let mu = mid_mu(&setup);
    let y0 = setup.initial_state();
    let constrained = setup.config.mpc.constrained && setup.config.control_bounds.is_some();
    let n_full = bundle.n_basis();
    let n_list: Vec<usize> = [n_full / 4, n_full / 2, 3 * n_full / 4, n_full]
        .iter()
        .copied()
        .filter(|&n| n >= 1)
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let k_lo = setup.config.mpc.n_apply;
    let k_hi = setup.config.mpc.k_max;
    let k_list: Vec<usize> = (0..6)
        .map(|i| k_lo + (k_hi - k_lo) * i / 5)
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut table = Table::new(&["method", "n_basis", "k", "seconds"]);
    let reps = reps.max(1);
    for &k in &k_list {
        let spec = setup.spec_for(&mu, k, constrained)?;
        let inst = setup.instance_data(&mu, k)?;
        let truth = TruthModel::new(&setup.ops, &inst.theta_eff, inst.mass_coeff, spec.tau)?;
        let spec_hat_c = if constrained {
            // Constrained runs certify in original variables (no transform
            // for the constrained preset), so the hatted spec carries the box.
            let mut s = inst.spec.clone();
            s.bounds = spec.bounds.clone();
            s
        } else {
            inst.spec.clone()
        };
        let t0 = Instant::now();
        for _ in 0..reps {
            let _ = solve_ocp(&truth, &spec_hat_c, &y0, None, &Default::default())?;
        }
        table.push(vec![
            "fe".into(),
            "0".into(),
            k.to_string(),
            cell(t0.elapsed().as_secs_f64() / reps as f64),
        ]);
        for &n in &n_list {
            let sub = bundle.truncate(n)?;
            let t0 = Instant::now();
            for _ in 0..reps {
                let rm = realize_online(&sub, &inst.theta_eff, inst.mass_coeff, spec.tau)?;
                let (y0n, r0) = project_initial(&sub, &setup.ops, &y0)?;
                let sol_uc =
                    solve_ocp_unconstrained(&rm, &inst.spec, &y0n, None, &Default::default())?;
                let norms = residual_norms(&sub, &rm, &inst.spec, &sol_uc)?;
                let _ = evaluate_bounds(&inst.ctx, &norms, r0, false)?;
                if constrained {
                    let sol_c = solve_ocp(&rm, &spec_hat_c, &y0n, None, &Default::default())?;
                    let norms_c = residual_norms(&sub, &rm, &spec_hat_c, &sol_c)?;
                    let _ = evaluate_bounds(&inst.ctx, &norms_c, r0, true)?;
                }
            }
            table.push(vec![
                "rb".into(),
                n.to_string(),
                k.to_string(),
                cell(t0.elapsed().as_secs_f64() / reps as f64),
            ]);
        }
    }
    let path = out_path(&setup.config, "timing.csv");
    table.write(&path)?;
    println!("timing: {} cells -> {}", table.rows.len(), path.display());
    Ok(())
}

fn cmd_suboptimality(
    cli: &Cli,
    mu: Option<String>,
    warmup: usize,
    n_basis: Vec<usize>,
) -> Result<()> {
    let cfg = resolve_config(cli)?;
    let setup = ExperimentSetup::build(cfg)?;
    let bundle = load_matching_bundle(cli, &setup)?;
    let mu = match mu {
        Some(s) => parse_mu(&s)?,
        None => mid_mu(&setup),
    };
    let inst = setup.mpc_instance(&mu)?;
    let mut y0 = setup.initial_state();
    // Sample the curves at y^{warmup}(u*): the terminal state of the
    // horizon-`warmup` truth-optimal trajectory.
    y0 = warmup_state(&inst, &y0, warmup)?;
    let n_list = if n_basis.is_empty() {
        vec![bundle.n_basis()]
    } else {
        n_basis
    };
    let mut headers = vec!["k".to_string(), "omega_fe".to_string()];
    for n in &n_list {
        headers.push(format!("omega_rb_n{n}"));
    }
    let mut table = Table {
        headers,
        rows: Vec::new(),
    };
    let n_apply = setup.config.mpc.n_apply;
    let subs: Vec<ReducedBasisBundle> = n_list
        .iter()
        .map(|&n| bundle.truncate(n))
        .collect::<Result<_>>()?;
    for k in n_apply..=setup.config.mpc.k_max {
        let (_, _, omega_fe) = fe_mpc_step(&inst, &y0, k, n_apply)?;
        let mut row = vec![k.to_string(), cell(omega_fe)];
        for sub in &subs {
            let cert = rb_suboptimality(
                &inst,
                sub,
                &y0,
                k,
                n_apply,
                setup.config.mpc.constrained,
            )?;
            row.push(cell(cert.omega_tilde.unwrap_or(f64::NAN)));
        }
        table.rows.push(row);
    }
    let path = out_path(&setup.config, "suboptimality.csv");
    table.write(&path)?;
    println!(
        "suboptimality: mu = {mu:?}, K = {}..{} -> {}",
        n_apply,
        setup.config.mpc.k_max,
        path.display()
    );
    Ok(())
}

fn cmd_solve(cli: &Cli, mu: Option<String>, horizon: Option<usize>) -> Result<()> {
    let cfg = resolve_config(cli)?;
    let setup = ExperimentSetup::build(cfg)?;
    let mu = match mu {
        Some(s) => parse_mu(&s)?,
        None => mid_mu(&setup),
    };
    let k = horizon.unwrap_or(setup.config.greedy.k_train);
    let constrained = setup.config.mpc.constrained && setup.config.control_bounds.is_some();
    let inst_data = setup.instance_data(&mu, k)?;
    let mut spec_hat = inst_data.spec.clone();
    if constrained {
        spec_hat.bounds = setup.spec_for(&mu, k, true)?.bounds;
    }
    let y0 = setup.initial_state();
    let truth = TruthModel::new(
        &setup.ops,
        &inst_data.theta_eff,
        inst_data.mass_coeff,
        spec_hat.tau,
    )?;
    let t0 = Instant::now();
    let sol = solve_ocp(&truth, &spec_hat, &y0, None, &Default::default())?;
    let fe_secs = t0.elapsed().as_secs_f64();
    println!(
        "truth solve: mu = {mu:?}, K = {k}, J = {:.8e}, quasi-Newton iters = {}, \
         active-set iters = {}, |grad|_U = {:.3e}, {fe_secs:.3}s",
        sol.cost, sol.bfgs_iters, sol.pdas_iters, sol.grad_norm
    );
    let mut table = Table::new(&["t", "state_l2", "u1"]);
    for k1 in 1..=k {
        table.push(vec![
            cell(k1 as f64 * spec_hat.tau),
            cell(setup.ops.l2_norm(&sol.y[k1])),
            cell(sol.u[k1 - 1][0]),
        ]);
    }
    let path = out_path(&setup.config, "solve.csv");
    table.write(&path)?;

    if cli.bundle.is_some() {
        let bundle = load_matching_bundle(cli, &setup)?;
        let rm = realize_online(
            &bundle,
            &inst_data.theta_eff,
            inst_data.mass_coeff,
            spec_hat.tau,
        )?;
        let (y0n, r0) = project_initial(&bundle, &setup.ops, &y0)?;
        let t0 = Instant::now();
        let rsol = solve_ocp(&rm, &spec_hat, &y0n, None, &Default::default())?;
        let norms = residual_norms(&bundle, &rm, &spec_hat, &rsol)?;
        let rep = evaluate_bounds(&inst_data.ctx, &norms, r0, constrained)?;
        let rb_secs = t0.elapsed().as_secs_f64();
        println!(
            "reduced solve: N = {}, J_N = {:.8e}, Δ^u = {:.3e}, Δ^J = {:.3e}, \
             R0 = {:.3e}, {rb_secs:.3}s",
            bundle.n_basis(),
            rsol.cost,
            rep.delta_u,
            rep.delta_j,
            r0
        );
    }
    println!("solve: trajectory -> {}", path.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        // Ignore failure if a global pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match &cli.cmd {
        Cmd::Offline => cmd_offline(cli),
        Cmd::Bounds => cmd_bounds(cli),
        Cmd::Mpc { limit } => cmd_mpc(cli, *limit),
        Cmd::Timing { reps } => cmd_timing(cli, *reps),
        Cmd::Suboptimality { mu, warmup, n_basis } => {
            cmd_suboptimality(cli, mu.clone(), *warmup, n_basis.clone())
        }
        Cmd::Solve { mu, horizon } => cmd_solve(cli, mu.clone(), *horizon),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
