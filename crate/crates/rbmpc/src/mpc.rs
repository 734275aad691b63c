//! Model-predictive control loops with online stability certification.
//!
//! Two engines share one receding-horizon driver:
//! * the reference truth engine solves finite-element optimal control
//!   problems each loop and certifies stability through the suboptimality
//!   quotient ω̃_K = [J*(y₀) − J*(y_reached)] / Σ_k τ l(y^k, u^{k+1});
//! * the reduced engine replaces every truth solve by a reduced-basis solve
//!   and replaces the exact quotient by a rigorous lower bound assembled from
//!   the a posteriori error bounds: the numerator becomes
//!   (J_N − Δ^J)(y₀) − (J_N + Δ^J)(y_reached), so a positive certified ω̃
//!   implies the exact relaxed-Lyapunov inequality.
//!
//! Each loop searches horizons K = n, n+1, … until the certified quotient
//! exceeds ω_min (capped at 1 for the stability logic; raw values are kept in
//! the trace), then applies the first n optimal controls to the truth plant.
//! Degenerate loops (running cost below threshold: plant already at the
//! target with the target control) skip certification and are flagged, as
//! are loops that exhaust K_max.

use std::time::Instant;

use nalgebra::DVector;

use crate::bounds::BoundContext;
use crate::error::{RbMpcError, Result};
use crate::fem::AffineOperatorSet;
use crate::garding::GardingTransform;
use crate::ocp::{solve_state, running_cost, BoxBounds, OcpSpec, TruthModel};
use crate::rb::{project_initial, realize_online, residual_norms, ReducedBasisBundle};
use crate::solver::{solve_ocp, solve_ocp_unconstrained, SolveOptions};

/// One parametrized control problem instance, ready for MPC: truth operators,
/// form coefficients at the chosen parameter, stationary cost weights, and —
/// for weakly coercive problems — the exponential transform under which the
/// reduced model and the error bounds are evaluated.
pub struct MpcInstance<'a> {
    pub ops: &'a AffineOperatorSet,
    /// Form coefficients Θ_q(μ) in original variables.
    pub theta_a: Vec<f64>,
    pub tau: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub lambda: f64,
    pub m_controls: usize,
    /// Stationary desired-state coefficients (one per affine component).
    pub theta_yd: Vec<f64>,
    /// Stationary control box, if any (original variables).
    pub bounds: Option<(DVector<f64>, DVector<f64>)>,
    /// Present when the form is only weakly coercive; reduced-side work is
    /// done in hatted variables.
    pub transform: Option<GardingTransform>,
    /// Coercivity lower bound of the (transformed, if applicable) effective
    /// form over Y.
    pub alpha_coercive: f64,
    /// Optional linear output functional s(y) = w·y.
    pub output_weights: Option<DVector<f64>>,
    pub opts: SolveOptions,
}

impl<'a> MpcInstance<'a> {
    /// Cost specification with horizon `k` in original variables.
    pub fn spec_for(&self, k: usize) -> Result<OcpSpec> {
        let mut spec = OcpSpec::uniform(
            k,
            self.tau,
            self.sigma1,
            self.sigma2,
            self.lambda,
            self.m_controls,
            vec![self.theta_yd.clone(); k + 1],
        )?;
        if let Some((lo, hi)) = &self.bounds {
            spec.bounds = Some(BoxBounds {
                lower: vec![lo.clone(); k],
                upper: vec![hi.clone(); k],
            });
        }
        Ok(spec)
    }

    /// Effective coefficients for system assembly on the reduced side.
    pub fn effective_theta(&self) -> (Vec<f64>, f64) {
        match &self.transform {
            Some(t) => t.effective_theta(&self.theta_a),
            None => (self.theta_a.clone(), 0.0),
        }
    }

    /// Hatted specification matching [`MpcInstance::effective_theta`].
    pub fn spec_hat(&self, spec: &OcpSpec) -> OcpSpec {
        match &self.transform {
            Some(t) => t.transform_spec(spec),
            None => spec.clone(),
        }
    }

    /// Control scale γ^{k−1} mapping a hatted control at step k back to
    /// original variables.
    pub fn control_back_scale(&self, k: usize) -> f64 {
        match &self.transform {
            Some(t) => t.control_scale(k),
            None => 1.0,
        }
    }

    /// Truth model in original variables (always well-posed for backward
    /// Euler, coercive or not).
    pub fn truth_model(&self) -> Result<TruthModel<'a>> {
        TruthModel::new(self.ops, &self.theta_a, 0.0, self.tau)
    }

    /// Error-bound constants for a hatted specification and a given bundle.
    pub fn bound_ctx(
        &self,
        bundle: &ReducedBasisBundle,
        spec_hat: &OcpSpec,
    ) -> Result<BoundContext> {
        let ctx = BoundContext {
            alpha_lb: self.alpha_coercive,
            c_d: bundle.c_d,
            sum_b_sq: bundle.sum_b_sq(),
            sigma1: spec_hat.sigma1_max(),
            sigma2: spec_hat.sigma2,
            lambda: spec_hat.lambda_min(),
            tau: spec_hat.tau,
        };
        ctx.validate()?;
        Ok(ctx)
    }

    /// Output s(y) = w·y, when configured.
    pub fn output(&self, y: &DVector<f64>) -> Option<f64> {
        self.output_weights.as_ref().map(|w| w.dot(y))
    }
}

/// Weights of the mean-value output s(y) = |Ω_s|⁻¹ ∫_{Ω_s} y.
pub fn observation_average_weights(ops: &AffineOperatorSet) -> DVector<f64> {
    let ones = DVector::from_element(ops.n, 1.0);
    ops.d_mat.matvec(&ones) / ops.d_measure
}

/// Receding-horizon configuration.
#[derive(Debug, Clone)]
pub struct MpcConfig {
    /// Controls applied per loop (multi-step feedback when > 1).
    pub n_apply: usize,
    /// Largest admissible prediction horizon.
    pub k_max: usize,
    /// Acceptance threshold on the (capped) suboptimality quotient.
    pub omega_min: f64,
    /// Total plant steps to simulate.
    pub total_steps: usize,
    /// Solve the control-constrained problem on the reduced side.
    pub constrained: bool,
    /// Start each loop's horizon search at the previous loop's accepted K
    /// instead of at n. Off by default; the strictly-increasing-from-n
    /// search is the reference behavior.
    pub warm_start_horizon: bool,
}

impl MpcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_apply == 0 || self.n_apply > self.k_max {
            return Err(RbMpcError::invalid("need 1 ≤ n ≤ K_max"));
        }
        if self.total_steps == 0 {
            return Err(RbMpcError::invalid("total_steps must be ≥ 1"));
        }
        if self.omega_min < 0.0 {
            return Err(RbMpcError::invalid("ω_min must be ≥ 0"));
        }
        Ok(())
    }
}

/// Why a loop terminated its horizon search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopFlag {
    /// ω̃ (capped at 1) exceeded ω_min at the recorded horizon.
    Accepted,
    /// No horizon up to K_max certified; the last candidate was applied.
    KMaxExceeded,
    /// Running cost below threshold (plant at the target); certification
    /// skipped, computed control applied.
    AtEquilibrium,
}

/// Per-loop record of the receding-horizon search.
#[derive(Debug, Clone)]
pub struct LoopRecord {
    pub index: usize,
    /// Horizon whose controls were applied.
    pub horizon: usize,
    /// Raw (uncapped) suboptimality quotient; NaN for at-equilibrium loops.
    pub omega_tilde: f64,
    pub flag: LoopFlag,
    /// Number of candidate horizons evaluated.
    pub candidates: usize,
    /// Wall time spent in reduced-side work (zero for the truth engine).
    pub rb_seconds: f64,
    /// Wall time spent in truth-contact work.
    pub truth_seconds: f64,
}

/// Closed-loop simulation record.
#[derive(Debug, Clone)]
pub struct MpcTrace {
    pub loops: Vec<LoopRecord>,
    /// Plant states y⁰ … y^{total}; length total_steps + 1.
    pub states: Vec<DVector<f64>>,
    /// Applied controls u¹ … u^{total}; length total_steps.
    pub controls: Vec<DVector<f64>>,
    /// Outputs s(y^k) when configured; else empty.
    pub outputs: Vec<f64>,
    /// For each applied step, the index of the governing loop.
    pub governing_loop: Vec<usize>,
    /// Accumulated closed-loop cost Σ_k τ l(y^{k−1}, u^k).
    pub closed_loop_cost: f64,
}

impl MpcTrace {
    /// Average accepted horizon over all loops.
    pub fn k_average(&self) -> f64 {
        if self.loops.is_empty() {
            return 0.0;
        }
        self.loops.iter().map(|l| l.horizon as f64).sum::<f64>() / self.loops.len() as f64
    }

    /// L²-type norm history ‖y^k‖ (Euclidean on coefficients scaled by the
    /// caller if needed); convenience for stability inspection.
    pub fn state_norms(&self) -> Vec<f64> {
        self.states.iter().map(|y| y.norm()).collect()
    }
}

/// Advances the truth plant `controls.len()` backward-Euler steps.
pub fn apply_to_plant(
    inst: &MpcInstance,
    y: &DVector<f64>,
    controls: &[DVector<f64>],
) -> Result<DVector<f64>> {
    if controls.is_empty() {
        return Ok(y.clone());
    }
    let model = inst.truth_model()?;
    let spec = inst.spec_for(controls.len())?;
    let path = solve_state(&model, &spec, controls, y);
    Ok(path.last().unwrap().clone())
}

/// Advances the plant `steps` steps along the truth-optimal trajectory of the
/// horizon-`steps` problem and returns the reached state y^{steps}(u*). Useful
/// for sampling suboptimality curves away from the initial condition.
pub fn warmup_state(
    inst: &MpcInstance,
    y0: &DVector<f64>,
    steps: usize,
) -> Result<DVector<f64>> {
    if steps == 0 {
        return Ok(y0.clone());
    }
    let spec = inst.spec_for(steps)?;
    let model = inst.truth_model()?;
    let sol = solve_ocp(&model, &spec, y0, None, &inst.opts)?;
    Ok(sol.y[steps].clone())
}

/// One horizon candidate: certified quotient (None when the denominator is
/// degenerate), the n controls to apply, and the plant path they produce.
struct Candidate {
    omega: Option<f64>,
    controls: Vec<DVector<f64>>,
    path: Vec<DVector<f64>>,
}

const DEGENERATE_DENOM: f64 = 1e-14;

fn fe_candidate(
    inst: &MpcInstance,
    y0: &DVector<f64>,
    k: usize,
    n: usize,
) -> Result<Candidate> {
    let spec = inst.spec_for(k)?;
    let model = inst.truth_model()?;
    let sol = solve_ocp(&model, &spec, y0, None, &inst.opts)?;
    // Applying the optimal controls to the truth plant reproduces the
    // predicted states exactly (same model).
    let path: Vec<DVector<f64>> = sol.y[..=n].to_vec();
    let controls: Vec<DVector<f64>> = sol.u[..n].to_vec();
    let denom: f64 = (0..n)
        .map(|j| running_cost(&model, &spec, &path[j], &controls[j]))
        .sum();
    if denom < DEGENERATE_DENOM {
        return Ok(Candidate {
            omega: None,
            controls,
            path,
        });
    }
    let sol2 = solve_ocp(&model, &spec, &path[n], None, &inst.opts)?;
    Ok(Candidate {
        omega: Some((sol.cost - sol2.cost) / denom),
        controls,
        path,
    })
}

/// Reference suboptimality quotient ω̃_K at a truth state: solves the truth
/// problem at y₀, applies the first n controls, and re-solves at the reached
/// state. Returns (applied controls, reached state, ω̃; NaN when degenerate).
pub fn fe_mpc_step(
    inst: &MpcInstance,
    y0: &DVector<f64>,
    k: usize,
    n: usize,
) -> Result<(Vec<DVector<f64>>, DVector<f64>, f64)> {
    if k < n || n == 0 {
        return Err(RbMpcError::invalid("need 1 ≤ n ≤ K"));
    }
    let cand = fe_candidate(inst, y0, k, n)?;
    let reached = cand.path[n].clone();
    Ok((cand.controls, reached, cand.omega.unwrap_or(f64::NAN)))
}

/// Certified reduced suboptimality data for one horizon.
pub struct RbCertificate {
    /// Certified quotient; None when the running-cost denominator is
    /// degenerate.
    pub omega_tilde: Option<f64>,
    /// Lower bound on the optimal value at y₀.
    pub j_lower: f64,
    /// Upper bound on the optimal value at the reached state.
    pub j_upper: f64,
    pub denominator: f64,
    /// Applied controls in original variables.
    pub controls: Vec<DVector<f64>>,
    /// Truth plant path under those controls (length n + 1).
    pub path: Vec<DVector<f64>>,
    pub rb_seconds: f64,
    pub truth_seconds: f64,
}

/// Evaluates the certified reduced suboptimality quotient ω̃_{N,K} at a truth
/// state y₀ (Prop. 3.2 / 3.9 structure): reduced solves plus rigorous cost
/// bounds on both ends of the numerator, truth plant contact only for the
/// n-step advance and the two initial projections.
pub fn rb_suboptimality(
    inst: &MpcInstance,
    bundle: &ReducedBasisBundle,
    y0: &DVector<f64>,
    k: usize,
    n: usize,
    constrained: bool,
) -> Result<RbCertificate> {
    if k < n || n == 0 {
        return Err(RbMpcError::invalid("need 1 ≤ n ≤ K"));
    }
    let mut rb_s = 0.0;
    let mut truth_s = 0.0;

    let t = Instant::now();
    let spec = inst.spec_for(k)?;
    let (theta_eff, mass_coeff) = inst.effective_theta();
    let spec_hat = inst.spec_hat(&spec);
    let ctx = inst.bound_ctx(bundle, &spec_hat)?;
    let rm = realize_online(bundle, &theta_eff, mass_coeff, inst.tau)?;
    rb_s += t.elapsed().as_secs_f64();

    let t = Instant::now();
    let (y0n, r0) = project_initial(bundle, inst.ops, y0)?;
    truth_s += t.elapsed().as_secs_f64();

    // Lower bound at y₀ always comes from the unconstrained problem: its
    // optimal value never exceeds the constrained one, and its cost bound is
    // two-sided.
    let t = Instant::now();
    let spec_uc = spec_hat.unconstrained();
    let sol_uc = solve_ocp_unconstrained(&rm, &spec_uc, &y0n, None, &inst.opts)?;
    let norms_uc = residual_norms(bundle, &rm, &spec_uc, &sol_uc)?;
    let rep_uc = crate::bounds::evaluate_bounds(&ctx, &norms_uc, r0, false)?;
    let j_lower = sol_uc.cost - rep_uc.delta_j;
    let sol_applied = if constrained {
        solve_ocp(&rm, &spec_hat, &y0n, None, &inst.opts)?
    } else {
        sol_uc
    };
    let controls: Vec<DVector<f64>> = sol_applied
        .u
        .iter()
        .take(n)
        .enumerate()
        .map(|(j, u)| u * inst.control_back_scale(j + 1))
        .collect();
    rb_s += t.elapsed().as_secs_f64();

    let t = Instant::now();
    let truth = inst.truth_model()?;
    let spec_n = inst.spec_for(n)?;
    let path = solve_state(&truth, &spec_n, &controls, y0);
    let denominator: f64 = (0..n)
        .map(|j| running_cost(&truth, &spec, &path[j], &controls[j]))
        .sum();
    truth_s += t.elapsed().as_secs_f64();

    if denominator < DEGENERATE_DENOM {
        return Ok(RbCertificate {
            omega_tilde: None,
            j_lower,
            j_upper: f64::NAN,
            denominator,
            controls,
            path,
            rb_seconds: rb_s,
            truth_seconds: truth_s,
        });
    }

    let t = Instant::now();
    let (y1n, r0b) = project_initial(bundle, inst.ops, &path[n])?;
    truth_s += t.elapsed().as_secs_f64();

    let t = Instant::now();
    let (sol2, con2) = if constrained {
        (solve_ocp(&rm, &spec_hat, &y1n, None, &inst.opts)?, true)
    } else {
        (
            solve_ocp_unconstrained(&rm, &spec_uc, &y1n, None, &inst.opts)?,
            false,
        )
    };
    let spec2 = if con2 { &spec_hat } else { &spec_uc };
    let norms2 = residual_norms(bundle, &rm, spec2, &sol2)?;
    let rep2 = crate::bounds::evaluate_bounds(&ctx, &norms2, r0b, con2)?;
    let j_upper = sol2.cost + rep2.delta_j;
    rb_s += t.elapsed().as_secs_f64();

    Ok(RbCertificate {
        omega_tilde: Some((j_lower - j_upper) / denominator),
        j_lower,
        j_upper,
        denominator,
        controls,
        path,
        rb_seconds: rb_s,
        truth_seconds: truth_s,
    })
}

/// Shared receding-horizon driver. `candidate(y, K)` evaluates one horizon
/// and reports (candidate, rb_seconds, truth_seconds).
fn mpc_loop<F>(
    inst: &MpcInstance,
    y0: &DVector<f64>,
    cfg: &MpcConfig,
    mut candidate: F,
) -> Result<MpcTrace>
where
    F: FnMut(&DVector<f64>, usize) -> Result<(Candidate, f64, f64)>,
{
    cfg.validate()?;
    let n = cfg.n_apply;
    let truth = inst.truth_model()?;
    let spec1 = inst.spec_for(1)?;

    let mut trace = MpcTrace {
        loops: Vec::new(),
        states: vec![y0.clone()],
        controls: Vec::new(),
        outputs: Vec::new(),
        governing_loop: Vec::new(),
        closed_loop_cost: 0.0,
    };
    if let Some(s) = inst.output(y0) {
        trace.outputs.push(s);
    }

    let mut state = y0.clone();
    let mut step = 0usize;
    let mut loop_idx = 0usize;
    let mut last_k = n;
    while step < cfg.total_steps {
        let k_start = if cfg.warm_start_horizon && loop_idx > 0 {
            last_k.max(n)
        } else {
            n
        };
        let mut rb_s = 0.0;
        let mut truth_s = 0.0;
        let mut tried = 0usize;
        let mut chosen: Option<(usize, Candidate, f64, LoopFlag)> = None;
        let mut fallback: Option<(usize, Candidate, f64)> = None;
        for k in k_start..=cfg.k_max {
            tried += 1;
            let (cand, rs, ts) = candidate(&state, k)?;
            rb_s += rs;
            truth_s += ts;
            match cand.omega {
                None => {
                    chosen = Some((k, cand, f64::NAN, LoopFlag::AtEquilibrium));
                    break;
                }
                Some(w) => {
                    // Stability logic caps ω̃ at 1; raw value kept for the
                    // trace.
                    if w.min(1.0) > cfg.omega_min {
                        chosen = Some((k, cand, w, LoopFlag::Accepted));
                        break;
                    }
                    fallback = Some((k, cand, w));
                }
            }
        }
        let (horizon, cand, omega, flag) = match chosen {
            Some(c) => c,
            None => {
                let (k, cand, w) = fallback.expect("at least one candidate evaluated");
                (k, cand, w, LoopFlag::KMaxExceeded)
            }
        };

        let n_eff = n.min(cfg.total_steps - step);
        for j in 0..n_eff {
            trace.closed_loop_cost +=
                running_cost(&truth, &spec1, &cand.path[j], &cand.controls[j]);
            trace.controls.push(cand.controls[j].clone());
            trace.states.push(cand.path[j + 1].clone());
            trace.governing_loop.push(loop_idx);
            if let Some(s) = inst.output(&cand.path[j + 1]) {
                trace.outputs.push(s);
            }
        }
        state = cand.path[n_eff].clone();
        trace.loops.push(LoopRecord {
            index: loop_idx,
            horizon,
            omega_tilde: omega,
            flag,
            candidates: tried,
            rb_seconds: rb_s,
            truth_seconds: truth_s,
        });
        step += n_eff;
        loop_idx += 1;
        last_k = horizon;
    }
    Ok(trace)
}

/// Reference truth MPC with adaptive horizon.
pub fn fe_mpc(inst: &MpcInstance, y0: &DVector<f64>, cfg: &MpcConfig) -> Result<MpcTrace> {
    mpc_loop(inst, y0, cfg, |y, k| {
        let t = Instant::now();
        let cand = fe_candidate(inst, y, k, cfg.n_apply)?;
        Ok((cand, 0.0, t.elapsed().as_secs_f64()))
    })
}

/// Adaptive reduced-basis MPC: per loop, searches K upward until the
/// certified quotient clears ω_min, then applies the reduced feedback to the
/// truth plant.
pub fn adaptive_rb_mpc(
    inst: &MpcInstance,
    bundle: &ReducedBasisBundle,
    y0: &DVector<f64>,
    cfg: &MpcConfig,
) -> Result<MpcTrace> {
    mpc_loop(inst, y0, cfg, |y, k| {
        let cert = rb_suboptimality(inst, bundle, y, k, cfg.n_apply, cfg.constrained)?;
        Ok((
            Candidate {
                omega: cert.omega_tilde,
                controls: cert.controls,
                path: cert.path,
            },
            cert.rb_seconds,
            cert.truth_seconds,
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble, l2_project};
    use crate::mesh::{build_mesh_1d, FESpace};
    use crate::problem::PdeProblem;
    use crate::rb::full_basis_bundle;

    fn setup(n: usize) -> (crate::fem::AffineOperatorSet, FESpace) {
        let problem = PdeProblem::reaction_diffusion_1d();
        let space = FESpace::new(build_mesh_1d(n, (0.0, 1.0)).unwrap());
        let ops = assemble(&problem, &space).unwrap();
        (ops, space)
    }

    fn instance<'a>(
        ops: &'a AffineOperatorSet,
        mu1: f64,
        lambda: f64,
        transform: bool,
    ) -> MpcInstance<'a> {
        let tau = 0.01;
        let (transform, alpha) = if transform {
            let t = GardingTransform::new(mu1, tau).unwrap();
            let a = t.transformed_alpha_lb(1.0, ops.c_d).unwrap();
            (Some(t), a)
        } else {
            // Directly coercive: a(v,v) ≥ (1 − μ₁ C²)‖v‖²_Y.
            (None, 1.0 - mu1 * ops.c_d * ops.c_d)
        };
        MpcInstance {
            ops,
            theta_a: vec![1.0, -mu1],
            tau,
            sigma1: 1.0,
            sigma2: 0.0,
            lambda,
            m_controls: 1,
            theta_yd: vec![],
            bounds: None,
            transform,
            alpha_coercive: alpha,
            output_weights: None,
            opts: SolveOptions::default(),
        }
    }

    fn initial_state(ops: &AffineOperatorSet, space: &FESpace) -> DVector<f64> {
        l2_project(ops, space, &|x| 0.2 * (std::f64::consts::PI * x[0]).sin())
    }

    #[test]
    fn plant_advance_matches_state_sweep() {
        let (ops, space) = setup(40);
        let inst = instance(&ops, 5.0, 1e-2, false);
        let y0 = initial_state(&ops, &space);
        let u: Vec<DVector<f64>> = (0..4)
            .map(|k| DVector::from_element(1, 0.3 * (k as f64 - 1.5)))
            .collect();
        let model = inst.truth_model().unwrap();
        let spec = inst.spec_for(4).unwrap();
        let path = solve_state(&model, &spec, &u, &y0);
        let reached = apply_to_plant(&inst, &y0, &u).unwrap();
        assert!((&reached - &path[4]).norm() < 1e-13);
        // One step equals a single sweep step.
        let one = apply_to_plant(&inst, &y0, &u[..1]).unwrap();
        assert!((&one - &path[1]).norm() < 1e-13);
        // Zero controls from zero state stay zero.
        let z = apply_to_plant(
            &inst,
            &DVector::zeros(ops.n),
            &[DVector::zeros(1), DVector::zeros(1)],
        )
        .unwrap();
        assert!(z.norm() == 0.0);
    }

    #[test]
    fn stable_parameter_certifies_at_minimal_horizon() {
        let (ops, space) = setup(50);
        let inst = instance(&ops, 2.0, 1e-1, false);
        let y0 = initial_state(&ops, &space);
        let (_, _, omega) = fe_mpc_step(&inst, &y0, 1, 1).unwrap();
        assert!(omega > 0.0, "ω̃_1 = {omega}");
        let cfg = MpcConfig {
            n_apply: 1,
            k_max: 10,
            omega_min: 0.0,
            total_steps: 10,
            constrained: false,
            warm_start_horizon: false,
        };
        let trace = fe_mpc(&inst, &y0, &cfg).unwrap();
        assert_eq!(trace.loops.len(), 10);
        assert!((trace.k_average() - 1.0).abs() < 1e-15);
        assert!(trace
            .loops
            .iter()
            .all(|l| l.flag == LoopFlag::Accepted && l.omega_tilde > 0.0));
        assert_eq!(trace.states.len(), 11);
        assert_eq!(trace.controls.len(), 10);
    }

    #[test]
    fn equilibrium_start_is_degenerate() {
        let (ops, _) = setup(30);
        let inst = instance(&ops, 2.0, 1e-1, false);
        let y0 = DVector::zeros(ops.n);
        let cfg = MpcConfig {
            n_apply: 1,
            k_max: 5,
            omega_min: 0.0,
            total_steps: 3,
            constrained: false,
            warm_start_horizon: false,
        };
        let trace = fe_mpc(&inst, &y0, &cfg).unwrap();
        assert!(trace
            .loops
            .iter()
            .all(|l| l.flag == LoopFlag::AtEquilibrium));
        assert!(trace.controls.iter().all(|u| u.norm() < 1e-12));
        assert!(trace.closed_loop_cost < 1e-20);
    }

    #[test]
    fn full_basis_certificate_matches_reference() {
        // Zero surrogate error → ω̃_{N,K} equals ω̃_K up to bound floors,
        // and never exceeds it (conservatism).
        let (ops, space) = setup(35);
        let bundle = full_basis_bundle(&ops).unwrap();
        let y0 = initial_state(&ops, &space);
        for (mu1, transform) in [(2.0, false), (12.0, true)] {
            let inst = instance(&ops, mu1, 1e-2, transform);
            for k in [2usize, 5] {
                let (_, _, omega_fe) = fe_mpc_step(&inst, &y0, k, 1).unwrap();
                let cert = rb_suboptimality(&inst, &bundle, &y0, k, 1, false).unwrap();
                let omega_rb = cert.omega_tilde.unwrap();
                assert!(
                    omega_rb <= omega_fe + 1e-9,
                    "μ₁ = {mu1}, K = {k}: RB {omega_rb} vs FE {omega_fe}"
                );
                assert!(
                    (omega_rb - omega_fe).abs() < 1e-5,
                    "μ₁ = {mu1}, K = {k}: RB {omega_rb} vs FE {omega_fe}"
                );
            }
        }
    }

    #[test]
    fn certified_descent_holds_against_truth() {
        // For an accepted loop, J*(y₀) ≥ J*(y_reached) + min(ω̃,1)·Σl with
        // truth solves — the inequality the certificate guarantees.
        let (ops, space) = setup(35);
        let bundle = full_basis_bundle(&ops).unwrap();
        let inst = instance(&ops, 12.0, 1e-2, true);
        let y0 = initial_state(&ops, &space);
        let k = 8;
        let cert = rb_suboptimality(&inst, &bundle, &y0, k, 1, false).unwrap();
        let omega = cert.omega_tilde.unwrap();
        assert!(omega > 0.0, "ω̃ = {omega}");
        let model = inst.truth_model().unwrap();
        let spec = inst.spec_for(k).unwrap();
        let j0 = solve_ocp(&model, &spec, &y0, None, &inst.opts).unwrap().cost;
        let j1 = solve_ocp(&model, &spec, &cert.path[1], None, &inst.opts)
            .unwrap()
            .cost;
        assert!(
            j0 >= j1 + omega.min(1.0) * cert.denominator - 1e-12,
            "descent violated: {j0} vs {} + {}·{}",
            j1,
            omega.min(1.0),
            cert.denominator
        );
    }

    #[test]
    fn threshold_raises_average_horizon() {
        let (ops, space) = setup(35);
        let bundle = full_basis_bundle(&ops).unwrap();
        let inst = instance(&ops, 10.0, 1e-2, true);
        let y0 = initial_state(&ops, &space);
        let base = MpcConfig {
            n_apply: 1,
            k_max: 20,
            omega_min: 0.0,
            total_steps: 6,
            constrained: false,
            warm_start_horizon: false,
        };
        let t0 = adaptive_rb_mpc(&inst, &bundle, &y0, &base).unwrap();
        let t2 = adaptive_rb_mpc(
            &inst,
            &bundle,
            &y0,
            &MpcConfig {
                omega_min: 0.2,
                ..base.clone()
            },
        )
        .unwrap();
        assert!(
            t2.k_average() >= t0.k_average(),
            "K_ave(0.2) = {} < K_ave(0) = {}",
            t2.k_average(),
            t0.k_average()
        );
        for l in &t0.loops {
            assert!(l.flag != LoopFlag::KMaxExceeded);
        }
    }

    #[test]
    fn multi_step_blocks_are_consistent() {
        let (ops, space) = setup(30);
        let inst = instance(&ops, 2.0, 1e-1, false);
        let y0 = initial_state(&ops, &space);
        let cfg = MpcConfig {
            n_apply: 2,
            k_max: 6,
            omega_min: 0.0,
            total_steps: 7, // not a multiple of n: last loop applies 1 step
            constrained: false,
            warm_start_horizon: false,
        };
        let trace = fe_mpc(&inst, &y0, &cfg).unwrap();
        assert_eq!(trace.states.len(), 8);
        assert_eq!(trace.controls.len(), 7);
        assert_eq!(trace.loops.len(), 4);
        // Replaying the recorded controls through the plant reproduces the
        // recorded states.
        let mut y = y0.clone();
        for (k, u) in trace.controls.iter().enumerate() {
            y = apply_to_plant(&inst, &y, std::slice::from_ref(u)).unwrap();
            assert!((&y - &trace.states[k + 1]).norm() < 1e-11);
        }
    }
}
