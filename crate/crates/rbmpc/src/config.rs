//! Experiment configuration: JSON-serializable settings, the two shipped
//! benchmark presets, a desk-scale knob, and the glue that turns a parsed
//! configuration into assembled operators, training/test grids, MPC
//! instances, and trained reduced bases.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{RbMpcError, Result};
use crate::fem::{assemble, l2_project, AffineOperatorSet};
use crate::garding::GardingTransform;
use crate::mesh::{build_mesh_1d, build_mesh_2d_tagged, FESpace, RectSide};
use crate::mpc::{observation_average_weights, MpcConfig, MpcInstance};
use crate::ocp::{BoxBounds, OcpSpec};
use crate::problem::{ObservationDomain, PdeProblem};
use crate::rb::{
    pod_greedy, GreedyConfig, Indicator, InstanceData, ReducedBasisBundle, TrainingProblem,
};
use crate::solver::SolveOptions;

/// Shipped problem presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemPreset {
    ReactionDiffusion1d,
    Welding2d,
    /// Placeholder for library-level custom problems; rejected by the
    /// configuration pipeline (build custom problems through the API).
    Custom,
}

/// One parameter-grid axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridAxis {
    /// Number of grid points along this parameter component.
    pub count: usize,
    /// Logarithmic spacing (requires positive axis bounds).
    pub log: bool,
}

/// Greedy-training settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreedySettings {
    pub n_max: usize,
    pub tol: f64,
    /// Training horizon K.
    pub k_train: usize,
    /// Error indicator: relative cost bound or relative control bound.
    pub indicator: IndicatorKind,
    /// Explicit seed parameter (must be a training-grid point).
    pub seed_mu: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndicatorKind {
    RelativeCost,
    RelativeControl,
}

impl From<IndicatorKind> for Indicator {
    fn from(k: IndicatorKind) -> Indicator {
        match k {
            IndicatorKind::RelativeCost => Indicator::RelativeCost,
            IndicatorKind::RelativeControl => Indicator::RelativeControl,
        }
    }
}

/// Closed-loop settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpcSettings {
    pub n_apply: usize,
    pub k_max: usize,
    pub omega_min: f64,
    pub total_steps: usize,
    pub constrained: bool,
}

/// Complete experiment configuration. Parses strictly: unknown keys are
/// rejected, and parse errors carry line/column positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemPreset,
    /// Mesh cells: `[n]` for 1D intervals, `[nx, ny]` for 2D rectangles.
    pub mesh_cells: Vec<usize>,
    pub tau: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    /// Stationary scalar control box applied to every control component.
    pub control_bounds: Option<[f64; 2]>,
    /// One axis per parameter component.
    pub training_grid: Vec<GridAxis>,
    pub test_grid: Vec<GridAxis>,
    pub greedy: GreedySettings,
    pub mpc: MpcSettings,
    pub output_dir: String,
    pub seed: u64,
}

impl ExperimentConfig {
    /// 1D reaction-diffusion benchmark at full scale: 200 cells, τ = 0.01,
    /// σ₁ = 1, σ₂ = 0, y_d ≡ 0, training 20 × 4 (μ₁ linear, λ logarithmic),
    /// test 30 × 4, horizon-1 MPC over 100 steps.
    pub fn example_reaction_diffusion() -> Self {
        ExperimentConfig {
            problem: ProblemPreset::ReactionDiffusion1d,
            mesh_cells: vec![200],
            tau: 0.01,
            sigma1: 1.0,
            sigma2: 0.0,
            control_bounds: None,
            training_grid: vec![
                GridAxis {
                    count: 20,
                    log: false,
                },
                GridAxis { count: 4, log: true },
            ],
            test_grid: vec![
                GridAxis {
                    count: 30,
                    log: false,
                },
                GridAxis { count: 4, log: true },
            ],
            greedy: GreedySettings {
                n_max: 10,
                tol: 1e-10,
                k_train: 20,
                indicator: IndicatorKind::RelativeCost,
                seed_mu: None,
            },
            mpc: MpcSettings {
                n_apply: 1,
                k_max: 20,
                omega_min: 0.0,
                total_steps: 100,
                constrained: false,
            },
            output_dir: "out".into(),
            seed: 0,
        }
    }

    /// 2D welding benchmark at full scale: 120 × 30 cells (≈ 3.7k dofs),
    /// τ = 0.02, σ₁ = σ₂ = 10, u ∈ [0, 80], training 10 × 20 logarithmic,
    /// test 6 × 10 logarithmic, 5-step feedback over 150 steps (t ∈ [0, 3]).
    pub fn example_welding() -> Self {
        ExperimentConfig {
            problem: ProblemPreset::Welding2d,
            mesh_cells: vec![120, 30],
            tau: 0.02,
            sigma1: 10.0,
            sigma2: 10.0,
            control_bounds: Some([0.0, 80.0]),
            training_grid: vec![
                GridAxis { count: 10, log: true },
                GridAxis { count: 20, log: true },
            ],
            test_grid: vec![
                GridAxis { count: 6, log: true },
                GridAxis { count: 10, log: true },
            ],
            greedy: GreedySettings {
                n_max: 20,
                tol: 1e-10,
                k_train: 75,
                indicator: IndicatorKind::RelativeControl,
                seed_mu: Some(vec![0.5, 1e-6]),
            },
            mpc: MpcSettings {
                n_apply: 5,
                k_max: 75,
                omega_min: 0.0,
                total_steps: 150,
                constrained: true,
            },
            output_dir: "out".into(),
            seed: 0,
        }
    }

    /// Desk-scale reduction: shrinks the mesh, the training/test grids, and
    /// the simulated-step count by `scale` (never below usable minima).
    /// Horizons and τ stay fixed so certified quantities keep their meaning.
    pub fn with_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale <= 1.0) {
            return Err(RbMpcError::Config(format!(
                "scale must lie in (0, 1], got {scale}"
            )));
        }
        let shrink = |v: usize, min: usize| ((v as f64 * scale).round() as usize).max(min);
        for c in &mut self.mesh_cells {
            *c = shrink(*c, 6);
        }
        for axis in self.training_grid.iter_mut().chain(&mut self.test_grid) {
            axis.count = shrink(axis.count, 2);
        }
        self.mpc.total_steps = shrink(self.mpc.total_steps, self.mpc.n_apply);
        // Keep the declared greedy seed only if it survives grid shrinking;
        // the presets seed at a grid corner, which always survives.
        Ok(self)
    }

    /// Strict JSON parse with positional diagnostics.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| RbMpcError::Config(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| RbMpcError::Config(format!("config serialize error: {e}")))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(&path)?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(RbMpcError::Config(m.into()));
        match self.problem {
            ProblemPreset::Custom => {
                return fail("custom problems must be built through the library API")
            }
            ProblemPreset::ReactionDiffusion1d if self.mesh_cells.len() != 1 => {
                return fail("1D preset needs mesh_cells = [n]")
            }
            ProblemPreset::Welding2d if self.mesh_cells.len() != 2 => {
                return fail("2D preset needs mesh_cells = [nx, ny]")
            }
            _ => {}
        }
        if self.mesh_cells.iter().any(|&c| c < 2) {
            return fail("mesh_cells entries must be ≥ 2");
        }
        if !(self.tau > 0.0) {
            return fail("tau must be positive");
        }
        if self.sigma1 < 0.0 || self.sigma2 < 0.0 || self.sigma1 + self.sigma2 <= 0.0 {
            return fail("need σ₁, σ₂ ≥ 0 with σ₁ + σ₂ > 0");
        }
        if let Some([lo, hi]) = self.control_bounds {
            if lo >= hi {
                return fail("control_bounds must satisfy lower < upper");
            }
        }
        if self.training_grid.iter().any(|a| a.count == 0)
            || self.training_grid.is_empty()
            || self.training_grid.iter().map(|a| a.count).product::<usize>() == 0
        {
            return fail("empty training set");
        }
        if self.test_grid.len() != self.training_grid.len() {
            return fail("training and test grids must have equal dimension");
        }
        if self.test_grid.iter().any(|a| a.count == 0) {
            return fail("empty test set");
        }
        if self.greedy.n_max == 0 || !(self.greedy.tol > 0.0) || self.greedy.k_train == 0 {
            return fail("greedy needs n_max ≥ 1, tol > 0, k_train ≥ 1");
        }
        if self.mpc.n_apply == 0 || self.mpc.n_apply > self.mpc.k_max {
            return fail("mpc needs 1 ≤ n_apply ≤ k_max");
        }
        if self.mpc.total_steps == 0 {
            return fail("mpc.total_steps must be ≥ 1");
        }
        if self.mpc.omega_min < 0.0 {
            return fail("mpc.omega_min must be ≥ 0");
        }
        Ok(())
    }

    /// Closed-loop configuration block.
    pub fn mpc_config(&self) -> MpcConfig {
        MpcConfig {
            n_apply: self.mpc.n_apply,
            k_max: self.mpc.k_max,
            omega_min: self.mpc.omega_min,
            total_steps: self.mpc.total_steps,
            constrained: self.mpc.constrained,
            warm_start_horizon: false,
        }
    }
}

/// Values of one grid axis over `[lo, hi]`.
pub fn axis_values(lo: f64, hi: f64, axis: GridAxis) -> Result<Vec<f64>> {
    if axis.count == 1 {
        return Ok(vec![lo]);
    }
    if axis.log {
        if lo <= 0.0 || hi <= 0.0 {
            return Err(RbMpcError::Config(
                "logarithmic axis needs positive bounds".into(),
            ));
        }
        let (a, b) = (lo.ln(), hi.ln());
        Ok((0..axis.count)
            .map(|i| (a + (b - a) * i as f64 / (axis.count - 1) as f64).exp())
            .collect())
    } else {
        Ok((0..axis.count)
            .map(|i| lo + (hi - lo) * i as f64 / (axis.count - 1) as f64)
            .collect())
    }
}

fn cartesian(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut grid: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(grid.len() * axis.len());
        for point in &grid {
            for &v in axis {
                let mut p = point.clone();
                p.push(v);
                next.push(p);
            }
        }
        grid = next;
    }
    grid
}

/// Assembled experiment: configuration plus problem, FE space and operators.
pub struct ExperimentSetup {
    pub config: ExperimentConfig,
    pub space: FESpace,
    pub ops: AffineOperatorSet,
}

impl ExperimentSetup {
    /// Builds mesh and operators for a validated configuration.
    pub fn build(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let (problem, space) = match config.problem {
            ProblemPreset::ReactionDiffusion1d => (
                PdeProblem::reaction_diffusion_1d(),
                FESpace::new(build_mesh_1d(config.mesh_cells[0], (0.0, 1.0))?),
            ),
            ProblemPreset::Welding2d => (
                PdeProblem::welding_2d(),
                FESpace::new(build_mesh_2d_tagged(
                    config.mesh_cells[0],
                    config.mesh_cells[1],
                    (0.0, 5.0, 0.0, 1.0),
                    &[RectSide::Left, RectSide::Right],
                )?),
            ),
            ProblemPreset::Custom => {
                return Err(RbMpcError::Config(
                    "custom problems must be built through the library API".into(),
                ))
            }
        };
        if config.training_grid.len() != problem.domain.len() {
            return Err(RbMpcError::Config(format!(
                "grid dimension {} does not match parameter dimension {}",
                config.training_grid.len(),
                problem.domain.len()
            )));
        }
        let ops = assemble(&problem, &space)?;
        Ok(ExperimentSetup { config, space, ops })
    }

    fn grid(&self, axes: &[GridAxis]) -> Result<Vec<Vec<f64>>> {
        let dom = self.ops.domain();
        let values: Vec<Vec<f64>> = axes
            .iter()
            .enumerate()
            .map(|(i, &a)| axis_values(dom.lower[i], dom.upper[i], a))
            .collect::<Result<_>>()?;
        Ok(cartesian(&values))
    }

    pub fn training_mus(&self) -> Result<Vec<Vec<f64>>> {
        self.grid(&self.config.training_grid)
    }

    pub fn test_mus(&self) -> Result<Vec<Vec<f64>>> {
        self.grid(&self.config.test_grid)
    }

    /// Control penalty λ = μ₂ at this parameter.
    pub fn lambda(&self, mu: &[f64]) -> f64 {
        mu[1]
    }

    /// Desired-state coefficients θ_{y_d}(μ) (stationary).
    pub fn theta_yd(&self, mu: &[f64]) -> Vec<f64> {
        self.ops
            .problem
            .desired_state
            .iter()
            .map(|c| c.theta.eval(0.0, mu))
            .collect()
    }

    /// Exponential transform at μ for weakly coercive problems.
    pub fn transform_for(&self, mu: &[f64]) -> Result<Option<GardingTransform>> {
        match self.ops.garding() {
            Some(g) => {
                let delta = g.shift.eval(0.0, mu);
                Ok(Some(GardingTransform::new(delta, self.config.tau)?))
            }
            None => Ok(None),
        }
    }

    /// Coercivity lower bound of the effective (transformed if weakly
    /// coercive) form. For the transformed case the Ω-embedding constant is
    /// taken as C_D, valid when the observation domain is all of Ω.
    pub fn alpha_for(&self, mu: &[f64]) -> Result<f64> {
        match (self.ops.garding(), self.transform_for(mu)?) {
            (Some(g), Some(t)) => {
                if !matches!(
                    self.ops.problem.observation,
                    ObservationDomain::WholeDomain
                ) {
                    return Err(RbMpcError::Config(
                        "transformed coercivity needs an Ω-embedding constant; \
                         only whole-domain observation is supported"
                            .into(),
                    ));
                }
                t.transformed_alpha_lb(g.alpha_shifted.eval(0.0, mu), self.ops.c_d)
            }
            _ => self.ops.alpha_lb(mu),
        }
    }

    /// OCP specification with horizon `k` in original variables.
    pub fn spec_for(&self, mu: &[f64], k: usize, constrained: bool) -> Result<OcpSpec> {
        let m = self.ops.b_vecs.len();
        let mut spec = OcpSpec::uniform(
            k,
            self.config.tau,
            self.config.sigma1,
            self.config.sigma2,
            self.lambda(mu),
            m,
            vec![self.theta_yd(mu); k + 1],
        )?;
        if constrained {
            let [lo, hi] = self.config.control_bounds.ok_or_else(|| {
                RbMpcError::Config("constrained run but no control_bounds configured".into())
            })?;
            spec.bounds = Some(BoxBounds {
                lower: vec![DVector::from_element(m, lo); k],
                upper: vec![DVector::from_element(m, hi); k],
            });
        }
        Ok(spec)
    }

    /// Training/bound data at μ: effective coefficients, hatted horizon-K
    /// specification, and bound constants.
    pub fn instance_data(&self, mu: &[f64], k: usize) -> Result<InstanceData> {
        self.ops.domain().check(mu)?;
        let spec = self.spec_for(mu, k, false)?;
        let (theta_eff, mass_coeff, spec_hat) = match self.transform_for(mu)? {
            Some(t) => {
                let (th, mc) = t.effective_theta(&self.ops.problem.theta_a(mu));
                (th, mc, t.transform_spec(&spec))
            }
            None => (self.ops.problem.theta_a(mu), 0.0, spec),
        };
        let ctx = crate::bounds::BoundContext {
            alpha_lb: self.alpha_for(mu)?,
            c_d: self.ops.c_d,
            sum_b_sq: self.ops.b_dual_norms.iter().map(|b| b * b).sum(),
            sigma1: spec_hat.sigma1_max(),
            sigma2: spec_hat.sigma2,
            lambda: spec_hat.lambda_min(),
            tau: spec_hat.tau,
        };
        ctx.validate()?;
        Ok(InstanceData {
            theta_eff,
            mass_coeff,
            spec: spec_hat,
            ctx,
        })
    }

    /// MPC instance at μ. Refuses parameters outside the declared domain.
    pub fn mpc_instance(&self, mu: &[f64]) -> Result<MpcInstance<'_>> {
        self.ops.domain().check(mu)?;
        let output_weights = match self.ops.problem.observation {
            ObservationDomain::WholeDomain => None,
            ObservationDomain::Box { .. } => Some(observation_average_weights(&self.ops)),
        };
        let m = self.ops.b_vecs.len();
        Ok(MpcInstance {
            ops: &self.ops,
            theta_a: self.ops.problem.theta_a(mu),
            tau: self.config.tau,
            sigma1: self.config.sigma1,
            sigma2: self.config.sigma2,
            lambda: self.lambda(mu),
            m_controls: m,
            theta_yd: self.theta_yd(mu),
            bounds: self.config.control_bounds.map(|[lo, hi]| {
                (
                    DVector::from_element(m, lo),
                    DVector::from_element(m, hi),
                )
            }),
            transform: self.transform_for(mu)?,
            alpha_coercive: self.alpha_for(mu)?,
            output_weights,
            opts: SolveOptions::default(),
        })
    }

    /// Benchmark initial state: the 1D preset starts from
    /// y₀(x) = sin(πx)/5, the 2D preset from rest.
    pub fn initial_state(&self) -> DVector<f64> {
        match self.config.problem {
            ProblemPreset::ReactionDiffusion1d => l2_project(&self.ops, &self.space, &|x| {
                0.2 * (std::f64::consts::PI * x[0]).sin()
            }),
            _ => DVector::zeros(self.ops.n),
        }
    }

    /// Runs the POD/greedy offline stage over the training grid.
    pub fn train(&self) -> Result<ReducedBasisBundle> {
        let mus = self.training_mus()?;
        let k = self.config.greedy.k_train;
        let make = |mu: &[f64]| self.instance_data(mu, k);
        let tp = TrainingProblem {
            ops: &self.ops,
            mus,
            make: &make,
            y0: self.initial_state(),
        };
        let cfg = GreedyConfig {
            n_max: self.config.greedy.n_max,
            tol: self.config.greedy.tol,
            indicator: self.config.greedy.indicator.into(),
            seed_mu: self.config.greedy.seed_mu.clone(),
            deflation_tol: 1e-10,
        };
        pod_greedy(&tp, &cfg)
    }
}
