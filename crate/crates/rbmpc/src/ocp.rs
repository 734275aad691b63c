//! Discrete finite-horizon optimal control problem kernel.
//!
//! The kernel is model-agnostic: every operation works against the
//! [`DiscreteModel`] trait, realized both by the truth discretization
//! ([`TruthModel`]) and by reduced models (`rb::ReducedModel`). Time stepping
//! is backward Euler:
//!
//! ```text
//! m(y^k, v) + τ a(y^k, v; μ) = m(y^{k-1}, v) + τ b(u^k, v),   k = 1..K,
//! ```
//!
//! with the quadratic tracking cost
//!
//! ```text
//! J = Σ_k (τ σ₁^k/2)|y^k − y_d^k|_D²  (+ σ₂/2 at k = K)
//!   + Σ_k (τ λ^k/2)‖u^k − u_d^k‖².
//! ```
//!
//! Weights are per-step to accommodate the Gårding-transformed problems with
//! time-variant σ̂₁ and λ̂; for plain problems all steps carry the same value.

use nalgebra::{DMatrix, DVector};

use crate::error::{RbMpcError, Result};
use crate::fem::AffineOperatorSet;
use crate::sparse::{BandedLu, CsrMatrix};

/// Componentwise control box bounds per time step.
#[derive(Debug, Clone)]
pub struct BoxBounds {
    /// Lower bounds u_a^k, k = 1..K.
    pub lower: Vec<DVector<f64>>,
    /// Upper bounds u_b^k, k = 1..K.
    pub upper: Vec<DVector<f64>>,
}

/// Full description of one finite-horizon optimal control problem.
#[derive(Debug, Clone)]
pub struct OcpSpec {
    /// Number of time steps K.
    pub k_steps: usize,
    /// Time-step size τ.
    pub tau: f64,
    /// Tracking weights σ₁^k, k = 1..K (index k−1).
    pub sigma1: Vec<f64>,
    /// Terminal tracking weight σ₂.
    pub sigma2: f64,
    /// Control penalties λ^k > 0, k = 1..K.
    pub lambda: Vec<f64>,
    /// Desired controls u_d^k, k = 1..K.
    pub u_desired: Vec<DVector<f64>>,
    /// Desired-state coefficients θ_{y_d}^q(t^k; μ), rows k = 0..K.
    pub theta_yd: Vec<Vec<f64>>,
    /// Optional box constraints (presence ⇒ constrained problem).
    pub bounds: Option<BoxBounds>,
}

impl OcpSpec {
    /// Uniform-weight spec with zero desired control and given desired-state
    /// coefficient rows.
    pub fn uniform(
        k_steps: usize,
        tau: f64,
        sigma1: f64,
        sigma2: f64,
        lambda: f64,
        m_controls: usize,
        theta_yd: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let spec = OcpSpec {
            k_steps,
            tau,
            sigma1: vec![sigma1; k_steps],
            sigma2,
            lambda: vec![lambda; k_steps],
            u_desired: vec![DVector::zeros(m_controls); k_steps],
            theta_yd,
            bounds: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Validates the invariants (λ > 0, σ ≥ 0, consistent lengths, ordered bounds).
    pub fn validate(&self) -> Result<()> {
        if self.k_steps == 0 || self.tau <= 0.0 {
            return Err(RbMpcError::invalid("need K ≥ 1 and τ > 0"));
        }
        if self.sigma1.len() != self.k_steps
            || self.lambda.len() != self.k_steps
            || self.u_desired.len() != self.k_steps
            || self.theta_yd.len() != self.k_steps + 1
        {
            return Err(RbMpcError::invalid("per-step data length mismatch"));
        }
        if self.sigma1.iter().any(|&s| s < 0.0) || self.sigma2 < 0.0 {
            return Err(RbMpcError::invalid("tracking weights must be ≥ 0"));
        }
        if self.lambda.iter().any(|&l| l <= 0.0) {
            return Err(RbMpcError::invalid("control penalty λ must be > 0"));
        }
        if let Some(b) = &self.bounds {
            if b.lower.len() != self.k_steps || b.upper.len() != self.k_steps {
                return Err(RbMpcError::invalid("bound sequence length mismatch"));
            }
            for (lo, hi) in b.lower.iter().zip(&b.upper) {
                if lo.iter().zip(hi.iter()).any(|(l, h)| l > h) {
                    return Err(RbMpcError::invalid("control bounds must satisfy u_a ≤ u_b"));
                }
            }
        }
        Ok(())
    }

    /// Whether box constraints are declared.
    pub fn is_constrained(&self) -> bool {
        self.bounds.is_some()
    }

    /// Effective terminal tracking weight τσ₁^K + σ₂ of the adjoint terminal step.
    pub fn terminal_weight(&self) -> f64 {
        self.tau * self.sigma1[self.k_steps - 1] + self.sigma2
    }

    /// max_k σ₁^k (enters the hatted bounds).
    pub fn sigma1_max(&self) -> f64 {
        self.sigma1.iter().copied().fold(0.0, f64::max)
    }

    /// min_k λ^k (enters the hatted bounds).
    pub fn lambda_min(&self) -> f64 {
        self.lambda.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Copy without box constraints.
    pub fn unconstrained(&self) -> OcpSpec {
        OcpSpec {
            bounds: None,
            ..self.clone()
        }
    }
}

/// Dense copies of the model operators, for the small test oracles.
#[derive(Debug, Clone)]
pub struct DenseParts {
    /// Mass matrix.
    pub m: DMatrix<f64>,
    /// Effective stiffness (including any Gårding mass shift).
    pub a: DMatrix<f64>,
    /// Observation matrix D.
    pub d: DMatrix<f64>,
    /// Control-to-state map B (n × m).
    pub b: DMatrix<f64>,
}

/// Abstract discrete model: everything the OCP kernel needs from either the
/// truth discretization or a reduced model.
pub trait DiscreteModel {
    /// State dimension (𝒩 or N).
    fn dim(&self) -> usize;
    /// Number of control components m.
    fn m_controls(&self) -> usize;
    /// Number of desired-state components Q_{y_d}.
    fn q_yd(&self) -> usize;
    /// Time-step size the cached factorization was built with.
    fn tau(&self) -> f64;
    /// Solves `(M + τA) x = rhs` using the cached factorization.
    fn solve_sys(&self, rhs: &DVector<f64>) -> DVector<f64>;
    /// Solves `(M + τAᵀ) x = rhs`.
    fn solve_sys_t(&self, rhs: &DVector<f64>) -> DVector<f64>;
    /// Mass application `M v`.
    fn apply_mass(&self, v: &DVector<f64>) -> DVector<f64>;
    /// Observation application `D v`.
    fn apply_obs(&self, v: &DVector<f64>) -> DVector<f64>;
    /// Control-to-state right-hand side `B u`.
    fn apply_control(&self, u: &DVector<f64>) -> DVector<f64>;
    /// Adjoint control map `Bᵀ v` (components b_i(v)).
    fn apply_control_t(&self, v: &DVector<f64>) -> DVector<f64>;
    /// Observation-weighted desired component `D y_d^q`.
    fn obs_yd(&self, q: usize) -> &DVector<f64>;
    /// Desired-state cross Gram `(y_d^p, y_d^q)_D`.
    fn ydd(&self) -> &DMatrix<f64>;
    /// Dense operator copies for oracles (None when too large).
    fn dense_parts(&self) -> Option<DenseParts>;
}

/// Truth-space realization of [`DiscreteModel`].
pub struct TruthModel<'a> {
    ops: &'a AffineOperatorSet,
    tau: f64,
    /// Effective stiffness Σ_q θ_q A^q + c_m M.
    a_eff: CsrMatrix,
    sys_lu: BandedLu,
    obs_yd: Vec<DVector<f64>>,
    ydd: DMatrix<f64>,
}

impl<'a> TruthModel<'a> {
    /// Builds the truth model for effective coefficients `(θ_a, mass_coeff)`
    /// and time step τ, factorizing `M + τ A_eff` once.
    pub fn new(
        ops: &'a AffineOperatorSet,
        theta_a: &[f64],
        mass_coeff: f64,
        tau: f64,
    ) -> Result<Self> {
        if theta_a.len() != ops.a_comps.len() {
            return Err(RbMpcError::invalid("θ_a length mismatch"));
        }
        let a_eff = ops.stiffness_at(theta_a, mass_coeff);
        let sys = CsrMatrix::linear_combination(&[(1.0, &ops.mass), (tau, &a_eff)]);
        let sys_lu = BandedLu::factorize(&sys)?;
        let obs_yd: Vec<DVector<f64>> = ops.yd_comps.iter().map(|y| ops.d_mat.matvec(y)).collect();
        let q = ops.yd_comps.len();
        let ydd = DMatrix::from_fn(q, q, |p, r| ops.yd_comps[p].dot(&obs_yd[r]));
        Ok(TruthModel {
            ops,
            tau,
            a_eff,
            sys_lu,
            obs_yd,
            ydd,
        })
    }

    /// Underlying operator set.
    pub fn ops(&self) -> &AffineOperatorSet {
        self.ops
    }

    /// Effective stiffness matrix (for energy norms and residual oracles).
    pub fn a_eff(&self) -> &CsrMatrix {
        &self.a_eff
    }
}

impl DiscreteModel for TruthModel<'_> {
    fn dim(&self) -> usize {
        self.ops.n
    }
    fn m_controls(&self) -> usize {
        self.ops.b_vecs.len()
    }
    fn q_yd(&self) -> usize {
        self.ops.yd_comps.len()
    }
    fn tau(&self) -> f64 {
        self.tau
    }
    fn solve_sys(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.sys_lu.solve(rhs)
    }
    fn solve_sys_t(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.sys_lu.solve_transpose(rhs)
    }
    fn apply_mass(&self, v: &DVector<f64>) -> DVector<f64> {
        self.ops.mass.matvec(v)
    }
    fn apply_obs(&self, v: &DVector<f64>) -> DVector<f64> {
        self.ops.d_mat.matvec(v)
    }
    fn apply_control(&self, u: &DVector<f64>) -> DVector<f64> {
        let mut r = DVector::zeros(self.ops.n);
        for (i, b) in self.ops.b_vecs.iter().enumerate() {
            r.axpy(u[i], b, 1.0);
        }
        r
    }
    fn apply_control_t(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.ops.b_vecs.len(), |i, _| self.ops.b_vecs[i].dot(v))
    }
    fn obs_yd(&self, q: usize) -> &DVector<f64> {
        &self.obs_yd[q]
    }
    fn ydd(&self) -> &DMatrix<f64> {
        &self.ydd
    }
    fn dense_parts(&self) -> Option<DenseParts> {
        if self.ops.n > 2000 {
            return None;
        }
        let m_ctl = self.m_controls();
        let mut b = DMatrix::zeros(self.ops.n, m_ctl);
        for (i, bi) in self.ops.b_vecs.iter().enumerate() {
            b.set_column(i, bi);
        }
        Some(DenseParts {
            m: self.ops.mass.to_dense(),
            a: self.a_eff.to_dense(),
            d: self.ops.d_mat.to_dense(),
            b,
        })
    }
}

/// A state/adjoint/control trajectory with cost and solver diagnostics.
#[derive(Debug, Clone)]
pub struct TrajectorySolution {
    /// States y^k, k = 0..K.
    pub y: Vec<DVector<f64>>,
    /// Adjoints p^k, k = 1..K (index 0 duplicates p¹ for convenience).
    pub p: Vec<DVector<f64>>,
    /// Controls u^k, k = 1..K.
    pub u: Vec<DVector<f64>>,
    /// Optimal cost J.
    pub cost: f64,
    /// BFGS iterations of the (final) inner solve.
    pub bfgs_iters: usize,
    /// PDAS outer iterations (0 for unconstrained solves).
    pub pdas_iters: usize,
    /// Final free-gradient norm ‖∇J‖_U.
    pub grad_norm: f64,
}

/// Desired-state observation vector `Σ_q θ^q(t^k) D y_d^q` at step k.
pub fn desired_obs(model: &dyn DiscreteModel, spec: &OcpSpec, k: usize) -> DVector<f64> {
    let mut v = DVector::zeros(model.dim());
    for q in 0..model.q_yd() {
        v.axpy(spec.theta_yd[k][q], model.obs_yd(q), 1.0);
    }
    v
}

/// Tracking mismatch `|y − y_d^k|_D²` evaluated via the cross-term expansion
/// (exact for both truth and reduced representations).
pub fn mismatch_sq(model: &dyn DiscreteModel, spec: &OcpSpec, k: usize, y: &DVector<f64>) -> f64 {
    let dy = model.apply_obs(y);
    let mut val = y.dot(&dy);
    for q in 0..model.q_yd() {
        val -= 2.0 * spec.theta_yd[k][q] * model.obs_yd(q).dot(y);
    }
    let ydd = model.ydd();
    for p in 0..model.q_yd() {
        for q in 0..model.q_yd() {
            val += spec.theta_yd[k][p] * spec.theta_yd[k][q] * ydd[(p, q)];
        }
    }
    val.max(0.0)
}

/// Backward-Euler state sweep: y⁰ = y0, then K solves with the cached factorization.
pub fn solve_state(
    model: &dyn DiscreteModel,
    spec: &OcpSpec,
    u: &[DVector<f64>],
    y0: &DVector<f64>,
) -> Vec<DVector<f64>> {
    assert_eq!(u.len(), spec.k_steps);
    debug_assert!((model.tau() - spec.tau).abs() < 1e-14 * spec.tau);
    let mut y = Vec::with_capacity(spec.k_steps + 1);
    y.push(y0.clone());
    for k in 1..=spec.k_steps {
        let mut rhs = model.apply_mass(&y[k - 1]);
        rhs.axpy(spec.tau, &model.apply_control(&u[k - 1]), 1.0);
        y.push(model.solve_sys(&rhs));
    }
    y
}

/// Backward-in-time adjoint sweep. The terminal step carries the merged
/// weight `τσ₁^K + σ₂`; interior steps carry `τσ₁^k`.
pub fn solve_adjoint(
    model: &dyn DiscreteModel,
    spec: &OcpSpec,
    y: &[DVector<f64>],
) -> Vec<DVector<f64>> {
    assert_eq!(y.len(), spec.k_steps + 1);
    let kk = spec.k_steps;
    let mut p = vec![DVector::zeros(model.dim()); kk + 1];
    for k in (1..=kk).rev() {
        let w = if k == kk {
            spec.terminal_weight()
        } else {
            spec.tau * spec.sigma1[k - 1]
        };
        let mut rhs = if k == kk {
            DVector::zeros(model.dim())
        } else {
            model.apply_mass(&p[k + 1])
        };
        if w != 0.0 {
            rhs += desired_obs(model, spec, k) * w;
            rhs.axpy(-w, &model.apply_obs(&y[k]), 1.0);
        }
        p[k] = model.solve_sys_t(&rhs);
    }
    if kk >= 1 {
        p[0] = p[1].clone();
    }
    p
}

/// Cost functional J per the discretized definition (merged terminal weight).
pub fn eval_cost(
    spec: &OcpSpec,
    model: &dyn DiscreteModel,
    y: &[DVector<f64>],
    u: &[DVector<f64>],
) -> f64 {
    let kk = spec.k_steps;
    let mut j = 0.0;
    for k in 1..=kk {
        let w = if k == kk {
            0.5 * (spec.tau * spec.sigma1[k - 1] + spec.sigma2)
        } else {
            0.5 * spec.tau * spec.sigma1[k - 1]
        };
        if w != 0.0 {
            j += w * mismatch_sq(model, spec, k, &y[k]);
        }
        let du = &u[k - 1] - &spec.u_desired[k - 1];
        j += 0.5 * spec.tau * spec.lambda[k - 1] * du.norm_squared();
    }
    j
}

/// Gradient in U-representation from a precomputed adjoint:
/// `g^k = λ^k (u^k − u_d^k) − Bᵀ p^k`.
pub fn gradient_from_adjoint(
    spec: &OcpSpec,
    model: &dyn DiscreteModel,
    u: &[DVector<f64>],
    p: &[DVector<f64>],
) -> Vec<DVector<f64>> {
    (1..=spec.k_steps)
        .map(|k| {
            let mut g = (&u[k - 1] - &spec.u_desired[k - 1]) * spec.lambda[k - 1];
            g.axpy(-1.0, &model.apply_control_t(&p[k]), 1.0);
            g
        })
        .collect()
}

/// Gradient ∇J(u) via one state and one adjoint sweep.
pub fn eval_gradient(
    model: &dyn DiscreteModel,
    spec: &OcpSpec,
    u: &[DVector<f64>],
    y0: &DVector<f64>,
) -> Vec<DVector<f64>> {
    let y = solve_state(model, spec, u, y0);
    let p = solve_adjoint(model, spec, &y);
    gradient_from_adjoint(spec, model, u, &p)
}

/// U-inner product `(a, b)_U = τ Σ_k a^k·b^k`.
pub fn dot_u(spec: &OcpSpec, a: &[DVector<f64>], b: &[DVector<f64>]) -> f64 {
    spec.tau
        * a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.dot(y))
            .sum::<f64>()
}

/// U-norm `‖a‖_U`.
pub fn norm_u(spec: &OcpSpec, a: &[DVector<f64>]) -> f64 {
    dot_u(spec, a, a).max(0.0).sqrt()
}

/// Exact line search for the quadratic cost: the minimizer of s ↦ J(u + s d) is
/// `s* = −(∇J(u), d)_U / q(d)` with the curvature
/// `q(d) = Σ_k τσ₁^k |y^k(d)|_D² + σ₂ |y^K(d)|_D² + Σ_k τλ^k ‖d^k‖²`,
/// where y(d) is the state response to control d with zero initial condition.
pub fn exact_line_search(
    model: &dyn DiscreteModel,
    spec: &OcpSpec,
    grad: &[DVector<f64>],
    d: &[DVector<f64>],
) -> Result<f64> {
    let zero = DVector::zeros(model.dim());
    let yd = solve_state(model, spec, d, &zero);
    let kk = spec.k_steps;
    let mut q = 0.0;
    for k in 1..=kk {
        let w = if k == kk {
            spec.tau * spec.sigma1[k - 1] + spec.sigma2
        } else {
            spec.tau * spec.sigma1[k - 1]
        };
        if w != 0.0 {
            q += w * yd[k].dot(&model.apply_obs(&yd[k]));
        }
        q += spec.tau * spec.lambda[k - 1] * d[k - 1].norm_squared();
    }
    if q <= 0.0 {
        return Err(RbMpcError::invalid(
            "degenerate search direction: zero curvature",
        ));
    }
    Ok(-dot_u(spec, grad, d) / q)
}

/// Running cost `l(y, u) = (σ₁/2)τ|y − y_d|_D² + (λ/2)τ‖u − u_d‖²` with the
/// stationary (step-1) weights and desired data. The MPC loops require
/// time-invariant tracking data, for which this is exact.
pub fn running_cost(
    model: &dyn DiscreteModel,
    spec: &OcpSpec,
    y: &DVector<f64>,
    u_next: &DVector<f64>,
) -> f64 {
    let track = 0.5 * spec.sigma1[0] * spec.tau * mismatch_sq(model, spec, 0, y);
    let du = u_next - &spec.u_desired[0];
    track + 0.5 * spec.lambda[0] * spec.tau * du.norm_squared()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble;
    use crate::mesh::{build_mesh_1d, FESpace};
    use crate::problem::PdeProblem;

    fn truth_1d(n: usize, mu1: f64, tau: f64) -> (AffineOperatorSet, FESpace) {
        let problem = PdeProblem::reaction_diffusion_1d();
        let space = FESpace::new(build_mesh_1d(n, (0.0, 1.0)).unwrap());
        let ops = assemble(&problem, &space).unwrap();
        let _ = (mu1, tau);
        (ops, space)
    }

    fn spec_zero_yd(k: usize, tau: f64, s1: f64, s2: f64, lam: f64) -> OcpSpec {
        OcpSpec::uniform(k, tau, s1, s2, lam, 1, vec![vec![]; k + 1]).unwrap()
    }

    #[test]
    fn zero_data_gives_zero_trajectory() {
        let (ops, _) = truth_1d(20, 5.0, 0.01);
        let model = TruthModel::new(&ops, &[1.0, -5.0], 0.0, 0.01).unwrap();
        let spec = spec_zero_yd(10, 0.01, 1.0, 0.0, 1e-2);
        let u = vec![DVector::zeros(1); 10];
        let y = solve_state(&model, &spec, &u, &DVector::zeros(20));
        assert!(y.iter().all(|v| v.norm() == 0.0));
        let p = solve_adjoint(&model, &spec, &y);
        assert!(p.iter().all(|v| v.norm() == 0.0));
        assert_eq!(eval_cost(&spec, &model, &y, &u), 0.0);
    }

    #[test]
    fn uncontrolled_decay_and_growth_across_threshold() {
        // μ₁ = 2 < π²/4: decay; μ₁ = 10 > π²/4: growth.
        let (ops, space) = truth_1d(100, 0.0, 0.01);
        let spec = spec_zero_yd(100, 0.01, 1.0, 0.0, 1e-2);
        let y0 = crate::fem::l2_project(&ops, &space, &|x| {
            0.2 * (std::f64::consts::PI * x[0]).sin()
        });
        let u = vec![DVector::zeros(1); 100];
        for (mu1, expect_growth) in [(2.0, false), (10.0, true)] {
            let model = TruthModel::new(&ops, &[1.0, -mu1], 0.0, 0.01).unwrap();
            let y = solve_state(&model, &spec, &u, &y0);
            let n0 = ops.l2_norm(&y[50]);
            let n1 = ops.l2_norm(&y[100]);
            if expect_growth {
                assert!(n1 > n0, "μ₁ = {mu1}: expected growth, {n0} → {n1}");
            } else {
                assert!(n1 < n0, "μ₁ = {mu1}: expected decay, {n0} → {n1}");
            }
        }
    }

    #[test]
    fn scalar_model_closed_forms() {
        // Single-dof truth space: m, a, d, b scalars from the 1-element mesh.
        let (ops, _) = truth_1d(1, 0.0, 0.1);
        let tau = 0.1;
        let mu1 = 3.0;
        let model = TruthModel::new(&ops, &[1.0, -mu1], 0.0, tau).unwrap();
        let m = ops.mass.to_dense()[(0, 0)];
        let a = ops.a_comps[0].to_dense()[(0, 0)] - mu1 * ops.a_comps[1].to_dense()[(0, 0)];
        let d = ops.d_mat.to_dense()[(0, 0)];
        let b = ops.b_vecs[0][0];
        let spec = spec_zero_yd(1, tau, 2.0, 0.5, 1e-2);
        let u = vec![DVector::from_element(1, 0.7)];
        let y0 = DVector::from_element(1, 0.3);
        let y = solve_state(&model, &spec, &u, &y0);
        let y1_expect = (m * 0.3 + tau * b * 0.7) / (m + tau * a);
        assert!((y[1][0] - y1_expect).abs() < 1e-13);
        // Terminal adjoint: p^K = (τσ₁+σ₂)(y_d − y^K) d-weighted / (m + τa); y_d = 0.
        let p = solve_adjoint(&model, &spec, &y);
        let pk_expect = (tau * 2.0 + 0.5) * (-d * y[1][0]) / (m + tau * a);
        assert!((p[1][0] - pk_expect).abs() < 1e-13);
    }

    #[test]
    fn pure_control_cost_when_sigma_zero() {
        let (ops, _) = truth_1d(10, 0.0, 0.05);
        let model = TruthModel::new(&ops, &[1.0, -1.0], 0.0, 0.05).unwrap();
        let spec = spec_zero_yd(4, 0.05, 0.0, 0.0, 0.3);
        let u: Vec<DVector<f64>> = (0..4).map(|k| DVector::from_element(1, k as f64)).collect();
        let y = solve_state(&model, &spec, &u, &DVector::zeros(10));
        let j = eval_cost(&spec, &model, &y, &u);
        let expect = 0.5 * 0.3 * 0.05 * (0.0 + 1.0 + 4.0 + 9.0);
        assert!((j - expect).abs() < 1e-14);
        // σ₁ = σ₂ = 0 ⇒ zero adjoint.
        let p = solve_adjoint(&model, &spec, &y);
        assert!(p.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn line_search_minimizer_property() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let (ops, space) = truth_1d(15, 0.0, 0.02);
        let model = TruthModel::new(&ops, &[1.0, -4.0], 0.0, 0.02).unwrap();
        let spec = spec_zero_yd(6, 0.02, 1.0, 0.3, 1e-2);
        let y0 = crate::fem::l2_project(&ops, &space, &|x| x[0] * (1.5 - x[0]));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u: Vec<DVector<f64>> =
            (0..6).map(|_| DVector::from_fn(1, |_, _| rng.gen_range(-1.0..1.0))).collect();
        let d: Vec<DVector<f64>> =
            (0..6).map(|_| DVector::from_fn(1, |_, _| rng.gen_range(-1.0..1.0))).collect();
        let g = eval_gradient(&model, &spec, &u, &y0);
        let s = exact_line_search(&model, &spec, &g, &d).unwrap();
        let eval_at = |step: f64| {
            let us: Vec<DVector<f64>> =
                u.iter().zip(&d).map(|(a, b)| a + b * step).collect();
            let y = solve_state(&model, &spec, &us, &y0);
            eval_cost(&spec, &model, &y, &us)
        };
        let j_star = eval_at(s);
        for _ in 0..20 {
            let step = rng.gen_range(-2.0..2.0);
            assert!(j_star <= eval_at(step) + 1e-12);
        }
    }
}
