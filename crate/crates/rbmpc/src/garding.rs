//! Exponential change of variables for weakly coercive problems.
//!
//! When the spatial form only satisfies a Gårding inequality
//! `a(v,v;μ) ≥ α_sh ‖v‖²_Y − δ(μ)‖v‖²_{L²}`, the substitution
//! `ŷ(t) = e^{−δt} y(t)` yields a coercive problem with time-variant weights.
//! At the discrete (backward Euler) level the transform is made *exact* by
//! working with the per-step factor `γ = e^{δτ}`:
//!
//! ```text
//! ŷ^k = γ^{−k} y^k,   û^k = γ^{−(k−1)} u^k,   p̂^k = γ^{k−1} p^k,
//! ```
//!
//! which turns the step equation `m(y^k − y^{k−1}, v) + τ a(y^k, v) = τ b(u^k, v)`
//! into `m(ŷ^k − ŷ^{k−1}, v) + τ [δ_τ m + γ a](ŷ^k, v) = τ b(û^k, v)` with
//! `δ_τ = (γ − 1)/τ`; the effective coefficients are `θ̃_q = γ Θ_q(μ)` plus
//! the mass shift `δ_τ`. Weights scale as `σ̂₁^k = γ^{2k}σ₁`,
//! `σ̂₂ = γ^{2K}σ₂`, `λ̂^k = γ^{2(k−1)}λ`; desired data and control bounds
//! scale with the matching state/control factors. With these conventions the
//! two solution paths (transform → solve → untransform versus direct solve of
//! the weakly coercive system) agree to round-off, and the cost is invariant:
//! J(y, u) = Ĵ(ŷ, û) exactly.

use nalgebra::DVector;

use crate::bounds::{BoundContext, ResidualNorms};
use crate::error::{RbMpcError, Result};
use crate::ocp::{BoxBounds, OcpSpec, TrajectorySolution};

/// Discrete exponential transform data for one (δ, τ) pair.
#[derive(Debug, Clone, Copy)]
pub struct GardingTransform {
    /// Gårding shift δ ≥ 0.
    pub delta: f64,
    /// Time step τ.
    pub tau: f64,
    /// Per-step factor γ = e^{δτ}.
    pub gamma: f64,
    /// Discrete shift δ_τ = (γ − 1)/τ (→ δ as τ → 0).
    pub delta_tau: f64,
}

impl GardingTransform {
    /// Builds the transform; δ = 0 gives the identity.
    pub fn new(delta: f64, tau: f64) -> Result<Self> {
        if delta < 0.0 {
            return Err(RbMpcError::invalid("Gårding shift must be ≥ 0"));
        }
        if !(tau > 0.0) {
            return Err(RbMpcError::invalid("τ must be positive"));
        }
        let gamma = (delta * tau).exp();
        Ok(GardingTransform {
            delta,
            tau,
            gamma,
            delta_tau: (gamma - 1.0) / tau,
        })
    }

    /// Effective form coefficients of the transformed system:
    /// `(γ Θ_q, δ_τ)` — the mass shift enters the system matrix as
    /// `M + τ(Σ_q γΘ_q A^q + δ_τ M)`.
    pub fn effective_theta(&self, theta_a: &[f64]) -> (Vec<f64>, f64) {
        (
            theta_a.iter().map(|t| self.gamma * t).collect(),
            self.delta_tau,
        )
    }

    /// State scale γ^k at step k.
    pub fn state_scale(&self, k: usize) -> f64 {
        self.gamma.powi(k as i32)
    }

    /// Control scale γ^{k−1} at step k (1-based).
    pub fn control_scale(&self, k: usize) -> f64 {
        self.gamma.powi(k as i32 - 1)
    }

    /// Transforms an OCP specification to hatted variables: per-step weights
    /// `σ̂₁^k = γ^{2k}σ₁^k`, `σ̂₂ = γ^{2K}σ₂`, `λ̂^k = γ^{2(k−1)}λ^k`;
    /// desired states scaled by γ^{−k}, desired controls and box bounds by
    /// γ^{−(k−1)}.
    pub fn transform_spec(&self, spec: &OcpSpec) -> OcpSpec {
        let kk = spec.k_steps;
        let g2 = self.gamma * self.gamma;
        let mut sigma1 = Vec::with_capacity(kk);
        let mut lambda = Vec::with_capacity(kk);
        let mut u_desired = Vec::with_capacity(kk);
        let mut s_state = g2; // γ^{2k} at k = 1
        let mut s_ctl = 1.0; // γ^{2(k−1)} at k = 1
        for k in 1..=kk {
            sigma1.push(spec.sigma1[k - 1] * s_state);
            lambda.push(spec.lambda[k - 1] * s_ctl);
            u_desired.push(&spec.u_desired[k - 1] / self.control_scale(k));
            s_state *= g2;
            s_ctl *= g2;
        }
        let sigma2 = spec.sigma2 * self.gamma.powi(2 * kk as i32);
        let theta_yd: Vec<Vec<f64>> = spec
            .theta_yd
            .iter()
            .enumerate()
            .map(|(k, row)| {
                let s = self.state_scale(k);
                row.iter().map(|t| t / s).collect()
            })
            .collect();
        let bounds = spec.bounds.as_ref().map(|b| BoxBounds {
            lower: (1..=kk)
                .map(|k| &b.lower[k - 1] / self.control_scale(k))
                .collect(),
            upper: (1..=kk)
                .map(|k| &b.upper[k - 1] / self.control_scale(k))
                .collect(),
        });
        OcpSpec {
            k_steps: kk,
            tau: spec.tau,
            sigma1,
            sigma2,
            lambda,
            u_desired,
            theta_yd,
            bounds,
        }
    }

    /// Maps a hatted solution back to the original variables:
    /// `y^k = γ^k ŷ^k`, `u^k = γ^{k−1} û^k`, `p^k = γ^{−(k−1)} p̂^k`.
    /// The cost is invariant and carried over unchanged.
    pub fn untransform_solution(&self, hat: TrajectorySolution) -> TrajectorySolution {
        let kk = hat.u.len();
        let y: Vec<DVector<f64>> = hat
            .y
            .into_iter()
            .enumerate()
            .map(|(k, v)| v * self.state_scale(k))
            .collect();
        let u: Vec<DVector<f64>> = hat
            .u
            .into_iter()
            .enumerate()
            .map(|(k0, v)| v * self.control_scale(k0 + 1))
            .collect();
        let mut p: Vec<DVector<f64>> = hat
            .p
            .into_iter()
            .enumerate()
            .map(|(k, v)| {
                if k == 0 {
                    v // placeholder, replaced below
                } else {
                    v / self.control_scale(k)
                }
            })
            .collect();
        if kk >= 1 {
            p[0] = p[1].clone();
        }
        TrajectorySolution {
            y,
            u,
            p,
            cost: hat.cost,
            bfgs_iters: hat.bfgs_iters,
            pdas_iters: hat.pdas_iters,
            grad_norm: hat.grad_norm,
        }
    }

    /// Transforms a state trajectory (index 0 = initial state) to hatted
    /// variables: ŷ^k = γ^{−k} y^k.
    pub fn transform_state(&self, y: &[DVector<f64>]) -> Vec<DVector<f64>> {
        y.iter()
            .enumerate()
            .map(|(k, v)| v / self.state_scale(k))
            .collect()
    }

    /// Exponential factor `e^{δKτ} = γ^K` of the back-transformed control
    /// bound: `‖u* − u_N*‖_U ≤ γ^K Δ̂^{u,*}`.
    pub fn control_growth_factor(&self, k_steps: usize) -> f64 {
        self.gamma.powi(k_steps as i32)
    }

    /// Coercivity lower bound of the transformed effective form
    /// `δ_τ m + γ a` given the Gårding data of `a`
    /// (`a(v,v) ≥ α_sh‖v‖²_Y − δ‖v‖²_{L²}`) and the embedding constant
    /// `‖v‖_{L²(Ω)} ≤ c_omega ‖v‖_Y`:
    ///
    /// ```text
    /// α̃ = γ α_sh − (γδ − δ_τ) c_Ω².
    /// ```
    ///
    /// The correction is nonnegative (γδ ≥ δ_τ for δ, τ > 0) and O(δ²τ); it
    /// accounts for the discrete shift δ_τ falling slightly short of γδ.
    pub fn transformed_alpha_lb(&self, alpha_shifted: f64, c_omega: f64) -> Result<f64> {
        let alpha = self.gamma * alpha_shifted
            - (self.gamma * self.delta - self.delta_tau) * c_omega * c_omega;
        if !(alpha > 0.0) {
            return Err(RbMpcError::NumericalConsistency(format!(
                "transformed coercivity bound nonpositive: {alpha:.3e} \
                 (δ = {}, τ = {}, α_sh = {alpha_shifted}, c_Ω = {c_omega})",
                self.delta, self.tau
            )));
        }
        Ok(alpha)
    }

    /// Bound constants for the transformed problem: λ̂_min = λ_min (the k = 1
    /// factor is 1), σ̂_{1,max} = γ^{2K}σ₁_max, σ̂₂ = γ^{2K}σ₂, and the
    /// transformed coercivity bound.
    pub fn bound_context(
        &self,
        spec_hat: &OcpSpec,
        alpha_shifted: f64,
        c_omega: f64,
        c_d: f64,
        sum_b_sq: f64,
    ) -> Result<BoundContext> {
        let ctx = BoundContext {
            alpha_lb: self.transformed_alpha_lb(alpha_shifted, c_omega)?,
            c_d,
            sum_b_sq,
            sigma1: spec_hat.sigma1_max(),
            sigma2: spec_hat.sigma2,
            lambda: spec_hat.lambda_min(),
            tau: spec_hat.tau,
        };
        ctx.validate()?;
        Ok(ctx)
    }

    /// Control bound in original variables per the back-transformation:
    /// `Δ^{u,*} = e^{δKτ} Δ̂^{u,*}` where the hatted bound is evaluated from
    /// transformed residuals with (λ̂_min, σ̂_{1,max}, σ̂₂).
    pub fn hatted_control_bound(
        &self,
        ctx_hat: &BoundContext,
        norms_hat: &ResidualNorms,
        r0: f64,
        k_steps: usize,
    ) -> f64 {
        let (d, _, _) = crate::bounds::control_error_bound(ctx_hat, norms_hat, r0);
        self.control_growth_factor(k_steps) * d
    }
}
