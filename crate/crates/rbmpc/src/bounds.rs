//! Certified a posteriori error bounds for the reduced optimal control problem.
//!
//! All quantities are driven by residual dual norms ([`ResidualNorms`],
//! produced either offline-online from the bundle Gram blocks or directly by
//! truth-space Riesz solves) plus a handful of problem constants
//! ([`BoundContext`]). The chain is:
//!
//! 1. control bound Δ^{u,*} = c₁ + √(c₁² + c₂);
//! 2. state optimality bounds Δ^{y,*,k} (energy norm, prefix sums);
//! 3. adjoint optimality bounds Δ^{p,*,k} (energy norm, tail sums);
//! 4. spatio-temporal bounds Δ_N^{y,k}, Δ_N^{p,k};
//! 5. cost bound Δ^{J,*}: two-sided without control constraints, one-sided
//!    (J* − J_N* ≤ Δ) with them.

use crate::error::{RbMpcError, Result};

/// Per-step residual dual norms and control residual magnitudes.
#[derive(Debug, Clone)]
pub struct ResidualNorms {
    /// ‖r_y^k‖_{Y'}, k = 1..K.
    pub ry: Vec<f64>,
    /// ‖r_p^k‖_{Y'}, k = 1..K (entry K uses the terminal weight σ₁ + σ₂/τ).
    pub rp: Vec<f64>,
    /// Control residuals r̃_{u,i}^k = λ^k(u_{N,i}^k − u_{d,i}^k) − b_i(p_N^k),
    /// one inner vector per step. Zero (up to solver tolerance) at an
    /// unconstrained reduced optimum.
    pub ru: Vec<Vec<f64>>,
}

impl ResidualNorms {
    /// Aggregated state residual R_y = (τ Σ_k ‖r_y^k‖²)^{1/2}.
    pub fn r_y(&self, tau: f64) -> f64 {
        (tau * self.ry.iter().map(|r| r * r).sum::<f64>()).sqrt()
    }

    /// Aggregated adjoint residual R_p.
    pub fn r_p(&self, tau: f64) -> f64 {
        (tau * self.rp.iter().map(|r| r * r).sum::<f64>()).sqrt()
    }

    /// Aggregated control residual (τ Σ_{k,i} |r̃_{u,i}^k|²)^{1/2}.
    pub fn r_u(&self, tau: f64) -> f64 {
        (tau * self
            .ru
            .iter()
            .map(|row| row.iter().map(|r| r * r).sum::<f64>())
            .sum::<f64>())
        .sqrt()
    }

    /// Validates nonnegativity and consistent lengths.
    pub fn validate(&self) -> Result<()> {
        if self.ry.len() != self.rp.len() || self.ry.len() != self.ru.len() {
            return Err(RbMpcError::invalid("residual sequence length mismatch"));
        }
        if self.ry.iter().chain(&self.rp).any(|&r| !(r >= 0.0)) {
            return Err(RbMpcError::NumericalConsistency(
                "negative or non-finite residual norm".into(),
            ));
        }
        Ok(())
    }
}

/// Problem constants entering the bound formulas. For weakly coercive
/// problems handled through the exponential transform, the caller supplies
/// the transformed quantities (λ̂_min, σ̂_{1,max}, σ̂₂(T), transformed α_LB).
#[derive(Debug, Clone, Copy)]
pub struct BoundContext {
    /// Coercivity lower bound α_LB(μ) > 0.
    pub alpha_lb: f64,
    /// Observation embedding constant C_D.
    pub c_d: f64,
    /// Σ_i ‖b_i‖²_{Y'}.
    pub sum_b_sq: f64,
    /// Tracking weight σ₁ (maximum over steps for time-variant weights).
    pub sigma1: f64,
    /// Terminal weight σ₂ (at final time for time-variant weights).
    pub sigma2: f64,
    /// Control penalty λ (minimum over steps for time-variant weights).
    pub lambda: f64,
    /// Time step τ.
    pub tau: f64,
}

impl BoundContext {
    /// Validates positivity requirements.
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_lb > 0.0) {
            return Err(RbMpcError::invalid("α_LB must be positive"));
        }
        if !(self.lambda > 0.0) || !(self.tau > 0.0) {
            return Err(RbMpcError::invalid("λ and τ must be positive"));
        }
        if self.c_d < 0.0 || self.sum_b_sq < 0.0 || self.sigma1 < 0.0 || self.sigma2 < 0.0 {
            return Err(RbMpcError::invalid("bound constants must be ≥ 0"));
        }
        Ok(())
    }
}

/// Control error bound Δ^{u,*} = c₁ + √(c₁² + c₂) with
///
/// ```text
/// c₁ = R_p (Σ‖b_i‖²)^{1/2} / (√2 α λ),
/// c₂ = (1/λ)[ (2√2/α R_y + (1+√2)/√α R₀) R_p
///           + (C_D²σ₁/α + σ₂/2) R₀²
///           + f (C_D²σ₁/α² + σ₂/(2α)) R_y² ],
/// ```
///
/// where f = 1/2 when R₀ = 0 and 1 otherwise. Returns (Δ^{u,*}, c₁, c₂).
pub fn control_error_bound(ctx: &BoundContext, norms: &ResidualNorms, r0: f64) -> (f64, f64, f64) {
    let (a, lam, cd) = (ctx.alpha_lb, ctx.lambda, ctx.c_d);
    let ry = norms.r_y(ctx.tau);
    let rp = norms.r_p(ctx.tau);
    let sqrt2 = std::f64::consts::SQRT_2;
    let c1 = rp * ctx.sum_b_sq.sqrt() / (sqrt2 * a * lam);
    let f = if r0 == 0.0 { 0.5 } else { 1.0 };
    let c2 = (1.0 / lam)
        * ((2.0 * sqrt2 / a * ry + (1.0 + sqrt2) / a.sqrt() * r0) * rp
            + (cd * cd * ctx.sigma1 / a + ctx.sigma2 / 2.0) * r0 * r0
            + f * (cd * cd * ctx.sigma1 / (a * a) + ctx.sigma2 / (2.0 * a)) * ry * ry);
    (c1 + (c1 * c1 + c2).sqrt(), c1, c2)
}

/// State optimality bounds Δ^{y,*,k} on the energy norm ⦀e_y^k⦀_y, for all
/// k = 1..K:
///
/// ```text
/// Δ^{y,*,k} = √( (2τ/α) Σ_{k'≤k} ‖r_y^{k'}‖² + (2/α)(Σ‖b_i‖²)(Δ^{u,*})² + R₀² ).
/// ```
pub fn state_optimality_bounds(
    ctx: &BoundContext,
    norms: &ResidualNorms,
    delta_u: f64,
    r0: f64,
) -> Vec<f64> {
    let a = ctx.alpha_lb;
    let fixed = 2.0 / a * ctx.sum_b_sq * delta_u * delta_u + r0 * r0;
    let mut acc = 0.0;
    norms
        .ry
        .iter()
        .map(|r| {
            acc += r * r;
            (2.0 * ctx.tau / a * acc + fixed).sqrt()
        })
        .collect()
}

/// Adjoint optimality bounds Δ^{p,*,k} on ⦀e_p^k⦀_p, k = 1..K:
///
/// ```text
/// Δ^{p,*,k} = √( (2τ/α) Σ_{k'≥k} ‖r_p^{k'}‖² + (2C_D⁴σ₁²/α² + σ₂²/2)(Δ^{y,*,K})² ).
/// ```
pub fn adjoint_optimality_bounds(
    ctx: &BoundContext,
    norms: &ResidualNorms,
    delta_y_final: f64,
) -> Vec<f64> {
    let a = ctx.alpha_lb;
    let cd4 = ctx.c_d.powi(4);
    let fixed = (2.0 * cd4 * ctx.sigma1 * ctx.sigma1 / (a * a)
        + ctx.sigma2 * ctx.sigma2 / 2.0)
        * delta_y_final
        * delta_y_final;
    let mut tail = vec![0.0; norms.rp.len()];
    let mut acc = 0.0;
    for k in (0..norms.rp.len()).rev() {
        acc += norms.rp[k] * norms.rp[k];
        tail[k] = (2.0 * ctx.tau / a * acc + fixed).sqrt();
    }
    tail
}

/// Spatio-temporal energy bounds (Δ_N^{y,k} prefix array, Δ_N^{p,k} tail array):
///
/// ```text
/// Δ_N^{y,k} = √( (τ/α) Σ_{k'≤k} ‖r_y^{k'}‖² ),
/// Δ_N^{p,k} = √( (τ/α) Σ_{k'≥k} ‖r_p^{k'}‖² ).
/// ```
pub fn spatio_temporal_bounds(ctx: &BoundContext, norms: &ResidualNorms) -> (Vec<f64>, Vec<f64>) {
    let a = ctx.alpha_lb;
    let mut acc = 0.0;
    let dy: Vec<f64> = norms
        .ry
        .iter()
        .map(|r| {
            acc += r * r;
            (ctx.tau / a * acc).sqrt()
        })
        .collect();
    let mut dp = vec![0.0; norms.rp.len()];
    let mut acc = 0.0;
    for k in (0..norms.rp.len()).rev() {
        acc += norms.rp[k] * norms.rp[k];
        dp[k] = (ctx.tau / a * acc).sqrt();
    }
    (dy, dp)
}

/// Full bound evaluation: all constituent bounds plus the cost bound.
#[derive(Debug, Clone)]
pub struct BoundReport {
    /// Control bound Δ^{u,*}.
    pub delta_u: f64,
    /// Quadratic-formula coefficients.
    pub c1: f64,
    pub c2: f64,
    /// State optimality bounds, k = 1..K.
    pub delta_y: Vec<f64>,
    /// Adjoint optimality bounds, k = 1..K.
    pub delta_p: Vec<f64>,
    /// Spatio-temporal state bounds.
    pub delta_ny: Vec<f64>,
    /// Spatio-temporal adjoint bounds.
    pub delta_np: Vec<f64>,
    /// Cost bound: two-sided |J* − J_N*| ≤ Δ without control constraints,
    /// one-sided J* − J_N* ≤ Δ with them.
    pub delta_j: f64,
    /// Whether `delta_j` is the one-sided constrained variant.
    pub constrained: bool,
    /// Initial-condition projection error R₀ = ‖y₀ − Z ȳ₀‖_{L²}.
    pub r0: f64,
    /// Wall time spent in this evaluation.
    pub eval_seconds: f64,
}

/// Evaluates the complete bound chain.
///
/// `constrained` selects the cost-bound variant: with box constraints the
/// control residual term (τΣ|r̃|²)^{1/2}·Δ^{u,*} is added and the result is a
/// one-sided upper bound on J* − J_N*; without it the term is dropped and the
/// bound is two-sided.
pub fn evaluate_bounds(
    ctx: &BoundContext,
    norms: &ResidualNorms,
    r0: f64,
    constrained: bool,
) -> Result<BoundReport> {
    let t0 = std::time::Instant::now();
    ctx.validate()?;
    norms.validate()?;
    if r0 < 0.0 {
        return Err(RbMpcError::invalid("R₀ must be ≥ 0"));
    }
    let (delta_u, c1, c2) = control_error_bound(ctx, norms, r0);
    let delta_y = state_optimality_bounds(ctx, norms, delta_u, r0);
    let dy_final = *delta_y.last().expect("K ≥ 1");
    let delta_p = adjoint_optimality_bounds(ctx, norms, dy_final);
    let (delta_ny, delta_np) = spatio_temporal_bounds(ctx, norms);
    let mut delta_j = 0.5
        * ((r0 + delta_ny.last().unwrap()) * delta_p[0]
            + delta_np[0] * dy_final);
    if constrained {
        delta_j += 0.5 * norms.r_u(ctx.tau) * delta_u;
    }
    Ok(BoundReport {
        delta_u,
        c1,
        c2,
        delta_y,
        delta_p,
        delta_ny,
        delta_np,
        delta_j,
        constrained,
        r0,
        eval_seconds: t0.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> BoundContext {
        BoundContext {
            alpha_lb: 1.0,
            c_d: 1.0,
            sum_b_sq: 2.0,
            sigma1: 1.0,
            sigma2: 0.0,
            lambda: 1.0,
            tau: 1.0,
        }
    }

    #[test]
    fn hand_evaluated_control_bound() {
        // R_p = 1, R_y = 0, R₀ = 0, λ = 1, α = 1, Σ‖b_i‖² = 2 → c₁ = 1, c₂ = 0, Δ = 2.
        let norms = ResidualNorms {
            ry: vec![0.0],
            rp: vec![1.0],
            ru: vec![vec![0.0]],
        };
        let (d, c1, c2) = control_error_bound(&ctx(), &norms, 0.0);
        assert!((c1 - 1.0).abs() < 1e-15);
        assert!(c2.abs() < 1e-15);
        assert!((d - 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_residuals_give_zero_bounds() {
        let norms = ResidualNorms {
            ry: vec![0.0; 5],
            rp: vec![0.0; 5],
            ru: vec![vec![0.0]; 5],
        };
        let rep = evaluate_bounds(&ctx(), &norms, 0.0, false).unwrap();
        assert_eq!(rep.delta_u, 0.0);
        assert!(rep.delta_y.iter().all(|&d| d == 0.0));
        assert!(rep.delta_p.iter().all(|&d| d == 0.0));
        assert_eq!(rep.delta_j, 0.0);
    }

    #[test]
    fn monotonicity_in_k() {
        let norms = ResidualNorms {
            ry: vec![0.3, 0.1, 0.7, 0.2],
            rp: vec![0.5, 0.4, 0.05, 0.9],
            ru: vec![vec![0.0]; 4],
        };
        let rep = evaluate_bounds(&ctx(), &norms, 0.2, true).unwrap();
        for k in 1..4 {
            assert!(rep.delta_y[k] >= rep.delta_y[k - 1]);
            assert!(rep.delta_ny[k] >= rep.delta_ny[k - 1]);
            assert!(rep.delta_p[k] <= rep.delta_p[k - 1]);
            assert!(rep.delta_np[k] <= rep.delta_np[k - 1]);
        }
        // Spatio-temporal bound is dominated by the optimality bound.
        for k in 0..4 {
            assert!(rep.delta_ny[k] <= rep.delta_y[k]);
            assert!(rep.delta_np[k] <= rep.delta_p[k]);
        }
        // Aggregate identity at k = K: Δ_N^{y,K} = R_y/√α.
        let ryagg = norms.r_y(1.0);
        assert!((rep.delta_ny[3] - ryagg).abs() < 1e-14);
    }

    #[test]
    fn r0_halving_convention() {
        // With R₀ = 0 the R_y² term in c₂ carries a factor 1/2.
        let norms = ResidualNorms {
            ry: vec![1.0],
            rp: vec![0.0],
            ru: vec![vec![0.0]],
        };
        let (_, _, c2_zero) = control_error_bound(&ctx(), &norms, 0.0);
        // σ₂ = 0, C_D = 1, σ₁ = 1, α = 1: term = f·R_y² with R_y = 1.
        assert!((c2_zero - 0.5).abs() < 1e-15);
        let (_, _, c2_pos) = control_error_bound(&ctx(), &norms, 1e-30);
        assert!((c2_pos - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constrained_cost_bound_adds_control_residual_term() {
        let norms = ResidualNorms {
            ry: vec![0.1, 0.2],
            rp: vec![0.2, 0.1],
            ru: vec![vec![0.3], vec![0.4]],
        };
        let rep_uc = evaluate_bounds(&ctx(), &norms, 0.0, false).unwrap();
        let rep_c = evaluate_bounds(&ctx(), &norms, 0.0, true).unwrap();
        let expect = rep_uc.delta_j + 0.5 * norms.r_u(1.0) * rep_c.delta_u;
        assert!((rep_c.delta_j - expect).abs() < 1e-14);
        assert!(rep_c.delta_j > rep_uc.delta_j);
    }

    #[test]
    fn rejects_invalid_inputs() {
        let norms = ResidualNorms {
            ry: vec![0.1],
            rp: vec![0.1],
            ru: vec![vec![0.0]],
        };
        let mut bad = ctx();
        bad.alpha_lb = 0.0;
        assert!(evaluate_bounds(&bad, &norms, 0.0, false).is_err());
        let neg = ResidualNorms {
            ry: vec![-0.1],
            rp: vec![0.1],
            ru: vec![vec![0.0]],
        };
        assert!(evaluate_bounds(&ctx(), &neg, 0.0, false).is_err());
    }
}
