//! Parametrized PDE problem definitions.
//!
//! A [`PdeProblem`] declares everything the assembler needs: the affine
//! decomposition of the spatial bilinear form, the choice of Y-inner product,
//! control functionals, observation subdomain, desired-state decomposition,
//! the parameter domain, a coercivity lower-bound formula and (for weakly
//! coercive operators) a Gårding shift. Coefficient functions are drawn from
//! a small serializable vocabulary sufficient for both shipped experiments.

use serde::{Deserialize, Serialize};

use crate::error::{RbMpcError, Result};

/// Scalar coefficient function θ(t; μ) from a restricted vocabulary:
/// constants, linear parameter dependence, products, and exponentials in t.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Coeff {
    /// Constant value.
    Const { value: f64 },
    /// `scale · μ[index]`.
    Param { index: usize, scale: f64 },
    /// Product of factors.
    Product { factors: Vec<Coeff> },
    /// `exp(rate(μ) · t)` with a parameter-dependent rate.
    ExpT { rate: Box<Coeff> },
    /// `min(inner(t; μ), cap)`.
    MinCap { inner: Box<Coeff>, cap: f64 },
}

impl Coeff {
    /// Constant shorthand.
    pub fn constant(v: f64) -> Self {
        Coeff::Const { value: v }
    }

    /// `scale · μ[index]` shorthand.
    pub fn param(index: usize, scale: f64) -> Self {
        Coeff::Param { index, scale }
    }

    /// Evaluates the coefficient at time `t` and parameter `mu`.
    pub fn eval(&self, t: f64, mu: &[f64]) -> f64 {
        match self {
            Coeff::Const { value } => *value,
            Coeff::Param { index, scale } => scale * mu[*index],
            Coeff::Product { factors } => factors.iter().map(|f| f.eval(t, mu)).product(),
            Coeff::ExpT { rate } => (rate.eval(t, mu) * t).exp(),
            Coeff::MinCap { inner, cap } => inner.eval(t, mu).min(*cap),
        }
    }
}

/// Box-shaped parameter domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterDomain {
    /// Per-component lower bounds.
    pub lower: Vec<f64>,
    /// Per-component upper bounds.
    pub upper: Vec<f64>,
}

impl ParameterDomain {
    /// Builds a domain, validating `lower ≤ upper` componentwise.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(RbMpcError::invalid("parameter bound length mismatch"));
        }
        for (l, u) in lower.iter().zip(&upper) {
            if l > u {
                return Err(RbMpcError::invalid(format!(
                    "parameter lower bound {l} exceeds upper bound {u}"
                )));
            }
        }
        Ok(ParameterDomain { lower, upper })
    }

    /// Number of parameter components.
    pub fn len(&self) -> usize {
        self.lower.len()
    }

    /// Whether the domain is empty (zero components).
    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    /// Membership test with a small relative slack for round-off.
    pub fn contains(&self, mu: &[f64]) -> bool {
        mu.len() == self.lower.len()
            && mu.iter().zip(self.lower.iter().zip(&self.upper)).all(|(m, (l, u))| {
                let slack = 1e-12 * (1.0 + u.abs());
                *m >= l - slack && *m <= u + slack
            })
    }

    /// Errors unless `mu` lies in the domain.
    pub fn check(&self, mu: &[f64]) -> Result<()> {
        if self.contains(mu) {
            Ok(())
        } else {
            Err(RbMpcError::invalid(format!(
                "parameter {mu:?} outside declared domain [{:?}, {:?}]",
                self.lower, self.upper
            )))
        }
    }
}

/// Parameter-independent spatial operator building blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpatialTerm {
    /// `∫ ∇w·∇v`.
    Diffusion,
    /// `∫ w v`.
    Reaction,
    /// `∫ v (w · ∇u)` with constant velocity `w`.
    Convection { velocity: [f64; 2] },
}

/// One affine component of the bilinear form: `θ(μ) · term`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormComponent {
    pub term: SpatialTerm,
    pub theta: Coeff,
}

/// Choice of Y-inner product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum YInnerProduct {
    /// `(w, v)_Y = ∫ ∇w·∇v` (valid norm once Dirichlet dofs are eliminated).
    Seminorm,
    /// Symmetrized bilinear form `½(a(w,v;μ̄) + a(v,w;μ̄))` at a reference parameter.
    SymmetrizedForm { reference_mu: Vec<f64> },
}

/// Control functional shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlShape {
    /// Point evaluation `b(v) = v(x)` at the boundary vertex nearest `x`
    /// (Neumann flux control in 1D).
    BoundaryPoint { x: [f64; 2] },
    /// Distributed source `b(v) = ∫ q v` with the Gaussian
    /// `q(x) = amplitude · exp(−|x − center|²/2)`.
    GaussianSource { center: [f64; 2], amplitude: f64 },
}

/// Observation subdomain D defining `(·,·)_D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservationDomain {
    /// D = Ω.
    WholeDomain,
    /// Axis-aligned box, realized as the union of elements whose barycenter
    /// lies inside.
    Box { x0: f64, x1: f64, y0: f64, y1: f64 },
}

/// Spatial profile of one desired-state component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DesiredShape {
    /// Nodal interpolant of 1 on the vertices of the realized observation
    /// domain (exact on D for element-aligned domains).
    IndicatorObservation,
    /// Constant value everywhere.
    Constant { value: f64 },
}

/// One affine component of the desired state: `θ(t; μ) · shape`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesiredComponent {
    pub shape: DesiredShape,
    pub theta: Coeff,
}

/// Coercivity lower-bound formula α_LB(μ) for the (possibly transformed) form
/// with respect to the declared Y-inner product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlphaLowerBound {
    /// Explicit formula over μ.
    Explicit { formula: Coeff },
    /// min-Θ bound: `min_q θ_q(μ)` (parametrically coercive problems whose
    /// components are positive semidefinite w.r.t. the Y-inner product).
    MinTheta,
}

impl AlphaLowerBound {
    /// Evaluates the bound at μ.
    pub fn eval(&self, mu: &[f64], theta_a: &[f64]) -> f64 {
        match self {
            AlphaLowerBound::Explicit { formula } => formula.eval(0.0, mu),
            AlphaLowerBound::MinTheta => theta_a.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

/// Gårding data for weakly coercive operators: `a + δ m` is coercive with
/// constant `alpha_shifted` w.r.t. the Y-inner product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GardingDecl {
    /// Shift δ(μ) ≥ 0.
    pub shift: Coeff,
    /// Coercivity constant of the shifted form `a + δ m`.
    pub alpha_shifted: Coeff,
}

/// Complete parametrized PDE problem definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeProblem {
    /// Affine decomposition of a(·,·;μ).
    pub form: Vec<FormComponent>,
    /// Y-inner product choice.
    pub y_inner: YInnerProduct,
    /// Control functionals b_i.
    pub controls: Vec<ControlShape>,
    /// Observation subdomain D.
    pub observation: ObservationDomain,
    /// Desired-state decomposition (empty ⇒ y_d ≡ 0).
    pub desired_state: Vec<DesiredComponent>,
    /// Parameter domain (μ₁, ..., μ_P).
    pub domain: ParameterDomain,
    /// Coercivity lower bound of a(·,·;μ) itself (None for weakly coercive
    /// problems, which must declare `garding` instead).
    pub alpha_lb: Option<AlphaLowerBound>,
    /// Gårding data for weakly coercive problems.
    pub garding: Option<GardingDecl>,
}

impl PdeProblem {
    /// Number of affine components Q_a.
    pub fn q_a(&self) -> usize {
        self.form.len()
    }

    /// Evaluates all θ_a^q at μ.
    pub fn theta_a(&self, mu: &[f64]) -> Vec<f64> {
        self.form.iter().map(|c| c.theta.eval(0.0, mu)).collect()
    }

    /// The 1D reaction-diffusion benchmark: Ω = (0,1), y_t = y_xx + μ₁ y,
    /// Dirichlet at x = 0, Neumann boundary control b(v) = v(1),
    /// observation on all of Ω, zero desired state. Weakly coercive with
    /// Gårding shift δ(μ) = μ₁ (the shifted form is exactly the Y-inner
    /// product, so its coercivity constant is 1).
    pub fn reaction_diffusion_1d() -> Self {
        PdeProblem {
            form: vec![
                FormComponent {
                    term: SpatialTerm::Diffusion,
                    theta: Coeff::constant(1.0),
                },
                FormComponent {
                    term: SpatialTerm::Reaction,
                    theta: Coeff::param(0, -1.0),
                },
            ],
            y_inner: YInnerProduct::Seminorm,
            controls: vec![ControlShape::BoundaryPoint { x: [1.0, 0.0] }],
            observation: ObservationDomain::WholeDomain,
            desired_state: Vec::new(),
            // μ = (μ₁, λ): reaction coefficient and control penalty.
            domain: ParameterDomain::new(vec![1.0, 1e-4], vec![15.0, 1e-1]).unwrap(),
            alpha_lb: None,
            garding: Some(GardingDecl {
                shift: Coeff::param(0, 1.0),
                alpha_shifted: Coeff::constant(1.0),
            }),
        }
    }

    /// The 2D welding benchmark: Ω = (0,5)×(0,1), convection-diffusion with
    /// Péclet number 3.65, Gaussian heat source centered at (3.5, 1),
    /// observation on Ω_s = [1.42,1.58]×[0.47,0.53], desired state 1 on Ω_s.
    ///
    /// Dirichlet conditions are imposed on both the left and right edges so
    /// that the convective boundary terms vanish and the symmetrized form at
    /// μ̄₁ = 1 (the Y-inner product) is positive definite with
    /// α_LB(μ) = min(μ₁, 1).
    pub fn welding_2d() -> Self {
        PdeProblem {
            form: vec![
                FormComponent {
                    term: SpatialTerm::Diffusion,
                    theta: Coeff::param(0, 1.0),
                },
                FormComponent {
                    term: SpatialTerm::Convection {
                        velocity: [3.65, 0.0],
                    },
                    theta: Coeff::constant(1.0),
                },
            ],
            y_inner: YInnerProduct::SymmetrizedForm {
                reference_mu: vec![1.0, 1e-5],
            },
            controls: vec![ControlShape::GaussianSource {
                center: [3.5, 1.0],
                amplitude: 1.0 / (2.0 * std::f64::consts::PI),
            }],
            observation: ObservationDomain::Box {
                x0: 1.42,
                x1: 1.58,
                y0: 0.47,
                y1: 0.53,
            },
            desired_state: vec![DesiredComponent {
                shape: DesiredShape::IndicatorObservation,
                theta: Coeff::constant(1.0),
            }],
            // μ = (μ₁, λ): diffusion coefficient and control penalty.
            domain: ParameterDomain::new(vec![0.5, 1e-6], vec![2.0, 1e-4]).unwrap(),
            alpha_lb: Some(AlphaLowerBound::Explicit {
                formula: Coeff::MinCap {
                    inner: Box::new(Coeff::param(0, 1.0)),
                    cap: 1.0,
                },
            }),
            garding: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coeff_vocabulary_evaluates() {
        let mu = [3.0, 0.5];
        assert_eq!(Coeff::constant(2.5).eval(0.0, &mu), 2.5);
        assert_eq!(Coeff::param(0, -1.0).eval(1.0, &mu), -3.0);
        let prod = Coeff::Product {
            factors: vec![Coeff::constant(2.0), Coeff::param(1, 1.0)],
        };
        assert_eq!(prod.eval(0.0, &mu), 1.0);
        let expt = Coeff::ExpT {
            rate: Box::new(Coeff::param(0, 2.0)),
        };
        assert!((expt.eval(0.5, &mu) - (3.0f64).exp()).abs() < 1e-14);
        let cap = Coeff::MinCap {
            inner: Box::new(Coeff::param(0, 1.0)),
            cap: 1.0,
        };
        assert_eq!(cap.eval(0.0, &mu), 1.0);
        assert_eq!(cap.eval(0.0, &[0.25, 0.0]), 0.25);
    }

    #[test]
    fn coeff_serde_round_trip() {
        let c = Coeff::Product {
            factors: vec![
                Coeff::param(0, 1.5),
                Coeff::ExpT {
                    rate: Box::new(Coeff::constant(-1.0)),
                },
            ],
        };
        let json = serde_json::to_string(&c).unwrap();
        let back: Coeff = serde_json::from_str(&json).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn parameter_domain_membership() {
        let d = ParameterDomain::new(vec![1.0, 1e-4], vec![15.0, 1e-1]).unwrap();
        assert!(d.contains(&[1.0, 1e-4]));
        assert!(d.contains(&[15.0, 1e-1]));
        assert!(!d.contains(&[0.5, 1e-2]));
        assert!(d.check(&[16.0, 1e-2]).is_err());
        assert!(ParameterDomain::new(vec![2.0], vec![1.0]).is_err());
    }

    #[test]
    fn preset_theta_values() {
        let p1 = PdeProblem::reaction_diffusion_1d();
        assert_eq!(p1.theta_a(&[7.0, 1e-2]), vec![1.0, -7.0]);
        let p2 = PdeProblem::welding_2d();
        assert_eq!(p2.theta_a(&[0.5, 1e-5]), vec![0.5, 1.0]);
        assert_eq!(
            p2.alpha_lb.as_ref().unwrap().eval(&[0.5, 1e-5], &[]),
            0.5
        );
        assert_eq!(p2.alpha_lb.as_ref().unwrap().eval(&[1.7, 1e-5], &[]), 1.0);
    }
}
