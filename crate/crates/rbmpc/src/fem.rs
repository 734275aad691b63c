//! Finite-element assembly of all parameter-independent operators.
//!
//! Linear Lagrange elements on intervals/triangles, Dirichlet dofs eliminated.
//! The result of [`assemble`] is an immutable [`AffineOperatorSet`] holding
//! the mass matrix, the affine stiffness components, the Y-inner-product
//! matrix (with a cached Cholesky factorization), the observation matrix,
//! control functionals with their dual norms, the desired-state components,
//! and the constant C_D.

use nalgebra::DVector;

use crate::error::{RbMpcError, Result};
use crate::mesh::{Elements, FESpace};
use crate::problem::{
    ControlShape, DesiredShape, GardingDecl, ObservationDomain, ParameterDomain, PdeProblem,
    SpatialTerm, YInnerProduct,
};
use crate::sparse::{BandedCholesky, CsrMatrix};

/// All parameter-independent assembled quantities of one problem instance.
#[derive(Debug)]
pub struct AffineOperatorSet {
    /// Degrees of freedom 𝒩.
    pub n: usize,
    /// Mass matrix M.
    pub mass: CsrMatrix,
    /// Cholesky factorization of M (projections).
    pub mass_chol: BandedCholesky,
    /// Stiffness components A^q (row = test, column = trial: a^q(w,v) = vᵀ A^q w).
    pub a_comps: Vec<CsrMatrix>,
    /// Y-inner-product matrix.
    pub y_mat: CsrMatrix,
    /// Cholesky factorization of the Y-matrix (Riesz solves).
    pub y_chol: BandedCholesky,
    /// Observation matrix D (the (·,·)_D inner product).
    pub d_mat: CsrMatrix,
    /// Measure of the element-realized observation domain.
    pub d_measure: f64,
    /// Control functionals b_i as dof vectors.
    pub b_vecs: Vec<DVector<f64>>,
    /// Dual norms ‖b_i‖_{Y'}.
    pub b_dual_norms: Vec<f64>,
    /// Desired-state component coefficient vectors y_d^q.
    pub yd_comps: Vec<DVector<f64>>,
    /// Constant C_D = sup ‖v‖_{L²(D)}/‖v‖_Y.
    pub c_d: f64,
    /// Problem definition this set was assembled from.
    pub problem: PdeProblem,
}

impl AffineOperatorSet {
    /// Parameter domain of the underlying problem.
    pub fn domain(&self) -> &ParameterDomain {
        &self.problem.domain
    }

    /// Gårding declaration, if the problem is weakly coercive.
    pub fn garding(&self) -> Option<&GardingDecl> {
        self.problem.garding.as_ref()
    }

    /// Assembles the parameter-dependent stiffness `A(μ)-like` matrix
    /// `Σ_q θ_q A^q + mass_coeff · M` for given effective coefficients.
    pub fn stiffness_at(&self, theta: &[f64], mass_coeff: f64) -> CsrMatrix {
        let mut terms: Vec<(f64, &CsrMatrix)> =
            theta.iter().copied().zip(self.a_comps.iter().map(|a| a)).collect();
        if mass_coeff != 0.0 {
            terms.push((mass_coeff, &self.mass));
        }
        CsrMatrix::linear_combination(&terms)
    }

    /// Riesz representer of a functional (given as a dof vector) in the
    /// Y-inner product: solves `Y r = f`.
    pub fn riesz_representer(&self, f: &DVector<f64>) -> DVector<f64> {
        self.y_chol.solve(f)
    }

    /// Dual norm ‖f‖_{Y'} via the Riesz representer.
    pub fn dual_norm(&self, f: &DVector<f64>) -> f64 {
        let r = self.riesz_representer(f);
        f.dot(&r).max(0.0).sqrt()
    }

    /// Y-norm of a dof vector.
    pub fn y_norm(&self, v: &DVector<f64>) -> f64 {
        self.y_mat.bilinear(v, v).max(0.0).sqrt()
    }

    /// L²-norm of a dof vector.
    pub fn l2_norm(&self, v: &DVector<f64>) -> f64 {
        self.mass.bilinear(v, v).max(0.0).sqrt()
    }

    /// Coercivity lower bound α_LB(μ) of the untransformed form (coercive
    /// problems only).
    pub fn alpha_lb(&self, mu: &[f64]) -> Result<f64> {
        self.problem.domain.check(mu)?;
        let decl = self.problem.alpha_lb.as_ref().ok_or_else(|| {
            RbMpcError::invalid("problem is weakly coercive; use the Gårding transform path")
        })?;
        Ok(decl.eval(mu, &self.problem.theta_a(mu)))
    }
}

/// Element-local quadrature points and weights (degree-2 exact).
fn quad_points(space: &FESpace, e: usize) -> Vec<([f64; 2], f64, Vec<(usize, f64)>)> {
    // Returns (point, weight, [(vertex, basis value at point)...]).
    let mesh = &space.mesh;
    match &mesh.elements {
        Elements::Intervals(elems) => {
            let [a, b] = elems[e];
            let (xa, xb) = (mesh.vertices[a][0], mesh.vertices[b][0]);
            let h = xb - xa;
            // Simpson's rule: endpoints + midpoint.
            vec![
                ([xa, 0.0], h / 6.0, vec![(a, 1.0), (b, 0.0)]),
                ([0.5 * (xa + xb), 0.0], 4.0 * h / 6.0, vec![(a, 0.5), (b, 0.5)]),
                ([xb, 0.0], h / 6.0, vec![(a, 0.0), (b, 1.0)]),
            ]
        }
        Elements::Triangles(elems) => {
            let [v0, v1, v2] = elems[e];
            let area = mesh.element_measure(e);
            let p = [mesh.vertices[v0], mesh.vertices[v1], mesh.vertices[v2]];
            // Edge-midpoint rule, exact for quadratics.
            let mid = |i: usize, j: usize| {
                [(p[i][0] + p[j][0]) * 0.5, (p[i][1] + p[j][1]) * 0.5]
            };
            vec![
                (mid(0, 1), area / 3.0, vec![(v0, 0.5), (v1, 0.5), (v2, 0.0)]),
                (mid(1, 2), area / 3.0, vec![(v0, 0.0), (v1, 0.5), (v2, 0.5)]),
                (mid(0, 2), area / 3.0, vec![(v0, 0.5), (v1, 0.0), (v2, 0.5)]),
            ]
        }
    }
}

/// Accumulates element-local contributions of one spatial term into triplets
/// over the free dofs.
fn assemble_term(
    space: &FESpace,
    term: &SpatialTerm,
    restrict_elems: Option<&[bool]>,
) -> CsrMatrix {
    let mesh = &space.mesh;
    let n = space.n_dofs;
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut add = |test_v: usize, trial_v: usize, val: f64| {
        if let (Some(i), Some(j)) = (space.dof_of_vertex[test_v], space.dof_of_vertex[trial_v]) {
            triplets.push((i, j, val));
        }
    };
    for e in 0..mesh.n_elements() {
        if let Some(mask) = restrict_elems {
            if !mask[e] {
                continue;
            }
        }
        match (&mesh.elements, term) {
            (Elements::Intervals(elems), SpatialTerm::Reaction) => {
                let [a, b] = elems[e];
                let h = mesh.element_measure(e);
                let local = [[2.0, 1.0], [1.0, 2.0]];
                for (li, &vi) in [a, b].iter().enumerate() {
                    for (lj, &vj) in [a, b].iter().enumerate() {
                        add(vi, vj, h / 6.0 * local[li][lj]);
                    }
                }
            }
            (Elements::Intervals(elems), SpatialTerm::Diffusion) => {
                let [a, b] = elems[e];
                let h = mesh.element_measure(e);
                let local = [[1.0, -1.0], [-1.0, 1.0]];
                for (li, &vi) in [a, b].iter().enumerate() {
                    for (lj, &vj) in [a, b].iter().enumerate() {
                        add(vi, vj, local[li][lj] / h);
                    }
                }
            }
            (Elements::Intervals(elems), SpatialTerm::Convection { velocity }) => {
                // ∫ φ_i w φ_j' = w · (∓1/2) pattern.
                let [a, b] = elems[e];
                let w = velocity[0];
                let local = [[-0.5, 0.5], [-0.5, 0.5]];
                for (li, &vi) in [a, b].iter().enumerate() {
                    for (lj, &vj) in [a, b].iter().enumerate() {
                        add(vi, vj, w * local[li][lj]);
                    }
                }
            }
            (Elements::Triangles(elems), term2d) => {
                let vs = elems[e];
                let area = mesh.element_measure(e);
                let p = [
                    mesh.vertices[vs[0]],
                    mesh.vertices[vs[1]],
                    mesh.vertices[vs[2]],
                ];
                // Constant basis gradients: ∇φ_i = (b_i, c_i)/(2|T|).
                let grad = |i: usize| {
                    let j = (i + 1) % 3;
                    let k = (i + 2) % 3;
                    [
                        (p[j][1] - p[k][1]) / (2.0 * area),
                        (p[k][0] - p[j][0]) / (2.0 * area),
                    ]
                };
                match term2d {
                    SpatialTerm::Diffusion => {
                        for li in 0..3 {
                            let gi = grad(li);
                            for lj in 0..3 {
                                let gj = grad(lj);
                                add(vs[li], vs[lj], area * (gi[0] * gj[0] + gi[1] * gj[1]));
                            }
                        }
                    }
                    SpatialTerm::Reaction => {
                        for li in 0..3 {
                            for lj in 0..3 {
                                let m = if li == lj { 2.0 } else { 1.0 };
                                add(vs[li], vs[lj], area / 12.0 * m);
                            }
                        }
                    }
                    SpatialTerm::Convection { velocity } => {
                        // ∫ φ_i (w·∇φ_j) = (w·∇φ_j) · |T|/3.
                        for lj in 0..3 {
                            let gj = grad(lj);
                            let conv = velocity[0] * gj[0] + velocity[1] * gj[1];
                            for li in 0..3 {
                                add(vs[li], vs[lj], conv * area / 3.0);
                            }
                        }
                    }
                }
            }
        }
    }
    // Matrix convention: row = test function, column = trial function, and the
    // local loops above emit (test, trial); a(w, v) = vᵀ A w.
    CsrMatrix::from_triplets(n, n, &triplets)
}

/// Marks elements whose barycenter lies inside the observation domain.
fn observation_mask(space: &FESpace, obs: &ObservationDomain) -> Vec<bool> {
    let mesh = &space.mesh;
    (0..mesh.n_elements())
        .map(|e| match obs {
            ObservationDomain::WholeDomain => true,
            ObservationDomain::Box { x0, x1, y0, y1 } => {
                let c = mesh.element_barycenter(e);
                c[0] >= *x0 && c[0] <= *x1 && c[1] >= *y0 && c[1] <= *y1
            }
        })
        .collect()
}

/// Assembles a control functional as a dof vector.
fn assemble_control(space: &FESpace, shape: &ControlShape) -> Result<DVector<f64>> {
    let mesh = &space.mesh;
    let mut b = DVector::zeros(space.n_dofs);
    match shape {
        ControlShape::BoundaryPoint { x } => {
            // Nearest non-Dirichlet boundary vertex.
            let mut best: Option<(usize, f64)> = None;
            for (vs, _) in &mesh.boundary {
                for &v in vs {
                    if space.dof_of_vertex[v].is_none() {
                        continue;
                    }
                    let p = mesh.vertices[v];
                    let d2 = (p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2);
                    if best.map_or(true, |(_, bd)| d2 < bd) {
                        best = Some((v, d2));
                    }
                }
            }
            let (v, _) = best.ok_or_else(|| {
                RbMpcError::invalid("no free boundary vertex available for point control")
            })?;
            b[space.dof_of_vertex[v].unwrap()] = 1.0;
        }
        ControlShape::GaussianSource { center, amplitude } => {
            for e in 0..mesh.n_elements() {
                for (pt, w, basis) in quad_points(space, e) {
                    let r2 = (pt[0] - center[0]).powi(2) + (pt[1] - center[1]).powi(2);
                    let q = amplitude * (-0.5 * r2).exp();
                    for (v, phi) in basis {
                        if let Some(i) = space.dof_of_vertex[v] {
                            b[i] += w * q * phi;
                        }
                    }
                }
            }
        }
    }
    Ok(b)
}

/// Assembles a desired-state component as a dof coefficient vector.
fn assemble_desired(space: &FESpace, shape: &DesiredShape, obs_mask: &[bool]) -> DVector<f64> {
    let mesh = &space.mesh;
    let mut v = DVector::zeros(space.n_dofs);
    match shape {
        DesiredShape::Constant { value } => {
            v.fill(*value);
        }
        DesiredShape::IndicatorObservation => {
            let elems_vertices: Vec<Vec<usize>> = match &mesh.elements {
                Elements::Intervals(e) => e.iter().map(|x| x.to_vec()).collect(),
                Elements::Triangles(e) => e.iter().map(|x| x.to_vec()).collect(),
            };
            for (e, verts) in elems_vertices.iter().enumerate() {
                if obs_mask[e] {
                    for &vert in verts {
                        if let Some(i) = space.dof_of_vertex[vert] {
                            v[i] = 1.0;
                        }
                    }
                }
            }
        }
    }
    v
}

/// Computes C_D = sqrt(λ_max) of the generalized eigenproblem D v = λ Y v by
/// power iteration on `Y⁻¹ D` with Rayleigh-quotient convergence control.
pub fn compute_c_d(d_mat: &CsrMatrix, y_chol: &BandedCholesky, y_mat: &CsrMatrix) -> Result<f64> {
    let n = d_mat.nrows();
    let mut v = DVector::from_element(n, 1.0);
    // Seed with some asymmetry so symmetric eigenvectors are reachable.
    for i in 0..n {
        v[i] += 1e-3 * ((i % 7) as f64 - 3.0);
    }
    let mut lambda_old = 0.0;
    let max_iter = 20_000;
    for it in 0..max_iter {
        let dv = d_mat.matvec(&v);
        let num = v.dot(&dv);
        let den = y_mat.bilinear(&v, &v);
        let lambda = num / den;
        let mut w = y_chol.solve(&dv);
        let wn = y_mat.bilinear(&w, &w).sqrt();
        if wn < 1e-300 {
            // D annihilates v; restart from a different vector.
            v = DVector::from_fn(n, |i, _| ((i * 2654435761) % 1000) as f64 / 1000.0 + 0.1);
            continue;
        }
        w /= wn;
        let delta = (lambda - lambda_old).abs();
        v = w;
        if it > 3 && delta <= 1e-13 * lambda.abs().max(1e-30) {
            return Ok(lambda.max(0.0).sqrt());
        }
        lambda_old = lambda;
    }
    Err(RbMpcError::NonConvergence {
        method: "C_D power iteration",
        iterations: max_iter,
        detail: format!("last Rayleigh quotient {lambda_old:.6e}"),
    })
}

/// Assembles all parameter-independent operators for a problem on a space.
pub fn assemble(problem: &PdeProblem, space: &FESpace) -> Result<AffineOperatorSet> {
    let mass = assemble_term(space, &SpatialTerm::Reaction, None);
    let mass_chol = BandedCholesky::factorize(&mass)?;
    let a_comps: Vec<CsrMatrix> = problem
        .form
        .iter()
        .map(|c| assemble_term(space, &c.term, None))
        .collect();

    let y_mat = match &problem.y_inner {
        YInnerProduct::Seminorm => assemble_term(space, &SpatialTerm::Diffusion, None),
        YInnerProduct::SymmetrizedForm { reference_mu } => {
            let theta = problem.theta_a(reference_mu);
            let a_ref = CsrMatrix::linear_combination(
                &theta
                    .iter()
                    .copied()
                    .zip(a_comps.iter().map(|a| a))
                    .collect::<Vec<_>>(),
            );
            // ½(A + Aᵀ) via dense-free triplet merge.
            let n = a_ref.nrows();
            let mut triplets = Vec::new();
            for r in 0..n {
                for (c, v) in a_ref.row_entries(r) {
                    triplets.push((r, c, 0.5 * v));
                    triplets.push((c, r, 0.5 * v));
                }
            }
            CsrMatrix::from_triplets(n, n, &triplets)
        }
    };
    let y_chol = BandedCholesky::factorize(&y_mat).map_err(|e| {
        RbMpcError::SingularSystem(format!("Y-inner-product matrix not positive definite: {e}"))
    })?;

    let obs_mask = observation_mask(space, &problem.observation);
    let d_mat = assemble_term(space, &SpatialTerm::Reaction, Some(&obs_mask));
    let d_measure: f64 = (0..space.mesh.n_elements())
        .filter(|&e| obs_mask[e])
        .map(|e| space.mesh.element_measure(e))
        .sum();
    if d_measure <= 0.0 {
        return Err(RbMpcError::invalid(
            "observation subdomain not resolvable: no element barycenter inside",
        ));
    }

    let b_vecs: Vec<DVector<f64>> = problem
        .controls
        .iter()
        .map(|c| assemble_control(space, c))
        .collect::<Result<_>>()?;
    let b_dual_norms: Vec<f64> = b_vecs
        .iter()
        .map(|b| {
            let r = y_chol.solve(b);
            b.dot(&r).max(0.0).sqrt()
        })
        .collect();

    let yd_comps: Vec<DVector<f64>> = problem
        .desired_state
        .iter()
        .map(|c| assemble_desired(space, &c.shape, &obs_mask))
        .collect();

    let c_d = compute_c_d(&d_mat, &y_chol, &y_mat)?;

    Ok(AffineOperatorSet {
        n: space.n_dofs,
        mass,
        mass_chol,
        a_comps,
        y_mat,
        y_chol,
        d_mat,
        d_measure,
        b_vecs,
        b_dual_norms,
        yd_comps,
        c_d,
        problem: problem.clone(),
    })
}

/// L²-projection of a scalar function onto the space: solves `M x = (f, φ)`.
pub fn l2_project(ops: &AffineOperatorSet, space: &FESpace, f: &dyn Fn([f64; 2]) -> f64) -> DVector<f64> {
    let mut rhs = DVector::zeros(space.n_dofs);
    for e in 0..space.mesh.n_elements() {
        for (pt, w, basis) in quad_points(space, e) {
            let fv = f(pt);
            for (v, phi) in basis {
                if let Some(i) = space.dof_of_vertex[v] {
                    rhs[i] += w * fv * phi;
                }
            }
        }
    }
    ops.mass_chol.solve(&rhs)
}
