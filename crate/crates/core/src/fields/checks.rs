//! Structural checks on coefficient models: strict parabolicity, the growth
//! bound and the geometry compatibility condition. All three are
//! sampling-based over the quadrature nodes and a declared λ-range, and
//! produce reports rather than errors.

use super::{div_div, div_vector, flux_frozen_lambda, tensor_frozen_lambda, CoefficientModel};
use crate::geometry::QuadratureGrid;
use crate::mat::{min_eigenvalue_wrt_metric, oneform_norm_sq, tensor_norm_sq, vector_norm_sq};

/// Pass threshold for the geometry compatibility residual.
pub const GEOMCOMP_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct ParabolicityReport {
    pub min_eigenvalue: f64,
    pub declared_c: f64,
    /// Whether the declared constant is strictly positive.
    pub strict: bool,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct GrowthReport {
    /// Tightest empirical C̄ over the sampled nodes and λ values.
    pub empirical_c: f64,
    pub declared_c: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct CompatReport {
    pub max_residual: f64,
    pub pass: bool,
}

/// Minimum eigenvalue of the g-symmetrized A′ over nodes × λ samples,
/// compared against the model's declared constant.
pub fn check_parabolicity(
    model: &CoefficientModel,
    grid: &QuadratureGrid,
    lambda_samples: &[f64],
) -> ParabolicityReport {
    assert!(!lambda_samples.is_empty());
    let dim = grid.dim();
    let mut min_eig = f64::INFINITY;
    for &lam in lambda_samples {
        for i in 0..grid.num_nodes() {
            let aprime = model.diffusion_dlambda(&grid.nodes[i], lam);
            let eig = min_eigenvalue_wrt_metric(&aprime, &grid.metric[i], dim);
            min_eig = min_eig.min(eig);
        }
    }
    let declared = model.parabolicity_c();
    ParabolicityReport {
        min_eigenvalue: min_eig,
        declared_c: declared,
        strict: declared > 0.0,
        pass: min_eig >= declared - 1e-12,
    }
}

/// Empirical growth constant: max over nodes × λ of
/// (‖f‖ + ‖A‖ + ‖λA′‖ + ‖Div A‖)/(1+|λ|), checked against the declared C̄.
/// Models without a boundedness claim fail by definition.
pub fn check_growth(
    model: &CoefficientModel,
    grid: &QuadratureGrid,
    lambda_samples: &[f64],
) -> GrowthReport {
    let dim = grid.dim();
    let mut empirical: f64 = 0.0;
    for &lam in lambda_samples {
        // ‖Div A(·,λ)‖ needs the frozen-λ tensor divergence once per λ.
        let frozen = tensor_frozen_lambda(grid, model, lam);
        let div_a = super::div_tensor(grid, &frozen).expect("frozen tensor has partials");
        for i in 0..grid.num_nodes() {
            let x = &grid.nodes[i];
            let g = &grid.metric[i];
            let ginv = &grid.metric_inv[i];
            let f_norm = vector_norm_sq(&model.flux(x, lam), g, dim).max(0.0).sqrt();
            let a_norm = tensor_norm_sq(&model.diffusion(x, lam), g, ginv, dim)
                .max(0.0)
                .sqrt();
            let ap_norm = tensor_norm_sq(&model.diffusion_dlambda(x, lam), g, ginv, dim)
                .max(0.0)
                .sqrt();
            let diva_norm = oneform_norm_sq(&div_a.comps[i], ginv, dim).max(0.0).sqrt();
            let num = f_norm + a_norm + lam.abs() * ap_norm + diva_norm;
            empirical = empirical.max(num / (1.0 + lam.abs()));
        }
    }
    let declared = model.growth_claim(dim);
    let pass = declared.is_some_and(|c| empirical <= c * (1.0 + 1e-9));
    GrowthReport {
        empirical_c: empirical,
        declared_c: declared,
        pass,
    }
}

/// Residual of Div f_x(λ) = Div Div A_x(λ) with λ frozen, in L²(M),
/// maximized over the λ samples.
pub fn check_geometry_compat(
    model: &CoefficientModel,
    grid: &QuadratureGrid,
    lambda_samples: &[f64],
) -> CompatReport {
    let mut max_residual: f64 = 0.0;
    for &lam in lambda_samples {
        let div_f = div_vector(grid, &flux_frozen_lambda(grid, model, lam))
            .expect("frozen flux has partials");
        let dd_a = div_div(grid, &tensor_frozen_lambda(grid, model, lam))
            .expect("frozen tensor has second partials");
        let diff: Vec<f64> = div_f.iter().zip(&dd_a).map(|(a, b)| a - b).collect();
        max_residual = max_residual.max(grid.l2_norm(&diff));
    }
    CompatReport {
        max_residual,
        pass: max_residual <= GEOMCOMP_TOL,
    }
}
