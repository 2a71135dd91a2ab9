//! Coefficient models, sampled tensor fields and the chart divergence
//! calculus.
//!
//! Fields are represented by their chart components at quadrature nodes
//! together with whatever partial-derivative data the divergence operators
//! need; operators that require missing derivative data fail with
//! [`FieldsError::MissingPartials`] instead of falling back to numerical
//! differentiation.

mod checks;
mod divergence;
mod frames;
mod models;
mod standard_form;
pub(crate) mod truncation;

pub use checks::{
    check_geometry_compat, check_growth, check_parabolicity, CompatReport, GrowthReport,
    ParabolicityReport, GEOMCOMP_TOL,
};
pub use divergence::{div_div, div_oneform, div_tensor, div_vector};
pub use frames::{random_smooth_scalar, random_smooth_tensor, smooth_frames, FrameTensor};
pub use models::{CoefficientModel, GrowthParts, NoiseModel};
pub use standard_form::{from_standard_form, StandardFormModel};
pub use truncation::{chi, chi_d1, chi_d2, noise_cutoff, noise_cutoff_d1};

use crate::geometry::QuadratureGrid;
use crate::mat::{Mat2, Vec2, ZERO_MAT, ZERO_VEC};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FieldsError {
    #[error("field carries no derivative data of order {0}")]
    MissingPartials(usize),
    #[error("adaptive Simpson quadrature failed to converge (depth > {0})")]
    QuadratureFailure(usize),
}

/// Scalar field with first and second derivative data.
///
/// `partials` are the covariant ∂_a u, `grads` the contravariant g^{ab}∂_b u,
/// and `hess` the (1,1) covariant Hessian H̃^a_b = ∇^a ∇_b u.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub values: Vec<f64>,
    pub partials: Vec<Vec2>,
    pub grads: Vec<Vec2>,
    pub hess: Vec<Mat2>,
}

impl ScalarField {
    /// Build from plain chart data: values, ∂_a u and ∂_a∂_b u per node.
    /// Gradients and the covariant Hessian are filled in from the metric.
    pub fn from_chart_data(
        grid: &QuadratureGrid,
        values: Vec<f64>,
        partials: Vec<Vec2>,
        second: Vec<Mat2>,
    ) -> Self {
        let dim = grid.dim();
        let num = grid.num_nodes();
        let mut grads = vec![ZERO_VEC; num];
        let mut hess = vec![ZERO_MAT; num];
        for i in 0..num {
            let ginv = &grid.metric_inv[i];
            let gamma = &grid.christoffels[i];
            for a in 0..dim {
                for b in 0..dim {
                    grads[i][a] += ginv[a][b] * partials[i][b];
                }
            }
            // H_{cb} = ∂_c∂_b u − Γ^d_{cb} ∂_d u, then raise the first index.
            let mut h_low = ZERO_MAT;
            for c in 0..dim {
                for b in 0..dim {
                    let mut v = second[i][c][b];
                    for d in 0..dim {
                        v -= gamma[d][c][b] * partials[i][d];
                    }
                    h_low[c][b] = v;
                }
            }
            for a in 0..dim {
                for b in 0..dim {
                    for c in 0..dim {
                        hess[i][a][b] += ginv[a][c] * h_low[c][b];
                    }
                }
            }
        }
        ScalarField {
            values,
            partials,
            grads,
            hess,
        }
    }

    /// Plain second partials ∂_c∂_b u at node i, recovered from the
    /// tabulated covariant Hessian: ∂_c∂_b u = g_{ca} H̃^a_b + Γ^d_{cb} ∂_d u.
    pub fn plain_second_partials(&self, grid: &QuadratureGrid, i: usize) -> Mat2 {
        let dim = grid.dim();
        let g = &grid.metric[i];
        let gamma = &grid.christoffels[i];
        let mut out = ZERO_MAT;
        for c in 0..dim {
            for b in 0..dim {
                let mut v = 0.0;
                for a in 0..dim {
                    v += g[c][a] * self.hess[i][a][b];
                }
                for d in 0..dim {
                    v += gamma[d][c][b] * self.partials[i][d];
                }
                out[c][b] = v;
            }
        }
        out
    }
}

/// Contravariant vector field samples X^i, optionally with ∂_j X^i
/// (stored as `partials[node][i][j]`).
#[derive(Debug, Clone)]
pub struct VectorField {
    pub comps: Vec<Vec2>,
    pub partials: Option<Vec<Mat2>>,
}

/// One-form samples ω_i, optionally with ∂_j ω_i
/// (stored as `partials[node][i][j]`).
#[derive(Debug, Clone)]
pub struct OneFormField {
    pub comps: Vec<Vec2>,
    pub partials: Option<Vec<Mat2>>,
}

/// (1,1) tensor field samples T^i_j with optional first partials
/// `partials[node][l] = ∂_l T` and second partials
/// `second[node][l][m] = ∂_l ∂_m T`.
#[derive(Debug, Clone)]
pub struct TensorField {
    pub comps: Vec<Mat2>,
    pub partials: Option<Vec<[Mat2; 2]>>,
    pub second: Option<Vec<[[Mat2; 2]; 2]>>,
}

impl TensorField {
    /// Metric transpose of the field, with derivative data transposed
    /// alongside (the metric transpose commutes with chart partials only on
    /// flat charts, so the transpose is recomputed from ∂g tables).
    pub fn metric_transpose(&self, grid: &QuadratureGrid) -> TensorField {
        let dim = grid.dim();
        let num = grid.num_nodes();
        let mut comps = vec![ZERO_MAT; num];
        for i in 0..num {
            comps[i] =
                crate::mat::metric_transpose(&self.comps[i], &grid.metric[i], &grid.metric_inv[i], dim);
        }
        // ∂_l (Aᵀ)^a_b = ∂_l (g^{ak} g_{bm} A^m_k) by the product rule.
        let partials = self.partials.as_ref().map(|parts| {
            (0..num)
                .map(|i| {
                    let mut out = [ZERO_MAT; 2];
                    for l in 0..dim {
                        out[l] = transpose_partial(
                            grid,
                            i,
                            l,
                            &self.comps[i],
                            &parts[i][l],
                            dim,
                        );
                    }
                    out
                })
                .collect()
        });
        TensorField {
            comps,
            partials,
            second: None,
        }
    }
}

fn transpose_partial(
    grid: &QuadratureGrid,
    i: usize,
    l: usize,
    a: &Mat2,
    da: &Mat2,
    dim: usize,
) -> Mat2 {
    let g = &grid.metric[i];
    let ginv = &grid.metric_inv[i];
    let dg = &grid.metric_partials[i][l];
    let dginv = &grid.metric_inv_partials[i][l];
    let mut out = ZERO_MAT;
    for p in 0..dim {
        for q in 0..dim {
            let mut v = 0.0;
            for k in 0..dim {
                for m in 0..dim {
                    v += dginv[p][k] * g[q][m] * a[m][k]
                        + ginv[p][k] * dg[q][m] * a[m][k]
                        + ginv[p][k] * g[q][m] * da[m][k];
                }
            }
            out[p][q] = v;
        }
    }
    out
}

/// The differential du as a one-form with partials.
pub fn oneform_du(grid: &QuadratureGrid, u: &ScalarField) -> OneFormField {
    let num = grid.num_nodes();
    let mut comps = vec![ZERO_VEC; num];
    let mut partials = vec![ZERO_MAT; num];
    for i in 0..num {
        comps[i] = u.partials[i];
        let second = u.plain_second_partials(grid, i);
        // ∂_j ω_i = ∂_j ∂_i u.
        for a in 0..grid.dim() {
            for j in 0..grid.dim() {
                partials[i][a][j] = second[j][a];
            }
        }
    }
    OneFormField {
        comps,
        partials: Some(partials),
    }
}

/// The gradient ∇u as a contravariant vector field with partials.
pub fn gradient_vector_field(grid: &QuadratureGrid, u: &ScalarField) -> VectorField {
    let dim = grid.dim();
    let num = grid.num_nodes();
    let mut comps = vec![ZERO_VEC; num];
    let mut partials = vec![ZERO_MAT; num];
    for i in 0..num {
        comps[i] = u.grads[i];
        let second = u.plain_second_partials(grid, i);
        for a in 0..dim {
            for j in 0..dim {
                let mut v = 0.0;
                for k in 0..dim {
                    v += grid.metric_inv_partials[i][j][a][k] * u.partials[i][k]
                        + grid.metric_inv[i][a][k] * second[j][k];
                }
                partials[i][a][j] = v;
            }
        }
    }
    VectorField {
        comps,
        partials: Some(partials),
    }
}

/// Samples of the flux f_x(u(x)) along a solution, with chart partials via
/// the chain rule ∂_j f^i = (∂_j f^i)|_λ + (f′)^i ∂_j u.
pub fn flux_along_solution(
    grid: &QuadratureGrid,
    model: &CoefficientModel,
    u: &ScalarField,
) -> VectorField {
    let dim = grid.dim();
    let num = grid.num_nodes();
    let mut comps = vec![ZERO_VEC; num];
    let mut partials = vec![ZERO_MAT; num];
    for i in 0..num {
        let x = &grid.nodes[i];
        let lam = u.values[i];
        comps[i] = model.flux(x, lam);
        let fx = model.flux_xpartials(x, lam);
        let fl = model.flux_dlambda(x, lam);
        for a in 0..dim {
            for j in 0..dim {
                partials[i][a][j] = fx[a][j] + fl[a] * u.partials[i][j];
            }
        }
    }
    VectorField {
        comps,
        partials: Some(partials),
    }
}

/// Samples of the flux with λ frozen: x ↦ f_x(λ).
pub fn flux_frozen_lambda(
    grid: &QuadratureGrid,
    model: &CoefficientModel,
    lambda: f64,
) -> VectorField {
    let num = grid.num_nodes();
    let mut comps = vec![ZERO_VEC; num];
    let mut partials = vec![ZERO_MAT; num];
    for i in 0..num {
        let x = &grid.nodes[i];
        comps[i] = model.flux(x, lambda);
        partials[i] = model.flux_xpartials(x, lambda);
    }
    VectorField {
        comps,
        partials: Some(partials),
    }
}

/// Samples of the diffusion tensor with λ frozen: x ↦ A_x(λ), with first and
/// second chart partials.
pub fn tensor_frozen_lambda(
    grid: &QuadratureGrid,
    model: &CoefficientModel,
    lambda: f64,
) -> TensorField {
    let num = grid.num_nodes();
    let mut comps = vec![ZERO_MAT; num];
    let mut partials = vec![[ZERO_MAT; 2]; num];
    let mut second = vec![[[ZERO_MAT; 2]; 2]; num];
    for i in 0..num {
        let x = &grid.nodes[i];
        comps[i] = model.diffusion(x, lambda);
        partials[i] = model.diffusion_xpartials(x, lambda);
        second[i] = model.diffusion_x2partials(x, lambda);
    }
    TensorField {
        comps,
        partials: Some(partials),
        second: Some(second),
    }
}

/// Samples of A_x(u(x)) along a solution with full derivative data:
///
///   ∂_l T = (∂_l A)|_λ + A′ ∂_l u
///   ∂_l∂_m T = (∂_l∂_m A)|_λ + (∂_m A′) ∂_l u + (∂_l A′) ∂_m u
///              + A″ ∂_l u ∂_m u + A′ ∂_l∂_m u.
pub fn tensor_along_solution(
    grid: &QuadratureGrid,
    model: &CoefficientModel,
    u: &ScalarField,
) -> TensorField {
    let dim = grid.dim();
    let num = grid.num_nodes();
    let mut comps = vec![ZERO_MAT; num];
    let mut partials = vec![[ZERO_MAT; 2]; num];
    let mut second = vec![[[ZERO_MAT; 2]; 2]; num];
    for i in 0..num {
        let x = &grid.nodes[i];
        let lam = u.values[i];
        let du = &u.partials[i];
        let ddu = u.plain_second_partials(grid, i);

        comps[i] = model.diffusion(x, lam);
        let ax = model.diffusion_xpartials(x, lam);
        let al = model.diffusion_dlambda(x, lam);
        let all = model.diffusion_dlambda2(x, lam);
        let alx = model.diffusion_dlambda_xpartials(x, lam);
        let axx = model.diffusion_x2partials(x, lam);

        for l in 0..dim {
            for r in 0..2 {
                for c in 0..2 {
                    partials[i][l][r][c] = ax[l][r][c] + al[r][c] * du[l];
                }
            }
        }
        for l in 0..dim {
            for m in 0..dim {
                for r in 0..2 {
                    for c in 0..2 {
                        second[i][l][m][r][c] = axx[l][m][r][c]
                            + alx[m][r][c] * du[l]
                            + alx[l][r][c] * du[m]
                            + all[r][c] * du[l] * du[m]
                            + al[r][c] * ddu[l][m];
                    }
                }
            }
        }
    }
    TensorField {
        comps,
        partials: Some(partials),
        second: Some(second),
    }
}
