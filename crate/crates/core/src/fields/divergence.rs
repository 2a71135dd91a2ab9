//! Chart divergence operators.
//!
//! Local-coordinate formulas, per node:
//!
//!   Div X    = ∂_k X^k + Γ^j_{kj} X^k
//!   Div ω    = g^{ij} ∂_i ω_j − Γ^k_{il} g^{il} ω_k
//!   (Div T)_i = ∂_j T^j_i + Γ^j_{jl} T^l_i − Γ^l_{ji} T^j_l
//!
//! `div_div` is the composition of the last two and therefore needs second
//! partials of the tensor and first partials of the Christoffel symbols.

use super::{FieldsError, OneFormField, TensorField, VectorField};
use crate::geometry::QuadratureGrid;
use crate::mat::{ZERO_MAT, ZERO_VEC};

/// Div X = ∂_k X^k + Γ^j_{kj} X^k per node.
pub fn div_vector(grid: &QuadratureGrid, x: &VectorField) -> Result<Vec<f64>, FieldsError> {
    let parts = x.partials.as_ref().ok_or(FieldsError::MissingPartials(1))?;
    let dim = grid.dim();
    let mut out = vec![0.0; grid.num_nodes()];
    for i in 0..grid.num_nodes() {
        let gamma = &grid.christoffels[i];
        let mut s = 0.0;
        for k in 0..dim {
            s += parts[i][k][k];
            let mut tr = 0.0;
            for j in 0..dim {
                tr += gamma[j][k][j];
            }
            s += tr * x.comps[i][k];
        }
        out[i] = s;
    }
    Ok(out)
}

/// Div ω = g^{ij} ∂_i ω_j − Γ^k_{il} g^{il} ω_k per node.
pub fn div_oneform(grid: &QuadratureGrid, w: &OneFormField) -> Result<Vec<f64>, FieldsError> {
    let parts = w.partials.as_ref().ok_or(FieldsError::MissingPartials(1))?;
    let dim = grid.dim();
    let mut out = vec![0.0; grid.num_nodes()];
    for p in 0..grid.num_nodes() {
        let ginv = &grid.metric_inv[p];
        let gamma = &grid.christoffels[p];
        let mut s = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                // parts[p][j][i] = ∂_i ω_j.
                s += ginv[i][j] * parts[p][j][i];
            }
        }
        for k in 0..dim {
            let mut contracted = 0.0;
            for i in 0..dim {
                for l in 0..dim {
                    contracted += gamma[k][i][l] * ginv[i][l];
                }
            }
            s -= contracted * w.comps[p][k];
        }
        out[p] = s;
    }
    Ok(out)
}

/// Div T as a one-form; carries partials when the tensor has second
/// derivative data, so the result can be fed to [`div_oneform`].
pub fn div_tensor(grid: &QuadratureGrid, t: &TensorField) -> Result<OneFormField, FieldsError> {
    let parts = t.partials.as_ref().ok_or(FieldsError::MissingPartials(1))?;
    let dim = grid.dim();
    let num = grid.num_nodes();
    let mut comps = vec![ZERO_VEC; num];
    for p in 0..num {
        let gamma = &grid.christoffels[p];
        for i in 0..dim {
            let mut s = 0.0;
            for j in 0..dim {
                // ∂_j T^j_i
                s += parts[p][j][j][i];
                for l in 0..dim {
                    s += gamma[j][j][l] * t.comps[p][l][i];
                }
            }
            for l in 0..dim {
                for j in 0..dim {
                    s -= gamma[l][j][i] * t.comps[p][j][l];
                }
            }
            comps[p][i] = s;
        }
    }

    let partials = match t.second.as_ref() {
        None => None,
        Some(second) => {
            let mut out = vec![ZERO_MAT; num];
            for p in 0..num {
                let gamma = &grid.christoffels[p];
                let dgamma = &grid.christoffel_partials[p];
                for i in 0..dim {
                    for m in 0..dim {
                        let mut s = 0.0;
                        for j in 0..dim {
                            // ∂_m ∂_j T^j_i
                            s += second[p][m][j][j][i];
                            for l in 0..dim {
                                s += dgamma[m][j][j][l] * t.comps[p][l][i]
                                    + gamma[j][j][l] * parts[p][m][l][i];
                            }
                        }
                        for l in 0..dim {
                            for j in 0..dim {
                                s -= dgamma[m][l][j][i] * t.comps[p][j][l]
                                    + gamma[l][j][i] * parts[p][m][j][l];
                            }
                        }
                        // out[p][i][m] = ∂_m (Div T)_i.
                        out[p][i][m] = s;
                    }
                }
            }
            Some(out)
        }
    };

    Ok(OneFormField { comps, partials })
}

/// Div(Div T) per node; requires second partials of T.
pub fn div_div(grid: &QuadratureGrid, t: &TensorField) -> Result<Vec<f64>, FieldsError> {
    if t.second.is_none() {
        return Err(FieldsError::MissingPartials(2));
    }
    let div_t = div_tensor(grid, t)?;
    div_oneform(grid, &div_t)
}
