//! Small fixed-size tensor algebra on chart components.
//!
//! Everything in this crate lives on 1- or 2-dimensional charts, so tensors
//! are stored as fixed 2×2 arrays with a runtime `dim`; unused entries are
//! zero. Index convention for (1,1) tensors: `a[i][j] = A^i_j` (upper first).

pub type Vec2 = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];
/// Christoffel symbols Γ^i_{jk}, indexed `[i][j][k]`.
pub type Gamma2 = [[[f64; 2]; 2]; 2];

pub const ZERO_VEC: Vec2 = [0.0; 2];
pub const ZERO_MAT: Mat2 = [[0.0; 2]; 2];
pub const ZERO_GAMMA: Gamma2 = [[[0.0; 2]; 2]; 2];

/// Kronecker δ^i_j.
pub const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

pub fn mat_add(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = ZERO_MAT;
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][j] + b[i][j];
        }
    }
    out
}

pub fn mat_scale(a: &Mat2, s: f64) -> Mat2 {
    let mut out = ZERO_MAT;
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = s * a[i][j];
        }
    }
    out
}

/// Composition (A∘B)^i_k = A^i_j B^j_k.
pub fn mat_mul(a: &Mat2, b: &Mat2, dim: usize) -> Mat2 {
    let mut out = ZERO_MAT;
    for i in 0..dim {
        for k in 0..dim {
            let mut s = 0.0;
            for j in 0..dim {
                s += a[i][j] * b[j][k];
            }
            out[i][k] = s;
        }
    }
    out
}

/// tr(A∘B) = A^i_j B^j_i.
pub fn trace_product(a: &Mat2, b: &Mat2, dim: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            s += a[i][j] * b[j][i];
        }
    }
    s
}

/// Metric transpose: (Aᵀ)^i_j = g^{ik} g_{jl} A^l_k.
pub fn metric_transpose(a: &Mat2, g: &Mat2, g_inv: &Mat2, dim: usize) -> Mat2 {
    let mut out = ZERO_MAT;
    for i in 0..dim {
        for j in 0..dim {
            let mut s = 0.0;
            for k in 0..dim {
                for l in 0..dim {
                    s += g_inv[i][k] * g[j][l] * a[l][k];
                }
            }
            out[i][j] = s;
        }
    }
    out
}

/// ‖X‖²_g for a contravariant vector.
pub fn vector_norm_sq(x: &Vec2, g: &Mat2, dim: usize) -> f64 {
    let mut s = 0.0;
    for a in 0..dim {
        for b in 0..dim {
            s += g[a][b] * x[a] * x[b];
        }
    }
    s
}

/// g(X, Y) for contravariant vectors.
pub fn vector_inner(x: &Vec2, y: &Vec2, g: &Mat2, dim: usize) -> f64 {
    let mut s = 0.0;
    for a in 0..dim {
        for b in 0..dim {
            s += g[a][b] * x[a] * y[b];
        }
    }
    s
}

/// ‖ω‖²_g for a covariant one-form.
pub fn oneform_norm_sq(w: &Vec2, g_inv: &Mat2, dim: usize) -> f64 {
    let mut s = 0.0;
    for a in 0..dim {
        for b in 0..dim {
            s += g_inv[a][b] * w[a] * w[b];
        }
    }
    s
}

/// ‖A‖²_g = A^a_b A_a^b for a (1,1) tensor.
pub fn tensor_norm_sq(a: &Mat2, g: &Mat2, g_inv: &Mat2, dim: usize) -> f64 {
    // Lower: A_{ab} = g_{ac} A^c_b, then contract with both inverse metrics.
    let mut low = ZERO_MAT;
    for i in 0..dim {
        for j in 0..dim {
            let mut s = 0.0;
            for c in 0..dim {
                s += g[i][c] * a[c][j];
            }
            low[i][j] = s;
        }
    }
    let mut n2 = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            for k in 0..dim {
                for l in 0..dim {
                    n2 += g_inv[i][k] * g_inv[j][l] * low[i][j] * low[k][l];
                }
            }
        }
    }
    n2
}

/// Smallest eigenvalue of a (1,1) tensor viewed as a g-self-adjoint operator,
/// i.e. the smallest κ with det(B − κ g) = 0 where B_{ab} = ½(g_{ac}A^c_b + g_{bc}A^c_a).
pub fn min_eigenvalue_wrt_metric(a: &Mat2, g: &Mat2, dim: usize) -> f64 {
    // Lower the upper index and symmetrize.
    let mut b = ZERO_MAT;
    for i in 0..dim {
        for j in 0..dim {
            let mut s = 0.0;
            for c in 0..dim {
                s += g[i][c] * a[c][j];
            }
            b[i][j] = s;
        }
    }
    let b01 = 0.5 * (b[0][1] + b[1][0]);
    if dim == 1 {
        return b[0][0] / g[0][0];
    }
    // det(B − κ g) = aκ² + bκ + c with a = det g > 0.
    let qa = g[0][0] * g[1][1] - g[0][1] * g[0][1];
    let qb = -(b[0][0] * g[1][1] + b[1][1] * g[0][0] - 2.0 * b01 * g[0][1]);
    let qc = b[0][0] * b[1][1] - b01 * b01;
    let disc = (qb * qb - 4.0 * qa * qc).max(0.0);
    (-qb - disc.sqrt()) / (2.0 * qa)
}
