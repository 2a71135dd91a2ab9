//! Randomized smooth test fields.
//!
//! Arbitrary per-component random functions are fine on the flat tori (one
//! global parallel frame) but are not smooth tensors at the sphere's poles.
//! Random (1,1) tensors are therefore built as Σ aᵣ(x)·Fᵣ with band-limited
//! random scalars aᵣ against a fixed frame of globally smooth tensors with
//! hand-coded chart derivatives: the elementary constant tensors on tori;
//! {δ, the rotation J, ∇z⊗dz} on S².

use super::{ScalarField, TensorField};
use crate::geometry::{EigenBasis, ManifoldKind, QuadratureGrid};
use crate::mat::{Mat2, ZERO_MAT};
use crate::spectral::{synthesize_field, SpectralVector};
use crate::stochastic::rng::CounterStream;

/// A globally smooth (1,1) tensor tabulated with first and second chart
/// partials, plus how it behaves under the metric transpose.
#[derive(Debug, Clone)]
pub struct FrameTensor {
    pub comps: Vec<Mat2>,
    pub partials: Vec<[Mat2; 2]>,
    pub second: Vec<[[Mat2; 2]; 2]>,
    /// Index of the frame member equal to the metric transpose of this one.
    pub transpose_of: usize,
    pub transpose_sign: f64,
}

fn constant_frame(grid: &QuadratureGrid, comps: Mat2, transpose_of: usize) -> FrameTensor {
    let num = grid.num_nodes();
    FrameTensor {
        comps: vec![comps; num],
        partials: vec![[ZERO_MAT; 2]; num],
        second: vec![[[ZERO_MAT; 2]; 2]; num],
        transpose_of,
        transpose_sign: 1.0,
    }
}

/// The smooth tensor frame for a grid's manifold.
pub fn smooth_frames(grid: &QuadratureGrid) -> Vec<FrameTensor> {
    match grid.manifold.kind {
        ManifoldKind::Torus1 { .. } => {
            vec![constant_frame(grid, [[1.0, 0.0], [0.0, 0.0]], 0)]
        }
        ManifoldKind::Torus2 { .. } => {
            let e = |i: usize, j: usize| {
                let mut m = ZERO_MAT;
                m[i][j] = 1.0;
                m
            };
            // Transposes: E00↔E00, E01↔E10, E11↔E11 (flat metric).
            vec![
                constant_frame(grid, e(0, 0), 0),
                constant_frame(grid, e(0, 1), 2),
                constant_frame(grid, e(1, 0), 1),
                constant_frame(grid, e(1, 1), 3),
            ]
        }
        ManifoldKind::Sphere2 => sphere_frames(grid),
    }
}

fn sphere_frames(grid: &QuadratureGrid) -> Vec<FrameTensor> {
    let num = grid.num_nodes();
    let delta = constant_frame(grid, crate::mat::IDENTITY, 0);

    // J: the rotation by π/2 (almost complex structure), ∇J = 0.
    // Components J^θ_φ = −sin θ, J^φ_θ = 1/sin θ; Jᵀ = −J.
    let mut j = FrameTensor {
        comps: vec![ZERO_MAT; num],
        partials: vec![[ZERO_MAT; 2]; num],
        second: vec![[[ZERO_MAT; 2]; 2]; num],
        transpose_of: 1,
        transpose_sign: -1.0,
    };
    // P = ∇z ⊗ dz for z = cos θ: P^θ_θ = sin²θ; symmetric.
    let mut p = FrameTensor {
        comps: vec![ZERO_MAT; num],
        partials: vec![[ZERO_MAT; 2]; num],
        second: vec![[[ZERO_MAT; 2]; 2]; num],
        transpose_of: 2,
        transpose_sign: 1.0,
    };
    for i in 0..num {
        let theta = grid.nodes[i][0];
        let (s, c) = theta.sin_cos();
        j.comps[i][0][1] = -s;
        j.comps[i][1][0] = 1.0 / s;
        j.partials[i][0][0][1] = -c;
        j.partials[i][0][1][0] = -c / (s * s);
        j.second[i][0][0][0][1] = s;
        j.second[i][0][0][1][0] = (1.0 + c * c) / (s * s * s);

        p.comps[i][0][0] = s * s;
        p.partials[i][0][0][0] = (2.0 * theta).sin();
        p.second[i][0][0][0][0] = 2.0 * (2.0 * theta).cos();
    }
    vec![delta, j, p]
}

/// Band-limited random scalar with coefficients damped by 1/(1+μ_k).
pub fn random_smooth_scalar(
    basis: &EigenBasis,
    stream: &mut CounterStream,
    amplitude: f64,
) -> ScalarField {
    let coeffs: Vec<f64> = (0..basis.n())
        .map(|k| amplitude * stream.uniform_symmetric() / (1.0 + basis.mu[k]))
        .collect();
    synthesize_field(basis, &SpectralVector::from_coeffs(coeffs))
}

/// Random smooth (1,1) tensor and its metric transpose, built from the same
/// random scalars: T = Σ aᵣ Fᵣ, Tᵀ = Σ aᵣ (sign_r F_{transpose_of(r)}).
pub fn random_smooth_tensor(
    grid: &QuadratureGrid,
    basis: &EigenBasis,
    stream: &mut CounterStream,
    amplitude: f64,
) -> (TensorField, TensorField) {
    let frames = smooth_frames(grid);
    let scalars: Vec<ScalarField> = frames
        .iter()
        .map(|_| random_smooth_scalar(basis, stream, amplitude))
        .collect();

    let direct = combine(grid, &frames, &scalars, |r| (r, 1.0));
    let transposed = combine(grid, &frames, &scalars, |r| {
        (frames[r].transpose_of, frames[r].transpose_sign)
    });
    (direct, transposed)
}

fn combine(
    grid: &QuadratureGrid,
    frames: &[FrameTensor],
    scalars: &[ScalarField],
    map: impl Fn(usize) -> (usize, f64),
) -> TensorField {
    let num = grid.num_nodes();
    let dim = grid.dim();
    let mut comps = vec![ZERO_MAT; num];
    let mut partials = vec![[ZERO_MAT; 2]; num];
    let mut second = vec![[[ZERO_MAT; 2]; 2]; num];
    for (r, a) in scalars.iter().enumerate() {
        let (fr_idx, sign) = map(r);
        let fr = &frames[fr_idx];
        for i in 0..num {
            let av = sign * a.values[i];
            let ap = &a.partials[i];
            let add = a.plain_second_partials(grid, i);
            for x in 0..2 {
                for y in 0..2 {
                    comps[i][x][y] += av * fr.comps[i][x][y];
                    for l in 0..dim {
                        partials[i][l][x][y] += sign * ap[l] * fr.comps[i][x][y]
                            + av * fr.partials[i][l][x][y];
                        for m in 0..dim {
                            second[i][l][m][x][y] += sign * add[l][m] * fr.comps[i][x][y]
                                + sign * ap[l] * fr.partials[i][m][x][y]
                                + sign * ap[m] * fr.partials[i][l][x][y]
                                + av * fr.second[i][l][m][x][y];
                        }
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
