//! Coefficient-space utilities: projection, synthesis and the Λˢ scale.
//!
//! A state is a real coefficient vector against an [`EigenBasis`]. Since
//! Λˢ = (I−Δ)^{s/2} acts diagonally (multiplier λ_k^s), all Sobolev norms and
//! products are computed in coefficient space; quadrature-based norms appear
//! only in cross-validation tests.

use crate::fields::ScalarField;
use crate::geometry::{EigenBasis, GeometryError, QuadratureGrid};
use crate::mat::{Vec2, ZERO_MAT, ZERO_VEC};
use crate::numeric::{pairwise_sum_by, pairwise_dot};

/// Coefficients α_1..α_n of a state u = Σ α_k e_k.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralVector {
    pub coeffs: Vec<f64>,
}

impl SpectralVector {
    pub fn zeros(n: usize) -> Self {
        SpectralVector {
            coeffs: vec![0.0; n],
        }
    }

    pub fn unit(n: usize, slot: usize) -> Self {
        let mut v = Self::zeros(n);
        v.coeffs[slot] = 1.0;
        v
    }

    pub fn from_coeffs(coeffs: Vec<f64>) -> Self {
        SpectralVector { coeffs }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// Euclidean (= L²) norm of the coefficients.
    pub fn norm(&self) -> f64 {
        pairwise_dot(&self.coeffs, &self.coeffs).max(0.0).sqrt()
    }

    pub fn axpy(&mut self, a: f64, other: &SpectralVector) {
        debug_assert_eq!(self.len(), other.len());
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += a * y;
        }
    }

    pub fn scaled(&self, a: f64) -> SpectralVector {
        SpectralVector {
            coeffs: self.coeffs.iter().map(|c| a * c).collect(),
        }
    }
}

/// L² projection onto the first `n` modes: α_k = ⟨samples, e_k⟩_quad.
///
/// The coefficients do not depend on which Sobolev index the projection is
/// taken in, so the plain L² pairing is the only one needed.
pub fn project(
    grid: &QuadratureGrid,
    basis: &EigenBasis,
    samples: &[f64],
    n: usize,
) -> Result<SpectralVector, GeometryError> {
    if samples.len() != grid.num_nodes() {
        return Err(GeometryError::LengthMismatch {
            got: samples.len(),
            expected: grid.num_nodes(),
        });
    }
    assert!(n <= basis.n(), "projection order exceeds basis size");
    let coeffs = (0..n)
        .map(|k| {
            pairwise_sum_by(0..samples.len(), &|i| {
                grid.weights[i] * samples[i] * basis.value(k, i)
            })
        })
        .collect();
    Ok(SpectralVector { coeffs })
}

/// Node values of u = Σ α_k e_k.
pub fn synthesize_values(basis: &EigenBasis, v: &SpectralVector) -> Vec<f64> {
    debug_assert_eq!(v.len(), basis.n());
    let num_nodes = basis.num_nodes();
    let mut out = vec![0.0; num_nodes];
    for k in 0..v.len() {
        let a = v.coeffs[k];
        if a == 0.0 {
            continue;
        }
        let row = basis.values_row(k);
        for i in 0..num_nodes {
            out[i] += a * row[i];
        }
    }
    out
}

/// Full synthesis with first and second derivative data from the tabulated
/// basis gradients and Hessians.
pub fn synthesize_field(basis: &EigenBasis, v: &SpectralVector) -> ScalarField {
    debug_assert_eq!(v.len(), basis.n());
    let num_nodes = basis.num_nodes();
    let mut values = vec![0.0; num_nodes];
    let mut partials: Vec<Vec2> = vec![ZERO_VEC; num_nodes];
    let mut grads: Vec<Vec2> = vec![ZERO_VEC; num_nodes];
    let mut hess = vec![ZERO_MAT; num_nodes];
    for k in 0..v.len() {
        let a = v.coeffs[k];
        if a == 0.0 {
            continue;
        }
        for i in 0..num_nodes {
            values[i] += a * basis.value(k, i);
            let p = basis.partial(k, i);
            let g = basis.grad(k, i);
            let h = basis.hess(k, i);
            for d in 0..2 {
                partials[i][d] += a * p[d];
                grads[i][d] += a * g[d];
            }
            for r in 0..2 {
                for c in 0..2 {
                    hess[i][r][c] += a * h[r][c];
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

/// Coefficient-wise Λˢ: multiply slot k by λ_k^s.
pub fn apply_lambda_s(basis: &EigenBasis, v: &SpectralVector, s: f64) -> SpectralVector {
    debug_assert_eq!(v.len(), basis.n());
    SpectralVector {
        coeffs: v
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, a)| a * basis.lambda[k].powf(s))
            .collect(),
    }
}

/// Hˢ scalar product ⟨u, v⟩_s = Σ λ_k^{2s} α_k β_k.
pub fn sobolev_inner(basis: &EigenBasis, u: &SpectralVector, v: &SpectralVector, s: f64) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    pairwise_sum_by(0..u.len(), &|k| {
        basis.lambda[k].powf(2.0 * s) * u.coeffs[k] * v.coeffs[k]
    })
}

/// Hˢ norm (Σ λ_k^{2s} α_k²)^{1/2}.
pub fn sobolev_norm(basis: &EigenBasis, v: &SpectralVector, s: f64) -> f64 {
    sobolev_inner(basis, v, v, s).max(0.0).sqrt()
}

/// H⁻¹ norm of a functional known through its pairings ⟨F, e_k⟩, k ≤ n:
/// (Σ λ_k^{-2} ⟨F, e_k⟩²)^{1/2}.
pub fn hminus1_norm_of_functional(basis: &EigenBasis, rhs_pairings: &[f64]) -> f64 {
    debug_assert!(rhs_pairings.len() <= basis.n());
    pairwise_sum_by(0..rhs_pairings.len(), &|k| {
        let p = rhs_pairings[k] / basis.lambda[k];
        p * p
    })
    .max(0.0)
    .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_basis, build_grid, ManifoldSpec};
    use crate::mat::vector_norm_sq;
    use std::f64::consts::PI;

    fn setup() -> (QuadratureGrid, EigenBasis) {
        let spec = ManifoldSpec::torus1(2.0 * PI);
        let grid = build_grid(&spec, &[64]).unwrap();
        let basis = build_basis(&spec, &grid, 9).unwrap();
        (grid, basis)
    }

    #[test]
    fn project_recovers_basis_functions() {
        let (grid, basis) = setup();
        let samples: Vec<f64> = basis.values_row(3).to_vec();
        let v = project(&grid, &basis, &samples, basis.n()).unwrap();
        for (k, &c) in v.coeffs.iter().enumerate() {
            let target = if k == 3 { 1.0 } else { 0.0 };
            assert!((c - target).abs() < 1e-10);
        }
    }

    #[test]
    fn project_zero() {
        let (grid, basis) = setup();
        let v = project(&grid, &basis, &vec![0.0; grid.num_nodes()], 9).unwrap();
        assert!(v.coeffs.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn project_analytic_inner_products() {
        // cos x + 2 sin 2x against the √π-normalized modes.
        let (grid, basis) = setup();
        let samples: Vec<f64> = grid
            .nodes
            .iter()
            .map(|p| p[0].cos() + 2.0 * (2.0 * p[0]).sin())
            .collect();
        let v = project(&grid, &basis, &samples, 9).unwrap();
        assert_eq!(basis.labels[1], vec![1, 0]);
        assert_eq!(basis.labels[4], vec![2, 1]);
        assert!((v.coeffs[1] - PI.sqrt()).abs() < 1e-10);
        assert!((v.coeffs[4] - 2.0 * PI.sqrt()).abs() < 1e-10);
        for k in [0, 2, 3, 5, 6, 7, 8] {
            assert!(v.coeffs[k].abs() < 1e-10);
        }
    }

    #[test]
    fn synthesize_unit_vectors_and_linearity() {
        let (_, basis) = setup();
        let ek = synthesize_values(&basis, &SpectralVector::unit(9, 4));
        for (i, &x) in ek.iter().enumerate() {
            assert_eq!(x, basis.value(4, i));
        }
        let v = SpectralVector::from_coeffs((0..9).map(|k| 0.1 * k as f64).collect());
        let w = SpectralVector::from_coeffs((0..9).map(|k| (k as f64).cos()).collect());
        let mut lin = v.scaled(2.0);
        lin.axpy(-3.0, &w);
        let direct = synthesize_values(&basis, &lin);
        let sv = synthesize_values(&basis, &v);
        let sw = synthesize_values(&basis, &w);
        for i in 0..direct.len() {
            assert!((direct[i] - (2.0 * sv[i] - 3.0 * sw[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let (grid, basis) = setup();
        let v = SpectralVector::from_coeffs((0..9).map(|k| (k as f64 + 1.0).recip()).collect());
        let samples = synthesize_values(&basis, &v);
        let back = project(&grid, &basis, &samples, 9).unwrap();
        for k in 0..9 {
            assert!((back.coeffs[k] - v.coeffs[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn lambda_s_powers() {
        let (_, basis) = setup();
        let v = SpectralVector::from_coeffs((0..9).map(|k| 1.0 + k as f64).collect());
        let id = apply_lambda_s(&basis, &v, 0.0);
        assert_eq!(id, v);
        let e2 = apply_lambda_s(&basis, &SpectralVector::unit(9, 3), 2.0);
        assert!((e2.coeffs[3] - (1.0 + basis.mu[3])).abs() < 1e-12);
        let roundtrip = apply_lambda_s(&basis, &apply_lambda_s(&basis, &v, 1.7), -1.7);
        for k in 0..9 {
            assert!((roundtrip.coeffs[k] - v.coeffs[k]).abs() < 1e-12 * v.coeffs[k].abs());
        }
    }

    #[test]
    fn sobolev_norm_on_eigenfunctions() {
        let (_, basis) = setup();
        for s in [-1.0, 0.0, 1.0, 2.0, 0.5] {
            for k in 0..9 {
                let n = sobolev_norm(&basis, &SpectralVector::unit(9, k), s);
                assert!((n - basis.lambda[k].powf(s)).abs() < 1e-12 * n.max(1.0));
            }
        }
        assert_eq!(sobolev_norm(&basis, &SpectralVector::zeros(9), 1.0), 0.0);
    }

    #[test]
    fn h1_norm_matches_quadrature() {
        let (grid, basis) = setup();
        let v = SpectralVector::from_coeffs(vec![0.3, -1.0, 0.2, 0.05, 0.4, 0.0, 0.1, -0.2, 0.07]);
        let field = synthesize_field(&basis, &v);
        let integrand: Vec<f64> = (0..grid.num_nodes())
            .map(|i| {
                field.values[i] * field.values[i]
                    + vector_norm_sq(&field.grads[i], &grid.metric[i], grid.dim())
            })
            .collect();
        let quad = crate::geometry::integrate(&grid, &integrand).unwrap().sqrt();
        let spectral = sobolev_norm(&basis, &v, 1.0);
        assert!((quad - spectral).abs() < 1e-8);
    }

    #[test]
    fn parseval_at_truncation() {
        let (grid, basis) = setup();
        let v = SpectralVector::from_coeffs((0..9).map(|k| ((k * k) as f64).sin()).collect());
        let samples = synthesize_values(&basis, &v);
        assert!((grid.l2_norm(&samples) - v.norm()).abs() < 1e-10);
    }

    #[test]
    fn eigenfunction_sobolev_products() {
        let (_, basis) = setup();
        for s in [-1.0, 0.0, 1.0, 2.0] {
            for m in 0..9 {
                for n in 0..9 {
                    let p = sobolev_inner(
                        &basis,
                        &SpectralVector::unit(9, m),
                        &SpectralVector::unit(9, n),
                        s,
                    );
                    let target = if m == n {
                        basis.lambda[m].powf(2.0 * s)
                    } else {
                        0.0
                    };
                    assert!((p - target).abs() < 1e-10 * target.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn rescaled_basis_orthonormal_in_s_product() {
        // e^(s)_m = λ_m^{−s} e_m are orthonormal w.r.t. ⟨·,·⟩_s.
        let (_, basis) = setup();
        for s in [-1.0, 1.0, 2.0] {
            for m in 0..9 {
                let em = apply_lambda_s(&basis, &SpectralVector::unit(9, m), -s);
                for n in 0..9 {
                    let en = apply_lambda_s(&basis, &SpectralVector::unit(9, n), -s);
                    let p = sobolev_inner(&basis, &em, &en, s);
                    let target = if m == n { 1.0 } else { 0.0 };
                    assert!((p - target).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn hminus1_of_simple_functionals() {
        let (_, basis) = setup();
        // F = e_k: pairings are a unit vector, ‖F‖_{H⁻¹} = λ_k⁻¹.
        let mut p = vec![0.0; 9];
        p[2] = 1.0;
        assert!((hminus1_norm_of_functional(&basis, &p) - 1.0 / basis.lambda[2]).abs() < 1e-12);
        // F = Δe_k: pairing −μ_k at slot k, norm μ_k/λ_k.
        let mut p = vec![0.0; 9];
        p[3] = -basis.mu[3];
        assert!(
            (hminus1_norm_of_functional(&basis, &p) - basis.mu[3] / basis.lambda[3]).abs() < 1e-12
        );
        assert_eq!(hminus1_norm_of_functional(&basis, &[0.0; 9]), 0.0);
    }
}
