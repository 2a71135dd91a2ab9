//! The identity suite: integration by parts, the trace identity, the
//! Laplace reduction and transpose symmetry, evaluated on randomized smooth
//! fields, plus grid/basis structural checks. All residuals are absolute
//! and checked against fixed thresholds.

use crate::fields::{
    div_div, div_tensor, random_smooth_scalar, random_smooth_tensor, tensor_along_solution,
    CoefficientModel,
};
use crate::geometry::{EigenBasis, QuadratureGrid};
use crate::numeric::pairwise_sum_by;
use crate::stochastic::rng::CounterStream;

pub const IDENTITY_TOL: f64 = 1e-8;
pub const GRAM_TOL: f64 = 1e-10;
pub const EIGENRELATION_TOL: f64 = 1e-8;
pub const VOLUME_REL_TOL: f64 = 1e-12;

/// One named check with its measured value and threshold.
#[derive(Debug, Clone)]
pub struct CheckItem {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl CheckItem {
    fn new(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        CheckItem {
            name: name.into(),
            value,
            threshold,
            pass: value <= threshold,
        }
    }
}

/// Quadrature structural checks: positive weights, total volume.
pub fn grid_checks(grid: &QuadratureGrid) -> Vec<CheckItem> {
    let total: f64 = pairwise_sum_by(0..grid.num_nodes(), &|i| grid.weights[i]);
    let vol = grid.manifold.analytic_volume;
    let min_weight = grid.weights.iter().cloned().fold(f64::INFINITY, f64::min);
    vec![
        CheckItem::new("volume", (total - vol).abs() / vol, VOLUME_REL_TOL),
        CheckItem::new(
            "weights_positive",
            if min_weight > 0.0 { 0.0 } else { 1.0 },
            0.5,
        ),
    ]
}

/// Basis structural checks: Gram matrix and the pointwise eigenrelation.
pub fn basis_checks(grid: &QuadratureGrid, basis: &EigenBasis) -> Vec<CheckItem> {
    let n = basis.n();
    let mut gram_dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            let inner = pairwise_sum_by(0..grid.num_nodes(), &|p| {
                grid.weights[p] * basis.value(i, p) * basis.value(j, p)
            });
            let target = if i == j { 1.0 } else { 0.0 };
            gram_dev = gram_dev.max((inner - target).abs());
        }
    }
    let mut eigen_dev: f64 = 0.0;
    for k in 0..n {
        for p in 0..grid.num_nodes() {
            let h = basis.hess(k, p);
            eigen_dev = eigen_dev.max((h[0][0] + h[1][1] + basis.mu[k] * basis.value(k, p)).abs());
        }
    }
    // ∫ Div ∇e_k dV = ∫ Δe_k dV vanishes on a closed manifold.
    let mut stokes_dev: f64 = 0.0;
    for k in 0..n {
        let lap_integral = pairwise_sum_by(0..grid.num_nodes(), &|p| {
            let h = basis.hess(k, p);
            grid.weights[p] * (h[0][0] + h[1][1])
        });
        stokes_dev = stokes_dev.max(lap_integral.abs());
    }
    vec![
        CheckItem::new("gram_identity", gram_dev, GRAM_TOL),
        CheckItem::new("eigenrelation", eigen_dev, EIGENRELATION_TOL),
        CheckItem::new("stokes_vanishing", stokes_dev, EIGENRELATION_TOL),
    ]
}

/// The randomized identity suite: for `triples` random smooth
/// (f, A, u) triples, check
///
/// * integration by parts: ∫ f DivDiv A = −∫ (Div A)(∇f);
/// * the trace identity: ∫ f DivDiv A = ∫ tr(A ∘ H̃^f);
/// * the Laplace reduction ‖DivDiv(uδ) − Δu‖_{L²} = 0;
/// * transpose symmetry ‖DivDiv A − DivDiv Aᵀ‖_{L²} = 0.
pub fn identity_suite(
    grid: &QuadratureGrid,
    basis: &EigenBasis,
    seed: u64,
    triples: usize,
) -> Vec<CheckItem> {
    let mut items = Vec::new();
    let heat = CoefficientModel::heat(1.0);
    for t in 0..triples {
        let mut stream = CounterStream::new(seed, t as u64);
        let f = random_smooth_scalar(basis, &mut stream, 1.0);
        let (a, a_t) = random_smooth_tensor(grid, basis, &mut stream, 1.0);
        let u = random_smooth_scalar(basis, &mut stream, 1.0);

        let dd_a = div_div(grid, &a).expect("random tensor has second partials");
        let div_a = div_tensor(grid, &a).expect("random tensor has partials");

        // ∫ f DivDiv A dV.
        let lhs = pairwise_sum_by(0..grid.num_nodes(), &|i| {
            grid.weights[i] * f.values[i] * dd_a[i]
        });
        // −∫ (Div A)(∇f) dV.
        let rhs = -pairwise_sum_by(0..grid.num_nodes(), &|i| {
            let mut s = 0.0;
            for d in 0..grid.dim() {
                s += div_a.comps[i][d] * f.grads[i][d];
            }
            grid.weights[i] * s
        });
        items.push(CheckItem::new(
            format!("ibp_residual_{t}"),
            (lhs - rhs).abs(),
            IDENTITY_TOL,
        ));

        // ∫ tr(A ∘ H̃^f) dV.
        let trace = pairwise_sum_by(0..grid.num_nodes(), &|i| {
            grid.weights[i] * crate::mat::trace_product(&a.comps[i], &f.hess[i], grid.dim())
        });
        items.push(CheckItem::new(
            format!("trace_residual_{t}"),
            (lhs - trace).abs(),
            IDENTITY_TOL,
        ));

        // Laplace reduction on u.
        let u_delta = tensor_along_solution(grid, &heat, &u);
        let dd_u = div_div(grid, &u_delta).expect("solution tensor has second partials");
        let lap_residual: Vec<f64> = (0..grid.num_nodes())
            .map(|i| dd_u[i] - (u.hess[i][0][0] + u.hess[i][1][1]))
            .collect();
        items.push(CheckItem::new(
            format!("laplace_reduction_{t}"),
            grid.l2_norm(&lap_residual),
            IDENTITY_TOL,
        ));

        // Transpose symmetry.
        let dd_at = div_div(grid, &a_t).expect("transpose has second partials");
        let diff: Vec<f64> = dd_a.iter().zip(&dd_at).map(|(x, y)| x - y).collect();
        items.push(CheckItem::new(
            format!("transpose_symmetry_{t}"),
            grid.l2_norm(&diff),
            IDENTITY_TOL,
        ));
    }
    items
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_basis, build_grid, ManifoldSpec};
    use std::f64::consts::PI;

    #[test]
    fn identity_suite_passes_on_all_manifolds() {
        for (spec, res, n) in [
            (ManifoldSpec::torus1(2.0 * PI), vec![64], 9usize),
            (ManifoldSpec::torus2([2.0 * PI, 2.0 * PI]), vec![32, 32], 13),
            (ManifoldSpec::sphere2(), vec![16, 32], 16),
        ] {
            let grid = build_grid(&spec, &res).unwrap();
            let basis = build_basis(&spec, &grid, n).unwrap();
            for item in grid_checks(&grid) {
                assert!(item.pass, "{}: {} > {}", item.name, item.value, item.threshold);
            }
            for item in basis_checks(&grid, &basis) {
                assert!(item.pass, "{}: {} > {}", item.name, item.value, item.threshold);
            }
            for item in identity_suite(&grid, &basis, 2024, 5) {
                assert!(
                    item.pass,
                    "{:?} on {:?}: {} > {}",
                    item.name, spec.kind, item.value, item.threshold
                );
            }
        }
    }

    #[test]
    fn suite_is_deterministic_in_the_seed() {
        let spec = ManifoldSpec::torus1(2.0 * PI);
        let grid = build_grid(&spec, &[64]).unwrap();
        let basis = build_basis(&spec, &grid, 7).unwrap();
        let a = identity_suite(&grid, &basis, 11, 2);
        let b = identity_suite(&grid, &basis, 11, 2);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.value.to_bits(), y.value.to_bits());
        }
    }
}
