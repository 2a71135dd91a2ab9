//! Built-in compact manifolds, quadrature grids and Laplace–Beltrami
//! eigenbases.
//!
//! Three manifolds are supported, each with a single global chart and a
//! closed-form eigenbasis: the flat circle T¹ (arc-length coordinate), the
//! flat 2-torus T² (product coordinates) and the round unit sphere S²
//! (spherical coordinates, pole-free nodes). Quadrature weights carry the
//! √det g volume factor, so `integrate` is a plain weighted sum.

mod basis;
mod quadrature;

pub use basis::{build_basis, EigenBasis};
pub use quadrature::gauss_legendre;

use crate::mat::{Gamma2, Mat2, Vec2, IDENTITY, ZERO_GAMMA, ZERO_MAT};
use crate::numeric::pairwise_sum_by;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid resolution: each axis needs at least 4 nodes, got {0:?}")]
    InvalidResolution(Vec<usize>),
    #[error("basis under-resolved: mode {label:?} (axis wavenumber {needed}) violates the Nyquist bound {bound}")]
    UnderResolved {
        label: Vec<i32>,
        needed: usize,
        bound: usize,
    },
    #[error("sample length {got} does not match node count {expected}")]
    LengthMismatch { got: usize, expected: usize },
}

/// Which built-in manifold a grid lives on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ManifoldKind {
    Torus1 { period: f64 },
    Torus2 { periods: [f64; 2] },
    Sphere2,
}

/// A built-in compact manifold together with its chart dimension and
/// analytically known volume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldSpec {
    pub kind: ManifoldKind,
    pub dimension: usize,
    pub analytic_volume: f64,
}

impl ManifoldSpec {
    pub fn torus1(period: f64) -> Self {
        assert!(period > 0.0, "period must be positive");
        ManifoldSpec {
            kind: ManifoldKind::Torus1 { period },
            dimension: 1,
            analytic_volume: period,
        }
    }

    pub fn torus2(periods: [f64; 2]) -> Self {
        assert!(
            periods[0] > 0.0 && periods[1] > 0.0,
            "periods must be positive"
        );
        ManifoldSpec {
            kind: ManifoldKind::Torus2 { periods },
            dimension: 2,
            analytic_volume: periods[0] * periods[1],
        }
    }

    pub fn sphere2() -> Self {
        ManifoldSpec {
            kind: ManifoldKind::Sphere2,
            dimension: 2,
            analytic_volume: 4.0 * PI,
        }
    }
}

/// Quadrature nodes with tabulated metric data.
///
/// Weights include the volume factor, so `Σ w_i f(x_i) ≈ ∫_M f dV`. The
/// Christoffel symbols and their chart partials are tabulated per node; on
/// the flat tori they are identically zero.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    pub manifold: ManifoldSpec,
    pub resolution: Vec<usize>,
    pub nodes: Vec<Vec2>,
    pub weights: Vec<f64>,
    pub metric: Vec<Mat2>,
    pub metric_inv: Vec<Mat2>,
    /// ∂_l g_{ij}, indexed `[l][i][j]`.
    pub metric_partials: Vec<[Mat2; 2]>,
    /// ∂_l g^{ij}, indexed `[l][i][j]`.
    pub metric_inv_partials: Vec<[Mat2; 2]>,
    pub christoffels: Vec<Gamma2>,
    /// ∂_l Γ^i_{jk}, indexed `[l]`, then as `Gamma2`.
    pub christoffel_partials: Vec<[Gamma2; 2]>,
}

impl QuadratureGrid {
    pub fn dim(&self) -> usize {
        self.manifold.dimension
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// L² norm of a sampled scalar field.
    pub fn l2_norm(&self, samples: &[f64]) -> f64 {
        pairwise_sum_by(0..samples.len(), &|i| {
            self.weights[i] * samples[i] * samples[i]
        })
        .max(0.0)
        .sqrt()
    }
}

/// Quadrature of node samples against the volume measure.
pub fn integrate(grid: &QuadratureGrid, samples: &[f64]) -> Result<f64, GeometryError> {
    if samples.len() != grid.num_nodes() {
        return Err(GeometryError::LengthMismatch {
            got: samples.len(),
            expected: grid.num_nodes(),
        });
    }
    Ok(pairwise_sum_by(0..samples.len(), &|i| {
        grid.weights[i] * samples[i]
    }))
}

/// Build the quadrature grid for a manifold.
///
/// Tori use the periodic trapezoidal rule (uniform nodes, exact for resolved
/// trigonometric polynomials); the sphere uses Gauss–Legendre in cos θ times
/// a uniform azimuthal rule, which never places a node on a coordinate pole.
pub fn build_grid(
    spec: &ManifoldSpec,
    resolution: &[usize],
) -> Result<QuadratureGrid, GeometryError> {
    if resolution.len() != spec.dimension || resolution.iter().any(|&r| r < 4) {
        return Err(GeometryError::InvalidResolution(resolution.to_vec()));
    }
    match spec.kind {
        ManifoldKind::Torus1 { period } => Ok(build_torus1(spec, period, resolution[0])),
        ManifoldKind::Torus2 { periods } => {
            Ok(build_torus2(spec, periods, [resolution[0], resolution[1]]))
        }
        ManifoldKind::Sphere2 => Ok(build_sphere2(spec, resolution[0], resolution[1])),
    }
}

type FlatTables = (Vec<Mat2>, Vec<Mat2>, Vec<[Mat2; 2]>, Vec<[Gamma2; 2]>, Vec<Gamma2>);

fn flat_tables(num_nodes: usize) -> FlatTables {
    (
        vec![IDENTITY; num_nodes],
        vec![IDENTITY; num_nodes],
        vec![[ZERO_MAT; 2]; num_nodes],
        vec![[ZERO_GAMMA; 2]; num_nodes],
        vec![ZERO_GAMMA; num_nodes],
    )
}

fn build_torus1(spec: &ManifoldSpec, period: f64, n: usize) -> QuadratureGrid {
    let h = period / n as f64;
    let nodes: Vec<Vec2> = (0..n).map(|i| [i as f64 * h, 0.0]).collect();
    let weights = vec![h; n];
    let (metric, metric_inv, metric_partials, christoffel_partials, christoffels) = flat_tables(n);
    QuadratureGrid {
        manifold: *spec,
        resolution: vec![n],
        nodes,
        weights,
        metric,
        metric_inv,
        metric_partials: metric_partials.clone(),
        metric_inv_partials: metric_partials,
        christoffels,
        christoffel_partials,
    }
}

fn build_torus2(spec: &ManifoldSpec, periods: [f64; 2], res: [usize; 2]) -> QuadratureGrid {
    let h = [periods[0] / res[0] as f64, periods[1] / res[1] as f64];
    let mut nodes = Vec::with_capacity(res[0] * res[1]);
    for i in 0..res[0] {
        for j in 0..res[1] {
            nodes.push([i as f64 * h[0], j as f64 * h[1]]);
        }
    }
    let num = nodes.len();
    let weights = vec![h[0] * h[1]; num];
    let (metric, metric_inv, metric_partials, christoffel_partials, christoffels) =
        flat_tables(num);
    QuadratureGrid {
        manifold: *spec,
        resolution: res.to_vec(),
        nodes,
        weights,
        metric,
        metric_inv,
        metric_partials: metric_partials.clone(),
        metric_inv_partials: metric_partials,
        christoffels,
        christoffel_partials,
    }
}

fn build_sphere2(spec: &ManifoldSpec, n_polar: usize, n_az: usize) -> QuadratureGrid {
    let (gl_nodes, gl_weights) = gauss_legendre(n_polar);
    let dphi = 2.0 * PI / n_az as f64;

    let num = n_polar * n_az;
    let mut grid = QuadratureGrid {
        manifold: *spec,
        resolution: vec![n_polar, n_az],
        nodes: Vec::with_capacity(num),
        weights: Vec::with_capacity(num),
        metric: Vec::with_capacity(num),
        metric_inv: Vec::with_capacity(num),
        metric_partials: Vec::with_capacity(num),
        metric_inv_partials: Vec::with_capacity(num),
        christoffels: Vec::with_capacity(num),
        christoffel_partials: Vec::with_capacity(num),
    };

    // θ ascending, i.e. x = cos θ descending.
    for j in (0..n_polar).rev() {
        let x = gl_nodes[j];
        let theta = x.acos();
        let (sin_t, cos_t) = theta.sin_cos();
        let w_polar = gl_weights[j];

        let g = [[1.0, 0.0], [0.0, sin_t * sin_t]];
        let g_inv = [[1.0, 0.0], [0.0, 1.0 / (sin_t * sin_t)]];
        let mut dg = [ZERO_MAT; 2];
        dg[0][1][1] = 2.0 * sin_t * cos_t;
        let mut dg_inv = [ZERO_MAT; 2];
        dg_inv[0][1][1] = -2.0 * cos_t / (sin_t * sin_t * sin_t);

        // Γ^θ_{φφ} = −sinθ cosθ, Γ^φ_{θφ} = Γ^φ_{φθ} = cot θ.
        let mut gamma = ZERO_GAMMA;
        gamma[0][1][1] = -sin_t * cos_t;
        gamma[1][0][1] = cos_t / sin_t;
        gamma[1][1][0] = cos_t / sin_t;
        let mut dgamma = [ZERO_GAMMA; 2];
        dgamma[0][0][1][1] = -(cos_t * cos_t - sin_t * sin_t);
        dgamma[0][1][0][1] = -1.0 / (sin_t * sin_t);
        dgamma[0][1][1][0] = -1.0 / (sin_t * sin_t);

        for k in 0..n_az {
            let phi = k as f64 * dphi;
            grid.nodes.push([theta, phi]);
            // The GL weight in x = cos θ already carries the sin θ Jacobian.
            grid.weights.push(w_polar * dphi);
            grid.metric.push(g);
            grid.metric_inv.push(g_inv);
            grid.metric_partials.push(dg);
            grid.metric_inv_partials.push(dg_inv);
            grid.christoffels.push(gamma);
            grid.christoffel_partials.push(dgamma);
        }
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus1_volume() {
        let spec = ManifoldSpec::torus1(2.0 * PI);
        let grid = build_grid(&spec, &[64]).unwrap();
        let total: f64 = grid.weights.iter().sum();
        assert!((total - 2.0 * PI).abs() < 1e-12 * 2.0 * PI);
    }

    #[test]
    fn torus2_volume() {
        let spec = ManifoldSpec::torus2([2.0 * PI, 2.0 * PI]);
        let grid = build_grid(&spec, &[32, 32]).unwrap();
        let total: f64 = grid.weights.iter().sum();
        assert!((total - 4.0 * PI * PI).abs() < 1e-12 * total);
    }

    #[test]
    fn sphere_volume_and_pole_free() {
        let spec = ManifoldSpec::sphere2();
        let grid = build_grid(&spec, &[16, 32]).unwrap();
        let total: f64 = grid.weights.iter().sum();
        assert!((total - 4.0 * PI).abs() < 1e-12 * total);
        assert!(grid.weights.iter().all(|&w| w > 0.0));
        for node in &grid.nodes {
            assert!(node[0].sin() > 1e-3, "node at coordinate pole");
        }
    }

    #[test]
    fn sphere_chart_consistency() {
        let grid = build_grid(&ManifoldSpec::sphere2(), &[8, 16]).unwrap();
        for i in 0..grid.num_nodes() {
            let theta = grid.nodes[i][0];
            let det = grid.metric[i][0][0] * grid.metric[i][1][1];
            assert!((det - theta.sin().powi(2)).abs() < 1e-13);
            assert!(
                (grid.christoffels[i][0][1][1] + theta.sin() * theta.cos()).abs() < 1e-13
            );
            assert!((grid.christoffels[i][1][0][1] - theta.cos() / theta.sin()).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_small_resolution() {
        let spec = ManifoldSpec::torus1(2.0 * PI);
        assert!(matches!(
            build_grid(&spec, &[3]),
            Err(GeometryError::InvalidResolution(_))
        ));
    }

    #[test]
    fn integrate_constants_and_parities() {
        let spec = ManifoldSpec::torus1(2.0 * PI);
        let grid = build_grid(&spec, &[64]).unwrap();
        let cos_x: Vec<f64> = grid.nodes.iter().map(|p| p[0].cos()).collect();
        assert!(integrate(&grid, &cos_x).unwrap().abs() < 1e-12);
        let cos2: Vec<f64> = grid.nodes.iter().map(|p| p[0].cos().powi(2)).collect();
        // Analytic oracle: ∫ cos²x dx over one period = π.
        assert!((integrate(&grid, &cos2).unwrap() - PI).abs() < 1e-12);

        let sphere = build_grid(&ManifoldSpec::sphere2(), &[16, 32]).unwrap();
        let ones = vec![1.0; sphere.num_nodes()];
        assert!((integrate(&sphere, &ones).unwrap() - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn integrate_length_mismatch() {
        let grid = build_grid(&ManifoldSpec::torus1(1.0), &[8]).unwrap();
        assert!(matches!(
            integrate(&grid, &[1.0, 2.0]),
            Err(GeometryError::LengthMismatch { .. })
        ));
    }
}
