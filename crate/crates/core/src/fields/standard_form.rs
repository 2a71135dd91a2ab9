//! Reduction of the standard diffusion operator Div(a(x,u)∇u) to double
//! divergence form via A(x,λ) = ∫₀^λ a(x,z) dz.
//!
//! The registry keeps isotropic x-independent profiles a(λ)·δ, for which the
//! correction source −Div(Div A(·,λ))|_{λ=u} vanishes identically; it is
//! still exposed so the representation
//! Div(a∇u) = Div Div A(u) − correction is testable as stated.

use super::{CoefficientModel, FieldsError};
use crate::geometry::QuadratureGrid;
use std::sync::Arc;

pub const SIMPSON_MAX_DEPTH: usize = 40;
pub const SIMPSON_TOL: f64 = 1e-10;

type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Isotropic diffusion A(λ) = (∫₀^λ a(z) dz)·δ with a strictly positive
/// scalar profile a.
#[derive(Clone)]
pub struct StandardFormModel {
    pub profile: Profile,
    pub profile_dlambda: Profile,
    pub parabolicity_c: f64,
}

impl std::fmt::Debug for StandardFormModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StandardFormModel")
            .field("parabolicity_c", &self.parabolicity_c)
            .finish_non_exhaustive()
    }
}

impl StandardFormModel {
    /// A(λ) = ∫₀^λ a(z) dz by adaptive Simpson.
    ///
    /// Convergence over the probe range is validated at construction; at
    /// evaluation time a non-converged tail returns its best estimate.
    pub fn antiderivative(&self, lambda: f64) -> f64 {
        if lambda == 0.0 {
            return 0.0;
        }
        match adaptive_simpson(self.profile.as_ref(), 0.0, lambda, SIMPSON_TOL) {
            Ok(v) | Err(NonConverged(v)) => v,
        }
    }

    /// The correction source −Div(Div A(·,λ))|_{λ=u}; identically zero for
    /// x-independent profiles.
    pub fn correction_source(&self, grid: &QuadratureGrid, _u_values: &[f64]) -> Vec<f64> {
        vec![0.0; grid.num_nodes()]
    }
}

/// Build a coefficient model from a standard-form profile a(λ) (the
/// diffusion matrix is a·δ). Fails with `QuadratureFailure` if the adaptive
/// Simpson rule cannot integrate the profile over `probe_range` within depth
/// 40 at tolerance 1e-10.
pub fn from_standard_form(
    profile: impl Fn(f64) -> f64 + Send + Sync + 'static,
    profile_dlambda: impl Fn(f64) -> f64 + Send + Sync + 'static,
    parabolicity_c: f64,
    probe_range: [f64; 2],
) -> Result<CoefficientModel, FieldsError> {
    let model = StandardFormModel {
        profile: Arc::new(profile),
        profile_dlambda: Arc::new(profile_dlambda),
        parabolicity_c,
    };
    // Validate convergence at a handful of probe endpoints.
    for frac in [0.25, 0.5, 0.75, 1.0] {
        for end in [probe_range[0] * frac, probe_range[1] * frac] {
            if end != 0.0 {
                adaptive_simpson(model.profile.as_ref(), 0.0, end, SIMPSON_TOL)
                    .map_err(|_| FieldsError::QuadratureFailure(SIMPSON_MAX_DEPTH))?;
            }
        }
    }
    Ok(CoefficientModel::Standard(model))
}

struct NonConverged(f64);

fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64, NonConverged> {
    let m = 0.5 * (a + b);
    let (fa, fb, fm) = (f(a), f(b), f(m));
    let whole = simpson(a, fa, b, fb, fm);
    recurse(f, a, fa, b, fb, m, fm, whole, tol, SIMPSON_MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    m: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> Result<f64, NonConverged> {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, fa, m, fm, flm);
    let right = simpson(m, fm, b, fb, frm);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(NonConverged(left + right));
    }
    let l = recurse(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1);
    let r = recurse(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
    match (l, r) {
        (Ok(x), Ok(y)) => Ok(x + y),
        (Ok(x), Err(NonConverged(y)))
        | (Err(NonConverged(x)), Ok(y))
        | (Err(NonConverged(x)), Err(NonConverged(y))) => Err(NonConverged(x + y)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{
        div_div, div_vector, gradient_vector_field, tensor_along_solution, VectorField,
    };
    use crate::geometry::{build_basis, build_grid, ManifoldSpec};
    use crate::mat::ZERO_MAT;
    use crate::spectral::{synthesize_field, SpectralVector};
    use std::f64::consts::PI;

    #[test]
    fn identity_profile_gives_lambda_delta() {
        let model = from_standard_form(|_| 1.0, |_| 0.0, 1.0, [-2.0, 2.0]).unwrap();
        let x = [0.0, 0.0];
        for lam in [-1.5, 0.0, 0.5, 2.0] {
            let a = model.diffusion(&x, lam);
            assert!((a[0][0] - lam).abs() < 1e-10);
            assert!((a[1][1] - lam).abs() < 1e-10);
            assert_eq!(a[0][1], 0.0);
        }
    }

    #[test]
    fn arctan_antiderivative_oracle() {
        let model =
            from_standard_form(|z| 1.0 / (1.0 + z * z), |z| -2.0 * z / (1.0 + z * z).powi(2), 0.2,
                [-2.0, 2.0])
            .unwrap();
        let x = [0.0, 0.0];
        for lam in [-1.7, -0.3, 0.0, 0.9, 2.0] {
            let a = model.diffusion(&x, lam);
            assert!((a[0][0] - lam.atan()).abs() < 1e-10, "λ = {lam}");
        }
    }

    #[test]
    fn zero_profile() {
        let model = from_standard_form(|_| 0.0, |_| 0.0, 0.0, [-2.0, 2.0]).unwrap();
        let a = model.diffusion(&[0.0, 0.0], 1.3);
        assert_eq!(a, ZERO_MAT);
    }

    #[test]
    fn nonintegrable_profile_fails() {
        // 1/√|z − 0.3| blows up inside the probe range; Simpson cannot settle.
        let res = from_standard_form(
            |z| 1.0 / (z - 0.3).abs().sqrt(),
            |_| 0.0,
            0.1,
            [-2.0, 2.0],
        );
        assert!(matches!(res, Err(FieldsError::QuadratureFailure(_))));
    }

    #[test]
    fn standard_form_representation_identity() {
        // Div(a(u)∇u) = Div Div A(u) − correction, with correction ≡ 0 here.
        let spec = ManifoldSpec::torus1(2.0 * PI);
        let grid = build_grid(&spec, &[128]).unwrap();
        let basis = build_basis(&spec, &grid, 7).unwrap();
        let v = SpectralVector::from_coeffs(vec![0.1, 0.5, -0.3, 0.1, 0.05, -0.02, 0.01]);
        let u = synthesize_field(&basis, &v);

        let model =
            from_standard_form(|z| 1.0 / (1.0 + z * z), |z| -2.0 * z / (1.0 + z * z).powi(2), 0.1,
                [-2.0, 2.0])
            .unwrap();

        // Left side: Div(a(u)∇u) assembled by hand with the chain rule.
        let grad = gradient_vector_field(&grid, &u);
        let gparts = grad.partials.as_ref().unwrap();
        let mut comps = Vec::new();
        let mut partials = Vec::new();
        for i in 0..grid.num_nodes() {
            let a = 1.0 / (1.0 + u.values[i] * u.values[i]);
            let da = -2.0 * u.values[i] / (1.0 + u.values[i] * u.values[i]).powi(2);
            comps.push([a * grad.comps[i][0], 0.0]);
            let mut m = ZERO_MAT;
            m[0][0] = da * u.partials[i][0] * grad.comps[i][0] + a * gparts[i][0][0];
            partials.push(m);
        }
        let lhs = div_vector(&grid, &VectorField { comps, partials: Some(partials) }).unwrap();

        let t = tensor_along_solution(&grid, &model, &u);
        let rhs = div_div(&grid, &t).unwrap();
        let corr = match &model {
            crate::fields::CoefficientModel::Standard(m) => m.correction_source(&grid, &u.values),
            _ => unreachable!(),
        };
        for i in 0..grid.num_nodes() {
            assert!((lhs[i] - (rhs[i] - corr[i])).abs() < 1e-8, "node {i}");
        }
    }
}
