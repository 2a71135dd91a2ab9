//! The coefficient-model registry.
//!
//! Models are a fixed set with closed-form λ- and x-derivatives, so every
//! divergence and check is exact up to quadrature. Chart index convention
//! matches the rest of the crate: `flux(..)[i] = f^i`,
//! `diffusion(..)[a][b] = A^a_b`.
//!
//! Registry names (also the CLI config strings):
//!   "heat"              A = νλδ, f = 0
//!   "aniso_linear"      A = λ·diag(d₁,d₂) on tori, f = 0
//!   "bounded_nonlinear" A = ν(λ + a sin λ)δ, f = 0
//!   "burgers"           f = (λ²/2)∂x, A = νλδ on T¹
//!   "compat_pair"       f = s(λ²/2)V with Div V = 0 on T², A = νλδ
//!   "incompat_pair"     f = λ sin x ∂x, A = νλδ on T¹ (fails geomcomp)
//!   "indefinite"        A = νλ·diag(1,−q) on T² (fails parabolicity)

use super::standard_form::StandardFormModel;
use super::truncation::{chi, chi_d1, chi_d2, noise_cutoff};
use crate::geometry::{EigenBasis, ManifoldKind};
use crate::mat::{Mat2, Vec2, ZERO_MAT, ZERO_VEC};

/// Flux / diffusion coefficient model with analytic derivatives.
#[derive(Debug, Clone)]
pub enum CoefficientModel {
    Heat { nu: f64 },
    AnisoLinear { d: [f64; 2] },
    BoundedNonlinear { nu: f64, a: f64 },
    Burgers { nu: f64 },
    CompatPair { nu: f64, strength: f64 },
    IncompatPair { nu: f64 },
    Indefinite { nu: f64, neg: f64 },
    Truncated { base: Box<CoefficientModel> },
    Standard(StandardFormModel),
}

/// x-sup norms of the four growth quantities at a fixed λ:
/// (‖f‖, ‖A‖, ‖A′‖, ‖Div A‖); `lambda_aprime` is multiplied by |λ| by the
/// caller.
#[derive(Debug, Clone, Copy)]
pub struct GrowthParts {
    pub flux: f64,
    pub diff: f64,
    pub dprime: f64,
    pub div_diff: f64,
}

fn iso(v: f64) -> Mat2 {
    [[v, 0.0], [0.0, v]]
}

fn diag(a: f64, b: f64) -> Mat2 {
    [[a, 0.0], [0.0, b]]
}

/// Rotational divergence-free field on T²(2π,2π) from the stream function
/// sin x sin y; sup‖V‖ = 1.
fn rot_field(x: &Vec2) -> (Vec2, Mat2) {
    let (sx, cx) = x[0].sin_cos();
    let (sy, cy) = x[1].sin_cos();
    let v = [-sx * cy, cx * sy];
    // dv[i][j] = ∂_j V^i
    let dv = [[-cx * cy, sx * sy], [-sx * sy, cx * cy]];
    (v, dv)
}

impl CoefficientModel {
    pub fn heat(nu: f64) -> Self {
        assert!(nu > 0.0);
        CoefficientModel::Heat { nu }
    }

    pub fn aniso_linear(d: [f64; 2]) -> Self {
        assert!(d[0] > 0.0 && d[1] > 0.0);
        CoefficientModel::AnisoLinear { d }
    }

    pub fn bounded_nonlinear(nu: f64, a: f64) -> Self {
        assert!(nu > 0.0 && (0.0..1.0).contains(&a));
        CoefficientModel::BoundedNonlinear { nu, a }
    }

    pub fn burgers(nu: f64) -> Self {
        assert!(nu > 0.0);
        CoefficientModel::Burgers { nu }
    }

    pub fn compat_pair(nu: f64, strength: f64) -> Self {
        assert!(nu > 0.0);
        CoefficientModel::CompatPair { nu, strength }
    }

    pub fn incompat_pair(nu: f64) -> Self {
        assert!(nu > 0.0);
        CoefficientModel::IncompatPair { nu }
    }

    pub fn indefinite(nu: f64, neg: f64) -> Self {
        assert!(nu > 0.0 && neg > 0.0);
        CoefficientModel::Indefinite { nu, neg }
    }

    /// Compose with χ: f̃(λ) = f(χ(λ)), Ã(λ) = A(χ(λ)).
    pub fn truncated(base: CoefficientModel) -> Self {
        CoefficientModel::Truncated {
            base: Box::new(base),
        }
    }

    pub fn supported_on(&self, kind: &ManifoldKind) -> bool {
        match self {
            CoefficientModel::Heat { .. }
            | CoefficientModel::BoundedNonlinear { .. }
            | CoefficientModel::Standard(_) => true,
            CoefficientModel::AnisoLinear { .. } => {
                matches!(kind, ManifoldKind::Torus1 { .. } | ManifoldKind::Torus2 { .. })
            }
            CoefficientModel::Burgers { .. } | CoefficientModel::IncompatPair { .. } => {
                matches!(kind, ManifoldKind::Torus1 { .. })
            }
            CoefficientModel::CompatPair { .. } | CoefficientModel::Indefinite { .. } => {
                matches!(kind, ManifoldKind::Torus2 { .. })
            }
            CoefficientModel::Truncated { base } => base.supported_on(kind),
        }
    }

    /// Whether the flux is identically zero (lets assembly skip the pairing).
    pub fn has_flux(&self) -> bool {
        match self {
            CoefficientModel::Burgers { .. }
            | CoefficientModel::CompatPair { .. }
            | CoefficientModel::IncompatPair { .. } => true,
            CoefficientModel::Truncated { base } => base.has_flux(),
            _ => false,
        }
    }

    /// True when λ ↦ A_x(λ) is linear, i.e. A(x, λ) = λ·A(x, 1) exactly.
    pub fn is_linear_diffusion(&self) -> bool {
        match self {
            CoefficientModel::Heat { .. }
            | CoefficientModel::AnisoLinear { .. }
            | CoefficientModel::Burgers { .. }
            | CoefficientModel::CompatPair { .. }
            | CoefficientModel::IncompatPair { .. }
            | CoefficientModel::Indefinite { .. } => true,
            CoefficientModel::BoundedNonlinear { .. }
            | CoefficientModel::Truncated { .. }
            | CoefficientModel::Standard(_) => false,
        }
    }

    /// Declared strict-parabolicity constant c (0 for merely semidefinite
    /// models such as truncations, which need the εΔ regularizer).
    pub fn parabolicity_c(&self) -> f64 {
        match self {
            CoefficientModel::Heat { nu } => *nu,
            CoefficientModel::AnisoLinear { d } => d[0].min(d[1]),
            CoefficientModel::BoundedNonlinear { nu, a } => nu * (1.0 - a),
            CoefficientModel::Burgers { nu } => *nu,
            CoefficientModel::CompatPair { nu, .. } => *nu,
            CoefficientModel::IncompatPair { nu } => *nu,
            CoefficientModel::Indefinite { .. } => 0.1,
            CoefficientModel::Truncated { .. } => 0.0,
            CoefficientModel::Standard(m) => m.parabolicity_c,
        }
    }

    /// λ-interval the model's checks sample by default; part of the model
    /// contract since the boundedness conditions are universally quantified.
    pub fn default_lambda_range(&self) -> [f64; 2] {
        match self {
            CoefficientModel::Truncated { .. } => [-3.0, 4.0],
            _ => [-2.0, 2.0],
        }
    }

    pub fn flux(&self, x: &Vec2, lambda: f64) -> Vec2 {
        match self {
            CoefficientModel::Burgers { .. } => [0.5 * lambda * lambda, 0.0],
            CoefficientModel::CompatPair { strength, .. } => {
                let (v, _) = rot_field(x);
                let s = strength * 0.5 * lambda * lambda;
                [s * v[0], s * v[1]]
            }
            CoefficientModel::IncompatPair { .. } => [lambda * x[0].sin(), 0.0],
            CoefficientModel::Truncated { base } => base.flux(x, chi(lambda)),
            _ => ZERO_VEC,
        }
    }

    /// ∂_λ f.
    pub fn flux_dlambda(&self, x: &Vec2, lambda: f64) -> Vec2 {
        match self {
            CoefficientModel::Burgers { .. } => [lambda, 0.0],
            CoefficientModel::CompatPair { strength, .. } => {
                let (v, _) = rot_field(x);
                [strength * lambda * v[0], strength * lambda * v[1]]
            }
            CoefficientModel::IncompatPair { .. } => [x[0].sin(), 0.0],
            CoefficientModel::Truncated { base } => {
                let fb = base.flux_dlambda(x, chi(lambda));
                let d = chi_d1(lambda);
                [fb[0] * d, fb[1] * d]
            }
            _ => ZERO_VEC,
        }
    }

    /// ∂_j f^i with λ frozen, as `[i][j]`.
    pub fn flux_xpartials(&self, x: &Vec2, lambda: f64) -> Mat2 {
        match self {
            CoefficientModel::CompatPair { strength, .. } => {
                let (_, dv) = rot_field(x);
                let s = strength * 0.5 * lambda * lambda;
                [[s * dv[0][0], s * dv[0][1]], [s * dv[1][0], s * dv[1][1]]]
            }
            CoefficientModel::IncompatPair { .. } => {
                let mut m = ZERO_MAT;
                m[0][0] = lambda * x[0].cos();
                m
            }
            CoefficientModel::Truncated { base } => base.flux_xpartials(x, chi(lambda)),
            _ => ZERO_MAT,
        }
    }

    // The chart point is part of the A_x(λ) interface even though every
    // registry diffusion happens to be x-independent.
    #[allow(clippy::only_used_in_recursion)]
    pub fn diffusion(&self, x: &Vec2, lambda: f64) -> Mat2 {
        match self {
            CoefficientModel::Heat { nu } => iso(nu * lambda),
            CoefficientModel::AnisoLinear { d } => diag(lambda * d[0], lambda * d[1]),
            CoefficientModel::BoundedNonlinear { nu, a } => {
                iso(nu * (lambda + a * lambda.sin()))
            }
            CoefficientModel::Burgers { nu }
            | CoefficientModel::CompatPair { nu, .. }
            | CoefficientModel::IncompatPair { nu } => iso(nu * lambda),
            CoefficientModel::Indefinite { nu, neg } => diag(nu * lambda, -nu * neg * lambda),
            CoefficientModel::Truncated { base } => base.diffusion(x, chi(lambda)),
            CoefficientModel::Standard(m) => iso(m.antiderivative(lambda)),
        }
    }

    /// A′ = ∂_λ A.
    #[allow(clippy::only_used_in_recursion)]
    pub fn diffusion_dlambda(&self, x: &Vec2, lambda: f64) -> Mat2 {
        match self {
            CoefficientModel::Heat { nu } => iso(*nu),
            CoefficientModel::AnisoLinear { d } => diag(d[0], d[1]),
            CoefficientModel::BoundedNonlinear { nu, a } => iso(nu * (1.0 + a * lambda.cos())),
            CoefficientModel::Burgers { nu }
            | CoefficientModel::CompatPair { nu, .. }
            | CoefficientModel::IncompatPair { nu } => iso(*nu),
            CoefficientModel::Indefinite { nu, neg } => diag(*nu, -nu * neg),
            CoefficientModel::Truncated { base } => {
                crate::mat::mat_scale(&base.diffusion_dlambda(x, chi(lambda)), chi_d1(lambda))
            }
            CoefficientModel::Standard(m) => iso((m.profile)(lambda)),
        }
    }

    /// A″ = ∂²_λ A.
    pub fn diffusion_dlambda2(&self, x: &Vec2, lambda: f64) -> Mat2 {
        match self {
            CoefficientModel::BoundedNonlinear { nu, a } => iso(-nu * a * lambda.sin()),
            CoefficientModel::Truncated { base } => {
                let z = chi(lambda);
                let d1 = chi_d1(lambda);
                let first = crate::mat::mat_scale(&base.diffusion_dlambda2(x, z), d1 * d1);
                let second = crate::mat::mat_scale(&base.diffusion_dlambda(x, z), chi_d2(lambda));
                crate::mat::mat_add(&first, &second)
            }
            CoefficientModel::Standard(m) => iso((m.profile_dlambda)(lambda)),
            _ => ZERO_MAT,
        }
    }

    /// ∂_l A with λ frozen; zero for every registry model (all are
    /// x-independent in the diffusion part).
    pub fn diffusion_xpartials(&self, _x: &Vec2, _lambda: f64) -> [Mat2; 2] {
        [ZERO_MAT; 2]
    }

    /// ∂_l ∂_m A with λ frozen.
    pub fn diffusion_x2partials(&self, _x: &Vec2, _lambda: f64) -> [[Mat2; 2]; 2] {
        [[ZERO_MAT; 2]; 2]
    }

    /// ∂_l A′ with λ frozen.
    pub fn diffusion_dlambda_xpartials(&self, _x: &Vec2, _lambda: f64) -> [Mat2; 2] {
        [ZERO_MAT; 2]
    }

    /// x-sup norms of the growth quantities at λ, when the model exposes them.
    pub fn sup_growth_parts(&self, dim: usize, lambda: f64) -> Option<GrowthParts> {
        let sd = (dim as f64).sqrt();
        match self {
            CoefficientModel::Heat { nu } => Some(GrowthParts {
                flux: 0.0,
                diff: nu * sd * lambda.abs(),
                dprime: nu * sd,
                div_diff: 0.0,
            }),
            CoefficientModel::AnisoLinear { d } => {
                let f = (d[0] * d[0] + d[1] * d[1]).sqrt();
                Some(GrowthParts {
                    flux: 0.0,
                    diff: f * lambda.abs(),
                    dprime: f,
                    div_diff: 0.0,
                })
            }
            CoefficientModel::BoundedNonlinear { nu, a } => Some(GrowthParts {
                flux: 0.0,
                diff: nu * sd * (lambda + a * lambda.sin()).abs(),
                dprime: nu * sd * (1.0 + a * lambda.cos()).abs(),
                div_diff: 0.0,
            }),
            CoefficientModel::Burgers { nu } => Some(GrowthParts {
                flux: 0.5 * lambda * lambda,
                diff: nu * lambda.abs(),
                dprime: *nu,
                div_diff: 0.0,
            }),
            CoefficientModel::CompatPair { nu, strength } => Some(GrowthParts {
                flux: strength.abs() * 0.5 * lambda * lambda,
                diff: nu * sd * lambda.abs(),
                dprime: nu * sd,
                div_diff: 0.0,
            }),
            CoefficientModel::IncompatPair { nu } => Some(GrowthParts {
                flux: lambda.abs(),
                diff: nu * lambda.abs(),
                dprime: *nu,
                div_diff: 0.0,
            }),
            CoefficientModel::Indefinite { nu, neg } => {
                let f = nu * (1.0 + neg * neg).sqrt();
                Some(GrowthParts {
                    flux: 0.0,
                    diff: f * lambda.abs(),
                    dprime: f,
                    div_diff: 0.0,
                })
            }
            CoefficientModel::Truncated { base } => {
                let parts = base.sup_growth_parts(dim, chi(lambda))?;
                Some(GrowthParts {
                    flux: parts.flux,
                    diff: parts.diff,
                    dprime: parts.dprime * chi_d1(lambda),
                    div_diff: parts.div_diff,
                })
            }
            CoefficientModel::Standard(_) => None,
        }
    }

    /// Declared C̄ with ‖f‖ + ‖A‖ + ‖λA′‖ + ‖Div A‖ ≤ C̄(1+|λ|) for all λ;
    /// `None` when the model makes no boundedness claim (quadratic flux).
    pub fn growth_claim(&self, dim: usize) -> Option<f64> {
        let sd = (dim as f64).sqrt();
        match self {
            CoefficientModel::Heat { nu } => Some(2.0 * nu * sd),
            CoefficientModel::AnisoLinear { d } => {
                Some(2.0 * (d[0] * d[0] + d[1] * d[1]).sqrt())
            }
            CoefficientModel::BoundedNonlinear { nu, a } => Some(nu * sd * (2.0 + a)),
            CoefficientModel::Burgers { .. } | CoefficientModel::CompatPair { .. } => None,
            CoefficientModel::IncompatPair { nu } => Some(1.0 + nu),
            CoefficientModel::Indefinite { nu, neg } => {
                Some(2.0 * nu * (1.0 + neg * neg).sqrt())
            }
            CoefficientModel::Truncated { .. } => {
                // χ is constant outside [−1, 2], so the ratio decays beyond
                // |λ| = 2 and the sup is attained on a compact window.
                let mut sup: f64 = 0.0;
                let mut lam = -4.5;
                while lam <= 4.5 {
                    let p = self.sup_growth_parts(dim, lam)?;
                    let num = p.flux + p.diff + lam.abs() * p.dprime + p.div_diff;
                    sup = sup.max(num / (1.0 + lam.abs()));
                    lam += 1e-3;
                }
                Some(sup * (1.0 + 1e-9))
            }
            CoefficientModel::Standard(_) => None,
        }
    }
}

/// Noise coefficient Φ(x, λ); the spatial shape is the first nonconstant
/// eigenfunction of the run's basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    /// Φ = σ·e₁(x), λ-independent (the Ornstein–Uhlenbeck workhorse; not
    /// compactly supported in λ).
    AdditiveMode { sigma: f64 },
    /// Φ = σ·e₁(x)·λ·cutoff(λ), compactly supported in λ.
    MultiplicativeBounded { sigma: f64 },
}

impl NoiseModel {
    pub fn phi(&self, basis: &EigenBasis, node: usize, lambda: f64) -> f64 {
        assert!(basis.n() >= 2, "noise shape needs a nonconstant mode");
        match self {
            NoiseModel::AdditiveMode { sigma } => sigma * basis.value(1, node),
            NoiseModel::MultiplicativeBounded { sigma } => {
                sigma * basis.value(1, node) * lambda * noise_cutoff(lambda)
            }
        }
    }

    pub fn is_additive(&self) -> bool {
        matches!(self, NoiseModel::AdditiveMode { .. })
    }

    pub fn sigma(&self) -> f64 {
        match self {
            NoiseModel::AdditiveMode { sigma } | NoiseModel::MultiplicativeBounded { sigma } => {
                *sigma
            }
        }
    }
}
