//! Runtime monitors: the energy ledger, the weak-form residual and the
//! entropy dissipation ledger.
//!
//! Time integrals use the trapezoidal rule on the output grid, matching the
//! integrator order and keeping monitor cost proportional to the number of
//! stored snapshots.

use super::{AssemblyWorkspace, GalerkinError};
use crate::fields::{
    check_geometry_compat, div_tensor, flux_along_solution, tensor_along_solution,
};
use crate::fields::truncation::{smoothstep, smoothstep_d1, smoothstep_integral};
use crate::mat::{oneform_norm_sq, trace_product, vector_norm_sq};
use crate::numeric::pairwise_sum_by;
use crate::spectral::{
    hminus1_norm_of_functional, sobolev_norm, synthesize_field, SpectralVector,
};

/// One row of the energy ledger at an output time.
#[derive(Debug, Clone, Copy)]
pub struct LedgerEntry {
    pub t: f64,
    /// ½‖u‖²_{L²}.
    pub half_l2_sq: f64,
    /// ∫ ⟨Div A(u), ∇u⟩ dV.
    pub diffusion_pairing: f64,
    /// ε‖∇u‖²_{L²}, the pairing of the regularizer −εΔu with u.
    pub epsilon_pairing: f64,
    /// ∫ ⟨f(u), ∇u⟩ dV.
    pub flux_pairing: f64,
    /// ‖u‖²_{H¹}.
    pub h1_sq: f64,
    /// ‖∂t u_n‖_{H⁻¹}, from the assembled RHS pairings.
    pub dt_hminus1: f64,
    /// ‖f(u)‖²_{L²(M)} and ‖Div A(u)‖²_{L²(M)} (the H⁻¹ bound's right side).
    pub flux_l2_sq: f64,
    pub div_a_l2_sq: f64,
    pub min_u: f64,
    pub max_u: f64,
}

/// Compute a ledger row for one state.
pub fn energy_ledger_entry(
    ws: &AssemblyWorkspace,
    t: f64,
    alpha: &SpectralVector,
) -> Result<LedgerEntry, GalerkinError> {
    let grid = ws.grid;
    let dim = grid.dim();
    let u = synthesize_field(ws.basis, alpha);

    let tensor = tensor_along_solution(grid, ws.model, &u);
    let div_a = div_tensor(grid, &tensor).expect("solution tensor has partials");

    let diffusion_pairing = pairwise_sum_by(0..grid.num_nodes(), &|i| {
        let mut s = 0.0;
        for a in 0..dim {
            s += div_a.comps[i][a] * u.grads[i][a];
        }
        grid.weights[i] * s
    });

    let (flux_pairing, flux_l2_sq) = if ws.model.has_flux() {
        let flux = flux_along_solution(grid, ws.model, &u);
        let pairing = pairwise_sum_by(0..grid.num_nodes(), &|i| {
            let mut s = 0.0;
            for a in 0..dim {
                s += flux.comps[i][a] * u.partials[i][a];
            }
            grid.weights[i] * s
        });
        let l2 = pairwise_sum_by(0..grid.num_nodes(), &|i| {
            grid.weights[i] * vector_norm_sq(&flux.comps[i], &grid.metric[i], dim)
        });
        (pairing, l2)
    } else {
        (0.0, 0.0)
    };

    let div_a_l2_sq = pairwise_sum_by(0..grid.num_nodes(), &|i| {
        grid.weights[i] * oneform_norm_sq(&div_a.comps[i], &grid.metric_inv[i], dim)
    });

    let rhs = ws.rhs_deterministic(alpha)?;
    let dt_hminus1 = hminus1_norm_of_functional(ws.basis, &rhs);

    let (mut min_u, mut max_u) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in &u.values {
        min_u = min_u.min(v);
        max_u = max_u.max(v);
    }

    let l2_sq = alpha.norm().powi(2);
    let h1_sq = sobolev_norm(ws.basis, alpha, 1.0).powi(2);
    Ok(LedgerEntry {
        t,
        half_l2_sq: 0.5 * l2_sq,
        diffusion_pairing,
        epsilon_pairing: ws.epsilon * (h1_sq - l2_sq),
        flux_pairing,
        h1_sq,
        dt_hminus1,
        flux_l2_sq,
        div_a_l2_sq,
        min_u,
        max_u,
    })
}

/// Ledger over the output times of a run.
#[derive(Debug, Clone, Default)]
pub struct EnergyLedger {
    pub entries: Vec<LedgerEntry>,
}

fn trapezoid(times: &[f64], values: impl Fn(usize) -> f64, upto: usize) -> f64 {
    let mut acc = 0.0;
    for m in 1..=upto {
        acc += 0.5 * (times[m] - times[m - 1]) * (values(m) + values(m - 1));
    }
    acc
}

impl EnergyLedger {
    pub fn push(&mut self, entry: LedgerEntry) {
        self.entries.push(entry);
    }

    fn times(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.t).collect()
    }

    /// Residual of the cumulative energy identity at entry m:
    /// ½‖u(t)‖² − ½‖u₀‖² + ∫₀ᵗ (⟨Div A(u),∇u⟩ + ε‖∇u‖²) − ∫₀ᵗ ⟨f(u),∇u⟩.
    pub fn identity_residual(&self, m: usize) -> f64 {
        let times = self.times();
        let diffusion = trapezoid(
            &times,
            |i| self.entries[i].diffusion_pairing + self.entries[i].epsilon_pairing,
            m,
        );
        let flux = trapezoid(&times, |i| self.entries[i].flux_pairing, m);
        self.entries[m].half_l2_sq - self.entries[0].half_l2_sq + diffusion - flux
    }

    pub fn max_identity_residual(&self) -> f64 {
        (0..self.entries.len())
            .map(|m| self.identity_residual(m).abs())
            .fold(0.0, f64::max)
    }

    /// ∫₀ᵀ ‖∂t u_n‖²_{H⁻¹} dt.
    pub fn dt_hminus1_sq_integral(&self) -> f64 {
        let times = self.times();
        trapezoid(
            &times,
            |i| self.entries[i].dt_hminus1 * self.entries[i].dt_hminus1,
            self.entries.len() - 1,
        )
    }

    /// ∫₀ᵀ (‖f(u)‖² + ‖Div A(u)‖²) dt, the right side of the dual bound
    /// ∫‖∂t u_n‖²_{H⁻¹} ≤ 2 ∫ (‖f‖² + ‖Div A‖²).
    pub fn dual_bound_integral(&self) -> f64 {
        let times = self.times();
        trapezoid(
            &times,
            |i| self.entries[i].flux_l2_sq + self.entries[i].div_a_l2_sq,
            self.entries.len() - 1,
        )
    }

    pub fn min_u(&self) -> f64 {
        self.entries.iter().map(|e| e.min_u).fold(f64::INFINITY, f64::min)
    }

    pub fn max_u(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.max_u)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Weak-form residual of a trajectory against φ(t,x) = θ(t)ψ(x):
///
///   | ∫∫ (u ∂tφ + ⟨f(u),∇φ⟩ + tr(A(u)∘H̃^φ) + ε u Δφ) dV dt + ∫ u₀ φ(0) dV |
///
/// with quadrature in x and the trapezoidal rule over the snapshot times.
/// `theta` returns (θ(t), θ′(t)) and must vanish at the final time.
pub fn weak_residual(
    ws: &AssemblyWorkspace,
    times: &[f64],
    states: &[SpectralVector],
    phi_space: &SpectralVector,
    theta: &dyn Fn(f64) -> (f64, f64),
) -> Result<f64, GalerkinError> {
    assert_eq!(times.len(), states.len());
    assert!(times.len() >= 2);
    let (theta_end, _) = theta(*times.last().unwrap());
    assert!(
        theta_end.abs() < 1e-12,
        "test function must have compact support in [0,T)"
    );
    let grid = ws.grid;
    let dim = grid.dim();
    let psi = synthesize_field(ws.basis, phi_space);

    let spacetime: Vec<f64> = times
        .iter()
        .zip(states)
        .map(|(&t, alpha)| {
            let (th, th_dt) = theta(t);
            let u = synthesize_field(ws.basis, alpha);
            pairwise_sum_by(0..grid.num_nodes(), &|i| {
                let mut v = th_dt * u.values[i] * psi.values[i];
                let mut spatial = 0.0;
                if ws.model.has_flux() {
                    let f = ws.model.flux(&grid.nodes[i], u.values[i]);
                    for a in 0..dim {
                        spatial += f[a] * psi.partials[i][a];
                    }
                }
                let a_u = ws.model.diffusion(&grid.nodes[i], u.values[i]);
                spatial += trace_product(&a_u, &psi.hess[i], dim);
                if ws.epsilon > 0.0 {
                    let lap_psi = psi.hess[i][0][0] + psi.hess[i][1][1];
                    spatial += ws.epsilon * u.values[i] * lap_psi;
                }
                v += th * spatial;
                grid.weights[i] * v
            })
        })
        .collect();

    let time_integral = trapezoid(times, |m| spacetime[m], times.len() - 1);

    let (theta0, _) = theta(times[0]);
    let u0 = synthesize_field(ws.basis, &states[0]);
    let initial = theta0
        * pairwise_sum_by(0..grid.num_nodes(), &|i| {
            grid.weights[i] * u0.values[i] * psi.values[i]
        });

    Ok((time_integral + initial).abs())
}

/// A convex entropy S with S(0) = 0, together with S′ and S″.
#[derive(Clone)]
pub struct Entropy {
    pub name: &'static str,
    s: fn(f64, f64) -> f64,
    s_d1: fn(f64, f64) -> f64,
    s_d2: fn(f64, f64) -> f64,
    param: f64,
}

impl Entropy {
    pub fn quadratic() -> Self {
        Entropy {
            name: "quadratic",
            s: |x, _| 0.5 * x * x,
            s_d1: |x, _| x,
            s_d2: |_, _| 1.0,
            param: 0.0,
        }
    }

    /// S(λ) = λ: S″ = 0, so ∫ S(u) dV is conserved for compatible models.
    pub fn linear() -> Self {
        Entropy {
            name: "linear",
            s: |x, _| x,
            s_d1: |_, _| 1.0,
            s_d2: |_, _| 0.0,
            param: 0.0,
        }
    }

    /// C² regularization of the semi-entropy |λ−1|₊ over a δ-wide ramp.
    pub fn semi_plus(delta: f64) -> Self {
        Entropy {
            name: "semi_plus",
            s: |x, d| {
                if x <= 1.0 {
                    0.0
                } else if x >= 1.0 + d {
                    x - 1.0 - d + d * smoothstep_integral(1.0)
                } else {
                    d * smoothstep_integral((x - 1.0) / d)
                }
            },
            s_d1: |x, d| smoothstep((x - 1.0) / d),
            s_d2: |x, d| smoothstep_d1((x - 1.0) / d) / d,
            param: delta,
        }
    }

    /// C² regularization of the semi-entropy |λ|₋.
    pub fn semi_minus(delta: f64) -> Self {
        Entropy {
            name: "semi_minus",
            s: |x, d| {
                if x >= 0.0 {
                    0.0
                } else if x <= -d {
                    -x - d + d * smoothstep_integral(1.0)
                } else {
                    d * smoothstep_integral(-x / d)
                }
            },
            s_d1: |x, d| -smoothstep(-x / d),
            s_d2: |x, d| smoothstep_d1(-x / d) / d,
            param: delta,
        }
    }

    pub fn s(&self, x: f64) -> f64 {
        (self.s)(x, self.param)
    }

    pub fn s_d1(&self, x: f64) -> f64 {
        (self.s_d1)(x, self.param)
    }

    pub fn s_d2(&self, x: f64) -> f64 {
        (self.s_d2)(x, self.param)
    }
}

/// Entropy time series and dissipation ledger.
#[derive(Debug, Clone)]
pub struct EntropyReport {
    /// ∫ S(u(t)) dV at each snapshot.
    pub series: Vec<f64>,
    /// D(t) = ∫S(u(t)) − ∫S(u₀) + ∫₀ᵗ∫ S″(u)(⟨A′(u)∇u,∇u⟩ + ε‖∇u‖²) dV dτ.
    pub dissipation: Vec<f64>,
    pub max_dissipation: f64,
}

/// Evaluate the entropy ledger along a trajectory. The model must satisfy
/// geometry compatibility (checked over the trajectory's λ-range); the
/// dissipation D(t) ≤ tol is the integrated form of the entropy identity,
/// the divergence terms vanishing on a compact manifold.
pub fn entropy_residual(
    ws: &AssemblyWorkspace,
    times: &[f64],
    states: &[SpectralVector],
    entropy: &Entropy,
) -> Result<EntropyReport, GalerkinError> {
    assert_eq!(times.len(), states.len());
    let grid = ws.grid;
    let dim = grid.dim();

    // Geometry compatibility over the λ-range the trajectory visits.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let fields: Vec<_> = states
        .iter()
        .map(|alpha| synthesize_field(ws.basis, alpha))
        .collect();
    for u in &fields {
        for &v in &u.values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let margin = 0.1 * (hi - lo).max(1e-6);
    let samples: Vec<f64> = (0..9)
        .map(|i| lo - margin + (hi - lo + 2.0 * margin) * i as f64 / 8.0)
        .collect();
    let compat = check_geometry_compat(ws.model, grid, &samples);
    if !compat.pass {
        return Err(GalerkinError::NotCompatible {
            residual: compat.max_residual,
        });
    }

    let series: Vec<f64> = fields
        .iter()
        .map(|u| {
            pairwise_sum_by(0..grid.num_nodes(), &|i| {
                grid.weights[i] * entropy.s(u.values[i])
            })
        })
        .collect();

    let production: Vec<f64> = fields
        .iter()
        .map(|u| {
            pairwise_sum_by(0..grid.num_nodes(), &|i| {
                let s2 = entropy.s_d2(u.values[i]);
                if s2 == 0.0 {
                    return 0.0;
                }
                let aprime = ws.model.diffusion_dlambda(&grid.nodes[i], u.values[i]);
                let mut a_grad = [0.0; 2];
                for a in 0..dim {
                    for b in 0..dim {
                        a_grad[a] += aprime[a][b] * u.grads[i][b];
                    }
                }
                let quad = crate::mat::vector_inner(&a_grad, &u.grads[i], &grid.metric[i], dim);
                let eps_quad = ws.epsilon * vector_norm_sq(&u.grads[i], &grid.metric[i], dim);
                grid.weights[i] * s2 * (quad + eps_quad)
            })
        })
        .collect();

    let dissipation: Vec<f64> = (0..times.len())
        .map(|m| series[m] - series[0] + trapezoid(times, |i| production[i], m))
        .collect();
    let max_dissipation = dissipation.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    Ok(EntropyReport {
        series,
        dissipation,
        max_dissipation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::CoefficientModel;
    use crate::geometry::{build_basis, build_grid, ManifoldSpec};
    use std::f64::consts::PI;

    /// Analytic heat trajectory u(t) = e^{−μ₁ t} e₁ on T¹(2π).
    fn heat_trajectory(
        n: usize,
        steps: usize,
        t_end: f64,
    ) -> (Vec<f64>, Vec<SpectralVector>) {
        let mut times = Vec::with_capacity(steps + 1);
        let mut states = Vec::with_capacity(steps + 1);
        for m in 0..=steps {
            let t = t_end * m as f64 / steps as f64;
            let mut alpha = SpectralVector::zeros(n);
            alpha.coeffs[1] = (-t).exp(); // μ₁ = 1 on T¹(2π)
            times.push(t);
            states.push(alpha);
        }
        (times, states)
    }

    #[test]
    fn heat_ledger_matches_analytic_energy() {
        let spec = ManifoldSpec::torus1(2.0 * PI);
        let grid = build_grid(&spec, &[64]).unwrap();
        let basis = build_basis(&spec, &grid, 5).unwrap();
        let model = CoefficientModel::heat(1.0);
        let ws = AssemblyWorkspace::new(&grid, &basis, &model, None, 0.0);

        let (times, states) = heat_trajectory(5, 1000, 1.0);
        let mut ledger = EnergyLedger::default();
        for (t, alpha) in times.iter().zip(&states) {
            ledger.push(energy_ledger_entry(&ws, *t, alpha).unwrap());
        }
        // ½‖u‖² = ½e^{−2t} and ∫⟨Div A(u),∇u⟩ = ‖∇u‖² = e^{−2t} ≥ 0.
        for (m, e) in ledger.entries.iter().enumerate() {
            let t = times[m];
            assert!((e.half_l2_sq - 0.5 * (-2.0 * t).exp()).abs() < 1e-8);
            assert!((e.diffusion_pairing - (-2.0 * t).exp()).abs() < 1e-8);
            assert!(e.diffusion_pairing >= 0.0);
            assert_eq!(e.flux_pairing, 0.0);
        }
        // The cumulative identity closes to trapezoidal accuracy.
        assert!(ledger.max_identity_residual() < 1e-6);
        // ‖∂t u‖_{H⁻¹} = μ₁ e^{−t} / λ₁.
        let lam1 = 2f64.sqrt();
        for (m, e) in ledger.entries.iter().enumerate() {
            let expect = (-times[m]).exp() / lam1;
            assert!((e.dt_hminus1 - expect).abs() < 1e-8);
        }
        // Dual bound with constant 2.
        assert!(ledger.dt_hminus1_sq_integral() <= 2.0 * ledger.dual_bound_integral() + 1e-10);
    }

    #[test]
    fn zero_state_ledger_is_zero() {
        let spec = ManifoldSpec::torus1(2.0 * PI);
        let grid = build_grid(&spec, &[32]).unwrap();
        let basis = build_basis(&spec, &grid, 3).unwrap();
        let model = CoefficientModel::heat(1.0);
        let ws = AssemblyWorkspace::new(&grid, &basis, &model, None, 0.0);
        let e = energy_ledger_entry(&ws, 0.0, &SpectralVector::zeros(3)).unwrap();
        assert_eq!(e.half_l2_sq, 0.0);
        assert_eq!(e.flux_pairing, 0.0);
        assert!(e.diffusion_pairing.abs() < 1e-14);
        assert!(e.h1_sq.abs() < 1e-14);
        assert!(e.dt_hminus1.abs() < 1e-14);
    }

    #[test]
    fn weak_residual_of_analytic_heat_trajectory() {
        let spec = ManifoldSpec::torus1(2.0 * PI);
        let grid = build_grid(&spec, &[64]).unwrap();
        let basis = build_basis(&spec, &grid, 5).unwrap();
        let model = CoefficientModel::heat(1.0);
        let ws = AssemblyWorkspace::new(&grid, &basis, &model, None, 0.0);

        let t_end = 1.0;
        let (times, states) = heat_trajectory(5, 1000, t_end);
        let phi = SpectralVector::unit(5, 1);
        let theta = move |t: f64| {
            let w = 0.5 * PI / t_end;
            ((w * t).cos(), -w * (w * t).sin())
        };
        let res = weak_residual(&ws, &times, &states, &phi, &theta).unwrap();
        assert!(res < 1e-6, "residual {res}");

        // φ ≡ 0 gives a zero residual; linearity in the amplitude.
        let zero = weak_residual(&ws, &times, &states, &SpectralVector::zeros(5), &theta).unwrap();
        assert!(zero < 1e-15);
        let res2 =
            weak_residual(&ws, &times, &states, &phi.scaled(2.0), &theta).unwrap();
        assert!((res2 - 2.0 * res).abs() < 1e-12);
    }

    #[test]
    fn entropy_ledger_for_heat() {
        let spec = ManifoldSpec::torus1(2.0 * PI);
        let grid = build_grid(&spec, &[64]).unwrap();
        let basis = build_basis(&spec, &grid, 5).unwrap();
        let model = CoefficientModel::heat(1.0);
        let ws = AssemblyWorkspace::new(&grid, &basis, &model, None, 0.0);
        let (times, states) = heat_trajectory(5, 1000, 1.0);

        // Quadratic entropy: D(t) = 0 (the energy identity), ≤ 1e-6 here.
        let rep = entropy_residual(&ws, &times, &states, &Entropy::quadratic()).unwrap();
        assert!(rep.max_dissipation < 1e-6, "{}", rep.max_dissipation);

        // Linear entropy: ∫u dV conserved for compatible models.
        let rep = entropy_residual(&ws, &times, &states, &Entropy::linear()).unwrap();
        for (m, d) in rep.dissipation.iter().enumerate() {
            assert!(d.abs() < 1e-8, "t index {m}");
        }
    }

    #[test]
    fn entropy_requires_compatibility() {
        let spec = ManifoldSpec::torus1(2.0 * PI);
        let grid = build_grid(&spec, &[64]).unwrap();
        let basis = build_basis(&spec, &grid, 5).unwrap();
        let model = CoefficientModel::incompat_pair(1.0);
        let ws = AssemblyWorkspace::new(&grid, &basis, &model, None, 0.0);
        let (times, states) = heat_trajectory(5, 10, 0.1);
        assert!(matches!(
            entropy_residual(&ws, &times, &states, &Entropy::quadratic()),
            Err(GalerkinError::NotCompatible { .. })
        ));
    }

    #[test]
    fn semi_entropies_are_convex_and_vanish_on_unit_interval() {
        let sp = Entropy::semi_plus(0.1);
        let sm = Entropy::semi_minus(0.1);
        let mut x = -2.0;
        while x <= 3.0 {
            assert!(sp.s_d2(x) >= 0.0 && sm.s_d2(x) >= 0.0);
            if (0.0..=1.0).contains(&x) {
                assert_eq!(sp.s(x), 0.0);
                assert_eq!(sm.s(x), 0.0);
            }
            // S ≥ 0 and S(0) = 0.
            assert!(sp.s(x) >= 0.0 && sm.s(x) >= 0.0);
            x += 0.01;
        }
        assert_eq!(sp.s(0.0), 0.0);
        assert_eq!(sm.s(0.0), 0.0);
        // Far past the ramp they match the sharp semi-entropies up to δ/2.
        assert!((sp.s(3.0) - 2.0).abs() < 0.1);
        assert!((sm.s(-3.0) - 3.0).abs() < 0.1);
    }
}
