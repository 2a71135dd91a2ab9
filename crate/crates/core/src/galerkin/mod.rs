//! Galerkin right-hand-side assembly.
//!
//! For the ansatz u_n = Σ α_k e_k the coefficient ODEs are
//!
//!   α̇_j = ∫ ⟨f_x(u_n), ∇e_j⟩ dV + ∫ tr(A_x(u_n) ∘ H̃^{e_j}) dV + ε(−μ_j α_j),
//!
//! with the diffusion pairing assembled through the trace identity, so only
//! A values and the tabulated basis Hessians enter — no x-derivatives of A
//! along the solution. The εΔ term is diagonal and exact. When λ ↦ A_x(λ)
//! is linear the diffusion pairing is a fixed matrix, assembled once.

mod monitors;

pub use monitors::{
    energy_ledger_entry, entropy_residual, weak_residual, EnergyLedger, Entropy, EntropyReport,
    LedgerEntry,
};

use crate::fields::{CoefficientModel, NoiseModel};
use crate::geometry::{EigenBasis, QuadratureGrid};
use crate::mat::trace_product;
use crate::numeric::pairwise_sum_by;
use crate::spectral::{synthesize_values, SpectralVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GalerkinError {
    #[error("coefficient vector has length {got}, workspace expects {expected}")]
    ShapeMismatch { got: usize, expected: usize },
    #[error("model fails the geometry compatibility check (residual {residual:.3e})")]
    NotCompatible { residual: f64 },
}

/// Precomputed tables shared by every assembly call.
pub struct AssemblyWorkspace<'a> {
    pub grid: &'a QuadratureGrid,
    pub basis: &'a EigenBasis,
    pub model: &'a CoefficientModel,
    pub noise: Option<&'a NoiseModel>,
    /// Coefficient of the extra εΔu_n regularizer (0 disables it).
    pub epsilon: f64,
    /// Row-major n×n matrix of the diffusion pairing for linear A:
    /// L₀[j,k] = ∫ e_k tr(A_x(1) ∘ H̃^{e_j}) dV. None for nonlinear A.
    linear_diffusion: Option<Vec<f64>>,
    /// Constant noise pairing for λ-independent Φ.
    additive_noise: Option<Vec<f64>>,
}

impl<'a> AssemblyWorkspace<'a> {
    pub fn new(
        grid: &'a QuadratureGrid,
        basis: &'a EigenBasis,
        model: &'a CoefficientModel,
        noise: Option<&'a NoiseModel>,
        epsilon: f64,
    ) -> Self {
        assert_eq!(grid.num_nodes(), basis.num_nodes());
        assert!(epsilon >= 0.0);
        assert!(
            model.supported_on(&grid.manifold.kind),
            "model is not defined on this manifold"
        );
        let n = basis.n();
        let num_nodes = grid.num_nodes();

        let linear_diffusion = model.is_linear_diffusion().then(|| {
            // tr(B ∘ H̃^{e_j}) per node, B = A_x(1).
            let mut matrix = vec![0.0; n * n];
            let mut trace_row = vec![0.0; num_nodes];
            for j in 0..n {
                for (i, tr) in trace_row.iter_mut().enumerate() {
                    let b = model.diffusion(&grid.nodes[i], 1.0);
                    *tr = trace_product(&b, basis.hess(j, i), grid.dim());
                }
                for k in 0..n {
                    matrix[j * n + k] = pairwise_sum_by(0..num_nodes, &|i| {
                        grid.weights[i] * basis.value(k, i) * trace_row[i]
                    });
                }
            }
            matrix
        });

        let additive_noise = noise.and_then(|nm| {
            nm.is_additive().then(|| {
                (0..n)
                    .map(|j| {
                        pairwise_sum_by(0..num_nodes, &|i| {
                            grid.weights[i] * nm.phi(basis, i, 0.0) * basis.value(j, i)
                        })
                    })
                    .collect()
            })
        });

        AssemblyWorkspace {
            grid,
            basis,
            model,
            noise,
            epsilon,
            linear_diffusion,
            additive_noise,
        }
    }

    pub fn n(&self) -> usize {
        self.basis.n()
    }

    fn check_shape(&self, alpha: &SpectralVector) -> Result<(), GalerkinError> {
        if alpha.len() != self.n() {
            return Err(GalerkinError::ShapeMismatch {
                got: alpha.len(),
                expected: self.n(),
            });
        }
        Ok(())
    }

    /// The assembled stiff matrix L = L₀ − ε·diag(μ) for linear diffusion.
    pub fn stiff_matrix(&self) -> Option<Vec<f64>> {
        let n = self.n();
        self.linear_diffusion.as_ref().map(|l0| {
            let mut l = l0.clone();
            for j in 0..n {
                l[j * n + j] -= self.epsilon * self.basis.mu[j];
            }
            l
        })
    }

    /// Drift α̇ of the deterministic system (flux + diffusion + ε term);
    /// uses the precomputed diffusion matrix when A is linear in λ.
    pub fn rhs_deterministic(&self, alpha: &SpectralVector) -> Result<Vec<f64>, GalerkinError> {
        self.check_shape(alpha)?;
        let n = self.n();
        let mut out = match &self.linear_diffusion {
            Some(l0) => {
                let mut out: Vec<f64> = (0..n)
                    .map(|j| pairwise_sum_by(0..n, &|k| l0[j * n + k] * alpha.coeffs[k]))
                    .collect();
                if self.model.has_flux() {
                    let u = synthesize_values(self.basis, alpha);
                    self.add_flux_pairing(&u, &mut out);
                }
                out
            }
            None => {
                let mut out = vec![0.0; n];
                let u = synthesize_values(self.basis, alpha);
                self.add_diffusion_pairing(&u, &mut out);
                if self.model.has_flux() {
                    self.add_flux_pairing(&u, &mut out);
                }
                out
            }
        };
        self.add_epsilon_term(alpha, &mut out);
        Ok(out)
    }

    /// Same drift assembled node-by-node regardless of linearity; reference
    /// route for cross-checks (bit-identical association order for any
    /// model, at the cost of one quadrature pass per mode).
    pub fn rhs_deterministic_generic(
        &self,
        alpha: &SpectralVector,
    ) -> Result<Vec<f64>, GalerkinError> {
        self.check_shape(alpha)?;
        let mut out = vec![0.0; self.n()];
        let u = synthesize_values(self.basis, alpha);
        self.add_diffusion_pairing(&u, &mut out);
        if self.model.has_flux() {
            self.add_flux_pairing(&u, &mut out);
        }
        self.add_epsilon_term(alpha, &mut out);
        Ok(out)
    }

    fn add_diffusion_pairing(&self, u: &[f64], out: &mut [f64]) {
        let num_nodes = self.grid.num_nodes();
        let diff: Vec<_> = (0..num_nodes)
            .map(|i| self.model.diffusion(&self.grid.nodes[i], u[i]))
            .collect();
        for (j, o) in out.iter_mut().enumerate() {
            *o += pairwise_sum_by(0..num_nodes, &|i| {
                self.grid.weights[i]
                    * trace_product(&diff[i], self.basis.hess(j, i), self.grid.dim())
            });
        }
    }

    fn add_flux_pairing(&self, u: &[f64], out: &mut [f64]) {
        let num_nodes = self.grid.num_nodes();
        let flux: Vec<_> = (0..num_nodes)
            .map(|i| self.model.flux(&self.grid.nodes[i], u[i]))
            .collect();
        for (j, o) in out.iter_mut().enumerate() {
            *o += pairwise_sum_by(0..num_nodes, &|i| {
                let de = self.basis.partial(j, i);
                self.grid.weights[i] * (flux[i][0] * de[0] + flux[i][1] * de[1])
            });
        }
    }

    fn add_epsilon_term(&self, alpha: &SpectralVector, out: &mut [f64]) {
        if self.epsilon > 0.0 {
            for (j, o) in out.iter_mut().enumerate() {
                *o -= self.epsilon * self.basis.mu[j] * alpha.coeffs[j];
            }
        }
    }

    /// Noise pairing b_j = ∫ Φ(x, u_n) e_j dV (the dW_t multiplier);
    /// zero when no noise model is attached.
    pub fn rhs_noise(&self, alpha: &SpectralVector) -> Result<Vec<f64>, GalerkinError> {
        self.check_shape(alpha)?;
        let n = self.n();
        let Some(noise) = self.noise else {
            return Ok(vec![0.0; n]);
        };
        if let Some(b) = &self.additive_noise {
            return Ok(b.clone());
        }
        let num_nodes = self.grid.num_nodes();
        let u = synthesize_values(self.basis, alpha);
        let phi: Vec<f64> = (0..num_nodes)
            .map(|i| noise.phi(self.basis, i, u[i]))
            .collect();
        Ok((0..n)
            .map(|j| {
                pairwise_sum_by(0..num_nodes, &|i| {
                    self.grid.weights[i] * phi[i] * self.basis.value(j, i)
                })
            })
            .collect())
    }
}
