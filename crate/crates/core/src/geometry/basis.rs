//! Laplace–Beltrami eigenbases with tabulated derivatives.
//!
//! All eigenfunctions are closed-form and real: normalized Fourier modes on
//! the flat tori and real spherical harmonics on S². Gradients are stored as
//! contravariant components, Hessians as (1,1) components H̃^a_b = ∇^a∇_b e;
//! second θ-derivatives of the Legendre functions come from the associated
//! Legendre ODE, so the pointwise eigenrelation tr H̃ = −μ e holds to
//! roundoff by construction.

use super::{GeometryError, ManifoldKind, ManifoldSpec, QuadratureGrid};
use crate::mat::{Mat2, Vec2, ZERO_MAT};
use std::f64::consts::PI;

/// First `n` eigenpairs of −Δ, tabulated on a grid.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    num_modes: usize,
    num_nodes: usize,
    /// Eigenvalues of −Δ, nondecreasing.
    pub mu: Vec<f64>,
    /// λ_k = √(1+μ_k), the eigenvalues of Λ = (I−Δ)^{1/2}.
    pub lambda: Vec<f64>,
    /// Integer mode labels (wavevector or (l, m)); ties in μ are ordered
    /// lexicographically by label.
    pub labels: Vec<Vec<i32>>,
    values: Vec<f64>,
    grads: Vec<Vec2>,
    partials: Vec<Vec2>,
    hessians: Vec<Mat2>,
}

impl EigenBasis {
    pub fn n(&self) -> usize {
        self.num_modes
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// e_k at node i.
    #[inline]
    pub fn value(&self, k: usize, i: usize) -> f64 {
        self.values[k * self.num_nodes + i]
    }

    /// Contravariant gradient (∇e_k)^a at node i.
    #[inline]
    pub fn grad(&self, k: usize, i: usize) -> &Vec2 {
        &self.grads[k * self.num_nodes + i]
    }

    /// Covariant partials ∂_a e_k at node i.
    #[inline]
    pub fn partial(&self, k: usize, i: usize) -> &Vec2 {
        &self.partials[k * self.num_nodes + i]
    }

    /// (1,1) Hessian H̃^a_b of e_k at node i.
    #[inline]
    pub fn hess(&self, k: usize, i: usize) -> &Mat2 {
        &self.hessians[k * self.num_nodes + i]
    }

    /// All node values of mode k.
    pub fn values_row(&self, k: usize) -> &[f64] {
        &self.values[k * self.num_nodes..(k + 1) * self.num_nodes]
    }

    /// sup over nodes of |e_k|.
    pub fn max_abs_value(&self, k: usize) -> f64 {
        self.values_row(k).iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Mode {
    Torus1 { k: usize, c: usize },
    Torus2 { k: [usize; 2], c: [usize; 2] },
    Sphere { l: usize, m: i32 },
}

struct ModeEval {
    value: f64,
    partials: Vec2,
    grad: Vec2,
    hess: Mat2,
}

/// Build the first `n` eigenfunctions on `grid`.
///
/// Degenerate eigenspaces are ordered lexicographically by integer label so
/// truncation is deterministic. Fails with `UnderResolved` if any selected
/// mode violates the grid's Nyquist bound (wavenumber < axis count / 2 on
/// tori; l < polar count and azimuthal order < azimuthal count / 2 on S²).
pub fn build_basis(
    spec: &ManifoldSpec,
    grid: &QuadratureGrid,
    n: usize,
) -> Result<EigenBasis, GeometryError> {
    assert!(n >= 1, "basis needs at least one mode");
    assert_eq!(spec, &grid.manifold, "grid was built for a different manifold");

    let mut candidates = enumerate_modes(spec, grid, n);
    candidates.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then_with(|| label_of(&a.1).cmp(&label_of(&b.1)))
    });
    candidates.truncate(n);
    assert_eq!(candidates.len(), n, "mode enumeration exhausted early");

    for (_, mode) in &candidates {
        check_nyquist(mode, grid)?;
    }

    let num_nodes = grid.num_nodes();
    let mut basis = EigenBasis {
        num_modes: n,
        num_nodes,
        mu: Vec::with_capacity(n),
        lambda: Vec::with_capacity(n),
        labels: Vec::with_capacity(n),
        values: Vec::with_capacity(n * num_nodes),
        grads: Vec::with_capacity(n * num_nodes),
        partials: Vec::with_capacity(n * num_nodes),
        hessians: Vec::with_capacity(n * num_nodes),
    };

    for (mu, mode) in &candidates {
        basis.mu.push(*mu);
        basis.lambda.push((1.0 + mu).sqrt());
        basis.labels.push(label_of(mode));
        for i in 0..num_nodes {
            let ev = eval_mode(mode, spec, &grid.nodes[i]);
            basis.values.push(ev.value);
            basis.grads.push(ev.grad);
            basis.partials.push(ev.partials);
            basis.hessians.push(ev.hess);
        }
    }
    Ok(basis)
}

fn label_of(mode: &Mode) -> Vec<i32> {
    match mode {
        Mode::Torus1 { k, c } => vec![*k as i32, *c as i32],
        Mode::Torus2 { k, c } => vec![k[0] as i32, k[1] as i32, c[0] as i32, c[1] as i32],
        Mode::Sphere { l, m } => vec![*l as i32, *m],
    }
}

/// All candidate modes with enough headroom that the first n in (μ, label)
/// order are guaranteed to be among them, including modes beyond the Nyquist
/// bound (those are rejected afterwards so under-resolution is reported
/// rather than silently skipped).
fn enumerate_modes(spec: &ManifoldSpec, grid: &QuadratureGrid, n: usize) -> Vec<(f64, Mode)> {
    let mut out = Vec::new();
    match spec.kind {
        ManifoldKind::Torus1 { period } => {
            let k_gen = grid.resolution[0].max(n);
            for k in 0..=k_gen {
                let omega = 2.0 * PI * k as f64 / period;
                let mu = omega * omega;
                if k == 0 {
                    out.push((mu, Mode::Torus1 { k, c: 0 }));
                } else {
                    out.push((mu, Mode::Torus1 { k, c: 0 }));
                    out.push((mu, Mode::Torus1 { k, c: 1 }));
                }
            }
        }
        ManifoldKind::Torus2 { periods } => {
            let k_gen = [
                grid.resolution[0].max(n),
                grid.resolution[1].max(n),
            ];
            for k1 in 0..=k_gen[0] {
                for k2 in 0..=k_gen[1] {
                    let w1 = 2.0 * PI * k1 as f64 / periods[0];
                    let w2 = 2.0 * PI * k2 as f64 / periods[1];
                    let mu = w1 * w1 + w2 * w2;
                    let c1s: &[usize] = if k1 == 0 { &[0] } else { &[0, 1] };
                    let c2s: &[usize] = if k2 == 0 { &[0] } else { &[0, 1] };
                    for &c1 in c1s {
                        for &c2 in c2s {
                            out.push((
                                mu,
                                Mode::Torus2 {
                                    k: [k1, k2],
                                    c: [c1, c2],
                                },
                            ));
                        }
                    }
                }
            }
        }
        ManifoldKind::Sphere2 => {
            let l_gen = grid.resolution[0].max((n as f64).sqrt() as usize + 2);
            for l in 0..=l_gen {
                let mu = (l * (l + 1)) as f64;
                for m in -(l as i32)..=(l as i32) {
                    out.push((mu, Mode::Sphere { l, m }));
                }
            }
        }
    }
    out
}

fn check_nyquist(mode: &Mode, grid: &QuadratureGrid) -> Result<(), GeometryError> {
    let fail = |needed: usize, bound: usize| GeometryError::UnderResolved {
        label: label_of(mode),
        needed,
        bound,
    };
    match mode {
        Mode::Torus1 { k, .. } => {
            let bound = grid.resolution[0] / 2;
            if *k >= bound.max(1) && *k > 0 {
                return Err(fail(*k, bound));
            }
        }
        Mode::Torus2 { k, .. } => {
            for axis in 0..2 {
                let bound = grid.resolution[axis] / 2;
                if k[axis] > 0 && k[axis] >= bound.max(1) {
                    return Err(fail(k[axis], bound));
                }
            }
        }
        Mode::Sphere { l, m } => {
            if *l >= grid.resolution[0] {
                return Err(fail(*l, grid.resolution[0]));
            }
            let az_bound = grid.resolution[1] / 2;
            if m.unsigned_abs() as usize >= az_bound {
                return Err(fail(m.unsigned_abs() as usize, az_bound));
            }
        }
    }
    Ok(())
}

fn eval_mode(mode: &Mode, spec: &ManifoldSpec, node: &Vec2) -> ModeEval {
    match (mode, spec.kind) {
        (Mode::Torus1 { k, c }, ManifoldKind::Torus1 { period }) => {
            let amp = if *k == 0 {
                (1.0 / period).sqrt()
            } else {
                (2.0 / period).sqrt()
            };
            let omega = 2.0 * PI * *k as f64 / period;
            let (v, dv, ddv) = trig_factor(amp, omega, *c, node[0]);
            let mut hess = ZERO_MAT;
            hess[0][0] = ddv;
            ModeEval {
                value: v,
                partials: [dv, 0.0],
                grad: [dv, 0.0],
                hess,
            }
        }
        (Mode::Torus2 { k, c }, ManifoldKind::Torus2 { periods }) => {
            let mut f = [(0.0, 0.0, 0.0); 2];
            for axis in 0..2 {
                let amp = if k[axis] == 0 {
                    (1.0 / periods[axis]).sqrt()
                } else {
                    (2.0 / periods[axis]).sqrt()
                };
                let omega = 2.0 * PI * k[axis] as f64 / periods[axis];
                f[axis] = trig_factor(amp, omega, c[axis], node[axis]);
            }
            let (vx, dvx, ddvx) = f[0];
            let (vy, dvy, ddvy) = f[1];
            let partials = [dvx * vy, vx * dvy];
            let hess = [[ddvx * vy, dvx * dvy], [dvx * dvy, vx * ddvy]];
            ModeEval {
                value: vx * vy,
                partials,
                grad: partials,
                hess,
            }
        }
        (Mode::Sphere { l, m }, ManifoldKind::Sphere2) => eval_spherical(*l, *m, node),
        _ => unreachable!("mode does not match manifold"),
    }
}

/// (value, d/dx, d²/dx²) of amp·cos(ωx) or amp·sin(ωx).
fn trig_factor(amp: f64, omega: f64, c: usize, x: f64) -> (f64, f64, f64) {
    let (s, co) = (omega * x).sin_cos();
    if c == 0 {
        (amp * co, -amp * omega * s, -amp * omega * omega * co)
    } else {
        (amp * s, amp * omega * co, -amp * omega * omega * s)
    }
}

fn eval_spherical(l: usize, m: i32, node: &Vec2) -> ModeEval {
    let theta = node[0];
    let phi = node[1];
    let (sin_t, cos_t) = theta.sin_cos();
    let x = cos_t;
    let m_abs = m.unsigned_abs() as usize;

    let (leg, leg_prev) = normalized_legendre(l, m_abs, x, sin_t);
    // dL/dθ = (l x L − c_{lm} L_{l−1})/sin θ, with c_{lm} = √((2l+1)(l²−m²)/(2l−1)).
    let c_lm = if l == m_abs {
        0.0
    } else {
        let lf = l as f64;
        let mf = m_abs as f64;
        ((2.0 * lf + 1.0) * (lf * lf - mf * mf) / (2.0 * lf - 1.0)).sqrt()
    };
    let leg_dt = (l as f64 * x * leg - c_lm * leg_prev) / sin_t;
    // Associated Legendre ODE in θ closes the second derivative.
    let mu = (l * (l + 1)) as f64;
    let m2 = (m_abs * m_abs) as f64;
    let leg_dtt = -(cos_t / sin_t) * leg_dt - (mu - m2 / (sin_t * sin_t)) * leg;

    let inv_sqrt_pi = 1.0 / PI.sqrt();
    let (t, t_d, t_dd) = if m == 0 {
        (1.0 / (2.0 * PI).sqrt(), 0.0, 0.0)
    } else if m > 0 {
        let (s, c) = (m as f64 * phi).sin_cos();
        let mf = m as f64;
        (
            c * inv_sqrt_pi,
            -mf * s * inv_sqrt_pi,
            -mf * mf * c * inv_sqrt_pi,
        )
    } else {
        let mf = m_abs as f64;
        let (s, c) = (mf * phi).sin_cos();
        (s * inv_sqrt_pi, mf * c * inv_sqrt_pi, -mf * mf * s * inv_sqrt_pi)
    };

    let value = leg * t;
    let d_theta = leg_dt * t;
    let d_phi = leg * t_d;
    let sin2 = sin_t * sin_t;

    let h_tt = leg_dtt * t;
    let h_tp = leg_dt * t_d - (cos_t / sin_t) * leg * t_d;
    let h_pp = leg * t_dd + sin_t * cos_t * leg_dt * t;

    ModeEval {
        value,
        partials: [d_theta, d_phi],
        grad: [d_theta, d_phi / sin2],
        hess: [[h_tt, h_tp], [h_tp / sin2, h_pp / sin2]],
    }
}

/// Interval-normalized associated Legendre functions: ∫₋₁¹ L_l^m(x)² dx = 1.
/// Returns (L_l^m, L_{l−1}^m); the second value is 0 when l == m.
fn normalized_legendre(l: usize, m: usize, x: f64, sin_t: f64) -> (f64, f64) {
    debug_assert!(m <= l);
    // Seed L_m^m = √(1/2) Π_{j=1..m} √((2j+1)/(2j)) sin^m θ  (no phase factor).
    let mut p_mm = std::f64::consts::FRAC_1_SQRT_2;
    for j in 1..=m {
        let jf = j as f64;
        p_mm *= ((2.0 * jf + 1.0) / (2.0 * jf)).sqrt() * sin_t;
    }
    if l == m {
        return (p_mm, 0.0);
    }
    let a = |ll: usize| {
        let lf = ll as f64;
        let mf = m as f64;
        ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt()
    };
    let mut prev = p_mm;
    let mut curr = (2.0 * m as f64 + 3.0).sqrt() * x * p_mm;
    for ll in (m + 2)..=l {
        let next = a(ll) * (x * curr - prev / a(ll - 1));
        prev = curr;
        curr = next;
    }
    (curr, prev)
}
