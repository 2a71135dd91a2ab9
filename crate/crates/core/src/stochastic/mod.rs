//! Euler–Maruyama integration of the stochastic Galerkin system
//!
//!   dα_j = [flux pairing + diffusion pairing]_j dt + (∫ Φ(x,u_n) e_j dV) dW_t
//!
//! for linear diffusion, with Monte Carlo ensembles over independent Wiener
//! paths. Increments are counter-based — addressed by (master seed, sample
//! index, step index) — so paths are reproducible path-by-path and ensemble
//! statistics are independent of worker count: samples are processed in
//! fixed-size chunks and chunk statistics merged in index order.

pub mod rng;

use crate::galerkin::{AssemblyWorkspace, GalerkinError};
use crate::integrate::GalerkinState;
use crate::numeric::{pairwise_dot, pairwise_sum_by};
use crate::spectral::SpectralVector;
use rayon::prelude::*;
use thiserror::Error;

/// Samples per deterministic work chunk; fixed so that the chunk merge
/// order (and therefore every statistic) is independent of thread count.
const ENSEMBLE_CHUNK: u64 = 64;

#[derive(Debug, Error)]
pub enum StochasticError {
    #[error("nonfinite state at t = {t} in sample {sample}")]
    Blowup { t: f64, sample: u64 },
    #[error("the stochastic system requires a diffusion linear in λ")]
    NotLinearDiffusion,
    #[error("invalid configuration: {reason}")]
    InvalidConfig { reason: String },
    #[error(transparent)]
    Galerkin(#[from] GalerkinError),
}

/// Wiener increments for one path, addressable by step index.
#[derive(Debug, Clone, Copy)]
pub struct WienerPath {
    pub seed: u64,
    pub sample_index: u64,
    pub dt: f64,
}

impl WienerPath {
    pub fn new(seed: u64, sample_index: u64, dt: f64) -> Self {
        assert!(dt > 0.0);
        WienerPath {
            seed,
            sample_index,
            dt,
        }
    }

    /// ΔW for a step: N(0, dt), a pure function of (seed, sample, step).
    #[inline]
    pub fn increment(&self, step: u64) -> f64 {
        rng::standard_normal(self.seed, self.sample_index, step) * self.dt.sqrt()
    }

    /// Mean/variance of a 10⁴-draw batch within 5σ of (0, dt).
    pub fn moment_sanity_check(&self) -> bool {
        let n = 10_000u64;
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for i in 0..n {
            let x = self.increment(i);
            let d = x - mean;
            mean += d / (i + 1) as f64;
            m2 += d * (x - mean);
        }
        let var = m2 / (n - 1) as f64;
        let nf = n as f64;
        mean.abs() <= 5.0 * (self.dt / nf).sqrt()
            && (var - self.dt).abs() <= 5.0 * self.dt * (2.0 / nf).sqrt()
    }
}

/// One Euler–Maruyama step: α ← α + dt·drift(α) + ΔW·b(α), the drift being
/// the deterministic pairings with ε = 0.
pub fn em_step(
    ws: &AssemblyWorkspace,
    state: &GalerkinState,
    dt: f64,
    dw: f64,
) -> Result<GalerkinState, StochasticError> {
    let sim = PathSimulator::new(ws)?;
    sim.step(state, dt, dw, 0)
}

/// Reusable per-path stepper: the stiff pairing matrix is dense and fixed
/// for linear diffusion, the noise pairing constant for additive Φ.
pub struct PathSimulator<'a, 'b> {
    ws: &'a AssemblyWorkspace<'b>,
    l0: Vec<f64>,
    n: usize,
    additive_b: Option<Vec<f64>>,
}

impl<'a, 'b> PathSimulator<'a, 'b> {
    pub fn new(ws: &'a AssemblyWorkspace<'b>) -> Result<Self, StochasticError> {
        if !ws.model.is_linear_diffusion() {
            return Err(StochasticError::NotLinearDiffusion);
        }
        if ws.epsilon != 0.0 {
            return Err(StochasticError::InvalidConfig {
                reason: "the stochastic system carries no εΔ term; build the workspace with ε = 0"
                    .into(),
            });
        }
        let l0 = ws.stiff_matrix().expect("linear diffusion has a stiff matrix");
        let additive_b = match ws.noise {
            Some(nm) if nm.is_additive() => {
                Some(ws.rhs_noise(&SpectralVector::zeros(ws.n())).expect("shape"))
            }
            _ => None,
        };
        Ok(PathSimulator {
            ws,
            l0,
            n: ws.n(),
            additive_b,
        })
    }

    fn drift(&self, alpha: &SpectralVector) -> Result<Vec<f64>, StochasticError> {
        if self.ws.model.has_flux() {
            return Ok(self.ws.rhs_deterministic(alpha)?);
        }
        let n = self.n;
        Ok((0..n)
            .map(|j| pairwise_dot(&self.l0[j * n..(j + 1) * n], &alpha.coeffs))
            .collect())
    }

    fn noise_pairing(&self, alpha: &SpectralVector) -> Result<Vec<f64>, StochasticError> {
        match &self.additive_b {
            Some(b) => Ok(b.clone()),
            None => Ok(self.ws.rhs_noise(alpha)?),
        }
    }

    pub fn step(
        &self,
        state: &GalerkinState,
        dt: f64,
        dw: f64,
        sample: u64,
    ) -> Result<GalerkinState, StochasticError> {
        let drift = self.drift(&state.alpha)?;
        let b = self.noise_pairing(&state.alpha)?;
        let mut next = state.alpha.clone();
        for j in 0..self.n {
            next.coeffs[j] += dt * drift[j] + dw * b[j];
        }
        let t = state.t + dt;
        if !next.is_finite() {
            return Err(StochasticError::Blowup { t, sample });
        }
        Ok(GalerkinState::new(t, next))
    }
}

#[derive(Debug, Clone)]
pub struct PathConfig {
    pub t_end: f64,
    pub dt: f64,
    pub seed: u64,
    pub sample_index: u64,
    pub output_stride: usize,
}

/// Snapshots of one realization at output times.
#[derive(Debug, Clone)]
pub struct PathRun {
    pub times: Vec<f64>,
    pub states: Vec<SpectralVector>,
}

fn step_count(t_end: f64, dt: f64) -> Result<u64, StochasticError> {
    if dt <= 0.0 || t_end <= 0.0 {
        return Err(StochasticError::InvalidConfig {
            reason: format!("dt = {dt}, T = {t_end}"),
        });
    }
    let n_f = t_end / dt;
    let n = n_f.round();
    if n < 1.0 || (n - n_f).abs() > 1e-9 * n_f.max(1.0) {
        return Err(StochasticError::InvalidConfig {
            reason: format!("T = {t_end} is not an integer multiple of dt = {dt}"),
        });
    }
    Ok(n as u64)
}

/// Simulate one path; the RNG stream is derived from (seed, sample_index)
/// only, so the same configuration reproduces bit-identical trajectories.
pub fn simulate_path(
    ws: &AssemblyWorkspace,
    u0: &SpectralVector,
    config: &PathConfig,
) -> Result<PathRun, StochasticError> {
    let sim = PathSimulator::new(ws)?;
    let n_steps = step_count(config.t_end, config.dt)?;
    let wiener = WienerPath::new(config.seed, config.sample_index, config.dt);
    let stride = config.output_stride.max(1) as u64;

    let mut state = GalerkinState::new(0.0, u0.clone());
    let mut run = PathRun {
        times: vec![0.0],
        states: vec![u0.clone()],
    };
    for m in 0..n_steps {
        let dw = wiener.increment(m);
        state = sim.step(&state, config.dt, dw, config.sample_index)?;
        state.t = config.dt * (m + 1) as f64;
        if (m + 1) % stride == 0 || m + 1 == n_steps {
            run.times.push(state.t);
            run.states.push(state.alpha.clone());
        }
    }
    Ok(run)
}

/// Streaming mean/variance accumulator with associative merge.
#[derive(Debug, Clone, Copy, Default)]
pub struct Welford {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Welford) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n1 = self.count as f64;
        let n2 = other.count as f64;
        let delta = other.mean - self.mean;
        let total = n1 + n2;
        self.mean += delta * n2 / total;
        self.m2 += other.m2 + delta * delta * n1 * n2 / total;
        self.count += other.count;
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    pub samples: u64,
    pub t_end: f64,
    pub dt: f64,
    pub seed: u64,
    pub output_stride: usize,
    /// Hölder lags in steps (e.g. [1, 10, 100]).
    pub holder_lags: Vec<u64>,
}

/// Streaming Monte Carlo estimators over an ensemble of paths.
#[derive(Debug, Clone)]
pub struct EnsembleStats {
    pub count: u64,
    pub times: Vec<f64>,
    /// Running mean coefficient vector per output time (times × n).
    pub mean_field: Vec<Vec<f64>>,
    /// ‖u(t)‖_{L²} and its square, per output time.
    pub l2: Vec<Welford>,
    pub l2_sq: Vec<Welford>,
    pub h1_sq: Vec<Welford>,
    /// Squared final-time coefficients per mode (for moment oracles).
    pub final_coeff_sq: Vec<Welford>,
    /// ∫₀ᵀ ‖∇u‖²_{L²} dt and ∫₀ᵀ ‖u‖²_{H²} dt per path.
    pub grad_sq_time_integral: Welford,
    pub h2_sq_time_integral: Welford,
    /// Σ (∫Φ(x,u)u dV)·ΔW along the path (the Itô term of the energy
    /// identity; mean ≈ 0).
    pub ito_energy_term: Welford,
    /// Per lag: time-averaged ‖u(t+Δ)−u(t)‖²_{L²}/Δ.
    pub holder: Vec<(u64, Welford)>,
}

impl EnsembleStats {
    fn empty(times: Vec<f64>, n: usize, lags: &[u64]) -> Self {
        let outputs = times.len();
        EnsembleStats {
            count: 0,
            times,
            mean_field: vec![vec![0.0; n]; outputs],
            l2: vec![Welford::default(); outputs],
            l2_sq: vec![Welford::default(); outputs],
            h1_sq: vec![Welford::default(); outputs],
            final_coeff_sq: vec![Welford::default(); n],
            grad_sq_time_integral: Welford::default(),
            h2_sq_time_integral: Welford::default(),
            ito_energy_term: Welford::default(),
            holder: lags.iter().map(|&l| (l, Welford::default())).collect(),
        }
    }

    /// Merge statistics of a disjoint sample range (associative).
    pub fn merge(&mut self, other: &EnsembleStats) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        assert_eq!(self.times, other.times);
        let n1 = self.count as f64;
        let n2 = other.count as f64;
        let total = n1 + n2;
        for (mine, theirs) in self.mean_field.iter_mut().zip(&other.mean_field) {
            for (a, b) in mine.iter_mut().zip(theirs) {
                *a = (*a * n1 + *b * n2) / total;
            }
        }
        for (a, b) in self.l2.iter_mut().zip(&other.l2) {
            a.merge(b);
        }
        for (a, b) in self.l2_sq.iter_mut().zip(&other.l2_sq) {
            a.merge(b);
        }
        for (a, b) in self.h1_sq.iter_mut().zip(&other.h1_sq) {
            a.merge(b);
        }
        for (a, b) in self.final_coeff_sq.iter_mut().zip(&other.final_coeff_sq) {
            a.merge(b);
        }
        self.grad_sq_time_integral.merge(&other.grad_sq_time_integral);
        self.h2_sq_time_integral.merge(&other.h2_sq_time_integral);
        self.ito_energy_term.merge(&other.ito_energy_term);
        for ((l1, a), (l2, b)) in self.holder.iter_mut().zip(&other.holder) {
            assert_eq!(l1, l2);
            a.merge(b);
        }
        self.count += other.count;
    }
}

fn output_times(n_steps: u64, dt: f64, stride: u64) -> Vec<f64> {
    let mut times = vec![0.0];
    for m in 1..=n_steps {
        if m % stride == 0 || m == n_steps {
            times.push(dt * m as f64);
        }
    }
    times
}

/// Run `config.samples` independent paths and accumulate streaming
/// statistics. Sample m's increments come from stream m of the master seed.
pub fn run_ensemble(
    ws: &AssemblyWorkspace,
    u0: &SpectralVector,
    config: &EnsembleConfig,
) -> Result<EnsembleStats, StochasticError> {
    let n_steps = step_count(config.t_end, config.dt)?;
    let stride = config.output_stride.max(1) as u64;
    for &lag in &config.holder_lags {
        if lag == 0 || lag >= n_steps {
            return Err(StochasticError::InvalidConfig {
                reason: format!("Hölder lag {lag} outside (0, {n_steps})"),
            });
        }
    }
    if config.samples == 0 {
        return Err(StochasticError::InvalidConfig {
            reason: "ensemble needs at least one sample".into(),
        });
    }
    // Increment-moment sanity on a dedicated validation stream.
    let probe = WienerPath::new(config.seed, u64::MAX, config.dt);
    if !probe.moment_sanity_check() {
        return Err(StochasticError::InvalidConfig {
            reason: "Wiener increment moments failed the 5σ sanity check".into(),
        });
    }

    let chunks: Vec<(u64, u64)> = (0..config.samples)
        .step_by(ENSEMBLE_CHUNK as usize)
        .map(|start| (start, (start + ENSEMBLE_CHUNK).min(config.samples)))
        .collect();

    let partials: Result<Vec<EnsembleStats>, StochasticError> = chunks
        .par_iter()
        .map(|&(start, end)| accumulate_range(ws, u0, config, n_steps, stride, start..end))
        .collect();
    let partials = partials?;

    let times = output_times(n_steps, config.dt, stride);
    let mut total = EnsembleStats::empty(times, ws.n(), &config.holder_lags);
    for part in &partials {
        total.merge(part);
    }
    Ok(total)
}

fn accumulate_range(
    ws: &AssemblyWorkspace,
    u0: &SpectralVector,
    config: &EnsembleConfig,
    n_steps: u64,
    stride: u64,
    range: std::ops::Range<u64>,
) -> Result<EnsembleStats, StochasticError> {
    let sim = PathSimulator::new(ws)?;
    let n = ws.n();
    let times = output_times(n_steps, config.dt, stride);
    let mut stats = EnsembleStats::empty(times, n, &config.holder_lags);
    let mu = ws.basis.mu.clone();
    let lambda = ws.basis.lambda.clone();
    let max_lag = config.holder_lags.iter().copied().max().unwrap_or(0) as usize;

    // Per-path scratch reused across the range.
    let mut ring: Vec<Vec<f64>> = vec![vec![0.0; n]; max_lag + 1];
    let outputs = stats.times.len();
    let mut per_time_l2_sq = vec![0.0; outputs];
    let mut per_time_h1_sq = vec![0.0; outputs];
    let mut snapshots: Vec<Vec<f64>> = vec![vec![0.0; n]; outputs];

    for sample in range {
        let wiener = WienerPath::new(config.seed, sample, config.dt);
        let mut state = GalerkinState::new(0.0, u0.clone());
        let mut out_idx = 0usize;

        let record = |alpha: &SpectralVector,
                      out_idx: &mut usize,
                      per_l2: &mut [f64],
                      per_h1: &mut [f64],
                      snaps: &mut [Vec<f64>]| {
            let l2_sq: f64 = alpha.coeffs.iter().map(|a| a * a).sum();
            let h1_sq: f64 = alpha
                .coeffs
                .iter()
                .enumerate()
                .map(|(k, a)| lambda[k] * lambda[k] * a * a)
                .sum();
            per_l2[*out_idx] = l2_sq;
            per_h1[*out_idx] = h1_sq;
            snaps[*out_idx].copy_from_slice(&alpha.coeffs);
            *out_idx += 1;
        };
        record(
            &state.alpha,
            &mut out_idx,
            &mut per_time_l2_sq,
            &mut per_time_h1_sq,
            &mut snapshots,
        );

        let mut grad_sq_int = 0.0;
        let mut h2_sq_int = 0.0;
        let mut ito_term = 0.0;
        let mut holder_sums = vec![0.0; config.holder_lags.len()];
        let mut holder_counts = vec![0u64; config.holder_lags.len()];
        let sobolev_sums = |alpha: &SpectralVector| -> (f64, f64) {
            let mut g = 0.0;
            let mut h2 = 0.0;
            for (k, a) in alpha.coeffs.iter().enumerate() {
                g += mu[k] * a * a;
                h2 += lambda[k].powi(4) * a * a;
            }
            (g, h2)
        };
        let (mut prev_grad_sq, mut prev_h2_sq) = sobolev_sums(&state.alpha);
        ring[0].copy_from_slice(&state.alpha.coeffs);

        for m in 0..n_steps {
            let dw = wiener.increment(m);
            // Itô energy term uses the pre-step state: (∫Φ(u)u dV)·ΔW.
            let b = sim.noise_pairing(&state.alpha)?;
            ito_term += pairwise_dot(&b, &state.alpha.coeffs) * dw;

            state = sim.step(&state, config.dt, dw, sample)?;
            state.t = config.dt * (m + 1) as f64;

            let (grad_sq, h2_sq) = sobolev_sums(&state.alpha);
            grad_sq_int += 0.5 * config.dt * (grad_sq + prev_grad_sq);
            h2_sq_int += 0.5 * config.dt * (h2_sq + prev_h2_sq);
            prev_grad_sq = grad_sq;
            prev_h2_sq = h2_sq;

            // Hölder differences against the ring buffer of past states.
            for (li, &lag) in config.holder_lags.iter().enumerate() {
                if m + 1 >= lag {
                    let old = &ring[((m + 1 - lag) as usize) % (max_lag + 1)];
                    let diff_sq: f64 = state
                        .alpha
                        .coeffs
                        .iter()
                        .zip(old)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    holder_sums[li] += diff_sq;
                    holder_counts[li] += 1;
                }
            }
            if max_lag > 0 {
                let slot = ((m + 1) as usize) % (max_lag + 1);
                ring[slot].copy_from_slice(&state.alpha.coeffs);
            }

            if (m + 1) % stride == 0 || m + 1 == n_steps {
                record(
                    &state.alpha,
                    &mut out_idx,
                    &mut per_time_l2_sq,
                    &mut per_time_h1_sq,
                    &mut snapshots,
                );
            }
        }
        debug_assert_eq!(out_idx, outputs);

        // Fold this path into the running statistics.
        let count_f = (stats.count + 1) as f64;
        for (t_idx, snap) in snapshots.iter().enumerate() {
            for (j, &a) in snap.iter().enumerate() {
                stats.mean_field[t_idx][j] += (a - stats.mean_field[t_idx][j]) / count_f;
            }
            stats.l2[t_idx].push(per_time_l2_sq[t_idx].sqrt());
            stats.l2_sq[t_idx].push(per_time_l2_sq[t_idx]);
            stats.h1_sq[t_idx].push(per_time_h1_sq[t_idx]);
        }
        for (j, w) in stats.final_coeff_sq.iter_mut().enumerate() {
            let a = snapshots.last().expect("has outputs")[j];
            w.push(a * a);
        }
        stats.grad_sq_time_integral.push(grad_sq_int);
        stats.h2_sq_time_integral.push(h2_sq_int);
        stats.ito_energy_term.push(ito_term);
        for (li, (lag, w)) in stats.holder.iter_mut().enumerate() {
            let quotient = holder_sums[li] / (holder_counts[li] as f64 * *lag as f64 * config.dt);
            w.push(quotient);
        }
        stats.count += 1;
    }
    Ok(stats)
}

/// Monte Carlo check of the Itô isometry E[(Σ f_i ΔW_i)²] = Σ f_i² dt for a
/// deterministic step-function integrand.
#[derive(Debug, Clone)]
pub struct IsometryReport {
    pub estimate: f64,
    pub target: f64,
    pub stderr: f64,
    pub pass: bool,
}

pub fn ito_isometry_check(
    t_end: f64,
    dt: f64,
    samples: u64,
    seed: u64,
    integrand: &(dyn Fn(f64) -> f64 + Sync),
) -> Result<IsometryReport, StochasticError> {
    let n_steps = step_count(t_end, dt)?;
    let f: Vec<f64> = (0..n_steps).map(|m| integrand(m as f64 * dt)).collect();
    let target = pairwise_sum_by(0..f.len(), &|i| f[i] * f[i]) * dt;

    let chunks: Vec<(u64, u64)> = (0..samples)
        .step_by(ENSEMBLE_CHUNK as usize)
        .map(|start| (start, (start + ENSEMBLE_CHUNK).min(samples)))
        .collect();
    let partials: Vec<Welford> = chunks
        .par_iter()
        .map(|&(start, end)| {
            let mut w = Welford::default();
            for sample in start..end {
                let wiener = WienerPath::new(seed, sample, dt);
                let mut integral = 0.0;
                for (m, &fm) in f.iter().enumerate() {
                    integral += fm * wiener.increment(m as u64);
                }
                w.push(integral * integral);
            }
            w
        })
        .collect();
    let mut acc = Welford::default();
    for p in &partials {
        acc.merge(p);
    }
    let stderr = acc.stderr();
    Ok(IsometryReport {
        estimate: acc.mean,
        target,
        stderr,
        pass: (acc.mean - target).abs() <= 4.0 * stderr,
    })
}

/// Boundedness of the Hölder-½ quotient across lag decades.
#[derive(Debug, Clone)]
pub struct HolderReport {
    /// (lag·dt, quotient, stderr) per configured lag.
    pub quotients: Vec<(f64, f64, f64)>,
    /// max/min quotient over the lags.
    pub spread: f64,
    pub pass: bool,
}

/// Pass iff the quotient E‖u(t+Δ)−u(t)‖²/Δ varies by at most `max_spread`
/// across the configured lags (a bounded constant through the decades).
pub fn holder_half_check(stats: &EnsembleStats, dt: f64, max_spread: f64) -> HolderReport {
    let quotients: Vec<(f64, f64, f64)> = stats
        .holder
        .iter()
        .map(|(lag, w)| (*lag as f64 * dt, w.mean, w.stderr()))
        .collect();
    let max = quotients.iter().map(|q| q.1).fold(f64::NEG_INFINITY, f64::max);
    let min = quotients.iter().map(|q| q.1).fold(f64::INFINITY, f64::min);
    let spread = if min > 0.0 { max / min } else { f64::INFINITY };
    HolderReport {
        quotients,
        spread,
        pass: spread <= max_spread,
    }
}
