//! The truncation map χ and the compactly supported noise cutoff.
//!
//! χ is the identity on [0, 1], constant on (−∞, −1] and [2, ∞), C² and
//! nondecreasing; it is built by integrating a quintic-smoothstep profile
//! for χ′, so the identity branch returns λ bit-for-bit.

/// Quintic smoothstep: 0 for t ≤ 0, 1 for t ≥ 1, 6t⁵−15t⁴+10t³ in between.
pub(crate) fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
    }
}

pub(crate) fn smoothstep_d1(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        30.0 * t * t * (t - 1.0) * (t - 1.0)
    }
}

/// ∫₀^t smoothstep, for t ∈ [0, 1].
pub(crate) fn smoothstep_integral(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * t * (2.5 + t * (-3.0 + t))
}

/// χ(λ): identity on `[0,1]`, ramps to the constants −1/2 and 3/2 over
/// [−1, 0] and [1, 2].
pub fn chi(lambda: f64) -> f64 {
    if (0.0..=1.0).contains(&lambda) {
        lambda
    } else if lambda >= 2.0 {
        1.5
    } else if lambda > 1.0 {
        1.5 - smoothstep_integral(2.0 - lambda)
    } else if lambda <= -1.0 {
        -0.5
    } else {
        smoothstep_integral(lambda + 1.0) - 0.5
    }
}

/// χ′(λ) ∈ [0, 1].
pub fn chi_d1(lambda: f64) -> f64 {
    if (0.0..=1.0).contains(&lambda) {
        1.0
    } else if lambda > 1.0 {
        smoothstep(2.0 - lambda)
    } else {
        smoothstep(lambda + 1.0)
    }
}

/// χ″(λ).
pub fn chi_d2(lambda: f64) -> f64 {
    if (0.0..=1.0).contains(&lambda) {
        0.0
    } else if lambda > 1.0 {
        -smoothstep_d1(2.0 - lambda)
    } else {
        smoothstep_d1(lambda + 1.0)
    }
}

/// C² bump equal to 1 on [−1, 1] and 0 outside [−2, 2]; makes the
/// multiplicative noise literally compactly supported in λ.
pub fn noise_cutoff(lambda: f64) -> f64 {
    let a = lambda.abs();
    if a <= 1.0 {
        1.0
    } else if a >= 2.0 {
        0.0
    } else {
        smoothstep(2.0 - a)
    }
}

pub fn noise_cutoff_d1(lambda: f64) -> f64 {
    let a = lambda.abs();
    if a <= 1.0 || a >= 2.0 {
        0.0
    } else {
        -lambda.signum() * smoothstep_d1(2.0 - a)
    }
}
