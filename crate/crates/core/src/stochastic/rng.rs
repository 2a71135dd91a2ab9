//! Counter-based random numbers (Philox 4x32-10).
//!
//! Every draw is a pure function of (key, counter), so Wiener increments are
//! addressable by (master seed, sample index, step index) and ensemble
//! results cannot depend on scheduling. Constants are the standard Philox
//! round multipliers and Weyl keys.

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;
const PHILOX_ROUNDS: usize = 10;

#[inline]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = a as u64 * b as u64;
    ((p >> 32) as u32, p as u32)
}

/// One Philox 4x32-10 block: 128 counter bits, 64 key bits → 128 output bits.
pub fn philox4x32(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = counter;
    let mut k = key;
    for _ in 0..PHILOX_ROUNDS {
        let (hi0, lo0) = mulhilo(PHILOX_M0, c[0]);
        let (hi1, lo1) = mulhilo(PHILOX_M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
        k[0] = k[0].wrapping_add(PHILOX_W0);
        k[1] = k[1].wrapping_add(PHILOX_W1);
    }
    c
}

fn split64(x: u64) -> [u32; 2] {
    [x as u32, (x >> 32) as u32]
}

fn to_u64(lo: u32, hi: u32) -> u64 {
    lo as u64 | (hi as u64) << 32
}

/// Uniform in (0, 1) from 53 random bits; never exactly 0, so logs are safe.
#[inline]
fn u64_to_unit(x: u64) -> f64 {
    ((x >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
}

/// Two uniforms in (0,1) addressed by (seed, stream, index).
pub fn uniform_pair(seed: u64, stream: u64, index: u64) -> (f64, f64) {
    let c = philox4x32(
        [
            split64(index)[0],
            split64(index)[1],
            split64(stream)[0],
            split64(stream)[1],
        ],
        split64(seed),
    );
    (
        u64_to_unit(to_u64(c[0], c[1])),
        u64_to_unit(to_u64(c[2], c[3])),
    )
}

/// Standard normal addressed by (seed, stream, index), via Box–Muller.
pub fn standard_normal(seed: u64, stream: u64, index: u64) -> f64 {
    let (u1, u2) = uniform_pair(seed, stream, index);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Sequential convenience view over one (seed, stream) pair.
#[derive(Debug, Clone)]
pub struct CounterStream {
    seed: u64,
    stream: u64,
    next: u64,
}

impl CounterStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        CounterStream {
            seed,
            stream,
            next: 0,
        }
    }

    pub fn uniform(&mut self) -> f64 {
        let (u, _) = uniform_pair(self.seed, self.stream, self.next);
        self.next += 1;
        u
    }

    /// Uniform in (−1, 1).
    pub fn uniform_symmetric(&mut self) -> f64 {
        2.0 * self.uniform() - 1.0
    }

    pub fn normal(&mut self) -> f64 {
        let z = standard_normal(self.seed, self.stream, self.next);
        self.next += 1;
        z
    }
}
