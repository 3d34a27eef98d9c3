//! Counter-based random numbers keyed by `(seed, replication, stream, site)`.
//!
//! Every draw is a pure function of its key, so any lattice site can be
//! sampled independently of every other one and in any order. The mixing
//! function is the splitmix64 finalizer:
//!
//! ```text
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! z =  z ^ (z >> 31)
//! ```
//!
//! Keys are absorbed one word at a time: `h = mix(h + GOLDEN + word)`.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Domain tags keep unrelated uses of the same seed apart.
pub mod stream {
    pub const BERNOULLI_SET: u64 = 0x5E7;
    pub const INNOVATION: u64 = 0x1_0000;
    pub const CENTERING: u64 = 0xCE47;
    pub const ESTIMATE: u64 = 0xE57;
}

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn absorb(h: u64, word: u64) -> u64 {
    mix64(h.wrapping_add(GOLDEN).wrapping_add(word))
}

/// A key that has absorbed a prefix; extend it with site coordinates and
/// read draws by counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Key(u64);

impl Key {
    pub fn new(seed: u64) -> Self {
        Key(absorb(0x6C61_7474_6963_6521, seed))
    }

    #[inline]
    pub fn with(self, word: u64) -> Self {
        Key(absorb(self.0, word))
    }

    #[inline]
    pub fn with_site(self, site: &[i64]) -> Self {
        site.iter().fold(self, |k, &c| k.with(c as u64))
    }

    /// The `counter`-th raw 64-bit draw under this key.
    #[inline]
    pub fn bits(self, counter: u64) -> u64 {
        mix64(absorb(self.0, counter ^ 0xA5A5_A5A5_0000_0000))
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn uniform(self, counter: u64) -> f64 {
        (self.bits(counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `(0, 1]`.
    #[inline]
    pub fn uniform_open0(self, counter: u64) -> f64 {
        1.0 - self.uniform(counter)
    }

    /// Standard normal by Box-Muller on draws `2c` and `2c+1`.
    #[inline]
    pub fn gaussian(self, counter: u64) -> f64 {
        let u1 = self.uniform_open0(2 * counter);
        let u2 = self.uniform(2 * counter + 1);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// Sequential stream on top of a [`Key`], for callers that just want the
/// next number.
#[derive(Debug, Clone)]
pub struct KeyedStream {
    key: Key,
    counter: u64,
}

impl KeyedStream {
    pub fn new(key: Key) -> Self {
        KeyedStream { key, counter: 0 }
    }

    pub fn next_uniform(&mut self) -> f64 {
        let u = self.key.uniform(self.counter);
        self.counter += 1;
        u
    }

    pub fn next_u64(&mut self) -> u64 {
        let b = self.key.bits(self.counter);
        self.counter += 1;
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_are_pure_functions_of_key() {
        let a = Key::new(7).with(3).with_site(&[1, -2]);
        let b = Key::new(7).with(3).with_site(&[1, -2]);
        assert_eq!(a.bits(5), b.bits(5));
        assert_ne!(a.bits(5), a.bits(6));
        assert_ne!(a, Key::new(7).with(3).with_site(&[-2, 1]));
    }

    #[test]
    fn uniform_moments() {
        let key = Key::new(1);
        let n = 200_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for i in 0..n {
            let u = key.uniform(i);
            assert!((0.0..1.0).contains(&u));
            s += u;
            s2 += u * u;
        }
        let mean = s / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!((mean - 0.5).abs() < 4.0 * (1.0f64 / 12.0 / n as f64).sqrt());
        assert!((var - 1.0 / 12.0).abs() < 2e-3);
    }

    #[test]
    fn gaussian_moments() {
        let n = 200_000u64;
        let (mut s, mut s2, mut s4) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let z = Key::new(99).with_site(&[i as i64]).gaussian(0);
            s += z;
            s2 += z * z;
            s4 += z.powi(4);
        }
        let nf = n as f64;
        assert!((s / nf).abs() < 4.0 / nf.sqrt());
        assert!((s2 / nf - 1.0).abs() < 4.0 * (2.0 / nf).sqrt());
        assert!((s4 / nf - 3.0).abs() < 0.1);
    }

    #[test]
    fn neighbouring_sites_are_uncorrelated() {
        let n = 100_000i64;
        let key = Key::new(5);
        let mut acc = 0.0;
        for i in 0..n {
            let a = key.with_site(&[i]).uniform(0) - 0.5;
            let b = key.with_site(&[i + 1]).uniform(0) - 0.5;
            acc += a * b;
        }
        // sd of a*b is 1/12
        assert!((acc / n as f64).abs() < 4.0 / 12.0 / (n as f64).sqrt());
    }
}
