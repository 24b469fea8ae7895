//! Counter-based keyed random streams.
//!
//! A stream is a 64-bit key plus a draw counter. Output `n` is a keyed hash of
//! `n`, so a stream can be positioned anywhere without replaying earlier
//! draws, and child streams are derived from the key alone: forking never
//! touches the parent's counter. Keys are pure functions of the seed and the
//! fork labels, which makes every draw addressable by a label path such as
//! `("iter", 17, "dynamics", state, action, count)`.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const TAG_INT: u64 = 0x5851_F42D_4C95_7F2D;
const TAG_STR: u64 = 0x1405_7B7E_F767_814F;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over bytes; stable across processes and platforms.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01B3);
    }
    h
}

/// A domain-separation label used when forking a stream.
#[derive(Clone, Copy, Debug)]
pub enum Label<'a> {
    Int(u64),
    Str(&'a str),
}

impl Label<'_> {
    fn digest(self) -> u64 {
        match self {
            Label::Int(v) => mix64(v ^ TAG_INT),
            Label::Str(s) => mix64(stable_hash(s.as_bytes()) ^ TAG_STR),
        }
    }
}

impl From<u64> for Label<'_> {
    fn from(v: u64) -> Self {
        Label::Int(v)
    }
}

impl From<usize> for Label<'_> {
    fn from(v: usize) -> Self {
        Label::Int(v as u64)
    }
}

impl From<u32> for Label<'_> {
    fn from(v: u32) -> Self {
        Label::Int(u64::from(v))
    }
}

impl<'a> From<&'a str> for Label<'a> {
    fn from(s: &'a str) -> Self {
        Label::Str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
    key: u64,
    counter: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            key: mix64(seed ^ GOLDEN),
            counter: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of 64-bit draws taken from this stream so far.
    pub fn position(&self) -> u64 {
        self.counter
    }

    /// Derives an independent child stream. Label order matters:
    /// `fork(a).fork(b)` and `fork(b).fork(a)` differ.
    pub fn fork<'a>(&self, label: impl Into<Label<'a>>) -> RngStream {
        let d = label.into().digest();
        RngStream {
            seed: self.seed,
            key: mix64(self.key.rotate_left(23) ^ d),
            counter: 0,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let c = self.counter;
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key ^ mix64(c.wrapping_mul(GOLDEN).wrapping_add(GOLDEN)))
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n` (Lemire's widening multiply).
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        ((u128::from(self.next_u64()) * n as u128) >> 64) as usize
    }

    /// Returns true with probability `p`.
    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}
