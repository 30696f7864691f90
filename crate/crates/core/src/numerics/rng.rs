//! Path-addressed random streams.
//!
//! A stream is identified by a master seed plus a path of labels such as
//! `["rep", 17, "weights"]`. The path is hashed into a ChaCha12 key, so any
//! stream can be re-derived from its address alone without touching shared
//! state. Replications running on different threads therefore see exactly
//! the same numbers regardless of scheduling.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{invalid, Result};

const DOMAIN: &[u8] = b"msgd-core/rng-stream/v1";

/// One component of a stream path.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(untagged)]
pub enum Label {
    Name(String),
    Index(u64),
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label::Name(s.to_owned())
    }
}

impl From<String> for Label {
    fn from(s: String) -> Self {
        Label::Name(s)
    }
}

impl From<u64> for Label {
    fn from(i: u64) -> Self {
        Label::Index(i)
    }
}

impl From<usize> for Label {
    fn from(i: usize) -> Self {
        Label::Index(i as u64)
    }
}

impl From<u32> for Label {
    fn from(i: u32) -> Self {
        Label::Index(u64::from(i))
    }
}

/// A deterministic random stream addressed by `(master_seed, path)`.
#[derive(Clone, Debug)]
pub struct RngStream {
    master_seed: u64,
    path: Vec<Label>,
    core: ChaCha12Rng,
}

fn key_for(master_seed: u64, path: &[Label]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(DOMAIN);
    h.update(master_seed.to_le_bytes());
    for label in path {
        match label {
            Label::Name(s) => {
                h.update([0u8]);
                h.update((s.len() as u64).to_le_bytes());
                h.update(s.as_bytes());
            }
            Label::Index(i) => {
                h.update([1u8]);
                h.update(i.to_le_bytes());
            }
        }
    }
    h.finalize().into()
}

impl RngStream {
    /// The root stream of a master seed (empty path).
    pub fn root(master_seed: u64) -> Self {
        derive_stream(master_seed, Vec::<Label>::new())
    }

    /// Child stream at `path ++ [label]`. Independent of how much of `self`
    /// has already been consumed.
    pub fn derive(&self, label: impl Into<Label>) -> Self {
        let mut path = self.path.clone();
        path.push(label.into());
        derive_stream(self.master_seed, path)
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn path(&self) -> &[Label] {
        &self.path
    }

    /// Number of 32-bit words consumed so far.
    pub fn word_pos(&self) -> u128 {
        self.core.get_word_pos()
    }

    /// Uniform on [0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.core.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on the open interval (0, 1).
    #[inline]
    pub fn uniform_open(&mut self) -> f64 {
        ((self.core.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..bound`.
    #[inline]
    pub fn below(&mut self, bound: usize) -> usize {
        debug_assert!(bound > 0);
        self.core.random_range(0..bound)
    }

    #[inline]
    pub fn next_bit(&mut self) -> bool {
        self.core.next_u32() & 1 == 1
    }

    #[inline]
    pub fn std_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.core)
    }

    pub fn fill_std_normal(&mut self, out: &mut [f64]) {
        for x in out {
            *x = self.std_normal();
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.core.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.core.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.core.fill_bytes(dst)
    }
}

/// Derive the stream living at `(master_seed, path)`.
pub fn derive_stream<I, L>(master_seed: u64, path: I) -> RngStream
where
    I: IntoIterator<Item = L>,
    L: Into<Label>,
{
    let path: Vec<Label> = path.into_iter().map(Into::into).collect();
    let core = ChaCha12Rng::from_seed(key_for(master_seed, &path));
    RngStream {
        master_seed,
        path,
        core,
    }
}

/// `d` iid standard normal draws.
pub fn sample_std_normal(stream: &mut RngStream, d: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    stream.fill_std_normal(&mut v);
    v
}

/// One Gamma(shape, 1) draw.
pub fn sample_gamma(stream: &mut RngStream, shape: f64) -> Result<f64> {
    if !(shape > 0.0) || !shape.is_finite() {
        return Err(invalid("shape", format!("must be positive and finite, got {shape}")));
    }
    let law = Gamma::new(shape, 1.0).map_err(|e| invalid("shape", e.to_string()))?;
    Ok(law.sample(stream))
}
