//! Seeded sampling of `G(n, p)`.
//!
//! Every replicate owns an independent ChaCha8 stream: the key comes from the
//! experiment seed and the stream id is the replicate index, so replicate `i`
//! draws the same edges no matter which worker runs it or in which order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::copies::{EdgeConfiguration, EdgeUniverse};
use crate::error::{check_open_probability, Result};

/// Name of the generator, recorded in reports.
pub const GENERATOR: &str = "chacha8(key=splitmix64(seed), stream=replicate)";

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The random stream of replicate `replicate` under `seed`.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = seed;
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(replicate);
    rng
}

/// Uniform on `(0, 1]` with 53 random bits.
#[inline]
fn open_unit(rng: &mut impl RngCore) -> f64 {
    ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Method {
    /// one random word per 64 edges
    FairCoin,
    /// compare one 64-bit draw per edge against `p · 2^64`
    Threshold(u64),
    /// jump over absent edges with geometric gaps
    Skip { log_q: f64 },
}

/// Bernoulli(`p`) edge sampler over a fixed universe.
#[derive(Debug, Clone, Copy)]
pub struct GnpSampler {
    universe: EdgeUniverse,
    p: f64,
    method: Method,
}

impl GnpSampler {
    pub fn new(universe: EdgeUniverse, p: f64) -> Result<Self> {
        check_open_probability(p)?;
        let method = if p == 0.5 {
            Method::FairCoin
        } else if p < 0.25 {
            Method::Skip {
                log_q: (-p).ln_1p(),
            }
        } else {
            Method::Threshold((p * 18_446_744_073_709_551_616.0) as u64)
        };
        Ok(Self {
            universe,
            p,
            method,
        })
    }

    pub fn universe(&self) -> EdgeUniverse {
        self.universe
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn sample(&self, rng: &mut impl RngCore) -> EdgeConfiguration {
        let mut c = EdgeConfiguration::empty(self.universe);
        self.sample_into(&mut c, rng);
        c
    }

    /// Overwrites `config` with a fresh draw.
    pub fn sample_into(&self, config: &mut EdgeConfiguration, rng: &mut impl RngCore) {
        debug_assert_eq!(config.universe(), self.universe);
        let total = self.universe.edge_count();
        let words = config.words_mut();
        words.fill(0);
        match self.method {
            Method::FairCoin => {
                for w in words.iter_mut() {
                    *w = rng.next_u64();
                }
                if total % 64 != 0 {
                    if let Some(last) = words.last_mut() {
                        *last &= (1u64 << (total % 64)) - 1;
                    }
                }
            }
            Method::Threshold(th) => {
                for e in 0..total {
                    if rng.next_u64() < th {
                        words[e / 64] |= 1 << (e % 64);
                    }
                }
            }
            Method::Skip { log_q } => {
                let mut e = 0usize;
                loop {
                    let gap = (open_unit(rng).ln() / log_q).floor();
                    if gap >= (total - e) as f64 {
                        break;
                    }
                    e += gap as usize;
                    words[e / 64] |= 1 << (e % 64);
                    e += 1;
                    if e >= total {
                        break;
                    }
                }
            }
        }
    }
}
