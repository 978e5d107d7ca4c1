//! Deterministic seed derivation for reproducible Monte Carlo experiments.
//!
//! A single master seed fans out into a tree of independent ChaCha12
//! generators. Interior nodes are 64-bit states mixed with splitmix64;
//! leaves are named streams whose labels are hashed with FNV-1a. The mapping
//! from `(master seed, sweep index, trial index, stream label)` to generator
//! output is a pure function of those four values — it does not depend on
//! thread scheduling, platform, or the order in which streams are created —
//! so paired trials (all schemes observing the same realizations) and
//! byte-identical reruns come for free.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Stream label for receiver/user placement draws.
pub const GEOMETRY_STREAM: &str = "geometry";
/// Stream label for small-scale fading draws.
pub const CHANNEL_STREAM: &str = "channel";
/// Stream label for sparse transmit-signal draws (support and amplitudes).
pub const SIGNAL_STREAM: &str = "signal";
/// Stream label for additive receiver noise draws.
pub const NOISE_STREAM: &str = "noise";
/// Stream label for random-phase compression-matrix draws.
pub const COMPRESSION_STREAM: &str = "compression";

const STREAM_TAG: u64 = 0x5354_5245_414d_0001; // domain separator for labelled leaves
const CHILD_TAG: u64 = 0x4348_494c_4400_0001; // domain separator for indexed children
const SWEEP_TAG: u64 = 0x5357_4545_5000_0001;
const TRIAL_TAG: u64 = 0x5452_4941_4c00_0001;

/// A node in the deterministic seed tree.
///
/// `SeedTree::new(master)` is the root; [`SeedTree::trial`] descends to the
/// subtree owned by one Monte Carlo trial of one sweep point, and
/// [`SeedTree::stream`] instantiates a named generator below the current
/// node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedTree {
    node: u64,
}

impl SeedTree {
    /// Root of the tree for a given master seed.
    pub fn new(master_seed: u64) -> Self {
        SeedTree { node: master_seed }
    }

    /// Child node at an arbitrary index.
    pub fn child(&self, index: u64) -> SeedTree {
        SeedTree {
            node: mix(self.node, CHILD_TAG ^ index),
        }
    }

    /// Subtree owned by `trial_index` of sweep point `sweep_index`.
    ///
    /// Distinct `(sweep_index, trial_index)` pairs yield statistically
    /// independent subtrees under the same master seed.
    pub fn trial(&self, sweep_index: usize, trial_index: usize) -> SeedTree {
        let s = mix(self.node, SWEEP_TAG ^ sweep_index as u64);
        SeedTree {
            node: mix(s, TRIAL_TAG ^ trial_index as u64),
        }
    }

    /// Instantiate the named generator below this node.
    ///
    /// The same `(node, label)` pair always yields a generator with the same
    /// output sequence.
    pub fn stream(&self, label: &str) -> ChaCha12Rng {
        let leaf = mix(self.node, STREAM_TAG ^ fnv1a(label.as_bytes()));
        let mut key = [0u8; 32];
        let mut state = leaf;
        for chunk in key.chunks_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        ChaCha12Rng::from_seed(key)
    }
}

/// FNV-1a hash of a byte string (stable across platforms and releases).
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// One splitmix64 step: advances `state` and returns a mixed output.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combine a node state with a tagged key into a new node state.
fn mix(node: u64, key: u64) -> u64 {
    let mut state = node ^ key.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    let a = splitmix64(&mut state);
    splitmix64(&mut state).wrapping_add(a.rotate_left(23))
}
