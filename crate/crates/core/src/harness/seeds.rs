use sha2::{Digest, Sha256};

/// Seed stream. Tuning and reporting trials never share seeds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stream {
    Tune,
    Report,
}

impl Stream {
    fn tag(self) -> &'static [u8] {
        match self {
            Stream::Tune => b"tune",
            Stream::Report => b"report",
        }
    }
}

/// `SHA-256(master || stream || component || coords...)`, truncated to 64 bits.
///
/// Each random component (graph, signals, subgraph, noise) is keyed only by
/// the coordinates it depends on, so extending an unrelated grid leaves it
/// unchanged.
pub fn derive_seed(master: u64, stream: Stream, component: &str, coords: &[u64]) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update([0xff]);
    h.update(stream.tag());
    h.update([0xff]);
    h.update(component.as_bytes());
    h.update([0xff]);
    for c in coords {
        h.update(c.to_le_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}
