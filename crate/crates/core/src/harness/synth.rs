use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::DataType;

const WORDS: [&str; 16] = [
    "sensor", "reading", "station", "north", "south", "pressure", "humidity", "window", "sample", "value", "batch",
    "offset", "level", "event", "node", "delta",
];

/// Seeded synthetic payload of exactly `size` bytes.
///
/// Text is space-separated words with newlines. Image and video get a
/// format header (PNG signature, MP4 `ftyp` box) followed by random bytes.
pub fn synthesize(kind: DataType, size: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ kind as u64);
    let mut out = Vec::with_capacity(size);
    match kind {
        DataType::Text => {
            let mut line = 0usize;
            while out.len() < size {
                let w = WORDS[rng.gen_range(0..WORDS.len())];
                out.extend_from_slice(w.as_bytes());
                line += w.len() + 1;
                if line > 72 {
                    out.push(b'\n');
                    line = 0;
                } else {
                    out.push(b' ');
                }
            }
        }
        DataType::Image => {
            out.extend_from_slice(b"\x89PNG\r\n\x1a\n\x00\x00\x00\x0dIHDR");
            out.extend_from_slice(&rng.gen::<[u8; 13]>());
        }
        DataType::Video => {
            out.extend_from_slice(b"\x00\x00\x00\x20ftypisom\x00\x00\x02\x00isomiso2avc1mp41");
        }
    }
    let start = out.len().min(size);
    out.resize(size, 0);
    if kind != DataType::Text {
        rng.fill_bytes(&mut out[start..]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_size_and_deterministic() {
        for kind in DataType::ALL {
            for size in [1, 7, 1000, 65_537] {
                let a = synthesize(kind, size, 3);
                assert_eq!(a.len(), size);
                assert_eq!(a, synthesize(kind, size, 3));
            }
            assert_ne!(synthesize(kind, 4096, 3), synthesize(kind, 4096, 4));
        }
    }

    #[test]
    fn headers() {
        assert!(synthesize(DataType::Image, 100, 1).starts_with(b"\x89PNG"));
        assert_eq!(&synthesize(DataType::Video, 100, 1)[4..8], b"ftyp");
        assert!(synthesize(DataType::Text, 500, 1).iter().all(|b| b.is_ascii()));
    }
}
