//! Counter-based random numbers.
//!
//! Philox4x32-10 maps a 128-bit counter and 64-bit key to 128 random bits
//! with no state carried between calls, so the draws for path `i`, step `s`
//! are a pure function of `(seed, i, s)`. That makes results independent of
//! how paths are split across workers.

use rand::RngCore;

const M0: u32 = 0xD251_1F53;
const M1: u32 = 0xCD9E_8D57;
const W0: u32 = 0x9E37_79B9;
const W1: u32 = 0xBB67_AE85;
const BLOCK_MASK: u32 = 0x0FFF_FFFF;

/// Largest step index a [`StepRng`] can address.
pub const MAX_STEP: u64 = u32::MAX as u64;

#[inline]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = u64::from(a) * u64::from(b);
    ((p >> 32) as u32, p as u32)
}

/// One Philox4x32-10 block.
pub fn philox4x32(ctr: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = ctr;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(W0);
            k[1] = k[1].wrapping_add(W1);
        }
        let (hi0, lo0) = mulhilo(M0, c[0]);
        let (hi1, lo1) = mulhilo(M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

/// Independent purposes for which a step draws randomness. Each gets its
/// own counter range so adding a draw for one never shifts another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Domain {
    Noise = 0,
    Bridge = 1,
    Start = 2,
    Exact = 3,
}

/// Random stream for one `(seed, stream, step, domain)` cell.
///
/// Counter layout: word 0 holds the step, word 1 the domain (top 4 bits)
/// and a 28-bit block counter, words 2 and 3 the stream. Steps therefore
/// must fit in 32 bits; the samplers enforce that.
#[derive(Debug, Clone)]
pub struct StepRng {
    key: [u32; 2],
    ctr: [u32; 4],
    buf: [u32; 4],
    pos: usize,
}

impl StepRng {
    pub fn new(seed: u64, stream: u64, step: u64, domain: Domain) -> Self {
        debug_assert!(step <= u64::from(u32::MAX));
        let key = [seed as u32, (seed >> 32) as u32];
        let ctr = [
            step as u32,
            u32::from(domain as u8) << 28,
            stream as u32,
            (stream >> 32) as u32,
        ];
        Self { key, ctr, buf: [0; 4], pos: 4 }
    }

    fn refill(&mut self) {
        self.buf = philox4x32(self.ctr, self.key);
        let sub = (self.ctr[1] & BLOCK_MASK).wrapping_add(1) & BLOCK_MASK;
        self.ctr[1] = (self.ctr[1] & !BLOCK_MASK) | sub;
        self.pos = 0;
    }
}

impl RngCore for StepRng {
    fn next_u32(&mut self) -> u32 {
        if self.pos == 4 {
            self.refill();
        }
        let v = self.buf[self.pos];
        self.pos += 1;
        v
    }

    fn next_u64(&mut self) -> u64 {
        let lo = u64::from(self.next_u32());
        let hi = u64::from(self.next_u32());
        (hi << 32) | lo
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(4) {
            let w = self.next_u32().to_le_bytes();
            chunk.copy_from_slice(&w[..chunk.len()]);
        }
    }
}

/// Uniform on the open interval `(0, 1)` from 53 random bits.
pub fn open_unit(rng: &mut impl RngCore) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Known-answer vectors published with the Random123 library.
    #[test]
    fn known_answers() {
        assert_eq!(philox4x32([0; 4], [0; 2]), [0x6627_e8d5, 0xe169_c58d, 0xbc57_ac4c, 0x9b00_dbd8]);
        assert_eq!(philox4x32([u32::MAX; 4], [u32::MAX; 2]), [0x408f_276d, 0x41c8_3b0e, 0xa20b_c7c6, 0x6d54_51fd]);
        assert_eq!(
            philox4x32([0x243f_6a88, 0x85a3_08d3, 0x1319_8a2e, 0x0370_7344], [0xa409_3822, 0x299f_31d0]),
            [0xd16c_fe09, 0x94fd_cceb, 0x5001_e420, 0x2412_6ea1]
        );
    }

    #[test]
    fn cells_are_distinct_and_repeatable() {
        let draw = |s, i, k, d| StepRng::new(s, i, k, d).next_u64();
        assert_eq!(draw(7, 3, 11, Domain::Noise), draw(7, 3, 11, Domain::Noise));
        let base = draw(7, 3, 11, Domain::Noise);
        assert_ne!(base, draw(8, 3, 11, Domain::Noise));
        assert_ne!(base, draw(7, 4, 11, Domain::Noise));
        assert_ne!(base, draw(7, 3, 12, Domain::Noise));
        assert_ne!(base, draw(7, 3, 11, Domain::Bridge));
    }

    #[test]
    fn long_draws_advance_the_sub_counter() {
        let mut r = StepRng::new(1, 2, 3, Domain::Exact);
        let first: alloc::vec::Vec<u32> = (0..8).map(|_| r.next_u32()).collect();
        assert_ne!(first[..4], first[4..]);
    }

    #[test]
    fn open_unit_mean() {
        let mut r = StepRng::new(42, 0, 0, Domain::Exact);
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| open_unit(&mut r)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 4.0 * (1.0 / 12.0f64 / n as f64).sqrt());
    }
}
