//! Fingerprinting and slot-word packing shared by both filters.
//!
//! Everything here is a pure function of its inputs, so insert-side and
//! query-side computations always agree.

use crate::error::{Error, Result};

/// Slot word marking a never-used slot.
pub const EMPTY: u32 = 0;
/// Slot word marking a deleted slot; reusable by later inserts.
pub const TOMBSTONE: u32 = 1;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// 64-bit avalanche finalizer (xor-shift-multiply chain).
#[inline]
pub fn mix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
pub(crate) fn low_mask(bits: u32) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

/// A `bits`-wide hash of a key. The only identity a filter stores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fingerprint {
    value: u64,
    bits: u32,
}

impl Fingerprint {
    pub fn new(value: u64, bits: u32) -> Result<Self> {
        check_width(bits)?;
        if value & !low_mask(bits) != 0 {
            return Err(Error::param(format!("{value:#x} does not fit in {bits} bits")));
        }
        Ok(Fingerprint { value, bits })
    }

    pub fn value(self) -> u64 {
        self.value
    }

    pub fn bits(self) -> u32 {
        self.bits
    }

    /// Splits into the top `quotient_bits` and the remaining low bits.
    pub fn split(self, quotient_bits: u32) -> Result<QuotRem> {
        if quotient_bits > self.bits {
            return Err(Error::param(format!(
                "quotient width {quotient_bits} exceeds fingerprint width {}",
                self.bits
            )));
        }
        let remainder_bits = self.bits - quotient_bits;
        Ok(QuotRem {
            quotient: if remainder_bits == 64 { 0 } else { self.value >> remainder_bits },
            remainder: self.value & low_mask(remainder_bits),
            remainder_bits,
        })
    }
}

fn check_width(bits: u32) -> Result<()> {
    if (1..=64).contains(&bits) {
        Ok(())
    } else {
        Err(Error::param(format!("fingerprint width {bits} not in 1..=64")))
    }
}

/// Hashes `key` under `seed` and keeps the low `bits` bits.
pub fn fingerprint(key: u64, seed: u64, bits: u32) -> Result<Fingerprint> {
    check_width(bits)?;
    Ok(Fingerprint {
        value: mix64(key ^ seed) & low_mask(bits),
        bits,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QuotRem {
    pub quotient: u64,
    pub remainder: u64,
    pub remainder_bits: u32,
}

impl QuotRem {
    /// Rebuilds the fingerprint value the pair was split from.
    pub fn join(&self) -> u64 {
        if self.remainder_bits == 64 {
            self.remainder
        } else {
            (self.quotient << self.remainder_bits) | self.remainder
        }
    }
}

/// Primary and secondary block for a fingerprint. The two may coincide.
pub fn potc_pair(fp: u64, num_blocks: usize) -> Result<(usize, usize)> {
    if num_blocks == 0 {
        return Err(Error::param("num_blocks must be at least 1"));
    }
    Ok(block_pair(fp, num_blocks))
}

#[inline]
pub(crate) fn block_pair(fp: u64, num_blocks: usize) -> (usize, usize) {
    let n = num_blocks as u64;
    let a = mix64(fp ^ 0x5851_f42d_4c95_7f2d);
    let b = mix64(fp.rotate_left(29) ^ 0x1405_7b7e_f767_814f);
    ((a % n) as usize, (b % n) as usize)
}

/// Bit layout of a slot word: tag in the low `tag_bits`, value above it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotLayout {
    slot_bits: u32,
    tag_bits: u32,
}

impl SlotLayout {
    pub fn new(slot_bits: u32, tag_bits: u32) -> Result<Self> {
        if !matches!(slot_bits, 8 | 16 | 32) {
            return Err(Error::param(format!("slot width {slot_bits} not in {{8, 16, 32}}")));
        }
        if tag_bits < 2 || tag_bits > slot_bits {
            return Err(Error::param(format!(
                "tag width {tag_bits} must be in 2..={slot_bits}"
            )));
        }
        Ok(SlotLayout { slot_bits, tag_bits })
    }

    pub fn slot_bits(self) -> u32 {
        self.slot_bits
    }

    pub fn tag_bits(self) -> u32 {
        self.tag_bits
    }

    pub fn value_bits(self) -> u32 {
        self.slot_bits - self.tag_bits
    }

    #[inline]
    pub(crate) fn tag_mask(self) -> u32 {
        low_mask(self.tag_bits) as u32
    }

    /// Tags 0 and 1 would let a zero value collide with the sentinels, so
    /// they are folded onto 2 and 3 regardless of the value.
    #[inline]
    pub fn remap_tag(tag: u32) -> u32 {
        if tag < 2 {
            tag | 2
        } else {
            tag
        }
    }

    /// Query-side tag of a fingerprint (already remapped).
    #[inline]
    pub fn tag_of(self, fp: u64) -> u32 {
        Self::remap_tag(fp as u32 & self.tag_mask())
    }

    pub fn pack(self, tag: u32, value: u32) -> Result<u32> {
        if tag & !self.tag_mask() != 0 {
            return Err(Error::param(format!("tag {tag} exceeds {} bits", self.tag_bits)));
        }
        if value as u64 & !low_mask(self.value_bits()) != 0 {
            return Err(Error::param(format!(
                "value {value} exceeds {} bits",
                self.value_bits()
            )));
        }
        Ok(self.pack_unchecked(tag, value))
    }

    #[inline]
    pub(crate) fn pack_unchecked(self, tag: u32, value: u32) -> u32 {
        let tag = Self::remap_tag(tag);
        if self.value_bits() == 0 {
            tag
        } else {
            tag | (value << self.tag_bits)
        }
    }

    #[inline]
    pub fn unpack(self, word: u32) -> (u32, u32) {
        let value = if self.value_bits() == 0 { 0 } else { word >> self.tag_bits };
        (word & self.tag_mask(), value)
    }

    #[inline]
    pub(crate) fn tag_matches(self, word: u32, tag: u32) -> bool {
        word & self.tag_mask() == tag && word > TOMBSTONE
    }

    /// Orders words by tag first, so sorted blocks can be searched by tag.
    #[inline]
    pub(crate) fn sort_key(self, word: u32) -> u32 {
        if self.value_bits() == 0 {
            word
        } else {
            let (tag, value) = self.unpack(word);
            (tag << self.value_bits()) | value
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, DiscreteCDF};

    #[test]
    fn full_width_fingerprint_is_the_mixer() {
        for k in [0u64, 1, 42, u64::MAX] {
            assert_eq!(fingerprint(k, 7, 64).unwrap().value(), mix64(k ^ 7));
        }
    }

    #[test]
    fn truncation_matches_untruncated_output() {
        let mut rng = StdRng::seed_from_u64(1);
        for _ in 0..1000 {
            let k: u64 = rng.random();
            let p = rng.random_range(1..=64u32);
            let full = fingerprint(k, 99, 64).unwrap().value();
            assert_eq!(fingerprint(k, 99, p).unwrap().value(), full & low_mask(p));
        }
    }

    #[test]
    fn invalid_widths_are_rejected() {
        assert!(fingerprint(1, 1, 0).is_err());
        assert!(fingerprint(1, 1, 65).is_err());
        let fp = fingerprint(1, 1, 16).unwrap();
        assert!(fp.split(17).is_err());
        assert!(potc_pair(1, 0).is_err());
        assert!(SlotLayout::new(12, 12).is_err());
        assert!(SlotLayout::new(16, 1).is_err());
        assert!(SlotLayout::new(16, 17).is_err());
    }

    #[test]
    fn chi_square_low_16_bits() {
        let bins = 1usize << 16;
        let n = 1_000_000u64;
        let mut counts = vec![0u32; bins];
        let mut rng = StdRng::seed_from_u64(0xfeed);
        for _ in 0..n {
            let fp = fingerprint(rng.random(), 3, 64).unwrap().value();
            counts[(fp & 0xffff) as usize] += 1;
        }
        let expected = n as f64 / bins as f64;
        let stat: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        let critical = ChiSquared::new((bins - 1) as f64).unwrap().inverse_cdf(0.999);
        assert!(stat < critical, "chi-square {stat} >= {critical}");
    }

    #[test]
    fn split_examples() {
        let qr = Fingerprint::new(0x1234, 16).unwrap().split(8).unwrap();
        assert_eq!((qr.quotient, qr.remainder), (0x12, 0x34));
        let qr = Fingerprint::new(0, 16).unwrap().split(8).unwrap();
        assert_eq!((qr.quotient, qr.remainder), (0, 0));
        let qr = Fingerprint::new(u64::MAX, 64).unwrap().split(0).unwrap();
        assert_eq!((qr.quotient, qr.remainder), (0, u64::MAX));
        let qr = Fingerprint::new(u64::MAX, 64).unwrap().split(64).unwrap();
        assert_eq!((qr.quotient, qr.remainder), (u64::MAX, 0));
    }

    #[test]
    fn split_round_trip_random() {
        let mut rng = StdRng::seed_from_u64(2);
        for _ in 0..100_000 {
            let p = rng.random_range(1..=64u32);
            let q = rng.random_range(0..=p);
            let v = rng.random::<u64>() & low_mask(p);
            let fp = Fingerprint::new(v, p).unwrap();
            let qr = fp.split(q).unwrap();
            assert!(q == 64 || qr.quotient < (1u64 << q) || q == 0 && qr.quotient == 0);
            assert_eq!(qr.join(), v);
        }
    }

    #[test]
    fn potc_single_block_and_determinism() {
        assert_eq!(potc_pair(12345, 1).unwrap(), (0, 0));
        assert_eq!(potc_pair(777, 64).unwrap(), potc_pair(777, 64).unwrap());
    }

    #[test]
    fn potc_primary_balance() {
        let blocks = 1024;
        let mut counts = vec![0u32; blocks];
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..1_000_000 {
            let (p, _) = potc_pair(rng.random(), blocks).unwrap();
            counts[p] += 1;
        }
        // Per-block counts are Binomial(n, 1/blocks). A fixed +-100 window is
        // ~3.2 sigma and is expected to be crossed by about one block per run,
        // so each block is held to a Bonferroni-corrected binomial quantile
        // instead, and the histogram as a whole to a chi-square test.
        let n = 1_000_000u64;
        let binom = Binomial::new(1.0 / blocks as f64, n).unwrap();
        let alpha = 0.001 / blocks as f64;
        let lo = binom.inverse_cdf(alpha / 2.0);
        let hi = binom.inverse_cdf(1.0 - alpha / 2.0);
        for (b, &c) in counts.iter().enumerate() {
            assert!((lo..=hi).contains(&(c as u64)), "block {b} got {c}, allowed {lo}..={hi}");
        }
        let expected = n as f64 / blocks as f64;
        let stat: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        let critical = ChiSquared::new((blocks - 1) as f64).unwrap().inverse_cdf(0.999);
        assert!(stat < critical, "chi-square {stat} >= {critical}");
        let outside = counts.iter().filter(|&&c| !(876..=1076).contains(&c)).count();
        println!("blocks outside 976+-100: {outside} (binomial expectation ~1.4)");
    }

    #[test]
    fn pack_examples() {
        let l = SlotLayout::new(16, 16).unwrap();
        assert_eq!(l.pack(5, 0).unwrap(), 5);
        assert_eq!(l.unpack(5), (5, 0));
        assert_eq!(l.pack(0, 0).unwrap(), 2);
        assert_eq!(l.pack(1, 0).unwrap(), 3);
        assert!(l.pack(1 << 16, 0).is_err());
        assert!(l.pack(3, 1).is_err());
        let l = SlotLayout::new(16, 8).unwrap();
        assert!(l.pack(3, 256).is_err());
    }

    #[test]
    fn pack_exhaustive_f8_w16() {
        let l = SlotLayout::new(16, 8).unwrap();
        for t in 0..256u32 {
            for v in 0..256u32 {
                let w = l.pack(t, v).unwrap();
                assert!(w != EMPTY && w != TOMBSTONE);
                assert_eq!(l.unpack(w), (SlotLayout::remap_tag(t), v));
                assert!(l.tag_matches(w, l.tag_of(t as u64)));
            }
        }
    }
}
