//! Variable-length counters inside a run.
//!
//! A distinct remainder `h` with count `c` occupies a *group* of slots:
//!
//! - `c == 1`: `[h]`
//! - `c == 2`: `[h, h]`
//! - `c >= 3`, `h > 0`: `[h, s, d1..dk, h]` where `v = c - 3`, `s = v mod h`
//!   and `d1..dk` are the little-endian base-`(2^r - 1)` digits of `v / h`.
//! - `c >= 3`, `h == 0`: `[0, 0, 0, d1..dk, 0]` with the digits of `v`.
//!
//! Digits are stored as `d` when `d < h` and `d + 1` otherwise, so no
//! interior slot ever equals the head. Heads within a run are strictly
//! increasing, which makes the first slot after a head decisive: equal to
//! `h` means a pair, smaller than `h` opens a counter (any following group
//! head is larger), anything else starts the next group. A zero head has
//! nothing smaller, so its counter is announced by three zeros instead.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CountGroup {
    pub head: u64,
    pub count: u64,
}

fn digit_base(remainder_bits: u32) -> u128 {
    (1u128 << remainder_bits) - 1
}

fn push_digits(out: &mut Vec<u64>, mut n: u128, head: u64, base: u128) {
    while n > 0 {
        let d = (n % base) as u64;
        out.push(if d < head { d } else { d + 1 });
        n /= base;
    }
}

impl CountGroup {
    pub fn new(head: u64, count: u64) -> Self {
        CountGroup { head, count }
    }

    /// Slot contents for this group. `count` must be at least 1.
    pub fn encode(self, remainder_bits: u32) -> Vec<u64> {
        let CountGroup { head: h, count: c } = self;
        debug_assert!(c >= 1);
        debug_assert!(remainder_bits == 64 || h >> remainder_bits == 0);
        match c {
            1 => vec![h],
            2 => vec![h, h],
            _ => {
                let v = (c - 3) as u128;
                let base = digit_base(remainder_bits);
                let mut out = Vec::with_capacity(4);
                if h > 0 {
                    out.extend([h, (v % h as u128) as u64]);
                    push_digits(&mut out, v / h as u128, h, base);
                } else {
                    out.extend([0, 0, 0]);
                    push_digits(&mut out, v, 0, base);
                }
                out.push(h);
                out
            }
        }
    }

    /// Number of slots [`encode`](Self::encode) would produce.
    pub fn encoded_len(self, remainder_bits: u32) -> usize {
        self.encode(remainder_bits).len()
    }

    /// Parses the group at the start of `slots` (the rest of a run).
    /// Returns the group and how many slots it spans.
    pub fn decode(slots: &[u64], remainder_bits: u32) -> Result<(CountGroup, usize)> {
        let corrupt = |why: &str| Error::Invariant(format!("count group: {why}"));
        let &h = slots.first().ok_or_else(|| corrupt("empty input"))?;
        let base = digit_base(remainder_bits);
        let digits_until_head = |from: usize| -> Result<(u128, usize)> {
            let mut value = 0u128;
            let mut scale = 1u128;
            for (i, &u) in slots.iter().enumerate().skip(from) {
                if u == h {
                    return Ok((value, i + 1));
                }
                let d = if u < h { u } else { u - 1 } as u128;
                value = d
                    .checked_mul(scale)
                    .and_then(|x| x.checked_add(value))
                    .ok_or_else(|| corrupt("counter overflow"))?;
                scale = scale.saturating_mul(base);
            }
            Err(corrupt("unterminated counter"))
        };
        let finish = |v: u128, len: usize| -> Result<(CountGroup, usize)> {
            let c = v
                .checked_add(3)
                .filter(|&c| c <= u64::MAX as u128)
                .ok_or_else(|| corrupt("counter overflow"))?;
            Ok((CountGroup::new(h, c as u64), len))
        };
        match slots.get(1) {
            None => Ok((CountGroup::new(h, 1), 1)),
            Some(&s) if h > 0 && s == h => Ok((CountGroup::new(h, 2), 2)),
            Some(&s) if h > 0 && s < h => {
                let (q, len) = digits_until_head(2)?;
                let v = q
                    .checked_mul(h as u128)
                    .and_then(|x| x.checked_add(s as u128))
                    .ok_or_else(|| corrupt("counter overflow"))?;
                finish(v, len)
            }
            Some(&0) if h == 0 => {
                if slots.get(2) == Some(&0) {
                    let (v, len) = digits_until_head(3)?;
                    finish(v, len)
                } else {
                    Ok((CountGroup::new(0, 2), 2))
                }
            }
            Some(_) => Ok((CountGroup::new(h, 1), 1)),
        }
    }
}

/// A decoded group and its slot span relative to the run start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct GroupSpan {
    pub group: CountGroup,
    pub offset: usize,
    pub len: usize,
}

/// Splits a whole run into groups, checking that heads strictly increase.
pub(crate) fn parse_run(run: &[u64], remainder_bits: u32) -> Result<Vec<GroupSpan>> {
    let mut out: Vec<GroupSpan> = Vec::new();
    let mut i = 0;
    while i < run.len() {
        let (group, len) = CountGroup::decode(&run[i..], remainder_bits)?;
        if out.last().is_some_and(|g| g.group.head >= group.head) {
            return Err(Error::Invariant(format!(
                "run heads not increasing at offset {i}"
            )));
        }
        out.push(GroupSpan { group, offset: i, len });
        i += len;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn round_trip(h: u64, c: u64, r: u32) {
        let g = CountGroup::new(h, c);
        let slots = g.encode(r);
        assert!(slots.iter().all(|&s| r == 64 || s >> r == 0), "{h} x{c} r={r}: {slots:?}");
        if slots.len() > 2 {
            assert!(slots[1..slots.len() - 1].iter().all(|&s| s != h) || h == 0);
        }
        assert_eq!(CountGroup::decode(&slots, r).unwrap(), (g, slots.len()), "{h} x{c} r={r}");
    }

    #[test]
    fn small_layouts() {
        assert_eq!(CountGroup::new(7, 1).encode(8), vec![7]);
        assert_eq!(CountGroup::new(7, 2).encode(8), vec![7, 7]);
        assert_eq!(CountGroup::new(7, 3).encode(8), vec![7, 0, 7]);
        assert_eq!(CountGroup::new(0, 2).encode(8), vec![0, 0]);
        assert_eq!(CountGroup::new(0, 3).encode(8), vec![0, 0, 0, 0]);
    }

    #[test]
    fn three_hundred_copies_r8() {
        // v = 297 = 42 * 7 + 3; 42 in base 255 is one digit, stored as 43.
        assert_eq!(CountGroup::new(7, 300).encode(8), vec![7, 3, 43, 7]);
    }

    #[test]
    fn round_trips() {
        let mut rng = StdRng::seed_from_u64(11);
        for r in [8u32, 16, 32, 64] {
            let top = if r == 64 { u64::MAX } else { (1 << r) - 1 };
            let m = if r == 64 { u64::MAX } else { 1u64 << r };
            for h in [0, 1, 2, top / 2, top - 1, top] {
                for c in 1..=300 {
                    round_trip(h, c, r);
                }
                for c in [m - 2, m - 1, m, m.wrapping_add(1).max(1), u64::MAX, u64::MAX - 1] {
                    round_trip(h, c, r);
                }
                for _ in 0..200 {
                    round_trip(h, rng.random_range(1..=u32::MAX as u64), r);
                }
            }
        }
    }

    #[test]
    fn groups_are_self_delimiting_in_runs() {
        let mut rng = StdRng::seed_from_u64(12);
        for _ in 0..2000 {
            let r = 8;
            let mut heads: Vec<u64> = (0..rng.random_range(1..6)).map(|_| rng.random_range(0..256)).collect();
            heads.sort_unstable();
            heads.dedup();
            let groups: Vec<CountGroup> = heads
                .iter()
                .map(|&h| CountGroup::new(h, rng.random_range(1..2000)))
                .collect();
            let run: Vec<u64> = groups.iter().flat_map(|g| g.encode(r)).collect();
            let parsed: Vec<CountGroup> = parse_run(&run, r).unwrap().into_iter().map(|s| s.group).collect();
            assert_eq!(parsed, groups, "{run:?}");
        }
    }

    #[test]
    fn length_is_monotone_in_count() {
        for h in [0u64, 1, 7, 200, 255] {
            let mut prev = 0;
            for c in 1..5000 {
                let len = CountGroup::new(h, c).encoded_len(8);
                assert!(len >= prev);
                prev = len;
            }
        }
    }

    #[test]
    fn unterminated_counter_is_rejected() {
        assert!(CountGroup::decode(&[7, 3, 43], 8).is_err());
        assert!(parse_run(&[9, 4], 8).is_err());
    }
}
