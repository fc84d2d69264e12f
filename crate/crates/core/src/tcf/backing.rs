//! Small double-hashing overflow table behind the two-choice blocks.

use crate::hash::{mix64, SlotLayout, EMPTY, TOMBSTONE};
use crate::words::AtomicWords;

pub(crate) struct BackingTable {
    words: AtomicWords,
    probe_limit: usize,
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl BackingTable {
    pub fn new(len: usize, slot_bits: u32, probe_limit: usize) -> Self {
        BackingTable {
            words: AtomicWords::zeroed(slot_bits, len),
            probe_limit,
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn size_bits(&self) -> u64 {
        self.words.size_bits()
    }

    pub fn word(&self, i: usize) -> u32 {
        self.words.load(i) as u32
    }

    /// Bucket indices probed for `fp`, all distinct, at most `probe_limit`.
    pub fn probes(&self, fp: u64) -> impl Iterator<Item = usize> {
        let len = self.words.len();
        let (start, step) = if len <= 1 {
            (0, 1)
        } else {
            let start = (mix64(fp ^ 0x2545_f491_4f6c_dd1d) % len as u64) as usize;
            // Odd and coprime with the table size, so the walk never revisits.
            let mut step = (1 + mix64(fp ^ 0x9fb2_1c65_1e98_df25) % (len as u64 - 1)) as usize | 1;
            while gcd(step % len, len) != 1 {
                step = (step + 2) % len;
                if step == 0 {
                    step = 1;
                }
            }
            (start, step)
        };
        let count = self.probe_limit.min(len);
        (0..count).map(move |k| (start + k * step) % len.max(1))
    }

    pub fn insert(&self, fp: u64, word: u32) -> bool {
        for i in self.probes(fp) {
            let mut cur = self.words.load(i) as u32;
            while cur == EMPTY || cur == TOMBSTONE {
                match self.words.compare_exchange(i, cur as u64, word as u64) {
                    Ok(_) => return true,
                    Err(seen) => cur = seen as u32,
                }
            }
        }
        false
    }

    /// First matching word on the probe path, stopping at the first EMPTY.
    pub fn find(&self, fp: u64, layout: SlotLayout, tag: u32) -> Option<u32> {
        for i in self.probes(fp) {
            let w = self.words.load_acquire(i) as u32;
            if w == EMPTY {
                return None;
            }
            if layout.tag_matches(w, tag) {
                return Some(w);
            }
        }
        None
    }

    pub fn remove(&self, fp: u64, layout: SlotLayout, tag: u32) -> bool {
        for i in self.probes(fp) {
            let mut w = self.words.load_acquire(i) as u32;
            loop {
                if w == EMPTY {
                    return false;
                }
                if !layout.tag_matches(w, tag) {
                    break;
                }
                match self.words.compare_exchange(i, w as u64, TOMBSTONE as u64) {
                    Ok(_) => return true,
                    Err(seen) => w = seen as u32,
                }
            }
        }
        false
    }
}
