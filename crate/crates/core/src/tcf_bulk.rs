//! Bulk-API two-choice filter.
//!
//! Blocks keep their live words sorted and packed at the front, so a
//! lookup is a binary search. Inserts arrive as whole batches: the batch is
//! hashed, sorted by (primary block, tag) and cut into per-block lists by
//! successor search. Each block is rebuilt by merging its current contents
//! with the items it accepts, first the shortcut items up to the fill
//! threshold and then the items routed to it by two-choice placement.

use crate::error::{Error, Result};
use crate::hash::{SlotLayout, EMPTY, TOMBSTONE};
use crate::parallel::map_ranges;
use crate::tcf::backing::BackingTable;
use crate::tcf::{blocks_for, hash_key, Entry, KeyHash, Location, TcfParams};
use crate::words::AtomicWords;

#[derive(Debug, Clone, PartialEq)]
pub struct BulkTcfParams {
    pub num_blocks: usize,
    pub block_size: usize,
    pub slot_bits: u32,
    pub tag_bits: u32,
    pub shortcut_threshold: f64,
    pub backing_ratio: f64,
    pub backing_probe_limit: usize,
    pub seed: u64,
}

impl Default for BulkTcfParams {
    fn default() -> Self {
        BulkTcfParams {
            num_blocks: 1 << 10,
            block_size: 128,
            slot_bits: 16,
            tag_bits: 16,
            shortcut_threshold: 0.75,
            backing_ratio: 0.01,
            backing_probe_limit: 20,
            seed: 0,
        }
    }
}

impl BulkTcfParams {
    pub fn with_log_slots(log_slots: u32) -> Result<Self> {
        let mut p = BulkTcfParams::default();
        p.num_blocks = blocks_for(log_slots, p.block_size)?;
        Ok(p)
    }

    pub fn capacity(&self) -> usize {
        self.num_blocks * self.block_size
    }

    fn validate(&self) -> Result<SlotLayout> {
        // Same checks as the point filter minus the cache-line bound.
        TcfParams {
            num_blocks: self.num_blocks,
            block_size: self.block_size,
            slot_bits: self.slot_bits,
            tag_bits: self.tag_bits,
            shortcut: true,
            shortcut_threshold: self.shortcut_threshold,
            backing_ratio: self.backing_ratio,
            backing_probe_limit: self.backing_probe_limit,
            group_width: 1,
            seed: self.seed,
        }
        .validate_common()
    }
}

/// One hashed batch item.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchItem {
    pub block: usize,
    pub word: u32,
    pub fp: u64,
    order: u32,
}

/// A hashed batch sorted by (primary block, tag) with per-block cut points.
#[derive(Debug, Clone)]
pub struct BatchPartition {
    pub items: Vec<BatchItem>,
    /// `boundaries[b]` is the index of the first item whose block is `>= b`;
    /// there are `num_blocks + 1` entries.
    pub boundaries: Vec<usize>,
}

impl BatchPartition {
    fn build(mut items: Vec<BatchItem>, num_blocks: usize) -> Self {
        items.sort_unstable_by_key(|it| (it.block, it.order));
        let boundaries = (0..=num_blocks)
            .map(|b| items.partition_point(|it| it.block < b))
            .collect();
        BatchPartition { items, boundaries }
    }

    pub fn block(&self, b: usize) -> &[BatchItem] {
        &self.items[self.boundaries[b]..self.boundaries[b + 1]]
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BulkInsertStats {
    /// Accepted by their primary block below the shortcut threshold.
    pub direct: usize,
    /// Placed by two-choice routing after the shortcut phase.
    pub potc: usize,
    pub backing: usize,
    /// Dropped because the backing table ran out of probes.
    pub failed: usize,
}

impl BulkInsertStats {
    /// `Error::Full` if any item was dropped.
    pub fn check(self) -> Result<Self> {
        if self.failed > 0 {
            Err(Error::Full)
        } else {
            Ok(self)
        }
    }
}

/// Three-way merge of individually sorted lists into one sorted block.
/// Equal keys keep list order: existing, then shortcut, then two-choice.
pub fn merge_block(
    existing: &[u32],
    shortcut: &[u32],
    potc: &[u32],
    capacity: usize,
) -> Result<Vec<u32>> {
    let mut out = Vec::with_capacity(existing.len() + shortcut.len() + potc.len());
    merge3_by_key(existing, shortcut, potc, &mut out, |w| w);
    if out.len() > capacity {
        return Err(Error::Full);
    }
    Ok(out)
}

fn merge3_by_key(a: &[u32], b: &[u32], c: &[u32], out: &mut Vec<u32>, key: impl Fn(u32) -> u32) {
    let (mut i, mut j, mut k) = (0, 0, 0);
    loop {
        let ka = a.get(i).map(|&w| key(w));
        let kb = b.get(j).map(|&w| key(w));
        let kc = c.get(k).map(|&w| key(w));
        // pick the smallest present key, earliest list on ties
        let pick = match (ka, kb, kc) {
            (None, None, None) => break,
            _ => {
                let mut best = 3;
                let mut best_key = u32::MAX;
                for (idx, kk) in [ka, kb, kc].into_iter().enumerate() {
                    if let Some(kk) = kk {
                        if best == 3 || kk < best_key {
                            best = idx;
                            best_key = kk;
                        }
                    }
                }
                best
            }
        };
        match pick {
            0 => {
                out.push(a[i]);
                i += 1;
            }
            1 => {
                out.push(b[j]);
                j += 1;
            }
            _ => {
                out.push(c[k]);
                k += 1;
            }
        }
    }
}

pub struct BulkTcf {
    params: BulkTcfParams,
    layout: SlotLayout,
    blocks: AtomicWords,
    backing: BackingTable,
    main_items: usize,
    backing_items: usize,
    had_removals: bool,
}

impl std::fmt::Debug for BulkTcf {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BulkTcf")
            .field("params", &self.params)
            .field("len", &self.len())
            .finish()
    }
}

impl BulkTcf {
    pub fn new(params: BulkTcfParams) -> Result<Self> {
        let layout = params.validate()?;
        let blocks = AtomicWords::zeroed(params.slot_bits, params.capacity());
        let backing_len = (params.capacity() as f64 * params.backing_ratio).ceil() as usize;
        let backing = BackingTable::new(backing_len, params.slot_bits, params.backing_probe_limit);
        Ok(BulkTcf {
            params,
            layout,
            blocks,
            backing,
            main_items: 0,
            backing_items: 0,
            had_removals: false,
        })
    }

    pub fn params(&self) -> &BulkTcfParams {
        &self.params
    }

    pub fn layout(&self) -> SlotLayout {
        self.layout
    }

    pub fn capacity(&self) -> usize {
        self.params.capacity()
    }

    pub fn len(&self) -> usize {
        self.main_items + self.backing_items
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn backing_len(&self) -> usize {
        self.backing_items
    }

    pub fn load_factor(&self) -> f64 {
        self.main_items as f64 / self.capacity() as f64
    }

    pub fn size_bits(&self) -> u64 {
        self.blocks.size_bits() + self.backing.size_bits()
    }

    fn hash(&self, key: u64) -> KeyHash {
        hash_key(key, self.params.seed, self.layout, self.params.num_blocks)
    }

    #[inline]
    fn word(&self, block: usize, i: usize) -> u32 {
        self.blocks.load(block * self.params.block_size + i) as u32
    }

    /// Live words of a block, in stored (sorted) order.
    pub fn block_contents(&self, block: usize) -> Vec<u32> {
        (0..self.fill(block)).map(|i| self.word(block, i)).collect()
    }

    /// Length of the sorted prefix; the tail is all EMPTY.
    pub fn fill(&self, block: usize) -> usize {
        let (mut lo, mut hi) = (0, self.params.block_size);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.word(block, mid) != EMPTY {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo
    }

    fn write_block(&self, block: usize, words: &[u32]) {
        let base = block * self.params.block_size;
        for i in 0..self.params.block_size {
            self.blocks
                .store(base + i, words.get(i).copied().unwrap_or(EMPTY) as u64);
        }
    }

    /// Hashes the batch and sorts it by (primary block, tag).
    pub fn partition_batch(&self, keys: &[u64]) -> BatchPartition {
        let items = keys
            .iter()
            .map(|&k| {
                let h = self.hash(k);
                let word = self.layout.pack_unchecked(h.tag, 0);
                BatchItem {
                    block: h.primary,
                    word,
                    fp: h.fp,
                    order: self.layout.sort_key(word),
                }
            })
            .collect();
        BatchPartition::build(items, self.params.num_blocks)
    }

    fn merge_into(&self, block: usize, shortcut: &[u32], potc: &[u32], scratch: &mut Vec<u32>) {
        let existing = self.block_contents(block);
        scratch.clear();
        let layout = self.layout;
        merge3_by_key(&existing, shortcut, potc, scratch, |w| layout.sort_key(w));
        debug_assert!(scratch.len() <= self.params.block_size);
        self.write_block(block, scratch);
    }

    /// Inserts a batch using up to `workers` threads.
    ///
    /// Items that find both blocks and the backing table full are counted
    /// in `failed` and dropped; see [`BulkInsertStats::check`].
    pub fn bulk_insert(&mut self, keys: &[u64], workers: usize) -> BulkInsertStats {
        let b = self.params.block_size;
        let cutoff = (self.params.shortcut_threshold * b as f64).ceil() as usize;
        let part = self.partition_batch(keys);
        let this = &*self;

        // Shortcut phase: each block keeps as many of its own items as fit
        // below the threshold; the rest spill over.
        let phase1 = map_ranges(this.params.num_blocks, workers, |range| {
            let mut spill = Vec::new();
            let mut fills = Vec::with_capacity(range.len());
            let mut direct = 0;
            let mut shortcut = Vec::new();
            let mut scratch = Vec::with_capacity(b);
            for block in range {
                let list = part.block(block);
                let fill = this.fill(block);
                let take = cutoff.saturating_sub(fill).min(list.len());
                if take > 0 {
                    shortcut.clear();
                    shortcut.extend(list[..take].iter().map(|it| it.word));
                    this.merge_into(block, &shortcut, &[], &mut scratch);
                }
                direct += take;
                fills.push(fill + take);
                spill.extend_from_slice(&list[take..]);
            }
            (spill, fills, direct)
        });

        let mut stats = BulkInsertStats::default();
        let mut fills = Vec::with_capacity(this.params.num_blocks);
        let mut spill = Vec::new();
        for (s, f, d) in phase1 {
            spill.extend(s);
            fills.extend(f);
            stats.direct += d;
        }

        // Two-choice phase: route spilled items to the less full of their
        // blocks against projected fills, in batch order so the outcome is
        // independent of the worker count.
        let mut routed = Vec::with_capacity(spill.len());
        let mut overflow = Vec::new();
        for it in spill {
            let (p, s) = crate::hash::block_pair(it.fp, this.params.num_blocks);
            let dest = if fills[s] < fills[p] { s } else { p };
            if fills[dest] < b {
                fills[dest] += 1;
                routed.push(BatchItem { block: dest, ..it });
            } else {
                overflow.push(it);
            }
        }
        stats.potc = routed.len();
        let second = BatchPartition::build(routed, this.params.num_blocks);
        map_ranges(this.params.num_blocks, workers, |range| {
            let mut potc = Vec::new();
            let mut scratch = Vec::with_capacity(b);
            for block in range {
                let list = second.block(block);
                if list.is_empty() {
                    continue;
                }
                potc.clear();
                potc.extend(list.iter().map(|it| it.word));
                this.merge_into(block, &[], &potc, &mut scratch);
            }
        });

        for it in overflow {
            if this.backing.insert(it.fp, it.word) {
                stats.backing += 1;
            } else {
                stats.failed += 1;
            }
        }
        self.main_items += stats.direct + stats.potc;
        self.backing_items += stats.backing;
        stats
    }

    fn search_block(&self, block: usize, tag: u32) -> Option<usize> {
        let vb = self.layout.value_bits();
        let target = if vb == 0 { tag } else { tag << vb };
        let fill = self.fill(block);
        let (mut lo, mut hi) = (0, fill);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.layout.sort_key(self.word(block, mid)) < target {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        (lo < fill && self.layout.tag_matches(self.word(block, lo), tag)).then_some(lo)
    }

    /// Whether the backing table can hold this key's tag. Without removals a
    /// block only loses its EMPTY tail by filling up, and spilled keys reach
    /// the backing table only when both their blocks are full.
    fn backing_may_hold(&self, h: &KeyHash) -> bool {
        if self.backing.len() == 0 || self.backing_items == 0 && !self.had_removals {
            return false;
        }
        let b = self.params.block_size;
        self.had_removals || (self.fill(h.primary) == b && self.fill(h.secondary) == b)
    }

    pub fn contains(&self, key: u64) -> bool {
        let h = self.hash(key);
        self.search_block(h.primary, h.tag).is_some()
            || self.search_block(h.secondary, h.tag).is_some()
            || (self.backing_may_hold(&h) && self.backing.find(h.fp, self.layout, h.tag).is_some())
    }

    /// Membership answer for every key, using up to `workers` threads.
    pub fn bulk_query(&self, keys: &[u64], workers: usize) -> Vec<bool> {
        map_ranges(keys.len(), workers, |r| {
            keys[r].iter().map(|&k| self.contains(k)).collect::<Vec<_>>()
        })
        .into_iter()
        .flatten()
        .collect()
    }

    /// Removes one occurrence per key, shifting the block tail left.
    /// Returns how many keys were found.
    pub fn bulk_delete(&mut self, keys: &[u64]) -> usize {
        let mut removed = 0;
        for &k in keys {
            let h = self.hash(k);
            let mut hit = false;
            for block in [h.primary, h.secondary] {
                if let Some(i) = self.search_block(block, h.tag) {
                    let fill = self.fill(block);
                    let base = block * self.params.block_size;
                    for j in i..fill - 1 {
                        self.blocks.store(base + j, self.word(block, j + 1) as u64);
                    }
                    self.blocks.store(base + fill - 1, EMPTY as u64);
                    self.main_items -= 1;
                    hit = true;
                    break;
                }
            }
            if !hit && self.backing_may_hold(&h) && self.backing.remove(h.fp, self.layout, h.tag) {
                self.backing_items -= 1;
                hit = true;
            }
            if hit {
                removed += 1;
                self.had_removals = true;
            }
        }
        removed
    }

    pub fn enumerate(&self) -> Vec<Entry> {
        let mut out = Vec::with_capacity(self.len());
        for block in 0..self.params.num_blocks {
            for w in self.block_contents(block) {
                let (tag, value) = self.layout.unpack(w);
                out.push(Entry {
                    location: Location::Block(block),
                    tag,
                    value,
                });
            }
        }
        for i in 0..self.backing.len() {
            let w = self.backing.word(i);
            if w > TOMBSTONE {
                let (tag, value) = self.layout.unpack(w);
                out.push(Entry {
                    location: Location::Backing(i),
                    tag,
                    value,
                });
            }
        }
        out
    }

    /// Checks the sorted-prefix layout of every block and the item counts.
    pub fn validate(&self) -> Result<()> {
        let mut main = 0;
        for block in 0..self.params.num_blocks {
            let fill = self.fill(block);
            let mut prev = None;
            for i in 0..self.params.block_size {
                let w = self.word(block, i);
                if i < fill {
                    if w <= TOMBSTONE {
                        return Err(Error::Invariant(format!("block {block} slot {i}: sentinel inside prefix")));
                    }
                    let key = self.layout.sort_key(w);
                    if prev.is_some_and(|p| p > key) {
                        return Err(Error::Invariant(format!("block {block} unsorted at slot {i}")));
                    }
                    prev = Some(key);
                } else if w != EMPTY {
                    return Err(Error::Invariant(format!("block {block} slot {i}: word after the prefix")));
                }
            }
            main += fill;
        }
        let backing = (0..self.backing.len())
            .filter(|&i| self.backing.word(i) > TOMBSTONE)
            .count();
        if main != self.main_items || backing != self.backing_items {
            return Err(Error::Invariant(format!(
                "census {main}/{backing} vs counters {}/{}",
                self.main_items, self.backing_items
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn filter(num_blocks: usize) -> BulkTcf {
        BulkTcf::new(BulkTcfParams {
            num_blocks,
            ..BulkTcfParams::default()
        })
        .unwrap()
    }

    #[test]
    fn empty_batch_partition() {
        let f = filter(8);
        let p = f.partition_batch(&[]);
        assert_eq!(p.boundaries, vec![0; 9]);
    }

    #[test]
    fn single_block_partition() {
        let f = filter(8);
        let keys: Vec<u64> = (0..10_000u64)
            .filter(|&k| f.hash(k).primary == 7)
            .take(3)
            .collect();
        let p = f.partition_batch(&keys);
        assert_eq!(&p.boundaries[..8], &[0; 8]);
        assert_eq!(p.boundaries[8], 3);
    }

    #[test]
    fn random_partition_scan() {
        let f = filter(256);
        let mut rng = StdRng::seed_from_u64(5);
        let keys: Vec<u64> = (0..100_000).map(|_| rng.random()).collect();
        let p = f.partition_batch(&keys);
        assert_eq!(p.items.len(), keys.len());
        assert!(p.boundaries.windows(2).all(|w| w[0] <= w[1]));
        for b in 0..256 {
            let list = p.block(b);
            assert!(list.iter().all(|it| it.block == b));
            assert!(list.windows(2).all(|w| w[0].order <= w[1].order));
        }
    }

    #[test]
    fn merge_examples() {
        assert_eq!(merge_block(&[], &[], &[], 4).unwrap(), Vec::<u32>::new());
        assert_eq!(merge_block(&[2, 5], &[3], &[5, 9], 8).unwrap(), vec![2, 3, 5, 5, 9]);
        assert_eq!(merge_block(&[1, 2], &[3], &[4], 3), Err(Error::Full));
    }

    #[test]
    fn merge_matches_sort_oracle() {
        let mut rng = StdRng::seed_from_u64(6);
        for _ in 0..10_000 {
            let mut lists: Vec<Vec<u32>> = (0..3)
                .map(|_| {
                    let n = rng.random_range(0..20);
                    (0..n).map(|_| rng.random_range(0..50)).collect()
                })
                .collect();
            for l in &mut lists {
                l.sort_unstable();
            }
            let mut oracle: Vec<u32> = lists.concat();
            oracle.sort_unstable();
            let merged = merge_block(&lists[0], &lists[1], &lists[2], 64).unwrap();
            assert_eq!(merged, oracle);
        }
    }

    #[test]
    fn single_item_goes_direct() {
        let mut f = filter(8);
        let s = f.bulk_insert(&[99], 1);
        assert_eq!(s, BulkInsertStats { direct: 1, ..Default::default() });
        assert!(f.contains(99));
    }

    #[test]
    fn fill_to_85_percent_without_failures() {
        let mut f = filter(1 << 10);
        let n = (f.capacity() as f64 * 0.85) as usize;
        let mut rng = StdRng::seed_from_u64(7);
        let keys: Vec<u64> = (0..n).map(|_| rng.random()).collect();
        let stats = f.bulk_insert(&keys, 4).check().unwrap();
        assert_eq!(stats.direct + stats.potc + stats.backing, n);
        f.validate().unwrap();
        assert!(f.bulk_query(&keys, 3).into_iter().all(|b| b));
    }

    #[test]
    fn empty_filter_queries_false() {
        let f = filter(16);
        assert!(f.bulk_query(&[1, 2, 3], 2).iter().all(|&b| !b));
    }

    #[test]
    fn worker_count_does_not_change_contents() {
        let mut rng = StdRng::seed_from_u64(8);
        let batches: Vec<Vec<u64>> = (0..3)
            .map(|_| (0..30_000).map(|_| rng.random()).collect())
            .collect();
        let mut reference = None;
        for workers in [1, 2, 5, 8] {
            let mut f = filter(1 << 8);
            for b in &batches {
                f.bulk_insert(b, workers);
            }
            f.validate().unwrap();
            let e = f.enumerate();
            match &reference {
                None => reference = Some(e),
                Some(r) => assert_eq!(r, &e, "workers {workers}"),
            }
        }
    }

    #[test]
    fn bulk_delete_keeps_blocks_sorted() {
        let mut f = filter(64);
        let keys: Vec<u64> = (0..6000).collect();
        f.bulk_insert(&keys, 2).check().unwrap();
        let gone: Vec<u64> = keys.iter().copied().step_by(2).collect();
        assert_eq!(f.bulk_delete(&gone), gone.len());
        f.validate().unwrap();
        assert!(keys.iter().skip(1).step_by(2).all(|&k| f.contains(k)));
        assert_eq!(f.len(), keys.len() - gone.len());
    }
}
