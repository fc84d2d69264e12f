//! Point-API two-choice filter.
//!
//! The table is split into blocks of `block_size` slot words. Every key has
//! two candidate blocks; it lands in the less full one, or straight in the
//! primary while the primary is below the shortcut threshold. Keys that find
//! both blocks full go to a small double-hashing backing table. All mutation
//! is single-word compare-exchange, so every operation here takes `&self`
//! and may run from any number of threads.

pub(crate) mod backing;

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::hash::{block_pair, fingerprint, SlotLayout, EMPTY, TOMBSTONE};
use crate::words::AtomicWords;
use backing::BackingTable;

/// Largest block the point filter accepts: one 128-byte cache line.
pub const CACHE_LINE_BITS: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct TcfParams {
    /// Number of blocks; must be a power of two.
    pub num_blocks: usize,
    pub block_size: usize,
    pub slot_bits: u32,
    pub tag_bits: u32,
    pub shortcut: bool,
    pub shortcut_threshold: f64,
    /// Backing table size as a fraction of the main table; 0 disables it.
    pub backing_ratio: f64,
    pub backing_probe_limit: usize,
    /// Emulated cooperative-group width: slots examined per ballot round.
    pub group_width: usize,
    pub seed: u64,
}

impl Default for TcfParams {
    fn default() -> Self {
        TcfParams {
            num_blocks: 1 << 10,
            block_size: 16,
            slot_bits: 16,
            tag_bits: 16,
            shortcut: true,
            shortcut_threshold: 0.75,
            backing_ratio: 0.01,
            backing_probe_limit: 20,
            group_width: 4,
            seed: 0,
        }
    }
}

impl TcfParams {
    /// Default parameters sized to `2^log_slots` total main-table slots.
    pub fn with_log_slots(log_slots: u32) -> Result<Self> {
        let mut p = TcfParams::default();
        p.num_blocks = blocks_for(log_slots, p.block_size)?;
        Ok(p)
    }

    pub fn capacity(&self) -> usize {
        self.num_blocks * self.block_size
    }

    pub fn backing_len(&self) -> usize {
        (self.capacity() as f64 * self.backing_ratio).ceil() as usize
    }

    pub(crate) fn validate_common(&self) -> Result<SlotLayout> {
        let layout = SlotLayout::new(self.slot_bits, self.tag_bits)?;
        if self.num_blocks == 0 || !self.num_blocks.is_power_of_two() {
            return Err(Error::param(format!(
                "num_blocks {} is not a power of two",
                self.num_blocks
            )));
        }
        if self.block_size == 0 {
            return Err(Error::param("block_size must be positive"));
        }
        if !(self.shortcut_threshold > 0.0 && self.shortcut_threshold < 1.0) {
            return Err(Error::param(format!(
                "shortcut_threshold {} not in (0, 1)",
                self.shortcut_threshold
            )));
        }
        if !(0.0..=1.0).contains(&self.backing_ratio) {
            return Err(Error::param(format!(
                "backing_ratio {} not in [0, 1]",
                self.backing_ratio
            )));
        }
        if self.backing_probe_limit == 0 {
            return Err(Error::param("backing_probe_limit must be positive"));
        }
        Ok(layout)
    }

    fn validate(&self) -> Result<SlotLayout> {
        let layout = self.validate_common()?;
        if self.block_size * self.slot_bits as usize > CACHE_LINE_BITS {
            return Err(Error::param(format!(
                "block of {} x {}-bit slots exceeds a {CACHE_LINE_BITS}-bit cache line",
                self.block_size, self.slot_bits
            )));
        }
        if self.group_width == 0 || self.group_width > 64 {
            return Err(Error::param(format!(
                "group_width {} not in 1..=64",
                self.group_width
            )));
        }
        Ok(layout)
    }
}

pub(crate) fn blocks_for(log_slots: u32, block_size: usize) -> Result<usize> {
    if log_slots >= usize::BITS {
        return Err(Error::param(format!("log_slots {log_slots} too large")));
    }
    let slots = 1usize << log_slots;
    if block_size == 0 || !block_size.is_power_of_two() || block_size > slots {
        return Err(Error::param(format!(
            "block size {block_size} does not divide 2^{log_slots} slots"
        )));
    }
    Ok(slots / block_size)
}

/// Where an inserted key ended up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Placement {
    Primary,
    Secondary,
    Backing,
}

/// Location of an enumerated entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Location {
    Block(usize),
    Backing(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Entry {
    pub location: Location,
    pub tag: u32,
    pub value: u32,
}

/// Per-key hash results shared by every operation.
#[derive(Debug, Clone, Copy)]
pub(crate) struct KeyHash {
    pub fp: u64,
    pub tag: u32,
    pub primary: usize,
    pub secondary: usize,
}

pub(crate) fn hash_key(key: u64, seed: u64, layout: SlotLayout, num_blocks: usize) -> KeyHash {
    let fp = fingerprint(key, seed, 64).expect("64-bit width is valid").value();
    let (primary, secondary) = block_pair(fp, num_blocks);
    KeyHash {
        fp,
        tag: layout.tag_of(fp),
        primary,
        secondary,
    }
}

pub struct Tcf {
    params: TcfParams,
    layout: SlotLayout,
    blocks: AtomicWords,
    backing: BackingTable,
    inserted: AtomicU64,
    backing_items: AtomicU64,
    removed_main: AtomicU64,
    removed_backing: AtomicU64,
}

impl std::fmt::Debug for Tcf {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tcf")
            .field("params", &self.params)
            .field("len", &self.len())
            .finish()
    }
}

/// Result of scanning one block for a tag.
struct BlockScan {
    hit: Option<(usize, u32)>,
    has_empty: bool,
}

impl Tcf {
    pub fn new(params: TcfParams) -> Result<Self> {
        let layout = params.validate()?;
        let blocks = AtomicWords::zeroed(params.slot_bits, params.capacity());
        let backing = BackingTable::new(
            params.backing_len(),
            params.slot_bits,
            params.backing_probe_limit,
        );
        Ok(Tcf {
            params,
            layout,
            blocks,
            backing,
            inserted: AtomicU64::new(0),
            backing_items: AtomicU64::new(0),
            removed_main: AtomicU64::new(0),
            removed_backing: AtomicU64::new(0),
        })
    }

    pub fn params(&self) -> &TcfParams {
        &self.params
    }

    pub fn layout(&self) -> SlotLayout {
        self.layout
    }

    pub fn capacity(&self) -> usize {
        self.params.capacity()
    }

    pub fn backing_capacity(&self) -> usize {
        self.backing.len()
    }

    /// Items currently held (main table plus backing).
    pub fn len(&self) -> usize {
        (self.inserted.load(Ordering::Relaxed)
            - self.removed_main.load(Ordering::Relaxed)
            - self.removed_backing.load(Ordering::Relaxed)) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Items currently resident in the backing table.
    pub fn backing_len(&self) -> usize {
        (self.backing_items.load(Ordering::Relaxed) - self.removed_backing.load(Ordering::Relaxed))
            as usize
    }

    /// Occupied main-table slots over main-table capacity.
    pub fn load_factor(&self) -> f64 {
        (self.len() - self.backing_len()) as f64 / self.capacity() as f64
    }

    /// Total structure size in bits: main slots plus backing buckets.
    pub fn size_bits(&self) -> u64 {
        self.blocks.size_bits() + self.backing.size_bits()
    }

    pub(crate) fn hash(&self, key: u64) -> KeyHash {
        hash_key(key, self.params.seed, self.layout, self.params.num_blocks)
    }

    #[inline]
    fn slot(&self, block: usize, i: usize) -> usize {
        block * self.params.block_size + i
    }

    /// Number of live (non-sentinel) words in a block.
    pub fn occupancy(&self, block: usize) -> usize {
        (0..self.params.block_size)
            .filter(|&i| self.blocks.load(self.slot(block, i)) as u32 > TOMBSTONE)
            .count()
    }

    /// Claims one EMPTY or TOMBSTONE slot of `block` for `word`.
    ///
    /// Slots are examined `group_width` at a time; within a round the
    /// candidates are tried lowest lane first, moving on to the next
    /// candidate whenever the compare-exchange loses a race. The width only
    /// changes how the scan is chunked, never which slot is chosen.
    pub fn block_insert(&self, block: usize, word: u32) -> bool {
        debug_assert!(word > TOMBSTONE);
        let b = self.params.block_size;
        let g = self.params.group_width;
        let mut observed = [0u32; 64];
        let mut round = 0;
        while round < b {
            let lanes = g.min(b - round);
            let mut ballot = 0u64;
            for (lane, seen) in observed.iter_mut().enumerate().take(lanes) {
                let w = self.blocks.load(self.slot(block, round + lane)) as u32;
                if w == EMPTY || w == TOMBSTONE {
                    *seen = w;
                    ballot |= 1 << lane;
                }
            }
            while ballot != 0 {
                let lane = ballot.trailing_zeros() as usize;
                let idx = self.slot(block, round + lane);
                if self
                    .blocks
                    .compare_exchange(idx, observed[lane] as u64, word as u64)
                    .is_ok()
                {
                    return true;
                }
                ballot &= ballot - 1;
            }
            round += g;
        }
        false
    }

    fn scan_block(&self, block: usize, tag: u32) -> BlockScan {
        let mut has_empty = false;
        for i in 0..self.params.block_size {
            let idx = self.slot(block, i);
            let w = self.blocks.load_acquire(idx) as u32;
            if w == EMPTY {
                has_empty = true;
            } else if self.layout.tag_matches(w, tag) {
                return BlockScan {
                    hit: Some((idx, w)),
                    has_empty,
                };
            }
        }
        BlockScan {
            hit: None,
            has_empty,
        }
    }

    pub fn insert(&self, key: u64, value: u32) -> Result<Placement> {
        let h = self.hash(key);
        let word = self.layout.pack(h.tag, value)?;
        let placement = self.place(&h, word)?;
        self.inserted.fetch_add(1, Ordering::Relaxed);
        if placement == Placement::Backing {
            self.backing_items.fetch_add(1, Ordering::Relaxed);
        }
        Ok(placement)
    }

    fn place(&self, h: &KeyHash, word: u32) -> Result<Placement> {
        let b = self.params.block_size as f64;
        if self.params.shortcut
            && (self.occupancy(h.primary) as f64) < self.params.shortcut_threshold * b
            && self.block_insert(h.primary, word)
        {
            return Ok(Placement::Primary);
        }
        let (first, second) = if self.occupancy(h.secondary) < self.occupancy(h.primary) {
            ((h.secondary, Placement::Secondary), (h.primary, Placement::Primary))
        } else {
            ((h.primary, Placement::Primary), (h.secondary, Placement::Secondary))
        };
        if self.block_insert(first.0, word) {
            return Ok(first.1);
        }
        if second.0 != first.0 && self.block_insert(second.0, word) {
            return Ok(second.1);
        }
        if self.backing.insert(h.fp, word) {
            return Ok(Placement::Backing);
        }
        Err(Error::Full)
    }

    /// Writes a packed word directly into `block`, bypassing placement.
    /// Used to rebuild a filter with a known per-block layout.
    pub fn insert_word_at(&self, block: usize, word: u32) -> bool {
        if block >= self.params.num_blocks || word <= TOMBSTONE {
            return false;
        }
        let ok = self.block_insert(block, word);
        if ok {
            self.inserted.fetch_add(1, Ordering::Relaxed);
        }
        ok
    }

    /// Value bits of the first matching slot, if the key is (probably) present.
    pub fn query(&self, key: u64) -> Option<u32> {
        self.find(&self.hash(key)).map(|(_, w)| self.layout.unpack(w).1)
    }

    pub fn contains(&self, key: u64) -> bool {
        self.find(&self.hash(key)).is_some()
    }

    /// Primary, then secondary, then backing. The backing table is only
    /// consulted when neither block has an EMPTY slot: EMPTY words never
    /// come back once overwritten, and a key only reaches the backing table
    /// after finding both blocks without one.
    fn find(&self, h: &KeyHash) -> Option<(Option<usize>, u32)> {
        let p = self.scan_block(h.primary, h.tag);
        if let Some((idx, w)) = p.hit {
            return Some((Some(idx), w));
        }
        let mut has_empty = p.has_empty;
        if h.secondary != h.primary {
            let s = self.scan_block(h.secondary, h.tag);
            if let Some((idx, w)) = s.hit {
                return Some((Some(idx), w));
            }
            has_empty |= s.has_empty;
        }
        if has_empty || self.backing.len() == 0 {
            return None;
        }
        self.backing.find(h.fp, self.layout, h.tag).map(|w| (None, w))
    }

    /// Removes one occurrence of the key's tag. Returns false if absent.
    pub fn remove(&self, key: u64) -> bool {
        let h = self.hash(key);
        loop {
            match self.find(&h) {
                None => return false,
                Some((Some(idx), w)) => {
                    if self
                        .blocks
                        .compare_exchange(idx, w as u64, TOMBSTONE as u64)
                        .is_ok()
                    {
                        self.removed_main.fetch_add(1, Ordering::Relaxed);
                        return true;
                    }
                    // lost a race on that slot; look again
                }
                Some((None, _)) => {
                    if self.backing.remove(h.fp, self.layout, h.tag) {
                        self.removed_backing.fetch_add(1, Ordering::Relaxed);
                        return true;
                    }
                }
            }
        }
    }

    /// All live entries, main table first, then backing. Needs quiescence.
    pub fn enumerate(&self) -> Vec<Entry> {
        let mut out = Vec::with_capacity(self.len());
        for block in 0..self.params.num_blocks {
            for i in 0..self.params.block_size {
                let w = self.blocks.load(self.slot(block, i)) as u32;
                if w > TOMBSTONE {
                    let (tag, value) = self.layout.unpack(w);
                    out.push(Entry {
                        location: Location::Block(block),
                        tag,
                        value,
                    });
                }
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

    /// Full-structure check of the slot words against the counters.
    pub fn validate(&self) -> Result<()> {
        let mut main = 0u64;
        for i in 0..self.blocks.len() {
            let w = self.blocks.load(i) as u32;
            if w > TOMBSTONE {
                if self.layout.unpack(w).0 < 2 {
                    return Err(Error::Invariant(format!("slot {i} holds unremapped word {w:#x}")));
                }
                main += 1;
            }
        }
        let mut backing = 0u64;
        for i in 0..self.backing.len() {
            let w = self.backing.word(i);
            if w > TOMBSTONE {
                if self.layout.unpack(w).0 < 2 {
                    return Err(Error::Invariant(format!(
                        "backing bucket {i} holds unremapped word {w:#x}"
                    )));
                }
                backing += 1;
            }
        }
        let inserted = self.inserted.load(Ordering::Relaxed);
        let in_backing = self.backing_items.load(Ordering::Relaxed);
        let expect_backing = in_backing - self.removed_backing.load(Ordering::Relaxed);
        let expect_main = inserted - in_backing - self.removed_main.load(Ordering::Relaxed);
        if in_backing > inserted {
            return Err(Error::Invariant("backing count exceeds inserts".into()));
        }
        if main != expect_main || backing != expect_backing {
            return Err(Error::Invariant(format!(
                "slot census main={main} backing={backing}, counters expect {expect_main}/{expect_backing}"
            )));
        }
        Ok(())
    }
}
