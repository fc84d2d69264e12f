//! Counting quotient filter.
//!
//! Point operations lock the quotient's region and the next one, always in
//! ascending order. Bulk operations sort the batch, cut it into per-region
//! slices, and insert all even regions in parallel, then all odd ones;
//! within a phase no two workers can touch the same slot, so no locks are
//! taken.

pub mod encoding;
mod table;

use std::hint::spin_loop;
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::hash::{fingerprint, low_mask, mix64, QuotRem};
use table::Table;

pub use encoding::CountGroup;
pub use table::{ClusterStats, RunSpan, REGION_SLOTS};

#[derive(Debug, Clone, PartialEq)]
pub struct QfParams {
    /// The table has `2^quotient_bits` slots.
    pub quotient_bits: u32,
    /// 8, 16, 32 or 64.
    pub remainder_bits: u32,
    /// Inserts fail with `LoadLimit` beyond this fraction of slots; at most 0.95.
    pub max_load: f64,
    pub seed: u64,
}

impl Default for QfParams {
    fn default() -> Self {
        QfParams {
            quotient_bits: 20,
            remainder_bits: 8,
            max_load: 0.95,
            seed: 0,
        }
    }
}

impl QfParams {
    pub fn new(quotient_bits: u32, remainder_bits: u32) -> Self {
        QfParams {
            quotient_bits,
            remainder_bits,
            ..QfParams::default()
        }
    }

    pub fn fingerprint_bits(&self) -> u32 {
        self.quotient_bits + self.remainder_bits
    }

    fn validate(&self) -> Result<()> {
        if !(6..=32).contains(&self.quotient_bits) {
            return Err(Error::param(format!(
                "quotient bits {} not in 6..=32",
                self.quotient_bits
            )));
        }
        if !matches!(self.remainder_bits, 8 | 16 | 32 | 64) {
            return Err(Error::param(format!(
                "remainder bits {} not in {{8, 16, 32, 64}}",
                self.remainder_bits
            )));
        }
        if !(self.max_load > 0.0 && self.max_load <= 0.95) {
            return Err(Error::param(format!("max load {} not in (0, 0.95]", self.max_load)));
        }
        Ok(())
    }
}

/// A spin lock on its own cache line.
#[repr(align(64))]
struct RegionLock(AtomicBool);

struct LockGuard<'a>(&'a AtomicBool);

impl RegionLock {
    fn lock(&self) -> LockGuard<'_> {
        let mut spins = 0u32;
        while self
            .0
            .compare_exchange_weak(false, true, Ordering::Acquire, Ordering::Relaxed)
            .is_err()
        {
            spins += 1;
            if spins < 64 {
                spin_loop();
            } else {
                std::thread::yield_now();
            }
        }
        LockGuard(&self.0)
    }
}

impl Drop for LockGuard<'_> {
    fn drop(&mut self) {
        self.0.store(false, Ordering::Release);
    }
}

/// Order in which a bulk delete walks each region's slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeleteOrder {
    /// Largest fingerprint first: the usual choice, since a deletion then
    /// never shifts an item that is about to be deleted itself.
    Descending,
    Ascending,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BulkDeleteStats {
    pub deleted: u64,
    pub absent: u64,
}

fn run_lengths<T: PartialEq + Copy>(sorted: impl IntoIterator<Item = T>) -> Vec<(T, u64)> {
    let mut out: Vec<(T, u64)> = Vec::new();
    for x in sorted {
        match out.last_mut() {
            Some((y, c)) if *y == x => *c += 1,
            _ => out.push((x, 1)),
        }
    }
    out
}

/// Sorts a batch of fingerprints (radix sort) and run-length reduces it to
/// (fingerprint, multiplicity) pairs in ascending order.
pub fn reduce_duplicates(fingerprints: &[u64]) -> Vec<(u64, u64)> {
    let mut sorted = fingerprints.to_vec();
    radsort::sort(&mut sorted);
    run_lengths(sorted)
}

pub struct Gqf {
    params: QfParams,
    table: Table,
    locks: Box<[RegionLock]>,
}

impl std::fmt::Debug for Gqf {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gqf")
            .field("params", &self.params)
            .field("items", &self.len())
            .finish()
    }
}

impl Gqf {
    pub fn new(params: QfParams) -> Result<Self> {
        params.validate()?;
        let table = Table::new(params.quotient_bits, params.remainder_bits, params.max_load);
        let regions = table.nominal.div_ceil(REGION_SLOTS);
        let locks = (0..regions).map(|_| RegionLock(AtomicBool::new(false))).collect();
        Ok(Gqf { params, table, locks })
    }

    pub fn params(&self) -> &QfParams {
        &self.params
    }

    /// Addressable slots, `2^q`.
    pub fn num_slots(&self) -> usize {
        self.table.nominal
    }

    /// Allocated slots including the overflow tail after the last region.
    pub fn physical_slots(&self) -> usize {
        self.table.physical
    }

    pub fn num_regions(&self) -> usize {
        self.locks.len()
    }

    pub fn num_locks(&self) -> usize {
        self.locks.len()
    }

    /// Quotient and remainder of a key. When `q + r` exceeds 64 bits the
    /// quotient comes from a second, independent mix.
    pub fn hash(&self, key: u64) -> QuotRem {
        let (q, r) = (self.params.quotient_bits, self.params.remainder_bits);
        if q + r <= 64 {
            fingerprint(key, self.params.seed, q + r)
                .and_then(|fp| fp.split(q))
                .expect("widths validated at construction")
        } else {
            let h = mix64(key ^ self.params.seed);
            QuotRem {
                quotient: mix64(h ^ 0xd6e8_feb8_6659_fd93) >> (64 - q),
                remainder: h & low_mask(r),
                remainder_bits: r,
            }
        }
    }

    fn check(&self, qr: QuotRem) -> Result<usize> {
        if qr.quotient >= self.table.nominal as u64
            || qr.remainder & !low_mask(self.params.remainder_bits) != 0
            || qr.remainder_bits != self.params.remainder_bits
        {
            return Err(Error::param(format!("{qr:?} does not fit this filter")));
        }
        Ok(qr.quotient as usize)
    }

    fn lock_regions(&self, quotient: usize) -> (LockGuard<'_>, Option<LockGuard<'_>>) {
        let g = quotient / REGION_SLOTS;
        let first = self.locks[g].lock();
        // The last region's successor is the unlocked overflow tail.
        let second = self.locks.get(g + 1).map(RegionLock::lock);
        (first, second)
    }

    pub fn insert(&self, key: u64, delta: u64) -> Result<()> {
        self.insert_hashed(self.hash(key), delta)
    }

    /// Point insert of an already split fingerprint.
    pub fn insert_hashed(&self, qr: QuotRem, delta: u64) -> Result<()> {
        let x = self.check(qr)?;
        let _guards = self.lock_regions(x);
        self.table.insert(x, qr.remainder, delta)
    }

    /// Stored count for the key: at least its true count, more only when
    /// another key shares its fingerprint.
    pub fn count(&self, key: u64) -> u64 {
        self.count_hashed(self.hash(key))
    }

    pub fn count_hashed(&self, qr: QuotRem) -> u64 {
        let Ok(x) = self.check(qr) else {
            return 0;
        };
        let _guards = self.lock_regions(x);
        self.table
            .count(x, qr.remainder)
            .unwrap_or_else(|e| panic!("corrupt run at quotient {x}: {e}"))
    }

    pub fn contains(&self, key: u64) -> bool {
        self.count(key) > 0
    }

    /// Lowers the key's count by up to `delta`; false if it was absent.
    pub fn delete(&self, key: u64, delta: u64) -> Result<bool> {
        self.delete_hashed(self.hash(key), delta)
    }

    pub fn delete_hashed(&self, qr: QuotRem, delta: u64) -> Result<bool> {
        let x = self.check(qr)?;
        let _guards = self.lock_regions(x);
        self.table.remove(x, qr.remainder, delta)
    }

    /// Slot interval of a quotient's run. Needs a quiescent table.
    pub fn find_run(&self, quotient: u64) -> Option<(usize, usize)> {
        self.table.find_run(usize::try_from(quotient).ok()?)
    }

    /// Every run, located by a plain scan from slot 0. Reference for
    /// [`find_run`](Self::find_run).
    pub fn runs_linear(&self) -> Vec<RunSpan> {
        self.table.runs_linear()
    }

    /// Raw contents of a slot, for inspection.
    pub fn slot(&self, i: usize) -> u64 {
        self.table.slot(i)
    }

    pub fn is_occupied(&self, quotient: usize) -> bool {
        self.table.is_occupied(quotient)
    }

    pub fn is_runend(&self, slot: usize) -> bool {
        self.table.is_runend(slot)
    }

    /// Every stored fingerprint with its count, in ascending order.
    pub fn enumerate(&self) -> Result<Vec<(QuotRem, u64)>> {
        let r = self.params.remainder_bits;
        Ok(self
            .table
            .enumerate()?
            .into_iter()
            .map(|(quotient, remainder, c)| {
                (
                    QuotRem {
                        quotient,
                        remainder,
                        remainder_bits: r,
                    },
                    c,
                )
            })
            .collect())
    }

    /// Total count over all fingerprints.
    pub fn len(&self) -> u64 {
        self.table.items()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn distinct(&self) -> u64 {
        self.table.distinct()
    }

    pub fn occupied_slots(&self) -> u64 {
        self.table.occupied_slots()
    }

    /// Occupied slots over `2^q`.
    pub fn load_factor(&self) -> f64 {
        self.table.occupied_slots() as f64 / self.table.nominal as f64
    }

    /// Slots the load limit allows in total.
    pub fn max_occupied_slots(&self) -> u64 {
        self.table.max_occupied()
    }

    pub fn cluster_stats(&self) -> ClusterStats {
        self.table.cluster_stats()
    }

    /// Remainders, both metadata bits and block offsets for every physical
    /// slot, plus one cache line per lock.
    pub fn size_bits(&self) -> u64 {
        self.table.size_bits() + 512 * self.locks.len() as u64
    }

    /// True when no metadata bit or offset is set.
    pub fn is_bit_empty(&self) -> bool {
        self.table.is_bit_empty()
    }

    /// Slots moved by shifts since creation or the last reset.
    pub fn slots_moved(&self) -> u64 {
        self.table.slots_moved()
    }

    pub fn reset_slots_moved(&self) {
        self.table.reset_slots_moved();
    }

    pub fn validate(&self) -> Result<()> {
        self.table.validate()
    }

    /// Whether a fingerprint fits one `u64`, so batches can be radix sorted.
    fn packable(&self) -> bool {
        self.params.fingerprint_bits() <= 64
    }

    fn unpack(&self, fp: u64) -> QuotRem {
        let r = self.params.remainder_bits;
        QuotRem {
            quotient: fp >> r,
            remainder: fp & low_mask(r),
            remainder_bits: r,
        }
    }

    /// Packed `quotient ‖ remainder` fingerprint; only valid when packable.
    #[inline]
    fn packed(&self, key: u64) -> u64 {
        mix64(key ^ self.params.seed) & low_mask(self.params.fingerprint_bits())
    }

    /// Hashes a batch, sorts it by fingerprint and reduces duplicates.
    /// Fingerprints of at most 32 bits are radix sorted as `u32`.
    fn hash_reduced(&self, keys: &[u64]) -> Vec<(QuotRem, u64)> {
        let bits = self.params.fingerprint_bits();
        if bits <= 32 {
            let mut fps: Vec<u32> = keys.iter().map(|&k| self.packed(k) as u32).collect();
            radsort::sort(&mut fps);
            run_lengths(fps).into_iter().map(|(fp, c)| (self.unpack(fp as u64), c)).collect()
        } else if self.packable() {
            let mut fps: Vec<u64> = keys.iter().map(|&k| self.packed(k)).collect();
            radsort::sort(&mut fps);
            run_lengths(fps).into_iter().map(|(fp, c)| (self.unpack(fp), c)).collect()
        } else {
            let mut v: Vec<QuotRem> = keys.iter().map(|&k| self.hash(k)).collect();
            v.sort_unstable();
            run_lengths(v)
        }
    }

    /// Inserts every key once. See [`bulk_insert_counts`](Self::bulk_insert_counts).
    pub fn bulk_insert(&mut self, keys: &[u64], workers: usize) -> Result<()> {
        let items: Vec<(QuotRem, u64)> = self
            .hash_reduced(keys)
            .into_iter()
            .flat_map(|(qr, c)| std::iter::repeat_n((qr, 1), c as usize))
            .collect();
        self.insert_sorted(&items, workers)
    }

    /// Inserts (fingerprint, delta) pairs with even/odd region phases.
    ///
    /// On error the phase stops early: groups inserted so far stay, the
    /// table stays valid, and the remaining items are not inserted.
    pub fn bulk_insert_counts(&mut self, items: &[(QuotRem, u64)], workers: usize) -> Result<()> {
        for &(qr, _) in items {
            self.check(qr)?;
        }
        let mut items = items.to_vec();
        items.sort_unstable();
        self.insert_sorted(&items, workers)
    }

    /// Collapses duplicates first, then inserts each distinct fingerprint
    /// once with its multiplicity.
    pub fn bulk_count(&mut self, keys: &[u64], workers: usize) -> Result<()> {
        let pairs = self.hash_reduced(keys);
        self.insert_sorted(&pairs, workers)
    }

    fn insert_sorted(&mut self, items: &[(QuotRem, u64)], workers: usize) -> Result<()> {
        self.phased(items, workers, |table, slice| {
            for &(qr, delta) in slice {
                table.insert(qr.quotient as usize, qr.remainder, delta)?;
            }
            Ok(())
        })
    }

    pub fn bulk_delete(&mut self, keys: &[u64], workers: usize) -> Result<BulkDeleteStats> {
        self.bulk_delete_ordered(keys, workers, DeleteOrder::Descending)
    }

    /// Deletes one occurrence per key, phase by phase like the inserts.
    pub fn bulk_delete_ordered(
        &mut self,
        keys: &[u64],
        workers: usize,
        order: DeleteOrder,
    ) -> Result<BulkDeleteStats> {
        let items: Vec<(QuotRem, u64)> = self
            .hash_reduced(keys)
            .into_iter()
            .flat_map(|(qr, c)| std::iter::repeat_n((qr, 1), c as usize))
            .collect();
        let deleted = AtomicU64::new(0);
        let absent = AtomicU64::new(0);
        self.phased(&items, workers, |table, slice| {
            let one = |&(qr, delta): &(QuotRem, u64)| -> Result<()> {
                let hit = table.remove(qr.quotient as usize, qr.remainder, delta)?;
                if hit { &deleted } else { &absent }.fetch_add(1, Ordering::Relaxed);
                Ok(())
            };
            match order {
                DeleteOrder::Descending => slice.iter().rev().try_for_each(one),
                DeleteOrder::Ascending => slice.iter().try_for_each(one),
            }
        })?;
        Ok(BulkDeleteStats {
            deleted: deleted.into_inner(),
            absent: absent.into_inner(),
        })
    }

    /// Runs `op` on each region's slice of a quotient-sorted batch: first
    /// all even regions, then all odd ones, `workers` threads claiming
    /// regions from a shared counter.
    fn phased<F>(&mut self, items: &[(QuotRem, u64)], workers: usize, op: F) -> Result<()>
    where
        F: Fn(&Table, &[(QuotRem, u64)]) -> Result<()> + Sync,
    {
        let regions = self.num_regions();
        let bounds: Vec<usize> = (0..=regions)
            .map(|g| items.partition_point(|(qr, _)| (qr.quotient as usize) < g * REGION_SLOTS))
            .collect();
        let table = &self.table;
        for parity in [0, 1] {
            let todo: Vec<usize> = (parity..regions)
                .step_by(2)
                .filter(|&g| bounds[g] < bounds[g + 1])
                .collect();
            if todo.is_empty() {
                continue;
            }
            let next = AtomicUsize::new(0);
            let stop = AtomicBool::new(false);
            let failure: Mutex<Option<Error>> = Mutex::new(None);
            let work = || {
                while !stop.load(Ordering::Relaxed) {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(&g) = todo.get(i) else { break };
                    if let Err(e) = op(table, &items[bounds[g]..bounds[g + 1]]) {
                        stop.store(true, Ordering::Relaxed);
                        failure.lock().unwrap().get_or_insert(e);
                    }
                }
            };
            let threads = workers.clamp(1, todo.len());
            if threads == 1 {
                work();
            } else {
                std::thread::scope(|s| {
                    for _ in 0..threads {
                        s.spawn(&work);
                    }
                });
            }
            if let Some(e) = failure.into_inner().unwrap() {
                return Err(e);
            }
        }
        Ok(())
    }
}
