//! Slot storage and metadata of the quotient filter.
//!
//! Every run is located from the 64-slot block that contains its quotient:
//! the block's offset says how far runs of earlier quotients spill into it,
//! and rank/select over `occupieds` and `runends` finds the rest by reading
//! forward only. An operation on a quotient in region `g` therefore never
//! reads or writes below the start of region `g`, and its shifts are bounded
//! by the start of region `g + 2`, which is what makes two region locks (or
//! even/odd region ownership) sufficient.

use std::sync::atomic::{AtomicU16, AtomicU64, Ordering::Relaxed};

use super::encoding::{parse_run, CountGroup, GroupSpan};
use crate::error::{Error, Result};
use crate::hash::low_mask;
use crate::words::AtomicWords;

pub const REGION_SLOTS: usize = 8192;

#[inline]
fn get_bit(v: &[AtomicU64], i: usize) -> bool {
    (v[i / 64].load(Relaxed) >> (i % 64)) & 1 == 1
}

#[inline]
fn put_bit(v: &[AtomicU64], i: usize, on: bool) {
    let m = 1u64 << (i % 64);
    if on {
        v[i / 64].fetch_or(m, Relaxed);
    } else {
        v[i / 64].fetch_and(!m, Relaxed);
    }
}

/// Set bits in `[from, to)`.
fn rank(v: &[AtomicU64], from: usize, to: usize) -> usize {
    let mut total = 0;
    let mut i = from;
    while i < to {
        let w = i / 64;
        let lo = i % 64;
        let hi = (to - w * 64).min(64) as u32;
        let mask = low_mask(hi) & !low_mask(lo as u32);
        total += (v[w].load(Relaxed) & mask).count_ones() as usize;
        i = (w + 1) * 64;
    }
    total
}

/// Position of the `t`-th (1-based) set bit at or after `start`.
fn select_from(v: &[AtomicU64], start: usize, mut t: usize) -> Option<usize> {
    debug_assert!(t >= 1);
    let mut w = start / 64;
    let mut word = v.get(w)?.load(Relaxed) & !low_mask((start % 64) as u32);
    loop {
        let c = word.count_ones() as usize;
        if t <= c {
            for _ in 1..t {
                word &= word - 1;
            }
            return Some(w * 64 + word.trailing_zeros() as usize);
        }
        t -= c;
        w += 1;
        word = v.get(w)?.load(Relaxed);
    }
}

/// First set bit in `[from, to)`.
fn next_set(v: &[AtomicU64], from: usize, to: usize) -> Option<usize> {
    if from >= to {
        return None;
    }
    select_from(v, from, 1).filter(|&i| i < to)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Splice {
    /// Inside an existing run; its runend moves with the shift.
    Interior,
    /// Right after the last slot of an existing run.
    Append,
    /// A run for a quotient that had none.
    NewRun,
}

/// Summary of cluster lengths (maximal stretches of used slots).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClusterStats {
    pub clusters: usize,
    pub max: usize,
    pub mean: f64,
}

/// One run as found by the linear reference scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSpan {
    pub quotient: usize,
    pub start: usize,
    pub end: usize,
}

pub(crate) struct Table {
    pub remainder_bits: u32,
    pub nominal: usize,
    pub physical: usize,
    slots: AtomicWords,
    occupieds: Box<[AtomicU64]>,
    runends: Box<[AtomicU64]>,
    offsets: Box<[AtomicU16]>,
    occupied_slots: AtomicU64,
    max_occupied: u64,
    items: AtomicU64,
    distinct: AtomicU64,
    slots_moved: AtomicU64,
}

impl Table {
    pub fn new(quotient_bits: u32, remainder_bits: u32, max_load: f64) -> Self {
        let nominal = 1usize << quotient_bits;
        let physical = nominal + nominal.min(REGION_SLOTS);
        let words = physical / 64;
        let zeros = |n: usize| (0..n).map(|_| AtomicU64::new(0)).collect();
        Table {
            remainder_bits,
            nominal,
            physical,
            slots: AtomicWords::zeroed(remainder_bits, physical),
            occupieds: zeros(words),
            runends: zeros(words),
            offsets: (0..words).map(|_| AtomicU16::new(0)).collect(),
            occupied_slots: AtomicU64::new(0),
            max_occupied: (max_load * nominal as f64).floor() as u64,
            items: AtomicU64::new(0),
            distinct: AtomicU64::new(0),
            slots_moved: AtomicU64::new(0),
        }
    }

    /// First slot a quotient's operation may not touch.
    pub fn limit_for(&self, quotient: usize) -> usize {
        let g = quotient / REGION_SLOTS;
        ((g + 2) * REGION_SLOTS).min(self.physical)
    }

    pub fn occupied_slots(&self) -> u64 {
        self.occupied_slots.load(Relaxed)
    }

    pub fn items(&self) -> u64 {
        self.items.load(Relaxed)
    }

    pub fn distinct(&self) -> u64 {
        self.distinct.load(Relaxed)
    }

    pub fn slots_moved(&self) -> u64 {
        self.slots_moved.load(Relaxed)
    }

    pub fn reset_slots_moved(&self) {
        self.slots_moved.store(0, Relaxed);
    }

    pub fn max_occupied(&self) -> u64 {
        self.max_occupied
    }

    pub fn size_bits(&self) -> u64 {
        self.slots.size_bits() + 2 * 64 * self.occupieds.len() as u64 + 16 * self.offsets.len() as u64
    }

    pub fn slot(&self, i: usize) -> u64 {
        self.slots.load(i)
    }

    pub fn is_occupied(&self, quotient: usize) -> bool {
        get_bit(&self.occupieds, quotient)
    }

    pub fn is_runend(&self, i: usize) -> bool {
        get_bit(&self.runends, i)
    }

    pub fn offset(&self, block: usize) -> usize {
        self.offsets[block].load(Relaxed) as usize
    }

    /// Metadata words are all zero.
    pub fn is_bit_empty(&self) -> bool {
        self.occupieds.iter().chain(self.runends.iter()).all(|w| w.load(Relaxed) == 0)
            && self.offsets.iter().all(|o| o.load(Relaxed) == 0)
    }

    /// End of the run of the largest occupied quotient `<= x` (`< x` when
    /// not `inclusive`), or `None` if that run ends before `x`'s block.
    fn runs_end(&self, x: usize, inclusive: bool) -> Option<usize> {
        let b0 = x & !63;
        let spill = self.offset(b0 / 64);
        let t = rank(&self.runends, b0, b0 + spill) + rank(&self.occupieds, b0, x + inclusive as usize);
        if t == 0 {
            return None;
        }
        Some(select_from(&self.runends, b0, t).expect("runend for every occupied quotient"))
    }

    /// Slot interval of the run for `quotient`, if it has one.
    pub fn find_run(&self, quotient: usize) -> Option<(usize, usize)> {
        if quotient >= self.nominal || !self.is_occupied(quotient) {
            return None;
        }
        let end = self.runs_end(quotient, true)?;
        let start = self.runs_end(quotient, false).map_or(quotient, |e| quotient.max(e + 1));
        Some((start, end))
    }

    /// Smallest unused slot `>= from`, walking forward run by run.
    fn first_empty(&self, mut from: usize, limit: usize) -> Option<usize> {
        while from < limit {
            match self.runs_end(from, true) {
                Some(e) if e >= from => from = e + 1,
                _ => return Some(from),
            }
        }
        None
    }

    fn read(&self, start: usize, end: usize) -> Vec<u64> {
        (start..=end).map(|i| self.slots.load(i)).collect()
    }

    fn write(&self, at: usize, values: &[u64]) {
        for (i, &v) in values.iter().enumerate() {
            self.slots.store(at + i, v);
        }
    }

    fn groups(&self, start: usize, end: usize) -> Result<Vec<GroupSpan>> {
        parse_run(&self.read(start, end), self.remainder_bits)
    }

    /// Decoded count of `remainder` in the run of `quotient`.
    pub fn count(&self, quotient: usize, remainder: u64) -> Result<u64> {
        let Some((s, e)) = self.find_run(quotient) else {
            return Ok(0);
        };
        Ok(self
            .groups(s, e)?
            .iter()
            .find(|g| g.group.head == remainder)
            .map_or(0, |g| g.group.count))
    }

    /// Adds `delta` to the count of (`quotient`, `remainder`).
    ///
    /// The caller must own regions `g` and `g + 1` of the quotient. On error
    /// the table is unchanged.
    pub fn insert(&self, quotient: usize, remainder: u64, delta: u64) -> Result<()> {
        if delta == 0 {
            return Ok(());
        }
        let r = self.remainder_bits;
        let limit = self.limit_for(quotient);
        let Some((s, e)) = self.find_run(quotient) else {
            let enc = CountGroup::new(remainder, delta).encode(r);
            let p = self.runs_end(quotient, false).map_or(quotient, |e| quotient.max(e + 1));
            self.make_room(quotient, p, enc.len(), Splice::NewRun, limit)?;
            self.write(p, &enc);
            self.distinct.fetch_add(1, Relaxed);
            self.items.fetch_add(delta, Relaxed);
            return Ok(());
        };
        let groups = self.groups(s, e)?;
        match groups.iter().find(|g| g.group.head >= remainder) {
            Some(g) if g.group.head == remainder => {
                let c = g.group.count.checked_add(delta).ok_or(Error::CountOverflow)?;
                let enc = CountGroup::new(remainder, c).encode(r);
                let at = s + g.offset;
                let grow = enc.len() - g.len;
                if grow > 0 {
                    self.make_room(quotient, at, grow, Splice::Interior, limit)?;
                }
                self.write(at, &enc);
            }
            next => {
                let enc = CountGroup::new(remainder, delta).encode(r);
                let (at, kind) = match next {
                    Some(g) => (s + g.offset, Splice::Interior),
                    None => (e + 1, Splice::Append),
                };
                self.make_room(quotient, at, enc.len(), kind, limit)?;
                self.write(at, &enc);
                self.distinct.fetch_add(1, Relaxed);
            }
        }
        self.items.fetch_add(delta, Relaxed);
        Ok(())
    }

    /// Opens `k` slots at `p`, pushing everything up to the `k`-th empty
    /// slot to the right. The opened slots hold stale values.
    fn make_room(&self, quotient: usize, p: usize, k: usize, kind: Splice, limit: usize) -> Result<()> {
        let k64 = k as u64;
        self.occupied_slots
            .fetch_update(Relaxed, Relaxed, |o| (o + k64 <= self.max_occupied).then_some(o + k64))
            .map_err(|o| Error::LoadLimit {
                occupied: o as usize,
                limit: self.max_occupied as usize,
            })?;
        let mut empties = Vec::with_capacity(k);
        let mut from = p;
        for _ in 0..k {
            match self.first_empty(from, limit) {
                Some(e) => {
                    empties.push(e);
                    from = e + 1;
                }
                None => {
                    self.occupied_slots.fetch_sub(k64, Relaxed);
                    return Err(Error::ShiftBound {
                        quotient: quotient as u64,
                        limit,
                    });
                }
            }
        }
        // Segment i lies between empties i-1 and i and moves right by k - i.
        let mut moved = 0;
        for i in (0..k).rev() {
            let a = if i == 0 { p } else { empties[i - 1] + 1 };
            let shift = k - i;
            for j in (a..empties[i]).rev() {
                self.slots.store(j + shift, self.slots.load(j));
                put_bit(&self.runends, j + shift, get_bit(&self.runends, j));
            }
            moved += empties[i] - a;
        }
        for j in p..p + k {
            put_bit(&self.runends, j, false);
        }
        match kind {
            Splice::Interior => {}
            Splice::Append => {
                put_bit(&self.runends, p - 1, false);
                put_bit(&self.runends, p + k - 1, true);
            }
            Splice::NewRun => {
                put_bit(&self.runends, p + k - 1, true);
                put_bit(&self.occupieds, quotient, true);
            }
        }
        self.slots_moved.fetch_add(moved as u64, Relaxed);
        self.refresh_offsets(quotient, empties[k - 1]);
        Ok(())
    }

    /// Recomputes offsets of blocks starting in `(after, through]`.
    fn refresh_offsets(&self, after: usize, through: usize) {
        let mut b = (after / 64 + 1) * 64;
        while b <= through && b < self.physical {
            let spill = match self.runs_end(b - 1, true) {
                Some(e) if e >= b => e - b + 1,
                _ => 0,
            };
            debug_assert!(spill <= u16::MAX as usize);
            self.offsets[b / 64].store(spill as u16, Relaxed);
            b += 64;
        }
    }

    /// Subtracts up to `delta` from the count of (`quotient`, `remainder`).
    /// Returns whether the remainder was present. On error the table is
    /// unchanged.
    pub fn remove(&self, quotient: usize, remainder: u64, delta: u64) -> Result<bool> {
        let Some((s, e)) = self.find_run(quotient) else {
            return Ok(false);
        };
        let groups = self.groups(s, e)?;
        let Some(g) = groups.iter().find(|g| g.group.head == remainder) else {
            return Ok(false);
        };
        let take = delta.min(g.group.count);
        if take == 0 {
            return Ok(true);
        }
        let left = g.group.count - take;
        let at = s + g.offset;
        let enc = if left > 0 {
            CountGroup::new(remainder, left).encode(self.remainder_bits)
        } else {
            Vec::new()
        };
        let k = g.len - enc.len();
        if k > 0 {
            let plan = self.plan_removal(quotient, s, e, at + enc.len(), k)?;
            self.write(at, &enc);
            self.apply_removal(quotient, &plan);
        } else {
            self.write(at, &enc);
        }
        self.items.fetch_sub(take, Relaxed);
        if left == 0 {
            self.distinct.fetch_sub(1, Relaxed);
        }
        Ok(true)
    }

    /// Works out how the cluster closes up after dropping `k` slots at `p`
    /// from the run `[s, e]` of `quotient`, without writing anything.
    fn plan_removal(&self, quotient: usize, s: usize, e: usize, p: usize, k: usize) -> Result<Removal> {
        let limit = self.limit_for(quotient);
        let run_vanishes = k == e - s + 1;
        let mut moves = Vec::new();
        let mut ends = Vec::new();
        if p + k <= e {
            moves.push(Move { src: p + k, len: e + 1 - (p + k), dst: p });
        }
        let mut new_prev_end = if run_vanishes {
            self.runs_end(quotient, false)
        } else {
            ends.push(e - k);
            Some(e - k)
        };
        let mut old_prev_end = e;
        let mut cursor = quotient + 1;
        // Later runs of the cluster slide left until one is at its home.
        while let Some(y) = next_set(&self.occupieds, cursor, (old_prev_end + 1).min(self.nominal)) {
            let start = old_prev_end + 1;
            let new_start = new_prev_end.map_or(y, |n| y.max(n + 1));
            if new_start == start {
                break;
            }
            let end = select_from(&self.runends, start, 1).expect("runend for every occupied quotient");
            if end >= limit {
                return Err(Error::ShiftBound {
                    quotient: quotient as u64,
                    limit,
                });
            }
            let len = end + 1 - start;
            moves.push(Move { src: start, len, dst: new_start });
            ends.push(new_start + len - 1);
            new_prev_end = Some(new_start + len - 1);
            old_prev_end = end;
            cursor = y + 1;
        }
        Ok(Removal {
            from: p,
            through: old_prev_end,
            removed: k,
            moves,
            ends,
            run_vanishes,
        })
    }

    fn apply_removal(&self, quotient: usize, plan: &Removal) {
        let mut moved = 0;
        for m in &plan.moves {
            for i in 0..m.len {
                self.slots.store(m.dst + i, self.slots.load(m.src + i));
            }
            moved += m.len;
        }
        // Zero whatever the moved runs no longer cover.
        let mut covered = plan.moves.iter().map(|m| (m.dst, m.dst + m.len)).peekable();
        let mut i = plan.from;
        while i <= plan.through {
            match covered.peek() {
                Some(&(a, b)) if i >= a => {
                    i = i.max(b);
                    covered.next();
                }
                _ => {
                    self.slots.store(i, 0);
                    i += 1;
                }
            }
        }
        for j in plan.from..=plan.through {
            put_bit(&self.runends, j, false);
        }
        for &end in &plan.ends {
            put_bit(&self.runends, end, true);
        }
        if plan.run_vanishes {
            put_bit(&self.occupieds, quotient, false);
        }
        self.occupied_slots.fetch_sub(plan.removed as u64, Relaxed);
        self.slots_moved.fetch_add(moved as u64, Relaxed);
        self.refresh_offsets(quotient, plan.through);
    }

    /// Every run, found by pairing the k-th occupied quotient with the k-th
    /// runend while walking the whole table from slot 0.
    pub fn runs_linear(&self) -> Vec<RunSpan> {
        let mut out = Vec::new();
        let mut prev_end: Option<usize> = None;
        let mut end_cursor = 0;
        for quotient in (0..self.nominal).filter(|&x| self.is_occupied(x)) {
            while end_cursor < self.physical && !self.is_runend(end_cursor) {
                end_cursor += 1;
            }
            let start = prev_end.map_or(quotient, |p| quotient.max(p + 1));
            out.push(RunSpan {
                quotient,
                start,
                end: end_cursor,
            });
            prev_end = Some(end_cursor);
            end_cursor += 1;
        }
        out
    }

    /// (quotient, remainder, count) for every group, in ascending order.
    pub fn enumerate(&self) -> Result<Vec<(u64, u64, u64)>> {
        let mut out = Vec::new();
        for run in self.runs_linear() {
            for g in self.groups(run.start, run.end)? {
                out.push((run.quotient as u64, g.group.head, g.group.count));
            }
        }
        Ok(out)
    }

    pub fn cluster_stats(&self) -> ClusterStats {
        let mut lens: Vec<usize> = Vec::new();
        let mut current: Option<(usize, usize)> = None;
        for run in self.runs_linear() {
            current = match current {
                Some((a, b)) if run.start == b + 1 => Some((a, run.end)),
                Some((a, b)) => {
                    lens.push(b + 1 - a);
                    Some((run.start, run.end))
                }
                None => Some((run.start, run.end)),
            };
        }
        if let Some((a, b)) = current {
            lens.push(b + 1 - a);
        }
        ClusterStats {
            clusters: lens.len(),
            max: lens.iter().copied().max().unwrap_or(0),
            mean: if lens.is_empty() { 0.0 } else { lens.iter().sum::<usize>() as f64 / lens.len() as f64 },
        }
    }

    /// Full structural check against the linear reference.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Invariant(msg));
        let occ = rank(&self.occupieds, 0, self.physical);
        let ends = rank(&self.runends, 0, self.physical);
        if occ != ends {
            return bad(format!("{occ} occupied quotients but {ends} runends"));
        }
        if rank(&self.occupieds, self.nominal, self.physical) != 0 {
            return bad("occupied bit beyond the quotient range".into());
        }
        let runs = self.runs_linear();
        let mut used = vec![false; self.physical];
        let (mut items, mut distinct) = (0u64, 0u64);
        for run in &runs {
            if run.end >= self.physical || run.end < run.start {
                return bad(format!("run of {} has no runend after {}", run.quotient, run.start));
            }
            let groups = self.groups(run.start, run.end)?;
            for g in &groups {
                items = items.saturating_add(g.group.count);
                distinct += 1;
            }
            for u in &mut used[run.start..=run.end] {
                *u = true;
            }
        }
        let used_count = used.iter().filter(|&&u| u).count() as u64;
        if used_count != self.occupied_slots() {
            return bad(format!("{used_count} used slots, counter says {}", self.occupied_slots()));
        }
        if items != self.items() || distinct != self.distinct() {
            return bad(format!(
                "census {items} items / {distinct} distinct, counters {} / {}",
                self.items(),
                self.distinct()
            ));
        }
        if let Some(i) = (0..self.physical).find(|&i| !used[i] && self.slots.load(i) != 0) {
            return bad(format!("unused slot {i} holds {}", self.slots.load(i)));
        }
        // Offsets: spill of runs of quotients < b into block b.
        let mut run_idx = 0;
        let mut last_end: Option<usize> = None;
        for b in (0..self.physical).step_by(64) {
            while run_idx < runs.len() && runs[run_idx].quotient < b {
                last_end = Some(runs[run_idx].end);
                run_idx += 1;
            }
            let want = last_end.filter(|&e| e >= b).map_or(0, |e| e - b + 1);
            if self.offset(b / 64) != want {
                return bad(format!("block {} offset {} expected {want}", b / 64, self.offset(b / 64)));
            }
        }
        for run in &runs {
            if self.find_run(run.quotient) != Some((run.start, run.end)) {
                return bad(format!(
                    "find_run({}) = {:?}, linear scan {:?}",
                    run.quotient,
                    self.find_run(run.quotient),
                    (run.start, run.end)
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug)]
struct Move {
    src: usize,
    len: usize,
    dst: usize,
}

#[derive(Debug)]
struct Removal {
    from: usize,
    through: usize,
    removed: usize,
    moves: Vec<Move>,
    ends: Vec<usize>,
    run_vanishes: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn bits(n: usize, set: &[usize]) -> Vec<AtomicU64> {
        let v: Vec<AtomicU64> = (0..n.div_ceil(64)).map(|_| AtomicU64::new(0)).collect();
        for &i in set {
            put_bit(&v, i, true);
        }
        v
    }

    #[test]
    fn rank_select_against_naive() {
        let mut rng = StdRng::seed_from_u64(1);
        let n = 640;
        let set: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.3)).collect();
        let v = bits(n, &set);
        for _ in 0..2000 {
            let a = rng.random_range(0..n);
            let b = rng.random_range(a..=n);
            assert_eq!(rank(&v, a, b), set.iter().filter(|&&i| i >= a && i < b).count());
            let t = rng.random_range(1..20);
            assert_eq!(select_from(&v, a, t), set.iter().copied().filter(|&i| i >= a).nth(t - 1));
            assert_eq!(next_set(&v, a, b), set.iter().copied().find(|&i| i >= a && i < b));
        }
    }

    #[test]
    fn empty_table() {
        let t = Table::new(8, 8, 0.95);
        assert_eq!(t.physical, 512);
        assert!(t.is_bit_empty());
        assert_eq!(t.find_run(5), None);
        assert_eq!(t.count(5, 1).unwrap(), 0);
        assert_eq!(t.cluster_stats(), ClusterStats::default());
        t.validate().unwrap();
    }

    #[test]
    fn home_placement() {
        let t = Table::new(8, 8, 0.95);
        t.insert(3, 7, 1).unwrap();
        assert_eq!(t.slot(3), 7);
        assert!(t.is_occupied(3) && t.is_runend(3));
        assert_eq!(t.find_run(3), Some((3, 3)));
        t.insert(3, 7, 1).unwrap();
        assert_eq!((t.slot(3), t.slot(4)), (7, 7));
        assert!(!t.is_runend(3) && t.is_runend(4));
        assert_eq!(t.count(3, 7).unwrap(), 2);
        t.validate().unwrap();
    }

    #[test]
    fn displaced_runs_and_removal() {
        let t = Table::new(8, 8, 0.95);
        for (q, r) in [(5, 1), (5, 9), (6, 4), (5, 3), (8, 2), (6, 1)] {
            t.insert(q, r, 1).unwrap();
            t.validate().unwrap();
        }
        // run 5: [1,3,9] at 5..=7, run 6: [1,4] at 8..=9, run 8 at 10
        assert_eq!(t.find_run(5), Some((5, 7)));
        assert_eq!(t.find_run(6), Some((8, 9)));
        assert_eq!(t.find_run(8), Some((10, 10)));
        assert!(t.remove(5, 3, 1).unwrap());
        t.validate().unwrap();
        assert_eq!(t.find_run(6), Some((7, 8)));
        assert_eq!(t.find_run(8), Some((9, 9)));
        assert!(!t.remove(5, 3, 1).unwrap());
        for (q, r) in [(5, 1), (5, 9), (6, 4), (8, 2), (6, 1)] {
            assert!(t.remove(q, r, 1).unwrap());
            t.validate().unwrap();
        }
        assert!(t.is_bit_empty());
    }

    #[test]
    fn counter_growth_and_shrink() {
        let t = Table::new(8, 8, 0.95);
        t.insert(10, 7, 1).unwrap();
        t.insert(11, 2, 1).unwrap();
        t.insert(10, 7, 299).unwrap();
        assert_eq!(t.read(10, 13), vec![7, 3, 43, 7]);
        assert_eq!(t.find_run(11), Some((14, 14)));
        t.validate().unwrap();
        assert!(t.remove(10, 7, 298).unwrap());
        assert_eq!(t.count(10, 7).unwrap(), 2);
        assert_eq!(t.find_run(11), Some((12, 12)));
        t.validate().unwrap();
    }

    #[test]
    fn load_limit_leaves_table_intact() {
        let t = Table::new(6, 8, 0.5);
        for q in 0..32 {
            t.insert(q, 1, 1).unwrap();
        }
        assert!(matches!(t.insert(40, 1, 1), Err(Error::LoadLimit { .. })));
        assert!(matches!(t.insert(3, 1, 1), Err(Error::LoadLimit { .. })));
        t.validate().unwrap();
    }

    #[test]
    fn wraps_into_padding() {
        let t = Table::new(6, 8, 1.0);
        for r in 0..40u64 {
            t.insert(63, r, 1).unwrap();
        }
        assert_eq!(t.find_run(63), Some((63, 102)));
        t.validate().unwrap();
    }

    #[test]
    fn random_ops_match_ledger_and_linear_scan() {
        let mut rng = StdRng::seed_from_u64(9);
        for round in 0..20 {
            let t = Table::new(10, 8, 0.95);
            let mut ledger = std::collections::BTreeMap::<(u64, u64), u64>::new();
            for _ in 0..3000 {
                let q = rng.random_range(0..(1 << 10)) >> rng.random_range(0..3);
                let r = rng.random_range(0..16u64);
                let fp = (q, r);
                if rng.random_bool(0.7) {
                    let d = if rng.random_bool(0.9) { 1 } else { rng.random_range(1..600) };
                    if t.insert(q as usize, r, d).is_ok() {
                        *ledger.entry(fp).or_default() += d;
                    }
                } else {
                    let d = rng.random_range(1..4);
                    let had = ledger.get(&fp).copied().unwrap_or(0);
                    assert_eq!(t.remove(q as usize, r, d).unwrap(), had > 0);
                    if had > 0 {
                        if had <= d {
                            ledger.remove(&fp);
                        } else {
                            ledger.insert(fp, had - d);
                        }
                    }
                }
            }
            t.validate().unwrap_or_else(|e| panic!("round {round}: {e}"));
            let want: Vec<(u64, u64, u64)> = ledger.into_iter().map(|((q, r), c)| (q, r, c)).collect();
            assert_eq!(t.enumerate().unwrap(), want);
        }
    }
}
