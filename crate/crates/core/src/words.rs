//! Fixed-width arrays of atomically updatable words.

use std::sync::atomic::{AtomicU16, AtomicU32, AtomicU64, AtomicU8, Ordering};

/// A flat array of 8/16/32/64-bit atomic cells, read and written as `u64`.
///
/// Plain loads and stores use `Relaxed`; callers order them with locks,
/// compare-exchange, or thread joins.
pub(crate) enum AtomicWords {
    U8(Box<[AtomicU8]>),
    U16(Box<[AtomicU16]>),
    U32(Box<[AtomicU32]>),
    U64(Box<[AtomicU64]>),
}

macro_rules! dispatch {
    ($self:expr, $cells:ident => $body:expr) => {
        match $self {
            AtomicWords::U8($cells) => $body,
            AtomicWords::U16($cells) => $body,
            AtomicWords::U32($cells) => $body,
            AtomicWords::U64($cells) => $body,
        }
    };
}

impl AtomicWords {
    pub fn zeroed(bits: u32, len: usize) -> Self {
        match bits {
            8 => AtomicWords::U8((0..len).map(|_| AtomicU8::new(0)).collect()),
            16 => AtomicWords::U16((0..len).map(|_| AtomicU16::new(0)).collect()),
            32 => AtomicWords::U32((0..len).map(|_| AtomicU32::new(0)).collect()),
            64 => AtomicWords::U64((0..len).map(|_| AtomicU64::new(0)).collect()),
            _ => unreachable!("word width {bits}"),
        }
    }

    pub fn bits(&self) -> u32 {
        match self {
            AtomicWords::U8(_) => 8,
            AtomicWords::U16(_) => 16,
            AtomicWords::U32(_) => 32,
            AtomicWords::U64(_) => 64,
        }
    }

    pub fn len(&self) -> usize {
        dispatch!(self, c => c.len())
    }

    #[inline]
    pub fn load(&self, i: usize) -> u64 {
        dispatch!(self, c => c[i].load(Ordering::Relaxed) as u64)
    }

    #[inline]
    pub fn load_acquire(&self, i: usize) -> u64 {
        dispatch!(self, c => c[i].load(Ordering::Acquire) as u64)
    }

    #[inline]
    pub fn store(&self, i: usize, v: u64) {
        match self {
            AtomicWords::U8(c) => c[i].store(v as u8, Ordering::Relaxed),
            AtomicWords::U16(c) => c[i].store(v as u16, Ordering::Relaxed),
            AtomicWords::U32(c) => c[i].store(v as u32, Ordering::Relaxed),
            AtomicWords::U64(c) => c[i].store(v, Ordering::Relaxed),
        }
    }

    /// Single-word compare-exchange with acquire/release ordering.
    #[inline]
    pub fn compare_exchange(&self, i: usize, current: u64, new: u64) -> Result<u64, u64> {
        const S: Ordering = Ordering::AcqRel;
        const F: Ordering = Ordering::Acquire;
        match self {
            AtomicWords::U8(c) => c[i]
                .compare_exchange(current as u8, new as u8, S, F)
                .map(u64::from)
                .map_err(u64::from),
            AtomicWords::U16(c) => c[i]
                .compare_exchange(current as u16, new as u16, S, F)
                .map(u64::from)
                .map_err(u64::from),
            AtomicWords::U32(c) => c[i]
                .compare_exchange(current as u32, new as u32, S, F)
                .map(u64::from)
                .map_err(u64::from),
            AtomicWords::U64(c) => c[i].compare_exchange(current, new, S, F),
        }
    }

    pub fn size_bits(&self) -> u64 {
        self.len() as u64 * self.bits() as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn widths_truncate_and_cas() {
        for bits in [8, 16, 32, 64] {
            let w = AtomicWords::zeroed(bits, 4);
            assert_eq!(w.len(), 4);
            assert_eq!(w.size_bits(), 4 * bits as u64);
            w.store(1, 3);
            assert_eq!(w.load(1), 3);
            assert_eq!(w.compare_exchange(1, 3, 9), Ok(3));
            assert_eq!(w.compare_exchange(1, 3, 7), Err(9));
            assert_eq!(w.load_acquire(0), 0);
        }
    }
}
