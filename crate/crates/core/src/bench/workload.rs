//! Reproducible key streams.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Zipf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Dist {
    Uniform,
    UrCount,
    Zipf,
    Kmer,
}

impl Dist {
    pub fn name(self) -> &'static str {
        match self {
            Dist::Uniform => "uniform",
            Dist::UrCount => "ur-count",
            Dist::Zipf => "zipf",
            Dist::Kmer => "kmer",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadSpec {
    pub dist: Dist,
    /// Stream length; for `UrCount`, the number of distinct bases.
    pub n: usize,
    pub seed: u64,
    pub zipf_s: f64,
    pub count_max: u64,
    pub kmer_k: usize,
    pub kmer_file: Option<PathBuf>,
    /// Zipf universe; defaults to `n`.
    pub universe: Option<u64>,
}

impl WorkloadSpec {
    pub fn new(dist: Dist, n: usize, seed: u64) -> Self {
        WorkloadSpec {
            dist,
            n,
            seed,
            zipf_s: 1.5,
            count_max: 100,
            kmer_k: 28,
            kmer_file: None,
            universe: None,
        }
    }
}

pub fn gen_keys(spec: &WorkloadSpec) -> Result<Vec<u64>> {
    match spec.dist {
        Dist::Uniform => Ok(uniform(spec.n, spec.seed)),
        Dist::UrCount => Ok(ur_count(spec.n, spec.count_max, spec.seed)?.0),
        Dist::Zipf => zipf(spec.n, spec.universe.unwrap_or(spec.n as u64), spec.zipf_s, spec.seed),
        Dist::Kmer => {
            let path = spec
                .kmer_file
                .as_deref()
                .ok_or_else(|| Error::param("the kmer distribution needs --kmer-file"))?;
            let mut keys = kmers_from_file(path, spec.kmer_k)?;
            if spec.n > 0 {
                keys.truncate(spec.n);
            }
            Ok(keys)
        }
    }
}

/// `n` random 64-bit keys (distinct with high probability).
pub fn uniform(n: usize, seed: u64) -> Vec<u64> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..n).map(|_| rng.random()).collect()
}

/// Keys from a stream that shares nothing with [`uniform`] for the same
/// seed; used as negatives when measuring false positives.
pub fn absent_keys(n: usize, seed: u64) -> Vec<u64> {
    uniform(n, seed ^ 0x6a09_e667_f3bc_c908)
}

/// `bases` distinct keys, each repeated Uniform{1..=count_max} times, shuffled.
/// Also returns the true (key, count) pairs.
pub fn ur_count(bases: usize, count_max: u64, seed: u64) -> Result<(Vec<u64>, Vec<(u64, u64)>)> {
    if count_max == 0 {
        return Err(Error::param("count_max must be at least 1"));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let mut truth = Vec::with_capacity(bases);
    let mut seen = std::collections::HashSet::with_capacity(bases);
    while truth.len() < bases {
        let k: u64 = rng.random();
        if seen.insert(k) {
            truth.push((k, rng.random_range(1..=count_max)));
        }
    }
    let mut stream: Vec<u64> = truth
        .iter()
        .flat_map(|&(k, c)| std::iter::repeat_n(k, c as usize))
        .collect();
    stream.shuffle(&mut rng);
    Ok((stream, truth))
}

/// `n` ranks in `1..=universe` with P(i) proportional to i^-s. The rank is
/// the key; filters hash it anyway.
pub fn zipf(n: usize, universe: u64, s: f64, seed: u64) -> Result<Vec<u64>> {
    let dist = Zipf::new(universe as f64, s)
        .map_err(|e| Error::param(format!("zipf(universe {universe}, s {s}): {e}")))?;
    let mut rng = StdRng::seed_from_u64(seed);
    Ok((0..n).map(|_| dist.sample(&mut rng) as u64).collect())
}

fn base_code(b: u8) -> Option<u64> {
    match b {
        b'A' | b'a' => Some(0),
        b'C' | b'c' => Some(1),
        b'G' | b'g' => Some(2),
        b'T' | b't' => Some(3),
        _ => None,
    }
}

/// Every k-length window of every read, 2-bit encoded. Windows containing
/// a non-ACGT base are skipped.
pub fn kmers_of_read(read: &[u8], k: usize, out: &mut Vec<u64>) {
    let mask = if k == 32 { u64::MAX } else { (1u64 << (2 * k)) - 1 };
    let mut acc = 0u64;
    let mut valid = 0;
    for &b in read {
        match base_code(b) {
            Some(c) => {
                acc = ((acc << 2) | c) & mask;
                valid += 1;
                if valid >= k {
                    out.push(acc);
                }
            }
            None => valid = 0,
        }
    }
}

/// Reads from FASTA (`>` headers, possibly wrapped sequence lines) or FASTQ
/// (`@` header, sequence, `+` line, quality line).
pub fn read_sequences(reader: impl BufRead) -> Result<Vec<Vec<u8>>> {
    let mut reads = Vec::new();
    let mut current: Option<Vec<u8>> = None;
    let mut lines = reader.lines();
    while let Some(line) = lines.next() {
        let line = line.map_err(|e| Error::Input(e.to_string()))?;
        let line = line.trim_end();
        if line.starts_with('@') {
            reads.extend(current.take());
            let seq = lines
                .next()
                .transpose()
                .map_err(|e| Error::Input(e.to_string()))?
                .ok_or_else(|| Error::Input("FASTQ record without a sequence line".into()))?;
            reads.push(seq.trim_end().as_bytes().to_vec());
            // '+' separator and quality line
            for _ in 0..2 {
                lines.next().transpose().map_err(|e| Error::Input(e.to_string()))?;
            }
        } else if line.starts_with('>') {
            reads.extend(current.take());
            current = Some(Vec::new());
        } else if !line.is_empty() {
            current.get_or_insert_with(Vec::new).extend_from_slice(line.as_bytes());
        }
    }
    reads.extend(current);
    Ok(reads)
}

pub fn kmers_from_reader(reader: impl BufRead, k: usize) -> Result<Vec<u64>> {
    if !(1..=32).contains(&k) {
        return Err(Error::param(format!("k = {k} not in 1..=32")));
    }
    let reads = read_sequences(reader)?;
    let longest = reads.iter().map(Vec::len).max().unwrap_or(0);
    if k > longest {
        return Err(Error::Input(format!("k = {k} exceeds the longest read ({longest} bases)")));
    }
    let mut out = Vec::new();
    for r in &reads {
        kmers_of_read(r, k, &mut out);
    }
    Ok(out)
}

pub fn kmers_from_file(path: &Path, k: usize) -> Result<Vec<u64>> {
    let f = File::open(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    kmers_from_reader(BufReader::new(f), k)
}
