//! Benchmark driver behind the `parfilter-bench` binary.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, ValueEnum};

use super::metrics::MetricsRecord;
use super::workload::{absent_keys, gen_keys, ur_count, uniform, Dist, WorkloadSpec};
use crate::error::{Error, Result};
use crate::gqf::{Gqf, QfParams};
use crate::parallel::map_ranges;
use crate::tcf::{Tcf, TcfParams};
use crate::tcf_bulk::{BulkTcf, BulkTcfParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FilterKind {
    Tcf,
    TcfBulk,
    Gqf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Api {
    Point,
    Bulk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Op {
    Insert,
    Query,
    Fpr,
    Delete,
    Count,
    FillToFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// One point insert per stream item.
    Naive,
    /// Collapse duplicates, then one bulk insert per distinct item.
    Mapreduce,
    /// Run both and report the map-reduce speedup.
    Both,
}

fn name<T: ValueEnum>(v: T) -> String {
    v.to_possible_value().map(|p| p.get_name().to_owned()).unwrap_or_default()
}

#[derive(Debug, Clone, Parser)]
#[command(name = "parfilter-bench", version, about = "Benchmarks and validates the filters")]
pub struct RunConfig {
    #[arg(long, value_enum, default_value_t = FilterKind::Tcf)]
    pub filter: FilterKind,
    /// Defaults to point for tcf and gqf, bulk for tcf-bulk.
    #[arg(long, value_enum)]
    pub api: Option<Api>,
    #[arg(long, value_enum, default_value_t = Op::Insert)]
    pub op: Op,
    #[arg(long, default_value_t = 20)]
    pub log_slots: u32,
    /// Target load factor.
    #[arg(long, default_value_t = 0.9)]
    pub load: f64,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long, value_enum, default_value_t = Dist::Uniform)]
    pub dist: Dist,
    #[arg(long, default_value_t = 1.5)]
    pub zipf_s: f64,
    #[arg(long)]
    pub kmer_file: Option<PathBuf>,
    #[arg(long, default_value_t = 28)]
    pub k: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Split bulk work into this many calls.
    #[arg(long, default_value_t = 1)]
    pub batches: usize,
    #[arg(long, value_enum, default_value_t = Mode::Naive)]
    pub mode: Mode,
    #[arg(long)]
    pub no_backing: bool,
    #[arg(long, default_value_t = 4)]
    pub group_width: usize,
    /// Append rows here instead of printing them.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Repetitions; the row reports the median time.
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    /// Negative queries for `--op fpr`.
    #[arg(long, default_value_t = 1_000_000)]
    pub queries: usize,
    /// Stream length, overriding the one derived from --load. For ur-count
    /// the stream has about n items over n/50 distinct keys.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub block_size: Option<usize>,
    #[arg(long)]
    pub tag_bits: Option<u32>,
    #[arg(long, default_value_t = 8)]
    pub remainder_bits: u32,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::parse_from(["parfilter-bench"])
    }
}

enum Built {
    Tcf(Tcf),
    Bulk(BulkTcf),
    Gqf(Gqf),
}

impl Built {
    fn capacity(&self) -> usize {
        match self {
            Built::Tcf(f) => f.capacity(),
            Built::Bulk(f) => f.capacity(),
            Built::Gqf(f) => f.num_slots(),
        }
    }

    fn contains(&self, key: u64) -> bool {
        match self {
            Built::Tcf(f) => f.contains(key),
            Built::Bulk(f) => f.contains(key),
            Built::Gqf(f) => f.contains(key),
        }
    }

    fn load_factor(&self) -> f64 {
        match self {
            Built::Tcf(f) => f.load_factor(),
            Built::Bulk(f) => f.load_factor(),
            Built::Gqf(f) => f.load_factor(),
        }
    }

    fn items(&self) -> u64 {
        match self {
            Built::Tcf(f) => f.len() as u64,
            Built::Bulk(f) => f.len() as u64,
            Built::Gqf(f) => f.len(),
        }
    }

    fn size_bits(&self) -> u64 {
        match self {
            Built::Tcf(f) => f.size_bits(),
            Built::Bulk(f) => f.size_bits(),
            Built::Gqf(f) => f.size_bits(),
        }
    }

    fn validate(&self) -> Result<()> {
        let r = match self {
            Built::Tcf(f) => f.validate(),
            Built::Bulk(f) => f.validate(),
            Built::Gqf(f) => f.validate(),
        };
        r.map_err(|e| match e {
            Error::Invariant(_) => e,
            other => Error::Invariant(other.to_string()),
        })
    }
}

/// Bits per item: whole-structure bits over items held.
fn bits_per_item(f: &Built) -> f64 {
    f.size_bits() as f64 / f.items().max(1) as f64
}

/// Fraction of `m` never-inserted keys that `contains` accepts.
pub fn measure_fpr(contains: &(dyn Fn(u64) -> bool + Sync), m: usize, seed: u64, threads: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let keys = absent_keys(m, seed);
    let hits: usize = map_ranges(m, threads, |r| keys[r].iter().filter(|&&k| contains(k)).count())
        .into_iter()
        .sum();
    hits as f64 / m as f64
}

/// Runs `f` over `threads` contiguous chunks; the first error wins.
fn par_each(keys: &[u64], threads: usize, f: impl Fn(u64) -> Result<()> + Sync) -> Result<()> {
    map_ranges(keys.len(), threads, |r| keys[r].iter().try_for_each(|&k| f(k)))
        .into_iter()
        .collect()
}

fn chunks(keys: &[u64], batches: usize) -> impl Iterator<Item = &[u64]> {
    keys.chunks(keys.len().div_ceil(batches).max(1))
}

impl RunConfig {
    fn api(&self) -> Api {
        self.api.unwrap_or(match self.filter {
            FilterKind::TcfBulk => Api::Bulk,
            _ => Api::Point,
        })
    }

    /// Bulk TCF is its own filter; `--filter tcf --api bulk` selects it.
    fn filter_kind(&self) -> FilterKind {
        match (self.filter, self.api()) {
            (FilterKind::Tcf, Api::Bulk) => FilterKind::TcfBulk,
            (k, _) => k,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::param(m));
        if !(self.load > 0.0 && self.load <= 1.0) {
            return err(format!("--load {} not in (0, 1]", self.load));
        }
        if self.threads == 0 || self.reps == 0 || self.batches == 0 {
            return err("--threads, --reps and --batches must be at least 1".into());
        }
        if self.filter == FilterKind::TcfBulk && self.api == Some(Api::Point) {
            return err("tcf-bulk has no point API".into());
        }
        if self.op == Op::Count && self.filter != FilterKind::Gqf {
            return err("--op count needs --filter gqf".into());
        }
        if self.filter == FilterKind::Gqf && self.op != Op::FillToFailure && self.load > 0.95 {
            return err(format!("--load {} exceeds the quotient filter's 0.95 limit", self.load));
        }
        if self.dist == Dist::Kmer && self.kmer_file.is_none() {
            return err("--dist kmer needs --kmer-file".into());
        }
        if self.log_slots > 32 {
            return err(format!("--log-slots {} too large", self.log_slots));
        }
        // Surface construction errors before any work.
        self.build().map(|_| ())
    }

    fn build(&self) -> Result<Built> {
        let seed = self.seed;
        Ok(match self.filter_kind() {
            FilterKind::Tcf => {
                let mut p = TcfParams {
                    seed,
                    group_width: self.group_width,
                    ..TcfParams::default()
                };
                if let Some(b) = self.block_size {
                    p.block_size = b;
                }
                if let Some(t) = self.tag_bits {
                    p.tag_bits = t;
                    p.slot_bits = p.slot_bits.max(t.next_power_of_two().max(8));
                }
                p.num_blocks = crate::tcf::blocks_for(self.log_slots, p.block_size)?;
                if self.no_backing {
                    p.backing_ratio = 0.0;
                }
                Built::Tcf(Tcf::new(p)?)
            }
            FilterKind::TcfBulk => {
                let mut p = BulkTcfParams {
                    seed,
                    ..BulkTcfParams::default()
                };
                if let Some(b) = self.block_size {
                    p.block_size = b;
                }
                if let Some(t) = self.tag_bits {
                    p.tag_bits = t;
                    p.slot_bits = p.slot_bits.max(t.next_power_of_two().max(8));
                }
                p.num_blocks = crate::tcf::blocks_for(self.log_slots, p.block_size)?;
                if self.no_backing {
                    p.backing_ratio = 0.0;
                }
                Built::Bulk(BulkTcf::new(p)?)
            }
            FilterKind::Gqf => Built::Gqf(Gqf::new(QfParams {
                quotient_bits: self.log_slots,
                remainder_bits: self.remainder_bits,
                max_load: 0.95,
                seed,
            })?),
        })
    }

    fn keys(&self, capacity: usize) -> Result<Vec<u64>> {
        let target = self.n.unwrap_or((self.load * capacity as f64).round() as usize);
        let seed = self.seed;
        match self.dist {
            Dist::UrCount => Ok(ur_count((target / 50).max(1), 100, seed)?.0),
            dist => {
                let mut spec = WorkloadSpec::new(dist, target, seed);
                spec.zipf_s = self.zipf_s;
                spec.kmer_k = self.k;
                spec.kmer_file = self.kmer_file.clone();
                if dist == Dist::Kmer && self.n.is_none() {
                    spec.n = 0;
                }
                gen_keys(&spec)
            }
        }
    }
}

fn insert_all(f: &mut Built, keys: &[u64], cfg: &RunConfig) -> Result<()> {
    let threads = cfg.threads;
    match f {
        Built::Tcf(t) => par_each(keys, threads, |k| t.insert(k, 0).map(|_| ())),
        Built::Bulk(b) => {
            for c in chunks(keys, cfg.batches) {
                b.bulk_insert(c, threads).check()?;
            }
            Ok(())
        }
        Built::Gqf(g) => match cfg.api() {
            Api::Point => par_each(keys, threads, |k| g.insert(k, 1)),
            Api::Bulk => {
                for c in chunks(keys, cfg.batches) {
                    g.bulk_insert(c, threads)?;
                }
                Ok(())
            }
        },
    }
}

fn delete_all(f: &mut Built, keys: &[u64], cfg: &RunConfig) -> Result<()> {
    let threads = cfg.threads;
    match f {
        Built::Tcf(t) => par_each(keys, threads, |k| {
            t.remove(k);
            Ok(())
        }),
        Built::Bulk(b) => {
            for c in chunks(keys, cfg.batches) {
                b.bulk_delete(c);
            }
            Ok(())
        }
        Built::Gqf(g) => match cfg.api() {
            Api::Point => par_each(keys, threads, |k| g.delete(k, 1).map(|_| ())),
            Api::Bulk => {
                for c in chunks(keys, cfg.batches) {
                    g.bulk_delete(c, threads)?;
                }
                Ok(())
            }
        },
    }
}

/// Inserts one key (or one small batch) at a time until the first capacity
/// error; returns the load factor reached.
fn fill_to_failure(f: &mut Built, cfg: &RunConfig) -> Result<usize> {
    let cap = f.capacity();
    let keys = uniform(cap * 2, cfg.seed);
    let mut done = 0;
    match f {
        Built::Tcf(t) => {
            for &k in &keys {
                match t.insert(k, 0) {
                    Ok(_) => done += 1,
                    Err(e) if e.is_capacity() => break,
                    Err(e) => return Err(e),
                }
            }
        }
        Built::Bulk(b) => {
            for c in keys.chunks((cap / 100).max(1)) {
                let s = b.bulk_insert(c, cfg.threads);
                done += s.direct + s.potc + s.backing;
                if s.failed > 0 {
                    break;
                }
            }
        }
        Built::Gqf(g) => {
            for &k in &keys {
                match g.insert(k, 1) {
                    Ok(()) => done += 1,
                    Err(e) if e.is_capacity() => break,
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok(done)
}

fn count_items(g: &mut Gqf, keys: &[u64], cfg: &RunConfig, mapreduce: bool) -> Result<()> {
    if mapreduce {
        for c in chunks(keys, cfg.batches) {
            g.bulk_count(c, cfg.threads)?;
        }
        Ok(())
    } else {
        par_each(keys, cfg.threads, |k| g.insert(k, 1))
    }
}

struct Sample {
    seconds: f64,
    ops: usize,
    fpr: Option<f64>,
    load: f64,
    bpi: f64,
    items: u64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// One repetition of `op` on a fresh filter, followed by validation.
fn one_rep(cfg: &RunConfig, op: Op, mapreduce: bool) -> Result<Sample> {
    let mut f = cfg.build()?;
    let keys = if op == Op::FillToFailure { Vec::new() } else { cfg.keys(f.capacity())? };
    let start;
    let mut ops = keys.len();
    let mut fpr = None;
    match op {
        Op::Insert => {
            start = Instant::now();
            insert_all(&mut f, &keys, cfg)?;
        }
        Op::Query => {
            insert_all(&mut f, &keys, cfg)?;
            start = Instant::now();
            let found: usize = map_ranges(keys.len(), cfg.threads, |r| {
                keys[r].iter().filter(|&&k| f.contains(k)).count()
            })
            .into_iter()
            .sum();
            if found != keys.len() {
                return Err(Error::Invariant(format!(
                    "{} of {} inserted keys not found",
                    keys.len() - found,
                    keys.len()
                )));
            }
        }
        Op::Fpr => {
            insert_all(&mut f, &keys, cfg)?;
            ops = cfg.queries;
            start = Instant::now();
            let fc = &f;
            fpr = Some(measure_fpr(&|k| fc.contains(k), cfg.queries, cfg.seed, cfg.threads));
        }
        Op::Delete => {
            insert_all(&mut f, &keys, cfg)?;
            start = Instant::now();
            delete_all(&mut f, &keys, cfg)?;
        }
        Op::Count => {
            let Built::Gqf(g) = &mut f else {
                return Err(Error::param("--op count needs --filter gqf"));
            };
            start = Instant::now();
            count_items(g, &keys, cfg, mapreduce)?;
        }
        Op::FillToFailure => {
            start = Instant::now();
            ops = fill_to_failure(&mut f, cfg)?;
        }
    }
    let seconds = start.elapsed().as_secs_f64();
    f.validate()?;
    Ok(Sample {
        seconds,
        ops,
        fpr,
        load: f.load_factor(),
        bpi: bits_per_item(&f),
        items: f.items(),
    })
}

fn summarize(cfg: &RunConfig, mode: &str, samples: Vec<Sample>) -> MetricsRecord {
    let wall = median(samples.iter().map(|s| s.seconds).collect());
    let last = samples.last().expect("at least one repetition");
    MetricsRecord {
        filter: name(cfg.filter_kind()),
        api: name(cfg.api()),
        op: name(cfg.op),
        mode: mode.to_owned(),
        log_slots: cfg.log_slots,
        load_factor: last.load,
        threads: cfg.threads,
        dist: cfg.dist.name().to_owned(),
        seed: cfg.seed,
        items: last.items,
        wall_seconds: wall,
        ops_per_sec: if wall > 0.0 { last.ops as f64 / wall } else { f64::INFINITY },
        fpr: last.fpr,
        bits_per_item: last.bpi,
        speedup: None,
    }
}

fn repeat(cfg: &RunConfig, label: &str, mapreduce: bool) -> Result<Vec<Sample>> {
    (0..cfg.reps)
        .map(|i| {
            let s = one_rep(cfg, cfg.op, mapreduce)?;
            eprintln!(
                "{label} rep {}/{}: {:.4} s, {} ops, load {:.4}",
                i + 1,
                cfg.reps,
                s.seconds,
                s.ops,
                s.load
            );
            Ok(s)
        })
        .collect()
}

/// Runs the configured benchmark and returns its CSV rows.
pub fn run(cfg: &RunConfig) -> Result<Vec<MetricsRecord>> {
    cfg.validate()?;
    if cfg.op != Op::Count {
        let samples = repeat(cfg, &name(cfg.op), false)?;
        return Ok(vec![summarize(cfg, "", samples)]);
    }
    let mut rows = Vec::new();
    let naive = matches!(cfg.mode, Mode::Naive | Mode::Both)
        .then(|| repeat(cfg, "naive", false))
        .transpose()?
        .map(|s| summarize(cfg, "naive", s));
    let mr = matches!(cfg.mode, Mode::Mapreduce | Mode::Both)
        .then(|| repeat(cfg, "mapreduce", true))
        .transpose()?
        .map(|s| summarize(cfg, "mapreduce", s));
    match (naive, mr) {
        (Some(n), Some(mut m)) => {
            m.speedup = Some(n.wall_seconds / m.wall_seconds);
            rows.push(n);
            rows.push(m);
        }
        (n, m) => rows.extend(n.into_iter().chain(m)),
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(args: &[&str]) -> RunConfig {
        let mut v = vec!["parfilter-bench", "--reps", "1"];
        v.extend_from_slice(args);
        RunConfig::try_parse_from(v).unwrap()
    }

    #[test]
    fn tcf_insert_smoke() {
        let rows = run(&cfg(&["--filter", "tcf", "--log-slots", "14", "--load", "0.9", "--op", "insert"])).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].fpr, None);
        assert!((rows[0].load_factor - 0.9).abs() < 0.01);
    }

    #[test]
    fn fpr_rows_carry_fpr() {
        for filter in ["tcf", "tcf-bulk", "gqf"] {
            let rows = run(&cfg(&[
                "--filter", filter, "--log-slots", "14", "--load", "0.8", "--op", "fpr", "--queries", "10000",
            ]))
            .unwrap();
            assert!(rows[0].fpr.is_some(), "{filter}");
        }
    }

    #[test]
    fn count_both_reports_speedup() {
        let rows = run(&cfg(&[
            "--filter", "gqf", "--log-slots", "14", "--op", "count", "--dist", "zipf", "--mode", "both", "--n", "20000",
        ]))
        .unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[1].speedup.is_some());
        assert_eq!(rows[0].items, 20_000);
    }

    #[test]
    fn every_op_validates() {
        for filter in ["tcf", "tcf-bulk", "gqf"] {
            for op in ["insert", "query", "delete", "fill-to-failure"] {
                run(&cfg(&["--filter", filter, "--log-slots", "12", "--load", "0.5", "--op", op, "--threads", "2"]))
                    .unwrap_or_else(|e| panic!("{filter} {op}: {e}"));
            }
        }
        run(&cfg(&["--filter", "gqf", "--api", "bulk", "--log-slots", "14", "--op", "delete"])).unwrap();
    }

    #[test]
    fn parameter_errors() {
        for args in [
            &["--load", "1.5"][..],
            &["--filter", "tcf", "--op", "count"],
            &["--filter", "gqf", "--load", "0.97"],
            &["--dist", "kmer"],
            &["--filter", "tcf-bulk", "--api", "point"],
            &["--block-size", "64", "--tag-bits", "32"],
        ] {
            assert!(matches!(run(&cfg(args)), Err(Error::InvalidParameter(_))), "{args:?}");
        }
    }
}
