//! Reuse-distance analysis of member-access traces.
//!
//! A trace is a sequence of ensemble-member indices in the order the training
//! phase touched them. The reuse distance of an access is the number of
//! distinct members touched since the previous access to the same member,
//! counting the member itself, so a finite distance always lies in [1, m].
//! First accesses are infinite. Mini-batching concentrates accesses per
//! member, pushing the distance distribution toward 1; the closed-form bound
//! for a fully trained run is ceil(n/b) * m * (m+b-1).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, weight_stream_id, RngStream};

/// A sequence of member accesses; identifiers lie in `[0, n_data)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessTrace {
    n_data: usize,
    events: Vec<u32>,
}

impl AccessTrace {
    pub fn new(n_data: usize, events: Vec<u32>) -> Result<Self> {
        if n_data == 0 {
            return Err(Error::domain("a trace needs at least one datum"));
        }
        if let Some(&bad) = events.iter().find(|&&e| e as usize >= n_data) {
            return Err(Error::domain(format!("trace event {bad} out of range for {n_data} data")));
        }
        Ok(AccessTrace { n_data, events })
    }

    pub fn empty(n_data: usize) -> Self {
        AccessTrace { n_data, events: Vec::new() }
    }

    pub fn push(&mut self, id: u32) {
        debug_assert!((id as usize) < self.n_data);
        self.events.push(id);
    }

    pub fn events(&self) -> &[u32] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Number of distinct data the trace may reference (m).
    pub fn n_data(&self) -> usize {
        self.n_data
    }

    /// Newline-delimited member indices.
    pub fn write_flat<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        for &e in &self.events {
            writeln!(w, "{e}")?;
        }
        Ok(())
    }
}

/// One reuse distance: finite in [1, m], or infinite on first access.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rd {
    Finite(u64),
    Infinite,
}

impl Rd {
    pub fn finite(self) -> Option<u64> {
        match self {
            Rd::Finite(d) => Some(d),
            Rd::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Rd::Infinite)
    }

    /// The distance with infinity mapped to `infinity_as`.
    pub fn or(self, infinity_as: u64) -> u64 {
        match self {
            Rd::Finite(d) => d,
            Rd::Infinite => infinity_as,
        }
    }
}

/// Order-statistic tree over trace positions: marks each datum's most recent
/// access so a range count yields the number of distinct data in an interval.
struct Fenwick {
    tree: Vec<i64>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Fenwick { tree: vec![0; n + 1] }
    }

    fn add(&mut self, index: usize, delta: i64) {
        let mut i = index + 1;
        while i < self.tree.len() {
            self.tree[i] += delta;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum over positions [0, index].
    fn prefix(&self, index: usize) -> i64 {
        let mut i = index + 1;
        let mut sum = 0;
        while i > 0 {
            sum += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        sum
    }
}

/// Reuse distance of every access, in O(n log n).
pub fn reuse_distance_sequence(trace: &AccessTrace) -> Vec<Rd> {
    let mut last = vec![usize::MAX; trace.n_data];
    let mut marks = Fenwick::new(trace.len());
    let mut out = Vec::with_capacity(trace.len());
    for (t, &d) in trace.events.iter().enumerate() {
        let p = last[d as usize];
        if p == usize::MAX {
            out.push(Rd::Infinite);
        } else {
            let upto = marks.prefix(t - 1);
            let before = if p == 0 { 0 } else { marks.prefix(p - 1) };
            out.push(Rd::Finite((upto - before) as u64));
            marks.add(p, -1);
        }
        marks.add(t, 1);
        last[d as usize] = t;
    }
    out
}

/// Sum of the reuse distances with infinities mapped to `infinity_as`
/// (conventionally m, a cold access costing one full sweep).
pub fn rd_total(trace: &AccessTrace, infinity_as: u64) -> Result<u64> {
    if infinity_as == 0 {
        return Err(Error::domain("infinity_as must be >= 1"));
    }
    Ok(reuse_distance_sequence(trace).iter().map(|rd| rd.or(infinity_as)).sum())
}

/// Closed-form total reuse distance of a fully trained mini-batch run:
/// every complete batch contributes m*(m+b-1) and a final partial batch of r
/// instances contributes m*(m+r-1).
pub fn rd_bound_minibatch(n: u64, m: u64, b: u64) -> Result<u64> {
    if n == 0 || m == 0 || b == 0 {
        return Err(Error::domain("rd_bound_minibatch requires n, m, b >= 1"));
    }
    let full = n / b;
    let rest = n % b;
    let mut total = full * m * (m + b - 1);
    if rest > 0 {
        total += m * (m + rest - 1);
    }
    Ok(total)
}

/// Histogram bin edges: ascending, non-overlapping, inclusive ranges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RdBins {
    edges: Vec<(u64, u64)>,
}

impl RdBins {
    pub fn new(edges: Vec<(u64, u64)>) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::domain("histogram needs at least one bin"));
        }
        let mut prev_hi = 0u64;
        for &(lo, hi) in &edges {
            if lo == 0 || hi < lo {
                return Err(Error::domain(format!("bad bin [{lo}, {hi}]")));
            }
            if lo <= prev_hi {
                return Err(Error::domain(format!("bin [{lo}, {hi}] overlaps its predecessor")));
            }
            prev_hi = hi;
        }
        Ok(RdBins { edges })
    }

    /// Contiguous width-10 bins [1,10], [11,20], ... covering [1, max].
    pub fn decades(max: u64) -> Result<Self> {
        if max == 0 {
            return Err(Error::domain("decade bins need max >= 1"));
        }
        let mut edges = Vec::new();
        let mut lo = 1;
        while lo <= max {
            edges.push((lo, (lo + 9).min(max)));
            lo += 10;
        }
        RdBins::new(edges)
    }

    /// Log-scale bins {1}, (1,10], (10,100], ... covering [1, max].
    pub fn log_scale(max: u64) -> Result<Self> {
        if max == 0 {
            return Err(Error::domain("log-scale bins need max >= 1"));
        }
        let mut edges = vec![(1, 1)];
        let mut lo = 2u64;
        let mut hi = 10u64;
        while lo <= max {
            edges.push((lo, hi.min(max)));
            lo = hi + 1;
            hi = hi.saturating_mul(10);
        }
        RdBins::new(edges)
    }

    pub fn edges(&self) -> &[(u64, u64)] {
        &self.edges
    }

    fn index_of(&self, d: u64) -> Option<usize> {
        self.edges.iter().position(|&(lo, hi)| lo <= d && d <= hi)
    }
}

/// Binned reuse-distance counts; infinite distances are tracked separately so
/// finite counts plus the infinite count always equal the trace length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdHistogram {
    bins: RdBins,
    counts: Vec<u64>,
    infinite: u64,
}

impl RdHistogram {
    pub fn bins(&self) -> &RdBins {
        &self.bins
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn infinite(&self) -> u64 {
        self.infinite
    }

    pub fn finite_total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.finite_total() + self.infinite
    }

    /// Fraction of finite distances falling in [lo, hi], which must align with
    /// whole bins. Zero when the histogram holds no finite distances.
    pub fn fraction_in(&self, lo: u64, hi: u64) -> Result<f64> {
        let mut covered = 0u64;
        let mut matched_lo = false;
        let mut matched_hi = false;
        for (&(blo, bhi), &count) in self.bins.edges.iter().zip(&self.counts) {
            if blo >= lo && bhi <= hi {
                covered += count;
                matched_lo |= blo == lo;
                matched_hi |= bhi == hi;
            } else if bhi >= lo && blo <= hi {
                return Err(Error::domain(format!(
                    "range [{lo}, {hi}] cuts across bin [{blo}, {bhi}]"
                )));
            }
        }
        if !(matched_lo && matched_hi) {
            return Err(Error::domain(format!("range [{lo}, {hi}] does not align with the bins")));
        }
        let finite = self.finite_total();
        if finite == 0 {
            return Ok(0.0);
        }
        Ok(covered as f64 / finite as f64)
    }

    /// CSV rows (bin_lo, bin_hi, count, fraction of all accesses), with the
    /// infinite count as a final `inf` row.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "bin_lo,bin_hi,count,fraction")?;
        let total = self.total().max(1) as f64;
        for (&(lo, hi), &count) in self.bins.edges.iter().zip(&self.counts) {
            writeln!(w, "{lo},{hi},{count},{}", count as f64 / total)?;
        }
        writeln!(w, "inf,inf,{},{}", self.infinite, self.infinite as f64 / total)?;
        Ok(())
    }
}

/// Bins the trace's reuse distances. Every finite distance must be covered.
pub fn rd_histogram(trace: &AccessTrace, bins: &RdBins) -> Result<RdHistogram> {
    let mut counts = vec![0u64; bins.edges.len()];
    let mut infinite = 0u64;
    for rd in reuse_distance_sequence(trace) {
        match rd {
            Rd::Infinite => infinite += 1,
            Rd::Finite(d) => match bins.index_of(d) {
                Some(i) => counts[i] += 1,
                None => {
                    return Err(Error::domain(format!("reuse distance {d} not covered by bins")))
                }
            },
        }
    }
    Ok(RdHistogram { bins: bins.clone(), counts, infinite })
}

/// The idealized trace of a fully trained mini-batch run: per batch, each
/// member in index order sweeps the whole batch.
pub fn full_training_trace(n: u64, m: usize, b: u64) -> Result<AccessTrace> {
    if n == 0 || m == 0 || b == 0 {
        return Err(Error::domain("full_training_trace requires n, m, b >= 1"));
    }
    let mut trace = AccessTrace::empty(m);
    let mut start = 0u64;
    while start < n {
        let size = b.min(n - start);
        for member in 0..m as u32 {
            for _ in 0..size {
                trace.push(member);
            }
        }
        start += size;
    }
    Ok(trace)
}

/// The trace a real run would record: per batch and member, only instances
/// whose Poisson draw is positive appear. Draws come from the same per-member
/// substreams an ensemble with this seed would consume.
pub fn poisson_skip_trace(n: u64, m: usize, b: u64, lambda: f64, seed: u64) -> Result<AccessTrace> {
    if n == 0 || m == 0 || b == 0 {
        return Err(Error::domain("poisson_skip_trace requires n, m, b >= 1"));
    }
    let mut streams: Vec<RngStream> =
        (0..m).map(|i| RngStream::new(seed, weight_stream_id(i))).collect();
    let mut trace = AccessTrace::empty(m);
    let mut start = 0u64;
    while start < n {
        let size = b.min(n - start);
        for (member, stream) in streams.iter_mut().enumerate() {
            for _ in 0..size {
                if rng::poisson(stream, lambda)? > 0 {
                    trace.push(member as u32);
                }
            }
        }
        start += size;
    }
    Ok(trace)
}

/// One member access enriched with its worker and instance, the unit of the
/// per-run instrumentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub worker: u32,
    pub member: u32,
    pub instance: u64,
}

/// Instrumentation output of one run: records in coordinator (logical) order,
/// from which the merged trace and per-worker sub-traces are derived.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    n_members: usize,
    n_workers: usize,
    records: Vec<TraceRecord>,
}

impl RunTrace {
    pub fn new(n_members: usize, n_workers: usize) -> Self {
        RunTrace { n_members, n_workers, records: Vec::new() }
    }

    pub fn push(&mut self, record: TraceRecord) {
        debug_assert!((record.member as usize) < self.n_members);
        debug_assert!((record.worker as usize) < self.n_workers);
        self.records.push(record);
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn n_members(&self) -> usize {
        self.n_members
    }

    pub fn n_workers(&self) -> usize {
        self.n_workers
    }

    /// The merged logical trace, ordered by the coordinator's trace clock.
    pub fn logical_trace(&self) -> AccessTrace {
        let mut trace = AccessTrace::empty(self.n_members);
        for r in &self.records {
            trace.push(r.member);
        }
        trace
    }

    /// One worker's sub-trace, in that worker's execution order.
    pub fn worker_trace(&self, worker: usize) -> AccessTrace {
        let mut trace = AccessTrace::empty(self.n_members);
        for r in self.records.iter().filter(|r| r.worker as usize == worker) {
            trace.push(r.member);
        }
        trace
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "worker_id,member_id,instance_index")?;
        for r in &self.records {
            writeln!(w, "{},{},{}", r.worker, r.member, r.instance)?;
        }
        Ok(())
    }
}
