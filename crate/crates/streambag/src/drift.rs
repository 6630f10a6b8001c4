//! ADWIN adaptive-windowing change detector.
//!
//! The window is kept as an exponential histogram: row `r` holds buckets that
//! each summarize `2^r` items (sum and internal variance), at most five buckets
//! per row. Every add checks all bucket boundaries as candidate cuts, oldest
//! first; when two sub-windows differ by more than the Bernstein-style bound
//! `eps_cut`, the oldest bucket is dropped and the scan repeats. The estimate
//! is always the exact mean of the retained window, since buckets store exact
//! sums.

use std::collections::VecDeque;

use crate::error::{Error, Result};

const MAX_BUCKETS_PER_ROW: usize = 5;
const MIN_SUB_WINDOW: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Bucket {
    total: f64,
    variance: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
struct Row {
    buckets: VecDeque<Bucket>,
}

/// Change detector over a stream of values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Adwin {
    delta: f64,
    rows: Vec<Row>,
    total: f64,
    variance_sum: f64,
    width: u64,
    detections: u64,
}

impl Adwin {
    /// `delta` is the detection confidence; smaller values detect more
    /// conservatively. 0.002 is the customary default.
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::domain(format!("adwin delta must lie in (0, 1), got {delta}")));
        }
        Ok(Adwin {
            delta,
            rows: vec![Row::default()],
            total: 0.0,
            variance_sum: 0.0,
            width: 0,
            detections: 0,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Mean of the currently retained window (0 when empty).
    pub fn estimate(&self) -> f64 {
        if self.width == 0 {
            0.0
        } else {
            self.total / self.width as f64
        }
    }

    /// Number of items currently retained.
    pub fn width(&self) -> u64 {
        self.width
    }

    /// Cumulative number of change detections.
    pub fn detections(&self) -> u64 {
        self.detections
    }

    /// Adds one value and reports whether a distribution change was detected
    /// (in which case the window has already shrunk to the recent regime).
    pub fn add(&mut self, value: f64) -> Result<bool> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::domain(format!("adwin values must lie in [0, 1], got {value}")));
        }
        self.insert(value);
        let mut shrunk = false;
        while self.find_cut() {
            self.drop_oldest_bucket();
            shrunk = true;
        }
        if shrunk {
            self.detections += 1;
        }
        Ok(shrunk)
    }

    fn insert(&mut self, value: f64) {
        self.width += 1;
        if self.width > 1 {
            let prev_width = (self.width - 1) as f64;
            let dev = value - self.total / prev_width;
            self.variance_sum += prev_width * dev * dev / self.width as f64;
        }
        self.total += value;
        self.rows[0].buckets.push_back(Bucket { total: value, variance: 0.0 });
        self.compress();
    }

    /// Cascades overfull rows: the two oldest buckets of a full row merge into
    /// one bucket of the next row, accumulating the between-bucket variance.
    fn compress(&mut self) {
        let mut r = 0;
        while r < self.rows.len() {
            if self.rows[r].buckets.len() <= MAX_BUCKETS_PER_ROW {
                break;
            }
            if r + 1 == self.rows.len() {
                self.rows.push(Row::default());
            }
            let b1 = self.rows[r].buckets.pop_front().unwrap();
            let b2 = self.rows[r].buckets.pop_front().unwrap();
            let n = (1u64 << r) as f64;
            let (u1, u2) = (b1.total / n, b2.total / n);
            let merged = Bucket {
                total: b1.total + b2.total,
                variance: b1.variance + b2.variance + n * n * (u1 - u2) * (u1 - u2) / (n + n),
            };
            self.rows[r + 1].buckets.push_back(merged);
            r += 1;
        }
    }

    fn drop_oldest_bucket(&mut self) {
        let Some(r) = self.rows.iter().rposition(|row| !row.buckets.is_empty()) else {
            return;
        };
        let bucket = self.rows[r].buckets.pop_front().unwrap();
        let n1 = (1u64 << r) as f64;
        self.width -= 1u64 << r;
        self.total -= bucket.total;
        if self.width > 0 {
            let u1 = bucket.total / n1;
            let rest = self.width as f64;
            let dev = u1 - self.total / rest;
            self.variance_sum -= bucket.variance + n1 * rest * dev * dev / (n1 + rest);
            self.variance_sum = self.variance_sum.max(0.0);
        } else {
            self.variance_sum = 0.0;
        }
        while self.rows.len() > 1 && self.rows.last().is_some_and(|row| row.buckets.is_empty()) {
            self.rows.pop();
        }
    }

    /// Scans bucket boundaries oldest-first for a sub-window pair whose means
    /// differ by more than eps_cut.
    fn find_cut(&self) -> bool {
        let n = self.width as f64;
        if n < 2.0 * MIN_SUB_WINDOW {
            return false;
        }
        let dd = (2.0 * n.ln() / self.delta).ln();
        let v = self.variance_sum / n;
        let mut n0 = 0.0;
        let mut u0 = 0.0;
        for r in (0..self.rows.len()).rev() {
            let sz = (1u64 << r) as f64;
            for bucket in &self.rows[r].buckets {
                n0 += sz;
                u0 += bucket.total;
                let n1 = n - n0;
                if n1 < MIN_SUB_WINDOW {
                    return false;
                }
                if n0 < MIN_SUB_WINDOW {
                    continue;
                }
                let u1 = self.total - u0;
                let m = 1.0 / (n0 - MIN_SUB_WINDOW + 1.0) + 1.0 / (n1 - MIN_SUB_WINDOW + 1.0);
                let eps = (2.0 * m * v * dd).sqrt() + 2.0 / 3.0 * dd * m;
                if (u0 / n0 - u1 / n1).abs() >= eps {
                    return true;
                }
            }
        }
        false
    }
}
