//! Histogram data for separation-value distributions.
//!
//! Bins are aligned to multiples of the bin width and cover the data
//! range contiguously, including empty interior bins. Counts are split
//! by the correctness flag so plots can color the two series; the
//! overall mean is emitted as a marker value.

use serde::{Deserialize, Serialize};

use crate::metrics::SeparationRecord;

/// One half-open bin `[lo, hi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistBin {
    pub lo: f64,
    pub hi: f64,
    pub correct: usize,
    pub incorrect: usize,
}

impl HistBin {
    pub fn total(&self) -> usize {
        self.correct + self.incorrect
    }
}

/// Plot-ready histogram of separation values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub measure: String,
    pub bin_width: f64,
    pub bins: Vec<HistBin>,
    /// Arithmetic mean of all d-values (the dashed-line marker).
    pub mean: f64,
    pub total: usize,
}

/// Bins records by d-value into width-`bin_width` bins aligned to
/// multiples of the width, splitting counts by correctness.
///
/// # Panics
///
/// Panics when `records` is empty or `bin_width <= 0`.
pub fn histogram(records: &[SeparationRecord], bin_width: f64) -> Histogram {
    assert!(bin_width > 0.0, "bin width must be positive");
    assert!(!records.is_empty(), "histogram needs records");

    let bin_index = |v: f64| (v / bin_width).floor() as i64;
    let lo_bin = records.iter().map(|r| bin_index(r.d_value)).min().unwrap();
    let hi_bin = records.iter().map(|r| bin_index(r.d_value)).max().unwrap();

    let mut bins: Vec<HistBin> = (lo_bin..=hi_bin)
        .map(|i| HistBin {
            lo: i as f64 * bin_width,
            hi: (i + 1) as f64 * bin_width,
            correct: 0,
            incorrect: 0,
        })
        .collect();
    for r in records {
        let slot = (bin_index(r.d_value) - lo_bin) as usize;
        if r.correct {
            bins[slot].correct += 1;
        } else {
            bins[slot].incorrect += 1;
        }
    }
    let mean = records.iter().map(|r| r.d_value).sum::<f64>() / records.len() as f64;
    Histogram {
        measure: records[0].measure.clone(),
        bin_width,
        bins,
        mean,
        total: records.len(),
    }
}

impl Histogram {
    /// Renders gnuplot-friendly CSV: a `# mean <m>` comment line, a
    /// header, then one row per bin.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# mean {}\n", self.mean);
        out.push_str("bin_lo,bin_hi,correct,incorrect,total\n");
        for b in &self.bins {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                b.lo,
                b.hi,
                b.correct,
                b.incorrect,
                b.total()
            ));
        }
        out
    }
}
