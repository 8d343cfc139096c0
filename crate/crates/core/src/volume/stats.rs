use serde::{Deserialize, Serialize};

use super::Volume;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub std_dev: f64,
    /// Bin `k` counts samples in `[k/B, (k+1)/B)`; the last bin is closed.
    pub histogram: Vec<u64>,
}

/// Min, max, mean, population standard deviation and a `bins`-bin histogram
/// over [0, 1]. `bins` of zero is treated as one.
pub fn intensity_stats(v: &Volume, bins: usize) -> IntensityStats {
    let bins = bins.max(1);
    let mut histogram = vec![0u64; bins];
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    // Welford running moments
    let (mut mean, mut m2) = (0.0, 0.0);
    for (i, &s) in v.data().iter().enumerate() {
        min = min.min(s);
        max = max.max(s);
        let delta = s - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (s - mean);
        histogram[bin_of(s, bins)] += 1;
    }
    let n = v.len() as f64;
    IntensityStats {
        min,
        max,
        mean,
        std_dev: (m2 / n).max(0.0).sqrt(),
        histogram,
    }
}

pub(crate) fn bin_of(s: f64, bins: usize) -> usize {
    ((s * bins as f64).floor() as usize).min(bins - 1)
}
