use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::{featurize, FeatureVector, LibraryError, MatchResult, ScenarioRecord};
use crate::math::abs;
use crate::status::StatusLog;

/// Min-max ranges used to scale numeric features into [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Normalization {
    pub severity: (f64, f64),
    pub count: (f64, f64),
    pub wind_speed: (f64, f64),
    pub spread_rate: (f64, f64),
    pub max_temp: (f64, f64),
}

impl Default for Normalization {
    fn default() -> Self {
        Self {
            severity: (0.0, 2.0),
            count: (0.0, 100.0),
            wind_speed: (0.0, 120.0),
            spread_rate: (0.0, 10.0),
            max_temp: (0.0, 1200.0),
        }
    }
}

/// Scales `x` into [0, 1] over `range`, clamping outside values.
pub fn min_max(x: f64, range: (f64, f64)) -> f64 {
    let (lo, hi) = range;
    if hi <= lo {
        return 0.0;
    }
    ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
}

/// Per-feature weights; must be non-negative and sum to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct FeatureWeights {
    pub severity: f64,
    pub responders: f64,
    pub fire_trucks: f64,
    pub helicopters: f64,
    pub ambulances: f64,
    pub material_class: f64,
    pub wind_speed: f64,
    pub wind_direction: f64,
    pub spread_rate: f64,
    pub max_temp: f64,
    pub objects_in_path: f64,
}

impl FeatureWeights {
    pub const COUNT: usize = 11;

    pub fn uniform() -> Self {
        let w = 1.0 / Self::COUNT as f64;
        Self::from_array([w; Self::COUNT])
    }

    pub fn from_array(a: [f64; Self::COUNT]) -> Self {
        Self {
            severity: a[0],
            responders: a[1],
            fire_trucks: a[2],
            helicopters: a[3],
            ambulances: a[4],
            material_class: a[5],
            wind_speed: a[6],
            wind_direction: a[7],
            spread_rate: a[8],
            max_temp: a[9],
            objects_in_path: a[10],
        }
    }

    pub fn to_array(&self) -> [f64; Self::COUNT] {
        [
            self.severity,
            self.responders,
            self.fire_trucks,
            self.helicopters,
            self.ambulances,
            self.material_class,
            self.wind_speed,
            self.wind_direction,
            self.spread_rate,
            self.max_temp,
            self.objects_in_path,
        ]
    }

    pub fn validate(&self) -> Result<(), LibraryError> {
        let a = self.to_array();
        if a.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(LibraryError::BadWeights);
        }
        let sum: f64 = a.iter().sum();
        if abs(sum - 1.0) > 1e-9 {
            return Err(LibraryError::BadWeights);
        }
        Ok(())
    }
}

impl Default for FeatureWeights {
    fn default() -> Self {
        Self::uniform()
    }
}

/// Per-feature distances in weight order, each in [0, 1].
pub(crate) fn feature_terms(a: &FeatureVector, b: &FeatureVector, norm: &Normalization) -> [f64; FeatureWeights::COUNT] {
    let num = |x: f64, y: f64, r: (f64, f64)| abs(min_max(x, r) - min_max(y, r));
    let count = |x: u32, y: u32| num(f64::from(x), f64::from(y), norm.count);
    let dir = {
        let d = abs(a.wind_direction - b.wind_direction) % 360.0;
        d.min(360.0 - d) / 180.0
    };
    [
        num(a.severity.ordinal(), b.severity.ordinal(), norm.severity),
        count(a.responders, b.responders),
        count(a.fire_trucks, b.fire_trucks),
        count(a.helicopters, b.helicopters),
        count(a.ambulances, b.ambulances),
        if a.material_class == b.material_class { 0.0 } else { 1.0 },
        num(a.wind_speed, b.wind_speed, norm.wind_speed),
        dir,
        num(a.spread_rate, b.spread_rate, norm.spread_rate),
        num(a.max_temp, b.max_temp, norm.max_temp),
        a.objects_in_path.jaccard_distance(b.objects_in_path),
    ]
}

/// Weighted sum of per-feature distances.
///
/// Numeric features use the absolute difference of min-max normalized values,
/// the material class is a 0/1 mismatch, detected objects use the Jaccard
/// distance and wind direction the wrapped angle `min(|d|, 360 - |d|) / 180`.
pub fn static_distance(
    a: &FeatureVector,
    b: &FeatureVector,
    weights: &FeatureWeights,
    norm: &Normalization,
) -> Result<f64, LibraryError> {
    weights.validate()?;
    Ok(weighted(a, b, weights, norm))
}

fn weighted(a: &FeatureVector, b: &FeatureVector, weights: &FeatureWeights, norm: &Normalization) -> f64 {
    feature_terms(a, b, norm)
        .iter()
        .zip(weights.to_array())
        .map(|(d, w)| d * w)
        .sum()
}

/// Dynamic time warping with absolute-difference local cost and
/// match/insert/delete steps, divided by the length of the warping path.
///
/// Among minimum-cost paths the shortest one sets the divisor.
pub fn dtw(a: &[f64], b: &[f64]) -> Result<f64, LibraryError> {
    if a.is_empty() || b.is_empty() {
        return Err(LibraryError::EmptySeries);
    }
    let m = b.len();
    // (cost, path length), compared lexicographically
    let mut prev: Vec<(f64, u32)> = vec![(f64::INFINITY, 0); m];
    let mut cur: Vec<(f64, u32)> = vec![(f64::INFINITY, 0); m];
    let better = |x: (f64, u32), y: (f64, u32)| match x.0.partial_cmp(&y.0) {
        Some(Ordering::Less) => true,
        Some(Ordering::Equal) => x.1 < y.1,
        _ => false,
    };
    for (i, &ai) in a.iter().enumerate() {
        for j in 0..m {
            let local = abs(ai - b[j]);
            let best = if i == 0 && j == 0 {
                (0.0, 0)
            } else {
                let mut best = (f64::INFINITY, u32::MAX);
                if i > 0 && j > 0 && better(prev[j - 1], best) {
                    best = prev[j - 1];
                }
                if i > 0 && better(prev[j], best) {
                    best = prev[j];
                }
                if j > 0 && better(cur[j - 1], best) {
                    best = cur[j - 1];
                }
                best
            };
            cur[j] = (best.0 + local, best.1 + 1);
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    let (cost, len) = prev[m - 1];
    Ok(cost / f64::from(len))
}

/// Per-tick growth: the first sample, then successive differences.
pub fn growth_rates(cumulative: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(cumulative.len());
    let mut last = 0.0;
    for &v in cumulative {
        out.push(v - last);
        last = v;
    }
    out
}

/// Linear resampling of `(time, value)` samples onto `start + k * tick`, k = 1.. up
/// to the last sample time. Values before the first sample take the first value.
pub fn resample(samples: &[(f64, f64)], start: f64, tick: f64) -> Vec<f64> {
    if samples.is_empty() || !(tick > 0.0) {
        return Vec::new();
    }
    let end = samples[samples.len() - 1].0;
    let mut out = Vec::new();
    let mut k = 1u32;
    let mut seg = 0usize;
    loop {
        let t = start + f64::from(k) * tick;
        if t > end + 1e-9 {
            break;
        }
        while seg + 1 < samples.len() && samples[seg + 1].0 < t {
            seg += 1;
        }
        let (t0, v0) = samples[seg];
        let v = if t <= t0 || seg + 1 >= samples.len() {
            if t < t0 {
                samples[0].1
            } else {
                v0
            }
        } else {
            let (t1, v1) = samples[seg + 1];
            v0 + (v1 - v0) * (t - t0) / (t1 - t0)
        };
        out.push(v);
        k += 1;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct MatchConfig {
    /// Weight of the static feature distance.
    pub alpha: f64,
    /// Weight of the temporal (DTW) distance.
    pub beta: f64,
    pub weights: FeatureWeights,
    pub norm: Normalization,
    /// Library tick, seconds per growth sample.
    pub tick_s: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            alpha: 0.7,
            beta: 0.3,
            weights: FeatureWeights::default(),
            norm: Normalization::default(),
            tick_s: crate::spread::DEFAULT_DT_S,
        }
    }
}

struct Ranked(MatchResult);

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Ranked {}
impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .combined
            .total_cmp(&other.0.combined)
            .then_with(|| self.0.scenario_id.cmp(&other.0.scenario_id))
    }
}

/// Top-`k` scenarios by `alpha * static + beta * dtw(growth rates)`, ascending,
/// ties by scenario id. An empty query growth series compares as a single zero.
pub fn match_features(
    library: &[ScenarioRecord],
    query: &FeatureVector,
    query_growth: &[f64],
    k: usize,
    config: &MatchConfig,
) -> Result<Vec<MatchResult>, LibraryError> {
    if library.is_empty() {
        return Err(LibraryError::EmptyLibrary);
    }
    if k == 0 {
        return Err(LibraryError::BadK);
    }
    config.weights.validate()?;
    let zero = [0.0];
    let q_rates = if query_growth.is_empty() {
        zero.to_vec()
    } else {
        growth_rates(query_growth)
    };
    // max-heap of the k best seen so far
    let mut heap: BinaryHeap<Ranked> = BinaryHeap::with_capacity(k + 1);
    for s in library {
        let st = weighted(query, &s.features, &config.weights, &config.norm);
        let s_rates = if s.growth.is_empty() { zero.to_vec() } else { growth_rates(&s.growth) };
        let tm = dtw(&q_rates, &s_rates)?;
        let r = Ranked(MatchResult {
            scenario_id: s.id.clone(),
            static_distance: st,
            temporal_distance: tm,
            combined: config.alpha * st + config.beta * tm,
        });
        if heap.len() < k {
            heap.push(r);
        } else if let Some(worst) = heap.peek() {
            if r < *worst {
                heap.pop();
                heap.push(r);
            }
        }
    }
    Ok(heap.into_sorted_vec().into_iter().map(|r| r.0).collect())
}

/// Featurizes the status log and matches it against the library.
pub fn match_status(
    library: &[ScenarioRecord],
    status: &StatusLog,
    k: usize,
    config: &MatchConfig,
) -> Result<Vec<MatchResult>, LibraryError> {
    let features = featurize(status);
    let growth = status
        .spread
        .as_ref()
        .map(|s| resample(&s.growth, s.start_time, config.tick_s))
        .unwrap_or_default();
    match_features(library, &features, &growth, k, config)
}
