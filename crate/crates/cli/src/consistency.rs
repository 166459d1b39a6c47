//! Fixed-length time segments, one calibration per segment, and the spread
//! of the per-segment estimates over all segments and over those lying
//! entirely on a straight stretch of road.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use x2car::circular::{circular_mean, circular_std};
use x2car::seed::derive_seed;
use x2car::trajectory::extract_straight_segments;
use x2car::{CalibError, Result};

use crate::dataset::{require_nonempty, Dataset, Method};
use crate::params::Params;
use crate::report::{Angle, ErrorBody};

/// Named angles and lengths of one segment estimate.
pub type Values = (BTreeMap<&'static str, f64>, BTreeMap<&'static str, f64>);

#[derive(Debug, Serialize)]
pub struct SegmentResult {
    pub index: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub straight: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
    #[serde(skip)]
    pub values: Option<Values>,
}

/// Mean and spread over a set of segments. Spreads are `None` with fewer
/// than two successful segments.
#[derive(Debug, Serialize, PartialEq)]
pub struct Spread {
    pub segments: usize,
    pub mean: BTreeMap<&'static str, Option<Angle>>,
    pub std: BTreeMap<&'static str, Option<Angle>>,
    pub mean_length: BTreeMap<&'static str, Option<f64>>,
    pub std_length: BTreeMap<&'static str, Option<f64>>,
}

#[derive(Debug, Serialize)]
pub struct ConsistencyReport {
    pub method: Method,
    pub segment_length: f64,
    pub segment_count: usize,
    pub straight_count: usize,
    pub all: Spread,
    pub straight: Spread,
    pub segments: Vec<SegmentResult>,
}

/// Bounds of the complete segments. Segments are half-open, so the last
/// one is complete when the data reaches to within one sample step of its
/// end.
pub fn segment_bounds(times: &[f64], length: f64) -> Vec<(f64, f64)> {
    let (Some(lo), Some(hi)) = (
        times.iter().copied().reduce(f64::min),
        times.iter().copied().reduce(f64::max),
    ) else {
        return Vec::new();
    };
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut steps: Vec<f64> = sorted.windows(2).map(|w| w[1] - w[0]).collect();
    steps.sort_by(f64::total_cmp);
    let step = steps.get(steps.len() / 2).copied().unwrap_or(0.0);
    let reach = hi + step + 1e-9 * length;
    (0..)
        .map(|k| (lo + k as f64 * length, lo + (k + 1) as f64 * length))
        .take_while(|&(_, t1)| t1 <= reach)
        .collect()
}

fn spread(segments: &[&SegmentResult]) -> Result<Spread> {
    let ok: Vec<_> = segments.iter().filter_map(|s| s.values.as_ref()).collect();
    let mut out = Spread {
        segments: ok.len(),
        mean: BTreeMap::new(),
        std: BTreeMap::new(),
        mean_length: BTreeMap::new(),
        std_length: BTreeMap::new(),
    };
    let Some(first) = ok.first() else {
        return Ok(out);
    };
    for &name in first.0.keys() {
        let v: Vec<f64> = ok.iter().map(|(a, _)| a[name]).collect();
        out.mean.insert(name, Some(circular_mean(&v)?.into()));
        out.std.insert(
            name,
            if v.len() > 1 {
                Some(circular_std(&v)?.into())
            } else {
                None
            },
        );
    }
    for &name in first.1.keys() {
        let v: Vec<f64> = ok.iter().map(|(_, l)| l[name]).collect();
        let n = v.len() as f64;
        // Deviations from the first value keep equal inputs exact.
        let d: Vec<f64> = v.iter().map(|x| x - v[0]).collect();
        let dm = d.iter().sum::<f64>() / n;
        out.mean_length.insert(name, Some(v[0] + dm));
        let s = (v.len() > 1)
            .then(|| (d.iter().map(|x| (x - dm).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
        out.std_length.insert(name, s);
    }
    Ok(out)
}

/// Segments run in parallel; results are assembled in index order.
pub fn consistency(data: &Dataset, params: &Params) -> Result<ConsistencyReport> {
    let length = params.consistency.segment_length;
    let bounds = segment_bounds(&data.times(), length);
    if bounds.len() < 2 {
        return Err(CalibError::TooFewSamples {
            need: 2,
            got: bounds.len(),
        });
    }
    let track = data.track().unwrap_or_default();
    let spans = extract_straight_segments(&track, &params.consistency.straight);
    let straight = |t0: f64, t1: f64| {
        let inside: Vec<f64> = track
            .iter()
            .map(|s| s.t)
            .filter(|&t| t >= t0 && t < t1)
            .collect();
        match (inside.first(), inside.last()) {
            (Some(&a), Some(&b)) => spans.iter().any(|s| s.contains_span(a, b)),
            _ => false,
        }
    };

    let segments: Vec<SegmentResult> = bounds
        .par_iter()
        .enumerate()
        .map(|(index, &(t0, t1))| {
            let part = data.slice(t0, t1);
            let run = require_nonempty(&part)
                .and_then(|_| part.run(params, derive_seed(params.seed, index as u64)));
            let mut r = SegmentResult {
                index,
                t_start: t0,
                t_end: t1,
                straight: straight(t0, t1),
                estimate: None,
                error: None,
                values: None,
            };
            match run {
                Ok(e) => {
                    r.estimate = Some(e.detail);
                    r.values = Some((e.angles, e.lengths));
                }
                Err(e) => {
                    r.error = Some(ErrorBody {
                        code: e.code(),
                        message: e.to_string(),
                    })
                }
            }
            r
        })
        .collect();

    let all: Vec<&SegmentResult> = segments.iter().collect();
    let straight_only: Vec<&SegmentResult> = segments.iter().filter(|s| s.straight).collect();
    Ok(ConsistencyReport {
        method: data.method(),
        segment_length: length,
        segment_count: segments.len(),
        straight_count: straight_only.len(),
        all: spread(&all)?,
        straight: spread(&straight_only)?,
        segments,
    })
}
