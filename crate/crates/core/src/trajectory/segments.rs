use serde::{Deserialize, Serialize};

use super::PoseSample;
use crate::geom::wrap_angle;
use crate::real::Real;

/// Steps shorter than this carry no usable direction.
const MIN_STEP_M: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct SegmentConfig<T> {
    pub min_length: T,
    /// Largest allowed deviation of any step direction from the segment chord.
    pub max_heading_dev: T,
    /// Polyline simplification tolerance.
    pub tolerance: T,
}

impl<T: Real> Default for SegmentConfig<T> {
    fn default() -> Self {
        Self {
            min_length: T::lit(50.0),
            max_heading_dev: T::lit(5f64.to_radians()),
            tolerance: T::lit(0.5),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StraightSegment<T> {
    pub t_start: T,
    pub t_end: T,
    pub mean_heading: T,
    pub length: T,
    /// Index range into the input samples, inclusive.
    pub first: usize,
    pub last: usize,
}

impl<T: Real> StraightSegment<T> {
    pub fn contains_span(&self, t0: T, t1: T) -> bool {
        t0 >= self.t_start && t1 <= self.t_end
    }

    pub fn contains(&self, t: T) -> bool {
        t >= self.t_start && t <= self.t_end
    }
}

fn point_line_distance<T: Real>(p: &PoseSample<T>, a: &PoseSample<T>, b: &PoseSample<T>) -> T {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len = dx.hypot(dy);
    if len <= T::min_positive_value() {
        return (p.x - a.x).hypot(p.y - a.y);
    }
    ((p.x - a.x) * dy - (p.y - a.y) * dx).abs() / len
}

/// Recursive max-deviation simplification; returns kept vertex indices.
fn simplify<T: Real>(samples: &[PoseSample<T>], tolerance: T) -> Vec<usize> {
    let n = samples.len();
    let mut keep = vec![false; n];
    keep[0] = true;
    keep[n - 1] = true;
    let mut stack = vec![(0usize, n - 1)];
    while let Some((a, b)) = stack.pop() {
        if b <= a + 1 {
            continue;
        }
        let (mut worst, mut at) = (T::zero(), a);
        for i in a + 1..b {
            let d = point_line_distance(&samples[i], &samples[a], &samples[b]);
            if d > worst {
                worst = d;
                at = i;
            }
        }
        if worst > tolerance {
            keep[at] = true;
            stack.push((a, at));
            stack.push((at, b));
        }
    }
    (0..n).filter(|&i| keep[i]).collect()
}

fn chord<T: Real>(samples: &[PoseSample<T>], a: usize, b: usize) -> (T, T) {
    let (dx, dy) = (samples[b].x - samples[a].x, samples[b].y - samples[a].y);
    (dy.atan2(dx), dx.hypot(dy))
}

fn step_deviation<T: Real>(samples: &[PoseSample<T>], i: usize, heading: T) -> Option<T> {
    let (dir, len) = chord(samples, i, i + 1);
    (len >= T::lit(MIN_STEP_M)).then(|| wrap_angle(dir - heading).abs())
}

/// Shrinks `[a, b]` from both ends until every step is within the heading
/// bound of the chord, or the range collapses.
fn trim<T: Real>(
    samples: &[PoseSample<T>],
    mut a: usize,
    mut b: usize,
    max_dev: T,
) -> Option<(usize, usize)> {
    loop {
        if b <= a {
            return None;
        }
        let (heading, _) = chord(samples, a, b);
        let bad = |i: usize| step_deviation(samples, i, heading).is_some_and(|d| d > max_dev);
        if bad(a) {
            a += 1;
            continue;
        }
        if bad(b - 1) {
            b -= 1;
            continue;
        }
        if (a..b).any(bad) {
            return None;
        }
        return Some((a, b));
    }
}

/// Straight pieces of the xy path: simplify to a polyline, then keep edges
/// that are long enough and whose step directions stay near the chord.
/// Segments come out ordered and disjoint in time.
pub fn extract_straight_segments<T: Real>(
    samples: &[PoseSample<T>],
    cfg: &SegmentConfig<T>,
) -> Vec<StraightSegment<T>> {
    if samples.len() < 2 {
        return Vec::new();
    }
    let vertices = simplify(samples, cfg.tolerance);
    let mut out: Vec<StraightSegment<T>> = Vec::new();
    for w in vertices.windows(2) {
        let mut a = w[0];
        if let Some(prev) = out.last() {
            if a <= prev.last {
                a = prev.last + 1;
            }
        }
        let Some((a, b)) = trim(samples, a, w[1], cfg.max_heading_dev) else {
            continue;
        };
        let (heading, length) = chord(samples, a, b);
        if length < cfg.min_length {
            continue;
        }
        out.push(StraightSegment {
            t_start: samples[a].t,
            t_end: samples[b].t,
            mean_heading: heading,
            length,
            first: a,
            last: b,
        });
    }
    out
}
