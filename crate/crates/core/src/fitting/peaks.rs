//! Local-maximum peak finding with prominence filtering.

use crate::response::ResponseCurve;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    /// Interpolated position, in the curve's field units.
    pub field: f64,
    /// Interpolated height, always > 0.
    pub height: f64,
    /// Full width at half height; falls back to the distance between the
    /// bases when the curve never drops that far.
    pub width_estimate: f64,
}

/// Peaks ordered by field.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PeakSet {
    pub peaks: Vec<Peak>,
}

impl PeakSet {
    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Peak> {
        self.peaks.iter()
    }

    pub fn positive_side(&self) -> PeakSet {
        PeakSet {
            peaks: self
                .peaks
                .iter()
                .copied()
                .filter(|p| p.field > 0.0)
                .collect(),
        }
    }
}

/// Vertex of the parabola through three points.
fn parabola_vertex(x: [f64; 3], y: [f64; 3]) -> Option<(f64, f64)> {
    let d1 = (y[1] - y[0]) / (x[1] - x[0]);
    let d2 = (y[2] - y[1]) / (x[2] - x[1]);
    let a = (d2 - d1) / (x[2] - x[0]);
    if !(a < 0.0) {
        return None;
    }
    let b = d1 - a * (x[0] + x[1]);
    let xv = -b / (2.0 * a);
    let yv = y[1] + d1 * (xv - x[1]) + a * (xv - x[0]) * (xv - x[1]);
    Some((xv, yv))
}

/// Index of the lowest point between `i` and the first point higher than
/// `values[i]` in direction `step`, or the curve edge.
fn base(values: &[f64], i: usize, step: isize) -> usize {
    let mut j = i as isize;
    let mut lowest = i;
    loop {
        j += step;
        if j < 0 || j as usize >= values.len() {
            break;
        }
        let v = values[j as usize];
        if v > values[i] {
            break;
        }
        if v < values[lowest] {
            lowest = j as usize;
        }
    }
    lowest
}

/// Where the curve falls to `level` walking from `i` towards `stop`.
fn half_crossing(fields: &[f64], values: &[f64], i: usize, stop: usize, level: f64) -> f64 {
    let step: isize = if stop < i { -1 } else { 1 };
    let mut j = i as isize;
    while j != stop as isize {
        let k = j + step;
        let (a, b) = (j as usize, k as usize);
        if values[b] <= level {
            let t = (values[a] - level) / (values[a] - values[b]);
            return fields[a] + t * (fields[b] - fields[a]);
        }
        j = k;
    }
    fields[stop]
}

/// Finds interior local maxima whose topographic prominence is at least
/// `min_prominence` times the curve maximum.
///
/// Positions and heights come from the parabola through the three samples
/// around each maximum. Edge samples never count as peaks.
pub fn detect_peaks(curve: &ResponseCurve, min_prominence: f64) -> Result<PeakSet> {
    if !(min_prominence > 0.0 && min_prominence < 1.0) {
        return Err(Error::InvalidParameter {
            name: "min_prominence",
            reason: format!("must lie in (0, 1), got {min_prominence}"),
        });
    }
    let (x, y) = (curve.fields(), curve.values());
    if x.len() < 5 {
        return Err(Error::InvalidCurve(format!(
            "peak search needs at least 5 points, got {}",
            x.len()
        )));
    }
    let ymax = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(ymax > 0.0) {
        return Err(Error::NoPeaks(min_prominence));
    }
    let threshold = min_prominence * ymax;
    let mut peaks = Vec::new();
    let mut i = 1;
    while i < x.len() - 1 {
        if !(y[i] > y[i - 1]) {
            i += 1;
            continue;
        }
        // walk across a flat top
        let mut r = i;
        while r + 1 < x.len() && y[r + 1] == y[i] {
            r += 1;
        }
        if r + 1 >= x.len() || !(y[r + 1] < y[i]) {
            i = r + 1;
            continue;
        }
        let left = base(y, i, -1);
        let right = base(y, r, 1);
        let prominence = y[i] - y[left].max(y[right]);
        if prominence >= threshold {
            let (field, height) = if r == i {
                parabola_vertex([x[i - 1], x[i], x[i + 1]], [y[i - 1], y[i], y[i + 1]])
                    .unwrap_or((x[i], y[i]))
            } else {
                (0.5 * (x[i] + x[r]), y[i])
            };
            if height > 0.0 {
                let level = 0.5 * height;
                let lo = half_crossing(x, y, i, left, level);
                let hi = half_crossing(x, y, r, right, level);
                peaks.push(Peak {
                    field,
                    height,
                    width_estimate: hi - lo,
                });
            }
        }
        i = r + 1;
    }
    if peaks.is_empty() {
        return Err(Error::NoPeaks(min_prominence));
    }
    Ok(PeakSet { peaks })
}
