//! Revival detection, rational-fraction classification and dephasing time.

use std::fmt;

use serde::Serialize;

use crate::dynamics::{gaussian_convolve, CoherenceTrace};
use crate::error::{Error, Result};
use crate::pulses::sigma_from_fwhm;

/// Default smoothing for ns-scale scans, ps.
pub const DEFAULT_SMOOTH_FWHM: f64 = 2.0;

/// Default largest fraction denominator.
pub const DEFAULT_Q_MAX: u32 = 9;

/// Light smoothing used by [`dephasing_time`], ps.
const DEPHASING_SMOOTH_FWHM: f64 = 0.5;

/// Depth of the floor used to centre an extremum, as a fraction of its prominence.
const FLOOR_FRACTION: f64 = 0.05;

/// How long |ρ| must stay below 1/e for the crossing to count, ps.
const DEPHASING_HOLD: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtremumKind {
    Peak,
    Dip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extremum {
    /// Parabola-refined position, ps.
    pub time: f64,
    pub kind: ExtremumKind,
    /// Smoothed signal at the sample nearest the extremum.
    pub value: f64,
    /// Topographic prominence as a fraction of the signal maximum.
    pub prominence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Fraction {
    pub p: u32,
    pub q: u32,
}

impl Fraction {
    pub fn value(&self) -> f64 {
        self.p as f64 / self.q as f64
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.p, self.q)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifiedExtremum {
    pub time: f64,
    pub kind: ExtremumKind,
    pub prominence: f64,
    pub fraction: Option<Fraction>,
    /// time − (p/q)·T, ps.
    pub match_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RevivalReport {
    pub extrema: Vec<ClassifiedExtremum>,
    pub dephasing_time_ps: Option<f64>,
    pub t_rovib_estimate_ps: f64,
    pub q_max: u32,
    pub tolerance_ps: f64,
}

/// Gaussian smoothing of a uniformly sampled signal; `fwhm` in the time unit.
pub fn smooth(times: &[f64], values: &[f64], fwhm: f64) -> Vec<f64> {
    if fwhm <= 0.0 || times.len() < 2 {
        return values.to_vec();
    }
    let dt = times[1] - times[0];
    gaussian_convolve(values, sigma_from_fwhm(fwhm) / dt)
}

/// Interior local maxima and minima of the smoothed signal whose prominence
/// is at least `min_prominence` × max(signal).
pub fn detect_extrema(trace: &CoherenceTrace, smooth_fwhm: f64, min_prominence: f64) -> Result<Vec<Extremum>> {
    if trace.is_empty() {
        return Err(Error::Domain("cannot search an empty trace".into()));
    }
    if !(smooth_fwhm >= 0.0) {
        return Err(Error::Domain(format!("smoothing FWHM must be >= 0, got {smooth_fwhm}")));
    }
    let y = smooth(&trace.times, &trace.signal, smooth_fwhm);
    let scale = y.iter().copied().fold(0.0, f64::max);
    if !(scale > 0.0) {
        return Ok(Vec::new());
    }
    let neg: Vec<f64> = y.iter().map(|v| -v).collect();
    let mut out = Vec::new();
    for (kind, series) in [(ExtremumKind::Peak, &y), (ExtremumKind::Dip, &neg)] {
        for (i, prom) in peaks_with_prominence(series) {
            let prominence = prom / scale;
            if prominence >= min_prominence {
                out.push(Extremum {
                    time: locate(&trace.times, series, i, prom),
                    kind,
                    value: y[i],
                    prominence,
                });
            }
        }
    }
    out.sort_by(|a, b| a.time.total_cmp(&b.time));
    Ok(out)
}

/// Strict interior maxima (plateaus collapse to their first sample) with
/// topographic prominence.
fn peaks_with_prominence(y: &[f64]) -> Vec<(usize, f64)> {
    let n = y.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if y[i] > y[i - 1] {
            let mut k = i;
            while k + 1 < n && y[k + 1] == y[i] {
                k += 1;
            }
            if k + 1 < n && y[k + 1] < y[i] {
                let mut left_min = y[i];
                let mut l = i;
                while l > 0 && y[l - 1] <= y[i] {
                    l -= 1;
                    left_min = left_min.min(y[l]);
                }
                let left_blocked = l > 0;
                let mut right_min = y[i];
                let mut r = k;
                while r + 1 < n && y[r + 1] <= y[i] {
                    r += 1;
                    right_min = right_min.min(y[r]);
                }
                let right_blocked = r + 1 < n;
                // A side that runs off the record without meeting a higher
                // point does not bound the prominence.
                let base = match (left_blocked, right_blocked) {
                    (true, true) => left_min.max(right_min),
                    (true, false) => left_min,
                    (false, true) => right_min,
                    (false, false) => left_min.min(right_min),
                };
                out.push((i, y[i] - base));
            }
            i = k + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Centre of the extremum's floor, the span within `FLOOR_FRACTION` of the
/// prominence of its top. Anti-revival dips are flat-bottomed valleys whose
/// lowest sample wanders across the floor; sharp extrema fall back to a
/// parabola through the top three samples.
fn locate(t: &[f64], y: &[f64], i: usize, prominence: f64) -> f64 {
    let level = y[i] - FLOOR_FRACTION * prominence;
    let cross = |a: usize, b: usize| t[a] + (y[a] - level) / (y[a] - y[b]) * (t[b] - t[a]);
    let mut l = i;
    while l > 0 && y[l - 1] >= level {
        l -= 1;
    }
    let mut r = i;
    while r + 1 < y.len() && y[r + 1] >= level {
        r += 1;
    }
    if r - l < 3 || l == 0 || r + 1 == y.len() {
        return refine(t, y, i);
    }
    0.5 * (cross(l, l - 1) + cross(r, r + 1))
}

fn refine(t: &[f64], y: &[f64], i: usize) -> f64 {
    let (a, b, c) = (y[i - 1], y[i], y[i + 1]);
    let denom = a - 2.0 * b + c;
    if denom == 0.0 {
        return t[i];
    }
    let shift = 0.5 * (a - c) / denom;
    t[i] + shift.clamp(-0.5, 0.5) * (t[i + 1] - t[i])
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Nearest reduced fraction p/q (q ≤ q_max) of `x`; ties go to the smaller q.
pub fn nearest_fraction(x: f64, q_max: u32) -> Fraction {
    let mut best = Fraction { p: 0, q: 1 };
    let mut best_err = f64::INFINITY;
    for q in 1..=q_max.max(1) {
        let p = (x * q as f64).round().max(0.0) as u32;
        if gcd(p, q) != 1 && !(p == 0 && q == 1) {
            continue;
        }
        let err = (x - p as f64 / q as f64).abs();
        if err < best_err - 1e-15 {
            best = Fraction { p, q };
            best_err = err;
        }
    }
    best
}

/// Matches each extremum to the nearest p/q·T within `tol` ps.
pub fn classify_fractions(extrema: &[Extremum], t_rovib: f64, q_max: u32, tol: f64) -> Result<RevivalReport> {
    if !(t_rovib > 0.0) || q_max < 1 || !(tol >= 0.0) {
        return Err(Error::Domain(format!(
            "classification needs T > 0, q_max >= 1, tol >= 0 (got {t_rovib}, {q_max}, {tol})"
        )));
    }
    let extrema = extrema
        .iter()
        .map(|e| {
            let f = nearest_fraction(e.time / t_rovib, q_max);
            let err = e.time - f.value() * t_rovib;
            let hit = err.abs() <= tol;
            ClassifiedExtremum {
                time: e.time,
                kind: e.kind,
                prominence: e.prominence,
                fraction: hit.then_some(f),
                match_error: hit.then_some(err),
            }
        })
        .collect();
    Ok(RevivalReport {
        extrema,
        dephasing_time_ps: None,
        t_rovib_estimate_ps: t_rovib,
        q_max,
        tolerance_ps: tol,
    })
}

/// Position of the most prominent peak within ±`window` ps of `guess`.
pub fn estimate_revival_time(extrema: &[Extremum], guess: f64, window: f64) -> Option<f64> {
    extrema
        .iter()
        .filter(|e| e.kind == ExtremumKind::Peak && (e.time - guess).abs() <= window)
        .max_by(|a, b| a.prominence.total_cmp(&b.prominence))
        .map(|e| e.time)
}

/// First time the lightly smoothed |ρ| drops below |ρ(t₀)|/e and stays
/// below for at least 1 ps; `None` if that never happens.
pub fn dephasing_time(trace: &CoherenceTrace) -> Option<f64> {
    if trace.len() < 2 {
        return None;
    }
    let mag: Vec<f64> = trace.rho.iter().map(|r| r.norm()).collect();
    let threshold = mag[0] / std::f64::consts::E;
    let y = smooth(&trace.times, &mag, DEPHASING_SMOOTH_FWHM);
    let t = &trace.times;
    let mut i = 1;
    while i < y.len() {
        if y[i] < threshold && y[i - 1] >= threshold {
            let f = (y[i - 1] - threshold) / (y[i - 1] - y[i]);
            let crossing = t[i - 1] + f * (t[i] - t[i - 1]);
            let mut k = i;
            while k < y.len() && y[k] < threshold {
                k += 1;
            }
            let held = if k == y.len() { t[k - 1] - crossing } else { t[k] - crossing };
            if held >= DEPHASING_HOLD {
                return Some(crossing);
            }
            i = k;
        }
        i += 1;
    }
    None
}

impl RevivalReport {
    pub fn with_dephasing(mut self, t: Option<f64>) -> Self {
        self.dephasing_time_ps = t;
        self
    }

    pub fn peaks(&self) -> impl Iterator<Item = &ClassifiedExtremum> {
        self.extrema.iter().filter(|e| e.kind == ExtremumKind::Peak)
    }

    pub fn dips(&self) -> impl Iterator<Item = &ClassifiedExtremum> {
        self.extrema.iter().filter(|e| e.kind == ExtremumKind::Dip)
    }

    /// Closest extremum of `kind` to `fraction`·T, if within `tol` ps.
    pub fn find(&self, kind: ExtremumKind, fraction: f64, tol: f64) -> Option<&ClassifiedExtremum> {
        let target = fraction * self.t_rovib_estimate_ps;
        self.extrema
            .iter()
            .filter(|e| e.kind == kind && (e.time - target).abs() <= tol)
            .min_by(|a, b| (a.time - target).abs().total_cmp(&(b.time - target).abs()))
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "T_RoVib = {:.3} ps, dephasing = {}, q_max = {}, tol = {} ps\n",
            self.t_rovib_estimate_ps,
            self.dephasing_time_ps
                .map(|t| format!("{t:.3} ps"))
                .unwrap_or_else(|| "not reached".into()),
            self.q_max,
            self.tolerance_ps
        );
        out.push_str(&format!("{:>10}  {:<5}  {:>10}  {:>8}  {:>9}\n", "time_ps", "kind", "prominence", "fraction", "error_ps"));
        for e in &self.extrema {
            let kind = match e.kind {
                ExtremumKind::Peak => "peak",
                ExtremumKind::Dip => "dip",
            };
            out.push_str(&format!(
                "{:>10.3}  {:<5}  {:>10.4}  {:>8}  {:>9}\n",
                e.time,
                kind,
                e.prominence,
                e.fraction.map(|f| f.to_string()).unwrap_or_else(|| "-".into()),
                e.match_error.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into()),
            ));
        }
        out
    }
}
