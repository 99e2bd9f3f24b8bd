use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::{Pulse, TwoPhotonSpectrum};
use crate::error::{Error, Result};
use crate::units::{C_CM_PER_FS, GAUSSIAN_TBP, RAD_PER_FS_PER_CM1};

/// Field whose time-frequency distribution is mapped.
#[derive(Debug, Clone, Copy)]
pub enum HusimiSource<'a> {
    /// Coherent sum of pulses (e.g. pump and Stokes together).
    Pulses(&'a [Pulse]),
    /// Difference-frequency field with spectral amplitude A₂(Ω).
    Spectrum(&'a TwoPhotonSpectrum),
}

/// Gaussian-smoothed time-frequency intensity.
///
/// `values` is row-major with one row per frequency. The normalization makes
/// ∫∫ Q dt dω equal ∫|E(ω)|² dω.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HusimiMap {
    pub times_fs: Vec<f64>,
    pub freqs_cm1: Vec<f64>,
    pub values: Vec<f64>,
    /// Intensity FWHM of the minimum-uncertainty window, fs.
    pub window_fwhm_fs: f64,
}

impl HusimiSource<'_> {
    /// Window matched to the transform-limited duration of the shortest pulse.
    pub fn default_window_fwhm(&self) -> Option<f64> {
        match self {
            HusimiSource::Pulses(p) => p.iter().map(|p| p.fwhm_duration).reduce(f64::min),
            HusimiSource::Spectrum(_) => None,
        }
    }

    /// ∫|E(ω)|² dω.
    pub fn energy(&self) -> f64 {
        match self {
            HusimiSource::Pulses(p) => p.iter().map(Pulse::energy).sum(),
            HusimiSource::Spectrum(s) => s.energy(),
        }
    }

    /// ∫ E(ω) G(ω−ω₀) e^{−ik(ω−ω₀)t₀} dω.
    fn overlap(&self, t0: f64, omega0: f64, window_sigma: f64) -> Complex64 {
        let k = RAD_PER_FS_PER_CM1;
        let lo = omega0 - 8.0 * window_sigma;
        let hi = omega0 + 8.0 * window_sigma;
        let weight = |omega: f64| -> Complex64 {
            let x = omega - omega0;
            Complex64::from_polar((-x * x / (2.0 * window_sigma * window_sigma)).exp(), -k * x * t0)
        };
        match self {
            HusimiSource::Pulses(pulses) => {
                let max_slope = pulses
                    .iter()
                    .map(|p| {
                        let reach = (lo - p.center).abs().max((hi - p.center).abs());
                        p.chirp.abs() * k * k * reach + k * (p.delay - t0).abs()
                    })
                    .fold(0.0, f64::max);
                let mut h = window_sigma / 8.0;
                if max_slope > 0.0 {
                    h = h.min(0.5 * std::f64::consts::PI / max_slope);
                }
                let n = ((hi - lo) / h).ceil() as usize;
                let h = (hi - lo) / n as f64;
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..=n {
                    let omega = lo + i as f64 * h;
                    let field: Complex64 = pulses.iter().map(|p| p.spectral_amplitude(omega)).sum();
                    let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                    acc += field * weight(omega) * w;
                }
                acc * h
            }
            HusimiSource::Spectrum(s) => {
                let start = s.grid.partition_point(|&g| g < lo);
                let end = s.grid.partition_point(|&g| g <= hi);
                let mut acc = Complex64::new(0.0, 0.0);
                for i in start.max(1)..end {
                    let (a, b) = (s.grid[i - 1], s.grid[i]);
                    if a < lo {
                        continue;
                    }
                    let fa = s.amplitude[i - 1] * weight(a);
                    let fb = s.amplitude[i] * weight(b);
                    acc += (fa + fb) * (0.5 * (b - a));
                }
                acc
            }
        }
    }
}

/// Spectral σ (cm⁻¹) of a minimum-uncertainty window with intensity FWHM `fwhm_fs`.
fn window_sigma(fwhm_fs: f64) -> f64 {
    GAUSSIAN_TBP / (fwhm_fs * C_CM_PER_FS) / (2.0 * std::f64::consts::LN_2.sqrt())
}

/// Husimi (Gaussian-windowed spectrogram) map on the given axes.
pub fn husimi_map(
    source: HusimiSource<'_>,
    window_fwhm_fs: f64,
    times_fs: &[f64],
    freqs_cm1: &[f64],
) -> Result<HusimiMap> {
    if !(window_fwhm_fs > 0.0) || !window_fwhm_fs.is_finite() {
        return Err(Error::Domain(format!("window FWHM must be positive, got {window_fwhm_fs}")));
    }
    if times_fs.is_empty() || freqs_cm1.is_empty() {
        return Err(Error::Domain("Husimi axes must be non-empty".into()));
    }
    let sigma = window_sigma(window_fwhm_fs);
    // (k/2π) / ∫G² dω with ∫G² = σ√π.
    let norm = RAD_PER_FS_PER_CM1 / (2.0 * std::f64::consts::PI) / (sigma * std::f64::consts::PI.sqrt());
    let values: Vec<f64> = freqs_cm1
        .par_iter()
        .flat_map_iter(|&w| {
            times_fs
                .iter()
                .map(move |&t| norm * source.overlap(t, w, sigma).norm_sqr())
        })
        .collect();
    Ok(HusimiMap {
        times_fs: times_fs.to_vec(),
        freqs_cm1: freqs_cm1.to_vec(),
        values,
        window_fwhm_fs,
    })
}

fn trapezoid_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return vec![1.0; n];
    }
    (0..n)
        .map(|i| {
            let left = if i > 0 { x[i] - x[i - 1] } else { 0.0 };
            let right = if i + 1 < n { x[i + 1] - x[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

/// First and second moments of the map: (mean_t, mean_ω, var_t, var_ω, cov).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapMoments {
    pub mean_t: f64,
    pub mean_w: f64,
    pub var_t: f64,
    pub var_w: f64,
    pub cov: f64,
}

impl HusimiMap {
    pub fn value(&self, i_freq: usize, i_time: usize) -> f64 {
        self.values[i_freq * self.times_fs.len() + i_time]
    }

    /// ∫∫ Q dt dω by the trapezoid rule on both axes.
    pub fn total(&self) -> f64 {
        let wt = trapezoid_weights(&self.times_fs);
        let wf = trapezoid_weights(&self.freqs_cm1);
        let mut acc = 0.0;
        for (i, fw) in wf.iter().enumerate() {
            for (j, tw) in wt.iter().enumerate() {
                acc += fw * tw * self.value(i, j);
            }
        }
        acc
    }

    pub fn moments(&self) -> MapMoments {
        let wt = trapezoid_weights(&self.times_fs);
        let wf = trapezoid_weights(&self.freqs_cm1);
        let (mut m0, mut mt, mut mw) = (0.0, 0.0, 0.0);
        for (i, fw) in wf.iter().enumerate() {
            for (j, tw) in wt.iter().enumerate() {
                let q = fw * tw * self.value(i, j);
                m0 += q;
                mt += q * self.times_fs[j];
                mw += q * self.freqs_cm1[i];
            }
        }
        let (mean_t, mean_w) = (mt / m0, mw / m0);
        let (mut vt, mut vw, mut c) = (0.0, 0.0, 0.0);
        for (i, fw) in wf.iter().enumerate() {
            for (j, tw) in wt.iter().enumerate() {
                let q = fw * tw * self.value(i, j);
                let dt = self.times_fs[j] - mean_t;
                let dw = self.freqs_cm1[i] - mean_w;
                vt += q * dt * dt;
                vw += q * dw * dw;
                c += q * dt * dw;
            }
        }
        MapMoments {
            mean_t,
            mean_w,
            var_t: vt / m0,
            var_w: vw / m0,
            cov: c / m0,
        }
    }

    /// Normalized time-frequency correlation cov/(σ_t σ_ω).
    pub fn correlation(&self) -> f64 {
        let m = self.moments();
        m.cov / (m.var_t * m.var_w).sqrt()
    }

    /// Ridge as the intensity-weighted mean frequency of each time column,
    /// for columns holding at least `min_fraction` of the strongest column.
    pub fn ridge(&self, min_fraction: f64) -> Vec<(f64, f64, f64)> {
        let wf = trapezoid_weights(&self.freqs_cm1);
        let cols: Vec<(f64, f64)> = (0..self.times_fs.len())
            .map(|j| {
                let mut mass = 0.0;
                let mut first = 0.0;
                for (i, w) in wf.iter().enumerate() {
                    let q = w * self.value(i, j);
                    mass += q;
                    first += q * self.freqs_cm1[i];
                }
                (mass, if mass > 0.0 { first / mass } else { f64::NAN })
            })
            .collect();
        let max_mass = cols.iter().map(|c| c.0).fold(0.0, f64::max);
        cols.iter()
            .zip(&self.times_fs)
            .filter(|(c, _)| c.0 >= min_fraction * max_mass && c.0 > 0.0)
            .map(|(c, &t)| (t, c.1, c.0))
            .collect()
    }

    /// Mass-weighted least-squares slope of the ridge, cm⁻¹/fs.
    pub fn ridge_slope(&self, min_fraction: f64) -> f64 {
        let pts = self.ridge(min_fraction);
        let sw: f64 = pts.iter().map(|p| p.2).sum();
        let mt = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
        let mw = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
        let num: f64 = pts.iter().map(|p| p.2 * (p.0 - mt) * (p.1 - mw)).sum();
        let den: f64 = pts.iter().map(|p| p.2 * (p.0 - mt).powi(2)).sum();
        num / den
    }

    /// Matrix CSV: first row holds the time axis, first column the
    /// frequency axis.
    pub fn to_csv(&self, metadata: &[(String, String)]) -> String {
        let mut out = String::new();
        for (k, v) in metadata {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        out.push_str(&format!("# window_fwhm_fs: {}\n", self.window_fwhm_fs));
        out.push_str("freq_cm1\\time_fs");
        for t in &self.times_fs {
            out.push_str(&format!(",{t}"));
        }
        out.push('\n');
        let nt = self.times_fs.len();
        for (i, w) in self.freqs_cm1.iter().enumerate() {
            out.push_str(&format!("{w}"));
            for v in &self.values[i * nt..(i + 1) * nt] {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulses::{two_photon_spectrum, uniform_grid};

    fn axes_for(p: &Pulse, window: f64) -> (Vec<f64>, Vec<f64>) {
        // Husimi widths add in quadrature with the window's.
        let sw = window_sigma(window);
        let sigma_w = (0.5 * p.spectral_sigma().powi(2) + 0.5 * sw * sw).sqrt();
        let dur = p.stretched_duration().max(window);
        let sigma_t = (dur * dur + window * window).sqrt() / 2.3548;
        let times = uniform_grid(p.delay - 7.0 * sigma_t, p.delay + 7.0 * sigma_t, sigma_t / 12.0);
        let freqs = uniform_grid(p.center - 7.0 * sigma_w, p.center + 7.0 * sigma_w, sigma_w / 12.0);
        (times, freqs)
    }

    #[test]
    fn mass_equals_field_energy() {
        for chirp in [0.0, 35_000.0] {
            let p = Pulse::transform_limited(12_500.0, 130.0).with_chirp(chirp);
            let (t, w) = axes_for(&p, 130.0);
            let pulses = [p];
            let src = HusimiSource::Pulses(&pulses);
            let map = husimi_map(src, 130.0, &t, &w).unwrap();
            assert!(map.values.iter().all(|&v| v >= 0.0));
            let rel = (map.total() / src.energy() - 1.0).abs();
            assert!(rel < 1e-6, "chirp {chirp}: rel {rel}");
        }
    }

    #[test]
    fn transform_limited_blob_has_no_tilt() {
        let p = Pulse::transform_limited(12_500.0, 130.0);
        let (t, w) = axes_for(&p, 130.0);
        let pulses = [p];
        let map = husimi_map(HusimiSource::Pulses(&pulses), 130.0, &t, &w).unwrap();
        assert!(map.correlation().abs() < 1e-3, "{}", map.correlation());
        let m = map.moments();
        assert!(m.mean_t.abs() < 1e-6);
        assert!((m.mean_w - 12_500.0).abs() < 1e-6);
    }

    #[test]
    fn chirped_ridge_follows_sweep_rate() {
        let p = Pulse::transform_limited(12_500.0, 130.0).with_chirp(35_000.0);
        let (t, w) = axes_for(&p, 130.0);
        let pulses = [p];
        let map = husimi_map(HusimiSource::Pulses(&pulses), 130.0, &t, &w).unwrap();
        let slope = map.ridge_slope(0.01);
        let rate = p.sweep_rate();
        assert!(rate > 0.0);
        assert!((slope / rate - 1.0).abs() < 0.05, "{slope} vs {rate}");
    }

    #[test]
    fn equal_chirp_pair_has_flat_difference_ridge() {
        let p = Pulse::transform_limited(12_500.0, 130.0).with_chirp(35_000.0);
        let s = Pulse::transform_limited(10_183.0, 130.0).with_chirp(35_000.0);
        let grid = uniform_grid(1_900.0, 2_750.0, 0.5);
        let a2 = two_photon_spectrum(&p, &s, &grid).unwrap();
        let times = uniform_grid(-2_000.0, 2_000.0, 25.0);
        let freqs = uniform_grid(2_150.0, 2_490.0, 2.0);
        let map = husimi_map(HusimiSource::Spectrum(&a2), 130.0, &times, &freqs).unwrap();
        let slope = map.ridge_slope(0.01);
        // Each pulse alone sweeps at ~0.06 cm⁻¹/fs.
        assert!(slope.abs() < 1e-3 * p.sweep_rate(), "{slope}");

        // The pair fed directly shows both tilted pulses.
        let pair = [p, s];
        let src = HusimiSource::Pulses(&pair);
        assert_eq!(src.default_window_fwhm(), Some(130.0));
        let map = husimi_map(src, 130.0, &times, &uniform_grid(12_300.0, 12_700.0, 10.0)).unwrap();
        assert!(map.ridge_slope(0.01) > 0.9 * p.sweep_rate());
    }

    #[test]
    fn rejects_bad_window() {
        let pulses = [Pulse::transform_limited(12_500.0, 130.0)];
        assert!(husimi_map(HusimiSource::Pulses(&pulses), 0.0, &[0.0], &[12_500.0]).is_err());
    }

    #[test]
    fn csv_layout() {
        let pulses = [Pulse::transform_limited(12_500.0, 130.0)];
        let map = husimi_map(HusimiSource::Pulses(&pulses), 130.0, &[0.0, 10.0], &[12_490.0, 12_500.0, 12_510.0]).unwrap();
        let csv = map.to_csv(&[]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# window_fwhm_fs: 130");
        assert_eq!(lines[1], "freq_cm1\\time_fs,0,10");
        assert_eq!(lines.len(), 5);
        assert!(lines[2].starts_with("12490,"));
    }
}
