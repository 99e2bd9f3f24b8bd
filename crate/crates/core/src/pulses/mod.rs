//! Chirped Gaussian pump/Stokes pulses and their difference-frequency
//! (two-photon) excitation spectrum A₂(Ω).
//!
//! A pulse is described in the spectral domain by a Gaussian amplitude with
//! quadratic phase α·u²/2 and linear phase u·t_d, where u = 2πc(ω − ω₀) is
//! the angular detuning in rad/fs. With the time-domain convention
//! E(t) = ∫E(u)e^{−iut}du, positive α sweeps the frequency upwards in time and
//! the envelope peaks at t = t_d.

mod husimi;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{C_CM_PER_FS, FWHM_PER_SIGMA, GAUSSIAN_TBP, RAD_PER_FS_PER_CM1};

pub use husimi::{husimi_map, HusimiMap, HusimiSource};

/// Gaussian laser pulse with linear chirp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    /// Carrier wavenumber, cm⁻¹.
    pub center: f64,
    /// Transform-limited intensity FWHM, fs.
    pub fwhm_duration: f64,
    /// Spectral quadratic phase coefficient α, fs².
    pub chirp: f64,
    /// Envelope delay, fs.
    pub delay: f64,
    pub amplitude: f64,
}

impl Pulse {
    pub fn transform_limited(center: f64, fwhm_duration: f64) -> Self {
        Pulse {
            center,
            fwhm_duration,
            chirp: 0.0,
            delay: 0.0,
            amplitude: 1.0,
        }
    }

    pub fn with_chirp(self, chirp: f64) -> Self {
        Pulse { chirp, ..self }
    }

    pub fn with_delay(self, delay: f64) -> Self {
        Pulse { delay, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fwhm_duration > 0.0) || !self.fwhm_duration.is_finite() {
            return Err(Error::Domain(format!(
                "pulse duration must be positive, got {} fs",
                self.fwhm_duration
            )));
        }
        if ![self.center, self.chirp, self.delay, self.amplitude]
            .iter()
            .all(|x| x.is_finite())
        {
            return Err(Error::Domain("pulse parameters must be finite".into()));
        }
        Ok(())
    }

    /// Spectral intensity FWHM in cm⁻¹.
    pub fn spectral_fwhm(&self) -> f64 {
        GAUSSIAN_TBP / (self.fwhm_duration * C_CM_PER_FS)
    }

    /// σ of the spectral amplitude exp(−(ω−ω₀)²/2σ²), cm⁻¹.
    pub fn spectral_sigma(&self) -> f64 {
        self.spectral_fwhm() / (2.0 * std::f64::consts::LN_2.sqrt())
    }

    pub fn spectral_amplitude(&self, omega: f64) -> Complex64 {
        let x = omega - self.center;
        let sigma = self.spectral_sigma();
        let u = RAD_PER_FS_PER_CM1 * x;
        let envelope = self.amplitude * (-x * x / (2.0 * sigma * sigma)).exp();
        Complex64::from_polar(envelope, 0.5 * self.chirp * u * u + u * self.delay)
    }

    /// ∫|E(ω)|² dω in cm⁻¹ (amplitude² units).
    pub fn energy(&self) -> f64 {
        self.amplitude * self.amplitude * self.spectral_sigma() * std::f64::consts::PI.sqrt()
    }

    /// Intensity FWHM after chirping, t·√(1 + (4 ln2 α/t²)²), fs.
    pub fn stretched_duration(&self) -> f64 {
        let t = self.fwhm_duration;
        let s = 4.0 * std::f64::consts::LN_2 * self.chirp / (t * t);
        t * (1.0 + s * s).sqrt()
    }

    /// Slope of the instantaneous frequency, cm⁻¹/fs.
    pub fn sweep_rate(&self) -> f64 {
        let su = RAD_PER_FS_PER_CM1 * self.spectral_sigma();
        let a = self.chirp;
        a / (su.powi(-4) + a * a) / RAD_PER_FS_PER_CM1
    }
}

/// Sampled complex difference-frequency amplitude A₂(Ω).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoPhotonSpectrum {
    /// Raman shift Ω = ω_p − ω_S, cm⁻¹, strictly increasing.
    pub grid: Vec<f64>,
    pub amplitude: Vec<Complex64>,
}

/// Quadrature controls for [`two_photon_spectrum_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    /// Integration nodes per spectral intensity FWHM of the narrower pulse.
    pub points_per_fwhm: f64,
    /// Integration half-width in units of the spectral σ.
    pub half_width_sigmas: f64,
    /// Allowed relative change when the resolution is doubled.
    pub self_check_tol: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            points_per_fwhm: 32.0,
            half_width_sigmas: 8.0,
            self_check_tol: 1e-4,
        }
    }
}

/// Uniform grid from `lo` to `hi` (inclusive) with spacing close to `step`.
pub fn uniform_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).ceil().max(1.0) as usize;
    let h = (hi - lo) / n as f64;
    (0..=n).map(|i| lo + i as f64 * h).collect()
}

/// A₂(Ω) = ∫ E_pump(ω)·conj(E_stokes(ω − Ω)) dω with default quadrature.
pub fn two_photon_spectrum(pump: &Pulse, stokes: &Pulse, grid: &[f64]) -> Result<TwoPhotonSpectrum> {
    two_photon_spectrum_with(pump, stokes, grid, QuadratureOptions::default())
}

pub fn two_photon_spectrum_with(
    pump: &Pulse,
    stokes: &Pulse,
    grid: &[f64],
    opts: QuadratureOptions,
) -> Result<TwoPhotonSpectrum> {
    pump.validate()?;
    stokes.validate()?;
    if grid.is_empty() || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("Raman grid must be non-empty and strictly increasing".into()));
    }
    let step = quadrature_step(pump, stokes, grid, &opts);
    let amplitude: Vec<Complex64> = grid
        .par_iter()
        .map(|&omega| overlap_integral(pump, stokes, omega, step, &opts))
        .collect();

    // Self-check at doubled resolution on a sparse subset of the grid.
    let peak = amplitude.iter().map(|a| a.norm()).fold(0.0, f64::max);
    if peak > 0.0 {
        let stride = (grid.len() / 16).max(1);
        let argmax = (0..grid.len())
            .max_by(|&a, &b| amplitude[a].norm().total_cmp(&amplitude[b].norm()))
            .unwrap_or(0);
        let mut worst: f64 = 0.0;
        for i in (0..grid.len()).step_by(stride).chain(std::iter::once(argmax)) {
            let fine = overlap_integral(pump, stokes, grid[i], 0.5 * step, &opts);
            worst = worst.max((fine - amplitude[i]).norm() / peak);
        }
        if worst > opts.self_check_tol {
            return Err(Error::Resolution {
                rel_change: worst,
                limit: opts.self_check_tol,
            });
        }
    }

    Ok(TwoPhotonSpectrum {
        grid: grid.to_vec(),
        amplitude,
    })
}

fn quadrature_step(pump: &Pulse, stokes: &Pulse, grid: &[f64], opts: &QuadratureOptions) -> f64 {
    let fwhm = pump.spectral_fwhm().min(stokes.spectral_fwhm());
    let mut step = fwhm / opts.points_per_fwhm;
    // Keep the residual phase of the integrand well resolved.
    let k = RAD_PER_FS_PER_CM1;
    let half = opts.half_width_sigmas * pump.spectral_sigma().max(stokes.spectral_sigma());
    let nominal = pump.center - stokes.center;
    let max_detuning = grid
        .iter()
        .map(|g| (g - nominal).abs())
        .fold(0.0, f64::max);
    let slope = (pump.chirp - stokes.chirp).abs() * k * k * (half + max_detuning)
        + stokes.chirp.abs() * k * k * max_detuning
        + k * (pump.delay - stokes.delay).abs();
    if slope > 0.0 {
        step = step.min(0.25 * std::f64::consts::PI / slope);
    }
    step
}

/// Trapezoid rule over the intersection of both pulse supports.
fn overlap_integral(
    pump: &Pulse,
    stokes: &Pulse,
    raman_shift: f64,
    step: f64,
    opts: &QuadratureOptions,
) -> Complex64 {
    let wp = opts.half_width_sigmas * pump.spectral_sigma();
    let ws = opts.half_width_sigmas * stokes.spectral_sigma();
    let stokes_image = stokes.center + raman_shift;
    let lo = (pump.center - wp).max(stokes_image - ws);
    let hi = (pump.center + wp).min(stokes_image + ws);
    if hi <= lo {
        return Complex64::new(0.0, 0.0);
    }
    let n = ((hi - lo) / step).ceil().max(2.0) as usize;
    let h = (hi - lo) / n as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..=n {
        let omega = lo + i as f64 * h;
        let term = pump.spectral_amplitude(omega) * stokes.spectral_amplitude(omega - raman_shift).conj();
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        acc += term * w;
    }
    acc * h
}

impl TwoPhotonSpectrum {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn range(&self) -> (f64, f64) {
        (self.grid[0], self.grid[self.grid.len() - 1])
    }

    pub fn power(&self) -> Vec<f64> {
        self.amplitude.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Linear interpolation; `None` outside the grid.
    pub fn interpolate(&self, omega: f64) -> Option<Complex64> {
        let (lo, hi) = self.range();
        if !(omega >= lo && omega <= hi) {
            return None;
        }
        let i = self.grid.partition_point(|&g| g <= omega);
        if i == 0 {
            return Some(self.amplitude[0]);
        }
        if i >= self.grid.len() {
            return Some(self.amplitude[self.grid.len() - 1]);
        }
        let (x0, x1) = (self.grid[i - 1], self.grid[i]);
        let f = (omega - x0) / (x1 - x0);
        Some(self.amplitude[i - 1] * (1.0 - f) + self.amplitude[i] * f)
    }

    /// Largest |linear − quadratic| interpolation difference at cell
    /// midpoints, relative to max |A₂|.
    pub fn interpolation_error(&self) -> f64 {
        let peak = self.amplitude.iter().map(|a| a.norm()).fold(0.0, f64::max);
        if peak == 0.0 || self.grid.len() < 3 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.grid.len() - 1 {
            // Three-point Lagrange stencil touching the cell [i, i+1].
            let j = if i == 0 { 0 } else { i - 1 };
            let (x0, x1, x2) = (self.grid[j], self.grid[j + 1], self.grid[j + 2]);
            let (y0, y1, y2) = (self.amplitude[j], self.amplitude[j + 1], self.amplitude[j + 2]);
            let x = 0.5 * (self.grid[i] + self.grid[i + 1]);
            let l0 = (x - x1) * (x - x2) / ((x0 - x1) * (x0 - x2));
            let l1 = (x - x0) * (x - x2) / ((x1 - x0) * (x1 - x2));
            let l2 = (x - x0) * (x - x1) / ((x2 - x0) * (x2 - x1));
            let quad = y0 * l0 + y1 * l1 + y2 * l2;
            let lin = 0.5 * (self.amplitude[i] + self.amplitude[i + 1]);
            worst = worst.max((quad - lin).norm() / peak);
        }
        worst
    }

    /// Power-weighted mean of Ω.
    pub fn centroid(&self) -> f64 {
        let p = self.power();
        let total: f64 = p.iter().sum();
        p.iter().zip(&self.grid).map(|(w, g)| w * g).sum::<f64>() / total
    }

    /// FWHM of |A₂|² in cm⁻¹; `None` when a half-maximum crossing is off-grid.
    pub fn fwhm(&self) -> Option<f64> {
        half_max_width(&self.grid, &self.power())
    }

    /// FWHM of |A₂| in cm⁻¹.
    pub fn amplitude_fwhm(&self) -> Option<f64> {
        let mag: Vec<f64> = self.amplitude.iter().map(|a| a.norm()).collect();
        half_max_width(&self.grid, &mag)
    }

    /// ∫|A₂|² dΩ (trapezoid on the native grid).
    pub fn energy(&self) -> f64 {
        let p = self.power();
        self.grid
            .windows(2)
            .zip(p.windows(2))
            .map(|(g, v)| 0.5 * (g[1] - g[0]) * (v[0] + v[1]))
            .sum()
    }

    /// `omega_cm1,re,im,abs` CSV with '#' metadata lines.
    pub fn to_csv(&self, metadata: &[(String, String)]) -> String {
        let mut out = String::new();
        for (k, v) in metadata {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        out.push_str("omega_cm1,re_a2,im_a2,abs_a2\n");
        for (g, a) in self.grid.iter().zip(&self.amplitude) {
            out.push_str(&format!("{g},{},{},{}\n", a.re, a.im, a.norm()));
        }
        out
    }
}

fn half_max_width(x: &[f64], y: &[f64]) -> Option<f64> {
    let (imax, &ymax) = y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    if ymax <= 0.0 {
        return None;
    }
    let half = 0.5 * ymax;
    let mut left = None;
    for i in (0..imax).rev() {
        if y[i] < half {
            let f = (half - y[i]) / (y[i + 1] - y[i]);
            left = Some(x[i] + f * (x[i + 1] - x[i]));
            break;
        }
    }
    let mut right = None;
    for i in imax + 1..y.len() {
        if y[i] < half {
            let f = (y[i - 1] - half) / (y[i - 1] - y[i]);
            right = Some(x[i - 1] + f * (x[i] - x[i - 1]));
            break;
        }
    }
    Some(right? - left?)
}

/// Stokes delay that moves the |A₂|² centroid onto `target` (cm⁻¹).
///
/// The centroid is linear in the relative delay when both pulses carry the
/// same chirp; without chirp the delay has no effect and the current delay
/// is returned unchanged.
pub fn stokes_delay_for_center(pump: &Pulse, stokes: &Pulse, target: f64) -> Result<f64> {
    let width = pump.spectral_fwhm().max(stokes.spectral_fwhm());
    let step = width / 200.0;
    let grid = uniform_grid(target - 4.0 * width, target + 4.0 * width, step);
    let centroid_at = |delay: f64| -> Result<f64> {
        let s = two_photon_spectrum(pump, &stokes.with_delay(delay), &grid)?;
        Ok(s.centroid())
    };

    let probe = 50.0;
    let mut delay = stokes.delay;
    let mut c0 = centroid_at(delay)?;
    for _ in 0..3 {
        let c1 = centroid_at(delay + probe)?;
        let slope = (c1 - c0) / probe;
        if slope.abs() < 1e-9 {
            break;
        }
        delay += (target - c0) / slope;
        c0 = centroid_at(delay)?;
        if (c0 - target).abs() < 1e-6 {
            break;
        }
    }
    Ok(delay)
}

/// σ of a Gaussian from its FWHM.
pub(crate) fn sigma_from_fwhm(fwhm: f64) -> f64 {
    fwhm / FWHM_PER_SIGMA
}
