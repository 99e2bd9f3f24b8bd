//! Rotating-frame vibrational coherence ρ₀₁(t) as a phased sum over lines.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::excitation::LineTable;
use crate::pulses::sigma_from_fwhm;
use crate::units::{C_CM_PER_PS, RAD_PER_PS_PER_CM1};

/// Lines weaker than this fraction of the strongest are ignored by the
/// aliasing check.
const ALIAS_AMPLITUDE_FLOOR: f64 = 1e-6;

/// Time points per block of the phasor recurrence; each block restarts
/// from exactly evaluated phases.
const BLOCK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayModel {
    None,
    /// Coherence amplitude decays as exp(−t/τ_c), intensity as exp(−2t/τ_c).
    Collisional { tau_c_ps: f64 },
}

impl DecayModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DecayModel::None => Ok(()),
            DecayModel::Collisional { tau_c_ps } if tau_c_ps > 0.0 && tau_c_ps.is_finite() => Ok(()),
            DecayModel::Collisional { tau_c_ps } => {
                Err(Error::Domain(format!("tau_c must be positive, got {tau_c_ps} ps")))
            }
        }
    }

    /// Amplitude envelope at time `t` (ps).
    pub fn factor(&self, t: f64) -> f64 {
        match *self {
            DecayModel::None => 1.0,
            DecayModel::Collisional { tau_c_ps } => (-t / tau_c_ps).exp(),
        }
    }

    pub fn tau_c(&self) -> Option<f64> {
        match *self {
            DecayModel::None => None,
            DecayModel::Collisional { tau_c_ps } => Some(tau_c_ps),
        }
    }
}

/// Sampled coherence with |ρ|² (optionally probe-smeared) intensity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoherenceTrace {
    pub times: Vec<f64>,
    pub rho: Vec<Complex64>,
    pub signal: Vec<f64>,
    /// ν_ref of the rotating frame e^{−i2πcν_ref t} that is factored out, cm⁻¹.
    pub frame_ref: f64,
    pub decay: DecayModel,
    pub probe_fwhm_fs: Option<f64>,
    pub aliasing_warning: Option<String>,
}

/// ρ₀₁(t) = Σ a·exp(−i2πc(ν − ν_ref)t)·exp(−t/τ_c), t in ps.
pub fn coherence_at(table: &LineTable, decay: DecayModel, t: f64) -> Complex64 {
    coherence_in_frame(table, decay, t, 0.0)
}

/// As [`coherence_at`] with the frame reference moved to ν_ref + `frame_shift`.
///
/// The shift is applied as one common phase after the line sum, so |ρ| does
/// not depend on the frame beyond the rounding of a unit phasor.
pub fn coherence_in_frame(table: &LineTable, decay: DecayModel, t: f64, frame_shift: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for line in &table.lines {
        let phase = -RAD_PER_PS_PER_CM1 * line.rot_shift * t;
        acc += line.amplitude * Complex64::from_polar(1.0, phase);
    }
    let frame = if frame_shift == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        Complex64::from_polar(1.0, RAD_PER_PS_PER_CM1 * frame_shift * t)
    };
    acc * frame * decay.factor(t)
}

/// Number of samples of the uniform grid t0, t0+dt, … ≤ t1.
pub fn grid_len(t0: f64, t1: f64, dt: f64) -> usize {
    ((t1 - t0) / dt + 1e-9).floor() as usize + 1
}

/// Undecayed Σ a·exp(−iωt) at t = t0 + i·dt for `n` samples.
///
/// Uses a per-line phasor recurrence restarted every [`BLOCK`] samples;
/// blocks are independent so the result does not depend on thread count.
pub(crate) fn phasor_sum_uniform(lines: &[(f64, Complex64)], t0: f64, dt: f64, n: usize) -> Vec<Complex64> {
    let steps: Vec<Complex64> = lines.iter().map(|&(w, _)| Complex64::from_polar(1.0, -w * dt)).collect();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    out.par_chunks_mut(BLOCK).enumerate().for_each(|(b, chunk)| {
        let start = t0 + (b * BLOCK) as f64 * dt;
        for (&(w, a), &step) in lines.iter().zip(&steps) {
            let mut z = a * Complex64::from_polar(1.0, -w * start);
            for slot in chunk.iter_mut() {
                *slot += z;
                z *= step;
            }
        }
    });
    out
}

pub(crate) fn line_frequencies(table: &LineTable) -> Vec<(f64, Complex64)> {
    table
        .lines
        .iter()
        .map(|l| (RAD_PER_PS_PER_CM1 * l.rot_shift, l.amplitude))
        .collect()
}

/// Samples ρ₀₁ on t0..=t1 step dt (ps); with `probe_fwhm_fs` the intensity
/// is convolved with a unit-area Gaussian of that FWHM.
pub fn signal_trace(
    table: &LineTable,
    decay: DecayModel,
    t0: f64,
    t1: f64,
    dt: f64,
    probe_fwhm_fs: Option<f64>,
) -> Result<CoherenceTrace> {
    decay.validate()?;
    if !(t0 >= 0.0) || !(t1 > t0) || !(dt > 0.0) || !t1.is_finite() {
        return Err(Error::Domain(format!(
            "time grid needs 0 <= t0 < t1 and dt > 0, got t0={t0}, t1={t1}, dt={dt}"
        )));
    }
    if let Some(f) = probe_fwhm_fs {
        if !(f > 0.0) || !f.is_finite() {
            return Err(Error::Domain(format!("probe FWHM must be positive, got {f} fs")));
        }
    }
    let n = grid_len(t0, t1, dt);
    let times: Vec<f64> = (0..n).map(|i| t0 + i as f64 * dt).collect();
    let mut rho = phasor_sum_uniform(&line_frequencies(table), t0, dt, n);
    if decay != DecayModel::None {
        for (r, &t) in rho.iter_mut().zip(&times) {
            *r *= decay.factor(t);
        }
    }
    let intensity: Vec<f64> = rho.iter().map(|r| r.norm_sqr()).collect();
    let signal = match probe_fwhm_fs {
        Some(f) => gaussian_convolve(&intensity, sigma_from_fwhm(f * 1e-3) / dt),
        None => intensity,
    };
    Ok(CoherenceTrace {
        times,
        rho,
        signal,
        frame_ref: table.nu_ref,
        decay,
        probe_fwhm_fs,
        aliasing_warning: aliasing_check(table, dt),
    })
}

fn aliasing_check(table: &LineTable, dt: f64) -> Option<String> {
    let max_amp = table.lines.iter().map(|l| l.amplitude.norm()).fold(0.0, f64::max);
    if max_amp == 0.0 {
        return None;
    }
    let (lo, hi) = table
        .lines
        .iter()
        .filter(|l| l.amplitude.norm() >= ALIAS_AMPLITUDE_FLOOR * max_amp)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), l| {
            (lo.min(l.rot_shift), hi.max(l.rot_shift))
        });
    let spread = hi - lo;
    if spread <= 0.0 {
        return None;
    }
    let period = 1.0 / (C_CM_PER_PS * spread);
    (period < 2.0 * dt).then(|| {
        format!(
            "fastest line beat period {period:.4} ps is shorter than 2*dt = {:.4} ps; fine structure is aliased",
            2.0 * dt
        )
    })
}

/// Discrete convolution with a Gaussian of standard deviation `sigma`
/// samples, renormalized at the edges.
pub(crate) fn gaussian_convolve(y: &[f64], sigma: f64) -> Vec<f64> {
    if sigma < 1e-3 {
        return y.to_vec();
    }
    let half = (4.0 * sigma).ceil() as usize;
    let kernel: Vec<f64> = (0..=half)
        .map(|k| (-(k as f64).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let n = y.len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            let (mut acc, mut norm) = (0.0, 0.0);
            for (j, &v) in y.iter().enumerate().take(hi + 1).skip(lo) {
                let w = kernel[i.abs_diff(j)];
                acc += w * v;
                norm += w;
            }
            acc / norm
        })
        .collect()
}

impl CoherenceTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dt(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.times[1] - self.times[0]
        }
    }

    /// Signal divided by its maximum.
    pub fn normalized_signal(&self) -> Vec<f64> {
        let max = self.signal.iter().copied().fold(0.0, f64::max);
        if max == 0.0 {
            return self.signal.clone();
        }
        self.signal.iter().map(|s| s / max).collect()
    }

    /// (time, signal) of the largest sample with t ≥ `t_min`.
    pub fn max_after(&self, t_min: f64) -> Option<(f64, f64)> {
        self.times
            .iter()
            .zip(&self.signal)
            .filter(|(t, _)| **t >= t_min)
            .fold(None, |best: Option<(f64, f64)>, (&t, &s)| match best {
                Some(b) if b.1 >= s => Some(b),
                _ => Some((t, s)),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{build_ensemble, SpinWeights, DEFAULT_TAIL_TOL};
    use crate::excitation::{enumerate_lines, Branch};
    use crate::molmodel::{ConstantsDatabase, SpectroscopicConstants};

    fn consts(gamma: f64) -> SpectroscopicConstants {
        let mut c = ConstantsDatabase::builtin().get("N2_X").unwrap().clone();
        c.gamma_e = Some(gamma);
        c
    }

    /// Q-only table with thermal-weight amplitudes (flat A₂).
    fn q_table(c: &SpectroscopicConstants) -> LineTable {
        let e = build_ensemble(295.0, c.rotational_constants(0).0, SpinWeights::default(), DEFAULT_TAIL_TOL).unwrap();
        enumerate_lines(&e, c, 1).unwrap().q_only()
    }

    #[test]
    fn unit_coherence_at_zero() {
        let t = q_table(&consts(-2.6e-5));
        let r = coherence_at(&t, DecayModel::None, 0.0);
        assert!((r - Complex64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn full_revival_without_centrifugal_coupling() {
        let c = consts(-2.6e-5);
        assert_eq!(c.beta_e(), 0.0);
        let t = q_table(&c);
        let big_t = c.revival_time(1).unwrap();
        let r0 = coherence_at(&t, DecayModel::None, 0.0);
        let rt = coherence_at(&t, DecayModel::None, big_t);
        assert!((rt.norm() - r0.norm()).abs() < 1e-10 * r0.norm());
    }

    #[test]
    fn anti_revival_at_half_period() {
        let c = consts(-2.6e-5);
        let t = q_table(&c);
        let big_t = c.revival_time(1).unwrap();
        // Independent parity sum: phase π·J(J+1)/2 → (−1)^{J(J+1)/2}.
        let e = build_ensemble(295.0, c.rotational_constants(0).0, SpinWeights::default(), DEFAULT_TAIL_TOL).unwrap();
        let expect: f64 = e
            .weights
            .iter()
            .enumerate()
            .map(|(j, w)| if (j * (j + 1) / 2) % 2 == 0 { *w } else { -*w })
            .sum::<f64>()
            .abs();
        let got = coherence_at(&t, DecayModel::None, 0.5 * big_t).norm();
        // Centrifugal distortion D_v adds a small residual phase.
        assert!((got - expect).abs() < 2e-2, "{got} vs {expect}");
        assert!(got < 0.05);
    }

    #[test]
    fn trace_matches_pointwise_evaluation() {
        let c = consts(-2.6e-5);
        let t = q_table(&c);
        let decay = DecayModel::Collisional { tau_c_ps: 256.0 };
        let tr = signal_trace(&t, decay, 0.0, 1100.0, 0.5, None).unwrap();
        assert_eq!(tr.len(), 2201);
        assert_eq!(tr.rho.len(), tr.signal.len());
        for i in (0..tr.len()).step_by(37) {
            let direct = coherence_at(&t, decay, tr.times[i]);
            assert!((tr.rho[i] - direct).norm() < 1e-12, "t={}", tr.times[i]);
            assert_eq!(tr.signal[i], tr.rho[i].norm_sqr());
        }
        assert!(tr.aliasing_warning.is_none());
    }

    #[test]
    fn rejects_bad_grid_and_decay() {
        let t = q_table(&consts(-2.6e-5));
        assert!(signal_trace(&t, DecayModel::None, 5.0, 1.0, 0.5, None).is_err());
        assert!(signal_trace(&t, DecayModel::None, -1.0, 1.0, 0.5, None).is_err());
        assert!(signal_trace(&t, DecayModel::None, 0.0, 1.0, 0.0, None).is_err());
        assert!(signal_trace(&t, DecayModel::Collisional { tau_c_ps: 0.0 }, 0.0, 1.0, 0.1, None).is_err());
        assert!(signal_trace(&t, DecayModel::None, 0.0, 1.0, 0.1, Some(-3.0)).is_err());
    }

    #[test]
    fn coarse_grid_on_full_branches_warns() {
        let c = consts(-2.6e-5);
        let e = build_ensemble(295.0, c.rotational_constants(0).0, SpinWeights::default(), DEFAULT_TAIL_TOL).unwrap();
        let full = enumerate_lines(&e, &c, 1).unwrap();
        assert!(full.branch(Branch::S).count() > 0);
        let tr = signal_trace(&full, DecayModel::None, 0.0, 50.0, 0.5, None).unwrap();
        assert!(tr.aliasing_warning.is_some());
        let fine = signal_trace(&full, DecayModel::None, 0.0, 1.0, 0.01, None).unwrap();
        assert!(fine.aliasing_warning.is_none());
    }

    #[test]
    fn probe_smearing_preserves_area() {
        let t = q_table(&consts(-2.6e-5));
        let raw = signal_trace(&t, DecayModel::None, 0.0, 60.0, 0.01, None).unwrap();
        let smeared = signal_trace(&t, DecayModel::None, 0.0, 60.0, 0.01, Some(500.0)).unwrap();
        assert_eq!(raw.rho, smeared.rho);
        // Away from the t=0 transient, where the window boundary cuts no steep slope.
        let interior = 1000..raw.len() - 200;
        let a: f64 = raw.signal[interior.clone()].iter().sum();
        let b: f64 = smeared.signal[interior].iter().sum();
        assert!((a / b - 1.0).abs() < 1e-3);
        // A 130 fs probe barely changes ps-scale structure.
        let light = signal_trace(&t, DecayModel::None, 0.0, 60.0, 0.5, Some(130.0)).unwrap();
        let bare = signal_trace(&t, DecayModel::None, 0.0, 60.0, 0.5, None).unwrap();
        for (x, y) in light.signal.iter().zip(&bare.signal) {
            assert!((x - y).abs() <= 1e-12 * y.max(1e-3));
        }
    }

    #[test]
    fn deterministic_under_single_thread() {
        let t = q_table(&consts(-2.6e-5));
        let a = signal_trace(&t, DecayModel::None, 0.0, 300.0, 0.5, None).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| signal_trace(&t, DecayModel::None, 0.0, 300.0, 0.5, None).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn max_after_skips_early_times() {
        let t = q_table(&consts(-2.6e-5));
        let tr = signal_trace(&t, DecayModel::None, 0.0, 1100.0, 0.5, None).unwrap();
        let (tm, _) = tr.max_after(25.0).unwrap();
        assert!((tm - 960.0).abs() <= 0.5, "{tm}");
        assert_eq!(tr.max_after(2000.0), None);
    }
}
