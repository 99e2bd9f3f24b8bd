//! O/Q/S Raman line enumeration and first-order excitation amplitudes.
//!
//! The vibrational matrix element √(ħ/2mω₀₁) is common to every v=0→1 line
//! and is folded into the global amplitude scale. Rotational matrix elements
//! use the 2D-rotator averages ⟨cos²θ⟩ = ½ (ΔJ=0) and ¼ (ΔJ=±2).

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ensemble::ThermalEnsemble;
use crate::error::{Error, Result};
use crate::molmodel::SpectroscopicConstants;
use crate::pulses::{uniform_grid, TwoPhotonSpectrum};

/// Largest allowed linear-vs-quadratic interpolation difference on A₂.
pub const INTERPOLATION_TOL: f64 = 1e-6;

/// Default spacing of the two-photon grid used for amplitude lookup, cm⁻¹.
pub const DEFAULT_BAND_STEP: f64 = 0.025;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Branch {
    O,
    Q,
    S,
}

impl Branch {
    pub fn delta_j(self) -> i64 {
        match self {
            Branch::O => -2,
            Branch::Q => 0,
            Branch::S => 2,
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Branch::O => "O",
            Branch::Q => "Q",
            Branch::S => "S",
        };
        f.write_str(s)
    }
}

/// One |v=0,J⟩ → |v1,J′⟩ Raman transition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RamanLine {
    pub branch: Branch,
    pub j_lower: u32,
    pub j_upper: u32,
    /// Transition wavenumber, cm⁻¹.
    pub wavenumber: f64,
    /// F(v1,J′) − F(0,J): detuning from the band origin, cm⁻¹.
    pub rot_shift: f64,
    /// Thermal weight of the lower level.
    pub population: f64,
    pub amplitude: Complex64,
}

impl RamanLine {
    pub fn label(&self) -> String {
        format!("{}({})", self.branch, self.j_lower)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineTable {
    pub lines: Vec<RamanLine>,
    /// Band origin G(v1) − G(0), the rotating-frame reference, cm⁻¹.
    pub nu_ref: f64,
    pub metadata: Vec<(String, String)>,
}

/// Polarizability derivatives; only their ratio enters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarizabilityDerivatives {
    pub a_perp_prime: f64,
    pub delta_a_prime: f64,
}

impl Default for PolarizabilityDerivatives {
    /// Static N₂ values 8.7/Re and 13.3/Re with Re = 1.
    fn default() -> Self {
        PolarizabilityDerivatives {
            a_perp_prime: 8.7,
            delta_a_prime: 13.3,
        }
    }
}

/// Q to O/S amplitude ratio N_Q/SO.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchingRatio {
    Finite(f64),
    /// Δα′ = 0: O and S lines are not excited.
    NoOsCoupling,
}

impl BranchingRatio {
    /// Amplitude factor b applied to O and S lines.
    pub fn os_factor(&self) -> f64 {
        match *self {
            BranchingRatio::Finite(r) => 1.0 / r,
            BranchingRatio::NoOsCoupling => 0.0,
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            BranchingRatio::Finite(r) => r,
            BranchingRatio::NoOsCoupling => f64::INFINITY,
        }
    }

    /// Q to O/S signal intensity ratio N².
    pub fn intensity_ratio(&self) -> f64 {
        self.value().powi(2)
    }
}

/// N = (α′⊥ + ½Δα′)/(¼Δα′).
pub fn branching_ratio(p: &PolarizabilityDerivatives) -> Result<BranchingRatio> {
    if !p.a_perp_prime.is_finite() || !p.delta_a_prime.is_finite() {
        return Err(Error::Domain("polarizability derivatives must be finite".into()));
    }
    if p.delta_a_prime == 0.0 {
        return Ok(BranchingRatio::NoOsCoupling);
    }
    let n = (p.a_perp_prime + 0.5 * p.delta_a_prime) / (0.25 * p.delta_a_prime);
    Ok(BranchingRatio::Finite(n.abs()))
}

/// Q, S and O lines for every level of the ensemble, in that order, with the
/// thermal weight as placeholder amplitude.
pub fn enumerate_lines(
    ens: &ThermalEnsemble,
    consts: &SpectroscopicConstants,
    v1: u32,
) -> Result<LineTable> {
    if v1 == 0 {
        return Err(Error::Domain("upper vibrational level must be >= 1".into()));
    }
    consts.validate()?;
    let nu_ref = consts.band_origin(v1);
    let mut lines = Vec::with_capacity(3 * ens.weights.len());
    for branch in [Branch::Q, Branch::S, Branch::O] {
        for (j, &w) in ens.weights.iter().enumerate() {
            let j = j as u32;
            let j_upper = j as i64 + branch.delta_j();
            if j_upper < 0 {
                continue;
            }
            let rot_shift = consts.rotational_shift(j, j_upper, v1)?;
            lines.push(RamanLine {
                branch,
                j_lower: j,
                j_upper: j_upper as u32,
                wavenumber: nu_ref + rot_shift,
                rot_shift,
                population: w,
                amplitude: Complex64::new(w, 0.0),
            });
        }
    }
    Ok(LineTable {
        lines,
        nu_ref,
        metadata: vec![
            ("state".into(), consts.label.clone()),
            ("temperature_k".into(), ens.temperature.to_string()),
            ("v1".into(), v1.to_string()),
        ],
    })
}

/// amplitude = P_J · b · A₂(ν) with b = 1 (Q) or 1/N (O, S).
pub fn assign_amplitudes(
    table: &LineTable,
    a2: &TwoPhotonSpectrum,
    ratio: BranchingRatio,
) -> Result<LineTable> {
    let rel = a2.interpolation_error();
    if rel > INTERPOLATION_TOL {
        return Err(Error::InterpolationTooCoarse {
            rel_diff: rel,
            limit: INTERPOLATION_TOL,
        });
    }
    assign_amplitudes_unchecked(table, a2, ratio)
}

/// [`assign_amplitudes`] without the interpolation-accuracy check, for
/// callers that have already validated `a2`.
pub(crate) fn assign_amplitudes_unchecked(
    table: &LineTable,
    a2: &TwoPhotonSpectrum,
    ratio: BranchingRatio,
) -> Result<LineTable> {
    let (lo, hi) = a2.range();
    let os = ratio.os_factor();
    let mut lines = table.lines.clone();
    for line in &mut lines {
        let b = match line.branch {
            Branch::Q => 1.0,
            Branch::O | Branch::S => os,
        };
        if b == 0.0 {
            line.amplitude = Complex64::new(0.0, 0.0);
            continue;
        }
        let env = a2.interpolate(line.wavenumber).ok_or_else(|| Error::OutOfBand {
            line: line.label(),
            wavenumber: line.wavenumber,
            lo,
            hi,
        })?;
        line.amplitude = env * (line.population * b);
    }
    let mut metadata = table.metadata.clone();
    metadata.push(("branching_ratio".into(), ratio.value().to_string()));
    Ok(LineTable {
        lines,
        nu_ref: table.nu_ref,
        metadata,
    })
}

/// Uniform Raman-shift grid covering every line of `table` with `margin`
/// cm⁻¹ to spare.
pub fn band_grid(table: &LineTable, margin: f64, step: f64) -> Vec<f64> {
    let (lo, hi) = table
        .lines
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), l| {
            (lo.min(l.wavenumber), hi.max(l.wavenumber))
        });
    uniform_grid(lo - margin, hi + margin, step)
}

impl LineTable {
    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn branch(&self, b: Branch) -> impl Iterator<Item = &RamanLine> {
        self.lines.iter().filter(move |l| l.branch == b)
    }

    /// Σ|amplitude| over the given branches.
    pub fn summed_magnitude(&self, branches: &[Branch]) -> f64 {
        self.lines
            .iter()
            .filter(|l| branches.contains(&l.branch))
            .map(|l| l.amplitude.norm())
            .sum()
    }

    /// Copy without the O and S lines.
    pub fn q_only(&self) -> LineTable {
        LineTable {
            lines: self.branch(Branch::Q).cloned().collect(),
            nu_ref: self.nu_ref,
            metadata: self.metadata.clone(),
        }
    }

    /// Population-weighted mean Q-branch wavenumber.
    pub fn q_centroid(&self) -> f64 {
        let (w, m) = self
            .branch(Branch::Q)
            .fold((0.0, 0.0), |(w, m), l| (w + l.population, m + l.population * l.rot_shift));
        self.nu_ref + m / w
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        out.push_str(&format!("# nu_ref_cm1: {}\n", self.nu_ref));
        out.push_str("branch,J_lower,J_upper,wavenumber_cm1,re_amplitude,im_amplitude\n");
        for l in &self.lines {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                l.branch, l.j_lower, l.j_upper, l.wavenumber, l.amplitude.re, l.amplitude.im
            ));
        }
        out
    }
}
