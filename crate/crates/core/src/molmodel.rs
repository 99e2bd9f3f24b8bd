//! Dunham-expansion term values, v-dependent rotational constants, Raman
//! transition wavenumbers and the characteristic time scales they imply.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::C_CM_PER_PS;

/// Constants database shipped with the crate (N₂ X¹Σg⁺ and A³Σu⁺).
pub const BUILTIN_DATABASE: &str = include_str!("../data/constants.json");

/// Spectroscopic constants of one electronic state, all in cm⁻¹.
///
/// `gamma_e` and `beta_e` are optional; an absent value evaluates exactly
/// like an explicit zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectroscopicConstants {
    #[serde(default)]
    pub label: String,
    #[serde(rename = "Te")]
    pub te: f64,
    #[serde(rename = "we")]
    pub omega_e: f64,
    #[serde(rename = "wexe")]
    pub omega_e_xe: f64,
    #[serde(rename = "weye")]
    pub omega_e_ye: f64,
    #[serde(rename = "Be")]
    pub b_e: f64,
    pub alpha_e: f64,
    pub gamma_e: Option<f64>,
    #[serde(rename = "De")]
    pub d_e: f64,
    pub beta_e: Option<f64>,
}

/// One ro-vibrational level; `energy` excludes Te.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoVibLevel {
    pub v: u32,
    pub j: u32,
    pub energy: f64,
}

/// Revival and dephasing time scales in ps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CharacteristicTimes {
    /// Full ro-vibrational revival; `None` when B_v1 = B_0 (no revival).
    pub t_rovib: Option<f64>,
    /// Rotational revival 1/(2cB₀).
    pub t_rot: f64,
    /// T_RoVib/ΔJ². Order-of-magnitude only.
    pub t_dephasing_estimate: Option<f64>,
}

impl SpectroscopicConstants {
    pub fn gamma_e(&self) -> f64 {
        self.gamma_e.unwrap_or(0.0)
    }

    pub fn beta_e(&self) -> f64 {
        self.beta_e.unwrap_or(0.0)
    }

    /// Checks ωe > 0, Be > 0, De ≥ 0 and that every value is finite.
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.te,
            self.omega_e,
            self.omega_e_xe,
            self.omega_e_ye,
            self.b_e,
            self.alpha_e,
            self.gamma_e(),
            self.d_e,
            self.beta_e(),
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("non-finite constant in state '{}'", self.label)));
        }
        if self.omega_e <= 0.0 || self.b_e <= 0.0 || self.d_e < 0.0 {
            return Err(Error::Domain(format!(
                "state '{}' is unphysical: requires we > 0, Be > 0, De >= 0",
                self.label
            )));
        }
        Ok(())
    }

    /// G(v) = ωe(v+½) − ωexe(v+½)² + ωeye(v+½)³.
    pub fn vibrational_term(&self, v: u32) -> f64 {
        let x = v as f64 + 0.5;
        self.omega_e * x - self.omega_e_xe * x * x + self.omega_e_ye * x * x * x
    }

    /// (B_v, D_v) from Be, αe, γe, De, βe.
    pub fn rotational_constants(&self, v: u32) -> (f64, f64) {
        let x = v as f64 + 0.5;
        let b_v = self.b_e - self.alpha_e * x + self.gamma_e() * x * x;
        let d_v = self.d_e + self.beta_e() * x;
        (b_v, d_v)
    }

    /// F(v,J) = B_v J(J+1) − D_v J²(J+1)².
    pub fn rotational_term(&self, v: u32, j: u32) -> f64 {
        let (b_v, d_v) = self.rotational_constants(v);
        let n = j_factor(j);
        b_v * n - d_v * n * n
    }

    pub fn level(&self, v: u32, j: u32) -> RoVibLevel {
        RoVibLevel {
            v,
            j,
            energy: self.vibrational_term(v) + self.rotational_term(v, j),
        }
    }

    /// Band origin G(v1) − G(0); the rotating-frame reference for v=0↔v1.
    pub fn band_origin(&self, v1: u32) -> f64 {
        self.vibrational_term(v1) - self.vibrational_term(0)
    }

    /// Rotational part F(v1,J') − F(0,J) of a Raman transition.
    ///
    /// Kept separate from the band origin so the small rotational shifts
    /// are not computed as a difference of two ~2000 cm⁻¹ numbers.
    pub fn rotational_shift(&self, j_lower: u32, j_upper: i64, v1: u32) -> Result<f64> {
        let j_upper = check_transition(j_lower, j_upper)?;
        Ok(self.rotational_term(v1, j_upper) - self.rotational_term(0, j_lower))
    }

    /// [G(v1)+F(v1,J')] − [G(0)+F(0,J)] for J' ∈ {J−2, J, J+2}.
    pub fn transition_wavenumber(&self, j_lower: u32, j_upper: i64, v1: u32) -> Result<f64> {
        Ok(self.band_origin(v1) + self.rotational_shift(j_lower, j_upper, v1)?)
    }

    /// T_RoVib = 1/(2c|B_v1 − B_0|), T_rot = 1/(2cB₀), T_deph ≈ T_RoVib/ΔJ².
    pub fn characteristic_times(&self, v1: u32, delta_j: f64) -> Result<CharacteristicTimes> {
        if !(delta_j > 0.0) || !delta_j.is_finite() {
            return Err(Error::Domain(format!("thermal ΔJ must be positive, got {delta_j}")));
        }
        let (b0, _) = self.rotational_constants(0);
        let (b1, _) = self.rotational_constants(v1);
        let diff = (b1 - b0).abs();
        let t_rovib = (diff > 0.0).then(|| 1.0 / (2.0 * C_CM_PER_PS * diff));
        Ok(CharacteristicTimes {
            t_rovib,
            t_rot: 1.0 / (2.0 * C_CM_PER_PS * b0),
            t_dephasing_estimate: t_rovib.map(|t| t / (delta_j * delta_j)),
        })
    }

    /// Full ro-vibrational revival time, or `None` without ro-vibrational coupling.
    pub fn revival_time(&self, v1: u32) -> Option<f64> {
        let (b0, _) = self.rotational_constants(0);
        let (b1, _) = self.rotational_constants(v1);
        let diff = (b1 - b0).abs();
        (diff > 0.0).then(|| 1.0 / (2.0 * C_CM_PER_PS * diff))
    }
}

fn j_factor(j: u32) -> f64 {
    let j = j as f64;
    j * (j + 1.0)
}

fn check_transition(j_lower: u32, j_upper: i64) -> Result<u32> {
    if j_upper < 0 {
        return Err(Error::InvalidTransition {
            j_lower,
            j_upper,
            reason: "upper J is negative (O branch needs J >= 2)",
        });
    }
    let dj = j_upper - j_lower as i64;
    if !matches!(dj, -2 | 0 | 2) {
        return Err(Error::InvalidTransition {
            j_lower,
            j_upper,
            reason: "Raman selection rule allows only dJ = -2, 0, +2",
        });
    }
    Ok(j_upper as u32)
}

/// Electronic-state constants keyed by state name (e.g. `N2_X`).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConstantsDatabase {
    pub states: BTreeMap<String, SpectroscopicConstants>,
}

impl ConstantsDatabase {
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN_DATABASE).expect("builtin constants database is valid JSON")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn get(&self, state: &str) -> Result<&SpectroscopicConstants> {
        self.states
            .get(state)
            .ok_or_else(|| Error::UnknownState(state.to_string()))
    }
}
