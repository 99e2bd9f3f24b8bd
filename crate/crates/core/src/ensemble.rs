//! Thermal rotational populations with nuclear-spin alternation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::HC_OVER_K;

/// Hard cap on the highest rotational level kept.
pub const J_MAX_CAP: u32 = 200;

/// Default truncation tolerance on the neglected population tail.
pub const DEFAULT_TAIL_TOL: f64 = 1e-8;

/// Relative nuclear-spin statistical weights of even and odd J.
///
/// ¹⁴N₂ has even J as the heavier (2) species.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinWeights {
    pub even: f64,
    pub odd: f64,
}

impl Default for SpinWeights {
    fn default() -> Self {
        SpinWeights { even: 2.0, odd: 1.0 }
    }
}

impl SpinWeights {
    pub fn for_j(&self, j: u32) -> f64 {
        if j % 2 == 0 {
            self.even
        } else {
            self.odd
        }
    }
}

/// Normalized populations P_J for J = 0..=j_max.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThermalEnsemble {
    pub temperature: f64,
    pub b0: f64,
    pub spin: SpinWeights,
    pub weights: Vec<f64>,
}

impl ThermalEnsemble {
    pub fn j_max(&self) -> u32 {
        self.weights.len() as u32 - 1
    }

    pub fn weight(&self, j: u32) -> f64 {
        self.weights.get(j as usize).copied().unwrap_or(0.0)
    }

    /// Population-weighted standard deviation of J.
    pub fn thermal_j_spread(&self) -> f64 {
        let mean: f64 = self
            .weights
            .iter()
            .enumerate()
            .map(|(j, w)| j as f64 * w)
            .sum();
        let var: f64 = self
            .weights
            .iter()
            .enumerate()
            .map(|(j, w)| w * (j as f64 - mean).powi(2))
            .sum();
        var.max(0.0).sqrt()
    }

    /// Most populated level.
    pub fn most_populated(&self) -> u32 {
        self.weights
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |best, (j, &w)| if w > best.1 { (j, w) } else { best })
            .0 as u32
    }

    /// Number of levels whose weight exceeds `fraction` of the largest.
    pub fn populated_count(&self, fraction: f64) -> usize {
        let max = self.weights.iter().copied().fold(0.0, f64::max);
        self.weights.iter().filter(|&&w| w > fraction * max).count()
    }

    /// `J,weight` CSV dump.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("J,weight\n");
        for (j, w) in self.weights.iter().enumerate() {
            out.push_str(&format!("{j},{w}\n"));
        }
        out
    }
}

/// Builds g_J (2J+1) exp(−hcB₀J(J+1)/kT), normalized and truncated where
/// the neglected tail falls below `tail_tol` of the total.
pub fn build_ensemble(
    temperature: f64,
    b0: f64,
    spin: SpinWeights,
    tail_tol: f64,
) -> Result<ThermalEnsemble> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::Domain(format!("temperature must be > 0 K, got {temperature}")));
    }
    if !(b0 > 0.0) || !b0.is_finite() {
        return Err(Error::Domain(format!("B0 must be > 0, got {b0}")));
    }
    if !(spin.even > 0.0) || !(spin.odd > 0.0) {
        return Err(Error::Domain("spin weights must be positive".into()));
    }
    if !(tail_tol > 0.0 && tail_tol < 1.0) {
        return Err(Error::Domain(format!("tail_tol must be in (0, 1), got {tail_tol}")));
    }

    let beta = HC_OVER_K * b0 / temperature;
    let raw: Vec<f64> = (0..=J_MAX_CAP)
        .map(|j| {
            let jf = j as f64;
            spin.for_j(j) * (2.0 * jf + 1.0) * (-beta * jf * (jf + 1.0)).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();

    // Smallest j_max whose discarded tail is below tolerance.
    let mut tail = 0.0;
    let mut j_max = J_MAX_CAP as usize;
    for j in (1..raw.len()).rev() {
        tail += raw[j];
        if tail >= tail_tol * total {
            break;
        }
        j_max = j - 1;
    }

    let kept = &raw[..=j_max];
    let norm: f64 = kept.iter().sum();
    let weights = kept.iter().map(|w| w / norm).collect();
    Ok(ThermalEnsemble {
        temperature,
        b0,
        spin,
        weights,
    })
}
