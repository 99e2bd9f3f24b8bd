#![allow(dead_code)]

use num_complex::Complex64;
use rovib::ensemble::{build_ensemble, SpinWeights, ThermalEnsemble, DEFAULT_TAIL_TOL};
use rovib::excitation::{enumerate_lines, LineTable};
use rovib::molmodel::{ConstantsDatabase, SpectroscopicConstants};

pub fn n2(gamma_e: f64) -> SpectroscopicConstants {
    let mut c = ConstantsDatabase::builtin().get("N2_X").unwrap().clone();
    c.gamma_e = Some(gamma_e);
    c
}

pub fn ensemble(c: &SpectroscopicConstants, temperature: f64) -> ThermalEnsemble {
    build_ensemble(temperature, c.rotational_constants(0).0, SpinWeights::default(), DEFAULT_TAIL_TOL).unwrap()
}

/// Q-only lines with flat envelope: amplitudes are the thermal weights.
pub fn q_only(c: &SpectroscopicConstants, temperature: f64) -> LineTable {
    enumerate_lines(&ensemble(c, temperature), c, 1).unwrap().q_only()
}

pub fn t_rovib(c: &SpectroscopicConstants) -> f64 {
    c.revival_time(1).unwrap()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// Hand evaluation of Σ a·exp(−i2πc[F(1,J') − F(0,J)]t)·exp(−t/τ) from the
/// Dunham constants, independent of the library's term-value code.
pub fn oracle(c: &SpectroscopicConstants, lines: &[(u32, u32, Complex64)], tau: Option<f64>, t: f64) -> Complex64 {
    let c_cm_per_ps = 0.029_979_245_8;
    let b = |v: f64| c.b_e - c.alpha_e * (v + 0.5) + c.gamma_e.unwrap_or(0.0) * (v + 0.5).powi(2);
    let d = |v: f64| c.d_e + c.beta_e.unwrap_or(0.0) * (v + 0.5);
    let f = |v: f64, j: u32| {
        let n = (j * (j + 1)) as f64;
        b(v) * n - d(v) * n * n
    };
    let mut sum = Complex64::new(0.0, 0.0);
    for &(jl, ju, a) in lines {
        let shift = f(1.0, ju) - f(0.0, jl);
        let phase = -2.0 * std::f64::consts::PI * c_cm_per_ps * shift * t;
        sum += a * Complex64::new(phase.cos(), phase.sin());
    }
    sum * tau.map_or(1.0, |tau| (-t / tau).exp())
}

pub fn toy_table(c: &SpectroscopicConstants, amps: &[Complex64; 5]) -> LineTable {
    let e = ThermalEnsemble {
        temperature: 50.0,
        b0: c.rotational_constants(0).0,
        spin: SpinWeights::default(),
        weights: vec![0.5, 0.3, 0.2],
    };
    // Q(0), Q(1), Q(2), S(0), S(1), S(2), O(2): keep Q(0), Q(2), S(0), S(1), O(2).
    let mut t = enumerate_lines(&e, c, 1).unwrap();
    t.lines = [0usize, 2, 3, 4, 6].iter().map(|&i| t.lines[i].clone()).collect();
    for (l, a) in t.lines.iter_mut().zip(amps) {
        l.amplitude = *a;
    }
    t
}
