//! Nonlinear least-squares retrieval of (γe, τ_c, scale, t_offset) from a
//! CARS trace.
//!
//! The model is the peak-normalized |ρ₀₁|² of the forward pipeline with a
//! fixed two-photon spectrum; only the line frequencies and the decay change
//! between evaluations. Minimization is a bounded Nelder–Mead search in
//! unit-box coordinates with seeded jittered restarts.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::phasor_sum_uniform;
use crate::ensemble::ThermalEnsemble;
use crate::error::{Error, Result};
use crate::excitation::{assign_amplitudes, assign_amplitudes_unchecked, enumerate_lines, BranchingRatio, LineTable};
use crate::molmodel::SpectroscopicConstants;
use crate::pulses::TwoPhotonSpectrum;
use crate::units::RAD_PER_PS_PER_CM1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamName {
    GammaE,
    TauC,
    Scale,
    TOffset,
    BetaE,
}

impl ParamName {
    pub const ALL: [ParamName; 5] = [
        ParamName::GammaE,
        ParamName::TauC,
        ParamName::Scale,
        ParamName::TOffset,
        ParamName::BetaE,
    ];

    /// Default absolute termination tolerance on the simplex extent.
    pub fn default_tol(self) -> f64 {
        match self {
            ParamName::GammaE => 1e-10,
            ParamName::TauC => 1e-4,
            ParamName::Scale => 1e-7,
            ParamName::TOffset => 1e-5,
            ParamName::BetaE => 1e-12,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gamma_e" => Ok(ParamName::GammaE),
            "tau_c" => Ok(ParamName::TauC),
            "scale" => Ok(ParamName::Scale),
            "t_offset" => Ok(ParamName::TOffset),
            "beta_e" => Ok(ParamName::BetaE),
            _ => Err(Error::Parse(format!(
                "unknown fit parameter '{s}' (expected gamma_e, tau_c, scale, t_offset or beta_e)"
            ))),
        }
    }
}

impl fmt::Display for ParamName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ParamName::GammaE => "gamma_e",
            ParamName::TauC => "tau_c",
            ParamName::Scale => "scale",
            ParamName::TOffset => "t_offset",
            ParamName::BetaE => "beta_e",
        };
        f.write_str(s)
    }
}

/// Full model parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// cm⁻¹
    pub gamma_e: f64,
    /// Amplitude decay time, ps.
    pub tau_c: f64,
    pub scale: f64,
    /// ps; the model is evaluated at t − t_offset.
    pub t_offset: f64,
    /// cm⁻¹
    pub beta_e: f64,
}

impl ModelParams {
    pub fn get(&self, name: ParamName) -> f64 {
        match name {
            ParamName::GammaE => self.gamma_e,
            ParamName::TauC => self.tau_c,
            ParamName::Scale => self.scale,
            ParamName::TOffset => self.t_offset,
            ParamName::BetaE => self.beta_e,
        }
    }

    pub fn set(&mut self, name: ParamName, value: f64) {
        match name {
            ParamName::GammaE => self.gamma_e = value,
            ParamName::TauC => self.tau_c = value,
            ParamName::Scale => self.scale = value,
            ParamName::TOffset => self.t_offset = value,
            ParamName::BetaE => self.beta_e = value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeParam {
    pub name: ParamName,
    pub lower: f64,
    pub upper: f64,
    /// Absolute termination tolerance.
    pub tol: f64,
}

impl FreeParam {
    pub fn new(name: ParamName, lower: f64, upper: f64) -> Self {
        FreeParam {
            name,
            lower,
            upper,
            tol: name.default_tol(),
        }
    }

    /// Default search box for each parameter.
    pub fn default_for(name: ParamName) -> Self {
        match name {
            ParamName::GammaE => FreeParam::new(name, -1e-4, 5e-5),
            ParamName::TauC => FreeParam::new(name, 10.0, 2000.0),
            ParamName::Scale => FreeParam::new(name, 0.05, 20.0),
            ParamName::TOffset => FreeParam::new(name, -5.0, 5.0),
            ParamName::BetaE => FreeParam::new(name, -1e-6, 1e-6),
        }
    }

    fn to_unit(&self, v: f64) -> f64 {
        (v - self.lower) / (self.upper - self.lower)
    }

    fn from_unit(&self, x: f64) -> f64 {
        self.lower + x.clamp(0.0, 1.0) * (self.upper - self.lower)
    }
}

/// Forward pipeline with everything but (γe, βe, τ_c, t_offset) frozen.
#[derive(Debug, Clone)]
pub struct ForwardModel {
    pub constants: SpectroscopicConstants,
    pub ensemble: ThermalEnsemble,
    pub a2: TwoPhotonSpectrum,
    pub ratio: BranchingRatio,
    pub v1: u32,
}

impl ForwardModel {
    /// Validates the constants and the A₂ interpolation accuracy once.
    pub fn new(
        constants: SpectroscopicConstants,
        ensemble: ThermalEnsemble,
        a2: TwoPhotonSpectrum,
        ratio: BranchingRatio,
        v1: u32,
    ) -> Result<Self> {
        let table = enumerate_lines(&ensemble, &constants, v1)?;
        assign_amplitudes(&table, &a2, ratio)?;
        Ok(ForwardModel {
            constants,
            ensemble,
            a2,
            ratio,
            v1,
        })
    }

    pub fn lines(&self, gamma_e: f64, beta_e: f64) -> Result<LineTable> {
        let mut c = self.constants.clone();
        c.gamma_e = Some(gamma_e);
        c.beta_e = Some(beta_e);
        let table = enumerate_lines(&self.ensemble, &c, self.v1)?;
        assign_amplitudes_unchecked(&table, &self.a2, self.ratio)
    }

    /// scale × |ρ|²(t − t_offset) / max over `times`.
    pub fn signal(&self, p: &ModelParams, times: &[f64]) -> Result<Vec<f64>> {
        if !(p.tau_c > 0.0) {
            return Err(Error::Domain(format!("tau_c must be positive, got {}", p.tau_c)));
        }
        let table = self.lines(p.gamma_e, p.beta_e)?;
        let freqs: Vec<(f64, Complex64)> = table
            .lines
            .iter()
            .filter(|l| l.amplitude != Complex64::new(0.0, 0.0))
            .map(|l| (RAD_PER_PS_PER_CM1 * l.rot_shift, l.amplitude))
            .collect();
        let rho: Vec<Complex64> = match uniform_step(times) {
            Some(dt) => phasor_sum_uniform(&freqs, times[0] - p.t_offset, dt, times.len()),
            None => times
                .iter()
                .map(|&t| {
                    let s = t - p.t_offset;
                    freqs
                        .iter()
                        .map(|&(w, a)| a * Complex64::from_polar(1.0, -w * s))
                        .sum()
                })
                .collect(),
        };
        let mut y: Vec<f64> = rho
            .iter()
            .zip(times)
            .map(|(r, &t)| r.norm_sqr() * (-2.0 * (t - p.t_offset) / p.tau_c).exp())
            .collect();
        let peak = y.iter().copied().fold(0.0, f64::max);
        if peak > 0.0 {
            let k = p.scale / peak;
            y.iter_mut().for_each(|v| *v *= k);
        }
        Ok(y)
    }
}

fn uniform_step(times: &[f64]) -> Option<f64> {
    if times.len() < 2 {
        return None;
    }
    let dt = times[1] - times[0];
    let ok = times
        .iter()
        .enumerate()
        .all(|(i, &t)| (t - (times[0] + i as f64 * dt)).abs() <= 1e-9 * dt.max(1.0));
    ok.then_some(dt)
}

#[derive(Debug, Clone)]
pub struct FitProblem {
    pub times: Vec<f64>,
    pub data: Vec<f64>,
    pub model: ForwardModel,
    pub free: Vec<FreeParam>,
    /// Initial values for free parameters, fixed values for the rest.
    pub initial: ModelParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Jittered restarts in addition to the run from the initial guess.
    pub restarts: usize,
    /// Restart jitter as a fraction of each parameter's box.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iter: 3000,
            restarts: 3,
            jitter: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FittedParam {
    pub name: ParamName,
    pub value: f64,
    pub uncertainty: f64,
    pub initial: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub parameters: Vec<FittedParam>,
    /// Final values of every model parameter, free or fixed.
    pub model_params: ModelParams,
    pub rss: f64,
    pub initial_rss: f64,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    /// Best objective after each iteration of the winning run.
    #[serde(skip)]
    pub history: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl FitResult {
    pub fn value(&self, name: ParamName) -> f64 {
        self.model_params.get(name)
    }

    pub fn uncertainty(&self, name: ParamName) -> Option<f64> {
        self.parameters.iter().find(|p| p.name == name).map(|p| p.uncertainty)
    }
}

impl FitProblem {
    pub fn validate(&self) -> Result<()> {
        if self.times.len() != self.data.len() {
            return Err(Error::Domain("times and data differ in length".into()));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("data times must be strictly increasing".into()));
        }
        if self.data.iter().chain(&self.times).any(|v| !v.is_finite()) {
            return Err(Error::Domain("data contain non-finite values".into()));
        }
        if self.free.is_empty() {
            return Err(Error::Domain("no free parameters".into()));
        }
        if self.times.len() < 10 * self.free.len() {
            return Err(Error::Domain(format!(
                "{} data points for {} free parameters; need at least 10 per parameter",
                self.times.len(),
                self.free.len()
            )));
        }
        for (i, f) in self.free.iter().enumerate() {
            if self.free[..i].iter().any(|g| g.name == f.name) {
                return Err(Error::Domain(format!("parameter {} listed twice", f.name)));
            }
            let v = self.initial.get(f.name);
            if !(f.lower < f.upper) || !(v >= f.lower && v <= f.upper) {
                return Err(Error::Domain(format!(
                    "{}: initial value {v} outside bounds [{}, {}]",
                    f.name, f.lower, f.upper
                )));
            }
            if f.name == ParamName::TauC && !(f.lower > 0.0) {
                return Err(Error::Domain("tau_c lower bound must be positive".into()));
            }
        }
        let (lo, hi) = self
            .data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if hi - lo <= 1e-12 * hi.abs().max(lo.abs()) {
            return Err(Error::NonIdentifiable("signal is constant".into()));
        }
        Ok(())
    }

    fn params_at(&self, x: &[f64]) -> ModelParams {
        let mut p = self.initial;
        for (f, &xi) in self.free.iter().zip(x) {
            p.set(f.name, f.from_unit(xi));
        }
        p
    }

    pub fn residuals(&self, p: &ModelParams) -> Result<Vec<f64>> {
        let m = self.model.signal(p, &self.times)?;
        Ok(m.iter().zip(&self.data).map(|(a, b)| a - b).collect())
    }

    pub fn objective(&self, p: &ModelParams) -> Result<f64> {
        Ok(self.residuals(p)?.iter().map(|r| r * r).sum())
    }

    fn objective_unit(&self, x: &[f64]) -> f64 {
        self.objective(&self.params_at(x)).unwrap_or(f64::INFINITY)
    }
}

struct Run {
    x: Vec<f64>,
    f: f64,
    iterations: usize,
    evaluations: usize,
    converged: bool,
    history: Vec<f64>,
}

/// Bounded Nelder–Mead in [0,1]^n; points are clamped onto the box.
fn nelder_mead(problem: &FitProblem, x0: &[f64], max_iter: usize) -> Run {
    let n = x0.len();
    let tol: Vec<f64> = problem.free.iter().map(|f| f.tol / (f.upper - f.lower)).collect();
    let clamp = |x: Vec<f64>| -> Vec<f64> { x.into_iter().map(|v| v.clamp(0.0, 1.0)).collect() };
    let mut evaluations = 0;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        problem.objective_unit(x)
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let start = clamp(x0.to_vec());
    let f0 = eval(&start);
    simplex.push((start.clone(), f0));
    for i in 0..n {
        let mut x = start.clone();
        x[i] += if x[i] + 0.05 <= 1.0 { 0.05 } else { -0.05 };
        let f = eval(&x);
        simplex.push((x, f));
    }

    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        history.push(simplex[0].1);
        let small = (0..n).all(|k| {
            let (lo, hi) = simplex
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v.0[k]), hi.max(v.0[k])));
            hi - lo <= tol[k]
        });
        if small {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|v| v.0[k]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let along = |t: f64| -> Vec<f64> {
            clamp(
                centroid
                    .iter()
                    .zip(&worst.0)
                    .map(|(c, w)| c + t * (c - w))
                    .collect(),
            )
        };
        let xr = along(1.0);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let x = along(0.5);
                let f = eval(&x);
                (x, f)
            } else {
                let x = along(-0.5);
                let f = eval(&x);
                (x, f)
            };
            if fc < worst.1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = best.iter().zip(&v.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
                    let f = eval(&x);
                    *v = (x, f);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    Run {
        x: simplex[0].0.clone(),
        f: simplex[0].1,
        iterations,
        evaluations,
        converged,
        history,
    }
}

/// Nelder–Mead restarted from its own optimum until it stops improving.
fn polished_run(problem: &FitProblem, x0: &[f64], max_iter: usize) -> Run {
    let mut run = nelder_mead(problem, x0, max_iter);
    for _ in 0..3 {
        if !run.converged || run.iterations >= max_iter {
            break;
        }
        let next = nelder_mead(problem, &run.x, max_iter - run.iterations);
        let improved = next.f < run.f * (1.0 - 1e-10);
        let mut history = std::mem::take(&mut run.history);
        let best = run.f;
        history.extend(next.history.iter().map(|f| f.min(best)));
        let (x, f) = if next.f < run.f { (next.x, next.f) } else { (run.x, run.f) };
        run = Run {
            x,
            f,
            iterations: run.iterations + next.iterations,
            evaluations: run.evaluations + next.evaluations,
            converged: next.converged,
            history,
        };
        if !improved {
            break;
        }
    }
    run
}

/// Minimizes Σ(model − data)² over the free parameters.
pub fn fit(problem: &FitProblem, opts: &FitOptions) -> Result<FitResult> {
    problem.validate()?;
    let x0: Vec<f64> = problem
        .free
        .iter()
        .map(|f| f.to_unit(problem.initial.get(f.name)))
        .collect();
    let initial_rss = problem.objective(&problem.initial)?;

    if initial_rss == 0.0 {
        let residuals = problem.residuals(&problem.initial)?;
        return finish(problem, &x0, 0.0, initial_rss, true, 0, 1, vec![0.0], residuals);
    }

    let starts: Vec<Vec<f64>> = std::iter::once(x0.clone())
        .chain((0..opts.restarts).map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(r as u64));
            x0.iter()
                .map(|x| (x + opts.jitter * rng.gen_range(-1.0..=1.0)).clamp(0.0, 1.0))
                .collect()
        }))
        .collect();
    let runs: Vec<Run> = starts
        .par_iter()
        .map(|s| polished_run(problem, s, opts.max_iter))
        .collect();
    let evaluations: usize = runs.iter().map(|r| r.evaluations).sum();
    // First of equal minima wins, so the choice is independent of scheduling.
    let best = runs
        .into_iter()
        .reduce(|a, b| if b.f < a.f { b } else { a })
        .expect("at least one run");

    // The run from the initial guess already bounds the result by initial_rss;
    // keep the initial point if rounding ever says otherwise.
    let (x, f) = if best.f <= initial_rss {
        (best.x, best.f)
    } else {
        (x0, initial_rss)
    };
    let residuals = problem.residuals(&problem.params_at(&x))?;
    finish(
        problem,
        &x,
        f,
        initial_rss,
        best.converged,
        best.iterations,
        evaluations,
        best.history,
        residuals,
    )
}

#[allow(clippy::too_many_arguments)]
fn finish(
    problem: &FitProblem,
    x: &[f64],
    rss: f64,
    initial_rss: f64,
    converged: bool,
    iterations: usize,
    evaluations: usize,
    history: Vec<f64>,
    residuals: Vec<f64>,
) -> Result<FitResult> {
    let p = problem.params_at(x);
    let sd = uncertainties(problem, &p, rss)?;
    let parameters = problem
        .free
        .iter()
        .zip(sd)
        .map(|(f, u)| FittedParam {
            name: f.name,
            value: p.get(f.name),
            uncertainty: u,
            initial: problem.initial.get(f.name),
        })
        .collect();
    Ok(FitResult {
        parameters,
        model_params: p,
        rss,
        initial_rss,
        converged,
        iterations,
        evaluations,
        history,
        residuals,
    })
}

/// √diag(σ²(JᵀJ)⁻¹) with a central-difference Jacobian.
fn uncertainties(problem: &FitProblem, p: &ModelParams, rss: f64) -> Result<Vec<f64>> {
    let n = problem.times.len();
    let k = problem.free.len();
    let mut jac = DMatrix::<f64>::zeros(n, k);
    for (c, f) in problem.free.iter().enumerate() {
        let h = 1e-5 * (f.upper - f.lower);
        let mut plus = *p;
        let mut minus = *p;
        plus.set(f.name, p.get(f.name) + h);
        minus.set(f.name, p.get(f.name) - h);
        let a = problem.residuals(&plus)?;
        let b = problem.residuals(&minus)?;
        for r in 0..n {
            jac[(r, c)] = (a[r] - b[r]) / (2.0 * h);
        }
    }
    let rms = (problem.data.iter().map(|d| d * d).sum::<f64>() / n as f64).sqrt();
    let dof = (n - k).max(1) as f64;
    let sigma2 = (rss / dof).max((f64::EPSILON * rms).powi(2));
    let jtj = jac.transpose() * &jac;
    Ok(match jtj.try_inverse() {
        Some(inv) => (0..k)
            .map(|i| {
                let v = sigma2 * inv[(i, i)];
                if v > 0.0 {
                    v.sqrt()
                } else {
                    f64::INFINITY
                }
            })
            .collect(),
        None => vec![f64::INFINITY; k],
    })
}

/// Fixes `name` at each grid value, refits the remaining free parameters
/// and returns (value, best RSS).
pub fn profile_parameter(
    problem: &FitProblem,
    name: ParamName,
    grid: &[f64],
    opts: &FitOptions,
) -> Result<Vec<(f64, f64)>> {
    if !problem.free.iter().any(|f| f.name == name) {
        return Err(Error::Domain(format!("{name} is not a free parameter")));
    }
    problem.validate()?;
    grid.par_iter()
        .map(|&v| {
            let mut sub = problem.clone();
            sub.free.retain(|f| f.name != name);
            sub.initial.set(name, v);
            let rss = if sub.free.is_empty() {
                sub.objective(&sub.initial)?
            } else {
                fit(&sub, opts)?.rss
            };
            Ok((v, rss))
        })
        .collect()
}

/// Noise-free model plus N(0, `noise`·scale) additive noise.
pub fn synthetic_data(model: &ForwardModel, p: &ModelParams, times: &[f64], noise: f64, seed: u64) -> Result<Vec<f64>> {
    let mut y = model.signal(p, times)?;
    if noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Normal::new(0.0, noise * p.scale).map_err(|e| Error::Domain(e.to_string()))?;
        for v in &mut y {
            *v += dist.sample(&mut rng);
        }
    }
    Ok(y)
}

/// Wraps plain (time, signal) data: the data are divided by their maximum
/// so the scale parameter starts near 1.
pub fn normalize_data(data: &[f64]) -> Vec<f64> {
    let max = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max > 0.0 {
        data.iter().map(|d| d / max).collect()
    } else {
        data.to_vec()
    }
}

pub fn default_free_set() -> Vec<FreeParam> {
    [ParamName::GammaE, ParamName::TauC, ParamName::Scale, ParamName::TOffset]
        .into_iter()
        .map(FreeParam::default_for)
        .collect()
}

/// Displaced starting point γe = 0, τ_c = 150 ps.
pub fn default_initial() -> ModelParams {
    ModelParams {
        gamma_e: 0.0,
        tau_c: 150.0,
        scale: 1.0,
        t_offset: 0.0,
        beta_e: 0.0,
    }
}
