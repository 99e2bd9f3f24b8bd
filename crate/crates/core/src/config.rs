//! Run configuration and the forward pipeline it drives.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::dynamics::{signal_trace, CoherenceTrace, DecayModel};
use crate::ensemble::{build_ensemble, SpinWeights, ThermalEnsemble, DEFAULT_TAIL_TOL};
use crate::error::{Error, Result};
use crate::excitation::{
    assign_amplitudes, band_grid, branching_ratio, enumerate_lines, BranchingRatio, LineTable,
    PolarizabilityDerivatives, DEFAULT_BAND_STEP,
};
use crate::fit::ForwardModel;
use crate::molmodel::{ConstantsDatabase, SpectroscopicConstants};
use crate::pulses::{stokes_delay_for_center, two_photon_spectrum, Pulse, TwoPhotonSpectrum};

/// Band margin beyond the outermost line, cm⁻¹.
const BAND_MARGIN: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseConfig {
    pub center_cm1: f64,
    pub fwhm_fs: f64,
    pub chirp_fs2: f64,
    pub delay_fs: f64,
    pub amplitude: f64,
}

impl Default for PulseConfig {
    fn default() -> Self {
        PulseConfig {
            center_cm1: 12_500.0,
            fwhm_fs: 130.0,
            chirp_fs2: 0.0,
            delay_fs: 0.0,
            amplitude: 1.0,
        }
    }
}

impl PulseConfig {
    pub fn stokes_default() -> Self {
        PulseConfig {
            center_cm1: 10_183.0,
            ..Default::default()
        }
    }

    pub fn pulse(&self) -> Pulse {
        Pulse {
            center: self.center_cm1,
            fwhm_duration: self.fwhm_fs,
            chirp: self.chirp_fs2,
            delay: self.delay_fs,
            amplitude: self.amplitude,
        }
    }

    fn validate(&self, prefix: &str) -> Result<()> {
        let f = |name: &str| format!("{prefix}.{name}");
        if !(self.center_cm1 > 0.0) || !self.center_cm1.is_finite() {
            return Err(Error::config(f("center_cm1"), "must be a positive wavenumber"));
        }
        if !(self.fwhm_fs > 0.0) || !self.fwhm_fs.is_finite() {
            return Err(Error::config(f("fwhm_fs"), "must be positive"));
        }
        if !self.chirp_fs2.is_finite() {
            return Err(Error::config(f("chirp_fs2"), "must be finite"));
        }
        if !self.delay_fs.is_finite() {
            return Err(Error::config(f("delay_fs"), "must be finite"));
        }
        if !(self.amplitude > 0.0) || !self.amplitude.is_finite() {
            return Err(Error::config(f("amplitude"), "must be positive"));
        }
        Ok(())
    }
}

/// Where the Q to O/S amplitude ratio comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BranchRatioSource {
    Computed(PolarizabilityDerivatives),
    Fixed(f64),
    /// O and S lines switched off.
    QOnly,
}

impl Default for BranchRatioSource {
    fn default() -> Self {
        BranchRatioSource::Computed(PolarizabilityDerivatives::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub t0_ps: f64,
    pub t1_ps: f64,
    pub dt_ps: f64,
    pub probe_fwhm_fs: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            t0_ps: 0.0,
            t1_ps: 1100.0,
            dt_ps: 0.5,
            probe_fwhm_fs: None,
        }
    }
}

/// Full run description; every field has the experiment's default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// JSON constants database; the built-in table when absent.
    pub constants_db: Option<PathBuf>,
    pub state: String,
    /// Overrides the database γe; `null` keeps the database value.
    pub gamma_e: Option<f64>,
    /// Overrides the database βe; `null` keeps the database value.
    pub beta_e: Option<f64>,
    pub v1: u32,
    pub temperature_k: f64,
    pub spin: SpinWeights,
    pub pump: PulseConfig,
    pub stokes: PulseConfig,
    /// Solve for the Stokes delay that centres a chirped two-photon
    /// spectrum on the Q branch (replaces `stokes.delay_fs`).
    pub center_on_q_branch: bool,
    pub branch_ratio: BranchRatioSource,
    /// Amplitude decay time; `null` disables decay.
    pub tau_c_ps: Option<f64>,
    pub grid: GridConfig,
    /// Spacing of the two-photon grid used for line lookup, cm⁻¹.
    pub band_step_cm1: f64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            constants_db: None,
            state: "N2_X".into(),
            gamma_e: Some(-2.6e-5),
            beta_e: None,
            v1: 1,
            temperature_k: 295.0,
            spin: SpinWeights::default(),
            pump: PulseConfig::default(),
            stokes: PulseConfig::stokes_default(),
            center_on_q_branch: true,
            branch_ratio: BranchRatioSource::default(),
            tau_c_ps: Some(256.0),
            grid: GridConfig::default(),
            band_step_cm1: DEFAULT_BAND_STEP,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.state.trim().is_empty() {
            return Err(Error::config("state", "must name an electronic state"));
        }
        if self.v1 == 0 {
            return Err(Error::config("v1", "must be >= 1"));
        }
        if !(self.temperature_k > 0.0) || !self.temperature_k.is_finite() {
            return Err(Error::config("temperature_k", "must be positive"));
        }
        if !(self.spin.even > 0.0) || !(self.spin.odd > 0.0) {
            return Err(Error::config("spin", "weights must be positive"));
        }
        for (name, v) in [("gamma_e", self.gamma_e), ("beta_e", self.beta_e)] {
            if v.is_some_and(|x| !x.is_finite()) {
                return Err(Error::config(name, "must be finite"));
            }
        }
        self.pump.validate("pump")?;
        self.stokes.validate("stokes")?;
        if self.stokes.center_cm1 >= self.pump.center_cm1 {
            return Err(Error::config("stokes.center_cm1", "must lie below the pump frequency"));
        }
        match self.branch_ratio {
            BranchRatioSource::Fixed(r) if !(r > 0.0) || !r.is_finite() => {
                return Err(Error::config("branch_ratio.fixed", "must be positive"));
            }
            BranchRatioSource::Computed(p) if !p.a_perp_prime.is_finite() || !p.delta_a_prime.is_finite() => {
                return Err(Error::config("branch_ratio.computed", "derivatives must be finite"));
            }
            _ => {}
        }
        if let Some(t) = self.tau_c_ps {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::config("tau_c_ps", "must be positive or null"));
            }
        }
        let g = &self.grid;
        if !(g.t0_ps >= 0.0) || !g.t0_ps.is_finite() {
            return Err(Error::config("grid.t0_ps", "must be >= 0"));
        }
        if !(g.t1_ps > g.t0_ps) || !g.t1_ps.is_finite() {
            return Err(Error::config("grid.t1_ps", "must exceed grid.t0_ps"));
        }
        if !(g.dt_ps > 0.0) || !g.dt_ps.is_finite() {
            return Err(Error::config("grid.dt_ps", "must be positive"));
        }
        if g.probe_fwhm_fs.is_some_and(|p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::config("grid.probe_fwhm_fs", "must be positive or null"));
        }
        if !(self.band_step_cm1 > 0.0) || !self.band_step_cm1.is_finite() {
            return Err(Error::config("band_step_cm1", "must be positive"));
        }
        Ok(())
    }

    pub fn database(&self) -> Result<ConstantsDatabase> {
        match &self.constants_db {
            Some(p) => ConstantsDatabase::load(p),
            None => Ok(ConstantsDatabase::builtin()),
        }
    }

    /// Database constants with the configured overrides applied.
    pub fn constants(&self) -> Result<SpectroscopicConstants> {
        let mut c = self.database()?.get(&self.state)?.clone();
        if let Some(g) = self.gamma_e {
            c.gamma_e = Some(g);
        }
        if let Some(b) = self.beta_e {
            c.beta_e = Some(b);
        }
        Ok(c)
    }

    pub fn decay(&self) -> DecayModel {
        match self.tau_c_ps {
            Some(tau_c_ps) => DecayModel::Collisional { tau_c_ps },
            None => DecayModel::None,
        }
    }

    pub fn ratio(&self) -> Result<BranchingRatio> {
        match self.branch_ratio {
            BranchRatioSource::Computed(p) => branching_ratio(&p),
            BranchRatioSource::Fixed(r) => Ok(BranchingRatio::Finite(r)),
            BranchRatioSource::QOnly => Ok(BranchingRatio::NoOsCoupling),
        }
    }
}

/// Constants → ensemble → two-photon spectrum → line table.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub config: RunConfig,
    pub constants: SpectroscopicConstants,
    pub ensemble: ThermalEnsemble,
    pub pump: Pulse,
    /// Stokes pulse with the delay actually used.
    pub stokes: Pulse,
    pub ratio: BranchingRatio,
    pub a2: TwoPhotonSpectrum,
    pub lines: LineTable,
}

impl Pipeline {
    pub fn build(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let constants = config.constants()?;
        let (b0, _) = constants.rotational_constants(0);
        let ensemble = build_ensemble(config.temperature_k, b0, config.spin, DEFAULT_TAIL_TOL)?;
        let table = enumerate_lines(&ensemble, &constants, config.v1)?;
        let ratio = config.ratio()?;

        let pump = config.pump.pulse();
        let mut stokes = config.stokes.pulse();
        let chirped = pump.chirp != 0.0 || stokes.chirp != 0.0;
        if config.center_on_q_branch && chirped {
            stokes.delay = stokes_delay_for_center(&pump, &stokes, table.q_centroid())?;
        }

        let lookup = match ratio {
            BranchingRatio::NoOsCoupling => table.q_only(),
            BranchingRatio::Finite(_) => table.clone(),
        };
        let a2 = two_photon_spectrum(&pump, &stokes, &band_grid(&lookup, BAND_MARGIN, config.band_step_cm1))?;
        let mut lines = assign_amplitudes(&table, &a2, ratio)?;
        lines.metadata.extend(pulse_metadata(&pump, &stokes));
        Ok(Pipeline {
            config: config.clone(),
            constants,
            ensemble,
            pump,
            stokes,
            ratio,
            a2,
            lines,
        })
    }

    pub fn decay(&self) -> DecayModel {
        self.config.decay()
    }

    /// Trace on the configured grid.
    pub fn trace(&self) -> Result<CoherenceTrace> {
        let g = &self.config.grid;
        self.trace_on(g.t0_ps, g.t1_ps, g.dt_ps, g.probe_fwhm_fs)
    }

    pub fn trace_on(&self, t0: f64, t1: f64, dt: f64, probe_fwhm_fs: Option<f64>) -> Result<CoherenceTrace> {
        signal_trace(&self.lines, self.decay(), t0, t1, dt, probe_fwhm_fs)
    }

    pub fn forward_model(&self) -> Result<ForwardModel> {
        ForwardModel::new(
            self.constants.clone(),
            self.ensemble.clone(),
            self.a2.clone(),
            self.ratio,
            self.config.v1,
        )
    }

    /// Full ro-vibrational revival time of the configured constants, ps.
    pub fn revival_time(&self) -> Option<f64> {
        self.constants.revival_time(self.config.v1)
    }

    /// Run settings for file headers.
    pub fn metadata(&self) -> Vec<(String, String)> {
        let mut m = self.lines.metadata.clone();
        m.push(("gamma_e_cm1".into(), self.constants.gamma_e().to_string()));
        m.push(("beta_e_cm1".into(), self.constants.beta_e().to_string()));
        m.push(("spin_even_odd".into(), format!("{}:{}", self.config.spin.even, self.config.spin.odd)));
        if let Some(t) = self.revival_time() {
            m.push(("t_rovib_ps".into(), t.to_string()));
        }
        m
    }
}

fn pulse_metadata(pump: &Pulse, stokes: &Pulse) -> Vec<(String, String)> {
    let mut m = Vec::new();
    for (name, p) in [("pump", pump), ("stokes", stokes)] {
        m.push((
            name.to_string(),
            format!(
                "center {} cm^-1, fwhm {} fs, chirp {} fs^2, delay {} fs",
                p.center, p.fwhm_duration, p.chirp, p.delay
            ),
        ));
    }
    m
}
