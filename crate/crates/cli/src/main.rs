//! `rovib` command-line front end.

mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use rovib::analysis::{classify_fractions, dephasing_time, detect_extrema, estimate_revival_time, DEFAULT_Q_MAX, DEFAULT_SMOOTH_FWHM};
use rovib::config::{BranchRatioSource, Pipeline, RunConfig};
use rovib::excitation::{branching_ratio, PolarizabilityDerivatives};
use rovib::fit::{default_free_set, default_initial, fit, normalize_data, FitOptions, FitProblem, FreeParam, ParamName};
use rovib::io::{read_two_column, TraceFile};
use rovib::molmodel::ConstantsDatabase;
use rovib::pulses::{husimi_map, uniform_grid, HusimiSource};
use serde_json::json;

#[derive(Parser)]
#[command(name = "rovib", version, about = "Ro-vibrational CARS revival simulator and fitter")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration; experiment defaults when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p).with_context(|| format!("reading config {}", p.display()))?,
            None => RunConfig::default(),
        };
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print spectroscopic constants and characteristic times of a state.
    Constants {
        #[arg(long, default_value = "N2_X")]
        state: String,
        /// Override γe (cm⁻¹).
        #[arg(long, allow_hyphen_values = true)]
        gamma_e: Option<f64>,
        /// Constants database (JSON); built-in table when omitted.
        #[arg(long)]
        db: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Write the two-photon spectrum A₂(Ω).
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Grid step in cm⁻¹.
        #[arg(long, default_value_t = 0.5)]
        step: f64,
    },
    /// Write Husimi maps of the pulse pair and of its difference field.
    Husimi {
        #[command(flatten)]
        common: Common,
        /// Window FWHM in fs; defaults to the shortest pulse.
        #[arg(long)]
        window_fs: Option<f64>,
        /// Time axis half-span in fs.
        #[arg(long, default_value_t = 1500.0)]
        span_fs: f64,
    },
    /// Simulate a CARS trace.
    Trace {
        #[command(flatten)]
        common: Common,
        /// Drop O and S lines.
        #[arg(long)]
        q_only: bool,
    },
    /// Detect and classify revivals in a simulated or supplied trace.
    Revivals {
        #[command(flatten)]
        common: Common,
        /// Trace CSV to analyse instead of simulating one.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_Q_MAX)]
        q_max: u32,
        /// Matching tolerance in ps.
        #[arg(long, default_value_t = 1.0)]
        tol: f64,
        /// Minimum prominence as a fraction of the maximum.
        #[arg(long, default_value_t = 0.02)]
        prominence: f64,
        /// Smoothing FWHM in ps.
        #[arg(long, default_value_t = DEFAULT_SMOOTH_FWHM)]
        smooth: f64,
    },
    /// Fit γe, τ_c, scale and time offset to measured data.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Two-column CSV (time_ps, signal).
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated free parameters.
        #[arg(long, value_delimiter = ',', default_value = "gamma_e,tau_c,scale,t_offset")]
        free: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Ignore data before this time (ps).
        #[arg(long, default_value_t = 25.0)]
        t_min: f64,
    },
    /// Q to O/S branching ratio from polarizability derivatives.
    Branching {
        #[arg(long, default_value_t = 8.7, allow_hyphen_values = true)]
        a_perp: f64,
        #[arg(long, default_value_t = 13.3, allow_hyphen_values = true)]
        delta_a: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config = e.downcast_ref::<rovib::Error>().is_some_and(|r| r.is_config())
                || e.downcast_ref::<std::io::Error>().is_some();
            ExitCode::from(if config { 2 } else { 3 })
        }
    }
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("ROVIB_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| anyhow!("ROVIB_THREADS must be a positive integer, got '{v}'"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

/// Seconds since the epoch, or SOURCE_DATE_EPOCH for reproducible builds.
fn timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(path)
}

fn write_meta(dir: &Path, name: &str, cfg: &RunConfig, extra: serde_json::Value) -> Result<()> {
    let meta = json!({
        "generated_unix": timestamp(),
        "config": cfg,
        "decay_convention": "amplitude exp(-t/tau_c), signal exp(-2t/tau_c)",
        "result": extra,
    });
    write(dir, name, &(serde_json::to_string_pretty(&meta)? + "\n"))?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Constants { state, gamma_e, db, json } => cmd_constants(&state, gamma_e, db.as_deref(), json),
        Command::Spectrum { common, step } => cmd_spectrum(&common.load()?, step),
        Command::Husimi { common, window_fs, span_fs } => cmd_husimi(&common.load()?, window_fs, span_fs),
        Command::Trace { common, q_only } => {
            let mut cfg = common.load()?;
            if q_only {
                cfg.branch_ratio = BranchRatioSource::QOnly;
            }
            cmd_trace(&cfg)
        }
        Command::Revivals {
            common,
            trace,
            q_max,
            tol,
            prominence,
            smooth,
        } => cmd_revivals(&common.load()?, trace.as_deref(), q_max, tol, prominence, smooth),
        Command::Fit {
            common,
            data,
            free,
            seed,
            t_min,
        } => cmd_fit(&common.load()?, &data, &free, seed, t_min),
        Command::Branching { a_perp, delta_a } => {
            let r = branching_ratio(&PolarizabilityDerivatives {
                a_perp_prime: a_perp,
                delta_a_prime: delta_a,
            })?;
            if r.value().is_finite() {
                println!("N_Q/SO = {:.4}", r.value());
                println!("intensity ratio N^2 = {:.2} (O:Q:S = 1:{:.0}:1)", r.intensity_ratio(), r.intensity_ratio());
            } else {
                println!("no O/S coupling (delta_a = 0): O and S amplitudes vanish");
            }
            Ok(())
        }
    }
}

fn cmd_constants(state: &str, gamma_e: Option<f64>, db: Option<&Path>, as_json: bool) -> Result<()> {
    let db = match db {
        Some(p) => ConstantsDatabase::load(p)?,
        None => ConstantsDatabase::builtin(),
    };
    let mut c = db.get(state)?.clone();
    if let Some(g) = gamma_e {
        c.gamma_e = Some(g);
    }
    c.validate()?;
    let (b0, _) = c.rotational_constants(0);
    let (b1, _) = c.rotational_constants(1);
    let t_rovib = c.revival_time(1);
    let t_rot = 1.0 / (2.0 * rovib::units::C_CM_PER_PS * b0);
    if as_json {
        let v = json!({
            "constants": c,
            "B0": b0,
            "B1": b1,
            "G1_minus_G0": c.band_origin(1),
            "t_rovib_ps": t_rovib,
            "t_rot_ps": t_rot,
        });
        println!("{}", serde_json::to_string_pretty(&v)?);
        return Ok(());
    }
    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| x.to_string());
    println!("state        {}", c.label);
    println!("Te           {}", c.te);
    println!("we           {}", c.omega_e);
    println!("wexe         {}", c.omega_e_xe);
    println!("weye         {}", c.omega_e_ye);
    println!("Be           {}", c.b_e);
    println!("alpha_e      {}", c.alpha_e);
    println!("gamma_e      {}", opt(c.gamma_e));
    println!("De           {}", c.d_e);
    println!("beta_e       {}", opt(c.beta_e));
    println!("B0           {b0:.6} cm^-1");
    println!("B1           {b1:.6} cm^-1");
    println!("G(1)-G(0)    {:.4} cm^-1", c.band_origin(1));
    match t_rovib {
        Some(t) => println!("T_RoVib      {t:.2} ps"),
        None => println!("T_RoVib      none (B1 = B0)"),
    }
    println!("T_rot        {t_rot:.4} ps");
    Ok(())
}

fn cmd_spectrum(cfg: &RunConfig, step: f64) -> Result<()> {
    let p = Pipeline::build(cfg)?;
    let nominal = p.pump.center - p.stokes.center;
    let half = 4.0 * p.pump.spectral_fwhm().max(p.stokes.spectral_fwhm());
    let grid = uniform_grid(nominal - half, nominal + half, step);
    let s = rovib::pulses::two_photon_spectrum(&p.pump, &p.stokes, &grid)?;
    let dir = &cfg.output_dir;
    write(dir, "spectrum.csv", &s.to_csv(&p.metadata()))?;
    write(dir, "plot_spectrum.py", &plot::spectrum_script("spectrum.csv"))?;
    write_meta(
        dir,
        "spectrum_meta.json",
        cfg,
        json!({
            "fwhm_power_cm1": s.fwhm(),
            "fwhm_amplitude_cm1": s.amplitude_fwhm(),
            "centroid_cm1": s.centroid(),
            "stokes_delay_fs": p.stokes.delay,
            "q_centroid_cm1": p.lines.q_centroid(),
        }),
    )?;
    println!("|A2|^2 FWHM = {:.2} cm^-1, centroid {:.2} cm^-1", s.fwhm().unwrap_or(f64::NAN), s.centroid());
    Ok(())
}

fn cmd_husimi(cfg: &RunConfig, window_fs: Option<f64>, span_fs: f64) -> Result<()> {
    let p = Pipeline::build(cfg)?;
    let pulses = [p.pump, p.stokes];
    let source = HusimiSource::Pulses(&pulses);
    let window = window_fs.or(source.default_window_fwhm()).unwrap_or(130.0);
    let times = uniform_grid(-span_fs, span_fs, span_fs / 150.0);
    let dir = &cfg.output_dir;
    let mut meta = p.metadata();
    meta.push(("window_source".into(), if window_fs.is_some() { "user" } else { "shortest pulse" }.into()));

    for (name, pulse) in [("pump", p.pump), ("stokes", p.stokes)] {
        let w = 3.0 * pulse.spectral_fwhm();
        let freqs = uniform_grid(pulse.center - w, pulse.center + w, w / 100.0);
        let one = [pulse];
        let map = husimi_map(HusimiSource::Pulses(&one), window, &times, &freqs)?;
        let file = format!("husimi_{name}.csv");
        write(dir, &file, &map.to_csv(&meta))?;
        write(dir, &format!("plot_husimi_{name}.py"), &plot::husimi_script(&file))?;
    }
    let nominal = p.pump.center - p.stokes.center;
    let w = 3.0 * p.pump.spectral_fwhm();
    let a2 = rovib::pulses::two_photon_spectrum(&p.pump, &p.stokes, &uniform_grid(nominal - 2.0 * w, nominal + 2.0 * w, 0.5))?;
    let freqs = uniform_grid(nominal - w, nominal + w, w / 100.0);
    let map = husimi_map(HusimiSource::Spectrum(&a2), window, &times, &freqs)?;
    write(dir, "husimi_two_photon.csv", &map.to_csv(&meta))?;
    write(dir, "plot_husimi_two_photon.py", &plot::husimi_script("husimi_two_photon.csv"))?;
    write_meta(
        dir,
        "husimi_meta.json",
        cfg,
        json!({"window_fwhm_fs": window, "two_photon_ridge_slope_cm1_per_fs": map.ridge_slope(0.01)}),
    )?;
    Ok(())
}

fn cmd_trace(cfg: &RunConfig) -> Result<()> {
    let p = Pipeline::build(cfg)?;
    let trace = p.trace()?;
    if let Some(w) = &trace.aliasing_warning {
        eprintln!("warning: {w}");
    }
    let file = TraceFile::from_trace(&trace, &p.metadata()).with_timestamp(timestamp());
    let dir = &cfg.output_dir;
    write(dir, "trace.csv", &file.to_csv())?;
    write(dir, "lines.csv", &p.lines.to_csv())?;
    write(dir, "plot_trace.py", &plot::trace_script("trace.csv", "CARS trace"))?;
    let max = trace.max_after(25.0);
    write_meta(
        dir,
        "trace_meta.json",
        cfg,
        json!({
            "points": trace.len(),
            "lines": p.lines.len(),
            "t_rovib_ps": p.revival_time(),
            "max_after_25ps": max.map(|m| json!({"time_ps": m.0, "signal": m.1})),
            "stokes_delay_fs": p.stokes.delay,
            "aliasing_warning": trace.aliasing_warning,
        }),
    )?;
    if let Some((t, _)) = max {
        println!("global maximum after 25 ps at {t:.2} ps");
    }
    Ok(())
}

fn cmd_revivals(cfg: &RunConfig, trace_path: Option<&Path>, q_max: u32, tol: f64, prominence: f64, smooth: f64) -> Result<()> {
    let p = Pipeline::build(cfg)?;
    let trace = match trace_path {
        Some(path) => {
            let f = TraceFile::parse(&fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?)?;
            let mut t = p.trace_on(0.0, 1.0, 1.0, None)?;
            t.times = f.times;
            t.rho = f.rho;
            t.signal = f.signal;
            t
        }
        None => p.trace()?,
    };
    let extrema = detect_extrema(&trace, smooth, prominence)?;
    let guess = p.revival_time().ok_or_else(|| anyhow!("no ro-vibrational coupling: revival time undefined"))?;
    let t_est = estimate_revival_time(&extrema, guess, 0.02 * guess).unwrap_or(guess);
    let report = classify_fractions(&extrema, t_est, q_max, tol)?.with_dephasing(dephasing_time(&trace));
    print!("{}", report.to_table());
    write(&cfg.output_dir, "revivals.json", &(serde_json::to_string_pretty(&report)? + "\n"))?;
    Ok(())
}

fn cmd_fit(cfg: &RunConfig, data_path: &Path, free: &[String], seed: u64, t_min: f64) -> Result<()> {
    let text = fs::read_to_string(data_path).with_context(|| format!("reading {}", data_path.display()))?;
    let (times, values) = read_two_column(&text)?;
    let (times, values): (Vec<f64>, Vec<f64>) = times.into_iter().zip(values).filter(|(t, _)| *t >= t_min).unzip();
    let names = free.iter().map(|s| ParamName::parse(s.trim())).collect::<rovib::Result<Vec<_>>>()?;
    let free_set: Vec<FreeParam> = if names.is_empty() {
        default_free_set()
    } else {
        names.into_iter().map(FreeParam::default_for).collect()
    };
    let p = Pipeline::build(cfg)?;
    let mut initial = default_initial();
    initial.beta_e = p.constants.beta_e();
    if !free_set.iter().any(|f| f.name == ParamName::GammaE) {
        initial.gamma_e = p.constants.gamma_e();
    }
    if !free_set.iter().any(|f| f.name == ParamName::TauC) {
        initial.tau_c = cfg.tau_c_ps.unwrap_or(f64::MAX);
    }
    let problem = FitProblem {
        times,
        data: normalize_data(&values),
        model: p.forward_model()?,
        free: free_set,
        initial,
    };
    let result = fit(&problem, &FitOptions { seed, ..Default::default() })?;
    for q in &result.parameters {
        println!("{:<9} = {:>14.6e} +/- {:.2e}", q.name.to_string(), q.value, q.uncertainty);
    }
    println!("rss = {:.6e} (initial {:.6e}), converged = {}", result.rss, result.initial_rss, result.converged);
    let dir = &cfg.output_dir;
    write(dir, "fit.json", &(serde_json::to_string_pretty(&result)? + "\n"))?;
    let model = problem.model.signal(&result.model_params, &problem.times)?;
    let mut csv = String::from("time_ps,data,model\n");
    for ((t, d), m) in problem.times.iter().zip(&problem.data).zip(&model) {
        csv.push_str(&format!("{t},{d},{m}\n"));
    }
    write(dir, "fit_curve.csv", &csv)?;
    write(dir, "plot_fit.py", &plot::fit_script(&data_path.display().to_string(), "fit_curve.csv"))?;
    if !result.converged {
        return Err(anyhow!("fit stopped at the iteration cap without converging"));
    }
    Ok(())
}
