//! Command-line front end: run configuration, dispatch to the solvers and
//! reproducible output bundles.
//!
//! Every CSV starts with `# config_hash`, `# version` and `# seed` lines;
//! floats are written with 17 significant digits so reruns are
//! byte-identical. JSON outputs carry the same fields at top level.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::calibrate::{fit_spacings, FitOptions, SpectrumMeasurement};
use crate::chain::{collective_modes, interaction_picture, motional_model, ChainGeometry, RHModel};
use crate::error::{Error, Result};
use crate::exact::{
    build_hamiltonian, estimate_dimension, ground_state, run_dynamics, spin_density_matrix, suggest_cutoffs, BasisSpec,
    Coupling, EvolveOptions, LanczosOptions, QuantumState, Sector, TrajectoryRequest,
};
use crate::hp::{build_a, sigma_z_trajectory, stability};
use crate::linalg::C64;
use crate::meanfield::{critical_coupling, solve_model, Branch};
use crate::measure::{
    apply_detection_errors, correlation_from_counts, fit_correlation, measured_scan, phase_scan_pair, reduce_pair,
    rotated_pair_distribution, sample_shots, DetectionErrorModel, PhaseScan,
};
use crate::params::{find_set, uniform_transition_model, Study};
use crate::quench::{find_crossing, ground_correlation_scan, run_quench, QuenchSchedule};
use crate::units::{khz, micrometers, microseconds, milliseconds, UnitConvention, TWO_PI, YB171_ION_MASS_AMU};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const FIGURES: [&str; 6] = ["fig2f-smallN", "fig3-smallN", "figS5", "figS6", "figS7", "figS8"];

#[derive(Parser, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[command(name = "rabi-hubbard", version, about = "Trapped-ion Rabi-Hubbard model laboratory")]
pub struct Cli {
    /// Seed for Lanczos start vectors and shot sampling.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Read configured frequencies as plain kHz/MHz instead of 2π × kHz/MHz.
    #[arg(long, global = true)]
    #[serde(default)]
    pub no_two_pi: bool,
    /// Output directory; without it files are printed to stdout.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Local frequencies, hoppings, modes and interaction-picture parameters.
    Chain(ChainArgs),
    /// Fit ion spacings to a measured mode spectrum.
    Calibrate(CalibrateArgs),
    /// Mean-field order parameter along a coupling scan.
    Meanfield(MeanfieldArgs),
    /// Exact ground state in a parity sector.
    Ground(GroundArgs),
    /// Exact dynamics at constant coupling.
    Dynamics(DynamicsArgs),
    /// Exponential coupling ramp from |↓,0⟩^⊗N.
    Quench(QuenchArgs),
    /// Linearized (Holstein–Primakoff) dynamics and stability.
    Hp(HpArgs),
    /// Simulated phase-scan readout of a two-spin state.
    Measure(MeasureArgs),
    /// Canned desk-scale recipes.
    Reproduce(ReproduceArgs),
    /// Hilbert-space dimension and phonon cutoff estimates.
    Estimate(EstimateArgs),
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSelect {
    /// Model configuration file (JSON).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Built-in parameter set, e.g. `dynamics:4` or `phase_transition:6`.
    #[arg(long, conflicts_with = "model")]
    pub preset: Option<String>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisArgs {
    /// Local phonon cutoff per site.
    #[arg(long, default_value_t = 6)]
    pub cutoff: usize,
    /// Collective-mode cutoffs, comma separated (overrides --cutoff).
    #[arg(long)]
    pub mode_cutoffs: Option<String>,
    #[arg(long, value_enum, default_value_t = SectorArg::Auto)]
    pub sector: SectorArg,
    /// Refuse bases larger than this many states.
    #[arg(long)]
    pub max_dim: Option<u64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectorArg {
    /// Sector of the initial product state.
    Auto,
    Even,
    Odd,
    Full,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialSpins {
    Up,
    Down,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainArgs {
    /// Chain configuration file (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, conflicts_with = "config")]
    pub preset: Option<String>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrateArgs {
    /// Measured mode frequencies in MHz, ascending, one per line.
    #[arg(long)]
    pub spectrum: PathBuf,
    /// Trap (COM) frequency in MHz; defaults to the highest mode.
    #[arg(long)]
    pub trap_freq: Option<f64>,
    /// Force a mirror-symmetric fit (default on for even ion counts).
    #[arg(long)]
    pub symmetric: bool,
    /// Initial spacings in μm, one per line.
    #[arg(long)]
    pub init: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanfieldArgs {
    #[command(flatten)]
    pub model: ModelSelect,
    /// start:stop:step in kHz.
    #[arg(long)]
    pub g_scan: String,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundArgs {
    #[command(flatten)]
    pub model: ModelSelect,
    /// Coupling in kHz; defaults to the model's own.
    #[arg(long)]
    pub g: Option<f64>,
    #[command(flatten)]
    pub basis: BasisArgs,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsArgs {
    #[command(flatten)]
    pub model: ModelSelect,
    #[arg(long)]
    pub g: Option<f64>,
    #[arg(long, default_value_t = 400.0)]
    pub t_max_us: f64,
    #[arg(long, default_value_t = 201)]
    pub points: usize,
    #[arg(long, value_enum, default_value_t = InitialSpins::Up)]
    pub initial: InitialSpins,
    #[arg(long)]
    pub entropy: bool,
    #[arg(long)]
    pub phonons: bool,
    /// Also write two-spin density matrices of the final state.
    #[arg(long)]
    pub pair_states: bool,
    #[arg(long, default_value_t = 1e-11)]
    pub step_tol: f64,
    #[command(flatten)]
    pub basis: BasisArgs,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuenchArgs {
    #[command(flatten)]
    pub model: ModelSelect,
    /// Final coupling in kHz.
    #[arg(long)]
    pub gmax: f64,
    /// Ramp time constant in ms.
    #[arg(long)]
    pub tau: f64,
    /// Append the time-reversed ramp.
    #[arg(long)]
    pub reverse: bool,
    /// Output samples per ramp segment.
    #[arg(long, default_value_t = 50)]
    pub per_ramp: usize,
    #[command(flatten)]
    pub basis: BasisArgs,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HpArgs {
    #[command(flatten)]
    pub model: ModelSelect,
    #[arg(long)]
    pub g: Option<f64>,
    #[arg(long, default_value_t = 400.0)]
    pub t_max_us: f64,
    #[arg(long, default_value_t = 201)]
    pub points: usize,
    /// g0:g1:n in kHz.
    #[arg(long)]
    pub stability_scan: Option<String>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureArgs {
    /// Pair-state CSV written by `dynamics --pair-states`.
    #[arg(long)]
    pub trajectory: PathBuf,
    /// i,j (0-based).
    #[arg(long)]
    pub pair: String,
    /// Time in μs to read; defaults to the last one in the file.
    #[arg(long)]
    pub time_us: Option<f64>,
    #[arg(long, default_value_t = 16)]
    pub phases: usize,
    /// Shots per phase; 0 skips sampling.
    #[arg(long, default_value_t = 0)]
    pub shots: u64,
    #[arg(long, default_value_t = 0.0)]
    pub eps_c: f64,
    #[arg(long, default_value_t = 0.0)]
    pub eps_0: f64,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproduceArgs {
    pub figure: String,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateArgs {
    #[arg(long)]
    pub n_ions: Option<usize>,
    /// Same cutoff for every mode.
    #[arg(long)]
    pub cutoff: Option<usize>,
    /// Per-mode cutoffs, comma separated.
    #[arg(long)]
    pub cutoffs: Option<String>,
    #[command(flatten)]
    pub model: ModelSelect,
    /// Coupling in kHz for cutoff suggestions.
    #[arg(long)]
    pub g: Option<f64>,
    /// Allowed Poisson tail beyond each suggested cutoff.
    #[arg(long, default_value_t = 1e-3)]
    pub target: f64,
}

// ---------- configuration files ----------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detunings {
    pub delta_b_khz: f64,
    pub delta_r_khz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub n_ions: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacings_um: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniform_spacing_um: Option<f64>,
    pub trap_freq_mhz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass_amu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detunings: Option<Detunings>,
    #[serde(default)]
    pub units: UnitConvention,
}

impl ChainConfig {
    pub fn geometry(&self) -> Result<ChainGeometry> {
        let trap = self.units.mhz(self.trap_freq_mhz);
        let geom = match (&self.spacings_um, self.uniform_spacing_um) {
            (Some(d), None) => {
                if d.len() + 1 != self.n_ions {
                    return Err(Error::Config(format!("{} spacings for {} ions", d.len(), self.n_ions)));
                }
                ChainGeometry::new(d.iter().map(|&x| micrometers(x)).collect(), trap)?
            }
            (None, Some(d)) => ChainGeometry::uniform(self.n_ions, micrometers(d), trap)?,
            _ => {
                return Err(Error::Config(
                    "give exactly one of spacings_um, uniform_spacing_um".into(),
                ))
            }
        };
        geom.with_mass_amu(self.mass_amu.unwrap_or(YB171_ION_MASS_AMU))
    }

    pub fn model(&self) -> Result<RHModel> {
        let d = self
            .detunings
            .as_ref()
            .ok_or_else(|| Error::Config("chain config has no detunings".into()))?;
        let m = motional_model(&self.geometry()?)?;
        Ok(interaction_picture(
            &m,
            self.units.khz(d.delta_b_khz),
            self.units.khz(d.delta_r_khz),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSource {
    /// Built-in experimental set; `calibrated` refits spacings to its spectrum.
    Preset {
        study: Study,
        n_ions: usize,
        #[serde(default)]
        calibrated: bool,
    },
    Chain(ChainConfig),
    /// Idealized chain with t = 26/|i−j|³ kHz and a given lowest mode.
    Uniform {
        n_ions: usize,
        lowest_mode_khz: f64,
    },
    Explicit {
        spin_freq_khz: f64,
        site_freqs_khz: Vec<f64>,
        /// Symmetric matrix; the diagonal is ignored.
        hoppings_khz: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub source: ModelSource,
    #[serde(default)]
    pub coupling_khz: f64,
    #[serde(default)]
    pub units: UnitConvention,
}

impl ModelConfig {
    pub fn build(&self) -> Result<RHModel> {
        let u = self.units;
        let m = match &self.source {
            ModelSource::Preset {
                study,
                n_ions,
                calibrated,
            } => {
                let s = find_set(*study, *n_ions).map_err(|e| Error::Config(e.to_string()))?;
                if *calibrated {
                    s.calibrated_model()?
                } else {
                    s.model()?
                }
            }
            ModelSource::Chain(c) => c.model()?,
            ModelSource::Uniform {
                n_ions,
                lowest_mode_khz,
            } => uniform_transition_model(*n_ions, u.khz(*lowest_mode_khz))?,
            ModelSource::Explicit {
                spin_freq_khz,
                site_freqs_khz,
                hoppings_khz,
            } => {
                let n = site_freqs_khz.len();
                if hoppings_khz.len() != n || hoppings_khz.iter().any(|r| r.len() != n) {
                    return Err(Error::Config("hoppings_khz must be N×N".into()));
                }
                let hop = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { u.khz(hoppings_khz[i][j]) });
                RHModel::new(
                    u.khz(*spin_freq_khz),
                    site_freqs_khz.iter().map(|&w| u.khz(w)).collect(),
                    0.0,
                    hop,
                )?
            }
        };
        Ok(m.with_coupling(u.khz(self.coupling_khz)))
    }
}

fn parse_preset(s: &str) -> Result<(Study, usize)> {
    let (study, n) = s
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("preset '{s}' is not study:n_ions")))?;
    let study = match study {
        "dynamics" => Study::Dynamics,
        "phase_transition" | "transition" => Study::PhaseTransition,
        other => {
            return Err(Error::Config(format!(
                "unknown study '{other}' (dynamics, phase_transition)"
            )))
        }
    };
    let n = n
        .parse()
        .map_err(|_| Error::Config(format!("bad ion count in preset '{s}'")))?;
    Ok((study, n))
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|x| x.trim().parse().map_err(|_| Error::Config(format!("bad {what} '{x}'"))))
        .collect()
}

/// `start:stop:step`, inclusive of stop up to rounding; empty when start > stop.
pub fn parse_step_scan(s: &str) -> Result<Vec<f64>> {
    let v: Vec<f64> = parse_list(&s.replace(':', ","), "scan bound")?;
    let [a, b, step] = v[..] else {
        return Err(Error::Config(format!("scan '{s}' is not start:stop:step")));
    };
    if !(step > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Config(format!("scan '{s}' needs a positive step")));
    }
    if a > b {
        return Ok(Vec::new());
    }
    let n = ((b - a) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| a + step * k as f64).collect())
}

/// `start:stop:n`, n evenly spaced points.
pub fn parse_count_scan(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, n] = parts[..] else {
        return Err(Error::Config(format!("scan '{s}' is not start:stop:n")));
    };
    let a: f64 = a.parse().map_err(|_| Error::Config(format!("bad scan start '{a}'")))?;
    let b: f64 = b.parse().map_err(|_| Error::Config(format!("bad scan stop '{b}'")))?;
    let n: usize = n.parse().map_err(|_| Error::Config(format!("bad scan count '{n}'")))?;
    Ok(match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    })
}

/// Plain numeric column file: one value per line or comma separated,
/// `#` comments and a non-numeric header line allowed.
pub fn read_numbers(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: std::result::Result<Vec<f64>, _> = line.split(',').map(|x| x.trim().parse::<f64>()).collect();
        match vals {
            Ok(v) => out.extend(v),
            Err(_) if out.is_empty() && k == 0 => continue,
            Err(_) => return Err(Error::Config(format!("non-numeric line {}: '{line}'", k + 1))),
        }
    }
    Ok(out)
}

// ---------- output bundle ----------

#[derive(Debug, Clone, PartialEq)]
pub enum OutputKind {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub kind: OutputKind,
    pub body: String,
}

#[derive(Debug, Clone)]
pub struct RunBundle {
    pub config_hash: String,
    pub seed: u64,
    /// Canonical JSON of the run configuration.
    pub config: String,
    pub files: Vec<OutputFile>,
    pub wall_time: f64,
}

/// 17 significant digits.
pub fn f17(x: f64) -> String {
    format!("{x:.16e}")
}

struct Csv {
    header: String,
    body: String,
}

impl Csv {
    fn new(cols: &[&str]) -> Self {
        Csv {
            header: cols.join(","),
            body: String::new(),
        }
    }

    fn row(&mut self, cells: &[String]) {
        self.body.push_str(&cells.join(","));
        self.body.push('\n');
    }

    fn finish(self) -> String {
        format!("{}\n{}", self.header, self.body)
    }
}

struct Ctx {
    seed: u64,
    units: UnitConvention,
    hasher: Sha256,
    files: Vec<OutputFile>,
}

impl Ctx {
    fn read(&mut self, path: &Path) -> Result<String> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        self.hasher.update(text.as_bytes());
        Ok(text)
    }

    fn model(&mut self, sel: &ModelSelect) -> Result<(RHModel, ModelConfig)> {
        let cfg = match (&sel.model, &sel.preset) {
            (Some(p), None) => {
                let text = self.read(p)?;
                serde_json::from_str::<ModelConfig>(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            (None, Some(s)) => {
                let (study, n_ions) = parse_preset(s)?;
                ModelConfig {
                    source: ModelSource::Preset {
                        study,
                        n_ions,
                        calibrated: false,
                    },
                    coupling_khz: 0.0,
                    units: self.units,
                }
            }
            _ => return Err(Error::Config("give --model or --preset".into())),
        };
        Ok((cfg.build()?, cfg))
    }

    fn khz(&self, v: f64) -> f64 {
        self.units.khz(v)
    }

    fn to_khz(&self, w: f64) -> f64 {
        self.units.to_khz(w)
    }

    fn csv(&mut self, name: &str, csv: Csv) {
        self.files.push(OutputFile {
            name: name.into(),
            kind: OutputKind::Csv,
            body: csv.finish(),
        });
    }

    fn json(&mut self, name: &str, value: serde_json::Value) {
        self.files.push(OutputFile {
            name: name.into(),
            kind: OutputKind::Json,
            body: serde_json::to_string_pretty(&value).expect("json value serializes"),
        });
    }
}

fn basis_spec(args: &BasisArgs, n: usize, initial_parity: i32) -> Result<BasisSpec> {
    let sector = match args.sector {
        SectorArg::Auto => Sector::of_parity(initial_parity),
        SectorArg::Even => Sector::Even,
        SectorArg::Odd => Sector::Odd,
        SectorArg::Full => Sector::Full,
    };
    let mut spec = match &args.mode_cutoffs {
        Some(s) => {
            let c: Vec<usize> = parse_list(s, "cutoff")?;
            if c.len() != n {
                return Err(Error::Config(format!("{} mode cutoffs for {n} ions", c.len())));
            }
            BasisSpec::collective(c, sector)
        }
        None => BasisSpec::local(n, args.cutoff, sector),
    };
    if let Some(m) = args.max_dim {
        spec = spec.with_budget(m as u128);
    }
    Ok(spec)
}

fn initial_parity(n: usize, spins: InitialSpins) -> i32 {
    match spins {
        InitialSpins::Up => 1,
        InitialSpins::Down if n % 2 == 1 => -1,
        InitialSpins::Down => 1,
    }
}

fn time_grid(t_max: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 || !(t_max > 0.0) {
        return Err(Error::Config("need t_max > 0 and at least 2 points".into()));
    }
    Ok((0..points).map(|k| t_max * k as f64 / (points - 1) as f64).collect())
}

/// Map an error to the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ResourceGuard { .. } => 4,
        Error::Numerical(_)
        | Error::ChainUnstable { .. }
        | Error::SingularMode { .. }
        | Error::NotEquilibrium { .. } => 3,
        Error::InvalidInput(_) | Error::Domain(_) | Error::Config(_) | Error::Io(_) | Error::Json(_) => 2,
    }
}

/// Execute a parsed command line.
pub fn run(cli: &Cli) -> Result<RunBundle> {
    let start = Instant::now();
    let config = serde_json::to_string(cli)?;
    let mut ctx = Ctx {
        seed: cli.seed,
        units: UnitConvention { two_pi: !cli.no_two_pi },
        hasher: Sha256::new(),
        files: Vec::new(),
    };
    ctx.hasher.update(config.as_bytes());
    match &cli.command {
        Command::Chain(a) => cmd_chain(&mut ctx, a)?,
        Command::Calibrate(a) => cmd_calibrate(&mut ctx, a)?,
        Command::Meanfield(a) => cmd_meanfield(&mut ctx, a)?,
        Command::Ground(a) => cmd_ground(&mut ctx, a)?,
        Command::Dynamics(a) => cmd_dynamics(&mut ctx, a)?,
        Command::Quench(a) => cmd_quench(&mut ctx, a)?,
        Command::Hp(a) => cmd_hp(&mut ctx, a)?,
        Command::Measure(a) => cmd_measure(&mut ctx, a)?,
        Command::Reproduce(a) => cmd_reproduce(&mut ctx, a)?,
        Command::Estimate(a) => cmd_estimate(&mut ctx, a)?,
    }
    let config_hash = hex::encode(ctx.hasher.finalize());
    let files = ctx
        .files
        .into_iter()
        .map(|f| stamp(f, &config_hash, cli.seed))
        .collect();
    Ok(RunBundle {
        config_hash,
        seed: cli.seed,
        config,
        files,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

fn stamp(mut f: OutputFile, hash: &str, seed: u64) -> OutputFile {
    match f.kind {
        OutputKind::Csv => {
            f.body = format!(
                "# config_hash: {hash}\n# version: {VERSION}\n# seed: {seed}\n{}",
                f.body
            );
        }
        OutputKind::Json => {
            let inner: serde_json::Value = serde_json::from_str(&f.body).expect("own json");
            let v = json!({"config_hash": hash, "version": VERSION, "seed": seed, "result": inner});
            f.body = serde_json::to_string_pretty(&v).expect("json value serializes") + "\n";
        }
    }
    f
}

/// Write all outputs plus `config.json` and `run.log` into `dir`.
pub fn write_bundle(bundle: &RunBundle, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for f in &bundle.files {
        std::fs::write(dir.join(&f.name), &f.body)?;
    }
    std::fs::write(dir.join("config.json"), format!("{}\n", bundle.config))?;
    let log = format!(
        "config_hash {}\nversion {VERSION}\nseed {}\nfiles {}\nwall_time_s {:.3}\n",
        bundle.config_hash,
        bundle.seed,
        bundle
            .files
            .iter()
            .map(|f| f.name.as_str())
            .collect::<Vec<_>>()
            .join(" "),
        bundle.wall_time
    );
    std::fs::write(dir.join("run.log"), log)?;
    Ok(())
}

// ---------- commands ----------

fn freq_unit(u: UnitConvention, prefix: &str) -> String {
    if u.two_pi {
        format!("2pi*{prefix}Hz")
    } else {
        format!("{prefix}rad/s")
    }
}

fn cmd_chain(ctx: &mut Ctx, a: &ChainArgs) -> Result<()> {
    let (geom, model) = match (&a.config, &a.preset) {
        (Some(p), None) => {
            let text = ctx.read(p)?;
            let cfg: ChainConfig =
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            let model = if cfg.detunings.is_some() {
                Some(cfg.model()?)
            } else {
                None
            };
            (cfg.geometry()?, model)
        }
        (None, Some(s)) => {
            let (study, n) = parse_preset(s)?;
            let set = find_set(study, n).map_err(|e| Error::Config(e.to_string()))?;
            (set.geometry()?, Some(set.model()?))
        }
        _ => return Err(Error::Config("give --config or --preset".into())),
    };
    let u = ctx.units;
    let motion = motional_model(&geom)?;
    let modes = collective_modes(&motion)?;
    let (mhz_u, khz_u) = (freq_unit(u, "M"), freq_unit(u, "k"));
    let mut csv = Csv::new(&["quantity", "index", "value", "unit"]);
    let mut put = |q: &str, idx: String, v: f64, unit: &str| csv.row(&[q.into(), idx, f17(v), unit.into()]);
    let n = geom.n_ions();
    for i in 0..n {
        put("local_freq", i.to_string(), u.to_mhz(motion.local_freqs[i]), &mhz_u);
    }
    for i in 0..n {
        put(
            "corrected_freq",
            i.to_string(),
            u.to_mhz(motion.corrected_freqs[i]),
            &mhz_u,
        );
    }
    for k in 0..n {
        put("mode_freq", k.to_string(), u.to_mhz(modes.freqs[k]), &mhz_u);
    }
    for i in 0..n {
        for j in i + 1..n {
            put(
                "hopping",
                format!("{i}-{j}"),
                u.to_khz(motion.corrected_hoppings[(i, j)]),
                &khz_u,
            );
        }
    }
    if let Some(m) = &model {
        put("spin_freq", "0".into(), u.to_khz(m.spin_freq), &khz_u);
        for i in 0..n {
            put("site_freq", i.to_string(), u.to_khz(m.site_freqs[i]), &khz_u);
        }
        let spec = m.mode_spectrum()?;
        for k in 0..n {
            put("collective_freq", k.to_string(), u.to_khz(spec.freqs[k]), &khz_u);
        }
    }
    ctx.csv("chain.csv", csv);
    Ok(())
}

fn cmd_calibrate(ctx: &mut Ctx, a: &CalibrateArgs) -> Result<()> {
    let u = ctx.units;
    let text = ctx.read(&a.spectrum)?;
    let freqs: Vec<f64> = read_numbers(&text)?.into_iter().map(|f| u.mhz(f)).collect();
    let n = freqs.len();
    if n < 2 {
        return Err(Error::Config("spectrum needs at least two modes".into()));
    }
    let trap = a.trap_freq.map(|f| u.mhz(f)).unwrap_or(freqs[n - 1]);
    let meas = SpectrumMeasurement {
        freqs,
        trap_freq: trap,
        weights: None,
    };
    let initial = match &a.init {
        Some(p) => {
            let t = ctx.read(p)?;
            Some(read_numbers(&t)?.into_iter().map(micrometers).collect())
        }
        None => None,
    };
    let template = ChainGeometry::uniform(n, micrometers(5.4), trap)?;
    let opts = FitOptions {
        symmetric: if a.symmetric { Some(true) } else { None },
        initial,
        ..FitOptions::default()
    };
    let fit = fit_spacings(&meas, &template, &opts)?;
    let scale = if u.two_pi { TWO_PI } else { 1.0 };
    ctx.json(
        "calibration.json",
        json!({
            "spacings_um": fit.spacings.iter().map(|d| d * 1e6).collect::<Vec<_>>(),
            "residual_hz": fit.residual / scale,
            "converged": fit.converged,
            "iterations": fit.iterations,
            "warnings": fit.warnings,
        }),
    );
    Ok(())
}

fn cmd_meanfield(ctx: &mut Ctx, a: &MeanfieldArgs) -> Result<()> {
    let (model, _) = ctx.model(&a.model)?;
    let gs = parse_step_scan(&a.g_scan)?;
    let spec = model.mode_spectrum()?;
    let mut csv = Csv::new(&["g_khz", "b0", "mean_sigma_x", "branch"]);
    for g in gs {
        let sol = solve_model(ctx.khz(g), model.spin_freq, &spec)?;
        let branch = match sol.branch {
            Branch::Trivial => "trivial",
            Branch::Broken => "broken",
        };
        csv.row(&[f17(g), f17(sol.b0_amplitude), f17(sol.mean_spin_x()), branch.into()]);
    }
    ctx.csv("meanfield.csv", csv);
    if let Some(&d0) = spec.freqs.first() {
        if d0 > 0.0 {
            let gc = critical_coupling(model.spin_freq, d0)?;
            ctx.json("meanfield.json", json!({"critical_coupling_khz": ctx.to_khz(gc)}));
        }
    }
    Ok(())
}

fn cmd_ground(ctx: &mut Ctx, a: &GroundArgs) -> Result<()> {
    let (model, _) = ctx.model(&a.model)?;
    let g = a.g.map(|g| ctx.khz(g)).unwrap_or(model.coupling);
    let n = model.n_sites();
    let spec = basis_spec(&a.basis, n, initial_parity(n, InitialSpins::Down))?;
    let h = build_hamiltonian(&model, spec.clone())?;
    let opts = LanczosOptions {
        seed: ctx.seed,
        ..LanczosOptions::default()
    };
    let gs = ground_state(&h, g, &opts)?;
    let mut csv = Csv::new(&["observable", "i", "j", "value"]);
    for i in 0..n {
        csv.row(&[
            "sigma_z".into(),
            i.to_string(),
            String::new(),
            f17(gs.state.sigma_z(i)?),
        ]);
    }
    for i in 0..n {
        for j in i + 1..n {
            csv.row(&[
                "correlation".into(),
                i.to_string(),
                j.to_string(),
                f17(gs.state.correlation(i, j)?),
            ]);
        }
    }
    if n >= 2 {
        csv.row(&[
            "entropy".into(),
            (n / 2).to_string(),
            String::new(),
            f17(gs.state.entanglement_entropy(n / 2)?),
        ]);
    }
    ctx.csv("ground.csv", csv);
    let r = &gs.report;
    ctx.json(
        "ground.json",
        json!({
            "g_khz": ctx.to_khz(g),
            "energy_khz": ctx.to_khz(r.energy),
            "next_energy_khz": r.next_energy.map(|e| ctx.to_khz(e)),
            "gap_khz": r.gap.map(|e| ctx.to_khz(e)),
            "residual": r.residual,
            "matvecs": r.matvecs,
            "dimension": h.dim(),
            "basis": spec,
        }),
    );
    Ok(())
}

fn trajectory_csv(times: &[f64]) -> (Csv, Vec<String>) {
    (
        Csv::new(&["t_us", "index", "observable", "value"]),
        times.iter().map(|&t| f17(t * 1e6)).collect(),
    )
}

fn pair_state_rows(csv: &mut Csv, t: &str, state: &QuantumState) -> Result<()> {
    let n = state.basis.n_sites();
    let rho = spin_density_matrix(&state.basis, &state.amplitudes)?;
    for i in 0..n {
        for j in i + 1..n {
            let r2 = reduce_pair(&rho, n, i, j)?;
            for r in 0..4 {
                for c in 0..4 {
                    let z = r2[(r, c)];
                    csv.row(&[
                        t.into(),
                        i.to_string(),
                        j.to_string(),
                        r.to_string(),
                        c.to_string(),
                        f17(z.re),
                        f17(z.im),
                    ]);
                }
            }
        }
    }
    Ok(())
}

fn cmd_dynamics(ctx: &mut Ctx, a: &DynamicsArgs) -> Result<()> {
    let (model, _) = ctx.model(&a.model)?;
    let g = a.g.map(|g| ctx.khz(g)).unwrap_or(model.coupling);
    let n = model.n_sites();
    let spec = basis_spec(&a.basis, n, initial_parity(n, a.initial))?;
    let h = build_hamiltonian(&model, spec.clone())?;
    let mut state = match a.initial {
        InitialSpins::Up => QuantumState::all_up(h.basis.clone())?,
        InitialSpins::Down => QuantumState::all_down(h.basis.clone())?,
    };
    let grid = time_grid(microseconds(a.t_max_us), a.points)?;
    let opts = EvolveOptions {
        step_tol: a.step_tol,
        ..EvolveOptions::default()
    };
    let req = TrajectoryRequest {
        phonons: a.phonons,
        entropy: a.entropy,
    };
    let (tr, stats) = run_dynamics(&h, Coupling::Constant(g), &mut state, &grid, req, &opts)?;
    let (mut csv, ts) = trajectory_csv(&tr.times);
    for (k, t) in ts.iter().enumerate() {
        for i in 0..n {
            csv.row(&[t.clone(), i.to_string(), "sigma_z".into(), f17(tr.sigma_z[k][i])]);
        }
        csv.row(&[t.clone(), String::new(), "norm_drift".into(), f17(tr.norm_drift[k])]);
        csv.row(&[t.clone(), String::new(), "parity".into(), f17(tr.parity[k])]);
        csv.row(&[
            t.clone(),
            String::new(),
            "energy_khz".into(),
            f17(ctx.to_khz(tr.energy[k])),
        ]);
        if let Some(s) = tr.entropy.get(k) {
            csv.row(&[t.clone(), (n / 2).to_string(), "entropy".into(), f17(*s)]);
        }
        if let Some(p) = tr.local_phonons.get(k) {
            for (i, v) in p.iter().enumerate() {
                csv.row(&[t.clone(), i.to_string(), "n_local".into(), f17(*v)]);
            }
        }
        if let Some(p) = tr.collective_phonons.get(k) {
            for (i, v) in p.iter().enumerate() {
                csv.row(&[t.clone(), i.to_string(), "n_mode".into(), f17(*v)]);
            }
        }
    }
    ctx.csv("trajectory.csv", csv);
    if a.pair_states {
        let mut pcsv = Csv::new(&["t_us", "i", "j", "row", "col", "re", "im"]);
        pair_state_rows(&mut pcsv, ts.last().expect("grid has points"), &state)?;
        ctx.csv("pair_states.csv", pcsv);
    }
    ctx.json(
        "dynamics.json",
        json!({
            "g_khz": ctx.to_khz(g),
            "basis": spec,
            "dimension": h.dim(),
            "step_tol": opts.step_tol,
            "max_krylov": opts.max_krylov,
            "seed": ctx.seed,
            "steps": stats.steps,
            "matvecs": stats.matvecs,
            "max_norm_drift": stats.max_norm_drift,
            "max_leakage": tr.max_leakage,
        }),
    );
    Ok(())
}

fn cmd_quench(ctx: &mut Ctx, a: &QuenchArgs) -> Result<()> {
    let (model, _) = ctx.model(&a.model)?;
    let n = model.n_sites();
    let (tau, gmax) = (milliseconds(a.tau), ctx.khz(a.gmax));
    let schedule = if a.reverse {
        QuenchSchedule::reverse_appended(tau, gmax)
    } else {
        QuenchSchedule::exponential(tau, gmax)
    };
    let spec = basis_spec(&a.basis, n, initial_parity(n, InitialSpins::Down))?;
    let grid = schedule.grid(a.per_ramp);
    let (res, h) = run_quench(&model, &schedule, spec.clone(), &grid, false, &EvolveOptions::default())?;
    let (mut csv, ts) = trajectory_csv(&res.times);
    for (k, t) in ts.iter().enumerate() {
        csv.row(&[
            t.clone(),
            String::new(),
            "g_khz".into(),
            f17(ctx.to_khz(res.couplings[k])),
        ]);
        csv.row(&[
            t.clone(),
            String::new(),
            "mean_sigma_z".into(),
            f17(res.mean_sigma_z[k]),
        ]);
        for i in 0..n {
            csv.row(&[t.clone(), i.to_string(), "sigma_z".into(), f17(res.sigma_z[k][i])]);
        }
    }
    ctx.csv("quench.csv", csv);
    let mut cc = Csv::new(&["i", "j", "value"]);
    for i in 0..n {
        for j in 0..n {
            cc.row(&[i.to_string(), j.to_string(), f17(res.final_correlations[i][j])]);
        }
    }
    ctx.csv("correlations.csv", cc);
    let gc = model
        .mode_spectrum()?
        .freqs
        .first()
        .copied()
        .filter(|d| *d > 0.0)
        .map(|d| critical_coupling(model.spin_freq, d))
        .transpose()?;
    ctx.json(
        "quench.json",
        json!({
            "schedule": schedule,
            "basis": spec,
            "dimension": h.dim(),
            "final_mean_sigma_z": res.final_mean_sigma_z(),
            "g_max_over_gc_mf": gc.map(|gc| gmax / gc),
        }),
    );
    Ok(())
}

fn cmd_hp(ctx: &mut Ctx, a: &HpArgs) -> Result<()> {
    let (model, _) = ctx.model(&a.model)?;
    let g = a.g.map(|g| ctx.khz(g)).unwrap_or(model.coupling);
    let sys = build_a(&model.with_coupling(g))?;
    let grid = time_grid(microseconds(a.t_max_us), a.points)?;
    let z = sigma_z_trajectory(&sys, &grid)?;
    let (mut csv, ts) = trajectory_csv(&grid);
    for (k, t) in ts.iter().enumerate() {
        for (i, v) in z[k].iter().enumerate() {
            csv.row(&[t.clone(), i.to_string(), "sigma_z".into(), f17(*v)]);
        }
    }
    ctx.csv("hp_sigma_z.csv", csv);
    let rep = stability(&sys);
    let mut scan = Vec::new();
    if let Some(s) = &a.stability_scan {
        for gk in parse_count_scan(s)? {
            let r = stability(&build_a(&model.with_coupling(ctx.khz(gk)))?);
            scan.push(json!({"g_khz": gk, "stable": r.stable, "max_real_part": r.max_real_part}));
        }
    }
    ctx.json(
        "hp.json",
        json!({"g_khz": ctx.to_khz(g), "stability": rep, "scan": scan}),
    );
    Ok(())
}

/// Two-spin density matrices keyed by (t_us, i, j) from a pair-state CSV.
pub fn read_pair_states(text: &str) -> Result<Vec<(f64, usize, usize, DMatrix<C64>)>> {
    let mut out: Vec<(f64, usize, usize, DMatrix<C64>)> = Vec::new();
    for line in text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .skip(1)
    {
        let c: Vec<&str> = line.split(',').collect();
        if c.len() != 7 {
            return Err(Error::Config(format!("pair-state row '{line}' has {} fields", c.len())));
        }
        let bad = || Error::Config(format!("bad pair-state row '{line}'"));
        let t: f64 = c[0].parse().map_err(|_| bad())?;
        let i: usize = c[1].parse().map_err(|_| bad())?;
        let j: usize = c[2].parse().map_err(|_| bad())?;
        let r: usize = c[3].parse().map_err(|_| bad())?;
        let col: usize = c[4].parse().map_err(|_| bad())?;
        let z = C64::new(c[5].parse().map_err(|_| bad())?, c[6].parse().map_err(|_| bad())?);
        if r > 3 || col > 3 {
            return Err(Error::Config(format!("pair-state index out of range in '{line}'")));
        }
        match out.last_mut() {
            Some((tt, ii, jj, m)) if *tt == t && *ii == i && *jj == j => m[(r, col)] = z,
            _ => {
                let mut m = DMatrix::from_element(4, 4, C64::new(0.0, 0.0));
                m[(r, col)] = z;
                out.push((t, i, j, m));
            }
        }
    }
    Ok(out)
}

fn fit_json(scan: &PhaseScan) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(fit_correlation(scan)?)?)
}

fn cmd_measure(ctx: &mut Ctx, a: &MeasureArgs) -> Result<()> {
    let pair: Vec<usize> = parse_list(&a.pair, "site")?;
    let [i, j] = pair[..] else {
        return Err(Error::Config("--pair needs i,j".into()));
    };
    let model = DetectionErrorModel {
        eps_c: a.eps_c,
        eps_0: a.eps_0,
        eps_c_distant: 0.0,
    };
    model.validate().map_err(|e| Error::Config(e.to_string()))?;
    if a.phases < 5 {
        return Err(Error::Config("--phases must be at least 5".into()));
    }
    let text = ctx.read(&a.trajectory)?;
    let states = read_pair_states(&text)?;
    let t_pick = match a.time_us {
        Some(t) => t,
        None => states
            .last()
            .map(|s| s.0)
            .ok_or_else(|| Error::Config("no pair states in file".into()))?,
    };
    let (t, i, j, rho2) = states
        .into_iter()
        .find(|s| (s.0 - t_pick).abs() <= 1e-9 * t_pick.abs().max(1.0) && s.1 == i.min(j) && s.2 == i.max(j))
        .ok_or_else(|| Error::Config(format!("no state for pair {i},{j} at t = {t_pick} us")))?;
    let phases: Vec<f64> = (0..a.phases)
        .map(|k| std::f64::consts::PI * k as f64 / a.phases as f64)
        .collect();
    let ideal = phase_scan_pair(&rho2, (i, j), &phases);
    let noisy = measured_scan(&rho2, (i, j), &phases, &model)?;
    let mut sampled = Vec::new();
    if a.shots > 0 {
        let eps_c = model.crosstalk_for(i, j);
        for (k, &phi) in phases.iter().enumerate() {
            let p = apply_detection_errors(&rotated_pair_distribution(&rho2, phi), eps_c, model.eps_0)?;
            let counts = sample_shots(&p, a.shots, ctx.seed.wrapping_add(k as u64))?;
            sampled.push(correlation_from_counts(&[counts[0], counts[1], counts[2], counts[3]]));
        }
    }
    let mut csv = Csv::new(&["phi", "ideal", "with_errors", "sampled"]);
    for k in 0..phases.len() {
        csv.row(&[
            f17(phases[k]),
            f17(ideal.correlations[k]),
            f17(noisy.correlations[k]),
            sampled.get(k).map(|v| f17(*v)).unwrap_or_default(),
        ]);
    }
    ctx.csv("scan.csv", csv);
    let sampled_fit = if sampled.is_empty() {
        serde_json::Value::Null
    } else {
        fit_json(&PhaseScan {
            pair: (i, j),
            phases: phases.clone(),
            correlations: sampled,
        })?
    };
    ctx.json(
        "fit.json",
        json!({
            "t_us": t,
            "pair": [i, j],
            "detection": model,
            "shots": a.shots,
            "ideal": fit_json(&ideal)?,
            "with_errors": fit_json(&noisy)?,
            "sampled": sampled_fit,
        }),
    );
    Ok(())
}

fn cmd_estimate(ctx: &mut Ctx, a: &EstimateArgs) -> Result<()> {
    let mut csv = Csv::new(&["quantity", "index", "value"]);
    if let Some(n) = a.n_ions {
        let cutoffs = match (&a.cutoffs, a.cutoff) {
            (Some(s), _) => parse_list(s, "cutoff")?,
            (None, Some(c)) => vec![c; n],
            (None, None) => return Err(Error::Config("give --cutoff or --cutoffs with --n-ions".into())),
        };
        let (dim, log2) = estimate_dimension(n, &cutoffs)?;
        csv.row(&["dimension".into(), String::new(), dim.to_string()]);
        csv.row(&["log2_dimension".into(), String::new(), f17(log2)]);
    }
    if a.model.model.is_some() || a.model.preset.is_some() {
        let (model, _) = ctx.model(&a.model)?;
        let g = a.g.map(|g| ctx.khz(g)).unwrap_or(model.coupling);
        let spec = model.mode_spectrum()?;
        let sug = suggest_cutoffs(&spec.freqs, g, a.target)?;
        for (k, s) in sug.iter().enumerate() {
            csv.row(&["mean_occupancy".into(), k.to_string(), f17(s.mean_occupancy)]);
            csv.row(&[
                "cutoff".into(),
                k.to_string(),
                s.cutoff.map(|c| c.to_string()).unwrap_or_else(|| "resonant".into()),
            ]);
        }
        let known: Option<Vec<usize>> = sug.iter().map(|s| s.cutoff).collect();
        if let Some(c) = known {
            let (_, log2) = estimate_dimension(model.n_sites(), &c)?;
            csv.row(&["log2_dimension_suggested".into(), String::new(), f17(log2)]);
        }
    } else if a.n_ions.is_none() {
        return Err(Error::Config("give --n-ions or a model".into()));
    }
    ctx.csv("estimate.csv", csv);
    Ok(())
}

// ---------- reproduce ----------

fn cmd_reproduce(ctx: &mut Ctx, a: &ReproduceArgs) -> Result<()> {
    match a.figure.as_str() {
        "fig2f-smallN" => recipe_transition(ctx),
        "fig3-smallN" => recipe_dynamics(ctx),
        "figS5" => recipe_quench(ctx),
        "figS6" => recipe_cutoffs(ctx),
        "figS7" => recipe_occupancy(ctx),
        "figS8" => recipe_hp(ctx),
        other => Err(Error::Config(format!(
            "unknown figure '{other}'; valid ids: {}",
            FIGURES.join(", ")
        ))),
    }
}

/// Ground-state nearest-neighbour correlation of N = 2 and 4 uniform chains
/// against g/g_c^mf, raw and rescaled by N^{2β/ν}.
fn recipe_transition(ctx: &mut Ctx) -> Result<()> {
    let ratios = [0.5, 0.7, 0.9, 1.0, 1.03, 1.1, 1.2, 1.3, 1.5];
    let opts = LanczosOptions {
        seed: ctx.seed,
        ..LanczosOptions::default()
    };
    let mut csv = Csv::new(&["n_ions", "g_over_gc_mf", "correlation", "rescaled"]);
    let mut curves = Vec::new();
    for n in [2usize, 4] {
        let model = uniform_transition_model(n, khz(2.0))?;
        let gc = critical_coupling(model.spin_freq, model.mode_spectrum()?.freqs[0])?;
        let gs: Vec<f64> = ratios.iter().map(|r| r * gc).collect();
        let pair = (n / 2 - 1, n / 2);
        let c = ground_correlation_scan(&model, &gs, 10, pair, &opts)?;
        let scale = (n as f64).powf(0.25);
        let y: Vec<f64> = c.iter().map(|v| scale * v.abs()).collect();
        for k in 0..ratios.len() {
            csv.row(&[n.to_string(), f17(ratios[k]), f17(c[k]), f17(y[k])]);
        }
        curves.push(y);
    }
    ctx.csv("transition.csv", csv);
    let crossing = find_crossing(&ratios, &curves[0], &curves[1]);
    ctx.json("transition.json", json!({"crossing_g_over_gc_mf": crossing}));
    Ok(())
}

fn dyn_grid() -> Vec<f64> {
    (0..=200).map(|k| microseconds(2.0 * k as f64)).collect()
}

fn dynamics_model(n: usize) -> Result<RHModel> {
    find_set(Study::Dynamics, n)?.model()
}

/// N = 4 strong-coupling dynamics: spins, half-chain entropy, phonons.
fn recipe_dynamics(ctx: &mut Ctx) -> Result<()> {
    let model = dynamics_model(4)?;
    let g = crate::params::strong_dynamics_coupling();
    let h = build_hamiltonian(&model, BasisSpec::local(4, 8, Sector::Even))?;
    let mut st = QuantumState::all_up(h.basis.clone())?;
    let grid = dyn_grid();
    let req = TrajectoryRequest {
        phonons: true,
        entropy: true,
    };
    let (tr, _) = run_dynamics(
        &h,
        Coupling::Constant(g),
        &mut st,
        &grid,
        req,
        &EvolveOptions::default(),
    )?;
    let (mut csv, ts) = trajectory_csv(&tr.times);
    for (k, t) in ts.iter().enumerate() {
        for i in 0..4 {
            csv.row(&[t.clone(), i.to_string(), "sigma_z".into(), f17(tr.sigma_z[k][i])]);
        }
        csv.row(&[t.clone(), "2".into(), "entropy".into(), f17(tr.entropy[k])]);
        for i in 0..4 {
            csv.row(&[t.clone(), i.to_string(), "n_local".into(), f17(tr.local_phonons[k][i])]);
        }
    }
    ctx.csv("dynamics.csv", csv);
    Ok(())
}

/// N = 2 forward+reverse exponential ramps to 1.3 g_c^mf at τ = 1 and 0.5 ms.
fn recipe_quench(ctx: &mut Ctx) -> Result<()> {
    let model = find_set(Study::PhaseTransition, 2)?.model()?;
    let gc = critical_coupling(model.spin_freq, model.mode_spectrum()?.freqs[0])?;
    let mut csv = Csv::new(&["tau_ms", "t_us", "g_khz", "mean_sigma_z"]);
    let mut finals = Vec::new();
    for tau_ms in [1.0, 0.5] {
        let s = QuenchSchedule::reverse_appended(milliseconds(tau_ms), 1.3 * gc);
        let spec = BasisSpec::collective(vec![30, 4], Sector::Even);
        let (res, _) = run_quench(&model, &s, spec, &s.grid(50), false, &EvolveOptions::default())?;
        for k in 0..res.times.len() {
            csv.row(&[
                f17(tau_ms),
                f17(res.times[k] * 1e6),
                f17(ctx.to_khz(res.couplings[k])),
                f17(res.mean_sigma_z[k]),
            ]);
        }
        finals.push(json!({"tau_ms": tau_ms, "final_mean_sigma_z": res.final_mean_sigma_z()}));
    }
    ctx.csv("quench.csv", csv);
    ctx.json("quench.json", json!({"runs": finals, "gc_mf_khz": ctx.to_khz(gc)}));
    Ok(())
}

/// N = 4 strong-coupling σ_z at local cutoffs 6, 8, 10.
fn recipe_cutoffs(ctx: &mut Ctx) -> Result<()> {
    let model = dynamics_model(4)?;
    let g = crate::params::strong_dynamics_coupling();
    let grid = dyn_grid();
    let mut csv = Csv::new(&["cutoff", "t_us", "index", "sigma_z"]);
    let mut runs: Vec<Vec<Vec<f64>>> = Vec::new();
    for cut in [6usize, 8, 10] {
        let h = build_hamiltonian(&model, BasisSpec::local(4, cut, Sector::Even))?;
        let mut st = QuantumState::all_up(h.basis.clone())?;
        let (tr, _) = run_dynamics(
            &h,
            Coupling::Constant(g),
            &mut st,
            &grid,
            TrajectoryRequest::default(),
            &EvolveOptions::default(),
        )?;
        for (k, t) in tr.times.iter().enumerate() {
            for i in 0..4 {
                csv.row(&[cut.to_string(), f17(t * 1e6), i.to_string(), f17(tr.sigma_z[k][i])]);
            }
        }
        runs.push(tr.sigma_z);
    }
    ctx.csv("cutoffs.csv", csv);
    let sup = |a: &[Vec<f64>], b: &[Vec<f64>]| {
        a.iter()
            .zip(b)
            .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
            .fold(0.0, f64::max)
    };
    ctx.json(
        "cutoffs.json",
        json!({"d_6_8": sup(&runs[0], &runs[1]), "d_8_10": sup(&runs[1], &runs[2])}),
    );
    Ok(())
}

/// N = 4 collective occupancies with cutoffs suggested from n̄_k.
fn recipe_occupancy(ctx: &mut Ctx) -> Result<()> {
    let model = dynamics_model(4)?;
    let g = crate::params::strong_dynamics_coupling();
    let spec = model.mode_spectrum()?;
    let sug = suggest_cutoffs(&spec.freqs, g, 1e-3)?;
    let cutoffs: Vec<usize> = sug.iter().map(|s| s.cutoff.unwrap_or(8)).collect();
    let h = build_hamiltonian(&model, BasisSpec::collective(cutoffs.clone(), Sector::Even))?;
    let mut st = QuantumState::all_up(h.basis.clone())?;
    let req = TrajectoryRequest {
        phonons: true,
        entropy: false,
    };
    let (tr, _) = run_dynamics(
        &h,
        Coupling::Constant(g),
        &mut st,
        &dyn_grid(),
        req,
        &EvolveOptions::default(),
    )?;
    let mut csv = Csv::new(&["t_us", "mode", "occupancy"]);
    for (k, t) in tr.times.iter().enumerate() {
        for (m, v) in tr.collective_phonons[k].iter().enumerate() {
            csv.row(&[f17(t * 1e6), m.to_string(), f17(*v)]);
        }
    }
    ctx.csv("occupancy.csv", csv);
    let avg: Vec<f64> = (0..4)
        .map(|m| tr.collective_phonons.iter().map(|r| r[m]).sum::<f64>() / tr.times.len() as f64)
        .collect();
    ctx.json(
        "occupancy.json",
        json!({
            "cutoffs": cutoffs,
            "predicted": sug.iter().map(|s| s.mean_occupancy).collect::<Vec<_>>(),
            "time_averaged": avg,
        }),
    );
    Ok(())
}

/// N = 4 exact versus linearized σ_z at weak and strong coupling, plus the
/// N = 16 stability classification.
fn recipe_hp(ctx: &mut Ctx) -> Result<()> {
    let model = dynamics_model(4)?;
    let grid = dyn_grid();
    let mut summary = Vec::new();
    for (label, g, cut) in [
        ("weak", crate::params::weak_dynamics_coupling(), 6usize),
        ("strong", crate::params::strong_dynamics_coupling(), 8),
    ] {
        let h = build_hamiltonian(&model, BasisSpec::local(4, cut, Sector::Even))?;
        let mut st = QuantumState::all_up(h.basis.clone())?;
        let (tr, _) = run_dynamics(
            &h,
            Coupling::Constant(g),
            &mut st,
            &grid,
            TrajectoryRequest::default(),
            &EvolveOptions::default(),
        )?;
        let hp = sigma_z_trajectory(&build_a(&model.with_coupling(g))?, &grid)?;
        let mut csv = Csv::new(&["t_us", "index", "exact", "hp"]);
        let mut dev = 0.0f64;
        for k in 0..grid.len() {
            for i in 0..4 {
                csv.row(&[f17(grid[k] * 1e6), i.to_string(), f17(tr.sigma_z[k][i]), f17(hp[k][i])]);
                dev = dev.max((tr.sigma_z[k][i] - hp[k][i]).abs());
            }
        }
        ctx.csv(&format!("hp_{label}.csv"), csv);
        summary.push(json!({"label": label, "g_khz": ctx.to_khz(g), "cutoff": cut, "max_deviation": dev}));
    }
    let m16 = dynamics_model(16)?;
    let stab: Vec<_> = [
        crate::params::weak_dynamics_coupling(),
        crate::params::strong_dynamics_coupling(),
    ]
    .iter()
    .map(|&g| {
        let r = stability(&build_a(&m16.with_coupling(g))?);
        Ok(json!({"g_khz": ctx.to_khz(g), "stable": r.stable, "max_real_part": r.max_real_part}))
    })
    .collect::<Result<_>>()?;
    ctx.json("hp.json", json!({"comparison": summary, "n16_stability": stab}));
    Ok(())
}
