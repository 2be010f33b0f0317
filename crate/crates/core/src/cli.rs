//! Command line front end.

use std::f64::consts::TAU;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analytic::{factor_effects, predict_sz, stepover_from_scallop, DesignTable, SzBranch};
use crate::areal::{compute_all, ArealOptions, PARAM_KEYS};
use crate::config::{ConfigFile, RunConfig};
use crate::engine::{simulate, SimStats};
use crate::error::{Error, Result};
use crate::heightfield::HeightField;
use crate::job::run_plane_case;
use crate::kinematics::{read_trajectory_csv, rpm_to_rad_s, sample_trajectory, Trajectory};
use crate::surface::LineNet;
use crate::tool::{effective_radius, envelope_radius, EffectiveRadiusForm, ToolDefinition};

#[derive(Debug, Parser)]
#[command(name = "millsurf", version, about = "Filleted-end milling topography simulation and areal texture analysis")]
pub struct Cli {
    /// Worker threads for the simulation (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for synthetic noise fixtures.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct ConfigArgs {
    /// Configuration file of `section.key = value` lines.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set grid.nx=256`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Fixture {
    /// 2 µm sinusoid, 0.5 mm wavelength, along x; four whole periods,
    /// symmetric about the centre so that leveling leaves it unchanged.
    Sinusoid,
    /// Seeded uniform white noise in [-1, 1] µm.
    Noise,
    Constant,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a trajectory file or a generated plane job.
    Simulate(ConfigArgs),
    /// Areal parameters of a height field CSV.
    Analyze {
        #[arg(required_unless_present = "fixture")]
        heightfield: Option<PathBuf>,
        /// Analyze a built-in synthetic field instead of a file.
        #[arg(long, conflicts_with = "heightfield")]
        fixture: Option<Fixture>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Closed-form equivalent radius, stepover and Sz estimates.
    Predict {
        /// Yaw (screw) angle in (-90, 90).
        #[arg(long, allow_hyphen_values = true)]
        yaw_deg: f64,
        /// Tilt (lead) angle in [0, 90].
        #[arg(long)]
        tilt_deg: f64,
        /// Scallop height between passes.
        #[arg(long)]
        scallop_mm: f64,
        /// Feed per tooth.
        #[arg(long)]
        fz_mm: f64,
        /// Tool radius.
        #[arg(long, default_value_t = 5.0)]
        radius_mm: f64,
        /// Corner radius.
        #[arg(long, default_value_t = 1.5)]
        corner_radius_mm: f64,
    },
    /// Main effects of a factorial design, from a response table or by
    /// simulating the configured factorial.
    Doe {
        /// Response table `yaw_deg,tilt_deg,hc_mm,vf_m_per_min,<params>`.
        #[arg(long, required_unless_present = "run", conflicts_with = "run")]
        design: Option<PathBuf>,
        /// Generate, simulate and analyze the factorial.
        #[arg(long)]
        run: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// 16-bit PGM image of a height field CSV.
    Render {
        heightfield: PathBuf,
        /// Fixed height range `LO,HI` in µm; values outside are clipped.
        #[arg(long, value_name = "LO,HI", allow_hyphen_values = true)]
        range: Option<String>,
        /// Image path (default `<out>/<name>.pgm`).
        #[arg(long)]
        image: Option<PathBuf>,
    },
}

fn load_config(args: &ConfigArgs) -> Result<RunConfig> {
    let mut file = match &args.config {
        Some(p) => ConfigFile::read(p)?,
        None => ConfigFile::default(),
    };
    for o in &args.overrides {
        file.set(o)?;
    }
    RunConfig::from_file(&file)
}

fn output_dir(cli_out: &Option<PathBuf>, cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cli_out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Run one parsed command line, writing the report to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    if cli.threads == Some(0) {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Resource(format!("cannot start worker threads: {e}")))?;
    let mut buf: Vec<u8> = Vec::new();
    let result = pool.install(|| dispatch(cli, &mut buf));
    out.write_all(&buf).map_err(|e| Error::io("<stdout>", e))?;
    result
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let w = |e: std::io::Error| Error::io("<stdout>", e);
    match &cli.command {
        Command::Simulate(args) => {
            let cfg = load_config(args)?;
            cmd_simulate(&cfg, &output_dir(&cli.out, &cfg)?, out)
        }
        Command::Analyze {
            heightfield,
            fixture,
            config,
        } => {
            let cfg = load_config(config)?;
            let hf = match (heightfield, fixture) {
                (Some(p), _) => HeightField::read_csv(p)?,
                (None, Some(f)) => fixture_field(*f, cli.seed),
                (None, None) => return Err(Error::Config("analyze needs a height field or --fixture".into())),
            };
            let report = cmd_analyze(&hf, &cfg)?;
            out.write_all(report.as_bytes()).map_err(w)?;
            if let Some(dir) = &cli.out {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                write_file(&dir.join("params.txt"), &report)?;
            }
            Ok(())
        }
        Command::Predict {
            yaw_deg,
            tilt_deg,
            scallop_mm,
            fz_mm,
            radius_mm,
            corner_radius_mm,
        } => {
            let tool = ToolDefinition::new(*radius_mm, *corner_radius_mm).map_err(|e| Error::Config(e.to_string()))?;
            let report = cmd_predict(*yaw_deg, *tilt_deg, *scallop_mm, *fz_mm, &tool)?;
            out.write_all(report.as_bytes()).map_err(w)
        }
        Command::Doe { design, run, config } => {
            let cfg = load_config(config)?;
            let table = match design {
                Some(p) => DesignTable::read_csv(p)?,
                None if *run => {
                    let t = run_factorial(&cfg)?;
                    let dir = output_dir(&cli.out, &cfg)?;
                    write_file(&dir.join("design.csv"), t.to_csv())?;
                    t
                }
                None => return Err(Error::Config("doe needs --design or --run".into())),
            };
            let effects = factor_effects(&table)?.to_csv();
            out.write_all(effects.as_bytes()).map_err(w)?;
            if let Some(dir) = &cli.out {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                write_file(&dir.join("effects.csv"), &effects)?;
            }
            Ok(())
        }
        Command::Render {
            heightfield,
            range,
            image,
        } => {
            let range = range.as_deref().map(parse_range).transpose()?;
            let hf = HeightField::read_csv(heightfield)?;
            let path = match image {
                Some(p) => p.clone(),
                None => {
                    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
                    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                    let stem = heightfield.file_stem().and_then(|s| s.to_str()).unwrap_or("heightfield");
                    dir.join(format!("{stem}.pgm"))
                }
            };
            hf.write_pgm(&path, range)?;
            writeln!(out, "image: {}", path.display()).map_err(w)
        }
    }
}

fn parse_range(s: &str) -> Result<(f64, f64)> {
    let bad = || Error::Config(format!("--range expects `LO,HI`, got `{s}`"));
    let (lo, hi) = s.split_once(',').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(bad());
    }
    Ok((lo, hi))
}

/// Synthetic 256 × 256 fields.
pub fn fixture_field(f: Fixture, seed: u64) -> HeightField {
    let n = 256;
    let d = 2.0 / n as f64;
    match f {
        Fixture::Sinusoid => {
            let xc = (n - 1) as f64 * d / 2.0;
            HeightField::from_fn(n, n, d, d, |x, _| 2.0 * (TAU * (x - xc) / 0.5).cos())
        }
        Fixture::Constant => HeightField::from_fn(n, n, d, d, |_, _| 1.0),
        Fixture::Noise => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let z = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            HeightField::new(n, n, d, d, z).expect("fixture dimensions are valid")
        }
    }
}

/// Simulate the configured job and write `heightfield.csv` and `stats.json`
/// to `dir`.
pub fn cmd_simulate(cfg: &RunConfig, dir: &Path, out: &mut dyn Write) -> Result<()> {
    let (field, stats) = simulate_config(cfg)?;
    let hf_path = dir.join("heightfield.csv");
    let stats_path = dir.join("stats.json");
    field.write_csv(&hf_path)?;
    write_file(&stats_path, stats.to_json(cfg.mode.kind) + "\n")?;
    let w = |e: std::io::Error| Error::io("<stdout>", e);
    writeln!(
        out,
        "simulated {} states on {} x {} cells ({} untouched)",
        stats.states, field.nx, field.ny, stats.masked_cells
    )
    .map_err(w)?;
    writeln!(out, "heightfield: {}", hf_path.display()).map_err(w)?;
    writeln!(out, "stats: {}", stats_path.display()).map_err(w)
}

/// Height field (µm) and counters for the configured job.
pub fn simulate_config(cfg: &RunConfig) -> Result<(HeightField, SimStats)> {
    if let Some(job) = &cfg.job {
        let mut setup = job.setup;
        setup.mode = cfg.mode;
        let run = run_plane_case(&job.case, &cfg.tool, &setup)?;
        return Ok((run.field, run.stats));
    }
    let path = cfg
        .trajectory
        .as_ref()
        .ok_or_else(|| Error::Config("nothing to simulate: set trajectory.path or job.* keys".into()))?;
    let grid = cfg
        .grid
        .ok_or_else(|| Error::Config("a trajectory run needs grid.* keys".into()))?;
    let rpm = cfg
        .spindle_rpm
        .ok_or_else(|| Error::Config("a trajectory run needs spindle.rpm".into()))?;
    let postures = read_trajectory_csv(path)?;
    if postures.is_empty() {
        return Err(Error::Input(format!("{}: trajectory has no postures", path.display())));
    }
    let traj = Trajectory::new(postures, rpm_to_rad_s(rpm))?;
    let sampling = sample_trajectory(&traj, cfg.dalpha, 0.0)?;
    let mut net = LineNet::new(cfg.surface, grid.bounds, grid.nx, grid.ny, grid.stock)?;
    let mut res = simulate(&mut net, &sampling.states, &cfg.tool, &cfg.mode)?;
    res.stats.under_sampled_segments = sampling.under_sampled_segments as u64;
    Ok((res.field, res.stats))
}

/// `key = value` report of the areal parameters.
pub fn cmd_analyze(hf: &HeightField, cfg: &RunConfig) -> Result<String> {
    let opts = ArealOptions {
        sal_threshold: cfg.sal_threshold,
    };
    Ok(compute_all(hf, &opts).to_report())
}

/// Equivalent radius under both denominator forms, the stepover and Sz
/// estimates for each, under both branch orders.
pub fn cmd_predict(yaw_deg: f64, tilt_deg: f64, hc: f64, fz: f64, tool: &ToolDefinition) -> Result<String> {
    let (yaw, tilt) = (yaw_deg.to_radians(), tilt_deg.to_radians());
    if !(yaw_deg.abs() < 90.0 && (0.0..=90.0).contains(&tilt_deg)) {
        return Err(Error::Config(format!(
            "angles out of range: yaw {yaw_deg} deg must lie in (-90, 90), tilt {tilt_deg} deg in [0, 90]"
        )));
    }
    if !(hc > 0.0 && fz > 0.0) {
        return Err(Error::Config("scallop height and feed per tooth must be positive".into()));
    }
    let mut s = format!(
        "# yaw_deg={yaw_deg} tilt_deg={tilt_deg} scallop_mm={hc} fz_mm={fz} R_mm={} r_mm={}\n",
        tool.radius, tool.corner_radius
    );
    let undef = |e: &Error| format!("undef({e})");
    match envelope_radius(yaw, tilt, tool) {
        Ok(v) => s += &format!("envelope_radius_mm = {v:.6}\n"),
        Err(e) => s += &format!("envelope_radius_mm = {}\n", undef(&e)),
    }
    for (form, fname) in [
        (EffectiveRadiusForm::AsPrinted, "as_printed"),
        (EffectiveRadiusForm::Variant, "variant"),
    ] {
        let req = match effective_radius(yaw, tilt, tool, form) {
            Ok(v) => v,
            Err(e) => {
                s += &format!("Req_mm[{fname}] = {}\n", undef(&e));
                s += &format!("stepover_mm[{fname}] = undef(no equivalent radius)\n");
                for bname in ["as_printed", "hc_additive_swapped"] {
                    s += &format!("Sz_um[{fname},{bname}] = undef(no equivalent radius)\n");
                }
                continue;
            }
        };
        s += &format!("Req_mm[{fname}] = {req:.6}\n");
        match stepover_from_scallop(hc, req) {
            Ok(v) => s += &format!("stepover_mm[{fname}] = {v:.6}\n"),
            Err(e) => s += &format!("stepover_mm[{fname}] = {}\n", undef(&e)),
        }
        for (branch, bname) in [
            (SzBranch::AsPrinted, "as_printed"),
            (SzBranch::HcAdditiveSwapped, "hc_additive_swapped"),
        ] {
            match predict_sz(fz, hc, req, tool.corner_radius, branch) {
                Ok(v) => s += &format!("Sz_um[{fname},{bname}] = {:.6}\n", v * 1000.0),
                Err(e) => s += &format!("Sz_um[{fname},{bname}] = {}\n", undef(&e)),
            }
        }
    }
    Ok(s)
}

/// Simulate and analyze every case of the configured factorial.
pub fn run_factorial(cfg: &RunConfig) -> Result<DesignTable> {
    let mut table = DesignTable::new(PARAM_KEYS.iter().map(|k| k.to_string()).collect());
    let opts = ArealOptions {
        sal_threshold: cfg.sal_threshold,
    };
    for case in cfg.doe.cases() {
        let mut setup = crate::job::PlaneSetup {
            grid: cfg.doe.grid,
            dalpha: cfg.dalpha,
            ..Default::default()
        };
        setup.mode = cfg.mode;
        let run = run_plane_case(&case, &cfg.tool, &setup)?;
        let p = compute_all(&run.field, &opts);
        table.push(
            [case.yaw_deg, case.tilt_deg, case.scallop_mm, case.feedrate_m_per_min],
            p.values().iter().map(|v| v.value().unwrap_or(f64::NAN)).collect(),
        )?;
    }
    Ok(table)
}

/// Parse arguments, run, and map any failure to a one-line diagnostic on
/// `err` and an exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            let _ = writeln!(err, "error[config]: {first}");
            return 1;
        }
    };
    match run(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let kind = match e.exit_code() {
                1 => "config",
                2 => "input",
                _ => "simulation",
            };
            let line = e.to_string().replace('\n', " ");
            let _ = writeln!(err, "error[{kind}]: {line}");
            e.exit_code()
        }
    }
}
