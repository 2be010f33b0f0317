//! Run configuration: a flat `section.key = value` text file.
//!
//! Units are part of the key names (`tool.radius_mm`, `sampling.dalpha_deg`).
//! Unknown keys are rejected so that a misspelt key never silently falls
//! back to its default.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::analytic::SzBranch;
use crate::engine::{ModeKind, SimulationMode};
use crate::error::{Error, Result};
use crate::job::{PlaneCase, PlaneSetup};
use crate::kinematics::DEFAULT_DALPHA;
use crate::surface::{Bounds, NominalSurface, DEFAULT_HYPAR_K};
use crate::tool::{read_ascii_stl, CuttingEdge, EffectiveRadiusForm, ToolDefinition};

pub const KNOWN_KEYS: &[&str] = &[
    "tool.radius_mm",
    "tool.corner_radius_mm",
    "tool.teeth",
    "tool.edge",
    "tool.flute_height_mm",
    "tool.mesh_path",
    "spindle.rpm",
    "sampling.dalpha_deg",
    "surface.kind",
    "surface.z0_mm",
    "surface.k_mm",
    "grid.xmin_mm",
    "grid.xmax_mm",
    "grid.ymin_mm",
    "grid.ymax_mm",
    "grid.nx",
    "grid.ny",
    "grid.stock_mm",
    "sim.mode",
    "sim.cull_radius_mm",
    "trajectory.path",
    "job.yaw_deg",
    "job.tilt_deg",
    "job.scallop_mm",
    "job.stepover_mm",
    "job.feedrate_m_per_min",
    "job.feed_per_tooth_mm",
    "job.grid",
    "job.window_mm",
    "job.stock_mm",
    "job.pass_phase_deg",
    "output.dir",
    "analysis.radius_form",
    "analysis.sz_branch",
    "analysis.sal_threshold",
    "doe.yaw_deg",
    "doe.tilt_deg",
    "doe.scallop_mm",
    "doe.feedrate_m_per_min",
    "doe.feed_per_tooth_mm",
    "doe.grid",
    "run.threads",
];

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    line: usize,
}

/// Raw key/value pairs with their origin, before interpretation.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    entries: BTreeMap<String, Entry>,
    source: String,
    base_dir: PathBuf,
}

impl ConfigFile {
    /// Relative paths in the file resolve against `base_dir`.
    pub fn parse(text: &str, source: &str, base_dir: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Config(format!("{source}:{}: {msg}", idx + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `section.key = value`, found `{line}`")))?;
            let key = key.trim();
            check_key(key).map_err(|e| err(e.to_string()))?;
            let entry = Entry {
                value: value.trim().to_string(),
                line: idx + 1,
            };
            if let Some(prev) = entries.insert(key.to_string(), entry) {
                return Err(err(format!("`{key}` already set on line {}", prev.line)));
            }
        }
        Ok(Self {
            entries,
            source: source.to_string(),
            base_dir: base_dir.to_path_buf(),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, &path.display().to_string(), base)
    }

    /// Override or add one `section.key=value` pair (command line).
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not `section.key=value`")))?;
        let key = key.trim();
        check_key(key)?;
        self.entries.insert(
            key.to_string(),
            Entry {
                value: value.trim().to_string(),
                line: 0,
            },
        );
        Ok(())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn locate(&self, key: &str) -> String {
        match self.entries.get(key) {
            Some(e) if e.line > 0 => format!("{}:{}: {key}", self.source, e.line),
            _ => format!("override {key}"),
        }
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        self.get_str(key)
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::Config(format!("{}: `{v}` is not a finite number", self.locate(key))))
            })
            .transpose()
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>> {
        self.get_str(key)
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| Error::Config(format!("{}: `{v}` is not a non-negative integer", self.locate(key))))
            })
            .transpose()
    }

    /// Comma separated numbers.
    pub fn get_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.get_str(key)
            .map(|v| {
                v.split(',')
                    .map(|s| {
                        s.trim().parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| {
                            Error::Config(format!("{}: `{}` is not a finite number", self.locate(key), s.trim()))
                        })
                    })
                    .collect()
            })
            .transpose()
    }

    pub fn get_path(&self, key: &str) -> Option<PathBuf> {
        self.get_str(key).map(|v| {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                self.base_dir.join(p)
            }
        })
    }

    fn parse_with<T>(&self, key: &str, f: impl Fn(&str) -> Result<T>) -> Result<Option<T>> {
        self.get_str(key)
            .map(|v| f(v).map_err(|e| Error::Config(format!("{}: {e}", self.locate(key)))))
            .transpose()
    }
}

fn check_key(key: &str) -> Result<()> {
    if KNOWN_KEYS.contains(&key) {
        Ok(())
    } else if !key.contains('.') {
        Err(Error::Config(format!("key `{key}` has no section")))
    } else {
        Err(Error::Config(format!("unknown key `{key}`")))
    }
}

/// Evaluation grid on the nominal surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub bounds: Bounds,
    pub nx: usize,
    pub ny: usize,
    /// mm
    pub stock: f64,
}

/// Generated raster finish of a plane.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneJob {
    pub case: PlaneCase,
    pub setup: PlaneSetup,
}

/// Factor levels of a generated full factorial.
#[derive(Debug, Clone, PartialEq)]
pub struct DoeLevels {
    pub yaw_deg: Vec<f64>,
    pub tilt_deg: Vec<f64>,
    pub scallop_mm: Vec<f64>,
    pub feedrate_m_per_min: Vec<f64>,
    /// One per feedrate level.
    pub feed_per_tooth_mm: Vec<f64>,
    pub grid: usize,
}

impl Default for DoeLevels {
    fn default() -> Self {
        Self {
            yaw_deg: vec![0.0, 20.0, 40.0],
            tilt_deg: vec![1.0, 10.0],
            scallop_mm: vec![0.005, 0.01],
            feedrate_m_per_min: vec![2.0, 4.0],
            feed_per_tooth_mm: vec![0.14, 0.27],
            grid: 512,
        }
    }
}

impl DoeLevels {
    /// Every level combination in yaw, tilt, scallop, feedrate order, with
    /// the feed per tooth matching the feedrate.
    pub fn cases(&self) -> Vec<PlaneCase> {
        let mut out = Vec::new();
        for &yaw in &self.yaw_deg {
            for &tilt in &self.tilt_deg {
                for &hc in &self.scallop_mm {
                    for (&vf, &fz) in self.feedrate_m_per_min.iter().zip(&self.feed_per_tooth_mm) {
                        out.push(PlaneCase {
                            yaw_deg: yaw,
                            tilt_deg: tilt,
                            scallop_mm: hc,
                            feedrate_m_per_min: vf,
                            feed_per_tooth_mm: fz,
                            stepover_mm: None,
                        });
                    }
                }
            }
        }
        out
    }
}

/// Interpreted, validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub tool: ToolDefinition,
    pub spindle_rpm: Option<f64>,
    /// rad
    pub dalpha: f64,
    pub surface: NominalSurface,
    pub grid: Option<GridSpec>,
    pub mode: SimulationMode,
    pub trajectory: Option<PathBuf>,
    pub job: Option<PlaneJob>,
    pub output_dir: PathBuf,
    pub radius_form: EffectiveRadiusForm,
    pub sz_branch: SzBranch,
    pub sal_threshold: f64,
    pub doe: DoeLevels,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::from_file(&ConfigFile::default()).expect("defaults are valid")
    }
}

fn domain_to_config(e: Error) -> Error {
    match e {
        Error::Domain(m) => Error::Config(m),
        other => other,
    }
}

impl RunConfig {
    pub fn read(path: &Path) -> Result<Self> {
        Self::from_file(&ConfigFile::read(path)?)
    }

    pub fn from_file(c: &ConfigFile) -> Result<Self> {
        let radius = c.get_f64("tool.radius_mm")?.unwrap_or(5.0);
        let corner = c.get_f64("tool.corner_radius_mm")?.unwrap_or(1.5);
        let mut tool = ToolDefinition::new(radius, corner).map_err(domain_to_config)?;
        if let Some(teeth) = c.get_usize("tool.teeth")? {
            let teeth = u32::try_from(teeth).map_err(|_| Error::Config("tool.teeth is too large".into()))?;
            tool = tool.with_teeth(teeth).map_err(domain_to_config)?;
        }
        if let Some(edge) = c.parse_with("tool.edge", |v| v.parse::<CuttingEdge>())? {
            tool = tool.with_edge(edge);
        }
        if let Some(h) = c.get_f64("tool.flute_height_mm")? {
            tool = tool.with_flute_height(h).map_err(domain_to_config)?;
        }
        if let Some(path) = c.get_path("tool.mesh_path") {
            tool = tool.with_mesh(read_ascii_stl(&path)?)?;
        }

        let spindle_rpm = c.get_f64("spindle.rpm")?;
        if let Some(rpm) = spindle_rpm {
            if !(rpm > 0.0) {
                return Err(Error::Config(format!("spindle.rpm must be positive, got {rpm}")));
            }
        }
        let dalpha_deg = c.get_f64("sampling.dalpha_deg")?;
        let dalpha = dalpha_deg.map_or(DEFAULT_DALPHA, f64::to_radians);
        if !(dalpha > 0.0) {
            return Err(Error::Config("sampling.dalpha_deg must be positive".into()));
        }

        let surface = match c.get_str("surface.kind").unwrap_or("plane") {
            "plane" => NominalSurface::Plane {
                z0: c.get_f64("surface.z0_mm")?.unwrap_or(0.0),
            },
            "hypar" | "hyperbolic_paraboloid" => {
                NominalSurface::hypar(c.get_f64("surface.k_mm")?.unwrap_or(DEFAULT_HYPAR_K)).map_err(domain_to_config)?
            }
            other => return Err(Error::Config(format!("unknown surface.kind `{other}`"))),
        };

        let grid_keys = ["grid.xmin_mm", "grid.xmax_mm", "grid.ymin_mm", "grid.ymax_mm", "grid.nx", "grid.ny"];
        let grid = if grid_keys.iter().any(|k| c.contains(k)) {
            let need = |k: &str| c.get_f64(k)?.ok_or_else(|| Error::Config(format!("missing `{k}`")));
            let count = |k: &str| c.get_usize(k)?.ok_or_else(|| Error::Config(format!("missing `{k}`")));
            let g = GridSpec {
                bounds: Bounds::new(
                    need("grid.xmin_mm")?,
                    need("grid.xmax_mm")?,
                    need("grid.ymin_mm")?,
                    need("grid.ymax_mm")?,
                ),
                nx: count("grid.nx")?,
                ny: count("grid.ny")?,
                stock: c.get_f64("grid.stock_mm")?.unwrap_or(0.03),
            };
            let b = g.bounds;
            if !(b.xmax > b.xmin && b.ymax > b.ymin) || g.nx < 2 || g.ny < 2 || !(g.stock > 0.0) {
                return Err(Error::Config("grid needs xmin < xmax, ymin < ymax, nx, ny >= 2 and stock > 0".into()));
            }
            Some(g)
        } else {
            None
        };

        let kind = c
            .parse_with("sim.mode", |v| v.parse::<ModeKind>())?
            .unwrap_or(ModeKind::ToothGated);
        let mut mode = SimulationMode::new(kind);
        mode.cull_radius = c.get_f64("sim.cull_radius_mm")?;
        if let Some(r) = mode.cull_radius {
            if r < tool.radius {
                return Err(Error::Config(format!("sim.cull_radius_mm {r} is below the tool radius")));
            }
        }

        let trajectory = c.get_path("trajectory.path");
        if let Some(p) = &trajectory {
            if !p.is_file() {
                return Err(Error::io(p, std::io::Error::from(std::io::ErrorKind::NotFound)));
            }
        }

        let job = if KNOWN_KEYS.iter().any(|k| k.starts_with("job.") && c.contains(k)) {
            Some(plane_job(c, &tool, spindle_rpm)?)
        } else {
            None
        };
        if job.is_some() && trajectory.is_some() {
            return Err(Error::Config("set either trajectory.path or job.* keys, not both".into()));
        }

        let radius_form = c
            .parse_with("analysis.radius_form", |v| v.parse::<EffectiveRadiusForm>())?
            .unwrap_or_default();
        let sz_branch = c.parse_with("analysis.sz_branch", |v| v.parse::<SzBranch>())?.unwrap_or_default();
        let sal_threshold = c.get_f64("analysis.sal_threshold")?.unwrap_or(0.2);
        if !(sal_threshold > 0.0 && sal_threshold < 1.0) {
            return Err(Error::Config("analysis.sal_threshold must lie in (0, 1)".into()));
        }

        let mut doe = DoeLevels::default();
        let lists: [(&str, &mut Vec<f64>); 5] = [
            ("doe.yaw_deg", &mut doe.yaw_deg),
            ("doe.tilt_deg", &mut doe.tilt_deg),
            ("doe.scallop_mm", &mut doe.scallop_mm),
            ("doe.feedrate_m_per_min", &mut doe.feedrate_m_per_min),
            ("doe.feed_per_tooth_mm", &mut doe.feed_per_tooth_mm),
        ];
        for (key, slot) in lists {
            if let Some(v) = c.get_list(key)? {
                *slot = v;
            }
        }
        if doe.feed_per_tooth_mm.len() != doe.feedrate_m_per_min.len() {
            return Err(Error::Config(
                "doe.feed_per_tooth_mm needs one value per doe.feedrate_m_per_min level".into(),
            ));
        }
        if let Some(g) = c.get_usize("doe.grid")? {
            doe.grid = g;
        }

        let threads = c.get_usize("run.threads")?;
        if threads == Some(0) {
            return Err(Error::Config("run.threads must be at least 1".into()));
        }

        Ok(Self {
            tool,
            spindle_rpm,
            dalpha,
            surface,
            grid,
            mode,
            trajectory,
            job,
            output_dir: c.get_path("output.dir").unwrap_or_else(|| PathBuf::from(".")),
            radius_form,
            sz_branch,
            sal_threshold,
            doe,
            threads,
        })
    }
}

fn plane_job(c: &ConfigFile, tool: &ToolDefinition, rpm: Option<f64>) -> Result<PlaneJob> {
    let need = |k: &str| c.get_f64(k)?.ok_or_else(|| Error::Config(format!("missing `{k}`")));
    let vf = need("job.feedrate_m_per_min")?;
    let fz = match (c.get_f64("job.feed_per_tooth_mm")?, rpm) {
        (Some(fz), None) => fz,
        (None, Some(rpm)) => vf * 1000.0 / (rpm * tool.tooth_count as f64),
        (Some(_), Some(_)) => {
            return Err(Error::Config("set either job.feed_per_tooth_mm or spindle.rpm, not both".into()))
        }
        (None, None) => return Err(Error::Config("a plane job needs job.feed_per_tooth_mm or spindle.rpm".into())),
    };
    let case = PlaneCase {
        yaw_deg: c.get_f64("job.yaw_deg")?.unwrap_or(0.0),
        tilt_deg: need("job.tilt_deg")?,
        scallop_mm: c.get_f64("job.scallop_mm")?.unwrap_or(0.005),
        feedrate_m_per_min: vf,
        feed_per_tooth_mm: fz,
        stepover_mm: c.get_f64("job.stepover_mm")?,
    };
    if !(case.feedrate_m_per_min > 0.0 && case.feed_per_tooth_mm > 0.0) {
        return Err(Error::Config("job feedrate and feed per tooth must be positive".into()));
    }
    if !(case.yaw_deg.abs() < 90.0 && (0.0..=90.0).contains(&case.tilt_deg)) {
        return Err(Error::Config(format!(
            "job angles out of range: yaw {} deg, tilt {} deg",
            case.yaw_deg, case.tilt_deg
        )));
    }
    let mut setup = PlaneSetup::default();
    if let Some(g) = c.get_usize("job.grid")? {
        setup.grid = g;
    }
    if let Some(w) = c.get_f64("job.window_mm")? {
        setup.min_window_mm = w;
    }
    if let Some(s) = c.get_f64("job.stock_mm")? {
        setup.stock = s;
    }
    if let Some(p) = c.get_f64("job.pass_phase_deg")? {
        setup.pass_phase = p.to_radians();
    }
    if let Some(d) = c.get_f64("sampling.dalpha_deg")? {
        setup.dalpha = d.to_radians();
    }
    let kind = c
        .parse_with("sim.mode", |v| v.parse::<ModeKind>())?
        .unwrap_or(ModeKind::ToothGated);
    setup.mode = SimulationMode::new(kind);
    if setup.grid < 2 || !(setup.min_window_mm > 0.0) || !(setup.stock > 0.0) {
        return Err(Error::Config("job.grid >= 2, job.window_mm > 0 and job.stock_mm > 0 required".into()));
    }
    Ok(PlaneJob { case, setup })
}
