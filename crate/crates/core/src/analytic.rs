//! Closed-form roughness estimates and main-effect analysis of factorial
//! designs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Which term the Sz estimate keeps when the corner radius exceeds the
/// scallop-derived stepover.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SzBranch {
    /// `fz²/8r` when `r > sqrt(8 hc Req)`, else `hc + fz²/8r`.
    #[default]
    AsPrinted,
    /// The same two terms with the condition inverted.
    HcAdditiveSwapped,
}

impl FromStr for SzBranch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "as_printed" => Ok(Self::AsPrinted),
            "hc_additive_swapped" | "swapped" => Ok(Self::HcAdditiveSwapped),
            other => Err(Error::Config(format!("unknown Sz branch `{other}`"))),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive, got {v}")))
    }
}

/// Estimated Sz in mm from the feed per tooth, scallop height, equivalent
/// radius and corner radius (all mm).
pub fn predict_sz(fz: f64, hc: f64, req: f64, r: f64, branch: SzBranch) -> Result<f64> {
    positive("feed per tooth", fz)?;
    positive("scallop height", hc)?;
    positive("equivalent radius", req)?;
    positive("corner radius", r)?;
    let feed = fz * fz / (8.0 * r);
    let wide = r > (8.0 * hc * req).sqrt();
    let feed_only = match branch {
        SzBranch::AsPrinted => wide,
        SzBranch::HcAdditiveSwapped => !wide,
    };
    Ok(if feed_only { feed } else { hc + feed })
}

/// Stepover `sqrt(8 hc Req)` giving scallop `hc` between passes of
/// radius `Req` (small-cusp approximation).
pub fn stepover_from_scallop(hc: f64, req: f64) -> Result<f64> {
    positive("scallop height", hc)?;
    positive("equivalent radius", req)?;
    if hc >= req {
        return Err(Error::domain(format!(
            "scallop height {hc} mm must be smaller than the radius {req} mm"
        )));
    }
    Ok((8.0 * hc * req).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSummary {
    pub mean_abs_error: f64,
    /// Population standard deviation of the absolute errors.
    pub std_dev: f64,
}

/// Mean and spread of `|analytic - simulated|` over matched rows.
pub fn analytic_vs_sim_error(analytic: &[f64], simulated: &[f64]) -> Result<ErrorSummary> {
    if analytic.is_empty() {
        return Err(Error::Input("empty design".into()));
    }
    if analytic.len() != simulated.len() {
        return Err(Error::Input(format!(
            "{} analytic values for {} simulated",
            analytic.len(),
            simulated.len()
        )));
    }
    let errs: Vec<f64> = analytic.iter().zip(simulated).map(|(a, s)| (a - s).abs()).collect();
    let n = errs.len() as f64;
    let mean = errs.iter().sum::<f64>() / n;
    let var = errs.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
    Ok(ErrorSummary {
        mean_abs_error: mean,
        std_dev: var.sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Factor {
    Yaw,
    Tilt,
    Scallop,
    Feedrate,
}

impl Factor {
    pub const ALL: [Factor; 4] = [Factor::Yaw, Factor::Tilt, Factor::Scallop, Factor::Feedrate];

    /// Design CSV column.
    pub fn column(self) -> &'static str {
        match self {
            Factor::Yaw => "yaw_deg",
            Factor::Tilt => "tilt_deg",
            Factor::Scallop => "hc_mm",
            Factor::Feedrate => "vf_m_per_min",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Factor::Yaw => "yaw",
            Factor::Tilt => "tilt",
            Factor::Scallop => "scallop",
            Factor::Feedrate => "feedrate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignRow {
    /// Levels in [`Factor::ALL`] order.
    pub levels: [f64; 4],
    /// One value per response column; NaN when missing.
    pub responses: Vec<f64>,
}

/// Factor levels and responses of an experiment.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DesignTable {
    pub responses: Vec<String>,
    pub rows: Vec<DesignRow>,
}

fn parse_cell(cell: &str) -> Option<f64> {
    let c = cell.trim();
    if c.starts_with("undef") || c.eq_ignore_ascii_case("nan") {
        return Some(f64::NAN);
    }
    c.trim_start_matches(">=").parse().ok()
}

impl DesignTable {
    pub fn new(responses: Vec<String>) -> Self {
        Self {
            responses,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, levels: [f64; 4], responses: Vec<f64>) -> Result<()> {
        if responses.len() != self.responses.len() {
            return Err(Error::Input(format!(
                "row has {} responses, expected {}",
                responses.len(),
                self.responses.len()
            )));
        }
        self.rows.push(DesignRow { levels, responses });
        Ok(())
    }

    pub fn response_index(&self, name: &str) -> Option<usize> {
        self.responses.iter().position(|r| r == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.response_index(name)?;
        Some(self.rows.iter().map(|r| r.responses[k]).collect())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text, &path.display().to_string())
    }

    /// Header `yaw_deg,tilt_deg,hc_mm,vf_m_per_min,<responses...>`; `#`
    /// comments and blank lines are skipped; `undef(...)` and `nan` cells
    /// become NaN.
    pub fn parse_csv(text: &str, source: &str) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse {
            path: source.to_string(),
            line,
            msg,
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hl, header) = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let expect: Vec<&str> = Factor::ALL.iter().map(|f| f.column()).collect();
        if cols.len() < 4 || cols[..4] != expect[..] {
            return Err(err(hl, format!("header must start with {}", expect.join(","))));
        }
        let mut table = DesignTable::new(cols[4..].iter().map(|s| s.to_string()).collect());
        for (ln, line) in lines {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != cols.len() {
                return Err(err(ln, format!("expected {} fields, found {}", cols.len(), cells.len())));
            }
            let mut levels = [0.0; 4];
            for (k, c) in cells[..4].iter().enumerate() {
                levels[k] = c
                    .trim()
                    .parse()
                    .map_err(|_| err(ln, format!("bad factor level `{}`", c.trim())))?;
            }
            let responses = cells[4..]
                .iter()
                .map(|c| parse_cell(c).ok_or_else(|| err(ln, format!("bad response `{}`", c.trim()))))
                .collect::<Result<Vec<f64>>>()?;
            table.rows.push(DesignRow { levels, responses });
        }
        Ok(table)
    }

    pub fn to_csv(&self) -> String {
        let mut out = Factor::ALL.iter().map(|f| f.column()).collect::<Vec<_>>().join(",");
        for r in &self.responses {
            out.push(',');
            out.push_str(r);
        }
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .levels
                .iter()
                .chain(&row.responses)
                .map(|v| if v.is_nan() { "nan".to_string() } else { v.to_string() })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Distinct levels of one factor, ascending.
fn levels_of(design: &DesignTable, k: usize) -> Vec<f64> {
    let mut v: Vec<f64> = design.rows.iter().map(|r| r.levels[k]).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Mean and main effects of every response.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectTable {
    /// Levels per factor, ascending.
    pub levels: [Vec<f64>; 4],
    pub rows: Vec<ParamEffects>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamEffects {
    pub name: String,
    pub mean: f64,
    /// `None` for a factor held at one level.
    pub effects: [Option<f64>; 4],
}

impl ParamEffects {
    /// Coded level of `value` for factor `k`: -1 at the lowest level, +1 at
    /// the highest, 0 in between.
    fn coded(levels: &[f64], value: f64) -> f64 {
        if levels.len() < 2 {
            0.0
        } else if value == levels[0] {
            -1.0
        } else if value == levels[levels.len() - 1] {
            1.0
        } else {
            0.0
        }
    }

    /// Largest absolute effect.
    pub fn dominant(&self) -> Option<Factor> {
        Factor::ALL
            .iter()
            .zip(&self.effects)
            .filter_map(|(f, e)| e.map(|e| (*f, e.abs())))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(f, _)| f)
    }
}

impl EffectTable {
    pub fn get(&self, name: &str) -> Option<&ParamEffects> {
        self.rows.iter().find(|r| r.name == name)
    }

    /// `mean + Σ effect_j x_j` with coded levels.
    pub fn fitted(&self, name: &str, levels: &[f64; 4]) -> Option<f64> {
        let p = self.get(name)?;
        let mut y = p.mean;
        for ((effect, factor_levels), &level) in p.effects.iter().zip(&self.levels).zip(levels) {
            if let Some(e) = effect {
                y += e * ParamEffects::coded(factor_levels, level);
            }
        }
        Some(y)
    }

    /// One line per response: mean then the effects of yaw, tilt, scallop
    /// and feedrate.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("parameter,mean");
        for f in Factor::ALL {
            let _ = write!(out, ",{}", f.label());
        }
        out.push('\n');
        let show = |v: Option<f64>| match v {
            Some(v) if v.is_finite() => format!("{v:.6}"),
            Some(_) => "undef(missing responses)".to_string(),
            None => "undef(single level)".to_string(),
        };
        for p in &self.rows {
            let _ = write!(out, "{},{}", p.name, show(Some(p.mean)));
            for e in p.effects {
                let _ = write!(out, ",{}", show(e));
            }
            out.push('\n');
        }
        out
    }
}

/// Main effects of every response column. The design must be a balanced
/// full factorial: every combination of the observed levels appears the
/// same number of times. Each factor has one or two levels, except yaw
/// which may have three; the middle yaw level only enters the mean.
pub fn factor_effects(design: &DesignTable) -> Result<EffectTable> {
    if design.rows.is_empty() {
        return Err(Error::Input("empty design".into()));
    }
    let levels: [Vec<f64>; 4] = std::array::from_fn(|k| levels_of(design, k));
    for (k, f) in Factor::ALL.iter().enumerate() {
        let max = if *f == Factor::Yaw { 3 } else { 2 };
        if levels[k].len() > max {
            return Err(Error::Unbalanced(format!(
                "{} has {} levels, at most {max} allowed",
                f.label(),
                levels[k].len()
            )));
        }
    }
    let mut counts: BTreeMap<[u64; 4], usize> = BTreeMap::new();
    for r in &design.rows {
        *counts.entry(r.levels.map(f64::to_bits)).or_default() += 1;
    }
    let cells: usize = levels.iter().map(Vec::len).product();
    let reps: Vec<usize> = counts.values().copied().collect();
    if counts.len() != cells || reps.iter().any(|&c| c != reps[0]) {
        return Err(Error::Unbalanced(format!(
            "{} distinct runs over {cells} level combinations with counts {:?}",
            counts.len(),
            reps.iter().min().zip(reps.iter().max())
        )));
    }

    let rows = design
        .responses
        .iter()
        .enumerate()
        .map(|(p, name)| {
            let ys: Vec<f64> = design.rows.iter().map(|r| r.responses[p]).collect();
            let mean = ys.iter().sum::<f64>() / ys.len() as f64;
            let effects = std::array::from_fn(|k| {
                let lv = &levels[k];
                if lv.len() < 2 {
                    return None;
                }
                let avg = |level: f64| {
                    let sel: Vec<f64> = design
                        .rows
                        .iter()
                        .zip(&ys)
                        .filter(|(r, _)| r.levels[k] == level)
                        .map(|(_, &y)| y)
                        .collect();
                    sel.iter().sum::<f64>() / sel.len() as f64
                };
                Some((avg(lv[lv.len() - 1]) - avg(lv[0])) / 2.0)
            });
            ParamEffects {
                name: name.clone(),
                mean,
                effects,
            }
        })
        .collect();
    Ok(EffectTable { levels, rows })
}
