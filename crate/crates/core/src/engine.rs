//! N-buffer material removal.
//!
//! Every line of the net is truncated at its lowest intersection with the
//! cutter. Work per tool state is limited to the cells under the projection
//! of the relevant part of the tool (the angular sector swept by the tooth in
//! tooth-gated mode, clipped to the height of the remaining material), and a
//! cheap lower bound on the hit parameter rejects most of those cells before
//! any root finding.

use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::heightfield::HeightField;
use crate::kinematics::SampledToolState;
use crate::surface::LineNet;
use crate::tool::{azimuth, local_intersection, CuttingEdge, ToolDefinition, ToolFrame, Vec3};

const ROW_BAND: usize = 8;
const STATE_BATCH: usize = 2048;
const HULL_PAD: f64 = 1e-7;
/// Each tooth window also reaches this fraction of its length behind the
/// tooth. Between two samples the tool translates, so a cell's azimuth
/// drifts; without the overlap a cell drifting against the rotation can
/// slip past a window boundary and never be cut.
pub const GATE_OVERLAP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    /// Every state removes the full tool volume.
    Envelope,
    /// A hit counts only if its azimuth was swept by a tooth during the
    /// state's spindle window.
    ToothGated,
}

impl FromStr for ModeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "envelope" => Ok(ModeKind::Envelope),
            "tooth_gated" | "tooth-gated" | "gated" => Ok(ModeKind::ToothGated),
            other => Err(Error::Config(format!("unknown simulation mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationMode {
    pub kind: ModeKind,
    /// Restrict work to cells near the tool. Disabling it tests every line
    /// against every state, which is only useful as a reference.
    pub culling: bool,
    /// Radius of the culling cylinder around the tool axis; defaults to `R`.
    pub cull_radius: Option<f64>,
}

impl SimulationMode {
    pub fn new(kind: ModeKind) -> Self {
        Self {
            kind,
            culling: true,
            cull_radius: None,
        }
    }

    pub fn envelope() -> Self {
        Self::new(ModeKind::Envelope)
    }

    pub fn tooth_gated() -> Self {
        Self::new(ModeKind::ToothGated)
    }

    pub fn unculled(mut self) -> Self {
        self.culling = false;
        self
    }

    fn radius(&self, tool: &ToolDefinition) -> Result<f64> {
        match self.cull_radius {
            None => Ok(tool.radius),
            Some(r) if r >= tool.radius => Ok(r),
            Some(r) => Err(Error::domain(format!(
                "cull radius {r} is smaller than the tool radius {}",
                tool.radius
            ))),
        }
    }
}

/// Counters accumulated over a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SimStats {
    pub states: u64,
    pub cells: u64,
    /// Cell tests inside the culled footprints.
    pub candidates: u64,
    /// Candidates rejected by the lower bound.
    pub pruned: u64,
    /// Exact line/cutter intersections computed.
    pub intersections: u64,
    /// Hits rejected because their azimuth was outside the tooth window.
    pub gated_out: u64,
    /// Cells lowered.
    pub updates: u64,
    pub touched_cells: u64,
    pub masked_cells: u64,
    pub under_sampled_segments: u64,
}

impl SimStats {
    fn add(mut self, o: SimStats) -> SimStats {
        self.candidates += o.candidates;
        self.pruned += o.pruned;
        self.intersections += o.intersections;
        self.gated_out += o.gated_out;
        self.updates += o.updates;
        self
    }

    /// Fraction of `states x cells` pairs never examined.
    pub fn culled_fraction(&self) -> f64 {
        let total = self.states as f64 * self.cells as f64;
        if total == 0.0 {
            0.0
        } else {
            1.0 - self.candidates as f64 / total
        }
    }

    pub fn to_json(&self, mode: ModeKind) -> String {
        #[derive(Serialize)]
        struct Report<'a> {
            mode: ModeKind,
            #[serde(flatten)]
            stats: &'a SimStats,
            culled_fraction: f64,
        }
        serde_json::to_string_pretty(&Report {
            mode,
            stats: self,
            culled_fraction: self.culled_fraction(),
        })
        .expect("stats serialize")
    }
}

/// Geometry shared by all states of a run.
struct Context<'a> {
    tool: &'a ToolDefinition,
    gated: bool,
    culling: bool,
    radius: f64,
    z_lo: f64,
    z_hi: f64,
    period: f64,
    margin: f64,
    material_top: f64,
    depth: f64,
}

impl<'a> Context<'a> {
    fn new(net: &LineNet, tool: &'a ToolDefinition, mode: &SimulationMode) -> Result<Self> {
        let mut radius = mode.radius(tool)?;
        let (z_lo, z_hi) = match (&tool.mesh, tool.edge) {
            (Some(mesh), _) => {
                radius = radius.max(tool.radius + 1e-6);
                mesh.bounding_box().map_or((0.0, 0.0), |(lo, hi)| (lo.z, hi.z))
            }
            (None, CuttingEdge::FlatAndFillet) => (0.0, tool.flute_height),
            (None, CuttingEdge::CornerCircle) => (0.0, 2.0 * tool.corner_radius),
        };
        Ok(Self {
            tool,
            gated: mode.kind == ModeKind::ToothGated,
            culling: mode.culling,
            radius,
            z_lo,
            z_hi,
            period: std::f64::consts::TAU / tool.tooth_count as f64,
            margin: net.max_normal_tilt() * net.depth.max(net.stock) + HULL_PAD,
            material_top: net.material_top(),
            depth: net.depth,
        })
    }
}

/// Per-state precomputation.
struct Plan {
    frame: ToolFrame,
    /// Accepted azimuth span past each tooth; `>= period` accepts everything.
    window: f64,
    /// Convex footprint in world XY (counter-clockwise), empty if the tool
    /// cannot reach any material.
    hull: Vec<[f64; 2]>,
    rows: (usize, usize),
}

impl Plan {
    fn new(ctx: &Context, net: &LineNet, s: &SampledToolState) -> Plan {
        let frame = s.state.frame();
        let window = if ctx.gated { s.window_length() } else { f64::INFINITY };
        let mut plan = Plan {
            frame,
            window,
            hull: Vec::new(),
            rows: (0, net.ny - 1),
        };
        if !ctx.culling {
            return plan;
        }

        // local prism enclosing the relevant part of the tool
        let mut ring: Vec<[f64; 2]> = Vec::with_capacity(16);
        let lag = window * GATE_OVERLAP;
        let span = window + lag;
        let full = span >= ctx.period || ctx.tool.tooth_count > 1 || span > std::f64::consts::FRAC_PI_4;
        if full {
            let n = 16;
            let rr = ctx.radius / (std::f64::consts::PI / n as f64).cos();
            for k in 0..n {
                let a = std::f64::consts::TAU * k as f64 / n as f64;
                ring.push([rr * a.cos(), rr * a.sin()]);
            }
        } else {
            let half = span / 2.0;
            let rm = ctx.radius / half.cos();
            let at = |r: f64, a: f64| [r * (a - lag).cos(), r * (a - lag).sin()];
            ring.push([0.0, 0.0]);
            ring.push(at(ctx.radius, 0.0));
            ring.push(at(rm, half));
            ring.push(at(ctx.radius, span));
        }
        let mut pts: Vec<Vec3> = Vec::with_capacity(ring.len() * 2);
        for z in [ctx.z_lo, ctx.z_hi] {
            for p in &ring {
                pts.push(frame.to_world(&Vec3::new(p[0], p[1], z)));
            }
        }

        // clip by the highest material point
        let top = ctx.material_top + HULL_PAD;
        let mut xy: Vec<[f64; 2]> = Vec::with_capacity(pts.len() * 4);
        for (a, p) in pts.iter().enumerate() {
            if p.z <= top {
                xy.push([p.x, p.y]);
            }
            for q in &pts[a + 1..] {
                if (p.z - top) * (q.z - top) < 0.0 {
                    let u = (top - p.z) / (q.z - p.z);
                    xy.push([p.x + u * (q.x - p.x), p.y + u * (q.y - p.y)]);
                }
            }
        }
        if xy.is_empty() {
            plan.rows = (1, 0);
            return plan;
        }
        let m = ctx.margin;
        let mut grown = Vec::with_capacity(xy.len() * 4);
        for p in &xy {
            for (sx, sy) in [(-m, -m), (m, -m), (m, m), (-m, m)] {
                grown.push([p[0] + sx, p[1] + sy]);
            }
        }
        plan.hull = convex_hull(grown);

        let (ymin, ymax) = plan
            .hull
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[1]), hi.max(p[1])));
        let jlo = ((ymin - net.y0) / net.gy).ceil().max(0.0);
        let jhi = ((ymax - net.y0) / net.gy).floor().min((net.ny - 1) as f64);
        plan.rows = if jhi < jlo || jhi < 0.0 {
            (1, 0)
        } else {
            (jlo as usize, jhi as usize)
        };
        plan
    }

    fn is_empty(&self) -> bool {
        self.rows.0 > self.rows.1
    }
}

/// Grid columns of row `y` covered by a convex footprint; an empty hull
/// covers the whole row.
fn columns(hull: &[[f64; 2]], x0: f64, gx: f64, nx: usize, y: f64) -> Option<(usize, usize)> {
    if hull.is_empty() {
        return Some((0, nx - 1));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let n = hull.len();
    for k in 0..n {
        let p = hull[k];
        let q = hull[(k + 1) % n];
        if y < p[1].min(q[1]) || y > p[1].max(q[1]) {
            continue;
        }
        if q[1] == p[1] {
            lo = lo.min(p[0].min(q[0]));
            hi = hi.max(p[0].max(q[0]));
        } else {
            let x = p[0] + (y - p[1]) / (q[1] - p[1]) * (q[0] - p[0]);
            lo = lo.min(x);
            hi = hi.max(x);
        }
    }
    if !(lo <= hi) {
        return None;
    }
    let ilo = ((lo - x0) / gx).ceil().max(0.0);
    let ihi = ((hi - x0) / gx).floor().min((nx - 1) as f64);
    (ihi >= ilo).then_some((ilo as usize, ihi as usize))
}

/// Andrew's monotone chain; returns the hull counter-clockwise.
fn convex_hull(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross =
        |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(pts.len() + 1);
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

enum Probe {
    Pruned,
    Miss,
    GatedOut,
    Hit(f64),
}

/// New cut offset for one line against one state, if it lowers `c`.
#[inline]
fn probe(ctx: &Context, plan: &Plan, anchor: &Vec3, normal: &Vec3, c: f64) -> Probe {
    let origin = anchor - normal * ctx.depth;
    let o = plan.frame.to_local(&origin);
    let d = plan.frame.dir_to_local(normal);
    let t_limit = c + ctx.depth;

    if ctx.culling && d.z > 1e-12 {
        if ctx.tool.mesh.is_some() {
            if (ctx.z_lo - o.z) / d.z >= t_limit {
                return Probe::Pruned;
            }
        } else {
            // any hit before t_limit lies above the lowest profile height
            // reachable over the radial range swept by the line
            let t0 = -o.z / d.z;
            if t0 >= t_limit {
                return Probe::Pruned;
            }
            let px = o.x + d.x * t0;
            let py = o.y + d.y * t0;
            let rho0 = (px * px + py * py).sqrt();
            let span = (d.x * d.x + d.y * d.y).sqrt() * (t_limit - t0);
            match ctx.tool.lower_profile_min(rho0 - span, rho0 + span) {
                None => return Probe::Pruned,
                Some(h) if t0 + h / d.z >= t_limit => return Probe::Pruned,
                _ => {}
            }
        }
    }

    let t = match &ctx.tool.mesh {
        Some(mesh) => match mesh.nearest(&o, &d) {
            Some(t) => t,
            None => return Probe::Miss,
        },
        None => {
            if ctx.tool.contains_local(&o) {
                0.0
            } else {
                match local_intersection(&o, &d, ctx.tool) {
                    Some(t) => t,
                    None => return Probe::Miss,
                }
            }
        }
    };
    if t >= t_limit {
        return Probe::Miss;
    }
    if plan.window * (1.0 + GATE_OVERLAP) < ctx.period {
        let phi = azimuth(&(o + d * t)).rem_euclid(ctx.period);
        if phi >= plan.window && phi < ctx.period - plan.window * GATE_OVERLAP {
            return Probe::GatedOut;
        }
    }
    Probe::Hit(t - ctx.depth)
}

fn run_batch(net: &mut LineNet, ctx: &Context, plans: &[Plan]) -> SimStats {
    let (nx, x0, y0, gx, gy) = (net.nx, net.x0, net.y0, net.gx, net.gy);
    let LineNet {
        anchors,
        normals,
        cut,
        touched,
        ..
    } = net;
    let anchors = &*anchors;
    let normals = &*normals;

    cut.par_chunks_mut(ROW_BAND * nx)
        .zip(touched.par_chunks_mut(ROW_BAND * nx))
        .enumerate()
        .map(|(band, (cut, touched))| {
            let j0 = band * ROW_BAND;
            let j1 = j0 + cut.len() / nx - 1;
            let mut stats = SimStats::default();
            for plan in plans {
                if plan.is_empty() || plan.rows.1 < j0 || plan.rows.0 > j1 {
                    continue;
                }
                for j in plan.rows.0.max(j0)..=plan.rows.1.min(j1) {
                    let Some((ilo, ihi)) = columns(&plan.hull, x0, gx, nx, y0 + j as f64 * gy) else {
                        continue;
                    };
                    for i in ilo..=ihi {
                        let k = j * nx + i;
                        let local = k - j0 * nx;
                        stats.candidates += 1;
                        match probe(ctx, plan, &anchors[k], &normals[k], cut[local]) {
                            Probe::Pruned => stats.pruned += 1,
                            Probe::Miss => stats.intersections += 1,
                            Probe::GatedOut => {
                                stats.intersections += 1;
                                stats.gated_out += 1;
                            }
                            Probe::Hit(c) => {
                                stats.intersections += 1;
                                if c < cut[local] {
                                    cut[local] = c;
                                    touched[local] = true;
                                    stats.updates += 1;
                                }
                            }
                        }
                    }
                }
            }
            stats
        })
        .reduce(SimStats::default, SimStats::add)
}

/// Apply one tool state to the net.
pub fn cut_sample(
    net: &mut LineNet,
    state: &SampledToolState,
    tool: &ToolDefinition,
    mode: &SimulationMode,
) -> Result<SimStats> {
    let ctx = Context::new(net, tool, mode)?;
    let plan = Plan::new(&ctx, net, state);
    let mut stats = run_batch(net, &ctx, std::slice::from_ref(&plan));
    stats.states = 1;
    stats.cells = net.len() as u64;
    Ok(stats)
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    /// Heights above the deepest cut, µm; untouched cells masked.
    pub field: HeightField,
    pub stats: SimStats,
}

/// Sweep all states through the net.
pub fn simulate(
    net: &mut LineNet,
    states: &[SampledToolState],
    tool: &ToolDefinition,
    mode: &SimulationMode,
) -> Result<SimOutput> {
    if states.is_empty() {
        return Err(Error::Input("no tool states to simulate".into()));
    }
    let ctx = Context::new(net, tool, mode)?;
    let mut stats = SimStats::default();
    for batch in states.chunks(STATE_BATCH) {
        let plans: Vec<Plan> = batch.par_iter().map(|s| Plan::new(&ctx, net, s)).collect();
        stats = stats.add(run_batch(net, &ctx, &plans));
    }
    stats.states = states.len() as u64;
    stats.cells = net.len() as u64;
    let field = cut_heights(net)?;
    stats.touched_cells = net.touched.iter().filter(|&&t| t).count() as u64;
    stats.masked_cells = stats.cells - stats.touched_cells;
    Ok(SimOutput { field, stats })
}

/// Cut offsets as heights above the deepest cut, µm.
pub fn cut_heights(net: &LineNet) -> Result<HeightField> {
    let reference = net
        .cut
        .iter()
        .zip(&net.touched)
        .filter(|(_, &t)| t)
        .map(|(&c, _)| c)
        .fold(f64::INFINITY, f64::min);
    if !reference.is_finite() {
        return Err(Error::EmptyResult);
    }
    let z = net
        .cut
        .iter()
        .zip(&net.touched)
        .map(|(&c, &t)| if t { (c - reference) * 1000.0 } else { f64::NAN })
        .collect();
    Ok(HeightField::new(net.nx, net.ny, net.gx, net.gy, z)?.with_origin(net.x0, net.y0))
}

/// Raw cut offsets along the normals, µm; untouched cells masked.
pub fn raw_offsets(net: &LineNet) -> Result<HeightField> {
    let z = net
        .cut
        .iter()
        .zip(&net.touched)
        .map(|(&c, &t)| if t { c * 1000.0 } else { f64::NAN })
        .collect();
    Ok(HeightField::new(net.nx, net.ny, net.gx, net.gy, z)?.with_origin(net.x0, net.y0))
}
