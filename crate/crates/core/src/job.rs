//! Tool path generation: raster passes on a plane and a feed-modulated
//! path along a ruling of the hyperbolic paraboloid.

use std::f64::consts::PI;

use crate::engine::{simulate, SimStats, SimulationMode};
use crate::error::{Error, Result};
use crate::heightfield::HeightField;
use crate::kinematics::{
    m_per_min_to_mm_s, sample_trajectory, Sampling, ToolPosture, Trajectory, DEFAULT_DALPHA,
};
use crate::surface::{make_plane_net, Bounds, NominalSurface};
use crate::tool::{envelope_radius, ToolDefinition, Vec3};

/// Tool orientation relative to the surface, radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Orientation {
    /// Yaw (screw) angle about the surface normal.
    pub yaw: f64,
    /// Tilt away from the normal.
    pub tilt: f64,
}

impl Orientation {
    pub fn from_degrees(yaw_deg: f64, tilt_deg: f64) -> Self {
        Self {
            yaw: yaw_deg.to_radians(),
            tilt: tilt_deg.to_radians(),
        }
    }
}

/// Tool axis for surface normal `normal` and feed direction `feed`.
///
/// The axis leans by the tilt from the normal toward the feed direction,
/// rotated about the normal by the yaw.
pub fn tool_axis(normal: &Vec3, feed: &Vec3, o: Orientation) -> Result<Vec3> {
    let n = normal.normalize();
    let f = feed - n * n.dot(feed);
    if f.norm() < 1e-12 {
        return Err(Error::domain("feed direction is parallel to the surface normal"));
    }
    let f = f.normalize();
    let side = n.cross(&f);
    let (sy, cy) = o.yaw.sin_cos();
    let (st, ct) = o.tilt.sin_cos();
    Ok((n * ct + (f * cy + side * sy) * st).normalize())
}

/// Tool tip placing the corner torus in contact with the surface at
/// `contact`, where the surface has unit normal `normal`.
pub fn contact_to_tip(contact: &Vec3, normal: &Vec3, axis: &Vec3, tool: &ToolDefinition) -> Vec3 {
    let r = tool.corner_radius;
    let e = -normal + axis * normal.dot(axis);
    if e.norm() < 1e-12 {
        return *contact;
    }
    let e = e.normalize();
    contact - axis * r - e * tool.ring_radius() + normal * r
}

/// Parallel one-way passes in `+x` on the plane `z = z0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneRaster {
    pub z0: f64,
    pub x_start: f64,
    pub x_end: f64,
    /// Contact line of the first pass.
    pub y_first: f64,
    pub passes: usize,
    pub stepover: f64,
    pub orientation: Orientation,
    /// mm/s
    pub feedrate: f64,
}

/// Posture pairs, one per pass.
pub fn plane_raster_passes(job: &PlaneRaster, tool: &ToolDefinition) -> Result<Vec<Vec<ToolPosture>>> {
    if !(job.x_end > job.x_start) {
        return Err(Error::domain("pass must run in +x"));
    }
    if job.passes == 0 {
        return Err(Error::domain("at least one pass is required"));
    }
    if job.passes > 1 && !(job.stepover > 0.0 && job.stepover.is_finite()) {
        return Err(Error::domain("stepover must be positive"));
    }
    let n = Vec3::z();
    let axis = tool_axis(&n, &Vec3::x(), job.orientation)?;
    (0..job.passes)
        .map(|k| {
            let y = job.y_first + k as f64 * job.stepover;
            let a = contact_to_tip(&Vec3::new(job.x_start, y, job.z0), &n, &axis, tool);
            let b = contact_to_tip(&Vec3::new(job.x_end, y, job.z0), &n, &axis, tool);
            Ok(vec![
                ToolPosture::new(a, axis, job.feedrate)?,
                ToolPosture::new(b, axis, job.feedrate)?,
            ])
        })
        .collect()
}

/// Sample each pass as its own trajectory starting at spindle angle
/// `alpha0`, and concatenate the states in pass order.
pub fn sample_passes(passes: &[Vec<ToolPosture>], omega: f64, dalpha: f64, alpha0: f64) -> Result<Sampling> {
    let mut out = Sampling::default();
    for p in passes {
        let traj = Trajectory::new(p.clone(), omega)?;
        let s = sample_trajectory(&traj, dalpha, alpha0)?;
        out.under_sampled_segments += s.under_sampled_segments;
        out.total_time += s.total_time;
        out.states.extend(s.states);
    }
    Ok(out)
}

/// Piecewise-linear feedrate against a path coordinate, clamped at the ends.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedProfile {
    points: Vec<(f64, f64)>,
}

impl FeedProfile {
    /// `(position mm, feedrate mm/s)` with strictly increasing positions.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::domain("feed profile needs at least one point"));
        }
        if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::domain("feed profile positions must increase"));
        }
        if points.iter().any(|p| !(p.1 > 0.0 && p.1.is_finite())) {
            return Err(Error::domain("feedrates must be positive"));
        }
        Ok(Self { points })
    }

    pub fn constant(feedrate: f64) -> Result<Self> {
        Self::new(vec![(0.0, feedrate)])
    }

    /// Fast, ramp down, slow plateau, ramp up, fast. `edges` are the four
    /// ramp boundaries.
    pub fn trapezoid(fast: f64, slow: f64, edges: [f64; 4]) -> Result<Self> {
        Self::new(vec![
            (edges[0], fast),
            (edges[1], slow),
            (edges[2], slow),
            (edges[3], fast),
        ])
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn at(&self, s: f64) -> f64 {
        let p = &self.points;
        if s <= p[0].0 {
            return p[0].1;
        }
        for w in p.windows(2) {
            if s <= w[1].0 {
                let u = (s - w[0].0) / (w[1].0 - w[0].0);
                return w[0].1 + u * (w[1].1 - w[0].1);
            }
        }
        p[p.len() - 1].1
    }
}

/// Path in `+x` along the ruling `y = y_rule` of a hyperbolic paraboloid,
/// with postures every `step` mm of x plus the profile breakpoints.
#[allow(clippy::too_many_arguments)]
pub fn hypar_rule_path(
    surface: &NominalSurface,
    y_rule: f64,
    x_start: f64,
    x_end: f64,
    step: f64,
    orientation: Orientation,
    tool: &ToolDefinition,
    feed: &FeedProfile,
) -> Result<Vec<ToolPosture>> {
    if !(x_end > x_start) || !(step > 0.0) {
        return Err(Error::domain("rule path needs x_end > x_start and a positive step"));
    }
    let mut xs: Vec<f64> = Vec::new();
    let count = ((x_end - x_start) / step).ceil() as usize;
    for k in 0..=count {
        xs.push((x_start + k as f64 * step).min(x_end));
    }
    xs.extend(feed.points().iter().map(|p| p.0).filter(|&x| x > x_start && x < x_end));
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| (*a - *b).abs() < 1e-9);

    xs.into_iter()
        .map(|x| {
            let contact = Vec3::new(x, y_rule, surface.height(x, y_rule));
            let n = surface.normal(x, y_rule);
            let tangent = match *surface {
                NominalSurface::Plane { .. } => Vec3::x(),
                NominalSurface::Hypar { k } => Vec3::new(1.0, 0.0, y_rule / k),
            };
            let axis = tool_axis(&n, &tangent, orientation)?;
            ToolPosture::new(contact_to_tip(&contact, &n, &axis, tool), axis, feed.at(x))
        })
        .collect()
}

/// One plane machining case, in shop units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneCase {
    pub yaw_deg: f64,
    pub tilt_deg: f64,
    /// Target scallop height, mm.
    pub scallop_mm: f64,
    pub feedrate_m_per_min: f64,
    pub feed_per_tooth_mm: f64,
    /// Overrides the stepover derived from the scallop height.
    pub stepover_mm: Option<f64>,
}

impl PlaneCase {
    pub fn orientation(&self) -> Orientation {
        Orientation::from_degrees(self.yaw_deg, self.tilt_deg)
    }

    /// Explicit stepover, or `sqrt(8 hc Re)` with the swept envelope radius.
    pub fn stepover(&self, tool: &ToolDefinition) -> Result<f64> {
        if let Some(s) = self.stepover_mm {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::domain("stepover must be positive"));
            }
            return Ok(s);
        }
        let o = self.orientation();
        let re = envelope_radius(o.yaw, o.tilt, tool)?;
        crate::analytic::stepover_from_scallop(self.scallop_mm, re)
    }

    /// Spindle speed giving the requested feed per tooth, rev/min.
    pub fn spindle_rpm(&self, tool: &ToolDefinition) -> Result<f64> {
        if !(self.feed_per_tooth_mm > 0.0 && self.feedrate_m_per_min > 0.0) {
            return Err(Error::domain("feed per tooth and feedrate must be positive"));
        }
        Ok(self.feedrate_m_per_min * 1000.0 / (self.feed_per_tooth_mm * tool.tooth_count as f64))
    }
}

/// Grid and sampling settings for [`run_plane_case`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneSetup {
    /// Points per side of the evaluation grid.
    pub grid: usize,
    /// Smallest evaluation window side, mm.
    pub min_window_mm: f64,
    /// Material above the nominal plane, mm.
    pub stock: f64,
    pub dalpha: f64,
    pub mode: SimulationMode,
    /// Spindle angle at the start of every pass, rad.
    pub pass_phase: f64,
}

impl Default for PlaneSetup {
    fn default() -> Self {
        Self {
            grid: 1024,
            min_window_mm: 2.5,
            stock: 0.03,
            dalpha: DEFAULT_DALPHA,
            mode: SimulationMode::tooth_gated(),
            pass_phase: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlaneRun {
    /// Heights over the evaluation window, µm.
    pub field: HeightField,
    pub stats: SimStats,
    pub stepover: f64,
    pub spindle_rpm: f64,
    pub window: Bounds,
    pub passes: usize,
}

/// Simulate a raster finish of a plane and return the window in steady
/// state.
///
/// The window spans whole multiples of the stepover across the feed and of
/// the feed per tooth along it, sampled periodically (the far edge is one
/// spacing short of the next period).
pub fn run_plane_case(case: &PlaneCase, tool: &ToolDefinition, setup: &PlaneSetup) -> Result<PlaneRun> {
    let s = case.stepover(tool)?;
    let rpm = case.spindle_rpm(tool)?;
    let fz = case.feed_per_tooth_mm * tool.tooth_count as f64;
    if setup.grid < 2 {
        return Err(Error::domain("grid needs at least 2 points per side"));
    }
    let span = |period: f64| (setup.min_window_mm / period).ceil().max(1.0) * period;
    let (wx, wy) = (span(fz), span(s));
    let g = setup.grid as f64;
    let window = Bounds::new(0.0, wx * (g - 1.0) / g, 0.0, wy * (g - 1.0) / g);
    let mut net = make_plane_net(0.0, window, setup.grid, setup.grid, setup.stock)?;

    let reach = 2.0 * tool.radius + 0.1;
    let k_lo = (-reach / s).floor();
    let k_hi = ((wy + reach) / s).ceil();
    let job = PlaneRaster {
        z0: 0.0,
        x_start: -reach,
        x_end: wx + reach,
        y_first: k_lo * s,
        passes: (k_hi - k_lo) as usize + 1,
        stepover: s,
        orientation: case.orientation(),
        feedrate: m_per_min_to_mm_s(case.feedrate_m_per_min),
    };
    let passes = plane_raster_passes(&job, tool)?;
    let omega = rpm * 2.0 * PI / 60.0;
    let sampling = sample_passes(&passes, omega, setup.dalpha, setup.pass_phase)?;
    let mut out = simulate(&mut net, &sampling.states, tool, &setup.mode)?;
    out.stats.under_sampled_segments = sampling.under_sampled_segments as u64;
    Ok(PlaneRun {
        field: out.field,
        stats: out.stats,
        stepover: s,
        spindle_rpm: rpm,
        window,
        passes: job.passes,
    })
}
