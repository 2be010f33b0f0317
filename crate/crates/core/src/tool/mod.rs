//! Filleted-end cutter geometry.
//!
//! The tool frame has its origin at the tool tip (centre of the bottom face)
//! and the tool axis along local +Z. The cutter is a surface of revolution
//! about that axis; the azimuth of a point is measured in the frame that
//! rotates with the spindle, so a hit at azimuth `phi` lies under the tooth
//! when `phi` is within the tooth's angular window.

mod mesh;
pub mod quartic;

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use mesh::{
    line_mesh_intersection, mesh_tool, parse_ascii_stl, read_ascii_stl, write_ascii_stl,
    ToolMesh, Triangle, DEFAULT_MAX_TRIANGLES,
};

pub type Vec3 = nalgebra::Vector3<f64>;

/// Default chord error used for tool tessellation: 0.1 µm.
pub const DEFAULT_CHORD_ERROR_MM: f64 = 1e-4;

/// Residual below which a near-tangent line still counts as touching.
pub const HIT_TOLERANCE_MM: f64 = 1e-9;

/// Which part of the cutter profile carries a cutting edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CuttingEdge {
    /// Flat bottom annulus of radius `R - r`, quarter-torus fillet and
    /// cylindrical barrel up to the flute height.
    FlatAndFillet,
    /// A round insert: the whole corner circle of radius `r`, centred at
    /// `R - r` from the axis, cuts; the bottom centre does not.
    CornerCircle,
}

impl std::str::FromStr for CuttingEdge {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat_and_fillet" | "flat_fillet" | "bull_nose" => Ok(Self::FlatAndFillet),
            "corner_circle" | "round_insert" => Ok(Self::CornerCircle),
            other => Err(Error::Config(format!("unknown cutting edge `{other}`"))),
        }
    }
}

/// Filleted-end (bull-nose) milling cutter.
#[derive(Debug, Clone)]
pub struct ToolDefinition {
    /// Nominal radius `R`, mm.
    pub radius: f64,
    /// Corner radius `r`, mm.
    pub corner_radius: f64,
    pub tooth_count: u32,
    /// Height of the cylindrical barrel top above the tip, mm.
    pub flute_height: f64,
    pub edge: CuttingEdge,
    pub mesh: Option<Arc<ToolMesh>>,
}

impl ToolDefinition {
    pub fn new(radius: f64, corner_radius: f64) -> Result<Self> {
        if !(radius.is_finite() && corner_radius.is_finite()) {
            return Err(Error::domain("tool radii must be finite"));
        }
        if !(radius > corner_radius && corner_radius > 0.0) {
            return Err(Error::domain(format!(
                "tool requires R > r > 0 (R = {radius}, r = {corner_radius})"
            )));
        }
        Ok(Self {
            radius,
            corner_radius,
            tooth_count: 1,
            flute_height: 2.0 * radius,
            edge: CuttingEdge::FlatAndFillet,
            mesh: None,
        })
    }

    pub fn with_teeth(mut self, tooth_count: u32) -> Result<Self> {
        if tooth_count == 0 {
            return Err(Error::domain("tooth_count must be >= 1"));
        }
        self.tooth_count = tooth_count;
        Ok(self)
    }

    pub fn with_edge(mut self, edge: CuttingEdge) -> Self {
        self.edge = edge;
        self
    }

    pub fn with_flute_height(mut self, flute_height: f64) -> Result<Self> {
        if !(flute_height > self.corner_radius) {
            return Err(Error::domain("flute height must exceed the corner radius"));
        }
        self.flute_height = flute_height;
        Ok(self)
    }

    /// Attach a tessellated cutting edge. Every vertex must lie within
    /// `R + 1e-6` mm of the tool axis.
    pub fn with_mesh(mut self, mesh: ToolMesh) -> Result<Self> {
        let limit = self.radius + 1e-6;
        if let Some(v) = mesh
            .triangles()
            .iter()
            .flat_map(|t| t.v.iter())
            .find(|v| (v.x * v.x + v.y * v.y).sqrt() > limit)
        {
            return Err(Error::Input(format!(
                "tool mesh vertex ({}, {}, {}) lies outside radius {}",
                v.x, v.y, v.z, self.radius
            )));
        }
        self.mesh = Some(Arc::new(mesh));
        Ok(self)
    }

    /// Radius of the ring traced by the corner circle centre.
    pub fn ring_radius(&self) -> f64 {
        self.radius - self.corner_radius
    }

    /// Lowest axial height of the cutting surface at radial distance `rho`,
    /// or `None` where no cutting surface exists.
    pub fn lower_profile(&self, rho: f64) -> Option<f64> {
        let r = self.corner_radius;
        let a = self.ring_radius();
        match self.edge {
            CuttingEdge::FlatAndFillet => {
                if rho < 0.0 || rho > self.radius {
                    None
                } else if rho <= a {
                    Some(0.0)
                } else {
                    let d = rho - a;
                    Some(r - (r * r - d * d).max(0.0).sqrt())
                }
            }
            CuttingEdge::CornerCircle => {
                let d = rho - a;
                if d.abs() > r {
                    None
                } else {
                    Some(r - (r * r - d * d).max(0.0).sqrt())
                }
            }
        }
    }

    /// Minimum of [`lower_profile`](Self::lower_profile) over `[lo, hi]`.
    pub(crate) fn lower_profile_min(&self, lo: f64, hi: f64) -> Option<f64> {
        let r = self.corner_radius;
        let a = self.ring_radius();
        let (min_rho, max_rho) = match self.edge {
            CuttingEdge::FlatAndFillet => (0.0, self.radius),
            CuttingEdge::CornerCircle => (a - r, a + r),
        };
        // tangent hits within the tolerance still count
        let lo = (lo - HIT_TOLERANCE_MM).max(min_rho);
        let hi = (hi + HIT_TOLERANCE_MM).min(max_rho);
        if lo > hi {
            return None;
        }
        // profile decreases up to `a` then increases
        let rho = a.clamp(lo, hi);
        self.lower_profile(rho)
    }

    /// Whether a point given in tool-frame coordinates lies inside the cutter solid.
    pub fn contains_local(&self, p: &Vec3) -> bool {
        let rho = (p.x * p.x + p.y * p.y).sqrt();
        let r = self.corner_radius;
        let a = self.ring_radius();
        match self.edge {
            CuttingEdge::FlatAndFillet => {
                if p.z < 0.0 || p.z > self.flute_height || rho > self.radius {
                    return false;
                }
                if p.z >= r || rho <= a {
                    return true;
                }
                let dz = r - p.z;
                rho <= a + (r * r - dz * dz).max(0.0).sqrt()
            }
            CuttingEdge::CornerCircle => {
                let dr = rho - a;
                let dz = p.z - r;
                dr * dr + dz * dz <= r * r
            }
        }
    }

    /// Nearest intersection of a line with the cutter, dispatching to the
    /// mesh when one is attached.
    pub fn intersect(&self, origin: &Vec3, dir: &Vec3, state: &ToolState) -> Option<Hit> {
        match &self.mesh {
            Some(mesh) => line_mesh_intersection(origin, dir, state, mesh),
            None => line_cutter_intersection(origin, dir, state, self),
        }
    }
}

/// Tool position and orientation at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToolState {
    pub tip: Vec3,
    /// Unit tool axis (I, J, K), pointing from the tip into the tool body.
    pub axis: Vec3,
    /// Spindle angle, radians in `[0, 2π)`.
    pub spindle_angle: f64,
}

impl ToolState {
    pub fn new(tip: Vec3, axis: Vec3, spindle_angle: f64) -> Result<Self> {
        let n = axis.norm();
        if !(n.is_finite() && n > 1e-12) {
            return Err(Error::domain("tool axis must be a non-zero vector"));
        }
        Ok(Self {
            tip,
            axis: axis / n,
            spindle_angle: wrap_angle(spindle_angle),
        })
    }

    pub fn frame(&self) -> ToolFrame {
        ToolFrame::new(self.tip, self.axis, self.spindle_angle)
    }
}

/// Orthonormal frame rotating with the spindle.
#[derive(Debug, Clone, Copy)]
pub struct ToolFrame {
    pub origin: Vec3,
    pub e1: Vec3,
    pub e2: Vec3,
    pub e3: Vec3,
}

impl ToolFrame {
    pub fn new(origin: Vec3, axis: Vec3, spindle_angle: f64) -> Self {
        let e3 = axis;
        let x_ref = reference_direction(&axis);
        let y_ref = e3.cross(&x_ref);
        let (s, c) = spindle_angle.sin_cos();
        let e1 = x_ref * c + y_ref * s;
        let e2 = e3.cross(&e1);
        Self { origin, e1, e2, e3 }
    }

    pub fn to_local(&self, p: &Vec3) -> Vec3 {
        let q = p - self.origin;
        Vec3::new(q.dot(&self.e1), q.dot(&self.e2), q.dot(&self.e3))
    }

    pub fn dir_to_local(&self, d: &Vec3) -> Vec3 {
        Vec3::new(d.dot(&self.e1), d.dot(&self.e2), d.dot(&self.e3))
    }

    pub fn to_world(&self, p: &Vec3) -> Vec3 {
        self.origin + self.e1 * p.x + self.e2 * p.y + self.e3 * p.z
    }
}

/// Zero-azimuth direction of the non-rotating tool frame: the world X axis
/// carried by the minimal rotation taking world Z onto `axis`.
pub fn reference_direction(axis: &Vec3) -> Vec3 {
    let (ax, ay, az) = (axis.x, axis.y, axis.z);
    if az <= -1.0 + 1e-9 {
        return Vec3::new(1.0, 0.0, 0.0);
    }
    let k = 1.0 / (1.0 + az);
    Vec3::new(1.0 - ax * ax * k, -ax * ay * k, -ax).normalize()
}

pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Intersection of a line with the cutter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    /// Line parameter, mm.
    pub t: f64,
    /// Azimuth of the hit point in the spindle-rotating frame, `[0, 2π)`.
    pub phi: f64,
}

/// Axial height of the bull-nose envelope at radial distance `rho`.
pub fn profile_height(rho: f64, tool: &ToolDefinition) -> Result<f64> {
    if !(rho >= 0.0 && rho <= tool.radius) {
        return Err(Error::domain(format!(
            "radial distance {rho} outside [0, {}]",
            tool.radius
        )));
    }
    let a = tool.ring_radius();
    let r = tool.corner_radius;
    if rho <= a {
        Ok(0.0)
    } else {
        let d = rho - a;
        Ok(r - (r * r - d * d).max(0.0).sqrt())
    }
}

/// Denominator form used for the equivalent cutting radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectiveRadiusForm {
    /// `R sinθt cos²θn + (R + r sinθt) cos²θn`.
    #[default]
    AsPrinted,
    /// `R sinθt cos²θn + (R + r sinθt) sin²θn`.
    Variant,
}

impl std::str::FromStr for EffectiveRadiusForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "as_printed" => Ok(Self::AsPrinted),
            "variant" => Ok(Self::Variant),
            other => Err(Error::Config(format!("unknown radius form `{other}`"))),
        }
    }
}

fn check_orientation(theta_n: f64, theta_t: f64) -> Result<()> {
    if !(theta_n.is_finite() && theta_n.abs() < PI / 2.0) {
        return Err(Error::domain(format!(
            "yaw angle {} deg outside (-90, 90)",
            theta_n.to_degrees()
        )));
    }
    if !(theta_t.is_finite() && (0.0..=PI / 2.0).contains(&theta_t)) {
        return Err(Error::domain(format!(
            "tilt angle {} deg outside [0, 90]",
            theta_t.to_degrees()
        )));
    }
    Ok(())
}

/// Equivalent cutting radius at the contact point for yaw `theta_n` and
/// tilt `theta_t` (radians).
pub fn effective_radius(
    theta_n: f64,
    theta_t: f64,
    tool: &ToolDefinition,
    form: EffectiveRadiusForm,
) -> Result<f64> {
    check_orientation(theta_n, theta_t)?;
    let big_r = tool.radius;
    let r = tool.corner_radius;
    let st = theta_t.sin();
    let (sn, cn) = theta_n.sin_cos();
    let numerator = r * (big_r + r * st);
    let second = match form {
        EffectiveRadiusForm::AsPrinted => cn * cn,
        EffectiveRadiusForm::Variant => sn * sn,
    };
    let denominator = big_r * st * cn * cn + (big_r + r * st) * second;
    if denominator <= 1e-12 {
        return Err(Error::SingularOrientation { denominator });
    }
    Ok(numerator / denominator)
}

/// Curvature radius of the swept cutter silhouette seen along the feed
/// direction, at its lowest point: `(R - r) cos²θn / sinθt + r`.
///
/// This is the radius that controls the transverse cusp between adjacent
/// passes on a plane.
pub fn envelope_radius(theta_n: f64, theta_t: f64, tool: &ToolDefinition) -> Result<f64> {
    check_orientation(theta_n, theta_t)?;
    let st = theta_t.sin();
    if st <= 1e-12 {
        return Err(Error::SingularOrientation { denominator: st });
    }
    let cn = theta_n.cos();
    Ok(tool.ring_radius() * cn * cn / st + tool.corner_radius)
}

/// Nearest intersection (smallest `t >= 0`) of the line `origin + t dir`
/// with the analytic cutter surface.
pub fn line_cutter_intersection(
    origin: &Vec3,
    dir: &Vec3,
    state: &ToolState,
    tool: &ToolDefinition,
) -> Option<Hit> {
    let frame = state.frame();
    let o = frame.to_local(origin);
    let d = frame.dir_to_local(dir);
    let t = local_intersection(&o, &d, tool)?;
    let p = o + d * t;
    Some(Hit {
        t,
        phi: azimuth(&p),
    })
}

pub(crate) fn azimuth(p: &Vec3) -> f64 {
    wrap_angle(p.y.atan2(p.x))
}

/// Smallest `t >= 0` where the local-frame line meets the cutter surface.
pub(crate) fn local_intersection(o: &Vec3, d: &Vec3, tool: &ToolDefinition) -> Option<f64> {
    let r = tool.corner_radius;
    let a = tool.ring_radius();
    let big_r = tool.radius;
    let mut best = f64::INFINITY;
    let mut consider = |t: f64| {
        if t >= 0.0 && t < best {
            best = t;
        }
    };

    let full_torus = tool.edge == CuttingEdge::CornerCircle;
    for t in torus_hits(o, d, a, r) {
        let p = o + d * t;
        let rho = (p.x * p.x + p.y * p.y).sqrt();
        if full_torus || (p.z <= r + HIT_TOLERANCE_MM && rho >= a - HIT_TOLERANCE_MM) {
            consider(t);
        }
    }

    if !full_torus {
        let h = tool.flute_height;
        if d.z.abs() > 1e-15 {
            // bottom annulus and top cap
            for (z, limit) in [(0.0, a), (h, big_r)] {
                let t = (z - o.z) / d.z;
                let px = o.x + d.x * t;
                let py = o.y + d.y * t;
                if (px * px + py * py).sqrt() <= limit + HIT_TOLERANCE_MM {
                    consider(t);
                }
            }
        }
        // barrel
        let qa = d.x * d.x + d.y * d.y;
        if qa > 1e-24 {
            let qb = 2.0 * (o.x * d.x + o.y * d.y);
            let qc = o.x * o.x + o.y * o.y - big_r * big_r;
            let disc = qb * qb - 4.0 * qa * qc;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                for t in [(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)] {
                    let z = o.z + d.z * t;
                    if z >= r - HIT_TOLERANCE_MM && z <= h + HIT_TOLERANCE_MM {
                        consider(t);
                    }
                }
            }
        }
    }

    best.is_finite().then_some(best)
}

/// Real intersections of a line with the torus of ring radius `a`, tube
/// radius `r`, centred on the axis at height `r`.
fn torus_hits(o: &Vec3, d: &Vec3, a: f64, r: f64) -> Vec<f64> {
    let oc = Vec3::new(o.x, o.y, o.z - r);
    let dd = d.norm_squared();
    // re-centre on the point of closest approach for conditioning
    let tc = -oc.dot(d) / dd;
    let q = oc + d * tc;
    if q.norm() > a + r + HIT_TOLERANCE_MM {
        return Vec::new();
    }

    let od = q.dot(d);
    let k = q.norm_squared() + a * a - r * r;
    let a2 = a * a;
    let coeffs = [
        dd * dd,
        4.0 * dd * od,
        2.0 * dd * k + 4.0 * od * od - 4.0 * a2 * (d.x * d.x + d.y * d.y),
        4.0 * k * od - 8.0 * a2 * (q.x * d.x + q.y * d.y),
        k * k - 4.0 * a2 * (q.x * q.x + q.y * q.y),
    ];
    let residual = |u: f64| -> f64 {
        let p = q + d * u;
        let rho = (p.x * p.x + p.y * p.y).sqrt();
        ((rho - a).hypot(p.z) - r).abs()
    };

    let mut hits: Vec<f64> = Vec::with_capacity(4);
    for root in quartic::quartic_roots(coeffs[0], coeffs[1], coeffs[2], coeffs[3], coeffs[4]) {
        if root.im.abs() > 1e-3 * (1.0 + root.re.abs()) {
            continue;
        }
        let mut u = root.re;
        let (f, df) = quartic::eval_quartic(coeffs, u);
        if df.abs() > 1e-300 {
            let polished = u - f / df;
            if polished.is_finite() && residual(polished) <= residual(u) {
                u = polished;
            }
        }
        if residual(u) <= HIT_TOLERANCE_MM {
            hits.push(u + tc);
        }
    }
    hits
}
