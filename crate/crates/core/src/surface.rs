//! Line-net (N-buffer) model of the nominal part surface.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::tool::Vec3;

pub const DEFAULT_HYPAR_K: f64 = 50.0;
pub const DEFAULT_STOCK: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NominalSurface {
    /// `z = z0`
    Plane { z0: f64 },
    /// Hyperbolic paraboloid `z = x y / k`.
    Hypar { k: f64 },
}

impl NominalSurface {
    pub fn hypar(k: f64) -> Result<Self> {
        if k == 0.0 || !k.is_finite() {
            return Err(Error::domain("hyperbolic paraboloid warp constant must be non-zero"));
        }
        Ok(NominalSurface::Hypar { k })
    }

    pub fn height(&self, x: f64, y: f64) -> f64 {
        match *self {
            NominalSurface::Plane { z0 } => z0,
            NominalSurface::Hypar { k } => x * y / k,
        }
    }

    /// Unit normal with positive z component.
    pub fn normal(&self, x: f64, y: f64) -> Vec3 {
        match *self {
            NominalSurface::Plane { .. } => Vec3::z(),
            NominalSurface::Hypar { k } => Vec3::new(-y / k, -x / k, 1.0).normalize(),
        }
    }
}

impl FromStr for NominalSurface {
    type Err = Error;

    /// `plane` or `hypar`, with default parameters.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "plane" => Ok(NominalSurface::Plane { z0: 0.0 }),
            "hypar" | "hyperbolic_paraboloid" => Ok(NominalSurface::Hypar { k: DEFAULT_HYPAR_K }),
            other => Err(Error::Config(format!("unknown surface kind `{other}`"))),
        }
    }
}

pub fn surface_normal(surface: &NominalSurface, x: f64, y: f64) -> Vec3 {
    surface.normal(x, y)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Bounds {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Self {
        Self {
            xmin,
            xmax,
            ymin,
            ymax,
        }
    }
}

/// Grid of lines along the local surface normal. Cell `(i, j)` sits at
/// `x = xmin + i gx`, `y = ymin + j gy` and is stored at `j * nx + i`.
#[derive(Debug, Clone)]
pub struct LineNet {
    pub surface: NominalSurface,
    pub x0: f64,
    pub y0: f64,
    pub gx: f64,
    pub gy: f64,
    pub nx: usize,
    pub ny: usize,
    pub anchors: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    /// Offset of the material boundary along the normal, mm.
    pub cut: Vec<f64>,
    /// Whether a tool ever lowered the cell.
    pub touched: Vec<bool>,
    pub stock: f64,
    /// Lines extend this far below the nominal surface, mm.
    pub depth: f64,
}

impl LineNet {
    pub fn new(surface: NominalSurface, bounds: Bounds, nx: usize, ny: usize, stock: f64) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::domain(format!("grid needs at least 2x2 points, got {nx}x{ny}")));
        }
        let Bounds {
            xmin,
            xmax,
            ymin,
            ymax,
        } = bounds;
        if !(xmax > xmin && ymax > ymin) || ![xmin, xmax, ymin, ymax].iter().all(|v| v.is_finite()) {
            return Err(Error::domain("degenerate grid bounds"));
        }
        if !(stock > 0.0 && stock.is_finite()) {
            return Err(Error::domain("stock allowance must be positive"));
        }
        let gx = (xmax - xmin) / (nx - 1) as f64;
        let gy = (ymax - ymin) / (ny - 1) as f64;
        let n = nx * ny;
        let mut anchors = Vec::with_capacity(n);
        let mut normals = Vec::with_capacity(n);
        for j in 0..ny {
            let y = ymin + j as f64 * gy;
            for i in 0..nx {
                let x = xmin + i as f64 * gx;
                anchors.push(Vec3::new(x, y, surface.height(x, y)));
                normals.push(surface.normal(x, y));
            }
        }
        Ok(Self {
            surface,
            x0: xmin,
            y0: ymin,
            gx,
            gy,
            nx,
            ny,
            anchors,
            normals,
            cut: vec![stock; n],
            touched: vec![false; n],
            stock,
            depth: stock.max(1.0),
        })
    }

    pub fn with_depth(mut self, depth: f64) -> Result<Self> {
        if !(depth > 0.0 && depth.is_finite()) {
            return Err(Error::domain("line depth must be positive"));
        }
        self.depth = depth;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.gx
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y0 + j as f64 * self.gy
    }

    /// Point where the material boundary crosses the line of cell `k`.
    pub fn boundary_point(&self, k: usize) -> Vec3 {
        self.anchors[k] + self.normals[k] * self.cut[k]
    }

    /// Largest horizontal component of any line direction.
    pub fn max_normal_tilt(&self) -> f64 {
        self.normals
            .iter()
            .map(|n| (n.x * n.x + n.y * n.y).sqrt())
            .fold(0.0, f64::max)
    }

    /// Highest world z reachable by material on any line.
    pub fn material_top(&self) -> f64 {
        self.anchors
            .iter()
            .zip(&self.normals)
            .zip(&self.cut)
            .map(|((a, n), c)| a.z + n.z * c)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn make_plane_net(z0: f64, bounds: Bounds, nx: usize, ny: usize, stock: f64) -> Result<LineNet> {
    LineNet::new(NominalSurface::Plane { z0 }, bounds, nx, ny, stock)
}

pub fn make_hypar_net(k: f64, bounds: Bounds, nx: usize, ny: usize, stock: f64) -> Result<LineNet> {
    LineNet::new(NominalSurface::hypar(k)?, bounds, nx, ny, stock)
}
