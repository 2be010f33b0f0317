//! Regular-grid topography in micrometres, with CSV and 16-bit PGM export.
//!
//! Masked cells are stored as NaN. CSV files carry the grid geometry in
//! `#` header comments and use shortest round-trip float formatting, so a
//! write/read cycle reproduces every value bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct HeightField {
    pub nx: usize,
    pub ny: usize,
    /// Grid spacing, mm.
    pub dx: f64,
    pub dy: f64,
    /// Position of cell (0, 0), mm.
    pub x0: f64,
    pub y0: f64,
    /// Heights in µm, row-major (`j * nx + i`); NaN marks a masked cell.
    pub z: Vec<f64>,
}

impl HeightField {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64, z: Vec<f64>) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::Input("height field must not be empty".into()));
        }
        if z.len() != nx * ny {
            return Err(Error::Input(format!(
                "height field has {} values, expected {}x{}",
                z.len(),
                nx,
                ny
            )));
        }
        if !(dx > 0.0 && dy > 0.0 && dx.is_finite() && dy.is_finite()) {
            return Err(Error::Input("grid spacing must be positive".into()));
        }
        if z.iter().any(|v| v.is_infinite()) {
            return Err(Error::Input("height field contains infinite values".into()));
        }
        Ok(Self {
            nx,
            ny,
            dx,
            dy,
            x0: 0.0,
            y0: 0.0,
            z,
        })
    }

    pub fn with_origin(mut self, x0: f64, y0: f64) -> Self {
        self.x0 = x0;
        self.y0 = y0;
        self
    }

    /// Sample `f(x, y)` (mm in, µm out) on a grid starting at the origin.
    pub fn from_fn(nx: usize, ny: usize, dx: f64, dy: f64, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut z = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                z.push(f(i as f64 * dx, j as f64 * dy));
            }
        }
        Self::new(nx, ny, dx, dy, z).expect("valid synthetic field")
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.z[j * self.nx + i]
    }

    pub fn is_masked(&self, i: usize, j: usize) -> bool {
        self.get(i, j).is_nan()
    }

    pub fn valid_count(&self) -> usize {
        self.z.iter().filter(|v| !v.is_nan()).count()
    }

    pub fn is_fully_valid(&self) -> bool {
        self.z.iter().all(|v| !v.is_nan())
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.z[j * self.nx..(j + 1) * self.nx]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        for v in out.z.iter_mut().filter(|v| !v.is_nan()) {
            *v = f(*v);
        }
        out
    }

    /// Sub-grid of `w x h` cells starting at `(i0, j0)`.
    pub fn crop(&self, i0: usize, j0: usize, w: usize, h: usize) -> Result<Self> {
        if w == 0 || h == 0 || i0 + w > self.nx || j0 + h > self.ny {
            return Err(Error::domain(format!(
                "crop {w}x{h} at ({i0}, {j0}) exceeds {}x{} field",
                self.nx, self.ny
            )));
        }
        let mut z = Vec::with_capacity(w * h);
        for j in j0..j0 + h {
            z.extend_from_slice(&self.row(j)[i0..i0 + w]);
        }
        Ok(Self {
            nx: w,
            ny: h,
            dx: self.dx,
            dy: self.dy,
            x0: self.x0 + i0 as f64 * self.dx,
            y0: self.y0 + j0 as f64 * self.dy,
            z,
        })
    }

    /// Largest axis-aligned rectangle containing no masked cell, as
    /// `(i0, j0, w, h)`. Ties go to the first found in row-major order.
    pub fn largest_valid_rect(&self) -> Option<(usize, usize, usize, usize)> {
        let (nx, ny) = (self.nx, self.ny);
        let mut heights = vec![0usize; nx];
        let mut best: Option<(usize, usize, usize, usize)> = None;
        let mut best_area = 0;
        for j in 0..ny {
            for (i, h) in heights.iter_mut().enumerate() {
                *h = if self.is_masked(i, j) { 0 } else { *h + 1 };
            }
            // largest rectangle in histogram
            let mut stack: Vec<usize> = Vec::new();
            for i in 0..=nx {
                let h = if i < nx { heights[i] } else { 0 };
                while let Some(&top) = stack.last() {
                    if heights[top] <= h {
                        break;
                    }
                    stack.pop();
                    let left = stack.last().map_or(0, |&l| l + 1);
                    let width = i - left;
                    let area = width * heights[top];
                    if area > best_area {
                        best_area = area;
                        best = Some((left, j + 1 - heights[top], width, heights[top]));
                    }
                }
                stack.push(i);
            }
        }
        best
    }

    /// Crop to the largest unmasked rectangle (identity when nothing is masked).
    pub fn valid_crop(&self) -> Result<Self> {
        if self.is_fully_valid() {
            return Ok(self.clone());
        }
        let (i0, j0, w, h) = self
            .largest_valid_rect()
            .ok_or_else(|| Error::Input("height field is fully masked".into()))?;
        self.crop(i0, j0, w, h)
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::with_capacity(self.z.len() * 20);
        let _ = writeln!(s, "# nx={}", self.nx);
        let _ = writeln!(s, "# ny={}", self.ny);
        let _ = writeln!(s, "# spacing_x_mm={}", self.dx);
        let _ = writeln!(s, "# spacing_y_mm={}", self.dy);
        let _ = writeln!(s, "# origin_x_mm={}", self.x0);
        let _ = writeln!(s, "# origin_y_mm={}", self.y0);
        let _ = writeln!(s, "# units=um");
        for j in 0..self.ny {
            for (i, v) in self.row(j).iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                if v.is_nan() {
                    s.push_str("nan");
                } else {
                    let _ = write!(s, "{v}");
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text, &path.display().to_string())
    }

    /// Parse the CSV layout written by [`to_csv_string`](Self::to_csv_string).
    /// Spacing defaults to 1 mm when the header is absent.
    pub fn parse_csv(text: &str, source: &str) -> Result<Self> {
        let perr = |line: usize, msg: String| Error::Parse {
            path: source.to_string(),
            line,
            msg,
        };
        let mut dx = None;
        let mut dy = None;
        let mut x0 = 0.0;
        let mut y0 = 0.0;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                if let Some((key, value)) = meta.split_once('=') {
                    let parse = |v: &str| {
                        v.trim()
                            .parse::<f64>()
                            .map_err(|e| perr(idx + 1, format!("bad header value `{}`: {e}", v.trim())))
                    };
                    match key.trim() {
                        "spacing_x_mm" => dx = Some(parse(value)?),
                        "spacing_y_mm" => dy = Some(parse(value)?),
                        "origin_x_mm" => x0 = parse(value)?,
                        "origin_y_mm" => y0 = parse(value)?,
                        _ => {}
                    }
                }
                continue;
            }
            let row = line
                .split(',')
                .map(|f| {
                    let f = f.trim();
                    if f.eq_ignore_ascii_case("nan") {
                        Ok(f64::NAN)
                    } else {
                        f.parse::<f64>()
                            .map_err(|e| perr(idx + 1, format!("bad value `{f}`: {e}")))
                    }
                })
                .collect::<Result<Vec<f64>>>()?;
            if let Some(first) = rows.first() {
                if row.len() != first.len() {
                    return Err(perr(
                        idx + 1,
                        format!("row has {} values, expected {}", row.len(), first.len()),
                    ));
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(perr(0, "no data rows".into()));
        }
        let nx = rows[0].len();
        let ny = rows.len();
        let dx = dx.unwrap_or(1.0);
        let dy = dy.unwrap_or(dx);
        let z: Vec<f64> = rows.into_iter().flatten().collect();
        if z.iter().any(|v| v.is_infinite()) {
            return Err(perr(0, "infinite height".into()));
        }
        Ok(Self::new(nx, ny, dx, dy, z)
            .map_err(|e| perr(0, e.to_string()))?
            .with_origin(x0, y0))
    }

    /// 16-bit binary PGM. Rows run from the largest y down so that the image
    /// shows the field with y up. `range` fixes the mapped interval and clips;
    /// otherwise the unmasked min and max are used. Masked cells map to 0.
    pub fn to_pgm(&self, range: Option<(f64, f64)>) -> Result<Vec<u8>> {
        let (lo, hi, mode) = match range {
            Some((lo, hi)) => {
                if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::domain("render range must satisfy lo < hi"));
                }
                (lo, hi, "fixed")
            }
            None => {
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for &v in self.z.iter().filter(|v| !v.is_nan()) {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                if !lo.is_finite() {
                    lo = 0.0;
                    hi = 0.0;
                }
                (lo, hi, "minmax")
            }
        };
        let scale = (hi - lo) / 65535.0;
        let mut clipped = 0usize;
        let masked = self.z.iter().filter(|v| v.is_nan()).count();
        let mut data = Vec::with_capacity(self.z.len() * 2);
        for j in (0..self.ny).rev() {
            for &v in self.row(j) {
                let level = if v.is_nan() || scale == 0.0 {
                    0u16
                } else {
                    let q = ((v - lo) / scale).round();
                    if !(0.0..=65535.0).contains(&q) {
                        clipped += 1;
                    }
                    q.clamp(0.0, 65535.0) as u16
                };
                data.extend_from_slice(&level.to_be_bytes());
            }
        }
        let mut header = String::from("P5\n");
        let _ = writeln!(header, "# millsurf heightfield, rows from max y to min y");
        let _ = writeln!(header, "# range={mode}");
        let _ = writeln!(header, "# offset_um={lo}");
        let _ = writeln!(header, "# scale_um_per_level={scale}");
        let _ = writeln!(header, "# spacing_x_mm={}", self.dx);
        let _ = writeln!(header, "# spacing_y_mm={}", self.dy);
        let _ = writeln!(
            header,
            "# scale_bar: 0 -> {lo} um, 65535 -> {hi} um, width {} mm",
            self.dx * (self.nx.saturating_sub(1)) as f64
        );
        let _ = writeln!(header, "# masked_cells={masked}");
        let _ = writeln!(header, "# clipped_cells={clipped}");
        let _ = write!(header, "{} {}\n65535\n", self.nx, self.ny);
        let mut out = header.into_bytes();
        out.extend_from_slice(&data);
        Ok(out)
    }

    pub fn write_pgm(&self, path: &Path, range: Option<(f64, f64)>) -> Result<()> {
        std::fs::write(path, self.to_pgm(range)?).map_err(|e| Error::io(path, e))
    }
}
