//! Areal surface texture parameters of a height field.
//!
//! Heights are taken about their mean after least-squares plane removal.
//! Masked cells are left out of every sum. The spatial parameters (Sal,
//! Std) work on the largest fully unmasked rectangle.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::heightfield::HeightField;

pub const DEFAULT_SAL_THRESHOLD: f64 = 0.2;
/// Angular bin of the texture direction spectrum, degrees.
pub const STD_BIN_DEG: f64 = 1.0;
/// Spectra whose peak bin is below this multiple of the mean are isotropic.
pub const ISOTROPY_RATIO: f64 = 1.05;
const SQ_FLOOR: f64 = 1e-12;
const SAL_DIRECTIONS: usize = 180;

/// A reported parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    Value(f64),
    /// The true value exceeds this bound.
    LowerBound(f64),
    Undefined(String),
}

impl ParamValue {
    pub fn value(&self) -> Option<f64> {
        match self {
            ParamValue::Value(v) => Some(*v),
            _ => None,
        }
    }

    fn undefined(reason: impl Into<String>) -> Self {
        ParamValue::Undefined(reason.into())
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            // no "-0.000000" for values that round to zero
            ParamValue::Value(v) if v.abs() < 5e-7 => write!(f, "{:.6}", 0.0),
            ParamValue::Value(v) => write!(f, "{v:.6}"),
            ParamValue::LowerBound(v) => write!(f, ">={v:.6}"),
            ParamValue::Undefined(r) => write!(f, "undef({r})"),
        }
    }
}

/// Subtract the least-squares plane through the unmasked cells.
pub fn level(hf: &HeightField) -> Result<HeightField> {
    let mut n = 0.0;
    let (mut sx, mut sy, mut sz) = (0.0, 0.0, 0.0);
    for j in 0..hf.ny {
        for i in 0..hf.nx {
            let z = hf.get(i, j);
            if !z.is_nan() {
                n += 1.0;
                sx += i as f64 * hf.dx;
                sy += j as f64 * hf.dy;
                sz += z;
            }
        }
    }
    if n < 3.0 {
        return Err(Error::RankDeficient(format!("{n} unmasked cells, need 3")));
    }
    let (xm, ym, zm) = (sx / n, sy / n, sz / n);
    let (mut sxx, mut sxy, mut syy, mut sxz, mut syz) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for j in 0..hf.ny {
        for i in 0..hf.nx {
            let z = hf.get(i, j);
            if !z.is_nan() {
                let x = i as f64 * hf.dx - xm;
                let y = j as f64 * hf.dy - ym;
                let z = z - zm;
                sxx += x * x;
                sxy += x * y;
                syy += y * y;
                sxz += x * z;
                syz += y * z;
            }
        }
    }
    let det = sxx * syy - sxy * sxy;
    if !(sxx > 0.0 && syy > 0.0 && det > 1e-12 * sxx * syy) {
        return Err(Error::RankDeficient("unmasked cells are collinear".into()));
    }
    let b = (sxz * syy - syz * sxy) / det;
    let c = (syz * sxx - sxz * sxy) / det;
    let mut out = hf.clone();
    for j in 0..hf.ny {
        for i in 0..hf.nx {
            let k = j * hf.nx + i;
            if !out.z[k].is_nan() {
                out.z[k] -= zm + b * (i as f64 * hf.dx - xm) + c * (j as f64 * hf.dy - ym);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudeParams {
    pub sa: f64,
    pub sq: f64,
    pub sz: f64,
    /// Deepest pit below the mean.
    pub sv: f64,
    /// `None` when Sq vanishes.
    pub ssk: Option<f64>,
    pub sku: Option<f64>,
}

pub fn amplitude_params(hf: &HeightField) -> Result<AmplitudeParams> {
    let vals: Vec<f64> = hf.z.iter().copied().filter(|v| !v.is_nan()).collect();
    if vals.is_empty() {
        return Err(Error::Input("height field is fully masked".into()));
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let (mut m1, mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0, 0.0);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in &vals {
        let d = v - mean;
        let d2 = d * d;
        m1 += d.abs();
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
        lo = lo.min(d);
        hi = hi.max(d);
    }
    let sq = (m2 / n).sqrt();
    let (ssk, sku) = if sq < SQ_FLOOR {
        (None, None)
    } else {
        (Some(m3 / n / sq.powi(3)), Some(m4 / n / sq.powi(4)))
    };
    Ok(AmplitudeParams {
        sa: m1 / n,
        sq,
        sz: hi - lo,
        sv: (-lo).max(0.0),
        ssk,
        sku,
    })
}

/// Cells strictly higher than all 8 unmasked neighbours, per mm² of
/// unmasked area.
pub fn summit_density(hf: &HeightField) -> Result<f64> {
    if hf.nx < 3 || hf.ny < 3 {
        return Err(Error::domain("summit density needs at least 3x3 cells"));
    }
    let valid = hf.valid_count();
    if valid == 0 {
        return Err(Error::Input("height field is fully masked".into()));
    }
    let mut count = 0usize;
    for j in 1..hf.ny - 1 {
        for i in 1..hf.nx - 1 {
            let c = hf.get(i, j);
            if c.is_nan() {
                continue;
            }
            let summit = (0..3).all(|b| {
                (0..3).all(|a| {
                    (a == 1 && b == 1) || {
                        let v = hf.get(i + a - 1, j + b - 1);
                        !v.is_nan() && c > v
                    }
                })
            });
            if summit {
                count += 1;
            }
        }
    }
    Ok(count as f64 / (valid as f64 * hf.dx * hf.dy))
}

/// Two-dimensional in-place FFT of a `w x h` row-major buffer.
fn fft2(data: &mut [Complex<f64>], w: usize, h: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let (row, col): (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) = if inverse {
        (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h))
    } else {
        (planner.plan_fft_forward(w), planner.plan_fft_forward(h))
    };
    data.par_chunks_mut(w).for_each(|r| row.process(r));
    let mut t = transpose(data, w, h);
    t.par_chunks_mut(h).for_each(|c| col.process(c));
    data.copy_from_slice(&transpose(&t, h, w));
}

fn transpose(data: &[Complex<f64>], w: usize, h: usize) -> Vec<Complex<f64>> {
    let mut out = vec![Complex::new(0.0, 0.0); w * h];
    for j in 0..h {
        for i in 0..w {
            out[i * h + j] = data[j * w + i];
        }
    }
    out
}

/// Heights about their mean, zero-padded to `(2 nx) x (2 ny)`, plus their
/// rms before windowing. The optional window is a circular Hann taper over
/// the inscribed disc, so it favours no direction.
fn padded(hf: &HeightField, window: bool) -> Result<(Vec<Complex<f64>>, usize, usize, f64)> {
    if !hf.is_fully_valid() {
        return Err(Error::Input("spectral analysis needs an unmasked field".into()));
    }
    let mean = hf.z.iter().sum::<f64>() / hf.z.len() as f64;
    let rms = (hf.z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / hf.z.len() as f64).sqrt();
    let (w, h) = (2 * hf.nx, 2 * hf.ny);
    let (cx, cy) = ((hf.nx - 1) as f64 * hf.dx / 2.0, (hf.ny - 1) as f64 * hf.dy / 2.0);
    let radius = cx.min(cy);
    let taper = |i: usize, j: usize| {
        if !window {
            return 1.0;
        }
        if radius <= 0.0 {
            return 0.0;
        }
        let rho = (i as f64 * hf.dx - cx).hypot(j as f64 * hf.dy - cy);
        if rho >= radius {
            0.0
        } else {
            0.5 + 0.5 * (std::f64::consts::PI * rho / radius).cos()
        }
    };
    let mut buf = vec![Complex::new(0.0, 0.0); w * h];
    for j in 0..hf.ny {
        for i in 0..hf.nx {
            buf[j * w + i] = Complex::new((hf.get(i, j) - mean) * taper(i, j), 0.0);
        }
    }
    Ok((buf, w, h, rms))
}

/// Normalized autocorrelation `R(τ) / R(0)` with
/// `R(τ) = Σ_p z(p) z(p + τ)` over the overlapping cells, for integer lags
/// `|τx| < nx`, `|τy| < ny`.
#[derive(Debug, Clone)]
pub struct Autocorrelation {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    w: usize,
    h: usize,
    values: Vec<f64>,
}

impl Autocorrelation {
    /// Value at lag `(tx, ty)` in cells.
    pub fn at(&self, tx: isize, ty: isize) -> f64 {
        if tx.unsigned_abs() >= self.nx || ty.unsigned_abs() >= self.ny {
            return 0.0;
        }
        let i = tx.rem_euclid(self.w as isize) as usize;
        let j = ty.rem_euclid(self.h as isize) as usize;
        self.values[j * self.w + i]
    }

    /// Bilinear interpolation at a lag in mm.
    pub fn interpolate(&self, lx: f64, ly: f64) -> f64 {
        let u = lx / self.dx;
        let v = ly / self.dy;
        let (i, j) = (u.floor(), v.floor());
        let (fu, fv) = (u - i, v - j);
        let (i, j) = (i as isize, j as isize);
        let a = self.at(i, j) * (1.0 - fu) + self.at(i + 1, j) * fu;
        let b = self.at(i, j + 1) * (1.0 - fu) + self.at(i + 1, j + 1) * fu;
        a * (1.0 - fv) + b * fv
    }
}

/// FFT autocorrelation of an unmasked field; `None` for a constant field.
pub fn autocorrelation(hf: &HeightField) -> Result<Option<Autocorrelation>> {
    let (mut buf, w, h, rms) = padded(hf, false)?;
    if rms < SQ_FLOOR {
        return Ok(None);
    }
    fft2(&mut buf, w, h, false);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    fft2(&mut buf, w, h, true);
    let r0 = buf[0].re;
    let values = buf.iter().map(|c| c.re / r0).collect();
    Ok(Some(Autocorrelation {
        nx: hf.nx,
        ny: hf.ny,
        dx: hf.dx,
        dy: hf.dy,
        w,
        h,
        values,
    }))
}

/// Shortest lag, over 180 directions, at which the autocorrelation falls to
/// `threshold`. Rays run to half the field extent.
pub fn autocorrelation_length(hf: &HeightField, threshold: f64) -> Result<ParamValue> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::domain("autocorrelation threshold must lie in (0, 1)"));
    }
    let Some(acf) = autocorrelation(hf)? else {
        return Ok(ParamValue::undefined("constant field"));
    };
    let lx = (hf.nx / 2) as f64 * hf.dx;
    let ly = (hf.ny / 2) as f64 * hf.dy;
    Ok(decay_length(&acf, threshold, lx, ly))
}

/// Ray march inside the lag box `|τx| <= lx`, `|τy| <= ly`.
fn decay_length(acf: &Autocorrelation, threshold: f64, lx: f64, ly: f64) -> ParamValue {
    let step = acf.dx.min(acf.dy) / 4.0;
    let mut best = f64::INFINITY;
    let mut reach = f64::INFINITY;
    for k in 0..SAL_DIRECTIONS {
        let theta = k as f64 * std::f64::consts::PI / SAL_DIRECTIONS as f64;
        let (s, c) = theta.sin_cos();
        let rmax = (lx / c.abs().max(1e-300)).min(ly / s.abs().max(1e-300));
        reach = reach.min(rmax);
        let (mut r0, mut v0) = (0.0, 1.0);
        loop {
            let r = r0 + step;
            if r > rmax || r >= best {
                break;
            }
            let v = acf.interpolate(r * c, r * s);
            if v <= threshold {
                best = best.min(r0 + step * (v0 - threshold) / (v0 - v));
                break;
            }
            r0 = r;
            v0 = v;
        }
    }
    if best.is_finite() {
        ParamValue::Value(best)
    } else {
        ParamValue::LowerBound(reach)
    }
}

/// Angular power spectrum in 1° bins centred on -89..=90 degrees, by
/// direction of the frequency vector: the power spectrum is integrated
/// along rays (`P(f) f df`, bilinear in the sampled spectrum) from one
/// frequency step out to the smaller Nyquist frequency, four rays per bin.
pub fn angular_spectrum(hf: &HeightField) -> Result<Vec<f64>> {
    const RAYS: usize = 4;
    let (mut buf, w, h, rms) = padded(hf, true)?;
    let bins = (180.0 / STD_BIN_DEG) as usize;
    if rms < SQ_FLOOR {
        return Ok(vec![0.0; bins]);
    }
    fft2(&mut buf, w, h, false);
    let power: Vec<f64> = buf.iter().map(|c| c.norm_sqr()).collect();
    // frequency steps per axis, cycles/mm
    let (ux, uy) = (1.0 / (w as f64 * hf.dx), 1.0 / (h as f64 * hf.dy));
    let sample = |fx: f64, fy: f64| {
        let (u, v) = (fx / ux, fy / uy);
        let (i, j) = (u.floor(), v.floor());
        let (a, b) = (u - i, v - j);
        let at = |di: isize, dj: isize| {
            let ii = (i as isize + di).rem_euclid(w as isize) as usize;
            let jj = (j as isize + dj).rem_euclid(h as isize) as usize;
            power[jj * w + ii]
        };
        (at(0, 0) * (1.0 - a) + at(1, 0) * a) * (1.0 - b) + (at(0, 1) * (1.0 - a) + at(1, 1) * a) * b
    };
    let step = ux.min(uy) / 2.0;
    let (f0, f1) = (ux.max(uy), 0.5 / hf.dx.max(hf.dy));
    let out: Vec<f64> = (0..bins)
        .into_par_iter()
        .map(|b| {
            let centre = (b as f64 + 1.0) * STD_BIN_DEG - 90.0;
            let mut acc = 0.0;
            for q in 0..RAYS {
                let ang = (centre + ((q as f64 + 0.5) / RAYS as f64 - 0.5) * STD_BIN_DEG).to_radians();
                let (s, c) = ang.sin_cos();
                let mut f = f0;
                while f <= f1 {
                    acc += sample(f * c, f * s) * f;
                    f += step;
                }
            }
            acc * step / RAYS as f64
        })
        .collect();
    Ok(out)
}

/// Map an orientation in degrees to (-90, 90].
pub fn fold_degrees(a: f64) -> f64 {
    let mut a = a % 180.0;
    if a <= -90.0 {
        a += 180.0;
    }
    if a > 90.0 {
        a -= 180.0;
    }
    a
}

/// Direction of the surface lay, degrees from x toward y: perpendicular to
/// the dominant direction of the angular power spectrum.
pub fn texture_direction(hf: &HeightField) -> Result<ParamValue> {
    let power = angular_spectrum(hf)?;
    let total: f64 = power.iter().sum();
    if !(total > 0.0) {
        return Ok(ParamValue::undefined("constant field"));
    }
    let mean = total / power.len() as f64;
    let (peak, &p) = power
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .expect("non-empty spectrum");
    if p / mean < ISOTROPY_RATIO {
        return Ok(ParamValue::undefined("isotropic spectrum"));
    }
    // parabolic refinement between the neighbouring bins
    let n = power.len();
    let (a, b) = (power[(peak + n - 1) % n], power[(peak + 1) % n]);
    let curv = a - 2.0 * p + b;
    let shift = if curv < 0.0 { (0.5 * (a - b) / curv).clamp(-0.5, 0.5) } else { 0.0 };
    let freq_dir = (peak as f64 + 1.0 + shift) * STD_BIN_DEG - 90.0;
    // drop rounding residue so that a lay at exactly ±90 folds to +90
    let lay = ((freq_dir + 90.0) * 1e9).round() / 1e9;
    Ok(ParamValue::Value(fold_degrees(lay)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArealOptions {
    pub sal_threshold: f64,
}

impl Default for ArealOptions {
    fn default() -> Self {
        Self {
            sal_threshold: DEFAULT_SAL_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArealParams {
    /// µm
    pub sz: ParamValue,
    pub sa: ParamValue,
    pub sq: ParamValue,
    pub sku: ParamValue,
    pub ssk: ParamValue,
    /// µm, pit depth
    pub sv: ParamValue,
    /// 1/mm²
    pub sds: ParamValue,
    /// mm
    pub sal: ParamValue,
    /// degrees
    pub std: ParamValue,
}

/// Report keys, in column order.
pub const PARAM_KEYS: [&str; 9] = [
    "Sz_um",
    "Sa_um",
    "Sq_um",
    "Sku",
    "Ssk",
    "Sv_um",
    "Sds_per_mm2",
    "Sal_mm",
    "Std_deg",
];

impl ArealParams {
    fn all_undefined(reason: &str) -> Self {
        let u = || ParamValue::undefined(reason);
        Self {
            sz: u(),
            sa: u(),
            sq: u(),
            sku: u(),
            ssk: u(),
            sv: u(),
            sds: u(),
            sal: u(),
            std: u(),
        }
    }

    pub fn values(&self) -> [&ParamValue; 9] {
        [
            &self.sz, &self.sa, &self.sq, &self.sku, &self.ssk, &self.sv, &self.sds, &self.sal, &self.std,
        ]
    }

    /// Look up by report key or bare name (`Sz`, `Sz_um`, ...).
    pub fn get(&self, key: &str) -> Option<&ParamValue> {
        let bare = key.split('_').next().unwrap_or(key);
        PARAM_KEYS
            .iter()
            .position(|k| k.split('_').next() == Some(bare))
            .map(|i| self.values()[i])
    }

    /// `key=value` lines.
    pub fn to_report(&self) -> String {
        PARAM_KEYS
            .iter()
            .zip(self.values())
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    pub fn csv_header() -> String {
        PARAM_KEYS.join(",")
    }

    pub fn to_csv_row(&self) -> String {
        self.values().iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
    }
}

fn describe(e: &Error) -> String {
    match e {
        Error::RankDeficient(_) => "rank-deficient leveling".into(),
        Error::Domain(m) | Error::Input(m) => m.clone(),
        other => other.to_string(),
    }
}

/// Level the field and evaluate every parameter. Failures become undefined
/// entries rather than errors.
pub fn compute_all(hf: &HeightField, opts: &ArealOptions) -> ArealParams {
    let lev = match level(hf) {
        Ok(l) => l,
        Err(e) => return ArealParams::all_undefined(&describe(&e)),
    };
    let mut out = ArealParams::all_undefined("not computed");
    match amplitude_params(&lev) {
        Ok(a) => {
            out.sz = ParamValue::Value(a.sz);
            out.sa = ParamValue::Value(a.sa);
            out.sq = ParamValue::Value(a.sq);
            out.sv = ParamValue::Value(a.sv);
            let flat = || ParamValue::undefined("Sq below 1e-12 um");
            out.ssk = a.ssk.map_or_else(flat, ParamValue::Value);
            out.sku = a.sku.map_or_else(flat, ParamValue::Value);
        }
        Err(e) => {
            let r = describe(&e);
            for v in [&mut out.sz, &mut out.sa, &mut out.sq, &mut out.sv, &mut out.ssk, &mut out.sku] {
                *v = ParamValue::undefined(r.clone());
            }
        }
    }
    out.sds = summit_density(&lev).map_or_else(|e| ParamValue::undefined(describe(&e)), ParamValue::Value);
    match lev.valid_crop() {
        Ok(crop) => {
            out.sal = autocorrelation_length(&crop, opts.sal_threshold)
                .unwrap_or_else(|e| ParamValue::undefined(describe(&e)));
            out.std = texture_direction(&crop).unwrap_or_else(|e| ParamValue::undefined(describe(&e)));
        }
        Err(e) => {
            out.sal = ParamValue::undefined(describe(&e));
            out.std = ParamValue::undefined(describe(&e));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{PI, TAU};

    fn sinusoid(n: usize, dx: f64, amp: f64, lambda: f64) -> HeightField {
        HeightField::from_fn(n, n, dx, dx, |x, _| amp * (TAU * x / lambda).sin())
    }

    fn ridges(n: usize, dx: f64, lambda: f64, deg: f64) -> HeightField {
        let (s, c) = deg.to_radians().sin_cos();
        HeightField::from_fn(n, n, dx, dx, |x, y| (TAU * (-x * s + y * c) / lambda).sin())
    }

    /// Direct sum over overlapping cells, normalized by the zero lag.
    fn direct_acf(hf: &HeightField, tx: isize, ty: isize) -> f64 {
        let mean = hf.z.iter().sum::<f64>() / hf.z.len() as f64;
        let sum = |tx: isize, ty: isize| {
            let mut s = 0.0;
            for j in 0..hf.ny as isize {
                for i in 0..hf.nx as isize {
                    let (a, b) = (i + tx, j + ty);
                    if a >= 0 && b >= 0 && (a as usize) < hf.nx && (b as usize) < hf.ny {
                        s += (hf.get(i as usize, j as usize) - mean) * (hf.get(a as usize, b as usize) - mean);
                    }
                }
            }
            s
        };
        sum(tx, ty) / sum(0, 0)
    }

    #[test]
    fn level_removes_planes() {
        let tilted = HeightField::from_fn(7, 5, 0.1, 0.2, |x, y| 3.0 + 2.0 * x - 5.0 * y);
        let l = level(&tilted).unwrap();
        assert!(l.z.iter().all(|v| v.abs() < 1e-12));

        // a cosine even about the grid centre, over whole periods, is
        // orthogonal to both the constant and the linear terms
        let (n, dx, lambda) = (64usize, 0.5 / 16.0, 0.5);
        let c = (n - 1) as f64 * dx / 2.0;
        let wave = |x: f64, y: f64| 2.0 * (TAU * (y - c) / lambda).cos() + (TAU * (x - c) / lambda).cos();
        let pure = HeightField::from_fn(n, n, dx, dx, wave);
        let l = level(&pure).unwrap();
        for (a, b) in l.z.iter().zip(&pure.z) {
            assert!((a - b).abs() < 1e-12);
        }
        let both = HeightField::from_fn(n, n, dx, dx, |x, y| wave(x, y) + 0.7 * x - 0.3 * y + 1.0);
        let l = level(&both).unwrap();
        for (a, b) in l.z.iter().zip(&pure.z) {
            assert!((a - b).abs() < 1e-9, "{a} {b}");
        }
    }

    #[test]
    fn level_rejects_degenerate() {
        let line = HeightField::new(5, 1, 0.1, 0.1, vec![1.0; 5]).unwrap();
        assert!(matches!(level(&line), Err(Error::RankDeficient(_))));
        let mut z = vec![f64::NAN; 9];
        z[0] = 1.0;
        z[4] = 2.0;
        z[8] = 3.0;
        let diag = HeightField::new(3, 3, 0.1, 0.1, z).unwrap();
        assert!(matches!(level(&diag), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn sinusoid_moments() {
        // N samples per period: mean |sin| is exactly 2 cot(π/N) / N
        let n = 16.0;
        let a = amplitude_params(&sinusoid(128, 0.5 / n, 2.0, 0.5)).unwrap();
        assert_relative_eq!(a.sa, 2.0 * 2.0 / (PI / n).tan() / n, max_relative = 1e-12);
        assert_relative_eq!(a.sq, 2f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(a.sz, 4.0, max_relative = 1e-12);
        assert_relative_eq!(a.sv, 2.0, max_relative = 1e-12);
        assert!(a.ssk.unwrap().abs() < 1e-12);
        assert_relative_eq!(a.sku.unwrap(), 1.5, max_relative = 1e-12);
        // and converges to the continuous 4/π
        let fine = amplitude_params(&sinusoid(512, 0.5 / 256.0, 2.0, 0.5)).unwrap();
        assert_relative_eq!(fine.sa, 4.0 / PI, max_relative = 1e-4);
    }

    #[test]
    fn constant_field() {
        let c = HeightField::from_fn(8, 8, 0.1, 0.1, |_, _| 3.0);
        let a = amplitude_params(&c).unwrap();
        assert_eq!((a.sa, a.sq, a.sz, a.sv), (0.0, 0.0, 0.0, 0.0));
        assert_eq!((a.ssk, a.sku), (None, None));
        let p = compute_all(&c, &ArealOptions::default());
        assert_eq!(p.sa, ParamValue::Value(0.0));
        assert!(matches!(p.ssk, ParamValue::Undefined(_)));
        assert!(matches!(p.sal, ParamValue::Undefined(_)));
        assert!(matches!(p.std, ParamValue::Undefined(_)));
        assert_eq!(p.sds, ParamValue::Value(0.0));
        assert!(p.to_report().contains("Ssk=undef("));
    }

    #[test]
    fn summit_examples() {
        let mut z = vec![0.0; 9];
        z[4] = 1.0;
        let bump = HeightField::new(3, 3, 0.1, 0.2, z).unwrap();
        assert_relative_eq!(summit_density(&bump).unwrap(), 1.0 / (9.0 * 0.02), max_relative = 1e-12);
        let plane = HeightField::from_fn(10, 10, 0.1, 0.1, |x, y| x + y);
        assert_eq!(summit_density(&plane).unwrap(), 0.0);
        assert!(summit_density(&HeightField::from_fn(2, 5, 0.1, 0.1, |_, _| 0.0)).is_err());
    }

    #[test]
    fn egg_crate_summits_match_brute_force() {
        for n in [2usize, 3, 5] {
            let per = 16;
            let m = n * per;
            let dx = 1.0 / per as f64;
            // offsets keep the sampled extrema off exact ties
            let (ox, oy) = (dx / 4.0, dx / 3.0);
            let f = |x: f64, y: f64| (TAU * (x + ox)).sin() * (TAU * (y + oy)).sin();
            let hf = HeightField::from_fn(m, m, dx, dx, f);
            // brute force over the continuous maxima: both factors +1 or
            // both -1, at quarter-period lattice points inside the grid
            let mut expected = 0usize;
            let span = (m - 1) as f64 * dx;
            for a in 0..2 * n {
                for b in 0..2 * n {
                    let (x, y) = ((2 * a + 1) as f64 / 4.0 - ox, (2 * b + 1) as f64 / 4.0 - oy);
                    let inside = x > 1.5 * dx && y > 1.5 * dx && x < span - 1.5 * dx && y < span - 1.5 * dx;
                    if inside && f(x, y) > 0.0 {
                        expected += 1;
                    }
                }
            }
            let count = (summit_density(&hf).unwrap() * (m * m) as f64 * dx * dx).round() as usize;
            assert_eq!(count, expected, "n = {n}");
        }
    }

    #[test]
    fn fft_acf_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (nx, ny) in [(32, 32), (17, 9), (5, 12)] {
            let z: Vec<f64> = (0..nx * ny).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let hf = HeightField::new(nx, ny, 0.01, 0.02, z).unwrap();
            let acf = autocorrelation(&hf).unwrap().unwrap();
            for ty in -(ny as isize - 1)..ny as isize {
                for tx in -(nx as isize - 1)..nx as isize {
                    let d = direct_acf(&hf, tx, ty);
                    assert!((acf.at(tx, ty) - d).abs() <= 1e-9, "lag ({tx},{ty})");
                }
            }
        }
    }

    #[test]
    fn sal_examples() {
        let lambda = 0.5;
        let dx = lambda / 32.0;
        let hf = sinusoid(256, dx, 1.0, lambda);
        let sal = autocorrelation_length(&hf, 0.2).unwrap().value().unwrap();
        let expect = lambda * 0.2f64.acos() / TAU;
        assert!((sal - expect).abs() < 0.03 * expect, "{sal} vs {expect}");

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z: Vec<f64> = (0..128 * 128).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let noise = HeightField::new(128, 128, 0.01, 0.01, z).unwrap();
        let sal = autocorrelation_length(&noise, 0.2).unwrap().value().unwrap();
        assert!(sal > 0.5 * 0.01 && sal < 1.5 * 0.01, "{sal}");

        let flat = HeightField::from_fn(16, 16, 0.1, 0.1, |_, _| 1.0);
        assert!(matches!(autocorrelation_length(&flat, 0.2).unwrap(), ParamValue::Undefined(_)));
    }

    #[test]
    fn sal_lower_bound_when_rays_end_first() {
        let hf = sinusoid(64, 0.01, 1.0, 0.64);
        let acf = autocorrelation(&hf).unwrap().unwrap();
        match decay_length(&acf, 0.2, 0.03, 0.03) {
            ParamValue::LowerBound(b) => assert!((b - 0.03).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        assert!(decay_length(&acf, 0.2, 0.32, 0.32).value().is_some());
    }

    #[test]
    fn std_axis_aligned() {
        let x_ridges = HeightField::from_fn(64, 64, 0.02, 0.02, |_, y| (TAU * y / 0.2).sin());
        assert_eq!(texture_direction(&x_ridges).unwrap(), ParamValue::Value(0.0));
        let y_ridges = HeightField::from_fn(64, 64, 0.02, 0.02, |x, _| (TAU * x / 0.2).sin());
        assert_eq!(texture_direction(&y_ridges).unwrap(), ParamValue::Value(90.0));
    }

    #[test]
    fn std_rotated_ridges() {
        for deg in [20.0, -21.8, 45.0, 70.0, -60.0] {
            let hf = ridges(256, 0.05, 0.5, deg);
            let std = texture_direction(&hf).unwrap().value().unwrap();
            let err = fold_degrees(std - deg).abs();
            assert!(err <= STD_BIN_DEG, "{deg}: {std}");
        }
    }

    #[test]
    fn std_isotropic_bump_undefined() {
        let n = 256;
        let dx = 0.05;
        let c = (n - 1) as f64 * dx / 2.0;
        let bump = HeightField::from_fn(n, n, dx, dx, |x, y| (-((x - c).powi(2) + (y - c).powi(2)) / 0.18).exp());
        let power = angular_spectrum(&bump).unwrap();
        let mean = power.iter().sum::<f64>() / power.len() as f64;
        let peak = power.iter().cloned().fold(0.0, f64::max);
        assert!(peak / mean < ISOTROPY_RATIO, "{}", peak / mean);
        assert!(matches!(texture_direction(&bump).unwrap(), ParamValue::Undefined(_)));
    }

    #[test]
    fn masked_cells_are_excluded() {
        let mut hf = sinusoid(64, 0.5 / 16.0, 2.0, 0.5);
        let clean = compute_all(&hf, &ArealOptions::default());
        for j in 60..64 {
            for i in 0..64 {
                hf.z[j * 64 + i] = f64::NAN;
            }
        }
        let masked = compute_all(&hf, &ArealOptions::default());
        let sa = masked.sa.value().unwrap();
        assert_relative_eq!(sa, clean.sa.value().unwrap(), max_relative = 1e-6);
        assert!(masked.sal.value().is_some());
    }

    #[test]
    fn report_layout() {
        let p = compute_all(&sinusoid(64, 0.5 / 16.0, 2.0, 0.5), &ArealOptions::default());
        let report = p.to_report();
        let lines: Vec<&str> = report.lines().map(|l| l.split('=').next().unwrap()).collect();
        assert_eq!(lines, PARAM_KEYS.to_vec());
        assert_eq!(ArealParams::csv_header(), "Sz_um,Sa_um,Sq_um,Sku,Ssk,Sv_um,Sds_per_mm2,Sal_mm,Std_deg");
        assert_eq!(p.to_csv_row().split(',').count(), 9);
        assert_eq!(p.get("Sz"), Some(&p.sz));
        assert_eq!(p.get("Std_deg"), Some(&p.std));
        assert_eq!(p.get("Sal"), Some(&p.sal));
        assert_eq!(ParamValue::LowerBound(0.5).to_string(), ">=0.500000");
    }

    fn random_field(seed: u64, n: usize) -> HeightField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        HeightField::new(n, n, 0.01, 0.01, z).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn moment_inequalities(seed in 0u64..1000, n in 3usize..24, skew in 0.0..3.0f64) {
            let hf = random_field(seed, n).map(|v| if v > 0.0 { v.powf(1.0 + skew) } else { v });
            let a = amplitude_params(&hf).unwrap();
            prop_assert!(a.sq >= a.sa);
            prop_assert!(a.sz >= a.sv && a.sv >= 0.0);
            let (ssk, sku) = (a.ssk.unwrap(), a.sku.unwrap());
            prop_assert!(sku >= ssk * ssk + 1.0 - 1e-9);
        }

        #[test]
        fn scale_equivariance(seed in 0u64..1000, c in 0.1..10.0f64) {
            let hf = random_field(seed, 16);
            let p = compute_all(&hf, &ArealOptions::default());
            let q = compute_all(&hf.map(|v| v * c), &ArealOptions::default());
            for (k, (a, b)) in PARAM_KEYS.iter().zip(p.values().iter().zip(q.values())) {
                let (a, b) = (a.value().unwrap_or(0.0), b.value().unwrap_or(0.0));
                let scaled = k.ends_with("_um");
                let want = if scaled { a * c } else { a };
                prop_assert!((b - want).abs() <= 1e-9 * want.abs().max(1.0), "{}: {} vs {}", k, b, want);
            }
            let neg = amplitude_params(&level(&hf.map(|v| -v)).unwrap()).unwrap();
            let pos = amplitude_params(&level(&hf).unwrap()).unwrap();
            prop_assert!((neg.ssk.unwrap() + pos.ssk.unwrap()).abs() < 1e-9);
        }

        /// Cyclic shifts only reorder the samples of a periodic field.
        #[test]
        fn amplitude_translation_invariance(seed in 0u64..1000, sx in 0usize..16, sy in 0usize..16) {
            let hf = random_field(seed, 16);
            let mut shifted = hf.clone();
            for j in 0..16 {
                for i in 0..16 {
                    shifted.z[((j + sy) % 16) * 16 + (i + sx) % 16] = hf.get(i, j);
                }
            }
            let a = amplitude_params(&hf).unwrap();
            let b = amplitude_params(&shifted).unwrap();
            for (u, v) in [(a.sa, b.sa), (a.sq, b.sq), (a.sz, b.sz), (a.sv, b.sv), (a.ssk.unwrap(), b.ssk.unwrap()), (a.sku.unwrap(), b.sku.unwrap())] {
                prop_assert!((u - v).abs() <= 1e-9 * u.abs().max(1e-12));
            }
        }

        #[test]
        fn rotation_coherence(base in -80.0..80.0f64, delta in -60.0..60.0f64) {
            let a = texture_direction(&ridges(128, 0.05, 0.4, base)).unwrap().value().unwrap();
            let b = texture_direction(&ridges(128, 0.05, 0.4, base + delta)).unwrap().value().unwrap();
            prop_assert!(fold_degrees(b - a - delta).abs() <= STD_BIN_DEG, "{} {} {}", a, b, delta);
        }
    }
}
