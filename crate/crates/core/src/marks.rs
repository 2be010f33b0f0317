//! Feed-mark spacing measured on simulated profiles.

use crate::heightfield::HeightField;

/// Biased autocorrelation of a mean-removed profile, lags `0..max_lag`,
/// normalized by lag 0. `None` for a flat profile.
pub fn profile_autocorrelation(values: &[f64], max_lag: usize) -> Option<Vec<f64>> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let v: Vec<f64> = values.iter().map(|z| z - mean).collect();
    let r0: f64 = v.iter().map(|z| z * z).sum();
    if r0 <= 1e-24 * n as f64 {
        return None;
    }
    let max_lag = max_lag.min(n);
    Some((0..max_lag).map(|k| v[..n - k].iter().zip(&v[k..]).map(|(a, b)| a * b).sum::<f64>() / r0).collect())
}

/// Largest sample in `lo..=hi`, refined with a parabola through its
/// neighbours. Returns a fractional lag.
fn refined_peak(acf: &[f64], lo: usize, hi: usize) -> Option<f64> {
    let hi = hi.min(acf.len().checked_sub(2)?);
    let lo = lo.max(1);
    if lo > hi {
        return None;
    }
    let k = (lo..=hi).max_by(|&a, &b| acf[a].total_cmp(&acf[b]))?;
    let (a, b, c) = (acf[k - 1], acf[k], acf[k + 1]);
    let den = a - 2.0 * b + c;
    let shift = if den < 0.0 { (0.5 * (a - c) / den).clamp(-0.5, 0.5) } else { 0.0 };
    Some(k as f64 + shift)
}

/// Dominant period of an autocorrelation sequence, in lags.
///
/// The first peak after the curve has gone negative gives a coarse period.
/// The peak of the highest multiple still inside the sequence then fixes it
/// more precisely.
pub fn acf_period(acf: &[f64]) -> Option<f64> {
    let first_neg = acf.iter().position(|&v| v < 0.0)?;
    let mut k = first_neg;
    while k + 1 < acf.len() && acf[k + 1] <= acf[k] {
        k += 1;
    }
    let coarse_end = (2 * k).max(k + 2);
    let p0 = refined_peak(acf, k, coarse_end)?;
    if acf[p0.round() as usize] <= 0.0 {
        return None;
    }
    let top = ((acf.len() - 2) as f64 / (p0 * 1.25)).floor().max(1.0) as usize;
    let mut best = p0;
    for m in 2..=top {
        let guess = m as f64 * best;
        let half = (best * 0.25).max(1.0);
        let lo = (guess - half).floor().max(1.0) as usize;
        let hi = (guess + half).ceil() as usize;
        match refined_peak(acf, lo, hi) {
            Some(p) if acf[p.round() as usize] > 0.0 => best = p / m as f64,
            _ => break,
        }
    }
    Some(best)
}

/// Dominant period of a sampled profile, in units of `dx`.
pub fn dominant_period(values: &[f64], dx: f64) -> Option<f64> {
    let acf = profile_autocorrelation(values, values.len() / 2)?;
    acf_period(&acf).map(|p| p * dx)
}

/// Dominant period along x of the rows of a field restricted to columns
/// `i0..i1`, from the row autocorrelations summed. Rows with masked cells
/// in the range are skipped.
pub fn row_period(hf: &HeightField, i0: usize, i1: usize) -> Option<f64> {
    let i1 = i1.min(hf.nx);
    if i1 <= i0 + 3 {
        return None;
    }
    let max_lag = (i1 - i0) / 2;
    let mut sum = vec![0.0; max_lag];
    let mut used = 0usize;
    for j in 0..hf.ny {
        let row = &hf.row(j)[i0..i1];
        if row.iter().any(|z| !z.is_finite()) {
            continue;
        }
        if let Some(acf) = profile_autocorrelation(row, max_lag) {
            sum.iter_mut().zip(&acf).for_each(|(s, a)| *s += a);
            used += 1;
        }
    }
    if used == 0 {
        return None;
    }
    acf_period(&sum).map(|p| p * hf.dx)
}
