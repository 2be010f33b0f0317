//! Spindle-synchronized sampling of a programmed trajectory.
//!
//! Postures carry local feedrates; between two postures the feedrate varies
//! linearly in time and the spindle turns at constant speed. Samples are
//! taken every `dalpha` radians of spindle rotation.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tool::{ToolState, Vec3};

pub const DEFAULT_DALPHA: f64 = TAU / 360.0;

/// m/min to mm/s.
pub fn m_per_min_to_mm_s(v: f64) -> f64 {
    v * 1000.0 / 60.0
}

/// rev/min to rad/s.
pub fn rpm_to_rad_s(rpm: f64) -> f64 {
    rpm * 2.0 * PI / 60.0
}

/// Programmed tool posture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToolPosture {
    /// Tool tip, mm.
    pub tip: Vec3,
    /// Unit tool axis.
    pub axis: Vec3,
    /// Local feedrate, mm/s.
    pub feedrate: f64,
}

impl ToolPosture {
    /// The axis is normalized; the feedrate is in mm/s.
    pub fn new(tip: Vec3, axis: Vec3, feedrate: f64) -> Result<Self> {
        let n = axis.norm();
        if !(n.is_finite() && n > 1e-12) {
            return Err(Error::Input("tool axis must be a non-zero vector".into()));
        }
        if !(feedrate > 0.0 && feedrate.is_finite()) {
            return Err(Error::Input(format!("feedrate must be positive, got {feedrate}")));
        }
        if !tip.iter().all(|c| c.is_finite()) {
            return Err(Error::Input("tool tip must be finite".into()));
        }
        Ok(Self {
            tip,
            axis: axis / n,
            feedrate,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    postures: Vec<ToolPosture>,
    /// rad/s
    spindle_speed: f64,
}

impl Trajectory {
    pub fn new(postures: Vec<ToolPosture>, spindle_speed: f64) -> Result<Self> {
        if postures.len() < 2 {
            return Err(Error::Input(format!(
                "trajectory needs at least 2 postures, got {}",
                postures.len()
            )));
        }
        if !(spindle_speed > 0.0 && spindle_speed.is_finite()) {
            return Err(Error::domain("spindle speed must be positive"));
        }
        for (k, w) in postures.windows(2).enumerate() {
            let same_tip = segment_length(&w[0], &w[1]) <= 1e-9;
            let same_axis = (w[0].axis - w[1].axis).norm() <= 1e-12;
            if same_tip && same_axis {
                return Err(Error::Input(format!(
                    "postures {} and {} coincide",
                    k + 1,
                    k + 2
                )));
            }
        }
        Ok(Self {
            postures,
            spindle_speed,
        })
    }

    pub fn postures(&self) -> &[ToolPosture] {
        &self.postures
    }

    pub fn spindle_speed(&self) -> f64 {
        self.spindle_speed
    }
}

/// A tool state on the spindle-angle grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledToolState {
    pub state: ToolState,
    /// Unwrapped spindle angle, rad.
    pub alpha: f64,
    /// mm/s
    pub feedrate: f64,
    /// s
    pub time: f64,
    /// Spindle angles `[start, end)` swept until the next sample.
    pub tooth_window: (f64, f64),
}

impl SampledToolState {
    /// A state outside any trajectory, sweeping `window` radians.
    pub fn standalone(state: ToolState, window: f64) -> Self {
        let alpha = state.spindle_angle;
        Self {
            state,
            alpha,
            feedrate: 0.0,
            time: 0.0,
            tooth_window: (alpha, alpha + window),
        }
    }

    pub fn window_length(&self) -> f64 {
        self.tooth_window.1 - self.tooth_window.0
    }
}

pub fn segment_length(p_i: &ToolPosture, p_j: &ToolPosture) -> f64 {
    (p_j.tip - p_i.tip).norm()
}

/// Travel time at a feedrate varying linearly in time from `vf_i` to `vf_j`.
pub fn segment_duration(length: f64, vf_i: f64, vf_j: f64) -> Result<f64> {
    if !(length >= 0.0) {
        return Err(Error::domain("segment length must be non-negative"));
    }
    let mean = (vf_i + vf_j) / 2.0;
    if !(mean > 0.0) {
        return Err(Error::domain(format!(
            "mean feedrate must be positive ({vf_i}, {vf_j})"
        )));
    }
    Ok(length / mean)
}

pub fn advance_spindle_angle(alpha: f64, omega: f64, dt: f64) -> f64 {
    alpha + omega * dt
}

#[derive(Debug, Clone, Default)]
pub struct SegmentSamples {
    pub states: Vec<SampledToolState>,
    /// The segment spans less than one angular step.
    pub under_sampled: bool,
}

fn make_state(tip: Vec3, axis: Vec3, alpha: f64, feedrate: f64, time: f64) -> Result<SampledToolState> {
    Ok(SampledToolState {
        state: ToolState::new(tip, axis, alpha)?,
        alpha,
        feedrate,
        time,
        tooth_window: (alpha, alpha),
    })
}

/// Sample one segment starting at spindle angle `alpha_i` and time `t_i`.
///
/// States are emitted at `alpha_i + N dalpha` for `N = 1..=floor((alpha_j -
/// alpha_i) / dalpha)`, followed by the end posture when it is off grid.
/// Tooth windows are left empty; [`sample_trajectory`] fills them.
pub fn sample_segment(
    p_i: &ToolPosture,
    p_j: &ToolPosture,
    alpha_i: f64,
    t_i: f64,
    omega: f64,
    dalpha: f64,
) -> Result<SegmentSamples> {
    if !(dalpha > 0.0 && dalpha.is_finite()) {
        return Err(Error::domain("angular step must be positive"));
    }
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::domain("spindle speed must be positive"));
    }
    let length = segment_length(p_i, p_j);
    let duration = segment_duration(length, p_i.feedrate, p_j.feedrate)?;
    let alpha_j = advance_spindle_angle(alpha_i, omega, duration);
    let dt = dalpha / omega;
    let count = ((alpha_j - alpha_i) / dalpha).floor().max(0.0) as usize;

    let chord = if length > 0.0 {
        (p_j.tip - p_i.tip) / length
    } else {
        Vec3::zeros()
    };
    let slope = if duration > 0.0 {
        (p_j.feedrate - p_i.feedrate) / duration
    } else {
        0.0
    };

    let mut states = Vec::with_capacity(count + 1);
    for n in 1..=count {
        let elapsed = n as f64 * dt;
        let vf = p_i.feedrate + slope * elapsed;
        let s = ((vf + p_i.feedrate) / 2.0 * elapsed).min(length);
        let frac = if length > 0.0 { s / length } else { elapsed / duration };
        let axis = p_i.axis * (1.0 - frac) + p_j.axis * frac;
        let alpha = alpha_i + n as f64 * dalpha;
        states.push(make_state(p_i.tip + chord * s, axis, alpha, vf, t_i + elapsed)?);
    }

    // the last grid sample may coincide with the end posture
    if let Some(last) = states.last() {
        if alpha_j - last.alpha <= 1e-9 * dalpha {
            states.pop();
        }
    }
    states.push(make_state(p_j.tip, p_j.axis, alpha_j, p_j.feedrate, t_i + duration)?);

    Ok(SegmentSamples {
        states,
        under_sampled: count == 0,
    })
}

#[derive(Debug, Clone, Default)]
pub struct Sampling {
    pub states: Vec<SampledToolState>,
    /// Segments shorter than one angular step.
    pub under_sampled_segments: usize,
    /// s
    pub total_time: f64,
}

/// Sample a whole trajectory starting from spindle angle `alpha0` at time 0.
pub fn sample_trajectory(traj: &Trajectory, dalpha: f64, alpha0: f64) -> Result<Sampling> {
    let omega = traj.spindle_speed;
    let mut out = Sampling::default();
    let mut alpha = alpha0;
    let mut time = 0.0;
    for w in traj.postures.windows(2) {
        let seg = sample_segment(&w[0], &w[1], alpha, time, omega, dalpha)?;
        if seg.under_sampled {
            out.under_sampled_segments += 1;
        }
        let last = *seg.states.last().expect("segment emits its end posture");
        alpha = last.alpha;
        time = last.time;
        out.states.extend(seg.states);
    }
    out.total_time = time;

    let n = out.states.len();
    for k in 0..n {
        let start = out.states[k].alpha;
        let end = if k + 1 < n {
            out.states[k + 1].alpha
        } else {
            start + dalpha
        };
        out.states[k].tooth_window = (start, end);
    }
    Ok(out)
}

/// Read a posture file: `x_mm,y_mm,z_mm,i,j,k,vf_m_per_min` per line, `#`
/// comments, optional header line.
pub fn read_trajectory_csv(path: &Path) -> Result<Vec<ToolPosture>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trajectory_csv(&text, &path.display().to_string())
}

pub fn parse_trajectory_csv(text: &str, source: &str) -> Result<Vec<ToolPosture>> {
    let mut out = Vec::new();
    let mut seen_data = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: source.to_string(),
            line: idx + 1,
            msg,
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if !seen_data && out.is_empty() && fields.iter().any(|f| f.parse::<f64>().is_err()) => {
                // header
                seen_data = true;
                continue;
            }
            Err(e) => return Err(err(format!("invalid number: {e}"))),
        };
        seen_data = true;
        if values.len() != 7 {
            return Err(err(format!("expected 7 fields, found {}", values.len())));
        }
        let p = ToolPosture::new(
            Vec3::new(values[0], values[1], values[2]),
            Vec3::new(values[3], values[4], values[5]),
            m_per_min_to_mm_s(values[6]),
        )
        .map_err(|e| err(e.to_string()))?;
        out.push(p);
    }
    Ok(out)
}

pub fn write_trajectory_csv(postures: &[ToolPosture]) -> String {
    let mut s = String::from("x_mm,y_mm,z_mm,i,j,k,vf_m_per_min\n");
    for p in postures {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            p.tip.x,
            p.tip.y,
            p.tip.z,
            p.axis.x,
            p.axis.y,
            p.axis.z,
            p.feedrate * 60.0 / 1000.0
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn posture(x: f64, y: f64, z: f64, vf: f64) -> ToolPosture {
        ToolPosture::new(Vec3::new(x, y, z), Vec3::z(), vf).unwrap()
    }

    #[test]
    fn segment_length_examples() {
        assert_eq!(segment_length(&posture(0.0, 0.0, 0.0, 1.0), &posture(3.0, 4.0, 0.0, 1.0)), 5.0);
        assert_eq!(segment_length(&posture(1.0, 1.0, 1.0, 1.0), &posture(1.0, 1.0, 1.0, 1.0)), 0.0);
        let l = segment_length(&posture(1.0, 1.0, 1.0, 1.0), &posture(2.0, 3.0, 4.0, 1.0));
        assert!((l - 14f64.sqrt()).abs() <= 1e-12 * l);
    }

    #[test]
    fn duration_uses_mean_feedrate() {
        assert!((segment_duration(10.0, 50.0, 50.0).unwrap() - 0.2).abs() < 1e-15);
        assert!((segment_duration(10.0, 40.0, 60.0).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(segment_duration(0.0, 40.0, 60.0).unwrap(), 0.0);
        assert!(segment_duration(1.0, 0.0, 0.0).is_err());
        assert!(segment_duration(1.0, -5.0, 2.0).is_err());
    }

    #[test]
    fn spindle_advance() {
        assert_eq!(advance_spindle_angle(0.0, TAU, 1.0), TAU);
        let a = advance_spindle_angle(PI, 1250.0, 0.001);
        assert!((a - (PI + 1.25)).abs() < 1e-12 * a);
        assert_eq!(advance_spindle_angle(1.3, 500.0, 0.0), 1.3);
    }

    #[test]
    fn unit_conversions() {
        assert!((m_per_min_to_mm_s(3.0) - 50.0).abs() < 1e-12);
        assert!((rpm_to_rad_s(10000.0) - 1047.1975511965977).abs() < 1e-9);
    }

    #[test]
    fn ramp_sample_follows_linear_feedrate() {
        // 40 -> 60 mm/s over 20 mm lasts 0.4 s; dt = 0.02 s
        let omega = 1.0;
        let dalpha = 0.02;
        let seg = sample_segment(
            &posture(0.0, 0.0, 0.0, 40.0),
            &posture(20.0, 0.0, 0.0, 60.0),
            0.0,
            0.0,
            omega,
            dalpha,
        )
        .unwrap();
        let s5 = &seg.states[4];
        assert!((s5.feedrate - 45.0).abs() <= 1e-12 * 45.0);
        assert!((s5.state.tip.x - 4.25).abs() <= 1e-12 * 4.25);

        // 10 mm at the same feedrates lasts 0.2 s
        let seg = sample_segment(
            &posture(0.0, 0.0, 0.0, 40.0),
            &posture(10.0, 0.0, 0.0, 60.0),
            0.0,
            0.0,
            omega,
            dalpha,
        )
        .unwrap();
        let s5 = &seg.states[4];
        assert!((s5.feedrate - 50.0).abs() <= 1e-12 * 50.0);
        assert!((s5.state.tip.x - 4.5).abs() <= 1e-12 * 4.5);
    }

    #[test]
    fn constant_feed_spacing_is_feed_per_revolution() {
        let vf = m_per_min_to_mm_s(2.0);
        let omega = rpm_to_rad_s(14285.0);
        let dalpha = TAU / 360.0;
        let traj = Trajectory::new(
            vec![posture(0.0, 0.0, 0.0, vf), posture(5.0, 0.0, 0.0, vf)],
            omega,
        )
        .unwrap();
        let s = sample_trajectory(&traj, dalpha, 0.0).unwrap();
        let fz = vf * TAU / omega;
        let per_rev = s.states[360].state.tip.x - s.states[0].state.tip.x;
        assert!((per_rev - fz).abs() < 1e-12);
        let last = s.states.last().unwrap();
        assert!((last.state.tip - Vec3::new(5.0, 0.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn state_count_off_grid() {
        let vf = 50.0;
        let omega = 100.0;
        let dalpha = 0.07;
        let traj = Trajectory::new(
            vec![posture(0.0, 0.0, 0.0, vf), posture(3.3, 0.0, 0.0, vf)],
            omega,
        )
        .unwrap();
        let s = sample_trajectory(&traj, dalpha, 0.0).unwrap();
        let dt = 3.3 / vf;
        let expect = (omega * dt / dalpha).floor() as usize + 1;
        assert_eq!(s.states.len(), expect);
        assert!((s.total_time - dt).abs() < 1e-15);
    }

    #[test]
    fn on_grid_endpoint_not_duplicated() {
        // 1 mm at 10 mm/s, omega 10 rad/s -> exactly 1 rad
        let traj = Trajectory::new(
            vec![posture(0.0, 0.0, 0.0, 10.0), posture(1.0, 0.0, 0.0, 10.0)],
            10.0,
        )
        .unwrap();
        let s = sample_trajectory(&traj, 0.25, 0.0).unwrap();
        assert_eq!(s.states.len(), 4);
        assert_eq!(s.states[3].state.tip, Vec3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn under_sampled_segment_emits_endpoint() {
        let seg = sample_segment(
            &posture(0.0, 0.0, 0.0, 10.0),
            &posture(0.001, 0.0, 0.0, 10.0),
            0.0,
            0.0,
            10.0,
            0.1,
        )
        .unwrap();
        assert!(seg.under_sampled);
        assert_eq!(seg.states.len(), 1);
        assert_eq!(seg.states[0].state.tip.x, 0.001);
    }

    #[test]
    fn trajectory_validation() {
        assert!(matches!(
            Trajectory::new(vec![posture(0.0, 0.0, 0.0, 1.0)], 1.0),
            Err(Error::Input(_))
        ));
        assert!(Trajectory::new(
            vec![posture(0.0, 0.0, 0.0, 1.0), posture(0.0, 0.0, 0.0, 1.0)],
            1.0
        )
        .is_err());
        // rotation in place is allowed
        let rotated = ToolPosture::new(Vec3::zeros(), Vec3::new(0.1, 0.0, 1.0), 1.0).unwrap();
        assert!(Trajectory::new(vec![posture(0.0, 0.0, 0.0, 1.0), rotated], 1.0).is_ok());
        assert!(ToolPosture::new(Vec3::zeros(), Vec3::zeros(), 1.0).is_err());
        assert!(ToolPosture::new(Vec3::zeros(), Vec3::z(), 0.0).is_err());
    }

    #[test]
    fn closed_loop_returns_to_start() {
        let vf = 30.0;
        let pts = [(0.0, 0.0), (4.0, 0.0), (4.0, 3.0), (0.0, 3.0), (0.0, 0.0)];
        let postures = pts.iter().map(|&(x, y)| posture(x, y, 0.0, vf)).collect();
        let traj = Trajectory::new(postures, 300.0).unwrap();
        let s = sample_trajectory(&traj, 0.05, 0.0).unwrap();
        assert!(s.states.last().unwrap().state.tip.norm() < 1e-6);
        assert!((s.total_time - 14.0 / vf).abs() < 1e-12);
    }

    #[test]
    fn windows_tile_the_spindle_angle() {
        let traj = Trajectory::new(
            vec![
                posture(0.0, 0.0, 0.0, 20.0),
                posture(1.0, 0.0, 0.0, 35.0),
                posture(2.0, 0.5, 0.0, 10.0),
            ],
            400.0,
        )
        .unwrap();
        let dalpha = 0.1;
        let s = sample_trajectory(&traj, dalpha, 0.3).unwrap();
        for w in s.states.windows(2) {
            assert_eq!(w[0].tooth_window.1, w[1].tooth_window.0);
            assert!(w[0].window_length() > 0.0 && w[0].window_length() <= dalpha * (1.0 + 1e-12));
        }
        let last = s.states.last().unwrap();
        assert!((last.window_length() - dalpha).abs() < 1e-12);
    }

    #[test]
    fn csv_parsing() {
        let text = "# comment\nx,y,z,i,j,k,vf\n0,0,0,0,0,1,3\n1,0,0,0,0,2,6 # trailing\n";
        let p = parse_trajectory_csv(text, "t.csv").unwrap();
        assert_eq!(p.len(), 2);
        assert!((p[0].feedrate - 50.0).abs() < 1e-12);
        assert_eq!(p[1].axis, Vec3::z());
        let again = parse_trajectory_csv(&write_trajectory_csv(&p), "t.csv").unwrap();
        assert_eq!(again, p);

        match parse_trajectory_csv("0,0,0,0,0,1,3\n0,0,x,0,0,1,3\n", "t.csv") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_trajectory_csv("0,0,0,0,0,1\n", "t.csv"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(parse_trajectory_csv("0,0,0,0,0,1,-1\n", "t.csv").is_err());
        assert!(parse_trajectory_csv("", "t.csv").unwrap().is_empty());
    }

    fn ramp_trajectory(vf0: f64, vf1: f64, vf2: f64, scale: f64) -> Trajectory {
        Trajectory::new(
            vec![
                posture(0.0, 0.0, 0.0, vf0 * scale),
                posture(2.0, 0.3, 0.0, vf1 * scale),
                posture(3.5, 0.3, 0.1, vf2 * scale),
            ],
            700.0,
        )
        .unwrap()
    }

    proptest! {
        #[test]
        fn time_angle_consistency(vf0 in 5.0..80.0, vf1 in 5.0..80.0, vf2 in 5.0..80.0, a0 in 0.0..6.0) {
            let traj = ramp_trajectory(vf0, vf1, vf2, 1.0);
            let omega = traj.spindle_speed();
            let s = sample_trajectory(&traj, 0.05, a0).unwrap();
            for st in &s.states {
                let lhs = st.alpha - a0;
                let rhs = omega * st.time;
                prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
            }
        }

        #[test]
        fn arc_length_monotone(vf_i in 5.0..80.0, vf_j in 5.0..80.0, len in 0.5..5.0) {
            let seg = sample_segment(
                &posture(0.0, 0.0, 0.0, vf_i),
                &posture(len, 0.0, 0.0, vf_j),
                0.0, 0.0, 900.0, 0.03,
            ).unwrap();
            let mut prev = 0.0;
            for st in &seg.states {
                let s = st.state.tip.x;
                prop_assert!(s > prev);
                prop_assert!(s <= len + 1e-9);
                prev = s;
            }
        }

        #[test]
        fn halving_dalpha_refines(vf0 in 5.0..80.0, vf1 in 5.0..80.0, vf2 in 5.0..80.0) {
            let traj = ramp_trajectory(vf0, vf1, vf2, 1.0);
            let dalpha = 0.04;
            let coarse = sample_trajectory(&traj, dalpha, 0.0).unwrap();
            let fine = sample_trajectory(&traj, dalpha / 2.0, 0.0).unwrap();
            for c in &coarse.states {
                let m = fine.states.iter().find(|f| f.alpha == c.alpha);
                let m = m.expect("coarse angle present in fine sampling");
                prop_assert_eq!(m.state.tip, c.state.tip);
                prop_assert_eq!(m.state.axis, c.state.axis);
            }
        }

        #[test]
        fn feedrate_scaling(vf0 in 5.0..40.0, c in 1.1..3.0) {
            let base = sample_trajectory(&ramp_trajectory(vf0, vf0, vf0, 1.0), 0.05, 0.0).unwrap();
            let fast = sample_trajectory(&ramp_trajectory(vf0, vf0, vf0, c), 0.05, 0.0).unwrap();
            prop_assert!((base.total_time / c - fast.total_time).abs() <= 1e-12 * base.total_time);
            let d0 = base.states[1].state.tip - base.states[0].state.tip;
            let d1 = fast.states[1].state.tip - fast.states[0].state.tip;
            prop_assert!((d1.norm() - c * d0.norm()).abs() <= 1e-9);
        }
    }
}
