#![allow(dead_code)]

use millsurf::engine::{simulate, SimulationMode};
use millsurf::kinematics::SampledToolState;
use millsurf::surface::{make_hypar_net, make_plane_net, Bounds, LineNet};
use millsurf::tool::{profile_height, ToolDefinition, ToolState, Vec3};
use rand::Rng;
use std::f64::consts::TAU;

pub fn reference_tool() -> ToolDefinition {
    ToolDefinition::new(5.0, 1.5).unwrap()
}

pub fn plane_net(n: usize, half: f64, stock: f64) -> LineNet {
    make_plane_net(0.0, Bounds::new(-half, half, -half, half), n, n, stock).unwrap()
}

pub fn hypar_net(n: usize, half: f64, stock: f64) -> LineNet {
    make_hypar_net(25.0, Bounds::new(-half, half, -half, half), n, n, stock).unwrap()
}

/// Vertical tools with tips scattered over `[-half, half]²` and
/// `z ∈ [zlo, zhi]`.
pub fn vertical_states(rng: &mut impl Rng, n: usize, half: f64, zlo: f64, zhi: f64) -> Vec<SampledToolState> {
    (0..n)
        .map(|_| {
            let tip = Vec3::new(rng.gen_range(-half..half), rng.gen_range(-half..half), rng.gen_range(zlo..zhi));
            let st = ToolState::new(tip, Vec3::z(), rng.gen_range(0.0..TAU)).unwrap();
            SampledToolState::standalone(st, TAU)
        })
        .collect()
}

/// Tilted tools with random axes within ~20° of vertical and random
/// narrow tooth windows.
pub fn tilted_states(rng: &mut impl Rng, n: usize, half: f64) -> Vec<SampledToolState> {
    (0..n)
        .map(|_| {
            let tip = Vec3::new(rng.gen_range(-half..half), rng.gen_range(-half..half), rng.gen_range(-0.08..0.02));
            let axis = Vec3::new(rng.gen_range(-0.35..0.35), rng.gen_range(-0.35..0.35), 1.0);
            let st = ToolState::new(tip, axis, rng.gen_range(0.0..TAU)).unwrap();
            SampledToolState::standalone(st, rng.gen_range(0.05..1.5))
        })
        .collect()
}

/// Brute-force z-buffer drop for vertical tools on a plane net: each cell
/// keeps the lowest profile height of any tool above it.
pub fn zbuffer(net: &LineNet, states: &[SampledToolState], tool: &ToolDefinition) -> Vec<f64> {
    let mut out = vec![net.stock; net.len()];
    for j in 0..net.ny {
        for i in 0..net.nx {
            let k = net.index(i, j);
            for s in states {
                let tip = s.state.tip;
                let rho = ((net.x(i) - tip.x).powi(2) + (net.y(j) - tip.y).powi(2)).sqrt();
                if rho <= tool.radius {
                    let h = tip.z + profile_height(rho, tool).unwrap();
                    out[k] = out[k].min(h);
                }
            }
        }
    }
    out
}

pub fn run(net: &LineNet, states: &[SampledToolState], tool: &ToolDefinition, mode: SimulationMode) -> LineNet {
    let mut n = net.clone();
    simulate(&mut n, states, tool, &mode).unwrap();
    n
}

pub fn run_in_pool(threads: usize, net: &LineNet, states: &[SampledToolState], tool: &ToolDefinition, mode: SimulationMode) -> LineNet {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| run(net, states, tool, mode))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Yaw °, tilt °, scallop mm, Vf m/min, Sz µm, Sa µm, transversal step mm,
/// feed per tooth mm.
pub type ReferenceCase = (f64, f64, f64, f64, f64, f64, f64, f64);

pub const REFERENCE_CASES: [ReferenceCase; 4] = [
    (0.0, 1.0, 0.005, 2.0, 5.58, 1.21, 2.63, 0.14),
    (0.0, 1.0, 0.005, 4.0, 9.24, 1.66, 2.62, 0.27),
    (0.0, 10.0, 0.01, 4.0, 15.7, 2.56, 1.18, 0.27),
    (20.0, 10.0, 0.01, 4.0, 5.63, 1.05, 0.43, 0.27),
];
