mod common;

use common::*;
use millsurf::engine::SimulationMode;
use millsurf::kinematics::SampledToolState;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn matches_zbuffer_on_plane(seed in any::<u64>(), count in 1usize..12) {
        let tool = reference_tool();
        let net = plane_net(64, 6.0, 0.5);
        let states = vertical_states(&mut rng(seed), count, 6.0, -0.3, 0.4);
        let got = run(&net, &states, &tool, SimulationMode::envelope());
        let want = zbuffer(&net, &states, &tool);
        prop_assert!(max_abs_diff(&got.cut, &want) <= 1e-9);
    }

    #[test]
    fn appending_states_never_adds_material(seed in any::<u64>(), split in 1usize..15) {
        let tool = reference_tool();
        let net = hypar_net(40, 5.0, 0.1);
        let states = tilted_states(&mut rng(seed), 16, 5.0);
        for mode in [SimulationMode::envelope(), SimulationMode::tooth_gated()] {
            let head = run(&net, &states[..split], &tool, mode);
            let all = run(&net, &states, &tool, mode);
            for k in 0..net.len() {
                prop_assert!(all.cut[k] <= head.cut[k]);
                prop_assert!(head.cut[k] <= net.stock);
                prop_assert!(!head.touched[k] || all.touched[k]);
            }
        }
    }

    #[test]
    fn envelope_ignores_state_order(seed in any::<u64>()) {
        let tool = reference_tool();
        let net = hypar_net(40, 5.0, 0.1);
        let states = tilted_states(&mut rng(seed), 16, 5.0);
        let mut shuffled = states.clone();
        shuffled.shuffle(&mut rng(seed ^ 0x5eed));
        let a = run(&net, &states, &tool, SimulationMode::envelope());
        let b = run(&net, &shuffled, &tool, SimulationMode::envelope());
        prop_assert_eq!(a.cut, b.cut);
        prop_assert_eq!(a.touched, b.touched);
    }

    #[test]
    fn full_window_gating_is_envelope(seed in any::<u64>()) {
        let tool = reference_tool();
        let net = hypar_net(40, 5.0, 0.1);
        let states: Vec<SampledToolState> = tilted_states(&mut rng(seed), 16, 5.0)
            .into_iter()
            .map(|s| SampledToolState::standalone(s.state, TAU))
            .collect();
        let a = run(&net, &states, &tool, SimulationMode::envelope());
        let b = run(&net, &states, &tool, SimulationMode::tooth_gated());
        prop_assert_eq!(a.cut, b.cut);
    }

    #[test]
    fn thread_count_does_not_change_result(seed in any::<u64>()) {
        let tool = reference_tool();
        let net = hypar_net(48, 5.0, 0.1);
        let states = tilted_states(&mut rng(seed), 24, 5.0);
        for mode in [SimulationMode::envelope(), SimulationMode::tooth_gated()] {
            let a = run_in_pool(1, &net, &states, &tool, mode);
            let b = run_in_pool(4, &net, &states, &tool, mode);
            prop_assert_eq!(a.cut, b.cut);
            prop_assert_eq!(a.touched, b.touched);
        }
    }
}
