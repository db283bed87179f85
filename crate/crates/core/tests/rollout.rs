use dfp_core::best_response::{mc_cost, rollout, simulate_profile, BeliefProfile, NoiseBatch, RolloutData};
use dfp_core::game_model::{lq_game, LqGame, LqParams};
use dfp_core::policy::{init_policy, InputEncoding, Mode, PlayerPolicy, PolicyInputs, SubnetSpec};

fn zero_beliefs(p: &LqParams, paths: usize) -> BeliefProfile {
    BeliefProfile::constant(paths, p.dims.n_steps, 1, &vec![0.0; p.n()]).unwrap()
}

/// A policy whose every output is the constant `u`.
fn constant_policy(p: &LqParams, player: usize, u: f64) -> PlayerPolicy {
    let mut pol = init_policy(SubnetSpec::default(), &p.dims, player, 1).unwrap();
    pol.zero_trainable();
    for set in pol.subnets_mut() {
        let b = set.index_of("output.bias").unwrap();
        set.tensor_mut(b).values_mut()[0] = u;
    }
    pol
}

fn data_for(game: &LqGame, noise: &NoiseBatch, beliefs: &BeliefProfile) -> RolloutData {
    let p = game.params();
    let inputs = PolicyInputs::build(&p.dims, &p.x0, noise, InputEncoding::Cumulative).unwrap();
    RolloutData::new(game, noise, Some(inputs), beliefs).unwrap()
}

#[test]
fn no_noise_no_reversion_no_control_keeps_states() {
    let mut p = LqParams::benchmark(vec![1.0, 4.0, -2.0], 6);
    p.sigma = 1e-300;
    p.a = 0.0;
    let game = lq_game(p.clone()).unwrap();
    let noise = NoiseBatch::zeros(&p.dims, 2);
    let data = data_for(&game, &noise, &zero_beliefs(&p, 2));
    let out = rollout(&game, &data, 1, &constant_policy(&p, 1, 0.0), Mode::Eval).unwrap();
    for path in 0..2 {
        for step in 0..=6 {
            assert_eq!(out.states.at(path, step), &[1.0, 4.0, -2.0]);
        }
    }
    // Running cost is eps/2 * 3^2 over [0, 1] plus terminal c/2 * 3^2.
    let dev: f64 = 1.0 - 4.0;
    let expected = 0.5 * dev * dev + 0.5 * dev * dev;
    assert!((out.pathwise_cost[0] - expected).abs() < 1e-12);
    // Only the terminal part remains once the running penalty is dropped.
    p.epsilon = 0.0;
    let game = lq_game(p.clone()).unwrap();
    let data = data_for(&game, &noise, &zero_beliefs(&p, 2));
    let cost = mc_cost(&game, &data, 1, &constant_policy(&p, 1, 0.0), Mode::Eval).unwrap();
    assert!((cost - 0.5 * dev * dev).abs() < 1e-12);
}

#[test]
fn zero_cost_game_costs_nothing() {
    let mut p = LqParams::benchmark(vec![0.0, 1.0], 4);
    p.epsilon = 0.0;
    p.c = 0.0;
    let game = lq_game(p.clone()).unwrap();
    let noise = NoiseBatch::sample(&p.dims, 16, 3);
    let data = data_for(&game, &noise, &zero_beliefs(&p, 16));
    assert_eq!(mc_cost(&game, &data, 0, &constant_policy(&p, 0, 0.0), Mode::Eval).unwrap(), 0.0);
}

#[test]
fn two_step_single_player_by_hand() {
    let mut p = LqParams::benchmark(vec![1.0], 2);
    p.sigma = 2.0;
    p.rho = 0.5;
    let game = lq_game(p.clone()).unwrap();
    // (step, source): common first, then the player's own noise.
    let noise = NoiseBatch::from_increments(&p.dims, 1, vec![0.3, -0.2, 0.1, 0.4]).unwrap();
    let data = data_for(&game, &noise, &zero_beliefs(&p, 1));
    let out = rollout(&game, &data, 0, &constant_policy(&p, 0, 0.5), Mode::Eval).unwrap();
    // h = 0.5, common loading 2 * 0.5 = 1, own loading 2 * sqrt(0.75) = sqrt(3).
    let s3 = 3f64.sqrt();
    let x1 = 1.0 + 0.5 * 0.5 + 0.3 - 0.2 * s3;
    let x2 = x1 + 0.5 * 0.5 + 0.1 + 0.4 * s3;
    let states = [out.states.at(0, 0)[0], out.states.at(0, 1)[0], out.states.at(0, 2)[0]];
    assert_eq!(states[0], 1.0);
    assert!((states[1] - x1).abs() < 1e-14);
    assert!((states[2] - x2).abs() < 1e-14);
    assert!((states[1] - 1.2035898384862245).abs() < 1e-14);
    assert!((states[2] - 2.2464101615137754).abs() < 1e-14);
    // A lone player is always at the mean: only the effort term 0.5 u^2 h per step.
    assert!((out.pathwise_cost[0] - 0.125).abs() < 1e-15);
    assert_eq!(out.own_controls.values(), &[0.5, 0.5]);
}

#[test]
fn uncontrolled_terminal_cost_matches_gaussian_variance() {
    // a = q = eps = 0: E cost = c/2 [(mean x0 - x0_i)^2 + sigma^2 (1 - rho^2)(1 - 1/N) T].
    let mut p = LqParams::benchmark(vec![0.0, 1.0, 3.0], 10);
    p.a = 0.0;
    p.epsilon = 0.0;
    p.c = 1.5;
    p.sigma = 0.8;
    p.rho = 0.6;
    let game = lq_game(p.clone()).unwrap();
    let m = 100_000;
    let noise = NoiseBatch::sample(&p.dims, m, 11);
    let beliefs = zero_beliefs(&p, m);
    let data = RolloutData::new(&game, &noise, None, &beliefs).unwrap();
    let out = simulate_profile(&game, &data).unwrap();
    let (means, ses) = (out.mean_costs(), out.std_errors());
    let mean0 = 4.0 / 3.0;
    for i in 0..3 {
        let d0: f64 = mean0 - p.x0[i];
        let expected = 0.5 * p.c * (d0 * d0 + 0.64 * 0.64 * (1.0 - 1.0 / 3.0));
        assert!((means[i] - expected).abs() < 3.0 * ses[i], "player {i}: {} vs {expected} (se {})", means[i], ses[i]);
    }
}

#[test]
fn player_rollout_agrees_with_profile_simulation() {
    let mut p = LqParams::benchmark(vec![0.5, 1.0, 2.0], 5);
    p.q = 0.4;
    let game = lq_game(p.clone()).unwrap();
    let noise = NoiseBatch::sample(&p.dims, 32, 5);
    let beliefs = BeliefProfile::constant(32, 5, 1, &[0.1, -0.3, 0.2]).unwrap();
    let data = data_for(&game, &noise, &beliefs);
    let out = rollout(&game, &data, 1, &constant_policy(&p, 1, -0.3), Mode::Eval).unwrap();
    let profile = simulate_profile(&game, &data).unwrap();
    for path in 0..32 {
        assert!((out.pathwise_cost[path] - profile.costs[path * 3 + 1]).abs() < 1e-12);
        for step in 0..=5 {
            for (a, b) in out.states.at(path, step).iter().zip(profile.states.at(path, step)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

fn deterministic_cost(n_steps: usize) -> f64 {
    let mut p = LqParams::benchmark(vec![0.0, 2.0], n_steps);
    p.sigma = 1e-300;
    let game = lq_game(p.clone()).unwrap();
    let noise = NoiseBatch::zeros(&p.dims, 1);
    let beliefs = zero_beliefs(&p, 1);
    let data = RolloutData::new(&game, &noise, None, &beliefs).unwrap();
    simulate_profile(&game, &data).unwrap().costs[0]
}

#[test]
fn euler_error_is_first_order() {
    let (c10, c20, c40) = (deterministic_cost(10), deterministic_cost(20), deterministic_cost(40));
    let ratio = (c10 - c20).abs() / (c20 - c40).abs();
    assert!((1.7..=2.3).contains(&ratio), "ratio {ratio}");
}

#[test]
fn fine_grid_matches_exact_quadrature() {
    // Deviation d(t) = e^{-t}: running eps/2 int d^2 = (1 - e^{-2}) / 4, terminal c/2 e^{-2}.
    let exact = 0.25 * (1.0 - (-2.0f64).exp()) + 0.5 * (-2.0f64).exp();
    let fine = deterministic_cost(10_000);
    assert!((fine - exact).abs() < 1e-3, "{fine} vs {exact}");
    let coarse = deterministic_cost(20);
    assert!((coarse - exact).abs() > (fine - exact).abs());
}

#[test]
fn rollout_gradient_matches_finite_differences() {
    let mut p = LqParams::benchmark(vec![0.2, 1.0], 3);
    p.q = 0.3;
    p.epsilon = 0.5;
    let game = lq_game(p.clone()).unwrap();
    let noise = NoiseBatch::sample(&p.dims, 4, 21);
    let beliefs = BeliefProfile::constant(4, 3, 1, &[0.1, -0.2]).unwrap();
    let data = data_for(&game, &noise, &beliefs);
    let spec = SubnetSpec {
        hidden_width: 2,
        ..SubnetSpec::default()
    };
    let mut policy = init_policy(spec, &p.dims, 0, 4).unwrap();
    // Step 0 sees identical rows, so untouched shifts would sit on ReLU kinks.
    for set in policy.subnets_mut() {
        for index in 0..set.len() {
            if set.is_trainable(index) {
                for (j, v) in set.tensor_mut(index).values_mut().iter_mut().enumerate() {
                    *v += 0.1 * ((index * 7 + j) as f64).sin();
                }
            }
        }
    }
    let report = dfp_core::best_response::gradient_check(&game, &data, 0, &policy, 1e-5).unwrap();
    assert!(report.max_relative_error <= 1e-4, "{report:?}");
    assert!(report.checked > 20);
}
