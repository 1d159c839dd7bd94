use bct_core::chain_sim::{generate, simulate_stationary, stationary, tree_entropy_rate};
use bct_core::ctw::{ctw_mix_log, map_tree, model_posterior_log};
use bct_core::inference::{full_conditional, mle, posterior_moments};
use bct_core::theory::regret_report;
use bct_core::{ChainSpec, ContextTree, CountTrie, CtwState, ParameterVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn third_order_chain() -> ChainSpec {
    // Leaves 00, 010, 011, 1 (newest symbol first).
    let tree = ContextTree::parse(2, "((()(()()))())").unwrap();
    let theta = ParameterVector::new(
        &tree,
        vec![
            vec![0.8, 0.2],
            vec![0.3, 0.7],
            vec![0.6, 0.4],
            vec![0.1, 0.9],
        ],
    )
    .unwrap();
    ChainSpec::new(3, tree, theta).unwrap()
}

#[test]
fn simulate_fit_and_recover() {
    let spec = third_order_chain();
    let law = stationary(&spec).unwrap();
    let seq =
        simulate_stationary(&spec, &law, 6, 40_000, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let trie = CountTrie::build(&seq);

    let map = map_tree(&trie, 0.5, 6).unwrap();
    assert_eq!(map.tree, *spec.tree());
    let posterior = model_posterior_log(&map.tree, &trie, 0.5).unwrap().exp();
    assert!(posterior > 0.5 && posterior <= 1.0);

    let moments = posterior_moments(&full_conditional(&trie, &map.tree).unwrap());
    for (fitted, truth) in moments.mean.rows().iter().zip(spec.theta().rows()) {
        assert!(
            (fitted[0] - truth[0]).abs() < 0.03,
            "{fitted:?} vs {truth:?}"
        );
    }

    let h = tree_entropy_rate(&spec, spec.tree()).unwrap();
    let rate = -ctw_mix_log(&trie, 0.5).unwrap() / seq.len() as f64;
    assert!((rate - h).abs() < 0.02);
}

#[test]
fn streaming_state_tracks_batch_throughout() {
    let spec = third_order_chain();
    let seq = generate(
        &spec,
        3_000,
        &[0, 1, 1, 0],
        &mut ChaCha8Rng::seed_from_u64(8),
    )
    .unwrap();
    let mut state = CtwState::new(2, 4, 0.3, seq.context()).unwrap();
    for (t, &s) in seq.body().iter().enumerate() {
        let p = state.predictive();
        let before = state.log_prob();
        let cond = state.update(s).unwrap();
        assert!((cond - p[s].ln()).abs() < 1e-9);
        assert!((state.log_prob() - before - cond).abs() < 1e-12);
        if t % 500 == 0 {
            let batch = ctw_mix_log(&CountTrie::build(&seq.prefix(t + 1)), 0.3).unwrap();
            assert!((state.log_prob() - batch).abs() < 1e-9 * batch.abs().max(1.0));
        }
    }
}

#[test]
fn regret_against_truth_and_mle() {
    let spec = third_order_chain();
    let seq = generate(&spec, 2_000, &[1, 0, 1], &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    let report = regret_report(&seq, spec.tree(), spec.theta(), 0.5).unwrap();
    assert!(report.bounds_hold());
    assert!(report.theorem1_slack.is_some());
    // The unrestricted maximum likelihood dominates the true likelihood.
    let fit = mle(&CountTrie::build(&seq));
    assert!(fit.log_lik >= report.log_likelihood);
}
