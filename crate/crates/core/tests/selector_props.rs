mod common;

use std::sync::Arc;

use common::{kernel_sum, random_graph, random_matrix};
use graphsr_core::selector::{continue_sr, utility, SelectionState};
use graphsr_core::synth::sparse_bandlimited;
use graphsr_core::{
    run_sr, Graph, GroundTruthOracle, Kernel, LassoConfig, SrConfig, SrEngine, Spectrum,
};
use nalgebra::DMatrix;
use rand::Rng;

fn p2() -> Spectrum {
    Spectrum::compute(&Graph::from_edges(2, &[(0, 1, 1.0)]).unwrap().laplacian(), 2).unwrap()
}

#[test]
fn p2_update_closed_form() {
    let s = p2();
    let mut st = SelectionState::new(&s, Kernel::Heat, 1.0).unwrap();
    assert!(st.leverage().iter().all(|&x| (x - 1.0).abs() < 1e-12));
    assert_eq!(st.select_next().unwrap(), 0);
    st.record_observation(0, vec![1.0]).unwrap();
    // |y - z| = 1 with alpha = 1 gives s = 1
    let up = st.update_after_observation(&s, Kernel::Heat, 0, &[1.0], &[0.0]).unwrap();
    let e2 = (-2.0f64).exp();
    let d0 = 0.5 * (1.0 + e2);
    let d1 = 0.5 * (1.0 - e2);
    assert!((up.scale - 1.0).abs() < 1e-15);
    assert!((up.eta - 1.0 / d0).abs() < 1e-12);
    // 1 - tanh(1)
    let frozen = 0.238_405_844_044_234_03;
    assert!((st.leverage()[1] - (1.0 - d1 / d0)).abs() < 1e-12);
    assert!((st.leverage()[1] - frozen).abs() < 1e-12);
    assert_eq!(st.leverage()[0], 0.0);
}

#[test]
fn init_on_triangle_with_truncated_band() {
    let g = Graph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
    let s = Spectrum::compute(&g.laplacian(), 2).unwrap();
    let st = SelectionState::new(&s, Kernel::Heat, 1.0).unwrap();
    let gains = vec![1.0; 2];
    for n in 0..3 {
        assert!((st.leverage()[n] - kernel_sum(s.eigenvectors(), &gains, n, n)).abs() < 1e-12);
    }
}

#[test]
fn select_next_matches_linear_scan() {
    let s = Spectrum::compute(&random_graph(25, 0.2, true, 2).laplacian(), 7).unwrap();
    let f = sparse_bandlimited(&s, 2, 3, 1).unwrap();
    let mut engine = SrEngine::new(Arc::new(s), SrConfig::default(), 2).unwrap();
    for _ in 0..12 {
        let st = engine.state();
        let mut best = None;
        for v in 0..25 {
            if st.policy().contains(&v) {
                continue;
            }
            match best {
                None => best = Some(v),
                Some(b) if st.leverage()[v] > st.leverage()[b] => best = Some(v),
                _ => {}
            }
        }
        let v = engine.propose().unwrap();
        assert_eq!(Some(v), best);
        engine.observe(v, f.row(v).iter().copied().collect()).unwrap();
    }
}

/// Leverage snapshots along a run, before each selection.
fn leverage_trace(n: usize, k: usize, m: usize, seed: u64, kernel: Kernel) -> (Vec<Vec<f64>>, SrEngine) {
    let g = random_graph(n, 0.25, true, seed);
    let s = Arc::new(Spectrum::compute(&g.laplacian(), k).unwrap());
    let f = random_matrix(n, 2, seed + 7);
    let cfg = SrConfig {
        kernel,
        alpha: 1.0,
        lasso: LassoConfig::with_xi(0.01),
    };
    let mut engine = SrEngine::new(s, cfg, 2).unwrap();
    let mut trace = vec![engine.state().leverage().to_vec()];
    for _ in 0..m {
        let v = engine.propose().unwrap();
        engine.observe(v, f.row(v).iter().copied().collect()).unwrap();
        trace.push(engine.state().leverage().to_vec());
    }
    (trace, engine)
}

#[test]
fn adaptive_monotone_and_submodular_along_runs() {
    let mut r = common::rng(99);
    for run in 0..40u64 {
        let n = r.random_range(4..=30);
        let k = r.random_range(1..=n);
        let m = r.random_range(1..=n.min(10));
        let kernel = if run % 5 == 4 { Kernel::MexicanHat } else { Kernel::Heat };
        let (trace, engine) = leverage_trace(n, k, m, run, kernel);
        for (j, lev) in trace.iter().enumerate() {
            assert!(lev.iter().all(|&x| x >= 0.0), "run {run} step {j}");
            for later in &trace[j..] {
                for v in 0..n {
                    assert!(lev[v] >= later[v], "run {run}: leverage of {v} increased");
                }
            }
        }
        let st = engine.state();
        for v in 0..n {
            match st.marginal_benefit(v) {
                Ok(d) => assert!(d >= 0.0),
                Err(_) => assert!(st.policy().contains(&v) && st.leverage()[v] == 0.0),
            }
        }
        // stored leverage-at-selection values sum to the utility
        let from_history: f64 = st.history().iter().map(|h| h.leverage).sum();
        assert_eq!(from_history, st.utility());
        assert_eq!(utility(engine.log()), st.utility());
        let mut sorted = st.policy().to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), m);
        assert_eq!(st.observations().len(), m);
    }
}

#[test]
fn nested_policy_benefits_shrink() {
    // the benefit of v given a prefix of the policy is at least its benefit
    // given the longer policy
    let (trace, engine) = leverage_trace(20, 8, 8, 3, Kernel::Heat);
    let policy = engine.state().policy().to_vec();
    for j in 0..policy.len() {
        for jp in j..policy.len() {
            for v in (0..20).filter(|v| !policy[..jp].contains(v)) {
                assert!(trace[j][v] >= trace[jp][v]);
            }
        }
    }
}

#[test]
fn utility_equals_replay() {
    let (_, engine) = leverage_trace(18, 6, 9, 12, Kernel::Heat);
    let obs: Vec<(usize, Vec<f64>)> = engine
        .state()
        .policy()
        .iter()
        .copied()
        .zip(engine.state().observations().iter().cloned())
        .collect();
    let replayed = SrEngine::replay(engine.spectrum().clone(), *engine.config(), 2, &obs).unwrap();
    assert_eq!(replayed.state().utility(), utility(engine.log()));
    assert_eq!(replayed.state().leverage(), engine.state().leverage());
    assert_eq!(replayed.estimate(), engine.estimate());
}

#[test]
fn snapshot_restore_round_trip() {
    let (_, engine) = leverage_trace(15, 5, 4, 4, Kernel::Heat);
    let json = serde_json::to_string(&engine.snapshot()).unwrap();
    let snap = serde_json::from_str(&json).unwrap();
    let back = SrEngine::restore(engine.spectrum().clone(), snap).unwrap();
    assert_eq!(back.state(), engine.state());
    assert_eq!(back.estimate(), engine.estimate());
    assert_eq!(back.propose().unwrap(), engine.propose().unwrap());
}

#[test]
fn full_budget_recovers_projection() {
    let s = Arc::new(Spectrum::compute(&random_graph(20, 0.2, true, 8).laplacian(), 6).unwrap());
    let f = sparse_bandlimited(&s, 2, 3, 2).unwrap();
    let cfg = SrConfig {
        lasso: LassoConfig::with_xi(1e-10),
        ..Default::default()
    };
    let out = run_sr(s.clone(), cfg, &mut GroundTruthOracle::new(f.clone()), 20).unwrap();
    assert!((&out.estimate - &f).norm() / f.norm() < 1e-3);
    let mut sorted = out.policy.clone();
    sorted.sort_unstable();
    assert_eq!(sorted, (0..20).collect::<Vec<_>>());
}

#[test]
fn single_step_picks_initial_argmax() {
    let s = Arc::new(Spectrum::compute(&random_graph(12, 0.3, true, 1).laplacian(), 4).unwrap());
    let init = SelectionState::new(&s, Kernel::Heat, 1.0).unwrap();
    let f = random_matrix(12, 1, 0);
    let out = run_sr(s, SrConfig::default(), &mut GroundTruthOracle::new(f), 1).unwrap();
    assert_eq!(out.policy, vec![init.select_next().unwrap()]);
    // full band: every leverage is one, so vertex 0 wins the tie
    let out = run_sr(Arc::new(p2()), SrConfig::default(), &mut GroundTruthOracle::new(DMatrix::zeros(2, 1)), 1).unwrap();
    assert_eq!(out.policy, vec![0]);
}

#[test]
fn runs_are_deterministic_and_sign_invariant() {
    let s = Spectrum::compute(&random_graph(30, 0.15, true, 21).laplacian(), 10).unwrap();
    let f = sparse_bandlimited(&s, 3, 4, 3).unwrap();
    let run = |sp: Spectrum| run_sr(Arc::new(sp), SrConfig::default(), &mut GroundTruthOracle::new(f.clone()), 12).unwrap();
    let a = run(s.clone());
    let b = run(s.clone());
    assert_eq!(a.policy, b.policy);
    assert_eq!(a.estimate, b.estimate);

    let mut u = s.eigenvectors().clone();
    for c in [1, 4, 9] {
        u.column_mut(c).neg_mut();
    }
    let flipped = Spectrum::from_parts(s.eigenvalues().clone(), u).unwrap();
    let c = run(flipped);
    assert_eq!(a.policy, c.policy);
    assert!((a.estimate - c.estimate).amax() < 1e-10);
}

struct FailingOracle {
    inner: GroundTruthOracle,
    fail_at: usize,
    calls: usize,
}

impl graphsr_core::Oracle for FailingOracle {
    fn observe(&mut self, v: usize) -> graphsr_core::Result<Vec<f64>> {
        self.calls += 1;
        if self.calls == self.fail_at {
            return Err(graphsr_core::Error::OracleFailure {
                vertex: v,
                reason: "annotator went home".into(),
            });
        }
        self.inner.observe(v)
    }
}

#[test]
fn oracle_failure_leaves_resumable_state() {
    let s = Arc::new(Spectrum::compute(&random_graph(16, 0.3, true, 5).laplacian(), 5).unwrap());
    let f = random_matrix(16, 2, 1);
    let mut engine = SrEngine::new(s.clone(), SrConfig::default(), 2).unwrap();
    let mut flaky = FailingOracle {
        inner: GroundTruthOracle::new(f.clone()),
        fail_at: 4,
        calls: 0,
    };
    assert!(matches!(
        continue_sr(&mut engine, &mut flaky, 8),
        Err(graphsr_core::Error::OracleFailure { .. })
    ));
    assert_eq!(engine.state().policy().len(), 3);
    continue_sr(&mut engine, &mut flaky, 8).unwrap();
    let clean = run_sr(s, SrConfig::default(), &mut GroundTruthOracle::new(f), 8).unwrap();
    assert_eq!(engine.state().policy(), clean.policy.as_slice());
    assert_eq!(engine.estimate(), &clean.estimate);
}
