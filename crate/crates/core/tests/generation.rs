mod support;

use nbv_core::oracle::{
    generate_examples, generate_runs, resolution_optimal_nbv, view_to_class, GenerationRun, ReconstructionConfig,
    RunEnd, Scenario,
};
use nbv_core::scene::{
    generate_demo_object, generate_view_sphere, ObjectKind, PointCloud, ViewSet, DEFAULT_OBJECT_SCALE,
};
use support::reeval::exhaustive_nbv;

fn scenario(kind: ObjectKind, seed: u64, cfg: &ReconstructionConfig) -> (Scenario, ViewSet) {
    let views = generate_view_sphere(14, 0.4, true).unwrap();
    let mesh = generate_demo_object(kind, seed, DEFAULT_OBJECT_SCALE).unwrap();
    (Scenario::build(&mesh, views.clone(), cfg).unwrap(), views)
}

/// Re-integrates the run's views and checks every recorded state and label.
fn replay(sc: &Scenario, classes: &ViewSet, run: &GenerationRun) {
    let cfg = sc.config();
    let clouds: Vec<&PointCloud> = (0..sc.views().len()).map(|i| sc.perceptions().cloud(i)).collect();
    let mut p_acu = PointCloud::empty();
    let mut grid = sc.fresh_grid();
    for (k, &v) in run.views.iter().enumerate() {
        sc.perceive(v, &mut p_acu, &mut grid).unwrap();
        assert_eq!(sc.coverage(&p_acu), run.coverage[k]);
        let Some(ex) = run.examples.get(k) else {
            assert_eq!(run.end, RunEnd::Infeasible);
            assert!(
                exhaustive_nbv(&p_acu, sc.w_obj(), sc.views(), &clouds, &run.views[..=k], &grid, &cfg.metric).is_none()
            );
            continue;
        };
        assert_eq!(ex.grid, grid.snapshot(), "grid of step {k} differs on replay");
        let (best, delta) =
            exhaustive_nbv(&p_acu, sc.w_obj(), sc.views(), &clouds, &run.views[..=k], &grid, &cfg.metric).unwrap();
        assert_eq!(run.results[k].nbv.unwrap().id, best);
        assert_eq!(run.results[k].delta, delta);
        assert_eq!(ex.label as usize, view_to_class(&sc.views().views()[best], classes).unwrap());
        let c = &run.results[k].per_candidate[best];
        assert!(c.overlap > cfg.metric.min_overlap && c.features >= 3);
        if let Some(&next) = run.views.get(k + 1) {
            assert_eq!(next, best);
        }
    }
}

#[test]
fn labels_match_an_exhaustive_reevaluation() {
    let cfg = ReconstructionConfig::default();
    let (sc, classes) = scenario(ObjectKind::LShape, 3, &cfg);
    let runs = generate_runs(&sc, &classes, 0, &[0, 5, 9, 13]).unwrap();
    assert!(runs.iter().map(|r| r.examples.len()).sum::<usize>() > 0);
    for run in &runs {
        replay(&sc, &classes, run);
    }
}

#[test]
fn runs_are_monotone_and_stop_for_a_declared_reason() {
    let cfg = ReconstructionConfig::default();
    let (sc, classes) = scenario(ObjectKind::Box, 1, &cfg);
    let runs = generate_runs(&sc, &classes, 7, &(0..14).collect::<Vec<_>>()).unwrap();
    for run in &runs {
        assert!(run.coverage.windows(2).all(|w| w[1] >= w[0]));
        assert!(run.views.len() <= cfg.max_iter);
        let mut seen = run.views.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), run.views.len(), "a view was revisited");
        match run.end {
            RunEnd::CoverageReached => assert!(*run.coverage.last().unwrap() >= cfg.s_cov),
            RunEnd::MaxIterations => assert_eq!(run.views.len(), cfg.max_iter),
            RunEnd::Infeasible => assert!(!run.results.last().unwrap().feasible()),
        }
        for (k, ex) in run.examples.iter().enumerate() {
            assert_eq!((ex.object_id, ex.run_id, ex.iteration as usize), (7, run.initial_view as u32, k));
            assert!(ex.grid.iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }
}

#[test]
fn saturated_model_leaves_nothing_to_gain() {
    let cfg = ReconstructionConfig::default();
    let (sc, _) = scenario(ObjectKind::Box, 5, &cfg);
    let all = (0..sc.views().len()).fold(PointCloud::empty(), |acc, v| acc.union(sc.perceptions().cloud(v)));
    let res = resolution_optimal_nbv(&all, sc.w_obj(), sc.perceptions(), &cfg.metric).unwrap();
    assert_eq!(res.per_candidate.len(), 14);
    assert!(res.per_candidate.iter().all(|c| c.delta == 0.0));
    assert!(res
        .per_candidate
        .iter()
        .filter(|c| !sc.perceptions().cloud(c.view_id).is_empty())
        .all(|c| c.overlap == 1.0));
}

#[test]
fn zero_coverage_target_yields_no_examples() {
    let cfg = ReconstructionConfig { s_cov: 0.0, ..ReconstructionConfig::default() };
    let (sc, classes) = scenario(ObjectKind::Composite, 2, &cfg);
    assert!(generate_examples(&sc, &classes, 0, &[0, 1, 2]).unwrap().is_empty());
}

#[test]
fn generation_is_deterministic() {
    let cfg = ReconstructionConfig::default();
    let (a, classes) = scenario(ObjectKind::Composite, 4, &cfg);
    let (b, _) = scenario(ObjectKind::Composite, 4, &cfg);
    let ids: Vec<usize> = (0..14).step_by(3).collect();
    assert_eq!(generate_examples(&a, &classes, 1, &ids).unwrap(), generate_examples(&b, &classes, 1, &ids).unwrap());
}

#[test]
fn unknown_initial_view_is_rejected() {
    let cfg = ReconstructionConfig::default();
    let (sc, classes) = scenario(ObjectKind::Box, 0, &cfg);
    assert!(generate_runs(&sc, &classes, 0, &[14]).is_err());
}
