use std::sync::Arc;

use minksym::bodies::{EuclideanBall, EvalMode, PolytopeHull, ScaledCrossPolytope, SupportBody};
use minksym::linalg::{sample_sphere, OrthogonalBasis, Seed};
use minksym::pipeline::{
    decay_experiment, run_pipeline, schedule_iterated, schedule_random6, schedule_walsh5, schedule_walsh5_with,
    BasisSource, DecayScope, EstimatorConfig, MetricsScope, Schedule, ScheduleKind, StageSpec, Walsh5Options,
};

fn light() -> EstimatorConfig {
    EstimatorConfig {
        n_dirs: 32,
        mc_samples: 500,
        starts: 3,
        steps: 20,
        sandwich_dirs: 24,
        refine: 2,
        defect_tests: 12,
        ..EstimatorConfig::default()
    }
}

#[test]
fn reflection_counts_follow_the_schedules() {
    let s = schedule_random6(2).unwrap();
    assert_eq!((0..6).map(|k| s.reflections(k)).collect::<Vec<_>>(), vec![2, 1, 1, 1, 1, 1]);
    assert_eq!(s.total_reflections(), 7);
    assert_eq!(schedule_random6(10).unwrap().total_reflections(), 55);
    assert_eq!(schedule_random6(64).unwrap().total_reflections(), 379);
    assert_eq!(schedule_walsh5(2).unwrap().total_reflections(), 6);
    assert_eq!(schedule_walsh5(16).unwrap().total_reflections(), 76);
    let opts = Walsh5Options {
        unconditional_in: Some(OrthogonalBasis::identity(16)),
        ..Walsh5Options::default()
    };
    assert_eq!(schedule_walsh5_with(16, &opts).unwrap().total_reflections(), 60);
    assert_eq!(schedule_iterated(8, 2).unwrap().stages.len(), 5);
    assert!(schedule_random6(1).is_err());
    assert!(schedule_walsh5(0).is_err());
}

#[test]
fn schedules_reject_dangling_walsh_references() {
    let bad = Schedule::new(4, ScheduleKind::Custom, vec![StageSpec::new(BasisSource::WalshRelativeToPrevious, false)]);
    assert!(bad.is_err());
    let bad = Schedule::new(
        4,
        ScheduleKind::Custom,
        vec![
            StageSpec::new(BasisSource::HaarRandom, false),
            StageSpec::new(BasisSource::WalshRelativeTo { stage: 1 }, true),
        ],
    );
    assert!(bad.is_err());
    let bad = Schedule::new(
        4,
        ScheduleKind::Custom,
        vec![StageSpec::new(BasisSource::Given { basis: OrthogonalBasis::identity(3) }, false)],
    );
    assert!(bad.is_err());
}

#[test]
fn walsh_stages_are_flat_relative_to_their_reference() {
    let s = schedule_walsh5(8).unwrap();
    let b = s.realize(Seed(1)).unwrap();
    for (k, pair) in [(1usize, 0usize), (2, 1), (4, 3)] {
        let m = b[pair].matrix().tr_mul(b[k].matrix());
        let max = m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(max <= 2.0 / 8f64.sqrt() + 1e-12, "stage {k}: {max}");
    }
}

#[test]
fn ball_is_a_fixed_point() {
    let ball: Arc<dyn SupportBody> = Arc::new(EuclideanBall::new(16, 1.0).unwrap());
    let r = run_pipeline(ball, &schedule_walsh5(16).unwrap(), Seed(1), &light()).unwrap();
    assert_eq!(r.stages.len(), 6);
    for s in &r.stages {
        assert!((s.sandwich.as_ref().unwrap().ratio - 1.0).abs() < 1e-9);
        assert!((s.mean_width.value - 1.0).abs() < 1e-12);
    }
    assert!(r.verdicts.reflection_count_matches);
    assert_eq!(r.verdicts.final_sandwich_within_two, Some(true));
}

#[test]
fn cross_polytope_in_exact_mode_keeps_paired_mean_width() {
    let q: Arc<dyn SupportBody> = Arc::new(ScaledCrossPolytope::normalized(4).unwrap());
    let r = run_pipeline(q, &schedule_random6(4).unwrap(), Seed(7), &light()).unwrap();
    assert!(r.stages.iter().all(|s| s.mode == EvalMode::Exact));
    assert!(r.verdicts.max_paired_change.unwrap() <= 1e-10);
    assert!(r.verdicts.mean_width_stable);
    assert_eq!(r.verdicts.unconditional_after_first, Some(true));
    assert_eq!(r.verdicts.symmetric_after_first, Some(true));
    assert_eq!(r.stages.last().unwrap().total_reflections, 19);
    assert_eq!(r.stages[1].effective_reflections, 0);
}

#[test]
fn non_symmetric_hull_becomes_unconditional_after_first_stage() {
    let n = 5;
    let pts: Vec<Vec<f64>> = (0..8).map(|i| sample_sphere(n, Seed(3).index(i)).unwrap().into_inner()).collect();
    let hull: Arc<dyn SupportBody> = Arc::new(PolytopeHull::new(&pts).unwrap());
    let mut cfg = light();
    cfg.exact_cap = 10;
    let r = run_pipeline(hull, &schedule_random6(n).unwrap(), Seed(2), &cfg).unwrap();
    assert_eq!(r.verdicts.unconditional_after_first, Some(true));
    assert_eq!(r.verdicts.symmetric_after_first, Some(true));
    assert!(r.stages[1].unconditionality.as_ref().unwrap().defect <= 1e-9);
    // Later stages exceed the cap of 10 and switch to Monte Carlo; the paired
    // comparison still shares all signs across the last reflection.
    assert!(matches!(r.stages[3].mode, EvalMode::MonteCarlo { .. }));
    assert!(r.verdicts.max_paired_change.unwrap() <= 1e-10);
    assert!(r.verdicts.mean_width_stable);
}

#[test]
fn reports_are_deterministic() {
    let q: Arc<dyn SupportBody> = Arc::new(ScaledCrossPolytope::normalized(6).unwrap());
    let mut cfg = light();
    cfg.exact_cap = 8;
    let a = run_pipeline(q.clone(), &schedule_random6(6).unwrap(), Seed(11), &cfg).unwrap();
    let b = run_pipeline(q, &schedule_random6(6).unwrap(), Seed(11), &cfg).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn final_only_metrics_skip_intermediate_searches() {
    let q: Arc<dyn SupportBody> = Arc::new(ScaledCrossPolytope::normalized(4).unwrap());
    let mut cfg = light();
    cfg.metrics = MetricsScope::Final;
    let r = run_pipeline(q, &schedule_random6(4).unwrap(), Seed(1), &cfg).unwrap();
    assert!(r.stages[..6].iter().all(|s| s.circumradius_lb.is_none()));
    assert!(r.stages[6].sandwich.is_some());
}

#[test]
fn dimension_mismatch_is_reported() {
    let q: Arc<dyn SupportBody> = Arc::new(ScaledCrossPolytope::normalized(4).unwrap());
    assert!(run_pipeline(q, &schedule_random6(5).unwrap(), Seed(1), &light()).is_err());
}

#[test]
fn small_decay_table_is_well_formed() {
    let t = decay_experiment(&[4], ScheduleKind::Random6, &[Seed(1), Seed(2)], &light(), DecayScope::Relevant).unwrap();
    assert_eq!(t.rows.len(), 2);
    let s = &t.summary[0];
    assert!(s.median_radius_q_over_log_n.is_finite() && s.median_radius_q_over_log_n > 0.0);
    for r in &t.rows {
        assert!(r.radius_kt <= r.t + 1e-12);
    }
    let w = decay_experiment(&[4], ScheduleKind::Walsh5, &[Seed(1)], &light(), DecayScope::FullSchedule).unwrap();
    assert!(w.rows[0].pipeline.is_some());
    assert!(decay_experiment(&[], ScheduleKind::Random6, &[Seed(1)], &light(), DecayScope::Relevant).is_err());
}
