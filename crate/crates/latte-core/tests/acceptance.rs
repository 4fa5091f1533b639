//! Acceptance suite: one test per criterion, each printing a pass line
//! with its runtime (run with `--nocapture` to see them). Every tolerance
//! is pinned here, not in helper code.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{fixture, ALL_FIXTURES, MAIN_FIXTURES};
use latte_core::app_spec::{Position, StatusKey, StatusValue, ViewType};
use latte_core::bench::{compare, random_explore, st_sweep, RandomConfig, DEFAULT_SEEDS};
use latte_core::builder::{brute_force_model, build_model, check_isomorphic, BuildConfig};
use latte_core::model::{state_similarity, ModelState, StateId, StateKind};
use latte_core::runtime::{replay, ObservedView, ReplayOutcome};
use latte_core::target::{generate, Target, DEFAULT_MAXTRY};
use latte_core::{ActivityId, BackStack, ConcreteEvent, EventKind, LabelId, LaunchMode};

fn pass(criterion: &str, started: Instant, budget: Duration) {
    let elapsed = started.elapsed();
    assert!(
        elapsed < budget,
        "{criterion} exceeded its runtime budget: {elapsed:?} >= {budget:?}"
    );
    println!("{criterion}: PASS ({} ms)", elapsed.as_millis());
}

fn delete_undelete_target(spec: &latte_core::AppSpec) -> Target {
    Target::new(
        [LabelId::new("deleteNote"), LabelId::new("undeleteNote")],
        &spec.label_universe(),
    )
    .unwrap()
}

/// All six launch-mode rows as exact stack-in/stack-out checks, then the
/// settings round trip on the tomdroid fixture reproducing the four
/// depicted stack configurations in order.
#[test]
fn criterion_1_back_stack_rules() {
    let started = Instant::now();

    let stack = |ids: &[&str]| -> BackStack {
        ids.iter()
            .enumerate()
            .map(|(i, id)| latte_core::ActivityInstanceRef {
                activity: ActivityId::new(*id),
                serial: i as u32 + 1,
            })
            .collect()
    };
    let ids = |s: &BackStack| -> Vec<String> {
        s.activity_ids().into_iter().map(|a| a.0).collect()
    };

    let rows: [(&[&str], &str, LaunchMode, &[&str], bool); 6] = [
        (&["x", "a"], "a", LaunchMode::Standard, &["x", "a", "a"], true),
        (&["x", "a"], "b", LaunchMode::Standard, &["x", "a", "b"], true),
        (&["x", "a"], "a", LaunchMode::SingleTop, &["x", "a"], false),
        (&["x", "a", "b"], "a", LaunchMode::SingleTop, &["x", "a", "b", "a"], true),
        (&["x", "a", "b"], "a", LaunchMode::SingleTask, &["x", "a"], false),
        (&["x", "a", "b"], "c", LaunchMode::SingleTask, &["x", "a", "b", "c"], true),
    ];
    for (before, open, mode, after, started_new) in rows {
        let (result, created) = stack(before).push_for_launch(&ActivityId::new(open), mode, 99);
        assert_eq!(ids(&result), after, "{mode:?} open {open} on {before:?}");
        assert_eq!(created, started_new, "{mode:?} open {open} on {before:?}");
    }

    // settings round trip: launch, open settings, toggle the checkbox,
    // press back; four stack configurations in order
    let spec = fixture("tomdroid");
    let seq = vec![
        ConcreteEvent::on_view("settings_btn", EventKind::Click),
        ConcreteEvent::on_view("show_deleted_cb", EventKind::Click),
        ConcreteEvent::global(EventKind::Back),
    ];
    let outcome = replay(&spec, &seq);
    let trace = match &outcome {
        ReplayOutcome::Completed { trace } => trace,
        other => panic!("scenario must replay: {other:?}"),
    };
    let tom = vec![ActivityId::new("TomDroidActivity")];
    let tom_pref =
        vec![ActivityId::new("TomDroidActivity"), ActivityId::new("PreferencesActivity")];
    let mut configurations = vec![trace.steps[0].observation.stack.clone()];
    configurations.extend(trace.stack_snapshots());
    assert_eq!(configurations, vec![tom.clone(), tom_pref.clone(), tom_pref, tom]);

    // the same evolution falls out of folding the stack rules directly
    let mut folded = stack(&["TomDroidActivity"]);
    let (pushed, _) = folded.push_for_launch(
        &ActivityId::new("PreferencesActivity"),
        LaunchMode::Standard,
        2,
    );
    folded = pushed; // settings click
    // checkbox click leaves the stack alone
    folded = folded.pop_back().unwrap(); // back key
    assert_eq!(ids(&folded), ["TomDroidActivity"]);

    pass("criterion 1 (back-stack rules)", started, Duration::from_secs(1));
}

/// Threshold-1.0 builds are isomorphic to the exhaustive oracle on every
/// bundled fixture.
#[test]
fn criterion_2_oracle_equivalence() {
    let started = Instant::now();
    for name in ALL_FIXTURES {
        let spec = fixture(name);
        let build = build_model(&spec, &BuildConfig::with_threshold(1.0)).unwrap();
        let oracle = brute_force_model(&spec, 64).unwrap();
        check_isomorphic(&build.model, &oracle)
            .unwrap_or_else(|e| panic!("fixture {name}: {e}"));
    }
    pass("criterion 2 (oracle equivalence)", started, Duration::from_secs(30));
}

/// Similarity math on 1000 randomized view-set pairs, checked against an
/// independently computed Jaccard value at 1e-12.
#[test]
fn criterion_3_similarity_math() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x51);

    let random_view = |rng: &mut ChaCha8Rng| -> ObservedView {
        let mut status = BTreeMap::new();
        if rng.gen_bool(0.7) {
            status.insert(StatusKey::Checked, StatusValue::Bool(rng.gen_bool(0.5)));
        }
        if rng.gen_bool(0.4) {
            status.insert(StatusKey::Value, StatusValue::Int(rng.gen_range(0..3)));
        }
        ObservedView {
            view: format!("v{}", rng.gen_range(0..8)).as_str().into(),
            view_type: if rng.gen_bool(0.5) { ViewType::Button } else { ViewType::CheckBox },
            position: Position(rng.gen_range(0..3), rng.gen_range(0..3)),
            status,
        }
    };
    let random_state = |rng: &mut ChaCha8Rng, id: u32| -> ModelState {
        let mut views: Vec<ObservedView> =
            (0..rng.gen_range(0..6)).map(|_| random_view(rng)).collect();
        views.sort_by(|a, b| (&a.view, &a.status).cmp(&(&b.view, &b.status)));
        views.dedup();
        let stack: Vec<ActivityId> = (0..rng.gen_range(1..4))
            .map(|_| format!("A{}", rng.gen_range(0..2)).as_str().into())
            .collect();
        ModelState {
            id: StateId(id),
            kind: StateKind::Ordinary,
            activity: Some("Shared".into()),
            views,
            stack,
            access_seq: Vec::new(),
        }
    };

    // second route: quadratic membership counting over plain vectors
    let independent_jaccard = |a: &[ObservedView], b: &[ObservedView]| -> f64 {
        if a.is_empty() && b.is_empty() {
            return 1.0;
        }
        let inter = a.iter().filter(|v| b.contains(v)).count();
        let union = a.len() + b.len() - inter;
        inter as f64 / union as f64
    };

    for round in 0..1000 {
        let s1 = random_state(&mut rng, 2);
        let s2 = random_state(&mut rng, 3);
        let omega: f64 = rng.gen_range(0.0..=1.0);

        let sim = state_similarity(&s1, &s2, omega);
        let sim_rev = state_similarity(&s2, &s1, omega);
        assert_eq!(sim, sim_rev, "symmetry violated in round {round}");
        assert!((0.0..=1.0).contains(&sim), "range violated in round {round}: {sim}");

        let sim_v = independent_jaccard(&s1.views, &s2.views);
        let sim_l = if s1.stack == s2.stack { 1.0 } else { 0.0 };
        let expected = omega * sim_v + (1.0 - omega) * sim_l;
        assert!(
            (sim - expected).abs() <= 1e-12,
            "affine identity violated in round {round}: {sim} vs {expected}"
        );

        // for an interior weight, similarity 1 characterizes full equality
        let mid = state_similarity(&s1, &s2, 0.5);
        let identical = s1.views == s2.views && s1.stack == s2.stack;
        assert_eq!(mid == 1.0, identical, "round {round}");
    }
    pass("criterion 3 (similarity math)", started, Duration::from_secs(30));
}

/// State counts grow with the threshold and label coverage at 0.8 matches
/// full splitting, on every main fixture.
#[test]
fn criterion_4_merge_threshold_trend() {
    let started = Instant::now();
    let thresholds = [0.0, 0.25, 0.5, 0.8, 1.0];
    for name in MAIN_FIXTURES {
        let spec = fixture(name);
        let rows = st_sweep(&spec, &thresholds, &BuildConfig::default()).unwrap();
        for pair in rows.windows(2) {
            assert!(
                pair[0].states <= pair[1].states,
                "{name}: state count decreased from threshold {} to {}",
                pair[0].threshold,
                pair[1].threshold
            );
        }
        let at = |t: f64| rows.iter().find(|r| r.threshold == t).unwrap();
        assert_eq!(
            at(0.8).labels_covered,
            at(1.0).labels_covered,
            "{name}: label coverage at 0.8 must match full splitting"
        );
        assert!(rows.iter().all(|r| !r.truncated), "{name}: sweep builds must finish");
    }
    pass("criterion 4 (merge-threshold trend)", started, Duration::from_secs(120));
}

/// Modeling statuses and the stack yields strictly more states and
/// transitions than collapsing both.
#[test]
fn criterion_5_status_stack_sensitivity() {
    let started = Instant::now();
    let spec = fixture("tippytipper");
    let full = build_model(&spec, &BuildConfig::default()).unwrap().model;
    let collapsed_cfg =
        BuildConfig { model_statuses: false, model_stack: false, ..Default::default() };
    let collapsed = build_model(&spec, &collapsed_cfg).unwrap().model;
    assert!(
        full.ordinary_state_count() > collapsed.ordinary_state_count(),
        "states: {} vs {}",
        full.ordinary_state_count(),
        collapsed.ordinary_state_count()
    );
    assert!(
        full.transition_count() > collapsed.transition_count(),
        "transitions: {} vs {}",
        full.transition_count(),
        collapsed.transition_count()
    );
    pass("criterion 5 (status/stack sensitivity)", started, Duration::from_secs(30));
}

/// Every generated sequence replays feasibly and emits the labels claimed
/// for it; the two-label tomdroid target is fully covered in at most 15
/// events.
#[test]
fn criterion_6_targeted_soundness() {
    let started = Instant::now();
    let spec = fixture("tomdroid");
    let model = build_model(&spec, &BuildConfig::default()).unwrap().model;
    let target = delete_undelete_target(&spec);
    let suite = generate(&model, &spec, &target, DEFAULT_MAXTRY);

    assert!(suite.is_fully_covered(), "uncovered: {:?} / {:?}", suite.uncovered_transitions, suite.uncovered_labels);
    assert!(suite.total_events() <= 15, "suite too long: {} events", suite.total_events());

    for seq in &suite.sequences {
        let events = seq.concrete_events(&spec).unwrap();
        match replay(&spec, &events) {
            ReplayOutcome::Completed { trace } => {
                assert_eq!(trace.emitted_labels(), seq.emitted, "claimed labels must be emitted");
            }
            other => panic!("accepted sequence must replay: {other:?}"),
        }
    }
    let emitted: BTreeSet<LabelId> =
        suite.sequences.iter().flat_map(|s| s.emitted.iter().cloned()).collect();
    assert!(emitted.is_superset(target.labels()));
    pass("criterion 6 (targeted soundness)", started, Duration::from_secs(30));
}

/// For each of the five fixed seeds, random exploration needs at least ten
/// times the targeted suite length to cover the tomdroid target.
#[test]
fn criterion_7_targeted_vs_random_ordering() {
    let started = Instant::now();
    let spec = fixture("tomdroid");
    let target = delete_undelete_target(&spec);
    let model = build_model(&spec, &BuildConfig::default()).unwrap().model;
    let suite = generate(&model, &spec, &target, DEFAULT_MAXTRY);
    let suite_len = suite.total_events() as u64;
    assert!(suite_len > 0);

    for seed in DEFAULT_SEEDS {
        let cfg = RandomConfig { seed, ..Default::default() };
        let outcome = random_explore(&spec, &target, &cfg);
        let random_events = outcome
            .events_to_cover
            .unwrap_or_else(|| panic!("seed {seed}: random exploration must cover the target"));
        assert!(
            random_events >= 10 * suite_len,
            "seed {seed}: random {random_events} < 10 x targeted {suite_len}"
        );
    }
    pass("criterion 7 (targeted-vs-random ordering)", started, Duration::from_secs(120));
}

/// Re-running the artifact-producing criteria yields byte-identical JSON.
#[test]
fn criterion_8_determinism() {
    let started = Instant::now();
    let spec = fixture("tomdroid");

    // criterion 2 artifacts: built model and oracle model
    let build_json = |_: ()| {
        build_model(&spec, &BuildConfig::with_threshold(1.0)).unwrap().model.to_json()
    };
    assert_eq!(build_json(()), build_json(()));
    let oracle_json = |_: ()| brute_force_model(&spec, 64).unwrap().to_json();
    assert_eq!(oracle_json(()), oracle_json(()));

    // criterion 6 artifact: the targeted suite
    let target = delete_undelete_target(&spec);
    let suite_json = |_: ()| {
        let model = build_model(&spec, &BuildConfig::default()).unwrap().model;
        generate(&model, &spec, &target, DEFAULT_MAXTRY).to_json()
    };
    assert_eq!(suite_json(()), suite_json(()));

    // criterion 7 artifact: the comparison report
    let compare_json = |_: ()| {
        let (report, _) = compare(
            &spec,
            &target,
            &BuildConfig::default(),
            &RandomConfig::default(),
            &DEFAULT_SEEDS,
            DEFAULT_MAXTRY,
        )
        .unwrap();
        report.to_json()
    };
    assert_eq!(compare_json(()), compare_json(()));

    pass("criterion 8 (determinism)", started, Duration::from_secs(120));
}
