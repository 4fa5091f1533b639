//! Compares the rayon-backed data-parallel inner loops against their
//! sequential fallbacks on the bundled fixtures: oracle frontier
//! expansion, the threshold sweep, and seeded baseline runs.
//!
//! Run with `cargo bench -p latte-core`. Building with
//! `--no-default-features` removes rayon entirely, in which case the
//! "parallel" variants here degrade to the sequential path.

use std::path::PathBuf;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use latte_core::bench::{random_explore, RandomConfig};
use latte_core::builder::{build_model, BuildConfig};
use latte_core::exec::{map_ordered, map_ordered_seq};
use latte_core::target::Target;
use latte_core::{parse_app_spec, AppSpec, LabelId, RuntimeState};

fn fixture(name: &str) -> Arc<AppSpec> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name);
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("fixture {} unreadable: {e}", path.display()));
    Arc::new(parse_app_spec(&text).expect("fixture parses"))
}

/// One unit of frontier work: observe a state and fire every applicable
/// event, as oracle expansion does per node.
fn expand(state: &RuntimeState) -> usize {
    let obs = state.observe().expect("live state");
    obs.applicable_events
        .iter()
        .map(|e| state.fire(e).expect("applicable").emitted.len())
        .sum()
}

fn bench_frontier_expand(c: &mut Criterion) {
    let spec = fixture("tippytipper.json");
    let model = build_model(&spec, &BuildConfig::with_threshold(1.0)).unwrap().model;
    // every reachable state, reconstructed from its access sequence, then
    // replicated so the frontier is large enough to matter
    let base: Vec<RuntimeState> = model
        .non_terminal_states()
        .map(|s| latte_core::replay_to_state(&spec, &s.access_seq).expect("replayable"))
        .collect();
    let frontier: Vec<RuntimeState> =
        base.iter().cycle().take(base.len() * 64).cloned().collect();

    let mut group = c.benchmark_group("frontier_expand");
    group.sample_size(20);
    group.bench_with_input(BenchmarkId::new("parallel", frontier.len()), &frontier, |b, f| {
        b.iter(|| map_ordered(f.clone(), |s| expand(&s)))
    });
    group.bench_with_input(BenchmarkId::new("sequential", frontier.len()), &frontier, |b, f| {
        b.iter(|| map_ordered_seq(f.clone(), |s| expand(&s)))
    });
    group.finish();
}

fn bench_threshold_sweep(c: &mut Criterion) {
    let spec = fixture("tomdroid.json");
    let thresholds = vec![0.0, 0.25, 0.5, 0.8, 1.0];
    let build = |t: f64| {
        build_model(&spec, &BuildConfig::with_threshold(t)).unwrap().model.transition_count()
    };

    let mut group = c.benchmark_group("threshold_sweep");
    group.sample_size(20);
    group.bench_function("parallel", |b| b.iter(|| map_ordered(thresholds.clone(), build)));
    group.bench_function("sequential", |b| b.iter(|| map_ordered_seq(thresholds.clone(), build)));
    group.finish();
}

fn bench_random_seeds(c: &mut Criterion) {
    let spec = fixture("tomdroid.json");
    let target = Target::new(
        [LabelId::new("deleteNote"), LabelId::new("undeleteNote")],
        &spec.label_universe(),
    )
    .unwrap();
    let seeds: Vec<u64> = (1..=8).collect();
    let run = |seed: u64| {
        let cfg = RandomConfig { seed, batch: 500, max_batches: 4 };
        random_explore(&spec, &target, &cfg).report.events_fired
    };

    let mut group = c.benchmark_group("random_seeds");
    group.sample_size(10);
    group.bench_function("parallel", |b| b.iter(|| map_ordered(seeds.clone(), run)));
    group.bench_function("sequential", |b| b.iter(|| map_ordered_seq(seeds.clone(), run)));
    group.finish();
}

criterion_group!(benches, bench_frontier_expand, bench_threshold_sweep, bench_random_seeds);
criterion_main!(benches);
