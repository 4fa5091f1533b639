//! Random-exploration baseline and the two desk studies: the
//! similarity-threshold sweep and the targeted-versus-random comparison.
//!
//! The random baseline picks uniformly among the *applicable* events of
//! the current observation rather than raw screen coordinates. That is a
//! fidelity caveat worth knowing about: the simulator has no pixel
//! surface, so a coordinate-tapping fuzzer cannot be reproduced exactly
//! and this baseline is a little stronger than one.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::app_spec::{AppSpec, LabelId};
use crate::builder::{build_model, BuildConfig, ConfigError};
use crate::exec;
use crate::runtime::RuntimeState;
use crate::target::{generate, Target, TargetedSuite};

/// Seeds used for golden comparisons unless overridden.
pub const DEFAULT_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

/// Configuration of one seeded random run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomConfig {
    pub seed: u64,
    /// Events per iteration; coverage is only checked at batch
    /// boundaries, so results are always batch multiples.
    pub batch: u64,
    /// Cap on iterations before giving up.
    pub max_batches: u64,
}

impl Default for RandomConfig {
    fn default() -> Self {
        RandomConfig { seed: 1, batch: 1000, max_batches: 100 }
    }
}

/// Label tally of a run, with model statistics when a model was involved.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub labels_covered: usize,
    pub labels_total: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states_visited: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transitions_visited: Option<usize>,
    pub events_fired: u64,
}

/// Result of a seeded random exploration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomOutcome {
    /// First batch boundary at which every target label had been emitted,
    /// rounded up to a whole batch; `None` when the cap ran out first.
    pub events_to_cover: Option<u64>,
    pub report: CoverageReport,
}

/// Fire uniformly random applicable events until the target is covered or
/// the batch cap runs out, restarting the app whenever it terminates.
/// Bit-reproducible for a fixed seed.
pub fn random_explore(spec: &Arc<AppSpec>, target: &Target, cfg: &RandomConfig) -> RandomOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = RuntimeState::start(Arc::clone(spec));
    let mut covered: BTreeSet<LabelId> = BTreeSet::new();
    let mut events_fired: u64 = 0;
    let mut events_to_cover = None;

    'batches: for batch_no in 1..=cfg.max_batches {
        for _ in 0..cfg.batch {
            if state.is_terminated() {
                state = RuntimeState::start(Arc::clone(spec));
            }
            let obs = state.observe().expect("live state");
            let pick = rng.gen_range(0..obs.applicable_events.len());
            let fired = state.fire(&obs.applicable_events[pick]).expect("applicable event fires");
            covered.extend(fired.emitted.intersection(target.labels()).cloned());
            state = fired.next;
            events_fired += 1;
        }
        if covered.is_superset(target.labels()) {
            events_to_cover = Some(batch_no * cfg.batch);
            break 'batches;
        }
    }

    RandomOutcome {
        events_to_cover,
        report: CoverageReport {
            labels_covered: covered.len(),
            labels_total: target.labels().len(),
            states_visited: None,
            transitions_visited: None,
            events_fired,
        },
    }
}

/// One row of the threshold sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: f64,
    /// Entry plus ordinary states.
    pub states: usize,
    pub transitions: usize,
    pub labels_covered: usize,
    pub labels_total: usize,
    pub wall_time_ms: u128,
    pub truncated: bool,
}

/// Build the model once per threshold and tabulate sizes and label
/// coverage. Builds are independent and run in parallel.
pub fn st_sweep(
    spec: &Arc<AppSpec>,
    thresholds: &[f64],
    base: &BuildConfig,
) -> Result<Vec<SweepRow>, ConfigError> {
    let rows = exec::map_ordered(thresholds.to_vec(), |threshold| {
        let cfg = BuildConfig { similarity_threshold: threshold, ..base.clone() };
        let report = build_model(spec, &cfg)?;
        let labels_total = report.model.label_universe().len();
        Ok(SweepRow {
            threshold,
            states: report.model.ordinary_state_count(),
            transitions: report.model.transition_count(),
            labels_covered: report.model.covered_labels().len(),
            labels_total,
            wall_time_ms: report.wall_time.as_millis(),
            truncated: report.truncated,
        })
    });
    rows.into_iter().collect()
}

/// Render sweep rows as an aligned text table.
pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    out.push_str("threshold  states  transitions  coverage  truncated  wall_ms\n");
    for r in rows {
        out.push_str(&format!(
            "{:<9}  {:<6}  {:<11}  {:>3}/{:<3}   {:<9}  {}\n",
            format!("{:.2}", r.threshold),
            r.states,
            r.transitions,
            r.labels_covered,
            r.labels_total,
            if r.truncated { "yes" } else { "no" },
            r.wall_time_ms,
        ));
    }
    out
}

/// Cost of the targeted route: events burned building the model and the
/// total length of the generated suite, the `build/length` pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetedCost {
    pub build_events: u64,
    pub suite_events: usize,
    pub fully_covered: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomCost {
    pub seed: u64,
    /// `None` when the cap ran out before coverage.
    pub events_to_cover: Option<u64>,
}

/// Targeted-versus-random cost report for one target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub app: String,
    pub target: BTreeSet<LabelId>,
    pub targeted: TargetedCost,
    pub random: Vec<RandomCost>,
}

impl ComparisonReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Aligned text table, one row per seed against the shared targeted
    /// pair.
    pub fn to_text_table(&self) -> String {
        let target = self
            .target
            .iter()
            .map(|l| l.as_str())
            .collect::<Vec<_>>()
            .join(",");
        let pair = format!("{}/{}", self.targeted.build_events, self.targeted.suite_events);
        let mut out = format!("app: {}  target: {target}\n", self.app);
        out.push_str("seed  random      targeted(build/len)\n");
        for r in &self.random {
            let random = match r.events_to_cover {
                Some(n) => n.to_string(),
                None => "not-covered".to_string(),
            };
            out.push_str(&format!("{:<4}  {:<10}  {pair}\n", r.seed, random));
        }
        out
    }
}

/// Build, generate the targeted suite, and race the random baseline over
/// the given seeds. Seeded runs are independent and execute in parallel.
pub fn compare(
    spec: &Arc<AppSpec>,
    target: &Target,
    build_cfg: &BuildConfig,
    random_cfg: &RandomConfig,
    seeds: &[u64],
    maxtry: u32,
) -> Result<(ComparisonReport, TargetedSuite), ConfigError> {
    let build = build_model(spec, build_cfg)?;
    let suite = generate(&build.model, spec, target, maxtry);

    let random = exec::map_ordered(seeds.to_vec(), |seed| {
        let cfg = RandomConfig { seed, ..random_cfg.clone() };
        let outcome = random_explore(spec, target, &cfg);
        RandomCost { seed, events_to_cover: outcome.events_to_cover }
    });

    Ok((
        ComparisonReport {
            app: spec.name.clone(),
            target: target.labels().clone(),
            targeted: TargetedCost {
                build_events: build.events_fired,
                suite_events: suite.total_events(),
                fully_covered: suite.is_fully_covered(),
            },
            random,
        },
        suite,
    ))
}
