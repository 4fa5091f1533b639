//! Model construction.
//!
//! [`build_model`] is the breadth-first exploration loop: it repeatedly
//! drives the app back to a frontier state by replaying that state's
//! access sequence from a fresh start, fires one unvisited event, and
//! either identifies the outcome with a known state, merges it into a
//! sufficiently similar one, or adds it to the model and the queue.
//!
//! [`brute_force_model`] is the independent reference: a plain BFS that
//! carries live runtime states instead of replaying, never merges, and
//! identifies states by exact (activity, views, stack) equality. A build
//! at similarity threshold 1.0 must be isomorphic to it.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::app_spec::{ActivityId, AppSpec, ConcreteEvent, Position, StatusMap, ViewId, ViewType};
use crate::exec;
use crate::model::{LatteModel, ModelState, StateId, StateKind, Transition};
use crate::runtime::{Observation, RuntimeState};

/// Order in which candidate events of a state are visited: views sorted by
/// (position, view id), each view's events in canonical kind order, global
/// events last. This is the only order the engine offers; it is what makes
/// builds reproducible.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum EventOrder {
    #[default]
    Canonical,
}

/// Knobs for one model construction run.
#[derive(Debug, Clone)]
pub struct BuildConfig {
    /// Weight of view similarity against stack similarity.
    pub omega: f64,
    /// Merge threshold; a newcomer merges into the most similar state only
    /// when similarity is strictly greater than this. 1.0 disables merging
    /// entirely, 0.0 merges any positive-similarity pair.
    pub similarity_threshold: f64,
    /// Budget on fired events, replay prefixes included. `None` is
    /// unlimited.
    pub max_events: Option<u64>,
    /// Wall-clock bound on the exploration loop.
    pub max_wall_time: Option<Duration>,
    pub event_order: EventOrder,
    /// When false, view statuses are ignored for state identity and
    /// similarity (views compare by id, type and position only).
    pub model_statuses: bool,
    /// When false, the back stack is ignored for state identity and stack
    /// similarity is constantly 1.
    pub model_stack: bool,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            omega: 0.5,
            similarity_threshold: 0.8,
            max_events: None,
            max_wall_time: Some(Duration::from_secs(3 * 3600)),
            event_order: EventOrder::Canonical,
            model_statuses: true,
            model_stack: true,
        }
    }
}

impl BuildConfig {
    pub fn with_threshold(threshold: f64) -> Self {
        BuildConfig { similarity_threshold: threshold, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.omega) {
            return Err(ConfigError::OmegaOutOfRange(self.omega));
        }
        if !(0.0..=1.0).contains(&self.similarity_threshold) {
            return Err(ConfigError::ThresholdOutOfRange(self.similarity_threshold));
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("omega must lie in [0, 1], got {0}")]
    OmegaOutOfRange(f64),
    #[error("similarity threshold must lie in [0, 1], got {0}")]
    ThresholdOutOfRange(f64),
}

/// What a construction run produced and what it cost.
#[derive(Debug, Clone)]
pub struct BuildReport {
    pub model: LatteModel,
    pub events_fired: u64,
    pub states_merged: u64,
    pub wall_time: Duration,
    /// True when the event budget or the time bound cut the loop short.
    pub truncated: bool,
}

impl Serialize for BuildReport {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Doc<'a> {
            model: &'a LatteModel,
            events_fired: u64,
            states_merged: u64,
            wall_time_ms: u128,
            truncated: bool,
        }
        Doc {
            model: &self.model,
            events_fired: self.events_fired,
            states_merged: self.states_merged,
            wall_time_ms: self.wall_time.as_millis(),
            truncated: self.truncated,
        }
        .serialize(serializer)
    }
}

/// State identity under the configured abstraction: the full triple by
/// default, with statuses or the stack dropped when the corresponding
/// modeling switch is off.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct AbstractionKey {
    activity: ActivityId,
    views: Vec<(ViewId, ViewType, Position, Option<StatusMap>)>,
    stack: Option<Vec<ActivityId>>,
}

fn abstraction_key(obs: &Observation, cfg: &BuildConfig) -> AbstractionKey {
    AbstractionKey {
        activity: obs.activity.clone(),
        views: obs
            .views
            .iter()
            .map(|v| {
                let status = cfg.model_statuses.then(|| v.status.clone());
                (v.view.clone(), v.view_type, v.position, status)
            })
            .collect(),
        stack: cfg.model_stack.then(|| obs.stack.clone()),
    }
}

/// Build the model by breadth-first exploration with similarity merging.
///
/// The queue starts with the entry state. Each iteration replays the front
/// state's access sequence from a fresh start, fires its next unvisited
/// event and records the labelled transition. A result whose abstraction
/// key is already known is that state; otherwise the most similar
/// same-activity state is merged into when similarity exceeds the
/// threshold, and a fresh state is appended to the queue when it does not.
/// States are dequeued once all their events are visited. Termination
/// lands in the terminal state.
pub fn build_model(spec: &Arc<AppSpec>, cfg: &BuildConfig) -> Result<BuildReport, ConfigError> {
    cfg.validate()?;
    let started = Instant::now();

    let root = RuntimeState::start(Arc::clone(spec));
    let entry_obs = root.observe().expect("a freshly started app is observable");
    let mut model = LatteModel::new(&entry_obs, spec.label_universe());

    let mut key_index: BTreeMap<AbstractionKey, StateId> = BTreeMap::new();
    key_index.insert(abstraction_key(&entry_obs, cfg), model.s0());

    let mut events_of: BTreeMap<StateId, Vec<ConcreteEvent>> = BTreeMap::new();
    events_of.insert(model.s0(), entry_obs.applicable_events.clone());
    let mut next_event: BTreeMap<StateId, usize> = BTreeMap::new();

    let mut queue: VecDeque<StateId> = VecDeque::from([model.s0()]);
    let mut events_fired: u64 = 0;
    let mut states_merged: u64 = 0;
    let mut truncated = false;

    let over_budget = |events_fired: u64, started: &Instant| {
        cfg.max_events.map_or(false, |m| events_fired >= m)
            || cfg.max_wall_time.map_or(false, |t| started.elapsed() >= t)
    };

    while let Some(&sh) = queue.front() {
        if over_budget(events_fired, &started) {
            truncated = true;
            break;
        }
        let idx = *next_event.entry(sh).or_insert(0);
        let events = &events_of[&sh];
        if idx >= events.len() {
            queue.pop_front();
            continue;
        }
        let event = events[idx].clone();
        next_event.insert(sh, idx + 1);

        // Drive the app to s_h: fresh start, then its access sequence.
        // The runtime is deterministic, so a recorded sequence can only
        // become inapplicable through an engine bug.
        let access = model.state(sh).expect("queued states exist").access_seq.clone();
        let mut rt = RuntimeState::start(Arc::clone(spec));
        for e in &access {
            rt = rt
                .fire(e)
                .expect("recorded access sequences replay on a deterministic runtime")
                .next;
            events_fired += 1;
        }
        let fired = rt
            .fire(&event)
            .expect("events enumerated from a state's observation stay applicable");
        events_fired += 1;
        let labels = fired.emitted;

        if fired.next.is_terminated() {
            model.insert_transition(Transition { src: sh, event, labels, dest: model.q() });
            continue;
        }

        let obs = fired.next.observe().expect("non-terminated state is observable");
        let key = abstraction_key(&obs, cfg);
        if let Some(&existing) = key_index.get(&key) {
            model.insert_transition(Transition { src: sh, event, labels, dest: existing });
            continue;
        }

        let mut access_seq = access;
        access_seq.push(event.clone());
        let candidate =
            ModelState::from_observation(model.next_id(), StateKind::Ordinary, &obs, access_seq);

        match model.find_most_similar_opts(
            &candidate,
            cfg.omega,
            cfg.model_statuses,
            cfg.model_stack,
        ) {
            Some((sm, sim)) if sim > cfg.similarity_threshold => {
                states_merged += 1;
                model.merge_into(
                    sm,
                    candidate,
                    Transition { src: sh, event, labels, dest: sm },
                );
            }
            _ => {
                let id = candidate.id;
                key_index.insert(key, id);
                events_of.insert(id, obs.applicable_events.clone());
                next_event.insert(id, 0);
                model.insert_state(candidate);
                model.insert_transition(Transition { src: sh, event, labels, dest: id });
                queue.push_back(id);
            }
        }
    }

    debug_assert!(model.integrity_issues().is_empty(), "{:?}", model.integrity_issues());
    Ok(BuildReport {
        model,
        events_fired,
        states_merged,
        wall_time: started.elapsed(),
        truncated,
    })
}

/// Hard ceiling on oracle state count; exceeding it is an error rather
/// than an endless enumeration.
pub const BRUTE_FORCE_STATE_CAP: usize = 4096;

#[derive(Debug, Error, PartialEq)]
pub enum BruteForceError {
    #[error("exhaustive exploration exceeded {cap} states")]
    StateCapExceeded { cap: usize },
}

/// Exhaustive BFS over exact runtime states with no similarity merging.
///
/// The frontier carries live runtime states, so no replay is involved.
/// Model states are keyed by exact (activity, views, stack) equality and
/// each is expanded once, from the runtime state that first reached it.
/// `depth_bound` limits the BFS depth; states discovered at the bound are
/// not expanded. This is the canonical reference for threshold-1.0 builds.
pub fn brute_force_model(
    spec: &Arc<AppSpec>,
    depth_bound: usize,
) -> Result<LatteModel, BruteForceError> {
    let full_cfg = BuildConfig::default();

    let root = RuntimeState::start(Arc::clone(spec));
    let entry_obs = root.observe().expect("a freshly started app is observable");
    let mut model = LatteModel::new(&entry_obs, spec.label_universe());

    let mut key_index: BTreeMap<AbstractionKey, StateId> = BTreeMap::new();
    key_index.insert(abstraction_key(&entry_obs, &full_cfg), model.s0());

    let mut frontier: Vec<(StateId, RuntimeState)> = vec![(model.s0(), root)];

    for _depth in 0..depth_bound {
        if frontier.is_empty() {
            break;
        }
        // Expansion of one BFS level is pure per node and runs in
        // parallel; discoveries are merged sequentially in input order so
        // ids come out the same as a sequential run.
        let expanded = exec::map_ordered(frontier, |(src, rt)| {
            let obs = rt.observe().expect("frontier states are live");
            let results: Vec<_> = obs
                .applicable_events
                .iter()
                .map(|event| {
                    let fired = rt.fire(event).expect("applicable events fire");
                    let dest = if fired.next.is_terminated() {
                        None
                    } else {
                        let obs = fired.next.observe().expect("live state");
                        Some((obs, fired.next))
                    };
                    (event.clone(), fired.emitted, dest)
                })
                .collect();
            (src, results)
        });

        let mut next_frontier = Vec::new();
        for (src, results) in expanded {
            for (event, labels, dest) in results {
                let dest_id = match dest {
                    None => model.q(),
                    Some((obs, rt)) => {
                        let key = abstraction_key(&obs, &full_cfg);
                        match key_index.get(&key) {
                            Some(&id) => id,
                            None => {
                                if model.ordinary_state_count() >= BRUTE_FORCE_STATE_CAP {
                                    return Err(BruteForceError::StateCapExceeded {
                                        cap: BRUTE_FORCE_STATE_CAP,
                                    });
                                }
                                let id = model.next_id();
                                let mut access_seq =
                                    model.state(src).expect("src exists").access_seq.clone();
                                access_seq.push(event.clone());
                                model.insert_state(ModelState::from_observation(
                                    id,
                                    StateKind::Ordinary,
                                    &obs,
                                    access_seq,
                                ));
                                key_index.insert(key, id);
                                next_frontier.push((id, rt));
                                id
                            }
                        }
                    }
                };
                model.insert_transition(Transition { src, event, labels, dest: dest_id });
            }
        }
        frontier = next_frontier;
    }

    debug_assert!(model.integrity_issues().is_empty());
    Ok(model)
}

/// Check that two models are the same graph up to state renaming: a
/// bijection on states preserving (activity, views, stack) under which the
/// transition sets are equal. Returns a description of the first mismatch.
pub fn check_isomorphic(a: &LatteModel, b: &LatteModel) -> Result<(), String> {
    type Triple = (Option<ActivityId>, Vec<crate::runtime::ObservedView>, Vec<ActivityId>);
    let triples = |m: &LatteModel| -> BTreeMap<Triple, StateId> {
        m.states()
            .map(|s| ((s.activity.clone(), s.views.clone(), s.stack.clone()), s.id))
            .collect()
    };
    let ta = triples(a);
    let tb = triples(b);
    if a.states().count() != ta.len() || b.states().count() != tb.len() {
        return Err("duplicate (activity, views, stack) triples prevent a bijection".into());
    }
    if ta.len() != tb.len() {
        return Err(format!("state counts differ: {} vs {}", ta.len(), tb.len()));
    }
    let mut map: BTreeMap<StateId, StateId> = BTreeMap::new();
    for (triple, id_a) in &ta {
        match tb.get(triple) {
            Some(id_b) => {
                map.insert(*id_a, *id_b);
            }
            None => {
                return Err(format!("state {id_a} has no counterpart with the same triple"));
            }
        }
    }
    if map.get(&a.s0()) != Some(&b.s0()) {
        return Err("entry states do not correspond".into());
    }
    if map.get(&a.q()) != Some(&b.q()) {
        return Err("terminal states do not correspond".into());
    }
    let mapped: BTreeSet<Transition> = a
        .transitions()
        .map(|t| Transition {
            src: map[&t.src],
            event: t.event.clone(),
            labels: t.labels.clone(),
            dest: map[&t.dest],
        })
        .collect();
    let theirs: BTreeSet<Transition> = b.transitions().cloned().collect();
    if mapped != theirs {
        let missing: Vec<_> = theirs.difference(&mapped).take(3).collect();
        let extra: Vec<_> = mapped.difference(&theirs).take(3).collect();
        return Err(format!(
            "transition sets differ under the bijection; missing {missing:?}, extra {extra:?}"
        ));
    }
    Ok(())
}
