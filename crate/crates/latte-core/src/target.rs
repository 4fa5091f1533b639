//! Target-directed event-sequence generation over a built model.
//!
//! A target is a set of labels. Generation collects the transitions
//! carrying target labels, searches the model for a path covering each,
//! and validates every candidate by actually replaying it on the runtime.
//! Merged models are approximate, so a model path can diverge when
//! executed; failed candidates are excluded and the search retried, up to
//! a per-transition attempt cap.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::app_spec::{
    ActivityId, AppSpec, ConcreteEvent, EventKind, EventSequence, EventSource, LabelId, ViewId,
};
use crate::model::{LatteModel, StateId, Transition};
use crate::runtime::{replay, ReplayOutcome};

/// Attempt cap per labelled transition in the adaptive loop.
pub const DEFAULT_MAXTRY: u32 = 5;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TargetError {
    #[error("unknown label `{0}`: not in the model's label universe")]
    UnknownLabel(LabelId),
    #[error("a target needs at least one label")]
    Empty,
    #[error("event `{0}` does not name a palette entry of this app")]
    UnknownPayload(String),
    #[error("malformed suite event: {0}")]
    MalformedEvent(String),
}

/// A non-empty set of labels the generated suite must cover.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Target {
    labels: BTreeSet<LabelId>,
}

impl Target {
    pub fn new(
        labels: impl IntoIterator<Item = LabelId>,
        universe: &BTreeSet<LabelId>,
    ) -> Result<Target, TargetError> {
        let labels: BTreeSet<LabelId> = labels.into_iter().collect();
        if labels.is_empty() {
            return Err(TargetError::Empty);
        }
        for label in &labels {
            if !universe.contains(label) {
                return Err(TargetError::UnknownLabel(label.clone()));
            }
        }
        Ok(Target { labels })
    }

    pub fn labels(&self) -> &BTreeSet<LabelId> {
        &self.labels
    }
}

/// Transitions whose label set intersects the target (LT).
pub fn labelled_transitions(model: &LatteModel, target: &Target) -> BTreeSet<Transition> {
    model
        .transitions()
        .filter(|t| !t.labels.is_disjoint(&target.labels))
        .cloned()
        .collect()
}

/// For every state, the target labels reachable from it along any path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReachSummary {
    per_state: BTreeMap<StateId, BTreeSet<LabelId>>,
}

impl ReachSummary {
    pub fn reachable_from(&self, state: StateId) -> &BTreeSet<LabelId> {
        static EMPTY: BTreeSet<LabelId> = BTreeSet::new();
        self.per_state.get(&state).unwrap_or(&EMPTY)
    }
}

/// Backward fixpoint of label propagation: a state can reach whatever its
/// outgoing edges carry plus whatever their destinations can reach.
pub fn reach_summary(model: &LatteModel, target: &Target) -> ReachSummary {
    let mut per_state: BTreeMap<StateId, BTreeSet<LabelId>> =
        model.states().map(|s| (s.id, BTreeSet::new())).collect();
    loop {
        let mut changed = false;
        for t in model.transitions() {
            let mut add: BTreeSet<LabelId> =
                t.labels.intersection(&target.labels).cloned().collect();
            add.extend(per_state[&t.dest].iter().cloned());
            let entry = per_state.get_mut(&t.src).expect("all states present");
            let before = entry.len();
            entry.extend(add);
            changed |= entry.len() != before;
        }
        if !changed {
            return ReachSummary { per_state };
        }
    }
}

fn adjacency(model: &LatteModel) -> BTreeMap<StateId, Vec<&Transition>> {
    let mut adj: BTreeMap<StateId, Vec<&Transition>> = BTreeMap::new();
    for t in model.transitions() {
        adj.entry(t.src).or_default().push(t);
    }
    adj
}

/// States from which `goal` is reachable, `goal` included.
fn states_reaching(model: &LatteModel, goal: StateId) -> BTreeSet<StateId> {
    let mut reverse: BTreeMap<StateId, Vec<StateId>> = BTreeMap::new();
    for t in model.transitions() {
        reverse.entry(t.dest).or_default().push(t.src);
    }
    let mut seen = BTreeSet::from([goal]);
    let mut stack = vec![goal];
    while let Some(s) = stack.pop() {
        for &p in reverse.get(&s).into_iter().flatten() {
            if seen.insert(p) {
                stack.push(p);
            }
        }
    }
    seen
}

struct PathSearch<'a> {
    adj: &'a BTreeMap<StateId, Vec<&'a Transition>>,
    can_reach_goal: &'a BTreeSet<StateId>,
    summary: &'a ReachSummary,
    uncovered: &'a BTreeSet<LabelId>,
    goal: StateId,
    goal_event: &'a ConcreteEvent,
    exclude: &'a BTreeSet<EventSequence>,
    bound: usize,
}

impl PathSearch<'_> {
    /// Depth-first search for the first simple path from `state` to the
    /// goal, in heuristic order, whose full sequence is not excluded. The
    /// final covering event is appended to the path, so it alone may
    /// revisit a state (toggling back, for example).
    fn dfs(
        &self,
        state: StateId,
        path: &mut EventSequence,
        on_path: &mut BTreeSet<StateId>,
    ) -> Option<EventSequence> {
        if state == self.goal {
            let mut candidate = path.clone();
            candidate.push(self.goal_event.clone());
            if !self.exclude.contains(&candidate) {
                return Some(candidate);
            }
            // an alternative must differ in the path to the goal; with
            // simple paths there is nothing more to find below this node
            return None;
        }
        if path.len() >= self.bound {
            return None;
        }

        // Restricting successors to states that still reach the goal also
        // keeps the search out of states with an empty reach summary: any
        // state reaching the goal can reach the goal transition's labels.
        let mut successors: Vec<&Transition> = self
            .adj
            .get(&state)
            .into_iter()
            .flatten()
            .filter(|t| self.can_reach_goal.contains(&t.dest) && !on_path.contains(&t.dest))
            .copied()
            .collect();
        successors.sort_by(|a, b| {
            let gain = |t: &Transition| {
                let mut reach: BTreeSet<&LabelId> = t
                    .labels
                    .iter()
                    .filter(|l| self.uncovered.contains(*l))
                    .collect();
                reach.extend(
                    self.summary
                        .reachable_from(t.dest)
                        .iter()
                        .filter(|l| self.uncovered.contains(*l)),
                );
                reach.len()
            };
            gain(b)
                .cmp(&gain(a))
                .then(b.labels.len().cmp(&a.labels.len()))
                .then(a.cmp(b))
        });

        for t in successors {
            path.push(t.event.clone());
            on_path.insert(t.dest);
            if let Some(found) = self.dfs(t.dest, path, on_path) {
                return Some(found);
            }
            on_path.remove(&t.dest);
            path.pop();
        }
        None
    }
}

/// Find an event sequence covering `lt`: a path from the entry state to
/// `lt.src` extended by `lt`'s own event. Successors are tried in order of
/// how many still-uncovered target labels they lead to, then by edge label
/// richness, then by transition order. Returns `None` when every candidate
/// within the length bound is excluded or no path exists.
pub fn find_covering_sequence(
    model: &LatteModel,
    lt: &Transition,
    exclude: &BTreeSet<EventSequence>,
    summary: &ReachSummary,
    covered: &BTreeSet<LabelId>,
    target: &Target,
) -> Option<EventSequence> {
    let adj = adjacency(model);
    let can_reach_goal = states_reaching(model, lt.src);
    if !can_reach_goal.contains(&model.s0()) {
        return None;
    }
    let uncovered: BTreeSet<LabelId> =
        target.labels.difference(covered).cloned().collect();
    let search = PathSearch {
        adj: &adj,
        can_reach_goal: &can_reach_goal,
        summary,
        uncovered: &uncovered,
        goal: lt.src,
        goal_event: &lt.event,
        exclude,
        bound: 4 * model.states().count(),
    };
    let mut path = Vec::new();
    let mut on_path = BTreeSet::from([model.s0()]);
    search.dfs(model.s0(), &mut path, &mut on_path)
}

/// One suite event as written to disk: the activity it fired on, the view
/// (absent for global events), the event name, and its payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteEvent {
    pub activity: ActivityId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub view: Option<ViewId>,
    pub event: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<serde_json::Value>,
}

impl SuiteEvent {
    pub fn from_concrete(event: &ConcreteEvent, activity: &ActivityId, palette: &[String]) -> SuiteEvent {
        let view = match &event.source {
            EventSource::View(v) => Some(v.clone()),
            EventSource::Global => None,
        };
        let (name, payload) = match &event.kind {
            EventKind::TypeText(i) => (
                "TypeText",
                Some(serde_json::Value::String(
                    palette.get(*i as usize).cloned().unwrap_or_default(),
                )),
            ),
            EventKind::SetValue(v) => ("SetValue", Some(serde_json::Value::from(*v))),
            EventKind::Click => ("Click", None),
            EventKind::LongClick => ("LongClick", None),
            EventKind::Press => ("Press", None),
            EventKind::Scroll => ("Scroll", None),
            EventKind::ClearText => ("ClearText", None),
            EventKind::Back => ("Back", None),
            EventKind::Rotate => ("Rotate", None),
        };
        SuiteEvent { activity: activity.clone(), view, event: name.to_string(), payload }
    }

    /// Resolve back to a concrete event; the inverse of `from_concrete`
    /// for the same app.
    pub fn to_concrete(&self, spec: &AppSpec) -> Result<ConcreteEvent, TargetError> {
        let kind = match self.event.as_str() {
            "Click" => EventKind::Click,
            "LongClick" => EventKind::LongClick,
            "Press" => EventKind::Press,
            "Scroll" => EventKind::Scroll,
            "ClearText" => EventKind::ClearText,
            "Back" => EventKind::Back,
            "Rotate" => EventKind::Rotate,
            "TypeText" => {
                let text = self
                    .payload
                    .as_ref()
                    .and_then(|p| p.as_str())
                    .ok_or_else(|| TargetError::MalformedEvent("TypeText needs a text payload".into()))?;
                let index = spec
                    .text_palette
                    .iter()
                    .position(|s| s == text)
                    .ok_or_else(|| TargetError::UnknownPayload(text.to_string()))?;
                EventKind::TypeText(index as u32)
            }
            "SetValue" => {
                let value = self
                    .payload
                    .as_ref()
                    .and_then(|p| p.as_i64())
                    .ok_or_else(|| TargetError::MalformedEvent("SetValue needs an integer payload".into()))?;
                EventKind::SetValue(value)
            }
            other => return Err(TargetError::MalformedEvent(format!("unknown event `{other}`"))),
        };
        let source = match &self.view {
            Some(v) => EventSource::View(v.clone()),
            None => EventSource::Global,
        };
        Ok(ConcreteEvent { source, kind })
    }
}

/// An accepted sequence with the model transitions it walks and the labels
/// its validation replay emitted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoveredSequence {
    pub events: Vec<SuiteEvent>,
    pub covered_transitions: BTreeSet<Transition>,
    pub emitted: BTreeSet<LabelId>,
}

impl CoveredSequence {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn concrete_events(&self, spec: &AppSpec) -> Result<EventSequence, TargetError> {
        self.events.iter().map(|e| e.to_concrete(spec)).collect()
    }
}

/// The targeted event-sequence set plus what could not be covered.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetedSuite {
    pub target: BTreeSet<LabelId>,
    pub sequences: Vec<CoveredSequence>,
    /// Labelled transitions never covered within the attempt cap.
    pub uncovered_transitions: BTreeSet<Transition>,
    /// Target labels no accepted sequence emitted, including labels the
    /// model has no transition for.
    pub uncovered_labels: BTreeSet<LabelId>,
    pub total_tries: u64,
    pub rejected: u64,
}

impl TargetedSuite {
    pub fn total_events(&self) -> usize {
        self.sequences.iter().map(CoveredSequence::len).sum()
    }

    pub fn is_fully_covered(&self) -> bool {
        self.uncovered_transitions.is_empty() && self.uncovered_labels.is_empty()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("suite serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<TargetedSuite, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// The model transitions a sequence walks, following the model's
/// event-deterministic successor function from the entry state.
fn walk_transitions(model: &LatteModel, events: &[ConcreteEvent]) -> BTreeSet<Transition> {
    let index: BTreeMap<(StateId, &ConcreteEvent), &Transition> =
        model.transitions().map(|t| ((t.src, &t.event), t)).collect();
    let mut covered = BTreeSet::new();
    let mut state = model.s0();
    for event in events {
        match index.get(&(state, event)) {
            Some(t) => {
                covered.insert((*t).clone());
                state = t.dest;
            }
            None => break,
        }
    }
    covered
}

/// Generate a targeted suite: for each labelled transition, up to `maxtry`
/// candidate sequences are searched and validated by replay. A candidate
/// is accepted only when it replays to completion and its final step emits
/// exactly the transition's labels; sequences accepted earlier are reused
/// when their walk already covers a later transition. Deterministic for
/// fixed inputs.
pub fn generate(
    model: &LatteModel,
    spec: &Arc<AppSpec>,
    target: &Target,
    maxtry: u32,
) -> TargetedSuite {
    let lt = labelled_transitions(model, target);
    let summary = reach_summary(model, target);

    let mut suite = TargetedSuite {
        target: target.labels.clone(),
        sequences: Vec::new(),
        uncovered_transitions: BTreeSet::new(),
        uncovered_labels: BTreeSet::new(),
        total_tries: 0,
        rejected: 0,
    };
    let mut tes: BTreeSet<EventSequence> = BTreeSet::new();
    let mut covered_transitions: BTreeSet<Transition> = BTreeSet::new();
    let mut covered_labels: BTreeSet<LabelId> = BTreeSet::new();

    for lt_edge in &lt {
        if covered_transitions.contains(lt_edge) {
            continue;
        }
        let mut exclude = tes.clone();
        let mut accepted = false;
        let mut tries = 0;
        while tries < maxtry {
            tries += 1;
            suite.total_tries += 1;
            let Some(candidate) =
                find_covering_sequence(model, lt_edge, &exclude, &summary, &covered_labels, target)
            else {
                break;
            };
            match replay(spec, &candidate) {
                ReplayOutcome::Completed { trace }
                    if trace.steps.last().map(|s| s.emitted == lt_edge.labels).unwrap_or(false) =>
                {
                    let walk = walk_transitions(model, &candidate);
                    covered_transitions.extend(walk.iter().cloned());
                    let emitted = trace.emitted_labels();
                    covered_labels
                        .extend(emitted.intersection(&target.labels).cloned());
                    let events = trace
                        .steps
                        .iter()
                        .map(|s| {
                            SuiteEvent::from_concrete(
                                &s.event,
                                &s.observation.activity,
                                &spec.text_palette,
                            )
                        })
                        .collect();
                    tes.insert(candidate);
                    suite.sequences.push(CoveredSequence {
                        events,
                        covered_transitions: walk,
                        emitted,
                    });
                    accepted = true;
                    break;
                }
                _ => {
                    suite.rejected += 1;
                    exclude.insert(candidate);
                }
            }
        }
        if !accepted {
            suite.uncovered_transitions.insert(lt_edge.clone());
        }
    }

    suite.uncovered_labels =
        target.labels.difference(&covered_labels).cloned().collect();
    suite
}
