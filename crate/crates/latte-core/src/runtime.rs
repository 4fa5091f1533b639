//! Deterministic execution of an [`AppSpec`].
//!
//! The runtime plays the role of an instrumented device: it fires events,
//! applies handler effects, keeps per-instance view statuses and the back
//! stack, and reports emitted labels. It has no randomness and no hidden
//! inputs, so replaying the same event sequence always produces the same
//! trace. That reproducibility is what model construction leans on when it
//! drives the app back to a previously seen state.
//!
//! Semantics worth spelling out:
//!
//! * Events with no matching handler are no-ops, as real widgets ignore
//!   events nobody listens for. Handlers are the only way statuses change;
//!   there is no implicit checkbox toggle or text entry.
//! * Back always pops the stack first. A matching global Back handler then
//!   runs its effects against whatever holds focus after the pop, which is
//!   how an app propagates the outcome of a settings screen back to its
//!   parent. Guards are evaluated before the pop, on the activity being
//!   dismissed.
//! * Effects run in order against the instance focused at that moment, so
//!   a `SetStatus` after a `StartActivity` initializes the new screen.
//! * Rotate is an identity event: it may emit labels through a global
//!   handler but never changes the observation.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::app_spec::{
    events_for_view, ActivityId, AppSpec, ConcreteEvent, Effect, EventHandler, EventKind,
    EventSource, LabelId, Position, Predicate, StatusKey, StatusMap, StatusValue, ViewId, ViewType,
};
use crate::back_stack::{ActivityInstanceRef, BackStack};

type InstanceStatuses = BTreeMap<ViewId, StatusMap>;

/// Live simulator state: the back stack plus per-instance view statuses.
#[derive(Debug, Clone)]
pub struct RuntimeState {
    spec: Arc<AppSpec>,
    stack: BackStack,
    statuses: BTreeMap<ActivityInstanceRef, InstanceStatuses>,
    next_serial: BTreeMap<ActivityId, u32>,
    terminated: bool,
}

impl PartialEq for RuntimeState {
    fn eq(&self, other: &Self) -> bool {
        self.stack == other.stack
            && self.statuses == other.statuses
            && self.next_serial == other.next_serial
            && self.terminated == other.terminated
    }
}

impl Eq for RuntimeState {}

/// One view as the tester sees it: identity, layout and current status.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObservedView {
    pub view: ViewId,
    pub view_type: ViewType,
    pub position: Position,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub status: StatusMap,
}

/// Projection of a runtime state: the focused activity, its visible views,
/// the stack snapshot, and every event that may be fired right now.
///
/// Views whose `enabled` status is false still show up in `views` but
/// contribute no events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub activity: ActivityId,
    /// Visible views, sorted by view id.
    pub views: Vec<ObservedView>,
    /// Activity ids bottom-to-top.
    pub stack: Vec<ActivityId>,
    /// Deterministic order: views by (position, id) with their events in
    /// canonical kind order, then global events last.
    pub applicable_events: Vec<ConcreteEvent>,
}

/// Outcome of firing one event.
#[derive(Debug, Clone)]
pub struct FireResult {
    pub next: RuntimeState,
    pub emitted: BTreeSet<LabelId>,
    pub started_new_activity: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RuntimeError {
    #[error("the app has terminated; no observation is available")]
    Terminated,
    #[error("event `{event}` is not applicable in the current state")]
    Inapplicable { event: ConcreteEvent },
    #[error("{count} handlers match event `{event}`; handler guards must be disjoint")]
    AmbiguousHandlers { event: ConcreteEvent, count: usize },
}

impl RuntimeState {
    /// Launch the app: push the entry activity with its declared initial
    /// statuses.
    pub fn start(spec: Arc<AppSpec>) -> RuntimeState {
        let entry = spec.entry_activity.clone();
        let mut state = RuntimeState {
            spec,
            stack: BackStack::new(),
            statuses: BTreeMap::new(),
            next_serial: BTreeMap::new(),
            terminated: false,
        };
        state.push_instance(&entry);
        state
    }

    pub fn spec(&self) -> &Arc<AppSpec> {
        &self.spec
    }

    pub fn stack(&self) -> &BackStack {
        &self.stack
    }

    pub fn is_terminated(&self) -> bool {
        self.terminated
    }

    fn alloc_serial(&mut self, activity: &ActivityId) -> u32 {
        let serial = self.next_serial.entry(activity.clone()).or_insert(1);
        let out = *serial;
        *serial += 1;
        out
    }

    /// Push a brand-new instance of `activity` with initial statuses,
    /// ignoring launch modes. Used for the entry activity at launch.
    fn push_instance(&mut self, activity: &ActivityId) {
        let serial = self.alloc_serial(activity);
        let (stack, _) = self.stack.push_for_launch(activity, crate::app_spec::LaunchMode::Standard, serial);
        self.stack = stack;
        let inst = self.stack.top().expect("just pushed").clone();
        self.statuses.insert(inst, self.initial_statuses(activity));
    }

    fn initial_statuses(&self, activity: &ActivityId) -> InstanceStatuses {
        let def = self.spec.activity(activity).expect("validated spec");
        def.views.iter().map(|v| (v.id.clone(), v.initial_status.clone())).collect()
    }

    /// Drop status entries for instances no longer on the stack.
    fn gc_statuses(&mut self) {
        let live: BTreeSet<ActivityInstanceRef> = self.stack.entries().iter().cloned().collect();
        self.statuses.retain(|inst, _| live.contains(inst));
    }

    fn focused(&self) -> Option<&ActivityInstanceRef> {
        self.stack.top()
    }

    fn eval_predicate(
        &self,
        instance: &InstanceStatuses,
        pred: &Predicate,
        payload: Option<&str>,
    ) -> bool {
        match pred {
            Predicate::Status { view, attr, eq } => {
                instance.get(view).and_then(|s| s.get(attr)) == Some(eq)
            }
            Predicate::Payload { eq } => payload == Some(eq.as_str()),
            Predicate::All(ps) => ps.iter().all(|p| self.eval_predicate(instance, p, payload)),
            Predicate::Any(ps) => ps.iter().any(|p| self.eval_predicate(instance, p, payload)),
            Predicate::Not(p) => !self.eval_predicate(instance, p, payload),
        }
    }

    fn payload_text(&self, kind: &EventKind) -> Option<&str> {
        match kind {
            EventKind::TypeText(i) => self.spec.text_palette.get(*i as usize).map(String::as_str),
            _ => None,
        }
    }

    /// Project the current state. Errors if the app has terminated.
    pub fn observe(&self) -> Result<Observation, RuntimeError> {
        if self.terminated {
            return Err(RuntimeError::Terminated);
        }
        let focused = self.focused().expect("non-terminated state has a focused activity");
        let activity = focused.activity.clone();
        let def = self.spec.activity(&activity).expect("validated spec");
        let instance = &self.statuses[focused];

        let mut visible: Vec<&crate::app_spec::ViewDef> = def
            .views
            .iter()
            .filter(|v| match &v.visible_if {
                None => true,
                Some(pred) => self.eval_predicate(instance, pred, None),
            })
            .collect();

        let mut views: Vec<ObservedView> = visible
            .iter()
            .map(|v| ObservedView {
                view: v.id.clone(),
                view_type: v.view_type,
                position: v.position,
                status: instance.get(&v.id).cloned().unwrap_or_default(),
            })
            .collect();
        views.sort_by(|a, b| a.view.cmp(&b.view));

        visible.sort_by(|a, b| (a.position, &a.id).cmp(&(b.position, &b.id)));
        let mut applicable_events = Vec::new();
        for v in visible {
            let enabled = instance
                .get(&v.id)
                .and_then(|s| s.get(&StatusKey::Enabled))
                .map(|val| val != &StatusValue::Bool(false))
                .unwrap_or(true);
            if !enabled {
                continue;
            }
            for kind in events_for_view(v, &self.spec.text_palette) {
                applicable_events.push(ConcreteEvent::on_view(v.id.as_str(), kind));
            }
        }
        for g in &self.spec.global_events {
            applicable_events.push(ConcreteEvent::global(g.kind()));
        }

        Ok(Observation { activity, views, stack: self.stack.activity_ids(), applicable_events })
    }

    fn matching_handler(
        &self,
        event: &ConcreteEvent,
    ) -> Result<Option<&EventHandler>, RuntimeError> {
        let focused = self.focused().expect("checked by caller");
        let def = self.spec.activity(&focused.activity).expect("validated spec");
        let instance = &self.statuses[focused];
        let payload = self.payload_text(&event.kind);

        let matches: Vec<&EventHandler> = def
            .handlers
            .iter()
            .filter(|h| {
                let source_ok = match (&h.on.view, &event.source) {
                    (Some(v), EventSource::View(ev)) => v == ev,
                    (None, EventSource::Global) => true,
                    _ => false,
                };
                source_ok
                    && h.on.event.matches(&event.kind)
                    && h.on
                        .guard
                        .as_ref()
                        .map(|g| self.eval_predicate(instance, g, payload))
                        .unwrap_or(true)
            })
            .collect();

        match matches.len() {
            0 => Ok(None),
            1 => Ok(Some(matches[0])),
            n => Err(RuntimeError::AmbiguousHandlers { event: event.clone(), count: n }),
        }
    }

    fn apply_pop(&mut self) {
        self.stack = self.stack.pop_back().expect("pop checked against empty stack");
        self.gc_statuses();
        if self.stack.is_empty() {
            self.terminated = true;
        }
    }

    fn apply_effects(&mut self, effects: &[Effect]) -> bool {
        let mut started_new = false;
        for effect in effects {
            if self.terminated {
                break;
            }
            match effect {
                Effect::NoOp => {}
                Effect::SetStatus { view, attr, value } => {
                    let Some(focused) = self.focused().cloned() else { break };
                    // Resolved against the focused activity; a view the
                    // focused activity does not declare is a no-op.
                    if self.spec.activity(&focused.activity).and_then(|d| d.view(view)).is_some() {
                        self.statuses
                            .get_mut(&focused)
                            .expect("statuses track the stack")
                            .entry(view.clone())
                            .or_default()
                            .insert(*attr, value.clone());
                    }
                }
                Effect::StartActivity { activity } => {
                    let mode = self.spec.activity(activity).expect("validated spec").launch_mode;
                    let serial = self.alloc_serial(activity);
                    let (stack, created) = self.stack.push_for_launch(activity, mode, serial);
                    self.stack = stack;
                    self.gc_statuses();
                    if created {
                        let inst = self.stack.top().expect("just pushed").clone();
                        self.statuses.insert(inst, self.initial_statuses(activity));
                        started_new = true;
                    }
                }
                Effect::Finish => self.apply_pop(),
                Effect::Quit => {
                    self.stack = BackStack::new();
                    self.statuses.clear();
                    self.terminated = true;
                }
            }
        }
        started_new
    }

    /// Fire one applicable event, returning the successor state and the
    /// labels the matched handler emits. The input state is untouched.
    pub fn fire(&self, event: &ConcreteEvent) -> Result<FireResult, RuntimeError> {
        let obs = self.observe()?;
        if !obs.applicable_events.contains(event) {
            return Err(RuntimeError::Inapplicable { event: event.clone() });
        }
        // Guard evaluation sees the pre-event state even for Back, whose
        // default pop runs before any handler effects.
        let handler = self.matching_handler(event)?.cloned();

        let mut next = self.clone();
        if event.kind == EventKind::Back {
            next.apply_pop();
        }
        let mut emitted = BTreeSet::new();
        let mut started_new = false;
        if let Some(h) = handler {
            emitted = h.emits.clone();
            started_new = next.apply_effects(&h.effects);
        }
        Ok(FireResult { next, emitted, started_new_activity: started_new })
    }
}

/// One replayed event with the observation it fired from and what it did.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceStep {
    pub observation: Observation,
    pub event: ConcreteEvent,
    pub emitted: BTreeSet<LabelId>,
    pub started_new_activity: bool,
    /// Stack snapshot after the event, bottom-to-top.
    pub stack_after: Vec<ActivityId>,
}

/// Full record of a replay run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub steps: Vec<TraceStep>,
    /// Observation of the final state; `None` when the app terminated.
    pub end: Option<Observation>,
}

impl Trace {
    pub fn emitted_labels(&self) -> BTreeSet<LabelId> {
        self.steps.iter().flat_map(|s| s.emitted.iter().cloned()).collect()
    }

    pub fn stack_snapshots(&self) -> Vec<Vec<ActivityId>> {
        self.steps.iter().map(|s| s.stack_after.clone()).collect()
    }
}

/// Result of replaying a sequence from a fresh start.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplayOutcome {
    Completed { trace: Trace },
    /// Event at this index was not applicable (or the app had already
    /// terminated). Signals a stale model path, not a failure.
    InfeasibleAt { index: usize, trace: Trace },
}

impl ReplayOutcome {
    pub fn trace(&self) -> &Trace {
        match self {
            ReplayOutcome::Completed { trace } | ReplayOutcome::InfeasibleAt { trace, .. } => trace,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, ReplayOutcome::Completed { .. })
    }
}

/// Start the app fresh and fire `seq` in order.
///
/// Replay is a pure function of (spec, seq); two runs produce identical
/// traces. An inapplicable event aborts the run and reports its index
/// together with the partial trace.
pub fn replay(spec: &Arc<AppSpec>, seq: &[ConcreteEvent]) -> ReplayOutcome {
    let mut state = RuntimeState::start(Arc::clone(spec));
    let mut steps = Vec::with_capacity(seq.len());
    for (index, event) in seq.iter().enumerate() {
        let observation = match state.observe() {
            Ok(obs) => obs,
            Err(_) => return ReplayOutcome::InfeasibleAt { index, trace: Trace { steps, end: None } },
        };
        match state.fire(event) {
            Ok(FireResult { next, emitted, started_new_activity }) => {
                steps.push(TraceStep {
                    observation,
                    event: event.clone(),
                    emitted,
                    started_new_activity,
                    stack_after: next.stack().activity_ids(),
                });
                state = next;
            }
            Err(_) => {
                let end = state.observe().ok();
                return ReplayOutcome::InfeasibleAt { index, trace: Trace { steps, end } };
            }
        }
    }
    let end = state.observe().ok();
    ReplayOutcome::Completed { trace: Trace { steps, end } }
}

/// Replay and keep the final runtime state alongside the trace. Used by
/// exploration, which continues firing from where the replay stopped.
pub fn replay_to_state(spec: &Arc<AppSpec>, seq: &[ConcreteEvent]) -> Option<RuntimeState> {
    let mut state = RuntimeState::start(Arc::clone(spec));
    for event in seq {
        match state.fire(event) {
            Ok(res) => state = res.next,
            Err(_) => return None,
        }
    }
    Some(state)
}

/// Render a trace as the line-oriented log format: one record per fired
/// event, tab-separated fields
/// `step<TAB>activity<TAB>event<TAB>labels<TAB>stack`, labels
/// comma-separated with `-` for none, stack bottom-to-top.
pub fn render_trace(trace: &Trace) -> String {
    let mut out = String::new();
    for (i, step) in trace.steps.iter().enumerate() {
        let labels = if step.emitted.is_empty() {
            "-".to_string()
        } else {
            step.emitted.iter().map(|l| l.as_str()).collect::<Vec<_>>().join(",")
        };
        let stack = step
            .stack_after
            .iter()
            .map(|a| a.as_str())
            .collect::<Vec<_>>()
            .join(", ");
        let _ = writeln!(
            out,
            "{i}\t{}\t{}\t{labels}\t[{stack}]",
            step.observation.activity, step.event
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::app_spec::{parse_app_spec, EventKind::*};

    fn one_button() -> Arc<AppSpec> {
        let text = r#"{
            "name": "one_button",
            "entry_activity": "Main",
            "activities": [{
                "id": "Main",
                "views": [{"id": "btn", "view_type": "Button", "position": [0, 0]}],
                "handlers": [{"on": {"view": "btn", "event": "Click"}, "effects": ["NoOp"], "emits": ["tapped"]}]
            }]
        }"#;
        Arc::new(parse_app_spec(text).unwrap())
    }

    fn toggle_pair() -> Arc<AppSpec> {
        // checkbox that enables a sibling button, as a settings screen would
        let text = r#"{
            "name": "toggle_pair",
            "entry_activity": "Setting",
            "activities": [{
                "id": "Setting",
                "views": [
                    {"id": "exclude_cb", "view_type": "CheckBox", "position": [0, 0],
                     "initial_status": {"checked": false}},
                    {"id": "tax_btn", "view_type": "Button", "position": [0, 1],
                     "initial_status": {"enabled": false}}
                ],
                "handlers": [
                    {"on": {"view": "exclude_cb", "event": "Click",
                            "guard": {"Status": {"view": "exclude_cb", "attr": "checked", "eq": false}}},
                     "effects": [
                        {"SetStatus": {"view": "exclude_cb", "attr": "checked", "value": true}},
                        {"SetStatus": {"view": "tax_btn", "attr": "enabled", "value": true}}]},
                    {"on": {"view": "exclude_cb", "event": "Click",
                            "guard": {"Status": {"view": "exclude_cb", "attr": "checked", "eq": true}}},
                     "effects": [
                        {"SetStatus": {"view": "exclude_cb", "attr": "checked", "value": false}},
                        {"SetStatus": {"view": "tax_btn", "attr": "enabled", "value": false}}]}
                ]
            }]
        }"#;
        Arc::new(parse_app_spec(text).unwrap())
    }

    #[test]
    fn start_pushes_entry_only() {
        let state = RuntimeState::start(one_button());
        assert_eq!(state.stack().len(), 1);
        assert!(!state.is_terminated());
    }

    #[test]
    fn start_is_deterministic() {
        let spec = one_button();
        assert_eq!(RuntimeState::start(Arc::clone(&spec)), RuntimeState::start(spec));
    }

    #[test]
    fn one_button_observation_events() {
        let state = RuntimeState::start(one_button());
        let obs = state.observe().unwrap();
        assert_eq!(
            obs.applicable_events,
            vec![
                ConcreteEvent::on_view("btn", Click),
                ConcreteEvent::on_view("btn", LongClick),
                ConcreteEvent::on_view("btn", Press),
                ConcreteEvent::global(Back),
            ]
        );
        assert_eq!(state.observe().unwrap(), obs);
    }

    #[test]
    fn disabled_view_contributes_no_events_but_is_observed() {
        let state = RuntimeState::start(toggle_pair());
        let obs = state.observe().unwrap();
        assert_eq!(obs.views.len(), 2);
        let tax = obs.views.iter().find(|v| v.view.as_str() == "tax_btn").unwrap();
        assert_eq!(tax.status.get(&StatusKey::Enabled), Some(&StatusValue::Bool(false)));
        assert!(obs
            .applicable_events
            .iter()
            .all(|e| e.source != EventSource::View("tax_btn".into())));
    }

    #[test]
    fn guarded_toggle_enables_sibling() {
        let state = RuntimeState::start(toggle_pair());
        let click = ConcreteEvent::on_view("exclude_cb", Click);
        let checked = state.fire(&click).unwrap().next;
        let obs = checked.observe().unwrap();
        assert!(obs
            .applicable_events
            .contains(&ConcreteEvent::on_view("tax_btn", Click)));
        // toggling back restores the original state
        let unchecked = checked.fire(&click).unwrap().next;
        assert_eq!(unchecked, state);
    }

    #[test]
    fn unhandled_event_is_noop() {
        let state = RuntimeState::start(one_button());
        let res = state.fire(&ConcreteEvent::on_view("btn", LongClick)).unwrap();
        assert_eq!(res.next, state);
        assert!(res.emitted.is_empty());
    }

    #[test]
    fn fire_does_not_mutate_input() {
        let state = RuntimeState::start(one_button());
        let before = state.clone();
        let _ = state.fire(&ConcreteEvent::on_view("btn", Click)).unwrap();
        assert_eq!(state, before);
        let again = state.fire(&ConcreteEvent::on_view("btn", Click)).unwrap();
        assert!(again.emitted.contains(&LabelId::new("tapped")));
    }

    #[test]
    fn back_on_last_activity_terminates() {
        let state = RuntimeState::start(one_button());
        let res = state.fire(&ConcreteEvent::global(Back)).unwrap();
        assert!(res.next.is_terminated());
        assert_eq!(res.next.observe(), Err(RuntimeError::Terminated));
    }

    #[test]
    fn inapplicable_event_errors() {
        let state = RuntimeState::start(one_button());
        let err = state.fire(&ConcreteEvent::on_view("btn", Scroll)).unwrap_err();
        assert!(matches!(err, RuntimeError::Inapplicable { .. }));
    }

    #[test]
    fn replay_empty_sequence_ends_at_entry() {
        let spec = one_button();
        match replay(&spec, &[]) {
            ReplayOutcome::Completed { trace } => {
                assert!(trace.steps.is_empty());
                let end = trace.end.unwrap();
                assert_eq!(end.activity, ActivityId::new("Main"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn replay_back_back_is_infeasible_at_one() {
        let spec = one_button();
        let seq = vec![ConcreteEvent::global(Back), ConcreteEvent::global(Back)];
        match replay(&spec, &seq) {
            ReplayOutcome::InfeasibleAt { index, .. } => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn replay_is_deterministic() {
        let spec = toggle_pair();
        let click = ConcreteEvent::on_view("exclude_cb", Click);
        let seq = vec![click.clone(), click.clone(), click, ConcreteEvent::global(Back)];
        assert_eq!(replay(&spec, &seq), replay(&spec, &seq));
    }

    #[test]
    fn trace_log_format() {
        let spec = one_button();
        let seq = vec![ConcreteEvent::on_view("btn", Click), ConcreteEvent::global(Back)];
        let out = replay(&spec, &seq);
        let log = render_trace(out.trace());
        let lines: Vec<&str> = log.lines().collect();
        assert_eq!(
            lines,
            vec!["0\tMain\tview:btn Click\ttapped\t[Main]", "1\tMain\tglobal Back\t-\t[]"]
        );
    }
}
