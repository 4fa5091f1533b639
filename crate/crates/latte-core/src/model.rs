//! The labelled activity-transition model: states split from activities by
//! view set and back stack, transitions labelled with the code labels they
//! fire, plus the similarity measure that controls state merging.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::app_spec::{ActivityId, ConcreteEvent, EventSequence, LabelId};
use crate::runtime::{Observation, ObservedView};

/// Dense model-state identifier. Id 0 is always the entry state and id 1
/// the terminal state; ordinary states are numbered in discovery order
/// from 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateId(pub u32);

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

pub const ENTRY_ID: StateId = StateId(0);
pub const TERMINAL_ID: StateId = StateId(1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    Entry,
    Ordinary,
    Terminal,
}

/// A model state: the activity it was split from, its visible views with
/// full statuses, the back-stack snapshot, and the event sequence that
/// first reached it.
///
/// Two views are equal only if every field including the status map is
/// equal, so a checked and an unchecked checkbox count as different views.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelState {
    pub id: StateId,
    pub kind: StateKind,
    /// `None` only for the terminal state.
    pub activity: Option<ActivityId>,
    /// Canonical: sorted by view id.
    pub views: Vec<ObservedView>,
    /// Activity ids bottom-to-top.
    pub stack: Vec<ActivityId>,
    /// Events from the entry state that first reached this state; empty
    /// for the entry and terminal states.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub access_seq: EventSequence,
}

impl ModelState {
    pub fn from_observation(
        id: StateId,
        kind: StateKind,
        obs: &Observation,
        access_seq: EventSequence,
    ) -> ModelState {
        ModelState {
            id,
            kind,
            activity: Some(obs.activity.clone()),
            views: obs.views.clone(),
            stack: obs.stack.clone(),
            access_seq,
        }
    }

    fn terminal() -> ModelState {
        ModelState {
            id: TERMINAL_ID,
            kind: StateKind::Terminal,
            activity: None,
            views: Vec::new(),
            stack: Vec::new(),
            access_seq: Vec::new(),
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.kind == StateKind::Terminal
    }
}

/// A labelled transition.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Transition {
    pub src: StateId,
    pub event: ConcreteEvent,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub labels: BTreeSet<LabelId>,
    pub dest: StateId,
}

fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    let union = a.union(b).count();
    inter as f64 / union as f64
}

/// Fraction of shared views over all views of the two states, with views
/// compared by full attribute equality. 1 when both view sets are empty.
pub fn view_similarity(a: &ModelState, b: &ModelState) -> f64 {
    let va: BTreeSet<&ObservedView> = a.views.iter().collect();
    let vb: BTreeSet<&ObservedView> = b.views.iter().collect();
    jaccard(&va, &vb)
}

/// 1 when the back stacks are the same activity list, else 0. Order
/// matters; a stack is not a set.
pub fn stack_similarity(a: &ModelState, b: &ModelState) -> f64 {
    if a.stack == b.stack {
        1.0
    } else {
        0.0
    }
}

/// Weighted state similarity: `omega * view + (1 - omega) * stack`.
/// States of different activities (or involving the terminal state) are
/// never similar; their similarity is 0 so the maximum search is total.
pub fn state_similarity(a: &ModelState, b: &ModelState, omega: f64) -> f64 {
    match (&a.activity, &b.activity) {
        (Some(x), Some(y)) if x == y => {
            omega * view_similarity(a, b) + (1.0 - omega) * stack_similarity(a, b)
        }
        _ => 0.0,
    }
}

/// Similarity with the status and stack dimensions optionally collapsed.
/// Collapsing statuses compares views by (id, type, position) only;
/// collapsing the stack treats all stacks as equal. Model construction
/// uses this for its ablation switches; the plain functions above are the
/// full measure.
pub(crate) fn state_similarity_opts(
    a: &ModelState,
    b: &ModelState,
    omega: f64,
    use_statuses: bool,
    use_stack: bool,
) -> f64 {
    match (&a.activity, &b.activity) {
        (Some(x), Some(y)) if x == y => {}
        _ => return 0.0,
    }
    let sim_v = if use_statuses {
        view_similarity(a, b)
    } else {
        let strip = |s: &ModelState| -> BTreeSet<(crate::app_spec::ViewId, crate::app_spec::ViewType, crate::app_spec::Position)> {
            s.views.iter().map(|v| (v.view.clone(), v.view_type, v.position)).collect()
        };
        jaccard(&strip(a), &strip(b))
    };
    let sim_l = if use_stack { stack_similarity(a, b) } else { 1.0 };
    omega * sim_v + (1.0 - omega) * sim_l
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model document is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("model integrity violated: {0}")]
    Integrity(String),
}

/// The model proper: states, transitions, the entry state s0 and the
/// terminal state q, and the label universe of the app it was built from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatteModel {
    states: BTreeMap<StateId, ModelState>,
    transitions: BTreeSet<Transition>,
    s0: StateId,
    q: StateId,
    label_universe: BTreeSet<LabelId>,
}

impl LatteModel {
    /// Create a model containing the entry state (id 0) and the terminal
    /// state (id 1).
    pub fn new(entry: &Observation, label_universe: BTreeSet<LabelId>) -> LatteModel {
        let s0 = ModelState::from_observation(ENTRY_ID, StateKind::Entry, entry, Vec::new());
        let mut states = BTreeMap::new();
        states.insert(ENTRY_ID, s0);
        states.insert(TERMINAL_ID, ModelState::terminal());
        LatteModel {
            states,
            transitions: BTreeSet::new(),
            s0: ENTRY_ID,
            q: TERMINAL_ID,
            label_universe,
        }
    }

    pub fn s0(&self) -> StateId {
        self.s0
    }

    pub fn q(&self) -> StateId {
        self.q
    }

    pub fn label_universe(&self) -> &BTreeSet<LabelId> {
        &self.label_universe
    }

    pub fn state(&self, id: StateId) -> Option<&ModelState> {
        self.states.get(&id)
    }

    /// All states, ascending by id.
    pub fn states(&self) -> impl Iterator<Item = &ModelState> {
        self.states.values()
    }

    /// Entry plus ordinary states; everything the similarity measure is
    /// defined over.
    pub fn non_terminal_states(&self) -> impl Iterator<Item = &ModelState> {
        self.states.values().filter(|s| !s.is_terminal())
    }

    pub fn ordinary_state_count(&self) -> usize {
        self.non_terminal_states().count()
    }

    pub fn transitions(&self) -> impl Iterator<Item = &Transition> {
        self.transitions.iter()
    }

    pub fn transition_count(&self) -> usize {
        self.transitions.len()
    }

    /// Labels appearing on at least one transition.
    pub fn covered_labels(&self) -> BTreeSet<LabelId> {
        self.transitions.iter().flat_map(|t| t.labels.iter().cloned()).collect()
    }

    /// Append a freshly discovered state. Ids must be handed out densely
    /// by the caller; the next free id is `next_id`.
    pub fn insert_state(&mut self, state: ModelState) {
        debug_assert!(!self.states.contains_key(&state.id), "state ids are assigned once");
        self.states.insert(state.id, state);
    }

    pub fn next_id(&self) -> StateId {
        StateId(self.states.keys().last().map(|s| s.0 + 1).expect("model never empty"))
    }

    /// Record a transition. Identical duplicates collapse; the transition
    /// set never holds two equal elements.
    pub fn insert_transition(&mut self, t: Transition) {
        debug_assert!(self.states.contains_key(&t.src) && self.states.contains_key(&t.dest));
        self.transitions.insert(t);
    }

    /// The state most similar to `candidate` among non-terminal states of
    /// the same activity, together with the similarity value. Ties go to
    /// the smallest (oldest) state id so builds are deterministic. `None`
    /// when no same-activity state exists.
    pub fn find_most_similar(&self, candidate: &ModelState, omega: f64) -> Option<(StateId, f64)> {
        self.find_most_similar_opts(candidate, omega, true, true)
    }

    pub(crate) fn find_most_similar_opts(
        &self,
        candidate: &ModelState,
        omega: f64,
        use_statuses: bool,
        use_stack: bool,
    ) -> Option<(StateId, f64)> {
        let mut best: Option<(StateId, f64)> = None;
        for state in self.non_terminal_states() {
            if state.activity != candidate.activity {
                continue;
            }
            let sim = state_similarity_opts(state, candidate, omega, use_statuses, use_stack);
            // strictly greater keeps the oldest id on ties
            if best.map(|(_, b)| sim > b).unwrap_or(true) {
                best = Some((state.id, sim));
            }
        }
        best
    }

    /// Merge a newcomer into an existing state the caller found
    /// sufficiently similar: the newcomer is discarded, the incoming
    /// transition is redirected to the existing state, and the existing
    /// state keeps all its fields (its access sequence is already known to
    /// replay).
    pub fn merge_into(&mut self, existing: StateId, newcomer: ModelState, mut incoming: Transition) {
        debug_assert!(self.states.contains_key(&existing));
        drop(newcomer);
        incoming.dest = existing;
        self.insert_transition(incoming);
    }

    /// Structural problems, empty when the model is sound. Exports assume
    /// a clean model.
    pub fn integrity_issues(&self) -> Vec<String> {
        let mut issues = Vec::new();
        match self.states.get(&self.s0) {
            Some(s) if s.kind == StateKind::Entry => {
                if !s.access_seq.is_empty() {
                    issues.push("entry state has a non-empty access sequence".into());
                }
            }
            _ => issues.push("entry state missing or mis-kinded".into()),
        }
        match self.states.get(&self.q) {
            Some(s) if s.kind == StateKind::Terminal => {
                if !s.views.is_empty() || !s.stack.is_empty() {
                    issues.push("terminal state must have empty views and stack".into());
                }
            }
            _ => issues.push("terminal state missing or mis-kinded".into()),
        }
        for t in &self.transitions {
            if !self.states.contains_key(&t.src) || !self.states.contains_key(&t.dest) {
                issues.push(format!("transition endpoint does not resolve: {} -> {}", t.src, t.dest));
            }
            if !t.labels.is_subset(&self.label_universe) {
                issues.push(format!("transition from {} carries labels outside the universe", t.src));
            }
        }
        let mut triples = BTreeMap::new();
        for s in self.non_terminal_states() {
            let key = (s.activity.clone(), s.views.clone(), s.stack.clone());
            if let Some(prev) = triples.insert(key, s.id) {
                issues.push(format!("states {prev} and {} are identical in (activity, views, stack)", s.id));
            }
        }
        issues
    }

    fn node_name(&self, id: StateId) -> String {
        if id == self.q {
            "q".to_string()
        } else {
            format!("s{}", id.0)
        }
    }

    /// Render the model in graph description language. States are boxes
    /// annotated `id | stack`; transitions carrying labels are drawn red
    /// and bold so labelled behavior stands out.
    pub fn to_dot(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "digraph model {{");
        let _ = writeln!(out, "    rankdir=LR;");
        let _ = writeln!(out, "    node [shape=box, fontname=\"Helvetica\"];");
        for state in self.states.values() {
            let name = self.node_name(state.id);
            if state.is_terminal() {
                let _ = writeln!(out, "    {name} [label=\"q\", shape=doublecircle];");
                continue;
            }
            let stack = state
                .stack
                .iter()
                .map(|a| a.as_str())
                .collect::<Vec<_>>()
                .join(", ");
            let mut attrs = format!("label=\"{name} | [{stack}]\"");
            if state.kind == StateKind::Entry {
                attrs.push_str(", peripheries=2");
            }
            let _ = writeln!(out, "    {name} [{attrs}];");
        }
        for t in &self.transitions {
            let src = self.node_name(t.src);
            let dest = self.node_name(t.dest);
            if t.labels.is_empty() {
                let _ = writeln!(
                    out,
                    "    {src} -> {dest} [label=\"{}\", color=gray50, fontcolor=gray30];",
                    t.event
                );
            } else {
                let labels =
                    t.labels.iter().map(|l| l.as_str()).collect::<Vec<_>>().join(", ");
                let _ = writeln!(
                    out,
                    "    {src} -> {dest} [label=\"{}\\n{{{labels}}}\", color=red, fontcolor=red, penwidth=2.0];",
                    t.event
                );
            }
        }
        out.push_str("}\n");
        out
    }

    /// Lossless JSON serialization; [`LatteModel::from_json`] restores an
    /// equal model.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<LatteModel, ModelError> {
        let model: LatteModel = serde_json::from_str(text)?;
        let issues = model.integrity_issues();
        if !issues.is_empty() {
            return Err(ModelError::Integrity(issues.join("; ")));
        }
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    label_universe: BTreeSet<LabelId>,
    s0: StateId,
    q: StateId,
    states: Vec<ModelState>,
    transitions: Vec<Transition>,
}

impl Serialize for LatteModel {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        ModelDoc {
            label_universe: self.label_universe.clone(),
            s0: self.s0,
            q: self.q,
            states: self.states.values().cloned().collect(),
            transitions: self.transitions.iter().cloned().collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LatteModel {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let doc = ModelDoc::deserialize(deserializer)?;
        let states: BTreeMap<StateId, ModelState> =
            doc.states.into_iter().map(|s| (s.id, s)).collect();
        Ok(LatteModel {
            states,
            transitions: doc.transitions.into_iter().collect(),
            s0: doc.s0,
            q: doc.q,
            label_universe: doc.label_universe,
        })
    }
}
