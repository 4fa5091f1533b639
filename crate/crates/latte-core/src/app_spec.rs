//! Declarative description of the app under test.
//!
//! An [`AppSpec`] names the activities of an app, the views on each
//! activity, and the event handlers that drive it. The document format is
//! JSON; `docs/schema/appspec.schema.json` defines it field by field and
//! the bundled fixtures are normative examples.
//!
//! Everything here is immutable after validation and can be shared freely
//! across threads.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

macro_rules! id_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                Self(s.into())
            }
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }
    };
}

id_type!(
    /// Identifier of a declared activity.
    ActivityId
);
id_type!(
    /// Identifier of a view, unique within its activity.
    ViewId
);
id_type!(
    /// Identifier of a code label attached to handlers.
    LabelId
);

/// Launch modes recognized by the back-stack rules. `SingleInstance` parses
/// but is rejected during validation; it only matters for cross-app
/// transitions, which the simulator does not model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LaunchMode {
    Standard,
    SingleTop,
    SingleTask,
    SingleInstance,
}

impl Default for LaunchMode {
    fn default() -> Self {
        LaunchMode::Standard
    }
}

/// The closed set of supported view types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ViewType {
    Button,
    RadioButton,
    CheckBox,
    ImageView,
    TextView,
    EditText,
    ListView,
    ProgressBar,
}

impl fmt::Display for ViewType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Status attribute names. The set is closed: a view's runtime status is
/// a map from these keys to values of the matching type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatusKey {
    Enabled,
    Focused,
    Checked,
    Text,
    Value,
}

impl StatusKey {
    fn expects_bool(self) -> bool {
        matches!(self, StatusKey::Enabled | StatusKey::Focused | StatusKey::Checked)
    }
}

impl fmt::Display for StatusKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StatusKey::Enabled => "enabled",
            StatusKey::Focused => "focused",
            StatusKey::Checked => "checked",
            StatusKey::Text => "text",
            StatusKey::Value => "value",
        };
        f.write_str(s)
    }
}

/// A status value: boolean for enabled/focused/checked, string for text,
/// integer for value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StatusValue {
    Bool(bool),
    Int(i64),
    Text(String),
}

impl fmt::Display for StatusValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatusValue::Bool(b) => write!(f, "{b}"),
            StatusValue::Int(i) => write!(f, "{i}"),
            StatusValue::Text(s) => write!(f, "{s:?}"),
        }
    }
}

/// Map from status attribute to value. Views are compared by exact map
/// equality, so a key that was never declared is distinct from one set to
/// a default.
pub type StatusMap = BTreeMap<StatusKey, StatusValue>;

/// Layout coordinate of a view, unitless. Ordering by position then view
/// id gives the canonical event enumeration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Position(pub i64, pub i64);

/// A concrete UI or global event with its payload resolved.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventKind {
    Click,
    LongClick,
    Press,
    Scroll,
    ClearText,
    /// Types the palette entry at this index into the focused EditText.
    TypeText(u32),
    /// Sets a ProgressBar to one of its declared values.
    SetValue(i64),
    Back,
    Rotate,
}

impl EventKind {
    pub fn is_global(&self) -> bool {
        matches!(self, EventKind::Back | EventKind::Rotate)
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventKind::TypeText(i) => write!(f, "TypeText({i})"),
            EventKind::SetValue(v) => write!(f, "SetValue({v})"),
            other => write!(f, "{other:?}"),
        }
    }
}

/// Where an event is aimed: a view of the focused activity, or the device
/// itself (Back, Rotate).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventSource {
    #[serde(rename = "view")]
    View(ViewId),
    #[serde(rename = "global")]
    Global,
}

impl fmt::Display for EventSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventSource::View(v) => write!(f, "view:{v}"),
            EventSource::Global => f.write_str("global"),
        }
    }
}

/// A fully concrete event: the unit of event sequences, traces, and model
/// transitions.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConcreteEvent {
    pub source: EventSource,
    pub kind: EventKind,
}

impl ConcreteEvent {
    pub fn on_view(view: impl Into<ViewId>, kind: EventKind) -> Self {
        ConcreteEvent { source: EventSource::View(view.into()), kind }
    }
    pub fn global(kind: EventKind) -> Self {
        ConcreteEvent { source: EventSource::Global, kind }
    }
}

impl fmt::Display for ConcreteEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.source, self.kind)
    }
}

/// An ordered list of concrete events; the unit of test cases and replays.
pub type EventSequence = Vec<ConcreteEvent>;

/// Event shape a handler subscribes to. `TypeText(None)` and
/// `SetValue(None)` match any payload; guards can narrow further.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventPattern {
    Click,
    LongClick,
    Press,
    Scroll,
    ClearText,
    TypeText(Option<u32>),
    SetValue(Option<i64>),
    Back,
    Rotate,
}

impl EventPattern {
    pub fn matches(&self, kind: &EventKind) -> bool {
        match (self, kind) {
            (EventPattern::Click, EventKind::Click) => true,
            (EventPattern::LongClick, EventKind::LongClick) => true,
            (EventPattern::Press, EventKind::Press) => true,
            (EventPattern::Scroll, EventKind::Scroll) => true,
            (EventPattern::ClearText, EventKind::ClearText) => true,
            (EventPattern::TypeText(None), EventKind::TypeText(_)) => true,
            (EventPattern::TypeText(Some(i)), EventKind::TypeText(j)) => i == j,
            (EventPattern::SetValue(None), EventKind::SetValue(_)) => true,
            (EventPattern::SetValue(Some(v)), EventKind::SetValue(w)) => v == w,
            (EventPattern::Back, EventKind::Back) => true,
            (EventPattern::Rotate, EventKind::Rotate) => true,
            _ => false,
        }
    }

    pub fn is_global(&self) -> bool {
        matches!(self, EventPattern::Back | EventPattern::Rotate)
    }

    /// True when two patterns can match a common concrete event.
    pub fn overlaps(&self, other: &EventPattern) -> bool {
        match (self, other) {
            (EventPattern::TypeText(a), EventPattern::TypeText(b)) => {
                a.is_none() || b.is_none() || a == b
            }
            (EventPattern::SetValue(a), EventPattern::SetValue(b)) => {
                a.is_none() || b.is_none() || a == b
            }
            (a, b) => a == b,
        }
    }
}

/// Boolean condition over the statuses of views in the same activity,
/// plus the payload of the triggering TypeText event when used as a
/// handler guard.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Predicate {
    Status { view: ViewId, attr: StatusKey, eq: StatusValue },
    /// Matches when the fired event is TypeText and the typed palette
    /// string equals `eq`. Never matches other events.
    Payload { eq: String },
    All(Vec<Predicate>),
    Any(Vec<Predicate>),
    Not(Box<Predicate>),
}

impl Predicate {
    fn references_payload(&self) -> bool {
        match self {
            Predicate::Payload { .. } => true,
            Predicate::Status { .. } => false,
            Predicate::All(ps) | Predicate::Any(ps) => ps.iter().any(Self::references_payload),
            Predicate::Not(p) => p.references_payload(),
        }
    }

    fn for_each_view_ref(&self, f: &mut impl FnMut(&ViewId)) {
        match self {
            Predicate::Status { view, .. } => f(view),
            Predicate::Payload { .. } => {}
            Predicate::All(ps) | Predicate::Any(ps) => {
                ps.iter().for_each(|p| p.for_each_view_ref(f))
            }
            Predicate::Not(p) => p.for_each_view_ref(f),
        }
    }
}

/// State change caused by a handler. Effects run in declaration order and
/// always act on the activity instance that holds focus at the moment the
/// effect executes, so a `SetStatus` after a `Finish` or `StartActivity`
/// touches the newly revealed or newly started instance.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Effect {
    SetStatus { view: ViewId, attr: StatusKey, value: StatusValue },
    StartActivity { activity: ActivityId },
    Finish,
    Quit,
    NoOp,
}

/// Event subscription of a handler. A missing `view` means the handler
/// listens for a global event.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandlerOn {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub view: Option<ViewId>,
    pub event: EventPattern,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard: Option<Predicate>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventHandler {
    pub on: HandlerOn,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub effects: Vec<Effect>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub emits: BTreeSet<LabelId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewDef {
    pub id: ViewId,
    pub view_type: ViewType,
    pub position: Position,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub initial_status: StatusMap,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visible_if: Option<Predicate>,
    /// Finite value set for ProgressBar views; required there, forbidden
    /// elsewhere. Keeps the event alphabet finite.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<i64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivityDef {
    pub id: ActivityId,
    #[serde(default)]
    pub launch_mode: LaunchMode,
    pub views: Vec<ViewDef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub handlers: Vec<EventHandler>,
}

impl ActivityDef {
    pub fn view(&self, id: &ViewId) -> Option<&ViewDef> {
        self.views.iter().find(|v| &v.id == id)
    }
}

/// Global events an app opts into. Back is on by default; Rotate must be
/// requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GlobalEvent {
    Back,
    Rotate,
}

impl GlobalEvent {
    pub fn kind(self) -> EventKind {
        match self {
            GlobalEvent::Back => EventKind::Back,
            GlobalEvent::Rotate => EventKind::Rotate,
        }
    }
}

fn default_global_events() -> BTreeSet<GlobalEvent> {
    BTreeSet::from([GlobalEvent::Back])
}

/// The app under test, fully declarative.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppSpec {
    pub name: String,
    pub entry_activity: ActivityId,
    pub activities: Vec<ActivityDef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub text_palette: Vec<String>,
    #[serde(default = "default_global_events")]
    pub global_events: BTreeSet<GlobalEvent>,
}

impl AppSpec {
    pub fn activity(&self, id: &ActivityId) -> Option<&ActivityDef> {
        self.activities.iter().find(|a| &a.id == id)
    }

    /// All labels any handler can emit. This is the label universe the
    /// model and targets are checked against.
    pub fn label_universe(&self) -> BTreeSet<LabelId> {
        self.activities
            .iter()
            .flat_map(|a| a.handlers.iter())
            .flat_map(|h| h.emits.iter().cloned())
            .collect()
    }
}

/// Events applicable to a view, exactly the checked cells of the
/// view/event table: Button, ImageView and TextView take Click, LongClick
/// and Press; RadioButton and CheckBox take Click; EditText takes Click,
/// ClearText and one TypeText per palette entry; ListView takes Click and
/// Scroll; ProgressBar takes SetValue over its declared values.
///
/// Pure in (view_type, palette, value set); the result is in canonical
/// event order.
pub fn events_for_view(view: &ViewDef, text_palette: &[String]) -> Vec<EventKind> {
    use EventKind::*;
    match view.view_type {
        ViewType::Button | ViewType::ImageView | ViewType::TextView => {
            vec![Click, LongClick, Press]
        }
        ViewType::RadioButton | ViewType::CheckBox => vec![Click],
        ViewType::EditText => {
            let mut evs = vec![Click, ClearText];
            evs.extend((0..text_palette.len() as u32).map(TypeText));
            evs
        }
        ViewType::ListView => vec![Click, Scroll],
        ViewType::ProgressBar => {
            let mut values: Vec<i64> = view.values.clone().unwrap_or_default();
            values.dedup();
            values.into_iter().map(SetValue).collect()
        }
    }
}

/// Severity of a validation finding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

/// A single validation finding with the path of the offending element.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub severity: Severity,
    pub path: String,
    pub message: String,
}

impl Issue {
    fn error(path: impl Into<String>, message: impl Into<String>) -> Self {
        Issue { severity: Severity::Error, path: path.into(), message: message.into() }
    }
    fn warning(path: impl Into<String>, message: impl Into<String>) -> Self {
        Issue { severity: Severity::Warning, path: path.into(), message: message.into() }
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{sev}: {}: {}", self.path, self.message)
    }
}

/// Failure to produce a usable [`AppSpec`] from a document.
#[derive(Debug, Error)]
pub enum SpecError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("invalid app spec: {} error(s)", issues.iter().filter(|i| i.severity == Severity::Error).count())]
    Invalid { issues: Vec<Issue> },
}

/// Parse and validate an app description document.
///
/// Returns the full list of validation errors rather than stopping at the
/// first one. Warnings alone do not fail the parse; fetch them with
/// [`validate`] if needed.
pub fn parse_app_spec(text: &str) -> Result<AppSpec, SpecError> {
    let spec: AppSpec = serde_json::from_str(text).map_err(|e| SpecError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let issues = validate(&spec);
    if issues.iter().any(|i| i.severity == Severity::Error) {
        return Err(SpecError::Invalid { issues });
    }
    Ok(spec)
}

fn check_status_entry(issues: &mut Vec<Issue>, path: &str, key: StatusKey, value: &StatusValue) {
    let ok = match key {
        k if k.expects_bool() => matches!(value, StatusValue::Bool(_)),
        StatusKey::Text => matches!(value, StatusValue::Text(_)),
        StatusKey::Value => matches!(value, StatusValue::Int(_)),
        _ => unreachable!(),
    };
    if !ok {
        issues.push(Issue::error(path, format!("status attribute `{key}` has a value of the wrong type")));
    }
}

fn check_predicate(
    issues: &mut Vec<Issue>,
    activity: &ActivityDef,
    path: &str,
    pred: &Predicate,
    payload_allowed: bool,
) {
    pred.for_each_view_ref(&mut |view| {
        if activity.view(view).is_none() {
            issues.push(Issue::error(
                path,
                format!("dangling view reference `{view}` (predicates see only sibling views)"),
            ));
        }
    });
    if !payload_allowed && pred.references_payload() {
        issues.push(Issue::error(path, "payload condition is only valid in handler guards"));
    }
    if let Predicate::Status { attr, eq, .. } = pred {
        check_status_entry(issues, path, *attr, eq);
    }
    match pred {
        Predicate::All(ps) | Predicate::Any(ps) => {
            for p in ps {
                check_predicate(issues, activity, path, p, payload_allowed);
            }
        }
        Predicate::Not(p) => check_predicate(issues, activity, path, p, payload_allowed),
        _ => {}
    }
}

fn effect_changes_state(effect: &Effect) -> bool {
    !matches!(effect, Effect::NoOp)
}

/// Check every structural invariant of a spec. An empty result means the
/// spec is valid; warnings flag suspicious but legal constructs.
pub fn validate(spec: &AppSpec) -> Vec<Issue> {
    let mut issues = Vec::new();

    if spec.activity(&spec.entry_activity).is_none() {
        issues.push(Issue::error(
            "entry_activity",
            format!("dangling activity reference `{}`", spec.entry_activity),
        ));
    }

    let mut seen_activities = BTreeSet::new();
    let all_view_ids: BTreeSet<&ViewId> =
        spec.activities.iter().flat_map(|a| a.views.iter().map(|v| &v.id)).collect();
    let has_edit_text = spec
        .activities
        .iter()
        .flat_map(|a| a.views.iter())
        .any(|v| v.view_type == ViewType::EditText);
    if has_edit_text && spec.text_palette.is_empty() {
        issues.push(Issue::error(
            "text_palette",
            "text_palette must be non-empty when an EditText view exists",
        ));
    }

    // Activities statically reachable through entry + StartActivity.
    let started: BTreeSet<&ActivityId> = spec
        .activities
        .iter()
        .flat_map(|a| a.handlers.iter())
        .flat_map(|h| h.effects.iter())
        .filter_map(|e| match e {
            Effect::StartActivity { activity } => Some(activity),
            _ => None,
        })
        .chain(std::iter::once(&spec.entry_activity))
        .collect();

    for (ai, activity) in spec.activities.iter().enumerate() {
        let apath = format!("activities[{ai}]");
        if !seen_activities.insert(&activity.id) {
            issues.push(Issue::error(&apath, format!("duplicate activity id `{}`", activity.id)));
        }
        if activity.launch_mode == LaunchMode::SingleInstance {
            issues.push(Issue::error(
                format!("{apath}.launch_mode"),
                "unsupported launch mode `SingleInstance`",
            ));
        }
        if !started.contains(&activity.id) {
            issues.push(Issue::warning(&apath, format!("activity `{}` is never started", activity.id)));
        }

        let mut seen_views = BTreeSet::new();
        for (vi, view) in activity.views.iter().enumerate() {
            let vpath = format!("{apath}.views[{vi}]");
            if !seen_views.insert(&view.id) {
                issues.push(Issue::error(&vpath, format!("duplicate view id `{}`", view.id)));
            }
            for (key, value) in &view.initial_status {
                check_status_entry(&mut issues, &format!("{vpath}.initial_status"), *key, value);
            }
            if let Some(pred) = &view.visible_if {
                check_predicate(&mut issues, activity, &format!("{vpath}.visible_if"), pred, false);
            }
            match (view.view_type, &view.values) {
                (ViewType::ProgressBar, None) => issues.push(Issue::error(
                    &vpath,
                    "ProgressBar requires a declared, finite `values` list",
                )),
                (ViewType::ProgressBar, Some(vs)) if vs.is_empty() => issues.push(Issue::error(
                    &vpath,
                    "ProgressBar `values` list must be non-empty",
                )),
                (ViewType::ProgressBar, Some(_)) => {}
                (_, Some(_)) => issues.push(Issue::error(
                    &vpath,
                    format!("`values` is only valid on ProgressBar, not {}", view.view_type),
                )),
                (_, None) => {}
            }
        }

        let mut seen_subscriptions: Vec<(&HandlerOn, String)> = Vec::new();
        for (hi, handler) in activity.handlers.iter().enumerate() {
            let hpath = format!("{apath}.handlers[{hi}]");
            match &handler.on.view {
                Some(view) => match activity.view(view) {
                    None => issues.push(Issue::error(
                        format!("{hpath}.on"),
                        format!("dangling view reference `{view}`"),
                    )),
                    Some(vdef) => {
                        if handler.on.event.is_global() {
                            issues.push(Issue::error(
                                format!("{hpath}.on"),
                                "global events cannot target a view",
                            ));
                        } else {
                            let legal = events_for_view(vdef, &spec.text_palette);
                            let applicable = legal.iter().any(|k| handler.on.event.matches(k))
                                || matches!(
                                    (&handler.on.event, vdef.view_type),
                                    (EventPattern::TypeText(_), ViewType::EditText)
                                        | (EventPattern::SetValue(_), ViewType::ProgressBar)
                                );
                            if !applicable {
                                issues.push(Issue::error(
                                    format!("{hpath}.on"),
                                    format!(
                                        "event not applicable to view type {} of `{view}`",
                                        vdef.view_type
                                    ),
                                ));
                            }
                            if let EventPattern::TypeText(Some(i)) = handler.on.event {
                                if i as usize >= spec.text_palette.len() {
                                    issues.push(Issue::error(
                                        format!("{hpath}.on"),
                                        format!("TypeText palette index {i} out of range"),
                                    ));
                                }
                            }
                            if let EventPattern::SetValue(Some(v)) = handler.on.event {
                                if !vdef.values.as_deref().unwrap_or(&[]).contains(&v) {
                                    issues.push(Issue::error(
                                        format!("{hpath}.on"),
                                        format!("SetValue payload {v} is not among the declared values"),
                                    ));
                                }
                            }
                        }
                    }
                },
                None => {
                    if !handler.on.event.is_global() {
                        issues.push(Issue::error(
                            format!("{hpath}.on"),
                            "handlers without a view must subscribe to a global event",
                        ));
                    } else {
                        let wanted = match handler.on.event {
                            EventPattern::Back => GlobalEvent::Back,
                            EventPattern::Rotate => GlobalEvent::Rotate,
                            _ => unreachable!(),
                        };
                        if !spec.global_events.contains(&wanted) {
                            issues.push(Issue::warning(
                                format!("{hpath}.on"),
                                format!("handler for {wanted:?} never fires: event not in global_events"),
                            ));
                        }
                        // Rotate must preserve the observation; label-only
                        // handlers are the one sanctioned use.
                        if handler.on.event == EventPattern::Rotate
                            && handler.effects.iter().any(effect_changes_state)
                        {
                            issues.push(Issue::error(
                                format!("{hpath}.effects"),
                                "Rotate handlers must not change state (labels only)",
                            ));
                        }
                    }
                }
            }

            if let Some(guard) = &handler.on.guard {
                check_predicate(&mut issues, activity, &format!("{hpath}.on.guard"), guard, true);
            }

            for (ei, effect) in handler.effects.iter().enumerate() {
                let epath = format!("{hpath}.effects[{ei}]");
                match effect {
                    Effect::SetStatus { view, attr, value } => {
                        if !all_view_ids.contains(view) {
                            issues.push(Issue::error(
                                &epath,
                                format!("dangling view reference `{view}`"),
                            ));
                        }
                        check_status_entry(&mut issues, &epath, *attr, value);
                    }
                    Effect::StartActivity { activity } => {
                        if spec.activity(activity).is_none() {
                            issues.push(Issue::error(
                                &epath,
                                format!("dangling activity reference `{activity}`"),
                            ));
                        }
                    }
                    Effect::Finish | Effect::Quit | Effect::NoOp => {}
                }
            }

            for (prev, ppath) in &seen_subscriptions {
                if prev.view == handler.on.view && prev.event.overlaps(&handler.on.event) {
                    if prev.guard == handler.on.guard {
                        issues.push(Issue::error(
                            &hpath,
                            format!("duplicate handler: same subscription as {ppath}"),
                        ));
                    } else if prev.guard.is_none() || handler.on.guard.is_none() {
                        issues.push(Issue::warning(
                            &hpath,
                            format!("handler may overlap {ppath}; an unguarded handler matches everything"),
                        ));
                    }
                }
            }
            seen_subscriptions.push((&handler.on, hpath));
        }
    }

    issues
}

#[cfg(test)]
mod tests {
    use super::*;

    fn view(id: &str, view_type: ViewType) -> ViewDef {
        ViewDef {
            id: id.into(),
            view_type,
            position: Position(0, 0),
            initial_status: BTreeMap::new(),
            visible_if: None,
            values: None,
        }
    }

    fn one_button_spec() -> AppSpec {
        AppSpec {
            name: "one_button".into(),
            entry_activity: "Main".into(),
            activities: vec![ActivityDef {
                id: "Main".into(),
                launch_mode: LaunchMode::Standard,
                views: vec![view("btn", ViewType::Button)],
                handlers: vec![EventHandler {
                    on: HandlerOn { view: Some("btn".into()), event: EventPattern::Click, guard: None },
                    effects: vec![Effect::NoOp],
                    emits: BTreeSet::new(),
                }],
            }],
            text_palette: vec![],
            global_events: default_global_events(),
        }
    }

    #[test]
    fn minimal_spec_parses() {
        let text = r#"{
            "name": "one_button",
            "entry_activity": "Main",
            "activities": [
                {
                    "id": "Main",
                    "views": [{"id": "btn", "view_type": "Button", "position": [0, 0]}],
                    "handlers": [{"on": {"view": "btn", "event": "Click"}, "effects": ["NoOp"]}]
                }
            ]
        }"#;
        let spec = parse_app_spec(text).unwrap();
        assert_eq!(spec.activities.len(), 1);
        assert_eq!(spec.activities[0].views.len(), 1);
        assert_eq!(spec.global_events, default_global_events());
    }

    #[test]
    fn single_instance_rejected() {
        let text = r#"{
            "name": "bad",
            "entry_activity": "Main",
            "activities": [{"id": "Main", "launch_mode": "SingleInstance", "views": []}]
        }"#;
        match parse_app_spec(text) {
            Err(SpecError::Invalid { issues }) => {
                assert!(issues.iter().any(|i| i.message.contains("unsupported launch mode")));
            }
            other => panic!("expected validation failure, got {other:?}"),
        }
    }

    #[test]
    fn syntax_error_carries_position() {
        match parse_app_spec("{ \"name\": ") {
            Err(SpecError::Syntax { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn table_rows_are_exact() {
        use EventKind::*;
        let palette = vec!["a".to_string(), "bb".to_string()];
        let mut pbar = view("p", ViewType::ProgressBar);
        pbar.values = Some(vec![0, 5, 10]);
        let cases: Vec<(ViewDef, Vec<EventKind>)> = vec![
            (view("v", ViewType::Button), vec![Click, LongClick, Press]),
            (view("v", ViewType::RadioButton), vec![Click]),
            (view("v", ViewType::CheckBox), vec![Click]),
            (view("v", ViewType::ImageView), vec![Click, LongClick, Press]),
            (view("v", ViewType::TextView), vec![Click, LongClick, Press]),
            (view("v", ViewType::EditText), vec![Click, ClearText, TypeText(0), TypeText(1)]),
            (view("v", ViewType::ListView), vec![Click, Scroll]),
            (pbar, vec![SetValue(0), SetValue(5), SetValue(10)]),
        ];
        assert_eq!(cases.len(), 8);
        for (v, expected) in cases {
            assert_eq!(events_for_view(&v, &palette), expected, "row {:?}", v.view_type);
            // pure function: same inputs, same output
            assert_eq!(events_for_view(&v, &palette), expected);
        }
    }

    #[test]
    fn scroll_on_button_flagged() {
        let mut spec = one_button_spec();
        spec.activities[0].handlers.push(EventHandler {
            on: HandlerOn { view: Some("btn".into()), event: EventPattern::Scroll, guard: None },
            effects: vec![],
            emits: BTreeSet::new(),
        });
        let issues = validate(&spec);
        assert!(issues.iter().any(|i| i.message.contains("event not applicable")), "{issues:?}");
    }

    #[test]
    fn dangling_entry_flagged() {
        let mut spec = one_button_spec();
        spec.entry_activity = "Missing".into();
        let issues = validate(&spec);
        assert!(issues
            .iter()
            .any(|i| i.severity == Severity::Error && i.message.contains("dangling activity reference")));
    }

    #[test]
    fn valid_spec_yields_no_errors() {
        let issues = validate(&one_button_spec());
        assert!(issues.iter().all(|i| i.severity != Severity::Error), "{issues:?}");
    }

    #[test]
    fn edit_text_requires_palette() {
        let mut spec = one_button_spec();
        spec.activities[0].views.push(view("field", ViewType::EditText));
        let issues = validate(&spec);
        assert!(issues.iter().any(|i| i.path == "text_palette"));
    }

    #[test]
    fn duplicate_handler_flagged() {
        let mut spec = one_button_spec();
        let dup = spec.activities[0].handlers[0].clone();
        spec.activities[0].handlers.push(dup);
        let issues = validate(&spec);
        assert!(issues.iter().any(|i| i.message.contains("duplicate handler")));
    }

    #[test]
    fn rotate_handler_must_not_mutate() {
        let mut spec = one_button_spec();
        spec.global_events.insert(GlobalEvent::Rotate);
        spec.activities[0].handlers.push(EventHandler {
            on: HandlerOn { view: None, event: EventPattern::Rotate, guard: None },
            effects: vec![Effect::Finish],
            emits: BTreeSet::new(),
        });
        let issues = validate(&spec);
        assert!(issues.iter().any(|i| i.message.contains("Rotate handlers must not change state")));
    }

    #[test]
    fn serialize_roundtrip_is_identity() {
        let spec = one_button_spec();
        let text = serde_json::to_string_pretty(&spec).unwrap();
        let back = parse_app_spec(&text).unwrap();
        assert_eq!(spec, back);
    }
}
