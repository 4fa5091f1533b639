//! Pure back-stack evolution under the Standard, SingleTop and SingleTask
//! launch modes.
//!
//! The stack is a bottom-to-top list of activity instances and is only
//! ever rearranged by push and pop. An empty stack is the terminal
//! condition; callers interpret it as the app having quit.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::app_spec::{ActivityId, LaunchMode};

/// One live activity instance. The serial number distinguishes multiple
/// Standard instances of the same activity so each can keep its own view
/// statuses.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ActivityInstanceRef {
    pub activity: ActivityId,
    pub serial: u32,
}

impl fmt::Display for ActivityInstanceRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.activity, self.serial)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StackError {
    #[error("cannot pop an empty back stack")]
    EmptyStack,
}

/// Bottom-to-top list of live activity instances.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackStack {
    entries: Vec<ActivityInstanceRef>,
}

impl BackStack {
    pub fn new() -> Self {
        BackStack { entries: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn top(&self) -> Option<&ActivityInstanceRef> {
        self.entries.last()
    }

    pub fn entries(&self) -> &[ActivityInstanceRef] {
        &self.entries
    }

    /// Activity ids bottom-to-top; the stack component of a model state.
    pub fn activity_ids(&self) -> Vec<ActivityId> {
        self.entries.iter().map(|e| e.activity.clone()).collect()
    }

    /// Launch `activity` on top of this stack.
    ///
    /// Standard always pushes a fresh instance. SingleTop suppresses the
    /// push when the same activity is already on top. SingleTask pops
    /// everything above an existing instance and resumes it (keeping its
    /// serial, and with it the instance statuses), or pushes a fresh
    /// instance when none exists.
    ///
    /// `next_serial` is consumed only when a new instance is created,
    /// which is exactly when the returned flag is `true`.
    pub fn push_for_launch(
        &self,
        activity: &ActivityId,
        mode: LaunchMode,
        next_serial: u32,
    ) -> (BackStack, bool) {
        let fresh = ActivityInstanceRef { activity: activity.clone(), serial: next_serial };
        let mut entries = self.entries.clone();
        match mode {
            LaunchMode::Standard => {
                entries.push(fresh);
                (BackStack { entries }, true)
            }
            LaunchMode::SingleTop => {
                if self.top().map(|t| &t.activity) == Some(activity) {
                    (self.clone(), false)
                } else {
                    entries.push(fresh);
                    (BackStack { entries }, true)
                }
            }
            LaunchMode::SingleTask => {
                match entries.iter().position(|e| &e.activity == activity) {
                    Some(idx) => {
                        entries.truncate(idx + 1);
                        (BackStack { entries }, false)
                    }
                    None => {
                        entries.push(fresh);
                        (BackStack { entries }, true)
                    }
                }
            }
            // Rejected at spec validation; unreachable in a validated app.
            LaunchMode::SingleInstance => unreachable!("SingleInstance is not supported"),
        }
    }

    /// Remove the top instance; the previous activity resumes. Popping the
    /// last instance leaves the empty stack the caller treats as terminal.
    pub fn pop_back(&self) -> Result<BackStack, StackError> {
        if self.entries.is_empty() {
            return Err(StackError::EmptyStack);
        }
        let mut entries = self.entries.clone();
        entries.pop();
        Ok(BackStack { entries })
    }

    /// An explicit Finish effect; identical semantics to [`pop_back`].
    ///
    /// [`pop_back`]: BackStack::pop_back
    pub fn finish_top(&self) -> Result<BackStack, StackError> {
        self.pop_back()
    }
}

impl FromIterator<ActivityInstanceRef> for BackStack {
    fn from_iter<T: IntoIterator<Item = ActivityInstanceRef>>(iter: T) -> Self {
        BackStack { entries: iter.into_iter().collect() }
    }
}

impl fmt::Display for BackStack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, e) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}", e.activity)?;
        }
        write!(f, "]")
    }
}
