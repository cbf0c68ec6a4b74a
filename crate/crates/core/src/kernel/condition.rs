use std::cell::RefCell;
use std::rc::Rc;

use super::event::{Callback, Event, EventId};
use super::value::{Outcome, Value};
use super::{Env, NORMAL};
use crate::error::{invalid, Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ConditionKind {
    Any,
    All,
}

/// Value of a processed `any_of` / `all_of` event: the constituents that
/// had been processed successfully when the composite triggered.
#[derive(Debug, Clone, Default)]
pub struct ConditionValue {
    entries: Vec<(EventId, Value)>,
}

impl ConditionValue {
    pub fn contains(&self, event: &Event) -> bool {
        self.entries.iter().any(|(id, _)| *id == event.id())
    }

    pub fn get(&self, event: &Event) -> Option<&Value> {
        self.entries
            .iter()
            .find(|(id, _)| *id == event.id())
            .map(|(_, v)| v)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = EventId> + '_ {
        self.entries.iter().map(|(id, _)| *id)
    }
}

pub(crate) struct Condition {
    kind: ConditionKind,
    composite: Event,
    ids: Vec<EventId>,
    outcomes: RefCell<Vec<Option<Outcome>>>,
}

impl Condition {
    fn record(&self, event: &Event) {
        let Some(outcome) = event.outcome() else {
            return;
        };
        let mut outcomes = self.outcomes.borrow_mut();
        for (slot, id) in outcomes.iter_mut().zip(&self.ids) {
            if *id == event.id() {
                *slot = Some(outcome.clone());
            }
        }
    }

    fn settled(&self) -> bool {
        let outcomes = self.outcomes.borrow();
        match self.kind {
            ConditionKind::Any => outcomes.iter().any(Option::is_some),
            ConditionKind::All => outcomes.iter().all(Option::is_some),
        }
    }

    fn snapshot(&self) -> ConditionValue {
        let outcomes = self.outcomes.borrow();
        let mut entries: Vec<(EventId, Value)> = Vec::new();
        for (id, outcome) in self.ids.iter().zip(outcomes.iter()) {
            if let Some(Outcome::Success(v)) = outcome {
                if !entries.iter().any(|(seen, _)| seen == id) {
                    entries.push((*id, v.clone()));
                }
            }
        }
        ConditionValue { entries }
    }

    pub(crate) fn notify(&self, env: &Env, processed: &Event) -> Result<()> {
        self.record(processed);
        if !self.composite.is_pending() {
            return Ok(());
        }
        if let Some(Outcome::Failure(cause)) = processed.outcome() {
            return env.trigger(&self.composite, Outcome::Failure(cause), NORMAL, 0.0);
        }
        if self.settled() {
            let value = Value::new(self.snapshot());
            env.trigger(&self.composite, Outcome::Success(value), NORMAL, 0.0)?;
        }
        Ok(())
    }
}

pub(crate) fn compose(env: &Env, kind: ConditionKind, events: &[Event]) -> Result<Event> {
    if events.is_empty() {
        return Err(invalid("condition over an empty event list"));
    }
    if let Some(foreign) = events.iter().find(|e| !e.same_env(env)) {
        return Err(SimError::ForeignEvent(foreign.id()));
    }
    let composite = env.event();
    let condition = Rc::new(Condition {
        kind,
        composite: composite.clone(),
        ids: events.iter().map(Event::id).collect(),
        outcomes: RefCell::new(vec![None; events.len()]),
    });
    for e in events.iter().filter(|e| e.is_processed()) {
        condition.record(e);
    }

    // Constituents processed before composition count immediately.
    if let Some(done) = events.iter().find(|e| e.is_processed()) {
        let failed = events
            .iter()
            .find(|e| e.is_processed() && !e.outcome().is_some_and(|o| o.is_success()));
        condition.notify(env, failed.unwrap_or(done))?;
    }
    if composite.is_pending() {
        for e in events.iter().filter(|e| !e.is_processed()) {
            e.push_callback(Callback::Condition(condition.clone()))?;
        }
    }
    Ok(composite)
}
