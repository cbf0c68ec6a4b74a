use std::cell::{Cell, RefCell};
use std::fmt;
use std::rc::{Rc, Weak};

use super::condition::Condition;
use super::value::{Outcome, Value};
use super::{Env, Inner, NORMAL};
use crate::error::{Result, SimError};
use crate::process::ProcessId;

/// Identifier assigned to events in creation order.
pub type EventId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventState {
    Pending,
    Triggered,
    Processed,
}

pub(crate) type UserCallback = Box<dyn FnOnce(&Env, &Outcome)>;

pub(crate) enum Callback {
    /// Default callback: resume the process suspended on this event.
    Resume(ProcessId),
    /// Deliver the event value as an interrupt to the process.
    Interrupt(ProcessId),
    Condition(Rc<Condition>),
    User(UserCallback),
}

pub(crate) struct EventCell {
    pub(crate) id: EventId,
    pub(crate) env: Weak<Inner>,
    pub(crate) state: Cell<EventState>,
    pub(crate) outcome: RefCell<Option<Outcome>>,
    pub(crate) callbacks: RefCell<Vec<Callback>>,
    /// Name of the process whose completion this event reports.
    pub(crate) origin: RefCell<Option<String>>,
}

/// Handle to a one-shot simulation event.
///
/// An event starts `Pending`, becomes `Triggered` once it has an outcome
/// and a place in the future event list, and is `Processed` when the
/// kernel pops it and fires its callbacks.
#[derive(Clone)]
pub struct Event(pub(crate) Rc<EventCell>);

impl Event {
    pub(crate) fn new(id: EventId, env: Weak<Inner>) -> Self {
        Event(Rc::new(EventCell {
            id,
            env,
            state: Cell::new(EventState::Pending),
            outcome: RefCell::new(None),
            callbacks: RefCell::new(Vec::new()),
            origin: RefCell::new(None),
        }))
    }

    pub fn id(&self) -> EventId {
        self.0.id
    }

    pub fn state(&self) -> EventState {
        self.0.state.get()
    }

    pub fn is_pending(&self) -> bool {
        self.state() == EventState::Pending
    }

    pub fn is_triggered(&self) -> bool {
        self.state() != EventState::Pending
    }

    pub fn is_processed(&self) -> bool {
        self.state() == EventState::Processed
    }

    /// Outcome, once triggered.
    pub fn outcome(&self) -> Option<Outcome> {
        self.0.outcome.borrow().clone()
    }

    pub fn same_env(&self, env: &Env) -> bool {
        std::ptr::eq(self.0.env.as_ptr(), Rc::as_ptr(&env.inner))
    }

    fn env(&self) -> Result<Env> {
        self.0
            .env
            .upgrade()
            .map(|inner| Env { inner })
            .ok_or_else(|| SimError::Usage("environment has been dropped".into()))
    }

    /// Trigger with a success value; processed at the current time.
    pub fn succeed(&self, value: Value) -> Result<()> {
        self.env()?
            .trigger(self, Outcome::Success(value), NORMAL, 0.0)
    }

    /// Trigger with a failure cause; processed at the current time.
    pub fn fail(&self, cause: Value) -> Result<()> {
        self.env()?
            .trigger(self, Outcome::Failure(cause), NORMAL, 0.0)
    }

    /// Register a callback run with the outcome when this event is processed.
    pub fn add_callback<F>(&self, callback: F) -> Result<()>
    where
        F: FnOnce(&Env, &Outcome) + 'static,
    {
        self.push_callback(Callback::User(Box::new(callback)))
    }

    pub fn callback_count(&self) -> usize {
        self.0.callbacks.borrow().len()
    }

    pub(crate) fn push_callback(&self, cb: Callback) -> Result<()> {
        if self.is_processed() {
            return Err(SimError::Lifecycle {
                event: self.id(),
                state: EventState::Processed,
                expected: "an unprocessed event",
            });
        }
        self.0.callbacks.borrow_mut().push(cb);
        Ok(())
    }

    pub(crate) fn remove_resume(&self, pid: ProcessId) {
        self.0
            .callbacks
            .borrow_mut()
            .retain(|cb| !matches!(cb, Callback::Resume(p) if *p == pid));
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        Rc::ptr_eq(&self.0, &other.0)
    }
}

impl Eq for Event {}

impl fmt::Debug for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Event#{}({:?})", self.id(), self.state())
    }
}
