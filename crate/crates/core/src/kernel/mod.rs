//! Simulation clock, future event list and the event lifecycle.
//!
//! The future event list is a binary heap keyed by [`ScheduleKey`]:
//! `(time, priority, event id)` in lexicographic order. Smaller priorities
//! run first at equal times; the creation-ordered event id breaks the
//! remaining ties, so the processing order is a total order and runs are
//! reproducible.

mod condition;
mod event;
mod value;

use std::cell::RefCell;
use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};
use std::ops::Deref;
use std::rc::Rc;

pub use condition::ConditionValue;
pub use event::{Event, EventId, EventState};
pub use value::{Outcome, Payload, Value};

pub(crate) use event::Callback;

use crate::error::{invalid, Result, SimError};
use crate::process::{ProcessId, ProcessSlot};
use crate::stats::Rng;
use condition::ConditionKind;

/// Simulation time in abstract units.
pub type SimTime = f64;

/// Priority of process starts and interrupt deliveries.
pub const URGENT: i32 = 0;
/// Default priority of timeouts and succeeded/failed events.
pub const NORMAL: i32 = 1;

/// Ordering key of an entry in the future event list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleKey {
    pub time: SimTime,
    pub priority: i32,
    pub sequence: EventId,
}

impl Eq for ScheduleKey {}

impl Ord for ScheduleKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.priority.cmp(&other.priority))
            .then(self.sequence.cmp(&other.sequence))
    }
}

impl PartialOrd for ScheduleKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Entry {
    key: ScheduleKey,
    event: Event,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.cmp(&other.key)
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// How a call to [`Env::run`] ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunOutcome {
    /// The future event list drained; `now` is the time of the last event.
    Exhausted { now: SimTime },
    /// The next entry lies beyond the horizon; `now` equals the horizon.
    ReachedHorizon { now: SimTime },
}

impl RunOutcome {
    pub fn now(&self) -> SimTime {
        match *self {
            RunOutcome::Exhausted { now } | RunOutcome::ReachedHorizon { now } => now,
        }
    }

    pub fn is_exhausted(&self) -> bool {
        matches!(self, RunOutcome::Exhausted { .. })
    }
}

struct Clock {
    now: SimTime,
    queue: BinaryHeap<Reverse<Entry>>,
    next_event: EventId,
    next_process: ProcessId,
    next_resource: usize,
    last_key: Option<ScheduleKey>,
    processed: u64,
}

pub(crate) struct Inner {
    clock: RefCell<Clock>,
    rng: RefCell<Rng>,
    pub(crate) processes: RefCell<HashMap<ProcessId, ProcessSlot>>,
    contract_error: RefCell<Option<SimError>>,
}

/// Cloneable handle to a simulation environment.
///
/// Process bodies, resources and containers hold one of these. The
/// environment itself is owned by an [`Environment`].
#[derive(Clone)]
pub struct Env {
    pub(crate) inner: Rc<Inner>,
}

/// Owner of a simulation environment.
///
/// Dropping it tears down every process body still suspended in the
/// environment, which breaks the reference cycles between bodies and the
/// handles they capture.
pub struct Environment {
    env: Env,
}

impl Environment {
    pub fn new(seed: u64) -> Self {
        let inner = Inner {
            clock: RefCell::new(Clock {
                now: 0.0,
                queue: BinaryHeap::new(),
                next_event: 0,
                next_process: 0,
                next_resource: 0,
                last_key: None,
                processed: 0,
            }),
            rng: RefCell::new(Rng::seed_from(seed)),
            processes: RefCell::new(HashMap::new()),
            contract_error: RefCell::new(None),
        };
        Environment {
            env: Env {
                inner: Rc::new(inner),
            },
        }
    }

    pub fn handle(&self) -> Env {
        self.env.clone()
    }
}

impl Deref for Environment {
    type Target = Env;

    fn deref(&self) -> &Env {
        &self.env
    }
}

impl Drop for Environment {
    fn drop(&mut self) {
        let processes = std::mem::take(&mut *self.env.inner.processes.borrow_mut());
        let queue = std::mem::take(&mut self.env.inner.clock.borrow_mut().queue);
        drop(processes);
        drop(queue);
    }
}

impl std::fmt::Debug for Env {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Env")
            .field("now", &self.now())
            .field("queued", &self.queue_len())
            .finish()
    }
}

impl Env {
    pub fn now(&self) -> SimTime {
        self.inner.clock.borrow().now
    }

    /// A fresh pending event.
    pub fn event(&self) -> Event {
        let id = {
            let mut clock = self.inner.clock.borrow_mut();
            let id = clock.next_event;
            clock.next_event += 1;
            id
        };
        Event::new(id, Rc::downgrade(&self.inner))
    }

    /// Event that succeeds `delay` time units from now.
    ///
    /// # Panics
    ///
    /// If `delay` is negative or not finite; see [`Env::try_timeout`].
    pub fn timeout(&self, delay: f64) -> Event {
        match self.try_timeout(delay) {
            Ok(ev) => ev,
            Err(e) => panic!("{e}"),
        }
    }

    pub fn try_timeout(&self, delay: f64) -> Result<Event> {
        check_delay(delay)?;
        let ev = self.event();
        self.trigger(&ev, Outcome::Success(Value::empty()), NORMAL, delay)?;
        Ok(ev)
    }

    /// Put a pending event on the future event list at `now + delay`.
    /// The event succeeds with an empty value.
    pub fn schedule(&self, event: &Event, priority: i32, delay: f64) -> Result<()> {
        check_delay(delay)?;
        if !event.same_env(self) {
            return Err(SimError::ForeignEvent(event.id()));
        }
        self.trigger(event, Outcome::Success(Value::empty()), priority, delay)
    }

    /// Composite event processed when the first constituent is processed.
    pub fn any_of(&self, events: &[Event]) -> Result<Event> {
        condition::compose(self, ConditionKind::Any, events)
    }

    /// Composite event processed when every constituent has been processed.
    pub fn all_of(&self, events: &[Event]) -> Result<Event> {
        condition::compose(self, ConditionKind::All, events)
    }

    pub(crate) fn trigger(
        &self,
        event: &Event,
        outcome: Outcome,
        priority: i32,
        delay: f64,
    ) -> Result<()> {
        if !event.is_pending() {
            return Err(SimError::Lifecycle {
                event: event.id(),
                state: event.state(),
                expected: "a pending event",
            });
        }
        *event.0.outcome.borrow_mut() = Some(outcome);
        event.0.state.set(EventState::Triggered);
        let mut clock = self.inner.clock.borrow_mut();
        let key = ScheduleKey {
            time: clock.now + delay,
            priority,
            sequence: event.id(),
        };
        clock.queue.push(Reverse(Entry {
            key,
            event: event.clone(),
        }));
        Ok(())
    }

    /// Process the next entry of the future event list.
    ///
    /// Returns `Ok(false)` when the list is empty.
    pub fn step(&self) -> Result<bool> {
        self.take_contract_error()?;
        let entry = {
            let mut clock = self.inner.clock.borrow_mut();
            let Some(Reverse(entry)) = clock.queue.pop() else {
                return Ok(false);
            };
            debug_assert!(entry.key.time >= clock.now);
            clock.now = entry.key.time;
            clock.last_key = Some(entry.key);
            clock.processed += 1;
            entry
        };
        let event = entry.event;
        event.0.state.set(EventState::Processed);
        let callbacks = std::mem::take(&mut *event.0.callbacks.borrow_mut());
        let outcome = event
            .outcome()
            .expect("a scheduled event always carries an outcome");

        if let Outcome::Failure(cause) = &outcome {
            if callbacks.is_empty() {
                let origin = event
                    .0
                    .origin
                    .borrow()
                    .clone()
                    .unwrap_or_else(|| format!("event {}", event.id()));
                return Err(SimError::UnhandledFailure {
                    origin,
                    cause: format!("{cause:?}"),
                });
            }
        }

        for cb in callbacks {
            match cb {
                Callback::Resume(pid) => self.resume(pid)?,
                Callback::Interrupt(pid) => self.deliver_interrupt(pid, outcome.value().clone())?,
                Callback::Condition(cond) => cond.notify(self, &event)?,
                Callback::User(f) => f(self, &outcome),
            }
        }
        self.take_contract_error()?;
        Ok(true)
    }

    /// Step until the future event list drains or the next entry lies
    /// beyond `until`. Entries scheduled exactly at `until` are processed.
    pub fn run(&self, until: Option<SimTime>) -> Result<RunOutcome> {
        if let Some(t) = until {
            if !t.is_finite() || t < self.now() {
                return Err(invalid(format!(
                    "horizon {t} must be finite and not before now={}",
                    self.now()
                )));
            }
        }
        loop {
            if let Some(t) = until {
                match self.peek_time() {
                    None => return Ok(RunOutcome::Exhausted { now: self.now() }),
                    Some(next) if next <= t => {}
                    Some(_) => {
                        self.inner.clock.borrow_mut().now = t;
                        return Ok(RunOutcome::ReachedHorizon { now: t });
                    }
                }
            }
            if !self.step()? {
                return Ok(RunOutcome::Exhausted { now: self.now() });
            }
        }
    }

    /// Time of the next entry in the future event list.
    pub fn peek_time(&self) -> Option<SimTime> {
        self.inner.clock.borrow().queue.peek().map(|e| e.0.key.time)
    }

    pub fn queue_len(&self) -> usize {
        self.inner.clock.borrow().queue.len()
    }

    /// Key of the most recently processed entry.
    pub fn last_key(&self) -> Option<ScheduleKey> {
        self.inner.clock.borrow().last_key
    }

    pub fn processed_count(&self) -> u64 {
        self.inner.clock.borrow().processed
    }

    /// Exponential variate with the given mean, from the environment RNG.
    pub fn expovariate(&self, mean: f64) -> f64 {
        self.inner.rng.borrow_mut().expovariate(mean)
    }

    /// Uniform integer in `0..bound`.
    pub fn below(&self, bound: u64) -> u64 {
        self.inner.rng.borrow_mut().below(bound)
    }

    pub fn uniform(&self) -> f64 {
        self.inner.rng.borrow_mut().uniform()
    }

    pub(crate) fn next_process_id(&self) -> ProcessId {
        let mut clock = self.inner.clock.borrow_mut();
        let id = clock.next_process;
        clock.next_process += 1;
        id
    }

    pub(crate) fn next_resource_index(&self) -> usize {
        let mut clock = self.inner.clock.borrow_mut();
        let id = clock.next_resource;
        clock.next_resource += 1;
        id
    }

    pub(crate) fn set_contract_error(&self, err: SimError) {
        self.inner.contract_error.borrow_mut().get_or_insert(err);
    }

    fn take_contract_error(&self) -> Result<()> {
        match self.inner.contract_error.borrow_mut().take() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    pub fn ptr_eq(&self, other: &Env) -> bool {
        Rc::ptr_eq(&self.inner, &other.inner)
    }
}

fn check_delay(delay: f64) -> Result<()> {
    if delay.is_finite() && delay >= 0.0 {
        Ok(())
    } else {
        Err(invalid(format!(
            "delay {delay} must be finite and nonnegative"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::RefCell;

    #[test]
    fn fresh_environment() {
        let env = Environment::new(0);
        assert_eq!(env.now(), 0.0);
        assert_eq!(env.queue_len(), 0);
        assert!(!env.step().unwrap());
        assert_eq!(env.now(), 0.0);
    }

    #[test]
    fn seeds_drive_the_stream() {
        let a = Environment::new(42);
        let b = Environment::new(42);
        let xs: Vec<f64> = (0..5).map(|_| a.expovariate(10.0)).collect();
        let ys: Vec<f64> = (0..5).map(|_| b.expovariate(10.0)).collect();
        assert_eq!(xs, ys);
        let c = Environment::new(1);
        let d = Environment::new(2);
        assert_ne!(c.expovariate(10.0), d.expovariate(10.0));
    }

    #[test]
    fn single_timeout_advances_clock() {
        let env = Environment::new(0);
        let t = env.timeout(3.0);
        assert!(t.is_triggered() && !t.is_processed());
        assert!(env.step().unwrap());
        assert_eq!(env.now(), 3.0);
        assert!(t.is_processed());
        assert!(!env.step().unwrap());
    }

    #[test]
    fn timeout_rejects_bad_delays() {
        let env = Environment::new(0);
        assert!(env.try_timeout(-1.0).is_err());
        assert!(env.try_timeout(f64::NAN).is_err());
        assert!(env.try_timeout(f64::INFINITY).is_err());
    }

    #[test]
    fn hand_traced_timeout_time() {
        let env = Environment::new(0);
        let first = env.timeout(0.1084);
        env.step().unwrap();
        assert!(first.is_processed());
        env.timeout(1.0);
        env.step().unwrap();
        assert_eq!(env.now(), 0.1084 + 1.0);
        assert_eq!(env.now(), 1.1084);
    }

    #[test]
    fn priority_and_sequence_break_ties() {
        let env = Environment::new(0);
        let order = Rc::new(RefCell::new(Vec::new()));
        let a = env.event();
        let b = env.event();
        let urgent = env.event();
        for (ev, tag) in [(&a, "a"), (&b, "b"), (&urgent, "urgent")] {
            let order = order.clone();
            ev.add_callback(move |_, _| order.borrow_mut().push(tag))
                .unwrap();
        }
        // b scheduled before a, but a was created first.
        env.schedule(&b, NORMAL, 0.0).unwrap();
        env.schedule(&a, NORMAL, 0.0).unwrap();
        env.schedule(&urgent, URGENT, 0.0).unwrap();
        env.run(None).unwrap();
        assert_eq!(*order.borrow(), ["urgent", "a", "b"]);
    }

    #[test]
    fn scheduling_twice_is_a_lifecycle_error() {
        let env = Environment::new(0);
        let ev = env.event();
        env.schedule(&ev, NORMAL, 1.0).unwrap();
        assert!(matches!(
            env.schedule(&ev, NORMAL, 1.0),
            Err(SimError::Lifecycle { .. })
        ));
        env.run(None).unwrap();
        assert!(env.schedule(&ev, NORMAL, 0.0).is_err());
    }

    #[test]
    fn succeed_is_one_shot() {
        let env = Environment::new(0);
        let ev = env.event();
        ev.succeed(Value::new(1)).unwrap();
        assert!(ev.succeed(Value::empty()).is_err());
        assert!(ev.fail(Value::empty()).is_err());
    }

    #[test]
    fn callbacks_fire_once_in_order() {
        let env = Environment::new(0);
        let log = Rc::new(RefCell::new(Vec::new()));
        let t = env.timeout(5.0);
        for i in 0..2 {
            let log = log.clone();
            t.add_callback(move |env, outcome| {
                assert!(outcome.is_success());
                log.borrow_mut().push((i, env.now()));
            })
            .unwrap();
        }
        assert_eq!(t.callback_count(), 2);
        env.run(None).unwrap();
        assert_eq!(*log.borrow(), [(0, 5.0), (1, 5.0)]);
        assert!(t.add_callback(|_, _| {}).is_err());
    }

    #[test]
    fn failure_without_handler_aborts_run() {
        let env = Environment::new(0);
        let ev = env.event();
        ev.fail(Value::new("boom")).unwrap();
        let err = env.run(None).unwrap_err();
        assert!(
            matches!(err, SimError::UnhandledFailure { ref cause, .. } if cause.contains("boom"))
        );
    }

    #[test]
    fn horizon_is_closed() {
        let env = Environment::new(0);
        let at = env.timeout(10.0);
        let after = env.timeout(10.5);
        let out = env.run(Some(10.0)).unwrap();
        assert_eq!(out, RunOutcome::ReachedHorizon { now: 10.0 });
        assert!(at.is_processed());
        assert!(!after.is_processed());
        assert!(env.run(Some(5.0)).is_err());
    }

    #[test]
    fn run_until_zero_on_fresh_env() {
        let env = Environment::new(0);
        let zero = env.timeout(0.0);
        let later = env.timeout(1.0);
        assert_eq!(
            env.run(Some(0.0)).unwrap(),
            RunOutcome::ReachedHorizon { now: 0.0 }
        );
        assert!(zero.is_processed() && !later.is_processed());
    }

    #[test]
    fn run_to_exhaustion() {
        let env = Environment::new(0);
        env.timeout(2.0);
        env.timeout(7.0);
        assert_eq!(env.run(None).unwrap(), RunOutcome::Exhausted { now: 7.0 });
    }

    #[test]
    fn all_of_waits_for_the_last() {
        let env = Environment::new(0);
        let both = env.all_of(&[env.timeout(1.0), env.timeout(2.0)]).unwrap();
        env.run(None).unwrap();
        assert!(both.is_processed());
        assert_eq!(env.now(), 2.0);
        let Some(Outcome::Success(v)) = both.outcome() else {
            panic!()
        };
        assert_eq!(v.downcast_ref::<ConditionValue>().unwrap().len(), 2);
    }

    #[test]
    fn any_of_reports_the_winner() {
        let env = Environment::new(0);
        let slow = env.timeout(75.0);
        let never = env.event();
        let race = env.any_of(&[never.clone(), slow.clone()]).unwrap();
        let when = Rc::new(RefCell::new(None));
        let w = when.clone();
        race.add_callback(move |env, _| *w.borrow_mut() = Some(env.now()))
            .unwrap();
        env.run(None).unwrap();
        assert_eq!(*when.borrow(), Some(75.0));
        assert!(!never.is_processed());
        let Some(Outcome::Success(v)) = race.outcome() else {
            panic!()
        };
        let cv = v.downcast_ref::<ConditionValue>().unwrap();
        assert!(cv.contains(&slow) && !cv.contains(&never));
    }

    #[test]
    fn failed_constituent_fails_composite() {
        let env = Environment::new(0);
        let bad = env.event();
        let race = env.any_of(&[bad.clone(), env.timeout(5.0)]).unwrap();
        let seen = Rc::new(RefCell::new(None));
        let s = seen.clone();
        race.add_callback(move |_, o| *s.borrow_mut() = Some(o.is_success()))
            .unwrap();
        bad.fail(Value::new("nope")).unwrap();
        env.run(None).unwrap();
        assert_eq!(*seen.borrow(), Some(false));
    }

    #[test]
    fn empty_condition_is_rejected() {
        let env = Environment::new(0);
        assert!(env.any_of(&[]).is_err());
        assert!(env.all_of(&[]).is_err());
    }

    #[test]
    fn foreign_events_are_rejected() {
        let env = Environment::new(0);
        let other = Environment::new(0);
        let ev = other.event();
        assert_eq!(
            env.any_of(std::slice::from_ref(&ev)).unwrap_err(),
            SimError::ForeignEvent(ev.id())
        );
        assert!(env.schedule(&ev, NORMAL, 0.0).is_err());
    }

    #[test]
    fn condition_over_processed_event_triggers_at_once() {
        let env = Environment::new(0);
        let t = env.timeout(1.0);
        env.run(None).unwrap();
        let c = env.any_of(&[t]).unwrap();
        assert!(c.is_triggered());
        env.run(None).unwrap();
        assert!(c.is_processed());
        assert_eq!(env.now(), 1.0);
    }
}
