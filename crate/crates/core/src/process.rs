//! Resumable processes.
//!
//! A process body is an `async` block returning `Result<T, Fault>`. Inside
//! the body, awaiting an [`Event`] (or a [`Process`], or a resource
//! request) suspends the process until the kernel processes that event.
//! The kernel polls bodies itself, one at a time, so a body runs without
//! interleaving until its next suspension point.

use std::any::Any;
use std::cell::RefCell;
use std::collections::VecDeque;
use std::fmt;
use std::future::{Future, IntoFuture};
use std::marker::PhantomData;
use std::pin::Pin;
use std::task::{Context, Poll, Waker};

use crate::error::{Result, SimError};
use crate::kernel::{Callback, Env, Event, Outcome, Value, NORMAL, URGENT};

pub type ProcessId = u64;

type Body = Pin<Box<dyn Future<Output = std::result::Result<Value, Value>>>>;

/// Why an awaited event did not deliver a success value.
#[derive(Debug, Clone)]
pub enum Fault {
    /// The awaited event failed with this cause.
    Failed(Value),
    /// Another process interrupted the wait.
    Interrupted(Value),
}

impl Fault {
    /// Failure carrying `payload`; returning it from a body fails the process.
    pub fn failed<T: Any + fmt::Debug>(payload: T) -> Self {
        Fault::Failed(Value::new(payload))
    }

    pub fn cause(&self) -> &Value {
        match self {
            Fault::Failed(v) | Fault::Interrupted(v) => v,
        }
    }

    pub fn into_cause(self) -> Value {
        match self {
            Fault::Failed(v) | Fault::Interrupted(v) => v,
        }
    }
}

impl From<SimError> for Fault {
    fn from(err: SimError) -> Self {
        Fault::Failed(Value::new(err))
    }
}

pub(crate) struct ProcessSlot {
    name: Option<String>,
    body: Option<Body>,
    waiting_on: Option<Event>,
    started: bool,
    interrupts: VecDeque<Value>,
    completion: Event,
}

thread_local! {
    static CURRENT: RefCell<Option<(Env, ProcessId)>> = const { RefCell::new(None) };
}

fn current() -> Option<(Env, ProcessId)> {
    CURRENT.with(|c| c.borrow().clone())
}

/// Typed handle to a spawned process. Awaiting it yields the body's result.
pub struct Process<T> {
    id: ProcessId,
    completion: Event,
    env: Env,
    _output: PhantomData<fn() -> T>,
}

impl<T> Clone for Process<T> {
    fn clone(&self) -> Self {
        Process {
            id: self.id,
            completion: self.completion.clone(),
            env: self.env.clone(),
            _output: PhantomData,
        }
    }
}

impl<T> fmt::Debug for Process<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Process#{}", self.id)
    }
}

impl<T> Process<T> {
    pub fn id(&self) -> ProcessId {
        self.id
    }

    /// Event that succeeds with the body's return value or fails with its
    /// failure cause.
    pub fn completion(&self) -> &Event {
        &self.completion
    }

    /// True until the body returns or fails.
    pub fn is_alive(&self) -> bool {
        self.completion.is_pending()
    }

    pub fn interrupt(&self, cause: Value) -> Result<()> {
        self.env.interrupt(self.id, cause)
    }
}

impl Env {
    /// Register a process body; it starts at the current time.
    pub fn process<T, F>(&self, body: F) -> Process<T>
    where
        T: Any + fmt::Debug + Clone,
        F: Future<Output = std::result::Result<T, Fault>> + 'static,
    {
        self.spawn(None, body)
    }

    pub fn process_named<T, F>(&self, name: impl Into<String>, body: F) -> Process<T>
    where
        T: Any + fmt::Debug + Clone,
        F: Future<Output = std::result::Result<T, Fault>> + 'static,
    {
        self.spawn(Some(name.into()), body)
    }

    fn spawn<T, F>(&self, name: Option<String>, body: F) -> Process<T>
    where
        T: Any + fmt::Debug + Clone,
        F: Future<Output = std::result::Result<T, Fault>> + 'static,
    {
        let id = self.next_process_id();
        let completion = self.event();
        *completion.0.origin.borrow_mut() =
            Some(name.clone().unwrap_or_else(|| format!("process {id}")));
        let body: Body =
            Box::pin(async move { body.await.map(Value::new).map_err(Fault::into_cause) });

        let start = self.event();
        start
            .push_callback(Callback::Resume(id))
            .expect("fresh event");
        self.trigger(&start, Outcome::Success(Value::empty()), URGENT, 0.0)
            .expect("fresh event");

        self.inner.processes.borrow_mut().insert(
            id,
            ProcessSlot {
                name,
                body: Some(body),
                waiting_on: Some(start),
                started: false,
                interrupts: VecDeque::new(),
                completion: completion.clone(),
            },
        );
        Process {
            id,
            completion,
            env: self.clone(),
            _output: PhantomData,
        }
    }

    /// Interrupt a live process. The interrupt is delivered at the current
    /// time, ahead of normal-priority entries, at the target's suspension
    /// point; a target that has not started yet receives it at its first
    /// suspension.
    pub fn interrupt(&self, target: ProcessId, cause: Value) -> Result<()> {
        if !self.inner.processes.borrow().contains_key(&target) {
            return Err(SimError::DeadProcess(target));
        }
        if current().is_some_and(|(env, pid)| pid == target && env.ptr_eq(self)) {
            return Err(SimError::SelfInterrupt);
        }
        let delivery = self.event();
        delivery.push_callback(Callback::Interrupt(target))?;
        self.trigger(&delivery, Outcome::Success(cause), URGENT, 0.0)
    }

    /// Name given at spawn time, if the process is still alive.
    pub fn process_name(&self, pid: ProcessId) -> Option<String> {
        self.inner
            .processes
            .borrow()
            .get(&pid)
            .and_then(|s| s.name.clone())
    }

    pub fn live_processes(&self) -> usize {
        self.inner.processes.borrow().len()
    }

    pub(crate) fn deliver_interrupt(&self, pid: ProcessId, cause: Value) -> Result<()> {
        let waiting = {
            let mut procs = self.inner.processes.borrow_mut();
            let Some(slot) = procs.get_mut(&pid) else {
                return Ok(());
            };
            slot.interrupts.push_back(cause);
            if !slot.started {
                return Ok(());
            }
            slot.waiting_on.take()
        };
        if let Some(ev) = waiting {
            ev.remove_resume(pid);
        }
        self.resume(pid)
    }

    pub(crate) fn resume(&self, pid: ProcessId) -> Result<()> {
        let body = {
            let mut procs = self.inner.processes.borrow_mut();
            let Some(slot) = procs.get_mut(&pid) else {
                return Ok(());
            };
            slot.waiting_on = None;
            slot.started = true;
            slot.body.take()
        };
        let Some(mut body) = body else {
            return Ok(());
        };

        let previous = CURRENT.with(|c| c.borrow_mut().replace((self.clone(), pid)));
        let mut cx = Context::from_waker(Waker::noop());
        let polled = body.as_mut().poll(&mut cx);
        CURRENT.with(|c| *c.borrow_mut() = previous);

        match polled {
            Poll::Pending => {
                if let Some(slot) = self.inner.processes.borrow_mut().get_mut(&pid) {
                    slot.body = Some(body);
                }
                Ok(())
            }
            Poll::Ready(result) => {
                let slot = self.inner.processes.borrow_mut().remove(&pid);
                drop(body);
                let Some(slot) = slot else { return Ok(()) };
                let outcome = match result {
                    Ok(v) => Outcome::Success(v),
                    Err(cause) => Outcome::Failure(cause),
                };
                self.trigger(&slot.completion, outcome, NORMAL, 0.0)
            }
        }
    }
}

/// Future returned by awaiting an [`Event`] inside a process body.
pub struct EventFuture {
    event: Event,
    registered: bool,
}

impl Future for EventFuture {
    type Output = std::result::Result<Value, Fault>;

    fn poll(mut self: Pin<&mut Self>, _cx: &mut Context<'_>) -> Poll<Self::Output> {
        let Some((env, pid)) = current() else {
            panic!("events can only be awaited inside a simulation process");
        };
        if !self.event.same_env(&env) {
            env.set_contract_error(SimError::ForeignEvent(self.event.id()));
            return Poll::Pending;
        }

        let interrupt = env
            .inner
            .processes
            .borrow_mut()
            .get_mut(&pid)
            .and_then(|slot| slot.interrupts.pop_front());
        if let Some(cause) = interrupt {
            if self.registered {
                self.event.remove_resume(pid);
            }
            return Poll::Ready(Err(Fault::Interrupted(cause)));
        }

        if self.event.is_processed() {
            return Poll::Ready(match self.event.outcome() {
                Some(Outcome::Success(v)) => Ok(v),
                Some(Outcome::Failure(c)) => Err(Fault::Failed(c)),
                None => unreachable!("processed events carry an outcome"),
            });
        }

        if !self.registered {
            self.event
                .push_callback(Callback::Resume(pid))
                .expect("event is not processed");
            if let Some(slot) = env.inner.processes.borrow_mut().get_mut(&pid) {
                slot.waiting_on = Some(self.event.clone());
            }
            self.registered = true;
        }
        Poll::Pending
    }
}

impl IntoFuture for Event {
    type Output = std::result::Result<Value, Fault>;
    type IntoFuture = EventFuture;

    fn into_future(self) -> EventFuture {
        EventFuture {
            event: self,
            registered: false,
        }
    }
}

impl IntoFuture for &Event {
    type Output = std::result::Result<Value, Fault>;
    type IntoFuture = EventFuture;

    fn into_future(self) -> EventFuture {
        self.clone().into_future()
    }
}

/// Future returned by awaiting a [`Process`].
pub struct ProcessFuture<T> {
    inner: EventFuture,
    _output: PhantomData<fn() -> T>,
}

impl<T: Any + Clone> Future for ProcessFuture<T> {
    type Output = std::result::Result<T, Fault>;

    fn poll(mut self: Pin<&mut Self>, cx: &mut Context<'_>) -> Poll<Self::Output> {
        Pin::new(&mut self.inner).poll(cx).map(|r| {
            r.map(|v| {
                v.downcast_ref::<T>()
                    .cloned()
                    .expect("process completion carries the body's output type")
            })
        })
    }
}

impl<T: Any + Clone> IntoFuture for Process<T> {
    type Output = std::result::Result<T, Fault>;
    type IntoFuture = ProcessFuture<T>;

    fn into_future(self) -> ProcessFuture<T> {
        ProcessFuture {
            inner: self.completion.into_future(),
            _output: PhantomData,
        }
    }
}

impl<T: Any + Clone> IntoFuture for &Process<T> {
    type Output = std::result::Result<T, Fault>;
    type IntoFuture = ProcessFuture<T>;

    fn into_future(self) -> ProcessFuture<T> {
        self.clone().into_future()
    }
}
