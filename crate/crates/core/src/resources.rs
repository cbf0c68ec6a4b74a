//! Renewable resources (capacity-limited, FIFO grants) and consumable
//! containers (blocking put/get of real-valued amounts).

use std::cell::{Cell, RefCell};
use std::collections::VecDeque;
use std::fmt;
use std::future::IntoFuture;
use std::rc::Rc;

use crate::error::{invalid, Result, SimError};
use crate::kernel::{Env, Event, Value};
use crate::process::EventFuture;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RequestStatus {
    Queued,
    Granted,
    Released,
    Cancelled,
}

/// Handle returned by [`Resource::request`]. Awaiting it blocks until the
/// request is granted.
#[derive(Clone)]
pub struct Request {
    event: Event,
    resource: usize,
    status: Rc<Cell<RequestStatus>>,
}

impl Request {
    pub fn event(&self) -> &Event {
        &self.event
    }

    pub fn status(&self) -> RequestStatus {
        self.status.get()
    }

    pub fn is_granted(&self) -> bool {
        self.status() == RequestStatus::Granted
    }

    /// Index of the resource this request was made on.
    pub fn resource(&self) -> usize {
        self.resource
    }

    pub fn is_processed(&self) -> bool {
        self.event.is_processed()
    }
}

impl fmt::Debug for Request {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Request#{}(resource {}, {:?})",
            self.event.id(),
            self.resource,
            self.status()
        )
    }
}

impl IntoFuture for Request {
    type Output = std::result::Result<Value, crate::process::Fault>;
    type IntoFuture = EventFuture;

    fn into_future(self) -> EventFuture {
        self.event.into_future()
    }
}

impl IntoFuture for &Request {
    type Output = std::result::Result<Value, crate::process::Fault>;
    type IntoFuture = EventFuture;

    fn into_future(self) -> EventFuture {
        self.event.clone().into_future()
    }
}

struct ResourceState {
    capacity: usize,
    users: Vec<Request>,
    queue: VecDeque<Request>,
}

/// Renewable resource with a fixed capacity and a FIFO wait queue.
#[derive(Clone)]
pub struct Resource {
    env: Env,
    index: usize,
    state: Rc<RefCell<ResourceState>>,
}

impl Resource {
    pub fn new(env: &Env, capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(invalid("resource capacity must be at least 1"));
        }
        Ok(Resource {
            env: env.clone(),
            index: env.next_resource_index(),
            state: Rc::new(RefCell::new(ResourceState {
                capacity,
                users: Vec::with_capacity(capacity),
                queue: VecDeque::new(),
            })),
        })
    }

    /// Creation index within the environment; a total order on resources.
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn capacity(&self) -> usize {
        self.state.borrow().capacity
    }

    /// Number of granted, unreleased requests.
    pub fn count(&self) -> usize {
        self.state.borrow().users.len()
    }

    pub fn queue_len(&self) -> usize {
        self.state.borrow().queue.len()
    }

    /// `(count, queued)`.
    pub fn counts(&self) -> (usize, usize) {
        let st = self.state.borrow();
        (st.users.len(), st.queue.len())
    }

    pub fn users(&self) -> Vec<Request> {
        self.state.borrow().users.clone()
    }

    pub fn request(&self) -> Request {
        let rq = Request {
            event: self.env.event(),
            resource: self.index,
            status: Rc::new(Cell::new(RequestStatus::Queued)),
        };
        let grant = {
            let mut st = self.state.borrow_mut();
            if st.users.len() < st.capacity {
                rq.status.set(RequestStatus::Granted);
                st.users.push(rq.clone());
                true
            } else {
                st.queue.push_back(rq.clone());
                false
            }
        };
        if grant {
            rq.event
                .succeed(Value::empty())
                .expect("fresh request event is pending");
        }
        rq
    }

    /// Give back a granted request. Does not suspend the caller; the head
    /// of the wait queue, if any, is granted at the current time.
    pub fn release(&self, rq: &Request) -> Result<()> {
        self.check_owner(rq)?;
        let next = {
            let mut st = self.state.borrow_mut();
            let Some(pos) = st.users.iter().position(|u| u.event == rq.event) else {
                return Err(SimError::Usage(format!(
                    "cannot release {rq:?}: it is not held"
                )));
            };
            st.users.swap_remove(pos);
            rq.status.set(RequestStatus::Released);
            match st.queue.pop_front() {
                Some(next) => {
                    next.status.set(RequestStatus::Granted);
                    st.users.push(next.clone());
                    Some(next)
                }
                None => None,
            }
        };
        if let Some(next) = next {
            next.event.succeed(Value::empty())?;
        }
        Ok(())
    }

    /// Withdraw a request that is still waiting. Its event never succeeds.
    pub fn cancel(&self, rq: &Request) -> Result<()> {
        self.check_owner(rq)?;
        let mut st = self.state.borrow_mut();
        let Some(pos) = st.queue.iter().position(|q| q.event == rq.event) else {
            return Err(SimError::Usage(format!(
                "cannot cancel {rq:?}: it is not waiting"
            )));
        };
        st.queue.remove(pos);
        rq.status.set(RequestStatus::Cancelled);
        Ok(())
    }

    fn check_owner(&self, rq: &Request) -> Result<()> {
        if rq.resource != self.index || !rq.event.same_env(&self.env) {
            return Err(SimError::Usage(format!(
                "{rq:?} does not belong to resource {}",
                self.index
            )));
        }
        Ok(())
    }
}

impl fmt::Debug for Resource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (count, queued) = self.counts();
        write!(
            f,
            "Resource#{}({count}/{}, {queued} queued)",
            self.index,
            self.capacity()
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferStatus {
    Pending,
    Done,
    Cancelled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferKind {
    Get,
    Put,
}

/// A pending or completed container put/get.
#[derive(Clone)]
pub struct Transfer {
    event: Event,
    kind: TransferKind,
    amount: f64,
    status: Rc<Cell<TransferStatus>>,
}

impl Transfer {
    pub fn event(&self) -> &Event {
        &self.event
    }

    pub fn amount(&self) -> f64 {
        self.amount
    }

    pub fn kind(&self) -> TransferKind {
        self.kind
    }

    pub fn status(&self) -> TransferStatus {
        self.status.get()
    }

    /// True once the amount has moved (the event may not be processed yet).
    pub fn is_done(&self) -> bool {
        self.status() == TransferStatus::Done
    }

    pub fn is_processed(&self) -> bool {
        self.event.is_processed()
    }
}

impl fmt::Debug for Transfer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?}#{}({}, {:?})",
            self.kind,
            self.event.id(),
            self.amount,
            self.status()
        )
    }
}

impl IntoFuture for &Transfer {
    type Output = std::result::Result<Value, crate::process::Fault>;
    type IntoFuture = EventFuture;

    fn into_future(self) -> EventFuture {
        self.event.clone().into_future()
    }
}

struct ContainerState {
    capacity: f64,
    level: f64,
    gets: VecDeque<Transfer>,
    puts: VecDeque<Transfer>,
    total_put: f64,
    total_got: f64,
}

/// Consumable stock with blocking put and get.
///
/// Both queues are strict FIFO: a blocked request at the head holds back
/// later requests even when those could be satisfied.
#[derive(Clone)]
pub struct Container {
    env: Env,
    state: Rc<RefCell<ContainerState>>,
}

impl Container {
    pub fn new(env: &Env, init: f64, capacity: f64) -> Result<Self> {
        if !(capacity.is_finite() && capacity > 0.0) {
            return Err(invalid(format!(
                "container capacity {capacity} must be positive"
            )));
        }
        if !(init.is_finite() && (0.0..=capacity).contains(&init)) {
            return Err(invalid(format!(
                "initial level {init} outside [0, {capacity}]"
            )));
        }
        Ok(Container {
            env: env.clone(),
            state: Rc::new(RefCell::new(ContainerState {
                capacity,
                level: init,
                gets: VecDeque::new(),
                puts: VecDeque::new(),
                total_put: 0.0,
                total_got: 0.0,
            })),
        })
    }

    pub fn level(&self) -> f64 {
        self.state.borrow().level
    }

    pub fn capacity(&self) -> f64 {
        self.state.borrow().capacity
    }

    /// Sum of all completed puts.
    pub fn total_put(&self) -> f64 {
        self.state.borrow().total_put
    }

    /// Sum of all completed gets.
    pub fn total_got(&self) -> f64 {
        self.state.borrow().total_got
    }

    pub fn pending_gets(&self) -> usize {
        self.state.borrow().gets.len()
    }

    pub fn pending_puts(&self) -> usize {
        self.state.borrow().puts.len()
    }

    pub fn get(&self, amount: f64) -> Result<Transfer> {
        self.enqueue(TransferKind::Get, amount)
    }

    pub fn put(&self, amount: f64) -> Result<Transfer> {
        self.enqueue(TransferKind::Put, amount)
    }

    /// Withdraw a pending get; it will never take stock.
    pub fn cancel_get(&self, get: &Transfer) -> Result<()> {
        {
            let mut st = self.state.borrow_mut();
            let pos = st
                .gets
                .iter()
                .position(|g| g.event == get.event)
                .ok_or_else(|| {
                    SimError::Usage(format!("cannot cancel {get:?}: it is not pending"))
                })?;
            st.gets.remove(pos);
            get.status.set(TransferStatus::Cancelled);
        }
        self.settle()
    }

    fn enqueue(&self, kind: TransferKind, amount: f64) -> Result<Transfer> {
        let capacity = self.capacity();
        if !(amount.is_finite() && amount > 0.0) {
            return Err(invalid(format!(
                "{kind:?} amount {amount} must be positive"
            )));
        }
        if amount > capacity {
            return Err(invalid(format!(
                "{kind:?} amount {amount} exceeds capacity {capacity}"
            )));
        }
        let tr = Transfer {
            event: self.env.event(),
            kind,
            amount,
            status: Rc::new(Cell::new(TransferStatus::Pending)),
        };
        {
            let mut st = self.state.borrow_mut();
            match kind {
                TransferKind::Get => st.gets.push_back(tr.clone()),
                TransferKind::Put => st.puts.push_back(tr.clone()),
            }
        }
        self.settle()?;
        Ok(tr)
    }

    /// Serve queue heads until neither queue can make progress.
    fn settle(&self) -> Result<()> {
        let mut done = Vec::new();
        {
            let mut st = self.state.borrow_mut();
            loop {
                let mut progressed = false;
                while let Some(head) = st.gets.front() {
                    if head.amount > st.level {
                        break;
                    }
                    let head = st.gets.pop_front().expect("front exists");
                    st.level -= head.amount;
                    st.total_got += head.amount;
                    head.status.set(TransferStatus::Done);
                    done.push(head);
                    progressed = true;
                }
                while let Some(head) = st.puts.front() {
                    if st.level + head.amount > st.capacity {
                        break;
                    }
                    let head = st.puts.pop_front().expect("front exists");
                    st.level += head.amount;
                    st.total_put += head.amount;
                    head.status.set(TransferStatus::Done);
                    done.push(head);
                    progressed = true;
                }
                if !progressed {
                    break;
                }
            }
        }
        for tr in done {
            tr.event.succeed(Value::empty())?;
        }
        Ok(())
    }
}

impl fmt::Debug for Container {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Container({}/{})", self.level(), self.capacity())
    }
}
