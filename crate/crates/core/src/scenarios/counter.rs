//! Customer service counter: customers queue tickets, a single operator
//! serves them, falls asleep on an empty line and is woken by interrupts.

use std::cell::{Cell, RefCell};
use std::collections::VecDeque;
use std::rc::Rc;

use super::trace::Trace;
use crate::error::{invalid, Result};
use crate::kernel::{Env, Event, SimTime, Value};
use crate::process::{Fault, Process};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterConfig {
    pub service_delay: f64,
    pub n_customers: usize,
    /// Each service fails with probability `1 / fail_one_in`.
    pub fail_one_in: u64,
}

impl Default for CounterConfig {
    fn default() -> Self {
        CounterConfig {
            service_delay: 10.0,
            n_customers: 10,
            fail_one_in: 10,
        }
    }
}

impl CounterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.service_delay.is_finite() && self.service_delay > 0.0) {
            return Err(invalid("service delay must be positive"));
        }
        if self.n_customers == 0 || self.fail_one_in == 0 {
            return Err(invalid("customer count and failure odds must be positive"));
        }
        Ok(())
    }
}

/// Failure cause put on a ticket when service fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CustomerFailed;

#[derive(Debug, Clone, PartialEq)]
pub struct CustomerRecord {
    pub id: usize,
    pub arrival: SimTime,
    pub service_start: Option<SimTime>,
    pub resolved_at: Option<SimTime>,
    pub failed: bool,
}

struct Shared {
    env: Env,
    config: CounterConfig,
    trace: Trace,
    line: RefCell<VecDeque<(usize, Event)>>,
    idle: Cell<bool>,
    operator: RefCell<Option<Process<()>>>,
    customers: RefCell<Vec<CustomerRecord>>,
    resolution_order: RefCell<Vec<usize>>,
}

/// Handle to a running counter model.
pub struct CounterModel {
    shared: Rc<Shared>,
}

impl CounterModel {
    pub fn customers(&self) -> Vec<CustomerRecord> {
        self.shared.customers.borrow().clone()
    }

    /// Customer ids in the order their tickets were resolved.
    pub fn resolution_order(&self) -> Vec<usize> {
        self.shared.resolution_order.borrow().clone()
    }

    pub fn trace(&self) -> &Trace {
        &self.shared.trace
    }
}

/// Spawn the customer generator and the counter operator.
pub fn counter_scenario(env: &Env, config: CounterConfig, trace: Trace) -> Result<CounterModel> {
    config.validate()?;
    let shared = Rc::new(Shared {
        env: env.clone(),
        config,
        trace,
        line: RefCell::new(VecDeque::new()),
        idle: Cell::new(false),
        operator: RefCell::new(None),
        customers: RefCell::new(Vec::with_capacity(config.n_customers)),
        resolution_order: RefCell::new(Vec::with_capacity(config.n_customers)),
    });

    let gen = shared.clone();
    env.process_named("customer generator", async move {
        for id in 0..gen.config.n_customers {
            gen.env
                .process_named(format!("customer {id}"), customer(gen.clone(), id));
            let gap = gen.env.expovariate(gen.config.service_delay);
            gen.env.timeout(gap).await?;
        }
        Ok(())
    });
    let operator = env.process_named("counter", counter(shared.clone()));
    *shared.operator.borrow_mut() = Some(operator);
    Ok(CounterModel { shared })
}

async fn customer(sh: Rc<Shared>, id: usize) -> std::result::Result<(), Fault> {
    let env = &sh.env;
    sh.trace.record(env.now(), "Customer", "arrived");
    sh.customers.borrow_mut().push(CustomerRecord {
        id,
        arrival: env.now(),
        service_start: None,
        resolved_at: None,
        failed: false,
    });
    let ticket = env.event();
    sh.line.borrow_mut().push_back((id, ticket.clone()));

    if sh.idle.get() {
        let operator = sh.operator.borrow().clone();
        if let Some(op) = operator {
            op.interrupt(Value::empty())?;
        }
    }

    let failed = match ticket.await {
        Ok(_) => {
            sh.trace.record(env.now(), "Customer", "left");
            false
        }
        Err(Fault::Failed(cause)) if cause.is::<CustomerFailed>() => {
            sh.trace.record(env.now(), "Customer", "failed (and left)");
            true
        }
        Err(other) => return Err(other),
    };
    if let Some(rec) = sh.customers.borrow_mut().iter_mut().find(|r| r.id == id) {
        rec.resolved_at = Some(env.now());
        rec.failed = failed;
    }
    sh.resolution_order.borrow_mut().push(id);
    Ok(())
}

async fn counter(sh: Rc<Shared>) -> std::result::Result<(), Fault> {
    let env = &sh.env;
    loop {
        let next = sh.line.borrow_mut().pop_front();
        match next {
            Some((id, ticket)) => {
                if let Some(rec) = sh.customers.borrow_mut().iter_mut().find(|r| r.id == id) {
                    rec.service_start = Some(env.now());
                }
                env.timeout(sh.config.service_delay).await?;
                let odds = sh.config.fail_one_in;
                if env.below(odds) == odds - 1 {
                    ticket.fail(Value::new(CustomerFailed))?;
                } else {
                    ticket.succeed(Value::empty())?;
                }
            }
            None => {
                sh.idle.set(true);
                sh.trace.record(env.now(), "The operator", "fell asleep");
                // Nobody ever triggers this event; only an interrupt ends the nap.
                match env.event().await {
                    Err(Fault::Interrupted(_)) => {
                        sh.idle.set(false);
                        sh.trace.record(env.now(), "The operator", "woke up");
                    }
                    Ok(_) => {}
                    Err(other) => return Err(other),
                }
            }
        }
    }
}
