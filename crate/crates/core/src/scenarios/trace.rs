use std::cell::RefCell;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::kernel::SimTime;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time: SimTime,
    pub actor: String,
    pub message: String,
}

/// Shared, optionally disabled trace sink for scenario diagnostics.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    records: Option<Rc<RefCell<Vec<TraceRecord>>>>,
}

impl Trace {
    pub fn enabled() -> Self {
        Trace {
            records: Some(Rc::default()),
        }
    }

    pub fn disabled() -> Self {
        Trace { records: None }
    }

    pub fn is_enabled(&self) -> bool {
        self.records.is_some()
    }

    pub fn record(&self, time: SimTime, actor: impl Into<String>, message: impl Into<String>) {
        if let Some(records) = &self.records {
            records.borrow_mut().push(TraceRecord {
                time,
                actor: actor.into(),
                message: message.into(),
            });
        }
    }

    pub fn records(&self) -> Vec<TraceRecord> {
        self.records
            .as_ref()
            .map(|r| r.borrow().clone())
            .unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.records.as_ref().map_or(0, |r| r.borrow().len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
