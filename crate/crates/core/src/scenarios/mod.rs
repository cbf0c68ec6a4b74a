//! Models built on the kernel: dining philosophers in four variants and
//! the customer service counter.

mod counter;
mod philosophers;
mod trace;

pub use counter::{counter_scenario, CounterConfig, CounterModel, CustomerFailed, CustomerRecord};
pub use philosophers::{
    build_party, detect_deadlock, spawn_chef, spawn_philosopher, Attempt, ChefConfig, Party,
    PartyConfig, PhilosopherConfig, PhilosopherHandle, PhilosopherLedger, PhilosopherState,
    Variant,
};
pub use trace::{Trace, TraceRecord};
