//! Process-oriented discrete event simulation.
//!
//! The [`kernel`] owns the clock and the future event list, [`process`]
//! turns `async` bodies into resumable simulation processes, and
//! [`resources`] provides renewable resources and consumable containers.
//! [`scenarios`] builds the dining-philosophers and service-counter models
//! on top, and [`stats`] runs seeded replications and sweeps.
//!
//! ```
//! use procsim::kernel::Environment;
//!
//! let env = Environment::new(7);
//! let h = env.handle();
//! env.process(async move {
//!     h.timeout(3.0).await?;
//!     Ok(())
//! });
//! env.run(None).unwrap();
//! assert_eq!(env.now(), 3.0);
//! ```

pub mod cli;
pub mod error;
pub mod kernel;
pub mod process;
pub mod resources;
pub mod scenarios;
pub mod stats;

pub use error::{Result, SimError};
pub use kernel::{Env, Environment, Event, Outcome, RunOutcome, SimTime, Value};
pub use process::{Fault, Process};
pub use resources::{Container, Request, Resource, Transfer};
