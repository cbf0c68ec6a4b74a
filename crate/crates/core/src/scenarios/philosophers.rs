//! Dining philosophers: the classic (deadlock-prone) party, the
//! ordered-allocation fix, the rice bowl with a chef, and impatient
//! philosophers who give up waiting for food.

use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::trace::Trace;
use crate::error::{invalid, Result, SimError};
use crate::kernel::{Env, SimTime};
use crate::process::{Fault, Process};
use crate::resources::{Container, Request, Resource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Classic,
    Ordered,
    Bowl,
    Impatient,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Classic,
        Variant::Ordered,
        Variant::Bowl,
        Variant::Impatient,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Classic => "classic",
            Variant::Ordered => "ordered",
            Variant::Bowl => "bowl",
            Variant::Impatient => "impatient",
        }
    }

    /// Stable numeric tag used in seed derivation.
    pub fn tag(self) -> u64 {
        match self {
            Variant::Classic => 1,
            Variant::Ordered => 2,
            Variant::Bowl => 3,
            Variant::Impatient => 4,
        }
    }

    pub fn has_bowl(self) -> bool {
        matches!(self, Variant::Bowl | Variant::Impatient)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| invalid(format!("unknown philosopher variant '{s}'")))
    }
}

/// Timing and appetite of one philosopher.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhilosopherConfig {
    /// Mean thinking time.
    pub think_mean: f64,
    /// Mean eating time.
    pub eat_mean: f64,
    /// Pause between obtaining the first chopstick and requesting the second.
    pub pickup_delay: f64,
    /// Standard meal size taken from the bowl.
    pub portion: f64,
    /// How long an impatient philosopher waits for food.
    pub max_wait: f64,
    /// Pick chopsticks up in ascending resource index order.
    pub ordered: bool,
    pub impatient: bool,
}

impl Default for PhilosopherConfig {
    fn default() -> Self {
        PhilosopherConfig {
            think_mean: 10.0,
            eat_mean: 10.0,
            pickup_delay: 1.0,
            portion: 20.0,
            max_wait: ChefConfig::default().period / 2.0,
            ordered: false,
            impatient: false,
        }
    }
}

impl PhilosopherConfig {
    pub fn for_variant(variant: Variant) -> Self {
        PhilosopherConfig {
            ordered: variant != Variant::Classic,
            impatient: variant == Variant::Impatient,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let times = [
            ("think_mean", self.think_mean),
            ("eat_mean", self.eat_mean),
            ("pickup_delay", self.pickup_delay),
            ("portion", self.portion),
            ("max_wait", self.max_wait),
        ];
        for (name, v) in times {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChefConfig {
    /// Replenish period.
    pub period: f64,
}

impl Default for ChefConfig {
    fn default() -> Self {
        ChefConfig { period: 150.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PhilosopherState {
    #[default]
    Thinking,
    Hungry,
    HungryWithOneChopstick,
    Eating,
}

impl PhilosopherState {
    /// Legal transitions; `give_up` adds the impatient edge back to thinking.
    pub fn can_move_to(self, next: PhilosopherState, give_up: bool) -> bool {
        use PhilosopherState::*;
        matches!(
            (self, next),
            (Thinking, Hungry)
                | (Hungry, HungryWithOneChopstick)
                | (HungryWithOneChopstick, Eating)
                | (Eating, Thinking)
        ) || (give_up && self == HungryWithOneChopstick && next == Thinking)
    }
}

/// Demand at the start of one attempt to eat.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Attempt {
    pub time: SimTime,
    pub meal_size: f64,
    pub consecutive_give_ups: u64,
}

/// Per-philosopher bookkeeping.
#[derive(Debug, Clone, Default)]
pub struct PhilosopherLedger {
    pub state: PhilosopherState,
    /// Accumulated time between requesting chopsticks and getting
    /// everything needed (or giving up).
    pub waiting: f64,
    pub meal_size: f64,
    pub meals: u64,
    pub give_ups: u64,
    pub consecutive_give_ups: u64,
    pub rice_eaten: f64,
    /// Filled only when recording is on.
    pub transitions: Vec<(SimTime, PhilosopherState)>,
    /// Filled only when recording is on.
    pub attempts: Vec<Attempt>,
}

struct Philosopher {
    env: Env,
    id: usize,
    config: PhilosopherConfig,
    chopsticks: [Resource; 2],
    bowl: Option<Container>,
    trace: Trace,
    record: bool,
    ledger: Rc<RefCell<PhilosopherLedger>>,
}

impl Philosopher {
    fn diag(&self, message: &str) {
        if self.trace.is_enabled() {
            self.trace
                .record(self.env.now(), format!("P{}", self.id), message);
        }
    }

    fn enter(&self, state: PhilosopherState) {
        let mut ledger = self.ledger.borrow_mut();
        ledger.state = state;
        if self.record {
            ledger.transitions.push((self.env.now(), state));
        }
    }
}

/// Handle to a spawned philosopher.
#[derive(Debug, Clone)]
pub struct PhilosopherHandle {
    pub id: usize,
    ledger: Rc<RefCell<PhilosopherLedger>>,
    process: Process<()>,
}

impl PhilosopherHandle {
    pub fn ledger(&self) -> PhilosopherLedger {
        self.ledger.borrow().clone()
    }

    pub fn waiting(&self) -> f64 {
        self.ledger.borrow().waiting
    }

    pub fn state(&self) -> PhilosopherState {
        self.ledger.borrow().state
    }

    pub fn process(&self) -> &Process<()> {
        &self.process
    }
}

/// Spawn one philosopher owning the given pair of chopsticks.
///
/// With `config.ordered` the pair is sorted by resource index before use.
pub fn spawn_philosopher(
    env: &Env,
    config: PhilosopherConfig,
    chopsticks: (Resource, Resource),
    id: usize,
    bowl: Option<Container>,
    trace: Trace,
    record: bool,
) -> Result<PhilosopherHandle> {
    config.validate()?;
    if config.impatient && bowl.is_none() {
        return Err(invalid("an impatient philosopher needs a bowl"));
    }
    let mut pair = [chopsticks.0, chopsticks.1];
    if config.ordered {
        pair.sort_by_key(Resource::index);
    }
    let ledger = Rc::new(RefCell::new(PhilosopherLedger {
        meal_size: config.portion,
        ..Default::default()
    }));
    let ph = Rc::new(Philosopher {
        env: env.clone(),
        id,
        config,
        chopsticks: pair,
        bowl,
        trace,
        record,
        ledger: ledger.clone(),
    });
    if record {
        ledger
            .borrow_mut()
            .transitions
            .push((env.now(), PhilosopherState::Thinking));
    }
    let process = env.process_named(format!("P{id}"), lifecycle(ph));
    Ok(PhilosopherHandle {
        id,
        ledger,
        process,
    })
}

async fn lifecycle(ph: Rc<Philosopher>) -> std::result::Result<(), Fault> {
    let env = ph.env.clone();
    loop {
        let thinking = env.expovariate(ph.config.think_mean);
        env.timeout(thinking).await?;
        ph.enter(PhilosopherState::Hungry);

        let meal_size = ph.ledger.borrow().meal_size;
        let hungry = env.process(get_hungry(ph.clone(), meal_size));
        let (rq1, rq2) = match hungry.await {
            Ok(handles) => {
                ph.enter(PhilosopherState::Eating);
                let eating = env.expovariate(ph.config.eat_mean);
                env.timeout(eating).await?;
                let mut ledger = ph.ledger.borrow_mut();
                ledger.meals += 1;
                ledger.consecutive_give_ups = 0;
                ledger.meal_size = ph.config.portion;
                handles
            }
            Err(Fault::Failed(cause)) if cause.is::<(Request, Request)>() => {
                let handles = cause
                    .downcast_ref::<(Request, Request)>()
                    .cloned()
                    .expect("checked above");
                let mut ledger = ph.ledger.borrow_mut();
                ledger.give_ups += 1;
                ledger.consecutive_give_ups += 1;
                ledger.meal_size += ph.config.portion;
                handles
            }
            Err(other) => return Err(other),
        };

        ph.chopsticks[0].release(&rq1)?;
        ph.chopsticks[1].release(&rq2)?;
        ph.diag("released the chopsticks");
        ph.enter(PhilosopherState::Thinking);
    }
}

/// Acquire both chopsticks (and food, when there is a bowl). Returns the
/// request handles; an impatient give-up fails with the handles as payload.
async fn get_hungry(
    ph: Rc<Philosopher>,
    meal_size: f64,
) -> std::result::Result<(Request, Request), Fault> {
    let env = &ph.env;
    let start_waiting = env.now();
    if ph.record {
        let ledger = &mut *ph.ledger.borrow_mut();
        ledger.attempts.push(Attempt {
            time: start_waiting,
            meal_size,
            consecutive_give_ups: ledger.consecutive_give_ups,
        });
    }

    ph.diag("requested chopstick");
    let rq1 = ph.chopsticks[0].request();
    (&rq1).await?;
    ph.enter(PhilosopherState::HungryWithOneChopstick);

    ph.diag("obtained chopstick");
    env.timeout(ph.config.pickup_delay).await?;

    ph.diag("requested another chopstick");
    let rq2 = ph.chopsticks[1].request();
    (&rq2).await?;
    ph.diag("obtained another chopstick");

    if let Some(bowl) = &ph.bowl {
        let request = bowl.get(meal_size)?;
        if ph.config.impatient {
            let patience = env.timeout(ph.config.max_wait);
            env.any_of(&[request.event().clone(), patience])?.await?;
            // A get granted in the same instant as the timeout has already
            // taken the rice, so it counts as served.
            if !(request.is_processed() || request.is_done()) {
                ph.diag("gave up");
                bowl.cancel_get(&request)?;
                ph.ledger.borrow_mut().waiting += env.now() - start_waiting;
                return Err(Fault::failed((rq1, rq2)));
            }
        } else {
            (&request).await?;
        }
        ph.diag("reserved food");
        ph.ledger.borrow_mut().rice_eaten += meal_size;
    }

    ph.ledger.borrow_mut().waiting += env.now() - start_waiting;
    Ok((rq1, rq2))
}

/// Chef refilling the bowl to capacity every `config.period`.
pub fn spawn_chef(env: &Env, config: ChefConfig, bowl: Container) -> Result<Process<()>> {
    if !(config.period.is_finite() && config.period > 0.0) {
        return Err(invalid("chef period must be positive"));
    }
    let h = env.clone();
    Ok(env.process_named("chef", async move {
        loop {
            h.timeout(config.period).await?;
            if bowl.level() < bowl.capacity() {
                let refill = bowl.put(bowl.capacity() - bowl.level())?;
                (&refill).await?;
            }
        }
    }))
}

/// True when the event list has drained while at least two chopsticks are
/// still held. A run stopped at its horizon is never deadlocked.
pub fn detect_deadlock(env: &Env, chopsticks: &[Resource]) -> bool {
    env.queue_len() == 0 && chopsticks.iter().filter(|c| c.count() > 0).count() >= 2
}

/// Everything needed to build a party.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartyConfig {
    pub n: usize,
    pub variant: Variant,
    pub philosopher: PhilosopherConfig,
    /// `None` leaves the bowl without a chef.
    pub chef: Option<ChefConfig>,
    pub bowl_capacity: f64,
    /// Keep per-philosopher transition and attempt logs.
    pub record: bool,
}

impl PartyConfig {
    pub fn new(n: usize, variant: Variant) -> Self {
        PartyConfig {
            n,
            variant,
            philosopher: PhilosopherConfig::for_variant(variant),
            chef: variant.has_bowl().then(ChefConfig::default),
            bowl_capacity: 1000.0,
            record: false,
        }
    }
}

/// A built party, ready to run.
#[derive(Debug)]
pub struct Party {
    env: Env,
    pub philosophers: Vec<PhilosopherHandle>,
    pub chopsticks: Vec<Resource>,
    pub bowl: Option<Container>,
    pub chef: Option<Process<()>>,
}

impl Party {
    pub fn counts(&self) -> Vec<usize> {
        self.chopsticks.iter().map(Resource::count).collect()
    }

    pub fn is_deadlocked(&self) -> bool {
        detect_deadlock(&self.env, &self.chopsticks)
    }

    pub fn mean_waiting(&self) -> f64 {
        self.waiting().iter().sum::<f64>() / self.philosophers.len() as f64
    }

    pub fn waiting(&self) -> Vec<f64> {
        self.philosophers
            .iter()
            .map(PhilosopherHandle::waiting)
            .collect()
    }

    pub fn rice_eaten(&self) -> f64 {
        self.philosophers
            .iter()
            .map(|p| p.ledger.borrow().rice_eaten)
            .sum()
    }
}

/// `n` capacity-1 chopsticks in a ring; philosopher `i` sits between
/// chopstick `i` and chopstick `(i + 1) % n`.
pub fn build_party(env: &Env, config: &PartyConfig, trace: &Trace) -> Result<Party> {
    if config.n < 2 {
        return Err(invalid(format!(
            "a party needs at least 2 philosophers, got {}",
            config.n
        )));
    }
    let n = config.n;
    let chopsticks = (0..n)
        .map(|_| Resource::new(env, 1))
        .collect::<Result<Vec<_>>>()?;
    let bowl = if config.variant.has_bowl() {
        Some(Container::new(
            env,
            config.bowl_capacity,
            config.bowl_capacity,
        )?)
    } else {
        None
    };
    let chef = match (&bowl, config.chef) {
        (Some(bowl), Some(chef)) => Some(spawn_chef(env, chef, bowl.clone())?),
        _ => None,
    };
    let philosophers = (0..n)
        .map(|i| {
            spawn_philosopher(
                env,
                config.philosopher,
                (chopsticks[i].clone(), chopsticks[(i + 1) % n].clone()),
                i,
                bowl.clone(),
                trace.clone(),
                config.record,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Party {
        env: env.clone(),
        philosophers,
        chopsticks,
        bowl,
        chef,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{Environment, RunOutcome};

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
        }
        assert!("counter".parse::<Variant>().is_err());
    }

    #[test]
    fn default_constants() {
        let c = PhilosopherConfig::default();
        assert_eq!(
            (c.think_mean, c.eat_mean, c.pickup_delay),
            (10.0, 10.0, 1.0)
        );
        assert_eq!(c.portion, 20.0);
        assert_eq!(c.max_wait, 75.0);
        assert_eq!(ChefConfig::default().period, 150.0);
    }

    #[test]
    fn party_needs_two() {
        let env = Environment::new(0);
        let err = build_party(
            &env,
            &PartyConfig::new(1, Variant::Ordered),
            &Trace::disabled(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn ring_of_two_shares_both_chopsticks() {
        let env = Environment::new(0);
        let party = build_party(
            &env,
            &PartyConfig::new(2, Variant::Classic),
            &Trace::disabled(),
        )
        .unwrap();
        assert_eq!(party.chopsticks.len(), 2);
        assert_eq!(party.philosophers.len(), 2);
        assert!(party.bowl.is_none() && party.chef.is_none());
    }

    #[test]
    fn bowl_variant_attaches_bowl_and_chef() {
        let env = Environment::new(0);
        let party = build_party(
            &env,
            &PartyConfig::new(5, Variant::Bowl),
            &Trace::disabled(),
        )
        .unwrap();
        let bowl = party.bowl.as_ref().unwrap();
        assert_eq!((bowl.level(), bowl.capacity()), (1000.0, 1000.0));
        assert!(party.chef.is_some());
    }

    #[test]
    fn impatient_requires_bowl() {
        let env = Environment::new(0);
        let a = Resource::new(&env, 1).unwrap();
        let b = Resource::new(&env, 1).unwrap();
        let cfg = PhilosopherConfig::for_variant(Variant::Impatient);
        assert!(spawn_philosopher(&env, cfg, (a, b), 0, None, Trace::disabled(), false).is_err());
    }

    #[test]
    fn uncontended_philosopher_waits_exactly_pickup_delay_per_meal() {
        let env = Environment::new(11);
        let a = Resource::new(&env, 1).unwrap();
        let b = Resource::new(&env, 1).unwrap();
        let ph = spawn_philosopher(
            &env,
            PhilosopherConfig::default(),
            (a, b),
            0,
            None,
            Trace::disabled(),
            false,
        )
        .unwrap();
        env.run(Some(10_000.0)).unwrap();
        let l = ph.ledger();
        assert!(l.meals > 100);
        // Waiting is a sum of exact 1.0 increments (plus one partial attempt
        // at most if the horizon cut through a pickup).
        let attempts_done = l.meals + u64::from(l.state == PhilosopherState::Eating);
        assert_eq!(l.waiting, attempts_done as f64);
    }

    #[test]
    fn deadlock_detection_threshold() {
        let env = Environment::new(0);
        let cs: Vec<_> = (0..3).map(|_| Resource::new(&env, 1).unwrap()).collect();
        assert!(!detect_deadlock(&env, &cs));
        let _one = cs[0].request();
        env.run(None).unwrap();
        assert!(!detect_deadlock(&env, &cs));
        let _two = cs[2].request();
        assert!(!detect_deadlock(&env, &cs));
        env.run(None).unwrap();
        assert!(detect_deadlock(&env, &cs));
        env.timeout(5.0);
        assert!(!detect_deadlock(&env, &cs));
    }

    #[test]
    fn chef_skips_full_bowl_and_tops_up() {
        let env = Environment::new(0);
        let bowl = Container::new(&env, 1000.0, 1000.0).unwrap();
        spawn_chef(&env, ChefConfig::default(), bowl.clone()).unwrap();
        env.run(Some(150.0)).unwrap();
        assert_eq!(bowl.total_put(), 0.0);
        for _ in 0..3 {
            bowl.get(20.0).unwrap();
        }
        assert_eq!(bowl.level(), 940.0);
        env.run(Some(300.0)).unwrap();
        assert_eq!(bowl.total_put(), 60.0);
        assert_eq!(bowl.level(), 1000.0);
    }

    #[test]
    fn impatient_with_empty_bowl_and_no_chef_gives_up() {
        let env = Environment::new(4);
        let a = Resource::new(&env, 1).unwrap();
        let b = Resource::new(&env, 1).unwrap();
        let bowl = Container::new(&env, 0.0, 1000.0).unwrap();
        let trace = Trace::enabled();
        let ph = spawn_philosopher(
            &env,
            PhilosopherConfig::for_variant(Variant::Impatient),
            (a.clone(), b.clone()),
            0,
            Some(bowl.clone()),
            trace.clone(),
            true,
        )
        .unwrap();
        env.run(Some(2000.0)).unwrap();
        let l = ph.ledger();
        assert!(l.give_ups >= 2);
        assert_eq!(l.meals, 0);
        assert_eq!(l.attempts[0].meal_size, 20.0);
        assert_eq!(l.attempts[1].meal_size, 40.0);
        assert_eq!(bowl.pending_gets(), 0);
        let recs = trace.records();
        let gave_up = recs.iter().find(|r| r.message == "gave up").unwrap();
        let obtained = recs
            .iter()
            .find(|r| r.message == "obtained another chopstick")
            .unwrap();
        assert_eq!(gave_up.time - obtained.time, 75.0);
        // Each give-up charges exactly DT + MAX_WAIT of waiting.
        let charged = l.give_ups as f64 * 76.0;
        assert!(l.waiting >= charged && l.waiting <= charged + 76.0);
        assert!(a.count() + b.count() <= 2);
    }

    #[test]
    fn unordered_pair_deadlocks_eventually() {
        // Two classic philosophers pick chopsticks in opposite order.
        let env = Environment::new(0);
        let party = build_party(
            &env,
            &PartyConfig::new(2, Variant::Classic),
            &Trace::disabled(),
        )
        .unwrap();
        let out = env.run(Some(1e6)).unwrap();
        assert!(out.is_exhausted());
        assert_eq!(party.counts(), vec![1, 1]);
        assert!(party.is_deadlocked());
        assert!(party
            .philosophers
            .iter()
            .all(|p| p.state() == PhilosopherState::HungryWithOneChopstick));
    }

    #[test]
    fn ordered_pair_runs_to_the_horizon() {
        let env = Environment::new(0);
        let party = build_party(
            &env,
            &PartyConfig::new(2, Variant::Ordered),
            &Trace::disabled(),
        )
        .unwrap();
        let out = env.run(Some(50_000.0)).unwrap();
        assert_eq!(out, RunOutcome::ReachedHorizon { now: 50_000.0 });
        assert!(party.mean_waiting() > 0.0);
    }
}
