use std::cell::RefCell;
use std::rc::Rc;

use crate::error::{invalid, Result};
use crate::kernel::Environment;
use crate::resources::Resource;

/// Arrival and service rates of a single-server queue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MM1Params {
    pub arrival_rate: f64,
    pub service_rate: f64,
}

impl MM1Params {
    pub fn new(arrival_rate: f64, service_rate: f64) -> Result<Self> {
        let p = MM1Params {
            arrival_rate,
            service_rate,
        };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<()> {
        let (l, m) = (self.arrival_rate, self.service_rate);
        if !(l.is_finite() && m.is_finite() && l >= 0.0 && m > 0.0) {
            return Err(invalid(format!(
                "rates must be finite and positive: λ={l}, μ={m}"
            )));
        }
        if l >= m {
            return Err(invalid(format!("unstable queue: λ={l} ≥ μ={m}")));
        }
        Ok(())
    }

    pub fn utilization(&self) -> f64 {
        self.arrival_rate / self.service_rate
    }
}

/// Closed-form mean time in queue: λ / (μ (μ − λ)).
pub fn mm1_expected_wait(params: MM1Params) -> Result<f64> {
    params.check()?;
    let (l, m) = (params.arrival_rate, params.service_rate);
    Ok(l / (m * (m - l)))
}

/// Observed mean time in queue over `n_customers` customers served by a
/// capacity-1 resource with Poisson arrivals and exponential service.
pub fn mm1_simulate(params: MM1Params, n_customers: usize, seed: u64) -> Result<f64> {
    params.check()?;
    if n_customers == 0 {
        return Ok(0.0);
    }
    let env = Environment::new(seed);
    let server = Resource::new(&env, 1)?;
    let waits = Rc::new(RefCell::new(Vec::with_capacity(n_customers)));

    let h = env.handle();
    let (w, s) = (waits.clone(), server.clone());
    env.process_named("arrivals", async move {
        for i in 0..n_customers {
            let (hc, wc, sc) = (h.clone(), w.clone(), s.clone());
            h.process(async move {
                let arrived = hc.now();
                let rq = sc.request();
                (&rq).await?;
                wc.borrow_mut().push(hc.now() - arrived);
                let service = hc.expovariate(1.0 / params.service_rate);
                hc.timeout(service).await?;
                sc.release(&rq)?;
                Ok(())
            });
            if i + 1 < n_customers {
                let gap = h.expovariate(1.0 / params.arrival_rate);
                h.timeout(gap).await?;
            }
        }
        Ok(())
    });
    env.run(None)?;

    let waits = waits.borrow();
    Ok(waits.iter().sum::<f64>() / waits.len() as f64)
}
