//! Discrete-event simulation of the single-server FCFS queue with belief-driven joining.
//! Used as an independent check on the analytic joining fractions, waits, revenue and welfare.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::analytics::{joining_probability, waiting_time, welfare_at_rate, xi_of_p};
use crate::error::{Error, Result};
use crate::model::{BeliefDistribution, InfoCase, SystemParams};

/// Utilization at which a run is declared saturated.
pub const SATURATION: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServiceDist {
    Exponential,
    Deterministic,
    /// Log-normal with mean `1/mu` and second moment `s2`.
    LogNormal,
}

impl ServiceDist {
    /// Second moment of this distribution when its mean is `1/mu`, if it is pinned.
    pub fn pinned_second_moment(self, mu: f64) -> Option<f64> {
        match self {
            ServiceDist::Exponential => Some(2.0 / (mu * mu)),
            ServiceDist::Deterministic => Some(1.0 / (mu * mu)),
            ServiceDist::LogNormal => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: SystemParams,
    pub belief: BeliefDistribution,
    pub case: InfoCase,
    pub p: f64,
    pub horizon: f64,
    pub warmup: f64,
    pub seed: u64,
    pub service: ServiceDist,
    #[serde(default = "default_batches")]
    pub batches: usize,
}

fn default_batches() -> usize {
    20
}

impl SimConfig {
    /// Config with a 1% warmup and 20 batches.
    pub fn new(
        params: SystemParams,
        belief: BeliefDistribution,
        case: InfoCase,
        p: f64,
        horizon: f64,
        seed: u64,
        service: ServiceDist,
    ) -> Self {
        SimConfig {
            params,
            belief,
            case,
            p,
            horizon,
            warmup: 0.01 * horizon,
            seed,
            service,
            batches: default_batches(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.warmup >= 0.0 && self.horizon > self.warmup) {
            return Err(Error::InvalidConfig(format!(
                "need horizon > warmup >= 0, got horizon {} and warmup {}",
                self.horizon, self.warmup
            )));
        }
        if self.batches < 20 {
            return Err(Error::InvalidConfig(format!("need at least 20 batches, got {}", self.batches)));
        }
        if !self.p.is_finite() {
            return Err(Error::InvalidConfig(format!("fee {} is not finite", self.p)));
        }
        let (mu, s2) = (self.params.mu(), self.params.s2());
        match self.service.pinned_second_moment(mu) {
            Some(m2) if (m2 - s2).abs() > 1e-9 * m2 => Err(Error::InvalidConfig(format!(
                "{:?} service has second moment {m2}, params say {s2}",
                self.service
            ))),
            None if s2 * mu * mu <= 1.0 => Err(Error::InvalidConfig(format!(
                "log-normal service needs s2 > 1/mu^2, got {s2}"
            ))),
            _ => Ok(()),
        }
    }
}

/// Mean and 95% batch-means half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
}

impl Estimate {
    fn from_batches(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        if values.len() < 2 {
            return Estimate { mean, half_width: 0.0 };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let t = StudentsT::new(0.0, 1.0, n - 1.0)
            .expect("positive degrees of freedom")
            .inverse_cdf(0.975);
        Estimate {
            mean,
            half_width: t * (var / n).sqrt(),
        }
    }

    pub fn contains(&self, value: f64, widths: f64) -> bool {
        (self.mean - value).abs() <= widths * self.half_width + 1e-12 * value.abs().max(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub case: InfoCase,
    pub p: f64,
    /// Counts after warmup.
    pub n_arrivals: u64,
    pub n_joined: u64,
    pub join_fraction: Estimate,
    /// Mean time in system of joined customers; `None` when nobody joined.
    pub mean_wait: Option<Estimate>,
    pub revenue_rate: Estimate,
    /// Rate of `R - C * sojourn` accrued by joined customers.
    pub welfare_rate_physical: Estimate,
    pub utilization: f64,
    pub batches: usize,
}

/// One arrival as seen by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub arrival_time: f64,
    /// Arrival rate this customer believes in; private case only.
    pub belief: Option<f64>,
    pub joined: bool,
    /// Time in system; joined customers only.
    pub wait: Option<f64>,
}

enum Service {
    Exp(Exp<f64>),
    Fixed(f64),
    LogNormal(LogNormal<f64>),
}

impl Service {
    fn new(dist: ServiceDist, mu: f64, s2: f64) -> Self {
        match dist {
            ServiceDist::Exponential => Service::Exp(Exp::new(mu).expect("mu > 0")),
            ServiceDist::Deterministic => Service::Fixed(1.0 / mu),
            ServiceDist::LogNormal => {
                let sigma2 = (s2 * mu * mu).ln();
                let m = -mu.ln() - 0.5 * sigma2;
                Service::LogNormal(LogNormal::new(m, sigma2.sqrt()).expect("sigma > 0"))
            }
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            Service::Exp(d) => d.sample(rng),
            Service::Fixed(s) => *s,
            Service::LogNormal(d) => d.sample(rng),
        }
    }
}

#[derive(Default, Clone, Copy)]
struct Batch {
    arrivals: u64,
    joined: u64,
    sojourn: f64,
    utility: f64,
}

pub fn run(config: &SimConfig) -> Result<SimReport> {
    simulate(config, |_| {})
}

/// Runs the simulation, passing every arrival (including warmup) to `observer`.
pub fn simulate<F: FnMut(&TraceEvent)>(config: &SimConfig, mut observer: F) -> Result<SimReport> {
    config.validate()?;
    let params = &config.params;
    let (lambda, r, c) = (params.lambda(), params.r(), params.c());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let inter = Exp::new(lambda).expect("lambda > 0");
    let service = Service::new(config.service, params.mu(), params.s2());

    // Classical and shared customers all use the same probability; private ones use their draw.
    let shared_q = match config.case {
        InfoCase::PrivateBelief => None,
        case => Some(joining_probability(params, &config.belief, case, config.p)?),
    };
    let xi = xi_of_p(params, config.p);

    let span = config.horizon - config.warmup;
    let width = span / config.batches as f64;
    let mut batches = vec![Batch::default(); config.batches];
    let mut busy = 0.0;
    let mut t = 0.0;
    let mut free_at = 0.0f64;
    loop {
        t += inter.sample(&mut rng);
        if t >= config.horizon {
            break;
        }
        let (belief, prob) = match shared_q {
            Some(q) => (None, q),
            None => {
                let b = config.belief.sample(&mut rng);
                (Some(b), (xi / b).min(1.0))
            }
        };
        let joined = rng.gen::<f64>() < prob;
        let mut wait = None;
        if joined {
            let s = service.draw(&mut rng);
            let start = free_at.max(t);
            free_at = start + s;
            let sojourn = free_at - t;
            wait = Some(sojourn);
            // Busy time inside the measured window.
            let lo = start.max(config.warmup);
            let hi = free_at.min(config.horizon);
            if hi > lo {
                busy += hi - lo;
            }
        }
        observer(&TraceEvent {
            arrival_time: t,
            belief,
            joined,
            wait,
        });
        if t < config.warmup {
            continue;
        }
        let k = (((t - config.warmup) / width) as usize).min(config.batches - 1);
        let b = &mut batches[k];
        b.arrivals += 1;
        if let Some(w) = wait {
            b.joined += 1;
            b.sojourn += w;
            b.utility += r - c * w;
        }
    }

    let utilization = busy / span;
    if utilization >= SATURATION {
        return Err(Error::UnstableEffective { utilization });
    }

    let n_arrivals: u64 = batches.iter().map(|b| b.arrivals).sum();
    let n_joined: u64 = batches.iter().map(|b| b.joined).sum();
    let frac: Vec<f64> = batches
        .iter()
        .map(|b| if b.arrivals == 0 { 0.0 } else { b.joined as f64 / b.arrivals as f64 })
        .collect();
    let waits: Vec<f64> = batches
        .iter()
        .filter(|b| b.joined > 0)
        .map(|b| b.sojourn / b.joined as f64)
        .collect();
    let rev: Vec<f64> = batches.iter().map(|b| config.p * b.joined as f64 / width).collect();
    let sw: Vec<f64> = batches.iter().map(|b| b.utility / width).collect();

    Ok(SimReport {
        case: config.case,
        p: config.p,
        n_arrivals,
        n_joined,
        join_fraction: Estimate::from_batches(&frac),
        mean_wait: if waits.is_empty() { None } else { Some(Estimate::from_batches(&waits)) },
        revenue_rate: Estimate::from_batches(&rev),
        welfare_rate_physical: Estimate::from_batches(&sw),
        utilization,
        batches: config.batches,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCheck {
    pub metric: String,
    pub simulated: f64,
    pub half_width: f64,
    pub analytic: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub report: SimReport,
    pub checks: Vec<MetricCheck>,
}

impl ValidationSummary {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Half-widths allowed between simulation and analytics.
pub const VALIDATION_WIDTHS: f64 = 3.0;

/// Runs the simulator and compares each metric with its analytic value.
pub fn validate_against_analytics(config: &SimConfig) -> Result<ValidationSummary> {
    let report = run(config)?;
    let params = &config.params;
    let q = joining_probability(params, &config.belief, config.case, config.p)?;
    let rate = params.lambda() * q;

    let check = |metric: &str, est: &Estimate, analytic: f64| MetricCheck {
        metric: metric.to_string(),
        simulated: est.mean,
        half_width: est.half_width,
        analytic,
        pass: est.contains(analytic, VALIDATION_WIDTHS),
    };
    let mut checks = vec![
        check("join_fraction", &report.join_fraction, q),
        check("revenue_rate", &report.revenue_rate, config.p * rate),
        check("welfare_rate_physical", &report.welfare_rate_physical, welfare_at_rate(params, rate)?),
    ];
    if let Some(w) = &report.mean_wait {
        checks.push(check("mean_wait", w, waiting_time(params, rate)?));
    }
    Ok(ValidationSummary { report, checks })
}
