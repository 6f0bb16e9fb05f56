//! Closed-form and quadrature evaluation of waiting times, threshold rates, utilities, joining
//! probabilities, revenue and social welfare for the classical, shared-belief and private-belief
//! information cases.
//!
//! Conventions: all rates are per unit time; `p` is the posted fee; `xi` is the threshold
//! effective arrival rate at which a joining customer exactly breaks even.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{expect, BeliefDistribution, ExpectationRequest, InfoCase, SystemParams, Transform};
use crate::numerics::bisect;

/// Bisection tolerance on joining probabilities.
pub const Q_TOL: f64 = 1e-12;

/// A fee together with its threshold effective arrival rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricePoint {
    pub p: f64,
    pub xi: f64,
}

impl PricePoint {
    pub fn at_fee(params: &SystemParams, p: f64) -> Self {
        PricePoint { p, xi: xi_of_p(params, p) }
    }

    pub fn at_threshold(params: &SystemParams, xi: f64) -> Result<Self> {
        Ok(PricePoint { p: xi_inverse(params, xi)?, xi })
    }
}

/// Level of the true-rate scale above which every shared-belief customer joins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharedThresholds {
    pub lambda_bar_s: f64,
}

/// Mean time in system (queueing delay plus service) at effective arrival rate `lambda_e`.
pub fn waiting_time(params: &SystemParams, lambda_e: f64) -> Result<f64> {
    if lambda_e >= params.mu() {
        return Err(Error::UnstableRegime { rate: lambda_e, mu: params.mu() });
    }
    if lambda_e < 0.0 {
        return Err(Error::InvalidParams(format!("effective rate {lambda_e} is negative")));
    }
    Ok(params.pk_wait(lambda_e))
}

/// Threshold effective arrival rate for fee `p`; 0 once `p >= R - C/mu`.
pub fn xi_of_p(params: &SystemParams, p: f64) -> f64 {
    let surplus = params.r() - p - params.c() / params.mu();
    if surplus <= 0.0 {
        return 0.0;
    }
    1.0 / (params.c() * params.s2() / (2.0 * surplus) + 1.0 / params.mu())
}

/// Fee that yields threshold rate `x`.
pub fn xi_inverse(params: &SystemParams, x: f64) -> Result<f64> {
    let mu = params.mu();
    if x >= mu {
        return Err(Error::UnstableRegime { rate: x, mu });
    }
    if x < 0.0 {
        return Err(Error::InvalidParams(format!("threshold rate {x} is negative")));
    }
    Ok(params.max_fee() - params.c() * params.s2() * mu * x / (2.0 * (mu - x)))
}

/// Net benefit of joining when everybody knows the true rate and joins with probability `q`.
pub fn u_classical(params: &SystemParams, p: f64, q: f64) -> Result<f64> {
    check_prob(q)?;
    Ok(params.r() - p - params.c() * waiting_time(params, q * params.lambda())?)
}

/// Net benefit averaged over the shared belief.
pub fn u_shared(params: &SystemParams, belief: &BeliefDistribution, p: f64, q: f64) -> Result<f64> {
    let ew = expect(belief, ExpectationRequest::new(q, Transform::W), params)?;
    Ok(params.r() - p - params.c() * ew)
}

fn check_prob(q: f64) -> Result<()> {
    if (0.0..=1.0).contains(&q) {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("joining probability {q} outside [0, 1]")))
    }
}

/// Largest joining probability that keeps every believed rate below `mu`.
pub(crate) fn shared_q_ceiling(params: &SystemParams, belief: &BeliefDistribution) -> f64 {
    (1.0f64).min((params.mu() - 1e-9) / belief.lambda_max())
}

pub fn q_classical_of_p(params: &SystemParams, p: f64) -> f64 {
    (xi_of_p(params, p) / params.lambda()).min(1.0)
}

/// Equilibrium joining probability under a shared belief: 1 above the saturation threshold,
/// otherwise the unique root of the (strictly decreasing) shared utility.
pub fn q_shared_of_p(params: &SystemParams, belief: &BeliefDistribution, p: f64) -> Result<f64> {
    if u_shared(params, belief, p, 0.0)? <= 0.0 {
        return Ok(0.0);
    }
    if let Ok(t) = shared_saturation_threshold(params, belief) {
        if xi_of_p(params, p) > t.lambda_bar_s {
            return Ok(1.0);
        }
    }
    let hi = shared_q_ceiling(params, belief);
    let u = |q: f64| u_shared(params, belief, p, q).expect("q stays below the stability ceiling");
    if u(hi) >= 0.0 {
        return Ok(hi);
    }
    bisect(u, 0.0, hi, Q_TOL)
}

/// Threshold rate above which every shared-belief customer joins: the effective rate whose
/// waiting time equals E[W(Λ)] (for exponential service, `mu - 1/E[W(Λ)]`).
pub fn shared_saturation_threshold(params: &SystemParams, belief: &BeliefDistribution) -> Result<SharedThresholds> {
    let ew = expect(belief, ExpectationRequest::new(1.0, Transform::W), params)?;
    Ok(SharedThresholds {
        lambda_bar_s: params.pk_wait_inverse(ew),
    })
}

/// E[Q(p)] with Q(p) = min(ξ(p)/Λ, 1), evaluated by its three-branch form.
pub fn eq_private(params: &SystemParams, belief: &BeliefDistribution, p: f64) -> f64 {
    eq_private_at_xi(belief, xi_of_p(params, p))
}

pub(crate) fn eq_private_at_xi(belief: &BeliefDistribution, xi: f64) -> f64 {
    if xi >= belief.lambda_max() {
        1.0
    } else if xi <= belief.lambda_min() {
        xi * belief.inv_mean()
    } else {
        belief.cdf(xi) + xi * belief.upper_expectation(|l| 1.0 / l, xi)
    }
}

/// Aggregate joining probability for an information case.
pub fn joining_probability(params: &SystemParams, belief: &BeliefDistribution, case: InfoCase, p: f64) -> Result<f64> {
    match case {
        InfoCase::Classical => Ok(q_classical_of_p(params, p)),
        InfoCase::SharedBelief => q_shared_of_p(params, belief, p),
        InfoCase::PrivateBelief => Ok(eq_private(params, belief, p)),
    }
}

/// Revenue rate `p * lambda * q_case(p)`.
pub fn revenue(params: &SystemParams, belief: &BeliefDistribution, case: InfoCase, p: f64) -> Result<f64> {
    match case {
        // p * min(xi, lambda), the continuous form of the two-branch expression.
        InfoCase::Classical => Ok(p * xi_of_p(params, p).min(params.lambda())),
        _ => Ok(p * params.lambda() * joining_probability(params, belief, case, p)?),
    }
}

/// Which private-case welfare is meant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WelfareVariant {
    /// Expectation over Λ of `λQ(R - C W(λQ))`, waiting evaluated per belief.
    PerBelief,
    /// `λE[Q](R - C W(λE[Q]))`, waiting evaluated at the realized aggregate rate.
    Physical,
}

/// Welfare rate at effective rate `x`: `x (R - C W(x))`.
pub(crate) fn welfare_at_rate(params: &SystemParams, x: f64) -> Result<f64> {
    Ok(x * (params.r() - params.c() * waiting_time(params, x)?))
}

/// Social-welfare rate. The private case has two variants; see [`WelfareVariant`].
pub fn welfare(
    params: &SystemParams,
    belief: &BeliefDistribution,
    case: InfoCase,
    p: f64,
    variant: WelfareVariant,
) -> Result<f64> {
    let lambda = params.lambda();
    match case {
        InfoCase::Classical => welfare_at_rate(params, lambda * q_classical_of_p(params, p)),
        InfoCase::SharedBelief => welfare_at_rate(params, lambda * q_shared_of_p(params, belief, p)?),
        InfoCase::PrivateBelief => match variant {
            WelfareVariant::Physical => welfare_at_rate(params, lambda * eq_private(params, belief, p)),
            WelfareVariant::PerBelief => {
                let xi = xi_of_p(params, p);
                let (r, c) = (params.r(), params.c());
                Ok(belief.expectation(
                    |l| {
                        let x = lambda * (xi / l).min(1.0);
                        x * (r - c * params.pk_wait(x))
                    },
                    &[xi],
                ))
            }
        },
    }
}

/// Revenue rate under full information as a function of the joining probability; identical to
/// the classical and shared social welfare as functions of `q`.
pub fn rev_classical_q(params: &SystemParams, q: f64) -> Result<f64> {
    check_prob(q)?;
    welfare_at_rate(params, q * params.lambda())
}

/// `q λ E[R - C W(qΛ)]`.
pub fn rev_shared_q(params: &SystemParams, belief: &BeliefDistribution, q: f64) -> Result<f64> {
    let ew = expect(belief, ExpectationRequest::new(q, Transform::W), params)?;
    Ok(q * params.lambda() * (params.r() - params.c() * ew))
}

/// d/dq of [`rev_shared_q`]: `λ E[R - C(W(qΛ) + qΛ W'(qΛ))]`.
pub fn rev_shared_q_slope(params: &SystemParams, belief: &BeliefDistribution, q: f64) -> Result<f64> {
    let top = q * belief.lambda_max();
    if top >= params.mu() {
        return Err(Error::UnstableRegime { rate: top, mu: params.mu() });
    }
    let marginal_wait = belief.expectation(
        |l| {
            let x = q * l;
            params.pk_wait(x) + x * params.pk_wait_slope(x)
        },
        &[],
    );
    Ok(params.lambda() * (params.r() - params.c() * marginal_wait))
}

/// d/dq of [`rev_classical_q`].
pub fn rev_classical_q_slope(params: &SystemParams, q: f64) -> Result<f64> {
    let x = q * params.lambda();
    waiting_time(params, x)?;
    Ok(params.lambda() * (params.r() - params.c() * (params.pk_wait(x) + x * params.pk_wait_slope(x))))
}

/// Per-fee bundle of every case's joining probability, revenue and welfare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub p: f64,
    pub xi: f64,
    pub q_c: f64,
    pub q_s: Option<f64>,
    pub eq_p: f64,
    pub rev_c: f64,
    pub rev_s: Option<f64>,
    pub rev_p: f64,
    pub sw_c: f64,
    pub sw_s: Option<f64>,
    pub sw_p_paper: f64,
    pub sw_p_physical: f64,
    /// Fields that could not be evaluated, with the reason.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<FieldFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldFailure {
    pub field: String,
    pub reason: String,
}

pub fn metrics_row(params: &SystemParams, belief: &BeliefDistribution, p: f64) -> MetricsRow {
    let lambda = params.lambda();
    let xi = xi_of_p(params, p);
    let q_c = q_classical_of_p(params, p);
    let eq_p = eq_private(params, belief, p);
    let mut failures = Vec::new();
    let q_s = match q_shared_of_p(params, belief, p) {
        Ok(q) => Some(q),
        Err(e) => {
            failures.push(FieldFailure { field: "q_s".into(), reason: e.to_string() });
            None
        }
    };
    // Effective rates are at most lambda < mu, so the welfare evaluations cannot fail.
    let sw = |x: f64| welfare_at_rate(params, x).expect("effective rate below mu");
    MetricsRow {
        p,
        xi,
        q_c,
        q_s,
        eq_p,
        rev_c: p * xi.min(lambda),
        rev_s: q_s.map(|q| p * lambda * q),
        rev_p: p * lambda * eq_p,
        sw_c: sw(lambda * q_c),
        sw_s: q_s.map(|q| sw(lambda * q)),
        sw_p_paper: welfare(params, belief, InfoCase::PrivateBelief, p, WelfareVariant::PerBelief)
            .expect("effective rate below mu"),
        sw_p_physical: sw(lambda * eq_p),
        failures,
    }
}
