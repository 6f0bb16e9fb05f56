//! Revenue comparisons at a fixed fee, fee optimization, optimal-value comparisons and the
//! disclosure advisor.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{
    eq_private_at_xi, q_shared_of_p, revenue, shared_saturation_threshold, welfare, xi_inverse, xi_of_p,
    WelfareVariant,
};
use crate::equilibrium::solve_shared;
use crate::error::{Error, Result};
use crate::model::{BeliefDistribution, InfoCase, SystemParams};
use crate::numerics::{bisect, golden_max};

/// Width of the band inside which two rates or revenues are reported equal.
pub const EQUAL_BAND: f64 = 1e-9;
/// Bisection tolerance for the private/shared crossover.
pub const XI0_TOL: f64 = 1e-10;
/// Seeds scanned before refining fee optima.
pub const PRICE_SEEDS: usize = 64;
/// Golden-section tolerance on fees.
pub const PRICE_TOL: f64 = 1e-9;
/// Relative gap above which two separated local optima are reported as non-unimodality.
pub const UNIMODAL_REL_TOL: f64 = 1e-6;

/// Threshold rate: at fee `p` with `xi(p) < lambda_max`, private-belief revenue exceeds
/// classical revenue exactly when the true rate exceeds `threshold_m(belief, xi(p))`.
pub fn threshold_m(belief: &BeliefDistribution, xi: f64) -> Result<f64> {
    if xi > belief.lambda_max() {
        return Err(Error::OutOfSupport {
            xi,
            lambda_max: belief.lambda_max(),
        });
    }
    if !(xi >= 0.0) {
        return Err(Error::InvalidParams(format!("threshold rate {xi} is negative")));
    }
    if xi <= belief.lambda_min() {
        return Ok(belief.harmonic_mean());
    }
    Ok(xi / eq_private_at_xi(belief, xi))
}

/// [`threshold_m`] over `[0, lambda_max]` with its two anchors cached.
#[derive(Debug, Clone)]
pub struct ThresholdCurve<'a> {
    belief: &'a BeliefDistribution,
    /// Value on `[0, lambda_min]`: the harmonic mean of the belief.
    pub floor: f64,
    /// Value at `lambda_max`, equal to `lambda_max`.
    pub at_top: f64,
}

impl<'a> ThresholdCurve<'a> {
    pub fn new(belief: &'a BeliefDistribution) -> Self {
        ThresholdCurve {
            belief,
            floor: belief.harmonic_mean(),
            at_top: belief.lambda_max(),
        }
    }

    pub fn eval(&self, xi: f64) -> Result<f64> {
        if xi <= self.belief.lambda_min() && xi >= 0.0 {
            return Ok(self.floor);
        }
        threshold_m(self.belief, xi)
    }

    /// `n + 1` equally spaced points over `[lo, hi]`, clipped to `[0, lambda_max]`.
    pub fn polyline(&self, lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
        let lo = lo.max(0.0);
        let hi = hi.min(self.belief.lambda_max());
        if !(hi >= lo) {
            return Vec::new();
        }
        let n = n.max(1);
        (0..=n)
            .map(|i| {
                let x = lo + (hi - lo) * i as f64 / n as f64;
                (x, self.eval(x).expect("inside support"))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dominance {
    #[serde(rename = "<")]
    Less,
    #[serde(rename = "=")]
    Equal,
    #[serde(rename = ">")]
    Greater,
    #[serde(rename = "indeterminate")]
    Indeterminate,
}

impl Dominance {
    pub fn from_diff(diff: f64, band: f64) -> Self {
        if diff.is_nan() {
            Dominance::Indeterminate
        } else if diff.abs() <= band {
            Dominance::Equal
        } else if diff > 0.0 {
            Dominance::Greater
        } else {
            Dominance::Less
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Dominance::Less => "<",
            Dominance::Equal => "=",
            Dominance::Greater => ">",
            Dominance::Indeterminate => "indeterminate",
        }
    }

    fn admits(self, a: i8, b: i8) -> bool {
        match self {
            Dominance::Less => a < b,
            Dominance::Equal => a == b,
            Dominance::Greater => a > b,
            Dominance::Indeterminate => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// Fixed by a sufficient condition on the rates.
    Sufficient,
    /// Determined by evaluating both sides.
    Computed,
}

/// Pairwise revenue ordering at one `(xi, lambda)` point. Labels compare the effective joining
/// rates, so they match the revenue ordering for every positive fee.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionClass {
    pub xi: f64,
    pub lambda: f64,
    pub p_vs_c: Dominance,
    pub s_vs_c: Dominance,
    pub s_vs_c_basis: Basis,
    pub p_vs_s: Dominance,
    /// Some weak order of the three cases agrees with all three labels.
    pub consistent: bool,
}

/// True when a weak order of (P, S, C) satisfies the three pairwise labels.
pub fn labels_consistent(p_vs_c: Dominance, s_vs_c: Dominance, p_vs_s: Dominance) -> bool {
    for p in 0..3i8 {
        for s in 0..3i8 {
            for c in 0..3i8 {
                if p_vs_c.admits(p, c) && s_vs_c.admits(s, c) && p_vs_s.admits(p, s) {
                    return true;
                }
            }
        }
    }
    false
}

/// Everything about a threshold rate that does not depend on the true arrival rate.
#[derive(Debug, Clone, Copy)]
struct XiColumn {
    xi: f64,
    q_shared: Option<f64>,
    eq_private: f64,
    m: Option<f64>,
}

/// Belief-level quantities shared by every point of a region map.
struct RegionContext<'a> {
    params: &'a SystemParams,
    belief: &'a BeliefDistribution,
    saturation: Option<f64>,
    xi0: std::result::Result<f64, Error>,
}

impl<'a> RegionContext<'a> {
    fn new(params: &'a SystemParams, belief: &'a BeliefDistribution) -> Self {
        RegionContext {
            params,
            belief,
            saturation: shared_saturation_threshold(params, belief).ok().map(|t| t.lambda_bar_s),
            xi0: find_xi0(params, belief),
        }
    }

    fn column(&self, xi: f64) -> XiColumn {
        XiColumn {
            xi,
            q_shared: shared_q_at_xi(self.params, self.belief, xi).ok(),
            eq_private: eq_private_at_xi(self.belief, xi),
            m: threshold_m(self.belief, xi).ok(),
        }
    }

    fn classify(&self, col: &XiColumn, lambda: f64) -> RegionClass {
        let xi = col.xi;
        let top = self.belief.lambda_max();
        let band = EQUAL_BAND * lambda.max(1.0);

        let p_vs_c = if xi >= top {
            // Every private-belief customer joins; fully informed ones are capped at xi.
            Dominance::from_diff(lambda - xi.min(lambda), band)
        } else {
            match col.m {
                Some(m) => Dominance::from_diff(lambda - m, band),
                None => Dominance::Indeterminate,
            }
        };

        let classical_rate = xi.min(lambda);
        let s_vs_c = match col.q_shared {
            Some(q) => Dominance::from_diff(lambda * q - classical_rate, band),
            None => Dominance::Indeterminate,
        };
        let mean = self.belief.mean();
        let by_condition = lambda <= mean
            || match self.saturation {
                Some(bar) => (lambda <= bar && xi >= lambda) || (lambda > bar && xi >= bar),
                None => false,
            };
        let s_vs_c_basis = if by_condition { Basis::Sufficient } else { Basis::Computed };

        let p_vs_s = if xi >= top {
            Dominance::Equal
        } else {
            match &self.xi0 {
                Ok(x0) => Dominance::from_diff(x0 - xi, XI0_TOL * 10.0),
                Err(Error::NoCrossing { identical: true, .. }) => Dominance::Equal,
                Err(_) => match col.q_shared {
                    Some(q) => Dominance::from_diff(col.eq_private - q, EQUAL_BAND),
                    None => Dominance::Indeterminate,
                },
            }
        };

        RegionClass {
            xi,
            lambda,
            p_vs_c,
            s_vs_c,
            s_vs_c_basis,
            p_vs_s,
            consistent: labels_consistent(p_vs_c, s_vs_c, p_vs_s),
        }
    }
}

/// Shared-belief joining probability at the fee whose threshold rate is `xi`.
pub fn shared_q_at_xi(params: &SystemParams, belief: &BeliefDistribution, xi: f64) -> Result<f64> {
    q_shared_of_p(params, belief, xi_inverse(params, xi)?)
}

pub fn classify_region(params: &SystemParams, belief: &BeliefDistribution, p: f64) -> RegionClass {
    let ctx = RegionContext::new(params, belief);
    let col = ctx.column(xi_of_p(params, p));
    ctx.classify(&col, params.lambda())
}

/// Threshold rate below which private-belief revenue exceeds shared-belief revenue. Does not
/// depend on the true arrival rate.
pub fn find_xi0(params: &SystemParams, belief: &BeliefDistribution) -> Result<f64> {
    let lo = belief.lambda_min();
    let upper = match shared_saturation_threshold(params, belief) {
        Ok(t) => t.lambda_bar_s.min(belief.lambda_max()),
        Err(_) => belief.lambda_max(),
    };
    let hi = upper.min(params.mu() * (1.0 - 1e-12));
    if belief.is_point_mass() {
        return Err(Error::NoCrossing { lo, hi, identical: true });
    }
    let g = |xi: f64| -> f64 {
        match shared_q_at_xi(params, belief, xi) {
            Ok(q) => eq_private_at_xi(belief, xi) - q,
            Err(_) => f64::NAN,
        }
    };
    let (g_lo, g_hi) = (g(lo), g(hi));
    if g_lo.abs() <= EQUAL_BAND && g_hi.abs() <= EQUAL_BAND {
        return Err(Error::NoCrossing { lo, hi, identical: true });
    }
    if g_lo.abs() <= EQUAL_BAND {
        return Ok(lo);
    }
    if g_hi.abs() <= EQUAL_BAND {
        return Ok(hi);
    }
    match bisect(g, lo, hi, XI0_TOL) {
        Ok(x) => Ok(x),
        Err(_) => Err(Error::NoCrossing { lo, hi, identical: false }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Revenue,
    WelfarePerBelief,
    WelfarePhysical,
}

impl From<WelfareVariant> for Objective {
    fn from(v: WelfareVariant) -> Self {
        match v {
            WelfareVariant::PerBelief => Objective::WelfarePerBelief,
            WelfareVariant::Physical => Objective::WelfarePhysical,
        }
    }
}

impl Objective {
    pub fn evaluate(self, params: &SystemParams, belief: &BeliefDistribution, case: InfoCase, p: f64) -> Result<f64> {
        match self {
            Objective::Revenue => revenue(params, belief, case, p),
            Objective::WelfarePerBelief => welfare(params, belief, case, p, WelfareVariant::PerBelief),
            Objective::WelfarePhysical => welfare(params, belief, case, p, WelfareVariant::Physical),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceOptimum {
    pub p: f64,
    pub value: f64,
}

/// Maximizes the objective over fees in `[0, R - C/mu]`.
pub fn optimize_price(
    params: &SystemParams,
    belief: &BeliefDistribution,
    case: InfoCase,
    objective: Objective,
) -> Result<PriceOptimum> {
    if case == InfoCase::Classical && objective == Objective::Revenue && params.is_mm1() {
        let xi = (params.mu() - (params.c() * params.mu() / params.r()).sqrt()).min(params.lambda());
        let p = xi_inverse(params, xi)?;
        return Ok(PriceOptimum { p, value: p * xi });
    }
    let f = |p: f64| objective.evaluate(params, belief, case, p);
    multistart_max(f, 0.0, params.max_fee())
}

/// Scans equally spaced seeds, refines every local maximum (a run of equal values counts as
/// one) by golden section, and rejects separated maxima whose values disagree.
fn multistart_max<F: Fn(f64) -> Result<f64>>(f: F, lo: f64, hi: f64) -> Result<PriceOptimum> {
    let n = PRICE_SEEDS;
    let step = (hi - lo) / n as f64;
    let xs: Vec<f64> = (0..=n).map(|i| if i == n { hi } else { lo + step * i as f64 }).collect();
    let ys = xs.iter().map(|&x| f(x)).collect::<Result<Vec<f64>>>()?;

    let mut candidates = Vec::new();
    let mut i = 0;
    while i <= n {
        let mut j = i;
        while j < n && ys[j + 1] == ys[i] {
            j += 1;
        }
        let left_lower = i == 0 || ys[i - 1] < ys[i];
        let right_lower = j == n || ys[j + 1] < ys[j];
        if left_lower && right_lower {
            let a = xs[i.saturating_sub(1)];
            let b = xs[(j + 1).min(n)];
            let (x, v) = golden_max(|x| f(x).unwrap_or(f64::NEG_INFINITY), a, b, PRICE_TOL);
            candidates.push(PriceOptimum { p: x, value: v });
        }
        i = j + 1;
    }

    let best = *candidates
        .iter()
        .max_by(|a, b| a.value.total_cmp(&b.value))
        .expect("a finite grid has a maximum");
    for c in &candidates {
        let separated = (c.p - best.p).abs() > 2.0 * step;
        let gap = (best.value - c.value) / best.value.abs().max(f64::MIN_POSITIVE);
        if separated && gap > UNIMODAL_REL_TOL {
            return Err(Error::NonUnimodal {
                first: (best.p, best.value),
                second: (c.p, c.value),
            });
        }
    }
    Ok(best)
}

/// A claimed relation `left ∘ right` between two optimal values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Claim {
    Le,
    Lt,
    Ge,
    Eq,
}

impl Claim {
    fn admits(self, diff: f64, tol: f64) -> bool {
        match self {
            Claim::Le | Claim::Lt => diff <= tol,
            Claim::Ge => diff >= -tol,
            Claim::Eq => diff.abs() <= tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseOptimum {
    pub case: InfoCase,
    pub p: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub left: InfoCase,
    pub right: InfoCase,
    /// Relation guaranteed by the rate conditions, if any applies.
    pub asserted: Option<Claim>,
    pub condition: String,
    pub computed: Dominance,
    /// The asserted relation agrees with the computed optima.
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalComparison {
    pub objective: Objective,
    pub optima: Vec<CaseOptimum>,
    pub pairs: Vec<PairComparison>,
}

impl OptimalComparison {
    pub fn optimum(&self, case: InfoCase) -> &CaseOptimum {
        self.optima.iter().find(|o| o.case == case).expect("all cases present")
    }

    pub fn pair(&self, left: InfoCase, right: InfoCase) -> &PairComparison {
        self.pairs
            .iter()
            .find(|p| p.left == left && p.right == right)
            .expect("all pairs present")
    }

    /// Case with the largest optimal value; ties go to the less informed case.
    pub fn best(&self) -> &CaseOptimum {
        let top = self.optima.iter().map(|o| o.value).fold(f64::NEG_INFINITY, f64::max);
        let tol = COMPARE_REL_TOL * top.abs().max(1.0);
        self.optima
            .iter()
            .filter(|o| o.value >= top - tol)
            .min_by_key(|o| o.case.information_rank())
            .expect("non-empty")
    }
}

/// Relative tolerance when checking claims against numerically optimized values.
pub const COMPARE_REL_TOL: f64 = 1e-7;

fn all_optima(params: &SystemParams, belief: &BeliefDistribution, objective: Objective) -> Result<Vec<CaseOptimum>> {
    InfoCase::ALL
        .iter()
        .map(|&case| {
            optimize_price(params, belief, case, objective).map(|o| CaseOptimum {
                case,
                p: o.p,
                value: o.value,
            })
        })
        .collect()
}

fn build_pairs(optima: &[CaseOptimum], claims: [(InfoCase, InfoCase, Option<Claim>, String); 3]) -> Vec<PairComparison> {
    let value = |c: InfoCase| optima.iter().find(|o| o.case == c).expect("present").value;
    claims
        .into_iter()
        .map(|(left, right, asserted, condition)| {
            let (l, r) = (value(left), value(right));
            let tol = COMPARE_REL_TOL * l.abs().max(r.abs()).max(1.0);
            PairComparison {
                left,
                right,
                asserted,
                condition,
                computed: Dominance::from_diff(l - r, tol),
                consistent: asserted.map_or(true, |c| c.admits(l - r, tol)),
            }
        })
        .collect()
}

/// Threshold rate maximizing classical revenue when it is unconstrained by the true rate.
pub fn xi_classical(params: &SystemParams) -> f64 {
    params.mu() - (params.c() * params.mu() / params.r()).sqrt()
}

/// `sqrt(C / (R mu))`.
pub fn epsilon(params: &SystemParams) -> f64 {
    (params.c() / (params.r() * params.mu())).sqrt()
}

/// Threshold value at the classical revenue-maximizing rate, capped to the belief support.
fn m_at_xi_classical(params: &SystemParams, belief: &BeliefDistribution) -> f64 {
    threshold_m(belief, xi_classical(params).min(belief.lambda_max())).expect("capped inside support")
}

pub fn compare_optimal_revenue(params: &SystemParams, belief: &BeliefDistribution) -> Result<OptimalComparison> {
    params.require_mm1()?;
    let optima = all_optima(params, belief, Objective::Revenue)?;
    let lambda = params.lambda();
    let h = belief.harmonic_mean();
    let (pc, pc_cond) = if lambda <= h {
        (Some(Claim::Le), format!("lambda {lambda} <= 1/E[1/Λ] {h}"))
    } else {
        let m = m_at_xi_classical(params, belief);
        if lambda >= m {
            (Some(Claim::Ge), format!("lambda {lambda} >= M(xi_C) {m}"))
        } else {
            (Some(Claim::Lt), format!("1/E[1/Λ] {h} < lambda {lambda} < M(xi_C) {m}"))
        }
    };
    let mean = belief.mean();
    let (sc, sc_cond) = if lambda <= mean {
        (Some(Claim::Le), format!("lambda {lambda} <= E[Λ] {mean}"))
    } else {
        (None, format!("lambda {lambda} > E[Λ] {mean}: no general ordering"))
    };
    let pairs = build_pairs(
        &optima,
        [
            (InfoCase::PrivateBelief, InfoCase::Classical, pc, pc_cond),
            (InfoCase::SharedBelief, InfoCase::Classical, sc, sc_cond),
            (
                InfoCase::PrivateBelief,
                InfoCase::SharedBelief,
                None,
                "no general ordering".to_string(),
            ),
        ],
    );
    Ok(OptimalComparison {
        objective: Objective::Revenue,
        optima,
        pairs,
    })
}

/// Which sufficient condition for the welfare ordering holds, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WelfareCondition {
    /// Free entry already saturates the shared case: `xi(0) >= lambda_bar_S`.
    Saturated,
    /// Beliefs do not overshoot much: `lambda_max <= (1 + eps) lambda`.
    BoundedOvershoot,
    Inapplicable,
}

pub fn welfare_condition(params: &SystemParams, belief: &BeliefDistribution) -> WelfareCondition {
    let xi0 = xi_of_p(params, 0.0);
    if let Ok(t) = shared_saturation_threshold(params, belief) {
        if xi0 >= t.lambda_bar_s {
            return WelfareCondition::Saturated;
        }
    }
    if belief.lambda_max() <= (1.0 + epsilon(params)) * params.lambda() {
        return WelfareCondition::BoundedOvershoot;
    }
    WelfareCondition::Inapplicable
}

pub fn compare_optimal_welfare(
    params: &SystemParams,
    belief: &BeliefDistribution,
    variant: WelfareVariant,
) -> Result<OptimalComparison> {
    params.require_mm1()?;
    let objective = Objective::from(variant);
    let optima = all_optima(params, belief, objective)?;
    let cond = welfare_condition(params, belief);
    let label = format!("{cond:?}");
    let applies = cond != WelfareCondition::Inapplicable;
    let claim = |c: Claim| if applies { Some(c) } else { None };
    let pairs = build_pairs(
        &optima,
        [
            (InfoCase::PrivateBelief, InfoCase::Classical, claim(Claim::Le), label.clone()),
            (InfoCase::SharedBelief, InfoCase::Classical, claim(Claim::Eq), label.clone()),
            (InfoCase::PrivateBelief, InfoCase::SharedBelief, claim(Claim::Le), label),
        ],
    );
    Ok(OptimalComparison {
        objective,
        optima,
        pairs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Audience {
    Rm,
    So,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CustomerRegime {
    /// `lambda <= 1/E[1/Λ]`
    Pessimistic,
    /// `1/E[1/Λ] < lambda <= E[Λ]`
    Neutral,
    /// `lambda > E[Λ]`
    Optimistic,
}

/// Regime and whether `lambda` sits on one of the two boundaries.
pub fn customer_regime(lambda: f64, belief: &BeliefDistribution) -> (CustomerRegime, bool) {
    let (h, m) = (belief.harmonic_mean(), belief.mean());
    let regime = if lambda <= h {
        CustomerRegime::Pessimistic
    } else if lambda <= m {
        CustomerRegime::Neutral
    } else {
        CustomerRegime::Optimistic
    };
    let near = |b: f64| (lambda - b).abs() <= 1e-12 * b.abs().max(1.0);
    (regime, near(h) || near(m))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    RevealTrueRate,
    RevealBeliefDistribution,
    Conceal,
    ComputeCaseByCase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdviceNumbers {
    pub lambda: f64,
    pub harmonic_mean: f64,
    pub mean: f64,
    pub xi_c: f64,
    pub m_at_xi_c: f64,
    pub epsilon: f64,
    /// Private/shared crossover rate and its fee, when defined.
    pub xi0: Option<f64>,
    pub crossover_fee: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Advice {
    pub audience: Audience,
    pub regime: CustomerRegime,
    /// `lambda` lies on a regime boundary.
    pub regime_tie: bool,
    pub action: Action,
    /// Fee to charge after acting.
    pub fee: Option<f64>,
    /// Objective value expected at that fee.
    pub value: Option<f64>,
    pub rationale: String,
    pub numbers: AdviceNumbers,
    /// Optima computed to support the recommendation, when any were needed.
    pub optima: Vec<CaseOptimum>,
    /// Disclosure may lower the objective; act only after checking the optima.
    pub caution: bool,
    /// Customers already believe the true rate, so disclosure changes nothing.
    pub informationally_equivalent: bool,
}

pub fn advise(params: &SystemParams, belief: &BeliefDistribution, audience: Audience) -> Result<Advice> {
    let lambda = params.lambda();
    let (regime, regime_tie) = customer_regime(lambda, belief);
    let xi0 = find_xi0(params, belief).ok();
    let numbers = AdviceNumbers {
        lambda,
        harmonic_mean: belief.harmonic_mean(),
        mean: belief.mean(),
        xi_c: xi_classical(params),
        m_at_xi_c: m_at_xi_classical(params, belief),
        epsilon: epsilon(params),
        xi0,
        crossover_fee: xi0.and_then(|x| xi_inverse(params, x).ok()),
    };
    let informationally_equivalent = belief.is_point_mass() && (belief.mean() - lambda).abs() <= 1e-12 * lambda;
    let mut advice = Advice {
        audience,
        regime,
        regime_tie,
        action: Action::ComputeCaseByCase,
        fee: None,
        value: None,
        rationale: String::new(),
        numbers,
        optima: Vec::new(),
        caution: false,
        informationally_equivalent,
    };
    if !params.is_mm1() {
        let objective = match audience {
            Audience::Rm => Objective::Revenue,
            Audience::So => Objective::WelfarePerBelief,
        };
        advice.optima = all_optima(params, belief, objective)?;
        advice.rationale = "service is not exponential, so no ordering is guaranteed; compare the optima".into();
        return Ok(advice);
    }
    match audience {
        Audience::Rm => advise_rm(params, belief, &mut advice)?,
        Audience::So => advise_so(params, belief, &mut advice)?,
    }
    Ok(advice)
}

fn classical_revenue_optimum(params: &SystemParams, belief: &BeliefDistribution) -> Result<PriceOptimum> {
    optimize_price(params, belief, InfoCase::Classical, Objective::Revenue)
}

fn advise_rm(params: &SystemParams, belief: &BeliefDistribution, advice: &mut Advice) -> Result<()> {
    let n = &advice.numbers;
    match advice.regime {
        CustomerRegime::Pessimistic => {
            let opt = classical_revenue_optimum(params, belief)?;
            advice.action = Action::RevealTrueRate;
            advice.fee = Some(opt.p);
            advice.value = Some(opt.value);
            advice.rationale = format!(
                "customers are pessimistic (lambda {} <= 1/E[1/Λ] {:.6}); private-belief revenue cannot beat full information",
                n.lambda, n.harmonic_mean
            );
        }
        CustomerRegime::Neutral => {
            if n.lambda < n.m_at_xi_c {
                let opt = classical_revenue_optimum(params, belief)?;
                advice.action = Action::RevealTrueRate;
                advice.fee = Some(opt.p);
                advice.value = Some(opt.value);
                advice.rationale = format!(
                    "customers are neutral and lambda {} < M(xi_C) {:.6}; full information earns more",
                    n.lambda, n.m_at_xi_c
                );
            } else {
                let opt = optimize_price(params, belief, InfoCase::PrivateBelief, Objective::Revenue)?;
                advice.action = Action::Conceal;
                advice.fee = Some(opt.p);
                advice.value = Some(opt.value);
                advice.rationale = format!(
                    "customers are neutral and lambda {} >= M(xi_C) {:.6}; keeping beliefs private earns at least as much",
                    n.lambda, n.m_at_xi_c
                );
            }
        }
        CustomerRegime::Optimistic => {
            let optima = all_optima(params, belief, Objective::Revenue)?;
            let cmp = OptimalComparison {
                objective: Objective::Revenue,
                optima,
                pairs: Vec::new(),
            };
            let best = *cmp.best();
            let private = *cmp.optimum(InfoCase::PrivateBelief);
            let high_price = match n.crossover_fee {
                Some(p0) => private.p >= p0,
                None => false,
            };
            if best.case == InfoCase::PrivateBelief && high_price {
                advice.action = Action::Conceal;
                advice.fee = Some(private.p);
                advice.value = Some(private.value);
                advice.rationale = format!(
                    "customers are optimistic; the best plan charges {:.6}, above the crossover fee {:.6}, where private beliefs earn the most",
                    private.p,
                    n.crossover_fee.unwrap_or(f64::NAN)
                );
            } else {
                advice.action = Action::ComputeCaseByCase;
                advice.fee = Some(best.p);
                advice.value = Some(best.value);
                advice.rationale = format!(
                    "customers are optimistic but the best plan is the {} case at fee {:.6}; compare disclosure options directly",
                    best.case, best.p
                );
            }
            advice.optima = cmp.optima;
        }
    }
    Ok(())
}

fn advise_so(params: &SystemParams, belief: &BeliefDistribution, advice: &mut Advice) -> Result<()> {
    let cond = welfare_condition(params, belief);
    if cond != WelfareCondition::Inapplicable {
        let shared = solve_shared(params, belief)?;
        let q = shared.q_s.aggregate();
        advice.action = Action::RevealBeliefDistribution;
        advice.fee = shared.p_s;
        advice.value = Some(crate::analytics::rev_classical_q(params, q)?);
        advice.rationale = match cond {
            WelfareCondition::Saturated => {
                "free entry saturates the shared-belief case; sharing the belief distribution (or the true rate) reaches the full-information welfare optimum".into()
            }
            _ => format!(
                "beliefs stay below (1 + eps) lambda = {:.6}; sharing the belief distribution (or the true rate) reaches the full-information welfare optimum",
                (1.0 + advice.numbers.epsilon) * advice.numbers.lambda
            ),
        };
    } else {
        advice.optima = all_optima(params, belief, Objective::WelfarePerBelief)?;
        let best = OptimalComparison {
            objective: Objective::WelfarePerBelief,
            optima: advice.optima.clone(),
            pairs: Vec::new(),
        }
        .best()
        .to_owned();
        advice.action = Action::ComputeCaseByCase;
        advice.caution = true;
        advice.fee = Some(best.p);
        advice.value = Some(best.value);
        advice.rationale = format!(
            "beliefs reach {:.6}, beyond (1 + eps) lambda = {:.6}; be cautious about disclosure",
            belief.lambda_max(),
            (1.0 + advice.numbers.epsilon) * advice.numbers.lambda
        );
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapGrid {
    pub xi_range: (f64, f64),
    pub lambda_range: (f64, f64),
    pub xi_steps: usize,
    pub lambda_steps: usize,
}

/// Where the three switch curves should meet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriplePoint {
    pub xi: f64,
    /// Value of the private/classical threshold curve at `xi`.
    pub lambda: f64,
    /// True rate at which shared and classical revenue coincide at `xi`.
    pub lambda_shared_switch: f64,
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMap {
    pub cells: Vec<RegionClass>,
    /// Private-vs-classical switch `(xi, M(xi))`.
    pub m_curve: Vec<(f64, f64)>,
    /// Private-vs-shared switch, a vertical line at `xi0` across the lambda range.
    pub xi0_line: Vec<(f64, f64)>,
    /// Shared-vs-classical switch `(xi, lambda)`, one point per lambda row where it exists.
    pub s_vs_c_curve: Vec<(f64, f64)>,
    pub triple_point: Option<TriplePoint>,
}

fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps == 0 {
        return vec![lo];
    }
    (0..=steps)
        .map(|i| if i == steps { hi } else { lo + (hi - lo) * i as f64 / steps as f64 })
        .collect()
}

/// True rate at which shared and classical revenue coincide for threshold `xi < lambda`.
pub fn shared_switch_lambda(params: &SystemParams, belief: &BeliefDistribution, xi: f64) -> Result<f64> {
    let q = shared_q_at_xi(params, belief, xi)?;
    Ok(xi / q)
}

/// For a fixed true rate, locates the threshold rate where shared and classical revenue swap.
fn s_vs_c_switch(ctx: &RegionContext<'_>, lambda: f64, lo: f64, hi: f64) -> Option<f64> {
    let hi = hi.min(lambda);
    if !(hi > lo) {
        return None;
    }
    let h = |xi: f64| match shared_q_at_xi(ctx.params, ctx.belief, xi) {
        Ok(q) => lambda * q - xi,
        Err(_) => f64::NAN,
    };
    const SCAN: usize = 32;
    let pts = linspace(lo, hi, SCAN);
    let vals: Vec<f64> = pts.iter().map(|&x| h(x)).collect();
    for k in 0..SCAN {
        let (a, b) = (vals[k], vals[k + 1]);
        if a.is_nan() || b.is_nan() {
            continue;
        }
        if a.abs() > EQUAL_BAND && b.abs() > EQUAL_BAND && a.signum() != b.signum() {
            return bisect(h, pts[k], pts[k + 1], XI0_TOL).ok();
        }
    }
    None
}

pub fn figure1_map(params: &SystemParams, belief: &BeliefDistribution, grid: MapGrid) -> RegionMap {
    let ctx = RegionContext::new(params, belief);
    let xis = linspace(grid.xi_range.0, grid.xi_range.1, grid.xi_steps);
    let lambdas = linspace(grid.lambda_range.0, grid.lambda_range.1, grid.lambda_steps);
    let columns: Vec<XiColumn> = xis.par_iter().map(|&x| ctx.column(x)).collect();
    let cells: Vec<RegionClass> = lambdas
        .par_iter()
        .flat_map_iter(|&l| columns.iter().map(move |c| (c, l)).collect::<Vec<_>>())
        .map(|(c, l)| ctx.classify(c, l))
        .collect();

    let curve = ThresholdCurve::new(belief);
    let m_curve = curve.polyline(grid.xi_range.0, grid.xi_range.1, grid.xi_steps.max(1));
    let xi0_line = match &ctx.xi0 {
        Ok(x) => vec![(*x, grid.lambda_range.0), (*x, grid.lambda_range.1)],
        Err(_) => Vec::new(),
    };
    let s_vs_c_curve: Vec<(f64, f64)> = lambdas
        .par_iter()
        .filter_map(|&l| s_vs_c_switch(&ctx, l, grid.xi_range.0.max(1e-12), grid.xi_range.1).map(|x| (x, l)))
        .collect();
    let triple_point = ctx.xi0.as_ref().ok().and_then(|&x0| {
        let m = threshold_m(belief, x0).ok()?;
        let s = shared_switch_lambda(params, belief, x0).ok()?;
        Some(TriplePoint {
            xi: x0,
            lambda: m,
            lambda_shared_switch: s,
            consistent: (m - s).abs() <= 1e-6 * m,
        })
    });
    RegionMap {
        cells,
        m_curve,
        xi0_line,
        s_vs_c_curve,
        triple_point,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> SystemParams {
        SystemParams::mm1(5.0, 5.0, 5.0, 4.2).unwrap()
    }

    #[test]
    fn threshold_examples() {
        let b = BeliefDistribution::uniform(3.9, 4.5).unwrap();
        let xi = xi_of_p(&base(), 1.5);
        assert!((threshold_m(&b, xi).unwrap() - 4.193).abs() < 5e-4);
        assert!((threshold_m(&b, 4.5).unwrap() - 4.5).abs() < 1e-12);
        assert!(matches!(threshold_m(&b, 4.6), Err(Error::OutOfSupport { .. })));
        let two = BeliefDistribution::discrete(vec![(2.2, 0.5), (3.8, 0.5)]).unwrap();
        let hand = 1.0 / (0.5 / 3.0 + 0.5 / 3.8);
        assert!((threshold_m(&two, 3.0).unwrap() - hand).abs() < 1e-12);
        assert!((hand - 3.35294).abs() < 1e-5);
    }

    #[test]
    fn threshold_anchors_and_floor() {
        let b = BeliefDistribution::uniform(3.6, 4.0).unwrap();
        let c = ThresholdCurve::new(&b);
        assert!((c.eval(3.6).unwrap() - 1.0 / b.inv_mean()).abs() < 1e-12);
        assert!((c.eval(1.0).unwrap() - c.floor).abs() < 1e-15);
        assert!((c.eval(4.0).unwrap() - 4.0).abs() < 1e-12);
        assert!((c.floor - 3.796).abs() < 5e-4);
    }

    #[test]
    fn classify_examples() {
        let p = base();
        let r = classify_region(&p, &BeliefDistribution::uniform(3.9, 4.5).unwrap(), 1.5);
        assert_eq!(r.p_vs_c, Dominance::Greater);
        let r = classify_region(&p, &BeliefDistribution::uniform(4.0, 4.6).unwrap(), 1.5);
        assert_eq!(r.p_vs_c, Dominance::Less);
        assert!(r.consistent);
        let low = SystemParams::mm1(5.0, 5.0, 5.0, 3.8).unwrap();
        let r = classify_region(&low, &BeliefDistribution::uniform(3.0, 3.5).unwrap(), 0.2);
        assert!(r.xi >= 3.8);
        assert_eq!(r.s_vs_c, Dominance::Equal);
        assert_eq!((r.p_vs_c, r.p_vs_s), (Dominance::Equal, Dominance::Equal));
    }

    #[test]
    fn labels_match_direct_revenues() {
        let p = base();
        let b = BeliefDistribution::uniform(3.6, 4.0).unwrap();
        for fee in [0.1, 0.5, 0.9, 1.3, 1.7, 2.1, 2.5, 2.9, 3.3, 3.7] {
            let r = classify_region(&p, &b, fee);
            let rp = revenue(&p, &b, InfoCase::PrivateBelief, fee).unwrap();
            let rs = revenue(&p, &b, InfoCase::SharedBelief, fee).unwrap();
            let rc = revenue(&p, &b, InfoCase::Classical, fee).unwrap();
            assert_eq!(r.p_vs_c, Dominance::from_diff(rp - rc, 1e-9), "fee {fee}");
            assert_eq!(r.s_vs_c, Dominance::from_diff(rs - rc, 1e-9), "fee {fee}");
            assert_eq!(r.p_vs_s, Dominance::from_diff(rp - rs, 1e-9), "fee {fee}");
            assert!(r.consistent);
        }
    }

    #[test]
    fn consistency_enumeration() {
        use Dominance::*;
        assert!(labels_consistent(Greater, Greater, Greater));
        assert!(labels_consistent(Equal, Equal, Equal));
        assert!(!labels_consistent(Greater, Less, Less));
        assert!(!labels_consistent(Equal, Equal, Greater));
        assert!(labels_consistent(Indeterminate, Less, Greater));
    }

    #[test]
    fn xi0_optimistic_example() {
        let p = base();
        let b = BeliefDistribution::uniform(3.6, 4.0).unwrap();
        let x0 = find_xi0(&p, &b).unwrap();
        let bar = shared_saturation_threshold(&p, &b).unwrap().lambda_bar_s;
        assert!(x0 >= 3.6 && x0 <= bar);
        assert!(x0 > 3.649 && x0 < 3.78);
    }

    #[test]
    fn xi0_point_mass_reports_identity() {
        let b = BeliefDistribution::point_mass(4.0).unwrap();
        assert!(matches!(
            find_xi0(&base(), &b),
            Err(Error::NoCrossing { identical: true, .. })
        ));
    }

    #[test]
    fn xi0_matches_grid_scan() {
        let p = SystemParams::mm1(5.0, 4.0, 4.0, 3.0).unwrap();
        let b = BeliefDistribution::discrete(vec![(2.2, 0.5), (3.8, 0.5)]).unwrap();
        let x0 = find_xi0(&p, &b).unwrap();
        // Dense scan over threshold rates (fees may go negative, so compare join rates).
        let n = 20_000;
        let (lo, hi) = (0.5, 3.79);
        let step = (hi - lo) / n as f64;
        let diff = |xi: f64| {
            let fee = xi_inverse(&p, xi).unwrap();
            crate::analytics::eq_private(&p, &b, fee) - q_shared_of_p(&p, &b, fee).unwrap()
        };
        let mut flip = None;
        let mut prev = diff(lo);
        for i in 1..=n {
            let xi = lo + step * i as f64;
            let d = diff(xi);
            if prev > 0.0 && d <= 0.0 {
                flip = Some((xi - step, xi));
                break;
            }
            prev = d;
        }
        let (a, b) = flip.expect("sign flip");
        assert!(x0 >= a - 1e-9 && x0 <= b + 1e-9, "{x0} not in [{a}, {b}]");
    }

    #[test]
    fn classical_revenue_optimum() {
        let p = base();
        let b = BeliefDistribution::uniform(3.6, 4.0).unwrap();
        let o = optimize_price(&p, &b, InfoCase::Classical, Objective::Revenue).unwrap();
        assert!((o.p - 2.764).abs() < 1e-3);
        assert!((o.value - 7.639).abs() < 1e-3);
        // The multistart optimizer agrees with the closed form.
        let f = |fee: f64| revenue(&p, &b, InfoCase::Classical, fee);
        let m = multistart_max(f, 0.0, p.max_fee()).unwrap();
        assert!((m.p - o.p).abs() < 1e-6 && (m.value - o.value).abs() < 1e-10);
    }

    #[test]
    fn private_revenue_optimum() {
        let p = base();
        let b = BeliefDistribution::uniform(3.6, 4.0).unwrap();
        let o = optimize_price(&p, &b, InfoCase::PrivateBelief, Objective::Revenue).unwrap();
        assert!((o.p - 2.764).abs() < 1e-3);
        assert!((o.value - 8.451).abs() < 1e-3);
    }

    #[test]
    fn costless_waiting_charges_reward() {
        let p = SystemParams::mm1(5.0, 1e-9, 5.0, 4.2).unwrap();
        let b = BeliefDistribution::uniform(3.6, 4.4).unwrap();
        for case in InfoCase::ALL {
            let o = optimize_price(&p, &b, case, Objective::Revenue).unwrap();
            assert!((o.p - 5.0).abs() < 1e-3, "{case}");
            assert!((o.value - 21.0).abs() < 1e-2, "{case}");
        }
    }

    #[test]
    fn welfare_plateau_is_not_multimodal() {
        let p = base();
        let b = BeliefDistribution::uniform(3.0, 3.5).unwrap();
        for case in InfoCase::ALL {
            optimize_price(&p, &b, case, Objective::WelfarePerBelief).unwrap();
            optimize_price(&p, &b, case, Objective::WelfarePhysical).unwrap();
        }
    }

    #[test]
    fn detects_two_peaks() {
        let f = |x: f64| Ok(-(x - 0.2).powi(2) * (x - 0.8).powi(2) + 0.01 * x);
        assert!(matches!(multistart_max(f, 0.0, 1.0), Err(Error::NonUnimodal { .. })));
    }

    #[test]
    fn revenue_comparison_examples() {
        let p = base();
        let opt = compare_optimal_revenue(&p, &BeliefDistribution::uniform(3.6, 4.0).unwrap()).unwrap();
        let pc = opt.pair(InfoCase::PrivateBelief, InfoCase::Classical);
        assert_eq!(pc.asserted, Some(Claim::Ge));
        assert_eq!(pc.computed, Dominance::Greater);
        assert!(opt.pairs.iter().all(|x| x.consistent));

        let opt = compare_optimal_revenue(&p, &BeliefDistribution::uniform(4.4, 4.8).unwrap()).unwrap();
        let pc = opt.pair(InfoCase::PrivateBelief, InfoCase::Classical);
        assert_eq!(pc.asserted, Some(Claim::Le));
        assert_eq!(pc.computed, Dominance::Less);
        assert!(opt.pairs.iter().all(|x| x.consistent));

        let opt = compare_optimal_revenue(&p, &BeliefDistribution::point_mass(4.2).unwrap()).unwrap();
        let v = opt.optimum(InfoCase::Classical).value;
        for o in &opt.optima {
            assert!((o.value - v).abs() < 1e-8);
        }
    }

    #[test]
    fn welfare_comparison_examples() {
        let p = base();
        let b = BeliefDistribution::uniform(3.9, 4.5).unwrap();
        assert!((epsilon(&p) - 0.4472).abs() < 1e-4);
        assert!(welfare_condition(&p, &b) != WelfareCondition::Inapplicable);
        let opt = compare_optimal_welfare(&p, &b, WelfareVariant::PerBelief).unwrap();
        assert!(opt.pairs.iter().all(|x| x.asserted.is_some() && x.consistent));

        let saturated = BeliefDistribution::uniform(2.0, 3.0).unwrap();
        assert_eq!(welfare_condition(&p, &saturated), WelfareCondition::Saturated);
        let opt = compare_optimal_welfare(&p, &saturated, WelfareVariant::Physical).unwrap();
        assert!(opt.pairs.iter().all(|x| x.consistent));

        let point = BeliefDistribution::point_mass(4.2).unwrap();
        let opt = compare_optimal_welfare(&p, &point, WelfareVariant::PerBelief).unwrap();
        let v = opt.optimum(InfoCase::Classical).value;
        assert!(opt.optima.iter().all(|o| (o.value - v).abs() < 1e-8));
    }

    #[test]
    fn advisor_illustrations() {
        let p = base();
        let a = advise(&p, &BeliefDistribution::uniform(4.4, 4.8).unwrap(), Audience::Rm).unwrap();
        assert_eq!(a.regime, CustomerRegime::Pessimistic);
        assert_eq!(a.action, Action::RevealTrueRate);
        assert!((a.fee.unwrap() - 2.764).abs() < 1e-3);
        assert!((a.numbers.harmonic_mean - 4.597).abs() < 5e-4);

        let a = advise(&p, &BeliefDistribution::uniform(3.6, 4.0).unwrap(), Audience::Rm).unwrap();
        assert_eq!(a.regime, CustomerRegime::Optimistic);
        assert_eq!(a.action, Action::Conceal);
        assert!((a.fee.unwrap() - 2.764).abs() < 1e-3);
        assert!((a.value.unwrap() - 8.451).abs() < 1e-3);
    }

    #[test]
    fn advisor_point_mass() {
        let p = base();
        let a = advise(&p, &BeliefDistribution::point_mass(4.2).unwrap(), Audience::Rm).unwrap();
        assert!(a.informationally_equivalent);
        assert!(a.regime_tie);
        assert_eq!(a.action, Action::RevealTrueRate);
    }

    #[test]
    fn advisor_so() {
        let p = base();
        let a = advise(&p, &BeliefDistribution::uniform(3.9, 4.5).unwrap(), Audience::So).unwrap();
        assert_eq!(a.action, Action::RevealBeliefDistribution);
        assert!(!a.caution);
        let wide = BeliefDistribution::uniform(4.0, 4.9).unwrap();
        let p = SystemParams::mm1(5.0, 5.0, 5.0, 3.0).unwrap();
        assert_eq!(welfare_condition(&p, &wide), WelfareCondition::Inapplicable);
        let a = advise(&p, &wide, Audience::So).unwrap();
        assert_eq!(a.action, Action::ComputeCaseByCase);
        assert!(a.caution);
    }

    #[test]
    fn region_map_triple_point() {
        let p = base();
        let b = BeliefDistribution::uniform(3.6, 4.0).unwrap();
        let grid = MapGrid {
            xi_range: (3.0, 4.2),
            lambda_range: (3.5, 4.9),
            xi_steps: 12,
            lambda_steps: 14,
        };
        let map = figure1_map(&p, &b, grid);
        assert_eq!(map.cells.len(), 13 * 15);
        for c in &map.cells {
            assert!(c.consistent, "{c:?}");
        }
        for c in map.cells.iter().filter(|c| c.xi >= 4.0) {
            assert_eq!(c.p_vs_s, Dominance::Equal);
            let expected = if c.lambda <= c.xi { Dominance::Equal } else { Dominance::Greater };
            assert_eq!(c.p_vs_c, expected, "{c:?}");
        }
        let t = map.triple_point.unwrap();
        assert!(t.consistent);
        assert_eq!(map.m_curve.first().unwrap().1, b.harmonic_mean());
        assert!((map.m_curve.last().unwrap().1 - 4.0).abs() < 1e-12);
        // The bisected switch curve agrees with xi / q_S(xi).
        for &(xi, l) in &map.s_vs_c_curve {
            let closed = shared_switch_lambda(&p, &b, xi).unwrap();
            assert!((closed - l).abs() < 1e-7 * l, "{xi} {l} {closed}");
        }
    }
}
