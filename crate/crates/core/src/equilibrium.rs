//! Individual, revenue-maximizing and welfare-maximizing joining probabilities for each
//! information case, and the ordering relations among them.

use serde::{Deserialize, Serialize};

use crate::analytics::{
    q_classical_of_p, q_shared_of_p, rev_classical_q, rev_shared_q_slope, shared_q_ceiling, u_shared, xi_of_p,
    WelfareVariant, Q_TOL,
};
use crate::decision::{optimize_price, Objective};
use crate::error::{Error, Result};
use crate::model::{expect, BeliefDistribution, ExpectationRequest, InfoCase, SystemParams, Transform};
use crate::numerics::{bisect, golden_max};

/// Tolerance for the numerical hypotheses and the observed relations in [`check_orderings`].
pub const ORDERING_TOL: f64 = 1e-8;

/// Private-case joining rule: a customer believing rate `b` joins with probability
/// `min(xi / b, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JoinRule {
    pub xi: f64,
    /// Population average E[min(xi/Λ, 1)].
    pub aggregate: f64,
}

impl JoinRule {
    pub fn new(belief: &BeliefDistribution, xi: f64) -> Self {
        JoinRule {
            xi,
            aggregate: crate::analytics::eq_private_at_xi(belief, xi),
        }
    }

    pub fn probability_for(&self, believed_rate: f64) -> f64 {
        (self.xi / believed_rate).min(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Joining {
    Probability { q: f64 },
    Rule(JoinRule),
}

impl Joining {
    /// Fraction of arrivals that join.
    pub fn aggregate(&self) -> f64 {
        match self {
            Joining::Probability { q } => *q,
            Joining::Rule(r) => r.aggregate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSet {
    pub case: InfoCase,
    /// Equilibrium with no fee.
    pub q_e: Joining,
    /// Joining level preferred by a revenue maximizer.
    pub q_m: Joining,
    /// Joining level preferred by a social optimizer.
    pub q_s: Joining,
    pub p_e: f64,
    /// Fees that induce `q_m` and `q_s`; `None` when the belief makes the fee undefined.
    pub p_m: Option<f64>,
    pub p_s: Option<f64>,
}

/// Fee at which a fully informed customer is indifferent at joining probability `q`.
fn classical_fee_for(params: &SystemParams, q: f64) -> f64 {
    params.r() - params.c() * params.pk_wait(q * params.lambda())
}

/// Fee at which the shared-belief utility vanishes at `q`.
fn shared_fee_for(params: &SystemParams, belief: &BeliefDistribution, q: f64) -> Option<f64> {
    let ew = expect(belief, ExpectationRequest::new(q, Transform::W), params).ok()?;
    Some(params.r() - params.c() * ew)
}

/// Joining probability maximizing `q λ (R - C W(qλ))`.
fn classical_optimal_q(params: &SystemParams) -> f64 {
    if params.is_mm1() {
        let xi = params.mu() - (params.c() * params.mu() / params.r()).sqrt();
        return (xi / params.lambda()).clamp(0.0, 1.0);
    }
    let (q, _) = golden_max(
        |q| rev_classical_q(params, q).unwrap_or(f64::NEG_INFINITY),
        0.0,
        1.0,
        1e-10,
    );
    q
}

pub fn solve_classical(params: &SystemParams) -> EquilibriumSet {
    let q_e = q_classical_of_p(params, 0.0);
    let q_m = classical_optimal_q(params);
    let fee = classical_fee_for(params, q_m);
    EquilibriumSet {
        case: InfoCase::Classical,
        q_e: Joining::Probability { q: q_e },
        q_m: Joining::Probability { q: q_m },
        q_s: Joining::Probability { q: q_m },
        p_e: 0.0,
        p_m: Some(fee),
        p_s: Some(fee),
    }
}

pub fn solve_shared(params: &SystemParams, belief: &BeliefDistribution) -> Result<EquilibriumSet> {
    if u_shared(params, belief, 0.0, 0.0)? <= 0.0 {
        return Err(Error::NoJoin);
    }
    let q_e = q_shared_of_p(params, belief, 0.0)?;

    // Revenue is strictly concave in q with positive slope at 0.
    let hi = shared_q_ceiling(params, belief);
    let slope = |q: f64| rev_shared_q_slope(params, belief, q).expect("q below the stability ceiling");
    let q_m = if slope(hi) >= 0.0 { hi } else { bisect(slope, 0.0, hi, Q_TOL)? };

    // Welfare does not involve the belief, so the classical optimum carries over.
    let q_s = classical_optimal_q(params);
    Ok(EquilibriumSet {
        case: InfoCase::SharedBelief,
        q_e: Joining::Probability { q: q_e },
        q_m: Joining::Probability { q: q_m },
        q_s: Joining::Probability { q: q_s },
        p_e: 0.0,
        p_m: shared_fee_for(params, belief, q_m),
        p_s: shared_fee_for(params, belief, q_s),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Individual,
    Rm,
    So,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivateSolution {
    pub regime: Regime,
    pub p: f64,
    pub rule: JoinRule,
}

/// Private-case rule for one regime. The social optimizer maximizes the chosen welfare variant.
pub fn solve_private(
    params: &SystemParams,
    belief: &BeliefDistribution,
    regime: Regime,
    variant: WelfareVariant,
) -> Result<PrivateSolution> {
    let p = match regime {
        Regime::Individual => 0.0,
        Regime::Rm => optimize_price(params, belief, InfoCase::PrivateBelief, Objective::Revenue)?.p,
        Regime::So => optimize_price(params, belief, InfoCase::PrivateBelief, Objective::from(variant))?.p,
    };
    Ok(PrivateSolution {
        regime,
        p,
        rule: JoinRule::new(belief, xi_of_p(params, p)),
    })
}

pub fn solve_private_set(
    params: &SystemParams,
    belief: &BeliefDistribution,
    variant: WelfareVariant,
) -> Result<EquilibriumSet> {
    let e = solve_private(params, belief, Regime::Individual, variant)?;
    let m = solve_private(params, belief, Regime::Rm, variant)?;
    let s = solve_private(params, belief, Regime::So, variant)?;
    Ok(EquilibriumSet {
        case: InfoCase::PrivateBelief,
        q_e: Joining::Rule(e.rule),
        q_m: Joining::Rule(m.rule),
        q_s: Joining::Rule(s.rule),
        p_e: 0.0,
        p_m: Some(m.p),
        p_s: Some(s.p),
    })
}

pub fn solve_case(params: &SystemParams, belief: &BeliefDistribution, case: InfoCase) -> Result<EquilibriumSet> {
    match case {
        InfoCase::Classical => Ok(solve_classical(params)),
        InfoCase::SharedBelief => solve_shared(params, belief),
        InfoCase::PrivateBelief => solve_private_set(params, belief, WelfareVariant::PerBelief),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Le,
    Eq,
}

/// A numerically evaluated equality `lhs = rhs` that a relation depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub statement: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl Hypothesis {
    fn new(statement: &str, lhs: f64, rhs: f64) -> Self {
        Hypothesis {
            statement: statement.to_string(),
            lhs,
            rhs,
            holds: (lhs - rhs).abs() <= ORDERING_TOL * rhs.abs().max(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingItem {
    pub left: String,
    pub relation: Relation,
    pub right: String,
    pub left_value: f64,
    pub right_value: f64,
    /// Conditions the relation needs; empty when it holds unconditionally.
    pub hypotheses: Vec<Hypothesis>,
    /// The relation is guaranteed: every hypothesis holds.
    pub asserted: bool,
    /// The relation holds numerically within [`ORDERING_TOL`].
    pub observed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingReport {
    pub classical: EquilibriumSet,
    pub shared: EquilibriumSet,
    pub items: Vec<OrderingItem>,
}

impl OrderingReport {
    /// Items that were asserted but not observed. Empty unless the solvers are broken.
    pub fn contradictions(&self) -> impl Iterator<Item = &OrderingItem> {
        self.items.iter().filter(|i| i.asserted && !i.observed)
    }
}

fn item(left: (&str, f64), relation: Relation, right: (&str, f64), hypotheses: Vec<Hypothesis>) -> OrderingItem {
    let (l, r) = (left.1, right.1);
    let observed = match relation {
        Relation::Le => l <= r + ORDERING_TOL,
        Relation::Eq => (l - r).abs() <= ORDERING_TOL,
    };
    OrderingItem {
        left: left.0.to_string(),
        relation,
        right: right.0.to_string(),
        left_value: l,
        right_value: r,
        asserted: hypotheses.iter().all(|h| h.holds),
        hypotheses,
        observed,
    }
}

/// Evaluates the known orderings among the classical and shared-belief equilibria. Requires
/// exponential service, for which the orderings are established.
pub fn check_orderings(params: &SystemParams, belief: &BeliefDistribution) -> Result<OrderingReport> {
    params.require_mm1()?;
    let classical = solve_classical(params);
    let shared = solve_shared(params, belief)?;
    let (ce, cm, cs) = (classical.q_e.aggregate(), classical.q_m.aggregate(), classical.q_s.aggregate());
    let (se, sm, ss) = (shared.q_e.aggregate(), shared.q_m.aggregate(), shared.q_s.aggregate());
    let lambda = params.lambda();

    let mean_w = |q: f64, t: Transform| expect(belief, ExpectationRequest::new(q, t), params).unwrap_or(f64::NAN);
    let w_true = |q: f64| params.pk_wait(q * lambda);
    let unbiased_w_s = Hypothesis::new("E[W(q_s Λ)] = W(q_s λ)", mean_w(ss, Transform::W), w_true(ss));
    let unbiased_w2_s = Hypothesis::new(
        "E[W²(q_s Λ)] = W²(q_s λ)",
        mean_w(ss, Transform::WSquared),
        w_true(ss).powi(2),
    );
    let unbiased_w_e = Hypothesis::new("E[W(q_e Λ)] = W(q_e λ)", mean_w(se, Transform::W), w_true(se));
    let nonnegative_fee = match shared.p_s {
        Some(p) => Hypothesis {
            statement: "p_s >= 0".into(),
            lhs: p,
            rhs: 0.0,
            holds: p >= 0.0,
        },
        None => Hypothesis {
            statement: "p_s >= 0".into(),
            lhs: f64::NAN,
            rhs: 0.0,
            holds: false,
        },
    };

    let items = vec![
        item(("q_m^C", cm), Relation::Eq, ("q_s^C", cs), vec![]),
        item(("q_s^C", cs), Relation::Le, ("q_e^C", ce), vec![]),
        item(("q_m^S", sm), Relation::Le, ("q_e^S", se), vec![]),
        item(("q_s^S", ss), Relation::Le, ("q_e^S", se), vec![nonnegative_fee]),
        item(("q_m^S", sm), Relation::Eq, ("q_s^S", ss), vec![unbiased_w2_s]),
        item(("q_m^S", sm), Relation::Le, ("q_s^S", ss), vec![unbiased_w_s.clone()]),
        item(("q_s^S", ss), Relation::Le, ("q_e^S", se), vec![unbiased_w_s]),
        item(("q_s^S", ss), Relation::Eq, ("q_s^C", cs), vec![]),
        item(("q_e^S", se), Relation::Eq, ("q_e^C", ce), vec![unbiased_w_e]),
    ];
    Ok(OrderingReport { classical, shared, items })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn illus1() -> (SystemParams, BeliefDistribution) {
        (
            SystemParams::mm1(5.0, 4.0, 4.0, 3.0).unwrap(),
            BeliefDistribution::discrete(vec![(2.2, 0.5), (3.8, 0.5)]).unwrap(),
        )
    }

    #[test]
    fn classical_illustration() {
        let (p, _) = illus1();
        let eq = solve_classical(&p);
        assert_eq!(eq.q_e.aggregate(), 1.0);
        let closed = (4.0 - 3.2f64.sqrt()) / 3.0;
        assert!((eq.q_m.aggregate() - closed).abs() < 1e-14);
        assert!((eq.q_s.aggregate() - closed).abs() < 1e-14);
        assert!((eq.q_m.aggregate() - 0.7370).abs() < 5e-5);
    }

    #[test]
    fn classical_costless_waiting_joins_fully() {
        let p = SystemParams::mm1(5.0, 1e-12, 4.0, 3.0).unwrap();
        let eq = solve_classical(&p);
        for q in [eq.q_e, eq.q_m, eq.q_s] {
            assert_eq!(q.aggregate(), 1.0);
        }
    }

    #[test]
    fn classical_general_service_matches_derivative_root() {
        let p = SystemParams::new(5.0, 4.0, 4.0, 0.09, 3.0).unwrap();
        let q = solve_classical(&p).q_m.aggregate();
        let r = bisect(|q| crate::analytics::rev_classical_q_slope(&p, q).unwrap(), 0.0, 1.0, 1e-14);
        match r {
            Ok(root) => assert!((q - root).abs() < 1e-8),
            // Slope still positive at q = 1: the optimum is the full-joining corner.
            Err(_) => assert_eq!(q, 1.0),
        }
    }

    #[test]
    fn shared_illustration_ordering() {
        let (p, b) = illus1();
        let c = solve_classical(&p);
        let s = solve_shared(&p, &b).unwrap();
        let (sm, ss, se) = (s.q_m.aggregate(), s.q_s.aggregate(), s.q_e.aggregate());
        assert!(sm < c.q_m.aggregate());
        assert!((c.q_m.aggregate() - ss).abs() < 1e-8);
        assert!(ss < se && se < c.q_e.aggregate());
        assert!(se > 0.92 && se < 0.93);
        assert!((se - 0.920628).abs() < 1e-6);
        assert!((sm - 0.668265).abs() < 1e-6);
    }

    #[test]
    fn shared_point_mass_equals_classical() {
        let p = SystemParams::mm1(5.0, 5.0, 5.0, 4.2).unwrap();
        let b = BeliefDistribution::point_mass(4.2).unwrap();
        let c = solve_classical(&p);
        let s = solve_shared(&p, &b).unwrap();
        for (x, y) in [(c.q_e, s.q_e), (c.q_m, s.q_m), (c.q_s, s.q_s)] {
            assert!((x.aggregate() - y.aggregate()).abs() < 1e-10);
        }
        assert!((c.p_m.unwrap() - s.p_m.unwrap()).abs() < 1e-10);
    }

    #[test]
    fn shared_fee_recovers_q() {
        let p = SystemParams::mm1(5.0, 5.0, 5.0, 4.2).unwrap();
        let b = BeliefDistribution::uniform(3.6, 4.4).unwrap();
        let s = solve_shared(&p, &b).unwrap();
        let q = q_shared_of_p(&p, &b, s.p_s.unwrap()).unwrap();
        assert!((q - s.q_s.aggregate()).abs() < 1e-9);
    }

    #[test]
    fn no_join_at_zero_surplus() {
        let p = SystemParams::new_unchecked(1.0, 4.0, 4.0, 2.0 / 16.0, 3.0);
        let b = BeliefDistribution::uniform(2.0, 3.5).unwrap();
        assert_eq!(solve_shared(&p, &b), Err(Error::NoJoin));
    }

    #[test]
    fn private_rule_substitution() {
        let b = BeliefDistribution::discrete(vec![(2.2, 0.5), (3.8, 0.5)]).unwrap();
        let rule = JoinRule::new(&b, 3.0);
        assert_eq!(rule.probability_for(2.2), 1.0);
        assert!((rule.probability_for(3.8) - 0.78947).abs() < 1e-5);
    }

    #[test]
    fn private_individual_joins_below_threshold() {
        let p = SystemParams::mm1(5.0, 5.0, 5.0, 4.2).unwrap();
        let b = BeliefDistribution::uniform(3.6, 4.0).unwrap();
        let s = solve_private(&p, &b, Regime::Individual, WelfareVariant::PerBelief).unwrap();
        assert_eq!(s.p, 0.0);
        assert_eq!(s.rule.probability_for(3.0), 1.0);
        assert!(s.rule.xi >= 4.0 && s.rule.aggregate == 1.0);
    }

    #[test]
    fn private_rm_optimum() {
        let p = SystemParams::mm1(5.0, 5.0, 5.0, 4.2).unwrap();
        let b = BeliefDistribution::uniform(3.6, 4.0).unwrap();
        let s = solve_private(&p, &b, Regime::Rm, WelfareVariant::PerBelief).unwrap();
        assert!((s.p - 2.764).abs() < 1e-3);
        assert!((s.p * 4.2 * s.rule.aggregate - 8.451).abs() < 2e-3);
    }

    #[test]
    fn illustration_orderings_asserted() {
        let (p, b) = illus1();
        let report = check_orderings(&p, &b).unwrap();
        assert_eq!(report.contradictions().count(), 0);
        let first = report
            .items
            .iter()
            .find(|i| i.left == "q_m^S" && i.right == "q_e^S")
            .unwrap();
        assert!(first.asserted && first.observed);
    }

    #[test]
    fn point_mass_orderings_are_all_equalities() {
        let p = SystemParams::mm1(5.0, 5.0, 5.0, 4.2).unwrap();
        let b = BeliefDistribution::point_mass(4.2).unwrap();
        let report = check_orderings(&p, &b).unwrap();
        for i in &report.items {
            assert!(i.asserted, "{} {:?} {}", i.left, i.relation, i.right);
            assert!(i.observed);
        }
    }

    #[test]
    fn orderings_need_exponential_service() {
        let p = SystemParams::new(5.0, 4.0, 4.0, 0.09, 3.0).unwrap();
        let b = BeliefDistribution::point_mass(3.0).unwrap();
        assert!(matches!(check_orderings(&p, &b), Err(Error::NotMM1 { .. })));
    }

    #[test]
    fn unbiased_two_point_belief_asserts_rm_below_so() {
        // Choose the weight on the low atom so that E[W(q_s Λ)] equals W(q_s λ).
        let p = SystemParams::mm1(5.0, 4.0, 4.0, 3.0).unwrap();
        let qs = solve_classical(&p).q_s.aggregate();
        let (a, b) = (2.0, 3.9);
        let w = |x: f64| 1.0 / (4.0 - qs * x);
        let weight = bisect(|t| t * w(a) + (1.0 - t) * w(b) - w(3.0), 0.0, 1.0, 1e-15).unwrap();
        let belief = BeliefDistribution::discrete(vec![(a, weight), (b, 1.0 - weight)]).unwrap();
        let report = check_orderings(&p, &belief).unwrap();
        let rm_so = report
            .items
            .iter()
            .find(|i| i.left == "q_m^S" && i.right == "q_s^S" && i.relation == Relation::Le)
            .unwrap();
        assert!(rm_so.asserted && rm_so.observed);
        assert_eq!(report.contradictions().count(), 0);
    }

    #[test]
    fn biased_belief_does_not_assert() {
        let (p, b) = illus1();
        let report = check_orderings(&p, &b).unwrap();
        let eq_item = report
            .items
            .iter()
            .find(|i| i.left == "q_e^S" && i.right == "q_e^C")
            .unwrap();
        assert!(!eq_item.asserted);
    }
}
