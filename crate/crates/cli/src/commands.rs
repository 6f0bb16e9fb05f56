use std::path::Path;

use beliefq_core::analytics::{metrics_row, MetricsRow};
use beliefq_core::decision::{
    advise, classify_region, figure1_map, threshold_m, Advice, Audience, MapGrid, RegionClass, RegionMap,
};
use beliefq_core::equilibrium::{check_orderings, solve_case, EquilibriumSet, OrderingReport};
use beliefq_core::sim::{simulate, validate_against_analytics, SimConfig, SimReport, ValidationSummary};
use beliefq_core::{BeliefDistribution, InfoCase, SystemParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::output::{Cell, Table};
use crate::reproduce::{belief_label, centred_belief};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    P,
    BeliefMean,
    BeliefSpread,
}

/// Everything a sweep varies or holds fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: Axis,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
    /// Fee for belief axes.
    pub p: f64,
    /// Belief for the fee axis.
    pub belief: BeliefDistribution,
    /// Uniform width held fixed along the mean axis.
    pub spread: f64,
    /// Mean held fixed along the spread axis.
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub belief: BeliefDistribution,
    pub metrics: MetricsRow,
}

/// `steps` evenly spaced points from `from` to `to` inclusive.
pub fn axis_points(from: f64, to: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![from],
        n => (0..n)
            .map(|i| if i + 1 == n { to } else { from + (to - from) * i as f64 / (n - 1) as f64 })
            .collect(),
    }
}

pub fn sweep(params: &SystemParams, spec: &SweepSpec) -> CliResult<Vec<SweepRow>> {
    let values = axis_points(spec.from, spec.to, spec.steps);
    if spec.axis == Axis::P {
        let hi = params.max_fee();
        if let Some(&bad) = values.iter().find(|&&p| !(0.0..=hi).contains(&p)) {
            return Err(CliError::Range { axis: "p".into(), value: bad, lo: 0.0, hi });
        }
    }
    values
        .par_iter()
        .map(|&v| {
            let (belief, p) = match spec.axis {
                Axis::P => (spec.belief.clone(), v),
                Axis::BeliefMean => (centred_belief(v, spec.spread)?, spec.p),
                Axis::BeliefSpread => (centred_belief(spec.mean, v)?, spec.p),
            };
            let metrics = metrics_row(params, &belief, p);
            Ok(SweepRow { value: v, belief, metrics })
        })
        .collect()
}

pub const METRIC_COLUMNS: [&str; 13] = [
    "p",
    "xi",
    "q_c",
    "q_s",
    "eq_p",
    "rev_c",
    "rev_s",
    "rev_p",
    "sw_c",
    "sw_s",
    "sw_p_paper",
    "sw_p_physical",
    "failures",
];

fn metric_cells(m: &MetricsRow) -> Vec<Cell> {
    let failures = m
        .failures
        .iter()
        .map(|f| format!("{}: {}", f.field, f.reason))
        .collect::<Vec<_>>()
        .join("; ");
    vec![
        m.p.into(),
        m.xi.into(),
        m.q_c.into(),
        m.q_s.into(),
        m.eq_p.into(),
        m.rev_c.into(),
        m.rev_s.into(),
        m.rev_p.into(),
        m.sw_c.into(),
        m.sw_s.into(),
        m.sw_p_paper.into(),
        m.sw_p_physical.into(),
        if failures.is_empty() { Cell::Empty } else { failures.into() },
    ]
}

pub fn sweep_table(rows: &[SweepRow]) -> Table {
    let mut cols = vec!["value", "belief"];
    cols.extend(METRIC_COLUMNS);
    let mut t = Table::new(&cols);
    for r in rows {
        let mut cells = vec![r.value.into(), belief_label(&r.belief).into()];
        cells.extend(metric_cells(&r.metrics));
        t.push(cells);
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub metrics: MetricsRow,
    pub region: RegionClass,
    /// Private-vs-classical threshold at this fee's `xi`, inside the belief support.
    pub threshold: Option<f64>,
}

pub fn analyze(params: &SystemParams, belief: &BeliefDistribution, p: f64) -> Analysis {
    let metrics = metrics_row(params, belief, p);
    let threshold = threshold_m(belief, metrics.xi).ok();
    Analysis {
        region: classify_region(params, belief, p),
        metrics,
        threshold,
    }
}

pub fn analysis_table(a: &Analysis) -> Table {
    let mut cols: Vec<&str> = METRIC_COLUMNS.to_vec();
    cols.extend(["m_xi", "pvc", "svc", "pvs"]);
    let mut t = Table::new(&cols);
    let mut cells = metric_cells(&a.metrics);
    cells.extend([
        a.threshold.into(),
        a.region.p_vs_c.symbol().into(),
        a.region.s_vs_c.symbol().into(),
        a.region.p_vs_s.symbol().into(),
    ]);
    t.push(cells);
    t
}

pub fn equilibria(params: &SystemParams, belief: &BeliefDistribution, cases: &[InfoCase]) -> CliResult<Vec<EquilibriumSet>> {
    cases
        .par_iter()
        .map(|&c| solve_case(params, belief, c).map_err(CliError::from))
        .collect()
}

fn case_name(c: InfoCase) -> &'static str {
    match c {
        InfoCase::Classical => "classical",
        InfoCase::SharedBelief => "shared",
        InfoCase::PrivateBelief => "private",
    }
}

pub fn equilibria_table(sets: &[EquilibriumSet]) -> Table {
    let mut t = Table::new(&["case", "q_e", "q_m", "q_s", "p_e", "p_m", "p_s"]);
    for s in sets {
        t.push(vec![
            case_name(s.case).into(),
            s.q_e.aggregate().into(),
            s.q_m.aggregate().into(),
            s.q_s.aggregate().into(),
            s.p_e.into(),
            s.p_m.into(),
            s.p_s.into(),
        ]);
    }
    t
}

pub fn orderings(params: &SystemParams, belief: &BeliefDistribution) -> CliResult<OrderingReport> {
    Ok(check_orderings(params, belief)?)
}

pub fn orderings_table(r: &OrderingReport) -> Table {
    let mut t = Table::new(&["left", "relation", "right", "left_value", "right_value", "asserted", "observed"]);
    for i in &r.items {
        let rel = match i.relation {
            beliefq_core::equilibrium::Relation::Le => "<=",
            beliefq_core::equilibrium::Relation::Eq => "=",
        };
        t.push(vec![
            i.left.clone().into(),
            rel.into(),
            i.right.clone().into(),
            i.left_value.into(),
            i.right_value.into(),
            i.asserted.to_string().into(),
            i.observed.to_string().into(),
        ]);
    }
    t
}

pub fn threshold_map(params: &SystemParams, belief: &BeliefDistribution, grid: MapGrid) -> CliResult<RegionMap> {
    let ok = |r: (f64, f64)| r.0.is_finite() && r.1.is_finite() && r.0 <= r.1;
    if !ok(grid.xi_range) || !ok(grid.lambda_range) || grid.xi_range.0 < 0.0 || grid.lambda_range.0 <= 0.0 {
        return Err(CliError::Input(format!(
            "map ranges must be finite, ordered and nonnegative: xi {:?}, lambda {:?}",
            grid.xi_range, grid.lambda_range
        )));
    }
    Ok(figure1_map(params, belief, grid))
}

pub fn advice(params: &SystemParams, belief: &BeliefDistribution, audience: Audience) -> CliResult<Advice> {
    Ok(advise(params, belief, audience)?)
}

pub fn advice_table(a: &Advice) -> Table {
    let mut t = Table::new(&["audience", "regime", "action", "fee", "value", "caution", "rationale"]);
    t.push(vec![
        variant_name(&a.audience).into(),
        variant_name(&a.regime).into(),
        variant_name(&a.action).into(),
        a.fee.into(),
        a.value.into(),
        a.caution.to_string().into(),
        a.rationale.clone().into(),
    ]);
    t
}

/// Serialized name of a unit enum variant.
fn variant_name<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SimOutcome {
    Validated(ValidationSummary),
    Report(SimReport),
}

/// Runs one simulation, optionally writing the arrival trace as CSV.
pub fn run_simulation(config: &SimConfig, trace: Option<&Path>, check: bool) -> CliResult<SimOutcome> {
    if check {
        if trace.is_some() {
            return Err(CliError::Input("--trace cannot be combined with --validate".into()));
        }
        return Ok(SimOutcome::Validated(validate_against_analytics(config)?));
    }
    let Some(path) = trace else {
        return Ok(SimOutcome::Report(beliefq_core::sim::run(config)?));
    };
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(["arrival_time", "belief", "joined", "wait"])?;
    let mut failure: Option<csv::Error> = None;
    let report = simulate(config, |ev| {
        if failure.is_some() {
            return;
        }
        let rec = [
            ev.arrival_time.to_string(),
            ev.belief.map(|b| b.to_string()).unwrap_or_default(),
            ev.joined.to_string(),
            ev.wait.map(|x| x.to_string()).unwrap_or_default(),
        ];
        if let Err(e) = w.write_record(&rec) {
            failure = Some(e);
        }
    })?;
    if let Some(e) = failure {
        return Err(CliError::Write(e.to_string()));
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(SimOutcome::Report(report))
}

pub fn simulation_table(outcome: &SimOutcome) -> Table {
    match outcome {
        SimOutcome::Report(r) => {
            let mut t = Table::new(&["metric", "mean", "half_width"]);
            let mut push = |name: &str, e: Option<beliefq_core::sim::Estimate>| {
                t.push(vec![
                    name.into(),
                    e.map(|e| e.mean).into(),
                    e.map(|e| e.half_width).into(),
                ]);
            };
            push("join_fraction", Some(r.join_fraction));
            push("mean_wait", r.mean_wait);
            push("revenue_rate", Some(r.revenue_rate));
            push("welfare_rate_physical", Some(r.welfare_rate_physical));
            t.push(vec!["utilization".into(), r.utilization.into(), Cell::Empty]);
            t
        }
        SimOutcome::Validated(v) => {
            let mut t = Table::new(&["metric", "simulated", "half_width", "analytic", "pass"]);
            for c in &v.checks {
                t.push(vec![
                    c.metric.clone().into(),
                    c.simulated.into(),
                    c.half_width.into(),
                    c.analytic.into(),
                    c.pass.to_string().into(),
                ]);
            }
            t
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> (SystemParams, BeliefDistribution) {
        (
            SystemParams::mm1(5.0, 5.0, 5.0, 4.2).unwrap(),
            BeliefDistribution::uniform(4.4, 4.8).unwrap(),
        )
    }

    #[test]
    fn axis_points_cover_endpoints() {
        assert!(axis_points(0.1, 3.7, 0).is_empty());
        assert_eq!(axis_points(0.1, 3.7, 1), vec![0.1]);
        let v = axis_points(0.1, 3.7, 10);
        assert_eq!(v.len(), 10);
        assert_eq!(v[9], 3.7);
        assert!((v[2] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn p_sweep_rejects_fees_outside_range() {
        let (params, belief) = base();
        let spec = SweepSpec {
            axis: Axis::P,
            from: 0.0,
            to: 4.5,
            steps: 4,
            p: 1.5,
            belief,
            spread: 0.6,
            mean: 4.2,
        };
        assert!(matches!(sweep(&params, &spec), Err(CliError::Range { .. })));
    }

    #[test]
    fn zero_steps_give_header_only() {
        let (params, belief) = base();
        let spec = SweepSpec { axis: Axis::P, from: 0.1, to: 3.7, steps: 0, p: 1.5, belief, spread: 0.6, mean: 4.2 };
        let rows = sweep(&params, &spec).unwrap();
        let csv = sweep_table(&rows).to_csv(None).unwrap();
        assert_eq!(csv.lines().count(), 1);
        assert!(csv.starts_with("value,belief,p,xi,"));
    }

    #[test]
    fn spread_sweep_lowers_shared_revenue() {
        let (params, belief) = base();
        let spec = SweepSpec { axis: Axis::BeliefSpread, from: 0.0, to: 0.8, steps: 5, p: 1.5, belief, spread: 0.0, mean: 4.2 };
        let rows = sweep(&params, &spec).unwrap();
        let revs: Vec<f64> = rows.iter().map(|r| r.metrics.rev_s.unwrap()).collect();
        assert!(revs.windows(2).all(|w| w[1] < w[0]), "{revs:?}");
    }

    #[test]
    fn point_mass_analysis_has_equal_revenues() {
        let params = SystemParams::mm1(5.0, 5.0, 5.0, 4.2).unwrap();
        let b = BeliefDistribution::point_mass(4.2).unwrap();
        let a = analyze(&params, &b, 1.5);
        let m = &a.metrics;
        assert!((m.rev_p - m.rev_c).abs() < 1e-9);
        assert!((m.rev_s.unwrap() - m.rev_c).abs() < 1e-9);
    }

    #[test]
    fn advice_names_are_snake_case() {
        let (params, belief) = base();
        let a = advice(&params, &belief, Audience::Rm).unwrap();
        let t = advice_table(&a);
        assert_eq!(t.rows[0][2], Cell::Text("reveal_true_rate".into()));
        assert_eq!(t.rows[0][0], Cell::Text("rm".into()));
    }
}
