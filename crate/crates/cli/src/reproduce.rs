//! Fixed datasets behind the illustrations: revenue tables, the equilibrium comparison and the
//! switch-threshold map.

use beliefq_core::analytics::{
    revenue, rev_classical_q_slope, rev_shared_q_slope, u_classical, u_shared, xi_of_p,
};
use beliefq_core::decision::{figure1_map, threshold_m, MapGrid, RegionMap};
use beliefq_core::equilibrium::{solve_classical, solve_shared};
use beliefq_core::{BeliefDistribution, InfoCase, SystemParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::CliResult;
use crate::output::{Cell, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    TableMean,
    TableSpread,
    TablePOptimistic,
    TablePPessimistic,
    FigEquilibria,
    FigRegions,
}

impl Target {
    pub const ALL: [Target; 6] = [
        Target::TableMean,
        Target::TableSpread,
        Target::TablePOptimistic,
        Target::TablePPessimistic,
        Target::FigEquilibria,
        Target::FigRegions,
    ];
}

/// Revenue illustrations: `R = C = mu = 5`, `lambda = 4.2`.
pub fn revenue_params() -> SystemParams {
    SystemParams::mm1(5.0, 5.0, 5.0, 4.2).expect("valid")
}

/// Equilibrium illustration: `R = 5`, `C = mu = 4`, `lambda = 3`, two equally likely beliefs.
pub fn equilibrium_instance() -> (SystemParams, BeliefDistribution) {
    (
        SystemParams::mm1(5.0, 4.0, 4.0, 3.0).expect("valid"),
        BeliefDistribution::discrete(vec![(2.2, 0.5), (3.8, 0.5)]).expect("valid"),
    )
}

pub const TABLE_FEE: f64 = 1.5;
pub const P_SWEEP: [f64; 10] = [0.1, 0.5, 0.9, 1.3, 1.7, 2.1, 2.5, 2.9, 3.3, 3.7];
pub const OPTIMISTIC: (f64, f64) = (3.6, 4.0);
pub const PESSIMISTIC: (f64, f64) = (4.4, 4.8);

/// `U(a, b)` for uniform beliefs, the atom for point masses.
pub fn belief_label(b: &BeliefDistribution) -> String {
    use beliefq_core::BeliefSpec;
    match b.spec() {
        BeliefSpec::Uniform { a, b } => format!("U({a:.1}, {b:.1})"),
        BeliefSpec::Discrete { points } if points.len() == 1 => format!("{}", points[0][0]),
        BeliefSpec::Discrete { points } => format!("discrete({})", points.len()),
        BeliefSpec::Tabulated { grid } => format!("tabulated({})", grid.len()),
    }
}

/// Uniform belief of width `spread` centred on `mean`; a point mass when `spread` is zero.
pub fn centred_belief(mean: f64, spread: f64) -> CliResult<BeliefDistribution> {
    if spread == 0.0 {
        Ok(BeliefDistribution::point_mass(mean)?)
    } else {
        Ok(BeliefDistribution::uniform(mean - 0.5 * spread, mean + 0.5 * spread)?)
    }
}

fn revenues(params: &SystemParams, belief: &BeliefDistribution, p: f64) -> CliResult<[f64; 3]> {
    Ok([
        revenue(params, belief, InfoCase::PrivateBelief, p)?,
        revenue(params, belief, InfoCase::SharedBelief, p)?,
        revenue(params, belief, InfoCase::Classical, p)?,
    ])
}

pub fn table_mean() -> CliResult<Table> {
    let params = revenue_params();
    let xi = xi_of_p(&params, TABLE_FEE);
    let rows: Vec<Vec<Cell>> = (0..11)
        .into_par_iter()
        .map(|i| {
            let lo = 3.4 + 0.1 * i as f64;
            let b = BeliefDistribution::uniform(lo, lo + 0.6)?;
            let [rp, rs, rc] = revenues(&params, &b, TABLE_FEE)?;
            Ok(vec![
                Cell::Int(i as i64 + 1),
                belief_label(&b).into(),
                b.harmonic_mean().into(),
                b.mean().into(),
                threshold_m(&b, xi)?.into(),
                rp.into(),
                rs.into(),
                rc.into(),
            ])
        })
        .collect::<CliResult<_>>()?;
    let mut t = Table::new(&["row", "belief", "harmonic_mean", "mean", "m_xi", "rev_p", "rev_s", "rev_c"]);
    rows.into_iter().for_each(|r| t.push(r));
    t.meta.insert("fee".into(), format!("{TABLE_FEE}"));
    t.meta.insert("xi".into(), format!("{xi}"));
    Ok(t)
}

pub fn table_spread() -> CliResult<Table> {
    let params = revenue_params();
    let levels = [("unbiased", 4.2), ("optimistic", 3.8), ("pessimistic", 4.6)];
    let specs: Vec<(&str, f64, f64)> = levels
        .iter()
        .flat_map(|&(name, m)| (0..5).map(move |k| (name, m, 0.2 * k as f64)))
        .collect();
    let rows: Vec<Vec<Cell>> = specs
        .par_iter()
        .enumerate()
        .map(|(i, &(name, m, spread))| {
            let b = centred_belief(m, spread)?;
            let [rp, rs, rc] = revenues(&params, &b, TABLE_FEE)?;
            Ok(vec![
                Cell::Int(i as i64 + 1),
                name.into(),
                belief_label(&b).into(),
                b.mean().into(),
                rp.into(),
                rs.into(),
                rc.into(),
            ])
        })
        .collect::<CliResult<_>>()?;
    let mut t = Table::new(&["row", "level", "belief", "mean", "rev_p", "rev_s", "rev_c"]);
    rows.into_iter().for_each(|r| t.push(r));
    t.meta.insert("fee".into(), format!("{TABLE_FEE}"));
    Ok(t)
}

pub fn table_p(support: (f64, f64)) -> CliResult<Table> {
    let params = revenue_params();
    let b = BeliefDistribution::uniform(support.0, support.1)?;
    let rows: Vec<Vec<Cell>> = P_SWEEP
        .par_iter()
        .enumerate()
        .map(|(i, &p)| {
            let [rp, rs, rc] = revenues(&params, &b, p)?;
            Ok(vec![
                Cell::Int(i as i64 + 1),
                p.into(),
                xi_of_p(&params, p).into(),
                rp.into(),
                rs.into(),
                rc.into(),
            ])
        })
        .collect::<CliResult<_>>()?;
    let mut t = Table::new(&["row", "p", "xi", "rev_p", "rev_s", "rev_c"]);
    rows.into_iter().for_each(|r| t.push(r));
    t.meta.insert("belief".into(), belief_label(&b));
    Ok(t)
}

/// Values closer than this are printed as equal in an ordering string.
pub const ORDERING_TOL: f64 = 1e-8;

/// Sorts labelled values into a chain such as `a < b = c < d`. Equal values keep their input
/// order; a trailing group equal to one gets `= 1` appended.
pub fn ordering_string(items: &[(&str, f64)]) -> String {
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.sort_by(|&a, &b| items[a].1.total_cmp(&items[b].1).then(a.cmp(&b)));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in idx {
        match groups.last_mut() {
            Some(g) if (items[i].1 - items[g[0]].1).abs() <= ORDERING_TOL => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    let mut parts: Vec<String> = groups
        .iter()
        .map(|g| {
            let mut g = g.clone();
            g.sort_unstable();
            g.iter().map(|&i| items[i].0).collect::<Vec<_>>().join(" = ")
        })
        .collect();
    if let Some(g) = groups.last() {
        if (items[g[0]].1 - 1.0).abs() <= ORDERING_TOL {
            let last = parts.pop().expect("nonempty");
            parts.push(format!("{last} = 1"));
        }
    }
    parts.join(" < ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumFigure {
    /// Joining probabilities by name, in the order `q_m^S, q_m^C, q_s^C, q_s^S, q_e^S, q_e^C`.
    pub points: Vec<(String, f64)>,
    pub ordering: String,
    pub curves: Table,
}

/// Joining probabilities of the equilibrium illustration and the four marginal-cost curves whose
/// crossings with `R/C` locate them.
pub fn fig_equilibria() -> CliResult<EquilibriumFigure> {
    let (params, belief) = equilibrium_instance();
    let c = solve_classical(&params);
    let s = solve_shared(&params, &belief)?;
    let named = [
        ("q_m^S", s.q_m.aggregate()),
        ("q_m^C", c.q_m.aggregate()),
        ("q_s^C", c.q_s.aggregate()),
        ("q_s^S", s.q_s.aggregate()),
        ("q_e^S", s.q_e.aggregate()),
        ("q_e^C", c.q_e.aggregate()),
    ];
    let ordering = ordering_string(&named);

    let (r, cost, lambda) = (params.r(), params.c(), params.lambda());
    let n = 200;
    let rows: Vec<Vec<Cell>> = (0..=n)
        .into_par_iter()
        .map(|i| {
            let q = i as f64 / n as f64;
            // Each curve is the expected-cost term that equals R/C at its equilibrium.
            let shared_marginal = (r - rev_shared_q_slope(&params, &belief, q)? / lambda) / cost;
            let classical_marginal = (r - rev_classical_q_slope(&params, q)? / lambda) / cost;
            let shared_wait = (r - u_shared(&params, &belief, 0.0, q)?) / cost;
            let classical_wait = (r - u_classical(&params, 0.0, q)?) / cost;
            Ok(vec![
                q.into(),
                shared_marginal.into(),
                classical_marginal.into(),
                shared_wait.into(),
                classical_wait.into(),
                (r / cost).into(),
            ])
        })
        .collect::<CliResult<_>>()?;
    let mut curves = Table::new(&[
        "q",
        "shared_marginal",
        "classical_marginal",
        "shared_wait",
        "classical_wait",
        "r_over_c",
    ]);
    rows.into_iter().for_each(|r| curves.push(r));
    curves.meta.insert("ordering".into(), ordering.clone());
    for (name, v) in &named {
        curves.meta.insert(name.to_string(), format!("{v}"));
    }
    Ok(EquilibriumFigure {
        points: named.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        ordering,
        curves,
    })
}

/// Belief and grid for the switch-threshold map.
pub fn region_instance() -> (SystemParams, BeliefDistribution, MapGrid) {
    (
        revenue_params(),
        BeliefDistribution::uniform(OPTIMISTIC.0, OPTIMISTIC.1).expect("valid"),
        MapGrid {
            xi_range: (3.0, 4.2),
            lambda_range: (3.0, 4.8),
            xi_steps: 48,
            lambda_steps: 36,
        },
    )
}

pub fn fig_regions() -> RegionMap {
    let (params, belief, grid) = region_instance();
    figure1_map(&params, &belief, grid)
}

/// Cell labels of a region map, one row per `(xi, lambda)`.
pub fn region_cells(map: &RegionMap) -> Table {
    let mut t = Table::new(&["xi", "lambda", "pvc", "svc", "pvs"]);
    for c in &map.cells {
        t.push(vec![
            c.xi.into(),
            c.lambda.into(),
            c.p_vs_c.symbol().into(),
            c.s_vs_c.symbol().into(),
            c.p_vs_s.symbol().into(),
        ]);
    }
    t
}

/// The switch curves of a region map as `(curve, xi, lambda)` vertices.
pub fn region_polylines(map: &RegionMap) -> Table {
    let mut t = Table::new(&["curve", "xi", "lambda"]);
    let curves: [(&str, &[(f64, f64)]); 3] = [
        ("p_vs_c", &map.m_curve),
        ("p_vs_s", &map.xi0_line),
        ("s_vs_c", &map.s_vs_c_curve),
    ];
    for (name, pts) in curves {
        for &(x, l) in pts {
            t.push(vec![name.into(), x.into(), l.into()]);
        }
    }
    if let Some(tp) = &map.triple_point {
        t.push(vec!["triple_point".into(), tp.xi.into(), tp.lambda.into()]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_chain() {
        let s = ordering_string(&[("a", 0.3), ("b", 0.5), ("c", 0.5 + 1e-12), ("d", 1.0), ("e", 0.1)]);
        assert_eq!(s, "e < a < b = c < d = 1");
        assert_eq!(ordering_string(&[("x", 0.2)]), "x");
    }

    #[test]
    fn labels() {
        assert_eq!(belief_label(&BeliefDistribution::uniform(3.4, 4.0).unwrap()), "U(3.4, 4.0)");
        assert_eq!(belief_label(&centred_belief(4.2, 0.0).unwrap()), "4.2");
        let b = centred_belief(3.8, 0.4).unwrap();
        assert!((b.lambda_min() - 3.6).abs() < 1e-12 && (b.lambda_max() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn equilibrium_figure_ordering() {
        let f = fig_equilibria().unwrap();
        assert_eq!(f.ordering, "q_m^S < q_m^C = q_s^C = q_s^S < q_e^S < q_e^C = 1");
        // The marginal curve crosses R/C at the revenue maximizer.
        let qm = f.points[0].1;
        let r_over_c = 1.25;
        let k = (qm * 200.0).floor() as usize;
        let col = f.curves.column("shared_marginal").unwrap();
        let below = f.curves.rows[k][col].as_f64().unwrap();
        let above = f.curves.rows[k + 1][col].as_f64().unwrap();
        assert!(below <= r_over_c && above >= r_over_c);
    }

    #[test]
    fn p_table_row_eight() {
        let t = table_p(OPTIMISTIC).unwrap();
        let got: Vec<f64> = ["p", "xi", "rev_p", "rev_s", "rev_c"].iter().map(|c| t.value(7, c).unwrap()).collect();
        let want = [2.9, 2.619, 8.403, 8.386, 7.595];
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() <= 1e-3, "{g} vs {w}");
        }
    }
}
