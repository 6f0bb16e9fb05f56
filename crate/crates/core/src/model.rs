//! Domain types: system primitives, arrival-rate beliefs, information cases, and the
//! expectation operator every shared/private formula is built on.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{integrate, QUAD_REL_TOL};

const MM1_REL_TOL: f64 = 1e-12;
const DISCRETE_WEIGHT_TOL: f64 = 1e-12;

/// True system primitives: reward `r`, waiting cost `c`, service rate `mu`, second moment of the
/// service time `s2`, and the true arrival rate `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsFile", into = "ParamsFile")]
pub struct SystemParams {
    r: f64,
    c: f64,
    mu: f64,
    s2: f64,
    lambda: f64,
}

/// On-disk form of [`SystemParams`]. `s2` defaults to the exponential value `2/mu^2`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamsFile {
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub mu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s2: Option<f64>,
    pub lambda: f64,
}

impl TryFrom<ParamsFile> for SystemParams {
    type Error = Error;
    fn try_from(f: ParamsFile) -> Result<Self> {
        let s2 = f.s2.unwrap_or(2.0 / (f.mu * f.mu));
        SystemParams::new(f.r, f.c, f.mu, s2, f.lambda)
    }
}

impl From<SystemParams> for ParamsFile {
    fn from(p: SystemParams) -> Self {
        ParamsFile {
            r: p.r,
            c: p.c,
            mu: p.mu,
            s2: Some(p.s2),
            lambda: p.lambda,
        }
    }
}

impl SystemParams {
    /// Builds parameters, rejecting anything that [`validate_params`] reports as a hard error.
    pub fn new(r: f64, c: f64, mu: f64, s2: f64, lambda: f64) -> Result<Self> {
        let p = Self::new_unchecked(r, c, mu, s2, lambda);
        let hard: Vec<String> = validate_params(&p)
            .into_iter()
            .filter(|i| i.severity == Severity::Error)
            .map(|i| i.message)
            .collect();
        if hard.is_empty() {
            Ok(p)
        } else {
            Err(Error::InvalidParams(hard.join("; ")))
        }
    }

    /// Exponential service: `s2 = 2/mu^2`.
    pub fn mm1(r: f64, c: f64, mu: f64, lambda: f64) -> Result<Self> {
        Self::new(r, c, mu, 2.0 / (mu * mu), lambda)
    }

    /// No invariant checks; pair with [`validate`] to obtain a report instead of an error.
    pub fn new_unchecked(r: f64, c: f64, mu: f64, s2: f64, lambda: f64) -> Self {
        SystemParams { r, c, mu, s2, lambda }
    }

    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn s2(&self) -> f64 {
        self.s2
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Same system with a different true arrival rate.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.r, self.c, self.mu, self.s2, lambda)
    }

    pub fn is_mm1(&self) -> bool {
        let target = 2.0 / (self.mu * self.mu);
        ((self.s2 - target) / target).abs() <= MM1_REL_TOL
    }

    pub fn require_mm1(&self) -> Result<()> {
        if self.is_mm1() {
            Ok(())
        } else {
            Err(Error::NotMM1 { s2: self.s2 })
        }
    }

    /// Largest fee at which an arriving customer facing an empty queue still breaks even.
    pub fn max_fee(&self) -> f64 {
        self.r - self.c / self.mu
    }

    /// Pollaczek–Khinchine mean time in system at effective rate `x`; no range check.
    #[inline]
    pub(crate) fn pk_wait(&self, x: f64) -> f64 {
        x * self.s2 / (2.0 * (1.0 - x / self.mu)) + 1.0 / self.mu
    }

    /// d/dx of [`Self::pk_wait`].
    #[inline]
    pub(crate) fn pk_wait_slope(&self, x: f64) -> f64 {
        let u = 1.0 - x / self.mu;
        self.s2 / (2.0 * u * u)
    }

    /// Effective rate at which the mean time in system equals `w`; 0 when `w <= 1/mu`.
    pub(crate) fn pk_wait_inverse(&self, w: f64) -> f64 {
        let excess = w - 1.0 / self.mu;
        if excess <= 0.0 {
            return 0.0;
        }
        if excess.is_infinite() {
            return self.mu;
        }
        1.0 / (self.s2 / (2.0 * excess) + 1.0 / self.mu)
    }
}

/// The three information levels, ordered by how much customers know.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfoCase {
    Classical,
    SharedBelief,
    PrivateBelief,
}

impl InfoCase {
    pub const ALL: [InfoCase; 3] = [InfoCase::Classical, InfoCase::SharedBelief, InfoCase::PrivateBelief];

    /// 2 for classical, 1 for shared, 0 for private.
    pub fn information_rank(self) -> u8 {
        match self {
            InfoCase::Classical => 2,
            InfoCase::SharedBelief => 1,
            InfoCase::PrivateBelief => 0,
        }
    }
}

impl PartialOrd for InfoCase {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for InfoCase {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.information_rank().cmp(&other.information_rank())
    }
}

impl fmt::Display for InfoCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InfoCase::Classical => "classical",
            InfoCase::SharedBelief => "shared",
            InfoCase::PrivateBelief => "private",
        })
    }
}

/// On-disk / wire form of a belief distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum BeliefSpec {
    Discrete { points: Vec<[f64; 2]> },
    Uniform { a: f64, b: f64 },
    Tabulated { grid: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    /// Sorted, strictly increasing atoms with positive weights.
    Discrete(Vec<(f64, f64)>),
    Uniform { a: f64, b: f64 },
    /// Piecewise-linear density on a strictly increasing grid, normalized, with the cumulative
    /// mass at each node.
    Tabulated { grid: Vec<(f64, f64)>, cum: Vec<f64> },
}

/// Population belief Λ about the arrival rate. Immutable; moments are cached at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BeliefSpec", into = "BeliefSpec")]
pub struct BeliefDistribution {
    shape: Shape,
    lambda_min: f64,
    lambda_max: f64,
    mean: f64,
    inv_mean: f64,
    /// Integral of the tabulated density before renormalization (1 for other variants).
    raw_mass: f64,
}

impl TryFrom<BeliefSpec> for BeliefDistribution {
    type Error = Error;
    fn try_from(spec: BeliefSpec) -> Result<Self> {
        match spec {
            BeliefSpec::Discrete { points } => {
                BeliefDistribution::discrete(points.into_iter().map(|[l, w]| (l, w)).collect())
            }
            BeliefSpec::Uniform { a, b } => BeliefDistribution::uniform(a, b),
            BeliefSpec::Tabulated { grid } => {
                BeliefDistribution::tabulated(grid.into_iter().map(|[l, f]| (l, f)).collect())
            }
        }
    }
}

impl From<BeliefDistribution> for BeliefSpec {
    fn from(b: BeliefDistribution) -> Self {
        b.spec()
    }
}

impl BeliefDistribution {
    /// Finite point-mass belief. Weights must sum to one within 1e-12; zero-weight atoms are
    /// dropped and repeated atoms merged.
    pub fn discrete(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidBelief("discrete belief needs at least one atom".into()));
        }
        let mut total = 0.0;
        for &(l, w) in &points {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidBelief(format!("atom {l} must be positive and finite")));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidBelief(format!("weight {w} must be non-negative")));
            }
            total += w;
        }
        if (total - 1.0).abs() > DISCRETE_WEIGHT_TOL {
            return Err(Error::InvalidBelief(format!("weights sum to {total}, not 1")));
        }
        let mut atoms: Vec<(f64, f64)> = points.into_iter().filter(|(_, w)| *w > 0.0).collect();
        atoms.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (l, w) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == l => last.1 += w,
                _ => merged.push((l, w)),
            }
        }
        let mean = merged.iter().map(|(l, w)| l * w).sum();
        let inv_mean = merged.iter().map(|(l, w)| w / l).sum();
        Ok(BeliefDistribution {
            lambda_min: merged[0].0,
            lambda_max: merged[merged.len() - 1].0,
            shape: Shape::Discrete(merged),
            mean,
            inv_mean,
            raw_mass: 1.0,
        })
    }

    /// Degenerate belief concentrated at `lambda`.
    pub fn point_mass(lambda: f64) -> Result<Self> {
        Self::discrete(vec![(lambda, 1.0)])
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a > 0.0 && b > a) {
            return Err(Error::InvalidBelief(format!("uniform needs 0 < a < b, got ({a}, {b})")));
        }
        Ok(BeliefDistribution {
            shape: Shape::Uniform { a, b },
            lambda_min: a,
            lambda_max: b,
            mean: 0.5 * (a + b),
            inv_mean: (b / a).ln() / (b - a),
            raw_mass: 1.0,
        })
    }

    /// Density tabulated on a strictly increasing grid and interpolated linearly between nodes.
    /// The density is rescaled to integrate to one; the original mass is kept in
    /// [`Self::raw_mass`].
    pub fn tabulated(grid: Vec<(f64, f64)>) -> Result<Self> {
        if grid.len() < 2 {
            return Err(Error::InvalidBelief("tabulated belief needs at least two nodes".into()));
        }
        for w in grid.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidBelief("tabulated grid must be strictly increasing".into()));
            }
        }
        for &(l, f) in &grid {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidBelief(format!("grid abscissa {l} must be positive")));
            }
            if !(f.is_finite() && f >= 0.0) {
                return Err(Error::InvalidBelief(format!("density {f} must be non-negative")));
            }
        }
        let raw_mass: f64 = grid
            .windows(2)
            .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
            .sum();
        if !(raw_mass > 0.0) {
            return Err(Error::InvalidBelief("tabulated density has zero mass".into()));
        }
        let grid: Vec<(f64, f64)> = grid.into_iter().map(|(l, f)| (l, f / raw_mass)).collect();
        let mut cum = Vec::with_capacity(grid.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for w in grid.windows(2) {
            acc += 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0);
            cum.push(acc);
        }
        let mut belief = BeliefDistribution {
            lambda_min: grid[0].0,
            lambda_max: grid[grid.len() - 1].0,
            shape: Shape::Tabulated { grid, cum },
            mean: 0.0,
            inv_mean: 0.0,
            raw_mass,
        };
        belief.mean = belief.expectation(|l| l, &[]);
        belief.inv_mean = belief.expectation(|l| 1.0 / l, &[]);
        Ok(belief)
    }

    pub fn spec(&self) -> BeliefSpec {
        match &self.shape {
            Shape::Discrete(atoms) => BeliefSpec::Discrete {
                points: atoms.iter().map(|&(l, w)| [l, w]).collect(),
            },
            Shape::Uniform { a, b } => BeliefSpec::Uniform { a: *a, b: *b },
            Shape::Tabulated { grid, .. } => BeliefSpec::Tabulated {
                grid: grid.iter().map(|&(l, f)| [l, f]).collect(),
            },
        }
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }
    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }
    /// E[Λ].
    pub fn mean(&self) -> f64 {
        self.mean
    }
    /// E[1/Λ].
    pub fn inv_mean(&self) -> f64 {
        self.inv_mean
    }
    /// 1/E[1/Λ].
    pub fn harmonic_mean(&self) -> f64 {
        1.0 / self.inv_mean
    }
    pub fn raw_mass(&self) -> f64 {
        self.raw_mass
    }

    pub fn is_point_mass(&self) -> bool {
        matches!(&self.shape, Shape::Discrete(a) if a.len() == 1)
    }

    /// Atoms of a discrete belief, `None` for continuous ones.
    pub fn atoms(&self) -> Option<&[(f64, f64)]> {
        match &self.shape {
            Shape::Discrete(a) => Some(a),
            _ => None,
        }
    }

    /// Abscissae where a continuous density is not smooth (grid nodes); empty otherwise.
    fn density_breaks(&self) -> &[(f64, f64)] {
        match &self.shape {
            Shape::Tabulated { grid, .. } => grid,
            _ => &[],
        }
    }

    fn density(&self, l: f64) -> f64 {
        match &self.shape {
            Shape::Discrete(_) => 0.0,
            Shape::Uniform { a, b } => {
                if l >= *a && l <= *b {
                    1.0 / (b - a)
                } else {
                    0.0
                }
            }
            Shape::Tabulated { grid, .. } => {
                if l < grid[0].0 || l > grid[grid.len() - 1].0 {
                    return 0.0;
                }
                let i = grid.partition_point(|(x, _)| *x <= l).clamp(1, grid.len() - 1);
                let (x0, f0) = grid[i - 1];
                let (x1, f1) = grid[i];
                f0 + (f1 - f0) * (l - x0) / (x1 - x0)
            }
        }
    }

    /// ∫ g dF over `(lo, hi]` for discrete beliefs and `[lo, hi]` for continuous ones, with extra
    /// quadrature breakpoints at `kinks`.
    fn partial(&self, g: &dyn Fn(f64) -> f64, lo: f64, hi: f64, kinks: &[f64]) -> f64 {
        match &self.shape {
            Shape::Discrete(atoms) => atoms
                .iter()
                .filter(|(l, _)| *l > lo && *l <= hi)
                .map(|(l, w)| w * g(*l))
                .sum(),
            _ => {
                let lo = lo.max(self.lambda_min);
                let hi = hi.min(self.lambda_max);
                if hi <= lo {
                    return 0.0;
                }
                let mut breaks: Vec<f64> = kinks.to_vec();
                breaks.extend(self.density_breaks().iter().map(|(x, _)| *x));
                integrate(|l| g(l) * self.density(l), lo, hi, &breaks, QUAD_REL_TOL)
            }
        }
    }

    /// E[g(Λ)]. Continuous beliefs are integrated with adaptive Gauss–Legendre, split at `kinks`.
    pub fn expectation<G: Fn(f64) -> f64>(&self, g: G, kinks: &[f64]) -> f64 {
        self.partial(&g, f64::NEG_INFINITY, f64::INFINITY, kinks)
    }

    /// P(Λ ≤ x).
    pub fn cdf(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::Discrete(atoms) => atoms.iter().filter(|(l, _)| *l <= x).map(|(_, w)| w).sum(),
            Shape::Uniform { a, b } => ((x - a) / (b - a)).clamp(0.0, 1.0),
            Shape::Tabulated { grid, cum } => {
                if x <= grid[0].0 {
                    return 0.0;
                }
                if x >= grid[grid.len() - 1].0 {
                    return 1.0;
                }
                let i = grid.partition_point(|(l, _)| *l <= x).clamp(1, grid.len() - 1);
                let (x0, f0) = grid[i - 1];
                let fx = self.density(x);
                cum[i - 1] + 0.5 * (f0 + fx) * (x - x0)
            }
        }
    }

    /// E[g(Λ); Λ > x].
    pub fn upper_expectation<G: Fn(f64) -> f64>(&self, g: G, x: f64) -> f64 {
        self.partial(&g, x, f64::INFINITY, &[])
    }

    /// Draws one belief.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        match &self.shape {
            Shape::Discrete(atoms) => {
                let mut acc = 0.0;
                for &(l, w) in atoms {
                    acc += w;
                    if u < acc {
                        return l;
                    }
                }
                atoms[atoms.len() - 1].0
            }
            Shape::Uniform { a, b } => a + (b - a) * u,
            Shape::Tabulated { grid, cum } => {
                let i = cum.partition_point(|c| *c <= u).clamp(1, grid.len() - 1);
                let (x0, f0) = grid[i - 1];
                let (x1, f1) = grid[i];
                let target = u - cum[i - 1];
                let slope = (f1 - f0) / (x1 - x0);
                // Solve f0*t + slope*t^2/2 = target for t in [0, x1 - x0].
                let t = if slope.abs() < 1e-14 * f0.max(1e-300) {
                    if f0 > 0.0 {
                        target / f0
                    } else {
                        0.0
                    }
                } else {
                    let disc = (f0 * f0 + 2.0 * slope * target).max(0.0);
                    2.0 * target / (f0 + disc.sqrt()).max(1e-300)
                };
                (x0 + t).clamp(x0, x1)
            }
        }
    }
}

/// The functional of Λ requested from [`expect`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "xi")]
pub enum Transform {
    /// W(qΛ)
    W,
    /// W(qΛ)^2
    WSquared,
    /// 1/Λ
    Reciprocal,
    /// 1{Λ ≤ ξ}
    IndicatorBelow(f64),
    /// min(ξ/Λ, 1)
    ClippedRatio(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectationRequest {
    pub q: f64,
    pub transform: Transform,
}

impl ExpectationRequest {
    pub fn new(q: f64, transform: Transform) -> Self {
        ExpectationRequest { q, transform }
    }
}

/// E[g(Λ)] for the requested transform. W-transforms need `q * lambda_max < mu`.
pub fn expect(belief: &BeliefDistribution, req: ExpectationRequest, params: &SystemParams) -> Result<f64> {
    let q = req.q;
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidParams(format!("joining probability {q} outside [0, 1]")));
    }
    match req.transform {
        Transform::W | Transform::WSquared => {
            let top = q * belief.lambda_max();
            if top >= params.mu() {
                return Err(Error::UnstableRegime { rate: top, mu: params.mu() });
            }
            let power = if req.transform == Transform::W { 1 } else { 2 };
            Ok(belief.expectation(|l| params.pk_wait(q * l).powi(power), &[]))
        }
        Transform::Reciprocal => Ok(belief.expectation(|l| 1.0 / l, &[])),
        Transform::IndicatorBelow(xi) => Ok(belief.cdf(xi)),
        Transform::ClippedRatio(xi) => Ok(belief.expectation(|l| (xi / l).min(1.0), &[xi])),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    NonFinite,
    Stability,
    RewardBelowServiceCost,
    ServiceMoment,
    SupportCap,
    TrueRateOutsideSupport,
    DegenerateBelief,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub kind: IssueKind,
    pub severity: Severity,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        !self.issues.iter().any(|i| i.severity == Severity::Error)
    }

    pub fn has(&self, kind: IssueKind) -> bool {
        self.issues.iter().any(|i| i.kind == kind)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &ValidationIssue> {
        self.issues.iter().filter(|i| i.severity == Severity::Warning)
    }

    pub fn errors(&self) -> impl Iterator<Item = &ValidationIssue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }
}

fn issue(kind: IssueKind, severity: Severity, message: String) -> ValidationIssue {
    ValidationIssue { kind, severity, message }
}

fn validate_params(p: &SystemParams) -> Vec<ValidationIssue> {
    let mut out = Vec::new();
    let all = [p.r, p.c, p.mu, p.s2, p.lambda];
    if all.iter().any(|v| !v.is_finite()) || p.mu <= 0.0 || p.c < 0.0 {
        out.push(issue(
            IssueKind::NonFinite,
            Severity::Error,
            "parameters must be finite with mu > 0 and C >= 0".into(),
        ));
        return out;
    }
    if !(p.lambda > 0.0 && p.lambda < p.mu) {
        out.push(issue(
            IssueKind::Stability,
            Severity::Error,
            format!("need 0 < lambda < mu, got lambda = {} and mu = {}", p.lambda, p.mu),
        ));
    }
    if p.r < p.c / p.mu {
        out.push(issue(
            IssueKind::RewardBelowServiceCost,
            Severity::Error,
            format!("R = {} is below C/mu = {}", p.r, p.c / p.mu),
        ));
    }
    let floor = 1.0 / (p.mu * p.mu);
    if p.s2 < floor * (1.0 - 1e-12) {
        out.push(issue(
            IssueKind::ServiceMoment,
            Severity::Error,
            format!("s2 = {} is below 1/mu^2 = {}", p.s2, floor),
        ));
    }
    out
}

/// Lists every violated invariant of a parameter/belief pair. Stability, `R >= C/mu`, the
/// service-moment bound and the support cap `lambda_max <= mu` are hard errors; a true rate
/// outside `(lambda_min, lambda_max)` and a point-mass belief are warnings.
pub fn validate(params: &SystemParams, belief: &BeliefDistribution) -> ValidationReport {
    let mut issues = validate_params(params);
    if belief.lambda_max() > params.mu {
        issues.push(issue(
            IssueKind::SupportCap,
            Severity::Error,
            format!("lambda_max = {} exceeds mu = {}", belief.lambda_max(), params.mu),
        ));
    }
    if belief.is_point_mass() {
        issues.push(issue(
            IssueKind::DegenerateBelief,
            Severity::Warning,
            format!("belief is a point mass at {}", belief.lambda_min()),
        ));
    }
    if !(belief.lambda_min() < params.lambda && params.lambda < belief.lambda_max()) {
        issues.push(issue(
            IssueKind::TrueRateOutsideSupport,
            Severity::Warning,
            format!(
                "lambda = {} is not inside ({}, {})",
                params.lambda,
                belief.lambda_min(),
                belief.lambda_max()
            ),
        ));
    }
    ValidationReport { issues }
}
