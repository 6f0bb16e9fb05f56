use std::path::{Path, PathBuf};

use beliefq_core::decision::{Audience, MapGrid};
use beliefq_core::sim::{ServiceDist, SimConfig};
use beliefq_core::{BeliefDistribution, InfoCase, SystemParams};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands::{self, Axis, SweepSpec};
use crate::error::{CliError, CliResult};
use crate::input::{load_belief, read_json, BeliefSource, ParamOverrides, DEFAULT_MU};
use crate::output::{write_text, Format, Sink};
use crate::reproduce::{self, Target};

const PRECEDENCE: &str = "Parameters are resolved field by field: command-line flags win over the \
--params file, which wins over the defaults R=5, C=5, mu=5, lambda=4.2 and s2=2/mu^2. Without a \
belief flag, customers are assumed to believe the true rate.\n\nExit codes: 0 ok, 2 invalid input, \
3 numerical failure, 4 I/O error. Errors are printed to stderr as JSON.";

#[derive(Debug, Parser)]
#[command(name = "beliefq", version, about = "Fees and information disclosure for an unobservable queue", long_about = None, after_help = PRECEDENCE)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Joining, revenue and welfare of every case at one fee.
    Analyze {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1.5)]
        p: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Metrics along a fee, belief-mean or belief-spread axis.
    Sweep {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum)]
        axis: AxisArg,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        /// Number of rows; zero prints the header only.
        #[arg(long)]
        steps: usize,
        /// Fee held fixed on the belief axes.
        #[arg(long, default_value_t = 1.5)]
        p: f64,
        /// Uniform width held fixed on the mean axis.
        #[arg(long, default_value_t = 0.6)]
        spread: f64,
        /// Belief mean held fixed on the spread axis.
        #[arg(long, default_value_t = 4.2)]
        mean: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Free-entry, revenue-maximizing and welfare-maximizing joining per case.
    Equilibria {
        #[command(flatten)]
        model: ModelArgs,
        /// Only this case; all three otherwise.
        #[arg(long, value_enum)]
        case: Option<CaseArg>,
        /// Print the checked orderings between cases instead.
        #[arg(long)]
        orderings: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Pairwise revenue labels over a (xi, lambda) grid and the switch curves.
    ThresholdMap {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [3.0, 4.2])]
        xi_range: Vec<f64>,
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [3.0, 4.8])]
        lambda_range: Vec<f64>,
        #[arg(long, default_value_t = 40)]
        xi_steps: usize,
        #[arg(long, default_value_t = 40)]
        lambda_steps: usize,
        #[command(flatten)]
        map: MapOutArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Disclosure and fee recommendation for a manager.
    Advise {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value_t = AudienceArg::Rm)]
        audience: AudienceArg,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Discrete-event simulation of one case at one fee.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value_t = CaseArg::Private)]
        case: CaseArg,
        #[arg(long, default_value_t = 1.5)]
        p: f64,
        #[arg(long, default_value_t = 1e5)]
        horizon: f64,
        /// Defaults to 1% of the horizon.
        #[arg(long)]
        warmup: Option<f64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = ServiceArg::Exponential)]
        service: ServiceArg,
        #[arg(long, default_value_t = 20)]
        batches: usize,
        /// Write every arrival as CSV: arrival_time, belief, joined, wait.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Compare against the analytic values instead of printing the raw report.
        #[arg(long)]
        validate: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Regenerate one of the built-in tables or figure datasets.
    Reproduce {
        #[arg(value_enum)]
        target: TargetArg,
        #[command(flatten)]
        map: MapOutArgs,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// JSON file with any of R, C, mu, s2, lambda.
    #[arg(long, value_name = "FILE")]
    pub params: Option<PathBuf>,
    #[arg(long = "R", visible_alias = "r")]
    pub r: Option<f64>,
    #[arg(long = "C", visible_alias = "c")]
    pub c: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    /// Second moment of the service time.
    #[arg(long)]
    pub s2: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// JSON belief: {"type": "uniform", "a": .., "b": ..}, {"type": "discrete", "points": [[rate, weight], ..]}
    /// or {"type": "tabulated", "grid": [[rate, density], ..]}.
    #[arg(long, value_name = "FILE", group = "belief_source")]
    pub belief: Option<PathBuf>,
    #[arg(long, num_args = 2, value_names = ["A", "B"], group = "belief_source")]
    pub uniform: Option<Vec<f64>>,
    #[arg(long, value_name = "RATE", group = "belief_source")]
    pub point: Option<f64>,
}

impl ModelArgs {
    fn overrides(&self) -> ParamOverrides {
        ParamOverrides {
            r: self.r,
            c: self.c,
            mu: self.mu,
            s2: self.s2,
            lambda: self.lambda,
        }
    }

    fn belief_source(&self) -> BeliefSource {
        if let Some(p) = &self.belief {
            BeliefSource::File(p.clone())
        } else if let Some(v) = &self.uniform {
            BeliefSource::Uniform(v[0], v[1])
        } else if let Some(x) = self.point {
            BeliefSource::Point(x)
        } else {
            BeliefSource::TrueRate
        }
    }

    /// Flags over the --params file, before defaults.
    fn merged(&self) -> CliResult<ParamOverrides> {
        let from_file = match &self.params {
            Some(path) => read_json::<ParamOverrides>(path)?,
            None => ParamOverrides::default(),
        };
        Ok(self.overrides().over(from_file))
    }

    fn load(&self) -> CliResult<(SystemParams, BeliefDistribution)> {
        self.load_from(self.merged()?)
    }

    fn load_from(&self, merged: ParamOverrides) -> CliResult<(SystemParams, BeliefDistribution)> {
        let params = merged.resolve()?;
        let belief = load_belief(&self.belief_source(), &params)?;
        Ok((params, belief))
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct OutArgs {
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
    /// Write here instead of stdout.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Round numbers to this many decimals, ties to even. Reproduced tables default to 3.
    #[arg(long)]
    pub precision: Option<usize>,
}

impl OutArgs {
    fn sink(&self, default_precision: Option<usize>) -> Sink {
        Sink {
            format: self.format.into(),
            out: self.out.clone(),
            precision: self.precision.or(default_precision),
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct MapOutArgs {
    /// CSV file for the switch curves. With --out and no --polylines they go next to the
    /// output as <stem>_polylines.csv; on stdout they are skipped.
    #[arg(long, value_name = "PATH")]
    pub polylines: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    #[default]
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CaseArg {
    Classical,
    Shared,
    Private,
}

impl From<CaseArg> for InfoCase {
    fn from(c: CaseArg) -> Self {
        match c {
            CaseArg::Classical => InfoCase::Classical,
            CaseArg::Shared => InfoCase::SharedBelief,
            CaseArg::Private => InfoCase::PrivateBelief,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    P,
    BeliefMean,
    BeliefSpread,
}

impl From<AxisArg> for Axis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::P => Axis::P,
            AxisArg::BeliefMean => Axis::BeliefMean,
            AxisArg::BeliefSpread => Axis::BeliefSpread,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AudienceArg {
    Rm,
    So,
}

impl From<AudienceArg> for Audience {
    fn from(a: AudienceArg) -> Self {
        match a {
            AudienceArg::Rm => Audience::Rm,
            AudienceArg::So => Audience::So,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ServiceArg {
    Exponential,
    Deterministic,
    Lognormal,
}

impl From<ServiceArg> for ServiceDist {
    fn from(s: ServiceArg) -> Self {
        match s {
            ServiceArg::Exponential => ServiceDist::Exponential,
            ServiceArg::Deterministic => ServiceDist::Deterministic,
            ServiceArg::Lognormal => ServiceDist::LogNormal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    TableMean,
    TableSpread,
    TablePOptimistic,
    TablePPessimistic,
    FigEquilibria,
    FigRegions,
}

impl From<TargetArg> for Target {
    fn from(t: TargetArg) -> Self {
        match t {
            TargetArg::TableMean => Target::TableMean,
            TargetArg::TableSpread => Target::TableSpread,
            TargetArg::TablePOptimistic => Target::TablePOptimistic,
            TargetArg::TablePPessimistic => Target::TablePPessimistic,
            TargetArg::FigEquilibria => Target::FigEquilibria,
            TargetArg::FigRegions => Target::FigRegions,
        }
    }
}

/// Default location of the switch curves when the cells go to `out`.
fn polyline_path(map: &MapOutArgs, out: Option<&Path>) -> Option<PathBuf> {
    map.polylines.clone().or_else(|| {
        out.map(|p| {
            let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("map");
            p.with_file_name(format!("{stem}_polylines.csv"))
        })
    })
}

fn emit_map(map: &beliefq_core::decision::RegionMap, sink: &Sink, lines: &MapOutArgs) -> CliResult<()> {
    if sink.format == Format::Json {
        return sink.emit_text(&sink.render_json(map)?);
    }
    sink.emit_text(&reproduce::region_cells(map).to_csv(sink.precision)?)?;
    if let Some(path) = polyline_path(lines, sink.out.as_deref()) {
        write_text(Some(&path), &reproduce::region_polylines(map).to_csv(sink.precision)?)?;
    }
    Ok(())
}

/// Default precision of reproduced tables.
pub const TABLE_PRECISION: usize = 3;

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Analyze { model, p, out } => {
            let (params, belief) = model.load()?;
            let a = commands::analyze(&params, &belief, p);
            out.sink(None).emit(&a, || commands::analysis_table(&a))
        }
        Command::Sweep { model, axis, from, to, steps, p, spread, mean, out } => {
            let (params, belief) = model.load()?;
            if !(from.is_finite() && to.is_finite()) {
                return Err(CliError::Input("sweep bounds must be finite".into()));
            }
            let spec = SweepSpec { axis: axis.into(), from, to, steps, p, belief, spread, mean };
            let rows = commands::sweep(&params, &spec)?;
            out.sink(None).emit(&rows, || commands::sweep_table(&rows))
        }
        Command::Equilibria { model, case, orderings, out } => {
            let (params, belief) = model.load()?;
            let sink = out.sink(None);
            if orderings {
                let r = commands::orderings(&params, &belief)?;
                return sink.emit(&r, || commands::orderings_table(&r));
            }
            let cases: Vec<InfoCase> = match case {
                Some(c) => vec![c.into()],
                None => InfoCase::ALL.to_vec(),
            };
            let sets = commands::equilibria(&params, &belief, &cases)?;
            sink.emit(&sets, || commands::equilibria_table(&sets))
        }
        Command::ThresholdMap { model, xi_range, lambda_range, xi_steps, lambda_steps, map, out } => {
            let (params, belief) = model.load()?;
            let grid = MapGrid {
                xi_range: (xi_range[0], xi_range[1]),
                lambda_range: (lambda_range[0], lambda_range[1]),
                xi_steps,
                lambda_steps,
            };
            let m = commands::threshold_map(&params, &belief, grid)?;
            emit_map(&m, &out.sink(None), &map)
        }
        Command::Advise { model, audience, out } => {
            let (params, belief) = model.load()?;
            let a = commands::advice(&params, &belief, audience.into())?;
            out.sink(None).emit(&a, || commands::advice_table(&a))
        }
        Command::Simulate {
            model,
            case,
            p,
            horizon,
            warmup,
            seed,
            service,
            batches,
            trace,
            validate,
            out,
        } => {
            let service: ServiceDist = service.into();
            let mut merged = model.merged()?;
            // Deterministic service pins s2 unless it was given.
            if merged.s2.is_none() && service == ServiceDist::Deterministic {
                merged.s2 = service.pinned_second_moment(merged.mu.unwrap_or(DEFAULT_MU));
            }
            let (params, belief) = model.load_from(merged)?;
            let mut config = SimConfig::new(params, belief, case.into(), p, horizon, seed, service);
            if let Some(w) = warmup {
                config.warmup = w;
            }
            config.batches = batches;
            let outcome = commands::run_simulation(&config, trace.as_deref(), validate)?;
            out.sink(None).emit(&outcome, || commands::simulation_table(&outcome))
        }
        Command::Reproduce { target, map, out } => {
            let sink = out.sink(Some(TABLE_PRECISION));
            match Target::from(target) {
                Target::TableMean => sink.emit_text(&sink.render_table(&reproduce::table_mean()?)?),
                Target::TableSpread => sink.emit_text(&sink.render_table(&reproduce::table_spread()?)?),
                Target::TablePOptimistic => {
                    sink.emit_text(&sink.render_table(&reproduce::table_p(reproduce::OPTIMISTIC)?)?)
                }
                Target::TablePPessimistic => {
                    sink.emit_text(&sink.render_table(&reproduce::table_p(reproduce::PESSIMISTIC)?)?)
                }
                Target::FigEquilibria => {
                    let f = reproduce::fig_equilibria()?;
                    sink.emit(&f, || f.curves.clone())
                }
                Target::FigRegions => emit_map(&reproduce::fig_regions(), &sink, &map),
            }
        }
    }
}
