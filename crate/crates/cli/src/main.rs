use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use ligandsense::crn::{crn_integrate, end_to_end_sense, CrnSpec, SenseConfig};
use ligandsense::estimators::EstimatorKind;
use ligandsense::experiments::plot::{Plot, Series, Style};
use ligandsense::experiments::{
    crlb_table, crn_table, estimate_table, events_table, kpr_histogram_table, kpr_plot,
    kpr_summary_table, nu_table, run_kpr_figure, run_sweep, sweep_plot, sweep_table,
    ScenarioConfig, Sweep, SweepEstimator, SweepVar, Table, BUILTIN_DEFAULTS,
};
use ligandsense::kinetics::{DwellSampler, ObservationSet};
use ligandsense::rng;
use ligandsense::theory::{grid_scan_nu, optimize_nu, NU_SEARCH_RANGE};

const THREADS_ENV: &str = "LIGANDSENSE_THREADS";
const KPR_DEFAULT_M: usize = 3;

#[derive(Parser, Debug)]
#[command(
    name = "ligandsense",
    version,
    about = "Multi-ligand concentration sensing toolkit"
)]
struct Cli {
    /// Master seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo trials per sweep point
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// TOML scenario file, or "defaults"
    #[arg(long, global = true)]
    config: Option<String>,
    /// Write CSV here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write an SVG figure
    #[arg(long, global = true)]
    plot: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dump one set of sampled binding events
    Simulate {
        #[arg(long)]
        samples: Option<u64>,
    },
    /// Estimate concentrations from a dataset or a fresh simulation
    Estimate {
        /// CSV with `unbound` and `bound` columns
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Fisher information and Cramér–Rao bounds
    Crlb {
        #[arg(long = "M")]
        m: Option<usize>,
    },
    /// Analytic and Monte Carlo metrics across a parameter grid
    Sweep {
        /// M, chi, N, alpha_m, absent, k_u or alpha_u
        #[arg(long)]
        var: String,
        #[arg(long)]
        from: Option<f64>,
        #[arg(long)]
        to: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        /// Explicit comma-separated grid
        #[arg(long, value_delimiter = ',', conflicts_with_all = ["from", "to", "points"])]
        values: Option<Vec<f64>>,
        /// Comma-separated: unbiased, biased, nu_opt
        #[arg(long, value_delimiter = ',')]
        estimators: Option<Vec<String>>,
    },
    /// Messenger-count histograms of the proofreading receptor
    Kpr {
        #[arg(long = "M")]
        m: Option<usize>,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long, value_enum, default_value_t = KprTable::Histogram)]
        table: KprTable,
    },
    /// One receptor-to-network sensing round
    Crn {
        #[arg(long = "M")]
        m: Option<usize>,
    },
    /// Threshold constant minimizing the analytic metric
    OptimizeNu,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum KprTable {
    Histogram,
    Summary,
}

fn load_config(cli: &Cli, fallback_m: Option<usize>) -> anyhow::Result<ScenarioConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => {
            let mut c = ScenarioConfig::load(BUILTIN_DEFAULTS)?;
            if let Some(m) = fallback_m {
                c.model.ligand_types = m;
            }
            c
        }
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.trials {
        cfg.trials = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn with_m(mut cfg: ScenarioConfig, m: Option<usize>) -> anyhow::Result<ScenarioConfig> {
    if let Some(m) = m {
        cfg.model.ligand_types = m;
        cfg.validate()?;
    }
    Ok(cfg)
}

fn read_observations(path: &PathBuf) -> anyhow::Result<ObservationSet> {
    let mut reader =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(u), Some(b)) = (col("unbound"), col("bound")) else {
        bail!("{} needs `unbound` and `bound` columns", path.display());
    };
    let mut unbound = 0.0;
    let mut bound = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        unbound += rec[u].trim().parse::<f64>().context("parsing unbound")?;
        bound.push(rec[b].trim().parse::<f64>().context("parsing bound")?);
    }
    Ok(ObservationSet::new(unbound, bound)?)
}

fn emit(cli: &Cli, table: &Table) -> anyhow::Result<()> {
    match &cli.out {
        Some(path) => {
            let f =
                fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            table.write_csv(io::BufWriter::new(f))?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            table.write_csv(&mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn emit_plot(cli: &Cli, plot: impl FnOnce() -> anyhow::Result<Plot>) -> anyhow::Result<()> {
    if let Some(path) = &cli.plot {
        fs::write(path, plot()?.render()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Simulate { samples } => {
            let cfg = load_config(cli, None)?;
            let n = samples.unwrap_or(cfg.model.samples);
            let sampler = DwellSampler::new(&cfg.channel()?);
            let mut r = rng::from_seed(cfg.seed);
            let events: Vec<_> = (0..n).map(|_| sampler.draw_event(&mut r)).collect();
            emit(cli, &events_table(&events))?;
            emit_plot(cli, || {
                let mut p = Plot::new("bound durations", "event", "bound time");
                p.log_y = true;
                p.series.push(Series {
                    name: "bound".into(),
                    points: events
                        .iter()
                        .enumerate()
                        .map(|(i, e)| (i as f64, e.bound))
                        .collect(),
                    style: Style::Markers,
                });
                Ok(p)
            })
        }
        Command::Estimate { data } => {
            let cfg = load_config(cli, None)?;
            let obs = match data {
                Some(path) => read_observations(path)?,
                None => ligandsense::kinetics::sample_observations(
                    &cfg.channel()?,
                    cfg.model.samples as usize,
                    cfg.seed,
                )?,
            };
            emit(cli, &estimate_table(&cfg, &obs)?)
        }
        Command::Crlb { m } => {
            let cfg = with_m(load_config(cli, None)?, *m)?;
            emit(cli, &crlb_table(&cfg)?)
        }
        Command::Sweep {
            var,
            from,
            to,
            points,
            values,
            estimators,
        } => {
            let mut cfg = load_config(cli, None)?;
            let var = SweepVar::parse(var)?;
            if let Some(list) = estimators {
                cfg.estimators.kinds = list
                    .iter()
                    .map(|s| SweepEstimator::parse(s.trim()))
                    .collect::<Result<_, _>>()?;
            }
            let sweep = match values {
                Some(v) => Sweep {
                    var,
                    values: v.clone(),
                },
                None => {
                    let (a, b) = var.default_range();
                    Sweep::range(var, from.unwrap_or(a), to.unwrap_or(b), *points)?
                }
            };
            let rows = run_sweep(&cfg, &sweep)?;
            emit(cli, &sweep_table(&rows))?;
            emit_plot(cli, || Ok(sweep_plot(var, &rows)))
        }
        Command::Kpr {
            m,
            replicates,
            table,
        } => {
            let fallback = m.or(Some(KPR_DEFAULT_M));
            let mut cfg = with_m(load_config(cli, fallback)?, *m)?;
            if let Some(r) = replicates {
                cfg.kpr.replicates = *r;
            }
            let fig = run_kpr_figure(&cfg)?;
            let t = match table {
                KprTable::Histogram => kpr_histogram_table(&fig),
                KprTable::Summary => kpr_summary_table(&fig),
            };
            emit(cli, &t)?;
            emit_plot(cli, || Ok(kpr_plot(&fig)))
        }
        Command::Crn { m } => {
            let cfg = with_m(load_config(cli, m.or(Some(KPR_DEFAULT_M)))?, *m)?;
            let mix = cfg.channel()?;
            let sense = SenseConfig {
                nu: cfg.estimators.nu_unbiased,
                kappa: cfg.kpr.kappa,
                production_rate: cfg.kpr.production_rate,
                receptors: cfg.kpr.receptors,
            };
            let out = end_to_end_sense(&mix, &sense, cfg.seed)?;
            if out.negative_weights {
                log::warn!(
                    "the weight matrix has negative entries, which no physical reaction realizes"
                );
            }
            emit(cli, &crn_table(&mix.concentrations(), &out))?;
            emit_plot(cli, || {
                let matrices = ligandsense::estimators::EstimatorMatrices::new(
                    &ligandsense::estimators::ThresholdScheme::from_rates(
                        mix.unbinding_rates(),
                        sense.nu,
                    )?,
                    mix.unbinding_rates(),
                )?;
                let n_d = out.counts.n_d.iter().map(|c| *c as f64).collect();
                let spec = CrnSpec::new(
                    matrices.w,
                    mix.binding_rate(),
                    sense.production_rate,
                    n_d,
                    out.counts.n_s as f64,
                )?;
                let decay = spec.binding_rate * spec.n_s;
                let traj = crn_integrate(&spec, 10.0 / decay, 0.05 / decay)?;
                let mut p = Plot::new("network output", "time", "n_Y");
                for i in 0..traj.last().len() {
                    p.series.push(Series {
                        name: format!("Y{}", i + 1),
                        points: traj
                            .times
                            .iter()
                            .zip(&traj.states)
                            .map(|(t, y)| (*t, y[i]))
                            .collect(),
                        style: Style::Line,
                    });
                }
                Ok(p)
            })
        }
        Command::OptimizeNu => {
            let cfg = load_config(cli, None)?;
            let scenario = cfg.analytic_scenario()?;
            let golden = optimize_nu(&scenario, NU_SEARCH_RANGE)?;
            let grid = grid_scan_nu(&scenario, NU_SEARCH_RANGE, 200)?;
            emit(cli, &nu_table(&[golden, grid]))?;
            emit_plot(cli, || {
                let mut p = Plot::new("unbiased metric against ν", "nu", "metric");
                p.log_y = true;
                let step = (NU_SEARCH_RANGE.1 - NU_SEARCH_RANGE.0) / 199.0;
                let metric = cfg.metric()?;
                p.series.push(Series {
                    name: "analytic".into(),
                    points: (0..200)
                        .map(|i| {
                            let nu = NU_SEARCH_RANGE.0 + step * i as f64;
                            let v = scenario
                                .report(EstimatorKind::Unbiased, nu)
                                .and_then(|r| r.metric(metric))
                                .unwrap_or(f64::NAN);
                            (nu, v)
                        })
                        .collect(),
                    style: Style::Line,
                });
                Ok(p)
            })
        }
    }
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .with_context(|| format!("{THREADS_ENV} must be a positive integer, got '{v}'"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(e) = init_threads().and_then(|_| run(&cli)) {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}
