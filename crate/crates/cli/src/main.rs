//! `bdyson`: batch driver for certified bilinear propagation and attainable-set nets.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod gen;
mod netfile;
mod problem;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bilinear_dyson::reach::{sample_attainable, time_grid};
use bilinear_dyson::{
    attainable_net, choose_truncation, control_family, covering_numbers, embed, obstruction_report,
    operator_norm, picard_solution, propagate_oracle, semigroup_bounds, series_tail, tail_bound,
    w_terms, Complex64, DVector, DysonConfig, DysonPropagator, Field, NetParams,
};
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use problem::{vector_entries, CliError, FieldKind, Instance, ProblemSpec, Scalar};

#[derive(Parser)]
#[command(
    name = "bdyson",
    version,
    about = "Certified Dyson propagation and attainable-set nets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Dyson,
    Oracle,
    Picard,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate psi0 to time t and print a JSON result record.
    Propagate {
        problem: PathBuf,
        /// Final time (defaults to the problem's T).
        #[arg(long)]
        t: Option<f64>,
        /// Target accuracy (defaults to the problem's eps, then 1e-8).
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, value_enum, default_value = "dyson")]
        method: Method,
        /// Grid points per control piece.
        #[arg(long, default_value_t = 64)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump ‖w_p(t)‖ and its factorial bound per order as CSV.
    Terms {
        problem: PathBuf,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long, default_value_t = 12)]
        max_order: usize,
        #[arg(long, default_value_t = 64)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a net of the sampled attainable set; centers go to --out.
    Net {
        problem: PathBuf,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long = "T")]
        horizon: Option<f64>,
        #[arg(long = "K")]
        l1_budget: Option<f64>,
        #[arg(long, default_value_t = 200)]
        family_size: usize,
        /// Control-family seed (defaults to the problem's seed).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 32)]
        grid: usize,
        /// Sampled times on [0, T].
        #[arg(long, default_value_t = 11)]
        n_times: usize,
        /// Pieces per sampled control.
        #[arg(long, default_value_t = 4)]
        n_pieces: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Covering-number ladder of the sampled attainable set as CSV.
    Cover {
        problem: PathBuf,
        /// Comma-separated radii.
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        #[arg(long = "T")]
        horizon: Option<f64>,
        #[arg(long = "K")]
        l1_budget: Option<f64>,
        #[arg(long, default_value_t = 200)]
        family_size: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 32)]
        grid: usize,
        #[arg(long, default_value_t = 11)]
        n_times: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Distances from seeded unit-sphere targets to a net, as CSV.
    Obstruct {
        net: PathBuf,
        #[arg(long, default_value_t = 200)]
        n_targets: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Use the net's own centers as targets.
        #[arg(long)]
        targets_from_centers: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write an example problem file.
    Gen {
        #[arg(value_enum)]
        kind: gen::Kind,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bdyson: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn required(value: Option<f64>, name: &str) -> Result<f64, CliError> {
    value.ok_or_else(|| CliError::Input(format!("{name} is required (flag or problem file)")))
}

fn config(grid: usize) -> Result<DysonConfig, CliError> {
    let cfg = DysonConfig {
        grid_points_per_piece: grid,
        ..DysonConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Propagate {
            problem,
            t,
            eps,
            method,
            grid,
            out,
        } => {
            let spec = ProblemSpec::load(&problem)?;
            let t = required(t.or(spec.horizon), "--t")?;
            let eps = eps.or(spec.eps).unwrap_or(1e-8);
            let cfg = config(grid)?;
            let mut record = match spec.field {
                FieldKind::Real => propagate::<f64>(&spec, t, eps, method, &cfg)?,
                FieldKind::Complex => propagate::<Complex64>(&spec, t, eps, method, &cfg)?,
            };
            // Timing only goes to the terminal so that output files stay reproducible.
            if out.is_some() {
                record.elapsed = None;
            }
            let mut w = sink(out.as_deref())?;
            serde_json::to_writer_pretty(&mut w, &record)
                .map_err(|e| CliError::Other(e.to_string()))?;
            writeln!(w)?;
        }
        Command::Terms {
            problem,
            t,
            max_order,
            grid,
            out,
        } => {
            let spec = ProblemSpec::load(&problem)?;
            let t = required(t.or(spec.horizon), "--t")?;
            let cfg = config(grid)?;
            let rows = match spec.field {
                FieldKind::Real => terms::<f64>(&spec, t, max_order, &cfg)?,
                FieldKind::Complex => terms::<Complex64>(&spec, t, max_order, &cfg)?,
            };
            let mut w = csv::Writer::from_writer(sink(out.as_deref())?);
            w.write_record(["p", "norm", "bound"])?;
            for (p, norm, bound) in rows {
                w.write_record([p.to_string(), norm.to_string(), bound.to_string()])?;
            }
            w.flush()?;
        }
        Command::Net {
            problem,
            eps,
            horizon,
            l1_budget,
            family_size,
            seed,
            grid,
            n_times,
            n_pieces,
            out,
        } => {
            let spec = ProblemSpec::load(&problem)?;
            let mut params = NetParams::new(
                required(horizon.or(spec.horizon), "--T")?,
                required(l1_budget.or(spec.l1_budget), "--K")?,
                required(eps.or(spec.eps), "--eps")?,
            );
            params.family_size = family_size;
            params.seed = seed.unwrap_or(spec.seed);
            params.n_times = n_times;
            params.n_pieces = n_pieces;
            let cfg = config(grid)?;
            let summary = match spec.field {
                FieldKind::Real => net::<f64>(&spec, &params, &cfg, &out)?,
                FieldKind::Complex => net::<Complex64>(&spec, &params, &cfg, &out)?,
            };
            let mut w = sink(None)?;
            serde_json::to_writer_pretty(&mut w, &summary)
                .map_err(|e| CliError::Other(e.to_string()))?;
            writeln!(w)?;
        }
        Command::Cover {
            problem,
            eps,
            horizon,
            l1_budget,
            family_size,
            seed,
            grid,
            n_times,
            out,
        } => {
            let spec = ProblemSpec::load(&problem)?;
            let horizon = required(horizon.or(spec.horizon), "--T")?;
            let l1_budget = required(l1_budget.or(spec.l1_budget), "--K")?;
            let seed = seed.unwrap_or(spec.seed);
            let cfg = config(grid)?;
            let points = match spec.field {
                FieldKind::Real => cover_sample::<f64>(
                    &spec,
                    horizon,
                    l1_budget,
                    &eps,
                    family_size,
                    seed,
                    n_times,
                    &cfg,
                )?,
                FieldKind::Complex => cover_sample::<Complex64>(
                    &spec,
                    horizon,
                    l1_budget,
                    &eps,
                    family_size,
                    seed,
                    n_times,
                    &cfg,
                )?,
            };
            let counts = covering_numbers(&points, &eps)?;
            let mut w = csv::Writer::from_writer(sink(out.as_deref())?);
            w.write_record(["eps", "n_centers"])?;
            for (e, n) in eps.iter().zip(counts) {
                w.write_record([e.to_string(), n.to_string()])?;
            }
            w.flush()?;
        }
        Command::Obstruct {
            net,
            n_targets,
            seed,
            targets_from_centers,
            out,
        } => {
            let net = netfile::read_net(&net)?;
            let targets = if targets_from_centers {
                net.centers.clone()
            } else {
                unit_sphere_targets(net.dim().unwrap_or(0), n_targets, seed)
            };
            let report = obstruction_report(&net, &targets)?;
            let mut w = csv::Writer::from_writer(sink(out.as_deref())?);
            w.write_record(["target_index", "distance"])?;
            for entry in report {
                w.write_record([entry.index.to_string(), entry.distance.to_string()])?;
            }
            w.flush()?;
        }
        Command::Gen {
            kind,
            dim,
            seed,
            out,
        } => {
            let spec = gen::generate(kind, dim, seed)?;
            let mut w = sink(out.as_deref())?;
            writeln!(w, "{}", spec.to_json())?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct PropagateRecord {
    method: &'static str,
    t: f64,
    eps: f64,
    state: Vec<Scalar>,
    /// Number of Dyson terms summed; absent for the direct oracle.
    truncation_order: Option<usize>,
    series_error_bound: f64,
    quadrature_error_estimate: f64,
    apriori_bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    elapsed: Option<f64>,
}

fn propagate<T: Field>(
    spec: &ProblemSpec,
    t: f64,
    eps: f64,
    method: Method,
    cfg: &DysonConfig,
) -> Result<PropagateRecord, CliError> {
    let Instance {
        a,
        b,
        psi0,
        control,
    } = spec.instance::<T>()?;
    let started = std::time::Instant::now();
    let prop = DysonPropagator::new(&a, &b, *cfg)?;
    let apriori_bound = prop.apriori(&psi0, &control, t);
    let steps = cfg.steps();

    let (name, state, order, series, quad) = match method {
        Method::Dyson => {
            let r = prop.propagate(&psi0, &control, t, eps)?;
            let q = r.quadrature_error_estimate;
            (
                "dyson",
                r.state,
                Some(r.truncation_order),
                r.series_error_bound,
                q,
            )
        }
        Method::Oracle => {
            let coarse = propagate_oracle(&a, &b, &psi0, &control, t, steps)?;
            let fine = propagate_oracle(&a, &b, &psi0, &control, t, 2 * steps)?;
            let q = (&coarse - &fine).norm();
            ("oracle", coarse, None, 0.0, q)
        }
        Method::Picard => {
            let u_l1 = control.l1_norm_until(t);
            let bounds = prop.bounds();
            let n = choose_truncation(
                eps,
                t,
                u_l1,
                psi0.norm(),
                &bounds,
                prop.b_norm(),
                cfg.max_order,
            )?;
            // k sweeps reproduce the partial sum over orders 0..=k.
            let k = n.saturating_sub(1).max(1);
            let coarse = picard_solution(&a, &b, &psi0, &control, t, k, steps)?;
            let fine = picard_solution(&a, &b, &psi0, &control, t, k, 2 * steps)?;
            let series = psi0.norm() * bounds.growth(t) * series_tail(prop.b_norm() * u_l1, k + 1);
            let q = (&coarse - &fine).norm();
            ("picard", coarse, Some(k + 1), series, q)
        }
    };
    Ok(PropagateRecord {
        method: name,
        t,
        eps,
        state: vector_entries(&state),
        truncation_order: order,
        series_error_bound: series,
        quadrature_error_estimate: quad,
        apriori_bound,
        elapsed: Some(started.elapsed().as_secs_f64()),
    })
}

fn terms<T: Field>(
    spec: &ProblemSpec,
    t: f64,
    max_order: usize,
    cfg: &DysonConfig,
) -> Result<Vec<(usize, f64, f64)>, CliError> {
    let Instance {
        a,
        b,
        psi0,
        control,
    } = spec.instance::<T>()?;
    let w = w_terms(&a, &b, &psi0, &control, t, max_order, cfg)?;
    let bounds = semigroup_bounds(&a);
    let b_norm = operator_norm(&b);
    let u_l1 = control.l1_norm_until(t);
    Ok(w.iter()
        .enumerate()
        .map(|(p, wp)| {
            (
                p,
                wp.norm(),
                psi0.norm() * tail_bound(p, t, u_l1, &bounds, b_norm),
            )
        })
        .collect())
}

#[derive(Serialize)]
struct NetSummary {
    n_centers: usize,
    radius: f64,
    #[serde(rename = "N_eps")]
    n_eps: usize,
    in_sample_coverage: bool,
    layer_sizes: Vec<usize>,
    samples: usize,
    dim: usize,
}

fn net<T: Field>(
    spec: &ProblemSpec,
    params: &NetParams,
    cfg: &DysonConfig,
    out: &Path,
) -> Result<NetSummary, CliError> {
    let Instance { a, b, psi0, .. } = spec.instance::<T>()?;
    let result = attainable_net(&a, &b, &psi0, params, cfg)?;
    if !result.in_sample_coverage {
        return Err(CliError::Other(
            "net misses an in-sample attainable point".into(),
        ));
    }
    netfile::write_net(out, &result.net, spec.field, spec.embedded_dim())?;
    Ok(NetSummary {
        n_centers: result.net.len(),
        radius: result.net.radius,
        n_eps: result.truncation_order,
        in_sample_coverage: result.in_sample_coverage,
        layer_sizes: result.layer_sizes,
        samples: result.samples.len(),
        dim: spec.embedded_dim(),
    })
}

/// Attainable samples with the Dyson sum truncated for the finest radius.
#[allow(clippy::too_many_arguments)]
fn cover_sample<T: Field>(
    spec: &ProblemSpec,
    horizon: f64,
    l1_budget: f64,
    eps: &[f64],
    family_size: usize,
    seed: u64,
    n_times: usize,
    cfg: &DysonConfig,
) -> Result<Vec<DVector<f64>>, CliError> {
    let Instance { a, b, psi0, .. } = spec.instance::<T>()?;
    let finest = eps.iter().copied().fold(f64::INFINITY, f64::min);
    if !(finest > 0.0) {
        return Err(CliError::Input("every eps must be positive".into()));
    }
    let bounds = semigroup_bounds(&a);
    let worst_t = if bounds.omega >= 0.0 { horizon } else { 0.0 };
    let order = choose_truncation(
        finest,
        worst_t,
        l1_budget,
        psi0.norm(),
        &bounds,
        operator_norm(&b),
        cfg.max_order,
    )?;
    let controls = control_family(horizon, l1_budget, 4, family_size, seed)?;
    let times = time_grid(horizon, n_times);
    if order == 0 {
        return Ok(vec![embed(&DVector::<T>::zeros(psi0.len()))]);
    }
    Ok(sample_attainable(
        &a, &b, &psi0, &times, &controls, order, cfg,
    )?)
}

fn unit_sphere_targets(dim: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| loop {
            let v = DVector::<f64>::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
            let n = v.norm();
            if n > 0.0 {
                break v / n;
            }
        })
        .collect()
}
