//! `cbm`: optimal council weights from a JSON model file.
//!
//! Exit codes: 0 success, 1 bad input, 2 degenerate model, 3 numerical
//! failure.

mod output;
mod sweep;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cbm_core::asymptotics::{hetero_solve, solve_weights, summary, TIGHT_TOL};
use cbm_core::finite_n::{exact_moments, finite_weights, mc_moments, unanimity_probability};
use cbm_core::nonneg::{
    check_fosd_sufficient, check_ribbon, contraction_sign, contraction_x0, critical_c0,
    ram_quantities, t_functional,
};
use cbm_core::{
    CbmError, CbmSpec, ContractionFamily, ContractionReport, ErrorKind, FiniteMoments,
    FiniteWeights, HeteroSolution, ModelConfig, QuadratureRule, RibbonReport, TightSolution,
    WeightReport, WeightSolution,
};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use output::{Cell, Format, Report, Table};

#[derive(Parser)]
#[command(
    name = "cbm",
    version,
    about = "Optimal council weights under collective bias"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Gauss-Legendre nodes per interval
    #[arg(long, global = true, env = "CBM_QUAD_ORDER", default_value_t = 64)]
    quad_order: usize,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Write the result here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Large-population optimal weights
    Weights {
        #[arg(long)]
        config: PathBuf,
    },
    /// Finite-population moments, weights and deficit
    Finite {
        #[arg(long)]
        config: PathBuf,
        /// Group sizes; defaults to `sizes` in the config
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<u64>>,
        #[arg(long, value_enum, default_value_t = MethodArg::Exact)]
        method: MethodArg,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Monte Carlo probability that all council votes agree
    Unanimity {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<u64>>,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sign analysis of the constant weight term
    Nonneg {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        check: Check,
        /// Lower ribbon constant `c` with `c rho <= mu`
        #[arg(long)]
        c_low: Option<f64>,
        /// Upper ribbon constant `C` with `mu <= C rho`
        #[arg(long)]
        c_high: Option<f64>,
        /// Contraction family exponent
        #[arg(long)]
        t: Option<f64>,
        /// Contraction factor in (0, 1)
        #[arg(long)]
        c: Option<f64>,
    },
    /// Table of results while one parameter moves
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated config paths; prefix `-` to set the negated value
        #[arg(long)]
        param: String,
        #[arg(long, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, allow_hyphen_values = true)]
        to: f64,
        #[arg(long, default_value_t = 11)]
        steps: usize,
        #[arg(long, value_enum, default_value_t = Emit::Weights)]
        emit: Emit,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Exact,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Check {
    Ram,
    Fosd,
    Ribbon,
    Tfunc,
    Contraction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    Weights,
    A,
    Deficit,
    C0,
}

#[derive(Debug)]
enum Failure {
    Model(CbmError),
    At {
        param: String,
        value: f64,
        err: CbmError,
    },
    Io(String),
}

impl From<CbmError> for Failure {
    fn from(e: CbmError) -> Self {
        Failure::Model(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        let kind = match self {
            Failure::Model(e) | Failure::At { err: e, .. } => e.kind(),
            Failure::Io(_) => ErrorKind::Input,
        };
        match kind {
            ErrorKind::Input => 1,
            ErrorKind::Degenerate => 2,
            ErrorKind::Numerical => 3,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Model(e) => e.to_string(),
            Failure::At { param, value, err } => format!("at {param} = {value}: {err}"),
            Failure::Io(m) => m.clone(),
        }
    }
}

type Outcome<T> = Result<T, Failure>;

fn read_json(path: &Path) -> Outcome<Value> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        Failure::Model(CbmError::Config {
            field: "config".into(),
            message: e.to_string(),
        })
    })
}

fn model(value: Value) -> Outcome<ModelConfig> {
    serde_json::from_value(value).map_err(|e| {
        Failure::Model(CbmError::Config {
            field: "config".into(),
            message: e.to_string(),
        })
    })
}

fn load(path: &Path) -> Outcome<ModelConfig> {
    model(read_json(path)?)
}

fn require<T>(x: Option<T>, field: &str, why: &str) -> Outcome<T> {
    x.ok_or_else(|| {
        Failure::Model(CbmError::Config {
            field: field.into(),
            message: format!("required {why}"),
        })
    })
}

fn to_json<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("results serialise")
}

/// Spec whose shares come from `sizes` when given.
fn spec_for_sizes(mut cfg: ModelConfig, sizes: Option<Vec<u64>>) -> Outcome<(CbmSpec, Vec<u64>)> {
    let sizes = require(
        sizes.or_else(|| cfg.sizes.clone()),
        "sizes",
        "(flag or config)",
    )?;
    cfg.alpha = None;
    cfg.groups = None;
    cfg.sizes = Some(sizes.clone());
    Ok((cfg.spec()?, sizes))
}

#[derive(Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
enum WeightsOutput {
    Regular(WeightSolution),
    Tight(TightSolution),
    Hetero(HeteroSolution),
}

impl WeightsOutput {
    fn solve(spec: &CbmSpec, rule: &QuadratureRule) -> Outcome<Self> {
        if spec.is_shared() {
            Ok(match solve_weights(spec, rule)? {
                WeightReport::Regular(w) => WeightsOutput::Regular(w),
                WeightReport::Tight(t) => WeightsOutput::Tight(t),
            })
        } else {
            Ok(WeightsOutput::Hetero(hetero_solve(spec, rule)?))
        }
    }

    fn mode(&self) -> &'static str {
        match self {
            WeightsOutput::Regular(_) => "regular",
            WeightsOutput::Tight(_) => "tight",
            WeightsOutput::Hetero(_) => "hetero",
        }
    }

    /// `(a, C1, C2, sum_w, delta_inf, weights, normalised)`
    #[allow(clippy::type_complexity)]
    fn columns(
        &self,
    ) -> (
        Option<f64>,
        Option<f64>,
        Option<f64>,
        f64,
        f64,
        &[f64],
        &[f64],
    ) {
        match self {
            WeightsOutput::Regular(w) => (
                Some(w.a),
                Some(w.c1),
                Some(w.c2),
                w.sum_w,
                w.delta_inf,
                &w.weights,
                &w.normalised,
            ),
            WeightsOutput::Tight(t) => (
                Some(t.a),
                None,
                None,
                t.sum_w,
                t.delta_inf,
                &t.weights,
                &t.normalised,
            ),
            WeightsOutput::Hetero(h) => (
                None,
                None,
                None,
                h.sum_w,
                h.delta_inf,
                &h.weights,
                &h.normalised,
            ),
        }
    }
}

fn weights(path: &Path, rule: &QuadratureRule) -> Outcome<Report> {
    let spec = load(path)?.spec()?;
    let out = WeightsOutput::solve(&spec, rule)?;
    let mut table = Table::new(&[
        "group",
        "alpha",
        "weight",
        "normalised",
        "mode",
        "a",
        "C1",
        "C2",
        "sum_w",
        "delta_inf",
    ]);
    let (a, c1, c2, sum_w, delta, w, wbar) = out.columns();
    for (l, alpha) in spec.alpha().iter().enumerate() {
        table.push(vec![
            Cell::Int(l as i64),
            (*alpha).into(),
            w[l].into(),
            wbar[l].into(),
            out.mode().into(),
            a.into(),
            c1.into(),
            c2.into(),
            sum_w.into(),
            delta.into(),
        ]);
    }
    Ok(Report {
        json: to_json(&out),
        table,
    })
}

#[derive(Serialize)]
struct FiniteOutput {
    moments: FiniteMoments,
    weights: FiniteWeights,
}

fn finite(
    path: &Path,
    sizes: Option<Vec<u64>>,
    method: MethodArg,
    samples: u64,
    seed: u64,
    rule: &QuadratureRule,
) -> Outcome<Report> {
    let (spec, sizes) = spec_for_sizes(load(path)?, sizes)?;
    let moments = match method {
        MethodArg::Exact => exact_moments(&spec, &sizes, rule)?,
        MethodArg::Mc => mc_moments(&spec, &sizes, samples, seed)?,
    };
    let weights = finite_weights(&moments)?;
    let mut table = Table::new(&["quantity", "i", "j", "value", "stderr"]);
    let idx = |i: usize| Cell::Int(i as i64);
    for (i, row) in moments.a.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            let se = moments.stderr_a.as_ref().map(|s| s[i][j]);
            table.push(vec!["A".into(), idx(i), idx(j), (*x).into(), se.into()]);
        }
    }
    for (i, x) in moments.b.iter().enumerate() {
        let se = moments.stderr_b.as_ref().map(|s| s[i]);
        table.push(vec![
            "b".into(),
            idx(i),
            Cell::Empty,
            (*x).into(),
            se.into(),
        ]);
    }
    table.push(vec![
        "s".into(),
        Cell::Empty,
        Cell::Empty,
        moments.s.into(),
        moments.stderr_s.into(),
    ]);
    for (i, x) in weights.weights.iter().enumerate() {
        table.push(vec![
            "w".into(),
            idx(i),
            Cell::Empty,
            (*x).into(),
            Cell::Empty,
        ]);
    }
    for (i, x) in weights.normalised.iter().enumerate() {
        table.push(vec![
            "normalised".into(),
            idx(i),
            Cell::Empty,
            (*x).into(),
            Cell::Empty,
        ]);
    }
    table.push(vec![
        "sum_w".into(),
        Cell::Empty,
        Cell::Empty,
        weights.sum_w.into(),
        Cell::Empty,
    ]);
    table.push(vec![
        "delta_n".into(),
        Cell::Empty,
        Cell::Empty,
        weights.delta_n.into(),
        Cell::Empty,
    ]);
    Ok(Report {
        json: to_json(&FiniteOutput { moments, weights }),
        table,
    })
}

#[derive(Serialize)]
struct UnanimityOutput {
    sizes: Vec<u64>,
    probability: f64,
    stderr: f64,
    samples: u64,
    seed: u64,
}

fn unanimity(path: &Path, sizes: Option<Vec<u64>>, samples: u64, seed: u64) -> Outcome<Report> {
    let (spec, sizes) = spec_for_sizes(load(path)?, sizes)?;
    let e = unanimity_probability(&spec, &sizes, samples, seed)?;
    let out = UnanimityOutput {
        sizes,
        probability: e.value,
        stderr: e.stderr,
        samples: e.samples,
        seed: e.seed,
    };
    let mut table = Table::new(&["probability", "stderr", "samples", "seed"]);
    table.push(vec![
        out.probability.into(),
        out.stderr.into(),
        Cell::Int(out.samples as i64),
        Cell::Int(out.seed as i64),
    ]);
    Ok(Report {
        json: to_json(&out),
        table,
    })
}

#[derive(Serialize)]
struct RibbonOutput {
    c_low: f64,
    c_high: f64,
    a: f64,
    r_minus_am: f64,
    #[serde(flatten)]
    report: RibbonReport,
}

#[derive(Serialize)]
struct TOutput {
    t_functional: f64,
    bound: f64,
    /// `r >= a m` for `rho = U[-1/2, 1/2]`.
    nonneg_for_uniform_rho: bool,
}

#[derive(Serialize)]
struct ContractionOutput {
    #[serde(flatten)]
    report: ContractionReport,
    x0: Option<f64>,
    c0: Option<f64>,
}

struct NonnegArgs {
    config: Option<PathBuf>,
    check: Check,
    c_low: Option<f64>,
    c_high: Option<f64>,
    t: Option<f64>,
    c: Option<f64>,
}

fn nonneg(args: NonnegArgs, rule: &QuadratureRule) -> Outcome<Report> {
    let cfg = || -> Outcome<ModelConfig> {
        load(&require(args.config.clone(), "config", "for this check")?)
    };
    let json = match args.check {
        Check::Ram => {
            let cfg = cfg()?;
            to_json(&ram_quantities(&cfg.mu()?, &cfg.rho()?, rule)?)
        }
        Check::Fosd => {
            let cfg = cfg()?;
            to_json(&check_fosd_sufficient(&cfg.mu()?, &cfg.rho()?, rule)?)
        }
        Check::Ribbon => {
            let cfg = cfg()?;
            let c_low = require(args.c_low, "c_low", "for the ribbon check")?;
            let c_high = require(args.c_high, "c_high", "for the ribbon check")?;
            let ram = ram_quantities(&cfg.mu()?, &cfg.rho()?, rule)?;
            let report = check_ribbon(c_low, c_high, ram.a)?;
            to_json(&RibbonOutput {
                c_low,
                c_high,
                a: ram.a,
                r_minus_am: ram.r_minus_am,
                report,
            })
        }
        Check::Tfunc => {
            let t = t_functional(&cfg()?.mu()?, rule)?;
            to_json(&TOutput {
                t_functional: t,
                bound: 0.25,
                nonneg_for_uniform_rho: t <= 0.25,
            })
        }
        Check::Contraction => {
            let t = require(args.t, "t", "for the contraction check")?;
            let c = require(args.c, "c", "for the contraction check")?;
            let report = contraction_sign(&ContractionFamily::new(t, c)?);
            let below_one = t < 1.0;
            let c0 = if below_one {
                Some(critical_c0(t, 1e-12)?)
            } else {
                None
            };
            let x0 = below_one.then(|| contraction_x0(t));
            to_json(&ContractionOutput { report, x0, c0 })
        }
    };
    let table = Table::from_object(&json);
    Ok(Report { json, table })
}

struct SweepArgs {
    config: Option<PathBuf>,
    param: String,
    from: f64,
    to: f64,
    steps: usize,
    emit: Emit,
}

fn sweep_c0(args: &SweepArgs) -> Outcome<Table> {
    if args.param.trim() != "t" {
        return Err(CbmError::Config {
            field: "param".into(),
            message: "--emit c0 sweeps the exponent t".into(),
        }
        .into());
    }
    let mut table = Table::new(&["t", "c0", "x0"]);
    for t in sweep::grid(args.from, args.to, args.steps)? {
        let c0 = critical_c0(t, 1e-12).map_err(|err| Failure::At {
            param: "t".into(),
            value: t,
            err,
        })?;
        table.push(vec![t.into(), c0.into(), contraction_x0(t).into()]);
    }
    Ok(table)
}

fn sweep_model(args: &SweepArgs, rule: &QuadratureRule) -> Outcome<Table> {
    let base = read_json(&require(args.config.clone(), "config", "for this sweep")?)?;
    let targets = sweep::parse_targets(&args.param)?;
    let label = targets
        .iter()
        .map(|t| t.text())
        .collect::<Vec<_>>()
        .join(",");
    let mut table: Option<Table> = None;
    for v in sweep::grid(args.from, args.to, args.steps)? {
        let at = |err: CbmError| Failure::At {
            param: label.clone(),
            value: v,
            err,
        };
        let mut cfg = base.clone();
        for t in &targets {
            t.apply(&mut cfg, v)?;
        }
        let spec = model(cfg)?.spec().map_err(at)?;
        let m = spec.groups();
        let table = table.get_or_insert_with(|| {
            let mut h: Vec<String> = vec![label.clone()];
            match args.emit {
                Emit::Weights => {
                    h.extend(["mode", "a", "C1", "C2", "sum_w", "delta_inf"].map(String::from));
                    h.extend((1..=m).map(|l| format!("w{l}")));
                    h.extend((1..=m).map(|l| format!("normalised{l}")));
                }
                Emit::A => h.extend(["a", "one_minus_a", "tight"].map(String::from)),
                Emit::Deficit => h.extend(["mode", "s", "delta_inf"].map(String::from)),
                Emit::C0 => unreachable!(),
            }
            Table {
                header: h,
                rows: Vec::new(),
            }
        });
        let mut row: Vec<Cell> = vec![v.into()];
        match args.emit {
            Emit::Weights => {
                let out = WeightsOutput::solve(&spec, rule).map_err(|f| match f {
                    Failure::Model(e) => at(e),
                    other => other,
                })?;
                let (a, c1, c2, sum_w, delta, w, wbar) = out.columns();
                row.extend([
                    out.mode().into(),
                    a.into(),
                    c1.into(),
                    c2.into(),
                    sum_w.into(),
                    delta.into(),
                ]);
                row.extend(w.iter().map(|&x| Cell::from(x)));
                row.extend(wbar.iter().map(|&x| Cell::from(x)));
            }
            Emit::A => {
                if !spec.is_shared() {
                    return Err(at(CbmError::Unsupported(
                        "--emit a needs a shared kernel".into(),
                    )));
                }
                let s = summary(&spec, rule).map_err(at)?;
                row.extend([
                    s.a.into(),
                    (1.0 - s.a).into(),
                    (1.0 - s.a < TIGHT_TOL).into(),
                ]);
            }
            Emit::Deficit => {
                let out = WeightsOutput::solve(&spec, rule).map_err(|f| match f {
                    Failure::Model(e) => at(e),
                    other => other,
                })?;
                let s = match &out {
                    WeightsOutput::Hetero(h) => h.s,
                    _ => summary(&spec, rule).map_err(at)?.s,
                };
                row.extend([out.mode().into(), s.into(), out.columns().4.into()]);
            }
            Emit::C0 => unreachable!(),
        }
        table.rows.push(row);
    }
    Ok(table.unwrap_or_default())
}

fn run(cli: Cli) -> Outcome<()> {
    let rule = QuadratureRule::new(cli.quad_order)?;
    let report = match cli.command {
        Command::Weights { config } => weights(&config, &rule)?,
        Command::Finite {
            config,
            sizes,
            method,
            samples,
            seed,
        } => finite(&config, sizes, method, samples, seed, &rule)?,
        Command::Unanimity {
            config,
            sizes,
            samples,
            seed,
        } => unanimity(&config, sizes, samples, seed)?,
        Command::Nonneg {
            config,
            check,
            c_low,
            c_high,
            t,
            c,
        } => nonneg(
            NonnegArgs {
                config,
                check,
                c_low,
                c_high,
                t,
                c,
            },
            &rule,
        )?,
        Command::Sweep {
            config,
            param,
            from,
            to,
            steps,
            emit,
        } => {
            let args = SweepArgs {
                config,
                param,
                from,
                to,
                steps,
                emit,
            };
            let table = if emit == Emit::C0 {
                sweep_c0(&args)?
            } else {
                sweep_model(&args, &rule)?
            };
            Report {
                json: table.to_json(),
                table,
            }
        }
    };
    report
        .write(cli.format, cli.out.as_deref())
        .map_err(|e| Failure::Io(format!("writing output: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}
