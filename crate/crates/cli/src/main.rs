//! `maplab` command-line front end.
//!
//! Exit codes: 0 when the verdict passes, 1 when it fails, 2 on usage,
//! configuration or model errors (reported as one JSON line on stderr).

mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use maplab::fixtures::{self, Fixture};
use maplab::fourier::{lambda_branch, symmetric_grid};
use maplab::io::{self, ModelSpec};
use maplab::limit_checks::{self, Bump, EdgeworthOptions};
use maplab::mestim::{self, ProblemFile};
use maplab::model::{ct_sample_skeleton, detect_lattice, CtMapSpec, MapSpec};
use maplab::montecarlo::{self, Horizon};
use maplab::{chain, Error, Result};

use report::{csv_cell, Report};

#[derive(Parser, Debug)]
#[command(name = "maplab", version, about = "Spectral analysis and limit-theorem checks for Markov additive processes")]
struct Cli {
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, global = true, env = "MAPLAB_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dominant eigenvalue branch, its derivatives at 0, and lattice status.
    Analyze(AnalyzeArgs),
    /// CSV of the eigenvalue branch on a symmetric grid.
    ScanLambda(ScanArgs),
    /// Terminal values of simulated paths as raw little-endian f64.
    Simulate(SimulateArgs),
    /// Kolmogorov distance of the normalized sum to the Gaussian law.
    VerifyClt(ListArgs),
    /// Growth of sqrt(n) times the Kolmogorov distance.
    VerifyBe(ListArgs),
    /// Residual after the one-term Edgeworth correction.
    VerifyEdgeworth(EdgeworthArgs),
    /// Local limit theorem with triangular test functions.
    VerifyLlt(LltArgs),
    /// CLT and Berry-Esseen at real horizons for a continuous-time model.
    VerifyCt(CtArgs),
    /// L2 mixing bounds and the empirical correlation check.
    MixingBound(MixingArgs),
    /// Berry-Esseen check of an M-estimator over a parameter grid.
    Mestimate(MestimArgs),
    /// Built-in models.
    Fixtures {
        #[command(subcommand)]
        action: FixturesAction,
    },
}

#[derive(Subcommand, Debug)]
enum FixturesAction {
    /// Print registry names, one per line.
    List,
    /// Print a fixture as a model or problem file.
    Show { name: String },
}

#[derive(Args, Debug, Serialize)]
struct Input {
    /// Built-in fixture name.
    #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
    fixture: Option<String>,
    /// Model file (JSON).
    #[arg(long)]
    spec: Option<PathBuf>,
}

/// Output paths; kept out of the serialized configuration so that a report
/// does not depend on where it is written.
#[derive(Args, Debug)]
struct Output {
    /// JSON report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV of per-record values.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct AnalyzeArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long, default_value_t = 0.5)]
    zmax: f64,
    /// Grid points on each side of 0.
    #[arg(long, default_value_t = 25)]
    points: usize,
    #[command(flatten)]
    #[serde(skip)]
    output: Output,
}

#[derive(Args, Debug, Serialize)]
struct ScanArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long, default_value_t = 0.5)]
    zmax: f64,
    #[arg(long, default_value_t = 50)]
    points: usize,
    /// CSV path; stdout when absent.
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    #[command(flatten)]
    input: Input,
    /// Steps (discrete-time models).
    #[arg(long, conflicts_with = "t")]
    n: Option<usize>,
    /// Time horizon (continuous-time models).
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    paths: usize,
    #[arg(long)]
    seed: u64,
    /// Initial law as a JSON array; the stationary law when absent.
    #[arg(long)]
    init: Option<String>,
    /// Binary output; the sidecar goes to `<out>.json`.
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct ListArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long, value_delimiter = ',', required = true)]
    n_list: Vec<usize>,
    #[arg(long)]
    paths: usize,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    output: Output,
}

#[derive(Args, Debug, Serialize)]
struct EdgeworthArgs {
    #[command(flatten)]
    list: ListArgs,
    /// Initial law as a JSON array; adds the bias term.
    #[arg(long)]
    init: Option<String>,
    /// Also compute exact residuals by Fourier inversion.
    #[arg(long)]
    exact: bool,
    /// Refuse lattice models.
    #[arg(long)]
    require_nonlattice: bool,
}

#[derive(Args, Debug, Serialize)]
struct LltArgs {
    #[command(flatten)]
    list: ListArgs,
    /// Test function `center:half_width`; repeatable.
    #[arg(long = "bump", value_parser = parse_bump, default_value = "0:1")]
    bumps: Vec<Bump>,
    /// Run lattice models as negative controls instead of refusing them.
    #[arg(long)]
    allow_lattice: bool,
}

#[derive(Args, Debug, Serialize)]
struct CtArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long, value_delimiter = ',', required = true)]
    t_list: Vec<f64>,
    #[arg(long)]
    paths: usize,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    output: Output,
}

#[derive(Args, Debug, Serialize)]
struct MixingArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8,9,10")]
    lags: Vec<usize>,
    #[arg(long)]
    paths: usize,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    output: Output,
}

#[derive(Args, Debug, Serialize)]
struct MestimArgs {
    /// Problem file (JSON contrast family plus kernel grid).
    #[arg(long, conflicts_with = "fixture", required_unless_present = "fixture")]
    problem: Option<PathBuf>,
    /// Built-in problem fixture.
    #[arg(long)]
    fixture: Option<String>,
    #[arg(long, value_delimiter = ',', required = true)]
    n_list: Vec<usize>,
    #[arg(long)]
    reps: usize,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    output: Output,
}

fn parse_bump(s: &str) -> std::result::Result<Bump, String> {
    let (c, w) = s.split_once(':').ok_or("expected center:half_width")?;
    let center: f64 = c.trim().parse().map_err(|e| format!("center: {e}"))?;
    let half_width: f64 = w.trim().parse().map_err(|e| format!("half_width: {e}"))?;
    if half_width.is_nan() || half_width <= 0.0 || !center.is_finite() {
        return Err("half_width must be positive and center finite".into());
    }
    Ok(Bump { center, half_width })
}

fn parse_init(text: &Option<String>) -> Result<Option<Vec<f64>>> {
    text.as_deref().map(serde_json::from_str::<Vec<f64>>).transpose().map_err(Error::from)
}

fn load_input(input: &Input) -> Result<ModelSpec> {
    match (&input.fixture, &input.spec) {
        (Some(name), None) => match fixtures::fixture(name)? {
            Fixture::Discrete(s) => Ok(ModelSpec::Discrete(s)),
            Fixture::Continuous(c) => Ok(ModelSpec::Continuous(c)),
            Fixture::Problem(_) => Err(Error::InvalidParameter(format!("`{name}` is an estimation problem"))),
        },
        (None, Some(path)) => io::load_model(path),
        _ => Err(Error::InvalidParameter("give exactly one of --fixture and --spec".into())),
    }
}

/// Discrete-time view: continuous-time models become their time-one skeleton.
fn discrete(model: &ModelSpec) -> Result<MapSpec> {
    match model {
        ModelSpec::Discrete(s) => Ok(s.clone()),
        ModelSpec::Continuous(c) => ct_sample_skeleton(c),
    }
}

fn continuous(model: &ModelSpec) -> Result<&CtMapSpec> {
    match model {
        ModelSpec::Continuous(c) => Ok(c),
        ModelSpec::Discrete(_) => Err(Error::InvalidParameter("a continuous-time model is required".into())),
    }
}

fn emit(report: &Report, output: &Output) -> Result<bool> {
    report.write(output.out.as_deref(), output.csv.as_deref())?;
    Ok(report.verdict)
}

fn run(command: Command) -> Result<bool> {
    match command {
        Command::Fixtures { action } => fixtures_cmd(action),
        Command::Analyze(a) => {
            let model = load_input(&a.input)?;
            let spec = discrete(&model)?;
            let summary = lambda_branch(&spec, &symmetric_grid(a.zmax, a.points))?;
            let lattice = detect_lattice(&spec);
            let body = serde_json::json!({ "spectral_summary": summary, "lattice": lattice });
            let report = Report::new("analyze", true, model.content_hash(), &[], &a, Vec::new(), body)?;
            emit(&report, &a.output)
        }
        Command::ScanLambda(a) => {
            let spec = discrete(&load_input(&a.input)?)?;
            let summary = lambda_branch(&spec, &symmetric_grid(a.zmax, a.points))?;
            let rows: Vec<Vec<f64>> = summary
                .branch
                .iter()
                .map(|b| vec![b.zeta[0], b.lambda_re, b.lambda_im, b.modulus, b.kappa, b.separation])
                .collect();
            let text = io::csv_string(&["zeta", "re_lambda", "im_lambda", "abs_lambda", "kappa", "separation"], &rows);
            match &a.out {
                Some(p) => io::write_atomic(p, text.as_bytes())?,
                None => print!("{text}"),
            }
            Ok(true)
        }
        Command::Simulate(a) => simulate(a),
        Command::VerifyClt(a) => {
            let model = load_input(&a.input)?;
            let r = limit_checks::clt_check(&discrete(&model)?, &a.n_list, a.paths, a.seed)?;
            let report = Report::from_value("verify-clt", model.content_hash(), &[a.seed], &a, &r, comparison_csv(&r.records))?;
            emit(&report, &a.output)
        }
        Command::VerifyBe(a) => {
            let model = load_input(&a.input)?;
            let r = limit_checks::berry_esseen_check(&discrete(&model)?, &a.n_list, a.paths, a.seed)?;
            let report = Report::from_value("verify-be", model.content_hash(), &[a.seed], &a, &r, comparison_csv(&r.records))?;
            emit(&report, &a.output)
        }
        Command::VerifyEdgeworth(a) => {
            let l = &a.list;
            let model = load_input(&l.input)?;
            let opts = EdgeworthOptions { mu: parse_init(&a.init)?, require_nonlattice: a.require_nonlattice, exact: a.exact };
            let r = limit_checks::edgeworth_check(&discrete(&model)?, &l.n_list, l.paths, l.seed, &opts)?;
            let csv = report::Table::new(
                &["n", "sample_size", "se", "kolmogorov", "edgeworth_no_bias", "edgeworth_residual", "exact_kolmogorov", "exact_edgeworth"],
                r.records
                    .iter()
                    .map(|x| {
                        vec![
                            x.n as f64,
                            x.sample_size as f64,
                            x.se,
                            x.kolmogorov,
                            x.edgeworth_no_bias,
                            x.edgeworth_residual,
                            csv_cell(x.exact_kolmogorov),
                            csv_cell(x.exact_edgeworth),
                        ]
                    })
                    .collect(),
            );
            let report = Report::from_value("verify-edgeworth", model.content_hash(), &[l.seed], &a, &r, Some(csv))?;
            emit(&report, &l.output)
        }
        Command::VerifyLlt(a) => {
            let l = &a.list;
            let model = load_input(&l.input)?;
            let records = limit_checks::llt_check(&discrete(&model)?, &l.n_list, &a.bumps, l.paths, l.seed, a.allow_lattice)?;
            let verdict = records.iter().all(|r| r.covered);
            let csv = report::Table::new(
                &["n", "center", "half_width", "estimate", "target", "ratio", "ratio_se", "covered"],
                records
                    .iter()
                    .map(|r| {
                        vec![
                            r.n as f64,
                            r.bump.center,
                            r.bump.half_width,
                            r.estimate,
                            r.target,
                            r.ratio,
                            r.ratio_se,
                            r.covered as u8 as f64,
                        ]
                    })
                    .collect(),
            );
            let records = records.iter().map(serde_json::to_value).collect::<serde_json::Result<Vec<_>>>()?;
            let report = Report::new("verify-llt", verdict, model.content_hash(), &[l.seed], &a, records, serde_json::json!({}))?
                .with_csv(csv);
            emit(&report, &l.output)
        }
        Command::VerifyCt(a) => {
            let model = load_input(&a.input)?;
            let r = limit_checks::ct_limit_check(continuous(&model)?, &a.t_list, a.paths, a.seed)?;
            let csv = report::Table::new(
                &["t", "sample_size", "sigma_used", "kolmogorov", "se", "be_constant", "fractional_second_moment", "fractional_se"],
                r.records
                    .iter()
                    .map(|x| {
                        let c = &x.comparison;
                        vec![c.n, c.sample_size as f64, c.sigma_used, c.kolmogorov, c.se, c.be_constant, x.fractional_second_moment, x.fractional_se]
                    })
                    .collect(),
            );
            let report = Report::from_value("verify-ct", model.content_hash(), &[a.seed], &a, &r, Some(csv))?;
            emit(&report, &a.output)
        }
        Command::MixingBound(a) => {
            let model = load_input(&a.input)?;
            let spec = discrete(&model)?;
            let t_max = a.lags.iter().copied().max().unwrap_or(1).max(2);
            let table = chain::spectral_gap_report(spec.kernel(), t_max)?;
            let records = limit_checks::rho_mixing_check(&spec, &a.lags, a.paths, a.seed)?;
            let verdict = records.iter().all(|r| r.ok);
            let csv = report::Table::new(
                &["lag", "bound", "empirical", "se", "ok"],
                records.iter().map(|r| vec![r.lag as f64, r.bound, csv_cell(r.empirical), r.se, r.ok as u8 as f64]).collect(),
            );
            let records = records.iter().map(serde_json::to_value).collect::<serde_json::Result<Vec<_>>>()?;
            let body = serde_json::json!({ "mixing_bounds": table });
            let report = Report::new("mixing-bound", verdict, model.content_hash(), &[a.seed], &a, records, body)?.with_csv(csv);
            emit(&report, &a.output)
        }
        Command::Mestimate(a) => {
            let file = match (&a.problem, &a.fixture) {
                (Some(path), None) => serde_json::from_str::<ProblemFile>(&std::fs::read_to_string(path)?)?,
                (None, Some(name)) => fixtures::problem_fixture(name)?,
                _ => return Err(Error::InvalidParameter("give exactly one of --problem and --fixture".into())),
            };
            let problem = file.build()?;
            let r = mestim::estimator_be_check(&problem, &a.n_list, a.reps, a.seed)?;
            let csv = report::Table::new(
                &["theta", "n", "replications", "excluded", "gamma_hat", "kolmogorov", "se", "be_constant"],
                r.records
                    .iter()
                    .map(|x| {
                        vec![
                            x.theta as f64,
                            x.n as f64,
                            x.replications as f64,
                            x.excluded as f64,
                            x.gamma_hat,
                            x.kolmogorov,
                            x.se,
                            x.be_constant,
                        ]
                    })
                    .collect(),
            );
            let mut report = Report::from_value("mestimate", io::hash_json(&file), &[a.seed], &a, &r, Some(csv))?;
            report.insert("thetas", serde_json::to_value(&problem.thetas)?);
            report.insert("certificates", serde_json::to_value(&problem.certificates)?);
            emit(&report, &a.output)
        }
    }
}

fn comparison_csv(records: &[limit_checks::GaussianComparison]) -> Option<report::Table> {
    Some(report::Table::new(
        &["n", "sample_size", "sigma_used", "kolmogorov", "se", "be_constant"],
        records.iter().map(|r| vec![r.n, r.sample_size as f64, r.sigma_used, r.kolmogorov, r.se, r.be_constant]).collect(),
    ))
}

fn fixtures_cmd(action: FixturesAction) -> Result<bool> {
    match action {
        FixturesAction::List => {
            for name in fixtures::NAMES {
                println!("{name}");
            }
        }
        FixturesAction::Show { name } => {
            let value = match fixtures::fixture(&name)? {
                Fixture::Discrete(s) => serde_json::to_value(io::map_spec_file(&s))?,
                Fixture::Continuous(c) => serde_json::to_value(io::CtSpecFile::from_spec(&c))?,
                Fixture::Problem(p) => serde_json::to_value(p)?,
            };
            println!("{}", serde_json::to_string_pretty(&value)?);
        }
    }
    Ok(true)
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn simulate(a: SimulateArgs) -> Result<bool> {
    let model = load_input(&a.input)?;
    let init = parse_init(&a.init)?;
    let batch = match (&model, a.n, a.t) {
        (ModelSpec::Discrete(s), Some(n), None) => montecarlo::simulate_discrete(s, n, a.paths, a.seed, init.as_deref())?,
        (ModelSpec::Continuous(c), None, Some(t)) => montecarlo::simulate_ct(c, t, a.paths, a.seed, init.as_deref())?,
        (ModelSpec::Discrete(_), _, _) => return Err(Error::InvalidParameter("discrete-time models take --n".into())),
        (ModelSpec::Continuous(_), _, _) => return Err(Error::InvalidParameter("continuous-time models take --t".into())),
    };
    let sidecar = serde_json::json!({
        "command": "simulate",
        "spec_hash": model.content_hash(),
        "config": &a,
        "horizon": batch.horizon,
        "n_paths": batch.n_paths,
        "d": batch.d,
        "seed": batch.seed,
        "data": {
            "file": a.out.file_name().map(|f| f.to_string_lossy().into_owned()),
            "dtype": "f64",
            "byte_order": "little",
            "layout": "row-major n_paths x d, terminal Y",
            "values": batch.terminal_y.len(),
        },
        "steps": match batch.horizon { Horizon::Steps(n) => Some(n), Horizon::Time(_) => None },
    });
    io::write_atomic(&a.out, &io::f64_column_bytes(&batch.terminal_y))?;
    io::write_json(&sidecar_path(&a.out), &sidecar)?;
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version.
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = serde_json::json!({ "error": "usage", "message": e.to_string().trim_end() });
            eprintln!("{msg}");
            return ExitCode::from(2);
        }
    };
    match montecarlo::with_threads(cli.threads, || run(cli.command)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::from(2)
        }
    }
}
