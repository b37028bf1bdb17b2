//! `farkas`: certify multi-objective queries on MDPs and extract witnesses.
//!
//! Exit codes: 0 holds / accepted, 1 violated / rejected, 2 unknown,
//! 3 witness limited by the time limit, 64 usage or input error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};

use farkas::certfile::{check_file, mp_to_file, reach_to_file, CertificateFile, CheckOptions, Certifies};
use farkas::graph::mec_quotient;
use farkas::lp::{default_solver, write_lp_format, LinSystem, LpSolver, SolveLimits};
use farkas::model::{parse_model, write_model, Mdp};
use farkas::mp_cert::{build_fmp, build_hmp, certify_mp, MpQuery};
use farkas::product::{reduce_query, ProductOptions, ReducedQuery, UpdateRule};
use farkas::query::{Family, PredicateKind, Query, Quantifier, Connective};
use farkas::reach_cert::{
    build_exists_and, build_exists_or, build_forall_and, build_forall_or, certify, check_exact, QueryType,
    ReachCertificate, Verdict,
};
use farkas::value::{round_to_denominator, Rational};
use farkas::witness::scheduler::{
    assemble_fmc_scheduler, evaluate_scheduler, flow_by_pair, forall_or_witness, memoryless_from_flow,
    memoryless_to_dot, PathProperty, SchedulerRef,
};
use farkas::witness::subsystem::{
    milp_min_subsystem, milp_min_subsystem_mp, quotient_weights, transfer_subsystem, Optimality, WitnessSubsystem,
};
use farkas::Error;

const EXIT_HOLDS: u8 = 0;
const EXIT_VIOLATED: u8 = 1;
const EXIT_UNKNOWN: u8 = 2;
const EXIT_INCUMBENT: u8 = 3;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "farkas", version, about = "Certificates and witnesses for multi-objective MDP queries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide a query and write a certificate for it or for its negation.
    Certify(CertifyArgs),
    /// Check a certificate file against a model and query.
    Check(CheckArgs),
    /// Write a witnessing subsystem for a lower-bounded query.
    WitnessSubsystem(SubsystemArgs),
    /// Write a witnessing scheduler as a Graphviz graph.
    WitnessScheduler(SchedulerArgs),
    /// Write the product of a model with the tracker of a query.
    Product(ProductArgs),
    /// Write the MEC quotient of a model.
    Quotient(ModelArgs),
    /// Write the quotient reachability model a query reduces to.
    Reduce(ProductArgs),
}

#[derive(Args)]
struct Inputs {
    /// Model in the explicit text format.
    model: PathBuf,
    /// Query as JSON.
    query: PathBuf,
    /// Update the tracked sets from the source state of each transition.
    #[arg(long)]
    source_rule: bool,
}

#[derive(Args)]
struct Limits {
    /// Solver time limit in seconds.
    #[arg(long, value_name = "SECONDS")]
    time_limit: Option<f64>,
}

#[derive(Args)]
struct CertifyArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    limits: Limits,
    /// Certificate output path (default: stdout).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Round the certificate to multiples of 1/DENOMINATOR and check it exactly.
    #[arg(long)]
    exact: bool,
    #[arg(long, requires = "exact")]
    denominator: Option<u64>,
    /// Write the linear systems for the query and its negation in LP format.
    #[arg(long, value_name = "FILE")]
    dump_lp: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    inputs: Inputs,
    certificate: PathBuf,
    /// Check in rational arithmetic with zero slack.
    #[arg(long)]
    exact: bool,
    /// Round float entries to multiples of 1/DENOMINATOR in exact mode.
    #[arg(long, requires = "exact")]
    denominator: Option<u64>,
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Quotient,
    Original,
}

#[derive(Args)]
struct SubsystemArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    limits: Limits,
    #[arg(long, value_enum, default_value = "original")]
    level: LevelArg,
    /// Weight quotient states by the number of original states they stand for.
    #[arg(long)]
    weights: bool,
    /// Subsystem output path (default: stdout); the kept states go to `<output>.kept`.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SchedulerArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    limits: Limits,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ProductArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ModelArgs {
    model: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

/// An error together with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let code = match e {
            Error::Parse { .. }
            | Error::InvalidModel(_)
            | Error::InvalidQuery(_)
            | Error::UnsupportedQuery(_)
            | Error::InitialInTarget(_)
            | Error::BlowupLimit { .. }
            | Error::ShapeMismatch(_)
            | Error::BackendUnavailable(_)
            | Error::InexactValue(_) => EXIT_USAGE,
            Error::NotSatisfied => EXIT_VIOLATED,
            _ => EXIT_UNKNOWN,
        };
        Failure { code, message: e.to_string() }
    }
}

fn usage(message: String) -> Failure {
    Failure { code: EXIT_USAGE, message }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Certify(a) => cmd_certify(a),
        Command::Check(a) => cmd_check(a),
        Command::WitnessSubsystem(a) => cmd_witness_subsystem(a),
        Command::WitnessScheduler(a) => cmd_witness_scheduler(a),
        Command::Product(a) => cmd_product(a),
        Command::Quotient(a) => cmd_quotient(a),
        Command::Reduce(a) => cmd_reduce(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| usage(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_model(path: &Path) -> Result<Mdp, Failure> {
    parse_model(&read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load(inputs: &Inputs) -> Result<(Mdp, Query, ProductOptions), Failure> {
    let mdp = load_model(&inputs.model)?;
    let query = Query::from_json(&read(&inputs.query)?).map_err(|e| usage(format!("{}: {e}", inputs.query.display())))?;
    let rule = if inputs.source_rule { UpdateRule::Source } else { UpdateRule::Target };
    Ok((mdp, query, ProductOptions { rule, cap: None }))
}

fn solve_limits(l: &Limits) -> Result<SolveLimits, Failure> {
    let mut limits = SolveLimits::default();
    if let Some(t) = l.time_limit {
        if !(t > 0.0 && t.is_finite()) {
            return Err(usage("--time-limit must be positive".into()));
        }
        limits.time_limit = Some(Duration::from_secs_f64(t));
    }
    Ok(limits)
}

fn solver() -> Result<Box<dyn LpSolver>, Failure> {
    Ok(default_solver()?)
}

fn timing(what: &str, since: Instant) {
    eprintln!("{what}: {:.3}s", since.elapsed().as_secs_f64());
}

fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::Holds => EXIT_HOLDS,
        Verdict::Violated => EXIT_VIOLATED,
    }
}

fn certifies(v: Verdict) -> Certifies {
    match v {
        Verdict::Holds => Certifies::Query,
        Verdict::Violated => Certifies::Negation,
    }
}

fn reach_systems(red: &ReducedQuery, negated: bool) -> farkas::Result<Vec<LinSystem<f64>>> {
    let q = if negated { red.query.negate() } else { red.query.clone() };
    let rf = &red.reach_form;
    Ok(match QueryType::of(q.quantifier, q.connective) {
        QueryType::ExistsAnd => vec![build_exists_and(rf, &q.bounds)?],
        QueryType::ForallOr => vec![build_forall_or(rf, &q.bounds)?],
        QueryType::ExistsOr => build_exists_or(rf, &q.bounds)?,
        QueryType::ForallAnd => build_forall_and(rf, &q.bounds)?,
    })
}

fn mp_systems(mdp: &Mdp, q: &MpQuery) -> farkas::Result<Vec<LinSystem<f64>>> {
    Ok(match q.query_type() {
        QueryType::ExistsAnd => vec![build_hmp(mdp, &q.rewards, &q.bounds)?],
        QueryType::ForallOr => vec![build_fmp(mdp, &q.rewards, &q.bounds)?],
        QueryType::ExistsOr => {
            (0..q.bounds.len()).map(|i| q.single(i)).map(|s| build_hmp(mdp, &s.rewards, &s.bounds)).collect::<farkas::Result<_>>()?
        }
        QueryType::ForallAnd => {
            (0..q.bounds.len()).map(|i| q.single(i)).map(|s| build_fmp(mdp, &s.rewards, &s.bounds)).collect::<farkas::Result<_>>()?
        }
    })
}

fn dump_systems(path: &Path, query: Vec<LinSystem<f64>>, negation: Vec<LinSystem<f64>>) -> Result<(), Failure> {
    let mut text = String::new();
    for (label, systems) in [("query", query), ("negation", negation)] {
        for (i, sys) in systems.iter().enumerate() {
            text.push_str(&format!("\\ {label} system {i}\n"));
            text.push_str(&write_lp_format(sys));
        }
    }
    write_out(Some(path), &text)
}

fn cmd_certify(a: CertifyArgs) -> Outcome {
    if a.exact && a.denominator.is_none() {
        return Err(usage("--exact needs --denominator for certificates found in floating point".into()));
    }
    let limits = solve_limits(&a.limits)?;
    let (mdp, query, popts) = load(&a.inputs)?;
    let solver = solver()?;
    let start = Instant::now();
    let (verdict, file) = match query.validate()? {
        Family::ReachInvariant => {
            let red = reduce_query(&mdp, &query, &popts)?;
            timing("build", start);
            if let Some(p) = &a.dump_lp {
                dump_systems(p, reach_systems(&red, false)?, reach_systems(&red, true)?)?;
            }
            let t = Instant::now();
            let c = certify(&red.reach_form, &red.query, solver.as_ref(), &limits)?;
            timing("cert", t);
            let file = match a.denominator {
                Some(d) => {
                    let exact: ReachCertificate<Rational> = c.certificate.map(|v| round_to_denominator(*v, d));
                    let report = check_exact(&red.reach_form, &c.query, &exact)?;
                    if !report.is_ok() {
                        return Err(Failure {
                            code: EXIT_UNKNOWN,
                            message: format!("rounding to 1/{d} breaks the certificate: {:?}", report.violations),
                        });
                    }
                    reach_to_file(&red.reach_form, &query, certifies(c.verdict), &exact)
                }
                None => reach_to_file(&red.reach_form, &query, certifies(c.verdict), &c.certificate),
            };
            (c.verdict, file)
        }
        Family::MeanPayoff => {
            let mq = MpQuery::new(&mdp, &query)?;
            timing("build", start);
            if let Some(p) = &a.dump_lp {
                dump_systems(p, mp_systems(&mdp, &mq)?, mp_systems(&mdp, &mq.negate())?)?;
            }
            let t = Instant::now();
            let c = certify_mp(&mdp, &mq, solver.as_ref(), &limits)?;
            timing("cert", t);
            let file = match a.denominator {
                Some(d) => {
                    let exact = c.certificate.map(|v| round_to_denominator(*v, d));
                    let report = farkas::mp_cert::check_mp_exact(&mdp, &c.query, &exact)?;
                    if !report.is_ok() {
                        return Err(Failure {
                            code: EXIT_UNKNOWN,
                            message: format!("rounding to 1/{d} breaks the certificate: {:?}", report.violations),
                        });
                    }
                    mp_to_file(&mdp, &query, certifies(c.verdict), &exact)
                }
                None => mp_to_file(&mdp, &query, certifies(c.verdict), &c.certificate),
            };
            (c.verdict, file)
        }
    };
    // what we write must pass the same check a user would run
    let opts = CheckOptions { exact: a.exact, product: popts, ..Default::default() };
    let report = check_file(&mdp, &query, &CertificateFile::from_json(&file.to_json())?, &opts)?;
    if !report.is_ok() {
        return Err(Failure { code: EXIT_UNKNOWN, message: format!("written certificate fails: {:?}", report.violations) });
    }
    write_out(a.output.as_deref(), &file.to_json())?;
    eprintln!("verdict: {}", if verdict == Verdict::Holds { "holds" } else { "violated" });
    Ok(verdict_code(verdict))
}

fn cmd_check(a: CheckArgs) -> Outcome {
    let (mdp, query, popts) = load(&a.inputs)?;
    let file = CertificateFile::from_json(&read(&a.certificate)?)?;
    let opts = CheckOptions { exact: a.exact, denominator: a.denominator, tolerance: a.tolerance, product: popts };
    let report = match check_file(&mdp, &query, &file, &opts) {
        Ok(r) => r,
        Err(e @ Error::ShapeMismatch(_)) => {
            eprintln!("rejected: {e}");
            return Ok(EXIT_VIOLATED);
        }
        Err(e) => return Err(e.into()),
    };
    if report.is_ok() {
        eprintln!("accepted");
        Ok(EXIT_HOLDS)
    } else {
        for v in &report.violations {
            println!("{}\t{:e}", v.id, v.residual);
        }
        eprintln!("rejected: {} violated rows", report.violations.len());
        Ok(EXIT_VIOLATED)
    }
}

fn write_subsystem(ws: &WitnessSubsystem, model_names: &Mdp, output: Option<&Path>) -> Result<(), Failure> {
    write_out(output, &write_model(&ws.subsystem.mdp))?;
    let mut kept: Vec<&str> = ws.kept.iter().map(|&s| model_names.state_name(s)).collect();
    kept.sort_unstable();
    if let Some(p) = output {
        let mut sidecar = p.as_os_str().to_owned();
        sidecar.push(".kept");
        let text: String = kept.iter().map(|s| format!("{s}\n")).collect();
        write_out(Some(Path::new(&sidecar)), &text)?;
    }
    Ok(())
}

fn optimality_code(o: Optimality) -> u8 {
    match o {
        Optimality::Incumbent { .. } => EXIT_INCUMBENT,
        _ => EXIT_HOLDS,
    }
}

fn report_subsystem(ws: &WitnessSubsystem) {
    let opt = match ws.optimality {
        Optimality::Proven => "proven".to_string(),
        Optimality::Incumbent { gap } => format!("incumbent (gap {gap:.3})"),
        Optimality::Heuristic => "heuristic".to_string(),
    };
    eprintln!(
        "size: {}/{} ({:.1}%) at {} level, {opt}",
        ws.size(),
        ws.total_states,
        100.0 * ws.ratio(),
        ws.level.tag()
    );
}

fn cmd_witness_subsystem(a: SubsystemArgs) -> Outcome {
    let limits = solve_limits(&a.limits)?;
    let (mdp, query, popts) = load(&a.inputs)?;
    let solver = solver()?;
    let start = Instant::now();
    match query.validate()? {
        Family::ReachInvariant => {
            let red = reduce_query(&mdp, &query, &popts)?;
            timing("build", start);
            let t = Instant::now();
            let weights = a.weights.then(|| quotient_weights(&red));
            let ws = milp_min_subsystem(&red.reach_form, &red.query, weights.as_deref(), solver.as_ref(), &limits)?;
            timing("milp", t);
            match a.level {
                LevelArg::Quotient => {
                    report_subsystem(&ws);
                    write_subsystem(&ws, &red.quotient.mdp, a.output.as_deref())?;
                }
                LevelArg::Original => {
                    let orig = transfer_subsystem(&mdp, &red, &ws, &popts, solver.as_ref(), &limits)?;
                    report_subsystem(&orig);
                    write_subsystem(&orig, &mdp, a.output.as_deref())?;
                }
            }
            Ok(optimality_code(ws.optimality))
        }
        Family::MeanPayoff => {
            let mq = MpQuery::new(&mdp, &query)?;
            let ws = milp_min_subsystem_mp(&mdp, &mq, None, solver.as_ref(), &limits)?;
            timing("milp", start);
            report_subsystem(&ws);
            write_subsystem(&ws, &mdp, a.output.as_deref())?;
            Ok(optimality_code(ws.optimality))
        }
    }
}

fn objective_props(red: &ReducedQuery) -> Vec<PathProperty> {
    let rf = &red.reach_form;
    (0..rf.num_objectives()).map(|i| PathProperty::Reach(rf.objective(i).to_vec())).collect()
}

/// Stay-forever sets on the product, one per objective.
fn product_props(red: &ReducedQuery) -> Vec<PathProperty> {
    let n = red.product.mdp.num_states();
    (0..red.reach_form.num_objectives())
        .map(|i| {
            let mut set = vec![false; n];
            for c in red.objective_mecs(i) {
                for &s in &red.quotient.mecs[c].states {
                    set[s] = true;
                }
            }
            PathProperty::Persist(set)
        })
        .collect()
}

fn cmd_witness_scheduler(a: SchedulerArgs) -> Outcome {
    let limits = solve_limits(&a.limits)?;
    let (mdp, query, popts) = load(&a.inputs)?;
    if query.validate()? != Family::ReachInvariant {
        return Err(usage("scheduler witnesses are built for reach/invariant queries".into()));
    }
    if query.predicates.iter().any(|p| matches!(p.kind, PredicateKind::MeanPayoff { .. })) {
        return Err(usage("scheduler witnesses are built for reach/invariant queries".into()));
    }
    let solver = solver()?;
    let start = Instant::now();
    let red = reduce_query(&mdp, &query, &popts)?;
    timing("build", start);
    let t = Instant::now();
    let c = certify(&red.reach_form, &red.query, solver.as_ref(), &limits)?;
    timing("cert", t);
    let q = &c.query;
    let dot = match &c.certificate {
        ReachCertificate::ExistsAnd { y } => {
            let sigma = memoryless_from_flow(&red.quotient.mdp, &flow_by_pair(&red.reach_form, y));
            let fmc = assemble_fmc_scheduler(&red.product.mdp, &red.quotient, &sigma)?;
            let values = evaluate_scheduler(&red.product.mdp, SchedulerRef::Fmc(&fmc), &product_props(&red))?;
            let points = vec![values.clone()];
            if !q.holds_on(&points) && !holds_within(q, &values, 1e-8) {
                return Err(Failure {
                    code: EXIT_UNKNOWN,
                    message: format!("assembled scheduler achieves {values:?}, which misses the bounds"),
                });
            }
            eprintln!("achieved: {values:?}");
            fmc.to_dot(&red.product.mdp)
        }
        ReachCertificate::ForallOr { z, .. } => {
            let w = forall_or_witness(&red.reach_form, q, z, solver.as_ref(), &limits)?;
            let check = evaluate_scheduler(&red.quotient.mdp, SchedulerRef::Memoryless(&w.scheduler), &objective_props(&red))?;
            eprintln!("separating weights {z:?}: optimum {} against {} ({check:?})", w.gamma, w.weighted_bound);
            memoryless_to_dot(&red.quotient.mdp, &w.scheduler)
        }
        other => {
            return Err(usage(format!(
                "no scheduler witness for {} certificates",
                other.query_type().tag()
            )))
        }
    };
    write_out(a.output.as_deref(), &dot)?;
    eprintln!("verdict: {}", if c.verdict == Verdict::Holds { "holds" } else { "violated" });
    Ok(verdict_code(c.verdict))
}

/// Whether `values` meet every bound of a conjunctive query up to `eps`.
fn holds_within(q: &farkas::query::ReachQuery, values: &[f64], eps: f64) -> bool {
    q.quantifier == Quantifier::Exists
        && q.connective == Connective::And
        && q.bounds.iter().zip(values).all(|(b, v)| {
            let l = b.value.approx();
            if b.op.is_lower() { *v >= l - eps } else { *v <= l + eps }
        })
}

fn cmd_product(a: ProductArgs) -> Outcome {
    let (mdp, query, popts) = load(&a.inputs)?;
    let red = reduce_query(&mdp, &query, &popts)?;
    eprintln!("product: {} states, {} MECs", red.product.mdp.num_states(), red.quotient.mecs.len());
    write_out(a.output.as_deref(), &write_model(&red.product.mdp))?;
    Ok(EXIT_HOLDS)
}

fn cmd_quotient(a: ModelArgs) -> Outcome {
    let mdp = load_model(&a.model)?;
    let q = mec_quotient(&mdp);
    eprintln!("quotient: {} states from {} MECs", q.mdp.num_states(), q.mecs.len());
    write_out(a.output.as_deref(), &write_model(&q.mdp))?;
    Ok(EXIT_HOLDS)
}

fn cmd_reduce(a: ProductArgs) -> Outcome {
    let (mdp, query, popts) = load(&a.inputs)?;
    let red = reduce_query(&mdp, &query, &popts)?;
    let rf = &red.reach_form;
    let mut m = rf.mdp().clone();
    for i in 0..rf.num_objectives() {
        m = m.with_label(&format!("objective{i}"), rf.objective_states(i));
    }
    let mut text = write_model(&m);
    for (i, b) in red.query.bounds.iter().enumerate() {
        text.push_str(&format!("# objective{i} {} {}\n", b.op.symbol(), b.value));
    }
    eprintln!("quotient: {} states, {} objectives", m.num_states(), rf.num_objectives());
    write_out(a.output.as_deref(), &text)?;
    Ok(EXIT_HOLDS)
}
