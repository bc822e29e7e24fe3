use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use num_rational::Ratio;
use serde::Serialize;

use regcube::constructions::{self, ConstructionPlan, PlanOutcome};
use regcube::game::{evaluate_exact, evaluate_monte_carlo, Strategy};
use regcube::hypercube::{
    Membership, SetRole, Verdict, VerifyMode, VertexSet, DEFAULT_SAMPLE_COUNT, MATERIALIZE_LIMIT,
};
use regcube::search::{
    bounds, is_perfect, p_exact, Certificate, NotPerfectReason, PerfectnessVerdict,
    ProbabilityResult, SearchBudget,
};
use regcube::Error;

#[derive(Parser, Debug)]
#[command(name = "regcube", version, about = "Regular hypercube partitions and hat-guessing strategies")]
struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Machine-readable JSON on standard output.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Plan a (k, n)-regular partition of Q_n.
    Plan {
        n: u32,
        k: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute a plan, writing the completed plan and the V2 set file.
    Build {
        plan: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Check a partition given by a plan or a set file.
    Verify {
        #[command(flatten)]
        source: PartitionSource,
        /// Claimed degree of V1 vertices into V2 (set files only).
        #[arg(long)]
        d1: Option<u32>,
        /// Claimed degree of V2 vertices into V1 (set files only).
        #[arg(long)]
        d2: Option<u32>,
        /// Check this many random vertices instead of all of them.
        #[arg(long)]
        sampled: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Evaluate the strategy of a dominating set.
    Simulate {
        n: u32,
        k: u32,
        #[command(flatten)]
        source: PartitionSource,
        #[arg(long, conflicts_with = "mc")]
        exact: bool,
        /// Monte Carlo sample count.
        #[arg(long)]
        mc: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Decide whether (n, k) is perfect.
    Search {
        n: u32,
        k: u32,
        #[command(flatten)]
        budget: BudgetArgs,
        /// Write the certificate of a perfect pair here.
        #[arg(long)]
        certificate: Option<PathBuf>,
    },
    /// Tabulate bounds and exact values of P(n, k) as CSV.
    Table {
        k: u32,
        #[arg(long)]
        from: u32,
        #[arg(long)]
        to: u32,
        #[command(flatten)]
        budget: BudgetArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for certificate files.
        #[arg(long)]
        certificates: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct PartitionSource {
    /// Plan file, or `-` to plan from n and k.
    #[arg(long)]
    plan: Option<String>,
    /// Vertex set file.
    #[arg(long)]
    set: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BudgetArgs {
    #[arg(long)]
    max_nodes: Option<u64>,
    #[arg(long)]
    max_seconds: Option<f64>,
}

impl BudgetArgs {
    fn budget(&self) -> anyhow::Result<SearchBudget> {
        let default = SearchBudget::default();
        Ok(SearchBudget::new(
            self.max_nodes.unwrap_or(default.max_nodes),
            self.max_seconds.unwrap_or(default.max_seconds),
        )?)
    }
}

/// A failed check: reported, exit status 1.
#[derive(Debug)]
struct Failed(String);

impl std::fmt::Display for Failed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Failed {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            match err.downcast_ref::<Failed>() {
                Some(Failed(msg)) if msg.is_empty() => {}
                Some(Failed(msg)) => eprintln!("{msg}"),
                None => eprintln!("error: {err:#}"),
            }
            ExitCode::from(exit_status(&err))
        }
    }
}

fn exit_status(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(
            Error::InvalidParameter(_) | Error::ZeroDimension | Error::DimensionTooLarge { .. },
        ) => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    let json = cli.json;
    match cli.command {
        Command::Plan { n, k, out } => cmd_plan(n, k, out.as_deref(), json),
        Command::Build { plan, out_dir } => cmd_build(&plan, &out_dir, json),
        Command::Verify { source, d1, d2, sampled, seed } => {
            cmd_verify(&source, d1, d2, sampled, seed, json)
        }
        Command::Simulate { n, k, source, exact, mc, seed } => {
            cmd_simulate(n, k, &source, exact, mc, seed, json)
        }
        Command::Search { n, k, budget, certificate } => {
            cmd_search(n, k, budget.budget()?, certificate.as_deref(), json)
        }
        Command::Table { k, from, to, budget, out, certificates } => {
            cmd_table(k, from, to, budget.budget()?, out.as_deref(), certificates.as_deref())
        }
    }
}

fn write_atomic(path: &Path, contents: &[u8]) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating a temporary file in {}", dir.display()))?;
    tmp.write_all(contents)?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string(value)?);
    Ok(())
}

fn set_bytes(set: &VertexSet, role: SetRole) -> anyhow::Result<Vec<u8>> {
    let mut bytes = Vec::new();
    set.write_to(&mut bytes, role)?;
    Ok(bytes)
}

fn read_set(path: &Path) -> anyhow::Result<VertexSet> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let (set, _) = VertexSet::read_from(BufReader::new(file))
        .with_context(|| format!("reading {}", path.display()))?;
    Ok(set)
}

fn read_plan(path: &Path) -> anyhow::Result<ConstructionPlan> {
    let text = fs::read_to_string(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(ConstructionPlan::from_json(&text).with_context(|| format!("reading {}", path.display()))?)
}

fn planned(n: u32, k: u32) -> anyhow::Result<ConstructionPlan> {
    match constructions::plan(n, k)? {
        PlanOutcome::Feasible { plan } => Ok(plan),
        PlanOutcome::Infeasible { reason } => Err(Failed(format!("Infeasible: {reason}")).into()),
        PlanOutcome::Unknown { reason } => Err(Failed(format!("Unknown: {reason}")).into()),
    }
}

fn cmd_plan(n: u32, k: u32, out: Option<&Path>, json: bool) -> anyhow::Result<()> {
    let outcome = constructions::plan(n, k)?;
    let plan = match &outcome {
        PlanOutcome::Feasible { plan } => plan,
        PlanOutcome::Infeasible { reason } => {
            report_failure(json, &outcome, format!("Infeasible: {reason}"))?;
            bail!(Failed(String::new()));
        }
        PlanOutcome::Unknown { reason } => {
            report_failure(json, &outcome, format!("Unknown: {reason}"))?;
            bail!(Failed(String::new()));
        }
    };
    match out {
        Some(path) => {
            write_atomic(path, plan.to_json().as_bytes())?;
            if json {
                print_json(&outcome)?;
            } else {
                println!("wrote {}", path.display());
            }
        }
        None if json => print_json(&outcome)?,
        None => print!("{}", plan.to_json()),
    }
    Ok(())
}

fn report_failure<T: Serialize>(json: bool, value: &T, text: String) -> anyhow::Result<()> {
    if json {
        print_json(value)
    } else {
        println!("{text}");
        Ok(())
    }
}

#[derive(Serialize)]
struct BuildRecord {
    n: u32,
    d1: u32,
    d2: u32,
    plan: PathBuf,
    v2: Option<PathBuf>,
    v2_size: Option<u64>,
}

fn cmd_build(plan_path: &Path, out_dir: &Path, json: bool) -> anyhow::Result<()> {
    let plan = read_plan(plan_path)?;
    let oracle = constructions::execute(&plan)?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let plan_out = out_dir.join("plan.json");
    write_atomic(&plan_out, oracle.plan().to_json().as_bytes())?;
    let mut record = BuildRecord {
        n: oracle.dim(),
        d1: oracle.d1(),
        d2: oracle.d2(),
        plan: plan_out,
        v2: None,
        v2_size: None,
    };
    if oracle.dim() <= MATERIALIZE_LIMIT {
        let set = oracle.materialize()?;
        let path = out_dir.join("v2.set");
        write_atomic(&path, &set_bytes(&set, SetRole::V2)?)?;
        record.v2 = Some(path);
        record.v2_size = Some(set.len());
    }
    if json {
        print_json(&record)?;
    } else {
        println!("built ({},{})-regular partition of Q_{}", record.d1, record.d2, record.n);
        println!("plan: {}", record.plan.display());
        match (&record.v2, record.v2_size) {
            (Some(path), Some(size)) => println!("V2: {} ({size} vertices)", path.display()),
            _ => println!("V2: not materialized (n > {MATERIALIZE_LIMIT})"),
        }
    }
    Ok(())
}

fn cmd_verify(
    source: &PartitionSource,
    d1: Option<u32>,
    d2: Option<u32>,
    sampled: Option<u64>,
    seed: u64,
    json: bool,
) -> anyhow::Result<()> {
    let (set, d1, d2): (Arc<dyn Membership>, u32, u32) = match (&source.plan, &source.set) {
        (Some(plan), _) => {
            if plan == "-" {
                bail!(Error::InvalidParameter("verify needs a plan file, not `-`".into()));
            }
            let oracle = constructions::execute(&read_plan(Path::new(plan))?)?;
            let (a, b) = (oracle.d1(), oracle.d2());
            if d1.is_some_and(|d| d != a) || d2.is_some_and(|d| d != b) {
                bail!(Error::InvalidParameter(format!("the plan claims ({a},{b})")));
            }
            (Arc::new(oracle), a, b)
        }
        (None, Some(path)) => {
            let (Some(d1), Some(d2)) = (d1, d2) else {
                bail!(Error::InvalidParameter("set files need --d1 and --d2".into()));
            };
            (Arc::new(read_set(path)?), d1, d2)
        }
        (None, None) => unreachable!("clap requires a source"),
    };
    let mode = match sampled {
        Some(count) => VerifyMode::Sampled { count, seed },
        None if set.dim() <= MATERIALIZE_LIMIT => VerifyMode::Exhaustive,
        None => VerifyMode::Sampled { count: DEFAULT_SAMPLE_COUNT, seed },
    };
    let report = regcube::hypercube::verify_regular(&*set, d1, d2, mode)?;
    if json {
        print_json(&report)?;
    } else {
        let verdict = match report.verdict {
            Verdict::Valid => "Valid",
            Verdict::Invalid => "Invalid",
        };
        println!(
            "{verdict} as ({d1},{d2}) on Q_{} ({} vertices checked)",
            set.dim(),
            report.vertices_checked
        );
        if let Some(v) = &report.first_violation {
            println!("first violation: vertex {} has cross-degree {}", v.vertex, v.cross_degree);
        }
    }
    if report.verdict == Verdict::Invalid {
        bail!(Failed("invalid partition".into()));
    }
    Ok(())
}

fn cmd_simulate(
    n: u32,
    k: u32,
    source: &PartitionSource,
    exact: bool,
    mc: Option<u64>,
    seed: u64,
    json: bool,
) -> anyhow::Result<()> {
    let d: Arc<dyn Membership> = match (&source.plan, &source.set) {
        (Some(plan), _) => {
            let plan = if plan == "-" { planned(n, k)? } else { read_plan(Path::new(plan))? };
            Arc::new(constructions::execute(&plan)?)
        }
        (None, Some(path)) => Arc::new(read_set(path)?),
        (None, None) => unreachable!("clap requires a source"),
    };
    if d.dim() != n {
        bail!(Error::InvalidParameter(format!("the set lives in Q_{}, not Q_{n}", d.dim())));
    }
    let strategy = Strategy::from_membership(d)?;
    match (exact, mc) {
        (_, Some(samples)) => {
            let e = evaluate_monte_carlo(&strategy, k, samples, seed)?;
            if json {
                print_json(&e)?;
            } else {
                println!(
                    "won {} of {} sampled placements: {:.6} (standard error {:.6})",
                    e.wins, e.total, e.estimate, e.standard_error
                );
            }
        }
        (true, None) => {
            let e = evaluate_exact(&strategy, k)?;
            if json {
                print_json(&e)?;
            } else {
                println!("won {} of {} placements: probability {}", e.wins, e.total, ratio(&e.probability));
            }
        }
        (false, None) => bail!(Error::InvalidParameter("choose --exact or --mc SAMPLES".into())),
    }
    Ok(())
}

fn ratio(r: &Ratio<u64>) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

fn certificate_bytes(certificate: &Certificate) -> anyhow::Result<Vec<u8>> {
    Ok(match certificate {
        Certificate::Plan { plan } => plan.to_json().into_bytes(),
        Certificate::DominatingSet { set } => set_bytes(set, SetRole::D)?,
    })
}

fn cmd_search(
    n: u32,
    k: u32,
    budget: SearchBudget,
    certificate: Option<&Path>,
    json: bool,
) -> anyhow::Result<()> {
    let verdict = is_perfect(n, k, budget)?;
    if let (PerfectnessVerdict::Perfect { certificate: c }, Some(path)) = (&verdict, certificate) {
        write_atomic(path, &certificate_bytes(c)?)?;
    }
    if json {
        print_json(&verdict)?;
    } else {
        match &verdict {
            PerfectnessVerdict::Perfect { certificate } => match certificate {
                Certificate::Plan { plan } => {
                    println!("Perfect: verified construction with {} steps", plan.steps.len())
                }
                Certificate::DominatingSet { set } => {
                    println!("Perfect: {k}-dominating set of size {}", set.len())
                }
            },
            PerfectnessVerdict::NotPerfect { reason } => println!("NotPerfect: {reason}"),
            PerfectnessVerdict::Unknown { reason } => println!("Unknown: {reason}"),
        }
    }
    if let PerfectnessVerdict::Unknown { .. } = verdict {
        bail!(Failed("undecided".into()));
    }
    Ok(())
}

fn cmd_table(
    k: u32,
    from: u32,
    to: u32,
    budget: SearchBudget,
    out: Option<&Path>,
    certificates: Option<&Path>,
) -> anyhow::Result<()> {
    if from > to || from < k {
        bail!(Error::InvalidParameter(format!("need k <= from <= to, got k={k}, {from}..{to}")));
    }
    if let Some(dir) = certificates {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(["n", "k", "lower", "upper", "exact", "verdict", "certificate"])?;
    for n in from..=to {
        let b = bounds(n, k)?;
        let verdict = is_perfect(n, k, budget)?;
        let total = 1u64 << n;
        let (exact, label) = match &verdict {
            PerfectnessVerdict::Perfect { .. } => (Some(b.upper), "perfect"),
            PerfectnessVerdict::NotPerfect { reason: NotPerfectReason::SearchExhausted { min_size } } => {
                (Some(Ratio::new(total - min_size, total)), "not_perfect")
            }
            PerfectnessVerdict::NotPerfect { .. } => match p_exact(n, k, budget)? {
                ProbabilityResult::Exact { value } => (Some(value), "not_perfect"),
                ProbabilityResult::Bounds { .. } => (None, "not_perfect"),
            },
            PerfectnessVerdict::Unknown { .. } => (None, "unknown"),
        };
        let mut cert_path = String::new();
        if let (PerfectnessVerdict::Perfect { certificate }, Some(dir)) = (&verdict, certificates) {
            let name = match certificate {
                Certificate::Plan { .. } => format!("n{n}_k{k}.plan.json"),
                Certificate::DominatingSet { .. } => format!("n{n}_k{k}.set"),
            };
            let path = dir.join(name);
            write_atomic(&path, &certificate_bytes(certificate)?)?;
            cert_path = path.display().to_string();
        }
        csv.write_record([
            n.to_string(),
            k.to_string(),
            ratio(&b.lower),
            ratio(&b.upper),
            exact.map(|e| ratio(&e)).unwrap_or_default(),
            label.to_string(),
            cert_path,
        ])?;
    }
    let bytes = csv.into_inner().map_err(|e| anyhow!("{e}"))?;
    match out {
        Some(path) => write_atomic(path, &bytes)?,
        None => io::stdout().write_all(&bytes)?,
    }
    Ok(())
}
