//! One line per acceptance criterion, each checked at its stated limits.
//! Run with `cargo test -p regcube-cli --test acceptance -- --nocapture`.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use regcube::constructions::{build, section_sums, ConstructionStep, PlanOutcome};
use regcube::game::{
    evaluate_exact, evaluate_monte_carlo, lift_strategy, strategy_from_dominating, view_of, Strategy,
};
use regcube::hypercube::{
    is_k_dominating, verify_regular, ObservedDegree, Verdict, VerifyMode, VertexSet,
};
use regcube::search::{
    is_perfect, min_k_dominating, p_exact, DominatingSearch, NotPerfectReason, PerfectnessVerdict,
    ProbabilityResult, SearchBudget,
};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn ok<T, E: std::fmt::Debug>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| format!("{e:?}"))
}

fn feasible_plan(n: u32, k: u32) -> Result<regcube::constructions::ConstructionPlan, String> {
    match ok(regcube::constructions::plan(n, k))? {
        PlanOutcome::Feasible { plan } => Ok(plan),
        other => Err(format!("({n},{k}) not feasible: {other:?}")),
    }
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let v2 = ok(VertexSet::from_vertices(3, [0, 7]))?.complement();
    let report = ok(verify_regular(&v2, 3, 1, VerifyMode::Exhaustive))?;
    let elapsed = start.elapsed();
    ensure(report.verdict == Verdict::Valid, "not a (3,1)-regular partition")?;
    ensure(report.vertices_checked == 8, "not exhaustive")?;
    ensure(elapsed < Duration::from_millis(1), format!("took {elapsed:?}"))?;
    Ok(format!("{{000,111}} is (3,1)-regular on Q3 in {elapsed:?}"))
}

fn criterion_2() -> Check {
    let start = Instant::now();
    let oracle = ok(build(7, 1))?.ok_or("no plan for (7,1)")?;
    let d = ok(oracle.materialize())?;
    let e = ok(evaluate_exact(&ok(strategy_from_dominating(&d))?, 1))?;
    let elapsed = start.elapsed();
    ensure(d.len() == 16, format!("|D| = {}", d.len()))?;
    ensure(is_k_dominating(&d, 1).holds(), "not 1-dominating")?;
    ensure(e.total == 128 && e.probability == Ratio::new(7, 8), format!("P = {}", e.probability))?;
    ensure(elapsed < Duration::from_millis(10), format!("took {elapsed:?}"))?;
    Ok(format!("|D| = 16, P = 7/8 over 128 placements in {elapsed:?}"))
}

fn criterion_3() -> Check {
    let start = Instant::now();
    let plan = feasible_plan(13, 3)?;
    let shape: Vec<bool> = plan.steps.iter().map(|s| matches!(s, ConstructionStep::Double { .. })).collect();
    ensure(
        matches!(plan.steps[0], ConstructionStep::Base { s: 2, t: 3, .. }) && shape == [false, true, true],
        "plan is not Base(2,3) plus two doublings",
    )?;
    let oracle = ok(regcube::constructions::execute(&plan))?;
    let report = ok(oracle.verify(VerifyMode::Exhaustive))?;
    ensure(report.verdict == Verdict::Valid && report.vertices_checked == 8192, "verification failed")?;
    ensure(
        report.observed_d1 == ObservedDegree::Uniform(3) && report.observed_d2 == ObservedDegree::Uniform(13),
        format!("observed {:?}/{:?}", report.observed_d1, report.observed_d2),
    )?;
    let e = ok(evaluate_exact(&ok(Strategy::from_membership(Arc::new(oracle)))?, 3))?;
    let elapsed = start.elapsed();
    ensure(e.total == 8192 && e.probability == Ratio::new(13, 16), format!("P = {}", e.probability))?;
    ensure(elapsed < Duration::from_secs(5), format!("took {elapsed:?}"))?;
    Ok(format!("(3,13) on Q13 verified over 8192 vertices, P = 13/16 in {elapsed:?}"))
}

fn criterion_4() -> Check {
    let start = Instant::now();
    let plan = feasible_plan(6, 2)?;
    ensure(
        matches!(plan.steps.last(), Some(ConstructionStep::BlowUp { factor: 2 })),
        "plan does not end in BlowUp(2)",
    )?;
    let oracle = ok(regcube::constructions::execute(&plan))?;
    let report = ok(oracle.verify(VerifyMode::Exhaustive))?;
    ensure(report.verdict == Verdict::Valid && report.vertices_checked == 64, "Q6 verification failed")?;
    let base_set = ok(ok(build(3, 1))?.ok_or("no (3,1)")?.materialize())?;
    let lifted = ok(lift_strategy(&ok(strategy_from_dominating(&base_set))?, 2))?;
    let e = ok(evaluate_exact(&lifted, 2))?;
    let elapsed = start.elapsed();
    ensure(e.total == 64 && e.probability == Ratio::new(3, 4), format!("P = {}", e.probability))?;
    ensure(elapsed < Duration::from_millis(100), format!("took {elapsed:?}"))?;
    Ok(format!("(2,6) on Q6 valid, lifted strategy P = 3/4 in {elapsed:?}"))
}

fn criterion_5() -> Check {
    let start = Instant::now();
    let oracle = ok(build(59, 5))?.ok_or("no plan for (59,5)")?;
    let report = ok(oracle.verify(VerifyMode::Sampled { count: 10_000, seed: 0 }))?;
    ensure(report.vertices_checked == 10_000, "wrong sample size")?;
    ensure(
        report.verdict == Verdict::Valid
            && report.observed_d1 == ObservedDegree::Uniform(5)
            && report.observed_d2 == ObservedDegree::Uniform(59),
        format!("sampled {:?}", report),
    )?;
    let mc = ok(evaluate_monte_carlo(&ok(Strategy::from_membership(Arc::new(oracle)))?, 5, 100_000, 0))?;
    let target = 59.0 / 64.0;
    let z = (mc.estimate - target).abs() / mc.standard_error;
    let elapsed = start.elapsed();
    ensure(z < 4.0, format!("estimate {} is {z:.2} standard errors from 59/64", mc.estimate))?;
    ensure(elapsed < Duration::from_secs(60), format!("took {elapsed:?}"))?;
    Ok(format!(
        "10^4 sampled degrees exact, MC {:.5} ({z:.2} se from 59/64) in {elapsed:?}",
        mc.estimate
    ))
}

fn criterion_6() -> Check {
    let start = Instant::now();
    let budget = SearchBudget::default();
    let verdict = ok(is_perfect(5, 3, budget))?;
    ensure(
        matches!(verdict, PerfectnessVerdict::NotPerfect { reason: NotPerfectReason::ScreenFailed { .. } }),
        format!("is_perfect(5,3) = {verdict:?}"),
    )?;
    let DominatingSearch::Exact { size, witness } = ok(min_k_dominating(5, 3, budget))? else {
        return Err("search on Q5 did not finish".into());
    };
    ensure(size > 12, format!("found a 3-dominating set of size {size}"))?;
    ensure(is_k_dominating(&witness, 3).holds(), "witness is not 3-dominating")?;
    let p = Ratio::new(32 - size, 32);
    let elapsed = start.elapsed();
    ensure(p < Ratio::new(5, 8), "P(5,3) is not below 5/8")?;
    ensure(elapsed < Duration::from_secs(300), format!("took {elapsed:?}"))?;
    Ok(format!("screen rejects (5,3); minimum 3-dominating set of Q5 has {size} vertices, P = {p} in {elapsed:?}"))
}

fn brute_force_minimum(n: u32, k: u32) -> u64 {
    let count = 1u32 << n;
    let mut best = u64::MAX;
    for subset in 0u64..(1u64 << count) {
        let size = subset.count_ones() as u64;
        if size >= best {
            continue;
        }
        let dominated = (0..count).all(|x| {
            subset >> x & 1 == 1
                || (0..n).filter(|i| subset >> (x ^ (1 << i)) & 1 == 1).count() as u32 >= k
        });
        if dominated {
            best = size;
        }
    }
    best
}

fn criterion_7() -> Check {
    let start = Instant::now();
    let mut pairs = 0;
    for n in 1..=4u32 {
        for k in 1..=n {
            let total = 1u64 << n;
            let expected = Ratio::new(total - brute_force_minimum(n, k), total);
            let got = ok(p_exact(n, k, SearchBudget::default()))?;
            ensure(
                got == ProbabilityResult::Exact { value: expected },
                format!("({n},{k}): search {got:?}, brute force {expected}"),
            )?;
            pairs += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), format!("took {elapsed:?}"))?;
    Ok(format!("{pairs} pairs with n <= 4 agree with brute force in {elapsed:?}"))
}

fn criterion_8() -> Check {
    let start = Instant::now();
    // Count law on every constructed partition that can be materialized.
    let mut partitions = 0;
    for n in 1..=20u32 {
        for k in 1..=n {
            if let Some(p) = ok(build(n, k))? {
                let v2 = ok(p.materialize())?.len();
                let v1 = (1u64 << n) - v2;
                ensure(v2 * p.d2() as u64 == v1 * p.d1() as u64, format!("count law fails for ({n},{k})"))?;
                partitions += 1;
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let q3 = ok(strategy_from_dominating(&ok(VertexSet::from_vertices(3, [0, 7]))?))?;
    let strategies = [
        ok(Strategy::from_membership(Arc::new(ok(build(13, 3))?.ok_or("no (13,3)")?)))?,
        ok(Strategy::from_membership(Arc::new(ok(build(59, 5))?.ok_or("no (59,5)")?)))?,
        ok(lift_strategy(&q3, 4))?,
        q3,
    ];
    for trial in 0..10_000 {
        let s = &strategies[trial % strategies.len()];
        let h = rng.gen::<u64>() & ((1u64 << s.n()) - 1);
        let i = rng.gen_range(0..s.n());
        let a = s.actions(h)[i as usize];
        ensure(a == s.actions(h ^ (1 << i))[i as usize], format!("player {i} reads own hat at {h:x}"))?;
        ensure(a == s.decide(i, view_of(h, i)), "decide disagrees with play")?;
    }

    for _ in 0..10_000 {
        let m = rng.gen_range(1..=30u32);
        let x = rng.gen::<u64>() & ((1u64 << (2 * m)) - 1);
        let k = rng.gen_range(0..m);
        let fx = section_sums(x, m);
        ensure(
            section_sums(x ^ (1 << (2 * k)), m) == fx ^ (1 << k)
                && section_sums(x ^ (1 << (2 * k + 1)), m) == fx ^ (1 << k),
            format!("section sums break at x={x:x}, k={k}"),
        )?;
    }

    let mut sandwiched = 0;
    for n in 1..=5u32 {
        for k in 1..=n {
            let ProbabilityResult::Exact { value } = ok(p_exact(n, k, SearchBudget::default()))? else {
                return Err(format!("({n},{k}) unresolved"));
            };
            ensure(value <= Ratio::new(n as u64, (n + k) as u64), format!("({n},{k}) above n/(n+k)"))?;
            let lg = 32 - (k - 1).leading_zeros();
            if n + k >= 1 << (2 * lg) {
                ensure(
                    value > Ratio::new((n - k) as u64, (n + k) as u64),
                    format!("({n},{k}) not above 1 - 2k/(n+k)"),
                )?;
                sandwiched += 1;
            }
        }
    }
    Ok(format!(
        "count law on {partitions} partitions, 10^4 sightline probes, 10^4 section-sum identities, {sandwiched} sandwiched values in {:?}",
        start.elapsed()
    ))
}

fn regcube(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_regcube"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("`regcube {}` exited with {:?}", args.join(" "), out.status.code()));
    }
    Ok(out.stdout)
}

fn run_every_command(dir: &Path, threads: &str) -> Result<Vec<(String, Vec<u8>)>, String> {
    let p = |name: &str| dir.join(name).to_str().unwrap().to_owned();
    fs::create_dir_all(dir).map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    let t = ["--threads", threads];
    let mut capture = |label: &str, args: &[&str]| -> Result<(), String> {
        let mut full: Vec<&str> = t.to_vec();
        full.extend_from_slice(args);
        outputs.push((label.to_owned(), regcube(&full)?));
        Ok(())
    };
    capture("plan", &["plan", "13", "3", "--out", &p("plan.json")])?;
    capture("build", &["--json", "build", &p("plan.json"), "--out-dir", &p("built")])?;
    capture("verify", &["--json", "verify", "--plan", &p("built/plan.json")])?;
    capture("verify-sampled", &["--json", "verify", "--plan", &p("built/plan.json"), "--sampled", "5000", "--seed", "4"])?;
    capture("simulate-exact", &["--json", "simulate", "13", "3", "--set", &p("built/v2.set"), "--exact"])?;
    capture("simulate-mc", &["--json", "simulate", "59", "5", "--plan", "-", "--mc", "30000", "--seed", "17"])?;
    capture("search", &["--json", "search", "6", "2", "--certificate", &p("cert.json")])?;
    capture("table", &["table", "1", "--from", "1", "--to", "7", "--out", &p("table.csv"), "--certificates", &p("certs")])?;
    for file in ["plan.json", "built/plan.json", "built/v2.set", "cert.json", "table.csv", "certs/n7_k1.plan.json"] {
        let bytes = fs::read(dir.join(file)).map_err(|e| format!("{file}: {e}"))?;
        outputs.push((file.to_owned(), bytes));
    }
    Ok(outputs
        .into_iter()
        .map(|(label, bytes)| {
            let text = String::from_utf8_lossy(&bytes).replace(dir.to_str().unwrap(), "<dir>");
            (label, text.into_bytes())
        })
        .collect())
}

fn criterion_9() -> Check {
    let start = Instant::now();
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = run_every_command(&root.path().join("a"), "1")?;
    let repeat = run_every_command(&root.path().join("b"), "1")?;
    let threaded = run_every_command(&root.path().join("c"), "4")?;
    for ((label, a), ((_, b), (_, c))) in first.iter().zip(repeat.iter().zip(&threaded)) {
        ensure(a == b, format!("{label} differs between runs"))?;
        ensure(a == c, format!("{label} depends on --threads"))?;
    }
    Ok(format!("{} outputs byte-identical across runs and thread counts in {:?}", first.len(), start.elapsed()))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("1 example partition", criterion_1),
        ("2 Hamming code strategy", criterion_2),
        ("3 (13,3) perfect", criterion_3),
        ("4 blow-up and lifting", criterion_4),
        ("5 (59,5) spot check", criterion_5),
        ("6 (5,3) not perfect", criterion_6),
        ("7 search vs brute force", criterion_7),
        ("8 property suites", criterion_8),
        ("9 determinism", criterion_9),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                println!("FAIL  {name}: {why}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
