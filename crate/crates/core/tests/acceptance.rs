//! Acceptance suite. Prints one pass/fail line per criterion and exits
//! nonzero if any fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use num_rational::Rational64;
use num_traits::ToPrimitive;
use vaguelie::analysis::{classify_subjects, emit_csv, ingest_csv_path, length_cdf, summarize, SubjectType};
use vaguelie::equilibrium::{
    best_response, check_equilibrium, example1_beliefs, expected_earnings, extract_threshold_l, liar_set,
    posterior_beliefs, solve_anonymous_restricted, solve_anonymous_unrestricted, solve_fixed_point, Seed,
    SolverOptions, StrategyProfile, TGrid,
};
use vaguelie::simulation::{paired_session, simulate_population, SimConfig};
use vaguelie::{
    classify_message, ovm, ovm_bruteforce, Environment, Message, MessageKind, Params, Restriction,
    StateSpace,
};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)*) => {
        if !$cond {
            return Err(format!($($msg)*));
        }
    };
}

fn defaults() -> (Params, TGrid<f64>) {
    let p = Params::default();
    let g = TGrid::midpoint(&p.dist, 400).unwrap();
    (p, g)
}

fn all_omega(params: &Params, cells: usize) -> StrategyProfile<f64> {
    StrategyProfile::pure(Environment::NA_UR, params.states, cells, |_, _| params.states.full()).unwrap()
}

fn vague_mass(profile: &StrategyProfile<f64>, grid: &TGrid<f64>) -> f64 {
    profile
        .rows()
        .map(|(_, c, row)| row.iter().filter(|(m, _)| m.is_vague()).map(|(_, p)| grid.mass(c) * p).sum::<f64>())
        .sum::<f64>()
        / profile.n() as f64
}

fn ovm_oracle() -> Outcome {
    let start = Instant::now();
    let mut checked = 0;
    for n in 2..=12 {
        let states = StateSpace::new(n).unwrap();
        for i in 1..=n {
            let (best, maximizers) = ovm_bruteforce::<Rational64>(i, states).unwrap();
            let m = ovm(i, states);
            ensure!(m.expected_payoff::<Rational64>() == best, "N={n} i={i}: ovm {m} has mean != {best}");
            ensure!(maximizers.contains(&m), "N={n} i={i}: {m} is not a brute-force maximizer");
            checked += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 5.0, "took {secs:.2} s");
    Ok(format!("{checked} (N, i) pairs exact in {secs:.2} s"))
}

fn example1_check(gamma: f64) -> vaguelie::equilibrium::EquilibriumReport {
    let p = Params::with_defaults(10, gamma).unwrap();
    let g = TGrid::midpoint(&p.dist, 400).unwrap();
    check_equilibrium(&all_omega(&p, 400), &example1_beliefs(&p), &p, &g, 1e-12).unwrap()
}

fn example1() -> Outcome {
    let pass = example1_check(5.0);
    ensure!(pass.converged && pass.incentive_residual == 0.0, "gamma=5: {pass}");
    let fail = example1_check(4.0);
    ensure!(fail.incentive_residual > 0.0, "gamma=4 passed");
    let d = fail.worst_deviation.clone().ok_or("gamma=4: no deviation recorded")?;
    ensure!(
        d.state == 10 && d.better == Message::singleton(10) && d.cell == 0,
        "gamma=4: worst deviation is state {} cell {} to {}",
        d.state,
        d.cell,
        d.better
    );
    let (mut lo, mut hi) = (4.0, 5.0);
    for _ in 0..30 {
        let mid = (lo + hi) / 2.0;
        if example1_check(mid).incentive_residual == 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let boundary = (10.0 - 1.0) / 2.0;
    ensure!((hi - boundary).abs() < 13.0 / 400.0, "boundary at {hi}, expected {boundary}");
    Ok(format!("gamma=4 residual {}, boundary {hi:.6}", fail.incentive_residual))
}

fn anonymous_statics() -> Outcome {
    let (p, g) = defaults();
    let r = solve_anonymous_restricted(&p, &g).unwrap();
    let u = solve_anonymous_unrestricted(&p, &g).unwrap();
    let (lr, lu) = (liar_set(&r), liar_set(&u));
    for i in 1..p.n() {
        let cells_r: Vec<_> = lr.iter().filter(|(s, _)| *s == i).collect();
        let cells_u: Vec<_> = lu.iter().filter(|(s, _)| *s == i).collect();
        ensure!(cells_u.iter().all(|x| lr.contains(x)), "i={i}: an A-UR liar tells the truth in A-R");
        ensure!(cells_u.len() < cells_r.len(), "i={i}: liar sets not strictly nested");
    }
    ensure!(lu.is_subset(&lr), "truthful A-R cells lie in A-UR");
    let diff = expected_earnings(&u, &g).unwrap() - expected_earnings(&r, &g).unwrap();
    ensure!(diff > 0.0, "earnings difference {diff}");
    Ok(format!("|liars| A-R {} > A-UR {}, earnings gap {diff:.4}", lr.len(), lu.len()))
}

fn na_r_structure() -> Outcome {
    let (p, g) = defaults();
    let fp = solve_fixed_point(Environment::NA_R, &p, &g, Seed::Truthful, &SolverOptions::default()).unwrap();
    let rep = &fp.report;
    ensure!(rep.converged && rep.belief_residual < 1e-6 && rep.iterations <= 10_000, "solver: {rep}");
    ensure!(rep.liar_mass > 0.0, "no lies");
    for (i, c, row) in fp.profile.rows() {
        for (m, q) in row {
            ensure!(!(*q > 0.0 && m.highest() < i), "underreport {m} by ({i}, cell {c})");
        }
    }
    let l = extract_threshold_l(&fp.profile).unwrap().ok_or("no liars")?;
    ensure!(l > 1 && l < p.n(), "l* = {l}");
    for (i, c, row) in fp.profile.rows() {
        if i >= l {
            ensure!(row.iter().all(|(m, q)| *q <= 0.0 || m.contains(i)), "({i}, cell {c}) lies above l*");
        }
    }
    let ar = solve_anonymous_restricted(&p, &g).unwrap();
    ensure!(liar_set(&fp.profile).is_subset(&liar_set(&ar)), "NA-R liar outside the A-R liar set");
    let (e_na, e_a) = (expected_earnings(&fp.profile, &g).unwrap(), expected_earnings(&ar, &g).unwrap());
    ensure!(e_na <= e_a, "earnings NA-R {e_na} > A-R {e_a}");
    Ok(format!(
        "{} iterations, belief residual {:e}, liar mass {:.4}, l* = {l}, earnings {e_na:.4} <= {e_a:.4}",
        rep.iterations, rep.belief_residual, rep.liar_mass
    ))
}

fn gamma_zero() -> Outcome {
    let p = Params::with_defaults(10, 0.0).unwrap();
    let g = TGrid::midpoint(&p.dist, 400).unwrap();
    let mut compared = 0;
    for restriction in [Restriction::Restricted, Restriction::Unrestricted] {
        let na = Environment { restriction, ..Environment::NA_R };
        let a = Environment { restriction, ..Environment::A_R };
        let fp = solve_fixed_point(na, &p, &g, Seed::Truthful, &SolverOptions::default()).unwrap();
        ensure!(fp.report.converged, "{na} did not converge: {}", fp.report);
        let closed = match restriction {
            Restriction::Restricted => solve_anonymous_restricted(&p, &g).unwrap(),
            Restriction::Unrestricted => solve_anonymous_unrestricted(&p, &g).unwrap(),
        };
        let a_beliefs = posterior_beliefs(&closed, &g, 0.0).unwrap();
        for (i, c, row) in fp.profile.rows() {
            let t = g.mid(c);
            let br_na = best_response(i, t, &fp.beliefs, na, &p).unwrap();
            let br_a = best_response(i, t, &a_beliefs, a, &p).unwrap();
            ensure!(br_na == br_a, "{na} ({i}, cell {c}): best responses differ");
            let closed_msg = closed.row(i, c)[0].0;
            ensure!(br_a.contains(&closed_msg), "closed form ({i}, cell {c}) plays {closed_msg} outside its best response");
            let top = row.iter().fold(row[0], |a, b| if b.1 > a.1 { *b } else { a }).0;
            ensure!(br_na.contains(&top), "{na} ({i}, cell {c}) mostly plays {top}, not a best response");
            if br_a.len() == 1 {
                ensure!(top == closed_msg, "{na} ({i}, cell {c}) plays {top}, closed form {closed_msg}");
            }
            compared += 1;
        }
    }
    Ok(format!("{compared} (state, cell) best-response sets identical"))
}

fn vague_in_unrestricted() -> Outcome {
    let (p, g) = defaults();
    let aur = solve_anonymous_unrestricted(&p, &g).unwrap();
    let v_a = vague_mass(&aur, &g);
    ensure!(v_a > 0.0, "A-UR closed form has no vague mass");
    let fp = solve_fixed_point(Environment::NA_UR, &p, &g, Seed::Truthful, &SolverOptions::default()).unwrap();
    ensure!(fp.report.converged, "NA-UR did not converge: {}", fp.report);
    let v_na = vague_mass(&fp.profile, &g);
    ensure!(v_na > 0.0, "NA-UR solution has no vague mass");
    let e1 = example1_check(5.0);
    ensure!(e1.converged, "example1 seed does not verify");
    Ok(format!("vague mass A-UR {v_a:.4}, NA-UR {v_na:.4}, example1 at gamma=5 verified (vague mass 1)"))
}

fn monte_carlo() -> Outcome {
    let (p, g) = defaults();
    let start = Instant::now();
    let aur = solve_anonymous_unrestricted(&p, &g).unwrap();
    let cfg = SimConfig::new(100_000, 20_240_601, Environment::A_UR).unwrap();
    let run = || {
        let out = simulate_population(&aur, &p, &g, &cfg).unwrap();
        let mut buf = Vec::new();
        emit_csv(&out.records, &mut buf).unwrap();
        (out.records, buf)
    };
    let (records, first) = run();
    let (_, second) = run();
    let secs = start.elapsed().as_secs_f64();
    ensure!(first == second, "reruns differ");
    let avg = summarize(&records).unwrap().avg_report_unrestricted.unwrap();
    let expected = expected_earnings(&aur, &g).unwrap();
    ensure!((avg - expected).abs() <= 0.03, "average {avg} vs analytic {expected}");
    ensure!(secs < 10.0, "took {secs:.2} s");
    Ok(format!("average {avg:.4} vs analytic {expected:.4}, identical reruns, {secs:.2} s"))
}

fn classifier() -> Outcome {
    let states = StateSpace::new(10).unwrap();
    let m = |v: &[usize]| Message::new(v.iter().copied(), states).unwrap();
    let a = classify_message(&m(&[6, 9, 10]), None, states);
    ensure!(a.kind == MessageKind::PseudoOptimal, "{{6,9,10}} is {:?}", a.kind);
    let b = classify_message(&m(&[6, 7, 8, 9, 10]), None, states);
    ensure!(b.kind != MessageKind::PseudoOptimal && b.interval_flag, "{{6..10}} is {:?}", b);
    let c = classify_message(&m(&[8, 10]), Some(8), states);
    ensure!(c.kind == MessageKind::Optimal, "{{8,10}} with state 8 is {:?}", c.kind);
    Ok("three reference messages labeled as expected".into())
}

fn paired_h2() -> Outcome {
    let (p, g) = defaults();
    let r = solve_anonymous_restricted(&p, &g).unwrap();
    let u = solve_anonymous_unrestricted(&p, &g).unwrap();
    let cfg = SimConfig::new(10_000, 7, Environment::A_R).unwrap();
    let out = paired_session(&r, &u, &p, &g, &cfg).unwrap();
    let freq = |stage: Restriction| {
        let rows: Vec<_> = out.records.iter().filter(|x| x.stage == stage).collect();
        rows.iter().filter(|x| x.is_truthful() == Some(false)).count() as f64 / rows.len() as f64
    };
    let (fr, fu) = (freq(Restriction::Restricted), freq(Restriction::Unrestricted));
    ensure!(fr > fu, "lying restricted {fr} <= unrestricted {fu}");
    let typology = classify_subjects(&out.records).unwrap();
    let conditional = typology.count(SubjectType::ConditionalLiar);
    ensure!(conditional > 0, "no conditional liars");
    let top = Message::singleton(p.n());
    for x in &out.records {
        if x.stage == Restriction::Restricted && typology.subjects[&x.subject_id].label == SubjectType::ConditionalLiar {
            ensure!(x.message == top, "conditional liar {} reported {} when restricted", x.subject_id, x.message);
        }
    }
    Ok(format!("lying {fr:.4} restricted vs {fu:.4} unrestricted, {conditional} conditional liars all reporting {top}"))
}

fn ratio(v: &serde_json::Value) -> f64 {
    Rational64::from_str(v.as_str().expect("fraction string")).unwrap().to_f64().unwrap()
}

fn fixture() -> Outcome {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let records = ingest_csv_path(dir.join("reports.csv")).map_err(|e| e.to_string())?;
    let expected: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("reports.expected.json")).unwrap()).unwrap();

    let s = summarize(&records).unwrap();
    ensure!(s.n == expected["n"].as_u64().unwrap() as usize, "n = {}", s.n);
    ensure!(s.n_restricted == expected["n_restricted"].as_u64().unwrap() as usize, "n_restricted");
    ensure!(s.n_unrestricted == expected["n_unrestricted"].as_u64().unwrap() as usize, "n_unrestricted");
    for (key, got) in [
        ("avg_report_restricted", s.avg_report_restricted),
        ("avg_report_unrestricted", s.avg_report_unrestricted),
        ("vague_share", s.vague_share),
        ("avg_length", s.avg_length),
    ] {
        ensure!(got == Some(ratio(&expected[key])), "{key}: {got:?} vs {}", expected[key]);
    }

    let typology = classify_subjects(&records).unwrap();
    let want: BTreeMap<String, String> = serde_json::from_value(expected["typology"].clone()).unwrap();
    let got: BTreeMap<String, String> =
        typology.subjects.iter().map(|(k, v)| (k.clone(), v.label.as_str().to_string())).collect();
    ensure!(got == want, "typology {got:?}");

    let cdf = length_cdf(&records).unwrap();
    let want: Vec<(usize, f64)> = expected["length_cdf"]
        .as_array()
        .unwrap()
        .iter()
        .map(|pair| (pair[0].as_u64().unwrap() as usize, ratio(&pair[1])))
        .collect();
    ensure!(cdf == want, "cdf {cdf:?}");
    Ok(format!("{} records: summary, typology and CDF exact", records.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("ovm oracle equivalence", ovm_oracle),
        ("all-states pooling equilibrium boundary", example1),
        ("anonymous comparative statics", anonymous_statics),
        ("non-anonymous restricted structure", na_r_structure),
        ("gamma = 0 matches anonymous closed forms", gamma_zero),
        ("vague messages in unrestricted solutions", vague_in_unrestricted),
        ("monte carlo consistency", monte_carlo),
        ("classifier examples", classifier),
        ("paired-session lying direction", paired_h2),
        ("analysis fixture", fixture),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
